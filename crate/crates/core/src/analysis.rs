//! Weight sweeps, shortfall time series and the cost-effectiveness curve.
//!
//! The emitters write plain data (CSV with a fixed header, or JSON). No
//! timing or other run-dependent value is written, so identical inputs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{self, CheckError, CheckOptions, Entity};
use crate::fgp::{self, FgpError, FgpOptions, IdealPoints};
use crate::instance::Instance;
use crate::model::ObjectiveId;
use crate::par;
use crate::solution::{Entry, Solution};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("grid must have at least 2 steps, got {0}")]
    Grid(usize),
    #[error("a sweep needs at least 2 objectives")]
    TooFewObjectives,
    #[error(transparent)]
    Fgp(#[from] FgpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid: usize,
    /// Walk the whole weight simplex instead of the (w1, w2) plane with
    /// `w3 = 1 - w1 - w2` and every later weight 0.
    pub full_simplex: bool,
    /// Solve grid points concurrently.
    pub parallel: bool,
    pub fgp: FgpOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { grid: 5, full_simplex: false, parallel: par::available(), fgp: FgpOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Solved,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// One weight per participating objective.
    pub weights: Vec<f64>,
    /// Objective values at the compromise (empty when the solve failed).
    pub values: Vec<f64>,
    pub lambda: Vec<f64>,
    pub status: RowStatus,
    /// The decoded plan passed the independent checker.
    pub checked: bool,
    pub nodes: usize,
    #[serde(skip)]
    pub wall: Duration,
    #[serde(skip)]
    pub solution: Option<Solution>,
}

impl SweepRow {
    pub fn is_solved(&self) -> bool {
        self.status == RowStatus::Solved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub objectives: Vec<ObjectiveId>,
    pub grid: usize,
    pub full_simplex: bool,
    pub pis: Vec<f64>,
    pub nis: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Grid weights in deterministic order.
///
/// In the plane form `(i/g, j/g, 1 - (i+j)/g, 0, ...)` for `i + j <= g`, `i`
/// outermost. The full form lists every composition of `g` into `k` parts
/// in lexicographic order.
pub fn grid_weights(k: usize, grid: usize, full_simplex: bool) -> Vec<Vec<f64>> {
    let g = grid as f64;
    if k == 2 {
        return (0..=grid).map(|i| vec![i as f64 / g, (grid - i) as f64 / g]).collect();
    }
    if !full_simplex {
        let mut out = Vec::new();
        for i in 0..=grid {
            for j in 0..=grid - i {
                let mut w = vec![0.0; k];
                w[0] = i as f64 / g;
                w[1] = j as f64 / g;
                w[2] = (grid - i - j) as f64 / g;
                out.push(w);
            }
        }
        return out;
    }
    let mut out = Vec::new();
    let mut parts = vec![0usize; k];
    compositions(grid, 0, &mut parts, &mut out);
    out.into_iter().map(|p| p.iter().map(|&x| x as f64 / g).collect()).collect()
}

fn compositions(left: usize, pos: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == parts.len() {
        parts[pos] = left;
        out.push(parts.clone());
        return;
    }
    for x in 0..=left {
        parts[pos] = x;
        compositions(left - x, pos + 1, parts, out);
    }
}

/// Solves the compromise problem at every grid point of the weight simplex.
pub fn weight_sweep(inst: &Instance, opts: &SweepOptions) -> Result<SweepTable, AnalysisError> {
    if opts.grid < 2 {
        return Err(AnalysisError::Grid(opts.grid));
    }
    let k = opts.fgp.objectives.len();
    if k < 2 {
        return Err(AnalysisError::TooFewObjectives);
    }
    let (model, ideals) = fgp::compute_pis(inst, &opts.fgp)?;
    let points = grid_weights(k, opts.grid, opts.full_simplex);
    // each grid point runs its own search sequentially
    let mut point_opts = opts.fgp.clone();
    point_opts.parallel = false;
    point_opts.mip.simplex.parallel = false;
    let check = CheckOptions { literal_injury_balance: opts.fgp.assembly.literal_injury_balance, ..CheckOptions::default() };
    let rows = par::map(&points, opts.parallel, |w| solve_point(inst, &model, &ideals, w, &point_opts, &check));
    Ok(SweepTable {
        objectives: opts.fgp.objectives.clone(),
        grid: opts.grid,
        full_simplex: opts.full_simplex,
        pis: ideals.pis.clone(),
        nis: ideals.nis.clone(),
        rows,
    })
}

fn solve_point(
    inst: &Instance,
    model: &crate::model::Model,
    ideals: &IdealPoints,
    weights: &[f64],
    opts: &FgpOptions,
    check: &CheckOptions,
) -> SweepRow {
    let start = Instant::now();
    match fgp::solve_master(inst, model, ideals, weights, opts) {
        Ok(res) => {
            let checked = checker::check_with(inst, &res.solution, check).map(|r| r.pass).unwrap_or(false);
            let status =
                if checked { RowStatus::Solved } else { RowStatus::Failed("plan rejected by the checker".into()) };
            SweepRow {
                weights: weights.to_vec(),
                values: res.values,
                lambda: res.lambda,
                status,
                checked,
                nodes: res.nodes,
                wall: start.elapsed(),
                solution: Some(res.solution),
            }
        }
        Err(e) => SweepRow {
            weights: weights.to_vec(),
            values: Vec::new(),
            lambda: Vec::new(),
            status: RowStatus::Failed(e.to_string()),
            checked: false,
            nodes: 0,
            wall: start.elapsed(),
            solution: None,
        },
    }
}

impl SweepTable {
    /// Values of objective `id` over the solved rows, in row order.
    pub fn column(&self, id: ObjectiveId) -> Vec<f64> {
        let Some(i) = self.objectives.iter().position(|&o| o == id) else { return Vec::new() };
        self.rows.iter().filter(|r| r.is_solved()).map(|r| r.values[i]).collect()
    }

    pub fn wall_time(&self) -> Duration {
        self.rows.iter().map(|r| r.wall).sum()
    }

    pub fn to_csv(&self) -> String {
        let k = self.objectives.len();
        let mut out = String::new();
        let mut header: Vec<String> = (1..=k).map(|i| format!("w{}", self.objectives[i - 1].number())).collect();
        header.extend(self.objectives.iter().map(|o| format!("obj{}", o.number())));
        header.extend(self.objectives.iter().map(|o| format!("lambda{}", o.number())));
        header.extend(["status", "checked", "nodes"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> = row.weights.iter().map(|w| fmt_num(*w)).collect();
            for i in 0..k {
                cells.push(row.values.get(i).map(|v| fmt_num(*v)).unwrap_or_default());
            }
            for i in 0..k {
                cells.push(row.lambda.get(i).map(|v| fmt_num(*v)).unwrap_or_default());
            }
            cells.push(match &row.status {
                RowStatus::Solved => "solved".into(),
                RowStatus::Failed(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
            });
            cells.push(row.checked.to_string());
            cells.push(row.nodes.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables always serialise")
    }
}

/// Rounds away float noise below 1e-9 so emitted tables stay readable.
fn fmt_num(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

/// Unbiased sample variance; 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub entity: String,
    /// `None` for the total over all nodes.
    pub node: Option<String>,
    /// Modeled shortfall recorded in each period.
    pub per_period: Vec<f64>,
    /// Running sum of `per_period`.
    pub cumulative: Vec<f64>,
    /// Demand still outstanding at the end of each period under the
    /// worst-case realisation: robust demand so far minus deliveries so far.
    pub backlog: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortfallSeries {
    pub periods: usize,
    pub injuries: Vec<Series>,
    pub commodities: Vec<Series>,
}

/// Shortfall time series per (entity, demand node), plus a total per entity
/// over all nodes. Entities and nodes keep the instance's order.
pub fn shortfall_series(inst: &Instance, sol: &Solution) -> Result<ShortfallSeries, CheckError> {
    let worst = checker::all_worst_cases(inst, sol)?;
    let backlog_of = |entity: Entity, p: usize| -> Vec<f64> {
        let mut out = vec![0.0; inst.periods];
        for ((e, q, t), wc) in &worst {
            if *e == entity && *q == p {
                out[t - 1] = wc.shortfall;
            }
        }
        out
    };
    let build = |entries: &[Entry], entities: Vec<(&str, Entity)>| -> Vec<Series> {
        let mut out = Vec::new();
        for (e, entity) in entities {
            let mut total_per = vec![0.0; inst.periods];
            let mut total_backlog = vec![0.0; inst.periods];
            for p in inst.demand_nodes() {
                let node = &inst.nodes[p].id;
                let mut per = vec![0.0; inst.periods];
                for x in entries.iter().filter(|x| x.entity == e && &x.node == node) {
                    if (1..=inst.periods).contains(&x.period) {
                        per[x.period - 1] += x.value;
                    }
                }
                let backlog = backlog_of(entity, p);
                for t in 0..inst.periods {
                    total_per[t] += per[t];
                    total_backlog[t] += backlog[t];
                }
                out.push(series(e, Some(node.clone()), per, backlog));
            }
            out.push(series(e, None, total_per, total_backlog));
        }
        out
    };
    Ok(ShortfallSeries {
        periods: inst.periods,
        injuries: build(
            &sol.unserved_injuries,
            inst.injuries.iter().enumerate().map(|(h, x)| (x.id.as_str(), Entity::Injury(h))).collect(),
        ),
        commodities: build(
            &sol.unmet_commodity,
            inst.commodities.iter().enumerate().map(|(a, x)| (x.id.as_str(), Entity::Commodity(a))).collect(),
        ),
    })
}

fn series(entity: &str, node: Option<String>, per_period: Vec<f64>, backlog: Vec<f64>) -> Series {
    let cumulative = per_period
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Series { entity: entity.to_string(), node, per_period, cumulative, backlog }
}

impl ShortfallSeries {
    pub fn find(&self, entity: &str, node: Option<&str>) -> Option<&Series> {
        self.injuries
            .iter()
            .chain(&self.commodities)
            .find(|s| s.entity == entity && s.node.as_deref() == node)
    }

    /// Long-format CSV: `kind,entity,node,period,per_period,cumulative,backlog`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,entity,node,period,per_period,cumulative,backlog\n");
        for (kind, list) in [("injury", &self.injuries), ("commodity", &self.commodities)] {
            for s in list {
                for t in 0..self.periods {
                    let _ = writeln!(
                        out,
                        "{kind},{},{},{},{},{},{}",
                        s.entity,
                        s.node.as_deref().unwrap_or("all"),
                        t + 1,
                        fmt_num(s.per_period[t]),
                        fmt_num(s.cumulative[t]),
                        fmt_num(s.backlog[t])
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cost: f64,
    /// Combined unmet demand, unserved injuries plus unmet commodities.
    pub unmet: f64,
}

/// Cost against combined unmet demand over the solved sweep rows, sorted by
/// cost with equal costs merged (best service kept) and dominated points
/// dropped, so unmet demand strictly falls as cost rises.
pub fn effectiveness_curve(table: &SweepTable) -> Vec<CurvePoint> {
    let pos = |id| table.objectives.iter().position(|&o| o == id);
    let (Some(i1), Some(i2), Some(i3)) =
        (pos(ObjectiveId::UnservedInjuries), pos(ObjectiveId::UnmetCommodity), pos(ObjectiveId::SystemCost))
    else {
        return Vec::new();
    };
    let mut pts: Vec<CurvePoint> = table
        .rows
        .iter()
        .filter(|r| r.is_solved())
        .map(|r| CurvePoint { cost: r.values[i3], unmet: r.values[i1] + r.values[i2] })
        .collect();
    pareto_front(&mut pts)
}

/// Sorts by cost and keeps only points that improve on every cheaper one.
pub fn pareto_front(pts: &mut [CurvePoint]) -> Vec<CurvePoint> {
    pts.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.unmet.total_cmp(&b.unmet)));
    let mut out: Vec<CurvePoint> = Vec::new();
    for &p in pts.iter() {
        match out.last() {
            Some(last) if (p.cost - last.cost).abs() <= 1e-9 * (1.0 + last.cost.abs()) => {}
            Some(last) if p.unmet >= last.unmet - 1e-9 * (1.0 + last.unmet.abs()) => {}
            _ => out.push(p),
        }
    }
    out
}

/// `cost,unmet` CSV for an effectiveness curve.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("cost,unmet\n");
    for p in points {
        let _ = writeln!(out, "{},{}", fmt_num(p.cost), fmt_num(p.unmet));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_grid_is_triangular() {
        let w = grid_weights(4, 2, false);
        assert_eq!(w.len(), 6);
        assert_eq!(w[0], vec![0.0, 0.0, 1.0, 0.0]);
        assert!(w.iter().all(|x| (x.iter().sum::<f64>() - 1.0).abs() < 1e-12 && x[3] == 0.0));
        assert_eq!(grid_weights(4, 5, false).len(), 21);
    }

    #[test]
    fn full_grid_counts_compositions() {
        // C(g + k - 1, k - 1) with g = 2, k = 4
        assert_eq!(grid_weights(4, 2, true).len(), 10);
        assert_eq!(grid_weights(2, 4, false).len(), 5);
    }

    #[test]
    fn variance_of_constants_is_zero() {
        assert_eq!(sample_variance(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(sample_variance(&[1.0, 3.0]), 2.0);
        assert_eq!(sample_variance(&[1.0]), 0.0);
    }

    #[test]
    fn pareto_front_merges_and_drops() {
        let p = |cost, unmet| CurvePoint { cost, unmet };
        assert_eq!(pareto_front(&mut [p(5.0, 1.0)]), vec![p(5.0, 1.0)]);
        assert_eq!(pareto_front(&mut [p(5.0, 3.0), p(5.0, 1.0)]), vec![p(5.0, 1.0)]);
        let front = pareto_front(&mut [p(9.0, 2.0), p(1.0, 10.0), p(4.0, 12.0), p(6.0, 2.0)]);
        assert_eq!(front, vec![p(1.0, 10.0), p(6.0, 2.0)]);
    }

    #[test]
    fn short_grid_rejected() {
        let inst = Instance::skeleton(1, vec![], vec![], vec![], vec![]);
        let opts = SweepOptions { grid: 1, ..SweepOptions::default() };
        assert_eq!(weight_sweep(&inst, &opts), Err(AnalysisError::Grid(1)));
    }
}
