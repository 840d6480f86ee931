//! Branch-and-bound over simplex relaxations.
//!
//! Nodes are explored best-bound first. After each branching the floor child
//! is solved immediately (a depth-first dive) while the ceiling child waits
//! in the queue, so incumbents are found early without giving up the
//! best-bound proof of optimality.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::lp::LinearProgram;
use crate::simplex::{self, LpStatus, SimplexError, SimplexOptions, WarmLp, WarmResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipOptions {
    pub node_limit: usize,
    pub integrality_tol: f64,
    /// Absolute tolerance used when comparing a node bound to the incumbent.
    pub prune_tol: f64,
    /// Re-solve nodes from the previous tableau with the dual simplex.
    pub warm_start: bool,
    pub simplex: SimplexOptions,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self { node_limit: 1_000_000, integrality_tol: 1e-6, prune_tol: 1e-9, warm_start: true, simplex: SimplexOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit hit; `values` hold the incumbent (if any) and `gap > 0`.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipOutcome {
    pub status: MipStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
    pub best_bound: f64,
    pub gap: f64,
    /// Incumbent objective after each improvement, in discovery order.
    pub incumbent_trace: Vec<f64>,
}

impl MipOutcome {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, MipStatus::Optimal) || (self.status == MipStatus::NodeLimit && self.objective.is_finite())
    }
}

struct Pending {
    bound: f64,
    seq: usize,
    changes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    /// Max-heap order: smaller bound first; on a tie the deeper, then the
    /// newer node, so plateaus are searched depth first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.changes.len().cmp(&other.changes.len()))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

pub fn solve_mip(lp: &LinearProgram) -> Result<MipOutcome, SimplexError> {
    solve_mip_with(lp, &MipOptions::default())
}

pub fn solve_mip_with(lp: &LinearProgram, opts: &MipOptions) -> Result<MipOutcome, SimplexError> {
    let n = lp.num_columns();
    let integral: Vec<usize> = lp.integral_columns().collect();
    let mut root_lower: Vec<f64> = lp.columns.iter().map(|c| c.lower).collect();
    let mut root_upper: Vec<f64> = lp.columns.iter().map(|c| c.upper).collect();
    for &j in &integral {
        root_lower[j] = (root_lower[j] - opts.integrality_tol).ceil();
        if root_upper[j].is_finite() {
            root_upper[j] = (root_upper[j] + opts.integrality_tol).floor();
        }
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut dive: Option<Vec<(usize, f64, f64)>> = Some(Vec::new());
    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();
    let threshold = |inc: &Option<(f64, Vec<f64>)>| inc.as_ref().map(|(best, _)| best - opts.prune_tol * (1.0 + best.abs()));
    let cutoff = |inc: &Option<(f64, Vec<f64>)>, bound: f64| threshold(inc).is_some_and(|t| bound >= t);
    let mut warm: Option<WarmLp> = None;

    loop {
        let changes = match dive.take() {
            Some(c) => c,
            None => match heap.pop() {
                Some(Pending { bound, changes, .. }) => {
                    if cutoff(&incumbent, bound) {
                        // every remaining node is at least as bad
                        heap.clear();
                        continue;
                    }
                    changes
                }
                None => break,
            },
        };
        if nodes >= opts.node_limit {
            let open_bound = heap.iter().map(|p| p.bound).fold(f64::INFINITY, f64::min);
            return Ok(finish_limit(incumbent, open_bound, nodes, trace, n));
        }
        nodes += 1;

        lower.copy_from_slice(&root_lower);
        upper.copy_from_slice(&root_upper);
        for &(j, lo, hi) in &changes {
            lower[j] = lo;
            upper[j] = hi;
        }
        let out = if !opts.warm_start {
            simplex::solve_lp_bounded(lp, &lower, &upper, &opts.simplex)?
        } else if let Some(w) = warm.as_mut() {
            match w.resolve(&lower, &upper, threshold(&incumbent))? {
                WarmResult::Solved(out) => out,
                WarmResult::CutOff(_) => continue,
            }
        } else {
            let (w, out) = WarmLp::new(lp, &lower, &upper, &opts.simplex)?;
            warm = Some(w);
            out
        };
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    // an unbounded relaxation only proves unboundedness once
                    // some integral point is feasible
                    if !integral.is_empty() {
                        let mut feasibility = lp.clone();
                        feasibility.set_costs(&vec![0.0; n], 0.0);
                        let probe = solve_mip_with(&feasibility, opts)?;
                        if probe.status != MipStatus::Optimal {
                            return Ok(MipOutcome { nodes: nodes + probe.nodes, incumbent_trace: trace, ..probe });
                        }
                    }
                    return Ok(MipOutcome {
                        status: MipStatus::Unbounded,
                        objective: f64::NEG_INFINITY,
                        values: vec![0.0; n],
                        nodes,
                        best_bound: f64::NEG_INFINITY,
                        gap: f64::INFINITY,
                        incumbent_trace: trace,
                    });
                }
                // bounded at the root, so a child cannot be unbounded
                continue;
            }
            LpStatus::Optimal => {}
        }
        if cutoff(&incumbent, out.objective) {
            continue;
        }

        // most fractional integral column, ties to the lowest index
        let mut branch: Option<(usize, f64)> = None;
        for &j in &integral {
            let v = out.values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > opts.integrality_tol && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let mut values = out.values;
                for &j in &integral {
                    values[j] = values[j].round();
                }
                let objective = lp.objective_value(&values);
                let objective = if (objective - out.objective).abs() <= 1e-7 * (1.0 + objective.abs()) {
                    objective
                } else {
                    out.objective
                };
                trace.push(objective);
                incumbent = Some((objective, values));
            }
            Some((j, _)) => {
                let v = out.values[j];
                let mut down = changes.clone();
                down.push((j, lower[j], v.floor()));
                let mut up = changes;
                up.push((j, v.ceil(), upper[j]));
                seq += 1;
                heap.push(Pending { bound: out.objective, seq, changes: up });
                dive = Some(down);
            }
        }
    }

    Ok(match incumbent {
        Some((objective, values)) => MipOutcome {
            status: MipStatus::Optimal,
            objective,
            values,
            nodes,
            best_bound: objective,
            gap: 0.0,
            incumbent_trace: trace,
        },
        None => MipOutcome {
            status: MipStatus::Infeasible,
            objective: f64::INFINITY,
            values: vec![0.0; n],
            nodes,
            best_bound: f64::INFINITY,
            gap: 0.0,
            incumbent_trace: trace,
        },
    })
}

fn finish_limit(incumbent: Option<(f64, Vec<f64>)>, open_bound: f64, nodes: usize, trace: Vec<f64>, n: usize) -> MipOutcome {
    match incumbent {
        Some((objective, values)) => {
            let bound = open_bound.min(objective);
            MipOutcome {
                status: MipStatus::NodeLimit,
                objective,
                values,
                nodes,
                best_bound: bound,
                gap: (objective - bound).max(0.0),
                incumbent_trace: trace,
            }
        }
        None => MipOutcome {
            status: MipStatus::NodeLimit,
            objective: f64::INFINITY,
            values: vec![0.0; n],
            nodes,
            best_bound: open_bound,
            gap: f64::INFINITY,
            incumbent_trace: trace,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{ColumnKind, RowSense, RowTag, INF};

    #[test]
    fn integral_relaxation_takes_one_node() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 5.0, ColumnKind::Integer, -1.0);
        lp.add_row(vec![(x, 1.0)], RowSense::Le, 3.0, RowTag::generic(0));
        let out = solve_mip(&lp).unwrap();
        assert_eq!(out.status, MipStatus::Optimal);
        assert_eq!(out.nodes, 1);
        assert_eq!(out.objective, -3.0);
    }

    #[test]
    fn binary_knapsack() {
        // maximise 3x + 2y subject to x + y <= 1
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 1.0, ColumnKind::Binary, -3.0);
        let y = lp.add_column(0.0, 1.0, ColumnKind::Binary, -2.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], RowSense::Le, 1.0, RowTag::generic(0));
        let out = solve_mip(&lp).unwrap();
        assert!((out.objective + 3.0).abs() < 1e-9);
        assert_eq!(out.values, vec![1.0, 0.0]);
    }

    #[test]
    fn fractional_relaxation_branches() {
        // max x + y, 2x + 2y <= 3 over integers: LP 1.5, MIP 1
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 10.0, ColumnKind::Integer, -1.0);
        let y = lp.add_column(0.0, 10.0, ColumnKind::Integer, -1.0);
        lp.add_row(vec![(x, 2.0), (y, 2.0)], RowSense::Le, 3.0, RowTag::generic(0));
        let out = solve_mip(&lp).unwrap();
        assert_eq!(out.status, MipStatus::Optimal);
        assert!((out.objective + 1.0).abs() < 1e-9);
        assert!(out.nodes > 1);
        assert!(out.incumbent_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_integer_program() {
        // 2x = 1 has no integer solution
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 3.0, ColumnKind::Integer, 0.0);
        lp.add_row(vec![(x, 2.0)], RowSense::Eq, 1.0, RowTag::generic(0));
        assert_eq!(solve_mip(&lp).unwrap().status, MipStatus::Infeasible);
    }

    #[test]
    fn unbounded_relaxation_without_integer_points_is_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 1.0, ColumnKind::Binary, 0.0);
        let y = lp.add_column(0.0, INF, ColumnKind::Continuous, -1.0);
        lp.add_row(vec![(x, 3.0)], RowSense::Eq, 2.0, RowTag::generic(0));
        lp.add_row(vec![(y, 1.0)], RowSense::Ge, 0.0, RowTag::generic(1));
        assert_eq!(solve_mip(&lp).unwrap().status, MipStatus::Infeasible);

        // with an integral point the program really is unbounded
        lp.rows[0].rhs = 3.0;
        assert_eq!(solve_mip(&lp).unwrap().status, MipStatus::Unbounded);
    }

    #[test]
    fn node_limit_is_flagged() {
        let mut lp = LinearProgram::new();
        let cols: Vec<usize> = (0..6).map(|_| lp.add_column(0.0, 1.0, ColumnKind::Binary, -1.0)).collect();
        lp.add_row(cols.iter().map(|&j| (j, 2.0)).collect(), RowSense::Le, 5.0, RowTag::generic(0));
        let opts = MipOptions { node_limit: 2, ..MipOptions::default() };
        let out = solve_mip_with(&lp, &opts).unwrap();
        assert_eq!(out.status, MipStatus::NodeLimit);
        assert!(out.gap > 0.0);
    }
}
