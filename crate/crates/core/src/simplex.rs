//! Dense two-phase primal simplex with implicit column bounds.
//!
//! Columns are shifted to `[0, upper - lower]` and nonbasic columns sit at
//! either bound, so box constraints never become rows. The tableau is kept
//! explicitly (`B^-1 A`), which is fine for the desk-scale models this crate
//! builds. Pivot updates only touch the nonzeros of the pivot row and skip
//! rows with a zero pivot-column entry; with the `parallel` feature the row
//! sweep can be spread over rayon workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, RowSense};
use crate::par;

/// Entering-column rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pricing {
    /// Lowest eligible index enters, lowest variable index leaves on ties.
    Bland,
    /// Most negative reduced cost enters; falls back to Bland after a run of
    /// degenerate pivots and returns to Dantzig on the next improving step.
    Dantzig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub pricing: Pricing,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// `None` picks a cap proportional to the tableau size.
    pub max_iterations: Option<usize>,
    pub parallel: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pricing: Pricing::Dantzig,
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
            parallel: par::available(),
        }
    }
}

impl SimplexOptions {
    pub fn bland() -> Self {
        Self { pricing: Pricing::Bland, ..Self::default() }
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Objective including the program's offset; meaningful when optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    /// `tight_rows[i]` is true when row `i` holds with equality.
    pub tight_rows: Vec<bool>,
    pub iterations: usize,
}

impl LpOutcome {
    fn without_solution(status: LpStatus, lp: &LinearProgram, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: vec![0.0; lp.num_columns()],
            tight_rows: vec![false; lp.num_rows()],
            iterations,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("simplex iteration cap {limit} exceeded in phase {phase} (objective {objective})")]
    IterationLimit { limit: usize, phase: u8, objective: f64 },
    #[error("column {column} needs a finite lower bound")]
    UnboundedBelow { column: usize },
    #[error("column {column} has a NaN bound or cost")]
    NotANumber { column: usize },
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, SimplexError> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, SimplexError> {
    let lower: Vec<f64> = lp.columns.iter().map(|c| c.lower).collect();
    let upper: Vec<f64> = lp.columns.iter().map(|c| c.upper).collect();
    solve_lp_bounded(lp, &lower, &upper, opts)
}

/// Solves `lp` with its column bounds replaced by `lower`/`upper`.
///
/// Integrality flags are ignored.
pub fn solve_lp_bounded(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<LpOutcome, SimplexError> {
    if let Some(out) = screen_bounds(lp, lower, upper, opts)? {
        return Ok(out);
    }
    let (_, out) = cold_solve(lp, lower, upper, opts)?;
    Ok(out)
}

/// Rejects unusable bounds; an empty box is reported as infeasible.
fn screen_bounds(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<Option<LpOutcome>, SimplexError> {
    let n = lp.num_columns();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    for j in 0..n {
        if lower[j].is_nan() || upper[j].is_nan() || lp.columns[j].cost.is_nan() {
            return Err(SimplexError::NotANumber { column: j });
        }
        if !lower[j].is_finite() {
            return Err(SimplexError::UnboundedBelow { column: j });
        }
        if upper[j] < lower[j] - opts.feasibility_tol {
            return Ok(Some(LpOutcome::without_solution(LpStatus::Infeasible, lp, 0)));
        }
    }
    Ok(None)
}

/// Two-phase solve that also hands back the final tableau when optimal.
fn cold_solve(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<(Option<Tableau>, LpOutcome), SimplexError> {
    let mut tab = match Tableau::build(lp, lower, upper, opts) {
        Some(t) => t,
        None => return Ok((None, LpOutcome::without_solution(LpStatus::Infeasible, lp, 0))),
    };
    let limit = opts.max_iterations.unwrap_or(50_000 + 20 * (tab.m + tab.ncols));

    if tab.n_art > 0 {
        tab.load_phase_one_costs();
        match tab.iterate(opts, limit, 1)? {
            PhaseEnd::Optimal => {}
            // phase one is bounded below by zero
            PhaseEnd::Unbounded => unreachable!("phase one cannot be unbounded"),
        }
        let infeasibility: f64 = (0..tab.m)
            .filter(|&i| tab.basis[i] >= tab.art_start)
            .map(|i| tab.beta[i].max(0.0))
            .sum();
        if infeasibility > opts.feasibility_tol * (1.0 + tab.rhs_scale) {
            let it = tab.iterations;
            return Ok((None, LpOutcome::without_solution(LpStatus::Infeasible, lp, it)));
        }
        tab.retire_artificials();
    }

    tab.load_costs(&lp.costs());
    let end = tab.iterate(opts, limit, 2)?;
    if end == PhaseEnd::Unbounded {
        let it = tab.iterations;
        return Ok((None, LpOutcome::without_solution(LpStatus::Unbounded, lp, it)));
    }
    let out = tab.outcome(lp, opts);
    Ok((Some(tab), out))
}

/// Result of a warm re-solve.
#[derive(Debug, Clone, PartialEq)]
pub enum WarmResult {
    Solved(LpOutcome),
    /// The dual bound reached the cutoff before the node was solved.
    CutOff(f64),
}

/// Re-solves one program under changing column bounds.
///
/// The tableau of the last solve is kept. A bound change leaves its reduced
/// costs intact, so the basis stays dual feasible and a bounded dual simplex
/// restores primal feasibility, usually in a handful of pivots. Every node
/// box must lie inside the box passed to [`WarmLp::new`]. Answers that fail
/// a row-residual check, and stalls, are redone from scratch.
pub struct WarmLp<'a> {
    lp: &'a LinearProgram,
    opts: SimplexOptions,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    tab: Option<Tableau>,
    since_refresh: usize,
    /// Solves that had to start from scratch (root included).
    pub cold_solves: usize,
    pub warm_solves: usize,
}

const REFRESH_EVERY: usize = 400;

impl<'a> WarmLp<'a> {
    /// Solves the root box cold and keeps its tableau.
    pub fn new(
        lp: &'a LinearProgram,
        lower: &[f64],
        upper: &[f64],
        opts: &SimplexOptions,
    ) -> Result<(Self, LpOutcome), SimplexError> {
        let (tab, out) = match screen_bounds(lp, lower, upper, opts)? {
            Some(out) => (None, out),
            None => cold_solve(lp, lower, upper, opts)?,
        };
        let warm = Self {
            lp,
            opts: opts.clone(),
            root_lower: lower.to_vec(),
            root_upper: upper.to_vec(),
            tab,
            since_refresh: 0,
            cold_solves: 1,
            warm_solves: 0,
        };
        Ok((warm, out))
    }

    fn refresh(&mut self) -> Result<(), SimplexError> {
        self.tab = cold_solve(self.lp, &self.root_lower, &self.root_upper, &self.opts)?.0;
        self.since_refresh = 0;
        self.cold_solves += 1;
        Ok(())
    }

    /// Solves under `lower`/`upper`. With a cutoff, stops as soon as the
    /// dual bound proves the optimum is at least `cutoff`.
    pub fn resolve(&mut self, lower: &[f64], upper: &[f64], cutoff: Option<f64>) -> Result<WarmResult, SimplexError> {
        let n = self.lp.num_columns();
        for j in 0..n {
            if upper[j] < lower[j] - self.opts.feasibility_tol {
                return Ok(WarmResult::Solved(LpOutcome::without_solution(LpStatus::Infeasible, self.lp, 0)));
            }
        }
        if self.tab.as_ref().is_some_and(|t| t.shaky || self.since_refresh >= REFRESH_EVERY) {
            self.refresh()?;
        }
        let Some(tab) = self.tab.as_mut() else {
            self.cold_solves += 1;
            return solve_lp_bounded(self.lp, lower, upper, &self.opts).map(WarmResult::Solved);
        };
        self.since_refresh += 1;
        self.warm_solves += 1;
        tab.iterations = 0;
        tab.apply_bounds(lower, upper);
        let cut = cutoff.map(|c| c - self.lp.objective_offset);
        let limit = tab.m + 100;
        let end = match tab.dual_iterate(&self.opts, limit, cut) {
            Ok(end) => end,
            Err(_) => DualEnd::Stalled,
        };
        match end {
            DualEnd::Infeasible => {
                return Ok(WarmResult::Solved(LpOutcome::without_solution(LpStatus::Infeasible, self.lp, tab.iterations)))
            }
            DualEnd::CutOff(bound) => return Ok(WarmResult::CutOff(bound + self.lp.objective_offset)),
            DualEnd::Feasible => {
                if let Ok(PhaseEnd::Optimal) = tab.iterate(&self.opts, limit, 2) {
                    let out = tab.outcome(self.lp, &self.opts);
                    let scale = 1.0 + tab.rhs_scale;
                    let bounds_ok = (0..n).all(|j| {
                        out.values[j] >= lower[j] - 1e-9 * scale && out.values[j] <= upper[j] + 1e-9 * scale
                    });
                    if bounds_ok && self.lp.max_violation(&out.values) <= 1e-6 * scale {
                        return Ok(WarmResult::Solved(out));
                    }
                }
            }
            DualEnd::Stalled => {}
        }
        // unreliable warm answer: redo this node cold and rebuild the tableau next time
        self.tab = None;
        let out = solve_lp_bounded(self.lp, lower, upper, &self.opts)?;
        self.cold_solves += 1;
        self.refresh()?;
        Ok(WarmResult::Solved(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DualEnd {
    Feasible,
    Infeasible,
    CutOff(f64),
    Stalled,
}

const DROP_TOL: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;
const DUAL_PIVOT_TOL: f64 = 1e-7;
const DUAL_HARRIS_TOL: f64 = 1e-9;
const SHAKY_PIVOT: f64 = 1e-5;

struct Tableau {
    m: usize,
    ncols: usize,
    art_start: usize,
    n_art: usize,
    /// Row-major `m x ncols` copy of `B^-1 A`.
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    range: Vec<f64>,
    /// Current lower bound of each structural column; `x = lo + shifted`.
    lo: Vec<f64>,
    /// Set after a pivot on a small element; the tableau is rebuilt before reuse.
    shaky: bool,
    cost: Vec<f64>,
    d: Vec<f64>,
    enterable: Vec<bool>,
    rhs_scale: f64,
    iterations: usize,
}

impl Tableau {
    /// `None` when an empty row is already violated.
    fn build(lp: &LinearProgram, lower: &[f64], upper: &[f64], opts: &SimplexOptions) -> Option<Self> {
        let n = lp.num_columns();
        struct Prepared<'a> {
            row: &'a crate::lp::Row,
            rhs: f64,
        }
        let mut kept = Vec::new();
        for row in &lp.rows {
            let shifted = row.rhs - row.coeffs.iter().map(|&(j, a)| a * lower[j]).sum::<f64>();
            let live = row.coeffs.iter().any(|&(j, a)| a != 0.0 && upper[j] > lower[j]);
            if !live {
                // every term is pinned at its lower bound
                let ok = match row.sense {
                    RowSense::Le => shifted >= -opts.feasibility_tol * (1.0 + row.rhs.abs()),
                    RowSense::Ge => shifted <= opts.feasibility_tol * (1.0 + row.rhs.abs()),
                    RowSense::Eq => shifted.abs() <= opts.feasibility_tol * (1.0 + row.rhs.abs()),
                };
                if !ok {
                    return None;
                }
                continue;
            }
            kept.push(Prepared { row, rhs: shifted });
        }

        let m = kept.len();
        let n_slack = kept.iter().filter(|p| p.row.sense != RowSense::Eq).count();
        let mut needs_art = vec![false; m];
        let mut slack_col = vec![usize::MAX; m];
        let mut sign = vec![1.0; m];
        let mut next_slack = n;
        for (i, p) in kept.iter().enumerate() {
            let slack_coef = match p.row.sense {
                RowSense::Le => 1.0,
                RowSense::Ge => -1.0,
                RowSense::Eq => 0.0,
            };
            if slack_coef != 0.0 {
                slack_col[i] = next_slack;
                next_slack += 1;
            }
            if p.rhs < 0.0 || (p.rhs == 0.0 && p.row.sense == RowSense::Ge) {
                sign[i] = -1.0;
            }
            needs_art[i] = slack_coef * sign[i] <= 0.0;
        }
        let art_start = n + n_slack;
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let ncols = art_start + n_art;

        let mut a = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut state = vec![State::AtLower; ncols];
        let mut range = vec![f64::INFINITY; ncols];
        for j in 0..n {
            range[j] = (upper[j] - lower[j]).max(0.0);
        }
        let mut next_art = art_start;
        let mut rhs_scale: f64 = 0.0;
        for (i, p) in kept.iter().enumerate() {
            let s = sign[i];
            let row = &mut a[i * ncols..(i + 1) * ncols];
            for &(j, v) in &p.row.coeffs {
                row[j] += s * v;
            }
            if slack_col[i] != usize::MAX {
                let coef = if p.row.sense == RowSense::Le { 1.0 } else { -1.0 };
                row[slack_col[i]] = s * coef;
            }
            beta[i] = s * p.rhs;
            rhs_scale = rhs_scale.max(beta[i]);
            let b = if needs_art[i] {
                row[next_art] = 1.0;
                next_art += 1;
                next_art - 1
            } else {
                slack_col[i]
            };
            basis[i] = b;
            state[b] = State::Basic(i);
        }
        let mut enterable = vec![true; ncols];
        for j in 0..ncols {
            if range[j] <= 0.0 {
                enterable[j] = false;
            }
        }
        Some(Self {
            m,
            ncols,
            art_start,
            n_art,
            a,
            beta,
            basis,
            state,
            range,
            lo: lower.to_vec(),
            shaky: false,
            cost: vec![0.0; ncols],
            d: vec![0.0; ncols],
            enterable,
            rhs_scale,
            iterations: 0,
        })
    }

    fn load_phase_one_costs(&mut self) {
        let mut c = vec![0.0; self.ncols];
        for v in c.iter_mut().skip(self.art_start) {
            *v = 1.0;
        }
        self.set_costs(c);
    }

    fn load_costs(&mut self, structural: &[f64]) {
        let mut c = vec![0.0; self.ncols];
        c[..structural.len()].copy_from_slice(structural);
        self.set_costs(c);
    }

    fn set_costs(&mut self, c: Vec<f64>) {
        let mut d = c.clone();
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
                for (dj, &aij) in d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.cost = c;
        self.d = d;
    }

    /// Pins every artificial column at zero for phase two.
    fn retire_artificials(&mut self) {
        for j in self.art_start..self.ncols {
            self.range[j] = 0.0;
            self.enterable[j] = false;
            if let State::Basic(r) = self.state[j] {
                self.beta[r] = 0.0;
            }
        }
    }

    fn choose_entering(&self, opts: &SimplexOptions, bland: bool) -> Option<usize> {
        let tol = opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if !self.enterable[j] {
                continue;
            }
            let score = match self.state[j] {
                State::Basic(_) => continue,
                State::AtLower if self.d[j] < -tol => -self.d[j],
                State::AtUpper if self.d[j] > tol => self.d[j],
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn iterate(&mut self, opts: &SimplexOptions, limit: usize, phase: u8) -> Result<PhaseEnd, SimplexError> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = opts.pricing == Pricing::Bland || degenerate_run >= DEGENERATE_RUN;
            let Some(q) = self.choose_entering(opts, bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            if self.iterations >= limit {
                return Err(SimplexError::IterationLimit { limit, phase, objective: self.objective() });
            }
            self.iterations += 1;

            let sigma = if self.state[q] == State::AtLower { 1.0 } else { -1.0 };
            let mut step = self.range[q];
            // (row, leaving goes to upper bound, |alpha|)
            let mut leave: Option<(usize, bool, f64)> = None;
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + q];
                if alpha.abs() <= opts.pivot_tol {
                    continue;
                }
                let delta = -sigma * alpha;
                let bvar = self.basis[i];
                let (t, to_upper) = if delta < 0.0 {
                    (self.beta[i].max(0.0) / -delta, false)
                } else {
                    let ub = self.range[bvar];
                    if !ub.is_finite() {
                        continue;
                    }
                    ((ub - self.beta[i]).max(0.0) / delta, true)
                };
                let better = if t < step - 1e-12 {
                    true
                } else if t <= step + 1e-12 {
                    match leave {
                        None => false,
                        Some((r, _, mag)) => {
                            if bland {
                                bvar < self.basis[r]
                            } else {
                                alpha.abs() > mag
                            }
                        }
                    }
                } else {
                    false
                };
                if better {
                    step = t;
                    leave = Some((i, to_upper, alpha.abs()));
                }
            }
            if !step.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            if step > 0.0 {
                for i in 0..self.m {
                    let alpha = self.a[i * self.ncols + q];
                    if alpha != 0.0 {
                        self.beta[i] -= sigma * alpha * step;
                    }
                }
            }
            match leave {
                None => {
                    self.state[q] = if sigma > 0.0 { State::AtUpper } else { State::AtLower };
                }
                Some((r, to_upper, _)) => {
                    let entering_value = if sigma > 0.0 { step } else { self.range[q] - step };
                    let out = self.basis[r];
                    self.state[out] = if to_upper { State::AtUpper } else { State::AtLower };
                    self.pivot(r, q, opts.parallel);
                    self.beta[r] = entering_value;
                    self.basis[r] = q;
                    self.state[q] = State::Basic(r);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, parallel: bool) {
        let stride = self.ncols;
        let piv = self.a[r * stride + q];
        let mut nz: Vec<(usize, f64)> = Vec::new();
        {
            let row = &mut self.a[r * stride..(r + 1) * stride];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v /= piv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        nz.push((j, *v));
                    }
                }
            }
            row[q] = 1.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, v) in &nz {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;

        let update = |i: usize, row: &mut [f64]| {
            if i == r {
                return;
            }
            let f = row[q];
            if f == 0.0 {
                return;
            }
            for &(j, v) in &nz {
                let x = row[j] - f * v;
                row[j] = if x.abs() < DROP_TOL { 0.0 } else { x };
            }
            row[q] = 0.0;
        };
        let go_parallel = parallel && self.m * nz.len() > 250_000;
        par::for_each_row(&mut self.a, stride, go_parallel, update);
    }

    fn objective(&self) -> f64 {
        (0..self.ncols)
            .map(|j| {
                let v = match self.state[j] {
                    State::Basic(r) => self.beta[r],
                    State::AtLower => 0.0,
                    State::AtUpper => self.range[j],
                };
                self.cost[j] * v
            })
            .sum()
    }

    fn outcome(&self, lp: &LinearProgram, opts: &SimplexOptions) -> LpOutcome {
        let values = self.primal(lp.num_columns());
        let objective = lp.objective_value(&values);
        let tight_rows = lp
            .rows
            .iter()
            .map(|r| {
                let act = r.activity(&values);
                (act - r.rhs).abs() <= opts.feasibility_tol * (1.0 + r.rhs.abs())
            })
            .collect();
        LpOutcome { status: LpStatus::Optimal, objective, values, tight_rows, iterations: self.iterations }
    }

    /// Moves structural bounds to `lower`/`upper`, keeping the basis.
    fn apply_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        let stride = self.ncols;
        for j in 0..self.lo.len() {
            let old_upper = self.lo[j] + self.range[j];
            if lower[j] == self.lo[j] && upper[j] == old_upper {
                continue;
            }
            let new_range = (upper[j] - lower[j]).max(0.0);
            let shift = match self.state[j] {
                State::Basic(r) => {
                    self.beta[r] += self.lo[j] - lower[j];
                    0.0
                }
                State::AtLower => lower[j] - self.lo[j],
                State::AtUpper => {
                    if upper[j].is_finite() {
                        upper[j] - old_upper
                    } else {
                        self.state[j] = State::AtLower;
                        lower[j] - old_upper
                    }
                }
            };
            if shift != 0.0 {
                for i in 0..self.m {
                    let a = self.a[i * stride + j];
                    if a != 0.0 {
                        self.beta[i] -= a * shift;
                    }
                }
            }
            self.lo[j] = lower[j];
            self.range[j] = new_range;
            self.enterable[j] = new_range > 0.0;
        }
    }

    fn dual_feasible(&self, tol: f64) -> bool {
        (0..self.ncols).all(|j| {
            !self.enterable[j]
                || match self.state[j] {
                    State::Basic(_) => true,
                    State::AtLower => self.d[j] >= -tol,
                    State::AtUpper => self.d[j] <= tol,
                }
        })
    }

    /// Bounded dual simplex from the current (dual feasible) basis.
    fn dual_iterate(&mut self, opts: &SimplexOptions, limit: usize, cutoff: Option<f64>) -> Result<DualEnd, SimplexError> {
        let tol = opts.feasibility_tol;
        // the dual bound is only valid while reduced costs keep their signs
        let cutoff = cutoff.filter(|_| self.dual_feasible(1e-7));
        let structural = self.lo.len();
        let const_part: f64 = (0..structural).map(|j| self.cost[j] * self.lo[j]).sum();
        loop {
            if let Some(c) = cutoff {
                let bound = self.objective() + const_part;
                if bound >= c - 1e-9 * (1.0 + c.abs()) {
                    return Ok(DualEnd::CutOff(bound));
                }
            }
            // most violated basic variable leaves
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let ub = self.range[self.basis[i]];
                let v = self.beta[i];
                let viol = if v < -tol { -v } else if v > ub + tol { v - ub } else { continue };
                if leave.is_none_or(|(_, w)| viol > w) {
                    leave = Some((i, viol));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(DualEnd::Feasible);
            };
            if self.iterations >= limit {
                return Ok(DualEnd::Stalled);
            }
            self.iterations += 1;
            let below = self.beta[r] < 0.0;
            let target = if below { 0.0 } else { self.range[self.basis[r]] };

            let row = &self.a[r * self.ncols..(r + 1) * self.ncols];
            // (column, clipped reduced cost, |alpha|) of every column that helps
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            // largest possible move of the leaving variable towards its bound
            let mut reach = 0.0;
            let mut row_max: f64 = 0.0;
            for j in 0..self.ncols {
                if !self.enterable[j] {
                    continue;
                }
                let alpha = row[j];
                if alpha == 0.0 {
                    continue;
                }
                let at_lower = match self.state[j] {
                    State::Basic(_) => continue,
                    State::AtLower => true,
                    State::AtUpper => false,
                };
                row_max = row_max.max(alpha.abs());
                // x_r = beta_r - alpha * dx_j; raising x_r needs alpha * dx_j < 0
                let helps = if below { (alpha < 0.0) == at_lower } else { (alpha > 0.0) == at_lower };
                if !helps {
                    continue;
                }
                reach += alpha.abs() * self.range[j];
                let dj = if at_lower { self.d[j].max(0.0) } else { (-self.d[j]).max(0.0) };
                cands.push((j, dj, alpha.abs()));
            }
            // Harris two-pass test: a relaxed step first, then the largest pivot within it
            let piv_min = DUAL_PIVOT_TOL.max(opts.pivot_tol) * row_max.max(1.0);
            let relaxed = cands
                .iter()
                .filter(|c| c.2 > piv_min)
                .map(|&(_, dj, mag)| (dj + DUAL_HARRIS_TOL) / mag)
                .fold(f64::INFINITY, f64::min);
            let enter = cands
                .iter()
                .filter(|c| c.2 > piv_min && c.1 / c.2 <= relaxed)
                .max_by(|x, y| x.2.total_cmp(&y.2).then_with(|| y.0.cmp(&x.0)))
                .copied();
            if let Some((_, _, mag)) = enter {
                if mag < SHAKY_PIVOT * row_max {
                    self.shaky = true;
                }
            }
            let Some((q, _, _)) = enter else {
                let gap = (self.beta[r] - target).abs();
                // no column can close the gap even at full range
                return Ok(if reach < gap - tol { DualEnd::Infeasible } else { DualEnd::Stalled });
            };

            let alpha_q = self.a[r * self.ncols + q];
            let delta = (self.beta[r] - target) / alpha_q;
            let base = if self.state[q] == State::AtLower { 0.0 } else { self.range[q] };
            for i in 0..self.m {
                let a = self.a[i * self.ncols + q];
                if a != 0.0 {
                    self.beta[i] -= a * delta;
                }
            }
            let out = self.basis[r];
            self.state[out] = if below { State::AtLower } else { State::AtUpper };
            self.pivot(r, q, opts.parallel);
            self.beta[r] = base + delta;
            self.basis[r] = q;
            self.state[q] = State::Basic(r);
        }
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let v = match self.state[j] {
                    State::Basic(r) => self.beta[r].clamp(0.0, self.range[j]),
                    State::AtLower => 0.0,
                    State::AtUpper => self.range[j],
                };
                self.lo[j] + v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{ColumnKind, RowTag, INF};

    fn lp_with(cols: &[(f64, f64, f64)], rows: &[(&[(usize, f64)], RowSense, f64)]) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for &(l, u, c) in cols {
            lp.add_column(l, u, ColumnKind::Continuous, c);
        }
        for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
            lp.add_row(coeffs.to_vec(), *sense, *rhs, RowTag::generic(i));
        }
        lp
    }

    #[test]
    fn maximize_sum_in_unit_box() {
        // max x + y == min -x - y
        let lp = lp_with(
            &[(0.0, INF, -1.0), (0.0, INF, -1.0)],
            &[(&[(0, 1.0)], RowSense::Le, 1.0), (&[(1, 1.0)], RowSense::Le, 1.0)],
        );
        for opts in [SimplexOptions::default(), SimplexOptions::bland()] {
            let out = solve_lp_with(&lp, &opts).unwrap();
            assert_eq!(out.status, LpStatus::Optimal);
            assert!((out.objective + 2.0).abs() < 1e-9);
            assert!((out.values[0] - 1.0).abs() < 1e-9 && (out.values[1] - 1.0).abs() < 1e-9);
            assert_eq!(out.tight_rows, vec![true, true]);
        }
    }

    #[test]
    fn contradictory_bounds_rows_are_infeasible() {
        let lp = lp_with(
            &[(0.0, INF, 0.0)],
            &[(&[(0, 1.0)], RowSense::Ge, 1.0), (&[(0, 1.0)], RowSense::Le, 0.0)],
        );
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let lp = lp_with(&[(0.0, INF, -1.0), (0.0, INF, 0.0)], &[(&[(0, 1.0), (1, -1.0)], RowSense::Le, 1.0)]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn upper_bounds_handled_without_rows() {
        // min -3x - 2y, x + y <= 4, x in [0, 3], y in [1, 2]
        let lp = lp_with(&[(0.0, 3.0, -3.0), (1.0, 2.0, -2.0)], &[(&[(0, 1.0), (1, 1.0)], RowSense::Le, 4.0)]);
        let out = solve_lp(&lp).unwrap();
        assert!((out.objective + 11.0).abs() < 1e-9, "{:?}", out);
        assert!((out.values[0] - 3.0).abs() < 1e-9);
        assert!((out.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + 2y s.t. x - y = -1, x + y >= 3
        let lp = lp_with(
            &[(0.0, INF, 1.0), (0.0, INF, 2.0)],
            &[(&[(0, 1.0), (1, -1.0)], RowSense::Eq, -1.0), (&[(0, 1.0), (1, 1.0)], RowSense::Ge, 3.0)],
        );
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 1.0).abs() < 1e-9 && (out.values[1] - 2.0).abs() < 1e-9);
        assert!((out.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let lp = lp_with(
            &[(0.0, INF, 1.0), (0.0, INF, 1.0)],
            &[
                (&[(0, 1.0), (1, 1.0)], RowSense::Eq, 2.0),
                (&[(0, 2.0), (1, 2.0)], RowSense::Eq, 4.0),
                (&[(0, 1.0)], RowSense::Ge, 0.5),
            ],
        );
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 2.0).abs() < 1e-9);
        assert!(lp.max_violation(&out.values) < 1e-9);
    }

    #[test]
    fn empty_row_checked_against_rhs() {
        let lp = lp_with(&[(0.0, 0.0, 1.0)], &[(&[(0, 1.0)], RowSense::Ge, 1.0)]);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
        let lp = lp_with(&[(2.0, 2.0, 1.0)], &[(&[(0, 1.0)], RowSense::Ge, 1.0)]);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.values, vec![2.0]);
    }

    #[test]
    fn offset_is_reported() {
        let mut lp = lp_with(&[(1.0, 5.0, 2.0)], &[]);
        lp.objective_offset = 10.0;
        let out = solve_lp(&lp).unwrap();
        assert!((out.objective - 12.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let lp = lp_with(
            &[(0.0, INF, -1.0), (0.0, INF, -1.0)],
            &[(&[(0, 1.0), (1, 2.0)], RowSense::Le, 4.0), (&[(0, 3.0), (1, 1.0)], RowSense::Le, 6.0)],
        );
        let opts = SimplexOptions { max_iterations: Some(0), ..SimplexOptions::default() };
        assert!(matches!(solve_lp_with(&lp, &opts), Err(SimplexError::IterationLimit { .. })));
    }

    #[test]
    fn free_lower_bound_rejected() {
        let lp = lp_with(&[(-INF, 1.0, 1.0)], &[]);
        assert_eq!(solve_lp(&lp), Err(SimplexError::UnboundedBelow { column: 0 }));
    }
}
