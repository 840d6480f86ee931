//! Brute-force reference solvers.
//!
//! [`enumerate_mip`] walks the whole integer lattice of a program (depth
//! first, skipping partial assignments whose row activity intervals already
//! miss a right-hand side) and solves the continuous remainder at every
//! surviving point. [`lp_vertex_oracle`] solves a small LP by trying every
//! square subsystem of its constraints and bounds.

use serde::{Deserialize, Serialize};

use super::CheckError;
use crate::instance::Instance;
use crate::lp::{LinearProgram, RowSense};
use crate::model::{self, AssemblyOptions, ObjectiveId};
use crate::simplex::{self, LpStatus, SimplexOptions};

/// Largest lattice (product of integer ranges) the oracle agrees to walk.
pub const DEFAULT_GUARD: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub status: OracleStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Lattice points whose continuous remainder was actually solved.
    pub points_solved: usize,
}

impl OracleOutcome {
    fn empty(status: OracleStatus, n: usize, points_solved: usize) -> Self {
        let objective = match status {
            OracleStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self { status, objective, values: vec![0.0; n], points_solved }
    }
}

/// Assembles `inst` for one objective and enumerates it.
pub fn oracle_solve(inst: &Instance, opts: &AssemblyOptions) -> Result<OracleOutcome, CheckError> {
    oracle_solve_guarded(inst, opts, DEFAULT_GUARD)
}

pub fn oracle_solve_guarded(inst: &Instance, opts: &AssemblyOptions, guard: f64) -> Result<OracleOutcome, CheckError> {
    let model = model::assemble(inst, opts)?;
    enumerate_mip(&model.lp_for(opts.objective), guard)
}

/// Convenience wrapper for a single objective with default assembly.
pub fn oracle_objective(inst: &Instance, objective: ObjectiveId) -> Result<OracleOutcome, CheckError> {
    oracle_solve(inst, &AssemblyOptions::with_objective(objective))
}

/// Product of the integer column ranges, or an error for unbounded ones.
pub fn lattice_size(lp: &LinearProgram) -> Result<f64, CheckError> {
    let mut size = 1.0f64;
    for j in lp.integral_columns() {
        let (lo, hi) = integer_range(lp, j)?;
        size *= (hi - lo + 1).max(0) as f64;
    }
    Ok(size)
}

fn integer_range(lp: &LinearProgram, j: usize) -> Result<(i64, i64), CheckError> {
    let c = &lp.columns[j];
    if !c.lower.is_finite() || !c.upper.is_finite() {
        return Err(CheckError::UnboundedInteger(j));
    }
    Ok(((c.lower - 1e-9).ceil() as i64, (c.upper + 1e-9).floor() as i64))
}

pub fn enumerate_mip(lp: &LinearProgram, guard: f64) -> Result<OracleOutcome, CheckError> {
    let size = lattice_size(lp)?;
    if size > guard {
        return Err(CheckError::SizeGuard { what: "integer lattice", size, limit: guard });
    }
    let n = lp.num_columns();
    let ints: Vec<usize> = lp.integral_columns().collect();
    let ranges: Vec<(i64, i64)> = ints.iter().map(|&j| integer_range(lp, j)).collect::<Result<_, _>>()?;
    let mut rows_of = vec![Vec::new(); n];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, _) in &row.coeffs {
            rows_of[j].push(i);
        }
    }
    let mut walk = Walk {
        lp,
        ints: &ints,
        ranges: &ranges,
        rows_of: &rows_of,
        lower: lp.columns.iter().map(|c| c.lower).collect(),
        upper: lp.columns.iter().map(|c| c.upper).collect(),
        // enumeration must not depend on thread scheduling
        opts: SimplexOptions::default().sequential(),
        best: None,
        unbounded: false,
        solved: 0,
    };
    for (k, &j) in ints.iter().enumerate() {
        walk.lower[j] = ranges[k].0 as f64;
        walk.upper[j] = ranges[k].1 as f64;
    }
    if (0..lp.num_rows()).all(|i| walk.row_possible(i)) {
        walk.descend(0)?;
    }
    let solved = walk.solved;
    Ok(if walk.unbounded {
        OracleOutcome::empty(OracleStatus::Unbounded, n, solved)
    } else {
        match walk.best {
            Some((objective, values)) => OracleOutcome { status: OracleStatus::Optimal, objective, values, points_solved: solved },
            None => OracleOutcome::empty(OracleStatus::Infeasible, n, solved),
        }
    })
}

struct Walk<'a> {
    lp: &'a LinearProgram,
    ints: &'a [usize],
    ranges: &'a [(i64, i64)],
    rows_of: &'a [Vec<usize>],
    lower: Vec<f64>,
    upper: Vec<f64>,
    opts: SimplexOptions,
    best: Option<(f64, Vec<f64>)>,
    unbounded: bool,
    solved: usize,
}

impl Walk<'_> {
    /// Whether row `i` can still be met given the current column boxes.
    fn row_possible(&self, i: usize) -> bool {
        let row = &self.lp.rows[i];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(j, a) in &row.coeffs {
            let (l, u) = (self.lower[j], self.upper[j]);
            if a > 0.0 {
                lo += a * l;
                hi += a * u;
            } else {
                lo += a * u;
                hi += a * l;
            }
        }
        let tol = 1e-9 * (1.0 + row.rhs.abs());
        match row.sense {
            RowSense::Le => lo <= row.rhs + tol,
            RowSense::Ge => hi >= row.rhs - tol,
            RowSense::Eq => lo <= row.rhs + tol && hi >= row.rhs - tol,
        }
    }

    fn descend(&mut self, k: usize) -> Result<(), CheckError> {
        if self.unbounded {
            return Ok(());
        }
        if k == self.ints.len() {
            return self.leaf();
        }
        let j = self.ints[k];
        let (lo, hi) = self.ranges[k];
        for v in lo..=hi {
            self.lower[j] = v as f64;
            self.upper[j] = v as f64;
            if self.rows_of[j].iter().all(|&i| self.row_possible(i)) {
                self.descend(k + 1)?;
            }
        }
        self.lower[j] = lo as f64;
        self.upper[j] = hi as f64;
        Ok(())
    }

    fn leaf(&mut self) -> Result<(), CheckError> {
        self.solved += 1;
        let out = simplex::solve_lp_bounded(self.lp, &self.lower, &self.upper, &self.opts)?;
        match out.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => self.unbounded = true,
            LpStatus::Optimal => {
                if self.best.as_ref().is_none_or(|(b, _)| out.objective < *b) {
                    self.best = Some((out.objective, out.values));
                }
            }
        }
        Ok(())
    }
}

/// One linear constraint `a.x (sense) b` over dense coefficients.
struct Half {
    a: Vec<f64>,
    sense: RowSense,
    b: f64,
}

/// Solves a small LP (integrality ignored) by vertex enumeration.
///
/// Every column needs a finite lower bound, so the feasible set has a vertex
/// whenever it is non-empty. Unboundedness is decided on the recession cone,
/// itself boxed to `[0, 1]` and solved the same way.
pub fn lp_vertex_oracle(lp: &LinearProgram) -> Result<OracleOutcome, CheckError> {
    let n = lp.num_columns();
    let mut cons = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        cons.push(Half { a, sense: row.sense, b: row.rhs });
    }
    let unit = |j: usize| {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        a
    };
    for (j, c) in lp.columns.iter().enumerate() {
        if !c.lower.is_finite() {
            return Err(CheckError::Simplex(simplex::SimplexError::UnboundedBelow { column: j }));
        }
        cons.push(Half { a: unit(j), sense: RowSense::Ge, b: c.lower });
        if c.upper.is_finite() {
            cons.push(Half { a: unit(j), sense: RowSense::Le, b: c.upper });
        }
    }
    let costs = lp.costs();
    let Some((value, x)) = best_vertex(&cons, &costs, n) else {
        return Ok(OracleOutcome::empty(OracleStatus::Infeasible, n, 0));
    };

    // recession directions: homogeneous rows, d >= 0, d = 0 where bounded above
    let mut cone: Vec<Half> = lp
        .rows
        .iter()
        .map(|row| {
            let mut a = vec![0.0; n];
            for &(j, v) in &row.coeffs {
                a[j] += v;
            }
            Half { a, sense: row.sense, b: 0.0 }
        })
        .collect();
    for (j, c) in lp.columns.iter().enumerate() {
        cone.push(Half { a: unit(j), sense: RowSense::Ge, b: 0.0 });
        let cap = if c.upper.is_finite() { 0.0 } else { 1.0 };
        cone.push(Half { a: unit(j), sense: RowSense::Le, b: cap });
    }
    if let Some((slope, _)) = best_vertex(&cone, &costs, n) {
        if slope < -1e-9 {
            return Ok(OracleOutcome::empty(OracleStatus::Unbounded, n, 0));
        }
    }
    Ok(OracleOutcome { status: OracleStatus::Optimal, objective: value + lp.objective_offset, values: x, points_solved: 0 })
}

/// Best feasible basic point of `cons`, trying every `n`-subset as active.
fn best_vertex(cons: &[Half], costs: &[f64], n: usize) -> Option<(f64, Vec<f64>)> {
    if n == 0 {
        let feasible = cons.iter().all(|h| satisfied(h, &[]));
        return feasible.then(|| (0.0, Vec::new()));
    }
    let m = cons.len();
    if m < n {
        return None;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_square(cons, &pick, n) {
            if cons.iter().all(|h| satisfied(h, &x)) {
                let value: f64 = costs.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(b, _)| value < *b - 1e-12) {
                    best = Some((value, x));
                }
            }
        }
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        pick[i] += 1;
        for k in i + 1..n {
            pick[k] = pick[k - 1] + 1;
        }
    }
}

fn satisfied(h: &Half, x: &[f64]) -> bool {
    let act: f64 = h.a.iter().zip(x).map(|(a, v)| a * v).sum();
    let tol = 1e-7 * (1.0 + h.b.abs());
    match h.sense {
        RowSense::Le => act <= h.b + tol,
        RowSense::Ge => act >= h.b - tol,
        RowSense::Eq => (act - h.b).abs() <= tol,
    }
}

/// Gaussian elimination with partial pivoting on the chosen rows as equalities.
fn solve_square(cons: &[Half], pick: &[usize], n: usize) -> Option<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = pick
        .iter()
        .map(|&i| {
            let mut r = cons[i].a.clone();
            r.push(cons[i].b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
