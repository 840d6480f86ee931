//! Fuzzy goal programming over the relief objectives.
//!
//! Each objective is first optimised alone (positive ideal). Its worst value
//! over the other objectives' optima is the negative ideal. Memberships map
//! an objective linearly from the negative ideal (0) to the positive ideal
//! (1), and the master problem maximises the weighted achievement levels
//! `λ_i <= μ_i(x)` over the original feasible set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branch_bound::{self, MipOptions, MipStatus};
use crate::instance::Instance;
use crate::lp::{ColumnKind, Family, LinearProgram, RowSense, RowTag};
use crate::model::{self, AssemblyOptions, Model, ModelError, ObjectiveId};
use crate::par;
use crate::simplex::SimplexError;
use crate::solution::Solution;

#[derive(Debug, Error, PartialEq)]
pub enum FgpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("{objective} single-objective problem is infeasible; the instance data is inconsistent")]
    Infeasible { objective: ObjectiveId },
    #[error("{problem} problem is unbounded")]
    Unbounded { problem: String },
    #[error("{problem} stopped at the node limit with gap {gap}")]
    NodeLimit { problem: String, gap: f64 },
    #[error("master problem is infeasible")]
    MasterInfeasible,
    #[error("NIS undefined for k=1")]
    NisUndefined,
    #[error("objective {0} listed twice")]
    DuplicateObjective(ObjectiveId),
    #[error("{0}")]
    Weights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgpOptions {
    /// Objectives taking part, in weight order.
    pub objectives: Vec<ObjectiveId>,
    pub assembly: AssemblyOptions,
    pub mip: MipOptions,
    /// Solve the positive-ideal problems concurrently.
    pub parallel: bool,
}

impl Default for FgpOptions {
    fn default() -> Self {
        Self {
            objectives: ObjectiveId::ALL.to_vec(),
            assembly: AssemblyOptions::default(),
            mip: MipOptions::default(),
            parallel: par::available(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealPoints {
    pub objectives: Vec<ObjectiveId>,
    pub pis: Vec<f64>,
    pub nis: Vec<f64>,
    /// `payoff[i][j]` is objective `i` evaluated at the optimum of objective `j`.
    pub payoff: Vec<Vec<f64>>,
    #[serde(skip)]
    pub ideal_solutions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgpResult {
    pub objectives: Vec<ObjectiveId>,
    pub pis: Vec<f64>,
    pub nis: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub membership: Vec<f64>,
    /// Values of the participating objectives at the compromise.
    pub values: Vec<f64>,
    pub master_objective: f64,
    pub nodes: usize,
    pub solution: Solution,
    #[serde(skip)]
    pub columns: Vec<f64>,
}

/// Checks that `w` has one entry per objective, lies in `[0,1]` and sums to one.
pub fn validate_weights(w: &[f64], k: usize) -> Result<(), FgpError> {
    const TOL: f64 = 1e-9;
    if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < -TOL || **x > 1.0 + TOL) {
        return Err(FgpError::Weights(format!("weight {} outside [0, 1]", x)));
    }
    let sum: f64 = w.iter().sum();
    if sum > 1.0 + TOL {
        return Err(FgpError::Weights(format!("weights exceed simplex (sum {})", sum)));
    }
    if w.len() != k {
        return Err(FgpError::Weights(format!("expected {} weights, got {}", k, w.len())));
    }
    if sum < 1.0 - TOL {
        return Err(FgpError::Weights(format!("weights fall short of the simplex (sum {})", sum)));
    }
    Ok(())
}

fn check_objectives(objs: &[ObjectiveId]) -> Result<(), FgpError> {
    for (i, o) in objs.iter().enumerate() {
        if objs[..i].contains(o) {
            return Err(FgpError::DuplicateObjective(*o));
        }
    }
    Ok(())
}

/// Membership of `value` between the negative and positive ideals, clamped
/// to `[0, 1]`; an objective whose ideals coincide is fully satisfied.
pub fn membership(value: f64, pis: f64, nis: f64) -> f64 {
    let span = nis - pis;
    if span.abs() <= 1e-12 * (1.0 + nis.abs()) {
        return 1.0;
    }
    ((nis - value) / span).clamp(0.0, 1.0)
}

/// `nis[i] = max_{j != i} payoff[i][j]`.
pub fn compute_nis(payoff: &[Vec<f64>]) -> Result<Vec<f64>, FgpError> {
    let k = payoff.len();
    if k < 2 {
        return Err(FgpError::NisUndefined);
    }
    Ok((0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| payoff[i][j]).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

fn require_optimal(out: &branch_bound::MipOutcome, problem: String) -> Result<(), FgpError> {
    match out.status {
        MipStatus::Optimal => Ok(()),
        MipStatus::Unbounded => Err(FgpError::Unbounded { problem }),
        MipStatus::NodeLimit => Err(FgpError::NodeLimit { problem, gap: out.gap }),
        MipStatus::Infeasible => unreachable!("handled by caller"),
    }
}

/// Optimises each objective alone on a prebuilt model.
pub fn compute_pis_on(model: &Model, opts: &FgpOptions) -> Result<IdealPoints, FgpError> {
    check_objectives(&opts.objectives)?;
    let solves = par::map(&opts.objectives, opts.parallel, |&id| {
        branch_bound::solve_mip_with(&model.lp_for(id), &opts.mip)
    });
    let mut pis = Vec::new();
    let mut ideal_solutions = Vec::new();
    for (&id, out) in opts.objectives.iter().zip(solves) {
        let out = out?;
        if out.status == MipStatus::Infeasible {
            return Err(FgpError::Infeasible { objective: id });
        }
        require_optimal(&out, format!("{id} single-objective"))?;
        pis.push(out.objective);
        ideal_solutions.push(out.values);
    }
    let payoff: Vec<Vec<f64>> = opts
        .objectives
        .iter()
        .map(|&i| ideal_solutions.iter().map(|x| model.objective_value(i, x)).collect())
        .collect();
    let nis = if opts.objectives.len() >= 2 { compute_nis(&payoff)? } else { vec![f64::NAN; opts.objectives.len()] };
    Ok(IdealPoints { objectives: opts.objectives.clone(), pis, nis, payoff, ideal_solutions })
}

/// Assembles the model and optimises each objective alone.
pub fn compute_pis(inst: &Instance, opts: &FgpOptions) -> Result<(Model, IdealPoints), FgpError> {
    let model = model::assemble(inst, &opts.assembly)?;
    let ideals = compute_pis_on(&model, opts)?;
    Ok((model, ideals))
}

/// The achievement program for `weights`: the model's rows plus one
/// membership row and one `λ` column per objective. Returns the program and
/// the `λ` column indices.
pub fn master_lp(model: &Model, ideals: &IdealPoints, weights: &[f64]) -> (LinearProgram, Vec<usize>) {
    let k = ideals.objectives.len();
    let mut lp = model.lp.clone();
    lp.set_costs(&vec![0.0; model.lp.num_columns()], 0.0);
    let mut lambda_cols = Vec::with_capacity(k);
    for (i, &id) in ideals.objectives.iter().enumerate() {
        let (pis, nis) = (ideals.pis[i], ideals.nis[i]);
        let span = nis - pis;
        let degenerate = span.abs() <= 1e-12 * (1.0 + nis.abs());
        let lo = if degenerate { 1.0 } else { 0.0 };
        let lam = lp.add_column(lo, 1.0, ColumnKind::Continuous, -weights[i]);
        lambda_cols.push(lam);
        let (c, offset) = model.objective(id);
        let mut coeffs: Vec<(usize, f64)> = c.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (j, a)).collect();
        if !degenerate {
            coeffs.push((lam, span));
        }
        // μ_i(x) >= λ_i  <=>  c_i.x + λ_i (nis - pis) <= nis - offset
        lp.add_row(coeffs, RowSense::Le, nis - offset, RowTag::new(Family::Membership, vec![id.number()]));
    }

    (lp, lambda_cols)
}

/// Solves the weighted achievement problem for `weights`.
pub fn solve_master(
    inst: &Instance,
    model: &Model,
    ideals: &IdealPoints,
    weights: &[f64],
    opts: &FgpOptions,
) -> Result<FgpResult, FgpError> {
    let k = ideals.objectives.len();
    if k < 2 {
        return Err(FgpError::NisUndefined);
    }
    validate_weights(weights, k)?;

    let (lp, lambda_cols) = master_lp(model, ideals, weights);
    let n = model.lp.num_columns();
    let out = branch_bound::solve_mip_with(&lp, &opts.mip)?;
    if out.status == MipStatus::Infeasible {
        return Err(FgpError::MasterInfeasible);
    }
    require_optimal(&out, "master".into())?;

    let x = &out.values[..n];
    let lambda: Vec<f64> = lambda_cols.iter().map(|&j| out.values[j]).collect();
    let values: Vec<f64> = ideals.objectives.iter().map(|&id| model.objective_value(id, x)).collect();
    let membership: Vec<f64> =
        (0..k).map(|i| membership(values[i], ideals.pis[i], ideals.nis[i])).collect();
    let master_objective: f64 = weights.iter().zip(&lambda).map(|(w, l)| w * l).sum();
    Ok(FgpResult {
        objectives: ideals.objectives.clone(),
        pis: ideals.pis.clone(),
        nis: ideals.nis.clone(),
        weights: weights.to_vec(),
        lambda,
        membership,
        values,
        master_objective,
        nodes: out.nodes,
        solution: model.decode(inst, x),
        columns: x.to_vec(),
    })
}

/// Ideal points followed by the master problem, end to end.
pub fn run(inst: &Instance, weights: &[f64], opts: &FgpOptions) -> Result<FgpResult, FgpError> {
    validate_weights(weights, opts.objectives.len())?;
    let (model, ideals) = compute_pis(inst, opts)?;
    solve_master(inst, &model, &ideals, weights, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_endpoints_and_midpoint() {
        assert_eq!(membership(2.0, 2.0, 10.0), 1.0);
        assert_eq!(membership(10.0, 2.0, 10.0), 0.0);
        assert_eq!(membership(6.0, 2.0, 10.0), 0.5);
        assert_eq!(membership(20.0, 2.0, 10.0), 0.0);
        assert_eq!(membership(5.0, 5.0, 5.0), 1.0);
    }

    #[test]
    fn nis_from_off_diagonal() {
        let payoff = vec![vec![1.0, 10.0], vec![7.0, 3.0]];
        assert_eq!(compute_nis(&payoff).unwrap(), vec![10.0, 7.0]);
        assert_eq!(compute_nis(&[vec![1.0]]), Err(FgpError::NisUndefined));
        assert_eq!(FgpError::NisUndefined.to_string(), "NIS undefined for k=1");
    }

    #[test]
    fn weight_validation() {
        assert!(validate_weights(&[0.4, 0.3, 0.2, 0.1], 4).is_ok());
        let err = validate_weights(&[0.5, 0.6], 2).unwrap_err();
        assert!(err.to_string().contains("weights exceed simplex"));
        assert!(validate_weights(&[0.5, 0.5], 4).is_err());
        assert!(validate_weights(&[1.5, -0.5], 2).is_err());
    }

    #[test]
    fn duplicate_objectives_rejected() {
        assert!(check_objectives(&[ObjectiveId::SystemCost, ObjectiveId::SystemCost]).is_err());
    }
}
