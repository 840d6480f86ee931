//! Worst-case demand realisation inside the budgeted uncertainty set.
//!
//! For a fixed plan, every subset `S` of the deviating periods `J_t` with
//! `|S| <= ceil(Gamma)` is realised (when `Gamma` is fractional, the smallest
//! deviation in a full-size subset is scaled by `Gamma - floor(Gamma)`), and
//! the cumulative shortfall `max(0, realised demand - delivered)` is
//! recomputed from the plan's flows. The largest value is returned.

use serde::{Deserialize, Serialize};

use super::verify::{resolve, Plan};
use super::CheckError;
use crate::instance::Instance;
use crate::solution::Solution;

/// Subset enumeration stops above this many deviating periods.
pub const MAX_UNCERTAIN_PERIODS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Entity {
    Commodity(usize),
    Injury(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// Largest realised cumulative shortfall.
    pub shortfall: f64,
    /// Realised cumulative demand in the worst scenario.
    pub demand: f64,
    /// Delivered by period `t` according to the plan.
    pub delivered: f64,
    /// Cumulative shortfall the plan itself reports (`sum of dev` up to `t`).
    pub modeled: f64,
    /// `(period, fraction of its deviation)` in the worst scenario.
    pub scenario: Vec<(usize, f64)>,
}

pub fn worst_case_shortfall(
    inst: &Instance,
    sol: &Solution,
    entity: Entity,
    node: usize,
    t: usize,
) -> Result<WorstCase, CheckError> {
    let plan = resolve(inst, sol)?;
    worst_case_on(inst, &plan, entity, node, t)
}

/// Every `(entity, demand node, period)` cell the robust rows protect.
pub fn cells(inst: &Instance) -> Vec<(Entity, usize, usize)> {
    let mut out = Vec::new();
    for p in inst.demand_nodes() {
        for t in inst.period_range() {
            out.extend((0..inst.commodities.len()).map(|a| (Entity::Commodity(a), p, t)));
            out.extend((0..inst.injuries.len()).map(|h| (Entity::Injury(h), p, t)));
        }
    }
    out
}

/// [`worst_case_shortfall`] for every cell, resolving the plan once.
pub fn all_worst_cases(inst: &Instance, sol: &Solution) -> Result<Vec<((Entity, usize, usize), WorstCase)>, CheckError> {
    let plan = resolve(inst, sol)?;
    cells(inst).into_iter().map(|c| Ok((c, worst_case_on(inst, &plan, c.0, c.1, c.2)?))).collect()
}

fn worst_case_on(inst: &Instance, plan: &Plan, entity: Entity, node: usize, t: usize) -> Result<WorstCase, CheckError> {
    if node >= inst.nodes.len() || !(1..=inst.periods).contains(&t) {
        return Err(CheckError::Dimension(format!("cell (node {node}, period {t}) outside the instance")));
    }
    let (modeled, delivered) = match entity {
        Entity::Commodity(a) => {
            if a >= inst.commodities.len() {
                return Err(CheckError::Dimension(format!("commodity index {a}")));
            }
            let modeled = (1..=t).map(|s| plan.dev_com.get(&(a, node, s)).copied().unwrap_or(0.0)).sum();
            (modeled, commodity_delivered(inst, plan, a, node, t))
        }
        Entity::Injury(h) => {
            if h >= inst.injuries.len() {
                return Err(CheckError::Dimension(format!("injury index {h}")));
            }
            let modeled = (1..=t).map(|s| plan.dev_inj.get(&(h, node, s)).copied().unwrap_or(0.0)).sum();
            (modeled, injuries_hospitalised(inst, plan, h, node, t))
        }
    };
    let (demand, scenario) = worst_demand(inst, entity, node, t)?;
    Ok(WorstCase { shortfall: (demand - delivered).max(0.0), demand, delivered, modeled, scenario })
}

/// Largest cumulative demand of `entity` at `node` up to `t` over the
/// budgeted uncertainty set, with the realising scenario.
pub(super) fn worst_demand(
    inst: &Instance,
    entity: Entity,
    node: usize,
    t: usize,
) -> Result<(f64, Vec<(usize, f64)>), CheckError> {
    let (series, gamma): (Vec<_>, f64) = match entity {
        Entity::Commodity(a) => {
            ((1..=t).map(|s| inst.commodity_demand(a, node, s)).collect(), inst.commodity_gamma(a, node, t))
        }
        Entity::Injury(h) => ((1..=t).map(|s| inst.injury_demand(h, node, s)).collect(), inst.injury_gamma(h, node, t)),
    };
    let nominal: f64 = series.iter().map(|q| q.nominal).sum();
    let uncertain: Vec<(usize, f64)> =
        series.iter().enumerate().filter(|(_, q)| q.deviation > 0.0).map(|(i, q)| (i + 1, q.deviation)).collect();
    if uncertain.len() > MAX_UNCERTAIN_PERIODS {
        return Err(CheckError::SizeGuard {
            what: "uncertainty set",
            size: 2f64.powi(uncertain.len() as i32),
            limit: 2f64.powi(MAX_UNCERTAIN_PERIODS as i32),
        });
    }

    let gamma = gamma.clamp(0.0, uncertain.len() as f64);
    let full = gamma.floor() as usize;
    let frac = gamma - gamma.floor();
    let max_size = if frac > 1e-12 { full + 1 } else { full };

    let mut best_extra = 0.0;
    let mut best_scenario = Vec::new();
    for mask in 0u32..(1u32 << uncertain.len()) {
        let size = mask.count_ones() as usize;
        if size > max_size {
            continue;
        }
        let chosen: Vec<(usize, f64)> =
            uncertain.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
        let mut scenario: Vec<(usize, f64)> = chosen.iter().map(|&(s, _)| (s, 1.0)).collect();
        let mut extra: f64 = chosen.iter().map(|&(_, d)| d).sum();
        if size == full + 1 {
            // one deviation only partly realised: the smallest of the subset
            let (k, &(_, d)) = chosen
                .iter()
                .enumerate()
                .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .expect("subset is non-empty");
            extra -= (1.0 - frac) * d;
            scenario[k].1 = frac;
        }
        if extra > best_extra {
            best_extra = extra;
            best_scenario = scenario;
        }
    }
    Ok((nominal + best_extra, best_scenario))
}

/// Net commodity arrivals at `p` by the end of period `t`.
fn commodity_delivered(inst: &Instance, plan: &Plan, a: usize, p: usize, t: usize) -> f64 {
    let mut net = 0.0;
    for (&(aa, _, o, q, v, s), &x) in &plan.u {
        if aa != a {
            continue;
        }
        if q == p && s + inst.travel_time(o, q, v) <= t {
            net += x;
        }
        if o == p && s <= t {
            net -= x;
        }
    }
    net
}

/// Injuries from `r` that have reached any hospital by the end of period `t`.
fn injuries_hospitalised(inst: &Instance, plan: &Plan, h: usize, r: usize, t: usize) -> f64 {
    plan.w
        .iter()
        .filter(|(&(hh, rr, o, p, v, s), _)| {
            hh == h && rr == r && inst.nodes[p].roles.is_hospital() && s + inst.travel_time(o, p, v) <= t
        })
        .map(|(_, &x)| x)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CommoditySpec, Roles, Uncertain};

    fn one_node(deviations: &[(f64, f64)], gamma: Option<f64>) -> Instance {
        let periods = deviations.len();
        let mut inst = Instance::skeleton(
            periods,
            vec![("N1".into(), Roles { demand: true, ..Roles::default() })],
            vec![CommoditySpec { id: "A".into(), weight: 1.0, volume: 1.0, priority: 1.0 }],
            vec![],
            vec![],
        );
        for (i, &(nominal, deviation)) in deviations.iter().enumerate() {
            inst.nodes[0].commodity_demand[0][i] = Uncertain { nominal, deviation };
        }
        if let Some(g) = gamma {
            inst.commodity_budget.insert((0, 0, periods), g);
        }
        inst
    }

    #[test]
    fn zero_budget_is_nominal() {
        let inst = one_node(&[(30.0, 3.0)], Some(0.0));
        let wc = worst_case_shortfall(&inst, &Solution::default(), Entity::Commodity(0), 0, 1).unwrap();
        assert_eq!(wc.shortfall, 30.0);
        assert!(wc.scenario.is_empty());
    }

    #[test]
    fn full_budget_adds_every_deviation() {
        let inst = one_node(&[(30.0, 3.0)], None);
        let wc = worst_case_shortfall(&inst, &Solution::default(), Entity::Commodity(0), 0, 1).unwrap();
        assert_eq!(wc.shortfall, 33.0);
    }

    #[test]
    fn fractional_budget_scales_the_smallest_chosen() {
        // budget 1.5 over deviations {4, 2, 1}: 4 in full plus half of 2
        let inst = one_node(&[(0.0, 4.0), (0.0, 2.0), (0.0, 1.0)], Some(1.5));
        let wc = worst_case_shortfall(&inst, &Solution::default(), Entity::Commodity(0), 0, 3).unwrap();
        assert!((wc.shortfall - 5.0).abs() < 1e-12);
        assert_eq!(wc.scenario, vec![(1, 1.0), (2, 0.5)]);
    }

    #[test]
    fn out_of_range_cell_is_rejected() {
        let inst = one_node(&[(1.0, 0.0)], None);
        assert!(matches!(
            worst_case_shortfall(&inst, &Solution::default(), Entity::Commodity(0), 0, 2),
            Err(CheckError::Dimension(_))
        ));
    }
}
