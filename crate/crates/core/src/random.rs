//! Seeded generators for test instances and programs.
//!
//! Everything is driven by a `ChaCha8Rng` seeded from a `u64`, so a seed
//! reproduces the same object on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::lattice_size;
use crate::instance::{self, CommoditySpec, InjurySpec, Instance, Roles, Uncertain, VehicleSpec};
use crate::lp::{ColumnKind, LinearProgram, RowSense, RowTag, INF};
use crate::model::{self, AssemblyOptions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub max_nodes: usize,
    pub max_periods: usize,
    /// Total vehicle units over all types, nodes and periods.
    pub max_fleet: usize,
    pub max_commodities: usize,
    pub max_injuries: usize,
    /// Upper limit on the integer lattice of the assembled model.
    pub max_lattice: Option<f64>,
}

impl InstanceShape {
    /// At most 3 nodes, 2 periods and 2 vehicle units; brute-forceable.
    pub fn tiny() -> Self {
        Self { max_nodes: 3, max_periods: 2, max_fleet: 2, max_commodities: 1, max_injuries: 1, max_lattice: Some(2e4) }
    }

    pub fn small() -> Self {
        Self { max_nodes: 4, max_periods: 3, max_fleet: 3, max_commodities: 2, max_injuries: 1, max_lattice: None }
    }
}

/// A valid random instance; resamples internally until `shape` is met.
pub fn random_instance(seed: u64, shape: &InstanceShape) -> Instance {
    let mut rng = rng(seed);
    loop {
        let inst = draw_instance(&mut rng, shape);
        if !instance::validate(&inst).is_ok() {
            continue;
        }
        if let Some(limit) = shape.max_lattice {
            let Ok(m) = model::assemble(&inst, &AssemblyOptions::default()) else { continue };
            match lattice_size(&m.lp) {
                Ok(size) if size <= limit => {}
                _ => continue,
            }
        }
        return inst;
    }
}

fn draw_instance(rng: &mut ChaCha8Rng, shape: &InstanceShape) -> Instance {
    let nn = rng.gen_range(2..=shape.max_nodes.max(2));
    let periods = if rng.gen_bool(0.85) { shape.max_periods.max(1) } else { rng.gen_range(1..=shape.max_periods.max(1)) };
    let na = rng.gen_range(1..=shape.max_commodities.max(1));
    let nh = rng.gen_range(0..=shape.max_injuries);
    let nv = if shape.max_fleet >= 2 && rng.gen_bool(0.3) { 2 } else { 1 };

    // node 0 supplies, node 1 is a demand node, the rest are drawn
    let mut roles = vec![Roles { supply: true, permanent_hospital: nh > 0 && rng.gen_bool(0.5), ..Roles::default() }];
    roles.push(Roles { demand: true, ..Roles::default() });
    for _ in 2..nn {
        let r = match rng.gen_range(0..4) {
            0 => Roles { demand: true, ..Roles::default() },
            1 => Roles { permanent_hospital: true, ..Roles::default() },
            2 => Roles { temp_candidate: true, ..Roles::default() },
            _ => Roles { supply: true, ..Roles::default() },
        };
        roles.push(r);
    }
    if nh > 0 && !roles.iter().any(|r| r.permanent_hospital) {
        roles[0].permanent_hospital = true;
    }

    let commodities = (0..na)
        .map(|a| CommoditySpec {
            id: format!("A{}", a + 1),
            weight: rng.gen_range(1..=3) as f64,
            volume: rng.gen_range(1..=3) as f64,
            priority: rng.gen_range(1..=3) as f64,
        })
        .collect();
    let injuries = (0..nh).map(|h| InjurySpec { id: format!("H{}", h + 1), priority: rng.gen_range(1..=3) as f64 }).collect();
    let vehicles = (0..nv)
        .map(|v| {
            let mut carries_commodity: Vec<bool> = (0..na).map(|_| rng.gen_bool(0.8)).collect();
            let carries_injury: Vec<bool> = (0..nh).map(|_| rng.gen_bool(0.7)).collect();
            if !carries_commodity.iter().any(|&b| b) && !carries_injury.iter().any(|&b| b) {
                carries_commodity[0] = true;
            }
            VehicleSpec {
                id: format!("V{}", v + 1),
                load_capacity: rng.gen_range(2..=10) as f64,
                volume_capacity: rng.gen_range(2..=10) as f64,
                injury_capacity: rng.gen_range(1..=4) as f64,
                transfer_capacity: rng.gen_range(1..=5) as f64,
                operating_cost: rng.gen_range(1..=5) as f64,
                carries_commodity,
                carries_injury,
            }
        })
        .collect();
    let nodes = roles.iter().enumerate().map(|(i, &r)| (format!("N{}", i + 1), r)).collect();
    let mut inst = Instance::skeleton(periods, nodes, commodities, injuries, vehicles);

    for p in 0..nn {
        let r = roles[p];
        let node = &mut inst.nodes[p];
        for t in 0..periods {
            if r.demand {
                for a in 0..na {
                    node.commodity_demand[a][t] = draw_uncertain(rng, 6, 3);
                }
                for h in 0..nh {
                    node.injury_demand[h][t] = draw_uncertain(rng, 4, 2);
                }
            }
            if r.supply {
                for a in 0..na {
                    node.commodity_supply[a][t] = rng.gen_range(0..=10) as f64;
                }
            }
            if r.permanent_hospital {
                for h in 0..nh {
                    node.hospital_capacity[h][t] = rng.gen_range(0..=5) as f64;
                }
            }
        }
        if r.temp_candidate {
            node.construction_cost = rng.gen_range(1..=20) as f64;
        }
    }

    // fleet: one unit at the supply node in period 1, maybe more elsewhere
    let mut fleet = 0;
    let budget = rng.gen_range(1..=shape.max_fleet.max(1));
    while fleet < budget {
        let (p, v, t) = if fleet == 0 {
            (0, 0, 0)
        } else {
            (rng.gen_range(0..nn), rng.gen_range(0..nv), rng.gen_range(0..periods))
        };
        inst.nodes[p].vehicle_availability[v][t] += 1.0;
        fleet += 1;
    }

    let max_tt = periods.saturating_sub(1).clamp(1, 2);
    for o in 0..nn {
        for p in 0..nn {
            if o == p {
                continue;
            }
            for v in 0..nv {
                if rng.gen_bool(0.6) {
                    inst.set_travel_time(o, p, v, rng.gen_range(1..=max_tt));
                }
            }
        }
    }

    // occasionally a partial budget
    for r in inst.demand_nodes() {
        for t in 1..=periods {
            for a in 0..na {
                let cap = inst.commodity_uncertain_periods(a, r, t).len();
                if cap > 0 && rng.gen_bool(0.3) {
                    let g = rng.gen_range(0..=2 * cap) as f64 / 2.0;
                    inst.commodity_budget.insert((a, r, t), g);
                }
            }
            for h in 0..nh {
                let cap = inst.injury_uncertain_periods(h, r, t).len();
                if cap > 0 && rng.gen_bool(0.3) {
                    let g = rng.gen_range(0..=2 * cap) as f64 / 2.0;
                    inst.injury_budget.insert((h, r, t), g);
                }
            }
        }
    }
    inst
}

fn draw_uncertain(rng: &mut ChaCha8Rng, max_nominal: u32, max_dev: u32) -> Uncertain {
    let nominal = rng.gen_range(0..=max_nominal) as f64;
    let deviation = if rng.gen_bool(0.6) { rng.gen_range(0..=max_dev) as f64 } else { 0.0 };
    Uncertain { nominal, deviation }
}

/// A random LP: up to 6 columns and 6 rows, integer data in `[-5, 5]`,
/// zero lower bounds and finite or infinite upper bounds.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=6);
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let upper = if rng.gen_bool(0.5) { rng.gen_range(1..=5) as f64 } else { INF };
        lp.add_column(0.0, upper, ColumnKind::Continuous, rng.gen_range(-5..=5) as f64);
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                let a = rng.gen_range(-5..=5);
                (a != 0 && rng.gen_bool(0.7)).then_some((j, a as f64))
            })
            .collect();
        let sense = match rng.gen_range(0..6) {
            0 => RowSense::Eq,
            1 | 2 => RowSense::Ge,
            _ => RowSense::Le,
        };
        lp.add_row(coeffs, sense, rng.gen_range(-5..=10) as f64, RowTag::generic(i));
    }
    lp
}

/// A random MIP: up to 8 columns (integer ones bounded in `[0, 3]`) and up
/// to 6 rows with integer data in `[-5, 5]`.
pub fn random_mip(seed: u64) -> LinearProgram {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=8);
    let m = rng.gen_range(1..=6);
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        let cost = rng.gen_range(-5..=5) as f64;
        if rng.gen_bool(0.7) {
            let hi = rng.gen_range(0..=3) as f64;
            let kind = if hi == 1.0 { ColumnKind::Binary } else { ColumnKind::Integer };
            lp.add_column(0.0, hi, kind, cost);
        } else {
            let upper = if rng.gen_bool(0.5) { rng.gen_range(1..=5) as f64 } else { INF };
            lp.add_column(0.0, upper, ColumnKind::Continuous, cost);
        }
    }
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                let a = rng.gen_range(-5..=5);
                (a != 0 && rng.gen_bool(0.7)).then_some((j, a as f64))
            })
            .collect();
        let sense = match rng.gen_range(0..5) {
            0 => RowSense::Eq,
            1 => RowSense::Ge,
            _ => RowSense::Le,
        };
        lp.add_row(coeffs, sense, rng.gen_range(-3..=10) as f64, RowTag::generic(i));
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_reproducible() {
        assert_eq!(random_lp(7), random_lp(7));
        assert_eq!(random_mip(7), random_mip(7));
        assert_eq!(random_instance(7, &InstanceShape::tiny()), random_instance(7, &InstanceShape::tiny()));
    }

    #[test]
    fn tiny_instances_respect_their_shape() {
        let shape = InstanceShape::tiny();
        for seed in 0..20 {
            let inst = random_instance(seed, &shape);
            assert!(inst.nodes.len() <= 3 && inst.periods <= 2);
            let fleet: f64 = (0..inst.vehicles.len()).map(|v| inst.fleet_total(v)).sum();
            assert!(fleet <= 2.0);
            assert!(instance::validate(&inst).is_ok());
        }
    }
}
