//! Regression checks on the bundled seven-node instance.

use relief_core::analysis::{self, SweepOptions};
use relief_core::branch_bound;
use relief_core::checker::{self, Entity};
use relief_core::fgp::{self, FgpOptions};
use relief_core::instance;
use relief_core::lp::Family;
use relief_core::model::{self, AssemblyOptions, ObjectiveId};

fn rows_of(m: &model::Model, family: Family) -> usize {
    m.lp.rows.iter().filter(|r| r.tag.family == family).count()
}

#[test]
fn model_dimensions() {
    let inst = instance::bundled();
    assert!(instance::validate(&inst).is_ok());
    assert_eq!((inst.periods, inst.nodes.len(), inst.arcs().len()), (7, 7, 24));
    let m = model::assemble(&inst, &AssemblyOptions::default()).unwrap();
    assert_eq!(rows_of(&m, Family::UnservedInjuries), 28);
    assert_eq!(rows_of(&m, Family::UnmetCommodity), 28);
    assert_eq!(rows_of(&m, Family::AllocationLimit), 84);
    assert_eq!(m.objective(ObjectiveId::HospitalUnderuse).1, 1085.0);
}

#[test]
fn compromise_values() {
    let inst = instance::bundled();
    let res = fgp::run(&inst, &[0.4, 0.3, 0.2, 0.1], &FgpOptions::default()).unwrap();
    assert_eq!(res.pis, vec![245.0, 218.0, 0.0, 1004.0]);
    assert_eq!(res.nis, vec![378.0, 430.0, 855.0, 1085.0]);
    for (got, want) in res.values.iter().zip([251.0, 218.0, 480.0, 1013.0]) {
        assert!((got - want).abs() < 1e-6, "{:?}", res.values);
    }
    assert!(checker::check(&inst, &res.solution).unwrap().pass);
}

#[test]
fn period_five_spike_raises_the_backlog() {
    let inst = instance::bundled();
    let res = fgp::run(&inst, &[0.4, 0.3, 0.2, 0.1], &FgpOptions::default()).unwrap();
    let series = analysis::shortfall_series(&inst, &res.solution).unwrap();
    for id in ["A1", "A2"] {
        let total = series.find(id, None).unwrap();
        assert!(total.backlog[4] > total.backlog[3], "{id}: {:?}", total.backlog);
    }
}

#[test]
fn without_vehicles_the_backlog_is_the_robust_demand() {
    let mut inst = instance::bundled();
    for node in &mut inst.nodes {
        for series in &mut node.vehicle_availability {
            series.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let id = ObjectiveId::UnmetCommodity;
    let m = model::assemble(&inst, &AssemblyOptions::with_objective(id)).unwrap();
    let out = branch_bound::solve_mip(&m.lp_for(id)).unwrap();
    let sol = m.decode(&inst, &out.values);
    assert!(sol.commodity_flows.is_empty() && sol.vehicle_moves.is_empty());

    let series = analysis::shortfall_series(&inst, &sol).unwrap();
    for p in inst.demand_nodes() {
        for (a, spec) in inst.commodities.iter().enumerate() {
            let s = series.find(&spec.id, Some(&inst.nodes[p].id)).unwrap();
            for t in inst.period_range() {
                let wc = checker::worst_case_shortfall(&inst, &sol, Entity::Commodity(a), p, t).unwrap();
                assert!((s.backlog[t - 1] - wc.demand).abs() < 1e-9);
                assert!(s.cumulative[t - 1] >= wc.demand - 1e-6);
            }
        }
    }
}

#[test]
fn coarse_sweep_has_six_checked_rows() {
    let inst = instance::bundled();
    let table = analysis::weight_sweep(&inst, &SweepOptions { grid: 2, ..SweepOptions::default() }).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert!(table.rows.iter().all(|r| r.is_solved() && r.checked));
    assert_eq!(table.to_csv().lines().count(), 7);
    let curve = analysis::effectiveness_curve(&table);
    assert!(curve.windows(2).all(|w| w[0].cost <= w[1].cost && w[0].unmet >= w[1].unmet));
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let inst = instance::bundled();
    let base = SweepOptions { grid: 2, ..SweepOptions::default() };
    let a = analysis::weight_sweep(&inst, &SweepOptions { parallel: true, ..base.clone() }).unwrap();
    let b = analysis::weight_sweep(&inst, &SweepOptions { parallel: false, ..base }).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}
