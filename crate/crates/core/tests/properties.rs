use proptest::prelude::*;

use relief_core::analysis;
use relief_core::branch_bound::{self, MipOptions, MipStatus};
use relief_core::checker::{self, OracleStatus, Rule};
use relief_core::fgp;
use relief_core::instance;
use relief_core::model::{self, AssemblyOptions, ObjectiveId};
use relief_core::random::{self, InstanceShape};
use relief_core::simplex::{self, LpStatus, SimplexOptions};

fn same_status(mip: MipStatus, oracle: OracleStatus) -> bool {
    matches!(
        (mip, oracle),
        (MipStatus::Optimal, OracleStatus::Optimal)
            | (MipStatus::Infeasible, OracleStatus::Infeasible)
            | (MipStatus::Unbounded, OracleStatus::Unbounded)
    )
}

fn objective_strategy() -> impl Strategy<Value = ObjectiveId> {
    prop::sample::select(ObjectiveId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = random::random_lp(seed);
        let got = simplex::solve_lp(&lp).unwrap();
        let want = checker::lp_vertex_oracle(&lp).unwrap();
        match (got.status, want.status) {
            (LpStatus::Optimal, OracleStatus::Optimal) => {
                prop_assert!((got.objective - want.objective).abs() <= 1e-6);
                prop_assert!(lp.max_violation(&got.values) <= 1e-6);
            }
            (LpStatus::Infeasible, OracleStatus::Infeasible) | (LpStatus::Unbounded, OracleStatus::Unbounded) => {}
            (a, b) => prop_assert!(false, "status {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn bland_and_dantzig_agree(seed in any::<u64>()) {
        let lp = random::random_lp(seed);
        let a = simplex::solve_lp(&lp).unwrap();
        let b = simplex::solve_lp_with(&lp, &SimplexOptions::bland()).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 1e-6);
        }
    }

    #[test]
    fn warm_and_cold_branch_and_bound_agree_with_enumeration(seed in any::<u64>()) {
        let lp = random::random_mip(seed);
        let warm = branch_bound::solve_mip(&lp).unwrap();
        let cold = branch_bound::solve_mip_with(&lp, &MipOptions { warm_start: false, ..MipOptions::default() }).unwrap();
        let oracle = checker::enumerate_mip(&lp, checker::DEFAULT_GUARD).unwrap();
        prop_assert!(same_status(warm.status, oracle.status), "warm {:?} vs {:?}", warm.status, oracle.status);
        prop_assert_eq!(warm.status, cold.status);
        if warm.status == MipStatus::Optimal {
            prop_assert!((warm.objective - oracle.objective).abs() <= 1e-6);
            prop_assert!((cold.objective - oracle.objective).abs() <= 1e-6);
            prop_assert!(lp.max_violation(&warm.values) <= 1e-6);
            prop_assert!(lp.integrality_violation(&warm.values) <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solver_plans_pass_the_checker_and_cover_the_worst_case(seed in any::<u64>(), id in objective_strategy()) {
        let inst = random::random_instance(seed, &InstanceShape::tiny());
        let m = model::assemble(&inst, &AssemblyOptions::with_objective(id)).unwrap();
        let out = branch_bound::solve_mip(&m.lp_for(id)).unwrap();
        prop_assert_eq!(out.status, MipStatus::Optimal);
        let sol = m.decode(&inst, &out.values);
        let rep = checker::check(&inst, &sol).unwrap();
        prop_assert!(rep.pass, "{:?}", rep.violations);
        for (_, wc) in checker::all_worst_cases(&inst, &sol).unwrap() {
            prop_assert!(wc.shortfall <= wc.modeled + 1e-6);
        }
    }

    #[test]
    fn inflated_shipments_are_rejected(seed in any::<u64>()) {
        let inst = random::random_instance(seed, &InstanceShape::tiny());
        let id = ObjectiveId::UnmetCommodity;
        let m = model::assemble(&inst, &AssemblyOptions::with_objective(id)).unwrap();
        let out = branch_bound::solve_mip(&m.lp_for(id)).unwrap();
        let mut sol = m.decode(&inst, &out.values);
        prop_assume!(!sol.commodity_flows.is_empty());
        sol.commodity_flows[0].amount += 1e3;
        let rep = checker::check(&inst, &sol).unwrap();
        prop_assert!(!rep.pass);
        prop_assert!(rep.violations.iter().any(|v| matches!(v.rule, Rule::Row(_))));
    }

    #[test]
    fn larger_budgets_never_lower_unmet_commodity(seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let inst = random::random_instance(seed, &InstanceShape::tiny());
        let id = ObjectiveId::UnmetCommodity;
        let solve = |s: f64| {
            let scaled = inst.with_gamma_scale(s);
            let m = model::assemble(&scaled, &AssemblyOptions::with_objective(id)).unwrap();
            branch_bound::solve_mip(&m.lp_for(id)).unwrap().objective
        };
        prop_assert!(solve(hi) >= solve(lo) - 1e-6);
    }

    #[test]
    fn zero_budget_equals_nominal_problem(seed in any::<u64>(), id in objective_strategy()) {
        let inst = random::random_instance(seed, &InstanceShape::tiny());
        let solve = |i: &instance::Instance| {
            let m = model::assemble(i, &AssemblyOptions::with_objective(id)).unwrap();
            branch_bound::solve_mip(&m.lp_for(id)).unwrap().objective
        };
        prop_assert!((solve(&inst.with_gamma_scale(0.0)) - solve(&inst.without_deviations())).abs() <= 1e-6);
    }

    #[test]
    fn instance_json_round_trips(seed in any::<u64>()) {
        let inst = random::random_instance(seed, &InstanceShape::small());
        let back = instance::parse_instance(&instance::to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }
}

proptest! {
    #[test]
    fn membership_stays_in_unit_interval(v in -1e3f64..1e3, a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let (pis, nis) = if a <= b { (a, b) } else { (b, a) };
        let mu = fgp::membership(v, pis, nis);
        prop_assert!((0.0..=1.0).contains(&mu));
    }

    #[test]
    fn grid_points_lie_on_the_simplex(k in 2usize..5, grid in 2usize..7, full in any::<bool>()) {
        for w in analysis::grid_weights(k, grid, full) {
            prop_assert_eq!(w.len(), k);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn weights_off_the_simplex_are_refused(w in prop::collection::vec(0.0f64..1.0, 4)) {
        let sum: f64 = w.iter().sum();
        let res = fgp::validate_weights(&w, 4);
        prop_assert_eq!(res.is_ok(), (sum - 1.0).abs() <= 1e-9);
    }
}
