//! Acceptance suite. Each test writes one `PASS`/`FAIL` line straight to
//! stderr (past the test harness capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use relief_core::analysis::{self, SweepOptions, SweepTable};
use relief_core::branch_bound::{self, MipStatus};
use relief_core::checker::{self, OracleStatus};
use relief_core::fgp::{self, FgpOptions};
use relief_core::instance::{self, Instance};
use relief_core::model::{self, AssemblyOptions, ObjectiveId, Var};
use relief_core::random::{self, InstanceShape};
use relief_core::simplex::{self, LpStatus};
use relief_core::Solution;

const TOL: f64 = 1e-6;

fn report(id: usize, name: &str, ok: bool, detail: String) {
    let line = format!("criterion {id} {name}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn single_optimum(inst: &Instance, id: ObjectiveId) -> (f64, Solution) {
    let m = model::assemble(inst, &AssemblyOptions::with_objective(id)).expect("assemble");
    let out = branch_bound::solve_mip(&m.lp_for(id)).expect("solve");
    assert_eq!(out.status, MipStatus::Optimal, "{id} not solved to optimality");
    (out.objective, m.decode(inst, &out.values))
}

fn frozen_sweep() -> &'static SweepTable {
    static TABLE: OnceLock<SweepTable> = OnceLock::new();
    TABLE.get_or_init(|| analysis::weight_sweep(&instance::bundled(), &SweepOptions::default()).expect("sweep"))
}

#[test]
fn c1_robustified_demand_anchor() {
    let start = Instant::now();
    let inst = instance::bundled();
    let n1 = inst.node_index("N1").unwrap();
    let a1 = inst.commodity_index("A1").unwrap();
    let m = model::assemble(&inst, &AssemblyOptions::default()).unwrap();

    // minimise the modeled shortfall of A1 at N1 in period 1 with every
    // shipment toward N1 in period 1 switched off
    let mut lp = m.lp.clone();
    let mut cost = vec![0.0; lp.num_columns()];
    let target = m.vix.column(&Var::UnmetCommodity { a: a1, p: n1, t: 1 }).expect("shortfall column");
    cost[target] = 1.0;
    lp.set_costs(&cost, 0.0);
    let mut closed = 0;
    for (j, var) in m.vix.coords().iter().enumerate() {
        let into_n1 = match *var {
            Var::CommodityFlow { arc, t, .. } | Var::Vehicles { arc, t } | Var::InjuryFlow { arc, t, .. } => {
                t == 1 && m.vix.arcs[arc].to == n1
            }
            _ => false,
        };
        if into_n1 {
            lp.columns[j].upper = 0.0;
            closed += 1;
        }
    }
    let out = branch_bound::solve_mip(&lp).unwrap();
    let sol = m.decode(&inst, &out.values);
    let modeled = sol
        .unmet_commodity
        .iter()
        .find(|e| e.entity == "A1" && e.node == "N1" && e.period == 1)
        .map_or(0.0, |e| e.value);
    let wc = checker::worst_case_shortfall(&inst, &sol, checker::Entity::Commodity(a1), n1, 1).unwrap();
    let elapsed = start.elapsed();
    let ok = out.status == MipStatus::Optimal
        && near(out.objective, 33.0)
        && near(modeled, 33.0)
        && near(wc.shortfall, 33.0)
        && elapsed < Duration::from_secs(5);
    report(
        1,
        "robustified-demand anchor",
        ok,
        format!("modeled {modeled}, worst case {}, {closed} columns closed, {elapsed:.2?}", wc.shortfall),
    );
    assert!(ok);
}

#[test]
fn c2_oracle_equivalence() {
    let start = Instant::now();
    let shape = InstanceShape::tiny();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for seed in 0..100u64 {
        let inst = random::random_instance(seed, &shape);
        for id in ObjectiveId::ALL {
            let opts = AssemblyOptions::with_objective(id);
            let m = model::assemble(&inst, &opts).unwrap();
            let bb = branch_bound::solve_mip(&m.lp_for(id)).unwrap();
            let oracle = checker::oracle_solve(&inst, &opts).unwrap();
            compared += 1;
            let agree = match (bb.status, oracle.status) {
                (MipStatus::Optimal, OracleStatus::Optimal) => near(bb.objective, oracle.objective),
                (MipStatus::Infeasible, OracleStatus::Infeasible) => true,
                (MipStatus::Unbounded, OracleStatus::Unbounded) => true,
                _ => false,
            };
            if !agree {
                mismatches.push(format!("seed {seed} {id}: {:?} {} vs {:?} {}", bb.status, bb.objective, oracle.status, oracle.objective));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(120);
    report(2, "oracle equivalence", ok, format!("{compared} problems on 100 instances, {} mismatches, {elapsed:.2?}", mismatches.len()));
    assert!(ok, "{mismatches:#?}");
}

#[test]
fn c3_lp_core_against_vertex_oracle() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut optimal = 0;
    for seed in 0..500u64 {
        let lp = random::random_lp(seed);
        let got = simplex::solve_lp(&lp).unwrap();
        let want = checker::lp_vertex_oracle(&lp).unwrap();
        let agree = match (got.status, want.status) {
            (LpStatus::Optimal, OracleStatus::Optimal) => {
                optimal += 1;
                near(got.objective, want.objective) && lp.max_violation(&got.values) <= TOL
            }
            (LpStatus::Infeasible, OracleStatus::Infeasible) | (LpStatus::Unbounded, OracleStatus::Unbounded) => true,
            _ => false,
        };
        if !agree {
            mismatches.push(format!("seed {seed}: {:?} {} vs {:?} {}", got.status, got.objective, want.status, want.objective));
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(30);
    report(3, "LP core correctness", ok, format!("500 programs, {optimal} optimal, {} mismatches, {elapsed:.2?}", mismatches.len()));
    assert!(ok, "{mismatches:#?}");
}

#[test]
fn c4_zero_budget_reduction() {
    let inst = instance::bundled();
    let scaled = inst.with_gamma_scale(0.0);
    let nominal = inst.without_deviations();
    let mut pairs = Vec::new();
    let mut ok = true;
    for id in ObjectiveId::ALL {
        let (a, _) = single_optimum(&scaled, id);
        let (b, _) = single_optimum(&nominal, id);
        ok &= near(a, b);
        pairs.push(format!("{id} {a}/{b}"));
    }
    report(4, "zero-budget reduction", ok, pairs.join(", "));
    assert!(ok);
}

#[test]
fn c5_price_of_robustness() {
    let inst = instance::bundled();
    let values: Vec<f64> =
        [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&s| single_optimum(&inst.with_gamma_scale(s), ObjectiveId::UnmetCommodity).0).collect();
    let ok = values.windows(2).all(|w| w[1] >= w[0] - TOL);
    report(5, "price-of-robustness monotonicity", ok, format!("obj2 over scales 0..1: {values:?}"));
    assert!(ok);
}

#[test]
fn c6_fgp_bracketing() {
    let inst = instance::bundled();
    let opts = FgpOptions::default();
    let (m, ideals) = fgp::compute_pis(&inst, &opts).unwrap();
    let k = ideals.objectives.len();
    let mut rng = random::rng(2024);
    let mut failures = Vec::new();
    for trial in 0..10 {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let res = fgp::solve_master(&inst, &m, &ideals, &w, &opts).unwrap();
        for i in 0..k {
            let v = res.values[i];
            if v < ideals.pis[i] - TOL || v > ideals.nis[i] + TOL {
                failures.push(format!("trial {trial} obj{} = {v} outside [{}, {}]", i + 1, ideals.pis[i], ideals.nis[i]));
            }
        }
    }
    for i in 0..k {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        let res = fgp::solve_master(&inst, &m, &ideals, &w, &opts).unwrap();
        if !near(res.values[i], ideals.pis[i]) {
            failures.push(format!("corner e{} gives {} not {}", i + 1, res.values[i], ideals.pis[i]));
        }
    }
    let ok = failures.is_empty();
    report(6, "FGP bracketing", ok, format!("10 weights + {k} corners, pis {:?}, nis {:?}", ideals.pis, ideals.nis));
    assert!(ok, "{failures:#?}");
}

#[test]
fn c7_protection_adequacy() {
    let shape = InstanceShape::small();
    let mut cells = 0;
    let mut failures = Vec::new();
    for seed in 0..25u64 {
        let inst = random::random_instance(1000 + seed, &shape);
        for id in ObjectiveId::ALL {
            let (_, sol) = single_optimum(&inst, id);
            for ((entity, node, t), wc) in checker::all_worst_cases(&inst, &sol).unwrap() {
                cells += 1;
                if wc.shortfall > wc.modeled + TOL {
                    failures.push(format!("seed {seed} {id} {entity:?} node {node} t {t}: {} > {}", wc.shortfall, wc.modeled));
                }
            }
        }
    }
    let ok = failures.is_empty();
    report(7, "protection adequacy", ok, format!("{cells} cells on 25 instances, {} violations", failures.len()));
    assert!(ok, "{failures:#?}");
}

#[test]
fn c8_checker_gate() {
    let inst = instance::bundled();
    let mut emitted: Vec<(String, Instance, Solution)> = Vec::new();

    // solve: compromise plan
    let res = fgp::run(&inst, &[0.4, 0.3, 0.2, 0.1], &FgpOptions::default()).unwrap();
    emitted.push(("solve".into(), inst.clone(), res.solution));
    // pis-nis: the ideal plans
    let (m, ideals) = fgp::compute_pis(&inst, &FgpOptions::default()).unwrap();
    for (i, x) in ideals.ideal_solutions.iter().enumerate() {
        emitted.push((format!("pis obj{}", i + 1), inst.clone(), m.decode(&inst, x)));
    }
    // sweep: every grid point
    for row in &frozen_sweep().rows {
        let sol = row.solution.clone().expect("sweep row solved");
        emitted.push((format!("sweep {:?}", row.weights), inst.clone(), sol));
    }
    // oracle: brute-force and branch-and-bound plans on tiny instances
    for seed in 0..10u64 {
        let tiny = random::random_instance(seed, &InstanceShape::tiny());
        for id in ObjectiveId::ALL {
            let opts = AssemblyOptions::with_objective(id);
            let tm = model::assemble(&tiny, &opts).unwrap();
            let o = checker::oracle_solve(&tiny, &opts).unwrap();
            if o.status == OracleStatus::Optimal {
                emitted.push((format!("oracle seed {seed} {id}"), tiny.clone(), tm.decode(&tiny, &o.values)));
            }
            let (_, sol) = single_optimum(&tiny, id);
            emitted.push((format!("bnb seed {seed} {id}"), tiny.clone(), sol));
        }
    }

    let mut rejected = Vec::new();
    for (what, inst, sol) in &emitted {
        let rep = checker::check(inst, sol).unwrap();
        if !rep.pass || !rep.violations.is_empty() {
            rejected.push(format!("{what}: {:?}", rep.violations));
        }
    }
    let ok = rejected.is_empty();
    report(8, "checker gate", ok, format!("{} plans checked, {} rejected", emitted.len(), rejected.len()));
    assert!(ok, "{rejected:#?}");
}

#[test]
fn c9_sensitivity_direction() {
    let table = frozen_sweep();
    let frozen = include_str!("data/sweep_grid5.csv");
    let mut drift = Vec::new();
    let frozen_rows: Vec<Vec<f64>> = frozen
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(8).map(|x| x.parse().unwrap()).collect())
        .collect();
    if frozen_rows.len() != table.rows.len() {
        drift.push(format!("{} rows, frozen {}", table.rows.len(), frozen_rows.len()));
    }
    for (row, want) in table.rows.iter().zip(&frozen_rows) {
        let got: Vec<f64> = row.weights.iter().chain(&row.values).copied().collect();
        if got.len() != want.len() || got.iter().zip(want).any(|(a, b)| !near(*a, *b)) {
            drift.push(format!("{got:?} vs frozen {want:?}"));
        }
    }
    let column = |i: usize| frozen_rows.iter().map(|r| r[4 + i]).collect::<Vec<f64>>();
    let (v1, v3) = (analysis::sample_variance(&column(0)), analysis::sample_variance(&column(2)));
    let (l1, l3) = (
        analysis::sample_variance(&table.column(ObjectiveId::UnservedInjuries)),
        analysis::sample_variance(&table.column(ObjectiveId::SystemCost)),
    );
    let ok = drift.is_empty() && v3 > v1 && l3 > l1;
    report(9, "sensitivity direction", ok, format!("var obj3 {v3:.1} > var obj1 {v1:.1} over {} grid points", frozen_rows.len()));
    assert!(ok, "{drift:#?}");
}
