//! Parallel against sequential execution of the data-parallel paths.
//!
//! Built without the `parallel` feature both variants run the same
//! sequential code, which gives the fallback baseline.

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use relief_core::analysis::{self, SweepOptions};
use relief_core::branch_bound::{self, MipOptions};
use relief_core::instance;
use relief_core::model::{self, AssemblyOptions, ObjectiveId};
use relief_core::random::{self, InstanceShape};
use relief_core::simplex::{self, SimplexOptions};

fn mode(parallel: bool) -> &'static str {
    if parallel {
        "parallel"
    } else {
        "sequential"
    }
}

fn pivoting(c: &mut Criterion) {
    let inst = instance::bundled();
    let m = model::assemble(&inst, &AssemblyOptions::default()).unwrap();
    let lp = m.lp_for(ObjectiveId::UnmetCommodity);
    let mut g = c.benchmark_group("lp_relaxation");
    for parallel in [false, true] {
        let opts = SimplexOptions { parallel, ..SimplexOptions::default() };
        g.bench_with_input(BenchmarkId::new(mode(parallel), lp.num_columns()), &opts, |b, o| {
            b.iter(|| simplex::solve_lp_with(black_box(&lp), o).unwrap())
        });
    }
    g.finish();
}

fn tiny_batch(c: &mut Criterion) {
    let models: Vec<_> = (0..32u64)
        .map(|seed| {
            let inst = random::random_instance(seed, &InstanceShape::tiny());
            model::assemble(&inst, &AssemblyOptions::default()).unwrap().lp_for(ObjectiveId::UnmetCommodity)
        })
        .collect();
    let mut opts = MipOptions::default();
    opts.simplex.parallel = false;
    let mut g = c.benchmark_group("mip_batch");
    for parallel in [false, true] {
        g.bench_function(mode(parallel), |b| {
            b.iter(|| relief_core::par::map(&models, parallel, |lp| branch_bound::solve_mip_with(lp, &opts).unwrap().objective))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let inst = instance::bundled();
    let mut g = c.benchmark_group("weight_sweep_grid2");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for parallel in [false, true] {
        let opts = SweepOptions { grid: 2, parallel, ..SweepOptions::default() };
        g.bench_function(mode(parallel), |b| b.iter(|| analysis::weight_sweep(black_box(&inst), &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, pivoting, tiny_batch, sweep);
criterion_main!(benches);
