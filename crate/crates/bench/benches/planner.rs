use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slp_bench::{last_lp, scenario};
use slp_core::{plan, solve, Method, PlanOptions, SolverOptions};

fn lp_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("lp_solve");
    group.sample_size(10);
    let opts = SolverOptions::default();
    for grid in [50, 100, 200] {
        let lp = last_lp("tight", grid);
        group.bench_with_input(BenchmarkId::new("cold", grid), &lp, |b, lp| b.iter(|| solve(lp, None, &opts).unwrap()));
        let basis = solve(&lp, None, &opts).unwrap().basis;
        group.bench_with_input(BenchmarkId::new("warm", grid), &lp, |b, lp| {
            b.iter(|| solve(lp, Some(&basis), &opts).unwrap())
        });
    }
    group.finish();
}

fn full_plan(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan");
    group.sample_size(10);
    for (name, method) in [("tight", Method::Slp), ("roomy", Method::Slp), ("roomy", Method::Slpp), ("tight", Method::Cpp)] {
        let sc = scenario(name);
        group.bench_function(format!("{name}/{method}"), |b| {
            b.iter(|| plan(&sc, method, &PlanOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lp_solve, full_plan);
criterion_main!(benches);
