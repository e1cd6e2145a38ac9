use criterion::{criterion_group, criterion_main, Criterion};

use segmkt::econometrics::{event_study, twfe_estimate, Dataset, EventSpec, RegressionSpec};
use segmkt::policy::{sweep_firing_cost, DEFAULT_F_GRID};
use segmkt::{solve_equilibrium, ModelParams};
use segmkt_bench::{baseline, panel};

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for n in [101, 501] {
        let p = ModelParams {
            grid_size: n,
            ..ModelParams::baseline()
        };
        g.bench_function(format!("grid_{n}"), |b| b.iter(|| solve_equilibrium(&p).unwrap()));
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    let p = ModelParams::baseline();
    g.bench_function("default_grid", |b| b.iter(|| sweep_firing_cost(&p, &DEFAULT_F_GRID).unwrap()));
    g.finish();
}

fn microsim(c: &mut Criterion) {
    let eq = baseline();
    let mut g = c.benchmark_group("microsim");
    g.sample_size(10);
    g.bench_function("panel_20k", |b| b.iter(|| panel(&eq, 20_000)));
    g.finish();
}

fn estimation(c: &mut Criterion) {
    let eq = baseline();
    let ds = Dataset::from_records(&panel(&eq, 200_000).records);
    let mut g = c.benchmark_group("estimation");
    g.sample_size(10);
    g.bench_function("twfe_200k", |b| {
        b.iter(|| twfe_estimate(&ds, &RegressionSpec::standard("formal")).unwrap())
    });
    g.bench_function("event_study_200k", |b| {
        b.iter(|| event_study(&ds, &EventSpec::standard("formal")).unwrap())
    });
    g.finish();
}

criterion_group!(benches, solve, sweep, microsim, estimation);
criterion_main!(benches);
