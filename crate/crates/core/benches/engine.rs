use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wasp_core::accuracy::MeasureSpec;
use wasp_core::dataset::synthesize_portfolio;
use wasp_core::engine::{run, GeneratorSpec, RunConfig};
use wasp_core::generator::BandwidthRule;
use wasp_core::prediction::{Characteristic, PredictionStrategy};
use wasp_core::zoo::ModelSpec;

fn config(workers: Option<usize>) -> RunConfig {
    RunConfig {
        schema: None,
        generators: vec![
            GeneratorSpec::new("ols", ModelSpec::ols()),
            GeneratorSpec::new("lognormal", ModelSpec::lognormal()),
            GeneratorSpec::new("gamma", ModelSpec::gamma()),
            GeneratorSpec::new("knn", ModelSpec::knn(10)),
        ],
        strategies: vec![
            PredictionStrategy::plug_in("ols", ModelSpec::ols()),
            PredictionStrategy::plug_in("mean", ModelSpec::intercept_only()),
            PredictionStrategy::plug_in("tree", ModelSpec::tree(4, 10)),
            PredictionStrategy::plug_in("knn", ModelSpec::knn(10)),
        ],
        characteristics: vec![Characteristic::total(), Characteristic::median()],
        measures: vec![MeasureSpec::Rmse, MeasureSpec::Qape { p: 0.5 }],
        iterations: 50,
        master_seed: 1,
        workers,
        failure_ceiling: 0.01,
        bandwidth: BandwidthRule::Silverman,
    }
}

fn monte_carlo(c: &mut Criterion) {
    let frame = synthesize_portfolio(300, 60, 1).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for (label, workers) in [("sequential", Some(1)), ("parallel", None)] {
        let cfg = config(workers);
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| run(cfg, &frame).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo);
criterion_main!(benches);
