use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use atc_ioc::costs::CostModel;
use atc_ioc::data::SynthConfig;
use atc_ioc::par::Execution;
use atc_ioc::planner::{plan_batch, PlannerConfig, Query};

fn batch(c: &mut Criterion) {
    let synth = SynthConfig::default();
    let cfg = PlannerConfig::default().with_expansions(5_000);
    let truth = synth.corridor_field();
    let model = CostModel::routing_only(&truth);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let queries: Vec<Query> = (0..16).map(|k| Query::new(synth.sample_start(k, &cfg, &mut rng), synth.goal)).collect();

    let mut g = c.benchmark_group("plan_batch");
    g.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        g.bench_with_input(BenchmarkId::new(name, queries.len()), &exec, |b, &exec| {
            b.iter(|| plan_batch(&queries, &model, &cfg, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
