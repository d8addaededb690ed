use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;

use knobtune::cost_model::{GbtModel, GbtParams, TrainingExample};
use knobtune::exploration::{ActorCritic, NetShape};
use knobtune::measurement::{measure_batch, Backend};
use knobtune::rng;
use knobtune::sampling::{kmeans_run, KMeans};
use knobtune::{Configuration, FeatureVector};
use knobtune_bench::{suite_backend, suite_space};

fn random_configs(n: usize, seed: u64) -> Vec<Configuration> {
    let space = suite_space();
    let mut r = rng::rng_from(seed);
    (0..n).map(|_| space.random_config(&mut r)).collect()
}

fn bench_kmeans(c: &mut Criterion) {
    let space = suite_space();
    let points: Vec<FeatureVector> = random_configs(512, 1)
        .iter()
        .map(|x| space.encode_features(x))
        .collect();
    let params = KMeans::default();
    c.bench_function("kmeans_512x6_k16", |b| {
        b.iter(|| kmeans_run(&points, 16, &params, 7).unwrap())
    });
}

fn bench_gbt(c: &mut Criterion) {
    let space = suite_space();
    let backend = suite_backend(&space, 3);
    let configs = random_configs(1000, 2);
    let results = measure_batch(&backend as &dyn Backend, &space, &configs).unwrap();
    let examples: Vec<TrainingExample> = results
        .iter()
        .map(|r| TrainingExample::new(space.encode_features(&r.config), r.fitness).unwrap())
        .collect();
    let params = GbtParams::default();
    c.bench_function("gbt_fit_1000", |b| {
        b.iter(|| GbtModel::fit(&examples, &params, 0).unwrap())
    });
    let model = GbtModel::fit(&examples, &params, 0).unwrap();
    let queries: Vec<FeatureVector> = random_configs(4096, 5)
        .iter()
        .map(|x| space.encode_features(x))
        .collect();
    c.bench_function("gbt_predict_4096", |b| {
        b.iter(|| model.predict_batch(&queries).unwrap())
    });
}

fn bench_forward(c: &mut Criterion) {
    let net = ActorCritic::new(
        NetShape {
            num_knobs: 6,
            hidden_dim: 128,
            head_hidden_dim: 64,
        },
        0,
    )
    .unwrap();
    let mut r = rng::rng_from(9);
    c.bench_function("actor_critic_forward_128", |b| {
        b.iter_batched(
            || ndarray::Array2::from_shape_fn((128, 6), |_| r.random::<f64>()),
            |x| net.forward(x.view()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_kmeans, bench_gbt, bench_forward);
criterion_main!(benches);
