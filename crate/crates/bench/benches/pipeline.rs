use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use gazegraph::eval::{Evaluator, Variant};
use gazegraph::gaze::{ivt_filter, IvtConfig};
use gazegraph::model::{accumulate, Model};
use gazegraph_bench::{samples, small_dataset, small_experiment};

fn bench_ivt(c: &mut Criterion) {
    let (ds, cfg) = small_dataset();
    let raw = ds.train[0].raw_gaze(&cfg);
    c.bench_function("ivt_filter", |b| {
        b.iter(|| ivt_filter(&raw, &IvtConfig::default(), &cfg.geometry).expect("filter runs"))
    });
}

fn bench_graph_build(c: &mut Criterion) {
    let (ds, cfg) = small_dataset();
    let exp = small_experiment();
    let ev = Evaluator::new(&ds, &exp, cfg.geometry).expect("valid experiment");
    let mut group = c.benchmark_group("build_samples");
    for variant in [Variant::Full, Variant::RandomFixation, Variant::NoFixation] {
        group.bench_function(variant.tag(), |b| b.iter(|| ev.training_samples(variant, 3).expect("samples build")));
    }
    group.finish();
}

fn bench_train_step(c: &mut Criterion) {
    let (ds, cfg) = small_dataset();
    let exp = small_experiment();
    let ev = Evaluator::new(&ds, &exp, cfg.geometry).expect("valid experiment");
    let mut group = c.benchmark_group("forward_backward");
    for variant in [Variant::Full, Variant::RandomFixation] {
        let data = samples(&ds, &cfg, &exp, variant);
        let model = Model::new(ev.model_config(variant), 0).expect("valid model");
        group.bench_function(variant.tag(), |b| {
            b.iter_batched(
                || model.clone(),
                |mut m| {
                    for s in &data {
                        accumulate(&mut m, s).expect("step runs");
                    }
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let (ds, cfg) = small_dataset();
    let exp = small_experiment();
    let ev = Evaluator::new(&ds, &exp, cfg.geometry).expect("valid experiment");
    let data = samples(&ds, &cfg, &exp, Variant::Full);
    let model = Model::new(ev.model_config(Variant::Full), 0).expect("valid model");
    c.bench_function("predict", |b| {
        b.iter(|| {
            for s in &data {
                model.predict(&s.graph).expect("predict runs");
            }
        })
    });
}

criterion_group!(benches, bench_ivt, bench_graph_build, bench_train_step, bench_predict);
criterion_main!(benches);
