//! Fixtures shared by the benchmarks.

use gazegraph::eval::{Evaluator, ExperimentConfig, Variant};
use gazegraph::model::TrainingSample;
use gazegraph::world::{action_vocab, generate_dataset, Dataset, DatasetConfig};

pub fn small_dataset() -> (Dataset, DatasetConfig) {
    let cfg = DatasetConfig {
        activities: 4,
        cameras_per_activity: 3,
        test_cameras_per_activity: 1,
        videos_per_pair: 2,
        ..DatasetConfig::default()
    };
    (generate_dataset(&cfg, 1).expect("valid config"), cfg)
}

pub fn small_experiment() -> ExperimentConfig {
    let mut c = ExperimentConfig::small(action_vocab().size());
    c.model.epochs = 1;
    c
}

pub fn samples(ds: &Dataset, cfg: &DatasetConfig, exp: &ExperimentConfig, variant: Variant) -> Vec<TrainingSample> {
    let ev = Evaluator::new(ds, exp, cfg.geometry).expect("valid experiment");
    ev.training_samples(variant, 3).expect("samples build")
}
