use std::fmt::Write as _;

use super::metrics::{action_iou, norm_levenshtein, MetricsReport, REPORT_CSV_HEADER};
use super::pipeline::{build_samples, Encoders, PipelineConfig, Variant};
use crate::error::{Error, Result};
use crate::model::{train, Model, ModelConfig, Prediction, TrainLog, TrainingSample};
use crate::seed;
use crate::vocab::Vocabulary;
use crate::world::{execute, ActionVocab, AtomicAction, Dataset, SyntheticVideo};

/// Everything a train-and-evaluate run depends on besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    /// Training video `i` is cut at `train_fractions[i % len]`.
    pub train_fractions: Vec<f64>,
    pub eval_fraction: f64,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig) -> Self {
        ExperimentConfig {
            pipeline: PipelineConfig::default(),
            model,
            train_fractions: vec![0.5, 0.7, 0.9],
            eval_fraction: 0.7,
        }
    }

    /// Desk-scale setup used for the ablation experiments.
    pub fn small(action_vocab: usize) -> Self {
        let model = ModelConfig {
            ecc_hidden: 16,
            head_hidden: 32,
            lstm_hidden: 32,
            batch_size: 4,
            epochs: 40,
            ..ModelConfig::small(action_vocab)
        };
        let mut c = ExperimentConfig::new(model);
        c.pipeline.visual_dim = c.model.node_dim;
        c.pipeline.semantic_dim = c.model.edge_dim / 2;
        c.pipeline.visual_mix.cell = 0.3;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.train_fractions.is_empty() {
            return Err(Error::Config("no training fractions".into()));
        }
        for &f in self.train_fractions.iter().chain([&self.eval_fraction]) {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("input fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Aggregate metrics of predictions against the remaining gold actions.
/// Success executes the observed prefix followed by the predicted suffix.
pub fn score(
    videos: &[SyntheticVideo],
    fraction: f64,
    predictions: &[Prediction],
    actions: &ActionVocab,
    vocab: &Vocabulary,
) -> Result<Scores> {
    if videos.is_empty() {
        return Err(Error::EmptyInput("no videos to score".into()));
    }
    if videos.len() != predictions.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} videos",
            predictions.len(),
            videos.len()
        )));
    }
    let mut s = Scores::default();
    for (video, pred) in videos.iter().zip(predictions) {
        let (prefix, rest) = video.split_at_fraction(fraction);
        let gold = actions.tokens(rest)?;
        s.accuracy += f64::from(u8::from(pred.activity == video.activity()));
        s.iou += action_iou(&gold, &pred.actions);
        s.levenshtein += norm_levenshtein(&gold, &pred.actions);
        let mut program: Vec<AtomicAction> = prefix.to_vec();
        for &t in &pred.actions {
            let a = actions.action(t).ok_or(Error::Index {
                what: "action vocabulary",
                index: t,
                len: actions.action_count(),
            })?;
            program.push(*a);
        }
        let run = execute(&program, &video.initial, vocab);
        s.success_rate += f64::from(u8::from(run.achieves(&video.program.goal)));
    }
    let n = videos.len() as f64;
    s.accuracy /= n;
    s.iou /= n;
    s.levenshtein /= n;
    s.success_rate /= n;
    s.n = videos.len();
    Ok(s)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub iou: f64,
    pub levenshtein: f64,
    pub success_rate: f64,
    pub n: usize,
}

impl Scores {
    pub fn report(&self, variant: Variant, fraction: f64, seed: u64) -> MetricsReport {
        MetricsReport {
            variant: variant.tag().to_string(),
            fraction,
            seed,
            accuracy: self.accuracy,
            iou: self.iou,
            levenshtein: self.levenshtein,
            success_rate: self.success_rate,
            n: self.n,
        }
    }
}

/// Seeds of one run, all fanned out from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub init: u64,
    pub train: u64,
    pub encode_train: u64,
    pub encode_test: u64,
}

impl RunSeeds {
    pub fn new(seed: u64, variant: Variant) -> Self {
        let v = seed::derive(seed, "variant", 0);
        let base = seed::derive(v, variant.tag(), 0);
        RunSeeds {
            init: seed::derive(seed, "init", 0),
            train: seed::derive(seed, "train", 0),
            encode_train: seed::derive(base, "encode", 0),
            encode_test: seed::derive(base, "encode", 1),
        }
    }
}

/// Shared state for evaluating models on one dataset.
pub struct Evaluator<'a> {
    pub dataset: &'a Dataset,
    pub config: &'a ExperimentConfig,
    pub encoders: Encoders,
    pub actions: ActionVocab,
    pub geometry: crate::gaze::ScreenGeometry,
}

impl<'a> Evaluator<'a> {
    pub fn new(dataset: &'a Dataset, config: &'a ExperimentConfig, geometry: crate::gaze::ScreenGeometry) -> Result<Self> {
        config.validate()?;
        Ok(Evaluator {
            dataset,
            config,
            encoders: Encoders::new(&config.pipeline)?,
            actions: crate::world::action_vocab(),
            geometry,
        })
    }

    pub fn samples(&self, videos: &[SyntheticVideo], fractions: &[f64], variant: Variant, seed: u64) -> Result<Vec<TrainingSample>> {
        build_samples(
            videos,
            fractions,
            variant,
            &self.encoders,
            &self.actions,
            &self.config.pipeline,
            &self.geometry,
            seed,
        )
    }

    /// One sample per training video, cycling through the training
    /// fractions.
    pub fn training_samples(&self, variant: Variant, seed: u64) -> Result<Vec<TrainingSample>> {
        let f = &self.config.train_fractions;
        let fractions: Vec<f64> = (0..self.dataset.train.len()).map(|i| f[i % f.len()]).collect();
        self.samples(&self.dataset.train, &fractions, variant, seed)
    }

    pub fn model_config(&self, variant: Variant) -> ModelConfig {
        let mut m = self.config.model.clone();
        m.conditioning = variant.conditioning();
        m.action_vocab = self.actions.size();
        m.node_dim = self.config.pipeline.visual_dim;
        m.edge_dim = 2 * self.config.pipeline.semantic_dim;
        m
    }

    pub fn train(&self, variant: Variant, seed: u64) -> Result<(Model, TrainLog)> {
        let seeds = RunSeeds::new(seed, variant);
        let samples = self.training_samples(variant, seeds.encode_train)?;
        let mut model = Model::new(self.model_config(variant), seeds.init)?;
        let log = train(&mut model, &samples, seeds.train)?;
        Ok((model, log))
    }

    /// Scores `model` on the test split at `fraction` under `variant`'s
    /// input transformation.
    pub fn evaluate(&self, model: &Model, variant: Variant, fraction: f64, seed: u64) -> Result<MetricsReport> {
        let seeds = RunSeeds::new(seed, variant);
        let test = &self.dataset.test;
        let samples = self.samples(test, &vec![fraction; test.len()], variant, seeds.encode_test)?;
        let predictions = samples
            .iter()
            .map(|s| model.predict(&s.graph))
            .collect::<Result<Vec<_>>>()?;
        Ok(score(test, fraction, &predictions, &self.actions, &self.encoders.vocab)?.report(variant, fraction, seed))
    }
}

/// Trained model, its log, and its test report.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub model: Model,
    pub log: TrainLog,
    pub report: MetricsReport,
}

/// Trains and evaluates under one variant.
pub fn ablate(variant: Variant, dataset: &Dataset, config: &ExperimentConfig, geometry: crate::gaze::ScreenGeometry, seed: u64) -> Result<AblationRun> {
    let ev = Evaluator::new(dataset, config, geometry)?;
    let (model, log) = ev.train(variant, seed)?;
    let report = ev.evaluate(&model, variant, config.eval_fraction, seed)?;
    Ok(AblationRun { model, log, report })
}

pub const DEFAULT_CROP_SIZES: [f64; 4] = [25.0, 50.0, 75.0, 100.0];

/// One full run per crop half-size.
pub fn sweep_crop(
    dataset: &Dataset,
    sizes: &[f64],
    config: &ExperimentConfig,
    geometry: crate::gaze::ScreenGeometry,
    seed: u64,
) -> Result<Vec<(f64, MetricsReport)>> {
    if sizes.is_empty() {
        return Err(Error::Config("no crop sizes".into()));
    }
    sizes
        .iter()
        .map(|&b| {
            let mut c = config.clone();
            c.pipeline.crop_half_size = b;
            Ok((b, ablate(Variant::Full, dataset, &c, geometry, seed)?.report))
        })
        .collect()
}

pub fn sweep_csv(rows: &[(f64, MetricsReport)]) -> String {
    let mut out = format!("B,{REPORT_CSV_HEADER}\n");
    for (b, r) in rows {
        let _ = writeln!(out, "{b},{}", r.csv_row());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::world::{generate_dataset, DatasetConfig};

    fn tiny_dataset() -> (Dataset, DatasetConfig) {
        let cfg = DatasetConfig {
            activities: 3,
            cameras_per_activity: 2,
            test_cameras_per_activity: 1,
            videos_per_pair: 1,
            ..DatasetConfig::default()
        };
        (generate_dataset(&cfg, 11).unwrap(), cfg)
    }

    fn tiny_config() -> ExperimentConfig {
        let mut m = ModelConfig::small(crate::world::action_vocab().size());
        m.node_dim = 8;
        m.ecc_hidden = 6;
        m.ecc_layers = 2;
        m.head_hidden = 8;
        m.lstm_hidden = 8;
        m.epochs = 2;
        let mut c = ExperimentConfig::new(m);
        c.pipeline.visual_dim = 8;
        c.pipeline.semantic_dim = 4;
        c.model.edge_dim = 8;
        c
    }

    fn oracle(videos: &[SyntheticVideo], fraction: f64, actions: &ActionVocab) -> Vec<Prediction> {
        videos
            .iter()
            .map(|v| Prediction {
                activity: v.activity(),
                activity_probs: vec![],
                actions: actions.tokens(v.split_at_fraction(fraction).1).unwrap(),
            })
            .collect()
    }

    #[test]
    fn oracle_predictions_score_perfectly() {
        let (ds, _) = tiny_dataset();
        let actions = crate::world::action_vocab();
        let vocab = Vocabulary::household();
        for f in [0.5, 0.7, 0.9] {
            let s = score(&ds.test, f, &oracle(&ds.test, f, &actions), &actions, &vocab).unwrap();
            assert_eq!((s.accuracy, s.iou, s.levenshtein, s.success_rate), (1.0, 1.0, 0.0, 1.0));
        }
    }

    #[test]
    fn empty_suffixes_fail_and_half_gold_scores_half() {
        let (ds, _) = tiny_dataset();
        let actions = crate::world::action_vocab();
        let vocab = Vocabulary::household();
        let mut preds = oracle(&ds.test, 0.5, &actions);
        for p in &mut preds {
            p.actions.clear();
        }
        let s = score(&ds.test, 0.5, &preds, &actions, &vocab).unwrap();
        assert_eq!(s.success_rate, 0.0);
        let two = [ds.test[0].clone(), ds.test[1].clone()];
        let mut preds = oracle(&two, 0.5, &actions);
        preds[1].actions.clear();
        assert_eq!(score(&two, 0.5, &preds, &actions, &vocab).unwrap().success_rate, 0.5);
    }

    #[test]
    fn score_rejects_mismatched_lengths() {
        let (ds, _) = tiny_dataset();
        let actions = crate::world::action_vocab();
        let err = score(&ds.test, 0.7, &[], &actions, &Vocabulary::household()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn visual_only_edges_zeroes_every_attribute() {
        let (ds, dcfg) = tiny_dataset();
        let cfg = tiny_config();
        let ev = Evaluator::new(&ds, &cfg, dcfg.geometry).unwrap();
        let samples = ev.training_samples(Variant::VisualOnlyEdges, 3).unwrap();
        for s in &samples {
            assert!(s.graph.attrs.iter().all(|a| a.iter().all(|&x| x == 0.0)));
        }
        let full = ev.training_samples(Variant::Full, 3).unwrap();
        assert!(full.iter().any(|s| s.graph.attrs.iter().any(|a| a.iter().any(|&x| x != 0.0))));
    }

    #[test]
    fn ablate_is_deterministic_and_full_matches_plain_run() {
        let (ds, dcfg) = tiny_dataset();
        let cfg = tiny_config();
        let a = ablate(Variant::Full, &ds, &cfg, dcfg.geometry, 5).unwrap();
        let b = ablate(Variant::Full, &ds, &cfg, dcfg.geometry, 5).unwrap();
        assert_eq!(a.report, b.report);
        let ev = Evaluator::new(&ds, &cfg, dcfg.geometry).unwrap();
        let (model, _) = ev.train(Variant::Full, 5).unwrap();
        assert_eq!(ev.evaluate(&model, Variant::Full, 0.7, 5).unwrap(), a.report);
        assert_eq!(a.report.variant, "full");
        for x in [a.report.accuracy, a.report.iou, a.report.levenshtein, a.report.success_rate] {
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn every_variant_runs() {
        let (ds, dcfg) = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.model.epochs = 1;
        for v in Variant::ALL {
            let r = ablate(v, &ds, &cfg, dcfg.geometry, 1).unwrap();
            assert_eq!(r.report.variant, v.tag());
            assert_eq!(r.model.config.conditioning, v.conditioning());
        }
        assert!(matches!("bogus".parse::<Variant>(), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_has_a_row_per_size() {
        let (ds, dcfg) = tiny_dataset();
        let mut cfg = tiny_config();
        cfg.model.epochs = 1;
        let rows = sweep_crop(&ds, &DEFAULT_CROP_SIZES, &cfg, dcfg.geometry, 2).unwrap();
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        for (line, b) in lines[1..].iter().zip(["25", "50", "75", "100"]) {
            assert!(line.starts_with(&format!("{b},full,")));
        }
        assert!(sweep_crop(&ds, &[], &cfg, dcfg.geometry, 2).is_err());
        assert_eq!(ExperimentConfig::new(cfg.model.clone()).pipeline.crop_half_size, 75.0);
    }
}
