//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! The ablation checks share one set of trained models, computed once and
//! serialised behind a lock so that timings are not distorted by other
//! tests competing for the CPU.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng as _, SeedableRng as _};
use rand_chacha::ChaCha8Rng;

use gazegraph::encoders::{SemanticEncoder, VisualEmbedding};
use gazegraph::eval::{action_iou, reports_csv, Evaluator, ExperimentConfig, MetricsReport, RunSeeds, Variant};
use gazegraph::graphbuild::{build_graph, FrameSource};
use gazegraph::model::{GraphInput, Model, ModelConfig};
use gazegraph::numerics::gradcheck::{check_param_gradients, max_rel_error};
use gazegraph::numerics::Tape;
use gazegraph::vocab::{ObjectLabel, Vocabulary};
use gazegraph::world::{action_vocab, generate_dataset, success_rate, Dataset, DatasetConfig, TEMPLATES};
use gazegraph::Result;

const SEEDS: [u64; 3] = [0, 1, 2];

fn report(name: &str, pass: bool, detail: String) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------- gradients

#[test]
fn gradient_fidelity() {
    let cfg = ModelConfig {
        node_dim: 4,
        edge_dim: 6,
        ecc_layers: 3,
        ecc_hidden: 3,
        head_hidden: 4,
        lstm_hidden: 4,
        lstm_layers: 2,
        activity_classes: 3,
        action_vocab: 6,
        ..ModelConfig::small(6)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = Vocabulary::household();
    let semantic = SemanticEncoder::new(&vocab, 3);
    let frames: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            let mut v = vec![0.0; 4];
            v[i % 4] = 1.0;
            v[(i + 1) % 4] = rng.random_range(-0.5..0.5);
            v
        })
        .collect();
    let labels: Vec<ObjectLabel> = (0..5).map(|i| ObjectLabel(i + 1)).collect();
    let source = Table { frames, labels };
    let mut graph = build_graph(&source, 5, 2.0, &semantic).unwrap();
    gazegraph::graphbuild::add_self_loops(&mut graph, &semantic).unwrap();
    assert_eq!(graph.nodes.len(), 5);
    let gi = GraphInput::from_graph(&graph).unwrap();

    let mut worst: f64 = 0.0;
    for conditioning in ["hierarchical", "flat", "actions_only"] {
        let mut c = cfg.clone();
        c.set("conditioning", conditioning).unwrap();
        let mut model = Model::new(c, 17).unwrap();
        let shell = model.clone();
        let gold = [2, 0, 3];
        let entries = check_param_gradients(&mut model.store, |tape: &mut Tape, store| {
            let mut m = shell.clone();
            m.store = store.clone();
            let fwd = m.forward_teacher(tape, &gi, 1, &gold)?;
            Ok(m.loss(tape, &fwd, 1, &gold)?.0)
        })
        .unwrap();
        worst = worst.max(max_rel_error(&entries));
    }
    let pass = worst < 1e-4;
    report("gradient fidelity", pass, format!("max relative error {worst:.2e} over a 5-node graph"));
    assert!(pass);
}

// ---------------------------------------------------------------- graph builder

struct Table {
    frames: Vec<Vec<f64>>,
    labels: Vec<ObjectLabel>,
}

impl FrameSource for Table {
    fn video_id(&self) -> &str {
        "table"
    }
    fn frame_count(&self) -> usize {
        self.frames.len()
    }
    fn embedding(&self, frame: usize) -> Result<VisualEmbedding> {
        Ok(VisualEmbedding(self.frames[frame].clone()))
    }
    fn fixated_object(&self, frame: usize) -> Result<ObjectLabel> {
        Ok(self.labels[frame])
    }
}

/// Straight-line trace of the merge rule: returns node membership lists and
/// the ordered, de-duplicated transitions between consecutive nodes.
fn trace(frames: &[Vec<f64>], rho: f64) -> (Vec<Vec<usize>>, Vec<(usize, usize)>) {
    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
    let mut reps: Vec<usize> = vec![0];
    let mut members = vec![vec![0]];
    let mut edges = Vec::new();
    let mut at = 0;
    for t in 1..frames.len() {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, &r) in reps.iter().enumerate() {
            let s = cos(&frames[r], &frames[t]);
            if s > best_sim {
                best_sim = s;
                best = i;
            }
        }
        let node = if best_sim < rho {
            reps.push(t);
            members.push(vec![t]);
            reps.len() - 1
        } else {
            members[best].push(t);
            best
        };
        if node != at && !edges.contains(&(at, node)) {
            edges.push((at, node));
        }
        at = node;
    }
    (members, edges)
}

#[test]
fn graph_builder_oracle() {
    let vocab = Vocabulary::household();
    let semantic = SemanticEncoder::new(&vocab, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut traced, mut extremes) = (0, 0);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let k = rng.random_range(1..=50);
        let dim = rng.random_range(2..=6);
        let palette: Vec<Vec<f64>> = (0..rng.random_range(1..=8))
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let frames: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let base = &palette[rng.random_range(0..palette.len())];
                base.iter().map(|x| x + rng.random_range(-0.1..0.1)).collect()
            })
            .collect();
        let labels = (0..k).map(|_| ObjectLabel(rng.random_range(0..vocab.len()))).collect();
        let source = Table { frames, labels };
        let rho: f64 = rng.random_range(-0.5..1.0);
        let g = build_graph(&source, k, rho, &semantic).unwrap();
        let (members, edges) = trace(&source.frames, rho);
        let got_members: Vec<Vec<usize>> = g.nodes.iter().map(|n| n.member_frames.clone()).collect();
        let got_edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.src, e.dst)).collect();
        if got_members != members || got_edges != edges {
            failures.push(format!("case {case}: trace mismatch"));
        } else {
            traced += 1;
        }
        for (i, n) in g.nodes.iter().enumerate() {
            if n.fixated_object != source.labels[members[i][0]] {
                failures.push(format!("case {case}: node {i} label not from its creating frame"));
            }
        }

        let all = build_graph(&source, k, 1.0 + 1e-9, &semantic).unwrap();
        let one = build_graph(&source, k, -1.0, &semantic).unwrap();
        if all.nodes.len() == k && one.nodes.len() == 1 && one.edges.is_empty() {
            extremes += 1;
        } else {
            failures.push(format!("case {case}: K={k} gave |V|={} and {}", all.nodes.len(), one.nodes.len()));
        }
    }
    let pass = failures.is_empty();
    report(
        "graph builder oracle",
        pass,
        format!("{traced}/1000 sequences match the trace, {extremes}/1000 extreme thresholds exact"),
    );
    assert!(pass, "{:?}", &failures[..failures.len().min(5)]);
}

// ---------------------------------------------------------------- metrics

fn dp_levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

#[test]
fn metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..10_000 {
        let a: Vec<u8> = (0..rng.random_range(0..15)).map(|_| rng.random_range(0..5)).collect();
        let b: Vec<u8> = (0..rng.random_range(0..15)).map(|_| rng.random_range(0..5)).collect();
        if gazegraph::eval::levenshtein(&a, &b) != dp_levenshtein(&a, &b) {
            bad += 1;
        }
        let mut inter = 0usize;
        let mut union = 0usize;
        for s in 0u8..5 {
            let (x, y) = (a.contains(&s), b.contains(&s));
            inter += usize::from(x && y);
            union += usize::from(x || y);
        }
        let expected = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        if action_iou(&a, &b) != expected {
            bad += 1;
        }
    }
    let pass = bad == 0;
    report("metric oracles", pass, format!("{bad} disagreements over 10000 pairs"));
    assert!(pass);
}

// ---------------------------------------------------------------- executor

#[test]
fn executor_on_every_template() {
    let ds = generate_dataset(&DatasetConfig::default(), 4).unwrap();
    let vocab = Vocabulary::household();
    let mut failures = Vec::new();
    for (activity, template) in TEMPLATES.iter().enumerate() {
        let videos: Vec<_> = ds.train.iter().chain(&ds.test).filter(|v| v.program.activity == activity).collect();
        let gold = success_rate(
            videos.iter().map(|v| (&v.program.actions[..], &v.initial, &v.program.goal[..])),
            &vocab,
        );
        let cut = success_rate(
            videos.iter().map(|v| (&v.program.actions[..v.program.actions.len() - 1], &v.initial, &v.program.goal[..])),
            &vocab,
        );
        if videos.is_empty() || gold != 1.0 || cut != 0.0 {
            failures.push(format!("{}: gold {gold} truncated {cut}", template.name));
        }
    }
    let pass = failures.is_empty();
    report(
        "executor",
        pass,
        format!("{} templates, {} failing", TEMPLATES.len(), failures.len()),
    );
    assert!(pass, "{failures:?}");
}

// ---------------------------------------------------------------- shared runs

static CPU: Mutex<()> = Mutex::new(());

fn exclusive<T>(f: impl FnOnce() -> T) -> T {
    let _guard = CPU.lock().unwrap_or_else(|e| e.into_inner());
    f()
}

struct Experiment {
    data: DatasetConfig,
    dataset: Dataset,
    config: ExperimentConfig,
}

fn experiment() -> &'static Experiment {
    static E: OnceLock<Experiment> = OnceLock::new();
    E.get_or_init(|| {
        let data = DatasetConfig::experiment();
        Experiment {
            dataset: generate_dataset(&data, 2024).unwrap(),
            config: ExperimentConfig::small(action_vocab().size()),
            data,
        }
    })
}

struct Trained {
    model: Model,
    checkpoint: String,
    /// Evaluation at 0.5, 0.7 and 0.9 of the input.
    reports: [MetricsReport; 3],
    elapsed: Duration,
}

impl Trained {
    fn at(&self, fraction: f64) -> &MetricsReport {
        self.reports.iter().find(|r| r.fraction == fraction).unwrap()
    }
}

fn train_and_evaluate(variant: Variant, seed: u64) -> Trained {
    let e = experiment();
    let start = Instant::now();
    let ev = Evaluator::new(&e.dataset, &e.config, e.data.geometry).unwrap();
    let (model, _) = ev.train(variant, seed).unwrap();
    let reports = [0.5, 0.7, 0.9].map(|f| ev.evaluate(&model, variant, f, seed).unwrap());
    let checkpoint = model.checkpoint(vec![("seed".into(), seed.to_string())]).to_text();
    Trained {
        model,
        checkpoint,
        reports,
        elapsed: start.elapsed(),
    }
}

fn run(variant: Variant, seed: u64) -> &'static Trained {
    static RUNS: OnceLock<Mutex<HashMap<(Variant, u64), &'static Trained>>> = OnceLock::new();
    let runs = RUNS.get_or_init(Default::default);
    exclusive(|| {
        if let Some(t) = runs.lock().unwrap().get(&(variant, seed)) {
            return *t;
        }
        let t: &'static Trained = Box::leak(Box::new(train_and_evaluate(variant, seed)));
        runs.lock().unwrap().insert((variant, seed), t);
        t
    })
}

fn mean_over_seeds(variant: Variant, metric: impl Fn(&MetricsReport) -> f64) -> f64 {
    SEEDS.iter().map(|&s| metric(run(variant, s).at(0.7))).sum::<f64>() / SEEDS.len() as f64
}

fn seconds_over_seeds(variant: Variant) -> f64 {
    SEEDS.iter().map(|&s| run(variant, s).elapsed.as_secs_f64()).sum()
}

// ---------------------------------------------------------------- capacity

#[test]
fn capacity_on_twenty_videos() {
    let data = DatasetConfig {
        activities: 5,
        cameras_per_activity: 3,
        test_cameras_per_activity: 1,
        videos_per_pair: 2,
        ..DatasetConfig::default()
    };
    let (acc, iou, epochs, elapsed, n) = exclusive(|| {
        let start = Instant::now();
        let dataset = generate_dataset(&data, 11).unwrap();
        let mut config = ExperimentConfig::small(action_vocab().size());
        config.model.epochs = 300;
        config.model.batch_size = 1;
        let ev = Evaluator::new(&dataset, &config, data.geometry).unwrap();
        let (model, log) = ev.train(Variant::Full, 0).unwrap();
        let samples = ev.training_samples(Variant::Full, RunSeeds::new(0, Variant::Full).encode_train).unwrap();
        let (mut hits, mut iou) = (0usize, 0.0);
        for s in &samples {
            let p = model.predict(&s.graph).unwrap();
            hits += usize::from(p.activity == s.activity);
            iou += action_iou(&s.actions, &p.actions);
        }
        let n = samples.len();
        (hits as f64 / n as f64, iou / n as f64, log.epochs.len(), start.elapsed(), n)
    });
    let pass = n == 20 && epochs <= 300 && acc >= 0.95 && iou >= 0.90 && elapsed < Duration::from_secs(300);
    report(
        "capacity",
        pass,
        format!(
            "{n} videos, {epochs} epochs: train accuracy {acc:.3}, train IoU {iou:.3} in {:.0}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- ablations

#[test]
fn gaze_beats_random_gaze() {
    let e = experiment();
    let activities: std::collections::BTreeSet<_> = e.dataset.test.iter().map(|v| v.program.activity).collect();
    let full = mean_over_seeds(Variant::Full, |r| r.accuracy);
    let fixation = mean_over_seeds(Variant::RandomFixation, |r| r.accuracy);
    let scanpath = mean_over_seeds(Variant::RandomScanpath, |r| r.accuracy);
    let secs = seconds_over_seeds(Variant::Full)
        + seconds_over_seeds(Variant::RandomFixation)
        + seconds_over_seeds(Variant::RandomScanpath);
    let pass = e.dataset.test.len() >= 100
        && activities.len() >= 6
        && full - fixation >= 0.10
        && full - scanpath >= 0.10
        && secs < 900.0;
    report(
        "gaze vs random gaze",
        pass,
        format!(
            "accuracy full {full:.3}, random_fixation {fixation:.3}, random_scanpath {scanpath:.3} \
             ({} test videos, {} activities, {secs:.0}s)",
            e.dataset.test.len(),
            activities.len()
        ),
    );
    assert!(pass);
}

#[test]
fn hierarchical_conditioning_trend() {
    let lev = |v| mean_over_seeds(v, |r: &MetricsReport| r.levenshtein);
    let (hier, flat, none) = (lev(Variant::Full), lev(Variant::FlatCotrain), lev(Variant::NoActivityHead));
    let pass = hier <= flat + 0.02 && flat <= none + 0.02;
    report(
        "conditioning trend",
        pass,
        format!("Levenshtein hierarchical {hier:.3}, flat_cotrain {flat:.3}, no_activity_head {none:.3}"),
    );
    assert!(pass);
}

#[test]
fn semantic_edges_help() {
    let full = mean_over_seeds(Variant::Full, |r| r.levenshtein);
    let visual = mean_over_seeds(Variant::VisualOnlyEdges, |r| r.levenshtein);
    let pass = full <= visual + 0.02;
    report(
        "semantic edges",
        pass,
        format!("Levenshtein full {full:.3}, visual_only_edges {visual:.3}"),
    );
    assert!(pass);
}

#[test]
fn more_input_more_overlap() {
    let pairs: Vec<(f64, f64)> = SEEDS
        .iter()
        .map(|&s| {
            let t = run(Variant::Full, s);
            (t.at(0.5).iou, t.at(0.9).iou)
        })
        .collect();
    let pass = pairs.iter().all(|(half, most)| most >= half);
    let detail: Vec<String> = pairs.iter().map(|(h, m)| format!("{h:.3} -> {m:.3}")).collect();
    report("IoU 50% -> 90% input", pass, format!("per seed {}", detail.join(", ")));
    assert!(pass);
}

#[test]
fn runs_are_byte_identical() {
    let first = run(Variant::Full, 0);
    let again = exclusive(|| train_and_evaluate(Variant::Full, 0));
    let same_ckpt = first.checkpoint == again.checkpoint;
    let same_csv = reports_csv(&first.reports) == reports_csv(&again.reports);
    let same_predictions = {
        let e = experiment();
        let ev = Evaluator::new(&e.dataset, &e.config, e.data.geometry).unwrap();
        let samples = ev.samples(&e.dataset.test[..5], &[0.7; 5], Variant::Full, 9).unwrap();
        samples
            .iter()
            .all(|s| first.model.predict(&s.graph).unwrap() == again.model.predict(&s.graph).unwrap())
    };
    let pass = same_ckpt && same_csv && same_predictions;
    report(
        "determinism",
        pass,
        format!(
            "checkpoint {} ({} bytes), metrics CSV {}",
            if same_ckpt { "identical" } else { "differs" },
            first.checkpoint.len(),
            if same_csv { "identical" } else { "differs" }
        ),
    );
    assert!(pass);
}
