//! `gazegraph` command-line runner.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage or configuration error,
//! 3 missing or unreadable file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gazegraph::config::{RunConfig, RunManifest};
use gazegraph::eval::{frame_embeddings, reports_csv, sweep_crop, sweep_csv, video_graph, Evaluator, Variant, DEFAULT_CROP_SIZES};
use gazegraph::graphbuild::{cosine_histogram, histogram_csv};
use gazegraph::model::Model;
use gazegraph::numerics::Checkpoint;
use gazegraph::world::{generate_dataset, Dataset, SyntheticVideo};
use gazegraph::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gazegraph", version, about = "Gaze-guided action anticipation experiments")]
struct Cli {
    /// `key = value` config file; GAZEGRAPH_<KEY> variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset: manifest, programs and raw gaze logs.
    GenData,
    /// Build activity graphs for every video at the configured fraction.
    BuildGraphs,
    /// Train a model and write its checkpoint and loss log.
    Train,
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Train and evaluate one ablation variant.
    Ablate {
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train and evaluate once per crop half-size.
    SweepCrop {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<f64>>,
    },
    /// Write one video's graph as structured text or DOT.
    ExportGraph {
        #[arg(long)]
        video: String,
        #[arg(long, value_enum, default_value_t = GraphFormat::Text)]
        format: GraphFormat,
    },
    /// Per-video histograms of pairwise frame-embedding cosine similarity.
    Hist {
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GraphFormat {
    Text,
    Dot,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::BuildGraphs => "build-graphs",
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Ablate { .. } => "ablate",
            Command::SweepCrop { .. } => "sweep-crop",
            Command::ExportGraph { .. } => "export-graph",
            Command::Hist { .. } => "hist",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply_env(std::env::vars())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    for kv in &cli.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set(k.trim(), v.trim())?;
    }
    match &cli.command {
        Command::Ablate { variant: Some(v) } => config.variant = v.parse()?,
        Command::Eval { fraction: Some(f), .. } => config.fraction = *f,
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

/// Writes artifacts under the output directory and records their hashes.
struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(command: &str, config: &RunConfig) -> Result<Self> {
        let out = config.out_dir.clone();
        create_dir(&out)?;
        Ok(Run {
            out,
            manifest: RunManifest::new(command, config),
        })
    }

    fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(relative);
        if let Some(parent) = path.parent() {
            create_dir(parent)?;
        }
        fs::write(&path, bytes).map_err(|source| Error::Io { path, source })?;
        self.manifest.record(relative, bytes);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let path = self.out.join(format!("{}.manifest", self.manifest.command));
        fs::write(&path, self.manifest.to_text()).map_err(|source| Error::Io { path, source })
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn dataset(config: &RunConfig) -> Result<Dataset> {
    generate_dataset(&config.dataset, config.dataset_seed())
}

fn find<'a>(ds: &'a Dataset, id: &str) -> Result<&'a SyntheticVideo> {
    ds.train
        .iter()
        .chain(&ds.test)
        .find(|v| v.id == id)
        .ok_or_else(|| Error::Config(format!("no video `{id}` in the dataset")))
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve(cli)?;
    let mut run = Run::new(cli.command.name(), &config)?;
    let ds = dataset(&config)?;
    let experiment = config.experiment();
    let geometry = config.dataset.geometry;
    match &cli.command {
        Command::GenData => {
            run.write("dataset/manifest.csv", ds.manifest().as_bytes())?;
            let vocab = gazegraph::vocab::Vocabulary::household();
            for v in ds.train.iter().chain(&ds.test) {
                run.write(&format!("dataset/programs/{}.prog", v.id), v.program.to_text(&vocab).as_bytes())?;
                let gaze_rel = format!("dataset/gaze/{}.csv", v.id);
                let gaze_path = run.out.join(&gaze_rel);
                create_dir(gaze_path.parent().expect("gaze path has a parent"))?;
                gazegraph::gaze::write_gaze_log(&gaze_path, &v.raw_gaze(&config.dataset), &geometry)?;
                let bytes = fs::read(&gaze_path).map_err(|source| Error::Io { path: gaze_path, source })?;
                run.manifest.record(&gaze_rel, &bytes);
            }
            log::info!("{} train and {} test videos", ds.train.len(), ds.test.len());
        }
        Command::BuildGraphs => {
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            for (split, videos) in [("train", &ds.train), ("test", &ds.test)] {
                let tracks = gazegraph::eval::variant_tracks(videos, config.variant, &geometry, config.seed)?;
                for (v, track) in videos.iter().zip(&tracks) {
                    let k = v.cutoff(config.fraction).max(1);
                    let g = video_graph(v, track.as_ref(), k, config.variant, &ev.encoders, &experiment.pipeline, config.seed)?;
                    run.write(&format!("graphs/{split}/{}.graph", v.id), g.to_text(&ev.encoders.vocab).as_bytes())?;
                }
            }
        }
        Command::Train => {
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            let (model, log) = ev.train(config.variant, config.seed)?;
            let ckpt = model.checkpoint(vec![
                ("seed".into(), config.seed.to_string()),
                ("variant".into(), config.variant.tag().into()),
            ]);
            run.write("model.ckpt", ckpt.to_text().as_bytes())?;
            run.write("train_log.csv", log.to_csv().as_bytes())?;
        }
        Command::Eval { checkpoint, .. } => {
            let path = checkpoint.clone().unwrap_or_else(|| config.out_dir.join("model.ckpt"));
            let model = Model::from_checkpoint(&Checkpoint::load(&path)?)?;
            let variant = match Checkpoint::load(&path)?.meta("variant") {
                Some(tag) => tag.parse::<Variant>()?,
                None => config.variant,
            };
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            let report = ev.evaluate(&model, variant, config.fraction, config.seed)?;
            run.write("metrics.csv", reports_csv(&[report]).as_bytes())?;
        }
        Command::Ablate { .. } => {
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            let (model, log) = ev.train(config.variant, config.seed)?;
            let report = ev.evaluate(&model, config.variant, config.fraction, config.seed)?;
            let tag = config.variant.tag();
            run.write(&format!("ablate_{tag}.csv"), reports_csv(&[report]).as_bytes())?;
            run.write(&format!("ablate_{tag}_log.csv"), log.to_csv().as_bytes())?;
        }
        Command::SweepCrop { sizes } => {
            let sizes = sizes.clone().unwrap_or_else(|| DEFAULT_CROP_SIZES.to_vec());
            let rows = sweep_crop(&ds, &sizes, &experiment, geometry, config.seed)?;
            run.write("sweep_crop.csv", sweep_csv(&rows).as_bytes())?;
        }
        Command::ExportGraph { video, format } => {
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            let v = find(&ds, video)?;
            let k = v.cutoff(config.fraction).max(1);
            let g = video_graph(v, Some(&v.track), k, Variant::Full, &ev.encoders, &experiment.pipeline, config.seed)?;
            let (ext, text) = match format {
                GraphFormat::Text => ("graph", g.to_text(&ev.encoders.vocab)),
                GraphFormat::Dot => ("dot", g.to_dot(&ev.encoders.vocab)),
            };
            run.write(&format!("graphs/{}.{ext}", v.id), text.as_bytes())?;
        }
        Command::Hist { bins } => {
            if *bins == 0 {
                return Err(Error::Config("bins must be positive".into()));
            }
            let ev = Evaluator::new(&ds, &experiment, geometry)?;
            let mut per_video = Vec::new();
            for v in ds.train.iter().chain(&ds.test) {
                let emb = frame_embeddings(v, &ev.encoders, &experiment.pipeline, config.seed)?;
                per_video.push((v.id.clone(), cosine_histogram(&emb, *bins)));
            }
            run.write("hist.csv", histogram_csv(&per_video).as_bytes())?;
        }
    }
    run.finish()
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Config(_) | Error::Format { .. } | Error::Vocabulary { .. } | Error::MissingKey(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: bad arguments"));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
