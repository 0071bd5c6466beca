//! Metrics, the ablation harness and crop-size sweeps.

pub mod harness;
pub mod metrics;
pub mod pipeline;

pub use harness::{ablate, score, sweep_crop, sweep_csv, AblationRun, Evaluator, ExperimentConfig, RunSeeds, Scores, DEFAULT_CROP_SIZES};
pub use metrics::{action_iou, levenshtein, norm_levenshtein, reports_csv, MetricsReport, REPORT_CSV_HEADER};
pub use pipeline::{build_samples, frame_embeddings, variant_tracks, video_graph, Encoders, PipelineConfig, Variant};
