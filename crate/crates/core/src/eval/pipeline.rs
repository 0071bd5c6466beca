//! From synthetic videos to model inputs under each ablation variant.

use std::fmt;
use std::str::FromStr;

use crate::encoders::{ObjectDetector, SemanticEncoder, SyntheticVisualEncoder, VisualMix};
use crate::error::{Error, Result};
use crate::gaze::{random_fixation_track, random_scanpath_assignment, FrameFixationTrack, ScreenGeometry};
use crate::graphbuild::{
    add_self_loops, build_graph, randomize_node_labels, zero_edge_attrs, ActivityGraph, FrameSource, FullFrames, GazeCroppedFrames,
    DEFAULT_CROP_HALF_SIZE, DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::model::{Conditioning, GraphInput, TrainingSample};
use crate::seed;
use crate::vocab::Vocabulary;
use crate::world::{ActionVocab, SyntheticVideo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    NoFixation,
    RandomFixation,
    RandomScanpath,
    VisualOnlyEdges,
    RandomObjectEdges,
    NoActivityHead,
    FlatCotrain,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Full,
        Variant::NoFixation,
        Variant::RandomFixation,
        Variant::RandomScanpath,
        Variant::VisualOnlyEdges,
        Variant::RandomObjectEdges,
        Variant::NoActivityHead,
        Variant::FlatCotrain,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoFixation => "no_fixation",
            Variant::RandomFixation => "random_fixation",
            Variant::RandomScanpath => "random_scanpath",
            Variant::VisualOnlyEdges => "visual_only_edges",
            Variant::RandomObjectEdges => "random_object_edges",
            Variant::NoActivityHead => "no_activity_head",
            Variant::FlatCotrain => "flat_cotrain",
        }
    }

    pub fn conditioning(self) -> Conditioning {
        match self {
            Variant::NoActivityHead => Conditioning::ActionsOnly,
            Variant::FlatCotrain => Conditioning::Flat,
            _ => Conditioning::Hierarchical,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub crop_half_size: f64,
    pub threshold: f64,
    pub detector_accuracy: f64,
    pub visual_dim: usize,
    pub semantic_dim: usize,
    pub visual_mix: VisualMix,
    /// Fixes the synthetic visual encoder, like a pretrained network.
    pub encoder_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            crop_half_size: DEFAULT_CROP_HALF_SIZE,
            threshold: DEFAULT_SIMILARITY_THRESHOLD,
            detector_accuracy: crate::encoders::DEFAULT_DETECTOR_ACCURACY,
            visual_dim: crate::encoders::DEFAULT_VISUAL_DIM,
            semantic_dim: crate::encoders::DEFAULT_SEMANTIC_DIM,
            visual_mix: VisualMix::default(),
            encoder_seed: 0x656e_636f_6465,
        }
    }
}

pub struct Encoders {
    pub vocab: Vocabulary,
    pub visual: SyntheticVisualEncoder,
    pub semantic: SemanticEncoder,
    pub detector: ObjectDetector,
}

impl Encoders {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        let vocab = Vocabulary::household();
        Ok(Encoders {
            visual: SyntheticVisualEncoder::new(config.visual_dim, vocab.len(), config.visual_mix, config.encoder_seed),
            semantic: SemanticEncoder::new(&vocab, config.semantic_dim),
            detector: ObjectDetector::new(config.detector_accuracy, vocab.len())?,
            vocab,
        })
    }
}

/// Gaze tracks each video is cropped with under `variant`; `None` for
/// uncropped input.
pub fn variant_tracks(
    videos: &[SyntheticVideo],
    variant: Variant,
    geometry: &ScreenGeometry,
    seed: u64,
) -> Result<Vec<Option<FrameFixationTrack>>> {
    Ok(match variant {
        Variant::NoFixation => vec![None; videos.len()],
        Variant::RandomFixation => videos
            .iter()
            .map(|v| Some(random_fixation_track(v.frame_count(), geometry, seed::derive(seed, &v.id, 0))))
            .collect(),
        Variant::RandomScanpath => {
            let tracks: Vec<FrameFixationTrack> = videos.iter().map(|v| v.track.clone()).collect();
            let counts: Vec<usize> = videos.iter().map(SyntheticVideo::frame_count).collect();
            random_scanpath_assignment(&tracks, &counts, seed::derive(seed, "scanpath", 0))?
                .into_iter()
                .map(Some)
                .collect()
        }
        _ => videos.iter().map(|v| Some(v.track.clone())).collect(),
    })
}

/// Graph over the first `frames` frames of a video, with self-loops and
/// the variant's edge treatment applied.
pub fn video_graph(
    video: &SyntheticVideo,
    track: Option<&FrameFixationTrack>,
    frames: usize,
    variant: Variant,
    encoders: &Encoders,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ActivityGraph> {
    let frame_seed = seed::derive(seed, &video.id, 1);
    let mut graph = match track {
        Some(track) => {
            let prefix = track.prefix(frames);
            let source = GazeCroppedFrames {
                video_id: &video.id,
                scene: video,
                track: &prefix,
                half_size: config.crop_half_size,
                visual: &encoders.visual,
                detector: &encoders.detector,
                seed: frame_seed,
            };
            build_graph(&source, frames, config.threshold, &encoders.semantic)?
        }
        None => {
            let source = FullFrames {
                video_id: &video.id,
                scene: video,
                frame_count: video.frame_count(),
                visual: &encoders.visual,
                detector: &encoders.detector,
                seed: frame_seed,
            };
            build_graph(&source, frames, config.threshold, &encoders.semantic)?
        }
    };
    if variant == Variant::RandomObjectEdges {
        randomize_node_labels(
            &mut graph,
            encoders.vocab.len(),
            &encoders.semantic,
            seed::derive(seed, &video.id, 2),
        )?;
    }
    add_self_loops(&mut graph, &encoders.semantic)?;
    if variant == Variant::VisualOnlyEdges {
        zero_edge_attrs(&mut graph);
    }
    Ok(graph)
}

/// One model input per video, cut at that video's input fraction.
#[allow(clippy::too_many_arguments)]
pub fn build_samples(
    videos: &[SyntheticVideo],
    fractions: &[f64],
    variant: Variant,
    encoders: &Encoders,
    actions: &ActionVocab,
    config: &PipelineConfig,
    geometry: &ScreenGeometry,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    if fractions.len() != videos.len() {
        return Err(Error::Contract(format!(
            "{} fractions for {} videos",
            fractions.len(),
            videos.len()
        )));
    }
    let tracks = variant_tracks(videos, variant, geometry, seed::derive(seed, "tracks", 0))?;
    let mut out = Vec::with_capacity(videos.len());
    for ((video, track), &fraction) in videos.iter().zip(&tracks).zip(fractions) {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("input fraction {fraction} outside (0, 1]")));
        }
        let k = video.cutoff(fraction).max(1);
        let graph = video_graph(video, track.as_ref(), k, variant, encoders, config, seed)?;
        let (_, rest) = video.split_at_fraction(fraction);
        out.push(TrainingSample {
            id: format!("{}@{fraction}", video.id),
            graph: GraphInput::from_graph(&graph)?,
            activity: video.activity(),
            actions: actions.tokens(rest)?,
        });
    }
    Ok(out)
}

/// Gaze-cropped embedding of every frame of `video`.
pub fn frame_embeddings(video: &SyntheticVideo, encoders: &Encoders, config: &PipelineConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let source = GazeCroppedFrames {
        video_id: &video.id,
        scene: video,
        track: &video.track,
        half_size: config.crop_half_size,
        visual: &encoders.visual,
        detector: &encoders.detector,
        seed: seed::derive(seed, &video.id, 1),
    };
    (0..video.frame_count())
        .map(|f| source.embedding(f).map(|e| e.0))
        .collect()
}
