//! Video-to-graph construction.
//!
//! Frames are visited in order. Each frame embedding is compared by cosine
//! similarity against every existing node feature; below the threshold a
//! new node (and an edge from the current node) is created, otherwise the
//! frame joins the most similar node and, if that node is not the current
//! one, an edge to it is added. Edge attributes concatenate the label
//! embeddings of the two endpoint nodes.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::encoders::{cosine, ObjectDetector, PatchSpec, Scene, SemanticEncoder, SyntheticVisualEncoder, VisualEmbedding};
use crate::error::{Error, Result};
use crate::gaze::FrameFixationTrack;
use crate::seed;
use crate::vocab::{ObjectLabel, Vocabulary};

pub const DEFAULT_CROP_HALF_SIZE: f64 = 75.0;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub feature: VisualEmbedding,
    pub fixated_object: ObjectLabel,
    /// Sorted, zero-based frame indices.
    pub member_frames: Vec<usize>,
    pub creation_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub attr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityGraph {
    pub video_id: String,
    pub frame_count: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// Node grouping produced by the similarity recurrence, before features
/// and labels are attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameGrouping {
    pub members: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

/// Runs the node-merging recurrence over frame embeddings. Node features
/// are the embedding of the frame that created the node; ties in the
/// similarity argmax go to the lowest node index.
pub fn group_frames(embeddings: &[Vec<f64>], threshold: f64) -> FrameGrouping {
    let mut grouping = FrameGrouping {
        members: Vec::new(),
        edges: Vec::new(),
    };
    let Some(first) = embeddings.first() else {
        return grouping;
    };
    let mut features: Vec<&[f64]> = vec![first];
    grouping.members.push(vec![0]);
    let mut seen = HashSet::new();
    let mut current = 0;
    for (t, v) in embeddings.iter().enumerate().skip(1) {
        let (best, sim) = features
            .iter()
            .enumerate()
            .map(|(i, f)| (i, cosine(f, v)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
        let target = if sim < threshold {
            features.push(v);
            grouping.members.push(vec![t]);
            features.len() - 1
        } else {
            grouping.members[best].push(t);
            best
        };
        if target != current {
            if seen.insert((current, target)) {
                grouping.edges.push((current, target));
            }
            current = target;
        }
    }
    grouping
}

/// Per-frame inputs to graph construction.
pub trait FrameSource {
    fn video_id(&self) -> &str;
    fn frame_count(&self) -> usize;
    fn embedding(&self, frame: usize) -> Result<VisualEmbedding>;
    /// Called once per node, on the frame that creates it.
    fn fixated_object(&self, frame: usize) -> Result<ObjectLabel>;
}

/// Builds the graph from the first `k` frames of `source`.
pub fn build_graph(source: &dyn FrameSource, k: usize, threshold: f64, semantic: &SemanticEncoder) -> Result<ActivityGraph> {
    if k == 0 {
        return Err(Error::Contract("graph needs at least one frame".into()));
    }
    if k > source.frame_count() {
        return Err(Error::Contract(format!(
            "requested {k} frames, source has {}",
            source.frame_count()
        )));
    }
    let embeddings: Vec<Vec<f64>> = (0..k)
        .map(|t| source.embedding(t).map(|e| e.0))
        .collect::<Result<_>>()?;
    let grouping = group_frames(&embeddings, threshold);
    let mut nodes = Vec::with_capacity(grouping.members.len());
    for members in grouping.members {
        let creation = members[0];
        nodes.push(Node {
            feature: VisualEmbedding(embeddings[creation].clone()),
            fixated_object: source.fixated_object(creation)?,
            member_frames: members,
            creation_frame: creation,
        });
    }
    let mut graph = ActivityGraph {
        video_id: source.video_id().to_string(),
        frame_count: k,
        nodes,
        edges: Vec::new(),
    };
    for (src, dst) in grouping.edges {
        let attr = edge_attr(&graph, src, dst, semantic)?;
        graph.edges.push(Edge { src, dst, attr });
    }
    Ok(graph)
}

fn edge_attr(graph: &ActivityGraph, src: usize, dst: usize, semantic: &SemanticEncoder) -> Result<Vec<f64>> {
    let mut attr = semantic.encode_label(graph.nodes[src].fixated_object)?.0.clone();
    attr.extend_from_slice(&semantic.encode_label(graph.nodes[dst].fixated_object)?.0);
    Ok(attr)
}

/// Adds one self-edge per node that lacks one.
pub fn add_self_loops(graph: &mut ActivityGraph, semantic: &SemanticEncoder) -> Result<()> {
    let have: HashSet<usize> = graph.edges.iter().filter(|e| e.src == e.dst).map(|e| e.src).collect();
    for i in 0..graph.nodes.len() {
        if !have.contains(&i) {
            let attr = edge_attr(graph, i, i, semantic)?;
            graph.edges.push(Edge { src: i, dst: i, attr });
        }
    }
    Ok(())
}

/// Replaces every edge attribute with zeros of the same width.
pub fn zero_edge_attrs(graph: &mut ActivityGraph) {
    for e in &mut graph.edges {
        e.attr.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Replaces node labels with uniform draws and recomputes edge attributes.
pub fn randomize_node_labels(graph: &mut ActivityGraph, vocab_size: usize, semantic: &SemanticEncoder, seed: u64) -> Result<()> {
    use rand::Rng as _;
    let mut rng = seed::rng(seed);
    for node in &mut graph.nodes {
        node.fixated_object = ObjectLabel(rng.random_range(0..vocab_size));
    }
    for i in 0..graph.edges.len() {
        let (s, d) = (graph.edges[i].src, graph.edges[i].dst);
        graph.edges[i].attr = edge_attr(graph, s, d, semantic)?;
    }
    Ok(())
}

impl ActivityGraph {
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.frame_count];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.member_frames.is_empty() || n.member_frames[0] != n.creation_frame {
                return Err(Error::Contract(format!("node {i} has inconsistent members")));
            }
            if n.member_frames.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Contract(format!("node {i} members not sorted")));
            }
            for &f in &n.member_frames {
                if f >= self.frame_count || std::mem::replace(&mut seen[f], true) {
                    return Err(Error::Contract(format!("frame {f} assigned twice or out of range")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Contract("not every frame belongs to a node".into()));
        }
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                return Err(Error::Contract(format!("edge ({}, {}) has invalid endpoint", e.src, e.dst)));
            }
        }
        Ok(())
    }

    pub fn self_loop_count(&self) -> usize {
        self.edges.iter().filter(|e| e.src == e.dst).count()
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("gazegraph-graph 1\n");
        let _ = writeln!(out, "video {}", self.video_id);
        let _ = writeln!(out, "frames {}", self.frame_count);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let members: Vec<String> = n.member_frames.iter().map(|f| f.to_string()).collect();
            let _ = write!(out, "node {i} {} {}", vocab.name(n.fixated_object), members.join(","));
            for v in &n.feature.0 {
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = write!(out, "edge {} {}", e.src, e.dst);
            for v in &e.attr {
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let loc = |n: usize| format!("graph line {}", n + 1);
        let mut next = |want: &str| -> Result<(usize, String)> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| Error::format("graph", format!("unexpected end, wanted `{want}`")))?;
            match l.strip_prefix(want) {
                Some(rest) => Ok((n, rest.trim().to_string())),
                None => Err(Error::format(loc(n), format!("expected `{want}`"))),
            }
        };
        next("gazegraph-graph 1")?;
        let (_, video_id) = next("video")?;
        let count = |(n, s): (usize, String)| -> Result<usize> {
            s.parse().map_err(|_| Error::format(loc(n), "bad count"))
        };
        let frame_count = count(next("frames")?)?;
        let node_count = count(next("nodes")?)?;
        let floats = |n: usize, it: &mut dyn Iterator<Item = &str>| -> Result<Vec<f64>> {
            it.map(|v| v.parse().map_err(|_| Error::format(loc(n), format!("bad value `{v}`"))))
                .collect()
        };
        let mut nodes = Vec::with_capacity(node_count);
        for i in 0..node_count {
            let (n, rest) = next("node ")?;
            let mut f = rest.split_whitespace();
            if f.next() != Some(i.to_string().as_str()) {
                return Err(Error::format(loc(n), "node index out of sequence"));
            }
            let label = vocab.label(f.next().unwrap_or(""))?;
            let member_frames: Vec<usize> = f
                .next()
                .unwrap_or("")
                .split(',')
                .map(|m| m.parse().map_err(|_| Error::format(loc(n), "bad member frame")))
                .collect::<Result<_>>()?;
            let feature = floats(n, &mut f)?;
            nodes.push(Node {
                feature: VisualEmbedding(feature),
                fixated_object: label,
                creation_frame: member_frames[0],
                member_frames,
            });
        }
        let edge_count = count(next("edges")?)?;
        let mut edges = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let (n, rest) = next("edge ")?;
            let mut f = rest.split_whitespace();
            let mut idx = || -> Result<usize> {
                f.next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::format(loc(n), "bad edge endpoint"))
            };
            let (src, dst) = (idx()?, idx()?);
            let attr = floats(n, &mut f)?;
            edges.push(Edge { src, dst, attr });
        }
        let graph = ActivityGraph {
            video_id,
            frame_count,
            nodes,
            edges,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn to_dot(&self, vocab: &Vocabulary) -> String {
        let mut out = String::from("digraph activity {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", vocab.name(n.fixated_object));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -> n{};", e.src, e.dst);
        }
        out.push_str("}\n");
        out
    }

    pub fn save_text(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        std::fs::write(path, self.to_text(vocab)).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, vocab)
    }

    pub fn save_dot(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        std::fs::write(path, self.to_dot(vocab)).map_err(|e| Error::io(path, e))
    }
}

/// Counts of pairwise frame-embedding cosine similarities over `bins`
/// equal-width bins spanning [-1, 1]; a similarity of exactly 1 falls in
/// the top bin.
pub fn cosine_histogram(embeddings: &[Vec<f64>], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins.max(1)];
    let n = counts.len();
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            let c = cosine(&embeddings[i], &embeddings[j]).clamp(-1.0, 1.0);
            let b = (((c + 1.0) / 2.0) * n as f64).floor() as usize;
            counts[b.min(n - 1)] += 1;
        }
    }
    counts
}

/// Histogram CSV: `video,bin_lo,bin_hi,count`.
pub fn histogram_csv(per_video: &[(String, Vec<u64>)]) -> String {
    let mut out = String::from("video,bin_lo,bin_hi,count\n");
    for (video, counts) in per_video {
        let n = counts.len() as f64;
        for (b, c) in counts.iter().enumerate() {
            let lo = -1.0 + 2.0 * b as f64 / n;
            let hi = -1.0 + 2.0 * (b + 1) as f64 / n;
            let _ = writeln!(out, "{video},{lo},{hi},{c}");
        }
    }
    out
}

/// Frames cropped around a gaze track on a synthetic scene.
pub struct GazeCroppedFrames<'a> {
    pub video_id: &'a str,
    pub scene: &'a dyn Scene,
    pub track: &'a FrameFixationTrack,
    pub half_size: f64,
    pub visual: &'a SyntheticVisualEncoder,
    pub detector: &'a ObjectDetector,
    pub seed: u64,
}

impl<'a> GazeCroppedFrames<'a> {
    fn patch(&self, frame: usize) -> Result<PatchSpec> {
        let center = *self.track.points.get(frame).ok_or(Error::Index {
            what: "fixation track",
            index: frame,
            len: self.track.len(),
        })?;
        Ok(PatchSpec {
            frame,
            center,
            half_size: self.half_size,
        })
    }
}

impl FrameSource for GazeCroppedFrames<'_> {
    fn video_id(&self) -> &str {
        self.video_id
    }

    fn frame_count(&self) -> usize {
        self.track.len()
    }

    fn embedding(&self, frame: usize) -> Result<VisualEmbedding> {
        let patch = self.patch(frame)?;
        self.visual
            .encode_patch(self.scene, &patch, seed::derive(self.seed, "patch-noise", frame as u64))
    }

    fn fixated_object(&self, frame: usize) -> Result<ObjectLabel> {
        let patch = self.patch(frame)?;
        Ok(self
            .detector
            .detect(self.scene, &patch, seed::derive(self.seed, "detector", frame as u64)))
    }
}

/// Uncropped frames: one whole-frame embedding per frame; the detector
/// looks at the frame centre.
pub struct FullFrames<'a> {
    pub video_id: &'a str,
    pub scene: &'a dyn Scene,
    pub frame_count: usize,
    pub visual: &'a SyntheticVisualEncoder,
    pub detector: &'a ObjectDetector,
    pub seed: u64,
}

impl FrameSource for FullFrames<'_> {
    fn video_id(&self) -> &str {
        self.video_id
    }

    fn frame_count(&self) -> usize {
        self.frame_count
    }

    fn embedding(&self, frame: usize) -> Result<VisualEmbedding> {
        Ok(self
            .visual
            .encode_full_frame(self.scene, frame, seed::derive(self.seed, "patch-noise", frame as u64)))
    }

    fn fixated_object(&self, frame: usize) -> Result<ObjectLabel> {
        let (w, h) = (self.scene.width(), self.scene.height());
        let patch = PatchSpec {
            frame,
            center: (w / 2.0, h / 2.0),
            half_size: w.max(h),
        };
        Ok(self
            .detector
            .detect(self.scene, &patch, seed::derive(self.seed, "detector", frame as u64)))
    }
}

/// Frames looked up in a precomputed embedding table.
pub struct PrecomputedFrames<'a> {
    pub video_id: &'a str,
    pub table: &'a crate::encoders::PrecomputedTable,
    pub frame_count: usize,
}

impl FrameSource for PrecomputedFrames<'_> {
    fn video_id(&self) -> &str {
        self.video_id
    }

    fn frame_count(&self) -> usize {
        self.frame_count
    }

    fn embedding(&self, frame: usize) -> Result<VisualEmbedding> {
        Ok(self.table.get(self.video_id, frame)?.0.clone())
    }

    fn fixated_object(&self, frame: usize) -> Result<ObjectLabel> {
        Ok(self.table.get(self.video_id, frame)?.1)
    }
}

/// Graph from the first `k` frames of a gaze-cropped synthetic video.
/// The fixation track must cover exactly `k` frames.
#[allow(clippy::too_many_arguments)]
pub fn build_graph_from_track(
    video_id: &str,
    scene: &dyn Scene,
    track: &FrameFixationTrack,
    k: usize,
    half_size: f64,
    threshold: f64,
    visual: &SyntheticVisualEncoder,
    detector: &ObjectDetector,
    semantic: &SemanticEncoder,
    seed: u64,
) -> Result<ActivityGraph> {
    if track.len() != k {
        return Err(Error::Contract(format!(
            "fixation track has {} entries for {k} frames",
            track.len()
        )));
    }
    let source = GazeCroppedFrames {
        video_id,
        scene,
        track,
        half_size,
        visual,
        detector,
        seed,
    };
    build_graph(&source, k, threshold, semantic)
}
