//! Visual encoder, semantic label encoder and object detector.
//!
//! The synthetic implementations work on an abstract [`Scene`] that
//! reports which object lies under a pixel instead of exposing RGB data.
//! [`PrecomputedTable`] replaces them with embeddings and labels read from
//! a file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::vocab::{ObjectLabel, Vocabulary};

pub const DEFAULT_VISUAL_DIM: usize = 512;
pub const DEFAULT_SEMANTIC_DIM: usize = 300;
pub const DEFAULT_DETECTOR_ACCURACY: f64 = 0.72;

/// What a frame shows, queried per pixel.
pub trait Scene {
    fn width(&self) -> f64;
    fn height(&self) -> f64;
    fn object_at(&self, frame: usize, x: f64, y: f64) -> ObjectLabel;
    /// Objects in view with their on-screen pixel areas.
    fn visible_objects(&self, frame: usize) -> Vec<(ObjectLabel, f64)>;
}

/// Square crop window around a gaze point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    pub frame: usize,
    pub center: (f64, f64),
    pub half_size: f64,
}

impl PatchSpec {
    pub fn intersects(&self, width: f64, height: f64) -> bool {
        let (cx, cy) = self.center;
        let b = self.half_size;
        cx + b >= 0.0 && cx - b < width && cy + b >= 0.0 && cy - b < height
    }

    fn check(&self, scene: &dyn Scene) -> Result<()> {
        if self.half_size.is_nan() || self.half_size <= 0.0 {
            return Err(Error::Bounds(format!("half size {} must be positive", self.half_size)));
        }
        if !self.intersects(scene.width(), scene.height()) {
            return Err(Error::Bounds(format!(
                "patch at ({:.1}, {:.1}) with half size {} misses the {}x{} frame",
                self.center.0,
                self.center.1,
                self.half_size,
                scene.width(),
                scene.height()
            )));
        }
        Ok(())
    }

    /// The pixel used to decide which object is fixated: the gaze point,
    /// clipped into the frame.
    pub fn fixated_pixel(&self, width: f64, height: f64) -> (f64, f64) {
        (
            self.center.0.clamp(0.0, width - 1.0),
            self.center.1.clamp(0.0, height - 1.0),
        )
    }
}

/// Unit-norm node feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualEmbedding(pub Vec<f64>);

/// Unit-norm label embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEmbedding(pub Vec<f64>);

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

pub fn random_unit(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return normalize(v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualMix {
    pub object: f64,
    pub cell: f64,
    pub noise: f64,
}

impl Default for VisualMix {
    fn default() -> Self {
        VisualMix {
            object: 1.0,
            cell: 0.5,
            noise: 0.1,
        }
    }
}

/// `l2norm(α·basis(object) + β·basis(grid cell) + γ·noise)`.
#[derive(Debug, Clone)]
pub struct SyntheticVisualEncoder {
    dim: usize,
    mix: VisualMix,
    grid: (usize, usize),
    object_basis: Vec<Vec<f64>>,
    cell_basis: Vec<Vec<f64>>,
}

impl SyntheticVisualEncoder {
    pub fn new(dim: usize, vocab_size: usize, mix: VisualMix, basis_seed: u64) -> Self {
        let grid = (4, 4);
        let mut rng = seed::rng_for(basis_seed, "visual-object-basis", 0);
        let object_basis = (0..vocab_size).map(|_| random_unit(dim, &mut rng)).collect();
        let mut rng = seed::rng_for(basis_seed, "visual-cell-basis", 0);
        let cell_basis = (0..grid.0 * grid.1)
            .map(|_| random_unit(dim, &mut rng))
            .collect();
        SyntheticVisualEncoder {
            dim,
            mix,
            grid,
            object_basis,
            cell_basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mix(&self) -> VisualMix {
        self.mix
    }

    fn cell(&self, x: f64, y: f64, width: f64, height: f64) -> usize {
        let (cols, rows) = self.grid;
        let c = ((x / width) * cols as f64).floor().clamp(0.0, cols as f64 - 1.0) as usize;
        let r = ((y / height) * rows as f64).floor().clamp(0.0, rows as f64 - 1.0) as usize;
        r * cols + c
    }

    fn compose(&self, object: &[f64], cell: usize, noise_seed: u64) -> VisualEmbedding {
        let mut rng = seed::rng(noise_seed);
        let noise = random_unit(self.dim, &mut rng);
        let v = (0..self.dim)
            .map(|i| {
                self.mix.object * object[i] + self.mix.cell * self.cell_basis[cell][i] + self.mix.noise * noise[i]
            })
            .collect();
        VisualEmbedding(normalize(v))
    }

    pub fn encode_patch(&self, scene: &dyn Scene, patch: &PatchSpec, noise_seed: u64) -> Result<VisualEmbedding> {
        patch.check(scene)?;
        let (w, h) = (scene.width(), scene.height());
        let (px, py) = patch.fixated_pixel(w, h);
        let obj = scene.object_at(patch.frame, px, py);
        let basis = self.object_basis.get(obj.0).ok_or_else(|| Error::Vocabulary {
            kind: "object",
            name: obj.to_string(),
        })?;
        Ok(self.compose(basis, self.cell(px, py, w, h), noise_seed))
    }

    /// Uncropped frame: area-weighted mix of every visible object, centred
    /// on the middle grid cell.
    pub fn encode_full_frame(&self, scene: &dyn Scene, frame: usize, noise_seed: u64) -> VisualEmbedding {
        let visible = scene.visible_objects(frame);
        let total: f64 = visible.iter().map(|(_, a)| a).sum::<f64>().max(f64::MIN_POSITIVE);
        let mut mixed = vec![0.0; self.dim];
        for (obj, area) in visible {
            if let Some(b) = self.object_basis.get(obj.0) {
                for (m, v) in mixed.iter_mut().zip(b) {
                    *m += area / total * v;
                }
            }
        }
        let (w, h) = (scene.width(), scene.height());
        self.compose(&mixed, self.cell(w / 2.0, h / 2.0, w, h), noise_seed)
    }
}

/// Seeded random unit vector per label name.
#[derive(Debug, Clone)]
pub struct SemanticEncoder {
    dim: usize,
    table: Vec<SemanticEmbedding>,
}

impl SemanticEncoder {
    pub fn new(vocab: &Vocabulary, dim: usize) -> Self {
        let table = vocab
            .names()
            .iter()
            .map(|name| {
                let mut rng = seed::rng_for(0, &format!("label:{name}"), dim as u64);
                SemanticEmbedding(random_unit(dim, &mut rng))
            })
            .collect();
        SemanticEncoder { dim, table }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode_label(&self, label: ObjectLabel) -> Result<&SemanticEmbedding> {
        self.table.get(label.0).ok_or_else(|| Error::Vocabulary {
            kind: "object",
            name: label.to_string(),
        })
    }

    pub fn encode_name(&self, vocab: &Vocabulary, name: &str) -> Result<&SemanticEmbedding> {
        self.encode_label(vocab.label(name)?)
    }
}

/// Noisy stand-in for a trained patch classifier: right with probability
/// `accuracy`, otherwise a uniformly chosen wrong label.
#[derive(Debug, Clone, Copy)]
pub struct ObjectDetector {
    pub accuracy: f64,
    pub vocab_size: usize,
}

impl ObjectDetector {
    pub fn new(accuracy: f64, vocab_size: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::Config(format!("detector accuracy {accuracy} outside [0, 1]")));
        }
        Ok(ObjectDetector { accuracy, vocab_size })
    }

    pub fn detect(&self, scene: &dyn Scene, patch: &PatchSpec, seed: u64) -> ObjectLabel {
        let (px, py) = patch.fixated_pixel(scene.width(), scene.height());
        let truth = scene.object_at(patch.frame, px, py);
        let mut rng = seed::rng(seed);
        if self.vocab_size < 2 || rng.random::<f64>() < self.accuracy {
            return truth;
        }
        let k = rng.random_range(0..self.vocab_size - 1);
        ObjectLabel(if k >= truth.0 { k + 1 } else { k })
    }
}

/// Embeddings and labels keyed by (video id, frame index), read from file.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedTable {
    pub dim: usize,
    pub vocab: Vocabulary,
    entries: BTreeMap<(String, usize), (VisualEmbedding, ObjectLabel)>,
}

pub const EMBEDDING_FILE_MAGIC: &str = "gazegraph-embeddings 1";

impl PrecomputedTable {
    pub fn new(dim: usize, vocab: Vocabulary) -> Self {
        PrecomputedTable {
            dim,
            vocab,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, video: &str, frame: usize, embedding: VisualEmbedding, label: ObjectLabel) -> Result<()> {
        if embedding.0.len() != self.dim {
            return Err(Error::format(
                format!("{video}/{frame}"),
                format!("embedding has {} dims, table has {}", embedding.0.len(), self.dim),
            ));
        }
        if !self.vocab.contains(label) {
            return Err(Error::Vocabulary {
                kind: "object",
                name: label.to_string(),
            });
        }
        self.entries.insert((video.to_string(), frame), (embedding, label));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, video: &str, frame: usize) -> Result<&(VisualEmbedding, ObjectLabel)> {
        self.entries
            .get(&(video.to_string(), frame))
            .ok_or_else(|| Error::MissingKey(format!("{video}/{frame}")))
    }

    /// Fails on the first (video, frame) in `0..frames` without an entry.
    pub fn check_complete(&self, video: &str, frames: usize) -> Result<()> {
        (0..frames).try_for_each(|f| self.get(video, f).map(|_| ()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{EMBEDDING_FILE_MAGIC}\ndim {}\nvocab", self.dim);
        for n in self.vocab.names() {
            out.push(' ');
            out.push_str(n);
        }
        out.push('\n');
        for ((video, frame), (emb, label)) in &self.entries {
            let _ = write!(out, "{video} {frame} {}", self.vocab.name(*label));
            for v in &emb.0 {
                let _ = write!(out, " {v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, expected_dim: Option<usize>) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let loc = |n: usize| format!("embedding file line {}", n + 1);
        match lines.next() {
            Some((_, l)) if l.trim() == EMBEDDING_FILE_MAGIC => {}
            _ => return Err(Error::format("embedding file line 1", "missing header")),
        }
        let (n, dim_line) = lines
            .next()
            .ok_or_else(|| Error::format("embedding file", "missing dim line"))?;
        let dim: usize = dim_line
            .strip_prefix("dim ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::format(loc(n), "expected `dim <n>`"))?;
        if let Some(want) = expected_dim {
            if want != dim {
                return Err(Error::format(loc(n), format!("file has {dim} dims, configuration expects {want}")));
            }
        }
        let (n, vocab_line) = lines
            .next()
            .ok_or_else(|| Error::format("embedding file", "missing vocab line"))?;
        let names: Vec<&str> = vocab_line
            .strip_prefix("vocab")
            .ok_or_else(|| Error::format(loc(n), "expected `vocab <names...>`"))?
            .split_whitespace()
            .collect();
        let mut table = PrecomputedTable::new(dim, Vocabulary::new(&names)?);
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            let video = fields.next().ok_or_else(|| Error::format(loc(n), "missing video id"))?;
            let frame: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::format(loc(n), "bad frame index"))?;
            let label = table.vocab.label(fields.next().unwrap_or(""))?;
            let values: Vec<f64> = fields
                .map(|v| v.parse().map_err(|_| Error::format(loc(n), format!("bad value `{v}`"))))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::format(
                    format!("{video}/{frame}"),
                    format!("{} values, expected {dim}", values.len()),
                ));
            }
            table.insert(video, frame, VisualEmbedding(values), label)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, expected_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Left half is object 1, right half object 2, frame 1000×1000.
    struct Halves;

    impl Scene for Halves {
        fn width(&self) -> f64 {
            1000.0
        }
        fn height(&self) -> f64 {
            1000.0
        }
        fn object_at(&self, _frame: usize, x: f64, _y: f64) -> ObjectLabel {
            ObjectLabel(if x < 500.0 { 1 } else { 2 })
        }
        fn visible_objects(&self, _frame: usize) -> Vec<(ObjectLabel, f64)> {
            vec![(ObjectLabel(1), 5e5), (ObjectLabel(2), 5e5)]
        }
    }

    fn patch(x: f64, y: f64) -> PatchSpec {
        PatchSpec {
            frame: 0,
            center: (x, y),
            half_size: 75.0,
        }
    }

    #[test]
    fn visual_encoding_is_deterministic_and_unit() {
        let enc = SyntheticVisualEncoder::new(64, 38, VisualMix::default(), 1);
        let a = enc.encode_patch(&Halves, &patch(100.0, 100.0), 5).unwrap();
        let b = enc.encode_patch(&Halves, &patch(100.0, 100.0), 5).unwrap();
        assert_eq!(a, b);
        assert!((cosine(&a.0, &b.0) - 1.0).abs() < 1e-12);
        let norm: f64 = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn same_object_and_cell_stays_above_merge_threshold() {
        // Expected cosine ≈ (α² + β²) / (α² + β² + γ²) = 1.25 / 1.26 ≈ 0.992.
        let enc = SyntheticVisualEncoder::new(512, 38, VisualMix::default(), 3);
        for s in 0..50 {
            let a = enc.encode_patch(&Halves, &patch(100.0, 100.0), s).unwrap();
            let b = enc.encode_patch(&Halves, &patch(110.0, 120.0), s + 1000).unwrap();
            let c = cosine(&a.0, &b.0);
            assert!(c > 0.9, "{c}");
            assert!((c - 1.25 / 1.26).abs() < 0.02, "{c}");
        }
    }

    #[test]
    fn distinct_objects_in_distant_cells_rarely_merge() {
        // Monte Carlo over fresh basis draws.
        let draws = 10_000;
        let mut below = 0;
        for s in 0..draws {
            let enc = SyntheticVisualEncoder::new(512, 3, VisualMix::default(), s);
            let a = enc.encode_patch(&Halves, &patch(10.0, 10.0), 1).unwrap();
            let b = enc.encode_patch(&Halves, &patch(990.0, 990.0), 2).unwrap();
            if cosine(&a.0, &b.0) < 0.9 {
                below += 1;
            }
        }
        assert!(below as f64 / draws as f64 > 0.99);
    }

    #[test]
    fn patch_outside_frame_is_a_bounds_error() {
        let enc = SyntheticVisualEncoder::new(8, 38, VisualMix::default(), 1);
        assert!(matches!(
            enc.encode_patch(&Halves, &patch(-200.0, 10.0), 0),
            Err(Error::Bounds(_))
        ));
        // partially overlapping is fine
        assert!(enc.encode_patch(&Halves, &patch(-50.0, 10.0), 0).is_ok());
    }

    #[test]
    fn label_embeddings() {
        let vocab = Vocabulary::household();
        let enc = SemanticEncoder::new(&vocab, 300);
        let f1 = enc.encode_name(&vocab, "fridge").unwrap().clone();
        let f2 = enc.encode_name(&vocab, "fridge").unwrap().clone();
        assert_eq!(f1, f2);
        let book = enc.encode_name(&vocab, "book").unwrap();
        assert!(cosine(&f1.0, &book.0) < 0.5);
        for a in vocab.labels() {
            for b in vocab.labels().filter(|b| b.0 > a.0) {
                assert_ne!(enc.encode_label(a).unwrap(), enc.encode_label(b).unwrap());
            }
        }
        assert!(matches!(
            enc.encode_name(&vocab, "spaceship"),
            Err(Error::Vocabulary { .. })
        ));
    }

    #[test]
    fn random_label_pairs_concentrate_below_half() {
        // |cos| of independent unit vectors in d=300 has std ≈ 1/√300 ≈ 0.058;
        // 0.5 is more than 8 standard deviations out.
        let mut rng = seed::rng(42);
        let trials = 5_000;
        let above = (0..trials)
            .filter(|_| cosine(&random_unit(300, &mut rng), &random_unit(300, &mut rng)) >= 0.5)
            .count();
        assert!((above as f64) / (trials as f64) < 0.001);
    }

    #[test]
    fn detector_accuracy_levels() {
        let sure = ObjectDetector::new(1.0, 38).unwrap();
        let never = ObjectDetector::new(0.0, 38).unwrap();
        let noisy = ObjectDetector::new(0.72, 38).unwrap();
        let p = patch(100.0, 100.0);
        let mut hits = 0;
        for s in 0..10_000u64 {
            assert_eq!(sure.detect(&Halves, &p, s), ObjectLabel(1));
            let wrong = never.detect(&Halves, &p, s);
            assert_ne!(wrong, ObjectLabel(1));
            assert!(wrong.0 < 38);
            if noisy.detect(&Halves, &p, s) == ObjectLabel(1) {
                hits += 1;
            }
        }
        let acc = hits as f64 / 10_000.0;
        assert!((acc - 0.72).abs() < 0.02, "{acc}");
        assert!(ObjectDetector::new(1.5, 38).is_err());
    }

    #[test]
    fn precomputed_round_trip_and_errors() {
        let vocab = Vocabulary::new(&["wall", "cup", "fridge"]).unwrap();
        let mut table = PrecomputedTable::new(3, vocab);
        table
            .insert("v0", 0, VisualEmbedding(vec![1.0, 0.0, 0.0]), ObjectLabel(1))
            .unwrap();
        table
            .insert("v0", 2, VisualEmbedding(vec![0.0, 0.6, 0.8]), ObjectLabel(2))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        table.save(&path).unwrap();
        let back = PrecomputedTable::load(&path, Some(3)).unwrap();
        assert_eq!(back, table);

        assert!(matches!(
            PrecomputedTable::load(&path, Some(4)),
            Err(Error::Format { .. })
        ));
        let err = back.check_complete("v0", 3).unwrap_err();
        assert!(err.to_string().contains("v0/1"), "{err}");

        let text = table.to_text().replace(" 8e-1", "");
        let err = PrecomputedTable::parse(&text, None).unwrap_err();
        assert!(err.to_string().contains("v0/2"), "{err}");
    }
}
