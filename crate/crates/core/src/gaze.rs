//! Eye-tracker samples to per-frame fixations.
//!
//! Samples are classified with a velocity threshold (I-VT): angular
//! velocity between consecutive valid samples below the threshold marks a
//! fixation sample, runs of fixation samples lasting at least the minimum
//! duration become fixations, everything else is treated as saccade and
//! dropped.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_VELOCITY_THRESHOLD_DEG_S: f64 = 30.0;
pub const DEFAULT_MIN_FIXATION_MS: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub timestamp_ms: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(timestamp_ms: f64, x: f64, y: f64) -> Self {
        GazeSample {
            timestamp_ms,
            x,
            y,
            valid: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry {
    pub width_px: f64,
    pub height_px: f64,
    pub physical_width_mm: f64,
    pub viewing_distance_mm: f64,
}

impl Default for ScreenGeometry {
    fn default() -> Self {
        ScreenGeometry {
            width_px: 1920.0,
            height_px: 1080.0,
            physical_width_mm: 530.0,
            viewing_distance_mm: 600.0,
        }
    }
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.width_px,
            self.height_px,
            self.physical_width_mm,
            self.viewing_distance_mm,
        ];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("screen geometry must be positive: {self:?}")))
        }
    }

    pub fn mm_per_px(&self) -> f64 {
        self.physical_width_mm / self.width_px
    }

    /// Visual angle in degrees subtended by a pixel distance.
    pub fn px_to_degrees(&self, px: f64) -> f64 {
        (px * self.mm_per_px() / self.viewing_distance_mm)
            .atan()
            .to_degrees()
    }

    /// Pixel radius subtending `degrees` at the viewing distance.
    pub fn degrees_to_px(&self, degrees: f64) -> f64 {
        degrees.to_radians().tan() * self.viewing_distance_mm / self.mm_per_px()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..self.width_px).contains(&x) && (0.0..self.height_px).contains(&y)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width_px / 2.0, self.height_px / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub start_ms: f64,
    pub end_ms: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Fixation {
    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvtConfig {
    pub velocity_threshold_deg_s: f64,
    pub min_duration_ms: f64,
}

impl Default for IvtConfig {
    fn default() -> Self {
        IvtConfig {
            velocity_threshold_deg_s: DEFAULT_VELOCITY_THRESHOLD_DEG_S,
            min_duration_ms: DEFAULT_MIN_FIXATION_MS,
        }
    }
}

/// One gaze point per video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFixationTrack {
    pub points: Vec<(f64, f64)>,
}

impl FrameFixationTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `frames` points (prefix of the video).
    pub fn prefix(&self, frames: usize) -> FrameFixationTrack {
        FrameFixationTrack {
            points: self.points[..frames.min(self.points.len())].to_vec(),
        }
    }

    /// Stretches or clips to exactly `frames` entries by proportional
    /// nearest-index lookup.
    pub fn resampled(&self, frames: usize) -> FrameFixationTrack {
        let n = self.points.len();
        if n == 0 {
            return FrameFixationTrack { points: Vec::new() };
        }
        if frames <= n {
            return self.prefix(frames);
        }
        let points = (0..frames).map(|i| self.points[i * n / frames]).collect();
        FrameFixationTrack { points }
    }
}

fn check_order(samples: &[GazeSample]) -> Result<()> {
    for (i, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp_ms <= pair[0].timestamp_ms {
            return Err(Error::Ordering { index: i + 1 });
        }
    }
    Ok(())
}

/// Per-sample angular velocity in deg/s over the valid samples. The first
/// valid sample borrows the velocity of the second.
fn velocities(valid: &[&GazeSample], geometry: &ScreenGeometry) -> Vec<f64> {
    let mut out = Vec::with_capacity(valid.len());
    for i in 1..valid.len() {
        let (a, b) = (valid[i - 1], valid[i]);
        let dist = (b.x - a.x).hypot(b.y - a.y);
        let dt_s = (b.timestamp_ms - a.timestamp_ms) / 1000.0;
        out.push(geometry.px_to_degrees(dist) / dt_s);
    }
    if let Some(&first) = out.first() {
        out.insert(0, first);
    }
    out
}

/// Marks each sample as a fixation sample (`true`) or not. Invalid
/// samples are never fixation samples.
pub fn classify_samples(
    samples: &[GazeSample],
    velocity_threshold_deg_s: f64,
    geometry: &ScreenGeometry,
) -> Result<Vec<bool>> {
    check_order(samples)?;
    let valid_idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].valid).collect();
    if valid_idx.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "{} valid gaze samples, need at least 2",
            valid_idx.len()
        )));
    }
    let valid: Vec<&GazeSample> = valid_idx.iter().map(|&i| &samples[i]).collect();
    let vel = velocities(&valid, geometry);
    let mut labels = vec![false; samples.len()];
    for (k, &i) in valid_idx.iter().enumerate() {
        labels[i] = vel[k] < velocity_threshold_deg_s;
    }
    Ok(labels)
}

/// Velocity-threshold fixation identification.
pub fn ivt_filter(
    samples: &[GazeSample],
    config: &IvtConfig,
    geometry: &ScreenGeometry,
) -> Result<Vec<Fixation>> {
    geometry.validate()?;
    let labels = classify_samples(samples, config.velocity_threshold_deg_s, geometry)?;
    let mut fixations = Vec::new();
    let mut run: Vec<&GazeSample> = Vec::new();
    let mut flush = |run: &mut Vec<&GazeSample>| {
        if let (Some(first), Some(last)) = (run.first(), run.last()) {
            if last.timestamp_ms - first.timestamp_ms >= config.min_duration_ms {
                let n = run.len() as f64;
                let cx = run.iter().map(|s| s.x).sum::<f64>() / n;
                let cy = run.iter().map(|s| s.y).sum::<f64>() / n;
                fixations.push(Fixation {
                    start_ms: first.timestamp_ms,
                    end_ms: last.timestamp_ms,
                    cx: cx.clamp(0.0, geometry.width_px - 1.0),
                    cy: cy.clamp(0.0, geometry.height_px - 1.0),
                });
            }
        }
        run.clear();
    };
    for (s, &is_fix) in samples.iter().zip(&labels) {
        if is_fix {
            run.push(s);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    Ok(fixations)
}

/// Gives every frame exactly one gaze point. A frame takes the fixation
/// whose interval contains its timestamp; frames in saccade gaps keep the
/// most recent earlier fixation, leading frames take the first one.
pub fn assign_per_frame(fixations: &[Fixation], frame_times_ms: &[f64]) -> Result<FrameFixationTrack> {
    let first = fixations.first().ok_or(Error::Coverage)?;
    if frame_times_ms.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("frame times must be sorted".into()));
    }
    let mut points = Vec::with_capacity(frame_times_ms.len());
    let mut current = first;
    let mut next = 0;
    for &t in frame_times_ms {
        while next < fixations.len() && fixations[next].start_ms <= t {
            current = &fixations[next];
            next += 1;
        }
        points.push((current.cx, current.cy));
    }
    Ok(FrameFixationTrack { points })
}

/// Independent uniform gaze point per frame.
pub fn random_fixation_track(frame_count: usize, geometry: &ScreenGeometry, seed: u64) -> FrameFixationTrack {
    let mut rng = seed::rng(seed);
    let points = (0..frame_count)
        .map(|_| {
            (
                rng.random_range(0.0..geometry.width_px),
                rng.random_range(0.0..geometry.height_px),
            )
        })
        .collect();
    FrameFixationTrack { points }
}

/// Uniform random permutation without fixed points (rejection sampling).
pub fn derangement(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Contract(format!(
            "derangement needs at least 2 items, got {n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Gives each video the real gaze track of a different video, fitted to
/// its own frame count. `tracks[i]` belongs to a video with
/// `frame_counts[i]` frames.
pub fn random_scanpath_assignment(
    tracks: &[FrameFixationTrack],
    frame_counts: &[usize],
    seed: u64,
) -> Result<Vec<FrameFixationTrack>> {
    if tracks.len() != frame_counts.len() {
        return Err(Error::Contract("one frame count per track required".into()));
    }
    let perm = derangement(tracks.len(), seed)?;
    Ok(perm
        .iter()
        .zip(frame_counts)
        .map(|(&src, &frames)| tracks[src].resampled(frames))
        .collect())
}

pub const GAZE_LOG_MAGIC: &str = "# gazegraph-gaze 1";

pub fn write_gaze_log(path: &Path, samples: &[GazeSample], geometry: &ScreenGeometry) -> Result<()> {
    let mut out = String::new();
    out.push_str(GAZE_LOG_MAGIC);
    out.push('\n');
    let _ = writeln!(
        out,
        "# width_px={} height_px={} physical_width_mm={} viewing_distance_mm={}",
        geometry.width_px, geometry.height_px, geometry.physical_width_mm, geometry.viewing_distance_mm
    );
    out.push_str("timestamp_ms,x_px,y_px,valid\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.timestamp_ms, s.x, s.y, u8::from(s.valid));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_gaze_log(text: &str) -> Result<(ScreenGeometry, Vec<GazeSample>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == GAZE_LOG_MAGIC => {}
        _ => return Err(Error::format("gaze log line 1", "missing gaze log header")),
    }
    let mut geometry = ScreenGeometry::default();
    let mut samples = Vec::new();
    for (n, line) in lines {
        let loc = || format!("gaze log line {}", n + 1);
        let line = line.trim();
        if line.is_empty() || line.starts_with("timestamp_ms") {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for pair in rest.split_whitespace() {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| Error::format(loc(), format!("bad header field `{pair}`")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::format(loc(), format!("bad number for {k}")))?;
                match k {
                    "width_px" => geometry.width_px = v,
                    "height_px" => geometry.height_px = v,
                    "physical_width_mm" => geometry.physical_width_mm = v,
                    "viewing_distance_mm" => geometry.viewing_distance_mm = v,
                    _ => return Err(Error::format(loc(), format!("unknown header field `{k}`"))),
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(loc(), "expected 4 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::format(loc(), format!("bad number `{s}`")))
        };
        let valid = match fields[3].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::format(loc(), format!("bad valid flag `{other}`"))),
        };
        samples.push(GazeSample {
            timestamp_ms: num(fields[0])?,
            x: num(fields[1])?,
            y: num(fields[2])?,
            valid,
        });
    }
    geometry.validate()?;
    Ok((geometry, samples))
}

pub fn read_gaze_log(path: &Path) -> Result<(ScreenGeometry, Vec<GazeSample>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gaze_log(&text)
}
