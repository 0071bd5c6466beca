//! Synthetic videos: room layouts, timed programs and eye-tracker traces.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::executor::WorldState;
use super::objects::{self, info, Room};
use super::program::{ActivityProgram, AtomicAction, Verb};
use super::templates::{detour_targets, TEMPLATES};
use crate::encoders::Scene;
use crate::error::{Error, Result};
use crate::gaze::{assign_per_frame, ivt_filter, FrameFixationTrack, GazeSample, IvtConfig, ScreenGeometry};
use crate::seed::{self, Rng};
use crate::vocab::ObjectLabel;

const GRID_COLS: usize = 6;
const GRID_ROWS: usize = 4;
const FURNITURE_W: f64 = 280.0;
const FURNITURE_H: f64 = 230.0;
const ITEM_H: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// Where every object of a room appears for one camera. Items sit in a
/// strip along the bottom of their home furniture and are drawn on top.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub room: Room,
    pub camera: usize,
    pub width: f64,
    pub height: f64,
    pub furniture: Vec<(ObjectLabel, Rect)>,
    pub items: Vec<(ObjectLabel, Rect)>,
}

impl Layout {
    pub fn generate(room: Room, camera: usize, geometry: &ScreenGeometry, layout_seed: u64) -> Layout {
        let mut rng = seed::rng_for(layout_seed, "layout", (room.index() * 1000 + camera) as u64);
        let (w, h) = (geometry.width_px, geometry.height_px);
        let (cw, ch) = (w / GRID_COLS as f64, h / GRID_ROWS as f64);
        let mut cells: Vec<usize> = (0..GRID_COLS * GRID_ROWS).collect();
        cells.shuffle(&mut rng);
        let jitter_x = ((cw - FURNITURE_W) / 2.0).max(0.0);
        let jitter_y = ((ch - FURNITURE_H) / 2.0).max(0.0);

        let mut furniture = Vec::new();
        for (f, cell) in detour_targets(room).zip(cells) {
            let cx = (cell % GRID_COLS) as f64 * cw + cw / 2.0 + rng.random_range(-jitter_x..=jitter_x);
            let cy = (cell / GRID_COLS) as f64 * ch + ch / 2.0 + rng.random_range(-jitter_y..=jitter_y);
            furniture.push((
                f,
                Rect {
                    x0: cx - FURNITURE_W / 2.0,
                    y0: cy - FURNITURE_H / 2.0,
                    x1: cx + FURNITURE_W / 2.0,
                    y1: cy + FURNITURE_H / 2.0,
                },
            ));
        }

        let mut items = Vec::new();
        for &(f, rect) in &furniture {
            let mut resting: Vec<ObjectLabel> = objects::room_objects(room)
                .filter(|&o| info(o).home.map(|(home, _)| objects::label(home)) == Some(f))
                .collect();
            if resting.is_empty() {
                continue;
            }
            resting.shuffle(&mut rng);
            let slot = (rect.x1 - rect.x0) / resting.len() as f64;
            let item_w = (slot - 10.0).min(90.0);
            for (k, o) in resting.into_iter().enumerate() {
                let cx = rect.x0 + slot * (k as f64 + 0.5);
                items.push((
                    o,
                    Rect {
                        x0: cx - item_w / 2.0,
                        y0: rect.y1 - 10.0 - ITEM_H,
                        x1: cx + item_w / 2.0,
                        y1: rect.y1 - 10.0,
                    },
                ));
            }
        }
        Layout {
            room,
            camera,
            width: w,
            height: h,
            furniture,
            items,
        }
    }

    pub fn object_at(&self, x: f64, y: f64) -> ObjectLabel {
        self.items
            .iter()
            .chain(&self.furniture)
            .find(|(_, r)| r.contains(x, y))
            .map(|(o, _)| *o)
            .unwrap_or(ObjectLabel(0))
    }

    /// Where the eyes go to look at `obj`: an item's centre, or the middle
    /// of the free upper half of a piece of furniture.
    pub fn anchor(&self, obj: ObjectLabel) -> Option<(f64, f64)> {
        if let Some((_, r)) = self.items.iter().find(|(o, _)| *o == obj) {
            return Some(r.center());
        }
        self.furniture
            .iter()
            .find(|(o, _)| *o == obj)
            .map(|(_, r)| ((r.x0 + r.x1) / 2.0, r.y0 + (r.y1 - r.y0) / 4.0))
    }

    pub fn labels(&self) -> impl Iterator<Item = ObjectLabel> + '_ {
        self.furniture.iter().chain(&self.items).map(|(o, _)| *o)
    }

    /// Visible pixel area per object, background included.
    pub fn visible_areas(&self) -> Vec<(ObjectLabel, f64)> {
        let mut out = Vec::new();
        let mut covered = 0.0;
        for &(f, r) in &self.furniture {
            let on_top: f64 = self
                .items
                .iter()
                .filter(|(o, _)| info(*o).home.map(|(h, _)| objects::label(h)) == Some(f))
                .map(|(_, ir)| ir.area())
                .sum();
            out.push((f, r.area() - on_top));
            covered += r.area();
        }
        out.extend(self.items.iter().map(|(o, r)| (*o, r.area())));
        out.push((ObjectLabel(0), self.width * self.height - covered));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSynthesis {
    pub sample_rate_hz: f64,
    /// Per-dwell Gaussian offset from the target anchor.
    pub jitter_px: f64,
    /// Fraction of each action spent looking at the next action's object.
    pub anticipation: f64,
    pub distractor_prob: f64,
    pub distractor_ms: f64,
    pub saccade_ms: f64,
    pub tremor_px: f64,
    pub blink_prob: f64,
    pub blink_ms: f64,
}

impl Default for GazeSynthesis {
    fn default() -> Self {
        GazeSynthesis {
            sample_rate_hz: 300.0,
            jitter_px: 20.0,
            anticipation: 0.2,
            distractor_prob: 0.1,
            distractor_ms: 150.0,
            saccade_ms: 30.0,
            tremor_px: 0.3,
            blink_prob: 0.05,
            blink_ms: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// Number of templates used, taken in order.
    pub activities: usize,
    pub cameras_per_activity: usize,
    pub test_cameras_per_activity: usize,
    pub videos_per_pair: usize,
    pub detour_min: usize,
    pub detour_max: usize,
    pub fps: f64,
    pub walk_frames: (usize, usize),
    pub action_frames: (usize, usize),
    pub geometry: ScreenGeometry,
    pub ivt: IvtConfig,
    pub gaze: GazeSynthesis,
    /// Fixed across datasets so a camera id always means the same view.
    pub layout_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            activities: TEMPLATES.len(),
            cameras_per_activity: 5,
            test_cameras_per_activity: 1,
            videos_per_pair: 2,
            detour_min: 2,
            detour_max: 10,
            fps: 10.0,
            walk_frames: (10, 16),
            action_frames: (6, 10),
            geometry: ScreenGeometry::default(),
            ivt: IvtConfig::default(),
            gaze: GazeSynthesis::default(),
            layout_seed: 0x6c61_796f_7574,
        }
    }
}

impl DatasetConfig {
    /// Six kitchen activities, eight cameras each with two held out:
    /// 324 training and 108 test videos.
    pub fn experiment() -> Self {
        DatasetConfig {
            activities: 6,
            cameras_per_activity: 8,
            test_cameras_per_activity: 2,
            videos_per_pair: 9,
            ..DatasetConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.activities == 0 || self.activities > TEMPLATES.len() {
            return bad(format!("activities must be in 1..={}, got {}", TEMPLATES.len(), self.activities));
        }
        if self.test_cameras_per_activity >= self.cameras_per_activity {
            return bad(format!(
                "{} test cameras out of {} leaves no training camera",
                self.test_cameras_per_activity, self.cameras_per_activity
            ));
        }
        if self.videos_per_pair == 0 {
            return bad("videos_per_pair must be positive".into());
        }
        if self.detour_min > self.detour_max {
            return bad("detour_min exceeds detour_max".into());
        }
        let frames_ok = |(lo, hi): (usize, usize)| lo >= 1 && lo <= hi;
        if !frames_ok(self.walk_frames) || !frames_ok(self.action_frames) {
            return bad("action frame ranges must satisfy 1 <= min <= max".into());
        }
        if self.fps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.gaze.sample_rate_hz.partial_cmp(&self.fps) != Some(std::cmp::Ordering::Greater)
        {
            return bad("need fps > 0 and a gaze sample rate above fps".into());
        }
        self.geometry.validate()
    }

    pub fn frame_ms(&self) -> f64 {
        1000.0 / self.fps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub id: String,
    pub program: ActivityProgram,
    pub variant: usize,
    pub initial: WorldState,
    /// `[start, end)` frame range per action; consecutive and covering
    /// every frame.
    pub intervals: Vec<(usize, usize)>,
    pub layout: Layout,
    pub track: FrameFixationTrack,
    pub gaze_seed: u64,
}

impl SyntheticVideo {
    pub fn frame_count(&self) -> usize {
        self.intervals.last().map_or(0, |iv| iv.1)
    }

    pub fn camera(&self) -> usize {
        self.program.camera
    }

    pub fn activity(&self) -> usize {
        self.program.activity
    }

    pub fn active_action(&self, frame: usize) -> Option<usize> {
        self.intervals.iter().position(|&(s, e)| frame >= s && frame < e)
    }

    /// Frame count `floor(fraction * T)` of the observed prefix.
    pub fn cutoff(&self, fraction: f64) -> usize {
        ((fraction * self.frame_count() as f64).floor() as usize).min(self.frame_count())
    }

    /// Actions fully finished by frame `k`.
    pub fn viewed_actions(&self, k: usize) -> usize {
        self.intervals.iter().take_while(|iv| iv.1 <= k).count()
    }

    /// `(observed prefix, remaining gold actions)` for an input fraction.
    pub fn split_at_fraction(&self, fraction: f64) -> (&[AtomicAction], &[AtomicAction]) {
        let n = self.viewed_actions(self.cutoff(fraction));
        self.program.actions.split_at(n)
    }

    /// Raw eye-tracker samples this video's track was derived from.
    pub fn raw_gaze(&self, config: &DatasetConfig) -> Vec<GazeSample> {
        synthesize_gaze(
            &self.program.actions,
            &self.intervals,
            &self.layout,
            config,
            self.gaze_seed,
        )
    }
}

impl Scene for SyntheticVideo {
    fn width(&self) -> f64 {
        self.layout.width
    }

    fn height(&self) -> f64 {
        self.layout.height
    }

    fn object_at(&self, _frame: usize, x: f64, y: f64) -> ObjectLabel {
        self.layout.object_at(x, y)
    }

    fn visible_objects(&self, _frame: usize) -> Vec<(ObjectLabel, f64)> {
        self.layout.visible_areas()
    }
}

/// Target segments `(start_ms, end_ms, point)` covering the video.
fn gaze_plan(
    actions: &[AtomicAction],
    intervals: &[(usize, usize)],
    layout: &Layout,
    config: &DatasetConfig,
    rng: &mut Rng,
) -> Vec<(f64, f64, (f64, f64))> {
    let g = &config.gaze;
    let frame_ms = config.frame_ms();
    let jitter = Normal::new(0.0, g.jitter_px.max(0.0)).expect("finite jitter");
    let clamp = |(x, y): (f64, f64)| (x.clamp(0.0, layout.width - 1.0), y.clamp(0.0, layout.height - 1.0));
    let center = (layout.width / 2.0, layout.height / 2.0);
    let look = |obj: Option<ObjectLabel>, rng: &mut Rng| {
        let (x, y) = obj.and_then(|o| layout.anchor(o)).unwrap_or(center);
        clamp((x + jitter.sample(rng), y + jitter.sample(rng)))
    };
    let others: Vec<ObjectLabel> = layout.labels().collect();

    let mut plan = Vec::new();
    for (i, (action, &(s, e))) in actions.iter().zip(intervals).enumerate() {
        let (t0, t1) = (s as f64 * frame_ms, e as f64 * frame_ms);
        let next = actions.get(i + 1).and_then(|a| a.focus());
        let main_end = if next.is_some() { t1 - g.anticipation * (t1 - t0) } else { t1 };
        let focus = action.focus();
        let main = look(focus, rng);
        if rng.random_bool(g.distractor_prob) && main_end - t0 > 2.0 * g.distractor_ms + 4.0 * g.saccade_ms {
            let mid = (t0 + main_end) / 2.0;
            let d0 = mid - g.distractor_ms / 2.0;
            let d1 = mid + g.distractor_ms / 2.0;
            let distractor = others
                .iter()
                .copied()
                .filter(|o| Some(*o) != focus)
                .collect::<Vec<_>>()
                .choose(rng)
                .copied();
            plan.push((t0, d0, main));
            plan.push((d0, d1, look(distractor, rng)));
            plan.push((d1, main_end, look(focus, rng)));
        } else {
            plan.push((t0, main_end, main));
        }
        if main_end < t1 {
            plan.push((main_end, t1, look(next, rng)));
        }
    }
    plan
}

/// Samples at the tracker rate: a linear saccade into each target, then
/// small tremor around it, with occasional blinks marked invalid.
pub fn synthesize_gaze(
    actions: &[AtomicAction],
    intervals: &[(usize, usize)],
    layout: &Layout,
    config: &DatasetConfig,
    gaze_seed: u64,
) -> Vec<GazeSample> {
    let g = &config.gaze;
    let mut rng = seed::rng_for(gaze_seed, "gaze-plan", 0);
    let plan = gaze_plan(actions, intervals, layout, config, &mut rng);
    let tremor = Normal::new(0.0, g.tremor_px.max(0.0)).expect("finite tremor");
    let dt = 1000.0 / g.sample_rate_hz;
    let end = plan.last().map_or(0.0, |p| p.1);

    let mut samples = Vec::new();
    let mut seg = 0;
    let mut prev_point = plan.first().map_or((0.0, 0.0), |p| p.2);
    let mut blink: Option<(f64, f64)> = None;
    let mut n = 0usize;
    loop {
        let t = n as f64 * dt;
        if t >= end {
            break;
        }
        n += 1;
        while t >= plan[seg].1 {
            prev_point = plan[seg].2;
            seg += 1;
            let (s0, s1, _) = plan[seg];
            blink = None;
            if rng.random_bool(g.blink_prob) && s1 - s0 > g.blink_ms + 2.0 * g.saccade_ms {
                let b0 = rng.random_range(s0 + g.saccade_ms..s1 - g.blink_ms);
                blink = Some((b0, b0 + g.blink_ms));
            }
        }
        let (s0, _, target) = plan[seg];
        let into = t - s0;
        let (x, y) = if seg > 0 && into < g.saccade_ms {
            let a = into / g.saccade_ms;
            (
                prev_point.0 + a * (target.0 - prev_point.0),
                prev_point.1 + a * (target.1 - prev_point.1),
            )
        } else {
            (target.0 + tremor.sample(&mut rng), target.1 + tremor.sample(&mut rng))
        };
        let mut sample = GazeSample::new(t, x, y);
        if blink.is_some_and(|(b0, b1)| t >= b0 && t < b1) {
            sample.valid = false;
        }
        samples.push(sample);
    }
    samples
}

/// Runs the eye-tracker pipeline on synthetic samples: fixation filter,
/// then one fixation per frame at mid-frame timestamps.
pub fn track_from_samples(samples: &[GazeSample], frames: usize, config: &DatasetConfig) -> Result<FrameFixationTrack> {
    let fixations = ivt_filter(samples, &config.ivt, &config.geometry)?;
    let frame_ms = config.frame_ms();
    let times: Vec<f64> = (0..frames).map(|f| (f as f64 + 0.5) * frame_ms).collect();
    assign_per_frame(&fixations, &times)
}

/// Detour walks ahead of the template actions. Consecutive walks go to
/// different furniture.
fn detour(room: Room, n: usize, rng: &mut Rng) -> Vec<AtomicAction> {
    let targets: Vec<ObjectLabel> = detour_targets(room).collect();
    let mut out: Vec<AtomicAction> = Vec::with_capacity(n);
    let mut last = None;
    while out.len() < n {
        let t = *targets.choose(rng).expect("every room has furniture");
        if Some(t) != last {
            out.push(AtomicAction::new(Verb::Walk, &[t]).expect("walk arity"));
            last = Some(t);
        }
    }
    out
}

/// Spreads detour walks over the slots in front of the body's own walks
/// (and the start), which keeps every precondition intact.
fn interleave(body: Vec<AtomicAction>, detours: Vec<AtomicAction>, rng: &mut Rng) -> Vec<AtomicAction> {
    let slots: Vec<usize> = (0..body.len())
        .filter(|&i| i == 0 || body[i].verb == Verb::Walk)
        .collect();
    let mut per_slot = vec![Vec::new(); body.len()];
    for d in detours {
        per_slot[*slots.choose(rng).expect("body is nonempty")].push(d);
    }
    let mut out = Vec::new();
    for (a, before) in body.into_iter().zip(per_slot) {
        out.extend(before);
        out.push(a);
    }
    out
}

pub fn generate_video(
    activity: usize,
    camera: usize,
    index: usize,
    config: &DatasetConfig,
    dataset_seed: u64,
) -> Result<SyntheticVideo> {
    let template = TEMPLATES.get(activity).ok_or_else(|| {
        Error::Config(format!("activity {activity} out of range 0..{}", TEMPLATES.len()))
    })?;
    let video_seed = seed::derive(
        seed::derive(dataset_seed, "video-activity", activity as u64),
        "video-camera-index",
        (camera * 10_000 + index) as u64,
    );
    let mut rng = seed::rng_for(video_seed, "program", 0);
    let variant = rng.random_range(0..template.variant_count());
    let (body, goal) = template.instantiate(variant);
    let n_detour = rng.random_range(config.detour_min..=config.detour_max);
    let actions = interleave(body, detour(template.room, n_detour, &mut rng), &mut rng);

    let mut intervals = Vec::with_capacity(actions.len());
    let mut frame = 0;
    for a in &actions {
        let (lo, hi) = if a.verb == Verb::Walk {
            config.walk_frames
        } else {
            config.action_frames
        };
        let len = rng.random_range(lo..=hi);
        intervals.push((frame, frame + len));
        frame += len;
    }

    let layout = Layout::generate(template.room, camera, &config.geometry, config.layout_seed);
    let gaze_seed = seed::derive(video_seed, "gaze", 0);
    let samples = synthesize_gaze(&actions, &intervals, &layout, config, gaze_seed);
    let track = track_from_samples(&samples, frame, config)?;

    Ok(SyntheticVideo {
        id: format!("a{activity:02}_c{camera}_v{index}"),
        program: ActivityProgram {
            activity,
            activity_name: template.name.to_string(),
            actions,
            goal,
            rooms: vec![template.room],
            camera,
        },
        variant,
        initial: WorldState::initial(template.room),
        intervals,
        layout,
        track,
        gaze_seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<SyntheticVideo>,
    pub test: Vec<SyntheticVideo>,
}

impl Dataset {
    pub fn pairs(videos: &[SyntheticVideo]) -> BTreeSet<(usize, usize)> {
        videos.iter().map(|v| (v.activity(), v.camera())).collect()
    }

    /// One line per video: `split,id,activity,camera,frames,actions`.
    pub fn manifest(&self) -> String {
        let mut out = String::from("split,id,activity,camera,frames,actions\n");
        for (split, videos) in [("train", &self.train), ("test", &self.test)] {
            for v in videos {
                let _ = writeln!(
                    out,
                    "{split},{},{},{},{},{}",
                    v.id,
                    v.program.activity_name,
                    v.camera(),
                    v.frame_count(),
                    v.program.actions.len()
                );
            }
        }
        out
    }
}

/// Train/test videos whose (activity, camera) pairs never overlap: each
/// activity holds out a seeded choice of cameras for testing.
pub fn generate_dataset(config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for activity in 0..config.activities {
        let mut cameras: Vec<usize> = (0..config.cameras_per_activity).collect();
        cameras.shuffle(&mut seed::rng_for(seed, "test-cameras", activity as u64));
        let held_out = &cameras[..config.test_cameras_per_activity];
        for camera in 0..config.cameras_per_activity {
            for index in 0..config.videos_per_pair {
                let video = generate_video(activity, camera, index, config, seed)?;
                if held_out.contains(&camera) {
                    test.push(video);
                } else {
                    train.push(video);
                }
            }
        }
    }
    Ok(Dataset { train, test })
}
