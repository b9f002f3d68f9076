//! DVS event synthesis from a stream of warped frames.
//!
//! Each pixel keeps a reference log-intensity. Between two frames the pixel's
//! log-intensity is interpolated linearly in time; every time it moves a full
//! contrast threshold away from the reference an event is emitted at the
//! interpolated crossing time and the reference steps by that threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pose_to_homography, warp_image, BorderMode, CameraPose, Homography, Intrinsics};
use crate::raster::GrayFrame;
use crate::scalar::{round_to_u64, Scalar};

/// Relative slack on threshold crossings, absorbing rounding in `ln`.
const CROSSING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Polarity {
    /// Brightness decreased.
    Off = 0,
    /// Brightness increased.
    On = 1,
}

impl Polarity {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    #[inline]
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Off => Polarity::On,
            Polarity::On => Polarity::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    /// Microseconds from stream start.
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }

    #[inline]
    pub fn sort_key(&self) -> (u64, u16, u16) {
        (self.t, self.y, self.x)
    }
}

/// Time-ordered events on a `width x height` sensor covering `[0, duration_us)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    duration_us: u64,
    events: Vec<Event>,
}

impl EventStream {
    /// Duration defaults to one microsecond past the last event.
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self> {
        let duration = events.last().map_or(0, |e| e.t + 1);
        Self::with_duration(width, height, events, duration)
    }

    pub fn with_duration(width: u16, height: u16, events: Vec<Event>, duration_us: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(format!("empty sensor {width}x{height}")));
        }
        let mut prev = 0;
        for (i, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(Error::Data(format!("event {i} at ({}, {}) outside {width}x{height}", e.x, e.y)));
            }
            if e.t < prev {
                return Err(Error::Data(format!("event {i} at t={} precedes t={prev}", e.t)));
            }
            prev = e.t;
        }
        if let Some(last) = events.last() {
            if last.t >= duration_us {
                return Err(Error::Data(format!(
                    "duration {duration_us} us does not cover last event at {}",
                    last.t
                )));
            }
        }
        Ok(Self { width, height, duration_us, events })
    }

    #[inline]
    pub fn width(&self) -> u16 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u16 {
        self.height
    }

    #[inline]
    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub contrast_threshold_pos: f64,
    pub contrast_threshold_neg: f64,
    /// Intensity floor applied before taking logarithms.
    pub log_eps: f64,
    pub refractory_us: u64,
    pub fps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            contrast_threshold_pos: 0.15,
            contrast_threshold_neg: 0.15,
            log_eps: 1e-3,
            refractory_us: 0,
            fps: 30.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.contrast_threshold_pos) || !positive(self.contrast_threshold_neg) {
            return Err(Error::Config("contrast thresholds must be positive".into()));
        }
        if !positive(self.log_eps) {
            return Err(Error::Config(format!("log_eps {} must be positive", self.log_eps)));
        }
        if !positive(self.fps) {
            return Err(Error::Config(format!("fps {} must be positive", self.fps)));
        }
        Ok(())
    }

    /// Timestamp of frame `i`: `round(i * 1e6 / fps)`.
    pub fn frame_timestamp(&self, i: usize) -> u64 {
        round_to_u64(i as f64 * 1e6 / self.fps)
    }
}

/// Per-pixel simulator memory: reference log-intensity and last emitted event time.
#[derive(Debug, Clone)]
pub struct PixelState<T> {
    width: u32,
    height: u32,
    reference: Vec<T>,
    last_event: Vec<Option<u64>>,
}

impl<T: Scalar> PixelState<T> {
    /// References start at the log-intensity of `frame`.
    pub fn new(frame: &GrayFrame<T>, cfg: &SimConfig) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            reference: log_frame(frame, T::of(cfg.log_eps)),
            last_event: vec![None; frame.data().len()],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn reference(&self) -> &[T] {
        &self.reference
    }

    pub fn last_event(&self, x: u32, y: u32) -> Option<u64> {
        self.last_event[y as usize * self.width as usize + x as usize]
    }
}

/// One warped frame of a motion stream.
#[derive(Debug, Clone)]
pub struct StreamFrame<T> {
    pub image: GrayFrame<T>,
    pub t_us: u64,
    /// Map from the source image to this frame.
    pub homography: Homography<T>,
}

#[derive(Debug, Clone)]
pub struct FrameStream<T> {
    frames: Vec<StreamFrame<T>>,
}

impl<T: Scalar> FrameStream<T> {
    pub fn new(frames: Vec<StreamFrame<T>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Config("frame stream needs at least one frame".into()))?;
        let dims = first.image.dims();
        for pair in frames.windows(2) {
            if pair[1].t_us <= pair[0].t_us {
                return Err(Error::Config(format!(
                    "frame timestamps not strictly increasing ({} then {})",
                    pair[0].t_us, pair[1].t_us
                )));
            }
        }
        if let Some(f) = frames.iter().find(|f| f.image.dims() != dims) {
            return Err(Error::Config(format!("frame at {} us has dims {:?}, expected {dims:?}", f.t_us, f.image.dims())));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[StreamFrame<T>] {
        &self.frames
    }

    pub fn dims(&self) -> (u32, u32) {
        self.frames[0].image.dims()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Timestamp of the final frame.
    pub fn span_us(&self) -> u64 {
        self.frames.last().map_or(0, |f| f.t_us)
    }
}

/// Renders `image` from every pose in `poses`.
pub fn stream_frames<T: Scalar>(
    image: &GrayFrame<T>,
    poses: &[CameraPose<T>],
    k: &Intrinsics<T>,
    plane_depth: T,
    border: BorderMode,
    fps: f64,
) -> Result<FrameStream<T>> {
    if poses.is_empty() {
        return Err(Error::Config("pose sequence is empty".into()));
    }
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::Config(format!("fps {fps} must be positive")));
    }
    let timing = SimConfig { fps, ..SimConfig::default() };
    let frames = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let homography = pose_to_homography(pose, k, plane_depth)?;
            let image = warp_image(image, &homography, border)?;
            Ok(StreamFrame { image, t_us: timing.frame_timestamp(i), homography })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameStream::new(frames)
}

/// Events produced while the scene moves from `prev` (at `t0`) to `next` (at `t1`).
///
/// The batch is sorted by `(t, y, x)` and `state` is advanced in place.
pub fn simulate_events<T: Scalar>(
    prev: &GrayFrame<T>,
    next: &GrayFrame<T>,
    t0: u64,
    t1: u64,
    cfg: &SimConfig,
    state: &mut PixelState<T>,
) -> Result<Vec<Event>> {
    cfg.validate()?;
    if prev.dims() != next.dims() {
        return Err(Error::State(format!("frame dims {:?} vs {:?}", prev.dims(), next.dims())));
    }
    let eps = T::of(cfg.log_eps);
    simulate_logs(&log_frame(prev, eps), &log_frame(next, eps), next.dims(), t0, t1, cfg, state)
}

/// All events for a frame stream, with state seeded from the first frame.
///
/// The stream's duration is one microsecond past the final frame timestamp, so
/// events emitted exactly at the last frame remain inside `[0, duration)`.
pub fn simulate_sequence<T: Scalar>(fs: &FrameStream<T>, cfg: &SimConfig) -> Result<EventStream> {
    let mut acc = SequenceAccumulator::new(cfg)?;
    for f in fs.frames() {
        acc.push(&f.image, f.t_us)?;
    }
    acc.finish()
}

/// Events plus the per-frame timestamps and homographies that produced them.
#[derive(Debug, Clone)]
pub struct MotionEvents<T> {
    pub events: EventStream,
    pub frames: Vec<(u64, Homography<T>)>,
}

/// Same result as [`stream_frames`] followed by [`simulate_sequence`], but each
/// warped frame is dropped as soon as it has been simulated.
pub fn simulate_motion<T: Scalar>(
    image: &GrayFrame<T>,
    poses: &[CameraPose<T>],
    k: &Intrinsics<T>,
    plane_depth: T,
    border: BorderMode,
    cfg: &SimConfig,
) -> Result<MotionEvents<T>> {
    if poses.is_empty() {
        return Err(Error::Config("pose sequence is empty".into()));
    }
    let mut acc = SequenceAccumulator::new(cfg)?;
    let mut frames = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let homography = pose_to_homography(pose, k, plane_depth)?;
        let t = cfg.frame_timestamp(i);
        acc.push(&warp_image(image, &homography, border)?, t)?;
        frames.push((t, homography));
    }
    Ok(MotionEvents { events: acc.finish()?, frames })
}

struct SequenceAccumulator<'a, T> {
    cfg: &'a SimConfig,
    state: Option<PixelState<T>>,
    prev_log: Vec<T>,
    prev_t: u64,
    events: Vec<Event>,
}

impl<'a, T: Scalar> SequenceAccumulator<'a, T> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: None, prev_log: Vec::new(), prev_t: 0, events: Vec::new() })
    }

    fn push(&mut self, frame: &GrayFrame<T>, t: u64) -> Result<()> {
        let Some(state) = self.state.as_mut() else {
            let (w, h) = frame.dims();
            sensor_dims(w, h)?;
            let state = PixelState::new(frame, self.cfg);
            self.prev_log = state.reference.clone();
            self.prev_t = t;
            self.state = Some(state);
            return Ok(());
        };
        let next_log = log_frame(frame, T::of(self.cfg.log_eps));
        let batch = simulate_logs(&self.prev_log, &next_log, frame.dims(), self.prev_t, t, self.cfg, state)?;
        self.events.extend(batch);
        self.prev_log = next_log;
        self.prev_t = t;
        Ok(())
    }

    fn finish(self) -> Result<EventStream> {
        let state = self.state.ok_or_else(|| Error::Config("frame stream needs at least one frame".into()))?;
        let (width, height) = sensor_dims(state.width, state.height)?;
        EventStream::with_duration(width, height, self.events, self.prev_t + 1)
    }
}

fn sensor_dims(w: u32, h: u32) -> Result<(u16, u16)> {
    match (u16::try_from(w), u16::try_from(h)) {
        (Ok(w), Ok(h)) => Ok((w, h)),
        _ => Err(Error::Config(format!("{w}x{h} exceeds the 65535-pixel sensor limit"))),
    }
}

fn log_frame<T: Scalar>(frame: &GrayFrame<T>, eps: T) -> Vec<T> {
    frame.data().iter().map(|&v| v.max(eps).ln()).collect()
}

fn simulate_logs<T: Scalar>(
    prev: &[T],
    next: &[T],
    (w, h): (u32, u32),
    t0: u64,
    t1: u64,
    cfg: &SimConfig,
    state: &mut PixelState<T>,
) -> Result<Vec<Event>> {
    if state.dims() != (w, h) {
        return Err(Error::State(format!("state dims {:?}, frame dims {:?}", state.dims(), (w, h))));
    }
    if t1 <= t0 {
        return Err(Error::State(format!("interval [{t0}, {t1}] is empty")));
    }
    sensor_dims(w, h)?;
    let c_pos = T::of(cfg.contrast_threshold_pos);
    let c_neg = T::of(cfg.contrast_threshold_neg);
    let tol_pos = c_pos * T::of(CROSSING_TOLERANCE);
    let tol_neg = c_neg * T::of(CROSSING_TOLERANCE);
    let span = T::of((t1 - t0) as f64);
    let (t0f, t1f) = (T::of(t0 as f64), T::of(t1 as f64));

    let mut events = Vec::new();
    for (idx, (&l0, &l1)) in prev.iter().zip(next).enumerate() {
        if l0 == l1 {
            continue;
        }
        let (x, y) = ((idx % w as usize) as u16, (idx / w as usize) as u16);
        let slope = l1 - l0;
        let rising = slope > T::zero();
        let (step, tol, polarity) = if rising {
            (c_pos, tol_pos, Polarity::On)
        } else {
            (-c_neg, tol_neg, Polarity::Off)
        };
        let reference = &mut state.reference[idx];
        let last = &mut state.last_event[idx];
        loop {
            let level = *reference + step;
            let crossed = if rising { level <= l1 + tol } else { level >= l1 - tol };
            if !crossed {
                break;
            }
            *reference = level;
            let tau = (t0f + (level - l0) / slope * span).max(t0f).min(t1f);
            let t = round_to_u64(tau);
            if let Some(prev_t) = *last {
                if t.saturating_sub(prev_t) < cfg.refractory_us {
                    continue;
                }
            }
            *last = Some(t);
            events.push(Event { x, y, t, p: polarity });
        }
    }
    events.sort_by_key(Event::sort_key);
    Ok(events)
}
