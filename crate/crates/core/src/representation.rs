//! Temporal Binary Representation.
//!
//! Time is cut into windows of `delta_t` microseconds. Each window becomes a
//! binary presence map (either polarity counts), and `n_bits` consecutive maps
//! are packed into one code per pixel, `code = Σ bit_i · 2^(N-1-i)` with the
//! earliest window as the most significant bit. Codes are divided by a
//! normalizer to give frame values; the packing is lossless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayFrame;
use crate::scalar::Scalar;
use crate::simulator::{Event, EventStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitOrder {
    /// Window 0 of a group carries weight `2^(N-1)`.
    #[default]
    EarliestMsb,
    /// Window 0 of a group carries weight `1`.
    LatestMsb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// Divide by `2^N - 1`; values land in `[0, 1]`.
    #[default]
    MaxCode,
    /// Divide by `N`; values land in `[0, (2^N - 1) / N]`.
    WindowCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TbrConfig {
    /// Accumulation window in microseconds.
    pub delta_t: u64,
    pub n_bits: u32,
    pub bit_order: BitOrder,
    pub normalizer: Normalizer,
}

impl Default for TbrConfig {
    fn default() -> Self {
        Self { delta_t: 10_000, n_bits: 8, bit_order: BitOrder::default(), normalizer: Normalizer::default() }
    }
}

impl TbrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_t == 0 {
            return Err(Error::Config("delta_t must be at least 1 us".into()));
        }
        if !(1..=32).contains(&self.n_bits) {
            return Err(Error::Config(format!("n_bits {} outside [1, 32]", self.n_bits)));
        }
        Ok(())
    }

    /// Also checks that every code is exactly representable in `T`.
    pub fn validate_for<T: Scalar>(&self) -> Result<()> {
        self.validate()?;
        if self.n_bits > T::MANTISSA_DIGITS {
            return Err(Error::Config(format!(
                "n_bits {} exceeds the {}-bit significand of the frame scalar",
                self.n_bits,
                T::MANTISSA_DIGITS
            )));
        }
        Ok(())
    }

    /// Window length such that `[0, duration_us)` fits in a single frame.
    pub fn single_frame(&self, duration_us: u64) -> Self {
        let n = self.n_bits.max(1) as u64;
        Self { delta_t: duration_us.div_ceil(n).max(1), ..*self }
    }

    #[inline]
    pub fn max_code(&self) -> u64 {
        (1u64 << self.n_bits) - 1
    }

    pub fn denominator(&self) -> u64 {
        match self.normalizer {
            Normalizer::MaxCode => self.max_code(),
            Normalizer::WindowCount => self.n_bits as u64,
        }
    }

    /// Bit weight of window position `i` (0 = earliest) inside a group.
    #[inline]
    pub fn weight(&self, i: u32) -> u64 {
        match self.bit_order {
            BitOrder::EarliestMsb => 1u64 << (self.n_bits - 1 - i),
            BitOrder::LatestMsb => 1u64 << i,
        }
    }

    /// Number of windows covering `[0, duration_us)`; at least one.
    pub fn window_count(&self, duration_us: u64) -> u64 {
        duration_us.div_ceil(self.delta_t).max(1)
    }

    /// Number of TBR frames for `windows` windows.
    pub fn frame_count(&self, windows: u64) -> u64 {
        windows.div_ceil(self.n_bits as u64)
    }
}

/// Presence map of one accumulation window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: u16,
    height: u16,
    window_index: u64,
    bits: Vec<u8>,
}

impl BinaryFrame {
    pub fn empty(width: u16, height: u16, window_index: u64) -> Self {
        Self { width, height, window_index, bits: vec![0; width as usize * height as usize] }
    }

    pub fn from_bits(width: u16, height: u16, window_index: u64, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Data(format!("{} bits for {width}x{height}", bits.len())));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Data(format!("binary frame value {b}")));
        }
        Ok(Self { width, height, window_index, bits })
    }

    #[inline]
    pub fn dims(&self) -> (u16, u16) {
        (self.width, self.height)
    }

    #[inline]
    pub fn window_index(&self) -> u64 {
        self.window_index
    }

    #[inline]
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> bool {
        self.bits[y as usize * self.width as usize + x as usize] == 1
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16) {
        self.bits[y as usize * self.width as usize + x as usize] = 1;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// `n_bits` windows packed into one normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TbrFrame<T> {
    width: u16,
    height: u16,
    first_window_index: u64,
    n_bits: u32,
    values: Vec<T>,
}

impl<T: Scalar> TbrFrame<T> {
    pub fn from_values(width: u16, height: u16, first_window_index: u64, n_bits: u32, values: Vec<T>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Data(format!("{} values for {width}x{height}", values.len())));
        }
        Ok(Self { width, height, first_window_index, n_bits, values })
    }

    #[inline]
    pub fn dims(&self) -> (u16, u16) {
        (self.width, self.height)
    }

    #[inline]
    pub fn first_window_index(&self) -> u64 {
        self.first_window_index
    }

    #[inline]
    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> T {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn to_gray_frame(&self) -> GrayFrame<T> {
        GrayFrame::from_vec(self.width as u32, self.height as u32, self.values.clone())
            .expect("TbrFrame dims are non-zero")
    }

    fn from_codes(width: u16, height: u16, first_window_index: u64, codes: &[u64], cfg: &TbrConfig) -> Self {
        let d = T::of(cfg.denominator() as f64);
        let values = codes.iter().map(|&c| T::of(c as f64) / d).collect();
        Self { width, height, first_window_index, n_bits: cfg.n_bits, values }
    }
}

/// Presence of any event with `window_start <= t < window_start + delta_t`.
///
/// `events` must be sorted by time; only the window's slice is inspected.
pub fn binarize_window(
    events: &[Event],
    window_start: u64,
    cfg: &TbrConfig,
    width: u16,
    height: u16,
) -> Result<BinaryFrame> {
    cfg.validate()?;
    let end = window_start.saturating_add(cfg.delta_t);
    let lo = events.partition_point(|e| e.t < window_start);
    let hi = lo + events[lo..].partition_point(|e| e.t < end);
    let mut frame = BinaryFrame::empty(width, height, window_start / cfg.delta_t);
    for e in &events[lo..hi] {
        if e.x >= width || e.y >= height {
            return Err(Error::Data(format!("event {e:?} outside {width}x{height}")));
        }
        frame.set(e.x, e.y);
    }
    Ok(frame)
}

/// Packs exactly `n_bits` consecutive binary frames.
pub fn encode_tbr<T: Scalar>(frames: &[BinaryFrame], cfg: &TbrConfig) -> Result<TbrFrame<T>> {
    cfg.validate_for::<T>()?;
    if frames.len() != cfg.n_bits as usize {
        return Err(Error::Config(format!("{} binary frames for n_bits = {}", frames.len(), cfg.n_bits)));
    }
    let (w, h) = frames[0].dims();
    let first = frames[0].window_index;
    for (i, f) in frames.iter().enumerate() {
        if f.dims() != (w, h) {
            return Err(Error::Config(format!("binary frame {i} is {:?}, expected {:?}", f.dims(), (w, h))));
        }
        if f.window_index != first + i as u64 {
            return Err(Error::Config(format!(
                "binary frame {i} has window {}, expected {}",
                f.window_index,
                first + i as u64
            )));
        }
    }
    let mut codes = vec![0u64; w as usize * h as usize];
    for (i, f) in frames.iter().enumerate() {
        let weight = cfg.weight(i as u32);
        for (code, &bit) in codes.iter_mut().zip(&f.bits) {
            if bit == 1 {
                *code |= weight;
            }
        }
    }
    Ok(TbrFrame::from_codes(w, h, first, &codes, cfg))
}

/// Unpacks a frame back into its `n_bits` binary frames.
pub fn decode_tbr<T: Scalar>(frame: &TbrFrame<T>, cfg: &TbrConfig) -> Result<Vec<BinaryFrame>> {
    cfg.validate_for::<T>()?;
    if frame.n_bits != cfg.n_bits {
        return Err(Error::Config(format!("frame has n_bits {}, config {}", frame.n_bits, cfg.n_bits)));
    }
    let d = T::of(cfg.denominator() as f64);
    let max_code = cfg.max_code();
    let mut out: Vec<BinaryFrame> = (0..cfg.n_bits as u64)
        .map(|i| BinaryFrame::empty(frame.width, frame.height, frame.first_window_index + i))
        .collect();
    for (idx, &v) in frame.values.iter().enumerate() {
        let scaled = (v * d).round();
        let code = match scaled.to_u64() {
            Some(c) if scaled >= T::zero() && c <= max_code && T::of(c as f64) / d == v => c,
            _ => {
                return Err(Error::Corruption(format!(
                    "value {v} at pixel {idx} is not a multiple of 1/{}",
                    cfg.denominator()
                )))
            }
        };
        for (i, bf) in out.iter_mut().enumerate() {
            if code & cfg.weight(i as u32) != 0 {
                bf.bits[idx] = 1;
            }
        }
    }
    Ok(out)
}

/// Encodes a whole stream. `[0, duration)` is split into
/// `W = max(1, ceil(duration / delta_t))` windows, grouped by `n_bits`; the last
/// group is padded with empty windows, giving `ceil(W / n_bits)` frames.
pub fn stream_encode<T: Scalar>(es: &EventStream, cfg: &TbrConfig) -> Result<Vec<TbrFrame<T>>> {
    cfg.validate_for::<T>()?;
    let (w, h) = (es.width(), es.height());
    let n = cfg.n_bits as u64;
    let windows = cfg.window_count(es.duration_us());
    let groups = cfg.frame_count(windows);
    let group_span = cfg.delta_t.saturating_mul(n);
    let events = es.events();

    let mut out = Vec::with_capacity(groups as usize);
    let mut codes = vec![0u64; w as usize * h as usize];
    let mut cursor = 0;
    for g in 0..groups {
        codes.fill(0);
        let group_start = g * group_span;
        let group_end = group_start.saturating_add(group_span);
        while cursor < events.len() && events[cursor].t < group_end {
            let e = events[cursor];
            let slot = (e.t - group_start) / cfg.delta_t;
            codes[e.y as usize * w as usize + e.x as usize] |= cfg.weight(slot as u32);
            cursor += 1;
        }
        out.push(TbrFrame::from_codes(w, h, g * n, &codes, cfg));
    }
    Ok(out)
}
