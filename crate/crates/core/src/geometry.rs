//! Planar camera motion: 6-DOF pose trajectories, the homographies they induce
//! on a fronto-parallel scene plane, and homography warping of images and points.
//!
//! A pose `(r, t)` maps the reference camera onto a moved camera looking at the
//! plane `z = d`. The induced image map is `H = K (R + t nᵀ / d) K⁻¹` with
//! `n = (0, 0, 1)`, normalized so that `H[2][2] = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{lerp, GrayFrame};
use crate::scalar::Scalar;

pub type Mat3<T> = [[T; 3]; 3];

/// Axis-angle rotation (radians) and translation (plane-depth units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<T> {
    pub rotation: [T; 3],
    pub translation: [T; 3],
}

impl<T: Scalar> CameraPose<T> {
    pub fn identity() -> Self {
        Self { rotation: [T::zero(); 3], translation: [T::zero(); 3] }
    }

    /// `(rx, ry, rz, tx, ty, tz)`.
    pub fn from_components(c: [T; 6]) -> Self {
        Self { rotation: [c[0], c[1], c[2]], translation: [c[3], c[4], c[5]] }
    }

    pub fn components(&self) -> [T; 6] {
        let [rx, ry, rz] = self.rotation;
        let [tx, ty, tz] = self.translation;
        [rx, ry, rz, tx, ty, tz]
    }

    pub fn validate(&self) -> Result<()> {
        if self.components().iter().any(|c| !c.is_finite()) {
            return Err(Error::Geometry(format!("non-finite pose {self:?}")));
        }
        let [rx, ry, rz] = self.rotation;
        let angle = (rx * rx + ry * ry + rz * rz).sqrt();
        if angle >= T::of(std::f64::consts::PI) {
            return Err(Error::Geometry(format!("rotation angle {angle} >= pi")));
        }
        Ok(())
    }

    /// Rodrigues' formula. Returns the identity matrix exactly for a zero vector.
    pub fn rotation_matrix(&self) -> Mat3<T> {
        let [rx, ry, rz] = self.rotation;
        let theta = (rx * rx + ry * ry + rz * rz).sqrt();
        let mut r = identity3();
        if theta == T::zero() {
            return r;
        }
        let (kx, ky, kz) = (rx / theta, ry / theta, rz / theta);
        let k = [
            [T::zero(), -kz, ky],
            [kz, T::zero(), -kx],
            [-ky, kx, T::zero()],
        ];
        let k2 = mul3(&k, &k);
        let (s, c) = (theta.sin(), T::one() - theta.cos());
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = r[i][j] + s * k[i][j] + c * k2[i][j];
            }
        }
        r
    }
}

/// Pinhole intrinsics with square pixels and no skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics<T> {
    pub focal: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Scalar> Intrinsics<T> {
    pub fn new(focal: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self> {
        let k = Self { focal, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// Focal length equal to the image width, principal point at the image center.
    pub fn centered(width: u32, height: u32) -> Result<Self> {
        Self::new(
            T::of(width as f64),
            T::of(width as f64 / 2.0),
            T::of(height as f64 / 2.0),
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > T::zero()) || !self.focal.is_finite() {
            return Err(Error::Geometry(format!("focal length {} must be positive", self.focal)));
        }
        let in_range = |c: T, n: u32| c >= T::zero() && c < T::of(n as f64);
        if !in_range(self.cx, self.width) || !in_range(self.cy, self.height) {
            return Err(Error::Geometry(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Projective map between image planes, stored row-major with `m[2][2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography<T> {
    m: Mat3<T>,
}

impl<T: Scalar> Homography<T> {
    pub fn identity() -> Self {
        Self { m: identity3() }
    }

    /// Validates invertibility and rescales so that `m[2][2] = 1`.
    pub fn from_matrix(m: Mat3<T>) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("non-finite homography entry".into()));
        }
        let scale = m.iter().flatten().fold(T::zero(), |a, v| a.max(v.abs()));
        let det = det3(&m);
        if scale == T::zero() || det.abs() <= T::epsilon() * scale * scale * scale {
            return Err(Error::Geometry(format!("singular homography (det = {det})")));
        }
        let w = m[2][2];
        if w.abs() <= T::epsilon() * scale {
            return Err(Error::Geometry("homography with m[2][2] = 0 cannot be normalized".into()));
        }
        let mut n = m;
        for v in n.iter_mut().flatten() {
            *v = *v / w;
        }
        Ok(Self { m: n })
    }

    /// Pure image-plane translation.
    pub fn translation(dx: T, dy: T) -> Self {
        let mut m = identity3();
        m[0][2] = dx;
        m[1][2] = dy;
        Self { m }
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3<T> {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = &self.m;
        let det = det3(m);
        if det == T::zero() || !det.is_finite() {
            return Err(Error::Geometry("homography is not invertible".into()));
        }
        let cof = |a: usize, b: usize, c: usize, d: usize| m[a][b] * m[c][d] - m[a][d] * m[c][b];
        let adj = [
            [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
            [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
            [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
        ];
        let mut inv = adj;
        for v in inv.iter_mut().flatten() {
            *v = *v / det;
        }
        Self::from_matrix(inv)
    }

    /// `self · other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Self::from_matrix(mul3(&self.m, &other.m))
    }

    /// Homogeneous map of one point; `None` at infinity.
    #[inline]
    pub fn apply(&self, p: [T; 2]) -> Option<[T; 2]> {
        let [x, y, w] = mul_vec(&self.m, p);
        if w == T::zero() {
            return None;
        }
        let out = [x / w, y / w];
        (out[0].is_finite() && out[1].is_finite()).then_some(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(T::zero(), |a, (x, y)| a.max((*x - *y).abs()))
    }
}

/// Border handling for samples that fall outside the source image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderMode {
    /// Reflection about the edge pixel without repeating it (`dcb|abcd|cba`).
    Mirrored,
    /// Fixed intensity in `[0, 1]`.
    Constant(f64),
}

/// Random-walk trajectory parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    pub pause_probability: f64,
    pub max_frames: usize,
    /// Per-step standard deviations for `(rx, ry, rz, tx, ty, tz)`.
    pub step_std: [f64; 6],
    /// Absolute bounds for `(rx, ry, rz, tx, ty, tz)`.
    pub amplitude_clamp: [f64; 6],
    pub seed: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            pause_probability: 0.5,
            max_frames: 100,
            step_std: [0.002, 0.002, 0.002, 0.003, 0.003, 0.001],
            amplitude_clamp: [0.05, 0.05, 0.05, 0.08, 0.08, 0.03],
            seed: 42,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pause_probability) {
            return Err(Error::Config(format!(
                "pause_probability {} outside [0, 1]",
                self.pause_probability
            )));
        }
        if self.max_frames == 0 {
            return Err(Error::Config("max_frames must be at least 1".into()));
        }
        if self.step_std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config(format!("step_std {:?} must be >= 0", self.step_std)));
        }
        // Rotation bound keeps |r| < pi for every sampled pose.
        let rot_bound = self.amplitude_clamp[..3].iter().map(|a| a * a).sum::<f64>().sqrt();
        if self.amplitude_clamp.iter().any(|a| !(*a > 0.0) || !a.is_finite())
            || rot_bound >= std::f64::consts::PI
        {
            return Err(Error::Config(format!(
                "amplitude_clamp {:?} must be positive with rotation norm < pi",
                self.amplitude_clamp
            )));
        }
        Ok(())
    }
}

/// Clamped Gaussian random walk in pose space with per-frame pauses.
///
/// `pose[0]` is the identity. For every later frame a Bernoulli draw with
/// `pause_probability` decides whether the camera holds still; otherwise each
/// component receives an independent `N(0, step_std[i])` increment and is
/// clamped to `±amplitude_clamp[i]`. The generator is ChaCha8 seeded with
/// `config.seed`, so sequences are reproducible for a given build.
pub fn sample_trajectory<T: Scalar>(config: &MotionConfig) -> Result<Vec<CameraPose<T>>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let steps = config
        .step_std
        .iter()
        .map(|&s| Normal::new(0.0, s).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let mut current = [0.0f64; 6];
    let mut poses = Vec::with_capacity(config.max_frames);
    poses.push(CameraPose::identity());
    for _ in 1..config.max_frames {
        if !rng.random_bool(config.pause_probability) {
            for (i, c) in current.iter_mut().enumerate() {
                let bound = config.amplitude_clamp[i];
                *c = (*c + steps[i].sample(&mut rng)).clamp(-bound, bound);
            }
        }
        poses.push(CameraPose::from_components(current.map(T::of)));
    }
    Ok(poses)
}

/// Homography induced on the plane `z = plane_depth` by moving the camera to `pose`.
pub fn pose_to_homography<T: Scalar>(
    pose: &CameraPose<T>,
    k: &Intrinsics<T>,
    plane_depth: T,
) -> Result<Homography<T>> {
    if !(plane_depth > T::zero()) || !plane_depth.is_finite() {
        return Err(Error::Geometry(format!("plane depth {plane_depth} must be positive")));
    }
    k.validate()?;
    pose.validate()?;

    let mut m = pose.rotation_matrix();
    for (row, t) in m.iter_mut().zip(pose.translation) {
        row[2] = row[2] + t / plane_depth;
    }

    // K = C·S with S = diag(f, f, 1) and C the principal-point shift. The
    // conjugation is expanded entry-wise so the zero pose yields I exactly.
    let f = k.focal;
    let mut s = m;
    for i in 0..2 {
        s[i][2] = m[i][2] * f;
        s[2][i] = m[2][i] / f;
    }
    let shift = [[T::one(), T::zero(), k.cx], [T::zero(), T::one(), k.cy], [T::zero(), T::zero(), T::one()]];
    let unshift = [[T::one(), T::zero(), -k.cx], [T::zero(), T::one(), -k.cy], [T::zero(), T::zero(), T::one()]];
    Homography::from_matrix(mul3(&mul3(&shift, &s), &unshift))
}

/// Map from the image seen at `pose_a` to the image seen at `pose_b`.
pub fn relative_homography<T: Scalar>(
    pose_a: &CameraPose<T>,
    pose_b: &CameraPose<T>,
    k: &Intrinsics<T>,
    plane_depth: T,
) -> Result<Homography<T>> {
    if pose_a == pose_b {
        pose_a.validate()?;
        return Ok(Homography::identity());
    }
    let ha = pose_to_homography(pose_a, k, plane_depth)?;
    let hb = pose_to_homography(pose_b, k, plane_depth)?;
    hb.compose(&ha.inverse()?)
}

/// Inverse-mapped bilinear warp: `out(x, y) = src(H⁻¹ · (x, y, 1))`.
///
/// Samples that map to infinity take the constant border value, or zero under
/// [`BorderMode::Mirrored`].
pub fn warp_image<T: Scalar>(
    src: &GrayFrame<T>,
    h: &Homography<T>,
    border: BorderMode,
) -> Result<GrayFrame<T>> {
    let inv = h.inverse()?;
    let (w, hgt) = src.dims();
    let fill = match border {
        BorderMode::Constant(c) => T::of(c),
        BorderMode::Mirrored => T::zero(),
    };
    let mut out = Vec::with_capacity(w as usize * hgt as usize);
    for y in 0..hgt {
        for x in 0..w {
            let v = match inv.apply([T::of(x as f64), T::of(y as f64)]) {
                Some([sx, sy]) => sample_bilinear(src, sx, sy, border).unwrap_or(fill),
                None => fill,
            };
            out.push(v);
        }
    }
    GrayFrame::from_vec(w, hgt, out)
}

/// Maps points through `h` without clipping.
pub fn warp_points<T: Scalar>(pts: &[[T; 2]], h: &Homography<T>) -> Result<Vec<[T; 2]>> {
    pts.iter()
        .enumerate()
        .map(|(index, &p)| h.apply(p).ok_or(Error::PointAtInfinity { index }))
        .collect()
}

fn sample_bilinear<T: Scalar>(src: &GrayFrame<T>, sx: T, sy: T, border: BorderMode) -> Option<T> {
    let fx = sx.floor();
    let fy = sy.floor();
    let (ax, ay) = (sx - fx, sy - fy);
    let x0 = fx.to_i64()?;
    let y0 = fy.to_i64()?;
    let (w, h) = (src.width() as i64, src.height() as i64);
    let fetch = |x: i64, y: i64| -> T {
        if (0..w).contains(&x) && (0..h).contains(&y) {
            return src.get(x as u32, y as u32);
        }
        match border {
            BorderMode::Mirrored => src.get(reflect101(x, w) as u32, reflect101(y, h) as u32),
            BorderMode::Constant(c) => T::of(c),
        }
    };
    let top = lerp(fetch(x0, y0), fetch(x0 + 1, y0), ax);
    let bottom = lerp(fetch(x0, y0 + 1), fetch(x0 + 1, y0 + 1), ax);
    Some(lerp(top, bottom, ay))
}

/// Reflect-101 index folding into `[0, n)`.
#[inline]
pub(crate) fn reflect101(i: i64, n: i64) -> i64 {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    if m >= n {
        period - m
    } else {
        m
    }
}

fn identity3<T: Scalar>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

fn mul3<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

#[inline]
fn mul_vec<T: Scalar>(m: &Mat3<T>, p: [T; 2]) -> [T; 3] {
    let [x, y] = p;
    [
        m[0][0] * x + m[0][1] * y + m[0][2],
        m[1][0] * x + m[1][1] * y + m[1][2],
        m[2][0] * x + m[2][1] * y + m[2][2],
    ]
}

fn det3<T: Scalar>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
