//! Procedural face images and 194-point landmark sets for tests.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::LandmarkSet;
use crate::error::Result;
use crate::raster::GrayFrame;
use crate::scalar::Scalar;

pub const LANDMARK_COUNT: usize = 194;

/// Face ellipse geometry in pixels, derived from the image size and a variant index.
#[derive(Debug, Clone, Copy)]
struct Layout {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    eye_dx: f64,
    eye_dy: f64,
    eye_rx: f64,
    eye_ry: f64,
}

impl Layout {
    fn new(width: u32, height: u32, variant: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        let shift = (variant % 5) as f64 - 2.0;
        let cx = w * (0.5 + 0.02 * shift);
        let cy = h * (0.5 - 0.015 * shift);
        let rx = w * (0.26 + 0.01 * (variant % 3) as f64);
        let ry = h * 0.34;
        Self { cx, cy, rx, ry, eye_dx: rx * 0.42, eye_dy: -ry * 0.22, eye_rx: rx * 0.2, eye_ry: ry * 0.08 }
    }

    fn eye_center(&self, side: f64) -> (f64, f64) {
        (self.cx + side * self.eye_dx, self.cy + self.eye_dy)
    }
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, n: usize) -> impl Iterator<Item = [f64; 2]> {
    (0..n).map(move |i| {
        let a = TAU * i as f64 / n as f64;
        [cx + rx * a.cos(), cy + ry * a.sin()]
    })
}

/// Textured grayscale face: shaded background, bright face ellipse, dark eyes
/// and mouth.
pub fn face_image<T: Scalar>(width: u32, height: u32, variant: usize) -> GrayFrame<T> {
    let l = Layout::new(width, height, variant);
    let phase = variant as f64 * 0.7;
    let mut data = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 0.25 + 0.1 * ((xf * 0.21 + phase).sin() * (yf * 0.17).cos());
            let inside = |cx: f64, cy: f64, rx: f64, ry: f64| ((xf - cx) / rx).powi(2) + ((yf - cy) / ry).powi(2) <= 1.0;
            if inside(l.cx, l.cy, l.rx, l.ry) {
                v = 0.7 + 0.08 * ((xf - l.cx) * 0.3).sin();
            }
            for side in [-1.0, 1.0] {
                let (ex, ey) = l.eye_center(side);
                if inside(ex, ey, l.eye_rx, l.eye_ry) {
                    v = 0.1;
                }
            }
            if inside(l.cx, l.cy + l.ry * 0.5, l.rx * 0.35, l.ry * 0.06) {
                v = 0.2;
            }
            data.push(T::of(v.clamp(0.0, 1.0)));
        }
    }
    GrayFrame::from_vec(width, height, data).expect("dimensions match")
}

/// 194 points in the Helen order: 41 contour, 17 nose, 56 mouth, 20 right eye,
/// 20 left eye, 40 brows.
pub fn face_landmarks<T: Scalar>(width: u32, height: u32, variant: usize, image_id: &str) -> LandmarkSet<T> {
    let l = Layout::new(width, height, variant);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(LANDMARK_COUNT);
    pts.extend(ellipse(l.cx, l.cy, l.rx, l.ry, 41));
    pts.extend((0..17).map(|i| [l.cx, l.cy - l.ry * 0.1 + l.ry * 0.3 * i as f64 / 16.0]));
    pts.extend(ellipse(l.cx, l.cy + l.ry * 0.5, l.rx * 0.35, l.ry * 0.06, 56));
    let (rx, ry) = l.eye_center(-1.0);
    pts.extend(ellipse(rx, ry, l.eye_rx, l.eye_ry, 20));
    let (lx, ly) = l.eye_center(1.0);
    pts.extend(ellipse(lx, ly, l.eye_rx, l.eye_ry, 20));
    for side in [-1.0, 1.0] {
        let (bx, by) = l.eye_center(side);
        pts.extend((0..20).map(|i| [bx - l.eye_rx + 2.0 * l.eye_rx * i as f64 / 19.0, by - l.ry * 0.15]));
    }
    debug_assert_eq!(pts.len(), LANDMARK_COUNT);
    LandmarkSet { image_id: image_id.to_string(), points: pts.into_iter().map(|[x, y]| [T::of(x), T::of(y)]).collect() }
}

/// Landmark file text: identifier line, then `x , y` rows.
pub fn landmark_text<T: Scalar>(lm: &LandmarkSet<T>) -> String {
    let mut s = format!("{}\n", lm.image_id);
    for [x, y] in &lm.points {
        let _ = writeln!(s, "{:.4} , {:.4}", x.as_f64(), y.as_f64());
    }
    s
}

/// Writes `face_<i>.png` and `face_<i>.txt` for `i in 0..n` and returns the basenames.
pub fn write_corpus(dir: &Path, n: usize, width: u32, height: u32) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    (0..n)
        .map(|i| {
            let id = format!("face_{i:03}");
            face_image::<f64>(width, height, i).save_png(dir.join(format!("{id}.png")))?;
            fs::write(dir.join(format!("{id}.txt")), landmark_text(&face_landmarks::<f64>(width, height, i, &id)))?;
            Ok(id)
        })
        .collect()
}
