//! Landmark ingestion, face/eye box derivation, label projection through
//! per-frame homographies, sample export and train/validation splitting.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bbox::{BBox, ClassId};
use crate::error::{Error, LineError, Result};
use crate::formats::write_labels;
use crate::geometry::{warp_points, Homography};
use crate::raster::GrayFrame;
use crate::representation::TbrFrame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<T> {
    pub image_id: String,
    pub points: Vec<[T; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annotation<T> {
    pub class: ClassId,
    pub bbox: BBox<T>,
}

/// Boxes of one frame, normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet<T> {
    pub image_id: String,
    pub boxes: Vec<Annotation<T>>,
}

/// How boxes are derived from landmarks.
///
/// Index ranges are half-open `[start, end)` positions in the landmark list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxClassConfig {
    pub eye_left: [usize; 2],
    pub eye_right: [usize; 2],
    /// Fraction of the box width/height added on each side.
    pub face_margin: f64,
    pub eye_margin: f64,
    /// Projected boxes keeping less than this share of their area in frame are dropped.
    pub min_visible_fraction: f64,
}

impl Default for BoxClassConfig {
    /// 194-point Helen layout: eyes at 114..134 and 134..154. Check against your
    /// copy of the annotations before relying on it.
    fn default() -> Self {
        Self {
            eye_left: [134, 154],
            eye_right: [114, 134],
            face_margin: 0.10,
            eye_margin: 0.25,
            min_visible_fraction: 0.25,
        }
    }
}

impl BoxClassConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [s, e]) in [("eye_left", self.eye_left), ("eye_right", self.eye_right)] {
            if s >= e {
                return Err(Error::Config(format!("{name} range [{s}, {e}) is empty")));
            }
        }
        let [ls, le] = self.eye_left;
        let [rs, re] = self.eye_right;
        if ls < re && rs < le {
            return Err(Error::Config("eye index ranges overlap".into()));
        }
        if !(self.face_margin >= 0.0) || !(self.eye_margin >= 0.0) {
            return Err(Error::Config("margins must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.min_visible_fraction) {
            return Err(Error::Config(format!(
                "min_visible_fraction {} outside [0, 1]",
                self.min_visible_fraction
            )));
        }
        Ok(())
    }
}

/// Landmark file: image identifier on the first line, then one `x , y` pair per line.
pub fn load_landmarks<T: Scalar>(path: impl AsRef<Path>) -> Result<LandmarkSet<T>> {
    parse_landmarks(BufReader::new(File::open(path)?))
}

pub fn parse_landmarks<T: Scalar, R: BufRead>(source: R) -> Result<LandmarkSet<T>> {
    let mut lines = source.lines();
    let image_id = match lines.next().transpose()? {
        Some(id) if !id.trim().is_empty() => id.trim().to_string(),
        _ => return Err(Error::Data("landmark file is empty".into())),
    };
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::parse(line_no, LineError::FieldCount { expected: 2, found: fields.len() }));
        }
        let mut xy = [T::zero(); 2];
        for (slot, s) in xy.iter_mut().zip(&fields) {
            *slot = match s.parse::<f64>() {
                Ok(v) if v.is_finite() => T::of(v),
                _ => return Err(Error::parse(line_no, LineError::Malformed(s.to_string()))),
            };
        }
        points.push(xy);
    }
    if points.is_empty() {
        return Err(Error::Data(format!("landmark file for {image_id} has no points")));
    }
    Ok(LandmarkSet { image_id, points })
}

/// Face box around all landmarks plus one box per eye range, each expanded by
/// its margin, clipped to the image and normalized by `(width, height)`.
pub fn landmarks_to_boxes<T: Scalar>(
    lm: &LandmarkSet<T>,
    cfg: &BoxClassConfig,
    width: u32,
    height: u32,
) -> Result<AnnotationSet<T>> {
    cfg.validate()?;
    let n = lm.points.len();
    for (name, [_, e]) in [("eye_left", cfg.eye_left), ("eye_right", cfg.eye_right)] {
        if e > n {
            return Err(Error::Config(format!("{name} range ends at {e} but {} has {n} landmarks", lm.image_id)));
        }
    }
    let (wf, hf) = (T::of(width as f64), T::of(height as f64));
    let make = |class, pts: &[[T; 2]], margin: f64, what: &str| -> Result<Annotation<T>> {
        let [x0, y0, x1, y1] = bounds(pts);
        let (w, h) = (x1 - x0, y1 - y0);
        if !(w > T::zero() && h > T::zero()) {
            return Err(Error::DegenerateAnnotation(format!("{what} box of {} has zero area", lm.image_id)));
        }
        let m = T::of(margin);
        let x0 = (x0 - w * m).max(T::zero());
        let y0 = (y0 - h * m).max(T::zero());
        let x1 = (x1 + w * m).min(wf);
        let y1 = (y1 + h * m).min(hf);
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::DegenerateAnnotation(format!("{what} box of {} lies outside the image", lm.image_id)));
        }
        Ok(Annotation { class, bbox: BBox::from_corners(x0 / wf, y0 / hf, x1 / wf, y1 / hf) })
    };
    let [ls, le] = cfg.eye_left;
    let [rs, re] = cfg.eye_right;
    let boxes = vec![
        make(ClassId::Face, &lm.points, cfg.face_margin, "face")?,
        make(ClassId::Eye, &lm.points[ls..le], cfg.eye_margin, "left eye")?,
        make(ClassId::Eye, &lm.points[rs..re], cfg.eye_margin, "right eye")?,
    ];
    Ok(AnnotationSet { image_id: lm.image_id.clone(), boxes })
}

/// Maps every box through `h`: the four corners are warped, the axis-aligned
/// hull is clipped to the frame, and boxes keeping less than
/// `min_visible_fraction` of their unclipped area are dropped.
pub fn project_annotations<T: Scalar>(
    ann: &AnnotationSet<T>,
    h: &Homography<T>,
    width: u32,
    height: u32,
    min_visible_fraction: f64,
) -> Result<AnnotationSet<T>> {
    let (wf, hf) = (T::of(width as f64), T::of(height as f64));
    let min_visible = T::of(min_visible_fraction);
    let mut boxes = Vec::with_capacity(ann.boxes.len());
    for a in &ann.boxes {
        let [x0, y0, x1, y1] = a.bbox.scaled(wf, hf).corners();
        let mapped = warp_points(&[[x0, y0], [x1, y0], [x1, y1], [x0, y1]], h)?;
        let [mx0, my0, mx1, my1] = bounds(&mapped);
        let full = (mx1 - mx0) * (my1 - my0);
        let cx0 = mx0.max(T::zero());
        let cy0 = my0.max(T::zero());
        let cx1 = mx1.min(wf);
        let cy1 = my1.min(hf);
        if !(cx1 > cx0 && cy1 > cy0) {
            continue;
        }
        let visible = (cx1 - cx0) * (cy1 - cy0);
        if visible < min_visible * full {
            continue;
        }
        boxes.push(Annotation { class: a.class, bbox: BBox::from_corners(cx0 / wf, cy0 / hf, cx1 / wf, cy1 / hf) });
    }
    Ok(AnnotationSet { image_id: ann.image_id.clone(), boxes })
}

fn bounds<T: Scalar>(pts: &[[T; 2]]) -> [T; 4] {
    let init = [T::infinity(), T::infinity(), T::neg_infinity(), T::neg_infinity()];
    pts.iter().fold(init, |[x0, y0, x1, y1], &[x, y]| [x0.min(x), y0.min(y), x1.max(x), y1.max(y)])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the dataset root.
    pub sample_path: String,
    pub label_path: String,
    pub image_id: String,
    pub seed: u64,
}

impl ManifestEntry {
    /// File stem of the sample image; predictions are keyed by it.
    pub fn sample_id(&self) -> &str {
        let name = self.sample_path.rsplit('/').next().unwrap_or(&self.sample_path);
        name.rsplit_once('.').map_or(name, |(stem, _)| stem)
    }
}

/// Tab-separated index: `sample_path  label_path  image_id  seed`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            for field in [&e.sample_path, &e.label_path, &e.image_id] {
                if field.is_empty() || field.contains(['\t', '\n', '\r']) {
                    return Err(Error::Data(format!("manifest field {field:?} is empty or contains separators")));
                }
            }
            if !seen.insert(e.sample_path.as_str()) || !seen.insert(e.label_path.as_str()) {
                return Err(Error::Data(format!("duplicate manifest path in {e:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        for e in &self.entries {
            writeln!(sink, "{}\t{}\t{}\t{}", e.sample_path, e.label_path, e.image_id, e.seed)?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::parse(i + 1, LineError::FieldCount { expected: 4, found: f.len() }));
            }
            let seed = f[3].trim().parse().map_err(|_| Error::parse(i + 1, LineError::Malformed(f[3].into())))?;
            entries.push(ManifestEntry {
                sample_path: f[0].into(),
                label_path: f[1].into(),
                image_id: f[2].into(),
                seed,
            });
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Writes each frame as `images/<stem>_<k>.png` (8-bit, `round(v * 255)`) and
/// its boxes as `labels/<stem>_<k>.txt` under `out_dir`. With `resize`, pixels
/// are resampled bilinearly; normalized labels are unaffected.
pub fn export_sample<T: Scalar>(
    frames: &[TbrFrame<T>],
    annotations: &[AnnotationSet<T>],
    out_dir: impl AsRef<Path>,
    stem: &str,
    seed: u64,
    resize: Option<(u32, u32)>,
) -> Result<Vec<ManifestEntry>> {
    if frames.len() != annotations.len() {
        return Err(Error::Data(format!("{} frames but {} annotation sets", frames.len(), annotations.len())));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("images"))?;
    fs::create_dir_all(out_dir.join("labels"))?;
    let mut entries = Vec::with_capacity(frames.len());
    for (k, (frame, ann)) in frames.iter().zip(annotations).enumerate() {
        let name = format!("{stem}_{k:04}");
        let sample_path = format!("images/{name}.png");
        let label_path = format!("labels/{name}.txt");
        let mut image: GrayFrame<T> = frame.to_gray_frame();
        if let Some((w, h)) = resize {
            image = image.resize_bilinear(w, h)?;
        }
        image.save_png(out_dir.join(&sample_path))?;
        write_labels(&ann.boxes, BufWriter::new(File::create(out_dir.join(&label_path))?))?;
        entries.push(ManifestEntry { sample_path, label_path, image_id: ann.image_id.clone(), seed });
    }
    Ok(entries)
}

/// Seeded shuffle, then the first `round(ratio * n)` entries train. Both halves
/// keep the input order.
pub fn split_dataset(manifest: &Manifest, ratio: f64, seed: u64) -> Result<(Manifest, Manifest)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    if manifest.is_empty() {
        return Err(Error::Data("cannot split an empty manifest".into()));
    }
    let n = manifest.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * n as f64).round() as usize;
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let (train, val): (Vec<_>, Vec<_>) =
        manifest.entries.iter().cloned().zip(is_train).partition(|(_, t)| *t);
    let strip = |v: Vec<(ManifestEntry, bool)>| Manifest { entries: v.into_iter().map(|(e, _)| e).collect() };
    Ok((strip(train), strip(val)))
}

/// 64-bit FNV-1a over the UTF-8 bytes of `s`.
pub fn fnv1a64(s: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    s.bytes().fold(OFFSET, |h, b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Per-sample seed: `global ^ fnv1a64(image_id)`.
pub fn sample_seed(global: u64, image_id: &str) -> u64 {
    global ^ fnv1a64(image_id)
}
