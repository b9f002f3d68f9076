//! File-level pipeline steps behind the command-line tool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bbox::ClassId;
use crate::config::PipelineConfig;
use crate::dataset::{
    export_sample, landmarks_to_boxes, load_landmarks, project_annotations, sample_seed, split_dataset,
    AnnotationSet, Manifest, ManifestEntry,
};
use crate::error::{Error, Result};
use crate::formats::{read_events, read_labels, read_predictions, write_events, EVS_MAGIC};
use crate::geometry::{sample_trajectory, Homography};
use crate::metrics::{evaluate, MetricsReport};
use crate::raster::GrayFrame;
use crate::representation::{stream_encode, TbrFrame};
use crate::scalar::Scalar;
use crate::simulator::{simulate_motion, EventStream, MotionEvents};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];
const LANDMARK_EXTENSION: &str = "txt";

/// Trajectory, warp and event simulation for one image.
pub fn simulate_image<T: Scalar>(image: &GrayFrame<T>, cfg: &PipelineConfig, seed: u64) -> Result<MotionEvents<T>> {
    cfg.validate()?;
    let poses = sample_trajectory::<T>(&cfg.motion_for(seed))?;
    let k = cfg.camera.intrinsics(image.width(), image.height())?;
    simulate_motion(image, &poses, &k, T::of(cfg.camera.plane_depth), cfg.camera.border, &cfg.sim)
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub image_id: String,
    pub events: usize,
    /// Timestamp of the last frame, `(max_frames - 1) / fps` seconds in microseconds.
    pub span_us: u64,
    pub events_path: PathBuf,
    pub sidecar_path: PathBuf,
}

/// Path of the per-frame homography table written next to an event file.
pub fn sidecar_path(events_path: &Path) -> PathBuf {
    let mut s = events_path.as_os_str().to_owned();
    s.push(".homographies.tsv");
    PathBuf::from(s)
}

/// Simulates `image_path` and writes an EVS1 file plus its homography sidecar.
pub fn simulate_file(image_path: &Path, out_path: &Path, cfg: &PipelineConfig) -> Result<SimulateSummary> {
    let image_id = file_stem(image_path)?;
    let image = GrayFrame::<f64>::load(image_path)?;
    let run = simulate_image(&image, cfg, sample_seed(cfg.seed, &image_id))?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_events(&run.events, BufWriter::new(File::create(out_path)?))?;
    let sidecar = sidecar_path(out_path);
    write_sidecar(&run.frames, BufWriter::new(File::create(&sidecar)?))?;
    Ok(SimulateSummary {
        image_id,
        events: run.events.len(),
        span_us: run.frames.last().map_or(0, |f| f.0),
        events_path: out_path.to_path_buf(),
        sidecar_path: sidecar,
    })
}

/// Runs [`simulate_file`] for every image, writing `<out_dir>/<stem>.evs`, with
/// at most `jobs` images in flight. Results follow the input order.
pub fn simulate_files(
    images: &[PathBuf],
    out_dir: &Path,
    cfg: &PipelineConfig,
    jobs: usize,
) -> Result<Vec<Result<SimulateSummary>>> {
    fs::create_dir_all(out_dir)?;
    let pool = thread_pool(jobs)?;
    Ok(pool.install(|| {
        images
            .par_iter()
            .map(|p| simulate_file(p, &out_dir.join(format!("{}.evs", file_stem(p)?)), cfg))
            .collect()
    }))
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn write_sidecar<T: Scalar, W: Write>(frames: &[(u64, Homography<T>)], mut sink: W) -> Result<()> {
    writeln!(sink, "frame\tt_us\th00\th01\th02\th10\th11\th12\th20\th21\th22")?;
    for (i, (t, h)) in frames.iter().enumerate() {
        write!(sink, "{i}\t{t}")?;
        for v in h.matrix().iter().flatten() {
            write!(sink, "\t{:e}", v.as_f64())?;
        }
        writeln!(sink)?;
    }
    sink.flush()?;
    Ok(())
}

/// Last frame timestamp recorded in a homography sidecar.
pub fn read_sidecar_span(path: &Path) -> Result<u64> {
    let mut last = None;
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = line.split('\t').nth(1).and_then(|f| f.parse::<u64>().ok());
        last = Some(t.ok_or_else(|| {
            Error::parse(i + 1, crate::error::LineError::Other(format!("bad sidecar row {line:?}")))
        })?);
    }
    last.ok_or_else(|| Error::Data(format!("{} lists no frames", path.display())))
}

/// Encodes an EVS1 file into TBR images `<stem>_tbr_<k>.png` under `out_dir`.
///
/// The stream duration comes from `duration_us`, else from the homography
/// sidecar if one exists, else one microsecond past the last event.
pub fn encode_file(
    events_path: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
    duration_us: Option<u64>,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let stream = read_events(BufReader::new(File::open(events_path)?))?;
    let sidecar = sidecar_path(events_path);
    let duration = match duration_us {
        Some(d) => Some(d),
        None if sidecar.exists() => Some(read_sidecar_span(&sidecar)? + 1),
        None => None,
    };
    let stream = match duration {
        Some(d) => {
            let (w, h) = (stream.width(), stream.height());
            EventStream::with_duration(w, h, stream.into_events(), d.max(1))?
        }
        None => stream,
    };
    let frames: Vec<TbrFrame<f64>> = stream_encode(&stream, &cfg.tbr_for(stream.duration_us()))?;
    fs::create_dir_all(out_dir)?;
    let stem = file_stem(events_path)?;
    let mut written = Vec::with_capacity(frames.len());
    for (k, f) in frames.iter().enumerate() {
        let path = out_dir.join(format!("{stem}_tbr_{k:04}.png"));
        let mut image = f.to_gray_frame();
        if let Some([w, h]) = cfg.resize {
            image = image.resize_bilinear(w, h)?;
        }
        image.save_png(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct ExportSummary {
    pub manifest: Manifest,
    pub train: Manifest,
    pub val: Manifest,
}

/// Image/landmark pairs sharing a basename, sorted by basename.
pub fn resolve_corpus(corpus: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut landmarks: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(corpus)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let Some(ext) = ext else { continue };
        let stem = file_stem(&path)?;
        if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            if let Some(prev) = images.insert(stem.clone(), path.clone()) {
                return Err(Error::Data(format!("two images for {stem}: {} and {}", prev.display(), path.display())));
            }
        } else if ext == LANDMARK_EXTENSION {
            landmarks.insert(stem, path);
        }
    }
    let mut problems = Vec::new();
    for stem in images.keys().filter(|s| !landmarks.contains_key(*s)) {
        problems.push(format!("{stem}: missing landmark file"));
    }
    for stem in landmarks.keys().filter(|s| !images.contains_key(*s)) {
        problems.push(format!("{stem}: missing image"));
    }
    if !problems.is_empty() {
        return Err(Error::Data(format!("unpaired corpus files: {}", problems.join("; "))));
    }
    if images.is_empty() {
        return Err(Error::Data(format!("no images found in {}", corpus.display())));
    }
    Ok(images
        .into_iter()
        .map(|(stem, img)| {
            let lm = landmarks.remove(&stem).expect("paired above");
            (stem, img, lm)
        })
        .collect())
}

/// Simulates, encodes and labels every pair in `corpus`, writing
/// `images/`, `labels/`, `manifest.tsv`, `train.tsv`/`val.tsv` and
/// `train.txt`/`val.txt` under `out`. At most `jobs` images run concurrently;
/// output order follows the sorted basenames.
pub fn export_corpus(corpus: &Path, out: &Path, cfg: &PipelineConfig, jobs: usize) -> Result<ExportSummary> {
    cfg.validate()?;
    let pairs = resolve_corpus(corpus)?;
    fs::create_dir_all(out)?;
    let pool = thread_pool(jobs)?;
    let results: Vec<Result<Vec<ManifestEntry>>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|(stem, img, lm)| export_one::<f64>(stem, img, lm, out, cfg))
            .collect()
    });
    let mut entries = Vec::new();
    for r in results {
        entries.extend(r?);
    }
    let manifest = Manifest::new(entries)?;
    manifest.save(out.join("manifest.tsv"))?;
    let (train, val) = split_dataset(&manifest, cfg.split_ratio, cfg.seed)?;
    for (name, part) in [("train", &train), ("val", &val)] {
        part.save(out.join(format!("{name}.tsv")))?;
        let mut list = BufWriter::new(File::create(out.join(format!("{name}.txt")))?);
        for e in part.entries() {
            writeln!(list, "{}", e.sample_path)?;
        }
        list.flush()?;
    }
    Ok(ExportSummary { manifest, train, val })
}

fn export_one<T: Scalar>(
    stem: &str,
    image_path: &Path,
    landmark_path: &Path,
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<Vec<ManifestEntry>> {
    let image = GrayFrame::<T>::load(image_path)?;
    let (w, h) = image.dims();
    let landmarks = load_landmarks::<T>(landmark_path)?;
    let mut base = landmarks_to_boxes(&landmarks, &cfg.boxes, w, h)?;
    base.image_id = stem.to_string();

    let seed = sample_seed(cfg.seed, stem);
    let run = simulate_image(&image, cfg, seed)?;
    let tbr = cfg.tbr_for(run.events.duration_us());
    let frames: Vec<TbrFrame<T>> = stream_encode(&run.events, &tbr)?;
    let group_span = tbr.delta_t.saturating_mul(tbr.n_bits as u64);
    let annotations = frames
        .iter()
        .map(|f| {
            let end = (f.first_window_index() * tbr.delta_t).saturating_add(group_span);
            let homography = frame_homography_before(&run.frames, end);
            project_annotations(&base, &homography, w, h, cfg.boxes.min_visible_fraction)
        })
        .collect::<Result<Vec<_>>>()?;
    let resize = cfg.resize.map(|[rw, rh]| (rw, rh));
    export_sample(&frames, &annotations, out, stem, seed, resize)
}

/// Homography of the last video frame strictly before `end_us`.
fn frame_homography_before<T: Scalar>(frames: &[(u64, Homography<T>)], end_us: u64) -> Homography<T> {
    let idx = frames.partition_point(|(t, _)| *t < end_us);
    frames[idx.saturating_sub(1)].1
}

/// Ground-truth sets keyed by sample id for the entries of `manifest`.
pub fn load_ground_truth<T: Scalar>(dataset_dir: &Path, manifest: &Manifest) -> Result<Vec<AnnotationSet<T>>> {
    manifest
        .entries()
        .iter()
        .map(|e| {
            let boxes = read_labels(BufReader::new(File::open(dataset_dir.join(&e.label_path))?))?;
            Ok(AnnotationSet { image_id: e.sample_id().to_string(), boxes })
        })
        .collect()
}

/// Scores a prediction file against `<dataset_dir>/<manifest_name>`.
pub fn evaluate_predictions(
    pred_path: &Path,
    dataset_dir: &Path,
    manifest_name: &str,
    cfg: &PipelineConfig,
) -> Result<MetricsReport<f64>> {
    let manifest = Manifest::load(dataset_dir.join(manifest_name))?;
    let gts = load_ground_truth(dataset_dir, &manifest)?;
    let preds = read_predictions(BufReader::new(File::open(pred_path)?))?;
    evaluate(&preds, &gts, &cfg.eval)
}

/// Short human-readable summary of an event, label, prediction or manifest file.
pub fn describe(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut out = String::new();
    if bytes.starts_with(&EVS_MAGIC[..3]) {
        let s = crate::formats::parse_events(&bytes)?;
        let on = s.events().iter().filter(|e| e.p.as_u8() == 1).count();
        let _ = writeln!(out, "format: EVS1");
        let _ = writeln!(out, "width: {}", s.width());
        let _ = writeln!(out, "height: {}", s.height());
        let _ = writeln!(out, "events: {}", s.len());
        let _ = writeln!(out, "on: {on}");
        let _ = writeln!(out, "off: {}", s.len() - on);
        if let (Some(a), Some(b)) = (s.events().first(), s.events().last()) {
            let _ = writeln!(out, "time: {} .. {} us", a.t, b.t);
        }
        return Ok(out);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| unknown_type(path))?;
    let first = text.lines().find(|l| !l.trim().is_empty());
    let fields = first.map_or(5, |l| l.split_whitespace().count());
    if first.is_some_and(|l| l.split('\t').count() == 4) {
        let m = Manifest::read(text.as_bytes())?;
        let _ = writeln!(out, "format: manifest");
        let _ = writeln!(out, "samples: {}", m.len());
        return Ok(out);
    }
    match fields {
        5 => {
            let labels = read_labels::<f64, _>(text.as_bytes())?;
            let _ = writeln!(out, "format: labels");
            let _ = writeln!(out, "boxes: {}", labels.len());
            for c in ClassId::ALL {
                let _ = writeln!(out, "{c}: {}", labels.iter().filter(|a| a.class == c).count());
            }
        }
        7 => {
            let preds = read_predictions::<f64, _>(text.as_bytes())?;
            let images: std::collections::BTreeSet<&str> = preds.iter().map(|p| p.image_id.as_str()).collect();
            let _ = writeln!(out, "format: predictions");
            let _ = writeln!(out, "detections: {}", preds.len());
            let _ = writeln!(out, "images: {}", images.len());
            for c in ClassId::ALL {
                let _ = writeln!(out, "{c}: {}", preds.iter().filter(|p| p.class == c).count());
            }
        }
        _ => return Err(unknown_type(path)),
    }
    Ok(out)
}

fn unknown_type(path: &Path) -> Error {
    Error::Data(format!("{}: unknown file type", path.display()))
}

fn file_stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Data(format!("{}: no usable file name", path.display())))
}
