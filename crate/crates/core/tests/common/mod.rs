//! Generators and independent reference implementations shared by the
//! integration tests. Nothing here calls the library code it is compared to.
#![allow(dead_code)]

use evface::bbox::{BBox, ClassId};
use evface::dataset::{Annotation, AnnotationSet};
use evface::metrics::Detection;
use evface::representation::{BinaryFrame, TbrConfig};
use evface::simulator::{Event, EventStream, Polarity};
use rand::Rng;

/// Sorted random stream of `n` events in `[0, duration)`.
pub fn random_stream<R: Rng>(rng: &mut R, width: u16, height: u16, n: usize, duration: u64) -> EventStream {
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let p = if rng.random_bool(0.5) { Polarity::On } else { Polarity::Off };
            Event::new(rng.random_range(0..width), rng.random_range(0..height), rng.random_range(0..duration), p)
        })
        .collect();
    events.sort_by_key(|e| (e.t, e.y, e.x));
    EventStream::with_duration(width, height, events, duration).expect("valid stream")
}

pub fn random_binary_frames<R: Rng>(rng: &mut R, width: u16, height: u16, n: u32, first: u64, density: f64) -> Vec<BinaryFrame> {
    (0..n as u64)
        .map(|i| {
            let bits = (0..width as usize * height as usize).map(|_| rng.random_bool(density) as u8).collect();
            BinaryFrame::from_bits(width, height, first + i, bits).unwrap()
        })
        .collect()
}

/// Presence bits per window, `[window][y * width + x]`, for `windows` windows.
pub fn naive_windows(es: &EventStream, delta_t: u64, windows: u64) -> Vec<Vec<u8>> {
    let w = es.width() as usize;
    let mut out = vec![vec![0u8; w * es.height() as usize]; windows as usize];
    for e in es.events() {
        let j = (e.t / delta_t) as usize;
        if j < out.len() {
            out[j][e.y as usize * w + e.x as usize] = 1;
        }
    }
    out
}

/// Pixel values of one group computed straight from the definition.
pub fn naive_tbr_values(bits: &[Vec<u8>], cfg: &TbrConfig) -> Vec<f64> {
    let n = cfg.n_bits as usize;
    let pixels = bits[0].len();
    let max_code = 2f64.powi(n as i32) - 1.0;
    let d = match cfg.normalizer {
        evface::Normalizer::MaxCode => max_code,
        evface::Normalizer::WindowCount => n as f64,
    };
    (0..pixels)
        .map(|px| {
            let code: f64 = (0..n)
                .map(|i| {
                    let exp = match cfg.bit_order {
                        evface::BitOrder::EarliestMsb => n - 1 - i,
                        evface::BitOrder::LatestMsb => i,
                    };
                    bits[i][px] as f64 * 2f64.powi(exp as i32)
                })
                .sum();
            code / d
        })
        .collect()
}

/// Expected frame values straight from the definition: every event sets the
/// bit of its window inside its group, codes are divided by the normalizer.
pub fn naive_stream_values(es: &EventStream, cfg: &TbrConfig, groups: usize) -> Vec<Vec<f64>> {
    let n = cfg.n_bits as u64;
    let w = es.width() as usize;
    let pixels = w * es.height() as usize;
    let mut codes = vec![vec![0u64; pixels]; groups];
    for e in es.events() {
        let window = e.t / cfg.delta_t;
        let (g, i) = ((window / n) as usize, window % n);
        let exp = match cfg.bit_order {
            evface::BitOrder::EarliestMsb => n - 1 - i,
            evface::BitOrder::LatestMsb => i,
        };
        codes[g][e.y as usize * w + e.x as usize] |= 1 << exp;
    }
    let d = match cfg.normalizer {
        evface::Normalizer::MaxCode => ((1u64 << n) - 1) as f64,
        evface::Normalizer::WindowCount => n as f64,
    };
    codes.into_iter().map(|g| g.into_iter().map(|c| c as f64 / d).collect()).collect()
}

pub fn iou_ref(a: [f64; 4], b: [f64; 4]) -> f64 {
    let c = |[cx, cy, w, h]: [f64; 4]| [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0];
    let (a, b) = (c(a), c(b));
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

/// Ranked TP flags for one class: predictions sorted by confidence (ties by
/// input order) and matched greedily, one image at a time.
pub fn ranked_hits(preds: &[Detection<f64>], gts: &[AnnotationSet<f64>], class: ClassId, thr: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class == class).collect();
    order.sort_by(|&a, &b| preds[b].confidence.partial_cmp(&preds[a].confidence).unwrap().then(a.cmp(&b)));
    let mut claimed: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.boxes.len()]).collect();
    order
        .iter()
        .map(|&i| {
            let p = &preds[i];
            let img = gts.iter().position(|g| g.image_id == p.image_id).expect("known image");
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts[img].boxes.iter().enumerate() {
                if g.class != class || claimed[img][j] {
                    continue;
                }
                let v = iou_ref(p.bbox.as_array(), g.bbox.as_array());
                if v >= thr && best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    claimed[img][j] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// AP by enumerating every ranked cut-off: precision and recall are recomputed
/// for each prefix, then precision at each recall step is replaced by the best
/// precision at any deeper cut-off.
pub fn brute_force_ap(preds: &[Detection<f64>], gts: &[AnnotationSet<f64>], class: ClassId, thr: f64) -> Option<f64> {
    let n_gt = gts.iter().flat_map(|g| &g.boxes).filter(|b| b.class == class).count();
    if n_gt == 0 {
        return None;
    }
    let hits = ranked_hits(preds, gts, class, thr);
    let points: Vec<(f64, f64)> = (1..=hits.len())
        .map(|k| {
            let tp = hits[..k].iter().filter(|h| **h).count() as f64;
            (tp / n_gt as f64, tp / k as f64)
        })
        .collect();
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (k, &(r, _)) in points.iter().enumerate() {
        if r > prev_r {
            let best_p = points[k..].iter().map(|&(_, p)| p).fold(0.0, f64::max);
            ap += (r - prev_r) * best_p;
            prev_r = r;
        }
    }
    Some(ap)
}

pub fn random_box<R: Rng>(rng: &mut R) -> BBox<f64> {
    let w = rng.random_range(0.05..0.4);
    let h = rng.random_range(0.05..0.4);
    BBox::new(rng.random_range(w / 2.0..1.0 - w / 2.0), rng.random_range(h / 2.0..1.0 - h / 2.0), w, h)
}

pub fn jitter<R: Rng>(rng: &mut R, b: &BBox<f64>, amount: f64) -> BBox<f64> {
    let mut j = || rng.random_range(-amount..=amount);
    BBox::new(b.cx + j() * b.w, b.cy + j() * b.h, b.w * (1.0 + j()), b.h * (1.0 + j()))
}

/// Up to `max_images` images with up to `max_boxes` boxes each, plus
/// predictions that are a mix of jittered ground truth and random boxes.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_images: usize,
    max_boxes: usize,
) -> (Vec<Detection<f64>>, Vec<AnnotationSet<f64>>) {
    let n_img = rng.random_range(1..=max_images);
    let gts: Vec<AnnotationSet<f64>> = (0..n_img)
        .map(|i| AnnotationSet {
            image_id: format!("img{i}"),
            boxes: (0..rng.random_range(0..=max_boxes))
                .map(|_| Annotation {
                    class: if rng.random_bool(0.5) { ClassId::Face } else { ClassId::Eye },
                    bbox: random_box(rng),
                })
                .collect(),
        })
        .collect();
    let mut preds = Vec::new();
    for g in &gts {
        for a in &g.boxes {
            if rng.random_bool(0.7) {
                let copies = if rng.random_bool(0.2) { 2 } else { 1 };
                for _ in 0..copies {
                    preds.push(Detection {
                        image_id: g.image_id.clone(),
                        class: a.class,
                        confidence: rng.random_range(0.0..1.0),
                        bbox: jitter(rng, &a.bbox, 0.3),
                    });
                }
            }
        }
        for _ in 0..rng.random_range(0..=max_boxes / 2) {
            preds.push(Detection {
                image_id: g.image_id.clone(),
                class: if rng.random_bool(0.5) { ClassId::Face } else { ClassId::Eye },
                confidence: rng.random_range(0.0..1.0),
                bbox: random_box(rng),
            });
        }
    }
    (preds, gts)
}

/// Rodrigues rotation matrix, written out independently.
pub fn rodrigues(r: [f64; 3]) -> [[f64; 3]; 3] {
    let th = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if th == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let (x, y, z) = (r[0] / th, r[1] / th, r[2] / th);
    let (s, c) = th.sin_cos();
    let v = 1.0 - c;
    [
        [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
        [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
        [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
    ]
}

pub fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            o[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    o
}

/// `K (R + t nᵀ / d) K⁻¹` with `n = (0, 0, 1)`, scaled so the corner entry is 1.
pub fn plane_homography_ref(pose: [f64; 6], f: f64, cx: f64, cy: f64, d: f64) -> [[f64; 3]; 3] {
    let mut m = rodrigues([pose[0], pose[1], pose[2]]);
    for (i, row) in m.iter_mut().enumerate() {
        row[2] += pose[3 + i] / d;
    }
    let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
    let kinv = [[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]];
    let mut h = matmul(&matmul(&k, &m), &kinv);
    let s = h[2][2];
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    h
}

pub fn max_abs_diff(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
