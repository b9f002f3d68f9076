//! Detection scoring against ground-truth boxes: IoU, greedy matching,
//! all-point interpolated AP, mAP, precision/recall/F1 and box MSE.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bbox::{BBox, ClassId};
use crate::dataset::AnnotationSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub image_id: String,
    pub class: ClassId,
    pub confidence: T,
    pub bbox: BBox<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Class indices to score.
    pub classes: Vec<u8>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5, classes: ClassId::ALL.iter().map(|c| c.index()).collect() }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!("iou_threshold {} outside (0, 1)", self.iou_threshold)));
        }
        self.class_ids().map(drop)
    }

    pub fn class_ids(&self) -> Result<Vec<ClassId>> {
        let mut out: Vec<ClassId> = self
            .classes
            .iter()
            .map(|&c| ClassId::from_index(c).ok_or_else(|| Error::Config(format!("unknown class {c}"))))
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no classes to evaluate".into()));
        }
        Ok(out)
    }
}

/// Intersection over union of two boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> Result<T> {
    if !(a.area() > T::zero()) || !(b.area() > T::zero()) {
        return Err(Error::DegenerateBox);
    }
    let [ax0, ay0, ax1, ay1] = a.corners();
    let [bx0, by0, bx1, by1] = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(T::zero());
    let ih = (ay1.min(by1) - ay0.max(by0)).max(T::zero());
    let inter = iw * ih;
    if inter == T::zero() {
        return Ok(T::zero());
    }
    Ok((inter / (a.area() + b.area() - inter)).min(T::one()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Matched ground truth `box_index` of ground-truth set `image`.
    TruePositive { image: usize, box_index: usize },
    FalsePositive,
    /// Class not under evaluation.
    Ignored,
}

/// Per-prediction outcomes (input order) and totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub outcomes: Vec<MatchOutcome>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Greedy matching per image and class: predictions in descending confidence
/// (ties by input order) each claim the unclaimed ground truth of highest IoU,
/// provided it reaches the threshold.
pub fn match_detections<T: Scalar>(
    preds: &[Detection<T>],
    gts: &[AnnotationSet<T>],
    cfg: &EvalConfig,
) -> Result<Matching> {
    cfg.validate()?;
    let classes = cfg.class_ids()?;
    let threshold = T::of(cfg.iou_threshold);
    let index = image_index(gts)?;

    let missing: BTreeSet<&str> =
        preds.iter().map(|p| p.image_id.as_str()).filter(|id| !index.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::Evaluation(format!(
            "predictions reference images without ground truth: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut groups: HashMap<(usize, ClassId), Vec<usize>> = HashMap::new();
    let mut outcomes = vec![MatchOutcome::Ignored; preds.len()];
    for (i, p) in preds.iter().enumerate() {
        if classes.contains(&p.class) {
            groups.entry((index[p.image_id.as_str()], p.class)).or_default().push(i);
        }
    }

    let mut tp = 0;
    for ((image, class), mut members) in groups {
        members.sort_by(|&a, &b| desc_confidence(preds[a].confidence, preds[b].confidence).then(a.cmp(&b)));
        let boxes = &gts[image].boxes;
        let mut claimed = vec![false; boxes.len()];
        for i in members {
            let mut best: Option<(usize, T)> = None;
            for (g, gt) in boxes.iter().enumerate() {
                if gt.class != class || claimed[g] {
                    continue;
                }
                let overlap = iou(&preds[i].bbox, &gt.bbox)?;
                if overlap >= threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((g, overlap));
                }
            }
            outcomes[i] = match best {
                Some((g, _)) => {
                    claimed[g] = true;
                    tp += 1;
                    MatchOutcome::TruePositive { image, box_index: g }
                }
                None => MatchOutcome::FalsePositive,
            };
        }
    }
    let fp = outcomes.iter().filter(|o| **o == MatchOutcome::FalsePositive).count();
    let total_gt = gts.iter().flat_map(|s| &s.boxes).filter(|b| classes.contains(&b.class)).count();
    Ok(Matching { outcomes, true_positives: tp, false_positives: fp, false_negatives: total_gt - tp })
}

/// All-point interpolated AP for `class`; `None` when the class has no ground truth.
pub fn average_precision<T: Scalar>(
    preds: &[Detection<T>],
    gts: &[AnnotationSet<T>],
    class: ClassId,
    cfg: &EvalConfig,
) -> Result<Option<T>> {
    let only = EvalConfig { classes: vec![class.index()], ..cfg.clone() };
    let matching = match_detections(preds, gts, &only)?;
    Ok(ap_from_matching(preds, gts, &matching, class))
}

fn ap_from_matching<T: Scalar>(
    preds: &[Detection<T>],
    gts: &[AnnotationSet<T>],
    matching: &Matching,
    class: ClassId,
) -> Option<T> {
    let n_gt = gts.iter().flat_map(|s| &s.boxes).filter(|b| b.class == class).count();
    if n_gt == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class == class).collect();
    order.sort_by(|&a, &b| desc_confidence(preds[a].confidence, preds[b].confidence).then(a.cmp(&b)));

    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &i in &order {
        match matching.outcomes[i] {
            MatchOutcome::TruePositive { .. } => tp += 1,
            _ => fp += 1,
        }
        recall.push(T::of(tp as f64) / T::of(n_gt as f64));
        precision.push(T::of(tp as f64) / T::of((tp + fp) as f64));
    }
    // Monotone envelope from the right.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = T::zero();
    let mut prev_recall = T::zero();
    for (r, p) in recall.into_iter().zip(precision) {
        if r > prev_recall {
            ap = ap + (r - prev_recall) * p;
            prev_recall = r;
        }
    }
    Some(ap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    /// AP per evaluated class, `None` when the class has no ground truth.
    pub ap: Vec<(ClassId, Option<T>)>,
    pub map_all: Option<T>,
    pub map_face: Option<T>,
    pub map_eye: Option<T>,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    /// Mean squared coordinate error over matched pairs.
    pub box_mse: Option<T>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// No true positives: precision is reported as 0.
    pub zero_tp: bool,
}

pub fn evaluate<T: Scalar>(
    preds: &[Detection<T>],
    gts: &[AnnotationSet<T>],
    cfg: &EvalConfig,
) -> Result<MetricsReport<T>> {
    let matching = match_detections(preds, gts, cfg)?;
    let classes = cfg.class_ids()?;
    let ap: Vec<(ClassId, Option<T>)> =
        classes.iter().map(|&c| (c, ap_from_matching(preds, gts, &matching, c))).collect();
    let defined: Vec<T> = ap.iter().filter_map(|(_, v)| *v).collect();
    let map_all = (!defined.is_empty()).then(|| defined.iter().copied().sum::<T>() / T::of(defined.len() as f64));
    let class_ap = |c: ClassId| ap.iter().find(|(k, _)| *k == c).and_then(|(_, v)| *v);

    let tp = matching.true_positives;
    let (fp, fn_) = (matching.false_positives, matching.false_negatives);
    let ratio = |num: usize, den: usize| if den == 0 { T::zero() } else { T::of(num as f64) / T::of(den as f64) };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > T::zero() {
        T::of(2.0) * precision * recall / (precision + recall)
    } else {
        T::zero()
    };

    let mut sq = T::zero();
    for (p, o) in preds.iter().zip(&matching.outcomes) {
        if let MatchOutcome::TruePositive { image, box_index } = *o {
            let g = gts[image].boxes[box_index].bbox.as_array();
            let d = p.bbox.as_array();
            sq = sq + (0..4).map(|k| (d[k] - g[k]) * (d[k] - g[k])).sum::<T>() / T::of(4.0);
        }
    }
    let box_mse = (tp > 0).then(|| sq / T::of(tp as f64));

    Ok(MetricsReport {
        map_all,
        map_face: class_ap(ClassId::Face),
        map_eye: class_ap(ClassId::Eye),
        ap,
        precision,
        recall,
        f1,
        box_mse,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        zero_tp: tp == 0,
    })
}

impl<T: Scalar> MetricsReport<T> {
    /// `name: value` lines using the usual table row names.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (name, v) in self.rows() {
            let _ = writeln!(s, "{name}: {v}");
        }
        s
    }

    /// Tab-separated `metric  value` table with a header row.
    pub fn to_table(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        for (name, v) in self.keyed_rows() {
            let _ = writeln!(s, "{name}\t{v}");
        }
        s
    }

    fn values(&self) -> Vec<(&'static str, &'static str, String)> {
        let opt = |v: Option<T>| v.map_or_else(|| "NA".to_string(), |x| format!("{:.6}", x.as_f64()));
        let num = |v: T| format!("{:.6}", v.as_f64());
        vec![
            ("Mean Average Precision (All)", "map_all", opt(self.map_all)),
            ("Mean Average Precision (Face)", "map_face", opt(self.map_face)),
            ("Mean Average Precision (Eye)", "map_eye", opt(self.map_eye)),
            ("Precision", "precision", num(self.precision)),
            ("Recall", "recall", num(self.recall)),
            ("F1-Score", "f1", num(self.f1)),
            ("Box MSE (matched pairs)", "box_mse", opt(self.box_mse)),
            ("True Positives", "tp", self.true_positives.to_string()),
            ("False Positives", "fp", self.false_positives.to_string()),
            ("False Negatives", "fn", self.false_negatives.to_string()),
            ("Zero TP", "zero_tp", self.zero_tp.to_string()),
        ]
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        self.values().into_iter().map(|(n, _, v)| (n, v)).collect()
    }

    fn keyed_rows(&self) -> Vec<(&'static str, String)> {
        self.values().into_iter().map(|(_, k, v)| (k, v)).collect()
    }
}

fn image_index<T>(gts: &[AnnotationSet<T>]) -> Result<HashMap<&str, usize>> {
    let mut index = HashMap::with_capacity(gts.len());
    for (i, s) in gts.iter().enumerate() {
        if index.insert(s.image_id.as_str(), i).is_some() {
            return Err(Error::Evaluation(format!("duplicate ground-truth image {}", s.image_id)));
        }
    }
    Ok(index)
}

fn desc_confidence<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    b.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Annotation;

    fn corners(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox<f64> {
        BBox::from_corners(x0, y0, x1, y1)
    }

    fn gt(id: &str, boxes: &[(ClassId, BBox<f64>)]) -> AnnotationSet<f64> {
        AnnotationSet {
            image_id: id.into(),
            boxes: boxes.iter().map(|&(class, bbox)| Annotation { class, bbox }).collect(),
        }
    }

    fn det(id: &str, class: ClassId, confidence: f64, bbox: BBox<f64>) -> Detection<f64> {
        Detection { image_id: id.into(), class, confidence, bbox }
    }

    #[test]
    fn iou_cases() {
        let a = corners(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &corners(5.0, 5.0, 6.0, 6.0)).unwrap(), 0.0);
        assert!((iou(&a, &corners(1.0, 1.0, 3.0, 3.0)).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(matches!(iou(&a, &corners(1.0, 1.0, 1.0, 3.0)), Err(Error::DegenerateBox)));
    }

    #[test]
    fn greedy_rules() {
        let b = BBox::new(0.5, 0.5, 0.2, 0.2);
        let gts = vec![gt("a", &[(ClassId::Face, b)])];
        let cfg = EvalConfig::default();

        let m = match_detections(&[det("a", ClassId::Face, 0.9, b)], &gts, &cfg).unwrap();
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (1, 0, 0));

        let preds = [det("a", ClassId::Face, 0.4, b), det("a", ClassId::Face, 0.8, BBox::new(0.51, 0.5, 0.2, 0.2))];
        let m = match_detections(&preds, &gts, &cfg).unwrap();
        assert_eq!(m.outcomes[1], MatchOutcome::TruePositive { image: 0, box_index: 0 });
        assert_eq!(m.outcomes[0], MatchOutcome::FalsePositive);

        let m = match_detections(&[det("a", ClassId::Eye, 1.0, b)], &gts, &cfg).unwrap();
        assert_eq!((m.true_positives, m.false_positives, m.false_negatives), (0, 1, 1));
    }

    #[test]
    fn unknown_prediction_images_are_listed() {
        let b = BBox::new(0.5, 0.5, 0.2, 0.2);
        let gts = vec![gt("a", &[(ClassId::Face, b)])];
        let preds = [det("zz", ClassId::Face, 0.5, b), det("b", ClassId::Face, 0.5, b)];
        let err = match_detections(&preds, &gts, &EvalConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "evaluation error: predictions reference images without ground truth: b, zz");
    }

    #[test]
    fn hand_computed_ap() {
        let g1 = BBox::new(0.2, 0.2, 0.1, 0.1);
        let g2 = BBox::new(0.7, 0.7, 0.1, 0.1);
        let gts = vec![gt("a", &[(ClassId::Face, g1), (ClassId::Face, g2)])];
        let preds = [
            det("a", ClassId::Face, 0.9, g1),
            det("a", ClassId::Face, 0.8, BBox::new(0.45, 0.45, 0.1, 0.1)),
            det("a", ClassId::Face, 0.7, g2),
        ];
        let ap = average_precision(&preds, &gts, ClassId::Face, &EvalConfig::default()).unwrap().unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12, "{ap}");
        assert_eq!(average_precision(&preds, &gts, ClassId::Eye, &EvalConfig::default()).unwrap(), None);
        let single = average_precision(&preds[..1], &[gt("a", &[(ClassId::Face, g1)])], ClassId::Face, &EvalConfig::default());
        assert_eq!(single.unwrap(), Some(1.0));
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gts = vec![
            gt("a", &[(ClassId::Face, BBox::new(0.5, 0.5, 0.4, 0.5)), (ClassId::Eye, BBox::new(0.4, 0.4, 0.05, 0.03))]),
            gt("b", &[(ClassId::Face, BBox::new(0.3, 0.6, 0.2, 0.3))]),
        ];
        let preds: Vec<_> = gts
            .iter()
            .flat_map(|s| s.boxes.iter().map(move |a| det(&s.image_id, a.class, 1.0, a.bbox)))
            .collect();
        let r = evaluate(&preds, &gts, &EvalConfig::default()).unwrap();
        assert_eq!(r.map_all, Some(1.0));
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.box_mse, Some(0.0));
        assert!(r.to_key_value().contains("Mean Average Precision (Eye): 1.000000"));

        let r = evaluate(&[], &gts, &EvalConfig::default()).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(r.zero_tp);
        assert_eq!(r.map_all, Some(0.0));
        assert_eq!(r.box_mse, None);
        assert!(r.to_table().contains("box_mse\tNA"));
    }

    #[test]
    fn counted_precision_and_recall() {
        // 7 ground truths, 5 hit, 3 spurious.
        let boxes: Vec<_> = (0..7).map(|i| BBox::new(0.1 + 0.12 * i as f64, 0.5, 0.08, 0.08)).collect();
        let gts = vec![gt("a", &boxes.iter().map(|&b| (ClassId::Face, b)).collect::<Vec<_>>())];
        let mut preds: Vec<_> = boxes[..5].iter().map(|&b| det("a", ClassId::Face, 0.9, b)).collect();
        for k in 0..3 {
            preds.push(det("a", ClassId::Face, 0.3, BBox::new(0.2 + 0.2 * k as f64, 0.1, 0.05, 0.05)));
        }
        let r = evaluate(&preds, &gts, &EvalConfig::default()).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (5, 3, 2));
        assert_eq!(r.precision, 0.625);
        assert!((r.recall - 5.0 / 7.0).abs() < 1e-15);
        let f1 = 2.0 * 0.625 * (5.0 / 7.0) / (0.625 + 5.0 / 7.0);
        assert!((r.f1 - f1).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig { iou_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(EvalConfig { classes: vec![3], ..Default::default() }.validate().is_err());
        assert!(EvalConfig { classes: vec![], ..Default::default() }.validate().is_err());
    }
}
