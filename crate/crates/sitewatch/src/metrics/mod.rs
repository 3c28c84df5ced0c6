//! Evaluation and loss mathematics: mask IoU, the Lovász losses, detection
//! matching, precision/recall, average precision, and the log-linear
//! learning-curve fit.

mod lovasz;

pub use lovasz::{lovasz_grad, lovasz_hinge_loss, lovasz_jaccard, lovasz_softmax_symmetric, HingeLoss};

use serde::{Deserialize, Serialize};

use crate::annotations::{BBox, StageId};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::postprocess::{box_iou, score_order};

/// Intersection over union of two binary masks, with `1.0` when both are
/// empty (a correct "nothing here" prediction is not penalized).
pub fn mask_iou(pred: &Grid, gt: &Grid) -> Result<f64> {
    if !pred.same_dims(gt) {
        return Err(Error::invalid(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in pred.values().iter().zip(gt.values()) {
        let (a, b) = (*a >= 0.5, *b >= 0.5);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Pooled mask IoU over many prediction/ground-truth pairs: aggregate
/// intersection over aggregate union rather than a per-image mean.
pub fn pooled_mask_iou<'a>(pairs: impl IntoIterator<Item = (&'a Grid, &'a Grid)>) -> Result<f64> {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (pred, gt) in pairs {
        if !pred.same_dims(gt) {
            return Err(Error::invalid("mask dimensions differ".to_string()));
        }
        for (a, b) in pred.values().iter().zip(gt.values()) {
            let (a, b) = (*a >= 0.5, *b >= 0.5);
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Pixel-level precision and recall of a binary mask, with the vacuous cases
/// defined as 1.0 (no positive predictions → precision 1, no positive ground
/// truth → recall 1).
pub fn pixel_precision_recall(pred: &Grid, gt: &Grid) -> Result<(f64, f64)> {
    if !pred.same_dims(gt) {
        return Err(Error::invalid("mask dimensions differ".to_string()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (a, b) in pred.values().iter().zip(gt.values()) {
        let (a, b) = (*a >= 0.5, *b >= 0.5);
        tp += (a && b) as usize;
        fp += (a && !b) as usize;
        fn_ += (!a && b) as usize;
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    Ok((precision, recall))
}

/// Greedy detection/ground-truth matching.
///
/// Detections are visited in descending score order (ties broken by
/// coordinates); each one is a true positive iff its best-IoU *unmatched*
/// ground truth reaches `iou_thresh`, and that ground truth is then consumed.
/// Returns `(score, is_tp)` per detection in visit order. Both sides are
/// assumed to share one class.
pub fn match_detections(dets: &[BBox], gts: &[BBox], iou_thresh: f64) -> Vec<(f64, bool)> {
    let mut order: Vec<&BBox> = dets.iter().collect();
    order.sort_by(|a, b| score_order(a, b));
    let mut matched = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(order.len());
    for det in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if matched[gi] {
                continue;
            }
            let iou = box_iou(det, gt);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let tp = match best {
            Some((gi, iou)) if iou >= iou_thresh => {
                matched[gi] = true;
                true
            }
            _ => false,
        };
        flags.push((det.score, tp));
    }
    flags
}

/// Precision and recall over the detections passing a score threshold.
///
/// Precision is 1.0 when nothing passes; recall is 1.0 when there is no
/// ground truth to find.
pub fn precision_recall(flags: &[(f64, bool)], n_gt: usize, score_thresh: f64) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &(score, is_tp) in flags {
        if score >= score_thresh {
            if is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if n_gt == 0 { 1.0 } else { tp as f64 / n_gt as f64 };
    (precision, recall)
}

/// One point of a precision/recall curve at a score threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrCurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct detection score, descending threshold.
/// Recall is non-increasing as the threshold rises.
pub fn pr_curve(flags: &[(f64, bool)], n_gt: usize) -> Vec<PrCurvePoint> {
    let mut thresholds: Vec<f64> = flags.iter().map(|f| f.0).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds
        .iter()
        .rev()
        .map(|&t| {
            let (precision, recall) = precision_recall(flags, n_gt, t);
            PrCurvePoint {
                threshold: t,
                precision,
                recall,
            }
        })
        .collect()
}

/// Average precision with all-point interpolation: the precision envelope is
/// made non-increasing from the right and summed over recall increments.
/// Returns 0.0 when there is no ground truth to recall.
pub fn average_precision(dets: &[BBox], gts: &[BBox], iou_thresh: f64) -> f64 {
    average_precision_from_flags(match_detections(dets, gts, iou_thresh), gts.len())
}

/// AP over pre-matched flags, e.g. concatenated across scenes (matching is
/// per scene, the PR curve is pooled). Flags are re-sorted by score here.
pub fn average_precision_from_flags(mut flags: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    if n_gt == 0 || flags.is_empty() {
        return 0.0;
    }
    flags.sort_by(|a, b| b.0.total_cmp(&a.0));
    let n_gt = n_gt as f64;
    let mut tp = 0.0;
    let mut precisions = Vec::with_capacity(flags.len());
    let mut recalls = Vec::with_capacity(flags.len());
    for (k, &(_, is_tp)) in flags.iter().enumerate() {
        if is_tp {
            tp += 1.0;
        }
        precisions.push(tp / (k + 1) as f64);
        recalls.push(tp / n_gt);
    }
    let mut envelope = precisions;
    for k in (0..envelope.len() - 1).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (k, &env) in envelope.iter().enumerate() {
        ap += (recalls[k] - prev_recall) * env;
        prev_recall = recalls[k];
    }
    ap
}

/// Mean AP over the stages that appear in the ground truth.
pub fn mean_average_precision(dets: &[BBox], gts: &[BBox], iou_thresh: f64) -> f64 {
    let mut aps = Vec::new();
    for stage in crate::annotations::STAGES {
        let class_gts: Vec<BBox> = gts.iter().filter(|b| b.stage == stage).cloned().collect();
        if class_gts.is_empty() {
            continue;
        }
        let class_dets: Vec<BBox> = dets.iter().filter(|b| b.stage == stage).cloned().collect();
        aps.push(average_precision(&class_dets, &class_gts, iou_thresh));
    }
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// A holdout metric measured at a training-set size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurvePoint {
    pub n_samples: u64,
    pub metric: f64,
}

impl LearningCurvePoint {
    pub fn new(n_samples: u64, metric: f64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::validation("n_samples must be at least 1".to_string()));
        }
        if !metric.is_finite() || !(0.0..=1.0).contains(&metric) {
            return Err(Error::validation(format!("metric out of [0,1]: {metric}")));
        }
        Ok(LearningCurvePoint { n_samples, metric })
    }
}

/// Default tolerance for plateau detection.
pub const DEFAULT_PLATEAU_EPSILON: f64 = 0.005;

/// Least-squares fit of `metric = slope · log10(n) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub rmse: f64,
    /// Smallest n after which no later point improves the metric by more
    /// than the plateau epsilon; absent while the curve still grows.
    pub plateau_n: Option<u64>,
}

/// Fits the log-linear learning curve and locates the growth plateau.
///
/// Needs at least three points with distinct sample counts.
pub fn fit_learning_curve(
    points: &[LearningCurvePoint],
    plateau_epsilon: f64,
) -> Result<LearningCurveFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "learning-curve fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.n_samples);
    if pts.windows(2).any(|w| w[0].n_samples == w[1].n_samples) {
        return Err(Error::invalid("duplicate n_samples in learning-curve points".to_string()));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| (p.n_samples as f64).log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.metric).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - x_mean) * (y - y_mean);
        sxx += (x - x_mean) * (x - x_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let rmse = (sse / n).sqrt();

    let mut plateau_n = None;
    for i in 0..pts.len() - 1 {
        let later_max = pts[i + 1..]
            .iter()
            .map(|p| p.metric)
            .fold(f64::NEG_INFINITY, f64::max);
        if later_max - pts[i].metric <= plateau_epsilon {
            plateau_n = Some(pts[i].n_samples);
            break;
        }
    }
    Ok(LearningCurveFit {
        slope,
        intercept,
        rmse,
        plateau_n,
    })
}

/// One row of the per-stage evaluation report. Percent scale throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageMetricsRow {
    pub stage: StageId,
    pub name: String,
    pub label_type: String,
    pub precision: f64,
    pub recall: f64,
    /// Average precision; box stages only.
    pub ap: Option<f64>,
    /// Per-image mean mask IoU; segmentation stages only.
    pub iou: Option<f64>,
}

/// Per-stage evaluation table emitted by `sitewatch evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub schema: u32,
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub rows: Vec<StageMetricsRow>,
}
