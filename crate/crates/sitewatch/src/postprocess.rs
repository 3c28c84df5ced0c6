//! Detection and mask post-processing: greedy NMS, Soft-NMS, horizontal-flip
//! TTA merging, k-fold ensembling, and binarization.
//!
//! Suppression is per class: boxes of different stages never suppress each
//! other, so callers partition by stage (or use [`suppress_by_stage`]).
//! Score ties are broken by the lexicographically smaller
//! `(x_min, y_min, x_max, y_max)` so results are identical across platforms.

use serde::{Deserialize, Serialize};

use crate::annotations::BBox;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Suppression variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMode {
    #[default]
    Hard,
    SoftGaussian,
    SoftLinear,
}

/// Non-maximum suppression parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmsConfig {
    /// Overlap above which a box is suppressed (hard) or decayed (soft linear).
    pub iou_threshold: f64,
    pub mode: NmsMode,
    /// Gaussian decay scale for [`NmsMode::SoftGaussian`].
    pub sigma: f64,
    /// Soft-NMS drops boxes rescored below this floor.
    pub score_floor: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        NmsConfig {
            iou_threshold: 0.5,
            mode: NmsMode::Hard,
            sigma: 0.5,
            score_floor: 0.001,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::config(format!(
                "nms iou_threshold must be in [0,1], got {}",
                self.iou_threshold
            )));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::config(format!("nms sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.score_floor) {
            return Err(Error::config(format!(
                "nms score_floor must be in [0,1], got {}",
                self.score_floor
            )));
        }
        Ok(())
    }
}

/// Intersection over union of two boxes in real coordinates.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Total order: score descending, ties by smaller coordinates.
pub(crate) fn score_order(a: &BBox, b: &BBox) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.x_min.total_cmp(&b.x_min))
        .then(a.y_min.total_cmp(&b.y_min))
        .then(a.x_max.total_cmp(&b.x_max))
        .then(a.y_max.total_cmp(&b.y_max))
}

/// Greedy hard NMS: repeatedly keep the best remaining box and drop every
/// remaining box with IoU above `iou_threshold` against it.
///
/// The output is a subset of the input with unchanged scores, sorted by score
/// descending. Boxes are assumed to share one class.
pub fn nms(boxes: &[BBox], config: &NmsConfig) -> Vec<BBox> {
    let mut order: Vec<&BBox> = boxes.iter().collect();
    order.sort_by(|a, b| score_order(a, b));
    let mut kept: Vec<BBox> = Vec::new();
    let mut suppressed = vec![false; order.len()];
    for i in 0..order.len() {
        if suppressed[i] {
            continue;
        }
        kept.push(order[i].clone());
        for j in (i + 1)..order.len() {
            if !suppressed[j] && box_iou(order[i], order[j]) > config.iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Soft-NMS: instead of dropping overlapping boxes, decay their scores.
///
/// At each step the best unprocessed box is fixed and every remaining box `b`
/// is rescored by `score · f(IoU)`, with `f = exp(−IoU²/σ)` in Gaussian mode
/// and `f = 1 − IoU` (when IoU exceeds the threshold) in linear mode. Boxes
/// falling below `score_floor` are dropped. With `NmsMode::Hard` this
/// delegates to [`nms`].
pub fn soft_nms(boxes: &[BBox], config: &NmsConfig) -> Vec<BBox> {
    let decay: fn(f64, &NmsConfig) -> f64 = match config.mode {
        NmsMode::Hard => return nms(boxes, config),
        NmsMode::SoftGaussian => |iou, cfg| (-(iou * iou) / cfg.sigma).exp(),
        NmsMode::SoftLinear => |iou, cfg| if iou > cfg.iou_threshold { 1.0 - iou } else { 1.0 },
    };
    let mut pool: Vec<BBox> = boxes.to_vec();
    let mut kept: Vec<BBox> = Vec::new();
    while !pool.is_empty() {
        let best = pool
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| score_order(a, b))
            .map(|(i, _)| i)
            .unwrap();
        let seed = pool.swap_remove(best);
        for b in &mut pool {
            b.score *= decay(box_iou(&seed, b), config);
        }
        pool.retain(|b| b.score >= config.score_floor);
        kept.push(seed);
    }
    kept.sort_by(score_order);
    kept
}

/// Runs the configured suppression independently per stage and concatenates
/// the survivors in stage order.
pub fn suppress_by_stage(boxes: &[BBox], config: &NmsConfig) -> Vec<BBox> {
    let mut out = Vec::new();
    for stage in crate::annotations::STAGES {
        let class: Vec<BBox> = boxes.iter().filter(|b| b.stage == stage).cloned().collect();
        if class.is_empty() {
            continue;
        }
        let survivors = match config.mode {
            NmsMode::Hard => nms(&class, config),
            _ => soft_nms(&class, config),
        };
        out.extend(survivors);
    }
    out
}

/// Averages a model output with the (already un-mirrored) output on the
/// horizontally flipped input.
pub fn merge_hflip_tta(p_orig: &Grid, p_from_flipped: &Grid) -> Result<Grid> {
    if !p_orig.same_dims(p_from_flipped) {
        return Err(Error::invalid(format!(
            "TTA grids differ in size: {}x{} vs {}x{}",
            p_orig.width(),
            p_orig.height(),
            p_from_flipped.width(),
            p_from_flipped.height()
        )));
    }
    ensemble_folds(&[p_orig.clone(), p_from_flipped.clone()])
}

/// Per-pixel arithmetic mean over fold outputs. Needs at least one grid.
pub fn ensemble_folds(grids: &[Grid]) -> Result<Grid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::invalid("ensemble needs at least one grid".to_string()))?;
    for g in &grids[1..] {
        if !g.same_dims(first) {
            return Err(Error::invalid("ensemble grids differ in size".to_string()));
        }
    }
    let n = grids.len() as f64;
    Grid::from_fn(first.width(), first.height(), |x, y| {
        let sum: f64 = grids.iter().map(|g| g.get(x, y)).sum();
        (sum / n).clamp(0.0, 1.0)
    })
}

/// Thresholds a probability grid into a binary mask; a pixel is 1 iff its
/// value is ≥ `threshold`.
pub fn binarize(grid: &Grid, threshold: f64) -> Grid {
    Grid::from_fn(grid.width(), grid.height(), |x, y| {
        if grid.get(x, y) >= threshold {
            1.0
        } else {
            0.0
        }
    })
    .expect("binary values are in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::StageId;
    use proptest::prelude::*;

    fn boxed(x0: f64, y0: f64, x1: f64, y1: f64, score: f64) -> BBox {
        BBox::new(StageId::Foundation, x0, y0, x1, y1, score).unwrap()
    }

    #[test]
    fn iou_worked_examples() {
        let a = boxed(0.0, 0.0, 2.0, 2.0, 0.9);
        assert_eq!(box_iou(&a, &a), 1.0);
        let disjoint = boxed(5.0, 5.0, 7.0, 7.0, 0.9);
        assert_eq!(box_iou(&a, &disjoint), 0.0);
        let b = boxed(1.0, 1.0, 3.0, 3.0, 0.8);
        assert_eq!(box_iou(&a, &b), 1.0 / 7.0);
        assert_eq!(box_iou(&b, &a), 1.0 / 7.0);
    }

    #[test]
    fn nms_empty_and_disjoint() {
        let cfg = NmsConfig::default();
        assert!(nms(&[], &cfg).is_empty());
        let a = boxed(0.0, 0.0, 2.0, 2.0, 0.9);
        let b = boxed(10.0, 10.0, 12.0, 12.0, 0.8);
        assert_eq!(nms(&[a.clone(), b.clone()], &cfg), vec![a, b]);
    }

    #[test]
    fn nms_suppresses_above_threshold() {
        // IoU(A, B) = 0.6: A = (0,0)-(1,1), B = (0,0.25)-(1,1.25)
        let a = boxed(0.0, 0.0, 1.0, 1.0, 0.9);
        let b = boxed(0.0, 0.25, 1.0, 1.25, 0.8);
        assert!((box_iou(&a, &b) - 0.6).abs() < 1e-12);
        let cfg = NmsConfig::default();
        assert_eq!(nms(&[b.clone(), a.clone()], &cfg), vec![a]);
    }

    #[test]
    fn soft_nms_gaussian_worked_example() {
        let a = boxed(0.0, 0.0, 1.0, 1.0, 0.9);
        let b = boxed(0.0, 0.25, 1.0, 1.25, 0.8);
        let cfg = NmsConfig {
            mode: NmsMode::SoftGaussian,
            ..NmsConfig::default()
        };
        let out = soft_nms(&[a.clone(), b.clone()], &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], a);
        let iou = box_iou(&a, &b);
        let expected = 0.8 * (-(iou * iou) / 0.5).exp();
        assert!((expected - 0.3894).abs() < 1e-4);
        assert!((out[1].score - expected).abs() < 1e-15);
    }

    #[test]
    fn soft_nms_linear_decays_only_above_threshold() {
        let a = boxed(0.0, 0.0, 1.0, 1.0, 0.9);
        let b = boxed(0.0, 0.25, 1.0, 1.25, 0.8); // IoU 0.6
        let c = boxed(0.0, 0.8, 1.0, 1.8, 0.7); // IoU(a,c) = 0.2/1.8 ≈ 0.111
        let cfg = NmsConfig {
            mode: NmsMode::SoftLinear,
            ..NmsConfig::default()
        };
        let out = soft_nms(&[a.clone(), b.clone(), c.clone()], &cfg);
        assert_eq!(out[0], a);
        let b_out = out.iter().find(|x| x.x_min == b.x_min && x.y_min == b.y_min).unwrap();
        assert!((b_out.score - 0.8 * (1.0 - 0.6)).abs() < 1e-12);
        // c overlaps a below threshold and b above zero, but softly
        let c_out = out.iter().find(|x| x.y_min == c.y_min).unwrap();
        assert!(c_out.score <= 0.7);
    }

    #[test]
    fn soft_nms_identity_on_non_overlapping() {
        let input = vec![
            boxed(0.0, 0.0, 1.0, 1.0, 0.9),
            boxed(5.0, 0.0, 6.0, 1.0, 0.5),
            boxed(0.0, 5.0, 1.0, 6.0, 0.7),
        ];
        for mode in [NmsMode::SoftGaussian, NmsMode::SoftLinear] {
            let cfg = NmsConfig {
                mode,
                ..NmsConfig::default()
            };
            let mut out = soft_nms(&input, &cfg);
            out.sort_by(|a, b| a.x_min.total_cmp(&b.x_min).then(a.y_min.total_cmp(&b.y_min)));
            let mut expected = input.clone();
            expected.sort_by(|a, b| a.x_min.total_cmp(&b.x_min).then(a.y_min.total_cmp(&b.y_min)));
            assert_eq!(out, expected);
        }
    }

    #[test]
    fn score_floor_drops_rescored_boxes() {
        let a = boxed(0.0, 0.0, 1.0, 1.0, 0.9);
        let b = boxed(0.0, 0.001, 1.0, 1.001, 0.002); // near-total overlap, tiny score
        let cfg = NmsConfig {
            mode: NmsMode::SoftGaussian,
            ..NmsConfig::default()
        };
        let out = soft_nms(&[a.clone(), b], &cfg);
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn suppress_by_stage_keeps_classes_separate() {
        let a = BBox::new(StageId::Foundation, 0.0, 0.0, 2.0, 2.0, 0.9).unwrap();
        let mut b = a.clone();
        b.stage = StageId::Basement;
        b.score = 0.8;
        let out = suppress_by_stage(&[a.clone(), b.clone()], &NmsConfig::default());
        assert_eq!(out.len(), 2, "identical boxes of different stages both survive");
    }

    #[test]
    fn merge_examples() {
        let p = Grid::from_fn(4, 2, |x, _| x as f64 / 3.0).unwrap();
        assert_eq!(merge_hflip_tta(&p, &p).unwrap(), p);
        let zero = Grid::zeros(4, 2).unwrap();
        let one = Grid::filled(4, 2, 1.0).unwrap();
        let half = merge_hflip_tta(&zero, &one).unwrap();
        assert!(half.values().iter().all(|&v| v == 0.5));
        let other = Grid::zeros(3, 2).unwrap();
        assert!(merge_hflip_tta(&p, &other).is_err());
    }

    #[test]
    fn left_half_merged_with_mirror_is_uniform_half() {
        let left = Grid::from_fn(6, 4, |x, _| if x < 3 { 1.0 } else { 0.0 }).unwrap();
        let mirrored = Grid::from_fn(6, 4, |x, y| left.get(5 - x, y)).unwrap();
        let merged = merge_hflip_tta(&left, &mirrored).unwrap();
        assert!(merged.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ensemble_examples() {
        let g = Grid::filled(2, 2, 0.3).unwrap();
        assert_eq!(ensemble_folds(std::slice::from_ref(&g)).unwrap(), g);
        let five = vec![g.clone(); 5];
        assert_eq!(ensemble_folds(&five).unwrap(), g);
        let grids: Vec<Grid> = [0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|&v| Grid::filled(1, 1, v).unwrap())
            .collect();
        let mean = ensemble_folds(&grids).unwrap();
        assert!((mean.get(0, 0) - 0.3).abs() < 1e-12);
        assert!(ensemble_folds(&[]).is_err());
    }

    #[test]
    fn binarize_boundary_conventions() {
        let g = Grid::filled(2, 2, 0.7).unwrap();
        assert!(binarize(&g, 0.5).values().iter().all(|&v| v == 1.0));
        let z = Grid::zeros(2, 2).unwrap();
        assert!(binarize(&z, 0.0).values().iter().all(|&v| v == 1.0));
        let h = Grid::filled(1, 1, 0.5).unwrap();
        assert_eq!(binarize(&h, 0.5).get(0, 0), 1.0);
        assert_eq!(binarize(&h, 0.50001).get(0, 0), 0.0);
    }

    // scores stay above the default soft-NMS floor so drops only come from decay
    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0f64..40.0, 0.0f64..40.0, 0.5f64..20.0, 0.5f64..20.0, 0.01f64..=1.0).prop_map(
            |(x, y, w, h, s)| BBox::new(StageId::Foundation, x, y, x + w, y + h, s).unwrap(),
        )
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = box_iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab.to_bits(), box_iou(&b, &a).to_bits());
        }

        #[test]
        fn nms_survivors_pairwise_below_threshold(
            boxes in proptest::collection::vec(arb_box(), 0..30),
            thr in 0.1f64..0.9,
        ) {
            let cfg = NmsConfig { iou_threshold: thr, ..NmsConfig::default() };
            let kept = nms(&boxes, &cfg);
            for i in 0..kept.len() {
                for j in (i + 1)..kept.len() {
                    prop_assert!(box_iou(&kept[i], &kept[j]) <= thr);
                }
            }
        }

        #[test]
        fn soft_nms_never_increases_scores_and_keeps_top(
            boxes in proptest::collection::vec(arb_box(), 1..30),
        ) {
            let cfg = NmsConfig { mode: NmsMode::SoftGaussian, ..NmsConfig::default() };
            let out = soft_nms(&boxes, &cfg);
            let top = boxes
                .iter()
                .cloned()
                .min_by(score_order)
                .unwrap();
            prop_assert_eq!(out[0].clone(), top.clone());
            prop_assert!(out.iter().all(|b| b.score <= top.score));
        }

        #[test]
        fn ensemble_is_permutation_invariant(
            vals in proptest::collection::vec(0.0f64..=1.0, 2..6),
        ) {
            let grids: Vec<Grid> = vals.iter().map(|&v| Grid::filled(3, 3, v).unwrap()).collect();
            let mut reversed = grids.clone();
            reversed.reverse();
            let a = ensemble_folds(&grids).unwrap();
            let b = ensemble_folds(&reversed).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
