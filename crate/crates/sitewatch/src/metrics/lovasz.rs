//! Lovász extension of the Jaccard loss: hinge form for real-valued scores,
//! probability-space form for per-class errors, and the symmetric two-class
//! average used as the segmentation training loss.
//!
//! Everything is built from one primitive, [`lovasz_grad`]: the cumulative
//! Jaccard-loss differences over ground truth sorted by descending prediction
//! error. Sorting is stable so tied errors produce deterministic gradients.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Gradient weights of the Jaccard-loss Lovász extension.
///
/// Input is the binary ground truth permuted by descending prediction error.
/// With `p = Σ gt`, prefix intersections `p − cumsum(gt)` and prefix unions
/// `p + cumsum(1 − gt)` give prefix Jaccard losses `J_i`; the weights are the
/// consecutive differences `g_1 = J_1`, `g_i = J_i − J_{i−1}`, so the weight
/// vector telescopes: its sum equals `J_n`.
pub fn lovasz_grad(gt_sorted: &[bool]) -> Vec<f64> {
    let p = gt_sorted.iter().filter(|&&g| g).count() as f64;
    let mut grad = Vec::with_capacity(gt_sorted.len());
    let mut cum_pos = 0.0;
    let mut cum_neg = 0.0;
    let mut prev = 0.0;
    for &g in gt_sorted {
        if g {
            cum_pos += 1.0;
        } else {
            cum_neg += 1.0;
        }
        let intersection = p - cum_pos;
        let union = p + cum_neg;
        let jaccard = 1.0 - intersection / union;
        grad.push(jaccard - prev);
        prev = jaccard;
    }
    grad
}

/// Lovász hinge loss with its analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeLoss {
    pub loss: f64,
    /// ∂loss/∂scoreᵢ, from the same sorted construction as the loss.
    pub gradient: Vec<f64>,
}

/// Lovász hinge over real-valued scores against binary ground truth.
///
/// Signs are `s = 2·gt − 1`, hinge margins `m = 1 − s·score`; margins are
/// stable-sorted descending and the loss is `Σ relu(m_sorted) · g` with `g`
/// from [`lovasz_grad`] on the identically permuted ground truth. The
/// gradient is `−s·g` wherever the margin is active (`m > 0`), zero
/// elsewhere; it is exact away from margin zeros and sort ties.
pub fn lovasz_hinge_loss(scores: &[f64], gt: &[bool]) -> Result<HingeLoss> {
    if scores.len() != gt.len() {
        return Err(Error::invalid(format!(
            "scores and ground truth differ in length: {} vs {}",
            scores.len(),
            gt.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("lovasz hinge needs at least one element".to_string()));
    }
    let margins: Vec<f64> = scores
        .iter()
        .zip(gt)
        .map(|(&f, &g)| {
            let sign = if g { 1.0 } else { -1.0 };
            1.0 - sign * f
        })
        .collect();
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]));
    let gt_sorted: Vec<bool> = order.iter().map(|&i| gt[i]).collect();
    let grad = lovasz_grad(&gt_sorted);
    let mut loss = 0.0;
    let mut gradient = vec![0.0; scores.len()];
    for (rank, &i) in order.iter().enumerate() {
        if margins[i] > 0.0 {
            loss += margins[i] * grad[rank];
            let sign = if gt[i] { 1.0 } else { -1.0 };
            gradient[i] = -sign * grad[rank];
        }
    }
    Ok(HingeLoss { loss, gradient })
}

/// Probability-space Lovász-Jaccard loss for one class.
///
/// Errors are `|gt − prob|`; at hard binary predictions this equals the
/// Jaccard loss `1 − IoU(prediction, gt)` exactly, and it relates to the
/// hinge by `lovasz_hinge(2·prob − 1, gt) = 2 · lovasz_jaccard(prob, gt)`.
pub fn lovasz_jaccard(prob: &[f64], gt: &[bool]) -> Result<f64> {
    if prob.len() != gt.len() {
        return Err(Error::invalid(format!(
            "probabilities and ground truth differ in length: {} vs {}",
            prob.len(),
            gt.len()
        )));
    }
    if prob.is_empty() {
        return Err(Error::invalid("lovasz jaccard needs at least one element".to_string()));
    }
    let errors: Vec<f64> = prob
        .iter()
        .zip(gt)
        .map(|(&p, &g)| (if g { 1.0 } else { 0.0 } - p).abs())
        .collect();
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]));
    let gt_sorted: Vec<bool> = order.iter().map(|&i| gt[i]).collect();
    let grad = lovasz_grad(&gt_sorted);
    Ok(order
        .iter()
        .zip(&grad)
        .map(|(&i, &g)| errors[i] * g)
        .sum())
}

/// Symmetric segmentation loss: the mean of the Lovász hinge applied to the
/// foreground class (`scores = 2·prob − 1` against `gt`) and to the
/// background class (`scores = 1 − 2·prob` against the complement).
///
/// Swapping `(prob, gt) → (1 − prob, 1 − gt)` leaves the loss unchanged by
/// construction. Ground truth uses the ≥ 0.5 set convention.
pub fn lovasz_softmax_symmetric(prob: &Grid, gt: &Grid) -> Result<f64> {
    if !prob.same_dims(gt) {
        return Err(Error::invalid(format!(
            "probability grid {}x{} vs ground truth {}x{}",
            prob.width(),
            prob.height(),
            gt.width(),
            gt.height()
        )));
    }
    let gt_fg: Vec<bool> = gt.values().iter().map(|&v| v >= 0.5).collect();
    let gt_bg: Vec<bool> = gt_fg.iter().map(|&g| !g).collect();
    let fg_scores: Vec<f64> = prob.values().iter().map(|&p| 2.0 * p - 1.0).collect();
    let bg_scores: Vec<f64> = prob.values().iter().map(|&p| 1.0 - 2.0 * p).collect();
    let fg = lovasz_hinge_loss(&fg_scores, &gt_fg)?.loss;
    let bg = lovasz_hinge_loss(&bg_scores, &gt_bg)?.loss;
    Ok((fg + bg) / 2.0)
}
