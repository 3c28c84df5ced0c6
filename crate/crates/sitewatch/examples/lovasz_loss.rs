//! The symmetric Lovász loss on masks of varying quality, plus a finite
//! difference check of the analytic hinge gradient.
//!
//! ```bash
//! cargo run --example lovasz_loss
//! ```

use sitewatch::metrics::{lovasz_hinge_loss, lovasz_jaccard, lovasz_softmax_symmetric, mask_iou};
use sitewatch::postprocess::binarize;
use sitewatch::{Grid, Result};

fn main() -> Result<()> {
    let gt = Grid::from_fn(32, 32, |x, y| {
        if (8..24).contains(&x) && (10..22).contains(&y) {
            1.0
        } else {
            0.0
        }
    })?;

    println!("symmetric Lovász loss as prediction quality degrades:");
    for (label, shift) in [("perfect", 0u32), ("2 px off", 2), ("6 px off", 6), ("12 px off", 12)] {
        let pred = Grid::from_fn(32, 32, |x, y| {
            if (8 + shift..24 + shift).contains(&x) && (10..22).contains(&y) {
                0.95
            } else {
                0.05
            }
        })?;
        let loss = lovasz_softmax_symmetric(&pred, &gt)?;
        let iou = mask_iou(&binarize(&pred, 0.5), &gt)?;
        println!("  {label:>9}: loss {loss:.4}, mask IoU {iou:.3}");
    }

    // at hard predictions the per-class loss ties exactly to the Jaccard loss
    let hard = binarize(
        &Grid::from_fn(32, 32, |x, y| if (12..28).contains(&x) && (10..22).contains(&y) { 1.0 } else { 0.0 })?,
        0.5,
    );
    let gt_bits: Vec<bool> = gt.values().iter().map(|&v| v >= 0.5).collect();
    let fg = lovasz_jaccard(hard.values(), &gt_bits)?;
    let iou = mask_iou(&hard, &gt)?;
    println!("\nhard prediction: foreground Lovász {fg:.6} == 1 - IoU {:.6}", 1.0 - iou);

    // gradient vs central differences at a generic point
    let scores = [0.7, -1.3, 0.2, -0.4, 1.9, -2.2];
    let labels = [true, false, true, true, false, false];
    let out = lovasz_hinge_loss(&scores, &labels)?;
    println!("\nhinge loss {:.6}; gradient check (analytic vs central difference):", out.loss);
    let h = 1e-5;
    for j in 0..scores.len() {
        let mut plus = scores;
        plus[j] += h;
        let mut minus = scores;
        minus[j] -= h;
        let fd = (lovasz_hinge_loss(&plus, &labels)?.loss - lovasz_hinge_loss(&minus, &labels)?.loss)
            / (2.0 * h);
        println!("  d/ds[{j}]: {:.6} vs {fd:.6}", out.gradient[j]);
    }
    Ok(())
}
