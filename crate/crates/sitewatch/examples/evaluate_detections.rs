//! Detection matching, precision/recall and average precision on a small
//! hand-built scene.
//!
//! ```bash
//! cargo run --example evaluate_detections
//! ```

use sitewatch::annotations::{BBox, StageId};
use sitewatch::metrics::{average_precision, match_detections, pr_curve, precision_recall};
use sitewatch::Result;

fn main() -> Result<()> {
    let stage = StageId::Foundation;
    let gts = vec![
        BBox::ground_truth(stage, 0.0, 0.0, 10.0, 10.0)?,
        BBox::ground_truth(stage, 20.0, 0.0, 30.0, 10.0)?,
        BBox::ground_truth(stage, 40.0, 0.0, 50.0, 10.0)?,
    ];
    let dets = vec![
        BBox::new(stage, 1.0, 0.0, 11.0, 10.0, 0.95)?,  // good hit
        BBox::new(stage, 21.0, 1.0, 31.0, 11.0, 0.80)?, // good hit
        BBox::new(stage, 60.0, 0.0, 70.0, 10.0, 0.70)?, // false positive
        BBox::new(stage, 41.0, 0.5, 51.0, 10.5, 0.40)?, // low-confidence hit
    ];

    let flags = match_detections(&dets, &gts, 0.5);
    println!("matching at IoU >= 0.5 (score, true positive):");
    for (score, tp) in &flags {
        println!("  {score:.2} -> {}", if *tp { "TP" } else { "FP" });
    }

    for thresh in [0.5, 0.75] {
        let (p, r) = precision_recall(&flags, gts.len(), thresh);
        println!("score >= {thresh}: precision {:.1}%, recall {:.1}%", 100.0 * p, 100.0 * r);
    }

    println!("\nprecision/recall curve:");
    for point in pr_curve(&flags, gts.len()) {
        println!(
            "  threshold {:.2}: P {:.3} R {:.3}",
            point.threshold, point.precision, point.recall
        );
    }

    let ap = average_precision(&dets, &gts, 0.5);
    println!("\naverage precision (all-point interpolation): {:.4}", ap);
    Ok(())
}
