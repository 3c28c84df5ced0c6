//! Hard NMS against the two Soft-NMS variants on a cluster of overlapping
//! detections.
//!
//! ```bash
//! cargo run --example suppress_detections
//! ```

use sitewatch::annotations::{BBox, StageId};
use sitewatch::postprocess::{box_iou, nms, soft_nms, NmsConfig, NmsMode};
use sitewatch::Result;

fn main() -> Result<()> {
    let stage = StageId::RoofCompletedHouse;
    let detections = vec![
        BBox::new(stage, 10.0, 10.0, 30.0, 28.0, 0.92)?,
        BBox::new(stage, 12.0, 11.0, 31.0, 30.0, 0.85)?, // heavy overlap with the first
        BBox::new(stage, 16.0, 14.0, 34.0, 32.0, 0.60)?, // moderate overlap
        BBox::new(stage, 60.0, 40.0, 80.0, 58.0, 0.75)?, // separate building
    ];
    println!("input detections:");
    for d in &detections {
        println!(
            "  score {:.2} at ({:.0},{:.0})-({:.0},{:.0}), IoU with best {:.3}",
            d.score,
            d.x_min,
            d.y_min,
            d.x_max,
            d.y_max,
            box_iou(&detections[0], d)
        );
    }

    let hard = NmsConfig::default();
    println!("\nhard NMS at IoU > {}:", hard.iou_threshold);
    for d in nms(&detections, &hard) {
        println!("  kept score {:.3} at ({:.0},{:.0})", d.score, d.x_min, d.y_min);
    }

    for mode in [NmsMode::SoftGaussian, NmsMode::SoftLinear] {
        let cfg = NmsConfig {
            mode,
            ..NmsConfig::default()
        };
        println!("\nsoft NMS ({mode:?}, sigma {}, floor {}):", cfg.sigma, cfg.score_floor);
        for d in soft_nms(&detections, &cfg) {
            println!("  kept score {:.3} at ({:.0},{:.0})", d.score, d.x_min, d.y_min);
        }
    }
    Ok(())
}
