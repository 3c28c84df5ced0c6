//! Full scene assessment: suppression → stage evidence → stage resolution →
//! height → total progress, printed as the site report JSON.
//!
//! ```bash
//! cargo run --example assess_scene
//! ```

use sitewatch::annotations::{BBox, Polygon, StageId};
use sitewatch::progress::{assess_scene, AssessConfig, ModelOutputs, SceneInputs};
use sitewatch::raster::{ChannelKind, RasterImage, SunMetadata};
use sitewatch::{Grid, Result};

fn main() -> Result<()> {
    // a frame going up on the north half of the site, shadow says two storeys
    let sun = SunMetadata::new(180.0, 45.0)?;
    let image = RasterImage::new(
        vec![ChannelKind::Red],
        vec![Grid::filled(64, 64, 0.4)?],
        0.5,
        Some(sun),
    )?;
    let scene = SceneInputs {
        scene_id: "demo-site".to_string(),
        image,
        site: Some(Polygon::rect(8.0, 8.0, 56.0, 56.0)?),
        footprint: Some(Polygon::rect(20.0, 36.0, 36.0, 48.0)?),
    };

    let outputs = ModelOutputs {
        boxes: vec![
            BBox::new(StageId::Foundation, 12.0, 36.0, 40.0, 52.0, 0.81)?,
            BBox::new(StageId::Foundation, 13.0, 37.0, 41.0, 53.0, 0.66)?, // duplicate, NMS eats it
        ],
        frame_prob: Some(Grid::from_fn(64, 64, |x, y| {
            if (8..56).contains(&x) && (8..32).contains(&y) {
                0.9
            } else {
                0.1
            }
        })?),
        shadow_prob: Some(Grid::from_fn(64, 64, |x, y| {
            if (20..36).contains(&x) && (24..36).contains(&y) {
                0.85
            } else {
                0.05
            }
        })?),
        non_landscaped_prob: None,
    };

    let report = assess_scene(&scene, &outputs, &AssessConfig::default(), true)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    println!(
        "\nresolved: {} at {:.0}% intra-stage, total progress {:.1}%",
        report.resolved_stage_name,
        100.0 * report.intra_stage_fraction,
        report.total_progress_percent
    );
    Ok(())
}
