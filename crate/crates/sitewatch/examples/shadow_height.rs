//! Building height from a shadow: ray-cast the shadow mask from the
//! footprint, apply `height = length × tan(elevation)`, count floors.
//! The NIR-threshold baseline shows why it was not enough.
//!
//! ```bash
//! cargo run --example shadow_height
//! ```

use sitewatch::annotations::Polygon;
use sitewatch::height::{estimate_height, nir_shadow_baseline};
use sitewatch::metrics::mask_iou;
use sitewatch::raster::{ChannelKind, RasterImage, SunMetadata};
use sitewatch::{Grid, Result};

fn main() -> Result<()> {
    // 80×80 scene at 0.5 m/px: a 12-m-tall building (4 floors at 3 m)
    // with the sun at 45° casts a 24 px shadow to the north
    let resolution = 0.5;
    let sun = SunMetadata::new(180.0, 45.0)?;
    let footprint = Polygon::rect(30.0, 50.0, 50.0, 70.0)?;
    let shadow = Grid::from_fn(80, 80, |x, y| {
        if (30..50).contains(&x) && (26..50).contains(&y) {
            1.0
        } else {
            0.0
        }
    })?;

    let est = estimate_height(&shadow, &footprint, 0, &sun, resolution, 3.0)?;
    println!(
        "shadow {:.1} m -> height {:.1} m -> {} floors (method {:?})",
        est.shadow_length_m, est.height_m, est.floors, est.method
    );

    // NIR thresholding marks every dark NIR pixel, so the pond and the tree
    // shade come back as false shadow
    let nir = Grid::from_fn(80, 80, |x, y| {
        let building_shadow = (30..50).contains(&x) && (26..50).contains(&y);
        let pond = (5..20).contains(&x) && (5..20).contains(&y);
        let tree_shade = (60..75).contains(&x) && (55..75).contains(&y);
        if building_shadow || pond || tree_shade {
            0.08
        } else {
            0.75
        }
    })?;
    let image = RasterImage::new(vec![ChannelKind::Nir], vec![nir], resolution, Some(sun))?;
    let baseline = nir_shadow_baseline(&image, 0.2)?;
    let agreement = mask_iou(&baseline, &shadow)?;
    println!(
        "NIR-threshold baseline marks {} px vs {} px of true shadow (IoU {:.2}): water and \
         tree shade pollute it",
        baseline.count_set(),
        shadow.count_set(),
        agreement
    );
    Ok(())
}
