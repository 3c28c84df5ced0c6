//! How much segmentation quality survives when imagery is degraded to a
//! coarser ground resolution: labels stay at the labeling resolution, the
//! prediction comes from the degraded image.
//!
//! ```bash
//! cargo run --example resolution_tradeoff
//! ```

use sitewatch::metrics::mask_iou;
use sitewatch::postprocess::binarize;
use sitewatch::raster::{degrade_resolution, ChannelKind, RasterImage};
use sitewatch::{Grid, Result};

/// Nearest-neighbor blow-up back to label resolution, for comparison only.
fn nearest_upsample(g: &Grid, w: u32, h: u32) -> Result<Grid> {
    Grid::from_fn(w, h, |x, y| {
        let sx = (x as u64 * g.width() as u64 / w as u64) as u32;
        let sy = (y as u64 * g.height() as u64 / h as u64) as u32;
        g.get(sx.min(g.width() - 1), sy.min(g.height() - 1))
    })
}

fn main() -> Result<()> {
    // 0.3 m/px scene: one building block plus thin walls that blur away
    let (w, h) = (240u32, 240u32);
    let truth = |x: u32, y: u32| -> bool {
        let block = (60..150).contains(&x) && (90..170).contains(&y);
        let thin_wall = (170..230).contains(&x) && y % 24 < 2;
        block || thin_wall
    };
    let plane = Grid::from_fn(w, h, |x, y| if truth(x, y) { 0.85 } else { 0.15 })?;
    let gt_mask = binarize(&plane, 0.5);
    let scene = RasterImage::new(vec![ChannelKind::Red], vec![plane], 0.3, None)?;

    println!("ground truth labeled at 0.3 m/px; inference quality by resolution:");
    for target in [0.3, 0.5, 0.8, 1.0, 1.5] {
        let degraded = degrade_resolution(&scene, target)?;
        // "model output" = the degraded channel itself, thresholded
        let predicted = binarize(&degraded.planes()[0], 0.5);
        let back_at_label_res = nearest_upsample(&predicted, w, h)?;
        let iou = mask_iou(&back_at_label_res, &gt_mask)?;
        println!(
            "  {target:>4.1} m/px ({:>3}x{:<3}): IoU {:.1}%",
            degraded.width(),
            degraded.height(),
            100.0 * iou
        );
    }
    Ok(())
}
