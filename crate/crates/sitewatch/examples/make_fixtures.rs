//! Regenerates the synthetic fixture set used by the integration tests and
//! the README walkthrough:
//!
//! ```bash
//! cargo run --example make_fixtures -- crates/sitewatch/tests/fixtures
//! ```
//!
//! Three scenes: a blank lot, a finished house estate mid-landscaping, and a
//! building frame at 50% with a two-storey shadow. Plus manifests, model
//! outputs, predictions, a learning-curve CSV and the pseudo-labeling splits.

use std::fs;
use std::path::Path;

use sitewatch::annotations::{
    save_manifest, AnnotatedMask, BBox, ManifestEntry, MaskGrid, Polygon, SceneAnnotation,
    StageId,
};
use sitewatch::pipeline::PipelineConfig;
use sitewatch::raster::{save_grid_png, save_image, ChannelKind, GrayDepth, RasterImage, SunMetadata};
use sitewatch::{Grid, Result};

const LAWN: [f64; 4] = [0.35, 0.60, 0.30, 0.85]; // r, g, b, nir
const SOIL: [f64; 4] = [0.55, 0.45, 0.35, 0.60];
const ROOF: [f64; 4] = [0.85, 0.30, 0.25, 0.40];
const FRAME: [f64; 4] = [0.75, 0.75, 0.78, 0.45];
const SHADOW: [f64; 4] = [0.08, 0.08, 0.10, 0.08];
const CONCRETE: [f64; 4] = [0.65, 0.65, 0.65, 0.50];

struct Painter {
    w: u32,
    h: u32,
    planes: Vec<Vec<f64>>,
}

impl Painter {
    fn new(w: u32, h: u32, base: [f64; 4]) -> Self {
        Painter {
            w,
            h,
            planes: base.iter().map(|&v| vec![v; (w * h) as usize]).collect(),
        }
    }

    fn rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32, color: [f64; 4]) {
        for y in y0..y1.min(self.h) {
            for x in x0..x1.min(self.w) {
                for (plane, &v) in self.planes.iter_mut().zip(&color) {
                    plane[(y * self.w + x) as usize] = v;
                }
            }
        }
    }

    fn into_image(self, resolution: f64, sun: Option<SunMetadata>) -> Result<RasterImage> {
        let planes = self
            .planes
            .into_iter()
            .map(|values| Grid::from_values(self.w, self.h, values))
            .collect::<Result<Vec<_>>>()?;
        RasterImage::new(
            vec![ChannelKind::Red, ChannelKind::Green, ChannelKind::Blue, ChannelKind::Nir],
            planes,
            resolution,
            sun,
        )
    }
}

fn rect_mask(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Grid {
    Grid::from_fn(w, h, |x, y| {
        if x >= x0 && x < x1 && y >= y0 && y < y1 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}

/// Four finished houses on a lawn; the bottom band is still bare soil.
fn house_scene() -> Result<RasterImage> {
    let mut p = Painter::new(64, 64, LAWN);
    p.rect(0, 28, 64, 64, SOIL); // not yet landscaped
    for &(hx, hy) in &HOUSES {
        p.rect(hx, hy.saturating_sub(6), hx + 14, hy, SHADOW);
        p.rect(hx, hy, hx + 14, hy + 10, ROOF);
    }
    p.into_image(0.5, Some(SunMetadata::new(180.0, 45.0)?))
}

const HOUSES: [(u32, u32); 4] = [(6, 10), (34, 10), (6, 46), (34, 46)];

/// One building frame at 50% site coverage plus a 12 px (two-storey) shadow.
fn frame_scene() -> Result<RasterImage> {
    let mut p = Painter::new(64, 64, SOIL);
    p.rect(8, 8, 56, 32, FRAME);
    p.rect(20, 24, 36, 36, SHADOW);
    p.rect(20, 36, 36, 48, CONCRETE); // the building casting the shadow
    p.into_image(0.5, Some(SunMetadata::new(180.0, 45.0)?))
}

fn blank_scene() -> Result<RasterImage> {
    Painter::new(48, 48, SOIL).into_image(0.5, Some(SunMetadata::new(135.0, 40.0)?))
}

/// Tiny scene whose mask is exactly `red channel ≥ 0.5`, as the mock models
/// expect.
fn pseudo_scene(offset: u32) -> (RasterImage, Grid) {
    let plane = Grid::from_fn(16, 16, |x, y| {
        if (x + offset) % 7 < 3 && y % 2 == 0 {
            0.9
        } else {
            0.1
        }
    })
    .unwrap();
    let mask = Grid::from_fn(16, 16, |x, y| {
        if (x + offset) % 7 < 3 && y % 2 == 0 {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let image = RasterImage::new(vec![ChannelKind::Red], vec![plane], 1.0, None).unwrap();
    (image, mask)
}

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures".to_string());
    let out = Path::new(&out);
    let scenes = out.join("scenes");
    let outputs = out.join("outputs");
    let pseudo = out.join("pseudo");
    for dir in [&scenes, &outputs, &pseudo] {
        fs::create_dir_all(dir)?;
    }

    save_image(&scenes.join("blank.png"), &blank_scene()?)?;
    save_image(&scenes.join("house.png"), &house_scene()?)?;
    save_image(&scenes.join("frame.png"), &frame_scene()?)?;

    // ground truth: 4 roof boxes, the non-landscaped band, the frame mask,
    // and the frame building's footprint
    let mut house_ann = SceneAnnotation::empty("house");
    for &(hx, hy) in &HOUSES {
        house_ann.boxes.push(BBox::ground_truth(
            StageId::RoofCompletedHouse,
            hx as f64,
            hy as f64,
            (hx + 14) as f64,
            (hy + 10) as f64,
        )?);
        house_ann
            .footprints
            .push(Polygon::rect(hx as f64, hy as f64, (hx + 14) as f64, (hy + 10) as f64)?);
    }
    let soil_poly = Polygon::rect(0.0, 28.0, 64.0, 64.0)?;
    house_ann.masks.push(AnnotatedMask {
        mask: MaskGrid::new(StageId::Landscaping, rect_mask(64, 64, 0, 28, 64, 64)),
        source_polygon: Some(soil_poly),
    });

    let mut frame_ann = SceneAnnotation::empty("frame");
    let frame_poly = Polygon::rect(8.0, 8.0, 56.0, 32.0)?;
    frame_ann.masks.push(AnnotatedMask {
        mask: MaskGrid::new(StageId::BuildingFrame, rect_mask(64, 64, 8, 8, 56, 32)),
        source_polygon: Some(frame_poly),
    });
    frame_ann
        .footprints
        .push(Polygon::rect(20.0, 36.0, 36.0, 48.0)?);

    save_manifest(
        &out.join("manifest.json"),
        &[
            ManifestEntry {
                image: "scenes/blank.png".to_string(),
                annotation: SceneAnnotation::empty("blank"),
            },
            ManifestEntry {
                image: "scenes/house.png".to_string(),
                annotation: house_ann,
            },
            ManifestEntry {
                image: "scenes/frame.png".to_string(),
                annotation: frame_ann,
            },
        ],
    )?;

    // model outputs for `assess`
    fs::write(out.join("outputs/blank.outputs.json"), "{}\n")?;

    let non_landscaped = rect_mask(64, 64, 0, 28, 64, 64);
    save_grid_png(&outputs.join("house_nonlandscaped.png"), &non_landscaped, GrayDepth::Eight)?;
    let mut house_boxes = Vec::new();
    for (i, &(hx, hy)) in HOUSES.iter().enumerate() {
        house_boxes.push(format!(
            r#"{{"stage": 5, "x_min": {}, "y_min": {}, "x_max": {}, "y_max": {}, "score": {}}}"#,
            hx,
            hy,
            hx + 14,
            hy + 10,
            0.95 - 0.03 * i as f64
        ));
    }
    fs::write(
        out.join("outputs/house.outputs.json"),
        format!(
            "{{\n  \"boxes\": [{}],\n  \"non_landscaped_prob_png\": \"house_nonlandscaped.png\"\n}}\n",
            house_boxes.join(", ")
        ),
    )?;

    let frame_prob = rect_mask(64, 64, 8, 8, 56, 32);
    let shadow_prob = rect_mask(64, 64, 20, 24, 36, 36);
    save_grid_png(&outputs.join("frame_prob.png"), &frame_prob, GrayDepth::Eight)?;
    save_grid_png(&outputs.join("frame_shadow.png"), &shadow_prob, GrayDepth::Eight)?;
    fs::write(
        out.join("outputs/frame.outputs.json"),
        r#"{
  "frame_prob_png": "frame_prob.png",
  "shadow_prob_png": "frame_shadow.png",
  "site_polygon": [[8.0, 8.0], [56.0, 8.0], [56.0, 56.0], [8.0, 56.0]],
  "footprint": [[20.0, 36.0], [36.0, 36.0], [36.0, 48.0], [20.0, 48.0]]
}
"#,
    )?;

    // predictions for `evaluate`: 3 matched roofs, 1 false positive, both
    // ground-truth masks reproduced exactly
    save_grid_png(
        &out.join("pred_nonlandscaped.png"),
        &rect_mask(64, 64, 0, 28, 64, 64),
        GrayDepth::Eight,
    )?;
    save_grid_png(
        &out.join("pred_frame.png"),
        &rect_mask(64, 64, 8, 8, 56, 32),
        GrayDepth::Eight,
    )?;
    let mut pred_boxes: Vec<String> = HOUSES
        .iter()
        .take(3)
        .enumerate()
        .map(|(i, &(hx, hy))| {
            format!(
                r#"{{"stage": 5, "x_min": {}, "y_min": {}, "x_max": {}, "y_max": {}, "score": {}}}"#,
                hx,
                hy,
                hx + 14,
                hy + 10,
                0.95 - 0.03 * i as f64
            )
        })
        .collect();
    pred_boxes.push(
        r#"{"stage": 5, "x_min": 50, "y_min": 28, "x_max": 62, "y_max": 36, "score": 0.80}"#
            .to_string(),
    );
    fs::write(
        out.join("predictions.json"),
        format!(
            r#"{{"scenes": [
  {{"id": "house",
   "boxes": [{}],
   "masks": [{{"stage": 6, "png": "pred_nonlandscaped.png"}}]}},
  {{"id": "frame",
   "masks": [{{"stage": 4, "png": "pred_frame.png"}}]}}
]}}
"#,
            pred_boxes.join(",\n             ")
        ),
    )?;

    // learning-curve points: log-linear growth that flattens after 25 000
    let mut csv = String::from("n_samples,metric\n");
    let top = 0.1 * (25_000f64).log10() + 0.05;
    for &n in &[1_000u64, 3_000, 8_000, 15_000, 25_000] {
        csv.push_str(&format!("{n},{:.6}\n", 0.1 * (n as f64).log10() + 0.05));
    }
    for &n in &[50_000u64, 100_000] {
        csv.push_str(&format!("{n},{:.6}\n", top + 0.001));
    }
    fs::write(out.join("curve.csv"), csv)?;

    // pseudo-labeling splits and the mock-model script
    let split = |file: &str, names: &[(&str, u32)]| -> Result<()> {
        let entries = names
            .iter()
            .map(|&(name, offset)| {
                let (image, mask) = pseudo_scene(offset);
                save_image(&pseudo.join(format!("{name}.png")), &image)?;
                let mut ann = SceneAnnotation::empty(name);
                ann.masks.push(AnnotatedMask {
                    mask: MaskGrid::new(StageId::BuildingFrame, mask),
                    source_polygon: None,
                });
                Ok(ManifestEntry {
                    image: format!("{name}.png"),
                    annotation: ann,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        save_manifest(&pseudo.join(file), &entries)
    };
    split("labeled.json", &[("l0", 0), ("l1", 3)])?;
    split("unlabeled.json", &[("u0", 1), ("u1", 4), ("u2", 6)])?;
    split("holdout.json", &[("h0", 2)])?;
    fs::write(
        pseudo.join("script.json"),
        "{\n  \"initial_iou\": 0.9,\n  \"round_gains\": [0.01, 0.01, 0.01]\n}\n",
    )?;

    // a config file spelling out the defaults
    let config = serde_json::to_string_pretty(&PipelineConfig::default())
        .expect("config serializes");
    fs::write(out.join("config.json"), config + "\n")?;

    println!("fixture set written to {}", out.display());
    Ok(())
}
