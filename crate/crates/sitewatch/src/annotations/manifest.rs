//! On-disk dataset manifest: scenes, boxes, masks, footprints.
//!
//! Schema (JSON, unknown keys rejected):
//!
//! ```text
//! {"scenes": [{
//!   "id": "scene-1",
//!   "image": "scene-1.png",            // sidecar scene-1.meta.json required
//!   "annotations": {
//!     "boxes": [{"stage": 5, "x_min": 1, "y_min": 1, "x_max": 9, "y_max": 9}],
//!     "masks": [{"stage": 4, "png": "frame.png"},
//!               {"stage": 6, "polygon": [[0,0],[8,0],[8,8],[0,8]]}],
//!     "footprints": [[[2,2],[6,2],[6,6],[2,6]]]
//!   }
//! }]}
//! ```
//!
//! Paths are relative to the manifest file. Detections reuse the same box
//! schema plus a `score` field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::raster::{self, GrayDepth, RasterImage};

use super::{AnnotatedMask, BBox, MaskGrid, Polygon, SceneAnnotation, StageId};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    scenes: Vec<SceneRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneRecord {
    id: String,
    image: String,
    #[serde(default)]
    annotations: AnnotationRecord,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AnnotationRecord {
    boxes: Vec<BBox>,
    masks: Vec<MaskRecord>,
    footprints: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MaskRecord {
    Png {
        stage: StageId,
        png: String,
    },
    Polygon {
        stage: StageId,
        polygon: Vec<[f64; 2]>,
    },
}

/// A loaded scene: image plus validated annotations.
pub type DatasetEntry = (RasterImage, SceneAnnotation);

/// Loads and validates a dataset manifest.
///
/// Every referenced image and sidecar is loaded; all geometry is checked
/// against the scene bounds. Errors name the offending scene and record.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<DatasetEntry>> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Error::parse(format!("{}: {e}", manifest_path.display())))?;
    let doc: ManifestDoc = serde_json::from_str(&text)
        .map_err(|e| Error::parse(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::with_capacity(doc.scenes.len());
    let mut seen_ids = std::collections::BTreeSet::new();
    for scene in &doc.scenes {
        if !seen_ids.insert(scene.id.clone()) {
            return Err(Error::validation(format!("duplicate scene id {:?}", scene.id)));
        }
        let entry = load_scene(base, scene).context(format!("scene {:?}", scene.id))?;
        out.push(entry);
    }
    Ok(out)
}

fn load_scene(base: &Path, scene: &SceneRecord) -> Result<DatasetEntry> {
    let image = raster::load_image(&base.join(&scene.image))?;
    let (w, h) = (image.width(), image.height());
    let mut annotation = SceneAnnotation::empty(&scene.id);
    for (i, b) in scene.annotations.boxes.iter().enumerate() {
        if b.score != 1.0 {
            return Err(Error::validation(format!(
                "box {i}: ground-truth boxes carry score 1.0, got {}",
                b.score
            )));
        }
        annotation.boxes.push(b.clone());
    }
    for (i, m) in scene.annotations.masks.iter().enumerate() {
        let annotated = match m {
            MaskRecord::Png { stage, png } => {
                let grid = raster::load_grid_png(&base.join(png)).context(format!("mask {i}"))?;
                AnnotatedMask {
                    mask: MaskGrid::new(*stage, grid),
                    source_polygon: None,
                }
            }
            MaskRecord::Polygon { stage, polygon } => {
                let poly = Polygon::new(polygon.clone()).context(format!("mask {i}"))?;
                let grid = super::rasterize_polygon(&poly, w, h)?;
                AnnotatedMask {
                    mask: MaskGrid::new(*stage, grid),
                    source_polygon: Some(poly),
                }
            }
        };
        annotation.masks.push(annotated);
    }
    for (i, ring) in scene.annotations.footprints.iter().enumerate() {
        let poly = Polygon::new(ring.clone()).context(format!("footprint {i}"))?;
        annotation.footprints.push(poly);
    }
    annotation.validate(w, h)?;
    Ok((image, annotation))
}

/// One manifest entry to save: the image path (relative to the manifest) and
/// the scene's annotations.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub image: String,
    pub annotation: SceneAnnotation,
}

/// Saves a manifest next to any raster masks it needs to materialize.
///
/// Masks that were loaded from polygons are written back as polygons; raster
/// masks are written as 8-bit PNGs named `<scene>_mask<i>.png` in the
/// manifest directory. Save→load round-trips every annotation record.
pub fn save_manifest(manifest_path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut scenes = Vec::with_capacity(entries.len());
    for entry in entries {
        let ann = &entry.annotation;
        let mut masks = Vec::with_capacity(ann.masks.len());
        for (i, m) in ann.masks.iter().enumerate() {
            match &m.source_polygon {
                Some(poly) => masks.push(MaskRecord::Polygon {
                    stage: m.mask.stage,
                    polygon: poly.points().to_vec(),
                }),
                None => {
                    let name = format!("{}_mask{}.png", ann.scene_id, i);
                    raster::save_grid_png(&base.join(&name), &m.mask.grid, GrayDepth::Eight)?;
                    masks.push(MaskRecord::Png {
                        stage: m.mask.stage,
                        png: name,
                    });
                }
            }
        }
        scenes.push(SceneRecord {
            id: ann.scene_id.clone(),
            image: entry.image.clone(),
            annotations: AnnotationRecord {
                boxes: ann.boxes.clone(),
                masks,
                footprints: ann.footprints.iter().map(|p| p.points().to_vec()).collect(),
            },
        });
    }
    let doc = ManifestDoc { scenes };
    let json = serde_json::to_vec_pretty(&doc).map_err(|e| Error::parse(e.to_string()))?;
    crate::raster::write_atomic(manifest_path, &json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::raster::{ChannelKind, RasterImage};

    fn write_scene_png(dir: &Path, name: &str, w: u32, h: u32) {
        let img = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(w, h, 0.4).unwrap()],
            0.5,
            None,
        )
        .unwrap();
        raster::save_image(&dir.join(name), &img).unwrap();
    }

    #[test]
    fn empty_manifest_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, r#"{"scenes": []}"#).unwrap();
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn single_box_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        write_scene_png(dir.path(), "s.png", 16, 16);
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"scenes": [{"id": "s", "image": "s.png", "annotations":
                {"boxes": [{"stage": 2, "x_min": 1, "y_min": 2, "x_max": 5, "y_max": 6}]}}]}"#,
        )
        .unwrap();
        let data = load_dataset(&path).unwrap();
        assert_eq!(data.len(), 1);
        let b = &data[0].1.boxes[0];
        assert_eq!(b.stage, StageId::Foundation);
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (1.0, 2.0, 5.0, 6.0));
        assert_eq!(b.score, 1.0);
    }

    #[test]
    fn degenerate_box_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_scene_png(dir.path(), "s.png", 16, 16);
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"scenes": [{"id": "s", "image": "s.png", "annotations":
                {"boxes": [{"stage": 2, "x_min": 5, "y_min": 2, "x_max": 5, "y_max": 6}]}}]}"#,
        )
        .unwrap();
        assert!(load_dataset(&path).is_err());
    }

    #[test]
    fn out_of_bounds_box_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_scene_png(dir.path(), "s.png", 16, 16);
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"scenes": [{"id": "s", "image": "s.png", "annotations":
                {"boxes": [{"stage": 2, "x_min": 1, "y_min": 2, "x_max": 17, "y_max": 6}]}}]}"#,
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("bounds"), "{err}");
    }

    #[test]
    fn unknown_manifest_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, r#"{"scenes": [], "extra": 1}"#).unwrap();
        assert!(load_dataset(&path).is_err());
    }

    #[test]
    fn save_load_roundtrip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        write_scene_png(dir.path(), "s.png", 20, 20);
        let mut ann = SceneAnnotation::empty("s");
        ann.boxes
            .push(BBox::ground_truth(StageId::RoofCompletedHouse, 1.0, 1.0, 9.0, 9.0).unwrap());
        let poly = Polygon::rect(2.0, 2.0, 10.0, 12.0).unwrap();
        let grid = super::super::rasterize_polygon(&poly, 20, 20).unwrap();
        ann.masks.push(AnnotatedMask {
            mask: MaskGrid::new(StageId::BuildingFrame, grid.clone()),
            source_polygon: Some(poly.clone()),
        });
        ann.masks.push(AnnotatedMask {
            mask: MaskGrid::new(StageId::Landscaping, grid),
            source_polygon: None,
        });
        ann.footprints.push(Polygon::rect(3.0, 3.0, 8.0, 8.0).unwrap());

        let path = dir.path().join("manifest.json");
        save_manifest(
            &path,
            &[ManifestEntry {
                image: "s.png".to_string(),
                annotation: ann.clone(),
            }],
        )
        .unwrap();
        let data = load_dataset(&path).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].1, ann);
    }
}
