//! The construction-stage taxonomy and label primitives.
//!
//! Seven stages with fixed integer codes; each stage is annotated either with
//! bounding boxes or with segmentation masks, and that assignment is part of
//! the taxonomy because downstream fusion needs to know which evidence
//! channel a stage uses.

mod manifest;
mod polygon;

pub use manifest::{load_dataset, save_manifest, DatasetEntry, ManifestEntry};
pub use polygon::{rasterize_polygon, Polygon};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// One of the seven construction stages, in build order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum StageId {
    PreparatoryWork = 0,
    Excavation = 1,
    Foundation = 2,
    Basement = 3,
    BuildingFrame = 4,
    RoofCompletedHouse = 5,
    Landscaping = 6,
}

/// All stages in code order.
pub const STAGES: [StageId; 7] = [
    StageId::PreparatoryWork,
    StageId::Excavation,
    StageId::Foundation,
    StageId::Basement,
    StageId::BuildingFrame,
    StageId::RoofCompletedHouse,
    StageId::Landscaping,
];

/// How a stage is annotated (and detected).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Bbox,
    Segmentation,
}

impl StageId {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        STAGES
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::parse(format!("unknown stage code {code}, expected 0..=6")))
    }

    /// Frame and landscaping are mask stages; everything else is boxes.
    pub fn label_kind(self) -> LabelKind {
        match self {
            StageId::BuildingFrame | StageId::Landscaping => LabelKind::Segmentation,
            _ => LabelKind::Bbox,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StageId::PreparatoryWork => "preparatory_work",
            StageId::Excavation => "excavation",
            StageId::Foundation => "foundation",
            StageId::Basement => "basement",
            StageId::BuildingFrame => "building_frame",
            StageId::RoofCompletedHouse => "roof_completed_house",
            StageId::Landscaping => "landscaping",
        }
    }
}

impl std::fmt::Display for StageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for StageId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for StageId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        StageId::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// An axis-aligned detection or ground-truth box in pixel coordinates.
///
/// Ground-truth boxes carry score 1.0 so that detections and labels share one
/// type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BBox {
    pub stage: StageId,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl BBox {
    pub fn new(
        stage: StageId,
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        score: f64,
    ) -> Result<Self> {
        for v in [x_min, y_min, x_max, y_max] {
            if !v.is_finite() {
                return Err(Error::validation(format!("non-finite box coordinate {v}")));
            }
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::validation(format!(
                "degenerate box: ({x_min},{y_min})-({x_max},{y_max}) must satisfy x_min<x_max and y_min<y_max"
            )));
        }
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::validation(format!("box score out of [0,1]: {score}")));
        }
        Ok(BBox {
            stage,
            x_min,
            y_min,
            x_max,
            y_max,
            score,
        })
    }

    /// Ground-truth constructor: score fixed at 1.0.
    pub fn ground_truth(stage: StageId, x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(stage, x_min, y_min, x_max, y_max, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// True when the box lies inside a `width × height` scene.
    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width as f64 && self.y_max <= height as f64
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            stage: StageId,
            x_min: f64,
            y_min: f64,
            x_max: f64,
            y_max: f64,
            #[serde(default = "default_score")]
            score: f64,
        }
        fn default_score() -> f64 {
            1.0
        }
        let raw = Raw::deserialize(deserializer)?;
        BBox::new(raw.stage, raw.x_min, raw.y_min, raw.x_max, raw.y_max, raw.score)
            .map_err(serde::de::Error::custom)
    }
}

/// A per-pixel probability (or binary) mask tagged with its stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGrid {
    pub stage: StageId,
    pub grid: Grid,
}

impl MaskGrid {
    pub fn new(stage: StageId, grid: Grid) -> Self {
        MaskGrid { stage, grid }
    }

    pub fn is_binary(&self) -> bool {
        self.grid.is_binary()
    }
}

/// A ground-truth mask plus the polygon it was rasterized from, when the
/// manifest stored it as a polygon. Keeping the source lets save→load
/// round-trip the record unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedMask {
    pub mask: MaskGrid,
    pub source_polygon: Option<Polygon>,
}

/// All ground truth attached to one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub boxes: Vec<BBox>,
    pub masks: Vec<AnnotatedMask>,
    /// Per-building footprint outlines, used for shadow-based height
    /// estimation and site statistics.
    pub footprints: Vec<Polygon>,
}

impl SceneAnnotation {
    pub fn empty(scene_id: impl Into<String>) -> Self {
        SceneAnnotation {
            scene_id: scene_id.into(),
            boxes: Vec::new(),
            masks: Vec::new(),
            footprints: Vec::new(),
        }
    }

    /// Checks every geometric invariant against the scene dimensions.
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        for (i, b) in self.boxes.iter().enumerate() {
            if !b.within(width, height) {
                return Err(Error::validation(format!(
                    "scene {}: box {i} out of {width}x{height} bounds",
                    self.scene_id
                )));
            }
        }
        for (i, m) in self.masks.iter().enumerate() {
            if m.mask.grid.width() != width || m.mask.grid.height() != height {
                return Err(Error::validation(format!(
                    "scene {}: mask {i} is {}x{}, scene is {width}x{height}",
                    self.scene_id,
                    m.mask.grid.width(),
                    m.mask.grid.height()
                )));
            }
        }
        for (i, p) in self.footprints.iter().enumerate() {
            let (x0, y0, x1, y1) = p.bounding_box();
            if x0 < 0.0 || y0 < 0.0 || x1 > width as f64 || y1 > height as f64 {
                return Err(Error::validation(format!(
                    "scene {}: footprint {i} out of {width}x{height} bounds",
                    self.scene_id
                )));
            }
        }
        Ok(())
    }
}
