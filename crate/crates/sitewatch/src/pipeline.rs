//! Configuration and the command implementations behind the `sitewatch`
//! binary: dataset validation, scene assessment, evaluation, learning-curve
//! fitting and the pseudo-labeling simulation.
//!
//! Everything here returns library errors; the binary maps them onto the
//! exit-code contract (0 success, 1 input error, 2 config error). Output
//! files are written atomically (write-temp-then-rename).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::{
    load_dataset, BBox, DatasetEntry, LabelKind, Polygon, SceneAnnotation, StageId, STAGES,
};
use crate::error::{Error, Result, ResultExt};
use crate::grid::Grid;
use crate::height::DEFAULT_FLOOR_HEIGHT_M;
use crate::metrics::{
    average_precision_from_flags, fit_learning_curve, mask_iou, match_detections,
    pooled_mask_iou, precision_recall, EvaluationReport, LearningCurveFit, LearningCurvePoint,
    StageMetricsRow,
};
use crate::postprocess::{binarize, suppress_by_stage, NmsConfig};
use crate::progress::{
    assess_scene, AssessConfig, ModelOutputs, SceneInputs, SiteReport, StageGraph,
};
use crate::pseudolabel::{
    run_pseudo_labeling, LabeledScene, ModelScript, PseudoLabelConfig, PseudoLabelHistory,
    ScriptedModel, UnlabeledScene,
};
use crate::raster::{self, downsample_grid, ChannelKind, RasterImage};

/// Stage-graph section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageGraphConfig {
    pub thresholds: [f64; 7],
    pub weights: [f64; 7],
    /// Prerequisite pairs as stage codes, `[from, to]`.
    pub edges: Vec<[u8; 2]>,
}

impl Default for StageGraphConfig {
    fn default() -> Self {
        StageGraphConfig {
            thresholds: [0.5; 7],
            weights: [1.0 / 7.0; 7],
            edges: vec![[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [4, 6]],
        }
    }
}

impl StageGraphConfig {
    pub fn to_graph(&self) -> Result<StageGraph> {
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| {
                Ok((
                    StageId::from_code(a).map_err(|e| Error::config(e.to_string()))?,
                    StageId::from_code(b).map_err(|e| Error::config(e.to_string()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        StageGraph::new(self.thresholds, self.weights, edges)
    }
}

/// The full pipeline configuration, loaded from JSON with unknown keys
/// rejected. Every field has a default, so `{}` is a valid config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub nms: NmsConfig,
    pub binarize_threshold: f64,
    pub stage_graph: StageGraphConfig,
    pub floor_height_m: f64,
    pub tile_size: u32,
    pub tile_overlap: u32,
    /// Degrade scenes to this resolution before assessment.
    pub target_resolution: Option<f64>,
    pub pseudo: PseudoLabelConfig,
    /// Detection-matching IoU threshold used by `evaluate`.
    pub eval_iou_threshold: f64,
    /// Detection score threshold behind `evaluate`'s precision/recall.
    pub eval_score_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            nms: NmsConfig::default(),
            binarize_threshold: 0.5,
            stage_graph: StageGraphConfig::default(),
            floor_height_m: DEFAULT_FLOOR_HEIGHT_M,
            tile_size: 256,
            tile_overlap: 32,
            target_resolution: None,
            pseudo: PseudoLabelConfig::default(),
            eval_iou_threshold: 0.5,
            eval_score_threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.nms.validate()?;
        if !(0.0..=1.0).contains(&self.binarize_threshold) {
            return Err(Error::config(format!(
                "binarize_threshold out of [0,1]: {}",
                self.binarize_threshold
            )));
        }
        self.stage_graph.to_graph()?;
        if !self.floor_height_m.is_finite() || self.floor_height_m <= 0.0 {
            return Err(Error::config(format!(
                "floor_height_m must be positive: {}",
                self.floor_height_m
            )));
        }
        if self.tile_size == 0 || self.tile_overlap >= self.tile_size {
            return Err(Error::config(format!(
                "tile_overlap {} must be smaller than tile_size {}",
                self.tile_overlap, self.tile_size
            )));
        }
        if let Some(r) = self.target_resolution {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::config(format!("target_resolution must be positive: {r}")));
            }
        }
        self.pseudo.validate()?;
        for (name, v) in [
            ("eval_iou_threshold", self.eval_iou_threshold),
            ("eval_score_threshold", self.eval_score_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} out of [0,1]: {v}")));
            }
        }
        Ok(())
    }

    pub fn assess_config(&self) -> Result<AssessConfig> {
        Ok(AssessConfig {
            nms: self.nms,
            binarize_threshold: self.binarize_threshold,
            graph: self.stage_graph.to_graph()?,
            floor_height_m: self.floor_height_m,
        })
    }
}

/// Loads a config file, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let config = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
        }
    };
    config.validate()?;
    Ok(config)
}

/// Serializes a value as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::parse(e.to_string()))?;
    bytes.push(b'\n');
    raster::write_atomic(path, &bytes)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Per-stage label statistics of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: StageId,
    pub name: String,
    pub label_type: String,
    pub total_labels: usize,
    pub total_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub scenes: usize,
    pub rows: Vec<StageCount>,
}

impl ValidationSummary {
    /// Renders the summary as the familiar per-stage counts table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<3}{:<22}{:<14}{:>13}{:>14}\n",
            "", "Stage", "Label type", "Total labels", "Total images"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<3}{:<22}{:<14}{:>13}{:>14}\n",
                row.stage.code(),
                row.name,
                row.label_type,
                row.total_labels,
                row.total_images
            ));
        }
        out.push_str(&format!("scenes: {}\n", self.scenes));
        out
    }
}

/// Loads and validates a dataset, returning its per-stage label counts.
pub fn cmd_validate(manifest: &Path) -> Result<ValidationSummary> {
    let dataset = load_dataset(manifest)?;
    let mut labels = [0usize; 7];
    let mut images = [0usize; 7];
    for (_, ann) in &dataset {
        let mut present = [false; 7];
        for b in &ann.boxes {
            labels[b.stage.code() as usize] += 1;
            present[b.stage.code() as usize] = true;
        }
        for m in &ann.masks {
            labels[m.mask.stage.code() as usize] += 1;
            present[m.mask.stage.code() as usize] = true;
        }
        for (i, &p) in present.iter().enumerate() {
            images[i] += p as usize;
        }
    }
    let rows = STAGES
        .iter()
        .map(|&stage| StageCount {
            stage,
            name: stage.name().to_string(),
            label_type: match stage.label_kind() {
                LabelKind::Bbox => "bbox".to_string(),
                LabelKind::Segmentation => "segmentation".to_string(),
            },
            total_labels: labels[stage.code() as usize],
            total_images: images[stage.code() as usize],
        })
        .collect();
    Ok(ValidationSummary {
        scenes: dataset.len(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// assess
// ---------------------------------------------------------------------------

/// On-disk model outputs for one scene. Probability grids are grayscale PNG
/// paths relative to this file; the site and footprint polygons ride along
/// because they are scene metadata the models were run with.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelOutputsDoc {
    boxes: Vec<BBox>,
    frame_prob_png: Option<String>,
    non_landscaped_prob_png: Option<String>,
    shadow_prob_png: Option<String>,
    site_polygon: Option<Vec<[f64; 2]>>,
    footprint: Option<Vec<[f64; 2]>>,
}

pub struct AssessArgs<'a> {
    pub image: &'a Path,
    pub outputs: &'a Path,
    /// Report destination; the caller prints to stdout when None.
    pub out: Option<&'a Path>,
    pub overlay: Option<&'a Path>,
    /// Fail instead of skipping when height prerequisites are missing.
    pub require_height: bool,
    /// Overrides the config's target_resolution.
    pub target_resolution: Option<f64>,
}

/// Assesses one scene from saved model outputs and returns the report.
pub fn cmd_assess(args: &AssessArgs<'_>, config: &PipelineConfig) -> Result<SiteReport> {
    let mut image = raster::load_image(args.image)?;
    let doc: ModelOutputsDoc = {
        let text = fs::read_to_string(args.outputs)
            .map_err(|e| Error::parse(format!("{}: {e}", args.outputs.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(format!("{}: {e}", args.outputs.display())))?
    };
    let base = args.outputs.parent().unwrap_or(Path::new("."));
    let mut outputs = ModelOutputs {
        boxes: doc.boxes,
        frame_prob: doc
            .frame_prob_png
            .as_ref()
            .map(|p| raster::load_grid_png(&base.join(p)))
            .transpose()?,
        non_landscaped_prob: doc
            .non_landscaped_prob_png
            .as_ref()
            .map(|p| raster::load_grid_png(&base.join(p)))
            .transpose()?,
        shadow_prob: doc
            .shadow_prob_png
            .as_ref()
            .map(|p| raster::load_grid_png(&base.join(p)))
            .transpose()?,
    };
    let mut site = doc.site_polygon.map(Polygon::new).transpose().context("site_polygon")?;
    let mut footprint = doc.footprint.map(Polygon::new).transpose().context("footprint")?;

    if let Some(target) = args.target_resolution.or(config.target_resolution) {
        let (w0, h0) = (image.width(), image.height());
        image = raster::degrade_resolution(&image, target)?;
        let sx = image.width() as f64 / w0 as f64;
        let sy = image.height() as f64 / h0 as f64;
        for g in [
            &mut outputs.frame_prob,
            &mut outputs.non_landscaped_prob,
            &mut outputs.shadow_prob,
        ]
        .into_iter()
        .flatten()
        {
            *g = downsample_grid(g, image.width(), image.height())?;
        }
        for b in &mut outputs.boxes {
            b.x_min *= sx;
            b.x_max *= sx;
            b.y_min *= sy;
            b.y_max *= sy;
        }
        site = site
            .map(|p| scale_polygon(&p, sx, sy))
            .transpose()
            .context("site_polygon")?;
        footprint = footprint
            .map(|p| scale_polygon(&p, sx, sy))
            .transpose()
            .context("footprint")?;
    }

    let scene_id = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".to_string());
    let scene = SceneInputs {
        scene_id,
        image,
        site,
        footprint,
    };
    let report = assess_scene(&scene, &outputs, &config.assess_config()?, args.require_height)?;
    if let Some(path) = args.out {
        write_json(path, &report)?;
    }
    if let Some(path) = args.overlay {
        render_overlay(&scene.image, &outputs, config, path)?;
    }
    Ok(report)
}

fn scale_polygon(p: &Polygon, sx: f64, sy: f64) -> Result<Polygon> {
    Polygon::new(p.points().iter().map(|&[x, y]| [x * sx, y * sy]).collect())
}

/// Stage palette for overlays, one color per stage code.
const STAGE_COLORS: [[u8; 3]; 7] = [
    [158, 158, 158], // preparatory work: gray
    [255, 235, 59],  // excavation: yellow
    [121, 85, 72],   // foundation: brown
    [156, 39, 176],  // basement: purple
    [255, 152, 0],   // frame: orange
    [244, 67, 54],   // roof: red
    [76, 175, 80],   // landscaping: green
];

/// Renders boxes and masks over the scene for human review.
fn render_overlay(
    image: &RasterImage,
    outputs: &ModelOutputs,
    config: &PipelineConfig,
    path: &Path,
) -> Result<()> {
    let (w, h) = (image.width(), image.height());
    let red = image.channel(ChannelKind::Red);
    let green = image.channel(ChannelKind::Green);
    let blue = image.channel(ChannelKind::Blue);
    let fallback = &image.planes()[0];
    let mut rgb = vec![0u8; (w as usize) * (h as usize) * 3];
    for y in 0..h {
        for x in 0..w {
            let i = ((y * w + x) as usize) * 3;
            rgb[i] = (red.unwrap_or(fallback).get(x, y) * 255.0).round() as u8;
            rgb[i + 1] = (green.unwrap_or(fallback).get(x, y) * 255.0).round() as u8;
            rgb[i + 2] = (blue.unwrap_or(fallback).get(x, y) * 255.0).round() as u8;
        }
    }
    let mut tint = |mask: &Grid, color: [u8; 3]| {
        for y in 0..h.min(mask.height()) {
            for x in 0..w.min(mask.width()) {
                if mask.is_set(x, y) {
                    let i = ((y * w + x) as usize) * 3;
                    for c in 0..3 {
                        rgb[i + c] = ((rgb[i + c] as f64) * 0.55 + (color[c] as f64) * 0.45) as u8;
                    }
                }
            }
        }
    };
    if let Some(g) = &outputs.frame_prob {
        tint(&binarize(g, config.binarize_threshold), STAGE_COLORS[4]);
    }
    if let Some(g) = &outputs.non_landscaped_prob {
        tint(&binarize(g, config.binarize_threshold), [96, 125, 139]);
    }
    if let Some(g) = &outputs.shadow_prob {
        tint(&binarize(g, config.binarize_threshold), [33, 150, 243]);
    }
    for b in suppress_by_stage(&outputs.boxes, &config.nms) {
        draw_box_outline(&mut rgb, w, h, &b, STAGE_COLORS[b.stage.code() as usize]);
    }
    raster::write_rgb_png(path, &rgb, w, h)
}

fn draw_box_outline(rgb: &mut [u8], w: u32, h: u32, b: &BBox, color: [u8; 3]) {
    let x0 = (b.x_min.floor().max(0.0) as u32).min(w - 1);
    let y0 = (b.y_min.floor().max(0.0) as u32).min(h - 1);
    let x1 = ((b.x_max.ceil().max(1.0) as u32).saturating_sub(1)).min(w - 1);
    let y1 = ((b.y_max.ceil().max(1.0) as u32).saturating_sub(1)).min(h - 1);
    let mut put = |x: u32, y: u32| {
        let i = ((y * w + x) as usize) * 3;
        rgb[i..i + 3].copy_from_slice(&color);
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Per-scene predictions file: detections plus predicted masks, matched to
/// the ground-truth manifest by scene id.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionsDoc {
    scenes: Vec<ScenePredictions>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenePredictions {
    #[serde(default)]
    id: String,
    #[serde(default)]
    boxes: Vec<BBox>,
    #[serde(default)]
    masks: Vec<PredictedMask>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictedMask {
    stage: StageId,
    png: String,
}

pub struct EvaluateArgs<'a> {
    pub predictions: &'a Path,
    pub ground_truth: &'a Path,
    /// Report aggregate-intersection-over-aggregate-union IoU instead of the
    /// per-image mean.
    pub pooled_iou: bool,
}

/// Scores predictions against a ground-truth manifest, one row per stage in
/// taxonomy order. Percent scale, matching the reporting convention.
pub fn cmd_evaluate(args: &EvaluateArgs<'_>, config: &PipelineConfig) -> Result<EvaluationReport> {
    let dataset = load_dataset(args.ground_truth)?;
    let text = fs::read_to_string(args.predictions)
        .map_err(|e| Error::parse(format!("{}: {e}", args.predictions.display())))?;
    let preds: PredictionsDoc = serde_json::from_str(&text)
        .map_err(|e| Error::parse(format!("{}: {e}", args.predictions.display())))?;
    let base = args.predictions.parent().unwrap_or(Path::new("."));

    // align predictions to ground-truth scenes
    let mut by_scene: Vec<(&DatasetEntry, ScenePredictions)> =
        dataset.iter().map(|e| (e, ScenePredictions::default())).collect();
    for scene_preds in preds.scenes {
        match by_scene.iter_mut().find(|(e, _)| e.1.scene_id == scene_preds.id) {
            Some(slot) => slot.1 = scene_preds,
            None => {
                return Err(Error::validation(format!(
                    "predictions reference unknown scene id {:?}",
                    scene_preds.id
                )))
            }
        }
    }

    let mut rows = Vec::with_capacity(7);
    for stage in STAGES {
        let row = match stage.label_kind() {
            LabelKind::Bbox => evaluate_box_stage(stage, &by_scene, config),
            LabelKind::Segmentation => {
                evaluate_mask_stage(stage, &by_scene, base, config, args.pooled_iou)?
            }
        };
        rows.push(row);
    }
    Ok(EvaluationReport {
        schema: 1,
        iou_threshold: config.eval_iou_threshold,
        score_threshold: config.eval_score_threshold,
        rows,
    })
}

fn evaluate_box_stage(
    stage: StageId,
    by_scene: &[(&DatasetEntry, ScenePredictions)],
    config: &PipelineConfig,
) -> StageMetricsRow {
    let mut flags: Vec<(f64, bool)> = Vec::new();
    let mut n_gt = 0usize;
    for ((_, ann), preds) in by_scene {
        let gts: Vec<BBox> = ann.boxes.iter().filter(|b| b.stage == stage).cloned().collect();
        let dets: Vec<BBox> = preds.boxes.iter().filter(|b| b.stage == stage).cloned().collect();
        n_gt += gts.len();
        flags.extend(match_detections(&dets, &gts, config.eval_iou_threshold));
    }
    let (precision, recall) = precision_recall(&flags, n_gt, config.eval_score_threshold);
    let ap = if n_gt > 0 {
        Some(100.0 * average_precision_from_flags(flags, n_gt))
    } else {
        None
    };
    StageMetricsRow {
        stage,
        name: stage.name().to_string(),
        label_type: "bbox".to_string(),
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        ap,
        iou: None,
    }
}

fn evaluate_mask_stage(
    stage: StageId,
    by_scene: &[(&DatasetEntry, ScenePredictions)],
    base: &Path,
    config: &PipelineConfig,
    pooled: bool,
) -> Result<StageMetricsRow> {
    // per scene: union of ground-truth masks vs union of predicted masks
    let mut pairs: Vec<(Grid, Grid)> = Vec::new();
    for ((image, ann), preds) in by_scene {
        let gt_masks: Vec<&Grid> = ann
            .masks
            .iter()
            .filter(|m| m.mask.stage == stage)
            .map(|m| &m.mask.grid)
            .collect();
        let mut pred_masks: Vec<Grid> = Vec::new();
        for m in preds.masks.iter().filter(|m| m.stage == stage) {
            let grid = raster::load_grid_png(&base.join(&m.png))
                .context(format!("scene {:?}", ann.scene_id))?;
            if grid.width() != image.width() || grid.height() != image.height() {
                return Err(Error::validation(format!(
                    "scene {:?}: predicted mask is {}x{}, scene is {}x{}",
                    ann.scene_id,
                    grid.width(),
                    grid.height(),
                    image.width(),
                    image.height()
                )));
            }
            pred_masks.push(binarize(&grid, config.binarize_threshold));
        }
        if gt_masks.is_empty() && pred_masks.is_empty() {
            continue;
        }
        let (w, h) = (image.width(), image.height());
        let pred_refs: Vec<&Grid> = pred_masks.iter().collect();
        pairs.push((union_of(&pred_refs, w, h)?, union_of(&gt_masks, w, h)?));
    }
    let (mut precision, mut recall) = (1.0, 1.0);
    let iou = if pairs.is_empty() {
        None
    } else {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        let mut per_image = 0.0;
        for (pred, gt) in &pairs {
            let inter = count_and(pred, gt);
            tp += inter;
            fp += pred.count_set() as f64 - inter;
            fn_ += gt.count_set() as f64 - inter;
            per_image += mask_iou(pred, gt)?;
        }
        precision = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
        recall = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
        Some(if pooled {
            100.0 * pooled_mask_iou(pairs.iter().map(|(a, b)| (a, b)))?
        } else {
            100.0 * per_image / pairs.len() as f64
        })
    };
    Ok(StageMetricsRow {
        stage,
        name: stage.name().to_string(),
        label_type: "segmentation".to_string(),
        precision: 100.0 * precision,
        recall: 100.0 * recall,
        ap: None,
        iou,
    })
}

fn count_and(a: &Grid, b: &Grid) -> f64 {
    let mut n = 0usize;
    for (x, y) in a.values().iter().zip(b.values()) {
        n += (*x >= 0.5 && *y >= 0.5) as usize;
    }
    n as f64
}

fn union_of(masks: &[&Grid], w: u32, h: u32) -> Result<Grid> {
    Grid::from_fn(w, h, |x, y| {
        if masks.iter().any(|m| m.is_set(x, y)) {
            1.0
        } else {
            0.0
        }
    })
}

// ---------------------------------------------------------------------------
// learning-curve
// ---------------------------------------------------------------------------

/// Fit plus the plot-ready (log10 n, metric) columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveOutput {
    pub fit: LearningCurveFit,
    pub points: Vec<LearningCurvePoint>,
}

/// Parses a two-column `n_samples,metric` CSV (optional header) and fits the
/// log-linear curve.
pub fn cmd_learning_curve(points_csv: &Path, plateau_epsilon: f64) -> Result<LearningCurveOutput> {
    let text = fs::read_to_string(points_csv)
        .map_err(|e| Error::parse(format!("{}: {e}", points_csv.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (a, b) = (fields.next().unwrap_or(""), fields.next().unwrap_or(""));
        if fields.next().is_some() {
            return Err(Error::parse(format!(
                "{}:{}: expected two columns",
                points_csv.display(),
                lineno + 1
            )));
        }
        if lineno == 0 && a.trim().parse::<u64>().is_err() {
            continue; // header row
        }
        let n: u64 = a.trim().parse().map_err(|e| {
            Error::parse(format!("{}:{}: bad n_samples: {e}", points_csv.display(), lineno + 1))
        })?;
        let metric: f64 = b.trim().parse().map_err(|e| {
            Error::parse(format!("{}:{}: bad metric: {e}", points_csv.display(), lineno + 1))
        })?;
        points.push(LearningCurvePoint::new(n, metric)?);
    }
    let fit = fit_learning_curve(&points, plateau_epsilon)?;
    points.sort_by_key(|p| p.n_samples);
    Ok(LearningCurveOutput { fit, points })
}

/// Writes the two-column plot file: `log10_n,metric` per line.
pub fn write_plot_data(path: &Path, output: &LearningCurveOutput) -> Result<()> {
    let mut text = String::from("log10_n,metric\n");
    for p in &output.points {
        text.push_str(&format!("{},{}\n", (p.n_samples as f64).log10(), p.metric));
    }
    raster::write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// pseudolabel
// ---------------------------------------------------------------------------

pub struct PseudoLabelArgs<'a> {
    pub labeled: &'a Path,
    pub unlabeled: &'a Path,
    pub holdout: &'a Path,
    pub model_script: &'a Path,
    pub seed: u64,
}

/// Runs the pseudo-labeling loop with a scripted mock model over three
/// manifest splits. The binary segmentation target of a labeled scene is the
/// union of its annotated masks.
pub fn cmd_pseudolabel(
    args: &PseudoLabelArgs<'_>,
    config: &PipelineConfig,
) -> Result<PseudoLabelHistory> {
    let labeled = load_labeled_split(args.labeled)?;
    let holdout = load_labeled_split(args.holdout)?;
    let unlabeled: Vec<UnlabeledScene> = load_dataset(args.unlabeled)?
        .into_iter()
        .map(|(image, ann)| UnlabeledScene {
            id: ann.scene_id,
            image,
        })
        .collect();
    let text = fs::read_to_string(args.model_script)
        .map_err(|e| Error::parse(format!("{}: {e}", args.model_script.display())))?;
    let script = ModelScript::from_json(&text)?;
    let mut model = ScriptedModel::new(script, ChannelKind::Red, args.seed);
    run_pseudo_labeling(&mut model, &labeled, &unlabeled, &holdout, &config.pseudo)
}

fn load_labeled_split(manifest: &Path) -> Result<Vec<LabeledScene>> {
    let dataset = load_dataset(manifest)?;
    dataset
        .into_iter()
        .map(|(image, ann)| {
            let mask = mask_union(&ann, image.width(), image.height())?;
            Ok(LabeledScene {
                id: ann.scene_id,
                image,
                mask,
            })
        })
        .collect()
}

fn mask_union(ann: &SceneAnnotation, w: u32, h: u32) -> Result<Grid> {
    if ann.masks.is_empty() {
        return Err(Error::validation(format!(
            "scene {:?} has no mask annotation to train against",
            ann.scene_id
        )));
    }
    let refs: Vec<&Grid> = ann.masks.iter().map(|m| &m.mask.grid).collect();
    union_of(&refs, w, h)
}
