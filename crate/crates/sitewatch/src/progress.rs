//! Fusion of per-stage evidence through the stage DAG into a resolved stage
//! and a total-progress percentage.
//!
//! The default graph is the chain preparatory work → excavation → foundation
//! → basement → frame → roof, with landscaping branching off the frame so the
//! two can run in parallel. A satisfied stage satisfies its ancestors
//! transitively: a visible roof implies a finished foundation even though the
//! foundation is no longer visible in the imagery.

use serde::{Deserialize, Serialize};

use crate::annotations::{rasterize_polygon, BBox, LabelKind, Polygon, StageId, STAGES};
use crate::error::{Error, Result, ResultExt};
use crate::grid::Grid;
use crate::height::{estimate_height, HeightEstimate, DEFAULT_FLOOR_HEIGHT_M};
use crate::postprocess::{binarize, suppress_by_stage, NmsConfig};
use crate::raster::RasterImage;

/// The stage DAG: prerequisite edges plus per-stage evidence thresholds and
/// progress weights.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGraph {
    thresholds: [f64; 7],
    weights: [f64; 7],
    edges: Vec<(StageId, StageId)>,
    ancestors: [Vec<StageId>; 7],
}

impl Default for StageGraph {
    fn default() -> Self {
        let chain = [
            (StageId::PreparatoryWork, StageId::Excavation),
            (StageId::Excavation, StageId::Foundation),
            (StageId::Foundation, StageId::Basement),
            (StageId::Basement, StageId::BuildingFrame),
            (StageId::BuildingFrame, StageId::RoofCompletedHouse),
            (StageId::BuildingFrame, StageId::Landscaping),
        ];
        StageGraph::new([0.5; 7], [1.0 / 7.0; 7], chain.to_vec()).expect("default graph is valid")
    }
}

impl StageGraph {
    /// Builds and validates a graph: thresholds in [0,1], non-negative
    /// weights summing to 1 (±1e-9), acyclic prerequisite edges.
    pub fn new(
        thresholds: [f64; 7],
        weights: [f64; 7],
        edges: Vec<(StageId, StageId)>,
    ) -> Result<Self> {
        for (i, &t) in thresholds.iter().enumerate() {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::config(format!("stage {i} threshold out of [0,1]: {t}")));
            }
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::config(format!("stage {i} weight must be non-negative: {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("stage weights must sum to 1, got {sum}")));
        }
        let ancestors = compute_ancestors(&edges)?;
        Ok(StageGraph {
            thresholds,
            weights,
            edges,
            ancestors,
        })
    }

    pub fn threshold(&self, stage: StageId) -> f64 {
        self.thresholds[stage.code() as usize]
    }

    pub fn weight(&self, stage: StageId) -> f64 {
        self.weights[stage.code() as usize]
    }

    pub fn edges(&self) -> &[(StageId, StageId)] {
        &self.edges
    }

    /// All transitive prerequisites of a stage.
    pub fn ancestors(&self, stage: StageId) -> &[StageId] {
        &self.ancestors[stage.code() as usize]
    }
}

/// Transitive closure over the reversed edges; rejects cycles.
fn compute_ancestors(edges: &[(StageId, StageId)]) -> Result<[Vec<StageId>; 7]> {
    // Kahn topological check
    let mut indeg = [0usize; 7];
    for &(_, b) in edges {
        indeg[b.code() as usize] += 1;
    }
    let mut queue: Vec<usize> = (0..7).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    let mut order = Vec::with_capacity(7);
    while let Some(i) = queue.pop() {
        seen += 1;
        order.push(i);
        for &(a, b) in edges {
            if a.code() as usize == i {
                let bi = b.code() as usize;
                indeg[bi] -= 1;
                if indeg[bi] == 0 {
                    queue.push(bi);
                }
            }
        }
    }
    if seen != 7 {
        return Err(Error::config("stage graph has a cycle".to_string()));
    }
    let mut anc: [std::collections::BTreeSet<u8>; 7] = Default::default();
    for &i in &order {
        for &(a, b) in edges {
            if b.code() as usize == i {
                let from = a.code();
                let inherited: Vec<u8> = anc[from as usize].iter().copied().collect();
                anc[i].insert(from);
                anc[i].extend(inherited);
            }
        }
    }
    // order guarantees prerequisites were completed first, but edges may list
    // a child before we visit its parent in `order`; fixpoint to be safe
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            let (ai, bi) = (a.code() as usize, b.code() as usize);
            let inherited: Vec<u8> = anc[ai].iter().copied().collect();
            for x in inherited {
                changed |= anc[bi].insert(x);
            }
            changed |= anc[bi].insert(a.code());
        }
        if !changed {
            break;
        }
    }
    Ok(std::array::from_fn(|i| {
        anc[i]
            .iter()
            .map(|&c| StageId::from_code(c).unwrap())
            .collect()
    }))
}

/// Per-stage evidence scores in [0,1].
///
/// Box stages carry the maximum detection score after NMS; the frame stage
/// carries its site-coverage fraction; landscaping carries the landscaped
/// proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEvidence {
    scores: [f64; 7],
}

impl StageEvidence {
    pub fn zero() -> Self {
        StageEvidence { scores: [0.0; 7] }
    }

    pub fn from_scores(scores: [f64; 7]) -> Result<Self> {
        for (i, &s) in scores.iter().enumerate() {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::validation(format!("stage {i} evidence out of [0,1]: {s}")));
            }
        }
        Ok(StageEvidence { scores })
    }

    pub fn get(&self, stage: StageId) -> f64 {
        self.scores[stage.code() as usize]
    }

    pub fn set(&mut self, stage: StageId, score: f64) {
        assert!(score.is_finite() && (0.0..=1.0).contains(&score));
        self.scores[stage.code() as usize] = score;
    }

    pub fn scores(&self) -> [f64; 7] {
        self.scores
    }
}

/// Landscaped proportion of the site, from the *non-landscaped* segmentation:
/// `1 − |non_landscaped ∧ site| / |site|`. Segmenting the unfinished ground
/// is the inverse operation — bare soil is visible where work remains.
pub fn landscaping_progress(non_landscaped: &Grid, site: &Polygon) -> Result<f64> {
    let site_mask = rasterize_polygon(site, non_landscaped.width(), non_landscaped.height())?;
    let site_px = site_mask.count_set();
    if site_px == 0 {
        return Err(Error::invalid("site polygon rasterizes to no pixels".to_string()));
    }
    let mut covered = 0usize;
    for y in 0..site_mask.height() {
        for x in 0..site_mask.width() {
            if site_mask.is_set(x, y) && non_landscaped.is_set(x, y) {
                covered += 1;
            }
        }
    }
    Ok(1.0 - covered as f64 / site_px as f64)
}

/// Fraction of the site covered by a stage mask, clipped to [0,1].
fn site_coverage(mask: &Grid, site: &Polygon) -> Result<f64> {
    let site_mask = rasterize_polygon(site, mask.width(), mask.height())?;
    let site_px = site_mask.count_set();
    if site_px == 0 {
        return Err(Error::invalid("site polygon rasterizes to no pixels".to_string()));
    }
    let mut covered = 0usize;
    for y in 0..site_mask.height() {
        for x in 0..site_mask.width() {
            if site_mask.is_set(x, y) && mask.is_set(x, y) {
                covered += 1;
            }
        }
    }
    Ok((covered as f64 / site_px as f64).clamp(0.0, 1.0))
}

/// Inputs to [`stage_evidence`]: NMS-filtered detections plus the binary
/// stage masks that are available for this scene.
#[derive(Debug, Clone, Default)]
pub struct EvidenceInputs<'a> {
    /// Detections across all stages, already suppressed.
    pub detections: &'a [BBox],
    /// Binary building-frame mask, if the segmentation model ran.
    pub frame_mask: Option<&'a Grid>,
    /// Binary non-landscaped-ground mask, if the segmentation model ran.
    pub non_landscaped_mask: Option<&'a Grid>,
}

/// Scores every stage from its evidence channel.
///
/// Box stages take the maximum surviving detection score (0 without
/// detections); the frame stage takes its site coverage; landscaping takes
/// [`landscaping_progress`]. Absent masks contribute zero evidence.
pub fn stage_evidence(inputs: &EvidenceInputs<'_>, site: &Polygon) -> Result<StageEvidence> {
    let mut evidence = StageEvidence::zero();
    for stage in STAGES {
        match stage.label_kind() {
            LabelKind::Bbox => {
                let best = inputs
                    .detections
                    .iter()
                    .filter(|b| b.stage == stage)
                    .map(|b| b.score)
                    .fold(0.0, f64::max);
                evidence.set(stage, best);
            }
            LabelKind::Segmentation => {
                let score = match stage {
                    StageId::BuildingFrame => match inputs.frame_mask {
                        Some(mask) => site_coverage(mask, site)?,
                        None => 0.0,
                    },
                    StageId::Landscaping => match inputs.non_landscaped_mask {
                        Some(mask) => landscaping_progress(mask, site)?,
                        None => 0.0,
                    },
                    _ => unreachable!("only stages 4 and 6 are segmentation stages"),
                };
                evidence.set(stage, score);
            }
        }
    }
    Ok(evidence)
}

fn satisfied(evidence: &StageEvidence, graph: &StageGraph, stage: StageId) -> bool {
    evidence.get(stage) >= graph.threshold(stage)
}

/// A stage counts as effectively satisfied when its own evidence meets the
/// threshold or any satisfied stage lists it as an ancestor — completed
/// stages may no longer be visible.
fn effectively_satisfied(evidence: &StageEvidence, graph: &StageGraph, stage: StageId) -> bool {
    if satisfied(evidence, graph, stage) {
        return true;
    }
    STAGES.iter().any(|&later| {
        satisfied(evidence, graph, later) && graph.ancestors(later).contains(&stage)
    })
}

/// Resolves the current stage: the highest-code stage whose evidence meets
/// its threshold and whose ancestors are all effectively satisfied.
///
/// The intra-stage fraction is the evidence value for the fraction-valued
/// stages (frame, landscaping) and 1.0 for box stages; with nothing above
/// threshold the site is at preparatory work with fraction 0.
pub fn resolve_stage(evidence: &StageEvidence, graph: &StageGraph) -> (StageId, f64) {
    let resolved = STAGES
        .iter()
        .rev()
        .find(|&&s| {
            satisfied(evidence, graph, s)
                && graph
                    .ancestors(s)
                    .iter()
                    .all(|&a| effectively_satisfied(evidence, graph, a))
        })
        .copied();
    match resolved {
        Some(stage) => {
            let fraction = match stage.label_kind() {
                LabelKind::Segmentation => evidence.get(stage).clamp(0.0, 1.0),
                LabelKind::Bbox => 1.0,
            };
            (stage, fraction)
        }
        None => (StageId::PreparatoryWork, 0.0),
    }
}

/// Total progress percent: the weights of all completed ancestors plus the
/// resolved stage's weight scaled by its intra-stage fraction.
///
/// Satisfied stages on parallel branches contribute their full weight, and
/// landscaping contributes fractionally whenever its prerequisites are
/// effectively satisfied, even below its resolution threshold.
pub fn total_progress(
    resolved: StageId,
    intra_fraction: f64,
    evidence: &StageEvidence,
    graph: &StageGraph,
) -> f64 {
    let anc = graph.ancestors(resolved);
    let mut total = 0.0;
    for stage in STAGES {
        let completion = if stage == resolved {
            intra_fraction
        } else if anc.contains(&stage) {
            1.0
        } else if satisfied(evidence, graph, stage)
            && graph
                .ancestors(stage)
                .iter()
                .all(|&a| effectively_satisfied(evidence, graph, a))
        {
            match stage.label_kind() {
                LabelKind::Segmentation => evidence.get(stage).clamp(0.0, 1.0),
                LabelKind::Bbox => 1.0,
            }
        } else if stage == StageId::Landscaping
            && graph
                .ancestors(stage)
                .iter()
                .all(|&a| effectively_satisfied(evidence, graph, a))
        {
            evidence.get(stage).clamp(0.0, 1.0)
        } else {
            0.0
        };
        total += graph.weight(stage) * completion;
    }
    (100.0 * total).clamp(0.0, 100.0)
}

/// Convenience: resolve then score, as the report pipeline does.
pub fn progress_from_evidence(evidence: &StageEvidence, graph: &StageGraph) -> f64 {
    let (stage, fraction) = resolve_stage(evidence, graph);
    total_progress(stage, fraction, evidence, graph)
}

/// Raw model outputs for one scene, before post-processing.
#[derive(Debug, Clone, Default)]
pub struct ModelOutputs {
    /// Detections across all stages, *not* yet suppressed.
    pub boxes: Vec<BBox>,
    pub frame_prob: Option<Grid>,
    pub non_landscaped_prob: Option<Grid>,
    pub shadow_prob: Option<Grid>,
}

/// Scene-level inputs to an assessment.
#[derive(Debug, Clone)]
pub struct SceneInputs {
    pub scene_id: String,
    pub image: RasterImage,
    /// Site outline; defaults to the full scene rectangle.
    pub site: Option<Polygon>,
    /// Building footprint for shadow-based height estimation.
    pub footprint: Option<Polygon>,
}

/// Assessment configuration shared by the library API and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessConfig {
    pub nms: NmsConfig,
    pub binarize_threshold: f64,
    pub graph: StageGraph,
    pub floor_height_m: f64,
}

impl Default for AssessConfig {
    fn default() -> Self {
        AssessConfig {
            nms: NmsConfig::default(),
            binarize_threshold: 0.5,
            graph: StageGraph::default(),
            floor_height_m: DEFAULT_FLOOR_HEIGHT_M,
        }
    }
}

/// The versioned per-scene report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteReport {
    pub schema: u32,
    pub scene_id: String,
    pub resolved_stage: StageId,
    pub resolved_stage_name: String,
    pub evidence: [f64; 7],
    pub intra_stage_fraction: f64,
    pub landscaping_fraction: Option<f64>,
    pub height: Option<HeightEstimate>,
    pub total_progress_percent: f64,
}

pub const SITE_REPORT_SCHEMA: u32 = 1;

/// Runs the whole deterministic pipeline for one scene: suppression →
/// evidence → stage resolution → optional height → total progress.
///
/// Height is estimated when a shadow mask, sun metadata and a footprint are
/// all present; `require_height` turns a missing prerequisite into an error.
pub fn assess_scene(
    scene: &SceneInputs,
    outputs: &ModelOutputs,
    config: &AssessConfig,
    require_height: bool,
) -> Result<SiteReport> {
    assess_inner(scene, outputs, config, require_height)
        .context(format!("scene {:?}", scene.scene_id))
}

fn assess_inner(
    scene: &SceneInputs,
    outputs: &ModelOutputs,
    config: &AssessConfig,
    require_height: bool,
) -> Result<SiteReport> {
    config.nms.validate()?;
    let (w, h) = (scene.image.width(), scene.image.height());
    for (name, grid) in [
        ("frame", outputs.frame_prob.as_ref()),
        ("non_landscaped", outputs.non_landscaped_prob.as_ref()),
        ("shadow", outputs.shadow_prob.as_ref()),
    ] {
        if let Some(g) = grid {
            if g.width() != w || g.height() != h {
                return Err(Error::validation(format!(
                    "{name} grid is {}x{}, scene is {w}x{h}",
                    g.width(),
                    g.height()
                )));
            }
        }
    }
    for b in &outputs.boxes {
        if !b.within(w, h) {
            return Err(Error::validation("detection outside scene bounds".to_string()));
        }
    }
    let site = match &scene.site {
        Some(p) => p.clone(),
        None => Polygon::rect(0.0, 0.0, w as f64, h as f64)?,
    };
    let detections = suppress_by_stage(&outputs.boxes, &config.nms);
    let frame_mask = outputs
        .frame_prob
        .as_ref()
        .map(|g| binarize(g, config.binarize_threshold));
    let non_landscaped_mask = outputs
        .non_landscaped_prob
        .as_ref()
        .map(|g| binarize(g, config.binarize_threshold));
    let evidence = stage_evidence(
        &EvidenceInputs {
            detections: &detections,
            frame_mask: frame_mask.as_ref(),
            non_landscaped_mask: non_landscaped_mask.as_ref(),
        },
        &site,
    )?;
    let (resolved, intra_fraction) = resolve_stage(&evidence, &config.graph);

    let height = match (&outputs.shadow_prob, scene.image.sun(), &scene.footprint) {
        (Some(shadow_prob), Some(sun), Some(footprint)) => {
            let shadow = binarize(shadow_prob, config.binarize_threshold);
            Some(estimate_height(
                &shadow,
                footprint,
                0,
                sun,
                scene.image.resolution_m_per_px(),
                config.floor_height_m,
            )?)
        }
        (shadow, sun, footprint) if require_height => {
            let missing = if shadow.is_none() {
                "shadow mask"
            } else if sun.is_none() {
                "sun metadata"
            } else {
                debug_assert!(footprint.is_none());
                "building footprint"
            };
            return Err(Error::invalid(format!(
                "height estimation requested but {missing} is missing"
            )));
        }
        _ => None,
    };

    let landscaping_fraction = non_landscaped_mask
        .as_ref()
        .map(|_| evidence.get(StageId::Landscaping));
    let total = total_progress(resolved, intra_fraction, &evidence, &config.graph);
    Ok(SiteReport {
        schema: SITE_REPORT_SCHEMA,
        scene_id: scene.scene_id.clone(),
        resolved_stage: resolved,
        resolved_stage_name: resolved.name().to_string(),
        evidence: evidence.scores(),
        intra_stage_fraction: intra_fraction,
        landscaping_fraction,
        height,
        total_progress_percent: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{ChannelKind, SunMetadata};
    use proptest::prelude::*;

    fn evidence(scores: [f64; 7]) -> StageEvidence {
        StageEvidence::from_scores(scores).unwrap()
    }

    #[test]
    fn default_graph_shape() {
        let g = StageGraph::default();
        assert_eq!(
            g.ancestors(StageId::RoofCompletedHouse),
            &[
                StageId::PreparatoryWork,
                StageId::Excavation,
                StageId::Foundation,
                StageId::Basement,
                StageId::BuildingFrame,
            ]
        );
        assert_eq!(
            g.ancestors(StageId::Landscaping),
            &[
                StageId::PreparatoryWork,
                StageId::Excavation,
                StageId::Foundation,
                StageId::Basement,
                StageId::BuildingFrame,
            ]
        );
        assert!(g.ancestors(StageId::PreparatoryWork).is_empty());
    }

    #[test]
    fn cyclic_graph_rejected() {
        let edges = vec![
            (StageId::PreparatoryWork, StageId::Excavation),
            (StageId::Excavation, StageId::PreparatoryWork),
        ];
        assert!(StageGraph::new([0.5; 7], [1.0 / 7.0; 7], edges).is_err());
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(StageGraph::new([0.5; 7], [0.2; 7], vec![]).is_err());
        let mut w = [1.0 / 7.0; 7];
        w[0] = -w[0];
        assert!(StageGraph::new([0.5; 7], w, vec![]).is_err());
    }

    #[test]
    fn landscaping_progress_examples() {
        let site = Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap();
        let empty = Grid::zeros(10, 10).unwrap();
        assert_eq!(landscaping_progress(&empty, &site).unwrap(), 1.0);
        let full = Grid::filled(10, 10, 1.0).unwrap();
        assert_eq!(landscaping_progress(&full, &site).unwrap(), 0.0);
        let half = Grid::from_fn(10, 10, |x, _| if x < 5 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(landscaping_progress(&half, &site).unwrap(), 0.5);
    }

    #[test]
    fn evidence_from_inputs() {
        let site = Polygon::rect(0.0, 0.0, 20.0, 20.0).unwrap();
        // nothing at all → all zero
        let e = stage_evidence(&EvidenceInputs::default(), &site).unwrap();
        assert_eq!(e.scores(), [0.0; 7]);
        // one foundation detection
        let det = BBox::new(StageId::Foundation, 1.0, 1.0, 5.0, 5.0, 0.7).unwrap();
        let e = stage_evidence(
            &EvidenceInputs {
                detections: std::slice::from_ref(&det),
                ..Default::default()
            },
            &site,
        )
        .unwrap();
        assert_eq!(e.get(StageId::Foundation), 0.7);
        // frame mask covering 30% of the site
        let frame = Grid::from_fn(20, 20, |_, y| if y < 6 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(frame.count_set(), 120);
        let e = stage_evidence(
            &EvidenceInputs {
                frame_mask: Some(&frame),
                ..Default::default()
            },
            &site,
        )
        .unwrap();
        assert!((e.get(StageId::BuildingFrame) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn resolve_examples() {
        let g = StageGraph::default();
        assert_eq!(resolve_stage(&StageEvidence::zero(), &g), (StageId::PreparatoryWork, 0.0));
        // roof alone satisfies ancestors transitively
        let e = evidence([0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.0]);
        assert_eq!(resolve_stage(&e, &g), (StageId::RoofCompletedHouse, 1.0));
        // frame resolved with its own fraction
        let e = evidence([0.9, 0.9, 0.9, 0.9, 0.6, 0.0, 0.0]);
        assert_eq!(resolve_stage(&e, &g), (StageId::BuildingFrame, 0.6));
    }

    #[test]
    fn total_progress_examples() {
        let g = StageGraph::default();
        assert_eq!(progress_from_evidence(&StageEvidence::zero(), &g), 0.0);
        let all = evidence([1.0; 7]);
        assert!((progress_from_evidence(&all, &g) - 100.0).abs() < 1e-9);
        // foundation complete, basement at zero → 3/7
        let e = evidence([0.9, 0.9, 0.9, 0.0, 0.0, 0.0, 0.0]);
        assert!((progress_from_evidence(&e, &g) - 300.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn landscaping_contributes_in_parallel() {
        let g = StageGraph::default();
        // roof done, landscaping half done but below threshold
        let e = evidence([0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.4]);
        let expected = 100.0 * (6.0 / 7.0 + 0.4 / 7.0);
        assert!((progress_from_evidence(&e, &g) - expected).abs() < 1e-9);
        // crossing the landscaping threshold is continuous
        let just_below = evidence([0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.4999]);
        let just_above = evidence([0.0, 0.0, 0.0, 0.0, 0.0, 0.9, 0.5]);
        let below = progress_from_evidence(&just_below, &g);
        let above = progress_from_evidence(&just_above, &g);
        assert!(above >= below);
        assert!(above - below < 0.1, "no jump at the threshold: {below} -> {above}");
    }

    fn scene(w: u32, h: u32, sun: Option<SunMetadata>) -> SceneInputs {
        let image = RasterImage::new(
            vec![ChannelKind::Red],
            vec![Grid::filled(w, h, 0.3).unwrap()],
            0.5,
            sun,
        )
        .unwrap();
        SceneInputs {
            scene_id: "test".to_string(),
            image,
            site: None,
            footprint: None,
        }
    }

    #[test]
    fn blank_scene_assesses_to_zero() {
        let report = assess_scene(
            &scene(32, 32, None),
            &ModelOutputs::default(),
            &AssessConfig::default(),
            false,
        )
        .unwrap();
        assert_eq!(report.resolved_stage, StageId::PreparatoryWork);
        assert_eq!(report.total_progress_percent, 0.0);
        assert!(report.height.is_none());
    }

    #[test]
    fn require_height_fails_without_sun() {
        let mut inputs = scene(32, 32, None);
        inputs.footprint = Some(Polygon::rect(10.0, 10.0, 20.0, 20.0).unwrap());
        let outputs = ModelOutputs {
            shadow_prob: Some(Grid::zeros(32, 32).unwrap()),
            ..Default::default()
        };
        let err = assess_scene(&inputs, &outputs, &AssessConfig::default(), true).unwrap_err();
        assert!(err.to_string().contains("sun"), "{err}");
    }

    #[test]
    fn report_roundtrips_through_json() {
        let report = SiteReport {
            schema: SITE_REPORT_SCHEMA,
            scene_id: "s".to_string(),
            resolved_stage: StageId::BuildingFrame,
            resolved_stage_name: StageId::BuildingFrame.name().to_string(),
            evidence: [0.9, 0.8, 0.7, 0.6, 0.5, 0.0, 0.1],
            intra_stage_fraction: 0.5,
            landscaping_fraction: Some(0.1),
            height: None,
            total_progress_percent: 61.43,
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: SiteReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    fn arb_evidence() -> impl Strategy<Value = [f64; 7]> {
        proptest::array::uniform7(0.0f64..=1.0)
    }

    proptest! {
        #[test]
        fn progress_monotone_in_evidence(
            base in arb_evidence(),
            bump in arb_evidence(),
        ) {
            let g = StageGraph::default();
            let e1 = evidence(base);
            let mut raised = base;
            for (r, b) in raised.iter_mut().zip(bump) {
                *r = (*r + b).min(1.0);
            }
            let e2 = evidence(raised);
            let p1 = progress_from_evidence(&e1, &g);
            let p2 = progress_from_evidence(&e2, &g);
            prop_assert!(p2 >= p1 - 1e-12, "evidence increase dropped progress: {p1} -> {p2}");
        }

        #[test]
        fn resolved_stage_prerequisites_hold(e in arb_evidence()) {
            let g = StageGraph::default();
            let ev = evidence(e);
            let (stage, fraction) = resolve_stage(&ev, &g);
            prop_assert!((0.0..=1.0).contains(&fraction));
            for &a in g.ancestors(stage) {
                prop_assert!(effectively_satisfied(&ev, &g, a));
            }
            let total = total_progress(stage, fraction, &ev, &g);
            prop_assert!((0.0..=100.0).contains(&total));
        }
    }
}
