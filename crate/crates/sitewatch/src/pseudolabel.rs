//! Semi-supervised pseudo-labeling over a pluggable model interface.
//!
//! The loop: train on the labeled split and record the holdout IoU; predict
//! on the unlabeled pool; pixels confident in either direction become pseudo
//! labels and images with enough confident pixels are admitted; continue
//! training on labeled ∪ admitted while validating on the *unchanged*
//! holdout; repeat up to three times, stopping early if the holdout metric
//! regresses.
//!
//! Real training is out of scope — the two mock models below let every
//! downstream consumer (CLI included) run the loop deterministically.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::metrics::mask_iou;
use crate::postprocess::binarize;
use crate::raster::{ChannelKind, RasterImage};

/// A scene with a binary segmentation target.
#[derive(Debug, Clone)]
pub struct LabeledScene {
    pub id: String,
    pub image: RasterImage,
    pub mask: Grid,
}

/// A scene without a label.
#[derive(Debug, Clone)]
pub struct UnlabeledScene {
    pub id: String,
    pub image: RasterImage,
}

/// One training sample handed to the model. Pseudo-labeled samples carry a
/// validity mask restricting supervision to the confidently labeled pixels.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub scene_id: String,
    pub image: RasterImage,
    pub target: Grid,
    /// None means every pixel supervises.
    pub valid: Option<Grid>,
}

/// The behavior contract the orchestrator drives.
///
/// `predict` must be deterministic for a fixed model state and input.
pub trait ModelInterface {
    fn train(&mut self, samples: &[TrainSample]) -> Result<()>;
    fn predict(&self, image: &RasterImage) -> Result<Grid>;
}

/// Orchestration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PseudoLabelConfig {
    /// Pseudo-labeling rounds after the supervised baseline, at most 3.
    pub max_rounds: usize,
    /// A pixel is confident when its probability is ≥ this or ≤ 1 − this.
    pub confidence_threshold: f64,
    /// An image is admitted when at least this fraction of pixels is confident.
    pub min_confident_fraction: f64,
    /// Stop early when the holdout IoU drops by more than this.
    pub regression_tolerance: f64,
    /// Keep pseudo labels from earlier rounds instead of regenerating them
    /// from the latest model.
    pub accumulate: bool,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        PseudoLabelConfig {
            max_rounds: 3,
            confidence_threshold: 0.9,
            min_confident_fraction: 0.5,
            regression_tolerance: 0.01,
            accumulate: false,
        }
    }
}

impl PseudoLabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.max_rounds) {
            return Err(Error::config(format!(
                "max_rounds must be in 1..=3, got {}",
                self.max_rounds
            )));
        }
        if !(0.5..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::config(format!(
                "confidence_threshold must be in [0.5, 1], got {}",
                self.confidence_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.min_confident_fraction) {
            return Err(Error::config(format!(
                "min_confident_fraction must be in [0,1], got {}",
                self.min_confident_fraction
            )));
        }
        if !self.regression_tolerance.is_finite() || self.regression_tolerance < 0.0 {
            return Err(Error::config("regression_tolerance must be non-negative".to_string()));
        }
        Ok(())
    }
}

/// One row of the loop history. Round 0 is the supervised baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub round: usize,
    pub holdout_iou: f64,
    pub pseudo_added: usize,
}

/// Per-round holdout metrics of the loop, emitted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoLabelHistory {
    pub rounds: Vec<RoundRecord>,
    pub early_stopped: bool,
    pub warning: Option<String>,
}

/// Runs the pseudo-labeling loop and returns its history.
///
/// The three splits must be pairwise disjoint by scene id; the holdout is
/// never touched. An empty unlabeled pool yields the baseline round plus a
/// warning.
pub fn run_pseudo_labeling(
    model: &mut dyn ModelInterface,
    labeled: &[LabeledScene],
    unlabeled: &[UnlabeledScene],
    holdout: &[LabeledScene],
    config: &PseudoLabelConfig,
) -> Result<PseudoLabelHistory> {
    config.validate()?;
    check_disjoint(labeled, unlabeled, holdout)?;
    if holdout.is_empty() {
        return Err(Error::invalid("holdout split is empty".to_string()));
    }

    let base: Vec<TrainSample> = labeled
        .iter()
        .map(|s| TrainSample {
            scene_id: s.id.clone(),
            image: s.image.clone(),
            target: s.mask.clone(),
            valid: None,
        })
        .collect();

    model.train(&base)?;
    let mut history = PseudoLabelHistory {
        rounds: vec![RoundRecord {
            round: 0,
            holdout_iou: holdout_iou(model, holdout)?,
            pseudo_added: 0,
        }],
        early_stopped: false,
        warning: None,
    };
    if unlabeled.is_empty() {
        history.warning = Some("unlabeled pool is empty; ran the supervised baseline only".to_string());
        return Ok(history);
    }

    let mut accumulated: Vec<TrainSample> = Vec::new();
    for round in 1..=config.max_rounds {
        let admitted = pseudo_label(model, unlabeled, config)?;
        let added = admitted.len();
        let pseudo: &[TrainSample] = if config.accumulate {
            // latest prediction wins per scene id
            for sample in admitted {
                match accumulated.iter_mut().find(|s| s.scene_id == sample.scene_id) {
                    Some(slot) => *slot = sample,
                    None => accumulated.push(sample),
                }
            }
            &accumulated
        } else {
            accumulated = admitted;
            &accumulated
        };
        let mut train_set = base.clone();
        train_set.extend(pseudo.iter().cloned());
        model.train(&train_set)?;
        let iou = holdout_iou(model, holdout)?;
        let prev = history.rounds.last().unwrap().holdout_iou;
        history.rounds.push(RoundRecord {
            round,
            holdout_iou: iou,
            pseudo_added: added,
        });
        if iou < prev - config.regression_tolerance {
            history.early_stopped = true;
            break;
        }
    }
    Ok(history)
}

fn check_disjoint(
    labeled: &[LabeledScene],
    unlabeled: &[UnlabeledScene],
    holdout: &[LabeledScene],
) -> Result<()> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut dups: BTreeSet<&str> = BTreeSet::new();
    let ids = labeled
        .iter()
        .map(|s| s.id.as_str())
        .chain(unlabeled.iter().map(|s| s.id.as_str()))
        .chain(holdout.iter().map(|s| s.id.as_str()));
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id);
        }
    }
    if dups.is_empty() {
        Ok(())
    } else {
        let list: Vec<&str> = dups.into_iter().collect();
        Err(Error::invalid(format!(
            "splits are not disjoint; duplicated scene ids: {}",
            list.join(", ")
        )))
    }
}

fn holdout_iou(model: &dyn ModelInterface, holdout: &[LabeledScene]) -> Result<f64> {
    let mut total = 0.0;
    for scene in holdout {
        let prob = model.predict(&scene.image)?;
        let pred = binarize(&prob, 0.5);
        total += mask_iou(&pred, &scene.mask)?;
    }
    Ok(total / holdout.len() as f64)
}

/// Predicts the unlabeled pool and admits confidently labeled images.
fn pseudo_label(
    model: &dyn ModelInterface,
    unlabeled: &[UnlabeledScene],
    config: &PseudoLabelConfig,
) -> Result<Vec<TrainSample>> {
    let mut admitted = Vec::new();
    for scene in unlabeled {
        let prob = model.predict(&scene.image)?;
        let confident = Grid::from_fn(prob.width(), prob.height(), |x, y| {
            let p = prob.get(x, y);
            if p >= config.confidence_threshold || p <= 1.0 - config.confidence_threshold {
                1.0
            } else {
                0.0
            }
        })?;
        let fraction = confident.count_set() as f64 / confident.values().len() as f64;
        if fraction >= config.min_confident_fraction {
            admitted.push(TrainSample {
                scene_id: scene.id.clone(),
                image: scene.image.clone(),
                target: binarize(&prob, 0.5),
                valid: Some(confident),
            });
        }
    }
    Ok(admitted)
}

/// Ground truth derived from the image itself: a pixel is positive iff the
/// chosen channel is ≥ 0.5. Mock fixtures construct their datasets so the
/// real mask matches this derivation.
fn derived_mask(image: &RasterImage, channel: ChannelKind) -> Result<Grid> {
    let plane = image
        .channel(channel)
        .ok_or_else(|| Error::invalid(format!("image has no {} channel", channel.name())))?;
    Ok(binarize(plane, 0.5))
}

/// A mock whose predictions equal the derived ground truth: the perfect
/// oracle. Training is a no-op.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub channel: ChannelKind,
}

impl OracleModel {
    pub fn new(channel: ChannelKind) -> Self {
        OracleModel { channel }
    }
}

impl ModelInterface for OracleModel {
    fn train(&mut self, _samples: &[TrainSample]) -> Result<()> {
        Ok(())
    }

    fn predict(&self, image: &RasterImage) -> Result<Grid> {
        derived_mask(image, self.channel)
    }
}

/// Script for [`ScriptedModel`]: the baseline holdout IoU and the expected
/// gain of each pseudo round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelScript {
    pub initial_iou: f64,
    /// One entry per pseudo round; negative gains model regressions.
    pub round_gains: Vec<f64>,
}

impl ModelScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let script: ModelScript =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("model script: {e}")))?;
        if !(0.0..=1.0).contains(&script.initial_iou) {
            return Err(Error::parse(format!(
                "model script: initial_iou out of [0,1]: {}",
                script.initial_iou
            )));
        }
        Ok(script)
    }

    fn target_iou(&self, round: usize) -> f64 {
        let gain: f64 = self.round_gains.iter().take(round).sum();
        (self.initial_iou + gain).clamp(0.0, 1.0)
    }
}

/// A mock that follows a scripted holdout-IoU trajectory.
///
/// It predicts the derived ground truth corrupted with just enough confident
/// false positives to land near the scripted IoU for the current round; each
/// `train` call advances the round. Corrupted pixel positions come from a
/// ChaCha stream seeded with the seed, the round and the image content, so
/// predictions are deterministic for a fixed state and input.
#[derive(Debug, Clone)]
pub struct ScriptedModel {
    script: ModelScript,
    channel: ChannelKind,
    seed: u64,
    trains: usize,
}

impl ScriptedModel {
    pub fn new(script: ModelScript, channel: ChannelKind, seed: u64) -> Self {
        ScriptedModel {
            script,
            channel,
            seed,
            trains: 0,
        }
    }

    fn round(&self) -> usize {
        self.trains.saturating_sub(1)
    }
}

impl ModelInterface for ScriptedModel {
    fn train(&mut self, _samples: &[TrainSample]) -> Result<()> {
        self.trains += 1;
        Ok(())
    }

    fn predict(&self, image: &RasterImage) -> Result<Grid> {
        let gt = derived_mask(image, self.channel)?;
        let target = self.script.target_iou(self.round());
        let positives = gt.count_set();
        let negatives: Vec<usize> = gt
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.5)
            .map(|(i, _)| i)
            .collect();
        // IoU of gt with k extra false positives is p / (p + k)
        let k = if target >= 1.0 || positives == 0 {
            0
        } else {
            ((positives as f64 * (1.0 - target) / target).round() as usize).min(negatives.len())
        };
        let mut flip = negatives;
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (self.round() as u64) ^ content_hash(image),
        );
        flip.shuffle(&mut rng);
        let mut values = gt.values().to_vec();
        for &i in flip.iter().take(k) {
            values[i] = 1.0;
        }
        Grid::from_values(gt.width(), gt.height(), values)
    }
}

/// Deterministic content hash over pixel bit patterns and dimensions.
fn content_hash(image: &RasterImage) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    mix(image.width() as u64);
    mix(image.height() as u64);
    for plane in image.planes() {
        for &v in plane.values() {
            mix(v.to_bits());
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scene whose mask equals the red channel thresholded at 0.5.
    fn derived_scene(id: &str, seed: u32) -> LabeledScene {
        let plane = Grid::from_fn(16, 16, |x, y| {
            if (x * 31 + y * 17 + seed * 13) % 7 < 3 {
                0.9
            } else {
                0.1
            }
        })
        .unwrap();
        let image =
            RasterImage::new(vec![ChannelKind::Red], vec![plane.clone()], 1.0, None).unwrap();
        LabeledScene {
            id: id.to_string(),
            mask: binarize(&plane, 0.5),
            image,
        }
    }

    fn splits() -> (Vec<LabeledScene>, Vec<UnlabeledScene>, Vec<LabeledScene>) {
        let labeled = vec![derived_scene("l0", 0), derived_scene("l1", 1)];
        let unlabeled = (0..3)
            .map(|i| {
                let s = derived_scene(&format!("u{i}"), 10 + i);
                UnlabeledScene {
                    id: s.id,
                    image: s.image,
                }
            })
            .collect();
        let holdout = vec![derived_scene("h0", 20), derived_scene("h1", 21)];
        (labeled, unlabeled, holdout)
    }

    #[test]
    fn oracle_model_runs_perfect_loop() {
        let (labeled, unlabeled, holdout) = splits();
        let mut model = OracleModel::new(ChannelKind::Red);
        let history = run_pseudo_labeling(
            &mut model,
            &labeled,
            &unlabeled,
            &holdout,
            &PseudoLabelConfig::default(),
        )
        .unwrap();
        assert_eq!(history.rounds.len(), 4);
        for (i, r) in history.rounds.iter().enumerate() {
            assert_eq!(r.round, i);
            assert_eq!(r.holdout_iou, 1.0);
        }
        // oracle predictions are fully confident → every image admitted
        assert!(history.rounds[1..].iter().all(|r| r.pseudo_added == 3));
        assert!(!history.early_stopped);
        assert!(history.warning.is_none());
    }

    #[test]
    fn empty_unlabeled_pool_warns_with_baseline_only() {
        let (labeled, _, holdout) = splits();
        let mut model = OracleModel::new(ChannelKind::Red);
        let history = run_pseudo_labeling(
            &mut model,
            &labeled,
            &[],
            &holdout,
            &PseudoLabelConfig::default(),
        )
        .unwrap();
        assert_eq!(history.rounds.len(), 1);
        assert!(history.warning.is_some());
    }

    #[test]
    fn overlapping_splits_rejected_with_ids() {
        let (labeled, mut unlabeled, holdout) = splits();
        unlabeled.push(UnlabeledScene {
            id: "h0".to_string(),
            image: labeled[0].image.clone(),
        });
        let mut model = OracleModel::new(ChannelKind::Red);
        let err = run_pseudo_labeling(
            &mut model,
            &labeled,
            &unlabeled,
            &holdout,
            &PseudoLabelConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("h0"), "{err}");
    }

    #[test]
    fn scripted_model_gains_monotonically() {
        let (labeled, unlabeled, holdout) = splits();
        let script = ModelScript {
            initial_iou: 0.9,
            round_gains: vec![0.01, 0.01, 0.01],
        };
        let mut model = ScriptedModel::new(script, ChannelKind::Red, 42);
        let history = run_pseudo_labeling(
            &mut model,
            &labeled,
            &unlabeled,
            &holdout,
            &PseudoLabelConfig::default(),
        )
        .unwrap();
        assert_eq!(history.rounds.len(), 4);
        for w in history.rounds.windows(2) {
            assert!(
                w[1].holdout_iou >= w[0].holdout_iou,
                "IoU regressed: {history:?}"
            );
        }
        assert!(!history.early_stopped);
        assert!(history.rounds[0].holdout_iou < 1.0);
    }

    #[test]
    fn regression_triggers_early_stop() {
        let (labeled, unlabeled, holdout) = splits();
        let script = ModelScript {
            initial_iou: 0.9,
            round_gains: vec![-0.2, 0.0, 0.0],
        };
        let mut model = ScriptedModel::new(script, ChannelKind::Red, 42);
        let history = run_pseudo_labeling(
            &mut model,
            &labeled,
            &unlabeled,
            &holdout,
            &PseudoLabelConfig::default(),
        )
        .unwrap();
        assert!(history.early_stopped);
        assert_eq!(history.rounds.len(), 2, "the regressed round is recorded, then we stop");
    }

    #[test]
    fn admitted_masks_respect_confidence_rule() {
        let (_, unlabeled, _) = splits();
        let config = PseudoLabelConfig::default();
        let model = OracleModel::new(ChannelKind::Red);
        let admitted = pseudo_label(&model, &unlabeled, &config).unwrap();
        assert_eq!(admitted.len(), unlabeled.len());
        for sample in &admitted {
            let valid = sample.valid.as_ref().unwrap();
            let prob = model.predict(&sample.image).unwrap();
            for (i, &flag) in valid.values().iter().enumerate() {
                if flag >= 0.5 {
                    let p = prob.values()[i];
                    assert!(
                        p >= config.confidence_threshold || p <= 1.0 - config.confidence_threshold
                    );
                }
            }
        }
    }

    #[test]
    fn holdout_is_untouched_across_rounds() {
        let (labeled, unlabeled, holdout) = splits();
        let fingerprint: Vec<u64> = holdout.iter().map(|s| content_hash(&s.image)).collect();
        let masks: Vec<Grid> = holdout.iter().map(|s| s.mask.clone()).collect();
        let mut model = ScriptedModel::new(
            ModelScript {
                initial_iou: 0.9,
                round_gains: vec![0.01; 3],
            },
            ChannelKind::Red,
            7,
        );
        run_pseudo_labeling(&mut model, &labeled, &unlabeled, &holdout, &PseudoLabelConfig::default())
            .unwrap();
        let after: Vec<u64> = holdout.iter().map(|s| content_hash(&s.image)).collect();
        assert_eq!(fingerprint, after);
        for (a, b) in holdout.iter().zip(&masks) {
            assert_eq!(&a.mask, b);
        }
    }

    #[test]
    fn unconfident_images_are_not_admitted() {
        /// Confident on the left half of the image, 0.6 elsewhere.
        struct HalfConfident;
        impl ModelInterface for HalfConfident {
            fn train(&mut self, _: &[TrainSample]) -> Result<()> {
                Ok(())
            }
            fn predict(&self, image: &RasterImage) -> Result<Grid> {
                Grid::from_fn(image.width(), image.height(), |x, _| {
                    if x < image.width() / 2 {
                        1.0
                    } else {
                        0.6
                    }
                })
            }
        }
        let (_, unlabeled, _) = splits();
        let config = PseudoLabelConfig::default();
        let admitted = pseudo_label(&HalfConfident, &unlabeled, &config).unwrap();
        // exactly half the pixels are confident, which meets the 0.5 floor
        assert_eq!(admitted.len(), unlabeled.len());
        for sample in &admitted {
            let valid = sample.valid.as_ref().unwrap();
            assert_eq!(valid.count_set(), valid.values().len() / 2);
        }
        let strict = PseudoLabelConfig {
            min_confident_fraction: 0.51,
            ..config
        };
        assert!(pseudo_label(&HalfConfident, &unlabeled, &strict).unwrap().is_empty());
    }

    #[test]
    fn config_bounds_enforced() {
        let mut cfg = PseudoLabelConfig {
            max_rounds: 4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.max_rounds = 0;
        assert!(cfg.validate().is_err());
        cfg.max_rounds = 2;
        cfg.confidence_threshold = 0.3;
        assert!(cfg.validate().is_err());
    }
}
