//! The semi-supervised loop with both mock models: the perfect oracle and a
//! scripted model that improves a little every round.
//!
//! ```bash
//! cargo run --example pseudo_labeling
//! ```

use sitewatch::postprocess::binarize;
use sitewatch::pseudolabel::{
    run_pseudo_labeling, LabeledScene, ModelScript, OracleModel, PseudoLabelConfig, ScriptedModel,
    UnlabeledScene,
};
use sitewatch::raster::{ChannelKind, RasterImage};
use sitewatch::{Grid, Result};

/// Scene whose mask equals its red channel thresholded at 0.5, the
/// derivation both mocks predict from.
fn scene(id: &str, offset: u32) -> Result<LabeledScene> {
    let plane = Grid::from_fn(24, 24, |x, y| {
        if (x + offset) % 9 < 4 && (y + offset) % 5 < 3 {
            0.9
        } else {
            0.1
        }
    })?;
    let mask = binarize(&plane, 0.5);
    Ok(LabeledScene {
        id: id.to_string(),
        image: RasterImage::new(vec![ChannelKind::Red], vec![plane], 1.0, None)?,
        mask,
    })
}

fn print_history(name: &str, history: &sitewatch::pseudolabel::PseudoLabelHistory) {
    println!("{name}:");
    for r in &history.rounds {
        println!(
            "  round {}: holdout IoU {:.4}, pseudo-labeled images {}",
            r.round, r.holdout_iou, r.pseudo_added
        );
    }
    if history.early_stopped {
        println!("  early stop on holdout regression");
    }
}

fn main() -> Result<()> {
    let labeled = vec![scene("l0", 0)?, scene("l1", 2)?];
    let unlabeled: Vec<UnlabeledScene> = [("u0", 1u32), ("u1", 3), ("u2", 5), ("u3", 7)]
        .iter()
        .map(|&(id, off)| {
            let s = scene(id, off)?;
            Ok(UnlabeledScene {
                id: s.id,
                image: s.image,
            })
        })
        .collect::<Result<_>>()?;
    let holdout = vec![scene("h0", 4)?, scene("h1", 6)?];
    let config = PseudoLabelConfig::default();

    let mut oracle = OracleModel::new(ChannelKind::Red);
    let history = run_pseudo_labeling(&mut oracle, &labeled, &unlabeled, &holdout, &config)?;
    print_history("perfect oracle", &history);

    let script = ModelScript {
        initial_iou: 0.88,
        round_gains: vec![0.01, 0.01, 0.01],
    };
    let mut improving = ScriptedModel::new(script, ChannelKind::Red, 42);
    let history = run_pseudo_labeling(&mut improving, &labeled, &unlabeled, &holdout, &config)?;
    print_history("scripted, +0.01 IoU per round", &history);

    let script = ModelScript {
        initial_iou: 0.88,
        round_gains: vec![0.01, -0.08, 0.01],
    };
    let mut regressing = ScriptedModel::new(script, ChannelKind::Red, 42);
    let history = run_pseudo_labeling(&mut regressing, &labeled, &unlabeled, &holdout, &config)?;
    print_history("scripted, regression in round 2", &history);
    Ok(())
}
