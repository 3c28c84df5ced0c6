//! Fit the log-linear learning curve and find where the metric stops
//! growing.
//!
//! ```bash
//! cargo run --example learning_curve
//! ```

use sitewatch::metrics::{fit_learning_curve, LearningCurvePoint, DEFAULT_PLATEAU_EPSILON};
use sitewatch::Result;

fn main() -> Result<()> {
    // synthetic holdout metric: grows like 0.1·log10(n) + 0.05, flat after 25k
    let mut points = Vec::new();
    for &n in &[1_000u64, 2_000, 5_000, 10_000, 15_000, 25_000] {
        points.push(LearningCurvePoint::new(n, 0.1 * (n as f64).log10() + 0.05)?);
    }
    let ceiling = 0.1 * 25_000f64.log10() + 0.05;
    for &n in &[40_000u64, 70_000, 120_000] {
        points.push(LearningCurvePoint::new(n, ceiling + 0.002)?);
    }

    println!("n_samples  metric");
    for p in &points {
        println!("{:>9}  {:.4}", p.n_samples, p.metric);
    }

    let fit = fit_learning_curve(&points, DEFAULT_PLATEAU_EPSILON)?;
    println!("\nmetric ≈ {:.4} · log10(n) + {:.4}  (rmse {:.4})", fit.slope, fit.intercept, fit.rmse);
    match fit.plateau_n {
        Some(n) => println!("metric stops growing after n = {n}"),
        None => println!("no plateau in the sampled range"),
    }
    Ok(())
}
