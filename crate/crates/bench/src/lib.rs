//! Shared fixtures for the criterion benches.

use tsroots::gp::{Dataset, GpModel, SeparableSEKernel};

/// A GP on `n` quasi-random points in `[-1, 1]^d` with a smooth response.
pub fn toy_model(n: usize, d: usize, length_scale: f64) -> GpModel {
    // Additive recurrence with irrational steps; fine for a fixture.
    let steps: Vec<f64> = (0..d).map(|i| ((i + 2) as f64).sqrt().fract()).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|k| steps.iter().map(|s| 2.0 * ((k as f64 + 0.5) * s).fract() - 1.0).collect())
        .collect();
    let y = x.iter().map(|p| p.iter().map(|v| (3.0 * v).sin()).sum::<f64>()).collect();
    let data = Dataset::new(x, y, 1e-6).expect("distinct points");
    GpModel::new(SeparableSEKernel::isotropic(1.0, length_scale, d).expect("valid kernel"), data).expect("factorizable")
}
