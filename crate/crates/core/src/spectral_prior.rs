//! Weight-space sampling of Gaussian-process priors.
//!
//! The univariate squared-exponential kernel `exp(-(x - x')^2 / (2 l^2))`
//! has a closed-form Mercer expansion with respect to the Gaussian measure
//! `N(0, sigma^2)`: geometric eigenvalues and Hermite-function
//! eigenfunctions. A separable prior draw is the product of one truncated
//! expansion per input dimension. Random Fourier features give the
//! alternative (and much less accurate) weight-space prior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

/// Hard cap on the number of retained eigenpairs per dimension.
pub const MAX_TERMS: usize = 1000;

/// Default truncation ratio `lambda_{N-1} / lambda_1`.
pub const DEFAULT_ETA: f64 = 1e-16;

const RESCALE: f64 = 1e150;

/// Truncated Mercer spectrum of a univariate SE kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis1D {
    length_scale: f64,
    measure_sigma: f64,
    a: f64,
    b: f64,
    c: f64,
    big_a: f64,
    eigenvalues: Vec<f64>,
    // Recurrence constants: sqrt(2/k), sqrt((k-1)/k), sqrt(2 k c).
    rec_t: Vec<f64>,
    rec_prev: Vec<f64>,
    rec_deriv: Vec<f64>,
    log_norm: f64,
}

/// Spectrum for length scale `l`, measure scale `sigma`, truncated at the
/// smallest `N` with `lambda_{N-1} / lambda_1 <= eta` (at most [`MAX_TERMS`]).
pub fn se_spectrum(l: f64, sigma: f64, eta: f64) -> Result<SpectralBasis1D> {
    if !(l > 0.0 && l.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "length scale and measure scale must be positive (l = {l}, sigma = {sigma})"
        )));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    let a = 0.5 / (sigma * sigma);
    let b = 0.5 / (l * l);
    let c = (a * a + 4.0 * a * b).sqrt();
    let big_a = 0.5 * a + b + 0.5 * c;
    let ratio = b / big_a;
    let mut n = 2;
    while n < MAX_TERMS && ratio.powi(n as i32 - 2) > eta {
        n += 1;
    }
    Ok(SpectralBasis1D::build(l, sigma, a, b, c, big_a, n))
}

impl SpectralBasis1D {
    fn build(l: f64, sigma: f64, a: f64, b: f64, c: f64, big_a: f64, n: usize) -> Self {
        let lead = (a / big_a).sqrt();
        let ratio = b / big_a;
        let mut eigenvalues = Vec::with_capacity(n);
        let mut lam = lead;
        for _ in 0..n {
            eigenvalues.push(lam);
            lam *= ratio;
        }
        let rec_t = (0..n)
            .map(|k| if k == 0 { 0.0 } else { (2.0 / k as f64).sqrt() })
            .collect();
        let rec_prev = (0..n)
            .map(|k| if k == 0 { 0.0 } else { ((k as f64 - 1.0) / k as f64).sqrt() })
            .collect();
        let rec_deriv = (0..n).map(|k| (2.0 * k as f64 * c).sqrt()).collect();
        Self {
            length_scale: l,
            measure_sigma: sigma,
            a,
            b,
            c,
            big_a,
            eigenvalues,
            rec_t,
            rec_prev,
            rec_deriv,
            log_norm: 0.25 * (c / a).ln(),
        }
    }

    /// Same spectrum with exactly `n` retained terms.
    pub fn with_terms(&self, n: usize) -> Self {
        let n = n.clamp(1, MAX_TERMS);
        Self::build(
            self.length_scale,
            self.measure_sigma,
            self.a,
            self.b,
            self.c,
            self.big_a,
            n,
        )
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }
    pub fn measure_sigma(&self) -> f64 {
        self.measure_sigma
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn big_a(&self) -> f64 {
        self.big_a
    }
    /// Geometric decay ratio `b / A` of the eigenvalues.
    pub fn ratio(&self) -> f64 {
        self.b / self.big_a
    }
    pub fn n_terms(&self) -> usize {
        self.eigenvalues.len()
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The SE kernel this spectrum expands.
    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let r = (x - y) / self.length_scale;
        (-0.5 * r * r).exp()
    }

    /// Writes `phi_0(x) .. phi_{len-1}(x)` into `out`.
    pub fn eigenfunctions_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        let n = out.len().min(self.n_terms());
        let t = self.c.sqrt() * x;
        let mut log_scale = self.log_norm - 0.5 * (self.c - self.a) * x * x;
        let mut scale = log_scale.exp();
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            if k > 0 {
                let next = self.rec_t[k] * t * cur - self.rec_prev[k] * prev;
                prev = cur;
                cur = next;
                if cur.abs() > RESCALE {
                    cur /= RESCALE;
                    prev /= RESCALE;
                    log_scale += RESCALE.ln();
                    scale = log_scale.exp();
                }
            }
            let v = cur * scale;
            if !v.is_finite() {
                return Err(Error::EigenfunctionOverflow);
            }
            out[k] = v;
        }
        Ok(())
    }

    /// Eigenfunction `phi_k(x)`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> Result<f64> {
        if k >= self.n_terms() {
            return Err(Error::InvalidArgument(format!(
                "eigenfunction index {k} out of range (N = {})",
                self.n_terms()
            )));
        }
        let mut buf = vec![0.0; k + 1];
        self.eigenfunctions_into(x, &mut buf)?;
        Ok(buf[k])
    }

    /// `sum_k coef_k phi_k(x)` and its derivative, in one recurrence pass.
    ///
    /// Uses `phi_k' = (a - c) x phi_k + sqrt(2 k c) phi_{k-1}`.
    pub fn series_value_and_derivative(&self, coef: &[f64], x: f64) -> (f64, f64) {
        let n = coef.len().min(self.n_terms());
        let t = self.c.sqrt() * x;
        let mut log_scale = self.log_norm - 0.5 * (self.c - self.a) * x * x;
        let mut prev = 0.0;
        let mut cur = 1.0;
        let mut sum = 0.0;
        let mut dsum = 0.0;
        for k in 0..n {
            if k > 0 {
                let next = self.rec_t[k] * t * cur - self.rec_prev[k] * prev;
                // prev == phi_{k-1}: contributes to the derivative of term k.
                dsum += coef[k] * self.rec_deriv[k] * cur;
                prev = cur;
                cur = next;
                if cur.abs() > RESCALE {
                    cur /= RESCALE;
                    prev /= RESCALE;
                    sum /= RESCALE;
                    dsum /= RESCALE;
                    log_scale += RESCALE.ln();
                }
            }
            sum += coef[k] * cur;
        }
        let scale = log_scale.exp();
        let value = sum * scale;
        let deriv = (self.a - self.c) * x * value + dsum * scale;
        (value, deriv)
    }

    /// `sum_k coef_k phi_k(x)`.
    pub fn series_value(&self, coef: &[f64], x: f64) -> f64 {
        self.series_value_and_derivative(coef, x).0
    }
}

/// Sup-norm error of the truncated expansion against the SE kernel over all
/// pairs of `grid` points.
pub fn kernel_reconstruction_error(basis: &SpectralBasis1D, grid: &[f64]) -> Result<f64> {
    let n = basis.n_terms();
    let mut phis = vec![vec![0.0; n]; grid.len()];
    for (x, row) in grid.iter().zip(phis.iter_mut()) {
        basis.eigenfunctions_into(*x, row)?;
    }
    let lam = basis.eigenvalues();
    let mut worst: f64 = 0.0;
    for (i, &x) in grid.iter().enumerate() {
        for (j, &y) in grid.iter().enumerate() {
            let approx: f64 = (0..n).map(|k| lam[k] * phis[i][k] * phis[j][k]).sum();
            worst = worst.max((basis.kernel(x, y) - approx).abs());
        }
    }
    Ok(worst)
}

/// A separable prior draw `prod_i sum_k w_{i,k} sqrt(lambda_{i,k}) phi_{i,k}(x_i)`
/// of a unit-variance process.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePriorSample {
    bases: Vec<SpectralBasis1D>,
    weights: Vec<Vec<f64>>,
    coefs: Vec<Vec<f64>>,
    seed: Option<u64>,
}

/// Draws iid standard-normal weights for every retained eigenpair.
pub fn sample_prior(bases: &[SpectralBasis1D], seed: u64) -> Result<SeparablePriorSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = bases
        .iter()
        .map(|b| {
            (0..b.n_terms())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let mut s = SeparablePriorSample::from_weights(bases.to_vec(), weights)?;
    s.seed = Some(seed);
    Ok(s)
}

impl SeparablePriorSample {
    pub fn from_weights(bases: Vec<SpectralBasis1D>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidArgument("prior needs d >= 1".into()));
        }
        if bases.len() != weights.len()
            || bases.iter().zip(&weights).any(|(b, w)| b.n_terms() != w.len())
        {
            return Err(Error::InvalidArgument(
                "weight counts must match the retained terms per dimension".into(),
            ));
        }
        let coefs = bases
            .iter()
            .zip(&weights)
            .map(|(b, w)| {
                w.iter()
                    .zip(b.eigenvalues())
                    .map(|(w, l)| w * l.sqrt())
                    .collect()
            })
            .collect();
        Ok(Self {
            bases,
            weights,
            coefs,
            seed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.bases.len()
    }
    pub fn bases(&self) -> &[SpectralBasis1D] {
        &self.bases
    }
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn eval_component(&self, i: usize, x: f64) -> f64 {
        self.bases[i].series_value(&self.coefs[i], x)
    }

    pub fn grad_component(&self, i: usize, x: f64) -> f64 {
        self.bases[i].series_value_and_derivative(&self.coefs[i], x).1
    }

    pub fn component_value_and_grad(&self, i: usize, x: f64) -> (f64, f64) {
        self.bases[i].series_value_and_derivative(&self.coefs[i], x)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|i| self.eval_component(i, x[i])).product()
    }

    /// Value and gradient by the product rule, without dividing by
    /// component values (safe at component zeros).
    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut vals = [0.0; 32];
        let mut ders = [0.0; 32];
        let (vals, ders) = if d <= 32 {
            (&mut vals[..d], &mut ders[..d])
        } else {
            return self.value_and_grad_heap(x, grad);
        };
        for i in 0..d {
            let (v, g) = self.component_value_and_grad(i, x[i]);
            vals[i] = v;
            ders[i] = g;
        }
        product_rule(vals, ders, grad)
    }

    fn value_and_grad_heap(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut vals = vec![0.0; d];
        let mut ders = vec![0.0; d];
        for i in 0..d {
            let (v, g) = self.component_value_and_grad(i, x[i]);
            vals[i] = v;
            ders[i] = g;
        }
        product_rule(&vals, &ders, grad)
    }
}

fn product_rule(vals: &[f64], ders: &[f64], grad: &mut [f64]) -> f64 {
    let d = vals.len();
    // Prefix/suffix products give prod_{j != i} without division.
    let mut prefix = 1.0;
    for i in 0..d {
        grad[i] = prefix;
        prefix *= vals[i];
    }
    let mut suffix = 1.0;
    for i in (0..d).rev() {
        grad[i] *= suffix * ders[i];
        suffix *= vals[i];
    }
    prefix
}

/// A random-Fourier-feature prior draw
/// `sqrt(2 / M) sum_m w_m cos(omega_m . x + b_m)` of a unit-variance SE process.
#[derive(Debug, Clone, PartialEq)]
pub struct RffPriorSample {
    frequencies: Vec<Vec<f64>>,
    phases: Vec<f64>,
    weights: Vec<f64>,
    amplitude: f64,
    seed: u64,
}

/// Frequencies from the SE spectral density `N(0, diag(1 / l_i^2))`,
/// phases uniform on `[0, 2 pi)`, weights standard normal.
pub fn sample_rff_prior(length_scales: &[f64], n_features: usize, seed: u64) -> Result<RffPriorSample> {
    if n_features == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    if length_scales.is_empty() || length_scales.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidArgument("length scales must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = Uniform::new(0.0, 2.0 * std::f64::consts::PI).expect("valid range");
    let mut frequencies = Vec::with_capacity(n_features);
    let mut phases = Vec::with_capacity(n_features);
    let mut weights = Vec::with_capacity(n_features);
    for _ in 0..n_features {
        frequencies.push(
            length_scales
                .iter()
                .map(|l| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z / l
                })
                .collect(),
        );
        phases.push(phase.sample(&mut rng));
        weights.push(StandardNormal.sample(&mut rng));
    }
    Ok(RffPriorSample {
        frequencies,
        phases,
        weights,
        amplitude: (2.0 / n_features as f64).sqrt(),
        seed,
    })
}

impl RffPriorSample {
    pub fn dim(&self) -> usize {
        self.frequencies[0].len()
    }
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn phase_at(&self, m: usize, x: &[f64]) -> f64 {
        self.frequencies[m]
            .iter()
            .zip(x)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.phases[m]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude
            * (0..self.n_features())
                .map(|m| self.weights[m] * self.phase_at(m, x).cos())
                .sum::<f64>()
    }

    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for m in 0..self.n_features() {
            let (s, c) = self.phase_at(m, x).sin_cos();
            value += self.weights[m] * c;
            let ws = self.weights[m] * s;
            for (g, w) in grad.iter_mut().zip(&self.frequencies[m]) {
                *g -= ws * w;
            }
        }
        grad.iter_mut().for_each(|g| *g *= self.amplitude);
        value * self.amplitude
    }

    /// Feature-space kernel `(2 / M) sum_m cos(omega_m . x + b_m) cos(omega_m . y + b_m)`.
    pub fn feature_kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = (0..self.n_features())
            .map(|m| self.phase_at(m, x).cos() * self.phase_at(m, y).cos())
            .sum();
        self.amplitude * self.amplitude * s
    }
}

/// Sup-norm error of a 1-d RFF kernel approximation with `n_features`
/// features over all pairs of `grid` points.
pub fn rff_kernel_reconstruction_error(
    length_scale: f64,
    n_features: usize,
    seed: u64,
    grid: &[f64],
) -> Result<f64> {
    let rff = sample_rff_prior(&[length_scale], n_features, seed)?;
    let mut worst: f64 = 0.0;
    for &x in grid {
        for &y in grid {
            let r = (x - y) / length_scale;
            let exact = (-0.5 * r * r).exp();
            worst = worst.max((exact - rff.feature_kernel(&[x], &[y])).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SpectralBasis1D {
        se_spectrum(1.0, 1.0, DEFAULT_ETA).unwrap()
    }

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn unit_constants() {
        let b = unit();
        assert!((b.a() - 0.5).abs() < 1e-15);
        assert!((b.b() - 0.5).abs() < 1e-15);
        assert!((b.c() - 1.118034).abs() < 1e-6);
        assert!((b.big_a() - 1.309017).abs() < 1e-6);
        assert!((b.ratio() - 0.381966).abs() < 1e-6);
        assert!((b.eigenvalues()[0] - 0.618034).abs() < 1e-6);
        assert!((b.eigenvalues()[1] - 0.236068).abs() < 1e-6);
        assert_eq!(b.n_terms(), 41);
    }

    #[test]
    fn truncation_rule_is_tight() {
        for l in [0.1, 0.3, 0.7, 1.0, 2.5] {
            for eta in [1e-4, 1e-10, 1e-16] {
                let b = se_spectrum(l, 1.0, eta).unwrap();
                let n = b.n_terms();
                let lam = b.eigenvalues();
                if n < MAX_TERMS {
                    assert!(lam[n - 1] / lam[1] <= eta);
                    assert!(lam[n - 2] / lam[1] > eta);
                }
            }
        }
        assert_eq!(se_spectrum(0.01, 1.0, 1e-16).unwrap().n_terms(), MAX_TERMS);
    }

    #[test]
    fn eigenvalues_decay_geometrically() {
        let b = se_spectrum(0.4, 1.0, 1e-16).unwrap();
        let r = b.ratio();
        for w in b.eigenvalues().windows(2) {
            assert!((w[1] / w[0] - r).abs() <= 4.0 * f64::EPSILON * r);
        }
    }

    #[test]
    fn phi0_at_origin() {
        let b = unit();
        let expect = (b.c() / b.a()).powf(0.25);
        assert!((b.eigenfunction(0, 0.0).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 1.22284).abs() < 1e-5);
    }

    #[test]
    fn odd_eigenfunctions_vanish_at_origin() {
        for l in [0.2, 1.0, 3.0] {
            let b = se_spectrum(l, 1.0, 1e-16).unwrap();
            assert_eq!(b.eigenfunction(1, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn eigenfunctions_are_finite_across_the_range() {
        let b = se_spectrum(0.01, 1.0, 1e-16).unwrap();
        let mut buf = vec![0.0; b.n_terms()];
        for x in linspace(-10.0, 10.0, 41) {
            b.eigenfunctions_into(x, &mut buf).unwrap();
            assert!(buf.iter().all(|v| v.is_finite()));
        }
    }

    /// Probabilists' Gauss-Hermite nodes and weights by Golub-Welsch on the
    /// Jacobi matrix of the weight exp(-x^2/2) / sqrt(2 pi).
    fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut j = nalgebra::DMatrix::zeros(n, n);
        for k in 1..n {
            let v = (k as f64).sqrt();
            j[(k, k - 1)] = v;
            j[(k - 1, k)] = v;
        }
        let eig = nalgebra::SymmetricEigen::new(j);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
        (nodes, weights)
    }

    #[test]
    fn orthonormal_under_gaussian_measure() {
        let b = unit();
        let (nodes, weights) = gauss_hermite(120);
        let mut phis = vec![vec![0.0; 11]; nodes.len()];
        for (x, row) in nodes.iter().zip(phis.iter_mut()) {
            b.eigenfunctions_into(*x, row).unwrap();
        }
        for j in 0..=10 {
            for k in 0..=10 {
                let s: f64 = (0..nodes.len()).map(|q| weights[q] * phis[q][j] * phis[q][k]).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-8, "({j},{k}) -> {s}");
            }
        }
    }

    #[test]
    fn reconstruction_converges() {
        let b = unit();
        let grid = linspace(-1.0, 1.0, 21);
        assert!(kernel_reconstruction_error(&b, &grid).unwrap() < 1e-10);
        assert!(kernel_reconstruction_error(&b.with_terms(1), &grid).unwrap() > 0.1);
        let diag_dev = grid
            .iter()
            .map(|&x| kernel_reconstruction_error(&b, &[x]).unwrap())
            .fold(0.0, f64::max);
        assert!(diag_dev < 1e-10);
    }

    #[test]
    fn reconstruction_matches_kernel_for_other_length_scales() {
        let grid = linspace(-1.0, 1.0, 15);
        for l in [0.15, 0.5, 2.0] {
            let b = se_spectrum(l, 1.0, 1e-16).unwrap();
            assert!(kernel_reconstruction_error(&b, &grid).unwrap() < 1e-9, "l = {l}");
        }
    }

    #[test]
    fn single_term_weights() {
        let bases = vec![unit(), se_spectrum(0.5, 1.0, 1e-16).unwrap()];
        let weights = bases
            .iter()
            .map(|b| {
                let mut w = vec![0.0; b.n_terms()];
                w[0] = 1.0;
                w
            })
            .collect();
        let s = SeparablePriorSample::from_weights(bases.clone(), weights).unwrap();
        let x = [0.3, -0.7];
        let expect: f64 = (0..2)
            .map(|i| bases[i].eigenvalues()[0].sqrt() * bases[i].eigenfunction(0, x[i]).unwrap())
            .product();
        assert!((s.eval(&x) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_give_zero_component() {
        let b = unit();
        let s = SeparablePriorSample::from_weights(vec![b.clone()], vec![vec![0.0; b.n_terms()]]).unwrap();
        for x in linspace(-1.0, 1.0, 11) {
            assert_eq!(s.eval_component(0, x), 0.0);
            assert_eq!(s.grad_component(0, x), 0.0);
        }
    }

    #[test]
    fn seeded_draws_are_deterministic() {
        let bases = vec![unit(), unit()];
        let a = sample_prior(&bases, 42).unwrap();
        let b = sample_prior(&bases, 42).unwrap();
        let c = sample_prior(&bases, 43).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn product_equals_component_values() {
        let bases = vec![unit(), se_spectrum(0.3, 1.0, 1e-16).unwrap(), unit()];
        let s = sample_prior(&bases, 7).unwrap();
        let x = [0.1, -0.4, 0.9];
        let prod = s.eval_component(0, x[0]) * s.eval_component(1, x[1]) * s.eval_component(2, x[2]);
        assert_eq!(s.eval(&x), prod);
    }

    #[test]
    fn component_gradient_matches_finite_differences() {
        let bases = vec![se_spectrum(0.25, 1.0, 1e-16).unwrap()];
        let s = sample_prior(&bases, 3).unwrap();
        let h = 1e-6;
        for i in 0..20 {
            let x = -0.95 + 1.9 * i as f64 / 19.0;
            let fd = (s.eval_component(0, x + h) - s.eval_component(0, x - h)) / (2.0 * h);
            let g = s.grad_component(0, x);
            assert!((g - fd).abs() <= 1e-5 * g.abs().max(1.0), "x = {x}: {g} vs {fd}");
        }
    }

    #[test]
    fn product_rule_gradient() {
        let bases = vec![unit(), se_spectrum(0.4, 1.0, 1e-16).unwrap()];
        let s = sample_prior(&bases, 11).unwrap();
        let x = [0.2, -0.3];
        let mut g = [0.0; 2];
        let v = s.value_and_grad(&x, &mut g);
        assert!((v - s.eval(&x)).abs() < 1e-15);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (s.eval(&xp) - s.eval(&xm)) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn prior_variance_at_origin() {
        let b = unit();
        let bases = vec![b.clone()];
        let target: f64 = (0..b.n_terms())
            .map(|k| b.eigenvalues()[k] * b.eigenfunction(k, 0.0).unwrap().powi(2))
            .sum();
        let n = 5000;
        let vals: Vec<f64> = (0..n)
            .map(|s| sample_prior(&bases, s as u64).unwrap().eval(&[0.0]))
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = target * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
    }

    #[test]
    fn rff_is_deterministic_and_matches_kernel_statistically() {
        let a = sample_rff_prior(&[1.0], 50, 5).unwrap();
        let b = sample_rff_prior(&[1.0], 50, 5).unwrap();
        assert_eq!(a, b);

        let n = 4000;
        let mut p0 = Vec::with_capacity(n);
        let mut p1 = Vec::with_capacity(n);
        for s in 0..n {
            let f = sample_rff_prior(&[1.0], 2000, s as u64).unwrap();
            p0.push(f.eval(&[0.0]));
            p1.push(f.eval(&[0.5]));
        }
        let m0 = p0.iter().sum::<f64>() / n as f64;
        let m1 = p1.iter().sum::<f64>() / n as f64;
        let cov = p0.iter().zip(&p1).map(|(a, b)| (a - m0) * (b - m1)).sum::<f64>() / (n - 1) as f64;
        let var0 = p0.iter().map(|a| (a - m0).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((cov - (-0.125f64).exp()).abs() < 0.05, "cov {cov}");
        assert!((var0 - 1.0).abs() < 0.05, "var {var0}");
    }

    #[test]
    fn rff_gradient_matches_finite_differences() {
        let f = sample_rff_prior(&[0.5, 1.5], 200, 9).unwrap();
        let x = [0.3, -0.2];
        let mut g = [0.0; 2];
        f.value_and_grad(&x, &mut g);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-6 * g[i].abs().max(1.0));
        }
    }

    #[test]
    fn rff_reconstruction_is_coarse_at_small_feature_counts() {
        let grid = linspace(-1.0, 1.0, 21);
        assert!(rff_kernel_reconstruction_error(1.0, 100, 0, &grid).unwrap() > 0.01);
    }
}
