//! Adaptive Chebyshev approximation, differentiation and global rootfinding
//! of univariate real functions on an interval.
//!
//! A function is sampled at Chebyshev points of the second kind with the
//! grid doubled until the trailing coefficients reach the noise floor. When
//! the degree cap is hit the interval is bisected and each half is fitted on
//! its own, giving a [`PiecewiseCheb`]. Roots are the real eigenvalues of the
//! colleague matrix of each piece.

mod colleague;
mod eig;

pub use colleague::ColleagueMatrix;
pub use eig::eig_hessenberg;

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerances controlling [`fit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Largest polynomial degree on a single piece.
    pub max_degree: usize,
    /// Largest number of bisections from the parent interval.
    pub max_depth: usize,
    /// Trailing coefficients below `tail_tol * vscale` count as converged.
    pub tail_tol: f64,
    /// Off-grid check tolerance, relative to the sampled `max |f|`.
    pub check_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_degree: 100,
            max_depth: 20,
            tail_tol: 1e-13,
            check_tol: 1e-12,
        }
    }
}

/// Imaginary-part tolerance for accepting an eigenvalue as a real root.
const IMAG_TOL: f64 = 1e-10;
/// Relative inflation of `[-1, 1]` when accepting roots near the edges.
const EDGE_TOL: f64 = 1e-12;
/// Roots closer than this are merged.
const MERGE_TOL: f64 = 1e-10;

/// Chebyshev series `sum_k a_k T_k(t)` with `t` the affine image of
/// `x in [lo, hi]` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl ChebSeries {
    /// Builds a series, dropping exactly-zero trailing coefficients.
    pub fn new(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        let mut coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        Ok(Self { coeffs, lo, hi })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest coefficient magnitude.
    pub fn vscale(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    fn unit_to_x(&self, t: f64) -> f64 {
        let x = 0.5 * (self.lo + self.hi) + 0.5 * (self.hi - self.lo) * t;
        x.clamp(self.lo, self.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.to_unit(x))
    }

    /// Exact derivative of the polynomial with respect to `x`.
    pub fn differentiate(&self) -> ChebSeries {
        let mut d = derivative_coeffs(&self.coeffs);
        let scale = 2.0 / (self.hi - self.lo);
        d.iter_mut().for_each(|c| *c *= scale);
        ChebSeries::new(d, self.lo, self.hi).expect("interval already validated")
    }

    /// Real roots in the interval, sorted ascending.
    pub fn roots(&self) -> Result<Vec<f64>> {
        let vmax = self.vscale();
        if vmax == 0.0 {
            return Ok(Vec::new());
        }
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= f64::EPSILON * vmax {
            coeffs.pop();
        }
        if coeffs.len() == 1 {
            return Ok(Vec::new());
        }
        let dcoeffs = derivative_coeffs(&coeffs);
        let eigs = ColleagueMatrix::new(&coeffs)?.eigenvalues()?;
        let mut out: Vec<f64> = eigs
            .into_iter()
            .filter(|z| z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()))
            .filter(|z| z.re.abs() <= 1.0 + 1e-8)
            .map(|z| polish(&coeffs, &dcoeffs, z.re))
            .filter(|t| t.abs() <= 1.0 + EDGE_TOL)
            .map(|t| self.unit_to_x(t.clamp(-1.0, 1.0)))
            .collect();
        out.sort_by(f64::total_cmp);
        Ok(merge_close(out))
    }
}

/// Contiguous Chebyshev pieces tiling a parent interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCheb {
    pieces: Vec<ChebSeries>,
}

impl PiecewiseCheb {
    /// Pieces must be ordered and share their seam points exactly.
    pub fn from_pieces(pieces: Vec<ChebSeries>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidArgument("no pieces".into()));
        }
        for w in pieces.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::InvalidArgument(
                    "pieces must tile the interval contiguously".into(),
                ));
            }
        }
        Ok(Self { pieces })
    }

    pub fn single(series: ChebSeries) -> Self {
        Self {
            pieces: vec![series],
        }
    }

    pub fn pieces(&self) -> &[ChebSeries] {
        &self.pieces
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces.last().unwrap().hi)
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(ChebSeries::degree).max().unwrap_or(0)
    }

    pub fn vscale(&self) -> f64 {
        self.pieces.iter().fold(0.0, |m, p| m.max(p.vscale()))
    }

    fn piece_for(&self, x: f64) -> &ChebSeries {
        let idx = self.pieces.partition_point(|p| p.hi < x);
        &self.pieces[idx.min(self.pieces.len() - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_for(x).eval(x)
    }

    pub fn differentiate(&self) -> PiecewiseCheb {
        PiecewiseCheb {
            pieces: self.pieces.iter().map(ChebSeries::differentiate).collect(),
        }
    }

    /// All real roots in the interval, sorted and with seam duplicates merged.
    pub fn roots(&self) -> Result<Vec<f64>> {
        let mut all = Vec::new();
        for p in &self.pieces {
            all.extend(p.roots()?);
        }
        all.sort_by(f64::total_cmp);
        Ok(merge_close(all))
    }
}

/// Adaptive piecewise Chebyshev approximation of `f` on `[lo, hi]` with the
/// default tolerances.
pub fn fit<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<PiecewiseCheb> {
    fit_with(f, lo, hi, &FitOptions::default())
}

pub fn fit_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: &FitOptions,
) -> Result<PiecewiseCheb> {
    check_interval(lo, hi)?;
    if opts.max_degree < 1 {
        return Err(Error::InvalidArgument("max_degree must be >= 1".into()));
    }
    let mut pieces = Vec::new();
    let mut vscale = 0.0;
    fit_recursive(&f, lo, hi, 0, opts, &mut vscale, &mut pieces)?;
    Ok(PiecewiseCheb { pieces })
}

/// Free-function form of [`ChebSeries::differentiate`].
pub fn differentiate(s: &ChebSeries) -> ChebSeries {
    s.differentiate()
}

/// Free-function form of [`PiecewiseCheb::roots`].
pub fn roots(p: &PiecewiseCheb) -> Result<Vec<f64>> {
    p.roots()
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }
    Ok(())
}

fn fit_recursive<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    depth: usize,
    opts: &FitOptions,
    vscale: &mut f64,
    pieces: &mut Vec<ChebSeries>,
) -> Result<()> {
    if let Some(series) = fit_interval(f, lo, hi, opts, vscale)? {
        pieces.push(series);
        return Ok(());
    }
    if depth >= opts.max_depth {
        return Err(Error::DepthExceeded { lo, hi });
    }
    let mid = 0.5 * (lo + hi);
    fit_recursive(f, lo, mid, depth + 1, opts, vscale, pieces)?;
    fit_recursive(f, mid, hi, depth + 1, opts, vscale, pieces)
}

/// Tries grids of 9, 17, 33, ... points (capped at `max_degree + 1`) on a
/// single interval. `None` means the degree cap was reached unresolved.
fn fit_interval<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    opts: &FitOptions,
    vscale: &mut f64,
) -> Result<Option<ChebSeries>> {
    let map = |t: f64| {
        if t >= 1.0 {
            hi
        } else if t <= -1.0 {
            lo
        } else {
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        }
    };
    let sample = |t: f64| -> Result<f64> {
        let x = map(t);
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample(x))
        }
    };

    let mut n = 8usize;
    loop {
        let n_eff = n.min(opts.max_degree);
        let mut values = Vec::with_capacity(n_eff + 1);
        for j in 0..=n_eff {
            let t = (j as f64 * PI / n_eff as f64).cos();
            let v = sample(t)?;
            *vscale = vscale.max(v.abs());
            values.push(v);
        }
        let coeffs = values_to_coeffs(&values);
        let tol = opts.tail_tol * *vscale;
        let tail_ok = coeffs.len() < 3
            || coeffs[coeffs.len() - 2..].iter().all(|c| c.abs() <= tol);

        if tail_ok {
            // Off-grid check at the interleaved Chebyshev points.
            let mut check_ok = true;
            for j in 0..n_eff {
                let t = ((j as f64 + 0.5) * PI / n_eff as f64).cos();
                let v = sample(t)?;
                *vscale = vscale.max(v.abs());
                if (v - clenshaw(&coeffs, t)).abs() > opts.check_tol * *vscale {
                    check_ok = false;
                    break;
                }
            }
            if check_ok {
                let mut trimmed = coeffs;
                let tol = opts.tail_tol * *vscale;
                while trimmed.len() > 1 && trimmed.last().unwrap().abs() <= tol {
                    trimmed.pop();
                }
                return ChebSeries::new(trimmed, lo, hi).map(Some);
            }
        }
        if n_eff >= opts.max_degree {
            return Ok(None);
        }
        n *= 2;
    }
}

/// Coefficients of the interpolant through values at `cos(j pi / n)`,
/// `j = 0..=n`, by direct cosine-transform summation.
fn values_to_coeffs(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    if n == 0 {
        return vec![values[0]];
    }
    let table: Vec<f64> = (0..2 * n).map(|j| (j as f64 * PI / n as f64).cos()).collect();
    let mut coeffs = vec![0.0; n + 1];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut s = 0.5 * (values[0] + values[n] * table[(n * k) % (2 * n)]);
        for (j, v) in values.iter().enumerate().take(n).skip(1) {
            s += v * table[(j * k) % (2 * n)];
        }
        *ck = 2.0 * s / n as f64;
    }
    coeffs[0] *= 0.5;
    coeffs[n] *= 0.5;
    coeffs
}

fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + t * b1 - b2
}

/// Derivative coefficients with respect to the unit variable.
fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    let m = c.len() - 1;
    if m == 0 {
        return vec![0.0];
    }
    let mut d = vec![0.0; m + 1];
    for k in (1..=m).rev() {
        d[k - 1] = d.get(k + 1).copied().unwrap_or(0.0) + 2.0 * k as f64 * c[k];
    }
    d[0] *= 0.5;
    d.truncate(m);
    d
}

fn polish(c: &[f64], dc: &[f64], t0: f64) -> f64 {
    let mut t = t0;
    let mut r = clenshaw(c, t).abs();
    for _ in 0..3 {
        let d = clenshaw(dc, t);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let cand = t - clenshaw(c, t) / d;
        let rc = clenshaw(c, cand).abs();
        if !(rc < r) || (cand - t).abs() > 1e-3 {
            break;
        }
        t = cand;
        r = rc;
    }
    t
}

fn merge_close(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match out.last() {
            Some(&prev) if (r - prev).abs() <= MERGE_TOL => {}
            _ => out.push(r),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn fit_identity_is_t1() {
        let p = fit(|x| x, -1.0, 1.0).unwrap();
        assert_eq!(p.pieces().len(), 1);
        let c = p.pieces()[0].coeffs();
        assert_eq!(c.len(), 2);
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_constant() {
        let p = fit(|_| 5.0, 0.0, 3.0).unwrap();
        assert_eq!(p.pieces().len(), 1);
        let c = p.pieces()[0].coeffs();
        assert_eq!(c.len(), 1);
        assert!((c[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn fit_cos_on_full_period() {
        let p = fit(f64::cos, 0.0, TAU).unwrap();
        let err = (0..1000)
            .map(|i| TAU * i as f64 / 999.0)
            .map(|x| (p.eval(x) - x.cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "max error {err}");
    }

    #[test]
    fn fit_reports_non_finite_sample() {
        let err = fit(|x| 1.0 / x, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteSample(x) if x == 0.0));
    }

    #[test]
    fn fit_rejects_bad_interval() {
        assert!(matches!(
            fit(|x| x, 1.0, 1.0),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn degree_cap_forces_subdivision() {
        let f = |x: f64| (20.0 * x).sin();
        let p = fit(f, 0.0, 20.0).unwrap();
        assert!(p.pieces().len() > 1);
        assert!(p.pieces().iter().all(|s| s.degree() <= 100));
        for w in p.pieces().windows(2) {
            assert_eq!(w[0].interval().1, w[1].interval().0);
        }
        assert_eq!(p.interval(), (0.0, 20.0));
        for i in 0..500 {
            let x = 20.0 * i as f64 / 499.0;
            assert!((p.eval(x) - f(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn aliasing_high_degree_polynomial_is_caught() {
        // T_20 interpolated on 17 points aliases onto T_12 with a clean tail.
        let t20 = |x: f64| (20.0 * x.clamp(-1.0, 1.0).acos()).cos();
        let p = fit(t20, -1.0, 1.0).unwrap();
        assert_eq!(p.pieces()[0].degree(), 20);
        assert!((p.pieces()[0].coeffs()[20] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn differentiate_t2() {
        let s = ChebSeries::new(vec![0.0, 0.0, 1.0], -1.0, 1.0).unwrap();
        assert_eq!(s.differentiate().coeffs(), &[0.0, 4.0]);
    }

    #[test]
    fn differentiate_constant_is_zero() {
        let s = ChebSeries::new(vec![5.0], 0.0, 1.0).unwrap();
        let d = s.differentiate();
        assert_eq!(d.coeffs(), &[0.0]);
        assert_eq!(d.eval(0.3), 0.0);
    }

    #[test]
    fn differentiate_accounts_for_interval_scaling() {
        // x^2 on [0, 4]: derivative 2x.
        let p = fit(|x| x * x, 0.0, 4.0).unwrap();
        let d = p.differentiate();
        for x in [0.0, 0.7, 2.0, 3.9] {
            assert!((d.eval(x) - 2.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_sin_vanishes_at_half_pi() {
        let d = fit(f64::sin, 0.0, PI).unwrap().differentiate();
        assert!(d.eval(PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn roots_of_t2() {
        let p = fit(|x| 2.0 * x * x - 1.0, -1.0, 1.0).unwrap();
        let r = p.roots().unwrap();
        let h = 0.5f64.sqrt();
        assert_eq!(r.len(), 2);
        assert!((r[0] + h).abs() < 1e-14);
        assert!((r[1] - h).abs() < 1e-14);
    }

    #[test]
    fn roots_of_sine() {
        let r = fit(f64::sin, 0.5, 9.0).unwrap().roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - PI).abs() < 1e-12);
        assert!((r[1] - TAU).abs() < 1e-12);
    }

    #[test]
    fn no_real_roots() {
        let r = fit(|x| x * x + 1.0, -1.0, 1.0).unwrap().roots().unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn roots_at_interval_ends_are_kept() {
        let r = fit(f64::sin, 0.0, PI).unwrap().roots().unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[0].abs() < 1e-12 && (r[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn roots_across_many_pieces() {
        let p = fit(f64::sin, 0.0, 300.0).unwrap();
        assert!(p.pieces().len() > 1);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 96);
        for (k, x) in r.iter().enumerate() {
            assert!((x - k as f64 * PI).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_series_has_no_roots() {
        let s = ChebSeries::new(vec![0.0, 0.0], -1.0, 1.0).unwrap();
        assert_eq!(s.degree(), 0);
        assert!(s.roots().unwrap().is_empty());
    }

    #[test]
    fn clenshaw_reproduces_samples_at_nodes() {
        let f = |x: f64| (3.0 * x).exp() * (5.0 * x).sin();
        let p = fit(f, -1.0, 1.0).unwrap();
        let s = &p.pieces()[0];
        let n = s.degree();
        let scale = (0..=n)
            .map(|j| f((j as f64 * PI / n as f64).cos()).abs())
            .fold(0.0, f64::max);
        for j in 0..=n {
            let x = (j as f64 * PI / n as f64).cos();
            assert!((s.eval(x) - f(x)).abs() <= 1e-12 * scale);
        }
    }
}
