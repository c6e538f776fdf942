//! Box-constrained quasi-Newton descent: L-BFGS directions on the free
//! variables, projected backtracking line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// An axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("box bounds need matching nonempty lo/hi".into()));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidInterval { lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The normalized domain `[-1, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Self {
            lo: vec![-1.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| v >= l && v <= h)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lo[i] && v <= self.hi[i]) {
                return Err(Error::OutOfDomain {
                    dim: i,
                    value: v,
                    lo: self.lo[i],
                    hi: self.hi[i],
                });
            }
        }
        Ok(())
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub max_iter: usize,
    /// Stop when `|projected gradient|_inf <= grad_tol * (1 + |f|)`.
    pub grad_tol: f64,
    pub step_tol: f64,
    pub memory: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            step_tol: 1e-12,
            memory: 10,
        }
    }
}

/// Result of one local descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// The objective returned a non-finite value or gradient.
    pub aborted: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;
const LOOSE_GRAD_TOL: f64 = 1e-6;

/// Minimizes `f` over `bounds` from `start` with default options.
///
/// `f(x, grad)` returns the objective and writes its gradient.
pub fn local_minimize<F>(f: F, start: &[f64], bounds: &BoxBounds) -> LocalOptimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    local_minimize_with(f, start, bounds, &LocalOptions::default())
}

pub fn local_minimize_with<F>(mut f: F, start: &[f64], bounds: &BoxBounds, opts: &LocalOptions) -> LocalOptimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = bounds.dim();
    let mut x = start.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; d];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    let start_value = fx;
    let mut out = LocalOptimum {
        x: x.clone(),
        value: fx,
        start_value,
        iterations: 0,
        evaluations: evals,
        converged: false,
        aborted: false,
    };
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        out.aborted = true;
        return out;
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut xt = vec![0.0; d];
    let mut gt = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut iter = 0;
    let mut converged = false;
    let mut aborted = false;

    while iter < opts.max_iter {
        let active: Vec<bool> = (0..d)
            .map(|i| (x[i] <= bounds.lo[i] && g[i] > 0.0) || (x[i] >= bounds.hi[i] && g[i] < 0.0))
            .collect();
        let pg_norm = (0..d)
            .filter(|&i| !active[i])
            .fold(0.0f64, |m, i| m.max(g[i].abs()));
        if pg_norm <= opts.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        iter += 1;

        two_loop(&g, &active, &pairs, &mut dir);
        let slope: f64 = (0..d).map(|i| g[i] * dir[i]).sum();
        let mut quasi_newton = !pairs.is_empty();
        if !(slope < 0.0) {
            steepest(&g, &active, &mut dir);
            quasi_newton = false;
        }

        let mut accepted = false;
        let mut f_new = fx;
        loop {
            let mut t = if quasi_newton { 1.0 } else { (1.0 / pg_norm).min(1.0) };
            for _ in 0..MAX_BACKTRACK {
                for i in 0..d {
                    xt[i] = (x[i] + t * dir[i]).clamp(bounds.lo[i], bounds.hi[i]);
                }
                let ft = f(&xt, &mut gt);
                evals += 1;
                if !ft.is_finite() || gt.iter().any(|v| !v.is_finite()) {
                    aborted = true;
                    break;
                }
                let decrease: f64 = (0..d).map(|i| g[i] * (xt[i] - x[i])).sum();
                if ft <= fx + ARMIJO * decrease && ft <= fx {
                    accepted = true;
                    f_new = ft;
                    break;
                }
                t *= 0.5;
            }
            if accepted || aborted || !quasi_newton {
                break;
            }
            steepest(&g, &active, &mut dir);
            quasi_newton = false;
        }
        if aborted || !accepted {
            converged = pg_norm <= LOOSE_GRAD_TOL * (1.0 + fx.abs());
            break;
        }

        let s: Vec<f64> = (0..d).map(|i| xt[i] - x[i]).collect();
        let y: Vec<f64> = (0..d).map(|i| gt[i] - g[i]).collect();
        let step = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gt);
        fx = f_new;

        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        if step <= opts.step_tol {
            let pg = projected_grad_norm(&x, &g, bounds);
            converged = pg <= LOOSE_GRAD_TOL * (1.0 + fx.abs());
            break;
        }
    }

    out.x = x;
    out.value = fx;
    out.iterations = iter;
    out.evaluations = evals;
    out.converged = converged && !aborted;
    out.aborted = aborted;
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn projected_grad_norm(x: &[f64], g: &[f64], b: &BoxBounds) -> f64 {
    (0..x.len())
        .filter(|&i| !((x[i] <= b.lo[i] && g[i] > 0.0) || (x[i] >= b.hi[i] && g[i] < 0.0)))
        .fold(0.0f64, |m, i| m.max(g[i].abs()))
}

fn steepest(g: &[f64], active: &[bool], dir: &mut [f64]) {
    for i in 0..g.len() {
        dir[i] = if active[i] { 0.0 } else { -g[i] };
    }
}

/// L-BFGS two-loop recursion restricted to the free variables.
fn two_loop(g: &[f64], active: &[bool], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, dir: &mut [f64]) {
    let d = g.len();
    let mut q: Vec<f64> = (0..d).map(|i| if active[i] { 0.0 } else { g[i] }).collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..d).filter(|&i| !active[i]).map(|i| a[i] * b[i]).sum() };
    let mut alphas = Vec::with_capacity(pairs.len());
    let mut usable = Vec::with_capacity(pairs.len());
    for (s, y, _) in pairs.iter().rev() {
        let sy = dot(s, y);
        if sy <= 0.0 {
            continue;
        }
        let a = dot(s, &q) / sy;
        for i in 0..d {
            if !active[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
        usable.push((s, y, sy));
    }
    let gamma = usable
        .first()
        .map(|(_, y, sy)| sy / dot(y, y))
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(1.0);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for ((s, y, sy), a) in usable.iter().zip(alphas.iter()).rev() {
        let b = dot(y, &q) / sy;
        for i in 0..d {
            if !active[i] {
                q[i] += s[i] * (a - b);
            }
        }
    }
    for i in 0..d {
        dir[i] = -q[i];
    }
}

/// Runs [`local_minimize`] from each start. Results are in start order.
pub fn multistart<F>(f: F, starts: &[Vec<f64>], bounds: &BoxBounds) -> Vec<LocalOptimum>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    starts.iter().map(|s| local_minimize(&f, s, bounds)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64], g: &mut [f64]) -> f64 {
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi = 2.0 * xi;
        }
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_from_corners() {
        for d in 1..=5 {
            let b = BoxBounds::unit(d);
            for start in [vec![1.0; d], vec![-0.3; d], (0..d).map(|i| if i % 2 == 0 { 0.9 } else { -0.7 }).collect()] {
                let r = local_minimize(sphere, &start, &b);
                assert!(r.converged);
                assert!(r.value < 1e-10, "d={d}: {}", r.value);
                assert!(r.x.iter().all(|v| v.abs() < 1e-5));
            }
        }
    }

    #[test]
    fn active_lower_bound() {
        let b = BoxBounds::new(vec![0.5], vec![1.0]).unwrap();
        let r = local_minimize(|x, g| { g[0] = 2.0 * x[0]; x[0] * x[0] }, &[0.9], &b);
        assert!(r.converged);
        assert_eq!(r.x, vec![0.5]);
    }

    #[test]
    fn rosenbrock_2d() {
        let b = BoxBounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let r = local_minimize(
            |x, g| {
                let (a, c) = (1.0 - x[0], x[1] - x[0] * x[0]);
                g[0] = -2.0 * a - 400.0 * x[0] * c;
                g[1] = 200.0 * c;
                a * a + 100.0 * c * c
            },
            &[-1.2, 1.0],
            &b,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn never_worse_than_start() {
        let b = BoxBounds::unit(2);
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 3.0 * (3.0 * x[0]).cos() * x[1].sin();
            g[1] = (3.0 * x[0]).sin() * x[1].cos();
            (3.0 * x[0]).sin() * x[1].sin()
        };
        for k in 0..25 {
            let s = [-1.0 + 0.08 * k as f64, 0.9 - 0.07 * k as f64];
            let r = local_minimize(f, &s, &b);
            assert!(r.value <= r.start_value);
            assert!(b.contains(&r.x));
        }
    }

    #[test]
    fn non_finite_objective_aborts() {
        let b = BoxBounds::unit(1);
        let r = local_minimize(
            |x, g| {
                g[0] = 1.0;
                if x[0] < 0.0 { f64::NAN } else { x[0] }
            },
            &[0.5],
            &b,
        );
        assert!(r.aborted && !r.converged);
        assert_eq!(r.x, vec![0.5]);
    }

    #[test]
    fn bounds_validation() {
        assert!(BoxBounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxBounds::new(vec![], vec![]).is_err());
        let b = BoxBounds::unit(2);
        assert!(b.check(&[0.0, 1.5]).is_err());
        assert!(b.check(&[0.0, 1.0]).is_ok());
    }
}
