//! Analytic test functions with known global minima.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};
use crate::optimize::BoxBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    Schwefel,
    Rosenbrock,
    Levy,
    Ackley,
    Powell,
    Hartmann6,
    /// `(f - 2.58) / 1.94`.
    Hartmann6Rescaled,
}

const HART_A: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HART_M: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HART_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const HART_X_STAR: [f64; 6] = [0.20169, 0.150011, 0.476874, 0.275332, 0.311625, 0.6573];
const HART_F_STAR: f64 = -3.32237;

/// Default instances exposed by name.
pub const REGISTRY: [&str; 8] = [
    "schwefel2",
    "rosenbrock4",
    "levy10",
    "ackley6",
    "ackley16",
    "powell16",
    "hartmann6",
    "hartmann6_rescaled",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    kind: BenchmarkKind,
    name: String,
    dim: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    f_star: f64,
    x_star: Option<Vec<f64>>,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, dim: usize) -> Result<Self> {
        use BenchmarkKind::*;
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let (name, lo, hi, f_star, x_star) = match kind {
            Schwefel => ("schwefel", -500.0, 500.0, 0.0, Some(vec![420.9687; dim])),
            Rosenbrock => {
                if dim < 2 {
                    return Err(Error::InvalidArgument("Rosenbrock needs d >= 2".into()));
                }
                ("rosenbrock", -5.0, 10.0, 0.0, Some(vec![1.0; dim]))
            }
            Levy => ("levy", -10.0, 10.0, 0.0, Some(vec![1.0; dim])),
            Ackley => ("ackley", -10.0, 10.0, 0.0, Some(vec![0.0; dim])),
            Powell => {
                if !dim.is_multiple_of(4) {
                    return Err(Error::InvalidArgument(format!("Powell needs d divisible by 4, got {dim}")));
                }
                ("powell", -4.0, 5.0, 0.0, Some(vec![0.0; dim]))
            }
            Hartmann6 | Hartmann6Rescaled => {
                if dim != 6 {
                    return Err(Error::InvalidArgument("Hartmann is six-dimensional".into()));
                }
                let f = if kind == Hartmann6 {
                    HART_F_STAR
                } else {
                    (HART_F_STAR - 2.58) / 1.94
                };
                let n = if kind == Hartmann6 { "hartmann" } else { "hartmann_rescaled" };
                (n, 0.0, 1.0, f, Some(HART_X_STAR.to_vec()))
            }
        };
        let name = match kind {
            Hartmann6 => "hartmann6".to_string(),
            Hartmann6Rescaled => "hartmann6_rescaled".to_string(),
            _ => format!("{name}{dim}"),
        };
        Ok(Self {
            kind,
            name,
            dim,
            lo: vec![lo; dim],
            hi: vec![hi; dim],
            f_star,
            x_star,
        })
    }

    /// Looks up names such as `schwefel2`, `levy10` or `hartmann6_rescaled`.
    pub fn by_name(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownBenchmark(name.to_string());
        match name {
            "hartmann6" => return Self::new(BenchmarkKind::Hartmann6, 6),
            "hartmann6_rescaled" => return Self::new(BenchmarkKind::Hartmann6Rescaled, 6),
            _ => {}
        }
        let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
        let (stem, digits) = name.split_at(split);
        let dim: usize = digits.parse().map_err(|_| unknown())?;
        let kind = match stem {
            "schwefel" => BenchmarkKind::Schwefel,
            "rosenbrock" => BenchmarkKind::Rosenbrock,
            "levy" => BenchmarkKind::Levy,
            "ackley" => BenchmarkKind::Ackley,
            "powell" => BenchmarkKind::Powell,
            _ => return Err(unknown()),
        };
        Self::new(kind, dim)
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn f_star(&self) -> f64 {
        self.f_star
    }
    pub fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }
    pub fn bounds(&self) -> BoxBounds {
        BoxBounds::new(self.lo.clone(), self.hi.clone()).expect("finite benchmark box")
    }

    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| 2.0 * (v - self.lo[i]) / (self.hi[i] - self.lo[i]) - 1.0)
            .collect()
    }

    pub fn from_normalized(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| {
                let raw = self.lo[i] + 0.5 * (v + 1.0) * (self.hi[i] - self.lo[i]);
                raw.clamp(self.lo[i], self.hi[i])
            })
            .collect()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "{} expects {} coordinates, got {}",
                self.name,
                self.dim,
                x.len()
            )));
        }
        self.bounds().check(x)
    }

    /// Value at a raw-space point inside the box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut g = vec![0.0; self.dim];
        Ok(self.value_and_grad_unchecked(x, &mut g))
    }

    /// Value and analytic gradient at a raw-space point inside the box.
    /// At the non-smooth points a one-sided choice is returned.
    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_and_grad_unchecked(x, grad))
    }

    fn value_and_grad_unchecked(&self, x: &[f64], g: &mut [f64]) -> f64 {
        match self.kind {
            BenchmarkKind::Schwefel => schwefel(x, g),
            BenchmarkKind::Rosenbrock => rosenbrock(x, g),
            BenchmarkKind::Levy => levy(x, g),
            BenchmarkKind::Ackley => ackley(x, g),
            BenchmarkKind::Powell => powell(x, g),
            BenchmarkKind::Hartmann6 => hartmann6(x, g),
            BenchmarkKind::Hartmann6Rescaled => {
                let f = hartmann6(x, g);
                g.iter_mut().for_each(|v| *v /= 1.94);
                (f - 2.58) / 1.94
            }
        }
    }
}

fn schwefel(x: &[f64], g: &mut [f64]) -> f64 {
    let mut s = 0.0;
    for (gi, &xi) in g.iter_mut().zip(x) {
        let r = xi.abs().sqrt();
        s += xi * r.sin();
        *gi = -(r.sin() + 0.5 * r * r.cos());
    }
    418.9829 * x.len() as f64 - s
}

fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|v| *v = 0.0);
    let mut f = 0.0;
    for i in 0..x.len() - 1 {
        let a = x[i + 1] - x[i] * x[i];
        let b = x[i] - 1.0;
        f += 100.0 * a * a + b * b;
        g[i] += -400.0 * x[i] * a + 2.0 * b;
        g[i + 1] += 200.0 * a;
    }
    f
}

fn levy(x: &[f64], g: &mut [f64]) -> f64 {
    let d = x.len();
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let mut dw = vec![0.0; d];
    let mut f = (PI * w[0]).sin().powi(2);
    dw[0] += PI * (2.0 * PI * w[0]).sin();
    for i in 0..d - 1 {
        let s = (PI * w[i] + 1.0).sin();
        let u = w[i] - 1.0;
        f += u * u * (1.0 + 10.0 * s * s);
        dw[i] += 2.0 * u * (1.0 + 10.0 * s * s) + u * u * 10.0 * PI * (2.0 * (PI * w[i] + 1.0)).sin();
    }
    let u = w[d - 1] - 1.0;
    let s = (2.0 * PI * w[d - 1]).sin();
    f += u * u * (1.0 + s * s);
    dw[d - 1] += 2.0 * u * (1.0 + s * s) + u * u * 2.0 * PI * (4.0 * PI * w[d - 1]).sin();
    for (gi, v) in g.iter_mut().zip(dw) {
        *gi = 0.25 * v;
    }
    f
}

fn ackley(x: &[f64], g: &mut [f64]) -> f64 {
    let (a, b, c) = (20.0, 0.2, 2.0 * PI);
    let d = x.len() as f64;
    let r = (x.iter().map(|v| v * v).sum::<f64>() / d).sqrt();
    let m = x.iter().map(|v| (c * v).cos()).sum::<f64>() / d;
    let e1 = (-b * r).exp();
    let e2 = m.exp();
    for (gi, &xi) in g.iter_mut().zip(x) {
        let dr = if r > 0.0 { xi / (d * r) } else { 0.0 };
        *gi = a * b * e1 * dr + e2 * c * (c * xi).sin() / d;
    }
    -a * e1 - e2 + a + E
}

fn powell(x: &[f64], g: &mut [f64]) -> f64 {
    let mut f = 0.0;
    for k in (0..x.len()).step_by(4) {
        let (p, q, r, s) = (x[k], x[k + 1], x[k + 2], x[k + 3]);
        let t1 = p + 10.0 * q;
        let t2 = r - s;
        let t3 = q - 2.0 * r;
        let t4 = p - s;
        f += t1 * t1 + 5.0 * t2 * t2 + t3.powi(4) + 10.0 * t4.powi(4);
        g[k] = 2.0 * t1 + 40.0 * t4.powi(3);
        g[k + 1] = 20.0 * t1 + 4.0 * t3.powi(3);
        g[k + 2] = 10.0 * t2 - 8.0 * t3.powi(3);
        g[k + 3] = -10.0 * t2 - 40.0 * t4.powi(3);
    }
    f
}

fn hartmann6(x: &[f64], g: &mut [f64]) -> f64 {
    g.iter_mut().for_each(|v| *v = 0.0);
    let mut f = 0.0;
    for i in 0..4 {
        let inner: f64 = (0..6).map(|j| HART_M[i][j] * (x[j] - HART_P[i][j]).powi(2)).sum();
        let e = HART_A[i] * (-inner).exp();
        f -= e;
        for j in 0..6 {
            g[j] += e * 2.0 * HART_M[i][j] * (x[j] - HART_P[i][j]);
        }
    }
    f
}
