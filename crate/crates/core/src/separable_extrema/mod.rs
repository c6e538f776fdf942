//! Local minima of separable products `f(x) = prod_i f_i(x_i)` on a box.
//!
//! Each factor contributes candidate coordinates: the interior critical
//! points of `f_i` and the two interval ends. A coordinate is *mono* when
//! `|f_i|` has a local minimum there (`f_i h_i > 0`) and *mixed* when `|f_i|`
//! has a local maximum. On the tensor grid of all-mono coordinates the
//! positive points are exactly the strong local minima of `f` with `f > 0`;
//! on the all-mixed grid the negative points are the strong local minima with
//! `f < 0`. Every other grid point is not a minimum.

mod maxk_sum;
mod minsort;

pub use maxk_sum::{maxk_sum, maxk_sum_by_parity, maxk_sum_counted, Combination};
pub use minsort::{minsort, minsort_coords, RankedMinima, DEFAULT_ALPHA};

use log::warn;

use crate::chebapprox::{fit, PiecewiseCheb};
use crate::error::{Error, Result};

const VALUE_DEGENERACY: f64 = 1e-12;
const CURVATURE_DEGENERACY: f64 = 1e-10;

/// One factor of a separable function with its first two derivatives.
#[derive(Debug, Clone)]
pub struct SeparableComponent {
    pub f: PiecewiseCheb,
    pub df: PiecewiseCheb,
    pub d2f: PiecewiseCheb,
}

impl SeparableComponent {
    pub fn new(f: PiecewiseCheb) -> Self {
        let df = f.differentiate();
        let d2f = df.differentiate();
        Self { f, df, d2f }
    }

    /// Approximates `g` on `[lo, hi]` and differentiates twice.
    pub fn fit<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64) -> Result<Self> {
        Ok(Self::new(fit(g, lo, hi)?))
    }

    pub fn interval(&self) -> (f64, f64) {
        self.f.interval()
    }
}

/// Candidate coordinates of one factor, ascending, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCoordinates {
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
    /// `f''` at interior points, inward first derivative at the ends.
    pub h: Vec<f64>,
    pub mono: Vec<bool>,
    pub positive: Vec<bool>,
}

impl CandidateCoordinates {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Positions of mono (`true`) or mixed (`false`) coordinates.
    pub fn positions(&self, mono: bool) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.mono[j] == mono).collect()
    }
}

/// Extracts and classifies the candidate coordinates of one factor.
///
/// Coordinates where `f_i` or `h_i` is numerically zero are dropped with a
/// warning.
pub fn candidate_coordinates(c: &SeparableComponent) -> Result<CandidateCoordinates> {
    let (lo, hi) = c.interval();
    let width = hi - lo;
    let mut raw = vec![(lo, c.df.eval(lo), true)];
    for r in c.df.roots()? {
        if r - lo > 1e-12 * width && hi - r > 1e-12 * width {
            raw.push((r, c.d2f.eval(r), false));
        }
    }
    raw.push((hi, -c.df.eval(hi), true));

    let fscale = c.f.vscale();
    let end_scale = c.df.vscale();
    let int_scale = c.d2f.vscale();
    let mut out = CandidateCoordinates {
        coords: Vec::with_capacity(raw.len()),
        values: Vec::with_capacity(raw.len()),
        h: Vec::with_capacity(raw.len()),
        mono: Vec::with_capacity(raw.len()),
        positive: Vec::with_capacity(raw.len()),
    };
    for (x, h, endpoint) in raw {
        let v = c.f.eval(x);
        let hscale = if endpoint { end_scale } else { int_scale };
        if v.abs() <= VALUE_DEGENERACY * fscale || h.abs() <= CURVATURE_DEGENERACY * hscale {
            warn!("dropping degenerate candidate coordinate {x} (f = {v:e}, h = {h:e})");
            continue;
        }
        out.coords.push(x);
        out.values.push(v);
        out.h.push(h);
        out.mono.push(v * h > 0.0);
        out.positive.push(v > 0.0);
    }
    Ok(out)
}

/// Grid sizes, signed sums and minima counts for a separable product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtremaCounts {
    /// Per dimension: mono count, positive mono, negative mono.
    pub n0: Vec<usize>,
    pub n0_pos: Vec<usize>,
    pub n0_neg: Vec<usize>,
    /// Per dimension: mixed count, positive mixed, negative mixed.
    pub n1: Vec<usize>,
    pub n1_pos: Vec<usize>,
    pub n1_neg: Vec<usize>,
    pub grid0: u128,
    pub grid1: u128,
    pub signed0: i128,
    pub signed1: i128,
    pub negative_minima: u128,
    pub positive_minima: u128,
    pub total_minima: u128,
}

pub fn count_minima(coords: &[CandidateCoordinates]) -> ExtremaCounts {
    let count = |c: &CandidateCoordinates, mono: bool, pos: Option<bool>| {
        (0..c.len())
            .filter(|&j| c.mono[j] == mono && pos.is_none_or(|p| c.positive[j] == p))
            .count()
    };
    let n0: Vec<usize> = coords.iter().map(|c| count(c, true, None)).collect();
    let n0_pos: Vec<usize> = coords.iter().map(|c| count(c, true, Some(true))).collect();
    let n0_neg: Vec<usize> = coords.iter().map(|c| count(c, true, Some(false))).collect();
    let n1: Vec<usize> = coords.iter().map(|c| count(c, false, None)).collect();
    let n1_pos: Vec<usize> = coords.iter().map(|c| count(c, false, Some(true))).collect();
    let n1_neg: Vec<usize> = coords.iter().map(|c| count(c, false, Some(false))).collect();

    let grid = |n: &[usize]| n.iter().fold(1u128, |acc, &v| acc.saturating_mul(v as u128));
    let signed = |p: &[usize], m: &[usize]| {
        p.iter()
            .zip(m)
            .fold(1i128, |acc, (&p, &m)| acc.saturating_mul(p as i128 - m as i128))
    };
    let grid0 = grid(&n0);
    let grid1 = grid(&n1);
    let signed0 = signed(&n0_pos, &n0_neg);
    let signed1 = signed(&n1_pos, &n1_neg);
    let negative_minima = ((grid1 as i128 - signed1) / 2) as u128;
    let positive_minima = ((grid0 as i128 + signed0) / 2) as u128;
    ExtremaCounts {
        n0,
        n0_pos,
        n0_neg,
        n1,
        n1_pos,
        n1_neg,
        grid0,
        grid1,
        signed0,
        signed1,
        negative_minima,
        positive_minima,
        total_minima: negative_minima + positive_minima,
    }
}

pub(crate) fn check_alpha(n_o: usize, alpha: f64) -> Result<()> {
    if n_o == 0 {
        return Err(Error::InvalidArgument("n_o must be >= 1".into()));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 1, got {alpha}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_component() -> SeparableComponent {
        SeparableComponent::fit(f64::cos, 0.5, 5.5).unwrap()
    }

    #[test]
    fn cos_candidates() {
        let c = candidate_coordinates(&cos_component()).unwrap();
        assert_eq!(c.len(), 3);
        assert!((c.coords[1] - std::f64::consts::PI).abs() < 1e-12);
        assert!((c.values[0] - 0.5f64.cos()).abs() < 1e-13);
        assert!((c.values[1] + 1.0).abs() < 1e-13);
        assert!((c.values[2] - 5.5f64.cos()).abs() < 1e-13);
        assert!((c.h[0] + 0.5f64.sin()).abs() < 1e-11);
        assert!((c.h[1] - 1.0).abs() < 1e-10);
        assert!((c.h[2] - 5.5f64.sin()).abs() < 1e-11);
        assert_eq!(c.mono, vec![false, false, false]);
        assert_eq!(c.positive, vec![true, false, true]);
    }

    #[test]
    fn linear_candidates() {
        let c = candidate_coordinates(&SeparableComponent::fit(|x| x + 2.0, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.coords, vec![-1.0, 1.0]);
        assert!((c.h[0] - 1.0).abs() < 1e-13 && (c.h[1] + 1.0).abs() < 1e-13);
        assert_eq!(c.mono, vec![true, false]);
    }

    #[test]
    fn quadratic_candidates() {
        let c = candidate_coordinates(&SeparableComponent::fit(|x| x * x + 1.0, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.coords[1].abs() < 1e-13);
        assert!((c.h[0] + 2.0).abs() < 1e-12 && (c.h[1] - 2.0).abs() < 1e-12 && (c.h[2] + 2.0).abs() < 1e-12);
        assert_eq!(c.mono, vec![false, true, false]);
    }

    #[test]
    fn degenerate_coordinate_is_dropped() {
        // f = x on [-1, 1] has f(0) = 0 but no critical point; x^3 has a
        // critical point at 0 with f = 0 and f'' = 0.
        let c = candidate_coordinates(&SeparableComponent::fit(|x| x * x * x, -1.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn counts_for_cos_squared() {
        let c = candidate_coordinates(&cos_component()).unwrap();
        let k = count_minima(&[c.clone(), c]);
        assert_eq!(k.n1, vec![3, 3]);
        assert_eq!(k.n1_pos, vec![2, 2]);
        assert_eq!(k.grid1, 9);
        assert_eq!(k.signed1, 1);
        assert_eq!(k.negative_minima, 4);
        assert_eq!((k.grid0, k.signed0, k.positive_minima), (0, 0, 0));
        assert_eq!(k.total_minima, 4);
    }

    #[test]
    fn counts_for_shifted_parabola() {
        let c = candidate_coordinates(&SeparableComponent::fit(|x| x * x + 1.0, -1.0, 1.0).unwrap()).unwrap();
        let k = count_minima(&[c]);
        assert_eq!((k.grid0, k.signed0, k.positive_minima), (1, 1, 1));
        assert_eq!((k.grid1, k.signed1, k.negative_minima), (2, 2, 0));
        assert_eq!(k.total_minima, 1);
    }

    #[test]
    fn empty_mixed_set_zeroes_negative_count() {
        let para = candidate_coordinates(&SeparableComponent::fit(|x| x * x + 1.0, -1.0, 1.0).unwrap()).unwrap();
        let mut only_mono = para.clone();
        only_mono.mono = vec![true; 3];
        let k = count_minima(&[para, only_mono]);
        assert_eq!(k.grid1, 0);
        assert_eq!(k.negative_minima, 0);
    }
}
