use nalgebra::DMatrix;
use num_complex::Complex64;

use super::eig::eig_hessenberg;
use crate::error::{Error, Result};

/// Colleague matrix of a Chebyshev series `a_0 T_0 + ... + a_m T_m` on
/// `[-1, 1]`: the tridiagonal three-term-recurrence part with a rank-one
/// correction `-(1 / 2a_m) [a_0 ... a_{m-1}]`.
///
/// Stored transposed (correction in the last column) so the matrix is upper
/// Hessenberg. Its eigenvalues are the roots of the series.
#[derive(Debug, Clone)]
pub struct ColleagueMatrix {
    coeffs: Vec<f64>,
}

impl ColleagueMatrix {
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidArgument(
                "colleague matrix needs degree >= 1".into(),
            ));
        }
        let lead = *coeffs.last().unwrap();
        if lead == 0.0 || !lead.is_finite() {
            return Err(Error::InvalidArgument(
                "leading Chebyshev coefficient must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            coeffs: coeffs.to_vec(),
        })
    }

    /// Matrix dimension `m` (the polynomial degree).
    pub fn size(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.size();
        let lead = self.coeffs[m];
        let mut c = DMatrix::zeros(m, m);
        if m == 1 {
            // x T_0 = T_1 has no room for the 1/2 coupling; the root is explicit.
            c[(0, 0)] = -self.coeffs[0] / lead;
            return c;
        }
        c[(1, 0)] = 1.0;
        for i in 1..m {
            c[(i - 1, i)] = 0.5;
            if i + 1 < m {
                c[(i + 1, i)] = 0.5;
            }
        }
        let scale = 0.5 / lead;
        for j in 0..m {
            c[(j, m - 1)] -= scale * self.coeffs[j];
        }
        c
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        eig_hessenberg(&self.to_dense())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_matches_recurrence_plus_rank_one_row() {
        let c = ColleagueMatrix::new(&[1.0, 2.0, 3.0, 4.0]).unwrap().to_dense().transpose();
        assert_eq!(c.nrows(), 3);
        assert_eq!(c[(0, 1)], 1.0);
        assert_eq!(c[(1, 0)], 0.5);
        assert_eq!(c[(1, 2)], 0.5);
        assert_eq!(c[(2, 0)], -1.0 / 8.0);
        assert_eq!(c[(2, 1)], 0.5 - 2.0 / 8.0);
        assert_eq!(c[(2, 2)], -3.0 / 8.0);
        assert_eq!(c[(0, 2)], 0.0);
    }

    #[test]
    fn t2_eigenvalues() {
        let ev = ColleagueMatrix::new(&[0.0, 0.0, 1.0]).unwrap().eigenvalues().unwrap();
        let h = 0.5f64.sqrt();
        assert!((ev[0].re + h).abs() < 1e-15);
        assert!((ev[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn linear_series() {
        let ev = ColleagueMatrix::new(&[0.5, 2.0]).unwrap().eigenvalues().unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].re + 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_leading_coefficient() {
        assert!(ColleagueMatrix::new(&[1.0, 0.0]).is_err());
        assert!(ColleagueMatrix::new(&[1.0]).is_err());
    }
}
