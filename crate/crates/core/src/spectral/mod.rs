//! Cosine eigenbasis of the Neumann Laplacian on the unit square, plus the
//! coefficient-space field type every other module works with.
//!
//! Basis functions (L2-orthonormal):
//!
//! ```text
//! e_(0,0)   = 1
//! e_(k1,0)  = sqrt(2) cos(pi k1 x1)
//! e_(0,k2)  = sqrt(2) cos(pi k2 x2)
//! e_(k1,k2) = 2 cos(pi k1 x1) cos(pi k2 x2)    (k1 k2 != 0)
//! ```
//!
//! with -Laplace eigenvalue `lambda_k = pi^2 (k1^2 + k2^2)`. A field is stored as
//! the square block of coefficients below a cutoff N; grid views live on the
//! midpoint quadrature grid from [`grid_points`].

mod io;
mod transform;

pub use io::{export_csv, load_spf, save_spf};
pub use transform::{grid_points, kahan_sum};

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A single basis mode (k1, k2), both components nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub k1: usize,
    pub k2: usize,
}

impl ModeIndex {
    pub fn new(k1: usize, k2: usize) -> Self {
        Self { k1, k2 }
    }

    /// Eigenvalue of -Laplace on this mode: pi^2 (k1^2 + k2^2).
    pub fn eigenvalue(self) -> f64 {
        PI * PI * (self.k1 * self.k1 + self.k2 * self.k2) as f64
    }

    /// Euclidean length |k|.
    pub fn norm(self) -> f64 {
        ((self.k1 * self.k1 + self.k2 * self.k2) as f64).sqrt()
    }

    /// True for the constant mode (0,0), the only one with eigenvalue zero.
    pub fn is_mean(self) -> bool {
        self.k1 == 0 && self.k2 == 0
    }
}

fn factor_1d(k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        std::f64::consts::SQRT_2 * (PI * k as f64 * x).cos()
    }
}

/// Evaluate the orthonormal basis function e_k at a point of the closed unit square.
pub fn eval_basis(k: ModeIndex, x: [f64; 2]) -> f64 {
    factor_1d(k.k1, x[0]) * factor_1d(k.k2, x[1])
}

/// A real field on the unit square, stored as its N x N block of basis coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Array2<f64>,
    cutoff: usize,
}

impl SpectralField {
    /// The zero field with the given mode cutoff.
    pub fn zeros(cutoff: usize) -> Self {
        assert!(cutoff >= 1, "mode cutoff must be at least 1");
        Self { coeffs: Array2::zeros((cutoff, cutoff)), cutoff }
    }

    /// The constant field with mean `value`.
    pub fn constant(cutoff: usize, value: f64) -> Self {
        let mut field = Self::zeros(cutoff);
        field.coeffs[[0, 0]] = value;
        field
    }

    /// Wrap an existing square coefficient block.
    pub fn from_coeffs(coeffs: Array2<f64>) -> Result<Self> {
        let (rows, cols) = coeffs.dim();
        if rows != cols {
            return Err(Error::NonSquareGrid { rows, cols });
        }
        if rows == 0 {
            return Err(Error::ZeroCutoff);
        }
        Ok(Self { coeffs, cutoff: rows })
    }

    /// Project midpoint-grid samples (square, M >= N) onto the first N x N modes.
    /// Sample content at or above the cutoff is discarded: this is the dealiasing
    /// projection applied to nonlinear products.
    pub fn from_grid(grid: &Array2<f64>, cutoff: usize) -> Result<Self> {
        let coeffs = transform::analyze(grid, cutoff)?;
        Ok(Self { coeffs, cutoff })
    }

    /// Sample the field on the m x m midpoint grid (m >= cutoff). Exact for
    /// band-limited data: `from_grid(to_grid(m), n)` reproduces the coefficients.
    pub fn to_grid(&self, m: usize) -> Result<Array2<f64>> {
        transform::synthesize(&self.coeffs, m)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<f64> {
        &mut self.coeffs
    }

    pub fn coeff(&self, k: ModeIndex) -> f64 {
        self.coeffs[[k.k1, k.k2]]
    }

    pub fn set_coeff(&mut self, k: ModeIndex, value: f64) {
        self.coeffs[[k.k1, k.k2]] = value;
    }

    /// Spatial mean m(g) = <g, e_(0,0)>.
    pub fn mean(&self) -> f64 {
        self.coeffs[[0, 0]]
    }

    /// Evaluate at a single point by direct mode summation. O(N^2) per call;
    /// meant for probe points, not full grids.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let n = self.cutoff;
        let c1: Vec<f64> = (0..n).map(|k| factor_1d(k, x[0])).collect();
        let c2: Vec<f64> = (0..n).map(|k| factor_1d(k, x[1])).collect();
        let mut terms = Vec::with_capacity(n * n);
        for k1 in 0..n {
            for k2 in 0..n {
                terms.push(self.coeffs[[k1, k2]] * c1[k1] * c2[k2]);
            }
        }
        kahan_sum(terms)
    }

    /// Sobolev norm of order alpha: sqrt(m(g)^2 + sum_{k != 0} lambda_k^alpha <g,e_k>^2).
    /// The mean enters unweighted for every alpha, so alpha = 0 is the plain L2 norm.
    pub fn sobolev_norm(&self, alpha: f64) -> f64 {
        let n = self.cutoff;
        let mut terms = Vec::with_capacity(n * n);
        terms.push(self.coeffs[[0, 0]] * self.coeffs[[0, 0]]);
        for k1 in 0..n {
            for k2 in 0..n {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let c = self.coeffs[[k1, k2]];
                if c != 0.0 {
                    let lambda = ModeIndex::new(k1, k2).eigenvalue();
                    terms.push(lambda.powf(alpha) * c * c);
                }
            }
        }
        kahan_sum(terms).sqrt()
    }

    /// Fractional Laplacian (-Laplace)^s: multiply mode k != 0 by lambda_k^s and
    /// annihilate the constant mode.
    pub fn frac_laplacian(&self, s: f64) -> SpectralField {
        let n = self.cutoff;
        let mut out = self.clone();
        out.coeffs[[0, 0]] = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let lambda = ModeIndex::new(k1, k2).eigenvalue();
                out.coeffs[[k1, k2]] *= lambda.powf(s);
            }
        }
        out
    }

    /// Bilaplacian semigroup e^{-eps t Laplace^2}: multiply mode k by
    /// exp(-eps lambda_k^2 t). The constant mode is left untouched bit-for-bit.
    pub fn semigroup(&self, t: f64, eps: f64) -> Result<SpectralField> {
        if t < 0.0 {
            return Err(Error::NegativeTime { t });
        }
        let n = self.cutoff;
        let mut out = self.clone();
        for k1 in 0..n {
            for k2 in 0..n {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let lambda = ModeIndex::new(k1, k2).eigenvalue();
                out.coeffs[[k1, k2]] *= (-eps * lambda * lambda * t).exp();
            }
        }
        Ok(out)
    }

    /// Coefficient-wise a + s*b, used for residual bookkeeping.
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Result<SpectralField> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch { left: self.cutoff, right: other.cutoff });
        }
        let mut out = self.clone();
        out.coeffs.zip_mut_with(&other.coeffs, |a, &b| *a += s * b);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.mapv_inplace(|c| c * s);
        out
    }
}

/// Midpoint-rule integral of grid samples over the unit square.
pub fn grid_integral(grid: &Array2<f64>) -> f64 {
    let (rows, cols) = grid.dim();
    kahan_sum(grid.iter().copied()) / (rows * cols) as f64
}

/// L^p norm of grid samples under midpoint quadrature.
pub fn grid_lp_norm(grid: &Array2<f64>, p: f64) -> f64 {
    let (rows, cols) = grid.dim();
    let sum = kahan_sum(grid.iter().map(|v| v.abs().powf(p)));
    (sum / (rows * cols) as f64).powf(1.0 / p)
}

/// Supremum of |values| over the grid.
pub fn grid_sup(grid: &Array2<f64>) -> f64 {
    grid.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
