//! Fast cosine transforms between midpoint-grid samples and basis coefficients.
//!
//! The grid is the M x M tensor of midpoints x_i = (i + 1/2)/M. On that grid the
//! 1D family {1, sqrt(2) cos(pi k x) : 0 < k < M} is exactly orthonormal under the
//! discrete inner product (1/M) sum_i f(x_i) g(x_i), so analysis/synthesis reduce
//! to a DCT-II/DCT-III pair per axis and are exact inverses on band-limited data.

use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use rayon::prelude::*;
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length threshold below which per-row rayon dispatch costs more than it saves.
const PAR_MIN: usize = 64;

fn plan(len: usize) -> Arc<dyn TransformType2And3<f64>> {
    static PLANNER: OnceLock<Mutex<DctPlanner<f64>>> = OnceLock::new();
    let planner = PLANNER.get_or_init(|| Mutex::new(DctPlanner::new()));
    planner.lock().expect("dct planner lock poisoned").plan_dct2(len)
}

/// Midpoint sample coordinates (i + 1/2)/m of the m-point quadrature grid.
pub fn grid_points(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
}

enum Kind {
    Analysis,
    Synthesis,
}

/// Run the transform along axis 1 of a standard-layout array, in place.
fn dct_rows(a: &mut Array2<f64>, kind: &Kind) {
    let (rows, len) = a.dim();
    let transform = plan(len);
    let scratch_len = transform.get_scratch_len();
    let run = |row: &mut [f64], scratch: &mut Vec<f64>| match kind {
        Kind::Analysis => transform.process_dct2_with_scratch(row, scratch),
        Kind::Synthesis => transform.process_dct3_with_scratch(row, scratch),
    };
    let data = a.as_slice_mut().expect("array not in standard layout");
    if rows >= PAR_MIN {
        data.par_chunks_mut(len)
            .for_each_init(|| vec![0.0; scratch_len], |scratch, row| run(row, scratch));
    } else {
        let mut scratch = vec![0.0; scratch_len];
        for row in data.chunks_mut(len) {
            run(row, &mut scratch);
        }
    }
}

fn transpose(a: Array2<f64>) -> Array2<f64> {
    a.reversed_axes().as_standard_layout().into_owned()
}

/// Project grid samples onto the first `cutoff` x `cutoff` basis coefficients.
///
/// Modes at or above `cutoff` present in the samples are discarded, which is the
/// dealiasing projection used by the nonlinear terms.
pub fn analyze(grid: &Array2<f64>, cutoff: usize) -> Result<Array2<f64>> {
    let (rows, cols) = grid.dim();
    if rows != cols {
        return Err(Error::NonSquareGrid { rows, cols });
    }
    if cutoff == 0 {
        return Err(Error::ZeroCutoff);
    }
    let m = rows;
    if m < cutoff {
        return Err(Error::GridTooCoarse { m, n: cutoff });
    }
    let mut work = grid.as_standard_layout().into_owned();
    dct_rows(&mut work, &Kind::Analysis);
    work = transpose(work);
    dct_rows(&mut work, &Kind::Analysis);
    work = transpose(work);

    // Unnormalized DCT-II output X_k = sum_n f(x_n) cos(pi k (n+1/2)/m); rescale to
    // coefficients against the orthonormal basis under midpoint quadrature.
    let inv_m = 1.0 / m as f64;
    let mut coeffs = Array2::zeros((cutoff, cutoff));
    for k1 in 0..cutoff {
        let s1 = if k1 == 0 { inv_m } else { SQRT2 * inv_m };
        for k2 in 0..cutoff {
            let s2 = if k2 == 0 { 1.0 } else { SQRT2 };
            coeffs[[k1, k2]] = work[[k1, k2]] * s1 * s2 * inv_m;
        }
    }
    Ok(coeffs)
}

/// Evaluate the field with the given coefficients on the m x m midpoint grid.
pub fn synthesize(coeffs: &Array2<f64>, m: usize) -> Result<Array2<f64>> {
    let n = coeffs.nrows();
    if m < n {
        return Err(Error::GridTooCoarse { m, n });
    }
    // DCT-III consumes y_0/2 + sum_{k>=1} y_k cos(...), so the orthonormal
    // synthesis needs y_0 = 2 c_0 and y_k = sqrt(2) c_k along each axis.
    let mut work = Array2::zeros((m, m));
    for k1 in 0..n {
        let s1 = if k1 == 0 { 2.0 } else { SQRT2 };
        for k2 in 0..n {
            let s2 = if k2 == 0 { 2.0 } else { SQRT2 };
            work[[k1, k2]] = coeffs[[k1, k2]] * s1 * s2;
        }
    }
    dct_rows(&mut work, &Kind::Synthesis);
    work = transpose(work);
    dct_rows(&mut work, &Kind::Synthesis);
    Ok(transpose(work))
}

/// Compensated sum (Kahan-Babuska-Neumaier); keeps quadrature reductions
/// deterministic and accurate independent of grid size.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(m: usize, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        let x = grid_points(m);
        Array2::from_shape_fn((m, m), |(i, j)| f(x[i], x[j]))
    }

    #[test]
    fn analyze_picks_out_single_modes() {
        let m = 16;
        let grid = sample(m, |x1, x2| 2.0 * (PI * 3.0 * x1).cos() * (PI * 2.0 * x2).cos());
        let coeffs = analyze(&grid, m).unwrap();
        for k1 in 0..m {
            for k2 in 0..m {
                let expect = if (k1, k2) == (3, 2) { 1.0 } else { 0.0 };
                assert!(
                    (coeffs[[k1, k2]] - expect).abs() < 1e-12,
                    "coeff[{k1},{k2}] = {}",
                    coeffs[[k1, k2]]
                );
            }
        }
    }

    #[test]
    fn synthesize_then_analyze_is_identity() {
        let n = 12;
        let mut coeffs = Array2::zeros((n, n));
        for k1 in 0..n {
            for k2 in 0..n {
                coeffs[[k1, k2]] = ((k1 * 7 + k2 * 3) as f64 * 0.37).sin();
            }
        }
        for m in [n, 2 * n, 3 * n] {
            let grid = synthesize(&coeffs, m).unwrap();
            let back = analyze(&grid, n).unwrap();
            let err = coeffs
                .iter()
                .zip(back.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(err < 10.0 * f64::EPSILON * n as f64, "m={m}: roundtrip error {err:.3e}");
        }
    }

    #[test]
    fn analyze_rejects_bad_shapes() {
        let grid = Array2::zeros((8, 4));
        assert!(matches!(analyze(&grid, 4), Err(Error::NonSquareGrid { .. })));
        let grid = Array2::zeros((4, 4));
        assert!(matches!(analyze(&grid, 8), Err(Error::GridTooCoarse { .. })));
        assert!(matches!(analyze(&grid, 0), Err(Error::ZeroCutoff)));
    }

    #[test]
    fn kahan_sum_handles_cancellation() {
        let values = vec![1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(kahan_sum(values), 2.0);
    }
}
