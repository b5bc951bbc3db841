//! Dense least-squares solvers on top of nalgebra's SVD: truncated SVD with
//! a relative cutoff (the MFS solve) and Tikhonov filtering (needle fits).

use nalgebra::{DMatrix, DVector};

/// SVD factorization reused across right-hand sides.
pub struct SvdLsq {
    u: DMatrix<f64>,
    vt: DMatrix<f64>,
    sigma: DVector<f64>,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl SvdLsq {
    pub fn new(a: DMatrix<f64>) -> Self {
        let svd = a.svd(true, true);
        let sigma = svd.singular_values;
        let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
        let sigma_min = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
        SvdLsq {
            u: svd.u.expect("svd with u"),
            vt: svd.v_t.expect("svd with v_t"),
            sigma,
            sigma_max,
            sigma_min,
        }
    }

    /// Minimum-norm least squares with singular values below
    /// `rel_cutoff * sigma_max` discarded.
    pub fn solve_truncated(&self, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
        let cut = rel_cutoff * self.sigma_max;
        let mut y = self.u.transpose() * b;
        for (i, v) in y.iter_mut().enumerate() {
            let s = self.sigma[i];
            *v = if s > cut { *v / s } else { 0.0 };
        }
        self.vt.transpose() * y
    }

    /// Tikhonov-filtered least squares: coefficients `V diag(s/(s^2+alpha)) U^T b`.
    pub fn solve_tikhonov(&self, b: &DVector<f64>, alpha: f64) -> DVector<f64> {
        let mut y = self.u.transpose() * b;
        for (i, v) in y.iter_mut().enumerate() {
            let s = self.sigma[i];
            *v *= s / (s * s + alpha);
        }
        self.vt.transpose() * y
    }

    /// Ratio of the largest kept to smallest kept singular value.
    pub fn kept_condition(&self, rel_cutoff: f64) -> f64 {
        let cut = rel_cutoff * self.sigma_max;
        let min_kept = self
            .sigma
            .iter()
            .cloned()
            .filter(|&s| s > cut)
            .fold(f64::INFINITY, f64::min);
        self.sigma_max / min_kept
    }
}
