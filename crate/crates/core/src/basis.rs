//! Fundamental solutions of the 2D Helmholtz equation, entire solutions
//! (Fourier-Bessel / harmonic polynomials), and the [`Field`] abstraction
//! that boundary data and energy integrands are built from.
//!
//! The fundamental solution is real-valued: `G(r) = -Y0(kr)/4` for `k > 0`
//! (the real part of the outgoing fundamental solution `(i/4) H0^1(kr)`) and
//! `G(r) = -ln(r)/2pi` at `k = 0`.

use crate::bessel;
use crate::{Error, Point, Result};
use std::sync::Arc;

/// A scalar field with a gradient, evaluable anywhere it is regular.
pub trait Field: Send + Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;

    /// Normal derivative at `p` for unit normal `nu`.
    fn normal_deriv(&self, p: Point, nu: Point) -> f64 {
        self.gradient(p).dot(nu)
    }
}

/// `G(k, r)`: radial profile of the fundamental solution, `r > 0`.
pub fn eval_g(k: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::DomainError(format!("eval_g requires r > 0, got {r}")));
    }
    if k == 0.0 {
        Ok(-r.ln() / std::f64::consts::TAU)
    } else {
        Ok(-0.25 * bessel::y0(k * r)?)
    }
}

/// Radial derivative `dG/dr`.
pub fn eval_g_deriv(k: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::DomainError(format!("eval_g requires r > 0, got {r}")));
    }
    if k == 0.0 {
        Ok(-1.0 / (std::f64::consts::TAU * r))
    } else {
        // d/dr [-Y0(kr)/4] = k Y1(kr)/4
        Ok(0.25 * k * bessel::y1(k * r)?)
    }
}

/// `grad_y G(|y - x|)`.
pub fn eval_grad_g(k: f64, x: Point, y: Point) -> Result<Point> {
    let d = y - x;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::DomainError("eval_grad_g at coincident points".into()));
    }
    let g = eval_g_deriv(k, r)?;
    Ok(d * (g / r))
}

/// The free-space singular solution `y -> G(|y - x|)` as a [`Field`].
#[derive(Debug, Clone)]
pub struct PointSource {
    pub k: f64,
    pub source: Point,
}

impl Field for PointSource {
    fn value(&self, p: Point) -> f64 {
        eval_g(self.k, p.dist(self.source)).expect("evaluation away from the source")
    }

    fn gradient(&self, p: Point) -> Point {
        eval_grad_g(self.k, self.source, p).expect("evaluation away from the source")
    }
}

/// Pointwise sum of fields (used for `G + H` compositions).
pub struct SumField {
    pub parts: Vec<Arc<dyn Field>>,
}

impl Field for SumField {
    fn value(&self, p: Point) -> f64 {
        self.parts.iter().map(|f| f.value(p)).sum()
    }

    fn gradient(&self, p: Point) -> Point {
        let mut g = Point::new(0.0, 0.0);
        for f in &self.parts {
            g = g + f.gradient(p);
        }
        g
    }
}

/// Field scaled by a constant.
pub struct ScaledField {
    pub inner: Arc<dyn Field>,
    pub scale: f64,
}

impl Field for ScaledField {
    fn value(&self, p: Point) -> f64 {
        self.scale * self.inner.value(p)
    }

    fn gradient(&self, p: Point) -> Point {
        self.inner.gradient(p) * self.scale
    }
}

// ---------------------------------------------------------------------------
// Entire Helmholtz solutions
// ---------------------------------------------------------------------------

/// Basis of entire solutions centered at a point: for `k > 0` the
/// Fourier-Bessel family `{J_m(kr) cos(m th), J_m(kr) sin(m th)}`, for
/// `k = 0` harmonic polynomials `{Re (z-c)^m, Im (z-c)^m}`.
///
/// Index layout: `0 -> m = 0`, `2m-1 -> cos`/`Re` of order `m`,
/// `2m -> sin`/`Im` of order `m`.
#[derive(Debug, Clone)]
pub struct EntireBasis {
    pub k: f64,
    pub center: Point,
    pub max_order: usize,
    /// Coordinate scale applied before forming powers at `k = 0`; keeps the
    /// design-matrix columns O(1) on domains of any size.
    pub scale: f64,
}

impl EntireBasis {
    pub fn new(k: f64, center: Point, max_order: usize, domain_diameter: f64) -> Self {
        EntireBasis { k, center, max_order, scale: 2.0 / domain_diameter }
    }

    /// Number of members: `2 max_order + 1`.
    pub fn len(&self) -> usize {
        2 * self.max_order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value and gradient of every member at `p`.
    pub fn eval_all(&self, p: Point) -> Vec<(f64, Point)> {
        let mut out = Vec::with_capacity(self.len());
        let d = p - self.center;
        if self.k == 0.0 {
            // powers of zeta = scale*(z - c), gradients via m zeta^{m-1}
            let s = self.scale;
            let (zx, zy) = (s * d.x, s * d.y);
            out.push((1.0, Point::new(0.0, 0.0)));
            let (mut re, mut im) = (1.0, 0.0); // zeta^{m-1}, starting at m = 1
            for m in 1..=self.max_order {
                let mf = m as f64;
                // grad of Re zeta^m = s m (Re zeta^{m-1}, -Im zeta^{m-1})
                out.push((re * zx - im * zy, Point::new(s * mf * re, -s * mf * im)));
                out.push((re * zy + im * zx, Point::new(s * mf * im, s * mf * re)));
                let (nre, nim) = (re * zx - im * zy, re * zy + im * zx);
                re = nre;
                im = nim;
            }
        } else {
            let r = d.norm();
            let k = self.k;
            if r < 1e-12 {
                // limits at the center: J_0 -> 1, only order 1 has a gradient
                out.push((1.0, Point::new(0.0, 0.0)));
                for m in 1..=self.max_order {
                    let g = if m == 1 { 0.5 * k } else { 0.0 };
                    out.push((0.0, Point::new(g, 0.0)));
                    out.push((0.0, Point::new(0.0, g)));
                }
                return out;
            }
            let theta = d.y.atan2(d.x);
            let (ct, st) = (theta.cos(), theta.sin());
            let j = bessel::jn_sequence(self.max_order + 1, k * r)
                .expect("jn_sequence for r >= 0");
            // J_0' = -J_1
            out.push((j[0], Point::new(-k * j[1] * ct, -k * j[1] * st)));
            for m in 1..=self.max_order {
                let mf = m as f64;
                let jm = j[m];
                // J_m'(x) = J_{m-1}(x) - (m/x) J_m(x)
                let jmp = j[m - 1] - mf / (k * r) * jm;
                let (cm, sm) = ((mf * theta).cos(), (mf * theta).sin());
                let dr_cos = k * jmp * cm;
                let dth_cos = -jm * mf * sm / r;
                out.push((
                    jm * cm,
                    Point::new(dr_cos * ct - dth_cos * st, dr_cos * st + dth_cos * ct),
                ));
                let dr_sin = k * jmp * sm;
                let dth_sin = jm * mf * cm / r;
                out.push((
                    jm * sm,
                    Point::new(dr_sin * ct - dth_sin * st, dr_sin * st + dth_sin * ct),
                ));
            }
        }
        out
    }

    /// Value and gradient of the member with index `idx`.
    pub fn eval(&self, idx: usize, p: Point) -> Result<(f64, Point)> {
        if idx >= self.len() {
            return Err(Error::Config(format!(
                "basis index {idx} out of range (len {})",
                self.len()
            )));
        }
        Ok(self.eval_all(p)[idx])
    }
}

// ---------------------------------------------------------------------------
// Closed-form Helmholtz solutions (identity-test catalog)
// ---------------------------------------------------------------------------

/// Versioned catalog of closed-form global Helmholtz solutions used by the
/// identity suites: harmonic polynomials at `k = 0`, plane-wave cosines and
/// Fourier-Bessel modes at `k > 0`.
#[derive(Debug, Clone)]
pub enum CatalogSolution {
    /// `Re (z - c)^m` or `Im (z - c)^m` (valid for `k = 0`).
    HarmonicPoly { center: Point, m: usize, imaginary: bool },
    /// `cos(k d . y)` with `|d| = 1`.
    PlaneWave { k: f64, dir: Point },
    /// `J_m(k r) cos(m th)` / `J_m(k r) sin(m th)` about `center`.
    FourierBessel { k: f64, center: Point, m: usize, sine: bool },
}

impl CatalogSolution {
    /// The default suite for a given wavenumber.
    pub fn default_suite(k: f64) -> Vec<CatalogSolution> {
        let c = Point::new(0.0, 0.0);
        if k == 0.0 {
            vec![
                CatalogSolution::HarmonicPoly { center: c, m: 1, imaginary: false },
                CatalogSolution::HarmonicPoly { center: c, m: 2, imaginary: false },
                CatalogSolution::HarmonicPoly { center: c, m: 3, imaginary: true },
            ]
        } else {
            vec![
                CatalogSolution::PlaneWave { k, dir: Point::new(1.0, 0.0) },
                CatalogSolution::PlaneWave {
                    k,
                    dir: Point::new(0.6, 0.8),
                },
                CatalogSolution::FourierBessel { k, center: c, m: 1, sine: false },
            ]
        }
    }
}

impl Field for CatalogSolution {
    fn value(&self, p: Point) -> f64 {
        match *self {
            CatalogSolution::HarmonicPoly { center, m, imaginary } => {
                let d = p - center;
                let (mut re, mut im) = (1.0, 0.0);
                for _ in 0..m {
                    let (nre, nim) = (re * d.x - im * d.y, re * d.y + im * d.x);
                    re = nre;
                    im = nim;
                }
                if imaginary {
                    im
                } else {
                    re
                }
            }
            CatalogSolution::PlaneWave { k, dir } => (k * dir.dot(p)).cos(),
            CatalogSolution::FourierBessel { k, center, m, sine } => {
                let d = p - center;
                let r = d.norm();
                let th = d.y.atan2(d.x);
                let jm = bessel::jn(m, k * r).expect("jn on r >= 0");
                if sine {
                    jm * (m as f64 * th).sin()
                } else {
                    jm * (m as f64 * th).cos()
                }
            }
        }
    }

    fn gradient(&self, p: Point) -> Point {
        match *self {
            CatalogSolution::HarmonicPoly { center, m, imaginary } => {
                if m == 0 {
                    return Point::new(0.0, 0.0);
                }
                let d = p - center;
                let (mut re, mut im) = (1.0, 0.0); // (z-c)^{m-1}
                for _ in 0..(m - 1) {
                    let (nre, nim) = (re * d.x - im * d.y, re * d.y + im * d.x);
                    re = nre;
                    im = nim;
                }
                let mf = m as f64;
                if imaginary {
                    Point::new(mf * im, mf * re)
                } else {
                    Point::new(mf * re, -mf * im)
                }
            }
            CatalogSolution::PlaneWave { k, dir } => {
                dir * (-k * (k * dir.dot(p)).sin())
            }
            CatalogSolution::FourierBessel { k, center, m, sine } => {
                let d = p - center;
                let r = d.norm();
                if r < 1e-12 {
                    return if m == 1 {
                        if sine {
                            Point::new(0.0, 0.5 * k)
                        } else {
                            Point::new(0.5 * k, 0.0)
                        }
                    } else {
                        Point::new(0.0, 0.0)
                    };
                }
                let th = d.y.atan2(d.x);
                let (ct, st) = (th.cos(), th.sin());
                let mf = m as f64;
                let jm = bessel::jn(m, k * r).expect("jn");
                let jmp = bessel::jn_deriv(m, k * r).expect("jn_deriv");
                let (ang, dang) = if sine {
                    ((mf * th).sin(), mf * (mf * th).cos())
                } else {
                    ((mf * th).cos(), -mf * (mf * th).sin())
                };
                let dr = k * jmp * ang;
                let dth = jm * dang / r;
                Point::new(dr * ct - dth * st, dr * st + dth * ct)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eval_g_trivial_values_at_k_zero() {
        assert_abs_diff_eq!(eval_g(0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            eval_g(0.0, (-std::f64::consts::TAU).exp()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(eval_g(0.0, 0.0).is_err());
        assert!(eval_g(1.0, -0.5).is_err());
    }

    #[test]
    fn eval_g_vanishes_at_first_y0_zero() {
        let r = bessel::y0_first_zero();
        assert_abs_diff_eq!(r, 0.893_577_0, epsilon = 1e-6);
        assert!(eval_g(1.0, r).unwrap().abs() < 1e-8);
    }

    #[test]
    fn grad_g_trivial_values_at_k_zero() {
        let g = eval_grad_g(0.0, Point::new(0.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(g.x, -1.0 / std::f64::consts::TAU, epsilon = 1e-14);
        assert_abs_diff_eq!(g.y, 0.0);
        let g2 = eval_grad_g(0.0, Point::new(0.0, 0.0), Point::new(0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(g2.y, -1.0 / (4.0 * std::f64::consts::PI), epsilon = 1e-14);
    }

    #[test]
    fn grad_g_at_k_one_matches_bessel_oracle() {
        // grad_y G at y = (1,0), x = 0, k = 1 is (k Y1(k)/4, 0); Y1(1) from
        // the independent integral reference
        let y1_ref = bessel::reference::yn_integral_low(1, 1.0);
        assert_abs_diff_eq!(y1_ref, -0.781_212_821_300_288, epsilon = 1e-9);
        let g = eval_grad_g(1.0, Point::new(0.0, 0.0), Point::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(g.x, 0.25 * y1_ref, epsilon = 1e-10);
        assert_abs_diff_eq!(g.y, 0.0);
    }

    #[test]
    fn grad_g_matches_finite_differences() {
        let x = Point::new(0.2, -0.3);
        for k in [0.0, 0.8, 2.0] {
            for y in [Point::new(1.0, 0.5), Point::new(-0.4, 0.9)] {
                let g = eval_grad_g(k, x, y).unwrap();
                let h = 1e-6;
                let fd_x = (eval_g(k, (y + Point::new(h, 0.0)).dist(x)).unwrap()
                    - eval_g(k, (y - Point::new(h, 0.0)).dist(x)).unwrap())
                    / (2.0 * h);
                let fd_y = (eval_g(k, (y + Point::new(0.0, h)).dist(x)).unwrap()
                    - eval_g(k, (y - Point::new(0.0, h)).dist(x)).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(g.x, fd_x, epsilon = 1e-6);
                assert_abs_diff_eq!(g.y, fd_y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn g_blows_up_monotonically_at_origin() {
        // below the first extremum of Y0 the kernel increases as r -> 0,
        // in contrast to entire members which stay bounded
        let mut prev = eval_g(1.0, 2.0).unwrap();
        for i in 1..40 {
            let r = 2.0 * (1.0 - i as f64 / 40.0) + 1e-3;
            let v = eval_g(1.0, r).unwrap();
            assert!(v > prev, "not monotone at r = {r}");
            prev = v;
        }
    }

    #[test]
    fn entire_basis_harmonic_examples() {
        let basis = EntireBasis::new(0.0, Point::new(0.0, 0.0), 4, 2.0);
        let (v, g) = basis.eval(0, Point::new(0.7, -0.2)).unwrap();
        assert_abs_diff_eq!(v, 1.0);
        assert_abs_diff_eq!(g.norm(), 0.0);
        // Re z^2 at (1,1): value 0, gradient (2x, -2y) = (2, -2)
        let (v2, g2) = basis.eval(3, Point::new(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(v2, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g2.x, 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(g2.y, -2.0, epsilon = 1e-13);
    }

    #[test]
    fn entire_basis_bessel_zero_example() {
        let basis = EntireBasis::new(1.0, Point::new(0.0, 0.0), 2, 2.0);
        let r = bessel::j0_first_zero();
        let (v, _) = basis.eval(0, Point::new(r, 0.0)).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn entire_members_satisfy_helmholtz_by_finite_differences() {
        for k in [0.0, 1.0] {
            let basis = EntireBasis::new(k, Point::new(0.1, 0.0), 6, 2.0);
            let p = Point::new(0.4, -0.3);
            let h = 1e-4;
            for idx in [0usize, 1, 4, 9, 12] {
                let val = |q: Point| basis.eval(idx, q).unwrap().0;
                let lap = (val(p + Point::new(h, 0.0))
                    + val(p - Point::new(h, 0.0))
                    + val(p + Point::new(0.0, h))
                    + val(p - Point::new(0.0, h))
                    - 4.0 * val(p))
                    / (h * h);
                let resid = lap + k * k * val(p);
                assert!(resid.abs() < 1e-5, "idx {idx} k {k}: residual {resid}");
            }
        }
    }

    #[test]
    fn entire_gradients_match_finite_differences() {
        for k in [0.0, 0.8] {
            let basis = EntireBasis::new(k, Point::new(-0.1, 0.2), 5, 2.0);
            let p = Point::new(0.3, 0.6);
            let h = 1e-6;
            for idx in 0..basis.len() {
                let (_, g) = basis.eval(idx, p).unwrap();
                let fd_x = (basis.eval(idx, p + Point::new(h, 0.0)).unwrap().0
                    - basis.eval(idx, p - Point::new(h, 0.0)).unwrap().0)
                    / (2.0 * h);
                let fd_y = (basis.eval(idx, p + Point::new(0.0, h)).unwrap().0
                    - basis.eval(idx, p - Point::new(0.0, h)).unwrap().0)
                    / (2.0 * h);
                assert_abs_diff_eq!(g.x, fd_x, epsilon = 1e-6);
                assert_abs_diff_eq!(g.y, fd_y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn point_source_satisfies_helmholtz_away_from_source() {
        // 5-point residual shrinks at second order as h halves
        let f = PointSource { k: 1.0, source: Point::new(0.0, 0.0) };
        let p = Point::new(0.8, 0.6);
        let resid = |h: f64| {
            let lap = (f.value(p + Point::new(h, 0.0))
                + f.value(p - Point::new(h, 0.0))
                + f.value(p + Point::new(0.0, h))
                + f.value(p - Point::new(0.0, h))
                - 4.0 * f.value(p))
                / (h * h);
            (lap + f.value(p)).abs()
        };
        let r1 = resid(1e-3);
        let r2 = resid(5e-4);
        assert!(r1 < 1e-4);
        assert!(r2 < 0.3 * r1, "second-order decay: {r1} -> {r2}");
    }

    #[test]
    fn catalog_solutions_satisfy_helmholtz() {
        for k in [0.0, 0.8] {
            for sol in CatalogSolution::default_suite(k) {
                let p = Point::new(0.35, -0.55);
                let h = 1e-4;
                let lap = (sol.value(p + Point::new(h, 0.0))
                    + sol.value(p - Point::new(h, 0.0))
                    + sol.value(p + Point::new(0.0, h))
                    + sol.value(p - Point::new(0.0, h))
                    - 4.0 * sol.value(p))
                    / (h * h);
                assert!((lap + k * k * sol.value(p)).abs() < 1e-5);
                let g = sol.gradient(p);
                let fd = (sol.value(p + Point::new(h, 0.0)) - sol.value(p - Point::new(h, 0.0)))
                    / (2.0 * h);
                assert_abs_diff_eq!(g.x, fd, epsilon = 1e-6);
            }
        }
    }
}
