//! Needle sequences: entire Helmholtz solutions converging to the singular
//! solution `G(., x)` away from a needle, built by Tikhonov-regularized
//! least squares over collocation points kept clear of a tube around the
//! needle (the Runge-approximation step).
//!
//! The exclusion tube is deliberately wide: accurate wall data forces the
//! harmonic continuation inside the tube to develop the growth along the
//! needle that the indicator limits depend on. Shrinking the tube starves
//! the fit of usable rows near the singularity and stalls the indicator
//! sequence.

use crate::basis::{EntireBasis, Field, PointSource};
use crate::forward::GreensStar;
use crate::geometry::{contains, Curve, Family, Needle};
use crate::quadrature::Region;
use crate::{Error, Point, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NeedleSequenceParams {
    /// Largest basis order fitted.
    pub max_order: usize,
    /// Exclusion distance from the needle, relative to the domain diameter.
    pub tube_radius_rel: f64,
    /// Radial spacing of interior collocation rings, relative to the diameter.
    pub ring_spacing_rel: f64,
    /// Collocation nodes on the domain boundary.
    pub boundary_nodes: usize,
    /// Tikhonov schedule `alpha_n = alpha0 * decay^(n/5)`, floored.
    pub alpha0: f64,
    pub alpha_decay: f64,
    pub alpha_floor: f64,
    /// Weight of the gradient rows, relative to `diameter^2`.
    pub gradient_weight_rel: f64,
    /// Singular-solution family the sequence converges to.
    pub family: Family,
    /// Order schedule evaluated by probes.
    pub orders: Vec<usize>,
    /// Relative-change tolerance declaring an indicator sequence converged.
    pub convergence_tol: f64,
}

impl Default for NeedleSequenceParams {
    fn default() -> Self {
        NeedleSequenceParams {
            max_order: 60,
            tube_radius_rel: 0.2,
            ring_spacing_rel: 1.0 / 32.0,
            boundary_nodes: 256,
            alpha0: 1e-6,
            alpha_decay: 0.25,
            alpha_floor: 1e-14,
            gradient_weight_rel: 1.0 / 16.0,
            family: Family::G0,
            orders: vec![15, 30, 45, 60],
            convergence_tol: 1e-2,
        }
    }
}

impl NeedleSequenceParams {
    pub fn alpha(&self, order: usize) -> f64 {
        (self.alpha0 * self.alpha_decay.powf(order as f64 / 5.0)).max(self.alpha_floor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tube_radius_rel <= 0.0 {
            return Err(Error::Config("tube radius must be positive".into()));
        }
        if self.alpha0 <= 0.0 || self.alpha_floor <= 0.0 || !(self.alpha_decay < 1.0) {
            return Err(Error::Config(
                "alpha schedule must be positive and strictly decreasing".into(),
            ));
        }
        if self.orders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("order schedule must be increasing".into()));
        }
        if self.orders.last().copied().unwrap_or(0) > self.max_order {
            return Err(Error::Config("order schedule exceeds max_order".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Needle construction
// ---------------------------------------------------------------------------

/// How the needle reaches the boundary.
pub enum NeedleEntry {
    /// Straight segment from the boundary point at curve parameter `t`.
    Angle(f64),
    /// Straight segment from the boundary point nearest to the tip.
    Nearest,
    /// User-supplied polyline from the boundary to the tip.
    Vertices(Vec<Point>),
}

/// Build and validate a needle with tip `x`.
pub fn build_needle(domain: &Curve, x: Point, entry: NeedleEntry) -> Result<Needle> {
    if !contains(domain, x)? {
        return Err(Error::Needle(format!(
            "tip ({}, {}) is not inside the domain",
            x.x, x.y
        )));
    }
    let needle = match entry {
        NeedleEntry::Angle(t) => Needle { vertices: vec![domain.point(t), x] },
        NeedleEntry::Nearest => {
            let t = nearest_boundary_param(domain, x);
            Needle { vertices: vec![domain.point(t), x] }
        }
        NeedleEntry::Vertices(v) => Needle { vertices: v },
    };
    needle.validate(domain)?;
    Ok(needle)
}

/// Curve parameter of the boundary point nearest to `x` (dense scan plus
/// parabolic refinement).
pub fn nearest_boundary_param(domain: &Curve, x: Point) -> f64 {
    let n = 2048;
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..n {
        let t = std::f64::consts::TAU * j as f64 / n as f64;
        let d = domain.point(t).dist(x);
        if d < best.0 {
            best = (d, t);
        }
    }
    let h = std::f64::consts::TAU / n as f64;
    let f = |t: f64| domain.point(t).dist(x);
    let (fm, f0, fp) = (f(best.1 - h), best.0, f(best.1 + h));
    let denom = fm - 2.0 * f0 + fp;
    if denom.abs() > 1e-14 {
        best.1 + 0.5 * h * (fm - fp) / denom
    } else {
        best.1
    }
}

// ---------------------------------------------------------------------------
// The fitter
// ---------------------------------------------------------------------------

/// Reusable collocation scaffolding for fitting needle sequences in one
/// domain at one wavenumber. `Gstar` targets additionally carry the domain
/// Green-function shift.
///
/// The basis rows at every collocation point are precomputed at the maximum
/// order, and each fit works with the Gram matrix of the kept rows: the full
/// Gram is formed once and the rows inside the exclusion tube are subtracted
/// per needle, so a fit costs a handful of rank-one downdates plus one
/// Cholesky solve per order instead of a fresh SVD.
pub struct NeedleFitter {
    pub domain: Curve,
    pub k: f64,
    pub params: NeedleSequenceParams,
    colloc: Vec<Point>,
    center: Point,
    diameter: f64,
    /// Value / gradient basis rows at every collocation point (gradient rows
    /// carry the sqrt of the gradient weight), column-equilibrated.
    rows_val: DMatrix<f64>,
    rows_gx: DMatrix<f64>,
    rows_gy: DMatrix<f64>,
    col_scales: Vec<f64>,
    gram_all: DMatrix<f64>,
    grad_weight: f64,
    /// Boundary radius by angle about the centroid (the supported domains
    /// are star-shaped about it); used for cheap inside tests.
    radial_lut: Vec<f64>,
}

impl NeedleFitter {
    pub fn new(domain: &Curve, k: f64, params: NeedleSequenceParams) -> Result<Self> {
        params.validate()?;
        let center = domain.centroid();
        let diameter = domain.diameter();
        let mut colloc = Vec::new();
        // boundary ring
        for j in 0..params.boundary_nodes {
            let t = std::f64::consts::TAU * j as f64 / params.boundary_nodes as f64;
            colloc.push(domain.point(t));
        }
        // interior rings: scaled copies of the domain curve about the
        // centroid (domains are star-shaped about it for the supported kinds)
        let spacing = params.ring_spacing_rel * diameter;
        let step = spacing / (0.5 * diameter);
        let perimeter = crate::geometry::discretize_curve(domain, 256)?.perimeter();
        let mut s = 0.5 * step;
        while s < 0.999 {
            let count = ((perimeter * s) / spacing).ceil().max(12.0) as usize;
            for j in 0..count {
                let t = std::f64::consts::TAU * (j as f64 + 0.3) / count as f64;
                colloc.push(center + (domain.point(t) - center) * s);
            }
            s += step;
        }

        // precompute basis rows at the maximum order
        let basis = EntireBasis::new(k, center, params.max_order, diameter);
        let dim = basis.len();
        let npts = colloc.len();
        let grad_weight = params.gradient_weight_rel * diameter * diameter;
        let gw = grad_weight.sqrt();
        let mut rows_val = DMatrix::zeros(npts, dim);
        let mut rows_gx = DMatrix::zeros(npts, dim);
        let mut rows_gy = DMatrix::zeros(npts, dim);
        for (i, &p) in colloc.iter().enumerate() {
            for (j, (v, g)) in basis.eval_all(p).into_iter().enumerate() {
                rows_val[(i, j)] = v;
                rows_gx[(i, j)] = gw * g.x;
                rows_gy[(i, j)] = gw * g.y;
            }
        }
        let mut col_scales = vec![1.0_f64; dim];
        for (j, s) in col_scales.iter_mut().enumerate() {
            let m = rows_val
                .column(j)
                .amax()
                .max(rows_gx.column(j).amax())
                .max(rows_gy.column(j).amax());
            if m > 1e-280 {
                *s = m;
            }
        }
        for (j, s) in col_scales.iter().enumerate() {
            for i in 0..npts {
                rows_val[(i, j)] /= s;
                rows_gx[(i, j)] /= s;
                rows_gy[(i, j)] /= s;
            }
        }
        let gram_all = rows_val.transpose() * &rows_val
            + rows_gx.transpose() * &rows_gx
            + rows_gy.transpose() * &rows_gy;

        let lut_n = 1024;
        let mut radial_lut = vec![0.0_f64; lut_n];
        for p in domain.dense_polyline(4096) {
            let d = p - center;
            let idx = ((d.y.atan2(d.x) + std::f64::consts::TAU) % std::f64::consts::TAU
                / std::f64::consts::TAU
                * lut_n as f64) as usize
                % lut_n;
            radial_lut[idx] = radial_lut[idx].max(d.norm());
        }
        // fill any empty bins from neighbors
        for i in 0..lut_n {
            if radial_lut[i] == 0.0 {
                radial_lut[i] = radial_lut[(i + lut_n - 1) % lut_n];
            }
        }

        Ok(NeedleFitter {
            domain: domain.clone(),
            k,
            params,
            colloc,
            center,
            diameter,
            rows_val,
            rows_gx,
            rows_gy,
            col_scales,
            gram_all,
            grad_weight,
            radial_lut,
        })
    }

    /// Cheap inside test via the radial lookup (conservative by `margin`).
    fn inside_with_margin(&self, p: Point, margin: f64) -> bool {
        let d = p - self.center;
        let r = d.norm();
        let idx = ((d.y.atan2(d.x) + std::f64::consts::TAU) % std::f64::consts::TAU
            / std::f64::consts::TAU
            * self.radial_lut.len() as f64) as usize
            % self.radial_lut.len();
        r + margin < self.radial_lut[idx]
    }

    /// Fit several orders of the sequence for one needle, sharing the
    /// exclusion, the Gram downdate and the right-hand side across orders.
    pub fn fit_sequence(
        &self,
        needle: &Needle,
        orders: &[usize],
        gstar: Option<Arc<GreensStar>>,
    ) -> Result<Vec<NeedleFunction>> {
        for &o in orders {
            if o > self.params.max_order {
                return Err(Error::Config(format!(
                    "order {o} exceeds max_order {}",
                    self.params.max_order
                )));
            }
        }
        if self.params.family == Family::Gstar && gstar.is_none() {
            return Err(Error::Config(
                "family Gstar requires the domain Green function handle".into(),
            ));
        }
        let x = needle.tip();
        let target = PointSource { k: self.k, source: x };
        let tube = self.tube_radius();
        let dim = self.gram_all.nrows();
        let npts = self.colloc.len();
        let gw = self.grad_weight.sqrt();

        // Gram of the kept rows = full Gram minus the excluded rows, and the
        // right-hand side accumulated over the kept rows only
        let excluded: Vec<bool> = self
            .colloc
            .iter()
            .map(|&p| needle.distance_to_point(p) < tube)
            .collect();
        let mut gram = self.gram_all.clone();
        let mut rhs = DVector::zeros(dim);
        let mut kept = 0usize;
        for i in 0..npts {
            let p = self.colloc[i];
            if excluded[i] {
                for a in 0..dim {
                    let (va, gxa, gya) =
                        (self.rows_val[(i, a)], self.rows_gx[(i, a)], self.rows_gy[(i, a)]);
                    for b in a..dim {
                        let d = va * self.rows_val[(i, b)]
                            + gxa * self.rows_gx[(i, b)]
                            + gya * self.rows_gy[(i, b)];
                        gram[(a, b)] -= d;
                        if a != b {
                            gram[(b, a)] -= d;
                        }
                    }
                }
            } else {
                kept += 1;
                let tv = target.value(p);
                let tg = target.gradient(p);
                for a in 0..dim {
                    rhs[a] += self.rows_val[(i, a)] * tv
                        + self.rows_gx[(i, a)] * (gw * tg.x)
                        + self.rows_gy[(i, a)] * (gw * tg.y);
                }
            }
        }

        let check_pts = self.check_set(needle);
        let mut out = Vec::with_capacity(orders.len());
        for &order in orders {
            let p_dim = 2 * order + 1;
            if kept < 2 * p_dim {
                return Err(Error::Config(format!(
                    "only {kept} collocation points for {p_dim} basis functions"
                )));
            }
            let alpha = self.params.alpha(order);
            let block = gram.view((0, 0), (p_dim, p_dim)).into_owned();
            let rhs_block = rhs.rows(0, p_dim).into_owned();
            let mut coeffs = None;
            let mut a_eff = alpha;
            for _ in 0..6 {
                let mut sys = block.clone();
                for d in 0..p_dim {
                    sys[(d, d)] += a_eff;
                }
                if let Some(chol) = nalgebra::Cholesky::new(sys) {
                    coeffs = Some(chol.solve(&rhs_block));
                    break;
                }
                a_eff *= 100.0;
            }
            let mut coeffs = coeffs.ok_or_else(|| Error::ApproximationFailure {
                residual: f64::NAN,
                order,
            })?;

            // collocation residual of the value rows (kept points)
            let mut resid_sq = 0.0;
            for i in 0..npts {
                let p = self.colloc[i];
                if excluded[i] {
                    continue;
                }
                let mut v = 0.0;
                for a in 0..p_dim {
                    v += self.rows_val[(i, a)] * coeffs[a];
                }
                let d = v - target.value(p);
                resid_sq += d * d;
            }
            let residual_rms = (resid_sq / kept as f64).sqrt();
            for (c, s) in coeffs.iter_mut().zip(&self.col_scales) {
                *c /= s;
            }
            let coeff_norm = coeffs.norm();
            let basis = EntireBasis::new(self.k, self.center, order, self.diameter);
            let v = NeedleFunction {
                basis,
                coeffs,
                needle: needle.clone(),
                order,
                family: self.params.family,
                shift: if self.params.family == Family::Gstar {
                    gstar.clone()
                } else {
                    None
                },
                diagnostics: FitDiagnostics {
                    alpha: a_eff,
                    residual_rms,
                    coeff_norm,
                    checkset_sup_rel: f64::NAN,
                },
            };
            let checkset_sup_rel = self.checkset_error(&v, &check_pts);
            out.push(NeedleFunction {
                diagnostics: FitDiagnostics { checkset_sup_rel, ..v.diagnostics },
                ..v
            });
        }
        Ok(out)
    }

    /// Tube radius in absolute units.
    pub fn tube_radius(&self) -> f64 {
        self.params.tube_radius_rel * self.diameter
    }

    /// Fit the order-`n` member of the needle sequence for the needle.
    /// For family `Gstar`, `gstar` carries `G*(., x)`; the entire part still
    /// targets the free-space `G(. - x)` and the Green-function remainder
    /// `H(., x)` rides along as a shift (the completely integrated
    /// construction), so nothing about the fit itself changes.
    pub fn fit(
        &self,
        needle: &Needle,
        order: usize,
        gstar: Option<Arc<GreensStar>>,
    ) -> Result<NeedleFunction> {
        Ok(self
            .fit_sequence(needle, &[order], gstar)?
            .into_iter()
            .next()
            .expect("one order requested"))
    }

    /// Sup relative error `|v - target|` over the held-out check set.
    fn checkset_error(&self, v: &NeedleFunction, pts: &[Point]) -> f64 {
        let source = PointSource { k: self.k, source: v.needle.tip() };
        let targets: Vec<f64> = pts
            .iter()
            .map(|&p| match (&v.shift, v.family) {
                (Some(gs), Family::Gstar) => gs.value(p),
                _ => source.value(p),
            })
            .collect();
        let scale = targets.iter().fold(0.0_f64, |m, t| m.max(t.abs())).max(1e-6);
        let mut sup = 0.0_f64;
        for (&p, &t) in pts.iter().zip(targets.iter()) {
            sup = sup.max((v.value(p) - t).abs() / scale);
        }
        sup
    }

    /// Deterministic sample of the offset curve just outside the exclusion
    /// tube (64 points, clipped to the domain).
    pub fn check_set(&self, needle: &Needle) -> Vec<Point> {
        let r = self.tube_radius() + 0.1 * self.diameter;
        let band = 0.05 * r;
        let mut candidates = Vec::new();
        let total_len = needle.length();
        let steps = 64;
        for i in 0..=steps {
            let s = total_len * i as f64 / steps as f64;
            let c = point_at_arclength(needle, s);
            for j in 0..16 {
                let ang = std::f64::consts::TAU * j as f64 / 16.0;
                let p = c + Point::new(r * ang.cos(), r * ang.sin());
                if (needle.distance_to_point(p) - r).abs() > band {
                    continue;
                }
                if !self.inside_with_margin(p, 0.02 * self.diameter) {
                    continue;
                }
                candidates.push(p);
            }
        }
        let keep = candidates.len().div_ceil(64).max(1);
        candidates.into_iter().step_by(keep).collect()
    }
}

fn point_at_arclength(needle: &Needle, s: f64) -> Point {
    let mut rest = s;
    for w in needle.vertices.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        if rest <= len {
            return w[0] + seg * (rest / len);
        }
        rest -= len;
    }
    needle.tip()
}

// ---------------------------------------------------------------------------
// Needle functions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FitDiagnostics {
    pub alpha: f64,
    /// RMS collocation residual of the value rows.
    pub residual_rms: f64,
    pub coeff_norm: f64,
    /// Sup relative error on the held-out check set.
    pub checkset_sup_rel: f64,
}

/// One member of a needle sequence: an entire-basis expansion, plus (for
/// family `Gstar`) the Green-function remainder `H(., x)`, so that the
/// member converges to `G*(., x)` off the needle.
pub struct NeedleFunction {
    pub basis: EntireBasis,
    pub coeffs: DVector<f64>,
    pub needle: Needle,
    pub order: usize,
    pub family: Family,
    pub shift: Option<Arc<GreensStar>>,
    pub diagnostics: FitDiagnostics,
}

impl NeedleFunction {
    /// Entire part only (without the `Gstar` shift).
    pub fn entire_value(&self, p: Point) -> f64 {
        self.basis
            .eval_all(p)
            .iter()
            .zip(self.coeffs.iter())
            .map(|(&(v, _), c)| v * c)
            .sum()
    }
}

impl Field for NeedleFunction {
    fn value(&self, p: Point) -> f64 {
        let mut v = self.entire_value(p);
        if let Some(gs) = &self.shift {
            v += gs.h.value(p);
        }
        v
    }

    fn gradient(&self, p: Point) -> Point {
        let mut g = Point::new(0.0, 0.0);
        for (&(_, gv), c) in self.basis.eval_all(p).iter().zip(self.coeffs.iter()) {
            g = g + gv * *c;
        }
        if let Some(gs) = &self.shift {
            g = g + gs.h.gradient(p);
        }
        g
    }
}

/// `||grad v||^2_{L^2(region)}` by tensor-product quadrature.
pub fn gradient_energy(v: &dyn Field, region: &Region) -> f64 {
    let (pts, wts) = region.quadrature(24, 48);
    pts.iter()
        .zip(&wts)
        .map(|(&p, &w)| w * v.gradient(p).norm_sq())
        .sum()
}

// ---------------------------------------------------------------------------
