//! Indicator machinery: the indicator sequence and its limit, the value
//! `W_x(x)` of the auxiliary solution and both of its decompositions, the
//! precomputable part `I1`, the two-point lifting, the singular-sources
//! variant, and grid classification.
//!
//! Two engines keep the data paths honest:
//!
//! * [`ProbeEngine`] sees only the domain curve and the two DN matrices —
//!   everything a reconstruction from boundary data may use.
//! * [`DirectEngine`] owns the scenario geometry and the forward solver; it
//!   produces the ground-truth quantities the probe results are certified
//!   against.

use crate::basis::{Field, PointSource};
use crate::forward::{
    greens_star, BoundaryData, CondType, DiscretizationParams, DtNMatrix, ForwardSolution,
    GreensStar, MfsOperator, RegionGrids,
};
use crate::geometry::{discretize_curve, Bc, BoundaryGrid, Curve, Family, Needle, Scenario};
use crate::needles::{
    build_needle, nearest_boundary_param, NeedleEntry, NeedleFitter, NeedleFunction,
    NeedleSequenceParams,
};
use crate::trace::TraceBasis;
use crate::{Error, Point, Result};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Estimates and field types
// ---------------------------------------------------------------------------

/// Extrapolated limit of an indicator sequence.
#[derive(Debug, Clone)]
pub struct IndicatorEstimate {
    /// Limit estimate (last term of the schedule).
    pub value: f64,
    /// `(order, term)` along the schedule.
    pub terms: Vec<(usize, f64)>,
    /// Relative change of the last two terms below tolerance.
    pub converged: bool,
    /// `|J_N - J_{N-1}| / max(|J_N|, 1)`.
    pub last_rel_change: f64,
    pub family: Family,
}

impl IndicatorEstimate {
    fn from_terms(terms: Vec<(usize, f64)>, tol: f64, family: Family) -> Self {
        let n = terms.len();
        let value = terms[n - 1].1;
        let last_rel_change = if n >= 2 {
            (value - terms[n - 2].1).abs() / value.abs().max(1.0)
        } else {
            f64::INFINITY
        };
        IndicatorEstimate { value, terms, converged: last_rel_change < tol, last_rel_change, family }
    }
}

/// Classification label of a probe point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    NeumannNear,
    DirichletNear,
    Background,
    Unresolved,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Label::NeumannNear => "neumann-near",
            Label::DirichletNear => "dirichlet-near",
            Label::Background => "background",
            Label::Unresolved => "unresolved",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct FieldPoint {
    pub p: Point,
    pub value: f64,
    pub converged: bool,
    pub label: Label,
    pub entry_angle: f64,
    /// Growth diagnostic: relative change of the last two sequence terms.
    pub last_rel_change: f64,
}

/// Classified indicator values over a probe grid.
#[derive(Debug, Clone)]
pub struct IndicatorField {
    pub points: Vec<FieldPoint>,
    /// Blow-up threshold `T` (diverging + |value| > T labels a boundary).
    pub threshold_t: f64,
    /// Background threshold `B` (converged + |value| <= B labels background).
    pub threshold_b: f64,
}

impl IndicatorField {
    /// CSV rows `x,y,value,converged,label,needle_entry_angle` with floats at
    /// 17 significant digits (golden-file stable).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value,converged,label,needle_entry_angle\n");
        for fp in &self.points {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{},{},{:.16e}\n",
                fp.p.x, fp.p.y, fp.value, fp.converged, fp.label, fp.entry_angle
            ));
        }
        out
    }
}

/// Probe-grid specification: `nx x ny` lattice over the domain bounding box,
/// keeping points inside the domain with the given boundary margin.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub margin: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 40, ny: 40, margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeedleStrategy {
    /// Straight needle from the boundary point nearest to the probe point.
    Radial,
    /// Four entry directions; keep the best-converged estimate.
    Fan,
}

// ---------------------------------------------------------------------------
// Probe engine (data side)
// ---------------------------------------------------------------------------

/// Blind reconstruction engine: domain curve plus the two DN matrices.
pub struct ProbeEngine {
    pub domain: Curve,
    pub k: f64,
    pub lambda_0: DtNMatrix,
    pub lambda_d: DtNMatrix,
    delta: DtNMatrix,
    pub tb: TraceBasis,
    pub trace_grid: BoundaryGrid,
    pub fitter: NeedleFitter,
    /// Obstacle-free Dirichlet operator (domain Green function for `Gstar`).
    op_free: Arc<MfsOperator>,
    pub needle_params: NeedleSequenceParams,
}

impl ProbeEngine {
    pub fn new(
        domain: &Curve,
        lambda_0: DtNMatrix,
        lambda_d: DtNMatrix,
        disc: &DiscretizationParams,
        needle_params: NeedleSequenceParams,
    ) -> Result<Self> {
        if lambda_0.order != lambda_d.order {
            return Err(Error::Config(format!(
                "trace order mismatch: {} vs {}",
                lambda_0.order, lambda_d.order
            )));
        }
        if lambda_0.k != lambda_d.k {
            return Err(Error::Config("wavenumber mismatch between DN matrices".into()));
        }
        let k = lambda_d.k;
        let trace_grid = discretize_curve(domain, disc.boundary_nodes)?;
        let tb = TraceBasis::new(&trace_grid, lambda_0.order)?;
        let delta = lambda_0.difference(&lambda_d)?;
        let fitter = NeedleFitter::new(domain, k, needle_params.clone())?;
        let free_scenario = Scenario::new(domain.clone(), vec![], k, Family::G0);
        let grids_free = Arc::new(RegionGrids::obstacle_free(&free_scenario, disc)?);
        let op_free = Arc::new(MfsOperator::new(
            &free_scenario,
            grids_free,
            vec![CondType::Dirichlet],
            *disc,
        )?);
        Ok(ProbeEngine {
            domain: domain.clone(),
            k,
            lambda_0,
            lambda_d,
            delta,
            tb,
            trace_grid,
            fitter,
            op_free,
            needle_params,
        })
    }

    /// Trace coefficients of a field on the outer boundary.
    pub fn project(&self, f: &dyn Field) -> DVector<f64> {
        self.tb.project_field(&self.trace_grid, f)
    }

    /// One term of the indicator sequence:
    /// `<(Lambda_0 - Lambda_D) v|_boundary, v|_boundary>`.
    pub fn indicator_term(&self, v: &NeedleFunction) -> f64 {
        let f = self.project(v);
        self.delta.pairing(&f, &f)
    }

    /// The singular solution of the configured family with source `x`.
    pub fn family_field(&self, x: Point) -> Result<(Arc<dyn Field>, Option<Arc<GreensStar>>)> {
        match self.needle_params.family {
            Family::G0 => Ok((Arc::new(PointSource { k: self.k, source: x }), None)),
            Family::Gstar => {
                let gs = Arc::new(greens_star(&self.op_free, x)?);
                Ok((Arc::new(GsField(Arc::clone(&gs))), Some(gs)))
            }
        }
    }

    /// Evaluate the indicator sequence for `(x, needle)` along the order
    /// schedule and extrapolate.
    pub fn probe(&self, needle: &Needle) -> Result<IndicatorEstimate> {
        let x = needle.tip();
        let (_, gs) = self.family_field(x)?;
        let mut terms = Vec::with_capacity(self.needle_params.orders.len());
        for &n in &self.needle_params.orders {
            let v = self.fitter.fit(needle, n, gs.clone())?;
            terms.push((n, self.indicator_term(&v)));
        }
        Ok(IndicatorEstimate::from_terms(
            terms,
            self.needle_params.convergence_tol,
            self.needle_params.family,
        ))
    }

    /// `I1(x)`: the part of the inner decomposition computable without
    /// probing. Zero for family `Gstar` (the Green-function trace vanishes).
    pub fn i1(&self, x: Point) -> Result<f64> {
        match self.needle_params.family {
            Family::Gstar => Ok(0.0),
            Family::G0 => {
                let source = PointSource { k: self.k, source: x };
                let g = self.project(&source);
                let pairing = self.lambda_d.pairing(&g, &g);
                Ok(pairing - self.boundary_g_flux_integral(&source))
            }
        }
    }

    /// `\oint dG/dnu . G dS` over the outer boundary.
    fn boundary_g_flux_integral(&self, f: &dyn Field) -> f64 {
        let g = &self.trace_grid;
        let mut acc = 0.0;
        for i in 0..g.m {
            acc += g.weights[i] * f.normal_deriv(g.nodes[i], g.normals[i]) * f.value(g.nodes[i]);
        }
        acc
    }

    /// Lifted indicator `I(x, y)`: bilinear pairing of two needle sequences,
    /// extrapolated along the schedule.
    pub fn lifted_indicator(
        &self,
        needle_x: &Needle,
        needle_y: &Needle,
    ) -> Result<IndicatorEstimate> {
        let (_, gs_x) = self.family_field(needle_x.tip())?;
        let (_, gs_y) = self.family_field(needle_y.tip())?;
        let mut terms = Vec::new();
        for &n in &self.needle_params.orders {
            let vx = self.fitter.fit(needle_x, n, gs_x.clone())?;
            let vy = self.fitter.fit(needle_y, n, gs_y.clone())?;
            let fx = self.project(&vx);
            let fy = self.project(&vy);
            terms.push((n, self.delta.pairing(&fx, &fy)));
        }
        Ok(IndicatorEstimate::from_terms(
            terms,
            self.needle_params.convergence_tol,
            self.needle_params.family,
        ))
    }

    /// Singular-sources indicator `w0_x(x)` by both routes: the direct
    /// pairing `-lim <dLambda v_n, (G - v_n)>` and the polarization
    /// combination `(J[v] + J[G - v] - <dLambda G, G>) / 2`. The two must
    /// agree; their difference is a DN-symmetry defect.
    pub fn sources_indicator(&self, needle: &Needle) -> Result<SourcesIndicator> {
        if self.needle_params.family != Family::G0 {
            return Err(Error::Config(
                "the singular-sources indicator is defined for family G0".into(),
            ));
        }
        let x = needle.tip();
        let source = PointSource { k: self.k, source: x };
        let g = self.project(&source);
        let gg = self.delta.pairing(&g, &g);
        let mut direct = Vec::new();
        let mut polar = Vec::new();
        for &n in &self.needle_params.orders {
            let v = self.fitter.fit(needle, n, None)?;
            let f = self.project(&v);
            let gmf = &g - &f;
            direct.push((n, -self.delta.pairing(&f, &gmf)));
            let jv = self.delta.pairing(&f, &f);
            let jg = self.delta.pairing(&gmf, &gmf);
            polar.push((n, 0.5 * (jv + jg - gg)));
        }
        let tol = self.needle_params.convergence_tol;
        Ok(SourcesIndicator {
            direct: IndicatorEstimate::from_terms(direct, tol, Family::G0),
            polarization: IndicatorEstimate::from_terms(polar, tol, Family::G0),
            g_pairing: gg,
        })
    }

    /// Probe every grid point and classify. Per-point failures label the
    /// point unresolved; the sweep always completes.
    pub fn classify_field(
        &self,
        grid: &GridSpec,
        strategy: NeedleStrategy,
        thresholds: Option<(f64, f64)>,
    ) -> Result<IndicatorField> {
        let pts = self.grid_points(grid)?;
        let raw: Vec<(Point, f64, Result<IndicatorEstimate>)> = pts
            .par_iter()
            .map(|&p| {
                let (angle, est) = self.probe_with_strategy(p, strategy);
                (p, angle, est)
            })
            .collect();

        let mut magnitudes: Vec<f64> = raw
            .iter()
            .filter_map(|(_, _, e)| e.as_ref().ok().map(|est| est.value.abs()))
            .collect();
        magnitudes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if magnitudes.is_empty() {
            0.0
        } else {
            magnitudes[magnitudes.len() / 2]
        };
        let (threshold_t, threshold_b) = thresholds.unwrap_or((median, 3.0 * median));
        // blow-up needs clearly growing terms; the factor keeps a dead band
        // between "converged" and "diverging"
        let divergence_tol = 1.5 * self.needle_params.convergence_tol;

        let points = raw
            .into_iter()
            .map(|(p, entry_angle, est)| match est {
                Ok(est) => {
                    let diverging = est.last_rel_change >= divergence_tol;
                    let label = if est.value > threshold_t && diverging {
                        Label::NeumannNear
                    } else if est.value < -threshold_t && diverging {
                        Label::DirichletNear
                    } else if !diverging && est.value.abs() <= threshold_b {
                        Label::Background
                    } else {
                        Label::Unresolved
                    };
                    FieldPoint {
                        p,
                        value: est.value,
                        converged: est.converged,
                        label,
                        entry_angle,
                        last_rel_change: est.last_rel_change,
                    }
                }
                Err(_) => FieldPoint {
                    p,
                    value: f64::NAN,
                    converged: false,
                    label: Label::Unresolved,
                    entry_angle,
                    last_rel_change: f64::INFINITY,
                },
            })
            .collect();
        Ok(IndicatorField { points, threshold_t, threshold_b })
    }

    fn probe_with_strategy(
        &self,
        p: Point,
        strategy: NeedleStrategy,
    ) -> (f64, Result<IndicatorEstimate>) {
        let t_near = nearest_boundary_param(&self.domain, p);
        match strategy {
            NeedleStrategy::Radial => {
                let est = build_needle(&self.domain, p, NeedleEntry::Angle(t_near))
                    .and_then(|needle| self.probe(&needle));
                (t_near, est)
            }
            NeedleStrategy::Fan => {
                let mut best: Option<(f64, IndicatorEstimate, f64)> = None;
                for i in 0..4 {
                    let t = t_near + i as f64 * std::f64::consts::FRAC_PI_2;
                    let est = build_needle(&self.domain, p, NeedleEntry::Angle(t))
                        .and_then(|needle| self.probe(&needle));
                    if let Ok(est) = est {
                        let n = est.terms.len();
                        let chg = ((est.terms[n - 1].1 - est.terms[n - 2].1).abs())
                            / est.value.abs().max(1.0);
                        if best.as_ref().map_or(true, |(_, _, c)| chg < *c) {
                            best = Some((t, est, chg));
                        }
                    }
                }
                match best {
                    Some((t, est, _)) => (t, Ok(est)),
                    None => (t_near, Err(Error::Needle("all fan directions failed".into()))),
                }
            }
        }
    }

    /// Lattice points of the grid spec that lie inside the domain with the
    /// requested margin.
    pub fn grid_points(&self, grid: &GridSpec) -> Result<Vec<Point>> {
        let dense = self.domain.dense_polyline(512);
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &dense {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let mut out = Vec::new();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let p = Point::new(
                    xmin + (xmax - xmin) * (ix as f64 + 0.5) / grid.nx as f64,
                    ymin + (ymax - ymin) * (iy as f64 + 0.5) / grid.ny as f64,
                );
                if self.domain.distance_to_point(p) < grid.margin {
                    continue;
                }
                if matches!(crate::geometry::contains(&self.domain, p), Ok(true)) {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

/// Field view of a shared Green function.
struct GsField(Arc<GreensStar>);

impl Field for GsField {
    fn value(&self, p: Point) -> f64 {
        self.0.value(p)
    }
    fn gradient(&self, p: Point) -> Point {
        self.0.gradient(p)
    }
}

/// Both routes to the singular-sources indicator.
#[derive(Debug, Clone)]
pub struct SourcesIndicator {
    pub direct: IndicatorEstimate,
    pub polarization: IndicatorEstimate,
    /// `<(Lambda_0 - Lambda_D) G, G>` on the projected singular trace.
    pub g_pairing: f64,
}

// ---------------------------------------------------------------------------
// Direct engine (geometry side)
// ---------------------------------------------------------------------------

/// The auxiliary boundary value problems attached to a singular solution (or
/// to any global Helmholtz solution, for the correspondence tests).
pub struct AuxiliarySolutions {
    /// Reflected solution: homogeneous outer trace, `-field` data on the
    /// obstacles.
    pub w: ForwardSolution,
    /// Trace extension: `field` trace on the outer boundary, homogeneous
    /// obstacle conditions.
    pub w1: ForwardSolution,
    /// Complementing function with Dirichlet data on every component.
    pub eps_n: ForwardSolution,
    /// Complementing function with Neumann data on the obstacles.
    pub eps_d: ForwardSolution,
    /// The full auxiliary solution (`w + w1` by linearity).
    pub big_w: ForwardSolution,
}

/// Geometry-side engine: owns the scenario and the three factorized
/// condition patterns, shared across right-hand sides.
pub struct DirectEngine {
    pub scenario: Scenario,
    pub disc: DiscretizationParams,
    pub grids: Arc<RegionGrids>,
    pub op_physical: MfsOperator,
    pub op_all_dirichlet: MfsOperator,
    pub op_all_neumann_obstacles: MfsOperator,
    pub op_free: Arc<MfsOperator>,
    pub tb: TraceBasis,
}

impl DirectEngine {
    pub fn new(scenario: &Scenario, disc: &DiscretizationParams) -> Result<Self> {
        let grids = Arc::new(RegionGrids::from_scenario(scenario, disc)?);
        let mut physical = vec![CondType::Dirichlet];
        let mut all_d = vec![CondType::Dirichlet];
        let mut all_n = vec![CondType::Dirichlet];
        for o in &scenario.obstacles {
            physical.push(o.bc.into());
            all_d.push(CondType::Dirichlet);
            all_n.push(CondType::Neumann);
        }
        let op_physical = MfsOperator::new(scenario, Arc::clone(&grids), physical, *disc)?;
        let op_all_dirichlet = MfsOperator::new(scenario, Arc::clone(&grids), all_d, *disc)?;
        let op_all_neumann_obstacles =
            MfsOperator::new(scenario, Arc::clone(&grids), all_n, *disc)?;
        let grids_free = Arc::new(RegionGrids::obstacle_free(scenario, disc)?);
        let op_free = Arc::new(MfsOperator::new(
            scenario,
            grids_free,
            vec![CondType::Dirichlet],
            *disc,
        )?);
        let tb = TraceBasis::new(grids.outer(), disc.trace_order)?;
        Ok(DirectEngine {
            scenario: scenario.clone(),
            disc: *disc,
            grids,
            op_physical,
            op_all_dirichlet,
            op_all_neumann_obstacles,
            op_free,
            tb,
        })
    }

    /// The singular solution of the scenario family with source `x`.
    pub fn family_field(&self, x: Point) -> Result<Arc<dyn Field>> {
        match self.scenario.family {
            Family::G0 => Ok(Arc::new(PointSource { k: self.scenario.k, source: x })),
            Family::Gstar => Ok(Arc::new(GsField(Arc::new(greens_star(&self.op_free, x)?)))),
        }
    }

    /// Solve all five auxiliary problems driven by `field` data.
    pub fn auxiliary_solutions(&self, field: &Arc<dyn Field>) -> Result<AuxiliarySolutions> {
        let mut w_data = vec![BoundaryData::Zero];
        let mut w1_data = vec![BoundaryData::Trace { field: Arc::clone(field), scale: 1.0 }];
        let mut big_data = vec![BoundaryData::Trace { field: Arc::clone(field), scale: 1.0 }];
        let mut eps_n_data = vec![BoundaryData::Zero];
        let mut eps_d_data = vec![BoundaryData::Zero];
        for o in &self.scenario.obstacles {
            let negated = |scale: f64| match o.bc {
                Bc::Neumann => BoundaryData::Flux { field: Arc::clone(field), scale },
                Bc::Dirichlet => BoundaryData::Trace { field: Arc::clone(field), scale },
            };
            w_data.push(negated(-1.0));
            big_data.push(negated(-1.0));
            w1_data.push(BoundaryData::Zero);
            // Dirichlet data on every component: zero on Neumann obstacles,
            // the field trace on Dirichlet obstacles
            eps_n_data.push(match o.bc {
                Bc::Neumann => BoundaryData::Zero,
                Bc::Dirichlet => BoundaryData::Trace { field: Arc::clone(field), scale: 1.0 },
            });
            // Neumann data on every obstacle: the field flux on Neumann
            // obstacles, zero on Dirichlet obstacles
            eps_d_data.push(match o.bc {
                Bc::Neumann => BoundaryData::Flux { field: Arc::clone(field), scale: 1.0 },
                Bc::Dirichlet => BoundaryData::Zero,
            });
        }
        Ok(AuxiliarySolutions {
            w: self.op_physical.solve(&w_data)?,
            w1: self.op_physical.solve(&w1_data)?,
            eps_n: self.op_all_dirichlet.solve(&eps_n_data)?,
            eps_d: self.op_all_neumann_obstacles.solve(&eps_d_data)?,
            big_w: self.op_physical.solve(&big_data)?,
        })
    }

    /// Ensure `x` is probe-safe for the direct identities.
    pub fn check_proximity(&self, x: Point, minimum: f64) -> Result<()> {
        let d_outer = self.scenario.domain.distance_to_point(x);
        let d_obs = self.scenario.distance_to_obstacles(x);
        let d = d_outer.min(d_obs);
        if d < minimum {
            return Err(Error::Proximity { distance: d, minimum });
        }
        Ok(())
    }

    /// `W_x(x)` evaluated from the solve of the auxiliary problem.
    pub fn ips_value(&self, x: Point) -> Result<f64> {
        let field = self.family_field(x)?;
        let aux = self.auxiliary_solutions(&field)?;
        Ok(aux.big_w.value(x))
    }

    /// Ground-truth indicator value: `W_x(x)` minus the precomputable part.
    pub fn indicator_direct(&self, x: Point) -> Result<f64> {
        self.check_proximity(x, 0.02)?;
        let field = self.family_field(x)?;
        let aux = self.auxiliary_solutions(&field)?;
        let g = self.tb.project_field(self.grids.outer(), field.as_ref());
        let pairing = self.pairing_lambda_d(&g)?;
        Ok(aux.big_w.value(x) - pairing + self.outer_flux_integral(field.as_ref()))
    }

    /// `<Lambda_D f, f>` computed on the geometry side: the normal derivative
    /// of the solution with Dirichlet trace `f` paired with `f`.
    fn pairing_lambda_d(&self, f: &DVector<f64>) -> Result<f64> {
        let outer = self.grids.outer();
        let nodal = self.tb.nodal_values(f);
        let mut data = vec![BoundaryData::Nodal(nodal.iter().cloned().collect())];
        for _ in 0..self.scenario.obstacles.len() {
            data.push(BoundaryData::Zero);
        }
        let u = self.op_physical.solve(&data)?;
        let mut acc = 0.0;
        for i in 0..outer.m {
            acc += outer.weights[i] * u.gradient(outer.nodes[i]).dot(outer.normals[i]) * nodal[i];
        }
        Ok(acc)
    }

    /// `\oint dG/dnu G dS` over the outer boundary.
    pub fn outer_flux_integral(&self, f: &dyn Field) -> f64 {
        let g = self.grids.outer();
        let mut acc = 0.0;
        for i in 0..g.m {
            acc += g.weights[i] * f.normal_deriv(g.nodes[i], g.normals[i]) * f.value(g.nodes[i]);
        }
        acc
    }

    /// Lifted indicator from the geometry side:
    /// `I(x, y) = w_x(y) - \oint dw_x/dnu G(., y) dS`.
    pub fn lifted_direct(&self, x: Point, y: Point) -> Result<f64> {
        let field_x = self.family_field(x)?;
        let field_y = self.family_field(y)?;
        let aux = self.auxiliary_solutions(&field_x)?;
        let outer = self.grids.outer();
        let mut boundary_term = 0.0;
        for i in 0..outer.m {
            boundary_term += outer.weights[i]
                * aux.w.gradient(outer.nodes[i]).dot(outer.normals[i])
                * field_y.value(outer.nodes[i]);
        }
        Ok(aux.w.value(y) - boundary_term)
    }

    /// Both energy expressions for `W_x(x)` (Neumann-focused and
    /// Dirichlet-focused), plus the directly solved value. Every volume
    /// energy is reduced to boundary integrals.
    pub fn ips_decompositions(&self, x: Point) -> Result<DecompositionReport> {
        self.check_proximity(x, 0.02)?;
        let field = self.family_field(x)?;
        let aux = self.auxiliary_solutions(&field)?;
        let direct = aux.big_w.value(x);
        let outer_flux = self.outer_flux_integral(field.as_ref());

        let e_dn_g = self.obstacle_energy(field.as_ref(), Bc::Neumann);
        let e_dd_g = self.obstacle_energy(field.as_ref(), Bc::Dirichlet);
        let sum_wn = AddField(&aux.w, &aux.eps_n);
        let sum_wd = AddField(&aux.w, &aux.eps_d);
        let e_w_eps_n = self.region_energy(&sum_wn);
        let e_w_eps_d = self.region_energy(&sum_wd);
        let e_w1 = self.region_energy(&aux.w1);
        let e_eps_n = self.region_energy(&aux.eps_n);
        let e_eps_d = self.region_energy(&aux.eps_d);

        let neumann_focused = e_dn_g + e_w_eps_n - outer_flux + e_w1 - e_eps_n - e_dd_g;
        let dirichlet_focused = -e_dd_g - e_w_eps_d - outer_flux + e_w1 + e_eps_d + e_dn_g;

        Ok(DecompositionReport { direct, neumann_focused, dirichlet_focused })
    }

    /// `||grad u||^2 - k^2 ||u||^2` over the obstacle-exterior region,
    /// reduced to its oriented boundary integrals (outer positive, obstacle
    /// boundaries negative).
    pub fn region_energy(&self, u: &dyn Field) -> f64 {
        let mut acc = flux_pairing(self.grids.outer(), u);
        for grid in &self.grids.components[1..] {
            acc -= flux_pairing(grid, u);
        }
        acc
    }

    /// Same energy over the interiors of the obstacles with boundary
    /// condition `which` (the singular solution is regular there).
    pub fn obstacle_energy(&self, u: &dyn Field, which: Bc) -> f64 {
        let mut acc = 0.0;
        for (o, grid) in self.scenario.obstacles.iter().zip(&self.grids.components[1..]) {
            if o.bc == which {
                acc += flux_pairing(grid, u);
            }
        }
        acc
    }

    /// Outer decomposition defect `W_x(y) - w_x(y) - w1_x(y)` at a point.
    pub fn outer_decomposition_defect(&self, x: Point, y: Point) -> Result<f64> {
        let field = self.family_field(x)?;
        let aux = self.auxiliary_solutions(&field)?;
        Ok(aux.big_w.value(y) - aux.w.value(y) - aux.w1.value(y))
    }

    /// Twisted-symmetry defect `(w_x(y) + w1_y(x)) - (w_y(x) + w1_x(y))`.
    /// Follows from the symmetry of the lifted indicators combined with the
    /// twisted decomposition; for the Green-function family it reduces to
    /// the symmetry of the reflected solution.
    pub fn twisted_symmetry_defect(&self, x: Point, y: Point) -> Result<f64> {
        let fx = self.family_field(x)?;
        let fy = self.family_field(y)?;
        let ax = self.auxiliary_solutions(&fx)?;
        let ay = self.auxiliary_solutions(&fy)?;
        Ok((ax.w.value(y) + ay.w1.value(x)) - (ay.w.value(x) + ax.w1.value(y)))
    }
}

/// Sum of two fields by reference (used for `w + eps` energies).
struct AddField<'a>(&'a dyn Field, &'a dyn Field);

impl Field for AddField<'_> {
    fn value(&self, p: Point) -> f64 {
        self.0.value(p) + self.1.value(p)
    }
    fn gradient(&self, p: Point) -> Point {
        self.0.gradient(p) + self.1.gradient(p)
    }
}

/// `\oint u du/dnu dS` over one component grid (its own outward normal).
pub fn flux_pairing(grid: &BoundaryGrid, u: &dyn Field) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.m {
        acc += grid.weights[i]
            * u.value(grid.nodes[i])
            * u.gradient(grid.nodes[i]).dot(grid.normals[i]);
    }
    acc
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecompositionReport {
    /// `W_x(x)` from the direct solve.
    pub direct: f64,
    /// Energy expression focused on the Neumann obstacle.
    pub neumann_focused: f64,
    /// Energy expression focused on the Dirichlet obstacle.
    pub dirichlet_focused: f64,
}

// ---------------------------------------------------------------------------
// Scoring against ground-truth geometry
// ---------------------------------------------------------------------------

/// Classification quality against the true geometry (post-hoc scoring).
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    /// Fraction of points within `near_dist` of a Neumann boundary labeled
    /// neumann-near.
    pub neumann_recall: f64,
    /// Same for Dirichlet boundaries.
    pub dirichlet_recall: f64,
    /// Obstacle-near labels among true background points (must be zero).
    pub background_false_alarms: usize,
    /// Fraction of true background points labeled background.
    pub background_recall: f64,
    pub neumann_precision: f64,
    pub dirichlet_precision: f64,
    pub near_dist: f64,
    pub far_dist: f64,
    pub unresolved: usize,
}

/// Score a classified field against the scenario geometry. Ground truth:
/// a point is `X-near` when within `near_dist` of an `X` obstacle boundary,
/// background when at least `far_dist` from every obstacle closure.
pub fn score_field(
    field: &IndicatorField,
    scenario: &Scenario,
    near_dist: f64,
    far_dist: f64,
) -> ScoreReport {
    let mut n_near = 0usize;
    let mut n_near_hit = 0usize;
    let mut d_near = 0usize;
    let mut d_near_hit = 0usize;
    let mut bg = 0usize;
    let mut bg_hit = 0usize;
    let mut bg_false = 0usize;
    let mut n_label = 0usize;
    let mut n_label_good = 0usize;
    let mut d_label = 0usize;
    let mut d_label_good = 0usize;
    let mut unresolved = 0usize;

    for fp in &field.points {
        if fp.label == Label::Unresolved {
            unresolved += 1;
        }
        let dist_n: f64 = scenario
            .obstacles
            .iter()
            .filter(|o| o.bc == Bc::Neumann)
            .map(|o| o.curve.distance_to_point(fp.p))
            .fold(f64::INFINITY, f64::min);
        let dist_d: f64 = scenario
            .obstacles
            .iter()
            .filter(|o| o.bc == Bc::Dirichlet)
            .map(|o| o.curve.distance_to_point(fp.p))
            .fold(f64::INFINITY, f64::min);
        let near_n = dist_n <= near_dist;
        let near_d = dist_d <= near_dist;
        let inside_any = scenario
            .obstacles
            .iter()
            .any(|o| matches!(crate::geometry::contains(&o.curve, fp.p), Ok(true)));
        let background = !inside_any && dist_n.min(dist_d) >= far_dist;

        if near_n {
            n_near += 1;
            if fp.label == Label::NeumannNear {
                n_near_hit += 1;
            }
        }
        if near_d {
            d_near += 1;
            if fp.label == Label::DirichletNear {
                d_near_hit += 1;
            }
        }
        if background {
            bg += 1;
            match fp.label {
                Label::Background => bg_hit += 1,
                Label::NeumannNear | Label::DirichletNear => bg_false += 1,
                Label::Unresolved => {}
            }
        }
        match fp.label {
            Label::NeumannNear => {
                n_label += 1;
                if dist_n <= far_dist {
                    n_label_good += 1;
                }
            }
            Label::DirichletNear => {
                d_label += 1;
                if dist_d <= far_dist {
                    d_label_good += 1;
                }
            }
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    ScoreReport {
        neumann_recall: ratio(n_near_hit, n_near),
        dirichlet_recall: ratio(d_near_hit, d_near),
        background_false_alarms: bg_false,
        background_recall: ratio(bg_hit, bg),
        neumann_precision: ratio(n_label_good, n_label),
        dirichlet_precision: ratio(d_label_good, d_label),
        near_dist,
        far_dist,
        unresolved,
    }
}
