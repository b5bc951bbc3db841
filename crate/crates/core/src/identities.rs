//! Numerical certification of the energy identities: the two decomposition
//! formulae for the DN quadratic form (with closed-form solutions and with
//! needle-sequence members), boundary reduction of volume energies, DN
//! symmetry, and the Poincare smallness conditions on the wavenumber.

use crate::basis::{CatalogSolution, Field};
use crate::bessel;
use crate::forward::{DtNMatrix, DtNPair};
use crate::geometry::{Bc, BoundaryGrid, Curve, Scenario};
use crate::indicator::{flux_pairing, AuxiliarySolutions, DirectEngine};
use crate::needles::NeedleFunction;
use crate::{Error, Point, Result};
use serde::Serialize;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One certified identity: left side, right side, relative residual.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub scenario_fingerprint: String,
}

impl IdentityReport {
    pub fn new(id: &str, lhs: f64, rhs: f64, tolerance: f64, fingerprint: &str) -> Self {
        let residual = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-6);
        IdentityReport {
            id: id.to_string(),
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual < tolerance,
            scenario_fingerprint: fingerprint.to_string(),
        }
    }
}

/// Poincare constants and the three smallness conditions on `k`.
#[derive(Debug, Clone, Serialize)]
pub struct SmallnessReport {
    /// Estimated mixed-boundary constant of the obstacle-exterior region
    /// (includes the 1.25 safety factor).
    pub c_region: f64,
    pub c_region_raw: f64,
    /// The region constant is an estimate, never exact.
    pub c_region_estimated: bool,
    /// Per obstacle: (index, constant, exact flag).
    pub c_obstacles: Vec<(usize, f64, bool)>,
    /// Condition values at the scenario wavenumber:
    /// `C(region)^2 k^2 <= 1`, `8 C^2 k^2 < 1` per obstacle type.
    pub cond_region: f64,
    pub cond_neumann: f64,
    pub cond_dirichlet: f64,
    pub k: f64,
    /// Largest admissible wavenumber under all three conditions.
    pub k_max: f64,
    pub pass: bool,
}

// ---------------------------------------------------------------------------
// Boundary-reduced energies
// ---------------------------------------------------------------------------

/// `||grad v||^2 - k^2 ||v||^2` over a region described by its oriented
/// boundary: `\oint v dv/dnu dS`, outer boundary positive, inner boundaries
/// negative. Valid when `v` solves the Helmholtz equation in the region.
pub fn energy_boundary(v: &dyn Field, parts: &[(&BoundaryGrid, f64)]) -> f64 {
    parts
        .iter()
        .map(|(grid, sign)| sign * flux_pairing(grid, v))
        .sum()
}

/// DN-matrix symmetry certificate.
pub fn verify_dn_symmetry(m: &DtNMatrix, tolerance: f64) -> IdentityReport {
    let residual = m.symmetry_residual();
    IdentityReport {
        id: "dn-symmetry".to_string(),
        lhs: 0.0,
        rhs: residual,
        residual,
        tolerance,
        pass: residual < tolerance,
        scenario_fingerprint: m.scenario_fingerprint.clone(),
    }
}

// ---------------------------------------------------------------------------
// The two decomposition formulae of the DN quadratic form
// ---------------------------------------------------------------------------

/// Certify both decomposition formulae for an arbitrary global Helmholtz
/// solution `v`: the quadratic form `<(L0 - LD) v, v>` from the DN matrices
/// against the two energy sums built from the auxiliary solutions driven by
/// `v`. Returns the (Neumann-focused, Dirichlet-focused) reports.
pub fn verify_quadratic_decomposition(
    engine: &DirectEngine,
    pair: &DtNPair,
    v: &Arc<dyn Field>,
    id_prefix: &str,
    tolerance: f64,
) -> Result<(IdentityReport, IdentityReport)> {
    let f = engine.tb.project_field(engine.grids.outer(), v.as_ref());
    let delta = pair.lambda_0.difference(&pair.lambda_d)?;
    let lhs = delta.pairing(&f, &f);
    let aux: AuxiliarySolutions = engine.auxiliary_solutions(v)?;

    let e_dn_v = engine.obstacle_energy(v.as_ref(), Bc::Neumann);
    let e_dd_v = engine.obstacle_energy(v.as_ref(), Bc::Dirichlet);
    let sum_n = SumRef(&aux.w, &aux.eps_n);
    let sum_d = SumRef(&aux.w, &aux.eps_d);
    let e_w_eps_n = engine.region_energy(&sum_n);
    let e_w_eps_d = engine.region_energy(&sum_d);
    let e_eps_n = engine.region_energy(&aux.eps_n);
    let e_eps_d = engine.region_energy(&aux.eps_d);

    let rhs_neumann = e_dn_v + e_w_eps_n - e_eps_n - e_dd_v;
    let rhs_dirichlet = -e_dd_v - e_w_eps_d + e_eps_d + e_dn_v;

    let fp = engine.scenario.fingerprint();
    Ok((
        IdentityReport::new(&format!("{id_prefix}-neumann"), lhs, rhs_neumann, tolerance, &fp),
        IdentityReport::new(&format!("{id_prefix}-dirichlet"), lhs, rhs_dirichlet, tolerance, &fp),
    ))
}

/// The decomposition formulae with a closed-form catalog solution.
pub fn verify_thm12(
    engine: &DirectEngine,
    pair: &DtNPair,
    v: &CatalogSolution,
    tolerance: f64,
) -> Result<(IdentityReport, IdentityReport)> {
    let field: Arc<dyn Field> = Arc::new(v.clone());
    verify_quadratic_decomposition(engine, pair, &field, "thm1.2", tolerance)
}

/// The same identities with a needle-sequence member in place of the
/// closed-form solution (they hold per member, not only in the limit).
pub fn verify_cor31(
    engine: &DirectEngine,
    pair: &DtNPair,
    member: NeedleFunction,
    tolerance: f64,
) -> Result<(IdentityReport, IdentityReport)> {
    let field: Arc<dyn Field> = Arc::new(member);
    let (a, b) = verify_quadratic_decomposition(engine, pair, &field, "cor3.1", tolerance)?;
    Ok((
        IdentityReport { id: "cor3.1-n".into(), ..a },
        IdentityReport { id: "cor3.1-d".into(), ..b },
    ))
}

struct SumRef<'a>(&'a dyn Field, &'a dyn Field);

impl Field for SumRef<'_> {
    fn value(&self, p: Point) -> f64 {
        self.0.value(p) + self.1.value(p)
    }
    fn gradient(&self, p: Point) -> Point {
        self.0.gradient(p) + self.1.gradient(p)
    }
}

// ---------------------------------------------------------------------------
// Poincare constants
// ---------------------------------------------------------------------------

/// Mean-zero Poincare constant of one obstacle: exact for disks
/// (`R / j'_{1,1}`), bounded by the containing disk otherwise.
fn obstacle_constant(curve: &Curve) -> (f64, bool) {
    let j1p = bessel::j1_deriv_first_zero();
    match curve {
        Curve::Circle { radius, .. } => (radius / j1p, true),
        _ => {
            let c = curve.centroid();
            let r = curve
                .dense_polyline(512)
                .iter()
                .map(|p| p.dist(c))
                .fold(0.0_f64, f64::max);
            (r / j1p, false)
        }
    }
}

/// Estimate the Poincare constants and evaluate the smallness conditions at
/// the scenario wavenumber. The mixed-boundary region constant (zero trace
/// on the outer boundary only) comes from inverse power iteration on a
/// staircase finite-difference Laplacian with Dirichlet outside the domain
/// and reflecting links into the obstacles, times a 1.25 safety factor.
pub fn poincare_constants(scenario: &Scenario, grid_n: usize) -> Result<SmallnessReport> {
    let c_region_raw = mixed_poincare_fd(scenario, grid_n)?;
    let c_region = 1.25 * c_region_raw;
    let mut c_obstacles = Vec::new();
    let mut c_neumann_max: f64 = 0.0;
    let mut c_dirichlet_max: f64 = 0.0;
    for (i, o) in scenario.obstacles.iter().enumerate() {
        let (c, exact) = obstacle_constant(&o.curve);
        match o.bc {
            Bc::Neumann => c_neumann_max = c_neumann_max.max(c),
            Bc::Dirichlet => c_dirichlet_max = c_dirichlet_max.max(c),
        }
        c_obstacles.push((i, c, exact));
    }
    let k = scenario.k;
    let cond_region = c_region * c_region * k * k;
    let cond_neumann = 8.0 * c_neumann_max * c_neumann_max * k * k;
    let cond_dirichlet = 8.0 * c_dirichlet_max * c_dirichlet_max * k * k;
    let mut k_max = 1.0 / c_region;
    if c_neumann_max > 0.0 {
        k_max = k_max.min(1.0 / (8.0_f64.sqrt() * c_neumann_max));
    }
    if c_dirichlet_max > 0.0 {
        k_max = k_max.min(1.0 / (8.0_f64.sqrt() * c_dirichlet_max));
    }
    let pass = cond_region <= 1.0 && cond_neumann < 1.0 && cond_dirichlet < 1.0;
    Ok(SmallnessReport {
        c_region,
        c_region_raw,
        c_region_estimated: true,
        c_obstacles,
        cond_region,
        cond_neumann,
        cond_dirichlet,
        k,
        k_max,
        pass,
    })
}

/// Smallest eigenvalue of the mixed Laplacian (Dirichlet on the outer
/// boundary, Neumann on the obstacle boundaries) on a staircase grid;
/// returns `1/sqrt(lambda_1)`.
fn mixed_poincare_fd(scenario: &Scenario, n: usize) -> Result<f64> {
    let dense = scenario.domain.dense_polyline(512);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &dense {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let pad = 2.0 * (xmax - xmin).max(ymax - ymin) / n as f64;
    xmin -= pad;
    ymin -= pad;
    xmax += pad;
    ymax += pad;
    let hx = (xmax - xmin) / n as f64;
    let hy = (ymax - ymin) / n as f64;
    let h = hx.max(hy);

    // coarse-grid sanity: the staircase must resolve the component gaps
    let min_gap = scenario.min_gap_rel * scenario.diameter();
    if h > min_gap / 3.0 {
        return Err(Error::Resolution(format!(
            "grid step {h:.4} too coarse for component gaps >= {min_gap:.4}"
        )));
    }

    // cell classification: 1 = region unknown, 0 = outside domain
    // (Dirichlet), 2 = inside an obstacle (Neumann link dropped)
    let mut kind = vec![0u8; n * n];
    let mut index = vec![usize::MAX; n * n];
    let mut unknowns = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let p = Point::new(
                xmin + hx * (ix as f64 + 0.5),
                ymin + hy * (iy as f64 + 0.5),
            );
            let inside_domain = matches!(crate::geometry::contains(&scenario.domain, p), Ok(true));
            if !inside_domain {
                continue;
            }
            let in_obstacle = scenario
                .obstacles
                .iter()
                .any(|o| matches!(crate::geometry::contains(&o.curve, p), Ok(true)));
            let cell = iy * n + ix;
            if in_obstacle {
                kind[cell] = 2;
            } else {
                kind[cell] = 1;
                index[cell] = unknowns.len();
                unknowns.push(cell);
            }
        }
    }
    if unknowns.len() < 64 {
        return Err(Error::Resolution("too few interior cells".into()));
    }

    // 5-point stencil in CSR-lite form
    let nu = unknowns.len();
    let mut diag = vec![0.0_f64; nu];
    let mut links: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(4); nu];
    let wx = 1.0 / (hx * hx);
    let wy = 1.0 / (hy * hy);
    for (row, &cell) in unknowns.iter().enumerate() {
        let (iy, ix) = (cell / n, cell % n);
        let mut neighbors = Vec::with_capacity(4);
        if ix > 0 {
            neighbors.push((cell - 1, wx));
        }
        if ix + 1 < n {
            neighbors.push((cell + 1, wx));
        }
        if iy > 0 {
            neighbors.push((cell - n, wy));
        }
        if iy + 1 < n {
            neighbors.push((cell + n, wy));
        }
        for (ncell, w) in neighbors {
            match kind[ncell] {
                1 => {
                    diag[row] += w;
                    links[row].push((index[ncell], w));
                }
                2 => {} // reflecting: no contribution
                _ => diag[row] += w, // Dirichlet zero outside
            }
        }
    }

    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..nu {
            let mut acc = diag[i] * v[i];
            for &(j, w) in &links[i] {
                acc -= w * v[j];
            }
            out[i] = acc;
        }
    };

    // conjugate gradient solve (the matrix is SPD)
    let cg = |b: &[f64], x: &mut Vec<f64>| {
        let mut r = b.to_vec();
        let mut tmp = vec![0.0; nu];
        apply(x, &mut tmp);
        for i in 0..nu {
            r[i] -= tmp[i];
        }
        let mut p = r.clone();
        let mut rs: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..4000 {
            if rs.sqrt() < 1e-11 {
                break;
            }
            apply(&p, &mut tmp);
            let denom: f64 = p.iter().zip(&tmp).map(|(a, b)| a * b).sum();
            let alpha = rs / denom;
            for i in 0..nu {
                x[i] += alpha * p[i];
                r[i] -= alpha * tmp[i];
            }
            let rs_new: f64 = r.iter().map(|v| v * v).sum();
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..nu {
                p[i] = r[i] + beta * p[i];
            }
        }
    };

    // inverse power iteration for the smallest eigenvalue
    let mut v = vec![1.0_f64; nu];
    let norm0 = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut lambda = 0.0;
    for _ in 0..60 {
        let mut x = v.clone();
        cg(&v, &mut x);
        let norm = (x.iter().map(|t| t * t).sum::<f64>()).sqrt();
        for t in x.iter_mut() {
            *t /= norm;
        }
        let mut ax = vec![0.0; nu];
        apply(&x, &mut ax);
        let new_lambda: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let done = (new_lambda - lambda).abs() < 1e-8 * new_lambda.abs().max(1e-30);
        lambda = new_lambda;
        v = x;
        if done {
            break;
        }
    }
    if lambda <= 0.0 {
        return Err(Error::Resolution("eigenvalue estimate failed".into()));
    }
    Ok(1.0 / lambda.sqrt())
}

// ---------------------------------------------------------------------------
