//! The full certification suite for one scenario: DN synthesis, every energy
//! identity, the decompositions, and the smallness report. Used by the
//! command-line `verify` workflow and by the acceptance tests.

use crate::basis::{CatalogSolution, Field};
use crate::forward::{assemble_dn, DiscretizationParams};
use crate::geometry::{validate_scenario, Family, Needle, Scenario};
use crate::identities::{
    poincare_constants, verify_cor31, verify_dn_symmetry, verify_thm12, IdentityReport,
    SmallnessReport,
};
use crate::indicator::{DirectEngine, ProbeEngine};
use crate::needles::{build_needle, NeedleEntry, NeedleSequenceParams};
use crate::{Point, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Everything the verify workflow produces.
#[derive(Serialize)]
pub struct SuiteReport {
    pub reports: Vec<IdentityReport>,
    pub smallness: SmallnessReport,
    pub all_pass: bool,
    pub scenario_fingerprint: String,
    pub elapsed_seconds: f64,
}

impl SuiteReport {
    pub fn failing_ids(&self) -> Vec<String> {
        self.reports
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.id.clone())
            .collect()
    }

    /// Human-readable summary table, one line per identity.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22} {:>14} {:>14} {:>10}  {}\n",
            "identity", "lhs", "rhs", "residual", "status"
        ));
        for r in &self.reports {
            out.push_str(&format!(
                "{:<22} {:>14.6e} {:>14.6e} {:>10.2e}  {}\n",
                r.id,
                r.lhs,
                r.rhs,
                r.residual,
                if r.pass { "pass" } else { "FAIL" }
            ));
        }
        let s = &self.smallness;
        out.push_str(&format!(
            "smallness: C(region) = {:.4} (estimated), k = {}, k_max = {:.4}, {}\n",
            s.c_region,
            s.k,
            s.k_max,
            if s.pass { "pass" } else { "FAIL" }
        ));
        out
    }
}

/// Tolerances of the identity suite (pinned by the acceptance criteria).
#[derive(Debug, Clone, Copy)]
pub struct SuiteTolerances {
    pub dn_symmetry: f64,
    pub thm11: f64,
    pub thm12: f64,
    pub cor31: f64,
    pub outer_decomp: f64,
    pub inner_decomp: f64,
    pub twisted: f64,
    pub gstar_degeneracy: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        SuiteTolerances {
            dn_symmetry: 1e-8,
            thm11: 1e-5,
            thm12: 1e-5,
            cor31: 1e-4,
            outer_decomp: 1e-7,
            inner_decomp: 1e-5,
            twisted: 1e-6,
            gstar_degeneracy: 1e-7,
        }
    }
}

/// Draw points inside the domain with margins from every boundary.
pub fn sample_probe_points(
    scenario: &Scenario,
    count: usize,
    margin_outer: f64,
    margin_obstacle: f64,
    seed: u64,
) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = scenario.domain.dense_polyline(256);
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &dense {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 100_000 {
        attempts += 1;
        let p = Point::new(
            rng.gen_range(xmin..xmax),
            rng.gen_range(ymin..ymax),
        );
        if !matches!(scenario.in_exterior(p), Ok(true)) {
            continue;
        }
        if scenario.domain.distance_to_point(p) < margin_outer {
            continue;
        }
        if scenario.distance_to_obstacles(p) < margin_obstacle {
            continue;
        }
        out.push(p);
    }
    if out.len() < count {
        return Err(crate::Error::Config(
            "could not sample enough probe points".into(),
        ));
    }
    Ok(out)
}

/// Run the full identity suite on a scenario: DN symmetry for both maps, the
/// auxiliary-solution expressions at sampled probe points (both families),
/// the decomposition formulae for the closed-form catalog and for needle
/// members, outer/inner/twisted decompositions, and the smallness report.
pub fn run_identity_suite(
    scenario: &Scenario,
    disc: &DiscretizationParams,
    needle_params: &NeedleSequenceParams,
    seed: u64,
    probe_points: usize,
) -> Result<SuiteReport> {
    run_identity_suite_with(scenario, disc, needle_params, seed, probe_points, None)
}

/// Like [`run_identity_suite`], optionally reusing previously synthesized DN
/// matrices (the verify workflow checks them instead of reassembling, so a
/// corrupted map shows up as identity failures).
pub fn run_identity_suite_with(
    scenario: &Scenario,
    disc: &DiscretizationParams,
    needle_params: &NeedleSequenceParams,
    seed: u64,
    probe_points: usize,
    pair: Option<crate::forward::DtNPair>,
) -> Result<SuiteReport> {
    let t0 = std::time::Instant::now();
    validate_scenario(scenario)?;
    let fp = scenario.fingerprint();
    let tol = SuiteTolerances::default();
    let mut reports = Vec::new();

    let pair = match pair {
        Some(p) => p,
        None => assemble_dn(scenario, disc)?,
    };
    reports.push(verify_dn_symmetry(&pair.lambda_d, tol.dn_symmetry));
    let mut r0 = verify_dn_symmetry(&pair.lambda_0, tol.dn_symmetry);
    r0.id = "dn-symmetry-free".into();
    reports.push(r0);

    // margins keep the singular data resolvable by the boundary quadrature
    let margin = 0.05 * scenario.diameter();
    let pts = sample_probe_points(scenario, probe_points, margin, margin, seed)?;

    // the auxiliary-solution energy expressions, for both families
    for family in [Family::G0, Family::Gstar] {
        let mut s = scenario.clone();
        s.family = family;
        let engine = DirectEngine::new(&s, disc)?;
        let suffix = match family {
            Family::G0 => "g0",
            Family::Gstar => "gstar",
        };
        let mut worst_n: Option<IdentityReport> = None;
        let mut worst_d: Option<IdentityReport> = None;
        for &x in &pts {
            let rep = engine.ips_decompositions(x)?;
            let rn = IdentityReport::new(
                &format!("thm1.1-neumann-{suffix}"),
                rep.direct,
                rep.neumann_focused,
                tol.thm11,
                &fp,
            );
            let rd = IdentityReport::new(
                &format!("thm1.1-dirichlet-{suffix}"),
                rep.direct,
                rep.dirichlet_focused,
                tol.thm11,
                &fp,
            );
            if worst_n.as_ref().map_or(true, |w| rn.residual > w.residual) {
                worst_n = Some(rn);
            }
            if worst_d.as_ref().map_or(true, |w| rd.residual > w.residual) {
                worst_d = Some(rd);
            }
        }
        reports.push(worst_n.expect("at least one probe point"));
        reports.push(worst_d.expect("at least one probe point"));

        // outer decomposition & (for Gstar) the degeneracy of the trace part
        let mut worst_outer: f64 = 0.0;
        for &x in &pts {
            let y = pts[(pts.iter().position(|&p| p.x == x.x).unwrap() + 1) % pts.len()];
            worst_outer = worst_outer.max(engine.outer_decomposition_defect(x, y)?.abs());
        }
        reports.push(IdentityReport::new(
            &format!("outer-decomp-{suffix}"),
            0.0,
            worst_outer,
            tol.outer_decomp,
            &fp,
        ));
        if family == Family::Gstar {
            // w1 driven by the (vanishing) Green-function trace stays tiny
            let field = engine.family_field(pts[0])?;
            let aux = engine.auxiliary_solutions(&field)?;
            let outer = engine.grids.outer();
            let sup = outer
                .nodes
                .iter()
                .map(|&p| aux.w1.value(p).abs())
                .fold(0.0_f64, f64::max);
            reports.push(IdentityReport::new(
                "gstar-degeneracy",
                0.0,
                sup,
                tol.gstar_degeneracy,
                &fp,
            ));
        }

        // twisted symmetry at one sampled pair
        let defect = engine.twisted_symmetry_defect(pts[0], pts[1 % pts.len()])?;
        reports.push(IdentityReport::new(
            &format!("twisted-symmetry-{suffix}"),
            0.0,
            defect.abs(),
            tol.twisted,
            &fp,
        ));
    }

    // inner decomposition: W_x(x) = I(x) + I1(x), with I from the direct
    // formula and I1 from the data side
    {
        let engine = DirectEngine::new(scenario, disc)?;
        let probe = ProbeEngine::new(
            &scenario.domain,
            pair.lambda_0.clone(),
            pair.lambda_d.clone(),
            disc,
            NeedleSequenceParams { family: scenario.family, ..needle_params.clone() },
        )?;
        let mut worst: Option<IdentityReport> = None;
        for &x in &pts {
            let w = engine.ips_value(x)?;
            let i_direct = engine.indicator_direct(x)?;
            let i1 = probe.i1(x)?;
            let r = IdentityReport::new("inner-decomp", w, i_direct + i1, tol.inner_decomp, &fp);
            if worst.as_ref().map_or(true, |wr| r.residual > wr.residual) {
                worst = Some(r);
            }
        }
        reports.push(worst.expect("at least one probe point"));
    }

    // the decomposition formulae: closed-form catalog then needle members
    {
        let engine = DirectEngine::new(scenario, disc)?;
        for (i, v) in CatalogSolution::default_suite(scenario.k).iter().enumerate() {
            let (mut rn, mut rd) = verify_thm12(&engine, &pair, v, tol.thm12)?;
            rn.id = format!("thm1.2-neumann-v{i}");
            rd.id = format!("thm1.2-dirichlet-v{i}");
            reports.push(rn);
            reports.push(rd);
        }

        let fitter = crate::needles::NeedleFitter::new(
            &scenario.domain,
            scenario.k,
            NeedleSequenceParams { family: Family::G0, ..needle_params.clone() },
        )?;
        let needle = default_needle(scenario, &pts)?;
        for order in [10usize, 20, 30] {
            let member = fitter.fit(&needle, order, None)?;
            let (mut rn, mut rd) = verify_cor31(&engine, &pair, member, tol.cor31)?;
            rn.id = format!("cor3.1-n-{order}");
            rd.id = format!("cor3.1-d-{order}");
            reports.push(rn);
            reports.push(rd);
        }
    }

    let smallness = poincare_constants(scenario, 128)?;
    let all_pass = reports.iter().all(|r| r.pass) && smallness.pass;
    Ok(SuiteReport {
        reports,
        smallness,
        all_pass,
        scenario_fingerprint: fp,
        elapsed_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// A needle for the member identities: tip at the first sampled point,
/// entering from the nearest boundary point.
fn default_needle(scenario: &Scenario, pts: &[Point]) -> Result<Needle> {
    build_needle(&scenario.domain, pts[0], NeedleEntry::Nearest)
}
