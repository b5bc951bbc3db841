//! Command-line workflows: synthesize DN maps, verify the identity suite,
//! probe a grid and classify it, and compare assembled DN entries against
//! the concentric-annulus oracle.

use clap::{Parser, Subcommand};
use ips_core::config::ScenarioFile;
use ips_core::forward::{annulus_oracle, assemble_dn, disk_dn_eigen, DtNMatrix};
use ips_core::geometry::{validate_scenario, Curve};
use ips_core::indicator::{score_field, GridSpec, NeedleStrategy, ProbeEngine};
use ips_core::suite::run_identity_suite_with;
use ips_core::{Error, Point};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ips",
    about = "Mixed-obstacle reconstruction from Dirichlet-to-Neumann data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario description file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Probe grid as `nx,ny`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,

    /// Needle strategy for grid sweeps.
    #[arg(long, global = true, value_parser = parse_strategy)]
    needle_strategy: Option<NeedleStrategy>,

    /// Needle-sequence order schedule, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    orders: Option<Vec<usize>>,

    /// Score the classified field against the scenario geometry.
    #[arg(long, global = true)]
    score: bool,

    /// Worker threads (falls back to the IPS_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for randomized sampling inside the verify workflow.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problems and write both DN matrices.
    Synthesize,
    /// Run the identity suite and write report.json plus a summary table.
    Verify,
    /// Sweep a probe grid using previously synthesized DN matrices.
    Probe,
    /// Compare assembled DN diagonals with the annulus oracle.
    Oracle,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<_> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected nx,ny".into());
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_strategy(s: &str) -> Result<NeedleStrategy, String> {
    match s {
        "radial" => Ok(NeedleStrategy::Radial),
        "fan" => Ok(NeedleStrategy::Fan),
        other => Err(format!("unknown strategy `{other}` (radial|fan)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("IPS_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidScenario(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> ips_core::Result<ExitCode> {
    let scenario_path = cli
        .scenario
        .clone()
        .ok_or_else(|| Error::Config("--scenario <file> is required".into()))?;
    let file = ScenarioFile::load(&scenario_path)?;
    let scenario = file.to_scenario()?;
    let disc = file.discretization_params();
    let mut needle_params = file.needle_params(scenario.family);
    if let Some(orders) = &cli.orders {
        needle_params.orders = orders.clone();
        needle_params.max_order = *orders.iter().max().unwrap_or(&needle_params.max_order);
    }
    let mut grid = file.grid_spec();
    if let Some((nx, ny)) = cli.grid {
        grid.nx = nx;
        grid.ny = ny;
    }
    let strategy = cli.needle_strategy.unwrap_or(NeedleStrategy::Radial);

    if cli.print_config {
        #[derive(Serialize)]
        struct Resolved<'a> {
            scenario: &'a ScenarioFile,
            discretization: ips_core::forward::DiscretizationParams,
            needle_orders: &'a [usize],
            tube_radius_rel: f64,
            grid: GridSpec,
            seed: u64,
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&Resolved {
                scenario: &file,
                discretization: disc,
                needle_orders: &needle_params.orders,
                tube_radius_rel: needle_params.tube_radius_rel,
                grid,
                seed: cli.seed,
            })?
        );
        return Ok(ExitCode::SUCCESS);
    }

    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Synthesize => synthesize(&scenario, &file, &cli.out),
        Command::Verify => verify(&scenario, &file, &needle_params, cli.seed, &cli.out),
        Command::Probe => probe(&scenario, &file, &needle_params, &grid, strategy, cli.score, &cli.out),
        Command::Oracle => oracle(&scenario, &file),
    }
}

fn synthesize(
    scenario: &ips_core::geometry::Scenario,
    file: &ScenarioFile,
    out: &Path,
) -> ips_core::Result<ExitCode> {
    let diag = validate_scenario(scenario)?;
    let disc = file.discretization_params();
    let pair = assemble_dn(scenario, &disc)?;
    std::fs::write(out.join("dnmap_D.json"), pair.lambda_d.to_json()?)?;
    std::fs::write(out.join("dnmap_0.json"), pair.lambda_0.to_json()?)?;
    std::fs::write(
        out.join("scenario_fingerprint.txt"),
        scenario.fingerprint(),
    )?;
    println!(
        "wrote dnmap_D.json / dnmap_0.json (trace order {}, max residual {:.2e})",
        pair.lambda_d.order, pair.lambda_d.residual_stats.max_residual
    );
    for (label, gap) in &diag.gaps {
        println!("gap {label}: {gap:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(
    scenario: &ips_core::geometry::Scenario,
    file: &ScenarioFile,
    needle_params: &ips_core::needles::NeedleSequenceParams,
    seed: u64,
    out: &Path,
) -> ips_core::Result<ExitCode> {
    let disc = file.discretization_params();
    // reuse synthesized DN matrices when present so the suite certifies the
    // data actually on disk
    let pair = {
        let d = out.join("dnmap_D.json");
        let z = out.join("dnmap_0.json");
        match (std::fs::read_to_string(&d), std::fs::read_to_string(&z)) {
            (Ok(ds), Ok(zs)) => {
                let lambda_d = DtNMatrix::from_json(&ds)?;
                let lambda_0 = DtNMatrix::from_json(&zs)?;
                if lambda_d.k == scenario.k && lambda_d.order == disc.trace_order {
                    println!("verify: using synthesized DN maps from {}", out.display());
                    Some(ips_core::forward::DtNPair { lambda_d, lambda_0 })
                } else {
                    None
                }
            }
            _ => None,
        }
    };
    let report = run_identity_suite_with(scenario, &disc, needle_params, seed, 5, pair)?;
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;

    // needle-sequence dump for the members used by the identity checks
    let fitter = ips_core::needles::NeedleFitter::new(
        &scenario.domain,
        scenario.k,
        ips_core::needles::NeedleSequenceParams {
            family: ips_core::geometry::Family::G0,
            ..needle_params.clone()
        },
    )?;
    let needles = if file.needles.is_empty() {
        let pts = ips_core::suite::sample_probe_points(
            scenario,
            1,
            0.05 * scenario.diameter(),
            0.05 * scenario.diameter(),
            seed,
        )?;
        vec![ips_core::needles::build_needle(
            &scenario.domain,
            pts[0],
            ips_core::needles::NeedleEntry::Nearest,
        )?]
    } else {
        file.explicit_needles(scenario)?
    };
    #[derive(Serialize)]
    struct NeedleDump {
        tip: [f64; 2],
        orders: Vec<usize>,
        coefficients: Vec<Vec<f64>>,
        residuals: Vec<f64>,
    }
    let mut dumps = Vec::new();
    for needle in &needles {
        let members = fitter.fit_sequence(needle, &needle_params.orders, None)?;
        dumps.push(NeedleDump {
            tip: [needle.tip().x, needle.tip().y],
            orders: members.iter().map(|m| m.order).collect(),
            coefficients: members
                .iter()
                .map(|m| m.coeffs.iter().cloned().collect())
                .collect(),
            residuals: members.iter().map(|m| m.diagnostics.residual_rms).collect(),
        });
    }
    std::fs::write(
        out.join("needle_dump.json"),
        serde_json::to_string_pretty(&dumps)?,
    )?;

    print!("{}", report.summary());
    if report.all_pass {
        println!("verify: all identities pass");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: FAILED ids: {}", report.failing_ids().join(", "));
        Ok(ExitCode::from(1))
    }
}

fn probe(
    scenario: &ips_core::geometry::Scenario,
    file: &ScenarioFile,
    needle_params: &ips_core::needles::NeedleSequenceParams,
    grid: &GridSpec,
    strategy: NeedleStrategy,
    score: bool,
    out: &Path,
) -> ips_core::Result<ExitCode> {
    // the probe path consumes synthesized DN data; obstacle geometry is used
    // only for post-hoc scoring
    let lambda_d = DtNMatrix::from_json(&std::fs::read_to_string(out.join("dnmap_D.json"))?)?;
    let lambda_0 = DtNMatrix::from_json(&std::fs::read_to_string(out.join("dnmap_0.json"))?)?;
    let disc = file.discretization_params();
    let engine = ProbeEngine::new(&scenario.domain, lambda_0, lambda_d, &disc, needle_params.clone())?;
    let t0 = std::time::Instant::now();
    let field = engine.classify_field(grid, strategy, None)?;
    std::fs::write(out.join("indicator_field.csv"), field.to_csv())?;

    #[derive(Serialize)]
    struct ProbeReport {
        threshold_t: f64,
        threshold_b: f64,
        points: usize,
        unresolved: usize,
        elapsed_seconds: f64,
        score: Option<ips_core::indicator::ScoreReport>,
    }
    let unresolved = field
        .points
        .iter()
        .filter(|p| p.label == ips_core::indicator::Label::Unresolved)
        .count();
    let report = ProbeReport {
        threshold_t: field.threshold_t,
        threshold_b: field.threshold_b,
        points: field.points.len(),
        unresolved,
        elapsed_seconds: t0.elapsed().as_secs_f64(),
        score: if score {
            Some(score_field(&field, scenario, 0.05, 0.2))
        } else {
            None
        },
    };
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    println!(
        "probed {} points, {} unresolved, T = {:.4}, B = {:.4}",
        report.points, report.unresolved, report.threshold_t, report.threshold_b
    );
    if let Some(s) = &report.score {
        println!(
            "score: neumann recall {:.3}, dirichlet recall {:.3}, background false alarms {}",
            s.neumann_recall, s.dirichlet_recall, s.background_false_alarms
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(
    scenario: &ips_core::geometry::Scenario,
    file: &ScenarioFile,
) -> ips_core::Result<ExitCode> {
    // concentric-disk scenarios only
    let (rho, bc) = match scenario.obstacles.as_slice() {
        [o] => match (&scenario.domain, &o.curve) {
            (
                Curve::Circle { center: cd, radius: rd },
                Curve::Circle { center: co, radius: ro },
            ) if (*cd - *co).norm() < 1e-12 && (*rd - 1.0).abs() < 1e-12 => (*ro, o.bc),
            _ => {
                return Err(Error::Unsupported(
                    "oracle needs a unit disk with one concentric circular obstacle".into(),
                ))
            }
        },
        _ => {
            return Err(Error::Unsupported(
                "oracle needs exactly one concentric circular obstacle".into(),
            ))
        }
    };
    let disc = file.discretization_params();
    let pair = assemble_dn(scenario, &disc)?;
    println!(
        "{:>4} {:>16} {:>16} {:>10}   {:>16} {:>16} {:>10}",
        "mode", "oracle_D", "assembled_D", "rel_err", "oracle_0", "assembled_0", "rel_err"
    );
    for n in 0..=disc.trace_order / 2 {
        let lam_d = annulus_oracle(rho, bc, scenario.k, n)?;
        let lam_0 = disk_dn_eigen(scenario.k, n)?;
        let gram = if n == 0 {
            std::f64::consts::TAU
        } else {
            std::f64::consts::PI
        };
        let idx = if n == 0 { 0 } else { 2 * n - 1 };
        let got_d = pair.lambda_d.get(idx, idx) / gram;
        let got_0 = pair.lambda_0.get(idx, idx) / gram;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
        println!(
            "{n:>4} {lam_d:>16.10} {got_d:>16.10} {:>10.2e}   {lam_0:>16.10} {got_0:>16.10} {:>10.2e}",
            rel(got_d, lam_d),
            rel(got_0, lam_0)
        );
    }
    Ok(ExitCode::SUCCESS)
}
