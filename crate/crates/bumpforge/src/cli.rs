//! Command-line pipelines over the solver library.
//!
//! Each subcommand loads a scenario TOML, runs one stage, writes its
//! artifacts into the output directory, and reports through the shared exit
//! code contract: 0 success, 1 numeric failure, 2 assumption failure,
//! 3 non-convergence, 64 configuration error, 65 data error. Artifacts are
//! deterministic: rerunning a command byte-identically reproduces them.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{FiringFamilyName, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fhn_ode::{self, BLOWUP_BOUND};
use crate::hammerstein::{Grid, GridFunction};
use crate::kernels::KernelFamily;
use crate::limit_bump::{solve_crossings, verify_limit_assumptions, LimitBump};
use crate::refinement::{sweep_beta, run_refinement, RefinementConfig};
use crate::verification::{classify_bump, residual_fixed_point, BumpClassification};

#[derive(Debug, Parser)]
#[command(
    name = "bumpforge",
    version,
    about = "Construct, refine, and verify localized bump solutions of a \
             nonlocal fixed-point equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the steep-limit crossing system and write the limit profile.
    SolveLimit(CommonArgs),
    /// Refine the steep-limit profile into a finite-steepness fixed point.
    Refine(CommonArgs),
    /// Classify a stored profile and certify its fixed-point residual.
    Verify(VerifyArgs),
    /// Refine across several steepness values and track the limit distance.
    SweepBeta(SweepArgs),
    /// Integrate the phase-plane shooting comparison and record deviation.
    Shoot(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario TOML file.
    #[arg(long, value_name = "path")]
    pub config: PathBuf,
    /// Override the scenario's output directory.
    #[arg(long, value_name = "dir")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Profile CSV (header `x,u,uprime`) to classify and certify.
    #[arg(long, value_name = "csv")]
    pub profile: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated steepness values, strictly increasing.
    #[arg(long, value_delimiter = ',', value_name = "list")]
    pub betas: Vec<f64>,
}

/// Dispatch a parsed command line; the returned code is the process exit
/// code for outcomes that are results rather than errors (verification
/// verdicts, sweeps where every row failed).
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::SolveLimit(args) => {
            let config = ScenarioConfig::load(&args.config)?;
            cmd_solve_limit(&config, &resolve_out_dir(&config, &args.out))
        }
        Command::Refine(args) => {
            let config = ScenarioConfig::load(&args.config)?;
            cmd_refine(&config, &resolve_out_dir(&config, &args.out))
        }
        Command::Verify(args) => {
            let config = ScenarioConfig::load(&args.common.config)?;
            cmd_verify(&config, &args.profile)
        }
        Command::SweepBeta(args) => {
            let config = ScenarioConfig::load(&args.common.config)?;
            cmd_sweep_beta(&config, &args.betas, &resolve_out_dir(&config, &args.common.out))
        }
        Command::Shoot(args) => {
            let config = ScenarioConfig::load(&args.config)?;
            cmd_shoot(&config, &resolve_out_dir(&config, &args.out))
        }
    }
}

fn resolve_out_dir(config: &ScenarioConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(|| config.output.dir.clone())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|err| Error::Data(format!("cannot serialize artifact: {err}")))
}

/// Refinement targets firing rates that vanish below threshold. The step
/// family has nothing to refine, and the logistic family violates the
/// subthreshold-support hypothesis, so it needs an explicit override.
fn require_supported_firing(config: &ScenarioConfig) -> Result<()> {
    match config.firing.family {
        FiringFamilyName::Step => Err(Error::NotApplicable(
            "refinement needs a finite-steepness firing family; the steep \
             limit is solved directly by solve-limit"
                .into(),
        )),
        FiringFamilyName::Logistic if !config.firing.allow_unsupported => {
            Err(Error::NotApplicable(
                "the logistic family never vanishes below threshold, which \
                 breaks the correction scheme's localization; set \
                 firing.allow_unsupported = true to run it anyway"
                    .into(),
            ))
        }
        _ => Ok(()),
    }
}

fn solve_scenario_bump(config: &ScenarioConfig) -> Result<LimitBump> {
    let kernel = config.kernel_model()?;
    solve_crossings(
        &kernel,
        config.firing.h,
        config.bump.n,
        &config.bump.initial_guess,
    )
}

fn scenario_grid(config: &ScenarioConfig, bump: &LimitBump) -> Result<Grid> {
    Grid::new(bump.outer_crossing() + config.grid.delta, config.grid.m)
}

#[derive(Serialize)]
struct LimitSummary<'a> {
    crossings: &'a [f64],
    margins: &'a [f64],
    jacobian_det: f64,
    residual_norm: f64,
    assumptions: &'a crate::limit_bump::LimitAssumptionReport,
}

fn cmd_solve_limit(config: &ScenarioConfig, out_dir: &Path) -> Result<i32> {
    let bump = solve_scenario_bump(config)?;
    let report = verify_limit_assumptions(&bump);
    report.require()?;

    let grid = scenario_grid(config, &bump)?;
    let profile = GridFunction::from_fn(grid, |x| (bump.eval(x), bump.eval_deriv(x)));

    let json = to_json(&LimitSummary {
        crossings: &bump.crossings,
        margins: &bump.margins,
        jacobian_det: bump.jacobian_det,
        residual_norm: bump.residual_norm,
        assumptions: &report,
    })?;
    ensure_dir(out_dir)?;
    write_text(&out_dir.join("limit_bump.json"), &format!("{json}\n"))?;
    profile.write_csv(&out_dir.join("u_infinity.csv"))?;
    println!("{json}");
    Ok(0)
}

#[derive(Serialize)]
struct RefineSummary<'a> {
    beta: f64,
    iterations: usize,
    final_error: f64,
    residual: f64,
    #[serde(rename = "crossings_of_U_beta")]
    crossings_of_u_beta: &'a [f64],
}

fn cmd_refine(config: &ScenarioConfig, out_dir: &Path) -> Result<i32> {
    require_supported_firing(config)?;
    let kernel = config.kernel_model()?;
    let firing = config.firing_model()?;
    let bump = solve_scenario_bump(config)?;
    let grid = scenario_grid(config, &bump)?;
    let refinement = RefinementConfig {
        beta: config.firing.beta,
        max_iters: config.refinement.max_iters,
        tol: config.refinement.tol,
        grid,
        exact_pn: config.refinement.exact_pn,
    };
    let (state, extension) = run_refinement(&bump, &kernel, &firing, &refinement)?;

    let d = grid.half_width();
    let classification = classify_bump(
        &|x| extension.eval_with_deriv(x),
        config.firing.h,
        d,
        d + 5.0,
    );

    ensure_dir(out_dir)?;
    state.u_n.write_csv(&out_dir.join("u_beta.csv"))?;
    let mut history = String::from("n,error\n");
    for (i, err) in state.error_history.iter().enumerate() {
        history.push_str(&format!("{},{:.16e}\n", i + 1, err));
    }
    write_text(&out_dir.join("error_history.csv"), &history)?;
    let json = to_json(&RefineSummary {
        beta: refinement.beta,
        iterations: state.n,
        final_error: state.last_error().unwrap_or(f64::INFINITY),
        residual: state.residual,
        crossings_of_u_beta: &classification.crossings_found,
    })?;
    write_text(&out_dir.join("summary.json"), &format!("{json}\n"))?;
    println!("{json}");
    Ok(0)
}

#[derive(Serialize)]
struct VerifyVerdict<'a> {
    #[serde(flatten)]
    classification: &'a BumpClassification,
    residual: f64,
    residual_bound: f64,
    passes: bool,
}

fn cmd_verify(config: &ScenarioConfig, profile_path: &Path) -> Result<i32> {
    let kernel = config.kernel_model()?;
    let firing = config.firing_model()?;
    let profile = GridFunction::read_csv(profile_path)?;
    let grid = profile.grid;
    let d = grid.half_width();
    // Beyond the stored window the profile is read as zero: the file carries
    // no data there, and a vanished tail is the only reading under which a
    // localized candidate makes sense.
    let sampler = |x: f64| {
        if x.abs() <= d {
            profile.eval_with_deriv(x)
        } else {
            (0.0, 0.0)
        }
    };
    let classification = classify_bump(&sampler, firing.h, 0.95 * d, d);
    let xs: Vec<f64> = grid.nodes().collect();
    let residual = residual_fixed_point(&sampler, &kernel, &firing, &xs)?;
    let passes = classification.is_regular && residual <= config.verify.residual_bound;
    let json = to_json(&VerifyVerdict {
        classification: &classification,
        residual,
        residual_bound: config.verify.residual_bound,
        passes,
    })?;
    println!("{json}");
    Ok(if passes { 0 } else { 1 })
}

fn cmd_sweep_beta(config: &ScenarioConfig, betas: &[f64], out_dir: &Path) -> Result<i32> {
    require_supported_firing(config)?;
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::Config {
            key: "betas".into(),
            message: format!("steepness values must be finite and positive, got {betas:?}"),
        });
    }
    if betas.windows(2).any(|pair| pair[1] <= pair[0]) {
        return Err(Error::Config {
            key: "betas".into(),
            message: format!("steepness values must be strictly increasing, got {betas:?}"),
        });
    }
    let kernel = config.kernel_model()?;
    let firing = config.firing_model()?;
    let bump = solve_scenario_bump(config)?;
    let grid = scenario_grid(config, &bump)?;
    let template = RefinementConfig {
        beta: 1.0,
        max_iters: config.refinement.max_iters,
        tol: config.refinement.tol,
        grid,
        exact_pn: config.refinement.exact_pn,
    };
    let rows = sweep_beta(&bump, &kernel, &firing, betas, &template)?;

    let mut csv = String::from("beta,c1_distance,iterations\n");
    let mut converged = 0usize;
    for row in &rows {
        match &row.outcome {
            Ok((distance, iterations)) => {
                converged += 1;
                csv.push_str(&format!("{},{:.16e},{}\n", row.beta, distance, iterations));
                println!(
                    "beta = {}: c1_distance {:.6e} after {} iterations",
                    row.beta, distance, iterations
                );
            }
            Err(err) => {
                csv.push_str(&format!("{},nan,nan\n", row.beta));
                eprintln!("warning: beta = {} failed: {err}", row.beta);
            }
        }
    }
    ensure_dir(out_dir)?;
    write_text(&out_dir.join("sweep.csv"), &csv)?;
    if !rows.is_empty() && converged == 0 {
        eprintln!("error: every sweep row failed");
        return Ok(3);
    }
    Ok(0)
}

fn cmd_shoot(config: &ScenarioConfig, out_dir: &Path) -> Result<i32> {
    let k = match config.kernel {
        KernelFamily::Exponential { k } => k,
        other => {
            return Err(Error::NotApplicable(format!(
                "phase-plane shooting is defined for the exponential kernel, got {other:?}"
            )))
        }
    };
    if config.bump.n != 1 {
        return Err(Error::NotApplicable(
            "the shooting comparison is against a single-bump profile".into(),
        ));
    }
    let firing = config.firing_model()?;
    let bump = solve_scenario_bump(config)?;
    let a = bump.crossings[0];
    let trajectory = fhn_ode::shoot_homoclinic(k, &firing, config.shoot.x_max, config.shoot.step)?;

    ensure_dir(out_dir)?;
    write_text(&out_dir.join("trajectory.csv"), &trajectory.to_csv_string())?;
    let deviation = trajectory.sup_deviation(|x| bump.eval(x - a));
    println!("sup deviation from the shifted steep-limit profile: {deviation:.16e}");
    match trajectory.blowup_at {
        Some(x) => println!("blowup: |u| exceeded {BLOWUP_BOUND:.0e} at x = {x:.6}"),
        None => println!("blowup: none within x_max = {}", config.shoot.x_max),
    }
    Ok(0)
}
