//! Bandit-lab CLI: reproducible experiments over two-sided-product bandits.
//!
//! Subcommands: `run` executes a config and writes traces/summary CSVs;
//! `sweep` crosses a parameter grid over one policy with paired environment
//! seeds; `tune` estimates matrix statistics and prints the selected
//! filtering resolution, submatrix size, and switching horizon; `oracle`
//! replays brute-force reference checks; `fitgh` fits the near-optimal and
//! subsampling-cost models for a generator family.

use anyhow::{bail, Context, Result};
use blab_core::experiment::{
    grid_cells, run, sweep, write_summary_csv, write_traces_csv, EnvSpec, ExperimentConfig,
    RunOutput,
};
use blab_core::matrix::generate_low_rank;
use blab_core::tuning::{
    default_size_grid, estimate_t_ss, fit_g_and_psi, geometric_grid, h_lower_bound, phi1, phi2,
    sample_g_and_psi, select_h, select_submatrix, CostModel, GEval, PsiEval,
};
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "blab", about = "simulation lab for two-sided-product bandits", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write traces.csv and summary.csv.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross a parameter grid over one policy, sharing environment seeds.
    Sweep {
        config: PathBuf,
        /// Grid file with a `[grid]` section: `policy = name` plus one
        /// comma-separated value list per parameter.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate matrix statistics and select (h, submatrix size, T_ss).
    Tune {
        config: PathBuf,
        /// Scale constant on the exploration bound curve.
        #[arg(long, default_value_t = 1.0)]
        omega1: f64,
        /// Scale constant on the targeted-phase bound curve.
        #[arg(long, default_value_t = 1.0)]
        omega2: f64,
        /// First constant in the h lower bound.
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        /// Second constant in the h lower bound.
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        /// Also write a CSV of the phi1/phi2 curves to this path.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Replay brute-force reference checks (g, psi, svt, prox, lambda_max,
    /// closed_forms, or all).
    Oracle {
        #[arg(default_value = "all")]
        name: String,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// Fit the near-optimal function and subsampling cost for the config's
    /// generator family.
    Fitgh {
        config: PathBuf,
        /// Also write the Monte-Carlo (h, g) and (eta, psi) samples here.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("could not read config {}", path.display()))?;
    ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn print_summary(output: &RunOutput) {
    println!("{:<40} {:>14} {:>10} {:>10} {:>6}", "policy", "mean_regret", "se", "ci95", "reps");
    for p in &output.summary.policies {
        println!(
            "{:<40} {:>14.2} {:>10.2} {:>10.2} {:>6}",
            p.label, p.mean_final_regret, p.std_error, p.ci95, p.replications
        );
    }
}

fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut traces = std::fs::File::create(dir.join("traces.csv"))?;
    write_traces_csv(&output.traces, &mut traces)?;
    let mut summary = std::fs::File::create(dir.join("summary.csv"))?;
    write_summary_csv(&output.summary, &mut summary)?;
    println!("wrote {} and {}", dir.join("traces.csv").display(), dir.join("summary.csv").display());
    Ok(())
}

fn cmd_run(config_path: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut config = load_config(config_path)?;
    if let Some(dir) = output {
        config.output_dir = Some(dir);
    }
    // writing happens here so the CLI reports the paths
    let dir = config.output_dir.take();
    let out = run(&config)?;
    print_summary(&out);
    if let Some(dir) = dir {
        write_outputs(&out, &dir)?;
    }
    Ok(())
}

type GridParams = Vec<(String, Vec<String>)>;

fn parse_grid_file(path: &Path) -> Result<(String, GridParams)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("could not read grid {}", path.display()))?;
    let mut in_grid = false;
    let mut policy: Option<String> = None;
    let mut params: Vec<(String, Vec<String>)> = Vec::new();
    for (i, line_text) in text.lines().enumerate() {
        let line = line_text.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            in_grid = name.trim() == "grid";
            if !in_grid {
                bail!("grid line {}: unknown section [{}]", i + 1, name.trim());
            }
            continue;
        }
        if !in_grid {
            bail!("grid line {}: content before [grid] section", i + 1);
        }
        let (key, value) =
            line.split_once('=').with_context(|| format!("grid line {}: expected key = value", i + 1))?;
        let key = key.trim();
        if key == "policy" {
            policy = Some(value.trim().to_string());
        } else {
            let values: Vec<String> =
                value.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                bail!("grid line {}: no values for `{key}`", i + 1);
            }
            params.push((key.to_string(), values));
        }
    }
    let policy = policy.context("grid file must set `policy = <name>` in [grid]")?;
    Ok((policy, params))
}

fn cmd_sweep(config_path: &Path, grid_path: &Path, output: Option<PathBuf>) -> Result<()> {
    let mut config = load_config(config_path)?;
    if let Some(dir) = output {
        config.output_dir = Some(dir);
    }
    let dir = config.output_dir.take();
    let (policy, params) = parse_grid_file(grid_path)?;
    let cells = grid_cells(&policy, &params)?;
    println!("sweeping {} cells of `{policy}`", cells.len());
    let out = sweep(&config, cells)?;
    print_summary(&out);
    if let Some(dir) = dir {
        write_outputs(&out, &dir)?;
    }
    Ok(())
}

/// Pilot statistics of the config's generator family: mean b*, mean mu*,
/// reward span, and fitted g/psi coefficients.
struct PilotFit {
    b_star: f64,
    mu_star: f64,
    fit: blab_core::tuning::FitCoefficients,
    g_samples: Vec<(f64, f64)>,
    psi_samples: Vec<(f64, f64)>,
    dims: (usize, usize),
    rank: usize,
}

fn pilot_fit(config: &ExperimentConfig) -> Result<PilotFit> {
    let (d_r, d_c, rank, generate): (usize, usize, usize, Box<dyn Fn(u64) -> blab_core::RewardMatrix>) =
        match &config.env {
            EnvSpec::LowRank { d_r, d_c, rank, factor_dist } => {
                let (d_r, d_c, rank, dist) = (*d_r, *d_c, *rank, *factor_dist);
                (d_r, d_c, rank, Box::new(move |seed| generate_low_rank(d_r, d_c, rank, dist, seed).expect("valid dims")))
            }
            EnvSpec::Contextual { d_r, d_c, rank, p } => {
                let (d_r, d_c, rank, p) = (*d_r, *d_c, *rank, *p);
                (d_r, d_c, rank, Box::new(move |seed| {
                    blab_core::env::generate_contextual(d_r, d_c, rank, p, seed).truth
                }))
            }
            EnvSpec::Csv { .. } => bail!("tune and fitgh need a generator environment, not a csv matrix"),
        };
    let pilots = 20;
    let mut b_star = 0.0;
    let mut mu_star = 0.0;
    let mut span = 0.0;
    for i in 0..pilots {
        let b = generate(config.master_seed.wrapping_add(1000 + i));
        b_star += b.max_row_l2_norm();
        mu_star += b.row_incoherence(rank).unwrap_or(1.0);
        span += b.max_entry() - b.min_entry();
    }
    let b_star = b_star / pilots as f64;
    let mu_star = mu_star / pilots as f64;
    let span = span / pilots as f64;

    let h_grid: Vec<f64> = (1..=8).map(|i| span * 0.08 * i as f64).collect();
    let eta_grid: Vec<f64> = (2..=9).map(|i| i as f64 / 10.0).collect();
    let (g_samples, psi_samples) =
        sample_g_and_psi(&generate, &h_grid, &eta_grid, 60, 30, config.master_seed);
    let fit = fit_g_and_psi(&g_samples, &psi_samples)?;
    Ok(PilotFit { b_star, mu_star, fit, g_samples, psi_samples, dims: (d_r, d_c), rank })
}

fn cmd_tune(
    config_path: &Path,
    omega1: f64,
    omega2: f64,
    c1: f64,
    c2: f64,
    curves: Option<PathBuf>,
) -> Result<()> {
    let config = load_config(config_path)?;
    let pilot = pilot_fit(&config)?;
    let model = CostModel {
        omega1,
        omega2,
        b_star: pilot.b_star,
        mu_star: pilot.mu_star,
        rank: pilot.rank,
        dims: pilot.dims,
        lowh_constants: (c1, c2),
    };
    let g = GEval::fitted(pilot.fit.a1, pilot.fit.b1);
    let psi = PsiEval::Fitted { a2: pilot.fit.a2, b2: pilot.fit.b2 };
    let (d_r, d_c) = pilot.dims;

    let selection = select_h(&model, config.horizon, &g);
    let grid = default_size_grid(d_r, d_c);
    let choice = select_submatrix(&model, d_r, d_c, &grid, &psi, config.horizon, &g)?;
    let t_grid = geometric_grid(10, (config.horizon * 1000).max(1_000_000), 1.2);
    let t_ss = estimate_t_ss(&model, d_r, d_c, &grid, &psi, &g, &t_grid)?;

    println!("b_star={}", pilot.b_star);
    println!("mu_star={}", pilot.mu_star);
    println!("g_fit_a1={}", pilot.fit.a1);
    println!("g_fit_b1={}", pilot.fit.b1);
    println!("g_fit_r2={}", pilot.fit.r_squared_g);
    println!("psi_fit_a2={}", pilot.fit.a2);
    println!("psi_fit_b2={}", pilot.fit.b2);
    println!("psi_fit_r2={}", pilot.fit.r_squared_psi);
    println!("lowh={}", h_lower_bound(config.horizon, &model));
    println!("h={}", selection.h);
    println!("case={}", selection.case);
    println!("forced_disabled={}", selection.forced_disabled);
    println!("m_r={}", choice.m_r);
    println!("m_c={}", choice.m_c);
    println!("h_sub={}", choice.h);
    println!("bound={}", choice.bound);
    match t_ss {
        Some(t) => println!("t_ss={t}"),
        None => println!("t_ss=inf"),
    }

    if let Some(path) = curves {
        let mut file = std::fs::File::create(&path)?;
        writeln!(file, "h,phi1,phi2")?;
        let lo = h_lower_bound(config.horizon, &model);
        let hi = 2.0 * model.b_star;
        for i in 0..=200 {
            let h = lo + (hi - lo) * i as f64 / 200.0;
            writeln!(
                file,
                "{},{},{}",
                h,
                phi1(h, config.horizon, &model),
                phi2(h, config.horizon, &model, &g)
            )?;
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_oracle(name: &str, seed: u64) -> Result<()> {
    use blab_core::oracles as o;
    let outcomes = match name {
        "all" => o::run_all(seed),
        "g" => vec![o::check_g_enumeration(20, seed)],
        "psi" => vec![o::check_psi_enumeration(seed)],
        "svt" => vec![o::check_svt_diag()],
        "prox" => vec![o::check_prox_optimality(200, seed)],
        "lambda_max" => vec![o::check_lambda_max(seed)],
        "closed_forms" => vec![
            o::check_uniform_g_closed_form(10_000, 0.1, seed),
            o::check_exponential_psi_closed_form(200, 50, seed.wrapping_add(1)),
        ],
        other => bail!("unknown oracle `{other}` (try g, psi, svt, prox, lambda_max, closed_forms, all)"),
    };
    let mut all_passed = true;
    for outcome in &outcomes {
        println!("{outcome}");
        all_passed &= outcome.passed;
    }
    if !all_passed {
        bail!("{} oracle check(s) failed", outcomes.iter().filter(|o| !o.passed).count());
    }
    Ok(())
}

fn cmd_fitgh(config_path: &Path, samples: Option<PathBuf>) -> Result<()> {
    let config = load_config(config_path)?;
    let pilot = pilot_fit(&config)?;
    println!("g_fit_a1={}", pilot.fit.a1);
    println!("g_fit_b1={}", pilot.fit.b1);
    println!("g_fit_r2={}", pilot.fit.r_squared_g);
    println!("psi_fit_a2={}", pilot.fit.a2);
    println!("psi_fit_b2={}", pilot.fit.b2);
    println!("psi_fit_r2={}", pilot.fit.r_squared_psi);
    if let Some(path) = samples {
        let mut file = std::fs::File::create(&path)?;
        writeln!(file, "kind,x,value")?;
        for (h, g) in &pilot.g_samples {
            writeln!(file, "g,{h},{g}")?;
        }
        for (eta, psi) in &pilot.psi_samples {
            writeln!(file, "psi,{eta},{psi}")?;
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => cmd_run(&config, output),
        Command::Sweep { config, grid, output } => cmd_sweep(&config, &grid, output),
        Command::Tune { config, omega1, omega2, c1, c2, curves } => {
            cmd_tune(&config, omega1, omega2, c1, c2, curves)
        }
        Command::Oracle { name, seed } => cmd_oracle(&name, seed),
        Command::Fitgh { config, samples } => cmd_fitgh(&config, samples),
    }
}
