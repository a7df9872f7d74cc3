//! Reproducible experiment orchestration: config parsing, seeded
//! replicate-parallel runs, parameter sweeps, CSV emission, and regret-part
//! decomposition.
//!
//! Replicates are the unit of parallelism; a replicate never splits across
//! threads, every random stream is derived from (master seed, replicate,
//! policy, role), and aggregation walks replicates in id order, so outputs
//! are byte-identical at any parallelism degree.

use crate::env::{generate_contextual, Environment, RegretTrace, RoundRecord};
use crate::matrix::{generate_low_rank, FactorDist, MatrixError, RewardMatrix};
use crate::policies::{BuildContext, PolicySpec, SpecParseError};
use crate::rng::derive_seed;
use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

/// Role tags for experiment stream derivation.
const ROLE_ENV_GEN: u64 = 0x45_4e_56;
const ROLE_NOISE: u64 = 0x4e_4f_49;
const ROLE_POLICY: u64 = 0x50_4f_4c;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Spec(#[from] SpecParseError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Environment description: a generator family or a fixed CSV matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    LowRank { d_r: usize, d_c: usize, rank: usize, factor_dist: FactorDist },
    Contextual { d_r: usize, d_c: usize, rank: usize, p: usize },
    Csv { path: PathBuf },
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub noise_sd: f64,
    pub horizon: u64,
    pub replications: usize,
    pub master_seed: u64,
    pub policies: Vec<PolicySpec>,
    pub output_dir: Option<PathBuf>,
    /// 0 means the library picks; the BLAB_THREADS env var caps it either way.
    pub threads: usize,
}

impl ExperimentConfig {
    /// Parses the flat key=value config format with `[experiment]`,
    /// `[environment]` and `[policies]` sections.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        #[derive(Default)]
        struct Raw {
            horizon: Option<u64>,
            replications: Option<usize>,
            master_seed: Option<u64>,
            threads: Option<usize>,
            output: Option<PathBuf>,
            generator: Option<String>,
            d_r: Option<usize>,
            d_c: Option<usize>,
            rank: Option<usize>,
            p: Option<usize>,
            factor_dist: Option<String>,
            noise_sd: Option<f64>,
            csv_path: Option<PathBuf>,
            policies: Vec<PolicySpec>,
        }
        let bad = |line: usize, message: String| RunError::Config { line, message };
        let mut raw = Raw::default();
        let mut section = String::new();
        for (i, line_text) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line_text.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if !["experiment", "environment", "policies"].contains(&section.as_str()) {
                    return Err(bad(line_no, format!("unknown section [{section}]")));
                }
                continue;
            }
            if section == "policies" {
                let spec = PolicySpec::parse(line)
                    .map_err(|e| bad(line_no, format!("bad policy spec: {e}")))?;
                raw.policies.push(spec);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(line_no, format!("expected key = value, got `{line}`")))?;
            let parse_num = |v: &str, what: &str| -> Result<u64, RunError> {
                v.parse()
                    .map_err(|_| bad(line_no, format!("{what} `{v}` is not a nonnegative integer")))
            };
            let parse_f = |v: &str, what: &str| -> Result<f64, RunError> {
                v.parse().map_err(|_| bad(line_no, format!("{what} `{v}` is not a number")))
            };
            match (section.as_str(), key) {
                ("experiment", "horizon") => raw.horizon = Some(parse_num(value, "horizon")?),
                ("experiment", "replications") => {
                    raw.replications = Some(parse_num(value, "replications")? as usize)
                }
                ("experiment", "master_seed") => {
                    raw.master_seed = Some(parse_num(value, "master_seed")?)
                }
                ("experiment", "threads") => raw.threads = Some(parse_num(value, "threads")? as usize),
                ("experiment", "output") => raw.output = Some(PathBuf::from(value)),
                ("environment", "generator") => raw.generator = Some(value.to_string()),
                ("environment", "d_r") => raw.d_r = Some(parse_num(value, "d_r")? as usize),
                ("environment", "d_c") => raw.d_c = Some(parse_num(value, "d_c")? as usize),
                ("environment", "rank") => raw.rank = Some(parse_num(value, "rank")? as usize),
                ("environment", "p") => raw.p = Some(parse_num(value, "p")? as usize),
                ("environment", "factor_dist") => raw.factor_dist = Some(value.to_string()),
                ("environment", "noise_sd") => raw.noise_sd = Some(parse_f(value, "noise_sd")?),
                ("environment", "csv_path") => raw.csv_path = Some(PathBuf::from(value)),
                _ => {
                    return Err(bad(line_no, format!("unknown key `{key}` in section [{section}]")))
                }
            }
        }

        let horizon = raw.horizon.ok_or_else(|| bad(0, "missing experiment.horizon".into()))?;
        if horizon < 1 {
            return Err(bad(0, "horizon must be at least 1".into()));
        }
        let replications = raw.replications.unwrap_or(1);
        if replications < 1 {
            return Err(bad(0, "replications must be at least 1".into()));
        }
        let generator = raw.generator.unwrap_or_else(|| "low_rank".into());
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| bad(0, format!("missing environment.{what} for generator `{generator}`")))
        };
        let env = match generator.as_str() {
            "low_rank" => {
                let factor_dist = match raw.factor_dist.as_deref() {
                    None | Some("uniform01") => FactorDist::Uniform01,
                    Some("std_normal") => FactorDist::StdNormal,
                    Some(other) => return Err(bad(0, format!("unknown factor_dist `{other}`"))),
                };
                EnvSpec::LowRank {
                    d_r: need(raw.d_r, "d_r")?,
                    d_c: need(raw.d_c, "d_c")?,
                    rank: need(raw.rank, "rank")?,
                    factor_dist,
                }
            }
            "contextual" => EnvSpec::Contextual {
                d_r: need(raw.d_r, "d_r")?,
                d_c: need(raw.d_c, "d_c")?,
                rank: need(raw.rank, "rank")?,
                p: need(raw.p, "p")?,
            },
            "csv" => EnvSpec::Csv {
                path: raw.csv_path.ok_or_else(|| bad(0, "missing environment.csv_path".into()))?,
            },
            other => return Err(bad(0, format!("unknown generator `{other}`"))),
        };
        if raw.policies.is_empty() {
            return Err(bad(0, "no policies declared in [policies]".into()));
        }
        Ok(ExperimentConfig {
            env,
            noise_sd: raw.noise_sd.unwrap_or(0.1),
            horizon,
            replications,
            master_seed: raw.master_seed.unwrap_or(0),
            policies: raw.policies,
            output_dir: raw.output,
            threads: raw.threads.unwrap_or(0),
        })
    }

    /// Environment rank hint passed to policies.
    fn rank_hint(&self) -> usize {
        match &self.env {
            EnvSpec::LowRank { rank, .. } | EnvSpec::Contextual { rank, .. } => *rank,
            EnvSpec::Csv { .. } => 3,
        }
    }
}

/// Per-policy aggregate over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub label: String,
    pub mean_final_regret: f64,
    pub std_error: f64,
    /// 1.96 * std_error (normal approximation).
    pub ci95: f64,
    pub replications: usize,
    /// Mean regret accrued on forced rounds.
    pub mean_forced_part: f64,
    /// Mean regret accrued on unforced rounds.
    pub mean_unforced_part: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policies: Vec<PolicySummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Ordered by (replicate, policy index).
    pub traces: Vec<RegretTrace>,
    pub summary: RunSummary,
}

impl RunOutput {
    /// Traces of one policy across replicates, in replicate order.
    pub fn traces_for(&self, label: &str) -> Vec<&RegretTrace> {
        self.traces.iter().filter(|t| t.policy == label).collect()
    }

    pub fn summary_for(&self, label: &str) -> Option<&PolicySummary> {
        self.summary.policies.iter().find(|p| p.label == label)
    }
}

/// One replicate's instance: the truth plus the optional contextual view.
struct Instance {
    truth: RewardMatrix,
    contextual: Option<crate::env::ContextualInstance>,
}

fn build_instance(
    config: &ExperimentConfig,
    fixed: Option<&RewardMatrix>,
    replicate: usize,
) -> Instance {
    let gen_seed = derive_seed(config.master_seed, &[replicate as u64, 0, ROLE_ENV_GEN]);
    match &config.env {
        EnvSpec::LowRank { d_r, d_c, rank, factor_dist } => Instance {
            truth: generate_low_rank(*d_r, *d_c, *rank, *factor_dist, gen_seed)
                .expect("generator dimensions validated at parse time"),
            contextual: None,
        },
        EnvSpec::Contextual { d_r, d_c, rank, p } => {
            let inst = generate_contextual(*d_r, *d_c, *rank, *p, gen_seed);
            Instance { truth: inst.truth.clone(), contextual: Some(inst) }
        }
        EnvSpec::Csv { .. } => Instance {
            truth: fixed.expect("csv matrix loaded before running").clone(),
            contextual: None,
        },
    }
}

fn run_replicate(
    config: &ExperimentConfig,
    fixed: Option<&RewardMatrix>,
    replicate: usize,
) -> Vec<RegretTrace> {
    let instance = build_instance(config, fixed, replicate);
    let truth = &instance.truth;
    let best_value = truth.max_entry();
    let best_arm = crate::env::oracle_gap_and_best(truth).0[0];
    let noise_seed = derive_seed(config.master_seed, &[replicate as u64, 0, ROLE_NOISE]);

    let mut traces = Vec::with_capacity(config.policies.len());
    for (p_idx, spec) in config.policies.iter().enumerate() {
        let ctx = BuildContext {
            d_r: truth.rows(),
            d_c: truth.cols(),
            horizon: config.horizon,
            rank_hint: config.rank_hint(),
            noise_sd: config.noise_sd,
            best_arm,
            contextual: instance.contextual.as_ref(),
        };
        let policy_seed =
            derive_seed(config.master_seed, &[replicate as u64, p_idx as u64, ROLE_POLICY]);
        let mut policy =
            spec.build(&ctx, policy_seed).expect("policy specs validated before running");
        // every policy in a replicate sees the same noise stream, so equal
        // pull sequences observe equal rewards (paired comparisons)
        let mut env = Environment::new(truth.clone(), config.noise_sd, noise_seed);

        let mut rounds = Vec::with_capacity(config.horizon as usize);
        let mut cum = 0.0;
        for t in 1..=config.horizon {
            let sel = policy.select(t);
            let reward = env.pull(sel.arm, t).expect("policies produce in-range arms");
            policy.update(t, sel.arm, reward, sel.forced);
            let inst_regret = best_value - truth.get(sel.arm);
            cum += inst_regret;
            rounds.push(RoundRecord {
                t,
                arm: sel.arm,
                reward,
                inst_regret,
                cum_regret: cum,
                forced: sel.forced,
            });
        }
        traces.push(RegretTrace { replicate, policy: spec.label(), rounds });
    }
    traces
}

fn effective_threads(config: &ExperimentConfig) -> usize {
    let mut threads = config.threads;
    if let Ok(cap) = std::env::var("BLAB_THREADS") {
        if let Ok(cap) = cap.trim().parse::<usize>() {
            if cap > 0 {
                threads = if threads == 0 { cap } else { threads.min(cap) };
            }
        }
    }
    threads
}

/// Runs every replicate sequentially on the calling thread.
pub fn run_replicates_sequential(
    config: &ExperimentConfig,
    fixed: Option<&RewardMatrix>,
) -> Vec<Vec<RegretTrace>> {
    (0..config.replications).map(|r| run_replicate(config, fixed, r)).collect()
}

#[cfg(feature = "parallel")]
fn run_replicates(config: &ExperimentConfig, fixed: Option<&RewardMatrix>) -> Vec<Vec<RegretTrace>> {
    use rayon::prelude::*;
    let threads = effective_threads(config);
    if threads == 1 {
        return run_replicates_sequential(config, fixed);
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|r| run_replicate(config, fixed, r))
                .collect()
        }),
        Err(_) => run_replicates_sequential(config, fixed),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_replicates(config: &ExperimentConfig, fixed: Option<&RewardMatrix>) -> Vec<Vec<RegretTrace>> {
    let _ = effective_threads(config);
    run_replicates_sequential(config, fixed)
}

/// Runs the experiment: every (replicate, policy) pair for `horizon` rounds.
/// Deterministic given the config, at any parallelism degree.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let fixed = match &config.env {
        EnvSpec::Csv { path } => {
            let file = std::fs::File::open(path)?;
            Some(RewardMatrix::load_csv(std::io::BufReader::new(file))?)
        }
        _ => None,
    };
    // validate policy specs up front so replicate workers cannot fail
    {
        let probe = build_instance(config, fixed.as_ref(), 0);
        let ctx = BuildContext {
            d_r: probe.truth.rows(),
            d_c: probe.truth.cols(),
            horizon: config.horizon,
            rank_hint: config.rank_hint(),
            noise_sd: config.noise_sd,
            best_arm: crate::env::oracle_gap_and_best(&probe.truth).0[0],
            contextual: probe.contextual.as_ref(),
        };
        for spec in &config.policies {
            spec.build(&ctx, 0)?;
        }
    }

    let per_replicate = run_replicates(config, fixed.as_ref());
    let mut traces = Vec::with_capacity(config.replications * config.policies.len());
    for replicate in per_replicate {
        traces.extend(replicate);
    }
    let summary = summarize(config, &traces);
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
        let mut traces_file = std::fs::File::create(dir.join("traces.csv"))?;
        write_traces_csv(&traces, &mut traces_file)?;
        let mut summary_file = std::fs::File::create(dir.join("summary.csv"))?;
        write_summary_csv(&summary, &mut summary_file)?;
    }
    Ok(RunOutput { traces, summary })
}

/// Runs the base experiment with the sweep cells as the policy list: all
/// cells play inside each replicate, so paired comparisons see identical
/// instances and noise draws.
pub fn sweep(base: &ExperimentConfig, cells: Vec<PolicySpec>) -> Result<RunOutput, RunError> {
    let config = ExperimentConfig { policies: cells, ..base.clone() };
    run(&config)
}

/// Cartesian product of parameter values appended to a base policy name,
/// e.g. name `lrb`, params `[("f", ["45", "70"]), ("h", ["0.9", "1"])]`.
pub fn grid_cells(
    name: &str,
    params: &[(String, Vec<String>)],
) -> Result<Vec<PolicySpec>, SpecParseError> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in params {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for value in values {
                let mut combo = combo.clone();
                combo.push((key.clone(), value.clone()));
                next.push(combo);
            }
        }
        combos = next;
    }
    combos
        .into_iter()
        .map(|combo| {
            let args: Vec<String> = combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let text = if args.is_empty() {
                name.to_string()
            } else {
                format!("{name}({})", args.join(","))
            };
            PolicySpec::parse(&text)
        })
        .collect()
}

fn summarize(config: &ExperimentConfig, traces: &[RegretTrace]) -> RunSummary {
    let n_policies = config.policies.len();
    let mut policies = Vec::with_capacity(n_policies);
    for (p_idx, spec) in config.policies.iter().enumerate() {
        let label = spec.label();
        let finals: Vec<f64> = (0..config.replications)
            .map(|r| traces[r * n_policies + p_idx].final_cum_regret())
            .collect();
        let parts: Vec<(f64, f64)> = (0..config.replications)
            .map(|r| traces[r * n_policies + p_idx].decompose())
            .collect();
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = if finals.len() > 1 {
            finals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        policies.push(PolicySummary {
            label,
            mean_final_regret: mean,
            std_error: se,
            ci95: 1.96 * se,
            replications: finals.len(),
            mean_forced_part: parts.iter().map(|p| p.0).sum::<f64>() / n,
            mean_unforced_part: parts.iter().map(|p| p.1).sum::<f64>() / n,
        });
    }
    RunSummary { policies }
}

fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Splits a policy label into (name, params) for the summary schema.
fn split_label(label: &str) -> (String, String) {
    match label.split_once('(') {
        Some((name, rest)) => (name.to_string(), rest.trim_end_matches(')').to_string()),
        None => (label.to_string(), String::new()),
    }
}

/// `replicate,t,policy,row,col,reward,inst_regret,cum_regret`; indices are
/// 1-based in this human-facing output.
pub fn write_traces_csv<W: Write>(traces: &[RegretTrace], writer: &mut W) -> std::io::Result<()> {
    writeln!(writer, "replicate,t,policy,row,col,reward,inst_regret,cum_regret")?;
    for trace in traces {
        let policy = csv_field(&trace.policy);
        for r in &trace.rounds {
            writeln!(
                writer,
                "{},{},{},{},{},{},{},{}",
                trace.replicate + 1,
                r.t,
                policy,
                r.arm.row + 1,
                r.arm.col + 1,
                r.reward,
                r.inst_regret,
                r.cum_regret
            )?;
        }
    }
    Ok(())
}

/// `policy,params,mean_final_regret,se,ci95,reps`.
pub fn write_summary_csv<W: Write>(summary: &RunSummary, writer: &mut W) -> std::io::Result<()> {
    writeln!(writer, "policy,params,mean_final_regret,se,ci95,reps")?;
    for p in &summary.policies {
        let (name, params) = split_label(&p.label);
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            csv_field(&name),
            csv_field(&params),
            p.mean_final_regret,
            p.std_error,
            p.ci95,
            p.replications
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig::parse(
            "[experiment]\n\
             horizon = 60\n\
             replications = 4\n\
             master_seed = 11\n\
             \n\
             [environment]\n\
             generator = low_rank\n\
             d_r = 6\n\
             d_c = 6\n\
             rank = 2\n\
             factor_dist = uniform01\n\
             noise_sd = 0.1\n\
             \n\
             [policies]\n\
             lrb(h=0.5,f=12)\n\
             ucb\n\
             oracle\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_and_runs_deterministically() {
        let config = small_config();
        assert_eq!(config.horizon, 60);
        assert_eq!(config.policies.len(), 3);

        let out1 = run(&config).unwrap();
        let out2 = run(&config).unwrap();
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        write_traces_csv(&out1.traces, &mut csv1).unwrap();
        write_traces_csv(&out2.traces, &mut csv2).unwrap();
        assert_eq!(csv1, csv2, "repeat run drifted");

        let mut sequential = config.clone();
        sequential.threads = 1;
        let out3 = run(&sequential).unwrap();
        let mut csv3 = Vec::new();
        write_traces_csv(&out3.traces, &mut csv3).unwrap();
        assert_eq!(csv1, csv3, "parallel degree changed the output");
    }

    #[test]
    fn oracle_policy_has_zero_regret() {
        let out = run(&small_config()).unwrap();
        let summary = out.summary_for("oracle").unwrap();
        assert_eq!(summary.mean_final_regret, 0.0);
        assert_eq!(summary.ci95, 0.0);
    }

    #[test]
    fn cumulative_regret_is_nonnegative_and_nondecreasing() {
        let out = run(&small_config()).unwrap();
        for trace in &out.traces {
            for r in &trace.rounds {
                assert!(r.inst_regret >= 0.0);
            }
            for w in trace.rounds.windows(2) {
                assert!(w[1].cum_regret >= w[0].cum_regret);
            }
        }
    }

    #[test]
    fn paired_policies_share_noise() {
        // two policies with identical pull sequences must observe identical
        // rewards within each replicate (the noise stream is per replicate,
        // not per policy)
        let mut config = small_config();
        config.policies =
            vec![PolicySpec::parse("oracle").unwrap(), PolicySpec::parse("oracle").unwrap()];
        let out = run(&config).unwrap();
        for r in 0..config.replications {
            let a = &out.traces[r * 2];
            let b = &out.traces[r * 2 + 1];
            assert_eq!(a.rounds, b.rounds, "replicate {r} diverged");
        }
    }

    #[test]
    fn decompose_parts_sum_to_total() {
        let out = run(&small_config()).unwrap();
        for trace in &out.traces {
            let (forced, unforced) = trace.decompose();
            assert!((forced + unforced - trace.final_cum_regret()).abs() <= 1e-9);
        }
        // a budget of 12 forced rounds shows up as exactly 12 forced records
        for t in out.traces_for("lrb(h=0.5,f=12)") {
            assert_eq!(t.rounds.iter().filter(|r| r.forced).count(), 12);
        }
        // ucb never forces
        for t in out.traces_for("ucb") {
            assert_eq!(t.decompose().0, 0.0);
        }
    }

    #[test]
    fn grid_cells_cartesian_product() {
        let cells = grid_cells(
            "lrb",
            &[
                ("f".into(), vec!["45".into(), "70".into(), "100".into(), "225".into()]),
                ("h".into(), vec!["0.9".into(), "1".into(), "1.1".into()]),
            ],
        )
        .unwrap();
        assert_eq!(cells.len(), 12);
        // one-cell grid behaves like run
        let single = grid_cells("ucb", &[]).unwrap();
        assert_eq!(single, vec![PolicySpec::Ucb]);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("[experiment]\nhorizon = x\n").unwrap_err();
        match err {
            RunError::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        let err =
            ExperimentConfig::parse("[experiment]\nhorizon = 10\n[policies]\nbogus\n").unwrap_err();
        match err {
            RunError::Config { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn csv_env_round_trip() {
        let dir = std::env::temp_dir().join(format!("blab-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("matrix.csv");
        let b = crate::matrix::generate_low_rank(4, 4, 2, FactorDist::Uniform01, 3).unwrap();
        b.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let text = format!(
            "[experiment]\nhorizon = 20\nreplications = 2\n[environment]\ngenerator = csv\ncsv_path = {}\nnoise_sd = 0\n[policies]\nucb\n",
            path.display()
        );
        let config = ExperimentConfig::parse(&text).unwrap();
        let out = run(&config).unwrap();
        assert_eq!(out.traces.len(), 2);
        // cumulative regret never exceeds t times the reward range
        let range = b.max_entry() - b.min_entry();
        for trace in &out.traces {
            for r in &trace.rounds {
                assert!(r.cum_regret <= r.t as f64 * range + 1e-9);
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn summary_csv_schema() {
        let out = run(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&out.summary, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "policy,params,mean_final_regret,se,ci95,reps");
        let first = lines.next().unwrap();
        assert!(first.starts_with("lrb,\"h=0.5,f=12\","), "got {first}");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn traces_csv_schema() {
        let out = run(&small_config()).unwrap();
        let mut buf = Vec::new();
        write_traces_csv(&out.traces, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("replicate,t,policy,row,col,reward,inst_regret,cum_regret\n"));
        // 4 replicates x 3 policies x 60 rounds + header
        assert_eq!(text.lines().count(), 1 + 4 * 3 * 60);
        // indices in the body are 1-based
        let first_round = text.lines().nth(1).unwrap();
        assert!(first_round.starts_with("1,1,"));
    }
}
