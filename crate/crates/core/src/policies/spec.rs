//! Policy specification strings for configs and the CLI:
//! `lrb(h=1,f=225)`, `sslrb(m=40,h=0.9,f=100)`, `ucb`, `ssucb(n=auto)`,
//! `oful(delta=0.01)`, `oracle`. A forced-sampling value `f=rho:R` selects
//! schedule mode with the given rho.

use super::forced::ForcedMode;
use super::lrb::{LrbConfig, LrbPolicy, SsLrbPolicy};
use super::oful::OfulPolicy;
use super::ucb::{SsUcbPolicy, UcbPolicy, WRule};
use super::{OraclePolicy, Policy};
use crate::env::ContextualInstance;
use crate::estimator::{LambdaRule, SolverConfig};
use crate::matrix::Arm;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecParseError {
    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),
    #[error("bad policy syntax `{0}`: expected name or name(key=value,...)")]
    BadSyntax(String),
    #[error("unknown key `{key}` for policy `{policy}`")]
    UnknownKey { policy: String, key: String },
    #[error("missing required key `{key}` for policy `{policy}`")]
    MissingKey { policy: String, key: String },
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("policy `{0}` requires a contextual environment")]
    NeedsContextualEnv(String),
}

/// Parsed policy specification.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Lrb { h: f64, forced: ForcedMode, rank: Option<usize> },
    SsLrb { m_r: usize, m_c: usize, h: f64, forced: ForcedMode, rank: Option<usize> },
    Ucb,
    SsUcb { n_arms: Option<usize> },
    Oful { ridge: f64, delta: f64 },
    Oracle,
}

/// Everything a policy needs to know about the experiment it will run in.
#[derive(Debug, Clone, Copy)]
pub struct BuildContext<'a> {
    pub d_r: usize,
    pub d_c: usize,
    pub horizon: u64,
    /// Rank hint from the environment generator (the experiments fix 3).
    pub rank_hint: usize,
    pub noise_sd: f64,
    pub best_arm: Arm,
    pub contextual: Option<&'a ContextualInstance>,
}

fn parse_forced(value: &str) -> Result<ForcedMode, SpecParseError> {
    if let Some(rho) = value.strip_prefix("rho:") {
        let rho: f64 = rho.parse().map_err(|_| SpecParseError::BadValue {
            key: "f".into(),
            message: format!("`{value}` is not rho:<number>"),
        })?;
        if rho < 1.0 {
            return Err(SpecParseError::BadValue { key: "f".into(), message: "rho must be >= 1".into() });
        }
        Ok(ForcedMode::Schedule { rho })
    } else {
        let f: u64 = value.parse().map_err(|_| SpecParseError::BadValue {
            key: "f".into(),
            message: format!("`{value}` is not a sample budget or rho:<number>"),
        })?;
        Ok(ForcedMode::Budget(f))
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, SpecParseError> {
    value.parse().map_err(|_| SpecParseError::BadValue {
        key: key.into(),
        message: format!("`{value}` is not a number"),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, SpecParseError> {
    value.parse().map_err(|_| SpecParseError::BadValue {
        key: key.into(),
        message: format!("`{value}` is not a positive integer"),
    })
}

impl PolicySpec {
    pub fn parse(text: &str) -> Result<Self, SpecParseError> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            Some(open) => {
                if !text.ends_with(')') {
                    return Err(SpecParseError::BadSyntax(text.into()));
                }
                (&text[..open], &text[open + 1..text.len() - 1])
            }
            None => (text, ""),
        };
        let mut kv = Vec::new();
        for part in args.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part.split_once('=').ok_or_else(|| SpecParseError::BadSyntax(text.into()))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let require = |key: &str| {
            get(key).ok_or_else(|| SpecParseError::MissingKey { policy: name.into(), key: key.into() })
        };
        let check_keys = |allowed: &[&str]| -> Result<(), SpecParseError> {
            for (k, _) in &kv {
                if !allowed.contains(&k.as_str()) {
                    return Err(SpecParseError::UnknownKey { policy: name.into(), key: k.clone() });
                }
            }
            Ok(())
        };

        match name {
            "lrb" => {
                check_keys(&["h", "f", "r"])?;
                let h = parse_f64("h", require("h")?)?;
                let forced = parse_forced(require("f")?)?;
                let rank = get("r").map(|v| parse_usize("r", v)).transpose()?;
                Ok(PolicySpec::Lrb { h, forced, rank })
            }
            "sslrb" => {
                check_keys(&["m", "mr", "mc", "h", "f", "r"])?;
                let (m_r, m_c) = if let Some(m) = get("m") {
                    let m = parse_usize("m", m)?;
                    (m, m)
                } else {
                    (
                        parse_usize("mr", require("mr")?)?,
                        parse_usize("mc", require("mc")?)?,
                    )
                };
                let h = parse_f64("h", require("h")?)?;
                let forced = parse_forced(require("f")?)?;
                let rank = get("r").map(|v| parse_usize("r", v)).transpose()?;
                Ok(PolicySpec::SsLrb { m_r, m_c, h, forced, rank })
            }
            "ucb" => {
                check_keys(&[])?;
                Ok(PolicySpec::Ucb)
            }
            "ssucb" => {
                check_keys(&["n"])?;
                let n_arms = match get("n") {
                    None | Some("auto") => None,
                    Some(v) => Some(parse_usize("n", v)?),
                };
                Ok(PolicySpec::SsUcb { n_arms })
            }
            "oful" => {
                check_keys(&["ridge", "delta"])?;
                let ridge = get("ridge").map(|v| parse_f64("ridge", v)).transpose()?.unwrap_or(1.0);
                let delta = get("delta").map(|v| parse_f64("delta", v)).transpose()?.unwrap_or(0.01);
                Ok(PolicySpec::Oful { ridge, delta })
            }
            "oracle" => {
                check_keys(&[])?;
                Ok(PolicySpec::Oracle)
            }
            other => Err(SpecParseError::UnknownPolicy(other.into())),
        }
    }

    /// Canonical spec string (also the policy id in outputs).
    pub fn label(&self) -> String {
        fn forced_label(f: &ForcedMode) -> String {
            match f {
                ForcedMode::Budget(n) => format!("{n}"),
                ForcedMode::Schedule { rho } => format!("rho:{rho}"),
            }
        }
        match self {
            PolicySpec::Lrb { h, forced, rank } => {
                let r = rank.map(|r| format!(",r={r}")).unwrap_or_default();
                format!("lrb(h={h},f={}{r})", forced_label(forced))
            }
            PolicySpec::SsLrb { m_r, m_c, h, forced, rank } => {
                let r = rank.map(|r| format!(",r={r}")).unwrap_or_default();
                let m = if m_r == m_c {
                    format!("m={m_r}")
                } else {
                    format!("mr={m_r},mc={m_c}")
                };
                format!("sslrb({m},h={h},f={}{r})", forced_label(forced))
            }
            PolicySpec::Ucb => "ucb".into(),
            PolicySpec::SsUcb { n_arms: None } => "ssucb(n=auto)".into(),
            PolicySpec::SsUcb { n_arms: Some(n) } => format!("ssucb(n={n})"),
            PolicySpec::Oful { ridge, delta } => format!("oful(ridge={ridge},delta={delta})"),
            PolicySpec::Oracle => "oracle".into(),
        }
    }

    /// Instantiates the policy for one replicate.
    pub fn build(&self, ctx: &BuildContext<'_>, seed: u64) -> Result<Box<dyn Policy>, SpecParseError> {
        let lambda = if ctx.noise_sd > 0.0 {
            LambdaRule::NoiseScaled { noise_sd: ctx.noise_sd }
        } else {
            LambdaRule::InverseSqrtN
        };
        let lrb_cfg = |h: f64, forced: ForcedMode, rank: Option<usize>| LrbConfig {
            solver: SolverConfig { lambda, ..SolverConfig::default() },
            ..LrbConfig::new(h, forced, rank.unwrap_or(ctx.rank_hint))
        };
        match self {
            PolicySpec::Lrb { h, forced, rank } => {
                Ok(Box::new(LrbPolicy::new(ctx.d_r, ctx.d_c, lrb_cfg(*h, *forced, *rank), seed)))
            }
            PolicySpec::SsLrb { m_r, m_c, h, forced, rank } => Ok(Box::new(SsLrbPolicy::new(
                ctx.d_r,
                ctx.d_c,
                *m_r,
                *m_c,
                lrb_cfg(*h, *forced, *rank),
                seed,
            ))),
            PolicySpec::Ucb => Ok(Box::new(UcbPolicy::new(ctx.d_r, ctx.d_c, WRule::Empirical, seed))),
            PolicySpec::SsUcb { n_arms } => {
                let n = n_arms.unwrap_or_else(|| SsUcbPolicy::auto_arm_count(ctx.horizon, ctx.d_r, ctx.d_c));
                if n == 0 || n > ctx.d_r * ctx.d_c {
                    return Err(SpecParseError::BadValue {
                        key: "n".into(),
                        message: format!("{n} arms outside 1..={}", ctx.d_r * ctx.d_c),
                    });
                }
                Ok(Box::new(SsUcbPolicy::new(ctx.d_r, ctx.d_c, n, WRule::Empirical, seed)))
            }
            PolicySpec::Oful { ridge, delta } => {
                let inst = ctx.contextual.ok_or_else(|| SpecParseError::NeedsContextualEnv("oful".into()))?;
                Ok(Box::new(OfulPolicy::for_instance(inst, *ridge, *delta, ctx.noise_sd, seed)))
            }
            PolicySpec::Oracle => Ok(Box::new(OraclePolicy::new(ctx.best_arm))),
        }
    }
}
