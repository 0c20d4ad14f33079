//! Turns command-line arguments and config files into library objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use endodemand::scenario::ScenarioSet;
use endodemand::{AgentUtility, Law, RandomVariable, RiskProfile, SamplingConfig};
use serde::Deserialize;

use crate::args::{AssetArgs, LawArgs, LawName, ProfileArgs};
use crate::error::CliError;

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Everything read from disk, kept for the config hash.
#[derive(Debug, Default)]
pub struct Sources {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Sources {
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.files
            .push((path.display().to_string(), text.clone().into_bytes()));
        Ok(text)
    }

    /// Inline JSON is used as is; anything else is a path.
    pub fn read_config(&mut self, arg: &str) -> Result<String, CliError> {
        if arg.trim_start().starts_with('{') {
            Ok(arg.to_string())
        } else {
            self.read(Path::new(arg))
        }
    }

    pub fn scenarios(&mut self, path: &Path) -> Result<ScenarioSet<f64>, CliError> {
        let text = self.read(path)?;
        Ok(ScenarioSet::from_json(&text)?)
    }
}

pub fn variable(set: &ScenarioSet<f64>, name: &str) -> Result<RandomVariable<f64>, CliError> {
    Ok(set.variable(name)?.clone())
}

#[derive(Debug, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
enum ProfileConfig {
    Linear {
        alpha: f64,
        #[serde(default)]
        x_ref: f64,
    },
    Log {
        eta: f64,
        #[serde(default = "one")]
        x_ref: f64,
    },
    Saturating {
        shift: f64,
        #[serde(default)]
        interval: Option<(f64, f64)>,
    },
    Custom {},
}

fn one() -> f64 {
    1.0
}

pub fn profile(args: &ProfileArgs, sources: &mut Sources) -> Result<RiskProfile<f64>, CliError> {
    let config = match (&args.profile, args.alpha, args.eta) {
        (Some(text), _, _) => {
            let text = sources.read_config(text)?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("profile config: {e}")))?
        }
        (None, Some(alpha), _) => ProfileConfig::Linear {
            alpha,
            x_ref: args.x_ref.unwrap_or(0.0),
        },
        (None, None, Some(eta)) => ProfileConfig::Log {
            eta,
            x_ref: args.x_ref.unwrap_or(1.0),
        },
        (None, None, None) => {
            return Err(CliError::Input(
                "a risk profile is required: --profile, --alpha or --eta".into(),
            ))
        }
    };
    let profile = match config {
        ProfileConfig::Linear { alpha, x_ref } => RiskProfile::linear(alpha, x_ref)?,
        ProfileConfig::Log { eta, x_ref } => RiskProfile::log(eta, x_ref)?,
        ProfileConfig::Saturating { shift, interval } => {
            RiskProfile::saturating(shift, interval.unwrap_or((shift - 10.0, shift + 10.0)))?
        }
        ProfileConfig::Custom {} => {
            return Err(CliError::Input(
                "custom profiles are only available through the library".into(),
            ))
        }
    };
    Ok(profile)
}

fn law_params(args: &LawArgs) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    let flags = [
        ("lambda", args.lambda),
        ("p", args.p),
        ("k", args.k),
        ("theta", args.theta),
        ("mu", args.mu),
        ("sigma2", args.sigma2),
    ];
    for (name, v) in flags {
        if let Some(v) = v {
            out.insert(name.to_string(), v);
        }
    }
    for pair in &args.params {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--params expects key=value, got `{pair}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--params: `{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

pub fn law(args: &LawArgs) -> Result<Law, CliError> {
    let name = args
        .law
        .ok_or_else(|| CliError::Input("--law is required without a scenario file".into()))?;
    let params = law_params(args)?;
    let get = |key: &str| {
        params
            .get(key)
            .copied()
            .ok_or_else(|| CliError::Input(format!("law parameter `{key}` is missing")))
    };
    Ok(match name {
        LawName::Normal => Law::Normal {
            mean: vec![get("mu")?],
            cov: vec![vec![get("sigma2")?]],
        },
        LawName::Lognormal => Law::Lognormal {
            mu: get("mu")?,
            sigma2: get("sigma2")?,
        },
        LawName::Gamma => Law::Gamma {
            k: get("k")?,
            theta: get("theta")?,
        },
        LawName::Poisson => Law::Poisson {
            lambda: get("lambda")?,
        },
        LawName::Bernoulli => Law::Bernoulli { p: get("p")? },
        LawName::Discrete => Law::Discrete {
            support: args.support.clone(),
            probabilities: args.probs.clone(),
        },
    })
}

/// Whether the law is turned into scenarios by sampling.
pub fn is_sampled(law: &Law, samples: Option<usize>) -> bool {
    samples.is_some() || matches!(law, Law::Normal { .. } | Law::Lognormal { .. })
}

pub fn sampling(
    law: Law,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<SamplingConfig, CliError> {
    let seed = seed.ok_or_else(|| CliError::Input("--seed is required for sampled laws".into()))?;
    Ok(SamplingConfig::new(
        law,
        samples.unwrap_or(DEFAULT_SAMPLES),
        seed,
    ))
}

/// Wealth and asset variables on a common space, from a scenario file or a law.
pub fn assets(
    args: &AssetArgs,
    names: &[String],
    samples: Option<usize>,
    seed: Option<u64>,
    sources: &mut Sources,
) -> Result<(RandomVariable<f64>, Vec<RandomVariable<f64>>), CliError> {
    if let Some(path) = &args.scenarios {
        let set = sources.scenarios(path)?;
        let x = variable(&set, &args.x)?;
        let qs = names
            .iter()
            .map(|n| variable(&set, n))
            .collect::<Result<_, _>>()?;
        return Ok((x, qs));
    }
    let law = law(&args.law)?;
    let dims = names.len();
    let qs = if is_sampled(&law, samples) {
        let cfg = sampling(iid(law, dims)?, samples, seed)?;
        let drawn = cfg.sample::<f64>()?;
        match cfg.law {
            // independent lognormal copies are drawn as exponentials of normals
            Law::Normal { .. } if is_lognormal(&args.law) => drawn
                .into_iter()
                .map(|v| Ok(v.map(f64::exp)?.with_declared_inf(0.0)?))
                .collect::<Result<Vec<_>, CliError>>()?,
            _ => drawn,
        }
    } else {
        if dims != 1 {
            return Err(CliError::Input(
                "several assets from one law need sampling: pass --samples and --seed".into(),
            ));
        }
        vec![law.discretize::<f64>()?]
    };
    let x = RandomVariable::constant(qs[0].space(), args.wealth)?;
    Ok((x, qs))
}

fn is_lognormal(args: &LawArgs) -> bool {
    args.law == Some(LawName::Lognormal)
}

/// `dims` independent copies of a law, where the sampler supports that.
fn iid(law: Law, dims: usize) -> Result<Law, CliError> {
    if dims == 1 {
        return Ok(law);
    }
    let diag = |v: f64| {
        (0..dims)
            .map(|i| (0..dims).map(|j| if i == j { v } else { 0.0 }).collect())
            .collect()
    };
    match law {
        Law::Normal { mean, cov } => Ok(Law::Normal {
            mean: vec![mean[0]; dims],
            cov: diag(cov[0][0]),
        }),
        Law::Lognormal { mu, sigma2 } => Ok(Law::Normal {
            mean: vec![mu; dims],
            cov: diag(sigma2),
        }),
        _ => Err(CliError::Input(
            "several independent assets are supported for normal and lognormal laws".into(),
        )),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub claim: Option<String>,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "utility", rename_all = "lowercase", deny_unknown_fields)]
pub enum AgentConfig {
    #[serde(alias = "exponential")]
    Exp {
        alpha: f64,
        endowment: String,
    },
    Power {
        eta: f64,
        endowment: String,
    },
}

pub fn agents(
    text: &str,
    set: &ScenarioSet<f64>,
) -> Result<(AgentsConfig, Vec<(AgentUtility<f64>, RandomVariable<f64>)>), CliError> {
    let cfg: AgentsConfig =
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("agent config: {e}")))?;
    let agents = cfg
        .agents
        .iter()
        .map(|a| {
            Ok(match a {
                AgentConfig::Exp { alpha, endowment } => (
                    AgentUtility::exponential(*alpha)?,
                    variable(set, endowment)?,
                ),
                AgentConfig::Power { eta, endowment } => {
                    (AgentUtility::power(*eta)?, variable(set, endowment)?)
                }
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((cfg, agents))
}

/// `start:end:count` or an explicit comma-separated list.
pub fn grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Input(format!(
            "grid `{spec}` is neither start:end:count nor a list"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n)
                .map(|k| {
                    if k == n - 1 {
                        b
                    } else {
                        a + (b - a) * k as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(CliError::Input(format!(
            "grid `{spec}` must contain finite values >= 0"
        )));
    }
    Ok(values)
}
