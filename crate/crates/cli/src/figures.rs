//! Fixed grids for the reference figures.

use endodemand::{
    cross_impact_grid, ClearingProblem, Law, Liquidation, RandomVariable, RiskProfile,
    SamplingConfig, ScenarioSpace,
};

use crate::args::Figure;
use crate::commands::{cross_csv, Ctx};
use crate::error::CliError;
use crate::output::{num, Csv};

const SIGMA: f64 = 0.5;
const WEALTH: f64 = 2.0;
const RUIN_P: f64 = 1.0 - 1e-5;
/// Default scenario count for the sampled figures.
const FIGURE_SAMPLES: usize = 20_000;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k == n - 1 {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn run(figure: Figure, ctx: &mut Ctx) -> Result<String, CliError> {
    match figure {
        Figure::AppendixC => appendix_c(ctx),
        Figure::CrossImpact => cross_impact(ctx),
        Figure::Lognormal => lognormal(ctx),
    }
}

/// `H_Z(v)` and `Θ_Z(v)` on `v ∈ [1e-5, 2]`.
fn appendix_c(ctx: &mut Ctx) -> Result<String, CliError> {
    let space = ScenarioSpace::new(vec![0.01, 0.99])?;
    let x = RandomVariable::new(&space, vec![1e-5, 100.0])?;
    let z = RandomVariable::new(&space, vec![2.0, 1e-5])?;
    let profile = RiskProfile::saturating(2.3, (-10.0, 110.0))?;
    let problem = ClearingProblem::new(&x, &z, profile)?;
    let mut csv = Csv::new(&ctx.meta(&("figure", "appendix-c")), &["v", "h_z", "theta"]);
    for v in linspace(1e-5, 2.0, 401) {
        csv.row(&[num(v), num(problem.h_map(v)?), num(problem.theta(v)?)]);
    }
    Ok(csv.finish())
}

fn lognormal_law() -> Law {
    Law::Lognormal {
        mu: -SIGMA * SIGMA / 2.0,
        sigma2: SIGMA * SIGMA,
    }
}

fn seed(ctx: &Ctx) -> Result<u64, CliError> {
    ctx.seed
        .ok_or_else(|| CliError::Input("--seed is required for sampled laws".into()))
}

/// Inverse demand for a lognormal asset held against fixed wealth, with and
/// without a small probability of joint ruin.
fn lognormal(ctx: &mut Ctx) -> Result<String, CliError> {
    let cfg = SamplingConfig::new(
        lognormal_law(),
        ctx.samples.unwrap_or(FIGURE_SAMPLES),
        seed(ctx)?,
    );
    let q = cfg.sample_one::<f64>()?;
    let x = RandomVariable::constant(q.space(), WEALTH)?;
    let profile = RiskProfile::log(1.0, 1.0)?;
    let grid = linspace(0.0, 5.0, 101);
    let plain = Liquidation::new(&x, &q, profile.clone())?.curve_on(&grid)?;

    let lifted = q.space().with_bernoulli(RUIN_P)?;
    let ruin = Liquidation::new(&x.ruin_lift(&lifted)?, &q.ruin_lift(&lifted)?, profile)?
        .curve_on(&grid)?;

    let mut csv = Csv::new(
        &ctx.meta(&("figure", "lognormal", cfg)),
        &["variant", "s", "f", "f_bar", "in_domain"],
    );
    for (name, curve) in [("without_ruin", &plain), ("with_ruin", &ruin)] {
        for k in 0..grid.len() {
            csv.row(&[
                name.to_string(),
                num(grid[k]),
                num(curve.f[k]),
                num(curve.f_bar[k]),
                curve.in_domain[k].to_string(),
            ]);
        }
    }
    Ok(csv.finish())
}

/// Two i.i.d. lognormal assets against fixed wealth.
fn cross_impact(ctx: &mut Ctx) -> Result<String, CliError> {
    let s2 = SIGMA * SIGMA;
    let cfg = SamplingConfig::new(
        Law::Normal {
            mean: vec![-s2 / 2.0; 2],
            cov: vec![vec![s2, 0.0], vec![0.0, s2]],
        },
        ctx.samples.unwrap_or(FIGURE_SAMPLES),
        seed(ctx)?,
    );
    let qs = cfg
        .sample::<f64>()?
        .into_iter()
        .map(|v| v.map(f64::exp)?.with_declared_inf(0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let x = RandomVariable::constant(qs[0].space(), WEALTH)?;
    let profile = RiskProfile::log(1.0, 1.0)?;
    let grid = linspace(0.0, 4.0, 21);
    let nodes = cross_impact_grid(&x, &qs, &profile, &[grid.clone(), grid])?;
    Ok(cross_csv(
        &ctx.meta(&("figure", "cross-impact", cfg)),
        &nodes,
    ))
}
