use endodemand::buhlmann::SolveMethod;
use endodemand::closed_forms::{
    bernoulli_curves, discrete_curves, gamma_curves, normal_curves, poisson_curves,
};
use endodemand::{
    cross_impact_grid, AgentPopulation, ClearingProblem, EquilibriumOptions, EsscherMarket, Law,
    Liquidation, RootOptions,
};
use serde::Serialize;

use crate::args::{
    ClosedFormArgs, CrossImpactArgs, DemandArgs, EquilibriumArgs, Format, LiquidityArgs, PriceArgs,
    RuinLimitArgs,
};
use crate::error::CliError;
use crate::inputs::{self, Sources};
use crate::output::{json_document, num, Csv, Meta};

/// Shared run context: seed, sample count, and the files read so far.
pub struct Ctx {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub sources: Sources,
}

impl Ctx {
    pub fn meta(&self, args: &impl Serialize) -> Meta {
        Meta::new(args, self.seed, &self.sources.files)
    }
}

fn root_options(args: &PriceArgs) -> Result<RootOptions, CliError> {
    let mut opts = RootOptions::default();
    if let Some(g) = args.grid {
        opts.grid_points = g;
    }
    if let Some(t) = args.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!("--tol must be positive, got {t}")));
        }
        opts.tol = t;
    }
    Ok(opts)
}

fn problem(args: &PriceArgs, ctx: &mut Ctx) -> Result<ClearingProblem<f64>, CliError> {
    let set = ctx.sources.scenarios(&args.scenarios)?;
    let x = inputs::variable(&set, &args.x)?;
    let z = inputs::variable(&set, &args.z)?;
    let profile = inputs::profile(&args.profile, &mut ctx.sources)?;
    Ok(ClearingProblem::new(&x, &z, profile)?)
}

pub fn price(args: &PriceArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let p = problem(args, ctx)?;
    let result = p.clear_with(root_options(args)?)?;
    json_document(&ctx.meta(&("price", args)), result)
}

pub fn roots(args: &PriceArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let p = problem(args, ctx)?;
    let scan = p.find_roots_with(root_options(args)?)?;
    json_document(&ctx.meta(&("roots", args)), scan)
}

fn demand_csv(meta: &Meta, curve: &endodemand::DemandCurve<f64>) -> String {
    let mut csv = Csv::new(meta, &["s", "f", "f_bar", "in_domain"]);
    for k in 0..curve.s_grid.len() {
        csv.row(&[
            num(curve.s_grid[k]),
            num(curve.f[k]),
            num(curve.f_bar[k]),
            curve.in_domain[k].to_string(),
        ]);
    }
    csv.finish()
}

pub fn demand(args: &DemandArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let (x, qs) = inputs::assets(
        &args.asset,
        std::slice::from_ref(&args.q),
        ctx.samples,
        ctx.seed,
        &mut ctx.sources,
    )?;
    let profile = inputs::profile(&args.profile, &mut ctx.sources)?;
    let grid = inputs::grid(&args.s_grid)?;
    let curve = Liquidation::new(&x, &qs[0], profile)?.curve_on(&grid)?;
    Ok(demand_csv(&ctx.meta(&("demand", args)), &curve))
}

pub fn cross_impact(args: &CrossImpactArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    if args.q.len() != 2 {
        return Err(CliError::Input(
            "cross-impact needs exactly two assets".into(),
        ));
    }
    let (x, qs) = inputs::assets(
        &args.asset,
        &args.q,
        ctx.samples,
        ctx.seed,
        &mut ctx.sources,
    )?;
    let profile = inputs::profile(&args.profile, &mut ctx.sources)?;
    let grids = vec![inputs::grid(&args.s1_grid)?, inputs::grid(&args.s2_grid)?];
    let nodes = cross_impact_grid(&x, &qs, &profile, &grids)?;
    Ok(cross_csv(&ctx.meta(&("cross-impact", args)), &nodes))
}

pub fn cross_csv(meta: &Meta, nodes: &[endodemand::CrossImpactNode<f64>]) -> String {
    let mut csv = Csv::new(meta, &["s1", "s2", "asset", "f", "f_bar"]);
    for node in nodes {
        for k in 0..node.f.len() {
            csv.row(&[
                num(node.s[0]),
                num(node.s[1]),
                (k + 1).to_string(),
                num(node.f[k]),
                num(node.f_bar[k]),
            ]);
        }
    }
    csv.finish()
}

#[derive(Serialize)]
struct LiquidityReport {
    price_at_zero: f64,
    f_slope_at_zero: f64,
    f_bar_slope_at_zero: f64,
}

pub fn liquidity(args: &LiquidityArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let (x, qs) = inputs::assets(
        &args.asset,
        std::slice::from_ref(&args.q),
        ctx.samples,
        ctx.seed,
        &mut ctx.sources,
    )?;
    let profile = inputs::profile(&args.profile, &mut ctx.sources)?;
    let liq = Liquidation::new(&x, &qs[0], profile)?;
    let (f, f_bar) = liq.liquidity_at_zero()?;
    let report = LiquidityReport {
        price_at_zero: liq.price_at_zero()?,
        f_slope_at_zero: f,
        f_bar_slope_at_zero: f_bar,
    };
    json_document(&ctx.meta(&("liquidity", args)), report)
}

pub fn closed_form(args: &ClosedFormArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let market = EsscherMarket::new(args.alpha)?;
    let law = inputs::law(&args.law)?;
    law.validate()?;
    let grid = inputs::grid(&args.s_grid)?;
    let mut curve = endodemand::DemandCurve {
        s_grid: grid.clone(),
        f: Vec::with_capacity(grid.len()),
        f_bar: Vec::with_capacity(grid.len()),
        in_domain: vec![true; grid.len()],
        dom_boundary: None,
    };
    for &s in &grid {
        let (f, fb) = match &law {
            Law::Normal { mean, cov } => {
                let (f, fb) = normal_curves(&market, mean, cov, &[s])?;
                (f[0], fb[0])
            }
            Law::Poisson { lambda } => poisson_curves(&market, *lambda, s)?,
            Law::Bernoulli { p } => bernoulli_curves(&market, *p, s)?,
            Law::Gamma { k, theta } => gamma_curves(&market, *k, *theta, s)?,
            Law::Discrete {
                support,
                probabilities,
            } => discrete_curves(&market, support, probabilities, s)?,
            Law::Lognormal { .. } => {
                return Err(CliError::Input(
                    "the lognormal law has no moment generating function; use `demand`".into(),
                ))
            }
        };
        curve.f.push(f);
        curve.f_bar.push(fb);
    }
    Ok(demand_csv(&ctx.meta(&("closed-form", args)), &curve))
}

#[derive(Serialize)]
struct EquilibriumReport {
    price: f64,
    method: SolveMethod,
    lambda: Vec<f64>,
    initial_allocations: Vec<f64>,
    moment_residuals: Vec<f64>,
    weights: Vec<f64>,
    density: Vec<f64>,
    transfers: Vec<Vec<f64>>,
}

pub fn equilibrium(args: &EquilibriumArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let set = ctx.sources.scenarios(&args.scenarios)?;
    let text = ctx.sources.read_config(&args.agents)?;
    let (cfg, agents) = inputs::agents(&text, &set)?;
    let claim = args
        .z
        .clone()
        .or(cfg.claim.clone())
        .unwrap_or_else(|| "Z".into());
    let z = inputs::variable(&set, &claim)?;
    let population = AgentPopulation::new(agents)?;
    let mut opts = EquilibriumOptions {
        lambda: cfg.lambda.clone(),
        force_general: args.force_general,
        ..Default::default()
    };
    if let Some(steps) = args.steps {
        opts.steps = steps;
    }
    let sol = endodemand::solve_equilibrium(&population, &z, &opts)?;
    let meta = ctx.meta(&("equilibrium", args));
    match args.format {
        Format::Json => json_document(
            &meta,
            EquilibriumReport {
                price: sol.price,
                method: sol.method,
                lambda: sol.lambda.clone(),
                initial_allocations: sol.initial.clone(),
                moment_residuals: sol.residuals.clone(),
                weights: z.weights().to_vec(),
                density: sol.density.values().to_vec(),
                transfers: sol.transfers.iter().map(|t| t.values().to_vec()).collect(),
            },
        ),
        Format::Csv => {
            let names: Vec<String> = (1..=sol.transfers.len()).map(|i| format!("Y{i}")).collect();
            let mut cols = vec!["scenario", "weight", "density"];
            cols.extend(names.iter().map(String::as_str));
            let mut csv = Csv::new(&meta, &cols);
            for k in 0..z.len() {
                let mut row = vec![
                    k.to_string(),
                    num(z.weights()[k]),
                    num(sol.density.values()[k]),
                ];
                row.extend(sol.transfers.iter().map(|t| num(t.values()[k])));
                csv.row(&row);
            }
            Ok(csv.finish())
        }
    }
}

#[derive(Serialize)]
struct RuinLimitReport {
    p: Vec<f64>,
    prices: Vec<f64>,
    /// Price without the ruin factor.
    limit: f64,
}

pub fn ruin_limit(args: &RuinLimitArgs, ctx: &mut Ctx) -> Result<String, CliError> {
    let set = ctx.sources.scenarios(&args.scenarios)?;
    let x = inputs::variable(&set, &args.x)?;
    let z = inputs::variable(&set, &args.z)?;
    let profile = inputs::profile(&args.profile, &mut ctx.sources)?;
    let problem = ClearingProblem::new(&x, &z, profile)?;
    let prices = problem.ruin_limit_price(&args.p)?;
    let limit = problem.clear()?.selected;
    json_document(
        &ctx.meta(&("ruin-limit", args)),
        RuinLimitReport {
            p: args.p.clone(),
            prices,
            limit,
        },
    )
}
