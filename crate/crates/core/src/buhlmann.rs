//! Full n-agent equilibrium with an externally sold claim.
//!
//! Allocations `𝒴_i(γ)` of aggregate wealth `γ` solve
//!
//! ```text
//! 𝒴_i'(γ) = (1/ρ_i(𝒴_i)) / Σ_j 1/ρ_j(𝒴_j),     R'(γ) = 1 / Σ_j 1/ρ_j(𝒴_j),
//! ```
//!
//! from `γ = c = ess_inf X`, with initial values chosen so that
//! `E^Q[𝒴_i(X + Z - v)] = E^Q[X_i]` for the pricing density
//! `dQ/dP ∝ exp(-R(X + Z - v))`. The price `v = E^Q[Z]` is the outermost
//! fixed point.

use std::cell::RefCell;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::risk_profile::{AgentUtility, Domain, RiskProfile};
use crate::scalar::Scalar;
use crate::scenario::RandomVariable;

/// Market participants and their endowments.
#[derive(Clone)]
pub struct AgentPopulation<T> {
    agents: Vec<AgentUtility<T>>,
    endowments: Vec<RandomVariable<T>>,
    domain: Domain,
}

impl<T: Scalar> std::fmt::Debug for AgentPopulation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentPopulation")
            .field("agents", &self.agents)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> AgentPopulation<T> {
    /// Validates admissibility. Exponential agents live on the real line;
    /// power agents need `η ∈ (0, 1]` and strictly positive endowments.
    /// Custom agents are checked heuristically and only warned about.
    pub fn new(agents: Vec<(AgentUtility<T>, RandomVariable<T>)>) -> Result<Self> {
        let Some(first) = agents.first() else {
            return Err(Error::InvalidInput(
                "population needs at least one agent".into(),
            ));
        };
        let domain = first.0.domain();
        for (i, (u, x)) in agents.iter().enumerate() {
            if !x.same_space(&first.1) {
                return Err(Error::SpaceMismatch);
            }
            if u.domain() != domain {
                return Err(Error::Precondition(format!(
                    "agent {i} lives on {} but agent 0 on {domain}",
                    u.domain()
                )));
            }
            match u {
                AgentUtility::Exponential { .. } => {}
                AgentUtility::Power { eta } => {
                    if !(*eta > T::zero() && *eta <= T::one()) {
                        return Err(Error::param(
                            "eta",
                            format!("agent {i}: equilibrium needs η in (0, 1], got {eta}"),
                        ));
                    }
                    if !(x.min() > T::zero()) {
                        return Err(Error::Precondition(format!(
                            "agent {i}: power utility needs a strictly positive endowment"
                        )));
                    }
                }
                AgentUtility::Custom { rho, domain } => warn_custom(i, rho.as_ref(), *domain, x),
            }
        }
        let (agents, endowments) = agents.into_iter().unzip();
        Ok(AgentPopulation {
            agents,
            endowments,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[AgentUtility<T>] {
        &self.agents
    }

    pub fn endowments(&self) -> &[RandomVariable<T>] {
        &self.endowments
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `X = Σ_i X_i`.
    pub fn aggregate(&self) -> Result<RandomVariable<T>> {
        let ones = vec![T::one(); self.len()];
        RandomVariable::linear_combination(&ones, &self.endowments)
    }

    fn all_exponential(&self) -> bool {
        self.agents
            .iter()
            .all(|a| matches!(a, AgentUtility::Exponential { .. }))
    }

    fn common_power(&self) -> Option<T> {
        let mut eta = None;
        for a in &self.agents {
            match (a, eta) {
                (AgentUtility::Power { eta: e }, None) => eta = Some(*e),
                (AgentUtility::Power { eta: e }, Some(prev)) if *e == prev => {}
                _ => return None,
            }
        }
        eta
    }

    /// `(Σ_j 1/ρ_j(y_j))^{-1}`, checking domains and positivity.
    fn inverse_sum(&self, y: &[T], inv: &mut [T], gamma: T) -> Result<T> {
        let mut total = T::zero();
        for (i, a) in self.agents.iter().enumerate() {
            let rho = if a.domain().contains(y[i]) {
                a.rho(y[i])
            } else {
                T::nan()
            };
            if !(rho > T::zero() && rho.is_finite()) {
                return Err(Error::Domain {
                    scenario: i,
                    value: y[i].as_f64(),
                    domain: format!("{} (allocation of agent {i} at γ = {gamma})", a.domain()),
                });
            }
            inv[i] = rho.recip();
            total = total + inv[i];
        }
        Ok(total)
    }
}

fn warn_custom<T: Scalar>(
    i: usize,
    rho: &(dyn Fn(T) -> T + Send + Sync),
    domain: Domain,
    x: &RandomVariable<T>,
) {
    let (lo, hi) = (x.min(), x.max());
    let pad = (hi - lo).max(T::one());
    match domain {
        Domain::FullLine => {
            let n = 256;
            let pts: Vec<T> = (0..n)
                .map(|k| {
                    lo - pad
                        + (T::lit(3.0) * pad + hi - lo) * T::from_usize(k).unwrap()
                            / T::from_usize(n - 1).unwrap()
                })
                .collect();
            let lip = pts
                .windows(2)
                .map(|w| ((rho(w[1]) - rho(w[0])) / (w[1] - w[0])).abs())
                .fold(
                    T::zero(),
                    |m, v| if v.is_nan() { T::infinity() } else { m.max(v) },
                );
            if !lip.is_finite() || lip > T::lit(1e6) {
                log::warn!("agent {i}: risk aversion looks non-Lipschitz (slope estimate {lip})");
            }
        }
        Domain::PositiveHalfLine => {
            let tiny = T::lit(1e-8) * lo.max(T::min_positive_value());
            if !(tiny * rho(tiny) >= T::lit(1e-3)) {
                log::warn!(
                    "agent {i}: marginal utility may stay bounded at zero (Inada condition)"
                );
            }
            let n = 256;
            let bad = (1..=n).any(|k| {
                let z = (hi + pad) * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
                z * rho(z) > T::one() + T::lit(1e-12)
            });
            if bad {
                log::warn!("agent {i}: z·u'(z) is not nondecreasing on the endowment range");
            }
        }
    }
}

/// Allocations and `R` tabulated on a `γ`-grid, with derivatives for cubic
/// Hermite interpolation.
#[derive(Debug, Clone, Serialize)]
pub struct AllocationTable<T> {
    /// Integration anchor, where `R = 0`.
    pub anchor: T,
    pub gamma: Vec<T>,
    /// `y[k][i] = 𝒴_i(gamma[k])`.
    pub y: Vec<Vec<T>>,
    pub dy: Vec<Vec<T>>,
    pub r: Vec<T>,
    pub dr: Vec<T>,
}

impl<T: Scalar> AllocationTable<T> {
    pub fn range(&self) -> (T, T) {
        (self.gamma[0], *self.gamma.last().unwrap())
    }

    fn locate(&self, g: T) -> Result<(usize, T, T)> {
        let (lo, hi) = self.range();
        if !(g >= lo && g <= hi) {
            return Err(Error::Domain {
                scenario: 0,
                value: g.as_f64(),
                domain: format!("the tabulated range [{lo}, {hi}]"),
            });
        }
        let n = self.gamma.len();
        if n == 1 {
            return Ok((0, T::zero(), T::zero()));
        }
        let k = self.gamma.partition_point(|&x| x <= g).clamp(1, n - 1) - 1;
        let h = self.gamma[k + 1] - self.gamma[k];
        Ok((k, (g - self.gamma[k]) / h, h))
    }

    fn hermite(p0: T, p1: T, d0: T, d1: T, t: T, h: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let t2 = t * t;
        let t3 = t2 * t;
        (two * t3 - three * t2 + one) * p0
            + (t3 - two * t2 + t) * h * d0
            + (-two * t3 + three * t2) * p1
            + (t3 - t2) * h * d1
    }

    /// `𝒴(γ)`.
    pub fn allocations(&self, g: T) -> Result<Vec<T>> {
        let (k, t, h) = self.locate(g)?;
        if h == T::zero() {
            return Ok(self.y[k].clone());
        }
        Ok((0..self.y[k].len())
            .map(|i| {
                Self::hermite(
                    self.y[k][i],
                    self.y[k + 1][i],
                    self.dy[k][i],
                    self.dy[k + 1][i],
                    t,
                    h,
                )
            })
            .collect())
    }

    /// `R(γ)`.
    pub fn r(&self, g: T) -> Result<T> {
        let (k, t, h) = self.locate(g)?;
        if h == T::zero() {
            return Ok(self.r[k]);
        }
        Ok(Self::hermite(
            self.r[k],
            self.r[k + 1],
            self.dr[k],
            self.dr[k + 1],
            t,
            h,
        ))
    }

    /// Largest `|Σ_i 𝒴_i(γ) - γ|` over the nodes.
    pub fn conservation_residual(&self) -> T {
        self.gamma
            .iter()
            .zip(&self.y)
            .map(|(&g, y)| (y.iter().copied().sum::<T>() - g).abs())
            .fold(T::zero(), T::max)
    }
}

/// Default number of RK4 steps over the tabulated range.
pub const DEFAULT_STEPS: usize = 10_000;

fn rk4_side<T: Scalar>(
    pop: &AgentPopulation<T>,
    start: &[T],
    c: T,
    end: T,
    steps: usize,
) -> Result<Vec<(T, Vec<T>, Vec<T>)>> {
    let n = pop.len();
    let m = n + 1;
    let mut inv = vec![T::zero(); n];
    let mut deriv = |g: T, s: &[T], d: &mut [T]| -> Result<()> {
        let total = pop.inverse_sum(&s[..n], &mut inv, g)?;
        for i in 0..n {
            d[i] = inv[i] / total;
        }
        d[n] = total.recip();
        Ok(())
    };
    let h = (end - c) / T::from_usize(steps).unwrap();
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let two = T::lit(2.0);
    let mut state = start.to_vec();
    let mut k1 = vec![T::zero(); m];
    let (mut k2, mut k3, mut k4, mut tmp) = (k1.clone(), k1.clone(), k1.clone(), k1.clone());
    deriv(c, &state, &mut k1)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((c, state.clone(), k1.clone()));
    for k in 0..steps {
        let g = c + h * T::from_usize(k).unwrap();
        for j in 0..m {
            tmp[j] = state[j] + half * h * k1[j];
        }
        deriv(g + half * h, &tmp, &mut k2)?;
        for j in 0..m {
            tmp[j] = state[j] + half * h * k2[j];
        }
        deriv(g + half * h, &tmp, &mut k3)?;
        for j in 0..m {
            tmp[j] = state[j] + h * k3[j];
        }
        deriv(g + h, &tmp, &mut k4)?;
        for j in 0..m {
            state[j] = state[j] + sixth * h * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
        let g_next = if k + 1 == steps {
            end
        } else {
            c + h * T::from_usize(k + 1).unwrap()
        };
        deriv(g_next, &state, &mut k1)?;
        out.push((g_next, state.clone(), k1.clone()));
    }
    Ok(out)
}

/// RK4 solution of the allocation system on `gamma_range`, started from
/// `initial` at the anchor `c` (which must lie in the range and satisfy
/// `Σ initial = c`). `R` is integrated alongside, with `R(c) = 0`.
pub fn integrate_allocations<T: Scalar>(
    population: &AgentPopulation<T>,
    initial: &[T],
    anchor: T,
    gamma_range: (T, T),
    steps: usize,
) -> Result<AllocationTable<T>> {
    let n = population.len();
    let (lo, hi) = gamma_range;
    if initial.len() != n {
        return Err(Error::InvalidInput(
            "one initial value per agent required".into(),
        ));
    }
    if !(lo <= anchor && anchor <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "anchor {anchor} outside the range [{lo}, {hi}]"
        )));
    }
    let sum: T = initial.iter().copied().sum();
    let scale = anchor.abs().max(T::one());
    if (sum - anchor).abs()
        > T::lit(1e-12_f64.max(T::BRACKET_FLOOR)) * scale * T::from_usize(n).unwrap()
    {
        return Err(Error::InvalidInput(format!(
            "initial allocations sum to {sum}, expected {anchor}"
        )));
    }
    if steps == 0 {
        return Err(Error::param("steps", "must be positive"));
    }
    let mut steps = steps;
    for _ in 0..4 {
        let span = hi - lo;
        let side = |len: T| -> usize {
            if span == T::zero() || len == T::zero() {
                0
            } else {
                (T::from_usize(steps).unwrap() * len / span)
                    .ceil()
                    .to_usize()
                    .unwrap_or(1)
                    .max(1)
            }
        };
        let mut start = initial.to_vec();
        start.push(T::zero());
        let fwd = match side(hi - anchor) {
            0 => vec![],
            k => rk4_side(population, &start, anchor, hi, k)?,
        };
        let back = match side(anchor - lo) {
            0 => vec![],
            k => rk4_side(population, &start, anchor, lo, k)?,
        };
        let mut nodes: Vec<(T, Vec<T>, Vec<T>)> = back.into_iter().skip(1).rev().collect();
        if fwd.is_empty() {
            let mut inv = vec![T::zero(); n];
            let total = population.inverse_sum(initial, &mut inv, anchor)?;
            let mut d: Vec<T> = inv.iter().map(|&v| v / total).collect();
            d.push(total.recip());
            nodes.push((anchor, start.clone(), d));
        } else {
            nodes.extend(fwd);
        }
        let table = AllocationTable {
            anchor,
            gamma: nodes.iter().map(|x| x.0).collect(),
            y: nodes.iter().map(|x| x.1[..n].to_vec()).collect(),
            dy: nodes.iter().map(|x| x.2[..n].to_vec()).collect(),
            r: nodes.iter().map(|x| x.1[n]).collect(),
            dr: nodes.iter().map(|x| x.2[n]).collect(),
        };
        let allowed = T::lit(1e-9_f64.max(T::BRACKET_FLOOR)) * (hi - lo).max(T::one());
        if table.conservation_residual() <= allowed {
            return Ok(table);
        }
        steps *= 2;
    }
    Err(Error::NonConvergence {
        iterations: steps,
        residuals: vec![],
    })
}

/// How a solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Affine allocations of an exponential population.
    ExponentialClosedForm,
    /// Proportional allocations of identical power agents.
    SymmetricPowerClosedForm,
    /// RK4 integration with Newton shooting.
    Shooting,
}

/// Settings for [`solve_equilibrium`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOptions<T> {
    /// RK4 steps across the tabulated `γ`-range.
    pub steps: usize,
    pub max_newton_iterations: usize,
    /// Newton stops when every moment residual is below this, relative to
    /// `max(1, max_i |E^Q X_i|)`.
    pub newton_tol: f64,
    /// Scan points for the price when no comonotonicity shortcut applies.
    pub outer_grid: usize,
    /// Relative bisection tolerance on the price.
    pub price_tol: f64,
    /// Relative margin added on both sides of the `γ`-range.
    pub margin: f64,
    /// Shares of the proceeds; defaults to `1/n` each.
    pub lambda: Option<Vec<T>>,
    /// Skip the closed-form shortcuts.
    pub force_general: bool,
}

impl<T> Default for EquilibriumOptions<T> {
    fn default() -> Self {
        EquilibriumOptions {
            steps: DEFAULT_STEPS,
            max_newton_iterations: 200,
            newton_tol: 1e-12,
            outer_grid: 129,
            price_tol: 1e-10,
            margin: 0.05,
            lambda: None,
            force_general: false,
        }
    }
}

/// Solved equilibrium.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Scalar + Serialize"))]
pub struct EquilibriumSolution<T> {
    /// `E^Q[Z]`.
    pub price: T,
    /// `dQ/dP` per scenario.
    #[serde(serialize_with = "serialize_rv")]
    pub density: RandomVariable<T>,
    pub allocations: AllocationTable<T>,
    /// `𝒴_i(c)`.
    pub initial: Vec<T>,
    #[serde(serialize_with = "serialize_rvs")]
    pub transfers: Vec<RandomVariable<T>>,
    pub lambda: Vec<T>,
    pub method: SolveMethod,
    /// Moment residuals `E^Q[𝒴_i] - E^Q[X_i]` at the solution.
    pub residuals: Vec<T>,
}

fn serialize_rv<S: serde::Serializer, T: Scalar + Serialize>(
    rv: &RandomVariable<T>,
    s: S,
) -> Result<S::Ok, S::Error> {
    rv.values().serialize(s)
}

fn serialize_rvs<S: serde::Serializer, T: Scalar + Serialize>(
    rvs: &[RandomVariable<T>],
    s: S,
) -> Result<S::Ok, S::Error> {
    rvs.iter()
        .map(|r| r.values())
        .collect::<Vec<_>>()
        .serialize(s)
}

/// One inner solve at a fixed price.
struct Inner<T> {
    table: AllocationTable<T>,
    initial: Vec<T>,
    residuals: Vec<T>,
    /// Unnormalized `w e^{-R(γ) - shift}` per scenario.
    tilt: Vec<T>,
}

type Warm<T> = (Vec<T>, Option<Vec<Vec<T>>>);

struct Solver<'a, T: Scalar> {
    pop: &'a AgentPopulation<T>,
    opts: &'a EquilibriumOptions<T>,
    x: RandomVariable<T>,
    z: RandomVariable<T>,
    c: T,
    range: (T, T),
    /// Last converged initial values and Jacobian.
    warm: RefCell<Option<Warm<T>>>,
}

impl<T: Scalar> Solver<'_, T> {
    fn gammas(&self, v: T) -> Vec<T> {
        self.x
            .values()
            .iter()
            .zip(self.z.values())
            .map(|(&x, &z)| x + z - v)
            .collect()
    }

    /// Evaluates the moment residuals for a full vector of initial values.
    fn evaluate(&self, v: T, initial: &[T]) -> Result<Inner<T>> {
        let table = integrate_allocations(self.pop, initial, self.c, self.range, self.opts.steps)?;
        let gammas = self.gammas(v);
        let mut rs = Vec::with_capacity(gammas.len());
        let mut ys = Vec::with_capacity(gammas.len());
        for &g in &gammas {
            rs.push(table.r(g)?);
            ys.push(table.allocations(g)?);
        }
        let shift = rs.iter().map(|&r| -r).fold(T::neg_infinity(), T::max);
        let tilt: Vec<T> = rs
            .iter()
            .zip(self.x.weights())
            .map(|(&r, &w)| w * (-r - shift).exp())
            .collect();
        let total: T = tilt.iter().copied().sum();
        let n = self.pop.len();
        let residuals = (0..n)
            .map(|i| {
                let xi = self.pop.endowments[i].values();
                tilt.iter()
                    .enumerate()
                    .map(|(k, &q)| q * (ys[k][i] - xi[k]))
                    .sum::<T>()
                    / total
            })
            .collect();
        Ok(Inner {
            table,
            initial: initial.to_vec(),
            residuals,
            tilt,
        })
    }

    fn full(&self, free: &[T]) -> Vec<T> {
        let mut y = free.to_vec();
        y.push(self.c - free.iter().copied().sum::<T>());
        y
    }

    fn jacobian(&self, v: T, free: &[T], cur: &Inner<T>) -> Result<Vec<Vec<T>>> {
        let m = free.len();
        let h_scale = free
            .iter()
            .fold(self.c.abs().max(T::one()), |m, y| m.max(y.abs()));
        let h = T::lit(1e-6) * h_scale;
        let mut jac = vec![vec![T::zero(); m]; m];
        for j in 0..m {
            let mut step = h;
            let mut probe = free.to_vec();
            probe[j] = probe[j] + step;
            let r = match self.evaluate(v, &self.full(&probe)) {
                Ok(r) => r,
                Err(_) => {
                    step = -h;
                    probe[j] = free[j] + step;
                    self.evaluate(v, &self.full(&probe))?
                }
            };
            for i in 0..m {
                jac[i][j] = (r.residuals[i] - cur.residuals[i]) / step;
            }
        }
        Ok(jac)
    }

    /// Newton shooting on the first `n - 1` initial values. A supplied
    /// Jacobian is reused with Broyden updates until a step fails.
    fn shoot(
        &self,
        v: T,
        guess: &[T],
        jac: Option<Vec<Vec<T>>>,
    ) -> Result<(Inner<T>, Option<Vec<Vec<T>>>)> {
        let n = self.pop.len();
        let norm = |r: &[T]| r[..n - 1].iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut free = guess[..n - 1].to_vec();
        let mut cur = self.evaluate(v, &self.full(&free))?;
        let scale = self
            .pop
            .endowments
            .iter()
            .map(|x| x.expectation().abs())
            .fold(T::one(), T::max);
        let tol = T::lit(self.opts.newton_tol) * scale;
        let mut jac = jac.filter(|j| j.len() == n - 1);
        let mut fresh = false;
        for _ in 0..self.opts.max_newton_iterations {
            if n == 1 || norm(&cur.residuals) <= tol {
                return Ok((cur, jac));
            }
            let j = match jac.take() {
                Some(j) => j,
                None => {
                    fresh = true;
                    self.jacobian(v, &free, &cur)?
                }
            };
            let rhs: Vec<T> = cur.residuals[..n - 1].iter().map(|&r| -r).collect();
            let delta = match solve_dense(j.clone(), rhs) {
                Ok(d) => d,
                Err(e) if fresh => return Err(e),
                Err(_) => continue,
            };
            let before = norm(&cur.residuals);
            let mut damping = T::one();
            let mut accepted = None;
            for _ in 0..if fresh { 40 } else { 4 } {
                let trial: Vec<T> = free
                    .iter()
                    .zip(&delta)
                    .map(|(&f, &d)| f + damping * d)
                    .collect();
                if let Ok(r) = self.evaluate(v, &self.full(&trial)) {
                    if norm(&r.residuals) < before {
                        accepted = Some((trial, r));
                        break;
                    }
                }
                damping = damping / T::lit(2.0);
            }
            match accepted {
                Some((f, r)) => {
                    // Broyden: J += (Δr - J Δx) Δxᵀ / |Δx|²
                    let dx: Vec<T> = f.iter().zip(&free).map(|(&a, &b)| a - b).collect();
                    let dd: T = dx.iter().map(|&x| x * x).sum();
                    let mut j = j;
                    if dd > T::zero() {
                        for i in 0..n - 1 {
                            let jdx: T = (0..n - 1).map(|k| j[i][k] * dx[k]).sum();
                            let u = (r.residuals[i] - cur.residuals[i] - jdx) / dd;
                            for k in 0..n - 1 {
                                j[i][k] = j[i][k] + u * dx[k];
                            }
                        }
                    }
                    jac = Some(j);
                    fresh = false;
                    free = f;
                    cur = r;
                }
                None if fresh => break,
                None => {}
            }
        }
        if norm(&cur.residuals) <= tol {
            return Ok((cur, jac));
        }
        Err(Error::NonConvergence {
            iterations: self.opts.max_newton_iterations,
            residuals: cur.residuals.iter().map(|r| r.as_f64()).collect(),
        })
    }

    fn initial_guess(&self) -> Vec<T> {
        let means: Vec<T> = self
            .pop
            .endowments
            .iter()
            .map(|x| x.expectation())
            .collect();
        let total: T = means.iter().copied().sum();
        let n = T::from_usize(self.pop.len()).unwrap();
        if total.abs() > T::zero() && means.iter().all(|&m| m / total > T::zero()) {
            means.iter().map(|&m| self.c * m / total).collect()
        } else {
            vec![self.c / n; self.pop.len()]
        }
    }

    /// Shoots from the last converged initial values, falling back to the
    /// cold guess.
    fn shoot_warm(&self, v: T) -> Result<Inner<T>> {
        let warm = self.warm.borrow_mut().take();
        let (inner, jac) = match warm.map(|(w, j)| self.shoot(v, &w, j)) {
            Some(Ok(found)) => found,
            _ => self.shoot(v, &self.initial_guess(), None)?,
        };
        *self.warm.borrow_mut() = Some((inner.initial.clone(), jac));
        Ok(inner)
    }

    /// `Θ(v) / E[e^{-R}]`, i.e. `E^Q[Z] - v`.
    fn theta(&self, v: T) -> Result<(T, Inner<T>)> {
        let inner = self.shoot_warm(v)?;
        let total: T = inner.tilt.iter().copied().sum();
        let s: T = inner
            .tilt
            .iter()
            .zip(self.z.values())
            .map(|(&q, &z)| q * (z - v))
            .sum();
        Ok((s / total, inner))
    }

    /// Illinois iteration on a sign-changing bracket.
    fn refine(&self, mut a: T, mut b: T, mut fa: T, mut fb: T, width: T) -> Result<T> {
        let two = T::lit(2.0);
        let mut side = 0i8;
        for k in 0..200 {
            if b - a <= width {
                break;
            }
            let mut m = if k % 8 == 7 {
                (a + b) / two
            } else {
                (a * fb - b * fa) / (fb - fa)
            };
            if !(m > a && m < b) {
                m = (a + b) / two;
                if !(m > a && m < b) {
                    break;
                }
            }
            let (fm, _) = self.theta(m)?;
            if fm == T::zero() {
                return Ok(m);
            }
            if (fm > T::zero()) == (fa > T::zero()) {
                a = m;
                fa = fm;
                if side == -1 {
                    fb = fb / two;
                }
                side = -1;
            } else {
                b = m;
                fb = fm;
                if side == 1 {
                    fa = fa / two;
                }
                side = 1;
            }
        }
        Ok((a + b) / two)
    }

    fn price(&self, lower: T, upper: T) -> Result<Option<T>> {
        let width = T::lit(self.opts.price_tol) * upper.abs().max(T::one());
        if upper < lower {
            return Ok(None);
        }
        let (f_lo, _) = self.theta(lower)?;
        if f_lo == T::zero() || upper == lower {
            return Ok((f_lo == T::zero()).then_some(lower));
        }
        let positive = f_lo > T::zero();
        if self.z.is_comonotonic(&self.x.add(&self.z)?)? {
            let (f_hi, _) = self.theta(upper)?;
            return Ok(if f_hi == T::zero() {
                Some(upper)
            } else if (f_hi > T::zero()) != positive {
                Some(self.refine(lower, upper, f_lo, f_hi, width)?)
            } else {
                None
            });
        }
        let points = self.opts.outer_grid.max(3);
        let nn = T::from_usize(points - 1).unwrap();
        let mut prev = (lower, f_lo);
        for k in 1..points {
            let v = if k == points - 1 {
                upper
            } else {
                lower + (upper - lower) * T::from_usize(k).unwrap() / nn
            };
            let (f, _) = self.theta(v)?;
            if f == T::zero() {
                return Ok(Some(v));
            }
            if (f > T::zero()) != positive {
                return Ok(Some(self.refine(prev.0, v, prev.1, f, width)?));
            }
            prev = (v, f);
        }
        Ok(None)
    }
}

/// Solves the equilibrium for the claim `z` sold into `population`.
pub fn solve_equilibrium<T: Scalar>(
    population: &AgentPopulation<T>,
    z: &RandomVariable<T>,
    options: &EquilibriumOptions<T>,
) -> Result<EquilibriumSolution<T>> {
    let n = population.len();
    let x = population.aggregate()?;
    if !x.same_space(z) {
        return Err(Error::SpaceMismatch);
    }
    let lambda = match &options.lambda {
        Some(l) => {
            let total: T = l.iter().copied().sum();
            if l.len() != n || (total - T::one()).abs() > T::lit(1e-12_f64.max(T::BRACKET_FLOOR)) {
                return Err(Error::param(
                    "lambda",
                    "need one share per agent, summing to 1",
                ));
            }
            l.clone()
        }
        None => vec![T::one() / T::from_usize(n).unwrap(); n],
    };
    let c = x.ess_inf();
    let domain = population.domain();
    if !domain.contains(c) {
        return Err(Error::Precondition(format!(
            "ess_inf X = {c} is outside {domain}"
        )));
    }
    let xz = x.add(z)?;
    let b = xz.ess_inf();
    let lower = z.ess_inf();
    let upper = match domain {
        Domain::FullLine => z.ess_sup(),
        Domain::PositiveHalfLine => {
            let guard = T::lit(1e-9_f64.max(T::BRACKET_FLOOR)) * b.abs().max(T::one());
            z.ess_sup().min(b - guard)
        }
    };
    // γ must be tabulated for every candidate price
    let g_lo = (b - upper).min(c);
    let g_hi = xz.ess_sup() - lower;
    let pad = T::lit(options.margin) * (g_hi - g_lo).max(T::lit(1e-3) * g_hi.abs().max(T::one()));
    let range = match domain {
        Domain::FullLine => (g_lo - pad, g_hi + pad),
        Domain::PositiveHalfLine => (g_lo - pad.min(g_lo / T::lit(2.0)), g_hi + pad),
    };

    let solver = Solver {
        pop: population,
        opts: options,
        x: x.clone(),
        z: z.clone(),
        c,
        range,
        warm: RefCell::new(None),
    };

    let (price, method, inner) = if !options.force_general && population.all_exponential() {
        let (p, inner) = exponential_closed_form(&solver)?;
        (p, SolveMethod::ExponentialClosedForm, inner)
    } else if let Some(eta) = population.common_power().filter(|_| !options.force_general) {
        let (p, inner) = symmetric_power_closed_form(&solver, eta)?;
        (p, SolveMethod::SymmetricPowerClosedForm, inner)
    } else {
        let price = solver.price(lower, upper)?.ok_or_else(|| {
            Error::Precondition("the claim has no fair price in this market".into())
        })?;
        let inner = solver.shoot_warm(price)?;
        (price, SolveMethod::Shooting, inner)
    };

    let total: T = inner.tilt.iter().copied().sum();
    let space = x.space();
    let density = RandomVariable::new(
        space,
        inner
            .tilt
            .iter()
            .zip(x.weights())
            .map(|(&q, &w)| q / (total * w))
            .collect(),
    )?;
    let gammas = solver.gammas(price);
    let ys = gammas
        .iter()
        .map(|&g| inner.table.allocations(g))
        .collect::<Result<Vec<_>>>()?;
    let transfers = (0..n)
        .map(|i| {
            let xi = population.endowments[i].values();
            RandomVariable::new(
                space,
                (0..x.len())
                    .map(|k| -xi[k] + ys[k][i] + lambda[i] * price)
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumSolution {
        price,
        density,
        allocations: inner.table,
        initial: inner.initial,
        transfers,
        lambda,
        method,
        residuals: inner.residuals,
    })
}

/// Tabulates known allocations `𝒴_i(γ) = a_i γ + b_i` with `R = α(γ - c)`.
fn affine_inner<T: Scalar>(
    solver: &Solver<'_, T>,
    v: T,
    slopes: &[T],
    intercepts: &[T],
    r_slope: Option<T>,
    log_eta: Option<T>,
) -> Result<Inner<T>> {
    let (lo, hi) = solver.range;
    let c = solver.c;
    let steps = solver.opts.steps.max(1);
    let gamma: Vec<T> = (0..=steps)
        .map(|k| {
            if k == steps {
                hi
            } else {
                lo + (hi - lo) * T::from_usize(k).unwrap() / T::from_usize(steps).unwrap()
            }
        })
        .collect();
    let r_of = |g: T| match (r_slope, log_eta) {
        (Some(a), _) => (a * (g - c), a),
        (None, Some(eta)) => (eta * (g.ln() - c.ln()), eta / g),
        _ => unreachable!(),
    };
    let table = AllocationTable {
        anchor: c,
        y: gamma
            .iter()
            .map(|&g| {
                slopes
                    .iter()
                    .zip(intercepts)
                    .map(|(&a, &b)| a * g + b)
                    .collect()
            })
            .collect(),
        dy: gamma.iter().map(|_| slopes.to_vec()).collect(),
        r: gamma.iter().map(|&g| r_of(g).0).collect(),
        dr: gamma.iter().map(|&g| r_of(g).1).collect(),
        gamma,
    };
    let initial = slopes
        .iter()
        .zip(intercepts)
        .map(|(&a, &b)| a * c + b)
        .collect::<Vec<_>>();
    let mut inner = solver.evaluate_with_table(v, table)?;
    inner.initial = initial;
    Ok(inner)
}

impl<T: Scalar> Solver<'_, T> {
    fn evaluate_with_table(&self, v: T, table: AllocationTable<T>) -> Result<Inner<T>> {
        let gammas = self.gammas(v);
        let rs: Vec<T> = gammas.iter().map(|&g| table.r(g)).collect::<Result<_>>()?;
        let shift = rs.iter().map(|&r| -r).fold(T::neg_infinity(), T::max);
        let tilt: Vec<T> = rs
            .iter()
            .zip(self.x.weights())
            .map(|(&r, &w)| w * (-r - shift).exp())
            .collect();
        let total: T = tilt.iter().copied().sum();
        let ys: Vec<Vec<T>> = gammas
            .iter()
            .map(|&g| table.allocations(g))
            .collect::<Result<_>>()?;
        let residuals = (0..self.pop.len())
            .map(|i| {
                let xi = self.pop.endowments[i].values();
                tilt.iter()
                    .enumerate()
                    .map(|(k, &q)| q * (ys[k][i] - xi[k]))
                    .sum::<T>()
                    / total
            })
            .collect();
        Ok(Inner {
            table,
            initial: vec![],
            residuals,
            tilt,
        })
    }
}

/// `E^Q[Y]` under `dQ/dP ∝ exp(-α(X + Z))`.
fn tilted_mean<T: Scalar>(x: &RandomVariable<T>, z: &RandomVariable<T>, alpha: T, y: &[T]) -> T {
    let l: Vec<T> = x
        .values()
        .iter()
        .zip(z.values())
        .map(|(&a, &b)| -alpha * (a + b))
        .collect();
    let shift = l.iter().copied().fold(T::neg_infinity(), T::max);
    let (mut num, mut den) = (T::zero(), T::zero());
    for ((&li, &w), &yi) in l.iter().zip(x.weights()).zip(y) {
        let e = w * (li - shift).exp();
        num = num + e * yi;
        den = den + e;
    }
    num / den
}

fn exponential_closed_form<T: Scalar>(solver: &Solver<'_, T>) -> Result<(T, Inner<T>)> {
    let alphas: Vec<T> = solver
        .pop
        .agents
        .iter()
        .map(|a| match a {
            AgentUtility::Exponential { alpha } => *alpha,
            _ => unreachable!(),
        })
        .collect();
    let alpha = alphas.iter().map(|a| a.recip()).sum::<T>().recip();
    let (x, z) = (&solver.x, &solver.z);
    let price = tilted_mean(x, z, alpha, z.values());
    let ex = tilted_mean(x, z, alpha, x.values());
    let slopes: Vec<T> = alphas.iter().map(|&a| alpha / a).collect();
    let intercepts: Vec<T> = solver
        .pop
        .endowments
        .iter()
        .zip(&slopes)
        .map(|(xi, &s)| tilted_mean(x, z, alpha, xi.values()) - s * ex)
        .collect();
    let inner = affine_inner(solver, price, &slopes, &intercepts, Some(alpha), None)?;
    Ok((price, inner))
}

fn symmetric_power_closed_form<T: Scalar>(solver: &Solver<'_, T>, eta: T) -> Result<(T, Inner<T>)> {
    let profile = RiskProfile::log(eta, solver.c)?;
    let problem = crate::clearing::ClearingProblem::new(&solver.x, &solver.z, profile)?;
    let res = problem.clear()?;
    if res.existence == crate::clearing::Existence::LiquidityCapped {
        return Err(Error::Precondition(
            "the claim has no fair price in this market".into(),
        ));
    }
    let price = res.selected;
    // shares θ_i = E^Q[X_i] / E^Q[X] under dQ/dP ∝ (X + Z - v)^{-η}
    let gammas = solver.gammas(price);
    let l: Vec<T> = gammas.iter().map(|&g| -eta * g.ln()).collect();
    let shift = l.iter().copied().fold(T::neg_infinity(), T::max);
    let q: Vec<T> = l
        .iter()
        .zip(solver.x.weights())
        .map(|(&li, &w)| w * (li - shift).exp())
        .collect();
    let mean = |vals: &[T]| q.iter().zip(vals).map(|(&a, &b)| a * b).sum::<T>();
    let ex = mean(solver.x.values());
    let slopes: Vec<T> = solver
        .pop
        .endowments
        .iter()
        .map(|xi| mean(xi.values()) / ex)
        .collect();
    let intercepts = vec![T::zero(); slopes.len()];
    let inner = affine_inner(solver, price, &slopes, &intercepts, None, Some(eta))?;
    Ok((price, inner))
}

/// Profile of the harmonic representative agent along the solved
/// allocations: `R` from the table, `R'(γ) = (Σ_i 1/ρ_i(𝒴_i(γ)))^{-1}`.
/// Defined only on the tabulated range.
pub fn representative_profile<T: Scalar>(
    population: &AgentPopulation<T>,
    solution: &EquilibriumSolution<T>,
) -> Result<RiskProfile<T>> {
    if solution.allocations.y.first().map(|y| y.len()) != Some(population.len()) {
        return Err(Error::InvalidInput(
            "solution does not belong to this population".into(),
        ));
    }
    let table = Arc::new(solution.allocations.clone());
    let agents: Arc<Vec<AgentUtility<T>>> = Arc::new(population.agents.clone());
    let t1 = Arc::clone(&table);
    let r = move |g: T| t1.r(g).unwrap_or(T::nan());
    let r_prime = move |g: T| match table.allocations(g) {
        Ok(y) => agents
            .iter()
            .zip(&y)
            .map(|(a, &yi)| a.rho(yi).recip())
            .sum::<T>()
            .recip(),
        Err(_) => T::nan(),
    };
    let support = solution.allocations.range();
    let domain = population.domain();
    Ok(RiskProfile::tabulated(
        r,
        r_prime,
        domain,
        domain == Domain::PositiveHalfLine,
        support,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{esscher_price, EsscherMarket};
    use crate::scenario::ScenarioSpace;

    fn space3() -> Arc<crate::scenario::ScenarioSpace<f64>> {
        ScenarioSpace::new(vec![0.2, 0.5, 0.3]).unwrap()
    }

    fn rv(space: &Arc<ScenarioSpace<f64>>, v: &[f64]) -> RandomVariable<f64> {
        RandomVariable::new(space, v.to_vec()).unwrap()
    }

    #[test]
    fn single_agent_takes_everything() {
        let s = space3();
        let pop = AgentPopulation::new(vec![(
            AgentUtility::power(0.5).unwrap(),
            rv(&s, &[1.0, 2.0, 3.0]),
        )])
        .unwrap();
        let t = integrate_allocations(&pop, &[1.0], 1.0, (0.5, 4.0), 1000).unwrap();
        for g in [0.5, 1.0, 2.7, 4.0] {
            assert!((t.allocations(g).unwrap()[0] - g).abs() < 1e-12);
        }
        let z = RandomVariable::constant(&s, 0.0).unwrap();
        let sol = solve_equilibrium(
            &pop,
            &z,
            &EquilibriumOptions {
                force_general: true,
                ..Default::default()
            },
        )
        .unwrap();
        for y in sol.transfers[0].values() {
            assert!(y.abs() < 1e-10);
        }
    }

    #[test]
    fn exponential_allocations_are_affine() {
        let s = space3();
        let x = rv(&s, &[0.0, 1.0, 2.0]);
        let pop = AgentPopulation::new(vec![
            (AgentUtility::exponential(1.0).unwrap(), x.clone()),
            (AgentUtility::exponential(3.0).unwrap(), x.clone()),
        ])
        .unwrap();
        let t = integrate_allocations(&pop, &[0.2, -0.2], 0.0, (-2.0, 5.0), 2000).unwrap();
        let alpha = 1.0 / (1.0 + 1.0 / 3.0);
        for g in [-2.0, -0.3, 0.0, 1.1, 5.0] {
            let y = t.allocations(g).unwrap();
            assert!((y[0] - (0.2 + alpha * g)).abs() < 1e-12);
            assert!((y[1] - (-0.2 + alpha / 3.0 * g)).abs() < 1e-12);
            assert!((t.r(g).unwrap() - alpha * g).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_power_agents_split_evenly() {
        let s = space3();
        let x = rv(&s, &[1.0, 2.0, 3.0]);
        let pop = AgentPopulation::new(vec![
            (AgentUtility::power(0.7).unwrap(), x.clone()),
            (AgentUtility::power(0.7).unwrap(), x.clone()),
            (AgentUtility::power(0.7).unwrap(), x.clone()),
        ])
        .unwrap();
        let t = integrate_allocations(&pop, &[1.0, 1.0, 1.0], 3.0, (0.5, 12.0), 4000).unwrap();
        for g in [0.5, 3.0, 7.0, 12.0] {
            for y in t.allocations(g).unwrap() {
                assert!((y - g / 3.0).abs() < 1e-10);
            }
            assert!((t.r(g).unwrap() - 0.7 / 3.0 * (g / 3.0f64).ln() * 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn exponential_equilibrium_matches_esscher_and_general_solver() {
        let s = space3();
        let pop = AgentPopulation::new(vec![
            (
                AgentUtility::exponential(1.0).unwrap(),
                rv(&s, &[1.0, 0.5, 2.0]),
            ),
            (
                AgentUtility::exponential(2.0).unwrap(),
                rv(&s, &[1.0, 2.0, 0.0]),
            ),
            (
                AgentUtility::exponential(4.0).unwrap(),
                rv(&s, &[1.0, 0.5, 1.0]),
            ),
        ])
        .unwrap();
        let z = rv(&s, &[0.3, -0.2, 1.5]);
        let market = EsscherMarket::from_agents(&[1.0, 2.0, 4.0]).unwrap();
        let fast = solve_equilibrium(&pop, &z, &EquilibriumOptions::default()).unwrap();
        assert_eq!(fast.method, SolveMethod::ExponentialClosedForm);
        // X ≡ 3 is deterministic
        assert!((fast.price - esscher_price(&market, &z)).abs() < 1e-12);
        let slow = solve_equilibrium(
            &pop,
            &z,
            &EquilibriumOptions {
                force_general: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(slow.method, SolveMethod::Shooting);
        assert!(
            (slow.price - fast.price).abs() < 1e-8,
            "{} vs {}",
            slow.price,
            fast.price
        );
        for k in 0..3 {
            let sum: f64 = slow.transfers.iter().map(|t| t.values()[k]).sum();
            assert!((sum - z.values()[k]).abs() < 1e-8);
            assert!((slow.density.values()[k] - fast.density.values()[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn heterogeneous_power_population_satisfies_first_order_conditions() {
        let s = space3();
        let pop = AgentPopulation::new(vec![
            (AgentUtility::power(0.5).unwrap(), rv(&s, &[1.0, 2.0, 1.5])),
            (AgentUtility::power(1.0).unwrap(), rv(&s, &[2.0, 0.5, 1.0])),
        ])
        .unwrap();
        let z = rv(&s, &[0.2, 0.6, 0.1]);
        let sol = solve_equilibrium(&pop, &z, &EquilibriumOptions::default()).unwrap();
        let x = pop.aggregate().unwrap();
        for (i, a) in pop.agents().iter().enumerate() {
            let xi = pop.endowments()[i].values();
            let yi = sol.transfers[i].values();
            let ey: f64 = sol
                .density
                .values()
                .iter()
                .zip(x.weights())
                .zip(yi)
                .map(|((d, w), y)| d * w * y)
                .sum();
            let mu: Vec<f64> = (0..3)
                .map(|k| {
                    a.log_marginal_utility(xi[k] + yi[k] - ey, 1.0)
                        .unwrap()
                        .exp()
                })
                .collect();
            let emu: f64 = mu.iter().zip(x.weights()).map(|(m, w)| m * w).sum();
            for k in 0..3 {
                assert!((mu[k] / emu - sol.density.values()[k]).abs() < 1e-6);
            }
        }
        let profile = representative_profile(&pop, &sol).unwrap();
        let again = crate::clearing::ClearingProblem::new(&x, &z, profile)
            .unwrap()
            .clear()
            .unwrap();
        assert!((again.selected - sol.price).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_populations() {
        let s = space3();
        let x = rv(&s, &[1.0, 2.0, 3.0]);
        assert!(AgentPopulation::new(vec![
            (AgentUtility::exponential(1.0).unwrap(), x.clone()),
            (AgentUtility::power(0.5).unwrap(), x.clone()),
        ])
        .is_err());
        assert!(
            AgentPopulation::new(vec![(AgentUtility::power(1.5).unwrap(), x.clone())]).is_err()
        );
        assert!(AgentPopulation::new(vec![(
            AgentUtility::power(0.5).unwrap(),
            rv(&s, &[0.0, 1.0, 2.0])
        )])
        .is_err());
        assert!(AgentPopulation::<f64>::new(vec![]).is_err());
    }
}
