//! Inverse demand functions for proportional liquidation of a portfolio `q`.
//!
//! Selling `s` units of `q` realizes `V̄(sq)`. The volume weighted average
//! price is `f̄(s) = V̄(sq)/s` and the order book density `f(s)` is the
//! marginal price, computed from the tilted ratio with weights
//! `(1 - (sq - v) R'(X + sq - v)) e^{-R(X + sq - v)}` at `v = V̄(sq)`.

use serde::Serialize;

use crate::clearing::{ClearingProblem, Existence, ExistenceDiagnosis, RootOptions};
use crate::error::{Error, Result};
use crate::kernel::{map_grid, tilted_sums};
use crate::risk_profile::{Domain, RiskProfile};
use crate::scalar::{cmp, Scalar};
use crate::scenario::RandomVariable;

/// Relative width to which the domain boundary is bisected.
pub const BOUNDARY_REL_TOL: f64 = 1e-6;

/// Both inverse demand functions on a grid of liquidation sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandCurve<T> {
    pub s_grid: Vec<T>,
    pub f: Vec<T>,
    pub f_bar: Vec<T>,
    pub in_domain: Vec<bool>,
    /// First `s` at which `sq` has no fair price (half-line profiles only).
    pub dom_boundary: Option<T>,
}

/// Prices at a single liquidation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemandPoint<T> {
    pub s: T,
    pub f: T,
    pub f_bar: T,
    pub in_domain: bool,
}

/// Aggregate endowment `X`, liquidated portfolio `q` and profile `R`.
#[derive(Debug, Clone)]
pub struct Liquidation<T> {
    x: RandomVariable<T>,
    q: RandomVariable<T>,
    profile: RiskProfile<T>,
    options: RootOptions,
    ln_w: Vec<T>,
}

impl<T: Scalar> Liquidation<T> {
    /// On half-line profiles the joint ruin condition
    /// `ess_inf(X + q) = ess_inf X + ess_inf q` is required.
    pub fn new(
        x: &RandomVariable<T>,
        q: &RandomVariable<T>,
        profile: RiskProfile<T>,
    ) -> Result<Self> {
        if !x.same_space(q) {
            return Err(Error::SpaceMismatch);
        }
        if profile.domain() == Domain::PositiveHalfLine {
            check_joint_ruin(x, std::slice::from_ref(q), &[T::one()])?;
        }
        // canonical order, shared by every evaluation
        let (xv, qv, w) = (x.values(), q.values(), x.weights());
        let mut perm: Vec<usize> = (0..x.len()).collect();
        perm.sort_by(|&i, &j| {
            cmp(xv[i], xv[j])
                .then(cmp(qv[i], qv[j]))
                .then(cmp(w[i], w[j]))
        });
        let (space, xs) = x.permute(&perm)?;
        let (_, qs) = q.permute(&perm)?;
        let qs = qs.rebase(&space)?;
        let ln_w = space.weights().iter().map(|w| w.ln()).collect();
        Ok(Liquidation {
            x: xs,
            q: qs,
            profile,
            options: RootOptions::default(),
            ln_w,
        })
    }

    pub fn with_options(mut self, options: RootOptions) -> Self {
        self.options = options;
        self
    }

    pub fn x(&self) -> &RandomVariable<T> {
        &self.x
    }

    pub fn q(&self) -> &RandomVariable<T> {
        &self.q
    }

    pub fn profile(&self) -> &RiskProfile<T> {
        &self.profile
    }

    /// Clearing problem for the claim `sq`.
    pub fn problem(&self, s: T) -> Result<ClearingProblem<T>> {
        if !(s >= T::zero() && s.is_finite()) {
            return Err(Error::param(
                "s",
                format!("must be finite and >= 0, got {s}"),
            ));
        }
        ClearingProblem::new(&self.x, &self.q.scale(s), self.profile.clone())
    }

    /// `Σ w m q e^{-R} / Σ w m e^{-R}` at `X + sq - v`, where `m = 1` for the
    /// tilted mean and `m = 1 - (sq - v) R'` for the order book density.
    fn ratio(&self, s: T, v: T, density: bool) -> Result<T> {
        let (xs, qs) = (self.x.values(), self.q.values());
        let p = &self.profile;
        let (_, [den, num]) = tilted_sums(xs.len(), |i| {
            let z = s * qs[i];
            let arg = xs[i] + z - v;
            let r = p.r(arg);
            if !p.in_domain(arg) || r.is_nan() {
                return Err(Error::Domain {
                    scenario: i,
                    value: arg.as_f64(),
                    domain: p.domain().to_string(),
                });
            }
            let m = if density {
                T::one() - (z - v) * p.r_prime(arg)
            } else {
                T::one()
            };
            Ok((self.ln_w[i] - r, [m, m * qs[i]]))
        })?;
        if !(den > T::zero()) {
            return Err(Error::Precondition(format!(
                "order book weights sum to {den} at s = {s}; no uniqueness condition holds"
            )));
        }
        Ok(num / den)
    }

    /// `E[q e^{-R(X)}] / E[e^{-R(X)}]`, the common value of both curves at 0.
    pub fn price_at_zero(&self) -> Result<T> {
        self.ratio(T::zero(), T::zero(), false)
    }

    /// Both curves at `s`, from a single clearing solve.
    pub fn point(&self, s: T) -> Result<DemandPoint<T>> {
        if s == T::zero() {
            let m = self.price_at_zero()?;
            return Ok(DemandPoint {
                s,
                f: m,
                f_bar: m,
                in_domain: true,
            });
        }
        let res = self.problem(s)?.clear_with(self.options)?;
        let f_bar = res.selected / s;
        if res.existence == Existence::LiquidityCapped {
            return Ok(DemandPoint {
                s,
                f: self.q.ess_inf(),
                f_bar,
                in_domain: false,
            });
        }
        Ok(DemandPoint {
            s,
            f: self.ratio(s, res.selected, true)?,
            f_bar,
            in_domain: true,
        })
    }

    /// `f̄(s)`.
    pub fn vwap(&self, s: T) -> Result<T> {
        if s == T::zero() {
            return self.price_at_zero();
        }
        Ok(self.problem(s)?.clear_with(self.options)?.selected / s)
    }

    /// `f(s)`.
    pub fn order_book_density(&self, s: T) -> Result<T> {
        Ok(self.point(s)?.f)
    }

    /// `true` unless `sq` provably has no fair price.
    pub fn has_fair_price(&self, s: T) -> Result<bool> {
        if self.profile.domain() == Domain::FullLine || s == T::zero() {
            return Ok(true);
        }
        Ok(self.problem(s)?.existence_diagnosis() != ExistenceDiagnosis::BoundaryFails)
    }

    /// Both curves on `n_points` equally spaced sizes in `[0, s_max]`.
    pub fn demand_curve(&self, s_max: T, n_points: usize) -> Result<DemandCurve<T>> {
        if n_points < 2 {
            return Err(Error::param("n_points", "need at least 2 points"));
        }
        if !(s_max > T::zero() && s_max.is_finite()) {
            return Err(Error::param("s_max", "must be finite and > 0"));
        }
        let n = T::from_usize(n_points - 1).unwrap();
        let grid: Vec<T> = (0..n_points)
            .map(|k| {
                if k == n_points - 1 {
                    s_max
                } else {
                    s_max * T::from_usize(k).unwrap() / n
                }
            })
            .collect();
        self.curve_on(&grid)
    }

    /// Both curves on an explicit nondecreasing grid of sizes.
    pub fn curve_on(&self, grid: &[T]) -> Result<DemandCurve<T>> {
        if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::param(
                "s_grid",
                "must be nondecreasing and nonnegative",
            ));
        }
        let points = map_grid(grid, |&s| self.point(s))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let dom_boundary = self.locate_boundary(grid)?;
        Ok(DemandCurve {
            s_grid: grid.to_vec(),
            f: points.iter().map(|p| p.f).collect(),
            f_bar: points.iter().map(|p| p.f_bar).collect(),
            in_domain: points.iter().map(|p| p.in_domain).collect(),
            dom_boundary,
        })
    }

    /// Bisects the first grid cell where `has_fair_price` switches off.
    fn locate_boundary(&self, grid: &[T]) -> Result<Option<T>> {
        if self.profile.domain() == Domain::FullLine {
            return Ok(None);
        }
        let flags = map_grid(grid, |&s| self.has_fair_price(s))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let Some(k) = flags.iter().position(|ok| !ok) else {
            return Ok(None);
        };
        if k == 0 {
            return Ok(Some(grid[0]));
        }
        let (mut lo, mut hi) = (grid[k - 1], grid[k]);
        let two = T::lit(2.0);
        let rel = T::lit(BOUNDARY_REL_TOL.max(T::BRACKET_FLOOR));
        while hi - lo > rel * hi {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.has_fair_price(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some((lo + hi) / two))
    }

    /// Slopes `(f'(0), f̄'(0))` at zero.
    pub fn liquidity_at_zero(&self) -> Result<(T, T)> {
        let (xs, qs) = (self.x.values(), self.q.values());
        let p = &self.profile;
        let (_, [a, b1, b2, c1, d]) = tilted_sums(xs.len(), |i| {
            let x = xs[i];
            if !p.in_domain(x) {
                return Err(Error::Domain {
                    scenario: i,
                    value: x.as_f64(),
                    domain: p.domain().to_string(),
                });
            }
            let rp = p.r_prime(x);
            let q = qs[i];
            Ok((self.ln_w[i] - p.r(x), [T::one(), q, q * q * rp, q * rp, rp]))
        })?;
        let two = T::lit(2.0);
        let slope =
            -two * b2 / a + T::lit(4.0) * b1 * c1 / (a * a) - two * b1 * b1 * d / (a * a * a);
        Ok((slope, slope / two))
    }
}

fn check_joint_ruin<T: Scalar>(
    x: &RandomVariable<T>,
    qs: &[RandomVariable<T>],
    s: &[T],
) -> Result<()> {
    let z = RandomVariable::linear_combination(s, qs)?;
    let joint = x.add(&z)?.ess_inf();
    let split = x.ess_inf() + s.iter().zip(qs).map(|(&c, q)| c * q.ess_inf()).sum::<T>();
    let tol = T::lit(1e-12_f64.max(T::BRACKET_FLOOR)) * split.abs().max(T::one());
    if (joint - split).abs() > tol {
        return Err(Error::Precondition(format!(
            "joint ruin condition fails: ess_inf(X + s·q) = {joint} but ess_inf X + s·ess_inf q = {split}"
        )));
    }
    Ok(())
}

/// `f̄(s)` for the claim `sq`.
pub fn vwap<T: Scalar>(liq: &Liquidation<T>, s: T) -> Result<T> {
    liq.vwap(s)
}

/// `f(s)` for the claim `sq`.
pub fn order_book_density<T: Scalar>(liq: &Liquidation<T>, s: T) -> Result<T> {
    liq.order_book_density(s)
}

pub fn demand_curve<T: Scalar>(
    liq: &Liquidation<T>,
    s_max: T,
    n_points: usize,
) -> Result<DemandCurve<T>> {
    liq.demand_curve(s_max, n_points)
}

pub fn liquidity_at_zero<T: Scalar>(liq: &Liquidation<T>) -> Result<(T, T)> {
    liq.liquidity_at_zero()
}

/// Per-asset prices at one node of a cross-impact grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossImpactNode<T> {
    pub s: Vec<T>,
    pub f: Vec<T>,
    pub f_bar: Vec<T>,
    pub in_domain: bool,
}

/// Evaluates `f_k` and `f̄_k` for every asset over the Cartesian product of
/// `s_grids`, pricing the scalar claim `sᵀq` at each node. Nodes are listed
/// with the first asset varying slowest.
///
/// Outside the domain of fair prices the cap `ess_inf(X + sᵀq)` is shared
/// pro rata: `f̄_k = ess_inf q_k + ess_inf X / Σ_j s_j` and `f_k = ess_inf q_k`.
pub fn cross_impact_grid<T: Scalar>(
    x: &RandomVariable<T>,
    qs: &[RandomVariable<T>],
    profile: &RiskProfile<T>,
    s_grids: &[Vec<T>],
) -> Result<Vec<CrossImpactNode<T>>> {
    if qs.is_empty() || qs.len() != s_grids.len() {
        return Err(Error::InvalidInput("need one s-grid per asset".into()));
    }
    if qs.iter().any(|q| !q.same_space(x)) {
        return Err(Error::SpaceMismatch);
    }
    if s_grids
        .iter()
        .flatten()
        .any(|s| !(*s >= T::zero() && s.is_finite()))
    {
        return Err(Error::param("s_grid", "entries must be finite and >= 0"));
    }
    if qs.len() == 1 {
        let liq = Liquidation::new(x, &qs[0], profile.clone())?;
        let curve = liq.curve_on(&s_grids[0])?;
        return Ok((0..curve.s_grid.len())
            .map(|k| CrossImpactNode {
                s: vec![curve.s_grid[k]],
                f: vec![curve.f[k]],
                f_bar: vec![curve.f_bar[k]],
                in_domain: curve.in_domain[k],
            })
            .collect());
    }
    let mut nodes: Vec<Vec<T>> = vec![vec![]];
    for g in s_grids {
        nodes = nodes
            .into_iter()
            .flat_map(|prefix| {
                g.iter().map(move |&s| {
                    let mut v = prefix.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    let ln_w: Vec<T> = x.weights().iter().map(|w| w.ln()).collect();
    map_grid(&nodes, |s| cross_node(x, qs, profile, &ln_w, s))
        .into_iter()
        .collect()
}

fn cross_node<T: Scalar>(
    x: &RandomVariable<T>,
    qs: &[RandomVariable<T>],
    profile: &RiskProfile<T>,
    ln_w: &[T],
    s: &[T],
) -> Result<CrossImpactNode<T>> {
    if profile.domain() == Domain::PositiveHalfLine {
        check_joint_ruin(x, qs, s)?;
    }
    let z = RandomVariable::linear_combination(s, qs)?;
    let total: T = s.iter().copied().sum();
    let res = ClearingProblem::new(x, &z, profile.clone())?.clear()?;
    let m = qs.len();
    if res.existence == Existence::LiquidityCapped {
        let f: Vec<T> = qs.iter().map(|q| q.ess_inf()).collect();
        let cash = res.selected - s.iter().zip(&f).map(|(&a, &b)| a * b).sum::<T>();
        return Ok(CrossImpactNode {
            s: s.to_vec(),
            f_bar: f.iter().map(|&lo| lo + cash / total).collect(),
            f,
            in_domain: false,
        });
    }
    let v = res.selected;
    let (xs, zs) = (x.values(), z.values());
    let mut f = Vec::with_capacity(m);
    let mut f_bar = Vec::with_capacity(m);
    for q in qs {
        let qv = q.values();
        let (_, [den, num, den_d, num_d]) = tilted_sums(xs.len(), |i| {
            let arg = xs[i] + zs[i] - v;
            let r = profile.r(arg);
            if !profile.in_domain(arg) || r.is_nan() {
                return Err(Error::Domain {
                    scenario: i,
                    value: arg.as_f64(),
                    domain: profile.domain().to_string(),
                });
            }
            let d = T::one() - (zs[i] - v) * profile.r_prime(arg);
            Ok((ln_w[i] - r, [T::one(), qv[i], d, d * qv[i]]))
        })?;
        if !(den_d > T::zero()) {
            return Err(Error::Precondition(format!(
                "order book weights sum to {den_d}; no uniqueness condition holds"
            )));
        }
        f_bar.push(num / den);
        f.push(num_d / den_d);
    }
    Ok(CrossImpactNode {
        s: s.to_vec(),
        f,
        f_bar,
        in_domain: true,
    })
}
