//! Esscher pricing and the inverse demand functions of the exponential-utility
//! market, in closed form.
//!
//! With aggregated risk aversion `α = (Σ 1/α_i)^{-1}` the price of `Z` is the
//! Esscher premium `E[Z e^{-αZ}] / E[e^{-αZ}]`, and for a portfolio `q`
//!
//! ```text
//! f̄(s) = E[q e^{-αsq}] / E[e^{-αsq}],   f(s) = f̄(s) - αs Var^{Q_s}(q).
//! ```
//!
//! These functions take law parameters directly and share no code with the
//! numerical engine. The normal case is admitted although normal payoffs are
//! unbounded; general engine guarantees do not cover it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::cholesky_psd;
use crate::scalar::Scalar;
use crate::scenario::RandomVariable;

/// Exponential-utility market with aggregated risk aversion `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsscherMarket<T> {
    pub alpha: T,
}

impl<T: Scalar> EsscherMarket<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(EsscherMarket { alpha })
    }

    /// Market formed by agents with risk aversions `alphas`.
    pub fn from_agents(alphas: &[T]) -> Result<Self> {
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > T::zero() && a.is_finite())) {
            return Err(Error::param(
                "alphas",
                "need at least one positive risk aversion",
            ));
        }
        Self::new(alphas.iter().map(|a| a.recip()).sum::<T>().recip())
    }
}

/// `E[Z e^{-αZ}] / E[e^{-αZ}]`.
pub fn esscher_price<T: Scalar>(market: &EsscherMarket<T>, z: &RandomVariable<T>) -> T {
    let a = market.alpha;
    let shift = z
        .values()
        .iter()
        .map(|&v| -a * v)
        .fold(T::neg_infinity(), T::max);
    let (mut num, mut den) = (T::zero(), T::zero());
    for (&v, &w) in z.values().iter().zip(z.weights()) {
        let e = w * (-a * v - shift).exp();
        num = num + e * v;
        den = den + e;
    }
    num / den
}

fn check_s<T: Scalar>(s: T) -> Result<()> {
    if s >= T::zero() && s.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "s",
            format!("must be finite and >= 0, got {s}"),
        ))
    }
}

/// `q ~ N(μ, C)`: `f = μ - 2αCs`, `f̄ = μ - αCs`.
pub fn normal_curves<T: Scalar>(
    market: &EsscherMarket<T>,
    mu: &[T],
    cov: &[Vec<T>],
    s: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let m = mu.len();
    if cov.len() != m || s.len() != m {
        return Err(Error::InvalidInput(
            "mu, C and s must have matching dimensions".into(),
        ));
    }
    let c64: Vec<Vec<f64>> = cov
        .iter()
        .map(|row| row.iter().map(|v| v.as_f64()).collect())
        .collect();
    cholesky_psd(&c64)?;
    let a = market.alpha;
    let two = T::lit(2.0);
    let cs: Vec<T> = cov
        .iter()
        .map(|row| row.iter().zip(s).map(|(&c, &x)| c * x).sum())
        .collect();
    let f = mu.iter().zip(&cs).map(|(&m, &c)| m - two * a * c).collect();
    let f_bar = mu.iter().zip(&cs).map(|(&m, &c)| m - a * c).collect();
    Ok((f, f_bar))
}

/// `q ~ Pois(λ)`: `f = (1 - αs) λ e^{-αs}`, `f̄ = λ e^{-αs}`.
pub fn poisson_curves<T: Scalar>(market: &EsscherMarket<T>, lambda: T, s: T) -> Result<(T, T)> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be > 0"));
    }
    check_s(s)?;
    let a = market.alpha;
    let f_bar = lambda * (-a * s).exp();
    Ok(((T::one() - a * s) * f_bar, f_bar))
}

/// `q ~ Bernoulli(p)`:
/// `f̄ = p / (p + (1-p)e^{αs})`,
/// `f = (p² + (1-αs) p(1-p) e^{αs}) / (p + (1-p)e^{αs})²`.
pub fn bernoulli_curves<T: Scalar>(market: &EsscherMarket<T>, p: T, s: T) -> Result<(T, T)> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::param("p", "must lie in [0, 1]"));
    }
    check_s(s)?;
    let a = market.alpha;
    let one = T::one();
    let e = (a * s).exp();
    let d = p + (one - p) * e;
    if p == T::zero() {
        return Ok((T::zero(), T::zero()));
    }
    let f_bar = p / d;
    let f = (p * p + (one - a * s) * p * (one - p) * e) / (d * d);
    Ok((f, f_bar))
}

/// `q ~ Gamma(k, θ)`: `f = kθ / (1 + αθs)²`, `f̄ = kθ / (1 + αθs)`.
pub fn gamma_curves<T: Scalar>(market: &EsscherMarket<T>, k: T, theta: T, s: T) -> Result<(T, T)> {
    if !(k > T::zero() && k.is_finite()) {
        return Err(Error::param("k", "must be > 0"));
    }
    if !(theta > T::zero() && theta.is_finite()) {
        return Err(Error::param("theta", "must be > 0"));
    }
    check_s(s)?;
    let d = T::one() + market.alpha * theta * s;
    let f_bar = k * theta / d;
    Ok((f_bar / d, f_bar))
}

/// Tilted moments of a finite law under `Q_s ∝ e^{-αsq}`: returns
/// `(mean, variance, third central moment)`.
fn tilted_moments<T: Scalar>(a: T, support: &[T], probs: &[T], s: T) -> (T, T, T) {
    let shift = support
        .iter()
        .map(|&q| -a * s * q)
        .fold(T::neg_infinity(), T::max);
    let w: Vec<T> = support
        .iter()
        .zip(probs)
        .map(|(&q, &p)| p * (-a * s * q - shift).exp())
        .collect();
    let total: T = w.iter().copied().sum();
    let mean = support.iter().zip(&w).map(|(&q, &w)| w * q).sum::<T>() / total;
    let var = support
        .iter()
        .zip(&w)
        .map(|(&q, &w)| w * (q - mean).powi(2))
        .sum::<T>()
        / total;
    let m3 = support
        .iter()
        .zip(&w)
        .map(|(&q, &w)| w * (q - mean).powi(3))
        .sum::<T>()
        / total;
    (mean, var, m3)
}

fn check_discrete<T: Scalar>(support: &[T], probs: &[T]) -> Result<()> {
    if support.is_empty() || support.len() != probs.len() {
        return Err(Error::InvalidInput(
            "support and probabilities must have equal, nonzero length".into(),
        ));
    }
    if probs.iter().any(|p| !(*p >= T::zero())) || support.iter().any(|q| !q.is_finite()) {
        return Err(Error::InvalidInput(
            "probabilities must be >= 0 and support finite".into(),
        ));
    }
    let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
    if (total - 1.0).abs() > T::WEIGHT_TOLERANCE {
        return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Finite law `P(q = support_i) = probs_i`: `f̄ = E^Q[q]`, `f = f̄ - αs Var^Q(q)`.
pub fn discrete_curves<T: Scalar>(
    market: &EsscherMarket<T>,
    support: &[T],
    probs: &[T],
    s: T,
) -> Result<(T, T)> {
    check_discrete(support, probs)?;
    check_s(s)?;
    let (mean, var, _) = tilted_moments(market.alpha, support, probs, s);
    Ok((mean - market.alpha * s * var, mean))
}

/// `f̄''(s) = α² E^Q[(q - f̄)³]` for a finite law.
pub fn discrete_vwap_curvature<T: Scalar>(
    market: &EsscherMarket<T>,
    support: &[T],
    probs: &[T],
    s: T,
) -> Result<T> {
    check_discrete(support, probs)?;
    check_s(s)?;
    let (_, _, m3) = tilted_moments(market.alpha, support, probs, s);
    Ok(market.alpha * market.alpha * m3)
}

/// Support of the nonconvexity example.
pub const COUNTEREXAMPLE_SUPPORT: [f64; 3] = [0.0, 1.0, 16.0];
/// Probabilities of the nonconvexity example.
pub const COUNTEREXAMPLE_PROBS: [f64; 3] = [0.02, 0.49, 0.49];

/// Summary of a positively skewed payoff whose VWAP is not convex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleReport<T> {
    pub variance: T,
    pub third_central_moment: T,
    pub skewness: T,
    /// Evaluation point `1/α`.
    pub s: T,
    pub f_bar: T,
    /// `α² E^Q[(q - f̄)³]` at `s`.
    pub curvature: T,
    /// Central second difference of `f̄` at `s` with step `10^{-3}/α`.
    pub second_difference: T,
}

pub fn discrete_counterexample_report<T: Scalar>(
    market: &EsscherMarket<T>,
) -> Result<CounterexampleReport<T>> {
    let support = COUNTEREXAMPLE_SUPPORT.map(T::lit);
    let probs = COUNTEREXAMPLE_PROBS.map(T::lit);
    let (_, variance, third) = tilted_moments(market.alpha, &support, &probs, T::zero());
    let s = market.alpha.recip();
    let h = T::lit(1e-3) * s;
    let fb = |t: T| discrete_curves(market, &support, &probs, t).map(|(_, fb)| fb);
    let f_bar = fb(s)?;
    let second_difference = (fb(s + h)? - T::lit(2.0) * f_bar + fb(s - h)?) / (h * h);
    Ok(CounterexampleReport {
        variance,
        third_central_moment: third,
        skewness: third / variance.powf(T::lit(1.5)),
        s,
        f_bar,
        curvature: discrete_vwap_curvature(market, &support, &probs, s)?,
        second_difference,
    })
}
