//! Integrated representative risk aversion `R`, its derivative and domain.
//!
//! Pricing formulas consume `R` directly: the `1/n` factor and the lower
//! integration limit of the harmonic representative agent are folded into
//! the profile, which is normalized so that `R(x_ref) = 0`. Prices do not
//! depend on that additive constant.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Scalar;

/// Default number of points used to validate custom profiles.
pub const VALIDATION_POINTS: usize = 1024;

/// Domain of the profile (and of the underlying utilities).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    FullLine,
    PositiveHalfLine,
}

impl Domain {
    pub fn contains<T: Scalar>(self, x: T) -> bool {
        match self {
            Domain::FullLine => x.is_finite(),
            Domain::PositiveHalfLine => x.is_finite() && x > T::zero(),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::FullLine => write!(f, "the real line"),
            Domain::PositiveHalfLine => write!(f, "the positive half-line"),
        }
    }
}

/// Which family a profile belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind<T> {
    /// `R(x) = α (x - x_ref)`.
    Linear { alpha: T, x_ref: T },
    /// `R(x) = η (log x - log x_ref)`.
    Log { eta: T, x_ref: T },
    /// `R(x) = 1 - exp(shift - x)`.
    Saturating { shift: T },
    /// Caller supplied function pair.
    Custom,
    /// Built from tabulated equilibrium allocations.
    Tabulated,
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Strictly increasing, differentiable, concave function `R` on its domain.
#[derive(Clone)]
pub struct RiskProfile<T> {
    domain: Domain,
    kind: ProfileKind<T>,
    r: ScalarFn<T>,
    r_prime: ScalarFn<T>,
    lower_singularity: bool,
    support: Option<(T, T)>,
}

impl<T: fmt::Debug> fmt::Debug for RiskProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiskProfile")
            .field("domain", &self.domain)
            .field("kind", &self.kind)
            .field("lower_singularity", &self.lower_singularity)
            .field("support", &self.support)
            .finish()
    }
}

impl<T: Scalar> RiskProfile<T> {
    /// Exponential-utility market: `R(x) = α(x - x_ref)` on the real line.
    pub fn linear(alpha: T, x_ref: T) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        if !x_ref.is_finite() {
            return Err(Error::param("x_ref", "must be finite"));
        }
        Ok(RiskProfile {
            domain: Domain::FullLine,
            kind: ProfileKind::Linear { alpha, x_ref },
            r: Arc::new(move |x| alpha * (x - x_ref)),
            r_prime: Arc::new(move |_| alpha),
            lower_singularity: false,
            support: None,
        })
    }

    /// Power-utility market: `R(x) = η(log x - log x_ref)` on the positive
    /// half-line. `η = 0` is the risk-neutral market with `R ≡ 0`.
    pub fn log(eta: T, x_ref: T) -> Result<Self> {
        if !(eta.is_finite() && eta >= T::zero()) {
            return Err(Error::param("eta", format!("must be >= 0, got {eta}")));
        }
        if !(x_ref.is_finite() && x_ref > T::zero()) {
            return Err(Error::param("x_ref", format!("must be > 0, got {x_ref}")));
        }
        let (r, r_prime): (ScalarFn<T>, ScalarFn<T>) = if eta == T::zero() {
            (Arc::new(|_| T::zero()), Arc::new(|_| T::zero()))
        } else {
            let log_ref = x_ref.ln();
            (
                Arc::new(move |x: T| eta * (x.ln() - log_ref)),
                Arc::new(move |x: T| eta / x),
            )
        };
        Ok(RiskProfile {
            domain: Domain::PositiveHalfLine,
            kind: ProfileKind::Log { eta, x_ref },
            r,
            r_prime,
            lower_singularity: eta > T::zero(),
            support: None,
        })
    }

    /// `R(z) = 1 - exp(shift - z)` on the real line: bounded above, with
    /// aversion vanishing for large wealth. Validated like a custom profile on
    /// `interval`.
    pub fn saturating(shift: T, interval: (T, T)) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::param("shift", "must be finite"));
        }
        let mut p = Self::custom(
            move |z: T| T::one() - (shift - z).exp(),
            move |z: T| (shift - z).exp(),
            Domain::FullLine,
            false,
            interval,
        )?;
        p.kind = ProfileKind::Saturating { shift };
        Ok(p)
    }

    /// Wraps a caller supplied `R` and its exact derivative.
    ///
    /// The pair is validated on [`VALIDATION_POINTS`] points of `interval`:
    /// `R` increasing, `R'` positive and nonincreasing, and `R'` consistent
    /// with central finite differences of `R`.
    pub fn custom(
        r: impl Fn(T) -> T + Send + Sync + 'static,
        r_prime: impl Fn(T) -> T + Send + Sync + 'static,
        domain: Domain,
        lower_singularity: bool,
        interval: (T, T),
    ) -> Result<Self> {
        let profile = RiskProfile {
            domain,
            kind: ProfileKind::Custom,
            r: Arc::new(r),
            r_prime: Arc::new(r_prime),
            lower_singularity,
            support: None,
        };
        profile.validate_on_grid(interval.0, interval.1, VALIDATION_POINTS)?;
        Ok(profile)
    }

    /// Profile backed by tabulated data, defined only on `support`.
    pub(crate) fn tabulated(
        r: impl Fn(T) -> T + Send + Sync + 'static,
        r_prime: impl Fn(T) -> T + Send + Sync + 'static,
        domain: Domain,
        lower_singularity: bool,
        support: (T, T),
    ) -> Self {
        RiskProfile {
            domain,
            kind: ProfileKind::Tabulated,
            r: Arc::new(r),
            r_prime: Arc::new(r_prime),
            lower_singularity,
            support: Some(support),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kind(&self) -> ProfileKind<T> {
        self.kind
    }

    /// `true` iff `R(z) → -∞` at the lower edge of the domain.
    pub fn lower_singularity(&self) -> bool {
        self.lower_singularity
    }

    /// Range outside of which a tabulated profile is undefined.
    pub fn support(&self) -> Option<(T, T)> {
        self.support
    }

    pub fn is_linear(&self) -> bool {
        match self.kind {
            ProfileKind::Linear { .. } => true,
            ProfileKind::Log { eta, .. } => eta == T::zero(),
            _ => false,
        }
    }

    /// Raw evaluation of `R`; no domain check.
    #[inline]
    pub fn r(&self, x: T) -> T {
        (self.r)(x)
    }

    /// Raw evaluation of `R'`; no domain check.
    #[inline]
    pub fn r_prime(&self, x: T) -> T {
        (self.r_prime)(x)
    }

    pub fn in_domain(&self, x: T) -> bool {
        self.domain.contains(x) && self.support.is_none_or(|(lo, hi)| x >= lo && x <= hi)
    }

    /// `R(x)` with domain and finiteness checks.
    pub fn checked_r(&self, x: T) -> Result<T> {
        if !self.in_domain(x) {
            return Err(self.domain_error(x));
        }
        let v = self.r(x);
        if v.is_nan() {
            return Err(self.domain_error(x));
        }
        Ok(v)
    }

    fn domain_error(&self, x: T) -> Error {
        let domain = match self.support {
            Some((lo, hi)) => format!("the tabulated range [{lo}, {hi}]"),
            None => self.domain.to_string(),
        };
        Error::Domain {
            scenario: 0,
            value: x.as_f64(),
            domain,
        }
    }

    /// Checks monotonicity, concavity and the derivative of the profile on
    /// `points` equally spaced points of `[lo, hi]`.
    pub fn validate_on_grid(&self, lo: T, hi: T, points: usize) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || points < 3 {
            return Err(Error::param(
                "interval",
                "need lo < hi and at least 3 points",
            ));
        }
        if !self.domain.contains(lo) {
            return Err(Error::param(
                "interval",
                format!("{lo} is outside {}", self.domain),
            ));
        }
        let n = T::from_usize(points - 1).unwrap();
        let grid: Vec<T> = (0..points)
            .map(|k| lo + (hi - lo) * T::from_usize(k).unwrap() / n)
            .collect();
        let r: Vec<T> = grid.iter().map(|&z| self.r(z)).collect();
        let rp: Vec<T> = grid.iter().map(|&z| self.r_prime(z)).collect();
        let eps = T::epsilon();

        let bad = |pts: Vec<T>, reason: &str| -> Result<()> {
            if pts.is_empty() {
                Ok(())
            } else {
                Err(Error::ProfileValidation {
                    reason: reason.into(),
                    points: pts.into_iter().take(8).map(|z| z.as_f64()).collect(),
                })
            }
        };

        bad(
            grid.iter()
                .zip(r.iter().zip(&rp))
                .filter(|(_, (a, b))| !a.is_finite() || !b.is_finite())
                .map(|(z, _)| *z)
                .collect(),
            "R or R' is not finite",
        )?;
        bad(
            grid.iter()
                .zip(&rp)
                .filter(|(_, d)| **d <= T::zero())
                .map(|(z, _)| *z)
                .collect(),
            "R' must be strictly positive",
        )?;
        let slack = T::lit(4.0) * eps;
        bad(
            (1..points)
                .filter(|&k| r[k] < r[k - 1] - slack * (r[k].abs() + r[k - 1].abs()))
                .map(|k| grid[k])
                .collect(),
            "R must be increasing",
        )?;
        bad(
            (1..points)
                .filter(|&k| rp[k] > rp[k - 1] * (T::one() + slack) + T::min_positive_value())
                .map(|k| grid[k])
                .collect(),
            "R' must be nonincreasing (R concave)",
        )?;

        // Central differences with the step that balances truncation and rounding.
        let h0 = eps.cbrt();
        let rel_tol = T::lit(1e-6).max(T::lit(10.0) * eps.powf(T::lit(2.0 / 3.0)));
        let mismatched = grid[1..points - 1]
            .iter()
            .filter(|&&z| {
                let h = h0 * z.abs().max(T::one());
                let (a, b) = (z - h, z + h);
                if !self.domain.contains(a) {
                    return false;
                }
                let (ra, rb) = (self.r(a), self.r(b));
                let fd = (rb - ra) / (b - a);
                let d = self.r_prime(z);
                let rounding = T::lit(8.0) * eps * (ra.abs() + rb.abs()) / (b - a);
                (fd - d).abs() > rel_tol * d.abs() + rounding
            })
            .copied()
            .collect();
        bad(mismatched, "R' disagrees with finite differences of R")
    }
}

/// Utility of one market participant, described through its absolute risk
/// aversion `ρ_i = -u_i''/u_i'`.
#[derive(Clone)]
pub enum AgentUtility<T> {
    /// `u(x) = 1 - exp(-α x)`.
    Exponential { alpha: T },
    /// `u(x) = (x^{1-η} - 1)/(1-η)`, or `log x` for `η = 1`.
    Power { eta: T },
    /// Arbitrary positive aversion on the given domain.
    Custom {
        rho: Arc<dyn Fn(T) -> T + Send + Sync>,
        domain: Domain,
    },
}

impl<T: Scalar> fmt::Debug for AgentUtility<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentUtility::Exponential { alpha } => write!(f, "Exponential {{ alpha: {alpha} }}"),
            AgentUtility::Power { eta } => write!(f, "Power {{ eta: {eta} }}"),
            AgentUtility::Custom { domain, .. } => write!(f, "Custom {{ domain: {domain:?} }}"),
        }
    }
}

impl<T: Scalar> AgentUtility<T> {
    pub fn exponential(alpha: T) -> Result<Self> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(Error::param("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(AgentUtility::Exponential { alpha })
    }

    pub fn power(eta: T) -> Result<Self> {
        if !(eta.is_finite() && eta >= T::zero()) {
            return Err(Error::param("eta", format!("must be >= 0, got {eta}")));
        }
        Ok(AgentUtility::Power { eta })
    }

    /// Custom aversion; positivity is checked on `interval`.
    pub fn custom(
        rho: impl Fn(T) -> T + Send + Sync + 'static,
        domain: Domain,
        interval: (T, T),
    ) -> Result<Self> {
        let u = AgentUtility::Custom {
            rho: Arc::new(rho),
            domain,
        };
        let (lo, hi) = interval;
        let n = VALIDATION_POINTS;
        let bad: Vec<f64> = (0..n)
            .map(|k| lo + (hi - lo) * T::from_usize(k).unwrap() / T::from_usize(n - 1).unwrap())
            .filter(|&z| domain.contains(z))
            .filter(|&z| !(u.rho(z) > T::zero() && u.rho(z).is_finite()))
            .take(8)
            .map(|z| z.as_f64())
            .collect();
        if !bad.is_empty() {
            return Err(Error::ProfileValidation {
                reason: "risk aversion must be strictly positive".into(),
                points: bad,
            });
        }
        Ok(u)
    }

    pub fn domain(&self) -> Domain {
        match self {
            AgentUtility::Exponential { .. } => Domain::FullLine,
            AgentUtility::Power { .. } => Domain::PositiveHalfLine,
            AgentUtility::Custom { domain, .. } => *domain,
        }
    }

    /// Absolute risk aversion at wealth `z`.
    #[inline]
    pub fn rho(&self, z: T) -> T {
        match self {
            AgentUtility::Exponential { alpha } => *alpha,
            AgentUtility::Power { eta } => *eta / z,
            AgentUtility::Custom { rho, .. } => rho(z),
        }
    }

    /// `log u'(z) - log u'(anchor) = -∫_anchor^z ρ`.
    pub fn log_marginal_utility(&self, z: T, anchor: T) -> Result<T> {
        let d = self.domain();
        if !d.contains(z) || !d.contains(anchor) {
            return Err(Error::Domain {
                scenario: 0,
                value: z.as_f64(),
                domain: d.to_string(),
            });
        }
        Ok(match self {
            AgentUtility::Exponential { alpha } => -*alpha * (z - anchor),
            AgentUtility::Power { eta } => -*eta * (z.ln() - anchor.ln()),
            AgentUtility::Custom { rho, .. } => {
                let (a, b) = (anchor.as_f64(), z.as_f64());
                let mut f = |x: f64| Ok::<_, Error>(rho(T::lit(x)).as_f64());
                T::lit(-adaptive_simpson(&mut f, a, b, 1e-12)?)
            }
        })
    }
}

/// Harmonic representative aversion `n (Σ_i 1/ρ_i(y_i))^{-1}`.
pub fn harmonic_aversion<T: Scalar>(agents: &[AgentUtility<T>], y: &[T]) -> Result<T> {
    if agents.is_empty() || agents.len() != y.len() {
        return Err(Error::InvalidInput(
            "need one wealth level per agent and at least one agent".into(),
        ));
    }
    let mut inv = T::zero();
    for (i, (a, &yi)) in agents.iter().zip(y).enumerate() {
        if !a.domain().contains(yi) {
            return Err(Error::Domain {
                scenario: i,
                value: yi.as_f64(),
                domain: a.domain().to_string(),
            });
        }
        let rho = a.rho(yi);
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::Precondition(format!(
                "agent {i} has non-positive risk aversion {rho} at wealth {yi}"
            )));
        }
        inv = inv + rho.recip();
    }
    Ok(T::from_usize(agents.len()).unwrap() / inv)
}
