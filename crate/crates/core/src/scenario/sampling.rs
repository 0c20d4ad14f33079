//! Seeded sampling of named laws and exact discretizations of their supports.

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Gamma, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{RandomVariable, ScenarioSpace};
use crate::error::{Error, Result};
use crate::linalg::cholesky_psd;
use crate::quadrature::composite_gauss_legendre;
use crate::scalar::Scalar;

/// Tail mass below which truncated discrete supports are cut.
pub const TRUNCATION_TAIL: f64 = 1e-15;

/// Named distribution with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    /// Multivariate normal `N(mean, cov)`; one component per entry of `mean`.
    Normal {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    /// `exp(N(mu, sigma2))`.
    Lognormal {
        mu: f64,
        sigma2: f64,
    },
    /// Shape `k`, scale `theta`.
    Gamma {
        k: f64,
        theta: f64,
    },
    Poisson {
        lambda: f64,
    },
    Bernoulli {
        p: f64,
    },
    Discrete {
        support: Vec<f64>,
        probabilities: Vec<f64>,
    },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {x}"),
                ))
            }
        };
        match self {
            Law::Normal { mean, cov } => {
                if mean.is_empty() || mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::param("mean", "must be a nonempty finite vector"));
                }
                if cov.len() != mean.len() {
                    return Err(Error::param("cov", "dimension differs from mean"));
                }
                cholesky_psd(cov).map(|_| ())
            }
            Law::Lognormal { mu, sigma2 } => {
                if !mu.is_finite() {
                    return Err(Error::param("mu", "must be finite"));
                }
                positive("sigma2", *sigma2)
            }
            Law::Gamma { k, theta } => {
                positive("k", *k)?;
                positive("theta", *theta)
            }
            Law::Poisson { lambda } => positive("lambda", *lambda),
            Law::Bernoulli { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(Error::param("p", format!("must lie in [0,1], got {p}")))
                }
            }
            Law::Discrete {
                support,
                probabilities,
            } => {
                if support.is_empty() || support.len() != probabilities.len() {
                    return Err(Error::param(
                        "probabilities",
                        "support and probabilities must be nonempty and equally long",
                    ));
                }
                if support.iter().any(|x| !x.is_finite()) {
                    return Err(Error::param("support", "values must be finite"));
                }
                if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::param("probabilities", "must be nonnegative"));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(
                        "probabilities",
                        format!("sum to {total}, expected 1"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Number of components produced per draw.
    pub fn dimension(&self) -> usize {
        match self {
            Law::Normal { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    /// Lower end of the support, when the law is bounded below.
    pub fn support_inf(&self) -> Option<f64> {
        match self {
            Law::Normal { .. } => None,
            Law::Lognormal { .. } | Law::Gamma { .. } | Law::Poisson { .. } => Some(0.0),
            Law::Bernoulli { p } => Some(if *p < 1.0 { 0.0 } else { 1.0 }),
            Law::Discrete {
                support,
                probabilities,
            } => support
                .iter()
                .zip(probabilities)
                .filter(|(_, p)| **p > 0.0)
                .map(|(x, _)| *x)
                .reduce(f64::min),
        }
    }

    /// Finite space carrying the law exactly (discrete laws) or through a
    /// quadrature rule (gamma). Poisson supports are truncated once the
    /// remaining tail mass drops below [`TRUNCATION_TAIL`].
    pub fn discretize<T: Scalar>(&self) -> Result<RandomVariable<T>> {
        self.validate()?;
        let (values, masses): (Vec<f64>, Vec<f64>) = match self {
            Law::Bernoulli { p } => (vec![0.0, 1.0], vec![1.0 - p, *p]),
            Law::Discrete {
                support,
                probabilities,
            } => (support.clone(), probabilities.clone()),
            Law::Poisson { lambda } => poisson_support(*lambda),
            Law::Gamma { k, theta } => gamma_support(*k, *theta),
            Law::Normal { .. } | Law::Lognormal { .. } => {
                return Err(Error::param(
                    "law",
                    "only discrete, Poisson and gamma laws have exact discretizations",
                ))
            }
        };
        let masses: Vec<T> = masses.into_iter().map(T::lit).collect();
        let (space, kept) = ScenarioSpace::from_masses(&masses)?;
        let rv = RandomVariable::new(&space, kept.iter().map(|&i| T::lit(values[i])).collect())?;
        match self {
            // Gamma quadrature nodes never touch 0, the infimum of the support.
            Law::Gamma { .. } => rv.with_declared_inf(T::zero()),
            _ => Ok(rv),
        }
    }
}

/// Law, scenario count and seed for Monte Carlo discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub law: Law,
    pub sample_count: usize,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn new(law: Law, sample_count: usize, seed: u64) -> Self {
        SamplingConfig {
            law,
            sample_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 2 {
            return Err(Error::param("sample_count", "must be at least 2"));
        }
        self.law.validate()
    }

    /// Draws `sample_count` i.i.d. scenarios with equal weights. Multivariate
    /// normal laws yield one variable per component on a shared space.
    ///
    /// Variables drawn from laws bounded below carry that bound as their
    /// declared essential infimum.
    pub fn sample<T: Scalar>(&self) -> Result<Vec<RandomVariable<T>>> {
        self.validate()?;
        let n = self.sample_count;
        let space = ScenarioSpace::<T>::uniform(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let columns: Vec<Vec<f64>> = match &self.law {
            Law::Normal { mean, cov } => {
                let l = cholesky_psd(cov)?;
                let m = mean.len();
                let mut cols = vec![Vec::with_capacity(n); m];
                let mut eps = vec![0.0; m];
                for _ in 0..n {
                    for e in eps.iter_mut() {
                        *e = StandardNormal.sample(&mut rng);
                    }
                    for (i, col) in cols.iter_mut().enumerate() {
                        let x = mean[i] + (0..=i).map(|k| l[i][k] * eps[k]).sum::<f64>();
                        col.push(x);
                    }
                }
                cols
            }
            Law::Lognormal { mu, sigma2 } => {
                let d = LogNormal::new(*mu, sigma2.sqrt())
                    .map_err(|e| Error::param("sigma2", e.to_string()))?;
                vec![(0..n).map(|_| d.sample(&mut rng)).collect()]
            }
            Law::Gamma { k, theta } => {
                let d = Gamma::new(*k, *theta).map_err(|e| Error::param("k", e.to_string()))?;
                vec![(0..n).map(|_| d.sample(&mut rng)).collect()]
            }
            Law::Poisson { lambda } => {
                let d = Poisson::new(*lambda).map_err(|e| Error::param("lambda", e.to_string()))?;
                vec![(0..n).map(|_| d.sample(&mut rng)).collect()]
            }
            Law::Bernoulli { p } => {
                let d = Bernoulli::new(*p).map_err(|e| Error::param("p", e.to_string()))?;
                vec![(0..n)
                    .map(|_| if d.sample(&mut rng) { 1.0 } else { 0.0 })
                    .collect()]
            }
            Law::Discrete {
                support,
                probabilities,
            } => {
                let d = WeightedIndex::new(probabilities)
                    .map_err(|e| Error::param("probabilities", e.to_string()))?;
                vec![(0..n).map(|_| support[d.sample(&mut rng)]).collect()]
            }
        };
        let bound = match self.law {
            Law::Lognormal { .. } | Law::Gamma { .. } | Law::Poisson { .. } => {
                self.law.support_inf()
            }
            _ => None,
        };
        columns
            .into_iter()
            .map(|col| {
                let rv = RandomVariable::new(&space, col.into_iter().map(T::lit).collect())?;
                match bound {
                    Some(b) => rv.with_declared_inf(T::lit(b)),
                    None => Ok(rv),
                }
            })
            .collect()
    }

    /// Single-component convenience wrapper around [`SamplingConfig::sample`].
    pub fn sample_one<T: Scalar>(&self) -> Result<RandomVariable<T>> {
        if self.law.dimension() != 1 {
            return Err(Error::param("law", "expected a univariate law"));
        }
        Ok(self.sample()?.remove(0))
    }
}

/// Free-function form of [`SamplingConfig::sample`].
pub fn sample<T: Scalar>(config: &SamplingConfig) -> Result<Vec<RandomVariable<T>>> {
    config.sample()
}

fn poisson_support(lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let ln_lambda = lambda.ln();
    let mut values = Vec::new();
    let mut masses = Vec::new();
    let mut log_fact = 0.0;
    let mut cumulative = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let p = (-lambda + k as f64 * ln_lambda - log_fact).exp();
        values.push(k as f64);
        masses.push(p);
        cumulative += p;
        // Past the mode the tail is dominated by a geometric series.
        if k as f64 > lambda {
            let ratio = lambda / (k as f64 + 2.0);
            let next = p * lambda / (k as f64 + 1.0);
            let tail = next / (1.0 - ratio);
            if tail < TRUNCATION_TAIL * cumulative.max(1e-300) {
                break;
            }
        }
        k += 1;
    }
    (values, masses)
}

fn gamma_support(k: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
    // Standardized variable t = x/θ with density ∝ t^{k-1} e^{-t}.
    let upper = 60.0 + k + 40.0 * k.sqrt();
    let panels = (upper / 0.5).ceil() as usize;
    if k >= 1.0 {
        let (t, w) = composite_gauss_legendre(0.0, upper, panels, 16);
        let masses = t
            .iter()
            .zip(&w)
            .map(|(&t, &w)| w * ((k - 1.0) * t.ln() - t).exp())
            .collect();
        (t.iter().map(|t| theta * t).collect(), masses)
    } else {
        // t = u^{1/k} absorbs the integrable singularity at the origin.
        let (u, w) = composite_gauss_legendre(0.0, upper.powf(k), panels, 16);
        let ts: Vec<f64> = u.iter().map(|u| u.powf(1.0 / k)).collect();
        let masses = ts.iter().zip(&w).map(|(&t, &w)| w * (-t).exp()).collect();
        (ts.iter().map(|t| theta * t).collect(), masses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_bernoulli_is_constant() {
        let cfg = SamplingConfig::new(Law::Bernoulli { p: 1.0 }, 1000, 7);
        let x: RandomVariable<f64> = cfg.sample_one().unwrap();
        assert!(x.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn lognormal_mean_is_one() {
        let s2 = 0.25;
        let cfg = SamplingConfig::new(
            Law::Lognormal {
                mu: -s2 / 2.0,
                sigma2: s2,
            },
            1_000_000,
            11,
        );
        let x: RandomVariable<f64> = cfg.sample_one().unwrap();
        let m = x.expectation();
        let sd = x.variance().sqrt();
        assert!((m - 1.0).abs() < 3.0 * sd / 1000.0, "mean {m}");
        assert_eq!(x.ess_inf(), 0.0);
    }

    #[test]
    fn poisson_mean_is_lambda() {
        let cfg = SamplingConfig::new(Law::Poisson { lambda: 2.0 }, 1_000_000, 3);
        let x: RandomVariable<f64> = cfg.sample_one().unwrap();
        let tol = 3.0 * (2.0f64 / 1e6).sqrt() * 1.1;
        assert!((x.expectation() - 2.0).abs() < tol);
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = SamplingConfig::new(Law::Gamma { k: 2.0, theta: 1.5 }, 500, 99);
        let a: RandomVariable<f64> = cfg.sample_one().unwrap();
        let b: RandomVariable<f64> = cfg.sample_one().unwrap();
        assert_eq!(a.values(), b.values());
        let other = SamplingConfig { seed: 100, ..cfg };
        let c: RandomVariable<f64> = other.sample_one().unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn multivariate_normal_honors_covariance() {
        let cfg = SamplingConfig::new(
            Law::Normal {
                mean: vec![1.0, -1.0],
                cov: vec![vec![1.0, 0.6], vec![0.6, 2.0]],
            },
            200_000,
            5,
        );
        let xs: Vec<RandomVariable<f64>> = cfg.sample().unwrap();
        let (a, b) = (&xs[0], &xs[1]);
        let cov = a
            .shift(-a.expectation())
            .values()
            .iter()
            .zip(b.shift(-b.expectation()).values())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / 200_000.0;
        assert!((cov - 0.6).abs() < 0.02, "cov {cov}");
        assert!((b.variance() - 2.0).abs() < 0.04);
        assert!((b.expectation() + 1.0).abs() < 0.02);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        for law in [
            Law::Lognormal {
                mu: 0.0,
                sigma2: 0.0,
            },
            Law::Gamma {
                k: -1.0,
                theta: 1.0,
            },
            Law::Gamma { k: 1.0, theta: 0.0 },
            Law::Poisson { lambda: 0.0 },
            Law::Bernoulli { p: 1.5 },
            Law::Discrete {
                support: vec![0.0, 1.0],
                probabilities: vec![0.5, 0.6],
            },
            Law::Normal {
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            },
        ] {
            assert!(SamplingConfig::new(law, 10, 0).sample::<f64>().is_err());
        }
        let one = SamplingConfig::new(Law::Poisson { lambda: 1.0 }, 1, 0);
        assert!(one.sample::<f64>().is_err());
    }

    #[test]
    fn poisson_truncation_keeps_tail_below_threshold() {
        let q: RandomVariable<f64> = Law::Poisson { lambda: 2.0 }.discretize().unwrap();
        assert!((q.expectation() - 2.0).abs() < 1e-13);
        assert!((q.variance() - 2.0).abs() < 1e-12);
        assert!(q.len() < 30);
    }

    #[test]
    fn gamma_quadrature_reproduces_moments_and_laplace_transform() {
        for (k, theta) in [(2.0, 1.0), (0.5, 2.0), (7.5, 0.3)] {
            let q: RandomVariable<f64> = Law::Gamma { k, theta }.discretize().unwrap();
            assert!((q.expectation() - k * theta).abs() < 1e-12 * k * theta);
            assert!((q.variance() - k * theta * theta).abs() < 1e-9 * k * theta * theta);
            let c = 4.0;
            let lt: f64 = q
                .values()
                .iter()
                .zip(q.weights())
                .map(|(x, w)| w * (-c * x).exp())
                .sum();
            let exact = (1.0 + c * theta).powf(-k);
            assert!(
                (lt - exact).abs() < 1e-10 * exact,
                "k={k} lt={lt} exact={exact}"
            );
        }
    }
}
