//! Finite probability spaces and the random variables living on them.
//!
//! Every random variable is a payoff vector aligned with the weights of a
//! shared [`ScenarioSpace`]. Continuous laws enter through seeded sampling
//! ([`sampling`]) or through exact discretizations of their support.
//!
//! A random variable may carry a *declared* essential infimum: the lower end
//! of the support of the law it was sampled from. Sampled lognormal payoffs,
//! for instance, have essential infimum 0 even though no sample equals 0.
//! When nothing is declared the essential infimum is the attained minimum.

mod file;
pub mod sampling;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

pub use file::{ScenarioFile, ScenarioSet};
pub use sampling::{Law, SamplingConfig};

/// Finite probability space: strictly positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpace<T> {
    weights: Vec<T>,
}

impl<T: Scalar> ScenarioSpace<T> {
    /// Builds a space from explicit weights.
    ///
    /// Weights must be finite and strictly positive, and must sum to one within
    /// [`Scalar::WEIGHT_TOLERANCE`]; they are never renormalized.
    pub fn new(weights: Vec<T>) -> Result<Arc<Self>> {
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "scenario space needs at least one weight".into(),
            ));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w <= T::zero())
        {
            return Err(Error::InvalidInput(format!(
                "weight {i} is {w}; weights must be finite and strictly positive"
            )));
        }
        let total: f64 = weights.iter().map(|w| w.as_f64()).sum();
        if (total - 1.0).abs() > T::WEIGHT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total:.15}, expected 1 within {:e}",
                T::WEIGHT_TOLERANCE
            )));
        }
        Ok(Arc::new(ScenarioSpace { weights }))
    }

    /// `n` equally likely scenarios.
    pub fn uniform(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "scenario space needs at least one weight".into(),
            ));
        }
        let w = T::one() / T::from_usize(n).unwrap();
        Ok(Arc::new(ScenarioSpace {
            weights: vec![w; n],
        }))
    }

    /// Builds a space from nonnegative masses, dropping zero-mass entries and
    /// normalizing. Used for quadrature rules and truncated supports generated
    /// inside the crate. Returns the kept indices alongside the space.
    pub(crate) fn from_masses(masses: &[T]) -> Result<(Arc<Self>, Vec<usize>)> {
        let kept: Vec<usize> = (0..masses.len())
            .filter(|&i| masses[i] > T::zero())
            .collect();
        let total: T = kept.iter().map(|&i| masses[i]).sum();
        if kept.is_empty() || !total.is_finite() {
            return Err(Error::InvalidInput(
                "no positive mass to build a space from".into(),
            ));
        }
        let weights = kept.iter().map(|&i| masses[i] / total).collect();
        Ok((Arc::new(ScenarioSpace { weights }), kept))
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Product of this space with an independent Bernoulli(`p`) factor.
    ///
    /// Scenarios `0..n` carry the outcome B = 1 (weight `w·p`), scenarios
    /// `n..2n` carry B = 0 (weight `w·(1-p)`).
    pub fn with_bernoulli(&self, p: T) -> Result<Arc<Self>> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::param("p", format!("must lie in (0,1), got {p}")));
        }
        let q = T::one() - p;
        let weights = self
            .weights
            .iter()
            .map(|&w| w * p)
            .chain(self.weights.iter().map(|&w| w * q))
            .collect();
        Ok(Arc::new(ScenarioSpace { weights }))
    }
}

/// Real-valued payoff aligned with a [`ScenarioSpace`].
#[derive(Debug, Clone)]
pub struct RandomVariable<T> {
    space: Arc<ScenarioSpace<T>>,
    values: Vec<T>,
    declared_inf: Option<T>,
}

impl<T: Scalar> RandomVariable<T> {
    pub fn new(space: &Arc<ScenarioSpace<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a space of {} scenarios",
                values.len(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value {i} is not finite")));
        }
        Ok(RandomVariable {
            space: Arc::clone(space),
            values,
            declared_inf: None,
        })
    }

    pub fn constant(space: &Arc<ScenarioSpace<T>>, c: T) -> Result<Self> {
        Self::new(space, vec![c; space.len()])
    }

    /// Declares the essential infimum of the underlying law. It must not
    /// exceed the smallest realized value.
    pub fn with_declared_inf(mut self, lower: T) -> Result<Self> {
        if !lower.is_finite() || lower > self.min() {
            return Err(Error::InvalidInput(format!(
                "declared infimum {lower} exceeds the smallest value {}",
                self.min()
            )));
        }
        self.declared_inf = Some(lower);
        Ok(self)
    }

    /// Drops any declared infimum so the attained minimum is used.
    pub fn without_declared_inf(mut self) -> Self {
        self.declared_inf = None;
        self
    }

    pub fn declared_inf(&self) -> Option<T> {
        self.declared_inf
    }

    pub fn space(&self) -> &Arc<ScenarioSpace<T>> {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn weights(&self) -> &[T] {
        &self.space.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_space(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || self.space == other.space
    }

    fn ensure_same_space(&self, other: &Self) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn expectation(&self) -> T {
        self.values
            .iter()
            .zip(&self.space.weights)
            .map(|(&x, &w)| w * x)
            .sum()
    }

    /// `E[(X - E X)^k]`.
    pub fn central_moment(&self, k: i32) -> T {
        let m = self.expectation();
        self.values
            .iter()
            .zip(&self.space.weights)
            .map(|(&x, &w)| w * (x - m).powi(k))
            .sum()
    }

    pub fn variance(&self) -> T {
        self.central_moment(2)
    }

    /// Smallest realized value.
    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Largest realized value.
    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Essential infimum: the declared lower bound if any, else the minimum
    /// over (positive-weight) scenarios.
    pub fn ess_inf(&self) -> T {
        self.declared_inf.unwrap_or_else(|| self.min())
    }

    pub fn ess_sup(&self) -> T {
        self.max()
    }

    /// `true` when all scenarios carry the same value.
    pub fn is_deterministic(&self) -> bool {
        self.min() == self.max()
    }

    /// Probability that the variable equals `value` exactly.
    pub fn prob_at(&self, value: T) -> T {
        self.values
            .iter()
            .zip(&self.space.weights)
            .filter(|(&x, _)| x == value)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Comonotonicity: `(a(ω)-a(ω'))(b(ω)-b(ω')) >= 0` for every pair.
    ///
    /// Checked in `O(n log n)`: after a lexicographic sort on `(a, b)` the
    /// pair is comonotone iff `b` is nondecreasing along the sorted order.
    pub fn is_comonotonic(&self, other: &Self) -> Result<bool> {
        self.ensure_same_space(other)?;
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&i, &j| {
            cmp(self.values[i], self.values[j]).then(cmp(other.values[i], other.values[j]))
        });
        Ok(idx
            .windows(2)
            .all(|w| other.values[w[0]] <= other.values[w[1]]))
    }

    /// Pointwise sum. A declared infimum on either side is propagated as the
    /// sum of the two essential infima (the joint systemic ruin convention).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.ensure_same_space(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + b)
            .collect();
        let declared_inf = match (self.declared_inf, other.declared_inf) {
            (None, None) => None,
            _ => Some(self.ess_inf() + other.ess_inf()),
        };
        Ok(RandomVariable {
            space: Arc::clone(&self.space),
            values,
            declared_inf,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// `c·X`. A declared infimum survives only for `c >= 0`.
    pub fn scale(&self, c: T) -> Self {
        RandomVariable {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|&x| c * x).collect(),
            declared_inf: if c >= T::zero() {
                self.declared_inf.map(|l| c * l)
            } else {
                None
            },
        }
    }

    /// `X + c`.
    pub fn shift(&self, c: T) -> Self {
        RandomVariable {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|&x| x + c).collect(),
            declared_inf: self.declared_inf.map(|l| l + c),
        }
    }

    /// Applies `f` pointwise; the declared infimum is dropped.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(&self.space, self.values.iter().map(|&x| f(x)).collect())
    }

    /// `Σ_k c_k X_k` over variables sharing one space.
    pub fn linear_combination(coeffs: &[T], vars: &[RandomVariable<T>]) -> Result<Self> {
        let first = vars
            .first()
            .ok_or_else(|| Error::InvalidInput("empty linear combination".into()))?;
        if coeffs.len() != vars.len() {
            return Err(Error::InvalidInput(
                "coefficient count differs from variable count".into(),
            ));
        }
        let mut acc = first.scale(coeffs[0]);
        for (c, v) in coeffs.iter().zip(vars).skip(1) {
            acc = acc.add(&v.scale(*c))?;
        }
        Ok(acc)
    }

    /// Lifts the variable to `space` produced by [`ScenarioSpace::with_bernoulli`]:
    /// `B·(X - ess_inf X) + ess_inf X`, so the ruin branch sits at the
    /// essential infimum.
    pub fn ruin_lift(&self, space: &Arc<ScenarioSpace<T>>) -> Result<Self> {
        if space.len() != 2 * self.len() {
            return Err(Error::SpaceMismatch);
        }
        let floor = self.ess_inf();
        let values: Vec<T> = self
            .values
            .iter()
            .copied()
            .chain(std::iter::repeat_n(floor, self.len()))
            .collect();
        let mut lifted = Self::new(space, values)?;
        lifted.declared_inf = self.declared_inf;
        Ok(lifted)
    }

    /// Reorders scenarios (and their weights) by `perm`, where entry `k` of the
    /// result is scenario `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<(Arc<ScenarioSpace<T>>, Self)> {
        if perm.len() != self.len() {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let weights = perm.iter().map(|&i| self.space.weights[i]).collect();
        let space = Arc::new(ScenarioSpace { weights });
        let values = perm.iter().map(|&i| self.values[i]).collect();
        let mut out = Self::new(&space, values)?;
        out.declared_inf = self.declared_inf;
        Ok((space, out))
    }

    /// Same values placed on another space with identical scenario count.
    pub fn rebase(&self, space: &Arc<ScenarioSpace<T>>) -> Result<Self> {
        let mut out = Self::new(space, self.values.clone())?;
        out.declared_inf = self.declared_inf;
        Ok(out)
    }
}

/// Free-function form of [`RandomVariable::expectation`].
pub fn expectation<T: Scalar>(rv: &RandomVariable<T>) -> T {
    rv.expectation()
}

/// Free-function form of [`RandomVariable::is_comonotonic`].
pub fn is_comonotonic<T: Scalar>(a: &RandomVariable<T>, b: &RandomVariable<T>) -> Result<bool> {
    a.is_comonotonic(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64, b: f64, wa: f64) -> RandomVariable<f64> {
        let space = ScenarioSpace::new(vec![wa, 1.0 - wa]).unwrap();
        RandomVariable::new(&space, vec![a, b]).unwrap()
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(two_point(0.0, 1.0, 0.5).expectation(), 0.5);
        let space = ScenarioSpace::<f64>::uniform(7).unwrap();
        let c = RandomVariable::constant(&space, 3.25).unwrap();
        assert!((c.expectation() - 3.25).abs() < 1e-15);
        let x = two_point(2.0, 1e-5, 0.01);
        assert!((x.expectation() - 0.0200099).abs() < 1e-15);
    }

    #[test]
    fn essential_bounds() {
        let x = two_point(2.0, 1e-5, 0.01);
        assert_eq!(x.ess_inf(), 1e-5);
        assert_eq!(x.ess_sup(), 2.0);
        let space = ScenarioSpace::new(vec![0.2, 0.3, 0.5]).unwrap();
        let y = RandomVariable::new(&space, vec![-1.0, 0.0, 3.0]).unwrap();
        assert_eq!(y.ess_inf(), -1.0);
        let c = RandomVariable::constant(&space, 4.0).unwrap();
        assert_eq!((c.ess_inf(), c.ess_sup()), (4.0, 4.0));
    }

    #[test]
    fn comonotonic_examples() {
        let z = two_point(2.0, 1e-5, 0.01);
        assert!(z.is_comonotonic(&z.shift(3.0)).unwrap());
        let b = RandomVariable::new(z.space(), vec![2.0 + 1e-5, 100.0 + 1e-5]).unwrap();
        assert!(!z.is_comonotonic(&b).unwrap());
        let a = two_point(1.0, 2.0, 0.5);
        let flat = RandomVariable::new(a.space(), vec![3.0, 3.0]).unwrap();
        assert!(a.is_comonotonic(&flat).unwrap());
    }

    #[test]
    fn comonotonic_rejects_foreign_space() {
        let a = two_point(1.0, 2.0, 0.5);
        let b = two_point(1.0, 2.0, 0.25);
        assert_eq!(a.is_comonotonic(&b), Err(Error::SpaceMismatch));
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(ScenarioSpace::new(vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(ScenarioSpace::new(vec![1.0, 0.0]).is_err());
        assert!(ScenarioSpace::new(vec![1.5, -0.5]).is_err());
        assert!(ScenarioSpace::<f64>::new(vec![]).is_err());
        assert!(ScenarioSpace::new(vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn rejects_non_finite_values_and_length_mismatch() {
        let space = ScenarioSpace::<f64>::uniform(2).unwrap();
        assert!(RandomVariable::new(&space, vec![1.0, f64::NAN]).is_err());
        assert!(RandomVariable::new(&space, vec![1.0]).is_err());
    }

    #[test]
    fn declared_infimum_propagates() {
        let space = ScenarioSpace::<f64>::uniform(3).unwrap();
        let q = RandomVariable::new(&space, vec![0.5, 1.0, 2.0])
            .unwrap()
            .with_declared_inf(0.0)
            .unwrap();
        assert_eq!(q.ess_inf(), 0.0);
        assert_eq!(q.scale(3.0).ess_inf(), 0.0);
        assert_eq!(q.shift(2.0).ess_inf(), 2.0);
        let x = RandomVariable::constant(&space, 2.0).unwrap();
        assert_eq!(x.add(&q.scale(3.0)).unwrap().ess_inf(), 2.0);
        assert_eq!(q.scale(-1.0).ess_inf(), -2.0);
        assert!(RandomVariable::new(&space, vec![0.5, 1.0, 2.0])
            .unwrap()
            .with_declared_inf(0.6)
            .is_err());
    }

    #[test]
    fn bernoulli_product_space() {
        let x = two_point(1.0, 3.0, 0.25);
        let prod = x.space().with_bernoulli(0.9).unwrap();
        assert_eq!(prod.len(), 4);
        let sum: f64 = prod.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        let lifted = x.ruin_lift(&prod).unwrap();
        assert_eq!(lifted.values(), &[1.0, 3.0, 1.0, 1.0]);
        assert!((lifted.prob_at(1.0) - (0.25 * 0.9 + 0.1)).abs() < 1e-15);
        assert!(x.space().with_bernoulli(1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let space = ScenarioSpace::<f32>::new(vec![0.25, 0.75]).unwrap();
        let x = RandomVariable::new(&space, vec![4.0f32, 0.0]).unwrap();
        assert_eq!(x.expectation(), 1.0);
        assert_eq!(x.variance(), 3.0);
    }
}
