//! Clearing prices: fixed points of the tilted expectation `H_Z`.
//!
//! For a liquidated claim `Z` and aggregate endowment `X` the candidate prices
//! are the roots of
//!
//! ```text
//! Θ_Z(v) = E[(Z - v) exp(-R(X + Z - v))],
//! ```
//!
//! equivalently the fixed points of
//! `H_Z(v) = E[Z e^{-R(X+Z-v)}] / E[e^{-R(X+Z-v)}]`. The selected price is the
//! smallest root; on the half-line, when no root exists, the market pays the
//! liquidity cap `ess_inf(X + Z)`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{map_grid, tilted_sums};
use crate::risk_profile::{Domain, RiskProfile};
use crate::scalar::{cmp, Scalar};
use crate::scenario::RandomVariable;

/// Default number of scan points for the all-roots search.
pub const DEFAULT_GRID_POINTS: usize = 2049;
/// Default relative bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Points of the `z`-grid used by the grid certificates.
pub const CERTIFICATE_GRID: usize = 512;
/// Largest number of distinct endowment levels inspected by the concavity
/// certificate; beyond this an evenly spaced subset (always containing the
/// extremes) is used.
pub const CERTIFICATE_MAX_LEVELS: usize = 2048;

/// How the existence of a clearing price was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExistenceDiagnosis {
    /// Profile on the real line: a root always exists.
    FullLineGuaranteed,
    /// `H_Z(ess_inf(X+Z)) <= ess_inf(X+Z)`.
    BoundaryOk,
    /// `H_Z(ess_inf(X+Z)) > ess_inf(X+Z)`: no fair price.
    BoundaryFails,
    /// Singular profile with an atom at `ess_inf(X+Z)`: a root exists.
    SingularAtom,
}

/// Kind of price reported by [`clear`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Existence {
    FullLine,
    FairPrice,
    LiquidityCapped,
}

/// Sufficient conditions for at most one clearing price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    /// `Z` and `X + Z` comonotone.
    Comonotone,
    /// `R` affine.
    LinearR,
    /// `z ↦ z e^{-R(X+z)}` nondecreasing, checked on a grid.
    MonotoneMap,
    /// `z ↦ z e^{-R(X+z)}` concave, checked on a grid.
    ConcaveMap,
}

impl Certificate {
    /// `true` for certificates established only on a finite grid.
    pub fn is_grid_certified(self) -> bool {
        matches!(self, Certificate::MonotoneMap | Certificate::ConcaveMap)
    }
}

/// Search settings for [`ClearingProblem::find_all_roots`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub grid_points: usize,
    pub tol: f64,
    /// Use the linear and comonotone shortcuts when they apply.
    pub use_certificates: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            grid_points: DEFAULT_GRID_POINTS,
            tol: DEFAULT_TOL,
            use_certificates: true,
        }
    }
}

/// Roots of `Θ_Z` and the resolution of the search that found them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootScan<T> {
    pub roots: Vec<T>,
    /// Distance below which two roots cannot be told apart.
    pub bracket_resolution: T,
    /// Scanned interval.
    pub lower: T,
    pub upper: T,
}

/// Outcome of [`clear`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingResult<T> {
    pub roots: Vec<T>,
    pub selected: T,
    pub existence: Existence,
    pub diagnosis: ExistenceDiagnosis,
    pub uniqueness_certificates: Vec<Certificate>,
    pub bracket_resolution: T,
}

/// Aggregate endowment `X`, liquidated claim `Z` and profile `R`.
///
/// Scenarios are stored in a canonical order so that results do not depend on
/// how the input scenarios were listed.
#[derive(Debug, Clone)]
pub struct ClearingProblem<T> {
    x: RandomVariable<T>,
    z: RandomVariable<T>,
    profile: RiskProfile<T>,
    // canonical order
    xs: Vec<T>,
    zs: Vec<T>,
    ln_w: Vec<T>,
    origin: Vec<usize>,
    xz_inf: T,
}

impl<T: Scalar> ClearingProblem<T> {
    pub fn new(
        x: &RandomVariable<T>,
        z: &RandomVariable<T>,
        profile: RiskProfile<T>,
    ) -> Result<Self> {
        if !x.same_space(z) {
            return Err(Error::SpaceMismatch);
        }
        let x_inf = x.ess_inf();
        if !profile.domain().contains(x_inf) {
            return Err(Error::Precondition(format!(
                "ess_inf X = {x_inf} is outside {}",
                profile.domain()
            )));
        }
        let w = x.weights();
        let (xv, zv) = (x.values(), z.values());
        let mut origin: Vec<usize> = (0..x.len()).collect();
        origin.sort_by(|&i, &j| {
            cmp(xv[i], xv[j])
                .then(cmp(zv[i], zv[j]))
                .then(cmp(w[i], w[j]))
        });
        let xs = origin.iter().map(|&i| xv[i]).collect();
        let zs = origin.iter().map(|&i| zv[i]).collect();
        let ln_w = origin.iter().map(|&i| w[i].ln()).collect();
        let xz_inf = x.add(z)?.ess_inf();
        Ok(ClearingProblem {
            x: x.clone(),
            z: z.clone(),
            profile,
            xs,
            zs,
            ln_w,
            origin,
            xz_inf,
        })
    }

    pub fn x(&self) -> &RandomVariable<T> {
        &self.x
    }

    pub fn z(&self) -> &RandomVariable<T> {
        &self.z
    }

    pub fn profile(&self) -> &RiskProfile<T> {
        &self.profile
    }

    /// `ess_inf(X + Z)`.
    pub fn wealth_floor(&self) -> T {
        self.xz_inf
    }

    /// Guard band kept below a half-line boundary.
    pub fn guard(&self) -> T {
        let rel = T::lit(1e-9_f64.max(T::BRACKET_FLOOR));
        rel * self.xz_inf.abs().max(T::one())
    }

    /// Normalized tilted sums at price `v`: returns
    /// `(shift, [Σ w e^{l}, Σ w (z-v) e^{l}, Σ w z e^{l}])` where `l = -R(x+z-v) - shift`.
    fn sums(&self, v: T) -> Result<(T, [T; 3])> {
        let p = &self.profile;
        tilted_sums(self.xs.len(), |i| {
            let arg = self.xs[i] + self.zs[i] - v;
            let r = p.r(arg);
            if !p.in_domain(arg) || r.is_nan() {
                return Err(Error::Domain {
                    scenario: i,
                    value: arg.as_f64(),
                    domain: String::new(),
                });
            }
            Ok((self.ln_w[i] - r, [T::one(), self.zs[i] - v, self.zs[i]]))
        })
        .map_err(|e| match e {
            Error::Domain {
                scenario, value, ..
            } if scenario < self.origin.len() => self.domain_error(scenario, value),
            e => e,
        })
    }

    fn domain_error(&self, sorted_index: usize, value: f64) -> Error {
        let domain = match self.profile.support() {
            Some((lo, hi)) => format!("the tabulated range [{lo}, {hi}]"),
            None => self.profile.domain().to_string(),
        };
        Error::Domain {
            scenario: self.origin[sorted_index],
            value,
            domain,
        }
    }

    /// `H_Z(v)`.
    pub fn h_map(&self, v: T) -> Result<T> {
        let (_, [s0, _, sz]) = self.sums(v)?;
        Ok(sz / s0)
    }

    /// `Θ_Z(v)`; may overflow to `±∞` for extreme tilts, the sign is exact.
    pub fn theta(&self, v: T) -> Result<T> {
        let (shift, [_, s1, _]) = self.sums(v)?;
        if s1 == T::zero() {
            return Ok(T::zero());
        }
        Ok(s1 * shift.exp())
    }

    /// Sign of `Θ_Z(v)` as -1, 0 or 1.
    fn theta_sign(&self, v: T) -> Result<i8> {
        let (_, [_, s1, _]) = self.sums(v)?;
        Ok(if s1 > T::zero() {
            1
        } else if s1 < T::zero() {
            -1
        } else {
            0
        })
    }

    /// Interval scanned for roots.
    pub fn scan_interval(&self) -> (T, T) {
        let lower = self.z.ess_inf();
        let sup = self.z.ess_sup();
        let upper = match self.profile.domain() {
            Domain::FullLine => sup,
            Domain::PositiveHalfLine => sup.min(self.xz_inf - self.guard()),
        };
        (lower, upper)
    }

    /// All roots of `Θ_Z` on the scan interval, with the default options.
    pub fn find_all_roots(&self, grid_points: usize, tol: f64) -> Result<RootScan<T>> {
        self.find_roots_with(RootOptions {
            grid_points,
            tol,
            use_certificates: true,
        })
    }

    pub fn find_roots_with(&self, opts: RootOptions) -> Result<RootScan<T>> {
        if opts.grid_points < 3 {
            return Err(Error::param("grid_points", "need at least 3 grid points"));
        }
        if !(opts.tol > 0.0 && opts.tol.is_finite()) {
            return Err(Error::param("tol", "must be positive"));
        }
        let (lower, upper) = self.scan_interval();
        let width = T::lit(opts.tol) * upper.abs().max(T::one());
        let empty = |res| RootScan {
            roots: vec![],
            bracket_resolution: res,
            lower,
            upper,
        };
        if upper < lower {
            return Ok(empty(T::zero()));
        }
        if upper == lower {
            let roots = if self.theta_sign(lower)? == 0 {
                vec![lower]
            } else {
                vec![]
            };
            return Ok(RootScan {
                roots,
                bracket_resolution: T::zero(),
                lower,
                upper,
            });
        }

        if opts.use_certificates && self.profile.is_linear() {
            // H does not depend on v.
            let h = self.h_map(lower)?;
            let roots = if h <= upper {
                vec![h.max(lower)]
            } else {
                vec![]
            };
            return Ok(RootScan {
                roots,
                bracket_resolution: T::zero(),
                lower,
                upper,
            });
        }
        if opts.use_certificates && self.z.is_comonotonic(&self.x.add(&self.z)?)? {
            let s_lo = self.theta_sign(lower)?;
            let s_hi = self.theta_sign(upper)?;
            let roots = if s_lo == 0 {
                vec![lower]
            } else if s_hi == 0 {
                vec![upper]
            } else if s_lo != s_hi {
                vec![self.bisect(lower, upper, s_lo, width)?]
            } else {
                vec![]
            };
            return Ok(RootScan {
                roots,
                bracket_resolution: width,
                lower,
                upper,
            });
        }
        self.scan(lower, upper, opts.grid_points, width)
    }

    fn scan(&self, lower: T, upper: T, points: usize, width: T) -> Result<RootScan<T>> {
        let n = T::from_usize(points - 1).unwrap();
        let grid: Vec<T> = (0..points)
            .map(|k| {
                if k == points - 1 {
                    upper
                } else {
                    lower + (upper - lower) * T::from_usize(k).unwrap() / n
                }
            })
            .collect();
        let signs = map_grid(&grid, |&v| self.theta_sign(v))
            .into_iter()
            .collect::<Result<Vec<i8>>>()?;
        let mut roots = Vec::new();
        for k in 0..points {
            if signs[k] == 0 {
                roots.push(grid[k]);
            } else if k + 1 < points && signs[k + 1] != 0 && signs[k] != signs[k + 1] {
                roots.push(self.bisect(grid[k], grid[k + 1], signs[k], width)?);
            }
        }
        Ok(RootScan {
            roots,
            bracket_resolution: (upper - lower) / n,
            lower,
            upper,
        })
    }

    /// Bisection on a sign-change bracket; returns the final midpoint.
    fn bisect(&self, mut a: T, mut b: T, sign_a: i8, width: T) -> Result<T> {
        let two = T::lit(2.0);
        for _ in 0..400 {
            let m = (a + b) / two;
            if b - a <= width || m <= a || m >= b {
                return Ok(m);
            }
            let s = self.theta_sign(m)?;
            if s == 0 {
                return Ok(m);
            }
            if s == sign_a {
                a = m;
            } else {
                b = m;
            }
        }
        Ok((a + b) / two)
    }

    /// Existence of a fair price on the half-line; see [`ExistenceDiagnosis`].
    pub fn existence_diagnosis(&self) -> ExistenceDiagnosis {
        if self.profile.domain() == Domain::FullLine {
            return ExistenceDiagnosis::FullLineGuaranteed;
        }
        let b = self.xz_inf;
        if self.profile.lower_singularity() && self.atom_at_floor() {
            return ExistenceDiagnosis::SingularAtom;
        }
        let h = match self.h_map(b) {
            Ok(h) if h.is_finite() => h,
            _ => match self.boundary_liminf() {
                Some(h) => h,
                None => return ExistenceDiagnosis::BoundaryFails,
            },
        };
        if h <= b {
            ExistenceDiagnosis::BoundaryOk
        } else {
            ExistenceDiagnosis::BoundaryFails
        }
    }

    fn atom_at_floor(&self) -> bool {
        let b = self.xz_inf;
        self.xs.iter().zip(&self.zs).any(|(&x, &z)| x + z <= b)
    }

    /// Smallest value of `H_Z(v_k)` over `v_k = b - d 10^{-k}` approaching
    /// the boundary `b` from below, `k = 1..=8`, among the finite evaluations.
    fn boundary_liminf(&self) -> Option<T> {
        let b = self.xz_inf;
        let lower = self.z.ess_inf();
        let d = (b - lower).max(self.guard());
        let mut tail: Vec<T> = (1..=8)
            .filter_map(|k| {
                let v = b - d * T::lit(10f64.powi(-k));
                if v >= b {
                    return None;
                }
                self.h_map(v).ok().filter(|h| h.is_finite())
            })
            .collect();
        let keep = tail.len().saturating_sub(4);
        tail.drain(..keep);
        tail.into_iter().reduce(T::min)
    }

    /// Satisfied uniqueness conditions, in a fixed order.
    pub fn uniqueness_certificates(&self) -> Result<Vec<Certificate>> {
        let mut set = BTreeSet::new();
        if self.z.is_comonotonic(&self.x.add(&self.z)?)? {
            set.insert(Certificate::Comonotone);
        }
        if self.profile.is_linear() {
            set.insert(Certificate::LinearR);
        }
        let span = self.z.ess_sup() - self.z.ess_inf();
        let zgrid: Vec<T> = (0..CERTIFICATE_GRID)
            .map(|k| {
                span * T::from_usize(k).unwrap() / T::from_usize(CERTIFICATE_GRID - 1).unwrap()
            })
            .collect();
        if self.monotone_map_on_grid(&zgrid) {
            set.insert(Certificate::MonotoneMap);
        }
        if self.concave_map_on_grid(&zgrid) {
            set.insert(Certificate::ConcaveMap);
        }
        Ok(set.into_iter().collect())
    }

    /// `z R'(x + z) <= 1` on the grid. Since `R'` is nonincreasing the
    /// smallest endowment level is the binding scenario.
    fn monotone_map_on_grid(&self, zgrid: &[T]) -> bool {
        let x = self.x.min();
        let slack = T::one() + T::lit(1e-12);
        zgrid.iter().all(|&z| {
            let arg = x + z;
            self.profile.in_domain(arg) && z * self.profile.r_prime(arg) <= slack
        })
    }

    /// Second differences of `g(z) = z e^{-R(x+z)}` are nonpositive for every
    /// inspected endowment level `x`.
    fn concave_map_on_grid(&self, zgrid: &[T]) -> bool {
        let mut levels: Vec<T> = self.xs.clone();
        levels.dedup();
        let levels: Vec<T> = if levels.len() > CERTIFICATE_MAX_LEVELS {
            let m = CERTIFICATE_MAX_LEVELS - 1;
            (0..=m)
                .map(|k| levels[k * (levels.len() - 1) / m])
                .collect()
        } else {
            levels
        };
        let ok = map_grid(&levels, |&x| {
            let logs: Option<Vec<T>> = zgrid
                .iter()
                .map(|&z| {
                    let arg = x + z;
                    if !self.profile.in_domain(arg) {
                        return None;
                    }
                    let r = self.profile.r(arg);
                    r.is_finite().then(|| -r)
                })
                .collect();
            let Some(logs) = logs else { return false };
            let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
            let g: Vec<T> = zgrid
                .iter()
                .zip(&logs)
                .map(|(&z, &l)| z * (l - top).exp())
                .collect();
            let scale = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let tol = T::lit(1e-10) * scale.max(T::min_positive_value());
            g.windows(3).all(|w| w[0] - w[1] - w[1] + w[2] <= tol)
        });
        ok.into_iter().all(|b| b)
    }

    /// Solves for the selected price with default options.
    pub fn clear(&self) -> Result<ClearingResult<T>> {
        self.clear_with(RootOptions::default())
    }

    pub fn clear_with(&self, opts: RootOptions) -> Result<ClearingResult<T>> {
        let scan = self.find_roots_with(opts)?;
        let diagnosis = self.existence_diagnosis();
        let certificates = self.uniqueness_certificates()?;
        let full_line = self.profile.domain() == Domain::FullLine;
        let (selected, existence) = match scan.roots.first() {
            Some(&r) if full_line => (r, Existence::FullLine),
            Some(&r) => (r, Existence::FairPrice),
            None if full_line => {
                return Err(Error::NonConvergence {
                    iterations: opts.grid_points,
                    residuals: vec![],
                })
            }
            None => (self.xz_inf, Existence::LiquidityCapped),
        };
        Ok(ClearingResult {
            roots: scan.roots,
            selected,
            existence,
            diagnosis,
            uniqueness_certificates: certificates,
            bracket_resolution: scan.bracket_resolution,
        })
    }

    /// Prices under an independent systemic ruin event of probability
    /// `1 - p`, for each `p` of an increasing sequence in `(0, 1)`.
    pub fn ruin_limit_price(&self, p_sequence: &[T]) -> Result<Vec<T>> {
        if self.profile.domain() != Domain::PositiveHalfLine || !self.profile.lower_singularity() {
            return Err(Error::Precondition(
                "ruin limit needs a half-line profile singular at zero".into(),
            ));
        }
        let joint = self.x.ess_inf() + self.z.ess_inf();
        let tol = T::lit(1e-12) * joint.abs().max(T::one());
        if (self.xz_inf - joint).abs() > tol {
            return Err(Error::Precondition(format!(
                "ess_inf(X+Z) = {} differs from ess_inf X + ess_inf Z = {joint}",
                self.xz_inf
            )));
        }
        if self.uniqueness_certificates()?.is_empty() {
            return Err(Error::Precondition(
                "no uniqueness certificate holds".into(),
            ));
        }
        if p_sequence.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("p_sequence", "must be strictly increasing"));
        }
        p_sequence
            .iter()
            .map(|&p| {
                let space = self.x.space().with_bernoulli(p)?;
                let x = self.x.ruin_lift(&space)?;
                let z = self.z.ruin_lift(&space)?;
                let lifted = ClearingProblem::new(&x, &z, self.profile.clone())?;
                Ok(lifted.clear()?.selected)
            })
            .collect()
    }
}

/// `H_Z(v)` for `problem`.
pub fn h_map<T: Scalar>(problem: &ClearingProblem<T>, v: T) -> Result<T> {
    problem.h_map(v)
}

/// `Θ_Z(v)` for `problem`.
pub fn theta<T: Scalar>(problem: &ClearingProblem<T>, v: T) -> Result<T> {
    problem.theta(v)
}

/// Sorted roots of `Θ_Z`.
pub fn find_all_roots<T: Scalar>(
    problem: &ClearingProblem<T>,
    grid_points: usize,
    tol: f64,
) -> Result<Vec<T>> {
    Ok(problem.find_all_roots(grid_points, tol)?.roots)
}

pub fn existence_diagnosis<T: Scalar>(problem: &ClearingProblem<T>) -> ExistenceDiagnosis {
    problem.existence_diagnosis()
}

pub fn uniqueness_certificates<T: Scalar>(
    problem: &ClearingProblem<T>,
) -> Result<Vec<Certificate>> {
    problem.uniqueness_certificates()
}

pub fn clear<T: Scalar>(problem: &ClearingProblem<T>) -> Result<ClearingResult<T>> {
    problem.clear()
}

pub fn ruin_limit_price<T: Scalar>(
    problem: &ClearingProblem<T>,
    p_sequence: &[T],
) -> Result<Vec<T>> {
    problem.ruin_limit_price(p_sequence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioSpace;

    fn saturating() -> RiskProfile<f64> {
        RiskProfile::<f64>::saturating(2.3, (-5.0, 110.0)).unwrap()
    }

    fn fixture() -> ClearingProblem<f64> {
        let space = ScenarioSpace::new(vec![0.01, 0.99]).unwrap();
        let x = RandomVariable::new(&space, vec![1e-5, 100.0]).unwrap();
        let z = RandomVariable::new(&space, vec![2.0, 1e-5]).unwrap();
        ClearingProblem::new(&x, &z, saturating()).unwrap()
    }

    #[test]
    fn three_equilibria() {
        let p = fixture();
        let roots = p
            .find_all_roots(DEFAULT_GRID_POINTS, DEFAULT_TOL)
            .unwrap()
            .roots;
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([0.08403, 1.38977, 1.98985]) {
            assert!((r - e).abs() < 1e-4, "{r} vs {e}");
        }
        assert!((p.h_map(0.08403).unwrap() - 0.08403).abs() < 1e-4);
        assert!(p.uniqueness_certificates().unwrap().is_empty());
        let res = p.clear().unwrap();
        assert!((res.selected - 0.08403).abs() < 1e-4);
        assert_eq!(res.diagnosis, ExistenceDiagnosis::FullLineGuaranteed);
    }

    #[test]
    fn constant_claim_is_its_own_price() {
        let space = ScenarioSpace::new(vec![0.3, 0.7]).unwrap();
        let x = RandomVariable::new(&space, vec![1.0, 4.0]).unwrap();
        let z = RandomVariable::constant(&space, 0.75).unwrap();
        let p = ClearingProblem::new(&x, &z, saturating()).unwrap();
        assert_eq!(p.h_map(0.1).unwrap(), 0.75);
        assert_eq!(p.theta(0.75).unwrap(), 0.0);
        assert_eq!(p.find_all_roots(2049, 1e-10).unwrap().roots, vec![0.75]);
        assert_eq!(p.clear().unwrap().selected, 0.75);
    }

    #[test]
    fn linear_bernoulli_esscher_price() {
        let space = ScenarioSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVariable::constant(&space, 0.0).unwrap();
        let z = RandomVariable::new(&space, vec![0.0, 1.0]).unwrap();
        let p =
            ClearingProblem::new(&x, &z, RiskProfile::<f64>::linear(1.0, 0.0).unwrap()).unwrap();
        let expected = 1.0 / (1.0 + std::f64::consts::E);
        let roots = p.find_all_roots(2049, 1e-10).unwrap().roots;
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - expected).abs() < 1e-12);
        let scanned = p
            .find_roots_with(RootOptions {
                use_certificates: false,
                ..Default::default()
            })
            .unwrap()
            .roots;
        assert!((scanned[0] - expected).abs() < 1e-9);
        for v in [-3.0, 0.2, 5.0] {
            assert!((p.h_map(v).unwrap() - expected).abs() < 1e-14);
        }
        let certs = p.uniqueness_certificates().unwrap();
        assert!(certs.contains(&Certificate::Comonotone) && certs.contains(&Certificate::LinearR));
    }

    #[test]
    fn theta_positive_at_lower_end() {
        let p = fixture();
        assert!(p.theta(1e-5).unwrap() > 0.0);
    }

    #[test]
    fn half_line_singular_atom_and_cap() {
        let space = ScenarioSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVariable::constant(&space, 1.0).unwrap();
        let z = RandomVariable::new(&space, vec![0.0, 3.0]).unwrap();
        let p = ClearingProblem::new(&x, &z, RiskProfile::<f64>::log(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(p.existence_diagnosis(), ExistenceDiagnosis::SingularAtom);
        let res = p.clear().unwrap();
        assert_eq!(res.existence, Existence::FairPrice);
        assert!(res.selected > 0.0 && res.selected < 1.0);

        // Claim with no atom at the floor and heavy weight near it.
        let z = RandomVariable::new(&space, vec![0.0, 3.0])
            .unwrap()
            .shift(1.0)
            .with_declared_inf(0.0)
            .unwrap();
        let p = ClearingProblem::new(&x, &z, RiskProfile::<f64>::log(1.0, 1.0).unwrap()).unwrap();
        // H(1) = E[Z/Z]/E[1/Z] = 1/((1 + 1/4)/2) = 1.6 > 1
        assert_eq!(p.existence_diagnosis(), ExistenceDiagnosis::BoundaryFails);
        let res = p.clear().unwrap();
        assert_eq!(res.existence, Existence::LiquidityCapped);
        assert_eq!(res.selected, 1.0);
        for v in [0.0, 0.5, 0.9, 0.999] {
            assert!(p.theta(v).unwrap() > 0.0);
        }
    }

    #[test]
    fn domain_error_names_original_scenario() {
        let space = ScenarioSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVariable::new(&space, vec![5.0, 1.0]).unwrap();
        let z = RandomVariable::new(&space, vec![0.0, 0.0]).unwrap();
        let p = ClearingProblem::new(&x, &z, RiskProfile::<f64>::log(1.0, 1.0).unwrap()).unwrap();
        match p.h_map(2.0).unwrap_err() {
            Error::Domain { scenario, .. } => assert_eq!(scenario, 1),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn ruin_limit_of_constant_claim() {
        let space = ScenarioSpace::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVariable::new(&space, vec![1.0, 2.0]).unwrap();
        let z = RandomVariable::constant(&space, 0.4).unwrap();
        let p = ClearingProblem::new(&x, &z, RiskProfile::<f64>::log(1.0, 1.0).unwrap()).unwrap();
        for v in p.ruin_limit_price(&[0.9, 0.99, 0.999]).unwrap() {
            assert!((v - 0.4f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_precision_smoke() {
        let space = ScenarioSpace::<f32>::new(vec![0.5, 0.5]).unwrap();
        let x = RandomVariable::constant(&space, 0.0f32).unwrap();
        let z = RandomVariable::new(&space, vec![0.0f32, 1.0]).unwrap();
        let p =
            ClearingProblem::new(&x, &z, RiskProfile::<f32>::linear(1.0f32, 0.0).unwrap()).unwrap();
        let v = p.clear().unwrap().selected;
        assert!((v - 0.268_941_4).abs() < 1e-5);
    }
}
