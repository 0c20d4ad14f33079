//! Randomized property checks, shared by the proptest suites and the
//! acceptance run.

use endodemand::closed_forms::{esscher_price, EsscherMarket};
use endodemand::quadrature::adaptive_simpson;
use endodemand::{
    cross_impact_grid, Certificate, ClearingProblem, Law, Liquidation, RandomVariable, RiskProfile,
    SamplingConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError};

use super::{space, Rv};

pub const CASES: u32 = 128;

/// Fixed seed so every run draws the same fixtures.
pub fn config() -> Config {
    Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(0x5eed_2025),
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..Config::default()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Family {
    Linear(f64),
    Log(f64),
    Saturating(f64),
}

impl Family {
    pub fn profile(self) -> RiskProfile<f64> {
        match self {
            Family::Linear(a) => RiskProfile::linear(a, 0.0).unwrap(),
            Family::Log(eta) => RiskProfile::log(eta, 1.0).unwrap(),
            Family::Saturating(s) => RiskProfile::saturating(s, (-20.0, 20.0)).unwrap(),
        }
    }

    fn half_line(self) -> bool {
        matches!(self, Family::Log(_))
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub weights: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub family: Family,
}

impl Case {
    pub fn vars(&self) -> (Rv, Rv) {
        let s = space(&self.weights);
        (
            RandomVariable::new(&s, self.x.clone()).unwrap(),
            RandomVariable::new(&s, self.z.clone()).unwrap(),
        )
    }

    pub fn problem(&self) -> ClearingProblem<f64> {
        let (x, z) = self.vars();
        ClearingProblem::new(&x, &z, self.family.profile()).unwrap()
    }

    pub fn selected(&self) -> f64 {
        self.problem().clear().unwrap().selected
    }
}

pub fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let err = 1.0 - w.iter().sum::<f64>();
    let k = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    w[k] += err;
    w
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(normalize)
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.1f64..3.0).prop_map(Family::Linear),
        (0.1f64..2.0).prop_map(Family::Log),
        (-1.0f64..3.0).prop_map(Family::Saturating),
    ]
}

/// Any admissible clearing problem.
pub fn any_case() -> impl Strategy<Value = Case> {
    (2usize..10, family()).prop_flat_map(|(n, fam)| {
        let xr = if fam.half_line() { 0.2..3.0 } else { -2.0..2.0 };
        (
            weights(n),
            prop::collection::vec(xr, n),
            prop::collection::vec(-1.0f64..2.0, n),
            Just(fam),
        )
            .prop_map(|(weights, x, z, family)| Case {
                weights,
                x,
                z,
                family,
            })
    })
}

/// Families for which `z ↦ z e^{-R(x + z)}` is nondecreasing and concave on
/// the claim's range: log with `η ≤ 1`, or linear with `α · range ≤ 1`.
pub fn certified_case() -> impl Strategy<Value = Case> {
    (2usize..10, any::<bool>(), 0.1f64..1.0).prop_flat_map(|(n, log, k)| {
        (
            weights(n),
            prop::collection::vec(0.2f64..3.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            Just((log, k)),
        )
            .prop_map(|(weights, x, z, (log, k))| {
                let range = z.iter().copied().fold(f64::MIN, f64::max)
                    - z.iter().copied().fold(f64::MAX, f64::min);
                let family = if log {
                    Family::Log(k)
                } else {
                    Family::Linear(k / range.max(1e-3))
                };
                Case {
                    weights,
                    x,
                    z,
                    family,
                }
            })
    })
}

fn tol(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

pub fn bounds(case: &Case) -> Result<(), TestCaseError> {
    let (_, z) = case.vars();
    let v = case.selected();
    prop_assert!(
        v >= z.ess_inf() - tol(v) && v <= z.ess_sup() + tol(v),
        "{v} outside [{}, {}]",
        z.ess_inf(),
        z.ess_sup()
    );
    Ok(())
}

pub fn translativity(case: &Case, c: f64) -> Result<(), TestCaseError> {
    let v = case.selected();
    let mut shifted = case.clone();
    shifted.z.iter_mut().for_each(|z| *z += c);
    let w = shifted.selected();
    prop_assert!(
        (w - v - c).abs() <= tol(w),
        "V(Z + {c}) = {w}, V(Z) + c = {}",
        v + c
    );
    Ok(())
}

pub fn law_invariance(case: &Case, key: u64) -> Result<(), TestCaseError> {
    let n = case.weights.len();
    let mut perm: Vec<usize> = (0..n).collect();
    // deterministic shuffle keyed by `key`
    perm.sort_by_key(|&i| (i as u64 + 1).wrapping_mul(key | 1).rotate_left(17));
    let permuted = Case {
        weights: perm.iter().map(|&i| case.weights[i]).collect(),
        x: perm.iter().map(|&i| case.x[i]).collect(),
        z: perm.iter().map(|&i| case.z[i]).collect(),
        family: case.family,
    };
    prop_assert_eq!(case.selected().to_bits(), permuted.selected().to_bits());
    Ok(())
}

fn has(p: &ClearingProblem<f64>, c: Certificate) -> bool {
    p.uniqueness_certificates().unwrap().contains(&c)
}

pub fn lipschitz_monotone(case: &Case, delta: &[f64]) -> Result<(), TestCaseError> {
    let mut lower = case.clone();
    for (z, d) in lower.z.iter_mut().zip(delta) {
        *z -= d;
    }
    let (p1, p2) = (case.problem(), lower.problem());
    prop_assume!(has(&p1, Certificate::MonotoneMap) && has(&p2, Certificate::MonotoneMap));
    let (v1, v2) = (p1.clear().unwrap().selected, p2.clear().unwrap().selected);
    let sup = delta.iter().copied().fold(0.0, f64::max);
    prop_assert!(v1 >= v2 - tol(v1), "not monotone: {v1} < {v2}");
    prop_assert!(
        v1 - v2 <= sup + tol(v1),
        "Lipschitz bound: {} > {sup}",
        v1 - v2
    );
    Ok(())
}

pub fn concavity(a: &Case, z2: &[f64]) -> Result<(), TestCaseError> {
    let b = Case {
        z: z2.to_vec(),
        ..a.clone()
    };
    let (pa, pb) = (a.problem(), b.problem());
    prop_assume!(has(&pa, Certificate::ConcaveMap) && has(&pb, Certificate::ConcaveMap));
    let (va, vb) = (pa.clear().unwrap().selected, pb.clear().unwrap().selected);
    for lambda in [0.25, 0.5, 0.75] {
        let mix = Case {
            z: a.z
                .iter()
                .zip(z2)
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                .collect(),
            ..a.clone()
        };
        let pm = mix.problem();
        prop_assume!(has(&pm, Certificate::ConcaveMap));
        let vm = pm.clear().unwrap().selected;
        let chord = lambda * va + (1.0 - lambda) * vb;
        prop_assert!(vm >= chord - tol(vm), "λ = {lambda}: {vm} < {chord}");
    }
    Ok(())
}

/// A liquidation fixture where scenario 0 carries the minima of both `X`
/// and `q`, so joint ruin holds.
#[derive(Debug, Clone)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub family: Family,
}

impl Portfolio {
    pub fn liquidation(&self) -> Liquidation<f64> {
        let s = space(&self.weights);
        let x = RandomVariable::new(&s, self.x.clone()).unwrap();
        let q = RandomVariable::new(&s, self.q.clone()).unwrap();
        Liquidation::new(&x, &q, self.family.profile()).unwrap()
    }

    pub fn q_inf(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn portfolio(deterministic_x: bool) -> impl Strategy<Value = Portfolio> {
    (2usize..8, any::<bool>(), 0.1f64..1.0).prop_flat_map(move |(n, log, k)| {
        (
            weights(n),
            prop::collection::vec(0.5f64..3.0, n),
            prop::collection::vec(0.1f64..2.0, n),
            Just((log, k)),
        )
            .prop_map(move |(weights, mut x, mut q, (log, k))| {
                if deterministic_x {
                    let c = x[0];
                    x.iter_mut().for_each(|v| *v = c);
                }
                let (xi, qi) = (argmin(&x), argmin(&q));
                x.swap(0, xi);
                q.swap(0, qi);
                let family = if log {
                    Family::Log(k)
                } else {
                    Family::Linear(2.0 * k)
                };
                Portfolio {
                    weights,
                    x,
                    q,
                    family,
                }
            })
    })
}

fn argmin(v: &[f64]) -> usize {
    (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

pub fn vwap_shape(p: &Portfolio) -> Result<(), TestCaseError> {
    let liq = p.liquidation();
    let grid: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    let curve = liq.curve_on(&grid).unwrap();
    for k in 0..grid.len() {
        prop_assert!(
            curve.f_bar[k] >= p.q_inf() - 1e-12,
            "f̄({}) = {} below ess_inf q",
            grid[k],
            curve.f_bar[k]
        );
        if k > 0 {
            prop_assert!(
                curve.f_bar[k] <= curve.f_bar[k - 1] + 1e-9,
                "f̄ increases between {} and {}",
                grid[k - 1],
                grid[k]
            );
        }
    }
    Ok(())
}

pub fn integral_identity(p: &Portfolio, s: f64) -> Result<(), TestCaseError> {
    let liq = p.liquidation();
    let lhs = s * liq.vwap(s).unwrap();
    let mut f = |t: f64| liq.order_book_density(t);
    let rhs = adaptive_simpson(&mut f, 0.0, s, 1e-10 * lhs.abs().max(1.0)).unwrap();
    prop_assert!(
        (lhs - rhs).abs() <= 1e-6 * lhs.abs(),
        "s f̄(s) = {lhs}, ∫f = {rhs}"
    );
    Ok(())
}

pub fn esscher_monotone(weights: &[f64], z: &[f64], a1: f64, a2: f64) -> Result<(), TestCaseError> {
    let s = space(weights);
    let z = RandomVariable::new(&s, z.to_vec()).unwrap();
    let (lo, hi) = (a1.min(a2), a1.max(a2));
    let p_lo = esscher_price(&EsscherMarket::new(lo).unwrap(), &z);
    let p_hi = esscher_price(&EsscherMarket::new(hi).unwrap(), &z);
    prop_assert!(
        p_hi <= p_lo + 1e-12,
        "price rises with aversion: {p_lo} -> {p_hi}"
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TwoAssets {
    pub seed: u64,
    pub mu: [f64; 2],
    pub var: [f64; 2],
    pub alpha: f64,
    pub s1: f64,
    pub s2: f64,
}

pub fn two_assets() -> impl Strategy<Value = TwoAssets> {
    (
        any::<u64>(),
        (0.5f64..2.0, 0.5f64..2.0),
        (0.01f64..0.5, 0.01f64..0.5),
        0.2f64..2.0,
        0.1f64..3.0,
        0.1f64..3.0,
    )
        .prop_map(|(seed, mu, var, alpha, s1, s2)| TwoAssets {
            seed,
            mu: [mu.0, mu.1],
            var: [var.0, var.1],
            alpha,
            s1,
            s2,
        })
}

pub const MARGINAL_SAMPLES: usize = 60;

/// Two sampled marginals combined on their product space, so the assets are
/// exactly independent. Then `f̄_1(s1, s2)` must not depend on `s2`.
pub fn no_cross_impact(t: &TwoAssets) -> Result<(), TestCaseError> {
    let draw = |k: usize| -> Vec<f64> {
        SamplingConfig::new(
            Law::Normal {
                mean: vec![t.mu[k]],
                cov: vec![vec![t.var[k]]],
            },
            MARGINAL_SAMPLES,
            t.seed.wrapping_add(k as u64),
        )
        .sample_one::<f64>()
        .unwrap()
        .values()
        .to_vec()
    };
    let (a, b) = (draw(0), draw(1));
    let m = MARGINAL_SAMPLES;
    let s = space(&vec![1.0 / (m * m) as f64; m * m]);
    let q1: Vec<f64> = (0..m * m).map(|i| a[i / m]).collect();
    let q2: Vec<f64> = (0..m * m).map(|i| b[i % m]).collect();
    let qs = [
        RandomVariable::new(&s, q1).unwrap(),
        RandomVariable::new(&s, q2).unwrap(),
    ];
    let x = RandomVariable::constant(&s, 0.0).unwrap();
    let profile = RiskProfile::linear(t.alpha, 0.0).unwrap();
    let nodes = cross_impact_grid(&x, &qs, &profile, &[vec![t.s1], vec![0.0, t.s2]]).unwrap();
    let (alone, joint) = (nodes[0].f_bar[0], nodes[1].f_bar[0]);
    prop_assert!(
        (joint - alone).abs() <= 1e-9 * alone.abs().max(1.0),
        "f̄_1 moves with s2: {alone} -> {joint}"
    );
    let (alone, joint) = (nodes[0].f[0], nodes[1].f[0]);
    prop_assert!(
        (joint - alone).abs() <= 1e-9 * alone.abs().max(1.0),
        "f_1 moves with s2: {alone} -> {joint}"
    );
    Ok(())
}
