//! Fixtures and oracles shared by the integration tests.
#![allow(dead_code)]

pub mod props;

use std::sync::Arc;

use endodemand::scenario::ScenarioSpace;
use endodemand::{ClearingProblem, Law, RandomVariable, RiskProfile, SamplingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rv = RandomVariable<f64>;

pub struct Fixture {
    pub name: String,
    pub x: Rv,
    pub z: Rv,
    pub profile: RiskProfile<f64>,
}

impl Fixture {
    pub fn problem(&self) -> ClearingProblem<f64> {
        ClearingProblem::new(&self.x, &self.z, self.profile.clone()).unwrap()
    }
}

pub fn space(w: &[f64]) -> Arc<ScenarioSpace<f64>> {
    ScenarioSpace::new(w.to_vec()).unwrap()
}

pub fn rv(space: &Arc<ScenarioSpace<f64>>, v: &[f64]) -> Rv {
    RandomVariable::new(space, v.to_vec()).unwrap()
}

pub fn three_equilibria() -> Fixture {
    let s = space(&[0.01, 0.99]);
    Fixture {
        name: "three equilibria".into(),
        x: rv(&s, &[1e-5, 100.0]),
        z: rv(&s, &[2.0, 1e-5]),
        profile: RiskProfile::saturating(2.3, (-10.0, 110.0)).unwrap(),
    }
}

/// Random probability vector of length `n`, bounded away from zero.
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    // push the rounding residue into the largest weight
    let err = 1.0 - w.iter().sum::<f64>();
    let k = (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    w[k] += err;
    w
}

pub fn lognormal(sigma: f64, n: usize, seed: u64) -> Rv {
    SamplingConfig::new(
        Law::Lognormal {
            mu: -sigma * sigma / 2.0,
            sigma2: sigma * sigma,
        },
        n,
        seed,
    )
    .sample_one()
    .unwrap()
}

/// Fixtures for the root-finding oracle comparison.
pub fn fixture_suite() -> Vec<Fixture> {
    let mut out = vec![three_equilibria()];
    let s2 = space(&[0.5, 0.5]);
    out.push(Fixture {
        name: "constant claim".into(),
        x: rv(&s2, &[0.0, 1.0]),
        z: rv(&s2, &[0.7, 0.7]),
        profile: RiskProfile::linear(1.0, 0.0).unwrap(),
    });
    out.push(Fixture {
        name: "linear bernoulli".into(),
        x: RandomVariable::constant(&s2, 0.0).unwrap(),
        z: rv(&s2, &[0.0, 1.0]),
        profile: RiskProfile::linear(1.0, 0.0).unwrap(),
    });
    for (shift, scale) in [(1.5, 1.0), (2.3, 0.5), (3.0, 1.0), (2.3, 1.5)] {
        let s = space(&[0.01, 0.99]);
        out.push(Fixture {
            name: format!("saturating shift {shift} scale {scale}"),
            x: rv(&s, &[1e-5, 100.0]),
            z: rv(&s, &[2.0 * scale, 1e-5]),
            profile: RiskProfile::saturating(shift, (-10.0, 110.0)).unwrap(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20_251_017);
    for k in 0..6 {
        let n = rng.random_range(3..9);
        let s = space(&random_weights(&mut rng, n));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..3.0)).collect();
        out.push(Fixture {
            name: format!("random linear {k}"),
            x: rv(&s, &x),
            z: rv(&s, &z),
            profile: RiskProfile::linear(rng.random_range(0.2..3.0), 0.0).unwrap(),
        });
    }
    for k in 0..6 {
        let n = rng.random_range(3..9);
        let s = space(&random_weights(&mut rng, n));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let eta = rng.random_range(0.3..2.0);
        out.push(Fixture {
            name: format!("random log {k} (eta {eta:.2})"),
            x: rv(&s, &x),
            z: rv(&s, &z),
            profile: RiskProfile::log(eta, 1.0).unwrap(),
        });
    }
    let q = lognormal(0.5, 2000, 77);
    let x = RandomVariable::constant(q.space(), 2.0).unwrap();
    for s in [1.0, 2.0, 3.0] {
        out.push(Fixture {
            name: format!("lognormal s = {s}"),
            x: x.clone(),
            z: q.scale(s),
            profile: RiskProfile::log(1.0, 1.0).unwrap(),
        });
    }
    out
}

/// `Θ(v)` summed directly, with a single log-shift.
pub fn oracle_theta(f: &Fixture, v: f64) -> f64 {
    let (x, z, w) = (f.x.values(), f.z.values(), f.x.weights());
    let l: Vec<f64> = (0..x.len())
        .map(|i| w[i].ln() - f.profile.r(x[i] + z[i] - v))
        .collect();
    let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..x.len()).map(|i| (z[i] - v) * (l[i] - m).exp()).sum()
}

/// Sign-change census of `Θ` on `points` equally spaced nodes of `[lo, hi]`.
/// Returns the cell midpoints (or nodes, for exact zeros) and the cell width.
pub fn brute_force_roots(f: &Fixture, lo: f64, hi: f64, points: usize) -> (Vec<f64>, f64) {
    if hi <= lo {
        let t = oracle_theta(f, lo);
        return (if t == 0.0 { vec![lo] } else { vec![] }, 0.0);
    }
    let cell = (hi - lo) / (points - 1) as f64;
    let nodes: Vec<f64> = (0..points)
        .map(|k| {
            if k == points - 1 {
                hi
            } else {
                lo + cell * k as f64
            }
        })
        .collect();
    let signs: Vec<i8> = nodes
        .iter()
        .map(|&v| {
            let t = oracle_theta(f, v);
            (t > 0.0) as i8 - (t < 0.0) as i8
        })
        .collect();
    let mut roots = Vec::new();
    let mut k = 0;
    while k < points {
        if signs[k] == 0 {
            let start = k;
            while k + 1 < points && signs[k + 1] == 0 {
                k += 1;
            }
            roots.push(0.5 * (nodes[start] + nodes[k]));
        } else if k + 1 < points && signs[k] * signs[k + 1] < 0 {
            roots.push(0.5 * (nodes[k] + nodes[k + 1]));
        }
        k += 1;
    }
    (roots, cell)
}

/// Second-order central difference.
pub fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
