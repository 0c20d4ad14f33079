//! Deterministic, overflow-safe evaluation of exponentially tilted sums.
//!
//! Sums are accumulated over fixed-size chunks, each with its own log-shift,
//! and the chunk partials are combined in chunk order. The result does not
//! depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CHUNK: usize = 4096;
const PARALLEL_MIN: usize = 8 * CHUNK;

/// `Σ_i exp(l_i - shift) · t_i` with `shift = max_i l_i`, where
/// `eval(i) = (l_i, t_i)`. Returns `(shift, sums)`.
pub(crate) fn tilted_sums<T, const K: usize, F>(n: usize, eval: F) -> Result<(T, [T; K])>
where
    T: Scalar,
    F: Fn(usize) -> Result<(T, [T; K])> + Sync,
{
    let chunk = |c: usize| -> Result<(T, [T; K])> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut buf = Vec::with_capacity(hi - lo);
        let mut shift = T::neg_infinity();
        for i in lo..hi {
            let (l, t) = eval(i)?;
            if l.is_nan() || l == T::infinity() {
                return Err(Error::Domain {
                    scenario: i,
                    value: l.as_f64(),
                    domain: "finite log-tilts".into(),
                });
            }
            shift = shift.max(l);
            buf.push((l, t));
        }
        let mut sums = [T::zero(); K];
        for (l, t) in buf {
            let e = (l - shift).exp();
            for k in 0..K {
                sums[k] = sums[k] + e * t[k];
            }
        }
        Ok((shift, sums))
    };
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<(T, [T; K])> = if n >= PARALLEL_MIN {
        (0..chunks)
            .into_par_iter()
            .map(chunk)
            .collect::<Result<_>>()?
    } else {
        (0..chunks).map(chunk).collect::<Result<_>>()?
    };
    let shift = partials.iter().map(|p| p.0).fold(T::neg_infinity(), T::max);
    let mut sums = [T::zero(); K];
    for (s, p) in partials {
        if s == T::neg_infinity() {
            continue;
        }
        let e = (s - shift).exp();
        for k in 0..K {
            sums[k] = sums[k] + e * p[k];
        }
    }
    Ok((shift, sums))
}

/// Evaluates `f` on every grid point, in parallel for long grids, preserving
/// order.
pub(crate) fn map_grid<T, U, F>(grid: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if grid.len() >= 64 {
        grid.par_iter().map(f).collect()
    } else {
        grid.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_and_survives_large_exponents() {
        let n = 100_000;
        let (shift, [s]) =
            tilted_sums::<f64, 1, _>(n, |i| Ok((800.0 + (i % 7) as f64, [1.0]))).unwrap();
        assert_eq!(shift, 806.0);
        let naive: f64 = (0..n).map(|i| ((i % 7) as f64 - 6.0).exp()).sum();
        assert!((s - naive).abs() < 1e-9 * naive);
    }

    #[test]
    fn rejects_nan_tilts() {
        let r = tilted_sums::<f64, 1, _>(3, |i| Ok((if i == 1 { f64::NAN } else { 0.0 }, [1.0])));
        assert!(r.is_err());
    }
}
