use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;

/// Expected fraction of correctly inferred nodes on a path of `n` nodes when
/// `s` origins are drawn uniformly with replacement.
///
/// Every node is recoverable when the left end is among the origins;
/// otherwise the nodes up to the rightmost origin are, and half of the rest
/// by guessing.
pub fn info_bound_closed_form(n: usize, s: usize) -> Result<f64> {
    if n < 2 || s < 1 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 2 and s >= 1, got ({n}, {s})"
        )));
    }
    let nf = n as f64;
    let si = s as i32;
    let miss = ((nf - 1.0) / nf).powi(si);
    let mut tail = 0.0;
    for i in 2..=n {
        let hi = ((i - 1) as f64 / (nf - 1.0)).powi(si);
        let lo = ((i - 2) as f64 / (nf - 1.0)).powi(si);
        tail += (nf + i as f64) / 2.0 * (hi - lo);
    }
    Ok(((1.0 - miss) * nf + miss * tail) / nf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Direct simulation of the origin draw behind the closed form.
pub fn info_bound_monte_carlo(n: usize, s: usize, trials: u64, seed: u64) -> Result<MonteCarlo> {
    if n < 2 || s < 1 || trials < 1 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 2, s >= 1, trials >= 1, got ({n}, {s}, {trials})"
        )));
    }
    let mut rng = seed::rng(seed);
    let nf = n as f64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..trials {
        let (mut lo, mut hi) = (usize::MAX, 0);
        for _ in 0..s {
            let o = rng.gen_range(1..=n);
            lo = lo.min(o);
            hi = hi.max(o);
        }
        let score = if lo == 1 { nf } else { (nf + hi as f64) / 2.0 } / nf;
        sum += score;
        sq += score * score;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = (sq / t - mean * mean).max(0.0);
    Ok(MonteCarlo {
        mean,
        stderr: (var / t).sqrt(),
        trials,
    })
}
