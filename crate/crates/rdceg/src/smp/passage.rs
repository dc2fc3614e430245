//! Monte Carlo first-passage analysis on a semi-Markov process.
//!
//! Trajectories follow the embedded chain with holding times drawn from the
//! per-transition laws. Workers own seed-derived independent streams and
//! results merge deterministically by worker index, so a fixed seed gives a
//! fixed answer.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RdcegError, Result};
use crate::numeric::split_seed;
use crate::smp::process::Smp;

const QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstPassageSummary {
    pub from: String,
    pub to: String,
    pub horizon: f64,
    pub n_samples: usize,
    pub hits: usize,
    /// Empirical probability of reaching the target by the horizon.
    pub hit_probability: f64,
    /// Binomial standard error of the hit probability.
    pub standard_error: f64,
    /// Mean hitting time among hitting trajectories.
    pub mean_hit_time: Option<f64>,
    /// Standard error of the mean hitting time.
    pub mean_hit_time_se: Option<f64>,
    /// (p, quantile) pairs of the hitting-time sample among hits.
    pub quantiles: Vec<(f64, f64)>,
    /// Present when the target cannot be reached in the embedded chain.
    pub diagnostic: Option<String>,
}

/// Simulates first passage from `from` to `to` within `horizon`.
///
/// Convention: when `from == to` the passage time is 0 and every sample hits.
pub fn first_passage(
    smp: &Smp,
    from: usize,
    to: usize,
    horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<FirstPassageSummary> {
    if from >= smp.n_states() || to >= smp.n_states() {
        return Err(RdcegError::UnknownState(format!(
            "first passage states ({from}, {to}) out of range"
        )));
    }
    if n_samples == 0 {
        return Err(RdcegError::InvalidParameter(
            "first passage needs at least one sample".into(),
        ));
    }
    if !horizon.is_finite() && !(horizon == f64::INFINITY) || horizon <= 0.0 {
        return Err(RdcegError::InvalidParameter(
            "horizon must be positive".into(),
        ));
    }

    let diagnostic = if !reachable(smp, from, to) && from != to {
        Some(format!(
            "target {} is unreachable from {} in the embedded chain; the hit probability estimate is structurally zero",
            smp.states[to].name, smp.states[from].name
        ))
    } else {
        None
    };

    let mut hit_times: Vec<f64> = Vec::new();
    if from == to {
        hit_times = vec![0.0; n_samples];
    } else if diagnostic.is_none() {
        for i in 0..n_samples {
            let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, i as u64));
            if let Some(t) = simulate_one(smp, from, to, horizon, &mut rng) {
                hit_times.push(t);
            }
        }
    }

    let hits = hit_times.len();
    let p = hits as f64 / n_samples as f64;
    let se = (p * (1.0 - p) / n_samples as f64).sqrt();
    hit_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (mean, mean_se) = if hits > 0 {
        let m = hit_times.iter().sum::<f64>() / hits as f64;
        let var =
            hit_times.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (hits.max(2) - 1) as f64;
        (Some(m), Some((var / hits as f64).sqrt()))
    } else {
        (None, None)
    };
    let quantiles = if hits > 0 {
        QUANTILES
            .iter()
            .map(|&q| {
                let idx = ((hits - 1) as f64 * q).round() as usize;
                (q, hit_times[idx])
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(FirstPassageSummary {
        from: smp.states[from].name.clone(),
        to: smp.states[to].name.clone(),
        horizon,
        n_samples,
        hits,
        hit_probability: p,
        standard_error: se,
        mean_hit_time: mean,
        mean_hit_time_se: mean_se,
        quantiles,
        diagnostic,
    })
}

fn simulate_one(
    smp: &Smp,
    from: usize,
    to: usize,
    horizon: f64,
    rng: &mut ChaCha12Rng,
) -> Option<f64> {
    use rand::Rng;
    let mut at = from;
    let mut clock = 0.0;
    loop {
        if smp.states[at].absorbing {
            return None;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = None;
        for (j, &p) in smp.trans[at].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            if u <= acc {
                next = Some(j);
                break;
            }
        }
        let j = next.unwrap_or_else(|| {
            smp.trans[at]
                .iter()
                .rposition(|&p| p > 0.0)
                .expect("non-absorbing state has a transition")
        });
        if let Some(law) = &smp.laws[at][j] {
            clock += law.sample(rng);
        }
        if clock > horizon {
            return None;
        }
        if j == to {
            return Some(clock);
        }
        at = j;
    }
}

fn reachable(smp: &Smp, from: usize, to: usize) -> bool {
    let n = smp.n_states();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for (j, flag) in seen.iter_mut().enumerate() {
            if smp.trans[v][j] > 0.0 && !*flag {
                if j == to {
                    return true;
                }
                *flag = true;
                stack.push(j);
            }
        }
    }
    false
}
