use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

const ADAPT_BATCH: usize = 50;
const TARGET_LOW: f64 = 0.2;
const TARGET_HIGH: f64 = 0.4;
const DIVERGENCE_WINDOW: usize = 1000;
const DIVERGENCE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Iterations kept after burn-in (before thinning).
    pub n_iter: usize,
    pub burn_in: usize,
    /// Step-size tuning iterations run before burn-in; steps are frozen afterwards.
    pub adapt_iters: usize,
    pub thin: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        Self { n_iter: 2000, burn_in: 1000, adapt_iters: 1000, thin: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// Thinned post-burn-in states.
    pub draws: Vec<Vec<f64>>,
    /// Post-adaptation acceptance rate per block.
    pub acceptance: Vec<f64>,
    pub steps: Vec<f64>,
}

/// Blockwise Gaussian random-walk Metropolis.
///
/// Each iteration proposes one move per block (all coordinates of the block
/// jointly, isotropic with that block's step) and accepts it with probability
/// min(1, π(new)/π(old)). `log_target` may return −∞ to forbid a state.
pub fn run_chain(
    log_target: impl Fn(&[f64]) -> f64,
    init: Vec<f64>,
    blocks: &[Range<usize>],
    mut steps: Vec<f64>,
    settings: &ChainSettings,
    rng: &mut StreamRng,
) -> Result<ChainOutput> {
    if steps.len() != blocks.len() {
        return Err(Error::invalid("one step size per block is required"));
    }
    if settings.thin == 0 {
        return Err(Error::invalid("thin must be at least 1"));
    }
    let mut state = init;
    let mut current = log_target(&state);
    if !current.is_finite() {
        return Err(Error::invalid("initial state has zero target density"));
    }
    let mut proposal = state.clone();

    let mut sweep = |state: &mut Vec<f64>, current: &mut f64, steps: &[f64], accepted: &mut [usize]| {
        for (k, block) in blocks.iter().enumerate() {
            proposal.copy_from_slice(state);
            for i in block.clone() {
                proposal[i] += steps[k] * rng.sample::<f64, _>(StandardNormal);
            }
            let candidate = log_target(&proposal);
            let u: f64 = rng.random();
            if candidate.is_finite() && u.ln() < candidate - *current {
                state.copy_from_slice(&proposal);
                *current = candidate;
                accepted[k] += 1;
            }
        }
    };

    let mut accepted = vec![0usize; blocks.len()];
    for it in 0..settings.adapt_iters {
        sweep(&mut state, &mut current, &steps, &mut accepted);
        if (it + 1) % ADAPT_BATCH == 0 {
            for (step, acc) in steps.iter_mut().zip(accepted.iter_mut()) {
                let rate = *acc as f64 / ADAPT_BATCH as f64;
                if rate < TARGET_LOW {
                    *step *= 0.7;
                } else if rate > TARGET_HIGH {
                    *step *= 1.3;
                }
                *acc = 0;
            }
        }
    }

    let total = settings.burn_in + settings.n_iter;
    let mut accepted = vec![0usize; blocks.len()];
    let mut window = 0usize;
    let mut draws = Vec::with_capacity(settings.n_iter / settings.thin + 1);
    for it in 0..total {
        let before: usize = accepted.iter().sum();
        sweep(&mut state, &mut current, &steps, &mut accepted);
        window += accepted.iter().sum::<usize>() - before;
        if (it + 1) % DIVERGENCE_WINDOW == 0 {
            let rate = window as f64 / (DIVERGENCE_WINDOW * blocks.len()) as f64;
            if rate < DIVERGENCE_RATE {
                return Err(Error::ChainDiverged { rate, iteration: it + 1 });
            }
            window = 0;
        }
        if it >= settings.burn_in && (it - settings.burn_in).is_multiple_of(settings.thin) {
            draws.push(state.clone());
        }
    }
    let acceptance = accepted.iter().map(|&a| a as f64 / total.max(1) as f64).collect();
    Ok(ChainOutput { draws, acceptance, steps })
}
