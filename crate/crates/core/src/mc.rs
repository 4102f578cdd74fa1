//! Monte Carlo sampling of the chain `x_{n+1} ~ P(x_n, .)`.
//!
//! Randomness comes from ChaCha8 seeded through SplitMix64, and uniform
//! variates are built from the top 53 bits of each 64-bit output, so a
//! given seed produces the same stream on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::kernel::TransitionKernel;
use crate::operator::act;
use crate::scalar::{compensated_sum, Scalar};
use crate::space::Observable;

/// Identity of the generator, recorded in reports.
pub const RNG_NAME: &str = "chacha8-splitmix64-seeded/53-bit-uniform";

/// SplitMix64 finalizer, a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream under `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ index)
}

/// Uniform variates in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed;
        for chunk in key.chunks_exact_mut(8) {
            s = mix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Stream { rng: ChaCha8Rng::from_seed(key) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Kernel rows as cumulative sums for inverse-CDF draws.
#[derive(Debug, Clone)]
pub struct Sampler<'a, T> {
    kernel: &'a TransitionKernel<T>,
    cumulative: Vec<Vec<f64>>,
}

impl<'a, T: Scalar> Sampler<'a, T> {
    pub fn new(kernel: &'a TransitionKernel<T>) -> Self {
        let cumulative = (0..kernel.size())
            .map(|i| {
                let mut acc = 0.0;
                kernel
                    .row(i)
                    .1
                    .iter()
                    .map(|p| {
                        acc += p.as_f64();
                        acc
                    })
                    .collect()
            })
            .collect();
        Sampler { kernel, cumulative }
    }

    /// Next state from `state` given a uniform `u ∈ [0, 1)`.
    pub fn step(&self, state: usize, u: f64) -> usize {
        let cum = &self.cumulative[state];
        let target = u * cum[cum.len() - 1];
        let pos = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        self.kernel.row(state).0[pos]
    }

    fn run(&self, start: usize, steps: usize, stream: &mut Stream) -> usize {
        let mut s = start;
        for _ in 0..steps {
            s = self.step(s, stream.uniform());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub start_state: usize,
    pub states: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

fn check_start(k: usize, start: usize) -> Result<()> {
    if start < k {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("start state {start} out of range for K = {k}")))
    }
}

/// `n` steps of the chain from `start`.
pub fn sample_trajectory<T: Scalar>(p: &TransitionKernel<T>, start: usize, n: usize, seed: u64) -> Result<Trajectory> {
    check_start(p.size(), start)?;
    let sampler = Sampler::new(p);
    let mut stream = Stream::new(seed);
    let mut states = Vec::with_capacity(n + 1);
    states.push(start);
    let mut s = start;
    for _ in 0..n {
        s = sampler.step(s, stream.uniform());
        states.push(s);
    }
    Ok(Trajectory { start_state: start, states, seed })
}

/// Estimates `(L^j phi)(start) = E[phi(x_j) | x_0 = start]` from
/// `n_samples` trajectories, the `t`-th seeded by `stream_seed(seed, t)`.
pub fn estimate_lj_phi<T: Scalar>(
    p: &TransitionKernel<T>,
    phi: &Observable<T>,
    start: usize,
    j: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_dim(p.size(), phi.len())?;
    check_start(p.size(), start)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    if j == 0 {
        return Ok(Estimate { mean: phi[start].as_f64(), stderr: 0.0, n_samples });
    }
    let sampler = Sampler::new(p);
    let values: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::new(stream_seed(seed, t));
            phi[sampler.run(start, j, &mut stream)].as_f64()
        })
        .collect();
    let n = n_samples as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let stderr = if n_samples > 1 {
        let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(Estimate { mean, stderr, n_samples })
}

/// `(1 / (n + 1)) Σ_t phi(x_t)`
pub fn empirical_time_average<T: Scalar>(traj: &Trajectory, phi: &Observable<T>) -> Result<f64> {
    if let Some(&bad) = traj.states.iter().find(|&&s| s >= phi.len()) {
        return Err(Error::Dimension { expected: phi.len(), found: bad + 1 });
    }
    let sum = compensated_sum(traj.states.iter().map(|&s| phi[s].as_f64()));
    Ok(sum / traj.states.len() as f64)
}

/// Exact `(L^j phi)` by repeated application, for comparison with estimates.
pub fn exact_lj_phi<T: Scalar>(p: &TransitionKernel<T>, phi: &Observable<T>, j: usize) -> Result<Observable<T>> {
    check_dim(p.size(), phi.len())?;
    let mut v = phi.values().to_vec();
    for _ in 0..j {
        v = act(p, &v);
    }
    Ok(Observable::from_raw(v))
}
