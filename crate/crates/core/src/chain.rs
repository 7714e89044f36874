//! Absorbing Markov chain over the number of packets still waiting under
//! slotted p-persistent contention.
//!
//! State `s` counts backlogged packets. From `s` the chain moves to `s - 1`
//! when exactly one of the `s` contenders transmits, and stays otherwise, so
//! the transition matrix is lower bidiagonal with `0` absorbing. The chain is
//! kept implicit: one propagation step is a single ascending sweep.

use crate::error::{domain, Result};

/// Probability that exactly one of `s` contenders transmits in a slot,
/// `s p (1-p)^(s-1)`.
pub fn transition_success_prob(s: usize, p: f64) -> f64 {
    if s == 0 {
        return 0.0;
    }
    s as f64 * p * (1.0 - p).powi(s as i32 - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContentionChain {
    max_packets: usize,
    tx_prob: f64,
    // success[s] = p_{s,s-1}
    success: Vec<f64>,
}

impl ContentionChain {
    pub fn new(max_packets: usize, tx_prob: f64) -> Result<Self> {
        if !(tx_prob > 0.0 && tx_prob <= 1.0) {
            return domain(format!("tx_prob must lie in (0, 1], got {tx_prob}"));
        }
        let success = (0..=max_packets)
            .map(|s| transition_success_prob(s, tx_prob))
            .collect();
        Ok(Self {
            max_packets,
            tx_prob,
            success,
        })
    }

    pub fn max_packets(&self) -> usize {
        self.max_packets
    }

    pub fn tx_prob(&self) -> f64 {
        self.tx_prob
    }

    /// Transition probability `from -> to`; zero for anything that is not a
    /// self-loop or a single step down.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        if from > self.max_packets || to > self.max_packets {
            return 0.0;
        }
        if to == from {
            1.0 - self.success[from]
        } else if to + 1 == from {
            self.success[from]
        } else {
            0.0
        }
    }

    pub fn initial(&self) -> StateDistribution {
        let mut probs = vec![0.0; self.max_packets + 1];
        probs[self.max_packets] = 1.0;
        StateDistribution {
            probs,
            elapsed_steps: 0,
        }
    }

    /// Advances `dist` by one slot in place.
    pub fn step(&self, dist: &mut StateDistribution) {
        step_in_place(&mut dist.probs, &self.success);
        dist.elapsed_steps += 1;
    }

    /// `Φ(steps)` starting from all mass on state `J`.
    pub fn propagate(&self, steps: usize) -> StateDistribution {
        let mut dist = self.initial();
        for _ in 0..steps {
            self.step(&mut dist);
        }
        dist
    }
}

fn step_in_place(probs: &mut [f64], success: &[f64]) {
    let n = probs.len();
    for s in 0..n {
        let stay = probs[s] * (1.0 - success[s]);
        let arrive = if s + 1 < n {
            probs[s + 1] * success[s + 1]
        } else {
            0.0
        };
        probs[s] = stay + arrive;
    }
}

/// Distribution over chain states after some number of slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    probs: Vec<f64>,
    elapsed_steps: usize,
}

impl StateDistribution {
    /// `φ_s`, the probability that `s` packets are still waiting.
    pub fn phi(&self, s: usize) -> f64 {
        self.probs.get(s).copied().unwrap_or(0.0)
    }

    /// Probabilities indexed by state.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn elapsed_steps(&self) -> usize {
        self.elapsed_steps
    }
}

/// Probability that exactly `j` of `total` packets are delivered within
/// `slots` slots.
pub fn success_pmf(j: usize, total: usize, slots: usize, p: f64) -> Result<f64> {
    if j > total {
        return domain(format!("cannot deliver {j} of {total} packets"));
    }
    Ok(ContentionChain::new(total, p)?.propagate(slots).phi(total - j))
}

/// Precomputed trajectories `Φ(0..=zeta_max)` for every chain size up to
/// `j_max`.
#[derive(Debug, Clone)]
pub struct SuccessTable {
    tx_prob: f64,
    zeta_max: usize,
    // per chain size J: (zeta_max + 1) rows of J + 1 state probabilities
    trajectories: Vec<Vec<f64>>,
}

impl SuccessTable {
    pub fn new(j_max: usize, zeta_max: usize, p: f64) -> Result<Self> {
        let top = ContentionChain::new(j_max, p)?;
        let trajectories = (0..=j_max)
            .map(|j| {
                let width = j + 1;
                let mut flat = vec![0.0; width * (zeta_max + 1)];
                flat[j] = 1.0;
                for t in 1..=zeta_max {
                    let (done, rest) = flat.split_at_mut(t * width);
                    let row = &mut rest[..width];
                    row.copy_from_slice(&done[(t - 1) * width..]);
                    step_in_place(row, &top.success[..width]);
                }
                flat
            })
            .collect();
        Ok(Self {
            tx_prob: p,
            zeta_max,
            trajectories,
        })
    }

    pub fn tx_prob(&self) -> f64 {
        self.tx_prob
    }

    pub fn j_max(&self) -> usize {
        self.trajectories.len() - 1
    }

    pub fn zeta_max(&self) -> usize {
        self.zeta_max
    }

    /// `Φ(t)` for a chain that started with `total` packets, indexed by state.
    ///
    /// Panics if `total > j_max` or `t > zeta_max`.
    pub fn distribution(&self, total: usize, t: usize) -> &[f64] {
        let width = total + 1;
        &self.trajectories[total][t * width..(t + 1) * width]
    }

    /// `P_s(j | total, t)`; zero when `j > total`.
    pub fn lookup(&self, j: usize, total: usize, t: usize) -> f64 {
        if j > total {
            return 0.0;
        }
        self.distribution(total, t)[total - j]
    }

    /// Iterator over `Φ(0), ..., Φ(zeta_max)` for chain size `total`.
    pub fn trajectory(&self, total: usize) -> impl Iterator<Item = &[f64]> {
        self.trajectories[total].chunks_exact(total + 1)
    }
}
