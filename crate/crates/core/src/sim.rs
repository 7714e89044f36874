//! Frame-level Monte Carlo simulator.
//!
//! Each frame is simulated node by node: pull nodes sample an observation and
//! wake if it falls in the query range, push nodes hold a packet with
//! probability `p_λ`, then every backlogged node transmits in each slot with
//! probability `p`. A slot with exactly one transmitter is a success and the
//! node leaves immediately after its ACK; anything else leaves all
//! transmitters backlogged. Slots are aligned and packets are one slot long,
//! so carrier sensing at a slot boundary always finds the channel idle and
//! plays no part.
//!
//! Frame `i` of a campaign draws from ChaCha8 stream `i` keyed by the master
//! seed, so results do not depend on how frames are scheduled over threads.

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{make_frame_split, FrameSplit, ObservationModel, QueryRange, SystemConfig};

/// Frames per campaign unless asked otherwise.
pub const DEFAULT_FRAMES: usize = 50_000;

/// Trace of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub woken: usize,
    pub push_active: usize,
    /// `(pull node, 1-based slot)` of every delivered pull packet.
    pub pull_success_slots: Vec<(usize, usize)>,
    pub push_successes: usize,
    /// Node-slots in which a pull node transmitted.
    pub pull_tx_slots: usize,
    /// Node-slots in which a backlogged pull node listened.
    pub pull_listen_slots: usize,
    /// Joules.
    pub pull_energy: f64,
    /// Every woken pull node delivered by the end of the frame.
    pub accuracy_indicator: bool,
    /// `z_u / u`, or 1 when no push node was active.
    pub push_ratio: f64,
}

/// RNG stream for frame `frame_index` of a campaign.
pub fn frame_rng(master_seed: u64, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(frame_index);
    rng
}

#[derive(Clone, Copy)]
enum Class {
    Pull,
    Push,
}

struct Contention {
    tx: Bernoulli,
    pending_pull: Vec<usize>,
    pending_push: Vec<usize>,
    pull_success_slots: Vec<(usize, usize)>,
    push_successes: usize,
    pull_tx_slots: usize,
    pull_listen_slots: usize,
}

impl Contention {
    fn new(tx_prob: f64, pending_pull: Vec<usize>, pending_push: Vec<usize>) -> Self {
        Self {
            tx: Bernoulli::new(tx_prob).expect("tx_prob validated by SystemConfig"),
            pending_pull,
            pending_push,
            pull_success_slots: Vec::new(),
            push_successes: 0,
            pull_tx_slots: 0,
            pull_listen_slots: 0,
        }
    }

    /// One slot; push nodes only take part when `shared`.
    fn slot<R: Rng>(&mut self, t: usize, shared: bool, rng: &mut R) {
        let mut transmitters = 0usize;
        let mut last = None;
        for (i, _) in self.pending_pull.iter().enumerate() {
            if self.tx.sample(rng) {
                transmitters += 1;
                last = Some((Class::Pull, i));
            }
        }
        self.pull_tx_slots += transmitters;
        self.pull_listen_slots += self.pending_pull.len() - transmitters;
        if shared {
            for (i, _) in self.pending_push.iter().enumerate() {
                if self.tx.sample(rng) {
                    transmitters += 1;
                    last = Some((Class::Push, i));
                }
            }
        }
        if transmitters == 1 {
            match last {
                Some((Class::Pull, i)) => {
                    let node = self.pending_pull.remove(i);
                    self.pull_success_slots.push((node, t));
                }
                Some((Class::Push, i)) => {
                    self.pending_push.remove(i);
                    self.push_successes += 1;
                }
                None => unreachable!(),
            }
        }
    }
}

fn push_ratio(successes: usize, active: usize) -> f64 {
    if active == 0 {
        1.0
    } else {
        successes as f64 / active as f64
    }
}

fn draw_push_active<R: Rng>(config: &SystemConfig, rng: &mut R) -> Vec<usize> {
    let active = Bernoulli::new(config.push_activity()).expect("p_λ lies in [0, 1]");
    (0..config.n_push()).filter(|_| active.sample(rng)).collect()
}

/// Simulates one frame of the coexistence protocol.
pub fn run_frame<R: Rng>(
    config: &SystemConfig,
    range: &QueryRange,
    split: &FrameSplit,
    rng: &mut R,
) -> FrameOutcome {
    let model = config.observation_model();
    let woken: Vec<usize> = (0..config.n_pull())
        .filter(|_| range.contains(model.quantile(rng.random::<f64>())))
        .collect();
    let active = draw_push_active(config, rng);
    let (w, u) = (woken.len(), active.len());

    let mut c = Contention::new(config.tx_prob(), woken, active);
    for t in 1..=config.slots_per_frame() {
        c.slot(t, split.is_shared(t), rng);
    }

    let ts = config.slot_duration();
    FrameOutcome {
        woken: w,
        push_active: u,
        accuracy_indicator: c.pull_success_slots.len() == w,
        push_ratio: push_ratio(c.push_successes, u),
        pull_energy: c.pull_tx_slots as f64 * ts * config.power_tx()
            + c.pull_listen_slots as f64 * ts * config.power_rx(),
        pull_success_slots: c.pull_success_slots,
        push_successes: c.push_successes,
        pull_tx_slots: c.pull_tx_slots,
        pull_listen_slots: c.pull_listen_slots,
    }
}

/// One Round-Robin frame: pull node `i` transmits alone in slot `i + 1`,
/// push nodes contend over the remaining slots.
pub fn run_rr_frame<R: Rng>(config: &SystemConfig, rng: &mut R) -> Result<FrameOutcome> {
    let n_pull = config.n_pull();
    let slots = config.slots_per_frame();
    if n_pull > slots {
        return Err(Error::Infeasible(format!(
            "round robin needs {n_pull} pull slots but the frame has {slots}"
        )));
    }
    let active = draw_push_active(config, rng);
    let u = active.len();
    let mut c = Contention::new(config.tx_prob(), Vec::new(), active);
    for t in n_pull + 1..=slots {
        c.slot(t, true, rng);
    }
    Ok(FrameOutcome {
        woken: n_pull,
        push_active: u,
        pull_success_slots: (0..n_pull).map(|i| (i, i + 1)).collect(),
        push_successes: c.push_successes,
        pull_tx_slots: n_pull,
        pull_listen_slots: 0,
        pull_energy: n_pull as f64 * config.slot_duration() * config.power_tx(),
        accuracy_indicator: true,
        push_ratio: push_ratio(c.push_successes, u),
    })
}

/// Sample mean with its standard error; the error is `None` for a single
/// sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: Option<f64>,
}

impl Estimate {
    fn from_samples(samples: impl ExactSizeIterator<Item = f64> + Clone) -> Self {
        let n = samples.len();
        let mean = samples.clone().sum::<f64>() / n as f64;
        let std_error = (n > 1).then(|| {
            let ss: f64 = samples.map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        });
        Self { mean, std_error }
    }

    /// Whether `value` lies within `k` standard errors of the mean. A zero
    /// or missing standard error is floored at `1 / frames`, the resolution
    /// of a frame average of `[0, 1]` indicators.
    pub fn agrees_with(&self, value: f64, k: f64, frames: usize) -> bool {
        let se = self.std_error.unwrap_or(0.0).max(1.0 / frames as f64);
        (self.mean - value).abs() <= k * se
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimates {
    pub frames: usize,
    pub gamma_w: Estimate,
    pub gamma_u: Estimate,
    /// Joules.
    pub e_tot: Estimate,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

fn campaign<F>(frames: usize, master_seed: u64, exec: Execution, frame: F) -> Result<SimEstimates>
where
    F: Fn(&mut ChaCha8Rng) -> Result<FrameOutcome> + Sync,
{
    if frames == 0 {
        return Err(Error::Domain("a campaign needs at least one frame".into()));
    }
    let one = |i: usize| -> Result<[f64; 3]> {
        let out = frame(&mut frame_rng(master_seed, i as u64))?;
        Ok([
            if out.accuracy_indicator { 1.0 } else { 0.0 },
            out.push_ratio,
            out.pull_energy,
        ])
    };
    // Collected in frame order so the reduction below is identical either way.
    let samples: Vec<[f64; 3]> = match exec {
        Execution::Serial => (0..frames).map(one).collect::<Result<_>>()?,
        Execution::Parallel => (0..frames).into_par_iter().map(one).collect::<Result<_>>()?,
    };
    let column = |k: usize| Estimate::from_samples(samples.iter().map(move |s| s[k]));
    Ok(SimEstimates {
        frames,
        gamma_w: column(0),
        gamma_u: column(1),
        e_tot: column(2),
        master_seed,
    })
}

/// Monte Carlo estimates of `γ_w`, `γ_u` and `E_tot` for a CoWu split.
pub fn run_campaign(
    config: &SystemConfig,
    range: &QueryRange,
    alpha: f64,
    frames: usize,
    master_seed: u64,
) -> Result<SimEstimates> {
    run_campaign_with(config, range, alpha, frames, master_seed, Execution::default())
}

pub fn run_campaign_with(
    config: &SystemConfig,
    range: &QueryRange,
    alpha: f64,
    frames: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<SimEstimates> {
    crate::model::wake_probability(&config.observation_model(), range)?;
    let split = make_frame_split(alpha, config.slots_per_frame())?;
    campaign(frames, master_seed, exec, |rng| {
        Ok(run_frame(config, range, &split, rng))
    })
}

/// Monte Carlo estimates for the Round-Robin baseline.
pub fn run_rr_campaign(config: &SystemConfig, frames: usize, master_seed: u64) -> Result<SimEstimates> {
    run_rr_campaign_with(config, frames, master_seed, Execution::default())
}

pub fn run_rr_campaign_with(
    config: &SystemConfig,
    frames: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<SimEstimates> {
    if config.n_pull() > config.slots_per_frame() {
        return Err(Error::Infeasible(format!(
            "round robin needs {} pull slots but the frame has {}",
            config.n_pull(),
            config.slots_per_frame()
        )));
    }
    campaign(frames, master_seed, exec, |rng| run_rr_frame(config, rng))
}
