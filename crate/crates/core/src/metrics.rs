//! Closed-form coexistence metrics.
//!
//! Pull retrieval accuracy `γ_w`, push success probability `γ_u` and pull
//! energy `E_tot` are nested sums over the number of woken pull nodes `w`,
//! active push nodes `u`, pull packets left after the reserved window `r_w`,
//! successes in the shared window `y` and push successes among them `z_u`.
//!
//! The innermost sums over `y` and `z_u` depend only on the frame split and
//! `p`, not on the query range or the arrival rate, so [`SplitKernel`] folds
//! them once and a sweep over `λ` or `V_th` only redoes the outer
//! binomial averages.

use crate::chain::SuccessTable;
use crate::combin::{binomial_pmf, binomial_row, choose};
use crate::error::{domain, Error, Result};
use crate::model::{
    make_frame_split, wake_probability, FrameSplit, QueryRange, SystemConfig,
};

/// Probability that exactly `w` of `n_pull` nodes wake up.
pub fn pull_wake_pmf(w: usize, n_pull: usize, p_wake: f64) -> Result<f64> {
    if w > n_pull {
        return domain(format!("{w} woken nodes out of {n_pull}"));
    }
    Ok(binomial_pmf(w, n_pull, p_wake))
}

/// Probability that exactly `u` of `n_push` nodes hold a packet.
pub fn push_active_pmf(u: usize, n_push: usize, p_active: f64) -> Result<f64> {
    if u > n_push {
        return domain(format!("{u} active push nodes out of {n_push}"));
    }
    Ok(binomial_pmf(u, n_push, p_active))
}

/// Probability that `z_u` of the `y` shared-window successes belong to push
/// nodes, given `u` push and `r_w` pull packets contended (hypergeometric).
pub fn push_split_pmf(z_u: usize, y: usize, u: usize, r_w: usize) -> Result<f64> {
    if y > r_w + u {
        return domain(format!("{y} successes out of {} packets", r_w + u));
    }
    Ok(hypergeometric(z_u, y, u, r_w))
}

fn hypergeometric(z_u: usize, y: usize, u: usize, r_w: usize) -> f64 {
    if z_u > u || z_u > y || y - z_u > r_w {
        return 0.0;
    }
    choose(u, z_u) * choose(r_w, y - z_u) / choose(r_w + u, y)
}

/// Per-frame push success ratio; an empty frame counts as a full success.
pub fn push_success_ratio(z_u: usize, u: usize) -> Result<f64> {
    if z_u > u {
        return domain(format!("{z_u} push successes out of {u}"));
    }
    Ok(if u == 0 { 1.0 } else { z_u as f64 / u as f64 })
}

/// Probability that all `r_w` residual pull packets are among the `y`
/// shared-window successes.
pub fn pull_complete_prob(r_w: usize, y: usize, u: usize) -> Result<f64> {
    if y > r_w + u {
        return domain(format!("{y} successes out of {} packets", r_w + u));
    }
    if y < r_w {
        return Ok(0.0);
    }
    Ok(choose(u, y - r_w) / choose(r_w + u, y))
}

/// Expected energy spent in one slot by `s` backlogged nodes, each
/// transmitting with probability `p`.
pub fn state_energy(s: usize, config: &SystemConfig) -> f64 {
    let ts = config.slot_duration();
    let p = config.tx_prob();
    (0..=s)
        .map(|i| {
            let e = i as f64 * ts * config.power_tx() + (s - i) as f64 * ts * config.power_rx();
            e * binomial_pmf(i, s, p)
        })
        .sum()
}

/// Share of shared-window energy attributed to pull nodes, `r_w / (r_w + u)`.
pub fn shared_energy_weight(r_w: usize, u: usize) -> f64 {
    if r_w + u == 0 {
        0.0
    } else {
        r_w as f64 / (r_w + u) as f64
    }
}

/// Arguments of the coexistence metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricInputs {
    pub config: SystemConfig,
    pub range: QueryRange,
    pub split: FrameSplit,
    pub p_wake: f64,
    pub p_active: f64,
}

impl MetricInputs {
    pub fn new(config: SystemConfig, range: QueryRange, alpha: f64) -> Result<Self> {
        let split = make_frame_split(alpha, config.slots_per_frame())?;
        Self::with_split(config, range, split)
    }

    pub fn with_split(config: SystemConfig, range: QueryRange, split: FrameSplit) -> Result<Self> {
        if split.slots() != config.slots_per_frame() {
            return domain(format!(
                "split covers {} slots but the frame has {}",
                split.slots(),
                config.slots_per_frame()
            ));
        }
        Ok(Self {
            p_wake: wake_probability(&config.observation_model(), &range)?,
            p_active: config.push_activity(),
            config,
            range,
            split,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceReport {
    pub gamma_w: f64,
    pub gamma_u: f64,
    /// Joules.
    pub e_tot: f64,
}

/// The part of the metrics that depends only on `(N_w, N_u, p, split)` and
/// the radio parameters.
#[derive(Debug, Clone)]
pub struct SplitKernel {
    n_pull: usize,
    n_push: usize,
    split: FrameSplit,
    // [w][r]: P_s(w - r | w, τ_w)
    residual: Vec<Vec<f64>>,
    // [w]: expected pull energy over the reserved window
    reserved_energy: Vec<f64>,
    // [r][u]: Σ_y P_s(y | r+u, τ_u) Σ_z P_β(z | y, u, r) P_ι(z | u)
    push_term: Vec<Vec<f64>>,
    // [r][u]: Σ_y P_s(y | r+u, τ_u) P_γ(r | y, u, r)
    pull_term: Vec<Vec<f64>>,
    // [r][u]: c(r, u) times the expected energy of the shared window
    shared_energy: Vec<Vec<f64>>,
}

impl SplitKernel {
    pub fn new(config: &SystemConfig, split: FrameSplit) -> Result<Self> {
        let (n_pull, n_push) = (config.n_pull(), config.n_push());
        let (tw, tu) = (split.reserved_len, split.shared_len);
        let table = SuccessTable::new(n_pull + n_push, tw.max(tu), config.tx_prob())?;
        let psi: Vec<f64> = (0..=n_pull + n_push)
            .map(|s| state_energy(s, config))
            .collect();

        let residual = (0..=n_pull)
            .map(|w| table.distribution(w, tw).to_vec())
            .collect();
        let reserved_energy = (0..=n_pull)
            .map(|w| window_energy(&table, &psi, w, tw))
            .collect();

        let mut push_term = vec![vec![0.0; n_push + 1]; n_pull + 1];
        let mut pull_term = vec![vec![0.0; n_push + 1]; n_pull + 1];
        let mut shared_energy = vec![vec![0.0; n_push + 1]; n_pull + 1];
        for r in 0..=n_pull {
            for u in 0..=n_push {
                let total = r + u;
                let phi = table.distribution(total, tu);
                let mut push = 0.0;
                let mut pull = 0.0;
                for y in 0..=total {
                    let ps = phi[total - y];
                    if ps == 0.0 {
                        continue;
                    }
                    let ratio: f64 = (0..=u.min(y))
                        .map(|z| {
                            let iota = if u == 0 { 1.0 } else { z as f64 / u as f64 };
                            hypergeometric(z, y, u, r) * iota
                        })
                        .sum();
                    push += ps * ratio;
                    if y >= r {
                        pull += ps * choose(u, y - r) / choose(total, y);
                    }
                }
                push_term[r][u] = push;
                pull_term[r][u] = pull;
                let c = shared_energy_weight(r, u);
                if c > 0.0 {
                    shared_energy[r][u] = c * window_energy(&table, &psi, total, tu);
                }
            }
        }

        Ok(Self {
            n_pull,
            n_push,
            split,
            residual,
            reserved_energy,
            push_term,
            pull_term,
            shared_energy,
        })
    }

    pub fn split(&self) -> &FrameSplit {
        &self.split
    }

    /// All three metrics for a given wake-up and push-activity probability.
    pub fn evaluate(&self, p_wake: f64, p_active: f64) -> CoexistenceReport {
        let pd = binomial_row(self.n_pull, p_wake);
        let pu = binomial_row(self.n_push, p_active);
        let mut gamma_w = 0.0;
        let mut gamma_u = 0.0;
        let mut e_tot = 0.0;
        for (w, &pdw) in pd.iter().enumerate() {
            if pdw == 0.0 {
                continue;
            }
            let residual = &self.residual[w];
            let mut gw = 0.0;
            let mut gu = 0.0;
            let mut shared = 0.0;
            for (u, &puu) in pu.iter().enumerate() {
                if puu == 0.0 {
                    continue;
                }
                let mut gw_u = 0.0;
                let mut gu_u = 0.0;
                let mut e_u = 0.0;
                for (r, &pr) in residual.iter().enumerate() {
                    gw_u += pr * self.pull_term[r][u];
                    gu_u += pr * self.push_term[r][u];
                    e_u += pr * self.shared_energy[r][u];
                }
                gw += puu * gw_u;
                gu += puu * gu_u;
                shared += puu * e_u;
            }
            gamma_w += pdw * gw;
            gamma_u += pdw * gu;
            e_tot += pdw * (self.reserved_energy[w] + shared);
        }
        CoexistenceReport {
            gamma_w: gamma_w.clamp(0.0, 1.0),
            gamma_u: gamma_u.clamp(0.0, 1.0),
            e_tot: e_tot.max(0.0),
        }
    }
}

// Expected energy of a chain of `total` packets over `slots` slots, charging
// slot t (1-based) with the state at its start, Φ(t-1).
fn window_energy(table: &SuccessTable, psi: &[f64], total: usize, slots: usize) -> f64 {
    table
        .trajectory(total)
        .take(slots)
        .map(|phi| phi.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// `γ_w`, `γ_u` and `E_tot` in one pass.
pub fn evaluate(inputs: &MetricInputs) -> Result<CoexistenceReport> {
    Ok(SplitKernel::new(&inputs.config, inputs.split)?.evaluate(inputs.p_wake, inputs.p_active))
}

/// Push success probability.
pub fn gamma_u(inputs: &MetricInputs) -> Result<f64> {
    evaluate(inputs).map(|r| r.gamma_u)
}

/// Probability that the delivered pull set equals the woken set.
pub fn gamma_w(inputs: &MetricInputs) -> Result<f64> {
    evaluate(inputs).map(|r| r.gamma_w)
}

/// Expected pull energy over the frame, joules.
pub fn pull_energy_total(inputs: &MetricInputs) -> Result<f64> {
    evaluate(inputs).map(|r| r.e_tot)
}

fn check_round_robin(config: &SystemConfig) -> Result<()> {
    if config.n_pull() > config.slots_per_frame() {
        return Err(Error::Infeasible(format!(
            "round robin needs {} pull slots but the frame has {}",
            config.n_pull(),
            config.slots_per_frame()
        )));
    }
    Ok(())
}

/// Pull energy of the Round-Robin baseline: one transmit slot per node.
pub fn rr_pull_energy(config: &SystemConfig) -> Result<f64> {
    check_round_robin(config)?;
    Ok(config.n_pull() as f64 * config.slot_duration() * config.power_tx())
}

/// Push success probability of the Round-Robin baseline, where push nodes
/// contend over the `L - N_w` slots left after the pull schedule.
pub fn rr_gamma_u(config: &SystemConfig) -> Result<f64> {
    check_round_robin(config)?;
    let slots = config.slots_per_frame() - config.n_pull();
    let n_push = config.n_push();
    let table = SuccessTable::new(n_push, slots, config.tx_prob())?;
    let pu = binomial_row(n_push, config.push_activity());
    let mut gamma = pu[0];
    for (u, &puu) in pu.iter().enumerate().skip(1) {
        let expected: f64 = (0..=u)
            .map(|z| table.lookup(z, u, slots) * z as f64 / u as f64)
            .sum();
        gamma += puu * expected;
    }
    Ok(gamma.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3(alpha: f64, slots: usize) -> MetricInputs {
        let cfg = SystemConfig::default()
            .with(|p| p.slots_per_frame = slots)
            .unwrap();
        MetricInputs::new(cfg, QueryRange::new(0.6, 0.9).unwrap(), alpha).unwrap()
    }

    #[test]
    fn binomial_examples() {
        assert!((pull_wake_pmf(0, 2, 0.3).unwrap() - 0.49).abs() < 1e-15);
        assert_eq!(pull_wake_pmf(7, 7, 1.0).unwrap(), 1.0);
        let v = pull_wake_pmf(0, 25, 0.3).unwrap();
        assert!((v - 1.3411e-4).abs() / 1.3411e-4 < 1e-4);
        assert!(pull_wake_pmf(3, 2, 0.3).is_err());

        assert_eq!(push_active_pmf(0, 9, 0.0).unwrap(), 1.0);
        let pl = -(-1.25f64).exp_m1();
        let v = push_active_pmf(0, 25, pl).unwrap();
        assert!((v - 2.68100386778181e-14).abs() / v < 1e-9);
        assert!((push_active_pmf(1, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(push_active_pmf(3, 2, 0.5).is_err());
    }

    #[test]
    fn hypergeometric_examples() {
        assert!((push_split_pmf(1, 1, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(push_split_pmf(3, 5, 3, 2).unwrap(), 1.0);
        assert_eq!(push_split_pmf(0, 0, 3, 2).unwrap(), 1.0);
        assert_eq!(push_split_pmf(4, 4, 3, 2).unwrap(), 0.0);
        assert_eq!(push_split_pmf(0, 3, 3, 2).unwrap(), 0.0);
        assert!(push_split_pmf(0, 6, 3, 2).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(push_success_ratio(0, 0).unwrap(), 1.0);
        assert_eq!(push_success_ratio(2, 4).unwrap(), 0.5);
        assert_eq!(push_success_ratio(0, 3).unwrap(), 0.0);
        assert!(push_success_ratio(4, 3).is_err());
    }

    #[test]
    fn pull_complete_examples() {
        assert_eq!(pull_complete_prob(0, 2, 3).unwrap(), 1.0);
        assert!((pull_complete_prob(1, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((pull_complete_prob(2, 2, 2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(pull_complete_prob(2, 1, 2).unwrap(), 0.0);
        assert!(pull_complete_prob(1, 5, 2).is_err());
    }

    #[test]
    fn state_energy_examples() {
        let cfg = SystemConfig::default();
        assert_eq!(state_energy(0, &cfg), 0.0);
        let expect = 0.0032 * (0.0606 * 0.055 + 0.9394 * 0.050);
        assert!((state_energy(1, &cfg) - expect).abs() < 1e-15);
        assert!((state_energy(1, &cfg) - 1.60971e-4).abs() < 1e-8);
    }

    #[test]
    fn energy_weight_examples() {
        assert_eq!(shared_energy_weight(0, 0), 0.0);
        assert_eq!(shared_energy_weight(3, 0), 1.0);
        assert_eq!(shared_energy_weight(1, 3), 0.25);
    }

    #[test]
    fn fig3_spot_values() {
        let r = evaluate(&fig3(0.0, 50)).unwrap();
        assert!((r.gamma_u - 0.692986576136105).abs() < 1e-6);
        let r = evaluate(&fig3(1.0, 25)).unwrap();
        assert!((r.gamma_u - 1.63737713059082e-07).abs() < 1e-12);
        let r = evaluate(&fig3(1.0, 50)).unwrap();
        assert!((r.gamma_w - 0.591556390534104).abs() < 1e-6);
        assert!((r.e_tot - 0.023820429045878).abs() / 0.023820429045878 < 5e-3);
        let r = evaluate(&fig3(0.0, 25)).unwrap();
        assert!((r.gamma_w - 0.0244868834947786).abs() < 1e-6);
        assert!((r.e_tot - 0.0232827642654975).abs() / 0.0232827642654975 < 5e-3);
    }

    #[test]
    fn no_shared_slots_closed_form() {
        for slots in [25, 50, 75] {
            let inputs = fig3(1.0, slots);
            let expect = (1.0 - inputs.p_active).powi(25);
            let got = gamma_u(&inputs).unwrap();
            assert!((got - expect).abs() <= 1e-12 * expect.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn empty_pull_population() {
        let cfg = SystemConfig::default().with(|p| p.n_pull = 0).unwrap();
        for alpha in [0.0, 0.5, 1.0] {
            let r = evaluate(&MetricInputs::new(cfg, QueryRange::new(0.6, 0.9).unwrap(), alpha).unwrap())
                .unwrap();
            assert!((r.gamma_w - 1.0).abs() < 1e-12);
            assert_eq!(r.e_tot, 0.0);
        }
    }

    #[test]
    fn no_traffic_means_push_success() {
        let cfg = SystemConfig::default().with(|p| p.arrival_rate = 0.0).unwrap();
        for alpha in [0.0, 0.3, 1.0] {
            let r = evaluate(&MetricInputs::new(cfg, QueryRange::new(0.2, 0.9).unwrap(), alpha).unwrap())
                .unwrap();
            assert!((r.gamma_u - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_mismatch_rejected() {
        let cfg = SystemConfig::default();
        let split = make_frame_split(0.5, 40).unwrap();
        assert!(MetricInputs::with_split(cfg, QueryRange::new(0.1, 0.2).unwrap(), split).is_err());
    }

    #[test]
    fn round_robin_examples() {
        let cfg = SystemConfig::default();
        assert!((rr_pull_energy(&cfg).unwrap() - 0.0044).abs() < 1e-15);
        let one = cfg.with(|p| p.n_pull = 1).unwrap();
        assert!((rr_pull_energy(&one).unwrap() - 1.76e-4).abs() < 1e-15);
        let none = cfg.with(|p| p.n_pull = 0).unwrap();
        assert_eq!(rr_pull_energy(&none).unwrap(), 0.0);

        let full = cfg.with(|p| p.n_pull = 50).unwrap();
        let expect = (1.0 - full.push_activity()).powi(25);
        assert!((rr_gamma_u(&full).unwrap() - expect).abs() < 1e-25);

        let idle = cfg.with(|p| p.arrival_rate = 0.0).unwrap();
        assert_eq!(rr_gamma_u(&idle).unwrap(), 1.0);

        let over = cfg.with(|p| p.n_pull = 51).unwrap();
        assert!(matches!(rr_pull_energy(&over), Err(Error::Infeasible(_))));
        assert!(matches!(rr_gamma_u(&over), Err(Error::Infeasible(_))));
    }
}
