//! System parameters, frame layout and the observation model.
//!
//! Everything in here is immutable after construction. The two activity
//! probabilities shared by the analysis and the simulator also live here:
//! the chance that a pull node wakes for a range query and the chance that a
//! push node has a packet queued at the start of a frame.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Slot duration, seconds.
pub const DEFAULT_SLOT_DURATION: f64 = 3.2e-3;
/// Transmit power, watts.
pub const DEFAULT_POWER_TX: f64 = 55e-3;
/// Receive power, watts.
pub const DEFAULT_POWER_RX: f64 = 50e-3;
/// Per-slot transmission probability of the p-persistent access.
pub const DEFAULT_TX_PROB: f64 = 0.0606;

/// Raw protocol, population and radio parameters.
///
/// This is the unvalidated form; [`SystemConfig::new`] checks it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of pull nodes.
    pub n_pull: usize,
    /// Number of push nodes.
    pub n_push: usize,
    /// Uplink slots per frame.
    pub slots_per_frame: usize,
    /// Seconds.
    pub slot_duration: f64,
    pub tx_prob: f64,
    /// Push packet arrival rate per node, packets/slot.
    pub arrival_rate: f64,
    /// Watts.
    pub power_tx: f64,
    /// Watts.
    pub power_rx: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_pull: 25,
            n_push: 25,
            slots_per_frame: 50,
            slot_duration: DEFAULT_SLOT_DURATION,
            tx_prob: DEFAULT_TX_PROB,
            arrival_rate: 0.025,
            power_tx: DEFAULT_POWER_TX,
            power_rx: DEFAULT_POWER_RX,
            v_min: 0.0,
            v_max: 1.0,
        }
    }
}

/// Validated system parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SystemConfig {
    params: SystemParams,
}

impl SystemConfig {
    pub fn new(params: SystemParams) -> Result<Self> {
        let p = &params;
        if p.slots_per_frame == 0 {
            return domain("slots_per_frame must be at least 1");
        }
        if !(p.slot_duration > 0.0 && p.slot_duration.is_finite()) {
            return domain(format!("slot_duration must be positive, got {}", p.slot_duration));
        }
        if !(p.tx_prob > 0.0 && p.tx_prob <= 1.0) {
            return domain(format!("tx_prob must lie in (0, 1], got {}", p.tx_prob));
        }
        if !(p.arrival_rate >= 0.0 && p.arrival_rate.is_finite()) {
            return domain(format!("arrival_rate must be >= 0, got {}", p.arrival_rate));
        }
        if !(p.power_tx > 0.0 && p.power_tx.is_finite()) {
            return domain(format!("power_tx must be positive, got {}", p.power_tx));
        }
        if !(p.power_rx > 0.0 && p.power_rx.is_finite()) {
            return domain(format!("power_rx must be positive, got {}", p.power_rx));
        }
        if !(p.v_min.is_finite() && p.v_max.is_finite() && p.v_min < p.v_max) {
            return domain(format!(
                "value support must satisfy v_min < v_max, got [{}, {}]",
                p.v_min, p.v_max
            ));
        }
        Ok(Self { params })
    }

    /// Copy of this config with some parameters changed, revalidated.
    pub fn with(&self, edit: impl FnOnce(&mut SystemParams)) -> Result<Self> {
        let mut params = self.params;
        edit(&mut params);
        Self::new(params)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn n_pull(&self) -> usize {
        self.params.n_pull
    }

    pub fn n_push(&self) -> usize {
        self.params.n_push
    }

    pub fn slots_per_frame(&self) -> usize {
        self.params.slots_per_frame
    }

    pub fn slot_duration(&self) -> f64 {
        self.params.slot_duration
    }

    pub fn tx_prob(&self) -> f64 {
        self.params.tx_prob
    }

    pub fn arrival_rate(&self) -> f64 {
        self.params.arrival_rate
    }

    pub fn power_tx(&self) -> f64 {
        self.params.power_tx
    }

    pub fn power_rx(&self) -> f64 {
        self.params.power_rx
    }

    pub fn value_support(&self) -> (f64, f64) {
        (self.params.v_min, self.params.v_max)
    }

    /// Uniform observation model over the configured support.
    pub fn observation_model(&self) -> Uniform {
        Uniform {
            min: self.params.v_min,
            max: self.params.v_max,
        }
    }

    /// `p_λ` for this config.
    pub fn push_activity(&self) -> f64 {
        push_activity_probability(self.params.arrival_rate, self.params.slots_per_frame)
    }
}

/// Value range `[lower, upper]` carried by a content-based wake-up signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRange {
    pub lower: f64,
    pub upper: f64,
}

impl QueryRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return domain(format!("query range needs lower <= upper, got [{lower}, {upper}]"));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    fn check_within(&self, (min, max): (f64, f64)) -> Result<()> {
        if self.lower < min || self.upper > max || self.lower > self.upper {
            return domain(format!(
                "query range [{}, {}] outside support [{min}, {max}]",
                self.lower, self.upper
            ));
        }
        Ok(())
    }
}

/// Distribution of the value a pull node observes when it is queried.
///
/// Only the CDF and its inverse are needed: the analysis integrates the
/// density over the query range and the simulator samples by inversion.
pub trait ObservationModel {
    fn support(&self) -> (f64, f64);

    fn cdf(&self, v: f64) -> f64;

    /// Inverse CDF for `u` in `[0, 1)`.
    fn quantile(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    pub min: f64,
    pub max: f64,
}

impl ObservationModel for Uniform {
    fn support(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    fn cdf(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }
}

/// Probability that a single pull node's observation falls inside `range`.
pub fn wake_probability(model: &impl ObservationModel, range: &QueryRange) -> Result<f64> {
    range.check_within(model.support())?;
    Ok((model.cdf(range.upper) - model.cdf(range.lower)).clamp(0.0, 1.0))
}

/// Probability that a push node generated at least one packet over the
/// previous frame of `slots` slots, `1 - exp(-λL)`.
pub fn push_activity_probability(arrival_rate: f64, slots: usize) -> f64 {
    -(-arrival_rate * slots as f64).exp_m1()
}

/// Partition of a frame into pull-reserved slots `1..=reserved_len` and
/// shared slots `shared_start..=L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSplit {
    pub alpha: f64,
    pub reserved_len: usize,
    /// 1-based index of the first shared slot, `min(L, reserved_len + 1)`.
    pub shared_start: usize,
    pub shared_len: usize,
}

impl FrameSplit {
    pub fn slots(&self) -> usize {
        self.reserved_len + self.shared_len
    }

    /// Whether 1-based slot `t` is open to push nodes.
    pub fn is_shared(&self, t: usize) -> bool {
        t > self.reserved_len
    }
}

// αL products such as 0.29 * 100 land a hair below the integer.
const FLOOR_SLACK: f64 = 1e-9;

pub fn make_frame_split(alpha: f64, slots: usize) -> Result<FrameSplit> {
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    if slots == 0 {
        return domain("a frame needs at least one slot");
    }
    let reserved_len = ((alpha * slots as f64 + FLOOR_SLACK).floor() as usize).min(slots);
    Ok(FrameSplit {
        alpha,
        reserved_len,
        shared_start: slots.min(reserved_len + 1),
        shared_len: slots - reserved_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_edges() {
        let s = make_frame_split(0.0, 50).unwrap();
        assert_eq!((s.reserved_len, s.shared_start, s.shared_len), (0, 1, 50));
        let s = make_frame_split(1.0, 25).unwrap();
        assert_eq!((s.reserved_len, s.shared_start, s.shared_len), (25, 25, 0));
        let s = make_frame_split(0.2, 25).unwrap();
        assert_eq!((s.reserved_len, s.shared_start, s.shared_len), (5, 6, 20));
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(make_frame_split(-0.01, 10).is_err());
        assert!(make_frame_split(1.01, 10).is_err());
        assert!(make_frame_split(f64::NAN, 10).is_err());
        assert!(make_frame_split(0.5, 0).is_err());
    }

    #[test]
    fn split_floor_is_robust_to_rounding() {
        assert_eq!(make_frame_split(0.29, 100).unwrap().reserved_len, 29);
        assert_eq!(make_frame_split(7.0 * 0.05, 20).unwrap().reserved_len, 7);
        assert_eq!(make_frame_split(0.35, 50).unwrap().reserved_len, 17);
    }

    #[test]
    fn wake_probability_uniform() {
        let m = SystemConfig::default().observation_model();
        let p = |a, b| wake_probability(&m, &QueryRange::new(a, b).unwrap()).unwrap();
        assert!((p(0.6, 0.9) - 0.3).abs() < 1e-12);
        assert_eq!(p(0.0, 1.0), 1.0);
        assert!((p(0.94, 0.98) - 0.04).abs() < 1e-12);
        assert!(wake_probability(&m, &QueryRange::new(0.5, 1.2).unwrap()).is_err());
        assert!(wake_probability(&m, &QueryRange::new(-0.1, 0.2).unwrap()).is_err());
    }

    #[test]
    fn uniform_cdf_endpoints() {
        let m = Uniform { min: -2.0, max: 3.0 };
        assert_eq!(m.cdf(-2.0), 0.0);
        assert_eq!(m.cdf(3.0), 1.0);
        assert_eq!(m.cdf(-5.0), 0.0);
        assert!((m.quantile(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn push_activity_values() {
        assert_eq!(push_activity_probability(0.0, 50), 0.0);
        assert!((push_activity_probability(0.025, 50) - 0.713495).abs() < 1e-6);
        assert!((push_activity_probability(0.025, 25) - 0.464739).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        let base = SystemConfig::default();
        assert_eq!(base.slot_duration(), 3.2e-3);
        assert_eq!(base.power_tx(), 0.055);
        assert_eq!(base.power_rx(), 0.050);
        assert_eq!(base.tx_prob(), 0.0606);
        assert_eq!(base.value_support(), (0.0, 1.0));
        assert!(base.with(|p| p.tx_prob = 0.0).is_err());
        assert!(base.with(|p| p.tx_prob = 1.0).is_ok());
        assert!(base.with(|p| p.slots_per_frame = 0).is_err());
        assert!(base.with(|p| p.arrival_rate = -1.0).is_err());
        assert!(base.with(|p| p.v_max = 0.0).is_err());
        assert!(base.with(|p| p.power_rx = 0.0).is_err());
        assert!(base.with(|p| p.slot_duration = f64::NAN).is_err());
    }

    #[test]
    fn query_range_rejects_inverted() {
        assert!(QueryRange::new(0.9, 0.6).is_err());
        assert!(QueryRange::new(0.5, 0.5).is_ok());
    }
}
