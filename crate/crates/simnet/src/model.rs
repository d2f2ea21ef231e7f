//! Latency, scheduling and CPU cost models. All times are model-time
//! microseconds.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    /// Every link takes exactly `ms`.
    Fixed { ms: f64 },
    /// Uniform in `[lo_ms, hi_ms]` per message.
    Uniform { lo_ms: f64, hi_ms: f64 },
}

impl LatencyModel {
    pub fn fixed(ms: f64) -> Self {
        LatencyModel::Fixed { ms }
    }

    /// The delay bound after stabilization.
    pub fn delta_us(&self) -> u64 {
        match *self {
            LatencyModel::Fixed { ms } => (ms * 1000.0) as u64,
            LatencyModel::Uniform { hi_ms, .. } => (hi_ms * 1000.0) as u64,
        }
    }

    pub fn sample_us<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            LatencyModel::Fixed { ms } => (ms * 1000.0) as u64,
            LatencyModel::Uniform { lo_ms, hi_ms } => {
                let (lo, hi) = ((lo_ms * 1000.0) as u64, (hi_ms * 1000.0) as u64);
                rng.gen_range(lo..=hi.max(lo))
            }
        }
    }
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::fixed(5.0)
    }
}

/// Processing time charged to a node for each input it handles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub per_message_us: u64,
    /// Per base of every (multi-)exponentiation.
    pub per_exp_us: u64,
}

impl CostModel {
    pub const FREE: CostModel = CostModel { per_message_us: 0, per_exp_us: 0 };

    pub fn charge(&self, exps: u64) -> u64 {
        self.per_message_us + exps * self.per_exp_us
    }
}

impl Default for CostModel {
    /// Roughly a Ristretto255 exponentiation on a commodity core.
    fn default() -> Self {
        CostModel { per_message_us: 20, per_exp_us: 50 }
    }
}

/// How the network delays messages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub latency: LatencyModel,
    /// Messages sent before this many events have been processed are
    /// delayed arbitrarily (uniform in `[0, pre_gst_max_ms]`).
    pub gst_step: u64,
    pub pre_gst_max_ms: f64,
}

impl Default for NetworkModel {
    fn default() -> Self {
        NetworkModel { latency: LatencyModel::default(), gst_step: 0, pre_gst_max_ms: 2_000.0 }
    }
}

impl NetworkModel {
    pub fn delay_us<R: Rng + ?Sized>(&self, step: u64, rng: &mut R) -> u64 {
        if step < self.gst_step {
            rng.gen_range(0..=(self.pre_gst_max_ms * 1000.0) as u64)
        } else {
            self.latency.sample_us(rng)
        }
    }
}
