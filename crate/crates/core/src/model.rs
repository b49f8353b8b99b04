//! Shared domain types, parameter validation and seed derivation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Service-time law of one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceModel {
    /// Service succeeds in each slot with probability `p`; S ∈ {1, 2, ...}.
    Geometric { p: f64 },
    /// Service always takes `period` slots.
    Deterministic { period: u64 },
    /// Exponential service with `rate` per second. Only used as a
    /// continuous-time reference, never simulated.
    Exponential { rate: f64 },
}

impl ServiceModel {
    pub fn geometric(p: f64) -> Result<Self> {
        let m = ServiceModel::Geometric { p };
        m.validate()?;
        Ok(m)
    }

    pub fn deterministic(period: u64) -> Result<Self> {
        let m = ServiceModel::Deterministic { period };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let m = ServiceModel::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ServiceModel::Geometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::invalid("p", p, "0 < p <= 1"));
                }
            }
            ServiceModel::Deterministic { period } => {
                if period == 0 {
                    return Err(Error::invalid("T", period, "integer T >= 1"));
                }
            }
            ServiceModel::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid("lambda", rate, "finite lambda > 0"));
                }
            }
        }
        Ok(())
    }

    /// Service rate: `p`, `1/T` or `λ`.
    pub fn rate(&self) -> f64 {
        match *self {
            ServiceModel::Geometric { p } => p,
            ServiceModel::Deterministic { period } => 1.0 / period as f64,
            ServiceModel::Exponential { rate } => rate,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, ServiceModel::Exponential { .. })
    }
}

impl fmt::Display for ServiceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceModel::Geometric { p } => write!(f, "Geo({p})"),
            ServiceModel::Deterministic { period } => write!(f, "D({period})"),
            ServiceModel::Exponential { rate } => write!(f, "M({rate})"),
        }
    }
}

/// How the monitor orders two updates generated in the same slot.
///
/// Both sensors restart service at the slot boundary where they finish, so
/// two updates can carry the same generation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Within one slot, queue B samples after queue A: an update from B is
    /// fresher than an update from A with the same generation slot. This is
    /// the ordering under which the per-period valid-update counts of the
    /// analysis hold exactly.
    #[default]
    QueueBLater,
    /// Freshness compares generation slots only. An update is valid iff its
    /// generation slot is strictly newer than the one held; two valid updates
    /// with the same generation slot delivered together are resolved by a
    /// fair coin and the loser is obsolete.
    CoinFlip,
}

/// Two parallel zero-wait queues feeding one monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualQueueSpec {
    pub queue_a: ServiceModel,
    pub queue_b: ServiceModel,
    /// Slots between the first service start of queue A and of queue B when
    /// both are deterministic.
    pub dd_offset_slots: u64,
    pub tie_rule: TieRule,
}

impl DualQueueSpec {
    pub fn new(queue_a: ServiceModel, queue_b: ServiceModel) -> Self {
        DualQueueSpec {
            queue_a,
            queue_b,
            dd_offset_slots: 1,
            tie_rule: TieRule::default(),
        }
    }

    pub fn with_offset(mut self, offset: u64) -> Self {
        self.dd_offset_slots = offset;
        self
    }

    pub fn with_tie_rule(mut self, tie_rule: TieRule) -> Self {
        self.tie_rule = tie_rule;
        self
    }

    pub fn is_dd(&self) -> bool {
        matches!(
            (self.queue_a, self.queue_b),
            (
                ServiceModel::Deterministic { .. },
                ServiceModel::Deterministic { .. }
            )
        )
    }
}

/// Checks every invariant of a dual-queue spec.
///
/// The D-D offset must be below queue B's period, except at `T = 1` where
/// every offset reduces to 0 (the simulator reports that case).
pub fn validate(spec: &DualQueueSpec) -> Result<()> {
    spec.queue_a.validate()?;
    spec.queue_b.validate()?;
    if let ServiceModel::Deterministic { period } = spec.queue_b {
        if spec.is_dd() && period > 1 && spec.dd_offset_slots >= period {
            return Err(Error::invalid(
                "dd_offset_slots",
                spec.dd_offset_slots,
                "offset < T of queue B",
            ));
        }
    }
    Ok(())
}

/// What a simulation run models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    Single(ServiceModel),
    Dual(DualQueueSpec),
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SystemSpec::Single(m) => m.validate(),
            SystemSpec::Dual(d) => validate(d),
        }
    }
}

/// Round structure of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Service periods of the reference queue per round.
    pub periods_per_round: u64,
    pub rounds: u32,
    pub master_seed: u64,
    /// Leading periods of each round excluded from the averages.
    pub warmup_periods: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            periods_per_round: 5000,
            rounds: 10,
            master_seed: 42,
            warmup_periods: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.periods_per_round == 0 {
            return Err(Error::invalid("periods_per_round", 0, ">= 1"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("rounds", 0, ">= 1"));
        }
        if self.warmup_periods >= self.periods_per_round {
            return Err(Error::invalid(
                "warmup_periods",
                self.warmup_periods,
                "< periods_per_round",
            ));
        }
        Ok(())
    }
}

/// Period state: `k` completions of queue A in the previous deterministic
/// period, `n` in the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub k: u32,
    pub n: u32,
}

impl StateKey {
    pub fn new(k: u32, n: u32) -> Self {
        StateKey { k, n }
    }

    /// Every key with `0 <= k, n <= period`, in `(k, n)` order.
    pub fn all(period: u32) -> impl Iterator<Item = StateKey> {
        (0..=period).flat_map(move |k| (0..=period).map(move |n| StateKey { k, n }))
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.n)
    }
}

/// Average AoI quantities, either estimated or exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiMetrics {
    pub avg_aoi: f64,
    pub avg_paoi: f64,
    pub valid_updates_per_period: f64,
    pub obsolete_ratio: f64,
    #[serde(serialize_with = "serialize_state_map")]
    pub state_frequency: BTreeMap<StateKey, f64>,
    pub stderr_aoi: Option<f64>,
    pub stderr_paoi: Option<f64>,
    pub stderr_valid_per_period: Option<f64>,
}

fn serialize_state_map<S: Serializer>(
    map: &BTreeMap<StateKey, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Steele, Lea and Flood). A bijection on u64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of round `round_index`: `splitmix64(master + (round_index + 1) * γ)`
/// with γ = 0x9E3779B97F4A7C15, all arithmetic wrapping mod 2^64.
///
/// γ is odd, so the pre-image is injective in `round_index` and so is the
/// result.
pub fn derive_round_seed(master_seed: u64, round_index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(round_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Independent random streams within one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    QueueA,
    QueueB,
    /// Coin flips of the monitor's tie rule.
    Monitor,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::QueueA => 1,
            Stream::QueueB => 2,
            Stream::Monitor => 3,
        }
    }
}

/// Seed of one stream: `splitmix64(round_seed ^ (tag * γ))` with tags
/// A = 1, B = 2, monitor = 3.
pub fn derive_stream_seed(round_seed: u64, stream: Stream) -> u64 {
    splitmix64(round_seed ^ stream.tag().wrapping_mul(GOLDEN_GAMMA))
}
