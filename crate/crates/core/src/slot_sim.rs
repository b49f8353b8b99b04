//! Slot-level Monte Carlo simulation of zero-wait status updating.
//!
//! Slot convention: an update generated at slot `g` whose service takes `S`
//! slots is delivered at slot `g + S`, and the sensor generates its next
//! update in that same slot. The monitor holds the freshest generation `h`
//! received so far and records `Δ[t] = t - h + 1` after processing the
//! deliveries of slot `t`. At `t = 0` the AoI is 2 (as if an update
//! generated at slot -1 had just arrived).
//!
//! A pure ZW/D/1 queue then cycles through `T+1, ..., 2T`, with mean
//! `(3T+1)/2` and peaks `2T`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    derive_round_seed, derive_stream_seed, AoiMetrics, DualQueueSpec, ServiceModel, SimConfig,
    StateKey, Stream, SystemSpec, TieRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sensor {
    A,
    B,
}

impl Sensor {
    fn rank(self) -> u8 {
        match self {
            Sensor::A => 0,
            Sensor::B => 1,
        }
    }
}

/// Generation slot of an update and the sensor that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub generation: i64,
    pub sensor: Sensor,
}

/// Draws service times for one discrete model.
#[derive(Debug, Clone, Copy)]
pub enum ServiceSampler {
    Geometric(Geometric),
    Deterministic(u64),
}

impl ServiceSampler {
    pub fn new(model: &ServiceModel) -> Result<Self> {
        model.validate()?;
        match *model {
            ServiceModel::Geometric { p } => Ok(ServiceSampler::Geometric(
                Geometric::new(p).map_err(|_| Error::invalid("p", p, "0 < p <= 1"))?,
            )),
            ServiceModel::Deterministic { period } => Ok(ServiceSampler::Deterministic(period)),
            ServiceModel::Exponential { rate } => Err(Error::invalid(
                "model",
                format!("Exponential({rate})"),
                "a discrete service model",
            )),
        }
    }

    /// Service time in slots, at least 1.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            // rand_distr counts failures before the first success.
            ServiceSampler::Geometric(g) => g.sample(rng) + 1,
            ServiceSampler::Deterministic(t) => *t,
        }
    }
}

/// One service time drawn from `model`.
pub fn sample_service<R: Rng + ?Sized>(model: &ServiceModel, rng: &mut R) -> Result<u64> {
    Ok(ServiceSampler::new(model)?.sample(rng))
}

/// Result of processing one slot's deliveries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applied {
    /// `Δ[t]`.
    pub aoi: u64,
    /// Validity of each delivery, in input order.
    pub valid: [bool; 2],
    /// `Δ[t-1]` when some delivery was valid.
    pub peak: Option<u64>,
}

/// The receiving end: holds the freshest update delivered so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monitor {
    held: Delivery,
    tie_rule: TieRule,
}

impl Monitor {
    /// AoI 2 at slot 0.
    pub fn new(tie_rule: TieRule) -> Self {
        Monitor::with_aoi(0, 2, Sensor::A, tie_rule)
    }

    /// A monitor whose AoI at slot `t` is `aoi`, holding an update from
    /// `sensor`.
    pub fn with_aoi(t: i64, aoi: u64, sensor: Sensor, tie_rule: TieRule) -> Self {
        Monitor {
            held: Delivery {
                generation: t - aoi as i64 + 1,
                sensor,
            },
            tie_rule,
        }
    }

    pub fn held(&self) -> Delivery {
        self.held
    }

    pub fn aoi_at(&self, t: i64) -> u64 {
        (t - self.held.generation + 1) as u64
    }

    fn fresher(&self, a: Delivery, b: Delivery) -> bool {
        match self.tie_rule {
            TieRule::QueueBLater => {
                (a.generation, a.sensor.rank()) > (b.generation, b.sensor.rank())
            }
            TieRule::CoinFlip => a.generation > b.generation,
        }
    }

    /// Processes the deliveries of slot `t` (at most two).
    ///
    /// A delivery is valid iff it is fresher than the update held. Of two
    /// valid deliveries only the fresher one counts; if neither is fresher
    /// (same generation slot under [`TieRule::CoinFlip`]) a fair coin drawn
    /// from `rng` picks it.
    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        t: i64,
        deliveries: &[Delivery],
        rng: &mut R,
    ) -> Applied {
        assert!(deliveries.len() <= 2, "at most two queues deliver per slot");
        let previous = self.aoi_at(t - 1);
        let mut valid = [false; 2];
        let candidates: Vec<usize> = (0..deliveries.len())
            .filter(|&i| self.fresher(deliveries[i], self.held))
            .collect();
        let winner = match candidates.as_slice() {
            [] => None,
            [i] => Some(*i),
            [i, j] => {
                let (a, b) = (deliveries[*i], deliveries[*j]);
                if self.fresher(a, b) {
                    Some(*i)
                } else if self.fresher(b, a) {
                    Some(*j)
                } else if rng.random_bool(0.5) {
                    Some(*i)
                } else {
                    Some(*j)
                }
            }
            _ => unreachable!(),
        };
        if let Some(w) = winner {
            valid[w] = true;
            self.held = deliveries[w];
        }
        Applied {
            aoi: self.aoi_at(t),
            valid,
            peak: winner.map(|_| previous),
        }
    }
}

/// Sensor under zero-wait: always serving exactly one update.
#[derive(Debug, Clone)]
struct SensorState {
    sensor: Sensor,
    sampler: ServiceSampler,
    rng: ChaCha8Rng,
    generation: i64,
    completion: i64,
}

impl SensorState {
    fn new(sensor: Sensor, model: &ServiceModel, seed: u64, start: i64) -> Result<Self> {
        let sampler = ServiceSampler::new(model)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let completion = start + sampler.sample(&mut rng) as i64;
        Ok(SensorState {
            sensor,
            sampler,
            rng,
            generation: start,
            completion,
        })
    }

    fn step(&mut self, t: i64) -> Option<Delivery> {
        if t != self.completion {
            return None;
        }
        let d = Delivery {
            generation: self.generation,
            sensor: self.sensor,
        };
        self.generation = t;
        self.completion = t + self.sampler.sample(&mut self.rng) as i64;
        Some(d)
    }
}

/// Slots per reporting period: queue B's period when deterministic,
/// otherwise `ceil(1/μ)` of queue B (of the only queue for single systems).
pub fn period_slots(spec: &SystemSpec) -> u64 {
    let of = |m: &ServiceModel| match *m {
        ServiceModel::Deterministic { period } => period,
        ServiceModel::Geometric { p } => (1.0 / p).ceil() as u64,
        ServiceModel::Exponential { .. } => 1,
    };
    match spec {
        SystemSpec::Single(m) => of(m),
        SystemSpec::Dual(d) => of(&d.queue_b),
    }
}

/// One record per slot of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub t: i64,
    pub aoi: u64,
    pub delivered_a: bool,
    pub delivered_b: bool,
    pub valid_a: bool,
    pub valid_b: bool,
    pub warmup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeliveryEvent {
    pub t: i64,
    pub generation: i64,
    pub sensor: Sensor,
    pub valid: bool,
    /// AoI just before the reset, for valid deliveries.
    pub peak: Option<u64>,
}

/// Sample path of one round, starting with the record of slot 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AoiTrace {
    pub period_slots: u64,
    pub warmup_slots: u64,
    /// Whether period boundaries coincide with queue B's deliveries.
    pub period_aligned: bool,
    pub records: Vec<TraceRecord>,
    pub deliveries: Vec<DeliveryEvent>,
}

/// Per-round statistics over the post-warm-up slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundResult {
    pub round: u64,
    pub avg_aoi: f64,
    pub avg_paoi: f64,
    pub valid_per_period: f64,
    pub deliveries: u64,
    pub valid: u64,
    pub periods: u64,
    #[serde(skip)]
    pub state_counts: BTreeMap<StateKey, u64>,
}

fn effective_offset(d: &DualQueueSpec) -> (u64, Option<String>) {
    match d.queue_b {
        ServiceModel::Deterministic { period } if d.is_dd() => {
            let off = d.dd_offset_slots % period;
            let warn = (period == 1 && d.dd_offset_slots != 0).then(|| {
                format!(
                    "D-D offset {} reduced modulo T = 1 to 0; both queues are aligned",
                    d.dd_offset_slots
                )
            });
            (off, warn)
        }
        _ => (0, None),
    }
}

/// Warnings about parameters that were adjusted before simulating.
pub fn warnings(spec: &SystemSpec) -> Vec<String> {
    match spec {
        SystemSpec::Dual(d) => effective_offset(d).1.into_iter().collect(),
        SystemSpec::Single(_) => Vec::new(),
    }
}

fn simulate_round(
    spec: &SystemSpec,
    config: &SimConfig,
    round: u64,
    round_seed: u64,
    mut trace: Option<&mut AoiTrace>,
) -> Result<RoundResult> {
    spec.validate()?;
    config.validate()?;
    let (a_model, b_model, tie_rule, b_offset) = match spec {
        SystemSpec::Single(m) => (*m, None, TieRule::default(), 0),
        SystemSpec::Dual(d) => (
            d.queue_a,
            Some(d.queue_b),
            d.tie_rule,
            effective_offset(d).0,
        ),
    };
    let mut a = SensorState::new(
        Sensor::A,
        &a_model,
        derive_stream_seed(round_seed, Stream::QueueA),
        0,
    )?;
    let mut b = match b_model {
        Some(m) => Some(SensorState::new(
            Sensor::B,
            &m,
            derive_stream_seed(round_seed, Stream::QueueB),
            b_offset as i64,
        )?),
        None => None,
    };
    let mut coin = ChaCha8Rng::seed_from_u64(derive_stream_seed(round_seed, Stream::Monitor));
    let mut monitor = Monitor::new(tie_rule);

    let period = period_slots(spec);
    let total = (config.periods_per_round * period) as i64;
    let warm = (config.warmup_periods * period) as i64;
    let track_states = matches!(b_model, Some(ServiceModel::Deterministic { .. }));

    if let Some(tr) = trace.as_deref_mut() {
        tr.period_slots = period;
        tr.warmup_slots = warm as u64;
        tr.period_aligned = track_states && b_offset == 0;
        tr.records.clear();
        tr.deliveries.clear();
        tr.records.push(TraceRecord {
            t: 0,
            aoi: monitor.aoi_at(0),
            delivered_a: false,
            delivered_b: false,
            valid_a: false,
            valid_b: false,
            warmup: true,
        });
    }

    let (mut area, mut peaks, mut valid, mut delivered, mut slots) =
        (0u128, 0u128, 0u64, 0u64, 0u64);
    let mut state_counts: BTreeMap<StateKey, u64> = BTreeMap::new();
    let (mut prev_count, mut cur_count) = (None::<u32>, 0u32);

    for t in 1..=total {
        let mut ds = [Delivery {
            generation: 0,
            sensor: Sensor::A,
        }; 2];
        let mut n = 0;
        let da = a.step(t);
        if let Some(d) = da {
            ds[n] = d;
            n += 1;
            cur_count += 1;
        }
        let db = b.as_mut().and_then(|b| b.step(t));
        if let Some(d) = db {
            ds[n] = d;
            n += 1;
        }
        let applied = monitor.apply(t, &ds[..n], &mut coin);
        let post = t > warm;
        if post {
            area += applied.aoi as u128;
            slots += 1;
            delivered += n as u64;
            if let Some(pk) = applied.peak {
                peaks += pk as u128;
                valid += 1;
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            let (va, vb) = match (da.is_some(), db.is_some()) {
                (true, true) => (applied.valid[0], applied.valid[1]),
                (true, false) => (applied.valid[0], false),
                (false, true) => (false, applied.valid[0]),
                (false, false) => (false, false),
            };
            tr.records.push(TraceRecord {
                t,
                aoi: applied.aoi,
                delivered_a: da.is_some(),
                delivered_b: db.is_some(),
                valid_a: va,
                valid_b: vb,
                warmup: !post,
            });
            for (d, v) in da.iter().map(|d| (d, va)).chain(db.iter().map(|d| (d, vb))) {
                tr.deliveries.push(DeliveryEvent {
                    t,
                    generation: d.generation,
                    sensor: d.sensor,
                    valid: v,
                    peak: if v { applied.peak } else { None },
                });
            }
        }
        if track_states && t % period as i64 == 0 {
            if let Some(k) = prev_count {
                if post {
                    *state_counts.entry(StateKey::new(k, cur_count)).or_default() += 1;
                }
            }
            prev_count = Some(cur_count);
            cur_count = 0;
        }
    }

    let periods = slots / period;
    Ok(RoundResult {
        round,
        avg_aoi: area as f64 / slots as f64,
        avg_paoi: if valid > 0 {
            peaks as f64 / valid as f64
        } else {
            f64::NAN
        },
        valid_per_period: valid as f64 / periods as f64,
        deliveries: delivered,
        valid,
        periods,
        state_counts,
    })
}

/// Runs round `round` with its seed derived from the master seed.
pub fn run_round(spec: &SystemSpec, config: &SimConfig, round: u64) -> Result<RoundResult> {
    simulate_round(
        spec,
        config,
        round,
        derive_round_seed(config.master_seed, round),
        None,
    )
}

/// Runs one round with an explicit round seed.
pub fn run_round_with_seed(
    spec: &SystemSpec,
    config: &SimConfig,
    round: u64,
    round_seed: u64,
) -> Result<RoundResult> {
    simulate_round(spec, config, round, round_seed, None)
}

/// Runs round `round` and records its full sample path.
pub fn run_round_traced(
    spec: &SystemSpec,
    config: &SimConfig,
    round: u64,
) -> Result<(RoundResult, AoiTrace)> {
    let mut trace = AoiTrace {
        period_slots: 0,
        warmup_slots: 0,
        period_aligned: false,
        records: Vec::new(),
        deliveries: Vec::new(),
    };
    let r = simulate_round(
        spec,
        config,
        round,
        derive_round_seed(config.master_seed, round),
        Some(&mut trace),
    )?;
    Ok((r, trace))
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, Option<f64>) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, None);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Combines rounds: means and standard errors of the per-round values;
/// obsolete ratio and state frequencies pooled over all rounds.
pub fn aggregate(rounds: &[RoundResult]) -> AoiMetrics {
    let (avg_aoi, stderr_aoi) = mean_and_stderr(rounds.iter().map(|r| r.avg_aoi));
    let (avg_paoi, stderr_paoi) = mean_and_stderr(rounds.iter().map(|r| r.avg_paoi));
    let (vpp, stderr_v) = mean_and_stderr(rounds.iter().map(|r| r.valid_per_period));
    let delivered: u64 = rounds.iter().map(|r| r.deliveries).sum();
    let valid: u64 = rounds.iter().map(|r| r.valid).sum();
    let mut counts: BTreeMap<StateKey, u64> = BTreeMap::new();
    for r in rounds {
        for (k, c) in &r.state_counts {
            *counts.entry(*k).or_default() += c;
        }
    }
    let total: u64 = counts.values().sum();
    AoiMetrics {
        avg_aoi,
        avg_paoi,
        valid_updates_per_period: vpp,
        obsolete_ratio: if delivered > 0 {
            (delivered - valid) as f64 / delivered as f64
        } else {
            0.0
        },
        state_frequency: counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect(),
        stderr_aoi,
        stderr_paoi,
        stderr_valid_per_period: stderr_v,
    }
}

/// Monte Carlo estimate with standard errors across rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub metrics: AoiMetrics,
    pub rounds: Vec<RoundResult>,
    pub warnings: Vec<String>,
}

/// Runs every round (in parallel on the current rayon pool) and aggregates
/// them in round order, so the result does not depend on the thread count.
pub fn estimate_with_ci(spec: &SystemSpec, config: &SimConfig) -> Result<Estimate> {
    spec.validate()?;
    config.validate()?;
    if config.rounds < 2 {
        return Err(Error::invalid(
            "rounds",
            config.rounds,
            ">= 2 for standard errors",
        ));
    }
    let rounds: Vec<RoundResult> = (0..config.rounds as u64)
        .into_par_iter()
        .map(|r| run_round(spec, config, r))
        .collect::<Result<_>>()?;
    Ok(Estimate {
        metrics: aggregate(&rounds),
        rounds,
        warnings: warnings(spec),
    })
}

/// `(k, n)` frequencies from a traced run: queue A's completions counted per
/// period and paired with the previous period's count, post warm-up.
pub fn empirical_state_frequencies(trace: &AoiTrace) -> Result<BTreeMap<StateKey, f64>> {
    if !trace.period_aligned {
        return Err(Error::invalid(
            "trace",
            "unaligned",
            "a trace whose queue B is deterministic without offset",
        ));
    }
    let period = trace.period_slots as usize;
    let per_period: Vec<(u32, bool)> = trace.records[1..]
        .chunks(period)
        .filter(|c| c.len() == period)
        .map(|c| {
            let count = c.iter().filter(|r| r.delivered_a).count() as u32;
            (count, c.last().is_none_or(|r| r.warmup))
        })
        .collect();
    let mut counts: BTreeMap<StateKey, u64> = BTreeMap::new();
    for w in per_period.windows(2) {
        let ((k, _), (n, warm)) = (w[0], w[1]);
        if !warm {
            *counts.entry(StateKey::new(k, n)).or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect())
}
