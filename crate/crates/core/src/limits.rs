//! Discrete-to-continuous limits: slots of length `1/δ` seconds, rates
//! scaled by `1/δ`, results scaled back to seconds.

use serde::Serialize;

use crate::closed_forms::{
    avg_aoi_geo_d, avg_aoi_geo_geo, avg_paoi_geo_d, continuous_reference, ContinuousParams,
    ContinuousSystem, GeoDParams, Metric,
};
use crate::error::{Error, Result};

/// Slot-level parameters of an M-D system at resolution `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretized {
    pub params: GeoDParams,
    /// `δ·T_M` before rounding.
    pub unrounded_t: f64,
}

/// `p = λ/δ` and `T = round(δ·T_M)`, ties to even.
pub fn discretize(lambda: f64, t_m: f64, delta: u64) -> Result<Discretized> {
    ContinuousParams::new(lambda, t_m)?;
    if delta == 0 || (delta as f64) <= lambda {
        return Err(Error::invalid("delta", delta, "integer delta > lambda"));
    }
    let unrounded_t = delta as f64 * t_m;
    if unrounded_t < 1.0 {
        return Err(Error::invalid("delta", delta, "delta * T_M >= 1"));
    }
    let t = unrounded_t.round_ties_even() as u64;
    Ok(Discretized {
        params: GeoDParams::new(lambda / delta as f64, t)?,
        unrounded_t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceSystem {
    GeoDToMD {
        lambda: f64,
        t_m: f64,
        metric: Metric,
    },
    GeoGeoToMM {
        mu_a: f64,
        mu_b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub delta: u64,
    /// Slot success probability of queue A.
    pub p: f64,
    /// Slots per service of queue B (for Geo-Geo, its mean rounded).
    #[serde(rename = "T")]
    pub t: u64,
    pub unrounded_t: f64,
    /// Seconds.
    pub scaled_discrete: f64,
    /// Seconds.
    pub continuous_ref: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

fn row(
    delta: u64,
    p: f64,
    t: u64,
    unrounded_t: f64,
    scaled: f64,
    reference: f64,
) -> ConvergenceRow {
    let abs_err = (scaled - reference).abs();
    ConvergenceRow {
        delta,
        p,
        t,
        unrounded_t,
        scaled_discrete: scaled,
        continuous_ref: reference,
        abs_err,
        rel_err: abs_err / reference,
    }
}

/// One row per `δ`: `(1/δ)` times the discrete closed form next to the
/// continuous reference.
pub fn convergence_table(system: ConvergenceSystem, deltas: &[u64]) -> Result<Vec<ConvergenceRow>> {
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "[]", "a non-empty list"));
    }
    if deltas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "deltas",
            format!("{deltas:?}"),
            "strictly ascending values",
        ));
    }
    match system {
        ConvergenceSystem::GeoDToMD {
            lambda,
            t_m,
            metric,
        } => {
            let reference =
                continuous_reference(ContinuousSystem::MD(ContinuousParams::new(lambda, t_m)?))?;
            deltas
                .iter()
                .map(|&delta| {
                    let d = discretize(lambda, t_m, delta)?;
                    let (discrete, cont) = match metric {
                        Metric::Aoi => (avg_aoi_geo_d(&d.params), reference.avg_aoi),
                        Metric::Paoi => (
                            avg_paoi_geo_d(&d.params),
                            reference.avg_paoi.expect("M-D has a PAoI reference"),
                        ),
                    };
                    Ok(row(
                        delta,
                        d.params.p(),
                        d.params.t(),
                        d.unrounded_t,
                        discrete / delta as f64,
                        cont,
                    ))
                })
                .collect()
        }
        ConvergenceSystem::GeoGeoToMM { mu_a, mu_b } => {
            let reference = continuous_reference(ContinuousSystem::MM { mu_a, mu_b })?.avg_aoi;
            deltas
                .iter()
                .map(|&delta| {
                    let df = delta as f64;
                    if df <= mu_a.max(mu_b) {
                        return Err(Error::invalid("delta", delta, "integer delta > both rates"));
                    }
                    let discrete = avg_aoi_geo_geo(mu_a / df, mu_b / df)?;
                    let mean_b = df / mu_b;
                    Ok(row(
                        delta,
                        mu_a / df,
                        mean_b.round_ties_even() as u64,
                        mean_b,
                        discrete / df,
                        reference,
                    ))
                })
                .collect()
        }
    }
}

/// Sup-norm distance between the CDF of `U/δ`, with `U` geometric on
/// `{1, 2, ...}` of success probability `r/δ`, and the exponential CDF of
/// rate `r`.
///
/// The discrete CDF is constant on `[j/δ, (j+1)/δ)` while the exponential
/// one increases, so the supremum is attained at a jump or just before the
/// next one.
pub fn geo_to_exp_distance(r: f64, delta: u64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("r", r, "finite r > 0"));
    }
    let df = delta as f64;
    if df <= r {
        return Err(Error::invalid("delta", delta, "integer delta > r"));
    }
    let log_q = (-r / df).ln_1p();
    let mut best: f64 = 0.0;
    for j in 0u64.. {
        let jf = j as f64;
        // Survival functions: P(U > j) and e^{-r j/δ}.
        let geo = (jf * log_q).exp();
        let at = (-r * jf / df).exp();
        let before_next = (-r * (jf + 1.0) / df).exp();
        best = best.max((geo - at).abs()).max((geo - before_next).abs());
        if geo.max(at) < best {
            break;
        }
    }
    Ok(best)
}
