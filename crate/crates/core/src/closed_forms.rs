//! Closed-form average AoI and PAoI.
//!
//! Units are slots for discrete systems and seconds for the continuous
//! references. Geo-D quantities are written with `q = 1 - p`; powers of `q`
//! are evaluated as `exp(n * ln_1p(-p))` and differences of powers through
//! `exp_m1`, so the expressions stay accurate down to `p ≈ 1e-8`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::model::{ServiceModel, StateKey};

/// Parameters of the Geo-D system: queue A succeeds with probability `p` per
/// slot, queue B serves in exactly `t` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoDParams {
    p: f64,
    q: f64,
    t: u64,
}

impl GeoDParams {
    pub fn new(p: f64, t: u64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid("p", p, "0 < p <= 1"));
        }
        if t == 0 {
            return Err(Error::invalid("T", t, "integer T >= 1"));
        }
        Ok(GeoDParams { p, q: 1.0 - p, t })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// `q^n` for `q = 1 - p`.
fn qpow(p: f64, n: f64) -> f64 {
    (n * (-p).ln_1p()).exp()
}

/// `q^n - 1`.
fn qpow_m1(p: f64, n: f64) -> f64 {
    (n * (-p).ln_1p()).exp_m1()
}

fn is_constant_two(p: f64, t: f64) -> bool {
    t == 1.0 || p == 1.0
}

/// Geo-D average AoI for a real period `t >= 1`:
///
/// `2/p + (q^T/p)(-1 + 2/T - 3/(pT)) + (q^{2T}/p)(2 - 2/T + 3/(pT))`.
pub fn avg_aoi_geo_d_real(p: f64, t: f64) -> f64 {
    if is_constant_two(p, t) {
        return 2.0;
    }
    let a = qpow(p, t);
    let b = a * a;
    // q^{2T} - q^T = q^T (q^T - 1)
    let b_minus_a = a * qpow_m1(p, t);
    (2.0 + a * (2.0 / t - 1.0) + b * (2.0 - 2.0 / t)) / p + 3.0 / (p * t) * b_minus_a / p
}

/// Geo-D average AoI.
pub fn avg_aoi_geo_d(params: &GeoDParams) -> f64 {
    avg_aoi_geo_d_real(params.p, params.t as f64)
}

/// Expected number of valid updates per deterministic period for a real
/// period `t`: `q^{2T-1} + q^{T-1}(T-1)p + Tp`.
pub fn expected_valid_per_period_real(p: f64, t: f64) -> f64 {
    let u = qpow(p, t - 1.0);
    let w = qpow(p, 2.0 * t - 1.0);
    w + u * (t - 1.0) * p + t * p
}

pub fn expected_valid_per_period(params: &GeoDParams) -> f64 {
    expected_valid_per_period_real(params.p, params.t as f64)
}

/// Geo-D average PAoI for a real period `t >= 1`, as the ratio of the
/// expected sum of peaks per period to the expected valid count:
///
/// `[2T + q^{2T-1}(2/p + 2(T-1)) + q^{T-1}(2 - 2/p + T²p - Tp)] / E[V]`.
///
/// See [`avg_paoi_geo_d_tabulated`] for the numerator summed from the
/// summary table.
pub fn avg_paoi_geo_d_real(p: f64, t: f64) -> f64 {
    if is_constant_two(p, t) {
        return 2.0;
    }
    let u = qpow(p, t - 1.0);
    let w = qpow(p, 2.0 * t - 1.0);
    // 2(w - u)/p = 2u(q^T - 1)/p
    let num =
        2.0 * t + 2.0 * (t - 1.0) * w + u * (2.0 + t * t * p - t * p) + 2.0 * u * qpow_m1(p, t) / p;
    num / expected_valid_per_period_real(p, t)
}

/// Geo-D average PAoI.
pub fn avg_paoi_geo_d(params: &GeoDParams) -> f64 {
    avg_paoi_geo_d_real(params.p, params.t as f64)
}

/// Geo-D average PAoI with the numerator summed from the summary table:
///
/// `2T + q^{2T-1}[2/p - (p/2 - 2)(T-1)] + q^{T-1}(2 - 2/p - p/2 - Tp/2 + T²p)`.
///
/// It exceeds [`avg_paoi_geo_d`] by `(p(T-1)/2)(q^{T-1} - q^{2T-1}) / E[V]`,
/// which is the total over-count in the tabulated per-state peak sums for
/// states with exactly one completion of queue A in the current period.
/// Kept for comparison; the simulator agrees with [`avg_paoi_geo_d`].
pub fn avg_paoi_geo_d_tabulated(params: &GeoDParams) -> f64 {
    let (p, t) = (params.p, params.t as f64);
    if is_constant_two(p, t) {
        return 2.0;
    }
    let u = qpow(p, t - 1.0);
    let w = qpow(p, 2.0 * t - 1.0);
    let num = 2.0 * t
        + w * (2.0 - 0.5 * p) * (t - 1.0)
        + u * (2.0 - 0.5 * p - 0.5 * t * p + t * t * p)
        + 2.0 * u * qpow_m1(p, t) / p;
    num / expected_valid_per_period_real(p, t)
}

/// Fraction of deliveries in the Geo-D system that are obsolete. Per period
/// queue A delivers `pT` updates on average and queue B delivers one.
pub fn obsolete_ratio_geo_d_real(p: f64, t: f64) -> f64 {
    1.0 - expected_valid_per_period_real(p, t) / (p * t + 1.0)
}

/// `(avg_aoi, avg_paoi)` of a single zero-wait queue.
///
/// ZW/Geo/1: `(2/μ, 2/μ)`. ZW/D/1 with period T: `((3T+1)/2, 2T)`.
pub fn single_queue_metrics(model: &ServiceModel) -> Result<(f64, f64)> {
    model.validate()?;
    match *model {
        ServiceModel::Geometric { p } => Ok((2.0 / p, 2.0 / p)),
        ServiceModel::Deterministic { period } => Ok(zw_d_metrics_real(period as f64)),
        ServiceModel::Exponential { rate } => Err(Error::invalid(
            "model",
            format!("Exponential({rate})"),
            "a discrete service model",
        )),
    }
}

/// `(avg_aoi, avg_paoi)` of ZW/D/1 for a real period `t >= 1`.
pub fn zw_d_metrics_real(t: f64) -> (f64, f64) {
    ((3.0 * t + 1.0) / 2.0, 2.0 * t)
}

fn check_rate(name: &'static str, mu: f64) -> Result<()> {
    if mu > 0.0 && mu <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, mu, "0 < mu <= 1"))
    }
}

/// Written in `s = a + b` and `m = ab` so that swapping the rates is exact.
fn geo_geo_core(a: f64, b: f64) -> f64 {
    let (s, m) = (a + b, a * b);
    let num = s * s + m - 3.0 * m * s + 2.0 * m * m;
    let den = s - m;
    2.0 * num / (den * den * den)
}

/// Average AoI of two parallel ZW/Geo/1 queues:
///
/// `2(a² + b² + 3ab - 3a²b - 3ab² + 2a²b²) / (a + b - ab)³`.
pub fn avg_aoi_geo_geo(mu_a: f64, mu_b: f64) -> Result<f64> {
    check_rate("mu_a", mu_a)?;
    check_rate("mu_b", mu_b)?;
    Ok(geo_geo_core(mu_a, mu_b))
}

/// Average age of the stalest information of two parallel ZW/Geo/1 queues,
/// i.e. the mean of the larger of the two per-queue ages. Together with
/// [`avg_aoi_geo_geo`] it sums to `2/μ_A + 2/μ_B`.
pub fn avg_aosi_geo_geo(mu_a: f64, mu_b: f64) -> Result<f64> {
    check_rate("mu_a", mu_a)?;
    check_rate("mu_b", mu_b)?;
    Ok(2.0 / mu_a + 2.0 / mu_b - geo_geo_core(mu_a, mu_b))
}

/// Average AoI of two ZW/D/1 queues with period `1/μ` whose services start
/// one slot apart: `μ + 3/(2μ) - 1/2`.
pub fn avg_aoi_d_d(mu: f64) -> Result<f64> {
    check_rate("mu", mu)?;
    Ok(mu + 1.5 / mu - 0.5)
}

/// M-D system: a zero-wait queue with exponential service at rate `lambda`
/// in parallel with a deterministic queue of period `t_m` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParams {
    lambda: f64,
    t_m: f64,
}

impl ContinuousParams {
    pub fn new(lambda: f64, t_m: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", lambda, "finite lambda > 0"));
        }
        if !(t_m > 0.0 && t_m.is_finite()) {
            return Err(Error::invalid("T_M", t_m, "finite T_M > 0"));
        }
        Ok(ContinuousParams { lambda, t_m })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t_m(&self) -> f64 {
        self.t_m
    }
}

/// Continuous-time reference systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousSystem {
    MD(ContinuousParams),
    MM { mu_a: f64, mu_b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousReference {
    /// Seconds.
    pub avg_aoi: f64,
    /// Seconds; `None` for M-M, which has no PAoI expression here.
    pub avg_paoi: Option<f64>,
}

/// Average AoI and PAoI of the continuous-time reference systems.
///
/// With `x = λT_M`, the M-D system has
/// AoI `[(3 + 2x)e^{-2x} - (3 + x)e^{-x} + 2x] / (T_M λ²)` and
/// PAoI `[(2 + 2x)e^{-2x} + (x² - 2)e^{-x} + 2x] / (λ[e^{-2x} + x e^{-x} + x])`.
/// The M-M system has AoI `2(a² + 3ab + b²)/(a + b)³`.
pub fn continuous_reference(system: ContinuousSystem) -> Result<ContinuousReference> {
    match system {
        ContinuousSystem::MD(c) => {
            let (l, tm) = (c.lambda, c.t_m);
            let x = l * tm;
            let e1 = (-x).exp();
            let e2 = e1 * e1;
            let aoi = ((3.0 + 2.0 * x) * e2 - (3.0 + x) * e1 + 2.0 * x) / (tm * l * l);
            let paoi =
                ((2.0 + 2.0 * x) * e2 + (x * x - 2.0) * e1 + 2.0 * x) / (l * (e2 + x * e1 + x));
            Ok(ContinuousReference {
                avg_aoi: aoi,
                avg_paoi: Some(paoi),
            })
        }
        ContinuousSystem::MM { mu_a, mu_b } => {
            for (name, mu) in [("mu_a", mu_a), ("mu_b", mu_b)] {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::invalid(name, mu, "finite rate > 0"));
                }
            }
            let (s, m) = (mu_a + mu_b, mu_a * mu_b);
            let aoi = 2.0 * (s * s + m) / (s * s * s);
            Ok(ContinuousReference {
                avg_aoi: aoi,
                avg_paoi: None,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Aoi,
    Paoi,
}

/// Single queue the Geo-D system is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    ZwGeo1,
    ZwD1,
}

/// Relative decrease of the Geo-D average against a single queue of the same
/// rate, with `p = μ` and `T = 1/μ` (T need not be an integer).
pub fn reduction_ratio(which: Metric, baseline: Baseline, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::invalid("mu", mu, "0 < mu < 1"));
    }
    let t = 1.0 / mu;
    let (single, dual) = match which {
        // Both single queues have PAoI 2/μ; using the same expression keeps
        // the two baselines bit-identical.
        Metric::Paoi => (2.0 / mu, avg_paoi_geo_d_real(mu, t)),
        Metric::Aoi => {
            let single = match baseline {
                Baseline::ZwGeo1 => 2.0 / mu,
                Baseline::ZwD1 => 1.5 / mu + 0.5,
            };
            (single, avg_aoi_geo_d_real(mu, t))
        }
    };
    Ok((single - dual) / single)
}

/// Probability of period state `(k, n)`: the product of two Binomial(T, p)
/// masses. Zero outside `0 <= k, n <= T`.
pub fn state_probability(key: StateKey, params: &GeoDParams) -> f64 {
    let b = Binomial::new(params.p, params.t).expect("validated parameters");
    b.pmf(key.k as u64) * b.pmf(key.n as u64)
}

/// Exact rational versions of the Geo-D expressions, for integer T.
pub mod exact {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn pow(x: &BigRational, n: u64) -> BigRational {
        let mut acc = BigRational::one();
        for _ in 0..n {
            acc *= x;
        }
        acc
    }

    fn q(p: &BigRational) -> BigRational {
        BigRational::one() - p
    }

    pub fn avg_aoi_geo_d(p: &BigRational, t: u64) -> BigRational {
        let q = q(p);
        let tt = r(t as i64);
        let three_over_pt = r(3) / (p * &tt);
        let two_over_t = r(2) / &tt;
        r(2) / p
            + pow(&q, t) / p * (r(-1) + &two_over_t - &three_over_pt)
            + pow(&q, 2 * t) / p * (r(2) - &two_over_t + &three_over_pt)
    }

    pub fn expected_valid_per_period(p: &BigRational, t: u64) -> BigRational {
        let q = q(p);
        let tt = r(t as i64);
        pow(&q, 2 * t - 1) + pow(&q, t - 1) * (&tt - r(1)) * p + tt * p
    }

    /// Expected sum of peaks per period (numerator of the PAoI quotient).
    pub fn expected_peak_sum(p: &BigRational, t: u64) -> BigRational {
        let q = q(p);
        let tt = r(t as i64);
        r(2) * &tt
            + pow(&q, 2 * t - 1) * (r(2) / p + r(2) * (&tt - r(1)))
            + pow(&q, t - 1) * (r(2) - r(2) / p + &tt * &tt * p - &tt * p)
    }

    pub fn avg_paoi_geo_d(p: &BigRational, t: u64) -> BigRational {
        let ev = expected_valid_per_period(p, t);
        if ev.is_zero() {
            return r(2);
        }
        expected_peak_sum(p, t) / ev
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gd(p: f64, t: u64) -> GeoDParams {
        GeoDParams::new(p, t).unwrap()
    }

    #[test]
    fn geo_d_aoi_examples() {
        assert_eq!(avg_aoi_geo_d(&gd(0.37, 1)), 2.0);
        assert!((avg_aoi_geo_d(&gd(0.2, 5)) - 6.5714).abs() < 1e-4);
        assert!((avg_aoi_geo_d(&gd(1e-6, 5)) - 8.0).abs() < 1e-3);
    }

    #[test]
    fn geo_d_paoi_examples() {
        assert_eq!(avg_paoi_geo_d(&gd(0.81, 1)), 2.0);
        assert!((avg_paoi_geo_d(&gd(0.5, 200)) - 4.0).abs() < 1e-9);
        assert!((avg_paoi_geo_d(&gd(1e-6, 5)) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn tabulated_paoi_satisfies_the_same_limits() {
        let f = |p, t| avg_paoi_geo_d_tabulated(&gd(p, t));
        assert_eq!(f(0.3, 1), 2.0);
        assert!((f(0.5, 200) - 4.0).abs() < 1e-9);
        assert!((f(1e-6, 5) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn tabulated_paoi_gap_matches_single_completion_overcount() {
        for &(p, t) in &[(0.2, 5u64), (0.5, 2), (0.1, 3), (0.7, 6)] {
            let g = gd(p, t);
            let tf = t as f64;
            let q = 1.0 - p;
            let gap = p * (tf - 1.0) / 2.0 * (q.powf(tf - 1.0) - q.powf(2.0 * tf - 1.0))
                / expected_valid_per_period(&g);
            let diff = avg_paoi_geo_d_tabulated(&g) - avg_paoi_geo_d(&g);
            assert!((diff - gap).abs() < 1e-12, "p={p} T={t}: {diff} vs {gap}");
        }
    }

    #[test]
    fn stable_forms_match_naive_powers() {
        for &(p, t) in &[(0.2, 5u64), (0.5, 3), (0.9, 4), (0.05, 12)] {
            let tf = t as f64;
            let q: f64 = 1.0 - p;
            let naive = 2.0 / p
                + q.powf(tf) / p * (-1.0 + 2.0 / tf - 3.0 / (p * tf))
                + q.powf(2.0 * tf) / p * (2.0 - 2.0 / tf + 3.0 / (p * tf));
            assert!((avg_aoi_geo_d(&gd(p, t)) - naive).abs() < 1e-10);
            let den = q.powf(2.0 * tf - 1.0) + q.powf(tf - 1.0) * (tf - 1.0) * p + tf * p;
            let num = 2.0 * tf
                + q.powf(2.0 * tf - 1.0) * (2.0 / p + 2.0 * (tf - 1.0))
                + q.powf(tf - 1.0) * (2.0 - 2.0 / p + tf * tf * p - tf * p);
            assert!((avg_paoi_geo_d(&gd(p, t)) - num / den).abs() < 1e-10);
        }
    }

    #[test]
    fn single_queue_examples() {
        assert_eq!(
            single_queue_metrics(&ServiceModel::Geometric { p: 0.5 }).unwrap(),
            (4.0, 4.0)
        );
        assert_eq!(
            single_queue_metrics(&ServiceModel::Deterministic { period: 5 }).unwrap(),
            (8.0, 10.0)
        );
        assert_eq!(
            single_queue_metrics(&ServiceModel::Deterministic { period: 1 }).unwrap(),
            (2.0, 2.0)
        );
        assert!(single_queue_metrics(&ServiceModel::Exponential { rate: 1.0 }).is_err());
    }

    #[test]
    fn geo_geo_examples() {
        assert_eq!(avg_aoi_geo_geo(1.0, 1.0).unwrap(), 2.0);
        assert!((avg_aoi_geo_geo(0.5, 1e-8).unwrap() - 4.0).abs() < 1e-6);
        assert_eq!(avg_aosi_geo_geo(1.0, 1.0).unwrap(), 2.0);
        let s = avg_aoi_geo_geo(0.5, 0.5).unwrap() + avg_aosi_geo_geo(0.5, 0.5).unwrap();
        assert!((s - 8.0).abs() < 1e-12);
        assert!(avg_aoi_geo_geo(0.0, 0.5).is_err());
    }

    #[test]
    fn d_d_examples() {
        assert_eq!(avg_aoi_d_d(0.5).unwrap(), 3.0);
        assert_eq!(avg_aoi_d_d(1.0).unwrap(), 2.0);
        assert!((avg_aoi_d_d(0.2).unwrap() - 7.2).abs() < 1e-12);
    }

    #[test]
    fn continuous_examples() {
        let md = continuous_reference(ContinuousSystem::MD(
            ContinuousParams::new(1.0, 1.0).unwrap(),
        ))
        .unwrap();
        let e = std::f64::consts::E;
        assert!((md.avg_aoi - (5.0 / (e * e) - 4.0 / e + 2.0)).abs() < 1e-12);
        assert!((md.avg_aoi - 1.2052).abs() < 1e-4);
        assert!((md.avg_paoi.unwrap() - 1.445_875_7).abs() < 1e-7);

        let mm = continuous_reference(ContinuousSystem::MM {
            mu_a: 0.4,
            mu_b: 0.4,
        })
        .unwrap();
        assert!((mm.avg_aoi - 1.25 / 0.4).abs() < 1e-12);
        assert_eq!(mm.avg_paoi, None);

        let far = continuous_reference(ContinuousSystem::MD(
            ContinuousParams::new(1.0, 50.0).unwrap(),
        ))
        .unwrap();
        assert!((far.avg_aoi - 2.0).abs() < 1e-6);
    }

    #[test]
    fn reduction_limits() {
        let mu = 1e-4;
        let geo = reduction_ratio(Metric::Aoi, Baseline::ZwGeo1, mu).unwrap();
        let d = reduction_ratio(Metric::Aoi, Baseline::ZwD1, mu).unwrap();
        let pp = reduction_ratio(Metric::Paoi, Baseline::ZwGeo1, mu).unwrap();
        assert!((geo - 0.39742).abs() < 1e-3);
        assert!((d - 0.19650).abs() < 1e-3);
        assert!((pp - 0.27706).abs() < 1e-3);
        let e = std::f64::consts::E;
        assert!((geo - (2.0 / e - 2.5 / (e * e))).abs() < 1e-3);
        assert!((d - (8.0 / (3.0 * e) - 10.0 / (3.0 * e * e) - 1.0 / 3.0)).abs() < 1e-3);
        assert!((pp - (3.0 * e - 2.0) / (2.0 * (e * e + e + 1.0))).abs() < 1e-3);
    }

    #[test]
    fn reduction_matches_direct_closed_forms() {
        // Second route: the ratios written directly in μ.
        for i in 1..100 {
            let mu = i as f64 / 100.0;
            let a = (1.0 - mu).powf(1.0 / mu);
            let b = (1.0 - mu).powf(2.0 / mu);
            let geo = (2.0 - mu) * a + (mu - 2.5) * b;
            let d = (mu - 1.0 + 4.0 * (2.0 - mu) * a + 2.0 * (2.0 * mu - 5.0) * b) / (mu + 3.0);
            let got_geo = reduction_ratio(Metric::Aoi, Baseline::ZwGeo1, mu).unwrap();
            let got_d = reduction_ratio(Metric::Aoi, Baseline::ZwD1, mu).unwrap();
            assert!((got_geo - geo).abs() < 1e-12, "mu={mu}");
            assert!((got_d - d).abs() < 1e-12, "mu={mu}");
        }
    }

    #[test]
    fn reduction_rejects_endpoints() {
        assert!(reduction_ratio(Metric::Aoi, Baseline::ZwGeo1, 0.0).is_err());
        assert!(reduction_ratio(Metric::Aoi, Baseline::ZwGeo1, 1.0).is_err());
    }

    #[test]
    fn state_probability_examples() {
        let g = gd(0.3, 4);
        assert!((state_probability(StateKey::new(0, 0), &g) - 0.7f64.powi(8)).abs() < 1e-15);
        assert!((state_probability(StateKey::new(1, 1), &gd(0.5, 2)) - 0.25).abs() < 1e-15);
        let total: f64 = StateKey::all(4).map(|k| state_probability(k, &g)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(state_probability(StateKey::new(5, 0), &g), 0.0);
    }

    #[test]
    fn exact_forms_agree_with_float() {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::ToPrimitive;
        let p = BigRational::new(BigInt::from(3), BigInt::from(10));
        for t in 1..8u64 {
            let g = gd(0.3, t);
            let a = exact::avg_aoi_geo_d(&p, t).to_f64().unwrap();
            let pa = exact::avg_paoi_geo_d(&p, t).to_f64().unwrap();
            assert!((a - avg_aoi_geo_d(&g)).abs() < 1e-12 * a);
            assert!((pa - avg_paoi_geo_d(&g)).abs() < 1e-12 * pa);
        }
    }

    proptest! {
        #[test]
        fn period_one_is_exactly_two(p in 1e-6f64..=1.0) {
            prop_assert_eq!(avg_aoi_geo_d(&gd(p, 1)), 2.0);
            prop_assert_eq!(avg_paoi_geo_d(&gd(p, 1)), 2.0);
        }

        #[test]
        fn geo_d_at_least_two_and_below_both_singles(p in 0.01f64..0.99, t in 1u64..60) {
            let g = gd(p, t);
            let a = avg_aoi_geo_d(&g);
            prop_assert!(a >= 2.0 - 1e-12);
            prop_assert!(a <= 2.0 / p + 1e-9);
            prop_assert!(a <= (3.0 * t as f64 + 1.0) / 2.0 + 1e-9);
            prop_assert!(avg_paoi_geo_d(&g) >= 2.0 - 1e-12);
        }

        #[test]
        fn aoi_plus_aosi_is_sum_of_singles(a in 1e-3f64..=1.0, b in 1e-3f64..=1.0) {
            let s = avg_aoi_geo_geo(a, b).unwrap() + avg_aosi_geo_geo(a, b).unwrap();
            let want = 2.0 / a + 2.0 / b;
            prop_assert!((s - want).abs() <= 1e-12 * want);
        }

        #[test]
        fn geo_geo_is_symmetric(a in 1e-3f64..=1.0, b in 1e-3f64..=1.0) {
            prop_assert_eq!(avg_aoi_geo_geo(a, b).unwrap(), avg_aoi_geo_geo(b, a).unwrap());
            let x = continuous_reference(ContinuousSystem::MM { mu_a: a, mu_b: b }).unwrap();
            let y = continuous_reference(ContinuousSystem::MM { mu_a: b, mu_b: a }).unwrap();
            prop_assert_eq!(x.avg_aoi, y.avg_aoi);
        }

        #[test]
        fn paoi_reduction_is_baseline_independent(mu in 1e-4f64..0.9999) {
            let g = reduction_ratio(Metric::Paoi, Baseline::ZwGeo1, mu).unwrap();
            let d = reduction_ratio(Metric::Paoi, Baseline::ZwD1, mu).unwrap();
            prop_assert_eq!(g.to_bits(), d.to_bits());
            prop_assert!(g > -1.0 && g < 1.0);
        }

        #[test]
        fn state_probabilities_normalise(p in 0.01f64..0.99, t in 1u64..12) {
            let g = gd(p, t);
            let total: f64 = StateKey::all(t as u32).map(|k| state_probability(k, &g)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
