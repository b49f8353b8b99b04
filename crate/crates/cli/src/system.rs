use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use dqaoi_core::model::{DualQueueSpec, ServiceModel, SystemSpec, TieRule};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    /// Geometric queue A with deterministic queue B.
    #[value(name = "geo-d")]
    GeoD,
    /// Single zero-wait queue with geometric service.
    #[value(name = "zw-geo")]
    ZwGeo,
    /// Single zero-wait queue with deterministic service.
    #[value(name = "zw-d")]
    ZwD,
    /// Two geometric queues.
    #[value(name = "geo-geo")]
    GeoGeo,
    /// Two deterministic queues of equal period, started one slot apart.
    #[value(name = "d-d")]
    DD,
    /// Continuous time: exponential queue with deterministic queue.
    #[value(name = "m-d")]
    MD,
    /// Continuous time: two exponential queues.
    #[value(name = "m-m")]
    MM,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::GeoD => "geo-d",
            SystemKind::ZwGeo => "zw-geo",
            SystemKind::ZwD => "zw-d",
            SystemKind::GeoGeo => "geo-geo",
            SystemKind::DD => "d-d",
            SystemKind::MD => "m-d",
            SystemKind::MM => "m-m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieRuleArg {
    /// Of two updates generated in the same slot, queue B's is fresher.
    QueueBLater,
    /// Same-slot generations are equally fresh; a fair coin picks one.
    CoinFlip,
}

impl From<TieRuleArg> for TieRule {
    fn from(t: TieRuleArg) -> Self {
        match t {
            TieRuleArg::QueueBLater => TieRule::QueueBLater,
            TieRuleArg::CoinFlip => TieRule::CoinFlip,
        }
    }
}

pub fn tie_rule_name(t: TieRule) -> &'static str {
    match t {
        TieRule::QueueBLater => "queue-b-later",
        TieRule::CoinFlip => "coin-flip",
    }
}

/// System selection and its parameters.
#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    #[arg(long, value_enum, default_value = "geo-d")]
    pub system: SystemKind,
    /// Success probability per slot of the geometric queue [geo-d: 0.2].
    #[arg(long)]
    pub p: Option<f64>,
    /// Period of the deterministic queue in slots [geo-d: 5].
    #[arg(long = "T", value_name = "T")]
    pub t: Option<u64>,
    /// Service rates per slot (per second for m-m): MU or MU_A,MU_B. For
    /// geo-d, p = MU_A and T = 1/MU_B; for zw-d and d-d, T = 1/MU.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    pub mu: Vec<f64>,
    /// Rate of the exponential queue (m-d), per second.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Period of the deterministic queue (m-d), in seconds.
    #[arg(long = "Tm", value_name = "TM")]
    pub t_m: Option<f64>,
}

/// Parameters after defaults; periods may be real for analytic use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolved {
    GeoD { p: f64, t: f64 },
    ZwGeo { p: f64 },
    ZwD { t: f64 },
    GeoGeo { mu_a: f64, mu_b: f64 },
    DD { mu: f64 },
    MD { lambda: f64, t_m: f64 },
    MM { mu_a: f64, mu_b: f64 },
}

fn rate_pair(mu: &[f64], system: SystemKind) -> Result<(f64, f64), CliError> {
    match mu {
        [m] => Ok((*m, *m)),
        [a, b] => Ok((*a, *b)),
        _ => Err(CliError::usage(format!(
            "{} needs --mu MU or --mu MU_A,MU_B",
            system.name()
        ))),
    }
}

fn single_rate(mu: &[f64], system: SystemKind) -> Result<Option<f64>, CliError> {
    match mu {
        [] => Ok(None),
        [m] => Ok(Some(*m)),
        _ => Err(CliError::usage(format!(
            "{} takes a single --mu",
            system.name()
        ))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn unused(args: &SystemArgs, flags: &[(&str, bool)]) -> Result<(), CliError> {
    for (name, present) in flags {
        if *present {
            return Err(CliError::usage(format!(
                "{name} does not apply to --system {}",
                args.system.name()
            )));
        }
    }
    Ok(())
}

impl SystemArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let s = self.system;
        let (has_p, has_t, has_mu) = (self.p.is_some(), self.t.is_some(), !self.mu.is_empty());
        let (has_l, has_tm) = (self.lambda.is_some(), self.t_m.is_some());
        match s {
            SystemKind::GeoD => {
                unused(self, &[("--lambda", has_l), ("--Tm", has_tm)])?;
                if has_mu {
                    unused(self, &[("--p with --mu", has_p), ("--T with --mu", has_t)])?;
                    let (a, b) = rate_pair(&self.mu, s)?;
                    Ok(Resolved::GeoD {
                        p: a,
                        t: 1.0 / positive("mu", b)?,
                    })
                } else {
                    Ok(Resolved::GeoD {
                        p: self.p.unwrap_or(0.2),
                        t: self.t.unwrap_or(5) as f64,
                    })
                }
            }
            SystemKind::ZwGeo => {
                unused(
                    self,
                    &[("--T", has_t), ("--lambda", has_l), ("--Tm", has_tm)],
                )?;
                match (self.p, single_rate(&self.mu, s)?) {
                    (Some(p), None) | (None, Some(p)) => Ok(Resolved::ZwGeo { p }),
                    _ => Err(CliError::usage("zw-geo needs exactly one of --p or --mu")),
                }
            }
            SystemKind::ZwD => {
                unused(
                    self,
                    &[("--p", has_p), ("--lambda", has_l), ("--Tm", has_tm)],
                )?;
                match (self.t, single_rate(&self.mu, s)?) {
                    (Some(t), None) => Ok(Resolved::ZwD { t: t as f64 }),
                    (None, Some(m)) => Ok(Resolved::ZwD {
                        t: 1.0 / positive("mu", m)?,
                    }),
                    _ => Err(CliError::usage("zw-d needs exactly one of --T or --mu")),
                }
            }
            SystemKind::GeoGeo => {
                unused(
                    self,
                    &[
                        ("--p", has_p),
                        ("--T", has_t),
                        ("--lambda", has_l),
                        ("--Tm", has_tm),
                    ],
                )?;
                let (mu_a, mu_b) = rate_pair(&self.mu, s)?;
                Ok(Resolved::GeoGeo { mu_a, mu_b })
            }
            SystemKind::DD => {
                unused(
                    self,
                    &[("--p", has_p), ("--lambda", has_l), ("--Tm", has_tm)],
                )?;
                match (self.t, single_rate(&self.mu, s)?) {
                    (Some(t), None) => Ok(Resolved::DD { mu: 1.0 / t as f64 }),
                    (None, Some(mu)) => Ok(Resolved::DD { mu }),
                    _ => Err(CliError::usage("d-d needs exactly one of --T or --mu")),
                }
            }
            SystemKind::MD => {
                unused(self, &[("--p", has_p), ("--T", has_t), ("--mu", has_mu)])?;
                match (self.lambda, self.t_m) {
                    (Some(lambda), Some(t_m)) => Ok(Resolved::MD { lambda, t_m }),
                    _ => Err(CliError::usage("m-d needs --lambda and --Tm")),
                }
            }
            SystemKind::MM => {
                unused(
                    self,
                    &[
                        ("--p", has_p),
                        ("--T", has_t),
                        ("--lambda", has_l),
                        ("--Tm", has_tm),
                    ],
                )?;
                let (mu_a, mu_b) = rate_pair(&self.mu, s)?;
                Ok(Resolved::MM { mu_a, mu_b })
            }
        }
    }
}

/// Integer number of slots for a period given as a real.
pub fn integer_period(t: f64) -> Result<u64, CliError> {
    let r = t.round();
    if r.is_nan() || r < 1.0 || (t - r).abs() > 1e-9 * t.max(1.0) {
        return Err(CliError::usage(format!(
            "a slot simulation needs an integer period, got T = {t}"
        )));
    }
    Ok(r as u64)
}

fn period_json(t: f64) -> Value {
    if t.fract() == 0.0 && t >= 1.0 && t < 2f64.powi(53) {
        Value::from(t as u64)
    } else {
        Value::from(t)
    }
}

impl Resolved {
    /// Parameters as a JSON object, for reports.
    pub fn params_json(&self) -> Value {
        match *self {
            Resolved::GeoD { p, t } => json!({ "p": p, "T": period_json(t) }),
            Resolved::ZwGeo { p } => json!({ "p": p }),
            Resolved::ZwD { t } => json!({ "T": period_json(t) }),
            Resolved::GeoGeo { mu_a, mu_b } | Resolved::MM { mu_a, mu_b } => {
                json!({ "mu_a": mu_a, "mu_b": mu_b })
            }
            Resolved::DD { mu } => json!({ "mu": mu }),
            Resolved::MD { lambda, t_m } => json!({ "lambda": lambda, "T_M": t_m }),
        }
    }

    /// The slot-level system, with integer periods.
    pub fn to_spec(self, offset: u64, tie_rule: TieRule) -> Result<SystemSpec, CliError> {
        let spec = match self {
            Resolved::GeoD { p, t } => SystemSpec::Dual(
                DualQueueSpec::new(
                    ServiceModel::Geometric { p },
                    ServiceModel::Deterministic {
                        period: integer_period(t)?,
                    },
                )
                .with_tie_rule(tie_rule),
            ),
            Resolved::ZwGeo { p } => SystemSpec::Single(ServiceModel::Geometric { p }),
            Resolved::ZwD { t } => SystemSpec::Single(ServiceModel::Deterministic {
                period: integer_period(t)?,
            }),
            Resolved::GeoGeo { mu_a, mu_b } => SystemSpec::Dual(
                DualQueueSpec::new(
                    ServiceModel::Geometric { p: mu_a },
                    ServiceModel::Geometric { p: mu_b },
                )
                .with_tie_rule(tie_rule),
            ),
            Resolved::DD { mu } => {
                let period = integer_period(1.0 / positive("mu", mu)?)?;
                SystemSpec::Dual(
                    DualQueueSpec::new(
                        ServiceModel::Deterministic { period },
                        ServiceModel::Deterministic { period },
                    )
                    .with_offset(offset)
                    .with_tie_rule(tie_rule),
                )
            }
            Resolved::MD { .. } | Resolved::MM { .. } => {
                return Err(CliError::usage(
                    "continuous-time systems have no slot simulation; use eval or converge",
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(system: SystemKind) -> SystemArgs {
        SystemArgs {
            system,
            p: None,
            t: None,
            mu: Vec::new(),
            lambda: None,
            t_m: None,
        }
    }

    #[test]
    fn names_match_clap_values() {
        for k in SystemKind::value_variants() {
            assert_eq!(k.to_possible_value().unwrap().get_name(), k.name());
        }
    }

    #[test]
    fn geo_d_defaults() {
        assert_eq!(
            args(SystemKind::GeoD).resolve().unwrap(),
            Resolved::GeoD { p: 0.2, t: 5.0 }
        );
    }

    #[test]
    fn geo_d_from_rates() {
        let a = SystemArgs {
            mu: vec![0.1, 0.25],
            ..args(SystemKind::GeoD)
        };
        assert_eq!(a.resolve().unwrap(), Resolved::GeoD { p: 0.1, t: 4.0 });
        let a = SystemArgs {
            mu: vec![0.1],
            p: Some(0.3),
            ..args(SystemKind::GeoD)
        };
        assert!(a.resolve().is_err());
    }

    #[test]
    fn missing_parameters_are_usage_errors() {
        assert!(args(SystemKind::GeoGeo).resolve().is_err());
        assert!(args(SystemKind::MD).resolve().is_err());
        assert!(args(SystemKind::ZwD).resolve().is_err());
        let a = SystemArgs {
            lambda: Some(1.0),
            ..args(SystemKind::ZwGeo)
        };
        assert!(a.resolve().is_err());
    }

    #[test]
    fn simulation_needs_integer_periods() {
        assert_eq!(integer_period(5.000000000001).unwrap(), 5);
        assert!(integer_period(1.0 / 0.3).is_err());
        assert!(Resolved::DD { mu: 0.3 }
            .to_spec(1, TieRule::default())
            .is_err());
        assert!(Resolved::DD { mu: 0.5 }
            .to_spec(1, TieRule::default())
            .is_ok());
        assert!(Resolved::MM {
            mu_a: 1.0,
            mu_b: 1.0
        }
        .to_spec(1, TieRule::default())
        .is_err());
    }

    #[test]
    fn invalid_models_are_rejected() {
        let err = Resolved::GeoD { p: 1.5, t: 3.0 }
            .to_spec(1, TieRule::default())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
