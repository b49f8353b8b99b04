use clap::{Args, Subcommand};
use rayon::prelude::*;

use dqaoi_core::closed_forms::{
    avg_aoi_d_d, avg_aoi_geo_d_real, avg_aoi_geo_geo, avg_paoi_geo_d_real,
    obsolete_ratio_geo_d_real, zw_d_metrics_real,
};
use dqaoi_core::model::{SimConfig, TieRule};
use dqaoi_core::slot_sim::estimate_with_ci;

use crate::error::CliError;
use crate::output::{Cell, Format, Table};
use crate::system::{integer_period, Resolved, SystemKind};
use crate::Outcome;

#[derive(Debug, Clone, Subcommand)]
pub enum SweepCommand {
    /// Systems of equal service rates over a grid of MU.
    ///
    /// Columns: system, mu, avg_aoi, avg_paoi, obsolete_ratio, then the
    /// relative decrease of avg_aoi against ZW/Geo/1 and ZW/D/1 of rate MU
    /// and of avg_paoi against 2/MU. Deterministic periods are T = 1/MU
    /// (real). With --simulate, sim_* columns hold Monte Carlo estimates;
    /// they are empty where 1/MU is not an integer for a system with a
    /// deterministic queue. Missing closed forms are empty cells.
    Mu(MuSweepArgs),
    /// Geo-D against Geo-Geo over the rate ratio MU_B/MU_A.
    ///
    /// Columns: mu_a, ratio, mu_b, T = 1/mu_b, geo_d_aoi, geo_geo_aoi, both
    /// normalized by 2/mu_a (geo_d_aoi_norm, geo_geo_aoi_norm), the
    /// decrease of geo_d_aoi and geo_d_paoi against 2/mu_a, and the geo-d
    /// obsolete ratio.
    Ratio(RatioSweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MuSweepArgs {
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "geo-d,zw-geo,zw-d,geo-geo,d-d"
    )]
    pub systems: Vec<SystemKind>,
    #[arg(long, default_value_t = 0.05)]
    pub from: f64,
    #[arg(long, default_value_t = 0.95)]
    pub to: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Add simulated columns.
    #[arg(long)]
    pub simulate: bool,
    #[arg(long, default_value_t = 5000)]
    pub periods: u64,
    #[arg(long, default_value_t = 10)]
    pub rounds: u32,
    #[arg(long, default_value_t = 10)]
    pub warmup: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RatioSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5")]
    pub mu_a: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub from: f64,
    #[arg(long, default_value_t = 1.0)]
    pub to: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

const MAX_POINTS: usize = 1_000_000;

/// `from, from + step, ..., <= to`, each value rounded to 12 decimals.
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && from.is_finite() && to.is_finite() && from <= to) {
        return Err(CliError::usage(format!(
            "grid needs from <= to and step > 0, got {from}..{to} step {step}"
        )));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    if n > MAX_POINTS {
        return Err(CliError::usage(format!(
            "grid of {n} points exceeds {MAX_POINTS}"
        )));
    }
    Ok((0..n)
        .map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

struct Analytic {
    aoi: Option<f64>,
    paoi: Option<f64>,
    obsolete: Option<f64>,
}

fn analytic(system: SystemKind, mu: f64) -> Result<Analytic, CliError> {
    let t = 1.0 / mu;
    Ok(match system {
        SystemKind::GeoD => Analytic {
            aoi: Some(avg_aoi_geo_d_real(mu, t)),
            paoi: Some(avg_paoi_geo_d_real(mu, t)),
            obsolete: Some(obsolete_ratio_geo_d_real(mu, t)),
        },
        SystemKind::ZwGeo => Analytic {
            aoi: Some(2.0 / mu),
            paoi: Some(2.0 / mu),
            obsolete: Some(0.0),
        },
        SystemKind::ZwD => {
            let (aoi, paoi) = zw_d_metrics_real(t);
            Analytic {
                aoi: Some(aoi),
                paoi: Some(paoi),
                obsolete: Some(0.0),
            }
        }
        SystemKind::GeoGeo => Analytic {
            aoi: Some(avg_aoi_geo_geo(mu, mu)?),
            paoi: None,
            obsolete: None,
        },
        SystemKind::DD => Analytic {
            aoi: Some(avg_aoi_d_d(mu)?),
            paoi: None,
            obsolete: None,
        },
        SystemKind::MD | SystemKind::MM => {
            return Err(CliError::usage("sweep mu covers slotted systems only"))
        }
    })
}

fn resolved(system: SystemKind, mu: f64) -> Resolved {
    match system {
        SystemKind::GeoD => Resolved::GeoD { p: mu, t: 1.0 / mu },
        SystemKind::ZwGeo => Resolved::ZwGeo { p: mu },
        SystemKind::ZwD => Resolved::ZwD { t: 1.0 / mu },
        SystemKind::GeoGeo => Resolved::GeoGeo { mu_a: mu, mu_b: mu },
        SystemKind::DD => Resolved::DD { mu },
        SystemKind::MD | SystemKind::MM => unreachable!("rejected by analytic"),
    }
}

fn simulated(
    system: SystemKind,
    mu: f64,
    args: &MuSweepArgs,
    seed: u64,
) -> Result<Option<[f64; 5]>, CliError> {
    let deterministic = matches!(system, SystemKind::GeoD | SystemKind::ZwD | SystemKind::DD);
    if deterministic && integer_period(1.0 / mu).is_err() {
        return Ok(None);
    }
    let spec = resolved(system, mu).to_spec(1, TieRule::default())?;
    let cfg = SimConfig {
        periods_per_round: args.periods,
        rounds: args.rounds,
        master_seed: seed,
        warmup_periods: args.warmup,
    };
    let m = estimate_with_ci(&spec, &cfg)?.metrics;
    Ok(Some([
        m.avg_aoi,
        m.stderr_aoi.unwrap_or(f64::NAN),
        m.avg_paoi,
        m.stderr_paoi.unwrap_or(f64::NAN),
        m.obsolete_ratio,
    ]))
}

pub fn mu_table(args: &MuSweepArgs, seed: u64) -> Result<Table, CliError> {
    if args.systems.is_empty() {
        return Err(CliError::usage("--systems is empty"));
    }
    let mus = grid(args.from, args.to, args.step)?;
    if let Some(bad) = mus.iter().find(|&&m| !(m > 0.0 && m <= 1.0)) {
        return Err(CliError::usage(format!("mu must lie in (0, 1], got {bad}")));
    }
    let mut headers = vec![
        "system",
        "mu",
        "avg_aoi",
        "avg_paoi",
        "obsolete_ratio",
        "aoi_reduction_zw_geo",
        "aoi_reduction_zw_d",
        "paoi_reduction",
    ];
    if args.simulate {
        headers.extend([
            "sim_avg_aoi",
            "sim_stderr_aoi",
            "sim_avg_paoi",
            "sim_stderr_paoi",
            "sim_obsolete_ratio",
        ]);
    }
    let points: Vec<(SystemKind, f64)> = args
        .systems
        .iter()
        .flat_map(|&s| mus.iter().map(move |&m| (s, m)))
        .collect();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(system, mu)| -> Result<Vec<Cell>, CliError> {
            let a = analytic(system, mu)?;
            let zw_geo = 2.0 / mu;
            let zw_d = zw_d_metrics_real(1.0 / mu).0;
            let mut row: Vec<Cell> = vec![
                system.name().into(),
                mu.into(),
                a.aoi.into(),
                a.paoi.into(),
                a.obsolete.into(),
                a.aoi.map(|v| (zw_geo - v) / zw_geo).into(),
                a.aoi.map(|v| (zw_d - v) / zw_d).into(),
                a.paoi.map(|v| (zw_geo - v) / zw_geo).into(),
            ];
            if args.simulate {
                match simulated(system, mu, args, seed)? {
                    Some(vals) => row.extend(vals.iter().map(|&v| Cell::from(v))),
                    None => row.extend(std::iter::repeat_n(Cell::Empty, 5)),
                }
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(headers);
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

pub fn ratio_table(args: &RatioSweepArgs) -> Result<Table, CliError> {
    let ratios = grid(args.from, args.to, args.step)?;
    let mut t = Table::new([
        "mu_a",
        "ratio",
        "mu_b",
        "T",
        "geo_d_aoi",
        "geo_geo_aoi",
        "geo_d_aoi_norm",
        "geo_geo_aoi_norm",
        "geo_d_aoi_reduction",
        "geo_d_paoi",
        "geo_d_paoi_reduction",
        "geo_d_obsolete_ratio",
    ]);
    for &mu_a in &args.mu_a {
        if !(mu_a > 0.0 && mu_a <= 1.0) {
            return Err(CliError::usage(format!(
                "mu_a must lie in (0, 1], got {mu_a}"
            )));
        }
        for &ratio in &ratios {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(CliError::usage(format!(
                    "ratio must lie in (0, 1], got {ratio}"
                )));
            }
            let mu_b = ratio * mu_a;
            let tb = 1.0 / mu_b;
            let single = 2.0 / mu_a;
            let gd = avg_aoi_geo_d_real(mu_a, tb);
            let gg = avg_aoi_geo_geo(mu_a, mu_b)?;
            let gp = avg_paoi_geo_d_real(mu_a, tb);
            t.push(vec![
                mu_a.into(),
                ratio.into(),
                mu_b.into(),
                tb.into(),
                gd.into(),
                gg.into(),
                (gd / single).into(),
                (gg / single).into(),
                ((single - gd) / single).into(),
                gp.into(),
                ((single - gp) / single).into(),
                obsolete_ratio_geo_d_real(mu_a, tb).into(),
            ]);
        }
    }
    Ok(t)
}

pub fn run(cmd: &SweepCommand, format: Option<Format>, seed: u64) -> Result<Outcome, CliError> {
    let table = match cmd {
        SweepCommand::Mu(a) => mu_table(a, seed)?,
        SweepCommand::Ratio(a) => ratio_table(a)?,
    };
    Ok(Outcome::pass(table.render(format.unwrap_or(Format::Csv))?))
}
