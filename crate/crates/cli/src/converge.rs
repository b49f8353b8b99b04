use clap::{Args, ValueEnum};

use dqaoi_core::closed_forms::Metric;
use dqaoi_core::limits::{convergence_table, ConvergenceRow, ConvergenceSystem};

use crate::error::CliError;
use crate::output::{json_text, Format, Table};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvergeSystem {
    /// Geo-D scaled to the M-D system: p = LAMBDA/delta, T = round(delta*TM).
    #[value(name = "geo-d")]
    GeoD,
    /// Geo-Geo scaled to the M-M system: rates MU/delta.
    #[value(name = "geo-geo")]
    GeoGeo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvergeMetric {
    Aoi,
    Paoi,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[arg(long, value_enum, default_value = "geo-d")]
    pub system: ConvergeSystem,
    /// Rate of the exponential queue, per second (geo-d).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Period of the deterministic queue, in seconds (geo-d).
    #[arg(long = "Tm", value_name = "TM", default_value_t = 1.0)]
    pub t_m: f64,
    /// Rates per second (geo-geo): MU or MU_A,MU_B.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    pub mu: Vec<f64>,
    /// Slots per second, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<u64>,
    /// PAoI is available for geo-d only.
    #[arg(long, value_enum, default_value = "aoi")]
    pub metric: ConvergeMetric,
}

pub const HEADER: [&str; 7] = [
    "delta",
    "p",
    "T",
    "scaled_discrete",
    "continuous_ref",
    "abs_err",
    "rel_err",
];

pub fn rows(args: &ConvergeArgs) -> Result<Vec<ConvergenceRow>, CliError> {
    let system = match args.system {
        ConvergeSystem::GeoD => {
            if !args.mu.is_empty() {
                return Err(CliError::usage("--mu applies to --system geo-geo"));
            }
            ConvergenceSystem::GeoDToMD {
                lambda: args.lambda,
                t_m: args.t_m,
                metric: match args.metric {
                    ConvergeMetric::Aoi => Metric::Aoi,
                    ConvergeMetric::Paoi => Metric::Paoi,
                },
            }
        }
        ConvergeSystem::GeoGeo => {
            if args.metric == ConvergeMetric::Paoi {
                return Err(CliError::usage(
                    "geo-geo has no closed-form PAoI to converge",
                ));
            }
            let (mu_a, mu_b) = match args.mu.as_slice() {
                [m] => (*m, *m),
                [a, b] => (*a, *b),
                _ => return Err(CliError::usage("geo-geo needs --mu MU or --mu MU_A,MU_B")),
            };
            ConvergenceSystem::GeoGeoToMM { mu_a, mu_b }
        }
    };
    convergence_table(system, &args.deltas).map_err(|e| match e {
        dqaoi_core::Error::InvalidParameter { .. } => CliError::usage(e.to_string()),
        other => other.into(),
    })
}

pub fn table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(HEADER);
    for r in rows {
        t.push(vec![
            r.delta.into(),
            r.p.into(),
            r.t.into(),
            r.scaled_discrete.into(),
            r.continuous_ref.into(),
            r.abs_err.into(),
            r.rel_err.into(),
        ]);
    }
    t
}

pub fn run(args: &ConvergeArgs, format: Option<Format>) -> Result<Outcome, CliError> {
    let rows = rows(args)?;
    let text = match format.unwrap_or(Format::Csv) {
        // JSON also carries the unrounded delta*T_M.
        Format::Json => json_text(&rows)?,
        f => table(&rows).render(f)?,
    };
    Ok(Outcome::pass(text))
}
