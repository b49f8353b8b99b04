use clap::{Args, ValueEnum};

use dqaoi_core::closed_forms::{
    avg_aoi_d_d, avg_aoi_geo_d_real, avg_aoi_geo_geo, avg_paoi_geo_d_real,
    avg_paoi_geo_d_tabulated, continuous_reference, expected_valid_per_period_real,
    obsolete_ratio_geo_d_real, reduction_ratio, single_queue_metrics, zw_d_metrics_real, Baseline,
    ContinuousParams, ContinuousSystem, GeoDParams, Metric,
};
use dqaoi_core::model::ServiceModel;

use crate::error::CliError;
use crate::output::{Format, Table};
use crate::system::{Resolved, SystemArgs};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMetric {
    Aoi,
    Paoi,
    Both,
    /// Relative decrease of geo-d against single queues of the same rate
    /// (needs --mu).
    Reduction,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub metric: EvalMetric,
    /// Also print the geo-d PAoI summed from the per-state summary table,
    /// the valid updates per period and the obsolete ratio.
    #[arg(long)]
    pub detail: bool,
}

/// `(metric, value, formula id)`.
pub type Value = (&'static str, f64, &'static str);

fn geo_d_checked(p: f64, t: f64) -> Result<(), CliError> {
    GeoDParams::new(p, 1)?;
    if !(t >= 1.0 && t.is_finite()) {
        return Err(CliError::usage(format!("T must be a real >= 1, got {t}")));
    }
    Ok(())
}

fn no_paoi(system: &str) -> CliError {
    CliError::usage(format!(
        "no closed-form PAoI for {system}; estimate it with `simulate`"
    ))
}

pub fn evaluate(r: Resolved, metric: EvalMetric, detail: bool) -> Result<Vec<Value>, CliError> {
    let (want_aoi, want_paoi) = match metric {
        EvalMetric::Aoi => (true, false),
        EvalMetric::Paoi => (false, true),
        EvalMetric::Both => (true, true),
        EvalMetric::Reduction => (false, false),
    };
    let mut out: Vec<Value> = Vec::new();
    if metric == EvalMetric::Reduction {
        let Resolved::GeoD { p, t } = r else {
            return Err(CliError::usage(
                "--metric reduction applies to --system geo-d",
            ));
        };
        if (p * t - 1.0).abs() > 1e-12 {
            return Err(CliError::usage(
                "--metric reduction compares queues of equal rate; pass a single --mu",
            ));
        }
        out.push((
            "aoi_reduction_vs_zw_geo",
            reduction_ratio(Metric::Aoi, Baseline::ZwGeo1, p)?,
            "geo_d_aoi_reduction_zw_geo",
        ));
        out.push((
            "aoi_reduction_vs_zw_d",
            reduction_ratio(Metric::Aoi, Baseline::ZwD1, p)?,
            "geo_d_aoi_reduction_zw_d",
        ));
        out.push((
            "paoi_reduction",
            reduction_ratio(Metric::Paoi, Baseline::ZwGeo1, p)?,
            "geo_d_paoi_reduction",
        ));
        return Ok(out);
    }
    match r {
        Resolved::GeoD { p, t } => {
            geo_d_checked(p, t)?;
            if want_aoi {
                out.push(("aoi", avg_aoi_geo_d_real(p, t), "geo_d_aoi"));
            }
            if want_paoi {
                out.push(("paoi", avg_paoi_geo_d_real(p, t), "geo_d_paoi"));
            }
            if detail {
                if t.fract() == 0.0 {
                    let g = GeoDParams::new(p, t as u64)?;
                    out.push((
                        "paoi_tabulated",
                        avg_paoi_geo_d_tabulated(&g),
                        "geo_d_paoi_tabulated",
                    ));
                }
                out.push((
                    "valid_per_period",
                    expected_valid_per_period_real(p, t),
                    "geo_d_valid",
                ));
                out.push((
                    "obsolete_ratio",
                    obsolete_ratio_geo_d_real(p, t),
                    "geo_d_obsolete",
                ));
            }
        }
        Resolved::ZwGeo { p } => {
            let (aoi, paoi) = single_queue_metrics(&ServiceModel::Geometric { p })?;
            if want_aoi {
                out.push(("aoi", aoi, "zw_geo_aoi"));
            }
            if want_paoi {
                out.push(("paoi", paoi, "zw_geo_paoi"));
            }
        }
        Resolved::ZwD { t } => {
            if !(t >= 1.0 && t.is_finite()) {
                return Err(CliError::usage(format!("T must be a real >= 1, got {t}")));
            }
            let (aoi, paoi) = zw_d_metrics_real(t);
            if want_aoi {
                out.push(("aoi", aoi, "zw_d_aoi"));
            }
            if want_paoi {
                out.push(("paoi", paoi, "zw_d_paoi"));
            }
        }
        Resolved::GeoGeo { mu_a, mu_b } => {
            if metric == EvalMetric::Paoi {
                return Err(no_paoi("geo-geo"));
            }
            out.push(("aoi", avg_aoi_geo_geo(mu_a, mu_b)?, "geo_geo_aoi"));
        }
        Resolved::DD { mu } => {
            if metric == EvalMetric::Paoi {
                return Err(no_paoi("d-d"));
            }
            out.push(("aoi", avg_aoi_d_d(mu)?, "d_d_aoi"));
        }
        Resolved::MD { lambda, t_m } => {
            let c =
                continuous_reference(ContinuousSystem::MD(ContinuousParams::new(lambda, t_m)?))?;
            if want_aoi {
                out.push(("aoi", c.avg_aoi, "md_aoi"));
            }
            if want_paoi {
                out.push(("paoi", c.avg_paoi.expect("M-D has a PAoI"), "md_paoi"));
            }
        }
        Resolved::MM { mu_a, mu_b } => {
            if metric == EvalMetric::Paoi {
                return Err(no_paoi("m-m"));
            }
            let c = continuous_reference(ContinuousSystem::MM { mu_a, mu_b })?;
            out.push(("aoi", c.avg_aoi, "mm_aoi"));
        }
    }
    Ok(out)
}

pub fn run(args: &EvalArgs, format: Option<Format>) -> Result<Outcome, CliError> {
    let resolved = args.system.resolve()?;
    let values = evaluate(resolved, args.metric, args.detail)?;
    let format = format.unwrap_or(Format::Human);
    let text = match format {
        Format::Json => crate::output::json_text(&serde_json::json!({
            "system": args.system.system.name(),
            "params": resolved.params_json(),
            "values": values
                .iter()
                .map(|(m, v, f)| serde_json::json!({ "metric": m, "value": v, "formula": f }))
                .collect::<Vec<_>>(),
        }))?,
        _ => {
            let mut t = Table::new(["metric", "value", "formula"]);
            for (m, v, f) in &values {
                t.push(vec![(*m).into(), (*v).into(), (*f).into()]);
            }
            t.render(format)?
        }
    };
    Ok(Outcome::pass(text))
}
