use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{Map, Value};

use dqaoi_core::model::{SimConfig, SystemSpec};
use dqaoi_core::slot_sim::{estimate_with_ci, run_round_traced, AoiTrace};

use crate::error::CliError;
use crate::output::{json_text, Format, Table};
use crate::system::{tie_rule_name, SystemArgs, TieRuleArg};
use crate::Outcome;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Periods of queue B per round, warm-up included.
    #[arg(long, default_value_t = 5000)]
    pub periods: u64,
    #[arg(long, default_value_t = 10)]
    pub rounds: u32,
    /// Leading periods of each round left out of the averages.
    #[arg(long, default_value_t = 10)]
    pub warmup: u64,
    /// Slots between the service starts of the two d-d queues.
    #[arg(long, default_value_t = 1)]
    pub offset: u64,
    #[arg(long, value_enum, default_value = "queue-b-later")]
    pub tie_rule: TieRuleArg,
    /// Write the per-slot sample path of round 0 as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub system: &'static str,
    pub params: Value,
    pub rounds: u32,
    pub avg_aoi: f64,
    pub stderr_aoi: Option<f64>,
    pub avg_paoi: f64,
    pub stderr_paoi: Option<f64>,
    pub valid_per_period: f64,
    pub obsolete_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_freq: Option<Map<String, Value>>,
}

/// Runs the estimate; warnings are returned separately.
pub fn simulate(args: &SimulateArgs, seed: u64) -> Result<(SimulateReport, Vec<String>), CliError> {
    let resolved = args.system.resolve()?;
    let spec = resolved.to_spec(args.offset, args.tie_rule.into())?;
    let config = SimConfig {
        periods_per_round: args.periods,
        rounds: args.rounds,
        master_seed: seed,
        warmup_periods: args.warmup,
    };
    let est = estimate_with_ci(&spec, &config)?;
    let m = est.metrics;
    let mut params = resolved.params_json();
    let obj = params.as_object_mut().expect("params are an object");
    if let SystemSpec::Dual(d) = &spec {
        obj.insert("tie_rule".into(), tie_rule_name(d.tie_rule).into());
        if d.is_dd() {
            obj.insert("offset".into(), args.offset.into());
        }
    }
    obj.insert("periods_per_round".into(), args.periods.into());
    obj.insert("warmup_periods".into(), args.warmup.into());
    obj.insert("seed".into(), seed.into());
    let state_freq = (!m.state_frequency.is_empty()).then(|| {
        m.state_frequency
            .iter()
            .map(|(k, v)| (k.to_string(), Value::from(*v)))
            .collect()
    });
    let report = SimulateReport {
        system: args.system.system.name(),
        params,
        rounds: args.rounds,
        avg_aoi: m.avg_aoi,
        stderr_aoi: m.stderr_aoi,
        avg_paoi: m.avg_paoi,
        stderr_paoi: m.stderr_paoi,
        valid_per_period: m.valid_updates_per_period,
        obsolete_ratio: m.obsolete_ratio,
        state_freq,
    };
    Ok((report, est.warnings))
}

pub fn trace_csv(trace: &AoiTrace) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "t",
        "aoi",
        "delivered_a",
        "delivered_b",
        "valid_a",
        "valid_b",
        "warmup",
    ])?;
    let b = |x: bool| if x { "1" } else { "0" };
    for r in &trace.records {
        w.write_record([
            r.t.to_string().as_str(),
            r.aoi.to_string().as_str(),
            b(r.delivered_a),
            b(r.delivered_b),
            b(r.valid_a),
            b(r.valid_b),
            b(r.warmup),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

const SCALARS: [&str; 8] = [
    "system",
    "rounds",
    "avg_aoi",
    "stderr_aoi",
    "avg_paoi",
    "stderr_paoi",
    "valid_per_period",
    "obsolete_ratio",
];

fn scalar_table(r: &SimulateReport) -> Table {
    let mut t = Table::new(SCALARS);
    t.push(vec![
        r.system.into(),
        r.rounds.into(),
        r.avg_aoi.into(),
        r.stderr_aoi.into(),
        r.avg_paoi.into(),
        r.stderr_paoi.into(),
        r.valid_per_period.into(),
        r.obsolete_ratio.into(),
    ]);
    t
}

fn human(r: &SimulateReport) -> String {
    let se = |s: Option<f64>| s.map_or(String::new(), |s| format!(" ± {s}"));
    let mut out = format!(
        "system            {}\nparams            {}\nrounds            {}\navg_aoi           {}{}\navg_paoi          {}{}\nvalid_per_period  {}\nobsolete_ratio    {}\n",
        r.system,
        r.params,
        r.rounds,
        r.avg_aoi,
        se(r.stderr_aoi),
        r.avg_paoi,
        se(r.stderr_paoi),
        r.valid_per_period,
        r.obsolete_ratio,
    );
    if let Some(f) = &r.state_freq {
        out.push_str("state frequencies\n");
        for (k, v) in f {
            out.push_str(&format!("  {k:<8}  {v}\n"));
        }
    }
    out
}

pub fn run(args: &SimulateArgs, format: Option<Format>, seed: u64) -> Result<Outcome, CliError> {
    let (report, warnings) = simulate(args, seed)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.trace {
        let resolved = args.system.resolve()?;
        let spec = resolved.to_spec(args.offset, args.tie_rule.into())?;
        let config = SimConfig {
            periods_per_round: args.periods,
            rounds: args.rounds,
            master_seed: seed,
            warmup_periods: args.warmup,
        };
        let (_, trace) = run_round_traced(&spec, &config, 0)?;
        crate::output::emit(Some(path), &trace_csv(&trace)?)?;
    }
    let text = match format.unwrap_or(Format::Json) {
        Format::Json => json_text(&report)?,
        Format::Csv => scalar_table(&report).to_csv()?,
        Format::Human => human(&report),
    };
    Ok(Outcome::pass(text))
}
