use std::fmt::Write as _;

use clap::{Args, Subcommand};
use serde_json::json;

use dqaoi_core::model::TieRule;
use dqaoi_core::state_calculus::{
    adjudicate, lemma_suite, reconstruction_suite, AdjudicationReport, ColumnMatch, LemmaCheck,
    LemmaKind, ReconstructionCheck, StateExpectations, DEFAULT_CAP,
};

use crate::error::CliError;
use crate::output::{json_text, Cell, Format, Table};
use crate::system::{tie_rule_name, TieRuleArg};
use crate::Outcome;

#[derive(Debug, Clone, Subcommand)]
pub enum VerifyCommand {
    /// Nested-sum identities over compositions, by brute force against
    /// binomial closed forms. Fails unless every identity holds exactly.
    Lemma(LemmaArgs),
    /// Per-state expectations of both closed-form families against exact
    /// enumeration. A report of findings; never fails.
    Table(TableArgs),
    /// Averages rebuilt from exact per-state expectations against the
    /// closed forms. Fails if a relative error exceeds --tol.
    #[command(visible_alias = "reconstruction")]
    Theorem1(Theorem1Args),
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    #[arg(long = "max-T", value_name = "T", default_value_t = 8)]
    pub max_t: u32,
    /// Largest number of compositions enumerated for one identity.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long = "max-T", value_name = "T", default_value_t = 6)]
    pub max_t: u32,
    #[arg(long, value_enum, default_value = "queue-b-later")]
    pub tie_rule: TieRuleArg,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

#[derive(Debug, Clone, Args)]
pub struct Theorem1Args {
    #[arg(long = "max-T", value_name = "T", default_value_t = 6)]
    pub max_t: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub ps: Vec<f64>,
    #[arg(long, value_enum, default_value = "queue-b-later")]
    pub tie_rule: TieRuleArg,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

fn kind_fields(k: LemmaKind) -> (&'static str, u32, Option<u32>, Option<u32>) {
    match k {
        LemmaKind::Count { i, b } => ("count", i, None, Some(b)),
        LemmaKind::Linear { i } => ("linear", i, None, None),
        LemmaKind::Square { i } => ("square", i, None, None),
        LemmaKind::Cross { i, j } => ("cross", i, Some(j), None),
    }
}

fn lemma_output(
    checks: &[LemmaCheck],
    max_t: u32,
    format: Format,
) -> Result<(String, bool), CliError> {
    let pass = checks.iter().all(LemmaCheck::holds);
    let text = match format {
        Format::Csv => {
            let mut t = Table::new([
                "kind",
                "i",
                "j",
                "b",
                "n",
                "T",
                "brute_force",
                "closed_form",
                "closed_form_alt",
                "holds",
            ]);
            for c in checks {
                let (name, i, j, b) = kind_fields(c.kind);
                t.push(vec![
                    name.into(),
                    i.into(),
                    j.map_or(Cell::Empty, Cell::from),
                    b.map_or(Cell::Empty, Cell::from),
                    c.n.into(),
                    c.t.into(),
                    c.brute_force.into(),
                    c.closed_form.into(),
                    c.closed_form_alt.map_or(Cell::Empty, Cell::from),
                    c.holds().into(),
                ]);
            }
            t.to_csv()?
        }
        Format::Json => json_text(&json!({
            "max_T": max_t,
            "checks": checks.len(),
            "failures": checks.iter().filter(|c| !c.holds()).collect::<Vec<_>>(),
            "pass": pass,
        }))?,
        Format::Human => {
            let mut t = Table::new(["identity", "checks", "exact"]);
            for name in ["count", "linear", "square", "cross"] {
                let of: Vec<&LemmaCheck> = checks
                    .iter()
                    .filter(|c| kind_fields(c.kind).0 == name)
                    .collect();
                t.push(vec![
                    name.into(),
                    of.len().into(),
                    of.iter().filter(|c| c.holds()).count().into(),
                ]);
            }
            let mut s = format!("nested-sum identities, 1 <= n <= T <= {max_t}\n\n");
            s.push_str(&t.to_human());
            for c in checks.iter().filter(|c| !c.holds()) {
                let _ = writeln!(
                    s,
                    "FAIL {:?} n={} T={}: brute force {} vs {}",
                    c.kind, c.n, c.t, c.brute_force, c.closed_form
                );
            }
            let _ = writeln!(
                s,
                "\n{}: {} checks",
                if pass { "PASS" } else { "FAIL" },
                checks.len()
            );
            s
        }
    };
    Ok((text, pass))
}

fn theorem1_output(
    checks: &[ReconstructionCheck],
    tol: f64,
    format: Format,
) -> Result<(String, bool), CliError> {
    let ok = |c: &ReconstructionCheck| {
        c.rel_err_aoi <= tol && c.rel_err_paoi <= tol && c.rel_err_valid <= tol
    };
    let pass = checks.iter().all(ok);
    let mut t = Table::new([
        "p",
        "T",
        "avg_aoi",
        "rel_err_aoi",
        "avg_paoi",
        "rel_err_paoi",
        "valid_per_period",
        "rel_err_valid",
        "exact_match",
    ]);
    for c in checks {
        t.push(vec![
            c.p.into(),
            c.t.into(),
            c.reconstructed.avg_aoi.into(),
            c.rel_err_aoi.into(),
            c.reconstructed.avg_paoi.into(),
            c.rel_err_paoi.into(),
            c.reconstructed.valid_per_period.into(),
            c.rel_err_valid.into(),
            c.exact_match.into(),
        ]);
    }
    let text = match format {
        Format::Json => json_text(&json!({ "tol": tol, "checks": checks, "pass": pass }))?,
        Format::Csv => t.to_csv()?,
        Format::Human => {
            let worst = checks
                .iter()
                .flat_map(|c| [c.rel_err_aoi, c.rel_err_paoi, c.rel_err_valid])
                .fold(0.0, f64::max);
            format!(
                "{}\n{}: {} grid points, largest relative error {worst:e} (tol {tol:e})\n",
                t.to_human(),
                if pass { "PASS" } else { "FAIL" },
                checks.len()
            )
        }
    };
    Ok((text, pass))
}

fn frac(n: u32, d: u32) -> String {
    format!("{n}/{d}")
}

/// Markdown report of the adjudication.
pub fn table_report(r: &AdjudicationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Per-state expectation adjudication\n");
    let _ = writeln!(
        s,
        "Exact enumeration of every pair of (previous, current) period completion patterns of \
         queue A, for {} <= T <= {} with tie rule `{}`, compared with two closed-form families \
         of per-state expectations:\n",
        r.min_t,
        r.max_t,
        tie_rule_name(r.tie_rule)
    );
    let _ = writeln!(
        s,
        "- `summary`: the per-family summary table of E[A], E[V] and E[Q]."
    );
    let _ = writeln!(
        s,
        "- `derivation`: the expressions stated while deriving them, one sub-case at a time.\n"
    );
    let _ = writeln!(
        s,
        "For a state (k,n), k and n are queue A's completions in the previous and current \
         period of queue B. E[A] is the expected sum of peak AoI over the period's valid \
         updates, E[V] the expected number of valid updates, and E[Q] the expected AoI area \
         over the period's T slots. Values are exact rationals.\n"
    );
    let _ = writeln!(
        s,
        "Generated by `dqaoi verify table --max-T {}`.\n",
        r.max_t
    );
    let _ = writeln!(s, "## Agreement per family\n");
    let _ = writeln!(
        s,
        "Each cell counts the states that match the enumeration exactly.\n"
    );
    let _ = writeln!(
        s,
        "| family | states | summary E[A] | summary E[V] | summary E[Q] | derivation E[A] | derivation E[V] | derivation E[Q] |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for (fam, (a, b)) in r.tallies() {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            fam.label(),
            a.rows,
            frac(a.e_a, a.rows),
            frac(a.e_v, a.rows),
            frac(a.e_q, a.rows),
            frac(b.e_a, b.rows),
            frac(b.e_v, b.rows),
            frac(b.e_q, b.rows),
        );
    }
    let _ = writeln!(s, "\n## Mismatches\n");
    let _ = writeln!(s, "`=` marks a value equal to the enumeration.\n");
    let _ = writeln!(
        s,
        "| T | state | quantity | enumeration | summary | derivation |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    type Get = fn(&StateExpectations) -> &num_rational::BigRational;
    type Matched = fn(&ColumnMatch) -> bool;
    let columns: [(&str, Get, Matched); 3] = [
        ("E[A]", |e| &e.e_a, |m| m.e_a),
        ("E[V]", |e| &e.e_v, |m| m.e_v),
        ("E[Q]", |e| &e.e_q, |m| m.e_q),
    ];
    let mut mismatches = 0;
    for row in &r.rows {
        for (name, get, matched) in &columns {
            let (ms, md) = (matched(&row.summary_match), matched(&row.derivation_match));
            if ms && md {
                continue;
            }
            mismatches += 1;
            let show = |m: bool, e: &StateExpectations| {
                if m {
                    "=".to_string()
                } else {
                    get(e).to_string()
                }
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                row.t,
                row.key,
                name,
                get(&row.oracle),
                show(ms, &row.summary),
                show(md, &row.derivation),
            );
        }
    }
    if mismatches == 0 {
        let _ = writeln!(s, "| | | none | | | |");
    }
    s
}

fn table_output(r: &AdjudicationReport, format: Format) -> Result<String, CliError> {
    Ok(match format {
        Format::Human => table_report(r),
        Format::Csv | Format::Json => {
            let mut t = Table::new([
                "T",
                "k",
                "n",
                "family",
                "quantity",
                "enumeration",
                "summary",
                "derivation",
                "summary_match",
                "derivation_match",
            ]);
            for row in &r.rows {
                let cols = [
                    (
                        "E[A]",
                        &row.oracle.e_a,
                        &row.summary.e_a,
                        &row.derivation.e_a,
                    ),
                    (
                        "E[V]",
                        &row.oracle.e_v,
                        &row.summary.e_v,
                        &row.derivation.e_v,
                    ),
                    (
                        "E[Q]",
                        &row.oracle.e_q,
                        &row.summary.e_q,
                        &row.derivation.e_q,
                    ),
                ];
                for (name, o, a, b) in cols {
                    t.push(vec![
                        row.t.into(),
                        row.key.k.into(),
                        row.key.n.into(),
                        row.family.label().into(),
                        name.into(),
                        o.to_string().into(),
                        a.to_string().into(),
                        b.to_string().into(),
                        (o == a).into(),
                        (o == b).into(),
                    ]);
                }
            }
            t.render(format)?
        }
    })
}

fn check_max_t(max_t: u32, min: u32) -> Result<(), CliError> {
    if max_t < min {
        return Err(CliError::usage(format!("--max-T must be at least {min}")));
    }
    Ok(())
}

pub fn run(cmd: &VerifyCommand, format: Option<Format>) -> Result<Outcome, CliError> {
    let format = format.unwrap_or(Format::Human);
    match cmd {
        VerifyCommand::Lemma(a) => {
            check_max_t(a.max_t, 1)?;
            let checks = lemma_suite(a.max_t, a.cap)?;
            let (text, pass) = lemma_output(&checks, a.max_t, format)?;
            Ok(Outcome { text, passed: pass })
        }
        VerifyCommand::Table(a) => {
            check_max_t(a.max_t, 2)?;
            let report = adjudicate(a.max_t, TieRule::from(a.tie_rule), a.cap)?;
            Ok(Outcome::pass(table_output(&report, format)?))
        }
        VerifyCommand::Theorem1(a) => {
            check_max_t(a.max_t, 1)?;
            if a.ps.is_empty() {
                return Err(CliError::usage("--ps is empty"));
            }
            let checks = reconstruction_suite(&a.ps, a.max_t, a.tie_rule.into(), a.cap)?;
            let (text, pass) = theorem1_output(&checks, a.tol, format)?;
            Ok(Outcome { text, passed: pass })
        }
    }
}
