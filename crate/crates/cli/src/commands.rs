use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use segmkt::bellman::{solve_equilibrium, Diagnostics};
use segmkt::econometrics::{event_study, t_difference, twfe_estimate, Dataset, EstimateResult, EventSpec, Term};
use segmkt::flows::{summarize_with, EquilibriumSummary, FlowAnalysis};
use segmkt::microsim::{panel_summary, read_panel, simulate_panel, write_panel, SurveyPanel};
use segmkt::policy::{check_predictions, effects_between, sweep_firing_cost, PredictionReport, ReformEffects};
use segmkt::{EquilibriumSolution, ModelParams};

use crate::config::{Expect, ScenarioConfig};
use crate::error::CliError;
use crate::output::{flush, num, OutputDir, CONFIG_FILE};

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ScenarioConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn open(&self, seed: Option<u64>) -> Result<OutputDir, CliError> {
        let dir = OutputDir::create(&self.out)?;
        dir.write_text(CONFIG_FILE, &self.config.echo(seed)?)?;
        Ok(dir)
    }
}

/// Flattens nested JSON objects into dotted `(key, value)` pairs.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn flat<T: Serialize>(v: &T) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    flatten("", &serde_json::to_value(v)?, &mut out);
    Ok(out)
}

#[derive(Serialize)]
struct DiagnosticsOut {
    outer_iterations: usize,
    inner_iterations: usize,
    bellman_residual: f64,
    free_entry_residuals: [f64; 3],
    threshold_residuals: [f64; 3],
}

impl From<&Diagnostics> for DiagnosticsOut {
    fn from(d: &Diagnostics) -> Self {
        Self {
            outer_iterations: d.outer_iterations,
            inner_iterations: d.inner_iterations,
            bellman_residual: d.bellman_residual,
            free_entry_residuals: d.free_entry_residuals,
            threshold_residuals: d.threshold_residuals,
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    params: &'a ModelParams,
    summary: &'a EquilibriumSummary,
    diagnostics: DiagnosticsOut,
}

struct Solved {
    eq: EquilibriumSolution,
    summary: EquilibriumSummary,
}

fn solve(params: &ModelParams) -> Result<Solved, CliError> {
    let eq = solve_equilibrium(params)?;
    let fa = FlowAnalysis::new(&eq)?;
    let summary = summarize_with(&eq, &fa);
    Ok(Solved { eq, summary })
}

pub fn cmd_solve(ctx: &Context) -> Result<PathBuf, CliError> {
    let s = solve(&ctx.config.model)?;
    let dir = ctx.open(None)?;
    let report = SolveReport {
        params: &ctx.config.model,
        summary: &s.summary,
        diagnostics: (&s.eq.diagnostics).into(),
    };
    dir.write_json("summary.json", &report)?;
    let rows = flat(&report)?;
    dir.write_csv("summary.csv", &["quantity", "value"], rows.iter().map(|(k, v)| [k, v]))?;
    dir.write_csv(
        "tightness_trace.csv",
        &["iteration", "change"],
        s.eq.diagnostics
            .tightness_trace
            .iter()
            .enumerate()
            .map(|(i, c)| [(i + 1).to_string(), num(*c)]),
    )?;
    dir.commit()
}

#[derive(Serialize)]
struct SweepRow<'a> {
    firing_cost: f64,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a EquilibriumSummary>,
}

pub fn cmd_sweep(ctx: &Context) -> Result<PathBuf, CliError> {
    let sweep = sweep_firing_cost(&ctx.config.model, &ctx.config.sweep.f_values)?;
    let report = if sweep.solved().count() < 2 {
        let f = sweep.points.first().map_or(f64::NAN, |p| p.firing_cost);
        PredictionReport::untestable(f)
    } else {
        check_predictions(&sweep)?
    };
    let dir = ctx.open(None)?;
    let points: Vec<SweepRow> = sweep
        .points
        .iter()
        .map(|p| SweepRow {
            firing_cost: p.firing_cost,
            status: if p.summary.is_ok() { "solved" } else { "failed" },
            error: p.summary.as_ref().err().map(String::as_str),
            summary: p.summary.as_ref().ok(),
        })
        .collect();
    dir.write_json("sweep.json", &points)?;
    let mut w = dir.csv_writer("sweep.csv")?;
    w.write_record(["firing_cost", "quantity", "value"])?;
    for (p, s) in sweep.solved() {
        for (k, v) in flat(s)? {
            if k != "firing_cost" {
                w.write_record([num(p.firing_cost), k, v])?;
            }
        }
    }
    w.flush()?;
    dir.write_json("predictions.json", &report)?;
    dir.write_csv(
        "predictions.csv",
        &["claim", "statement", "verdict", "monotone", "at_low_f", "at_high_f"],
        report.claims.iter().map(|c| {
            [
                c.name.to_string(),
                c.statement.to_string(),
                c.verdict.as_str().to_string(),
                c.monotone.to_string(),
                num(c.at_low_f),
                num(c.at_high_f),
            ]
        }),
    )?;
    dir.commit()
}

struct Simulated {
    panel: SurveyPanel,
    effects: ReformEffects,
}

fn simulate(ctx: &Context) -> Result<Simulated, CliError> {
    let cfg = ctx.config.microsim_config(ctx.seed)?;
    let c = &ctx.config;
    let (pre, post) = if c.placebo {
        let s = solve(&c.pre)?;
        (s, None)
    } else {
        let (a, b) = rayon::join(|| solve(&c.pre), || solve(&c.post));
        (a?, Some(b?))
    };
    let post_ref = post.as_ref().unwrap_or(&pre);
    let panel = simulate_panel(&pre.eq, &post_ref.eq, &pre.eq, &cfg)?;
    let effects = effects_between(pre.summary.clone(), post_ref.summary.clone());
    Ok(Simulated { panel, effects })
}

fn write_simulation(dir: &OutputDir, sim: &Simulated) -> Result<(), CliError> {
    let path = dir.path("panel.csv");
    let mut w = dir.writer("panel.csv")?;
    write_panel(&sim.panel, &mut w)?;
    flush(w, &path)?;
    dir.write_json("panel_meta.json", &sim.panel.meta)?;
    let summary = panel_summary(&sim.panel.records);
    let mut w = dir.csv_writer("panel_summary.csv")?;
    w.write_record(["treated", "post", "quantity", "value"])?;
    for row in &summary.rows {
        for (k, v) in flat(row)? {
            if k != "treated" && k != "post" {
                w.write_record([(row.treated as u8).to_string(), (row.post as u8).to_string(), k, v])?;
            }
        }
    }
    w.flush()?;
    let mut w = dir.csv_writer("steady_state.csv")?;
    w.write_record(["quantity", "pre", "post", "change"])?;
    let (pre, post) = (flat(&sim.effects.pre)?, flat(&sim.effects.post)?);
    for ((k, a), (_, b)) in pre.iter().zip(&post) {
        let (x, y) = (a.parse::<f64>().unwrap_or(f64::NAN), b.parse::<f64>().unwrap_or(f64::NAN));
        w.write_record([k.clone(), a.clone(), b.clone(), num(y - x)])?;
    }
    w.flush()?;
    dir.write_csv(
        "steady_state_signs.csv",
        &["outcome", "change", "expected_sign", "sign_matches"],
        sim.effects.effects.iter().map(|e| {
            [
                e.outcome.to_string(),
                num(e.delta),
                e.expected_sign.map_or(String::new(), |s| s.to_string()),
                e.sign_matches.map_or(String::new(), |m| m.to_string()),
            ]
        }),
    )?;
    Ok(())
}

pub fn cmd_simulate(ctx: &Context) -> Result<PathBuf, CliError> {
    let seed = ctx.config.microsim_config(ctx.seed)?.seed;
    let sim = simulate(ctx)?;
    let dir = ctx.open(Some(seed))?;
    write_simulation(&dir, &sim)?;
    dir.commit()
}

/// Pooled and event-time estimates for one outcome.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeEstimate {
    pub outcome: String,
    pub expect: Expect,
    pub pooled: EstimateResult,
    pub event: Option<EstimateResult>,
}

impl OutcomeEstimate {
    /// `None` when no direction is expected.
    pub fn sign_matches(&self) -> Option<bool> {
        let t = self.pooled.treatment();
        match self.expect {
            Expect::Positive => Some(t.coef > 0.0),
            Expect::Negative => Some(t.coef < 0.0),
            Expect::Zero => Some(t.coef.abs() <= 2.0 * t.se),
            Expect::None => None,
        }
    }
}

pub fn estimate_outcomes(ds: &Dataset, cfg: &ScenarioConfig) -> Result<Vec<OutcomeEstimate>, CliError> {
    let est = &cfg.estimation;
    est.outcomes
        .par_iter()
        .map(|o| {
            let spec = est.spec(&o.column);
            let pooled = twfe_estimate(ds, &spec)?;
            let event = if est.event_study {
                let mut es = EventSpec::standard(&o.column);
                es.base = spec;
                es.reference = est.reference_period;
                Some(event_study(ds, &es)?)
            } else {
                None
            };
            Ok(OutcomeEstimate {
                outcome: o.column.clone(),
                expect: o.expect,
                pooled,
                event,
            })
        })
        .collect()
}

fn expect_str(e: Expect) -> &'static str {
    match e {
        Expect::Positive => "positive",
        Expect::Negative => "negative",
        Expect::Zero => "zero",
        Expect::None => "none",
    }
}

fn term_row(outcome: &str, t: &Term, r: &EstimateResult) -> [String; 8] {
    [
        outcome.to_string(),
        t.name.clone(),
        num(t.coef),
        num(t.se),
        num(t.ci_low),
        num(t.ci_high),
        r.n_observations.to_string(),
        r.n_clusters.to_string(),
    ]
}

/// Published heterogeneity pairs for the permanent-contract effect:
/// (label, coef1, se1, coef2, se2, printed t).
pub const PUBLISHED_PAIRS: [(&str, f64, f64, f64, f64, f64); 4] = [
    ("male vs female", 0.211, 0.023, 0.280, 0.038, -1.48),
    ("urban vs rural", 0.190, 0.025, 0.293, 0.038, -2.04),
    ("age <= 35 vs > 35", 0.251, 0.026, 0.193, 0.027, 1.55),
    ("married vs not married", 0.222, 0.024, 0.261, 0.042, 0.71),
];

/// Text for `notes.txt`: the two-coefficient t statistic applied to the
/// published pairs next to the printed values.
pub fn difference_test_notes() -> Result<String, CliError> {
    let mut s = String::from(
        "Difference test between two independently estimated coefficients:\n\
         t = (b1 - b2) / sqrt(se1^2 + se2^2)\n\n\
         Published heterogeneity pairs for the permanent-contract effect\n\
         (coefficients and standard errors as printed, rounded to 3 decimals):\n\n",
    );
    s.push_str("pair                     b1     se1    b2     se2    t (formula)  t (printed)\n");
    for (label, b1, s1, b2, s2, printed) in PUBLISHED_PAIRS {
        let t = t_difference(b1, s1, b2, s2)?;
        s.push_str(&format!(
            "{label:<24} {b1:.3}  {s1:.3}  {b2:.3}  {s2:.3}  {t:>11.4}  {printed:>11.2}\n"
        ));
    }
    s.push_str(
        "\nThe male/female pair gives -1.5534 from the formula against -1.48 as\n\
         printed. Letting every input vary within its rounding interval keeps t\n\
         between about -1.60 and -1.51, so rounding alone does not account for\n\
         the gap. The married pair also differs in sign from the printed value.\n\
         A positive covariance between the two estimates, or standard errors\n\
         other than the ones shown, would shrink the statistic toward the printed\n\
         value. The formula is implemented as stated; the printed value is not\n\
         matched.\n",
    );
    Ok(s)
}

fn write_estimates(dir: &OutputDir, results: &[OutcomeEstimate]) -> Result<(), CliError> {
    dir.write_json("estimates.json", results)?;
    let mut w = dir.csv_writer("estimates.csv")?;
    w.write_record(["outcome", "term", "estimate", "se", "ci_low", "ci_high", "n_obs", "n_clusters"])?;
    for r in results {
        for t in &r.pooled.terms {
            w.write_record(term_row(&r.outcome, t, &r.pooled))?;
        }
    }
    w.flush()?;
    let mut w = dir.csv_writer("event_study.csv")?;
    w.write_record(["outcome", "period", "estimate", "se", "ci_low", "ci_high"])?;
    for r in results {
        if let Some(ev) = &r.event {
            for p in &ev.path {
                let t = &p.term;
                w.write_record([
                    r.outcome.clone(),
                    p.period.to_string(),
                    num(t.coef),
                    num(t.se),
                    num(t.ci_low),
                    num(t.ci_high),
                ])?;
            }
        }
    }
    w.flush()?;
    dir.write_csv(
        "signs.csv",
        &["outcome", "expected", "estimate", "se", "verdict"],
        results.iter().map(|r| {
            let t = r.pooled.treatment();
            let verdict = match r.sign_matches() {
                Some(true) => "match",
                Some(false) => "mismatch",
                None => "n/a",
            };
            [
                r.outcome.clone(),
                expect_str(r.expect).to_string(),
                num(t.coef),
                num(t.se),
                verdict.to_string(),
            ]
        }),
    )?;
    let mut warnings = String::new();
    for r in results {
        for w in r.pooled.warnings.iter().chain(r.event.iter().flat_map(|e| &e.warnings)) {
            warnings.push_str(&format!("{}: {w}\n", r.outcome));
        }
    }
    if !warnings.is_empty() {
        dir.write_text("warnings.txt", &warnings)?;
    }
    dir.write_text("notes.txt", &difference_test_notes()?)?;
    Ok(())
}

pub fn cmd_reform(ctx: &Context) -> Result<PathBuf, CliError> {
    let seed = ctx.config.microsim_config(ctx.seed)?.seed;
    let sim = simulate(ctx)?;
    let ds = Dataset::from_records(&sim.panel.records);
    let results = estimate_outcomes(&ds, &ctx.config)?;
    let dir = ctx.open(Some(seed))?;
    write_simulation(&dir, &sim)?;
    write_estimates(&dir, &results)?;
    dir.commit()
}

pub fn cmd_estimate(ctx: &Context, panel: &Path) -> Result<PathBuf, CliError> {
    let file = std::fs::File::open(panel).map_err(|e| CliError::Io(format!("{}: {e}", panel.display())))?;
    let records = read_panel(std::io::BufReader::new(file))?;
    let ds = Dataset::from_records(&records);
    let results = estimate_outcomes(&ds, &ctx.config)?;
    let dir = ctx.open(None)?;
    write_estimates(&dir, &results)?;
    dir.commit()
}
