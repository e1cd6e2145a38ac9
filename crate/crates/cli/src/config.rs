//! Scenario files: one TOML document with model, reform, sweep, microsim
//! and estimation blocks. Every block is optional and falls back to the
//! built-in defaults.

use serde::{Deserialize, Serialize};
use toml::Table;

use segmkt::econometrics::RegressionSpec;
use segmkt::microsim::MicrosimConfig;
use segmkt::model::{validate_params, ModelParams, RenewalCap};
use segmkt::policy::DEFAULT_F_GRID;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    out_dir: Option<String>,
    model: Table,
    reform: RawReform,
    sweep: SweepBlock,
    microsim: MicrosimBlock,
    estimation: EstimationBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawReform {
    pre: Option<Table>,
    post: Option<Table>,
    placebo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub f_values: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            f_values: DEFAULT_F_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrosimBlock {
    pub seed: Option<u64>,
    pub n_workers: usize,
    pub wave_months: Vec<i32>,
    pub wage_usd_scale: f64,
    pub treated_share: f64,
    pub burn_in_months: u32,
    pub mean_household_size: f64,
    pub post_gap_months: u32,
    pub switch_lead_months: u32,
}

impl Default for MicrosimBlock {
    fn default() -> Self {
        let d = MicrosimConfig::default();
        Self {
            seed: None,
            n_workers: d.n_workers,
            wave_months: d.wave_months,
            wage_usd_scale: d.wage_usd_scale,
            treated_share: d.treated_share,
            burn_in_months: d.burn_in_months,
            mean_household_size: d.mean_household_size,
            post_gap_months: d.post_gap_months,
            switch_lead_months: d.switch_lead_months,
        }
    }
}

/// Expected direction of an estimated effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Positive,
    Negative,
    /// Within two standard errors of zero.
    Zero,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub column: String,
    pub expect: Expect,
}

fn outcome(column: &str, expect: Expect) -> OutcomeSpec {
    OutcomeSpec {
        column: column.into(),
        expect,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationBlock {
    pub outcomes: Vec<OutcomeSpec>,
    pub treatment: String,
    pub fixed_effects: Vec<String>,
    pub covariates: Vec<String>,
    pub weight: String,
    pub cluster: String,
    /// Also estimate event-time paths.
    pub event_study: bool,
    pub reference_period: i32,
}

impl Default for EstimationBlock {
    fn default() -> Self {
        let s = RegressionSpec::standard("");
        Self {
            outcomes: vec![
                outcome("formal", Expect::Positive),
                outcome("informal", Expect::Negative),
                outcome("employed", Expect::Zero),
                outcome("ltc_conditional", Expect::Positive),
                outcome("tenure_months", Expect::None),
                outcome("tenure_formal_unconditional", Expect::Positive),
                outcome("tenure_stc_unconditional", Expect::Negative),
                outcome("wage_formal", Expect::Positive),
            ],
            treatment: s.treatment,
            fixed_effects: s.fixed_effects,
            covariates: s.covariates,
            weight: s.weight,
            cluster: s.cluster,
            event_study: true,
            reference_period: -1,
        }
    }
}

impl EstimationBlock {
    pub fn spec(&self, outcome: &str) -> RegressionSpec {
        RegressionSpec {
            outcome: outcome.to_string(),
            treatment: self.treatment.clone(),
            fixed_effects: self.fixed_effects.clone(),
            covariates: self.covariates.clone(),
            weight: self.weight.clone(),
            cluster: self.cluster.clone(),
        }
    }
}

/// Fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub out_dir: Option<String>,
    pub model: ModelParams,
    pub pre: ModelParams,
    pub post: ModelParams,
    pub placebo: bool,
    pub sweep: SweepBlock,
    pub microsim: MicrosimBlock,
    pub estimation: EstimationBlock,
}

#[derive(Serialize)]
struct Echo<'a> {
    scenario: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<&'a str>,
    model: &'a ModelParams,
    reform: EchoReform<'a>,
    sweep: &'a SweepBlock,
    microsim: &'a MicrosimBlock,
    estimation: &'a EstimationBlock,
}

#[derive(Serialize)]
struct EchoReform<'a> {
    pre: &'a ModelParams,
    post: &'a ModelParams,
    placebo: bool,
}

fn reform_defaults(firing_cost: f64, cap: RenewalCap) -> Table {
    let mut t = Table::new();
    t.insert("firing_cost".into(), toml::Value::Float(firing_cost));
    t.insert(
        "stc_renewal_cap".into(),
        toml::Value::try_from(cap).expect("cap serializes"),
    );
    t
}

fn overlay(base: &Table, over: &Table) -> Table {
    let mut out = base.clone();
    for (k, v) in over {
        out.insert(k.clone(), v.clone());
    }
    out
}

fn params(block: &'static str, table: Table) -> Result<ModelParams, CliError> {
    let p: ModelParams = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("[{block}]: {}", e.message())))?;
    validate_params(p).map_err(|e| CliError::Config(format!("[{block}]: {e}")))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let model = params("model", raw.model.clone())?;
        let pre_over = overlay(
            &reform_defaults(2.0, RenewalCap::Finite(48)),
            &raw.reform.pre.unwrap_or_default(),
        );
        let pre = params("reform.pre", overlay(&raw.model, &pre_over))?;
        let post = if raw.reform.placebo {
            pre.clone()
        } else {
            let post_over = overlay(
                &reform_defaults(0.5, RenewalCap::Unbounded),
                &raw.reform.post.unwrap_or_default(),
            );
            params("reform.post", overlay(&raw.model, &post_over))?
        };
        if raw.sweep.f_values.is_empty() {
            return Err(CliError::Config("[sweep]: f_values is empty".into()));
        }
        if let Some(f) = raw.sweep.f_values.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(CliError::Config(format!("[sweep]: firing cost {f} out of range")));
        }
        Ok(Self {
            scenario: raw
                .scenario
                .unwrap_or_else(|| if raw.reform.placebo { "placebo" } else { "reform" }.into()),
            out_dir: raw.out_dir,
            model,
            pre,
            post,
            placebo: raw.reform.placebo,
            sweep: raw.sweep,
            microsim: raw.microsim,
            estimation: raw.estimation,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Microsim settings; stochastic commands need a seed from the file or
    /// the command line.
    pub fn microsim_config(&self, seed_override: Option<u64>) -> Result<MicrosimConfig, CliError> {
        let m = &self.microsim;
        let seed = seed_override
            .or(m.seed)
            .ok_or_else(|| CliError::Config("a seed is required: set [microsim] seed or pass --seed".into()))?;
        Ok(MicrosimConfig {
            n_workers: m.n_workers,
            wave_months: m.wave_months.clone(),
            seed,
            wage_usd_scale: m.wage_usd_scale,
            treated_share: m.treated_share,
            burn_in_months: m.burn_in_months,
            mean_household_size: m.mean_household_size,
            post_gap_months: m.post_gap_months,
            switch_lead_months: m.switch_lead_months,
            scenario: self.scenario.clone(),
        })
    }

    /// The resolved scenario as a scenario file, with the effective seed
    /// filled in. Parsing the echo gives back the same scenario.
    pub fn echo(&self, seed: Option<u64>) -> Result<String, CliError> {
        let mut microsim = self.microsim.clone();
        if seed.is_some() {
            microsim.seed = seed;
        }
        let e = Echo {
            scenario: &self.scenario,
            out_dir: self.out_dir.as_deref(),
            model: &self.model,
            reform: EchoReform {
                pre: &self.pre,
                post: &self.post,
                placebo: self.placebo,
            },
            sweep: &self.sweep,
            microsim: &microsim,
            estimation: &self.estimation,
        };
        toml::to_string(&e).map_err(|e| CliError::Config(format!("cannot echo config: {e}")))
    }
}
