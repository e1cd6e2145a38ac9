//! Weighted fixed-effects regressions with household-clustered standard errors.

mod absorb;
mod fit;

pub use absorb::{absorbed_rank, demean, Convergence, Grouping};
pub use fit::{cluster_robust_vcov, coef_difference_test, event_study, t_difference, twfe_estimate, EventSpec};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::microsim::WorkerRecord;

/// Normal critical value for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;
pub const DEMEAN_TOL: f64 = 1e-12;
pub const DEMEAN_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("singular design: `{column}` is collinear with the fixed effects or earlier regressors")]
    SingularDesign { column: String },
    #[error("cluster column `{0}` has no usable values")]
    EmptyCluster(String),
    #[error("weight column `{column}` must be strictly positive (row {row})")]
    NonPositiveWeight { column: String, row: usize },
    #[error("no observations left after dropping missing values")]
    EmptySample,
    #[error("fixed-effect demeaning did not converge in {sweeps} sweeps (change {change:e})")]
    DemeaningDiverged { sweeps: usize, change: f64 },
    #[error("reference period {0} not present among treated observations")]
    MissingReferencePeriod(i32),
    #[error("difference test needs a positive combined variance")]
    ZeroVariance,
    #[error("column `{column}` has {found} rows, expected {expected}")]
    RaggedColumn {
        column: String,
        found: usize,
        expected: usize,
    },
}

/// Numeric columns by name; `NaN` marks a missing value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    rows: usize,
    columns: BTreeMap<String, Vec<f64>>,
}

impl Dataset {
    pub fn from_columns<S: Into<String>>(cols: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self, EconError> {
        let mut ds = Dataset::default();
        for (name, v) in cols {
            ds.insert(name, v)?;
        }
        Ok(ds)
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), EconError> {
        let name = name.into();
        if self.columns.is_empty() {
            self.rows = values.len();
        } else if values.len() != self.rows {
            return Err(EconError::RaggedColumn {
                column: name,
                found: values.len(),
                expected: self.rows,
            });
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, name: &str) -> Result<&[f64], EconError> {
        self.columns
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| EconError::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    /// Survey columns plus the derived outcomes and indicators used by the
    /// standard specifications:
    ///
    /// * `treated` (reforming economy), `post`, `treated_post`
    /// * `ltc_unconditional`: long-term contract among everyone
    /// * `tenure_formal_unconditional`, `tenure_stc_unconditional`,
    ///   `tenure_ltc_unconditional`: tenure in that job type, 0 otherwise
    /// * `wage_formal`: wage among formal workers, missing otherwise
    pub fn from_records(records: &[WorkerRecord]) -> Self {
        let col = |f: &dyn Fn(&WorkerRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        let stc = |r: &WorkerRecord| r.ltc_conditional == Some(0);
        let ltc = |r: &WorkerRecord| r.ltc_conditional == Some(1);
        let mut columns = BTreeMap::new();
        let mut put = |name: &str, v: Vec<f64>| {
            columns.insert(name.to_string(), v);
        };
        put("worker_id", col(&|r| r.worker_id as f64));
        put("country_id", col(&|r| r.country_id as f64));
        put("household_id", col(&|r| r.household_id as f64));
        put("survey_wave", col(&|r| r.survey_wave as f64));
        put("event_month", col(&|r| r.event_month as f64));
        put("household_weight", col(&|r| r.household_weight));
        put("employed", col(&|r| r.employed as f64));
        put("formal", col(&|r| r.formal as f64));
        put("informal", col(&|r| r.informal as f64));
        put("ltc_conditional", col(&|r| r.ltc_conditional.map_or(f64::NAN, f64::from)));
        put("tenure_months", col(&|r| r.tenure_months as f64));
        put("nonemp_spell_years", col(&|r| r.nonemp_spell_years));
        put("monthly_wage", col(&|r| r.monthly_wage));
        put("urban", col(&|r| r.urban as f64));
        put("age", col(&|r| r.age as f64));
        put("female", col(&|r| r.female as f64));
        put("education", col(&|r| r.education as f64));
        put("household_size", col(&|r| r.household_size as f64));
        put("married", col(&|r| r.married as f64));
        put("treated", col(&|r| b(r.is_treated())));
        put("post", col(&|r| b(r.is_post())));
        put("treated_post", col(&|r| b(r.is_treated() && r.is_post())));
        put("ltc_unconditional", col(&|r| b(ltc(r))));
        put(
            "tenure_formal_unconditional",
            col(&|r| if r.formal == 1 { r.tenure_months as f64 } else { 0.0 }),
        );
        put(
            "tenure_stc_unconditional",
            col(&|r| if stc(r) { r.tenure_months as f64 } else { 0.0 }),
        );
        put(
            "tenure_ltc_unconditional",
            col(&|r| if ltc(r) { r.tenure_months as f64 } else { 0.0 }),
        );
        put(
            "wage_formal",
            col(&|r| if r.formal == 1 { r.monthly_wage } else { f64::NAN }),
        );
        Self {
            rows: records.len(),
            columns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub outcome: String,
    pub treatment: String,
    pub fixed_effects: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub weight: String,
    pub cluster: String,
}

impl RegressionSpec {
    /// Difference-in-differences with country and month effects, household
    /// covariates, household weights and household clusters.
    pub fn standard(outcome: &str) -> Self {
        Self {
            outcome: outcome.to_string(),
            treatment: "treated_post".into(),
            fixed_effects: vec!["country_id".into(), "event_month".into()],
            covariates: ["urban", "age", "female", "education", "household_size", "married"]
                .map(String::from)
                .to_vec(),
            weight: "household_weight".into(),
            cluster: "household_id".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Term {
    pub fn new(name: String, coef: f64, se: f64) -> Self {
        Self {
            name,
            coef,
            se,
            ci_low: coef - Z_95 * se,
            ci_high: coef + Z_95 * se,
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// One event-time coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCoef {
    pub period: i32,
    pub term: Term,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Weighted sum of squared residuals.
    pub rss: f64,
    /// Share of the demeaned outcome variance explained by the regressors.
    pub r2_within: f64,
    pub demean_sweeps: usize,
    /// Parameters counted in the small-sample factor, fixed effects included.
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub outcome: String,
    /// Treatment (or event-time) terms first, then covariates.
    pub terms: Vec<Term>,
    /// Event-time path; empty for the pooled specification.
    pub path: Vec<EventCoef>,
    pub n_observations: usize,
    pub n_clusters: usize,
    pub diagnostics: FitDiagnostics,
    /// The demeaned outcome is identically zero; standard errors are 0.
    pub degenerate: bool,
    pub warnings: Vec<String>,
    /// Full cluster-robust covariance, in `terms` order.
    pub vcov: Vec<Vec<f64>>,
}

impl EstimateResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// First term: the treatment effect in the pooled specification.
    pub fn treatment(&self) -> &Term {
        &self.terms[0]
    }
}
