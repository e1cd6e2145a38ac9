//! Firing-cost sweeps, comparative-statics checks and the reform counterfactual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::{check_cap, solve_equilibrium, EquilibriumSolution};
use crate::error::SolveError;
use crate::flows::{summarize_with, AugmentedChain, EquilibriumSummary, FlowAnalysis, TransitionMatrix};
use crate::model::{ModelParams, RenewalCap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("need at least {need} solved sweep points, got {got}")]
    InsufficientPoints { need: usize, got: usize },
    #[error("sweep points differ in `{field}`, not only in firing_cost")]
    ScenarioMismatch { field: &'static str },
    #[error("reform scenario may only change firing_cost and stc_renewal_cap; `{field}` differs")]
    InvalidScenario { field: &'static str },
    #[error("STC cap mechanics need a finite renewal cap")]
    UnboundedCap,
    #[error("firing-cost sweep needs at least one value")]
    EmptySweep,
}

/// First field (other than those in `allowed`) where two parameter sets differ.
fn first_difference(a: &ModelParams, b: &ModelParams, allow_f: bool, allow_cap: bool) -> Option<&'static str> {
    let checks: [(&'static str, bool); 14] = [
        ("discount_rate", a.discount_rate != b.discount_rate),
        ("unemployment_flow", a.unemployment_flow != b.unemployment_flow),
        ("vacancy_cost", a.vacancy_cost != b.vacancy_cost),
        ("firing_cost", !allow_f && a.firing_cost != b.firing_cost),
        ("informal_penalty", a.informal_penalty != b.informal_penalty),
        ("otj_search_rate", a.otj_search_rate != b.otj_search_rate),
        ("bargaining_weight", a.bargaining_weight != b.bargaining_weight),
        ("matching_efficiency", a.matching_efficiency != b.matching_efficiency),
        ("matching_elasticity", a.matching_elasticity != b.matching_elasticity),
        ("productivity_spec", a.productivity_spec != b.productivity_spec),
        ("stc_renewal_cap", !allow_cap && a.stc_renewal_cap != b.stc_renewal_cap),
        ("grid_size", a.grid_size != b.grid_size),
        ("redraw_prob", a.redraw_prob != b.redraw_prob),
        ("search_dispersion", a.search_dispersion != b.search_dispersion),
    ];
    checks.iter().find(|(_, differs)| *differs).map(|(name, _)| *name)
}

/// Firing costs of the standard sweep.
pub const DEFAULT_F_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Pre- and post-reform parameter sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformScenario {
    pub pre: ModelParams,
    pub post: ModelParams,
}

impl ReformScenario {
    pub fn new(pre: ModelParams, post: ModelParams) -> Result<Self, PolicyError> {
        if let Some(field) = first_difference(&pre, &post, true, true) {
            return Err(PolicyError::InvalidScenario { field });
        }
        Ok(Self { pre, post })
    }

    /// Severance 2.0 with a 48-month STC cap, then severance 0.5 with no cap.
    pub fn from_base(base: &ModelParams) -> Self {
        let pre = ModelParams {
            firing_cost: 2.0,
            stc_renewal_cap: RenewalCap::Finite(48),
            ..base.clone()
        };
        let post = ModelParams {
            firing_cost: 0.5,
            stc_renewal_cap: RenewalCap::Unbounded,
            ..base.clone()
        };
        Self { pre, post }
    }

    pub fn baseline() -> Self {
        Self::from_base(&ModelParams::baseline())
    }

    /// Both arms identical: the reform is a no-op.
    pub fn placebo(params: &ModelParams) -> Self {
        Self {
            pre: params.clone(),
            post: params.clone(),
        }
    }
}

/// Solved summary at one firing cost; failures are kept as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub firing_cost: f64,
    pub params: ModelParams,
    pub summary: Result<EquilibriumSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by firing cost, ascending.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn solved(&self) -> impl Iterator<Item = (&SweepPoint, &EquilibriumSummary)> {
        self.points.iter().filter_map(|p| p.summary.as_ref().ok().map(|s| (p, s)))
    }
}

fn solve_and_summarize(params: &ModelParams) -> Result<(EquilibriumSolution, FlowAnalysis), SolveError> {
    let eq = solve_equilibrium(params)?;
    let fa = FlowAnalysis::new(&eq)?;
    Ok((eq, fa))
}

fn summary_of(params: &ModelParams) -> Result<EquilibriumSummary, SolveError> {
    solve_and_summarize(params).map(|(eq, fa)| summarize_with(&eq, &fa))
}

/// Solves one equilibrium per firing cost, in parallel. A failed point is
/// recorded rather than aborting the sweep.
pub fn sweep_firing_cost(base: &ModelParams, f_values: &[f64]) -> Result<SweepResult, PolicyError> {
    if f_values.is_empty() {
        return Err(PolicyError::EmptySweep);
    }
    let mut fs = f_values.to_vec();
    fs.sort_by(|a, b| a.total_cmp(b));
    let points = fs
        .par_iter()
        .map(|&f| {
            let params = ModelParams {
                firing_cost: f,
                ..base.clone()
            };
            let summary = summary_of(&params).map_err(|e| e.to_string());
            SweepPoint {
                firing_cost: f,
                params,
                summary,
            }
        })
        .collect();
    Ok(SweepResult { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    NotTestable,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::NotTestable => "not testable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimCheck {
    pub name: &'static str,
    pub statement: &'static str,
    /// Comparison of the lowest-f and highest-f equilibria.
    pub verdict: Verdict,
    /// Whether the ordering holds between every adjacent pair of solved points.
    pub monotone: bool,
    pub at_low_f: f64,
    pub at_high_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub low_f: f64,
    pub high_f: f64,
    pub claims: Vec<ClaimCheck>,
}

impl PredictionReport {
    /// Every claim marked not testable, for sweeps that cannot compare two
    /// firing costs.
    pub fn untestable(f: f64) -> Self {
        Self {
            low_f: f,
            high_f: f,
            claims: CLAIMS
                .iter()
                .map(|&(name, statement, _, _)| ClaimCheck {
                    name,
                    statement,
                    verdict: Verdict::NotTestable,
                    monotone: false,
                    at_low_f: f64::NAN,
                    at_high_f: f64::NAN,
                })
                .collect(),
        }
    }

    pub fn all_hold(&self) -> bool {
        self.claims.iter().all(|c| c.verdict == Verdict::Holds)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.claims.iter().map(|c| c.verdict).collect()
    }
}

type Metric = fn(&EquilibriumSummary) -> f64;

/// (name, statement, metric, low-f value must exceed high-f value strictly?)
const CLAIMS: [(&str, &str, Metric, bool); 6] = [
    ("ltc_threshold", "LTC firing threshold is higher at low f", |s| s.z_tilde_l, true),
    ("stc_threshold", "STC separation threshold is weakly higher at low f", |s| s.z_tilde_s, false),
    ("ltc_tightness", "LTC market tightness is higher at low f", |s| s.tightness.ltc, true),
    ("stc_tenure", "mean STC tenure is lower at low f", |s| -s.mean_tenure.stc, true),
    ("ltc_share", "conditional LTC share is higher at low f", |s| s.ltc_conditional, true),
    ("formal_wage", "mean formal wage is higher at low f", |s| s.mean_wage.formal, true),
];

fn ordered(lo: f64, hi: f64, strict: bool) -> bool {
    if strict {
        lo > hi
    } else {
        lo >= hi - 1e-12
    }
}

/// Signs of the falling-firing-cost predictions, comparing the extreme
/// points of a sweep.
pub fn check_predictions(sweep: &SweepResult) -> Result<PredictionReport, PolicyError> {
    let solved: Vec<_> = sweep.solved().collect();
    if solved.len() < 2 {
        return Err(PolicyError::InsufficientPoints {
            need: 2,
            got: solved.len(),
        });
    }
    let first = &solved[0].0.params;
    for (p, _) in &solved[1..] {
        if let Some(field) = first_difference(first, &p.params, true, false) {
            return Err(PolicyError::ScenarioMismatch { field });
        }
    }
    let (lo_p, lo) = solved[0];
    let (hi_p, hi) = solved[solved.len() - 1];
    let testable = hi_p.firing_cost > lo_p.firing_cost;
    let claims = CLAIMS
        .iter()
        .map(|&(name, statement, metric, strict)| {
            let (a, b) = (metric(lo), metric(hi));
            let verdict = if testable {
                Verdict::of(ordered(a, b, strict))
            } else {
                Verdict::NotTestable
            };
            let monotone = testable
                && solved.windows(2).all(|w| {
                    w[1].0.firing_cost == w[0].0.firing_cost || ordered(metric(w[0].1), metric(w[1].1), false)
                });
            // report the stated quantity, not its negation
            let sign = if name == "stc_tenure" { -1.0 } else { 1.0 };
            ClaimCheck {
                name,
                statement,
                verdict,
                monotone,
                at_low_f: sign * a,
                at_high_f: sign * b,
            }
        })
        .collect();
    Ok(PredictionReport {
        low_f: lo_p.firing_cost,
        high_f: hi_p.firing_cost,
        claims,
    })
}

/// One outcome's steady-state change and whether its sign matches the
/// empirical direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectCheck {
    pub outcome: &'static str,
    pub delta: f64,
    /// Expected sign (+1 / -1), `None` when no direction is asserted.
    pub expected_sign: Option<i8>,
    pub sign_matches: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReformEffects {
    pub pre: EquilibriumSummary,
    pub post: EquilibriumSummary,
    pub effects: Vec<EffectCheck>,
}

impl ReformEffects {
    pub fn get(&self, outcome: &str) -> Option<&EffectCheck> {
        self.effects.iter().find(|e| e.outcome == outcome)
    }
}

fn stc_tenure_unconditional(s: &EquilibriumSummary) -> f64 {
    if s.stc_share > 0.0 {
        s.stc_share * s.mean_tenure.stc
    } else {
        0.0
    }
}

/// Steady-state comparison of the two arms of a reform scenario.
pub fn reform_effects(scenario: &ReformScenario) -> Result<ReformEffects, PolicyError> {
    let (pre, post) = rayon::join(|| summary_of(&scenario.pre), || summary_of(&scenario.post));
    Ok(effects_between(pre?, post?))
}

/// Steady-state changes between two already summarized equilibria.
pub fn effects_between(pre: EquilibriumSummary, post: EquilibriumSummary) -> ReformEffects {
    let rows: [(&'static str, f64, f64, Option<i8>); 8] = [
        ("formal_share", pre.formal_share, post.formal_share, Some(1)),
        ("informal_share", pre.informal_share, post.informal_share, Some(-1)),
        ("employment", pre.employment, post.employment, None),
        ("ltc_conditional", pre.ltc_conditional, post.ltc_conditional, Some(1)),
        ("stc_tenure_unconditional", stc_tenure_unconditional(&pre), stc_tenure_unconditional(&post), Some(-1)),
        ("stc_tenure", pre.mean_tenure.stc, post.mean_tenure.stc, None),
        ("ltc_tenure", pre.mean_tenure.ltc, post.mean_tenure.ltc, None),
        ("formal_wage", pre.mean_wage.formal, post.mean_wage.formal, Some(1)),
    ];
    let effects = rows
        .iter()
        .map(|&(outcome, a, b, expected_sign)| {
            let delta = b - a;
            let delta = if delta.is_nan() { 0.0 } else { delta };
            EffectCheck {
                outcome,
                delta,
                expected_sign,
                sign_matches: expected_sign.map(|s| delta * s as f64 > 0.0),
            }
        })
        .collect();
    ReformEffects { pre, post, effects }
}

/// Equilibrium and flow structure with the STC state split by renewal count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapMechanics {
    pub cap: u32,
    pub transition: TransitionMatrix,
    pub summary: EquilibriumSummary,
    /// Stationary STC mass by counter state (index 0 = first contract period).
    pub stc_by_counter: Vec<f64>,
    /// Share of STC mass converted to LTC per period at the cap.
    pub forced_conversion_rate: f64,
    /// Expected number of periods a new STC contract spends in STC.
    pub expected_stc_spell: f64,
}

/// Expected periods in STC for a fresh STC hire.
pub fn expected_stc_spell(eq: &EquilibriumSolution) -> f64 {
    let chain = AugmentedChain::new(eq);
    let mut cohort = crate::flows::StateDistribution::zeros(chain.nodes(), chain.counters());
    let inflow = chain.hire_inflow(crate::model::Market::Stc);
    let total: f64 = inflow.iter().sum();
    if total <= 0.0 {
        // nobody is hired into STC; follow a unit mass of fresh draws instead
        cohort.stc[0].copy_from_slice(eq.grid.weights());
    } else {
        for (c, x) in cohort.stc[0].iter_mut().zip(&inflow) {
            *c = x / total;
        }
    }
    let mut spell = 0.0;
    for _ in 0..100_000 {
        let mass = cohort.stc_total();
        spell += mass;
        if mass < 1e-13 {
            break;
        }
        let mut next = chain.step_within(&cohort);
        next.ltc.iter_mut().for_each(|x| *x = 0.0);
        next.informal.iter_mut().for_each(|x| *x = 0.0);
        cohort = next;
    }
    spell
}

pub fn stc_cap_mechanics(params: &ModelParams) -> Result<CapMechanics, PolicyError> {
    let cap = match params.stc_renewal_cap {
        RenewalCap::Finite(k) => k,
        RenewalCap::Unbounded => return Err(PolicyError::UnboundedCap),
    };
    check_cap(params)?;
    let (eq, fa) = solve_and_summarize(params)?;
    let summary = summarize_with(&eq, &fa);
    let stc_by_counter: Vec<f64> = fa.distribution.stc.iter().map(|row| row.iter().sum()).collect();
    let last = stc_by_counter.len() - 1;
    let at_cap = stc_by_counter[last];
    let forced_conversion_rate = if at_cap > 0.0 {
        let chain = AugmentedChain::new(&eq);
        let mut probe = crate::flows::StateDistribution::zeros(chain.nodes(), chain.counters());
        probe.stc[last].copy_from_slice(&fa.distribution.stc[last]);
        let (next, _) = chain.step(&probe);
        next.ltc.iter().sum::<f64>() / at_cap
    } else {
        0.0
    };
    Ok(CapMechanics {
        cap,
        transition: fa.transition,
        summary,
        stc_by_counter,
        forced_conversion_rate,
        expected_stc_spell: expected_stc_spell(&eq),
    })
}
