//! Stationary stocks, aggregate transitions, tenure and wage summaries.

mod chain;

pub use chain::{AugmentedChain, LaborState, StateDistribution};

use serde::{Deserialize, Serialize};

use crate::bellman::EquilibriumSolution;
use crate::error::SolveError;
use crate::model::{Tightness, Threshold};
use chain::Scope;

/// Tenure horizon in months; longer spells are reported as 12.
pub const TENURE_CAP: usize = 12;

const CHAIN_TOL: f64 = 1e-13;
const CHAIN_MAX_ITER: usize = 1_000_000;

/// Row-stochastic matrix over unemployed, informal, STC, LTC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix(pub [[f64; 4]; 4]);

impl TransitionMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Self {
        Self(rows)
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self(m)
    }

    pub fn get(&self, from: LaborState, to: LaborState) -> f64 {
        self.0[from.index()][to.index()]
    }

    pub fn is_stochastic(&self, tol: f64) -> bool {
        self.0.iter().all(|row| {
            row.iter().all(|p| (-tol..=1.0 + tol).contains(p)) && (row.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }

    /// `x T`.
    pub fn left_apply(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, xi) in x.iter().enumerate() {
            for (o, t) in out.iter_mut().zip(&self.0[i]) {
                *o += xi * t;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryStocks {
    pub unemployed: f64,
    pub informal: f64,
    pub stc: f64,
    pub ltc: f64,
    /// False when power iteration did not settle and the Cesaro average of
    /// the iterates is reported instead.
    pub converged: bool,
}

impl StationaryStocks {
    fn from_array(x: [f64; 4], converged: bool) -> Self {
        Self {
            unemployed: x[0],
            informal: x[1],
            stc: x[2],
            ltc: x[3],
            converged,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.unemployed, self.informal, self.stc, self.ltc]
    }

    pub fn formal(&self) -> f64 {
        self.stc + self.ltc
    }

    pub fn employment(&self) -> f64 {
        1.0 - self.unemployed
    }
}

/// Left unit eigenvector of `t` by power iteration from the uniform vector.
pub fn stationary_stocks(t: &TransitionMatrix) -> StationaryStocks {
    stationary_stocks_with(t, 1e-12, 1_000_000)
}

pub fn stationary_stocks_with(t: &TransitionMatrix, tol: f64, max_iter: usize) -> StationaryStocks {
    let mut x = [0.25; 4];
    let mut cesaro = [0.0; 4];
    for it in 0..max_iter {
        let y = t.left_apply(&x);
        let change: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        for (c, v) in cesaro.iter_mut().zip(&y) {
            *c += (v - *c) / (it + 1) as f64;
        }
        x = y;
        if change < tol {
            let s: f64 = x.iter().sum();
            return StationaryStocks::from_array(x.map(|v| v / s), true);
        }
    }
    let s: f64 = cesaro.iter().sum();
    StationaryStocks::from_array(cesaro.map(|v| v / s), false)
}

/// Tenure-in-the-last-12-months distribution over months 0..=12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenureDistribution(pub Vec<f64>);

impl TenureDistribution {
    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Constant-hazard renewal form: with continuation probability `s`, a job
/// observed in a stationary stock has age `a` with probability
/// `(1 - s) s^(a-1)`; ages of 12 and above are pooled at 12.
pub fn renewal_tenure(s: f64) -> TenureDistribution {
    let mut p = vec![0.0; TENURE_CAP + 1];
    for (a, slot) in p.iter_mut().enumerate().take(TENURE_CAP).skip(1) {
        *slot = (1.0 - s) * s.powi(a as i32 - 1);
    }
    p[TENURE_CAP] = s.powi(TENURE_CAP as i32 - 1);
    TenureDistribution(p)
}

/// Everything derived from an equilibrium's stationary state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowAnalysis {
    pub distribution: StateDistribution,
    pub transition: TransitionMatrix,
    pub stocks: StationaryStocks,
    /// Job tenure by current state (informal, STC, LTC).
    pub tenure: [TenureDistribution; 3],
}

impl FlowAnalysis {
    pub fn new(eq: &EquilibriumSolution) -> Result<Self, SolveError> {
        let chain = AugmentedChain::new(eq);
        let distribution = chain.stationary(CHAIN_TOL, CHAIN_MAX_ITER)?;
        let transition = aggregate_matrix(&chain, &distribution, eq);
        let stocks = stationary_stocks(&transition);
        let tenure = cohort_tenure(&chain, &distribution);
        Ok(Self {
            distribution,
            transition,
            stocks,
            tenure,
        })
    }

    pub fn tenure_for(&self, state: LaborState) -> Option<&TenureDistribution> {
        match state {
            LaborState::Informal => Some(&self.tenure[0]),
            LaborState::Stc => Some(&self.tenure[1]),
            LaborState::Ltc => Some(&self.tenure[2]),
            LaborState::Unemployed => None,
        }
    }
}

fn aggregate_matrix(chain: &AugmentedChain<'_>, dist: &StateDistribution, eq: &EquilibriumSolution) -> TransitionMatrix {
    let (_, flows) = chain.step(dist);
    let stock = dist.aggregate();
    let mut rows = [[0.0; 4]; 4];
    for s in LaborState::ALL {
        let i = s.index();
        let (row_flows, mass) = if stock[i] > 1e-300 {
            (flows[i], stock[i])
        } else {
            // empty state: probe with a unit mass spread as fresh draws
            let mut probe = StateDistribution::zeros(chain.nodes(), chain.counters());
            let w = eq.grid.weights();
            match s {
                LaborState::Unemployed => probe.unemployed = 1.0,
                LaborState::Informal => probe.informal.copy_from_slice(w),
                LaborState::Stc => probe.stc[0].copy_from_slice(w),
                LaborState::Ltc => probe.ltc.copy_from_slice(w),
            }
            (chain.step(&probe).1[i], 1.0)
        };
        for j in 0..4 {
            rows[i][j] = (row_flows[j] / mass).clamp(0.0, 1.0);
        }
        let sum: f64 = rows[i].iter().sum();
        rows[i].iter_mut().for_each(|p| *p /= sum);
    }
    TransitionMatrix(rows)
}

/// Exact stationary tenure: age the cohorts of new jobs through the
/// within-job transitions; whatever stock is not accounted for by ages
/// 1..11 is 12 months or older.
fn cohort_tenure(chain: &AugmentedChain<'_>, dist: &StateDistribution) -> [TenureDistribution; 3] {
    let stock = dist.aggregate();
    let mut by_age = [[0.0; TENURE_CAP + 1]; 3];
    let mut cohort = chain.new_jobs(dist);
    for age in 1..TENURE_CAP {
        let agg = cohort.aggregate();
        for s in 0..3 {
            by_age[s][age] = agg[s + 1];
        }
        cohort = chain.step_scoped(&cohort, Scope::WithinJob).0;
    }
    std::array::from_fn(|s| {
        let total = stock[s + 1];
        let mut p = vec![0.0; TENURE_CAP + 1];
        if total <= 0.0 {
            return TenureDistribution(p);
        }
        let mut acc = 0.0;
        for age in 1..TENURE_CAP {
            p[age] = by_age[s][age] / total;
            acc += p[age];
        }
        p[TENURE_CAP] = (1.0 - acc).max(0.0);
        TenureDistribution(p)
    })
}

pub fn build_transition_matrix(eq: &EquilibriumSolution) -> Result<TransitionMatrix, SolveError> {
    Ok(FlowAnalysis::new(eq)?.transition)
}

pub fn tenure_distribution(eq: &EquilibriumSolution, state: LaborState) -> Result<TenureDistribution, SolveError> {
    let fa = FlowAnalysis::new(eq)?;
    Ok(fa
        .tenure_for(state)
        .cloned()
        .unwrap_or_else(|| TenureDistribution(vec![0.0; TENURE_CAP + 1])))
}

/// Per-sector means, `NaN` where the sector is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BySector {
    pub informal: f64,
    pub stc: f64,
    pub ltc: f64,
    pub formal: f64,
}

/// Table-2 style description of a stationary equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSummary {
    pub firing_cost: f64,
    pub z_tilde_s: f64,
    pub z_tilde_l: f64,
    pub z_tilde_inf: f64,
    pub upgrade_cutoff: f64,
    pub tightness: Tightness,
    pub unemployment: f64,
    pub employment: f64,
    pub formal_share: f64,
    pub informal_share: f64,
    pub stc_share: f64,
    pub ltc_unconditional: f64,
    pub ltc_conditional: f64,
    pub mean_tenure: BySector,
    pub mean_wage: BySector,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

pub fn summarize(eq: &EquilibriumSolution) -> Result<EquilibriumSummary, SolveError> {
    let fa = FlowAnalysis::new(eq)?;
    Ok(summarize_with(eq, &fa))
}

pub fn summarize_with(eq: &EquilibriumSolution, fa: &FlowAnalysis) -> EquilibriumSummary {
    let s = &fa.stocks;
    let d = &fa.distribution;
    let formal = s.formal();
    let wf = &eq.wages.formal;
    let wi = &eq.wages.informal;
    let dot = |m: &[f64], w: &[f64]| m.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let stc_nodes = d.stc_by_node();
    let stc_mass: f64 = stc_nodes.iter().sum();
    let ltc_mass: f64 = d.ltc.iter().sum();
    let inf_mass: f64 = d.informal.iter().sum();
    let stc_wage = dot(&stc_nodes, wf);
    let ltc_wage = dot(&d.ltc, wf);
    let mean_wage = BySector {
        informal: ratio(dot(&d.informal, wi), inf_mass),
        stc: ratio(stc_wage, stc_mass),
        ltc: ratio(ltc_wage, ltc_mass),
        formal: ratio(stc_wage + ltc_wage, stc_mass + ltc_mass),
    };
    let [t_inf, t_stc, t_ltc] = [fa.tenure[0].mean(), fa.tenure[1].mean(), fa.tenure[2].mean()];
    let mean_tenure = BySector {
        informal: if inf_mass > 0.0 { t_inf } else { f64::NAN },
        stc: if stc_mass > 0.0 { t_stc } else { f64::NAN },
        ltc: if ltc_mass > 0.0 { t_ltc } else { f64::NAN },
        formal: ratio(t_stc * stc_mass + t_ltc * ltc_mass, stc_mass + ltc_mass),
    };
    let th = eq.thresholds();
    let num = |t: Threshold| t.clamp_to(&eq.grid);
    let ltc_conditional = ratio(s.ltc, formal);
    EquilibriumSummary {
        firing_cost: eq.params.firing_cost,
        z_tilde_s: num(th.z_tilde_s),
        z_tilde_l: num(th.z_tilde_l),
        z_tilde_inf: num(th.z_tilde_inf),
        upgrade_cutoff: num(th.upgrade),
        tightness: eq.tightness,
        unemployment: s.unemployed,
        employment: s.employment(),
        formal_share: formal,
        informal_share: s.informal,
        stc_share: s.stc,
        ltc_unconditional: s.ltc,
        ltc_conditional,
        mean_tenure,
        mean_wage,
    }
}
