use serde::{Deserialize, Serialize};

use super::entry::{expected_profit, free_entry_tightness, wage_schedule, ExpectedProfits, WageSchedule};
use super::iterate::{apply_operator, solve_worker_values_from, InnerOptions};
use super::rules::{DecisionRules, SearchAllocation, Thresholds, ValueFunctions};
use crate::error::SolveError;
use crate::model::{
    build_grid, fill_prob, Market, ModelParams, ProductivityGrid, RenewalCap, Threshold, Tightness,
    MAX_FINITE_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOptions {
    pub inner: InnerOptions,
    pub tolerance: f64,
    pub damping: f64,
    pub max_outer: usize,
    /// Outer iterations without a new best tightness change before giving up.
    pub stall_window: usize,
    pub initial_tightness: Tightness,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            inner: InnerOptions {
                history: 0,
                ..InnerOptions::default()
            },
            tolerance: 1e-8,
            damping: 0.5,
            max_outer: 10_000,
            stall_window: 500,
            initial_tightness: Tightness::uniform(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Sup-norm change of one more Bellman pass at the reported values.
    pub bellman_residual: f64,
    /// `|c - q(theta_j) Pi_j|` for active markets, 0 for inactive ones.
    pub free_entry_residuals: [f64; 3],
    /// `|V_j(z~_j) - target_j|` at interior thresholds (S, L, INF).
    pub threshold_residuals: [f64; 3],
    /// Largest tightness change per outer iteration.
    pub tightness_trace: Vec<f64>,
}

/// Converged stationary equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub params: ModelParams,
    pub grid: ProductivityGrid,
    pub values: ValueFunctions,
    pub rules: DecisionRules,
    pub tightness: Tightness,
    pub wages: WageSchedule,
    pub profits: ExpectedProfits,
    pub diagnostics: Diagnostics,
}

impl EquilibriumSolution {
    pub fn thresholds(&self) -> &Thresholds {
        &self.rules.thresholds
    }

    pub fn search(&self) -> &SearchAllocation {
        &self.rules.search
    }

    pub fn find_prob(&self, m: Market) -> f64 {
        crate::model::find_prob(
            self.tightness.get(m),
            self.params.matching_efficiency,
            self.params.matching_elasticity,
        )
    }
}

pub(crate) fn check_cap(params: &ModelParams) -> Result<(), SolveError> {
    if let RenewalCap::Finite(k) = params.stc_renewal_cap {
        if k > MAX_FINITE_CAP {
            return Err(SolveError::CapTooLarge {
                cap: k,
                limit: MAX_FINITE_CAP,
            });
        }
    }
    Ok(())
}

fn profits_for(rules: &DecisionRules, wages: &WageSchedule, params: &ModelParams, grid: &ProductivityGrid) -> ExpectedProfits {
    let t = &rules.thresholds;
    ExpectedProfits {
        stc: expected_profit(Market::Stc, t, wages, params, grid),
        ltc: expected_profit(Market::Ltc, t, wages, params, grid),
        informal: expected_profit(Market::Informal, t, wages, params, grid),
    }
}

pub fn solve_equilibrium(params: &ModelParams) -> Result<EquilibriumSolution, SolveError> {
    solve_equilibrium_with(params, &EquilibriumOptions::default())
}

pub fn solve_equilibrium_with(
    params: &ModelParams,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumSolution, SolveError> {
    params.check()?;
    check_cap(params)?;
    let grid = build_grid(&params.productivity_spec, params.grid_size)?;
    let wages = wage_schedule(params, &grid);
    let c = params.vacancy_cost;
    let (chi, eta) = (params.matching_efficiency, params.matching_elasticity);

    let mut theta = opts.initial_tightness;
    let mut values = ValueFunctions::initial(params, &grid, params.stc_renewal_cap.counter_states());
    let mut inner_total = 0;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;

    for outer in 1..=opts.max_outer {
        let (v, rules, report) = solve_worker_values_from(values, &theta, params, &grid, &opts.inner)?;
        values = v;
        inner_total += report.iterations;
        let profits = profits_for(&rules, &wages, params, &grid);

        let mut target = Tightness::default();
        let mut fe = [0.0; 3];
        for m in Market::ALL {
            let pi = profits.get(m);
            target.set(m, free_entry_tightness(|_| pi, params)?);
            let th = theta.get(m);
            if th > 0.0 {
                fe[m.index()] = (c - fill_prob(th, chi, eta) * pi).abs();
            }
        }
        let change = Market::ALL
            .iter()
            .map(|&m| (target.get(m) - theta.get(m)).abs())
            .fold(0.0, f64::max);
        trace.push(change);

        if change < opts.tolerance {
            // damping only approaches a shut market geometrically
            let mut snapped = false;
            for m in Market::ALL {
                if target.get(m) == 0.0 && theta.get(m) > 0.0 {
                    theta.set(m, 0.0);
                    snapped = true;
                }
            }
            if snapped {
                continue;
            }
        }
        if change < opts.tolerance && fe.iter().all(|r| *r < opts.tolerance) {
            let diagnostics = Diagnostics {
                outer_iterations: outer,
                inner_iterations: inner_total,
                bellman_residual: bellman_residual(&values, &theta, params, &grid),
                free_entry_residuals: fe,
                threshold_residuals: threshold_residuals(&values, &rules.thresholds, params, &grid),
                tightness_trace: trace,
            };
            return Ok(EquilibriumSolution {
                params: params.clone(),
                grid,
                values,
                rules,
                tightness: theta,
                wages,
                profits,
                diagnostics,
            });
        }

        if change < best {
            best = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.stall_window {
                return Err(SolveError::OscillationDetected {
                    window: opts.stall_window,
                    residual: change,
                });
            }
        }
        for m in Market::ALL {
            let th = (1.0 - opts.damping) * target.get(m) + opts.damping * theta.get(m);
            theta.set(m, th);
        }
    }
    Err(SolveError::MaxIterations {
        stage: "tightness",
        iterations: opts.max_outer,
        residual: trace.last().copied().unwrap_or(f64::NAN),
    })
}

/// Sup-norm change from one further Bellman pass.
pub fn bellman_residual(
    values: &ValueFunctions,
    tightness: &Tightness,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> f64 {
    let rules = DecisionRules::derive(values, tightness, params, grid);
    let mut next = values.clone();
    apply_operator(values, tightness, &rules, params, grid, &mut next);
    next.sup_distance(values)
}

/// Indifference-condition residuals at interior thresholds.
pub fn threshold_residuals(
    values: &ValueFunctions,
    t: &Thresholds,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> [f64; 3] {
    let r = |th: Threshold, v: &[f64], target: f64| match th {
        Threshold::Interior(z) => (grid.interpolate(v, z) - target).abs(),
        _ => 0.0,
    };
    [
        r(t.z_tilde_s, &values.v_s[0], values.u),
        r(t.z_tilde_l, &values.v_l, values.u - params.firing_cost),
        r(t.z_tilde_inf, &values.v_inf, values.u),
    ]
}
