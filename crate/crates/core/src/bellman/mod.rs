//! Value functions, decision thresholds, profits and free-entry tightness.

mod entry;
mod equilibrium;
mod iterate;
mod rules;

pub use entry::{
    bargained_wage, expected_profit, free_entry_tightness, wage_schedule, ExpectedProfits, WageSchedule,
    THETA_MAX,
};
pub use equilibrium::{
    bellman_residual, solve_equilibrium, solve_equilibrium_with, threshold_residuals, Diagnostics,
    EquilibriumOptions, EquilibriumSolution,
};
pub(crate) use equilibrium::check_cap;
pub use iterate::{
    solve_worker_values, solve_worker_values_from, worker_value_update, Acceleration, InnerOptions,
    InnerReport,
};
pub use rules::{DecisionRules, SearchAllocation, Thresholds, ValueFunctions};

use crate::model::{crossing, ModelParams, ProductivityGrid, Threshold};

/// The three indifference points implied by a set of values.
pub fn solve_thresholds(
    values: &ValueFunctions,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> Result<(Threshold, Threshold, Threshold), crate::error::SolveError> {
    values.check_monotone(1e-9)?;
    let u = values.u;
    Ok((
        crossing(grid, &values.v_s[0], u),
        crossing(grid, &values.v_l, u - params.firing_cost),
        crossing(grid, &values.v_inf, u),
    ))
}
