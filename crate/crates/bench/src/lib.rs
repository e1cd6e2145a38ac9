//! Fixtures shared by the benchmarks in `benches/`.

use segmkt::microsim::{simulate_panel, MicrosimConfig, SurveyPanel};
use segmkt::{solve_equilibrium, EquilibriumSolution, ModelParams};

pub fn baseline() -> EquilibriumSolution {
    solve_equilibrium(&ModelParams::baseline()).expect("baseline solves")
}

/// Placebo panel: both economies stay at `eq`.
pub fn panel(eq: &EquilibriumSolution, n_workers: usize) -> SurveyPanel {
    let cfg = MicrosimConfig {
        n_workers,
        seed: 1,
        scenario: "bench".into(),
        ..MicrosimConfig::default()
    };
    simulate_panel(eq, eq, eq, &cfg).expect("panel simulates")
}
