use serde::{Deserialize, Serialize};

use super::rules::Thresholds;
use crate::error::SolveError;
use crate::model::matching::fill_prob_kink;
use crate::model::{fill_prob, match_output, Market, ModelParams, ProductivityGrid, Sector};

/// Upper end of the tightness search.
pub const THETA_MAX: f64 = 1e6;

/// Bargained wage `b + phi * (g - b)`.
pub fn bargained_wage(output: f64, flow: f64, phi: f64) -> f64 {
    flow + phi * (output - flow)
}

/// Wage by node, for formal (STC and LTC) and informal matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WageSchedule {
    pub formal: Vec<f64>,
    pub informal: Vec<f64>,
}

impl WageSchedule {
    pub fn for_market(&self, m: Market) -> &[f64] {
        match m.sector() {
            Sector::Formal => &self.formal,
            Sector::Informal => &self.informal,
        }
    }
}

pub fn wage_schedule(params: &ModelParams, grid: &ProductivityGrid) -> WageSchedule {
    let b = params.unemployment_flow;
    let phi = params.bargaining_weight;
    let a = params.informal_penalty;
    let w = |s: Sector| -> Vec<f64> {
        grid.nodes()
            .iter()
            .map(|&z| bargained_wage(match_output(z, s, a), b, phi))
            .collect()
    };
    WageSchedule {
        formal: w(Sector::Formal),
        informal: w(Sector::Informal),
    }
}

/// Expected per-hire profit of a vacancy in market `m`: firm flow over
/// accepted draws, less expected severance for LTC.
pub fn expected_profit(
    m: Market,
    thresholds: &Thresholds,
    wages: &WageSchedule,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> f64 {
    let a = params.informal_penalty;
    let wage = wages.for_market(m);
    let flow: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(wage)
        .map(|(&z, w)| match_output(z, m.sector(), a) - w)
        .collect();
    match m {
        Market::Stc => grid.integrate_above(thresholds.z_tilde_s, &flow),
        Market::Informal => grid.integrate_above(thresholds.z_tilde_inf, &flow),
        Market::Ltc => {
            grid.integrate_above(thresholds.z_tilde_l, &flow)
                - params.firing_cost * grid.mass_below(thresholds.z_tilde_l)
        }
    }
}

/// Per-market expected profits, indexed like [`Market::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedProfits {
    pub stc: f64,
    pub ltc: f64,
    pub informal: f64,
}

impl ExpectedProfits {
    pub fn get(&self, m: Market) -> f64 {
        match m {
            Market::Stc => self.stc,
            Market::Ltc => self.ltc,
            Market::Informal => self.informal,
        }
    }
}

/// Free-entry tightness: zero if even a certain fill cannot cover the
/// vacancy cost, otherwise the root of `q(theta) * profit(theta) = c` by
/// bisection above the kink where `q` leaves 1.
pub fn free_entry_tightness<F>(profit_at: F, params: &ModelParams) -> Result<f64, SolveError>
where
    F: Fn(f64) -> f64,
{
    let (chi, eta, c) = (
        params.matching_efficiency,
        params.matching_elasticity,
        params.vacancy_cost,
    );
    let resid = |theta: f64| fill_prob(theta, chi, eta) * profit_at(theta) - c;
    let kink = fill_prob_kink(chi, eta);
    let r0 = resid(kink);
    if !r0.is_finite() {
        return Err(SolveError::Divergence { stage: "free entry" });
    }
    if r0 < 0.0 {
        return Ok(0.0);
    }
    if r0 == 0.0 {
        return Ok(kink);
    }
    let mut lo = kink;
    let mut hi = (2.0 * kink).max(1.0);
    while resid(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > THETA_MAX {
            if resid(THETA_MAX) > 0.0 {
                return Err(SolveError::BracketFailure { theta_max: THETA_MAX });
            }
            hi = THETA_MAX;
            break;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if resid(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, ProductivitySpec, Threshold};
    use approx::assert_relative_eq;

    fn params() -> ModelParams {
        ModelParams {
            vacancy_cost: 0.3,
            matching_efficiency: 0.45,
            matching_elasticity: 0.5,
            ..ModelParams::baseline()
        }
    }

    #[test]
    fn closed_form_inversion() {
        let theta = free_entry_tightness(|_| 1.0, &params()).unwrap();
        assert_relative_eq!(theta, 2.25, epsilon = 1e-10);
    }

    #[test]
    fn boundary_cases() {
        let p = params();
        assert_eq!(free_entry_tightness(|_| 0.0, &p).unwrap(), 0.0);
        let at_cost = free_entry_tightness(|_| p.vacancy_cost, &p).unwrap();
        assert_relative_eq!(at_cost, 0.45f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn unbounded_profit_fails_to_bracket() {
        let err = free_entry_tightness(|t| 1.0 + t, &params()).unwrap_err();
        assert!(matches!(err, SolveError::BracketFailure { .. }));
    }

    #[test]
    fn wages() {
        assert_relative_eq!(bargained_wage(1.0, 0.4, 0.5), 0.7);
        assert_relative_eq!(bargained_wage(1.3, 0.4, 1.0), 1.3);
        let g = build_grid(&ProductivitySpec::Lognormal { location: 0.0, scale: 0.4 }, 51).unwrap();
        let w = wage_schedule(&params(), &g);
        assert!(w.formal.windows(2).all(|p| p[1] >= p[0]));
        assert!(w.informal.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn full_surplus_wage_leaves_severance_only() {
        let g = build_grid(&ProductivitySpec::Uniform { lower: 0.0, upper: 1.0 }, 101).unwrap();
        let wages = WageSchedule {
            formal: g.nodes().to_vec(),
            informal: g.nodes().iter().map(|z| 0.7 * z).collect(),
        };
        let p = ModelParams {
            informal_penalty: 0.7,
            firing_cost: 2.0,
            ..params()
        };
        let t = Thresholds {
            z_tilde_s: Threshold::Interior(0.3),
            z_tilde_l: Threshold::Interior(0.4),
            z_tilde_inf: Threshold::Interior(0.2),
            upgrade: Threshold::AboveSupport,
            ltc_hire: Threshold::Interior(0.5),
        };
        assert_relative_eq!(expected_profit(Market::Stc, &t, &wages, &p, &g), 0.0);
        assert_relative_eq!(expected_profit(Market::Informal, &t, &wages, &p, &g), 0.0, epsilon = 1e-15);
        let l = expected_profit(Market::Ltc, &t, &wages, &p, &g);
        assert_relative_eq!(l, -2.0 * g.mass_below(t.z_tilde_l), epsilon = 1e-15);
    }

    #[test]
    fn uniform_integral() {
        let g = build_grid(&ProductivitySpec::Uniform { lower: 0.0, upper: 1.0 }, 501).unwrap();
        let wages = WageSchedule {
            formal: vec![0.0; 501],
            informal: vec![0.0; 501],
        };
        let t = Thresholds {
            z_tilde_s: Threshold::Interior(0.5),
            z_tilde_l: Threshold::Interior(0.5),
            z_tilde_inf: Threshold::Interior(0.5),
            upgrade: Threshold::AboveSupport,
            ltc_hire: Threshold::Interior(0.5),
        };
        let pi = expected_profit(Market::Stc, &t, &wages, &params(), &g);
        assert!((pi - 0.375).abs() < 1e-3, "{pi}");
    }
}
