use serde::{Deserialize, Serialize};

use super::rules::{informal_continuation, DecisionRules, ValueFunctions};
use crate::error::SolveError;
use crate::model::{find_prob, match_output, Market, ModelParams, ProductivityGrid, Sector, Tightness};

/// One synchronous application of the Bellman operator with the decisions
/// held fixed. Linear in the values for given rules.
pub fn worker_value_update(
    values: &ValueFunctions,
    tightness: &Tightness,
    rules: &DecisionRules,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> ValueFunctions {
    let mut out = values.clone();
    apply_operator(values, tightness, rules, params, grid, &mut out);
    out
}

fn continuation_into(cont: &mut [f64], grid: &ProductivityGrid, redraw: f64) {
    let mean = grid.expectation(cont);
    for c in cont.iter_mut() {
        *c = (1.0 - redraw) * *c + redraw * mean;
    }
}

pub(crate) fn apply_operator(
    values: &ValueFunctions,
    tightness: &Tightness,
    rules: &DecisionRules,
    params: &ModelParams,
    grid: &ProductivityGrid,
    out: &mut ValueFunctions,
) {
    let beta = params.discount_factor();
    let d = params.redraw_prob;
    let u = values.u;
    let f = params.firing_cost;
    let z = grid.nodes();
    let a = params.informal_penalty;

    for k in 0..values.counters() {
        let next = &values.v_s[rules.next_counter(k)];
        let hat = &mut out.v_hat_s[k];
        for i in 0..z.len() {
            hat[i] = rules.stc_separate[k][i] * u
                + rules.stc_renew[k][i] * next[i]
                + rules.stc_upgrade[k][i] * values.v_l[i];
        }
        continuation_into(hat, grid, d);
        for ((v, h), z) in out.v_s[k].iter_mut().zip(hat.iter()).zip(z) {
            *v = match_output(*z, Sector::Formal, a) + beta * h;
        }
    }

    for i in 0..z.len() {
        let s = rules.ltc_keep[i];
        out.v_hat_l[i] = (1.0 - s) * (u - f) + s * values.v_l[i];
    }
    continuation_into(&mut out.v_hat_l, grid, d);

    informal_continuation(values, &rules.inf_keep, grid, d, &mut out.v_hat_inf);
    let lambda = params.otj_search_rate;
    if lambda > 0.0 {
        let split = rules.search.formal_split();
        let targets: [(&[f64], Market); 2] = [(&values.v_s[0], Market::Stc), (&values.v_l, Market::Ltc)];
        let w = grid.weights();
        for (slot, (target, m)) in targets.iter().enumerate() {
            let p = find_prob(tightness.get(*m), params.matching_efficiency, params.matching_elasticity);
            let rate = lambda * split[slot] * p;
            if rate == 0.0 {
                continue;
            }
            // suffix sums of w and w*V over the target vector
            let n = target.len();
            let mut sw = vec![0.0; n + 1];
            let mut swv = vec![0.0; n + 1];
            for i in (0..n).rev() {
                sw[i] = sw[i + 1] + w[i];
                swv[i] = swv[i + 1] + w[i] * target[i];
            }
            for j in 0..n {
                let first = rules.otj_first[slot][j];
                let r = out.v_hat_inf[j];
                let gain = swv[first] - r * sw[first];
                out.v_hat_inf[j] += rate * gain;
            }
        }
    }

    for i in 0..z.len() {
        out.v_l[i] = match_output(z[i], Sector::Formal, a) + beta * out.v_hat_l[i];
        out.v_inf[i] = match_output(z[i], Sector::Informal, a) + beta * out.v_hat_inf[i];
    }

    let targets: [&[f64]; 3] = [&values.v_s[0], &values.v_l, &values.v_inf];
    let mut u_hat = 0.0;
    for m in Market::ALL {
        let pi = rules.search.prob(m);
        if pi == 0.0 {
            continue;
        }
        let p = find_prob(tightness.get(m), params.matching_efficiency, params.matching_elasticity);
        let gain: f64 = grid
            .weights()
            .iter()
            .zip(&rules.hire[m.index()])
            .zip(targets[m.index()])
            .map(|((w, s), x)| w * s * (x - u))
            .sum();
        u_hat += pi * (u + p * params.bargaining_weight * gain);
    }
    out.u_hat = u_hat;
    out.u = params.unemployment_flow + beta * u_hat;
}

/// Iteration scheme for the inner fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    /// Plain successive approximation.
    None,
    /// Successive approximation with a common shift to the midpoint of the
    /// error bounds after each step; uses that the operator commutes with
    /// adding a constant to every value (up to the factor beta).
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub acceleration: Acceleration,
    /// Number of trailing sup-norm changes kept in the report.
    pub history: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100_000,
            acceleration: Acceleration::Bounds,
            history: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub iterations: usize,
    /// Convergence measure at exit: sup-norm change (plain) or the bound
    /// on the distance to the fixed point (accelerated).
    pub residual: f64,
    /// Trailing sup-norm changes, oldest first.
    pub history: Vec<f64>,
}

/// Spread of `new - old` over every value, as (min, max, sup |.|).
fn diff_bounds(new: &ValueFunctions, old: &ValueFunctions) -> (f64, f64, f64) {
    let mut lo = new.u - old.u;
    let mut hi = lo;
    let mut upd = |a: &[f64], b: &[f64]| {
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    };
    for (a, b) in new.v_s.iter().zip(&old.v_s) {
        upd(a, b);
    }
    upd(&new.v_l, &old.v_l);
    upd(&new.v_inf, &old.v_inf);
    (lo, hi, lo.abs().max(hi.abs()))
}

fn shift(values: &mut ValueFunctions, c: f64) {
    values.u += c;
    values.u_hat += c;
    for row in values.v_s.iter_mut().chain(values.v_hat_s.iter_mut()) {
        row.iter_mut().for_each(|v| *v += c);
    }
    for v in values
        .v_l
        .iter_mut()
        .chain(values.v_hat_l.iter_mut())
        .chain(values.v_inf.iter_mut())
        .chain(values.v_hat_inf.iter_mut())
    {
        *v += c;
    }
}

/// Solves the worker/match system at fixed tightness, re-deriving the
/// decision rules after every pass.
pub fn solve_worker_values(
    tightness: &Tightness,
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> Result<(ValueFunctions, DecisionRules), SolveError> {
    let start = ValueFunctions::initial(params, grid, params.stc_renewal_cap.counter_states());
    solve_worker_values_from(start, tightness, params, grid, &InnerOptions::default())
        .map(|(v, r, _)| (v, r))
}

/// As [`solve_worker_values`], from a given starting point and with explicit options.
pub fn solve_worker_values_from(
    start: ValueFunctions,
    tightness: &Tightness,
    params: &ModelParams,
    grid: &ProductivityGrid,
    opts: &InnerOptions,
) -> Result<(ValueFunctions, DecisionRules, InnerReport), SolveError> {
    let beta = params.discount_factor();
    let mut cur = start;
    let mut next = cur.clone();
    let mut history = std::collections::VecDeque::with_capacity(opts.history + 1);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let rules = DecisionRules::derive(&cur, tightness, params, grid);
        apply_operator(&cur, tightness, &rules, params, grid, &mut next);
        if !next.is_finite() {
            return Err(SolveError::Divergence { stage: "worker values" });
        }
        let (lo, hi, sup) = diff_bounds(&next, &cur);
        if opts.history > 0 {
            if history.len() == opts.history {
                history.pop_front();
            }
            history.push_back(sup);
        }
        let done = match opts.acceleration {
            Acceleration::None => {
                residual = sup;
                sup < opts.tolerance
            }
            Acceleration::Bounds => {
                let k = beta / (1.0 - beta);
                shift(&mut next, 0.5 * (lo + hi) * k);
                residual = 0.5 * (hi - lo) * k;
                residual < opts.tolerance
            }
        };
        std::mem::swap(&mut cur, &mut next);
        if done {
            let rules = DecisionRules::derive(&cur, tightness, params, grid);
            let report = InnerReport {
                iterations: it,
                residual,
                history: history.into_iter().collect(),
            };
            return Ok((cur, rules, report));
        }
    }
    Err(SolveError::MaxIterations {
        stage: "worker values",
        iterations: opts.max_iterations,
        residual,
    })
}
