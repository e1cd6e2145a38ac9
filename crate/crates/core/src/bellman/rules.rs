use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::model::{crossing, find_prob, Market, ModelParams, ProductivityGrid, Threshold, Tightness};

/// Joint match values and the unemployed's value, at the production stage
/// (`u`, `v_*`) and the preceding search/reassessment stage (`*_hat`).
///
/// STC vectors carry one row per renewal-counter state; row 0 is a fresh
/// contract. Without a renewal cap there is a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctions {
    pub u: f64,
    pub u_hat: f64,
    pub v_s: Vec<Vec<f64>>,
    pub v_l: Vec<f64>,
    pub v_inf: Vec<f64>,
    pub v_hat_s: Vec<Vec<f64>>,
    pub v_hat_l: Vec<f64>,
    pub v_hat_inf: Vec<f64>,
}

impl ValueFunctions {
    /// Autarky starting point: every state earns its flow forever.
    pub fn initial(params: &ModelParams, grid: &ProductivityGrid, counters: usize) -> Self {
        let beta = params.discount_factor();
        let scale = 1.0 / (1.0 - beta);
        let z = grid.nodes();
        let v_f: Vec<f64> = z.iter().map(|z| z * scale).collect();
        let v_i: Vec<f64> = z.iter().map(|z| params.informal_penalty * z * scale).collect();
        let u = params.unemployment_flow * scale;
        Self {
            u,
            u_hat: u,
            v_s: vec![v_f.clone(); counters],
            v_l: v_f.clone(),
            v_inf: v_i.clone(),
            v_hat_s: vec![v_f.clone(); counters],
            v_hat_l: v_f,
            v_hat_inf: v_i,
        }
    }

    pub fn counters(&self) -> usize {
        self.v_s.len()
    }

    /// Value of a freshly hired STC match.
    pub fn v_s_fresh(&self) -> &[f64] {
        &self.v_s[0]
    }

    /// Largest absolute difference over every stored value.
    pub fn sup_distance(&self, other: &ValueFunctions) -> f64 {
        let mut d = (self.u - other.u).abs();
        let mut upd = |a: &[f64], b: &[f64]| {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        };
        for (a, b) in self.v_s.iter().zip(&other.v_s) {
            upd(a, b);
        }
        upd(&self.v_l, &other.v_l);
        upd(&self.v_inf, &other.v_inf);
        d
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.v_s.iter().flatten().all(|v| v.is_finite())
            && self.v_l.iter().all(|v| v.is_finite())
            && self.v_inf.iter().all(|v| v.is_finite())
    }

    /// Errors with `NonMonotoneValues` if a vector drops by more than `tol`.
    pub fn check_monotone(&self, tol: f64) -> Result<(), SolveError> {
        let check = |which: &'static str, v: &[f64]| -> Result<(), SolveError> {
            for (i, p) in v.windows(2).enumerate() {
                let drop = p[0] - p[1];
                if drop > tol {
                    return Err(SolveError::NonMonotoneValues {
                        which,
                        node: i + 1,
                        drop,
                    });
                }
            }
            Ok(())
        };
        for v in &self.v_s {
            check("v_s", v)?;
        }
        check("v_l", &self.v_l)?;
        check("v_inf", &self.v_inf)
    }
}

/// Reported cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Fresh STC indifference point, `V_S(z) = U`.
    pub z_tilde_s: Threshold,
    /// LTC firing point, `V_L(z) = U - f`.
    pub z_tilde_l: Threshold,
    /// Informal separation point, `V_INF(z) = U`.
    pub z_tilde_inf: Threshold,
    /// Lowest productivity from which every fresh STC is converted to LTC.
    pub upgrade: Threshold,
    /// LTC hiring cutoff, `V_L(z) = U`: no severance is owed before a match exists.
    pub ltc_hire: Threshold,
}

impl Thresholds {
    /// Renewal band ordering: separation sits weakly below the upgrade cutoff.
    pub fn band_ordered(&self) -> bool {
        self.z_tilde_s.position() <= self.upgrade.position()
    }
}

/// How the unemployed spread over the three markets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchAllocation {
    /// Probability of searching in STC, LTC, informal.
    pub probabilities: [f64; 3],
    /// Expected value of a search period in each market.
    pub hire_values: [f64; 3],
    /// Market with the highest hire value (ties: LTC, then STC, then informal).
    pub chosen: Market,
}

impl SearchAllocation {
    pub fn prob(&self, m: Market) -> f64 {
        self.probabilities[m.index()]
    }

    /// Split of on-the-job search across the two formal markets.
    pub fn formal_split(&self) -> [f64; 2] {
        let (s, l) = (self.probabilities[0], self.probabilities[1]);
        if s + l > 0.0 {
            [s / (s + l), l / (s + l)]
        } else if self.hire_values[0] > self.hire_values[1] {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    }

    fn from_values(v: [f64; 3], dispersion: f64) -> Self {
        // tie-break order LTC > STC > INF
        let order = [Market::Ltc, Market::Stc, Market::Informal];
        let mut chosen = Market::Ltc;
        for m in order {
            if v[m.index()] > v[chosen.index()] {
                chosen = m;
            }
        }
        let mut probabilities = [0.0; 3];
        if dispersion > 0.0 {
            let top = v[chosen.index()];
            let e: Vec<f64> = v.iter().map(|x| ((x - top) / dispersion).exp()).collect();
            let total: f64 = e.iter().sum();
            for i in 0..3 {
                probabilities[i] = e[i] / total;
            }
        } else {
            probabilities[chosen.index()] = 1.0;
        }
        Self {
            probabilities,
            hire_values: v,
            chosen,
        }
    }
}

/// Complete policy implied by a set of values: per-node survival fractions
/// for every decision, market allocation, and on-the-job mobility cutoffs.
/// Fractions refer to the node's cell, so a threshold inside a cell splits it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRules {
    pub thresholds: Thresholds,
    /// Per counter state: share of the cell separating at reassessment.
    pub stc_separate: Vec<Vec<f64>>,
    /// Per counter state: share renewed as STC.
    pub stc_renew: Vec<Vec<f64>>,
    /// Per counter state: share converted to LTC.
    pub stc_upgrade: Vec<Vec<f64>>,
    pub stc_renewal_cutoffs: Vec<Threshold>,
    pub stc_upgrade_cutoffs: Vec<Threshold>,
    pub ltc_keep: Vec<f64>,
    pub inf_keep: Vec<f64>,
    /// Acceptance share of a fresh draw, per market.
    pub hire: [Vec<f64>; 3],
    pub search: SearchAllocation,
    /// For each informal node, the first STC / LTC node whose value beats
    /// staying; `len()` when no offer is taken.
    pub otj_first: [Vec<usize>; 2],
    /// Whether the last counter state forbids renewal (finite cap).
    pub capped: bool,
}

impl DecisionRules {
    pub fn counters(&self) -> usize {
        self.stc_renew.len()
    }

    /// Counter state reached after an STC renewal from state `k`.
    pub fn next_counter(&self, k: usize) -> usize {
        if self.capped {
            (k + 1).min(self.counters() - 1)
        } else {
            0
        }
    }
}

/// Lowest z from which `v_l >= max(next, u)` holds at every node above.
fn upgrade_cutoff(grid: &ProductivityGrid, v_l: &[f64], next: &[f64], u: f64) -> Threshold {
    let n = v_l.len();
    let diff = |i: usize| v_l[i] - next[i].max(u);
    let mut j = n;
    while j > 0 && diff(j - 1) >= 0.0 {
        j -= 1;
    }
    if j == n {
        return Threshold::AboveSupport;
    }
    if j == 0 {
        return Threshold::BelowSupport;
    }
    let z = grid.nodes();
    let (d0, d1) = (diff(j - 1), diff(j));
    let t = -d0 / (d1 - d0);
    Threshold::Interior(z[j - 1] + t * (z[j] - z[j - 1]))
}

/// Regular informal continuation, before any on-the-job offer.
pub(crate) fn informal_continuation(
    values: &ValueFunctions,
    inf_keep: &[f64],
    grid: &ProductivityGrid,
    redraw: f64,
    out: &mut [f64],
) {
    let u = values.u;
    for ((o, s), v) in out.iter_mut().zip(inf_keep).zip(&values.v_inf) {
        *o = (1.0 - s) * u + s * v;
    }
    let mean = grid.expectation(out);
    for o in out.iter_mut() {
        *o = (1.0 - redraw) * *o + redraw * mean;
    }
}

impl DecisionRules {
    /// Optimal decisions given values and tightness.
    pub fn derive(
        values: &ValueFunctions,
        tightness: &Tightness,
        params: &ModelParams,
        grid: &ProductivityGrid,
    ) -> Self {
        let n = grid.len();
        let nk = values.counters();
        let capped = !params.stc_renewal_cap.is_unbounded();
        let u = values.u;
        let f = params.firing_cost;

        let z_tilde_l = crossing(grid, &values.v_l, u - f);
        let ltc_hire = crossing(grid, &values.v_l, u);
        let z_tilde_inf = crossing(grid, &values.v_inf, u);
        let z_tilde_s = crossing(grid, &values.v_s[0], u);
        let ltc_keep = grid.survival(z_tilde_l);
        let inf_keep = grid.survival(z_tilde_inf);
        let hire_l = grid.survival(ltc_hire);
        let hire_s = grid.survival(z_tilde_s);

        let mut stc_separate = Vec::with_capacity(nk);
        let mut stc_renew = Vec::with_capacity(nk);
        let mut stc_upgrade = Vec::with_capacity(nk);
        let mut stc_renewal_cutoffs = Vec::with_capacity(nk);
        let mut stc_upgrade_cutoffs = Vec::with_capacity(nk);
        for k in 0..nk {
            if capped && k == nk - 1 {
                // cap reached: convert or let go
                stc_renewal_cutoffs.push(Threshold::AboveSupport);
                stc_upgrade_cutoffs.push(ltc_hire);
                stc_upgrade.push(hire_l.clone());
                stc_renew.push(vec![0.0; n]);
                stc_separate.push(hire_l.iter().map(|s| 1.0 - s).collect());
                continue;
            }
            let next = if capped { &values.v_s[k + 1] } else { &values.v_s[0] };
            let renew_cut = crossing(grid, next, u);
            let up_cut = upgrade_cutoff(grid, &values.v_l, next, u);
            let s_renew = grid.survival(renew_cut);
            let s_up = grid.survival(up_cut);
            let band: Vec<f64> = s_renew.iter().zip(&s_up).map(|(a, b)| (a - b).max(0.0)).collect();
            let sep: Vec<f64> = band.iter().zip(&s_up).map(|(b, a)| (1.0 - a - b).max(0.0)).collect();
            stc_renewal_cutoffs.push(renew_cut);
            stc_upgrade_cutoffs.push(up_cut);
            stc_upgrade.push(s_up);
            stc_renew.push(band);
            stc_separate.push(sep);
        }

        let thresholds = Thresholds {
            z_tilde_s,
            z_tilde_l,
            z_tilde_inf,
            upgrade: stc_upgrade_cutoffs[0],
            ltc_hire,
        };

        let hire = [hire_s, hire_l, inf_keep.clone()];
        let search = search_allocation(values, tightness, &hire, params, grid);

        let mut rules = Self {
            thresholds,
            stc_separate,
            stc_renew,
            stc_upgrade,
            stc_renewal_cutoffs,
            stc_upgrade_cutoffs,
            ltc_keep,
            inf_keep,
            hire,
            search,
            otj_first: [vec![n; n], vec![n; n]],
            capped,
        };
        if params.otj_search_rate > 0.0 {
            let mut reg = vec![0.0; n];
            informal_continuation(values, &rules.inf_keep, grid, params.redraw_prob, &mut reg);
            for (slot, target) in [(0usize, &values.v_s[0]), (1, &values.v_l)] {
                for (j, r) in reg.iter().enumerate() {
                    rules.otj_first[slot][j] = target.partition_point(|v| v <= r);
                }
            }
        }
        rules
    }
}

/// Hire values `U + p(theta_j) * phi * E[(V_j - U) 1{accept}]` and the
/// resulting allocation of the unemployed.
pub(crate) fn search_allocation(
    values: &ValueFunctions,
    tightness: &Tightness,
    hire: &[Vec<f64>; 3],
    params: &ModelParams,
    grid: &ProductivityGrid,
) -> SearchAllocation {
    let u = values.u;
    let targets: [&[f64]; 3] = [&values.v_s[0], &values.v_l, &values.v_inf];
    let mut v = [u; 3];
    for m in Market::ALL {
        let i = m.index();
        let p = find_prob(tightness.get(m), params.matching_efficiency, params.matching_elasticity);
        if p > 0.0 {
            let gain: f64 = grid
                .weights()
                .iter()
                .zip(&hire[i])
                .zip(targets[i])
                .map(|((w, s), x)| w * s * (x - u))
                .sum();
            v[i] = u + p * params.bargaining_weight * gain;
        }
    }
    SearchAllocation::from_values(v, params.search_dispersion)
}
