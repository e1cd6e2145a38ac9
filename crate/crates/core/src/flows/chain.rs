use serde::{Deserialize, Serialize};

use crate::bellman::EquilibriumSolution;
use crate::error::SolveError;
use crate::model::Market;

/// Aggregate labor-market states, in transition-matrix order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaborState {
    Unemployed,
    Informal,
    Stc,
    Ltc,
}

impl LaborState {
    pub const ALL: [LaborState; 4] = [
        LaborState::Unemployed,
        LaborState::Informal,
        LaborState::Stc,
        LaborState::Ltc,
    ];

    pub fn index(self) -> usize {
        match self {
            LaborState::Unemployed => 0,
            LaborState::Informal => 1,
            LaborState::Stc => 2,
            LaborState::Ltc => 3,
        }
    }
}

/// Population mass over the full state space: unemployed, and employed by
/// sector, productivity node and (for STC) renewal counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub unemployed: f64,
    pub informal: Vec<f64>,
    pub stc: Vec<Vec<f64>>,
    pub ltc: Vec<f64>,
}

impl StateDistribution {
    pub fn zeros(nodes: usize, counters: usize) -> Self {
        Self {
            unemployed: 0.0,
            informal: vec![0.0; nodes],
            stc: vec![vec![0.0; nodes]; counters],
            ltc: vec![0.0; nodes],
        }
    }

    pub fn total(&self) -> f64 {
        self.unemployed + self.informal.iter().sum::<f64>() + self.stc_total() + self.ltc.iter().sum::<f64>()
    }

    pub fn stc_total(&self) -> f64 {
        self.stc.iter().flatten().sum()
    }

    /// Aggregate shares in [`LaborState`] order.
    pub fn aggregate(&self) -> [f64; 4] {
        [
            self.unemployed,
            self.informal.iter().sum(),
            self.stc_total(),
            self.ltc.iter().sum(),
        ]
    }

    /// STC mass by node, summed over counters.
    pub fn stc_by_node(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.informal.len()];
        for row in &self.stc {
            for (o, m) in out.iter_mut().zip(row) {
                *o += m;
            }
        }
        out
    }

    fn l1_distance(&self, other: &Self) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        (self.unemployed - other.unemployed).abs()
            + d(&self.informal, &other.informal)
            + d(&self.ltc, &other.ltc)
            + self.stc.iter().zip(&other.stc).map(|(a, b)| d(a, b)).sum::<f64>()
    }
}

/// Which parts of a period's transitions to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scope {
    /// Everything: separations, hires, redraws.
    Full,
    /// Only transitions that keep the same job going (renewals, upgrades,
    /// retention). Used to age job cohorts.
    WithinJob,
}

/// Per-period law of motion of the augmented state under an equilibrium's
/// decision rules.
pub struct AugmentedChain<'a> {
    eq: &'a EquilibriumSolution,
    find: [f64; 3],
    otj_rate: [f64; 2],
}

impl<'a> AugmentedChain<'a> {
    pub fn new(eq: &'a EquilibriumSolution) -> Self {
        let find = [
            eq.find_prob(Market::Stc),
            eq.find_prob(Market::Ltc),
            eq.find_prob(Market::Informal),
        ];
        let lambda = eq.params.otj_search_rate;
        let split = eq.search().formal_split();
        let otj_rate = [lambda * split[0] * find[0], lambda * split[1] * find[1]];
        Self { eq, find, otj_rate }
    }

    pub fn nodes(&self) -> usize {
        self.eq.grid.len()
    }

    pub fn counters(&self) -> usize {
        self.eq.rules.counters()
    }

    /// Per-node probability that an unemployed worker starts a job in
    /// market `m` next period.
    pub fn hire_inflow(&self, m: Market) -> Vec<f64> {
        let pi = self.eq.search().prob(m);
        let p = self.find[m.index()];
        self.eq
            .grid
            .weights()
            .iter()
            .zip(&self.eq.rules.hire[m.index()])
            .map(|(w, s)| pi * p * w * s)
            .collect()
    }

    /// Total on-the-job move probability out of each informal node, per
    /// formal market.
    pub fn otj_exit(&self) -> [Vec<f64>; 2] {
        let n = self.nodes();
        let w = self.eq.grid.weights();
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + w[i];
        }
        let mut out = [vec![0.0; n], vec![0.0; n]];
        for slot in 0..2 {
            if self.otj_rate[slot] == 0.0 {
                continue;
            }
            for j in 0..n {
                out[slot][j] = self.otj_rate[slot] * suffix[self.eq.rules.otj_first[slot][j]];
            }
        }
        out
    }

    /// One period forward. Also returns the aggregate flow matrix
    /// (mass moving from state a to state b).
    pub fn step(&self, from: &StateDistribution) -> (StateDistribution, [[f64; 4]; 4]) {
        self.step_scoped(from, Scope::Full)
    }

    /// One period of the transitions that continue the current job only;
    /// separations, hires and on-the-job moves drop out of the mass.
    pub fn step_within(&self, from: &StateDistribution) -> StateDistribution {
        self.step_scoped(from, Scope::WithinJob).0
    }

    pub(crate) fn step_scoped(&self, from: &StateDistribution, scope: Scope) -> (StateDistribution, [[f64; 4]; 4]) {
        let n = self.nodes();
        let nk = self.counters();
        let d = self.eq.params.redraw_prob;
        let w = self.eq.grid.weights();
        let rules = &self.eq.rules;
        let full = scope == Scope::Full;
        let mut to = StateDistribution::zeros(n, nk);
        let mut flows = [[0.0; 4]; 4];
        let (iu, ii, is, il) = (0, 1, 2, 3);

        let redraw = |m: &[f64]| -> Vec<f64> {
            let total: f64 = m.iter().sum();
            m.iter().zip(w).map(|(x, w)| (1.0 - d) * x + d * total * w).collect()
        };

        // unemployed
        if full {
            let mu = from.unemployed;
            let mut stay = mu;
            for (m, state, slot) in [(Market::Stc, is, 0usize), (Market::Ltc, il, 1), (Market::Informal, ii, 2)] {
                let inflow = self.hire_inflow(m);
                let total: f64 = inflow.iter().sum::<f64>() * mu;
                stay -= total;
                flows[iu][state] += total;
                let target = match slot {
                    0 => &mut to.stc[0],
                    1 => &mut to.ltc,
                    _ => &mut to.informal,
                };
                for (t, x) in target.iter_mut().zip(&inflow) {
                    *t += mu * x;
                }
            }
            to.unemployed += stay;
            flows[iu][iu] += stay;
        }

        // informal: on-the-job moves, then the regular reassessment
        let mut staying = from.informal.clone();
        if self.eq.params.otj_search_rate > 0.0 {
            let exits = self.otj_exit();
            for (slot, state) in [(0usize, is), (1, il)] {
                if self.otj_rate[slot] == 0.0 {
                    continue;
                }
                let first = &rules.otj_first[slot];
                // mass leaving origin j lands on nodes i >= first[j], weighted by w_i
                let mut dest_scale = vec![0.0; n + 1];
                for j in 0..n {
                    dest_scale[first[j]] += self.otj_rate[slot] * from.informal[j];
                    staying[j] -= exits[slot][j] * from.informal[j];
                    if full {
                        flows[ii][state] += exits[slot][j] * from.informal[j];
                    }
                }
                if full {
                    let target = if slot == 0 { &mut to.stc[0] } else { &mut to.ltc };
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += dest_scale[i];
                        target[i] += acc * w[i];
                    }
                }
            }
        }
        let k_inf = redraw(&staying);
        for i in 0..n {
            let keep = k_inf[i] * rules.inf_keep[i];
            to.informal[i] += keep;
            flows[ii][ii] += keep;
            if full {
                let sep = k_inf[i] - keep;
                to.unemployed += sep;
                flows[ii][iu] += sep;
            }
        }

        // STC by counter
        for k in 0..nk {
            let kk = redraw(&from.stc[k]);
            let nxt = rules.next_counter(k);
            for i in 0..n {
                let renew = kk[i] * rules.stc_renew[k][i];
                let up = kk[i] * rules.stc_upgrade[k][i];
                to.stc[nxt][i] += renew;
                to.ltc[i] += up;
                flows[is][is] += renew;
                flows[is][il] += up;
                if full {
                    let sep = kk[i] * rules.stc_separate[k][i];
                    to.unemployed += sep;
                    flows[is][iu] += sep;
                }
            }
        }

        // LTC
        let k_ltc = redraw(&from.ltc);
        for i in 0..n {
            let keep = k_ltc[i] * rules.ltc_keep[i];
            to.ltc[i] += keep;
            flows[il][il] += keep;
            if full {
                let sep = k_ltc[i] - keep;
                to.unemployed += sep;
                flows[il][iu] += sep;
            }
        }
        (to, flows)
    }

    /// Stationary distribution by power iteration from full unemployment.
    pub fn stationary(&self, tol: f64, max_iter: usize) -> Result<StateDistribution, SolveError> {
        let mut cur = StateDistribution::zeros(self.nodes(), self.counters());
        cur.unemployed = 1.0;
        let mut change = f64::INFINITY;
        for _ in 0..max_iter {
            let (next, _) = self.step(&cur);
            change = next.l1_distance(&cur);
            cur = next;
            if change < tol {
                // remove accumulated drift in total mass
                let total = cur.total();
                scale(&mut cur, 1.0 / total);
                return Ok(cur);
            }
        }
        Err(SolveError::MaxIterations {
            stage: "stationary distribution",
            iterations: max_iter,
            residual: change,
        })
    }

    /// New jobs started per period, by the state they start in.
    pub fn new_jobs(&self, dist: &StateDistribution) -> StateDistribution {
        let n = self.nodes();
        let mut out = StateDistribution::zeros(n, self.counters());
        let mu = dist.unemployed;
        for (x, v) in out.stc[0].iter_mut().zip(self.hire_inflow(Market::Stc)) {
            *x = mu * v;
        }
        for (x, v) in out.ltc.iter_mut().zip(self.hire_inflow(Market::Ltc)) {
            *x = mu * v;
        }
        for (x, v) in out.informal.iter_mut().zip(self.hire_inflow(Market::Informal)) {
            *x = mu * v;
        }
        if self.eq.params.otj_search_rate > 0.0 {
            let w = self.eq.grid.weights();
            for slot in 0..2 {
                if self.otj_rate[slot] == 0.0 {
                    continue;
                }
                let first = &self.eq.rules.otj_first[slot];
                let mut dest_scale = vec![0.0; n + 1];
                for j in 0..n {
                    dest_scale[first[j]] += self.otj_rate[slot] * dist.informal[j];
                }
                let target = if slot == 0 { &mut out.stc[0] } else { &mut out.ltc };
                let mut acc = 0.0;
                for i in 0..n {
                    acc += dest_scale[i];
                    target[i] += acc * w[i];
                }
            }
        }
        out
    }
}

pub(crate) fn scale(dist: &mut StateDistribution, s: f64) {
    dist.unemployed *= s;
    for v in dist
        .informal
        .iter_mut()
        .chain(dist.ltc.iter_mut())
        .chain(dist.stc.iter_mut().flatten())
    {
        *v *= s;
    }
}
