//! Independent oracles for the worker fixed point and the profit integrals,
//! shared by the core tests and the acceptance run.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use segmkt::bellman::{
    expected_profit, solve_worker_values_from, wage_schedule, Acceleration, DecisionRules, InnerOptions, Thresholds,
    ValueFunctions,
};
use segmkt::model::{build_grid, find_prob, Market, ModelParams, ProductivityGrid, RenewalCap, Threshold, Tightness};

/// Affine expression `coef . x + konst` over the stacked unknowns.
#[derive(Clone)]
struct Affine {
    coef: Vec<f64>,
    konst: f64,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Self {
            coef: vec![0.0; n],
            konst: 0.0,
        }
    }
    fn add(&mut self, s: f64, other: &Affine) {
        for (c, o) in self.coef.iter_mut().zip(&other.coef) {
            *c += s * o;
        }
        self.konst += s * other.konst;
    }
    fn var(n: usize, i: usize) -> Self {
        let mut a = Self::zero(n);
        a.coef[i] = 1.0;
        a
    }
}

/// Layout: U, then V_S for each counter row, then V_L, then V_INF.
struct Layout {
    n: usize,
    k: usize,
}

impl Layout {
    fn len(&self) -> usize {
        1 + self.k * self.n + 2 * self.n
    }
    fn s(&self, k: usize, i: usize) -> usize {
        1 + k * self.n + i
    }
    fn l(&self, i: usize) -> usize {
        1 + self.k * self.n + i
    }
    fn inf(&self, i: usize) -> usize {
        1 + (self.k + 1) * self.n + i
    }
}

/// `(1 - d) h_i + d E[h]` for every node.
fn redraw(h: &[Affine], w: &[f64], d: f64) -> Vec<Affine> {
    let m = h[0].coef.len();
    let mut mean = Affine::zero(m);
    for (hj, wj) in h.iter().zip(w) {
        mean.add(*wj, hj);
    }
    h.iter()
        .map(|hi| {
            let mut c = Affine::zero(m);
            c.add(1.0 - d, hi);
            c.add(d, &mean);
            c
        })
        .collect()
}

/// Direct linear solve of the worker system with decisions held at `rules`.
fn direct_solve(rules: &DecisionRules, theta: &Tightness, p: &ModelParams, g: &ProductivityGrid) -> Vec<f64> {
    let n = g.len();
    let lay = Layout {
        n,
        k: rules.counters(),
    };
    let m = lay.len();
    let beta = 1.0 / (1.0 + p.discount_rate);
    let d = p.redraw_prob;
    let w = g.weights();
    let z = g.nodes();
    let u = Affine::var(m, 0);
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut put = |row: usize, flow: f64, cont: &Affine| {
        // x_row - beta * cont = flow
        a[(row, row)] += 1.0;
        for (j, c) in cont.coef.iter().enumerate() {
            a[(row, j)] -= beta * c;
        }
        rhs[row] = flow + beta * cont.konst;
    };

    for k in 0..lay.k {
        let next = rules.next_counter(k);
        let h: Vec<Affine> = (0..n)
            .map(|i| {
                let mut e = Affine::zero(m);
                e.add(rules.stc_separate[k][i], &u);
                e.add(rules.stc_renew[k][i], &Affine::var(m, lay.s(next, i)));
                e.add(rules.stc_upgrade[k][i], &Affine::var(m, lay.l(i)));
                e
            })
            .collect();
        for (i, c) in redraw(&h, w, d).iter().enumerate() {
            put(lay.s(k, i), z[i], c);
        }
    }

    let h: Vec<Affine> = (0..n)
        .map(|i| {
            let s = rules.ltc_keep[i];
            let mut e = Affine::zero(m);
            e.add(1.0 - s, &u);
            e.konst -= (1.0 - s) * p.firing_cost;
            e.add(s, &Affine::var(m, lay.l(i)));
            e
        })
        .collect();
    for (i, c) in redraw(&h, w, d).iter().enumerate() {
        put(lay.l(i), z[i], c);
    }

    let h: Vec<Affine> = (0..n)
        .map(|i| {
            let s = rules.inf_keep[i];
            let mut e = Affine::zero(m);
            e.add(1.0 - s, &u);
            e.add(s, &Affine::var(m, lay.inf(i)));
            e
        })
        .collect();
    let mut cont = redraw(&h, w, d);
    if p.otj_search_rate > 0.0 {
        let split = rules.search.formal_split();
        for (slot, mk) in [Market::Stc, Market::Ltc].into_iter().enumerate() {
            let rate = p.otj_search_rate
                * split[slot]
                * find_prob(theta.get(mk), p.matching_efficiency, p.matching_elasticity);
            for j in 0..n {
                let regular = cont[j].clone();
                for i in rules.otj_first[slot][j]..n {
                    let target = if slot == 0 { lay.s(0, i) } else { lay.l(i) };
                    cont[j].add(rate * w[i], &Affine::var(m, target));
                    cont[j].add(-rate * w[i], &regular);
                }
            }
        }
    }
    for (i, c) in cont.iter().enumerate() {
        put(lay.inf(i), p.informal_penalty * z[i], c);
    }

    let mut cu = Affine::zero(m);
    for mk in Market::ALL {
        let pi = rules.search.prob(mk);
        let q = find_prob(theta.get(mk), p.matching_efficiency, p.matching_elasticity);
        cu.add(pi, &u);
        for i in 0..n {
            let s = rules.hire[mk.index()][i];
            let target = match mk {
                Market::Stc => lay.s(0, i),
                Market::Ltc => lay.l(i),
                Market::Informal => lay.inf(i),
            };
            let scale = pi * q * p.bargaining_weight * w[i] * s;
            cu.add(scale, &Affine::var(m, target));
            cu.add(-scale, &u);
        }
    }
    put(0, p.unemployment_flow, &cu);

    a.lu().solve(&rhs).expect("nonsingular system").iter().copied().collect()
}

fn stacked(v: &ValueFunctions) -> Vec<f64> {
    let mut x = vec![v.u];
    v.v_s.iter().for_each(|r| x.extend(r));
    x.extend(&v.v_l);
    x.extend(&v.v_inf);
    x
}

/// Largest gap between the iterated and directly solved worker values.
pub fn three_node_gap(p: &ModelParams, theta: Tightness) -> f64 {
    let g = build_grid(&p.productivity_spec, 3).unwrap();
    let start = ValueFunctions::initial(p, &g, p.stc_renewal_cap.counter_states());
    let opts = InnerOptions {
        tolerance: 1e-11,
        max_iterations: 10_000_000,
        acceleration: Acceleration::Bounds,
        history: 0,
    };
    let (v, rules, _) = solve_worker_values_from(start, &theta, p, &g, &opts).unwrap();
    let direct = direct_solve(&rules, &theta, p, &g);
    let iter = stacked(&v);
    assert_eq!(direct.len(), iter.len());
    iter.iter().zip(&direct).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn three_node_params() -> ModelParams {
    ModelParams {
        grid_size: 3,
        ..ModelParams::baseline()
    }
}

/// Baseline; a short cap with on-the-job search; a hard search choice.
pub fn three_node_cases() -> Vec<(&'static str, ModelParams, Tightness)> {
    vec![
        ("baseline", three_node_params(), Tightness::new(10.0, 5.0, 8.0)),
        (
            "cap and on-the-job search",
            ModelParams {
                stc_renewal_cap: RenewalCap::Finite(3),
                otj_search_rate: 0.3,
                firing_cost: 0.5,
                ..three_node_params()
            },
            Tightness::new(4.0, 2.0, 6.0),
        ),
        (
            "hard search choice",
            ModelParams {
                search_dispersion: 0.0,
                discount_rate: 0.05,
                ..three_node_params()
            },
            Tightness::new(3.0, 1.0, 2.0),
        ),
    ]
}

/// Per-hire profit by direct sampling from the continuous distribution,
/// censored at the grid ends.
pub fn mc_profit(
    m: Market,
    t: &Thresholds,
    p: &ModelParams,
    g: &ProductivityGrid,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (mu, sigma) = match p.productivity_spec {
        segmkt::ProductivitySpec::Lognormal { location, scale } => (location, scale),
        _ => unreachable!(),
    };
    let dist = LogNormal::new(mu, sigma).unwrap();
    let (b, phi, a) = (p.unemployment_flow, p.bargaining_weight, p.informal_penalty);
    let cut = match m {
        Market::Stc => t.z_tilde_s,
        Market::Ltc => t.z_tilde_l,
        Market::Informal => t.z_tilde_inf,
    }
    .value()
    .unwrap();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let z: f64 = dist.sample(rng).clamp(g.z_min(), g.z_max());
        let y = if m == Market::Informal { a * z } else { z };
        let x = if z >= cut {
            y - (b + phi * (y - b))
        } else if m == Market::Ltc {
            -p.firing_cost
        } else {
            0.0
        };
        s += x;
        s2 += x * x;
    }
    let nf = draws as f64;
    let mean = s / nf;
    (mean, ((s2 / nf - mean * mean) / nf).sqrt())
}


/// One random parameter draw with interior thresholds.
pub struct ProfitDraw {
    pub params: ModelParams,
    pub grid: ProductivityGrid,
    pub thresholds: Thresholds,
}

/// Random parameter draws over a range where the quadrature grid bias stays
/// below the Monte Carlo noise of 10^6 draws.
pub fn profit_draws(count: usize, rng: &mut ChaCha8Rng) -> Vec<ProfitDraw> {
    (0..count)
        .map(|_| {
            let params = ModelParams {
                unemployment_flow: rng.random_range(0.1..0.6),
                bargaining_weight: rng.random_range(0.05..0.6),
                informal_penalty: rng.random_range(0.6..1.0),
                firing_cost: rng.random_range(0.0..3.0),
                productivity_spec: segmkt::ProductivitySpec::Lognormal {
                    location: rng.random_range(-0.2..0.2),
                    scale: rng.random_range(0.3..0.65),
                },
                ..ModelParams::baseline()
            };
            let grid = build_grid(&params.productivity_spec, params.grid_size).unwrap();
            let mut q = |lo: f64, hi: f64| Threshold::Interior(rng.random_range(lo..hi));
            let thresholds = Thresholds {
                z_tilde_s: q(0.6, 1.4),
                z_tilde_l: q(0.4, 1.2),
                z_tilde_inf: q(0.6, 1.6),
                upgrade: Threshold::AboveSupport,
                ltc_hire: Threshold::AboveSupport,
            };
            ProfitDraw {
                params,
                grid,
                thresholds,
            }
        })
        .collect()
}

/// Quadrature profit, Monte Carlo mean and its standard error per market.
pub fn profit_comparison(d: &ProfitDraw, draws: usize, rng: &mut ChaCha8Rng) -> Vec<(Market, f64, f64, f64)> {
    let wages = wage_schedule(&d.params, &d.grid);
    Market::ALL
        .into_iter()
        .map(|m| {
            let quad = expected_profit(m, &d.thresholds, &wages, &d.params, &d.grid);
            let (mc, se) = mc_profit(m, &d.thresholds, &d.params, &d.grid, draws, rng);
            (m, quad, mc, se)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
