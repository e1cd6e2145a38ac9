//! Monthly worker histories under solved equilibria, observed through
//! repeated cross-section surveys.

mod io;
mod summary;

pub use io::{header, read_panel, write_panel, PanelError, COLUMNS};
pub use summary::{panel_summary, PanelSummary, SummaryRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::EquilibriumSolution;
use crate::flows::{AugmentedChain, StateDistribution, TENURE_CAP};
use crate::model::Market;

const STATIONARY_TOL: f64 = 1e-13;
const STATIONARY_MAX_ITER: usize = 1_000_000;
/// Residual above which an equilibrium is not treated as solved.
const SOLVED_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MicrosimError {
    #[error("{arm} equilibrium is not usable: {reason}")]
    UnsolvedEquilibrium { arm: &'static str, reason: String },
    #[error("invalid wave months: {0}")]
    InvalidWaveMonths(String),
    #[error("{field} out of range: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// One interview of one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: u64,
    /// 1 for the reforming economy, 0 for the comparison economy.
    pub country_id: u32,
    pub household_id: u64,
    /// 0 before the reform, 1 after.
    pub survey_wave: u8,
    /// Interview month relative to the reform (0 = first post-reform month).
    pub event_month: i32,
    pub household_weight: f64,
    pub employed: u8,
    pub formal: u8,
    pub informal: u8,
    /// Holds a long-term contract; only defined for formal workers.
    pub ltc_conditional: Option<u8>,
    pub tenure_months: u8,
    pub nonemp_spell_years: f64,
    pub monthly_wage: f64,
    pub urban: u8,
    pub age: u8,
    pub female: u8,
    pub education: u8,
    pub household_size: u8,
    pub married: u8,
}

impl WorkerRecord {
    /// Record-level consistency rules; returns the first violation.
    pub fn check(&self) -> Result<(), String> {
        let bin = |name: &str, v: u8| {
            if v > 1 {
                Err(format!("{name} must be 0 or 1, got {v}"))
            } else {
                Ok(())
            }
        };
        bin("employed", self.employed)?;
        bin("formal", self.formal)?;
        bin("informal", self.informal)?;
        bin("survey_wave", self.survey_wave)?;
        if self.employed != self.formal + self.informal {
            return Err("employed must equal formal + informal".into());
        }
        match (self.formal, self.ltc_conditional) {
            (1, None) => return Err("ltc_conditional missing for a formal worker".into()),
            (0, Some(_)) => return Err("ltc_conditional set for a non-formal worker".into()),
            (_, Some(v)) => bin("ltc_conditional", v)?,
            _ => {}
        }
        if self.tenure_months as usize > TENURE_CAP {
            return Err(format!("tenure_months above {TENURE_CAP}"));
        }
        if (self.tenure_months == 0) == (self.employed == 1) {
            return Err("tenure_months is 0 exactly when not employed".into());
        }
        if !(self.household_weight > 0.0 && self.household_weight.is_finite()) {
            return Err("household_weight must be positive".into());
        }
        if !(self.nonemp_spell_years >= 0.0) || (self.employed == 1 && self.nonemp_spell_years != 0.0) {
            return Err("nonemp_spell_years must be >= 0 and 0 when employed".into());
        }
        if !(self.monthly_wage >= 0.0) || (self.monthly_wage > 0.0 && self.formal == 0) {
            return Err("monthly_wage must be >= 0 and 0 outside formal work".into());
        }
        Ok(())
    }

    pub fn is_treated(&self) -> bool {
        self.country_id == 1
    }

    pub fn is_post(&self) -> bool {
        self.survey_wave == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub seed: u64,
    pub scenario: String,
    pub wave_months: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPanel {
    pub meta: PanelMeta,
    pub records: Vec<WorkerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicrosimConfig {
    pub n_workers: usize,
    /// Interview months relative to the reform; negative ones are pre-reform.
    pub wave_months: Vec<i32>,
    pub seed: u64,
    /// Multiplies model wages into USD.
    pub wage_usd_scale: f64,
    /// Fraction of workers living in the reforming economy.
    pub treated_share: f64,
    /// Months simulated before the earliest interview.
    pub burn_in_months: u32,
    pub mean_household_size: f64,
    /// Calendar months skipped between event months -1 and 0.
    pub post_gap_months: u32,
    /// The treated economy adopts the post-reform rules this many calendar
    /// months before event month 0.
    pub switch_lead_months: u32,
    pub scenario: String,
}

impl Default for MicrosimConfig {
    fn default() -> Self {
        Self {
            n_workers: 200_000,
            wave_months: (-6..=6).collect(),
            seed: 0,
            wage_usd_scale: 100.0,
            treated_share: 0.5,
            burn_in_months: 120,
            mean_household_size: 5.0,
            post_gap_months: 30,
            switch_lead_months: 17,
            scenario: "reform".into(),
        }
    }
}

impl MicrosimConfig {
    /// Calendar month of an event month.
    pub fn calendar(&self, event_month: i32) -> i32 {
        if event_month < 0 {
            event_month
        } else {
            event_month + self.post_gap_months as i32
        }
    }

    fn validate(&self) -> Result<(), MicrosimError> {
        let bad = |field, reason: &str| {
            Err(MicrosimError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.n_workers == 0 {
            return bad("n_workers", "need at least one worker");
        }
        if !(self.treated_share > 0.0 && self.treated_share < 1.0) {
            return bad("treated_share", "must lie strictly between 0 and 1");
        }
        if !(self.wage_usd_scale > 0.0 && self.wage_usd_scale.is_finite()) {
            return bad("wage_usd_scale", "must be positive");
        }
        if !(self.mean_household_size >= 1.0 && self.mean_household_size <= 255.0) {
            return bad("mean_household_size", "must lie in [1, 255]");
        }
        let pre: Vec<i32> = self.wave_months.iter().copied().filter(|&m| m < 0).collect();
        if pre.is_empty() || pre.len() == self.wave_months.len() {
            return Err(MicrosimError::InvalidWaveMonths(
                "need at least one month before and one from month 0 on".into(),
            ));
        }
        if self.switch_lead_months > self.post_gap_months {
            return Err(MicrosimError::InvalidWaveMonths(format!(
                "a switch {} months ahead of month 0 falls before pre-reform interviews with a {}-month gap",
                self.switch_lead_months, self.post_gap_months
            )));
        }
        let mut sorted = self.wave_months.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.wave_months.len() {
            return Err(MicrosimError::InvalidWaveMonths("duplicate months".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Job {
    None,
    Informal,
    Stc(usize),
    Ltc,
}

#[derive(Debug, Clone, Copy)]
struct Worker {
    job: Job,
    node: usize,
    /// Months in the current job, counting the current month.
    age: u32,
    /// Months since the last job ended.
    idle: u32,
}

/// An equilibrium prepared for sampling.
struct Regime<'a> {
    eq: &'a EquilibriumSolution,
    cum_w: Vec<f64>,
    cum_search: [f64; 3],
    find: [f64; 3],
    otj_rate: [f64; 2],
    initial: Vec<f64>,
}

fn cumulative(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    xs.into_iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let u = u * cum.last().copied().unwrap_or(1.0);
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl<'a> Regime<'a> {
    fn new(eq: &'a EquilibriumSolution, arm: &'static str, with_initial: bool) -> Result<Self, MicrosimError> {
        let d = &eq.diagnostics;
        let fe = d.free_entry_residuals.iter().fold(0.0f64, |a, b| a.max(*b));
        if !(d.bellman_residual <= SOLVED_TOL && fe <= SOLVED_TOL) || !eq.values.is_finite() {
            return Err(MicrosimError::UnsolvedEquilibrium {
                arm,
                reason: format!("bellman residual {:e}, free-entry residual {:e}", d.bellman_residual, fe),
            });
        }
        let find = [
            eq.find_prob(Market::Stc),
            eq.find_prob(Market::Ltc),
            eq.find_prob(Market::Informal),
        ];
        let split = eq.search().formal_split();
        let lambda = eq.params.otj_search_rate;
        let otj_rate = [lambda * split[0] * find[0], lambda * split[1] * find[1]];
        let pr = eq.search().probabilities;
        let c = cumulative(pr);
        let initial = if with_initial {
            let dist = AugmentedChain::new(eq)
                .stationary(STATIONARY_TOL, STATIONARY_MAX_ITER)
                .map_err(|e| MicrosimError::UnsolvedEquilibrium {
                    arm,
                    reason: e.to_string(),
                })?;
            cumulative(flatten(&dist))
        } else {
            Vec::new()
        };
        Ok(Self {
            eq,
            cum_w: cumulative(eq.grid.weights().iter().copied()),
            cum_search: [c[0], c[1], c[2]],
            find,
            otj_rate,
            initial,
        })
    }

    fn draw_node(&self, rng: &mut ChaCha8Rng) -> usize {
        pick(&self.cum_w, rng.random())
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> Worker {
        let n = self.eq.grid.len();
        let nk = self.eq.rules.counters();
        let idx = pick(&self.initial, rng.random());
        let (job, node) = if idx == 0 {
            (Job::None, 0)
        } else if idx <= n {
            (Job::Informal, idx - 1)
        } else if idx <= n + n * nk {
            let j = idx - 1 - n;
            (Job::Stc(j / n), j % n)
        } else {
            (Job::Ltc, idx - 1 - n - n * nk)
        };
        // job start dates are unknown; burn-in makes this irrelevant
        let age = if job == Job::None { 0 } else { TENURE_CAP as u32 };
        Worker { job, node, age, idle: 0 }
    }

    fn step(&self, w: &mut Worker, rng: &mut ChaCha8Rng) {
        let rules = &self.eq.rules;
        let d = self.eq.params.redraw_prob;
        let separate = |w: &mut Worker| {
            w.job = Job::None;
            w.age = 0;
            w.idle = 1;
        };
        match w.job {
            Job::None => {
                let m = pick(&self.cum_search, rng.random());
                let met = rng.random::<f64>() < self.find[m];
                if met {
                    let i = self.draw_node(rng);
                    if rng.random::<f64>() < rules.hire[m][i] {
                        w.job = [Job::Stc(0), Job::Ltc, Job::Informal][m];
                        w.node = i;
                        w.age = 1;
                        w.idle = 0;
                        return;
                    }
                }
                w.idle += 1;
            }
            Job::Informal => {
                if self.otj_rate[0] + self.otj_rate[1] > 0.0 {
                    let u: f64 = rng.random();
                    let slot = if u < self.otj_rate[0] {
                        Some(0)
                    } else if u < self.otj_rate[0] + self.otj_rate[1] {
                        Some(1)
                    } else {
                        None
                    };
                    if let Some(s) = slot {
                        let i = self.draw_node(rng);
                        if i >= rules.otj_first[s][w.node] {
                            w.job = if s == 0 { Job::Stc(0) } else { Job::Ltc };
                            w.node = i;
                            w.age = 1;
                            return;
                        }
                    }
                }
                self.redraw(w, d, rng);
                if rng.random::<f64>() < rules.inf_keep[w.node] {
                    w.age += 1;
                } else {
                    separate(w);
                }
            }
            Job::Stc(k) => {
                self.redraw(w, d, rng);
                let u: f64 = rng.random();
                let renew = rules.stc_renew[k][w.node];
                let up = rules.stc_upgrade[k][w.node];
                if u < renew {
                    w.job = Job::Stc(rules.next_counter(k));
                    w.age += 1;
                } else if u < renew + up {
                    w.job = Job::Ltc;
                    w.age += 1;
                } else {
                    separate(w);
                }
            }
            Job::Ltc => {
                self.redraw(w, d, rng);
                if rng.random::<f64>() < rules.ltc_keep[w.node] {
                    w.age += 1;
                } else {
                    separate(w);
                }
            }
        }
    }

    fn redraw(&self, w: &mut Worker, d: f64, rng: &mut ChaCha8Rng) {
        if rng.random::<f64>() < d {
            w.node = self.draw_node(rng);
        }
    }
}

/// Flattened as unemployed, informal nodes, STC (counter-major), LTC nodes.
fn flatten(dist: &StateDistribution) -> Vec<f64> {
    let mut out = vec![dist.unemployed.max(0.0)];
    out.extend(dist.informal.iter().map(|x| x.max(0.0)));
    for row in &dist.stc {
        out.extend(row.iter().map(|x| x.max(0.0)));
    }
    out.extend(dist.ltc.iter().map(|x| x.max(0.0)));
    out
}

/// Maps a worker's state from one equilibrium's grid and counters onto another's.
struct Switch {
    node: Vec<usize>,
    counters: usize,
}

impl Switch {
    fn new(from: &EquilibriumSolution, to: &EquilibriumSolution) -> Self {
        let node = if from.grid.nodes() == to.grid.nodes() {
            (0..from.grid.len()).collect()
        } else {
            from.grid.nodes().iter().map(|&z| to.grid.cell_of(z)).collect()
        };
        Self {
            node,
            counters: to.rules.counters(),
        }
    }

    fn apply(&self, w: &mut Worker) {
        w.node = self.node[w.node];
        if let Job::Stc(k) = w.job {
            w.job = Job::Stc(k.min(self.counters - 1));
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Household {
    id: u64,
    size: u8,
    weight: f64,
    urban: u8,
    month: i32,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Partitions each arm into households; returns, per worker, its arm and household.
fn households(cfg: &MicrosimConfig, n_treated: usize) -> Vec<(u32, Household)> {
    let mut rng = stream(cfg.seed, u64::MAX);
    let size_dist = Geometric::new(1.0 / cfg.mean_household_size).expect("validated household size");
    let weight_dist = LogNormal::new(5.0, 0.5).expect("constant parameters");
    let mut out = Vec::with_capacity(cfg.n_workers);
    let mut id = 0u64;
    for (arm, count) in [(1u32, n_treated), (0u32, cfg.n_workers - n_treated)] {
        let mut left = count;
        while left > 0 {
            let size = ((size_dist.sample(&mut rng) + 1) as usize).min(255).min(left);
            let hh = Household {
                id,
                size: size as u8,
                weight: weight_dist.sample(&mut rng),
                urban: rng.random_bool(0.45) as u8,
                month: cfg.wave_months[rng.random_range(0..cfg.wave_months.len())],
            };
            out.extend(std::iter::repeat_n((arm, hh), size));
            left -= size;
            id += 1;
        }
    }
    out
}

/// Simulates a treated economy that moves from `pre` to `post` rules and a
/// comparison economy that stays in `control`, and interviews every worker once.
pub fn simulate_panel(
    pre: &EquilibriumSolution,
    post: &EquilibriumSolution,
    control: &EquilibriumSolution,
    cfg: &MicrosimConfig,
) -> Result<SurveyPanel, MicrosimError> {
    cfg.validate()?;
    let pre_r = Regime::new(pre, "pre-reform", true)?;
    let post_r = Regime::new(post, "post-reform", false)?;
    let ctrl_r = Regime::new(control, "control", true)?;
    let switch = Switch::new(pre, post);
    let switch_month = cfg.calendar(0) - cfg.switch_lead_months as i32;
    let first = *cfg.wave_months.iter().min().expect("validated non-empty");
    let start = cfg.calendar(first) - cfg.burn_in_months as i32;

    let n_treated = ((cfg.n_workers as f64 * cfg.treated_share).round() as usize).clamp(1, cfg.n_workers);
    let homes = households(cfg, n_treated);

    let records = homes
        .into_par_iter()
        .enumerate()
        .map(|(id, (arm, hh))| {
            let mut rng = stream(cfg.seed, id as u64);
            let treated = arm == 1;
            let mut w = if treated {
                pre_r.draw_initial(&mut rng)
            } else {
                ctrl_r.draw_initial(&mut rng)
            };
            let mut switched = false;
            for t in start + 1..=cfg.calendar(hh.month) {
                let regime = if !treated {
                    &ctrl_r
                } else if t >= switch_month {
                    if !switched {
                        switch.apply(&mut w);
                        switched = true;
                    }
                    &post_r
                } else {
                    &pre_r
                };
                regime.step(&mut w, &mut rng);
            }
            let regime = if treated && switched { &post_r } else if treated { &pre_r } else { &ctrl_r };
            observe(id as u64, arm, &hh, &w, regime, cfg, &mut rng)
        })
        .collect();

    let mut wave_months = cfg.wave_months.clone();
    wave_months.sort_unstable();
    Ok(SurveyPanel {
        meta: PanelMeta {
            seed: cfg.seed,
            scenario: cfg.scenario.clone(),
            wave_months,
        },
        records,
    })
}

fn observe(
    id: u64,
    arm: u32,
    hh: &Household,
    w: &Worker,
    regime: &Regime,
    cfg: &MicrosimConfig,
    rng: &mut ChaCha8Rng,
) -> WorkerRecord {
    let (employed, formal, ltc) = match w.job {
        Job::None => (0, 0, None),
        Job::Informal => (1, 0, None),
        Job::Stc(_) => (1, 1, Some(0)),
        Job::Ltc => (1, 1, Some(1)),
    };
    let wage = if formal == 1 {
        regime.eq.wages.formal[w.node] * cfg.wage_usd_scale
    } else {
        0.0
    };
    let age: u8 = rng.random_range(15..=64);
    let married = rng.random_bool(if age < 25 { 0.2 } else { 0.6 }) as u8;
    WorkerRecord {
        worker_id: id,
        country_id: arm,
        household_id: hh.id,
        survey_wave: (hh.month >= 0) as u8,
        event_month: hh.month,
        household_weight: hh.weight,
        employed,
        formal,
        informal: employed - formal,
        ltc_conditional: ltc,
        tenure_months: if employed == 1 { w.age.clamp(1, TENURE_CAP as u32) as u8 } else { 0 },
        nonemp_spell_years: if employed == 1 { 0.0 } else { w.idle as f64 / 12.0 },
        monthly_wage: wage,
        urban: hh.urban,
        age,
        female: rng.random_bool(0.5) as u8,
        education: rng.random_range(0..=16),
        household_size: hh.size,
        married,
    }
}
