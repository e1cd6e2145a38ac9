use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::absorb::{absorbed_rank, demean, Grouping};
use super::{
    Dataset, EconError, EstimateResult, EventCoef, FitDiagnostics, RegressionSpec, Term, DEMEAN_MAX_SWEEPS, DEMEAN_TOL,
};

/// Columns whose demeaned norm falls below this fraction of the raw norm
/// are treated as absorbed by the fixed effects.
const COLLINEAR_TOL: f64 = 1e-9;

/// Event-study layout: `group` marks the reforming economy, `time` holds
/// event months, and `reference` is the omitted period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub base: RegressionSpec,
    pub group: String,
    pub time: String,
    pub reference: i32,
}

impl EventSpec {
    pub fn standard(outcome: &str) -> Self {
        Self {
            base: RegressionSpec::standard(outcome),
            group: "treated".into(),
            time: "event_month".into(),
            reference: -1,
        }
    }
}

struct Sample {
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    w: Vec<f64>,
    clusters: Grouping,
    fes: Vec<Grouping>,
}

fn select(ds: &Dataset, spec: &RegressionSpec, regressors: &[Vec<f64>]) -> Result<Sample, EconError> {
    let y = ds.column(&spec.outcome)?;
    let w = ds.column(&spec.weight)?;
    let cl = ds.column(&spec.cluster)?;
    let fes: Vec<&[f64]> = spec
        .fixed_effects
        .iter()
        .map(|f| ds.column(f))
        .collect::<Result<_, _>>()?;
    if !cl.iter().any(|c| c.is_finite()) {
        return Err(EconError::EmptyCluster(spec.cluster.clone()));
    }
    let keep: Vec<usize> = (0..ds.rows())
        .filter(|&i| {
            y[i].is_finite()
                && w[i].is_finite()
                && cl[i].is_finite()
                && fes.iter().all(|f| f[i].is_finite())
                && regressors.iter().all(|x| x[i].is_finite())
        })
        .collect();
    if keep.is_empty() {
        return Err(EconError::EmptySample);
    }
    if let Some(&row) = keep.iter().find(|&&i| w[i] <= 0.0) {
        return Err(EconError::NonPositiveWeight {
            column: spec.weight.clone(),
            row,
        });
    }
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    Ok(Sample {
        y: pick(y),
        x: regressors.iter().map(|x| pick(x)).collect(),
        w: pick(w),
        clusters: Grouping::from_values(&pick(cl)),
        fes: fes.iter().map(|f| Grouping::from_values(&pick(f))).collect(),
    })
}

fn weighted_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

/// Cluster-robust (CR1) covariance of weighted least-squares coefficients.
///
/// `design` holds the (already demeaned) regressors row by row and
/// `absorbed` the number of parameters swept out beforehand, which enters
/// the small-sample factor `G/(G-1) * (N-1)/(N-K)`. Returns the covariance
/// and any warnings.
pub fn cluster_robust_vcov(
    residuals: &[f64],
    design: &DMatrix<f64>,
    clusters: &Grouping,
    weights: &[f64],
    absorbed: usize,
) -> (DMatrix<f64>, Vec<String>) {
    let (n, k) = design.shape();
    let mut warnings = Vec::new();
    let xw = DMatrix::from_fn(n, k, |i, j| weights[i].sqrt() * design[(i, j)]);
    let r = xw.qr().r();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
    let bread = &r_inv * r_inv.transpose();

    let g = clusters.levels;
    let mut scores = DMatrix::zeros(g, k);
    for i in 0..n {
        let s = weights[i] * residuals[i];
        let c = clusters.index[i];
        for j in 0..k {
            scores[(c, j)] += s * design[(i, j)];
        }
    }
    let meat = scores.transpose() * &scores;

    let params = k + absorbed;
    if g < params {
        warnings.push(format!(
            "fewer clusters ({g}) than parameters ({params}); standard errors unreliable"
        ));
    }
    let factor = if g > 1 && n > params {
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - params as f64))
    } else {
        warnings.push("small-sample factor undefined; using 1".into());
        1.0
    };
    (&bread * meat * &bread * factor, warnings)
}

fn estimate(ds: &Dataset, spec: &RegressionSpec, names: Vec<String>, regressors: Vec<Vec<f64>>) -> Result<EstimateResult, EconError> {
    let mut s = select(ds, spec, &regressors)?;
    let n = s.y.len();
    let k = names.len();

    let mut sweeps = 0;
    let mut run = |col: &mut Vec<f64>| -> Result<(), EconError> {
        let c = demean(col, &s.w, &s.fes, DEMEAN_TOL, DEMEAN_MAX_SWEEPS);
        if !c.converged {
            return Err(EconError::DemeaningDiverged {
                sweeps: c.sweeps,
                change: c.change,
            });
        }
        sweeps = sweeps.max(c.sweeps);
        Ok(())
    };
    let y_scale = s.y.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    run(&mut s.y)?;
    for (name, col) in names.iter().zip(s.x.iter_mut()) {
        let before = weighted_norm(col, &s.w);
        run(col)?;
        if before == 0.0 || weighted_norm(col, &s.w) <= COLLINEAR_TOL * before {
            return Err(EconError::SingularDesign { column: name.clone() });
        }
    }
    if n < k {
        return Err(EconError::SingularDesign {
            column: names[n].clone(),
        });
    }

    let design = DMatrix::from_fn(n, k, |i, j| s.x[j][i]);
    let xw = DMatrix::from_fn(n, k, |i, j| s.w[i].sqrt() * design[(i, j)]);
    let yw = DVector::from_iterator(n, s.y.iter().zip(&s.w).map(|(y, w)| w.sqrt() * y));
    let col_norms: Vec<f64> = (0..k).map(|j| xw.column(j).norm()).collect();
    let qr = xw.qr();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)].abs() <= COLLINEAR_TOL * col_norms[j] {
            return Err(EconError::SingularDesign {
                column: names[j].clone(),
            });
        }
    }
    let qty = qr.q().transpose() * &yw;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| EconError::SingularDesign {
            column: names[k - 1].clone(),
        })?;

    let fitted = &design * &beta;
    let resid: Vec<f64> = s.y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();
    let rss: f64 = resid.iter().zip(&s.w).map(|(e, w)| w * e * e).sum();
    let tss: f64 = s.y.iter().zip(&s.w).map(|(y, w)| w * y * y).sum();
    let wsum: f64 = s.w.iter().sum();
    let degenerate = (tss / wsum).sqrt() <= DEMEAN_TOL * y_scale;

    let absorbed = absorbed_rank(&s.fes);
    let (vcov, warnings) = cluster_robust_vcov(&resid, &design, &s.clusters, &s.w, absorbed);
    let terms = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let se = if degenerate { 0.0 } else { vcov[(j, j)].max(0.0).sqrt() };
            Term::new(name, beta[j], se)
        })
        .collect();
    Ok(EstimateResult {
        outcome: spec.outcome.clone(),
        terms,
        path: Vec::new(),
        n_observations: n,
        n_clusters: s.clusters.levels,
        diagnostics: FitDiagnostics {
            rss,
            r2_within: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
            demean_sweeps: sweeps,
            parameters: k + absorbed,
        },
        degenerate,
        warnings,
        vcov: (0..k).map(|i| (0..k).map(|j| vcov[(i, j)]).collect()).collect(),
    })
}

fn covariates(ds: &Dataset, spec: &RegressionSpec) -> Result<(Vec<String>, Vec<Vec<f64>>), EconError> {
    let cols = spec
        .covariates
        .iter()
        .map(|c| ds.column(c).map(|v| v.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((spec.covariates.clone(), cols))
}

/// Weighted two-way fixed-effects regression of the outcome on the
/// treatment indicator and covariates.
pub fn twfe_estimate(ds: &Dataset, spec: &RegressionSpec) -> Result<EstimateResult, EconError> {
    let mut names = vec![spec.treatment.clone()];
    let mut cols = vec![ds.column(&spec.treatment)?.to_vec()];
    let (cn, cc) = covariates(ds, spec)?;
    names.extend(cn);
    cols.extend(cc);
    estimate(ds, spec, names, cols)
}

/// Event-time coefficients: one interaction of the group indicator with each
/// period except the reference.
pub fn event_study(ds: &Dataset, spec: &EventSpec) -> Result<EstimateResult, EconError> {
    let g = ds.column(&spec.group)?;
    let t = ds.column(&spec.time)?;
    let y = ds.column(&spec.base.outcome)?;
    let reference = spec.reference as f64;
    let has_ref = (0..ds.rows()).any(|i| g[i] == 1.0 && t[i] == reference && y[i].is_finite());
    if !has_ref {
        return Err(EconError::MissingReferencePeriod(spec.reference));
    }
    let mut periods: Vec<i32> = t
        .iter()
        .filter(|v| v.is_finite())
        .map(|&v| v.round() as i32)
        .collect();
    periods.sort_unstable();
    periods.dedup();
    periods.retain(|&p| p != spec.reference);

    let mut names = Vec::new();
    let mut cols = Vec::new();
    for &p in &periods {
        names.push(format!("event_{p}"));
        cols.push(
            g.iter()
                .zip(t)
                .map(|(&g, &t)| match (g.is_nan() || t.is_nan(), t == p as f64) {
                    (true, _) => f64::NAN,
                    (false, true) => g,
                    (false, false) => 0.0,
                })
                .collect(),
        );
    }
    let (cn, cc) = covariates(ds, &spec.base)?;
    names.extend(cn);
    cols.extend(cc);
    let mut res = estimate(ds, &spec.base, names, cols)?;
    res.path = periods
        .iter()
        .zip(&res.terms)
        .map(|(&period, term)| EventCoef {
            period,
            term: term.clone(),
        })
        .collect();
    Ok(res)
}

/// `(c1 - c2) / sqrt(se1^2 + se2^2)` for two independent estimates.
pub fn t_difference(c1: f64, se1: f64, c2: f64, se2: f64) -> Result<f64, EconError> {
    let v = se1 * se1 + se2 * se2;
    if !(v > 0.0) {
        return Err(EconError::ZeroVariance);
    }
    Ok((c1 - c2) / v.sqrt())
}

pub fn coef_difference_test(a: &Term, b: &Term) -> Result<f64, EconError> {
    t_difference(a.coef, a.se, b.coef, b.se)
}
