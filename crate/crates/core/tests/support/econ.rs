//! Synthetic regression data with known structure.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use segmkt::econometrics::{cluster_robust_vcov, Dataset, Grouping, RegressionSpec};

pub const COUNTRIES: usize = 4;
pub const MONTHS: usize = 13;

/// Panel with country and month effects, a staggered treatment, two
/// covariates, lognormal weights and clusters of about four rows.
pub fn synthetic(rows: usize, beta: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vec<f64> = (0..COUNTRIES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rho: Vec<f64> = (0..MONTHS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (mut c, mut t, mut d, mut x1, mut x2, mut w, mut g, mut y) =
        (vec![], vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
    let mut shock = 0.0;
    for i in 0..rows {
        if i % 4 == 0 {
            shock = rng.sample::<f64, _>(StandardNormal) * 0.5;
        }
        let ci = rng.random_range(0..COUNTRIES);
        let ti = rng.random_range(0..MONTHS);
        let di = if ci >= COUNTRIES / 2 && ti >= 6 { 1.0 } else { 0.0 };
        let a = rng.random_range(0.0..1.0);
        let b = rng.random_range(20.0..60.0);
        let e: f64 = rng.sample(StandardNormal);
        c.push(ci as f64);
        t.push(ti as f64);
        d.push(di);
        x1.push(a);
        x2.push(b);
        w.push(rng.random_range(0.5..2.0));
        g.push((i / 4) as f64);
        y.push(beta * di + 0.3 * a - 0.01 * b + alpha[ci] + rho[ti] + shock + e);
    }
    Dataset::from_columns([
        ("y", y),
        ("c", c),
        ("t", t),
        ("d", d),
        ("x1", x1),
        ("x2", x2),
        ("w", w),
        ("g", g),
    ])
    .unwrap()
}

pub fn spec() -> RegressionSpec {
    RegressionSpec {
        outcome: "y".into(),
        treatment: "d".into(),
        fixed_effects: vec!["c".into(), "t".into()],
        covariates: vec!["x1".into(), "x2".into()],
        weight: "w".into(),
        cluster: "g".into(),
    }
}

/// Weighted least squares with explicit intercept and dummies; returns
/// coefficients and CR1 standard errors of the first three columns.
pub fn full_dummy(ds: &Dataset, cluster: &str) -> (Vec<f64>, Vec<f64>) {
    let n = ds.rows();
    let col = |s: &str| ds.column(s).unwrap();
    let (c, t) = (col("c"), col("t"));
    let mut cols: Vec<Vec<f64>> = vec![col("d").to_vec(), col("x1").to_vec(), col("x2").to_vec(), vec![1.0; n]];
    for k in 1..COUNTRIES {
        cols.push(c.iter().map(|&v| (v == k as f64) as u8 as f64).collect());
    }
    for k in 1..MONTHS {
        cols.push(t.iter().map(|&v| (v == k as f64) as u8 as f64).collect());
    }
    let k = cols.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let w = col("w");
    let xw = DMatrix::from_fn(n, k, |i, j| w[i].sqrt() * x[(i, j)]);
    let yw = DVector::from_iterator(n, col("y").iter().zip(w).map(|(y, w)| w.sqrt() * y));
    let beta = xw.clone().svd(true, true).solve(&yw, 1e-14).unwrap();
    let resid: Vec<f64> = (DVector::from_column_slice(col("y")) - &x * &beta).iter().copied().collect();
    let (v, _) = cluster_robust_vcov(&resid, &x, &Grouping::from_values(col(cluster)), w, 0);
    ((0..3).map(|j| beta[j]).collect(), (0..3).map(|j| v[(j, j)].sqrt()).collect())
}

/// Two economies, 13 months, independent draws per worker, households of
/// five sharing a shock. Treatment switches on at month 6 in economy 1.
pub fn two_country(workers_per_cell: usize, beta: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho: Vec<f64> = (0..13).map(|_| rng.random_range(-0.5..0.5)).collect();
    let gamma = [0.0, rng.random_range(-0.5..0.5)];
    let rows = 2 * 13 * workers_per_cell;
    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut shock = 0.0;
    let mut i = 0;
    for c in 0..2 {
        for t in 0..13 {
            for _ in 0..workers_per_cell {
                if i % 5 == 0 {
                    shock = 0.3 * rng.sample::<f64, _>(StandardNormal);
                }
                let d = (c == 1 && t >= 6) as u8 as f64;
                let e: f64 = rng.sample(StandardNormal);
                cols[0].push(beta * d + gamma[c] + rho[t] + shock + e);
                cols[1].push(c as f64);
                cols[2].push(t as f64 - 6.0);
                cols[3].push(d);
                cols[4].push((i / 5) as f64);
                cols[5].push(1.0 + (i % 3) as f64);
                i += 1;
            }
        }
    }
    assert_eq!(i, rows);
    let [y, c, t, d, g, w] = cols;
    Dataset::from_columns([("y", y), ("c", c), ("t", t), ("d", d), ("g", g), ("w", w)]).unwrap()
}

pub fn two_country_spec() -> RegressionSpec {
    RegressionSpec {
        outcome: "y".into(),
        treatment: "d".into(),
        fixed_effects: vec!["c".into(), "t".into()],
        covariates: vec![],
        weight: "w".into(),
        cluster: "g".into(),
    }
}
