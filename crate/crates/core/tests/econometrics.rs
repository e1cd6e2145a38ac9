#[path = "support/econ.rs"]
mod econ;

use econ::{full_dummy, spec, synthetic, two_country, two_country_spec, COUNTRIES, MONTHS};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use segmkt::econometrics::{event_study, twfe_estimate, Dataset, EventSpec};

#[test]
fn demeaned_fit_matches_full_dummy_regression() {
    for seed in 0..3 {
        let ds = synthetic(500, 1.5, seed);
        let r = twfe_estimate(&ds, &spec()).unwrap();
        let (b, se) = full_dummy(&ds, "g");
        for (j, name) in ["d", "x1", "x2"].iter().enumerate() {
            let t = r.term(name).unwrap();
            assert!((t.coef - b[j]).abs() < 1e-8, "{name}: {} vs {}", t.coef, b[j]);
            assert!((t.se - se[j]).abs() < 1e-8, "{name} se: {} vs {}", t.se, se[j]);
        }
        assert_eq!(r.diagnostics.parameters, 3 + COUNTRIES + MONTHS - 1);
    }
}

#[test]
fn singleton_clusters_give_hc1() {
    let mut ds = synthetic(500, 1.0, 7);
    ds.insert("row", (0..500).map(f64::from).collect()).unwrap();
    let mut s = spec();
    s.cluster = "row".into();
    let r = twfe_estimate(&ds, &s).unwrap();

    // HC1 by hand on the full dummy design
    let n = ds.rows();
    let (_, se_cr) = full_dummy(&ds, "row");
    let col = |s: &str| ds.column(s).unwrap();
    let k = 3 + COUNTRIES + MONTHS - 1;
    let mut x = DMatrix::zeros(n, k);
    for i in 0..n {
        x[(i, 0)] = col("d")[i];
        x[(i, 1)] = col("x1")[i];
        x[(i, 2)] = col("x2")[i];
        x[(i, 3)] = 1.0;
        let ci = col("c")[i] as usize;
        let ti = col("t")[i] as usize;
        if ci > 0 {
            x[(i, 3 + ci)] = 1.0;
        }
        if ti > 0 {
            x[(i, 3 + COUNTRIES - 1 + ti)] = 1.0;
        }
    }
    let w = col("w");
    let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let xtwx_inv = (x.transpose() * &wm * &x).try_inverse().unwrap();
    let beta = &xtwx_inv * x.transpose() * &wm * DVector::from_column_slice(col("y"));
    let e = DVector::from_column_slice(col("y")) - &x * beta;
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        let xi = x.row(i).transpose();
        meat += (w[i] * e[i]).powi(2) * &xi * xi.transpose();
    }
    let v = &xtwx_inv * meat * &xtwx_inv * (n as f64 / (n - k) as f64);
    let t = r.treatment();
    assert!((t.se - v[(0, 0)].sqrt()).abs() < 1e-12, "{} vs {}", t.se, v[(0, 0)].sqrt());
    assert!((t.se - se_cr[0]).abs() < 1e-10);
}

#[test]
fn recoded_treatment_negates_the_effect() {
    let mut ds = synthetic(500, 0.8, 11);
    let d = ds.column("d").unwrap().to_vec();
    ds.insert("not_d", d.iter().map(|v| 1.0 - v).collect()).unwrap();
    let a = twfe_estimate(&ds, &spec()).unwrap();
    let mut s = spec();
    s.treatment = "not_d".into();
    let b = twfe_estimate(&ds, &s).unwrap();
    assert!((a.treatment().coef + b.treatment().coef).abs() < 1e-10);
    assert!((a.treatment().se - b.treatment().se).abs() < 1e-10);
}

#[test]
fn cluster_labels_and_row_order_do_not_matter() {
    let ds = synthetic(400, 1.2, 3);
    let base = twfe_estimate(&ds, &spec()).unwrap();

    let mut relabeled = ds.clone();
    let g: Vec<f64> = ds.column("g").unwrap().iter().map(|v| 1e6 - 7.0 * v).collect();
    relabeled.insert("g", g).unwrap();
    let r = twfe_estimate(&relabeled, &spec()).unwrap();
    assert!((r.treatment().se - base.treatment().se).abs() < 1e-12);

    let order: Vec<usize> = (0..ds.rows()).rev().collect();
    let names: Vec<String> = ds.names().map(String::from).collect();
    let shuffled = Dataset::from_columns(names.iter().map(|n| {
        let c = ds.column(n).unwrap();
        (n.clone(), order.iter().map(|&i| c[i]).collect::<Vec<f64>>())
    }))
    .unwrap();
    let r = twfe_estimate(&shuffled, &spec()).unwrap();
    assert!((r.treatment().coef - base.treatment().coef).abs() < 1e-10);
    assert!((r.treatment().se - base.treatment().se).abs() < 1e-10);
}

#[test]
fn known_coefficient_recovered() {
    let hits = (0..20)
        .filter(|&seed| {
            let r = twfe_estimate(&two_country(5_000, 2.0, seed), &two_country_spec()).unwrap();
            let t = r.treatment();
            (t.coef - 2.0).abs() <= 2.0 * t.se
        })
        .count();
    assert!(hits >= 19, "{hits}/20 within 2 SE");
}

/// Forty households per cell; with a handful per cell CR1 under-covers.
#[test]
fn placebo_event_paths_cover_zero() {
    let spec = EventSpec {
        base: two_country_spec(),
        group: "c".into(),
        time: "t".into(),
        reference: -1,
    };
    let runs = 200;
    let mut covered = vec![0usize; 12];
    for seed in 0..runs {
        let r = event_study(&two_country(200, 0.0, 1000 + seed), &spec).unwrap();
        assert_eq!(r.path.len(), 12);
        for (k, e) in r.path.iter().enumerate() {
            covered[k] += (e.term.coef.abs() <= 2.0 * e.term.se) as usize;
        }
    }
    for (k, c) in covered.iter().enumerate() {
        assert!(*c as f64 >= 0.9 * runs as f64, "period index {k}: {c}/{runs}");
    }
}

#[test]
fn event_path_recovers_a_known_shape() {
    let mut ds = two_country(400, 0.0, 5);
    let t = ds.column("t").unwrap().to_vec();
    let c = ds.column("c").unwrap().to_vec();
    let truth = |k: f64| if k >= 0.0 { 0.5 + 0.1 * k } else { 0.0 };
    let y: Vec<f64> = ds
        .column("y")
        .unwrap()
        .iter()
        .zip(t.iter().zip(&c))
        .map(|(y, (t, c))| y + c * truth(*t))
        .collect();
    ds.insert("y", y).unwrap();
    let spec = EventSpec {
        base: two_country_spec(),
        group: "c".into(),
        time: "t".into(),
        reference: -1,
    };
    let r = event_study(&ds, &spec).unwrap();
    let misses = r
        .path
        .iter()
        .filter(|e| (e.term.coef - truth(e.period as f64)).abs() > 3.0 * e.term.se)
        .count();
    assert_eq!(misses, 0, "{:?}", r.path);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weight_scale_is_irrelevant(scale in 1e-3f64..1e3, seed in 0u64..1000) {
        let ds = synthetic(200, 1.0, seed);
        let a = twfe_estimate(&ds, &spec()).unwrap();
        let mut scaled = ds.clone();
        scaled.insert("w", ds.column("w").unwrap().iter().map(|w| w * scale).collect()).unwrap();
        let b = twfe_estimate(&scaled, &spec()).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            prop_assert!((x.coef - y.coef).abs() <= 1e-10 * x.coef.abs().max(1.0));
            prop_assert!((x.se - y.se).abs() <= 1e-10 * x.se.max(1.0));
        }
    }

    #[test]
    fn interval_is_coefficient_plus_minus_1_96_se(seed in 0u64..1000) {
        let r = twfe_estimate(&synthetic(120, 0.5, seed), &spec()).unwrap();
        for t in &r.terms {
            prop_assert!(t.se > 0.0);
            prop_assert!((t.ci_high - t.coef - 1.96 * t.se).abs() < 1e-12 * t.se.max(1.0));
            prop_assert!((t.coef - t.ci_low - 1.96 * t.se).abs() < 1e-12 * t.se.max(1.0));
        }
    }

    #[test]
    fn difference_test_is_antisymmetric(c1 in -5f64..5.0, c2 in -5f64..5.0, s1 in 0.01f64..2.0, s2 in 0.01f64..2.0) {
        let a = segmkt::econometrics::t_difference(c1, s1, c2, s2).unwrap();
        let b = segmkt::econometrics::t_difference(c2, s2, c1, s1).unwrap();
        prop_assert_eq!(a, -b);
        prop_assert!((a - (c1 - c2) / (s1 * s1 + s2 * s2).sqrt()).abs() < 1e-15 * a.abs().max(1.0));
    }
}
