//! Weighted within-group demeaning over several fixed-effect dimensions.

use std::collections::HashMap;

/// Row-to-group map for one fixed-effect dimension.
#[derive(Debug, Clone)]
pub struct Grouping {
    pub index: Vec<usize>,
    pub levels: usize,
}

impl Grouping {
    /// Groups rows by exact value.
    pub fn from_values(values: &[f64]) -> Self {
        let mut map: HashMap<u64, usize> = HashMap::new();
        let index = values
            .iter()
            .map(|v| {
                let next = map.len();
                *map.entry(v.to_bits()).or_insert(next)
            })
            .collect();
        Self {
            index,
            levels: map.len(),
        }
    }
}

/// Number of connected components of the bipartite graph linking the levels
/// of two groupings that share a row. Each component removes one redundant
/// dummy from the joint design.
pub fn components(a: &Grouping, b: &Grouping) -> usize {
    let mut parent: Vec<usize> = (0..a.levels + b.levels).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (&i, &j) in a.index.iter().zip(&b.index) {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, a.levels + j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    (0..parent.len()).filter(|&x| find(&mut parent, x) == x).count()
}

/// Rank of the dummy design spanned by all fixed effects (intercept included).
pub fn absorbed_rank(groups: &[Grouping]) -> usize {
    match groups {
        [] => 1,
        [g] => g.levels,
        [a, b, rest @ ..] => {
            // exact for two dimensions; each further one is assumed to add
            // one redundancy only
            a.levels + b.levels - components(a, b) + rest.iter().map(|g| g.levels - 1).sum::<usize>()
        }
    }
}

/// Outcome of demeaning one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub sweeps: usize,
    pub change: f64,
    pub converged: bool,
}

/// Alternating projections: subtract weighted group means for each dimension
/// in turn until a full sweep moves no entry by more than `tol` (relative to
/// the column's scale).
pub fn demean(col: &mut [f64], weights: &[f64], groups: &[Grouping], tol: f64, max_sweeps: usize) -> Convergence {
    if groups.is_empty() {
        // plain intercept
        let (num, den) = col
            .iter()
            .zip(weights)
            .fold((0.0, 0.0), |(n, d), (x, w)| (n + w * x, d + w));
        let m = num / den;
        col.iter_mut().for_each(|x| *x -= m);
        return Convergence {
            sweeps: 1,
            change: 0.0,
            converged: true,
        };
    }
    let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let wsum: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mut s = vec![0.0; g.levels];
            for (&k, w) in g.index.iter().zip(weights) {
                s[k] += w;
            }
            s
        })
        .collect();
    let mut change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        change = 0.0;
        for (g, ws) in groups.iter().zip(&wsum) {
            let mut sums = vec![0.0; g.levels];
            for ((&k, w), x) in g.index.iter().zip(weights).zip(col.iter()) {
                sums[k] += w * x;
            }
            for (s, w) in sums.iter_mut().zip(ws) {
                *s /= w;
                change = change.max(s.abs());
            }
            for (&k, x) in g.index.iter().zip(col.iter_mut()) {
                *x -= sums[k];
            }
        }
        if change <= tol * scale {
            return Convergence {
                sweeps: sweep,
                change,
                converged: true,
            };
        }
        // a single dimension is exact after one pass
        if groups.len() == 1 {
            return Convergence {
                sweeps: sweep,
                change: 0.0,
                converged: true,
            };
        }
    }
    Convergence {
        sweeps: max_sweeps,
        change,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grouping_by_value() {
        let g = Grouping::from_values(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(g.levels, 3);
        assert_eq!(g.index, vec![0, 1, 0, 2]);
    }

    #[test]
    fn components_of_disconnected_design() {
        // rows link (a0,b0), (a1,b1): two separate blocks
        let a = Grouping::from_values(&[0.0, 1.0]);
        let b = Grouping::from_values(&[0.0, 1.0]);
        assert_eq!(components(&a, &b), 2);
        assert_eq!(absorbed_rank(&[a, b]), 2);
        let a = Grouping::from_values(&[0.0, 0.0, 1.0, 1.0]);
        let b = Grouping::from_values(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(absorbed_rank(&[a, b]), 3);
    }

    #[test]
    fn two_way_demeaning_of_additive_column_vanishes() {
        let c = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
        let mut col: Vec<f64> = c.iter().zip(&t).map(|(c, t)| 3.0 * c - 2.0 * t + 5.0).collect();
        let w = [1.0, 2.0, 1.0, 3.0, 1.0, 0.5];
        let groups = [Grouping::from_values(&c), Grouping::from_values(&t)];
        let conv = demean(&mut col, &w, &groups, 1e-12, 10_000);
        assert!(conv.converged);
        for x in col {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn intercept_only_removes_weighted_mean() {
        let mut col = vec![1.0, 3.0];
        demean(&mut col, &[3.0, 1.0], &[], 1e-12, 10);
        assert_abs_diff_eq!(col[0], -0.5);
        assert_abs_diff_eq!(col[1], 1.5);
    }
}
