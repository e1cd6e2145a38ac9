use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::params::ProductivitySpec;
use crate::error::ParamError;

/// Lower and upper quantiles that bound the discretized support.
pub const TAIL_QUANTILE: f64 = 1e-4;

/// A cutoff in productivity space. Matches at or above an interior cutoff
/// survive; the two corners stand for "always survive" and "never survive".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "z", rename_all = "snake_case")]
pub enum Threshold {
    /// Below the lowest node: nobody separates.
    BelowSupport,
    Interior(f64),
    /// Above the highest node: no match is viable.
    AboveSupport,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::Interior(z) => Some(z),
            _ => None,
        }
    }

    /// Position on the real line for ordering purposes.
    pub fn position(self) -> f64 {
        match self {
            Threshold::BelowSupport => f64::NEG_INFINITY,
            Threshold::Interior(z) => z,
            Threshold::AboveSupport => f64::INFINITY,
        }
    }

    pub fn max(self, other: Threshold) -> Threshold {
        if other.position() > self.position() {
            other
        } else {
            self
        }
    }

    /// Numeric form for reports: the corners map to the support ends.
    pub fn clamp_to(self, grid: &ProductivityGrid) -> f64 {
        match self {
            Threshold::BelowSupport => grid.z_min(),
            Threshold::Interior(z) => z,
            Threshold::AboveSupport => grid.z_max(),
        }
    }
}

/// Discretized productivity distribution: quantile-spaced nodes, each
/// carrying the probability mass of its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductivityGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<f64>,
}

impl ProductivityGrid {
    /// Builds a grid from explicit nodes and cell masses. Cell edges sit at
    /// the midpoints between nodes and at the two end nodes.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self, ParamError> {
        if nodes.len() < 2 || nodes.len() != weights.len() {
            return Err(ParamError::new("grid_size", "need >= 2 nodes with one weight each"));
        }
        if nodes.windows(2).any(|p| !(p[1] > p[0])) || nodes.iter().any(|z| !z.is_finite()) {
            return Err(ParamError::new("grid_size", "nodes must be finite and strictly increasing"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ParamError::new("grid_size", "weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ParamError::new("grid_size", format!("weights sum to {total}, not 1")));
        }
        let n = nodes.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(nodes[0]);
        edges.extend(nodes.windows(2).map(|p| 0.5 * (p[0] + p[1])));
        edges.push(nodes[n - 1]);
        Ok(Self {
            nodes,
            weights,
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell boundaries, `len() + 1` entries.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn z_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn z_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        dot(&self.weights, f)
    }

    /// Share of each cell lying at or above the threshold, splitting the
    /// boundary cell linearly.
    pub fn survival_into(&self, t: Threshold, out: &mut [f64]) {
        match t {
            Threshold::BelowSupport => out.fill(1.0),
            Threshold::AboveSupport => out.fill(0.0),
            Threshold::Interior(x) => {
                for (i, s) in out.iter_mut().enumerate() {
                    let lo = self.edges[i];
                    let hi = self.edges[i + 1];
                    *s = if x <= lo {
                        1.0
                    } else if x >= hi {
                        0.0
                    } else {
                        (hi - x) / (hi - lo)
                    };
                }
            }
        }
    }

    pub fn survival(&self, t: Threshold) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.survival_into(t, &mut out);
        out
    }

    /// Discretized F at a threshold: probability mass strictly below it.
    pub fn mass_below(&self, t: Threshold) -> f64 {
        let s = self.survival(t);
        self.weights.iter().zip(&s).map(|(w, s)| w * (1.0 - s)).sum()
    }

    /// `∫_{z >= t} h(z) dF`, with `h` given at the nodes.
    pub fn integrate_above(&self, t: Threshold, h: &[f64]) -> f64 {
        let s = self.survival(t);
        self.weights
            .iter()
            .zip(&s)
            .zip(h)
            .map(|((w, s), h)| w * s * h)
            .sum()
    }

    /// Linear interpolation of node values at `z`, flat outside the support.
    pub fn interpolate(&self, values: &[f64], z: f64) -> f64 {
        let n = self.nodes.len();
        if z <= self.nodes[0] {
            return values[0];
        }
        if z >= self.nodes[n - 1] {
            return values[n - 1];
        }
        let i = self.nodes.partition_point(|&x| x <= z);
        let (z0, z1) = (self.nodes[i - 1], self.nodes[i]);
        let t = (z - z0) / (z1 - z0);
        values[i - 1] + t * (values[i] - values[i - 1])
    }

    /// Index of the node whose cell contains `z`.
    pub fn cell_of(&self, z: f64) -> usize {
        let i = self.edges.partition_point(|&e| e <= z);
        i.saturating_sub(1).min(self.nodes.len() - 1)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quantile-spaced discretization of `spec` with `n` nodes.
pub fn build_grid(spec: &ProductivitySpec, n: usize) -> Result<ProductivityGrid, ParamError> {
    spec.validate()?;
    if n < 3 {
        return Err(ParamError::new("grid_size", "need at least 3 nodes"));
    }
    let step = (1.0 - 2.0 * TAIL_QUANTILE) / (n - 1) as f64;
    let quantiles: Vec<f64> = (0..n).map(|i| TAIL_QUANTILE + step * i as f64).collect();

    let (nodes, cdf): (Vec<f64>, Box<dyn Fn(f64) -> f64>) = match *spec {
        ProductivitySpec::Lognormal { location, scale } => {
            let std = Normal::new(0.0, 1.0).expect("standard normal");
            let nodes = quantiles
                .iter()
                .map(|&q| (location + scale * std.inverse_cdf(q)).exp())
                .collect();
            (
                nodes,
                Box::new(move |x: f64| std.cdf((x.ln() - location) / scale)),
            )
        }
        ProductivitySpec::Uniform { lower, upper } => {
            let nodes = quantiles.iter().map(|&q| lower + q * (upper - lower)).collect();
            (
                nodes,
                Box::new(move |x: f64| ((x - lower) / (upper - lower)).clamp(0.0, 1.0)),
            )
        }
    };

    let mut weights = Vec::with_capacity(n);
    let mut prev = 0.0;
    for i in 0..n - 1 {
        let f = cdf(0.5 * (nodes[i] + nodes[i + 1]));
        weights.push(f - prev);
        prev = f;
    }
    weights.push(1.0 - prev);
    // renormalize away accumulated rounding
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    ProductivityGrid::from_parts(nodes, weights)
}

/// Locates where a non-decreasing vector first reaches `target`, linearly
/// interpolating between the bracketing nodes.
pub fn crossing(grid: &ProductivityGrid, values: &[f64], target: f64) -> Threshold {
    let n = values.len();
    if values[0] >= target {
        return Threshold::BelowSupport;
    }
    if values[n - 1] < target {
        return Threshold::AboveSupport;
    }
    let i = values.partition_point(|&v| v < target);
    let z = grid.nodes();
    let (v0, v1) = (values[i - 1], values[i]);
    let t = (target - v0) / (v1 - v0);
    Threshold::Interior(z[i - 1] + t * (z[i] - z[i - 1]))
}
