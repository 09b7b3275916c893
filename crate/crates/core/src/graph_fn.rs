//! Sampled functions on a metric graph: per-edge uniform grids with external
//! edges truncated at a stated point.

use crate::error::{Error, Result};
use crate::graph::{EdgeRef, MetricGraph};
use crate::linalg::{cr, C64};

/// A function sampled on every edge of a graph with uniform per-edge steps.
/// Edges appear in the fixed row order (externals first, then internals).
#[derive(Debug, Clone)]
pub struct GraphFunction {
    /// Per-edge sample arrays including both endpoints.
    pub samples: Vec<Vec<C64>>,
    /// Per-edge grid step.
    pub steps: Vec<f64>,
    /// Per-edge domain length: a_i for internal edges, the truncation point
    /// for external ones.
    pub lengths: Vec<f64>,
    /// Time stamp of an evolution snapshot, if any.
    pub time: f64,
    pub method: &'static str,
}

impl GraphFunction {
    /// Sample `f(edge, x)` on uniform grids with roughly `points_per_unit`
    /// intervals per unit length; external edges run to `x_max`.
    pub fn sample(
        g: &MetricGraph,
        x_max: f64,
        points_per_unit: f64,
        mut f: impl FnMut(EdgeRef, f64) -> C64,
    ) -> Self {
        let mut samples = Vec::new();
        let mut steps = Vec::new();
        let mut lengths = Vec::new();
        for e in g.edges() {
            let len = g.length(e).unwrap_or(x_max);
            // even interval count, at least 8, so Simpson rules apply and
            // midpoints land on the grid
            let n = (((len * points_per_unit).ceil() as usize).max(8) + 1) & !1usize;
            let h = len / n as f64;
            samples.push((0..=n).map(|i| f(e, i as f64 * h)).collect());
            steps.push(h);
            lengths.push(len);
        }
        GraphFunction {
            samples,
            steps,
            lengths,
            time: 0.0,
            method: "sampled",
        }
    }

    pub fn zero_like(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.iter_mut().for_each(|z| *z = cr(0.0));
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.samples.len()
    }

    /// Value at a grid point.
    pub fn value(&self, edge: usize, i: usize) -> C64 {
        self.samples[edge][i]
    }

    /// Linear interpolation at an arbitrary coordinate.
    pub fn interpolate(&self, edge: usize, x: f64) -> C64 {
        let h = self.steps[edge];
        let s = &self.samples[edge];
        let t = (x / h).clamp(0.0, (s.len() - 1) as f64);
        let i = (t.floor() as usize).min(s.len() - 2);
        let w = t - i as f64;
        s[i] * cr(1.0 - w) + s[i + 1] * cr(w)
    }

    /// L2 norm over the sampled graph (trapezoid rule).
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (s, &h) in self.samples.iter().zip(&self.steps) {
            let mut edge = 0.0;
            for (i, z) in s.iter().enumerate() {
                let w = if i == 0 || i == s.len() - 1 { 0.5 } else { 1.0 };
                edge += w * z.norm_sqr();
            }
            acc += h * edge;
        }
        acc.sqrt()
    }

    /// Integral of the function over the graph (trapezoid rule).
    pub fn integral(&self) -> C64 {
        let mut acc = cr(0.0);
        for (s, &h) in self.samples.iter().zip(&self.steps) {
            for (i, z) in s.iter().enumerate() {
                let w = if i == 0 || i == s.len() - 1 { 0.5 } else { 1.0 };
                acc += cr(w * h) * z;
            }
        }
        acc
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.samples
            .iter()
            .flatten()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Entrywise nonnegative up to a tolerance, with negligible imaginary
    /// parts.
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.samples
            .iter()
            .flatten()
            .all(|z| z.re >= -tol && z.im.abs() <= tol)
    }

    pub fn sup_dist(&self, other: &GraphFunction) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        worst
    }

    /// Largest disagreement of endpoint values among the edges meeting at
    /// each vertex (continuity defect).
    pub fn vertex_mismatch(&self, g: &MetricGraph) -> f64 {
        let mut worst = 0.0f64;
        for v in 0..g.vertex_count() {
            let mut values: Vec<C64> = Vec::new();
            for slot in g.incident_slots(v) {
                let edge_row = match slot.edge {
                    EdgeRef::External(e) => e,
                    EdgeRef::Internal(i) => g.n_external() + i,
                };
                let s = &self.samples[edge_row];
                let val = match slot.side {
                    crate::graph::Side::Minus => s[0],
                    crate::graph::Side::Plus => s[s.len() - 1],
                };
                values.push(val);
            }
            let mean = values.iter().sum::<C64>() / cr(values.len() as f64);
            for v in values {
                worst = worst.max((v - mean).norm());
            }
        }
        worst
    }

    pub fn check_compatible(&self, other: &GraphFunction) -> Result<()> {
        if self.samples.len() != other.samples.len()
            || self
                .samples
                .iter()
                .zip(&other.samples)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::InvalidArgument(
                "graph functions sampled on different grids".into(),
            ));
        }
        Ok(())
    }
}
