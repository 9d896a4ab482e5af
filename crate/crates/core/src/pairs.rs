//! Deterministic row-parallel pair sums.
//!
//! Every O(n²) sum is split into per-row partials computed sequentially in `j`
//! order; the partials are then added in `i` order. The result is therefore
//! bitwise independent of the number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{Grid, PairRegion};
use crate::fields::VectorField;

/// `Σ_i row(i)` with rows evaluated in parallel and combined in index order.
pub(crate) fn ordered_sum(n: usize, row: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let partials: Vec<f64> = (0..n).into_par_iter().map(row).collect();
    partials.iter().sum()
}

/// `|z|^p`, with the common `p = 2` case free of `powf`.
#[inline]
pub(crate) fn abs_pow(z: Complex64, p: f64) -> f64 {
    let r2 = z.norm_sqr();
    if p == 2.0 {
        r2
    } else {
        r2.powf(0.5 * p)
    }
}

/// Dense per-pair data for a fixed `(grid, s, p, A, H)`: the weights
/// `w_ij = |x_i - x_j|^{-(N+sp)} v_i v_j` (zero on the diagonal and outside
/// `H`) and the unimodular factors `e^{iθ_ij}`.
///
/// Used by the optimizers, which evaluate the same pair sum many times.
#[derive(Clone, Debug)]
pub(crate) struct PairTable {
    n: usize,
    weight: Vec<f64>,
    phase: Option<Vec<Complex64>>,
}

impl PairTable {
    pub(crate) fn new(grid: &Grid, s: f64, p: f64, field: &VectorField, region: &PairRegion) -> Self {
        let n = grid.len();
        let expo = -(grid.dim() as f64 + s * p);
        let centers = grid.centers();
        let vols = grid.volumes();
        let weight: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let xi = centers[i];
                (0..n).map(move |j| {
                    if i == j || !region.contains(i, j) {
                        return 0.0;
                    }
                    let xj = centers[j];
                    let d = (xi[0] - xj[0]).hypot(xi[1] - xj[1]);
                    d.powf(expo) * vols[i] * vols[j]
                })
            })
            .collect();
        let phase = if field.is_zero() {
            None
        } else {
            Some(
                (0..n)
                    .into_par_iter()
                    .flat_map_iter(|i| {
                        let xi = centers[i];
                        (0..n).map(move |j| Complex64::from_polar(1.0, field.phase(&xi, &centers[j])))
                    })
                    .collect(),
            )
        };
        PairTable { n, weight, phase }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn diff(&self, f: &[Complex64], i: usize, j: usize) -> Complex64 {
        match &self.phase {
            None => f[i] - f[j],
            Some(ph) => f[i] - ph[i * self.n + j] * f[j],
        }
    }

    /// `Σ_{i≠j} w_ij |f_i - e^{iθ_ij} f_j|^p`.
    pub(crate) fn value_p(&self, f: &[Complex64], p: f64) -> f64 {
        ordered_sum(self.n, |i| {
            let row = &self.weight[i * self.n..(i + 1) * self.n];
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    acc += w * abs_pow(self.diff(f, i, j), p);
                }
            }
            acc
        })
    }

    /// Value and gradient `g_i = ∂/∂Re f_i + i ∂/∂Im f_i` of the pair sum.
    ///
    /// Requires a symmetric region, so that the `(j, i)` term contributes the
    /// same amount as the `(i, j)` term: `g_i = 2p Σ_j w_ij |d_ij|^{p-2} d_ij`.
    /// At `p = 1` the subgradient `d/|d|` (zero where `d = 0`) is returned.
    pub(crate) fn value_and_grad(&self, f: &[Complex64], p: f64, grad: &mut [Complex64]) -> f64 {
        let rows: Vec<(f64, Complex64)> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = &self.weight[i * self.n..(i + 1) * self.n];
                let mut acc = 0.0;
                let mut g = Complex64::new(0.0, 0.0);
                for (j, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let d = self.diff(f, i, j);
                    let r2 = d.norm_sqr();
                    if p == 2.0 {
                        acc += w * r2;
                        g += d * w;
                    } else if r2 > 0.0 {
                        let rp2 = r2.powf(0.5 * p - 1.0);
                        acc += w * rp2 * r2;
                        g += d * (w * rp2);
                    }
                }
                (acc, g * (2.0 * p))
            })
            .collect();
        let mut total = 0.0;
        for (i, (acc, g)) in rows.into_iter().enumerate() {
            total += acc;
            grad[i] = g;
        }
        total
    }
}
