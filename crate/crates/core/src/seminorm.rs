//! Discrete magnetic fractional seminorms and the inequality checkers built on
//! them.

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{BoundingBox, Grid, PairRegion, SubsetMask};
use crate::error::{Error, Result};
use crate::fields::{lp_norm, Exponent, GridFunction, VectorField};
use crate::pairs::{abs_pow, ordered_sum};

/// `(s, p, A)` of a seminorm evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct SeminormParams {
    pub s: f64,
    pub p: f64,
    pub field: VectorField,
}

impl SeminormParams {
    pub fn new(s: f64, p: f64, field: VectorField) -> Result<Self> {
        check_s(s)?;
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid("p", format!("p must lie in [1, inf), got {p}")));
        }
        Ok(SeminormParams { s, p, field })
    }

    /// The plain (non-magnetic) seminorm on a box.
    pub fn plain(s: f64, p: f64, bbox: BoundingBox) -> Result<Self> {
        SeminormParams::new(s, p, VectorField::zero(bbox))
    }

    pub fn with_field(&self, field: VectorField) -> Self {
        SeminormParams { field, ..self.clone() }
    }
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("s", format!("s must lie in (0, 1), got {s}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeminormBreakdown {
    pub s: f64,
    pub p: f64,
    pub field: String,
    pub region: String,
    /// `value_p^{1/p}`.
    pub value: f64,
    pub value_p: f64,
    /// Off-diagonal member pairs actually summed.
    pub pair_count: u64,
}

/// `[f]^p` over `H`, diagonal excluded.
pub fn magnetic_seminorm(f: &GridFunction, params: &SeminormParams, region: &PairRegion) -> Result<SeminormBreakdown> {
    let grid = f.grid();
    region.check_grid(grid)?;
    if params.field.bounding_box() != grid.bounding_box() {
        params.field.check_grid(grid)?;
    }
    let value_p = seminorm_value_p(grid, f.values(), params.s, params.p, &params.field, region);
    let pair_count = off_diagonal_members(region);
    Ok(SeminormBreakdown {
        s: params.s,
        p: params.p,
        field: params.field.describe(),
        region: region.describe(),
        value: value_p.powf(1.0 / params.p),
        value_p,
        pair_count,
    })
}

fn off_diagonal_members(region: &PairRegion) -> u64 {
    let diag = match region {
        PairRegion::Full { n } => *n,
        PairRegion::Product(a, b) => (0..a.len()).filter(|&i| a.contains(i) && b.contains(i)).count(),
        PairRegion::ComplementOfProduct(m) => m.len() - m.count(),
    };
    (region.member_count() - diag) as u64
}

/// The raw pair sum, evaluated without storing any pair data.
pub(crate) fn seminorm_value_p(
    grid: &Grid,
    f: &[Complex64],
    s: f64,
    p: f64,
    field: &VectorField,
    region: &PairRegion,
) -> f64 {
    let expo = -(grid.dim() as f64 + s * p);
    let centers = grid.centers();
    let vols = grid.volumes();
    let zero = field.is_zero();
    ordered_sum(grid.len(), |i| {
        if !region.row_possible(i) {
            return 0.0;
        }
        let xi = centers[i];
        let fi = f[i];
        let mut acc = 0.0;
        for (j, xj) in centers.iter().enumerate() {
            if j == i || !region.contains(i, j) {
                continue;
            }
            let d = if zero {
                fi - f[j]
            } else {
                fi - Complex64::from_polar(1.0, field.phase(&xi, xj)) * f[j]
            };
            let num = abs_pow(d, p);
            if num == 0.0 {
                continue;
            }
            let r = (xi[0] - xj[0]).hypot(xi[1] - xj[1]);
            acc += num * r.powf(expo) * vols[j];
        }
        acc * vols[i]
    })
}

/// `min_{(i,j)} |e^{-iθ_ij} f_i - f_j| - ||f_i| - |f_j||` over the sampled pairs.
pub fn diamagnetic_gap(f: &GridFunction, field: &VectorField, pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("sample_pairs", "empty pair sample"));
    }
    let c = f.grid().centers();
    let v = f.values();
    let mut gap = f64::INFINITY;
    for &(i, j) in pairs {
        if i >= v.len() || j >= v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                got: i.max(j) + 1,
            });
        }
        let theta = field.phase(&c[i], &c[j]);
        let lhs = (Complex64::from_polar(1.0, -theta) * v[i] - v[j]).norm();
        gap = gap.min(lhs - (v[i].norm() - v[j].norm()).abs());
    }
    Ok(gap)
}

/// Both sides of the Hölder comparison between two seminorm orders.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingCheck {
    /// `[f]^r` at order `s1`.
    pub lhs: f64,
    /// `([f]^p at s2)^{r/p} · (Σ |x_i-x_j|^α v_i v_j)^{(p-r)/p}`.
    pub rhs: f64,
    /// `C_R · ([f]^p at s2)^{r/p}` with the closed-form bound of the kernel sum.
    pub bound_rhs: f64,
    pub kernel_sum: f64,
    pub kernel_bound: f64,
    pub holds: bool,
    pub bound_holds: bool,
}

/// Exponent `α = (Nr + s2 r p - Np - s1 r p) / (p - r)` of the Hölder factor.
pub fn embedding_exponent(n: usize, s1: f64, s2: f64, r: f64, p: f64) -> f64 {
    let nn = n as f64;
    (nn * r + s2 * r * p - nn * p - s1 * r * p) / (p - r)
}

/// Closed-form upper bound for `Σ_{i≠j} |x_i-x_j|^α v_i v_j` on a set of
/// diameter below `R`: `|Ω| ω R^{α+N} / (α+N)`, with `α + N = (s2-s1)rp/(p-r)`.
pub fn embedding_kernel_bound(grid: &Grid, s1: f64, s2: f64, r: f64, p: f64) -> f64 {
    let big_r = grid.diameter_bound();
    let e = (s2 - s1) * r * p / (p - r);
    grid.total_volume() * grid.unit_sphere_measure() * big_r.powf(e) / e
}

pub fn embedding_check(
    f: &GridFunction,
    s1: f64,
    s2: f64,
    r: f64,
    p: f64,
    field: &VectorField,
    region: &PairRegion,
) -> Result<EmbeddingCheck> {
    check_s(s1)?;
    check_s(s2)?;
    if s1 >= s2 {
        return Err(Error::invalid("s1", format!("need s1 < s2, got {s1} >= {s2}")));
    }
    if !(r >= 1.0 && r < p && p.is_finite()) {
        return Err(Error::invalid("r", format!("need 1 <= r < p < inf, got r={r}, p={p}")));
    }
    let grid = f.grid();
    region.check_grid(grid)?;
    let lhs = seminorm_value_p(grid, f.values(), s1, r, field, region);
    let top = seminorm_value_p(grid, f.values(), s2, p, field, region);

    let alpha = embedding_exponent(grid.dim(), s1, s2, r, p);
    let c = grid.centers();
    let vols = grid.volumes();
    let kernel_sum = ordered_sum(grid.len(), |i| {
        if !region.row_possible(i) {
            return 0.0;
        }
        let mut acc = 0.0;
        for j in 0..c.len() {
            if j != i && region.contains(i, j) {
                acc += (c[i][0] - c[j][0]).hypot(c[i][1] - c[j][1]).powf(alpha) * vols[j];
            }
        }
        acc * vols[i]
    });
    let kernel_bound = embedding_kernel_bound(grid, s1, s2, r, p);
    let holder = (p - r) / p;
    let scale = top.powf(r / p);
    let rhs = scale * kernel_sum.powf(holder);
    let bound_rhs = scale * kernel_bound.powf(holder);
    Ok(EmbeddingCheck {
        lhs,
        rhs,
        bound_rhs,
        kernel_sum,
        kernel_bound,
        holds: lhs <= rhs * (1.0 + 1e-10),
        bound_holds: lhs <= bound_rhs * (1.0 + 1e-10),
    })
}

/// The two-sided comparison between plain and magnetic seminorms.
#[derive(Clone, Debug, Serialize)]
pub struct NormEquivalence {
    /// `[f]^p` without field.
    pub lhs_plain: f64,
    /// `2^{p-1}([f]_A^p + c ‖f‖_p^p)`.
    pub rhs_combo: f64,
    /// `[f]_A^p`.
    pub lhs_mag: f64,
    /// `2^{p-1}([f]^p + c ‖f‖_p^p)`.
    pub rhs_combo2: f64,
    pub constant: f64,
    pub holds: bool,
}

/// `c = 2^p ω / (sp) + ‖A‖_∞^p ω / (p - sp)`: the bound on
/// `∫ min(2, ‖A‖|h|)^p |h|^{-(N+sp)} dh`.
pub fn norm_equivalence_constant(grid: &Grid, s: f64, p: f64, field: &VectorField) -> f64 {
    let omega = grid.unit_sphere_measure();
    2f64.powf(p) * omega / (s * p) + field.sup_bound().powf(p) * omega / (p - s * p)
}

pub fn norm_equivalence_check(f: &GridFunction, s: f64, p: f64, field: &VectorField) -> Result<NormEquivalence> {
    let params = SeminormParams::new(s, p, field.clone())?;
    let grid = f.grid();
    field.check_grid(grid)?;
    let full = PairRegion::full(grid.len());
    let zero = VectorField::zero(field.bounding_box());
    let plain = seminorm_value_p(grid, f.values(), s, p, &zero, &full);
    let mag = seminorm_value_p(grid, f.values(), s, p, &params.field, &full);
    let c = norm_equivalence_constant(grid, s, p, field);
    let fp = lp_norm(f, Exponent::Finite(p)).powf(p);
    let k = 2f64.powf(p - 1.0);
    let rhs_combo = k * (mag + c * fp);
    let rhs_combo2 = k * (plain + c * fp);
    let slack = 1.0 + 1e-9;
    Ok(NormEquivalence {
        lhs_plain: plain,
        rhs_combo,
        lhs_mag: mag,
        rhs_combo2,
        constant: c,
        holds: plain <= rhs_combo * slack && mag <= rhs_combo2 * slack,
    })
}

/// Exact column-level kernel for functions of `x1` alone on a full
/// rectangle grid:
///
/// ```text
/// K(k) = v² Σ_{m=-(ny-1)}^{ny-1} (ny - |m|) ((k hx)² + (m hy)²)^{-(2+sp)/2}
/// ```
///
/// so that the 2D pair sum equals `Σ_{k≠l} |F_k - F_l|^p K(|k-l|)` over columns.
/// Pairs within one column cancel because `F_k - F_k = 0`.
#[derive(Clone, Debug)]
pub struct ReducedKernel {
    lo: f64,
    hx: f64,
    s: f64,
    p: f64,
    kernel: Vec<f64>,
}

impl ReducedKernel {
    /// Built from the rectangle's x1-range, x2-length and resolution only; the
    /// 2D grid is never materialized.
    pub fn new(bbox: BoundingBox, n: [usize; 2], s: f64, p: f64) -> Result<Self> {
        check_s(s)?;
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid("p", format!("p must lie in [1, inf), got {p}")));
        }
        let [nx, ny] = n;
        if nx < 2 || ny < 2 {
            return Err(Error::invalid("n", "reduced kernel needs at least 2 cells per axis"));
        }
        let hx = (bbox.hi[0] - bbox.lo[0]) / nx as f64;
        let hy = (bbox.hi[1] - bbox.lo[1]) / ny as f64;
        let v = hx * hy;
        let expo = -(2.0 + s * p) / 2.0;
        let kernel: Vec<f64> = (0..nx)
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let dx2 = (k as f64 * hx).powi(2);
                let mut acc = ny as f64 * dx2.powf(expo);
                for m in 1..ny {
                    let w = (ny - m) as f64;
                    acc += 2.0 * w * (dx2 + (m as f64 * hy).powi(2)).powf(expo);
                }
                v * v * acc
            })
            .collect();
        Ok(ReducedKernel {
            lo: bbox.lo[0],
            hx,
            s,
            p,
            kernel,
        })
    }

    /// The kernel for a fully active 2D rectangle grid.
    pub fn from_grid(grid: &Grid, s: f64, p: f64) -> Result<Self> {
        let n = grid.n_per_axis();
        if grid.dim() != 2 || grid.len() != n[0] * n[1] {
            return Err(Error::invalid("grid", "reduced kernel needs a fully active 2D rectangle grid"));
        }
        ReducedKernel::new(grid.bounding_box(), [n[0], n[1]], s, p)
    }

    pub fn columns(&self) -> usize {
        self.kernel.len()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `K(k)` for column offset `k` (zero at `k = 0`).
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn column_center(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.hx
    }

    /// Samples a profile at the column centers.
    pub fn column_values(&self, profile: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        (0..self.columns()).map(|k| profile(self.column_center(k))).collect()
    }

    /// Column mask from a predicate on the column's x1-center.
    pub fn column_mask(&self, pred: impl Fn(f64) -> bool) -> SubsetMask {
        SubsetMask::new((0..self.columns()).map(|k| pred(self.column_center(k))).collect())
    }

    /// Column values of a grid function constant along x2; fails otherwise.
    pub fn collapse(&self, f: &GridFunction) -> Result<Vec<Complex64>> {
        let grid = f.grid();
        let ny = grid.n_per_axis()[1];
        if grid.n_per_axis()[0] != self.columns() || grid.len() != self.columns() * ny {
            return Err(Error::GridMismatch("grid does not match the reduced kernel".into()));
        }
        let v = f.values();
        let mut out = Vec::with_capacity(self.columns());
        for col in v.chunks(ny) {
            if col.iter().any(|z| *z != col[0]) {
                return Err(Error::invalid("f", "function varies along x2"));
            }
            out.push(col[0]);
        }
        Ok(out)
    }

    /// `Σ_{(k,l) ∈ H, k≠l} |F_k - F_l|^p K(|k-l|)` with `H` a region over columns.
    pub fn value_p(&self, cols: &[Complex64], region: &PairRegion) -> Result<f64> {
        if cols.len() != self.columns() || region.len() != self.columns() {
            return Err(Error::DimensionMismatch {
                expected: self.columns(),
                got: cols.len().min(region.len()),
            });
        }
        let p = self.p;
        Ok(ordered_sum(cols.len(), |k| {
            if !region.row_possible(k) {
                return 0.0;
            }
            let mut acc = 0.0;
            for l in 0..cols.len() {
                if l == k || !region.contains(k, l) {
                    continue;
                }
                let num = abs_pow(cols[k] - cols[l], p);
                if num != 0.0 {
                    acc += num * self.kernel[k.abs_diff(l)];
                }
            }
            acc
        }))
    }
}
