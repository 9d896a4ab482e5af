//! Eigenpairs of the regional operator, the deflated Rayleigh minimization that
//! defines them iteratively, and gap reports.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::RegionalOperator;

/// Relative tolerance below which two eigenvalues count as one cluster.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Residual contract, relative to `‖L‖`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// The first `k` eigenpairs in ascending order.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub lambdas: Vec<f64>,
    /// Mass-orthonormal; largest-modulus entry real and positive.
    #[serde(skip)]
    pub vectors: Vec<Vec<Complex64>>,
    /// `‖Lφ_n - λ_n φ_n‖_m`.
    pub residuals: Vec<f64>,
    /// Largest eigenvalue of the full problem.
    pub lambda_max: f64,
    pub operator_norm: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// CSV with columns `n, lambda, residual` (1-based `n`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "lambda", "residual"])?;
        for (k, (l, r)) in self.lambdas.iter().zip(&self.residuals).enumerate() {
            out.serialize((k + 1, l, r))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Eigenvectors as a CSV matrix: one row per cell, columns `re_n, im_n`.
    pub fn write_vectors_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["cell_index".to_string()];
        for k in 1..=self.len() {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        out.write_record(&header)?;
        let n = self.vectors.first().map_or(0, Vec::len);
        for i in 0..n {
            let mut row = vec![i.to_string()];
            for v in &self.vectors {
                row.push(v[i].re.to_string());
                row.push(v[i].im.to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Rotate `v` so that its largest-modulus entry is real and positive.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    let Some(big) = v
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then(b.0.cmp(&a.0)))
        .map(|(_, z)| z)
    else {
        return;
    };
    if big.norm() == 0.0 {
        return;
    }
    let u = big.conj() / big.norm();
    for z in v.iter_mut() {
        *z *= u;
    }
}

/// First `k` eigenpairs from a full Hermitian decomposition.
pub fn eigensolve(op: &RegionalOperator, k: usize) -> Result<Spectrum> {
    let n = op.len();
    if k == 0 || k > n {
        return Err(Error::invalid("k", format!("need 1 <= k <= {n}, got {k}")));
    }
    let eig = op.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let scale = 1.0 / op.mass().sqrt();
    let norm_l = op.norm_estimate();

    let mut lambdas = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &idx in &order[..k] {
        let lambda = eig.eigenvalues[idx];
        let mut v: Vec<Complex64> = eig.eigenvectors.column(idx).iter().map(|z| z * scale).collect();
        fix_phase(&mut v);
        let lv = op.apply_values(&v);
        let r: Vec<Complex64> = lv.iter().zip(&v).map(|(a, b)| a - b * lambda).collect();
        let res = op.inner(&r, &r).re.sqrt();
        if !(res <= RESIDUAL_TOL * norm_l) {
            return Err(Error::Contract(format!(
                "eigenpair residual {res:e} exceeds {RESIDUAL_TOL:e}·‖L‖ = {:e}",
                RESIDUAL_TOL * norm_l
            )));
        }
        lambdas.push(lambda);
        vectors.push(v);
        residuals.push(res);
    }
    for a in 0..k {
        for b in 0..=a {
            let g = op.inner(&vectors[a], &vectors[b]);
            let want = if a == b { 1.0 } else { 0.0 };
            if (g - want).norm() > 1e-10 {
                return Err(Error::Contract(format!("eigenvectors {a}, {b} not orthonormal: {g}")));
            }
        }
    }
    Ok(Spectrum {
        lambdas,
        vectors,
        residuals,
        lambda_max: eig.eigenvalues[order[n - 1]],
        operator_norm: norm_l,
    })
}

#[derive(Clone, Debug)]
pub struct DeflatedEnergy {
    pub value: f64,
    /// Unit mass norm, mass-orthogonal to the known vectors.
    pub minimizer: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Settings for [`deflated_energy_with`].
#[derive(Clone, Copy, Debug)]
pub struct DeflationConfig {
    /// Stop once `‖r‖_m ≤ tol · ‖L‖`.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        DeflationConfig {
            tol: 1e-11,
            max_iters: 20_000,
            seed: 7,
        }
    }
}

/// `min ⟨Lf, f⟩_m` over unit `f` mass-orthogonal to `known`.
pub fn deflated_energy(op: &RegionalOperator, known: &[Vec<Complex64>]) -> Result<DeflatedEnergy> {
    deflated_energy_with(op, known, DeflationConfig::default())
}

/// Locally optimal block-free conjugate gradient: each step minimizes the
/// Rayleigh quotient over `span{x, r, p}`, all kept in the orthogonal
/// complement of `known`.
pub fn deflated_energy_with(op: &RegionalOperator, known: &[Vec<Complex64>], cfg: DeflationConfig) -> Result<DeflatedEnergy> {
    let n = op.len();
    if known.len() >= n {
        return Err(Error::invalid("known", "no room left in the orthogonal complement"));
    }
    for (a, u) in known.iter().enumerate() {
        if u.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.len() });
        }
        for (b, w) in known.iter().enumerate().take(a + 1) {
            let want = if a == b { 1.0 } else { 0.0 };
            if (op.inner(u, w) - want).norm() > 1e-8 {
                return Err(Error::invalid("known", "known vectors are not mass-orthonormal"));
            }
        }
    }

    let project = |v: &mut Vec<Complex64>| {
        for _ in 0..2 {
            for u in known {
                let c = op.inner(v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
        }
    };
    let norm = |v: &[Complex64]| op.inner(v, v).re.sqrt();
    let normalize = |v: &mut Vec<Complex64>| -> bool {
        let m = norm(v);
        if m <= f64::MIN_POSITIVE || !m.is_finite() {
            return false;
        }
        for z in v.iter_mut() {
            *z /= m;
        }
        true
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    project(&mut x);
    normalize(&mut x);

    let norm_l = op.norm_estimate();
    let tol = cfg.tol * norm_l;
    let mut lx = op.apply_values(&x);
    let mut p_dir: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
    let mut lambda = op.inner(&lx, &x).re;
    let mut res = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let mut r: Vec<Complex64> = lx.iter().zip(&x).map(|(a, b)| a - b * lambda).collect();
        project(&mut r);
        res = norm(&r);
        if res <= tol {
            break;
        }
        iterations += 1;

        // orthonormal basis of span{x, r, p}, with the operator applied to each
        let mut basis: Vec<Vec<Complex64>> = vec![x.clone()];
        let mut images: Vec<Vec<Complex64>> = vec![lx.clone()];
        let mut candidates = vec![r];
        if let Some((p, _)) = &p_dir {
            candidates.push(p.clone());
        }
        for mut c in candidates {
            for _ in 0..2 {
                for b in &basis {
                    let k = op.inner(&c, b);
                    for (ci, bi) in c.iter_mut().zip(b) {
                        *ci -= k * bi;
                    }
                }
            }
            project(&mut c);
            if norm(&c) > 1e-13 && normalize(&mut c) {
                images.push(op.apply_values(&c));
                basis.push(c);
            }
        }
        let m = basis.len();
        let raw = DMatrix::from_fn(m, m, |a, b| op.inner(&images[b], &basis[a]));
        let h = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                Complex64::new(raw[(a, a)].re, 0.0)
            } else {
                (raw[(a, b)] + raw[(b, a)].conj()) * 0.5
            }
        });
        let eig = h.symmetric_eigen();
        let lo = (0..m).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let c = eig.eigenvectors.column(lo);

        let mut new_x = vec![Complex64::new(0.0, 0.0); n];
        let mut new_lx = vec![Complex64::new(0.0, 0.0); n];
        let mut new_p = vec![Complex64::new(0.0, 0.0); n];
        let mut new_lp = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..m {
            for i in 0..n {
                new_x[i] += c[a] * basis[a][i];
                new_lx[i] += c[a] * images[a][i];
                if a > 0 {
                    new_p[i] += c[a] * basis[a][i];
                    new_lp[i] += c[a] * images[a][i];
                }
            }
        }
        let scale = norm(&new_x);
        for i in 0..n {
            new_x[i] /= scale;
            new_lx[i] /= scale;
        }
        x = new_x;
        // recompute Lx periodically so rounding in the recurrences cannot accumulate
        lx = if iterations % 50 == 0 { op.apply_values(&x) } else { new_lx };
        lambda = op.inner(&lx, &x).re;
        p_dir = Some((new_p, new_lp));
    }
    lx = op.apply_values(&x);
    lambda = op.inner(&lx, &x).re;
    fix_phase(&mut x);
    Ok(DeflatedEnergy {
        value: lambda,
        minimizer: x,
        iterations,
        residual: res,
        converged: res <= tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Gap {
    /// 1-based index of the lower eigenvalue.
    pub n: usize,
    pub lambda: f64,
    pub gap: f64,
    pub near_degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub gaps: Vec<Gap>,
    pub min_positive_gap: Option<f64>,
    pub degenerate: bool,
}

/// `λ_{n+1} - λ_n` for every consecutive pair; gaps below
/// `DEGENERACY_TOL · λ_max` are flagged.
pub fn gap_report(spec: &Spectrum) -> Result<GapReport> {
    if spec.len() < 2 {
        return Err(Error::invalid("k", "gap report needs at least two eigenvalues"));
    }
    let thresh = DEGENERACY_TOL * spec.lambda_max.abs();
    let gaps: Vec<Gap> = spec
        .lambdas
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let gap = w[1] - w[0];
            Gap {
                n: k + 1,
                lambda: w[0],
                gap,
                near_degenerate: gap < thresh,
            }
        })
        .collect();
    let min_positive_gap = gaps
        .iter()
        .filter(|g| !g.near_degenerate)
        .map(|g| g.gap)
        .min_by(f64::total_cmp);
    let degenerate = gaps.iter().any(|g| g.near_degenerate);
    Ok(GapReport {
        gaps,
        min_positive_gap,
        degenerate,
    })
}

/// Number of computed eigenvalues strictly below `bound`, with multiplicity.
pub fn count_below(spec: &Spectrum, bound: f64) -> usize {
    spec.lambdas.iter().filter(|&&l| l < bound).count()
}

/// Sine of the largest principal angle between two mass-orthonormal families
/// spanning subspaces of equal dimension.
pub fn subspace_sine(op: &RegionalOperator, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let m = DMatrix::from_fn(a.len(), b.len(), |i, j| op.inner(&b[j], &a[i]));
    let sv = m.svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    (1.0 - smin * smin).max(0.0).sqrt()
}
