//! Ratio objectives `Φ(f) / N(f)^p` and their packed complex gradients.
//!
//! Gradients use the packing `g = ∂F/∂Re f + i ∂F/∂Im f`, so that the real
//! directional derivative along `d` is `Re Σ conj(g_i) d_i`.

use num_complex::Complex64;

use crate::domain::{Grid, PairRegion};
use crate::fields::{lp_norm_values, Exponent, VectorField};
use crate::pairs::PairTable;

/// `Σ |y_i|^q v_i` or, for `q = ∞` at temperature `τ`, the smoothed squared
/// maximum `M² = τ log Σ exp(|y_i|² / τ)`.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Denominator {
    Power(f64),
    SmoothMax(f64),
    /// Exact maximum; the gradient is the subgradient at the first maximizer.
    Max,
}

impl Denominator {
    pub(crate) fn for_exponent(q: Exponent, tau: Option<f64>) -> Self {
        match (q, tau) {
            (Exponent::Finite(q), _) => Denominator::Power(q),
            (Exponent::Infinity, Some(t)) => Denominator::SmoothMax(t),
            (Exponent::Infinity, None) => Denominator::Max,
        }
    }

    /// `e` with `N = S^e`.
    fn root(&self) -> f64 {
        match *self {
            Denominator::Power(q) => 1.0 / q,
            Denominator::SmoothMax(_) | Denominator::Max => 0.5,
        }
    }

    /// `S(y)` and, if requested, `∇S` written into `grad`.
    fn eval(&self, y: &[Complex64], vols: &[f64], grad: Option<&mut [Complex64]>) -> f64 {
        match *self {
            Denominator::Power(q) => {
                let mut s = 0.0;
                for (z, v) in y.iter().zip(vols) {
                    s += z.norm().powf(q) * v;
                }
                if let Some(g) = grad {
                    for ((gi, z), v) in g.iter_mut().zip(y).zip(vols) {
                        let r = z.norm();
                        *gi = if r > 0.0 { z * (q * r.powf(q - 2.0) * v) } else { Complex64::new(0.0, 0.0) };
                    }
                }
                s
            }
            Denominator::SmoothMax(tau) => {
                let m = y.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
                let w: Vec<f64> = y.iter().map(|z| ((z.norm_sqr() - m) / tau).exp()).collect();
                let total: f64 = w.iter().sum();
                if let Some(g) = grad {
                    for ((gi, z), wi) in g.iter_mut().zip(y).zip(&w) {
                        *gi = z * (2.0 * wi / total);
                    }
                }
                m + tau * total.ln()
            }
            Denominator::Max => {
                let (k, m) = y
                    .iter()
                    .map(|z| z.norm_sqr())
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, a)| if a > acc.1 { (i, a) } else { acc });
                if let Some(g) = grad {
                    g.iter_mut().for_each(|gi| *gi = Complex64::new(0.0, 0.0));
                    if !y.is_empty() {
                        g[k] = y[k] * 2.0;
                    }
                }
                m
            }
        }
    }
}

/// `J(f) = Φ(f) / N(Pf)^p` where `Φ` is the magnetic pair sum over the full
/// square and `P` is either the identity or `f ↦ f - Σ f_j g_j v_j`.
#[derive(Clone, Debug)]
pub struct RatioObjective {
    table: PairTable,
    vols: Vec<f64>,
    p: f64,
    q: Exponent,
    /// `w_j = g_j v_j` of the projection, if any.
    mean: Option<Vec<Complex64>>,
}

impl RatioObjective {
    /// The energy ratio `[f]_A^p / ‖f‖_q^p`.
    pub fn energy(grid: &Grid, s: f64, p: f64, q: Exponent, field: &VectorField) -> Self {
        RatioObjective {
            table: PairTable::new(grid, s, p, field, &PairRegion::full(grid.len())),
            vols: grid.volumes().to_vec(),
            p,
            q,
            mean: None,
        }
    }

    /// The reciprocal Poincaré–Wirtinger ratio `[f]^p / ‖f - ∫ f g‖_q^p`.
    pub fn poincare(grid: &Grid, s: f64, p: f64, q: Exponent, g: &[Complex64]) -> Self {
        let zero = VectorField::zero(grid.bounding_box());
        let w = g.iter().zip(grid.volumes()).map(|(gi, v)| gi * v).collect();
        RatioObjective {
            table: PairTable::new(grid, s, p, &zero, &PairRegion::full(grid.len())),
            vols: grid.volumes().to_vec(),
            p,
            q,
            mean: Some(w),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn project(&self, f: &[Complex64]) -> Vec<Complex64> {
        match &self.mean {
            None => f.to_vec(),
            Some(w) => {
                let m: Complex64 = f.iter().zip(w).map(|(a, b)| a * b).sum();
                f.iter().map(|z| z - m).collect()
            }
        }
    }

    /// `Φ(f)`, the pair sum.
    pub fn pair_sum(&self, f: &[Complex64]) -> f64 {
        self.table.value_p(f, self.p)
    }

    /// Exact `‖Pf‖_q`.
    pub fn norm(&self, f: &[Complex64]) -> f64 {
        lp_norm_values(&self.project(f), &self.vols, self.q)
    }

    /// The exact ratio `Φ^{1/p} / ‖Pf‖_q`, independent of any smoothing.
    pub fn ratio(&self, f: &[Complex64]) -> f64 {
        self.pair_sum(f).powf(1.0 / self.p) / self.norm(f)
    }

    /// `J(f)` with the exact denominator.
    pub fn value(&self, f: &[Complex64]) -> f64 {
        let denom = Denominator::for_exponent(self.q, None);
        let y = self.project(f);
        let s = denom.eval(&y, &self.vols, None);
        self.pair_sum(f) * s.powf(-self.p * denom.root())
    }

    /// `J(f)` and its packed gradient.
    pub fn value_grad(&self, f: &[Complex64], grad: &mut [Complex64]) -> f64 {
        self.value_grad_smoothed(f, grad, None)
    }

    /// As [`RatioObjective::value_grad`], with the `q = ∞` maximum replaced by
    /// its log-sum-exp smoothing at temperature `tau` when given.
    pub fn value_grad_smoothed(&self, f: &[Complex64], grad: &mut [Complex64], tau: Option<f64>) -> f64 {
        let denom = Denominator::for_exponent(self.q, tau);
        let n = f.len();
        let phi = self.table.value_and_grad(f, self.p, grad);
        let y = self.project(f);
        let mut gs = vec![Complex64::new(0.0, 0.0); n];
        let s = denom.eval(&y, &self.vols, Some(&mut gs));
        if let Some(w) = &self.mean {
            // chain rule through y = f - Σ w_j f_j
            let total: Complex64 = gs.iter().sum();
            for (gi, wi) in gs.iter_mut().zip(w) {
                *gi -= wi.conj() * total;
            }
        }
        let e = self.p * denom.root();
        let a = s.powf(-e);
        let b = e * phi * s.powf(-e - 1.0);
        for (gi, si) in grad.iter_mut().zip(&gs) {
            *gi = *gi * a - si * b;
        }
        phi * a
    }

    /// Gradient only.
    pub fn gradient(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); f.len()];
        self.value_grad(f, &mut g);
        g
    }

    /// Rescale so that `‖Pf‖_q = 1` (and, with a projection, replace `f` by
    /// `Pf`); `J` is invariant under both.
    pub(crate) fn renormalize(&self, f: &mut [Complex64]) {
        let y = self.project(f);
        let nrm = lp_norm_values(&y, &self.vols, self.q);
        if nrm > 0.0 && nrm.is_finite() {
            for (fi, yi) in f.iter_mut().zip(&y) {
                *fi = yi / nrm;
            }
        }
    }

    pub(crate) fn vols(&self) -> &[f64] {
        &self.vols
    }
}

/// `‖y‖_q` and its gradient `S^{1/q - 1} |y|^{q-2} y v` (subgradient at `q = ∞`).
pub(crate) fn norm_and_grad(y: &[Complex64], vols: &[f64], q: Exponent, grad: &mut [Complex64]) -> f64 {
    match q {
        Exponent::Finite(q) => {
            let s = Denominator::Power(q).eval(y, vols, Some(grad));
            let nrm = s.powf(1.0 / q);
            if s > 0.0 {
                let k = s.powf(1.0 / q - 1.0) / q;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            nrm
        }
        Exponent::Infinity => {
            let s = Denominator::Max.eval(y, vols, Some(grad));
            let nrm = s.sqrt();
            if nrm > 0.0 {
                grad.iter_mut().for_each(|g| *g /= 2.0 * nrm);
            }
            nrm
        }
    }
}
