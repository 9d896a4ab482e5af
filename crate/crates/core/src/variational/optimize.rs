//! Normalized descent: limited-memory quasi-Newton directions, Armijo
//! backtracking, and renormalization after every accepted step.

use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Backtracking factor applied to the step on each failed Armijo test.
    pub armijo_factor: f64,
    /// Sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Stop once `‖∇J‖ ≤ gtol · max(1, J)`.
    pub gtol: f64,
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 8,
            max_iters: 5000,
            armijo_factor: 0.5,
            armijo_c1: 1e-4,
            gtol: 1e-9,
            memory: 8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("optimizer.restarts", "need at least one restart"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("optimizer.max_iters", "need at least one iteration"));
        }
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return Err(Error::invalid("optimizer.armijo_factor", "must lie in (0, 1)"));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::invalid("optimizer.armijo_c1", "must lie in (0, 1)"));
        }
        if !(self.gtol > 0.0 && self.gtol.is_finite()) {
            return Err(Error::invalid("optimizer.gtol", "must be positive"));
        }
        if self.memory == 0 {
            return Err(Error::invalid("optimizer.memory", "need at least one stored pair"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct MinOutcome {
    pub x: Vec<Complex64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: `-H ∇J`.
fn direction(g: &[Complex64], hist: &VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)>) -> Vec<Complex64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= yi * a;
        }
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|z| *z *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += si * (a - b);
        }
    }
    q.iter_mut().for_each(|z| *z = -*z);
    q
}

/// Accepted steps whose relative decrease stays below `STALL_RTOL` this many
/// times in a row end the run: the value has stopped moving above rounding.
pub const STALL_ITERS: usize = 20;
pub const STALL_RTOL: f64 = 1e-14;

/// Minimize `f` over the set fixed by `renorm`. `observer` sees every accepted
/// iterate with its value.
pub(crate) fn lbfgs<F, R>(
    f: F,
    renorm: R,
    x0: Vec<Complex64>,
    cfg: &OptimizerConfig,
    observer: Option<&(dyn Fn(&[Complex64], f64) + Sync)>,
) -> MinOutcome
where
    F: Fn(&[Complex64], &mut [Complex64]) -> f64,
    R: Fn(&mut [Complex64]),
{
    let n = x0.len();
    let mut x = x0;
    renorm(&mut x);
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    let mut val = f(&x, &mut g);
    if let Some(obs) = observer {
        obs(&x, val);
    }
    let mut hist: VecDeque<(Vec<Complex64>, Vec<Complex64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut gn = norm(&g);
    let mut iterations = 0;
    let mut xt = vec![Complex64::new(0.0, 0.0); n];
    let mut gt = vec![Complex64::new(0.0, 0.0); n];
    let mut stalled = 0;

    while iterations < cfg.max_iters && gn > cfg.gtol * val.abs().max(1.0) && stalled < STALL_ITERS {
        let mut d = direction(&g, &hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = g.iter().map(|z| -z).collect();
            slope = -gn * gn;
        }
        let mut t = if hist.is_empty() {
            0.1 * norm(&x).max(1e-12) / norm(&d)
        } else {
            1.0
        };
        let mut accepted = false;
        let mut vt = val;
        while t * norm(&d) > 1e-18 * norm(&x).max(1e-300) {
            for i in 0..n {
                xt[i] = x[i] + d[i] * t;
            }
            renorm(&mut xt);
            vt = f(&xt, &mut gt);
            if vt.is_finite() && vt <= val + cfg.armijo_c1 * t * slope {
                accepted = true;
                break;
            }
            t *= cfg.armijo_factor;
        }
        if !accepted {
            if hist.is_empty() {
                break;
            }
            // quasi-Newton direction failed: retry once from steepest descent
            hist.clear();
            continue;
        }
        iterations += 1;
        let s: Vec<Complex64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<Complex64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        if val - vt <= STALL_RTOL * val.abs().max(1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        val = vt;
        gn = norm(&g);
        if let Some(obs) = observer {
            obs(&x, val);
        }
    }
    MinOutcome {
        converged: gn <= cfg.gtol * val.abs().max(1.0),
        x,
        value: val,
        iterations,
        grad_norm: gn,
    }
}

/// Subgradient descent with steps `t_k = t_0 / sqrt(k + 1)` along the
/// normalized subgradient; returns the best iterate seen.
pub(crate) fn subgradient<F, R>(f: F, renorm: R, x0: Vec<Complex64>, cfg: &OptimizerConfig) -> MinOutcome
where
    F: Fn(&[Complex64], &mut [Complex64]) -> f64,
    R: Fn(&mut [Complex64]),
{
    let n = x0.len();
    let mut x = x0;
    renorm(&mut x);
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    let mut val = f(&x, &mut g);
    let mut best = (x.clone(), val, norm(&g));
    let t0 = 0.1 * norm(&x);
    for k in 0..cfg.max_iters {
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let t = t0 / ((k + 1) as f64).sqrt();
        for i in 0..n {
            x[i] -= g[i] * (t / gn);
        }
        renorm(&mut x);
        val = f(&x, &mut g);
        if val < best.1 {
            best = (x.clone(), val, norm(&g));
        }
    }
    MinOutcome {
        x: best.0,
        value: best.1,
        iterations: cfg.max_iters,
        grad_norm: best.2,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        // J(x) = Σ k |x_k - 1|², minimum 0 at x = 1
        let f = |x: &[Complex64], g: &mut [Complex64]| {
            let mut v = 0.0;
            for (k, (xi, gi)) in x.iter().zip(g.iter_mut()).enumerate() {
                let w = (k + 1) as f64;
                let d = xi - 1.0;
                v += w * d.norm_sqr();
                *gi = d * (2.0 * w);
            }
            v
        };
        let cfg = OptimizerConfig::default();
        let out = lbfgs(f, |_| {}, vec![Complex64::new(0.0, 3.0); 6], &cfg, None);
        assert!(out.converged);
        assert!(out.value < 1e-16);
    }

    #[test]
    fn armijo_never_increases() {
        use std::sync::Mutex;
        let seen = Mutex::new(Vec::new());
        let obs = |_: &[Complex64], v: f64| seen.lock().unwrap().push(v);
        let f = |x: &[Complex64], g: &mut [Complex64]| {
            // Rosenbrock in (Re x0, Re x1)
            let (a, b) = (x[0].re, x[1].re);
            g[0] = Complex64::new(-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 0.0);
            g[1] = Complex64::new(200.0 * (b - a * a), 0.0);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let cfg = OptimizerConfig::default();
        let out = lbfgs(f, |_| {}, vec![Complex64::new(-1.2, 0.0), Complex64::new(1.0, 0.0)], &cfg, Some(&obs));
        let seen = seen.into_inner().unwrap();
        assert!(seen.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.value < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            restarts: 0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().field(), Some("optimizer.restarts"));
        let bad = OptimizerConfig {
            armijo_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
