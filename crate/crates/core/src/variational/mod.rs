//! Energies `E^{p,q}_{s,A}`, approximate ground-state manifolds, distances to
//! them, Poincaré–Wirtinger constants and the best constant `S`.

pub mod objective;
mod optimize;

use std::cmp::Ordering;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Grid, PairRegion};
use crate::error::{Error, Result};
use crate::fields::{lp_norm, lp_norm_values, Exponent, GridFunction, VectorField, WeightFunction};
use crate::seminorm::{check_s, norm_equivalence_constant, seminorm_value_p};
use crate::spectral::fix_phase;

pub use objective::RatioObjective;
pub use optimize::OptimizerConfig;

use objective::norm_and_grad;
use optimize::{dot, lbfgs, subgradient, MinOutcome};

/// Temperatures of the `q = ∞` smoothing, in annealing order.
pub const SMOOTHING_SCHEDULE: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Restart minimizers within this relative margin of the best are ground-state
/// candidates; `GROUND_STATE_FLOOR` is the absolute margin used when the best
/// value is zero.
pub const GROUND_STATE_RTOL: f64 = 1e-6;
pub const GROUND_STATE_FLOOR: f64 = 1e-8;

/// Candidates farther apart than this (unit `q`-norm, after optimal complex
/// scaling) are distinct representatives.
pub const CLUSTER_TOL: f64 = 1e-3;

/// Observer of accepted optimizer iterates: `(f, J(f))`.
pub type Observer<'a> = &'a (dyn Fn(&[Complex64], f64) + Sync);

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("p must lie in [1, inf), got {p}")))
    }
}

/// Smooth random start: a complex Gaussian per cell (ChaCha8 stream `stream`
/// of `seed`), averaged once with the lattice neighbours.
pub fn random_start(grid: &Grid, seed: u64, stream: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let raw: Vec<Complex64> = (0..grid.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let nb = grid.neighbors(i);
            let sum: Complex64 = nb.iter().map(|&j| raw[j]).sum::<Complex64>() + raw[i];
            sum / (nb.len() + 1) as f64
        })
        .collect()
}

/// Phase-normalized copy used for canonical ordering.
fn canonical(v: &[Complex64]) -> Vec<Complex64> {
    let mut c = v.to_vec();
    fix_phase(&mut c);
    c
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

#[derive(Clone, Debug)]
struct RestartOutcome {
    index: usize,
    ratio: f64,
    out: MinOutcome,
    canonical: Vec<Complex64>,
}

fn by_value(a: &RestartOutcome, b: &RestartOutcome) -> Ordering {
    a.ratio
        .total_cmp(&b.ratio)
        .then_with(|| lexicographic(&a.canonical, &b.canonical))
}

/// Minimize `obj` from each start, in parallel; outcomes sorted best first.
fn run_restarts(
    obj: &RatioObjective,
    starts: Vec<Vec<Complex64>>,
    cfg: &OptimizerConfig,
    observer: Option<Observer<'_>>,
) -> Vec<RestartOutcome> {
    let p = obj.p();
    let smooth = obj.q().is_infinite();
    let mut outs: Vec<RestartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let renorm = |x: &mut [Complex64]| obj.renormalize(x);
            let out = if p == 1.0 {
                subgradient(|x, g| obj.value_grad(x, g), renorm, x0, cfg)
            } else if smooth {
                let mut x = x0;
                let mut total = 0;
                let mut last = None;
                for tau in SMOOTHING_SCHEDULE {
                    let o = lbfgs(|x, g| obj.value_grad_smoothed(x, g, Some(tau)), renorm, x, cfg, observer);
                    total += o.iterations;
                    x = o.x.clone();
                    last = Some(o);
                }
                let mut o = last.expect("non-empty schedule");
                o.iterations = total;
                o.value = obj.value(&o.x);
                o
            } else {
                lbfgs(|x, g| obj.value_grad(x, g), renorm, x0, cfg, observer)
            };
            RestartOutcome {
                index,
                ratio: obj.ratio(&out.x),
                canonical: canonical(&out.x),
                out,
            }
        })
        .collect();
    outs.sort_by(by_value);
    outs
}

fn starts_for(grid: &Grid, cfg: &OptimizerConfig, include_flat: bool) -> Vec<Vec<Complex64>> {
    (0..cfg.restarts)
        .map(|k| {
            if include_flat && k == 0 {
                vec![Complex64::new(1.0, 0.0); grid.len()]
            } else {
                random_start(grid, cfg.seed, k as u64)
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyResult {
    /// `E^{p,q}_{s,A}`, the exact ratio at the minimizer.
    pub value: f64,
    #[serde(skip)]
    pub minimizer: GridFunction,
    pub iterations: usize,
    pub restarts_used: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    /// Set for `p = 1`, where only subgradient descent is available.
    pub low_confidence: bool,
    /// Exact ratio reached by each restart, in restart order.
    pub restart_values: Vec<f64>,
}

/// Unit-`q`-norm minimizers that are pairwise distinct up to complex scaling.
#[derive(Clone, Debug)]
pub struct GroundStateSet {
    pub representatives: Vec<GridFunction>,
    pub values: Vec<f64>,
    pub q: Exponent,
}

impl GroundStateSet {
    pub fn empty(q: Exponent) -> Self {
        GroundStateSet {
            representatives: Vec::new(),
            values: Vec::new(),
            q,
        }
    }

    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }
}

fn validate_energy_inputs(s: f64, p: f64, field: &VectorField, grid: &Grid, cfg: &OptimizerConfig) -> Result<()> {
    check_s(s)?;
    check_p(p)?;
    cfg.validate()?;
    field.check_grid(grid)
}

pub fn energy(s: f64, p: f64, q: Exponent, field: &VectorField, grid: Arc<Grid>, cfg: &OptimizerConfig) -> Result<EnergyResult> {
    energy_and_ground_states(s, p, q, field, grid, cfg, None).map(|(e, _)| e)
}

/// Energy together with the clustered restart minimizers. The observer, if
/// any, sees every accepted iterate of every restart.
pub fn energy_and_ground_states(
    s: f64,
    p: f64,
    q: Exponent,
    field: &VectorField,
    grid: Arc<Grid>,
    cfg: &OptimizerConfig,
    observer: Option<Observer<'_>>,
) -> Result<(EnergyResult, GroundStateSet)> {
    validate_energy_inputs(s, p, field, &grid, cfg)?;
    let obj = RatioObjective::energy(&grid, s, p, q, field);
    let outs = run_restarts(&obj, starts_for(&grid, cfg, true), cfg, observer);

    let mut restart_values = vec![0.0; outs.len()];
    for o in &outs {
        restart_values[o.index] = o.ratio;
    }
    let best = &outs[0];
    let minimizer = GridFunction::new(grid.clone(), best.out.x.clone())?;
    let result = EnergyResult {
        value: best.ratio,
        minimizer,
        iterations: best.out.iterations,
        restarts_used: outs.len(),
        final_gradient_norm: best.out.grad_norm,
        converged: best.out.converged,
        low_confidence: p == 1.0,
        restart_values,
    };

    let cutoff = best.ratio * (1.0 + GROUND_STATE_RTOL) + GROUND_STATE_FLOOR;
    let vols = grid.volumes();
    let mut reps: Vec<Vec<Complex64>> = Vec::new();
    let mut values = Vec::new();
    for o in outs.iter().filter(|o| o.ratio <= cutoff) {
        let distinct = reps
            .iter()
            .all(|r| scaled_distance(&o.out.x, r, vols, q).0 > CLUSTER_TOL);
        if distinct {
            reps.push(o.canonical.clone());
            values.push(o.ratio);
        }
    }
    let representatives = reps
        .into_iter()
        .map(|mut r| {
            let nrm = lp_norm_values(&r, vols, q);
            r.iter_mut().for_each(|z| *z /= nrm);
            GridFunction::new(grid.clone(), r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        result,
        GroundStateSet {
            representatives,
            values,
            q,
        },
    ))
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `min_c ‖f - c φ‖_q` and the minimizing `c`.
pub(crate) fn scaled_distance(f: &[Complex64], phi: &[Complex64], vols: &[f64], q: Exponent) -> (f64, Complex64) {
    let dist = |c: Complex64| {
        let d: Vec<Complex64> = f.iter().zip(phi).map(|(a, b)| a - c * b).collect();
        lp_norm_values(&d, vols, q)
    };
    if let Exponent::Finite(q2) = q {
        if q2 == 2.0 {
            let num: Complex64 = f.iter().zip(phi).zip(vols).map(|((a, b), v)| a * b.conj() * v).sum();
            let den: f64 = phi.iter().zip(vols).map(|(b, v)| b.norm_sqr() * v).sum();
            let c = if den > 0.0 { num / den } else { Complex64::new(0.0, 0.0) };
            return (dist(c), c);
        }
    }
    let nf = lp_norm_values(f, vols, q);
    let nphi = lp_norm_values(phi, vols, q);
    if nphi == 0.0 {
        return (nf, Complex64::new(0.0, 0.0));
    }
    let r_max = 2.0 * nf / nphi;
    let along = |psi: f64| {
        let u = Complex64::from_polar(1.0, psi);
        golden(|r| dist(u * r), 0.0, r_max, 80)
    };
    let steps = 64;
    let dpsi = 2.0 * std::f64::consts::PI / steps as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..steps {
        let psi = k as f64 * dpsi;
        let (_, v) = along(psi);
        if v < best.1 {
            best = (psi, v);
        }
    }
    let (psi, _) = golden(|psi| along(psi).1, best.0 - dpsi, best.0 + dpsi, 60);
    let (r, v) = along(psi);
    let mut out = (v, Complex64::from_polar(r, psi));
    // |c| = 0 is always admissible
    if nf <= out.0 {
        out = (nf, Complex64::new(0.0, 0.0));
    }
    out
}

/// `d^q(f) = min over representatives φ and scalars c of ‖f - c φ‖_q`.
///
/// This is an upper bound for the distance to the true ground-state manifold,
/// which may contain more than the computed representatives. Returns `+∞` for
/// an empty set (infimum over nothing).
pub fn ground_state_distance(f: &GridFunction, gs: &GroundStateSet, q: Exponent) -> Result<f64> {
    Ok(nearest_representative(f, gs, q)?.map_or(f64::INFINITY, |(d, _, _)| d))
}

fn nearest_representative(f: &GridFunction, gs: &GroundStateSet, q: Exponent) -> Result<Option<(f64, usize, Complex64)>> {
    let mut best: Option<(f64, usize, Complex64)> = None;
    for (k, r) in gs.representatives.iter().enumerate() {
        if r.len() != f.len() {
            return Err(Error::GridMismatch("representative on a different grid".into()));
        }
        let (d, c) = scaled_distance(f.values(), r.values(), f.grid().volumes(), q);
        if best.is_none_or(|b| d < b.0) {
            best = Some((d, k, c));
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareResult {
    /// Smallest `C` with `‖f - ∫ f g‖_q ≤ C [f]_{s,p}` over the sampled optimizers.
    pub constant: f64,
    /// `inf [f] / ‖f - ∫ f g‖_q`, i.e. `1 / constant`.
    pub ratio_inf: f64,
    #[serde(skip)]
    pub witness: GridFunction,
    pub converged: bool,
    pub restart_values: Vec<f64>,
}

pub fn poincare_constant(
    s: f64,
    p: f64,
    q: Exponent,
    g: &WeightFunction,
    grid: Arc<Grid>,
    cfg: &OptimizerConfig,
) -> Result<PoincareResult> {
    check_s(s)?;
    check_p(p)?;
    cfg.validate()?;
    if **g.grid() != *grid {
        return Err(Error::GridMismatch("weight lives on a different grid".into()));
    }
    if !g.is_normalized(1e-12) {
        return Err(Error::invalid("g", "weight must integrate to one"));
    }
    let obj = RatioObjective::poincare(&grid, s, p, q, g.values());
    // constants are annihilated by the projection, so there is no flat restart
    let outs = run_restarts(&obj, starts_for(&grid, cfg, false), cfg, None);
    let mut restart_values = vec![0.0; outs.len()];
    for o in &outs {
        restart_values[o.index] = o.ratio;
    }
    let best = &outs[0];
    Ok(PoincareResult {
        constant: 1.0 / best.ratio,
        ratio_inf: best.ratio,
        witness: GridFunction::new(grid.clone(), best.out.x.clone())?,
        converged: best.out.converged,
        restart_values,
    })
}

/// `J(f) + μ max(0, δ - d(f)/‖f‖_q)²`, with `d` differentiated by the envelope
/// theorem at the optimal representative and scalar.
struct PenaltyObjective<'a> {
    ratio: &'a RatioObjective,
    gs: &'a [Vec<Complex64>],
    q: Exponent,
    delta: f64,
    mu: f64,
}

impl PenaltyObjective<'_> {
    /// `(d(f)/‖f‖_q, ∇ of the same)`.
    fn relative_distance(&self, f: &[Complex64], grad: Option<&mut [Complex64]>) -> f64 {
        let vols = self.ratio.vols();
        let n = f.len();
        let mut best = (f64::INFINITY, 0, Complex64::new(0.0, 0.0));
        for (k, r) in self.gs.iter().enumerate() {
            let (d, c) = scaled_distance(f, r, vols, self.q);
            if d < best.0 {
                best = (d, k, c);
            }
        }
        let mut gn = vec![Complex64::new(0.0, 0.0); n];
        let nf = norm_and_grad(f, vols, self.q, &mut gn);
        let (d, k, c) = best;
        if let Some(grad) = grad {
            let y: Vec<Complex64> = f.iter().zip(&self.gs[k]).map(|(a, b)| a - c * b).collect();
            let mut gd = vec![Complex64::new(0.0, 0.0); n];
            norm_and_grad(&y, vols, self.q, &mut gd);
            for i in 0..n {
                grad[i] = gd[i] / nf - gn[i] * (d / (nf * nf));
            }
        }
        d / nf
    }

    fn value_grad(&self, f: &[Complex64], grad: &mut [Complex64]) -> f64 {
        let j = self.ratio.value_grad(f, grad);
        if self.gs.is_empty() {
            return j;
        }
        let mut gh = vec![Complex64::new(0.0, 0.0); f.len()];
        let h = self.relative_distance(f, Some(&mut gh));
        let viol = self.delta - h;
        if viol <= 0.0 {
            return j;
        }
        for (g, gi) in grad.iter_mut().zip(&gh) {
            *g -= gi * (2.0 * self.mu * viol);
        }
        j + self.mu * viol * viol
    }
}

/// Penalty rounds and growth factor of the constrained minimization.
pub const PENALTY_ROUNDS: usize = 5;
pub const PENALTY_GROWTH: f64 = 10.0;
/// Allowed shortfall `δ - d/‖f‖` of the final iterate.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct BestConstant {
    /// `S = 1 / (inf - E)`; infinite when the constrained infimum equals `E`.
    pub s_value: f64,
    /// Constrained infimum of `[f]_A / ‖f‖_q`.
    pub constrained_inf: f64,
    pub energy: f64,
    pub delta: f64,
    #[serde(skip)]
    pub witness: GridFunction,
    /// `δ - d/‖f‖_q` at the witness (nonpositive when strictly feasible).
    pub violation: f64,
    pub feasible: bool,
    /// The ground-state set was empty, so the distance constraint is vacuous.
    pub constraint_dropped: bool,
    /// Distances use computed representatives only and over-estimate the true
    /// distance.
    pub distance_is_upper_bound: bool,
}

pub fn best_constant_s(
    s: f64,
    p: f64,
    q: Exponent,
    field: &VectorField,
    delta: f64,
    grid: Arc<Grid>,
    energy: &EnergyResult,
    gs: &GroundStateSet,
    cfg: &OptimizerConfig,
) -> Result<BestConstant> {
    validate_energy_inputs(s, p, field, &grid, cfg)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", format!("delta must lie in (0, 1], got {delta}")));
    }
    if p == 1.0 {
        return Err(Error::invalid("p", "the constrained problem needs p > 1"));
    }
    let ratio = RatioObjective::energy(&grid, s, p, q, field);
    let reps: Vec<Vec<Complex64>> = gs.representatives.iter().map(|r| r.values().to_vec()).collect();
    let renorm = |x: &mut [Complex64]| ratio.renormalize(x);

    let results: Vec<(f64, f64, Vec<Complex64>)> = starts_for(&grid, cfg, false)
        .into_par_iter()
        .map(|x0| {
            let mut x = x0;
            renorm(&mut x);
            let mut pen = PenaltyObjective {
                ratio: &ratio,
                gs: &reps,
                q,
                delta,
                mu: 1e3 * ratio.value(&x).max(f64::MIN_POSITIVE),
            };
            let rounds = if reps.is_empty() { 1 } else { PENALTY_ROUNDS };
            for _ in 0..rounds {
                let out = lbfgs(|x, g| pen.value_grad(x, g), renorm, x, cfg, None);
                x = out.x;
                pen.mu *= PENALTY_GROWTH;
            }
            let viol = if reps.is_empty() {
                f64::NEG_INFINITY
            } else {
                delta - pen.relative_distance(&x, None)
            };
            (ratio.ratio(&x), viol, x)
        })
        .collect();

    let feasible_best = results
        .iter()
        .filter(|r| r.1 <= FEASIBILITY_TOL)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lexicographic(&canonical(&a.2), &canonical(&b.2))));
    let (inf, viol, x, feasible) = match feasible_best {
        Some(r) => (r.0, r.1, r.2.clone(), true),
        None => {
            let r = results.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("at least one restart");
            (r.0, r.1, r.2.clone(), false)
        }
    };
    let gap = inf - energy.value;
    Ok(BestConstant {
        s_value: if gap > 0.0 { 1.0 / gap } else { f64::INFINITY },
        constrained_inf: inf,
        energy: energy.value,
        delta,
        witness: GridFunction::new(grid.clone(), x)?,
        violation: viol,
        feasible,
        constraint_dropped: reps.is_empty(),
        distance_is_upper_bound: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallSupportCheck {
    /// `‖f‖_q`.
    pub lhs: f64,
    /// `C / (1 - (1-δ)^{1-1/q}) · [f]_{s,p}`.
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
}

/// The Poincaré inequality without mean for `f` vanishing on a `δ`-fraction of
/// the domain, with `C` a Poincaré–Wirtinger constant for the uniform weight.
pub fn small_support_poincare_check(
    f: &GridFunction,
    s: f64,
    p: f64,
    q: Exponent,
    delta: f64,
    poincare: f64,
) -> Result<SmallSupportCheck> {
    check_s(s)?;
    check_p(p)?;
    if q == Exponent::Finite(1.0) {
        return Err(Error::invalid("q", "the constant degenerates at q = 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("delta must lie in (0, 1), got {delta}")));
    }
    let grid = f.grid();
    let support: f64 = f
        .values()
        .iter()
        .zip(grid.volumes())
        .filter(|(z, _)| **z != Complex64::new(0.0, 0.0))
        .map(|(_, v)| v)
        .sum();
    if support > grid.total_volume() * (1.0 - delta) * (1.0 + 1e-12) {
        return Err(Error::invalid("f", "support exceeds (1 - delta) of the domain"));
    }
    let expo = match q {
        Exponent::Finite(q) => 1.0 - 1.0 / q,
        Exponent::Infinity => 1.0,
    };
    let constant = poincare / (1.0 - (1.0 - delta).powf(expo));
    let zero = VectorField::zero(grid.bounding_box());
    let semi = seminorm_value_p(grid, f.values(), s, p, &zero, &PairRegion::full(grid.len())).powf(1.0 / p);
    let lhs = lp_norm(f, q);
    let rhs = constant * semi;
    Ok(SmallSupportCheck {
        lhs,
        rhs,
        constant,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// `(‖f‖_p^p + [f]_{s,p}^p)^{1/p}` with the plain seminorm.
pub fn sobolev_norm(f: &GridFunction, s: f64, p: f64) -> f64 {
    let grid = f.grid();
    let zero = VectorField::zero(grid.bounding_box());
    let semi = seminorm_value_p(grid, f.values(), s, p, &zero, &PairRegion::full(grid.len()));
    (lp_norm(f, Exponent::Finite(p)).powf(p) + semi).powf(1.0 / p)
}

/// Upper bound `K` for `‖f‖_{W^{s,p}}` over all `f` with `‖f‖_q ≤ 1` and
/// `[f]_A ≤ b`, from the norm-equivalence constant:
/// `K^p = Q^p (1 + 2^{p-1} c) + 2^{p-1} b^p`, where `Q` bounds `‖f‖_p`.
pub fn sobolev_trace_bound(grid: &Grid, s: f64, p: f64, q: Exponent, field: &VectorField, b: f64) -> f64 {
    let vol = grid.total_volume();
    let qn = match q {
        Exponent::Infinity => vol.powf(1.0 / p),
        Exponent::Finite(q) if p <= q => vol.powf(1.0 / p - 1.0 / q),
        Exponent::Finite(q) => {
            let vmin = grid.volumes().iter().copied().fold(f64::INFINITY, f64::min);
            vmin.powf(-(p - q) / (p * q))
        }
    };
    let c = norm_equivalence_constant(grid, s, p, field);
    let k = 2f64.powf(p - 1.0);
    (qn.powf(p) * (1.0 + k * c) + k * b.powf(p)).powf(1.0 / p)
}

/// Real inner product of packed vectors, exposed for gradient checks.
pub fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    dot(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::fields::gauge_transform;
    use crate::operator::assemble;
    use crate::spectral::eigensolve;
    use proptest::prelude::*;
    use rand::Rng;

    fn grid1(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0), &[n]).unwrap())
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_field_energy_vanishes_at_constants() {
        let g = grid1(24);
        let zero = VectorField::zero(g.bounding_box());
        for (p, q) in [(2.0, Exponent::Finite(2.0)), (1.5, Exponent::Finite(3.0)), (3.0, Exponent::Infinity)] {
            let e = energy(0.5, p, q, &zero, g.clone(), &quick()).unwrap();
            assert!(e.value <= 1e-6, "{p} {q:?}: {}", e.value);
            let v = e.minimizer.values();
            assert!(v.iter().all(|z| (z - v[0]).norm() <= 1e-6 * v[0].norm()));
        }
    }

    #[test]
    fn constant_field_minimizer_is_plane_wave() {
        let g = grid1(24);
        let a = 1.7;
        let field = VectorField::constant([a, 0.0], g.bounding_box()).unwrap();
        let e = energy(0.5, 2.0, Exponent::Finite(2.0), &field, g.clone(), &quick()).unwrap();
        assert!(e.value <= 1e-6, "{}", e.value);
        let back = gauge_transform(&e.minimizer, [-a, 0.0]);
        let v = back.values();
        assert!(v.iter().all(|z| (z - v[0]).norm() <= 1e-5 * v[0].norm()));
    }

    #[test]
    fn energy_squared_is_first_eigenvalue() {
        let g = grid1(32);
        let field = VectorField::polynomial([vec![crate::fields::Monomial::new(4.0, 2, 0)], vec![]], g.bounding_box()).unwrap();
        let e = energy(0.5, 2.0, Exponent::Finite(2.0), &field, g.clone(), &quick()).unwrap();
        let sp = eigensolve(&assemble(g.clone(), 0.5, field).unwrap(), 1).unwrap();
        assert!((e.value.powi(2) - sp.lambdas[0]).abs() <= 1e-4 * sp.lambdas[0], "{} {}", e.value.powi(2), sp.lambdas[0]);
    }

    #[test]
    fn distance_examples() {
        let g = grid1(16);
        let zero = VectorField::zero(g.bounding_box());
        let (_, gs) = energy_and_ground_states(0.5, 2.0, Exponent::Finite(2.0), &zero, g.clone(), &quick(), None).unwrap();
        assert_eq!(gs.len(), 1);
        let q2 = Exponent::Finite(2.0);
        assert!(ground_state_distance(&gs.representatives[0], &gs, q2).unwrap() <= 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = GridFunction::new(
            g.clone(),
            (0..16).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
        )
        .unwrap();
        let mean: Complex64 = f.values().iter().sum::<Complex64>() / 16.0;
        let centered = f.map(|z| z - mean);
        let want = lp_norm(&centered, q2);
        assert!((ground_state_distance(&f, &gs, q2).unwrap() - want).abs() <= 1e-10);
        assert!((ground_state_distance(&centered, &gs, q2).unwrap() - want).abs() <= 1e-10);

        // the search path agrees with the closed form on a q = 2 problem
        let (d, _) = scaled_distance(f.values(), gs.representatives[0].values(), g.volumes(), Exponent::Finite(2.000001));
        assert!((d - want).abs() <= 1e-5 * want);

        assert_eq!(ground_state_distance(&f, &GroundStateSet::empty(q2), q2).unwrap(), f64::INFINITY);
    }

    #[test]
    fn poincare_matches_second_eigenvalue() {
        let g = grid1(32);
        let w = WeightFunction::uniform(g.clone());
        let pc = poincare_constant(0.5, 2.0, Exponent::Finite(2.0), &w, g.clone(), &quick()).unwrap();
        let sp = eigensolve(&assemble(g.clone(), 0.5, VectorField::zero(g.bounding_box())).unwrap(), 2).unwrap();
        let want = 1.0 / sp.lambdas[1].sqrt();
        assert!((pc.constant - want).abs() <= 1e-3 * want, "{} {}", pc.constant, want);
    }

    #[test]
    fn poincare_rejects_unnormalized_weight() {
        let g = grid1(8);
        let w = WeightFunction::new(g.clone(), vec![Complex64::new(1.0, 0.0); 8]).unwrap();
        let w = WeightFunction::new(g.clone(), w.values().iter().map(|z| z * 2.0).collect()).unwrap();
        assert!(poincare_constant(0.5, 2.0, Exponent::Finite(2.0), &w, g, &quick()).is_err());
    }

    #[test]
    fn poincare_ratio_is_shift_invariant() {
        let g = grid1(16);
        let w = WeightFunction::uniform(g.clone());
        let obj = RatioObjective::poincare(&g, 0.5, 2.0, Exponent::Finite(2.0), w.values());
        let f = random_start(&g, 3, 1);
        let shifted: Vec<Complex64> = f.iter().map(|z| z + Complex64::new(2.0, -5.0)).collect();
        assert!((obj.ratio(&f) - obj.ratio(&shifted)).abs() <= 1e-12 * obj.ratio(&f));
    }

    #[test]
    fn small_support_examples() {
        let g = grid1(32);
        let w = WeightFunction::uniform(g.clone());
        let c = poincare_constant(0.5, 2.0, Exponent::Finite(2.0), &w, g.clone(), &quick()).unwrap().constant;
        let f = GridFunction::from_fn(g.clone(), |x| Complex64::new(if x[0] < 0.25 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let r = small_support_poincare_check(&f, 0.5, 2.0, Exponent::Finite(2.0), 0.5, c).unwrap();
        assert!(r.holds, "{r:?}");
        let z = GridFunction::constant(g.clone(), Complex64::new(0.0, 0.0));
        let r = small_support_poincare_check(&z, 0.5, 2.0, Exponent::Finite(2.0), 0.5, c).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(small_support_poincare_check(&f, 0.5, 2.0, Exponent::Finite(1.0), 0.5, c).is_err());
        let wide = GridFunction::constant(g.clone(), Complex64::new(1.0, 0.0));
        assert!(small_support_poincare_check(&wide, 0.5, 2.0, Exponent::Finite(2.0), 0.5, c).is_err());
    }

    #[test]
    fn best_constant_zero_field() {
        let g = grid1(24);
        let zero = VectorField::zero(g.bounding_box());
        let q2 = Exponent::Finite(2.0);
        let cfg = quick();
        let (e, gs) = energy_and_ground_states(0.5, 2.0, q2, &zero, g.clone(), &cfg, None).unwrap();
        let b1 = best_constant_s(0.5, 2.0, q2, &zero, 1.0, g.clone(), &e, &gs, &cfg).unwrap();
        assert!(b1.feasible, "{b1:?}");
        let pc = poincare_constant(0.5, 2.0, q2, &WeightFunction::uniform(g.clone()), g.clone(), &cfg).unwrap();
        assert!(b1.constrained_inf >= pc.ratio_inf * (1.0 - 1e-4), "{} {}", b1.constrained_inf, pc.ratio_inf);
        let b4 = best_constant_s(0.5, 2.0, q2, &zero, 0.25, g.clone(), &e, &gs, &cfg).unwrap();
        assert!(b4.s_value >= b1.s_value - 1e-6);
        let dropped = best_constant_s(0.5, 2.0, q2, &zero, 1.0, g, &e, &GroundStateSet::empty(q2), &cfg).unwrap();
        assert!(dropped.constraint_dropped);
    }

    #[test]
    fn trace_stays_bounded() {
        use std::sync::Mutex;
        let g = grid1(16);
        let field = VectorField::constant([1.0, 0.0], g.bounding_box()).unwrap();
        let (s, p, q) = (0.4, 2.0, Exponent::Finite(3.0));
        let trace = Mutex::new(Vec::new());
        let obs = |x: &[Complex64], v: f64| trace.lock().unwrap().push((x.to_vec(), v));
        let cfg = OptimizerConfig {
            restarts: 2,
            ..Default::default()
        };
        energy_and_ground_states(s, p, q, &field, g.clone(), &cfg, Some(&obs)).unwrap();
        let trace = trace.into_inner().unwrap();
        let b = trace.iter().map(|t| t.1).fold(0.0, f64::max).powf(1.0 / p);
        let k = sobolev_trace_bound(&g, s, p, q, &field, b);
        for (x, _) in &trace {
            let f = GridFunction::new(g.clone(), x.clone()).unwrap();
            assert!(sobolev_norm(&f, s, p) <= k);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn objective_scale_invariance(seed in any::<u64>(), cr in -3.0..3.0f64, ci in -3.0..3.0f64) {
            prop_assume!(cr.hypot(ci) > 1e-3);
            let g = grid1(12);
            let field = VectorField::rotation(g.bounding_box());
            let obj = RatioObjective::energy(&g, 0.5, 1.5, Exponent::Finite(2.5), &field);
            let f = random_start(&g, seed, 0);
            let c = Complex64::new(cr, ci);
            let fc: Vec<Complex64> = f.iter().map(|z| z * c).collect();
            prop_assert!((obj.value(&f) - obj.value(&fc)).abs() <= 1e-12 * obj.value(&f));
        }
    }
}
