//! The two counterexamples to the naive punctured inequality, the decay rate of
//! the second one, and the corrected split-seminorm inequality.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{build_grid, split, DomainSpec, Grid, PairRegion, SubsetMask};
use crate::error::{Error, Result};
use crate::fields::{check_eps, example2_profile, lp_norm, make_indicator, Exponent, GridFunction, VectorField};
use crate::seminorm::{check_s, seminorm_value_p, ReducedKernel};
use crate::variational::{ground_state_distance, GroundStateSet};

/// Radius of the inner ball Λ in the disk example.
pub const INNER_RADIUS: f64 = 0.5;
/// Relative refinement change tolerated when `sp < 1`.
pub const REFINEMENT_TOL: f64 = 0.05;
/// Relative growth reported as divergence evidence when `sp ≥ 1`.
pub const DIVERGENCE_GROWTH: f64 = 0.2;
/// The ramp of `f_ε` must span at least this many x1-cells to enter the fit.
pub const MIN_RAMP_CELLS: f64 = 4.0;

#[derive(Clone, Debug, Serialize)]
pub struct Example1Record {
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
    pub n: usize,
    /// `[χ_Λ]^p` over `Λ×Λ` and over `Γ×Γ`; both exactly zero.
    pub lambda_value: f64,
    pub gamma_value: f64,
    pub norm_q: f64,
    /// `([χ_Λ]_Λ + C [χ_Λ]_Γ) / ‖χ_Λ‖_q`, the same for every `C`.
    pub naive_ratio: f64,
    /// Full seminorm `[χ_Λ]` at `n` and at `2n`.
    pub full_n: f64,
    pub full_2n: f64,
    pub relative_change: f64,
    pub sp_below_one: bool,
    /// `sp < 1` and the change is within [`REFINEMENT_TOL`].
    pub refinement_stable: bool,
    /// `sp ≥ 1` and the seminorm grew by more than [`DIVERGENCE_GROWTH`].
    pub divergence_evidence: bool,
}

fn disk(n: usize) -> Result<(Arc<Grid>, SubsetMask)> {
    let grid = Arc::new(build_grid(&DomainSpec::ball([0.0, 0.0], 1.0), &[n])?);
    let (lambda, _) = split(&grid, |x| x[0].hypot(x[1]) < INNER_RADIUS);
    Ok((grid, lambda))
}

/// `f = χ_Λ` with `Λ = B(0, 1/2)` inside `Ω = B(0, 1)`.
pub fn example1_report(s: f64, p: f64, q: Exponent, n: usize) -> Result<Example1Record> {
    check_s(s)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::invalid("p", format!("p must lie in [1, inf), got {p}")));
    }
    let (grid, lambda) = disk(n)?;
    let gamma = lambda.complement();
    let f = make_indicator(&lambda, grid.clone())?;
    let zero = VectorField::zero(grid.bounding_box());
    let lambda_value = seminorm_value_p(&grid, f.values(), s, p, &zero, &PairRegion::square(&lambda));
    let gamma_value = seminorm_value_p(&grid, f.values(), s, p, &zero, &PairRegion::square(&gamma));
    let norm_q = lp_norm(&f, q);
    let full_n = seminorm_value_p(&grid, f.values(), s, p, &zero, &PairRegion::full(grid.len())).powf(1.0 / p);

    let (fine, fine_lambda) = disk(2 * n)?;
    let ff = make_indicator(&fine_lambda, fine.clone())?;
    let zero2 = VectorField::zero(fine.bounding_box());
    let full_2n = seminorm_value_p(&fine, ff.values(), s, p, &zero2, &PairRegion::full(fine.len())).powf(1.0 / p);

    let relative_change = (full_2n - full_n) / full_n;
    let sp_below_one = s * p < 1.0;
    Ok(Example1Record {
        s,
        p,
        q,
        n,
        lambda_value,
        gamma_value,
        norm_q,
        naive_ratio: (lambda_value.powf(1.0 / p) + gamma_value.powf(1.0 / p)) / norm_q,
        full_n,
        full_2n,
        relative_change,
        sp_below_one,
        refinement_stable: sp_below_one && relative_change.abs() <= REFINEMENT_TOL,
        divergence_evidence: !sp_below_one && relative_change > DIVERGENCE_GROWTH,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Example2Record {
    pub eps: f64,
    pub nx: usize,
    pub ny: usize,
    /// `[f_ε]^r` over `Γ×Γ` at order `s`.
    pub gamma_value_r: f64,
    pub norm_q: f64,
    /// `[f_ε]` over `Λ×Λ` at `(s, p)`; exactly zero.
    pub lambda_seminorm: f64,
    /// Ramp width in x1-cells.
    pub ramp_cells: f64,
    pub in_fit: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Example2Sweep {
    pub s: f64,
    pub r: f64,
    pub p: f64,
    pub q: Exponent,
    pub records: Vec<Example2Record>,
    /// Least-squares slope of `ln [f_ε]^r` against `ln ε` over the resolved records.
    pub fitted_slope: f64,
    /// `1 - sr`.
    pub expected_slope: f64,
    pub fitted_points: usize,
    /// `[f_ε]^r` decreases as `ε` decreases over the resolved records.
    pub monotone: bool,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `f_ε` on `(-1, 1) × (0, 1)` with `Λ = {x1 ≤ 0}`, evaluated through the
/// column-reduced kernel so that `nx × ny` cells are never materialized.
pub fn example2_sweep(s: f64, r: f64, p: f64, q: Exponent, eps_list: &[f64], resolution: [usize; 2]) -> Result<Example2Sweep> {
    check_s(s)?;
    if !(r >= 1.0 && s * r < 1.0) {
        return Err(Error::invalid("r", format!("need r >= 1 and sr < 1, got sr = {}", s * r)));
    }
    if !(p.is_finite() && s * p > 1.0) {
        return Err(Error::invalid("p", format!("need sp > 1, got sp = {}", s * p)));
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("eps", "empty ramp-width list"));
    }
    for &e in eps_list {
        check_eps(e)?;
    }
    let bbox = DomainSpec::rectangle(-1.0, 1.0, 0.0, 1.0).bounding_box();
    let kr = ReducedKernel::new(bbox, resolution, s, r)?;
    let kp = ReducedKernel::new(bbox, resolution, s, p)?;
    let gamma = PairRegion::square(&kr.column_mask(|x| x > 0.0));
    let lambda = PairRegion::square(&kr.column_mask(|x| x <= 0.0));
    let [nx, ny] = resolution;
    let hx = 2.0 / nx as f64;

    let records: Vec<Example2Record> = eps_list
        .par_iter()
        .map(|&eps| {
            let cols = kr.column_values(|x| Complex64::new(example2_profile(eps, x), 0.0));
            let gamma_value_r = kr.value_p(&cols, &gamma)?;
            let lambda_seminorm = kp.value_p(&cols, &lambda)?.powf(1.0 / p);
            // f_ε is constant in x2 and the strip has height one
            let vols = vec![hx; nx];
            let norm_q = crate::fields::lp_norm_values(&cols, &vols, q);
            let ramp_cells = eps / hx;
            Ok(Example2Record {
                eps,
                nx,
                ny,
                gamma_value_r,
                norm_q,
                lambda_seminorm,
                ramp_cells,
                in_fit: ramp_cells >= MIN_RAMP_CELLS,
            })
        })
        .collect::<Result<_>>()?;

    let fit: Vec<&Example2Record> = records.iter().filter(|r| r.in_fit).collect();
    if fit.len() < 2 {
        return Err(Error::invalid("eps", "fewer than two ramp widths are resolved by the grid"));
    }
    let lx: Vec<f64> = fit.iter().map(|r| r.eps.ln()).collect();
    let ly: Vec<f64> = fit.iter().map(|r| r.gamma_value_r.ln()).collect();
    let mut by_eps: Vec<&&Example2Record> = fit.iter().collect();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let monotone = by_eps.windows(2).all(|w| w[0].gamma_value_r < w[1].gamma_value_r);
    Ok(Example2Sweep {
        s,
        r,
        p,
        q,
        fitted_slope: fit_slope(&lx, &ly),
        expected_slope: 1.0 - s * r,
        fitted_points: fit.len(),
        monotone,
        records,
    })
}

/// Which hypotheses of the punctured inequality hold.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
    pub r: f64,
    pub sp: f64,
    pub sr: f64,
    /// `Np/(N-sp)`, infinite when `sp ≥ N`.
    pub threshold_p: f64,
    /// `Nr/(N-sr)`, infinite when `sr ≥ N`.
    pub threshold_r: f64,
    /// `N/(N-s)`.
    pub threshold_one: f64,
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub r_below_p: bool,
    /// `sr < N` and `q = Nr/(N-sr)`: not covered by the theorem.
    pub lost_boundary_case: bool,
    pub within_scope: bool,
}

pub fn hypothesis_validator(s: f64, p: f64, q: Exponent, r: f64, n: usize) -> HypothesisReport {
    let nn = n as f64;
    let sp = s * p;
    let sr = s * r;
    let critical = |t: f64, st: f64| if st < nn { nn * t / (nn - st) } else { f64::INFINITY };
    let threshold_p = critical(p, sp);
    let threshold_r = critical(r, sr);
    let threshold_one = critical(1.0, s);
    let qf = q.as_f64();
    let finite = !q.is_infinite();

    let a = r == 1.0 && qf < threshold_one;
    let b = sr > nn && q.is_infinite();
    let c = sr < nn && qf < threshold_r && threshold_one <= qf && finite;
    let i = sp < nn && qf < threshold_p;
    let ii = sp == nn && finite;
    let iii = sp > nn;
    let r_below_p = r >= 1.0 && r < p;
    let lost_boundary_case = sr < nn && finite && (qf - threshold_r).abs() <= 1e-12 * threshold_r;
    HypothesisReport {
        n,
        s,
        p,
        q,
        r,
        sp,
        sr,
        threshold_p,
        threshold_r,
        threshold_one,
        a,
        b,
        c,
        i,
        ii,
        iii,
        r_below_p,
        lost_boundary_case,
        within_scope: (a || b || c) && (i || ii || iii) && r_below_p && !lost_boundary_case,
    }
}

/// One sampled function of the punctured check.
#[derive(Clone, Debug, Serialize)]
pub struct PuncturedRow {
    pub index: usize,
    /// `[f]` over `Λ×Λ` at `(s, p)`.
    pub lambda_term: f64,
    /// `[f]` over `(Ω×Ω) \ (Λ×Λ)` at `(s, r)`.
    pub complement_term: f64,
    pub norm_q: f64,
    pub distance: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PuncturedReport {
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
    pub r: f64,
    pub delta: f64,
    /// Slack `ε` in `1/(S + ε)`.
    pub eps_slack: f64,
    pub best_constant: f64,
    pub energy: f64,
    /// `C` used for the `holds` column.
    pub c: f64,
    /// Smallest `C` for which every row holds; infinite if some row has no
    /// complement contribution and fails anyway.
    pub c_searched: f64,
    pub rows: Vec<PuncturedRow>,
    /// Functions with `d < δ ‖f‖_q`, excluded from the rows.
    pub skipped: usize,
    pub hypotheses: HypothesisReport,
    pub warnings: Vec<String>,
}

/// Inputs of [`punctured_check`] besides the sampled functions.
#[derive(Clone, Debug)]
pub struct PuncturedSetup<'a> {
    pub s: f64,
    pub p: f64,
    pub q: Exponent,
    pub r: f64,
    pub field: &'a VectorField,
    pub delta: f64,
    pub lambda: &'a SubsetMask,
    /// Audit value of `C`; the searched minimum is used when absent.
    pub c: Option<f64>,
    /// Best constant `S` and energy `E`.
    pub best_constant: f64,
    pub energy: f64,
    pub ground_states: &'a GroundStateSet,
    /// Defaults to `0.1 S`.
    pub eps_slack: Option<f64>,
}

pub fn punctured_check(setup: &PuncturedSetup<'_>, grid: &Arc<Grid>, fs: &[GridFunction]) -> Result<PuncturedReport> {
    let PuncturedSetup { s, p, q, r, delta, .. } = *setup;
    check_s(s)?;
    if !(r >= 1.0 && r < p && p.is_finite()) {
        return Err(Error::invalid("r", format!("need 1 <= r < p < inf, got r={r}, p={p}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(setup.best_constant > 0.0) || !setup.energy.is_finite() {
        return Err(Error::invalid("best_constant", "S and E must be supplied"));
    }
    setup.lambda.check_grid(grid)?;
    setup.field.check_grid(grid)?;

    let hypotheses = hypothesis_validator(s, p, q, r, grid.dim());
    let mut warnings = Vec::new();
    if !hypotheses.within_scope {
        warnings.push("parameters lie outside the theorem's hypotheses; the check is run anyway".to_string());
    }
    if hypotheses.lost_boundary_case {
        warnings.push("q equals the critical exponent Nr/(N-sr): outside theorem scope".to_string());
    }

    let eps_slack = setup.eps_slack.unwrap_or(0.1 * setup.best_constant);
    let factor = if setup.best_constant.is_infinite() {
        setup.energy
    } else {
        1.0 / (setup.best_constant + eps_slack) + setup.energy
    };
    let square = PairRegion::square(setup.lambda);
    let outside = PairRegion::complement_of_product(setup.lambda.clone());

    let mut rows = Vec::new();
    let mut skipped = 0;
    for (index, f) in fs.iter().enumerate() {
        f.check_grid(grid)?;
        let norm_q = lp_norm(f, q);
        let distance = ground_state_distance(f, setup.ground_states, q)?;
        if norm_q == 0.0 || distance < delta * norm_q {
            skipped += 1;
            continue;
        }
        let lambda_term = seminorm_value_p(grid, f.values(), s, p, setup.field, &square).powf(1.0 / p);
        let complement_term = seminorm_value_p(grid, f.values(), s, r, setup.field, &outside).powf(1.0 / r);
        rows.push(PuncturedRow {
            index,
            lambda_term,
            complement_term,
            norm_q,
            distance,
            lhs: 0.0,
            rhs: factor * norm_q,
            holds: false,
        });
    }

    // each row needs C ≥ (rhs - Λ-term) / complement-term
    let c_searched = rows.iter().fold(0.0f64, |acc, row| {
        let need = row.rhs - row.lambda_term;
        if need <= 0.0 {
            acc
        } else if row.complement_term > 0.0 {
            acc.max(need / row.complement_term)
        } else {
            f64::INFINITY
        }
    });
    let c = setup.c.unwrap_or(c_searched);
    for row in &mut rows {
        row.lhs = row.lambda_term + c * row.complement_term;
        row.holds = row.lhs >= row.rhs;
    }
    Ok(PuncturedReport {
        s,
        p,
        q,
        r,
        delta,
        eps_slack,
        best_constant: setup.best_constant,
        energy: setup.energy,
        c,
        c_searched,
        rows,
        skipped,
        hypotheses,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypothesis_examples() {
        let h = hypothesis_validator(0.5, 2.0, Exponent::Finite(2.0), 1.5, 2);
        assert_eq!(h.sp, 1.0);
        assert_eq!(h.threshold_p, 4.0);
        let h = hypothesis_validator(0.6, 3.0, Exponent::Infinity, 2.0, 1);
        assert!(h.sr > 1.0 && h.b);
        let h = hypothesis_validator(0.6, 3.0, Exponent::Finite(4.0), 2.0, 1);
        assert!(!h.b && !h.a && !h.c);
        let h = hypothesis_validator(0.5, 2.0, Exponent::Finite(1.2), 1.0, 2);
        assert!((h.threshold_one - 4.0 / 3.0).abs() < 1e-15 && h.a);
    }

    #[test]
    fn lost_boundary_flagged() {
        // N = 2, s = 0.5, r = 1.5: Nr/(N - sr) = 3/1.25 = 2.4
        let h = hypothesis_validator(0.5, 3.0, Exponent::Finite(2.4), 1.5, 2);
        assert!(h.lost_boundary_case && !h.within_scope);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = (1..6).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 0.3 * l + 2.0).collect();
        assert!((fit_slope(&x, &y) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn example1_zeros_small() {
        let rec = example1_report(0.4, 1.0, Exponent::Finite(2.0), 16).unwrap();
        assert_eq!(rec.lambda_value, 0.0);
        assert_eq!(rec.gamma_value, 0.0);
        assert!(rec.norm_q > 0.0);
        assert_eq!(rec.naive_ratio, 0.0);
    }

    #[test]
    fn example2_rejects_bad_parameters() {
        assert!(example2_sweep(0.6, 2.0, 2.0, Exponent::Finite(2.0), &[0.25], [64, 8]).is_err());
        assert!(example2_sweep(0.6, 1.2, 1.5, Exponent::Finite(2.0), &[0.25], [64, 8]).is_err());
        // a single resolved width cannot be fitted
        assert!(example2_sweep(0.6, 1.2, 2.0, Exponent::Finite(2.0), &[0.25, 0.01], [64, 8]).is_err());
    }

    #[test]
    fn example2_small_sweep() {
        let eps: Vec<f64> = (4..7).map(|k| 2f64.powi(-k)).collect();
        let sw = example2_sweep(0.6, 1.2, 2.0, Exponent::Finite(2.0), &eps, [512, 32]).unwrap();
        assert!(sw.records.iter().all(|r| r.lambda_seminorm == 0.0));
        assert!(sw.monotone, "{:?}", sw.records);
        assert!(sw.fitted_slope > 0.0);
    }
}
