use std::sync::Arc;

use magfrac::experiments::{example1_report, example2_sweep, hypothesis_validator, punctured_check, PuncturedSetup};
use magfrac::fields::{weighted_mean, WeightFunction};
use magfrac::variational::{best_constant_s, energy_and_ground_states, OptimizerConfig};
use magfrac::{build_grid, split, Complex64, DomainSpec, Exponent, Grid, GridFunction, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn disk_indicator_with_p_one_is_refinement_stable() {
    let rec = example1_report(0.4, 1.0, Exponent::Finite(2.0), 64).unwrap();
    assert_eq!((rec.lambda_value, rec.gamma_value), (0.0, 0.0));
    assert!(rec.norm_q > 0.0);
    assert!(rec.refinement_stable, "{rec:?}");
}

#[test]
fn disk_indicator_above_sp_one_keeps_growing() {
    let rec = example1_report(0.8, 2.0, Exponent::Finite(2.0), 64).unwrap();
    assert!(rec.relative_change > 0.2 && rec.divergence_evidence, "{rec:?}");
}

#[test]
fn ramp_sweep_rejects_under_resolved_widths() {
    // 2^-9 spans only two of 1024 cells on (-1, 1)
    let eps = [0.25, 0.125, 2f64.powi(-9)];
    let sw = example2_sweep(0.6, 1.2, 2.0, Exponent::Finite(2.0), &eps, [1024, 64]).unwrap();
    assert!(!sw.records[2].in_fit);
    assert_eq!(sw.fitted_points, 2);
}

#[test]
fn hypothesis_arithmetic() {
    let h = hypothesis_validator(0.5, 2.0, Exponent::Finite(2.0), 1.5, 2);
    assert!(h.sp < 2.0 && h.threshold_p == 4.0);
    let h = hypothesis_validator(0.6, 3.0, Exponent::Finite(3.0), 2.0, 1);
    assert!(h.sr > 1.0 && !h.b);
    assert!(hypothesis_validator(0.6, 3.0, Exponent::Infinity, 2.0, 1).b);
    let h = hypothesis_validator(0.5, 2.0, Exponent::Finite(1.2), 1.0, 2);
    assert!(h.a);
}

fn setup_grid() -> (Arc<Grid>, VectorField) {
    let g = Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0), &[24]).unwrap());
    let zero = VectorField::zero(g.bounding_box());
    (g, zero)
}

#[test]
fn punctured_inequality_admits_a_finite_constant() {
    let (g, zero) = setup_grid();
    let q = Exponent::Finite(2.0);
    let cfg = OptimizerConfig {
        restarts: 4,
        ..Default::default()
    };
    let (e, gs) = energy_and_ground_states(0.5, 2.0, q, &zero, g.clone(), &cfg, None).unwrap();
    let bc = best_constant_s(0.5, 2.0, q, &zero, 1.0, g.clone(), &e, &gs, &cfg).unwrap();
    let (lam, _) = split(&g, |x| x[0] < 0.5);

    // mean-zero samples are exactly the δ = 1 feasible class
    let u = WeightFunction::uniform(g.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut fs: Vec<GridFunction> = (0..50)
        .map(|_| {
            let v = (0..g.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let f = GridFunction::new(g.clone(), v).unwrap();
            let m = weighted_mean(&f, &u).unwrap();
            f.map(|z| z - m)
        })
        .collect();
    fs.push(gs.representatives[0].clone());

    let setup = PuncturedSetup {
        s: 0.5,
        p: 2.0,
        q,
        r: 1.5,
        field: &zero,
        // δ = 1 up to rounding: a mean-zero f has d = ‖f‖ only to the last ulp
        delta: 1.0 - 1e-9,
        lambda: &lam,
        c: None,
        best_constant: bc.s_value,
        energy: e.value,
        ground_states: &gs,
        eps_slack: None,
    };
    let rep = punctured_check(&setup, &g, &fs).unwrap();
    assert_eq!(rep.skipped, 1);
    assert_eq!(rep.rows.len(), 50);
    assert!(rep.c_searched.is_finite());
    assert!(rep.rows.iter().all(|r| r.holds));

    let bad = PuncturedSetup { r: 2.0, ..setup.clone() };
    assert!(punctured_check(&bad, &g, &fs).is_err());
}
