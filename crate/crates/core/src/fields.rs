//! Complex grid functions, `L^q` norms, weights `g`, magnetic potentials and
//! the explicit example functions.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, Grid, Point, SubsetMask};
use crate::error::{Error, Result};

/// An integrability exponent `q ∈ [1, ∞]`. Infinity is a distinguished
/// variant so no norm routine ever raises to a huge power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    /// `f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if q.is_finite() && q >= 1.0 {
            Ok(Exponent::Finite(q))
        } else {
            Err(Error::invalid("q", format!("exponent must lie in [1, inf], got {q}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Exponent::Finite(q) => q,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Exponent::Finite(q) => s.serialize_f64(q),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

/// A complex value per active cell.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&Point) -> Complex64) -> Result<Self> {
        let values = grid.centers().iter().map(f).collect();
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: Complex64) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise modulus `|f|` as a (real) grid function.
    pub fn modulus(&self) -> Self {
        self.map(|z| Complex64::new(z.norm(), 0.0))
    }

    pub fn check_grid(&self, other: &Grid) -> Result<()> {
        if std::ptr::eq(Arc::as_ptr(&self.grid), other) || *self.grid == *other {
            Ok(())
        } else {
            Err(Error::GridMismatch("function lives on a different grid".into()))
        }
    }

    /// CSV with columns `cell_index, x1, x2, re, im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cell_index", "x1", "x2", "re", "im"])?;
        for (i, z) in self.values.iter().enumerate() {
            let c = self.grid.center(i);
            out.serialize((i, c[0], c[1], z.re, z.im))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(Σ |f_i|^q v_i)^{1/q}`, or `max_i |f_i|` for `q = ∞`.
pub fn lp_norm(f: &GridFunction, q: Exponent) -> f64 {
    lp_norm_values(f.values(), f.grid().volumes(), q)
}

pub(crate) fn lp_norm_values(values: &[Complex64], volumes: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Infinity => values.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Exponent::Finite(q) => {
            // scale by the max modulus so large q cannot overflow
            let m = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if m == 0.0 {
                return 0.0;
            }
            let s: f64 = values
                .iter()
                .zip(volumes)
                .map(|(z, v)| (z.norm() / m).powf(q) * v)
                .sum();
            m * s.powf(1.0 / q)
        }
    }
}

/// The weight `g` with `Σ g_i v_i = 1` used by the Poincaré–Wirtinger mean `∫ f g`.
#[derive(Clone, Debug)]
pub struct WeightFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl WeightFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(WeightFunction { grid, values })
    }

    /// `g ≡ 1 / L^N(Ω)`.
    pub fn uniform(grid: Arc<Grid>) -> Self {
        let c = Complex64::new(1.0 / grid.total_volume(), 0.0);
        let values = vec![c; grid.len()];
        WeightFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `Σ g_i v_i`.
    pub fn integral(&self) -> Complex64 {
        self.values
            .iter()
            .zip(self.grid.volumes())
            .map(|(g, v)| g * v)
            .sum()
    }

    /// Rescale so the integral is exactly one.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.integral();
        if total.norm() < 1e-300 {
            return Err(Error::invalid("g", "weight integrates to zero and cannot be normalized"));
        }
        Ok(WeightFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|g| g / total).collect(),
        })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.integral() - 1.0).norm() <= tol
    }
}

/// `Σ f_i g_i v_i`.
pub fn weighted_mean(f: &GridFunction, g: &WeightFunction) -> Result<Complex64> {
    if f.len() != g.values.len() || **f.grid() != *g.grid {
        return Err(Error::GridMismatch("function and weight live on different grids".into()));
    }
    Ok(f.values()
        .iter()
        .zip(g.values())
        .zip(f.grid().volumes())
        .map(|((fi, gi), v)| fi * gi * v)
        .sum())
}

/// One term `c · x1^a · x2^b` of a polynomial field component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 2],
}

impl Monomial {
    pub fn new(coef: f64, a: u32, b: u32) -> Self {
        Monomial { coef, powers: [a, b] }
    }

    fn eval(&self, x: &Point) -> f64 {
        self.coef * x[0].powi(self.powers[0] as i32) * x[1].powi(self.powers[1] as i32)
    }

    fn sup_on(&self, bbox: &BoundingBox) -> f64 {
        let m0 = bbox.lo[0].abs().max(bbox.hi[0].abs());
        let m1 = bbox.lo[1].abs().max(bbox.hi[1].abs());
        self.coef.abs() * m0.powi(self.powers[0] as i32) * m1.powi(self.powers[1] as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Zero,
    Constant { vector: Point },
    Polynomial { components: [Vec<Monomial>; 2] },
}

/// A bounded magnetic potential `A` on a box containing the convex hull of Ω.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VectorField {
    kind: FieldKind,
    bbox: BoundingBox,
    sup_bound: f64,
}

impl VectorField {
    pub fn new(kind: FieldKind, bbox: BoundingBox) -> Result<Self> {
        let sup_bound = match &kind {
            FieldKind::Zero => 0.0,
            FieldKind::Constant { vector } => vector[0].hypot(vector[1]),
            FieldKind::Polynomial { components } => {
                let c0: f64 = components[0].iter().map(|m| m.sup_on(&bbox)).sum();
                let c1: f64 = components[1].iter().map(|m| m.sup_on(&bbox)).sum();
                c0.hypot(c1)
            }
        };
        if !sup_bound.is_finite() {
            return Err(Error::invalid("field", "field coefficients must be finite"));
        }
        Ok(VectorField {
            kind,
            bbox,
            sup_bound,
        })
    }

    pub fn zero(bbox: BoundingBox) -> Self {
        VectorField {
            kind: FieldKind::Zero,
            bbox,
            sup_bound: 0.0,
        }
    }

    pub fn constant(vector: Point, bbox: BoundingBox) -> Result<Self> {
        VectorField::new(FieldKind::Constant { vector }, bbox)
    }

    /// `A(x) = (x2, -x1)`.
    pub fn rotation(bbox: BoundingBox) -> Self {
        VectorField::new(
            FieldKind::Polynomial {
                components: [vec![Monomial::new(1.0, 0, 1)], vec![Monomial::new(-1.0, 1, 0)]],
            },
            bbox,
        )
        .expect("finite coefficients")
    }

    pub fn polynomial(components: [Vec<Monomial>; 2], bbox: BoundingBox) -> Result<Self> {
        VectorField::new(FieldKind::Polynomial { components }, bbox)
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }

    /// An upper bound for `|A(x)|` on the bounding box (`‖A‖_∞`).
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            FieldKind::Zero => true,
            FieldKind::Constant { vector } => vector[0] == 0.0 && vector[1] == 0.0,
            FieldKind::Polynomial { components } => {
                components.iter().flatten().all(|m| m.coef == 0.0)
            }
        }
    }

    pub fn eval(&self, x: &Point) -> Result<Point> {
        if !self.bbox.contains(x) {
            return Err(Error::OutsideBox(x[0], x[1]));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            FieldKind::Zero => [0.0, 0.0],
            FieldKind::Constant { vector } => *vector,
            FieldKind::Polynomial { components } => [
                components[0].iter().map(|m| m.eval(x)).sum(),
                components[1].iter().map(|m| m.eval(x)).sum(),
            ],
        }
    }

    /// `θ(x, y) = (x - y) · A((x + y) / 2)`.
    #[inline]
    pub fn phase(&self, x: &Point, y: &Point) -> f64 {
        if let FieldKind::Zero = self.kind {
            return 0.0;
        }
        let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
        let a = self.eval_unchecked(&mid);
        (x[0] - y[0]) * a[0] + (x[1] - y[1]) * a[1]
    }

    /// Short label for reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            FieldKind::Zero => "zero".into(),
            FieldKind::Constant { vector } => format!("constant({}, {})", vector[0], vector[1]),
            FieldKind::Polynomial { .. } => format!("polynomial(sup<={})", self.sup_bound),
        }
    }

    /// Fail unless the field covers every cell center of `grid`.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        for c in grid.centers() {
            if !self.bbox.contains(c) {
                return Err(Error::OutsideBox(c[0], c[1]));
            }
        }
        Ok(())
    }
}

/// `eval_field` as a free function.
pub fn eval_field(field: &VectorField, x: &Point) -> Result<Point> {
    field.eval(x)
}

/// The three-branch profile `f_ε(x1)`: `(2-3ε)/(2+ε)` for `x1 ≤ 0`, a linear
/// ramp down to `-1` on `(0, ε]`, and `-1` beyond.
pub fn example2_profile(eps: f64, x1: f64) -> f64 {
    let top = (2.0 - 3.0 * eps) / (2.0 + eps);
    if x1 <= 0.0 {
        top
    } else if x1 <= eps {
        top - 2.0 * (2.0 - eps) / (eps * (2.0 + eps)) * x1
    } else {
        -1.0
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("eps", format!("ramp width must lie in (0, 1), got {eps}")))
    }
}

/// `f_ε` sampled at cell centers.
pub fn make_example2(eps: f64, grid: Arc<Grid>) -> Result<GridFunction> {
    check_eps(eps)?;
    GridFunction::from_fn(grid, |x| Complex64::new(example2_profile(eps, x[0]), 0.0))
}

/// `χ_Λ`.
pub fn make_indicator(mask: &SubsetMask, grid: Arc<Grid>) -> Result<GridFunction> {
    mask.check_grid(&grid)?;
    let values = mask
        .as_slice()
        .iter()
        .map(|&b| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0))
        .collect();
    GridFunction::new(grid, values)
}

/// `g_i = e^{i a·x_i} f_i`.
pub fn gauge_transform(f: &GridFunction, a: Point) -> GridFunction {
    let grid = f.grid().clone();
    let values = f
        .values()
        .iter()
        .zip(grid.centers())
        .map(|(z, x)| z * Complex64::from_polar(1.0, a[0] * x[0] + a[1] * x[1]))
        .collect();
    GridFunction { grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, split, DomainSpec};
    use proptest::prelude::*;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0), &[n]).unwrap())
    }

    #[test]
    fn constant_one_has_unit_norm() {
        let g = interval(10);
        let f = GridFunction::constant(g, Complex64::new(1.0, 0.0));
        for q in [1.0, 1.5, 2.0, 7.0] {
            assert!((lp_norm(&f, Exponent::Finite(q)) - 1.0).abs() < 1e-14);
        }
        assert_eq!(lp_norm(&f, Exponent::Infinity), 1.0);
    }

    #[test]
    fn half_indicator_norm() {
        let g = interval(10);
        let (lam, _) = split(&g, |x| x[0] < 0.5);
        let f = make_indicator(&lam, g).unwrap();
        assert!((lp_norm(&f, Exponent::Finite(2.0)) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exponent_validation() {
        assert!(Exponent::new(0.5).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
        assert_eq!(Exponent::new(f64::INFINITY).unwrap(), Exponent::Infinity);
    }

    #[test]
    fn example2_branches() {
        assert!((example2_profile(0.25, -0.5) - 5.0 / 9.0).abs() < 1e-15);
        assert_eq!(example2_profile(0.25, 0.5), -1.0);
        assert!((example2_profile(0.25, 0.25) + 1.0).abs() < 1e-12);
        assert!(check_eps(0.0).is_err() && check_eps(1.0).is_err());
    }

    #[test]
    fn example2_norm_matches_dense_quadrature() {
        let eps = 0.25;
        let g = Arc::new(build_grid(&DomainSpec::rectangle(-1.0, 1.0, 0.0, 1.0), &[512, 4]).unwrap());
        let f = make_example2(eps, g).unwrap();
        let m = 1_000_000;
        let h = 2.0 / m as f64;
        let oracle: f64 = (0..m)
            .map(|k| example2_profile(eps, -1.0 + (k as f64 + 0.5) * h).powi(2) * h)
            .sum::<f64>()
            .sqrt();
        assert!((lp_norm(&f, Exponent::Finite(2.0)) - oracle).abs() < 1e-3);
    }

    #[test]
    fn example2_mean_is_minus_half_eps() {
        // the three-branch formula integrates to -ε, not 0, so the uniform mean is -ε/2
        let eps = 0.25;
        let g = Arc::new(build_grid(&DomainSpec::rectangle(-1.0, 1.0, 0.0, 1.0), &[64, 4]).unwrap());
        let f = make_example2(eps, g.clone()).unwrap();
        let m = weighted_mean(&f, &WeightFunction::uniform(g)).unwrap();
        assert!((m.re + eps / 2.0).abs() < 1e-12 && m.im.abs() < 1e-15, "{m}");
    }

    #[test]
    fn weighted_mean_cases() {
        let g = interval(8);
        let c = Complex64::new(0.3, -1.2);
        let f = GridFunction::constant(g.clone(), c);
        let m = weighted_mean(&f, &WeightFunction::uniform(g.clone())).unwrap();
        assert!((m - c).norm() < 1e-15);

        let (lam, gam) = split(&g, |x| x[0] < 0.5);
        let chi = make_indicator(&lam, g.clone()).unwrap();
        let w = WeightFunction::new(
            g.clone(),
            gam.as_slice().iter().map(|&b| Complex64::new(b as u8 as f64, 0.0)).collect(),
        )
        .unwrap()
        .normalize()
        .unwrap();
        assert!(w.is_normalized(1e-12));
        assert_eq!(weighted_mean(&chi, &w).unwrap(), Complex64::new(0.0, 0.0));

        let other = interval(9);
        assert!(weighted_mean(&GridFunction::constant(other, c), &w).is_err());
    }

    #[test]
    fn field_evaluation() {
        let bbox = BoundingBox::new([-1.0, -1.0], [1.0, 1.0]);
        assert_eq!(VectorField::zero(bbox).eval(&[0.2, 0.3]).unwrap(), [0.0, 0.0]);
        let c = VectorField::constant([1.5, -2.0], bbox).unwrap();
        assert_eq!(c.eval(&[0.7, -0.1]).unwrap(), [1.5, -2.0]);
        assert_eq!(c.sup_bound(), 2.5);
        let rot = VectorField::rotation(bbox);
        let v = rot.eval(&[0.3, 0.4]).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] + 0.3).abs() < 1e-15);
        assert!(rot.eval(&[1.5, 0.0]).is_err());
        assert!((rot.sup_bound() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn indicator_edge_cases() {
        let g = interval(6);
        let empty = make_indicator(&SubsetMask::none(6), g.clone()).unwrap();
        assert!(empty.values().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let full = make_indicator(&SubsetMask::all(6), g.clone()).unwrap();
        assert!(full.values().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(make_indicator(&SubsetMask::all(5), g).is_err());
    }

    #[test]
    fn indicator_of_inner_ball_has_positive_norm() {
        let g = Arc::new(build_grid(&DomainSpec::ball([0.0, 0.0], 1.0), &[32]).unwrap());
        let (lam, _) = split(&g, |x| x[0].hypot(x[1]) < 0.5);
        let f = make_indicator(&lam, g).unwrap();
        for q in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
            assert!(lp_norm(&f, q) > 0.0);
        }
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = interval(3);
        let bad = vec![Complex64::new(0.0, 0.0), Complex64::new(f64::NAN, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(GridFunction::new(g, bad), Err(Error::NonFinite(1))));
    }

    #[test]
    fn gauge_zero_is_identity_and_inverse_roundtrips() {
        let g = interval(16);
        let f = GridFunction::from_fn(g, |x| Complex64::new(x[0].sin(), x[0] * x[0])).unwrap();
        assert_eq!(gauge_transform(&f, [0.0, 0.0]).values(), f.values());
        let back = gauge_transform(&gauge_transform(&f, [3.7, 0.0]), [-3.7, 0.0]);
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    fn arb_values(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n)
    }

    proptest! {
        #[test]
        fn norm_is_absolutely_homogeneous(v in arb_values(12), cr in -4.0..4.0f64, ci in -4.0..4.0f64, qi in 0usize..4) {
            let q = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::Infinity][qi];
            let g = interval(12);
            let f = GridFunction::new(g, v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let c = Complex64::new(cr, ci);
            let lhs = lp_norm(&f.scaled(c), q);
            let rhs = c.norm() * lp_norm(&f, q);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn norm_triangle_inequality(v in arb_values(10), w in arb_values(10), qi in 0usize..4) {
            let q = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::Infinity][qi];
            let g = interval(10);
            let f1 = GridFunction::new(g.clone(), v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let f2 = GridFunction::new(g.clone(), w.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let sum = GridFunction::new(g, f1.values().iter().zip(f2.values()).map(|(a, b)| a + b).collect()).unwrap();
            prop_assert!(lp_norm(&sum, q) <= lp_norm(&f1, q) + lp_norm(&f2, q) + 1e-12);
        }

        #[test]
        fn gauge_preserves_norms(v in arb_values(9), a in -10.0..10.0f64, qi in 0usize..4) {
            let q = [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::Infinity][qi];
            let g = interval(9);
            let f = GridFunction::new(g, v.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let t = gauge_transform(&f, [a, 0.0]);
            for (x, y) in t.values().iter().zip(f.values()) {
                prop_assert!((x.norm() - y.norm()).abs() <= 1e-14 * y.norm().max(1.0));
            }
            prop_assert!((lp_norm(&t, q) - lp_norm(&f, q)).abs() <= 1e-14 * lp_norm(&f, q).max(1.0));
        }
    }
}
