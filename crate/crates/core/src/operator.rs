//! The regional magnetic fractional Laplacian at `p = 2` as a dense matrix.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::fields::{GridFunction, VectorField};
use crate::seminorm::check_s;

/// Each unordered pair appears twice in the ordered pair sum, so the operator
/// whose form `⟨Lf, f⟩_m` reproduces `[f]²` carries a factor 2 on every
/// kernel entry.
pub const FORM_FACTOR: f64 = 2.0;

/// `L_ii = 2 Σ_{j≠i} v_j K_ij`, `L_ij = -2 e^{iθ_ij} v_j K_ij`,
/// `K_ij = |x_i - x_j|^{-(N+2s)}`.
///
/// Volumes are uniform, so `L` is Hermitian in the plain inner product as well
/// as in the mass-weighted one.
#[derive(Clone, Debug)]
pub struct RegionalOperator {
    grid: Arc<Grid>,
    s: f64,
    field: VectorField,
    vol: f64,
    matrix: DMatrix<Complex64>,
}

pub fn assemble(grid: Arc<Grid>, s: f64, field: VectorField) -> Result<RegionalOperator> {
    RegionalOperator::assemble(grid, s, field)
}

impl RegionalOperator {
    pub fn assemble(grid: Arc<Grid>, s: f64, field: VectorField) -> Result<Self> {
        check_s(s)?;
        let vol = grid
            .uniform_volume()
            .ok_or_else(|| Error::invalid("grid", "operator assembly needs uniform cell volumes"))?;
        field.check_grid(&grid)?;
        let n = grid.len();
        let expo = -(grid.dim() as f64 + 2.0 * s);
        let centers = grid.centers();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = centers[i];
                let mut row = vec![Complex64::new(0.0, 0.0); n];
                let mut diag = 0.0;
                for (j, xj) in centers.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let k = FORM_FACTOR * vol * (xi[0] - xj[0]).hypot(xi[1] - xj[1]).powf(expo);
                    diag += k;
                    row[j] = -Complex64::from_polar(k, field.phase(&xi, xj));
                }
                row[i] = Complex64::new(diag, 0.0);
                row
            })
            .collect();
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(RegionalOperator {
            grid,
            s,
            field,
            vol,
            matrix,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// The common cell volume, i.e. the mass matrix is `vol · I`.
    pub fn mass(&self) -> f64 {
        self.vol
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// `‖L‖_∞`, the maximum absolute row sum; an upper bound for the spectral radius.
    pub fn norm_estimate(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub(crate) fn apply_values(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, fj) in f.iter().enumerate() {
                    acc += self.matrix[(i, j)] * fj;
                }
                acc
            })
            .collect()
    }

    /// `(Lf)_i = Σ_j L_ij f_j`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        GridFunction::new(self.grid.clone(), self.apply_values(f.values()))
    }

    /// `Re Σ_i conj(f_i) (Lf)_i v_i`, which equals the `p = 2` seminorm squared.
    pub fn quadratic_form(&self, f: &GridFunction) -> Result<f64> {
        self.check(f)?;
        Ok(self.form_values(f.values()))
    }

    pub(crate) fn form_values(&self, f: &[Complex64]) -> f64 {
        let lf = self.apply_values(f);
        self.inner(&lf, f).re
    }

    /// `⟨u, w⟩_m = Σ u_i conj(w_i) v_i`.
    pub(crate) fn inner(&self, u: &[Complex64], w: &[Complex64]) -> Complex64 {
        u.iter().zip(w).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.vol
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        f.check_grid(&self.grid)
    }

    /// `max |⟨Lf, g⟩_m - ⟨f, Lg⟩_m| / (‖f‖ ‖g‖ ‖L‖)` over seeded Gaussian probes.
    pub fn hermitian_residual(&self) -> f64 {
        self.hermitian_residual_with(8, 0x5eed)
    }

    pub fn hermitian_residual_with(&self, probes: usize, seed: u64) -> f64 {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm_l = self.norm_estimate().max(f64::MIN_POSITIVE);
        let mut draw = || -> Vec<Complex64> {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect()
        };
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let f = draw();
            let g = draw();
            let lf = self.apply_values(&f);
            let lg = self.apply_values(&g);
            let a = self.inner(&lf, &g);
            let b = self.inner(&f, &lg);
            let nf = self.inner(&f, &f).re.sqrt();
            let ng = self.inner(&g, &g).re.sqrt();
            worst = worst.max((a - b).norm() / (nf * ng * norm_l));
        }
        worst
    }

    /// CSV triples `i, j, re, im` for the nonzero entries.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j", "re", "im"])?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let z = self.matrix[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    out.serialize((i, j, z.re, z.im))?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Little-endian binary: `u64 n`, then `n²` pairs `(re: f64, im: f64)` in
    /// row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.len();
        w.write_all(&(n as u64).to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, PairRegion};
    use crate::fields::gauge_transform;
    use crate::seminorm::{magnetic_seminorm, SeminormParams};
    use proptest::prelude::*;
    use rand::Rng;

    fn grid1(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::interval(0.0, 1.0), &[n]).unwrap())
    }

    fn random_fn(grid: &Arc<Grid>, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        GridFunction::new(grid.clone(), v).unwrap()
    }

    #[test]
    fn two_cells() {
        let g = grid1(2);
        let s = 0.3;
        let op = assemble(g.clone(), s, VectorField::zero(g.bounding_box())).unwrap();
        let (h, d) = (0.5f64, 0.5f64);
        let c = FORM_FACTOR * h / d.powf(1.0 + 2.0 * s);
        for (i, j, sign) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)] {
            assert!((op.entry(i, j) - Complex64::new(sign * c, 0.0)).norm() <= 1e-15 * c);
        }
        assert!(op.hermitian_residual() <= 1e-15);
    }

    #[test]
    fn zero_field_is_real_symmetric_and_kills_constants() {
        let g = grid1(17);
        let op = assemble(g.clone(), 0.6, VectorField::zero(g.bounding_box())).unwrap();
        for i in 0..17 {
            for j in 0..17 {
                assert_eq!(op.entry(i, j).im, 0.0);
                assert_eq!(op.entry(i, j), op.entry(j, i));
            }
        }
        assert!(op.hermitian_residual() <= 1e-13);
        let one = GridFunction::constant(g.clone(), Complex64::new(1.0, 0.0));
        let lf = op.apply(&one).unwrap();
        // row sums cancel up to the rounding of the diagonal accumulation
        let tol = 1e-14 * op.norm_estimate();
        assert!(lf.values().iter().all(|z| z.norm() <= tol));
        assert!(op.quadratic_form(&one).unwrap().abs() <= tol);
    }

    #[test]
    fn constant_field_gauge_covariance() {
        let g = grid1(24);
        let a = 2.3;
        let op0 = assemble(g.clone(), 0.5, VectorField::zero(g.bounding_box())).unwrap();
        let opa = assemble(g.clone(), 0.5, VectorField::constant([a, 0.0], g.bounding_box()).unwrap()).unwrap();
        let xs = g.centers();
        let scale = op0.norm_estimate();
        for i in 0..24 {
            for j in 0..24 {
                let u = Complex64::from_polar(1.0, a * (xs[j][0] - xs[i][0]));
                assert!((opa.entry(i, j) * u - op0.entry(i, j)).norm() <= 1e-12 * scale);
            }
        }
        let plane = gauge_transform(&GridFunction::constant(g.clone(), Complex64::new(0.7, 0.2)), [a, 0.0]);
        let lf = opa.apply(&plane).unwrap();
        assert!(lf.values().iter().all(|z| z.norm() <= 1e-12 * scale));
    }

    #[test]
    fn apply_matches_hand_rolled_sum() {
        let g = grid1(5);
        let field = VectorField::constant([1.0, 0.0], g.bounding_box()).unwrap();
        let op = assemble(g.clone(), 0.4, field.clone()).unwrap();
        let f = random_fn(&g, 11);
        let lf = op.apply(&f).unwrap();
        let xs = g.centers();
        for i in 0..5 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..5 {
                if i != j {
                    let k = 2.0 * 0.2 / (xs[i][0] - xs[j][0]).abs().powf(1.8);
                    let th = (xs[i][0] - xs[j][0]) * 1.0;
                    acc += k * (f.values()[i] - Complex64::new(th.cos(), th.sin()) * f.values()[j]);
                }
            }
            assert!((lf.values()[i] - acc).norm() <= 1e-12 * acc.norm().max(1.0));
        }
    }

    #[test]
    fn indicator_form_by_expansion() {
        let g = grid1(4);
        let op = assemble(g.clone(), 0.5, VectorField::zero(g.bounding_box())).unwrap();
        let f = GridFunction::from_fn(g.clone(), |x| Complex64::new(if x[0] < 0.5 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        // cross pairs (i in Λ, j in Γ) and (j, i): 2 Σ v² |x_i - x_j|^{-2}
        let xs = [0.125f64, 0.375, 0.625, 0.875];
        let mut oracle = 0.0;
        for a in &xs[..2] {
            for b in &xs[2..] {
                oracle += 2.0 * 0.0625 / (a - b).powi(2);
            }
        }
        let q = op.quadratic_form(&f).unwrap();
        assert!((q - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn rotation_field_2d_residual() {
        let g = Arc::new(build_grid(&DomainSpec::rectangle(-1.0, 1.0, -1.0, 1.0), &[16]).unwrap());
        let op = assemble(g.clone(), 0.5, VectorField::rotation(g.bounding_box())).unwrap();
        assert!(op.hermitian_residual() <= 1e-11);
    }

    #[test]
    fn bad_s_rejected() {
        let g = grid1(4);
        assert!(assemble(g.clone(), 1.0, VectorField::zero(g.bounding_box())).is_err());
    }

    #[test]
    fn exports() {
        let g = grid1(3);
        let op = assemble(g.clone(), 0.5, VectorField::rotation(g.bounding_box())).unwrap();
        let mut bin = Vec::new();
        op.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 8 + 9 * 16);
        assert_eq!(u64::from_le_bytes(bin[..8].try_into().unwrap()), 3);
        let re01 = f64::from_le_bytes(bin[8 + 16..8 + 24].try_into().unwrap());
        assert_eq!(re01, op.entry(0, 1).re);
        let mut csv = Vec::new();
        op.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn form_matches_seminorm(seed in any::<u64>(), n in 2usize..=64, s in 0.1..0.9f64) {
            let g = grid1(n);
            let field = VectorField::rotation(g.bounding_box());
            let op = assemble(g.clone(), s, field.clone()).unwrap();
            let f = random_fn(&g, seed);
            let q = op.quadratic_form(&f).unwrap();
            let params = SeminormParams::new(s, 2.0, field).unwrap();
            let sn = magnetic_seminorm(&f, &params, &PairRegion::full(n)).unwrap().value_p;
            prop_assert!((q - sn).abs() <= 1e-10 * sn);
            let f2: f64 = f.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * op.mass();
            prop_assert!(q >= -1e-12 * f2);
        }
    }
}
