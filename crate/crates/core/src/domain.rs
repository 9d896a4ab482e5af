//! Uniform-grid discretizations of intervals, rectangles and balls, Λ/Γ
//! splits, and pair regions `H ⊆ Ω×Ω`.
//!
//! Cells carry only a center and a volume; every integral in the crate is a
//! midpoint sum over cell centers. Masked shapes (balls) keep the cells whose
//! center lies inside the shape, so all volumes stay equal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane; 1D grids use the first coordinate and keep the second at zero.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Point,
    pub hi: Point,
}

impl BoundingBox {
    pub fn new(lo: Point, hi: Point) -> Self {
        BoundingBox { lo, hi }
    }

    /// Containment with a small absolute slack for round-off in midpoints.
    pub fn contains(&self, x: &Point) -> bool {
        const SLACK: f64 = 1e-12;
        (0..2).all(|k| x[k] >= self.lo[k] - SLACK && x[k] <= self.hi[k] + SLACK)
    }

    pub fn diagonal(&self) -> f64 {
        let dx = self.hi[0] - self.lo[0];
        let dy = self.hi[1] - self.lo[1];
        dx.hypot(dy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval {
        a: f64,
        b: f64,
    },
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
    },
    /// A disk, discretized on a uniform grid over `bbox`.
    Ball {
        center: Point,
        radius: f64,
        bbox: BoundingBox,
    },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Self {
        DomainSpec::Interval { a, b }
    }

    pub fn rectangle(a1: f64, b1: f64, a2: f64, b2: f64) -> Self {
        DomainSpec::Rectangle {
            x: [a1, b1],
            y: [a2, b2],
        }
    }

    /// Disk with the tight bounding box `center ± radius`.
    pub fn ball(center: Point, radius: f64) -> Self {
        DomainSpec::Ball {
            center,
            radius,
            bbox: BoundingBox::new(
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match *self {
            DomainSpec::Interval { a, b } => BoundingBox::new([a, 0.0], [b, 0.0]),
            DomainSpec::Rectangle { x, y } => BoundingBox::new([x[0], y[0]], [x[1], y[1]]),
            DomainSpec::Ball { bbox, .. } => bbox,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, field: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(field, "must be finite"))
            }
        };
        let ordered = |lo: f64, hi: f64, field: &str| {
            finite(lo, field)?;
            finite(hi, field)?;
            if lo < hi {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("degenerate bounds {lo} >= {hi}")))
            }
        };
        match *self {
            DomainSpec::Interval { a, b } => ordered(a, b, "bounds"),
            DomainSpec::Rectangle { x, y } => {
                ordered(x[0], x[1], "bounds")?;
                ordered(y[0], y[1], "bounds")
            }
            DomainSpec::Ball {
                center,
                radius,
                bbox,
            } => {
                finite(center[0], "center")?;
                finite(center[1], "center")?;
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
                }
                ordered(bbox.lo[0], bbox.hi[0], "bounds")?;
                ordered(bbox.lo[1], bbox.hi[1], "bounds")?;
                let inside = (0..2).all(|k| {
                    center[k] - radius >= bbox.lo[k] - 1e-12 && center[k] + radius <= bbox.hi[k] + 1e-12
                });
                if inside {
                    Ok(())
                } else {
                    Err(Error::invalid("bounds", "ball does not fit inside its bounding box"))
                }
            }
        }
    }

    fn admits(&self, x: &Point) -> bool {
        match *self {
            DomainSpec::Ball { center, radius, .. } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            _ => true,
        }
    }
}

/// Active cells of a uniform lattice over a bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n_per_axis: [usize; 2],
    bbox: BoundingBox,
    spacing: [f64; 2],
    centers: Vec<Point>,
    volumes: Vec<f64>,
    lattice: Vec<[usize; 2]>,
    lattice_to_active: Vec<Option<usize>>,
}

impl Grid {
    /// Uniform lattice over a rectangle (or interval), keeping the cells whose
    /// center satisfies `keep`.
    pub fn masked(
        dim: usize,
        bbox: BoundingBox,
        n: [usize; 2],
        keep: impl Fn(&Point) -> bool,
    ) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("dim", format!("only 1D and 2D grids are supported, got {dim}")));
        }
        let n = if dim == 1 { [n[0], 1] } else { n };
        for &m in &n[..dim] {
            if m < 2 {
                return Err(Error::invalid("n", format!("need at least 2 cells per axis, got {m}")));
            }
        }
        let mut spacing = [0.0; 2];
        for k in 0..dim {
            spacing[k] = (bbox.hi[k] - bbox.lo[k]) / n[k] as f64;
        }
        let volume: f64 = spacing[..dim].iter().product();

        let mut centers = Vec::new();
        let mut lattice = Vec::new();
        let mut lattice_to_active = vec![None; n[0] * n[1]];
        // x1 varies slowest so cells of one x1-column are contiguous.
        for i in 0..n[0] {
            for j in 0..n[1] {
                let mut c = [bbox.lo[0] + (i as f64 + 0.5) * spacing[0], 0.0];
                if dim == 2 {
                    c[1] = bbox.lo[1] + (j as f64 + 0.5) * spacing[1];
                }
                if keep(&c) {
                    lattice_to_active[i * n[1] + j] = Some(centers.len());
                    centers.push(c);
                    lattice.push([i, j]);
                }
            }
        }
        if centers.is_empty() {
            return Err(Error::invalid("domain", "no active cells"));
        }
        let volumes = vec![volume; centers.len()];
        Ok(Grid {
            dim,
            n_per_axis: n,
            bbox,
            spacing,
            centers,
            volumes,
            lattice,
            lattice_to_active,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of active cells.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn n_per_axis(&self) -> &[usize] {
        &self.n_per_axis[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> Point {
        self.centers[i]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    /// The common cell volume, or `None` if volumes differ.
    pub fn uniform_volume(&self) -> Option<f64> {
        let v0 = self.volumes[0];
        self.volumes.iter().all(|&v| v == v0).then_some(v0)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Lattice coordinates `(column, row)` of an active cell.
    pub fn lattice_index(&self, i: usize) -> [usize; 2] {
        self.lattice[i]
    }

    /// Active cell at lattice coordinates, if any.
    pub fn active_at(&self, col: usize, row: usize) -> Option<usize> {
        if col >= self.n_per_axis[0] || row >= self.n_per_axis[1] {
            return None;
        }
        self.lattice_to_active[col * self.n_per_axis[1] + row]
    }

    /// Active lattice neighbours (4-neighbourhood in 2D).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let [c, r] = self.lattice[i];
        let mut out = Vec::with_capacity(4);
        let mut push = |col: Option<usize>, row: Option<usize>| {
            if let (Some(col), Some(row)) = (col, row) {
                if let Some(k) = self.active_at(col, row) {
                    out.push(k);
                }
            }
        };
        push(c.checked_sub(1), Some(r));
        push(Some(c + 1), Some(r));
        if self.dim == 2 {
            push(Some(c), r.checked_sub(1));
            push(Some(c), Some(r + 1));
        }
        out
    }

    /// Euclidean distance between two cell centers.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.centers[i];
        let b = self.centers[j];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// An upper bound on the diameter of the active cell set, extended by one
    /// cell diagonal so that whole cells fit in a ball of this radius around
    /// any center.
    pub fn diameter_bound(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.centers {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let cell = self.spacing[..self.dim].iter().map(|h| h * h).sum::<f64>().sqrt();
        (hi[0] - lo[0]).hypot(hi[1] - lo[1]) + cell
    }

    /// Surface measure of the unit sphere in `R^N`: 2 for `N = 1`, 2π for `N = 2`.
    pub fn unit_sphere_measure(&self) -> f64 {
        if self.dim == 1 {
            2.0
        } else {
            2.0 * std::f64::consts::PI
        }
    }
}

/// Uniform grid for `spec` with `n` cells per axis (a single entry is reused
/// for every axis).
pub fn build_grid(spec: &DomainSpec, n: &[usize]) -> Result<Grid> {
    spec.validate()?;
    let dim = spec.dim();
    let res = match (dim, n) {
        (_, []) => return Err(Error::invalid("n", "missing resolution")),
        (1, [m]) => [*m, 1],
        (_, [m]) => [*m, *m],
        (2, [a, b]) => [*a, *b],
        _ => {
            return Err(Error::invalid(
                "n",
                format!("expected {dim} resolution entries, got {}", n.len()),
            ))
        }
    };
    Grid::masked(dim, spec.bounding_box(), res, |x| spec.admits(x))
}

/// Membership of active cells in a subset Λ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetMask {
    member: Vec<bool>,
}

impl SubsetMask {
    pub fn new(member: Vec<bool>) -> Self {
        SubsetMask { member }
    }

    pub fn all(n: usize) -> Self {
        SubsetMask { member: vec![true; n] }
    }

    pub fn none(n: usize) -> Self {
        SubsetMask { member: vec![false; n] }
    }

    pub fn from_predicate(grid: &Grid, pred: impl Fn(&Point) -> bool) -> Self {
        SubsetMask {
            member: grid.centers().iter().map(pred).collect(),
        }
    }

    pub fn complement(&self) -> Self {
        SubsetMask {
            member: self.member.iter().map(|b| !b).collect(),
        }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.member.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.member
    }

    /// Lebesgue measure of the subset on `grid`.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.indices().map(|i| grid.volume(i)).sum()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.len() == grid.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "mask has {} cells, grid has {}",
                self.len(),
                grid.len()
            )))
        }
    }
}

/// Split the active cells into Λ (predicate true) and Γ = complement.
pub fn split(grid: &Grid, pred: impl Fn(&Point) -> bool) -> (SubsetMask, SubsetMask) {
    let lambda = SubsetMask::from_predicate(grid, pred);
    let gamma = lambda.complement();
    (lambda, gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Full,
    Product,
    ComplementOfProduct,
}

/// A set of index pairs `H ⊆ Ω×Ω`. Diagonal pairs are members; the pair sums
/// skip them.
#[derive(Clone, Debug, PartialEq)]
pub enum PairRegion {
    Full { n: usize },
    Product(SubsetMask, SubsetMask),
    ComplementOfProduct(SubsetMask),
}

impl PairRegion {
    pub fn full(n: usize) -> Self {
        PairRegion::Full { n }
    }

    pub fn product(a: SubsetMask, b: SubsetMask) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::GridMismatch(format!(
                "product of masks with {} and {} cells",
                a.len(),
                b.len()
            )));
        }
        Ok(PairRegion::Product(a, b))
    }

    pub fn square(lambda: &SubsetMask) -> Self {
        PairRegion::Product(lambda.clone(), lambda.clone())
    }

    pub fn complement_of_product(lambda: SubsetMask) -> Self {
        PairRegion::ComplementOfProduct(lambda)
    }

    /// Build a region of the given kind. `Product` uses `Λ×Λ`; the complement
    /// is `(Ω×Ω) \ (Λ×Λ)`.
    pub fn from_kind(kind: RegionKind, grid: &Grid, lambda: Option<&SubsetMask>) -> Result<Self> {
        match kind {
            RegionKind::Full => Ok(PairRegion::full(grid.len())),
            RegionKind::Product | RegionKind::ComplementOfProduct => {
                let lambda = lambda.ok_or_else(|| Error::invalid("split", "region needs a Λ split"))?;
                lambda.check_grid(grid)?;
                Ok(if kind == RegionKind::Product {
                    PairRegion::square(lambda)
                } else {
                    PairRegion::complement_of_product(lambda.clone())
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PairRegion::Full { n } => *n,
            PairRegion::Product(a, _) => a.len(),
            PairRegion::ComplementOfProduct(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        match self {
            PairRegion::Full { .. } => true,
            PairRegion::Product(a, b) => a.contains(i) && b.contains(j),
            PairRegion::ComplementOfProduct(m) => !(m.contains(i) && m.contains(j)),
        }
    }

    /// Whether any pair in row `i` can be a member; lets pair loops skip rows.
    #[inline]
    pub(crate) fn row_possible(&self, i: usize) -> bool {
        match self {
            PairRegion::Product(a, _) => a.contains(i),
            _ => true,
        }
    }

    /// Number of member pairs, diagonal included.
    pub fn member_count(&self) -> usize {
        let n = self.len();
        match self {
            PairRegion::Full { .. } => n * n,
            PairRegion::Product(a, b) => a.count() * b.count(),
            PairRegion::ComplementOfProduct(m) => n * n - m.count() * m.count(),
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.len() == grid.len() {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "pair region over {} cells, grid has {}",
                self.len(),
                grid.len()
            )))
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PairRegion::Full { .. } => "full".to_string(),
            PairRegion::Product(a, b) if a == b => format!("lambda_x_lambda(|lambda|={})", a.count()),
            PairRegion::Product(a, b) => format!("product({}x{})", a.count(), b.count()),
            PairRegion::ComplementOfProduct(m) => {
                format!("complement_of_lambda_x_lambda(|lambda|={})", m.count())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_cells() {
        let g = build_grid(&DomainSpec::interval(0.0, 1.0), &[4]).unwrap();
        assert_eq!(g.len(), 4);
        let xs: Vec<f64> = g.centers().iter().map(|c| c[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(g.volumes().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn rectangle_cells() {
        let g = build_grid(&DomainSpec::rectangle(-1.0, 1.0, 0.0, 1.0), &[4, 2]).unwrap();
        assert_eq!(g.len(), 8);
        assert!(g.volumes().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(g.uniform_volume(), Some(0.25));
    }

    #[test]
    fn ball_area_close_to_pi() {
        let g = build_grid(&DomainSpec::ball([0.0, 0.0], 1.0), &[64]).unwrap();
        let area = g.total_volume();
        assert!((area - std::f64::consts::PI).abs() / std::f64::consts::PI < 0.05, "{area}");
        // every active center is inside the disk
        assert!(g.centers().iter().all(|c| c[0] * c[0] + c[1] * c[1] < 1.0));
    }

    #[test]
    fn degenerate_specs_rejected() {
        assert!(build_grid(&DomainSpec::interval(1.0, 1.0), &[4]).is_err());
        assert!(build_grid(&DomainSpec::interval(0.0, 1.0), &[1]).is_err());
        assert!(build_grid(&DomainSpec::interval(0.0, 1.0), &[0]).is_err());
        assert!(build_grid(&DomainSpec::rectangle(0.0, 1.0, 2.0, 1.0), &[4]).is_err());
        let bad = DomainSpec::Ball {
            center: [0.0, 0.0],
            radius: 1.0,
            bbox: BoundingBox::new([-0.5, -1.0], [1.0, 1.0]),
        };
        assert!(build_grid(&bad, &[8]).is_err());
        assert!(build_grid(&DomainSpec::ball([0.0, 0.0], -1.0), &[8]).is_err());
    }

    #[test]
    fn example2_split_halves() {
        let g = build_grid(&DomainSpec::rectangle(-1.0, 1.0, 0.0, 1.0), &[8, 4]).unwrap();
        let (lam, gam) = split(&g, |x| x[0] <= 0.0);
        assert_eq!(lam.count(), 16);
        assert_eq!(gam.count(), 16);
        assert!(lam.indices().all(|i| g.center(i)[0] < 0.0));
        assert!(gam.indices().all(|i| g.center(i)[0] > 0.0));
    }

    #[test]
    fn always_true_split_has_empty_gamma() {
        let g = build_grid(&DomainSpec::interval(0.0, 1.0), &[5]).unwrap();
        let (lam, gam) = split(&g, |_| true);
        assert_eq!(lam.count(), 5);
        assert_eq!(gam.count(), 0);
    }

    #[test]
    fn inner_ball_quarter_of_disk() {
        let g = build_grid(&DomainSpec::ball([0.0, 0.0], 1.0), &[64]).unwrap();
        let (lam, _) = split(&g, |x| x[0].hypot(x[1]) < 0.5);
        let ratio = lam.count() as f64 / g.len() as f64;
        assert!((ratio - 0.25).abs() / 0.25 < 0.05, "{ratio}");
    }

    #[test]
    fn region_counts() {
        let lam = SubsetMask::new(vec![true, true, false, false]);
        assert_eq!(PairRegion::square(&lam).member_count(), 4);
        assert_eq!(PairRegion::complement_of_product(lam.clone()).member_count(), 12);
        assert_eq!(PairRegion::full(7).member_count(), 49);
        let mut counted = 0;
        let comp = PairRegion::complement_of_product(lam);
        for i in 0..4 {
            for j in 0..4 {
                counted += comp.contains(i, j) as usize;
            }
        }
        assert_eq!(counted, 12);
    }

    #[test]
    fn mismatched_masks_rejected() {
        assert!(PairRegion::product(SubsetMask::all(3), SubsetMask::all(4)).is_err());
        let g = build_grid(&DomainSpec::interval(0.0, 1.0), &[4]).unwrap();
        let region = PairRegion::square(&SubsetMask::all(5));
        assert!(region.check_grid(&g).is_err());
    }

    #[test]
    fn square_and_complement_partition_full() {
        // exhaustive over masks on small grids
        for n in 1..=10usize {
            for bits in [0u32, 1, 0b1010_1010, 0b11_0110_1001, u32::MAX] {
                let lam = SubsetMask::new((0..n).map(|k| bits >> (k % 32) & 1 == 1).collect());
                let sq = PairRegion::square(&lam);
                let co = PairRegion::complement_of_product(lam.clone());
                for i in 0..n {
                    for j in 0..n {
                        assert!(sq.contains(i, j) ^ co.contains(i, j));
                    }
                }
                assert_eq!(sq.member_count() + co.member_count(), n * n);
            }
        }
    }

    #[test]
    fn neighbors_on_ball_stay_active() {
        let g = build_grid(&DomainSpec::ball([0.0, 0.0], 1.0), &[12]).unwrap();
        for i in 0..g.len() {
            let nb = g.neighbors(i);
            assert!(!nb.is_empty() && nb.len() <= 4);
            for k in nb {
                assert!((g.distance(i, k) - g.spacing()[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let spec = DomainSpec::ball([0.1, -0.2], 0.7);
        assert_eq!(build_grid(&spec, &[20]).unwrap(), build_grid(&spec, &[20]).unwrap());
    }
}
