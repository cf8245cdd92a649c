//! Discretized fibers: continuous segments `C([-1,0], R^N)` and
//! `L = R^N × L_p([-1,0], R^N)` on a uniform grid of `[-1, 0]`, the
//! embedding `J u = (u(0), u)`, and orthonormal frames for subspace work.
//!
//! Coordinates are node-major: a `SegmentC` is the stacked nodal values
//! `u(s_0), …, u(s_M)`; a `SegmentL` is the head followed by the stacked
//! density values. Subspace computations use the Euclidean inner product on
//! these coordinates.
//!
//! Densities are stored by nodal values, which picks the continuous
//! representative of an `L_p` class. Discontinuous data is therefore only
//! represented up to the grid resolution.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{principal_angles_orthonormal, DEPENDENCE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    C,
    L,
}

impl FiberKind {
    /// Coordinate dimension of the fiber on `grid` with `R^n` values.
    pub fn ambient_dim(self, grid: GridSpec, n: usize) -> usize {
        match self {
            FiberKind::C => n * (grid.m + 1),
            FiberKind::L => n * (grid.m + 2),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FiberKind::C => "C",
            FiberKind::L => "L",
        }
    }
}

/// Uniform grid `s_j = -1 + j/M`, `j = 0..=M`, of the delay interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
}

impl GridSpec {
    pub const MIN_INTERVALS: usize = 4;

    pub fn new(m: usize) -> Result<Self> {
        if m < Self::MIN_INTERVALS {
            return Err(invalid(
                "m",
                format!("need at least {} subintervals, got {m}", Self::MIN_INTERVALS),
            ));
        }
        Ok(GridSpec { m })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn nodes(&self) -> usize {
        self.m + 1
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.m {
            0.0
        } else {
            -1.0 + j as f64 / self.m as f64
        }
    }

    /// Trapezoid weights on the nodes.
    pub fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.m {
            0.5 * self.h()
        } else {
            self.h()
        }
    }
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid("values", "segment entries must be finite"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentC {
    grid: GridSpec,
    dim: usize,
    values: DVector<f64>,
}

impl SegmentC {
    pub fn from_coords(grid: GridSpec, dim: usize, values: DVector<f64>) -> Result<Self> {
        if values.len() != dim * grid.nodes() {
            return Err(Error::DimensionMismatch {
                expected: dim * grid.nodes(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(SegmentC { grid, dim, values })
    }

    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        SegmentC {
            grid,
            dim,
            values: DVector::zeros(dim * grid.nodes()),
        }
    }

    /// Sample `f(s)` at every node.
    pub fn from_fn<F: FnMut(f64) -> DVector<f64>>(grid: GridSpec, dim: usize, mut f: F) -> Self {
        let mut values = DVector::zeros(dim * grid.nodes());
        for j in 0..grid.nodes() {
            let v = f(grid.node(j));
            values.rows_mut(j * dim, dim).copy_from(&v);
        }
        SegmentC { grid, dim, values }
    }

    pub fn constant(grid: GridSpec, v: &DVector<f64>) -> Self {
        Self::from_fn(grid, v.len(), |_| v.clone())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn node(&self, j: usize) -> DVector<f64> {
        self.values.rows(j * self.dim, self.dim).into_owned()
    }

    /// `u(0)`
    pub fn at_zero(&self) -> DVector<f64> {
        self.node(self.grid.m)
    }

    /// Supremum norm: the largest Euclidean norm over the nodes.
    pub fn norm(&self) -> f64 {
        norm_c(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for i in 0..self.dim {
            let _ = write!(out, ",u{i}");
        }
        out.push('\n');
        for j in 0..self.grid.nodes() {
            let _ = write!(out, "{}", self.grid.node(j));
            for i in 0..self.dim {
                let _ = write!(out, ",{}", self.values[j * self.dim + i]);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentL {
    grid: GridSpec,
    dim: usize,
    p: f64,
    head: DVector<f64>,
    density: DVector<f64>,
}

impl SegmentL {
    pub fn new(grid: GridSpec, p: f64, head: DVector<f64>, density: DVector<f64>) -> Result<Self> {
        let dim = head.len();
        if density.len() != dim * grid.nodes() {
            return Err(Error::DimensionMismatch {
                expected: dim * grid.nodes(),
                got: density.len(),
            });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must lie in (1, ∞), got {p}")));
        }
        check_finite(&head)?;
        check_finite(&density)?;
        Ok(SegmentL {
            grid,
            dim,
            p,
            head,
            density,
        })
    }

    pub fn from_coords(grid: GridSpec, dim: usize, p: f64, coords: &DVector<f64>) -> Result<Self> {
        if coords.len() != dim * (grid.nodes() + 1) {
            return Err(Error::DimensionMismatch {
                expected: dim * (grid.nodes() + 1),
                got: coords.len(),
            });
        }
        Self::new(
            grid,
            p,
            coords.rows(0, dim).into_owned(),
            coords.rows(dim, dim * grid.nodes()).into_owned(),
        )
    }

    pub fn zeros(grid: GridSpec, dim: usize, p: f64) -> Self {
        SegmentL {
            grid,
            dim,
            p,
            head: DVector::zeros(dim),
            density: DVector::zeros(dim * grid.nodes()),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn head(&self) -> &DVector<f64> {
        &self.head
    }

    pub fn density(&self) -> &DVector<f64> {
        &self.density
    }

    pub fn density_node(&self, j: usize) -> DVector<f64> {
        self.density.rows(j * self.dim, self.dim).into_owned()
    }

    pub fn coords(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim * (self.grid.nodes() + 1));
        c.rows_mut(0, self.dim).copy_from(&self.head);
        c.rows_mut(self.dim, self.density.len()).copy_from(&self.density);
        c
    }

    /// `‖u₁‖ + ‖u₂‖_p` with the trapezoid rule for the integral.
    pub fn norm(&self) -> f64 {
        norm_l(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for i in 0..self.dim {
            let _ = write!(out, ",u{i}");
        }
        out.push('\n');
        out.push_str("head");
        for i in 0..self.dim {
            let _ = write!(out, ",{}", self.head[i]);
        }
        out.push('\n');
        for j in 0..self.grid.nodes() {
            let _ = write!(out, "{}", self.grid.node(j));
            for i in 0..self.dim {
                let _ = write!(out, ",{}", self.density[j * self.dim + i]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn norm_c(u: &SegmentC) -> f64 {
    (0..u.grid.nodes())
        .map(|j| u.values.rows(j * u.dim, u.dim).norm())
        .fold(0.0, f64::max)
}

pub fn norm_l(u: &SegmentL) -> f64 {
    let g = u.grid;
    let integral: f64 = (0..g.nodes())
        .map(|j| g.trapezoid_weight(j) * u.density.rows(j * u.dim, u.dim).norm().powf(u.p))
        .sum();
    u.head.norm() + integral.powf(1.0 / u.p)
}

/// Norm of a coordinate vector in the given fiber.
pub fn fiber_norm(kind: FiberKind, grid: GridSpec, dim: usize, p: f64, coords: &DVector<f64>) -> f64 {
    match kind {
        FiberKind::C => norm_c(&SegmentC {
            grid,
            dim,
            values: coords.clone(),
        }),
        FiberKind::L => norm_l(&SegmentL {
            grid,
            dim,
            p,
            head: coords.rows(0, dim).into_owned(),
            density: coords.rows(dim, dim * grid.nodes()).into_owned(),
        }),
    }
}

/// Square roots of the weights of the inner product
/// `⟨x, y⟩ = x(0)·y(0) + ∫ x·y` on fiber coordinates (trapezoid rule). The
/// point term sits at node `M` on C and on the head on L, so that
/// `⟨Jx, Jy⟩_L = ⟨x, y⟩_C`.
pub fn inner_product_sqrt_weights(kind: FiberKind, grid: GridSpec, dim: usize) -> DVector<f64> {
    let nodes = grid.nodes();
    match kind {
        FiberKind::C => DVector::from_fn(dim * nodes, |r, _| {
            let j = r / dim;
            let point = if j == grid.m { 1.0 } else { 0.0 };
            (grid.trapezoid_weight(j) + point).sqrt()
        }),
        FiberKind::L => DVector::from_fn(dim * (nodes + 1), |r, _| {
            if r < dim {
                1.0
            } else {
                grid.trapezoid_weight((r - dim) / dim).sqrt()
            }
        }),
    }
}

/// `J u = (u(0), u)`.
pub fn embed_j(u: &SegmentC, p: f64) -> SegmentL {
    SegmentL {
        grid: u.grid,
        dim: u.dim,
        p,
        head: u.at_zero(),
        density: u.values.clone(),
    }
}

/// `J` acting on C-coordinates (columns of `x`), giving L-coordinates.
pub fn embed_j_coords(dim: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = x.nrows();
    let mut out = DMatrix::zeros(rows + dim, x.ncols());
    out.rows_mut(0, dim).copy_from(&x.rows(rows - dim, dim));
    out.rows_mut(dim, rows).copy_from(x);
    out
}

/// Transpose of [`embed_j_coords`]: `Jᵀ (h, d) = d + h` placed at the node `s = 0`.
pub fn embed_j_transpose_coords(dim: usize, y: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = y.nrows() - dim;
    let mut out = y.rows(dim, rows).into_owned();
    let mut last = out.rows_mut(rows - dim, dim);
    last += y.rows(0, dim);
    out
}

/// Recover `u` from `v = J u`. Fails when the head differs from the density
/// at `s = 0` by more than `tol`, i.e. when `v` is not in the range of `J`.
pub fn try_invert_j(v: &SegmentL, tol: f64) -> Option<SegmentC> {
    let g = v.grid;
    let at_zero = v.density_node(g.m);
    if (&v.head - at_zero).norm() > tol {
        return None;
    }
    Some(SegmentC {
        grid: g,
        dim: v.dim,
        values: v.density.clone(),
    })
}

/// Orthonormal frame of a subspace of a coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFrame {
    pub ambient_dim: usize,
    pub vectors: DMatrix<f64>,
}

impl SubspaceFrame {
    /// Wrap columns that are already orthonormal (checked to `1e-10`).
    pub fn from_orthonormal(vectors: DMatrix<f64>) -> Result<Self> {
        let k = vectors.ncols();
        let gram = vectors.transpose() * &vectors;
        let err = (gram - DMatrix::identity(k, k)).amax();
        if err > 1e-10 {
            return Err(Error::Numerical(format!(
                "frame columns are not orthonormal (error {err:e})"
            )));
        }
        Ok(SubspaceFrame {
            ambient_dim: vectors.nrows(),
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Largest angle between `x` and this subspace.
    pub fn angle_to(&self, x: &DVector<f64>) -> f64 {
        let nx = x.norm();
        if nx == 0.0 {
            return 0.0;
        }
        let proj = self.vectors.transpose() * x;
        let resid = (x - &self.vectors * &proj).norm();
        (resid / nx).clamp(0.0, 1.0).asin()
    }
}

#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub frame: SubspaceFrame,
    /// Number of input columns dropped as numerically dependent.
    pub rank_deficiency: usize,
}

/// Pivoted Gram-Schmidt: repeatedly takes the remaining column with the
/// largest residual, so near-dependent columns are the ones dropped.
pub fn orthonormalize(vectors: &DMatrix<f64>) -> Result<Orthonormalized> {
    let (n, k) = vectors.shape();
    if k == 0 {
        return Err(invalid("vectors", "need at least one vector"));
    }
    let scale = (0..k).map(|j| vectors.column(j).norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroVector);
    }
    let mut resid: Vec<DVector<f64>> = (0..k).map(|j| vectors.column(j).into_owned()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut remaining: Vec<usize> = (0..k).collect();
    while !remaining.is_empty() && basis.len() < n {
        let mut pos = 0;
        for (i, &j) in remaining.iter().enumerate() {
            if resid[j].norm() > resid[remaining[pos]].norm() {
                pos = i;
            }
        }
        let best = remaining[pos];
        let mut v = resid[best].clone();
        for b in &basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        let nv = v.norm();
        if nv <= 1e2 * DEPENDENCE_TOL * scale {
            break;
        }
        let q = v / nv;
        remaining.remove(pos);
        for &j in &remaining {
            let c = q.dot(&resid[j]);
            resid[j].axpy(-c, &q, 1.0);
        }
        basis.push(q);
    }
    let rank = basis.len();
    let mut m = DMatrix::zeros(n, rank);
    for (j, b) in basis.iter().enumerate() {
        m.set_column(j, b);
    }
    Ok(Orthonormalized {
        frame: SubspaceFrame {
            ambient_dim: n,
            vectors: m,
        },
        rank_deficiency: k - rank,
    })
}

/// Principal angles between two subspaces, ascending, in `[0, π/2]`.
pub fn principal_angles(p: &SubspaceFrame, q: &SubspaceFrame) -> Result<Vec<f64>> {
    if p.ambient_dim != q.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: p.ambient_dim,
            got: q.ambient_dim,
        });
    }
    Ok(principal_angles_orthonormal(&p.vectors, &q.vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn grid(m: usize) -> GridSpec {
        GridSpec::new(m).unwrap()
    }

    fn frame(cols: &[&[f64]]) -> SubspaceFrame {
        let n = cols[0].len();
        let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        orthonormalize(&m).unwrap().frame
    }

    #[test]
    fn grid_rejects_coarse() {
        assert!(GridSpec::new(3).is_err());
        let g = grid(4);
        assert_eq!(g.node(0), -1.0);
        assert_eq!(g.node(4), 0.0);
    }

    #[test]
    fn norm_c_examples() {
        let g = grid(4);
        assert_eq!(SegmentC::zeros(g, 2).norm(), 0.0);
        let v = DVector::from_row_slice(&[3.0, 4.0]);
        assert_eq!(SegmentC::constant(g, &v).norm(), 5.0);
        let u = SegmentC::from_coords(g, 1, DVector::from_row_slice(&[0.0, 1.0, -3.0, 2.0, 0.0])).unwrap();
        assert_eq!(u.norm(), 3.0);
    }

    #[test]
    fn norm_l_examples() {
        let g = grid(8);
        assert_eq!(SegmentL::zeros(g, 2, 2.0).norm(), 0.0);
        let v = DVector::from_row_slice(&[3.0, 4.0]);
        let u = SegmentL::new(g, 2.0, v, DVector::zeros(2 * 9)).unwrap();
        assert_eq!(u.norm(), 5.0);
        let one = SegmentL::new(g, 2.0, DVector::zeros(1), DVector::from_element(9, 1.0)).unwrap();
        assert!((one.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn embedding_of_constant() {
        let g = grid(16);
        let v = DVector::from_row_slice(&[1.0, -2.0]);
        let u = SegmentC::constant(g, &v);
        let ju = embed_j(&u, 2.0);
        assert_eq!(ju.head(), &v);
        assert!((ju.norm() - 2.0 * u.norm()).abs() < 1e-12);
        assert!(ju.norm() <= 2.0 * u.norm() + 1e-15);
        assert_eq!(embed_j(&SegmentC::zeros(g, 2), 2.0), SegmentL::zeros(g, 2, 2.0));
    }

    #[test]
    fn invert_j_cases() {
        let g = grid(4);
        let u = SegmentC::from_fn(g, 2, |s| DVector::from_row_slice(&[s, s * s]));
        assert_eq!(try_invert_j(&embed_j(&u, 2.0), 0.0).unwrap(), u);
        let e1 = DVector::from_row_slice(&[1.0, 0.0]);
        let bad = SegmentL::new(g, 2.0, e1, DVector::zeros(10)).unwrap();
        assert!(try_invert_j(&bad, 1e-9).is_none());
        let mut near = embed_j(&u, 2.0);
        near.head[0] += 1e-12;
        assert!(try_invert_j(&near, 1e-9).is_some());
    }

    #[test]
    fn j_coordinate_maps_agree() {
        let g = grid(4);
        let u = SegmentC::from_fn(g, 2, |s| DVector::from_row_slice(&[s.sin(), s.exp()]));
        let x = DMatrix::from_column_slice(10, 1, u.coords().as_slice());
        let jx = embed_j_coords(2, &x);
        assert_eq!(jx.column(0).into_owned(), embed_j(&u, 2.0).coords());
        // <J x, y> = <x, Jᵀ y>
        let y = DMatrix::from_fn(12, 1, |i, _| (i as f64 * 0.37).cos());
        let lhs = (jx.transpose() * &y)[(0, 0)];
        let rhs = (x.transpose() * embed_j_transpose_coords(2, &y))[(0, 0)];
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = frame(&[&[1.0, 0.0]]);
        let e2 = frame(&[&[0.0, 1.0]]);
        let d = frame(&[&[1.0, 1.0]]);
        assert_eq!(principal_angles(&e1, &e1).unwrap(), vec![0.0]);
        assert!((principal_angles(&e1, &e2).unwrap()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((principal_angles(&e1, &d).unwrap()[0] - FRAC_PI_4).abs() < 1e-15);
        let e3 = frame(&[&[1.0, 0.0, 0.0]]);
        assert!(principal_angles(&e1, &e3).is_err());
    }

    #[test]
    fn orthonormalize_examples() {
        let f = orthonormalize(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(f.frame.vectors, DMatrix::identity(2, 2));
        let dep = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let f = orthonormalize(&dep).unwrap();
        assert_eq!(f.rank_deficiency, 1);
        assert!((f.frame.vectors.column(0).abs() - DVector::from_row_slice(&[1.0, 0.0])).norm() < 1e-15);
        assert!(matches!(orthonormalize(&DMatrix::zeros(3, 2)), Err(Error::ZeroVector)));
    }

    #[test]
    fn orthonormalize_random_block() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = crate::linalg::gaussian_matrix(&mut rng, 5, 3);
        let f = orthonormalize(&a).unwrap();
        let gram = f.frame.vectors.transpose() * &f.frame.vectors;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        // same span: every input column is reproduced by projection
        let proj = &f.frame.vectors * (f.frame.vectors.transpose() * &a);
        assert!((proj - &a).amax() < 1e-10);
    }

    fn seg_strategy(n: usize, m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n * (m + 1))
    }

    proptest! {
        #[test]
        fn norms_are_norms(a in seg_strategy(2, 6), b in seg_strategy(2, 6), alpha in -5.0f64..5.0) {
            let g = grid(6);
            let u = SegmentC::from_coords(g, 2, DVector::from_vec(a)).unwrap();
            let v = SegmentC::from_coords(g, 2, DVector::from_vec(b)).unwrap();
            let sum = SegmentC::from_coords(g, 2, u.coords() + v.coords()).unwrap();
            let scaled = SegmentC::from_coords(g, 2, u.coords() * alpha).unwrap();
            prop_assert!(sum.norm() <= u.norm() + v.norm() + 1e-12);
            prop_assert!((scaled.norm() - alpha.abs() * u.norm()).abs() <= 1e-12 * (1.0 + u.norm()));
            for p in [1.5, 2.0, 3.0] {
                let (ju, jv, js) = (embed_j(&u, p), embed_j(&v, p), embed_j(&sum, p));
                prop_assert!(js.norm() <= ju.norm() + jv.norm() + 1e-12);
                prop_assert!(ju.norm() <= 2.0 * u.norm() + 1e-12);
            }
        }

        #[test]
        fn j_is_linear_and_invertible(a in seg_strategy(2, 5), b in seg_strategy(2, 5), x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let g = grid(5);
            let u = SegmentC::from_coords(g, 2, DVector::from_vec(a)).unwrap();
            let v = SegmentC::from_coords(g, 2, DVector::from_vec(b)).unwrap();
            let comb = SegmentC::from_coords(g, 2, u.coords() * x + v.coords() * y).unwrap();
            let lhs = embed_j(&comb, 2.0).coords();
            let rhs = embed_j(&u, 2.0).coords() * x + embed_j(&v, 2.0).coords() * y;
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(try_invert_j(&embed_j(&u, 2.0), 0.0).unwrap(), u);
        }

        #[test]
        fn angles_symmetric_and_basis_invariant(seed in 0u64..500) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = orthonormalize(&crate::linalg::gaussian_matrix(&mut rng, 6, 2)).unwrap().frame;
            let q = orthonormalize(&crate::linalg::gaussian_matrix(&mut rng, 6, 3)).unwrap().frame;
            let a = principal_angles(&p, &q).unwrap();
            let b = principal_angles(&q, &p).unwrap();
            prop_assert_eq!(a.len(), 2);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!(*x >= 0.0 && *x <= std::f64::consts::FRAC_PI_2);
            }
            let rot = orthonormalize(&crate::linalg::gaussian_matrix(&mut rng, 2, 2)).unwrap().frame.vectors;
            let p2 = SubspaceFrame::from_orthonormal(&p.vectors * rot).unwrap();
            let c = principal_angles(&p2, &q).unwrap();
            for (x, y) in a.iter().zip(&c) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
