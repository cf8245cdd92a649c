//! Solution operators of `z'(t) = A(θ_t ω) z(t) + B(θ_t ω) z(t−1)` on the
//! two fibers, the fundamental matrix of the undelayed part, the bounds
//! `c(ω)`, `d(ω)` and dense assembly of unit-step operators.
//!
//! Everything is built on one block integrator acting on fiber coordinates,
//! so the C and L versions share arithmetic: `J ∘ U^(C) = U^(L) ∘ J` holds
//! bit for bit.

mod audit;
mod steps;

pub use audit::{audit_inequalities, InequalityAudit, InequalityCheck, AUDIT_SLACK};

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::Driver;
use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberKind, GridSpec, SegmentC, SegmentL};
use crate::linalg::spectral_norm;

pub(crate) use steps::NODE_SNAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalMatrix {
    pub t1: f64,
    pub t2: f64,
    pub matrix: DMatrix<f64>,
}

/// `c` is the grid estimate of `sup ‖U⁰‖` over one unit interval (a lower
/// estimate of the true supremum), `c_upper = exp(∫ a)` the analytic upper
/// bound, and `d = (∫ b^q)^{1/q}` over the same interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub c: f64,
    pub c_upper: f64,
    pub d: f64,
}

impl StepBounds {
    /// `c (1 + d)`
    pub fn growth(&self) -> f64 {
        self.c * (1.0 + self.d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStepOperator {
    pub fiber_kind: FiberKind,
    pub grid: GridSpec,
    pub dim: usize,
    pub base_time: f64,
    pub matrix: DMatrix<f64>,
}

impl UnitStepOperator {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{:e}", self.matrix[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

fn check_grid(driver: &Driver, dim: usize) -> Result<()> {
    if dim != driver.dimension() {
        return Err(Error::DimensionMismatch {
            expected: driver.dimension(),
            got: dim,
        });
    }
    Ok(())
}

/// Split fiber coordinates (columns of `x`) into initial value and history.
fn split(kind: FiberKind, grid: GridSpec, n: usize, x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let offset = match kind {
        FiberKind::C => 0,
        FiberKind::L => n,
    };
    let hist: Vec<DMatrix<f64>> = (0..grid.nodes())
        .map(|j| x.rows(offset + j * n, n).into_owned())
        .collect();
    let z0 = match kind {
        FiberKind::C => hist[grid.m].clone(),
        FiberKind::L => x.rows(0, n).into_owned(),
    };
    (z0, hist)
}

fn join(kind: FiberKind, n: usize, nodes: &[DMatrix<f64>]) -> DMatrix<f64> {
    let k = nodes[0].ncols();
    let offset = match kind {
        FiberKind::C => 0,
        FiberKind::L => n,
    };
    let mut out = DMatrix::zeros(offset + nodes.len() * n, k);
    for (j, v) in nodes.iter().enumerate() {
        out.rows_mut(offset + j * n, n).copy_from(v);
    }
    if kind == FiberKind::L {
        out.rows_mut(0, n).copy_from(nodes.last().unwrap());
    }
    out
}

/// Advance fiber coordinates (one state per column) from `base` by
/// `tau ∈ (0, 1]`.
pub fn step_coords(
    driver: &Driver,
    base: f64,
    kind: FiberKind,
    grid: GridSpec,
    x: &DMatrix<f64>,
    tau: f64,
) -> Result<DMatrix<f64>> {
    let n = driver.dimension();
    let want = kind.ambient_dim(grid, n);
    if x.nrows() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            got: x.nrows(),
        });
    }
    let (z0, hist) = split(kind, grid, n, x);
    let nodes = steps::advance(driver, base, &z0, &hist, tau * grid.m as f64)?;
    let out = join(kind, n, &nodes);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite state after the step from t = {base}")));
    }
    Ok(out)
}

/// Evolve fiber coordinates over `t ≥ 0`: a partial step over `t − ⌊t⌋`
/// first, then unit steps.
pub fn propagate_coords(
    driver: &Driver,
    base: f64,
    kind: FiberKind,
    grid: GridSpec,
    x: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("must be finite and nonnegative, got {t}")));
    }
    let m = grid.m as f64;
    let mut whole = t.floor();
    let mut frac = t - whole;
    // fractions that are a whisker off a whole number of steps count as whole
    if frac * m <= NODE_SNAP {
        frac = 0.0;
    } else if (1.0 - frac) * m <= NODE_SNAP {
        frac = 0.0;
        whole += 1.0;
    }
    driver.check_window(base, base + t)?;
    let mut cur = x.clone();
    let mut s = base;
    if frac > 0.0 {
        cur = step_coords(driver, s, kind, grid, &cur, frac)?;
        s += frac;
    }
    for _ in 0..whole as usize {
        cur = step_coords(driver, s, kind, grid, &cur, 1.0)?;
        s += 1.0;
    }
    Ok(cur)
}

pub fn step_unit_c(driver: &Driver, base: f64, u: &SegmentC) -> Result<SegmentC> {
    propagate_c(driver, base, u, 1.0)
}

pub fn step_unit_l(driver: &Driver, base: f64, u: &SegmentL) -> Result<SegmentL> {
    propagate_l(driver, base, u, 1.0)
}

pub fn propagate_c(driver: &Driver, base: f64, u: &SegmentC, t: f64) -> Result<SegmentC> {
    check_grid(driver, u.dim())?;
    let x = DMatrix::from_column_slice(u.coords().len(), 1, u.coords().as_slice());
    let y = propagate_coords(driver, base, FiberKind::C, u.grid(), &x, t)?;
    SegmentC::from_coords(u.grid(), u.dim(), y.column(0).into_owned())
}

pub fn propagate_l(driver: &Driver, base: f64, u: &SegmentL, t: f64) -> Result<SegmentL> {
    check_grid(driver, u.dim())?;
    let c = u.coords();
    let x = DMatrix::from_column_slice(c.len(), 1, c.as_slice());
    let y = propagate_coords(driver, base, FiberKind::L, u.grid(), &x, t)?;
    SegmentL::from_coords(u.grid(), u.dim(), u.p(), &y.column(0).into_owned())
}

/// Segments that can be evolved by the cocycle.
pub trait Evolve: Sized {
    fn evolve(&self, driver: &Driver, base: f64, t: f64) -> Result<Self>;
}

impl Evolve for SegmentC {
    fn evolve(&self, driver: &Driver, base: f64, t: f64) -> Result<Self> {
        propagate_c(driver, base, self, t)
    }
}

impl Evolve for SegmentL {
    fn evolve(&self, driver: &Driver, base: f64, t: f64) -> Result<Self> {
        propagate_l(driver, base, self, t)
    }
}

/// `z_t(θ_base ω, u)` on either fiber.
pub fn propagate<S: Evolve>(driver: &Driver, base: f64, u: &S, t: f64) -> Result<S> {
    u.evolve(driver, base, t)
}

/// `U^(L,C)(t) u = z_t` for `t ≥ 1`, returned as a continuous segment.
pub fn op_lc(driver: &Driver, base: f64, u: &SegmentL, t: f64) -> Result<SegmentC> {
    if !(t >= 1.0 - NODE_SNAP / u.grid().m as f64) {
        return Err(invalid("t", format!("the L-to-C operator needs t ≥ 1, got {t}")));
    }
    let v = propagate_l(driver, base, u, t)?;
    SegmentC::from_coords(u.grid(), u.dim(), v.density().clone())
}

/// Fundamental matrix `U⁰` of `z' = A z` from `t1` to `t2` (`t2 − t1 ≤ 1`)
/// with RK4 at the grid step, never stepping across a switch time.
pub fn fundamental_matrix(driver: &Driver, t1: f64, t2: f64, grid: GridSpec) -> Result<FundamentalMatrix> {
    if !(t1 <= t2) {
        return Err(invalid("t2", format!("need t1 ≤ t2, got [{t1}, {t2}]")));
    }
    if t2 - t1 > 1.0 + 1e-12 {
        return Err(invalid("t2", "span longer than one unit; compose shorter spans"));
    }
    driver.check_window(t1, t2)?;
    Ok(FundamentalMatrix {
        t1,
        t2,
        matrix: steps::fundamental(driver, t1, t2, grid.h()),
    })
}

/// `c(θ_base ω)` and `d(θ_base ω)`. The supremum defining `c` runs over grid
/// pairs `t1 < t2` in `base + {0, h, …, 1}` with switch times added.
pub fn step_bounds(driver: &Driver, base: f64, grid: GridSpec) -> Result<StepBounds> {
    driver.check_window(base, base + 1.0)?;
    let h = grid.h();
    let mut pts: Vec<f64> = (0..=grid.m)
        .map(|j| if j == grid.m { base + 1.0 } else { base + j as f64 * h })
        .collect();
    pts.extend(driver.breaks_in(base, base + 1.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);

    let cells: Vec<DMatrix<f64>> = pts
        .windows(2)
        .map(|w| steps::fundamental(driver, w[0], w[1], h))
        .collect();
    let n = driver.dimension();
    let mut c = 1.0f64;
    for i in 0..cells.len() {
        let mut prod = DMatrix::identity(n, n);
        for cell in &cells[i..] {
            prod = cell * prod;
            c = c.max(spectral_norm(&prod));
        }
    }

    let q = driver.q();
    let mut int_bq = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let b0 = driver.matrices_within(lo, lo, hi).1;
        let b1 = driver.matrices_within(hi, lo, hi).1;
        int_bq += 0.5 * (hi - lo) * (spectral_norm(&b0).powf(q) + spectral_norm(&b1).powf(q));
    }
    let int_a = driver.integrate(base, base + 1.0, 8 * grid.m, |a, _| spectral_norm(a));
    Ok(StepBounds {
        c,
        c_upper: int_a.exp(),
        d: int_bq.powf(1.0 / q),
    })
}

/// Dense matrix of `U_{θ_base ω}(1)` on fiber coordinates; column `j` is the
/// image of the `j`-th coordinate basis vector.
pub fn assemble_unit_operator(
    driver: &Driver,
    base: f64,
    kind: FiberKind,
    grid: GridSpec,
) -> Result<UnitStepOperator> {
    let n = driver.dimension();
    let dim = kind.ambient_dim(grid, n);
    driver.check_window(base, base + 1.0)?;
    const CHUNK: usize = 32;
    let starts: Vec<usize> = (0..dim).step_by(CHUNK).collect();
    let blocks = starts
        .par_iter()
        .map(|&s| {
            let w = CHUNK.min(dim - s);
            let mut e = DMatrix::zeros(dim, w);
            for k in 0..w {
                e[(s + k, k)] = 1.0;
            }
            step_coords(driver, base, kind, grid, &e, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = DMatrix::zeros(dim, dim);
    for (&s, b) in starts.iter().zip(&blocks) {
        matrix.columns_mut(s, b.ncols()).copy_from(b);
    }
    Ok(UnitStepOperator {
        fiber_kind: kind,
        grid,
        dim: n,
        base_time: base,
        matrix,
    })
}

/// Dense matrix of `U^(L,C)_{θ_base ω}(1)`: L coordinates to C coordinates.
pub fn assemble_lc_operator(driver: &Driver, base: f64, grid: GridSpec) -> Result<DMatrix<f64>> {
    let n = driver.dimension();
    let op = assemble_unit_operator(driver, base, FiberKind::L, grid)?;
    Ok(op.matrix.rows(n, n * grid.nodes()).into_owned())
}
