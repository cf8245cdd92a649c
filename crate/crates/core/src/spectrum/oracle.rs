//! Independent oracles: characteristic roots for constant coefficients and
//! the dense monodromy eigenproblem for period-1 drivers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::driver::Driver;
use crate::error::{invalid, Error, Result};
use crate::fiber::{FiberKind, GridSpec};
use crate::linalg::{null_space, spectral_norm};
use crate::propagator::assemble_unit_operator;

type C64 = Complex<f64>;

const RESIDUAL_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-8;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn char_matrix(a: &DMatrix<C64>, b: &DMatrix<C64>, lambda: C64) -> (DMatrix<C64>, DMatrix<C64>) {
    let n = a.nrows();
    let be = b * (-lambda).exp();
    let id = DMatrix::<C64>::identity(n, n);
    let m = &id * lambda - a - &be;
    let dm = &id + &be;
    (m, dm)
}

/// `σ_min(λI − A − B e^{−λ})`
fn residual(a: &DMatrix<C64>, b: &DMatrix<C64>, lambda: C64) -> f64 {
    let (m, _) = char_matrix(a, b, lambda);
    m.singular_values().min()
}

/// Newton on `det M(λ)` through `(ln det M)' = tr(M⁻¹M')`, switching to the
/// multiplicity-independent update once plain Newton slows down.
fn newton(a: &DMatrix<C64>, b: &DMatrix<C64>, start: C64) -> Option<C64> {
    let mut lambda = start;
    for it in 0..80 {
        let (m, dm) = char_matrix(a, b, lambda);
        let inv = m.try_inverse()?;
        let x = &inv * &dm;
        let s = x.trace();
        if !s.re.is_finite() || !s.im.is_finite() || s.norm() == 0.0 {
            return None;
        }
        let mut step = -s.inv();
        if it >= 30 {
            let ddm = -(b * (-lambda).exp());
            let sp = (&inv * ddm).trace() - (&x * &x).trace();
            if sp.norm() > 0.0 {
                step = s / sp;
            }
        }
        if step.norm() > 2.0 {
            step *= 2.0 / step.norm();
        }
        lambda += step;
        if !lambda.re.is_finite() || lambda.re < -1e3 {
            return None;
        }
        if step.norm() <= 1e-15 * lambda.norm().max(1.0) {
            break;
        }
    }
    Some(lambda)
}

/// Multiplicity from `(ln det M)'` and `(ln det M)''` a short distance off
/// the root: `s ≈ m/δ`, `s' ≈ −m/δ²`.
fn multiplicity(a: &DMatrix<C64>, b: &DMatrix<C64>, root: C64) -> usize {
    let lambda = root + C64::new(1e-5, 1e-5);
    let (m, dm) = char_matrix(a, b, lambda);
    let Some(inv) = m.try_inverse() else { return 1 };
    let x = &inv * &dm;
    let s = x.trace();
    let ddm = -(b * (-lambda).exp());
    let sp = (&inv * ddm).trace() - (&x * &x).trace();
    let est = (s * s / -sp).re;
    if est.is_finite() {
        est.round().max(1.0) as usize
    } else {
        1
    }
}

fn scan(a: &DMatrix<C64>, b: &DMatrix<C64>, re_max: f64, width: f64, im_max: f64) -> Vec<C64> {
    let mut distinct: Vec<(C64, usize)> = Vec::new();
    let step = 0.25;
    let nre = (width / step).round() as usize;
    let nim = (im_max / step).round() as usize;
    for i in 0..=nre {
        for j in 0..=nim {
            let z = C64::new(re_max - i as f64 * step, j as f64 * step);
            let Some(r) = newton(a, b, z) else { continue };
            if r.re < re_max - width - 1.0 || r.re > re_max + 1.0 || r.im.abs() > im_max + 1.0 {
                continue;
            }
            if residual(a, b, r) > RESIDUAL_TOL {
                continue;
            }
            let r = if r.im.abs() < 1e-12 { C64::new(r.re, 0.0) } else { r };
            for cand in [r, r.conj()] {
                if !distinct.iter().any(|(x, _)| (x - cand).norm() <= DEDUP_TOL) {
                    distinct.push((cand, multiplicity(a, b, cand)));
                }
            }
        }
    }
    distinct.sort_by(|x, y| y.0.re.total_cmp(&x.0.re).then(y.0.im.total_cmp(&x.0.im)));
    distinct
        .into_iter()
        .flat_map(|(r, m)| std::iter::repeat_n(r, m))
        .collect()
}

/// The `count` rightmost roots of `det(λI − A − B e^{−λ}) = 0`, by real part
/// (conjugate pairs listed with the positive imaginary part first), repeated
/// by multiplicity. Each root has `σ_min` residual at most `1e-10`.
pub fn characteristic_root_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, count: usize) -> Result<Vec<C64>> {
    let n = a.nrows();
    if a.ncols() != n || b.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if b.iter().all(|&x| x == 0.0) {
        if count > n {
            return Err(invalid("count", format!("without delay there are only {n} roots")));
        }
        let mut ev: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
        ev.truncate(count);
        return Ok(ev);
    }
    let (ac, bc) = (to_complex(a), to_complex(b));
    let re_max = spectral_norm(a) + spectral_norm(b) + 1.0;
    for (width, im_max) in [(10.0, 30.0), (20.0, 60.0)] {
        let roots = scan(&ac, &bc, re_max, width, im_max);
        if roots.len() >= count {
            return Ok(roots[..count].to_vec());
        }
    }
    Err(Error::Numerical(format!(
        "fewer than {count} characteristic roots found in the expanded scan rectangle"
    )))
}

/// Eigenvalues of the assembled unit-step operator at `base`, by
/// decreasing modulus. For a period-1 driver these are the Floquet
/// multipliers of the discretized equation.
pub fn monodromy_multipliers(driver: &Driver, base: f64, kind: FiberKind, grid: GridSpec) -> Result<Vec<C64>> {
    let op = assemble_unit_operator(driver, base, kind, grid)?;
    let mut ev: Vec<C64> = op.matrix.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

/// Unit eigenvector of the unit-step operator for a real eigenvalue `mu`.
pub fn monodromy_eigenvector(
    driver: &Driver,
    base: f64,
    kind: FiberKind,
    grid: GridSpec,
    mu: f64,
) -> Result<DVector<f64>> {
    let op = assemble_unit_operator(driver, base, kind, grid)?;
    let d = op.matrix.nrows();
    let shifted = op.matrix - DMatrix::identity(d, d) * mu;
    let v = null_space(&shifted, 1);
    if v.ncols() == 0 {
        return Err(Error::Numerical("eigenvector extraction failed".into()));
    }
    Ok(v.column(0).into_owned())
}
