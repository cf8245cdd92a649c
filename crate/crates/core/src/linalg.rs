//! Small dense linear-algebra helpers shared by the fiber, propagator and
//! spectrum modules.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative size below which an orthogonalized column counts as dependent.
pub const DEPENDENCE_TOL: f64 = 1e-12;

/// Euclidean-induced operator norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.singular_values().max()
}

/// Result of a Gram-Schmidt pass over a block of columns.
#[derive(Debug, Clone)]
pub struct OrthoBlock {
    pub q: DMatrix<f64>,
    /// Diagonal of the triangular factor; `0.0` for collapsed columns.
    pub r_diag: Vec<f64>,
    /// Indices of columns that were numerically dependent on earlier ones.
    pub collapsed: Vec<usize>,
}

fn orthogonalize_against(v: &mut DVector<f64>, q: &DMatrix<f64>, upto: usize) {
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for j in 0..upto {
            let col = q.column(j);
            let c = col.dot(v);
            v.axpy(-c, &col, 1.0);
        }
    }
}

/// Modified Gram-Schmidt with reorthogonalization.
///
/// Columns that collapse (lose more than twelve digits against the span of
/// the preceding columns) get `r_ii = 0`. When `rng` is given they are
/// replaced by a fresh random direction orthogonal to the others, so the
/// returned block always has orthonormal columns.
pub fn gram_schmidt<R: Rng + ?Sized>(y: &DMatrix<f64>, mut rng: Option<&mut R>) -> OrthoBlock {
    let (n, k) = y.shape();
    let mut q = DMatrix::zeros(n, k);
    let mut r_diag = Vec::with_capacity(k);
    let mut collapsed = Vec::new();
    for j in 0..k {
        let mut v = y.column(j).into_owned();
        let orig = v.norm();
        orthogonalize_against(&mut v, &q, j);
        let rest = v.norm();
        if orig == 0.0 || rest <= DEPENDENCE_TOL * orig || !rest.is_finite() {
            collapsed.push(j);
            r_diag.push(0.0);
            let mut fresh = None;
            if let Some(rng) = rng.as_deref_mut() {
                for _ in 0..8 {
                    let mut w = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                    orthogonalize_against(&mut w, &q, j);
                    let nw = w.norm();
                    if nw > 1e-8 {
                        fresh = Some(w / nw);
                        break;
                    }
                }
            }
            if let Some(w) = fresh {
                q.set_column(j, &w);
            }
        } else {
            r_diag.push(rest);
            q.set_column(j, &(v / rest));
        }
    }
    OrthoBlock {
        q,
        r_diag,
        collapsed,
    }
}

/// Orthonormal basis of the column space, dropping dependent columns.
pub fn column_basis(y: &DMatrix<f64>) -> DMatrix<f64> {
    let block = gram_schmidt::<rand_chacha::ChaCha8Rng>(y, None);
    let keep: Vec<usize> = (0..y.ncols())
        .filter(|j| !block.collapsed.contains(j))
        .collect();
    block.q.select_columns(keep.iter())
}

/// Principal angles between the column spans of two matrices with
/// orthonormal columns, ascending, `min(p, q)` of them.
///
/// Small angles come from sines and large ones from cosines, so both ends of
/// `[0, π/2]` are resolved to full precision.
pub fn principal_angles_orthonormal(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<f64> {
    let (big, small) = if p.ncols() >= q.ncols() { (p, q) } else { (q, p) };
    let k = small.ncols();
    if k == 0 {
        return Vec::new();
    }
    let cross = big.transpose() * small;
    let mut cos: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    cos.truncate(k);
    let resid = small - big * &cross;
    let mut sin: Vec<f64> = if resid.ncols() == 1 {
        vec![resid.norm()]
    } else {
        resid.singular_values().iter().copied().collect()
    };
    sin.sort_by(|a, b| a.total_cmp(b));
    sin.truncate(k);
    let mut angles: Vec<f64> = cos
        .iter()
        .zip(sin.iter())
        .map(|(&c, &s)| {
            if c * c > 0.5 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    angles
}

/// Orthonormal basis of the `m`-dimensional (approximate) null space of `g`,
/// i.e. the right singular vectors with the `m` smallest singular values.
pub fn null_space(g: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n = g.ncols();
    if g.nrows() == 0 {
        return DMatrix::identity(n, m.min(n));
    }
    let gram = g.transpose() * g;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let cols: Vec<usize> = idx.into_iter().take(m).collect();
    column_basis(&eig.eigenvectors.select_columns(cols.iter()))
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Random matrix with independent standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `diag(s) · m`
pub fn scale_rows(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= s[i];
    }
    out
}
