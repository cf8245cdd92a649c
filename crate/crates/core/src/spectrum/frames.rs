//! Covariant (Oseledets) subspaces and filtration frames.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::qr::{group_with_guard, sorted_rates, RateAccumulator};
use super::{initial_probe, SpectrumConfig, SpectrumReport};
use crate::driver::Driver;
use crate::error::Result;
use crate::fiber::{inner_product_sqrt_weights, FiberKind, GridSpec, SubspaceFrame};
use crate::linalg::{column_basis, gram_schmidt, null_space, principal_angles_orthonormal, scale_rows};
use crate::propagator::{assemble_unit_operator, step_coords};
use crate::LN_RATE_FLOOR;

/// Frame trajectories over the integer times `start, start + 1, …`.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    pub kind: FiberKind,
    pub grid: GridSpec,
    pub start: i64,
    /// Forward-pushed orthonormal blocks `Q_n`.
    pub q: Vec<DMatrix<f64>>,
    /// Backward-iterated orthonormal blocks `W_n`, spanning `F_i(n)^⊥`.
    pub w: Vec<DMatrix<f64>>,
    /// `E_i(n)` per time, per group.
    pub e: Vec<Vec<DMatrix<f64>>>,
    /// Cumulative dimensions `d_i`.
    pub dims: Vec<usize>,
}

impl FrameHistory {
    pub fn end(&self) -> i64 {
        self.start + self.q.len() as i64 - 1
    }

    fn index(&self, n: i64) -> Option<usize> {
        (n >= self.start && n <= self.end()).then(|| (n - self.start) as usize)
    }

    pub fn e_at(&self, n: i64, group: usize) -> Option<&DMatrix<f64>> {
        self.index(n).map(|i| &self.e[i][group])
    }

    pub fn q_at(&self, n: i64) -> Option<&DMatrix<f64>> {
        self.index(n).map(|i| &self.q[i])
    }

    pub fn w_at(&self, n: i64) -> Option<&DMatrix<f64>> {
        self.index(n).map(|i| &self.w[i])
    }
}

/// `E_i = span(Q[:, :d_i]) ∩ F_{i−1}` where `F_{i−1}^⊥ = span(W[:, :d_{i−1}])`.
fn covariant_block(q: &DMatrix<f64>, w: &DMatrix<f64>, lo: usize, hi: usize) -> DMatrix<f64> {
    let top = q.columns(0, hi).into_owned();
    if lo == 0 {
        return top;
    }
    let g = w.columns(0, lo).transpose() * &top;
    let c = null_space(&g, hi - lo);
    column_basis(&(top * c))
}

const BATCH: usize = 8;

/// Spectrum plus covariant subspaces `E_i` and filtration complements
/// along the integer times `−backward_window ..= horizon`.
pub fn oseledets_frames(
    driver: &Driver,
    kind: FiberKind,
    grid: GridSpec,
    cfg: &SpectrumConfig,
) -> Result<SpectrumReport> {
    let n = driver.dimension();
    let dim = kind.ambient_dim(grid, n);
    cfg.validate(dim)?;
    let kp = (cfg.k + 1).min(dim);
    let tb = cfg.backward_steps() as i64;
    let tr = cfg.transient as i64;
    let h = cfg.horizon as i64;
    let (s0, e0) = (-tb - tr, h + tr);
    driver.check_window(s0 as f64, e0 as f64)?;
    let mut rng = cfg.probe_rng();
    let first = -tb;
    let len = (h - first + 1) as usize;

    // backward iteration of the transposed unit operators
    let mut w = gram_schmidt(&initial_probe(kind, grid, n, kp, &mut rng), Some(&mut rng)).q;
    let mut ws: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); len];
    if e0 <= h {
        ws[(e0 - first) as usize] = w.clone();
    }
    let mut t = e0;
    while t > first {
        let lo = (t - BATCH as i64).max(first);
        let ops = (lo..t)
            .into_par_iter()
            .map(|s| assemble_unit_operator(driver, s as f64, kind, grid).map(|o| o.matrix))
            .collect::<Result<Vec<_>>>()?;
        for s in (lo..t).rev() {
            let op = &ops[(s - lo) as usize];
            w = gram_schmidt(&(op.transpose() * &w), Some(&mut rng)).q;
            if s <= h {
                ws[(s - first) as usize] = w.clone();
            }
        }
        t = lo;
    }

    // forward push from the far past; growth is measured in the weighted
    // coordinates of the QR estimates, frames are stored in plain ones
    let sw = inner_product_sqrt_weights(kind, grid, n);
    let swinv = sw.map(|x| 1.0 / x);
    let plain = |qw: &DMatrix<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
        gram_schmidt(&scale_rows(qw, &swinv), Some(rng)).q
    };
    let probe = initial_probe(kind, grid, n, kp, &mut rng);
    let mut q = gram_schmidt(&scale_rows(&probe, &sw), Some(&mut rng)).q;
    let mut qs: Vec<DMatrix<f64>> = Vec::with_capacity(len);
    let mut acc = RateAccumulator::new(kp);
    for s in s0..h {
        if s >= first {
            qs.push(plain(&q, &mut rng));
        }
        let y = step_coords(driver, s as f64, kind, grid, &scale_rows(&q, &swinv), 1.0)?;
        let block = gram_schmidt(&scale_rows(&y, &sw), Some(&mut rng));
        if s >= 0 {
            acc.add(&block.r_diag, 1, (s + 1) as usize)?;
        }
        q = block.q;
    }
    qs.push(plain(&q, &mut rng));

    // converged QR orders the columns by growth, so d_i counts leading columns
    let (_, ex, dr) = sorted_rates(&acc);
    let grouping = group_with_guard(cfg, &ex, &dr);
    let mut dims = Vec::with_capacity(grouping.groups.len());
    let mut d = 0;
    for g in &grouping.groups {
        d += g.multiplicity();
        dims.push(d);
    }

    let es: Vec<Vec<DMatrix<f64>>> = qs
        .par_iter()
        .zip(ws.par_iter())
        .map(|(q, w)| {
            let mut lo = 0;
            dims.iter()
                .map(|&hi| {
                    let e = covariant_block(q, w, lo, hi);
                    lo = hi;
                    e
                })
                .collect()
        })
        .collect();

    // equivariance: U(1) E_i(θ_s ω) against E_i(θ_{s+1} ω)
    let angles: Vec<Vec<f64>> = (first..h)
        .into_par_iter()
        .map(|s| {
            let i = (s - first) as usize;
            es[i]
                .iter()
                .zip(&es[i + 1])
                .map(|(e, e_next)| {
                    let pushed = step_coords(driver, s as f64, kind, grid, e, 1.0)?;
                    let basis = column_basis(&pushed);
                    let a = principal_angles_orthonormal(&basis, e_next);
                    // a collapsed push-forward leaves the space unmatched
                    Ok(if basis.ncols() < e.ncols() {
                        std::f64::consts::FRAC_PI_2
                    } else {
                        a.last().copied().unwrap_or(0.0)
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut equivariance = vec![0.0f64; dims.len()];
    for row in &angles {
        for (g, a) in row.iter().enumerate() {
            equivariance[g] = equivariance[g].max(*a);
        }
    }

    let zero = (0 - first) as usize;
    let frame = |m: &DMatrix<f64>| SubspaceFrame {
        ambient_dim: dim,
        vectors: m.clone(),
    };
    let k = cfg.k;
    let report = SpectrumReport {
        fiber_kind: kind,
        grid,
        dimension: n,
        config: cfg.clone(),
        exponents: ex[..k].to_vec(),
        drift: dr[..k].to_vec(),
        below_floor: ex[..k].iter().map(|&x| x <= LN_RATE_FLOOR).collect(),
        gap_tolerance: grouping.tol,
        groups: grouping.groups,
        truncated: grouping.truncated,
        e_frames: es[zero].iter().map(frame).collect(),
        e_frames_next: es[zero + 1].iter().map(frame).collect(),
        f_normals: dims
            .iter()
            .map(|&d| frame(&ws[zero].columns(0, d).into_owned()))
            .collect(),
        equivariance_ok: equivariance.iter().all(|&a| a <= cfg.angle_tolerance),
        equivariance_angles: equivariance,
        history: Some(FrameHistory {
            kind,
            grid,
            start: first,
            q: qs,
            w: ws,
            e: es,
            dims,
        }),
    };
    Ok(report)
}
