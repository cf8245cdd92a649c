//! Discrete QR estimates of the leading exponents.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{group_exponents, initial_probe, ExponentGroup, SpectrumConfig, COLLAPSE_LN_RATE};
use crate::driver::Driver;
use crate::error::{Error, Result};
use crate::fiber::{inner_product_sqrt_weights, FiberKind, GridSpec};
use crate::linalg::{gram_schmidt, scale_rows};
use crate::propagator::step_coords;
use crate::LN_RATE_FLOOR;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QrSpectrum {
    pub fiber_kind: FiberKind,
    /// Leading `k` exponents, nonincreasing.
    pub exponents: Vec<f64>,
    pub drift: Vec<f64>,
    pub below_floor: Vec<bool>,
    /// Estimate for the extra probe column (index `k + 1`), when the fiber
    /// has room for it.
    pub guard: Option<f64>,
    pub gap_tolerance: f64,
    pub groups: Vec<ExponentGroup>,
    pub truncated: bool,
    /// Number of probe columns that collapsed and were re-seeded.
    pub collapses: usize,
    /// Unit-step times at which the running averages were recorded.
    pub times: Vec<usize>,
    /// Running averages per exponent (same order as `exponents`).
    pub running: Vec<Vec<f64>>,
}

impl QrSpectrum {
    /// `time,λ_1,…,λ_k` rows of the running averages.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for i in 0..self.exponents.len() {
            out.push_str(&format!(",lambda_{}", i + 1));
        }
        out.push('\n');
        for (row, t) in self.times.iter().enumerate() {
            out.push_str(&t.to_string());
            for series in &self.running {
                out.push_str(&format!(",{}", series[row]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopExponent {
    pub value: f64,
    /// Change of the running average over the last quarter of the averaging
    /// window: a heuristic confidence, not an error bound.
    pub drift: f64,
}

/// Growth-rate bookkeeping shared by the QR and frame computations.
pub(crate) struct RateAccumulator {
    sums: Vec<f64>,
    steps: usize,
    pub(crate) times: Vec<usize>,
    pub(crate) running: Vec<Vec<f64>>,
}

impl RateAccumulator {
    pub(crate) fn new(k: usize) -> Self {
        RateAccumulator {
            sums: vec![0.0; k],
            steps: 0,
            times: Vec::new(),
            running: vec![Vec::new(); k],
        }
    }

    pub(crate) fn add(&mut self, r_diag: &[f64], steps: usize, time: usize) -> Result<()> {
        for (i, &r) in r_diag.iter().enumerate() {
            if !r.is_finite() {
                return Err(Error::Numerical(format!("non-finite growth factor at step {time}")));
            }
            self.sums[i] += if r > 0.0 {
                r.ln().max(COLLAPSE_LN_RATE * steps as f64)
            } else {
                COLLAPSE_LN_RATE * steps as f64
            };
        }
        self.steps += steps;
        self.times.push(time);
        for i in 0..self.sums.len() {
            self.running[i].push(self.sums[i] / self.steps as f64);
        }
        Ok(())
    }

    pub(crate) fn averages(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.steps.max(1) as f64).collect()
    }

    /// `|avg(T) − avg(T − w)|` with `w` a quarter of the averaging window.
    pub(crate) fn drift(&self, i: usize) -> f64 {
        let series = &self.running[i];
        let (Some(&last), Some(&t_end)) = (series.last(), self.times.last()) else {
            return 0.0;
        };
        let t_start = self.times[0];
        let back = ((t_end - t_start) / 4).max(1);
        let target = t_end.saturating_sub(back);
        let idx = self.times.partition_point(|&t| t < target).min(series.len() - 1);
        (last - series[idx]).abs()
    }
}

/// Sorted summary of accumulated rates: `(order, exponents, drift)`.
pub(crate) fn sorted_rates(acc: &RateAccumulator) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let avg = acc.averages();
    let mut order: Vec<usize> = (0..avg.len()).collect();
    order.sort_by(|&a, &b| avg[b].total_cmp(&avg[a]));
    let ex = order.iter().map(|&i| avg[i]).collect();
    let dr = order.iter().map(|&i| acc.drift(i)).collect();
    (order, ex, dr)
}

pub(crate) struct Grouping {
    pub tol: f64,
    pub groups: Vec<ExponentGroup>,
    pub truncated: bool,
}

pub(crate) fn group_with_guard(cfg: &SpectrumConfig, ex: &[f64], drift: &[f64]) -> Grouping {
    let k = cfg.k;
    let max_drift = ex[..k]
        .iter()
        .zip(&drift[..k])
        .filter(|(x, _)| **x > LN_RATE_FLOOR)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max);
    let tol = cfg.gap_tolerance.unwrap_or((10.0 * max_drift).max(1e-6));
    let groups = group_exponents(&ex[..k], tol);
    let truncated = match (ex.get(k), groups.last()) {
        (Some(&guard), Some(last)) if guard > LN_RATE_FLOOR => {
            ex[*last.indices.last().unwrap()] - guard <= tol && *last.indices.last().unwrap() == k - 1
        }
        _ => false,
    };
    Grouping { tol, groups, truncated }
}

/// Leading exponents from an explicit starting block (`dim × (k or k+1)`).
pub fn qr_spectrum_from(
    driver: &Driver,
    kind: FiberKind,
    grid: GridSpec,
    cfg: &SpectrumConfig,
    probe: &DMatrix<f64>,
) -> Result<QrSpectrum> {
    run(driver, kind, grid, cfg, probe, &mut cfg.probe_rng())
}

fn run(
    driver: &Driver,
    kind: FiberKind,
    grid: GridSpec,
    cfg: &SpectrumConfig,
    probe: &DMatrix<f64>,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<QrSpectrum> {
    let dim = kind.ambient_dim(grid, driver.dimension());
    cfg.validate(dim)?;
    if probe.nrows() != dim || probe.ncols() < cfg.k {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: probe.nrows(),
        });
    }
    let kp = probe.ncols();
    let ta = cfg.aligned_transient();
    let mut acc = RateAccumulator::new(kp);
    let mut collapses = 0;
    // the block lives in weighted coordinates so that its norms follow the
    // continuous inner product instead of the node count
    let w = inner_product_sqrt_weights(kind, grid, driver.dimension());
    let winv = w.map(|x| 1.0 / x);
    let mut q = gram_schmidt(&scale_rows(probe, &w), Some(&mut *rng)).q;
    let mut pending = 0;
    for n in 0..cfg.horizon {
        let x = if pending == 0 { scale_rows(&q, &winv) } else { q };
        q = step_coords(driver, n as f64, kind, grid, &x, 1.0)?;
        pending += 1;
        if pending == cfg.renorm_every || n + 1 == cfg.horizon {
            let block = gram_schmidt(&scale_rows(&q, &w), Some(&mut *rng));
            collapses += block.collapsed.len();
            if n + 1 - pending >= ta {
                acc.add(&block.r_diag, pending, n + 1)?;
            }
            q = block.q;
            pending = 0;
        }
    }
    let (order, ex, dr) = sorted_rates(&acc);
    let grouping = group_with_guard(cfg, &ex, &dr);
    let k = cfg.k;
    Ok(QrSpectrum {
        fiber_kind: kind,
        exponents: ex[..k].to_vec(),
        drift: dr[..k].to_vec(),
        below_floor: ex[..k].iter().map(|&x| x <= LN_RATE_FLOOR).collect(),
        guard: ex.get(k).copied(),
        gap_tolerance: grouping.tol,
        groups: grouping.groups,
        truncated: grouping.truncated,
        collapses,
        times: acc.times.clone(),
        running: order[..k].iter().map(|&i| acc.running[i].clone()).collect(),
    })
}

/// Leading-`k` exponents by the discrete QR method, with one extra guard
/// column when the fiber has room for it.
pub fn qr_spectrum(driver: &Driver, kind: FiberKind, grid: GridSpec, cfg: &SpectrumConfig) -> Result<QrSpectrum> {
    let dim = kind.ambient_dim(grid, driver.dimension());
    cfg.validate(dim)?;
    let kp = (cfg.k + 1).min(dim);
    let mut rng = cfg.probe_rng();
    let probe = initial_probe(kind, grid, driver.dimension(), kp, &mut rng);
    run(driver, kind, grid, cfg, &probe, &mut rng)
}

/// `λ_top`: growth rate of the leading probe direction.
pub fn top_exponent(driver: &Driver, kind: FiberKind, grid: GridSpec, cfg: &SpectrumConfig) -> Result<TopExponent> {
    let mut one = cfg.clone();
    one.k = 1;
    let s = qr_spectrum(driver, kind, grid, &one)?;
    Ok(TopExponent {
        value: s.exponents[0],
        drift: s.drift[0],
    })
}
