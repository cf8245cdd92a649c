//! Rates of individual vectors, backward rates of covariant vectors,
//! temperedness of the Oseledets projections and the decay of `c`, `d`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SpectrumConfig, SpectrumReport};
use crate::driver::Driver;
use crate::error::{invalid, Error, Result};
use crate::fiber::{fiber_norm, FiberKind, GridSpec};
use crate::linalg::regression_slope;
use crate::propagator::{step_bounds, step_coords};
use crate::LN_RATE_FLOOR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Regression slope of `ln ‖z_t‖`; `None` when the norm hit exactly zero.
    pub rate: Option<f64>,
    /// Time at which the orbit vanished, if it did.
    pub vanished_at: Option<usize>,
    pub below_floor: bool,
    /// Index of the nearest reference exponent, unless the rate is `−∞` or
    /// below the floor.
    pub nearest: Option<usize>,
}

impl RateEstimate {
    pub fn is_minus_infinity(&self) -> bool {
        self.rate.is_none() || self.below_floor
    }
}

/// Forward growth rate of one vector of fiber coordinates: the regression
/// slope of `ln ‖z_t‖` (fiber norm) over `t ∈ [transient, horizon]`.
pub fn rate_of_vector(
    driver: &Driver,
    kind: FiberKind,
    grid: GridSpec,
    u: &DVector<f64>,
    cfg: &SpectrumConfig,
    reference: &[f64],
) -> Result<RateEstimate> {
    let n = driver.dimension();
    let p = driver.p();
    let norm = |x: &DVector<f64>| fiber_norm(kind, grid, n, p, x);
    let n0 = norm(u);
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::ZeroVector);
    }
    let mut x = DMatrix::from_column_slice(u.len(), 1, (u / n0).as_slice());
    let mut logs = 0.0;
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    for s in 0..cfg.horizon {
        if s >= cfg.transient {
            ts.push(s as f64);
            ls.push(logs);
        }
        let y = step_coords(driver, s as f64, kind, grid, &x, 1.0)?;
        let ny = norm(&y.column(0).into_owned());
        if ny == 0.0 {
            return Ok(RateEstimate {
                rate: None,
                vanished_at: Some(s + 1),
                below_floor: true,
                nearest: None,
            });
        }
        logs += ny.ln();
        x = y / ny;
    }
    ts.push(cfg.horizon as f64);
    ls.push(logs);
    let rate = regression_slope(&ts, &ls);
    let below_floor = rate <= LN_RATE_FLOOR;
    let nearest = if below_floor {
        None
    } else {
        reference
            .iter()
            .enumerate()
            .filter(|(_, x)| **x > LN_RATE_FLOOR)
            .min_by(|a, b| (a.1 - rate).abs().total_cmp(&(b.1 - rate).abs()))
            .map(|(i, _)| i)
    };
    Ok(RateEstimate {
        rate: Some(rate),
        vanished_at: None,
        below_floor,
        nearest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardRates {
    pub group: usize,
    /// The exponent of the group, for comparison.
    pub exponent: f64,
    /// One regression slope per basis vector of `E_i(ω)`.
    pub slopes: Vec<f64>,
}

/// Follow each basis vector of `E_i(ω)` back along the retained frames:
/// `ũ(−n)` is the preimage of `ũ(−n+1)` inside `E_i(θ_{−n} ω)`. The slope of
/// `ln ‖ũ(t)‖` over `t ∈ [−t0, 0]` should approach `λ_i`.
pub fn backward_rate_check(driver: &Driver, report: &SpectrumReport, group: usize, t0: usize) -> Result<BackwardRates> {
    let hist = report
        .history
        .as_ref()
        .ok_or_else(|| invalid("report", "frame history was not retained"))?;
    if group >= report.groups.len() {
        return Err(invalid("group", format!("only {} groups", report.groups.len())));
    }
    if t0 == 0 || -(t0 as i64) < hist.start {
        return Err(invalid(
            "t0",
            format!("window must lie within the retained {} steps", -hist.start),
        ));
    }
    let (kind, grid) = (hist.kind, hist.grid);
    let n = driver.dimension();
    let p = driver.p();
    let norm = |x: &DVector<f64>| fiber_norm(kind, grid, n, p, x);
    let e0 = hist.e_at(0, group).unwrap();
    let mut slopes = Vec::with_capacity(e0.ncols());
    for col in 0..e0.ncols() {
        let v = e0.column(col).into_owned();
        let mut cur = &v / norm(&v);
        let mut logs = 0.0;
        let (mut ts, mut ls) = (vec![0.0], vec![0.0]);
        for s in 1..=t0 as i64 {
            let e = hist.e_at(-s, group).unwrap();
            let img = step_coords(driver, -s as f64, kind, grid, e, 1.0)?;
            let c = img
                .svd(true, true)
                .solve(&cur, 1e-13)
                .map_err(|m| Error::Numerical(m.to_string()))?;
            let x = e * c;
            let nx = norm(&x);
            if !(nx > 0.0) || !nx.is_finite() {
                return Err(Error::Numerical(format!("backward preimage degenerate at t = {}", -s)));
            }
            logs += nx.ln();
            cur = x / nx;
            ts.push(-s as f64);
            ls.push(logs);
        }
        slopes.push(regression_slope(&ts, &ls));
    }
    Ok(BackwardRates {
        group,
        exponent: report.groups[group].exponent,
        slopes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Temperedness {
    /// Per group: slope of `ln ‖P_i(θ_t ω)‖` over `t ∈ [0, T]`.
    pub forward_slopes: Vec<f64>,
    /// Per group: the same over the retained negative times.
    pub backward_slopes: Vec<f64>,
    /// Largest `‖P_i‖` seen (a condition number of the splitting).
    pub max_norm: f64,
}

impl Temperedness {
    pub fn max_abs_slope(&self) -> f64 {
        self.forward_slopes
            .iter()
            .chain(&self.backward_slopes)
            .fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// `‖P_i‖` for the projection onto `E_1 ⊕ … ⊕ E_i` along `F_i`, which is
/// `1 / σ_min(W_dᵀ Q_d)` for orthonormal bases of the range and of `F_i^⊥`.
fn projection_norm(q: &DMatrix<f64>, w: &DMatrix<f64>, d: usize) -> f64 {
    let g = w.columns(0, d).transpose() * q.columns(0, d);
    let smin = g.singular_values().min();
    if smin > 0.0 {
        1.0 / smin
    } else {
        f64::INFINITY
    }
}

pub fn temperedness_check(report: &SpectrumReport, horizon: usize) -> Result<Temperedness> {
    let hist = report
        .history
        .as_ref()
        .ok_or_else(|| invalid("report", "frame history was not retained"))?;
    let end = hist.end().min(horizon as i64);
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut max_norm = 0.0f64;
    for &d in &hist.dims {
        let series = |range: std::ops::RangeInclusive<i64>| -> (Vec<f64>, Vec<f64>) {
            range
                .map(|t| {
                    let pn = projection_norm(hist.q_at(t).unwrap(), hist.w_at(t).unwrap(), d);
                    (t as f64, pn.ln())
                })
                .unzip()
        };
        let (tf, lf) = series(0..=end);
        let (tb, lb) = series(hist.start..=0);
        for l in lf.iter().chain(&lb) {
            if !l.is_finite() {
                return Err(Error::Numerical("Oseledets splitting degenerate (singular projection)".into()));
            }
            max_norm = max_norm.max(l.exp());
        }
        forward.push(regression_slope(&tf, &lf));
        backward.push(regression_slope(&tb, &lb));
    }
    Ok(Temperedness {
        forward_slopes: forward,
        backward_slopes: backward,
        max_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsDecay {
    pub forward_c_slope: f64,
    pub forward_d_slope: f64,
    pub backward_c_slope: f64,
    pub backward_d_slope: f64,
    pub max_c: f64,
    pub max_d: f64,
}

impl BoundsDecay {
    pub fn max_abs_slope(&self) -> f64 {
        [
            self.forward_c_slope,
            self.forward_d_slope,
            self.backward_c_slope,
            self.backward_d_slope,
        ]
        .iter()
        .fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// Regression slopes of `ln c(θ_t ω)` and `ln d(θ_t ω)` over integer
/// `t ∈ [0, T]` and `t ∈ [−T, 0]`. Times with `d = 0` are left out of the
/// `d` fit (`ln 0` is undefined); an identically vanishing `d` has slope 0.
pub fn bounds_decay_check(driver: &Driver, grid: GridSpec, horizon: usize) -> Result<BoundsDecay> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    let t = horizon as i64;
    let samples = (-t..=t)
        .into_par_iter()
        .map(|s| step_bounds(driver, s as f64, grid).map(|b| (s, b)))
        .collect::<Result<Vec<_>>>()?;
    let fit = |fwd: bool, pick: &dyn Fn(&crate::propagator::StepBounds) -> f64| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|(s, _)| if fwd { *s >= 0 } else { *s <= 0 })
            .filter(|(_, b)| pick(b) > 0.0)
            .map(|(s, b)| (*s as f64, pick(b).ln()))
            .unzip();
        regression_slope(&xs, &ys)
    };
    Ok(BoundsDecay {
        forward_c_slope: fit(true, &|b| b.c),
        forward_d_slope: fit(true, &|b| b.d),
        backward_c_slope: fit(false, &|b| b.c),
        backward_d_slope: fit(false, &|b| b.d),
        max_c: samples.iter().map(|(_, b)| b.c).fold(0.0, f64::max),
        max_d: samples.iter().map(|(_, b)| b.d).fold(0.0, f64::max),
    })
}
