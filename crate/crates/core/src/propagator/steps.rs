//! Method of steps on one delay span.
//!
//! Time is measured in grid units: local index `σ` corresponds to the time
//! `base + σ/M`, and the delayed argument of `σ` is history node `σ` itself.
//! All routines act on blocks of `K` columns at once so that whole operator
//! matrices can be assembled in one pass.

use nalgebra::DMatrix;

use crate::driver::Driver;
use crate::error::{invalid, Result};

/// Index positions closer than this to an integer are treated as nodes.
pub(crate) const NODE_SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= NODE_SNAP {
        r
    } else {
        x
    }
}

/// Cubic Lagrange weights for the four nodes `b..b+3` at position `x`.
fn lagrange4(b: usize, x: f64) -> [f64; 4] {
    let nodes = [b as f64, b as f64 + 1.0, b as f64 + 2.0, b as f64 + 3.0];
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}

/// History value at index position `x ∈ [0, M]`: exact at nodes, local
/// cubic interpolation in between (stencil clamped at the ends).
pub(crate) fn interpolate(hist: &[DMatrix<f64>], x: f64) -> DMatrix<f64> {
    let m = hist.len() - 1;
    let x = snap(x).clamp(0.0, m as f64);
    if x.fract() == 0.0 {
        return hist[x as usize].clone();
    }
    let i0 = x.floor() as usize;
    let b = i0.saturating_sub(1).min(m - 3);
    let w = lagrange4(b, x);
    let mut out = &hist[b] * w[0];
    for (k, wk) in w.iter().enumerate().skip(1) {
        out += &hist[b + k] * *wk;
    }
    out
}

struct Stepper<'a> {
    driver: &'a Driver,
    base: f64,
    h: f64,
    hist: &'a [DMatrix<f64>],
}

impl Stepper<'_> {
    fn time(&self, sigma: f64) -> f64 {
        self.base + sigma * self.h
    }

    /// `h (A z + B H(σ))` with coefficients read for a step on `[lo, hi]`.
    fn rhs_parts(&self, sigma: f64, lo: f64, hi: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (a, b) = self
            .driver
            .matrices_within(self.time(sigma), self.time(lo), self.time(hi));
        let forcing = &b * interpolate(self.hist, sigma) * self.h;
        (a * self.h, forcing)
    }

    /// One classical Runge-Kutta step over `[lo, hi]` (grid units).
    fn rk4(&self, z: &DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
        let d = hi - lo;
        let mid = 0.5 * (lo + hi);
        let (a0, f0) = self.rhs_parts(lo, lo, hi);
        let (am, fm) = self.rhs_parts(mid, lo, hi);
        let (a1, f1) = self.rhs_parts(hi, lo, hi);
        let k1 = &a0 * z + &f0;
        let k2 = &am * (z + &k1 * (0.5 * d)) + &fm;
        let k3 = &am * (z + &k2 * (0.5 * d)) + &fm;
        let k4 = &a1 * (z + &k3 * d) + &f1;
        z + (k1 + (k2 + k3) * 2.0 + k4) * (d / 6.0)
    }
}

/// Solve on `[0, q]` (grid units, `0 < q ≤ M`) from the initial value `z0`
/// with history nodes `hist` (`M + 1` blocks), and return the nodes of the
/// segment at time `q`, i.e. values at positions `q − M + j`, `j = 0..=M`.
/// Positions before `0` are read from the history.
pub(crate) fn advance(
    driver: &Driver,
    base: f64,
    z0: &DMatrix<f64>,
    hist: &[DMatrix<f64>],
    q: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let m = hist.len() - 1;
    let q = snap(q);
    if !(q > 0.0 && q <= m as f64) {
        return Err(invalid("t", format!("partial step must lie in (0, 1], got {}", q / m as f64)));
    }
    let h = 1.0 / m as f64;
    driver.check_window(base, base + q * h)?;
    let stepper = Stepper { driver, base, h, hist };

    // solution targets r, r+1, ..., q with r = frac(q)
    let whole = q.floor() as usize;
    let r = q - whole as f64;
    let mut targets: Vec<f64> = Vec::with_capacity(whole + 1);
    if r > 0.0 {
        targets.push(r);
    }
    for k in 1..=whole {
        targets.push(r + k as f64);
    }
    let switches: Vec<f64> = driver
        .breaks_in(base, base + q * h)
        .into_iter()
        .map(|t| (t - base) * m as f64)
        .collect();

    let mut sol: Vec<DMatrix<f64>> = Vec::with_capacity(targets.len() + 1);
    sol.push(z0.clone());
    let mut z = z0.clone();
    let mut cur = 0.0;
    let mut sw = 0;
    for &target in &targets {
        while sw < switches.len() && switches[sw] <= cur + 1e-12 {
            sw += 1;
        }
        let mut lo = cur;
        while sw < switches.len() && switches[sw] < target - 1e-12 {
            z = stepper.rk4(&z, lo, switches[sw]);
            lo = switches[sw];
            sw += 1;
        }
        z = stepper.rk4(&z, lo, target);
        cur = target;
        sol.push(z.clone());
    }

    // sol[k] holds the value at position r + k - 1 when r > 0 (sol[0] = z0 at 0)
    let mut out = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let x = q - m as f64 + j as f64;
        if x < -NODE_SNAP {
            out.push(interpolate(hist, x + m as f64));
        } else {
            let k = (x - r).round() as usize;
            out.push(if r > 0.0 { sol[k + 1].clone() } else { sol[k].clone() });
        }
    }
    Ok(out)
}

/// Fundamental matrix of `Z' = A Z` from `t1` to `t2` by RK4 at step `h`,
/// splitting at switch times.
pub(crate) fn fundamental(driver: &Driver, t1: f64, t2: f64, h: f64) -> DMatrix<f64> {
    let n = driver.dimension();
    let mut z = DMatrix::identity(n, n);
    if t2 <= t1 {
        return z;
    }
    let steps = ((t2 - t1) / h - NODE_SNAP).ceil().max(1.0) as usize;
    let dt = (t2 - t1) / steps as f64;
    let mut pts: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { t2 } else { t1 + i as f64 * dt })
        .collect();
    pts.extend(driver.breaks_in(t1, t2));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let d = hi - lo;
        let mid = 0.5 * (lo + hi);
        let a0 = driver.matrices_within(lo, lo, hi).0;
        let am = driver.matrices_within(mid, lo, hi).0;
        let a1 = driver.matrices_within(hi, lo, hi).0;
        let k1 = &a0 * &z;
        let k2 = &am * (&z + &k1 * (0.5 * d));
        let k3 = &am * (&z + &k2 * (0.5 * d));
        let k4 = &a1 * (&z + &k3 * d);
        z += (k1 + (k2 + k3) * 2.0 + k4) * (d / 6.0);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_midpoint_weights() {
        let w = lagrange4(3, 4.5);
        let want = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_exact_for_cubics() {
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0 * x - 5.0;
        let hist: Vec<DMatrix<f64>> = (0..=8).map(|j| DMatrix::from_element(1, 1, f(j as f64))).collect();
        for x in [0.25, 0.5, 3.7, 7.5, 7.9] {
            assert!((interpolate(&hist, x)[(0, 0)] - f(x)).abs() < 1e-12);
        }
        assert_eq!(interpolate(&hist, 3.0 + 1e-12)[(0, 0)], f(3.0));
    }
}
