//! Sampled checks of the a-priori growth inequalities.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fundamental_matrix, op_lc, propagate_l, step_bounds, step_unit_c, step_unit_l};
use crate::driver::Driver;
use crate::error::{invalid, Result};
use crate::fiber::{norm_c, norm_l, GridSpec, SegmentC, SegmentL};
use crate::linalg::{gaussian_matrix, spectral_norm};

/// Relative slack for round-off and quadrature error in the right-hand sides.
pub const AUDIT_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub evaluated: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityAudit {
    pub samples: usize,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityAudit {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("inequality,evaluated,violations,worst_ratio\n");
        for c in &self.checks {
            out.push_str(&format!("{},{},{},{}\n", c.name, c.evaluated, c.violations, c.worst_ratio));
        }
        out
    }
}

const NAMES: [&str; 7] = [
    "pointwise_head",
    "lc_unit",
    "growth_c",
    "growth_l",
    "l_to_c_i",
    "l_to_c_ii",
    "fundamental_exp",
];

/// `(lhs, rhs)` per inequality for one random sample.
fn one_sample(driver: &Driver, grid: GridSpec, base: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = driver.dimension();
    let p = driver.p();
    let nodes = grid.nodes();
    let scale = rng.random_range(0.1..10.0);
    let head = DVector::from_column_slice(gaussian_matrix(&mut rng, n, 1).as_slice()) * scale;
    let dens = DVector::from_column_slice(gaussian_matrix(&mut rng, n * nodes, 1).as_slice()) * scale;
    let u = SegmentL::new(grid, p, head, dens.clone())?;
    let w = SegmentC::from_coords(grid, n, dens)?;
    let t = rng.random_range(0.0..2.0);

    let b0 = step_bounds(driver, base, grid)?;
    let bt = step_bounds(driver, base + t, grid)?;
    let nu = norm_l(&u);

    let out_l = step_unit_l(driver, base, &u)?;
    let sup_z = (0..nodes)
        .map(|j| out_l.density_node(j).norm())
        .fold(out_l.head().norm(), f64::max);
    let lc1 = norm_c(&op_lc(driver, base, &u, 1.0)?);

    let vt = propagate_l(driver, base, &u, t)?;
    let lc_t1 = norm_c(&op_lc(driver, base, &u, t + 1.0)?);
    let l_t1 = norm_l(&propagate_l(driver, base, &u, t + 1.0)?);

    let t1 = base + rng.random_range(0.0..1.0);
    let t2 = rng.random_range(t1..=base + 1.0);
    let u0 = spectral_norm(&fundamental_matrix(driver, t1, t2, grid)?.matrix);
    let int_a = driver.integrate(t1, t2, 8 * grid.m, |a, _| spectral_norm(a));

    Ok(vec![
        (sup_z, b0.growth() * nu),
        (lc1, b0.growth() * nu),
        (norm_c(&step_unit_c(driver, base, &w)?), 3.0 * b0.growth() * norm_c(&w)),
        (norm_l(&out_l), 3.0 * b0.growth() * nu),
        (lc_t1, bt.growth() * norm_l(&vt)),
        (l_t1, 2.0 * bt.growth() * norm_l(&vt)),
        (u0, int_a.exp()),
    ])
}

/// Evaluates the growth inequalities on `samples` random `(base, u, t)`
/// triples with `base` uniform in `bases` and `t ∈ [0, 2)`.
pub fn audit_inequalities(
    driver: &Driver,
    grid: GridSpec,
    samples: usize,
    bases: (f64, f64),
    seed: u64,
) -> Result<InequalityAudit> {
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    if !(bases.0 < bases.1) {
        return Err(invalid("bases", "need a nonempty range"));
    }
    driver.check_window(bases.0, bases.1 + 3.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(f64, u64)> = (0..samples)
        .map(|_| (rng.random_range(bases.0..bases.1), rng.random()))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(base, s)| one_sample(driver, grid, base, s))
        .collect::<Result<Vec<_>>>()?;
    let checks = NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut c = InequalityCheck {
                name: name.to_string(),
                evaluated: rows.len(),
                violations: 0,
                worst_ratio: 0.0,
            };
            for r in &rows {
                let (lhs, rhs) = r[i];
                if lhs > rhs * (1.0 + AUDIT_SLACK) {
                    c.violations += 1;
                }
                if rhs > 0.0 {
                    c.worst_ratio = c.worst_ratio.max(lhs / rhs);
                }
            }
            c
        })
        .collect();
    Ok(InequalityAudit { samples, checks })
}
