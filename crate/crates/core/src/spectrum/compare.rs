//! Side-by-side check of the C and L spectra and subspaces through `J`.

use serde::{Deserialize, Serialize};

use super::SpectrumReport;
use crate::error::{invalid, Result};
use crate::fiber::{embed_j_coords, embed_j_transpose_coords, orthonormalize, FiberKind};
use crate::linalg::principal_angles_orthonormal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTolerances {
    pub exponent: f64,
    pub e_angle: f64,
    pub f_angle: f64,
}

impl Default for ComparisonTolerances {
    fn default() -> Self {
        ComparisonTolerances {
            exponent: 2e-3,
            e_angle: 1e-2,
            f_angle: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tolerances: ComparisonTolerances,
    /// `|λ_i^(C) − λ_i^(L)|` per index (0 when both are below the floor).
    pub exponent_gaps: Vec<f64>,
    /// `|λ_top^(C) − λ_top^(L)|`
    pub top_gap: f64,
    /// Largest principal angle between `J(E_i^(C))` and `E_i^(L)`, per group.
    pub e_angles: Vec<f64>,
    /// Largest principal angle between `J^{-1}(F_i^(L))` and `F_i^(C)`, per
    /// group, measured on the complements (`Jᵀ F_i^(L)⊥` against `F_i^(C)⊥`).
    pub f_angles: Vec<f64>,
    pub exponents_pass: bool,
    pub e_pass: bool,
    pub f_pass: bool,
    pub all_pass: bool,
    /// Reasons the comparison is partial (unresolved gaps, differing groups).
    pub flags: Vec<String>,
}

pub fn compare_c_vs_l(c: &SpectrumReport, l: &SpectrumReport, tol: ComparisonTolerances) -> Result<ComparisonReport> {
    if c.fiber_kind != FiberKind::C || l.fiber_kind != FiberKind::L {
        return Err(invalid("reports", "expected a C report and an L report"));
    }
    if c.grid != l.grid || c.dimension != l.dimension {
        return Err(invalid("reports", "reports come from different grids or dimensions"));
    }
    let n = c.dimension;
    let mut flags = Vec::new();
    if c.exponents.len() != l.exponents.len() {
        flags.push(format!(
            "k differs: {} (C) vs {} (L); comparing the common prefix",
            c.exponents.len(),
            l.exponents.len()
        ));
    }
    let exponent_gaps: Vec<f64> = c
        .exponents
        .iter()
        .zip(&l.exponents)
        .zip(c.below_floor.iter().zip(&l.below_floor))
        .map(|((a, b), (fa, fb))| if *fa && *fb { 0.0 } else { (a - b).abs() })
        .collect();
    let top_gap = exponent_gaps.first().copied().unwrap_or(0.0);

    let mc: Vec<usize> = c.groups.iter().map(|g| g.multiplicity()).collect();
    let ml: Vec<usize> = l.groups.iter().map(|g| g.multiplicity()).collect();
    let common = mc.iter().zip(&ml).take_while(|(a, b)| a == b).count();
    if mc != ml {
        flags.push(format!("group multiplicities differ: {mc:?} (C) vs {ml:?} (L)"));
    }
    for (name, r) in [("C", c), ("L", l)] {
        if r.groups.iter().any(|g| g.unresolved) {
            flags.push(format!("{name}: some exponent gaps are below resolution"));
        }
        if r.truncated {
            flags.push(format!("{name}: last group may be cut short by k"));
        }
    }

    let mut e_angles = Vec::with_capacity(common);
    let mut f_angles = Vec::with_capacity(common);
    for i in 0..common {
        let je = embed_j_coords(n, &c.e_frames[i].vectors);
        let je = orthonormalize(&je)?.frame.vectors;
        let a = principal_angles_orthonormal(&je, &l.e_frames[i].vectors);
        e_angles.push(a.last().copied().unwrap_or(0.0));

        let jt = embed_j_transpose_coords(n, &l.f_normals[i].vectors);
        let jt = orthonormalize(&jt)?;
        if jt.rank_deficiency > 0 {
            flags.push(format!("group {}: Jᵀ F^(L)⊥ lost rank", i + 1));
        }
        let a = principal_angles_orthonormal(&jt.frame.vectors, &c.f_normals[i].vectors);
        f_angles.push(a.last().copied().unwrap_or(0.0));
    }
    let exponents_pass = exponent_gaps.iter().all(|&g| g <= tol.exponent);
    let e_pass = common > 0 && e_angles.iter().all(|&a| a <= tol.e_angle);
    let f_pass = common > 0 && f_angles.iter().all(|&a| a <= tol.f_angle);
    Ok(ComparisonReport {
        tolerances: tol,
        exponent_gaps,
        top_gap,
        e_angles,
        f_angles,
        exponents_pass,
        e_pass,
        f_pass,
        all_pass: exponents_pass && e_pass && f_pass,
        flags,
    })
}
