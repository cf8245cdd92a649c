//! Lyapunov exponents, Oseledets filtrations and covariant subspaces of the
//! discretized cocycles, plus the checks comparing the two fibers.
//!
//! Exponents come from the discrete QR method along integer base times.
//! Covariant subspaces use the forward-push / backward-filtration
//! intersection: a frame pushed forward from the past spans
//! `E_1 ⊕ … ⊕ E_i`, the backward iteration of transposed unit operators
//! spans the complement of `F_i`, and `E_i` is their intersection.
//!
//! Rates at or below [`crate::LN_RATE_FLOOR`] per unit step stand in for
//! `−∞`; only "below the floor" is certified, never `−∞` itself.

mod checks;
mod compare;
mod frames;
mod oracle;
mod qr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fiber::{FiberKind, GridSpec, SubspaceFrame};

pub use checks::{
    backward_rate_check, bounds_decay_check, rate_of_vector, temperedness_check, BackwardRates, BoundsDecay,
    RateEstimate, Temperedness,
};
pub use compare::{compare_c_vs_l, ComparisonReport, ComparisonTolerances};
pub use frames::{oseledets_frames, FrameHistory};
pub use oracle::{characteristic_root_oracle, monodromy_eigenvector, monodromy_multipliers};
pub use qr::{qr_spectrum, qr_spectrum_from, top_exponent, QrSpectrum, TopExponent};

/// ChaCha stream for probe blocks; drivers use streams 0 to 3.
const PROBE_STREAM: u64 = 11;

/// Per-step log rate recorded for a column that collapsed to zero.
pub const COLLAPSE_LN_RATE: f64 = -50.0;

fn default_renorm() -> usize {
    1
}

fn default_angle_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Number of exponents sought.
    pub k: usize,
    /// Number of unit steps `T`.
    pub horizon: usize,
    /// Steps between re-orthonormalizations. Columns whose growth trails
    /// the leading one by more than about `e^{-27}` within one window are
    /// lost to round-off and treated as collapsed.
    #[serde(default = "default_renorm")]
    pub renorm_every: usize,
    /// Steps discarded before averaging.
    #[serde(default)]
    pub transient: usize,
    /// Negative-time window for covariant frames; defaults to `horizon / 4`.
    #[serde(default)]
    pub backward_window: Option<usize>,
    /// Gap below which exponents are merged; defaults to ten times the
    /// largest convergence drift (at least `1e-6`).
    #[serde(default)]
    pub gap_tolerance: Option<f64>,
    /// Principal-angle tolerance for equivariance of covariant frames.
    #[serde(default = "default_angle_tol")]
    pub angle_tolerance: f64,
    /// Seed of the probe block (independent of the driver seed).
    #[serde(default)]
    pub seed: u64,
}

impl SpectrumConfig {
    pub fn new(k: usize, horizon: usize) -> Self {
        SpectrumConfig {
            k,
            horizon,
            renorm_every: 1,
            transient: horizon / 10,
            backward_window: None,
            gap_tolerance: None,
            angle_tolerance: default_angle_tol(),
            seed: 0,
        }
    }

    pub fn with_transient(mut self, transient: usize) -> Self {
        self.transient = transient;
        self
    }

    pub fn with_renorm_every(mut self, r: usize) -> Self {
        self.renorm_every = r;
        self
    }

    pub fn with_backward_window(mut self, w: usize) -> Self {
        self.backward_window = Some(w);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_gap_tolerance(mut self, tol: f64) -> Self {
        self.gap_tolerance = Some(tol);
        self
    }

    pub fn backward_steps(&self) -> usize {
        self.backward_window.unwrap_or(self.horizon / 4).max(1)
    }

    /// Driver window needed by [`oseledets_frames`] (which also covers the
    /// QR estimates).
    pub fn required_window(&self) -> (f64, f64) {
        let back = (self.backward_steps() + self.transient) as f64;
        let fwd = (self.horizon + self.transient) as f64 + 1.0;
        (-back - 1.0, fwd + 1.0)
    }

    /// Transient rounded up to a whole number of renormalization windows.
    pub(crate) fn aligned_transient(&self) -> usize {
        self.transient.div_ceil(self.renorm_every) * self.renorm_every
    }

    pub fn validate(&self, ambient_dim: usize) -> Result<()> {
        if self.k == 0 || self.k > ambient_dim {
            return Err(invalid(
                "k",
                format!("must lie in 1..={ambient_dim}, got {}", self.k),
            ));
        }
        if self.renorm_every == 0 {
            return Err(invalid("renorm_every", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.aligned_transient() >= self.horizon {
            return Err(invalid(
                "transient",
                format!(
                    "transient ({}, aligned to renorm_every) must be below the horizon {}",
                    self.aligned_transient(),
                    self.horizon
                ),
            ));
        }
        if let Some(t) = self.gap_tolerance {
            if !(t > 0.0) {
                return Err(invalid("gap_tolerance", "must be positive"));
            }
        }
        if !(self.angle_tolerance > 0.0) {
            return Err(invalid("angle_tolerance", "must be positive"));
        }
        Ok(())
    }

    pub(crate) fn probe_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(PROBE_STREAM);
        rng
    }
}

/// Exponents whose gaps fall below the tolerance, merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentGroup {
    /// Mean of the merged estimates.
    pub exponent: f64,
    /// Indices into the sorted exponent list.
    pub indices: Vec<usize>,
    /// Gap to a neighbouring group is within twice the tolerance.
    pub unresolved: bool,
}

impl ExponentGroup {
    pub fn multiplicity(&self) -> usize {
        self.indices.len()
    }
}

/// Group sorted (nonincreasing) exponents. Entries at or below the floor
/// are left out: they stand for `−∞` and carry no Oseledets space.
pub(crate) fn group_exponents(exponents: &[f64], tol: f64) -> Vec<ExponentGroup> {
    let mut groups: Vec<ExponentGroup> = Vec::new();
    for (i, &x) in exponents.iter().enumerate() {
        if x <= crate::LN_RATE_FLOOR {
            break;
        }
        match groups.last_mut() {
            Some(g) if exponents[*g.indices.last().unwrap()] - x <= tol => g.indices.push(i),
            _ => groups.push(ExponentGroup {
                exponent: x,
                indices: vec![i],
                unresolved: false,
            }),
        }
    }
    for g in groups.iter_mut() {
        g.exponent = g.indices.iter().map(|&i| exponents[i]).sum::<f64>() / g.indices.len() as f64;
    }
    for i in 1..groups.len() {
        let gap = exponents[*groups[i - 1].indices.last().unwrap()] - exponents[groups[i].indices[0]];
        if gap <= 2.0 * tol {
            groups[i - 1].unresolved = true;
            groups[i].unresolved = true;
        }
    }
    groups
}

/// Estimated spectrum with covariant and filtration frames at base time 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub fiber_kind: FiberKind,
    pub grid: GridSpec,
    pub dimension: usize,
    pub config: SpectrumConfig,
    /// `λ₁ ≥ λ₂ ≥ …`, `k` of them.
    pub exponents: Vec<f64>,
    /// Last-window drift of the running average, per exponent.
    pub drift: Vec<f64>,
    pub below_floor: Vec<bool>,
    pub gap_tolerance: f64,
    pub groups: Vec<ExponentGroup>,
    /// The guard exponent (index `k + 1`) came within the tolerance of the
    /// last group, whose multiplicity may therefore be cut short.
    pub truncated: bool,
    /// `E_i(ω)`, one frame per group.
    pub e_frames: Vec<SubspaceFrame>,
    /// `E_i(θ₁ω)`, one frame per group.
    pub e_frames_next: Vec<SubspaceFrame>,
    /// Orthonormal frames of the complements `F_i(ω)^⊥` (dimension
    /// `d_i = m_1 + … + m_i`); `F_i` itself is what these annihilate.
    pub f_normals: Vec<SubspaceFrame>,
    /// Largest principal angle between `U(1) E_i(θ_n ω)` and
    /// `E_i(θ_{n+1} ω)` over the sampled steps, per group.
    pub equivariance_angles: Vec<f64>,
    pub equivariance_ok: bool,
    /// Frame trajectories kept for the backward-rate and temperedness
    /// checks; not serialized.
    #[serde(skip)]
    pub history: Option<FrameHistory>,
}

impl SpectrumReport {
    /// Cumulative dimension `d_i` of the first `i + 1` groups.
    pub fn cumulative_dim(&self, i: usize) -> usize {
        self.groups[..=i].iter().map(|g| g.multiplicity()).sum()
    }

    /// Orthonormal frame of `F_i(ω)` itself (full complement; can be large).
    pub fn f_frame(&self, i: usize) -> SubspaceFrame {
        let w = &self.f_normals[i].vectors;
        let d = w.ncols();
        let n = w.nrows();
        let basis = crate::linalg::null_space(&w.transpose(), n - d);
        SubspaceFrame {
            ambient_dim: n,
            vectors: basis,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,exponent,drift,below_floor\n");
        for (i, x) in self.exponents.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, x, self.drift[i], self.below_floor[i]));
        }
        out
    }
}

/// Starting block of `k` columns drawn from the probe stream: random
/// combinations of the cosine modes `cos(πl(s+1))`, sampled on the grid, so
/// that refining the grid keeps the same continuous initial segments. On L
/// the head is drawn independently of the density.
pub(crate) fn initial_probe(
    kind: FiberKind,
    grid: GridSpec,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let modes = k.div_ceil(n).max(8);
    let nodes = grid.nodes();
    let dim = kind.ambient_dim(grid, n);
    let offset = if kind == FiberKind::L { n } else { 0 };
    let mut out = DMatrix::zeros(dim, k);
    for c in 0..k {
        let coef = crate::linalg::gaussian_matrix(rng, n, modes + 1);
        for j in 0..nodes {
            let s = grid.node(j) + 1.0;
            for (l, a) in coef.column_iter().take(modes).enumerate() {
                let phi = (std::f64::consts::PI * l as f64 * s).cos() / (1.0 + l as f64);
                for i in 0..n {
                    out[(offset + j * n + i, c)] += a[i] * phi;
                }
            }
        }
        if kind == FiberKind::L {
            for i in 0..n {
                out[(i, c)] = coef[(i, modes)];
            }
        }
    }
    out
}
