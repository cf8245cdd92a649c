//! Seeded realizations of the ergodic base flow `θ_t ω` as coefficient paths
//! `t ↦ (A(θ_t ω), B(θ_t ω))`.
//!
//! A realized [`Driver`] is immutable. It can be evaluated anywhere inside its
//! window, including negative times, and re-based with [`Driver::shifted`].

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::spectral_norm;

/// Row-major matrix as it appears in configuration files.
pub type RowMatrix = Vec<Vec<f64>>;

const STREAM_INITIAL: u64 = 0;
const STREAM_FORWARD: u64 = 1;
const STREAM_BACKWARD: u64 = 2;
const STREAM_PHASES: u64 = 3;

const WINDOW_SLACK: f64 = 1e-9;

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSpec {
    pub dimension: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub kind: DriverKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverKind {
    Constant {
        a: RowMatrix,
        b: RowMatrix,
    },
    /// `A(t) = A0 + Σ_k [Ac_k cos(ω_k t + φ_k) + As_k sin(ω_k t + φ_k)]`, and
    /// likewise for `B`. Phases are drawn from the seed unless given.
    QuasiPeriodic {
        frequencies: Vec<f64>,
        a0: RowMatrix,
        b0: RowMatrix,
        harmonics: Vec<Harmonic>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phases: Option<Vec<f64>>,
    },
    /// Coefficients switch between `states` following a continuous-time
    /// Markov chain with the given generator.
    Telegraph {
        states: Vec<TelegraphState>,
        generator: RowMatrix,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_cos: Option<RowMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sin: Option<RowMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_cos: Option<RowMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_sin: Option<RowMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphState {
    pub a: RowMatrix,
    pub b: RowMatrix,
}

pub fn to_rows(m: &DMatrix<f64>) -> RowMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(field: &str, rows: &RowMatrix, n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidDriver(format!(
            "{field} must be a {n}x{n} matrix"
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDriver(format!("{field} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl DriverSpec {
    pub fn constant(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Self {
        DriverSpec {
            dimension: a.nrows(),
            p: 2.0,
            seed: 0,
            kind: DriverKind::Constant {
                a: to_rows(a),
                b: to_rows(b),
            },
        }
    }

    pub fn telegraph(states: &[(DMatrix<f64>, DMatrix<f64>)], generator: &DMatrix<f64>, seed: u64) -> Self {
        DriverSpec {
            dimension: states[0].0.nrows(),
            p: 2.0,
            seed,
            kind: DriverKind::Telegraph {
                states: states
                    .iter()
                    .map(|(a, b)| TelegraphState {
                        a: to_rows(a),
                        b: to_rows(b),
                    })
                    .collect(),
                generator: to_rows(generator),
            },
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// True when the dimension lies outside the `N ≥ 2` setting of the
    /// underlying theory. Such drivers are still accepted.
    pub fn below_classical_dimension(&self) -> bool {
        self.dimension < 2
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::InvalidDriver("dimension must be at least 1".into()));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidDriver(format!(
                "p must lie in (1, ∞), got {}",
                self.p
            )));
        }
        match &self.kind {
            DriverKind::Constant { a, b } => {
                matrix_from_rows("a", a, n)?;
                matrix_from_rows("b", b, n)?;
            }
            DriverKind::QuasiPeriodic {
                frequencies,
                a0,
                b0,
                harmonics,
                phases,
            } => {
                matrix_from_rows("a0", a0, n)?;
                matrix_from_rows("b0", b0, n)?;
                if frequencies.iter().any(|w| *w == 0.0 || !w.is_finite()) {
                    return Err(Error::InvalidDriver(
                        "quasi-periodic frequencies must be finite and nonzero".into(),
                    ));
                }
                if harmonics.len() != frequencies.len() {
                    return Err(Error::InvalidDriver(format!(
                        "expected one harmonic per frequency ({}), got {}",
                        frequencies.len(),
                        harmonics.len()
                    )));
                }
                for h in harmonics {
                    for (name, m) in [
                        ("a_cos", &h.a_cos),
                        ("a_sin", &h.a_sin),
                        ("b_cos", &h.b_cos),
                        ("b_sin", &h.b_sin),
                    ] {
                        if let Some(m) = m {
                            matrix_from_rows(name, m, n)?;
                        }
                    }
                }
                if let Some(ph) = phases {
                    if ph.len() != frequencies.len() {
                        return Err(Error::InvalidDriver(
                            "phases must match frequencies in length".into(),
                        ));
                    }
                }
            }
            DriverKind::Telegraph { states, generator } => {
                if states.is_empty() {
                    return Err(Error::InvalidDriver("telegraph needs at least one state".into()));
                }
                for s in states {
                    matrix_from_rows("states.a", &s.a, n)?;
                    matrix_from_rows("states.b", &s.b, n)?;
                }
                validate_generator(generator, states.len())?;
            }
        }
        Ok(())
    }
}

fn validate_generator(g: &RowMatrix, m: usize) -> Result<()> {
    if g.len() != m || g.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidDriver(format!(
            "generator must be {m}x{m} to match the number of states"
        )));
    }
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDriver("generator has non-finite entries".into()));
            }
            if i != j && v < 0.0 {
                return Err(Error::InvalidDriver(format!(
                    "generator off-diagonal entry ({i},{j}) is negative"
                )));
            }
        }
        let sum: f64 = row.iter().sum();
        let scale = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if sum.abs() > 1e-9 * scale {
            return Err(Error::InvalidDriver(format!(
                "generator row {i} sums to {sum}, expected 0"
            )));
        }
    }
    Ok(())
}

/// Stationary distribution `π` of a generator (`π Q = 0`, `Σ π = 1`).
pub fn stationary_distribution(generator: &DMatrix<f64>) -> DVectorF {
    let m = generator.nrows();
    let mut sys = DMatrix::zeros(m + 1, m);
    sys.view_mut((0, 0), (m, m)).copy_from(&generator.transpose());
    sys.row_mut(m).fill(1.0);
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let svd = sys.svd(true, true);
    let mut pi = svd
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| nalgebra::DVector::from_element(m, 1.0 / m as f64));
    pi.iter_mut().for_each(|v| *v = v.max(0.0));
    let s = pi.sum();
    pi / s
}

type DVectorF = nalgebra::DVector<f64>;

#[derive(Debug)]
struct Harmonics {
    freqs: Vec<f64>,
    phases: Vec<f64>,
    a_cos: Vec<DMatrix<f64>>,
    a_sin: Vec<DMatrix<f64>>,
    b_cos: Vec<DMatrix<f64>>,
    b_sin: Vec<DMatrix<f64>>,
}

#[derive(Debug)]
enum Path {
    Constant {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
    },
    QuasiPeriodic {
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        h: Harmonics,
    },
    Telegraph {
        states: Vec<(DMatrix<f64>, DMatrix<f64>)>,
        /// Sorted, with `-∞` and `+∞` sentinels; interval `i` is
        /// `[breaks[i], breaks[i+1])`.
        breaks: Vec<f64>,
        labels: Vec<usize>,
    },
}

#[derive(Debug)]
struct Realization {
    spec: DriverSpec,
    n: usize,
    t_min: f64,
    t_max: f64,
    path: Path,
}

/// One realized coefficient path. Cheap to clone; clones share the path.
#[derive(Debug, Clone)]
pub struct Driver {
    inner: Arc<Realization>,
    offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSample {
    pub t: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `‖A‖₂`
    pub a_norm: f64,
    /// `‖B‖₂`
    pub b_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// `(1/T) ∫_0^T a(θ_τ ω) dτ`
    pub mean_a: f64,
    /// average over integer `r` of `ln⁺ ∫_r^{r+1} b^q`
    pub mean_lnplus_int_bq: f64,
    pub max_a: f64,
    pub max_b: f64,
}

/// Materialize one realization of the base flow on `[t_min, t_max]`.
pub fn realize(spec: &DriverSpec, window: (f64, f64)) -> Result<Driver> {
    Driver::realize(spec, window)
}

impl Driver {
    pub fn realize(spec: &DriverSpec, window: (f64, f64)) -> Result<Driver> {
        let (t_min, t_max) = window;
        if !t_min.is_finite() || !t_max.is_finite() {
            return Err(invalid("window", "bounds must be finite"));
        }
        if t_min >= t_max {
            return Err(invalid("window", format!("need t_min < t_max, got [{t_min}, {t_max}]")));
        }
        spec.validate()?;
        let n = spec.dimension;
        let path = match &spec.kind {
            DriverKind::Constant { a, b } => Path::Constant {
                a: matrix_from_rows("a", a, n)?,
                b: matrix_from_rows("b", b, n)?,
            },
            DriverKind::QuasiPeriodic {
                frequencies,
                a0,
                b0,
                harmonics,
                phases,
            } => {
                let phases = match phases {
                    Some(p) => p.clone(),
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                        rng.set_stream(STREAM_PHASES);
                        (0..frequencies.len())
                            .map(|_| 2.0 * PI * rng.random::<f64>())
                            .collect()
                    }
                };
                let get = |m: &Option<RowMatrix>, name| -> Result<DMatrix<f64>> {
                    match m {
                        Some(m) => matrix_from_rows(name, m, n),
                        None => Ok(DMatrix::zeros(n, n)),
                    }
                };
                let mut h = Harmonics {
                    freqs: frequencies.clone(),
                    phases,
                    a_cos: vec![],
                    a_sin: vec![],
                    b_cos: vec![],
                    b_sin: vec![],
                };
                for hm in harmonics {
                    h.a_cos.push(get(&hm.a_cos, "a_cos")?);
                    h.a_sin.push(get(&hm.a_sin, "a_sin")?);
                    h.b_cos.push(get(&hm.b_cos, "b_cos")?);
                    h.b_sin.push(get(&hm.b_sin, "b_sin")?);
                }
                Path::QuasiPeriodic {
                    a0: matrix_from_rows("a0", a0, n)?,
                    b0: matrix_from_rows("b0", b0, n)?,
                    h,
                }
            }
            DriverKind::Telegraph { states, generator } => {
                let mats = states
                    .iter()
                    .map(|s| Ok((matrix_from_rows("a", &s.a, n)?, matrix_from_rows("b", &s.b, n)?)))
                    .collect::<Result<Vec<_>>>()?;
                let m = states.len();
                let gen = DMatrix::from_fn(m, m, |i, j| generator[i][j]);
                let (breaks, labels) = simulate_chain(&gen, spec.seed, t_min, t_max);
                Path::Telegraph {
                    states: mats,
                    breaks,
                    labels,
                }
            }
        };
        Ok(Driver {
            inner: Arc::new(Realization {
                spec: spec.clone(),
                n,
                t_min,
                t_max,
                path,
            }),
            offset: 0.0,
        })
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.inner.spec
    }

    pub fn dimension(&self) -> usize {
        self.inner.n
    }

    pub fn p(&self) -> f64 {
        self.inner.spec.p
    }

    pub fn q(&self) -> f64 {
        self.inner.spec.q()
    }

    /// Realized window in this driver's own time coordinate.
    pub fn window(&self) -> (f64, f64) {
        (self.inner.t_min - self.offset, self.inner.t_max - self.offset)
    }

    /// The driver seen from `θ_s ω`: `shifted(s).coefficients(t)` equals
    /// `coefficients(s + t)`.
    pub fn shifted(&self, s: f64) -> Driver {
        Driver {
            inner: Arc::clone(&self.inner),
            offset: self.offset + s,
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.inner.path, Path::Telegraph { .. } | Path::Constant { .. })
    }

    pub fn is_constant(&self) -> bool {
        match &self.inner.path {
            Path::Constant { .. } => true,
            Path::Telegraph { states, .. } => states.len() == 1,
            Path::QuasiPeriodic { .. } => false,
        }
    }

    pub fn check_window(&self, t0: f64, t1: f64) -> Result<()> {
        let (lo, hi) = self.window();
        for t in [t0, t1] {
            if !t.is_finite() || t < lo - WINDOW_SLACK || t > hi + WINDOW_SLACK {
                return Err(Error::OutsideWindow {
                    t,
                    t_min: lo,
                    t_max: hi,
                });
            }
        }
        Ok(())
    }

    pub fn coefficients(&self, t: f64) -> Result<CoefficientSample> {
        self.check_window(t, t)?;
        let (a, b) = self.matrices(t);
        Ok(CoefficientSample {
            t,
            a_norm: spectral_norm(&a),
            b_norm: spectral_norm(&b),
            a,
            b,
        })
    }

    /// Coefficient matrices at `t`, without a window check. Telegraph paths
    /// are right-continuous at switch times.
    pub(crate) fn matrices(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        self.eval_abs(t + self.offset)
    }

    /// Coefficients at `t` for a step known to lie in `[lo, hi]` with no
    /// switch strictly inside. Piecewise-constant paths are read at the
    /// middle of the step so stage times on the step ends never pick up the
    /// neighbouring state.
    pub(crate) fn matrices_within(&self, t: f64, lo: f64, hi: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        match self.inner.path {
            Path::Telegraph { .. } => self.matrices(0.5 * (lo + hi)),
            _ => self.matrices(t),
        }
    }

    fn eval_abs(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        match &self.inner.path {
            Path::Constant { a, b } => (a.clone(), b.clone()),
            Path::QuasiPeriodic { a0, b0, h } => {
                let mut a = a0.clone();
                let mut b = b0.clone();
                for k in 0..h.freqs.len() {
                    let arg = h.freqs[k] * t + h.phases[k];
                    let (s, c) = arg.sin_cos();
                    a += &h.a_cos[k] * c + &h.a_sin[k] * s;
                    b += &h.b_cos[k] * c + &h.b_sin[k] * s;
                }
                (a, b)
            }
            Path::Telegraph {
                states,
                breaks,
                labels,
            } => {
                let i = breaks.partition_point(|&x| x <= t).saturating_sub(1);
                let (a, b) = &states[labels[i.min(labels.len() - 1)]];
                (a.clone(), b.clone())
            }
        }
    }

    /// Switch times strictly inside `(t0, t1)`, in this driver's time.
    pub fn breaks_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        match &self.inner.path {
            Path::Telegraph { breaks, .. } => {
                let (a0, a1) = (t0 + self.offset, t1 + self.offset);
                let start = breaks.partition_point(|&x| x <= a0);
                breaks[start..]
                    .iter()
                    .take_while(|&&x| x < a1)
                    .map(|&x| x - self.offset)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// All switch times inside the realized window.
    pub fn switch_times(&self) -> Vec<f64> {
        let (lo, hi) = self.window();
        self.breaks_in(lo, hi)
    }

    /// `∫_{t0}^{t1} f(A(τ), B(τ)) dτ`, split at switch times; composite Simpson
    /// with `panels_per_unit` panels on smooth pieces, exact on constant ones.
    pub fn integrate<F>(&self, t0: f64, t1: f64, panels_per_unit: usize, f: F) -> f64
    where
        F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> f64,
    {
        if t1 <= t0 {
            return 0.0;
        }
        let mut pts = vec![t0];
        pts.extend(self.breaks_in(t0, t1));
        pts.push(t1);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let len = hi - lo;
            if len <= 0.0 {
                continue;
            }
            if self.is_piecewise_constant() {
                let (a, b) = self.matrices(0.5 * (lo + hi));
                total += len * f(&a, &b);
                continue;
            }
            let mut panels = ((len * panels_per_unit as f64).ceil() as usize).max(2);
            if panels % 2 == 1 {
                panels += 1;
            }
            let h = len / panels as f64;
            let mut acc = 0.0;
            for i in 0..=panels {
                let t = if i == panels { hi } else { lo + i as f64 * h };
                let (a, b) = self.matrices(t);
                let w = if i == 0 || i == panels {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * f(&a, &b);
            }
            total += acc * h / 3.0;
        }
        total
    }

    /// Empirical stand-ins for the summability assumptions on `a = ‖A‖` and
    /// `b = ‖B‖` over `[0, horizon]`.
    pub fn summability_report(&self, horizon: f64) -> Result<SummabilityReport> {
        if !(horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        self.check_window(0.0, horizon)?;
        let q = self.q();
        let ppu = 64;
        let int_a = self.integrate(0.0, horizon, ppu, |a, _| spectral_norm(a));
        let whole = horizon.floor() as usize;
        let mut lnplus = 0.0;
        for r in 0..whole {
            let r = r as f64;
            let ibq = self.integrate(r, r + 1.0, ppu, |_, b| spectral_norm(b).powf(q));
            lnplus += if ibq > 1.0 { ibq.ln() } else { 0.0 };
        }
        let (mut max_a, mut max_b) = (0.0f64, 0.0f64);
        let samples = (horizon * ppu as f64).ceil() as usize;
        let mut probe = |t: f64| {
            let (a, b) = self.matrices(t);
            max_a = max_a.max(spectral_norm(&a));
            max_b = max_b.max(spectral_norm(&b));
        };
        for i in 0..=samples {
            probe(horizon * i as f64 / samples as f64);
        }
        for s in self.breaks_in(0.0, horizon) {
            probe(s);
        }
        Ok(SummabilityReport {
            mean_a: int_a / horizon,
            mean_lnplus_int_bq: if whole > 0 { lnplus / whole as f64 } else { 0.0 },
            max_a,
            max_b,
        })
    }
}

/// Draw a stationary two-sided path of the chain. The state at time 0 comes
/// from the stationary law; the forward and backward halves use separate
/// streams, each consumed sequentially, so any window yields the same path on
/// its overlap with any other window.
fn simulate_chain(gen: &DMatrix<f64>, seed: u64, t_min: f64, t_max: f64) -> (Vec<f64>, Vec<usize>) {
    let m = gen.nrows();
    let pi = stationary_distribution(gen);
    let rate = |x: usize| -gen[(x, x)];

    let mut rng0 = ChaCha8Rng::seed_from_u64(seed);
    rng0.set_stream(STREAM_INITIAL);
    let x0 = pick(&mut rng0, (0..m).map(|j| pi[j]));

    let next_state = |rng: &mut ChaCha8Rng, x: usize, reversed: bool| {
        pick(
            rng,
            (0..m).map(|y| {
                if y == x {
                    0.0
                } else if reversed {
                    if pi[x] > 0.0 {
                        pi[y] * gen[(y, x)] / pi[x]
                    } else {
                        gen[(x, y)]
                    }
                } else {
                    gen[(x, y)]
                }
            }),
        )
    };

    // forward: (switch time, new state)
    let mut fwd = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_FORWARD);
    let (mut t, mut x) = (0.0f64, x0);
    let horizon = t_max.max(0.0);
    while rate(x) > 0.0 {
        t += rng.sample::<f64, _>(Exp1) / rate(x);
        if t > horizon {
            break;
        }
        x = next_state(&mut rng, x, false);
        fwd.push((t, x));
    }

    // backward: (switch time, state before the switch)
    let mut bwd = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_BACKWARD);
    let (mut t, mut x) = (0.0f64, x0);
    let horizon = t_min.min(0.0);
    while rate(x) > 0.0 {
        t -= rng.sample::<f64, _>(Exp1) / rate(x);
        if t < horizon {
            break;
        }
        x = next_state(&mut rng, x, true);
        bwd.push((t, x));
    }

    let mut breaks = vec![f64::NEG_INFINITY];
    let mut labels = Vec::new();
    for (i, &(s, _)) in bwd.iter().enumerate().rev() {
        labels.push(bwd[i].1);
        breaks.push(s);
    }
    labels.push(x0);
    for &(s, y) in &fwd {
        breaks.push(s);
        labels.push(y);
    }
    breaks.push(f64::INFINITY);
    (breaks, labels)
}

fn pick<I: Iterator<Item = f64>>(rng: &mut ChaCha8Rng, weights: I) -> usize {
    let w: Vec<f64> = weights.collect();
    let total: f64 = w.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        acc += wi;
        if u < acc {
            return i;
        }
    }
    w.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}
