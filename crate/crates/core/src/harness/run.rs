use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use crate::driver::{Driver, DriverKind, DriverSpec};
use crate::error::{Error, Result};
use crate::fiber::{FiberKind, GridSpec};
use crate::linalg::principal_angles_orthonormal;
use crate::propagator::{audit_inequalities, InequalityAudit};
use crate::spectrum::{
    bounds_decay_check, characteristic_root_oracle, compare_c_vs_l, monodromy_eigenvector, monodromy_multipliers,
    oseledets_frames, qr_spectrum, BoundsDecay, ComparisonReport, SpectrumConfig, SpectrumReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub experiment: Experiment,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Outcome of the built-in acceptance checks (`compare`, `oracle`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    pub wall_clock_seconds: f64,
    pub stages: Vec<StageTiming>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    version: &'a str,
    experiment: Experiment,
    report: &'a T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub fiber_kind: FiberKind,
    pub rows: Vec<ConvergenceRow>,
    /// Per exponent: `|λ(M) − λ(2M)|` and `|λ(2M) − λ(4M)|`.
    pub gaps: Vec<[f64; 2]>,
    /// Per exponent: `gap(M) / gap(2M)`; 4 for a second-order method.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub index: usize,
    pub estimate: f64,
    pub oracle: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub fiber_kind: FiberKind,
    /// `characteristic_roots` or `monodromy`.
    pub oracle: String,
    pub rows: Vec<OracleRow>,
    /// Largest principal angle between `E_i` and the monodromy eigenvector,
    /// for simple real multipliers (periodic drivers only).
    pub eigenvector_angles: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub horizon: usize,
    pub decay: BoundsDecay,
    pub audit: InequalityAudit,
}

pub(crate) enum OracleKind {
    Constant(DMatrix<f64>, DMatrix<f64>),
    Periodic,
}

/// Which independent oracle applies to a driver: characteristic roots for
/// constant coefficients, the monodromy eigenproblem for period-1 ones.
pub(crate) fn oracle_kind(spec: &DriverSpec) -> Result<OracleKind> {
    let two_pi = 2.0 * std::f64::consts::PI;
    match &spec.kind {
        DriverKind::Constant { a, b } => {
            let n = spec.dimension;
            let m = |r: &Vec<Vec<f64>>| DMatrix::from_row_iterator(n, n, r.iter().flatten().copied());
            Ok(OracleKind::Constant(m(a), m(b)))
        }
        DriverKind::QuasiPeriodic { frequencies, .. }
            if frequencies.iter().all(|w| {
                let k = w / two_pi;
                (k - k.round()).abs() < 1e-12
            }) =>
        {
            Ok(OracleKind::Periodic)
        }
        DriverKind::Telegraph { states, .. } if states.len() == 1 => Err(Error::Config(
            "single-state telegraph: write it as a constant driver for the oracle".into(),
        )),
        _ => Err(Error::Config(
            "oracle needs constant coefficients or a period-1 quasi-periodic driver".into(),
        )),
    }
}

fn realize(cfg: &ExperimentConfig, spec: &SpectrumConfig) -> Result<Driver> {
    Driver::realize(&cfg.effective_driver(), spec.required_window())
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    prefix: String,
    hash: String,
    stages: Vec<StageTiming>,
    outputs: Vec<String>,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        log::info!("stage {name}");
        let out = f();
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    fn write(&mut self, suffix: &str, contents: &str) -> Result<()> {
        let name = format!("{}{suffix}", self.prefix);
        std::fs::write(self.dir.join(&name), contents)?;
        self.outputs.push(name);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, report: &T) -> Result<()> {
        let env = Envelope {
            config_hash: &self.hash,
            version: VERSION,
            experiment: self.cfg.experiment,
            report,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(".json", &text)
    }
}

/// Runs one experiment, writing reports and `manifest.json` into `out`.
/// Numerical failures still produce a manifest (status
/// `numerical_failure`) and whatever reports were complete.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.check()?;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("output directory {}: {e}", out.display())))?;
    let start = Instant::now();
    let prefix = cfg
        .output
        .as_ref()
        .and_then(|o| o.prefix.clone())
        .unwrap_or_else(|| cfg.experiment.label().to_string());
    let mut r = Runner {
        cfg,
        dir: out.to_path_buf(),
        prefix,
        hash: cfg.hash(),
        stages: Vec::new(),
        outputs: Vec::new(),
    };
    let result = match cfg.experiment {
        Experiment::Spectrum => run_spectrum(&mut r).map(|_| None),
        Experiment::Compare => run_compare(&mut r).map(Some),
        Experiment::Converge => run_converge(&mut r).map(|_| None),
        Experiment::Oracle => run_oracle(&mut r).map(Some),
        Experiment::Bounds => run_bounds(&mut r).map(|_| None),
    };
    let (status, error, passed) = match result {
        Ok(p) => (RunStatus::Ok, None, p),
        Err(e @ (Error::Io(_) | Error::Config(_))) => return Err(e),
        Err(e) => (RunStatus::NumericalFailure, Some(e.to_string()), None),
    };
    let mut manifest = RunManifest {
        config_hash: r.hash.clone(),
        version: VERSION.to_string(),
        experiment: cfg.experiment,
        status,
        error,
        passed,
        wall_clock_seconds: 0.0,
        stages: r.stages,
        outputs: r.outputs,
    };
    manifest.outputs.push("manifest.json".into());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(manifest)
}

fn run_spectrum(r: &mut Runner) -> Result<()> {
    let spec = r.cfg.effective_spectrum();
    let (grid, kind) = (r.cfg.grid, r.cfg.fiber);
    let cfg = r.cfg;
    let driver = r.stage("realize", || realize(cfg, &spec))?;
    let report = r.stage("frames", || oseledets_frames(&driver, kind, grid, &spec))?;
    r.write_json(&report)?;
    r.write(".csv", &report.to_csv())?;
    let series = r.stage("qr", || qr_spectrum(&driver, kind, grid, &spec))?;
    r.write("_series.csv", &series.to_csv())?;
    Ok(())
}

fn comparison_csv(c: &ComparisonReport) -> String {
    let mut out = String::from("index,exponent_gap,e_angle,f_angle\n");
    for (i, g) in c.exponent_gaps.iter().enumerate() {
        let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", i + 1, g, cell(c.e_angles.get(i)), cell(c.f_angles.get(i)));
    }
    out
}

fn run_compare(r: &mut Runner) -> Result<bool> {
    let spec = r.cfg.effective_spectrum();
    let grid = r.cfg.grid;
    let cfg = r.cfg;
    let driver = r.stage("realize", || realize(cfg, &spec))?;
    let (c, l) = r.stage("frames", || {
        let (c, l) = rayon::join(
            || oseledets_frames(&driver, FiberKind::C, grid, &spec),
            || oseledets_frames(&driver, FiberKind::L, grid, &spec),
        );
        Ok::<(SpectrumReport, SpectrumReport), Error>((c?, l?))
    })?;
    let tol = r.cfg.tolerances.unwrap_or_default();
    let cmp = r.stage("compare", || compare_c_vs_l(&c, &l, tol))?;
    r.write_json(&cmp)?;
    r.write(".csv", &comparison_csv(&cmp))?;
    Ok(cmp.all_pass)
}

fn run_converge(r: &mut Runner) -> Result<()> {
    let spec = r.cfg.effective_spectrum();
    let kind = r.cfg.fiber;
    let cfg = r.cfg;
    let driver = r.stage("realize", || realize(cfg, &spec))?;
    let levels: Vec<usize> = (0..3).map(|i| r.cfg.grid.m << i).collect();
    let rows = r.stage("spectra", || {
        use rayon::prelude::*;
        levels
            .par_iter()
            .map(|&m| {
                let s = qr_spectrum(&driver, kind, GridSpec::new(m)?, &spec)?;
                Ok(ConvergenceRow { m, exponents: s.exponents })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let k = spec.k;
    let gaps: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            [
                (rows[0].exponents[i] - rows[1].exponents[i]).abs(),
                (rows[1].exponents[i] - rows[2].exponents[i]).abs(),
            ]
        })
        .collect();
    let ratios = gaps.iter().map(|g| g[0] / g[1]).collect();
    let report = ConvergenceReport {
        fiber_kind: kind,
        rows,
        gaps,
        ratios,
    };
    r.write_json(&report)?;
    let mut csv = String::from("m");
    for i in 0..k {
        let _ = write!(csv, ",lambda_{}", i + 1);
    }
    csv.push('\n');
    for row in &report.rows {
        csv.push_str(&row.m.to_string());
        for x in &row.exponents {
            let _ = write!(csv, ",{x}");
        }
        csv.push('\n');
    }
    r.write(".csv", &csv)?;
    Ok(())
}

fn run_oracle(r: &mut Runner) -> Result<bool> {
    let spec = r.cfg.effective_spectrum();
    let (grid, kind) = (r.cfg.grid, r.cfg.fiber);
    let dspec = r.cfg.effective_driver();
    let cfg = r.cfg;
    let driver = r.stage("realize", || realize(cfg, &spec))?;
    let k = spec.k;
    let (name, values, angles) = match oracle_kind(&dspec)? {
        OracleKind::Constant(a, b) => {
            let roots = r.stage("roots", || characteristic_root_oracle(&a, &b, k))?;
            let est = r.stage("qr", || qr_spectrum(&driver, kind, grid, &spec))?;
            let vals: Vec<f64> = roots.iter().map(|z| z.re).collect();
            ("characteristic_roots", (est.exponents, vals), Vec::new())
        }
        OracleKind::Periodic => {
            let mu = r.stage("monodromy", || monodromy_multipliers(&driver, 0.0, kind, grid))?;
            let frames = r.stage("frames", || oseledets_frames(&driver, kind, grid, &spec))?;
            let vals: Vec<f64> = mu[..k].iter().map(|z| z.norm().ln()).collect();
            let mut angles = Vec::new();
            for (i, g) in frames.groups.iter().enumerate() {
                let j = g.indices[0];
                if g.multiplicity() == 1 && mu[j].im == 0.0 {
                    let v = monodromy_eigenvector(&driver, 0.0, kind, grid, mu[j].re)?;
                    let v = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
                    let a = principal_angles_orthonormal(&frames.e_frames[i].vectors, &v);
                    angles.push(a.last().copied().unwrap_or(0.0));
                }
            }
            ("monodromy", (frames.exponents, vals), angles)
        }
    };
    let tol = r.cfg.oracle_tolerance;
    let rows: Vec<OracleRow> = values
        .0
        .iter()
        .zip(&values.1)
        .enumerate()
        .map(|(i, (e, o))| OracleRow {
            index: i + 1,
            estimate: *e,
            oracle: *o,
            gap: (e - o).abs(),
        })
        .collect();
    let pass = rows.iter().all(|row| row.gap <= tol);
    let report = OracleReport {
        fiber_kind: kind,
        oracle: name.to_string(),
        rows,
        eigenvector_angles: angles,
        tolerance: tol,
        pass,
    };
    r.write_json(&report)?;
    let mut csv = String::from("index,estimate,oracle,gap\n");
    for row in &report.rows {
        let _ = writeln!(csv, "{},{},{},{}", row.index, row.estimate, row.oracle, row.gap);
    }
    r.write(".csv", &csv)?;
    Ok(pass)
}

fn run_bounds(r: &mut Runner) -> Result<()> {
    let spec = r.cfg.effective_spectrum();
    let grid = r.cfg.grid;
    let horizon = spec.horizon;
    let h = horizon as f64;
    let dspec = r.cfg.effective_driver();
    let driver = r.stage("realize", || Driver::realize(&dspec, (-h - 1.0, h + 4.0)))?;
    let decay = r.stage("decay", || bounds_decay_check(&driver, grid, horizon))?;
    let samples = r.cfg.audit_samples;
    let seed = spec.seed;
    let audit = r.stage("audit", || audit_inequalities(&driver, grid, samples, (-h, h), seed))?;
    let report = BoundsReport { horizon, decay, audit };
    r.write_json(&report)?;
    let d = &report.decay;
    let mut csv = String::from("quantity,value\n");
    for (k, v) in [
        ("forward_c_slope", d.forward_c_slope),
        ("forward_d_slope", d.forward_d_slope),
        ("backward_c_slope", d.backward_c_slope),
        ("backward_d_slope", d.backward_d_slope),
        ("max_c", d.max_c),
        ("max_d", d.max_d),
    ] {
        let _ = writeln!(csv, "{k},{v}");
    }
    r.write(".csv", &csv)?;
    r.write("_audit.csv", &report.audit.to_csv())?;
    Ok(())
}
