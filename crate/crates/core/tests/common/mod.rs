#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rdde::driver::{DriverKind, Harmonic};
use rdde::{Driver, DriverSpec};

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn constant_spec(a: &[f64], b: &[f64], n: usize) -> DriverSpec {
    DriverSpec::constant(&DMatrix::from_row_slice(n, n, a), &DMatrix::from_row_slice(n, n, b))
}

pub fn constant(a: &[f64], b: &[f64], n: usize, half_width: f64) -> Driver {
    Driver::realize(&constant_spec(a, b, n), (-half_width, half_width)).unwrap()
}

/// Period-1 smooth coefficients with four real, well separated multipliers.
pub fn periodic_spec() -> DriverSpec {
    let n = 4;
    let a0 = DMatrix::from_diagonal(&DVector::from_row_slice(&[-0.2, -0.7, -1.3, -2.0]));
    let r = DMatrix::from_fn(n, n, |i, j| ((i + 2 * j) % 3) as f64 - 1.0);
    let c = DMatrix::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { 0.1 } else { 0.0 });
    DriverSpec {
        dimension: n,
        p: 2.0,
        seed: 0,
        kind: DriverKind::QuasiPeriodic {
            frequencies: vec![2.0 * std::f64::consts::PI],
            a0: rows(&a0),
            b0: rows(&(DMatrix::identity(n, n) * 0.05)),
            harmonics: vec![Harmonic {
                a_sin: Some(rows(&c)),
                b_cos: Some(rows(&(r * 0.025))),
                ..Default::default()
            }],
            phases: Some(vec![0.0]),
        },
    }
}

pub fn periodic(half_width: f64) -> Driver {
    Driver::realize(&periodic_spec(), (-half_width, half_width)).unwrap()
}

/// Two frequencies with an irrational ratio, N = 2.
pub fn quasi_periodic_spec(seed: u64) -> DriverSpec {
    let m = |v: &[f64]| rows(&DMatrix::from_row_slice(2, 2, v));
    DriverSpec {
        dimension: 2,
        p: 2.0,
        seed,
        kind: DriverKind::QuasiPeriodic {
            frequencies: vec![1.0, 2f64.sqrt()],
            a0: m(&[-0.4, 0.2, -0.1, -0.9]),
            b0: m(&[0.3, 0.0, 0.1, -0.2]),
            harmonics: vec![
                Harmonic {
                    a_cos: Some(m(&[0.3, 0.0, 0.0, 0.2])),
                    b_sin: Some(m(&[0.1, 0.05, 0.0, 0.1])),
                    ..Default::default()
                },
                Harmonic {
                    a_sin: Some(m(&[0.0, 0.2, -0.2, 0.0])),
                    b_cos: Some(m(&[0.15, 0.0, 0.0, 0.1])),
                    ..Default::default()
                },
            ],
            phases: None,
        },
    }
}

pub fn quasi_periodic(seed: u64, half_width: f64) -> Driver {
    Driver::realize(&quasi_periodic_spec(seed), (-half_width, half_width)).unwrap()
}

/// Two states with unit switching rates; each frozen state has four real
/// rightmost characteristic roots, so the leading four exponents separate.
pub fn telegraph_spec(seed: u64) -> DriverSpec {
    let s1 = (
        DMatrix::from_row_slice(2, 2, &[-0.5, 0.2, 0.0, -1.2]),
        DMatrix::from_row_slice(2, 2, &[-0.1, 0.0, 0.02, -0.05]),
    );
    let s2 = (
        DMatrix::from_row_slice(2, 2, &[-0.3, 0.0, 0.15, -1.0]),
        DMatrix::from_row_slice(2, 2, &[-0.08, 0.01, 0.0, -0.06]),
    );
    let generator = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    DriverSpec::telegraph(&[s1, s2], &generator, seed)
}

pub fn telegraph(seed: u64, half_width: f64) -> Driver {
    Driver::realize(&telegraph_spec(seed), (-half_width, half_width)).unwrap()
}
