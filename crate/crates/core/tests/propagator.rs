mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rdde::fiber::{embed_j, norm_c, norm_l};
use rdde::propagator::*;
use rdde::{Driver, FiberKind, GridSpec, SegmentC, SegmentL};

fn segment(g: GridSpec, n: usize, coef: &[f64]) -> SegmentC {
    SegmentC::from_fn(g, n, |s| {
        DVector::from_fn(n, |i, _| {
            coef.iter()
                .enumerate()
                .map(|(l, c)| c * (std::f64::consts::PI * l as f64 * (s + 1.0) + i as f64).cos())
                .sum()
        })
    })
}

fn drivers() -> Vec<Driver> {
    vec![
        constant(&[0.1, -0.4, 0.3, -0.2], &[0.5, 0.1, -0.2, 0.7], 2, 40.0),
        quasi_periodic(2, 40.0),
        telegraph(3, 40.0),
    ]
}

#[test]
fn identity_at_zero_and_composition_of_unit_steps() {
    let g = GridSpec::new(16).unwrap();
    for d in drivers() {
        let u = segment(g, 2, &[1.0, -0.5, 0.25]);
        assert_eq!(propagate(&d, 1.3, &u, 0.0).unwrap(), u);
        let two = propagate(&d, 1.3, &u, 2.0).unwrap();
        let once = step_unit_c(&d, 1.3, &u).unwrap();
        let twice = step_unit_c(&d, 2.3, &once).unwrap();
        assert_eq!(two, twice);
    }
}

#[test]
fn grid_aligned_half_step_bracketing() {
    let g = GridSpec::new(32).unwrap();
    for d in drivers() {
        let u = segment(g, 2, &[0.3, 1.0, -0.7]);
        let direct = propagate_c(&d, 0.0, &u, 1.5).unwrap();
        let half = propagate_c(&d, 0.0, &u, 0.5).unwrap();
        let split = step_unit_c(&d, 0.5, &half).unwrap();
        let r = (direct.coords() - split.coords()).amax() / norm_c(&direct);
        assert!(r <= 1e-8, "{r:e}");
    }
}

#[test]
fn assembled_operator_matches_direct_steps() {
    let g = GridSpec::new(12).unwrap();
    let d = telegraph(8, 40.0);
    for kind in [FiberKind::C, FiberKind::L] {
        let op = assemble_unit_operator(&d, 2.25, kind, g).unwrap();
        let dim = kind.ambient_dim(g, 2);
        for k in 0..20 {
            let x = DMatrix::from_fn(dim, 1, |r, _| ((r * 7 + k * 13) as f64 * 0.37).sin());
            let direct = step_coords(&d, 2.25, kind, g, &x, 1.0).unwrap();
            let err = (&op.matrix * &x - &direct).amax() / direct.amax();
            assert!(err <= 1e-10, "{kind:?} {err:e}");
        }
    }
}

#[test]
fn unit_operator_csv_has_one_row_per_coordinate() {
    let g = GridSpec::new(4).unwrap();
    let d = constant(&[0.0], &[1.0], 1, 5.0);
    let op = assemble_unit_operator(&d, 0.0, FiberKind::L, g).unwrap();
    assert_eq!(op.to_csv().lines().count(), op.matrix.nrows());
}

#[test]
fn lc_operator_spectrum_stabilizes_under_refinement() {
    let d = quasi_periodic(1, 10.0);
    let sv = |m: usize| {
        let op = assemble_lc_operator(&d, 0.0, GridSpec::new(m).unwrap()).unwrap();
        // the C output is compared in the trapezoid L2 geometry on both grids
        let w = rdde::fiber::inner_product_sqrt_weights(FiberKind::C, GridSpec::new(m).unwrap(), 2);
        let wl = rdde::fiber::inner_product_sqrt_weights(FiberKind::L, GridSpec::new(m).unwrap(), 2);
        let scaled = DMatrix::from_fn(op.nrows(), op.ncols(), |r, c| w[r] * op[(r, c)] / wl[c]);
        let mut s: Vec<f64> = scaled.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    };
    let (a, b) = (sv(16), sv(32));
    for i in 0..4 {
        assert!((a[i] - b[i]).abs() <= 2e-2 * b[0], "{i}: {} vs {}", a[i], b[i]);
    }
}

#[test]
fn lc_factorization_converges_at_first_order_for_jumps() {
    // a head that disagrees with the density endpoint is a jump the grid
    // cannot hold once a fractional step runs first
    let d = constant(&[0.2, -0.1, 0.0, -0.6], &[0.4, 0.0, 0.3, -0.2], 2, 40.0);
    let gap = |m: usize| {
        let g = GridSpec::new(m).unwrap();
        let u = SegmentL::new(g, 2.0, DVector::from_vec(vec![0.0, -1.6]), DVector::zeros(2 * (m + 1))).unwrap();
        let lc = op_lc(&d, 0.0, &u, 1.5).unwrap();
        let one = op_lc(&d, 0.0, &u, 1.0).unwrap();
        let later = propagate_c(&d, 1.0, &one, 0.5).unwrap();
        (later.coords() - lc.coords()).amax() / norm_c(&lc)
    };
    let e: Vec<f64> = [16, 32, 64].iter().map(|&m| gap(m)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..2.3).contains(&ratio), "{e:?}");
    }
    assert!(e[2] < 3e-3);
}

fn small_driver(kind: u8, seed: u64) -> Driver {
    match kind % 3 {
        0 => constant(&[0.2, -0.1, 0.0, -0.6], &[0.4, 0.0, 0.3, -0.2], 2, 40.0),
        1 => quasi_periodic(seed, 40.0),
        _ => telegraph(seed, 40.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_linear(
        kind in 0u8..3, seed in 0u64..50,
        c1 in prop::collection::vec(-2.0f64..2.0, 3), c2 in prop::collection::vec(-2.0f64..2.0, 3),
        a in -3.0f64..3.0, b in -3.0f64..3.0, base in -10.0f64..10.0, t in 0.0f64..2.5,
    ) {
        let g = GridSpec::new(8).unwrap();
        let d = small_driver(kind, seed);
        let (u, v) = (segment(g, 2, &c1), segment(g, 2, &c2));
        let combo = SegmentC::from_coords(g, 2, u.coords() * a + v.coords() * b).unwrap();
        let lhs = propagate_c(&d, base, &combo, t).unwrap();
        let pu = propagate_c(&d, base, &u, t).unwrap();
        let pv = propagate_c(&d, base, &v, t).unwrap();
        let rhs = pu.coords() * a + pv.coords() * b;
        let scale = 1.0 + pu.coords().amax() * a.abs() + pv.coords().amax() * b.abs();
        prop_assert!((lhs.coords() - rhs).amax() <= 1e-12 * scale);
    }

    #[test]
    fn intertwining_is_exact(
        kind in 0u8..3, seed in 0u64..50, c in prop::collection::vec(-2.0f64..2.0, 4),
        base in -10.0f64..10.0, t in 0.0f64..2.5,
    ) {
        let g = GridSpec::new(8).unwrap();
        let d = small_driver(kind, seed);
        let u = segment(g, 2, &c);
        let via_c = embed_j(&propagate_c(&d, base, &u, t).unwrap(), 2.0);
        let via_l = propagate_l(&d, base, &embed_j(&u, 2.0), t).unwrap();
        prop_assert_eq!(via_c, via_l);
    }

    #[test]
    fn lc_operator_relations(
        kind in 0u8..3, seed in 0u64..50, c in prop::collection::vec(-2.0f64..2.0, 3),
        head in prop::collection::vec(-2.0f64..2.0, 2), base in -10.0f64..10.0, steps in 8usize..20,
    ) {
        // grid-aligned times: off-grid compositions differ by re-sampling error
        let t = steps as f64 / 8.0;
        let g = GridSpec::new(8).unwrap();
        let d = small_driver(kind, seed);
        let w = segment(g, 2, &c);
        let u = SegmentL::new(g, 2.0, DVector::from_vec(head), w.coords().clone()).unwrap();
        // J ∘ U^(L,C)(t) = U^(L)(t)
        let lc = op_lc(&d, base, &u, t).unwrap();
        let l = propagate_l(&d, base, &u, t).unwrap();
        prop_assert!((embed_j(&lc, 2.0).coords() - l.coords()).amax() <= 1e-9 * (1.0 + norm_l(&l)));
        // U^(L,C)(n) = U^(C)(n − 1) at θ₁ω after U^(L,C)(1), at whole n
        let whole = (t.floor()).max(1.0);
        let one = op_lc(&d, base, &u, 1.0).unwrap();
        let later = propagate_c(&d, base + 1.0, &one, whole - 1.0).unwrap();
        let direct = op_lc(&d, base, &u, whole).unwrap();
        prop_assert_eq!(later, direct);
        // U^(C)(t) = U^(L,C)(t) ∘ J
        let cj = op_lc(&d, base, &embed_j(&w, 2.0), t).unwrap();
        let cc = propagate_c(&d, base, &w, t).unwrap();
        prop_assert!((cj.coords() - cc.coords()).amax() <= 1e-9 * (1.0 + norm_c(&cc)));
    }

    #[test]
    fn integer_cocycle(
        kind in 0u8..3, seed in 0u64..50, c in prop::collection::vec(-2.0f64..2.0, 3),
        base in -10.0f64..10.0, s in 0usize..3, t in 0usize..3,
    ) {
        let g = GridSpec::new(8).unwrap();
        let d = small_driver(kind, seed);
        let u = segment(g, 2, &c);
        let direct = propagate_c(&d, base, &u, (s + t) as f64).unwrap();
        let mid = propagate_c(&d, base, &u, s as f64).unwrap();
        let comp = propagate_c(&d, base + s as f64, &mid, t as f64).unwrap();
        prop_assert!((direct.coords() - comp.coords()).amax() <= 1e-10 * (1.0 + norm_c(&direct)));
    }
}
