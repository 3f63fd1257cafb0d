//! Property checks across module boundaries.

use finconn_core::perc::{finite_connection, BondRng, Explorer, LatticeBox, LatticeConfig};
use finconn_core::renewal::{ladder_height_law, renewal_u, renewal_u_direct};
use finconn_core::steplaw::{mixed3, srw, uniform3, StepLaw1D, TiltParams};
use finconn_core::walk1d::{q_table, u_table};
use finconn_core::walk3d::{p_table, r_table};
use finconn_core::weight::Rational;
use proptest::prelude::*;

/// Symmetric law on `{−k..k}` with integer weights `w[|v|]`.
fn symmetric_law(w: &[u8]) -> StepLaw1D {
    let total: i128 = w[0] as i128 + 2 * w[1..].iter().map(|&x| x as i128).sum::<i128>();
    let support = (0..w.len()).flat_map(|i| {
        let p = Rational::new(w[i] as i128, total);
        let i = i as i64;
        if i == 0 {
            vec![(0, p)]
        } else {
            vec![(-i, p), (i, p)]
        }
    });
    StepLaw1D::exact("sym", support).unwrap().with_symmetry(true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ballot_equality_holds_for_srw(n in 1usize..60, z in 1i64..60) {
        prop_assume!(z <= n as i64);
        let q = q_table::<Rational>(&srw(), n).unwrap();
        let u = u_table::<Rational>(&srw(), n, 0).unwrap();
        prop_assert_eq!(u.get(n, z), Rational::new(z as i128, n as i128) * q.get(n, z));
    }

    #[test]
    fn killed_walk_never_exceeds_free_walk(w in prop::collection::vec(1u8..5, 2..4), n in 1usize..25) {
        let law = symmetric_law(&w);
        let q = q_table::<f64>(&law, n).unwrap();
        let u = u_table::<f64>(&law, n, 0).unwrap();
        for z in 1..=(n as i64 * law.max_step()) {
            prop_assert!(u.get(n, z) <= q.get(n, z) + 1e-15);
        }
        prop_assert!(u.row_sum(n) <= 1.0 + 1e-12);
    }

    #[test]
    fn renewal_routes_agree(w in prop::collection::vec(1u8..6, 2..4)) {
        let law = symmetric_law(&w);
        let (_, a) = renewal_u(&ladder_height_law(&law).f, 30);
        let b = renewal_u_direct(&law, 30);
        for z in 1..=30 {
            prop_assert!((a[z] - b[z]).abs() <= 1e-9 * a[z].max(1.0));
            prop_assert!(a[z] >= a[z - 1]);
        }
    }

    #[test]
    fn tilt_round_trip(lt in -0.8f64..0.8, lx in -0.8f64..0.8) {
        for law in [uniform3(), mixed3()] {
            let lam = TiltParams::new(lt, lx);
            let back = law.tilt(lam).tilt(lam.negate());
            for (a, b) in law.probs().iter().zip(back.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn tilt_preserves_conditional_ratio(lt in -0.5f64..0.5, lx in -0.5f64..0.5) {
        let law = mixed3();
        let tl = law.tilt(TiltParams::new(lt, lx));
        let (r, p) = (r_table::<f64>(&law, 5, (0, 1)).unwrap(), p_table::<f64>(&law, 5, (0, 1)).unwrap());
        let (rl, pl) = (r_table::<f64>(&tl, 5, (0, 1)).unwrap(), p_table::<f64>(&tl, 5, (0, 1)).unwrap());
        for (t, u, y, v) in r.entries() {
            let a = v / p.get(t, u, y);
            let b = rl.get(t, u, y) / pl.get(t, u, y);
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn explorer_agrees_with_union_find(seed in any::<u64>(), p in 0.2f64..0.7) {
        let bx = LatticeBox::for_connection(3, 4).unwrap();
        let mut ex = Explorer::new(bx);
        for s in 0..64 {
            let lazy = ex.dual_from_origin(&BondRng::new(seed, s, p), 3).finite_connection();
            let eager = finite_connection(&LatticeConfig::sample(p, bx, seed, s), 3).unwrap();
            prop_assert_eq!(lazy, eager);
        }
    }
}
