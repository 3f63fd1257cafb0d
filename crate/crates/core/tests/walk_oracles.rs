//! Walk tables against brute-force path enumeration, in exact arithmetic.

use finconn_core::enumerate::{enumerate_by_endpoint, functional};
use finconn_core::steplaw::{jump2, lazy, srw, uniform3, StepLaw1D};
use finconn_core::walk1d::{ladder_count_expectations, ladder_masses, q_table, u0_table, u_table};
use finconn_core::walk3d::p_table;
use finconn_core::weight::Rational;

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

#[test]
fn srw_table_values() {
    let q = q_table::<Rational>(&srw(), 4).unwrap();
    assert_eq!(q.get(0, 0), r(1, 1));
    assert_eq!(q.get(2, 0), r(1, 2));
    assert_eq!(q.get(4, 2), r(1, 4));

    assert_eq!(u_table::<Rational>(&srw(), 1, 0).unwrap().get(1, 1), r(1, 2));
    assert_eq!(u_table::<Rational>(&srw(), 4, 0).unwrap().get(4, 2), r(1, 8));
    assert_eq!(u_table::<Rational>(&srw(), 3, 1).unwrap().get(3, 2), r(1, 4));

    assert_eq!(u0_table::<Rational>(&srw(), 2).unwrap().get(2, 0), r(1, 4));
    assert_eq!(u0_table::<Rational>(&lazy(), 1).unwrap().get(1, 0), r(1, 2));
    assert_eq!(u0_table::<Rational>(&srw(), 1).unwrap().get(1, -1), r(0, 1));
}

#[test]
fn ladder_masses_of_srw() {
    let ell = ladder_masses::<Rational>(&srw(), 3, 1).unwrap();
    assert_eq!(ell[1][1], r(1, 2));
    assert_eq!(ell[3][1], r(1, 8));
}

#[test]
fn ladder_count_expectation_matches_enumeration() {
    let e = ladder_count_expectations::<Rational>(&srw(), 2, 2).unwrap();
    assert_eq!(e[2], r(1, 2));
    for law in [srw(), lazy(), jump2()] {
        let n = 6;
        let e = ladder_count_expectations::<Rational>(&law, n, 12).unwrap();
        let oracle = enumerate_by_endpoint::<Rational>(&law, n, 0, |p| {
            Rational::from_integer(functional::strict_ladder_count(p, *p.last().unwrap()))
        })
        .unwrap();
        for z in 1..=12 {
            assert_eq!(e[z as usize], oracle.get(&z).copied().unwrap_or_default(), "{} z = {z}", law.name);
        }
    }
    let beyond = ladder_count_expectations::<Rational>(&srw(), 3, 5).unwrap();
    assert_eq!(beyond[4], r(0, 1));
    assert_eq!(beyond[5], r(0, 1));
}

fn every_strict_positive_entry_matches(law: &StepLaw1D, n: usize, start: i64) {
    let t = u_table::<Rational>(law, n, start).unwrap();
    let oracle = enumerate_by_endpoint::<Rational>(law, n, start, |p| {
        if p[1..].iter().all(|&x| x > 0) {
            Rational::from_integer(1)
        } else {
            Rational::from_integer(0)
        }
    })
    .unwrap();
    for z in t.z_min..=t.z_max {
        assert_eq!(t.get(n, z), oracle.get(&z).copied().unwrap_or_default(), "{} n = {n} z = {z}", law.name);
    }
}

#[test]
fn strict_positive_tables_match_enumeration() {
    for law in [srw(), lazy(), jump2()] {
        for n in [1, 3, 6] {
            for start in [0, 1, 2] {
                every_strict_positive_entry_matches(&law, n, start);
            }
        }
    }
}

#[test]
fn one_coupled_step_is_a_law_lookup() {
    let p = p_table::<Rational>(&uniform3(), 1, (0, 1)).unwrap();
    assert_eq!(p.get(1, 0, 1), r(1, 9));
    assert_eq!(p.get(1, 1, 2), r(1, 9));
    assert_eq!(p.get(1, 2, 1), r(0, 1));
}
