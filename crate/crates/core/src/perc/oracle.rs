//! Exhaustive enumeration of the finite-connection event on a small box.
//!
//! The probability is a polynomial in `p`; the oracle returns its
//! coefficients `c_k` = number of configurations with `k` open bonds in the
//! event, so `P = Σ c_k p^k (1−p)^{m−k}` can be evaluated exactly.

use rayon::prelude::*;
use serde::Serialize;

use super::lattice::LatticeBox;
use crate::error::{Error, Result};
use crate::weight::Rational;

/// Largest bond count accepted for enumeration.
pub const MAX_BONDS: usize = 26;

#[derive(Debug, Clone, Serialize)]
pub struct FiniteConnectionPolynomial {
    pub bx: LatticeBox,
    pub n: i64,
    pub bonds: usize,
    /// `counts[k]`: configurations in the event with `k` open bonds.
    pub counts: Vec<u64>,
}

impl FiniteConnectionPolynomial {
    pub fn prob(&self, p: f64) -> f64 {
        let m = self.bonds as i32;
        self.counts.iter().enumerate().map(|(k, &c)| c as f64 * p.powi(k as i32) * (1.0 - p).powi(m - k as i32)).sum()
    }

    pub fn prob_exact(&self, p: Rational) -> Rational {
        let one = Rational::from_integer(1);
        let mut acc = Rational::from_integer(0);
        for (k, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let mut term = Rational::from_integer(c as i128);
            for _ in 0..k {
                term *= p;
            }
            for _ in k..self.bonds {
                term *= one - p;
            }
            acc += term;
        }
        acc
    }
}

fn find(parent: &mut [u8], mut x: usize) -> usize {
    while parent[x] as usize != x {
        parent[x] = parent[parent[x] as usize];
        x = parent[x] as usize;
    }
    x
}

/// Enumerates all `2^m` configurations of the box.
pub fn finite_connection_polynomial(bx: LatticeBox, n: i64) -> Result<FiniteConnectionPolynomial> {
    bx.check_strip(n)?;
    let m = bx.num_bonds();
    if m > MAX_BONDS {
        return Err(Error::TooLarge { paths: 2f64.powi(m as i32), limit: 2f64.powi(MAX_BONDS as i32) });
    }
    let sites = bx.exterior() + 1;
    if sites > 255 {
        return Err(Error::BoxTooSmall("box has too many faces for the oracle".into()));
    }
    let duals: Vec<(usize, usize)> = (0..m)
        .map(|i| {
            let (t, y, d) = bx.bond_at(i);
            let (f1, f2) = bx.dual_of(t, y, d);
            (bx.face_index(f1.0, f1.1), bx.face_index(f2.0, f2.1))
        })
        .collect();
    let (s0, s1, ext) = (bx.face_index(0, 0), bx.face_index(n, 0), bx.exterior());
    let chunk = 1u64 << 16;
    let total = 1u64 << m;
    let counts = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; m + 1];
            let mut parent = vec![0u8; sites];
            for mask in c * chunk..((c + 1) * chunk).min(total) {
                for (i, v) in parent.iter_mut().enumerate() {
                    *v = i as u8;
                }
                for (i, &(a, b)) in duals.iter().enumerate() {
                    // Closed direct bond ⇔ open dual bond.
                    if mask >> i & 1 == 0 {
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                        if ra != rb {
                            parent[ra] = rb as u8;
                        }
                    }
                }
                let r0 = find(&mut parent, s0);
                if r0 == find(&mut parent, s1) && r0 != find(&mut parent, ext) {
                    counts[mask.count_ones() as usize] += 1;
                }
            }
            counts
        })
        .reduce(|| vec![0u64; m + 1], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    Ok(FiniteConnectionPolynomial { bx, n, bonds: m, counts })
}
