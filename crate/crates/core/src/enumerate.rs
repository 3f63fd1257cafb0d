//! Brute-force path enumeration, the ground truth for short horizons.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::steplaw::StepLaw1D;
use crate::weight::Weight;

/// Largest number of paths [`enumerate`] will visit.
pub const PATH_LIMIT: f64 = 1e8;

/// `E f(Z_0, …, Z_n)` for the walk started at 0.
pub fn enumerate<W: Weight>(law: &StepLaw1D, n: usize, f: impl Fn(&[i64]) -> W) -> Result<W> {
    enumerate_from(law, n, 0, f)
}

pub fn enumerate_from<W: Weight>(law: &StepLaw1D, n: usize, start: i64, f: impl Fn(&[i64]) -> W) -> Result<W> {
    let mut total = W::zero();
    visit_paths(law, n, start, |path, prob: W| {
        let v = f(path);
        if !v.is_zero() {
            total += prob * v;
        }
    })?;
    Ok(total)
}

/// `E(f(Z_0, …, Z_n); Z_n = z)` for every reachable endpoint `z`, in one pass.
pub fn enumerate_by_endpoint<W: Weight>(
    law: &StepLaw1D,
    n: usize,
    start: i64,
    f: impl Fn(&[i64]) -> W,
) -> Result<BTreeMap<i64, W>> {
    let mut out = BTreeMap::new();
    visit_paths(law, n, start, |path, prob: W| {
        let v = f(path);
        if !v.is_zero() {
            *out.entry(*path.last().unwrap()).or_insert_with(W::zero) += prob * v;
        }
    })?;
    Ok(out)
}

/// Calls `visit(path, probability)` on every `n`-step path.
fn visit_paths<W: Weight>(law: &StepLaw1D, n: usize, start: i64, mut visit: impl FnMut(&[i64], W)) -> Result<()> {
    let steps = law.weights::<W>()?;
    let paths = (steps.len() as f64).powi(n as i32);
    if paths > PATH_LIMIT {
        return Err(Error::TooLarge { paths, limit: PATH_LIMIT });
    }
    let mut path = vec![start; n + 1];
    let mut probs = vec![W::one(); n + 1];
    let mut choice = vec![0usize; n + 1];
    if n == 0 {
        visit(&path, W::one());
        return Ok(());
    }
    // Iterative depth-first walk over step choices.
    let mut depth = 1;
    choice[1] = 0;
    loop {
        if choice[depth] == steps.len() {
            depth -= 1;
            if depth == 0 {
                break;
            }
            choice[depth] += 1;
            continue;
        }
        let (s, p) = steps[choice[depth]];
        path[depth] = path[depth - 1] + s;
        probs[depth] = probs[depth - 1] * p;
        if depth == n {
            visit(&path, probs[depth]);
            choice[depth] += 1;
        } else {
            depth += 1;
            choice[depth] = 0;
        }
    }
    Ok(())
}

/// Path functionals over positions `Z_0, …, Z_n`.
pub mod functional {
    use crate::weight::Weight;

    fn indicator<W: Weight>(b: bool) -> W {
        if b {
            W::one()
        } else {
            W::zero()
        }
    }

    pub fn endpoint<W: Weight>(path: &[i64], z: i64) -> W {
        indicator(*path.last().unwrap() == z)
    }

    pub fn strict_positive_endpoint<W: Weight>(path: &[i64], z: i64) -> W {
        indicator(*path.last().unwrap() == z && path[1..].iter().all(|&x| x > 0))
    }

    pub fn weak_nonnegative_endpoint<W: Weight>(path: &[i64], z: i64) -> W {
        indicator(*path.last().unwrap() == z && path.iter().all(|&x| x >= 0))
    }

    /// `#{m : Z_m < z, Z_m > Z_j for all j < m}`; `m = 0` always qualifies when `z > 0`.
    pub fn strict_ladder_count(path: &[i64], z: i64) -> i128 {
        let mut max = i64::MIN;
        let mut count = 0;
        for &x in path {
            if x > max {
                if x < z {
                    count += 1;
                }
                max = x;
            }
        }
        count
    }

    /// `#{m : Z_m ≤ z, Z_m ≥ Z_j for all j < m}`.
    pub fn weak_ladder_count(path: &[i64], z: i64) -> i128 {
        let mut max = i64::MIN;
        let mut count = 0;
        for &x in path {
            if x >= max {
                if x <= z {
                    count += 1;
                }
                max = x;
            }
        }
        count
    }

    /// First return to 0 from below at time `m ≤ n`: `Z_m = 0`, `Z_j < 0` for `0 < j < m`.
    pub fn first_return_from_below(path: &[i64]) -> Option<usize> {
        for m in 1..path.len() {
            if path[m] == 0 {
                return Some(m);
            }
            if path[m] > 0 {
                return None;
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::functional::*;
    use super::*;
    use crate::steplaw::{lazy, srw};
    use crate::weight::Rational;

    #[test]
    fn endpoint_indicator() {
        let v: Rational = enumerate(&srw(), 2, |p| endpoint(p, 0)).unwrap();
        assert_eq!(v, Rational::new(1, 2));
    }

    #[test]
    fn stay_positive() {
        let v: Rational = enumerate(&srw(), 4, |p| strict_positive_endpoint(p, 2)).unwrap();
        assert_eq!(v, Rational::new(1, 8));
    }

    #[test]
    fn total_mass_is_one() {
        let v: Rational = enumerate(&lazy(), 7, |_| Rational::from_integer(1)).unwrap();
        assert_eq!(v, Rational::from_integer(1));
    }

    #[test]
    fn ladder_count_on_lazy() {
        let v: Rational = enumerate(&lazy(), 5, |p| Rational::from_integer(strict_ladder_count(p, 3))).unwrap();
        // Every path has the m = 0 epoch; the answer lies strictly between 1 and 3.
        assert!(v > Rational::from_integer(1) && v < Rational::from_integer(3));
        assert_eq!(strict_ladder_count(&[0, 1, 1, 2, 3], 3), 3);
        assert_eq!(weak_ladder_count(&[0, 1, 1, 0, 2], 1), 3);
    }

    #[test]
    fn by_endpoint_matches_single_queries() {
        let law = lazy();
        let all: BTreeMap<i64, Rational> = enumerate_by_endpoint(&law, 6, 0, |p| strict_positive_endpoint(p, *p.last().unwrap())).unwrap();
        for z in -6..=6 {
            let one: Rational = enumerate(&law, 6, |p| strict_positive_endpoint(p, z)).unwrap();
            assert_eq!(all.get(&z).copied().unwrap_or_default(), one);
        }
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(matches!(
            enumerate::<f64>(&lazy(), 20, |_| 1.0),
            Err(Error::TooLarge { .. })
        ));
    }
}
