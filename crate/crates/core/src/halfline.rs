//! First-entry laws of a lattice walk on a half-line.
//!
//! The walk lives on `(−∞, top]` and we want, for every start `x ≤ top`, the
//! law of the landing point when it first jumps above `top`. The state space
//! is cut at depth `top − depth`; jumps below the floor land on the floor.
//! The truncated chain stays stochastic, so GTH elimination (pivots formed
//! from outflows, never from `1 − a_ii`) solves it without cancellation.
//! The depth is doubled until the answer stops moving.

use crate::steplaw::StepLaw1D;

#[derive(Debug, Clone)]
pub struct FirstEntry {
    pub top: i64,
    pub depth: usize,
    /// `h[i][b]`: start `x = top − i`, landing at `top + 1 + b`.
    h: Vec<Vec<f64>>,
    /// Largest change against the half-depth solve.
    pub depth_error: f64,
}

impl FirstEntry {
    /// Landing law from `x`; empty beyond the solved depth.
    pub fn from(&self, x: i64) -> &[f64] {
        let i = self.top - x;
        if i < 0 || i as usize > self.depth {
            return &[];
        }
        &self.h[i as usize]
    }

    /// `P_x(first entry above top lands at y)`.
    pub fn prob(&self, x: i64, y: i64) -> f64 {
        let b = y - self.top - 1;
        let law = self.from(x);
        if b < 0 || b as usize >= law.len() {
            return 0.0;
        }
        law[b as usize]
    }

    pub fn bins(&self) -> usize {
        self.h.first().map_or(0, |v| v.len())
    }
}

/// Solves at a fixed depth.
pub fn first_entry_fixed(law: &StepLaw1D, top: i64, depth: usize) -> FirstEntry {
    let steps: Vec<(i64, f64)> = law.support().collect();
    let up = law.max_step().max(1) as usize;
    let band = law.min_step().unsigned_abs().max(up as u64) as usize;
    let n = depth + 1;
    let width = 2 * band + 1;
    // a[i][band + (j − i)] = rate from index i to index j; index grows with depth.
    let mut a = vec![vec![0.0f64; width]; n];
    let mut e = vec![vec![0.0f64; up]; n];
    for i in 0..n {
        for &(s, p) in &steps {
            // Moving by s changes the index by −s.
            let j = i as i64 - s;
            if j < 0 {
                e[i][(-j - 1) as usize] += p;
            } else {
                let j = (j as usize).min(depth);
                a[i][band + j - i] += p;
            }
        }
    }
    let mut pivot = vec![0.0f64; n];
    for i in (0..n).rev() {
        let out: f64 = (0..band).map(|o| a[i][o]).sum::<f64>() + e[i].iter().sum::<f64>();
        pivot[i] = out;
        if out == 0.0 {
            continue;
        }
        let ei = e[i].clone();
        for k in i.saturating_sub(band)..i {
            let c = a[k][band + i - k];
            if c == 0.0 {
                continue;
            }
            a[k][band + i - k] = 0.0;
            let scale = c / out;
            for j in i.saturating_sub(band)..i {
                let v = a[i][band + j - i];
                if v != 0.0 {
                    a[k][band + j - k] += scale * v;
                }
            }
            for b in 0..up {
                e[k][b] += scale * ei[b];
            }
        }
    }
    let mut h = vec![vec![0.0f64; up]; n];
    for i in 0..n {
        if pivot[i] == 0.0 {
            continue;
        }
        let mut acc = e[i].clone();
        for j in i.saturating_sub(band)..i {
            let v = a[i][band + j - i];
            if v != 0.0 {
                for b in 0..up {
                    acc[b] += v * h[j][b];
                }
            }
        }
        for b in 0..up {
            acc[b] /= pivot[i];
        }
        h[i] = acc;
    }
    FirstEntry { top, depth, h, depth_error: f64::NAN }
}

/// Doubles the depth until starts within `watch` of `top`
/// change by less than `tol`.
pub fn first_entry(law: &StepLaw1D, top: i64, watch: usize, tol: f64) -> FirstEntry {
    let mut depth = (4 * watch + 256).next_power_of_two();
    let mut prev = first_entry_fixed(law, top, depth);
    loop {
        depth *= 2;
        let cur = first_entry_fixed(law, top, depth);
        let mut err = 0.0f64;
        for i in 0..=watch {
            for (a, b) in prev.h[i].iter().zip(&cur.h[i]) {
                err = err.max((a - b).abs());
            }
        }
        if err <= tol || depth >= 1 << 20 {
            let mut cur = cur;
            cur.depth_error = err;
            return cur;
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steplaw::{jump2, lazy, srw, tri};

    #[test]
    fn skip_free_walk_always_lands_on_one() {
        for law in [srw(), lazy()] {
            let fe = first_entry(&law, 0, 20, 1e-15);
            for x in -20..=0 {
                assert!((fe.prob(x, 1) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn landing_law_sums_to_one() {
        for law in [jump2(), tri()] {
            let fe = first_entry(&law, 0, 10, 1e-15);
            for x in -10..=0 {
                let s: f64 = fe.from(x).iter().sum();
                assert!((s - 1.0).abs() < 1e-13);
            }
            assert!(fe.depth_error < 1e-14);
        }
    }

    #[test]
    fn matches_time_stepping_on_jump_law() {
        // Long time-stepping from x = 0 approaches the solve from below.
        let law = jump2();
        let fe = first_entry(&law, 0, 4, 1e-15);
        let depth = 400i64;
        let mut mass = vec![0.0f64; depth as usize + 1];
        mass[0] = 1.0;
        let mut landed = [0.0f64; 2];
        let mut dropped = 0.0;
        for _ in 0..20000 {
            let mut next = vec![0.0f64; depth as usize + 1];
            for (i, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for (s, p) in law.support() {
                    let y = -(i as i64) + s;
                    if y > 0 {
                        landed[(y - 1) as usize] += m * p;
                    } else if -y <= depth {
                        next[(-y) as usize] += m * p;
                    } else {
                        dropped += m * p;
                    }
                }
            }
            mass = next;
        }
        let alive: f64 = mass.iter().sum();
        for b in 0..2 {
            assert!(landed[b] <= fe.from(0)[b] + 1e-12);
            assert!(fe.from(0)[b] - landed[b] <= alive + dropped + 1e-12);
        }
    }
}
