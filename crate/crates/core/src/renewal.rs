//! Ladder heights, the renewal function `U` and the failure probability `χ`.
//!
//! Production values come from the half-line first-entry solve, which has
//! no time truncation. Time-truncated DPs are kept as brackets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::halfline::{first_entry, FirstEntry};
use crate::steplaw::{StepLaw1D, StepLaw3D, TiltParams};
use crate::walk1d::{walk_table, WalkKind, WindowSpec};

/// Whether `χ` counts the one-step event `Z_1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiConvention {
    /// The interior condition is vacuous for `n = 1`, so `Z_1 = 0` counts.
    #[default]
    Literal,
    ExcludeOneStep,
}

/// Tolerance for the depth-doubling of first-entry solves.
pub const SOLVE_TOLERANCE: f64 = 1e-15;

#[derive(Debug, Clone, Serialize)]
pub struct LadderHeightLaw {
    /// `f[r]` for `r ≥ 0`; `f[0] = 0` for the strict law.
    pub f: Vec<f64>,
    /// `1 − Σ f`.
    pub deficit: f64,
    /// Truncation error estimate (depth doubling or remaining mass).
    pub truncation_error: f64,
}

impl LadderHeightLaw {
    pub fn total(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// Strict ladder-height law: first entry into `(0, ∞)` from 0.
pub fn ladder_height_law(law: &StepLaw1D) -> LadderHeightLaw {
    let fe = first_entry(law, 0, 0, SOLVE_TOLERANCE);
    let mut f = vec![0.0];
    f.extend_from_slice(fe.from(0));
    let total: f64 = f.iter().sum();
    LadderHeightLaw { f, deficit: 1.0 - total, truncation_error: fe.depth_error }
}

/// Time-truncated version: `f_M(r) = Σ_{m ≤ M} P(first entry at time m lands at r)`.
/// Always a lower bound; the deficit includes mass still alive at `M`.
pub fn ladder_height_law_time(law: &StepLaw1D, horizon: usize) -> LadderHeightLaw {
    let up = law.max_step().max(1) as usize;
    let spec = WindowSpec::default();
    let (lo, _) = crate::walk1d::auto_window(law, WalkKind::Free, horizon, 0, &spec);
    let depth = (-lo).max(1) as usize;
    let steps: Vec<(i64, f64)> = law.support().collect();
    let mut mass = vec![0.0f64; depth + 1];
    mass[0] = 1.0;
    let mut f = vec![0.0f64; up + 1];
    let mut dropped = 0.0;
    for k in 0..horizon {
        let reach = ((k as i64 + 1) * law.min_step().abs()).min(depth as i64) as usize;
        let mut next = vec![0.0f64; depth + 1];
        for (i, &m) in mass.iter().enumerate().take(reach + 1) {
            if m == 0.0 {
                continue;
            }
            for &(s, p) in &steps {
                let y = -(i as i64) + s;
                if y > 0 {
                    f[y as usize] += m * p;
                } else if (-y) as usize <= depth {
                    next[(-y) as usize] += m * p;
                } else {
                    dropped += m * p;
                }
            }
        }
        mass = next;
    }
    let alive: f64 = mass.iter().sum::<f64>() + dropped;
    let total: f64 = f.iter().sum();
    LadderHeightLaw { f, deficit: 1.0 - total, truncation_error: alive }
}

/// Weak ladder-height law `f≥(r)`, `r ≥ 0`: first entry into `[0, ∞)` at a time `n ≥ 1`.
/// `f≥(0)` is `χ` under the literal convention.
pub fn weak_ladder_height_law(law: &StepLaw1D) -> LadderHeightLaw {
    let fe = below_zero_entry(law, law.min_step().unsigned_abs() as usize);
    weak_from_entry(law, &fe)
}

fn below_zero_entry(law: &StepLaw1D, watch: usize) -> FirstEntry {
    first_entry(law, -1, watch.max(1), SOLVE_TOLERANCE)
}

fn weak_from_entry(law: &StepLaw1D, fe: &FirstEntry) -> LadderHeightLaw {
    let up = law.max_step().max(0) as usize;
    let mut f = vec![0.0f64; up + 1];
    for (s, p) in law.support() {
        if s >= 0 {
            f[s as usize] += p;
        } else {
            for (y, &g) in fe.from(s).iter().enumerate() {
                if y < f.len() {
                    f[y] += p * g;
                }
            }
        }
    }
    let total: f64 = f.iter().sum();
    LadderHeightLaw { f, deficit: 1.0 - total, truncation_error: fe.depth_error }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Chi {
    pub value: f64,
    pub convention: ChiConvention,
    pub solve_error: f64,
}

pub fn chi(law: &StepLaw1D, convention: ChiConvention) -> Chi {
    let weak = weak_ladder_height_law(law);
    let mut value = weak.f[0];
    if convention == ChiConvention::ExcludeOneStep {
        value = weak.f[0] - law.prob(0);
    }
    Chi { value, convention, solve_error: weak.truncation_error }
}

/// Time-truncated bracket for `χ`.
///
/// `lo` sums first returns to 0 from below up to `horizon`; `hi` adds the mass
/// still strictly negative at `horizon` plus mass dropped below `−depth`.
pub fn chi_bracket(law: &StepLaw1D, horizon: usize, depth: usize, convention: ChiConvention) -> (f64, f64) {
    let steps: Vec<(i64, f64)> = law.support().collect();
    let down = law.min_step().abs();
    // mass[d] = P(Z_k = −d, still negative), d = 1..=depth.
    let mut mass = vec![0.0f64; depth + 1];
    let mut next = vec![0.0f64; depth + 1];
    let mut lo = 0.0;
    let mut dropped = 0.0;
    for &(s, p) in &steps {
        if s == 0 && convention == ChiConvention::Literal {
            lo += p;
        } else if s < 0 {
            mass[(-s) as usize] += p;
        }
    }
    for k in 1..horizon {
        let reach = ((k as i64) * down).min(depth as i64) as usize;
        next[..=(reach + down as usize).min(depth)].iter_mut().for_each(|v| *v = 0.0);
        for d in 1..=reach {
            let m = mass[d];
            if m == 0.0 {
                continue;
            }
            for &(s, p) in &steps {
                let y = -(d as i64) + s;
                if y == 0 {
                    lo += m * p;
                } else if y < 0 {
                    if (-y) as usize <= depth {
                        next[(-y) as usize] += m * p;
                    } else {
                        dropped += m * p;
                    }
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    let alive: f64 = mass.iter().sum();
    (lo, lo + alive + dropped)
}

/// Renewal density `u(z)` and function `U(z) = Σ_{j<z} u(j)` from a ladder law.
pub fn renewal_u(f: &[f64], z_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0f64; z_max + 1];
    u[0] = 1.0;
    for z in 1..=z_max {
        let mut acc = 0.0;
        for r in 1..=z.min(f.len().saturating_sub(1)) {
            acc += f[r] * u[z - r];
        }
        u[z] = acc;
    }
    let mut big = vec![0.0f64; z_max + 1];
    for z in 1..=z_max {
        big[z] = big[z - 1] + u[z - 1];
    }
    (u, big)
}

/// Second route to `U`: `U(z) = Σ_{r<z} Σ_m u_m(r)`. By time reversal
/// `Σ_m u_m(r) = P_{−r}(first entry into [0, ∞) lands at 0)` for `r ≥ 1`.
pub fn renewal_u_direct(law: &StepLaw1D, z_max: usize) -> Vec<f64> {
    let fe = below_zero_entry(law, z_max);
    let mut big = vec![0.0f64; z_max + 1];
    if z_max >= 1 {
        big[1] = 1.0;
    }
    for z in 2..=z_max {
        big[z] = big[z - 1] + fe.prob(-(z as i64 - 1), 0);
    }
    big
}

/// Time-truncated direct sum `Σ_{r<z} Σ_{m≤M} u_m(r)`, a lower bound on `U(z)`.
pub fn renewal_u_time(law: &StepLaw1D, z_max: usize, horizon: usize) -> Result<Vec<f64>> {
    let u = walk_table::<f64>(law, WalkKind::StrictPositive, horizon, 0, &WindowSpec::default())?;
    let mut per_r = vec![0.0f64; z_max + 1];
    per_r[0] = 1.0;
    for m in 1..=horizon {
        for (r, slot) in per_r.iter_mut().enumerate().skip(1) {
            *slot += u.get(m, r as i64);
        }
    }
    let mut big = vec![0.0f64; z_max + 1];
    for z in 1..=z_max {
        big[z] = big[z - 1] + per_r[z - 1];
    }
    Ok(big)
}

pub fn mu_plus(f: &[f64]) -> f64 {
    f.iter().enumerate().map(|(r, p)| r as f64 * p).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub r0: usize,
    pub sup_deviation: f64,
}

/// `sup_{r0 ≤ r ≤ z_max} |u(r) − 1/μ⁺|` for each `r0`.
pub fn check_renewal_limit(f: &[f64], z_max: usize, r0s: &[usize]) -> Vec<LimitRow> {
    let (u, _) = renewal_u(f, z_max);
    let target = 1.0 / mu_plus(f);
    r0s.iter()
        .filter(|&&r0| r0 <= z_max)
        .map(|&r0| LimitRow {
            r0,
            sup_deviation: u[r0..].iter().map(|v| (v - target).abs()).fold(0.0, f64::max),
        })
        .collect()
}

/// Expected weak ladder count `E N̄(z) = Σ_{r ≤ z} V(r)` for the weak ladder
/// renewal measure `V`, computed from `f≥` alone.
pub fn expected_weak_ladder_count(law: &StepLaw1D, z_max: usize) -> Vec<f64> {
    let weak = weak_ladder_height_law(law);
    let f = &weak.f;
    let stay = 1.0 / (1.0 - f[0]);
    let mut v = vec![0.0f64; z_max + 1];
    v[0] = stay;
    for r in 1..=z_max {
        let mut acc = 0.0;
        for j in 1..=r.min(f.len() - 1) {
            acc += f[j] * v[r - j];
        }
        v[r] = acc * stay;
    }
    let mut out = vec![0.0f64; z_max + 1];
    let mut run = 0.0;
    for r in 0..=z_max {
        run += v[r];
        out[r] = run;
    }
    out
}

/// Time-truncated `Σ_{m ≤ M} Σ_{r ≤ z} ū_m(r)`, a lower bound on `E N̄(z)`.
pub fn expected_weak_ladder_count_time(law: &StepLaw1D, z_max: usize, horizon: usize) -> Result<Vec<f64>> {
    let t = walk_table::<f64>(law, WalkKind::WeakNonnegative, horizon, 0, &WindowSpec::default())?;
    let mut per_r = vec![0.0f64; z_max + 1];
    for m in 0..=horizon {
        for (r, slot) in per_r.iter_mut().enumerate() {
            *slot += t.get(m, r as i64);
        }
    }
    let mut out = vec![0.0f64; z_max + 1];
    let mut run = 0.0;
    for r in 0..=z_max {
        run += per_r[r];
        out[r] = run;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalConfig {
    pub z_max: usize,
    pub convention: ChiConvention,
    /// When set, also run the time-truncated `χ` bracket at this horizon.
    pub chi_horizon: Option<usize>,
    pub chi_depth: usize,
}

impl Default for RenewalConfig {
    fn default() -> Self {
        Self { z_max: 64, convention: ChiConvention::Literal, chi_horizon: None, chi_depth: 4000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalTable {
    pub law: String,
    pub f: Vec<f64>,
    pub f_deficit: f64,
    pub f_truncation_error: f64,
    pub u: Vec<f64>,
    /// `big_u[z] = U(z)`; `big_u[0] = 0`.
    #[serde(rename = "U")]
    pub big_u: Vec<f64>,
    pub chi: f64,
    pub chi_convention: ChiConvention,
    pub chi_solve_error: f64,
    pub chi_bracket: Option<(f64, f64)>,
    pub mu_plus: f64,
}

impl RenewalTable {
    pub fn build(law: &StepLaw1D, cfg: &RenewalConfig) -> RenewalTable {
        let lh = ladder_height_law(law);
        let (u, big_u) = renewal_u(&lh.f, cfg.z_max);
        let c = chi(law, cfg.convention);
        let chi_bracket = cfg.chi_horizon.map(|m| chi_bracket(law, m, cfg.chi_depth, cfg.convention));
        RenewalTable {
            law: law.name.clone(),
            mu_plus: mu_plus(&lh.f),
            f: lh.f,
            f_deficit: lh.deficit,
            f_truncation_error: lh.truncation_error,
            u,
            big_u,
            chi: c.value,
            chi_convention: cfg.convention,
            chi_solve_error: c.solve_error,
            chi_bracket,
        }
    }

    /// `U(z)`, extended by the renewal recursion's linear tail beyond `z_max`.
    pub fn big_u(&self, z: i64) -> f64 {
        if z <= 0 {
            return 0.0;
        }
        let z = z as usize;
        if z < self.big_u.len() {
            return self.big_u[z];
        }
        let last = self.big_u.len() - 1;
        self.big_u[last] + (z - last) as f64 / self.mu_plus
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["z", "u", "U"])?;
        for z in 0..self.u.len() {
            w.write_record(&[z.to_string(), format!("{:e}", self.u[z]), format!("{:e}", self.big_u[z])])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltRow {
    pub lambda: TiltParams,
    pub norm: f64,
    pub chi: f64,
    pub chi_deviation: f64,
    /// `max_{z ≤ z_max} |U_λ(z)/U(z) − 1|`.
    pub u_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltContinuity {
    pub law: String,
    pub rows: Vec<TiltRow>,
    /// Deviations nonincreasing as `|λ|` decreases along the grid.
    pub monotone: bool,
    /// Largest ratio between deviations at adjacent grid points.
    pub max_jump: f64,
}

/// Tabulates `χ_λ` and `U_λ` for the difference law of each tilt in `grid`.
pub fn tilt_continuity(law: &StepLaw3D, grid: &[TiltParams], z_max: usize, convention: ChiConvention) -> TiltContinuity {
    let cfg = RenewalConfig { z_max, convention, ..Default::default() };
    let base = RenewalTable::build(&law.difference_law(), &cfg);
    let mut rows: Vec<TiltRow> = grid
        .iter()
        .map(|&lam| {
            let t = RenewalTable::build(&law.tilt(lam).difference_law(), &cfg);
            let u_deviation = (1..=z_max).map(|z| (t.big_u[z] / base.big_u[z] - 1.0).abs()).fold(0.0, f64::max);
            TiltRow { lambda: lam, norm: lam.norm(), chi: t.chi, chi_deviation: (t.chi - base.chi).abs(), u_deviation }
        })
        .collect();
    rows.sort_by(|a, b| b.norm.partial_cmp(&a.norm).unwrap());
    let mut monotone = true;
    let mut max_jump = 1.0f64;
    for w in rows.windows(2) {
        for (a, b) in [(w[0].chi_deviation, w[1].chi_deviation), (w[0].u_deviation, w[1].u_deviation)] {
            if b > a {
                monotone = false;
            }
            if a > 0.0 && b > 0.0 {
                max_jump = max_jump.max(a / b).max(b / a);
            }
        }
    }
    TiltContinuity { law: law.name.clone(), rows, monotone, max_jump }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{enumerate, functional};
    use crate::steplaw::{jump2, lazy, srw, tri, uniform3};
    use crate::weight::Rational;

    #[test]
    fn skip_free_ladder_laws() {
        for law in [srw(), lazy()] {
            let lh = ladder_height_law(&law);
            assert!((lh.f[1] - 1.0).abs() < 1e-15);
            assert!(lh.deficit.abs() < 1e-10);
            assert_eq!(mu_plus(&lh.f), lh.f[1]);
        }
        let lh = ladder_height_law(&jump2());
        assert!(lh.f[2] > 0.0);
        assert!(lh.deficit.abs() < 1e-10);
        assert!(mu_plus(&lh.f) > 1.0);
    }

    #[test]
    fn time_truncated_ladder_law_is_a_lower_bracket() {
        let law = jump2();
        let exact = ladder_height_law(&law);
        let time = ladder_height_law_time(&law, 2000);
        for r in 1..exact.f.len() {
            assert!(time.f[r] <= exact.f[r] + 1e-15);
            assert!(exact.f[r] - time.f[r] <= time.truncation_error + 1e-12);
        }
    }

    #[test]
    fn renewal_function_of_srw_is_linear() {
        let t = RenewalTable::build(&srw(), &RenewalConfig { z_max: 50, ..Default::default() });
        assert_eq!(t.big_u[1], 1.0);
        for z in 1..=50 {
            assert!((t.big_u[z] - z as f64).abs() < 1e-9);
        }
        let t = RenewalTable::build(&lazy(), &RenewalConfig { z_max: 50, ..Default::default() });
        for z in 1..=50 {
            assert!((t.big_u[z] - z as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn two_routes_to_u_agree() {
        for law in [srw(), lazy(), jump2(), tri()] {
            let lh = ladder_height_law(&law);
            let (u, big) = renewal_u(&lh.f, 50);
            let direct = renewal_u_direct(&law, 50);
            for z in 1..=50 {
                assert!((big[z] - direct[z]).abs() < 1e-9, "{} z={z}", law.name);
                assert!(u[z] > 0.0 && u[z] <= 1.0 + 1e-15);
            }
            let time = renewal_u_time(&law, 10, 400).unwrap();
            for z in 1..=10 {
                assert!(time[z] <= big[z] + 1e-12);
            }
        }
    }

    #[test]
    fn chi_values() {
        assert!((chi(&srw(), ChiConvention::Literal).value - 0.5).abs() < 1e-14);
        assert!((chi(&lazy(), ChiConvention::Literal).value - 0.75).abs() < 1e-14);
        assert!((chi(&lazy(), ChiConvention::ExcludeOneStep).value - 0.25).abs() < 1e-14);
    }

    #[test]
    fn chi_bracket_is_monotone_and_contains_value() {
        let law = tri();
        let c = chi(&law, ChiConvention::Literal).value;
        let mut prev = (0.0, 1.0);
        for m in [10, 100, 1000, 5000] {
            let (lo, hi) = chi_bracket(&law, m, 600, ChiConvention::Literal);
            assert!(lo >= prev.0 - 1e-15 && hi <= prev.1 + 1e-15);
            assert!(lo <= c + 1e-14 && c <= hi + 1e-14);
            prev = (lo, hi);
        }
    }

    #[test]
    fn chi_bracket_contains_enumerated_partial_sums() {
        for law in [srw(), lazy()] {
            let exact: Rational = enumerate(&law, 12, |p| {
                if functional::first_return_from_below(p).is_some() {
                    Rational::from_integer(1)
                } else {
                    Rational::from_integer(0)
                }
            })
            .unwrap();
            let partial = crate::weight::rational_to_f64(exact);
            let (lo12, _) = chi_bracket(&law, 12, 100, ChiConvention::Literal);
            assert!((lo12 - partial).abs() < 1e-15);
            let (lo, hi) = chi_bracket(&law, 2000, 400, ChiConvention::Literal);
            assert!(lo >= partial - 1e-15 && partial <= hi);
        }
    }

    #[test]
    fn weak_count_matches_geometric_thinning() {
        for law in [srw(), lazy(), jump2(), tri()] {
            let cfg = RenewalConfig { z_max: 12, ..Default::default() };
            let t = RenewalTable::build(&law, &cfg);
            let weak = expected_weak_ladder_count(&law, 10);
            for z in 0..=10 {
                let rhs = t.big_u[z + 1] / (1.0 - t.chi);
                assert!((weak[z] - rhs).abs() < 1e-10, "{} z={z}: {} vs {rhs}", law.name, weak[z]);
            }
            let time = expected_weak_ladder_count_time(&law, 10, 300).unwrap();
            for z in 0..=10 {
                assert!(time[z] <= weak[z] + 1e-12);
            }
        }
    }

    #[test]
    fn renewal_limit() {
        let rows = check_renewal_limit(&ladder_height_law(&srw()).f, 100, &[0, 10]);
        assert!(rows.iter().all(|r| r.sup_deviation < 1e-15));
        let f = ladder_height_law(&jump2()).f;
        let rows = check_renewal_limit(&f, 200, &[0, 50]);
        assert!(rows[1].sup_deviation < 1e-6);
        let (u, _) = renewal_u(&f, 200);
        assert!(u.iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn tilt_continuity_on_uniform3() {
        let dir = |s: f64| TiltParams::new(s / 2f64.sqrt(), s / 2f64.sqrt());
        let grid: Vec<TiltParams> = [0.2, 0.1, 0.05, 0.02, 0.01].iter().map(|&s| dir(s)).collect();
        let rep = tilt_continuity(&uniform3(), &grid, 30, ChiConvention::Literal);
        let at = |n: f64| rep.rows.iter().find(|r| (r.norm - n).abs() < 1e-9).unwrap().clone();
        let (a, b) = (at(0.1), at(0.01));
        assert!(a.chi_deviation >= 5.0 * b.chi_deviation);
        assert!(a.u_deviation >= 5.0 * b.u_deviation);
        assert!(rep.monotone);
        assert!(rep.max_jump <= 10.0);
        let zero = tilt_continuity(&uniform3(), &[TiltParams::ZERO], 30, ChiConvention::Literal);
        assert_eq!(zero.rows[0].chi_deviation, 0.0);
        assert_eq!(zero.rows[0].u_deviation, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn law() -> impl Strategy<Value = StepLaw1D> {
            (0u32..5, 1u32..5, 0u32..4, 0u32..3).prop_map(|(a0, a1, a2, a3)| {
                let total = (a0 + 2 * (a1 + a2 + a3)) as f64;
                let mut pts = vec![(0i64, a0 as f64 / total)];
                for (s, a) in [(1i64, a1), (2, a2), (3, a3)] {
                    pts.push((s, a as f64 / total));
                    pts.push((-s, a as f64 / total));
                }
                StepLaw1D::new("random", pts).unwrap().with_symmetry(true)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn renewal_invariants(law in law()) {
                let t = RenewalTable::build(&law, &RenewalConfig { z_max: 40, ..Default::default() });
                prop_assert_eq!(t.big_u[1], 1.0);
                prop_assert!(t.f_deficit.abs() < 1e-10);
                let s = law.max_step() as f64;
                for z in 1..=40 {
                    prop_assert!(t.u[z] > 0.0 && t.u[z] <= 1.0 + 1e-15);
                    prop_assert!(t.big_u[z] > t.big_u[z - 1]);
                    prop_assert!(t.big_u[z] <= z as f64 * s);
                }
                prop_assert!(t.chi >= 0.0 && t.chi < 1.0);
            }

            #[test]
            fn two_routes_agree(law in law()) {
                let lh = ladder_height_law(&law);
                let (_, big) = renewal_u(&lh.f, 30);
                let direct = renewal_u_direct(&law, 30);
                for z in 1..=30 {
                    prop_assert!((big[z] - direct[z]).abs() < 1e-9);
                }
            }
        }
    }
}
