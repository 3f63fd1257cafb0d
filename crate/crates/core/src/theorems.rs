//! Ratio-convergence checks for the local limit statements.
//!
//! Every check tabulates a normalized ratio along a grid of horizons and
//! judges it on the final dyadic block `[n/2, n]`. Reports are plain data
//! and serialize to JSON; nothing here is random.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::renewal::{RenewalConfig, RenewalTable};
use crate::steplaw::{BoundaryLaw, Step3, StepLaw1D, StepLaw3D};
use crate::walk1d::{q_table, u_table};
use crate::walk3d::{fixed_horizon_sum, u_tilde, CoupledSpec, Kind3, WindowSpec3};

/// Default exponent for the admissible gap range `n^ε`.
pub const DEFAULT_EPSILON: f64 = 0.2;
/// Default growth window `δ(n)`.
pub const DEFAULT_DELTA: &str = "n/ln(n)";

pub fn default_delta(n: usize) -> f64 {
    let n = n as f64;
    n / n.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_dev(max_dev: f64, tol: f64) -> Self {
        if max_dev < tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One grid point followed along the horizons.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub point: Vec<i64>,
    pub label: String,
    pub n: Vec<usize>,
    pub ratio: Vec<f64>,
    pub deviation: f64,
}

impl Series {
    fn last(&self) -> f64 {
        *self.ratio.last().unwrap()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub law: String,
    pub n_min: usize,
    pub n_max: usize,
    pub stride: usize,
    /// Meaning of the components of each series' `point`.
    pub point_fields: Vec<String>,
    pub epsilon: f64,
    pub delta: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub statement: String,
    pub grid: Grid,
    pub ratios: Vec<Series>,
    pub limit_estimate: f64,
    pub max_dev: f64,
    pub tol: f64,
    pub verdict: Verdict,
    /// Diagnostics that do not enter the verdict.
    pub notes: BTreeMap<String, f64>,
}

impl ConvergenceReport {
    fn assemble(statement: &str, grid: Grid, ratios: Vec<Series>, tol: f64, notes: BTreeMap<String, f64>) -> Self {
        let max_dev = ratios.iter().map(|s| s.deviation).fold(0.0, f64::max);
        let limit_estimate = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().map(Series::last).sum::<f64>() / ratios.len() as f64
        };
        let max_dev = if ratios.is_empty() { f64::INFINITY } else { max_dev };
        Self {
            statement: statement.into(),
            grid,
            ratios,
            limit_estimate,
            max_dev,
            tol,
            verdict: Verdict::from_dev(max_dev, tol),
            notes,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `max/min − 1` over a block of positive values.
pub fn flatness(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return f64::INFINITY;
    }
    max / min - 1.0
}

/// Horizons in `[n_max/2, n_max]` accepted by `feasible`, thinned to every
/// `stride`-th one counted from the top (so the largest feasible one is kept).
fn horizon_grid(n_max: usize, stride: usize, feasible: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut out: Vec<usize> = (n_max / 2..=n_max).rev().filter(|&n| feasible(n)).step_by(stride.max(1)).collect();
    out.reverse();
    out
}

/// `ρ_n = n(1−χ) u_n(w,z) / (U(w) U(z) q_n(w,z)) → 1`; deviation `|ρ_n − 1|` at the largest feasible `n`.
pub fn check_zn_theorem(
    law: &StepLaw1D,
    n_max: usize,
    points: &[(i64, i64)],
    stride: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    let z_top = points.iter().map(|p| p.0.max(p.1)).max().unwrap_or(1) as usize;
    let ren = RenewalTable::build(law, &RenewalConfig { z_max: z_top + 8, ..Default::default() });
    let q = q_table::<f64>(law, n_max)?;
    let mut starts: Vec<i64> = points.iter().map(|p| p.0).collect();
    starts.sort_unstable();
    starts.dedup();
    let u_tables = starts
        .par_iter()
        .map(|&w| u_table::<f64>(law, n_max, w).map(|t| (w, t)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut ratios = Vec::new();
    let mut skipped = 0.0;
    for &(w, z) in points {
        let grid = horizon_grid(n_max, stride, |n| q.get(n, z - w) > 0.0);
        if grid.is_empty() {
            skipped += 1.0;
            continue;
        }
        let u = &u_tables[&w];
        let norm = (1.0 - ren.chi) / (ren.big_u(w) * ren.big_u(z));
        let ratio: Vec<f64> = grid.iter().map(|&n| n as f64 * norm * u.get(n, z) / q.get(n, z - w)).collect();
        let deviation = (ratio.last().unwrap() - 1.0).abs();
        ratios.push(Series { point: vec![w, z], label: format!("w={w},z={z}"), n: grid, ratio, deviation });
    }
    let mut notes = BTreeMap::new();
    notes.insert("chi".into(), ren.chi);
    notes.insert("skipped_points".into(), skipped);
    notes.insert("window_flatness".into(), ratios.iter().map(|s| flatness(&s.ratio)).fold(0.0, f64::max));
    let grid = Grid {
        law: law.name.clone(),
        n_min: n_max / 2,
        n_max,
        stride,
        point_fields: vec!["w".into(), "z".into()],
        epsilon: DEFAULT_EPSILON,
        delta: DEFAULT_DELTA.into(),
    };
    Ok(ConvergenceReport::assemble("zn_local_limit", grid, ratios, tol, notes))
}

/// Where the time endpoint sits relative to `nμ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOffset {
    Mean,
    /// `round(nμ) + ⌊√n⌋`.
    MeanPlusSqrt,
}

impl TimeOffset {
    fn code(self) -> i64 {
        match self {
            TimeOffset::Mean => 0,
            TimeOffset::MeanPlusSqrt => 1,
        }
    }

    pub fn time(self, law: &StepLaw3D, k: usize) -> i64 {
        let mu = law.moments().mean[0];
        let base = (k as f64 * mu).round() as i64;
        match self {
            TimeOffset::Mean => base,
            TimeOffset::MeanPlusSqrt => base + (k as f64).sqrt().floor() as i64,
        }
    }
}

/// `n r_n(t; 0,g₁; 0,g₂) / (U(g₁) U(g₂) p_n(t; 0,g₁; 0,g₂))` flat over `[n/2, n]`.
///
/// Offsets whose time endpoint is unreachable in `k` steps (e.g. any
/// displacement when `ρ ≡ 1`) are dropped and counted in the notes.
pub fn check_theorem_c(
    law: &StepLaw3D,
    n_max: usize,
    start_gaps: &[i64],
    end_gaps: &[i64],
    offsets: &[TimeOffset],
    stride: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    let diff = law.difference_law();
    let z_top = start_gaps.iter().chain(end_gaps).copied().max().unwrap_or(1) as usize;
    let ren = RenewalTable::build(&diff, &RenewalConfig { z_max: z_top + 8, ..Default::default() });
    let (t_min, t_max) = (law.min_time(), law.max_time());
    let feasible = |off: TimeOffset, k: usize| {
        let t = off.time(law, k);
        t >= k as i64 * t_min && t <= k as i64 * t_max
    };
    let mut skipped = 0.0;
    let mut active: Vec<(TimeOffset, Vec<usize>)> = Vec::new();
    for &off in offsets {
        let grid = horizon_grid(n_max, stride, |k| feasible(off, k));
        if grid.len() < 2 || *grid.last().unwrap() != n_max {
            skipped += (start_gaps.len() * end_gaps.len()) as f64;
            continue;
        }
        active.push((off, grid));
    }
    // p is translation invariant: one run from (0,0) covers every gap pair.
    let mut shifts: Vec<i64> =
        start_gaps.iter().flat_map(|&a| end_gaps.iter().map(move |&b| b - a)).collect();
    shifts.sort_unstable();
    shifts.dedup();
    let mut p_probes: Vec<Step3> = Vec::new();
    for (off, grid) in &active {
        for &k in grid {
            for &d in &shifts {
                p_probes.push([off.time(law, k), 0, d]);
            }
        }
    }
    let p = CoupledSpec::new(law, Kind3::FreeP, n_max, (0, 0)).with_probes(p_probes.clone()).run::<f64>()?;
    let p_at = |k: usize, at: Step3| -> f64 {
        let i = p_probes.iter().position(|&q| q == at).unwrap();
        p.probe(k, i)
    };
    let r_runs = start_gaps
        .par_iter()
        .map(|&g1| {
            let mut probes = Vec::new();
            for (off, grid) in &active {
                for &k in grid {
                    for &g2 in end_gaps {
                        probes.push([off.time(law, k), 0, g2]);
                    }
                }
            }
            CoupledSpec::new(law, Kind3::ConstrainedR, n_max, (0, g1))
                .with_probes(probes.clone())
                .run::<f64>()
                .map(|t| (g1, probes, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ratios = Vec::new();
    let mut leak: f64 = p.leak;
    for (g1, probes, r) in &r_runs {
        leak = leak.max(r.leak);
        for (off, grid) in &active {
            for &g2 in end_gaps {
                let norm = ren.big_u(*g1) * ren.big_u(g2);
                let ratio: Vec<f64> = grid
                    .iter()
                    .map(|&k| {
                        let at = [off.time(law, k), 0, g2];
                        let i = probes.iter().position(|&q| q == at).unwrap();
                        k as f64 * r.probe(k, i) / (norm * p_at(k, [at[0], 0, g2 - g1]))
                    })
                    .collect();
                ratios.push(Series {
                    point: vec![*g1, g2, off.code()],
                    label: format!("gap {g1}->{g2}, t={off:?}"),
                    n: grid.clone(),
                    deviation: flatness(&ratio),
                    ratio,
                });
            }
        }
    }
    let lasts: Vec<f64> = ratios.iter().map(Series::last).collect();
    let mut notes = BTreeMap::new();
    notes.insert("skipped_points".into(), skipped);
    notes.insert("uniformity_spread".into(), if lasts.is_empty() { f64::NAN } else { flatness(&lasts) });
    notes.insert("leak".into(), leak);
    notes.insert("delta_at_n".into(), default_delta(n_max));
    let grid = Grid {
        law: law.name.clone(),
        n_min: n_max / 2,
        n_max,
        stride,
        point_fields: vec!["start_gap".into(), "end_gap".into(), "t_offset(0=mean,1=+sqrt n)".into()],
        epsilon: DEFAULT_EPSILON,
        delta: DEFAULT_DELTA.into(),
    };
    Ok(ConvergenceReport::assemble("theorem_c_ratio", grid, ratios, tol, notes))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice period of the total time `N` of a bridge with boundary pieces.
pub fn time_period(law: &StepLaw3D, q_b: &BoundaryLaw, q_f: &BoundaryLaw) -> i64 {
    let times = |it: Vec<i64>| it.windows(2).fold(0, |g, w| gcd(g, w[1] - w[0]));
    let mut rho: Vec<i64> = law.points().iter().map(|s| s[0]).collect();
    rho.sort_unstable();
    rho.dedup();
    let b: Vec<i64> = q_b.support().map(|(s, _)| s[0]).collect();
    let f: Vec<i64> = q_f.support().map(|(s, _)| s[0]).collect();
    let g = gcd(gcd(times(rho), times(b)), times(f));
    // Any common period of ρ also divides the step count contributions.
    if g == 0 {
        1
    } else {
        g
    }
}

/// Theorem B report plus the diagonal symmetry defect.
#[derive(Debug, Clone, Serialize)]
pub struct TheoremBReport {
    #[serde(flatten)]
    pub report: ConvergenceReport,
    /// Largest relative gap between `(a, b)` and `(b, a)` at every horizon.
    pub symmetry_dev: f64,
    pub period: i64,
}

/// `N² F(N; 0,g₁; 0,g₂) / (Ũ_b(g₁) Ũ_f(g₂))` flat over `[N/2, N]`.
pub fn check_theorem_b(
    law: &StepLaw3D,
    q_b: &BoundaryLaw,
    q_f: &BoundaryLaw,
    n_max: usize,
    gaps: &[(i64, i64)],
    stride: usize,
    tol: f64,
) -> Result<TheoremBReport> {
    let diff = law.difference_law();
    let z_top = gaps.iter().map(|g| g.0.max(g.1)).max().unwrap_or(1);
    let ren = RenewalTable::build(&diff, &RenewalConfig { z_max: z_top as usize + 16, ..Default::default() });
    let big_u = |z: i64| ren.big_u(z);
    let ut_b = u_tilde(q_b, &big_u, z_top);
    // The terminal piece enters backwards: the pre-terminal gap is z − (c − b).
    let q_f_rev = BoundaryLaw::new(
        "terminal-reversed",
        crate::steplaw::BoundaryKind::Initial,
        q_f.support().map(|(s, p)| ([s[0], 0, s[1] - s[2]], p)),
        q_f.beta,
    )?;
    let ut_f = u_tilde(&q_f_rev, &big_u, z_top);
    let period = time_period(law, q_b, q_f);
    let mut starts: Vec<i64> = gaps.iter().map(|g| g.0).collect();
    starts.sort_unstable();
    starts.dedup();
    let runs = starts
        .par_iter()
        .map(|&g1| {
            let ends: Vec<(i64, i64)> = gaps.iter().filter(|g| g.0 == g1).map(|g| (0, g.1)).collect();
            fixed_horizon_sum(law, q_b, q_f, n_max, (0, g1), &ends, &WindowSpec3::default()).map(|fh| (g1, fh))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid_n = horizon_grid(n_max, stride, |n| (n_max - n) as i64 % period == 0);
    let mut ratios = Vec::new();
    let mut values: BTreeMap<(i64, i64), Vec<f64>> = BTreeMap::new();
    let mut leak = 0.0f64;
    for (g1, fh) in &runs {
        leak = leak.max(fh.leak);
        for (i, &(_, g2)) in fh.ends.iter().enumerate() {
            let norm = ut_b[*g1 as usize] * ut_f[g2 as usize];
            let ratio: Vec<f64> =
                grid_n.iter().map(|&n| (n * n) as f64 * fh.value(n, i) / norm).collect();
            values.insert((*g1, g2), (0..=n_max).map(|n| fh.value(n, i)).collect());
            ratios.push(Series {
                point: vec![*g1, g2],
                label: format!("gaps ({g1},{g2})"),
                n: grid_n.clone(),
                deviation: flatness(&ratio),
                ratio,
            });
        }
    }
    let mut symmetry_dev = 0.0f64;
    for (&(a, b), va) in &values {
        if let Some(vb) = values.get(&(b, a)) {
            for (x, y) in va.iter().zip(vb) {
                if *x > 0.0 || *y > 0.0 {
                    symmetry_dev = symmetry_dev.max((x - y).abs() / x.abs().max(y.abs()));
                }
            }
        }
    }
    let mut notes = BTreeMap::new();
    notes.insert("leak".into(), leak);
    notes.insert("period".into(), period as f64);
    let grid = Grid {
        law: law.name.clone(),
        n_min: n_max / 2,
        n_max,
        stride,
        point_fields: vec!["start_gap".into(), "end_gap".into()],
        epsilon: DEFAULT_EPSILON,
        delta: DEFAULT_DELTA.into(),
    };
    Ok(TheoremBReport {
        report: ConvergenceReport::assemble("theorem_b_order", grid, ratios, tol, notes),
        symmetry_dev,
        period,
    })
}

/// One exact a priori bound checked over a whole table.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub law: String,
    pub bound: String,
    pub n: usize,
    /// `max value / bound` over points with a positive bound.
    pub max_ratio: f64,
    pub holds: bool,
    /// `max |value − bound| / bound`: zero when the bound is an equality.
    pub equality_dev: f64,
    pub strict_somewhere: bool,
}

/// Log-log slope of `u_n(w, z)` over the final dyadic block.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub law: String,
    pub w: i64,
    pub z: i64,
    pub slope: f64,
    /// `sup_n u_n(w,z) n^{3/2} / (w z min(w,z))` over the block.
    pub scaled_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub bounds: Vec<BoundCheck>,
    pub exponents: Vec<ExponentFit>,
}

impl AprioriReport {
    pub fn all_hold(&self) -> bool {
        self.bounds.iter().all(|b| b.holds)
    }
}

const BOUND_SLACK: f64 = 1e-12;

/// `u_n(0, z) ≤ (z/n) q_n(0, z)` for `1 ≤ k ≤ n`.
pub fn check_zsab(law: &StepLaw1D, n: usize) -> Result<BoundCheck> {
    let u = u_table::<f64>(law, n, 0)?;
    let q = q_table::<f64>(law, n)?;
    let mut acc = Acc::default();
    for k in 1..=n {
        for z in 1..=(k as i64 * law.max_step()) {
            let bound = z as f64 / k as f64 * q.get(k, z);
            acc.push(u.get(k, z), bound);
        }
    }
    Ok(acc.finish(&law.name, "zsab", n))
}

/// `r_k(t; 0,0; u,y) ≤ ((y−u)/k) p_k(t; 0,0; u,y)` for `1 ≤ k ≤ n`.
pub fn check_ssab(law: &StepLaw3D, n: usize) -> Result<BoundCheck> {
    let mut acc = Acc::default();
    for k in 1..=n {
        let r = CoupledSpec::new(law, Kind3::ConstrainedR, k, (0, 0)).run::<f64>()?;
        let p = CoupledSpec::new(law, Kind3::FreeP, k, (0, 0)).run::<f64>()?;
        for (t, u, y, pv) in p.entries() {
            if y > u {
                acc.push(r.get(t, u, y), (y - u) as f64 / k as f64 * pv);
            }
        }
    }
    Ok(acc.finish(&law.name, "ssab", n))
}

#[derive(Default)]
struct Acc {
    max_ratio: f64,
    eq_dev: f64,
    strict: bool,
    holds: bool,
    seen: bool,
}

impl Acc {
    fn push(&mut self, value: f64, bound: f64) {
        if !self.seen {
            self.holds = true;
            self.seen = true;
        }
        if bound <= 0.0 {
            self.holds &= value <= 0.0;
            return;
        }
        let ratio = value / bound;
        self.max_ratio = self.max_ratio.max(ratio);
        self.eq_dev = self.eq_dev.max((1.0 - ratio).abs());
        self.holds &= ratio <= 1.0 + BOUND_SLACK;
        self.strict |= ratio < 1.0 - 1e-9;
    }

    fn finish(self, law: &str, bound: &str, n: usize) -> BoundCheck {
        BoundCheck {
            law: law.into(),
            bound: bound.into(),
            n,
            max_ratio: self.max_ratio,
            holds: self.holds,
            equality_dev: self.eq_dev,
            strict_somewhere: self.strict,
        }
    }
}

/// Least-squares slope of `ln u_n(w,z)` against `ln n` over feasible `n ∈ [n/2, n]`.
pub fn fit_decay_exponent(law: &StepLaw1D, n: usize, w: i64, z: i64) -> Result<ExponentFit> {
    let u = u_table::<f64>(law, n, w)?;
    let pts: Vec<(f64, f64)> = (n / 2..=n)
        .filter(|&k| u.get(k, z) > 0.0)
        .map(|k| ((k as f64).ln(), u.get(k, z).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let scale = (w * z * w.min(z)) as f64;
    let scaled_sup = pts.iter().map(|p| (p.1 + 1.5 * p.0).exp() / scale).fold(0.0, f64::max);
    Ok(ExponentFit { law: law.name.clone(), w, z, slope: sxy / sxx, scaled_sup })
}

/// ZSAB on every 1D law, SSAB on every 3D law and decay-exponent fits.
pub fn check_apriori_suite(
    laws1d: &[StepLaw1D],
    laws3d: &[StepLaw3D],
    n1: usize,
    n3: usize,
) -> Result<AprioriReport> {
    let mut bounds = Vec::new();
    let mut exponents = Vec::new();
    for law in laws1d {
        bounds.push(check_zsab(law, n1)?);
        for (w, z) in [(1, 1), (1, 2), (2, 3)] {
            exponents.push(fit_decay_exponent(law, n1, w, z)?);
        }
    }
    for law in laws3d {
        bounds.push(check_ssab(law, n3)?);
    }
    Ok(AprioriReport { bounds, exponents })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steplaw::{jump2, lazy, srw, tri, uniform3, BoundaryKind};

    #[test]
    fn flatness_and_verdict() {
        assert_eq!(flatness(&[2.0, 2.0]), 0.0);
        assert!((flatness(&[1.0, 1.1]) - 0.1).abs() < 1e-12);
        assert!(flatness(&[0.0, 1.0]).is_infinite());
        assert_eq!(Verdict::from_dev(0.01, 0.05), Verdict::Pass);
        assert_eq!(Verdict::from_dev(0.05, 0.05), Verdict::Fail);
    }

    #[test]
    fn horizon_grid_keeps_largest_feasible() {
        let g = horizon_grid(21, 2, |n| n % 2 == 0);
        assert_eq!(*g.last().unwrap(), 20);
        assert_eq!(g.first(), Some(&12));
        assert!(g.windows(2).all(|w| w[1] - w[0] == 4));
    }

    #[test]
    fn zn_ratio_small_horizon() {
        let rep = check_zn_theorem(&srw(), 400, &[(1, 1), (1, 2)], 10, 0.05).unwrap();
        let s = &rep.ratios[0];
        assert!(s.n.iter().all(|n| n % 2 == 0));
        assert_eq!(*s.n.last().unwrap(), 400);
        assert_eq!(*rep.ratios[1].n.last().unwrap(), 399);
        assert!(rep.passed(), "{:?}", rep.max_dev);
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["statement", "grid", "ratios", "limit_estimate", "max_dev", "tol", "verdict"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["verdict"], "pass");
    }

    #[test]
    fn zn_parity_infeasible_point_is_skipped() {
        let rep = check_zn_theorem(&srw(), 2, &[(1, 1), (1, 4)], 1, 0.5).unwrap();
        assert_eq!(rep.ratios.len(), 1);
        assert_eq!(rep.notes["skipped_points"], 1.0);
    }

    #[test]
    fn zsab_equality_for_skip_free_and_strict_otherwise() {
        // Upward skip-free walks satisfy the cycle lemma exactly.
        for law in [srw(), lazy()] {
            let s = check_zsab(&law, 60).unwrap();
            assert!(s.holds && s.equality_dev < 1e-12, "{s:?}");
        }
        for law in [jump2(), tri()] {
            let c = check_zsab(&law, 60).unwrap();
            assert!(c.holds && c.strict_somewhere);
        }
    }

    #[test]
    fn ssab_strict_for_uniform3() {
        let c = check_ssab(&uniform3(), 10).unwrap();
        assert!(c.holds && c.strict_somewhere);
    }

    #[test]
    fn decay_exponent_near_three_halves() {
        let f = fit_decay_exponent(&srw(), 1000, 1, 1).unwrap();
        assert!((f.slope + 1.5).abs() < 0.02, "{f:?}");
        let f = fit_decay_exponent(&lazy(), 1000, 2, 3).unwrap();
        assert!((f.slope + 1.5).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn theorem_c_small_run_and_infeasible_offset() {
        let rep = check_theorem_c(
            &uniform3(),
            80,
            &[1, 2],
            &[1],
            &[TimeOffset::Mean, TimeOffset::MeanPlusSqrt],
            1,
            0.5,
        )
        .unwrap();
        assert_eq!(rep.ratios.len(), 2);
        assert_eq!(rep.notes["skipped_points"], 2.0);
        assert!(rep.ratios.iter().all(|s| s.ratio.iter().all(|r| *r > 0.0)));
    }

    #[test]
    fn theorem_b_small_run_is_symmetric() {
        let q = BoundaryLaw::identity(BoundaryKind::Initial);
        let rep = check_theorem_b(&uniform3(), &q, &q, 60, &[(1, 1), (1, 2), (2, 1)], 1, 0.5).unwrap();
        assert!(rep.symmetry_dev < 1e-12);
        assert_eq!(rep.period, 1);
        assert_eq!(rep.report.ratios.len(), 3);
    }

    #[test]
    fn reversed_terminal_gap_shift() {
        // A terminal piece that widens the gap by one shifts Ũ_f down by one.
        let law = uniform3();
        let q_b = BoundaryLaw::identity(BoundaryKind::Initial);
        let q_f = BoundaryLaw::point_mass(BoundaryKind::Terminal, [1, 0, 1]);
        let rep = check_theorem_b(&law, &q_b, &q_f, 20, &[(1, 2)], 1, 10.0).unwrap();
        let ren = RenewalTable::build(&law.difference_law(), &RenewalConfig::default());
        let fh = fixed_horizon_sum(&law, &q_b, &q_f, 20, (0, 1), &[(0, 2)], &WindowSpec3::default()).unwrap();
        let expect = 400.0 * fh.value(20, 0) / (ren.big_u(1) * ren.big_u(1));
        assert!((rep.report.ratios[0].last() - expect).abs() < 1e-12 * expect);
    }
}
