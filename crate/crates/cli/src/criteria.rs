//! The acceptance criteria as runnable checks.
//!
//! Each check runs at its stated scale and tolerance and returns a
//! [`CriterionResult`] whose serialized form is deterministic given the seed.

use std::collections::BTreeMap;

use finconn_core::enumerate::{enumerate_by_endpoint, functional};
use finconn_core::experiments::{
    estimate_g_until, estimate_tau, fit_mass_gap, fit_prefactor, CorrelationEstimate, FiniteConnectionEstimate, GPoint,
};
use finconn_core::perc::oracle::finite_connection_polynomial;
use finconn_core::perc::{finite_connection, mass_gap_stats, BondRng, ConeParams, Explorer, LatticeBox, LatticeConfig};
use finconn_core::renewal::{
    chi_bracket, expected_weak_ladder_count, renewal_u, renewal_u_direct, ladder_height_law, tilt_continuity,
    ChiConvention, RenewalConfig, RenewalTable,
};
use finconn_core::steplaw::{jump2, lazy, mixed3, srw, uniform3, BoundaryKind, BoundaryLaw, TiltParams};
use finconn_core::theorems::{check_theorem_b, check_theorem_c, check_zn_theorem, TimeOffset};
use finconn_core::walk1d::{ladder_count_expectations, q_table, u_table};
use finconn_core::walk3d::{p_table, r_table};
use finconn_core::weight::Rational;
use rayon::prelude::*;
use serde::Serialize;

use crate::Failure;

pub const ALL: [u8; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub summary: String,
    pub metrics: BTreeMap<String, f64>,
    pub details: serde_json::Value,
}

impl CriterionResult {
    fn new(id: u8, passed: bool, summary: String, metrics: BTreeMap<String, f64>, details: serde_json::Value) -> Self {
        Self { id, title: title(id).to_string(), passed, summary, metrics, details }
    }

    pub fn line(&self) -> String {
        format!("criterion {:>2} {}: {} ({})", self.id, if self.passed { "PASS" } else { "FAIL" }, self.title, self.summary)
    }
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "ladder-count identity",
        2 => "ballot equality",
        3 => "renewal suite",
        4 => "local limit for the walk staying positive",
        5 => "coupled-walk ratio stabilization",
        6 => "fixed-horizon sum order",
        7 => "tilt suite",
        8 => "finite-connection exact oracle",
        9 => "correlation length sanity",
        10 => "prefactor order",
        11 => "cone-point gap decay",
        12 => "determinism",
        _ => "unknown",
    }
}

pub fn run(id: u8, seed: u64) -> Result<CriterionResult, Failure> {
    match id {
        1 => ladder_count_identity(),
        2 => ballot(),
        3 => renewal_suite(),
        4 => local_limit(),
        5 => coupled_ratio(),
        6 => fixed_horizon_order(),
        7 => tilt_suite(),
        8 => exact_oracle(seed),
        9 => correlation_length(seed).map(|(r, _)| r),
        10 => prefactor(seed),
        11 => gap_decay(seed),
        12 => determinism(seed),
        _ => Err(Failure::Validation(format!("no criterion {id}; expected 1..=12"))),
    }
}

fn metrics<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn one(b: bool) -> Rational {
    Rational::from_integer(b as i128)
}

fn ladder_count_identity() -> Result<CriterionResult, Failure> {
    let laws = [srw(), lazy(), jump2()];
    let mut exact_mismatches = 0u64;
    let mut exact_checked = 0u64;
    for law in &laws {
        for n in 1..=10usize {
            let z_max = n as i64 * law.max_step();
            let u = u_table::<Rational>(law, n, 0)?;
            let counts = ladder_count_expectations::<Rational>(law, n, z_max)?;
            let oracle_u = enumerate_by_endpoint::<Rational>(law, n, 0, |p| one(p[1..].iter().all(|&x| x > 0)))?;
            let oracle_counts = enumerate_by_endpoint::<Rational>(law, n, 0, |p| {
                Rational::from_integer(functional::strict_ladder_count(p, *p.last().unwrap()))
            })?;
            for z in 1..=z_max {
                let dp = u.get(n, z);
                let via_counts = counts[z as usize] / Rational::from_integer(n as i128);
                let ou = oracle_u.get(&z).copied().unwrap_or_default();
                let oc = oracle_counts.get(&z).copied().unwrap_or_default();
                exact_checked += 1;
                if dp != ou || dp != via_counts || oc != counts[z as usize] {
                    exact_mismatches += 1;
                }
            }
        }
    }
    let float_dev = laws
        .par_iter()
        .map(|law| -> Result<f64, Failure> {
            let u = u_table::<f64>(law, 200, 0)?;
            let mut worst = 0.0f64;
            for n in 1..=200usize {
                let z_max = n as i64 * law.max_step();
                let counts = ladder_count_expectations::<f64>(law, n, z_max)?;
                for z in 1..=z_max {
                    worst = worst.max((u.get(n, z) - counts[z as usize] / n as f64).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>, Failure>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let passed = exact_mismatches == 0 && float_dev <= 1e-11;
    Ok(CriterionResult::new(
        1,
        passed,
        format!("{exact_checked} exact entries, {exact_mismatches} mismatches; float max dev {float_dev:.2e} ≤ 1e-11"),
        metrics([("exact_checked", exact_checked as f64), ("exact_mismatches", exact_mismatches as f64), ("float_max_dev", float_dev)]),
        serde_json::json!({"laws": ["srw", "lazy", "jump2"], "exact_n_max": 10, "float_n_max": 200}),
    ))
}

fn ballot() -> Result<CriterionResult, Failure> {
    let law = srw();
    let n = 200;
    let q = q_table::<f64>(&law, n)?;
    let u = u_table::<f64>(&law, n, 0)?;
    let mut worst = 0.0f64;
    for k in 1..=n {
        for z in 1..=k as i64 {
            worst = worst.max((u.get(k, z) - z as f64 / k as f64 * q.get(k, z)).abs());
        }
    }
    Ok(CriterionResult::new(
        2,
        worst <= 1e-12,
        format!("max |u − (z/n)q| = {worst:.2e} ≤ 1e-12 over n ≤ 200"),
        metrics([("max_dev", worst)]),
        serde_json::json!({"law": "srw", "n_max": n}),
    ))
}

/// Survival to this horizon is about `0.4/√M`, so the bracket is ~6e-4 wide.
pub const CHI_HORIZON: usize = 500_000;
/// Several standard deviations of the walk at [`CHI_HORIZON`].
pub const CHI_DEPTH: usize = 4000;
const BRACKET_ROUNDING: f64 = 1e-12;

fn renewal_suite() -> Result<CriterionResult, Failure> {
    let law = srw();
    let table = RenewalTable::build(&law, &RenewalConfig { z_max: 51, ..Default::default() });
    let linear = (1..=50).map(|z| (table.big_u[z] - z as f64).abs()).fold(0.0, f64::max);
    let (lo, hi) = chi_bracket(&law, CHI_HORIZON, CHI_DEPTH, ChiConvention::Literal);
    let (_, route_a) = renewal_u(&ladder_height_law(&law).f, 50);
    let route_b = renewal_u_direct(&law, 50);
    let routes = (1..=50).map(|z| (route_a[z] - route_b[z]).abs()).fold(0.0, f64::max);
    let weak = expected_weak_ladder_count(&law, 10);
    let nnotsum = (0..=10).map(|z| (weak[z] - table.big_u[z + 1] / (1.0 - table.chi)).abs()).fold(0.0, f64::max);
    // The upper end is a long float sum whose exact value can equal ½.
    let bracket_ok = lo <= 0.5 && 0.5 <= hi + BRACKET_ROUNDING && hi - lo < 1e-3;
    let passed = linear <= 1e-9 && bracket_ok && table.big_u[1] == 1.0 && routes <= 1e-9 && nnotsum <= 1e-6;
    Ok(CriterionResult::new(
        3,
        passed,
        format!(
            "|U(z) − z| ≤ {linear:.1e}; χ ∈ [{lo:.6}, {hi:.12}] width {:.1e}; U(1) = {}; routes {routes:.1e}; weak count {nnotsum:.1e}",
            hi - lo,
            table.big_u[1]
        ),
        metrics([
            ("u_linear_dev", linear),
            ("chi_lo", lo),
            ("chi_hi", hi),
            ("u1", table.big_u[1]),
            ("two_route_dev", routes),
            ("weak_count_dev", nnotsum),
        ]),
        serde_json::json!({"law": "srw", "chi_convention": ChiConvention::Literal, "chi_horizon": CHI_HORIZON, "chi_depth": CHI_DEPTH}),
    ))
}

fn local_limit() -> Result<CriterionResult, Failure> {
    let points: Vec<(i64, i64)> = (1..=3).flat_map(|w| (1..=3).map(move |z| (w, z))).collect();
    let reports = [srw(), lazy()]
        .iter()
        .map(|law| check_zn_theorem(law, 2000, &points, 25, 0.05))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed());
    Ok(CriterionResult::new(
        4,
        passed,
        format!("max |ρ − 1| at n = 2000: srw {:.4}, lazy {:.4} (< 0.05)", reports[0].max_dev, reports[1].max_dev),
        metrics([("srw_max_dev", reports[0].max_dev), ("lazy_max_dev", reports[1].max_dev)]),
        serde_json::to_value(&reports).unwrap_or_default(),
    ))
}

/// Horizon of the law with spread `ρ`, used where the constant-`ρ` law
/// cannot reach `t` displaced by `√n`.
pub const DISPLACED_HORIZON: usize = 192;

fn coupled_ratio() -> Result<CriterionResult, Failure> {
    let gaps = [1, 2, 3];
    let offsets = [TimeOffset::Mean, TimeOffset::MeanPlusSqrt];
    let main = check_theorem_c(&uniform3(), 1000, &gaps, &gaps, &offsets, 10, 0.08)?;
    let displaced = check_theorem_c(&mixed3(), DISPLACED_HORIZON, &gaps, &gaps, &offsets, 1, 0.08)?;
    let skipped = main.notes.get("skipped_points").copied().unwrap_or(0.0);
    let passed = main.passed() && displaced.passed();
    Ok(CriterionResult::new(
        5,
        passed,
        format!(
            "uniform3 n = 1000 flatness {:.4}; {} displaced points unreachable, mixed3 n = {DISPLACED_HORIZON} with both offsets flatness {:.4} (< 0.08)",
            main.max_dev, skipped, displaced.max_dev
        ),
        metrics([("uniform3_flatness", main.max_dev), ("uniform3_skipped", skipped), ("mixed3_flatness", displaced.max_dev)]),
        serde_json::json!({"uniform3": main, "mixed3": displaced}),
    ))
}

fn fixed_horizon_order() -> Result<CriterionResult, Failure> {
    let q = BoundaryLaw::identity(BoundaryKind::Initial);
    let gaps = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 3)];
    let b = check_theorem_b(&uniform3(), &q, &q, 400, &gaps, 5, 0.08)?;
    let passed = b.report.passed() && b.symmetry_dev <= 1e-12;
    Ok(CriterionResult::new(
        6,
        passed,
        format!("N² sum flatness {:.4} (< 0.08); diagonal symmetry {:.1e} (≤ 1e-12)", b.report.max_dev, b.symmetry_dev),
        metrics([("flatness", b.report.max_dev), ("symmetry_dev", b.symmetry_dev)]),
        serde_json::to_value(&b).unwrap_or_default(),
    ))
}

fn tilt_suite() -> Result<CriterionResult, Failure> {
    let lams = [TiltParams::new(0.3, -0.2), TiltParams::new(-0.4, 0.5)];
    let mut round_trip = 0.0f64;
    for law in [uniform3(), mixed3()] {
        for lam in lams {
            let back = law.tilt(lam).tilt(lam.negate());
            for (a, b) in law.probs().iter().zip(back.probs()) {
                round_trip = round_trip.max((a - b).abs());
            }
        }
    }
    let law = mixed3();
    let n = 8;
    let r = r_table::<f64>(&law, n, (0, 1))?;
    let p = p_table::<f64>(&law, n, (0, 1))?;
    let mut invariance = 0.0f64;
    for lam in lams {
        let tl = law.tilt(lam);
        let rl = r_table::<f64>(&tl, n, (0, 1))?;
        let pl = p_table::<f64>(&tl, n, (0, 1))?;
        for (t, u, y, val) in r.entries() {
            let a = val / p.get(t, u, y);
            let b = rl.get(t, u, y) / pl.get(t, u, y);
            invariance = invariance.max((a - b).abs() / a);
        }
    }
    let dir = |s: f64| TiltParams::new(s / 2f64.sqrt(), s / 2f64.sqrt());
    let grid: Vec<TiltParams> = [0.2, 0.1, 0.05, 0.02, 0.01].iter().map(|&s| dir(s)).collect();
    let scan = tilt_continuity(&uniform3(), &grid, 30, ChiConvention::Literal);
    let at = |s: f64| scan.rows.iter().find(|r| (r.norm - s).abs() < 1e-9).cloned();
    let (a, b) = match (at(0.1), at(0.01)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Failure::Resource("tilt scan lost a grid point".into())),
    };
    let chi_shrink = a.chi_deviation / b.chi_deviation;
    let u_shrink = a.u_deviation / b.u_deviation;
    let passed = round_trip <= 1e-12 && invariance <= 1e-12 && chi_shrink >= 5.0 && u_shrink >= 5.0;
    Ok(CriterionResult::new(
        7,
        passed,
        format!(
            "round trip {round_trip:.1e}, ratio invariance {invariance:.1e} (≤ 1e-12); χ deviation shrinks {chi_shrink:.1}×, U {u_shrink:.1}× (≥ 5)"
        ),
        metrics([("round_trip", round_trip), ("ratio_invariance", invariance), ("chi_shrink", chi_shrink), ("u_shrink", u_shrink)]),
        serde_json::to_value(&scan).unwrap_or_default(),
    ))
}

/// Operating point of the percolation experiments.
pub const P_HEADLINE: f64 = 0.45;

fn exact_oracle(seed: u64) -> Result<CriterionResult, Failure> {
    let bx = LatticeBox::minimal(1);
    let poly = finite_connection_polynomial(bx, 1)?;
    let p = P_HEADLINE;
    let exact = poly.prob(p);
    let samples = 1_000_000u64;
    let chunk = 1u64 << 14;
    let (lazy_hits, eager_hits) = (0..samples.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut ex = Explorer::new(bx);
            let (mut l, mut e) = (0u64, 0u64);
            for s in c * chunk..((c + 1) * chunk).min(samples) {
                l += ex.dual_from_origin(&BondRng::new(seed, s, p), 1).finite_connection() as u64;
                e += finite_connection(&LatticeConfig::sample(p, bx, seed, s), 1).unwrap_or(false) as u64;
            }
            (l, e)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let se = (exact * (1.0 - exact) / samples as f64).sqrt();
    let z_lazy = (lazy_hits as f64 / samples as f64 - exact) / se;
    let z_eager = (eager_hits as f64 / samples as f64 - exact) / se;
    let passed = z_lazy.abs() < 4.0 && z_eager.abs() < 4.0 && lazy_hits == eager_hits;
    Ok(CriterionResult::new(
        8,
        passed,
        format!(
            "{} bonds, exact {exact:.6}; MC {:.6} ({z_lazy:+.2} se), union-find agrees on every sample: {}",
            poly.bonds,
            lazy_hits as f64 / samples as f64,
            lazy_hits == eager_hits
        ),
        metrics([("exact", exact), ("z_lazy", z_lazy), ("z_eager", z_eager), ("bonds", poly.bonds as f64)]),
        serde_json::json!({"p": p, "samples": samples, "seed": seed, "lazy_hits": lazy_hits, "eager_hits": eager_hits, "counts": poly.counts}),
    ))
}

/// `(p, window, samples, margin)` for the correlation-length points.
pub const TAU_RUNS: [(f64, (i64, i64), u64, i64); 2] = [(0.25, (2, 24), 10_000_000, 12), (0.40, (4, 24), 10_000_000, 24)];
/// Same for the headline density.
pub const TAU_HEADLINE: (f64, (i64, i64), u64, i64) = (P_HEADLINE, (6, 32), 4_000_000, 40);

fn correlation_length(seed: u64) -> Result<(CriterionResult, Vec<CorrelationEstimate>), Failure> {
    let est = TAU_RUNS
        .iter()
        .map(|&(p, w, s, m)| estimate_tau(p, w, s, seed, m))
        .collect::<Result<Vec<_>, _>>()?;
    let (a, b) = (&est[0], &est[1]);
    let passed =
        a.tau_hat > 0.0 && b.tau_hat > 0.0 && a.tau_hat > b.tau_hat && a.within_path_bound() && b.within_path_bound();
    let r = CriterionResult::new(
        9,
        passed,
        format!(
            "τ̂(0.25) = {:.4} ± {:.4} (N ∈ [{}, {}]), τ̂(0.40) = {:.4} ± {:.4} (N ∈ [{}, {}]); bounds ln(1/p) = {:.4}, {:.4}",
            a.tau_hat,
            a.stderr,
            a.n_window.0,
            a.n_window.1,
            b.tau_hat,
            b.stderr,
            b.n_window.0,
            b.n_window.1,
            (1.0 / a.p).ln(),
            (1.0 / b.p).ln()
        ),
        metrics([("tau_025", a.tau_hat), ("tau_040", b.tau_hat), ("stderr_025", a.stderr), ("stderr_040", b.stderr)]),
        serde_json::to_value(&est).unwrap_or_default(),
    );
    Ok((r, est))
}

pub const PREFACTOR_GRID: [i64; 7] = [4, 6, 8, 10, 12, 14, 16];
pub const PREFACTOR_TARGET_HITS: u64 = 500;
pub const PREFACTOR_MAX_SAMPLES: u64 = 100_000_000;

/// `g` over the grid, truncated to `N ≤ truncate_to` when the top of the
/// grid falls short of the hit floor.
pub fn g_series(p: f64, grid: &[i64], target: u64, max_samples: u64, seed: u64, truncate_to: i64) -> Result<(Vec<FiniteConnectionEstimate>, bool), Failure> {
    let mut out = Vec::new();
    for &n in grid {
        out.push(estimate_g_until(p, n, target, 1 << 20, max_samples, seed, None)?);
    }
    let short = out.iter().any(|e| e.n > truncate_to && e.insufficient_hits);
    if short {
        out.retain(|e| e.n <= truncate_to);
    }
    Ok((out, short))
}

fn prefactor(seed: u64) -> Result<CriterionResult, Failure> {
    let (p, w, s, m) = TAU_HEADLINE;
    let tau = estimate_tau(p, w, s, seed, m)?;
    let (series, truncated) = g_series(p, &PREFACTOR_GRID, PREFACTOR_TARGET_HITS, PREFACTOR_MAX_SAMPLES, seed, 12)?;
    let pts: Vec<GPoint> = series.iter().map(GPoint::from).collect();
    let fit = fit_prefactor(&pts, tau.tau_hat, tau.stderr)?;
    let mc = fit.model_comparison;
    let passed = (1.25..=2.75).contains(&fit.kappa_hat) && mc.preferred == 2.0;
    Ok(CriterionResult::new(
        10,
        passed,
        format!(
            "τ̂ = {:.4} ± {:.4}; κ̂ = {:.3} ± {:.3}, interval [{:.3}, {:.3}], target [1.25, 2.75]; Δχ²(½ vs 2) = {:.1}, prefers κ = {}{}",
            tau.tau_hat,
            tau.stderr,
            fit.kappa_hat,
            fit.kappa_stderr,
            fit.kappa_ci[0],
            fit.kappa_ci[1],
            mc.delta_chi2,
            mc.preferred,
            if truncated { "; grid truncated to N ≤ 12" } else { "" }
        ),
        metrics([("tau_hat", tau.tau_hat), ("kappa_hat", fit.kappa_hat), ("kappa_stderr", fit.kappa_stderr), ("delta_chi2", mc.delta_chi2), ("psi_hat", fit.psi_hat)]),
        serde_json::json!({"tau": tau, "series": series, "fit": fit, "truncated": truncated}),
    ))
}

pub const GAP_P: f64 = 0.3;
pub const GAP_N: i64 = 10;
pub const GAP_TRIALS: u64 = 50_000_000;
pub const GAP_MIN_CONDITIONED: u64 = 10_000;

fn gap_decay(seed: u64) -> Result<CriterionResult, Failure> {
    let stats = mass_gap_stats(GAP_P, ConeParams::default(), GAP_N, GAP_TRIALS, seed)?;
    let fit = fit_mass_gap(&stats, 2, 10, 3.0)?;
    let passed = stats.conditioned >= GAP_MIN_CONDITIONED && fit.decreasing && fit.concave && fit.rate > 0.0;
    Ok(CriterionResult::new(
        11,
        passed,
        format!(
            "{} conditioned clusters; ln-tail decreasing: {}, concave within 3 se: {}; rate {:.4} ± {:.4}",
            stats.conditioned, fit.decreasing, fit.concave, fit.rate, fit.rate_stderr
        ),
        metrics([("conditioned", stats.conditioned as f64), ("rate", fit.rate), ("rate_stderr", fit.rate_stderr)]),
        serde_json::json!({"stats": stats, "fit": fit}),
    ))
}

fn determinism(seed: u64) -> Result<CriterionResult, Failure> {
    let render = |id: u8| -> Result<String, Failure> { Ok(serde_json::to_string(&run(id, seed)?).unwrap_or_default()) };
    let mut same = true;
    let mut checked = Vec::new();
    for id in [2u8, 8] {
        let a = render(id)?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().map_err(|e| Failure::Resource(e.to_string()))?;
        let b = pool.install(|| render(id))?;
        same &= a == b;
        checked.push(id);
    }
    Ok(CriterionResult::new(
        12,
        same,
        format!("criteria {checked:?} rerun with another thread count: byte-identical {same}"),
        metrics([("identical", same as u8 as f64)]),
        serde_json::json!({"rerun": checked}),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_criteria_pass() {
        for id in [2u8, 7, 8] {
            let r = run(id, 1).unwrap();
            assert!(r.passed, "{}", r.line());
        }
        assert!(matches!(run(13, 1), Err(Failure::Validation(_))));
    }

    #[test]
    fn one_pass_oracle_agrees_with_table() {
        let law = jump2();
        let u = u_table::<Rational>(&law, 5, 0).unwrap();
        let o = enumerate_by_endpoint::<Rational>(&law, 5, 0, |p| one(p[1..].iter().all(|&x| x > 0))).unwrap();
        for z in 1..=10 {
            assert_eq!(u.get(5, z), o.get(&z).copied().unwrap_or_default());
        }
    }
}
