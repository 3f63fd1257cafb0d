//! Percolation experiments: the inverse correlation length, the finite
//! two-point function `g(x_N*)` and the fit of its power-law prefactor.
//!
//! Every estimate is a pure function of its inputs and the seed. Sampling is
//! split into fixed chunks of streams; per-chunk counts are integers and are
//! merged in chunk order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perc::geometry::MassGapStats;
use crate::perc::{BondRng, EdgeSubset, Explorer, LatticeBox};

const CHUNK: u64 = 1 << 14;
/// Stream namespaces keep the experiments on disjoint randomness.
const TAU_STREAMS: u64 = 1 << 62;
const G_STREAMS: u64 = 2 << 62;

/// Fewest hits for an `N` to enter the correlation-length fit.
pub const MIN_TAU_HITS: u64 = 100;
/// Hits that make a `g` estimate count as adequately sampled.
pub const MIN_G_HITS: u64 = 200;
/// Smallest default margin for `g` boxes. At `p = 0.45` a margin of `N`
/// misses about half the finite clusters at `N = 4`; from 32 on the
/// estimate is stable.
pub const DEFAULT_MIN_MARGIN: i64 = 32;
/// Leave-one-group-out jackknife groups for the `τ` standard error.
pub const JACKKNIFE_GROUPS: usize = 20;

/// Straight-line weighted least squares `y = a + b·x`.
#[derive(Debug, Clone, Copy)]
struct Line {
    a: f64,
    b: f64,
    /// Covariance of `(a, b)` from the supplied weights.
    cov: [[f64; 2]; 2],
    chi2: f64,
}

fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Option<Line> {
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    if !(det.is_finite() && det > 1e-12 * sw * sxx.max(1.0)) {
        return None;
    }
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    let chi2 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (y - a - b * x).powi(2)).sum();
    Some(Line { a, b, cov: [[sxx / det, -sx / det], [-sx / det, sw / det]], chi2 })
}

fn chunked<T, F>(total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| f(c * CHUNK, ((c + 1) * CHUNK).min(total)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauModel {
    /// `ln P = a − τN`.
    Plain,
    /// `ln P = a − τN − ½ ln N`.
    OrnsteinZernike,
}

impl TauModel {
    fn offset(&self, n: i64) -> f64 {
        match self {
            TauModel::Plain => 0.0,
            TauModel::OrnsteinZernike => 0.5 * (n as f64).ln(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauPoint {
    pub n: i64,
    pub hits: u64,
    pub log_p: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauFit {
    pub model: TauModel,
    pub tau: f64,
    /// Jackknife over sample groups, so correlations between `N` are kept.
    pub stderr: f64,
    pub intercept: f64,
    /// `τ` refitted on the upper half of the window, relative change.
    pub upper_half_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEstimate {
    pub p: f64,
    pub direction: [i64; 2],
    pub tau_hat: f64,
    pub stderr: f64,
    pub plain: TauFit,
    pub oz: TauFit,
    pub requested_window: (i64, i64),
    pub n_window: (i64, i64),
    pub points: Vec<TauPoint>,
    pub samples: u64,
    pub seed: u64,
    pub bx: LatticeBox,
    /// Sampled clusters that reached the box frontier.
    pub frontier_touches: u64,
}

impl CorrelationEstimate {
    pub fn fit(&self, model: TauModel) -> &TauFit {
        match model {
            TauModel::Plain => &self.plain,
            TauModel::OrnsteinZernike => &self.oz,
        }
    }

    /// `τ̂ ≤ ln(1/p) + 3·stderr`, the path-counting bound.
    pub fn within_path_bound(&self) -> bool {
        self.tau_hat <= (1.0 / self.p).ln() + 3.0 * self.stderr
    }
}

/// Box for the two-point function along `e₁`: `[−L, N_hi + L] × [−L, L]`.
pub fn tau_box(n_hi: i64, margin: i64) -> Result<LatticeBox> {
    let l = margin.max(1);
    LatticeBox::new(-l, n_hi + l, -l, l, l)
}

fn tau_fit_points(pts: &[(i64, u64)], samples: u64, model: TauModel) -> Option<(f64, f64)> {
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for &(n, h) in pts {
        if h == 0 {
            return None;
        }
        let f = h as f64 / samples as f64;
        x.push(n as f64);
        y.push(f.ln() + model.offset(n));
        w.push(h as f64 / (1.0 - f));
    }
    wls(&x, &y, &w).map(|l| (-l.b, l.a))
}

fn tau_fit(window: &[i64], hits: &[Vec<u64>], group_samples: &[u64], model: TauModel) -> Result<TauFit> {
    let total: Vec<u64> = (0..window.len()).map(|i| hits.iter().map(|g| g[i]).sum()).collect();
    let samples: u64 = group_samples.iter().sum();
    let pts: Vec<(i64, u64)> = window.iter().copied().zip(total.iter().copied()).collect();
    let (tau, intercept) =
        tau_fit_points(&pts, samples, model).ok_or_else(|| Error::InsufficientHits("degenerate τ window".into()))?;
    let mut loo = Vec::new();
    for (g, gh) in hits.iter().enumerate() {
        let pts: Vec<(i64, u64)> = window.iter().copied().zip(total.iter().zip(gh).map(|(t, h)| t - h)).collect();
        if let Some((t, _)) = tau_fit_points(&pts, samples - group_samples[g], model) {
            loo.push(t);
        }
    }
    let k = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / k;
    let stderr = ((k - 1.0) / k * loo.iter().map(|t| (t - mean).powi(2)).sum::<f64>()).sqrt();
    let half = window.len() / 2;
    let upper: Vec<(i64, u64)> = pts[half..].to_vec();
    let upper_half_shift = if upper.len() >= 2 {
        tau_fit_points(&upper, samples, model).map_or(f64::NAN, |(t, _)| (t - tau).abs() / tau.abs())
    } else {
        f64::NAN
    };
    Ok(TauFit { model, tau, stderr, intercept, upper_half_shift })
}

/// Estimates `τ_p` from `P(0 ↔ (N, 0))` over `N ∈ window`.
///
/// One lazy cluster exploration per sample records hits for every `N`.
/// Values of `N` with fewer than [`MIN_TAU_HITS`] hits are dropped from
/// the fit; at least three must remain. `tau_hat` is the Ornstein–Zernike
/// corrected slope; the plain slope is reported alongside.
pub fn estimate_tau(p: f64, window: (i64, i64), samples: u64, seed: u64, margin: i64) -> Result<CorrelationEstimate> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::ConfigInvalid(format!("τ estimation needs p in (0, 1/2), got {p}")));
    }
    let (lo, hi) = window;
    if lo < 1 || hi < lo {
        return Err(Error::ConfigInvalid(format!("bad N window [{lo}, {hi}]")));
    }
    let bx = tau_box(hi, margin)?;
    let ns: Vec<i64> = (lo..=hi).collect();
    let per_chunk = chunked(samples, |a, b| {
        let mut ex = Explorer::new(bx);
        let mut hits = vec![0u64; ns.len()];
        let mut touches = 0u64;
        for s in a..b {
            let rng = BondRng::new(seed, TAU_STREAMS + s, p);
            touches += ex.direct_cluster(&rng, (0, 0), EdgeSubset::All, false).touched as u64;
            for (h, &n) in hits.iter_mut().zip(&ns) {
                *h += ex.visited(n, 0) as u64;
            }
        }
        (hits, touches, b - a)
    });
    let groups = JACKKNIFE_GROUPS.min(per_chunk.len()).max(1);
    let mut group_hits = vec![vec![0u64; ns.len()]; groups];
    let mut group_samples = vec![0u64; groups];
    let mut frontier_touches = 0;
    for (c, (h, t, m)) in per_chunk.iter().enumerate() {
        let g = c * groups / per_chunk.len();
        for (acc, v) in group_hits[g].iter_mut().zip(h) {
            *acc += v;
        }
        group_samples[g] += m;
        frontier_touches += t;
    }
    let total: Vec<u64> = (0..ns.len()).map(|i| group_hits.iter().map(|g| g[i]).sum()).collect();
    let points: Vec<TauPoint> = ns
        .iter()
        .zip(&total)
        .map(|(&n, &h)| {
            let f = h as f64 / samples as f64;
            TauPoint { n, hits: h, log_p: f.ln(), stderr: ((1.0 - f) / h as f64).sqrt() }
        })
        .collect();
    let keep: Vec<usize> = (0..ns.len()).filter(|&i| total[i] >= MIN_TAU_HITS).collect();
    if keep.len() < 3 {
        return Err(Error::InsufficientHits(format!(
            "only {} values of N in [{lo}, {hi}] reach {MIN_TAU_HITS} hits at p = {p} with {samples} samples",
            keep.len()
        )));
    }
    let window_used: Vec<i64> = keep.iter().map(|&i| ns[i]).collect();
    let hits_used: Vec<Vec<u64>> = group_hits.iter().map(|g| keep.iter().map(|&i| g[i]).collect()).collect();
    let plain = tau_fit(&window_used, &hits_used, &group_samples, TauModel::Plain)?;
    let oz = tau_fit(&window_used, &hits_used, &group_samples, TauModel::OrnsteinZernike)?;
    Ok(CorrelationEstimate {
        p,
        direction: [1, 0],
        tau_hat: oz.tau,
        stderr: oz.stderr,
        plain,
        oz,
        requested_window: window,
        n_window: (window_used[0], *window_used.last().unwrap()),
        points,
        samples,
        seed,
        bx,
        frontier_touches,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteConnectionEstimate {
    pub p: f64,
    pub p_star: f64,
    #[serde(rename = "N")]
    pub n: i64,
    pub samples: u64,
    pub hits: u64,
    pub g_hat: f64,
    pub stderr: f64,
    /// Fraction of hits whose dual cluster came within half the margin of
    /// the frontier. Exponential cluster tails make the truncation bias
    /// much smaller than this.
    pub frontier_bias: f64,
    pub seed: u64,
    pub margin: i64,
    /// Fewer than [`MIN_G_HITS`] hits.
    pub insufficient_hits: bool,
}

fn g_counts(p: f64, n: i64, bx: LatticeBox, from: u64, to: u64, seed: u64) -> (u64, u64) {
    let per_chunk = chunked(to - from, |a, b| {
        let mut ex = Explorer::new(bx);
        let (mut hits, mut near) = (0u64, 0u64);
        for s in from + a..from + b {
            let rng = BondRng::new(seed, G_STREAMS + ((n as u64) << 40) + s, p);
            let o = ex.dual_from_origin(&rng, n);
            if o.finite_connection() {
                hits += 1;
                near += (2 * o.slack <= bx.margin) as u64;
            }
        }
        (hits, near)
    });
    per_chunk.iter().fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1))
}

fn g_estimate(p: f64, n: i64, samples: u64, hits: u64, near: u64, seed: u64, margin: i64) -> FiniteConnectionEstimate {
    let g = if samples > 0 { hits as f64 / samples as f64 } else { 0.0 };
    FiniteConnectionEstimate {
        p,
        p_star: 1.0 - p,
        n,
        samples,
        hits,
        g_hat: g,
        stderr: if samples > 0 { (g * (1.0 - g) / samples as f64).sqrt() } else { 0.0 },
        frontier_bias: if hits > 0 { near as f64 / hits as f64 } else { 0.0 },
        seed,
        margin,
        insufficient_hits: hits < MIN_G_HITS,
    }
}

fn g_box(n: i64, margin: i64) -> Result<LatticeBox> {
    let bx = LatticeBox::for_connection(n, margin)?;
    bx.check_strip(n)?;
    Ok(bx)
}

/// Hit frequency of `{0* ↔f x_N*}` over `samples` configurations in the
/// box with margin `M` (`None` means `M = max(N, DEFAULT_MIN_MARGIN)`).
pub fn estimate_g(p: f64, n: i64, samples: u64, seed: u64, margin: Option<i64>) -> Result<FiniteConnectionEstimate> {
    if !(0.0..1.0).contains(&p) || n < 1 {
        return Err(Error::ConfigInvalid(format!("g needs p in [0, 1) and N ≥ 1, got p = {p}, N = {n}")));
    }
    let m = margin.unwrap_or(n.max(DEFAULT_MIN_MARGIN));
    let bx = g_box(n, m)?;
    let (hits, near) = g_counts(p, n, bx, 0, samples, seed);
    Ok(g_estimate(p, n, samples, hits, near, seed, m))
}

/// Like [`estimate_g`], drawing batches of `batch` samples until
/// `target_hits` is reached or `max_samples` is spent. The stopping point
/// depends only on the counts, so the result is reproducible.
pub fn estimate_g_until(
    p: f64,
    n: i64,
    target_hits: u64,
    batch: u64,
    max_samples: u64,
    seed: u64,
    margin: Option<i64>,
) -> Result<FiniteConnectionEstimate> {
    if !(0.0..1.0).contains(&p) || n < 1 || batch == 0 {
        return Err(Error::ConfigInvalid(format!("g needs p in [0, 1), N ≥ 1 and a positive batch, got p = {p}, N = {n}")));
    }
    let m = margin.unwrap_or(n.max(DEFAULT_MIN_MARGIN));
    let bx = g_box(n, m)?;
    let (mut samples, mut hits, mut near) = (0, 0, 0);
    while samples < max_samples && hits < target_hits {
        let next = (samples + batch).min(max_samples);
        let (h, nr) = g_counts(p, n, bx, samples, next, seed);
        hits += h;
        near += nr;
        samples = next;
    }
    Ok(g_estimate(p, n, samples, hits, near, seed, m))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GPoint {
    #[serde(rename = "N")]
    pub n: i64,
    pub g_hat: f64,
    pub stderr: f64,
}

impl From<&FiniteConnectionEstimate> for GPoint {
    fn from(e: &FiniteConnectionEstimate) -> Self {
        Self { n: e.n, g_hat: e.g_hat, stderr: e.stderr }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandFit {
    pub tau: f64,
    pub kappa_hat: f64,
    pub kappa_stderr: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelComparison {
    /// Weighted residual sum of squares with `κ` fixed at 2.
    pub chi2_kappa_2: f64,
    /// Same with `κ` fixed at ½.
    pub chi2_kappa_half: f64,
    /// `χ²(½) − χ²(2)`; positive favours `κ = 2`.
    pub delta_chi2: f64,
    pub preferred: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrefactorFit {
    pub series: Vec<GPoint>,
    pub tau_hat: f64,
    pub tau_stderr: f64,
    pub kappa_hat: f64,
    pub kappa_stderr: f64,
    /// Union of `κ̂ ± 1.96·stderr` over `τ̂ − se, τ̂, τ̂ + se`.
    pub kappa_ci: [f64; 2],
    pub psi_hat: f64,
    pub ln_c: f64,
    /// Covariance of `(ln C, κ)`.
    pub covariance: [[f64; 2]; 2],
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub band: Vec<BandFit>,
    pub model_comparison: ModelComparison,
}

fn prefactor_design(series: &[GPoint], tau: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x = series.iter().map(|s| (s.n as f64).ln()).collect();
    let y = series.iter().map(|s| s.g_hat.ln() + 2.0 * tau * s.n as f64).collect();
    let w = series.iter().map(|s| (s.g_hat / s.stderr).powi(2)).collect();
    (x, y, w)
}

fn fixed_kappa_chi2(x: &[f64], y: &[f64], w: &[f64], kappa: f64) -> f64 {
    let sw: f64 = w.iter().sum();
    let c = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y + kappa * x)).sum::<f64>() / sw;
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * (y + kappa * x - c).powi(2)).sum()
}

/// Weighted least squares of `ln ĝ + 2τ̂N` against `−κ ln N + ln C`.
///
/// Points with no hits are dropped. Needs at least five points whose `N`
/// spans a factor of three.
pub fn fit_prefactor(series: &[GPoint], tau: f64, tau_stderr: f64) -> Result<PrefactorFit> {
    let usable: Vec<GPoint> = series.iter().copied().filter(|s| s.g_hat > 0.0 && s.stderr > 0.0 && s.n > 0).collect();
    if usable.len() < 5 {
        return Err(Error::DegenerateDesign(format!("{} usable points, need 5", usable.len())));
    }
    let n_lo = usable.iter().map(|s| s.n).min().unwrap();
    let n_hi = usable.iter().map(|s| s.n).max().unwrap();
    if n_hi < 3 * n_lo {
        return Err(Error::DegenerateDesign(format!("N spans [{n_lo}, {n_hi}], need a factor of 3")));
    }
    let fit_at = |t: f64| -> Result<(Line, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (x, y, w) = prefactor_design(&usable, t);
        let line = wls(&x, &y, &w).ok_or_else(|| Error::DegenerateDesign("singular normal equations".into()))?;
        Ok((line, x, y, w))
    };
    let (line, x, y, w) = fit_at(tau)?;
    let mut band = Vec::new();
    let mut ci = [f64::INFINITY, f64::NEG_INFINITY];
    for t in [tau - tau_stderr, tau, tau + tau_stderr] {
        let (l, ..) = fit_at(t)?;
        let (k, se) = (-l.b, l.cov[1][1].sqrt());
        ci = [ci[0].min(k - 1.96 * se), ci[1].max(k + 1.96 * se)];
        band.push(BandFit { tau: t, kappa_hat: k, kappa_stderr: se });
    }
    let (c2, ch) = (fixed_kappa_chi2(&x, &y, &w, 2.0), fixed_kappa_chi2(&x, &y, &w, 0.5));
    let residuals = x.iter().zip(&y).map(|(x, y)| y - line.a - line.b * x).collect();
    Ok(PrefactorFit {
        tau_hat: tau,
        tau_stderr,
        kappa_hat: -line.b,
        kappa_stderr: line.cov[1][1].sqrt(),
        kappa_ci: ci,
        psi_hat: line.a.exp(),
        ln_c: line.a,
        // Sign flip on the slope carries over to the off-diagonal.
        covariance: [[line.cov[0][0], -line.cov[0][1]], [-line.cov[1][0], line.cov[1][1]]],
        residuals,
        chi2: line.chi2,
        dof: usable.len() - 2,
        band,
        model_comparison: ModelComparison {
            chi2_kappa_2: c2,
            chi2_kappa_half: ch,
            delta_chi2: ch - c2,
            preferred: if c2 <= ch { 2.0 } else { 0.5 },
        },
        series: usable,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondDifference {
    pub g: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassGapFit {
    pub range: (usize, usize),
    pub conditioned: u64,
    /// `(g, ln f_g, stderr)` with `f_g` the frequency of max gap `≥ g`.
    pub points: Vec<(usize, f64, f64)>,
    pub decreasing: bool,
    /// Every second difference is below `tolerance_z` of its stderr.
    pub concave: bool,
    pub tolerance_z: f64,
    pub second_differences: Vec<SecondDifference>,
    /// Minus the least-squares slope of `ln f_g` in `g`.
    pub rate: f64,
    pub rate_stderr: f64,
}

/// Reads decay and concavity of the log tail of the max cone-point gap.
pub fn fit_mass_gap(stats: &MassGapStats, lo: usize, hi: usize, tolerance_z: f64) -> Result<MassGapFit> {
    if hi >= stats.tail.len() || lo + 2 > hi {
        return Err(Error::ConfigInvalid(format!("gap range [{lo}, {hi}] does not fit N = {}", stats.n)));
    }
    let points = stats.log_tail(lo, hi);
    if points.len() != hi - lo + 1 {
        return Err(Error::InsufficientHits(format!("gap tail vanishes inside [{lo}, {hi}]")));
    }
    let f = &stats.tail;
    let decreasing = (lo..hi).all(|g| f[g + 1] <= f[g]) && f[hi] < f[lo];
    let var: Vec<f64> = points.iter().map(|p| p.2 * p.2).collect();
    let second_differences: Vec<SecondDifference> = (1..points.len() - 1)
        .map(|i| SecondDifference {
            g: points[i].0,
            value: points[i + 1].1 - 2.0 * points[i].1 + points[i - 1].1,
            stderr: (var[i - 1] + 4.0 * var[i] + var[i + 1]).sqrt(),
        })
        .collect();
    let concave = second_differences.iter().all(|d| d.value <= tolerance_z * d.stderr);
    let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let line = wls(&x, &y, &vec![1.0; x.len()]).ok_or_else(|| Error::DegenerateDesign("gap range".into()))?;
    let dof = (x.len() - 2).max(1) as f64;
    let rate_stderr = (line.cov[1][1] * line.chi2 / dof).sqrt();
    Ok(MassGapFit {
        range: (lo, hi),
        conditioned: stats.conditioned,
        points,
        decreasing,
        concave,
        tolerance_z,
        second_differences,
        rate: -line.b,
        rate_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn synthetic(kappa: f64, c: f64, tau: f64, samples: u64, seed: u64) -> Vec<GPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (4..=16)
            .step_by(2)
            .map(|n| {
                let g = c * (n as f64).powf(-kappa) * (-2.0 * tau * n as f64).exp();
                let h = Binomial::new(samples, g).unwrap().sample(&mut rng);
                let gh = h as f64 / samples as f64;
                GPoint { n, g_hat: gh, stderr: (gh * (1.0 - gh) / samples as f64).sqrt() }
            })
            .collect()
    }

    #[test]
    fn wls_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|x| 0.5 - 2.0 * x).collect();
        let l = wls(&x, &y, &[1.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((l.a - 0.5).abs() < 1e-12 && (l.b + 2.0).abs() < 1e-12 && l.chi2 < 1e-20);
        assert!(wls(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn planted_prefactor_round_trip() {
        for (i, kappa) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let s = synthetic(kappa, 0.3, 0.1, 50_000_000, 11 + i as u64);
            let fit = fit_prefactor(&s, 0.1, 0.0).unwrap();
            assert!((fit.kappa_hat - kappa).abs() < 2.0 * fit.kappa_stderr, "κ={kappa}: {fit:?}");
            let se_c = fit.covariance[0][0].sqrt();
            assert!((fit.ln_c - 0.3f64.ln()).abs() < 2.0 * se_c);
            let want = if kappa == 0.5 { 0.5 } else { 2.0 };
            if kappa != 1.0 {
                assert_eq!(fit.model_comparison.preferred, want);
            }
        }
    }

    #[test]
    fn flat_series_has_zero_exponent() {
        let s: Vec<GPoint> = (4..=16).step_by(2).map(|n| GPoint { n, g_hat: 0.01, stderr: 1e-4 }).collect();
        let fit = fit_prefactor(&s, 0.0, 0.0).unwrap();
        assert!(fit.kappa_hat.abs() < 1e-9);
        assert!((fit.psi_hat - 0.01).abs() < 1e-12);
    }

    #[test]
    fn interval_widens_with_tau_uncertainty() {
        let s = synthetic(2.0, 0.3, 0.1, 10_000_000, 5);
        let mut last = 0.0;
        for se in [0.0, 0.001, 0.003, 0.01, 0.03] {
            let fit = fit_prefactor(&s, 0.1, se).unwrap();
            let width = fit.kappa_ci[1] - fit.kappa_ci[0];
            assert!(width > last);
            last = width;
        }
    }

    #[test]
    fn degenerate_designs_rejected() {
        let short: Vec<GPoint> = (4..=7).map(|n| GPoint { n, g_hat: 0.1, stderr: 0.01 }).collect();
        assert!(matches!(fit_prefactor(&short, 0.1, 0.0), Err(Error::DegenerateDesign(_))));
        let narrow: Vec<GPoint> = (10..=20).map(|n| GPoint { n, g_hat: 0.1, stderr: 0.01 }).collect();
        assert!(matches!(fit_prefactor(&narrow, 0.1, 0.0), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn g_vanishes_when_dual_is_fully_open() {
        let e = estimate_g(0.0, 3, 1000, 1, None).unwrap();
        assert_eq!((e.hits, e.g_hat), (0, 0.0));
        assert!(e.insufficient_hits);
        assert_eq!(e.p_star, 1.0);
    }

    #[test]
    fn g_is_reproducible_and_thread_independent() {
        let a = estimate_g(0.45, 4, 100_000, 3, None).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_g(0.45, 4, 100_000, 3, None).unwrap());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = estimate_g_until(0.45, 4, 50, 10_000, 100_000, 3, None).unwrap();
        assert!(c.hits >= 50 && c.samples < 100_000 && c.samples % 10_000 == 0);
    }

    #[test]
    fn tau_bounds_and_ordering() {
        let a = estimate_tau(0.25, (2, 8), 400_000, 9, 10).unwrap();
        let b = estimate_tau(0.40, (4, 14), 200_000, 9, 14).unwrap();
        assert!(a.tau_hat > 0.0 && b.tau_hat > 0.0);
        assert!(a.tau_hat > b.tau_hat);
        assert!(a.within_path_bound() && b.within_path_bound());
        assert!(a.plain.tau >= a.oz.tau);
        assert!(matches!(estimate_tau(0.25, (20, 24), 1000, 1, 5), Err(Error::InsufficientHits(_))));
    }
}
