//! Cone points, cut lines and diamonds of direct clusters.
//!
//! The forward cone is `C = {(t, x) : |x| ≤ α t}` with a rational slope
//! `α = num/den`, so every membership test is exact integer arithmetic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::explore::Explorer;
use super::lattice::{EdgeSubset, LatticeBox};
use super::rng::BondRng;
use crate::error::{Error, Result};

pub type Site = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeParams {
    pub num: i64,
    pub den: i64,
}

impl Default for ConeParams {
    fn default() -> Self {
        Self { num: 1, den: 1 }
    }
}

impl ConeParams {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if num <= 0 || den <= 0 {
            return Err(Error::ConfigInvalid(format!("cone slope {num}/{den} must be positive")));
        }
        Ok(Self { num, den })
    }

    pub fn alpha(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `d ∈ C`.
    pub fn contains(&self, d: Site) -> bool {
        d.0 >= 0 && self.den * d.1.abs() <= self.num * d.0
    }
}

/// All `z` strictly between `x` and `y` in `t` with `Cl ⊆ (z − C) ∪ (z + C)`.
/// Sorted by `t`.
pub fn cone_points(cluster: &[Site], x: Site, y: Site, cone: ConeParams) -> Vec<Site> {
    let (a, d) = (cone.num, cone.den);
    // Per column: count, and extrema of A = d·y − a·t and B = d·y + a·t.
    let mut cols: BTreeMap<i64, (usize, i64, i64, i64, i64, i64)> = BTreeMap::new();
    for &(t, v) in cluster {
        let (ca, cb) = (d * v - a * t, d * v + a * t);
        let e = cols.entry(t).or_insert((0, i64::MAX, i64::MIN, i64::MAX, i64::MIN, v));
        e.0 += 1;
        e.1 = e.1.min(ca);
        e.2 = e.2.max(ca);
        e.3 = e.3.min(cb);
        e.4 = e.4.max(cb);
        e.5 = v;
    }
    let keys: Vec<i64> = cols.keys().copied().collect();
    let vals: Vec<_> = cols.values().copied().collect();
    let m = keys.len();
    // Prefix over columns < i: min A, max B. Suffix over columns > i: max A, min B.
    let mut pre = vec![(i64::MAX, i64::MIN); m + 1];
    for i in 0..m {
        pre[i + 1] = (pre[i].0.min(vals[i].1), pre[i].1.max(vals[i].4));
    }
    let mut suf = vec![(i64::MIN, i64::MAX); m + 1];
    for i in (0..m).rev() {
        suf[i] = (suf[i + 1].0.max(vals[i].2), suf[i + 1].1.min(vals[i].3));
    }
    let (t_lo, t_hi) = (x.0.min(y.0), x.0.max(y.0));
    let mut out = Vec::new();
    for i in 0..m {
        let t = keys[i];
        if t <= t_lo || t >= t_hi || vals[i].0 != 1 {
            continue;
        }
        let v = vals[i].5;
        let (za, zb) = (d * v - a * t, d * v + a * t);
        if pre[i].0 >= za && pre[i].1 <= zb && suf[i + 1].0 <= za && suf[i + 1].1 >= zb {
            out.push((t, v));
        }
    }
    out
}

/// Direct `O(|Cl|²)` reading of the definition.
pub fn cone_points_naive(cluster: &[Site], x: Site, y: Site, cone: ConeParams) -> Vec<Site> {
    let (t_lo, t_hi) = (x.0.min(y.0), x.0.max(y.0));
    let mut out: Vec<Site> = cluster
        .iter()
        .copied()
        .filter(|z| z.0 > t_lo && z.0 < t_hi)
        .filter(|z| {
            cluster.iter().all(|w| {
                let d = (w.0 - z.0, w.1 - z.1);
                cone.contains(d) || cone.contains((-d.0, -d.1))
            })
        })
        .collect();
    out.sort_unstable();
    out
}

/// Largest `t`-distance between consecutive cone points, endpoints included.
pub fn max_cone_gap(cones: &[Site], x: Site, y: Site) -> i64 {
    let mut ts: Vec<i64> = cones.iter().map(|c| c.0).collect();
    ts.push(x.0);
    ts.push(y.0);
    ts.sort_unstable();
    ts.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
}

/// Lines `t = l` in `[lo, hi]` meeting the union of the pair in exactly two sites.
pub fn cut_lines(pair: &[Site], lo: i64, hi: i64) -> Vec<i64> {
    let mut count: BTreeMap<i64, usize> = BTreeMap::new();
    for s in pair {
        *count.entry(s.0).or_default() += 1;
    }
    (lo..=hi).filter(|l| count.get(l) == Some(&2)).collect()
}

/// Lines strictly inside `(lo, hi)` carrying a cone point of each cluster.
pub fn cone_cut_lines(cones1: &[Site], cones2: &[Site], lo: i64, hi: i64) -> Vec<i64> {
    let a: std::collections::BTreeSet<i64> = cones1.iter().map(|c| c.0).collect();
    let mut out: Vec<i64> = cones2.iter().map(|c| c.0).filter(|t| a.contains(t) && *t > lo && *t < hi).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// Lattice `y`-range of `D(w, w')` on the line `t`, if any.
fn diamond_slice(w: Site, w2: Site, t: i64, cone: ConeParams) -> Option<(i64, i64)> {
    if t < w.0 || t > w2.0 {
        return None;
    }
    let (a, d) = (cone.num, cone.den);
    let r1 = a * (t - w.0);
    let r2 = a * (w2.0 - t);
    // |y − w_y| ≤ r1/d and |y − w'_y| ≤ r2/d.
    let lo = ceil_div(d * w.1 - r1, d).max(ceil_div(d * w2.1 - r2, d));
    let hi = floor_div(d * w.1 + r1, d).min(floor_div(d * w2.1 + r2, d));
    (lo <= hi).then_some((lo, hi))
}

/// Whether `D(w, w')` and `D(z, z')` share a lattice point.
pub fn diamond_intersect(w: Site, w2: Site, z: Site, z2: Site, cone: ConeParams) -> bool {
    let lo = w.0.max(z.0);
    let hi = w2.0.min(z2.0);
    (lo..=hi).any(|t| match (diamond_slice(w, w2, t, cone), diamond_slice(z, z2, t, cone)) {
        (Some(a), Some(b)) => a.0.max(b.0) <= a.1.min(b.1),
        _ => false,
    })
}

/// Geometry of one cluster conditioned on `0 ↔ (N, 0)` inside the strip.
#[derive(Debug, Clone)]
struct Conditioned {
    max_gap: i64,
    cone_ts: Vec<i64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassGapStats {
    pub p: f64,
    pub n: i64,
    pub cone: ConeParams,
    pub seed: u64,
    pub trials: u64,
    pub conditioned: u64,
    /// `histogram[g]`: conditioned samples whose max cone-point gap is `g`.
    pub histogram: Vec<u64>,
    /// `tail[g]`: fraction with max gap `≥ g`.
    pub tail: Vec<f64>,
    /// Conditioned clusters that touched the vertical frontier of the strip.
    pub frontier_touches: u64,
    pub pairs: u64,
    /// Pairs with fewer than two cone cut lines.
    pub pairs_few_cone_cut_lines: u64,
}

impl MassGapStats {
    /// `(g, ln tail[g], stderr of ln tail[g])` for `g ∈ [lo, hi]` with positive counts.
    pub fn log_tail(&self, lo: usize, hi: usize) -> Vec<(usize, f64, f64)> {
        let n = self.conditioned as f64;
        (lo..=hi.min(self.tail.len() - 1))
            .filter(|&g| self.tail[g] > 0.0)
            .map(|g| {
                let f = self.tail[g];
                (g, f.ln(), ((1.0 - f) / (n * f)).sqrt())
            })
            .collect()
    }
}

/// Strip box for cluster geometry at horizon `N`: `[0, N] × [−N, N]`.
pub fn strip_box(n: i64) -> LatticeBox {
    LatticeBox { t_lo: 0, t_hi: n, y_lo: -n, y_hi: n, margin: 0 }
}

/// Samples `trials` configurations, keeps those with `0 ↔ (N, 0)` inside the
/// strip, and tabulates the max cone-point gap and the pair statistic.
pub fn mass_gap_stats(p: f64, cone: ConeParams, n: i64, trials: u64, seed: u64) -> Result<MassGapStats> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::ConfigInvalid(format!("mass gap needs p in (0, 1/2), got {p}")));
    }
    let bx = strip_box(n);
    let chunk = 1u64 << 16;
    let chunks: Vec<u64> = (0..trials.div_ceil(chunk)).collect();
    let per_chunk: Vec<(Vec<Conditioned>, u64)> = chunks
        .par_iter()
        .map_init(
            || Explorer::new(bx),
            |ex, &c| {
                let mut out = Vec::new();
                let mut touches = 0;
                for stream in c * chunk..((c + 1) * chunk).min(trials) {
                    let rng = BondRng::new(seed, stream, p);
                    let info = ex.direct_cluster(&rng, (0, 0), EdgeSubset::TStrip(0, n), true);
                    if !ex.visited(n, 0) {
                        continue;
                    }
                    touches += info.touched as u64;
                    let cones = cone_points(&ex.members, (0, 0), (n, 0), cone);
                    out.push(Conditioned {
                        max_gap: max_cone_gap(&cones, (0, 0), (n, 0)),
                        cone_ts: cones.iter().map(|c| c.0).collect(),
                    });
                }
                (out, touches)
            },
        )
        .collect();
    let mut histogram = vec![0u64; n as usize + 1];
    let mut all = Vec::new();
    let mut frontier_touches = 0;
    for (v, t) in per_chunk {
        frontier_touches += t;
        all.extend(v);
    }
    for c in &all {
        histogram[c.max_gap as usize] += 1;
    }
    let conditioned = all.len() as u64;
    let mut tail = vec![0.0; n as usize + 1];
    let mut acc = 0u64;
    for g in (0..=n as usize).rev() {
        acc += histogram[g];
        tail[g] = if conditioned > 0 { acc as f64 / conditioned as f64 } else { 0.0 };
    }
    let mut pairs = 0;
    let mut few = 0;
    for pair in all.chunks_exact(2) {
        pairs += 1;
        let a: std::collections::BTreeSet<i64> = pair[0].cone_ts.iter().copied().collect();
        let shared = pair[1].cone_ts.iter().filter(|t| a.contains(t)).count();
        few += (shared < 2) as u64;
    }
    Ok(MassGapStats {
        p,
        n,
        cone,
        seed,
        trials,
        conditioned,
        histogram,
        tail,
        frontier_touches,
        pairs,
        pairs_few_cone_cut_lines: few,
    })
}
