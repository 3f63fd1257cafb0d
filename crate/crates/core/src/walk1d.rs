//! Exact transition tables for the one-dimensional difference walk `Z`.
//!
//! Constraint convention: strict positivity is imposed at steps `1..=n`
//! (the start may sit at 0), weak nonnegativity at steps `0..=n`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::steplaw::StepLaw1D;
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    Free,
    StrictPositive,
    WeakNonnegative,
    /// `values[m][r] = P(Z_m = r, Z_m > Z_j for all j < m)`.
    StrictLadder,
}

impl WalkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WalkKind::Free => "free",
            WalkKind::StrictPositive => "strict_positive",
            WalkKind::WeakNonnegative => "weak_nonnegative",
            WalkKind::StrictLadder => "strict_ladder",
        }
    }
}

/// How to size the state window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowSpec {
    /// Target for the Hoeffding tail used to size automatic windows.
    pub leak_target: f64,
    /// Dropped mass above this raises [`Error::WindowTooSmall`].
    pub leak_bound: f64,
    pub explicit: Option<(i64, i64)>,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { leak_target: 1e-15, leak_bound: 1e-12, explicit: None }
    }
}

impl WindowSpec {
    pub fn explicit(z_min: i64, z_max: i64) -> Self {
        Self { explicit: Some((z_min, z_max)), ..Self::default() }
    }

    /// Full reachable range: never leaks.
    pub fn full() -> Self {
        Self { leak_target: 0.0, ..Self::default() }
    }
}

/// Window `[z_min, z_max]` for a walk started at `start` and run `n` steps.
pub fn auto_window(law: &StepLaw1D, kind: WalkKind, n: usize, start: i64, spec: &WindowSpec) -> (i64, i64) {
    let (lo_step, hi_step) = (law.min_step(), law.max_step());
    let mut lo = start + (n as i64) * lo_step.min(0);
    let mut hi = start + (n as i64) * hi_step.max(0);
    if let Some((a, b)) = spec.explicit {
        lo = a;
        hi = b;
    } else if spec.leak_target > 0.0 && n > 0 {
        let mean = law.moments().mean[0];
        let width = (hi_step - lo_step) as f64;
        // Hoeffding with a union bound over the n intermediate times.
        let dev = width * ((n as f64) * (2.0 * n as f64 / spec.leak_target).ln() / 2.0).sqrt();
        let drift = mean * n as f64;
        lo = lo.max(start + (drift.min(0.0) - dev).floor() as i64);
        hi = hi.min(start + (drift.max(0.0) + dev).ceil() as i64);
    }
    match kind {
        WalkKind::Free | WalkKind::StrictLadder => {}
        WalkKind::StrictPositive => lo = lo.max(start.min(1)),
        WalkKind::WeakNonnegative => lo = lo.max(start.min(0)),
    }
    lo = lo.min(start);
    hi = hi.max(start).max(lo);
    (lo, hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkTable<W = f64> {
    pub law: String,
    pub kind: WalkKind,
    pub n: usize,
    pub start: i64,
    pub z_min: i64,
    pub z_max: i64,
    /// Mass pushed outside the window over all steps; bounds the error of every entry.
    pub leak: f64,
    #[serde(skip)]
    values: Vec<Vec<W>>,
}

impl<W: Weight> WalkTable<W> {
    pub fn get(&self, k: usize, z: i64) -> W {
        if k > self.n || z < self.z_min || z > self.z_max {
            return W::zero();
        }
        self.values[k][(z - self.z_min) as usize]
    }

    pub fn row(&self, k: usize) -> &[W] {
        &self.values[k]
    }

    pub fn row_sum(&self, k: usize) -> W {
        let mut s = W::zero();
        for &v in &self.values[k] {
            s += v;
        }
        s
    }

    pub fn width(&self) -> usize {
        (self.z_max - self.z_min + 1) as usize
    }

    pub fn to_f64(&self) -> WalkTable<f64> {
        WalkTable {
            law: self.law.clone(),
            kind: self.kind,
            n: self.n,
            start: self.start,
            z_min: self.z_min,
            z_max: self.z_max,
            leak: self.leak,
            values: self.values.iter().map(|r| r.iter().map(|v| v.to_f64()).collect()).collect(),
        }
    }

    /// CSV with columns `k, z, value`, preceded by one `#` metadata line.
    pub fn write_csv<Wr: Write>(&self, mut out: Wr) -> Result<()> {
        writeln!(
            out,
            "# law={},kind={},window=[{};{}],leak={:e}",
            self.law,
            self.kind.as_str(),
            self.z_min,
            self.z_max,
            self.leak
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "z", "value"])?;
        for k in 0..=self.n {
            for (i, v) in self.values[k].iter().enumerate() {
                let f = v.to_f64();
                if f != 0.0 {
                    w.write_record(&[k.to_string(), (self.z_min + i as i64).to_string(), format!("{f:e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Forward DP for `Free`, `StrictPositive` and `WeakNonnegative` tables.
pub fn walk_table<W: Weight>(
    law: &StepLaw1D,
    kind: WalkKind,
    n: usize,
    start: i64,
    spec: &WindowSpec,
) -> Result<WalkTable<W>> {
    if kind == WalkKind::StrictLadder {
        return ladder_table(law, n, spec);
    }
    let steps = law.weights::<W>()?;
    let (z_min, z_max) = auto_window(law, kind, n, start, spec);
    let width = (z_max - z_min + 1) as usize;
    let alive = |z: i64| match kind {
        WalkKind::StrictPositive => z > 0,
        WalkKind::WeakNonnegative => z >= 0,
        _ => true,
    };

    let mut first = vec![W::zero(); width];
    if kind != WalkKind::WeakNonnegative || start >= 0 {
        first[(start - z_min) as usize] = W::one();
    }
    let mut values = vec![first];
    let mut leak = 0.0;
    for _ in 0..n {
        let old = values.last().unwrap();
        let mut new = vec![W::zero(); width];
        for (i, &v) in old.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            for &(s, p) in &steps {
                let j = i as i64 + s;
                if j >= 0 && (j as usize) < width {
                    new[j as usize] += v * p;
                } else if alive(z_min + j) {
                    leak += (v * p).to_f64();
                }
            }
        }
        for (i, v) in new.iter_mut().enumerate() {
            if !alive(z_min + i as i64) {
                *v = W::zero();
            }
        }
        values.push(new);
    }
    if leak > spec.leak_bound {
        return Err(Error::WindowTooSmall { leak, bound: spec.leak_bound });
    }
    Ok(WalkTable { law: law.name.clone(), kind, n, start, z_min, z_max, leak, values })
}

pub fn q_table<W: Weight>(law: &StepLaw1D, n: usize) -> Result<WalkTable<W>> {
    walk_table(law, WalkKind::Free, n, 0, &WindowSpec::default())
}

pub fn u_table<W: Weight>(law: &StepLaw1D, n: usize, start: i64) -> Result<WalkTable<W>> {
    walk_table(law, WalkKind::StrictPositive, n, start, &WindowSpec::default())
}

pub fn u0_table<W: Weight>(law: &StepLaw1D, n: usize) -> Result<WalkTable<W>> {
    walk_table(law, WalkKind::WeakNonnegative, n, 0, &WindowSpec::default())
}

/// Ladder masses `ℓ_m(r) = P(Z_m = r, Z_m > Z_j, j < m)` for `m ≤ n`, `r ≤ r_max`.
///
/// Shifting by `−r`, `ℓ_m(r) = b_m(−r)` with
/// `b_k(x) = P_x(Z_1..Z_{k−1} < 0, Z_k = 0)`, computed backwards in `k`.
/// Depth `r_max + n·max|step|` makes the table exact.
pub fn ladder_masses<W: Weight>(law: &StepLaw1D, n: usize, r_max: i64) -> Result<Vec<Vec<W>>> {
    let steps = law.weights::<W>()?;
    let depth = (r_max.max(0) + n as i64 * law.max_abs_step()) as usize;
    // b[k][d] stands for b_k(−d), d = 1..=depth; index 0 unused.
    let mut prev = vec![W::zero(); depth + 1];
    let mut out = vec![vec![W::zero(); r_max.max(0) as usize + 1]; n + 1];
    out[0][0] = W::one();
    for k in 1..=n {
        let mut cur = vec![W::zero(); depth + 1];
        for d in 1..=depth {
            let x = -(d as i64);
            let mut acc = W::zero();
            for &(s, p) in &steps {
                let y = x + s;
                if k == 1 {
                    if y == 0 {
                        acc += p;
                    }
                } else if y < 0 && (-y) as usize <= depth {
                    acc += p * prev[(-y) as usize];
                }
            }
            cur[d] = acc;
        }
        for r in 1..=r_max.max(0) as usize {
            out[k][r] = cur[r];
        }
        prev = cur;
    }
    Ok(out)
}

fn ladder_table<W: Weight>(law: &StepLaw1D, n: usize, spec: &WindowSpec) -> Result<WalkTable<W>> {
    let (_, z_max) = auto_window(law, WalkKind::Free, n, 0, spec);
    let z_max = z_max.max(0);
    let masses = ladder_masses::<W>(law, n, z_max)?;
    Ok(WalkTable {
        law: law.name.clone(),
        kind: WalkKind::StrictLadder,
        n,
        start: 0,
        z_min: 0,
        z_max,
        leak: 0.0,
        values: masses,
    })
}

/// Forward DP over `(position, running max)`; only for short horizons.
pub fn ladder_mass_running_max<W: Weight>(law: &StepLaw1D, m: usize, r: i64) -> Result<W> {
    if m == 0 {
        return Ok(if r == 0 { W::one() } else { W::zero() });
    }
    let steps = law.weights::<W>()?;
    let mut states: BTreeMap<(i64, i64), W> = BTreeMap::new();
    states.insert((0, 0), W::one());
    for _ in 1..m {
        let mut next: BTreeMap<(i64, i64), W> = BTreeMap::new();
        for (&(z, mx), &v) in &states {
            for &(s, p) in &steps {
                let y = z + s;
                *next.entry((y, mx.max(y))).or_insert_with(W::zero) += v * p;
            }
        }
        states = next;
    }
    let mut total = W::zero();
    for (&(z, mx), &v) in &states {
        for &(s, p) in &steps {
            if z + s == r && r > mx {
                total += v * p;
            }
        }
    }
    Ok(total)
}

/// `ℓ_m(r)` with its independent cross-checks.
#[derive(Debug, Clone, Serialize)]
pub struct LadderMass {
    pub value: f64,
    /// Running-max DP, available for `m ≤ 12`.
    pub running_max: Option<f64>,
    /// `u_m(r)`, equal to `ℓ_m(r)` by reading the path backwards.
    pub reversal: f64,
}

impl LadderMass {
    pub fn max_discrepancy(&self) -> f64 {
        let a = (self.value - self.reversal).abs();
        let b = self.running_max.map_or(0.0, |v| (v - self.value).abs());
        a.max(b)
    }
}

pub fn ladder_mass(law: &StepLaw1D, m: usize, r: i64) -> Result<LadderMass> {
    let value = if r >= 1 || (m == 0 && r == 0) { ladder_masses::<f64>(law, m, r.max(0))?[m][r.max(0) as usize] } else { 0.0 };
    let running_max = if m <= 12 { Some(ladder_mass_running_max::<f64>(law, m, r)?) } else { None };
    let reversal = if m == 0 { if r == 0 { 1.0 } else { 0.0 } } else { u_table::<f64>(law, m, 0)?.get(m, r) };
    Ok(LadderMass { value, running_max, reversal })
}

/// `E(N^>(z); Z_n = z)` for `z = 0..=z_max`, where `N^>(z)` counts strict
/// ladder epochs `m ≥ 0` with `Z_m < z`. Uses `Σ_m Σ_{r<z} ℓ_m(r) q_{n−m}(z−r)`.
pub fn ladder_count_expectations<W: Weight>(law: &StepLaw1D, n: usize, z_max: i64) -> Result<Vec<W>> {
    let ell = ladder_masses::<W>(law, n, z_max)?;
    let q = walk_table::<W>(law, WalkKind::Free, n, 0, &WindowSpec::default())?;
    let mut out = vec![W::zero(); z_max.max(0) as usize + 1];
    for z in 1..=z_max.max(0) {
        let mut acc = W::zero();
        for m in 0..=n {
            for r in 0..z {
                let l = ell[m][r as usize];
                if l.is_zero() {
                    continue;
                }
                acc += l * q.get(n - m, z - r);
            }
        }
        out[z as usize] = acc;
    }
    Ok(out)
}

pub fn ladder_count_expectation<W: Weight>(law: &StepLaw1D, n: usize, z: i64) -> Result<W> {
    if z < 1 {
        return Ok(W::zero());
    }
    Ok(ladder_count_expectations::<W>(law, n, z)?[z as usize])
}

/// Right side of the minimum decomposition
/// `u_n(w,z) = ū_n(z−w) + Σ_m Σ_{r=1}^{w−1} u_m(w−r) ū_{n−m}(z−r)`.
pub fn min_decomposition(u0: &WalkTable<f64>, u: &WalkTable<f64>, n: usize, w: i64, z: i64) -> f64 {
    let mut total = u0.get(n, z - w);
    for m in 0..=n {
        for r in 1..w {
            total += u.get(m, w - r) * u0.get(n - m, z - r);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::{self, functional};
    use crate::steplaw::{jump2, lazy, srw, tri};
    use crate::weight::Rational;

    fn rat(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn q_table_examples() {
        let q = q_table::<Rational>(&srw(), 4).unwrap();
        assert_eq!(q.get(0, 0), rat(1, 1));
        assert_eq!(q.get(2, 0), rat(1, 2));
        assert_eq!(q.get(4, 2), rat(1, 4));
    }

    #[test]
    fn u_table_examples() {
        let law = srw();
        assert_eq!(u_table::<Rational>(&law, 1, 0).unwrap().get(1, 1), rat(1, 2));
        assert_eq!(u_table::<Rational>(&law, 4, 0).unwrap().get(4, 2), rat(1, 8));
        assert_eq!(u_table::<Rational>(&law, 3, 1).unwrap().get(3, 2), rat(1, 4));
    }

    #[test]
    fn u0_table_examples() {
        assert_eq!(u0_table::<Rational>(&srw(), 2).unwrap().get(2, 0), rat(1, 4));
        assert_eq!(u0_table::<Rational>(&lazy(), 1).unwrap().get(1, 0), rat(1, 2));
        assert_eq!(u0_table::<Rational>(&srw(), 1).unwrap().get(1, -1), rat(0, 1));
    }

    #[test]
    fn ladder_mass_examples() {
        let law = srw();
        let a = ladder_mass(&law, 1, 1).unwrap();
        assert_eq!(a.value, 0.5);
        let b = ladder_mass(&law, 3, 1).unwrap();
        assert_eq!(b.value, 0.125);
        assert_eq!(b.running_max, Some(0.125));
        assert!(b.max_discrepancy() < 1e-15);
    }

    #[test]
    fn ladder_mass_matches_u_table() {
        for law in [srw(), lazy(), jump2(), tri()] {
            let u = u_table::<f64>(&law, 40, 0).unwrap();
            let ell = ladder_masses::<f64>(&law, 40, 20).unwrap();
            for m in 1..=40 {
                for r in 1..=20 {
                    assert!((ell[m][r as usize] - u.get(m, r)).abs() < 1e-12, "{} m={m} r={r}", law.name);
                }
            }
            for m in 0..=8 {
                for r in 1..=6 {
                    let rm = ladder_mass_running_max::<Rational>(&law, m, r).unwrap();
                    let exact = ladder_masses::<Rational>(&law, m, 6).unwrap()[m][r as usize];
                    assert_eq!(rm, exact);
                }
            }
        }
    }

    #[test]
    fn ladder_count_expectation_examples() {
        let law = srw();
        assert_eq!(ladder_count_expectation::<Rational>(&law, 2, 2).unwrap(), rat(1, 2));
        let e6 = ladder_count_expectation::<Rational>(&law, 6, 2).unwrap();
        let u6 = u_table::<Rational>(&law, 6, 0).unwrap().get(6, 2);
        assert_eq!(e6, u6 * Rational::from_integer(6));
        let by_enum: Rational = enumerate::enumerate(&law, 6, |p| {
            functional::endpoint::<Rational>(p, 2) * Rational::from_integer(functional::strict_ladder_count(p, 2))
        })
        .unwrap();
        assert_eq!(e6, by_enum);
        assert_eq!(ladder_count_expectation::<Rational>(&law, 4, 5).unwrap(), rat(0, 1));
    }

    #[test]
    fn alili_doney_identity() {
        for law in [srw(), lazy(), jump2(), tri()] {
            for n in [1usize, 2, 5, 17, 60, 200] {
                let u = u_table::<f64>(&law, n, 0).unwrap();
                let z_max = u.z_max.min(60);
                let e = ladder_count_expectations::<f64>(&law, n, z_max).unwrap();
                for z in 1..=z_max {
                    let lhs = u.get(n, z);
                    let rhs = e[z as usize] / n as f64;
                    assert!((lhs - rhs).abs() < 1e-11, "{} n={n} z={z}: {lhs} vs {rhs}", law.name);
                }
            }
        }
    }

    #[test]
    fn ballot_exact_for_srw_and_bound_elsewhere() {
        let law = srw();
        let n = 150;
        let q = q_table::<f64>(&law, n).unwrap();
        let u = u_table::<f64>(&law, n, 0).unwrap();
        for k in 1..=n {
            for z in 1..=k as i64 {
                let b = z as f64 / k as f64 * q.get(k, z);
                assert!((u.get(k, z) - b).abs() < 1e-12);
            }
        }
        for law in [lazy(), jump2(), tri()] {
            let q = q_table::<f64>(&law, 100).unwrap();
            let u = u_table::<f64>(&law, 100, 0).unwrap();
            for k in 1..=100 {
                for z in 1..=u.z_max {
                    assert!(u.get(k, z) <= z as f64 / k as f64 * q.get(k, z) * (1.0 + 1e-12) + 1e-300);
                }
            }
        }
    }

    #[test]
    fn oracle_equivalence() {
        for law in [srw(), lazy(), jump2()] {
            let n = 8;
            let q = q_table::<Rational>(&law, n).unwrap();
            let u = u_table::<Rational>(&law, n, 0).unwrap();
            let u0 = u0_table::<Rational>(&law, n).unwrap();
            for z in -(2 * n as i64)..=(2 * n as i64) {
                let e_q: Rational = enumerate::enumerate(&law, n, |p| functional::endpoint(p, z)).unwrap();
                let e_u: Rational = enumerate::enumerate(&law, n, |p| functional::strict_positive_endpoint(p, z)).unwrap();
                let e_u0: Rational = enumerate::enumerate(&law, n, |p| functional::weak_nonnegative_endpoint(p, z)).unwrap();
                assert_eq!(q.get(n, z), e_q);
                assert_eq!(u.get(n, z), e_u);
                assert_eq!(u0.get(n, z), e_u0);
            }
        }
    }

    #[test]
    fn minimum_decomposition() {
        for law in [srw(), lazy(), jump2(), tri()] {
            let n = 60;
            let u0 = u0_table::<f64>(&law, n).unwrap();
            let u = u_table::<f64>(&law, n, 0).unwrap();
            for w in 1..=6 {
                let uw = u_table::<f64>(&law, n, w).unwrap();
                for z in w..=w + 12 {
                    let rhs = min_decomposition(&u0, &u, n, w, z);
                    assert!((uw.get(n, z) - rhs).abs() < 1e-10, "{} w={w} z={z}", law.name);
                }
            }
        }
    }

    #[test]
    fn constrained_rows_are_monotone() {
        let law = tri();
        for kind in [WalkKind::StrictPositive, WalkKind::WeakNonnegative] {
            let t = walk_table::<f64>(&law, kind, 80, 0, &WindowSpec::default()).unwrap();
            for k in 1..=80 {
                assert!(t.row_sum(k) <= t.row_sum(k - 1) + 1e-15);
            }
        }
    }

    #[test]
    fn small_window_is_rejected() {
        let err = walk_table::<f64>(&srw(), WalkKind::Free, 50, 0, &WindowSpec::explicit(-3, 3)).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall { .. }));
    }

    #[test]
    fn csv_export_has_metadata() {
        let t = q_table::<f64>(&srw(), 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# law=srw,kind=free"));
        assert!(text.contains("k,z,value"));
        assert!(text.contains("2,0,5e-1"));
    }

    mod props {
        use super::*;
        use crate::steplaw::StepLaw1D;
        use proptest::prelude::*;

        fn symmetric_law() -> impl Strategy<Value = StepLaw1D> {
            (0u32..5, 1u32..5, 0u32..4, 0u32..3).prop_map(|(a0, a1, a2, a3)| {
                let total = (a0 + 2 * (a1 + a2 + a3)) as i128;
                let mut pts = vec![(0i64, Rational::new(a0 as i128, total))];
                for (s, a) in [(1i64, a1), (2, a2), (3, a3)] {
                    pts.push((s, Rational::new(a as i128, total)));
                    pts.push((-s, Rational::new(a as i128, total)));
                }
                StepLaw1D::exact("random", pts).unwrap().with_symmetry(true)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn ad_identity_exact(law in symmetric_law(), n in 1usize..9) {
                let u = u_table::<Rational>(&law, n, 0).unwrap();
                let e = ladder_count_expectations::<Rational>(&law, n, u.z_max).unwrap();
                for z in 1..=u.z_max {
                    prop_assert_eq!(u.get(n, z) * Rational::from_integer(n as i128), e[z as usize]);
                }
            }

            #[test]
            fn a_priori_bound(law in symmetric_law(), n in 1usize..40) {
                let q = q_table::<f64>(&law, n).unwrap();
                let u = u_table::<f64>(&law, n, 0).unwrap();
                for z in 1..=u.z_max {
                    prop_assert!(u.get(n, z) <= z as f64 / n as f64 * q.get(n, z) * (1.0 + 1e-12));
                }
            }

            #[test]
            fn q_is_symmetric(law in symmetric_law(), n in 0usize..30, w in -5i64..5) {
                let q = q_table::<f64>(&law, n).unwrap();
                for z in -10i64..10 {
                    prop_assert!((q.get(n, z - w) - q.get(n, w - z)).abs() < 1e-15);
                }
            }

            #[test]
            fn minimum_decomposition_exact(law in symmetric_law(), n in 1usize..7, w in 1i64..4, dz in 0i64..5) {
                let u0 = u0_table::<f64>(&law, n).unwrap();
                let u = u_table::<f64>(&law, n, 0).unwrap();
                let uw = u_table::<f64>(&law, n, w).unwrap();
                let z = w + dz;
                prop_assert!((uw.get(n, z) - min_decomposition(&u0, &u, n, w, z)).abs() < 1e-12);
            }
        }
    }
}
