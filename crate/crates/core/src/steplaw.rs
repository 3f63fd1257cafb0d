//! Finite-support step distributions.
//!
//! [`StepLaw1D`] drives the difference walk `Z`, [`StepLaw3D`] drives the
//! coupled walk `S = (T, V, X)` with steps `σ = (ρ, ξ¹, ξ²)`, and
//! [`BoundaryLaw`] describes the initial and terminal pieces `σ_b`, `σ_f`.
//! Laws are immutable once built.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::{parse_rational, rational_to_f64, Rational, Weight};

/// Probabilities must sum to one within this bound.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Symmetry checks compare probabilities up to a few ulps.
pub const SYMMETRY_TOLERANCE: f64 = 1e-15;
/// Mass dropped when truncating an infinite-support law.
pub const DEFAULT_TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation found (0 when the check passed cleanly).
    pub violation: f64,
    pub worst_point: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub law: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

fn mass_check(probs: &[f64]) -> CheckResult {
    let total: f64 = probs.iter().sum();
    let negative = probs.iter().any(|&p| p < 0.0 || !p.is_finite());
    let violation = (total - 1.0).abs();
    CheckResult {
        name: "mass".into(),
        passed: !negative && violation <= MASS_TOLERANCE,
        violation,
        worst_point: None,
    }
}

/// Law of the increments of the one-dimensional difference walk.
#[derive(Debug, Clone, Serialize)]
pub struct StepLaw1D {
    pub name: String,
    points: Vec<i64>,
    probs: Vec<f64>,
    #[serde(skip)]
    exact: Option<Vec<Rational>>,
    /// When set, `validate` verifies `P(v) = P(-v)`.
    pub symmetric: bool,
    pub truncated_mass: f64,
}

impl StepLaw1D {
    pub fn new(name: impl Into<String>, support: impl IntoIterator<Item = (i64, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
        for (v, p) in support {
            *merged.entry(v).or_insert(0.0) += p;
        }
        merged.retain(|_, p| *p != 0.0);
        if merged.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        Ok(Self {
            name: name.into(),
            points: merged.keys().copied().collect(),
            probs: merged.values().copied().collect(),
            exact: None,
            symmetric: false,
            truncated_mass: 0.0,
        })
    }

    pub fn exact(name: impl Into<String>, support: impl IntoIterator<Item = (i64, Rational)>) -> Result<Self> {
        let mut merged: BTreeMap<i64, Rational> = BTreeMap::new();
        for (v, p) in support {
            *merged.entry(v).or_insert_with(|| Rational::from_integer(0)) += p;
        }
        merged.retain(|_, p| *p != Rational::from_integer(0));
        if merged.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        Ok(Self {
            name: name.into(),
            points: merged.keys().copied().collect(),
            probs: merged.values().map(|&r| rational_to_f64(r)).collect(),
            exact: Some(merged.values().copied().collect()),
            symmetric: false,
            truncated_mass: 0.0,
        })
    }

    pub fn with_symmetry(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn points(&self) -> &[i64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.points.iter().copied().zip(self.probs.iter().copied())
    }

    /// `(value, weight)` pairs in the requested arithmetic.
    pub fn weights<W: Weight>(&self) -> Result<Vec<(i64, W)>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let exact = self.exact.as_ref().map(|e| e[i]);
                W::from_prob(self.probs[i], exact)
                    .map(|w| (v, w))
                    .ok_or_else(|| Error::NoExactWeights(self.name.clone()))
            })
            .collect()
    }

    pub fn prob(&self, v: i64) -> f64 {
        match self.points.binary_search(&v) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn min_step(&self) -> i64 {
        self.points[0]
    }

    pub fn max_step(&self) -> i64 {
        *self.points.last().unwrap()
    }

    pub fn max_abs_step(&self) -> i64 {
        self.min_step().abs().max(self.max_step().abs())
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = vec![mass_check(&self.probs)];
        if self.symmetric {
            let mut worst = 0.0f64;
            let mut worst_point = None;
            for (v, p) in self.support() {
                let d = (p - self.prob(-v)).abs();
                if d > worst {
                    worst = d;
                    worst_point = Some(vec![v.abs()]);
                }
            }
            checks.push(CheckResult {
                name: "symmetry".into(),
                passed: worst <= SYMMETRY_TOLERANCE,
                violation: worst,
                worst_point,
            });
        }
        ValidationReport { law: self.name.clone(), checks }
    }

    pub fn moments(&self) -> Moments {
        let mean: f64 = self.support().map(|(v, p)| v as f64 * p).sum();
        let var: f64 = self.support().map(|(v, p)| (v as f64 - mean).powi(2) * p).sum();
        Moments { mean: vec![mean], cov: vec![vec![var]] }
    }
}

/// A point `(t, v, x)` of the coupled step `σ = (ρ, ξ¹, ξ²)`.
pub type Step3 = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub lambda_t: f64,
    /// Applied to both lateral coordinates.
    pub lambda_x: f64,
}

impl TiltParams {
    pub const ZERO: TiltParams = TiltParams { lambda_t: 0.0, lambda_x: 0.0 };

    pub fn new(lambda_t: f64, lambda_x: f64) -> Self {
        Self { lambda_t, lambda_x }
    }

    pub fn norm(&self) -> f64 {
        self.lambda_t.hypot(self.lambda_x)
    }

    pub fn is_zero(&self) -> bool {
        self.lambda_t == 0.0 && self.lambda_x == 0.0
    }

    pub fn negate(&self) -> Self {
        Self { lambda_t: -self.lambda_t, lambda_x: -self.lambda_x }
    }
}

/// Default tilt radius `κ`.
pub const DEFAULT_TILT_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct StepLaw3D {
    pub name: String,
    points: Vec<Step3>,
    probs: Vec<f64>,
    #[serde(skip)]
    exact: Option<Vec<Rational>>,
    /// Cone slope `α` of the range condition `|v|, |x| < α t`.
    pub alpha: f64,
    /// Exponential tail rate `β` of `ρ`.
    pub beta: f64,
    /// Prefactor `C` in `P(ρ > t) <= C e^{-β t}`.
    pub tail_const: f64,
    pub truncated_mass: f64,
}

fn merge3<P: Copy + std::ops::AddAssign>(support: impl IntoIterator<Item = (Step3, P)>) -> BTreeMap<Step3, P> {
    let mut merged: BTreeMap<Step3, P> = BTreeMap::new();
    for (s, p) in support {
        match merged.get_mut(&s) {
            Some(q) => *q += p,
            None => {
                merged.insert(s, p);
            }
        }
    }
    merged
}

impl StepLaw3D {
    pub fn new(
        name: impl Into<String>,
        support: impl IntoIterator<Item = (Step3, f64)>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let mut merged = merge3(support);
        merged.retain(|_, p| *p != 0.0);
        if merged.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        Ok(Self {
            name: name.into(),
            points: merged.keys().copied().collect(),
            probs: merged.values().copied().collect(),
            exact: None,
            alpha,
            beta,
            tail_const: 1.0,
            truncated_mass: 0.0,
        })
    }

    pub fn exact(
        name: impl Into<String>,
        support: impl IntoIterator<Item = (Step3, Rational)>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let mut merged = merge3(support);
        merged.retain(|_, p| *p != Rational::from_integer(0));
        if merged.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        Ok(Self {
            name: name.into(),
            points: merged.keys().copied().collect(),
            probs: merged.values().map(|&r| rational_to_f64(r)).collect(),
            exact: Some(merged.values().copied().collect()),
            alpha,
            beta,
            tail_const: 1.0,
            truncated_mass: 0.0,
        })
    }

    pub fn with_tail_const(mut self, c: f64) -> Self {
        self.tail_const = c;
        self
    }

    pub fn points(&self) -> &[Step3] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn support(&self) -> impl Iterator<Item = (Step3, f64)> + '_ {
        self.points.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn weights<W: Weight>(&self) -> Result<Vec<(Step3, W)>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let exact = self.exact.as_ref().map(|e| e[i]);
                W::from_prob(self.probs[i], exact)
                    .map(|w| (s, w))
                    .ok_or_else(|| Error::NoExactWeights(self.name.clone()))
            })
            .collect()
    }

    pub fn prob(&self, s: Step3) -> f64 {
        match self.points.binary_search(&s) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn max_time(&self) -> i64 {
        self.points.iter().map(|s| s[0]).max().unwrap()
    }

    pub fn min_time(&self) -> i64 {
        self.points.iter().map(|s| s[0]).min().unwrap()
    }

    pub fn max_lateral(&self) -> i64 {
        self.points.iter().map(|s| s[1].abs().max(s[2].abs())).max().unwrap()
    }

    /// Time-reversed walk `σ̂ = (ρ, -ξ¹, -ξ²)`.
    pub fn reversed(&self) -> StepLaw3D {
        let exact = self.exact.clone();
        let mut pairs: Vec<(Step3, f64, Option<Rational>)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, s)| ([s[0], -s[1], -s[2]], self.probs[i], exact.as_ref().map(|e| e[i])))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        StepLaw3D {
            name: format!("{}-reversed", self.name),
            points: pairs.iter().map(|p| p.0).collect(),
            probs: pairs.iter().map(|p| p.1).collect(),
            exact: exact.map(|_| pairs.iter().map(|p| p.2.unwrap()).collect()),
            alpha: self.alpha,
            beta: self.beta,
            tail_const: self.tail_const,
            truncated_mass: self.truncated_mass,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = vec![mass_check(&self.probs)];

        // (P1) range inside the open cone.
        let mut worst = 0.0f64;
        let mut worst_point = None;
        let mut ok = true;
        for &s in &self.points {
            let bound = self.alpha * s[0] as f64;
            let excess = (s[1].abs().max(s[2].abs()) as f64) - bound;
            if s[0] < 1 || excess >= 0.0 {
                ok = false;
                if excess >= worst || worst_point.is_none() {
                    worst = excess.max(0.0);
                    worst_point = Some(s.to_vec());
                }
            }
        }
        checks.push(CheckResult { name: "cone".into(), passed: ok, violation: worst, worst_point });

        // (P2) exponential tail of ρ.
        let t_max = self.max_time();
        let mut worst = 0.0f64;
        let mut worst_point = None;
        for t in 0..=t_max {
            let tail: f64 = self.support().filter(|(s, _)| s[0] > t).map(|(_, p)| p).sum();
            let excess = tail - self.tail_const * (-self.beta * t as f64).exp();
            if excess > worst {
                worst = excess;
                worst_point = Some(vec![t]);
            }
        }
        checks.push(CheckResult {
            name: "tail".into(),
            passed: worst <= MASS_TOLERANCE,
            violation: worst,
            worst_point,
        });

        // (P3) conditional lateral law invariant under axis reflections and the diagonal swap.
        let mut worst = 0.0f64;
        let mut worst_point = None;
        for (s, p) in self.support() {
            let [t, v, x] = s;
            for image in [[t, -v, x], [t, v, -x], [t, x, v]] {
                let d = (p - self.prob(image)).abs();
                if d > worst {
                    worst = d;
                    worst_point = Some(s.to_vec());
                }
            }
        }
        checks.push(CheckResult {
            name: "symmetry".into(),
            passed: worst <= SYMMETRY_TOLERANCE,
            violation: worst,
            worst_point,
        });

        ValidationReport { law: self.name.clone(), checks }
    }

    /// Mean vector and covariance of `(ρ, ξ¹, ξ²)`.
    pub fn moments(&self) -> Moments {
        let mut mean = [0.0f64; 3];
        for (s, p) in self.support() {
            for i in 0..3 {
                mean[i] += s[i] as f64 * p;
            }
        }
        let mut cov = vec![vec![0.0f64; 3]; 3];
        for (s, p) in self.support() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (s[i] as f64 - mean[i]) * (s[j] as f64 - mean[j]) * p;
                }
            }
        }
        Moments { mean: mean.to_vec(), cov }
    }

    /// Exponential tilt `P_λ(a,b,c) ∝ e^{λ_T a + λ_X (b+c)} P(a,b,c)`.
    pub fn tilt(&self, params: TiltParams) -> StepLaw3D {
        if params.is_zero() {
            return self.clone();
        }
        let raw: Vec<f64> = self
            .support()
            .map(|(s, p)| (params.lambda_t * s[0] as f64 + params.lambda_x * (s[1] + s[2]) as f64).exp() * p)
            .collect();
        let z: f64 = raw.iter().sum();
        StepLaw3D {
            name: format!("{}@tilt({},{})", self.name, params.lambda_t, params.lambda_x),
            points: self.points.clone(),
            probs: raw.iter().map(|w| w / z).collect(),
            exact: None,
            alpha: self.alpha,
            beta: self.beta,
            tail_const: self.tail_const,
            truncated_mass: self.truncated_mass,
        }
    }

    fn tilted_means(&self, params: TiltParams) -> (f64, f64, f64, f64) {
        // (E ρ, E (ξ¹+ξ²)/2, Var ρ, Var (ξ¹+ξ²)/2) under the tilt.
        let mut z = 0.0;
        let (mut m_t, mut m_x, mut s_t, mut s_x) = (0.0, 0.0, 0.0, 0.0);
        for (s, p) in self.support() {
            let lat = (s[1] + s[2]) as f64 / 2.0;
            let w = (params.lambda_t * s[0] as f64 + params.lambda_x * 2.0 * lat).exp() * p;
            z += w;
            m_t += w * s[0] as f64;
            m_x += w * lat;
            s_t += w * (s[0] as f64).powi(2);
            s_x += w * lat * lat;
        }
        m_t /= z;
        m_x /= z;
        (m_t, m_x, s_t / z - m_t * m_t, s_x / z - m_x * m_x)
    }

    /// Finds `λ` with `E_λ σ = target`, alternating per-coordinate bisection.
    pub fn solve_tilt(&self, target: [f64; 3], kappa: f64) -> Result<TiltParams> {
        const TOL: f64 = 1e-12;
        if (target[1] - target[2]).abs() > TOL {
            return Err(Error::TargetUnreachable {
                kappa,
                detail: format!("lateral targets differ: {} vs {}", target[1], target[2]),
            });
        }
        let (t_bar, x_bar) = (target[0], target[1]);
        let mut lam = TiltParams::ZERO;

        // Each sweep solves one coordinate exactly with the other held fixed.
        let solve_coord = |lam: TiltParams, coord: usize, goal: f64| -> Result<f64> {
            let eval = |l: f64| {
                let p = if coord == 0 { TiltParams::new(l, lam.lambda_x) } else { TiltParams::new(lam.lambda_t, l) };
                let m = self.tilted_means(p);
                if coord == 0 {
                    (m.0, m.2)
                } else {
                    (m.1, m.3)
                }
            };
            let (m0, var) = eval(if coord == 0 { lam.lambda_t } else { lam.lambda_x });
            if var <= 1e-300 {
                if (m0 - goal).abs() <= TOL {
                    return Ok(if coord == 0 { lam.lambda_t } else { lam.lambda_x });
                }
                return Err(Error::TargetUnreachable {
                    kappa,
                    detail: format!("coordinate {coord} is degenerate at {m0}, target {goal}"),
                });
            }
            let (mut lo, mut hi) = (-kappa, kappa);
            let (f_lo, f_hi) = (eval(lo).0, eval(hi).0);
            if goal < f_lo - TOL || goal > f_hi + TOL {
                return Err(Error::TargetUnreachable {
                    kappa,
                    detail: format!("coordinate {coord}: target {goal} outside [{f_lo}, {f_hi}]"),
                });
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval(mid).0 < goal {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        };

        for _ in 0..500 {
            lam.lambda_t = solve_coord(lam, 0, t_bar)?;
            lam.lambda_x = solve_coord(lam, 1, x_bar)?;
            let m = self.tilted_means(lam);
            if (m.0 - t_bar).abs() < TOL && (m.1 - x_bar).abs() < TOL {
                break;
            }
        }
        let m = self.tilted_means(lam);
        if (m.0 - t_bar).abs() >= 1e-10 || (m.1 - x_bar).abs() >= 1e-10 {
            return Err(Error::TargetUnreachable {
                kappa,
                detail: format!("no convergence: reached ({}, {})", m.0, m.1),
            });
        }
        if lam.norm() > kappa {
            return Err(Error::TargetUnreachable { kappa, detail: format!("|λ| = {} exceeds radius", lam.norm()) });
        }
        Ok(lam)
    }

    /// Marginal law of `ξ² − ξ¹`, the increment of `Z = X − V`.
    pub fn difference_law(&self) -> StepLaw1D {
        let symmetric = self.validate().check("symmetry").map(|c| c.passed).unwrap_or(false);
        let law = match &self.exact {
            Some(exact) => StepLaw1D::exact(
                format!("{}-diff", self.name),
                self.points.iter().zip(exact).map(|(s, &p)| (s[2] - s[1], p)),
            ),
            None => StepLaw1D::new(format!("{}-diff", self.name), self.support().map(|(s, p)| (s[2] - s[1], p))),
        };
        let mut law = law.expect("nonempty support maps to nonempty support");
        law.truncated_mass = self.truncated_mass;
        law.with_symmetry(symmetric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Initial,
    Terminal,
}

/// Law of an initial (`Q_b`) or terminal (`Q_f`) irreducible piece.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryLaw {
    pub name: String,
    pub kind: BoundaryKind,
    points: Vec<Step3>,
    probs: Vec<f64>,
    pub beta: f64,
    pub tail_const: f64,
}

impl BoundaryLaw {
    pub fn new(
        name: impl Into<String>,
        kind: BoundaryKind,
        support: impl IntoIterator<Item = (Step3, f64)>,
        beta: f64,
    ) -> Result<Self> {
        let mut merged = merge3(support);
        merged.retain(|_, p| *p != 0.0);
        if merged.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        Ok(Self {
            name: name.into(),
            kind,
            points: merged.keys().copied().collect(),
            probs: merged.values().copied().collect(),
            beta,
            tail_const: 1.0,
        })
    }

    /// Point mass at `(1, 0, 0)`: the boundary piece that adds one unit of time.
    pub fn identity(kind: BoundaryKind) -> Self {
        Self::point_mass(kind, [1, 0, 0])
    }

    pub fn point_mass(kind: BoundaryKind, at: Step3) -> Self {
        Self::new("identity", kind, [(at, 1.0)], 1.0).unwrap()
    }

    pub fn with_tail_const(mut self, c: f64) -> Self {
        self.tail_const = c;
        self
    }

    pub fn support(&self) -> impl Iterator<Item = (Step3, f64)> + '_ {
        self.points.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_time(&self) -> i64 {
        self.points.iter().map(|s| s[0]).min().unwrap()
    }

    pub fn max_time(&self) -> i64 {
        self.points.iter().map(|s| s[0]).max().unwrap()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = vec![mass_check(&self.probs)];
        let mut worst = 0.0f64;
        let mut worst_point = None;
        for t in 0..=self.max_time() {
            let tail: f64 = self.support().filter(|(s, _)| s[0] > t).map(|(_, p)| p).sum();
            let excess = tail - self.tail_const * (-self.beta * t as f64).exp();
            if excess > worst {
                worst = excess;
                worst_point = Some(vec![t]);
            }
        }
        checks.push(CheckResult {
            name: "tail".into(),
            passed: worst <= MASS_TOLERANCE,
            violation: worst,
            worst_point,
        });
        ValidationReport { law: self.name.clone(), checks }
    }
}

// ---------------------------------------------------------------------------
// Built-in laws

fn r(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

/// Lateral pairs uniform on `{-k..k}²`.
fn uniform_square(k: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for v in -k..=k {
        for x in -k..=k {
            out.push((v, x));
        }
    }
    out
}

pub fn srw() -> StepLaw1D {
    StepLaw1D::exact("srw", [(-1, r(1, 2)), (1, r(1, 2))]).unwrap().with_symmetry(true)
}

pub fn lazy() -> StepLaw1D {
    StepLaw1D::exact("lazy", [(-1, r(1, 4)), (0, r(1, 2)), (1, r(1, 4))]).unwrap().with_symmetry(true)
}

/// Symmetric law with ±2 jumps, so ladder heights are not skip-free.
pub fn jump2() -> StepLaw1D {
    StepLaw1D::exact("jump2", [(-2, r(1, 8)), (-1, r(3, 8)), (1, r(3, 8)), (2, r(1, 8))])
        .unwrap()
        .with_symmetry(true)
}

/// `ρ ≡ 1`, `(ξ¹, ξ²)` uniform on `{-1,0,1}²`.
pub fn uniform3() -> StepLaw3D {
    StepLaw3D::exact("uniform3", uniform_square(1).into_iter().map(|(v, x)| ([1, v, x], r(1, 9))), 2.0, 1.0).unwrap()
}

/// Difference law of [`uniform3`]: triangular on `{-2..2}`.
pub fn tri() -> StepLaw1D {
    let mut law = uniform3().difference_law();
    law.name = "tri".into();
    law
}

/// `ρ` geometric(1/2) truncated at mass [`DEFAULT_TRUNCATION`], lateral uniform on `{-1,0,1}²`.
pub fn geom3() -> StepLaw3D {
    geom3_truncated(DEFAULT_TRUNCATION)
}

pub fn geom3_truncated(mass_tol: f64) -> StepLaw3D {
    let mut t_max: i64 = 1;
    while 0.5f64.powi(t_max as i32) > mass_tol {
        t_max += 1;
    }
    let norm = r(1, 1) - r(1, 1i128 << t_max);
    let mut support = Vec::new();
    for t in 1..=t_max {
        let pt = r(1, 1i128 << t) / norm;
        for (v, x) in uniform_square(1) {
            support.push(([t, v, x], pt * r(1, 9)));
        }
    }
    let mut law = StepLaw3D::exact("geom3", support, 2.0, std::f64::consts::LN_2).unwrap();
    law.truncated_mass = 0.5f64.powi(t_max as i32);
    law
}

/// `ρ ∈ {1, 2}` equally likely; lateral uniform on `{-1,0,1}²` for `ρ = 1`
/// and on `{-2..2}²` for `ρ = 2`. Time and lateral motion are coupled.
pub fn mixed3() -> StepLaw3D {
    let mut support = Vec::new();
    for (v, x) in uniform_square(1) {
        support.push(([1, v, x], r(1, 18)));
    }
    for (v, x) in uniform_square(2) {
        support.push(([2, v, x], r(1, 50)));
    }
    StepLaw3D::exact("mixed3", support, 2.0, std::f64::consts::LN_2).unwrap()
}

/// Two-valued time law used by the tilt examples: `ρ ∈ {1, 2}`, no lateral motion.
pub fn two_time() -> StepLaw3D {
    StepLaw3D::exact("two_time", [([1, 0, 0], r(1, 2)), ([2, 0, 0], r(1, 2))], 2.0, std::f64::consts::LN_2).unwrap()
}

pub const BUILTIN_1D: &[&str] = &["srw", "lazy", "jump2", "tri"];
pub const BUILTIN_3D: &[&str] = &["uniform3", "geom3", "mixed3", "two_time"];

#[derive(Debug, Clone)]
pub enum AnyLaw {
    OneD(StepLaw1D),
    ThreeD(StepLaw3D),
    Boundary(BoundaryLaw),
}

pub fn builtin(name: &str) -> Option<AnyLaw> {
    Some(match name {
        "srw" => AnyLaw::OneD(srw()),
        "lazy" => AnyLaw::OneD(lazy()),
        "jump2" => AnyLaw::OneD(jump2()),
        "tri" => AnyLaw::OneD(tri()),
        "uniform3" => AnyLaw::ThreeD(uniform3()),
        "geom3" => AnyLaw::ThreeD(geom3()),
        "mixed3" => AnyLaw::ThreeD(mixed3()),
        "two_time" => AnyLaw::ThreeD(two_time()),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Law definition files

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbValue {
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawKind {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "3d")]
    ThreeD,
    Boundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub name: String,
    pub kind: LawKind,
    pub support: Vec<(Vec<i64>, ProbValue)>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub tail_const: Option<f64>,
    #[serde(default)]
    pub symmetric: Option<bool>,
    #[serde(default)]
    pub boundary_kind: Option<BoundaryKind>,
}

impl LawFile {
    pub fn into_law(self) -> Result<AnyLaw> {
        let dim = match self.kind {
            LawKind::OneD => 1,
            _ => 3,
        };
        let mut floats = Vec::new();
        let mut exact = Vec::new();
        let mut all_exact = true;
        for (point, prob) in &self.support {
            if point.len() != dim {
                return Err(Error::InvalidLaw(format!("point {point:?} should have {dim} coordinates")));
            }
            match prob {
                ProbValue::Float(p) => {
                    all_exact = false;
                    floats.push((point.clone(), *p));
                }
                ProbValue::Text(s) => {
                    let q = parse_rational(s).ok_or_else(|| Error::InvalidLaw(format!("cannot parse probability `{s}`")))?;
                    floats.push((point.clone(), rational_to_f64(q)));
                    exact.push((point.clone(), q));
                }
            }
        }
        let to3 = |p: &Vec<i64>| [p[0], p[1], p[2]];
        let alpha = self.alpha.unwrap_or(2.0);
        let beta = self.beta.unwrap_or(1.0);
        let tail_const = self.tail_const.unwrap_or(1.0);
        Ok(match self.kind {
            LawKind::OneD => {
                let law = if all_exact {
                    StepLaw1D::exact(self.name, exact.iter().map(|(p, q)| (p[0], *q)))?
                } else {
                    StepLaw1D::new(self.name, floats.iter().map(|(p, q)| (p[0], *q)))?
                };
                AnyLaw::OneD(law.with_symmetry(self.symmetric.unwrap_or(true)))
            }
            LawKind::ThreeD => {
                let law = if all_exact {
                    StepLaw3D::exact(self.name, exact.iter().map(|(p, q)| (to3(p), *q)), alpha, beta)?
                } else {
                    StepLaw3D::new(self.name, floats.iter().map(|(p, q)| (to3(p), *q)), alpha, beta)?
                };
                AnyLaw::ThreeD(law.with_tail_const(tail_const))
            }
            LawKind::Boundary => AnyLaw::Boundary(
                BoundaryLaw::new(
                    self.name,
                    self.boundary_kind.unwrap_or(BoundaryKind::Initial),
                    floats.iter().map(|(p, q)| (to3(p), *q)),
                    beta,
                )?
                .with_tail_const(tail_const),
            ),
        })
    }
}

pub fn load_law_file(path: &Path) -> Result<AnyLaw> {
    let text = std::fs::read_to_string(path)?;
    let file: LawFile = serde_json::from_str(&text)?;
    file.into_law()
}

/// Resolves a built-in name or a path to a law definition file.
pub fn resolve_law(spec: &str) -> Result<AnyLaw> {
    if let Some(law) = builtin(spec) {
        return Ok(law);
    }
    let path = Path::new(spec);
    if path.exists() {
        return load_law_file(path);
    }
    Err(Error::UnknownLaw(spec.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simple_walk_passes_validation() {
        assert!(srw().validate().passed());
        assert!(lazy().validate().passed());
        assert!(jump2().validate().passed());
    }

    #[test]
    fn asymmetric_law_fails_symmetry_at_one() {
        let law = StepLaw1D::new("skew", [(-1, 0.6), (1, 0.4)]).unwrap().with_symmetry(true);
        let report = law.validate();
        let sym = report.check("symmetry").unwrap();
        assert!(!sym.passed);
        assert_eq!(sym.worst_point, Some(vec![1]));
        assert!(report.check("mass").unwrap().passed);
    }

    #[test]
    fn cone_violation_is_reported() {
        let law = StepLaw3D::new("wide", [([1, 3, 0], 0.5), ([1, -3, 0], 0.5)], 2.0, 1.0).unwrap();
        let report = law.validate();
        let cone = report.check("cone").unwrap();
        assert!(!cone.passed);
        assert_eq!(cone.worst_point.as_ref().unwrap()[1].abs(), 3);
    }

    #[test]
    fn builtin_3d_laws_satisfy_conditions() {
        for law in [uniform3(), geom3(), mixed3()] {
            let report = law.validate();
            assert!(report.passed(), "{}: {:?}", law.name, report);
        }
        assert!(geom3().truncated_mass <= DEFAULT_TRUNCATION);
    }

    #[test]
    fn zero_tilt_is_identity() {
        let law = mixed3();
        let tilted = law.tilt(TiltParams::ZERO);
        for (a, b) in law.probs().iter().zip(tilted.probs()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn tilt_of_two_time_law() {
        let law = two_time();
        let tilted = law.tilt(TiltParams::new(std::f64::consts::LN_2, 0.0));
        // e^λ / (e^λ + e^{2λ}) with e^λ = 2.
        assert_abs_diff_eq!(tilted.prob([1, 0, 0]), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tilted.prob([2, 0, 0]), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tilt_round_trip() {
        let law = mixed3();
        let lam = TiltParams::new(0.3, -0.2);
        let back = law.tilt(lam).tilt(lam.negate());
        for (a, b) in law.probs().iter().zip(back.probs()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn solve_tilt_cases() {
        let law = two_time();
        let zero = law.solve_tilt([1.5, 0.0, 0.0], 1.0).unwrap();
        assert!(zero.norm() < 1e-10);
        // Closed form: mean (e^λ + 2 e^{2λ}) / (e^λ + e^{2λ}) = 5/3 at e^λ = 2.
        let lam = law.solve_tilt([5.0 / 3.0, 0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(lam.lambda_t, std::f64::consts::LN_2, epsilon = 1e-9);
        let lam = law.solve_tilt([4.0 / 3.0, 0.0, 0.0], 1.0).unwrap();
        assert_abs_diff_eq!(lam.lambda_t, -std::f64::consts::LN_2, epsilon = 1e-9);
        assert!(matches!(law.solve_tilt([1.99, 0.0, 0.0], 1.0), Err(Error::TargetUnreachable { .. })));
        assert!(matches!(law.solve_tilt([1.5, 0.1, 0.1], 1.0), Err(Error::TargetUnreachable { .. })));
    }

    #[test]
    fn solve_tilt_hits_target_on_coupled_law() {
        let law = mixed3();
        let target = [1.55, 0.05, 0.05];
        let lam = law.solve_tilt(target, 1.0).unwrap();
        let m = law.tilt(lam).moments();
        for i in 0..3 {
            assert!((m.mean[i] - target[i]).abs() < 1e-10, "{:?}", m.mean);
        }
    }

    #[test]
    fn difference_law_of_uniform3_is_triangular() {
        let z = uniform3().difference_law();
        let expected = [(-2, 1.0 / 9.0), (-1, 2.0 / 9.0), (0, 3.0 / 9.0), (1, 2.0 / 9.0), (2, 1.0 / 9.0)];
        for (v, p) in expected {
            assert_abs_diff_eq!(z.prob(v), p, epsilon = 1e-15);
        }
        assert!(z.symmetric);
        assert!(z.validate().passed());
        assert_abs_diff_eq!(z.moments().cov[0][0], 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_difference_law() {
        let law = StepLaw3D::new("still", [([1, 0, 0], 1.0)], 2.0, 1.0).unwrap();
        let z = law.difference_law();
        assert_eq!(z.points(), &[0]);
        assert_eq!(z.probs(), &[1.0]);
    }

    #[test]
    fn moments_of_simple_laws() {
        let m = srw().moments();
        assert_eq!(m.mean[0], 0.0);
        assert_eq!(m.cov[0][0], 1.0);
        assert_abs_diff_eq!(two_time().moments().mean[0], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn law_file_round_trip_exact() {
        let json = r#"{"name":"custom","kind":"1d","support":[[[-1],"1/3"],[[0],"1/3"],[[1],"1/3"]]}"#;
        let file: LawFile = serde_json::from_str(json).unwrap();
        match file.into_law().unwrap() {
            AnyLaw::OneD(law) => {
                assert!(law.has_exact());
                assert!(law.validate().passed());
            }
            _ => panic!("wrong kind"),
        }
        let bad = r#"{"name":"x","kind":"1d","support":[],"bogus":1}"#;
        assert!(serde_json::from_str::<LawFile>(bad).is_err());
    }

    #[test]
    fn reversed_negates_lateral() {
        let law = StepLaw3D::new("drift", [([1, 1, 0], 0.7), ([1, 0, 1], 0.3)], 2.0, 1.0).unwrap();
        let rev = law.reversed();
        assert_eq!(rev.prob([1, -1, 0]), 0.7);
        assert_eq!(rev.prob([1, 0, -1]), 0.3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tilt_preserves_support_and_mass(lt in -0.8f64..0.8, lx in -0.8f64..0.8) {
                let law = mixed3();
                let t = law.tilt(TiltParams::new(lt, lx));
                prop_assert_eq!(t.points(), law.points());
                let total: f64 = t.probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }

            #[test]
            fn difference_law_is_symmetric(lx in -0.8f64..0.8, lt in -0.5f64..0.5) {
                // The diagonal swap survives any tilt with λ_V = λ_X.
                let z = mixed3().tilt(TiltParams::new(lt, lx)).difference_law();
                for (v, p) in z.support() {
                    prop_assert!((p - z.prob(-v)).abs() < 1e-15);
                }
            }

            #[test]
            fn solve_then_moments_reproduces_target(t in 1.3f64..1.7, x in -0.2f64..0.2) {
                let law = mixed3();
                let lam = law.solve_tilt([t, x, x], 1.0);
                prop_assume!(lam.is_ok());
                let m = law.tilt(lam.unwrap()).moments();
                prop_assert!((m.mean[0] - t).abs() < 1e-10);
                prop_assert!((m.mean[1] - x).abs() < 1e-10);
                prop_assert!((m.mean[2] - x).abs() < 1e-10);
            }
        }
    }
}
