//! Exact DP for the coupled walk `S = (T, V, X)`.
//!
//! States are stored as dense lateral slabs over `(v, x)`, one slab per time
//! coordinate `t`. Step-count tables (`p`, `r`, `r̄`) advance one step at a
//! time; the fixed-horizon sum advances along `t` instead and sums over the
//! step count implicitly. Values at chosen endpoints can be probed after
//! every step so long runs never need to keep old layers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::renewal::RenewalTable;
use crate::steplaw::{BoundaryLaw, Step3, StepLaw3D};
use crate::weight::Weight;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind3 {
    /// Unconstrained `p_n`.
    FreeP,
    /// `r_n`: `X_k > V_k` for `k = 1..n` (and at `S_0^b`, `S_n^{bf}` with boundaries).
    ConstrainedR,
    /// `r̄_n`: `X_k ≥ V_k` for `k = 0..n`.
    ConstrainedR0,
    FixedHorizonSum,
}

impl Kind3 {
    fn alive(self, v: i64, x: i64) -> bool {
        match self {
            Kind3::FreeP => true,
            Kind3::ConstrainedR | Kind3::FixedHorizonSum => x > v,
            Kind3::ConstrainedR0 => x >= v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LateralWindow {
    pub v_lo: i64,
    pub v_hi: i64,
    pub x_lo: i64,
    pub x_hi: i64,
}

impl LateralWindow {
    pub fn nv(&self) -> usize {
        (self.v_hi - self.v_lo + 1) as usize
    }

    pub fn nx(&self) -> usize {
        (self.x_hi - self.x_lo + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.nv() * self.nx()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: i64, x: i64) -> bool {
        v >= self.v_lo && v <= self.v_hi && x >= self.x_lo && x <= self.x_hi
    }

    fn idx(&self, v: i64, x: i64) -> usize {
        (v - self.v_lo) as usize * self.nx() + (x - self.x_lo) as usize
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindowSpec3 {
    pub leak_target: f64,
    pub leak_bound: f64,
    pub explicit: Option<LateralWindow>,
}

impl Default for WindowSpec3 {
    fn default() -> Self {
        Self { leak_target: 1e-13, leak_bound: 1e-12, explicit: None }
    }
}

/// Chernoff radius: `P(max_{k≤n} ±Σξ ≥ a) ≤ target` for the lateral coordinate `coord`.
fn chernoff_radius(law: &StepLaw3D, coord: usize, n: usize, target: f64, sign: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let log_t = (target / (n as f64)).ln();
    let mut best = f64::INFINITY;
    let mut theta = 0.005;
    while theta < 20.0 {
        let m: f64 = law.support().map(|(s, p)| p * (sign * theta * s[coord] as f64).exp()).sum();
        let a = ((n as f64 * m.ln()).max(0.0) - log_t) / theta;
        best = best.min(a);
        theta *= 1.05;
    }
    best
}

fn boundary_extent(q: Option<&BoundaryLaw>, coord: usize) -> (i64, i64) {
    match q {
        None => (0, 0),
        Some(q) => {
            let lo = q.support().map(|(s, _)| s[coord]).min().unwrap();
            let hi = q.support().map(|(s, _)| s[coord]).max().unwrap();
            (lo.min(0), hi.max(0))
        }
    }
}

/// Lateral window for `n` steps from `(v0, x0)` with optional boundary pieces.
pub fn auto_window3(
    law: &StepLaw3D,
    n: usize,
    start: (i64, i64),
    q_b: Option<&BoundaryLaw>,
    q_f: Option<&BoundaryLaw>,
    spec: &WindowSpec3,
) -> LateralWindow {
    if let Some(w) = spec.explicit {
        return w;
    }
    let target = spec.leak_target / 4.0;
    let mut out = [0i64; 4];
    for (k, coord) in [1usize, 2].iter().enumerate() {
        let lo_step = law.points().iter().map(|s| s[*coord]).min().unwrap();
        let hi_step = law.points().iter().map(|s| s[*coord]).max().unwrap();
        let up = chernoff_radius(law, *coord, n, target, 1.0).ceil() as i64;
        let down = chernoff_radius(law, *coord, n, target, -1.0).ceil() as i64;
        let up = up.min(n as i64 * hi_step.max(0));
        let down = down.min(n as i64 * (-lo_step).max(0));
        let (b_lo, b_hi) = boundary_extent(q_b, *coord);
        let (f_lo, f_hi) = boundary_extent(q_f, *coord);
        let origin = if *coord == 1 { start.0 } else { start.1 };
        out[2 * k] = origin + b_lo + f_lo - down;
        out[2 * k + 1] = origin + b_hi + f_hi + up;
    }
    LateralWindow { v_lo: out[0], v_hi: out[1], x_lo: out[2], x_hi: out[3] }
}

/// Dense slab over a lateral window with a bounding box of possibly nonzero entries.
#[derive(Debug, Clone)]
pub struct Slab<W> {
    data: Vec<W>,
    bbox: Option<(i64, i64, i64, i64)>,
}

impl<W: Weight> Slab<W> {
    fn empty(win: &LateralWindow) -> Self {
        Self { data: vec![W::zero(); win.len()], bbox: None }
    }

    fn mass(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64()).sum()
    }

    fn add_point(&mut self, win: &LateralWindow, v: i64, x: i64, w: W) {
        self.data[win.idx(v, x)] += w;
        self.grow((v, v, x, x));
    }

    fn grow(&mut self, b: (i64, i64, i64, i64)) {
        self.bbox = Some(match self.bbox {
            None => b,
            Some(o) => (o.0.min(b.0), o.1.max(b.1), o.2.min(b.2), o.3.max(b.3)),
        });
    }

    pub fn get(&self, win: &LateralWindow, v: i64, x: i64) -> W {
        if !win.contains(v, x) {
            return W::zero();
        }
        self.data[win.idx(v, x)]
    }

    /// `self += w · shift(src, (db, dc))`; returns the mass pushed off the window.
    fn shift_add(&mut self, win: &LateralWindow, src: &Slab<W>, db: i64, dc: i64, w: W) -> f64 {
        let Some((v0, v1, x0, x1)) = src.bbox else { return 0.0 };
        let nx = win.nx();
        let mut leak = 0.0;
        let cx0 = x0.max(win.x_lo - dc);
        let cx1 = x1.min(win.x_hi - dc);
        let mut touched = false;
        for v in v0..=v1 {
            let row = (v - win.v_lo) as usize * nx;
            let tv = v + db;
            if tv < win.v_lo || tv > win.v_hi {
                for x in x0..=x1 {
                    leak += (w * src.data[row + (x - win.x_lo) as usize]).to_f64();
                }
                continue;
            }
            for x in x0..cx0.min(x1 + 1) {
                leak += (w * src.data[row + (x - win.x_lo) as usize]).to_f64();
            }
            for x in (cx1 + 1).max(x0)..=x1 {
                leak += (w * src.data[row + (x - win.x_lo) as usize]).to_f64();
            }
            if cx0 > cx1 {
                continue;
            }
            touched = true;
            let trow = (tv - win.v_lo) as usize * nx;
            let s = &src.data[row + (cx0 - win.x_lo) as usize..=row + (cx1 - win.x_lo) as usize];
            let d0 = trow + (cx0 + dc - win.x_lo) as usize;
            let d = &mut self.data[d0..d0 + s.len()];
            for (dst, &val) in d.iter_mut().zip(s) {
                *dst += w * val;
            }
        }
        if touched {
            let nv0 = (v0 + db).max(win.v_lo);
            let nv1 = (v1 + db).min(win.v_hi);
            self.grow((nv0, nv1, cx0 + dc, cx1 + dc));
        }
        leak
    }

    fn kill(&mut self, win: &LateralWindow, kind: Kind3) {
        if kind == Kind3::FreeP {
            return;
        }
        let Some((v0, v1, x0, x1)) = self.bbox else { return };
        let nx = win.nx();
        for v in v0..=v1 {
            let row = (v - win.v_lo) as usize * nx;
            let last = match kind {
                Kind3::ConstrainedR0 => v - 1,
                _ => v,
            }
            .min(x1);
            for x in x0..=last {
                self.data[row + (x - win.x_lo) as usize] = W::zero();
            }
        }
        // x > v (or ≥) bounds the surviving box from below.
        let shift = if kind == Kind3::ConstrainedR0 { 0 } else { 1 };
        let nx0 = x0.max(v0 + shift);
        if nx0 > x1 {
            self.bbox = None;
        } else {
            self.bbox = Some((v0, v1.min(x1 - shift), nx0, x1));
        }
    }
}

/// All slabs at one step count, indexed by the time coordinate.
#[derive(Debug, Clone)]
pub struct Layer<W> {
    pub t_lo: i64,
    slabs: Vec<Option<Slab<W>>>,
}

impl<W: Weight> Layer<W> {
    fn new(t_lo: i64, t_hi: i64) -> Self {
        Self { t_lo, slabs: vec![None; (t_hi - t_lo + 1).max(0) as usize] }
    }

    pub fn t_hi(&self) -> i64 {
        self.t_lo + self.slabs.len() as i64 - 1
    }

    pub fn slab(&self, t: i64) -> Option<&Slab<W>> {
        if t < self.t_lo || t > self.t_hi() {
            return None;
        }
        self.slabs[(t - self.t_lo) as usize].as_ref()
    }

    fn slab_mut(&mut self, win: &LateralWindow, t: i64) -> &mut Slab<W> {
        let i = (t - self.t_lo) as usize;
        self.slabs[i].get_or_insert_with(|| Slab::empty(win))
    }

    pub fn get(&self, win: &LateralWindow, t: i64, v: i64, x: i64) -> W {
        self.slab(t).map_or(W::zero(), |s| s.get(win, v, x))
    }

    pub fn mass(&self) -> f64 {
        self.slabs.iter().flatten().map(|s| s.mass()).sum()
    }

    pub fn times(&self) -> impl Iterator<Item = i64> + '_ {
        self.slabs.iter().enumerate().filter(|(_, s)| s.is_some()).map(move |(i, _)| self.t_lo + i as i64)
    }
}

/// Law of the time coordinate after each step; drives the `t` window.
struct TimeWindows {
    pmf_lo: i64,
    pmf: Vec<f64>,
    rho: Vec<(i64, f64)>,
    tail: f64,
}

impl TimeWindows {
    fn new(law: &StepLaw3D, initial: &[(i64, f64)], tail: f64) -> Self {
        let mut rho: std::collections::BTreeMap<i64, f64> = Default::default();
        for (s, p) in law.support() {
            *rho.entry(s[0]).or_insert(0.0) += p;
        }
        let lo = initial.iter().map(|x| x.0).min().unwrap();
        let hi = initial.iter().map(|x| x.0).max().unwrap();
        let mut pmf = vec![0.0; (hi - lo + 1) as usize];
        for &(t, p) in initial {
            pmf[(t - lo) as usize] += p;
        }
        Self { pmf_lo: lo, pmf, rho: rho.into_iter().collect(), tail }
    }

    fn advance(&mut self) {
        let (a_lo, a_hi) = (self.rho[0].0, self.rho.last().unwrap().0);
        let mut next = vec![0.0; self.pmf.len() + (a_hi - a_lo) as usize];
        for (i, &m) in self.pmf.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(a, p) in &self.rho {
                next[i + (a - a_lo) as usize] += m * p;
            }
        }
        self.pmf_lo += a_lo;
        // Drop negligible tails to keep the vector short.
        let cut = 1e-300;
        let first = next.iter().position(|&m| m > cut).unwrap_or(0);
        let last = next.iter().rposition(|&m| m > cut).unwrap_or(0);
        self.pmf_lo += first as i64;
        self.pmf = next[first..=last].to_vec();
    }

    fn range(&self) -> (i64, i64) {
        let mut acc = 0.0;
        let mut lo = 0;
        for (i, &m) in self.pmf.iter().enumerate() {
            if acc + m > self.tail {
                lo = i;
                break;
            }
            acc += m;
        }
        let mut acc = 0.0;
        let mut hi = self.pmf.len() - 1;
        for (i, &m) in self.pmf.iter().enumerate().rev() {
            if acc + m > self.tail {
                hi = i;
                break;
            }
            acc += m;
        }
        (self.pmf_lo + lo as i64, self.pmf_lo + hi.max(lo) as i64)
    }
}

/// One DP step: convolve `old` with `steps`, drop out-of-window mass into `leak`, kill.
fn step_layer<W: Weight>(
    old: &Layer<W>,
    steps: &[(Step3, W)],
    win: &LateralWindow,
    t_range: (i64, i64),
    kind: Kind3,
    leak: &mut f64,
) -> Layer<W> {
    let mut new = Layer::new(t_range.0, t_range.1);
    for t in old.times().collect::<Vec<_>>() {
        let src = old.slab(t).unwrap();
        if src.bbox.is_none() {
            continue;
        }
        let mut mass = None;
        for &(s, p) in steps {
            let t2 = t + s[0];
            if t2 < t_range.0 || t2 > t_range.1 {
                let m = *mass.get_or_insert_with(|| src.mass());
                *leak += m * p.to_f64();
                continue;
            }
            *leak += new.slab_mut(win, t2).shift_add(win, src, s[1], s[2], p);
        }
    }
    for s in new.slabs.iter_mut().flatten() {
        s.kill(win, kind);
    }
    new
}

/// Endpoint evaluation, optionally through the terminal piece `Q_f`.
fn probe_value<W: Weight>(
    layer: &Layer<W>,
    win: &LateralWindow,
    q_f: Option<&[(Step3, W)]>,
    kind: Kind3,
    at: Step3,
) -> W {
    let [t, u, y] = at;
    match q_f {
        None => layer.get(win, t, u, y),
        Some(q) => {
            if !kind.alive(u, y) {
                return W::zero();
            }
            let mut acc = W::zero();
            for &(s, w) in q {
                acc += w * layer.get(win, t - s[0], u - s[1], y - s[2]);
            }
            acc
        }
    }
}

fn boundary_weights<W: Weight>(q: &BoundaryLaw) -> Vec<(Step3, W)> {
    q.support().map(|(s, p)| (s, W::from_prob(p, None).unwrap_or_else(|| W::from_prob(p, Some(f64_to_rational(p))).unwrap()))).collect()
}

fn f64_to_rational(p: f64) -> crate::weight::Rational {
    // Boundary laws are float-valued; exact mode sees the binary value.
    let denom: i128 = 1 << 52;
    crate::weight::Rational::new((p * denom as f64).round() as i128, denom)
}

/// Step-count DP specification.
#[derive(Debug, Clone)]
pub struct CoupledSpec<'a> {
    pub law: &'a StepLaw3D,
    pub kind: Kind3,
    pub n: usize,
    pub start: (i64, i64),
    pub q_b: Option<&'a BoundaryLaw>,
    pub q_f: Option<&'a BoundaryLaw>,
    pub window: WindowSpec3,
    /// Endpoints `(t, u, y)` read after every step.
    pub probes: Vec<Step3>,
    /// Keep every layer (small `n` only).
    pub keep_layers: bool,
}

impl<'a> CoupledSpec<'a> {
    pub fn new(law: &'a StepLaw3D, kind: Kind3, n: usize, start: (i64, i64)) -> Self {
        Self {
            law,
            kind,
            n,
            start,
            q_b: None,
            q_f: None,
            window: WindowSpec3::default(),
            probes: Vec::new(),
            keep_layers: false,
        }
    }

    pub fn with_boundaries(mut self, q_b: Option<&'a BoundaryLaw>, q_f: Option<&'a BoundaryLaw>) -> Self {
        self.q_b = q_b;
        self.q_f = q_f;
        self
    }

    pub fn with_probes(mut self, probes: Vec<Step3>) -> Self {
        self.probes = probes;
        self
    }

    pub fn keep_layers(mut self) -> Self {
        self.keep_layers = true;
        self
    }

    pub fn with_window(mut self, window: WindowSpec3) -> Self {
        self.window = window;
        self
    }

    pub fn run<W: Weight>(&self) -> Result<CoupledTable<W>> {
        let steps = self.law.weights::<W>()?;
        let win = auto_window3(self.law, self.n, self.start, self.q_b, self.q_f, &self.window);
        let (v0, x0) = self.start;
        let initial: Vec<(Step3, W)> = match self.q_b {
            None => vec![([0, 0, 0], W::one())],
            Some(q) => boundary_weights(q),
        };
        let init_f: Vec<(i64, f64)> = initial.iter().map(|(s, w)| (s[0], w.to_f64())).collect();
        let tail = self.window.leak_target / (4.0 * (self.n as f64 + 2.0));
        let mut tw = TimeWindows::new(self.law, &init_f, tail);
        let (t_lo, t_hi) = (init_f.iter().map(|x| x.0).min().unwrap(), init_f.iter().map(|x| x.0).max().unwrap());
        let mut layer = Layer::new(t_lo, t_hi);
        let mut leak = 0.0;
        for &(s, w) in &initial {
            let (v, x) = (v0 + s[1], x0 + s[2]);
            // The bare start is unconstrained for r; S_0^b is constrained.
            let checked = self.q_b.is_some() || self.kind == Kind3::ConstrainedR0;
            if checked && !self.kind.alive(v, x) {
                continue;
            }
            if !win.contains(v, x) {
                leak += w.to_f64();
                continue;
            }
            layer.slab_mut(&win, s[0]).add_point(&win, v, x, w);
        }
        let q_f: Option<Vec<(Step3, W)>> = self.q_f.map(boundary_weights);
        let mut probe_values = Vec::with_capacity(self.n + 1);
        let read = |layer: &Layer<W>| -> Vec<W> {
            self.probes.iter().map(|&p| probe_value(layer, &win, q_f.as_deref(), self.kind, p)).collect()
        };
        probe_values.push(read(&layer));
        let mut layers = Vec::new();
        for _ in 0..self.n {
            tw.advance();
            let next = step_layer(&layer, &steps, &win, tw.range(), self.kind, &mut leak);
            if self.keep_layers {
                layers.push(std::mem::replace(&mut layer, next));
            } else {
                layer = next;
            }
            probe_values.push(read(&layer));
        }
        if leak > self.window.leak_bound {
            return Err(Error::WindowTooSmall { leak, bound: self.window.leak_bound });
        }
        let layer = match &q_f {
            None => layer,
            Some(q) => {
                let (r_lo, r_hi) = (
                    q.iter().map(|x| x.0[0]).min().unwrap(),
                    q.iter().map(|x| x.0[0]).max().unwrap(),
                );
                let range = (layer.t_lo + r_lo, layer.t_hi() + r_hi);
                step_layer(&layer, q, &win, range, self.kind, &mut leak)
            }
        };
        layers.push(layer);
        Ok(CoupledTable {
            law: self.law.name.clone(),
            kind: self.kind,
            n: self.n,
            start: self.start,
            window: win,
            leak,
            probes: self.probes.clone(),
            probe_values,
            layers,
            has_terminal: self.q_f.is_some(),
            all_layers: self.keep_layers,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CoupledTable<W = f64> {
    pub law: String,
    pub kind: Kind3,
    pub n: usize,
    pub start: (i64, i64),
    pub window: LateralWindow,
    pub leak: f64,
    pub probes: Vec<Step3>,
    /// `probe_values[k][i]`: probe `i` after `k` steps (through `Q_f` when present).
    pub probe_values: Vec<Vec<W>>,
    layers: Vec<Layer<W>>,
    has_terminal: bool,
    all_layers: bool,
}

impl<W: Weight> CoupledTable<W> {
    /// Final value at `(t, u, y)` after `n` steps (and `Q_f` when present).
    pub fn get(&self, t: i64, u: i64, y: i64) -> W {
        self.layers.last().unwrap().get(&self.window, t, u, y)
    }

    /// Value after `k` steps, before any terminal piece. Needs `keep_layers`.
    pub fn get_at(&self, k: usize, t: i64, u: i64, y: i64) -> W {
        assert!(self.all_layers, "layers were not kept");
        if k == self.n && self.has_terminal {
            panic!("final layer includes the terminal piece");
        }
        if k > self.n {
            return W::zero();
        }
        self.layers[k].get(&self.window, t, u, y)
    }

    pub fn final_layer(&self) -> &Layer<W> {
        self.layers.last().unwrap()
    }

    pub fn probe(&self, k: usize, i: usize) -> W {
        self.probe_values[k][i]
    }

    /// Nonzero entries `(t, v, x, value)` of the final layer.
    pub fn entries(&self) -> Vec<(i64, i64, i64, W)> {
        let layer = self.final_layer();
        let win = &self.window;
        let mut out = Vec::new();
        for t in layer.times() {
            let slab = layer.slab(t).unwrap();
            for v in win.v_lo..=win.v_hi {
                for x in win.x_lo..=win.x_hi {
                    let w = slab.get(win, v, x);
                    if !w.is_zero() {
                        out.push((t, v, x, w));
                    }
                }
            }
        }
        out
    }

    pub fn write_csv<Wr: std::io::Write>(&self, out: Wr) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "v", "x", "value"])?;
        for (t, v, x, val) in self.entries() {
            w.write_record(&[t.to_string(), v.to_string(), x.to_string(), format!("{:e}", val.to_f64())])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn p_table<W: Weight>(law: &StepLaw3D, n: usize, start: (i64, i64)) -> Result<CoupledTable<W>> {
    CoupledSpec::new(law, Kind3::FreeP, n, start).run()
}

pub fn r_table<W: Weight>(law: &StepLaw3D, n: usize, start: (i64, i64)) -> Result<CoupledTable<W>> {
    CoupledSpec::new(law, Kind3::ConstrainedR, n, start).run()
}

pub fn r0_table<W: Weight>(law: &StepLaw3D, n: usize, start: (i64, i64)) -> Result<CoupledTable<W>> {
    CoupledSpec::new(law, Kind3::ConstrainedR0, n, start).run()
}

/// `r̃_n`: prepend `Q_b` and/or append `Q_f` with the boundary constraints of the
/// full non-intersection event.
pub fn compose_boundary<W: Weight>(
    law: &StepLaw3D,
    n: usize,
    start: (i64, i64),
    q_b: Option<&BoundaryLaw>,
    q_f: Option<&BoundaryLaw>,
) -> Result<CoupledTable<W>> {
    CoupledSpec::new(law, Kind3::ConstrainedR, n, start).with_boundaries(q_b, q_f).run()
}

/// `Ũ(z) = Σ Q_b(l, b, c) U(z + c − b)` with `U(g) = 0` for `g ≤ 0`.
pub fn u_tilde(q_b: &BoundaryLaw, big_u: &dyn Fn(i64) -> f64, z_max: i64) -> Vec<f64> {
    (0..=z_max)
        .map(|z| q_b.support().map(|(s, q)| q * big_u(z + s[2] - s[1]).max(0.0)).sum())
        .collect()
}

/// Values of the fixed-horizon sum `Σ_n P(S_n^{bf} = (N, u, y); R_n^{bf})` for
/// every `N ≤ n_max` and each requested endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct FixedHorizon {
    pub start: (i64, i64),
    pub ends: Vec<(i64, i64)>,
    /// `values[N][i]`.
    pub values: Vec<Vec<f64>>,
    pub leak: f64,
    pub window: LateralWindow,
}

impl FixedHorizon {
    pub fn value(&self, n: usize, end: usize) -> f64 {
        self.values.get(n).map_or(0.0, |row| row[end])
    }
}

/// DP along the time coordinate. `H(t)` is the (constrained) mass at time `t`
/// after `S_0^b` and any number of interior steps; `H₁` excludes zero steps.
pub fn fixed_horizon_sum(
    law: &StepLaw3D,
    q_b: &BoundaryLaw,
    q_f: &BoundaryLaw,
    n_max: usize,
    start: (i64, i64),
    ends: &[(i64, i64)],
    window: &WindowSpec3,
) -> Result<FixedHorizon> {
    let kind = Kind3::FixedHorizonSum;
    let steps = law.weights::<f64>()?;
    let max_steps = n_max / law.min_time().max(1) as usize;
    let win = auto_window3(law, max_steps, start, Some(q_b), Some(q_f), window);
    let a_max = law.max_time() as usize;
    let r_max = q_f.max_time() as usize;
    let ring = a_max.max(r_max) + 1;
    let mut g0: Vec<Option<Slab<f64>>> = vec![None; q_b.max_time() as usize + 1];
    let mut leak = 0.0;
    for (s, q) in q_b.support() {
        let (v, x) = (start.0 + s[1], start.1 + s[2]);
        if !kind.alive(v, x) {
            continue;
        }
        if !win.contains(v, x) {
            leak += q;
            continue;
        }
        g0[s[0] as usize].get_or_insert_with(|| Slab::empty(&win)).add_point(&win, v, x, q);
    }
    // h1[t % ring] holds H₁(t); hfull needs G₀(t) + H₁(t).
    let mut h1: Vec<Option<Slab<f64>>> = vec![None; ring];
    let mut values = vec![vec![0.0; ends.len()]; n_max + 1];
    for t in 0..=n_max as i64 {
        let mut cur = Slab::empty(&win);
        for &(s, p) in &steps {
            let prev = t - s[0];
            if prev < 0 {
                continue;
            }
            if let Some(Some(g)) = g0.get(prev as usize) {
                leak += cur.shift_add(&win, g, s[1], s[2], p);
            }
            if let Some(h) = &h1[prev as usize % ring] {
                if prev < t {
                    leak += cur.shift_add(&win, h, s[1], s[2], p);
                }
            }
        }
        cur.kill(&win, kind);
        h1[t as usize % ring] = Some(cur);
        for (i, &(u, y)) in ends.iter().enumerate() {
            if !kind.alive(u, y) {
                continue;
            }
            let mut acc = 0.0;
            for (s, q) in q_f.support() {
                let prev = t - s[0];
                // The ring slot for `prev` is still valid since s[0] < ring.
                if prev < 0 {
                    continue;
                }
                if let Some(h) = &h1[prev as usize % ring] {
                    acc += q * h.get(&win, u - s[1], y - s[2]);
                }
            }
            values[t as usize][i] = acc;
        }
    }
    if leak > window.leak_bound {
        return Err(Error::WindowTooSmall { leak, bound: window.leak_bound });
    }
    Ok(FixedHorizon { start, ends: ends.to_vec(), values, leak, window: win })
}

/// Doob h-transform of the killed walk, weighted by the renewal function of the gap.
#[derive(Debug, Clone)]
pub struct HTransformKernel {
    pub law: StepLaw3D,
    pub q_b: BoundaryLaw,
    renewal: RenewalTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct HStep {
    /// Normalized next-step law `(σ, weight)`.
    pub next: Vec<(Step3, f64)>,
    /// `Σ P(σ) U(new gap) / U(gap)` before normalization.
    pub total: f64,
    /// `|total − 1|`: the harmonicity defect of `U` at this gap.
    pub defect: f64,
}

impl HTransformKernel {
    pub fn new(law: StepLaw3D, q_b: BoundaryLaw, renewal: RenewalTable) -> Self {
        Self { law, q_b, renewal }
    }

    pub fn big_u(&self, gap: i64) -> f64 {
        if gap <= 0 {
            0.0
        } else {
            self.renewal.big_u(gap)
        }
    }

    pub fn u_tilde(&self, gap: i64) -> f64 {
        self.q_b.support().map(|(s, q)| q * self.big_u(gap + s[2] - s[1])).sum()
    }

    /// One interior step from a state with gap `x − v = gap ≥ 1`.
    pub fn step(&self, gap: i64) -> HStep {
        let h = self.big_u(gap);
        let raw: Vec<(Step3, f64)> = self
            .law
            .support()
            .map(|(s, p)| (s, p * self.big_u(gap + s[2] - s[1]) / h))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|x| x.1).sum();
        HStep { next: raw.into_iter().map(|(s, w)| (s, w / total)).collect(), total, defect: (total - 1.0).abs() }
    }

    /// Initial piece `S_0^b`: `Q_b(σ_b) U(gap(S_0^b)) / Ũ(gap)`, normalized by construction.
    pub fn initial(&self, gap: i64) -> HStep {
        let ut = self.u_tilde(gap);
        let raw: Vec<(Step3, f64)> = self
            .q_b
            .support()
            .map(|(s, q)| (s, q * self.big_u(gap + s[2] - s[1]) / ut))
            .filter(|(_, w)| *w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|x| x.1).sum();
        HStep { next: raw.into_iter().map(|(s, w)| (s, w / total)).collect(), total, defect: (total - 1.0).abs() }
    }

    /// Largest defect over `gap ∈ [g_lo, g_hi]`.
    pub fn max_defect(&self, g_lo: i64, g_hi: i64) -> f64 {
        (g_lo..=g_hi).map(|g| self.step(g).defect).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Oracles for the 3D ladder identity

/// `E f(S_0, …, S_n)` by brute-force enumeration from `(0, v0, x0)`.
pub fn enumerate3<W: Weight>(
    law: &StepLaw3D,
    n: usize,
    start: (i64, i64),
    mut f: impl FnMut(&[Step3], W),
) -> Result<()> {
    let steps = law.weights::<W>()?;
    let paths = (steps.len() as f64).powi(n as i32);
    if paths > crate::enumerate::PATH_LIMIT {
        return Err(Error::TooLarge { paths, limit: crate::enumerate::PATH_LIMIT });
    }
    let mut path = vec![[0, start.0, start.1]; n + 1];
    let mut probs = vec![W::one(); n + 1];
    if n == 0 {
        f(&path, W::one());
        return Ok(());
    }
    let mut choice = vec![0usize; n + 1];
    let mut depth = 1;
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
        let prev = path[depth - 1];
        path[depth] = [prev[0] + s[0], prev[1] + s[1], prev[2] + s[2]];
        probs[depth] = probs[depth - 1] * p;
        if depth == n {
            f(&path, probs[depth]);
            choice[depth] += 1;
        } else {
            depth += 1;
            choice[depth] = 0;
        }
    }
    Ok(())
}

/// `E(N^>(y−u); S_n = (t, u, y))` from the origin via the ladder expansion
/// `Σ_m Σ_{r<z} P(S_m = ·, ladder at height r) p_{n−m}(·)`.
///
/// Ladder masses at height `r` come from a walk killed once `Z ≥ r`,
/// independent of the stay-positive DP.
pub fn ladder_expectation3(law: &StepLaw3D, n: usize, ends: &[Step3]) -> Result<Vec<f64>> {
    let p = CoupledSpec::new(law, Kind3::FreeP, n, (0, 0)).keep_layers().run::<f64>()?;
    let win = p.window;
    let steps = law.weights::<f64>()?;
    let z_max = ends.iter().map(|e| e[2] - e[1]).max().unwrap_or(0);
    let mut out = vec![0.0; ends.len()];
    for (i, e) in ends.iter().enumerate() {
        if e[2] - e[1] >= 1 {
            out[i] = p.get_at(n, e[0], e[1], e[2]);
        }
    }
    for r in 1..z_max {
        // alive: Z < r. landed: Z == r exactly at the current step.
        let mut alive: Layer<f64> = Layer::new(0, 0);
        alive.slab_mut(&win, 0).add_point(&win, 0, 0, 1.0);
        let mut t_hi = 0;
        for m in 1..=n {
            t_hi += law.max_time();
            let mut next = Layer::new(0, t_hi);
            let mut leak = 0.0;
            for t in alive.times().collect::<Vec<_>>() {
                let src = alive.slab(t).unwrap();
                for &(s, w) in &steps {
                    leak += next.slab_mut(&win, t + s[0]).shift_add(&win, src, s[1], s[2], w);
                }
            }
            debug_assert!(leak == 0.0);
            let mut landed: Vec<(i64, i64, i64, f64)> = Vec::new();
            for t in next.times().collect::<Vec<_>>() {
                let slab = next.slab_mut(&win, t);
                let Some((v0, v1, x0, x1)) = slab.bbox else { continue };
                for v in v0..=v1 {
                    for x in x0.max(v + r)..=x1 {
                        let k = win.idx(v, x);
                        let val = slab.data[k];
                        if val != 0.0 {
                            if x - v == r {
                                landed.push((t, v, x, val));
                            }
                            slab.data[k] = 0.0;
                        }
                    }
                }
            }
            for (i, e) in ends.iter().enumerate() {
                if e[2] - e[1] <= r {
                    continue;
                }
                let mut acc = 0.0;
                for &(s, v, x, val) in &landed {
                    acc += val * p.get_at(n - m, e[0] - s, e[1] - v, e[2] - x);
                }
                out[i] += acc;
            }
            alive = next;
        }
    }
    Ok(out)
}
