//! Finite boxes of `ℤ²`, bond configurations and union-find clustering.
//!
//! Dual sites are faces: face `(a, b)` is the dual point `(a + ½, b + ½)`.
//! The dual bond crossing `(t,y)–(t+1,y)` joins faces `(t, y−1)` and `(t, y)`;
//! the one crossing `(t,y)–(t,y+1)` joins faces `(t−1, y)` and `(t, y)`.
//! Faces outside the box collapse into a single exterior site, so a dual
//! cluster touches the frontier exactly when it reaches the exterior.

use bitvec::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{BondRng, Dir};
use crate::error::{Error, Result};

/// Vertex rectangle `[t_lo, t_hi] × [y_lo, y_hi]` with a declared margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub t_lo: i64,
    pub t_hi: i64,
    pub y_lo: i64,
    pub y_hi: i64,
    pub margin: i64,
}

impl LatticeBox {
    pub fn new(t_lo: i64, t_hi: i64, y_lo: i64, y_hi: i64, margin: i64) -> Result<Self> {
        if t_lo > t_hi || y_lo > y_hi || margin < 0 {
            return Err(Error::BoxTooSmall(format!("empty box [{t_lo},{t_hi}]x[{y_lo},{y_hi}] margin {margin}")));
        }
        Ok(Self { t_lo, t_hi, y_lo, y_hi, margin })
    }

    /// Default box for the pair `0*, x_N*`: `[−M, N+M] × [−⌈3M/2⌉, ⌈3M/2⌉]`.
    pub fn for_connection(n: i64, margin: i64) -> Result<Self> {
        let m = margin.max(1);
        let h = (3 * m + 1) / 2;
        Self::new(-m, n + m, -h, h, m)
    }

    /// Smallest box used by the exact oracle: one spare column on each
    /// side and one spare row below. 22 bonds at `N = 1`.
    pub fn minimal(n: i64) -> Self {
        Self { t_lo: -1, t_hi: n + 2, y_lo: -1, y_hi: 1, margin: 1 }
    }

    pub fn width(&self) -> usize {
        (self.t_hi - self.t_lo + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y_hi - self.y_lo + 1) as usize
    }

    pub fn vertices(&self) -> usize {
        self.width() * self.height()
    }

    pub fn num_h(&self) -> usize {
        (self.width() - 1) * self.height()
    }

    pub fn num_bonds(&self) -> usize {
        self.num_h() + self.width() * (self.height() - 1)
    }

    pub fn contains(&self, t: i64, y: i64) -> bool {
        t >= self.t_lo && t <= self.t_hi && y >= self.y_lo && y <= self.y_hi
    }

    pub fn on_frontier(&self, t: i64, y: i64) -> bool {
        t == self.t_lo || t == self.t_hi || y == self.y_lo || y == self.y_hi
    }

    pub fn vertex_index(&self, t: i64, y: i64) -> usize {
        (y - self.y_lo) as usize * self.width() + (t - self.t_lo) as usize
    }

    pub fn vertex_at(&self, i: usize) -> (i64, i64) {
        (self.t_lo + (i % self.width()) as i64, self.y_lo + (i / self.width()) as i64)
    }

    /// Row-major: horizontal bonds first, then vertical ones.
    pub fn bond_index(&self, t: i64, y: i64, dir: Dir) -> Option<usize> {
        let (w, h) = (self.width() as i64, self.height() as i64);
        let (dt, dy) = (t - self.t_lo, y - self.y_lo);
        match dir {
            Dir::H if (0..w - 1).contains(&dt) && (0..h).contains(&dy) => Some((dy * (w - 1) + dt) as usize),
            Dir::V if (0..w).contains(&dt) && (0..h - 1).contains(&dy) => Some(self.num_h() + (dy * w + dt) as usize),
            _ => None,
        }
    }

    pub fn bond_at(&self, i: usize) -> (i64, i64, Dir) {
        let w = self.width();
        if i < self.num_h() {
            (self.t_lo + (i % (w - 1)) as i64, self.y_lo + (i / (w - 1)) as i64, Dir::H)
        } else {
            let j = i - self.num_h();
            (self.t_lo + (j % w) as i64, self.y_lo + (j / w) as i64, Dir::V)
        }
    }

    pub fn faces_t(&self) -> usize {
        self.width() - 1
    }

    pub fn faces_y(&self) -> usize {
        self.height() - 1
    }

    pub fn contains_face(&self, a: i64, b: i64) -> bool {
        a >= self.t_lo && a < self.t_hi && b >= self.y_lo && b < self.y_hi
    }

    /// Face index; the exterior site is `faces_t · faces_y`.
    pub fn face_index(&self, a: i64, b: i64) -> usize {
        if self.contains_face(a, b) {
            (b - self.y_lo) as usize * self.faces_t() + (a - self.t_lo) as usize
        } else {
            self.exterior()
        }
    }

    pub fn exterior(&self) -> usize {
        self.faces_t() * self.faces_y()
    }

    /// The two faces separated by a direct bond.
    pub fn dual_of(&self, t: i64, y: i64, dir: Dir) -> ((i64, i64), (i64, i64)) {
        match dir {
            Dir::H => ((t, y - 1), (t, y)),
            Dir::V => ((t - 1, y), (t, y)),
        }
    }

    /// Checks that the strip `[−M, N+M] × [−M, M]` fits.
    pub fn check_strip(&self, n: i64) -> Result<()> {
        let m = self.margin;
        if self.t_lo > -m || self.t_hi < n + m || self.y_lo > -m || self.y_hi < m || !self.contains_face(n, 0) || !self.contains_face(0, 0) {
            return Err(Error::BoxTooSmall(format!(
                "box [{},{}]x[{},{}] does not hold the N={n} strip with margin {m}",
                self.t_lo, self.t_hi, self.y_lo, self.y_hi
            )));
        }
        Ok(())
    }
}

/// Bond states of a box; the dual state is derived on read.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub bx: LatticeBox,
    pub p: f64,
    pub seed: u64,
    pub stream: u64,
    pub bits: BitVec<u64, Lsb0>,
}

impl LatticeConfig {
    pub fn sample(p: f64, bx: LatticeBox, seed: u64, stream: u64) -> Self {
        let rng = BondRng::new(seed, stream, p);
        let bits = (0..bx.num_bonds())
            .map(|i| {
                let (t, y, d) = bx.bond_at(i);
                rng.open(t, y, d)
            })
            .collect();
        Self { bx, p, seed, stream, bits }
    }

    /// Explicit configuration, e.g. a fixture. `open` lists open bonds.
    pub fn from_open(bx: LatticeBox, open: impl IntoIterator<Item = (i64, i64, Dir)>) -> Self {
        let mut bits = bitvec![u64, Lsb0; 0; bx.num_bonds()];
        for (t, y, d) in open {
            let i = bx.bond_index(t, y, d).expect("bond outside box");
            bits.set(i, true);
        }
        Self { bx, p: f64::NAN, seed: 0, stream: 0, bits }
    }

    pub fn uniform(bx: LatticeBox, open: bool) -> Self {
        Self { bx, p: if open { 1.0 } else { 0.0 }, seed: 0, stream: 0, bits: BitVec::repeat(open, bx.num_bonds()) }
    }

    pub fn is_open(&self, t: i64, y: i64, dir: Dir) -> bool {
        self.bx.bond_index(t, y, dir).is_some_and(|i| self.bits[i])
    }

    /// Dual bond crossing the given direct bond.
    pub fn dual_open(&self, t: i64, y: i64, dir: Dir) -> bool {
        self.bx.bond_index(t, y, dir).is_some_and(|i| !self.bits[i])
    }

    pub fn open_fraction(&self) -> f64 {
        self.bits.count_ones() as f64 / self.bits.len() as f64
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let g = self.parent[self.parent[x] as usize];
            self.parent[x] = g;
            x = g as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        ra
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Graph {
    Direct,
    Dual,
}

/// Bonds taking part in the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSubset {
    All,
    /// Bonds with both direct endpoints in `t ∈ [lo, hi]`.
    TStrip(i64, i64),
}

impl EdgeSubset {
    fn admits(&self, t: i64, dir: Dir) -> bool {
        match *self {
            EdgeSubset::All => true,
            EdgeSubset::TStrip(lo, hi) => {
                let t2 = if dir == Dir::H { t + 1 } else { t };
                t >= lo && t2 <= hi
            }
        }
    }
}

/// Component labels of the direct vertices or dual faces (plus exterior).
#[derive(Debug, Clone)]
pub struct ClusterLabeling {
    pub graph: Graph,
    pub bx: LatticeBox,
    /// Root of each site.
    pub root: Vec<u32>,
    /// Component size, indexed by root.
    pub size: Vec<u32>,
    /// Frontier flag, indexed by root.
    pub touches: Vec<bool>,
}

impl ClusterLabeling {
    pub fn site(&self, t: i64, y: i64) -> usize {
        match self.graph {
            Graph::Direct => self.bx.vertex_index(t, y),
            Graph::Dual => self.bx.face_index(t, y),
        }
    }

    pub fn same(&self, a: (i64, i64), b: (i64, i64)) -> bool {
        self.root[self.site(a.0, a.1)] == self.root[self.site(b.0, b.1)]
    }

    pub fn touches_frontier(&self, a: (i64, i64)) -> bool {
        self.touches[self.root[self.site(a.0, a.1)] as usize]
    }

    pub fn component_size(&self, a: (i64, i64)) -> usize {
        self.size[self.root[self.site(a.0, a.1)] as usize] as usize
    }

    /// Number of distinct components over real sites (the exterior excluded).
    pub fn count(&self) -> usize {
        let n = self.real_sites();
        let mut roots: Vec<u32> = self.root[..n].to_vec();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    fn real_sites(&self) -> usize {
        match self.graph {
            Graph::Direct => self.bx.vertices(),
            Graph::Dual => self.bx.exterior(),
        }
    }
}

/// Union-find over the open bonds of `edges`, on the direct or the dual graph.
pub fn clusters(config: &LatticeConfig, edges: EdgeSubset, graph: Graph) -> ClusterLabeling {
    let bx = config.bx;
    let n = match graph {
        Graph::Direct => bx.vertices(),
        Graph::Dual => bx.exterior() + 1,
    };
    let mut uf = UnionFind::new(n);
    for i in 0..bx.num_bonds() {
        let (t, y, d) = bx.bond_at(i);
        if !edges.admits(t, d) {
            continue;
        }
        match graph {
            Graph::Direct if config.bits[i] => {
                let (t2, y2) = if d == Dir::H { (t + 1, y) } else { (t, y + 1) };
                uf.union(bx.vertex_index(t, y), bx.vertex_index(t2, y2));
            }
            Graph::Dual if !config.bits[i] => {
                let (f1, f2) = bx.dual_of(t, y, d);
                uf.union(bx.face_index(f1.0, f1.1), bx.face_index(f2.0, f2.1));
            }
            _ => {}
        }
    }
    let root: Vec<u32> = (0..n).map(|i| uf.find(i) as u32).collect();
    let mut size = vec![0u32; n];
    let mut touches = vec![false; n];
    for (i, &r) in root.iter().enumerate() {
        size[r as usize] += 1;
        let frontier = match graph {
            Graph::Direct => {
                let (t, y) = bx.vertex_at(i);
                bx.on_frontier(t, y)
            }
            Graph::Dual => i == bx.exterior(),
        };
        touches[r as usize] |= frontier;
    }
    ClusterLabeling { graph, bx, root, size, touches }
}

/// `0* ↔ x_N*` by dual bonds, with the dual cluster kept off the frontier.
pub fn finite_connection(config: &LatticeConfig, n: i64) -> Result<bool> {
    config.bx.check_strip(n)?;
    let lab = clusters(config, EdgeSubset::All, Graph::Dual);
    let hit = lab.same((0, 0), (n, 0)) && !lab.touches_frontier((0, 0));
    debug_assert!(!hit || lab.same((0, 0), (n, 0)));
    Ok(hit)
}

/// Direct connection `0 ↔ x` inside the box.
pub fn two_point(config: &LatticeConfig, x: (i64, i64)) -> bool {
    if !config.bx.contains(x.0, x.1) || !config.bx.contains(0, 0) {
        return false;
    }
    clusters(config, EdgeSubset::All, Graph::Direct).same((0, 0), x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx7() -> LatticeBox {
        LatticeBox::new(-3, 3, -3, 3, 2).unwrap()
    }

    #[test]
    fn bond_indexing_round_trips() {
        let bx = LatticeBox::new(-2, 4, -1, 3, 1).unwrap();
        for i in 0..bx.num_bonds() {
            let (t, y, d) = bx.bond_at(i);
            assert_eq!(bx.bond_index(t, y, d), Some(i));
        }
        assert_eq!(bx.bond_index(4, 0, Dir::H), None);
        assert_eq!(bx.bond_index(0, 3, Dir::V), None);
        assert_eq!(LatticeBox::minimal(1).num_bonds(), 22);
    }

    #[test]
    fn duality_is_an_involution() {
        let c = LatticeConfig::sample(0.5, bx7(), 11, 4);
        for i in 0..c.bx.num_bonds() {
            let (t, y, d) = c.bx.bond_at(i);
            assert!(c.is_open(t, y, d) ^ c.dual_open(t, y, d));
        }
        let mut flipped = c.clone();
        flipped.bits = !flipped.bits;
        let mut back = flipped.clone();
        back.bits = !back.bits;
        assert_eq!(back, c);
    }

    #[test]
    fn sample_is_deterministic_and_matches_lazy_bits() {
        let a = LatticeConfig::sample(0.45, bx7(), 5, 8);
        let b = LatticeConfig::sample(0.45, bx7(), 5, 8);
        assert_eq!(a, b);
        let rng = BondRng::new(5, 8, 0.45);
        for i in 0..a.bx.num_bonds() {
            let (t, y, d) = a.bx.bond_at(i);
            assert_eq!(a.bits[i], rng.open(t, y, d));
        }
        assert!(LatticeConfig::sample(0.0, bx7(), 1, 1).bits.not_any());
        assert!(LatticeConfig::sample(1.0, bx7(), 1, 1).bits.all());
    }

    #[test]
    fn extreme_configurations() {
        let closed = LatticeConfig::uniform(bx7(), false);
        let lab = clusters(&closed, EdgeSubset::All, Graph::Direct);
        assert_eq!(lab.count(), bx7().vertices());
        assert!(!two_point(&closed, (1, 0)));
        assert!(!finite_connection(&closed, 1).unwrap());
        let open = LatticeConfig::uniform(bx7(), true);
        let lab = clusters(&open, EdgeSubset::All, Graph::Direct);
        assert_eq!(lab.count(), 1);
        assert!(lab.touches_frontier((0, 0)));
        assert!(two_point(&open, (3, -2)));
        assert!(!finite_connection(&open, 1).unwrap());
    }

    #[test]
    fn h_shaped_fixture() {
        // Two vertical bars joined by a rung, plus an isolated bond.
        let open = [
            (-2, -2, Dir::V),
            (-2, -1, Dir::V),
            (-2, 0, Dir::V),
            (0, -2, Dir::V),
            (0, -1, Dir::V),
            (0, 0, Dir::V),
            (-2, -1, Dir::H),
            (-1, -1, Dir::H),
            (2, 2, Dir::H),
        ];
        let c = LatticeConfig::from_open(bx7(), open);
        let lab = clusters(&c, EdgeSubset::All, Graph::Direct);
        assert!(lab.same((-2, -2), (0, 1)));
        assert_eq!(lab.component_size((-2, -2)), 9);
        assert!(lab.same((2, 2), (3, 2)));
        assert_eq!(lab.component_size((2, 2)), 2);
        assert_eq!(lab.count(), 49 - 8 - 1);
        assert!(!lab.touches_frontier((-2, -2)));
        assert!(lab.touches_frontier((2, 2)));
        // The strip t ∈ [−2, −1] cuts the rung between −1 and 0.
        let strip = clusters(&c, EdgeSubset::TStrip(-2, -1), Graph::Direct);
        assert!(!strip.same((-2, -2), (0, 1)));
        assert!(strip.same((-2, -2), (-1, -1)));
    }

    #[test]
    fn enclosed_dual_path_fixture() {
        // Open direct circuit around faces (0,0), (1,0) on the 7×7 box; the
        // interior bond between them is closed, so the dual path joins them.
        let mut open = Vec::new();
        for t in -1..3 {
            open.push((t, -1, Dir::H));
            open.push((t, 2, Dir::H));
        }
        for y in -1..2 {
            open.push((-1, y, Dir::V));
            open.push((3, y, Dir::V));
        }
        let c = LatticeConfig::from_open(bx7(), open);
        assert!(finite_connection(&c, 1).unwrap());
        assert!(finite_connection(&c, 2).is_err());
        let lab = clusters(&c, EdgeSubset::All, Graph::Dual);
        assert_eq!(lab.component_size((0, 0)), 12);
        // An open direct column at t = 1 separates the two faces.
        let mut d = c.clone();
        for y in -1..2 {
            d.bits.set(d.bx.bond_index(1, y, Dir::V).unwrap(), true);
        }
        assert!(!finite_connection(&d, 1).unwrap());
    }

    #[test]
    fn strip_check() {
        let bx = LatticeBox::for_connection(4, 4).unwrap();
        assert_eq!((bx.t_lo, bx.t_hi, bx.y_lo, bx.y_hi), (-4, 8, -6, 6));
        assert!(bx.check_strip(4).is_ok());
        assert!(bx.check_strip(6).is_err());
        assert!(LatticeBox::minimal(1).check_strip(1).is_ok());
    }
}
