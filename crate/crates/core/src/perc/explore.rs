//! Lazy depth-first exploration of a single cluster.
//!
//! Bond states are read from the counter RNG on demand, so a sample costs
//! time proportional to the explored cluster rather than the box. Results
//! agree with union-find on the eagerly sampled configuration.

use super::lattice::{EdgeSubset, LatticeBox};
use super::rng::{BondRng, Dir};

/// Reusable scratch space for explorations inside one box.
#[derive(Debug, Clone)]
pub struct Explorer {
    pub bx: LatticeBox,
    stamp: Vec<u32>,
    gen: u32,
    stack: Vec<(i64, i64)>,
    /// Sites of the last explored cluster, in visiting order.
    pub members: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectCluster {
    pub size: usize,
    /// Some member lies on the box frontier.
    pub touched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualOutcome {
    /// The dual cluster of `0*` reached `x_N*` before any early exit.
    pub connected: bool,
    /// The dual cluster reached the exterior (exploration stopped there).
    pub touched: bool,
    pub size: usize,
    /// Fewest dual steps from an explored face to the exterior.
    pub slack: i64,
}

impl DualOutcome {
    pub fn finite_connection(&self) -> bool {
        self.connected && !self.touched
    }
}

impl Explorer {
    pub fn new(bx: LatticeBox) -> Self {
        Self { bx, stamp: vec![0; bx.vertices()], gen: 0, stack: Vec::new(), members: Vec::new() }
    }

    fn reset(&mut self) {
        self.gen = self.gen.wrapping_add(1);
        if self.gen == 0 {
            self.stamp.fill(0);
            self.gen = 1;
        }
        self.stack.clear();
        self.members.clear();
    }

    /// True when `(t, y)` belongs to the last explored cluster.
    pub fn visited(&self, t: i64, y: i64) -> bool {
        self.bx.contains(t, y) && self.stamp[self.bx.vertex_index(t, y)] == self.gen
    }

    fn mark(&mut self, t: i64, y: i64) -> bool {
        let i = self.bx.vertex_index(t, y);
        if self.stamp[i] == self.gen {
            return false;
        }
        self.stamp[i] = self.gen;
        true
    }

    /// Direct cluster of `origin` over open bonds of `edges` inside the box.
    pub fn direct_cluster(&mut self, rng: &BondRng, origin: (i64, i64), edges: EdgeSubset, collect: bool) -> DirectCluster {
        self.reset();
        let bx = self.bx;
        let mut size = 0;
        let mut touched = false;
        if !bx.contains(origin.0, origin.1) {
            return DirectCluster { size: 0, touched: true };
        }
        self.mark(origin.0, origin.1);
        self.stack.push(origin);
        let strip = match edges {
            EdgeSubset::All => (i64::MIN, i64::MAX),
            EdgeSubset::TStrip(lo, hi) => (lo, hi),
        };
        while let Some((t, y)) = self.stack.pop() {
            size += 1;
            if collect {
                self.members.push((t, y));
            }
            touched |= bx.on_frontier(t, y);
            let nbrs = [
                (t + 1, y, t, y, Dir::H),
                (t - 1, y, t - 1, y, Dir::H),
                (t, y + 1, t, y, Dir::V),
                (t, y - 1, t, y - 1, Dir::V),
            ];
            for (nt, ny, bt, by, d) in nbrs {
                if !bx.contains(nt, ny) || nt < strip.0 || nt > strip.1 {
                    continue;
                }
                if self.visited(nt, ny) || !rng.open(bt, by, d) {
                    continue;
                }
                self.mark(nt, ny);
                self.stack.push((nt, ny));
            }
        }
        DirectCluster { size, touched }
    }

    /// Dual cluster of face `(0,0)`, stopping as soon as it reaches the exterior.
    ///
    /// Face `(a, b)` is stored at vertex index `(a, b)` of the box; faces exist
    /// for `a < t_hi`, `b < y_hi`.
    pub fn dual_from_origin(&mut self, rng: &BondRng, n: i64) -> DualOutcome {
        self.reset();
        let bx = self.bx;
        let mut size = 0;
        let mut slack = i64::MAX;
        self.mark(0, 0);
        self.stack.push((0, 0));
        while let Some((a, b)) = self.stack.pop() {
            size += 1;
            slack = slack.min((a - bx.t_lo).min(bx.t_hi - 1 - a).min(b - bx.y_lo).min(bx.y_hi - 1 - b) + 1);
            // (target face, crossed direct bond)
            let nbrs = [
                (a + 1, b, a + 1, b, Dir::V),
                (a - 1, b, a, b, Dir::V),
                (a, b + 1, a, b + 1, Dir::H),
                (a, b - 1, a, b, Dir::H),
            ];
            for (na, nb, bt, by, d) in nbrs {
                if rng.open(bt, by, d) {
                    continue;
                }
                if !bx.contains_face(na, nb) {
                    let connected = self.visited(n, 0);
                    return DualOutcome { connected, touched: true, size, slack: 0 };
                }
                if self.visited(na, nb) {
                    continue;
                }
                self.mark(na, nb);
                self.stack.push((na, nb));
            }
        }
        DualOutcome { connected: self.visited(n, 0), touched: false, size, slack }
    }
}

#[cfg(test)]
mod tests {
    use super::super::lattice::{clusters, finite_connection, Graph, LatticeConfig};
    use super::*;

    #[test]
    fn lazy_dual_matches_union_find() {
        let mut hits = 0;
        for p in [0.3, 0.45, 0.6] {
            let bx = LatticeBox::for_connection(3, 3).unwrap();
            let mut ex = Explorer::new(bx);
            for stream in 0..3000 {
                let rng = BondRng::new(99, stream, p);
                let lazy = ex.dual_from_origin(&rng, 3);
                let cfg = LatticeConfig::sample(p, bx, 99, stream);
                let eager = finite_connection(&cfg, 3).unwrap();
                assert_eq!(lazy.finite_connection(), eager, "p={p} stream={stream}");
                let lab = clusters(&cfg, EdgeSubset::All, Graph::Dual);
                assert_eq!(lazy.touched, lab.touches_frontier((0, 0)));
                if !lazy.touched {
                    assert_eq!(lazy.size, lab.component_size((0, 0)));
                }
                hits += eager as usize;
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn lazy_direct_matches_union_find() {
        let bx = LatticeBox::new(-6, 6, -6, 6, 0).unwrap();
        let mut ex = Explorer::new(bx);
        for stream in 0..500 {
            let rng = BondRng::new(5, stream, 0.45);
            let cfg = LatticeConfig::sample(0.45, bx, 5, stream);
            for edges in [EdgeSubset::All, EdgeSubset::TStrip(-2, 4)] {
                let c = ex.direct_cluster(&rng, (0, 0), edges, true);
                let lab = clusters(&cfg, edges, Graph::Direct);
                assert_eq!(c.size, lab.component_size((0, 0)));
                assert_eq!(c.touched, lab.touches_frontier((0, 0)));
                for &(t, y) in &ex.members {
                    assert!(lab.same((0, 0), (t, y)));
                }
            }
        }
    }
}
