//! Bernoulli bond percolation on finite boxes of `ℤ²`.

pub mod dump;
pub mod explore;
pub mod geometry;
pub mod lattice;
pub mod oracle;
pub mod rng;

pub use explore::{DualOutcome, Explorer};
pub use geometry::{cone_points, cut_lines, diamond_intersect, mass_gap_stats, ConeParams, MassGapStats};
pub use lattice::{clusters, finite_connection, two_point, ClusterLabeling, EdgeSubset, Graph, LatticeBox, LatticeConfig};
pub use rng::{BondRng, Dir};
