//! Exact linear-region partitions of piecewise-linear networks.
//!
//! Given a network built from affine, ReLU, leaky ReLU, hard tanh and
//! max-pool layers, and a one- or two-dimensional convex input domain, the
//! engine computes a finite partition of the domain into convex pieces on
//! each of which the network is affine, together with the network's value at
//! every piece vertex. On top of that partition the crate provides exact
//! integrated-gradients attributions, exact decision-region maps, and vertex
//! enumeration.
//!
//! ```
//! use exactnet_core::geometry::Point;
//! use exactnet_core::network::parse_eran;
//! use exactnet_core::symbolic::symbolic_rep_1d;
//!
//! let net = parse_eran("ReLU\n[[1], [1], [-1]]\n[-1, 0, 0]\nAffine\n[[1, -1, -1]]\n[0]\n").unwrap();
//! let line = symbolic_rep_1d(&net, &Point::from(vec![-1.0]), &Point::from(vec![2.0])).unwrap();
//! assert_eq!(line.segment_count(), 3);
//! ```

pub mod analysis;
pub mod geometry;
pub mod network;
pub mod random;
pub mod service;
pub mod symbolic;

pub use geometry::{GeometryError, Hyperplane, PlanarRegion, Point, Sign, Tolerances};
pub use network::{Layer, Network, NetworkError};
pub use symbolic::{Engine, EngineConfig, EngineError, LayerTransformer, PartitionSet2D, SegmentedLine};
