//! Exact symbolic representation of a network over a line or a planar polygon.
//!
//! The representation is built layer by layer: start from the identity
//! partition `{X}` (image = preimage) and push it through each layer with
//! [`extend_2d`] / [`extend_1d`]. Affine layers only move image vertices.
//! Piecewise-linear layers refine the partition until every piece lies on one
//! side of each separating hyperplane, then map the images through the
//! selected linear piece.

mod jacobian;
mod line;
mod plane;

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{GeometryError, Hyperplane, Point, Sign, Tolerances};
use crate::network::{Layer, NetworkError};

pub use jacobian::{point_gradient, point_jacobian, region_jacobian, region_jacobian_with};
pub use line::{extend_1d, symbolic_rep_1d, SegmentedLine};
pub use plane::{extend_2d, symbolic_rep_2d, PartitionSet2D};

pub const DEFAULT_REGION_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("region budget of {limit} exceeded after producing {count} regions")]
    BudgetExceeded { limit: usize, count: usize },
    #[error("line endpoints coincide")]
    DegenerateLine,
    #[error("region straddles hyperplane {hyperplane} of layer {layer}")]
    DegenerateRegion { layer: usize, hyperplane: usize },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Worker threads; 0 uses rayon's global pool, 1 runs on the caller.
    pub threads: usize,
    /// Upper bound on live regions (or line breakpoints) per transform.
    pub region_budget: usize,
    pub tolerances: Tolerances,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            region_budget: DEFAULT_REGION_BUDGET,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone)]
enum Workers {
    Caller,
    Global,
    Pool(Arc<rayon::ThreadPool>),
}

/// Holds the configuration and worker pool used by the transforms.
///
/// Output is canonicalized after every full transform, so results do not
/// depend on the number of threads.
#[derive(Clone)]
pub struct Engine {
    config: EngineConfig,
    workers: Workers,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish()
    }
}

impl Default for Engine {
    fn default() -> Self {
        Self {
            config: EngineConfig::default(),
            workers: Workers::Global,
        }
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        let workers = match config.threads {
            0 => Workers::Global,
            1 => Workers::Caller,
            n => Workers::Pool(Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| EngineError::ThreadPool(e.to_string()))?,
            )),
        };
        Ok(Self { config, workers })
    }

    /// A single-threaded engine with default limits.
    pub fn sequential() -> Self {
        Self {
            config: EngineConfig {
                threads: 1,
                ..EngineConfig::default()
            },
            workers: Workers::Caller,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.config.tolerances
    }

    pub(crate) fn is_parallel(&self) -> bool {
        !matches!(self.workers, Workers::Caller)
    }

    /// Runs `f` inside this engine's worker pool, so rayon work spawned by
    /// `f` uses the configured thread count.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.workers {
            Workers::Pool(pool) => pool.install(f),
            _ => f(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformerKind {
    Linear,
    Piecewise,
}

#[derive(Debug, Clone, PartialEq)]
enum Action {
    Layer(Layer),
    Identity,
}

/// One step of the layer-by-layer composition.
///
/// Wraps a layer together with its separating hyperplanes on the current
/// image space. A transformer may also carry hyperplanes with an identity
/// map, which refines a partition without changing its images.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTransformer {
    action: Action,
    hyperplanes: Vec<Hyperplane>,
    input_dim: usize,
}

impl LayerTransformer {
    pub fn new(layer: &Layer, input_dim: usize) -> Self {
        Self {
            hyperplanes: layer.hyperplanes(input_dim),
            action: Action::Layer(layer.clone()),
            input_dim,
        }
    }

    /// Splits along `hyperplanes` and leaves images unchanged.
    pub fn boundaries(hyperplanes: Vec<Hyperplane>, input_dim: usize) -> Self {
        Self {
            action: Action::Identity,
            hyperplanes,
            input_dim,
        }
    }

    pub fn kind(&self) -> TransformerKind {
        match &self.action {
            Action::Layer(l) if l.is_linear() => TransformerKind::Linear,
            _ => TransformerKind::Piecewise,
        }
    }

    pub fn hyperplanes(&self) -> &[Hyperplane] {
        &self.hyperplanes
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layer(&self) -> Option<&Layer> {
        match &self.action {
            Action::Layer(l) => Some(l),
            Action::Identity => None,
        }
    }

    /// Maps image points of a piece that has the given sides.
    pub(crate) fn map_piece(&self, sides: &[Sign], representative: &[f64], images: &mut [Point]) {
        if let Action::Layer(layer) = &self.action {
            if layer.is_linear() {
                images.iter_mut().for_each(|p| *p = layer.apply(p).into());
            } else {
                let pattern = layer.pattern(self.input_dim, sides, representative);
                images.iter_mut().for_each(|p| *p = pattern.apply(layer, p).into());
            }
        }
    }
}

/// Per-hyperplane side of a piece whose image vertices are `images`.
///
/// A side is the common strict sign of the vertices; if every vertex is on
/// the plane the centroid decides, and a tie remains `Zero`. `Err(k)`
/// reports the first hyperplane with vertices strictly on both sides.
pub(crate) fn piece_sides(
    hyperplanes: &[Hyperplane],
    images: &[Point],
    centroid: &[f64],
    eps: f64,
) -> std::result::Result<Vec<Sign>, usize> {
    hyperplanes
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let mut side = Sign::Zero;
            for p in images {
                match (side, h.classify(p, eps)) {
                    (_, Sign::Zero) => {}
                    (Sign::Zero, s) => side = s,
                    (cur, s) if cur != s => return Err(k),
                    _ => {}
                }
            }
            if side == Sign::Zero {
                side = h.classify(centroid, eps);
            }
            Ok(side)
        })
        .collect()
}
