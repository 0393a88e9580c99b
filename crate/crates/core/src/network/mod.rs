//! Sequential piecewise-linear networks.
//!
//! A [`Network`] is an ordered list of [`Layer`]s over a fixed input
//! dimension. Every non-affine layer exposes the family of hyperplanes that
//! separates its linear pieces; fixing a side of each hyperplane fixes an
//! activation [`Pattern`], under which the layer is a plain affine map.

mod conv;
mod eran;
mod json;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::geometry::{Hyperplane, Sign};

pub use conv::{lower_convolution, ConvSpec};
pub use eran::parse_eran;
pub use json::{network_to_json, parse_json_layer, parse_json_network, LayerSpec, NetworkSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported layer type {tag:?}")]
    UnsupportedLayer { line: usize, tag: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("layer {layer} expects input dimension {expected}, got {found}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("point lies on hyperplane {hyperplane}; activation pattern is ambiguous")]
    AmbiguousPattern { hyperplane: usize },
    #[error("convolution shape error: {0}")]
    Shape(String),
}

pub type Result<T, E = NetworkError> = std::result::Result<T, E>;

/// An affine map `x ↦ matrix · x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: Array2<f64>,
    pub offset: Array1<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Array2::eye(dim),
            offset: Array1::zeros(dim),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let x = ndarray::ArrayView1::from(x);
        (self.matrix.dot(&x) + &self.offset).to_vec()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: self.matrix.dot(&inner.matrix),
            offset: self.matrix.dot(&inner.offset) + &self.offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Affine {
        weights: Array2<f64>,
        bias: Array1<f64>,
    },
    Relu,
    LeakyRelu {
        alpha: f64,
    },
    HardTanh,
    /// Max over each group of input indices; output `k` is the max of group `k`.
    MaxPool {
        groups: Vec<Vec<usize>>,
    },
}

impl Layer {
    pub fn affine(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(NetworkError::InvalidLayer(format!(
                "bias length {} does not match {} weight rows",
                bias.len(),
                weights.nrows()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(NetworkError::InvalidLayer("non-finite affine entry".into()));
        }
        Ok(Layer::Affine { weights, bias })
    }

    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if (0.0..1.0).contains(&alpha) {
            Ok(Layer::LeakyRelu { alpha })
        } else {
            Err(NetworkError::InvalidLayer(format!(
                "leaky relu alpha {alpha} outside [0, 1)"
            )))
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Layer::Affine { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Affine { .. } => "affine",
            Layer::Relu => "relu",
            Layer::LeakyRelu { .. } => "leaky_relu",
            Layer::HardTanh => "hard_tanh",
            Layer::MaxPool { .. } => "maxpool",
        }
    }

    /// Output dimension for the given input dimension, checking compatibility.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize, String> {
        match self {
            Layer::Affine { weights, .. } => {
                if weights.ncols() == input_dim {
                    Ok(weights.nrows())
                } else {
                    Err(format!("affine layer takes {} inputs", weights.ncols()))
                }
            }
            Layer::Relu | Layer::LeakyRelu { .. } | Layer::HardTanh => Ok(input_dim),
            Layer::MaxPool { groups } => {
                let mut seen = vec![false; input_dim];
                for g in groups {
                    if g.is_empty() {
                        return Err("maxpool group is empty".into());
                    }
                    for &i in g {
                        if i >= input_dim {
                            return Err(format!("maxpool index {i} out of range for {input_dim} inputs"));
                        }
                        if std::mem::replace(&mut seen[i], true) {
                            return Err(format!("maxpool index {i} appears twice"));
                        }
                    }
                }
                if seen.iter().all(|&s| s) {
                    Ok(groups.len())
                } else {
                    Err("maxpool groups do not cover every input".into())
                }
            }
        }
    }

    /// Exact forward pass. `x` must have the layer's input dimension.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Layer::Affine { weights, bias } => (weights.dot(&ndarray::ArrayView1::from(x)) + bias).to_vec(),
            Layer::Relu => x.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect(),
            Layer::LeakyRelu { alpha } => x.iter().map(|&v| if v < 0.0 { alpha * v } else { v }).collect(),
            Layer::HardTanh => x.iter().map(|&v| v.clamp(-1.0, 1.0)).collect(),
            Layer::MaxPool { groups } => groups
                .iter()
                .map(|g| g.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        }
    }

    /// The hyperplanes separating this layer's linear pieces, in canonical order.
    pub fn hyperplanes(&self, dim: usize) -> Vec<Hyperplane> {
        pwl_hyperplanes(self, dim)
    }

    /// The activation pattern selected by one side per hyperplane (in the
    /// order of [`Layer::hyperplanes`]). `Sign::Zero` entries are ties, where
    /// both adjacent pieces agree; `representative` breaks inconsistent
    /// max-pool orderings.
    pub fn pattern(&self, dim: usize, sides: &[Sign], representative: &[f64]) -> Pattern {
        match self {
            Layer::Affine { .. } => Pattern::Linear,
            Layer::Relu => Pattern::Relu(sides.iter().map(|&s| s != Sign::Negative).collect()),
            Layer::LeakyRelu { alpha } => Pattern::Leaky {
                active: sides.iter().map(|&s| s != Sign::Negative).collect(),
                alpha: *alpha,
            },
            Layer::HardTanh => Pattern::HardTanh(
                (0..dim)
                    .map(|i| {
                        let (lo, hi) = (sides[2 * i], sides[2 * i + 1]);
                        if hi == Sign::Positive {
                            Clamp::High
                        } else if lo == Sign::Negative {
                            Clamp::Low
                        } else {
                            Clamp::Pass
                        }
                    })
                    .collect(),
            ),
            Layer::MaxPool { groups } => {
                let mut cursor = 0;
                let winners = groups
                    .iter()
                    .map(|g| {
                        let k = g.len();
                        let pair_count = k * (k - 1) / 2;
                        let pair_sides = &sides[cursor..cursor + pair_count];
                        cursor += pair_count;
                        group_winner(g, pair_sides, representative)
                    })
                    .collect();
                Pattern::MaxPool(winners)
            }
        }
    }

    /// Signs of `representative` against every hyperplane of the layer.
    pub fn sides_at(&self, dim: usize, representative: &[f64], eps: f64) -> Vec<Sign> {
        self.hyperplanes(dim)
            .iter()
            .map(|h| h.classify(representative, eps))
            .collect()
    }
}

/// Picks the winning input index of a max-pool group from pairwise sides.
/// Ties go to the earlier position in the group.
fn group_winner(group: &[usize], pair_sides: &[Sign], representative: &[f64]) -> usize {
    let k = group.len();
    // index of pair (p, q), p < q, in canonical enumeration
    let pair = |p: usize, q: usize| p * k - p * (p + 1) / 2 + (q - p - 1);
    let beats = |p: usize, q: usize| -> bool {
        if p < q {
            pair_sides[pair(p, q)] != Sign::Negative
        } else {
            pair_sides[pair(q, p)] == Sign::Negative
        }
    };
    (0..k)
        .find(|&p| (0..k).all(|q| q == p || beats(p, q)))
        .map(|p| group[p])
        .unwrap_or_else(|| {
            *group
                .iter()
                .max_by(|&&a, &&b| representative[a].total_cmp(&representative[b]).then(b.cmp(&a)))
                .expect("groups are non-empty")
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    Low,
    Pass,
    High,
}

/// The linear piece a layer is restricted to.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Linear,
    Relu(Vec<bool>),
    Leaky { active: Vec<bool>, alpha: f64 },
    HardTanh(Vec<Clamp>),
    MaxPool(Vec<usize>),
}

impl Pattern {
    /// Applies `layer` restricted to this piece.
    pub fn apply(&self, layer: &Layer, x: &[f64]) -> Vec<f64> {
        match self {
            Pattern::Linear => layer.apply(x),
            Pattern::Relu(active) => x.iter().zip(active).map(|(&v, &a)| if a { v } else { 0.0 }).collect(),
            Pattern::Leaky { active, alpha } => x
                .iter()
                .zip(active)
                .map(|(&v, &a)| if a { v } else { alpha * v })
                .collect(),
            Pattern::HardTanh(clamps) => x
                .iter()
                .zip(clamps)
                .map(|(&v, c)| match c {
                    Clamp::Low => -1.0,
                    Clamp::Pass => v,
                    Clamp::High => 1.0,
                })
                .collect(),
            Pattern::MaxPool(winners) => winners.iter().map(|&i| x[i]).collect(),
        }
    }

    /// Row-vector pullback `g ↦ gᵀ·A` through this piece, where `A` is the
    /// piece's matrix on R^dim.
    pub fn pullback(&self, layer: &Layer, g: &[f64], dim: usize) -> Vec<f64> {
        match self {
            Pattern::Linear => match layer {
                Layer::Affine { weights, .. } => weights.t().dot(&ndarray::ArrayView1::from(g)).to_vec(),
                _ => g.to_vec(),
            },
            Pattern::Relu(active) => g.iter().zip(active).map(|(&v, &a)| if a { v } else { 0.0 }).collect(),
            Pattern::Leaky { active, alpha } => g
                .iter()
                .zip(active)
                .map(|(&v, &a)| if a { v } else { alpha * v })
                .collect(),
            Pattern::HardTanh(clamps) => g
                .iter()
                .zip(clamps)
                .map(|(&v, c)| if *c == Clamp::Pass { v } else { 0.0 })
                .collect(),
            Pattern::MaxPool(winners) => {
                let mut out = vec![0.0; dim];
                for (&v, &i) in g.iter().zip(winners) {
                    out[i] += v;
                }
                out
            }
        }
    }

    /// The piece as an explicit affine map on R^dim.
    pub fn affine(&self, layer: &Layer, dim: usize) -> AffineMap {
        match (self, layer) {
            (Pattern::Linear, Layer::Affine { weights, bias }) => AffineMap {
                matrix: weights.clone(),
                offset: bias.clone(),
            },
            (Pattern::Linear, _) => AffineMap::identity(dim),
            (Pattern::Relu(active), _) => AffineMap {
                matrix: Array2::from_diag(&active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect::<Array1<_>>()),
                offset: Array1::zeros(dim),
            },
            (Pattern::Leaky { active, alpha }, _) => AffineMap {
                matrix: Array2::from_diag(
                    &active
                        .iter()
                        .map(|&a| if a { 1.0 } else { *alpha })
                        .collect::<Array1<_>>(),
                ),
                offset: Array1::zeros(dim),
            },
            (Pattern::HardTanh(clamps), _) => AffineMap {
                matrix: Array2::from_diag(
                    &clamps
                        .iter()
                        .map(|c| if *c == Clamp::Pass { 1.0 } else { 0.0 })
                        .collect::<Array1<_>>(),
                ),
                offset: clamps
                    .iter()
                    .map(|c| match c {
                        Clamp::Low => -1.0,
                        Clamp::Pass => 0.0,
                        Clamp::High => 1.0,
                    })
                    .collect(),
            },
            (Pattern::MaxPool(winners), _) => {
                let mut matrix = Array2::zeros((winners.len(), dim));
                for (row, &i) in winners.iter().enumerate() {
                    matrix[[row, i]] = 1.0;
                }
                AffineMap {
                    matrix,
                    offset: Array1::zeros(winners.len()),
                }
            }
        }
    }
}

/// Separating hyperplanes of `layer` acting on R^dim. Empty for affine layers.
pub fn pwl_hyperplanes(layer: &Layer, dim: usize) -> Vec<Hyperplane> {
    match layer {
        Layer::Affine { .. } => Vec::new(),
        Layer::Relu | Layer::LeakyRelu { .. } => (0..dim).map(|i| Hyperplane::axis(dim, i, 0.0)).collect(),
        Layer::HardTanh => (0..dim)
            .flat_map(|i| [Hyperplane::axis(dim, i, -1.0), Hyperplane::axis(dim, i, 1.0)])
            .collect(),
        Layer::MaxPool { groups } => groups
            .iter()
            .flat_map(|g| {
                (0..g.len()).flat_map(move |p| (p + 1..g.len()).map(move |q| Hyperplane::difference(dim, g[p], g[q])))
            })
            .collect(),
    }
}

/// The affine map `layer` agrees with around `representative`.
///
/// Fails if `representative` is within the `eps` band of any separating
/// hyperplane, where the piece is not determined by the point alone.
pub fn local_affine(layer: &Layer, representative: &[f64], eps: f64) -> Result<AffineMap> {
    let dim = representative.len();
    if let Layer::Affine { weights, .. } = layer {
        if weights.ncols() != dim {
            return Err(NetworkError::DimensionMismatch {
                layer: 0,
                expected: weights.ncols(),
                found: dim,
            });
        }
    }
    let sides = layer.sides_at(dim, representative, eps);
    if let Some(hyperplane) = sides.iter().position(|s| *s == Sign::Zero) {
        return Err(NetworkError::AmbiguousPattern { hyperplane });
    }
    Ok(layer.pattern(dim, &sides, representative).affine(layer, dim))
}

/// A sequential composition of layers over a fixed input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    /// `dims[i]` is the input dimension of layer `i`; the last entry is the
    /// output dimension.
    dims: Vec<usize>,
}

impl Network {
    /// The empty network `f(x) = x`.
    pub fn identity(input_dim: usize) -> Self {
        Self {
            input_dim,
            layers: Vec::new(),
            dims: vec![input_dim],
        }
    }

    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut net = Self::identity(input_dim);
        for layer in layers {
            net.push(layer)?;
        }
        Ok(net)
    }

    /// Appends `layer`, so the network becomes `layer ∘ self`.
    pub fn push(&mut self, layer: Layer) -> Result<()> {
        let dim = self.output_dim();
        let out = layer.output_dim(dim).map_err(|msg| match &layer {
            Layer::Affine { weights, .. } => NetworkError::DimensionMismatch {
                layer: self.layers.len(),
                expected: weights.ncols(),
                found: dim,
            },
            _ => NetworkError::InvalidLayer(msg),
        })?;
        if let Layer::LeakyRelu { alpha } = layer {
            Layer::leaky_relu(alpha)?;
        }
        self.layers.push(layer);
        self.dims.push(out);
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims is never empty")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Input dimension of layer `i`.
    pub fn layer_input_dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(NetworkError::DimensionMismatch {
                layer: 0,
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(self.layers.iter().fold(x.to_vec(), |v, layer| layer.apply(&v)))
    }
}

/// Forward pass of `net` at `x`.
pub fn evaluate(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    net.evaluate(x)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::array;

    /// `x ↦ [1 −1 −1] · ReLU((x − 1, x, −x))`.
    pub(crate) fn example_net() -> Network {
        Network::new(
            1,
            vec![
                Layer::affine(array![[1.0], [1.0], [-1.0]], array![-1.0, 0.0, 0.0]).unwrap(),
                Layer::Relu,
                Layer::affine(array![[1.0, -1.0, -1.0]], array![0.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_example_net() {
        let net = example_net();
        assert_eq!(net.evaluate(&[-1.0]).unwrap(), vec![-1.0]);
        assert_eq!(net.evaluate(&[2.0]).unwrap(), vec![-1.0]);
        assert_eq!(net.evaluate(&[0.5]).unwrap(), vec![-0.5]);
    }

    #[test]
    fn evaluate_matches_closed_form() {
        let net = example_net();
        for k in 0..100 {
            let x = -1.0 + 3.0 * k as f64 / 99.0;
            let want = if x <= 0.0 {
                x
            } else if x <= 1.0 {
                -x
            } else {
                -1.0
            };
            let got = net.evaluate(&[x]).unwrap()[0];
            assert!((got - want).abs() <= 1e-12, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        assert!(matches!(
            example_net().evaluate(&[1.0, 2.0]),
            Err(NetworkError::DimensionMismatch {
                expected: 1,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn activations() {
        assert_eq!(Layer::leaky_relu(0.1).unwrap().apply(&[-2.0, 3.0]), vec![-0.2, 3.0]);
        assert_eq!(Layer::HardTanh.apply(&[-2.0, 0.5, 7.0]), vec![-1.0, 0.5, 1.0]);
        let pool = Layer::MaxPool {
            groups: vec![vec![0, 2], vec![1]],
        };
        assert_eq!(pool.apply(&[1.0, -4.0, 3.0]), vec![3.0, -4.0]);
    }

    #[test]
    fn hyperplane_families() {
        let relu = pwl_hyperplanes(&Layer::Relu, 2);
        assert_eq!(relu.len(), 2);
        assert_eq!((relu[0].normal(), relu[0].offset()), (&[1.0, 0.0][..], 0.0));
        assert_eq!((relu[1].normal(), relu[1].offset()), (&[0.0, 1.0][..], 0.0));

        let ht = pwl_hyperplanes(&Layer::HardTanh, 1);
        assert_eq!((ht[0].normal(), ht[0].offset()), (&[1.0][..], -1.0));
        assert_eq!((ht[1].normal(), ht[1].offset()), (&[1.0][..], 1.0));

        let mp = pwl_hyperplanes(
            &Layer::MaxPool {
                groups: vec![vec![0, 1]],
            },
            2,
        );
        assert_eq!(mp.len(), 1);
        assert_eq!((mp[0].normal(), mp[0].offset()), (&[1.0, -1.0][..], 0.0));

        let affine = Layer::affine(array![[1.0]], array![0.0]).unwrap();
        assert!(pwl_hyperplanes(&affine, 1).is_empty());
    }

    #[test]
    fn local_affine_examples() {
        let m = local_affine(&Layer::Relu, &[-3.0, 5.0], 1e-9).unwrap();
        assert_eq!(m.matrix, array![[0.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.offset, array![0.0, 0.0]);

        let m = local_affine(&Layer::HardTanh, &[2.0], 1e-9).unwrap();
        assert_eq!(m.matrix, array![[0.0]]);
        assert_eq!(m.offset, array![1.0]);

        let m = local_affine(
            &Layer::MaxPool {
                groups: vec![vec![0, 1]],
            },
            &[4.0, 1.0],
            1e-9,
        )
        .unwrap();
        assert_eq!(m.matrix, array![[1.0, 0.0]]);
        assert_eq!(m.offset, array![0.0]);

        assert_eq!(
            local_affine(&Layer::Relu, &[1.0, 0.0], 1e-9),
            Err(NetworkError::AmbiguousPattern { hyperplane: 1 })
        );
    }

    #[test]
    fn maxpool_winner_from_pairwise_sides() {
        let layer = Layer::MaxPool {
            groups: vec![vec![0, 1, 2]],
        };
        let x = [1.0, 5.0, 3.0];
        let sides = layer.sides_at(3, &x, 1e-9);
        assert_eq!(layer.pattern(3, &sides, &x), Pattern::MaxPool(vec![1]));
        // all tied: earliest index wins
        let tied = [Sign::Zero; 3];
        assert_eq!(layer.pattern(3, &tied, &[0.0; 3]), Pattern::MaxPool(vec![0]));
    }

    #[test]
    fn push_checks_dimensions() {
        let mut net = Network::identity(2);
        assert!(net
            .push(Layer::affine(array![[1.0, 2.0, 3.0]], array![0.0]).unwrap())
            .is_err());
        assert_eq!(net.layers().len(), 0);
        net.push(Layer::Relu).unwrap();
        assert!(net.push(Layer::MaxPool { groups: vec![vec![0]] }).is_err());
        net.push(Layer::MaxPool {
            groups: vec![vec![1, 0]],
        })
        .unwrap();
        assert_eq!(net.output_dim(), 1);
    }

    #[test]
    fn invalid_layers() {
        assert!(Layer::leaky_relu(1.0).is_err());
        assert!(Layer::leaky_relu(-0.1).is_err());
        assert!(Layer::affine(array![[1.0, 2.0]], array![0.0, 1.0]).is_err());
        assert!(Layer::affine(array![[f64::NAN]], array![0.0]).is_err());
    }
}
