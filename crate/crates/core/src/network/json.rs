//! Native JSON network format.
//!
//! ```json
//! {"input_dim": 1, "layers": [
//!   {"type": "affine", "weights": [[1], [1], [-1]], "bias": [-1, 0, 0]},
//!   {"type": "relu"},
//!   {"type": "affine", "weights": [[1, -1, -1]], "bias": [0]}
//! ]}
//! ```
//!
//! Also accepted: `leaky_relu` (`alpha`), `hard_tanh`, `maxpool` (either
//! explicit `groups` or `input_shape` + `window` [+ `stride`]), and `conv`
//! (see [`ConvSpec`]). Convolutions and pooling geometry are expanded on
//! load, so serializing a loaded network always yields affine layers and
//! explicit groups.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{lower_convolution, ConvSpec, Layer, Network, NetworkError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Affine {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Relu,
    LeakyRelu {
        alpha: f64,
    },
    HardTanh,
    Maxpool {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        input_shape: Option<[usize; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stride: Option<[usize; 2]>,
    },
    Conv(ConvSpec),
}

impl LayerSpec {
    pub fn into_layer(self) -> Result<Layer> {
        match self {
            LayerSpec::Affine { weights, bias } => {
                let ncols = weights.first().map_or(0, Vec::len);
                if weights.iter().any(|r| r.len() != ncols) {
                    return Err(NetworkError::Schema("ragged weight matrix".into()));
                }
                let nrows = weights.len();
                let flat: Vec<f64> = weights.into_iter().flatten().collect();
                let weights = Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked above");
                Layer::affine(weights, Array1::from(bias))
            }
            LayerSpec::Relu => Ok(Layer::Relu),
            LayerSpec::LeakyRelu { alpha } => Layer::leaky_relu(alpha),
            LayerSpec::HardTanh => Ok(Layer::HardTanh),
            LayerSpec::Maxpool {
                groups: Some(groups),
                input_shape: None,
                window: None,
                stride: None,
            } => Ok(Layer::MaxPool { groups }),
            LayerSpec::Maxpool {
                groups: None,
                input_shape: Some(shape),
                window: Some(window),
                stride,
            } => pool_groups(shape, window, stride.unwrap_or(window)).map(|groups| Layer::MaxPool { groups }),
            LayerSpec::Maxpool { .. } => Err(NetworkError::Schema(
                "maxpool needs either `groups` or `input_shape` and `window`".into(),
            )),
            LayerSpec::Conv(spec) => lower_convolution(&spec),
        }
    }
}

impl From<&Layer> for LayerSpec {
    fn from(layer: &Layer) -> Self {
        match layer {
            Layer::Affine { weights, bias } => LayerSpec::Affine {
                weights: weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: bias.to_vec(),
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::LeakyRelu { alpha } => LayerSpec::LeakyRelu { alpha: *alpha },
            Layer::HardTanh => LayerSpec::HardTanh,
            Layer::MaxPool { groups } => LayerSpec::Maxpool {
                groups: Some(groups.clone()),
                input_shape: None,
                window: None,
                stride: None,
            },
        }
    }
}

fn pool_groups(shape: [usize; 3], window: [usize; 2], stride: [usize; 2]) -> Result<Vec<Vec<usize>>> {
    let [c, h, w] = shape;
    let [kh, kw] = window;
    let [sh, sw] = stride;
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 || kh > h || kw > w {
        return Err(NetworkError::Shape(format!(
            "pool window {window:?} / stride {stride:?} does not fit input {shape:?}"
        )));
    }
    let (oh, ow) = ((h - kh) / sh + 1, (w - kw) / sw + 1);
    let mut groups = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut g = Vec::with_capacity(kh * kw);
                for ky in 0..kh {
                    for kx in 0..kw {
                        g.push((ch * h + oy * sh + ky) * w + ox * sw + kx);
                    }
                }
                groups.push(g);
            }
        }
    }
    Ok(groups)
}

impl NetworkSpec {
    pub fn into_network(self) -> Result<Network> {
        let layers = self
            .layers
            .into_iter()
            .map(LayerSpec::into_layer)
            .collect::<Result<Vec<_>>>()?;
        Network::new(self.input_dim, layers)
    }
}

impl From<&Network> for NetworkSpec {
    fn from(net: &Network) -> Self {
        NetworkSpec {
            input_dim: net.input_dim(),
            layers: net.layers().iter().map(LayerSpec::from).collect(),
        }
    }
}

pub fn parse_json_network(text: &str) -> Result<Network> {
    let spec: NetworkSpec = serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
    spec.into_network()
}

/// Parses a single layer object, e.g. `{"type": "relu"}`.
pub fn parse_json_layer(value: serde_json::Value) -> Result<Layer> {
    let spec: LayerSpec = serde_json::from_value(value).map_err(|e| NetworkError::Schema(e.to_string()))?;
    spec.into_layer()
}

pub fn network_to_json(net: &Network) -> String {
    serde_json::to_string(&NetworkSpec::from(net)).expect("network specs always serialize")
}
