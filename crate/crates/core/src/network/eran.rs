//! ERAN-style fully-connected text format.
//!
//! The file is a sequence of blocks:
//!
//! ```text
//! ReLU
//! [[1.0], [1.0], [-1.0]]
//! [-1.0, 0.0, 0.0]
//! Affine
//! [[1.0, -1.0, -1.0]]
//! [0.0]
//! ```
//!
//! Each block is a tag line, a weight matrix, and a bias vector. `Affine`
//! yields a bare affine layer; any other tag yields the affine layer followed
//! by that activation. `LeakyReLU` takes an optional slope on the tag line
//! (`LeakyReLU 0.2` or `LeakyReLU alpha=0.2`, default 0.01). `MaxPool` blocks
//! carry a fourth line listing the index groups, e.g. `[[0, 1], [2, 3]]`.
//! Blank lines are ignored.

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;

use super::{Layer, Network, NetworkError, Result};

const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

enum Tag {
    Affine,
    Relu,
    LeakyRelu(f64),
    HardTanh,
    MaxPool,
}

pub fn parse_eran(text: &str) -> Result<Network> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut layers = Vec::new();
    let mut input_dim = None;
    while let Some((line, tag_line)) = lines.next() {
        let tag = parse_tag(line, tag_line)?;
        let (wline, wtext) = lines.next().ok_or_else(|| eof(line, "weight matrix"))?;
        let weights = parse_matrix(wline, wtext)?;
        let (bline, btext) = lines.next().ok_or_else(|| eof(wline, "bias vector"))?;
        let bias: Vec<f64> = parse_list(bline, btext)?;
        if bias.len() != weights.nrows() {
            return Err(NetworkError::Parse {
                line: bline,
                message: format!(
                    "bias has {} entries but weights have {} rows",
                    bias.len(),
                    weights.nrows()
                ),
            });
        }
        input_dim.get_or_insert(weights.ncols());
        layers.push(Layer::affine(weights, Array1::from(bias)).map_err(|e| at(bline, e))?);
        match tag {
            Tag::Affine => {}
            Tag::Relu => layers.push(Layer::Relu),
            Tag::LeakyRelu(alpha) => layers.push(Layer::leaky_relu(alpha).map_err(|e| at(line, e))?),
            Tag::HardTanh => layers.push(Layer::HardTanh),
            Tag::MaxPool => {
                let (gline, gtext) = lines.next().ok_or_else(|| eof(bline, "maxpool groups"))?;
                let groups: Vec<Vec<usize>> = parse_list(gline, gtext)?;
                layers.push(Layer::MaxPool { groups });
            }
        }
    }
    let input_dim = input_dim.ok_or(NetworkError::Parse {
        line: 0,
        message: "no layers".into(),
    })?;
    Network::new(input_dim, layers)
}

fn parse_tag(line: usize, text: &str) -> Result<Tag> {
    let mut parts = text.split_whitespace();
    let name = parts.next().unwrap_or_default();
    let tag = match name {
        "Affine" => Tag::Affine,
        "ReLU" => Tag::Relu,
        "HardTanh" => Tag::HardTanh,
        "MaxPool" => Tag::MaxPool,
        "LeakyReLU" => {
            let alpha = match parts.next() {
                None => DEFAULT_LEAKY_ALPHA,
                Some(arg) => {
                    let raw = arg.strip_prefix("alpha=").unwrap_or(arg);
                    raw.parse().map_err(|_| NetworkError::Parse {
                        line,
                        message: format!("bad leaky relu slope {arg:?}"),
                    })?
                }
            };
            Tag::LeakyRelu(alpha)
        }
        other => {
            return Err(NetworkError::UnsupportedLayer {
                line,
                tag: other.to_string(),
            })
        }
    };
    if let Some(extra) = parts.next() {
        return Err(NetworkError::Parse {
            line,
            message: format!("unexpected token {extra:?} after layer tag"),
        });
    }
    Ok(tag)
}

fn parse_list<T: DeserializeOwned>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| NetworkError::Parse {
        line,
        message: format!("malformed list: {e}"),
    })
}

fn parse_matrix(line: usize, text: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = parse_list(line, text)?;
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 {
        return Err(NetworkError::Parse {
            line,
            message: "empty weight matrix".into(),
        });
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(NetworkError::Parse {
            line,
            message: format!("ragged matrix: row {r} has {} entries, expected {ncols}", rows[r].len()),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / ncols;
    Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked above"))
}

fn eof(line: usize, what: &str) -> NetworkError {
    NetworkError::Parse {
        line: line + 1,
        message: format!("unexpected end of input, expected {what}"),
    }
}

fn at(line: usize, err: NetworkError) -> NetworkError {
    NetworkError::Parse {
        line,
        message: err.to_string(),
    }
}
