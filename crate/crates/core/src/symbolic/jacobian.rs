use ndarray::{Array2, ArrayView1};

use super::{piece_sides, EngineError, Result};
use crate::geometry::{dot, Point, Sign, Tolerances};
use crate::network::{Layer, Network, NetworkError, Pattern};

/// Jacobian of `net` on a piece of its symbolic representation.
///
/// `vertices` are the input-space vertices of a region (or the two endpoints
/// of a line segment). The activation pattern of every layer is read off the
/// vertex images, with the centroid deciding hyperplanes all vertices lie on,
/// and the per-layer piece matrices are multiplied together. Fails if some
/// layer's hyperplane has vertices strictly on both sides, i.e. the piece is
/// not inside a single linear region.
pub fn region_jacobian(net: &Network, vertices: &[Point]) -> Result<Array2<f64>> {
    region_jacobian_with(net, vertices, Tolerances::default().side)
}

pub fn region_jacobian_with(net: &Network, vertices: &[Point], eps: f64) -> Result<Array2<f64>> {
    if vertices.is_empty() {
        return Err(EngineError::DimensionMismatch {
            expected: net.input_dim(),
            found: 0,
        });
    }
    if let Some(bad) = vertices.iter().find(|v| v.dim() != net.input_dim()) {
        return Err(EngineError::DimensionMismatch {
            expected: net.input_dim(),
            found: bad.dim(),
        });
    }
    let mut jac = Array2::eye(net.input_dim());
    let mut images = vertices.to_vec();
    for (layer_index, layer) in net.layers().iter().enumerate() {
        let dim = net.layer_input_dim(layer_index);
        let centroid = Point::centroid(&images);
        let map = match layer {
            Layer::Affine { .. } => layer.pattern(dim, &[], &centroid),
            _ => {
                let sides = piece_sides(&layer.hyperplanes(dim), &images, &centroid, eps).map_err(|hyperplane| {
                    EngineError::DegenerateRegion {
                        layer: layer_index,
                        hyperplane,
                    }
                })?;
                layer.pattern(dim, &sides, &centroid)
            }
        };
        jac = map.affine(layer, dim).matrix.dot(&jac);
        images.iter_mut().for_each(|p| *p = map.apply(layer, p).into());
    }
    Ok(jac)
}

/// Activation patterns of every layer at `x`, taking the one-sided limit
/// along `direction` wherever `x` sits on a kink (as if `x` were nudged an
/// infinitesimal step along `direction`). Remaining ties pick the canonical
/// piece.
fn patterns_along(net: &Network, x: &[f64], direction: &[f64]) -> Result<Vec<Pattern>> {
    for v in [x, direction] {
        if v.len() != net.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                layer: 0,
                expected: net.input_dim(),
                found: v.len(),
            }
            .into());
        }
    }
    const KINK: f64 = 1e-12;
    let mut value = x.to_vec();
    let mut dir = direction.to_vec();
    let mut patterns = Vec::with_capacity(net.layers().len());
    for (layer_index, layer) in net.layers().iter().enumerate() {
        let dim = net.layer_input_dim(layer_index);
        let sides: Vec<Sign> = layer
            .hyperplanes(dim)
            .iter()
            .map(|h| {
                let s = h.classify(&value, KINK);
                if s.is_strict() {
                    return s;
                }
                let slope = dot(h.normal(), &dir);
                if slope > 0.0 {
                    Sign::Positive
                } else if slope < 0.0 {
                    Sign::Negative
                } else {
                    Sign::Zero
                }
            })
            .collect();
        let pattern = layer.pattern(dim, &sides, &value);
        // Directions move linearly: drop the bias of affine layers.
        dir = match (&pattern, layer) {
            (Pattern::Linear, Layer::Affine { weights, .. }) => weights.dot(&ArrayView1::from(&dir)).to_vec(),
            (Pattern::HardTanh(_), _) => pattern
                .apply(layer, &dir)
                .iter()
                .zip(&value)
                .map(|(d, v)| {
                    if v.abs() > 1.0 + KINK || (*d).abs() == 1.0 {
                        0.0
                    } else {
                        *d
                    }
                })
                .collect(),
            _ => pattern.apply(layer, &dir),
        };
        value = pattern.apply(layer, &value);
        patterns.push(pattern);
    }
    Ok(patterns)
}

/// Jacobian of `net` at `x`, one-sided along `direction` at kinks.
pub fn point_jacobian(net: &Network, x: &[f64], direction: &[f64]) -> Result<Array2<f64>> {
    let patterns = patterns_along(net, x, direction)?;
    let mut jac = Array2::eye(net.input_dim());
    for (i, (layer, pattern)) in net.layers().iter().zip(&patterns).enumerate() {
        jac = pattern.affine(layer, net.layer_input_dim(i)).matrix.dot(&jac);
    }
    Ok(jac)
}

/// Gradient of output `output` at `x`, one-sided along `direction` at kinks.
///
/// Equivalent to row `output` of [`point_jacobian`], computed with a single
/// backward sweep.
pub fn point_gradient(net: &Network, x: &[f64], direction: &[f64], output: usize) -> Result<Vec<f64>> {
    let patterns = patterns_along(net, x, direction)?;
    let mut g = vec![0.0; net.output_dim()];
    g[output] = 1.0;
    for (i, (layer, pattern)) in net.layers().iter().zip(&patterns).enumerate().rev() {
        g = pattern.pullback(layer, &g, net.layer_input_dim(i));
    }
    Ok(g)
}
