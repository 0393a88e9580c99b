use serde_json::json;

use super::{AnalysisError, Result};
use crate::geometry::{Hyperplane, PlanarRegion};
use crate::network::Network;
use crate::symbolic::{Engine, LayerTransformer};

/// A region of the input polygon on which the network's argmax is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegion {
    pub region: PlanarRegion,
    pub label: usize,
}

/// Index of the largest entry; entries within `eps` of the maximum tie and
/// the smallest index wins.
fn argmax(values: &[f64], eps: f64) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = eps * (1.0 + max.abs());
    values.iter().position(|&v| v >= max - slack).unwrap_or(0)
}

pub fn decision_regions(net: &Network, x: &PlanarRegion) -> Result<Vec<LabeledRegion>> {
    decision_regions_with(&Engine::default(), net, x)
}

/// Partitions `x` into regions of constant argmax.
///
/// After the symbolic representation, every region is split further along
/// `f_a = f_b` for each pair of outputs `a < b`; each resulting region is
/// labeled by the argmax at its image centroid.
pub fn decision_regions_with(engine: &Engine, net: &Network, x: &PlanarRegion) -> Result<Vec<LabeledRegion>> {
    let outputs = net.output_dim();
    if outputs < 2 {
        return Err(AnalysisError::TooFewOutputs(outputs));
    }
    let parts = engine.symbolic_rep_2d(net, x)?;
    let planes = (0..outputs)
        .flat_map(|a| (a + 1..outputs).map(move |b| Hyperplane::difference(outputs, a, b)))
        .collect();
    let mut parts = engine.extend_2d(&LayerTransformer::boundaries(planes, outputs), &parts)?;
    parts.canonicalize();
    let eps = engine.tolerances().side;
    Ok(parts
        .into_regions()
        .into_iter()
        .map(|region| LabeledRegion {
            label: argmax(&region.image_centroid(), eps),
            region,
        })
        .collect())
}

/// `{"input_polytope": [...], "regions": [{"preimage", "image", "label"}]}`.
pub fn decision_regions_json(x: &PlanarRegion, regions: &[LabeledRegion]) -> serde_json::Value {
    json!({
        "input_polytope": x.preimage(),
        "regions": regions
            .iter()
            .map(|r| json!({
                "preimage": r.region.preimage(),
                "image": r.region.image(),
                "label": r.label,
            }))
            .collect::<Vec<_>>(),
    })
}
