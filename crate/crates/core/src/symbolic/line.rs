use serde::{Deserialize, Serialize};

use super::{Engine, EngineError, LayerTransformer, Result, TransformerKind};
use crate::geometry::Point;
use crate::network::Network;

/// A segment `start → end` cut at breakpoint ratios `t`, with the image of
/// every breakpoint. The prefix network is affine between neighbouring
/// breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedLine {
    start: Point,
    end: Point,
    breakpoints: Vec<f64>,
    images: Vec<Point>,
}

impl SegmentedLine {
    /// The unsplit segment under the identity map.
    pub fn identity(start: Point, end: Point) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(EngineError::DimensionMismatch {
                expected: start.dim(),
                found: end.dim(),
            });
        }
        if start.distance(&end) == 0.0 {
            return Err(EngineError::DegenerateLine);
        }
        Ok(Self {
            images: vec![start.clone(), end.clone()],
            start,
            end,
            breakpoints: vec![0.0, 1.0],
        })
    }

    pub fn start(&self) -> &Point {
        &self.start
    }

    pub fn end(&self) -> &Point {
        &self.end
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn images(&self) -> &[Point] {
        &self.images
    }

    pub fn image_dim(&self) -> usize {
        self.images[0].dim()
    }

    /// Number of linear segments.
    pub fn segment_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.start.lerp(&self.end, t)
    }

    /// Input-space breakpoints.
    pub fn preimages(&self) -> Vec<Point> {
        self.breakpoints.iter().map(|&t| self.point_at(t)).collect()
    }

    /// `(t_k, t_{k+1})` for every segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "start": self.start,
            "end": self.end,
            "breakpoints": self.breakpoints,
            "preimages": self.preimages(),
            "images": self.images,
        })
    }

    /// Compact canonical JSON text (no trailing newline).
    pub fn to_json_string(&self) -> String {
        self.to_json_value().to_string()
    }
}

/// Crossings closer than this (as a fraction of the segment) are merged.
const RATIO_MERGE: f64 = 1e-12;

impl Engine {
    /// Pushes `line` through one layer transformer.
    pub fn extend_1d(&self, t: &LayerTransformer, line: &SegmentedLine) -> Result<SegmentedLine> {
        if t.input_dim() != line.image_dim() {
            return Err(EngineError::DimensionMismatch {
                expected: t.input_dim(),
                found: line.image_dim(),
            });
        }
        let eps = self.tolerances().side;
        let (mut breakpoints, mut images) = (line.breakpoints.clone(), line.images.clone());

        if t.kind() == TransformerKind::Piecewise {
            breakpoints = Vec::with_capacity(line.breakpoints.len());
            images = Vec::with_capacity(line.images.len());
            let mut ratios = Vec::new();
            for k in 0..line.segment_count() {
                let (t0, t1) = (line.breakpoints[k], line.breakpoints[k + 1]);
                let (a, b) = (&line.images[k], &line.images[k + 1]);
                breakpoints.push(t0);
                images.push(a.clone());

                ratios.clear();
                for h in t.hyperplanes() {
                    let (sa, sb) = (h.classify(a, eps), h.classify(b, eps));
                    if sa.is_strict() && sb == sa.opposite() {
                        let (ra, rb) = (h.residual(a), h.residual(b));
                        ratios.push(ra / (ra - rb));
                    }
                }
                ratios.sort_by(f64::total_cmp);
                ratios.dedup_by(|next, prev| *next - *prev <= RATIO_MERGE);
                for &r in &ratios {
                    breakpoints.push(t0 + r * (t1 - t0));
                    images.push(a.lerp(b, r));
                }
                if breakpoints.len() > self.config().region_budget {
                    return Err(EngineError::BudgetExceeded {
                        limit: self.config().region_budget,
                        count: breakpoints.len(),
                    });
                }
            }
            breakpoints.push(1.0);
            images.push(line.images.last().expect("lines have two endpoints").clone());
        }

        // Each breakpoint is shared by two affine pieces that agree on it, so
        // evaluating the layer directly is exact.
        if let Some(layer) = t.layer() {
            images.iter_mut().for_each(|p| *p = layer.apply(p).into());
        }
        Ok(SegmentedLine {
            start: line.start.clone(),
            end: line.end.clone(),
            breakpoints,
            images,
        })
    }

    /// Computes the symbolic representation of `net` on the segment `a → b`.
    pub fn symbolic_rep_1d(&self, net: &Network, a: &Point, b: &Point) -> Result<SegmentedLine> {
        for p in [a, b] {
            if p.dim() != net.input_dim() {
                return Err(EngineError::DimensionMismatch {
                    expected: net.input_dim(),
                    found: p.dim(),
                });
            }
        }
        let mut line = SegmentedLine::identity(a.clone(), b.clone())?;
        for (i, layer) in net.layers().iter().enumerate() {
            let t = LayerTransformer::new(layer, net.layer_input_dim(i));
            line = self.extend_1d(&t, &line)?;
        }
        Ok(line)
    }
}

/// [`Engine::extend_1d`] on the default engine.
pub fn extend_1d(t: &LayerTransformer, line: &SegmentedLine) -> Result<SegmentedLine> {
    Engine::default().extend_1d(t, line)
}

/// [`Engine::symbolic_rep_1d`] on the default engine.
pub fn symbolic_rep_1d(net: &Network, a: &Point, b: &Point) -> Result<SegmentedLine> {
    Engine::default().symbolic_rep_1d(net, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::example_net;
    use crate::network::Layer;
    use ndarray::array;

    fn p(c: &[f64]) -> Point {
        Point::from(c.to_vec())
    }

    #[test]
    fn example_net_breakpoints() {
        let line = symbolic_rep_1d(&example_net(), &p(&[-1.0]), &p(&[2.0])).unwrap();
        let xs: Vec<f64> = line.preimages().iter().map(|q| q[0]).collect();
        assert_eq!(xs.len(), 4);
        for (got, want) in xs.iter().zip([-1.0, 0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{xs:?}");
        }
        let ts = line.breakpoints();
        assert!((ts[1] - 1.0 / 3.0).abs() < 1e-15 && (ts[2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relu_single_crossing() {
        let line = SegmentedLine::identity(p(&[-1.0]), p(&[2.0])).unwrap();
        let out = extend_1d(&LayerTransformer::new(&Layer::Relu, 1), &line).unwrap();
        assert_eq!(out.breakpoints().len(), 3);
        assert!((out.breakpoints()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.images()[0].coords(), &[0.0]);
        assert_eq!(out.images()[2].coords(), &[2.0]);
    }

    #[test]
    fn affine_keeps_breakpoints() {
        let line = SegmentedLine::identity(p(&[-1.0]), p(&[2.0])).unwrap();
        let line = extend_1d(&LayerTransformer::new(&Layer::Relu, 1), &line).unwrap();
        let affine = Layer::affine(array![[3.0]], array![1.0]).unwrap();
        let out = extend_1d(&LayerTransformer::new(&affine, 1), &line).unwrap();
        assert_eq!(out.breakpoints(), line.breakpoints());
        assert_eq!(out.images()[2].coords(), &[7.0]);
    }

    #[test]
    fn identity_net_keeps_endpoints() {
        let line = symbolic_rep_1d(&Network::identity(2), &p(&[0.0, 0.0]), &p(&[1.0, 1.0])).unwrap();
        assert_eq!(line.breakpoints(), &[0.0, 1.0]);
    }

    #[test]
    fn degenerate_and_mismatched_lines() {
        let net = Network::identity(1);
        assert_eq!(
            symbolic_rep_1d(&net, &p(&[1.0]), &p(&[1.0])),
            Err(EngineError::DegenerateLine)
        );
        assert!(matches!(
            symbolic_rep_1d(&net, &p(&[1.0, 0.0]), &p(&[1.0, 2.0])),
            Err(EngineError::DimensionMismatch { .. })
        ));
    }
}
