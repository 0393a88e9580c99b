use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{piece_sides, Engine, EngineError, LayerTransformer, Result, TransformerKind};
use crate::geometry::{lex_cmp, split_by_plane, validate_region, PlanarRegion, Point, Sign, SplitOutcome, Tolerances};
use crate::network::Network;

/// A finite set of convex polygons covering the input polygon, each lying in
/// a single linear piece of the network prefix that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSet2D {
    input_polytope: PlanarRegion,
    regions: Vec<PlanarRegion>,
}

impl PartitionSet2D {
    /// The trivial partition `{X}` under the identity map.
    pub fn identity(input_polytope: PlanarRegion) -> Self {
        let seed =
            PlanarRegion::from_parts_unchecked(input_polytope.preimage().to_vec(), input_polytope.preimage().to_vec());
        Self {
            regions: vec![seed.clone()],
            input_polytope: seed,
        }
    }

    pub fn from_parts(input_polytope: PlanarRegion, regions: Vec<PlanarRegion>) -> Self {
        Self {
            input_polytope,
            regions,
        }
    }

    pub fn input_polytope(&self) -> &PlanarRegion {
        &self.input_polytope
    }

    pub fn regions(&self) -> &[PlanarRegion] {
        &self.regions
    }

    pub fn into_regions(self) -> Vec<PlanarRegion> {
        self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn image_dim(&self) -> usize {
        self.regions
            .first()
            .map_or(self.input_polytope.input_dim(), PlanarRegion::image_dim)
    }

    pub fn total_area(&self) -> f64 {
        self.regions.iter().map(PlanarRegion::area).sum()
    }

    /// Rotates each region to start at its smallest vertex and sorts regions
    /// lexicographically by preimage vertex list.
    pub fn canonicalize(&mut self) {
        self.regions.iter_mut().for_each(PlanarRegion::rotate_canonical);
        self.regions.sort_by(|a, b| {
            a.preimage()
                .iter()
                .zip(b.preimage())
                .map(|(p, q)| lex_cmp(p, q))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| a.len().cmp(&b.len()))
        });
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(PartitionJson {
            input_polytope: self.input_polytope.preimage().to_vec(),
            regions: self.regions.iter().map(|r| RegionJson::new(r, None)).collect(),
        })
        .expect("partition sets always serialize")
    }

    /// Compact canonical JSON text (no trailing newline).
    pub fn to_json_string(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json_str(text: &str, tol: &Tolerances) -> Result<Self, String> {
        let raw: PartitionJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let input_polytope = validate_region(raw.input_polytope, tol).map_err(|e| e.to_string())?;
        let regions = raw
            .regions
            .into_iter()
            .map(|r| PlanarRegion::with_image(r.preimage, r.image, tol).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            input_polytope,
            regions,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionJson {
    input_polytope: Vec<Point>,
    regions: Vec<RegionJson>,
}

/// Wire form of one region; `label` is present only for classified regions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RegionJson {
    pub preimage: Vec<Point>,
    pub image: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl RegionJson {
    pub(crate) fn new(r: &PlanarRegion, label: Option<usize>) -> Self {
        Self {
            preimage: r.preimage().to_vec(),
            image: r.image().to_vec(),
            label,
        }
    }
}

impl Engine {
    /// Pushes `parts` through one layer transformer.
    ///
    /// Piecewise transformers run a worklist per input region: a region that
    /// straddles some hyperplane is split by the smallest-index such
    /// hyperplane and both halves are re-queued; a region straddling none is
    /// mapped through its linear piece and emitted.
    pub fn extend_2d(&self, t: &LayerTransformer, parts: &PartitionSet2D) -> Result<PartitionSet2D> {
        if t.input_dim() != parts.image_dim() {
            return Err(EngineError::DimensionMismatch {
                expected: t.input_dim(),
                found: parts.image_dim(),
            });
        }
        let regions = if t.kind() == TransformerKind::Linear {
            let map = |r: &PlanarRegion| {
                let mut r = r.clone();
                t.map_piece(&[], &[], image_mut(&mut r));
                r
            };
            if self.is_parallel() {
                self.install(|| parts.regions.par_iter().map(map).collect())
            } else {
                parts.regions.iter().map(map).collect()
            }
        } else {
            let live = AtomicUsize::new(parts.regions.len());
            let chunks: Vec<Result<Vec<PlanarRegion>>> = if self.is_parallel() {
                self.install(|| parts.regions.par_iter().map(|r| self.refine(t, r, &live)).collect())
            } else {
                parts.regions.iter().map(|r| self.refine(t, r, &live)).collect()
            };
            let mut regions = Vec::with_capacity(live.load(Ordering::Relaxed));
            for chunk in chunks {
                match chunk {
                    Ok(c) => regions.extend(c),
                    Err(EngineError::BudgetExceeded { limit, .. }) => {
                        return Err(EngineError::BudgetExceeded {
                            limit,
                            count: live.load(Ordering::Relaxed),
                        })
                    }
                    Err(e) => return Err(e),
                }
            }
            regions
        };
        Ok(PartitionSet2D {
            input_polytope: parts.input_polytope.clone(),
            regions,
        })
    }

    fn refine(&self, t: &LayerTransformer, region: &PlanarRegion, live: &AtomicUsize) -> Result<Vec<PlanarRegion>> {
        let tol = self.tolerances();
        let limit = self.config().region_budget;
        let planes = t.hyperplanes();
        let mut out = Vec::new();
        let mut stack = vec![(region.clone(), 0usize)];
        'work: while let Some((mut r, start)) = stack.pop() {
            for (k, h) in planes.iter().enumerate().skip(start) {
                match split_by_plane(&r, h, tol)? {
                    SplitOutcome::NoSplit => {}
                    SplitOutcome::Clamped(kept) => r = kept,
                    SplitOutcome::Split { a, b } => {
                        let count = live.fetch_add(1, Ordering::Relaxed) + 1;
                        if count > limit {
                            return Err(EngineError::BudgetExceeded { limit, count });
                        }
                        stack.push((b, k + 1));
                        stack.push((a, k + 1));
                        continue 'work;
                    }
                }
            }
            if live.load(Ordering::Relaxed) > limit {
                return Err(EngineError::BudgetExceeded {
                    limit,
                    count: live.load(Ordering::Relaxed),
                });
            }
            let centroid = r.image_centroid();
            let sides = match piece_sides(planes, r.image(), &centroid, tol.side) {
                Ok(sides) => sides,
                // Crossing points can land a rounding error outside the band
                // of a hyperplane that was already cleared; re-split from it.
                Err(j) if j < start => {
                    stack.push((r, j));
                    continue;
                }
                Err(_) => lenient_sides(t, &r, &centroid, tol.side),
            };
            t.map_piece(&sides, &centroid, image_mut(&mut r));
            out.push(r);
        }
        Ok(out)
    }

    /// Computes the symbolic representation of `net` on the polygon `x`.
    pub fn symbolic_rep_2d(&self, net: &Network, x: &PlanarRegion) -> Result<PartitionSet2D> {
        if x.input_dim() != net.input_dim() {
            return Err(EngineError::DimensionMismatch {
                expected: net.input_dim(),
                found: x.input_dim(),
            });
        }
        let mut parts = PartitionSet2D::identity(x.clone());
        for (i, layer) in net.layers().iter().enumerate() {
            let t = LayerTransformer::new(layer, net.layer_input_dim(i));
            parts = self.extend_2d(&t, &parts)?;
        }
        parts.canonicalize();
        Ok(parts)
    }
}

/// Sides for a piece left straddling a hyperplane because the only possible
/// cut was degenerate; the centroid decides those hyperplanes.
fn lenient_sides(t: &LayerTransformer, r: &PlanarRegion, centroid: &[f64], eps: f64) -> Vec<Sign> {
    t.hyperplanes()
        .iter()
        .map(|h| {
            let c = h.classify(centroid, eps);
            if c.is_strict() {
                return c;
            }
            r.image()
                .iter()
                .map(|p| h.classify(p, eps))
                .find(|s| s.is_strict())
                .unwrap_or(Sign::Zero)
        })
        .collect()
}

fn image_mut(r: &mut PlanarRegion) -> &mut [Point] {
    r.image_mut()
}

/// [`Engine::extend_2d`] on the default engine.
pub fn extend_2d(t: &LayerTransformer, parts: &PartitionSet2D) -> Result<PartitionSet2D> {
    Engine::default().extend_2d(t, parts)
}

/// [`Engine::symbolic_rep_2d`] on the default engine.
pub fn symbolic_rep_2d(net: &Network, x: &PlanarRegion) -> Result<PartitionSet2D> {
    Engine::default().symbolic_rep_2d(net, x)
}
