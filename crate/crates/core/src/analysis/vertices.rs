use crate::geometry::{lex_cmp, Point};
use crate::symbolic::PartitionSet2D;

/// All region vertices of `parts` with their images, merged within
/// `eps` (Euclidean, in input space) and sorted lexicographically.
pub fn enumerate_vertices(parts: &PartitionSet2D, eps: f64) -> Vec<(Point, Point)> {
    let mut all: Vec<(Point, Point)> = parts
        .regions()
        .iter()
        .flat_map(|r| r.preimage().iter().cloned().zip(r.image().iter().cloned()))
        .collect();
    all.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut kept: Vec<(Point, Point)> = Vec::new();
    // Sweep by first coordinate; only points within `eps` of it can merge.
    let mut window_start = 0;
    for (p, img) in all {
        while window_start < kept.len() && kept[window_start].0[0] < p[0] - eps {
            window_start += 1;
        }
        if !kept[window_start..].iter().any(|(q, _)| q.distance(&p) <= eps) {
            kept.push((p, img));
        }
    }
    kept.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    kept
}
