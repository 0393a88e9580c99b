//! Fixed, seeded workloads shared by the benchmarks.

use exactnet_core::geometry::{validate_region, PlanarRegion, Point};
use exactnet_core::random::{embed_polygon, random_network, random_plane, Activation};
use exactnet_core::{Network, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Workload {
    pub network: Network,
    pub plane: PlanarRegion,
    pub line: (Point, Point),
}

/// `depth` ReLU layers of `width` units on `input_dim` inputs, with a square
/// of half-side `extent` on a random 2D slice through the origin and a
/// diagonal of that square as the line.
pub fn relu_workload(seed: u64, input_dim: usize, width: usize, depth: usize, extent: f64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = random_network(&mut rng, input_dim, &vec![(width, Activation::Relu); depth], 5);
    let (u, w) = random_plane(&mut rng, input_dim);
    let corners: Vec<Point> = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
        .iter()
        .map(|c| Point::from(vec![c[0] * extent, c[1] * extent]))
        .collect();
    let lifted = embed_polygon(&corners, &vec![0.0; input_dim], &u, &w);
    let line = (lifted[0].clone(), lifted[2].clone());
    let plane = validate_region(lifted, &Tolerances::default()).expect("square is a valid polygon");
    Workload { network, plane, line }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_is_consistent() {
        let w = relu_workload(1, 6, 8, 2, 1.0);
        assert_eq!(w.network.input_dim(), 6);
        assert_eq!(w.plane.len(), 4);
        assert!((w.plane.area() - 4.0).abs() < 1e-9);
    }
}
