//! Random networks and polygons for tests, benchmarks and demos.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::geometry::Point;
use crate::network::{Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    HardTanh,
    /// Max over consecutive pairs (the last unit alone if the width is odd).
    MaxPool,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::HardTanh,
        Activation::MaxPool,
    ];
}

/// Affine layer with uniform weights scaled by `1/sqrt(fan_in)` and biases
/// in `[-bias_scale, bias_scale]`.
pub fn random_affine<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize, bias_scale: f64) -> Layer {
    let limit = (6.0 / inputs as f64).sqrt();
    let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.gen_range(-limit..limit));
    let bias = Array1::from_shape_fn(outputs, |_| {
        if bias_scale > 0.0 {
            rng.gen_range(-bias_scale..bias_scale)
        } else {
            0.0
        }
    });
    Layer::affine(weights, bias).expect("shapes agree by construction")
}

fn activation_layer<R: Rng + ?Sized>(rng: &mut R, act: Activation, width: usize) -> (Layer, usize) {
    match act {
        Activation::Relu => (Layer::Relu, width),
        Activation::LeakyRelu => (
            Layer::leaky_relu(rng.gen_range(0.01..0.3)).expect("alpha in range"),
            width,
        ),
        Activation::HardTanh => (Layer::HardTanh, width),
        Activation::MaxPool => {
            let groups: Vec<Vec<usize>> = (0..width)
                .step_by(2)
                .map(|i| (i..(i + 2).min(width)).collect())
                .collect();
            let out = groups.len();
            (Layer::MaxPool { groups }, out)
        }
    }
}

/// `affine → act → … → affine`, one activation per hidden width.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    input_dim: usize,
    hidden: &[(usize, Activation)],
    output_dim: usize,
) -> Network {
    let mut layers = Vec::with_capacity(2 * hidden.len() + 1);
    let mut dim = input_dim;
    for &(width, act) in hidden {
        layers.push(random_affine(rng, dim, width, 0.5));
        let (layer, out) = activation_layer(rng, act, width);
        layers.push(layer);
        dim = out;
    }
    layers.push(random_affine(rng, dim, output_dim, 0.5));
    Network::new(input_dim, layers).expect("dimensions chain by construction")
}

pub fn random_relu_network<R: Rng + ?Sized>(
    rng: &mut R,
    input_dim: usize,
    hidden: &[usize],
    output_dim: usize,
) -> Network {
    let spec: Vec<_> = hidden.iter().map(|&w| (w, Activation::Relu)).collect();
    random_network(rng, input_dim, &spec, output_dim)
}

/// Random hidden layers with activations drawn from [`Activation::ALL`].
pub fn random_mixed_network<R: Rng + ?Sized>(
    rng: &mut R,
    input_dim: usize,
    hidden: &[usize],
    output_dim: usize,
) -> Network {
    let spec: Vec<_> = hidden
        .iter()
        .map(|&w| (w, Activation::ALL[rng.gen_range(0..Activation::ALL.len())]))
        .collect();
    random_network(rng, input_dim, &spec, output_dim)
}

/// A convex polygon inscribed in the circle of `radius` around `center`,
/// counter-clockwise, with `n ≥ 3` vertices at well-separated random angles.
pub fn random_convex_polygon<R: Rng + ?Sized>(rng: &mut R, center: [f64; 2], radius: f64, n: usize) -> Vec<Point> {
    assert!(n >= 3, "a polygon needs at least 3 vertices");
    let slot = std::f64::consts::TAU / n as f64;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|k| {
            let a = phase + slot * (k as f64 + rng.gen_range(0.1..0.9));
            Point::from(vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()])
        })
        .collect()
}

/// Lifts 2D points into R^n along orthonormal directions `u`, `w` at `origin`.
pub fn embed_polygon(points: &[Point], origin: &[f64], u: &[f64], w: &[f64]) -> Vec<Point> {
    points
        .iter()
        .map(|p| {
            Point::from(
                origin
                    .iter()
                    .zip(u.iter().zip(w))
                    .map(|(o, (a, b))| o + p[0] * a + p[1] * b)
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

/// A random orthonormal pair in R^n (n ≥ 2).
pub fn random_plane<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nu = crate::geometry::norm(&u);
        if nu < 1e-3 {
            continue;
        }
        let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
        let along = crate::geometry::dot(&u, &v);
        let w: Vec<f64> = v.iter().zip(&u).map(|(x, ui)| x - along * ui).collect();
        let nw = crate::geometry::norm(&w);
        if nw < 1e-3 {
            continue;
        }
        return (u, w.iter().map(|x| x / nw).collect());
    }
}
