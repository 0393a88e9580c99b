use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result};
use crate::geometry::Point;
use crate::network::Network;
use crate::symbolic::{point_gradient, region_jacobian, symbolic_rep_1d, EngineError};

/// Per-dimension Integrated Gradients of output `target` along the segment
/// from `baseline` to `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub target: usize,
    pub baseline: Point,
    pub input: Point,
    pub values: Vec<f64>,
    pub f_input: f64,
    pub f_baseline: f64,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `f_c(input) − f_c(baseline)`, which an exact attribution sums to.
    pub fn expected_total(&self) -> f64 {
        self.f_input - self.f_baseline
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("attributions always serialize")
    }

    pub fn to_json_string(&self) -> String {
        self.to_json_value().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Samples at `α = j/m`, `j = 0..m−1`.
    Left,
    /// Samples at `α = j/m`, `j = 0..=m`, endpoints weighted ½.
    Trapezoid,
}

fn check(net: &Network, baseline: &Point, input: &Point, target: usize) -> Result<()> {
    for p in [baseline, input] {
        if p.dim() != net.input_dim() {
            return Err(EngineError::DimensionMismatch {
                expected: net.input_dim(),
                found: p.dim(),
            }
            .into());
        }
    }
    if target >= net.output_dim() {
        return Err(AnalysisError::LabelOutOfRange {
            index: target,
            outputs: net.output_dim(),
        });
    }
    Ok(())
}

fn attribution(net: &Network, baseline: &Point, input: &Point, target: usize, values: Vec<f64>) -> Result<Attribution> {
    Ok(Attribution {
        target,
        f_input: net.evaluate(input)?[target],
        f_baseline: net.evaluate(baseline)?[target],
        baseline: baseline.clone(),
        input: input.clone(),
        values,
    })
}

/// Exact IG: the network is linear on every segment of the symbolic
/// representation of `baseline → input`, so the path integral is a finite
/// sum of segment displacement times constant gradient.
pub fn exact_ig(net: &Network, baseline: &Point, input: &Point, target: usize) -> Result<Attribution> {
    check(net, baseline, input, target)?;
    let line = symbolic_rep_1d(net, baseline, input)?;
    let pre = line.preimages();
    let dir: Vec<f64> = input.iter().zip(baseline.iter()).map(|(b, a)| b - a).collect();
    let mut values = vec![0.0; net.input_dim()];
    for w in pre.windows(2) {
        let grad = match region_jacobian(net, w) {
            Ok(j) => j.row(target).to_vec(),
            // Sub-tolerance segment classified inconsistently; the midpoint
            // gradient along the path is the same linear piece.
            Err(EngineError::DegenerateRegion { .. }) => point_gradient(net, &w[0].lerp(&w[1], 0.5), &dir, target)?,
            Err(e) => return Err(e.into()),
        };
        for (i, v) in values.iter_mut().enumerate() {
            *v += (w[1][i] - w[0][i]) * grad[i];
        }
    }
    attribution(net, baseline, input, target, values)
}

/// Exact IG for many `(baseline, input)` pairs, computed in parallel.
pub fn exact_ig_batch(net: &Network, pairs: &[(Point, Point)], target: usize) -> Vec<Result<Attribution>> {
    pairs.par_iter().map(|(b, x)| exact_ig(net, b, x, target)).collect()
}

const CHUNK: usize = 4096;

/// Riemann-sum IG with `samples` intervals.
///
/// Gradients are taken from the activation pattern at each sample point;
/// on a kink the one-sided pattern towards the interior of the path is used.
/// Partial sums are formed over fixed-size chunks so the result does not
/// depend on the thread count.
pub fn sampled_ig(
    net: &Network,
    baseline: &Point,
    input: &Point,
    target: usize,
    samples: usize,
    scheme: Scheme,
) -> Result<Attribution> {
    check(net, baseline, input, target)?;
    if samples == 0 {
        return Err(AnalysisError::NoSamples);
    }
    let n = net.input_dim();
    let dir: Vec<f64> = input.iter().zip(baseline.iter()).map(|(b, a)| b - a).collect();
    let back: Vec<f64> = dir.iter().map(|d| -d).collect();
    let m = samples as f64;
    let count = match scheme {
        Scheme::Left => samples,
        Scheme::Trapezoid => samples + 1,
    };
    let sample = |j: usize| -> Result<Vec<f64>> {
        let weight = match scheme {
            Scheme::Trapezoid if j == 0 || j == samples => 0.5 / m,
            _ => 1.0 / m,
        };
        let x = if j == samples {
            input.to_vec()
        } else {
            let alpha = j as f64 / m;
            baseline.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect()
        };
        let towards = if j == samples { &back } else { &dir };
        let g = point_gradient(net, &x, towards, target)?;
        Ok(g.into_iter().map(|v| v * weight).collect())
    };
    let partials = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; n];
            for j in c * CHUNK..((c + 1) * CHUNK).min(count) {
                for (a, g) in acc.iter_mut().zip(sample(j)?) {
                    *a += g;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    for (v, d) in values.iter_mut().zip(&dir) {
        *v *= d;
    }
    attribution(net, baseline, input, target, values)
}
