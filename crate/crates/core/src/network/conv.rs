use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Layer, NetworkError, Result};

/// A 2D convolution over a `channels × height × width` input, flattened
/// row-major as `(channel, row, col)` on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub input_shape: [usize; 3],
    /// `kernel[out_channel][in_channel][row][col]`.
    pub kernel: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
    #[serde(default = "unit_stride")]
    pub stride: [usize; 2],
    #[serde(default)]
    pub padding: [usize; 2],
}

fn unit_stride() -> [usize; 2] {
    [1, 1]
}

impl ConvSpec {
    fn kernel_shape(&self) -> Result<[usize; 4]> {
        let out_c = self.kernel.len();
        let in_c = self.kernel.first().map_or(0, Vec::len);
        let kh = self.kernel.first().and_then(|k| k.first()).map_or(0, Vec::len);
        let kw = self
            .kernel
            .first()
            .and_then(|k| k.first())
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        if out_c == 0 || in_c == 0 || kh == 0 || kw == 0 {
            return Err(NetworkError::Shape("kernel has an empty dimension".into()));
        }
        let uniform = self.kernel.iter().all(|k| {
            k.len() == in_c
                && k.iter()
                    .all(|rows| rows.len() == kh && rows.iter().all(|r| r.len() == kw))
        });
        if !uniform {
            return Err(NetworkError::Shape("kernel is ragged".into()));
        }
        Ok([out_c, in_c, kh, kw])
    }

    /// Output `(channels, height, width)`.
    pub fn output_shape(&self) -> Result<[usize; 3]> {
        let [out_c, in_c, kh, kw] = self.kernel_shape()?;
        let [c, h, w] = self.input_shape;
        if in_c != c {
            return Err(NetworkError::Shape(format!(
                "kernel expects {in_c} input channels, input has {c}"
            )));
        }
        let mut out = [out_c, 0, 0];
        for (axis, (size, k)) in [(h, kh), (w, kw)].into_iter().enumerate() {
            let padded = size + 2 * self.padding[axis];
            let stride = self.stride[axis];
            if stride == 0 || stride > padded {
                return Err(NetworkError::Shape(format!(
                    "stride {stride} does not fit input extent {padded}"
                )));
            }
            if k > padded {
                return Err(NetworkError::Shape(format!(
                    "kernel extent {k} exceeds input extent {padded}"
                )));
            }
            out[axis + 1] = (padded - k) / stride + 1;
        }
        Ok(out)
    }
}

/// Lowers a convolution to the dense affine layer computing it exactly.
#[allow(clippy::needless_range_loop)]
pub fn lower_convolution(spec: &ConvSpec) -> Result<Layer> {
    let [_, in_c, kh, kw] = spec.kernel_shape()?;
    let [out_c, oh, ow] = spec.output_shape()?;
    let [_, h, w] = spec.input_shape;
    let bias = match &spec.bias {
        Some(b) if b.len() != out_c => {
            return Err(NetworkError::Shape(format!(
                "bias has {} entries for {out_c} channels",
                b.len()
            )))
        }
        Some(b) => b.clone(),
        None => vec![0.0; out_c],
    };

    let mut weights = Array2::zeros((out_c * oh * ow, in_c * h * w));
    let mut offsets = Array1::zeros(out_c * oh * ow);
    for oc in 0..out_c {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (oc * oh + oy) * ow + ox;
                offsets[row] = bias[oc];
                for ic in 0..in_c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * spec.stride[0] + ky) as isize - spec.padding[0] as isize;
                            let ix = (ox * spec.stride[1] + kx) as isize - spec.padding[1] as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let col = (ic * h + iy as usize) * w + ix as usize;
                            weights[[row, col]] += spec.kernel[oc][ic][ky][kx];
                        }
                    }
                }
            }
        }
    }
    Layer::affine(weights, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(input_shape: [usize; 3], kernel: Vec<Vec<Vec<Vec<f64>>>>, stride: usize, padding: usize) -> ConvSpec {
        ConvSpec {
            input_shape,
            kernel,
            bias: None,
            stride: [stride, stride],
            padding: [padding, padding],
        }
    }

    #[test]
    fn one_by_one() {
        let layer = lower_convolution(&spec([1, 1, 1], vec![vec![vec![vec![2.0]]]], 1, 0)).unwrap();
        assert_eq!(
            layer,
            Layer::Affine {
                weights: array![[2.0]],
                bias: array![0.0]
            }
        );
    }

    #[test]
    fn single_window_sums_pixels() {
        let ones = vec![vec![vec![vec![1.0, 1.0], vec![1.0, 1.0]]]];
        let layer = lower_convolution(&spec([1, 2, 2], ones, 1, 0)).unwrap();
        assert_eq!(
            layer,
            Layer::Affine {
                weights: array![[1.0, 1.0, 1.0, 1.0]],
                bias: array![0.0]
            }
        );
    }

    #[test]
    fn stride_larger_than_input() {
        let k = vec![vec![vec![vec![1.0]]]];
        assert!(matches!(
            lower_convolution(&spec([1, 2, 2], k, 3, 0)),
            Err(NetworkError::Shape(_))
        ));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn matches_direct_convolution() {
        // 2 input channels, 3x3 input, 2x2 kernel, 2 output channels, stride 1, pad 1.
        let kernel: Vec<Vec<Vec<Vec<f64>>>> = (0..2)
            .map(|o| {
                (0..2)
                    .map(|i| {
                        (0..2)
                            .map(|r| (0..2).map(|c| (o * 8 + i * 4 + r * 2 + c) as f64 - 7.0).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let s = ConvSpec {
            input_shape: [2, 3, 3],
            kernel: kernel.clone(),
            bias: Some(vec![0.5, -1.0]),
            stride: [1, 1],
            padding: [1, 1],
        };
        let [oc, oh, ow] = s.output_shape().unwrap();
        assert_eq!([oc, oh, ow], [2, 4, 4]);
        let layer = lower_convolution(&s).unwrap();
        let x: Vec<f64> = (0..18).map(|v| (v as f64 * 0.37).sin()).collect();
        let got = layer.apply(&x);
        for o in 0..2 {
            for y in 0..4 {
                for xo in 0..4 {
                    let mut acc = [0.5, -1.0][o];
                    for i in 0..2 {
                        for r in 0..2 {
                            for c in 0..2 {
                                let (iy, ix) = (y as isize + r as isize - 1, xo as isize + c as isize - 1);
                                if (0..3).contains(&iy) && (0..3).contains(&ix) {
                                    acc += kernel[o][i][r][c] * x[i * 9 + iy as usize * 3 + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((got[(o * 4 + y) * 4 + xo] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let k = vec![vec![vec![vec![1.0]], vec![vec![1.0]]]];
        assert!(lower_convolution(&spec([1, 2, 2], k, 1, 0)).is_err());
    }
}
