//! Forward and backward kernels for the closed op set.
//!
//! All kernels are plain loops with a fixed accumulation order so that
//! repeated runs are bit-identical.

use super::{Tensor, TensorError};

/// 3x3 cross-correlation, stride 1, zero padding 1, no bias.
///
/// `input` is `[C_in, H, W]`, `kernel` is `[C_out, C_in, 3, 3]`, output
/// keeps the input spatial size.
pub fn conv2d_3x3(input: &Tensor, kernel: &Tensor) -> Result<Tensor, TensorError> {
    let (c_in, h, w) = expect_3d(input)?;
    let ks = kernel.shape();
    if ks.len() != 4 || ks[1] != c_in || ks[2] != 3 || ks[3] != 3 {
        return Err(TensorError::ShapeMismatch {
            expected: vec![ks.first().copied().unwrap_or(0), c_in, 3, 3],
            got: ks.to_vec(),
        });
    }
    let c_out = ks[0];
    let mut out = Tensor::zeros(&[c_out, h, w]);
    let x = input.data();
    let k = kernel.data();
    let o = out.data_mut();
    for co in 0..c_out {
        for ci in 0..c_in {
            let in_base = ci * h * w;
            let k_base = (co * c_in + ci) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wgt = k[k_base + ky * 3 + kx];
                    if wgt == 0.0 {
                        continue;
                    }
                    // valid output rows/cols for this kernel tap under padding 1
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1 - ky).min(h);
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1 - kx).min(w);
                    for y in y0..y1 {
                        let in_row = in_base + (y + ky - 1) * w;
                        let out_row = co * h * w + y * w;
                        for xo in x0..x1 {
                            o[out_row + xo] += wgt * x[in_row + xo + kx - 1];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward of [`conv2d_3x3`]: returns `(d_input, d_kernel)`.
pub fn conv2d_3x3_backward(input: &Tensor, kernel: &Tensor, d_out: &Tensor) -> (Tensor, Tensor) {
    let (c_in, h, w) = expect_3d(input).expect("conv backward on checked shapes");
    let c_out = kernel.shape()[0];
    let mut d_in = Tensor::zeros(&[c_in, h, w]);
    let mut d_k = Tensor::zeros(kernel.shape());
    let x = input.data();
    let k = kernel.data();
    let g = d_out.data();
    let di = d_in.data_mut();
    let dk = d_k.data_mut();
    for co in 0..c_out {
        for ci in 0..c_in {
            let in_base = ci * h * w;
            let k_base = (co * c_in + ci) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wgt = k[k_base + ky * 3 + kx];
                    let mut wsum = 0.0;
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1 - ky).min(h);
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1 - kx).min(w);
                    for y in y0..y1 {
                        let in_row = in_base + (y + ky - 1) * w;
                        let out_row = co * h * w + y * w;
                        for xo in x0..x1 {
                            let gv = g[out_row + xo];
                            wsum += gv * x[in_row + xo + kx - 1];
                            di[in_row + xo + kx - 1] += wgt * gv;
                        }
                    }
                    dk[k_base + ky * 3 + kx] += wsum;
                }
            }
        }
    }
    (d_in, d_k)
}

/// 2x2 sum pooling over `[C, H, W]`; each output is the sum of its block.
pub fn sum_pool2(input: &Tensor) -> Result<Tensor, TensorError> {
    let (c, h, w) = expect_3d(input)?;
    if h % 2 != 0 {
        return Err(TensorError::OddExtent {
            op: "sum_pool2",
            extent: h,
        });
    }
    if w % 2 != 0 {
        return Err(TensorError::OddExtent {
            op: "sum_pool2",
            extent: w,
        });
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, ho, wo]);
    let x = input.data();
    let o = out.data_mut();
    for ci in 0..c {
        for y in 0..ho {
            let r0 = ci * h * w + (2 * y) * w;
            let r1 = r0 + w;
            let orow = ci * ho * wo + y * wo;
            for xo in 0..wo {
                o[orow + xo] = x[r0 + 2 * xo] + x[r0 + 2 * xo + 1] + x[r1 + 2 * xo] + x[r1 + 2 * xo + 1];
            }
        }
    }
    Ok(out)
}

/// Backward of [`sum_pool2`]: broadcasts each output gradient to its 2x2 block.
pub fn sum_pool2_backward(input_shape: &[usize], d_out: &Tensor) -> Tensor {
    let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let (ho, wo) = (h / 2, w / 2);
    let mut d_in = Tensor::zeros(input_shape);
    let g = d_out.data();
    let di = d_in.data_mut();
    for ci in 0..c {
        for y in 0..ho {
            let r0 = ci * h * w + (2 * y) * w;
            let r1 = r0 + w;
            let orow = ci * ho * wo + y * wo;
            for xo in 0..wo {
                let gv = g[orow + xo];
                di[r0 + 2 * xo] += gv;
                di[r0 + 2 * xo + 1] += gv;
                di[r1 + 2 * xo] += gv;
                di[r1 + 2 * xo + 1] += gv;
            }
        }
    }
    d_in
}

/// `y = W x (+ b)` with `W: [M, N]`, `x: [N]`.
pub fn linear(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor, TensorError> {
    let n = input.len();
    let ws = weight.shape();
    if ws.len() != 2 || ws[1] != n {
        return Err(TensorError::ShapeMismatch {
            expected: vec![ws.first().copied().unwrap_or(0), n],
            got: ws.to_vec(),
        });
    }
    let m = ws[0];
    if let Some(b) = bias {
        if b.len() != m {
            return Err(TensorError::ShapeMismatch {
                expected: vec![m],
                got: b.shape().to_vec(),
            });
        }
    }
    let mut out = Tensor::zeros(&[m]);
    let x = input.data();
    let wd = weight.data();
    let o = out.data_mut();
    for i in 0..m {
        let row = &wd[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        o[i] = acc + bias.map_or(0.0, |b| b.data()[i]);
    }
    Ok(out)
}

/// Backward of [`linear`]: returns `(d_input, d_weight, d_bias)`.
pub fn linear_backward(
    input: &Tensor,
    weight: &Tensor,
    has_bias: bool,
    d_out: &Tensor,
) -> (Tensor, Tensor, Option<Tensor>) {
    let n = input.len();
    let m = weight.shape()[0];
    let mut d_in = Tensor::zeros(&[n]);
    let mut d_w = Tensor::zeros(weight.shape());
    let x = input.data();
    let wd = weight.data();
    let g = d_out.data();
    let di = d_in.data_mut();
    let dw = d_w.data_mut();
    for i in 0..m {
        let gv = g[i];
        if gv == 0.0 {
            continue;
        }
        let row = &wd[i * n..(i + 1) * n];
        let drow = &mut dw[i * n..(i + 1) * n];
        for j in 0..n {
            drow[j] += gv * x[j];
            di[j] += gv * row[j];
        }
    }
    let d_b = has_bias.then(|| Tensor::from_vec(&[m], g.to_vec()).expect("bias grad shape"));
    (d_in, d_w, d_b)
}

/// Layer normalization over the feature axis with population variance.
///
/// `y = gamma * (x - mean) / sqrt(var + eps) + beta`.
pub fn layer_norm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<Tensor, TensorError> {
    input.check_same_shape(gamma)?;
    input.check_same_shape(beta)?;
    let n = input.len() as f64;
    let mean = input.sum() / n;
    let var = input.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    let data = input
        .data()
        .iter()
        .zip(gamma.data())
        .zip(beta.data())
        .map(|((&x, &g), &b)| g * (x - mean) * inv_std + b)
        .collect();
    Ok(Tensor {
        shape: input.shape().to_vec(),
        data,
    })
}

/// Backward of [`layer_norm`]: returns `(d_input, d_gamma, d_beta)`.
pub fn layer_norm_backward(
    input: &Tensor,
    gamma: &Tensor,
    eps: f64,
    d_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let n = input.len() as f64;
    let mean = input.sum() / n;
    let var = input.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    let xhat: Vec<f64> = input.data().iter().map(|&x| (x - mean) * inv_std).collect();
    let g: Vec<f64> = d_out
        .data()
        .iter()
        .zip(gamma.data())
        .map(|(&dy, &ga)| dy * ga)
        .collect();
    let g_mean = g.iter().sum::<f64>() / n;
    let gx_mean = g.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n;
    let d_in: Vec<f64> = g
        .iter()
        .zip(&xhat)
        .map(|(&gi, &xi)| inv_std * (gi - g_mean - xi * gx_mean))
        .collect();
    let d_gamma: Vec<f64> = d_out
        .data()
        .iter()
        .zip(&xhat)
        .map(|(&dy, &xi)| dy * xi)
        .collect();
    let shape = input.shape().to_vec();
    (
        Tensor {
            shape: shape.clone(),
            data: d_in,
        },
        Tensor {
            shape: shape.clone(),
            data: d_gamma,
        },
        Tensor {
            shape,
            data: d_out.data().to_vec(),
        },
    )
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn expect_3d(t: &Tensor) -> Result<(usize, usize, usize), TensorError> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(TensorError::ShapeMismatch {
            expected: vec![0, 0, 0],
            got: s.to_vec(),
        });
    }
    Ok((s[0], s[1], s[2]))
}
