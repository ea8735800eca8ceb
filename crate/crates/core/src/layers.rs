//! Layer inventory and the forward/backward kernels for each layer kind.
//!
//! Layers are plain data ([`LayerKind`]); the actual numerics live in free
//! functions so [`crate::graph`] can drive them for forward passes, weight
//! gradients and input gradients alike. All kernels work on the channel-major
//! [`GridTensor`] layout and accumulate gradients (callers zero the buffers).

use crate::error::{Error, Result};
use crate::tensor::{GridTensor, Shape};

/// The kinds of layer a graph may contain, with their hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    /// Fully-connected layer; flattens its input.
    Dense { out_features: usize },
    /// 2-D convolution over all input channels. `padding` is symmetric
    /// zero-padding; 0 gives "valid" behaviour.
    Conv2d { filters: usize, kernel: (usize, usize), stride: (usize, usize), padding: usize },
    /// Max pooling; windows that would overhang the input are dropped.
    MaxPool2d { size: (usize, usize), stride: (usize, usize) },
    Relu,
    /// Inverted dropout: active only in train mode, identity in eval mode.
    Dropout { keep: f64 },
    /// Broadcast a feature vector across a feature map's cells and append it
    /// as extra channels. Inputs: `[map, vector]`.
    TileConcat,
    /// Concatenate inputs with identical spatial extent along channels.
    ChannelConcat,
    /// Element-wise sigmoid.
    Logistic,
    /// Bank of independent linear output heads (a dense layer with no
    /// activation, kept distinct so architectures read naturally).
    LinearHeads { heads: usize },
}

impl LayerKind {
    /// Human-readable tag used in error messages and checkpoints.
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Dense { .. } => "dense",
            LayerKind::Conv2d { .. } => "conv2d",
            LayerKind::MaxPool2d { .. } => "maxpool2d",
            LayerKind::Relu => "relu",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::TileConcat => "tile-concat",
            LayerKind::ChannelConcat => "concat",
            LayerKind::Logistic => "logistic",
            LayerKind::LinearHeads { .. } => "linear-heads",
        }
    }

    /// Number of inputs the layer accepts; `None` means one or more.
    pub fn arity(&self) -> Option<usize> {
        match self {
            LayerKind::TileConcat => Some(2),
            LayerKind::ChannelConcat => None,
            _ => Some(1),
        }
    }

    /// Infer the output shape from input shapes, or explain why they do not
    /// fit. `name` is the layer name used in error messages.
    pub fn infer_shape(&self, name: &str, inputs: &[Shape]) -> Result<Shape> {
        if let Some(n) = self.arity() {
            if inputs.len() != n {
                return Err(Error::shape(
                    name,
                    format!("{} expects {n} input(s), got {}", self.tag(), inputs.len()),
                ));
            }
        } else if inputs.is_empty() {
            return Err(Error::shape(name, "concat expects at least one input"));
        }
        match *self {
            LayerKind::Dense { out_features } | LayerKind::LinearHeads { heads: out_features } => {
                if out_features == 0 {
                    return Err(Error::shape(name, "output width must be positive"));
                }
                Ok(Shape::vector(out_features))
            }
            LayerKind::Conv2d { filters, kernel: (kh, kw), stride: (sy, sx), padding } => {
                let s = inputs[0];
                if filters == 0 || kh == 0 || kw == 0 || sy == 0 || sx == 0 {
                    return Err(Error::shape(name, "conv2d hyperparameters must be positive"));
                }
                let (h, w) = (s.height + 2 * padding, s.width + 2 * padding);
                if h < kh || w < kw {
                    return Err(Error::shape(
                        name,
                        format!("kernel {kh}x{kw} does not fit padded input {h}x{w}"),
                    ));
                }
                Ok(Shape::new(filters, (h - kh) / sy + 1, (w - kw) / sx + 1))
            }
            LayerKind::MaxPool2d { size: (ph, pw), stride: (sy, sx) } => {
                let s = inputs[0];
                if ph == 0 || pw == 0 || sy == 0 || sx == 0 {
                    return Err(Error::shape(name, "pool hyperparameters must be positive"));
                }
                if s.height < ph || s.width < pw {
                    return Err(Error::shape(
                        name,
                        format!("pool window {ph}x{pw} does not fit input {}x{}", s.height, s.width),
                    ));
                }
                Ok(Shape::new(s.channels, (s.height - ph) / sy + 1, (s.width - pw) / sx + 1))
            }
            LayerKind::Relu | LayerKind::Logistic => Ok(inputs[0]),
            LayerKind::Dropout { keep } => {
                if !(keep > 0.0 && keep <= 1.0) {
                    return Err(Error::shape(name, format!("keep probability {keep} not in (0, 1]")));
                }
                Ok(inputs[0])
            }
            LayerKind::TileConcat => {
                let (map, vec) = (inputs[0], inputs[1]);
                if !vec.is_vector() {
                    return Err(Error::shape(
                        name,
                        format!("second input must be a vector, got {vec}"),
                    ));
                }
                Ok(Shape::new(map.channels + vec.channels, map.height, map.width))
            }
            LayerKind::ChannelConcat => {
                let (h, w) = (inputs[0].height, inputs[0].width);
                if inputs.iter().any(|s| s.height != h || s.width != w) {
                    return Err(Error::shape(name, "concat inputs must share spatial extent"));
                }
                Ok(Shape::new(inputs.iter().map(|s| s.channels).sum(), h, w))
            }
        }
    }

    /// Parameter tensors (name suffix, dims) this layer owns, given its input
    /// shapes. Empty for parameter-free layers.
    pub fn param_dims(&self, inputs: &[Shape]) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerKind::Dense { out_features } | LayerKind::LinearHeads { heads: out_features } => {
                vec![("weight", vec![out_features, inputs[0].len()]), ("bias", vec![out_features])]
            }
            LayerKind::Conv2d { filters, kernel: (kh, kw), .. } => vec![
                ("weight", vec![filters, inputs[0].channels, kh, kw]),
                ("bias", vec![filters]),
            ],
            _ => Vec::new(),
        }
    }

    /// Xavier fan pair (fan_in, fan_out) for weight initialization, if the
    /// layer has weights.
    pub fn fans(&self, inputs: &[Shape]) -> Option<(usize, usize)> {
        match *self {
            LayerKind::Dense { out_features } | LayerKind::LinearHeads { heads: out_features } => {
                Some((inputs[0].len(), out_features))
            }
            LayerKind::Conv2d { filters, kernel: (kh, kw), .. } => {
                Some((inputs[0].channels * kh * kw, filters * kh * kw))
            }
            _ => None,
        }
    }
}

/// Numerically stable sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ── dense ────────────────────────────────────────────────────────────────

pub fn dense_forward(x: &GridTensor, weight: &[f64], bias: &[f64], out: &mut GridTensor) {
    let n_in = x.len();
    let xs = x.data();
    for (o, out_v) in out.data_mut().iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        let mut acc = bias[o];
        for (w, v) in row.iter().zip(xs) {
            acc += w * v;
        }
        *out_v = acc;
    }
}

/// Accumulates input, weight and bias gradients for a dense layer. Any of the
/// gradient buffers may be absent when that gradient is not requested.
pub fn dense_backward(
    x: &GridTensor,
    weight: &[f64],
    up: &GridTensor,
    dx: Option<&mut GridTensor>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let n_in = x.len();
    let ups = up.data();
    if let Some(dx) = dx {
        let dxs = dx.data_mut();
        for (o, &g) in ups.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &weight[o * n_in..(o + 1) * n_in];
            for (d, w) in dxs.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }
    if let Some(dw) = dw {
        let xs = x.data();
        for (o, &g) in ups.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &mut dw[o * n_in..(o + 1) * n_in];
            for (d, v) in row.iter_mut().zip(xs) {
                *d += g * v;
            }
        }
    }
    if let Some(db) = db {
        for (d, &g) in db.iter_mut().zip(ups) {
            *d += g;
        }
    }
}

// ── conv2d ───────────────────────────────────────────────────────────────

/// Shared geometry for one (output row, kernel row) pair of a convolution:
/// the valid `ox` range given padding, and the matching input column offset.
#[inline]
fn conv_x_span(kx: usize, padding: usize, in_w: usize, out_w: usize, sx: usize) -> (usize, usize) {
    // ix = ox*sx + kx - padding must satisfy 0 <= ix < in_w
    let lo = padding.saturating_sub(kx).div_ceil(sx).min(out_w);
    let hi = if in_w + padding > kx { ((in_w + padding - kx - 1) / sx + 1).min(out_w) } else { 0 };
    (lo, hi.max(lo))
}

pub fn conv2d_forward(
    x: &GridTensor,
    weight: &[f64],
    bias: &[f64],
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: usize,
    out: &mut GridTensor,
) {
    let (kh, kw) = kernel;
    let (sy, sx) = stride;
    let in_shape = x.shape();
    let out_shape = out.shape();
    let (c_in, in_w) = (in_shape.channels, in_shape.width);
    let (out_h, out_w) = (out_shape.height, out_shape.width);
    for f in 0..out_shape.channels {
        for oy in 0..out_h {
            out.row_mut(f, oy).fill(bias[f]);
        }
        let w_filter = &weight[f * c_in * kh * kw..(f + 1) * c_in * kh * kw];
        for c in 0..c_in {
            let w_chan = &w_filter[c * kh * kw..(c + 1) * kh * kw];
            for ky in 0..kh {
                let w_row = &w_chan[ky * kw..(ky + 1) * kw];
                for oy in 0..out_h {
                    let iy = (oy * sy + ky) as isize - padding as isize;
                    if iy < 0 || iy >= in_shape.height as isize {
                        continue;
                    }
                    let in_row = x.row(c, iy as usize);
                    for (kx, &wv) in w_row.iter().enumerate() {
                        let (lo, hi) = conv_x_span(kx, padding, in_w, out_w, sx);
                        let base = kx as isize - padding as isize;
                        let out_row = out.row_mut(f, oy);
                        for ox in lo..hi {
                            let ix = (ox * sx) as isize + base;
                            out_row[ox] += wv * in_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_backward(
    x: &GridTensor,
    weight: &[f64],
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: usize,
    up: &GridTensor,
    mut dx: Option<&mut GridTensor>,
    mut dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (kh, kw) = kernel;
    let (sy, sx) = stride;
    let in_shape = x.shape();
    let up_shape = up.shape();
    let (c_in, in_w) = (in_shape.channels, in_shape.width);
    let (out_h, out_w) = (up_shape.height, up_shape.width);
    if let Some(db) = db {
        for f in 0..up_shape.channels {
            db[f] += up.channel(f).iter().sum::<f64>();
        }
    }
    for f in 0..up_shape.channels {
        let w_filter = &weight[f * c_in * kh * kw..(f + 1) * c_in * kh * kw];
        for c in 0..c_in {
            let w_chan = &w_filter[c * kh * kw..(c + 1) * kh * kw];
            for ky in 0..kh {
                let w_row = &w_chan[ky * kw..(ky + 1) * kw];
                for oy in 0..out_h {
                    let iy = (oy * sy + ky) as isize - padding as isize;
                    if iy < 0 || iy >= in_shape.height as isize {
                        continue;
                    }
                    let up_row_start = (f * out_h + oy) * out_w;
                    for kx in 0..kw {
                        let (lo, hi) = conv_x_span(kx, padding, in_w, out_w, sx);
                        if lo >= hi {
                            continue;
                        }
                        let base = (lo * sx + kx) as isize - padding as isize;
                        if let Some(dx) = dx.as_deref_mut() {
                            let wv = w_row[kx];
                            let dx_row = dx.row_mut(c, iy as usize);
                            let up_row = &up.data()[up_row_start + lo..up_row_start + hi];
                            for (i, &g) in up_row.iter().enumerate() {
                                dx_row[base as usize + i * sx] += wv * g;
                            }
                        }
                        if let Some(dw) = dw.as_deref_mut() {
                            let in_row = x.row(c, iy as usize);
                            let up_row = &up.data()[up_row_start + lo..up_row_start + hi];
                            let mut acc = 0.0;
                            for (i, &g) in up_row.iter().enumerate() {
                                acc += g * in_row[base as usize + i * sx];
                            }
                            dw[(c * kh + ky) * kw + kx + f * c_in * kh * kw] += acc;
                        }
                    }
                }
            }
        }
    }
}

// ── max pooling ──────────────────────────────────────────────────────────

/// Forward max pool; records the flat in-plane argmax per output cell. Ties
/// resolve to the first maximum in row-major window order.
pub fn maxpool_forward(
    x: &GridTensor,
    size: (usize, usize),
    stride: (usize, usize),
    out: &mut GridTensor,
    argmax: &mut Vec<usize>,
) {
    let (ph, pw) = size;
    let (sy, sx) = stride;
    let out_shape = out.shape();
    let in_w = x.shape().width;
    argmax.clear();
    argmax.reserve(out_shape.len());
    for c in 0..out_shape.channels {
        for oy in 0..out_shape.height {
            for ox in 0..out_shape.width {
                let (y0, x0) = (oy * sy, ox * sx);
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = y0 * in_w + x0;
                for wy in 0..ph {
                    let row = x.row(c, y0 + wy);
                    for wx in 0..pw {
                        let v = row[x0 + wx];
                        if v > best {
                            best = v;
                            best_idx = (y0 + wy) * in_w + x0 + wx;
                        }
                    }
                }
                out.set(c, oy, ox, best);
                argmax.push(best_idx);
            }
        }
    }
}

pub fn maxpool_backward(up: &GridTensor, argmax: &[usize], dx: &mut GridTensor) {
    let plane = dx.shape().height * dx.shape().width;
    let up_plane = up.shape().height * up.shape().width;
    let dxs = dx.data_mut();
    for (i, &g) in up.data().iter().enumerate() {
        let c = i / up_plane;
        dxs[c * plane + argmax[i]] += g;
    }
}

// ── tile-concat ──────────────────────────────────────────────────────────

pub fn tile_concat_forward(map: &GridTensor, vec: &GridTensor, out: &mut GridTensor) {
    let c_map = map.shape().channels;
    let plane = map.shape().height * map.shape().width;
    let out_data = out.data_mut();
    out_data[..c_map * plane].copy_from_slice(map.data());
    for (j, &v) in vec.data().iter().enumerate() {
        out_data[(c_map + j) * plane..(c_map + j + 1) * plane].fill(v);
    }
}

pub fn tile_concat_backward(
    up: &GridTensor,
    c_map: usize,
    d_map: Option<&mut GridTensor>,
    d_vec: Option<&mut GridTensor>,
) {
    let plane = up.shape().height * up.shape().width;
    if let Some(d_map) = d_map {
        for (d, g) in d_map.data_mut().iter_mut().zip(up.data()) {
            *d += g;
        }
    }
    if let Some(d_vec) = d_vec {
        for (j, d) in d_vec.data_mut().iter_mut().enumerate() {
            *d += up.data()[(c_map + j) * plane..(c_map + j + 1) * plane].iter().sum::<f64>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(shape: Shape, values: &[f64]) -> GridTensor {
        GridTensor::from_vec(shape, values.to_vec()).unwrap()
    }

    #[test]
    fn dense_forward_matches_hand_computation() {
        // 2 outputs over 3 inputs: y = W x + b.
        let x = GridTensor::from_slice(&[1.0, 2.0, 3.0]);
        let weight = [1.0, 0.0, -1.0, 0.5, 0.5, 0.5];
        let bias = [0.25, -0.25];
        let mut out = GridTensor::zeros(Shape::vector(2));
        dense_forward(&x, &weight, &bias, &mut out);
        // row0: 1*1 + 0*2 + (-1)*3 + 0.25 = -1.75; row1: 0.5*6 - 0.25 = 2.75
        assert_eq!(out.data(), &[-1.75, 2.75]);
    }

    #[test]
    fn dense_backward_linear_case_weight_grad_is_input() {
        // For y = w.x the weight gradient with unit upstream is x itself.
        let x = GridTensor::from_slice(&[0.5, -2.0, 4.0]);
        let weight = [0.1, 0.2, 0.3];
        let up = GridTensor::from_slice(&[1.0]);
        let mut dw = vec![0.0; 3];
        let mut db = vec![0.0; 1];
        dense_backward(&x, &weight, &up, None, Some(&mut dw), Some(&mut db));
        assert_eq!(dw, vec![0.5, -2.0, 4.0]);
        assert_eq!(db, vec![1.0]);
    }

    #[test]
    fn conv_shape_valid_and_padded() {
        let k = LayerKind::Conv2d { filters: 8, kernel: (5, 5), stride: (1, 1), padding: 0 };
        let s = k.infer_shape("c", &[Shape::new(4, 32, 32)]).unwrap();
        assert_eq!(s, Shape::new(8, 28, 28));
        let k = LayerKind::Conv2d { filters: 8, kernel: (5, 5), stride: (1, 1), padding: 2 };
        let s = k.infer_shape("c", &[Shape::new(4, 32, 32)]).unwrap();
        assert_eq!(s, Shape::new(8, 32, 32));
    }

    #[test]
    fn conv_rejects_oversized_kernel() {
        let k = LayerKind::Conv2d { filters: 1, kernel: (3, 3), stride: (1, 1), padding: 0 };
        let err = k.infer_shape("tiny", &[Shape::new(1, 2, 2)]).unwrap_err();
        assert!(err.to_string().contains("tiny"), "error should name the layer: {err}");
    }

    #[test]
    fn conv_identity_kernel_reproduces_input() {
        // 1x1 kernel with weight 1 and zero bias is the identity.
        let x = tensor(Shape::new(1, 2, 3), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = GridTensor::zeros(Shape::new(1, 2, 3));
        conv2d_forward(&x, &[1.0], &[0.0], (1, 1), (1, 1), 0, &mut out);
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn conv_3x3_single_window_is_dot_product() {
        let x = tensor(Shape::new(1, 3, 3), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let w: Vec<f64> = (1..=9).map(|v| v as f64 * 0.1).collect();
        let mut out = GridTensor::zeros(Shape::new(1, 1, 1));
        conv2d_forward(&x, &w, &[1.0], (3, 3), (1, 1), 0, &mut out);
        let expect: f64 = 1.0 + (1..=9).map(|v| (v * v) as f64 * 0.1).sum::<f64>();
        assert!((out.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn maxpool_tie_break_prefers_first_in_row_major_order() {
        let x = tensor(Shape::new(1, 2, 2), &[3.0, 3.0, 3.0, 3.0]);
        let mut out = GridTensor::zeros(Shape::new(1, 1, 1));
        let mut argmax = Vec::new();
        maxpool_forward(&x, (2, 2), (2, 2), &mut out, &mut argmax);
        assert_eq!(out.data()[0], 3.0);
        assert_eq!(argmax, vec![0], "tie must resolve to the first cell scanned");
        let up = GridTensor::from_slice(&[1.0]);
        let mut dx = GridTensor::zeros(Shape::new(1, 2, 2));
        maxpool_backward(&up, &argmax, &mut dx);
        assert_eq!(dx.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_drops_overhanging_window() {
        // 5x5 input with 2x2/2 pooling -> 2x2 output (last row/col ignored).
        let k = LayerKind::MaxPool2d { size: (2, 2), stride: (2, 2) };
        let s = k.infer_shape("p", &[Shape::new(3, 5, 5)]).unwrap();
        assert_eq!(s, Shape::new(3, 2, 2));
    }

    #[test]
    fn tile_concat_broadcasts_and_backward_sums() {
        let map = tensor(Shape::new(1, 2, 2), &[1.0, 2.0, 3.0, 4.0]);
        let vec = GridTensor::from_slice(&[9.0]);
        let mut out = GridTensor::zeros(Shape::new(2, 2, 2));
        tile_concat_forward(&map, &vec, &mut out);
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0, 9.0, 9.0, 9.0, 9.0]);

        // Uniform upstream g on the appended channel must reach the vector
        // entry as g * H * W.
        let up = tensor(Shape::new(2, 2, 2), &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5]);
        let mut d_map = GridTensor::zeros(Shape::new(1, 2, 2));
        let mut d_vec = GridTensor::zeros(Shape::vector(1));
        tile_concat_backward(&up, 1, Some(&mut d_map), Some(&mut d_vec));
        assert_eq!(d_vec.data()[0], 0.5 * 4.0);
        assert_eq!(d_map.data(), &[0.0; 4]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(800.0) > 0.99);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-12);
    }
}
