use ndarray::{Array1, Array2, Axis};

use crate::shape::{Activation, LayerSpec, Padding, Shape, Window};

/// Fully connected layer: `y = x·W + b` with `W` stored as (inputs × units).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// 2-D convolution over channels-last images. The kernel is stored in
/// im2col form: rows ordered (ky, kx, in_channel), one column per filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub kernel: Array2<f64>,
    pub bias: Array1<f64>,
    pub(crate) window: Window,
    pub padding: Padding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPool2d {
    pub(crate) window: Window,
    pub padding: Padding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    MaxPool2d(MaxPool2d),
    Flatten(usize),
    Activation(Activation),
}

/// Per-layer state kept from the forward pass for backprop.
pub(crate) enum Cache {
    Input(Array2<f64>),
    Columns(Array2<f64>),
    Argmax(Vec<usize>),
    None,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                units: d.weights.ncols(),
            },
            Layer::Conv2d(c) => LayerSpec::Conv2d {
                filters: c.kernel.ncols(),
                kernel: c.window.size,
                stride: c.window.stride,
                padding: c.padding,
            },
            Layer::MaxPool2d(p) => LayerSpec::MaxPool2d {
                pool: p.window.size,
                stride: p.window.stride,
                padding: p.padding,
            },
            Layer::Flatten(_) => LayerSpec::Flatten,
            Layer::Activation(a) => LayerSpec::Activation(*a),
        }
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        match self {
            Layer::Dense(d) => Shape::Flat(d.weights.ncols()),
            Layer::Conv2d(c) => Shape::Image {
                height: c.window.out_h,
                width: c.window.out_w,
                channels: c.kernel.ncols(),
            },
            Layer::MaxPool2d(p) => Shape::Image {
                height: p.window.out_h,
                width: p.window.out_w,
                channels: p.window.channels,
            },
            Layer::Flatten(n) => Shape::Flat(*n),
            Layer::Activation(_) => input,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            Layer::Conv2d(c) => c.kernel.len() + c.bias.len(),
            _ => 0,
        }
    }

    /// Weight and bias tensors, in checkpoint order.
    pub(crate) fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Dense(d) => vec![slice(&d.weights), slice1(&d.bias)],
            Layer::Conv2d(c) => vec![slice(&c.kernel), slice1(&c.bias)],
            _ => Vec::new(),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Dense(d) => vec![
                d.weights.as_slice_mut().expect("standard layout"),
                d.bias.as_slice_mut().expect("standard layout"),
            ],
            Layer::Conv2d(c) => vec![
                c.kernel.as_slice_mut().expect("standard layout"),
                c.bias.as_slice_mut().expect("standard layout"),
            ],
            _ => Vec::new(),
        }
    }

    pub(crate) fn forward(&self, x: &Array2<f64>, keep: bool) -> (Array2<f64>, Cache) {
        match self {
            Layer::Dense(d) => {
                let y = x.dot(&d.weights) + &d.bias;
                let cache = if keep { Cache::Input(x.clone()) } else { Cache::None };
                (y, cache)
            }
            Layer::Conv2d(c) => {
                let batch = x.nrows();
                let cols = im2col(x, &c.window);
                let y = cols.dot(&c.kernel) + &c.bias;
                let out_len = c.window.positions() * c.kernel.ncols();
                let y = y
                    .into_shape_with_order((batch, out_len))
                    .expect("contiguous conv output");
                let cache = if keep { Cache::Columns(cols) } else { Cache::None };
                (y, cache)
            }
            Layer::MaxPool2d(p) => {
                let (y, argmax) = max_pool(x, &p.window);
                let cache = if keep { Cache::Argmax(argmax) } else { Cache::None };
                (y, cache)
            }
            Layer::Flatten(_) => (x.clone(), Cache::None),
            Layer::Activation(Activation::Relu) => {
                let y = x.mapv(|v| v.max(0.0));
                let cache = if keep { Cache::Input(x.clone()) } else { Cache::None };
                (y, cache)
            }
            Layer::Activation(Activation::Identity) => (x.clone(), Cache::None),
        }
    }

    /// Propagates `grad_out` through the layer. Parameter gradients are
    /// accumulated into `grads` (same order as [`Layer::params`]).
    pub(crate) fn backward(
        &self,
        cache: &Cache,
        grad_out: Array2<f64>,
        in_len: usize,
        grads: &mut [Vec<f64>],
        need_input_grad: bool,
    ) -> Option<Array2<f64>> {
        match (self, cache) {
            (Layer::Dense(d), Cache::Input(x)) => {
                accumulate(&mut grads[0], &x.t().dot(&grad_out));
                accumulate1(&mut grads[1], &grad_out.sum_axis(Axis(0)));
                need_input_grad.then(|| grad_out.dot(&d.weights.t()))
            }
            (Layer::Conv2d(c), Cache::Columns(cols)) => {
                let batch = grad_out.nrows();
                let filters = c.kernel.ncols();
                let g = grad_out
                    .into_shape_with_order((batch * c.window.positions(), filters))
                    .expect("contiguous conv gradient");
                accumulate(&mut grads[0], &cols.t().dot(&g));
                accumulate1(&mut grads[1], &g.sum_axis(Axis(0)));
                need_input_grad.then(|| col2im(&g.dot(&c.kernel.t()), &c.window, batch, in_len))
            }
            (Layer::MaxPool2d(_), Cache::Argmax(argmax)) => {
                let batch = grad_out.nrows();
                let mut gx = Array2::zeros((batch, in_len));
                for (b, (go, gi)) in grad_out.outer_iter().zip(gx.outer_iter_mut()).enumerate() {
                    let gi = gi.into_slice().expect("standard layout");
                    let base = b * go.len();
                    for (o, g) in go.iter().enumerate() {
                        gi[argmax[base + o]] += g;
                    }
                }
                Some(gx)
            }
            (Layer::Flatten(_), _) | (Layer::Activation(Activation::Identity), _) => Some(grad_out),
            (Layer::Activation(Activation::Relu), Cache::Input(x)) => {
                let mut g = grad_out;
                g.zip_mut_with(x, |g, &v| {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                });
                Some(g)
            }
            _ => unreachable!("layer cache does not match layer kind"),
        }
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn accumulate(dst: &mut [f64], src: &Array2<f64>) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

fn accumulate1(dst: &mut [f64], src: &Array1<f64>) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

/// Unfolds every window into a row: (batch·positions) × (size²·channels).
fn im2col(x: &Array2<f64>, w: &Window) -> Array2<f64> {
    let batch = x.nrows();
    let k = w.size;
    let c = w.channels;
    let patch = k * k * c;
    let mut cols = Array2::zeros((batch * w.positions(), patch));
    for (b, row) in x.outer_iter().enumerate() {
        let src = row.as_slice().expect("standard layout");
        for oh in 0..w.out_h {
            for ow in 0..w.out_w {
                let r = b * w.positions() + oh * w.out_w + ow;
                let mut dst = cols.row_mut(r);
                let dst = dst.as_slice_mut().expect("standard layout");
                for ky in 0..k {
                    let Some(iy) = Window::source(oh, ky, w.stride, w.pad_top, w.in_h) else {
                        continue;
                    };
                    for kx in 0..k {
                        let Some(ix) = Window::source(ow, kx, w.stride, w.pad_left, w.in_w) else {
                            continue;
                        };
                        let s = (iy * w.in_w + ix) * c;
                        let d = (ky * k + kx) * c;
                        dst[d..d + c].copy_from_slice(&src[s..s + c]);
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &Array2<f64>, w: &Window, batch: usize, in_len: usize) -> Array2<f64> {
    let k = w.size;
    let c = w.channels;
    let mut gx = Array2::zeros((batch, in_len));
    for (b, mut row) in gx.outer_iter_mut().enumerate() {
        let dst = row.as_slice_mut().expect("standard layout");
        for oh in 0..w.out_h {
            for ow in 0..w.out_w {
                let r = b * w.positions() + oh * w.out_w + ow;
                let src = cols.row(r);
                let src = src.as_slice().expect("standard layout");
                for ky in 0..k {
                    let Some(iy) = Window::source(oh, ky, w.stride, w.pad_top, w.in_h) else {
                        continue;
                    };
                    for kx in 0..k {
                        let Some(ix) = Window::source(ow, kx, w.stride, w.pad_left, w.in_w) else {
                            continue;
                        };
                        let s = (ky * k + kx) * c;
                        let d = (iy * w.in_w + ix) * c;
                        for ch in 0..c {
                            dst[d + ch] += src[s + ch];
                        }
                    }
                }
            }
        }
    }
    gx
}

/// Max over each window, ignoring padded cells. Ties resolve to the first
/// position in row-major window order. Returns the output and, per output
/// cell, the flat input index that produced it.
fn max_pool(x: &Array2<f64>, w: &Window) -> (Array2<f64>, Vec<usize>) {
    let batch = x.nrows();
    let c = w.channels;
    let out_len = w.positions() * c;
    let mut y = Array2::zeros((batch, out_len));
    let mut argmax = vec![0usize; batch * out_len];
    for (b, (src, mut dst)) in x.outer_iter().zip(y.outer_iter_mut()).enumerate() {
        let src = src.as_slice().expect("standard layout");
        let dst = dst.as_slice_mut().expect("standard layout");
        for oh in 0..w.out_h {
            for ow in 0..w.out_w {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for ky in 0..w.size {
                        let Some(iy) = Window::source(oh, ky, w.stride, w.pad_top, w.in_h) else {
                            continue;
                        };
                        for kx in 0..w.size {
                            let Some(ix) = Window::source(ow, kx, w.stride, w.pad_left, w.in_w)
                            else {
                                continue;
                            };
                            let idx = (iy * w.in_w + ix) * c + ch;
                            if best_idx == usize::MAX || src[idx] > best {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (oh * w.out_w + ow) * c + ch;
                    dst[o] = best;
                    argmax[b * out_len + o] = best_idx;
                }
            }
        }
    }
    (y, argmax)
}
