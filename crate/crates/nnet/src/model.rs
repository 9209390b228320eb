use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layer::{Conv2d, Dense, Layer, MaxPool2d};
use crate::shape::{Activation, LayerSpec, Padding, Shape, Window};

/// A feed-forward regression network with a single scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input: Shape,
    layers: Vec<Layer>,
}

/// How `build_cnn` treats windows that do not fit their input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingPolicy {
    /// Every convolution and pooling layer is unpadded; underflow is an error.
    ValidOnly,
    /// Unpadded where the window fits, same-padded where it would not.
    SameFallback,
}

impl Model {
    /// Builds a model from layer specs, inferring parameter shapes and
    /// initializing weights fan-in-scaled uniform (He) with zero biases.
    pub fn from_specs(input: Shape, specs: &[LayerSpec], seed: u64) -> Result<Model> {
        if input.is_empty() {
            return Err(Error::Config("input shape must be non-empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input;
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.iter().enumerate() {
            let layer = build_layer(idx, *spec, shape, &mut rng)?;
            shape = layer.output_shape(shape);
            if shape.is_empty() {
                return Err(Error::Config(format!("layer {idx} has an empty output")));
            }
            layers.push(layer);
        }
        if shape != Shape::Flat(1) {
            return Err(Error::Config(format!(
                "model output must be a single unit, got {shape}"
            )));
        }
        Ok(Model { input, layers })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn input_len(&self) -> usize {
        self.input.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Output shape of every layer, in order.
    pub fn layer_shapes(&self) -> Vec<Shape> {
        let mut shape = self.input;
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(shape);
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All parameter tensors in checkpoint order.
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Predictions for a batch laid out one sample per row.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(inputs.ncols())?;
        let mut x = inputs.to_owned();
        for layer in &self.layers {
            x = layer.forward(&x, false).0;
        }
        Ok(x.index_axis_move(Axis(1), 0))
    }

    /// Batched prediction split into fixed-size chunks evaluated in parallel.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(inputs.ncols())?;
        let parts: Vec<Array1<f64>> = inputs
            .axis_chunks_iter(Axis(0), 256)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|chunk| self.forward(chunk))
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    pub fn predict_one(&self, features: &[f64]) -> Result<f64> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(self.forward(x)?[0])
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                got,
            });
        }
        Ok(())
    }

    /// Sum of squared errors over the batch, and the gradient of
    /// `scale · Σ (ŷ − y)²` with respect to every parameter tensor.
    pub(crate) fn squared_error_grads(
        &self,
        inputs: ArrayView2<'_, f64>,
        labels: &[f64],
        scale: f64,
    ) -> (f64, Vec<Vec<f64>>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut in_lens = Vec::with_capacity(self.layers.len());
        let mut x = inputs.to_owned();
        for layer in &self.layers {
            in_lens.push(x.ncols());
            let (y, cache) = layer.forward(&x, true);
            caches.push(cache);
            x = y;
        }
        let preds = x.column(0);
        let mut sse = 0.0;
        let mut grad = Array2::zeros((labels.len(), 1));
        for (i, (&p, &y)) in preds.iter().zip(labels).enumerate() {
            let r = p - y;
            sse += r * r;
            grad[[i, 0]] = 2.0 * scale * r;
        }

        let mut grads: Vec<Vec<f64>> = self.params().iter().map(|t| vec![0.0; t.len()]).collect();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut next = 0;
        for layer in &self.layers {
            offsets.push(next);
            next += layer.params().len();
        }
        let first_param_layer = self.layers.iter().position(|l| l.param_count() > 0);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let n = layer.params().len();
            let need_input = first_param_layer.is_some_and(|f| idx > f);
            let g = layer.backward(
                &caches[idx],
                grad,
                in_lens[idx],
                &mut grads[offsets[idx]..offsets[idx] + n],
                need_input,
            );
            match g {
                Some(g) => grad = g,
                None => break,
            }
        }
        (sse, grads)
    }
}

fn build_layer(idx: usize, spec: LayerSpec, input: Shape, rng: &mut ChaCha8Rng) -> Result<Layer> {
    let image = |kind: &'static str| match input {
        Shape::Image {
            height,
            width,
            channels,
        } => Ok((height, width, channels)),
        Shape::Flat(_) => Err(Error::Config(format!(
            "layer {idx} ({kind}) needs an image input, got {input}"
        ))),
    };
    let layer = match spec {
        LayerSpec::Dense { units } => {
            let fan_in = match input {
                Shape::Flat(n) => n,
                Shape::Image { .. } => {
                    return Err(Error::Config(format!(
                        "layer {idx} (dense) needs a flat input; add a flatten layer"
                    )))
                }
            };
            if units == 0 {
                return Err(Error::Config(format!("layer {idx} (dense) has zero units")));
            }
            Layer::Dense(Dense {
                weights: he_uniform(fan_in, units, rng),
                bias: Array1::zeros(units),
            })
        }
        LayerSpec::Conv2d {
            filters,
            kernel,
            stride,
            padding,
        } => {
            let (h, w, c) = image("conv2d")?;
            if filters == 0 {
                return Err(Error::Config(format!("layer {idx} (conv2d) has zero filters")));
            }
            let window = Window::new(h, w, c, kernel, stride, padding).ok_or(
                Error::ShapeUnderflow {
                    layer: idx,
                    kind: "conv2d",
                    side: h.min(w),
                    window: kernel,
                },
            )?;
            Layer::Conv2d(Conv2d {
                kernel: he_uniform(kernel * kernel * c, filters, rng),
                bias: Array1::zeros(filters),
                window,
                padding,
            })
        }
        LayerSpec::MaxPool2d {
            pool,
            stride,
            padding,
        } => {
            let (h, w, c) = image("maxpool2d")?;
            let window = Window::new(h, w, c, pool, stride, padding).ok_or(
                Error::ShapeUnderflow {
                    layer: idx,
                    kind: "maxpool2d",
                    side: h.min(w),
                    window: pool,
                },
            )?;
            Layer::MaxPool2d(MaxPool2d { window, padding })
        }
        LayerSpec::Flatten => Layer::Flatten(input.len()),
        LayerSpec::Activation(a) => Layer::Activation(a),
    };
    Ok(layer)
}

fn he_uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit))
}

/// Fully connected regression network: ReLU after every hidden layer and a
/// single linear output unit.
pub fn build_mlp(input_len: usize, hidden: &[usize], seed: u64) -> Result<Model> {
    if input_len == 0 {
        return Err(Error::Config("input length must be positive".into()));
    }
    if hidden.is_empty() {
        return Err(Error::Config("at least one hidden layer is required".into()));
    }
    let mut specs = Vec::with_capacity(2 * hidden.len() + 1);
    for &units in hidden {
        specs.push(LayerSpec::Dense { units });
        specs.push(LayerSpec::Activation(Activation::Relu));
    }
    specs.push(LayerSpec::Dense { units: 1 });
    Model::from_specs(Shape::Flat(input_len), &specs, seed)
}

/// Convolutional regression network for a square single-channel grid:
/// conv(32) → pool → conv(64) → pool → conv(64) → flatten → dense(32) → dense(1),
/// all windows at stride 1, ReLU after each convolution and the hidden dense layer.
pub fn build_cnn(
    input_side: usize,
    kernel: usize,
    pool: usize,
    policy: PaddingPolicy,
    seed: u64,
) -> Result<Model> {
    if input_side == 0 || kernel == 0 || pool == 0 {
        return Err(Error::Config("input side, kernel and pool must be positive".into()));
    }
    let conv = |filters| LayerSpec::Conv2d {
        filters,
        kernel,
        stride: 1,
        padding: Padding::Valid,
    };
    let pooling = LayerSpec::MaxPool2d {
        pool,
        stride: 1,
        padding: Padding::Valid,
    };
    let relu = LayerSpec::Activation(Activation::Relu);
    let mut specs = vec![
        conv(32),
        relu,
        pooling,
        conv(64),
        relu,
        pooling,
        conv(64),
        relu,
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 32 },
        relu,
        LayerSpec::Dense { units: 1 },
    ];
    if policy == PaddingPolicy::SameFallback {
        let mut side = input_side;
        for spec in specs.iter_mut() {
            match spec {
                LayerSpec::Conv2d { kernel, padding, .. } => {
                    if side < *kernel {
                        *padding = Padding::Same;
                    } else {
                        side = side - *kernel + 1;
                    }
                }
                LayerSpec::MaxPool2d { pool, padding, .. } => {
                    if side < *pool {
                        *padding = Padding::Same;
                    } else {
                        side = side - *pool + 1;
                    }
                }
                _ => {}
            }
        }
    }
    let input = Shape::Image {
        height: input_side,
        width: input_side,
        channels: 1,
    };
    Model::from_specs(input, &specs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn mlp_parameter_count_matches_layer_algebra() {
        let m = build_mlp(36, &[400, 200, 100, 50], 1).unwrap();
        let expected = 36 * 400 + 400 + 400 * 200 + 200 + 200 * 100 + 100 + 100 * 50 + 50 + 50 + 1;
        assert_eq!(expected, 120_201);
        assert_eq!(m.param_count(), expected);
        assert_eq!(m.layer_shapes().last(), Some(&Shape::Flat(1)));
    }

    #[test]
    fn same_seed_same_init() {
        let a = build_mlp(64, &[50, 20, 10, 5], 9).unwrap();
        let b = build_mlp(64, &[50, 20, 10, 5], 9).unwrap();
        let c = build_mlp(64, &[50, 20, 10, 5], 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn conv_sides(m: &Model) -> Vec<usize> {
        m.layers()
            .iter()
            .zip(m.layer_shapes())
            .filter(|(l, _)| matches!(l, Layer::Conv2d(_) | Layer::MaxPool2d(_)))
            .map(|(_, s)| match s {
                Shape::Image { height, .. } => height,
                Shape::Flat(_) => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn cnn_shapes() {
        let m = build_cnn(10, 2, 2, PaddingPolicy::ValidOnly, 0).unwrap();
        assert_eq!(conv_sides(&m), vec![9, 8, 7, 6, 5]);
        let flat = m
            .layers()
            .iter()
            .find_map(|l| match l {
                Layer::Flatten(n) => Some(*n),
                _ => None,
            })
            .unwrap();
        assert_eq!(flat, 5 * 5 * 64);

        let m = build_cnn(20, 3, 3, PaddingPolicy::ValidOnly, 0).unwrap();
        assert_eq!(conv_sides(&m), vec![18, 16, 14, 12, 10]);
    }

    #[test]
    fn cnn_underflow_without_padding_is_config_error() {
        let err = build_cnn(10, 3, 3, PaddingPolicy::ValidOnly, 0).unwrap_err();
        assert!(matches!(err, Error::ShapeUnderflow { layer: 6, .. }), "{err}");
        assert_eq!(err.kind(), crate::ErrorKind::Config);

        let m = build_cnn(10, 3, 3, PaddingPolicy::SameFallback, 0).unwrap();
        assert_eq!(conv_sides(&m), vec![8, 6, 4, 2, 2]);
    }

    #[test]
    fn zero_output_layer_predicts_zero() {
        let mut m = build_mlp(5, &[7, 3], 4).unwrap();
        let n = m.layers().len();
        if let Layer::Dense(d) = &mut m.layers_mut()[n - 1] {
            d.weights.fill(0.0);
            d.bias.fill(0.0);
        }
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f64 - 3.0);
        assert!(m.forward(x.view()).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn batching_is_semantic_noop() {
        let m = build_cnn(6, 2, 2, PaddingPolicy::ValidOnly, 3).unwrap();
        let x = Array2::from_shape_fn((3, 36), |(i, j)| ((i * 36 + j) as f64 * 0.37).sin());
        let batch = m.forward(x.view()).unwrap();
        for (i, row) in x.outer_iter().enumerate() {
            let single = m.predict_one(row.as_slice().unwrap()).unwrap();
            assert!((single - batch[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let m = build_mlp(4, &[3], 0).unwrap();
        let err = m.predict_one(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { expected: 4, got: 2 }));
    }
}
