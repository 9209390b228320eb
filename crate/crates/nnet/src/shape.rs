use std::fmt;

/// Per-sample tensor shape. Images are stored channels-last, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Flat(usize),
    Image {
        height: usize,
        width: usize,
        channels: usize,
    },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Flat(n) => n,
            Shape::Image {
                height,
                width,
                channels,
            } => height * width * channels,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Flat(n) => write!(f, "({n})"),
            Shape::Image {
                height,
                width,
                channels,
            } => write!(f, "({height}, {width}, {channels})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

impl Padding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "valid" => Some(Padding::Valid),
            "same" => Some(Padding::Same),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Architecture description of one layer; parameter shapes are inferred
/// from the preceding layer when the model is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        units: usize,
    },
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool2d {
        pool: usize,
        stride: usize,
        padding: Padding,
    },
    Flatten,
    Activation(Activation),
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Activation(_) => "activation",
        }
    }
}

/// Geometry of a sliding window (convolution kernel or pooling window)
/// over a channels-last image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub size: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Window {
    /// Returns `None` when a valid window does not fit in the input.
    pub fn new(
        in_h: usize,
        in_w: usize,
        channels: usize,
        size: usize,
        stride: usize,
        padding: Padding,
    ) -> Option<Self> {
        let (out_h, pad_top) = window_axis(in_h, size, stride, padding)?;
        let (out_w, pad_left) = window_axis(in_w, size, stride, padding)?;
        Some(Window {
            in_h,
            in_w,
            channels,
            size,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Input row/column for window offset `k` at output index `o`, if it
    /// falls inside the unpadded input.
    #[inline]
    pub fn source(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
        let pos = (o * stride + k).checked_sub(pad)?;
        (pos < extent).then_some(pos)
    }
}

fn window_axis(input: usize, size: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    if size == 0 || stride == 0 || input == 0 {
        return None;
    }
    match padding {
        Padding::Valid => {
            if input < size {
                return None;
            }
            Some(((input - size) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + size).saturating_sub(input);
            Some((out, total / 2))
        }
    }
}
