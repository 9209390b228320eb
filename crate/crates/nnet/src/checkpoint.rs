//! Versioned plain-text model checkpoints.
//!
//! ```text
//! qent-model 1
//! input flat 36                      | input image <h> <w> <c>
//! layers <n>
//! dense <units>
//! conv2d <filters> <kernel> <stride> <valid|same>
//! maxpool2d <pool> <stride> <valid|same>
//! flatten
//! activation <relu|identity>
//! tensor <index> <len>
//! <len space-separated values, 17 significant digits>
//! ...
//! end
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::shape::{Activation, LayerSpec, Padding, Shape};

pub const MODEL_FORMAT: &str = "qent-model";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &Model, mut w: W) -> Result<()> {
    writeln!(w, "{MODEL_FORMAT} {MODEL_VERSION}")?;
    match model.input_shape() {
        Shape::Flat(n) => writeln!(w, "input flat {n}")?,
        Shape::Image {
            height,
            width,
            channels,
        } => writeln!(w, "input image {height} {width} {channels}")?,
    }
    let specs = model.specs();
    writeln!(w, "layers {}", specs.len())?;
    for spec in &specs {
        match spec {
            LayerSpec::Dense { units } => writeln!(w, "dense {units}")?,
            LayerSpec::Conv2d {
                filters,
                kernel,
                stride,
                padding,
            } => writeln!(w, "conv2d {filters} {kernel} {stride} {}", padding.as_str())?,
            LayerSpec::MaxPool2d {
                pool,
                stride,
                padding,
            } => writeln!(w, "maxpool2d {pool} {stride} {}", padding.as_str())?,
            LayerSpec::Flatten => writeln!(w, "flatten")?,
            LayerSpec::Activation(a) => writeln!(w, "activation {}", a.as_str())?,
        }
    }
    for (i, tensor) in model.params().iter().enumerate() {
        writeln!(w, "tensor {i} {}", tensor.len())?;
        let mut line = String::with_capacity(tensor.len() * 24);
        for (j, v) in tensor.iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(w, "{line}")?;
    }
    writeln!(w, "end")?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<Model> {
    let mut lines = BufReader::new(r).lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Checkpoint {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let bad = |line: usize, msg: String| Error::Checkpoint { line, msg };

    let (n, header) = next("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MODEL_FORMAT) {
        return Err(bad(n, format!("field `format`: expected `{MODEL_FORMAT}`")));
    }
    let version = parts.next().unwrap_or("");
    if version != MODEL_VERSION.to_string() {
        return Err(Error::UnsupportedVersion(version.to_string()));
    }

    let (n, line) = next("input")?;
    let f: Vec<&str> = line.split_whitespace().collect();
    let input = match f.as_slice() {
        ["input", "flat", len] => Shape::Flat(parse(n, "input", len)?),
        ["input", "image", h, w, c] => Shape::Image {
            height: parse(n, "input", h)?,
            width: parse(n, "input", w)?,
            channels: parse(n, "input", c)?,
        },
        _ => return Err(bad(n, "field `input`: malformed".into())),
    };

    let (n, line) = next("layers")?;
    let count: usize = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["layers", k] => parse(n, "layers", k)?,
        _ => return Err(bad(n, "field `layers`: malformed".into())),
    };
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = next("layer spec")?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let pad = |s: &str| Padding::parse(s).ok_or_else(|| bad(n, format!("field `padding`: unknown `{s}`")));
        let spec = match f.as_slice() {
            ["dense", u] => LayerSpec::Dense { units: parse(n, "units", u)? },
            ["conv2d", fl, k, s, p] => LayerSpec::Conv2d {
                filters: parse(n, "filters", fl)?,
                kernel: parse(n, "kernel", k)?,
                stride: parse(n, "stride", s)?,
                padding: pad(p)?,
            },
            ["maxpool2d", k, s, p] => LayerSpec::MaxPool2d {
                pool: parse(n, "pool", k)?,
                stride: parse(n, "stride", s)?,
                padding: pad(p)?,
            },
            ["flatten"] => LayerSpec::Flatten,
            ["activation", a] => LayerSpec::Activation(
                Activation::parse(a).ok_or_else(|| bad(n, format!("field `activation`: unknown `{a}`")))?,
            ),
            _ => return Err(bad(n, format!("field `layer`: malformed `{line}`"))),
        };
        specs.push(spec);
    }

    let mut model = Model::from_specs(input, &specs, 0).map_err(|e| bad(n, e.to_string()))?;
    let expected: Vec<usize> = model.params().iter().map(|t| t.len()).collect();
    for (i, &len) in expected.iter().enumerate() {
        let (n, line) = next("tensor header")?;
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["tensor", idx, l] if parse::<usize>(n, "tensor", idx)? == i && parse::<usize>(n, "tensor", l)? == len => {}
            _ => return Err(bad(n, format!("field `tensor`: expected `tensor {i} {len}`"))),
        }
        let (n, values) = next("tensor values")?;
        let mut params = model.params_mut();
        let dst = &mut params[i];
        let mut k = 0;
        for tok in values.split_whitespace() {
            if k == len {
                return Err(bad(n, format!("tensor {i}: more than {len} values")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| bad(n, format!("tensor {i}: bad value `{tok}`")))?;
            if !v.is_finite() {
                return Err(bad(n, format!("tensor {i}: non-finite value")));
            }
            dst[k] = v;
            k += 1;
        }
        if k != len {
            return Err(bad(n, format!("tensor {i}: {k} of {len} values")));
        }
    }
    let (n, end) = next("end")?;
    if end.trim() != "end" {
        return Err(bad(n, "field `end`: missing terminator".into()));
    }
    Ok(model)
}

fn parse<T: std::str::FromStr>(line: usize, field: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Checkpoint {
        line,
        msg: format!("field `{field}`: cannot parse `{s}`"),
    })
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_model(model, BufWriter::new(File::create(path)?))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    read_model(File::open(path)?)
}
