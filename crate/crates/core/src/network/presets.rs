//! Named presets and a compact custom-stack notation.
//!
//! Presets:
//!
//! - `mlp-NxW`: `N` stages of `Dense(W→W) → ReLU` behind a `Dense(in→W)` stem.
//! - `convnet-N[xC]`: `N` residual blocks `Conv → ReLU → Conv` with `C`
//!   channels (default 8); a whole block is the unit of freezing. Large images
//!   are average-pooled down to about 7×7 in the stem.
//! - `tiny-vit-N[xD]`: `N` blocks of `x + Attn(LN(x))` then
//!   `x + MLP(LN(x))` over 4 tokens of width `D` (default 8); only the
//!   attention projections are freezable.
//!
//! Custom stacks: `custom:` followed by stages separated by `/`. A stage is
//! one or more segments joined with `+`; a segment in brackets is residual.
//! Layer tokens are `dense<W>`, `conv<C>`, `relu`, `ln`, `attn`, `pool<F>`.
//! For example `custom:dense16,relu/dense16,relu/[dense16,relu]`.
//! A flattening stem is added when the first layer is dense and samples are
//! not flat; the head pools as needed and ends in `Dense(→classes)`.

use super::{Architecture, Stage};
use crate::error::{Error, Result};
use crate::layers::Layer;

const VIT_TOKENS: usize = 4;

fn bad(spec: &str, why: impl std::fmt::Display) -> Error {
    Error::Architecture(format!("{spec:?}: {why}"))
}

fn parse_dims(spec: &str, rest: &str, default_width: Option<usize>) -> Result<(usize, usize)> {
    let mut parts = rest.split('x');
    let depth = parts
        .next()
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| bad(spec, "expected a positive stage count"))?;
    let width = match parts.next() {
        Some(w) => w
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| bad(spec, "expected a positive width"))?,
        None => default_width.ok_or_else(|| bad(spec, "missing width, expected NxW"))?,
    };
    if parts.next().is_some() {
        return Err(bad(spec, "too many 'x' separators"));
    }
    Ok((depth, width))
}

fn flat_len(sample: &[usize]) -> usize {
    sample.iter().product()
}

/// Stem layers that flatten a non-flat sample.
fn flatten(sample: &[usize]) -> Vec<Layer> {
    if sample.len() > 1 {
        vec![Layer::reshape(&[flat_len(sample)])]
    } else {
        Vec::new()
    }
}

/// Builds the architecture named by `spec` for the given sample shape and class count.
pub fn parse_architecture(spec: &str, sample_shape: &[usize], classes: usize) -> Result<Architecture> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("mlp-") {
        let (depth, width) = parse_dims(spec, rest, None)?;
        let mut stem = flatten(sample_shape);
        stem.push(Layer::dense(flat_len(sample_shape), width));
        stem.push(Layer::relu());
        let stages = (0..depth)
            .map(|_| Stage::plain(vec![Layer::dense(width, width), Layer::relu()]))
            .collect();
        Architecture::new(sample_shape, classes, stem, stages, vec![Layer::dense(width, classes)])
    } else if let Some(rest) = spec.strip_prefix("convnet-") {
        let (depth, channels) = parse_dims(spec, rest, Some(8))?;
        let (mut stem, image) = match *sample_shape {
            [c, h, w] => (Vec::new(), [c, h, w]),
            [h, w] => (vec![Layer::reshape(&[1, h, w])], [1, h, w]),
            [f] => (vec![Layer::reshape(&[f, 1, 1])], [f, 1, 1]),
            _ => return Err(bad(spec, format!("unsupported sample shape {sample_shape:?}"))),
        };
        let [c, h, w] = image;
        let factor = (1..=h.min(w))
            .rev()
            .find(|&f| h % f == 0 && w % f == 0 && h / f >= 7 && w / f >= 7)
            .unwrap_or(1);
        if factor > 1 {
            stem.push(Layer::avg_pool(factor));
        }
        stem.push(Layer::conv2d(c, channels));
        stem.push(Layer::relu());
        let stages = (0..depth)
            .map(|_| {
                Stage::residual(vec![
                    Layer::conv2d(channels, channels),
                    Layer::relu(),
                    Layer::conv2d(channels, channels),
                ])
            })
            .collect();
        let head = vec![Layer::spatial_mean(), Layer::dense(channels, classes)];
        Architecture::new(sample_shape, classes, stem, stages, head)
    } else if let Some(rest) = spec.strip_prefix("tiny-vit-") {
        let (depth, dim) = parse_dims(spec, rest, Some(8))?;
        let mut stem = flatten(sample_shape);
        stem.push(Layer::dense(flat_len(sample_shape), VIT_TOKENS * dim));
        stem.push(Layer::reshape(&[VIT_TOKENS, dim]));
        let stages = (0..depth).map(|_| vit_block(dim)).collect();
        let head = vec![Layer::token_mean(), Layer::dense(dim, classes)];
        Architecture::new(sample_shape, classes, stem, stages, head)
    } else if let Some(rest) = spec.strip_prefix("custom:") {
        custom(spec, rest, sample_shape, classes)
    } else {
        Err(bad(spec, "unknown architecture; expected mlp-NxW, convnet-N[xC], tiny-vit-N[xD] or custom:..."))
    }
}

/// Attention block: only the attention projections are freezable.
pub(crate) fn vit_block(dim: usize) -> Stage {
    Stage::new(vec![
        super::Segment {
            layers: vec![Layer::layer_norm(dim), Layer::attention(dim)],
            residual: true,
        },
        super::Segment {
            layers: vec![
                Layer::layer_norm(dim),
                Layer::dense(dim, 2 * dim).never_frozen(),
                Layer::relu(),
                Layer::dense(2 * dim, dim).never_frozen(),
            ],
            residual: true,
        },
    ])
}

fn custom(spec: &str, body: &str, sample_shape: &[usize], classes: usize) -> Result<Architecture> {
    let mut shape = vec![1];
    shape.extend_from_slice(sample_shape);
    let mut stem = Vec::new();
    let mut stages = Vec::new();
    let mut first = true;
    for stage_text in body.split('/') {
        let mut segments = Vec::new();
        for seg_text in stage_text.split('+') {
            let seg_text = seg_text.trim();
            let (inner, residual) = match seg_text.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                Some(inner) => (inner, true),
                None => (seg_text, false),
            };
            let mut layers = Vec::new();
            for token in inner.split(',').map(str::trim) {
                if first && token.starts_with("dense") && shape.len() > 2 {
                    stem = flatten(sample_shape);
                    shape = vec![1, flat_len(sample_shape)];
                }
                first = false;
                let layer = custom_layer(spec, token, &shape)?;
                shape = layer.output_shape(&shape)?;
                layers.push(layer);
            }
            segments.push(super::Segment { layers, residual });
        }
        stages.push(Stage::new(segments));
    }
    let mut head = Vec::new();
    let width = match shape.len() {
        4 => {
            head.push(Layer::spatial_mean());
            shape[1]
        }
        3 => {
            head.push(Layer::token_mean());
            shape[2]
        }
        _ => shape[shape.len() - 1],
    };
    head.push(Layer::dense(width, classes));
    Architecture::new(sample_shape, classes, stem, stages, head)
}

fn custom_layer(spec: &str, token: &str, shape: &[usize]) -> Result<Layer> {
    let number = |prefix: &str| -> Result<usize> {
        token[prefix.len()..]
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| bad(spec, format!("bad layer token {token:?}")))
    };
    let last = *shape.last().expect("rank >= 1");
    Ok(match token {
        "relu" => Layer::relu(),
        "ln" => Layer::layer_norm(last),
        "attn" => Layer::attention(last),
        t if t.starts_with("dense") => Layer::dense(last, number("dense")?),
        t if t.starts_with("conv") => {
            if shape.len() != 4 {
                return Err(bad(spec, format!("{token:?} needs [B, C, H, W] input, got {shape:?}")));
            }
            Layer::conv2d(shape[1], number("conv")?)
        }
        t if t.starts_with("pool") => Layer::avg_pool(number("pool")?),
        _ => return Err(bad(spec, format!("unknown layer token {token:?}"))),
    })
}
