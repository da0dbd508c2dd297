//! Differentiable layers with hand-written forward and backward rules.
//!
//! Parameters are always passed in explicitly rather than read from the
//! layer, so the same layer description can be evaluated with its own
//! parameters or with parameters composed from its neighbours.
//!
//! The leading axis of every activation is the batch axis. Shape
//! conventions per kind:
//!
//! | kind          | input            | output           |
//! |---------------|------------------|------------------|
//! | `Dense`       | `[.., in]`       | `[.., out]`      |
//! | `Conv2d`      | `[B, C, H, W]`   | `[B, C', H, W]`  |
//! | `Relu`        | any              | same             |
//! | `LayerNorm`   | `[.., d]`        | same             |
//! | `Attention`   | `[.., T, d]`     | same             |
//! | `AvgPool2d`   | `[.., H, W]`     | `[.., H/f, W/f]` |
//! | `SpatialMean` | `[B, C, H, W]`   | `[B, C]`         |
//! | `TokenMean`   | `[B, T, d]`      | `[B, d]`         |
//! | `Reshape`     | `[B, ..]`        | `[B, shape..]`   |

mod attention;
mod conv;
mod dense;
mod loss;
mod norm;
mod shape;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

pub use loss::{linear_functional, softmax_xent, Objective};
pub use norm::LAYER_NORM_EPS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    /// 3×3 kernel, stride 1, zero padding 1.
    Conv2d { in_channels: usize, out_channels: usize },
    Relu,
    LayerNorm { dim: usize },
    /// Single-head scaled dot-product self-attention.
    Attention { dim: usize },
    AvgPool2d { factor: usize },
    SpatialMean,
    TokenMean,
    /// Reshape every sample to `sample_shape`, keeping the batch axis.
    Reshape { sample_shape: Vec<usize> },
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Dense { inputs, outputs } => write!(f, "Dense({inputs}->{outputs})"),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
            } => write!(f, "Conv2d({in_channels}->{out_channels})"),
            LayerKind::Relu => write!(f, "ReLU"),
            LayerKind::LayerNorm { dim } => write!(f, "LayerNorm({dim})"),
            LayerKind::Attention { dim } => write!(f, "Attention({dim})"),
            LayerKind::AvgPool2d { factor } => write!(f, "AvgPool2d({factor})"),
            LayerKind::SpatialMean => write!(f, "SpatialMean"),
            LayerKind::TokenMean => write!(f, "TokenMean"),
            LayerKind::Reshape { sample_shape } => write!(f, "Reshape({sample_shape:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    kind: LayerKind,
    freezable: bool,
}

/// Intermediates a layer's backward rule needs beyond its input and output.
#[derive(Debug, Clone)]
pub enum Cache<E: Element> {
    /// Input and output suffice.
    Plain,
    LayerNorm {
        normalized: Tensor<E>,
        inv_std: Vec<E>,
    },
    Attention {
        query: Tensor<E>,
        key: Tensor<E>,
        value: Tensor<E>,
        weights: Tensor<E>,
        context: Tensor<E>,
    },
}

/// One evaluation of a layer: `output = f(input; params)` plus whatever the
/// backward rule needs.
#[derive(Debug, Clone)]
pub struct LayerIO<E: Element> {
    pub input: Tensor<E>,
    pub output: Tensor<E>,
    pub cache: Option<Cache<E>>,
}

impl Layer {
    pub fn new(kind: LayerKind) -> Self {
        let freezable = matches!(
            kind,
            LayerKind::Dense { .. } | LayerKind::Conv2d { .. } | LayerKind::Attention { .. }
        );
        Self { kind, freezable }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self::new(LayerKind::Dense { inputs, outputs })
    }

    pub fn conv2d(in_channels: usize, out_channels: usize) -> Self {
        Self::new(LayerKind::Conv2d {
            in_channels,
            out_channels,
        })
    }

    pub fn relu() -> Self {
        Self::new(LayerKind::Relu)
    }

    /// Layer-norm parameters are never composed.
    pub fn layer_norm(dim: usize) -> Self {
        Self::new(LayerKind::LayerNorm { dim })
    }

    pub fn attention(dim: usize) -> Self {
        Self::new(LayerKind::Attention { dim })
    }

    pub fn avg_pool(factor: usize) -> Self {
        Self::new(LayerKind::AvgPool2d { factor })
    }

    pub fn spatial_mean() -> Self {
        Self::new(LayerKind::SpatialMean)
    }

    pub fn token_mean() -> Self {
        Self::new(LayerKind::TokenMean)
    }

    pub fn reshape(sample_shape: &[usize]) -> Self {
        Self::new(LayerKind::Reshape {
            sample_shape: sample_shape.to_vec(),
        })
    }

    /// Excludes this layer's parameters from replacement composition; used for
    /// the MLP half of an attention block.
    pub fn never_frozen(mut self) -> Self {
        self.freezable = false;
        self
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn is_freezable(&self) -> bool {
        self.freezable && self.param_count() > 0
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let spec = |name, shape: &[usize]| ParamSpec {
            name,
            shape: shape.to_vec(),
        };
        match self.kind {
            LayerKind::Dense { inputs, outputs } => vec![
                spec("weight", &[outputs, inputs]),
                spec("bias", &[outputs]),
            ],
            LayerKind::Conv2d {
                in_channels,
                out_channels,
            } => vec![
                spec("weight", &[out_channels, in_channels, 3, 3]),
                spec("bias", &[out_channels]),
            ],
            LayerKind::LayerNorm { dim } => vec![spec("gain", &[dim]), spec("bias", &[dim])],
            LayerKind::Attention { dim } => vec![
                spec("wq", &[dim, dim]),
                spec("wk", &[dim, dim]),
                spec("wv", &[dim, dim]),
                spec("wo", &[dim, dim]),
            ],
            _ => Vec::new(),
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        self.param_specs().into_iter().map(|s| s.name).collect()
    }

    pub fn freezable_param_names(&self) -> Vec<&'static str> {
        if self.freezable {
            self.param_names()
        } else {
            Vec::new()
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_specs()
            .iter()
            .map(|s| s.shape.iter().product::<usize>())
            .sum()
    }

    /// Output shape for a given input shape, or an error naming the offending shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |expect: &str| {
            Err(Error::layer(
                self.kind.to_string(),
                format!("expected input {expect}, got {input:?}"),
            ))
        };
        let rank = input.len();
        match &self.kind {
            LayerKind::Dense { inputs, outputs } => {
                if input.last() != Some(inputs) {
                    return bad(&format!("[.., {inputs}]"));
                }
                let mut out = input.to_vec();
                *out.last_mut().unwrap() = *outputs;
                Ok(out)
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
            } => {
                if rank != 4 || input[1] != *in_channels {
                    return bad(&format!("[B, {in_channels}, H, W]"));
                }
                Ok(vec![input[0], *out_channels, input[2], input[3]])
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::LayerNorm { dim } => {
                if input.last() != Some(dim) {
                    return bad(&format!("[.., {dim}]"));
                }
                Ok(input.to_vec())
            }
            LayerKind::Attention { dim } => {
                if rank < 2 || input[rank - 1] != *dim {
                    return bad(&format!("[.., T, {dim}]"));
                }
                Ok(input.to_vec())
            }
            LayerKind::AvgPool2d { factor } => {
                if rank < 3 || *factor == 0 || !input[rank - 1].is_multiple_of(*factor) || !input[rank - 2].is_multiple_of(*factor)
                {
                    return bad(&format!("[.., H, W] with H and W divisible by {factor}"));
                }
                let mut out = input.to_vec();
                out[rank - 2] /= factor;
                out[rank - 1] /= factor;
                Ok(out)
            }
            LayerKind::SpatialMean => {
                if rank != 4 {
                    return bad("[B, C, H, W]");
                }
                Ok(vec![input[0], input[1]])
            }
            LayerKind::TokenMean => {
                if rank != 3 {
                    return bad("[B, T, d]");
                }
                Ok(vec![input[0], input[2]])
            }
            LayerKind::Reshape { sample_shape } => {
                let per_sample: usize = input.iter().skip(1).product();
                let target: usize = sample_shape.iter().product();
                if rank < 1 || per_sample != target || sample_shape.contains(&0) {
                    return bad(&format!("[B, ..] with {target} elements per sample"));
                }
                let mut out = vec![input[0]];
                out.extend_from_slice(sample_shape);
                Ok(out)
            }
        }
    }

    /// Fresh parameters: He-uniform for dense and conv weights, Xavier-uniform
    /// for attention projections, zero biases, unit layer-norm gain.
    pub fn init_params<E: Element, R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Tensor<E>> {
        let uniform = |rng: &mut R, shape: &[usize], bound: f64| {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| E::of(rng.random_range(-bound..=bound)))
                .collect();
            Tensor::from_parts(shape.to_vec(), data)
        };
        match self.kind {
            LayerKind::Dense { inputs, outputs } => vec![
                uniform(rng, &[outputs, inputs], (6.0 / inputs as f64).sqrt()),
                Tensor::zeros(&[outputs]),
            ],
            LayerKind::Conv2d {
                in_channels,
                out_channels,
            } => vec![
                uniform(
                    rng,
                    &[out_channels, in_channels, 3, 3],
                    (6.0 / (9 * in_channels) as f64).sqrt(),
                ),
                Tensor::zeros(&[out_channels]),
            ],
            LayerKind::LayerNorm { dim } => {
                vec![Tensor::filled(&[dim], E::one()), Tensor::zeros(&[dim])]
            }
            LayerKind::Attention { dim } => {
                let bound = (3.0 / dim as f64).sqrt();
                (0..4).map(|_| uniform(rng, &[dim, dim], bound)).collect()
            }
            _ => Vec::new(),
        }
    }

    fn check_params<E: Element>(&self, params: &[&Tensor<E>]) -> Result<()> {
        let specs = self.param_specs();
        if specs.len() != params.len() {
            return Err(Error::layer(
                self.kind.to_string(),
                format!("expected {} parameter tensors, got {}", specs.len(), params.len()),
            ));
        }
        for (spec, p) in specs.iter().zip(params) {
            if p.shape() != spec.shape.as_slice() {
                return Err(Error::layer(
                    self.kind.to_string(),
                    format!(
                        "parameter {} has shape {:?}, expected {:?}",
                        spec.name,
                        p.shape(),
                        spec.shape
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn forward<E: Element>(&self, input: &Tensor<E>, params: &[&Tensor<E>]) -> Result<LayerIO<E>> {
        self.check_params(params)?;
        let out_shape = self.output_shape(input.shape())?;
        let (output, cache) = match &self.kind {
            LayerKind::Dense { .. } => (dense::forward(input, params[0], params[1], out_shape), Cache::Plain),
            LayerKind::Conv2d { .. } => (conv::forward(input, params[0], params[1], out_shape), Cache::Plain),
            LayerKind::Relu => (shape::relu_forward(input), Cache::Plain),
            LayerKind::LayerNorm { .. } => norm::forward(input, params[0], params[1]),
            LayerKind::Attention { .. } => {
                attention::forward(input, params[0], params[1], params[2], params[3])
            }
            LayerKind::AvgPool2d { factor } => (shape::pool_forward(input, *factor, out_shape), Cache::Plain),
            LayerKind::SpatialMean => (shape::spatial_mean_forward(input, out_shape), Cache::Plain),
            LayerKind::TokenMean => (shape::token_mean_forward(input, out_shape), Cache::Plain),
            LayerKind::Reshape { .. } => (input.reshape(&out_shape)?, Cache::Plain),
        };
        Ok(LayerIO {
            input: input.clone(),
            output,
            cache: Some(cache),
        })
    }

    /// Returns `(input_grad, param_grads)` for an upstream gradient on the output.
    pub fn backward<E: Element>(
        &self,
        io: &LayerIO<E>,
        params: &[&Tensor<E>],
        output_grad: &Tensor<E>,
    ) -> Result<(Tensor<E>, Vec<Tensor<E>>)> {
        self.check_params(params)?;
        if output_grad.shape() != io.output.shape() {
            return Err(Error::layer(
                self.kind.to_string(),
                format!(
                    "output gradient shape {:?} does not match output shape {:?}",
                    output_grad.shape(),
                    io.output.shape()
                ),
            ));
        }
        let cache = io
            .cache
            .as_ref()
            .ok_or_else(|| Error::MissingCache(self.kind.to_string()))?;
        let x = &io.input;
        let g = output_grad;
        Ok(match (&self.kind, cache) {
            (LayerKind::Dense { .. }, _) => {
                let (gx, gw, gb) = dense::backward(x, params[0], g);
                (gx, vec![gw, gb])
            }
            (LayerKind::Conv2d { .. }, _) => {
                let (gx, gw, gb) = conv::backward(x, params[0], g);
                (gx, vec![gw, gb])
            }
            (LayerKind::Relu, _) => (shape::relu_backward(x, g), Vec::new()),
            (
                LayerKind::LayerNorm { .. },
                Cache::LayerNorm {
                    normalized,
                    inv_std,
                },
            ) => {
                let (gx, ggain, gbias) = norm::backward(normalized, inv_std, params[0], g);
                (gx, vec![ggain, gbias])
            }
            (
                LayerKind::Attention { .. },
                Cache::Attention {
                    query,
                    key,
                    value,
                    weights,
                    context,
                },
            ) => {
                let grads = attention::backward(
                    x,
                    [params[0], params[1], params[2], params[3]],
                    attention::Saved {
                        query,
                        key,
                        value,
                        weights,
                        context,
                    },
                    g,
                );
                (grads.0, grads.1)
            }
            (LayerKind::AvgPool2d { factor }, _) => (shape::pool_backward(x, *factor, g), Vec::new()),
            (LayerKind::SpatialMean, _) => (shape::spatial_mean_backward(x, g), Vec::new()),
            (LayerKind::TokenMean, _) => (shape::token_mean_backward(x, g), Vec::new()),
            (LayerKind::Reshape { .. }, _) => (g.reshape(x.shape())?, Vec::new()),
            (kind, _) => return Err(Error::MissingCache(kind.to_string())),
        })
    }
}
