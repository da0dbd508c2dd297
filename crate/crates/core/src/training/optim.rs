use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::network::{Block, Network, ParamRef, Slot};
use crate::replacement::GradTape;
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    AdamW { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAMW: Self = OptimizerKind::AdamW {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerKind::Sgd { .. } => f.write_str("sgd"),
            OptimizerKind::AdamW { .. } => f.write_str("adamw"),
        }
    }
}

/// How the coupling scalars are stepped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarRule {
    /// Same optimizer as the tensors, without weight decay.
    Same,
    /// Plain `x -= lr · g`.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    /// Multiplies the learning rate of coupling scalars.
    pub scalar_lr_mult: f64,
    pub scalar_rule: ScalarRule,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::ADAMW,
            lr: 0.01,
            weight_decay: 1e-4,
            scalar_lr_mult: 1.0,
            scalar_rule: ScalarRule::Same,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments<E> {
    first: Vec<E>,
    second: Vec<E>,
}

/// Optimizer buffers for exactly the network's trainable quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<E: Element> {
    config: OptimizerConfig,
    buffers: BTreeMap<ParamRef, Moments<E>>,
    step: u64,
}

fn grad_of<'t, E: Element>(tape: &'t GradTape<E>, p: &ParamRef) -> Result<GradRef<'t, E>> {
    let missing = || Error::TapeMismatch(format!("no gradient for {p}"));
    Ok(match *p {
        ParamRef::Tensor {
            block: Block::Stage(i),
            slot: Slot::Freezable(j),
        } => GradRef::Tensor(tape.param_grads.get(&i).and_then(|g| g.get(j)).ok_or_else(missing)?),
        ParamRef::Tensor {
            block,
            slot: Slot::Fixed(j),
        } => GradRef::Tensor(tape.fixed_grads.get(&block).and_then(|g| g.get(j)).ok_or_else(missing)?),
        ParamRef::Tensor { .. } => return Err(missing()),
        ParamRef::CouplingA(i) => GradRef::Scalar(tape.scalar_grads.get(&i).ok_or_else(missing)?.0),
        ParamRef::CouplingB(i) => GradRef::Scalar(tape.scalar_grads.get(&i).ok_or_else(missing)?.1),
    })
}

enum GradRef<'t, E: Element> {
    Tensor(&'t Tensor<E>),
    Scalar(E),
}

impl<E: Element> OptimizerState<E> {
    pub fn new(config: OptimizerConfig, net: &Network<E>) -> Self {
        let buffers = net
            .trainable()
            .into_iter()
            .map(|p| {
                let n = net.tensor(&p).map_or(1, Tensor::len);
                let second = match config.kind {
                    OptimizerKind::AdamW { .. } => vec![E::zero(); n],
                    OptimizerKind::Sgd { .. } => Vec::new(),
                };
                (
                    p,
                    Moments {
                        first: vec![E::zero(); n],
                        second,
                    },
                )
            })
            .collect();
        Self {
            config,
            buffers,
            step: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Quantities that have optimizer buffers.
    pub fn tracked(&self) -> impl Iterator<Item = &ParamRef> {
        self.buffers.keys()
    }

    /// One update of every trainable quantity at learning rate `lr`.
    pub fn apply_gradients(&mut self, net: &mut Network<E>, tape: &GradTape<E>, lr: f64) -> Result<()> {
        let params = net.trainable();
        if params.len() != self.buffers.len() || params.iter().any(|p| !self.buffers.contains_key(p)) {
            return Err(Error::TapeMismatch("optimizer state was built for a different network".into()));
        }
        let tape_tensors = tape.param_grads.values().map(Vec::len).sum::<usize>()
            + tape.fixed_grads.values().map(Vec::len).sum::<usize>()
            + 2 * tape.scalar_grads.len();
        if tape_tensors != params.len() {
            return Err(Error::TapeMismatch(format!(
                "tape holds {tape_tensors} gradients for {} trainable quantities",
                params.len()
            )));
        }
        // Validate everything before touching any parameter.
        for p in &params {
            if let (GradRef::Tensor(g), Some(t)) = (grad_of(tape, p)?, net.tensor(p)) {
                if g.shape() != t.shape() {
                    return Err(Error::TapeMismatch(format!(
                        "{p}: gradient shape {:?} vs parameter {:?}",
                        g.shape(),
                        t.shape()
                    )));
                }
            }
        }
        self.step += 1;
        let cfg = self.config;
        for p in &params {
            let m = self.buffers.get_mut(p).expect("checked");
            match grad_of(tape, p)? {
                GradRef::Tensor(g) => {
                    let t = net.tensor(p).expect("tensor ref");
                    let mut data = t.data().to_vec();
                    update(cfg.kind, lr, cfg.weight_decay, self.step, m, &mut data, g.data());
                    let shape = t.shape().to_vec();
                    net.set_tensor(p, Tensor::from_parts(shape, data))?;
                }
                GradRef::Scalar(g) => {
                    let q = crate::network::Quantity { param: *p, element: 0 };
                    let mut v = [net.quantity(&q)?];
                    let slr = lr * cfg.scalar_lr_mult;
                    match cfg.scalar_rule {
                        ScalarRule::Same => update(cfg.kind, slr, 0.0, self.step, m, &mut v, &[g]),
                        ScalarRule::Sgd => v[0] -= E::of(slr) * g,
                    }
                    net.set_quantity(&q, v[0])?;
                }
            }
        }
        Ok(())
    }
}

/// One optimizer step on a flat slice. Weight decay is decoupled:
/// `p ← p·(1 − lr·wd)` before the gradient step.
fn update<E: Element>(
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    step: u64,
    m: &mut Moments<E>,
    param: &mut [E],
    grad: &[E],
) {
    let lr_e = E::of(lr);
    let decay = E::one() - E::of(lr * weight_decay);
    match kind {
        OptimizerKind::Sgd { momentum } => {
            let mu = E::of(momentum);
            for ((p, &g), v) in param.iter_mut().zip(grad).zip(&mut m.first) {
                *v = mu * *v + g;
                if weight_decay != 0.0 {
                    *p *= decay;
                }
                *p -= lr_e * *v;
            }
        }
        OptimizerKind::AdamW { beta1, beta2, eps } => {
            let (b1, b2, eps) = (E::of(beta1), E::of(beta2), E::of(eps));
            let c1 = E::one() - E::of(beta1.powi(step as i32));
            let c2 = E::one() - E::of(beta2.powi(step as i32));
            for (((p, &g), m1), m2) in param.iter_mut().zip(grad).zip(&mut m.first).zip(&mut m.second) {
                *m1 = b1 * *m1 + (E::one() - b1) * g;
                *m2 = b2 * *m2 + (E::one() - b2) * g * g;
                if weight_decay != 0.0 {
                    *p *= decay;
                }
                let m_hat = *m1 / c1;
                let v_hat = *m2 / c2;
                *p -= lr_e * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh(n: usize) -> Moments<f64> {
        Moments {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    #[test]
    fn sgd_one_step() {
        let mut p = [1.0];
        update(OptimizerKind::Sgd { momentum: 0.0 }, 0.1, 0.0, 1, &mut fresh(1), &mut p, &[0.5]);
        assert!((p[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut m = fresh(1);
        let mut p = [0.0];
        for step in 1..=2 {
            update(OptimizerKind::Sgd { momentum: 0.9 }, 1.0, 0.0, step, &mut m, &mut p, &[1.0]);
        }
        assert!((p[0] + 2.9).abs() < 1e-15);
    }

    #[test]
    fn adamw_matches_reference() {
        let (lr, wd) = (0.01, 1e-4);
        let mut m = fresh(1);
        let mut p = [0.3];
        let (mut x, mut m1, mut m2) = (0.3f64, 0.0f64, 0.0f64);
        for t in 1..=3u64 {
            update(OptimizerKind::ADAMW, lr, wd, t, &mut m, &mut p, &[1.0]);
            // reference
            let g = 1.0;
            x -= lr * wd * x;
            m1 = 0.9 * m1 + 0.1 * g;
            m2 = 0.999 * m2 + 0.001 * g * g;
            let mh = m1 / (1.0 - 0.9f64.powi(t as i32));
            let vh = m2 / (1.0 - 0.999f64.powi(t as i32));
            x -= lr * mh / (vh.sqrt() + 1e-8);
            assert!((p[0] - x).abs() < 1e-12, "step {t}: {} vs {x}", p[0]);
        }
    }
}
