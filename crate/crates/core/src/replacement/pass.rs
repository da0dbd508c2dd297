use std::collections::BTreeMap;

use super::compose_params;
use crate::error::{Error, Result};
use crate::network::{Block, Network, StageTrace};
use crate::tensor::{axpy, dot, Element, Tensor};

/// Forward record of one step: every stage trace plus the composed
/// parameters of frozen stages.
#[derive(Debug, Clone)]
pub struct Trace<E: Element> {
    pub stem: StageTrace<E>,
    pub stages: Vec<StageTrace<E>>,
    pub head: StageTrace<E>,
    pub composed: BTreeMap<usize, Vec<Tensor<E>>>,
    pub(crate) consumed: bool,
}

impl<E: Element> Trace<E> {
    /// Network output (logits).
    pub fn output(&self) -> &Tensor<E> {
        &self.head.output
    }

    /// `h₀..h_L`.
    pub fn activations(&self) -> impl Iterator<Item = &Tensor<E>> {
        std::iter::once(&self.stem.output).chain(self.stages.iter().map(|s| &s.output))
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    pub(crate) fn take(&mut self) -> Result<()> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.consumed = true;
        Ok(())
    }
}

/// Gradients of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct GradTape<E: Element> {
    /// `δᵢ = ∂𝓛/∂hᵢ` for `i = 0..=L`.
    pub activation_grads: Vec<Tensor<E>>,
    /// Freezable-tensor gradients of non-frozen stages, keyed 1-based.
    pub param_grads: BTreeMap<usize, Vec<Tensor<E>>>,
    /// Gradients of always-trainable tensors (stem, head, fixed stage slots).
    pub fixed_grads: BTreeMap<Block, Vec<Tensor<E>>>,
    /// `(∂𝓛/∂aᵢ, ∂𝓛/∂bᵢ)` per frozen stage.
    pub scalar_grads: BTreeMap<usize, (E, E)>,
    /// `ĝ`, the gradient with respect to a frozen stage's composed parameters.
    /// Diagnostic only; the optimizer never reads it.
    pub composed_grads: BTreeMap<usize, Vec<Tensor<E>>>,
}

impl<E: Element> GradTape<E> {
    /// Gradient scalars the optimizer consumes this step.
    pub fn gradient_elements(&self) -> usize {
        let tensors = |m: &mut dyn Iterator<Item = &Vec<Tensor<E>>>| -> usize {
            m.flat_map(|v| v.iter()).map(Tensor::len).sum()
        };
        tensors(&mut self.param_grads.values())
            + tensors(&mut self.fixed_grads.values())
            + 2 * self.scalar_grads.len()
    }
}

/// Runs the network forward, composing parameters for frozen stages from the
/// current neighbour values.
pub fn forward_pass<E: Element>(net: &Network<E>, input: &Tensor<E>) -> Result<Trace<E>> {
    let arch = net.architecture();
    let stem_p = net.block_params(Block::Stem);
    let stem = arch.stem().forward(input, &[], &stem_p.fixed)?;
    let mut composed = BTreeMap::new();
    for &i in net.plan().frozen() {
        let (a, b) = net.coupling(i).expect("frozen stage has a coupling");
        let prev = net.freezable(i - 1).ok_or_else(|| neighbour_frozen(i, i - 1))?;
        let next = net.freezable(i + 1).ok_or_else(|| neighbour_frozen(i, i + 1))?;
        composed.insert(i, compose_params(i, a, b, prev, next)?);
    }
    let mut x = stem.output.clone();
    let mut stages = Vec::with_capacity(net.depth());
    for (idx, stage) in arch.stages().iter().enumerate() {
        let i = idx + 1;
        let own = net.block_params(Block::Stage(i));
        let theta = match composed.get(&i) {
            Some(c) => c.as_slice(),
            None => own.freezable.as_deref().expect("unfrozen stage owns its tensors"),
        };
        let trace = stage.forward(&x, theta, &own.fixed)?;
        x = trace.output.clone();
        stages.push(trace);
    }
    let head = arch.head().forward(&x, &[], &net.block_params(Block::Head).fixed)?;
    Ok(Trace {
        stem,
        stages,
        head,
        composed,
        consumed: false,
    })
}

fn neighbour_frozen(i: usize, j: usize) -> Error {
    Error::Compose {
        index: i,
        message: format!("neighbour {j} is frozen"),
    }
}

/// Backward sweep. Activation gradients follow the ordinary layer rules,
/// frozen stages included. The gradient `ĝ` on a frozen stage's composed
/// parameters then yields `∂𝓛/∂a = ⟨ĝ, θᵢ₋₁⟩`, `∂𝓛/∂b = ⟨ĝ, θᵢ₊₁⟩`, and adds
/// `a·ĝ`, `b·ĝ` to the parameter gradients of stages `i−1` and `i+1`.
pub fn backward_pass<E: Element>(
    net: &Network<E>,
    trace: &mut Trace<E>,
    loss_grad: &Tensor<E>,
) -> Result<GradTape<E>> {
    if trace.stages.len() != net.depth() {
        return Err(Error::TapeMismatch(format!(
            "trace has {} stages, network has {}",
            trace.stages.len(),
            net.depth()
        )));
    }
    trace.take()?;
    let arch = net.architecture();
    let mut fixed_grads = BTreeMap::new();
    let head = arch
        .head()
        .backward(&trace.head, &[], &net.block_params(Block::Head).fixed, loss_grad)?;
    fixed_grads.insert(Block::Head, head.fixed);
    let depth = net.depth();
    let mut activation_grads = Vec::with_capacity(depth + 1);
    let mut g = head.input;
    let mut param_grads = BTreeMap::new();
    let mut composed_grads = BTreeMap::new();
    for i in (1..=depth).rev() {
        activation_grads.push(g.clone());
        let own = net.block_params(Block::Stage(i));
        let theta = match trace.composed.get(&i) {
            Some(c) => c.as_slice(),
            None => own.freezable.as_deref().expect("unfrozen stage owns its tensors"),
        };
        let grads = arch.stage(i).backward(&trace.stages[i - 1], theta, &own.fixed, &g)?;
        if !grads.fixed.is_empty() {
            fixed_grads.insert(Block::Stage(i), grads.fixed);
        }
        if net.is_frozen(i) {
            composed_grads.insert(i, grads.freezable);
        } else if !grads.freezable.is_empty() {
            param_grads.insert(i, grads.freezable);
        }
        g = grads.input;
    }
    activation_grads.push(g.clone());
    activation_grads.reverse();
    let stem = arch
        .stem()
        .backward(&trace.stem, &[], &net.block_params(Block::Stem).fixed, &g)?;
    fixed_grads.insert(Block::Stem, stem.fixed);

    let mut scalar_grads = BTreeMap::new();
    for (&i, g_hat) in &composed_grads {
        let (a, b) = net.coupling(i).expect("frozen stage has a coupling");
        let prev = net.freezable(i - 1).expect("checked in forward");
        let next = net.freezable(i + 1).expect("checked in forward");
        let mut ga = E::zero();
        let mut gb = E::zero();
        for ((gh, p), n) in g_hat.iter().zip(prev).zip(next) {
            ga += dot(gh, p)?;
            gb += dot(gh, n)?;
        }
        scalar_grads.insert(i, (ga, gb));
        for (j, coef) in [(i - 1, a), (i + 1, b)] {
            let target: &mut Vec<Tensor<E>> = param_grads.get_mut(&j).expect("neighbours are unfrozen");
            for (t, gh) in target.iter_mut().zip(g_hat) {
                *t = axpy(coef, gh, t)?;
            }
        }
    }
    Ok(GradTape {
        activation_grads,
        param_grads,
        fixed_grads,
        scalar_grads,
        composed_grads,
    })
}
