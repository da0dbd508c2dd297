//! Plain backpropagation with every stage using its own parameters. This is
//! the baseline replacement mode must reproduce exactly when nothing is frozen.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{Block, Network};
use crate::replacement::{GradTape, Trace};
use crate::tensor::{Element, Tensor};

fn require_unfrozen<E: Element>(net: &Network<E>) -> Result<()> {
    if net.plan().frozen().is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "end-to-end pass on a network with frozen stages {:?}",
            net.plan().frozen()
        )))
    }
}

pub fn forward<E: Element>(net: &Network<E>, input: &Tensor<E>) -> Result<Trace<E>> {
    require_unfrozen(net)?;
    let arch = net.architecture();
    let stem = arch.stem().forward(input, &[], &net.block_params(Block::Stem).fixed)?;
    let mut h = stem.output.clone();
    let mut stages = Vec::new();
    for i in 1..=net.depth() {
        let p = net.block_params(Block::Stage(i));
        let theta = p.freezable.as_deref().unwrap_or_default();
        let t = arch.stage(i).forward(&h, theta, &p.fixed)?;
        h = t.output.clone();
        stages.push(t);
    }
    let head = arch.head().forward(&h, &[], &net.block_params(Block::Head).fixed)?;
    Ok(Trace {
        stem,
        stages,
        head,
        composed: BTreeMap::new(),
        consumed: false,
    })
}

pub fn backward<E: Element>(net: &Network<E>, trace: &mut Trace<E>, loss_grad: &Tensor<E>) -> Result<GradTape<E>> {
    require_unfrozen(net)?;
    trace.take()?;
    let arch = net.architecture();
    let depth = net.depth();
    let mut fixed_grads = BTreeMap::new();
    let mut param_grads = BTreeMap::new();
    let mut activation_grads = Vec::with_capacity(depth + 1);

    let head = arch
        .head()
        .backward(&trace.head, &[], &net.block_params(Block::Head).fixed, loss_grad)?;
    fixed_grads.insert(Block::Head, head.fixed);
    let mut delta = head.input;
    for i in (1..=depth).rev() {
        activation_grads.push(delta.clone());
        let p = net.block_params(Block::Stage(i));
        let theta = p.freezable.as_deref().unwrap_or_default();
        let g = arch.stage(i).backward(&trace.stages[i - 1], theta, &p.fixed, &delta)?;
        if !g.freezable.is_empty() {
            param_grads.insert(i, g.freezable);
        }
        if !g.fixed.is_empty() {
            fixed_grads.insert(Block::Stage(i), g.fixed);
        }
        delta = g.input;
    }
    activation_grads.push(delta.clone());
    activation_grads.reverse();
    let stem = arch
        .stem()
        .backward(&trace.stem, &[], &net.block_params(Block::Stem).fixed, &delta)?;
    fixed_grads.insert(Block::Stem, stem.fixed);
    Ok(GradTape {
        activation_grads,
        param_grads,
        fixed_grads,
        scalar_grads: BTreeMap::new(),
        composed_grads: BTreeMap::new(),
    })
}
