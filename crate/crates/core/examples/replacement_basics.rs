//! Which stages freeze, what a frozen stage computes, and where its gradient goes.
//!
//! ```text
//! cargo run --example replacement_basics
//! ```

use replearn::layers::Layer;
use replearn::network::{parse_architecture, Architecture, Network, Stage};
use replearn::replacement::{backward_pass, compose_params, forward_pass, frozen_set};
use replearn::Tensor;

fn main() -> replearn::Result<()> {
    for (depth, k) in [(12, 4), (9, 4), (7, 2), (3, 4)] {
        println!("L={depth:<2} k={k}: frozen {:?}", frozen_set(depth, k)?);
    }
    if let Err(e) = frozen_set(5, 1) {
        println!("k=1: {e}");
    }

    // θ₂ = a·θ₁ + b·θ₃ for two neighbouring tensors.
    let prev = [Tensor::vector(&[2.0, 0.0])];
    let next = [Tensor::vector(&[0.0, 4.0])];
    let composed = compose_params(2, 0.75, 0.25, &prev, &next)?;
    println!("0.75·{:?} + 0.25·{:?} = {:?}", prev[0].data(), next[0].data(), composed[0].data());

    // Three 1×1 linear stages, the middle one composed from its neighbours.
    let stage = || Stage::plain(vec![Layer::dense(1, 1)]);
    let arch = Architecture::new(&[1], 1, vec![], vec![stage(), stage(), stage()], vec![])?;
    let mut net = Network::<f64>::replacement(arch, 2, (0.5, 0.5), 0)?;
    let w = |v| Tensor::matrix(&[&[v]]).unwrap();
    let weight = |i| replearn::network::ParamRef::Tensor {
        block: replearn::network::Block::Stage(i),
        slot: replearn::network::Slot::Freezable(0),
    };
    let bias = |i| replearn::network::ParamRef::Tensor {
        block: replearn::network::Block::Stage(i),
        slot: replearn::network::Slot::Freezable(1),
    };
    for (i, v) in [(1, 2.0), (3, 3.0)] {
        net.set_tensor(&weight(i), w(v))?;
        net.set_tensor(&bias(i), Tensor::vector(&[0.0]))?;
    }
    let x = Tensor::matrix(&[&[1.0]])?;
    let mut trace = forward_pass(&net, &x)?;
    println!("y = w3·(a·w1 + b·w3)·w1·x = {}", trace.output().get(0));
    let tape = backward_pass(&net, &mut trace, &Tensor::matrix(&[&[1.0]])?)?;
    let (ga, gb) = tape.scalar_grads[&2];
    println!("dL/da = {ga}, dL/db = {gb}");
    println!("dL/dw1 = {}, dL/dw3 = {}", tape.param_grads[&1][0].get(0), tape.param_grads[&3][0].get(0));

    // A preset: stages 4 and 8 become two scalars each.
    let net = Network::<f32>::replacement(parse_architecture("mlp-9x64", &[2], 2)?, 4, (0.5, 0.5), 0)?;
    println!(
        "mlp-9x64, k=4: frozen {:?}, {} trainable of {} parameters",
        net.plan().frozen(),
        net.trainable_scalar_count(),
        net.architecture().total_param_count()
    );
    Ok(())
}
