//! Network structure: an untouched stem, `L` indexed stages (the units that
//! replacement learning freezes), and a classifier head.
//!
//! A stage is one or more segments; a residual segment adds its input to its
//! output. Each stage parameter lives in one of two slot lists: *freezable*
//! slots are the ones a frozen stage replaces by composition, *fixed* slots
//! stay trainable regardless (the MLP and layer norms of an attention block).
//! Stem and head parameters are all fixed.

mod presets;

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{Layer, LayerIO};
use crate::replacement::FreezePlan;
use crate::tensor::{Element, Tensor};

pub use presets::parse_architecture;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub layers: Vec<Layer>,
    pub residual: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Freezable(usize),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    segments: Vec<Segment>,
    /// `slots[segment][layer][param]`
    slots: Vec<Vec<Vec<Slot>>>,
    freezable_shapes: Vec<Vec<usize>>,
    fixed_shapes: Vec<Vec<usize>>,
}

/// Everything recorded while running one stage forward.
#[derive(Debug, Clone)]
pub struct StageTrace<E: Element> {
    pub input: Tensor<E>,
    pub segments: Vec<Vec<LayerIO<E>>>,
    pub output: Tensor<E>,
}

/// Gradients produced by one stage's backward rule.
#[derive(Debug, Clone)]
pub struct StageGrads<E: Element> {
    pub input: Tensor<E>,
    pub freezable: Vec<Tensor<E>>,
    pub fixed: Vec<Tensor<E>>,
}

impl Stage {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self::build(segments, true)
    }

    /// One plain (non-residual) segment.
    pub fn plain(layers: Vec<Layer>) -> Self {
        Self::new(vec![Segment {
            layers,
            residual: false,
        }])
    }

    /// One residual segment: `y = x + f(x)`.
    pub fn residual(layers: Vec<Layer>) -> Self {
        Self::new(vec![Segment {
            layers,
            residual: true,
        }])
    }

    /// A plain segment whose parameters are never composed (stem and head).
    pub(crate) fn fixed(layers: Vec<Layer>) -> Self {
        Self::build(
            vec![Segment {
                layers,
                residual: false,
            }],
            false,
        )
    }

    fn build(segments: Vec<Segment>, composable: bool) -> Self {
        let mut freezable_shapes = Vec::new();
        let mut fixed_shapes = Vec::new();
        let slots = segments
            .iter()
            .map(|seg| {
                seg.layers
                    .iter()
                    .map(|layer| {
                        let freeze = composable && layer.is_freezable();
                        layer
                            .param_specs()
                            .into_iter()
                            .map(|spec| {
                                if freeze {
                                    freezable_shapes.push(spec.shape);
                                    Slot::Freezable(freezable_shapes.len() - 1)
                                } else {
                                    fixed_shapes.push(spec.shape);
                                    Slot::Fixed(fixed_shapes.len() - 1)
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            segments,
            slots,
            freezable_shapes,
            fixed_shapes,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.segments.iter().flat_map(|s| s.layers.iter())
    }

    pub fn freezable_shapes(&self) -> &[Vec<usize>] {
        &self.freezable_shapes
    }

    pub fn fixed_shapes(&self) -> &[Vec<usize>] {
        &self.fixed_shapes
    }

    /// `Pᵢ`: every parameter scalar of the stage.
    pub fn param_count(&self) -> usize {
        self.freezable_count() + self.fixed_shapes.iter().map(|s| s.iter().product::<usize>()).sum::<usize>()
    }

    /// Scalars a frozen stage gives up.
    pub fn freezable_count(&self) -> usize {
        self.freezable_shapes
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for seg in &self.segments {
            let seg_in = shape.clone();
            for layer in &seg.layers {
                shape = layer.output_shape(&shape)?;
            }
            if seg.residual && shape != seg_in {
                return Err(Error::Architecture(format!(
                    "residual segment maps {seg_in:?} to {shape:?}"
                )));
            }
        }
        Ok(shape)
    }

    fn gather<'a, E: Element>(
        slots: &[Slot],
        freezable: &'a [Tensor<E>],
        fixed: &'a [Tensor<E>],
    ) -> Vec<&'a Tensor<E>> {
        slots
            .iter()
            .map(|s| match *s {
                Slot::Freezable(j) => &freezable[j],
                Slot::Fixed(j) => &fixed[j],
            })
            .collect()
    }

    fn check_arity<E: Element>(&self, freezable: &[Tensor<E>], fixed: &[Tensor<E>]) -> Result<()> {
        if freezable.len() != self.freezable_shapes.len() || fixed.len() != self.fixed_shapes.len() {
            return Err(Error::Architecture(format!(
                "stage expects {} freezable and {} fixed tensors, got {} and {}",
                self.freezable_shapes.len(),
                self.fixed_shapes.len(),
                freezable.len(),
                fixed.len()
            )));
        }
        Ok(())
    }

    pub fn forward<E: Element>(
        &self,
        input: &Tensor<E>,
        freezable: &[Tensor<E>],
        fixed: &[Tensor<E>],
    ) -> Result<StageTrace<E>> {
        self.check_arity(freezable, fixed)?;
        let mut x = input.clone();
        let mut segments = Vec::with_capacity(self.segments.len());
        for (seg, seg_slots) in self.segments.iter().zip(&self.slots) {
            let seg_in = x.clone();
            let mut ios = Vec::with_capacity(seg.layers.len());
            for (layer, slots) in seg.layers.iter().zip(seg_slots) {
                let params = Self::gather(slots, freezable, fixed);
                let io = layer.forward(&x, &params)?;
                x = io.output.clone();
                ios.push(io);
            }
            if seg.residual {
                x = x.add(&seg_in)?;
            }
            segments.push(ios);
        }
        Ok(StageTrace {
            input: input.clone(),
            segments,
            output: x,
        })
    }

    pub fn backward<E: Element>(
        &self,
        trace: &StageTrace<E>,
        freezable: &[Tensor<E>],
        fixed: &[Tensor<E>],
        output_grad: &Tensor<E>,
    ) -> Result<StageGrads<E>> {
        self.check_arity(freezable, fixed)?;
        let mut freezable_grads: Vec<Option<Tensor<E>>> = vec![None; freezable.len()];
        let mut fixed_grads: Vec<Option<Tensor<E>>> = vec![None; fixed.len()];
        let mut g = output_grad.clone();
        for ((seg, seg_slots), ios) in self
            .segments
            .iter()
            .zip(&self.slots)
            .zip(&trace.segments)
            .rev()
        {
            let skip = seg.residual.then(|| g.clone());
            for ((layer, slots), io) in seg.layers.iter().zip(seg_slots).zip(ios).rev() {
                let params = Self::gather(slots, freezable, fixed);
                let (gx, gp) = layer.backward(io, &params, &g)?;
                for (slot, grad) in slots.iter().zip(gp) {
                    let target = match *slot {
                        Slot::Freezable(j) => &mut freezable_grads[j],
                        Slot::Fixed(j) => &mut fixed_grads[j],
                    };
                    *target = Some(grad);
                }
                g = gx;
            }
            if let Some(skip) = skip {
                g = g.add(&skip)?;
            }
        }
        let unwrap = |v: Vec<Option<Tensor<E>>>| -> Vec<Tensor<E>> {
            v.into_iter().map(|t| t.expect("every slot belongs to exactly one layer")).collect()
        };
        Ok(StageGrads {
            input: g,
            freezable: unwrap(freezable_grads),
            fixed: unwrap(fixed_grads),
        })
    }

    fn init_params<E: Element>(&self, rng: &mut ChaCha8Rng) -> StageParams<E> {
        let mut freezable: Vec<Option<Tensor<E>>> = vec![None; self.freezable_shapes.len()];
        let mut fixed: Vec<Option<Tensor<E>>> = vec![None; self.fixed_shapes.len()];
        for (seg, seg_slots) in self.segments.iter().zip(&self.slots) {
            for (layer, slots) in seg.layers.iter().zip(seg_slots) {
                for (slot, t) in slots.iter().zip(layer.init_params::<E, _>(rng)) {
                    match *slot {
                        Slot::Freezable(j) => freezable[j] = Some(t),
                        Slot::Fixed(j) => fixed[j] = Some(t),
                    }
                }
            }
        }
        StageParams {
            freezable: Some(freezable.into_iter().map(Option::unwrap).collect()),
            fixed: fixed.into_iter().map(Option::unwrap).collect(),
        }
    }
}

/// Parameter storage for one stage. A frozen stage owns no freezable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams<E: Element> {
    pub freezable: Option<Vec<Tensor<E>>>,
    pub fixed: Vec<Tensor<E>>,
}

/// A complete architecture for inputs of a given per-sample shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    sample_shape: Vec<usize>,
    classes: usize,
    stem: Stage,
    stages: Vec<Stage>,
    head: Stage,
}

impl Architecture {
    /// Validates that shapes flow from `[batch, sample_shape..]` to `[batch, classes]`.
    pub fn new(
        sample_shape: &[usize],
        classes: usize,
        stem: Vec<Layer>,
        stages: Vec<Stage>,
        head: Vec<Layer>,
    ) -> Result<Self> {
        let arch = Self {
            sample_shape: sample_shape.to_vec(),
            classes,
            stem: Stage::fixed(stem),
            stages,
            head: Stage::fixed(head),
        };
        let out = arch.stage_shapes()?.pop().expect("non-empty");
        if out != [1, classes] {
            return Err(Error::Architecture(format!(
                "network output shape {out:?} is not [batch, {classes}]"
            )));
        }
        Ok(arch)
    }

    /// Activation shapes for a batch of one: stem output `h₀`, each stage output
    /// `h₁..h_L`, then the head output.
    pub fn stage_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = vec![1];
        shape.extend_from_slice(&self.sample_shape);
        let mut shape = self.stem.output_shape(&shape)?;
        let mut shapes = vec![shape.clone()];
        for (i, stage) in self.stages.iter().enumerate() {
            shape = stage
                .output_shape(&shape)
                .map_err(|e| Error::Architecture(format!("stage {}: {e}", i + 1)))?;
            shapes.push(shape.clone());
        }
        shapes.push(self.head.output_shape(&shape)?);
        Ok(shapes)
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// `L`, the number of indexed stages.
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn stem(&self) -> &Stage {
        &self.stem
    }

    pub fn head(&self) -> &Stage {
        &self.head
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Stage `i`, 1-based.
    pub fn stage(&self, i: usize) -> &Stage {
        &self.stages[i - 1]
    }

    /// `Pᵢ` for `i = 1..=L`.
    pub fn stage_param_counts(&self) -> Vec<usize> {
        self.stages.iter().map(Stage::param_count).collect()
    }

    /// Every parameter scalar including stem and head.
    pub fn total_param_count(&self) -> usize {
        self.stem.param_count() + self.head.param_count() + self.stages.iter().map(Stage::param_count).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Stem,
    /// 1-based stage index.
    Stage(usize),
    Head,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Stem => write!(f, "stem"),
            Block::Stage(i) => write!(f, "stage{i}"),
            Block::Head => write!(f, "head"),
        }
    }
}

/// Names one parameter tensor or coupling scalar of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamRef {
    Tensor { block: Block, slot: Slot },
    CouplingA(usize),
    CouplingB(usize),
}

impl fmt::Display for ParamRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamRef::Tensor {
                block,
                slot: Slot::Freezable(j),
            } => write!(f, "{block}.theta{j}"),
            ParamRef::Tensor {
                block,
                slot: Slot::Fixed(j),
            } => write!(f, "{block}.fixed{j}"),
            ParamRef::CouplingA(i) => write!(f, "a{i}"),
            ParamRef::CouplingB(i) => write!(f, "b{i}"),
        }
    }
}

/// One scalar: element `element` of a tensor, or a coupling scalar (element 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quantity {
    pub param: ParamRef,
    pub element: usize,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param {
            ParamRef::Tensor { .. } => write!(f, "{}[{}]", self.param, self.element),
            _ => write!(f, "{}", self.param),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    EndToEnd,
    Replacement,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::EndToEnd => "e2e",
            Mode::Replacement => "replacement",
        })
    }
}

/// A network with live parameters and its freeze plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<E: Element = f64> {
    arch: Architecture,
    mode: Mode,
    plan: FreezePlan<E>,
    stem: StageParams<E>,
    stages: Vec<StageParams<E>>,
    head: StageParams<E>,
}

impl<E: Element> Network<E> {
    /// End-to-end network: nothing frozen.
    pub fn end_to_end(arch: Architecture, seed: u64) -> Self {
        let plan = FreezePlan::disabled(arch.depth());
        Self::with_plan(arch, Mode::EndToEnd, plan, seed)
    }

    /// Replacement-learning network with freeze interval `k` and coupling
    /// initialisation `(a, b)`. Parameters are drawn from the same seeded
    /// stream as [`Network::end_to_end`]; frozen stages then drop theirs.
    pub fn replacement(arch: Architecture, k: usize, coupling_init: (E, E), seed: u64) -> Result<Self> {
        let plan = FreezePlan::for_architecture(&arch, k, coupling_init)?;
        Ok(Self::with_plan(arch, Mode::Replacement, plan, seed))
    }

    fn with_plan(arch: Architecture, mode: Mode, plan: FreezePlan<E>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem = arch.stem.init_params(&mut rng);
        let mut stages: Vec<StageParams<E>> =
            arch.stages.iter().map(|s| s.init_params(&mut rng)).collect();
        let head = arch.head.init_params(&mut rng);
        for &i in plan.frozen() {
            stages[i - 1].freezable = None;
        }
        Self {
            arch,
            mode,
            plan,
            stem,
            stages,
            head,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn plan(&self) -> &FreezePlan<E> {
        &self.plan
    }

    pub fn depth(&self) -> usize {
        self.arch.depth()
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.plan.is_frozen(i)
    }

    pub fn block_params(&self, block: Block) -> &StageParams<E> {
        match block {
            Block::Stem => &self.stem,
            Block::Stage(i) => &self.stages[i - 1],
            Block::Head => &self.head,
        }
    }

    fn block_params_mut(&mut self, block: Block) -> &mut StageParams<E> {
        match block {
            Block::Stem => &mut self.stem,
            Block::Stage(i) => &mut self.stages[i - 1],
            Block::Head => &mut self.head,
        }
    }

    pub fn block_stage(&self, block: Block) -> &Stage {
        match block {
            Block::Stem => &self.arch.stem,
            Block::Stage(i) => self.arch.stage(i),
            Block::Head => &self.arch.head,
        }
    }

    /// Freezable tensors of stage `i`, or `None` when it is frozen.
    pub fn freezable(&self, i: usize) -> Option<&[Tensor<E>]> {
        self.stages[i - 1].freezable.as_deref()
    }

    pub fn coupling(&self, i: usize) -> Option<(E, E)> {
        self.plan.coupling(i)
    }

    pub fn set_coupling(&mut self, i: usize, a: E, b: E) -> Result<()> {
        self.plan.set_coupling(i, a, b)
    }

    pub fn tensor(&self, param: &ParamRef) -> Option<&Tensor<E>> {
        match *param {
            ParamRef::Tensor { block, slot } => {
                if let Block::Stage(i) = block {
                    if i == 0 || i > self.depth() {
                        return None;
                    }
                }
                let p = self.block_params(block);
                match slot {
                    Slot::Freezable(j) => p.freezable.as_ref()?.get(j),
                    Slot::Fixed(j) => p.fixed.get(j),
                }
            }
            _ => None,
        }
    }

    /// Replaces a trainable tensor; the shape must match.
    pub fn set_tensor(&mut self, param: &ParamRef, value: Tensor<E>) -> Result<()> {
        let current = self
            .tensor(param)
            .ok_or_else(|| Error::NotTrainable(param.to_string()))?;
        if current.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set_tensor",
                left: current.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        let ParamRef::Tensor { block, slot } = *param else {
            unreachable!("tensor() only resolves tensor refs")
        };
        let p = self.block_params_mut(block);
        let target = match slot {
            Slot::Freezable(j) => &mut p.freezable.as_mut().expect("checked above")[j],
            Slot::Fixed(j) => &mut p.fixed[j],
        };
        *target = value;
        Ok(())
    }

    /// Every trainable parameter tensor and coupling scalar, in a fixed order:
    /// stem, stages 1..L (freezable then fixed, then a and b when frozen), head.
    pub fn trainable(&self) -> Vec<ParamRef> {
        let mut out = Vec::new();
        let push_block = |out: &mut Vec<ParamRef>, block: Block, p: &StageParams<E>| {
            if let Some(f) = &p.freezable {
                out.extend((0..f.len()).map(|j| ParamRef::Tensor {
                    block,
                    slot: Slot::Freezable(j),
                }));
            }
            out.extend((0..p.fixed.len()).map(|j| ParamRef::Tensor {
                block,
                slot: Slot::Fixed(j),
            }));
        };
        push_block(&mut out, Block::Stem, &self.stem);
        for (idx, p) in self.stages.iter().enumerate() {
            let i = idx + 1;
            push_block(&mut out, Block::Stage(i), p);
            if self.is_frozen(i) {
                out.push(ParamRef::CouplingA(i));
                out.push(ParamRef::CouplingB(i));
            }
        }
        push_block(&mut out, Block::Head, &self.head);
        out
    }

    /// Live count of trainable scalars, enumerated from the stored tensors.
    pub fn trainable_scalar_count(&self) -> usize {
        self.trainable()
            .iter()
            .map(|p| self.tensor(p).map_or(1, Tensor::len))
            .sum()
    }

    /// Every trainable scalar as a [`Quantity`].
    pub fn quantities(&self) -> Vec<Quantity> {
        self.trainable()
            .into_iter()
            .flat_map(|param| {
                let n = self.tensor(&param).map_or(1, Tensor::len);
                (0..n).map(move |element| Quantity { param, element })
            })
            .collect()
    }

    pub fn quantity(&self, q: &Quantity) -> Result<E> {
        match q.param {
            ParamRef::CouplingA(i) | ParamRef::CouplingB(i) if q.element == 0 => {
                let (a, b) = self
                    .coupling(i)
                    .ok_or_else(|| Error::NotTrainable(q.to_string()))?;
                Ok(if matches!(q.param, ParamRef::CouplingA(_)) { a } else { b })
            }
            ParamRef::Tensor { .. } => {
                let t = self
                    .tensor(&q.param)
                    .ok_or_else(|| Error::NotTrainable(q.to_string()))?;
                if q.element >= t.len() {
                    return Err(Error::NotTrainable(q.to_string()));
                }
                Ok(t.get(q.element))
            }
            _ => Err(Error::NotTrainable(q.to_string())),
        }
    }

    pub fn set_quantity(&mut self, q: &Quantity, value: E) -> Result<()> {
        self.quantity(q)?;
        match q.param {
            ParamRef::CouplingA(i) => {
                let (_, b) = self.coupling(i).expect("checked");
                self.set_coupling(i, value, b)
            }
            ParamRef::CouplingB(i) => {
                let (a, _) = self.coupling(i).expect("checked");
                self.set_coupling(i, a, value)
            }
            ParamRef::Tensor { .. } => {
                let t = self.tensor(&q.param).expect("checked").with_element(q.element, value);
                self.set_tensor(&q.param, t)
            }
        }
    }

    /// Hash of every stored parameter bit and coupling scalar.
    pub fn param_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in self.trainable() {
            match self.tensor(&p) {
                Some(t) => {
                    h.write_usize(t.len());
                    t.data().iter().for_each(|x| h.write_u64(x.bits()));
                }
                None => {
                    let q = Quantity { param: p, element: 0 };
                    h.write_u64(self.quantity(&q).expect("trainable").bits());
                }
            }
        }
        h.finish()
    }

    /// Adds seeded uniform noise in `[-scale, scale]` to every trainable tensor
    /// element, so biases and gains are not all at their initial constants.
    pub fn jitter(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in self.trainable() {
            if let Some(t) = self.tensor(&p) {
                let data = t.data().iter().map(|&x| x + E::of(rng.random_range(-scale..=scale))).collect();
                let noisy = Tensor::from_parts(t.shape().to_vec(), data);
                self.set_tensor(&p, noisy).expect("same shape");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp(depth: usize, width: usize) -> Architecture {
        Architecture::new(
            &[3],
            2,
            vec![Layer::dense(3, width), Layer::relu()],
            (0..depth)
                .map(|_| Stage::plain(vec![Layer::dense(width, width), Layer::relu()]))
                .collect(),
            vec![Layer::dense(width, 2)],
        )
        .unwrap()
    }

    #[test]
    fn architecture_rejects_broken_shape_flow() {
        let err = Architecture::new(
            &[3],
            2,
            vec![],
            vec![Stage::plain(vec![Layer::dense(4, 4)])],
            vec![Layer::dense(4, 2)],
        );
        assert!(err.is_err());
        let err = Architecture::new(
            &[3],
            2,
            vec![],
            vec![Stage::residual(vec![Layer::dense(3, 4)])],
            vec![Layer::dense(4, 2)],
        );
        assert!(err.unwrap_err().to_string().contains("residual"));
    }

    #[test]
    fn frozen_stages_own_no_freezable_tensors() {
        let net = Network::<f64>::replacement(mlp(9, 4), 4, (0.5, 0.5), 1).unwrap();
        assert_eq!(net.plan().frozen(), &[4, 8]);
        for i in 1..=9 {
            assert_eq!(net.freezable(i).is_none(), i == 4 || i == 8);
        }
        let trainable = net.trainable();
        assert!(trainable.contains(&ParamRef::CouplingA(4)));
        assert!(!trainable.contains(&ParamRef::CouplingA(3)));
    }

    #[test]
    fn end_to_end_and_replacement_share_initialisation() {
        let e2e = Network::<f64>::end_to_end(mlp(5, 4), 3);
        let rep = Network::<f64>::replacement(mlp(5, 4), 4, (0.5, 0.5), 3).unwrap();
        for i in [1, 2, 3, 5] {
            assert_eq!(e2e.freezable(i), rep.freezable(i));
        }
        assert_eq!(e2e.block_params(Block::Head), rep.block_params(Block::Head));
    }

    #[test]
    fn quantity_roundtrip_and_frozen_rejection() {
        let mut net = Network::<f64>::replacement(mlp(3, 2), 2, (0.5, 0.5), 0).unwrap();
        let q = Quantity {
            param: ParamRef::Tensor {
                block: Block::Stage(1),
                slot: Slot::Freezable(1),
            },
            element: 1,
        };
        net.set_quantity(&q, 0.25).unwrap();
        assert_eq!(net.quantity(&q).unwrap(), 0.25);
        let frozen = Quantity {
            param: ParamRef::Tensor {
                block: Block::Stage(2),
                slot: Slot::Freezable(0),
            },
            element: 0,
        };
        assert!(matches!(net.quantity(&frozen), Err(Error::NotTrainable(_))));
        let a = Quantity {
            param: ParamRef::CouplingA(2),
            element: 0,
        };
        net.set_quantity(&a, 0.75).unwrap();
        assert_eq!(net.coupling(2), Some((0.75, 0.5)));
    }

    #[test]
    fn jitter_changes_hash_deterministically() {
        let mut a = Network::<f64>::end_to_end(mlp(2, 3), 0);
        let mut b = a.clone();
        let before = a.param_hash();
        a.jitter(9, 0.1);
        b.jitter(9, 0.1);
        assert_ne!(before, a.param_hash());
        assert_eq!(a.param_hash(), b.param_hash());
    }
}
