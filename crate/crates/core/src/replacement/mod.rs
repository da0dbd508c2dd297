//! Frozen-set scheduling and parameter composition.
//!
//! A frozen stage `i` owns no tensors of its own. Each step it runs with
//! `θᵢ = aᵢ·θᵢ₋₁ + bᵢ·θᵢ₊₁`, and only `aᵢ`, `bᵢ` are trained.

mod pass;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::Architecture;
use crate::tensor::{axpy, Element, Tensor};

pub use pass::{backward_pass, forward_pass, GradTape, Trace};

/// Multiples of `k` in `1..=L`, except `L` itself.
///
/// ```
/// assert_eq!(replearn::replacement::frozen_set(12, 4).unwrap(), vec![4, 8]);
/// assert!(replearn::replacement::frozen_set(1, 1).is_err());
/// ```
pub fn frozen_set(depth: usize, k: usize) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidInterval(k));
    }
    Ok((1..depth).filter(|i| i % k == 0).collect())
}

/// Which stages are frozen and their coupling scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct FreezePlan<E: Element = f64> {
    depth: usize,
    interval: Option<usize>,
    frozen: Vec<usize>,
    couplings: BTreeMap<usize, (E, E)>,
    excluded: Vec<usize>,
}

impl<E: Element> FreezePlan<E> {
    /// A plan that freezes nothing.
    pub fn disabled(depth: usize) -> Self {
        Self {
            depth,
            interval: None,
            frozen: Vec::new(),
            couplings: BTreeMap::new(),
            excluded: Vec::new(),
        }
    }

    /// Freezes every `k`-th stage whose neighbours have identical freezable
    /// shapes. Incompatible candidates are dropped with a warning.
    pub fn for_architecture(arch: &Architecture, k: usize, init: (E, E)) -> Result<Self> {
        let depth = arch.depth();
        let mut plan = Self::disabled(depth);
        plan.interval = Some(k);
        for i in frozen_set(depth, k)? {
            let shapes = arch.stage(i).freezable_shapes();
            let ok = !shapes.is_empty()
                && arch.stage(i - 1).freezable_shapes() == shapes
                && arch.stage(i + 1).freezable_shapes() == shapes;
            if ok {
                plan.frozen.push(i);
                plan.couplings.insert(i, init);
            } else {
                log::warn!("stage {i} not frozen: stages {}..={} have different freezable shapes", i - 1, i + 1);
                plan.excluded.push(i);
            }
        }
        Ok(plan)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `k`, or `None` for a disabled plan.
    pub fn interval(&self) -> Option<usize> {
        self.interval
    }

    /// `𝓕`, ascending.
    pub fn frozen(&self) -> &[usize] {
        &self.frozen
    }

    /// Candidates dropped for shape incompatibility.
    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.couplings.contains_key(&i)
    }

    pub fn coupling(&self, i: usize) -> Option<(E, E)> {
        self.couplings.get(&i).copied()
    }

    pub fn couplings(&self) -> &BTreeMap<usize, (E, E)> {
        &self.couplings
    }

    pub fn set_coupling(&mut self, i: usize, a: E, b: E) -> Result<()> {
        match self.couplings.get_mut(&i) {
            Some(c) => {
                *c = (a, b);
                Ok(())
            }
            None => Err(Error::NotTrainable(format!("coupling of unfrozen stage {i}"))),
        }
    }
}

/// `a·prev + b·next` tensor by tensor. `index` names the frozen stage in errors.
pub fn compose_params<E: Element>(
    index: usize,
    a: E,
    b: E,
    prev: &[Tensor<E>],
    next: &[Tensor<E>],
) -> Result<Vec<Tensor<E>>> {
    if prev.len() != next.len() {
        return Err(Error::Compose {
            index,
            message: format!("neighbours hold {} and {} tensors", prev.len(), next.len()),
        });
    }
    prev.iter()
        .zip(next)
        .map(|(p, n)| {
            if p.shape() != n.shape() {
                return Err(Error::Compose {
                    index,
                    message: format!("neighbour shapes {:?} and {:?} differ", p.shape(), n.shape()),
                });
            }
            axpy(a, p, &n.scale(b))
        })
        .collect()
}

#[cfg(test)]
mod tests;
