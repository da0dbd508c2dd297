//! Parameter accounting, reduction bounds and cost units, plus representation
//! measurements (linear CKA and linear probes).
//!
//! In the counts, `Pᵢ` of a frozen stage is its replaceable (freezable)
//! parameter count. For dense and convolutional stages that is every
//! parameter; for attention blocks only the attention projections.

mod cka;
mod probe;

use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::replacement::frozen_set;
use crate::tensor::Element;

pub use cka::{cka_matrix, linear_cka, SimilarityMatrix};
pub use probe::{linear_probe, stage_features, ProbeConfig};

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub depth: usize,
    pub interval: Option<usize>,
    pub frozen: Vec<usize>,
    /// Every parameter of each stage.
    pub stage_params: Vec<usize>,
    /// Parameters a frozen stage would give up, per stage.
    pub replaceable_params: Vec<usize>,
    /// End-to-end trainable parameters, stem and head included.
    pub p: usize,
    /// `P − Σ_{i∈𝓕} Pᵢ + 2|𝓕|`.
    pub p_prime: usize,
    /// The same with a single `+2` for the whole network.
    pub p_prime_single_pair: usize,
    /// Trainable scalars enumerated from the live network.
    pub live_trainable: usize,
    pub p_min: usize,
    pub p_max: usize,
    /// `P − P′`.
    pub reduction: i64,
    pub bounds: Option<ReductionBounds>,
    pub complexity: Option<Complexity>,
}

impl AnalysisReport {
    pub fn live_matches(&self) -> bool {
        self.live_trainable == self.p_prime
    }
}

/// Counts for `net`, computed from the architecture and checked against the
/// live trainable set.
pub fn param_counts<E: Element>(net: &Network<E>) -> AnalysisReport {
    let arch = net.architecture();
    let stage_params = arch.stage_param_counts();
    let replaceable: Vec<usize> = arch.stages().iter().map(|s| s.freezable_count()).collect();
    let frozen = net.plan().frozen().to_vec();
    let p = arch.total_param_count();
    let removed: usize = frozen.iter().map(|&i| replaceable[i - 1]).sum();
    let p_prime = p - removed + 2 * frozen.len();
    let p_prime_single_pair = if frozen.is_empty() { p } else { p - removed + 2 };
    let p_min = replaceable.iter().copied().min().unwrap_or(0);
    let p_max = replaceable.iter().copied().max().unwrap_or(0);
    let interval = net.plan().interval();
    let bounds = interval.and_then(|k| reduction_bounds(arch.depth(), k, p_min, p_max).ok());
    let complexity = interval.and_then(|k| complexity_estimate(arch.depth(), k).ok());
    AnalysisReport {
        depth: arch.depth(),
        interval,
        frozen,
        stage_params,
        replaceable_params: replaceable,
        p,
        p_prime,
        p_prime_single_pair,
        live_trainable: net.trainable_scalar_count(),
        p_min,
        p_max,
        reduction: p as i64 - p_prime as i64,
        bounds,
        complexity,
    }
}

/// Bounds on `P − P′` over all networks of depth `L` whose stage sizes lie in
/// `[P_min, P_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionBounds {
    pub frozen_count: usize,
    /// `|𝓕|·P_min − 2|𝓕|` and `|𝓕|·P_max − 2|𝓕|`.
    pub exact: (i64, i64),
    /// `(L/k)·P_min − 2` and `(L/k)·P_max − 2`, the asymptotic form.
    pub asymptotic: (Rational, Rational),
}

pub fn reduction_bounds(depth: usize, k: usize, p_min: usize, p_max: usize) -> Result<ReductionBounds> {
    if depth == 0 || p_min == 0 || p_min > p_max {
        return Err(Error::Invalid(format!(
            "need L >= 1 and 0 < P_min <= P_max, got L={depth}, P_min={p_min}, P_max={p_max}"
        )));
    }
    let f = frozen_set(depth, k)?.len() as i64;
    let (lo, hi) = (p_min as i64, p_max as i64);
    let per = Rational::new(depth as i64, k as i64);
    let two = Rational::from_integer(2);
    Ok(ReductionBounds {
        frozen_count: f as usize,
        exact: (f * lo - 2 * f, f * hi - 2 * f),
        asymptotic: (per * lo - two, per * hi - two),
    })
}

/// Training cost in units of one stage forward, with backward counted as two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Complexity {
    /// `3L − 2(L−1)/k`.
    pub total: Rational,
    /// `2(L−1)/k`.
    pub reduction: Rational,
    /// Reduction at `k = 1`: `2L − 2`.
    pub bound_k1: Rational,
    /// Reduction at `k = L − 1`: `2`.
    pub bound_k_last: Rational,
}

/// `k = 1` is allowed here: it is an analytic limit, not a runnable plan.
pub fn complexity_estimate(depth: usize, k: usize) -> Result<Complexity> {
    if depth < 2 || k == 0 {
        return Err(Error::Invalid(format!("need L >= 2 and k >= 1, got L={depth}, k={k}")));
    }
    let l = depth as i64;
    let reduction = |k: i64| Rational::new(2 * (l - 1), k);
    Ok(Complexity {
        total: Rational::from_integer(3 * l) - reduction(k as i64),
        reduction: reduction(k as i64),
        bound_k1: reduction(1),
        bound_k_last: reduction(l - 1),
    })
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.interval.map_or("-".to_string(), |k| k.to_string());
        writeln!(f, "{:<28} {}", "depth L", self.depth)?;
        writeln!(f, "{:<28} {}", "interval k", k)?;
        writeln!(f, "{:<28} {:?}", "frozen stages", self.frozen)?;
        writeln!(f, "{:<28} {}", "P", self.p)?;
        writeln!(f, "{:<28} {}", "P' (+2 per frozen stage)", self.p_prime)?;
        writeln!(f, "{:<28} {}", "P' (+2 total)", self.p_prime_single_pair)?;
        writeln!(
            f,
            "{:<28} {} ({})",
            "live trainable scalars",
            self.live_trainable,
            if self.live_matches() { "matches P'" } else { "MISMATCH" }
        )?;
        writeln!(f, "{:<28} {}", "reduction P - P'", self.reduction)?;
        writeln!(f, "{:<28} {} / {}", "P_min / P_max", self.p_min, self.p_max)?;
        if let Some(b) = &self.bounds {
            writeln!(f, "{:<28} [{}, {}]", "reduction bounds (exact)", b.exact.0, b.exact.1)?;
            writeln!(
                f,
                "{:<28} [{}, {}]",
                "reduction bounds (L/k)", b.asymptotic.0, b.asymptotic.1
            )?;
        }
        if let Some(c) = &self.complexity {
            writeln!(f, "{:<28} {}", "cost units", c.total)?;
            writeln!(f, "{:<28} {}", "cost reduction units", c.reduction)?;
            writeln!(f, "{:<28} {} / {}", "reduction at k=1 / k=L-1", c.bound_k1, c.bound_k_last)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
