//! Central-difference gradient oracle. It only ever calls the forward pass, so
//! a disagreement always points at a backward rule.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::Objective;
use crate::network::{Block, Network, ParamRef, Quantity, Slot};
use crate::replacement::GradTape;
use crate::tensor::Tensor;
use crate::training::{backward, forward};

pub const EPS: f64 = 1e-5;
/// Tolerance for whole networks.
pub const NETWORK_TOL: f64 = 1e-4;
/// Tolerance for a single layer.
pub const LAYER_TOL: f64 = 1e-6;
pub const ERROR_FLOOR: f64 = 1e-8;
/// Networks with more trainable scalars than this are subsampled.
pub const EXHAUSTIVE_LIMIT: usize = 10_000;
pub const SAMPLES: usize = 512;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

/// `(f(x + ε) − f(x − ε)) / 2ε`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, eps: f64) -> f64 {
    (f(x + eps) - f(x - eps)) / (2.0 * eps)
}

pub fn loss(net: &Network<f64>, input: &Tensor<f64>, objective: &Objective<f64>) -> Result<f64> {
    let trace = forward(net, input)?;
    Ok(objective.evaluate(trace.output())?.0)
}

/// Numeric derivative of the loss with respect to one trainable scalar. The
/// network is restored bitwise afterwards.
pub fn finite_diff_loss(
    net: &mut Network<f64>,
    input: &Tensor<f64>,
    objective: &Objective<f64>,
    q: &Quantity,
    eps: f64,
) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    let original = net.quantity(q)?;
    let hash = net.param_hash();
    let mut failure = None;
    let d = central_difference(
        |v| {
            let r = net.set_quantity(q, v).and_then(|_| loss(net, input, objective));
            r.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        original,
        eps,
    );
    net.set_quantity(q, original)?;
    assert_eq!(net.param_hash(), hash, "finite difference did not restore {q}");
    match failure {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

/// Reads the analytic derivative for `q` off a tape.
pub fn tape_gradient(tape: &GradTape<f64>, q: &Quantity) -> Option<f64> {
    match q.param {
        ParamRef::Tensor {
            block: Block::Stage(i),
            slot: Slot::Freezable(j),
        } => tape.param_grads.get(&i)?.get(j).map(|t| t.get(q.element)),
        ParamRef::Tensor {
            block,
            slot: Slot::Fixed(j),
        } => tape.fixed_grads.get(&block)?.get(j).map(|t| t.get(q.element)),
        ParamRef::Tensor { .. } => None,
        ParamRef::CouplingA(i) => tape.scalar_grads.get(&i).map(|g| g.0),
        ParamRef::CouplingB(i) => tape.scalar_grads.get(&i).map(|g| g.1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityCheck {
    pub quantity: Quantity,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Sorted by descending relative error.
    pub records: Vec<QuantityCheck>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Trainable scalars in the network; more than `records.len()` when subsampled.
    pub total_quantities: usize,
}

/// Compares every trainable scalar's analytic gradient with central
/// differences. Above [`EXHAUSTIVE_LIMIT`] scalars, all coupling scalars plus
/// a seeded uniform sample of [`SAMPLES`] others are checked.
pub fn check_network(
    net: &mut Network<f64>,
    input: &Tensor<f64>,
    objective: &Objective<f64>,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut trace = forward(net, input)?;
    let (_, grad) = objective.evaluate(trace.output())?;
    let tape = backward(net, &mut trace, &grad)?;
    let all = net.quantities();
    let total = all.len();
    let chosen: Vec<Quantity> = if total <= EXHAUSTIVE_LIMIT {
        all
    } else {
        let (scalars, tensors): (Vec<Quantity>, Vec<Quantity>) =
            all.into_iter().partition(|q| !matches!(q.param, ParamRef::Tensor { .. }));
        let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
        let mut picked: Vec<usize> = sample(&mut rng, tensors.len(), SAMPLES.min(tensors.len())).into_vec();
        picked.sort_unstable();
        scalars.into_iter().chain(picked.into_iter().map(|i| tensors[i])).collect()
    };
    let mut records = Vec::with_capacity(chosen.len());
    for q in chosen {
        let analytic = tape_gradient(&tape, &q).ok_or_else(|| Error::TapeMismatch(format!("no gradient for {q}")))?;
        let numeric = finite_diff_loss(net, input, objective, &q, EPS)?;
        records.push(QuantityCheck {
            quantity: q,
            analytic,
            numeric,
            rel_err: relative_error(analytic, numeric),
        });
    }
    records.sort_by(|a, b| b.rel_err.total_cmp(&a.rel_err).then(a.quantity.cmp(&b.quantity)));
    let max_rel_err = records.first().map_or(0.0, |r| r.rel_err);
    Ok(CheckReport {
        passed: max_rel_err < tolerance,
        records,
        max_rel_err,
        tolerance,
        total_quantities: total,
    })
}

impl CheckReport {
    /// Writes the worst `limit` records as an aligned table.
    pub fn render(&self, limit: usize) -> String {
        let mut s = format!(
            "{} quantities checked of {}, max rel err {:.3e}, tolerance {:.0e}: {}\n",
            self.records.len(),
            self.total_quantities,
            self.max_rel_err,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        );
        s.push_str(&format!("{:<24} {:>14} {:>14} {:>10}\n", "quantity", "analytic", "numeric", "rel_err"));
        for r in self.records.iter().take(limit) {
            s.push_str(&format!(
                "{:<24} {:>14.6e} {:>14.6e} {:>10.2e}\n",
                r.quantity.to_string(),
                r.analytic,
                r.numeric,
                r.rel_err
            ));
        }
        s
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(10))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Layer;
    use crate::network::{Architecture, Stage};

    #[test]
    fn quadratic_and_constant() {
        assert!((central_difference(|q| q * q, 3.0, EPS) - 6.0).abs() < 1e-9);
        assert_eq!(central_difference(|_| 4.0, 1.0, EPS), 0.0);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 0.5), 0.5);
    }

    fn dense_stack(depth: usize, width: usize) -> Architecture {
        let stages = (0..depth)
            .map(|_| Stage::plain(vec![Layer::dense(width, width), Layer::relu()]))
            .collect();
        Architecture::new(&[width], width, vec![], stages, vec![Layer::dense(width, width)]).unwrap()
    }

    fn probe() -> (Tensor<f64>, Objective<f64>) {
        let x = Tensor::from_f64(&[3, 3], &[0.2, -0.5, 0.9, 1.1, 0.3, -0.7, -0.4, 0.8, 0.1]).unwrap();
        let w: Vec<f64> = (0..9).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.4 + 0.1).collect();
        (x, Objective::Linear(Tensor::from_f64(&[3, 3], &w).unwrap()))
    }

    #[test]
    fn dense_net_end_to_end() {
        let mut net = Network::end_to_end(dense_stack(4, 3), 21);
        net.jitter(1, 0.1);
        let (x, obj) = probe();
        let r = check_network(&mut net, &x, &obj, LAYER_TOL).unwrap();
        assert!(r.passed, "{r}");
        assert_eq!(r.records.len(), r.total_quantities);
    }

    #[test]
    fn dense_net_with_frozen_stage() {
        let mut net = Network::replacement(dense_stack(4, 3), 2, (0.6, 0.3), 21).unwrap();
        assert_eq!(net.plan().frozen(), &[2]);
        net.jitter(1, 0.1);
        let (x, obj) = probe();
        let r = check_network(&mut net, &x, &obj, NETWORK_TOL).unwrap();
        assert!(r.passed, "{r}");
        assert!(r.records.iter().any(|c| c.quantity.param == ParamRef::CouplingA(2)));
    }

    #[test]
    fn frozen_tensor_is_not_a_quantity() {
        let mut net = Network::replacement(dense_stack(3, 3), 2, (0.5, 0.5), 0).unwrap();
        let (x, obj) = probe();
        let q = Quantity {
            param: ParamRef::Tensor {
                block: Block::Stage(2),
                slot: Slot::Freezable(0),
            },
            element: 0,
        };
        assert!(matches!(finite_diff_loss(&mut net, &x, &obj, &q, EPS), Err(Error::NotTrainable(_))));
    }

    #[test]
    fn oracle_restores_network() {
        let mut net = Network::replacement(dense_stack(3, 3), 2, (0.5, 0.5), 0).unwrap();
        let before = net.clone();
        let (x, obj) = probe();
        for q in net.quantities() {
            finite_diff_loss(&mut net, &x, &obj, &q, EPS).unwrap();
        }
        assert_eq!(net, before);
    }
}
