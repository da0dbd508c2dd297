use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Gaussian clusters centred on the unit circle.
    Blobs,
    /// Interleaved spiral arms, one per class.
    Spirals,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Blobs => "blobs",
            SyntheticKind::Spirals => "spirals",
        })
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SyntheticKind::Blobs),
            "spirals" => Ok(SyntheticKind::Spirals),
            _ => Err(Error::Invalid(format!("unknown synthetic dataset {s:?}"))),
        }
    }
}

/// Turns each spiral arm makes from the centre outwards.
const SPIRAL_TURNS: f64 = 1.0;
/// Radius where each arm starts, keeping the arms apart at the centre.
const SPIRAL_INNER: f64 = 0.1;

/// Two-feature samples, labels assigned round-robin, then min-max scaled per
/// feature into `[0, 1]`.
pub fn make_synthetic(kind: SyntheticKind, n: usize, classes: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || n < classes {
        return Err(Error::Invalid(format!("need n >= classes >= 2, got n={n}, classes={classes}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Invalid(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let per_class = n.div_ceil(classes);
    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let j = i / classes;
        let phase = TAU * c as f64 / classes as f64;
        let (x, y) = match kind {
            SyntheticKind::Blobs => (phase.cos(), phase.sin()),
            SyntheticKind::Spirals => {
                let t = (j as f64 + 0.5) / per_class as f64;
                let angle = phase + TAU * SPIRAL_TURNS * t;
                let r = SPIRAL_INNER + (1.0 - SPIRAL_INNER) * t;
                (r * angle.cos(), r * angle.sin())
            }
        };
        points.push(x + noise * gauss());
        points.push(y + noise * gauss());
        labels.push(c);
    }
    for f in 0..2 {
        let col = points.iter().skip(f).step_by(2);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for v in points.iter_mut().skip(f).step_by(2) {
            *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
    let inputs = Tensor::from_parts(vec![n, 2], points);
    Dataset::new(inputs, labels, classes, Split::Train)
}
