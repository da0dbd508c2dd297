use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Constant,
    Cosine,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub initial_lr: f64,
    pub total_epochs: usize,
    pub kind: ScheduleKind,
}

impl Schedule {
    /// Learning rate for 0-based `epoch`; cosine reaches 0 at `total_epochs`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.initial_lr,
            ScheduleKind::Cosine => {
                if self.total_epochs == 0 {
                    return self.initial_lr;
                }
                let e = epoch.min(self.total_epochs) as f64;
                self.initial_lr * (1.0 + (PI * e / self.total_epochs as f64).cos()) / 2.0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_endpoints() {
        let s = Schedule {
            initial_lr: 0.01,
            total_epochs: 50,
            kind: ScheduleKind::Cosine,
        };
        assert_eq!(s.lr_at(0), 0.01);
        assert!(s.lr_at(50).abs() < 1e-12);
        assert!((s.lr_at(25) - 0.005).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cosine_stays_in_range(lr in 1e-6f64..1.0, total in 1usize..500, e in 0usize..600) {
            let s = Schedule { initial_lr: lr, total_epochs: total, kind: ScheduleKind::Cosine };
            let v = s.lr_at(e);
            prop_assert!((0.0..=lr).contains(&v));
            if e > 0 && e <= total {
                prop_assert!(v <= s.lr_at(e - 1));
            }
        }
    }
}
