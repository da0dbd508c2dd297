//! Metric CSVs and comparison tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::training::{RunRecord, RunSummary};

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,test_acc,lr,epoch_seconds,grad_writes";

/// Nine significant digits, fixed notation for moderate magnitudes and
/// scientific otherwise, trailing zeros trimmed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        trim(format!("{:.*}", (8 - exp).max(0) as usize, x))
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').expect("scientific");
        format!("{}e{e}", trim(mantissa.to_string()))
    }
}

pub fn metrics_csv(record: &RunRecord) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in &record.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.epoch,
            sig9(r.train_loss),
            sig9(r.train_acc),
            sig9(r.test_acc),
            sig9(r.lr),
            sig9(r.epoch_seconds),
            r.grad_writes
        );
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_metrics(record: &RunRecord, path: &Path) -> Result<()> {
    write_text(path, &metrics_csv(record))
}

pub fn summary_text(s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<22} {}", "mode", s.mode);
    let _ = writeln!(out, "{:<22} {:.4}", "final test acc", s.final_test_acc);
    let _ = writeln!(out, "{:<22} {:.4}", "best test acc", s.best_test_acc);
    let _ = writeln!(out, "{:<22} {:.4}", "final train acc", s.final_train_acc);
    let _ = writeln!(out, "{:<22} {}", "total params (P)", s.total_params);
    let _ = writeln!(out, "{:<22} {}", "trainable params", s.trainable_params);
    let _ = writeln!(out, "{:<22} {:?}", "frozen stages", s.frozen);
    let _ = writeln!(out, "{:<22} {}", "grad writes / step", s.grad_writes);
    let _ = writeln!(
        out,
        "{:<22} {}",
        "diverged",
        s.diverged.map_or("no".to_string(), |e| format!("at epoch {e}"))
    );
    out
}

/// Two runs side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: (String, String),
    /// `(metric, left, right)`.
    pub rows: Vec<(String, f64, f64)>,
}

impl Comparison {
    pub fn new(left: &RunRecord, right: &RunRecord) -> Self {
        let (l, r) = (left.summary.mode.to_string(), right.summary.mode.to_string());
        let labels = if l == r { (format!("{l}-a"), format!("{r}-b")) } else { (l, r) };
        let mean_time = |rec: &RunRecord| {
            rec.rows.iter().map(|r| r.epoch_seconds).sum::<f64>() / rec.rows.len().max(1) as f64
        };
        let pair = |name: &str, f: &dyn Fn(&RunRecord) -> f64| (name.to_string(), f(left), f(right));
        Self {
            labels,
            rows: vec![
                pair("final_test_acc", &|r| r.summary.final_test_acc),
                pair("best_test_acc", &|r| r.summary.best_test_acc),
                pair("final_train_acc", &|r| r.summary.final_train_acc),
                pair("trainable_params", &|r| r.summary.trainable_params as f64),
                pair("grad_writes_per_step", &|r| r.summary.grad_writes as f64),
                pair("epoch_seconds", &mean_time),
            ],
        }
    }

    pub fn get(&self, metric: &str) -> Option<(f64, f64)> {
        self.rows.iter().find(|r| r.0 == metric).map(|r| (r.1, r.2))
    }

    fn arrow(delta: f64) -> &'static str {
        if delta > 0.0 {
            "↑"
        } else if delta < 0.0 {
            "↓"
        } else {
            "="
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("metric,{},{},delta\n", self.labels.0, self.labels.1);
        for (name, a, b) in &self.rows {
            let _ = writeln!(s, "{name},{},{},{}", sig9(*a), sig9(*b), sig9(b - a));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<22} {:>14} {:>14} {:>16}\n", "metric", self.labels.0, self.labels.1, "delta");
        for (name, a, b) in &self.rows {
            let d = b - a;
            let _ = writeln!(s, "{name:<22} {:>14} {:>14} {:>14} {}", sig9(*a), sig9(*b), sig9(d.abs()), Self::arrow(d));
        }
        if let Some((a, b)) = self.get("final_test_acc") {
            let verdict = if b > a { "yes" } else { "no" };
            let _ = writeln!(s, "{} strictly above {} in final test accuracy: {verdict}", self.labels.1, self.labels.0);
        }
        s
    }
}
