//! Experiment runner: configs, subcommands and their output files.
//!
//! Every subcommand writes only inside the configured `output_dir`.

mod config;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{cka_matrix, linear_probe, param_counts, ProbeConfig};
use crate::data::{load_cifar10, load_idx, make_synthetic, Dataset, Split};
use crate::error::{Error, Result};
use crate::gradcheck::{check_network, NETWORK_TOL};
use crate::layers::Objective;
use crate::network::{parse_architecture, Mode, Network};
use crate::tensor::Element;
use crate::training::{train, RunRecord};

pub use config::{parse_config, parse_config_with, DatasetKind, DatasetSpec, Precision, RunConfig, SubsetRule};
pub use report::{metrics_csv, sig9, summary_text, write_metrics, Comparison, METRICS_HEADER};

/// Loads the train and test splits named by the config.
pub fn load_data(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    let (train_set, test_set) = match spec.kind {
        DatasetKind::Synthetic(kind) => make_synthetic(kind, spec.samples, spec.classes, spec.noise, spec.data_seed)?
            .train_test_split(spec.test_fraction, spec.data_seed),
        DatasetKind::Mnist => {
            let dir = spec.data_dir.as_deref().expect("validated");
            (
                load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
                load_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?.with_split(Split::Test),
            )
        }
        DatasetKind::Cifar10 => {
            let dir = spec.data_dir.as_deref().expect("validated");
            let batches: Vec<PathBuf> = (1..=5)
                .map(|i| dir.join(format!("data_batch_{i}.bin")))
                .filter(|p| p.exists())
                .collect();
            if batches.is_empty() {
                return Err(Error::format(dir, "no data_batch_N.bin files"));
            }
            (
                load_cifar10(&batches)?,
                load_cifar10(&[dir.join("test_batch.bin")])?.with_split(Split::Test),
            )
        }
    };
    let cut = |d: Dataset, n: Option<usize>| match (n, spec.subset) {
        (None, _) => d,
        (Some(n), SubsetRule::First) => d.first(n),
        (Some(n), SubsetRule::Balanced) => d.balanced(n, spec.data_seed),
    };
    Ok((cut(train_set, spec.train_subset), cut(test_set, spec.test_subset)))
}

/// The network a config describes, freshly initialised.
pub fn build_network<E: Element>(cfg: &RunConfig) -> Result<Network<E>> {
    let d = &cfg.dataset;
    let arch = parse_architecture(&cfg.arch, &d.kind.sample_shape(), d.classes())?;
    match cfg.mode {
        Mode::EndToEnd => Ok(Network::end_to_end(arch, cfg.seed)),
        Mode::Replacement => Network::replacement(arch, cfg.k, (E::of(cfg.a_init), E::of(cfg.b_init)), cfg.seed),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.join(name))
}

/// Trains per the config and returns the record with the trained network.
pub fn run_training<E: Element>(cfg: &RunConfig, train_set: &Dataset, test_set: &Dataset) -> Result<(RunRecord, Network<E>)> {
    let mut net = build_network::<E>(cfg)?;
    let rec = train(&mut net, train_set, test_set, &cfg.train_config())?;
    Ok((rec, net))
}

/// `train`: writes `metrics-<mode>.csv` and `summary-<mode>.txt`.
pub fn cmd_train(cfg: &RunConfig) -> Result<RunRecord> {
    let (train_set, test_set) = load_data(&cfg.dataset)?;
    let rec = match cfg.precision {
        Precision::F32 => run_training::<f32>(cfg, &train_set, &test_set)?.0,
        Precision::F64 => run_training::<f64>(cfg, &train_set, &test_set)?.0,
    };
    write_metrics(&rec, &out_path(cfg, &format!("metrics-{}.csv", cfg.mode))?)?;
    report::write_text(&out_path(cfg, &format!("summary-{}.txt", cfg.mode))?, &summary_text(&rec.summary))?;
    Ok(rec)
}

/// Mode, `k` and the output directory may differ; nothing else.
fn check_pair(a: &RunConfig, b: &RunConfig) -> Result<()> {
    let mut b2 = b.clone();
    b2.mode = a.mode;
    b2.k = a.k;
    b2.output_dir = a.output_dir.clone();
    if &b2 != a {
        let (ta, tb) = (a.to_text(), b2.to_text());
        let diff: Vec<&str> = ta.lines().zip(tb.lines()).filter(|(x, y)| x != y).map(|(x, _)| x).collect();
        return Err(Error::Invalid(format!("configs differ beyond mode/k: {}", diff.join("; "))));
    }
    Ok(())
}

/// `compare`: runs both configs on the same data and writes
/// `compare.csv`, `compare.txt` and both metric files into `a`'s output dir.
pub fn run_compare(a: &RunConfig, b: &RunConfig) -> Result<Comparison> {
    check_pair(a, b)?;
    let (train_set, test_set) = load_data(&a.dataset)?;
    let run = |c: &RunConfig| match c.precision {
        Precision::F32 => run_training::<f32>(c, &train_set, &test_set).map(|r| r.0),
        Precision::F64 => run_training::<f64>(c, &train_set, &test_set).map(|r| r.0),
    };
    let (ra, rb) = (run(a)?, run(b)?);
    let cmp = Comparison::new(&ra, &rb);
    write_metrics(&ra, &out_path(a, &format!("metrics-{}.csv", cmp.labels.0))?)?;
    write_metrics(&rb, &out_path(a, &format!("metrics-{}.csv", cmp.labels.1))?)?;
    report::write_text(&out_path(a, "compare.csv")?, &cmp.to_csv())?;
    report::write_text(&out_path(a, "compare.txt")?, &cmp.to_text())?;
    Ok(cmp)
}

/// `gradcheck`: 64-bit check of the config's network on the first `batch`
/// training samples; writes `gradcheck.txt`.
pub fn cmd_gradcheck(cfg: &RunConfig, batch: usize) -> Result<crate::gradcheck::CheckReport> {
    let (train_set, _) = load_data(&cfg.dataset)?;
    let idx: Vec<usize> = (0..batch.min(train_set.len()).max(1)).collect();
    let (x, y) = train_set.batch::<f64>(&idx);
    let mut net = build_network::<f64>(cfg)?;
    net.jitter(cfg.seed ^ 0x5eed, 0.05);
    let report = check_network(&mut net, &x, &Objective::SoftmaxXent(y), NETWORK_TOL)?;
    report::write_text(&out_path(cfg, "gradcheck.txt")?, &report.render(usize::MAX))?;
    Ok(report)
}

/// `analyze`: writes `analysis.txt`.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<String> {
    let net = build_network::<f64>(cfg)?;
    let text = param_counts(&net).to_string();
    report::write_text(&out_path(cfg, "analysis.txt")?, &text)?;
    Ok(text)
}

fn trained<E: Element>(cfg: &RunConfig, train_set: &Dataset, test_set: &Dataset, skip: bool) -> Result<Network<E>> {
    if skip {
        build_network(cfg)
    } else {
        Ok(run_training::<E>(cfg, train_set, test_set)?.1)
    }
}

/// `probe`: linear-probe accuracy at `h₀..h_L`; writes `probe.csv`.
pub fn cmd_probe(cfg: &RunConfig, untrained: bool) -> Result<Vec<f64>> {
    let (train_set, test_set) = load_data(&cfg.dataset)?;
    fn go<E: Element>(cfg: &RunConfig, tr: &Dataset, te: &Dataset, untrained: bool) -> Result<Vec<f64>> {
        let net = trained::<E>(cfg, tr, te, untrained)?;
        let pc = ProbeConfig {
            seed: cfg.seed,
            ..ProbeConfig::default()
        };
        (0..=net.depth()).map(|l| linear_probe(&net, tr, te, l, &pc)).collect()
    }
    let accs = match cfg.precision {
        Precision::F32 => go::<f32>(cfg, &train_set, &test_set, untrained)?,
        Precision::F64 => go::<f64>(cfg, &train_set, &test_set, untrained)?,
    };
    let mut csv = String::from("layer,accuracy\n");
    for (l, a) in accs.iter().enumerate() {
        csv.push_str(&format!("{l},{}\n", sig9(*a)));
    }
    report::write_text(&out_path(cfg, "probe.csv")?, &csv)?;
    Ok(accs)
}

/// `cka`: similarity of stage outputs on up to 256 test samples; writes
/// `cka.csv` and returns a text report naming each frozen stage's most
/// similar stage.
pub fn cmd_cka(cfg: &RunConfig, untrained: bool) -> Result<String> {
    let (train_set, test_set) = load_data(&cfg.dataset)?;
    let net = trained::<f64>(cfg, &train_set, &test_set, untrained)?;
    let idx: Vec<usize> = (0..test_set.len().min(256)).collect();
    let (x, _) = test_set.batch::<f64>(&idx);
    let m = cka_matrix(&net, &x)?;
    m.write_csv(&out_path(cfg, "cka.csv")?)?;
    let mut text = format!("{} stages, max asymmetry {:.3e}\n", m.len(), m.max_asymmetry());
    for &i in net.plan().frozen() {
        let best = m.most_similar(i);
        let neighbour = best.is_some_and(|j| j + 1 == i || j == i + 1);
        text.push_str(&format!(
            "frozen stage {i}: most similar stage {} ({})\n",
            best.map_or("-".to_string(), |j| j.to_string()),
            if neighbour { "a neighbour" } else { "not a neighbour" }
        ));
    }
    Ok(text)
}

/// `gen-data`: writes `train.csv` and `test.csv`.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<(usize, usize)> {
    let (train_set, test_set) = load_data(&cfg.dataset)?;
    train_set.write_csv(&out_path(cfg, "train.csv")?)?;
    test_set.write_csv(&out_path(cfg, "test.csv")?)?;
    Ok((train_set.len(), test_set.len()))
}

#[derive(Debug, Parser)]
#[command(name = "replearn", version, about = "Train layered networks end to end or with replacement learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run and write its metrics.
    Train(Common),
    /// Train a pair of runs and write a side-by-side table.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Second config; defaults to the first with the other mode.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Samples in the check batch.
        #[arg(long, default_value_t = 4)]
        batch: usize,
    },
    /// Print parameter counts, bounds and cost units.
    Analyze(Common),
    /// Linear-probe accuracy per stage.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Probe the freshly initialised network.
        #[arg(long)]
        untrained: bool,
    },
    /// Linear CKA between stage outputs.
    Cka {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        untrained: bool,
    },
    /// Write the configured dataset as CSV.
    GenData(Common),
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(e: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn runtime(e: impl ToString) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn load_config(c: &Common) -> std::result::Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| usage(format!("{}: {e}", c.config.display())))?;
    let overrides = c
        .overrides
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {s:?}")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    parse_config_with(&text, &overrides).map_err(|e| usage(format!("{}: {e}", c.config.display())))
}

fn other_mode(cfg: &RunConfig) -> RunConfig {
    let mut b = cfg.clone();
    b.mode = match cfg.mode {
        Mode::EndToEnd => Mode::Replacement,
        Mode::Replacement => Mode::EndToEnd,
    };
    b
}

/// Runs a parsed command and returns what it prints on success.
pub fn execute(cli: &Cli) -> std::result::Result<String, Failure> {
    match &cli.command {
        Command::Train(c) => {
            let cfg = load_config(c)?;
            let rec = cmd_train(&cfg).map_err(runtime)?;
            if let Some(e) = rec.summary.diverged {
                return Err(runtime(format!("training diverged at epoch {e}")));
            }
            Ok(summary_text(&rec.summary))
        }
        Command::Compare { common, against } => {
            let a = load_config(common)?;
            let b = match against {
                Some(path) => load_config(&Common {
                    config: path.clone(),
                    overrides: common.overrides.clone(),
                })?,
                None => other_mode(&a),
            };
            let (a, b) = if a.mode == Mode::Replacement && b.mode == Mode::EndToEnd { (b, a) } else { (a, b) };
            check_pair(&a, &b).map_err(usage)?;
            Ok(run_compare(&a, &b).map_err(runtime)?.to_text())
        }
        Command::Gradcheck { common, batch } => {
            let cfg = load_config(common)?;
            let report = cmd_gradcheck(&cfg, *batch).map_err(runtime)?;
            if report.passed {
                Ok(report.render(10))
            } else {
                Err(runtime(format!(
                    "gradient check failed: max rel err {:.3e} >= {:.0e} at {}",
                    report.max_rel_err, report.tolerance, report.records[0].quantity
                )))
            }
        }
        Command::Analyze(c) => cmd_analyze(&load_config(c)?).map_err(runtime),
        Command::Probe { common, untrained } => {
            let accs = cmd_probe(&load_config(common)?, *untrained).map_err(runtime)?;
            Ok(accs.iter().enumerate().map(|(l, a)| format!("layer {l:>2}: {a:.4}\n")).collect())
        }
        Command::Cka { common, untrained } => cmd_cka(&load_config(common)?, *untrained).map_err(runtime),
        Command::GenData(c) => {
            let cfg = load_config(c)?;
            let (n, m) = cmd_gen_data(&cfg).map_err(runtime)?;
            Ok(format!("wrote {n} train and {m} test samples to {}\n", cfg.output_dir.display()))
        }
    }
}

/// Parses `args` (program name first), runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let text = e.render().to_string();
            eprintln!("{}", text.lines().find(|l| !l.trim().is_empty()).unwrap_or("error"));
            return 1;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(f) => {
            eprintln!("error: {}", f.message.lines().next().unwrap_or(""));
            f.code
        }
    }
}

