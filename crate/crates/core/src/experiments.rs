//! End-to-end runs: `train`, `compare`, `speed`, `simulate` and `analyze`.
//!
//! Every command works inside an output directory. It first writes
//! `manifest.toml` with status `incomplete`, then its artifacts, then the
//! final manifest with status `complete`. On error the artifacts written so
//! far are deleted and the manifest is rewritten with status `failed` and the
//! error message.
//!
//! The argument structs double as the `qtnn` binary's flag definitions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activations::{ActivationMode, ActivationSpec};
use crate::data::{Dataset, TrainingSchedule, FASHION_MNIST_CATEGORIES};
use crate::error::{Error, Result};
use crate::export::{write_density_pgm, write_matrix_csv, write_pgm16};
use crate::network::{self, CategoryReport, Control, Network, NetworkConfig};
use crate::schrodinger::{self, BarrierGeometry, GridSpec, PacketSpec, SimulationRun, Splitting};
use crate::stats::{self, Distribution, HistogramGrid};

const CATEGORIES: usize = FASHION_MNIST_CATEGORIES.len();
const MANIFEST: &str = "manifest.toml";

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Incomplete,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub iterations: u64,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<PathBuf>,
    pub conventions: BTreeMap<String, String>,
    /// Every option of the command with defaults filled in.
    pub config: toml::Table,
    pub datasets: Vec<FileDigest>,
    pub results: toml::Table,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    toml::Table::try_from(value).map_err(|e| Error::Manifest(e.to_string()))
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    fn start<C: Serialize>(
        dir: &Path,
        command: &str,
        command_line: &[String],
        config: &C,
        seed: Option<u64>,
    ) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let run = Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                command_line: command_line.to_vec(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                status: RunStatus::Incomplete,
                error: None,
                seed,
                iterations: 0,
                wall_clock_seconds: 0.0,
                artifacts: Vec::new(),
                conventions: BTreeMap::new(),
                config: to_table(config)?,
                datasets: Vec::new(),
                results: toml::Table::new(),
            },
            started: Instant::now(),
        };
        run.write_manifest()?;
        Ok(run)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = toml::to_string(&self.manifest).map_err(|e| Error::Manifest(e.to_string()))?;
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    fn convention(&mut self, key: &str, value: &str) {
        self.manifest.conventions.insert(key.into(), value.into());
    }

    fn dataset(&mut self, role: &str, path: &Path) -> Result<()> {
        let (bytes, sha256) = sha256_file(path)?;
        self.manifest.datasets.push(FileDigest {
            role: role.into(),
            path: path.to_path_buf(),
            bytes,
            sha256,
        });
        Ok(())
    }

    /// Registers an artifact and returns its path.
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.manifest.artifacts.push(PathBuf::from(name));
        self.dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.artifact(name);
        File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
    }

    fn finish(mut self, iterations: u64, results: toml::Table) -> Result<RunManifest> {
        self.manifest.status = RunStatus::Complete;
        self.manifest.iterations = iterations;
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        self.manifest.results = results;
        self.write_manifest()?;
        Ok(self.manifest)
    }

    fn fail(mut self, err: &Error) {
        for a in &self.manifest.artifacts {
            let _ = std::fs::remove_file(self.dir.join(a));
        }
        self.manifest.artifacts.clear();
        self.manifest.status = RunStatus::Failed;
        self.manifest.error = Some(err.to_string());
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let _ = self.write_manifest();
    }
}

/// Runs `body` inside `run`, finishing or failing the manifest accordingly.
fn execute<T>(mut run: Run, body: impl FnOnce(&mut Run) -> Result<(u64, toml::Table, T)>) -> Result<(T, RunManifest)> {
    match body(&mut run) {
        Ok((iterations, results, value)) => Ok((value, run.finish(iterations, results)?)),
        Err(e) => {
            run.fail(&e);
            Err(e)
        }
    }
}

fn category_name(c: usize, m: usize) -> String {
    if m == CATEGORIES {
        FASHION_MNIST_CATEGORIES[c].to_string()
    } else {
        c.to_string()
    }
}

// ---------------------------------------------------------------------------
// shared flags

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Qt,
    Classical,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct TrainDataArgs {
    #[arg(long, default_value = "data/fashion/train-images-idx3-ubyte.gz")]
    pub train_images: PathBuf,
    #[arg(long, default_value = "data/fashion/train-labels-idx1-ubyte.gz")]
    pub train_labels: PathBuf,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct TestDataArgs {
    #[arg(long, default_value = "data/fashion/t10k-images-idx3-ubyte.gz")]
    pub test_images: PathBuf,
    #[arg(long, default_value = "data/fashion/t10k-labels-idx1-ubyte.gz")]
    pub test_labels: PathBuf,
}

impl TrainDataArgs {
    fn load(&self, run: &mut Run) -> Result<Dataset> {
        run.dataset("train-images", &self.train_images)?;
        run.dataset("train-labels", &self.train_labels)?;
        Dataset::load(&self.train_images, &self.train_labels, CATEGORIES)
    }
}

impl TestDataArgs {
    fn load(&self, run: &mut Run) -> Result<Dataset> {
        run.dataset("test-images", &self.test_images)?;
        run.dataset("test-labels", &self.test_labels)?;
        Dataset::load(&self.test_images, &self.test_labels, CATEGORIES)
    }
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 800)]
    pub hidden_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub barrier_height: f64,
    #[arg(long, default_value_t = 1.0)]
    pub barrier_thickness: f64,
    #[arg(long, default_value_t = 1.0)]
    pub energy_gain: f64,
    #[arg(long, value_enum, default_value_t = ActivationMode::Deterministic)]
    pub mode: ActivationMode,
}

impl Default for ModelArgs {
    fn default() -> Self {
        let spec = ActivationSpec::default();
        let cfg = NetworkConfig::default();
        Self {
            seed: cfg.seed,
            hidden_size: cfg.hidden_size,
            learning_rate: cfg.learning_rate,
            barrier_height: spec.barrier_height,
            barrier_thickness: spec.barrier_thickness,
            energy_gain: spec.energy_gain,
            mode: spec.mode,
        }
    }
}

impl ModelArgs {
    pub fn activation(&self, model: ModelKind) -> ActivationSpec {
        let qt = ActivationSpec::qt(self.barrier_height, self.barrier_thickness, self.energy_gain).with_mode(self.mode);
        match model {
            ModelKind::Qt => qt,
            ModelKind::Classical => ActivationSpec {
                kind: crate::ActivationKind::Relu,
                ..qt
            },
        }
    }

    /// Configuration of `model`; the initial weights depend only on the seed
    /// and layer sizes, so both models built from one `ModelArgs` start from
    /// identical weights.
    pub fn config(&self, model: ModelKind, input_size: usize, learning_rate: f64) -> NetworkConfig {
        NetworkConfig {
            input_size,
            hidden_size: self.hidden_size,
            output_size: CATEGORIES,
            learning_rate,
            seed: self.seed,
            activation: self.activation(model),
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1)]
    pub images_per_category: usize,
    #[arg(long, default_value_t = 100)]
    pub history_stride: usize,
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
}

impl Default for ScheduleArgs {
    fn default() -> Self {
        let s = TrainingSchedule::default();
        Self {
            batches: s.n_batches,
            epochs: s.epochs_per_batch,
            images_per_category: s.images_per_category_per_batch,
            history_stride: s.history_stride,
            bins: HistogramGrid::default().bins,
        }
    }
}

impl ScheduleArgs {
    pub fn schedule(&self) -> TrainingSchedule {
        TrainingSchedule {
            n_batches: self.batches,
            epochs_per_batch: self.epochs,
            images_per_category_per_batch: self.images_per_category,
            history_stride: self.history_stride,
        }
    }

    pub fn grid(&self) -> Result<HistogramGrid> {
        HistogramGrid::new(self.bins, -1.0, 1.0)
    }
}

fn write_checkpoint_file(run: &mut Run, name: &str, net: &Network) -> Result<()> {
    let w = run.create(name)?;
    network::write_checkpoint(net, w)
}

pub fn read_checkpoint_file(path: &Path) -> Result<Network> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    network::read_checkpoint(std::io::BufReader::new(f))
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Clone, Serialize, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[command(flatten)]
    pub data: TrainDataArgs,
    #[command(flatten)]
    pub net: ModelArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub outcome: network::TrainingOutcome,
    pub initial: Network,
    pub manifest: RunManifest,
}

/// Trains one model. Artifacts: `initial.ckpt` (the seed's shared starting
/// point), `model.ckpt`, `w1_history.csv`, `w2_history.csv`, `loss.csv`.
pub fn cmd_train(args: &TrainArgs, command_line: &[String]) -> Result<TrainSummary> {
    let run = Run::start(&args.out, "train", command_line, args, Some(args.net.seed))?;
    let ((outcome, initial), manifest) = execute(run, |run| {
        let data = args.data.load(run)?;
        let cfg = args.net.config(args.model, data.input_size(), args.net.learning_rate);
        let initial = Network::init(cfg)?;
        write_checkpoint_file(run, "initial.ckpt", &initial)?;

        let schedule = args.schedule.schedule();
        let outcome = network::train_observed(initial.clone(), &data, &schedule, args.schedule.grid()?, |_, _| {
            Ok(Control::Continue)
        })?;

        write_checkpoint_file(run, "model.ckpt", &outcome.network)?;
        outcome.w1_history.write_csv(run.create("w1_history.csv")?)?;
        outcome.w2_history.write_csv(run.create("w2_history.csv")?)?;
        let mut loss = csv::Writer::from_writer(run.create("loss.csv")?);
        loss.write_record(["iteration", "loss"])?;
        for (i, l) in outcome.loss_trace.iter().enumerate() {
            loss.write_record([(i + 1).to_string(), l.to_string()])?;
        }
        loss.flush().map_err(|e| Error::io("loss.csv", e))?;

        let w1 = (outcome.w1_history.first(), outcome.w1_history.last());
        let mut results = toml::Table::new();
        if let (Some(h0), Some(h1)) = w1 {
            results.insert(
                "w1_jsd_initial_vs_trained".into(),
                stats::histogram_divergence(h0, h1)?.into(),
            );
        }
        if let Some(tail) = outcome.loss_trace.len().checked_sub(10) {
            let mean = outcome.loss_trace[tail..].iter().sum::<f64>() / 10.0;
            results.insert("mean_loss_last_10".into(), mean.into());
        }
        Ok((outcome.iterations as u64, results, (outcome, initial)))
    })?;
    Ok(TrainSummary {
        outcome,
        initial,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// compare

#[derive(Debug, Clone, Serialize, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub qt: PathBuf,
    #[arg(long)]
    pub classical: PathBuf,
    #[command(flatten)]
    pub data: TestDataArgs,
    #[arg(long, default_value_t = 50)]
    pub per_category: usize,
    #[arg(long, default_value_t = 0)]
    pub selection_seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub log_base: f64,
    #[arg(long, default_value = "runs/compare")]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CompareSummary {
    pub qt: CategoryReport,
    pub classical: CategoryReport,
    pub jsd: Vec<f64>,
    pub entropy_qt: Vec<f64>,
    pub entropy_classical: Vec<f64>,
    pub manifest: RunManifest,
}

/// Evaluates two checkpoints on the same seeded test images. Artifacts:
/// `distributions.csv` (each model's mean output per true category) and
/// `report.csv` (`category,metric,value`).
pub fn cmd_compare(args: &CompareArgs, command_line: &[String]) -> Result<CompareSummary> {
    let run = Run::start(&args.out, "compare", command_line, args, Some(args.selection_seed))?;
    let (summary, manifest) = execute(run, |run| {
        run.convention("log_base", &args.log_base.to_string());
        let qt = read_checkpoint_file(&args.qt)?;
        let classical = read_checkpoint_file(&args.classical)?;
        let (a, b) = (qt.config(), classical.config());
        if (a.input_size, a.hidden_size, a.output_size) != (b.input_size, b.hidden_size, b.output_size) {
            return Err(Error::InvalidParameter(format!(
                "architecture mismatch: {}-{}-{} vs {}-{}-{}",
                a.input_size, a.hidden_size, a.output_size, b.input_size, b.hidden_size, b.output_size
            )));
        }
        let test = args.data.load(run)?;
        let selected = network::select_test_images(&test, args.per_category, args.selection_seed)?;
        let rq = network::evaluate_selection(&qt, &test, selected.clone())?;
        let rc = network::evaluate_selection(&classical, &test, selected)?;
        let m = rq.rows.len();

        let mut jsd = Vec::with_capacity(m);
        let mut se_q = Vec::with_capacity(m);
        let mut se_c = Vec::with_capacity(m);
        for (p, q) in rq.rows.iter().zip(&rc.rows) {
            jsd.push(stats::jsd(p, q, args.log_base)?);
            se_q.push(stats::shannon_entropy(p, args.log_base)?);
            se_c.push(stats::shannon_entropy(q, args.log_base)?);
        }

        let mut dist = csv::Writer::from_writer(run.create("distributions.csv")?);
        let mut header = vec!["model".to_string(), "category".to_string()];
        header.extend((0..m).map(|c| category_name(c, m)));
        dist.write_record(&header)?;
        for (model, report) in [("qt", &rq), ("classical", &rc)] {
            for (c, row) in report.rows.iter().enumerate() {
                let mut rec = vec![model.to_string(), category_name(c, m)];
                rec.extend(row.iter().map(f64::to_string));
                dist.write_record(&rec)?;
            }
        }
        dist.flush().map_err(|e| Error::io("distributions.csv", e))?;

        let mut report = csv::Writer::from_writer(run.create("report.csv")?);
        report.write_record(["category", "metric", "value"])?;
        for c in 0..m {
            let name = category_name(c, m);
            for (metric, v) in [
                ("jsd", jsd[c]),
                ("entropy_qt", se_q[c]),
                ("entropy_classical", se_c[c]),
                ("accuracy_qt", rq.category_accuracy[c]),
                ("accuracy_classical", rc.category_accuracy[c]),
            ] {
                report.write_record([name.as_str(), metric, &v.to_string()])?;
            }
        }
        report.write_record(["all", "accuracy_qt", &rq.accuracy.to_string()])?;
        report.write_record(["all", "accuracy_classical", &rc.accuracy.to_string()])?;
        report.flush().map_err(|e| Error::io("report.csv", e))?;

        let mut results = toml::Table::new();
        results.insert("accuracy_qt".into(), rq.accuracy.into());
        results.insert("accuracy_classical".into(), rc.accuracy.into());
        results.insert("mean_jsd".into(), (jsd.iter().sum::<f64>() / m as f64).into());
        let evaluated = (args.per_category * m) as u64;
        Ok((evaluated, results, (rq, rc, jsd, se_q, se_c)))
    })?;
    let (qt, classical, jsd, entropy_qt, entropy_classical) = summary;
    Ok(CompareSummary {
        qt,
        classical,
        jsd,
        entropy_qt,
        entropy_classical,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// speed

#[derive(Debug, Clone, Serialize, Args)]
pub struct SpeedArgs {
    #[command(flatten)]
    pub train: TrainDataArgs,
    #[command(flatten)]
    pub test: TestDataArgs,
    #[command(flatten)]
    pub net: ModelArgs,
    /// Learning rate of the tunnelling model (default: --learning-rate).
    #[arg(long)]
    pub qt_learning_rate: Option<f64>,
    /// Learning rate of the ReLU model (default: --learning-rate).
    #[arg(long)]
    pub classical_learning_rate: Option<f64>,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Held-out accuracy to reach, in [0, 1].
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Evaluate the held-out accuracy every this many iterations.
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    #[arg(long, default_value = "runs/speed")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedCurve {
    pub model: ModelKind,
    pub learning_rate: f64,
    /// `(iteration, held-out accuracy)` at every evaluation.
    pub points: Vec<(usize, f64)>,
    /// First evaluated iteration with accuracy at or above the threshold.
    pub reached_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SpeedSummary {
    pub qt: SpeedCurve,
    pub classical: SpeedCurve,
    /// Classical iterations over QT iterations; `None` unless both reached.
    pub ratio: Option<f64>,
    pub manifest: RunManifest,
}

/// `classical / qt`, with `0/0 = 1`.
pub fn speed_ratio(qt: Option<usize>, classical: Option<usize>) -> Option<f64> {
    match (qt?, classical?) {
        (0, 0) => Some(1.0),
        (q, c) => Some(c as f64 / q as f64),
    }
}

/// Trains both models from one initialization until each reaches the
/// held-out accuracy threshold or the schedule ends. Artifacts: `speed.csv`
/// and `curve.csv`.
pub fn cmd_speed(args: &SpeedArgs, command_line: &[String]) -> Result<SpeedSummary> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1], got {}",
            args.threshold
        )));
    }
    if args.eval_every == 0 {
        return Err(Error::InvalidParameter("eval_every must be positive".into()));
    }
    let run = Run::start(&args.out, "speed", command_line, args, Some(args.net.seed))?;
    let ((qt, classical), manifest) = execute(run, |run| {
        let train = args.train.load(run)?;
        let test = args.test.load(run)?;
        let schedule = args.schedule.schedule();
        let total = schedule.total_iterations(CATEGORIES);
        let initial = Network::init(
            args.net
                .config(ModelKind::Qt, train.input_size(), args.net.learning_rate),
        )?;

        let mut curves = Vec::new();
        let mut iterations = 0u64;
        for (model, lr) in [
            (ModelKind::Qt, args.qt_learning_rate.unwrap_or(args.net.learning_rate)),
            (
                ModelKind::Classical,
                args.classical_learning_rate.unwrap_or(args.net.learning_rate),
            ),
        ] {
            let net = initial
                .clone()
                .with_activation(args.net.activation(model))?
                .with_learning_rate(lr)?;
            let mut curve = SpeedCurve {
                model,
                learning_rate: lr,
                points: Vec::new(),
                reached_at: None,
            };
            let outcome = network::train_observed(net, &train, &schedule, args.schedule.grid()?, |it, net| {
                if it % args.eval_every != 0 && it != total {
                    return Ok(Control::Continue);
                }
                let acc = network::accuracy(net, &test)?;
                curve.points.push((it, acc));
                if acc >= args.threshold {
                    curve.reached_at = Some(it);
                    return Ok(Control::Stop);
                }
                Ok(Control::Continue)
            })?;
            iterations += outcome.iterations as u64;
            curves.push(curve);
        }
        let classical = curves.pop().expect("two curves");
        let qt = curves.pop().expect("two curves");

        let mut speed = csv::Writer::from_writer(run.create("speed.csv")?);
        speed.write_record(["model", "learning_rate", "iterations_to_threshold", "accuracy"])?;
        let mut curve_csv = csv::Writer::from_writer(run.create("curve.csv")?);
        curve_csv.write_record(["model", "iteration", "accuracy"])?;
        for c in [&qt, &classical] {
            let name = if c.model == ModelKind::Qt { "qt" } else { "classical" };
            let last = c.points.last().map_or(f64::NAN, |p| p.1);
            let reached = c.reached_at.map_or("not reached".to_string(), |i| i.to_string());
            speed.write_record([name, &c.learning_rate.to_string(), &reached, &last.to_string()])?;
            for (it, acc) in &c.points {
                curve_csv.write_record([name, &it.to_string(), &acc.to_string()])?;
            }
        }
        speed.flush().map_err(|e| Error::io("speed.csv", e))?;
        curve_csv.flush().map_err(|e| Error::io("curve.csv", e))?;

        let mut results = toml::Table::new();
        results.insert("threshold".into(), args.threshold.into());
        for (key, c) in [("qt_iterations", &qt), ("classical_iterations", &classical)] {
            let value = c
                .reached_at
                .map_or(toml::Value::from("not reached"), |i| toml::Value::from(i as i64));
            results.insert(key.into(), value);
        }
        if let Some(r) = speed_ratio(qt.reached_at, classical.reached_at) {
            results.insert("ratio".into(), r.into());
        }
        Ok((iterations, results, (qt, classical)))
    })?;
    let ratio = speed_ratio(qt.reached_at, classical.reached_at);
    Ok(SpeedSummary {
        qt,
        classical,
        ratio,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierArg {
    None,
    Rect,
    DoubleSlit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Pgm,
    Csv,
    Both,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 256)]
    pub nx: usize,
    #[arg(long, default_value_t = 256)]
    pub ny: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dx: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dy: f64,
    #[arg(long, default_value_t = 0.005)]
    pub dt: f64,
    /// Time steps (default 1000, or 400 for the double slit).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of evenly spaced density snapshots, first and last included.
    #[arg(long, default_value_t = 4)]
    pub snapshots: usize,
    #[arg(long, value_enum, default_value_t = BarrierArg::Rect)]
    pub barrier: BarrierArg,
    /// Barrier height (default 2, or 100 for the double slit).
    #[arg(long)]
    pub v0: Option<f64>,
    /// Barrier thickness along x (default 1, or 0.5 for the double slit).
    #[arg(long)]
    pub thickness: Option<f64>,
    /// Left face of the barrier (default: middle of the box).
    #[arg(long)]
    pub barrier_x: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub slit_width: f64,
    /// Center-to-center slit distance.
    #[arg(long, default_value_t = 3.0)]
    pub slit_separation: f64,
    /// Default: middle of the box.
    #[arg(long)]
    pub slit_center: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Packet center x (default: a quarter of the box).
    #[arg(long)]
    pub x0: Option<f64>,
    /// Packet center y (default: middle of the box).
    #[arg(long)]
    pub y0: Option<f64>,
    /// Packet wavenumber along x (default 1.5, or 4 for the double slit).
    #[arg(long)]
    pub kx: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub ky: f64,
    #[arg(long, value_enum, default_value_t = SplittingArg::Strang)]
    pub splitting: SplittingArg,
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    pub format: ImageFormat,
    #[arg(long, default_value = "runs/simulate")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingArg {
    Strang,
    PeacemanRachford,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        use clap::Parser;
        #[derive(Parser)]
        struct Wrap {
            #[command(flatten)]
            args: SimulateArgs,
        }
        Wrap::parse_from(["simulate"]).args
    }
}

impl SimulateArgs {
    fn double_slit(&self) -> bool {
        self.barrier == BarrierArg::DoubleSlit
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(if self.double_slit() { 400 } else { 1000 })
    }

    pub fn grid(&self) -> GridSpec {
        let steps = self.steps();
        let stride = if self.snapshots <= 1 {
            steps.max(1)
        } else {
            steps.div_ceil(self.snapshots - 1).max(1)
        };
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
            dt: self.dt,
            n_steps: steps,
            snapshot_stride: stride,
        }
    }

    pub fn barrier(&self) -> BarrierGeometry {
        let grid = self.grid();
        let slit = self.double_slit();
        let v0 = self.v0.unwrap_or(if slit { 100.0 } else { 2.0 });
        let thickness = self.thickness.unwrap_or(if slit { 0.5 } else { 1.0 });
        let x0 = self.barrier_x.unwrap_or(grid.x_len() / 2.0);
        match self.barrier {
            BarrierArg::None => BarrierGeometry::none(x0, x0 + thickness),
            BarrierArg::Rect => BarrierGeometry::rectangular(v0, x0, x0 + thickness),
            BarrierArg::DoubleSlit => BarrierGeometry::double_slit(
                v0,
                x0,
                x0 + thickness,
                self.slit_width,
                self.slit_separation,
                self.slit_center.unwrap_or(grid.y_len() / 2.0),
            ),
        }
    }

    pub fn packet(&self) -> PacketSpec {
        let grid = self.grid();
        PacketSpec {
            center: (
                self.x0.unwrap_or(grid.x_len() / 4.0),
                self.y0.unwrap_or(grid.y_len() / 2.0),
            ),
            width: self.sigma,
            momentum: (self.kx.unwrap_or(if self.double_slit() { 4.0 } else { 1.5 }), self.ky),
        }
    }

    pub fn splitting(&self) -> Splitting {
        match self.splitting {
            SplittingArg::Strang => Splitting::Strang,
            SplittingArg::PeacemanRachford => Splitting::PeacemanRachford,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub run: SimulationRun,
    /// Density value mapped to full white in every PGM.
    pub pgm_scale: f64,
    pub manifest: RunManifest,
}

/// Runs the wave-packet simulation. Artifacts: one density image per snapshot
/// (`snapshot_<step>.pgm` and/or `.csv`, `x` to the right and `y` up in the
/// PGM) and `regions.csv`.
pub fn cmd_simulate(args: &SimulateArgs, command_line: &[String]) -> Result<SimulateSummary> {
    let run = Run::start(&args.out, "simulate", command_line, args, None)?;
    let ((sim, scale), manifest) = execute(run, |run| {
        run.convention("hbar", "1");
        run.convention("mass", "2m = 1");
        run.convention("equation", "i dpsi/dt = -laplacian(psi) + V psi");
        run.convention("boundary", "hard wall, psi = 0 on the outer ring");
        run.convention("splitting", &format!("{:?}", args.splitting()));
        run.convention("pgm", "16-bit, density / pgm_scale, x right, y up");

        let grid = args.grid();
        let barrier = args.barrier();
        run.manifest
            .config
            .insert("resolved_grid".into(), to_table(&grid)?.into());
        run.manifest
            .config
            .insert("resolved_barrier".into(), to_table(&barrier)?.into());
        run.manifest
            .config
            .insert("resolved_packet".into(), to_table(&args.packet())?.into());
        let sim = schrodinger::run_simulation_with(&grid, &barrier, &args.packet(), args.splitting(), true)?;
        let scale = sim.max_density();

        for s in &sim.snapshots {
            let density = s.density.as_ref().expect("densities kept");
            if matches!(args.format, ImageFormat::Pgm | ImageFormat::Both) {
                write_density_pgm(density, scale, run.create(&format!("snapshot_{:06}.pgm", s.step))?)?;
            }
            if matches!(args.format, ImageFormat::Csv | ImageFormat::Both) {
                write_matrix_csv(density, run.create(&format!("snapshot_{:06}.csv", s.step))?)?;
            }
        }
        let mut regions = csv::Writer::from_writer(run.create("regions.csv")?);
        regions.write_record(["step", "time", "norm", "reflected", "barrier", "transmitted"])?;
        for s in &sim.snapshots {
            regions.write_record([
                s.step.to_string(),
                s.time.to_string(),
                s.norm.to_string(),
                s.regions.reflected.to_string(),
                s.regions.barrier.to_string(),
                s.regions.transmitted.to_string(),
            ])?;
        }
        regions.flush().map_err(|e| Error::io("regions.csv", e))?;

        #[derive(Serialize)]
        struct SnapshotRecord {
            step: usize,
            time: f64,
            norm: f64,
            reflected: f64,
            barrier: f64,
            transmitted: f64,
        }
        #[derive(Serialize)]
        struct Results {
            pgm_scale: f64,
            barrier_cells: (usize, usize),
            resolved_thickness: f64,
            packet_mean_energy: f64,
            packet_mean_x_energy: f64,
            snapshots: Vec<SnapshotRecord>,
        }
        let results = Results {
            pgm_scale: scale,
            barrier_cells: barrier.cell_range(&grid),
            resolved_thickness: barrier.resolved_thickness(&grid),
            packet_mean_energy: sim.packet.mean_energy(),
            packet_mean_x_energy: sim.packet.mean_x_energy(),
            snapshots: sim
                .snapshots
                .iter()
                .map(|s| SnapshotRecord {
                    step: s.step,
                    time: s.time,
                    norm: s.norm,
                    reflected: s.regions.reflected,
                    barrier: s.regions.barrier,
                    transmitted: s.regions.transmitted,
                })
                .collect(),
        };
        Ok((grid.n_steps as u64, to_table(&results)?, (sim, scale)))
    })?;
    Ok(SimulateSummary {
        run: sim,
        pgm_scale: scale,
        manifest,
    })
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Serialize, Args)]
pub struct AnalyzeArgs {
    /// Checkpoint to analyze.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Checkpoint to compare against, typically the run's `initial.ckpt`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// A `w1_history.csv`/`w2_history.csv` to turn into a divergence series.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
    #[arg(long, default_value_t = 2.0)]
    pub log_base: f64,
    #[arg(long, value_enum, default_value_t = ImageFormat::Both)]
    pub format: ImageFormat,
    #[arg(long, default_value = "runs/analyze")]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    /// JSD between the checkpoint's and the reference's W1 and W2 histograms.
    pub jsd: Option<(f64, f64)>,
    /// `(iteration, JSD against the first row)` from the history file.
    pub history_divergence: Vec<(usize, f64)>,
    pub manifest: RunManifest,
}

/// Reads a weight-history CSV back into `(iteration, counts)` rows.
pub fn read_history_csv(path: &Path) -> Result<Vec<(usize, Vec<u64>)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
        };
        let mut fields = rec.iter();
        let it = parse(fields.next().unwrap_or_default())? as usize;
        let counts = fields.map(parse).collect::<Result<Vec<_>>>()?;
        rows.push((it, counts));
    }
    Ok(rows)
}

/// Spectra, histograms and divergences of a checkpoint's weights. Artifacts:
/// `histogram.csv`, `spectrum_w1`/`spectrum_w2` (CSV holds `|F|`, the PGM
/// shows `ln(1 + |F|)` scaled to its maximum), and optionally
/// `divergence.csv` and `history_divergence.csv`.
pub fn cmd_analyze(args: &AnalyzeArgs, command_line: &[String]) -> Result<AnalyzeSummary> {
    let run = Run::start(&args.out, "analyze", command_line, args, None)?;
    let ((jsd, history_divergence), manifest) = execute(run, |run| {
        run.convention("log_base", &args.log_base.to_string());
        run.convention("spectrum", "|2D DFT|, zero frequency at (rows/2, cols/2)");
        let net = read_checkpoint_file(&args.checkpoint)?;
        let grid = HistogramGrid::new(args.bins, -1.0, 1.0)?;
        let reference = args.reference.as_deref().map(read_checkpoint_file).transpose()?;

        let hist = |w: &Array2<f64>| grid.counts(w.iter());
        let (h1, h2) = (hist(net.w1()), hist(net.w2()));
        let refs = reference.as_ref().map(|r| (hist(r.w1()), hist(r.w2())));
        let mut out = csv::Writer::from_writer(run.create("histogram.csv")?);
        let mut header = vec!["bin_lo", "bin_hi", "w1", "w2"];
        if refs.is_some() {
            header.extend(["reference_w1", "reference_w2"]);
        }
        out.write_record(&header)?;
        let edges = grid.edges();
        for b in 0..grid.bins {
            let mut rec = vec![
                edges[b].to_string(),
                edges[b + 1].to_string(),
                h1[b].to_string(),
                h2[b].to_string(),
            ];
            if let Some((r1, r2)) = &refs {
                rec.extend([r1[b].to_string(), r2[b].to_string()]);
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("histogram.csv", e))?;

        let mut results = toml::Table::new();
        for (name, w) in [("w1", net.w1()), ("w2", net.w2())] {
            let spec = stats::spectrum2d(w);
            if matches!(args.format, ImageFormat::Csv | ImageFormat::Both) {
                write_matrix_csv(&spec, run.create(&format!("spectrum_{name}.csv"))?)?;
            }
            if matches!(args.format, ImageFormat::Pgm | ImageFormat::Both) {
                let logged = spec.mapv(f64::ln_1p);
                let scale = logged.iter().fold(0.0f64, |m, &v| m.max(v)).max(f64::MIN_POSITIVE);
                write_pgm16(&logged, scale, run.create(&format!("spectrum_{name}.pgm"))?)?;
            }
            let counts = if name == "w1" { &h1 } else { &h2 };
            let se = stats::shannon_entropy(&Distribution::from_counts(counts)?, args.log_base)?;
            results.insert(format!("{name}_histogram_entropy"), se.into());
        }

        let jsd = match &refs {
            Some((r1, r2)) => {
                let j1 = stats::histogram_divergence(r1, &h1)?;
                let j2 = stats::histogram_divergence(r2, &h2)?;
                let mut out = csv::Writer::from_writer(run.create("divergence.csv")?);
                out.write_record(["matrix", "jsd_reference_vs_checkpoint"])?;
                out.write_record(["w1", &j1.to_string()])?;
                out.write_record(["w2", &j2.to_string()])?;
                out.flush().map_err(|e| Error::io("divergence.csv", e))?;
                results.insert("w1_jsd".into(), j1.into());
                results.insert("w2_jsd".into(), j2.into());
                Some((j1, j2))
            }
            None => None,
        };

        let mut series = Vec::new();
        if let Some(path) = &args.history {
            let rows = read_history_csv(path)?;
            let first = rows
                .first()
                .ok_or_else(|| Error::InsufficientData(format!("{}: no history rows", path.display())))?
                .1
                .clone();
            let mut out = csv::Writer::from_writer(run.create("history_divergence.csv")?);
            out.write_record(["iteration", "jsd_vs_first", "entropy"])?;
            for (it, counts) in &rows {
                let j = stats::histogram_divergence(&first, counts)?;
                let se = stats::shannon_entropy(&Distribution::from_counts(counts)?, args.log_base)?;
                out.write_record([it.to_string(), j.to_string(), se.to_string()])?;
                series.push((*it, j));
            }
            out.flush().map_err(|e| Error::io("history_divergence.csv", e))?;
        }
        Ok((0, results, (jsd, series)))
    })?;
    Ok(AnalyzeSummary {
        jsd,
        history_divergence,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(speed_ratio(Some(0), Some(0)), Some(1.0));
        assert_eq!(speed_ratio(Some(100), Some(250)), Some(2.5));
        assert_eq!(speed_ratio(None, Some(10)), None);
        assert_eq!(speed_ratio(Some(0), Some(10)), Some(f64::INFINITY));
    }

    #[test]
    fn snapshot_spacing() {
        let args = SimulateArgs::default();
        let g = args.grid();
        assert_eq!(g.snapshot_stride, 334);
        let steps: Vec<usize> = (0..=g.n_steps)
            .filter(|s| s % g.snapshot_stride == 0 || *s == g.n_steps)
            .collect();
        assert_eq!(steps, vec![0, 334, 668, 1000]);
        let two = SimulateArgs {
            snapshots: 2,
            steps: Some(10),
            ..SimulateArgs::default()
        };
        assert_eq!(two.grid().snapshot_stride, 10);
    }

    #[test]
    fn default_geometry_is_valid() {
        for barrier in [BarrierArg::None, BarrierArg::Rect, BarrierArg::DoubleSlit] {
            let args = SimulateArgs {
                barrier,
                ..SimulateArgs::default()
            };
            args.barrier().validate(&args.grid()).unwrap();
        }
        let rect = SimulateArgs::default().barrier();
        assert_eq!(rect.height, 2.0);
        assert!((rect.resolved_thickness(&SimulateArgs::default().grid()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn failed_run_leaves_a_failed_manifest_and_no_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let args = TrainArgs {
            model: ModelKind::Qt,
            data: TrainDataArgs {
                train_images: dir.path().join("missing-images"),
                train_labels: dir.path().join("missing-labels"),
            },
            net: ModelArgs::default(),
            schedule: ScheduleArgs::default(),
            out: dir.path().join("out"),
        };
        assert!(cmd_train(&args, &[]).is_err());
        let m = RunManifest::read(&dir.path().join("out").join(MANIFEST)).unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        assert!(m.error.is_some());
        assert!(m.artifacts.is_empty());
        let files: Vec<_> = std::fs::read_dir(dir.path().join("out")).unwrap().collect();
        assert_eq!(files.len(), 1);
    }
}
