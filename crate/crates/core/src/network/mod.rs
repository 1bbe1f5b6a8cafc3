//! The dense `L–N–M` network shared by the tunnelling and ReLU models.
//!
//! Forward pass: `v1 = W1·x`, `h = φ(v1)`, `v2 = W2·h`, `y = softmax(v2)`.
//!
//! Backward pass, per sample, exactly as the learning rule prescribes:
//!
//! ```text
//! e  = d − y            δ2 = e
//! e1 = W2ᵀ·δ2           δ1 = φ′(v1) ⊙ e1
//! W2 += α·δ2·hᵀ         W1 += α·δ1·xᵀ
//! ```

mod checkpoint;

use ndarray::{Array1, Array2, ArrayView1};
use rand::distr::{Distribution as _, Uniform};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{softmax, ActivationSpec};
use crate::data::{make_schedule, Dataset, TrainingSchedule};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{Distribution, HistogramGrid, WeightHistory};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

const EVALUATE_STREAM: &str = "evaluate";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub activation: ActivationSpec,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_size: 784,
            hidden_size: 800,
            output_size: 10,
            learning_rate: 0.01,
            seed: 0,
            activation: ActivationSpec::default(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden_size == 0 || self.output_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "layer sizes must be positive, got {}-{}-{}",
                self.input_size, self.hidden_size, self.output_size
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        self.activation.validate()
    }
}

/// Intermediate quantities of one forward/backward pass over a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSignal {
    pub x: Array1<f64>,
    /// One-hot target; empty until [`TrainingSignal::set_target`].
    pub d: Array1<f64>,
    pub v1: Array1<f64>,
    pub h: Array1<f64>,
    pub v2: Array1<f64>,
    pub y: Distribution,
    pub e: Array1<f64>,
    pub delta1: Array1<f64>,
    pub delta2: Array1<f64>,
}

impl TrainingSignal {
    pub fn set_target(&mut self, category: usize) -> Result<()> {
        let m = self.v2.len();
        if category >= m {
            return Err(Error::InvalidParameter(format!(
                "target category {category} not below output size {m}"
            )));
        }
        let mut d = Array1::zeros(m);
        d[category] = 1.0;
        self.d = d;
        Ok(())
    }

    /// `½‖e‖²` once the backward pass has run.
    pub fn loss(&self) -> f64 {
        0.5 * self.e.dot(&self.e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    w1: Array2<f64>,
    w2: Array2<f64>,
    config: NetworkConfig,
}

impl Network {
    /// Every weight drawn independently from `U[-1, 1]` on the seed's `init`
    /// stream.
    pub fn init(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, rng::INIT);
        let uniform = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        let w1 = Array2::from_shape_simple_fn((config.hidden_size, config.input_size), || uniform.sample(&mut rng));
        let w2 = Array2::from_shape_simple_fn((config.output_size, config.hidden_size), || uniform.sample(&mut rng));
        Ok(Self { w1, w2, config })
    }

    pub fn from_weights(config: NetworkConfig, w1: Array2<f64>, w2: Array2<f64>) -> Result<Self> {
        config.validate()?;
        let want1 = (config.hidden_size, config.input_size);
        let want2 = (config.output_size, config.hidden_size);
        if w1.dim() != want1 {
            return Err(Error::DimensionMismatch {
                context: "W1",
                expected: want1.0 * want1.1,
                actual: w1.len(),
            });
        }
        if w2.dim() != want2 {
            return Err(Error::DimensionMismatch {
                context: "W2",
                expected: want2.0 * want2.1,
                actual: w2.len(),
            });
        }
        if w1.iter().chain(w2.iter()).any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        Ok(Self { w1, w2, config })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Input→hidden weights, `N × L`.
    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    /// Hidden→output weights, `M × N`.
    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    /// Direct weight access (gradient checks, hand-built toy networks).
    /// Callers keep the entries finite.
    pub fn w1_mut(&mut self) -> &mut Array2<f64> {
        &mut self.w1
    }

    pub fn w2_mut(&mut self) -> &mut Array2<f64> {
        &mut self.w2
    }

    /// Same weights under a different hidden activation; used to start the
    /// tunnelling and classical models from one initialization.
    pub fn with_activation(mut self, activation: ActivationSpec) -> Result<Self> {
        activation.validate()?;
        self.config.activation = activation;
        Ok(self)
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Result<Self> {
        self.config.learning_rate = learning_rate;
        self.config.validate()?;
        Ok(self)
    }

    /// Forward pass. `rng` is only drawn from by stochastic activations.
    pub fn forward<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<TrainingSignal> {
        if x.len() != self.config.input_size {
            return Err(Error::DimensionMismatch {
                context: "forward input",
                expected: self.config.input_size,
                actual: x.len(),
            });
        }
        let x = ArrayView1::from(x).to_owned();
        let v1 = self.w1.dot(&x);
        let act = self.config.activation;
        let h = v1.mapv(|v| act.activate(v, rng));
        let v2 = self.w2.dot(&h);
        let y = softmax(v2.as_slice().expect("contiguous")).map_err(|_| Error::NonFinite("output pre-activations"))?;
        Ok(TrainingSignal {
            x,
            d: Array1::zeros(0),
            v1,
            h,
            v2,
            y,
            e: Array1::zeros(0),
            delta1: Array1::zeros(0),
            delta2: Array1::zeros(0),
        })
    }

    /// Output distribution for `x` using the expected (deterministic)
    /// activation.
    pub fn predict(&self, x: &[f64]) -> Result<Distribution> {
        let mut det = self.config.activation;
        det.mode = crate::activations::ActivationMode::Deterministic;
        if x.len() != self.config.input_size {
            return Err(Error::DimensionMismatch {
                context: "predict input",
                expected: self.config.input_size,
                actual: x.len(),
            });
        }
        let h = self.w1.dot(&ArrayView1::from(x)).mapv(|v| det.expected(v));
        let v2 = self.w2.dot(&h);
        softmax(v2.as_slice().expect("contiguous")).map_err(|_| Error::NonFinite("output pre-activations"))
    }

    /// One learning step with output error `e = d − y` (`sig.d` must be set).
    pub fn backprop_update(&mut self, sig: &mut TrainingSignal) -> Result<()> {
        if sig.d.len() != self.config.output_size {
            return Err(Error::InvalidParameter("training signal has no target".into()));
        }
        let y = ArrayView1::from(sig.y.as_slice());
        let e = &sig.d - &y;
        self.backprop_with_output_error(sig, e)
    }

    /// Propagates an arbitrary output-layer error `e` (taken as `δ2`) and
    /// applies the weight updates. [`Network::backprop_update`] calls this
    /// with `e = d − y`.
    pub fn backprop_with_output_error(&mut self, sig: &mut TrainingSignal, e: Array1<f64>) -> Result<()> {
        let (n, m) = (self.config.hidden_size, self.config.output_size);
        if e.len() != m || sig.h.len() != n || sig.v1.len() != n || sig.x.len() != self.config.input_size {
            return Err(Error::DimensionMismatch {
                context: "training signal",
                expected: m,
                actual: e.len(),
            });
        }
        let delta2 = e.clone();
        let e1 = self.w2.t().dot(&delta2);
        let act = self.config.activation;
        let delta1 = Array1::from_shape_fn(n, |i| act.derivative(sig.v1[i]) * e1[i]);

        let alpha = self.config.learning_rate;
        let bound = |w: &Array2<f64>, delta: &Array1<f64>, input: &Array1<f64>| {
            max_abs(w.iter()) + alpha * max_abs(delta.iter()) * max_abs(input.iter())
        };
        let b2 = bound(&self.w2, &delta2, &sig.h);
        let b1 = bound(&self.w1, &delta1, &sig.x);
        if !(b1.is_finite() && b2.is_finite()) {
            return Err(Error::NonFinite("weight update"));
        }

        if alpha != 0.0 {
            for (i, &d) in delta2.iter().enumerate() {
                if d != 0.0 {
                    self.w2.row_mut(i).scaled_add(alpha * d, &sig.h);
                }
            }
            for (i, &d) in delta1.iter().enumerate() {
                if d != 0.0 {
                    self.w1.row_mut(i).scaled_add(alpha * d, &sig.x);
                }
            }
        }
        sig.e = e;
        sig.delta1 = delta1;
        sig.delta2 = delta2;
        Ok(())
    }
}

fn max_abs<'a>(xs: impl Iterator<Item = &'a f64>) -> f64 {
    xs.fold(0.0, |m: f64, &x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub network: Network,
    pub w1_history: WeightHistory,
    pub w2_history: WeightHistory,
    /// `½‖e‖²` at every iteration, before that iteration's update.
    pub loss_trace: Vec<f64>,
    /// Iterations actually run (less than planned when stopped early).
    pub iterations: usize,
}

/// What a training observer wants next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Trains `net` on `data` following `schedule` with histograms on the default
/// grid.
pub fn train(net: Network, data: &Dataset, schedule: &TrainingSchedule) -> Result<TrainingOutcome> {
    train_observed(net, data, schedule, HistogramGrid::default(), |_, _| {
        Ok(Control::Continue)
    })
}

/// [`train`] with an explicit histogram grid and an observer called before the
/// first update (iteration 0) and after every update with the iteration count.
pub fn train_observed<F>(
    mut net: Network,
    data: &Dataset,
    schedule: &TrainingSchedule,
    grid: HistogramGrid,
    mut observer: F,
) -> Result<TrainingOutcome>
where
    F: FnMut(usize, &Network) -> Result<Control>,
{
    let cfg = *net.config();
    if data.num_categories() != cfg.output_size {
        return Err(Error::InvalidParameter(format!(
            "dataset has {} categories, network outputs {}",
            data.num_categories(),
            cfg.output_size
        )));
    }
    if data.input_size() != cfg.input_size {
        return Err(Error::DimensionMismatch {
            context: "dataset input size",
            expected: cfg.input_size,
            actual: data.input_size(),
        });
    }
    for c in 0..data.num_categories() {
        if data.category(c).is_empty() {
            return Err(Error::InsufficientData(format!("category {c} is empty")));
        }
    }
    let plan = make_schedule(data, schedule, cfg.seed)?;
    let mut act_rng = rng::stream(cfg.seed, rng::STOCHASTIC_ACTIVATION);
    let mut w1_history = WeightHistory::new(grid)?;
    let mut w2_history = WeightHistory::new(grid)?;
    let mut loss_trace = Vec::with_capacity(plan.len());

    w1_history.record(0, net.w1());
    w2_history.record(0, net.w2());
    let mut iterations = 0;
    if observer(0, &net)? == Control::Continue {
        for (it, &pos) in plan.order.iter().enumerate() {
            let x = data.image(pos);
            let mut sig = net.forward(&x, &mut act_rng)?;
            sig.set_target(data.label(pos))?;
            net.backprop_update(&mut sig).map_err(|e| Error::Divergence {
                iteration: it + 1,
                detail: e.to_string(),
            })?;
            loss_trace.push(sig.loss());
            iterations = it + 1;
            if iterations % schedule.history_stride == 0 {
                w1_history.record(iterations, net.w1());
                w2_history.record(iterations, net.w2());
            }
            if observer(iterations, &net)? == Control::Stop {
                break;
            }
        }
    }
    w1_history.record(iterations, net.w1());
    w2_history.record(iterations, net.w2());
    Ok(TrainingOutcome {
        network: net,
        w1_history,
        w2_history,
        loss_trace,
        iterations,
    })
}

/// Per-category mean output distributions (the bar-chart data) and top-1
/// accuracy over the evaluated images.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    /// Row `c`: mean softmax output over the selected test images of true
    /// category `c`.
    pub rows: Vec<Distribution>,
    /// Fraction of the row's images whose arg-max equals `c`.
    pub category_accuracy: Vec<f64>,
    pub accuracy: f64,
    /// Dataset positions evaluated for each category.
    pub selected: Vec<Vec<usize>>,
}

/// Seeded choice of `per_category` test images of every category.
pub fn select_test_images(test: &Dataset, per_category: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    use rand::seq::SliceRandom;
    if per_category == 0 {
        return Err(Error::InvalidParameter("per_category must be positive".into()));
    }
    test.require_per_category(per_category)?;
    let mut rng = rng::stream(seed, rng::TEST_SELECTION);
    Ok((0..test.num_categories())
        .map(|c| {
            let mut idx = test.category(c).to_vec();
            idx.shuffle(&mut rng);
            idx.truncate(per_category);
            idx.sort_unstable();
            idx
        })
        .collect())
}

fn output_for(net: &Network, data: &Dataset, pos: usize) -> Result<Distribution> {
    let x = data.image(pos);
    if net.config().activation.is_stochastic() {
        let mut r = rng::indexed_stream(net.config().seed, EVALUATE_STREAM, pos as u64);
        Ok(net.forward(&x, &mut r)?.y)
    } else {
        net.predict(&x)
    }
}

/// Evaluates `per_category` seeded test images of every category.
pub fn evaluate(net: &Network, test: &Dataset, per_category: usize, selection_seed: u64) -> Result<CategoryReport> {
    let selected = select_test_images(test, per_category, selection_seed)?;
    evaluate_selection(net, test, selected)
}

/// Evaluates an explicit per-category selection of test positions.
pub fn evaluate_selection(net: &Network, test: &Dataset, selected: Vec<Vec<usize>>) -> Result<CategoryReport> {
    let m = net.config().output_size;
    if selected.len() != m || test.num_categories() != m {
        return Err(Error::InvalidParameter(format!(
            "selection covers {} categories, network outputs {m}",
            selected.len()
        )));
    }
    let mut rows = Vec::with_capacity(m);
    let mut category_accuracy = Vec::with_capacity(m);
    let (mut correct, mut total) = (0usize, 0usize);
    for (c, positions) in selected.iter().enumerate() {
        if positions.is_empty() {
            return Err(Error::InsufficientData(format!("no test images for category {c}")));
        }
        let outputs: Vec<Distribution> = positions
            .par_iter()
            .map(|&p| output_for(net, test, p))
            .collect::<Result<_>>()?;
        let hits = outputs.iter().filter(|y| y.argmax() == c).count();
        correct += hits;
        total += outputs.len();
        category_accuracy.push(hits as f64 / outputs.len() as f64);
        rows.push(Distribution::mean(&outputs)?);
    }
    Ok(CategoryReport {
        rows,
        category_accuracy,
        accuracy: correct as f64 / total as f64,
        selected,
    })
}

/// Top-1 accuracy over every image of `data`.
pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty dataset".into()));
    }
    let hits: Vec<bool> = (0..data.len())
        .into_par_iter()
        .map(|p| output_for(net, data, p).map(|y| y.argmax() == data.label(p)))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / data.len() as f64)
}
