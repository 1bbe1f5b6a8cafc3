//! Trains a tunnelling network and a ReLU network from the same initial
//! weights on the bundled 500-image subset, then compares their
//! per-category output distributions on the 500 held-out images.
//!
//! Takes about half a minute with optimizations.

use std::path::PathBuf;

use qtnn::data::{Dataset, TrainingSchedule, FASHION_MNIST_CATEGORIES};
use qtnn::network::{self, Network, NetworkConfig};
use qtnn::stats::{jsd, shannon_entropy, BITS};
use qtnn::ActivationSpec;

fn load(split: &str) -> qtnn::Result<Dataset> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    Dataset::load(
        &dir.join(format!("subset-{split}-images-idx3-ubyte.gz")),
        &dir.join(format!("subset-{split}-labels-idx1-ubyte.gz")),
        10,
    )
}

fn main() -> qtnn::Result<()> {
    let train = load("train")?;
    let test = load("test")?;
    let schedule = TrainingSchedule {
        n_batches: 10,
        epochs_per_batch: 20,
        ..TrainingSchedule::default()
    };
    let base = NetworkConfig {
        seed: 7,
        ..NetworkConfig::default()
    };

    let qt = Network::init(NetworkConfig {
        learning_rate: 0.2,
        activation: ActivationSpec::qt(1.0, 1.0, 0.005),
        ..base
    })?;
    let relu = Network::init(NetworkConfig {
        learning_rate: 0.01,
        activation: ActivationSpec::relu(),
        ..base
    })?;

    let qt = network::train(qt, &train, &schedule)?.network;
    let relu = network::train(relu, &train, &schedule)?.network;
    let rq = network::evaluate(&qt, &test, 50, 0)?;
    let rr = network::evaluate(&relu, &test, 50, 0)?;

    println!(
        "accuracy: QT {:.1}%  ReLU {:.1}%\n",
        100.0 * rq.accuracy,
        100.0 * rr.accuracy
    );
    println!(
        "{:<12} {:>7} {:>7} {:>8} {:>8} {:>8}",
        "category", "acc QT", "acc ReLU", "H QT", "H ReLU", "JSD"
    );
    for (c, name) in FASHION_MNIST_CATEGORIES.iter().enumerate() {
        println!(
            "{name:<12} {:>7.2} {:>8.2} {:>8.3} {:>8.3} {:>8.4}",
            rq.category_accuracy[c],
            rr.category_accuracy[c],
            shannon_entropy(&rq.rows[c], BITS)?,
            shannon_entropy(&rr.rows[c], BITS)?,
            jsd(&rq.rows[c], &rr.rows[c], BITS)?
        );
    }
    Ok(())
}
