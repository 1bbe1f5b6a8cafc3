//! Follows the first-layer weight histogram of both models during training
//! and prints its divergence from the initial histogram over time.

use std::path::PathBuf;

use qtnn::data::{Dataset, TrainingSchedule};
use qtnn::network::{self, Network, NetworkConfig};
use qtnn::stats::histogram_divergence;
use qtnn::ActivationSpec;

fn main() -> qtnn::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let train = Dataset::load(
        &dir.join("subset-train-images-idx3-ubyte.gz"),
        &dir.join("subset-train-labels-idx1-ubyte.gz"),
        10,
    )?;
    let schedule = TrainingSchedule {
        n_batches: 10,
        epochs_per_batch: 20,
        history_stride: 250,
        ..TrainingSchedule::default()
    };
    let base = NetworkConfig {
        seed: 7,
        ..NetworkConfig::default()
    };

    for (name, lr, activation) in [
        ("QT", 0.2, ActivationSpec::qt(1.0, 1.0, 0.005)),
        ("ReLU", 0.01, ActivationSpec::relu()),
    ] {
        let net = Network::init(NetworkConfig {
            learning_rate: lr,
            activation,
            ..base
        })?;
        let out = network::train(net, &train, &schedule)?;
        let h = &out.w1_history;
        let first = h.first().expect("initial histogram");
        let centre = h.grid().central_bin();
        println!("{name}");
        for (it, counts) in h.iteration_stamps().iter().zip(h.counts()) {
            println!(
                "  iteration {it:>5}  JSD vs start {:.3e}  central bin {}",
                histogram_divergence(first, counts)?,
                counts[centre]
            );
        }
        let path = format!("w1_history_{}.csv", name.to_lowercase());
        h.write_csv(std::fs::File::create(&path).map_err(|e| qtnn::Error::io(&path, e))?)?;
        println!("  wrote {path}");
    }
    Ok(())
}
