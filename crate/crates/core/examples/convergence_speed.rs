//! Iterations each model needs to reach 60% held-out accuracy, for a few
//! seeds, using the same command the CLI's `speed` subcommand runs. Output
//! goes to `runs/examples/speed/seedN`.
//!
//! Takes a couple of minutes with optimizations.

use std::path::PathBuf;

use qtnn::experiments::{cmd_speed, ModelArgs, ScheduleArgs, SpeedArgs, TestDataArgs, TrainDataArgs};
use qtnn::ActivationMode;

fn main() -> qtnn::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    for seed in [7, 8, 9] {
        let args = SpeedArgs {
            train: TrainDataArgs {
                train_images: dir.join("subset-train-images-idx3-ubyte.gz"),
                train_labels: dir.join("subset-train-labels-idx1-ubyte.gz"),
            },
            test: TestDataArgs {
                test_images: dir.join("subset-test-images-idx3-ubyte.gz"),
                test_labels: dir.join("subset-test-labels-idx1-ubyte.gz"),
            },
            net: ModelArgs {
                seed,
                hidden_size: 800,
                learning_rate: 0.01,
                barrier_height: 1.0,
                barrier_thickness: 1.0,
                energy_gain: 0.005,
                mode: ActivationMode::Deterministic,
            },
            qt_learning_rate: Some(0.2),
            classical_learning_rate: Some(0.01),
            schedule: ScheduleArgs {
                batches: 10,
                epochs: 20,
                images_per_category: 1,
                history_stride: 100,
                bins: 101,
            },
            threshold: 0.6,
            eval_every: 10,
            out: PathBuf::from(format!("runs/examples/speed/seed{seed}")),
        };
        let s = cmd_speed(&args, &[])?;
        let show = |r: Option<usize>| r.map_or("not reached".into(), |i: usize| i.to_string());
        println!(
            "seed {seed}: QT {}  ReLU {}  ratio {}",
            show(s.qt.reached_at),
            show(s.classical.reached_at),
            s.ratio.map_or("undefined".into(), |r| format!("{r:.2}"))
        );
    }
    Ok(())
}
