use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtnn::experiments::{self, AnalyzeArgs, CompareArgs, SimulateArgs, SpeedArgs, TrainArgs};

/// Quantum-tunnelling vs ReLU networks and a wave-packet tunnelling solver.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and record its weight histories.
    Train(TrainArgs),
    /// Per-category output distributions, JSD and entropy of two checkpoints.
    Compare(CompareArgs),
    /// Iterations each model needs to reach a held-out accuracy.
    Speed(SpeedArgs),
    /// Propagate a Gaussian wave packet against a barrier.
    Simulate(SimulateArgs),
    /// Spectra, histograms and divergences of checkpoint weights.
    Analyze(AnalyzeArgs),
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(a) => experiments::cmd_train(a, &argv).map(|s| {
            println!("trained {} iterations -> {}", s.outcome.iterations, a.out.display());
        }),
        Command::Compare(a) => experiments::cmd_compare(a, &argv).map(|s| {
            println!(
                "accuracy qt {:.4}  classical {:.4}",
                s.qt.accuracy, s.classical.accuracy
            );
            for (c, j) in s.jsd.iter().enumerate() {
                println!(
                    "{:>12}  jsd {j:.4}  entropy qt {:.4}  classical {:.4}",
                    qtnn::data::FASHION_MNIST_CATEGORIES.get(c).copied().unwrap_or("?"),
                    s.entropy_qt[c],
                    s.entropy_classical[c]
                );
            }
        }),
        Command::Speed(a) => experiments::cmd_speed(a, &argv).map(|s| {
            let show = |r: Option<usize>| r.map_or("not reached".to_string(), |i| i.to_string());
            println!(
                "qt: {}  classical: {}",
                show(s.qt.reached_at),
                show(s.classical.reached_at)
            );
            match s.ratio {
                Some(r) => println!("classical/qt ratio: {r:.3}"),
                None => println!("classical/qt ratio: undefined"),
            }
        }),
        Command::Simulate(a) => experiments::cmd_simulate(a, &argv).map(|s| {
            for snap in &s.run.snapshots {
                let r = snap.regions;
                println!(
                    "t = {:7.3}  reflected {:.4}  barrier {:.4}  transmitted {:.4}",
                    snap.time, r.reflected, r.barrier, r.transmitted
                );
            }
        }),
        Command::Analyze(a) => experiments::cmd_analyze(a, &argv).map(|s| {
            if let Some((j1, j2)) = s.jsd {
                println!("jsd vs reference: w1 {j1:.3e}  w2 {j2:.3e}");
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
