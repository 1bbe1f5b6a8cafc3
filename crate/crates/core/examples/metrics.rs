//! Jensen–Shannon divergence, Shannon entropy and Kullback–Leibler divergence
//! on a few hand-picked output distributions.

use qtnn::stats::{jsd, jsd_distance, kld, shannon_entropy, Distribution, BITS, NATS};

fn main() -> qtnn::Result<()> {
    let confident = Distribution::new(vec![0.94, 0.02, 0.02, 0.02])?;
    let hedging = Distribution::new(vec![0.40, 0.35, 0.15, 0.10])?;
    let uniform = Distribution::uniform(4)?;
    let named = [("confident", &confident), ("hedging", &hedging), ("uniform", &uniform)];

    println!("entropy (bits)");
    for (name, p) in named {
        println!("  {name:<10} {:.4}", shannon_entropy(p, BITS)?);
    }

    println!("\npairwise JSD (bits) / JS distance / KLD(p||q) (nats)");
    for (i, (a, p)) in named.iter().enumerate() {
        for (b, q) in &named[i + 1..] {
            println!(
                "  {a:<10} {b:<10} {:.4}  {:.4}  {:.4}",
                jsd(p, q, BITS)?,
                jsd_distance(p, q, BITS)?,
                kld(p, q, NATS)?
            );
        }
    }

    let one_hot = Distribution::one_hot(4, 0)?;
    println!("\nKLD(one-hot || uniform) = {} bits", kld(&one_hot, &uniform, BITS)?);
    println!("KLD(uniform || one-hot) = {} bits", kld(&uniform, &one_hot, BITS)?);
    Ok(())
}
