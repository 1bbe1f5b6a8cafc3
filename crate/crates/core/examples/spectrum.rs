//! 2D Fourier magnitude spectrum of a weight matrix: a freshly initialized
//! first layer next to one with a planted periodic pattern. Both spectra are
//! written as PGM images (log-scaled).

use std::fs::File;

use qtnn::export::write_pgm16;
use qtnn::network::{Network, NetworkConfig};
use qtnn::stats::spectrum2d;

fn main() -> qtnn::Result<()> {
    let net = Network::init(NetworkConfig {
        hidden_size: 64,
        ..NetworkConfig::default()
    })?;
    let noise = net.w1().clone();
    let mut striped = noise.clone();
    for ((i, j), w) in striped.indexed_iter_mut() {
        *w = 0.5 * *w + 0.5 * (2.0 * std::f64::consts::PI * (i as f64 / 8.0 + j as f64 / 28.0)).cos();
    }

    for (name, w) in [("noise", &noise), ("striped", &striped)] {
        let s = spectrum2d(w).mapv(f64::ln_1p);
        let (r, c) = s.dim();
        let mut peak = (0, 0, 0.0);
        for ((i, j), &v) in s.indexed_iter() {
            if (i, j) != (r / 2, c / 2) && v > peak.2 {
                peak = (i, j, v);
            }
        }
        println!(
            "{name:<8} {r}x{c}: DC {:.3}, strongest other cell ({}, {}) offset ({}, {}) at {:.3}",
            s[[r / 2, c / 2]],
            peak.0,
            peak.1,
            peak.0 as i64 - (r / 2) as i64,
            peak.1 as i64 - (c / 2) as i64,
            peak.2
        );
        let path = format!("spectrum_{name}.pgm");
        let max = s.iter().cloned().fold(0.0, f64::max);
        write_pgm16(&s, max, File::create(&path).map_err(|e| qtnn::Error::io(&path, e))?)?;
    }
    Ok(())
}
