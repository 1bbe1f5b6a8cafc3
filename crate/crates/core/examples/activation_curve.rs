//! Tabulates the tunnelling activation against ReLU and writes the curve to
//! `activation_curve.csv`.
//!
//! ```text
//! cargo run --example activation_curve -- [V0] [a] [g]
//! ```

use qtnn::activations::{qt_activation_derivative, qt_transmission, relu, ActivationSpec};

fn main() -> qtnn::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("numeric argument"))
        .collect();
    let v0 = args.first().copied().unwrap_or(1.0);
    let a = args.get(1).copied().unwrap_or(1.0);
    let g = args.get(2).copied().unwrap_or(1.0);
    let spec = ActivationSpec::qt(v0, a, g);
    spec.validate()?;

    let mut out = csv::Writer::from_path("activation_curve.csv")?;
    out.write_record(["v", "qt", "qt_derivative", "relu"])?;
    println!("{:>8} {:>10} {:>10} {:>8}", "v", "T(g v)", "dT/dv", "relu");
    for i in 0..=60 {
        // energies g·v from -1 to 4
        let v = (-1.0 + 5.0 * i as f64 / 60.0) / g;
        let t = spec.expected(v);
        let d = qt_activation_derivative(v, &spec)?;
        out.write_record([v, t, d, relu(v)].map(|x| x.to_string()))?;
        if i % 6 == 0 {
            println!("{v:8.3} {t:10.6} {d:10.6} {:8.3}", relu(v));
        }
    }
    out.flush().map_err(|e| qtnn::Error::io("activation_curve.csv", e))?;

    // the barrier top: E = V0
    println!("T at the barrier top: {:.6}", qt_transmission(v0, v0, a));
    println!("wrote activation_curve.csv");
    Ok(())
}
