//! Loads an IDX image/label pair (gzip or raw) and prints per-category counts
//! and a coarse ASCII rendering of the first image.
//!
//! ```text
//! cargo run --example load_data -- IMAGES LABELS
//! ```
//! Without arguments the bundled 500-image training subset is used.

use std::path::PathBuf;

use qtnn::data::{Dataset, FASHION_MNIST_CATEGORIES};

fn main() -> qtnn::Result<()> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let images = args
        .next()
        .unwrap_or_else(|| fixture.join("subset-train-images-idx3-ubyte.gz"));
    let labels = args
        .next()
        .unwrap_or_else(|| fixture.join("subset-train-labels-idx1-ubyte.gz"));

    let data = Dataset::load(&images, &labels, 10)?;
    println!("{} images of {} pixels", data.len(), data.input_size());
    for (c, name) in FASHION_MNIST_CATEGORIES.iter().enumerate() {
        println!("  {c} {name:<12} {}", data.category(c).len());
    }

    let shades = [' ', '.', ':', '*', '#'];
    println!("\nimage 0 ({})", FASHION_MNIST_CATEGORIES[data.label(0)]);
    for row in data.raw_image(0).chunks(28).step_by(2) {
        let line: String = row.iter().map(|&p| shades[p as usize * shades.len() / 256]).collect();
        println!("  {line}");
    }
    Ok(())
}
