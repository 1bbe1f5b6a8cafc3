//! Double-slit diffraction on the default 256 × 256 grid. Prints the
//! transmitted probability profile along y as a bar chart and writes the
//! final density as `double_slit.pgm`.

use std::fs::File;

use qtnn::experiments::{BarrierArg, SimulateArgs};
use qtnn::export::write_density_pgm;
use qtnn::schrodinger::run_simulation;

fn main() -> qtnn::Result<()> {
    // the CLI defaults for `simulate --barrier double-slit`
    let args = SimulateArgs {
        barrier: BarrierArg::DoubleSlit,
        snapshots: 2,
        ..SimulateArgs::default()
    };
    let (grid, barrier) = (args.grid(), args.barrier());
    let run = run_simulation(&grid, &barrier, &args.packet())?;
    let last = run.snapshots.last().expect("final snapshot");
    let density = last.density.as_ref().expect("densities kept");

    let (_, x_end) = barrier.cell_range(&grid);
    let profile: Vec<f64> = (0..grid.ny)
        .map(|iy| (x_end..grid.nx).map(|ix| density[[ix, iy]]).sum())
        .collect();
    let peak = profile.iter().cloned().fold(0.0, f64::max);
    for (iy, p) in profile.iter().enumerate().step_by(4) {
        println!(
            "y = {:5.2} {}",
            grid.y(iy),
            "#".repeat((60.0 * p / peak).round() as usize)
        );
    }
    println!("transmitted probability {:.4}", last.regions.transmitted);

    let path = "double_slit.pgm";
    write_density_pgm(
        density,
        run.max_density(),
        File::create(path).map_err(|e| qtnn::Error::io(path, e))?,
    )?;
    println!("wrote {path}");
    Ok(())
}
