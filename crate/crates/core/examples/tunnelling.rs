//! A Gaussian wave packet meets a rectangular barrier. Prints how the
//! probability splits into reflected and transmitted parts, compares the
//! result with the plane-wave transmission at the packet's mean energy, and
//! writes density snapshots as 16-bit PGM images.

use std::fs::File;

use qtnn::activations::qt_transmission;
use qtnn::export::write_density_pgm;
use qtnn::schrodinger::{run_simulation, BarrierGeometry, GridSpec, PacketSpec};

fn main() -> qtnn::Result<()> {
    let grid = GridSpec {
        nx: 480,
        ny: 192,
        dx: 0.1,
        dy: 0.1,
        dt: 0.01,
        n_steps: 600,
        snapshot_stride: 150,
    };
    let barrier = BarrierGeometry::rectangular(8.0, 20.0, 20.3);
    let packet = PacketSpec {
        center: (10.0, grid.y_len() / 2.0),
        width: 2.0,
        momentum: (2.0, 0.0),
    };

    let run = run_simulation(&grid, &barrier, &packet)?;
    let scale = run.max_density();
    for s in &run.snapshots {
        let r = s.regions;
        println!(
            "t = {:5.2}  reflected {:.4}  inside {:.4}  transmitted {:.4}  norm {:.12}",
            s.time, r.reflected, r.barrier, r.transmitted, s.norm
        );
        let path = format!("tunnelling_{:04}.pgm", s.step);
        let file = File::create(&path).map_err(|e| qtnn::Error::io(&path, e))?;
        write_density_pgm(s.density.as_ref().expect("densities kept"), scale, file)?;
    }
    let e = packet.mean_x_energy();
    println!(
        "plane wave at E = {e:.3}: T = {:.4}",
        qt_transmission(e, barrier.height, barrier.resolved_thickness(&grid))
    );
    Ok(())
}
