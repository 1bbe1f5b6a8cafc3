mod common;

use num_complex::Complex64;
use qtnn::experiments::{cmd_simulate, BarrierArg, SimulateArgs};
use qtnn::schrodinger::{
    init_gaussian_packet, probability_density, run_simulation_with, BarrierGeometry, GridSpec, PacketSpec, Propagator,
    Splitting, WaveField,
};
use rustfft::FftPlanner;

use common::{significant_maxima, transfer_matrix_transmission};

fn grid(nx: usize, ny: usize, dt: f64) -> GridSpec {
    GridSpec {
        nx,
        ny,
        dx: 0.1,
        dy: 0.1,
        dt,
        n_steps: 0,
        snapshot_stride: 1,
    }
}

/// Density-weighted mean and variance of x.
fn x_moments(field: &WaveField, g: &GridSpec) -> (f64, f64) {
    let rho = probability_density(field);
    let total: f64 = rho.sum();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for ((ix, _), &r) in rho.indexed_iter() {
        let x = g.x(ix);
        m1 += r * x;
        m2 += r * x * x;
    }
    let mean = m1 / total;
    (mean, m2 / total - mean * mean)
}

fn evolve(field: &mut WaveField, g: GridSpec, steps: usize) {
    let mut prop = Propagator::new(g).unwrap();
    for _ in 0..steps {
        prop.step(field).unwrap();
    }
}

#[test]
fn free_packet_drifts_at_twice_its_wavenumber() {
    let g = grid(256, 128, 0.005);
    let k = 2.0;
    let packet = PacketSpec {
        center: (7.0, g.y_len() / 2.0),
        width: 1.0,
        momentum: (k, 0.0),
    };
    let mut field = init_gaussian_packet(&g, &packet).unwrap();
    let (x_start, _) = x_moments(&field, &g);
    evolve(&mut field, g, 200);
    let (x_end, _) = x_moments(&field, &g);
    let expected = 2.0 * k * g.dt * 200.0;
    let moved = x_end - x_start;
    assert!(
        (moved - expected).abs() / expected < 0.02,
        "moved {moved}, expected {expected}"
    );
}

#[test]
fn packet_at_rest_spreads_like_the_free_gaussian() {
    let g = grid(192, 192, 0.005);
    let sigma = 1.0;
    let packet = PacketSpec {
        center: (g.x_len() / 2.0, g.y_len() / 2.0),
        width: sigma,
        momentum: (0.0, 0.0),
    };
    let mut field = init_gaussian_packet(&g, &packet).unwrap();
    let (x0, var0) = x_moments(&field, &g);
    assert!((var0 - sigma * sigma).abs() < 1e-6);
    let steps = 200;
    evolve(&mut field, g, steps);
    let t = g.dt * steps as f64;
    let (x1, var1) = x_moments(&field, &g);
    let expected = sigma * sigma * (1.0 + (t / (sigma * sigma)).powi(2));
    assert!((x1 - x0).abs() < 1e-9);
    assert!(
        (var1 - expected).abs() / expected < 0.02,
        "variance {var1}, expected {expected}"
    );
}

#[test]
fn fourier_transform_recovers_the_packet_momentum() {
    let g = grid(128, 128, 0.005);
    let packet = PacketSpec {
        center: (6.4, 6.4),
        width: 8.0 * g.dx,
        momentum: (2.0, 0.0),
    };
    let field = init_gaussian_packet(&g, &packet).unwrap();

    let (nx, ny) = (g.nx, g.ny);
    let mut data: Vec<Complex64> = field.psi.iter().copied().collect();
    let mut planner = FftPlanner::<f64>::new();
    let fy = planner.plan_fft_forward(ny);
    for row in data.chunks_exact_mut(ny) {
        fy.process(row);
    }
    let fx = planner.plan_fft_forward(nx);
    let mut col = vec![Complex64::new(0.0, 0.0); nx];
    for iy in 0..ny {
        for ix in 0..nx {
            col[ix] = data[ix * ny + iy];
        }
        fx.process(&mut col);
        for ix in 0..nx {
            data[ix * ny + iy] = col[ix];
        }
    }
    let wavenumber = |i: usize, n: usize, d: f64| {
        let j = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * j / (n as f64 * d)
    };
    let (mut kx, mut ky, mut total) = (0.0, 0.0, 0.0);
    for ix in 0..nx {
        for iy in 0..ny {
            let p = data[ix * ny + iy].norm_sqr();
            kx += p * wavenumber(ix, nx, g.dx);
            ky += p * wavenumber(iy, ny, g.dy);
            total += p;
        }
    }
    let (kx, ky) = (kx / total, ky / total);
    assert!((kx - 2.0).abs() / 2.0 < 0.01, "kx = {kx}");
    assert!(ky.abs() < 0.02, "ky = {ky}");
}

#[test]
fn conjugated_evolution_retraces_its_path() {
    let g = grid(96, 96, 0.01);
    let packet = PacketSpec {
        center: (4.0, 4.8),
        width: 0.6,
        momentum: (3.0, 1.0),
    };
    let barrier = BarrierGeometry::rectangular(5.0, 6.0, 6.5);
    let start = init_gaussian_packet(&g, &packet)
        .unwrap()
        .with_potential(barrier.potential(&g))
        .unwrap();
    let mut field = start.clone();
    evolve(&mut field, g, 150);
    let moved: f64 = field
        .psi
        .iter()
        .zip(start.psi.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(moved > 0.1);
    field.psi.mapv_inplace(|z| z.conj());
    evolve(&mut field, g, 150);
    field.psi.mapv_inplace(|z| z.conj());
    let err: f64 = field
        .psi
        .iter()
        .zip(start.psi.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "max deviation {err}");
}

#[test]
fn thick_high_barrier_reflects_almost_everything() {
    let g = GridSpec {
        nx: 320,
        ny: 128,
        dx: 0.1,
        dy: 0.1,
        dt: 0.01,
        n_steps: 500,
        snapshot_stride: 500,
    };
    let packet = PacketSpec {
        center: (8.0, g.y_len() / 2.0),
        width: 1.5,
        momentum: (2.0, 0.0),
    };
    let barrier = BarrierGeometry::rectangular(12.0, 16.0, 18.0);
    let run = run_simulation_with(&g, &barrier, &packet, Splitting::Strang, false).unwrap();
    let last = run.snapshots.last().unwrap();
    assert!(last.regions.transmitted < 0.01, "P_T = {}", last.regions.transmitted);
    assert!(last.regions.reflected > 0.95);
    assert!((last.norm - 1.0).abs() < 1e-10);
    // the plane-wave estimate is tiny as well
    assert!(transfer_matrix_transmission(packet.mean_x_energy(), &[(12.0, 2.0)]) < 1e-3);
}

#[test]
fn double_slit_defaults_form_several_lobes() {
    let dir = tempfile::tempdir().unwrap();
    let args = SimulateArgs {
        barrier: BarrierArg::DoubleSlit,
        snapshots: 2,
        out: dir.path().join("slit"),
        ..SimulateArgs::default()
    };
    let summary = cmd_simulate(&args, &["simulate".into()]).unwrap();
    let run = &summary.run;
    let density = run.snapshots.last().unwrap().density.as_ref().unwrap();
    let (_, x_end) = run.barrier.cell_range(&run.grid);
    let profile: Vec<f64> = (0..run.grid.ny)
        .map(|iy| (x_end..run.grid.nx).map(|ix| density[[ix, iy]]).sum())
        .collect();
    let lobes = significant_maxima(&profile, 0.2, 5);
    assert!(lobes.len() >= 2, "maxima at {lobes:?}");
    assert!(run.snapshots.last().unwrap().regions.transmitted > 0.01);
    assert!(dir.path().join("slit/snapshot_000400.pgm").exists());
}
