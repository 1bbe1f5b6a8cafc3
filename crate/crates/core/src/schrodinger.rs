//! 2D time-dependent Schrödinger solver for a Gaussian wave packet meeting a
//! finite potential barrier.
//!
//! Units: `ħ = 1`, `2m = 1`, so the equation is `i ∂ψ/∂t = −∇²ψ + Vψ`, a plane
//! wave `e^{ikx}` carries energy `k²` and a packet moves at group velocity
//! `2k`. These are the same units as the tunnelling activation
//! (`2m/ħ² = 1`), so [`crate::activations::qt_transmission`] gives the
//! plane-wave transmission of the rectangular barrier simulated here.
//!
//! The grid is a hard-walled box: `ψ` is pinned to zero on the boundary ring.
//! Time stepping is Crank–Nicolson with alternating-direction splitting: the
//! Hamiltonian is split as `A_x = −∂²ₓ + V/2` and `A_y = −∂²_y + V/2`, and
//! each directional factor is advanced by a tridiagonal (Thomas) solve along
//! grid lines. See [`Splitting`] for the two available compositions.

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_stride: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 256,
            ny: 256,
            dx: 0.1,
            dy: 0.1,
            dt: 0.005,
            n_steps: 1000,
            snapshot_stride: 333,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 16x16, got {}x{}",
                self.nx, self.ny
            )));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be finite and non-zero, got {}",
                self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter("snapshot_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.dy
    }

    pub fn x_len(&self) -> f64 {
        (self.nx - 1) as f64 * self.dx
    }

    pub fn y_len(&self) -> f64 {
        (self.ny - 1) as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    None,
    Rectangular,
    DoubleSlit,
}

/// A barrier uniform in `y` over `x ∈ [x0, x1)`, optionally pierced by two
/// slits. For [`BarrierKind::None`] the extent still delimits the
/// reflected/barrier/transmitted regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierGeometry {
    pub kind: BarrierKind,
    pub height: f64,
    pub x_extent: (f64, f64),
    pub slit_width: f64,
    /// Center-to-center distance between the two slits.
    pub slit_separation: f64,
    pub slit_center_y: f64,
}

impl BarrierGeometry {
    pub fn none(x0: f64, x1: f64) -> Self {
        Self {
            kind: BarrierKind::None,
            height: 1.0,
            x_extent: (x0, x1),
            slit_width: 0.0,
            slit_separation: 0.0,
            slit_center_y: 0.0,
        }
    }

    pub fn rectangular(height: f64, x0: f64, x1: f64) -> Self {
        Self {
            kind: BarrierKind::Rectangular,
            height,
            ..Self::none(x0, x1)
        }
    }

    pub fn double_slit(
        height: f64,
        x0: f64,
        x1: f64,
        slit_width: f64,
        slit_separation: f64,
        slit_center_y: f64,
    ) -> Self {
        Self {
            kind: BarrierKind::DoubleSlit,
            height,
            x_extent: (x0, x1),
            slit_width,
            slit_separation,
            slit_center_y,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let (x0, x1) = self.x_extent;
        if !(x0.is_finite() && x1.is_finite() && x0 < x1 && x0 > 0.0 && x1 < grid.x_len()) {
            return Err(Error::InvalidParameter(format!(
                "barrier extent [{x0}, {x1}] must be ordered and inside (0, {})",
                grid.x_len()
            )));
        }
        let (i0, i1) = self.cell_range(grid);
        if i1 <= i0 {
            return Err(Error::InvalidParameter("barrier thinner than one grid cell".into()));
        }
        if self.kind != BarrierKind::None && !(self.height.is_finite() && self.height > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "barrier height must be positive, got {}",
                self.height
            )));
        }
        if self.kind == BarrierKind::DoubleSlit {
            let half = self.slit_separation / 2.0 + self.slit_width / 2.0;
            if !(self.slit_width > 0.0 && self.slit_separation > self.slit_width) {
                return Err(Error::InvalidParameter(
                    "slits need positive width and a separation wider than the slits".into(),
                ));
            }
            if self.slit_center_y - half <= 0.0 || self.slit_center_y + half >= grid.y_len() {
                return Err(Error::InvalidParameter("slits must lie inside the grid".into()));
            }
        }
        Ok(())
    }

    /// Grid columns `i0..i1` covered by the barrier.
    pub fn cell_range(&self, grid: &GridSpec) -> (usize, usize) {
        let to_cell = |x: f64| ((x / grid.dx).round().max(0.0) as usize).min(grid.nx);
        (to_cell(self.x_extent.0), to_cell(self.x_extent.1))
    }

    /// Thickness as resolved on the grid.
    pub fn resolved_thickness(&self, grid: &GridSpec) -> f64 {
        let (i0, i1) = self.cell_range(grid);
        (i1 - i0) as f64 * grid.dx
    }

    fn in_slit(&self, y: f64) -> bool {
        let half_w = self.slit_width / 2.0;
        let c1 = self.slit_center_y - self.slit_separation / 2.0;
        let c2 = self.slit_center_y + self.slit_separation / 2.0;
        (y - c1).abs() < half_w || (y - c2).abs() < half_w
    }

    pub fn potential(&self, grid: &GridSpec) -> Array2<f64> {
        let (i0, i1) = self.cell_range(grid);
        Array2::from_shape_fn((grid.nx, grid.ny), |(ix, iy)| {
            let inside = ix >= i0 && ix < i1;
            match self.kind {
                BarrierKind::None => 0.0,
                BarrierKind::Rectangular if inside => self.height,
                BarrierKind::DoubleSlit if inside && !self.in_slit(grid.y(iy)) => self.height,
                _ => 0.0,
            }
        })
    }
}

/// Gaussian packet `ψ ∝ exp(−|r − r0|²/(4σ²)) · exp(i k·r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: (f64, f64),
    pub width: f64,
    pub momentum: (f64, f64),
}

impl PacketSpec {
    /// Mean kinetic energy `|k|² + 2·(1/(2σ))²` of the packet (both axes'
    /// momentum spread included).
    pub fn mean_energy(&self) -> f64 {
        let spread = 1.0 / (2.0 * self.width);
        self.momentum.0.powi(2) + self.momentum.1.powi(2) + 2.0 * spread * spread
    }

    /// Mean energy of the motion along `x` alone, `kx² + 1/(4σ²)`, which is
    /// what a barrier uniform in `y` sees.
    pub fn mean_x_energy(&self) -> f64 {
        let spread = 1.0 / (2.0 * self.width);
        self.momentum.0.powi(2) + spread * spread
    }
}

/// Complex amplitude on the grid plus its (static) potential.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub psi: Array2<Complex64>,
    pub potential: Array2<f64>,
    pub time: f64,
}

impl WaveField {
    /// `Σ|ψ|² dx dy`.
    pub fn norm_squared(&self, grid: &GridSpec) -> f64 {
        self.psi.iter().map(Complex64::norm_sqr).sum::<f64>() * grid.cell_area()
    }

    pub fn with_potential(mut self, potential: Array2<f64>) -> Result<Self> {
        if potential.dim() != self.psi.dim() {
            return Err(Error::DimensionMismatch {
                context: "potential",
                expected: self.psi.len(),
                actual: potential.len(),
            });
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        self.potential = potential;
        Ok(self)
    }
}

pub fn init_gaussian_packet(grid: &GridSpec, packet: &PacketSpec) -> Result<WaveField> {
    grid.validate()?;
    let sigma = packet.width;
    if !(sigma.is_finite() && sigma > 2.0 * grid.dx.max(grid.dy)) {
        return Err(Error::InvalidParameter(format!(
            "packet width {sigma} must exceed two grid cells ({})",
            2.0 * grid.dx.max(grid.dy)
        )));
    }
    let (x0, y0) = packet.center;
    let margin = 4.0 * sigma;
    if x0 < margin || y0 < margin || grid.x_len() - x0 < margin || grid.y_len() - y0 < margin {
        return Err(Error::InvalidParameter(format!(
            "packet center ({x0}, {y0}) closer than 4σ = {margin} to the boundary"
        )));
    }
    let (kx, ky) = packet.momentum;
    let mut psi = Array2::from_shape_fn((grid.nx, grid.ny), |(ix, iy)| {
        if ix == 0 || iy == 0 || ix == grid.nx - 1 || iy == grid.ny - 1 {
            return Complex64::new(0.0, 0.0);
        }
        let (x, y) = (grid.x(ix), grid.y(iy));
        let r2 = (x - x0).powi(2) + (y - y0).powi(2);
        let envelope = (-r2 / (4.0 * sigma * sigma)).exp();
        Complex64::from_polar(envelope, kx * x + ky * y)
    });
    let norm = (psi.iter().map(Complex64::norm_sqr).sum::<f64>() * grid.cell_area()).sqrt();
    psi.mapv_inplace(|z| z / norm);
    Ok(WaveField {
        psi,
        potential: Array2::zeros((grid.nx, grid.ny)),
        time: 0.0,
    })
}

/// `|ψ|²` on every cell.
pub fn probability_density(field: &WaveField) -> Array2<f64> {
    field.psi.mapv(|z| z.norm_sqr())
}

/// How the two directional Crank–Nicolson factors are composed into one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// `C_x(dt/2) · C_y(dt) · C_x(dt/2)` with Cayley factors
    /// `C(τ) = (1 + iτA/2)⁻¹(1 − iτA/2)`. Every factor is unitary, so the norm
    /// is conserved to round-off even where the barrier makes `A_x` and `A_y`
    /// non-commuting; the symmetric order makes it time-reversible and
    /// second-order accurate.
    #[default]
    Strang,
    /// Classic Peaceman–Rachford:
    /// `(1 + i·dt/2·A_x)ψ* = (1 − i·dt/2·A_y)ψⁿ`,
    /// `(1 + i·dt/2·A_y)ψⁿ⁺¹ = (1 − i·dt/2·A_x)ψ*`.
    /// Exactly unitary only when `A_x` and `A_y` commute (no barrier).
    PeacemanRachford,
}

/// Time stepper owning its grid and potential.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: GridSpec,
    splitting: Splitting,
    steps_taken: usize,
}

#[derive(Clone, Copy)]
enum Dir {
    X,
    Y,
}

impl Propagator {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Self::with_splitting(grid, Splitting::default())
    }

    pub fn with_splitting(grid: GridSpec, splitting: Splitting) -> Result<Self> {
        grid.validate()?;
        Ok(Self {
            grid,
            splitting,
            steps_taken: 0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Advances `field` by one `dt` (negative `dt` runs backwards).
    pub fn step(&mut self, field: &mut WaveField) -> Result<()> {
        let dt = self.grid.dt;
        if field.psi.dim() != (self.grid.nx, self.grid.ny) || field.potential.dim() != field.psi.dim() {
            return Err(Error::DimensionMismatch {
                context: "wave field",
                expected: self.grid.nx * self.grid.ny,
                actual: field.psi.len(),
            });
        }
        match self.splitting {
            Splitting::Strang => {
                self.cayley(field, Dir::X, dt / 2.0);
                self.cayley(field, Dir::Y, dt);
                self.cayley(field, Dir::X, dt / 2.0);
            }
            Splitting::PeacemanRachford => {
                let half = dt / 2.0;
                self.explicit(field, Dir::Y, half);
                self.implicit(field, Dir::X, half);
                self.explicit(field, Dir::X, half);
                self.implicit(field, Dir::Y, half);
            }
        }
        field.time += dt;
        self.steps_taken += 1;
        if field.psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Instability {
                step: self.steps_taken,
                time: field.time,
                detail: "non-finite amplitude".into(),
            });
        }
        Ok(())
    }

    fn spacing(&self, dir: Dir) -> f64 {
        match dir {
            Dir::X => self.grid.dx,
            Dir::Y => self.grid.dy,
        }
    }

    /// Lines along `dir` (interior lines only; the wall lines stay zero).
    fn for_each_line<F>(&self, field: &mut WaveField, dir: Dir, f: F)
    where
        F: Fn(ArrayViewMut1<'_, Complex64>, ArrayView1<'_, f64>) + Sync + Send,
    {
        // lanes along axis 0 are x-lines (fixed iy), along axis 1 y-lines
        let axis = match dir {
            Dir::X => Axis(0),
            Dir::Y => Axis(1),
        };
        let n_lines = field.psi.len_of(Axis(1 - axis.index()));
        let psi = field.psi.lanes_mut(axis);
        let pot = field.potential.lanes(axis);
        let mut lines: Vec<_> = psi.into_iter().zip(pot).collect();
        use rayon::prelude::*;
        lines.par_drain(1..n_lines - 1).for_each(|(line, v)| f(line, v));
    }

    /// `ψ ← (1 + iτA/2)⁻¹ (1 − iτA/2) ψ` along every line of `dir`.
    fn cayley(&self, field: &mut WaveField, dir: Dir, tau: f64) {
        let h = self.spacing(dir);
        self.for_each_line(field, dir, |mut line, v| {
            let rhs = apply_line(line.view(), v, h, tau / 2.0);
            let sol = solve_line(&rhs, v, h, tau / 2.0);
            line.assign(&ArrayView1::from(&sol[..]));
        });
    }

    /// `ψ ← (1 − iθA) ψ` along `dir`.
    fn explicit(&self, field: &mut WaveField, dir: Dir, theta: f64) {
        let h = self.spacing(dir);
        self.for_each_line(field, dir, |mut line, v| {
            let out = apply_line(line.view(), v, h, theta);
            line.assign(&ArrayView1::from(&out[..]));
        });
    }

    /// `ψ ← (1 + iθA)⁻¹ ψ` along `dir`.
    fn implicit(&self, field: &mut WaveField, dir: Dir, theta: f64) {
        let h = self.spacing(dir);
        self.for_each_line(field, dir, |mut line, v| {
            let rhs: Vec<Complex64> = line.iter().copied().collect();
            let sol = solve_line(&rhs, v, h, theta);
            line.assign(&ArrayView1::from(&sol[..]));
        });
    }
}

/// `(1 − iθA)ψ` on one line, `A = −∂² + V/2` with zero end values.
fn apply_line(psi: ArrayView1<'_, Complex64>, v: ArrayView1<'_, f64>, h: f64, theta: f64) -> Vec<Complex64> {
    let n = psi.len();
    let inv_h2 = 1.0 / (h * h);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        let a_psi = (2.0 * psi[i] - psi[i - 1] - psi[i + 1]) * inv_h2 + psi[i] * (0.5 * v[i]);
        out[i] = psi[i] - I * theta * a_psi;
    }
    out
}

/// Solves `(1 + iθA)ψ = rhs` on one line with the Thomas algorithm; the
/// system is strictly diagonally dominant, so no pivoting is needed.
fn solve_line(rhs: &[Complex64], v: ArrayView1<'_, f64>, h: f64, theta: f64) -> Vec<Complex64> {
    let n = rhs.len();
    let inv_h2 = 1.0 / (h * h);
    let off = -I * theta * inv_h2;
    let m = n - 2;
    let mut c_prime = vec![Complex64::new(0.0, 0.0); m];
    let mut d_prime = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..m {
        let i = k + 1;
        let diag = Complex64::new(1.0, theta * (2.0 * inv_h2 + 0.5 * v[i]));
        let (denom, d) = if k == 0 {
            (diag, rhs[i])
        } else {
            (diag - off * c_prime[k - 1], rhs[i] - off * d_prime[k - 1])
        };
        c_prime[k] = off / denom;
        d_prime[k] = d / denom;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..m).rev() {
        let next = if k + 1 < m {
            out[k + 2]
        } else {
            Complex64::new(0.0, 0.0)
        };
        out[k + 1] = d_prime[k] - c_prime[k] * next;
    }
    out
}

/// One step with the default splitting.
pub fn step(field: &WaveField, grid: &GridSpec) -> Result<WaveField> {
    let mut next = field.clone();
    Propagator::new(*grid)?.step(&mut next)?;
    Ok(next)
}

/// Probability mass left of, inside, and right of the barrier's x-extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionProbabilities {
    pub reflected: f64,
    pub barrier: f64,
    pub transmitted: f64,
}

impl RegionProbabilities {
    pub fn total(&self) -> f64 {
        self.reflected + self.barrier + self.transmitted
    }
}

pub fn region_probabilities(field: &WaveField, grid: &GridSpec, barrier: &BarrierGeometry) -> RegionProbabilities {
    let (i0, i1) = barrier.cell_range(grid);
    let mut sums = [0.0; 3];
    for (ix, row) in field.psi.axis_iter(Axis(0)).enumerate() {
        let region = if ix < i0 {
            0
        } else if ix < i1 {
            1
        } else {
            2
        };
        sums[region] += row.iter().map(Complex64::norm_sqr).sum::<f64>();
    }
    let area = grid.cell_area();
    RegionProbabilities {
        reflected: sums[0] * area,
        barrier: sums[1] * area,
        transmitted: sums[2] * area,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    /// `|ψ|²`; absent when the run was asked not to keep densities.
    pub density: Option<Array2<f64>>,
    pub regions: RegionProbabilities,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub grid: GridSpec,
    pub barrier: BarrierGeometry,
    pub packet: PacketSpec,
    pub snapshots: Vec<Snapshot>,
    pub final_field: WaveField,
}

impl SimulationRun {
    /// Largest density value over all kept snapshots (the PGM scale).
    pub fn max_density(&self) -> f64 {
        self.snapshots
            .iter()
            .filter_map(|s| s.density.as_ref())
            .flat_map(|d| d.iter())
            .fold(0.0, |m: f64, &x| m.max(x))
    }
}

/// Runs `grid.n_steps` steps, recording a snapshot at step 0, every
/// `grid.snapshot_stride` steps, and at the final step.
pub fn run_simulation(grid: &GridSpec, barrier: &BarrierGeometry, packet: &PacketSpec) -> Result<SimulationRun> {
    run_simulation_with(grid, barrier, packet, Splitting::default(), true)
}

pub fn run_simulation_with(
    grid: &GridSpec,
    barrier: &BarrierGeometry,
    packet: &PacketSpec,
    splitting: Splitting,
    keep_density: bool,
) -> Result<SimulationRun> {
    grid.validate()?;
    barrier.validate(grid)?;
    let mut field = init_gaussian_packet(grid, packet)?.with_potential(barrier.potential(grid))?;
    let mut prop = Propagator::with_splitting(*grid, splitting)?;
    let snap = |field: &WaveField, step: usize| Snapshot {
        step,
        time: field.time,
        density: keep_density.then(|| probability_density(field)),
        regions: region_probabilities(field, grid, barrier),
        norm: field.norm_squared(grid),
    };
    let mut snapshots = vec![snap(&field, 0)];
    for s in 1..=grid.n_steps {
        prop.step(&mut field)?;
        if s % grid.snapshot_stride == 0 || s == grid.n_steps {
            snapshots.push(snap(&field, s));
        }
    }
    Ok(SimulationRun {
        grid: *grid,
        barrier: *barrier,
        packet: *packet,
        snapshots,
        final_field: field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_grid() -> GridSpec {
        GridSpec {
            nx: 96,
            ny: 80,
            dx: 0.1,
            dy: 0.1,
            dt: 0.005,
            n_steps: 50,
            snapshot_stride: 10,
        }
    }

    fn centered_packet(grid: &GridSpec, k: (f64, f64)) -> PacketSpec {
        PacketSpec {
            center: (grid.x_len() / 2.0, grid.y_len() / 2.0),
            width: 0.8,
            momentum: k,
        }
    }

    #[test]
    fn packet_is_normalized_with_zero_walls() {
        let g = small_grid();
        let f = init_gaussian_packet(&g, &centered_packet(&g, (2.0, -1.0))).unwrap();
        assert!((f.norm_squared(&g) - 1.0).abs() < 1e-12);
        for ix in 0..g.nx {
            assert_eq!(f.psi[[ix, 0]].norm(), 0.0);
            assert_eq!(f.psi[[ix, g.ny - 1]].norm(), 0.0);
        }
    }

    #[test]
    fn packet_validation() {
        let g = small_grid();
        let too_thin = PacketSpec {
            width: 0.15,
            ..centered_packet(&g, (0.0, 0.0))
        };
        assert!(init_gaussian_packet(&g, &too_thin).is_err());
        let near_wall = PacketSpec {
            center: (1.0, 4.0),
            ..centered_packet(&g, (0.0, 0.0))
        };
        assert!(init_gaussian_packet(&g, &near_wall).is_err());
        assert!(init_gaussian_packet(&GridSpec { nx: 8, ..g }, &centered_packet(&g, (0.0, 0.0))).is_err());
    }

    #[test]
    fn motionless_packet_is_real_and_symmetric() {
        let g = GridSpec {
            nx: 81,
            ny: 81,
            ..small_grid()
        };
        let f = init_gaussian_packet(
            &g,
            &PacketSpec {
                center: (4.0, 4.0),
                width: 0.8,
                momentum: (0.0, 0.0),
            },
        )
        .unwrap();
        assert!(f.psi.iter().all(|z| z.im == 0.0 && z.re >= 0.0));
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                assert_relative_eq!(f.psi[[ix, iy]].re, f.psi[[g.nx - 1 - ix, iy]].re, epsilon = 1e-15);
                assert_relative_eq!(f.psi[[ix, iy]].re, f.psi[[ix, g.ny - 1 - iy]].re, epsilon = 1e-15);
            }
        }
        let d = probability_density(&f);
        let peak = d
            .indexed_iter()
            .fold(((0, 0), 0.0), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        assert_eq!(peak.0, (40, 40));
    }

    #[test]
    fn density_is_gauge_invariant() {
        let g = small_grid();
        let f = init_gaussian_packet(&g, &centered_packet(&g, (1.0, 0.5))).unwrap();
        let mut rotated = f.clone();
        let phase = Complex64::from_polar(1.0, 0.7);
        rotated.psi.mapv_inplace(|z| z * phase);
        let (a, b) = (probability_density(&f), probability_density(&rotated));
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-15));
        assert!((a.sum() * g.cell_area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thomas_solver_inverts_the_line_operator() {
        let n = 12;
        let v = ndarray::Array1::from_shape_fn(n, |i| if (4..7).contains(&i) { 3.0 } else { 0.0 });
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(i as f64, -(i as f64).sqrt())
                }
            })
            .collect();
        // (1 + iθA)x computed directly, then solved back
        let (h, theta) = (0.1, 0.01);
        let ax = apply_line(ArrayView1::from(&x[..]), v.view(), h, -theta);
        let back = solve_line(&ax, v.view(), h, theta);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn every_step_conserves_norm_and_walls() {
        let g = small_grid();
        let barrier = BarrierGeometry::rectangular(5.0, 5.0, 5.5);
        let packet = PacketSpec {
            center: (3.5, 4.0),
            width: 0.8,
            momentum: (3.0, 0.0),
        };
        let mut f = init_gaussian_packet(&g, &packet)
            .unwrap()
            .with_potential(barrier.potential(&g))
            .unwrap();
        let mut prop = Propagator::new(g).unwrap();
        for _ in 0..100 {
            let before = f.norm_squared(&g);
            prop.step(&mut f).unwrap();
            assert!((f.norm_squared(&g) - before).abs() < 1e-10);
            for ix in 0..g.nx {
                assert_eq!(f.psi[[ix, 0]].norm(), 0.0);
                assert_eq!(f.psi[[ix, g.ny - 1]].norm(), 0.0);
            }
            for iy in 0..g.ny {
                assert_eq!(f.psi[[0, iy]].norm(), 0.0);
                assert_eq!(f.psi[[g.nx - 1, iy]].norm(), 0.0);
            }
        }
    }

    #[test]
    fn peaceman_rachford_is_unitary_only_without_a_barrier() {
        let g = small_grid();
        let packet = PacketSpec {
            center: (4.4, 4.0),
            width: 0.8,
            momentum: (3.0, 0.0),
        };
        let drift = |barrier: BarrierGeometry| {
            let mut f = init_gaussian_packet(&g, &packet)
                .unwrap()
                .with_potential(barrier.potential(&g))
                .unwrap();
            let mut prop = Propagator::with_splitting(g, Splitting::PeacemanRachford).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..60 {
                let before = f.norm_squared(&g);
                prop.step(&mut f).unwrap();
                worst = worst.max((f.norm_squared(&g) - before).abs());
            }
            worst
        };
        assert!(drift(BarrierGeometry::none(5.0, 5.5)) < 1e-12);
        assert!(drift(BarrierGeometry::rectangular(20.0, 5.0, 5.5)) > 1e-8);
    }

    #[test]
    fn step_helper_matches_propagator() {
        let g = small_grid();
        let f = init_gaussian_packet(&g, &centered_packet(&g, (1.0, 1.0))).unwrap();
        let a = step(&f, &g).unwrap();
        let mut b = f.clone();
        Propagator::new(g).unwrap().step(&mut b).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.time, g.dt);
    }

    #[test]
    fn barrier_geometry() {
        let g = small_grid();
        let rect = BarrierGeometry::rectangular(2.0, 5.0, 6.0);
        assert_eq!(rect.cell_range(&g), (50, 60));
        assert_relative_eq!(rect.resolved_thickness(&g), 1.0, epsilon = 1e-12);
        let v = rect.potential(&g);
        assert_eq!(v[[49, 3]], 0.0);
        assert_eq!(v[[50, 3]], 2.0);
        assert_eq!(v[[60, 3]], 0.0);
        let slits = BarrierGeometry::double_slit(9.0, 5.0, 5.3, 0.6, 2.0, 4.0);
        slits.validate(&g).unwrap();
        let v = slits.potential(&g);
        assert_eq!(v[[51, 30]], 0.0); // y = 3.0, slit center
        assert_eq!(v[[51, 50]], 0.0); // y = 5.0
        assert_eq!(v[[51, 40]], 9.0); // y = 4.0, between the slits
        assert!(BarrierGeometry::rectangular(1.0, 6.0, 5.0).validate(&g).is_err());
        assert!(BarrierGeometry::rectangular(-1.0, 5.0, 6.0).validate(&g).is_err());
        assert!(BarrierGeometry::double_slit(9.0, 5.0, 5.3, 0.6, 0.5, 4.0)
            .validate(&g)
            .is_err());
    }

    #[test]
    fn run_records_snapshots_with_conserved_regions() {
        let g = small_grid();
        let run = run_simulation(
            &g,
            &BarrierGeometry::rectangular(4.0, 5.0, 5.4),
            &PacketSpec {
                center: (3.5, 4.0),
                width: 0.8,
                momentum: (2.5, 0.0),
            },
        )
        .unwrap();
        let steps: Vec<usize> = run.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 30, 40, 50]);
        for s in &run.snapshots {
            assert!((s.regions.total() - 1.0).abs() < 1e-6);
            assert!(s.regions.reflected >= 0.0 && s.regions.barrier >= 0.0 && s.regions.transmitted >= 0.0);
        }
        assert!(run.max_density() > 0.0);
    }
}
