use rayon::prelude::*;

use super::{DampingProfile, SolverError, TimeSpec};
use crate::scene::{GridSpec, MediumParams, ObstacleMask, SourceTap};

// Rows handed to one rayon task at minimum; keeps tiny grids from paying
// scheduling overhead per row.
const MIN_ROWS_PER_TASK: usize = 8;

/// Pressure and the two staggered velocity components.
///
/// All arrays are x-major: `p[i·ny + j]`, `vx[i·ny + j]` for the face
/// between cells `i` and `i+1`, `vy[i·(ny−1) + j]` for the face between
/// cells `j` and `j+1`. Faces on the outer boundary are not stored; they
/// are rigid and hold zero velocity.
///
/// Inside the absorbing layer pressure is carried as two parts driven by
/// the x and y velocity gradients; `px` holds the x part there and the y
/// part is `p − px`. Outside the layer `px` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    nx: usize,
    ny: usize,
    pub p: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub px: Vec<f64>,
    /// Pressure is at time `step · dt`.
    pub step: u64,
}

impl FieldState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            p: vec![0.0; nx * ny],
            vx: vec![0.0; (nx - 1) * ny],
            vy: vec![0.0; nx * (ny - 1)],
            px: vec![0.0; nx * ny],
            step: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn pressure(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.ny + j]
    }

    pub fn pressure_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.p[i * self.ny + j]
    }

    pub fn vx(&self, i: usize, j: usize) -> f64 {
        self.vx[i * self.ny + j]
    }

    pub fn vy(&self, i: usize, j: usize) -> f64 {
        self.vy[i * (self.ny - 1) + j]
    }

    /// `Σ p²·ds²/(2ρc²) + Σ ρ·|v|²·ds²/2`.
    pub fn energy(&self, medium: &MediumParams, ds: f64) -> f64 {
        let area = ds * ds;
        let potential: f64 =
            self.p.iter().map(|v| v * v).sum::<f64>() * area / (2.0 * medium.rho0 * medium.c * medium.c);
        let kinetic: f64 = self.vx.iter().chain(&self.vy).map(|v| v * v).sum::<f64>() * medium.rho0 * area / 2.0;
        potential + kinetic
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.vx).chain(&self.vy).all(|v| v.is_finite())
    }
}

/// Precomputed update coefficients for one grid, mask, damping profile and
/// time step.
#[derive(Debug, Clone)]
pub struct Stepper {
    nx: usize,
    ny: usize,
    /// dt / (ρ·ds)
    velocity_coef: f64,
    /// ρ·c²·dt / ds
    pressure_coef: f64,
    decay_cell_x: Vec<f64>,
    decay_cell_y: Vec<f64>,
    decay_face_x: Vec<f64>,
    decay_face_y: Vec<f64>,
    /// 1 where both cells sharing the face are free.
    open_x: Vec<u8>,
    open_y: Vec<u8>,
    source: Vec<SourceTap>,
    /// Rows `j` in this range have no y damping and two stored y-faces.
    undamped_j: std::ops::Range<usize>,
    zeros: Vec<f64>,
}

impl Stepper {
    pub fn new(
        grid: &GridSpec,
        medium: &MediumParams,
        time: &TimeSpec,
        mask: &ObstacleMask,
        damping: &DampingProfile,
        source: &[SourceTap],
    ) -> Result<Self, SolverError> {
        let (nx, ny) = (grid.nx, grid.ny);
        if nx < 2 || ny < 2 {
            return Err(SolverError::InvalidParameter(format!("grid must be at least 2x2, got {nx}x{ny}")));
        }
        if mask.shape() != (nx, ny) || damping.sigma_x.len() != nx || damping.sigma_y.len() != ny {
            return Err(SolverError::InvalidParameter("mask or damping profile does not match grid shape".into()));
        }
        let dt = time.dt;
        let decay = |s: &[f64]| s.iter().map(|sigma| (-sigma * dt).exp()).collect::<Vec<_>>();
        let mut open_x = vec![0u8; (nx - 1) * ny];
        for i in 0..nx - 1 {
            for j in 0..ny {
                open_x[i * ny + j] = mask.get(i, j) & mask.get(i + 1, j);
            }
        }
        let mut open_y = vec![0u8; nx * (ny - 1)];
        for i in 0..nx {
            for j in 0..ny - 1 {
                open_y[i * (ny - 1) + j] = mask.get(i, j) & mask.get(i, j + 1);
            }
        }
        for tap in source {
            if tap.index.0 >= nx || tap.index.1 >= ny {
                return Err(SolverError::InvalidParameter(format!("source tap {:?} outside grid", tap.index)));
            }
        }
        Ok(Self {
            nx,
            ny,
            velocity_coef: dt / (medium.rho0 * grid.ds),
            pressure_coef: medium.rho0 * medium.c * medium.c * dt / grid.ds,
            decay_cell_x: decay(&damping.sigma_x),
            decay_cell_y: decay(&damping.sigma_y),
            decay_face_x: decay(&damping.sigma_x_faces),
            decay_face_y: decay(&damping.sigma_y_faces),
            open_x,
            open_y,
            source: source.to_vec(),
            undamped_j: {
                let lo = damping.sigma_y.iter().position(|&s| s == 0.0).unwrap_or(ny).max(1);
                let hi = damping.sigma_y.iter().rposition(|&s| s == 0.0).map_or(0, |k| k + 1).min(ny - 1);
                lo..hi.max(lo)
            },
            zeros: vec![0.0; ny],
        })
    }

    pub fn new_state(&self) -> FieldState {
        FieldState::zeros(self.nx, self.ny)
    }

    /// Advances the fields by one time step.
    ///
    /// Order: velocity update from the pressure gradient, PML decay, rigid
    /// faces forced to zero, pressure decay and update from the velocity
    /// divergence, then additive source injection over the footprint.
    /// Each velocity component decays with the ramp along its own axis;
    /// in the layer the two pressure parts do the same.
    pub fn step(&self, state: &mut FieldState, source_sample: f64) -> Result<(), SolverError> {
        assert_eq!(state.shape(), (self.nx, self.ny), "state shape mismatch");
        let (nx, ny) = (self.nx, self.ny);
        let kv = self.velocity_coef;
        let kp = self.pressure_coef;
        let p = &state.p;

        state.vx.par_chunks_mut(ny).with_min_len(MIN_ROWS_PER_TASK).enumerate().for_each(|(i, row)| {
            let p0 = &p[i * ny..(i + 1) * ny];
            let p1 = &p[(i + 1) * ny..(i + 2) * ny];
            let open = &self.open_x[i * ny..(i + 1) * ny];
            let dx = self.decay_face_x[i];
            for j in 0..ny {
                let v = (row[j] - kv * (p1[j] - p0[j])) * dx;
                row[j] = v * f64::from(open[j]);
            }
        });

        let nyf = ny - 1;
        state.vy.par_chunks_mut(nyf).with_min_len(MIN_ROWS_PER_TASK).enumerate().for_each(|(i, row)| {
            let pr = &p[i * ny..(i + 1) * ny];
            let open = &self.open_y[i * nyf..(i + 1) * nyf];
            for j in 0..nyf {
                let v = (row[j] - kv * (pr[j + 1] - pr[j])) * self.decay_face_y[j];
                row[j] = v * f64::from(open[j]);
            }
        });

        let vx = &state.vx;
        let vy = &state.vy;
        let finite = state
            .p
            .par_chunks_mut(ny)
            .zip(state.px.par_chunks_mut(ny))
            .with_min_len(MIN_ROWS_PER_TASK)
            .enumerate()
            .map(|(i, (row, px_row))| {
                let ex = self.decay_cell_x[i];
                let vy_row = &vy[i * nyf..(i + 1) * nyf];
                let right = if i + 1 < nx { &vx[i * ny..(i + 1) * ny] } else { &self.zeros[..] };
                let left = if i > 0 { &vx[(i - 1) * ny..i * ny] } else { &self.zeros[..] };
                let mut ok = true;
                let fast = if ex == 1.0 { self.undamped_j.clone() } else { 0..0 };
                for j in fast.clone() {
                    let v = row[j] - kp * (right[j] - left[j] + vy_row[j] - vy_row[j - 1]);
                    ok &= v.is_finite();
                    row[j] = v;
                }
                for j in (0..fast.start).chain(fast.end..ny) {
                    let div_x = right[j] - left[j];
                    let up = if j < nyf { vy_row[j] } else { 0.0 };
                    let down = if j > 0 { vy_row[j - 1] } else { 0.0 };
                    let ey = self.decay_cell_y[j];
                    let v = if ex == 1.0 && ey == 1.0 {
                        row[j] - kp * (div_x + up - down)
                    } else {
                        let x_part = px_row[j] * ex - kp * div_x;
                        let y_part = (row[j] - px_row[j]) * ey - kp * (up - down);
                        px_row[j] = x_part;
                        x_part + y_part
                    };
                    ok &= v.is_finite();
                    row[j] = v;
                }
                ok
            })
            .reduce(|| true, |a, b| a && b);

        for tap in &self.source {
            state.p[tap.index.0 * ny + tap.index.1] += source_sample * tap.weight;
        }
        state.step += 1;
        if !finite || !source_sample.is_finite() {
            return Err(SolverError::Unstable { step: state.step });
        }
        Ok(())
    }
}
