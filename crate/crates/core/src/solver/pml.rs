use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::scene::{GridSpec, MediumParams};

/// Polynomial grading order of the damping ramp.
pub const PML_GRADING_ORDER: i32 = 2;

/// Per-axis damping ramps of the perfectly matched layer.
///
/// The total damping at a location is `σx + σy`; the solver applies each
/// ramp only to the field parts moving along its axis, which keeps the
/// layer matched at oblique incidence. Ramps are sampled at cell
/// centers and, for the staggered velocity components, at the faces between
/// neighbouring cells. Both axes are mirror-symmetric: cell `i` sits at
/// depth `n_pml − i` on the low side and `i − (n − 1 − n_pml)` on the high
/// side, so the outermost cells get `σmax` and cells with
/// `n_pml ≤ i ≤ n − 1 − n_pml` get zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingProfile {
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
    /// At the `nx − 1` interior x-faces.
    pub sigma_x_faces: Vec<f64>,
    /// At the `ny − 1` interior y-faces.
    pub sigma_y_faces: Vec<f64>,
    pub n_pml: usize,
    pub sigma_max: f64,
}

/// Peak damping for a graded layer with the given normal-incidence
/// reflection target: `−(m+1)·c·ln(R0) / (2·n_pml·ds)`.
pub fn sigma_max(n_pml: usize, ds: f64, c: f64, target_reflection: f64) -> f64 {
    -((PML_GRADING_ORDER + 1) as f64) * c * target_reflection.ln() / (2.0 * n_pml as f64 * ds)
}

fn ramp(n: usize, n_pml: usize, sigma_max: f64, offset: f64) -> Vec<f64> {
    let inner_hi = n as f64 - 1.0 - n_pml as f64;
    (0..n)
        .map(|k| {
            let x = k as f64 + offset;
            let depth = (n_pml as f64 - x).max(x - inner_hi).max(0.0);
            sigma_max * (depth / n_pml as f64).powi(PML_GRADING_ORDER)
        })
        .collect()
}

impl DampingProfile {
    /// No absorption anywhere.
    pub fn none(grid: &GridSpec) -> Self {
        Self {
            sigma_x: vec![0.0; grid.nx],
            sigma_y: vec![0.0; grid.ny],
            sigma_x_faces: vec![0.0; grid.nx.saturating_sub(1)],
            sigma_y_faces: vec![0.0; grid.ny.saturating_sub(1)],
            n_pml: 0,
            sigma_max: 0.0,
        }
    }

    /// Total damping `σx(i) + σy(j)` at cell `(i, j)`.
    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma_x[i] + self.sigma_y[j]
    }
}

pub fn build_pml(
    grid: &GridSpec,
    n_pml: usize,
    medium: &MediumParams,
    target_reflection: f64,
) -> Result<DampingProfile, SolverError> {
    if 2 * n_pml >= grid.nx.min(grid.ny) {
        return Err(SolverError::PmlTooThick { n_pml, nx: grid.nx, ny: grid.ny });
    }
    if n_pml == 0 {
        return Ok(DampingProfile::none(grid));
    }
    if !(target_reflection > 0.0 && target_reflection < 1.0) {
        return Err(SolverError::InvalidParameter(format!(
            "PML reflection target must be in (0, 1), got {target_reflection}"
        )));
    }
    let smax = sigma_max(n_pml, grid.ds, medium.c, target_reflection);
    let faces = |n: usize| {
        let mut f = ramp(n, n_pml, smax, 0.5);
        f.truncate(n - 1);
        f
    };
    Ok(DampingProfile {
        sigma_x: ramp(grid.nx, n_pml, smax, 0.0),
        sigma_y: ramp(grid.ny, n_pml, smax, 0.0),
        sigma_x_faces: faces(grid.nx),
        sigma_y_faces: faces(grid.ny),
        n_pml,
        sigma_max: smax,
    })
}
