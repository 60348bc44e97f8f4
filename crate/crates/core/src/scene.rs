//! Scene description, grid derivation, obstacle rasterization and probe
//! placement.
//!
//! Coordinates are meters with the origin at the lower-left corner of the
//! domain. Cell `(i, j)` covers `[i·ds, (i+1)·ds] × [j·ds, (j+1)·ds]`;
//! its center is where pressure lives. Listener orientation is a
//! counter-clockwise angle from the +y axis, so orientation 0 faces +y and
//! has its left ear toward −x.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{SignalError, SweepSpec};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene syntax error: {0}")]
    Syntax(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("probe placement: {0}")]
    Placement(String),
}

impl From<SignalError> for SceneError {
    fn from(e: SignalError) -> Self {
        SceneError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Ambient density (kg/m³).
    pub rho0: f64,
    /// Speed of sound (m/s).
    pub c: f64,
}

impl Default for MediumParams {
    fn default() -> Self {
        Self { rho0: 1.2, c: 343.0 }
    }
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect { x_min: v[0], y_min: v[1], x_max: v[2], y_max: v[3] }
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x_min, r.y_min, r.x_max, r.y_max]
    }
}

impl Rect {
    /// Closed containment test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

fn default_mic_spacing() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerSpec {
    /// Identifier used in file names; defaults to `L<n>` (1-based).
    #[serde(default)]
    pub id: String,
    pub position: [f64; 2],
    /// Facing direction, radians counter-clockwise from +y.
    #[serde(default)]
    pub orientation: f64,
    /// Side length of the square microphone cluster (m).
    #[serde(default = "default_mic_spacing")]
    pub mic_spacing: f64,
}

/// Microphone slot within a listener cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MicLabel {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl MicLabel {
    pub const ALL: [MicLabel; 4] = [MicLabel::FrontLeft, MicLabel::FrontRight, MicLabel::RearLeft, MicLabel::RearRight];

    pub fn short(&self) -> &'static str {
        match self {
            MicLabel::FrontLeft => "FL",
            MicLabel::FrontRight => "FR",
            MicLabel::RearLeft => "RL",
            MicLabel::RearRight => "RR",
        }
    }

    pub fn from_short(s: &str) -> Option<MicLabel> {
        MicLabel::ALL.into_iter().find(|l| l.short() == s)
    }

    /// (forward, left) unit offsets of this slot in the listener frame.
    fn offsets(&self) -> (f64, f64) {
        match self {
            MicLabel::FrontLeft => (1.0, 1.0),
            MicLabel::FrontRight => (1.0, -1.0),
            MicLabel::RearLeft => (-1.0, 1.0),
            MicLabel::RearRight => (-1.0, -1.0),
        }
    }
}

impl ListenerSpec {
    /// Physical positions of the four cluster microphones, in
    /// [`MicLabel::ALL`] order.
    pub fn mic_positions(&self) -> [(MicLabel, [f64; 2]); 4] {
        let h = self.mic_spacing / 2.0;
        let (s, c) = self.orientation.sin_cos();
        let forward = [-s, c];
        let left = [-c, -s];
        MicLabel::ALL.map(|label| {
            let (f, l) = label.offsets();
            (
                label,
                [
                    self.position[0] + h * (f * forward[0] + l * left[0]),
                    self.position[1] + h * (f * forward[1] + l * left[1]),
                ],
            )
        })
    }
}

fn default_safety() -> f64 {
    0.99
}

fn default_pml_cells() -> usize {
    20
}

fn default_pml_reflection() -> f64 {
    1e-4
}

/// Numerical settings that may live in the scene file and be overridden on
/// the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Fraction of the CFL time-step bound actually used.
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_pml_cells")]
    pub pml_cells: usize,
    /// Target normal-incidence reflection coefficient of the PML.
    #[serde(default = "default_pml_reflection")]
    pub pml_reflection: f64,
    /// Impulse response length (s); defaults to twice the post-sweep tail.
    #[serde(default)]
    pub ir_length: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            safety: default_safety(),
            pml_cells: default_pml_cells(),
            pml_reflection: default_pml_reflection(),
            ir_length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    /// `(Lx, Ly)` in meters.
    pub domain: [f64; 2],
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    pub source: [f64; 2],
    #[serde(default)]
    pub listeners: Vec<ListenerSpec>,
    #[serde(default)]
    pub medium: MediumParams,
    /// Highest frequency the grid must resolve (Hz).
    pub f_max: f64,
    pub sweep: SweepSpec,
    /// Total simulated time (s).
    pub sim_duration: f64,
    #[serde(default)]
    pub simulation: SolverSettings,
}

/// Parses and validates a TOML scene description.
pub fn parse_scene(text: &str) -> Result<SceneConfig, SceneError> {
    let mut cfg: SceneConfig = toml::from_str(text).map_err(|e| SceneError::Syntax(e.message().to_string()))?;
    for (k, l) in cfg.listeners.iter_mut().enumerate() {
        if l.id.is_empty() {
            l.id = format!("L{}", k + 1);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |msg: String| Err(SceneError::Invalid(msg));
        let [lx, ly] = self.domain;
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return invalid(format!("domain size must be positive, got {lx} x {ly}"));
        }
        if !(self.medium.rho0 > 0.0 && self.medium.c > 0.0) {
            return invalid("medium rho0 and c must be positive".into());
        }
        self.sweep.validate()?;
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return invalid(format!("f_max must be positive, got {}", self.f_max));
        }
        if self.f_max < self.sweep.f1 {
            return invalid(format!("f_max {} Hz is below the sweep end frequency {} Hz", self.f_max, self.sweep.f1));
        }
        if !(self.sim_duration.is_finite() && self.sim_duration > 0.0) {
            return invalid(format!("sim_duration must be positive, got {}", self.sim_duration));
        }
        let s = &self.simulation;
        if !(s.safety > 0.0 && s.safety <= 1.0) {
            return invalid(format!("safety factor must be in (0, 1], got {}", s.safety));
        }
        if !(s.pml_reflection > 0.0 && s.pml_reflection < 1.0) {
            return invalid(format!("pml_reflection must be in (0, 1), got {}", s.pml_reflection));
        }
        if let Some(len) = s.ir_length {
            if !(len > 0.0) {
                return invalid(format!("ir_length must be positive, got {len}"));
            }
        }
        for (k, r) in self.obstacles.iter().enumerate() {
            let n = k + 1;
            if !(r.x_min < r.x_max && r.y_min < r.y_max) {
                return invalid(format!("obstacle {n} is degenerate"));
            }
            if r.x_min < 0.0 || r.y_min < 0.0 || r.x_max > lx || r.y_max > ly {
                return invalid(format!("obstacle {n} outside domain"));
            }
        }
        let strictly_inside = |p: [f64; 2]| p[0] > 0.0 && p[0] < lx && p[1] > 0.0 && p[1] < ly;
        let blocking = |p: [f64; 2]| self.obstacles.iter().position(|r| r.contains(p[0], p[1]));
        if !strictly_inside(self.source) {
            return invalid("source outside domain".into());
        }
        if let Some(k) = blocking(self.source) {
            return invalid(format!("source inside obstacle {}", k + 1));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.listeners {
            if !seen.insert(l.id.as_str()) {
                return invalid(format!("duplicate listener id {}", l.id));
            }
            if !(l.mic_spacing > 0.0) {
                return invalid(format!("listener {} mic_spacing must be positive", l.id));
            }
            if !strictly_inside(l.position) {
                return invalid(format!("listener {} outside domain", l.id));
            }
            if let Some(k) = blocking(l.position) {
                return invalid(format!("listener {} inside obstacle {}", l.id, k + 1));
            }
            for (label, p) in l.mic_positions() {
                if !strictly_inside(p) {
                    return invalid(format!("listener {} mic {} outside domain", l.id, label.short()));
                }
                if let Some(k) = blocking(p) {
                    return invalid(format!("listener {} mic {} inside obstacle {}", l.id, label.short(), k + 1));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial step (m), equal along both axes.
    pub ds: f64,
    pub nx: usize,
    pub ny: usize,
    /// Shortest resolved wavelength (m).
    pub lambda_min: f64,
}

/// Points per wavelength at `f_max`.
pub const POINTS_PER_WAVELENGTH: f64 = 10.0;

impl GridSpec {
    /// Grid with ten points per shortest wavelength covering `lx × ly`.
    pub fn for_domain(lx: f64, ly: f64, c: f64, f_max: f64) -> GridSpec {
        let lambda_min = c / f_max;
        let ds = lambda_min / POINTS_PER_WAVELENGTH;
        GridSpec { ds, nx: cells_along(lx, ds), ny: cells_along(ly, ds), lambda_min }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.ds, (j as f64 + 0.5) * self.ds]
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn snap(&self, p: [f64; 2]) -> (usize, usize) {
        let idx = |x: f64, n: usize| ((x / self.ds).floor().max(0.0) as usize).min(n - 1);
        (idx(p[0], self.nx), idx(p[1], self.ny))
    }
}

// A relative slack keeps exact multiples (10 m / 0.1 m) from gaining a cell
// to rounding noise.
fn cells_along(length: f64, ds: f64) -> usize {
    ((length / ds) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

pub fn build_grid(cfg: &SceneConfig) -> GridSpec {
    GridSpec::for_domain(cfg.domain[0], cfg.domain[1], cfg.medium.c, cfg.f_max)
}

/// Binary obstacle map, `0` for rigid cells and `1` for free ones, stored
/// x-major (`i * ny + j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstacleMask {
    nx: usize,
    ny: usize,
    cells: Vec<u8>,
}

impl ObstacleMask {
    pub fn free(nx: usize, ny: usize) -> Self {
        Self { nx, ny, cells: vec![1; nx * ny] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.ny + j]
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    pub fn set(&mut self, i: usize, j: usize, free: bool) {
        self.cells[i * self.ny + j] = free as u8;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.cells
    }

    pub fn obstacle_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 0).count()
    }

    /// Frees every cell inside a border `n` cells thick. Returns how many
    /// cells changed.
    pub fn clear_border(&mut self, n: usize) -> usize {
        let mut cleared = 0;
        for i in 0..self.nx {
            for j in 0..self.ny {
                let in_border = i < n || j < n || i + n >= self.nx || j + n >= self.ny;
                if in_border && !self.is_free(i, j) {
                    self.set(i, j, true);
                    cleared += 1;
                }
            }
        }
        cleared
    }

    /// Binary PGM (P5): black obstacles, white free cells, +y up.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.nx, self.ny)?;
        let mut row = vec![0u8; self.nx];
        for j in (0..self.ny).rev() {
            for (i, px) in row.iter_mut().enumerate() {
                *px = if self.is_free(i, j) { 255 } else { 0 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    /// Reads a mask written by [`ObstacleMask::write_pgm`]. Any nonzero
    /// pixel counts as free.
    pub fn read_pgm<R: Read>(mut input: R) -> std::io::Result<ObstacleMask> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        // Header: magic, width, height, maxval, each followed by whitespace.
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        pos += 1;
        if fields[0] != "P5" || fields[3] != "255" {
            return Err(bad("expected an 8-bit binary PGM"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PGM dimensions"));
        let (nx, ny) = (parse(&fields[1])?, parse(&fields[2])?);
        let pixels = bytes.get(pos..pos + nx * ny).ok_or_else(|| bad("truncated PGM data"))?;
        let mut mask = ObstacleMask::free(nx, ny);
        for (row, line) in pixels.chunks_exact(nx).enumerate() {
            let j = ny - 1 - row;
            for (i, &px) in line.iter().enumerate() {
                mask.set(i, j, px != 0);
            }
        }
        Ok(mask)
    }
}

/// Marks a cell as obstacle when its center lies inside any rectangle.
pub fn rasterize_obstacles(cfg: &SceneConfig, grid: &GridSpec) -> ObstacleMask {
    let mut mask = ObstacleMask::free(grid.nx, grid.ny);
    for r in &cfg.obstacles {
        // Only scan the index range the rectangle can touch.
        let lo = grid.snap([r.x_min, r.y_min]);
        let hi = grid.snap([r.x_max, r.y_max]);
        for i in lo.0.saturating_sub(1)..=(hi.0 + 1).min(grid.nx - 1) {
            for j in lo.1.saturating_sub(1)..=(hi.1 + 1).min(grid.ny - 1) {
                let [x, y] = grid.cell_center(i, j);
                if r.contains(x, y) {
                    mask.set(i, j, false);
                }
            }
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicProbe {
    pub label: MicLabel,
    pub index: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerProbes {
    pub id: String,
    /// In [`MicLabel::ALL`] order.
    pub mics: [MicProbe; 4],
}

impl ListenerProbes {
    pub fn mic(&self, label: MicLabel) -> &MicProbe {
        self.mics.iter().find(|m| m.label == label).expect("all labels present")
    }
}

/// One weighted cell of the source injection footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceTap {
    pub index: (usize, usize),
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLayout {
    pub source_index: (usize, usize),
    pub source_width_cells: usize,
    pub source_footprint: Vec<SourceTap>,
    pub listeners: Vec<ListenerProbes>,
    /// Free-standing single-point probes (validation receivers).
    #[serde(default)]
    pub points: Vec<(usize, usize)>,
}

/// Injection width in cells: a quarter wavelength or two cells, whichever
/// is larger.
pub fn source_width(grid: &GridSpec) -> usize {
    ((grid.lambda_min / (2.0 * grid.ds)).round() as usize).max(2)
}

/// Gaussian footprint with standard deviation `w·ds/2`, truncated at a
/// radius of `w` cells. The center tap has weight 1.
pub fn gaussian_footprint(grid: &GridSpec, center: (usize, usize), width: usize) -> Vec<SourceTap> {
    let sigma = width as f64 * grid.ds / 2.0;
    let w = width as isize;
    let mut taps = Vec::new();
    for di in -w..=w {
        for dj in -w..=w {
            let (i, j) = (center.0 as isize + di, center.1 as isize + dj);
            if i < 0 || j < 0 || i >= grid.nx as isize || j >= grid.ny as isize {
                continue;
            }
            if di * di + dj * dj > w * w {
                continue;
            }
            let d2 = ((di * di + dj * dj) as f64) * grid.ds * grid.ds;
            taps.push(SourceTap { index: (i as usize, j as usize), weight: (-d2 / (2.0 * sigma * sigma)).exp() });
        }
    }
    taps
}

pub fn point_footprint(center: (usize, usize)) -> Vec<SourceTap> {
    vec![SourceTap { index: center, weight: 1.0 }]
}

/// Snaps the source and every listener microphone onto grid cells and
/// checks they land on free cells outside the PML.
pub fn place_probes(cfg: &SceneConfig, grid: &GridSpec, mask: &ObstacleMask) -> Result<ProbeLayout, SceneError> {
    let n_pml = cfg.simulation.pml_cells;
    let check = |what: &str, idx: (usize, usize)| -> Result<(), SceneError> {
        if !mask.is_free(idx.0, idx.1) {
            return Err(SceneError::Placement(format!("{what} at cell ({}, {}) lands on an obstacle", idx.0, idx.1)));
        }
        let outside_pml = idx.0 >= n_pml && idx.1 >= n_pml && idx.0 + n_pml < grid.nx && idx.1 + n_pml < grid.ny;
        if !outside_pml {
            return Err(SceneError::Placement(format!(
                "{what} at cell ({}, {}) lies inside the {n_pml}-cell PML",
                idx.0, idx.1
            )));
        }
        Ok(())
    };

    let source_index = grid.snap(cfg.source);
    check("source", source_index)?;
    let width = source_width(grid);
    let footprint: Vec<SourceTap> = gaussian_footprint(grid, source_index, width)
        .into_iter()
        .filter(|t| mask.is_free(t.index.0, t.index.1))
        .collect();

    let mut listeners = Vec::with_capacity(cfg.listeners.len());
    for l in &cfg.listeners {
        let mics = l.mic_positions().map(|(label, p)| MicProbe { label, index: grid.snap(p) });
        for m in &mics {
            check(&format!("listener {} mic {}", l.id, m.label.short()), m.index)?;
        }
        listeners.push(ListenerProbes { id: l.id.clone(), mics });
    }
    Ok(ProbeLayout {
        source_index,
        source_width_cells: width,
        source_footprint: footprint,
        listeners,
        points: Vec::new(),
    })
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FREE_FIELD: &str = r#"
        domain = [20.0, 20.0]
        f_max = 343.0
        sim_duration = 1.0
        source = [5.0, 5.0]
        [sweep]
        f0 = 20.0
        f1 = 300.0
        duration = 0.5
        [[listeners]]
        position = [10.0, 10.0]
    "#;

    fn config(text: &str) -> SceneConfig {
        parse_scene(text).unwrap()
    }

    fn scene_with(extra: &str) -> String {
        format!("{FREE_FIELD}\n{extra}")
    }

    #[test]
    fn parses_free_field_scene_with_defaults() {
        let cfg = config(FREE_FIELD);
        assert!(cfg.obstacles.is_empty());
        assert_eq!(cfg.listeners[0].id, "L1");
        assert_eq!(cfg.listeners[0].mic_spacing, 0.25);
        assert_eq!(cfg.medium, MediumParams { rho0: 1.2, c: 343.0 });
        assert_eq!(cfg.simulation.pml_cells, 20);
        assert_eq!(cfg.sweep.fade, 0.01);
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(matches!(parse_scene("domain = [1.0,"), Err(SceneError::Syntax(_))));
        assert!(matches!(parse_scene("domain = [1.0, 2.0]"), Err(SceneError::Syntax(_))));
    }

    #[test]
    fn obstacle_outside_domain_is_rejected() {
        let text =
            FREE_FIELD.replace("source = [5.0, 5.0]", "source = [5.0, 5.0]\nobstacles = [[-1.0, 0.0, 2.0, 2.0]]");
        let err = parse_scene(&text).unwrap_err();
        assert!(err.to_string().contains("obstacle 1 outside domain"), "{err}");
    }

    #[test]
    fn listener_inside_obstacle_names_both() {
        let text = FREE_FIELD.replace(
            "source = [5.0, 5.0]",
            "source = [5.0, 5.0]\nobstacles = [[1.0, 1.0, 2.0, 2.0], [9.0, 9.0, 11.0, 11.0]]",
        );
        let err = parse_scene(&text).unwrap_err();
        assert!(err.to_string().contains("listener L1 inside obstacle 2"), "{err}");
    }

    #[test]
    fn other_invariants() {
        let bad_fmax = FREE_FIELD.replace("f_max = 343.0", "f_max = 200.0");
        assert!(parse_scene(&bad_fmax).is_err());
        let bad_src = FREE_FIELD.replace("source = [5.0, 5.0]", "source = [0.0, 5.0]");
        assert!(parse_scene(&bad_src).is_err());
        let bad_rho = scene_with("[medium]\nrho0 = 0.0\nc = 343.0");
        assert!(parse_scene(&bad_rho).is_err());
        let bad_safety = scene_with("[simulation]\nsafety = 1.2");
        assert!(parse_scene(&bad_safety).is_err());
    }

    #[test]
    fn grid_for_paper_domain() {
        let g = GridSpec::for_domain(32.0, 22.0, 343.0, 3000.0);
        assert!((g.lambda_min - 0.114333).abs() < 1e-5);
        assert!((g.ds - 0.0114333).abs() < 1e-6);
        assert_eq!((g.nx, g.ny), (2799, 1925));
    }

    #[test]
    fn grid_unit_wavelength_and_water() {
        let g = GridSpec::for_domain(10.0, 10.0, 343.0, 343.0);
        assert!((g.lambda_min - 1.0).abs() < 1e-15);
        assert!((g.ds - 0.1).abs() < 1e-15);
        assert_eq!(g.nx, 100);
        let w = GridSpec::for_domain(10.0, 10.0, 1500.0, 3000.0);
        assert!((w.ds - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rasterize_free_field_is_all_ones() {
        let cfg = config(FREE_FIELD);
        let grid = build_grid(&cfg);
        let mask = rasterize_obstacles(&cfg, &grid);
        assert_eq!(mask.obstacle_count(), 0);
        assert_eq!(mask.shape(), (grid.nx, grid.ny));
    }

    #[test]
    fn rasterize_small_rectangle_counts_four() {
        let mut cfg = config(FREE_FIELD);
        cfg.obstacles = vec![Rect::from([1.0, 1.0, 2.0, 2.0])];
        let grid = GridSpec { ds: 0.5, nx: 40, ny: 40, lambda_min: 5.0 };
        let mask = rasterize_obstacles(&cfg, &grid);
        // Brute-force enumeration of cell centers.
        let mut expected = 0;
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (x, y) = ((i as f64 + 0.5) * 0.5, (j as f64 + 0.5) * 0.5);
                let inside = (1.0..=2.0).contains(&x) && (1.0..=2.0).contains(&y);
                assert_eq!(mask.is_free(i, j), !inside);
                expected += inside as usize;
            }
        }
        assert_eq!(expected, 4);
        assert_eq!(mask.obstacle_count(), 4);
    }

    #[test]
    fn rasterize_interior_block_leaves_border() {
        let mut cfg = config(FREE_FIELD);
        let grid = GridSpec { ds: 1.0, nx: 20, ny: 20, lambda_min: 10.0 };
        cfg.obstacles = vec![Rect::from([1.0, 1.0, 19.0, 19.0])];
        let mask = rasterize_obstacles(&cfg, &grid);
        for i in 0..20 {
            for j in 0..20 {
                let border = i == 0 || j == 0 || i == 19 || j == 19;
                assert_eq!(mask.is_free(i, j), border, "({i},{j})");
            }
        }
    }

    #[test]
    fn source_width_values() {
        let g = GridSpec::for_domain(32.0, 22.0, 343.0, 3000.0);
        assert_eq!(source_width(&g), 5);
        let coarse = GridSpec { ds: 0.5, nx: 10, ny: 10, lambda_min: 1.0 };
        assert_eq!(source_width(&coarse), 2);
    }

    #[test]
    fn mic_cluster_geometry() {
        let l = ListenerSpec { id: "L1".into(), position: [10.0, 10.0], orientation: 0.0, mic_spacing: 0.25 };
        let pos = l.mic_positions();
        let expect = [
            (MicLabel::FrontLeft, [9.875, 10.125]),
            (MicLabel::FrontRight, [10.125, 10.125]),
            (MicLabel::RearLeft, [9.875, 9.875]),
            (MicLabel::RearRight, [10.125, 9.875]),
        ];
        for ((la, p), (lb, q)) in pos.iter().zip(expect) {
            assert_eq!(*la, lb);
            assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
        // Snapped cells contain the microphone positions.
        let grid = GridSpec { ds: 0.0125, nx: 1600, ny: 1600, lambda_min: 0.125 };
        for (_, p) in pos {
            let (i, j) = grid.snap(p);
            let c = grid.cell_center(i, j);
            assert!((c[0] - p[0]).abs() <= grid.ds / 2.0 + 1e-9);
            assert!((c[1] - p[1]).abs() <= grid.ds / 2.0 + 1e-9);
        }
    }

    #[test]
    fn probes_on_obstacles_are_rejected() {
        let mut cfg = config(FREE_FIELD);
        let grid = build_grid(&cfg);
        cfg.simulation.pml_cells = 5;
        let mut mask = rasterize_obstacles(&cfg, &grid);
        let layout = place_probes(&cfg, &grid, &mask).unwrap();
        assert_eq!(layout.source_width_cells, 5);
        assert_eq!(layout.listeners[0].mics.len(), 4);
        let fl = layout.listeners[0].mic(MicLabel::FrontLeft).index;
        mask.set(fl.0, fl.1, false);
        let err = place_probes(&cfg, &grid, &mask).unwrap_err();
        assert!(err.to_string().contains("listener L1 mic FL"), "{err}");
    }

    #[test]
    fn probes_in_pml_are_rejected() {
        let mut cfg = config(FREE_FIELD);
        cfg.simulation.pml_cells = 60;
        let grid = build_grid(&cfg);
        let mask = rasterize_obstacles(&cfg, &grid);
        assert!(matches!(place_probes(&cfg, &grid, &mask), Err(SceneError::Placement(_))));
    }

    #[test]
    fn footprint_is_gaussian_with_unit_center() {
        let grid = GridSpec::for_domain(5.0, 5.0, 343.0, 1000.0);
        let taps = gaussian_footprint(&grid, (50, 50), 5);
        let center = taps.iter().find(|t| t.index == (50, 50)).unwrap();
        assert_eq!(center.weight, 1.0);
        let edge = taps.iter().find(|t| t.index == (55, 50)).unwrap();
        // d = w·ds, σ = w·ds/2  ⇒  exp(−2)
        assert!((edge.weight - (-2.0f64).exp()).abs() < 1e-12);
        assert!(taps.iter().all(|t| {
            let (di, dj) = (t.index.0 as i64 - 50, t.index.1 as i64 - 50);
            di * di + dj * dj <= 25
        }));
    }

    #[test]
    fn pgm_header_and_size() {
        let mut mask = ObstacleMask::free(3, 2);
        mask.set(0, 0, false);
        let mut buf = Vec::new();
        mask.write_pgm(&mut buf).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        // Bottom row (j = 0) is written last.
        assert_eq!(&buf[header.len()..], &[255, 255, 255, 0, 255, 255]);
    }

    #[test]
    fn pgm_round_trip() {
        let mut mask = ObstacleMask::free(5, 4);
        mask.set(1, 3, false);
        mask.set(4, 0, false);
        let mut buf = Vec::new();
        mask.write_pgm(&mut buf).unwrap();
        assert_eq!(ObstacleMask::read_pgm(&buf[..]).unwrap(), mask);
        assert!(ObstacleMask::read_pgm(&buf[..buf.len() - 1]).is_err());
        assert!(ObstacleMask::read_pgm(&b"P2\n1 1\n255\n\0"[..]).is_err());
    }

    proptest! {
        #[test]
        fn dispersion_criterion_holds(c in 100.0f64..2000.0, f in 50.0f64..5000.0, lx in 0.5f64..50.0) {
            let g = GridSpec::for_domain(lx, lx, c, f);
            prop_assert!(g.ds * 10.0 <= c / f * (1.0 + 1e-12));
            prop_assert!(g.nx as f64 * g.ds >= lx * (1.0 - 1e-9));
        }

        #[test]
        fn refinement_keeps_interior_cells(x0 in 0.5f64..4.0, y0 in 0.5f64..4.0, w in 0.3f64..3.0, h in 0.3f64..3.0, ds in 0.05f64..0.4) {
            let mut cfg = config(FREE_FIELD);
            cfg.obstacles = vec![Rect::from([x0, y0, x0 + w, y0 + h])];
            let coarse = GridSpec { ds, nx: (10.0 / ds).ceil() as usize, ny: (10.0 / ds).ceil() as usize, lambda_min: 10.0 * ds };
            let fine = GridSpec { ds: ds / 2.0, nx: coarse.nx * 2, ny: coarse.ny * 2, lambda_min: 5.0 * ds };
            let mc = rasterize_obstacles(&cfg, &coarse);
            let mf = rasterize_obstacles(&cfg, &fine);
            // A coarse cell strictly inside the obstacle stays solid: all
            // four children have centers inside too.
            for i in 0..coarse.nx {
                for j in 0..coarse.ny {
                    let lo = [i as f64 * ds, j as f64 * ds];
                    let hi = [lo[0] + ds, lo[1] + ds];
                    let r = &cfg.obstacles[0];
                    if lo[0] > r.x_min && hi[0] < r.x_max && lo[1] > r.y_min && hi[1] < r.y_max {
                        prop_assert!(!mc.is_free(i, j));
                        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            prop_assert!(!mf.is_free(2 * i + a, 2 * j + b));
                        }
                    }
                }
            }
        }

        #[test]
        fn rotation_by_pi_swaps_diagonal_mics(x in 3.0f64..7.0, y in 3.0f64..7.0, theta in -3.1f64..3.1, spacing in 0.1f64..0.5) {
            let grid = GridSpec { ds: 0.02, nx: 500, ny: 500, lambda_min: 0.2 };
            let a = ListenerSpec { id: "A".into(), position: [x, y], orientation: theta, mic_spacing: spacing };
            let b = ListenerSpec { orientation: theta + PI, ..a.clone() };
            let pa = a.mic_positions().map(|(_, p)| grid.snap(p));
            let pb = b.mic_positions().map(|(_, p)| grid.snap(p));
            let close = |u: (usize, usize), v: (usize, usize)| u.0.abs_diff(v.0) <= 1 && u.1.abs_diff(v.1) <= 1;
            // FL↔RR, FR↔RL
            prop_assert!(close(pa[0], pb[3]) && close(pa[3], pb[0]));
            prop_assert!(close(pa[1], pb[2]) && close(pa[2], pb[1]));
        }

        #[test]
        fn placement_is_deterministic(x in 3.0f64..17.0, y in 3.0f64..17.0, theta in -3.0f64..3.0) {
            let mut cfg = config(FREE_FIELD);
            cfg.listeners[0].position = [x, y];
            cfg.listeners[0].orientation = theta;
            let grid = build_grid(&cfg);
            let mask = rasterize_obstacles(&cfg, &grid);
            cfg.simulation.pml_cells = 2;
            let a = place_probes(&cfg, &grid, &mask);
            let b = place_probes(&cfg, &grid, &mask);
            prop_assert_eq!(a.ok(), b.ok());
        }
    }
}
