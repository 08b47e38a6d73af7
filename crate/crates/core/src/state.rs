//! Grids, the distribution field, Maxwellians and velocity moments.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::GAS_CONSTANT;

/// Wall treatment of the slab ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic,
    Specular,
    Diffuse { wall_temperature: f64 },
}

impl Boundary {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }

    pub fn wall_temperature(&self) -> Option<f64> {
        match self {
            Boundary::Diffuse { wall_temperature } => Some(*wall_temperature),
            _ => None,
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "periodic"),
            Boundary::Specular => write!(f, "specular"),
            Boundary::Diffuse { wall_temperature } => write!(f, "diffuse:{wall_temperature:e}"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "specular" => Ok(Boundary::Specular),
            _ => {
                let t = s
                    .strip_prefix("diffuse:")
                    .ok_or_else(|| format!("unknown boundary kind `{s}`"))?;
                let wall_temperature: f64 = t
                    .parse()
                    .map_err(|_| format!("bad wall temperature `{t}`"))?;
                Ok(Boundary::Diffuse { wall_temperature })
            }
        }
    }
}

/// Two-point linear interpolation stencil between cell centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub left: usize,
    pub right: usize,
    pub theta: f64,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        if self.theta == 0.0 {
            values[self.left]
        } else {
            (1.0 - self.theta) * values[self.left] + self.theta * values[self.right]
        }
    }
}

/// Uniform cell partition of the slab `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub length: f64,
    pub n_x: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(length: f64, n_x: usize, boundary: Boundary) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config("geometry.length", "must be positive"));
        }
        if n_x == 0 {
            return Err(Error::config("geometry.n_x", "must be positive"));
        }
        if let Boundary::Diffuse { wall_temperature } = boundary {
            if !(wall_temperature > 0.0 && wall_temperature.is_finite()) {
                return Err(Error::config(
                    "geometry.wall_temperature",
                    "diffuse walls need a positive wall temperature",
                ));
            }
        }
        Ok(SpatialGrid {
            length,
            n_x,
            dx: length / n_x as f64,
            boundary,
        })
    }

    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.center(j)).collect()
    }

    /// Indicator of the domain for molecular centers.
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.boundary.is_periodic() || (0.0..=self.length).contains(&x)
    }

    /// Maps a periodic position into `[0, L)`; wall domains are untouched.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        if self.boundary.is_periodic() {
            let y = x.rem_euclid(self.length);
            if y >= self.length {
                0.0
            } else {
                y
            }
        } else {
            x
        }
    }

    /// Interpolation stencil at an arbitrary position, `None` outside the domain.
    pub fn stencil(&self, x: f64) -> Option<Stencil> {
        if !self.contains(x) {
            return None;
        }
        let n = self.n_x;
        let y = self.wrap(x) / self.dx - 0.5;
        if self.boundary.is_periodic() {
            let fl = y.floor();
            let theta = y - fl;
            let left = (fl as i64).rem_euclid(n as i64) as usize;
            return Some(Stencil {
                left,
                right: (left + 1) % n,
                theta,
            });
        }
        if y <= 0.0 {
            return Some(Stencil { left: 0, right: 0, theta: 0.0 });
        }
        let last = (n - 1) as f64;
        if y >= last {
            return Some(Stencil { left: n - 1, right: n - 1, theta: 0.0 });
        }
        let fl = y.floor();
        let left = fl as usize;
        Some(Stencil {
            left,
            right: (left + 1).min(n - 1),
            theta: y - fl,
        })
    }

    /// Linear interpolation of a cell field; zero outside the domain.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        self.stencil(x).map_or(0.0, |s| s.apply(values))
    }
}

/// Uniform Cartesian velocity grid with midpoint weights, symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub n_v: usize,
    pub xi_max: f64,
    /// Node spacing per axis.
    pub h: f64,
    pub axis: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(n_v: usize, xi_max: f64) -> Result<Self> {
        if n_v < 8 {
            return Err(Error::config(
                "velocity.n_v",
                format!("{n_v} nodes per axis is too coarse for moment fidelity (need >= 8)"),
            ));
        }
        if n_v > u16::MAX as usize / 2 {
            return Err(Error::config("velocity.n_v", "too many nodes per axis"));
        }
        if !(xi_max > 0.0 && xi_max.is_finite()) {
            return Err(Error::config("velocity.xi_max", "must be positive"));
        }
        let h = 2.0 * xi_max / n_v as f64;
        let mut axis = vec![0.0; n_v];
        for i in 0..n_v.div_ceil(2) {
            let x = (i as f64 - (n_v as f64 - 1.0) / 2.0) * h;
            axis[i] = x;
            axis[n_v - 1 - i] = -x;
        }
        Ok(VelocityGrid { n_v, xi_max, h, axis })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_v * self.n_v * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.n_v == 0
    }

    /// Quadrature weight of every node.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n_v + i[1]) * self.n_v + i[2]
    }

    #[inline]
    pub fn axis_index(&self, k: usize) -> [usize; 3] {
        let n = self.n_v;
        [k / (n * n), (k / n) % n, k % n]
    }

    #[inline]
    pub fn node(&self, k: usize) -> [f64; 3] {
        let i = self.axis_index(k);
        [self.axis[i[0]], self.axis[i[1]], self.axis[i[2]]]
    }

    /// Node index with the sign of the given velocity components flipped.
    #[inline]
    pub fn mirror(&self, k: usize, flip: [bool; 3]) -> usize {
        let mut i = self.axis_index(k);
        for a in 0..3 {
            if flip[a] {
                i[a] = self.n_v - 1 - i[a];
            }
        }
        self.index(i)
    }

    /// Integer coordinate `2i - (n - 1)`, proportional to the node velocity.
    #[inline]
    pub fn doubled(&self, i: usize) -> i64 {
        2 * i as i64 - (self.n_v as i64 - 1)
    }

    /// Squared speed in doubled integer units.
    #[inline]
    pub fn doubled_energy(&self, i: [usize; 3]) -> i64 {
        i.iter().map(|&a| self.doubled(a).pow(2)).sum()
    }

    /// Sum of `term(k)` in mirror-pair order along every axis.
    ///
    /// Terms that are odd in any velocity component cancel bitwise.
    pub fn symmetric_sum(&self, term: impl Fn(usize) -> f64) -> f64 {
        let n = self.n_v;
        let pairs = |g: &dyn Fn(usize) -> f64| -> f64 {
            let mut acc = 0.0;
            for i in 0..n / 2 {
                acc += g(i) + g(n - 1 - i);
            }
            if n % 2 == 1 {
                acc += g(n / 2);
            }
            acc
        };
        pairs(&|i| pairs(&|j| pairs(&|l| term((i * n + j) * n + l))))
    }
}

/// Nonnegative distribution values stored cell-major: `values[j * n_nodes + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    pub n_cells: usize,
    pub n_nodes: usize,
    pub values: Vec<f64>,
}

impl DistributionField {
    pub fn zeros(n_cells: usize, n_nodes: usize) -> Self {
        DistributionField {
            n_cells,
            n_nodes,
            values: vec![0.0; n_cells * n_nodes],
        }
    }

    #[inline]
    pub fn cell(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    #[inline]
    pub fn cell_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    /// Copy in node-major order, `out[k * n_cells + j]`.
    pub fn to_node_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for j in 0..self.n_cells {
            for (k, v) in self.cell(j).iter().enumerate() {
                out[k * self.n_cells + j] = *v;
            }
        }
        out
    }

    pub fn from_node_major(n_cells: usize, n_nodes: usize, data: &[f64]) -> Self {
        let mut f = DistributionField::zeros(n_cells, n_nodes);
        for k in 0..n_nodes {
            for j in 0..n_cells {
                f.values[j * n_nodes + k] = data[k * n_cells + j];
            }
        }
        f
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
}

/// Maxwellian values on the velocity grid.
pub fn maxwellian(rho: f64, v: [f64; 3], t: f64, vg: &VelocityGrid) -> Vec<f64> {
    let rt = GAS_CONSTANT * t;
    let norm = rho / (2.0 * PI * rt).powf(1.5);
    (0..vg.len())
        .map(|k| {
            let xi = vg.node(k);
            let c2 = (xi[0] - v[0]).powi(2) + (xi[1] - v[1]).powi(2) + (xi[2] - v[2]).powi(2);
            norm * (-c2 / (2.0 * rt)).exp()
        })
        .collect()
}

/// Maxwellian rescaled so that its discrete zeroth moment is exactly `rho`.
pub fn maxwellian_normalized(rho: f64, v: [f64; 3], t: f64, vg: &VelocityGrid) -> Vec<f64> {
    let mut f = maxwellian(rho, v, t, vg);
    let mass = vg.symmetric_sum(|k| f[k]) * vg.weight();
    if mass > 0.0 {
        let c = rho / mass;
        f.iter_mut().for_each(|x| *x *= c);
    }
    f
}

/// Velocity moments of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub rho: f64,
    pub v: [f64; 3],
    pub temperature: f64,
    /// Specific kinetic internal energy.
    pub energy: f64,
    /// Kinetic stress in the local rest frame.
    pub stress: [[f64; 3]; 3],
    /// Kinetic heat flow in the local rest frame.
    pub heat_flux: [f64; 3],
}

/// Moments of one cell, or a marker for an empty cell where velocity and
/// temperature are undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellMoments {
    Regular(Moments),
    Degenerate,
}

impl CellMoments {
    pub fn rho(&self) -> f64 {
        match self {
            CellMoments::Regular(m) => m.rho,
            CellMoments::Degenerate => 0.0,
        }
    }

    /// Velocity, taken as zero in an empty cell.
    pub fn velocity(&self) -> [f64; 3] {
        match self {
            CellMoments::Regular(m) => m.v,
            CellMoments::Degenerate => [0.0; 3],
        }
    }

    pub fn regular(&self) -> Option<&Moments> {
        match self {
            CellMoments::Regular(m) => Some(m),
            CellMoments::Degenerate => None,
        }
    }
}

/// Moments of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    pub cells: Vec<CellMoments>,
}

impl MacroFields {
    pub fn density(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.rho()).collect()
    }

    pub fn velocity_x(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.velocity()[0]).collect()
    }

    pub fn degenerate_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, CellMoments::Degenerate))
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn cell_moments(f: &[f64], vg: &VelocityGrid) -> CellMoments {
    let w = vg.weight();
    let rho = vg.symmetric_sum(|k| f[k]) * w;
    if !(rho > 0.0) {
        return CellMoments::Degenerate;
    }
    let mut v = [0.0; 3];
    for (a, va) in v.iter_mut().enumerate() {
        *va = vg.symmetric_sum(|k| vg.node(k)[a] * f[k]) * w / rho;
    }
    let peculiar = |k: usize| {
        let xi = vg.node(k);
        [xi[0] - v[0], xi[1] - v[1], xi[2] - v[2]]
    };
    let mut stress = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let s = vg.symmetric_sum(|k| {
                let c = peculiar(k);
                c[a] * c[b] * f[k]
            }) * w;
            stress[a][b] = s;
            stress[b][a] = s;
        }
    }
    let mut heat_flux = [0.0; 3];
    for (a, qa) in heat_flux.iter_mut().enumerate() {
        *qa = 0.5
            * vg.symmetric_sum(|k| {
                let c = peculiar(k);
                c[a] * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) * f[k]
            })
            * w;
    }
    let trace = stress[0][0] + stress[1][1] + stress[2][2];
    Moments {
        rho,
        v,
        temperature: trace / (3.0 * GAS_CONSTANT * rho),
        energy: trace / (2.0 * rho),
        stress,
        heat_flux,
    }
    .into()
}

impl From<Moments> for CellMoments {
    fn from(m: Moments) -> Self {
        CellMoments::Regular(m)
    }
}

pub fn moments(f: &DistributionField, vg: &VelocityGrid) -> MacroFields {
    use rayon::prelude::*;
    let cells = (0..f.n_cells)
        .into_par_iter()
        .map(|j| cell_moments(f.cell(j), vg))
        .collect();
    MacroFields { cells }
}

/// Cellwise density only.
pub fn density(f: &DistributionField, vg: &VelocityGrid) -> Vec<f64> {
    (0..f.n_cells)
        .map(|j| {
            let c = f.cell(j);
            vg.symmetric_sum(|k| c[k]) * vg.weight()
        })
        .collect()
}

/// Initial condition families.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Uniform {
        rho: f64,
        velocity: [f64; 3],
        temperature: f64,
    },
    /// `rho (1 + amplitude sin 2πx/L)` at rest.
    DensityWave {
        rho: f64,
        amplitude: f64,
        temperature: f64,
    },
    /// Uniform density with `v_x = amplitude sin 2πx/L`.
    VelocityWave {
        rho: f64,
        amplitude: f64,
        temperature: f64,
    },
    /// Uniform density, left half at `t_left`, right half at `t_right`.
    TemperatureJump {
        rho: f64,
        t_left: f64,
        t_right: f64,
    },
    /// Two equal-mass beams at `±u` along x; the density may carry a sine perturbation.
    Bimodal {
        rho: f64,
        u: f64,
        temperature: f64,
        perturbation: f64,
    },
    /// Uniform gas with a different temperature along x than across.
    Anisotropic {
        rho: f64,
        t_parallel: f64,
        t_perpendicular: f64,
    },
    /// Distribution reloaded from a snapshot file.
    Snapshot { path: std::path::PathBuf },
}

impl InitialCondition {
    /// Largest component temperature, used for the velocity-tail check.
    pub fn max_temperature(&self) -> Option<f64> {
        use InitialCondition::*;
        match self {
            Uniform { temperature, .. }
            | DensityWave { temperature, .. }
            | VelocityWave { temperature, .. }
            | Bimodal { temperature, .. } => Some(*temperature),
            TemperatureJump { t_left, t_right, .. } => Some(t_left.max(*t_right)),
            Anisotropic {
                t_parallel,
                t_perpendicular,
                ..
            } => Some(t_parallel.max(*t_perpendicular)),
            Snapshot { .. } => None,
        }
    }

    /// Largest local density the condition prescribes.
    pub fn max_density(&self) -> Option<f64> {
        use InitialCondition::*;
        match self {
            Uniform { rho, .. }
            | VelocityWave { rho, .. }
            | TemperatureJump { rho, .. }
            | Anisotropic { rho, .. } => Some(*rho),
            DensityWave { rho, amplitude, .. } => Some(rho * (1.0 + amplitude.abs())),
            Bimodal {
                rho, perturbation, ..
            } => Some(rho * (1.0 + perturbation.abs())),
            Snapshot { .. } => None,
        }
    }

    pub fn validate(&self, vg: &VelocityGrid) -> Result<()> {
        use InitialCondition::*;
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be positive"))
            }
        };
        match self {
            Uniform { rho, temperature, .. } => {
                positive("initial.rho", *rho)?;
                positive("initial.temperature", *temperature)?;
            }
            DensityWave {
                rho,
                amplitude,
                temperature,
            } => {
                positive("initial.rho", *rho)?;
                positive("initial.temperature", *temperature)?;
                if amplitude.abs() >= 1.0 {
                    return Err(Error::config(
                        "initial.amplitude",
                        "density wave would produce non-positive densities",
                    ));
                }
            }
            VelocityWave { rho, temperature, .. } => {
                positive("initial.rho", *rho)?;
                positive("initial.temperature", *temperature)?;
            }
            TemperatureJump { rho, t_left, t_right } => {
                positive("initial.rho", *rho)?;
                positive("initial.t_left", *t_left)?;
                positive("initial.t_right", *t_right)?;
            }
            Bimodal {
                rho,
                u,
                temperature,
                perturbation,
            } => {
                positive("initial.rho", *rho)?;
                positive("initial.temperature", *temperature)?;
                if perturbation.abs() >= 1.0 {
                    return Err(Error::config(
                        "initial.perturbation",
                        "perturbation would produce non-positive densities",
                    ));
                }
                if u.abs() >= vg.xi_max {
                    return Err(Error::config("initial.u", "beam velocity outside the velocity grid"));
                }
            }
            Anisotropic {
                rho,
                t_parallel,
                t_perpendicular,
            } => {
                positive("initial.rho", *rho)?;
                positive("initial.t_parallel", *t_parallel)?;
                positive("initial.t_perpendicular", *t_perpendicular)?;
            }
            Snapshot { .. } => return Ok(()),
        }
        let t = self.max_temperature().unwrap_or(0.0);
        if vg.xi_max < 4.0 * (GAS_CONSTANT * t).sqrt() {
            return Err(Error::config(
                "velocity.xi_max",
                format!(
                    "{} truncates the tail of a gas at temperature {t} (need >= {})",
                    vg.xi_max,
                    4.0 * (GAS_CONSTANT * t).sqrt()
                ),
            ));
        }
        Ok(())
    }

    /// Velocity profile in the cell centered at `x`.
    pub fn profile(&self, x: f64, length: f64, vg: &VelocityGrid, renormalize: bool) -> Vec<f64> {
        use InitialCondition::*;
        let mx = |rho: f64, v: [f64; 3], t: f64| {
            if renormalize {
                maxwellian_normalized(rho, v, t, vg)
            } else {
                maxwellian(rho, v, t, vg)
            }
        };
        let phase = (2.0 * PI * x / length).sin();
        match self {
            Uniform {
                rho,
                velocity,
                temperature,
            } => mx(*rho, *velocity, *temperature),
            DensityWave {
                rho,
                amplitude,
                temperature,
            } => mx(rho * (1.0 + amplitude * phase), [0.0; 3], *temperature),
            VelocityWave {
                rho,
                amplitude,
                temperature,
            } => mx(*rho, [amplitude * phase, 0.0, 0.0], *temperature),
            TemperatureJump { rho, t_left, t_right } => {
                let t = if x < 0.5 * length { *t_left } else { *t_right };
                mx(*rho, [0.0; 3], t)
            }
            Bimodal {
                rho,
                u,
                temperature,
                perturbation,
            } => {
                let local = rho * (1.0 + perturbation * phase);
                let a = mx(0.5 * local, [*u, 0.0, 0.0], *temperature);
                let b = mx(0.5 * local, [-*u, 0.0, 0.0], *temperature);
                a.iter().zip(&b).map(|(p, q)| p + q).collect()
            }
            Anisotropic {
                rho,
                t_parallel,
                t_perpendicular,
            } => {
                let mut f: Vec<f64> = (0..vg.len())
                    .map(|k| {
                        let xi = vg.node(k);
                        let tp = GAS_CONSTANT * t_parallel;
                        let tq = GAS_CONSTANT * t_perpendicular;
                        rho / ((2.0 * PI).powf(1.5) * tp.sqrt() * tq)
                            * (-xi[0] * xi[0] / (2.0 * tp) - (xi[1] * xi[1] + xi[2] * xi[2]) / (2.0 * tq))
                                .exp()
                    })
                    .collect();
                if renormalize {
                    let m = vg.symmetric_sum(|k| f[k]) * vg.weight();
                    f.iter_mut().for_each(|v| *v *= rho / m);
                }
                f
            }
            Snapshot { .. } => unreachable!("snapshot initial conditions are loaded from file"),
        }
    }
}

/// Full solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub space: SpatialGrid,
    pub velocity: VelocityGrid,
    pub f: DistributionField,
    pub time: f64,
}

impl SimState {
    pub fn from_initial(
        space: SpatialGrid,
        velocity: VelocityGrid,
        initial: &InitialCondition,
        renormalize: bool,
    ) -> Result<Self> {
        if let InitialCondition::Snapshot { path } = initial {
            let s = read_snapshot(path)?;
            if s.space.n_x != space.n_x || s.velocity.n_v != velocity.n_v {
                return Err(Error::config(
                    "initial.path",
                    "snapshot grids do not match the configured grids",
                ));
            }
            return Ok(s);
        }
        initial.validate(&velocity)?;
        let mut f = DistributionField::zeros(space.n_x, velocity.len());
        for j in 0..space.n_x {
            let p = initial.profile(space.center(j), space.length, &velocity, renormalize);
            f.cell_mut(j).copy_from_slice(&p);
        }
        Ok(SimState {
            space,
            velocity,
            f,
            time: 0.0,
        })
    }

    pub fn moments(&self) -> MacroFields {
        moments(&self.f, &self.velocity)
    }

    pub fn density(&self) -> Vec<f64> {
        density(&self.f, &self.velocity)
    }

    /// Total mass, x-momentum and energy (kinetic part) of the slab.
    pub fn totals(&self) -> [f64; 3] {
        let vg = &self.velocity;
        let w = vg.weight() * self.space.dx;
        let mut out = [0.0; 3];
        for j in 0..self.space.n_x {
            let c = self.f.cell(j);
            out[0] += vg.symmetric_sum(|k| c[k]) * w;
            out[1] += vg.symmetric_sum(|k| vg.node(k)[0] * c[k]) * w;
            out[2] += 0.5
                * vg.symmetric_sum(|k| {
                    let xi = vg.node(k);
                    (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * c[k]
                })
                * w;
        }
        out
    }
}

/// Builds the initial state described by a scenario.
pub fn make_state(config: &ScenarioConfig) -> Result<SimState> {
    let space = SpatialGrid::new(config.length, config.n_x, config.boundary)?;
    let velocity = VelocityGrid::new(config.n_v, config.xi_max)?;
    SimState::from_initial(space, velocity, &config.initial, config.renormalize)
}

fn header_line(s: &SimState) -> String {
    format!(
        "t={:e} L={:e} n_x={} n_v={} xi_max={:e} boundary={}",
        s.time, s.space.length, s.space.n_x, s.velocity.n_v, s.velocity.xi_max, s.space.boundary
    )
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Writes a snapshot; `.bin` selects raw little-endian values after the header line.
pub fn write_snapshot(path: &Path, s: &SimState) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header_line(s))?;
    if is_binary(path) {
        for v in &s.f.values {
            out.write_all(&v.to_le_bytes())?;
        }
    } else {
        for j in 0..s.f.n_cells {
            let row: Vec<String> = s.f.cell(j).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SimState> {
    let bad = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut fields = std::collections::HashMap::new();
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header token `{tok}`")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| bad(format!("header is missing `{k}`")))
    };
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad `{k}`"))) };
    let boundary: Boundary = get("boundary")?.parse().map_err(bad)?;
    let space = SpatialGrid::new(num("L")?, int("n_x")?, boundary)?;
    let velocity = VelocityGrid::new(int("n_v")?, num("xi_max")?)?;
    let total = space.n_x * velocity.len();
    let mut values = Vec::with_capacity(total);
    if is_binary(path) {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        if buf.len() != total * 8 {
            return Err(bad(format!("expected {} bytes of data, found {}", total * 8, buf.len())));
        }
        for chunk in buf.chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().expect("chunk of eight bytes")));
        }
    } else {
        let mut rest = String::new();
        reader.read_to_string(&mut rest)?;
        for tok in rest.split_whitespace() {
            values.push(tok.parse().map_err(|_| bad(format!("bad value `{tok}`")))?);
        }
        if values.len() != total {
            return Err(bad(format!("expected {total} values, found {}", values.len())));
        }
    }
    Ok(SimState {
        f: DistributionField {
            n_cells: space.n_x,
            n_nodes: velocity.len(),
            values,
        },
        space,
        velocity,
        time: num("t")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> VelocityGrid {
        VelocityGrid::new(12, 6.0).unwrap()
    }

    #[test]
    fn velocity_axis_is_bitwise_symmetric() {
        let vg = VelocityGrid::new(9, 4.7).unwrap();
        for i in 0..9 {
            assert_eq!(vg.axis[i], -vg.axis[8 - i]);
        }
        assert_eq!(vg.axis[4], 0.0);
    }

    #[test]
    fn maxwellian_peak_at_unit_normalization() {
        let vg = VelocityGrid::new(9, 4.5).unwrap();
        let t = 1.0 / (2.0 * PI);
        let f = maxwellian(1.0, [0.0; 3], t, &vg);
        let center = vg.index([4, 4, 4]);
        assert!((f[center] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maxwellian_moments_and_exact_odd_cancellation() {
        let vg = grid();
        let f = maxwellian(1.3, [0.0; 3], 1.0, &vg);
        let CellMoments::Regular(m) = cell_moments(&f, &vg) else {
            panic!("degenerate")
        };
        assert!((m.rho - 1.3).abs() / 1.3 < 1e-6);
        assert!((m.temperature - 1.0).abs() < 1e-6);
        assert_eq!(m.v, [0.0; 3]);
        assert_eq!(m.heat_flux, [0.0; 3]);
        assert_eq!(m.stress[0][1], 0.0);
        assert_eq!(m.stress[1][2], 0.0);
        let p = m.rho * m.temperature;
        assert!((m.stress[0][0] - p).abs() / p < 1e-6);
    }

    #[test]
    fn two_beams_heat_the_mixture() {
        let vg = VelocityGrid::new(24, 7.0).unwrap();
        let u = 1.5;
        let a = maxwellian(0.5, [u, 0.0, 0.0], 1.0, &vg);
        let b = maxwellian(0.5, [-u, 0.0, 0.0], 1.0, &vg);
        let f: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let m = *cell_moments(&f, &vg).regular().unwrap();
        assert!((m.temperature - (1.0 + u * u / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn empty_cell_is_marked_degenerate() {
        let vg = grid();
        assert_eq!(cell_moments(&vec![0.0; vg.len()], &vg), CellMoments::Degenerate);
    }

    #[test]
    fn rejects_coarse_or_truncated_grids() {
        assert!(VelocityGrid::new(7, 6.0).is_err());
        let vg = VelocityGrid::new(8, 3.0).unwrap();
        let ic = InitialCondition::Uniform {
            rho: 1.0,
            velocity: [0.0; 3],
            temperature: 1.0,
        };
        assert!(ic.validate(&vg).is_err());
    }

    #[test]
    fn wall_stencils_clamp_and_exclude() {
        let g = SpatialGrid::new(2.0, 4, Boundary::Specular).unwrap();
        assert!(g.stencil(-0.01).is_none());
        assert!(g.stencil(2.01).is_none());
        assert_eq!(g.stencil(0.1).unwrap().left, 0);
        let s = g.stencil(0.5).unwrap();
        assert_eq!((s.left, s.right), (0, 1));
        assert!((s.theta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn periodic_stencil_wraps() {
        let g = SpatialGrid::new(1.0, 4, Boundary::Periodic).unwrap();
        let s = g.stencil(-0.05).unwrap();
        assert_eq!((s.left, s.right), (3, 0));
        assert!((s.theta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trips_in_both_formats() {
        let space = SpatialGrid::new(3.0, 3, Boundary::Diffuse { wall_temperature: 1.5 }).unwrap();
        let velocity = VelocityGrid::new(8, 5.0).unwrap();
        let ic = InitialCondition::DensityWave {
            rho: 0.1,
            amplitude: 0.2,
            temperature: 1.0,
        };
        let mut s = SimState::from_initial(space, velocity, &ic, false).unwrap();
        s.time = 0.125;
        let dir = tempfile::tempdir().unwrap();
        for name in ["s.txt", "s.bin"] {
            let p = dir.path().join(name);
            write_snapshot(&p, &s).unwrap();
            assert_eq!(read_snapshot(&p).unwrap(), s);
        }
    }
}
