//! Strang-split time stepping: transport, collisions with the Vlasov force, boundaries.

use rayon::prelude::*;

use crate::collision::{CollisionKernel, CollisionMode};
use crate::error::{Error, Result};
use crate::factor::{occupancy_r, OccupancyField};
use crate::state::{density, Boundary, DistributionField, SimState, SpatialGrid, VelocityGrid};
use crate::vlasov::{vlasov_force, AttractionKernel};
use crate::GAS_CONSTANT;

/// Largest clipped mass per step, relative to the total.
pub const CLIP_BUDGET: f64 = 1e-10;

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Mass removed by the positivity guard, relative to the total.
    pub clipped_mass: f64,
    /// Largest per-wall `|incident − re-emitted|` mass flux over the transport sub-steps.
    pub wall_imbalance: f64,
    /// Largest `|J|/f` seen in the collision sub-step.
    pub max_rate: f64,
    /// Mass piled against the ends of the velocity grid by the force term, relative to the total.
    pub force_truncation: f64,
}

/// Time stepper owning the collision operator and optional attraction kernel.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub kernel: CollisionKernel,
    pub attraction: Option<AttractionKernel>,
    pub cfl: f64,
    /// Collisions and force on (off gives free transport).
    pub collisions: bool,
    pub clip_budget: f64,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Wall Maxwellian shape `exp(−ξ²/2RT_w)` at every node.
fn wall_shape(vg: &VelocityGrid, t_w: f64) -> Vec<f64> {
    (0..vg.len())
        .map(|k| {
            let xi = vg.node(k);
            (-(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) / (2.0 * GAS_CONSTANT * t_w)).exp()
        })
        .collect()
}

/// Two ghost cells on each side of one velocity node's cell row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ghosts {
    /// Values at cells `−2, −1`.
    pub left: [f64; 2],
    /// Values at cells `n_x, n_x + 1`.
    pub right: [f64; 2],
}

/// Ghost values for node `k`. Diffuse walls copy the nearest interior value;
/// their incoming wall flux is imposed separately by flux balance.
pub fn apply_boundary(node_major: &[f64], k: usize, grid: &SpatialGrid, vg: &VelocityGrid) -> Ghosts {
    let nx = grid.n_x;
    let row = |k: usize| &node_major[k * nx..(k + 1) * nx];
    let at = |k: usize, j: usize| row(k)[j.min(nx - 1)];
    match grid.boundary {
        Boundary::Periodic => Ghosts {
            left: [at(k, (2 * nx - 2) % nx), at(k, nx - 1)],
            right: [at(k, 0), at(k, 1 % nx)],
        },
        Boundary::Specular => {
            let m = vg.mirror(k, [true, false, false]);
            Ghosts {
                left: [at(m, 1), at(m, 0)],
                right: [at(m, nx - 1), at(m, nx.saturating_sub(2))],
            }
        }
        Boundary::Diffuse { .. } => Ghosts {
            left: [at(k, 0), at(k, 0)],
            right: [at(k, nx - 1), at(k, nx - 1)],
        },
    }
}

/// Face fluxes `c f_face` at faces `0..=n_x` (face `i` lies left of cell `i`).
fn face_fluxes(u: &[f64], g: Ghosts, c: f64, nu: f64) -> Vec<f64> {
    let nx = u.len();
    let ext = |i: isize| -> f64 {
        if i < 0 {
            g.left[(i + 2) as usize]
        } else if i as usize >= nx {
            g.right[i as usize - nx]
        } else {
            u[i as usize]
        }
    };
    let slope = |i: isize| minmod(ext(i) - ext(i - 1), ext(i + 1) - ext(i));
    (0..=nx as isize)
        .map(|face| {
            if c > 0.0 {
                let j = face - 1;
                c * (ext(j) + 0.5 * (1.0 - nu) * slope(j))
            } else if c < 0.0 {
                let j = face;
                c * (ext(j) - 0.5 * (1.0 - nu) * slope(j))
            } else {
                0.0
            }
        })
        .collect()
}

/// Advances `∂f/∂t + ξ_x ∂f/∂x = 0` by `dt`; returns the largest wall mass imbalance.
pub fn transport(f: &mut DistributionField, grid: &SpatialGrid, vg: &VelocityGrid, dt: f64) -> f64 {
    let nx = grid.n_x;
    let nn = vg.len();
    let nm = f.to_node_major();
    let mut fluxes: Vec<Vec<f64>> = (0..nn)
        .into_par_iter()
        .map(|k| {
            let c = vg.node(k)[0];
            let nu = c.abs() * dt / grid.dx;
            face_fluxes(&nm[k * nx..(k + 1) * nx], apply_boundary(&nm, k, grid, vg), c, nu)
        })
        .collect();
    let mut imbalance: f64 = 0.0;
    if let Boundary::Diffuse { wall_temperature } = grid.boundary {
        let shape = wall_shape(vg, wall_temperature);
        let w = vg.weight();
        // Left wall: face 0, incoming nodes have c > 0.
        for (face, sign) in [(0usize, 1.0), (nx, -1.0)] {
            let mut out = 0.0;
            let mut unit = 0.0;
            for k in 0..nn {
                let c = vg.node(k)[0] * sign;
                if c < 0.0 {
                    out += -sign * fluxes[k][face] * w;
                } else if c > 0.0 {
                    unit += c * shape[k] * w;
                }
            }
            let n_w = if unit > 0.0 { out / unit } else { 0.0 };
            let mut incoming = 0.0;
            for k in 0..nn {
                let c = vg.node(k)[0];
                if c * sign > 0.0 {
                    fluxes[k][face] = c * n_w * shape[k];
                    incoming += sign * fluxes[k][face] * w;
                }
            }
            imbalance = imbalance.max((incoming - out).abs());
        }
    }
    let lambda = dt / grid.dx;
    let updated: Vec<f64> = (0..nn)
        .into_par_iter()
        .flat_map_iter(|k| {
            let row = &nm[k * nx..(k + 1) * nx];
            let fl = &fluxes[k];
            (0..nx).map(move |j| row[j] - lambda * (fl[j + 1] - fl[j]))
        })
        .collect();
    *f = DistributionField::from_node_major(nx, nn, &updated);
    imbalance
}

/// Upwind `−F ∂f/∂ξ_x` for one cell with zero flux through the ends of each `ξ_x` line.
///
/// Returns the term and the mass the upwind flux would push past the grid end.
pub fn force_term(f: &[f64], force: f64, vg: &VelocityGrid) -> (Vec<f64>, f64) {
    let n = vg.n_v;
    let mut out = vec![0.0; f.len()];
    if force == 0.0 {
        return (out, 0.0);
    }
    let mut lost = 0.0;
    for j in 0..n {
        for l in 0..n {
            for i in 0..n - 1 {
                let (a, b) = (vg.index([i, j, l]), vg.index([i + 1, j, l]));
                let up = if force > 0.0 { f[a] } else { f[b] };
                let flux = force * up / vg.h;
                out[a] -= flux;
                out[b] += flux;
            }
            let end = if force > 0.0 { vg.index([n - 1, j, l]) } else { vg.index([0, j, l]) };
            lost += force.abs() * f[end] / vg.h;
        }
    }
    (out, lost * vg.weight())
}

impl Integrator {
    pub fn new(kernel: CollisionKernel, attraction: Option<AttractionKernel>, cfl: f64) -> Self {
        Integrator {
            kernel,
            attraction,
            cfl,
            collisions: true,
            clip_budget: CLIP_BUDGET,
        }
    }

    fn occupancy(&self, rho: &[f64]) -> Result<OccupancyField> {
        match self.kernel.mode {
            CollisionMode::Enskog => occupancy_r(rho, &self.kernel.space, &self.kernel.model),
            CollisionMode::Boltzmann => Ok(OccupancyField { values: vec![0.0; rho.len()] }),
        }
    }

    /// Vlasov force at cell centers from a density field.
    pub fn force_field(&self, rho: &[f64]) -> Vec<f64> {
        match &self.attraction {
            Some(att) => {
                let grid = &self.kernel.space;
                vlasov_force(&|x: f64| grid.stencil(x).map_or(0.0, |s| s.apply(rho)), att, grid)
            }
            None => vec![0.0; rho.len()],
        }
    }

    /// `C · min(Δx/ξmax, 1/max(-J/f), h/max|F|)`.
    pub fn stable_dt(&self, state: &SimState) -> Result<f64> {
        let vg = &state.velocity;
        let xi = vg.axis.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut bound = state.space.dx / xi;
        if self.collisions {
            let rho = state.density();
            let r = self.occupancy(&rho)?;
            let out = self.kernel.collision_term(&state.f, &r)?;
            if out.max_rate > 1e12 {
                return Err(Error::Numerical(format!("collision rate {} indicates a runaway state", out.max_rate)));
            }
            if out.max_rate > 0.0 {
                bound = bound.min(1.0 / out.max_rate);
            }
            let fmax = self.force_field(&rho).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if fmax > 0.0 {
                bound = bound.min(vg.h / fmax);
            }
        }
        Ok(self.cfl * bound)
    }

    /// Collision plus force right-hand side with frozen occupancy and force.
    fn rhs(&self, f: &DistributionField, r: &OccupancyField, force: &[f64]) -> Result<(DistributionField, f64, f64)> {
        let out = self.kernel.collision_term(f, r)?;
        let mut j = out.j;
        let vg = &self.kernel.velocity;
        let mut lost = 0.0;
        if force.iter().any(|v| *v != 0.0) {
            for (c, fc) in force.iter().enumerate() {
                let (term, l) = force_term(f.cell(c), *fc, vg);
                lost += l * self.kernel.space.dx;
                j.cell_mut(c).iter_mut().zip(&term).for_each(|(a, b)| *a += b);
            }
        }
        Ok((j, out.max_rate, lost))
    }

    /// One Strang step of length `dt`.
    pub fn step(&self, state: &mut SimState, dt: f64) -> Result<StepReport> {
        let mut rep = StepReport::default();
        let grid = state.space.clone();
        let vg = state.velocity.clone();
        rep.wall_imbalance = transport(&mut state.f, &grid, &vg, 0.5 * dt);
        if self.collisions {
            let rho = density(&state.f, &vg);
            let total: f64 = rho.iter().sum::<f64>() * grid.dx;
            let r = self.occupancy(&rho)?;
            let force = self.force_field(&rho);
            let (l0, rate0, lost0) = self.rhs(&state.f, &r, &force)?;
            let mut f1 = state.f.clone();
            f1.values.iter_mut().zip(&l0.values).for_each(|(a, b)| *a += dt * b);
            let (l1, rate1, lost1) = self.rhs(&f1, &r, &force)?;
            let mut clipped = 0.0;
            for ((f, a), b) in state.f.values.iter_mut().zip(&f1.values).zip(&l1.values) {
                let v = 0.5 * *f + 0.5 * (a + dt * b);
                if v < 0.0 {
                    clipped -= v;
                    *f = 0.0;
                } else {
                    *f = v;
                }
            }
            clipped *= vg.weight() * grid.dx;
            rep.max_rate = rate0.max(rate1);
            if total > 0.0 {
                rep.clipped_mass = clipped / total;
                rep.force_truncation = 0.5 * dt * (lost0 + lost1) / total;
            }
            if rep.clipped_mass > self.clip_budget {
                return Err(Error::Numerical(format!(
                    "positivity guard clipped {:.3e} of the mass (budget {:.1e}); reduce dt",
                    rep.clipped_mass, self.clip_budget
                )));
            }
        }
        let imb = transport(&mut state.f, &grid, &vg, 0.5 * dt);
        rep.wall_imbalance = rep.wall_imbalance.max(imb);
        state.time += dt;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Scheme;
    use crate::factor::EnskogModel;
    use crate::sphere::sphere_quadrature;
    use crate::state::maxwellian;

    fn state_with(boundary: Boundary, nx: usize, profile: impl Fn(f64) -> (f64, f64, f64)) -> SimState {
        let space = SpatialGrid::new(4.0, nx, boundary).unwrap();
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        let mut f = DistributionField::zeros(nx, vg.len());
        for j in 0..nx {
            let (r, v, t) = profile(space.center(j));
            f.cell_mut(j).copy_from_slice(&maxwellian(r, [v, 0.0, 0.0], t, &vg));
        }
        SimState {
            space,
            velocity: vg,
            f,
            time: 0.0,
        }
    }

    fn integrator(s: &SimState) -> Integrator {
        let kernel = CollisionKernel::new(
            s.space.clone(),
            s.velocity.clone(),
            EnskogModel::van_der_waals(),
            sphere_quadrature(6).unwrap(),
            CollisionMode::Enskog,
            Scheme::Symmetric,
            1.0,
        );
        Integrator::new(kernel, None, 0.5)
    }

    #[test]
    fn transport_conserves_mass_for_every_boundary() {
        for b in [Boundary::Periodic, Boundary::Specular, Boundary::Diffuse { wall_temperature: 1.5 }] {
            let mut s = state_with(b, 10, |x| (0.1 + 0.05 * x.sin(), 0.3 * x.cos(), 1.0 + 0.1 * x));
            let m0: f64 = s.density().iter().sum();
            let mut imb: f64 = 0.0;
            for _ in 0..20 {
                imb = imb.max(transport(&mut s.f, &s.space.clone(), &s.velocity.clone(), 0.04));
            }
            let m1: f64 = s.density().iter().sum();
            assert!(((m1 - m0) / m0).abs() < 1e-12, "{b}: {}", (m1 - m0) / m0);
            assert!(imb < 1e-15, "{b}");
            assert!(s.f.is_nonnegative());
        }
    }

    #[test]
    fn specular_ghost_mirrors_even_distribution() {
        let s = state_with(Boundary::Specular, 6, |x| (0.1 + 0.01 * x, 0.0, 1.0));
        let nm = s.f.to_node_major();
        for k in 0..s.velocity.len() {
            let g = apply_boundary(&nm, k, &s.space, &s.velocity);
            assert_eq!(g.left[1], nm[k * 6]);
            assert_eq!(g.right[0], nm[k * 6 + 5]);
        }
    }

    #[test]
    fn diffuse_wall_at_gas_temperature_is_stationary() {
        let mut s = state_with(Boundary::Diffuse { wall_temperature: 1.0 }, 6, |_| (0.1, 0.0, 1.0));
        let before = s.f.clone();
        transport(&mut s.f, &s.space.clone(), &s.velocity.clone(), 0.05);
        let scale = before.values.iter().cloned().fold(0.0, f64::max);
        for (a, b) in s.f.values.iter().zip(&before.values) {
            assert!((a - b).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn free_transport_converges_at_second_order() {
        let err = |nx: usize| {
            let k = 2.0 * std::f64::consts::PI / 4.0;
            let mut s = state_with(Boundary::Periodic, nx, |x| (1.0 + 0.2 * (k * x).sin(), 0.0, 1.0));
            let vg = s.velocity.clone();
            let node = vg.index([6, 3, 3]);
            let c = vg.node(node)[0];
            let t = 1.0;
            let steps = (t / (0.4 * s.space.dx / c.abs())).ceil() as usize;
            let dt = t / steps as f64;
            let f0 = s.f.cell(0)[node] / (1.0 + 0.2 * (k * s.space.center(0)).sin());
            for _ in 0..steps {
                transport(&mut s.f, &s.space.clone(), &vg, dt);
            }
            (0..nx)
                .map(|j| {
                    let exact = f0 * (1.0 + 0.2 * (k * (s.space.center(j) - c * t)).sin());
                    (s.f.cell(j)[node] - exact).abs()
                })
                .sum::<f64>()
                / nx as f64
        };
        let (e1, e2, e3) = (err(32), err(64), err(128));
        let order = ((e1 / e2).ln() / 2f64.ln() + (e2 / e3).ln() / 2f64.ln()) / 2.0;
        assert!(order > 1.6, "observed order {order}");
    }

    #[test]
    fn uniform_maxwellian_stays_put() {
        let mut s = state_with(Boundary::Periodic, 4, |_| (0.1, 0.0, 1.0));
        let integ = integrator(&s);
        let before = s.f.clone();
        let dt = integ.stable_dt(&s).unwrap();
        assert!((dt - 0.5 * s.space.dx / s.velocity.axis.iter().fold(0.0f64, |m, v| m.max(v.abs()))).abs() < 1e-15);
        for _ in 0..5 {
            integ.step(&mut s, dt).unwrap();
        }
        let scale = before.values.iter().cloned().fold(0.0, f64::max);
        for (a, b) in s.f.values.iter().zip(&before.values) {
            assert!((a - b).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn upwind_force_keeps_mass() {
        let vg = VelocityGrid::new(8, 4.0).unwrap();
        let f = maxwellian(0.2, [0.0; 3], 1.0, &vg);
        let (term, lost) = force_term(&f, 0.3, &vg);
        assert!(term.iter().sum::<f64>().abs() < 1e-15);
        let mom: f64 = (0..vg.len()).map(|k| vg.node(k)[0] * term[k]).sum::<f64>() * vg.weight();
        // dP/dt = ρF for a well-resolved distribution.
        assert!((mom - 0.2 * 0.3).abs() < 1e-3, "{mom}");
        assert!(lost > 0.0 && lost < 1e-3);
    }
}
