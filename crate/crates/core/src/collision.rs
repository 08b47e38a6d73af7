//! Nonlocal Enskog collision operator on the discrete velocity grid, plus the
//! production and exchange terms and the kinetic entropy flux that share its
//! node sweep.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor::{EnskogModel, OccupancyField};
use crate::quadrature::GaussRule;
use crate::sphere::SphereQuadrature;
use crate::state::{DistributionField, SpatialGrid, Stencil, VelocityGrid};

/// Memory budget for keeping the collision events of every sphere node.
const EVENT_CACHE_BYTES: usize = 400 << 20;

/// Whether collisions are displaced and weighted by the Enskog factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionMode {
    Enskog,
    /// `g ≡ 1` and no σ-displacement of the partner.
    Boltzmann,
}

/// How the gain of each collision event is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Gain minus loss of every event, split between the pre-collision node
    /// and the projected post-collision nodes.
    Symmetric,
    /// Loss of every event moved from the pre-collision node onto the projected
    /// post-collision nodes.
    Weak,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "symmetric" => Ok(Scheme::Symmetric),
            "weak" => Ok(Scheme::Weak),
            _ => Err(format!("unknown collision scheme `{s}`")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Symmetric => "symmetric",
            Scheme::Weak => "weak",
        })
    }
}

/// Seven-node star stencil around a post-collision velocity: a center node
/// and its two neighbours along each axis, with per-axis offsets `t` (in
/// units of `h`, `|t| ≤ 1`) of the target from the center.
///
/// The quadratic weights reproduce `1`, `ξ` and `|ξ|²` exactly, so mass,
/// momentum and energy are conserved, and they interpolate the logarithm of
/// any isotropic Maxwellian exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarStencil {
    pub center: u32,
    pub t: [f64; 3],
}

/// Largest amount the interpolated log may exceed the largest stencil log.
///
/// Exact Maxwellians overshoot by at most `3h²/8T`; the cap only bites where
/// near-empty nodes carry negative weights.
pub const LOG_OVERSHOOT: f64 = 2.0;

// Points this close to the grid hull count as inside, so mirrored events
// are kept or dropped together.
const HULL_SLACK: f64 = 1e-9;

impl StarStencil {
    /// Weights in the order center, `x−`, `x+`, `y−`, `y+`, `z−`, `z+`.
    #[inline]
    pub fn weights(&self) -> [f64; 7] {
        let [a, b, c] = self.t;
        [
            1.0 - a * a - b * b - c * c,
            0.5 * (a * a - a),
            0.5 * (a * a + a),
            0.5 * (b * b - b),
            0.5 * (b * b + b),
            0.5 * (c * c - c),
            0.5 * (c * c + c),
        ]
    }

    /// Node indices matching [`StarStencil::weights`].
    #[inline]
    pub fn nodes(&self, n_v: usize) -> [usize; 7] {
        let c = self.center as usize;
        let (sx, sy) = (n_v * n_v, n_v);
        [c, c - sx, c + sx, c - sy, c + sy, c - 1, c + 1]
    }
}

/// Center index along one axis: the nearest node in the inner half of the
/// grid, and in the outer quarters the bracketing node nearer the middle, so
/// that negative weights never land on a sparsely populated outer node.
#[inline]
pub fn star_center(u: f64, top: f64) -> f64 {
    let c = if u > 0.75 * top {
        u.floor()
    } else if u < 0.25 * top {
        u.floor() + 1.0
    } else {
        u.round()
    };
    c.clamp(1.0, top - 1.0)
}

/// Star stencil for the velocity at continuous axis coordinates `u`
/// (node `i` sits at `u = i`). `None` outside the node hull.
pub fn star_stencil(vg: &VelocityGrid, u: [f64; 3]) -> Option<StarStencil> {
    let n = vg.n_v;
    let top = (n - 1) as f64;
    let mut c = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        if !(u[a] >= -HULL_SLACK && u[a] <= top + HULL_SLACK) {
            return None;
        }
        let r = star_center(u[a], top);
        c[a] = r as usize;
        t[a] = u[a] - r;
    }
    Some(StarStencil {
        center: vg.index(c) as u32,
        t,
    })
}

/// One ordered pair `(k, l)` colliding along a sphere node with `V > 0`,
/// with the stencils of both post-collision velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub k: u32,
    pub l: u32,
    /// Relative speed along the sphere node, `(ξ_l - ξ_k)·α`.
    pub speed: f64,
    /// Stencil of `ξ_k' = ξ_k + Vα`.
    pub post_k: StarStencil,
    /// Stencil of `ξ_l' = ξ_l - Vα`.
    pub post_l: StarStencil,
}

/// Collision events of one sphere node. Pairs whose post-collision
/// velocities leave the grid are dropped as a whole.
pub fn pair_events(vg: &VelocityGrid, sphere: &SphereQuadrature, q: usize, subsample: f64) -> Vec<PairEvent> {
    let alpha = sphere.nodes[q];
    let nodes: Vec<[f64; 3]> = (0..vg.len()).map(|k| vg.node(k)).collect();
    let idx: Vec<[usize; 3]> = (0..vg.len()).map(|k| vg.axis_index(k)).collect();
    let mut out = Vec::new();
    for k in 0..vg.len() {
        for l in 0..vg.len() {
            let (a, b) = (nodes[k], nodes[l]);
            let speed = (b[0] - a[0]) * alpha[0] + (b[1] - a[1]) * alpha[1] + (b[2] - a[2]) * alpha[2];
            if !(speed > 0.0) || !keep_pair(k.min(l), k.max(l), subsample) {
                continue;
            }
            let shift = [speed * alpha[0] / vg.h, speed * alpha[1] / vg.h, speed * alpha[2] / vg.h];
            let (ik, il) = (idx[k], idx[l]);
            let uk = [ik[0] as f64 + shift[0], ik[1] as f64 + shift[1], ik[2] as f64 + shift[2]];
            let ul = [il[0] as f64 - shift[0], il[1] as f64 - shift[1], il[2] as f64 - shift[2]];
            if let (Some(post_k), Some(post_l)) = (star_stencil(vg, uk), star_stencil(vg, ul)) {
                out.push(PairEvent {
                    k: k as u32,
                    l: l as u32,
                    speed,
                    post_k,
                    post_l,
                });
            }
        }
    }
    out
}

/// Interpolated log at a star stencil from a node-major log table, capped at
/// [`LOG_OVERSHOOT`] above the largest stencil value.
#[inline]
pub fn star_log(ln: &[f64], nx: usize, j: usize, nodes: &[usize; 7], w: &[f64; 7]) -> f64 {
    let mut acc = 0.0;
    let mut top = f64::NEG_INFINITY;
    for i in 0..7 {
        let v = ln[nodes[i] * nx + j];
        acc += w[i] * v;
        top = top.max(v);
    }
    acc.min(top + LOG_OVERSHOOT)
}

// Deterministic low-discrepancy selection of unordered pairs.
fn keep_pair(a: usize, b: usize, fraction: f64) -> bool {
    if fraction >= 1.0 {
        return true;
    }
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    const PLASTIC: f64 = 0.754_877_666_246_692_7;
    let u = (a as f64 * GOLDEN + b as f64 * PLASTIC).fract();
    u < fraction
}

/// Natural log with zero mapped to the log of the smallest subnormal, so that
/// sums of logs stay finite and their exponentials underflow to zero.
#[inline]
pub fn safe_ln(x: f64) -> f64 {
    x.max(f64::from_bits(1)).ln()
}

/// Cell-resolved output of the collision operator.
#[derive(Debug, Clone)]
pub struct CollisionOutput {
    pub j: DistributionField,
    /// Per-cell collision-rate scale `Σ b V (gain + loss)`, in density/time units.
    pub rate_scale: Vec<f64>,
    /// Largest depletion rate `-J/f` over nodes carrying non-negligible mass.
    pub max_rate: f64,
}

/// Production `D`, exchange `I` and their common scale, per cell.
#[derive(Debug, Clone)]
pub struct ProductionExchange {
    pub d: Vec<f64>,
    pub i: Vec<f64>,
    /// `Σ ½ b V g f f_*`, the loss-rate scale of the pair sum.
    pub scale: Vec<f64>,
}

/// Node-major copy of a distribution with its logarithm.
struct NodeMajor {
    f: Vec<f64>,
    ln: Vec<f64>,
}

impl NodeMajor {
    fn new(field: &DistributionField) -> Self {
        let f = field.to_node_major();
        let ln = f.iter().map(|v| safe_ln(*v)).collect();
        NodeMajor { f, ln }
    }

    fn shifted(&self, stencils: &[Option<Stencil>], n_nodes: usize) -> NodeMajor {
        let nx = stencils.len();
        let mut f = vec![0.0; self.f.len()];
        for k in 0..n_nodes {
            let row = &self.f[k * nx..(k + 1) * nx];
            for (j, s) in stencils.iter().enumerate() {
                if let Some(s) = s {
                    f[k * nx + j] = s.apply(row);
                }
            }
        }
        let ln = f.iter().map(|v| safe_ln(*v)).collect();
        NodeMajor { f, ln }
    }
}

/// The collision operator with its grids, model and sphere rule.
#[derive(Debug, Clone)]
pub struct CollisionKernel {
    pub space: SpatialGrid,
    pub velocity: VelocityGrid,
    pub model: EnskogModel,
    pub sphere: SphereQuadrature,
    pub mode: CollisionMode,
    pub scheme: Scheme,
    /// Fraction of unordered velocity pairs kept (1 = full sweep).
    pub subsample: f64,
    events: Option<Vec<Vec<PairEvent>>>,
}

impl CollisionKernel {
    pub fn new(
        space: SpatialGrid,
        velocity: VelocityGrid,
        model: EnskogModel,
        sphere: SphereQuadrature,
        mode: CollisionMode,
        scheme: Scheme,
        subsample: f64,
    ) -> Self {
        let mut kernel = CollisionKernel {
            space,
            velocity,
            model,
            sphere,
            mode,
            scheme,
            subsample: subsample.clamp(f64::MIN_POSITIVE, 1.0),
            events: None,
        };
        let n = kernel.velocity.len();
        let estimate = n * n / 2 * kernel.sphere.len() * std::mem::size_of::<PairEvent>();
        if estimate <= EVENT_CACHE_BYTES {
            let events = (0..kernel.sphere.len())
                .into_par_iter()
                .map(|q| pair_events(&kernel.velocity, &kernel.sphere, q, kernel.subsample))
                .collect();
            kernel.events = Some(events);
        }
        kernel
    }

    pub fn events(&self, q: usize) -> Cow<'_, [PairEvent]> {
        match &self.events {
            Some(e) => Cow::Borrowed(&e[q]),
            None => Cow::Owned(pair_events(&self.velocity, &self.sphere, q, self.subsample)),
        }
    }

    /// `σ²/m · w_q · w_v`, divided by the subsampling fraction.
    fn base(&self, q: usize) -> f64 {
        self.model.sigma * self.model.sigma / self.model.mass * self.sphere.weights[q] * self.velocity.weight()
            / self.subsample
    }

    /// Partner displacement along x for a sphere node.
    pub fn displacement(&self, q: usize) -> f64 {
        match self.mode {
            CollisionMode::Enskog => self.model.sigma * self.sphere.nodes[q][0],
            CollisionMode::Boltzmann => 0.0,
        }
    }

    fn stencils(&self, shift: f64) -> Vec<Option<Stencil>> {
        (0..self.space.n_x)
            .map(|j| {
                let x = self.space.center(j);
                if shift == 0.0 {
                    Some(Stencil { left: j, right: j, theta: 0.0 })
                } else {
                    self.space.stencil(x + shift)
                }
            })
            .collect()
    }

    /// Factor `g(a_j, b_j)` for the given pairs of positions per cell.
    fn factor(
        &self,
        r: &OccupancyField,
        a: &[Option<Stencil>],
        b: &[Option<Stencil>],
    ) -> Result<Vec<f64>> {
        if self.mode == CollisionMode::Boltzmann {
            return Ok(vec![1.0; self.space.n_x]);
        }
        let limit = self.model.x_max();
        let s = |st: &Stencil, j: usize| -> Result<f64> {
            let x = r.at_stencil(st);
            if !(0.0..limit).contains(&x) {
                return Err(Error::ModelDomain {
                    cell: Some(j),
                    occupancy: x,
                    limit,
                });
            }
            Ok(self.model.s_unchecked(x))
        };
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(j, (sa, sb))| match (sa, sb) {
                (Some(sa), Some(sb)) => Ok(s(sa, j)? + s(sb, j)?),
                _ => Ok(0.0),
            })
            .collect()
    }

    /// Partner legs `(cell, weight)` of the linear stencil at `x_j + shift`.
    /// Periodic legs are transposes of the legs at `-shift`, so every pair is
    /// met once from each side with the same weight.
    fn legs(&self, shift: f64) -> Vec<[(usize, f64); 2]> {
        self.stencils(shift)
            .into_iter()
            .map(|s| match s {
                Some(s) => [(s.left, 1.0 - s.theta), (s.right, s.theta)],
                None => [(0, 0.0), (0, 0.0)],
            })
            .collect()
    }

    /// Contact value `S(R)` per cell; `½` for Boltzmann collisions so pair factors are 1.
    fn contact(&self, r: &OccupancyField) -> Result<Vec<f64>> {
        if self.mode == CollisionMode::Boltzmann {
            return Ok(vec![0.5; self.space.n_x]);
        }
        let limit = self.model.x_max();
        r.values
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if !(0.0..limit).contains(&x) {
                    return Err(Error::ModelDomain {
                        cell: Some(j),
                        occupancy: x,
                        limit,
                    });
                }
                Ok(self.model.s_unchecked(x))
            })
            .collect()
    }

    /// Collision operator `J(f)` for every cell and velocity node.
    pub fn collision_term(&self, field: &DistributionField, r: &OccupancyField) -> Result<CollisionOutput> {
        let nx = self.space.n_x;
        let nn = self.velocity.len();
        let here = NodeMajor::new(field);
        let s = self.contact(r)?;
        let per_q: Vec<(Vec<f64>, Vec<f64>)> = (0..self.sphere.len())
            .into_par_iter()
            .map(|q| {
                let d = self.displacement(q);
                let plus = self.legs(d);
                let minus = self.legs(-d);
                let base = self.base(q);
                let n_v = self.velocity.n_v;
                let mut acc = vec![0.0; nn * nx];
                let mut scale = vec![0.0; nx];
                let mut lk = vec![0.0; nx];
                let mut ll = vec![0.0; nx];
                for e in self.events(q).iter() {
                    let b = base * e.speed;
                    let (k, l) = (e.k as usize * nx, e.l as usize * nx);
                    let nk = e.post_k.nodes(n_v);
                    let nl = e.post_l.nodes(n_v);
                    let wk = e.post_k.weights();
                    let wl = e.post_l.weights();
                    if self.scheme == Scheme::Symmetric {
                        for j in 0..nx {
                            lk[j] = star_log(&here.ln, nx, j, &nk, &wk);
                            ll[j] = star_log(&here.ln, nx, j, &nl, &wl);
                        }
                    }
                    for j in 0..nx {
                        let mut loss = 0.0;
                        for &(m, w) in &minus[j] {
                            if w != 0.0 {
                                loss += w * (s[j] + s[m]) * here.f[l + m];
                            }
                        }
                        loss *= here.f[k + j];
                        match self.scheme {
                            Scheme::Symmetric => {
                                let mut gain = 0.0;
                                for &(m, w) in &plus[j] {
                                    if w != 0.0 {
                                        gain += w * (s[j] + s[m]) * (lk[j] + ll[m]).exp();
                                    }
                                }
                                let half = 0.5 * b * (gain - loss);
                                acc[k + j] += half;
                                for i in 0..7 {
                                    acc[nk[i] * nx + j] -= wk[i] * half;
                                }
                                scale[j] += b * (gain + loss);
                            }
                            Scheme::Weak => {
                                let loss = b * loss;
                                acc[k + j] -= loss;
                                for i in 0..7 {
                                    acc[nk[i] * nx + j] += wk[i] * loss;
                                }
                                scale[j] += 2.0 * loss;
                            }
                        }
                    }
                }
                (acc, scale)
            })
            .collect();
        let mut total = vec![0.0; nn * nx];
        let mut rate_scale = vec![0.0; nx];
        for (acc, scale) in per_q {
            total.iter_mut().zip(&acc).for_each(|(t, a)| *t += a);
            rate_scale.iter_mut().zip(&scale).for_each(|(t, a)| *t += a);
        }
        let fmax = here.f.iter().copied().fold(0.0, f64::max);
        let mut max_rate: f64 = 0.0;
        for (jv, fv) in total.iter().zip(&here.f) {
            if *fv > 1e-12 * fmax {
                max_rate = max_rate.max(-jv / fv);
            }
        }
        if !max_rate.is_finite() {
            return Err(Error::Numerical("collision rate is not finite".into()));
        }
        Ok(CollisionOutput {
            j: DistributionField::from_node_major(nx, nn, &total),
            rate_scale,
            max_rate,
        })
    }

    /// Production `D` and exchange `I` on the same event sweep as the collision term.
    pub fn production_exchange(&self, field: &DistributionField, r: &OccupancyField) -> Result<ProductionExchange> {
        let nx = self.space.n_x;
        let here = NodeMajor::new(field);
        let s = self.contact(r)?;
        let fmax = here.f.iter().copied().fold(0.0, f64::max);
        let floor = 1e-300 * fmax * fmax;
        let per_q: Vec<[Vec<f64>; 3]> = (0..self.sphere.len())
            .into_par_iter()
            .map(|q| {
                let minus = self.legs(-self.displacement(q));
                // Integrated over both velocities: one more velocity weight.
                let base = self.base(q) * self.velocity.weight();
                let n_v = self.velocity.n_v;
                let mut d = vec![0.0; nx];
                let mut i = vec![0.0; nx];
                let mut sc = vec![0.0; nx];
                let mut lk = vec![0.0; nx];
                let mut ll = vec![0.0; nx];
                for e in self.events(q).iter() {
                    let b = 0.5 * base * e.speed;
                    let (k, l) = (e.k as usize * nx, e.l as usize * nx);
                    let nk = e.post_k.nodes(n_v);
                    let nl = e.post_l.nodes(n_v);
                    let wk = e.post_k.weights();
                    let wl = e.post_l.weights();
                    for j in 0..nx {
                        lk[j] = star_log(&here.ln, nx, j, &nk, &wk);
                        ll[j] = star_log(&here.ln, nx, j, &nl, &wl);
                    }
                    for j in 0..nx {
                        for &(m, w) in &minus[j] {
                            if w == 0.0 {
                                continue;
                            }
                            let w = b * w * (s[j] + s[m]);
                            let ff = here.f[k + j] * here.f[l + m];
                            let lp = lk[j] + ll[m];
                            i[j] += w * (lp.exp() - ff);
                            sc[j] += w * ff;
                            if ff > floor {
                                d[j] += w * ff * (lp - (here.ln[k + j] + here.ln[l + m]));
                            }
                        }
                    }
                }
                [d, i, sc]
            })
            .collect();
        let mut out = ProductionExchange {
            d: vec![0.0; nx],
            i: vec![0.0; nx],
            scale: vec![0.0; nx],
        };
        for [d, i, s] in per_q {
            for j in 0..nx {
                out.d[j] += d[j];
                out.i[j] += i[j];
                out.scale[j] += s[j];
            }
        }
        Ok(out)
    }

    /// Kinetic part of the collisional entropy flux, `J^(k)_x`, at cell centers.
    pub fn flux_jk(&self, field: &DistributionField, r: &OccupancyField, n_tau: usize) -> Result<Vec<f64>> {
        let nx = self.space.n_x;
        let nn = self.velocity.len();
        if self.mode == CollisionMode::Boltzmann {
            return Ok(vec![0.0; nx]);
        }
        let here = NodeMajor::new(field);
        let tau = GaussRule::unit(n_tau.max(4));
        let per_q: Vec<Result<Vec<f64>>> = (0..self.sphere.len())
            .into_par_iter()
            .map(|q| {
                let d = self.displacement(q);
                let ax = self.sphere.nodes[q][0];
                let mut out = vec![0.0; nx];
                if ax == 0.0 {
                    return Ok(out);
                }
                let base = 0.5 * self.model.sigma * self.base(q) * self.velocity.weight() * ax;
                let n_v = self.velocity.n_v;
                let events = self.events(q);
                for (t, wt) in tau.nodes.iter().zip(&tau.weights) {
                    let a_st = self.stencils(t * d);
                    let b_st = self.stencils((t - 1.0) * d);
                    let g = self.factor(r, &a_st, &b_st)?;
                    let a = here.shifted(&a_st, nn);
                    let b = here.shifted(&b_st, nn);
                    for e in events.iter() {
                        let c = wt * base * e.speed;
                        let (k, l) = (e.k as usize * nx, e.l as usize * nx);
                        let nk = e.post_k.nodes(n_v);
                        let wk = e.post_k.weights();
                        for j in 0..nx {
                            let fk = a.f[k + j];
                            if fk == 0.0 || g[j] == 0.0 {
                                continue;
                            }
                            let lnp = star_log(&a.ln, nx, j, &nk, &wk);
                            out[j] += c * g[j] * fk * b.f[l + j] * (lnp - a.ln[k + j]);
                        }
                    }
                }
                Ok(out)
            })
            .collect();
        let mut total = vec![0.0; nx];
        for part in per_q {
            total.iter_mut().zip(&part?).for_each(|(t, a)| *t += a);
        }
        Ok(total)
    }
}

/// Velocity moment `⟨J ln f⟩` of a collision term, per cell.
pub fn log_moment(j: &DistributionField, f: &DistributionField, vg: &VelocityGrid) -> Vec<f64> {
    (0..f.n_cells)
        .map(|c| {
            let (jc, fc) = (j.cell(c), f.cell(c));
            vg.symmetric_sum(|k| if fc[k] > 0.0 { jc[k] * fc[k].ln() } else { 0.0 }) * vg.weight()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::sphere_quadrature;
    use crate::state::{maxwellian, Boundary};

    #[test]
    fn star_weights_reproduce_collision_invariants() {
        let vg = VelocityGrid::new(8, 4.0).unwrap();
        let sphere = sphere_quadrature(14).unwrap();
        let n = vg.n_v;
        for q in [0, 3, 9] {
            let alpha = sphere.nodes[q];
            for e in pair_events(&vg, &sphere, q, 1.0) {
                let (xk, xl) = (vg.node(e.k as usize), vg.node(e.l as usize));
                let post = |st: &StarStencil| {
                    let mut m = [0.0; 5];
                    for (node, w) in st.nodes(n).iter().zip(st.weights()) {
                        let v = vg.node(*node);
                        m[0] += w;
                        for a in 0..3 {
                            m[1 + a] += w * v[a];
                        }
                        m[4] += w * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                    }
                    m
                };
                let (pk, pl) = (post(&e.post_k), post(&e.post_l));
                for a in 0..3 {
                    let exact_k = xk[a] + e.speed * alpha[a];
                    assert!((pk[1 + a] - exact_k).abs() < 1e-12);
                    assert!((pk[1 + a] + pl[1 + a] - xk[a] - xl[a]).abs() < 1e-12);
                }
                let e0: f64 = (0..3).map(|a| xk[a] * xk[a] + xl[a] * xl[a]).sum();
                assert!((pk[0] - 1.0).abs() < 1e-15 && (pl[0] - 1.0).abs() < 1e-15);
                assert!((pk[4] + pl[4] - e0).abs() < 1e-11 * e0.max(1.0));
            }
        }
    }

    #[test]
    fn star_log_is_exact_for_maxwellians() {
        let vg = VelocityGrid::new(10, 4.0).unwrap();
        let f = maxwellian(0.7, [0.3, -0.2, 0.1], 1.3, &vg);
        let ln: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let st = star_stencil(&vg, [3.3, 6.8, 0.4]).unwrap();
        let got = star_log(&ln, 1, 0, &st.nodes(10), &st.weights());
        let u = |i: f64| (i + 0.5) * vg.h - vg.xi_max;
        let (x, y, z) = (u(3.3), u(6.8), u(0.4));
        let c2 = (x - 0.3).powi(2) + (y + 0.2).powi(2) + (z - 0.1).powi(2);
        let exact = (0.7f64).ln() - 1.5 * (2.0 * std::f64::consts::PI * 1.3).ln() - c2 / 2.6;
        let norm = ln[vg.index([3, 7, 0])] - ((0.7f64).ln() - 1.5 * (2.0 * std::f64::consts::PI * 1.3).ln() - ((u(3.0) - 0.3).powi(2) + (u(7.0) + 0.2).powi(2) + (u(0.0) - 0.1).powi(2)) / 2.6);
        assert!((got - exact - norm).abs() < 1e-12, "{got} {exact} {norm}");
        assert!(star_stencil(&vg, [9.2, 1.0, 1.0]).is_none());
    }

    #[test]
    fn mirrored_events_share_their_stencils() {
        let vg = VelocityGrid::new(8, 4.0).unwrap();
        let sphere = sphere_quadrature(14).unwrap();
        let q = 5;
        let qa = sphere.antipode[q];
        let fwd = pair_events(&vg, &sphere, q, 1.0);
        let back = pair_events(&vg, &sphere, qa, 1.0);
        for e in fwd.iter().take(500) {
            let m = back.iter().find(|b| b.k == e.l && b.l == e.k).expect("mirror event");
            assert_eq!((m.post_k, m.post_l), (e.post_l, e.post_k));
            assert_eq!(m.speed, e.speed);
        }
    }

    #[test]
    fn uniform_maxwellian_is_stationary_and_mass_is_exact() {
        let space = SpatialGrid::new(2.0, 4, Boundary::Periodic).unwrap();
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        let model = EnskogModel::van_der_waals();
        let kernel = CollisionKernel::new(
            space.clone(),
            vg.clone(),
            model.clone(),
            sphere_quadrature(6).unwrap(),
            CollisionMode::Enskog,
            Scheme::Symmetric,
            1.0,
        );
        let m = maxwellian(0.1, [0.0; 3], 1.0, &vg);
        let mut f = DistributionField::zeros(4, vg.len());
        for j in 0..4 {
            f.cell_mut(j).copy_from_slice(&m);
        }
        let r = crate::factor::occupancy_r(&[0.1; 4], &space, &model).unwrap();
        let out = kernel.collision_term(&f, &r).unwrap();
        for j in 0..4 {
            let jmax = out.j.cell(j).iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mass: f64 = out.j.cell(j).iter().sum();
            assert!(jmax < 1e-12 * out.rate_scale[j], "{jmax} vs {}", out.rate_scale[j]);
            assert!(mass.abs() < 1e-13 * out.rate_scale[j]);
        }
    }
}
