//! Entropy, free-energy and transfer diagnostics with balance audits.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::collision::{CollisionKernel, CollisionMode};
use crate::error::{Error, Result};
use crate::factor::{occupancy_r, EnskogModel, OccupancyField};
use crate::quadrature::GaussRule;
use crate::state::{moments, Boundary, CellMoments, DistributionField, SimState, SpatialGrid, VelocityGrid};
use crate::vlasov::{vlasov_transfer, AttractionKernel};
use crate::GAS_CONSTANT;

/// Macroscopic slab fields sampled at arbitrary positions.
///
/// Every sampler returns zero outside the spatial domain.
pub trait SlabFields: Sync {
    fn rho(&self, x: f64) -> f64;
    /// `ρ v_x`.
    fn momentum(&self, x: f64) -> f64;
    fn occupancy(&self, x: f64) -> f64;
    /// Positions in `[a, b]` where the samplers have kinks.
    fn knots(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Pair integrand `g(x, y) [ρ(x)(ρv)(y) − (ρv)(x)ρ(y)]` of the reduced exchange term.
    fn exchange_pair(&self, model: &EnskogModel, x: f64, y: f64) -> f64 {
        let ry = self.rho(y);
        if ry == 0.0 {
            return 0.0;
        }
        let g = model_s(model, self.occupancy(x)) + model_s(model, self.occupancy(y));
        g * (self.rho(x) * self.momentum(y) - self.momentum(x) * ry)
    }
}

/// Cell data with linear interpolation between centers.
#[derive(Debug, Clone)]
pub struct GridFields<'a> {
    pub grid: &'a SpatialGrid,
    pub rho: Vec<f64>,
    pub momentum: Vec<f64>,
    pub occupancy: Vec<f64>,
}

impl<'a> GridFields<'a> {
    pub fn new(grid: &'a SpatialGrid, rho: Vec<f64>, momentum: Vec<f64>, occupancy: Vec<f64>) -> Self {
        GridFields {
            grid,
            rho,
            momentum,
            occupancy,
        }
    }

    fn sample(&self, v: &[f64], x: f64) -> f64 {
        self.grid.stencil(x).map_or(0.0, |s| s.apply(v))
    }
}

impl SlabFields for GridFields<'_> {
    fn rho(&self, x: f64) -> f64 {
        self.sample(&self.rho, x)
    }

    fn momentum(&self, x: f64) -> f64 {
        self.sample(&self.momentum, x)
    }

    fn occupancy(&self, x: f64) -> f64 {
        self.sample(&self.occupancy, x)
    }

    fn knots(&self, a: f64, b: f64) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::new();
        let lo = ((a - 0.5 * g.dx) / g.dx).ceil() as i64;
        let hi = ((b - 0.5 * g.dx) / g.dx).floor() as i64;
        for i in lo..=hi {
            out.push((i as f64 + 0.5) * g.dx);
        }
        if !g.boundary.is_periodic() {
            for w in [0.0, g.length] {
                if w > a && w < b {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Interpolates the whole pair product between partner cells, as the
    /// collision sweep does, instead of composing interpolated fields.
    fn exchange_pair(&self, model: &EnskogModel, x: f64, y: f64) -> f64 {
        let Some(st) = self.grid.stencil(y) else {
            return 0.0;
        };
        let (rx, mx) = (self.rho(x), self.momentum(x));
        let sx = model_s(model, self.occupancy(x));
        let pair = |m: usize| (sx + model_s(model, self.occupancy[m])) * (rx * self.momentum[m] - mx * self.rho[m]);
        if st.theta == 0.0 {
            pair(st.left)
        } else {
            (1.0 - st.theta) * pair(st.left) + st.theta * pair(st.right)
        }
    }
}

/// Slab fields given by closures, for manufactured and analytic checks.
pub struct FnFields<R, M, O> {
    pub rho: R,
    pub momentum: M,
    pub occupancy: O,
}

impl<R, M, O> SlabFields for FnFields<R, M, O>
where
    R: Fn(f64) -> f64 + Sync,
    M: Fn(f64) -> f64 + Sync,
    O: Fn(f64) -> f64 + Sync,
{
    fn rho(&self, x: f64) -> f64 {
        (self.rho)(x)
    }

    fn momentum(&self, x: f64) -> f64 {
        (self.momentum)(x)
    }

    fn occupancy(&self, x: f64) -> f64 {
        (self.occupancy)(x)
    }
}

/// Quadrature resolution of the lower-dimensional diagnostic integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRules {
    /// Gauss points per piece in `cos θ` and in the ball offset.
    pub n_mu: usize,
    /// Gauss points in the `τ` (or `λ`) line parameter.
    pub n_tau: usize,
    /// Number of equal pieces `[−1, 1]` is split into before knot splitting.
    pub mu_pieces: usize,
}

impl Default for LineRules {
    fn default() -> Self {
        LineRules {
            n_mu: 4,
            n_tau: 4,
            mu_pieces: 8,
        }
    }
}

/// Integrates `f(s)` over `s ∈ [a, b]`, splitting at every `x + s` kink.
fn integrate_offsets(
    fields: &dyn SlabFields,
    x: f64,
    a: f64,
    b: f64,
    extra: &[f64],
    gl: &GaussRule,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut cuts: Vec<f64> = fields.knots(x + lo, x + hi).into_iter().map(|k| k - x).collect();
    for e in extra {
        cuts.extend(fields.knots(x + lo + e, x + hi + e).into_iter().map(|k| k - x - e));
    }
    cuts.retain(|c| *c > lo && *c < hi);
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += gl.integrate(w[0], w[1], &mut f);
    }
    if a < b {
        acc
    } else {
        -acc
    }
}

fn model_s(model: &EnskogModel, x: f64) -> f64 {
    if x <= 0.0 {
        model.s_unchecked(0.0)
    } else {
        model.s_unchecked(x)
    }
}

/// Ball average `(π/m) ∫_{-σ}^{σ} (σ² − s²) h(x + s) ds`.
pub fn ball_integral(fields: &dyn SlabFields, model: &EnskogModel, x: f64, n: usize, h: impl Fn(f64) -> f64) -> f64 {
    let gl = GaussRule::new(n);
    let s2 = model.sigma * model.sigma;
    PI / model.mass * integrate_offsets(fields, x, -model.sigma, model.sigma, &[], &gl, |s| (s2 - s * s) * h(x + s))
}

/// Kinetic entropy density `⟨f ln f⟩` with `0 ln 0 = 0`.
pub fn h_kinetic(f: &DistributionField, vg: &VelocityGrid) -> Vec<f64> {
    (0..f.n_cells)
        .map(|c| {
            let fc = f.cell(c);
            vg.symmetric_sum(|k| if fc[k] > 0.0 { fc[k] * fc[k].ln() } else { 0.0 }) * vg.weight()
        })
        .collect()
}

/// Kinetic entropy flux `⟨ξ_x f ln f⟩`.
pub fn log_flux(f: &DistributionField, vg: &VelocityGrid) -> Vec<f64> {
    (0..f.n_cells)
        .map(|c| {
            let fc = f.cell(c);
            vg.symmetric_sum(|k| if fc[k] > 0.0 { vg.node(k)[0] * fc[k] * fc[k].ln() } else { 0.0 }) * vg.weight()
        })
        .collect()
}

/// Reduced exchange term
/// `(σ²/2m) ∮ g(x, x+σα) [ρ(x)(ρv)(x+σα) − (ρv)(x)ρ(x+σα)] α_x dΩ`.
pub fn i_reduced(fields: &dyn SlabFields, model: &EnskogModel, xs: &[f64], rules: LineRules) -> Vec<f64> {
    let gl = GaussRule::new(rules.n_mu);
    let sig = model.sigma;
    let pref = sig * sig / (2.0 * model.mass) * 2.0 * PI;
    xs.par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for p in 0..rules.mu_pieces {
                let a = -1.0 + 2.0 * p as f64 / rules.mu_pieces as f64;
                let b = -1.0 + 2.0 * (p + 1) as f64 / rules.mu_pieces as f64;
                acc += integrate_offsets(fields, x, sig * a, sig * b, &[], &gl, |s| {
                    fields.exchange_pair(model, x, x + s) * (s / sig)
                }) / sig;
            }
            pref * acc
        })
        .collect()
}

/// Collisional entropy density `ρ ∫₀^R S` from sampled fields.
pub fn h_collisional_at(fields: &dyn SlabFields, model: &EnskogModel, x: f64) -> Result<f64> {
    let r = fields.rho(x);
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(r * model.contact_s_integral(fields.occupancy(x).max(0.0))?)
}

/// Collisional entropy flux `J^(c)_x`: convective part minus the line-integral exchange part.
pub fn flux_jc(fields: &dyn SlabFields, model: &EnskogModel, xs: &[f64], rules: LineRules) -> Result<Vec<f64>> {
    let gl = GaussRule::new(rules.n_mu);
    let gt = GaussRule::new(rules.n_tau);
    let sig = model.sigma;
    let pref = sig.powi(3) / (2.0 * model.mass) * 2.0 * PI;
    xs.par_iter()
        .map(|&x| {
            let r0 = fields.rho(x);
            let conv = if r0 == 0.0 {
                0.0
            } else {
                h_collisional_at(fields, model, x)? * fields.momentum(x) / r0
            };
            let mut line = 0.0;
            for p in 0..rules.mu_pieces {
                let a = -1.0 + 2.0 * p as f64 / rules.mu_pieces as f64;
                let b = -1.0 + 2.0 * (p + 1) as f64 / rules.mu_pieces as f64;
                line += integrate_offsets(fields, x, sig * a, sig * b, &[], &gl, |d| {
                    // d = σμ; the τ-line runs over offsets s ∈ [0, d] with partner at s − d.
                    if d == 0.0 {
                        return 0.0;
                    }
                    let mu = d / sig;
                    let inner = integrate_offsets(fields, x, 0.0, d, &[-d], &gt, |s| {
                        let (ya, yb) = (x + s, x + s - d);
                        let (ra, rb) = (fields.rho(ya), fields.rho(yb));
                        if ra == 0.0 || rb == 0.0 {
                            return 0.0;
                        }
                        (fields.momentum(ya) * rb - ra * fields.momentum(yb)) * model_s(model, fields.occupancy(ya))
                    }) / d;
                    mu * mu * inner
                }) / sig;
            }
            Ok(conv - pref * line)
        })
        .collect()
}

/// Chain-rule rate `∂_t H^(c) = ρ_t ∫₀^R S + ρ S(R) R_t` with `R_t` the ball integral of `ρ_t`.
pub fn h_collisional_rate(
    fields: &dyn SlabFields,
    rho_t: &(dyn Fn(f64) -> f64 + Sync),
    model: &EnskogModel,
    xs: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    xs.par_iter()
        .map(|&x| {
            let r = fields.occupancy(x).max(0.0);
            let rt = ball_integral(fields, model, x, n, |y| if fields.rho(y) == 0.0 { 0.0 } else { rho_t(y) });
            Ok(rho_t(x) * model.contact_s_integral(r)? + fields.rho(x) * model.contact_s(r)? * rt)
        })
        .collect()
}

/// Extra convective term of the flux difference, `ρ v_x (π/m) ∫ (σ² − s²) ρ S(R) ds`.
pub fn delta_extra(fields: &dyn SlabFields, model: &EnskogModel, xs: &[f64], n: usize) -> Vec<f64> {
    xs.par_iter()
        .map(|&x| {
            let w = ball_integral(fields, model, x, n, |y| {
                let r = fields.rho(y);
                if r == 0.0 {
                    0.0
                } else {
                    r * model_s(model, fields.occupancy(y))
                }
            });
            fields.momentum(x) * w
        })
        .collect()
}

/// Collisional stress tensor and heat flow per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionalTransfer {
    pub p: Vec<[[f64; 3]; 3]>,
    pub q_x: Vec<f64>,
}

/// Suffix-moment sweep: returns `(Σ_{s_l > s_k} w_k A_l (s_l − s_k)², Σ … (s_l − s_k)² (s_l + s_k − 2c))`.
fn pair_projection_sums(s: &[f64], order: &[usize], w: &[f64], a: &[f64], c: f64) -> (f64, f64) {
    let n = order.len();
    let mut m = [0.0f64; 4];
    let mut p2 = 0.0;
    let mut p3 = 0.0;
    let mut i = n;
    while i > 0 {
        // Group equal projections so that ties (V = 0) are excluded.
        let mut start = i - 1;
        let sv = s[order[i - 1]];
        while start > 0 && s[order[start - 1]] == sv {
            start -= 1;
        }
        for &k in &order[start..i] {
            if w[k] == 0.0 {
                continue;
            }
            let c0 = sv - 2.0 * c;
            let sq = m[2] - 2.0 * sv * m[1] + sv * sv * m[0];
            p2 += w[k] * sq;
            p3 += w[k] * (m[3] + (c0 - 2.0 * sv) * m[2] + (sv * sv - 2.0 * sv * c0) * m[1] + sv * sv * c0 * m[0]);
        }
        for &l in &order[start..i] {
            let al = a[l];
            m[0] += al;
            m[1] += al * sv;
            m[2] += al * sv * sv;
            m[3] += al * sv * sv * sv;
        }
        i = start;
    }
    (p2, p3)
}

/// Collisional stress and heat flow by direct quadrature over `λ ∈ [0, σ]`.
pub fn collisional_transfer(
    kernel: &CollisionKernel,
    field: &DistributionField,
    r: &OccupancyField,
    velocity: &[[f64; 3]],
    n_lambda: usize,
) -> Result<CollisionalTransfer> {
    let space = &kernel.space;
    let vg = &kernel.velocity;
    let model = &kernel.model;
    let nx = space.n_x;
    let nn = vg.len();
    if kernel.mode == CollisionMode::Boltzmann {
        return Ok(CollisionalTransfer {
            p: vec![[[0.0; 3]; 3]; nx],
            q_x: vec![0.0; nx],
        });
    }
    let lam = GaussRule::unit(n_lambda.max(4));
    let sig = model.sigma;
    let wv = vg.weight();
    let sample = |x: f64| -> Option<(Vec<f64>, f64)> {
        let st = space.stencil(x)?;
        let occ = r.at_stencil(&st);
        let f: Vec<f64> = (0..nn)
            .map(|k| (1.0 - st.theta) * field.cell(st.left)[k] + st.theta * field.cell(st.right)[k])
            .collect();
        Some((f, model_s(model, occ)))
    };
    let rows: Vec<([[f64; 3]; 3], f64)> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let x = space.center(j);
            let mut p = [[0.0; 3]; 3];
            let mut qx = 0.0;
            for (q, alpha) in kernel.sphere.nodes.iter().enumerate() {
                let s: Vec<f64> = (0..nn)
                    .map(|k| {
                        let v = vg.node(k);
                        v[0] * alpha[0] + v[1] * alpha[1] + v[2] * alpha[2]
                    })
                    .collect();
                let mut order: Vec<usize> = (0..nn).collect();
                order.sort_by(|a, b| s[*a].partial_cmp(&s[*b]).expect("finite").then(a.cmp(b)));
                let c = velocity[j][0] * alpha[0] + velocity[j][1] * alpha[1] + velocity[j][2] * alpha[2];
                let mut t2 = 0.0;
                let mut t3 = 0.0;
                for (t, wt) in lam.nodes.iter().zip(&lam.weights) {
                    let l = t * sig;
                    let (Some((fa, sa)), Some((fb, sb))) = (sample(x + l * alpha[0]), sample(x + (l - sig) * alpha[0])) else {
                        continue;
                    };
                    let g = sa + sb;
                    let (a2, a3) = pair_projection_sums(&s, &order, &fa, &fb, c);
                    t2 += wt * sig * g * a2;
                    t3 += wt * sig * g * a3;
                }
                let w = kernel.sphere.weights[q] * wv * wv;
                for a in 0..3 {
                    for b in 0..3 {
                        p[a][b] += sig * sig / (2.0 * model.mass) * w * alpha[a] * alpha[b] * t2;
                    }
                }
                qx += sig * sig / (4.0 * model.mass) * w * alpha[0] * t3;
            }
            (p, qx)
        })
        .collect();
    Ok(CollisionalTransfer {
        p: rows.iter().map(|r| r.0).collect(),
        q_x: rows.iter().map(|r| r.1).collect(),
    })
}

/// Conservative central divergence of a cell-centered flux.
///
/// Face values are neighbour averages. Periodic faces wrap; at a specular wall
/// the face flux is zero, at a diffuse wall it is extrapolated from the interior.
pub fn divergence(flux: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let n = flux.len();
    let face = |i: usize| -> f64 {
        // Face i sits between cells i-1 and i, for i in 0..=n.
        match (&grid.boundary, i) {
            (Boundary::Periodic, _) => 0.5 * (flux[(i + n - 1) % n] + flux[i % n]),
            (Boundary::Specular, 0) | (Boundary::Specular, _) if i == 0 || i == n => 0.0,
            (Boundary::Diffuse { .. }, 0) => 1.5 * flux[0] - 0.5 * flux[1.min(n - 1)],
            (Boundary::Diffuse { .. }, _) if i == n => 1.5 * flux[n - 1] - 0.5 * flux[n.saturating_sub(2)],
            _ => 0.5 * (flux[i - 1] + flux[i]),
        }
    };
    (0..n).map(|j| (face(j + 1) - face(j)) / grid.dx).collect()
}

/// Continuity-implied `∂_t ρ = −∂_x(ρ v_x)` at cell centers.
pub fn continuity_rate(momentum: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let g = SpatialGrid {
        boundary: match grid.boundary {
            Boundary::Periodic => Boundary::Periodic,
            _ => Boundary::Specular,
        },
        ..grid.clone()
    };
    divergence(momentum, &g).into_iter().map(|d| -d).collect()
}

/// Everything the frame assembly needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsContext<'a> {
    pub kernel: &'a CollisionKernel,
    pub attraction: Option<&'a AttractionKernel>,
    /// Heat-bath temperature used by the free energy.
    pub wall_temperature: f64,
    pub rules: LineRules,
}

/// Per-cell diagnostic fields and domain totals at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsFrame {
    pub time: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub v_x: Vec<f64>,
    pub temperature: Vec<f64>,
    pub h_k: Vec<f64>,
    pub h_c: Vec<f64>,
    pub d: Vec<f64>,
    pub i_full: Vec<f64>,
    pub i_reduced: Vec<f64>,
    /// Loss-rate scale of the production sweep.
    pub scale: Vec<f64>,
    pub log_flux: Vec<f64>,
    pub j_k: Vec<f64>,
    pub j_c: Vec<f64>,
    pub j_h: Vec<f64>,
    pub delta: Vec<f64>,
    pub p_c: Vec<[[f64; 3]; 3]>,
    pub q_c: Vec<f64>,
    pub p_v_xx: Vec<f64>,
    pub p_v_yy: Vec<f64>,
    pub e_v: Vec<f64>,
    pub q_v: Vec<f64>,
    pub free: Vec<f64>,
    pub free_tilde: Vec<f64>,
    pub j_f: Vec<f64>,
    pub j_f_tilde: Vec<f64>,
    pub globals: Globals,
}

/// Domain integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Globals {
    pub h: f64,
    pub h_k: f64,
    pub h_c: f64,
    pub free: f64,
    pub free_tilde: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

/// The two algebraic forms of the free energy density.
///
/// Returns `(RT_w(⟨f ln(f/f_w)⟩ + H^(c)), RT_w H + ⟨½ξ²f⟩ via moments)`.
pub fn free_energy_forms(f: &[f64], vg: &VelocityGrid, h_c: f64, wall_temperature: f64) -> (f64, f64) {
    let rtw = GAS_CONSTANT * wall_temperature;
    let w = vg.weight();
    let rel = vg.symmetric_sum(|k| {
        if f[k] > 0.0 {
            let xi = vg.node(k);
            let ln_fw = -(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) / (2.0 * rtw);
            f[k] * (f[k].ln() - ln_fw)
        } else {
            0.0
        }
    }) * w;
    let hk = vg.symmetric_sum(|k| if f[k] > 0.0 { f[k] * f[k].ln() } else { 0.0 }) * w;
    let kinetic = match crate::state::cell_moments(f, vg) {
        CellMoments::Regular(m) => m.rho * (m.energy + 0.5 * (m.v[0] * m.v[0] + m.v[1] * m.v[1] + m.v[2] * m.v[2])),
        CellMoments::Degenerate => 0.0,
    };
    (rtw * (rel + h_c), rtw * (hk + h_c) + kinetic)
}

/// Assembles every diagnostic field for a state.
pub fn compute_frame(ctx: &DiagnosticsContext, state: &SimState) -> Result<DiagnosticsFrame> {
    let kernel = ctx.kernel;
    let grid = &state.space;
    let vg = &state.velocity;
    let model = &kernel.model;
    let nx = grid.n_x;
    let xs = grid.centers();
    let mf = moments(&state.f, vg);
    let rho = mf.density();
    let vel: Vec<[f64; 3]> = mf.cells.iter().map(|c| c.velocity()).collect();
    let mom: Vec<f64> = rho.iter().zip(&vel).map(|(r, v)| r * v[0]).collect();
    let enskog = kernel.mode == CollisionMode::Enskog;
    let r = if enskog {
        occupancy_r(&rho, grid, model)?
    } else {
        OccupancyField { values: vec![0.0; nx] }
    };
    let h_k = h_kinetic(&state.f, vg);
    let lf = log_flux(&state.f, vg);
    let pe = kernel.production_exchange(&state.f, &r)?;
    let j_k = kernel.flux_jk(&state.f, &r, ctx.rules.n_tau)?;
    let fields = GridFields::new(grid, rho.clone(), mom.clone(), r.values.clone());
    let zeros = vec![0.0; nx];
    let (h_c, i_red, j_c, extra) = if enskog {
        (
            crate::factor::h_collisional(&rho, &r, model)?,
            i_reduced(&fields, model, &xs, ctx.rules),
            flux_jc(&fields, model, &xs, ctx.rules)?,
            delta_extra(&fields, model, &xs, ctx.rules.n_mu),
        )
    } else {
        (zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone())
    };
    let ct = collisional_transfer(kernel, &state.f, &r, &vel, ctx.rules.n_tau)?;
    let (p_v_xx, p_v_yy, e_v, q_v) = match ctx.attraction {
        Some(att) => {
            let rate = continuity_rate(&mom, grid);
            let rho_fn = |x: f64| fields.rho(x);
            let rate_fn = |x: f64| grid.stencil(x).map_or(0.0, |s| s.apply(&rate));
            let vx: Vec<f64> = vel.iter().map(|v| v[0]).collect();
            let vt = vlasov_transfer(&rho_fn, &vx, &rate_fn, att, grid, ctx.rules.n_tau);
            (vt.p_xx, vt.p_yy, vt.e, vt.q_x)
        }
        None => (zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone()),
    };
    let rtw = GAS_CONSTANT * ctx.wall_temperature;
    let mut frame = DiagnosticsFrame {
        time: state.time,
        x: xs,
        rho: rho.clone(),
        v_x: vel.iter().map(|v| v[0]).collect(),
        temperature: mf.cells.iter().map(|c| c.regular().map_or(0.0, |m| m.temperature)).collect(),
        j_h: (0..nx).map(|j| lf[j] + j_k[j] + j_c[j]).collect(),
        delta: (0..nx).map(|j| j_k[j] + j_c[j] - h_c[j] * vel[j][0] - extra[j]).collect(),
        h_k,
        h_c,
        d: pe.d,
        i_full: pe.i,
        i_reduced: i_red,
        scale: pe.scale,
        log_flux: lf,
        j_k,
        j_c,
        p_c: ct.p,
        q_c: ct.q_x,
        p_v_xx,
        p_v_yy,
        e_v,
        q_v,
        free: vec![0.0; nx],
        free_tilde: vec![0.0; nx],
        j_f: vec![0.0; nx],
        j_f_tilde: vec![0.0; nx],
        globals: Globals::default(),
    };
    for j in 0..nx {
        let (f1, f2) = free_energy_forms(state.f.cell(j), vg, frame.h_c[j], ctx.wall_temperature);
        let tol = 1e-10 * (f1.abs() + f2.abs()).max(1e-300);
        if (f1 - f2).abs() > tol && (f1 - f2).abs() > 1e-14 {
            return Err(Error::Consistency(format!(
                "free energy forms disagree in cell {j}: {f1} vs {f2}"
            )));
        }
        frame.free[j] = f1;
        frame.free_tilde[j] = f1 + rho[j] * frame.e_v[j];
        let (ek, pk, qk) = match mf.cells[j].regular() {
            Some(m) => (m.energy, m.stress[0], m.heat_flux[0]),
            None => (0.0, [0.0; 3], 0.0),
        };
        let v = vel[j];
        let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let pc = frame.p_c[j][0];
        let work: f64 = (0..3).map(|b| (pk[b] + pc[b]) * v[b]).sum();
        let base = rtw * frame.j_h[j];
        frame.j_f[j] = base + rho[j] * v[0] * (ek + 0.5 * v2) + work + qk + frame.q_c[j];
        frame.j_f_tilde[j] = frame.j_f[j] + rho[j] * v[0] * frame.e_v[j] + frame.p_v_xx[j] * v[0] + frame.q_v[j];
    }
    let dx = grid.dx;
    let sum = |v: &[f64]| v.iter().sum::<f64>() * dx;
    let kinetic_energy: Vec<f64> = (0..nx)
        .map(|j| {
            let fc = state.f.cell(j);
            vg.symmetric_sum(|k| {
                let xi = vg.node(k);
                0.5 * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * fc[k]
            }) * vg.weight()
                + rho[j] * frame.e_v[j]
        })
        .collect();
    frame.globals = Globals {
        h_k: sum(&frame.h_k),
        h_c: sum(&frame.h_c),
        h: sum(&frame.h_k) + sum(&frame.h_c),
        free: sum(&frame.free),
        free_tilde: sum(&frame.free_tilde),
        mass: sum(&rho),
        momentum: sum(&mom),
        energy: sum(&kinetic_energy),
    };
    Ok(frame)
}

/// Column names of the per-cell frame export, in order.
pub const FRAME_COLUMNS: [&str; 30] = [
    "x", "rho", "v_x", "temperature", "h_k", "h_c", "d", "i_full", "i_reduced", "log_flux", "j_k", "j_c", "j_h",
    "delta", "p_c_xx", "p_c_yy", "p_c_zz", "p_c_xy", "p_c_xz", "p_c_yz", "q_c_x", "p_v_xx", "p_v_yy", "e_v", "q_v_x",
    "f", "f_tilde", "j_f", "j_f_tilde", "scale",
];

/// Schema version written at the top of every CSV file.
pub const SCHEMA_VERSION: u32 = 1;

impl DiagnosticsFrame {
    pub fn row(&self, j: usize) -> [f64; 30] {
        let p = self.p_c[j];
        [
            self.x[j],
            self.rho[j],
            self.v_x[j],
            self.temperature[j],
            self.h_k[j],
            self.h_c[j],
            self.d[j],
            self.i_full[j],
            self.i_reduced[j],
            self.log_flux[j],
            self.j_k[j],
            self.j_c[j],
            self.j_h[j],
            self.delta[j],
            p[0][0],
            p[1][1],
            p[2][2],
            p[0][1],
            p[0][2],
            p[1][2],
            self.q_c[j],
            self.p_v_xx[j],
            self.p_v_yy[j],
            self.e_v[j],
            self.q_v[j],
            self.free[j],
            self.free_tilde[j],
            self.j_f[j],
            self.j_f_tilde[j],
            self.scale[j],
        ]
    }

    /// Writes the frame as CSV with a globals footer row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# schema_version={SCHEMA_VERSION} t={:e}", self.time)?;
        writeln!(out, "{}", FRAME_COLUMNS.join(","))?;
        for j in 0..self.x.len() {
            let row: Vec<String> = self.row(j).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        let g = &self.globals;
        writeln!(
            out,
            "# globals h={:e} h_k={:e} h_c={:e} f={:e} f_tilde={:e} mass={:e} momentum_x={:e} energy={:e}",
            g.h, g.h_k, g.h_c, g.free, g.free_tilde, g.mass, g.momentum, g.energy
        )?;
        out.flush()?;
        Ok(())
    }
}

/// Residuals of the entropy and free-energy balances over a window of frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    /// Largest cellwise `|∂_t H + ∂_x J^H − (D − I)|`.
    pub closure_max: f64,
    /// Root-mean-square of the same residual.
    pub closure_rms: f64,
    /// Largest `∂_t H + ∂_x J^H − (D − I)`, positive when the local balance overshoots.
    pub sign_excess: f64,
    /// Largest cellwise production `D − I` (nonpositive in exact arithmetic).
    pub production_max: f64,
    /// Largest `|d𝓗/dt − Σ (D − I) Δx|`.
    pub global_gap: f64,
    /// Largest step-to-step increase of `𝓗` (zero when monotone).
    pub h_increase: f64,
    /// Largest step-to-step increase of `𝓕̃`.
    pub free_tilde_increase: f64,
}

/// Audits a window of at least three frames sampled at a uniform interval.
pub fn balance_audit(frames: &[DiagnosticsFrame], grid: &SpatialGrid) -> Result<AuditReport> {
    if frames.len() < 3 {
        return Err(Error::Consistency("balance audit needs at least three frames".into()));
    }
    let dt = frames[1].time - frames[0].time;
    for w in frames.windows(2) {
        let step = w[1].time - w[0].time;
        if !(dt > 0.0) || (step - dt).abs() > 1e-9 * dt {
            return Err(Error::Consistency(format!(
                "balance audit needs a uniform interval: {step} vs {dt}"
            )));
        }
    }
    let mut rep = AuditReport::default();
    let mut sq = 0.0;
    let mut count = 0usize;
    for n in 1..frames.len() - 1 {
        let (a, m, b) = (&frames[n - 1], &frames[n], &frames[n + 1]);
        let div = divergence(&m.j_h, grid);
        let mut global_prod = 0.0;
        for j in 0..grid.n_x {
            let h_rate = ((b.h_k[j] + b.h_c[j]) - (a.h_k[j] + a.h_c[j])) / (2.0 * dt);
            let prod = m.d[j] - m.i_full[j];
            let res = h_rate + div[j] - prod;
            rep.closure_max = rep.closure_max.max(res.abs());
            rep.sign_excess = rep.sign_excess.max(res);
            rep.production_max = if count == 0 && j == 0 { prod } else { rep.production_max.max(prod) };
            sq += res * res;
            count += 1;
            global_prod += prod * grid.dx;
        }
        let global_rate = (b.globals.h - a.globals.h) / (2.0 * dt);
        rep.global_gap = rep.global_gap.max((global_rate - global_prod).abs());
    }
    rep.closure_rms = (sq / count as f64).sqrt();
    for w in frames.windows(2) {
        rep.h_increase = rep.h_increase.max(w[1].globals.h - w[0].globals.h);
        rep.free_tilde_increase = rep.free_tilde_increase.max(w[1].globals.free_tilde - w[0].globals.free_tilde);
    }
    Ok(rep)
}

fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let d = b - a;
    if d.abs() <= 1e-8 * (a + b) {
        // Series of (b − a)/ln(b/a) about the arithmetic mean.
        let m = 0.5 * (a + b);
        let e = d / (a + b);
        return m * (1.0 - e * e / 3.0);
    }
    d / (b.ln() - a.ln())
}

/// Entropy-conservative force operator `−F ∂f/∂ξ_x` with log-mean face values
/// and zero flux through the ends of every `ξ_x` line.
pub fn force_operator_log_mean(f: &[f64], force: f64, vg: &VelocityGrid) -> Vec<f64> {
    let n = vg.n_v;
    let mut out = vec![0.0; f.len()];
    for j in 0..n {
        for l in 0..n {
            for i in 0..n - 1 {
                let (a, b) = (vg.index([i, j, l]), vg.index([i + 1, j, l]));
                let flux = force * log_mean(f[a], f[b]) / vg.h;
                out[a] -= flux;
                out[b] += flux;
            }
        }
    }
    out
}

/// `⟨(1 + ln f) S⟩` for a force term `S`, together with the velocity-boundary
/// truncation `(F/h) Σ (f_last − f_first) w` that the exact identity leaves over.
pub fn vlasov_log_moment(f: &[f64], term: &[f64], force: f64, vg: &VelocityGrid) -> (f64, f64) {
    let w = vg.weight();
    let value = vg.symmetric_sum(|k| if f[k] > 0.0 { (1.0 + f[k].ln()) * term[k] } else { 0.0 }) * w;
    let n = vg.n_v;
    let mut trunc = 0.0;
    for j in 0..n {
        for l in 0..n {
            trunc += f[vg.index([n - 1, j, l])] - f[vg.index([0, j, l])];
        }
    }
    (value, force / vg.h * trunc * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Scheme;
    use crate::quadrature::adaptive_simpson;
    use crate::sphere::sphere_quadrature;
    use crate::state::maxwellian;

    fn small_kernel(nx: usize, boundary: Boundary) -> CollisionKernel {
        let space = SpatialGrid::new(4.0, nx, boundary).unwrap();
        let vg = VelocityGrid::new(8, 4.5).unwrap();
        CollisionKernel::new(
            space,
            vg,
            EnskogModel::van_der_waals(),
            sphere_quadrature(14).unwrap(),
            CollisionMode::Enskog,
            Scheme::Symmetric,
            1.0,
        )
    }

    #[test]
    fn kinetic_entropy_of_a_maxwellian() {
        let vg = VelocityGrid::new(24, 2.6).unwrap();
        let t = 1.0 / (2.0 * PI);
        let f = maxwellian(1.0, [0.0; 3], t, &vg);
        let field = DistributionField {
            n_cells: 1,
            n_nodes: vg.len(),
            values: f.clone(),
        };
        let h = h_kinetic(&field, &vg)[0];
        assert!((h + 1.5).abs() < 1e-6, "{h}");
        let mut scaled = field.clone();
        scaled.scale(2.0);
        let rho: f64 = f.iter().sum::<f64>() * vg.weight();
        let hs = h_kinetic(&scaled, &vg)[0];
        assert!((hs - 2.0 * (h + rho * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn uniform_collisional_entropy_value() {
        let m = EnskogModel::van_der_waals();
        let rho = 0.2 / m.b();
        let fields = FnFields {
            rho: |_| rho,
            momentum: |_| 0.0,
            occupancy: |_| 0.4,
        };
        let hc = h_collisional_at(&fields, &m, 0.0).unwrap();
        assert!((hc - 0.0213086).abs() < 1e-7, "{hc}");
        let ball = ball_integral(&fields, &m, 0.0, 6, |_| rho);
        assert!((ball - 0.4).abs() < 1e-13);
    }

    #[test]
    fn reduced_exchange_matches_the_sphere_integral() {
        let m = EnskogModel::van_der_waals();
        let (rho, amp, len) = (0.2 / m.b(), 0.1, 8.0);
        let k = 2.0 * PI / len;
        let fields = FnFields {
            rho: |_| rho,
            momentum: move |x: f64| rho * amp * (k * x).sin(),
            occupancy: |_| 0.4,
        };
        let xs = [0.0, 1.0, 2.0, 4.0];
        let got = i_reduced(&fields, &m, &xs, LineRules { n_mu: 6, n_tau: 4, mu_pieces: 8 });
        // I = (σ²/2m) 2π g ρ² A cos(kx) ∫ μ sin(kσμ) dμ.
        let ks = k * m.sigma;
        let mu_int = 2.0 * (ks.sin() - ks * ks.cos()) / (ks * ks);
        let c = 0.5 * 2.0 * PI * 1.25 * rho * rho * amp * mu_int;
        for (x, i) in xs.iter().zip(&got) {
            assert!((i - c * (k * x).cos()).abs() < 1e-12 * c.abs().max(1.0), "{x}: {i}");
        }
        assert!(got[0] > 0.0 && got[3] < 0.0);
    }

    #[test]
    fn collisional_flux_limits() {
        let m = EnskogModel::van_der_waals();
        let rho = 0.2 / m.b();
        let still = FnFields {
            rho: |_| rho,
            momentum: |_| 0.0,
            occupancy: |_| 0.4,
        };
        let rules = LineRules::default();
        assert!(flux_jc(&still, &m, &[0.5], rules).unwrap()[0] == 0.0);
        let moving = FnFields {
            rho: |_| rho,
            momentum: |_| rho * 0.3,
            occupancy: |_| 0.4,
        };
        let jc = flux_jc(&moving, &m, &[0.5], rules).unwrap()[0];
        let hc = rho * 1.25f64.ln();
        assert!((jc - hc * 0.3).abs() < 1e-15);
    }

    #[test]
    fn uniform_equilibrium_frame() {
        let kernel = small_kernel(4, Boundary::Periodic);
        let vg = kernel.velocity.clone();
        let rho = 0.2 / kernel.model.b();
        let mut f = DistributionField::zeros(4, vg.len());
        for j in 0..4 {
            f.cell_mut(j).copy_from_slice(&maxwellian(rho, [0.0; 3], 1.0, &vg));
        }
        let state = SimState {
            space: kernel.space.clone(),
            velocity: vg.clone(),
            f,
            time: 0.0,
        };
        let ctx = DiagnosticsContext {
            kernel: &kernel,
            attraction: None,
            wall_temperature: 1.0,
            rules: LineRules::default(),
        };
        let fr = compute_frame(&ctx, &state).unwrap();
        let rho_num = fr.rho[0];
        for j in 0..4 {
            let s = fr.scale[j];
            assert!(fr.d[j].abs() < 1e-10 * s && fr.i_full[j].abs() < 1e-10 * s);
            assert_eq!(fr.i_reduced[j], 0.0);
            assert_eq!(fr.j_c[j], 0.0);
            assert!(fr.j_k[j].abs() < 1e-12 * s, "{} {}", fr.j_k[j], s);
            assert!(fr.q_c[j].abs() < 1e-12);
            let p = fr.p_c[j];
            assert!((p[0][0] - p[1][1]).abs() < 1e-12 && p[0][1].abs() < 1e-14);
            let kin = fr.rho[j] * fr.temperature[j];
            let expected = 2.0 * kernel.model.b() * rho_num * kernel.model.s_unchecked(2.0 * kernel.model.b() * rho_num);
            assert!((p[0][0] / kin / expected - 1.0).abs() < 0.02, "{}", p[0][0] / kin);
        }
        assert!(fr.globals.h_c > 0.0);
    }

    #[test]
    fn log_mean_force_operator_conserves_entropy() {
        let vg = VelocityGrid::new(8, 4.0).unwrap();
        let f = maxwellian(0.3, [0.4, 0.0, 0.1], 0.9, &vg);
        let term = force_operator_log_mean(&f, 0.7, &vg);
        let mass: f64 = term.iter().sum();
        assert!(mass.abs() < 1e-14);
        let (value, trunc) = vlasov_log_moment(&f, &term, 0.7, &vg);
        let scale = 0.7 * f.iter().cloned().fold(0.0, f64::max) / vg.h * vg.weight() * vg.len() as f64;
        assert!((value - trunc).abs() < 1e-12 * scale, "{value} {trunc}");
    }

    #[test]
    fn divergence_telescopes_on_periodic_grids() {
        let g = SpatialGrid::new(3.0, 7, Boundary::Periodic).unwrap();
        let flux: Vec<f64> = (0..7).map(|j| ((j * j) as f64).sin()).collect();
        let total: f64 = divergence(&flux, &g).iter().sum::<f64>() * g.dx;
        assert!(total.abs() < 1e-14);
        let spec = SpatialGrid::new(3.0, 7, Boundary::Specular).unwrap();
        let total: f64 = divergence(&flux, &spec).iter().sum::<f64>() * spec.dx;
        assert!(total.abs() < 1e-14);
    }

    #[test]
    fn free_energy_forms_agree() {
        let vg = VelocityGrid::new(8, 4.0).unwrap();
        let f: Vec<f64> = (0..vg.len()).map(|k| 0.01 + ((k * 7919) % 97) as f64 / 970.0).collect();
        let (a, b) = free_energy_forms(&f, &vg, 0.02, 1.3);
        assert!((a - b).abs() < 1e-10 * a.abs());
        let _ = adaptive_simpson(0.0, 1.0, 1e-8, &|x: f64| x);
    }
}
