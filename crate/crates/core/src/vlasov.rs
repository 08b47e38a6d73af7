//! Mean-field attraction: slab kernels, the Vlasov force and its transfer terms.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;
use crate::state::SpatialGrid;

/// Potential selection as written in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `Φ = -ε` inside the core, `-ε (σ/r)⁶` outside.
    Sutherland6 { epsilon: f64, cutoff: f64 },
    /// Piecewise-linear `Φ(r)` from a two-column file; zero beyond the last sample.
    Table { path: PathBuf, cutoff: Option<f64> },
}

impl PotentialSpec {
    pub fn kernel(&self, sigma: f64) -> Result<AttractionKernel> {
        match self {
            PotentialSpec::Sutherland6 { epsilon, cutoff } => {
                AttractionKernel::sutherland6(*epsilon, sigma, cutoff * sigma)
            }
            PotentialSpec::Table { path, cutoff } => {
                let k = AttractionKernel::from_table_file(path)?;
                Ok(match cutoff {
                    Some(c) => AttractionKernel { cutoff: *c, ..k },
                    None => k,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Sutherland6 { epsilon: f64, sigma: f64 },
    Table {
        r: Vec<f64>,
        phi: Vec<f64>,
        /// `2π ∫_{r_i}^∞ s Φ(s) ds` at every sample.
        tail: Vec<f64>,
    },
}

/// Slab-reduced attraction kernel `K(u) = 2π ∫_u^∞ s Φ(s) ds` and the
/// coefficient `a = (2π/3) ∫ x³ Φ'(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionKernel {
    form: Form,
    pub a: f64,
    /// Interaction range used by the quadratures.
    pub cutoff: f64,
    /// Length scale of the kernel's kink, used to place quadrature breaks.
    pub core: f64,
}

impl AttractionKernel {
    pub fn sutherland6(epsilon: f64, sigma: f64, cutoff: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Potential("well depth must be nonnegative".into()));
        }
        if !(cutoff > sigma) {
            return Err(Error::Potential("cutoff must exceed the core diameter".into()));
        }
        Ok(AttractionKernel {
            form: Form::Sutherland6 { epsilon, sigma },
            a: 4.0 * PI / 3.0 * epsilon * sigma.powi(3),
            cutoff,
            core: sigma,
        })
    }

    /// Builds a kernel from samples `(r_i, Φ_i)`, linear in between.
    pub fn from_table(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != phi.len() {
            return Err(Error::Potential("need at least two (r, Φ) samples".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Potential("r must be nonnegative and strictly increasing".into()));
        }
        if phi.windows(2).any(|w| w[1] < w[0]) || phi.iter().any(|p| *p > 0.0) {
            return Err(Error::Potential(
                "potential must be attractive (Φ ≤ 0) with Φ' ≥ 0".into(),
            ));
        }
        if *phi.last().expect("non-empty") != 0.0 {
            return Err(Error::Potential(
                "decay condition violated: x³Φ(x) must vanish at the end of the table".into(),
            ));
        }
        let n = r.len();
        let mut tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            tail[i] = tail[i + 1] + 2.0 * PI * segment_moment1(r[i], r[i + 1], phi[i], phi[i + 1], r[i]);
        }
        let mut a = 0.0;
        for i in 0..n - 1 {
            let m = (phi[i + 1] - phi[i]) / (r[i + 1] - r[i]);
            a += m * (r[i + 1].powi(4) - r[i].powi(4)) / 4.0;
        }
        a *= 2.0 * PI / 3.0;
        let k = AttractionKernel {
            cutoff: r[n - 1],
            core: r[0].max(r[n - 1] / 16.0),
            form: Form::Table { r, phi, tail },
            a,
        };
        let identity = k.energy_integral();
        if (identity + k.a).abs() > 1e-10 * k.a.abs().max(1e-300) {
            return Err(Error::Potential(format!(
                "energy identity fails: 2π∫x²Φ = {identity}, -a = {}",
                -k.a
            )));
        }
        Ok(k)
    }

    pub fn from_table_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let (mut r, mut phi) = (Vec::new(), Vec::new());
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
            let parse = |t: &str| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("line {}: {e}", n + 1),
                })
            };
            if cols.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("line {}: expected two columns", n + 1),
                });
            }
            r.push(parse(cols[0])?);
            phi.push(parse(cols[1])?);
        }
        Self::from_table(r, phi)
    }

    pub fn phi(&self, r: f64) -> f64 {
        match &self.form {
            Form::Sutherland6 { epsilon, sigma } => {
                if r < *sigma {
                    -epsilon
                } else {
                    -epsilon * (sigma / r).powi(6)
                }
            }
            Form::Table { r: rs, phi, .. } => table_value(rs, phi, r),
        }
    }

    /// `K(u) = 2π ∫_u^∞ s Φ(s) ds` for `u ≥ 0`.
    pub fn k(&self, u: f64) -> f64 {
        match &self.form {
            Form::Sutherland6 { epsilon, sigma } => {
                if u >= *sigma {
                    -0.5 * PI * epsilon * sigma.powi(6) / u.powi(4)
                } else {
                    -PI * epsilon * (sigma * sigma - u * u) - 0.5 * PI * epsilon * sigma * sigma
                }
            }
            Form::Table { r, phi, tail } => {
                let n = r.len();
                if u >= r[n - 1] {
                    return 0.0;
                }
                if u <= r[0] {
                    return tail[0] + PI * phi[0] * (r[0] * r[0] - u * u);
                }
                let i = r.partition_point(|x| *x <= u) - 1;
                let pu = table_value(r, phi, u);
                tail[i + 1] + 2.0 * PI * segment_moment1(u, r[i + 1], pu, phi[i + 1], u)
            }
        }
    }

    /// `K'(u) = -2π u Φ(u)`, nonnegative for an attractive potential.
    pub fn k_prime(&self, u: f64) -> f64 {
        -2.0 * PI * u * self.phi(u)
    }

    /// `2π ∫₀^∞ x² Φ(x) dx`, which equals `-a` under the decay condition.
    pub fn energy_integral(&self) -> f64 {
        match &self.form {
            Form::Sutherland6 { epsilon, sigma } => -2.0 * PI * epsilon * (sigma.powi(3) / 3.0 + sigma.powi(3) / 3.0),
            Form::Table { r, phi, .. } => {
                let mut acc = phi[0] * r[0].powi(3) / 3.0;
                for i in 0..r.len() - 1 {
                    acc += segment_moment2(r[i], r[i + 1], phi[i], phi[i + 1]);
                }
                2.0 * PI * acc
            }
        }
    }

    fn is_null(&self) -> bool {
        self.a == 0.0
    }
}

fn table_value(r: &[f64], phi: &[f64], x: f64) -> f64 {
    let n = r.len();
    if x <= r[0] {
        return phi[0];
    }
    if x >= r[n - 1] {
        return 0.0;
    }
    let i = r.partition_point(|v| *v <= x) - 1;
    let t = (x - r[i]) / (r[i + 1] - r[i]);
    phi[i] + t * (phi[i + 1] - phi[i])
}

// ∫_a^b s Φ(s) ds for Φ linear from (a, pa) to (b, pb); `_origin` kept for clarity of the call sites.
fn segment_moment1(a: f64, b: f64, pa: f64, pb: f64, _origin: f64) -> f64 {
    let m = (pb - pa) / (b - a);
    let c = pa - m * a;
    c * (b * b - a * a) / 2.0 + m * (b.powi(3) - a.powi(3)) / 3.0
}

// ∫_a^b s² Φ(s) ds for linear Φ.
fn segment_moment2(a: f64, b: f64, pa: f64, pb: f64) -> f64 {
    let m = (pb - pa) / (b - a);
    let c = pa - m * a;
    c * (b.powi(3) - a.powi(3)) / 3.0 + m * (b.powi(4) - a.powi(4)) / 4.0
}

/// Integration pieces in `u` for a kernel centered at `x`, mirror-symmetric
/// unless a wall breaks the symmetry.
fn u_segments(x: f64, kern: &AttractionKernel, grid: &SpatialGrid) -> Vec<(f64, f64)> {
    let c = kern.cutoff;
    let hmax = (0.5 * grid.dx).min(0.25 * kern.core);
    let side = |wall: Option<f64>| -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0, kern.core.min(c), c];
        if let Some(w) = wall {
            if w > 0.0 && w < c {
                cuts.push(w);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup();
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut s = a;
            while s < b {
                // Fine near the core, growing in the far tail.
                let h = (hmax * (s / kern.core).max(1.0)).min(b - s);
                let e = if b - (s + h) < 1e-12 { b } else { s + h };
                out.push((s, e));
                s = e;
            }
        }
        out
    };
    let (right_wall, left_wall) = if grid.boundary.is_periodic() {
        (None, None)
    } else {
        (Some(grid.length - x), Some(x))
    };
    let mut out: Vec<(f64, f64)> = side(left_wall).into_iter().map(|(a, b)| (-b, -a)).collect();
    out.extend(side(right_wall));
    out
}

/// Force `F_x(x) = ∫ ρ(x+u) K'(|u|) sgn(u) du` at every cell center.
pub fn vlasov_force(rho: &(dyn Fn(f64) -> f64 + Sync), kern: &AttractionKernel, grid: &SpatialGrid) -> Vec<f64> {
    if kern.is_null() {
        return vec![0.0; grid.n_x];
    }
    let gl = GaussRule::new(4);
    (0..grid.n_x)
        .into_par_iter()
        .map(|j| force_at(rho, kern, grid, grid.center(j), &gl))
        .collect()
}

pub fn force_at(
    rho: &(dyn Fn(f64) -> f64 + Sync),
    kern: &AttractionKernel,
    grid: &SpatialGrid,
    x: f64,
    gl: &GaussRule,
) -> f64 {
    let mut acc = 0.0;
    for (a, b) in u_segments(x, kern, grid) {
        acc += gl.integrate(a, b, |u| rho(x + u) * kern.k_prime(u.abs()) * u.signum());
    }
    acc
}

/// Vlasov contributions to stress, internal energy and heat flow.
#[derive(Debug, Clone, PartialEq)]
pub struct VlasovTransfer {
    pub p_xx: Vec<f64>,
    /// Transverse diagonal stress (`p_yy = p_zz`).
    pub p_yy: Vec<f64>,
    pub e: Vec<f64>,
    pub q_x: Vec<f64>,
}

/// Slab quadratures of the Vlasov stress, energy and heat flow at cell centers.
///
/// `rho`, `vx` and `drho_dt` must vanish (or be ignored) outside the domain;
/// `drho_dt` is the continuity-implied time derivative.
pub fn vlasov_transfer(
    rho: &(dyn Fn(f64) -> f64 + Sync),
    vx: &[f64],
    drho_dt: &(dyn Fn(f64) -> f64 + Sync),
    kern: &AttractionKernel,
    grid: &SpatialGrid,
    n_lambda: usize,
) -> VlasovTransfer {
    let nx = grid.n_x;
    if kern.is_null() {
        return VlasovTransfer {
            p_xx: vec![0.0; nx],
            p_yy: vec![0.0; nx],
            e: vec![0.0; nx],
            q_x: vec![0.0; nx],
        };
    }
    let gl = GaussRule::new(4);
    let lam = GaussRule::unit(n_lambda.max(4));
    let rows: Vec<[f64; 4]> = (0..nx)
        .into_par_iter()
        .map(|j| {
            let x = grid.center(j);
            let mut pxx = 0.0;
            let mut pyy = 0.0;
            let mut e = 0.0;
            let mut qi = 0.0;
            for (a, b) in u_segments(x, kern, grid) {
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (t, w) in gl.nodes.iter().zip(&gl.weights) {
                    let u = mid + half * t;
                    let wu = w * half;
                    let au = u.abs();
                    let ku = kern.k(au);
                    let mut line = 0.0;
                    let mut line_t = 0.0;
                    for (l, wl) in lam.nodes.iter().zip(&lam.weights) {
                        let front = rho(x + l * u);
                        line += wl * front * rho(x + (l - 1.0) * u);
                        line_t += wl * front * drho_dt(x + (l - 1.0) * u);
                    }
                    pxx += wu * PI * u * u * kern.phi(au) * line;
                    pyy += wu * 0.5 * ku * line;
                    e += wu * 0.5 * ku * rho(x + u);
                    qi += wu * 0.5 * u * ku * line_t;
                }
            }
            let r = rho(x);
            [pxx, pyy, e, (r * e - pxx) * vx[j] + qi]
        })
        .collect();
    VlasovTransfer {
        p_xx: rows.iter().map(|r| r[0]).collect(),
        p_yy: rows.iter().map(|r| r[1]).collect(),
        e: rows.iter().map(|r| r[2]).collect(),
        q_x: rows.iter().map(|r| r[3]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{adaptive_simpson, simpson};
    use crate::state::Boundary;

    #[test]
    fn sutherland_coefficient_and_energy_identity() {
        let k = AttractionKernel::sutherland6(1.0, 1.0, 24.0).unwrap();
        assert!((k.a - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((k.energy_integral() + k.a).abs() < 1e-14);
        // K from its definition, by quadrature.
        for u in [0.3, 1.0, 2.5] {
            let num = 2.0 * PI * adaptive_simpson(u, 60.0, 1e-13, &|s: f64| s * k.phi(s));
            let exact_tail = 2.0 * PI * (-(1.0f64) / (4.0 * 60f64.powi(4)));
            assert!((k.k(u) - (num + exact_tail)).abs() < 1e-9, "{u}");
        }
        let null = AttractionKernel::sutherland6(0.0, 1.0, 16.0).unwrap();
        assert_eq!(null.a, 0.0);
        assert_eq!(null.k(0.5), 0.0);
    }

    #[test]
    fn table_kernel_checks_and_integrals() {
        let r: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let phi: Vec<f64> = r.iter().map(|x| -(4.0 - x) * (4.0 - x) / 16.0).collect();
        let k = AttractionKernel::from_table(r.clone(), phi.clone()).unwrap();
        assert!(k.a > 0.0);
        // Piecewise quadratic integrand: Simpson is exact between samples.
        let mut num = 0.0;
        for w in r.windows(2) {
            let a = w[0].max(1.05);
            if a < w[1] {
                num += simpson(a, w[1], 2, |s: f64| s * k.phi(s));
            }
        }
        assert!((k.k(1.05) - 2.0 * PI * num).abs() < 1e-12);
        let mut bad = phi.clone();
        *bad.last_mut().unwrap() = -0.1;
        assert!(AttractionKernel::from_table(r.clone(), bad).is_err());
        let rising: Vec<f64> = phi.iter().map(|p| -p - 1.0).collect();
        assert!(AttractionKernel::from_table(r, rising).is_err());
    }

    #[test]
    fn uniform_density_feels_no_force() {
        let k = AttractionKernel::sutherland6(1.0, 1.0, 16.0).unwrap();
        let g = SpatialGrid::new(6.0, 12, Boundary::Periodic).unwrap();
        for f in vlasov_force(&|_| 0.1, &k, &g) {
            assert!(f.abs() < 1e-14, "{f}");
        }
    }

    #[test]
    fn force_points_to_the_dense_side() {
        let k = AttractionKernel::sutherland6(1.0, 1.0, 16.0).unwrap();
        let g = SpatialGrid::new(40.0, 40, Boundary::Specular).unwrap();
        let rho = |x: f64| if !(0.0..=40.0).contains(&x) { 0.0 } else if x > 20.0 { 0.2 } else { 0.1 };
        let f = vlasov_force(&rho, &k, &g);
        assert!(f[19] > 0.0 && f[20] > 0.0);
    }
}
