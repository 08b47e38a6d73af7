//! Modified Enskog factor: contact function, occupancy and equation of state.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, simpson};
use crate::state::{SpatialGrid, Stencil};
use crate::GAS_CONSTANT;

/// Fraction of the contact-function domain a state may occupy.
pub const DOMAIN_GUARD: f64 = 0.95;

/// Monotone piecewise-cubic contact function read from samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTable {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    slopes: Vec<f64>,
}

impl ContactTable {
    pub fn new(x: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != s.len() {
            return Err(Error::config("model.table", "need at least two (x, S) samples"));
        }
        if x[0] != 0.0 {
            return Err(Error::config("model.table", "samples must start at x = 0"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("model.table", "x must be strictly increasing"));
        }
        if s.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::config("model.table", "S must be finite and nonnegative"));
        }
        let slopes = pchip_slopes(&x, &s);
        Ok(ContactTable { x, s, slopes })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut xs = Vec::new();
        let mut ss = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("line {}: {e}", n + 1),
                })?;
            if cols.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("line {}: expected two columns", n + 1),
                });
            }
            xs.push(cols[0]);
            ss.push(cols[1]);
        }
        ContactTable::new(xs, ss)
    }

    pub fn end(&self) -> f64 {
        *self.x.last().expect("table is non-empty")
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = match self.x.partition_point(|v| *v <= x) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.s[i] + h10 * h * self.slopes[i] + h01 * self.s[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

// Fritsch–Carlson slopes with harmonic-mean interior values.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    for i in 1..n - 1 {
        if d[i - 1] * d[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

/// Contact function selecting the equation of state.
#[derive(Debug, Clone, PartialEq)]
pub enum Contact {
    VanDerWaals,
    CarnahanStarling,
    Tabulated(ContactTable),
}

/// Hard-sphere parameters plus the contact function.
#[derive(Debug, Clone, PartialEq)]
pub struct EnskogModel {
    pub sigma: f64,
    pub mass: f64,
    pub contact: Contact,
}

impl EnskogModel {
    pub fn new(sigma: f64, mass: f64, contact: Contact) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("model.sigma", "must be positive"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::config("model.mass", "must be positive"));
        }
        Ok(EnskogModel { sigma, mass, contact })
    }

    pub fn van_der_waals() -> Self {
        EnskogModel {
            sigma: 1.0,
            mass: 1.0,
            contact: Contact::VanDerWaals,
        }
    }

    pub fn carnahan_starling() -> Self {
        EnskogModel {
            sigma: 1.0,
            mass: 1.0,
            contact: Contact::CarnahanStarling,
        }
    }

    /// Second virial coefficient per unit mass, `2π σ³ / 3m`.
    pub fn b(&self) -> f64 {
        2.0 * PI / 3.0 * self.sigma.powi(3) / self.mass
    }

    /// Upper end of the domain of the contact function.
    pub fn x_max(&self) -> f64 {
        match &self.contact {
            Contact::VanDerWaals => 2.0,
            Contact::CarnahanStarling => 8.0,
            Contact::Tabulated(t) => t.end(),
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        let limit = self.x_max();
        let inside = match &self.contact {
            Contact::Tabulated(_) => (0.0..=limit).contains(&x),
            _ => (0.0..limit).contains(&x),
        };
        if inside {
            Ok(())
        } else {
            Err(Error::ModelDomain {
                cell: None,
                occupancy: x,
                limit,
            })
        }
    }

    /// Contact function without the domain check.
    #[inline]
    pub fn s_unchecked(&self, x: f64) -> f64 {
        match &self.contact {
            Contact::VanDerWaals => 1.0 / (2.0 - x),
            Contact::CarnahanStarling => 16.0 * (16.0 - x) / (8.0 - x).powi(3),
            Contact::Tabulated(t) => t.eval(x),
        }
    }

    pub fn contact_s(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.s_unchecked(x))
    }

    /// `∫₀^R S(x) dx`.
    pub fn contact_s_integral(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match &self.contact {
            Contact::VanDerWaals => (2.0 / (2.0 - r)).ln(),
            Contact::CarnahanStarling => {
                let u = 8.0 - r;
                16.0 / u + 64.0 / (u * u) - 3.0
            }
            Contact::Tabulated(t) => {
                let tol = 1e-12 * (1.0 + r);
                // Integrate piece by piece so every cubic segment is smooth.
                let mut acc = 0.0;
                let mut a = 0.0;
                for &knot in t.x.iter().skip(1) {
                    let b = knot.min(r);
                    if b > a {
                        acc += adaptive_simpson(a, b, tol, &|x| t.eval(x));
                    }
                    a = knot;
                    if knot >= r {
                        break;
                    }
                }
                acc
            }
        })
    }

    /// `∫₀^R S` by adaptive quadrature, for cross-checking the closed forms.
    pub fn contact_s_integral_numeric(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(adaptive_simpson(0.0, r, 1e-13, &|x| self.s_unchecked(x)))
    }

    /// Equilibrium pressure `ρRT (1 + 2bρ S(2bρ))`.
    pub fn eos_pressure(&self, rho: f64, t: f64) -> Result<f64> {
        let x = 2.0 * self.b() * rho;
        let p = rho * GAS_CONSTANT * t * (1.0 + x * self.contact_s(x)?);
        if let Some(q) = self.eos_closed_form(rho, t) {
            if (p - q).abs() > 1e-12 * p.abs().max(q.abs()) {
                return Err(Error::Consistency(format!(
                    "equation of state forms disagree: {p} vs {q}"
                )));
            }
        }
        Ok(p)
    }

    /// Classical closed forms of the two built-in equations of state.
    pub fn eos_closed_form(&self, rho: f64, t: f64) -> Option<f64> {
        let br = self.b() * rho;
        let prt = rho * GAS_CONSTANT * t;
        match self.contact {
            Contact::VanDerWaals => Some(prt / (1.0 - br)),
            Contact::CarnahanStarling => {
                let eta = br / 4.0;
                Some(prt * (1.0 + eta + eta * eta - eta.powi(3)) / (1.0 - eta).powi(3))
            }
            Contact::Tabulated(_) => None,
        }
    }
}

/// Occupancy at an arbitrary position, integrated exactly for the linear
/// interpolant of the density.
pub fn occupancy_at(rho: &[f64], grid: &SpatialGrid, model: &EnskogModel, x: f64) -> f64 {
    let sigma = model.sigma;
    let mut cuts: Vec<f64> = Vec::with_capacity(64);
    let pieces = 8usize.max((2.0 * sigma / grid.dx).ceil() as usize);
    for i in 0..=pieces {
        cuts.push(-sigma + 2.0 * sigma * i as f64 / pieces as f64);
    }
    // Interpolation knots sit at cell centers (and their periodic images).
    let lo = x - sigma;
    let hi = x + sigma;
    if grid.boundary.is_periodic() {
        let first = ((lo / grid.dx) - 0.5).floor() as i64;
        let last = ((hi / grid.dx) - 0.5).ceil() as i64;
        for m in first..=last {
            let c = (m as f64 + 0.5) * grid.dx;
            if c > lo && c < hi {
                cuts.push(c - x);
            }
        }
    } else {
        for j in 0..grid.n_x {
            let c = grid.center(j);
            if c > lo && c < hi {
                cuts.push(c - x);
            }
        }
        for wall in [0.0, grid.length] {
            if wall > lo && wall < hi {
                cuts.push(wall - x);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * sigma);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = x + 0.5 * (a + b);
        if !grid.contains(mid) {
            continue;
        }
        let clamp = |y: f64| {
            if grid.boundary.is_periodic() {
                y
            } else {
                y.clamp(0.0, grid.length)
            }
        };
        acc += simpson(a, b, 2, |s| {
            grid.interpolate(rho, clamp(x + s)) * (sigma * sigma - s * s)
        });
    }
    PI / model.mass * acc
}

/// Cellwise occupancy with linear interpolation in between.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyField {
    pub values: Vec<f64>,
}

impl OccupancyField {
    #[inline]
    pub fn at_stencil(&self, s: &Stencil) -> f64 {
        s.apply(&self.values)
    }

    pub fn at(&self, grid: &SpatialGrid, x: f64) -> Option<f64> {
        grid.stencil(x).map(|s| self.at_stencil(&s))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Occupancy of every cell; refuses states beyond the guarded model domain.
pub fn occupancy_r(rho: &[f64], grid: &SpatialGrid, model: &EnskogModel) -> Result<OccupancyField> {
    use rayon::prelude::*;
    if let Some(j) = rho.iter().position(|r| !(*r >= 0.0)) {
        return Err(Error::Numerical(format!("negative or invalid density in cell {j}")));
    }
    let values: Vec<f64> = (0..grid.n_x)
        .into_par_iter()
        .map(|j| occupancy_at(rho, grid, model, grid.center(j)))
        .collect();
    let limit = model.x_max();
    for (j, r) in values.iter().enumerate() {
        if *r > DOMAIN_GUARD * limit || !r.is_finite() {
            return Err(Error::ModelDomain {
                cell: Some(j),
                occupancy: *r,
                limit: DOMAIN_GUARD * limit,
            });
        }
    }
    Ok(OccupancyField { values })
}

/// Modified Enskog factor `[S(R(x)) + S(R(y))] χ(x) χ(y)`.
pub fn enskog_g(
    x: f64,
    y: f64,
    r: &OccupancyField,
    grid: &SpatialGrid,
    model: &EnskogModel,
) -> Result<f64> {
    let (Some(rx), Some(ry)) = (r.at(grid, x), r.at(grid, y)) else {
        return Ok(0.0);
    };
    Ok(model.contact_s(rx)? + model.contact_s(ry)?)
}

/// Collisional H density `ρ ∫₀^R S`.
pub fn h_collisional(rho: &[f64], r: &OccupancyField, model: &EnskogModel) -> Result<Vec<f64>> {
    rho.iter()
        .zip(&r.values)
        .map(|(d, x)| Ok(d * model.contact_s_integral(*x)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Boundary;

    #[test]
    fn contact_values() {
        let v = EnskogModel::van_der_waals();
        let c = EnskogModel::carnahan_starling();
        assert_eq!(v.contact_s(0.0).unwrap(), 0.5);
        assert_eq!(c.contact_s(0.0).unwrap(), 0.5);
        assert!((v.contact_s(0.4).unwrap() - 0.625).abs() < 1e-15);
        assert!((c.contact_s(0.4).unwrap() - 16.0 * 15.6 / 7.6f64.powi(3)).abs() < 1e-15);
        assert!(v.contact_s(2.0).is_err());
        assert!(c.contact_s(-0.1).is_err());
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        for m in [EnskogModel::van_der_waals(), EnskogModel::carnahan_starling()] {
            for r in [0.0, 0.1, 0.4, 1.3, 1.8] {
                let a = m.contact_s_integral(r).unwrap();
                let b = m.contact_s_integral_numeric(r).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{r}: {a} {b}");
            }
        }
        let v = EnskogModel::van_der_waals();
        assert!((v.contact_s_integral(0.4).unwrap() - 1.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_contact_reproduces_smooth_samples() {
        let m = EnskogModel::van_der_waals();
        let xs: Vec<f64> = (0..=160).map(|i| i as f64 * 0.01).collect();
        let ss: Vec<f64> = xs.iter().map(|x| m.s_unchecked(*x)).collect();
        let t = EnskogModel {
            contact: Contact::Tabulated(ContactTable::new(xs, ss).unwrap()),
            ..m.clone()
        };
        assert!((t.contact_s(0.405).unwrap() - m.contact_s(0.405).unwrap()).abs() < 1e-6);
        let a = t.contact_s_integral(1.2).unwrap();
        let b = m.contact_s_integral(1.2).unwrap();
        assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn uniform_periodic_occupancy_is_twice_b_rho() {
        let m = EnskogModel::van_der_waals();
        let rho0 = 0.2 / m.b();
        let g = SpatialGrid::new(3.0, 12, Boundary::Periodic).unwrap();
        let r = occupancy_r(&vec![rho0; 12], &g, &m).unwrap();
        for v in &r.values {
            assert!((v - 0.4).abs() < 1e-13);
        }
        let gf = enskog_g(0.3, 1.1, &r, &g, &m).unwrap();
        assert!((gf - 1.25).abs() < 1e-12);
    }

    #[test]
    fn wall_truncates_half_ball() {
        let m = EnskogModel::van_der_waals();
        let g = SpatialGrid::new(4.0, 16, Boundary::Specular).unwrap();
        let rho = vec![0.1; 16];
        let bulk = occupancy_at(&rho, &g, &m, 2.0);
        let wall = occupancy_at(&rho, &g, &m, 0.0);
        assert!((bulk - 2.0 * m.b() * 0.1).abs() < 1e-13);
        assert!((wall - 0.5 * bulk).abs() < 1e-13);
        assert_eq!(enskog_g(-0.1, 1.0, &occupancy_r(&rho, &g, &m).unwrap(), &g, &m).unwrap(), 0.0);
    }

    #[test]
    fn equations_of_state() {
        let v = EnskogModel::van_der_waals();
        let c = EnskogModel::carnahan_starling();
        let rho = 0.2 / v.b();
        assert!((v.eos_pressure(rho, 1.0).unwrap() / rho - 1.25).abs() < 1e-14);
        let z = c.eos_pressure(rho, 1.0).unwrap() / rho;
        let eta = 0.05;
        let closed = (1.0 + eta + eta * eta - eta * eta * eta) / (1.0f64 - eta).powi(3);
        assert!((z - closed).abs() < 1e-13, "{z}");
        assert!((z - 1.2274).abs() < 1e-4);
    }

    #[test]
    fn domain_guard_names_the_cell() {
        let m = EnskogModel::van_der_waals();
        let g = SpatialGrid::new(3.0, 6, Boundary::Periodic).unwrap();
        let mut rho = vec![0.1; 6];
        rho[4] = 3.0 / m.b();
        match occupancy_r(&rho, &g, &m) {
            Err(Error::ModelDomain { cell: Some(_), .. }) => {}
            other => panic!("expected domain error, got {other:?}"),
        }
    }
}
