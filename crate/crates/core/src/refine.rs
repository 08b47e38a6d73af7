//! Refinement studies: residuals at geometrically refined resolutions and
//! their observed convergence orders.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::collision::CollisionMode;
use crate::config::ScenarioConfig;
use crate::diagnostics::{
    balance_audit, compute_frame, divergence, flux_jc, h_collisional_rate, i_reduced, AuditReport,
    DiagnosticsContext, FnFields, LineRules,
};
use crate::error::{Error, Result};
use crate::integrator::transport;
use crate::runner::{build_integrator, with_threads};
use crate::state::{make_state, maxwellian, Boundary, InitialCondition, SimState, SpatialGrid};

/// One line of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub quantity: String,
    /// Resolution parameter of each level (cell width).
    pub h: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Orders between consecutive levels.
    pub orders: Vec<f64>,
    /// Least-squares order over all levels.
    pub order: f64,
    /// Asymptotic constant `C` of `residual ≈ C h^order`.
    pub constant: f64,
    /// False when a refinement failed to reduce the residual, which usually
    /// means a tolerance floor has been reached.
    pub monotone: bool,
}

/// Least-squares fit of `ln e = ln C + p ln h`, returning `(p, C)`.
pub fn fit_order(h: &[f64], e: &[f64]) -> (f64, f64) {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let p = sxy / sxx;
    (p, (my - p * mx).exp())
}

pub fn convergence_row(quantity: &str, h: Vec<f64>, residuals: Vec<f64>) -> ConvergenceRow {
    let orders = h
        .windows(2)
        .zip(residuals.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect();
    let (order, constant) = fit_order(&h, &residuals);
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);
    ConvergenceRow {
        quantity: quantity.to_string(),
        h,
        residuals,
        orders,
        order,
        constant,
        monotone,
    }
}

fn check_levels(levels: usize) -> Result<()> {
    if levels < 3 {
        return Err(Error::config("levels", "a refinement study needs at least three levels"));
    }
    Ok(())
}

/// Sinusoidal density and velocity used by the manufactured balance.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedWave {
    pub rho0: f64,
    pub delta: f64,
    pub v0: f64,
    pub length: f64,
}

impl ManufacturedWave {
    fn k(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn rho(&self, x: f64) -> f64 {
        self.rho0 * (1.0 + self.delta * (self.k() * x).sin())
    }

    pub fn velocity(&self, x: f64) -> f64 {
        self.v0 * (self.k() * x).cos()
    }

    /// `∂_t ρ = −∂_x(ρ v)`.
    pub fn rho_t(&self, x: f64) -> f64 {
        let k = self.k();
        let (s, c) = (k * x).sin_cos();
        let rho_x = self.rho0 * self.delta * k * c;
        let v_x = -self.v0 * k * s;
        -(rho_x * self.velocity(x) + self.rho(x) * v_x)
    }

    /// Ball occupancy `R(x) = π∫(σ² − s²)ρ(x + s)ds` in closed form.
    pub fn occupancy(&self, x: f64, sigma: f64) -> f64 {
        let ks = self.k() * sigma;
        let shape = 3.0 * (ks.sin() - ks * ks.cos()) / ks.powi(3);
        4.0 * PI * sigma.powi(3) / 3.0 * self.rho0 * (1.0 + self.delta * shape * (self.k() * x).sin())
    }
}

/// Largest cellwise `|∂_t H^(c) + ∂_x J^(c) + I|` for a manufactured periodic
/// wave, with the divergence taken by the discrete operator on `n_x` cells.
pub fn manufactured_residual(config: &ScenarioConfig, wave: ManufacturedWave, n_x: usize) -> Result<f64> {
    let model = config.model()?;
    let sigma = model.sigma;
    let grid = SpatialGrid::new(wave.length, n_x, Boundary::Periodic)?;
    let fields = FnFields {
        rho: |x: f64| wave.rho(x),
        momentum: |x: f64| wave.rho(x) * wave.velocity(x),
        occupancy: |x: f64| wave.occupancy(x, sigma),
    };
    let rules = LineRules {
        n_mu: 6,
        n_tau: 6,
        mu_pieces: 8,
    };
    let xs = grid.centers();
    let jc = flux_jc(&fields, &model, &xs, rules)?;
    let div = divergence(&jc, &grid);
    let rate = h_collisional_rate(&fields, &|x| wave.rho_t(x), &model, &xs, 8)?;
    let ex = i_reduced(&fields, &model, &xs, rules);
    Ok((0..n_x).map(|j| (rate[j] + div[j] + ex[j]).abs()).fold(0.0, f64::max))
}

pub fn default_wave(config: &ScenarioConfig) -> Result<ManufacturedWave> {
    let b = config.model()?.b();
    Ok(ManufacturedWave {
        rho0: 0.15 / b,
        delta: 0.2,
        v0: 0.3,
        length: config.length,
    })
}

/// Collisional balance residual at `n_x · 2^l` cells.
pub fn manufactured_balance(config: &ScenarioConfig, levels: usize) -> Result<ConvergenceRow> {
    check_levels(levels)?;
    let wave = default_wave(config)?;
    let mut h = Vec::new();
    let mut e = Vec::new();
    for l in 0..levels {
        let n = config.n_x << l;
        h.push(wave.length / n as f64);
        e.push(manufactured_residual(config, wave, n)?);
    }
    Ok(convergence_row("collisional balance", h, e))
}

/// Free-streaming error against the exact solution `f₀(x − ξ_x t, ξ)`.
pub fn advection_error(config: &ScenarioConfig, n_x: usize, t_end: f64) -> Result<f64> {
    let grid = SpatialGrid::new(config.length, n_x, Boundary::Periodic)?;
    let vg = crate::state::VelocityGrid::new(config.n_v, config.xi_max)?;
    let k = 2.0 * PI / config.length;
    let profile = |x: f64| 0.1 * (1.0 + 0.3 * (k * x).sin());
    let shape = maxwellian(1.0, [0.0; 3], 1.0, &vg);
    let mut state = SimState {
        space: grid.clone(),
        velocity: vg.clone(),
        f: crate::state::DistributionField::zeros(n_x, vg.len()),
        time: 0.0,
    };
    for j in 0..n_x {
        let x = grid.center(j);
        state.f.cell_mut(j).iter_mut().zip(&shape).for_each(|(v, s)| *v = profile(x) * s);
    }
    let xi = vg.axis.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let steps = (t_end / (config.cfl * grid.dx / xi)).ceil() as usize;
    let dt = t_end / steps as f64;
    for _ in 0..steps {
        transport(&mut state.f, &grid, &vg, dt);
    }
    let mut err = 0.0;
    let mut norm = 0.0;
    for j in 0..n_x {
        let x = grid.center(j);
        let cell = state.f.cell(j);
        for (n, (v, s)) in cell.iter().zip(&shape).enumerate() {
            let exact = profile(x - vg.node(n)[0] * t_end) * s;
            err += (v - exact).abs();
            norm += exact.abs();
        }
    }
    Ok(err / norm)
}

/// Transport error at `n_x · 2^l` cells over a fixed time.
pub fn advection_exactness(config: &ScenarioConfig, levels: usize) -> Result<ConvergenceRow> {
    check_levels(levels)?;
    let t_end = 0.5 * config.length / config.xi_max;
    let mut h = Vec::new();
    let mut e = Vec::new();
    for l in 0..levels {
        let n = config.n_x << l;
        h.push(config.length / n as f64);
        e.push(advection_error(config, n, t_end)?);
    }
    Ok(convergence_row("advection", h, e))
}

/// Relaxation with a density perturbation, the workload of the closure audit.
pub fn perturbed_relaxation(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        boundary: Boundary::Periodic,
        collisions: Some(CollisionMode::Enskog),
        potential: None,
        initial: InitialCondition::Bimodal {
            rho: 0.1,
            u: 1.5,
            temperature: 1.0,
            perturbation: 0.1,
        },
        ..config.clone()
    }
}

/// Frames at every step of `steps` steps of length `dt`, and their audit.
pub fn audited_run(config: &ScenarioConfig, steps: usize, dt: f64) -> Result<AuditReport> {
    let it = build_integrator(config)?;
    let mut state = make_state(config)?;
    let ctx = DiagnosticsContext {
        kernel: &it.kernel,
        attraction: it.attraction.as_ref(),
        wall_temperature: 1.0,
        rules: LineRules::default(),
    };
    let mut frames = vec![compute_frame(&ctx, &state)?];
    for _ in 0..steps {
        it.step(&mut state, dt)?;
        frames.push(compute_frame(&ctx, &state)?);
    }
    balance_audit(&frames, &state.space)
}

/// Cellwise closure residual of the entropy balance under joint refinement of
/// `Δx` and `Δt`, over a window of two coarse steps.
pub fn closure_residual(config: &ScenarioConfig, levels: usize) -> Result<(ConvergenceRow, Vec<AuditReport>)> {
    check_levels(levels)?;
    let base = perturbed_relaxation(config);
    let dt0 = build_integrator(&base)?.stable_dt(&make_state(&base)?)?;
    let mut h = Vec::new();
    let mut e = Vec::new();
    let mut audits = Vec::new();
    for l in 0..levels {
        let cfg = ScenarioConfig {
            n_x: base.n_x << l,
            ..base.clone()
        };
        let audit = audited_run(&cfg, 2 << l, dt0 / (1u32 << l) as f64)?;
        h.push(cfg.length / cfg.n_x as f64);
        e.push(audit.closure_max);
        audits.push(audit);
    }
    Ok((convergence_row("entropy closure", h, e), audits))
}

/// The full refinement table of a configuration.
pub fn refinement_study(config: &ScenarioConfig, levels: usize) -> Result<Vec<ConvergenceRow>> {
    check_levels(levels)?;
    with_threads(config.threads, || -> Result<Vec<ConvergenceRow>> {
        Ok(vec![
            manufactured_balance(config, levels)?,
            advection_exactness(config, levels)?,
            closure_residual(config, levels)?.0,
        ])
    })?
}

/// Writes a convergence table as CSV.
pub fn write_table(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# schema_version={}", crate::diagnostics::SCHEMA_VERSION)?;
    writeln!(out, "quantity,order,constant,monotone,h,residuals")?;
    for r in rows {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "{},{:.4},{:e},{},{},{}",
            r.quantity,
            r.order,
            r.constant,
            r.monotone,
            join(&r.h),
            join(&r.residuals)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        let (p, c) = fit_order(&h, &e);
        assert!((p - 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
        let row = convergence_row("q", h.to_vec(), e);
        assert!(row.monotone);
        assert!(row.orders.iter().all(|o| (o - 2.0).abs() < 1e-12));
    }

    #[test]
    fn manufactured_occupancy_matches_quadrature() {
        let wave = ManufacturedWave {
            rho0: 0.07,
            delta: 0.2,
            v0: 0.3,
            length: 6.0,
        };
        let x = 0.7;
        let direct = crate::quadrature::simpson(-1.0, 1.0, 4000, |s| PI * (1.0 - s * s) * wave.rho(x + s));
        assert!((wave.occupancy(x, 1.0) - direct).abs() < 1e-12, "{} vs {direct}", wave.occupancy(x, 1.0));
        let h = 1e-5;
        let fd = -((wave.rho(x + h) * wave.velocity(x + h)) - wave.rho(x - h) * wave.velocity(x - h)) / (2.0 * h);
        assert!((wave.rho_t(x) - fd).abs() < 1e-9);
    }

    #[test]
    fn fewer_than_three_levels_is_rejected() {
        let c = ScenarioConfig::default();
        assert!(manufactured_balance(&c, 2).is_err());
    }
}
