//! Scenario driving: time stepping, ledgers, frame exports and snapshots.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::collision::{CollisionKernel, CollisionMode};
use crate::config::{ScenarioConfig, SnapshotFormat};
use crate::diagnostics::{
    balance_audit, compute_frame, free_energy_forms, AuditReport, DiagnosticsContext, DiagnosticsFrame, LineRules,
    SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::factor::{h_collisional, occupancy_r, OccupancyField};
use crate::integrator::Integrator;
use crate::state::{make_state, moments, write_snapshot, InitialCondition, SimState};
use crate::vlasov::vlasov_transfer;

/// Relative mass drift beyond which a run is aborted.
pub const MASS_DRIFT_LIMIT: f64 = 1e-10;

/// Slack `I − D` below `−SLACK_LIMIT · scale` aborts a run.
pub const SLACK_LIMIT: f64 = 1e-12;

/// Column names of the time-series ledger.
pub const SERIES_COLUMNS: [&str; 11] = [
    "t",
    "mass",
    "momentum_x",
    "energy",
    "h",
    "h_k",
    "h_c",
    "f",
    "f_tilde",
    "max_production",
    "min_slack",
];

/// One row of the time-series ledger.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub momentum_x: f64,
    pub energy: f64,
    pub h: f64,
    pub h_k: f64,
    pub h_c: f64,
    pub free: f64,
    pub free_tilde: f64,
    /// Largest cellwise `D − I`.
    pub max_production: f64,
    /// Smallest cellwise `(I − D) / scale`.
    pub min_slack: f64,
}

impl SeriesRow {
    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.mass,
            self.momentum_x,
            self.energy,
            self.h,
            self.h_k,
            self.h_c,
            self.free,
            self.free_tilde,
            self.max_production,
            self.min_slack,
        ]
    }
}

/// Everything a finished run produced besides its files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub series: Vec<SeriesRow>,
    pub frames: Vec<DiagnosticsFrame>,
    /// Balance audit over the exported frames, when there are at least three.
    pub audit: Option<AuditReport>,
    pub final_state: SimState,
    /// Largest per-step clipped mass fraction.
    pub clipped_mass: f64,
}

/// Collision kernel described by a configuration.
pub fn build_kernel(config: &ScenarioConfig) -> Result<CollisionKernel> {
    let state_grids = make_grids(config)?;
    Ok(CollisionKernel::new(
        state_grids.0,
        state_grids.1,
        config.model()?,
        config.sphere()?,
        config.collisions.unwrap_or(CollisionMode::Enskog),
        config.scheme,
        config.subsample,
    ))
}

fn make_grids(config: &ScenarioConfig) -> Result<(crate::state::SpatialGrid, crate::state::VelocityGrid)> {
    Ok((
        crate::state::SpatialGrid::new(config.length, config.n_x, config.boundary)?,
        crate::state::VelocityGrid::new(config.n_v, config.xi_max)?,
    ))
}

/// Integrator described by a configuration.
pub fn build_integrator(config: &ScenarioConfig) -> Result<Integrator> {
    let mut it = Integrator::new(build_kernel(config)?, config.attraction()?, config.cfl);
    it.collisions = config.collisions.is_some();
    Ok(it)
}

/// Runs `f` on a private pool of `threads` workers (zero keeps the global pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("run.threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// Ledger row without the flux diagnostics of a full frame.
pub fn series_row(integrator: &Integrator, state: &SimState, wall_temperature: f64) -> Result<SeriesRow> {
    let kernel = &integrator.kernel;
    let grid = &state.space;
    let vg = &state.velocity;
    let nx = grid.n_x;
    let mf = moments(&state.f, vg);
    let rho = mf.density();
    let r = match kernel.mode {
        CollisionMode::Enskog => occupancy_r(&rho, grid, &kernel.model)?,
        CollisionMode::Boltzmann => OccupancyField { values: vec![0.0; nx] },
    };
    let h_c = match kernel.mode {
        CollisionMode::Enskog => h_collisional(&rho, &r, &kernel.model)?,
        CollisionMode::Boltzmann => vec![0.0; nx],
    };
    let h_k = crate::diagnostics::h_kinetic(&state.f, vg);
    let e_v = match &integrator.attraction {
        Some(att) => {
            let rho_fn = |x: f64| grid.stencil(x).map_or(0.0, |s| s.apply(&rho));
            let zero = |_: f64| 0.0;
            vlasov_transfer(&rho_fn, &vec![0.0; nx], &zero, att, grid, 4).e
        }
        None => vec![0.0; nx],
    };
    let dx = grid.dx;
    let mut row = SeriesRow {
        t: state.time,
        min_slack: f64::INFINITY,
        max_production: f64::NEG_INFINITY,
        ..SeriesRow::default()
    };
    let [mass, momentum, kinetic] = state.totals();
    row.mass = mass;
    row.momentum_x = momentum;
    row.energy = kinetic + rho.iter().zip(&e_v).map(|(r, e)| r * e).sum::<f64>() * dx;
    for j in 0..nx {
        let (f1, _) = free_energy_forms(state.f.cell(j), vg, h_c[j], wall_temperature);
        row.h_k += h_k[j] * dx;
        row.h_c += h_c[j] * dx;
        row.free += f1 * dx;
        row.free_tilde += (f1 + rho[j] * e_v[j]) * dx;
    }
    row.h = row.h_k + row.h_c;
    if integrator.collisions {
        let pe = kernel.production_exchange(&state.f, &r)?;
        for j in 0..nx {
            row.max_production = row.max_production.max(pe.d[j] - pe.i[j]);
            if pe.scale[j] > 0.0 {
                row.min_slack = row.min_slack.min((pe.i[j] - pe.d[j]) / pe.scale[j]);
            }
        }
    }
    if !row.max_production.is_finite() {
        row.max_production = 0.0;
    }
    if !row.min_slack.is_finite() {
        row.min_slack = 0.0;
    }
    Ok(row)
}

fn series_from_frame(frame: &DiagnosticsFrame) -> SeriesRow {
    let g = &frame.globals;
    let mut row = SeriesRow {
        t: frame.time,
        mass: g.mass,
        momentum_x: g.momentum,
        energy: g.energy,
        h: g.h,
        h_k: g.h_k,
        h_c: g.h_c,
        free: g.free,
        free_tilde: g.free_tilde,
        max_production: f64::NEG_INFINITY,
        min_slack: f64::INFINITY,
    };
    for j in 0..frame.x.len() {
        row.max_production = row.max_production.max(frame.d[j] - frame.i_full[j]);
        if frame.scale[j] > 0.0 {
            row.min_slack = row.min_slack.min((frame.i_full[j] - frame.d[j]) / frame.scale[j]);
        }
    }
    if !row.min_slack.is_finite() {
        row.min_slack = 0.0;
    }
    row
}

/// Writes a time-series ledger.
pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "{}", SERIES_COLUMNS.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.values().iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn snapshot_path(config: &ScenarioConfig, stem: &str) -> PathBuf {
    let ext = match config.snapshot_format {
        SnapshotFormat::Text => "txt",
        SnapshotFormat::Binary => "bin",
    };
    config.out_dir.join(format!("{stem}.{ext}"))
}

/// Step count and uniform step length covering `[0, t_end]`.
pub fn plan_steps(config: &ScenarioConfig, integrator: &Integrator, state: &SimState) -> Result<(usize, f64)> {
    let dt0 = match config.dt {
        Some(dt) => dt,
        None => integrator.stable_dt(state)?,
    };
    if !(dt0 > 0.0 && dt0.is_finite()) {
        return Err(Error::Numerical(format!("no usable time step ({dt0})")));
    }
    let steps = (config.t_end / dt0).ceil().max(1.0) as usize;
    if steps > config.max_steps {
        return Err(Error::config(
            "run.max_steps",
            format!("{steps} steps of {dt0:e} are needed to reach t_end"),
        ));
    }
    Ok((steps, config.t_end / steps as f64))
}

/// Drives a scenario to `t_end`, writing the ledger, frames and final snapshot
/// into the configured output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunSummary> {
    config.validate()?;
    with_threads(config.threads, || run_inner(config))?
}

fn run_inner(config: &ScenarioConfig) -> Result<RunSummary> {
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("resolved.cfg"), config.echo())?;
    let integrator = build_integrator(config)?;
    let mut state = make_state(config)?;
    let (steps, dt) = plan_steps(config, &integrator, &state)?;
    let wall_temperature = config.boundary.wall_temperature().unwrap_or_else(|| initial_temperature(&config.initial));
    let ctx = DiagnosticsContext {
        kernel: &integrator.kernel,
        attraction: integrator.attraction.as_ref(),
        wall_temperature,
        rules: LineRules {
            n_tau: config.n_tau,
            ..LineRules::default()
        },
    };
    let mass0 = state.totals()[0];
    let mut series = Vec::new();
    let mut frames = Vec::new();
    let mut clipped = 0.0f64;
    let record = |state: &SimState, series: &mut Vec<SeriesRow>, frames: &mut Vec<DiagnosticsFrame>| -> Result<()> {
        let row = if config.frames {
            let frame = compute_frame(&ctx, state)?;
            frame.write_csv(&config.out_dir.join(format!("frame_{:06}.csv", frames.len())))?;
            let row = series_from_frame(&frame);
            frames.push(frame);
            row
        } else {
            series_row(&integrator, state, wall_temperature)?
        };
        series.push(row);
        if row.min_slack < -SLACK_LIMIT {
            return Err(Error::Invariant(format!(
                "production exceeds exchange at t = {:e} (slack {:e} of scale)",
                row.t, row.min_slack
            )));
        }
        Ok(())
    };
    let outcome = (|| -> Result<()> {
        record(&state, &mut series, &mut frames)?;
        for n in 1..=steps {
            let before = state.clone();
            let rep = match integrator.step(&mut state, dt) {
                Ok(rep) => rep,
                Err(e) => {
                    state = before;
                    return Err(e);
                }
            };
            clipped = clipped.max(rep.clipped_mass);
            if !state.f.values.iter().all(|v| v.is_finite()) {
                state = before;
                return Err(Error::Numerical(format!("non-finite distribution at step {n}")));
            }
            let drift = (state.totals()[0] - mass0).abs() / mass0.max(f64::MIN_POSITIVE);
            if drift > MASS_DRIFT_LIMIT {
                return Err(Error::Invariant(format!("relative mass drift {drift:e} at step {n}")));
            }
            if n % config.output_stride == 0 || n == steps {
                record(&state, &mut series, &mut frames)?;
            }
        }
        Ok(())
    })();
    write_series(&config.out_dir.join("series.csv"), &series)?;
    if let Err(e) = outcome {
        write_snapshot(&snapshot_path(config, "last_good"), &state)?;
        return Err(e);
    }
    write_snapshot(&snapshot_path(config, "final"), &state)?;
    let audit = if frames.len() >= 3 && uniform_times(&frames) {
        Some(balance_audit(&frames, &state.space)?)
    } else {
        None
    };
    Ok(RunSummary {
        steps,
        dt,
        series,
        frames,
        audit,
        final_state: state,
        clipped_mass: clipped,
    })
}

fn uniform_times(frames: &[DiagnosticsFrame]) -> bool {
    let dt = frames[1].time - frames[0].time;
    frames.windows(2).all(|w| ((w[1].time - w[0].time) - dt).abs() <= 1e-9 * dt)
}

fn initial_temperature(initial: &InitialCondition) -> f64 {
    initial.max_temperature().unwrap_or(1.0)
}

/// One point of an equation-of-state scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosPoint {
    pub b_rho: f64,
    /// `(p^(k)_xx + p^(c)_xx) / ρRT` measured on a uniform Maxwellian.
    pub measured: f64,
    /// Closed-form compressibility of the contact model.
    pub expected: f64,
    pub rel_error: f64,
}

/// Default reduced densities of the scan.
pub const EOS_SCAN_DENSITIES: [f64; 8] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];

/// Compressibility at each reduced density `bρ`, at rest and `T = 1`.
pub fn eos_scan(config: &ScenarioConfig, b_rhos: &[f64]) -> Result<Vec<EosPoint>> {
    with_threads(config.threads, || {
        let mut cfg = config.clone();
        cfg.boundary = crate::state::Boundary::Periodic;
        cfg.collisions = Some(CollisionMode::Enskog);
        let kernel = build_kernel(&cfg)?;
        let model = &kernel.model;
        let b = model.b();
        b_rhos
            .iter()
            .map(|&br| {
                let rho = br / b;
                let init = InitialCondition::Uniform {
                    rho,
                    velocity: [0.0; 3],
                    temperature: 1.0,
                };
                let state =
                    SimState::from_initial(kernel.space.clone(), kernel.velocity.clone(), &init, cfg.renormalize)?;
                let mf = moments(&state.f, &state.velocity);
                let dens = mf.density();
                let r = occupancy_r(&dens, &state.space, model)?;
                let vel: Vec<[f64; 3]> = mf.cells.iter().map(|c| c.velocity()).collect();
                let ct = crate::diagnostics::collisional_transfer(&kernel, &state.f, &r, &vel, cfg.n_tau)?;
                let j = 0;
                let m = mf.cells[j]
                    .regular()
                    .ok_or_else(|| Error::Numerical("degenerate uniform cell".into()))?;
                let p_total = m.stress[0][0] + ct.p[j][0][0];
                let rt = crate::GAS_CONSTANT * m.temperature;
                let measured = p_total / (m.rho * rt);
                let expected = model.eos_pressure(rho, 1.0)? / rho;
                Ok(EosPoint {
                    b_rho: br,
                    measured,
                    expected,
                    rel_error: (measured - expected).abs() / expected,
                })
            })
            .collect()
    })?
}

/// Writes an equation-of-state scan as CSV.
pub fn write_eos(path: &Path, points: &[EosPoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "b_rho,measured,expected,rel_error")?;
    for p in points {
        writeln!(out, "{:e},{:e},{:e},{:e}", p.b_rho, p.measured, p.expected, p.rel_error)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(name: &str) -> ScenarioConfig {
        let mut c = ScenarioConfig::library(name).unwrap();
        c.n_x = 6;
        c.length = 6.0;
        c.n_v = 8;
        c.xi_max = 4.5;
        c.sphere_order = 6;
        c.t_end = 0.05;
        c.output_stride = 1;
        c.out_dir = tempfile::tempdir().unwrap().keep();
        c
    }

    #[test]
    fn uniform_equilibrium_keeps_h_constant() {
        let mut c = small("uniform-equilibrium");
        c.frames = false;
        let s = run_scenario(&c).unwrap();
        let h0 = s.series[0].h;
        for r in &s.series {
            assert!((r.h - h0).abs() < 1e-10 * h0.abs(), "{} {}", r.h, h0);
        }
        assert!(c.out_dir.join("series.csv").exists());
        assert!(c.out_dir.join("final.txt").exists());
        assert!(c.out_dir.join("resolved.cfg").exists());
    }

    #[test]
    fn series_row_matches_frame_globals() {
        let c = small("density-wave");
        let it = build_integrator(&c).unwrap();
        let state = make_state(&c).unwrap();
        let ctx = DiagnosticsContext {
            kernel: &it.kernel,
            attraction: None,
            wall_temperature: 1.0,
            rules: LineRules::default(),
        };
        let fr = compute_frame(&ctx, &state).unwrap();
        let a = series_from_frame(&fr);
        let b = series_row(&it, &state, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} {y}");
        }
    }

    #[test]
    fn max_steps_bound_is_a_config_error() {
        let mut c = small("relaxation");
        c.dt = Some(1e-4);
        c.max_steps = 10;
        assert!(matches!(run_scenario(&c), Err(Error::Config { .. })));
    }
}
