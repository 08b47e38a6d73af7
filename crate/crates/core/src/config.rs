//! Scenario configuration: flat `section.key = value` text with strict key checking.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::collision::{CollisionMode, Scheme};
use crate::error::{Error, Result};
use crate::factor::{Contact, ContactTable, EnskogModel, DOMAIN_GUARD};
use crate::sphere::{product_quadrature, sphere_quadrature, SphereQuadrature};
use crate::state::{Boundary, InitialCondition};
use crate::vlasov::{AttractionKernel, PotentialSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ContactKind {
    VanDerWaals,
    CarnahanStarling,
    Table(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Text,
    Binary,
}

/// Everything needed to set up and drive one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub length: f64,
    pub n_x: usize,
    pub boundary: Boundary,
    pub n_v: usize,
    pub xi_max: f64,
    pub renormalize: bool,
    pub contact: ContactKind,
    pub sigma: f64,
    pub mass: f64,
    /// `None` disables collisions.
    pub collisions: Option<CollisionMode>,
    pub scheme: Scheme,
    pub subsample: f64,
    pub sphere_order: usize,
    /// Product sphere rule `(n_mu, n_phi)` used instead of a Lebedev rule.
    pub sphere_product: Option<(usize, usize)>,
    pub potential: Option<PotentialSpec>,
    pub initial: InitialCondition,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub cfl: f64,
    pub output_stride: usize,
    pub threads: usize,
    pub max_steps: usize,
    pub n_tau: usize,
    pub out_dir: PathBuf,
    pub snapshot_format: SnapshotFormat,
    pub frames: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: "custom".into(),
            length: 8.0,
            n_x: 32,
            boundary: Boundary::Periodic,
            n_v: 12,
            xi_max: 6.0,
            renormalize: false,
            contact: ContactKind::VanDerWaals,
            sigma: 1.0,
            mass: 1.0,
            collisions: Some(CollisionMode::Enskog),
            scheme: Scheme::Symmetric,
            subsample: 1.0,
            sphere_order: 26,
            sphere_product: None,
            potential: None,
            initial: InitialCondition::Uniform {
                rho: 0.1,
                velocity: [0.0; 3],
                temperature: 1.0,
            },
            t_end: 1.0,
            dt: None,
            cfl: 0.5,
            output_stride: 10,
            threads: 1,
            max_steps: 1_000_000,
            n_tau: 4,
            out_dir: PathBuf::from("out"),
            snapshot_format: SnapshotFormat::Text,
            frames: true,
        }
    }
}

const KEYS: &[&str] = &[
    "scenario",
    "geometry.length",
    "geometry.n_x",
    "geometry.boundary",
    "geometry.wall_temperature",
    "velocity.n_v",
    "velocity.xi_max",
    "velocity.renormalize",
    "model.contact",
    "model.table",
    "model.sigma",
    "model.mass",
    "collision.mode",
    "collision.scheme",
    "collision.subsample",
    "sphere.order",
    "sphere.n_mu",
    "sphere.n_phi",
    "potential.kind",
    "potential.epsilon",
    "potential.table",
    "potential.cutoff",
    "initial.kind",
    "initial.rho",
    "initial.temperature",
    "initial.vx",
    "initial.vy",
    "initial.vz",
    "initial.amplitude",
    "initial.t_left",
    "initial.t_right",
    "initial.u",
    "initial.perturbation",
    "initial.t_parallel",
    "initial.t_perpendicular",
    "initial.path",
    "run.t_end",
    "run.dt",
    "run.cfl",
    "run.output_stride",
    "run.threads",
    "run.max_steps",
    "run.n_tau",
    "output.dir",
    "output.snapshot",
    "output.frames",
];

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::config(key, "required for this initial condition"))
    }
}

impl ScenarioConfig {
    /// Parses configuration text; returns the config and warnings for ignored keys.
    pub fn parse_str(text: &str, strict: bool) -> Result<(Self, Vec<String>)> {
        let mut map = BTreeMap::new();
        let mut warnings = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), "expected `key = value`"))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                if strict {
                    return Err(Error::config(k, "unknown key"));
                }
                warnings.push(format!("ignoring unknown key `{k}`"));
                continue;
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(Error::config(k, "given more than once"));
            }
        }
        let e = Entries { map };
        let d = ScenarioConfig::default();

        let boundary = match e.str("geometry.boundary").unwrap_or("periodic") {
            "periodic" => Boundary::Periodic,
            "specular" => Boundary::Specular,
            "diffuse" => Boundary::Diffuse {
                wall_temperature: e
                    .parse("geometry.wall_temperature")?
                    .ok_or_else(|| Error::config("geometry.wall_temperature", "required for diffuse walls"))?,
            },
            other => return Err(Error::config("geometry.boundary", format!("unknown kind `{other}`"))),
        };
        let contact = match e.str("model.contact").unwrap_or("vdw") {
            "vdw" => ContactKind::VanDerWaals,
            "cs" => ContactKind::CarnahanStarling,
            "table" => ContactKind::Table(
                e.parse("model.table")?
                    .ok_or_else(|| Error::config("model.table", "required for a tabulated contact function"))?,
            ),
            other => return Err(Error::config("model.contact", format!("unknown kind `{other}`"))),
        };
        let collisions = match e.str("collision.mode").unwrap_or("enskog") {
            "enskog" => Some(CollisionMode::Enskog),
            "boltzmann" => Some(CollisionMode::Boltzmann),
            "off" => None,
            other => return Err(Error::config("collision.mode", format!("unknown mode `{other}`"))),
        };
        let scheme = match e.str("collision.scheme") {
            None => d.scheme,
            Some(s) => s.parse().map_err(|m: String| Error::config("collision.scheme", m))?,
        };
        let sphere_product = match (e.parse::<usize>("sphere.n_mu")?, e.parse::<usize>("sphere.n_phi")?) {
            (None, None) => None,
            (Some(a), Some(b)) => Some((a, b)),
            _ => return Err(Error::config("sphere.n_mu", "n_mu and n_phi must be given together")),
        };
        let potential = match e.str("potential.kind").unwrap_or("none") {
            "none" => None,
            "sutherland6" => Some(PotentialSpec::Sutherland6 {
                epsilon: e.or("potential.epsilon", 1.0)?,
                cutoff: e.or("potential.cutoff", 24.0)?,
            }),
            "table" => Some(PotentialSpec::Table {
                path: e
                    .parse("potential.table")?
                    .ok_or_else(|| Error::config("potential.table", "required for a tabulated potential"))?,
                cutoff: e.parse("potential.cutoff")?,
            }),
            other => return Err(Error::config("potential.kind", format!("unknown kind `{other}`"))),
        };
        let initial = match e.str("initial.kind").unwrap_or("uniform") {
            "uniform" => InitialCondition::Uniform {
                rho: e.or("initial.rho", 0.1)?,
                velocity: [e.or("initial.vx", 0.0)?, e.or("initial.vy", 0.0)?, e.or("initial.vz", 0.0)?],
                temperature: e.or("initial.temperature", 1.0)?,
            },
            "density-wave" => InitialCondition::DensityWave {
                rho: e.or("initial.rho", 0.1)?,
                amplitude: e.or("initial.amplitude", 0.2)?,
                temperature: e.or("initial.temperature", 1.0)?,
            },
            "velocity-wave" => InitialCondition::VelocityWave {
                rho: e.or("initial.rho", 0.1)?,
                amplitude: e.required("initial.amplitude")?,
                temperature: e.or("initial.temperature", 1.0)?,
            },
            "temperature-jump" => InitialCondition::TemperatureJump {
                rho: e.or("initial.rho", 0.1)?,
                t_left: e.required("initial.t_left")?,
                t_right: e.required("initial.t_right")?,
            },
            "bimodal" => InitialCondition::Bimodal {
                rho: e.or("initial.rho", 0.1)?,
                u: e.required("initial.u")?,
                temperature: e.or("initial.temperature", 1.0)?,
                perturbation: e.or("initial.perturbation", 0.0)?,
            },
            "anisotropic" => InitialCondition::Anisotropic {
                rho: e.or("initial.rho", 0.1)?,
                t_parallel: e.required("initial.t_parallel")?,
                t_perpendicular: e.required("initial.t_perpendicular")?,
            },
            "snapshot" => InitialCondition::Snapshot {
                path: e.required("initial.path")?,
            },
            other => return Err(Error::config("initial.kind", format!("unknown kind `{other}`"))),
        };
        let snapshot_format = match e.str("output.snapshot").unwrap_or("txt") {
            "txt" => SnapshotFormat::Text,
            "bin" => SnapshotFormat::Binary,
            other => return Err(Error::config("output.snapshot", format!("unknown format `{other}`"))),
        };
        let cfg = ScenarioConfig {
            scenario: e.str("scenario").unwrap_or(&d.scenario).to_string(),
            length: e.or("geometry.length", d.length)?,
            n_x: e.or("geometry.n_x", d.n_x)?,
            boundary,
            n_v: e.or("velocity.n_v", d.n_v)?,
            xi_max: e.or("velocity.xi_max", d.xi_max)?,
            renormalize: e.or("velocity.renormalize", d.renormalize)?,
            contact,
            sigma: e.or("model.sigma", d.sigma)?,
            mass: e.or("model.mass", d.mass)?,
            collisions,
            scheme,
            subsample: e.or("collision.subsample", d.subsample)?,
            sphere_order: e.or("sphere.order", d.sphere_order)?,
            sphere_product,
            potential,
            initial,
            t_end: e.or("run.t_end", d.t_end)?,
            dt: e.parse("run.dt")?,
            cfl: e.or("run.cfl", d.cfl)?,
            output_stride: e.or("run.output_stride", d.output_stride)?,
            threads: e.or("run.threads", d.threads)?,
            max_steps: e.or("run.max_steps", d.max_steps)?,
            n_tau: e.or("run.n_tau", d.n_tau)?,
            out_dir: e.or("output.dir", d.out_dir)?,
            snapshot_format,
            frames: e.or("output.frames", d.frames)?,
        };
        cfg.validate()?;
        Ok((cfg, warnings))
    }

    pub fn parse_config(path: &Path, strict: bool) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, strict)
    }

    /// Checks every constraint that does not need the initial state.
    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be positive"))
            }
        };
        pos("geometry.length", self.length)?;
        pos("velocity.xi_max", self.xi_max)?;
        pos("model.sigma", self.sigma)?;
        pos("model.mass", self.mass)?;
        pos("run.t_end", self.t_end)?;
        if let Some(dt) = self.dt {
            pos("run.dt", dt)?;
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("run.cfl", "must lie in (0, 1]"));
        }
        if self.n_x == 0 {
            return Err(Error::config("geometry.n_x", "must be positive"));
        }
        if self.output_stride == 0 {
            return Err(Error::config("run.output_stride", "must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config("collision.subsample", "must lie in (0, 1]"));
        }
        let space = crate::state::SpatialGrid::new(self.length, self.n_x, self.boundary)?;
        let velocity = crate::state::VelocityGrid::new(self.n_v, self.xi_max)?;
        let _ = space;
        self.initial.validate(&velocity)?;
        let model = self.model()?;
        if let Some(rho) = self.initial.max_density() {
            let x = 2.0 * model.b() * rho;
            let limit = DOMAIN_GUARD * model.x_max();
            if x >= limit {
                return Err(Error::config(
                    "initial.rho",
                    format!("occupancy 2bρ = {x} exceeds the guarded model domain {limit}"),
                ));
            }
        }
        if self.sphere_product.is_none() {
            self.sphere()?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<EnskogModel> {
        let contact = match &self.contact {
            ContactKind::VanDerWaals => Contact::VanDerWaals,
            ContactKind::CarnahanStarling => Contact::CarnahanStarling,
            ContactKind::Table(p) => Contact::Tabulated(ContactTable::from_file(p)?),
        };
        EnskogModel::new(self.sigma, self.mass, contact)
    }

    pub fn sphere(&self) -> Result<SphereQuadrature> {
        match self.sphere_product {
            Some((a, b)) => product_quadrature(a, b),
            None => sphere_quadrature(self.sphere_order).map_err(|_| {
                Error::config(
                    "sphere.order",
                    format!(
                        "unsupported order {} (available: {:?})",
                        self.sphere_order,
                        crate::sphere::LEBEDEV_ORDERS
                    ),
                )
            }),
        }
    }

    pub fn attraction(&self) -> Result<Option<AttractionKernel>> {
        self.potential.as_ref().map(|p| p.kernel(self.sigma)).transpose()
    }

    /// Resolved configuration as parseable text.
    pub fn echo(&self) -> String {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push(format!("{k} = {v}"));
        kv("scenario", self.scenario.clone());
        kv("geometry.length", self.length.to_string());
        kv("geometry.n_x", self.n_x.to_string());
        match self.boundary {
            Boundary::Periodic => kv("geometry.boundary", "periodic".into()),
            Boundary::Specular => kv("geometry.boundary", "specular".into()),
            Boundary::Diffuse { wall_temperature } => {
                kv("geometry.boundary", "diffuse".into());
                kv("geometry.wall_temperature", wall_temperature.to_string());
            }
        }
        kv("velocity.n_v", self.n_v.to_string());
        kv("velocity.xi_max", self.xi_max.to_string());
        kv("velocity.renormalize", self.renormalize.to_string());
        match &self.contact {
            ContactKind::VanDerWaals => kv("model.contact", "vdw".into()),
            ContactKind::CarnahanStarling => kv("model.contact", "cs".into()),
            ContactKind::Table(p) => {
                kv("model.contact", "table".into());
                kv("model.table", p.display().to_string());
            }
        }
        kv("model.sigma", self.sigma.to_string());
        kv("model.mass", self.mass.to_string());
        kv(
            "collision.mode",
            match self.collisions {
                Some(CollisionMode::Enskog) => "enskog",
                Some(CollisionMode::Boltzmann) => "boltzmann",
                None => "off",
            }
            .into(),
        );
        kv("collision.scheme", self.scheme.to_string());
        kv("collision.subsample", self.subsample.to_string());
        kv("sphere.order", self.sphere_order.to_string());
        if let Some((a, b)) = self.sphere_product {
            kv("sphere.n_mu", a.to_string());
            kv("sphere.n_phi", b.to_string());
        }
        match &self.potential {
            None => kv("potential.kind", "none".into()),
            Some(PotentialSpec::Sutherland6 { epsilon, cutoff }) => {
                kv("potential.kind", "sutherland6".into());
                kv("potential.epsilon", epsilon.to_string());
                kv("potential.cutoff", cutoff.to_string());
            }
            Some(PotentialSpec::Table { path, cutoff }) => {
                kv("potential.kind", "table".into());
                kv("potential.table", path.display().to_string());
                if let Some(c) = cutoff {
                    kv("potential.cutoff", c.to_string());
                }
            }
        }
        match &self.initial {
            InitialCondition::Uniform {
                rho,
                velocity,
                temperature,
            } => {
                kv("initial.kind", "uniform".into());
                kv("initial.rho", rho.to_string());
                kv("initial.vx", velocity[0].to_string());
                kv("initial.vy", velocity[1].to_string());
                kv("initial.vz", velocity[2].to_string());
                kv("initial.temperature", temperature.to_string());
            }
            InitialCondition::DensityWave {
                rho,
                amplitude,
                temperature,
            } => {
                kv("initial.kind", "density-wave".into());
                kv("initial.rho", rho.to_string());
                kv("initial.amplitude", amplitude.to_string());
                kv("initial.temperature", temperature.to_string());
            }
            InitialCondition::VelocityWave {
                rho,
                amplitude,
                temperature,
            } => {
                kv("initial.kind", "velocity-wave".into());
                kv("initial.rho", rho.to_string());
                kv("initial.amplitude", amplitude.to_string());
                kv("initial.temperature", temperature.to_string());
            }
            InitialCondition::TemperatureJump { rho, t_left, t_right } => {
                kv("initial.kind", "temperature-jump".into());
                kv("initial.rho", rho.to_string());
                kv("initial.t_left", t_left.to_string());
                kv("initial.t_right", t_right.to_string());
            }
            InitialCondition::Bimodal {
                rho,
                u,
                temperature,
                perturbation,
            } => {
                kv("initial.kind", "bimodal".into());
                kv("initial.rho", rho.to_string());
                kv("initial.u", u.to_string());
                kv("initial.temperature", temperature.to_string());
                kv("initial.perturbation", perturbation.to_string());
            }
            InitialCondition::Anisotropic {
                rho,
                t_parallel,
                t_perpendicular,
            } => {
                kv("initial.kind", "anisotropic".into());
                kv("initial.rho", rho.to_string());
                kv("initial.t_parallel", t_parallel.to_string());
                kv("initial.t_perpendicular", t_perpendicular.to_string());
            }
            InitialCondition::Snapshot { path } => {
                kv("initial.kind", "snapshot".into());
                kv("initial.path", path.display().to_string());
            }
        }
        kv("run.t_end", self.t_end.to_string());
        if let Some(dt) = self.dt {
            kv("run.dt", dt.to_string());
        }
        kv("run.cfl", self.cfl.to_string());
        kv("run.output_stride", self.output_stride.to_string());
        kv("run.threads", self.threads.to_string());
        kv("run.max_steps", self.max_steps.to_string());
        kv("run.n_tau", self.n_tau.to_string());
        kv("output.dir", self.out_dir.display().to_string());
        kv(
            "output.snapshot",
            match self.snapshot_format {
                SnapshotFormat::Text => "txt",
                SnapshotFormat::Binary => "bin",
            }
            .into(),
        );
        kv("output.frames", self.frames.to_string());
        out.join("\n") + "\n"
    }

    /// Built-in scenario by name.
    pub fn library(name: &str) -> Result<Self> {
        let b = EnskogModel::van_der_waals().b();
        let base = ScenarioConfig {
            scenario: name.to_string(),
            ..ScenarioConfig::default()
        };
        let cfg = match name {
            "uniform-equilibrium" => ScenarioConfig {
                initial: InitialCondition::Uniform {
                    rho: 0.2 / b,
                    velocity: [0.0; 3],
                    temperature: 1.0,
                },
                ..base
            },
            "relaxation" => ScenarioConfig {
                initial: InitialCondition::Bimodal {
                    rho: 0.1,
                    u: 1.5,
                    temperature: 1.0,
                    perturbation: 0.0,
                },
                ..base
            },
            "density-wave" => ScenarioConfig {
                initial: InitialCondition::DensityWave {
                    rho: 0.1,
                    amplitude: 0.2,
                    temperature: 1.0,
                },
                ..base
            },
            "heat-bath" => ScenarioConfig {
                boundary: Boundary::Diffuse { wall_temperature: 1.0 },
                initial: InitialCondition::Uniform {
                    rho: 0.1,
                    velocity: [0.0; 3],
                    temperature: 2.0,
                },
                xi_max: 7.0,
                ..base
            },
            "eos-scan" => ScenarioConfig {
                n_x: 4,
                length: 4.0,
                ..base
            },
            "vlasov-condensation" => ScenarioConfig {
                boundary: Boundary::Diffuse { wall_temperature: 1.0 },
                potential: Some(PotentialSpec::Sutherland6 {
                    epsilon: 1.0,
                    cutoff: 24.0,
                }),
                initial: InitialCondition::DensityWave {
                    rho: 0.1,
                    amplitude: 0.1,
                    temperature: 1.0,
                },
                ..base
            },
            other => return Err(Error::config("scenario", format!("unknown scenario `{other}`"))),
        };
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let (c, _) = ScenarioConfig::parse_str("geometry.length = 4\nmodel.contact = cs\n", true).unwrap();
        assert_eq!(c.n_v, 12);
        assert_eq!(c.sphere_order, 26);
        assert_eq!(c.cfl, 0.5);
        assert!(c.echo().contains("velocity.n_v = 12"));
    }

    #[test]
    fn diffuse_without_wall_temperature_is_rejected() {
        let err = ScenarioConfig::parse_str("geometry.boundary = diffuse\n", true).unwrap_err();
        assert!(err.to_string().contains("geometry.wall_temperature"));
    }

    #[test]
    fn dense_van_der_waals_state_is_rejected() {
        let b = EnskogModel::van_der_waals().b();
        let text = format!("initial.rho = {}\nvelocity.xi_max = 6\n", 1.2 / b);
        assert!(ScenarioConfig::parse_str(&text, true).is_err());
    }

    #[test]
    fn unknown_keys_depend_on_strictness() {
        assert!(ScenarioConfig::parse_str("geometry.lenght = 3\n", true).is_err());
        let (_, w) = ScenarioConfig::parse_str("geometry.lenght = 3\n", false).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn echo_round_trips() {
        for name in ["relaxation", "heat-bath", "vlasov-condensation", "uniform-equilibrium"] {
            let c = ScenarioConfig::library(name).unwrap();
            let (back, _) = ScenarioConfig::parse_str(&c.echo(), true).unwrap();
            assert_eq!(back, c);
        }
    }
}
