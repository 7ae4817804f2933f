//! Scenario configuration: parsing, scenario defaults and resolution.
//!
//! A config file only has to name the scenario; every other key falls back to
//! the scenario's defaults. Derived quantities left unset (`eta`, `d_p`, `d_x`,
//! `state.sigma`, `collision.widths`) are filled in by [`Config::resolve`], and
//! the resolved config is what the manifest records.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qbm_core::classical::RateModel;
use qbm_core::coefficients::friction_from_collision_rate;
use qbm_core::msqr::VarianceConvention;
use qbm_core::physical::{gkls_min_dx, validate_params, PhysicalParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    JzDephasing,
    QfpeMoments,
    GklsWitness,
    CmdScan,
    MsqrCollision,
    ClassicalFd,
    DxCompare,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::JzDephasing,
        Scenario::QfpeMoments,
        Scenario::GklsWitness,
        Scenario::CmdScan,
        Scenario::MsqrCollision,
        Scenario::ClassicalFd,
        Scenario::DxCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::JzDephasing => "jz-dephasing",
            Scenario::QfpeMoments => "qfpe-moments",
            Scenario::GklsWitness => "gkls-witness",
            Scenario::CmdScan => "cmd-scan",
            Scenario::MsqrCollision => "msqr-collision",
            Scenario::ClassicalFd => "classical-fd",
            Scenario::DxCompare => "dx-compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub physics: Physics,
    pub grid: GridSection,
    pub integrator: Integrator,
    pub state: StateSection,
    pub collision: CollisionSection,
    pub gas: GasSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub dust_mass: f64,
    pub molecule_mass: f64,
    pub temperature: f64,
    pub k_b: f64,
    pub hbar: f64,
    /// Localization rate of the positional-decoherence generator.
    pub lambda: f64,
    /// Defaults to the friction of a gas colliding at `collision.rate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Defaults to the fluctuation-dissipation value `η M k_B T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_p: Option<f64>,
    /// Defaults to the complete-positivity minimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub x0: f64,
    pub p0: f64,
    /// Position standard deviation of the initial Gaussian. The witness
    /// scenario defaults to the squeezed width `√(0.01 ħ²/(M k_B T))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    pub rate: f64,
    pub lattice_points: usize,
    pub lattice_spacing: f64,
    /// Molecule packet widths for the divergence scan; empty selects ten
    /// halvings from `1/√2` plus the narrowest representable width.
    pub widths: Vec<f64>,
    pub convention: VarianceConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub rate: RateModel,
    pub collisions: usize,
    pub p0: f64,
}

impl Config {
    pub fn defaults(scenario: Scenario) -> Config {
        let mut cfg = Config {
            scenario,
            seed: 1,
            out_dir: PathBuf::from("out").join(scenario.name()),
            physics: Physics {
                dust_mass: 1.0,
                molecule_mass: 1.0,
                temperature: 1.0,
                k_b: 1.0,
                hbar: 1.0,
                lambda: 0.5,
                eta: Some(1.0),
                d_p: None,
                d_x: None,
            },
            grid: GridSection {
                points: 128,
                length: 40.0,
            },
            integrator: Integrator {
                dt: 1e-3,
                t_end: 4.0,
                record_every: 500,
            },
            state: StateSection {
                x0: 0.0,
                p0: 0.0,
                sigma: Some(1.0),
            },
            collision: CollisionSection {
                rate: 1.0,
                lattice_points: 65_536,
                lattice_spacing: 2e-4,
                widths: Vec::new(),
                convention: VarianceConvention::Half,
            },
            gas: GasSection {
                rate: RateModel::FixedRate { tau: 1.0 },
                collisions: 100_000,
                p0: 0.0,
            },
        };
        match scenario {
            Scenario::JzDephasing => {}
            Scenario::QfpeMoments => {
                cfg.integrator = Integrator {
                    dt: 1e-3,
                    t_end: 2.0,
                    record_every: 100,
                };
                cfg.state = StateSection {
                    x0: -1.0,
                    p0: 1.0,
                    sigma: Some(1.0),
                };
            }
            Scenario::GklsWitness => {
                cfg.grid.length = 6.4;
                cfg.integrator = Integrator {
                    dt: 2.5e-4,
                    t_end: 0.05,
                    record_every: 10,
                };
                cfg.state.sigma = None;
            }
            Scenario::CmdScan | Scenario::DxCompare => {
                cfg.physics.dust_mass = 100.0;
                cfg.physics.eta = None;
            }
            Scenario::MsqrCollision => {
                cfg.physics.dust_mass = 100.0;
                cfg.physics.eta = None;
                // Wide enough in momentum to hold every thermal kick.
                cfg.grid.length = 20.0;
            }
            Scenario::ClassicalFd => {
                cfg.seed = 8;
                cfg.physics.dust_mass = 10.0;
                cfg.physics.eta = None;
                cfg.integrator.record_every = 100;
                cfg.gas.rate = RateModel::FluxWeighted { density: 1.0 };
            }
        }
        cfg
    }

    /// Parses TOML, or JSON when the path ends in `.json`, and overlays it on
    /// the defaults of the scenario it names.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Config::parse(&text, is_json).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, is_json: bool) -> Result<Config> {
        let user: Value = if is_json {
            serde_json::from_str(text).map_err(|e| anyhow!("JSON syntax error: {e}"))?
        } else {
            toml::from_str(text).map_err(|e| anyhow!("TOML syntax error: {e}"))?
        };
        let name = user
            .get("scenario")
            .ok_or_else(|| anyhow!("missing key `scenario`"))?;
        let scenario: Scenario =
            serde_json::from_value(name.clone()).map_err(|e| anyhow!("key `scenario`: {e}"))?;
        let mut merged = serde_json::to_value(Config::defaults(scenario))?;
        overlay(&mut merged, user);
        serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            anyhow!("key `{path}`: {}", e.into_inner())
        })
    }

    /// Fills in every derived quantity and checks all invariants.
    pub fn resolve(mut self) -> Result<Config> {
        let ph = &mut self.physics;
        if ph.eta.is_none() {
            ph.eta = Some(friction_from_collision_rate(
                ph.dust_mass,
                ph.molecule_mass,
                self.collision.rate,
            ));
        }
        let eta = ph.eta.unwrap_or_default();
        let d_p = *ph.d_p.get_or_insert(eta * ph.dust_mass * ph.k_b * ph.temperature);
        if self.physics.d_x.is_none() {
            let d_x = if d_p > 0.0 { gkls_min_dx(&self.params_unchecked())? } else { 0.0 };
            self.physics.d_x = Some(d_x);
        }
        let params = validate_params(self.params_unchecked()).context("[physics]")?;
        if self.state.sigma.is_none() {
            let kt = params.k_b * params.temperature;
            if !(kt > 0.0) {
                bail!("[state] sigma: the squeezed default needs k_B T > 0");
            }
            self.state.sigma = Some((0.01 * params.hbar * params.hbar / (params.dust_mass * kt)).sqrt());
        }
        if self.collision.widths.is_empty() {
            let mut widths: Vec<f64> = (0..=10)
                .map(|j| std::f64::consts::FRAC_1_SQRT_2 * 0.5f64.powi(j))
                .collect();
            widths.push(2.0 * self.collision.lattice_spacing);
            self.collision.widths = widths;
        }
        self.validate_sections()?;
        Ok(self)
    }

    fn validate_sections(&self) -> Result<()> {
        let checks: [(bool, &str); 10] = [
            (self.seed <= i64::MAX as u64, "seed must fit in a signed 64-bit integer"),
            (self.physics.lambda >= 0.0, "[physics] lambda must be non-negative"),
            (self.grid.points >= 8 && self.grid.points % 2 == 0, "[grid] points must be even and ≥ 8"),
            (self.grid.length > 0.0, "[grid] length must be positive"),
            (self.integrator.dt > 0.0 && self.integrator.t_end >= 0.0, "[integrator] needs dt > 0 and t_end ≥ 0"),
            (self.integrator.record_every >= 1, "[integrator] record_every must be ≥ 1"),
            (self.state.sigma.is_some_and(|s| s > 0.0), "[state] sigma must be positive"),
            (self.collision.rate >= 0.0, "[collision] rate must be non-negative"),
            (
                self.collision.lattice_points >= 16 && self.collision.lattice_spacing > 0.0,
                "[collision] needs lattice_points ≥ 16 and lattice_spacing > 0",
            ),
            (self.gas.collisions >= 1, "[gas] collisions must be ≥ 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => bail!("{msg}"),
            None => Ok(()),
        }
    }

    fn params_unchecked(&self) -> PhysicalParams {
        let ph = &self.physics;
        PhysicalParams {
            dust_mass: ph.dust_mass,
            molecule_mass: ph.molecule_mass,
            temperature: ph.temperature,
            eta: ph.eta.unwrap_or_default(),
            hbar: ph.hbar,
            k_b: ph.k_b,
            d_p: ph.d_p.unwrap_or_default(),
            d_x: ph.d_x.unwrap_or_default(),
        }
    }

    /// Physical parameters of a resolved config.
    pub fn params(&self) -> PhysicalParams {
        self.params_unchecked()
    }

    pub fn sigma(&self) -> f64 {
        self.state.sigma.unwrap_or(1.0)
    }
}

/// Deep merge of `user` into `base`. Objects carrying a `model` tag select an
/// enum variant and replace the default wholesale.
fn overlay(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (key, value) in u {
                match b.get_mut(&key) {
                    Some(slot) if !(value.is_object() && value.get("model").is_some()) => overlay(slot, value),
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
