//! Scenario configuration: a TOML file layered over a preset.

use rigscat::linalg::{c, CMat, CVec};
use rigscat::model::{ModelConfig, Perturbation, Weight};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Friedrichs,
    Lattice,
    Chain,
    Timecheck,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Quadrature,
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Constant,
    Bump,
    Decay,
}

/// Shape of the coupling matrix `J` in auxiliary coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `v·1`
    Identity,
    /// `v` on the first auxiliary coordinate only.
    First,
    /// `v·uuᵀ` with `u_j = ratio^j`.
    Geometric,
    /// `v·diag(diagonal)`
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Energy interval of the quadrature model (energy units).
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub nodes: usize,
    /// Lattice sites `-radius..=radius`.
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiggingSection {
    pub weight: WeightKind,
    pub weight_param: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub shape: Shape,
    /// Coupling strength (energy units).
    pub coupling: f64,
    #[serde(default)]
    pub ratio: f64,
    #[serde(default)]
    pub diagonal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Extra energies merged into the grid (e.g. a suspected resonance).
    #[serde(default)]
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheafSection {
    pub lambda: f64,
    /// Windows as `[lo, hi]` pairs; consecutive pairs are glued.
    pub windows: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    /// Coupling added on top of the base perturbation for the third
    /// operator of the chain, same shape.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimecheckSection {
    /// Packet energies (energy units).
    pub energies: Vec<f64>,
    /// Packet width and starting center (lattice sites).
    pub width: f64,
    pub center: f64,
    /// Propagation box half-width (lattice sites).
    pub radius: usize,
    /// Propagation time (inverse energy units).
    pub t_max: f64,
    pub samples: usize,
    /// Compare the time-domain and stationary wave operators.
    pub overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub preset: Preset,
    pub seed: u64,
    pub model: ModelSection,
    pub rigging: RiggingSection,
    pub perturbation: PerturbationSection,
    pub grid: GridSection,
    pub sheaf: Option<SheafSection>,
    pub chain: Option<ChainSection>,
    pub timecheck: Option<TimecheckSection>,
}

fn friedrichs() -> Config {
    Config {
        preset: Preset::Friedrichs,
        seed: 1,
        model: ModelSection {
            kind: ModelKind::Quadrature,
            interval_lo: 0.0,
            interval_hi: 1.0,
            nodes: 64,
            radius: 0,
        },
        rigging: RiggingSection {
            weight: WeightKind::Constant,
            weight_param: 1.0,
            rank: 1,
        },
        perturbation: PerturbationSection {
            shape: Shape::Identity,
            coupling: 0.3,
            ratio: 0.0,
            diagonal: Vec::new(),
        },
        grid: GridSection {
            lambda_min: 0.05,
            lambda_max: 0.95,
            points: 25,
            extra: Vec::new(),
        },
        sheaf: Some(SheafSection {
            lambda: 0.5,
            windows: vec![[0.2, 0.6], [0.4, 0.8], [0.3, 0.7]],
        }),
        chain: None,
        timecheck: None,
    }
}

fn lattice() -> Config {
    Config {
        preset: Preset::Lattice,
        model: ModelSection {
            kind: ModelKind::Lattice,
            interval_lo: -2.0,
            interval_hi: 2.0,
            nodes: 0,
            radius: 80,
        },
        rigging: RiggingSection {
            weight: WeightKind::Decay,
            weight_param: 1.0,
            rank: 2,
        },
        perturbation: PerturbationSection {
            shape: Shape::First,
            coupling: 0.5,
            ratio: 0.0,
            diagonal: Vec::new(),
        },
        grid: GridSection {
            lambda_min: -1.7,
            lambda_max: 1.7,
            points: 25,
            extra: Vec::new(),
        },
        ..friedrichs()
    }
}

pub fn preset(p: Preset) -> Option<Config> {
    match p {
        Preset::Friedrichs => Some(friedrichs()),
        Preset::Lattice => Some(lattice()),
        Preset::Chain => Some(Config {
            preset: Preset::Chain,
            chain: Some(ChainSection { step: 0.4 }),
            ..friedrichs()
        }),
        Preset::Timecheck => Some(Config {
            preset: Preset::Timecheck,
            timecheck: Some(TimecheckSection {
                energies: vec![-1.0, 0.0, 1.0],
                width: 10.0,
                center: -80.0,
                radius: 2000,
                t_max: 400.0,
                samples: 20,
                overlap: true,
            }),
            ..lattice()
        }),
        Preset::Custom => None,
    }
}

/// Merge `over` into `base`, table by table.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Parse a scenario file. A `preset` key selects the defaults the file
/// overrides; `custom` (or no preset) requires every field.
pub fn parse(text: &str) -> Result<Config, CliError> {
    let user: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let name = match user.get("preset") {
        None => Preset::Custom,
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?,
    };
    let mut merged = match preset(name) {
        Some(p) => toml::Value::try_from(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => toml::Value::Table(Default::default()),
    };
    merge(&mut merged, user);
    if let toml::Value::Table(t) = &mut merged {
        t.insert("preset".into(), toml::Value::try_from(name).expect("preset serializes"));
    }
    let cfg: Config = merged.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl Config {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid.points < 2 && self.grid.extra.is_empty() {
            return bad("grid needs at least two points".into());
        }
        if !(self.grid.lambda_min < self.grid.lambda_max) {
            return bad("grid.lambda_min must be below grid.lambda_max".into());
        }
        if self.rigging.rank == 0 {
            return bad("rigging.rank must be positive".into());
        }
        if self.perturbation.shape == Shape::Diagonal && self.perturbation.diagonal.len() != self.rigging.rank {
            return bad(format!(
                "perturbation.diagonal has {} entries, rank is {}",
                self.perturbation.diagonal.len(),
                self.rigging.rank
            ));
        }
        if let Some(s) = &self.sheaf {
            if s.windows.len() < 2 {
                return bad("sheaf needs at least two windows".into());
            }
        }
        if self.timecheck.is_some() && self.model.kind != ModelKind::Lattice {
            return bad("timecheck requires the lattice model".into());
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        match self.model.kind {
            ModelKind::Quadrature => {
                ModelConfig::quadrature(self.model.interval_lo, self.model.interval_hi, self.model.nodes)
            }
            ModelKind::Lattice => ModelConfig::lattice(self.model.radius),
        }
    }

    pub fn weight(&self) -> Weight {
        let p = self.rigging.weight_param;
        match self.rigging.weight {
            WeightKind::Constant => Weight::Constant(p),
            WeightKind::Bump => Weight::Bump(p),
            WeightKind::Decay => Weight::Decay(p),
        }
    }

    /// `J` at coupling `v`, in the configured shape.
    pub fn coupling_matrix(&self, v: f64) -> Result<Perturbation, CliError> {
        let m = self.rigging.rank;
        let p = &self.perturbation;
        let mat = match p.shape {
            Shape::Identity => CMat::identity(m, m) * c(v, 0.0),
            Shape::First => CMat::from_fn(m, m, |i, j| if i == 0 && j == 0 { c(v, 0.0) } else { c(0.0, 0.0) }),
            Shape::Geometric => {
                let u = CVec::from_fn(m, |i, _| c(p.ratio.powi(i as i32), 0.0));
                &u * u.adjoint() * c(v, 0.0)
            }
            Shape::Diagonal => {
                CMat::from_fn(m, m, |i, j| if i == j { c(v * p.diagonal[i], 0.0) } else { c(0.0, 0.0) })
            }
        };
        Ok(Perturbation::new(mat)?)
    }

    pub fn grid(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.points;
        let mut out: Vec<f64> = match n {
            0 => Vec::new(),
            1 => vec![g.lambda_min],
            _ => (0..n)
                .map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    g.lambda_min * (1.0 - t) + g.lambda_max * t
                })
                .collect(),
        };
        out.extend(g.extra.iter().copied());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}
