//! JSON run configuration and the preset registry.

use serde::{Deserialize, Serialize};

use schwinger_core::ansatz::{CircuitLayout, LayoutKind};
use schwinger_core::cvqe::Stage;
use schwinger_core::model::LatticeParams;
use schwinger_core::zne::InferenceMode;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ed,
    Cvqe,
    Dispersion,
    Massshift,
    Zne,
    Decompose,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeSection {
    pub n_sites: usize,
    pub x: f64,
    pub mass_lat: f64,
    pub bg_field: f64,
    #[serde(default)]
    pub penalty_strength: f64,
}

impl LatticeSection {
    pub fn to_params(&self) -> Result<LatticeParams, CliError> {
        LatticeParams::new(self.n_sites, self.x, self.mass_lat, self.bg_field, self.penalty_strength)
            .map_err(CliError::config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnsatzSection {
    pub kind: LayoutKind,
    pub n_layers: usize,
    pub n_ancilla: usize,
    #[serde(default)]
    pub translation_symmetric: bool,
}

impl AnsatzSection {
    pub fn to_layout(&self, n_physical: usize) -> Result<CircuitLayout, CliError> {
        CircuitLayout::new(
            self.kind,
            n_physical,
            self.n_ancilla,
            self.n_layers,
            self.translation_symmetric,
        )
        .map_err(CliError::config)
    }
}

fn default_seeds() -> usize {
    11
}

fn default_spread() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerSection {
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    pub stages: Vec<Stage>,
    #[serde(default = "default_spread")]
    pub init_spread: f64,
    #[serde(default = "default_noise")]
    pub warm_noise: f64,
    /// start the physical register in the staggered vacuum pattern
    #[serde(default = "default_true")]
    pub vacuum_start: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            stages: vec![Stage::plain(1000)],
            init_spread: default_spread(),
            warm_noise: default_noise(),
            vacuum_start: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSection {
    Gap,
    Efd { r: usize },
}

fn default_bracket() -> (f64, f64) {
    (-0.16, 0.0)
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassShiftSection {
    pub method: MethodSection,
    #[serde(default = "default_bracket")]
    pub bracket: (f64, f64),
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_levels() -> Vec<u64> {
    vec![1, 3, 5]
}

fn default_shots() -> u64 {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZneSection {
    #[serde(default = "crate::config::default_p1")]
    pub p1: f64,
    #[serde(default = "crate::config::default_p2")]
    pub p2: f64,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_levels")]
    pub levels: Vec<u64>,
    #[serde(default = "default_mode")]
    pub mode: InferenceMode,
}

pub fn default_p1() -> f64 {
    5e-4
}

pub fn default_p2() -> f64 {
    5e-3
}

fn default_mode() -> InferenceMode {
    InferenceMode::AncillaFree
}

impl Default for ZneSection {
    fn default() -> Self {
        Self {
            p1: default_p1(),
            p2: default_p2(),
            shots: default_shots(),
            levels: default_levels(),
            mode: default_mode(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecomposeTarget {
    So4 { entries: Vec<f64> },
    So8 { entries: Vec<f64>, max_layers: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    pub lattice: LatticeSection,
    #[serde(default)]
    pub ansatz: Option<AnsatzSection>,
    /// number of eigenstates for ed/dispersion/cvqe
    #[serde(default = "default_eigenstates")]
    pub eigenstates: usize,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub massshift: Option<MassShiftSection>,
    #[serde(default)]
    pub zne: Option<ZneSection>,
    #[serde(default)]
    pub decompose: Option<DecomposeTarget>,
    #[serde(default = "default_master_seed")]
    pub random_seed: u64,
}

fn default_eigenstates() -> usize {
    2
}

fn default_master_seed() -> u64 {
    1
}

pub const PRESETS: &[&str] = &["table2", "fig5", "fig6-desk", "fig10-desk", "zne-demo"];

/// Fully populated configurations for the documented parameter sets.
pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    match name {
        // N=4 hardware-demonstration parameters; the charge penalty is used
        // for optimization runs and leaves the zero-sector spectrum unchanged
        "table2" => Ok(RunConfig {
            command: None,
            lattice: LatticeSection {
                n_sites: 4,
                x: 0.16,
                mass_lat: 0.333,
                bg_field: 0.5,
                penalty_strength: 4.0,
            },
            ansatz: Some(AnsatzSection {
                kind: LayoutKind::BrickwallSo4,
                n_layers: 2,
                n_ancilla: 1,
                translation_symmetric: false,
            }),
            eigenstates: 2,
            optimizer: OptimizerSection {
                stages: vec![Stage::plain(1200)],
                ..OptimizerSection::default()
            },
            massshift: None,
            zne: Some(ZneSection { p2: 2e-3, ..ZneSection::default() }),
            decompose: None,
            random_seed: 1,
        }),
        "fig5" => Ok(RunConfig {
            command: None,
            lattice: LatticeSection {
                n_sites: 8,
                x: 0.64,
                mass_lat: 0.125,
                bg_field: 0.0,
                penalty_strength: 8.0,
            },
            ansatz: Some(AnsatzSection {
                kind: LayoutKind::BrickwallSo4,
                n_layers: 7,
                n_ancilla: 1,
                translation_symmetric: false,
            }),
            eigenstates: 2,
            optimizer: OptimizerSection {
                stages: vec![Stage::plain(2000)],
                ..OptimizerSection::default()
            },
            massshift: None,
            zne: None,
            decompose: None,
            random_seed: 1,
        }),
        "fig6-desk" => Ok(RunConfig {
            command: None,
            lattice: LatticeSection {
                n_sites: 8,
                x: 0.64,
                mass_lat: 0.125,
                bg_field: 0.0,
                penalty_strength: 0.0,
            },
            ansatz: None,
            eigenstates: 8,
            optimizer: OptimizerSection::default(),
            massshift: None,
            zne: None,
            decompose: None,
            random_seed: 1,
        }),
        "fig10-desk" => Ok(RunConfig {
            command: None,
            lattice: LatticeSection {
                n_sites: 12,
                x: 1.0,
                mass_lat: 0.0,
                bg_field: 0.0,
                penalty_strength: 0.0,
            },
            ansatz: None,
            eigenstates: 2,
            optimizer: OptimizerSection::default(),
            massshift: Some(MassShiftSection {
                method: MethodSection::Gap,
                bracket: default_bracket(),
                tolerance: default_tolerance(),
            }),
            zne: None,
            decompose: None,
            random_seed: 1,
        }),
        "zne-demo" => {
            let mut cfg = preset("table2")?;
            cfg.command = Some(Command::Zne);
            Ok(cfg)
        }
        other => Err(CliError::Config(format!(
            "unknown preset '{other}'; available presets: {}",
            PRESETS.join(", ")
        ))),
    }
}
