//! JSON experiment configuration. Every field has a default, unknown keys are
//! rejected, and the resolved document is embedded in every report.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hysteresis::{DetectionConfig, Noise};
use crate::io::read_to_string;
use crate::pipeline::{EntanglementTaskConfig, MnistTaskConfig};
use crate::reservoir::Shots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Windowed,
    Lowpass,
    Frozen,
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LawKind::Windowed => "windowed",
            LawKind::Lowpass => "lowpass",
            LawKind::Frozen => "frozen",
        })
    }
}

impl FromStr for LawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windowed" => Ok(LawKind::Windowed),
            "lowpass" => Ok(LawKind::Lowpass),
            "frozen" => Ok(LawKind::Frozen),
            _ => Err(Error::Config(format!("unknown law '{s}' (windowed|lowpass|frozen)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisConfig {
    pub law: LawKind,
    /// Drive period for the windowed and frozen panels, seconds.
    pub t_osc: f64,
    pub periods: usize,
    /// Window lengths `T / T_osc`, one panel each.
    pub ratios: Vec<f64>,
    /// Low-pass cutoff, Hz.
    pub f_cut: f64,
    /// Drive frequencies for the low-pass panels, Hz.
    pub lowpass_f_osc: Vec<f64>,
    pub frozen_reflectivity: f64,
    pub detection: DetectionConfig,
    /// Pinching tolerance on `n_out` near `n_in = 0`.
    pub pinch_tol: f64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            law: LawKind::Windowed,
            t_osc: 10.0,
            periods: 3,
            ratios: vec![0.05, 0.2, 0.4, 0.6, 0.8, 1.0],
            f_cut: 4.62,
            lowpass_f_osc: vec![0.1, 1.0, 4.62, 10.0],
            frozen_reflectivity: 0.5,
            detection: DetectionConfig::default(),
            pinch_tol: 0.02,
        }
    }
}

impl HysteresisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_osc > 0.0) || self.periods == 0 {
            return Err(Error::Config("t_osc and periods must be positive".into()));
        }
        let panels = match self.law {
            LawKind::Windowed => &self.ratios,
            LawKind::Lowpass => &self.lowpass_f_osc,
            LawKind::Frozen => return Ok(()),
        };
        if panels.is_empty() || panels.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config(format!("{} panels need positive parameters", self.law)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurityMapConfig {
    pub points: usize,
}

impl Default for PurityMapConfig {
    fn default() -> Self {
        Self { points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub shots: Shots,
    pub seed: u64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            shots: Shots::Exact,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hysteresis: HysteresisConfig,
    pub purity_map: PurityMapConfig,
    pub tomography: TomographyConfig,
    pub mnist: MnistTaskConfig,
    pub entanglement: EntanglementTaskConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.hysteresis.validate()?;
        if self.purity_map.points < 2 {
            return Err(Error::Config("purity map needs at least 2 points per axis".into()));
        }
        self.mnist.reservoir.validate()?;
        self.entanglement.reservoir.validate()?;
        for t in [&self.mnist.readout, &self.entanglement.readout] {
            if t.batch == 0 || t.hidden == 0 {
                return Err(Error::Config("readout batch and hidden width must be positive".into()));
            }
        }
        Ok(())
    }

    /// Derives every seed in the document from one number.
    pub fn apply_seed(&mut self, seed: u64) {
        let s = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
        if let Noise::Poisson { seed: p } = &mut self.hysteresis.detection.noise {
            *p = s(1);
        }
        self.tomography.seed = s(2);
        self.mnist.data.seed = s(3);
        self.mnist.reservoir.mesh_seed = s(4);
        self.mnist.reservoir.shots_seed = s(5);
        self.mnist.readout.seed = s(6);
        self.entanglement.seed = s(7);
        self.entanglement.reservoir.mesh_seed = s(8);
        self.entanglement.reservoir.shots_seed = s(9);
        self.entanglement.readout.seed = s(10);
    }
}
