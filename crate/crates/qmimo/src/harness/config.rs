//! Experiment configuration: TOML-backed `ExperimentSpec` and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::GampOptions;
use crate::model::{Constellation, SystemConfig};
use crate::quantizer::{make_quantizer, QuantizerSpec};
use crate::replica::ReplicaMode;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Estimators the Monte-Carlo runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Jcd,
    PilotOnly,
    KnownCsi,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Jcd => "jcd",
            Estimator::PilotOnly => "pilot-only",
            Estimator::KnownCsi => "known-csi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    SnrDb,
    Alpha,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

/// System dimensions and priors; the noise variance is taken from the sweep
/// for snr-db sweeps and from `noise_var` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub k: usize,
    pub n: usize,
    pub t1: usize,
    pub t2: usize,
    #[serde(default = "one")]
    pub channel_var: f64,
    #[serde(default = "one")]
    pub pilot_power: f64,
    #[serde(default = "one")]
    pub data_power: f64,
    #[serde(default = "qpsk")]
    pub pilot_constellation: Constellation,
    #[serde(default = "qpsk")]
    pub data_constellation: Constellation,
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
}

fn one() -> f64 {
    1.0
}
fn qpsk() -> Constellation {
    Constellation::Qpsk
}
fn default_noise_var() -> f64 {
    0.1
}

/// One quantizer per curve: either a finite-bit ADC or the unquantized
/// reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantizerCfg {
    Finite { bits: u32, step: f64 },
    Unquantized { unquantized: bool },
}

impl QuantizerCfg {
    pub fn to_spec(&self) -> Result<QuantizerSpec, HarnessError> {
        match *self {
            QuantizerCfg::Finite { bits, step } => make_quantizer(bits, step)
                .map_err(|e| HarnessError::Config(format!("quantizer: {e}"))),
            QuantizerCfg::Unquantized { unquantized: true } => Ok(QuantizerSpec::Unquantized),
            QuantizerCfg::Unquantized { unquantized: false } => Err(HarnessError::Config(
                "quantizer entry must set bits/step or unquantized = true".into(),
            )),
        }
    }

    /// Curve label used in the CSV `bits` column.
    pub fn bits_label(&self) -> String {
        match *self {
            QuantizerCfg::Finite { bits, .. } => bits.to_string(),
            QuantizerCfg::Unquantized { .. } => "inf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: SystemSpec,
    #[serde(default)]
    pub estimators: Vec<Estimator>,
    pub sweep: SweepSpec,
    pub quantizers: Vec<QuantizerCfg>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Attach replica predictions to simulation rows and drive `replica`
    /// sweeps.
    #[serde(default)]
    pub replica: bool,
    #[serde(default = "default_replica_modes")]
    pub replica_modes: Vec<ReplicaMode>,
    #[serde(default)]
    pub gamp: GampOptions,
}

fn default_trials() -> usize {
    1
}
fn default_replica_modes() -> Vec<ReplicaMode> {
    vec![ReplicaMode::Jcd]
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.sweep.grid.is_empty() {
            return bad("sweep.grid must be nonempty".into());
        }
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.quantizers.is_empty() {
            return bad("at least one quantizer entry is required".into());
        }
        for q in &self.quantizers {
            q.to_spec()?;
        }
        if self.sweep.variable == SweepVariable::Alpha && !self.estimators.is_empty() {
            return bad("alpha sweeps are replica-only; estimators must be empty".into());
        }
        if self.estimators.contains(&Estimator::PilotOnly) && self.system.t1 < self.system.k {
            return bad("pilot-only requires t1 >= k for the LS estimate".into());
        }
        // validate one representative system instance per quantizer
        for q in &self.quantizers {
            self.system_config(self.sweep.grid[0], q)?
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Full per-point system config. For snr-db sweeps the sweep value sets
    /// noise_var = 10^(-snr/10).
    pub fn system_config(
        &self,
        sweep_value: f64,
        quantizer: &QuantizerCfg,
    ) -> Result<SystemConfig, HarnessError> {
        let s = &self.system;
        let noise_var = match self.sweep.variable {
            SweepVariable::SnrDb => 10f64.powf(-sweep_value / 10.0),
            SweepVariable::Alpha => s.noise_var,
        };
        Ok(SystemConfig {
            k: s.k,
            n: s.n,
            t1: s.t1,
            t2: s.t2,
            noise_var,
            channel_var: s.channel_var,
            pilot_power: s.pilot_power,
            data_power: s.data_power,
            pilot_constellation: s.pilot_constellation,
            data_constellation: s.data_constellation,
            quantizer: quantizer.to_spec()?,
        })
    }

    /// FNV-1a hash of the canonical TOML serialization, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        let text = toml::to_string(self).expect("spec serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in text.bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
