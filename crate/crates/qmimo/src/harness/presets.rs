//! Built-in experiment presets matching the shipped reference curves.
//!
//! Grids: the BER presets sweep -2..16 dB in 1 dB steps; the rate preset
//! sweeps alpha = 1..40 in unit steps. Step size of every finite-bit ADC is
//! 0.5 per real dimension.

use super::config::{
    Estimator, ExperimentSpec, HarnessError, QuantizerCfg, SweepSpec, SweepVariable, SystemSpec,
};
use crate::estimators::GampOptions;
use crate::model::Constellation;
use crate::replica::ReplicaMode;

fn standard_quantizers() -> Vec<QuantizerCfg> {
    vec![
        QuantizerCfg::Finite { bits: 1, step: 0.5 },
        QuantizerCfg::Finite { bits: 2, step: 0.5 },
        QuantizerCfg::Finite { bits: 3, step: 0.5 },
        QuantizerCfg::Unquantized { unquantized: true },
    ]
}

fn snr_grid() -> Vec<f64> {
    (-2..=16).map(f64::from).collect()
}

fn standard_system() -> SystemSpec {
    SystemSpec {
        k: 50,
        n: 200,
        t1: 50,
        t2: 450,
        channel_var: 1.0,
        pilot_power: 1.0,
        data_power: 1.0,
        pilot_constellation: Constellation::Qpsk,
        data_constellation: Constellation::Qpsk,
        noise_var: 0.1,
    }
}

/// Named experiment presets: `fig2` (JCD vs genie CSI BER sweep), `fig3`
/// (JCD vs pilot-only BER sweep), `fig4` (replica-only rate vs alpha).
pub fn preset(name: &str) -> Result<ExperimentSpec, HarnessError> {
    match name {
        "fig2" => Ok(ExperimentSpec {
            name: "fig2".into(),
            system: standard_system(),
            estimators: vec![Estimator::Jcd, Estimator::KnownCsi],
            sweep: SweepSpec {
                variable: SweepVariable::SnrDb,
                grid: snr_grid(),
            },
            quantizers: standard_quantizers(),
            trials: 10_000,
            master_seed: 1,
            replica: true,
            replica_modes: vec![ReplicaMode::Jcd, ReplicaMode::PerfectCsi],
            gamp: GampOptions::default(),
        }),
        "fig3" => Ok(ExperimentSpec {
            name: "fig3".into(),
            system: standard_system(),
            estimators: vec![Estimator::Jcd, Estimator::PilotOnly],
            sweep: SweepSpec {
                variable: SweepVariable::SnrDb,
                grid: snr_grid(),
            },
            quantizers: standard_quantizers(),
            trials: 10_000,
            master_seed: 1,
            replica: true,
            replica_modes: vec![ReplicaMode::Jcd],
            gamp: GampOptions::default(),
        }),
        "fig4" => Ok(ExperimentSpec {
            name: "fig4".into(),
            system: SystemSpec {
                data_constellation: Constellation::CircularGaussian,
                ..standard_system()
            },
            estimators: vec![],
            sweep: SweepSpec {
                variable: SweepVariable::Alpha,
                grid: (1..=40).map(f64::from).collect(),
            },
            quantizers: standard_quantizers(),
            trials: 1,
            master_seed: 1,
            replica: true,
            replica_modes: vec![ReplicaMode::Jcd],
            gamp: GampOptions::default(),
        }),
        other => Err(HarnessError::Config(format!("unknown preset '{other}'"))),
    }
}
