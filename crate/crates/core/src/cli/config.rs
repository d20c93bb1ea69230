//! TOML run configuration shared by `lg-sweep` and `dichotomic`.
//!
//! ```toml
//! seed = 42                         # required
//! shots_per_arm = 1000              # per arm and wait time
//! wait_grid_us = [5.0, 25.0, 50.0]  # strictly increasing, >= 0
//! resamples = 10000                 # bootstrap and Monte Carlo resamples
//!
//! [coherence]
//! shape = "exponential"             # or "gaussian"
//! tau_us = 130.0
//!
//! [imperfections]                   # optional
//! prep_error = 0.01
//! readout_error = 0.01
//! t1_us = inf
//!
//! [pulses]                          # optional
//! pulse_phi = 0.0                   # second-pulse phase
//! phase_offset = 0.0                # uncalibrated phase error
//! calibrate = false                 # replace pulse_phi by the calibrated phase
//!
//! [theory_band]                     # optional
//! tau_low_us = 75.0
//! tau_high_us = 200.0
//! ```

use serde::{Deserialize, Serialize};

use crate::experiment::{ImperfectionModel, DEFAULT_SHOTS_PER_ARM};
use crate::qubit::CoherenceModel;

use super::CliError;

fn default_shots() -> u64 {
    DEFAULT_SHOTS_PER_ARM
}

fn default_resamples() -> usize {
    crate::estimators::DEFAULT_RESAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_shots")]
    pub shots_per_arm: u64,
    pub wait_grid_us: Vec<f64>,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    pub coherence: CoherenceModel,
    #[serde(default)]
    pub imperfections: ImperfectionSection,
    #[serde(default)]
    pub pulses: PulseSection,
    #[serde(default)]
    pub theory_band: BandSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionSection {
    pub prep_error: f64,
    pub readout_error: f64,
    pub t1_us: f64,
}

impl Default for ImperfectionSection {
    fn default() -> Self {
        let d = ImperfectionModel::default();
        Self {
            prep_error: d.prep_error,
            readout_error: d.readout_error,
            t1_us: d.t1_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub pulse_phi: f64,
    pub phase_offset: f64,
    pub calibrate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandSection {
    pub tau_low_us: f64,
    pub tau_high_us: f64,
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            tau_low_us: 75.0,
            tau_high_us: 200.0,
        }
    }
}

fn bad(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config key `{key}`: {reason}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.shots_per_arm == 0 {
            return Err(bad("shots_per_arm", "must be >= 1"));
        }
        if self.wait_grid_us.is_empty() {
            return Err(bad("wait_grid_us", "must not be empty"));
        }
        if self.wait_grid_us.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(bad("wait_grid_us", "entries must be >= 0"));
        }
        if self.wait_grid_us.windows(2).any(|p| p[1] <= p[0]) {
            return Err(bad("wait_grid_us", "must be strictly increasing"));
        }
        if self.resamples < crate::estimators::MIN_RESAMPLES {
            return Err(bad(
                "resamples",
                format!("must be >= {}", crate::estimators::MIN_RESAMPLES),
            ));
        }
        if !(self.coherence.tau_us > 0.0) {
            return Err(bad("coherence.tau_us", "must be > 0"));
        }
        let imp = &self.imperfections;
        if !(0.0..0.5).contains(&imp.prep_error) {
            return Err(bad("imperfections.prep_error", "must lie in [0, 0.5)"));
        }
        if !(0.0..0.5).contains(&imp.readout_error) {
            return Err(bad("imperfections.readout_error", "must lie in [0, 0.5)"));
        }
        if !(imp.t1_us > 0.0) {
            return Err(bad("imperfections.t1_us", "must be > 0"));
        }
        if !self.pulses.pulse_phi.is_finite() {
            return Err(bad("pulses.pulse_phi", "must be finite"));
        }
        if !self.pulses.phase_offset.is_finite() {
            return Err(bad("pulses.phase_offset", "must be finite"));
        }
        let band = &self.theory_band;
        if !(band.tau_low_us > 0.0
            && band.tau_low_us < band.tau_high_us
            && band.tau_high_us.is_finite())
        {
            return Err(bad(
                "theory_band",
                "need 0 < tau_low_us < tau_high_us < inf",
            ));
        }
        Ok(())
    }

    pub fn imperfection_model(&self) -> ImperfectionModel {
        ImperfectionModel {
            prep_error: self.imperfections.prep_error,
            readout_error: self.imperfections.readout_error,
            t1_us: self.imperfections.t1_us,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::DecayShape;

    const MINIMAL: &str = r#"
seed = 7
wait_grid_us = [5.0, 50.0]
[coherence]
tau_us = 130.0
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.shots_per_arm, DEFAULT_SHOTS_PER_ARM);
        assert_eq!(cfg.imperfections.prep_error, 0.01);
        assert!(cfg.imperfections.t1_us.is_infinite());
        assert_eq!(cfg.coherence.shape, DecayShape::Exponential);
        assert_eq!(cfg.theory_band.tau_low_us, 75.0);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    fn error_of(text: &str) -> String {
        match RunConfig::parse(text) {
            Err(CliError::Config(msg)) => msg,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_key() {
        assert!(error_of("wait_grid_us = [1.0]\n[coherence]\ntau_us = 1.0\n").contains("seed"));
        assert!(
            error_of(&format!("{MINIMAL}\n[imperfections]\nreadout_eror = 0.1\n"))
                .contains("readout_eror")
        );
        assert!(error_of(&format!(
            "{MINIMAL}\n[imperfections]\nreadout_error = 0.7\n"
        ))
        .contains("imperfections.readout_error"));
        assert!(error_of(&MINIMAL.replace("[5.0, 50.0]", "[50.0, 5.0]")).contains("wait_grid_us"));
        assert!(error_of(&MINIMAL.replace("130.0", "-1.0")).contains("coherence.tau_us"));
        assert!(error_of(&format!("extra = 1\n{MINIMAL}")).contains("extra"));
    }
}
