//! Run configuration, read from TOML. Every key has a default, so an empty
//! file is a valid configuration. See `configs/default.toml` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dmdc::LiftForm;
use crate::error::{Error, Result};
use crate::hull::Plane;
use crate::mc::ControlScheme;
use crate::mlp::TrainConfig;
use crate::quadrotor::{initial_box, ControlModel, QuadParams, Scenario, STATE_NAMES};
use crate::reach::NormalScheme;
use crate::sets::BoxSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub scenario: Scenario,
    pub quad: QuadParams,
    pub initial_set: InitialSetConfig,
    pub control: ControlConfig,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub dmdc: DmdcConfig,
    pub reach: ReachConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            scenario: Scenario::Nominal,
            quad: QuadParams::default(),
            initial_set: InitialSetConfig::default(),
            control: ControlConfig::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            dmdc: DmdcConfig::default(),
            reach: ReachConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

/// Half-widths of the initial box, centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSetConfig {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub rate: f64,
}

impl Default for InitialSetConfig {
    fn default() -> Self {
        Self {
            position: 0.5,
            velocity: 1e-3,
            attitude: 0.1,
            rate: 1e-3,
        }
    }
}

/// Nominal rotor sinusoid and actuator noise. `amplitude` and `frequency`
/// are per rotor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub amplitude: [f64; 4],
    pub frequency: [f64; 4],
    pub noise: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            amplitude: [0.5; 4],
            frequency: [0.2; 4],
            noise: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub trajectories: usize,
    pub steps: usize,
    pub dt: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            trajectories: 100,
            steps: 50,
            dt: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    /// One window from the centroid of the contact front.
    Centroid,
    /// One window from the centroid plus one from every contact point.
    #[default]
    Contacts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmdcConfig {
    pub width: usize,
    pub svd_tol: f64,
    pub form: LiftForm,
    pub anchors: AnchorMode,
    /// Independent excitation windows per anchor.
    pub excitations: usize,
    /// Wider windows tried in order when a lift is ill-conditioned.
    pub retry_widths: Vec<usize>,
}

impl Default for DmdcConfig {
    fn default() -> Self {
        Self {
            width: 8,
            svd_tol: 1e-10,
            form: LiftForm::Affine,
            anchors: AnchorMode::Contacts,
            excitations: 16,
            retry_widths: vec![16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReachConfig {
    pub horizon: usize,
    pub normals: NormalScheme,
    /// Projection planes as pairs of state names (`x`, `vy`, `phi`, ...).
    pub planes: Vec<[String; 2]>,
    pub parallel: bool,
}

impl Default for ReachConfig {
    fn default() -> Self {
        let pair = |a: &str, b: &str| [a.to_string(), b.to_string()];
        Self {
            horizon: 50,
            normals: NormalScheme::AxisAligned,
            planes: vec![pair("x", "y"), pair("x", "z"), pair("y", "z"), pair("phi", "theta")],
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub samples: usize,
    pub scheme: ControlScheme,
    /// Per-axis slack as a fraction of the cloud range.
    pub slack: f64,
    /// Largest tolerated per-step violation fraction for the learned model.
    pub threshold: f64,
    /// Also run the cloud through the simulator (reported, not gated).
    pub truth: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            scheme: ControlScheme::Mixed,
            slack: 0.02,
            threshold: 0.02,
            truth: true,
        }
    }
}

fn state_index(name: &str) -> Result<usize> {
    STATE_NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown state name '{name}' in projection plane")))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        self.control_model(Scenario::Nominal).validate()?;
        self.train.validate()?;
        let d = &self.dataset;
        if d.trajectories == 0 {
            return Err(Error::Config("dataset.trajectories must be at least 1".into()));
        }
        if d.steps < 2 {
            return Err(Error::Config("dataset.steps must be at least 2".into()));
        }
        if !(d.dt.is_finite() && d.dt > 0.0) {
            return Err(Error::Config("dataset.dt must be positive".into()));
        }
        let s = &self.initial_set;
        if [s.position, s.velocity, s.attitude, s.rate].iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::Config("initial_set half-widths must be positive".into()));
        }
        if self.dmdc.width == 0 || self.dmdc.retry_widths.contains(&0) {
            return Err(Error::Config("dmdc widths must be at least 1".into()));
        }
        if self.dmdc.excitations == 0 {
            return Err(Error::Config("dmdc.excitations must be at least 1".into()));
        }
        if !(self.dmdc.svd_tol >= 0.0 && self.dmdc.svd_tol < 1.0) {
            return Err(Error::Config("dmdc.svd_tol must lie in [0, 1)".into()));
        }
        if self.reach.horizon == 0 {
            return Err(Error::Config("reach.horizon must be at least 1".into()));
        }
        self.planes()?;
        let v = &self.validate;
        if v.samples == 0 || !(v.slack >= 0.0) || !(0.0..=1.0).contains(&v.threshold) {
            return Err(Error::Config("validate needs samples >= 1, slack >= 0 and threshold in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn planes(&self) -> Result<Vec<(String, Plane)>> {
        self.reach
            .planes
            .iter()
            .map(|[a, b]| Ok((format!("{a}-{b}"), Plane::new(state_index(a)?, state_index(b)?))))
            .collect()
    }

    pub fn initial_box(&self) -> BoxSet {
        let s = &self.initial_set;
        initial_box(s.position, s.velocity, s.attitude, s.rate)
    }

    pub fn control_model(&self, scenario: Scenario) -> ControlModel {
        ControlModel {
            hover: self.quad.hover_speed(),
            amplitude: self.control.amplitude,
            frequency: self.control.frequency,
            noise: self.control.noise,
            scenario,
        }
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_config_parses_to_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(RunConfig::from_toml(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_and_validation() {
        let cfg = RunConfig::from_toml("seed = 4\nscenario = \"rotor_failure\"\n[dataset]\ntrajectories = 3\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.scenario, Scenario::RotorFailure);
        assert_eq!(cfg.dataset.trajectories, 3);
        assert_eq!(cfg.train_config().seed, 4);

        let bad = RunConfig::from_toml("[dataset]\ntrajectories = 0\n").unwrap_err();
        assert_eq!(bad.exit_code(), 2);
        assert!(RunConfig::from_toml("[quad]\nkf = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[reach]\nplanes = [[\"x\", \"w\"]]\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn plane_names() {
        let planes = RunConfig::default().planes().unwrap();
        assert_eq!(planes[0], ("x-y".to_string(), Plane::new(0, 1)));
        assert_eq!(planes[3], ("phi-theta".to_string(), Plane::new(6, 7)));
    }
}
