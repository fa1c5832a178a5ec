//! Scenario and vessel configuration files (TOML).
//!
//! A scenario file looks like:
//!
//! ```toml
//! seed = 7
//! dt = 0.01            # s
//! duration = 300.0     # s, upper bound for missions
//! control_every = 1    # controller period in integration steps
//! initial = [0.0, 0.0, 0.0]   # x (m), y (m), psi (deg)
//! vessel_file = "vessel.toml" # optional, relative to this file
//!
//! [gains]
//! filter_omega = [0.6, 0.6, 0.9]
//! filter_delta = [1.0, 1.0, 1.0]
//! pose_kp = [40.0, 40.0, 15.0]
//! pose_kd = [60.0, 60.0, 20.0]
//! velocity_kp = [1.5, 1.5, 1.5]
//! velocity_ki = [0.3, 0.3, 0.3]
//! # velocity_xi_max = [...]   # default: Ki * xi_max * M = 50 % of capacity
//! model_scale = 1.0            # M, D multiplier seen by the velocity controller
//!
//! [[modes]]
//! t = 0.0
//! mode = "pose"                # pose | velocity | external
//! # velocity = [u, v, r]       # velocity mode setpoint; default follows the reference filter
//! # tau = [X, Y, N]            # external mode load
//!
//! [mission]
//! kind = "four-corner"         # or "setpoints" with setpoints = [[x, y, psi_deg], ...]
//! box = 1.0
//! yaw_deg = 45.0
//!
//! [sea_state]                  # optional
//! hs = 0.05
//! tp = 1.5
//! gamma = 3.3
//! load_gain = [2.0, 2.0, 0.2]
//!
//! [sensing]                    # optional; absent means ground-truth feedback
//! sigma_position = 0.0033
//! sigma_heading = 0.002967
//! rate_hz = 100.0
//! dropout = 0.0
//! velocity_time_constant = 0.2
//! # replay = "measurements.csv"
//!
//! [metrics]
//! reference = "filter"         # or "setpoint"
//!
//! [output]                     # paths relative to the working directory
//! trajectory = "trajectory.csv"
//! metrics = "metrics.json"
//! # elevation = "elevation.csv"
//! # measurements = "measurements.csv"
//! ```
//!
//! Vessel keys (inline `[vessel]` or a separate file): `length`, `beam`,
//! `draft`, `density`, and optionally `added_mass`, `damping`, `gm_t`,
//! `gm_l`, `current` (6-vectors in surge, sway, heave, roll, pitch, yaw
//! order) and `[[thrusters]]` entries with `type = "azimuth"` or
//! `type = "fixed"` plus `angle`, and `lx`, `ly`, `max_force`, `max_rate`.
//! Omitted keys take the uniform-prism defaults.

use crate::allocation::{Thruster, ThrusterLayout};
use crate::dynamics::{default_damping, prism_gm_l, prism_gm_t, VesselParams, DEFAULT_ADDED_MASS};
use crate::gnc::ControlMode;
use crate::harness::HarnessError;
use crate::seastate::SpectrumParams;
use crate::sensing::{MoCapModel, DEFAULT_VELOCITY_TIME_CONSTANT};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn config_error(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse TOML, reporting the failing field path.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T, HarnessError> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| config_error("", e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselConfig {
    pub length: f64,
    pub beam: f64,
    pub draft: f64,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default)]
    pub added_mass: Option<[f64; 6]>,
    #[serde(default)]
    pub damping: Option<[f64; 6]>,
    #[serde(default)]
    pub gm_t: Option<f64>,
    #[serde(default)]
    pub gm_l: Option<f64>,
    #[serde(default)]
    pub current: Option<[f64; 6]>,
    #[serde(default)]
    pub thrusters: Option<Vec<Thruster>>,
}

fn default_density() -> f64 {
    1000.0
}

impl Default for VesselConfig {
    /// 1 m x 0.3 m x 0.05 m box in fresh water (15 kg).
    fn default() -> Self {
        Self {
            length: 1.0,
            beam: 0.3,
            draft: 0.05,
            density: default_density(),
            added_mass: None,
            damping: None,
            gm_t: None,
            gm_l: None,
            current: None,
            thrusters: None,
        }
    }
}

impl VesselConfig {
    pub fn params(&self) -> VesselParams {
        let mut p = VesselParams {
            length: self.length,
            beam: self.beam,
            draft: self.draft,
            density: self.density,
            added_mass: self.added_mass.unwrap_or(DEFAULT_ADDED_MASS),
            damping: [0.0; 6],
            gm_t: self.gm_t.unwrap_or_else(|| prism_gm_t(self.beam, self.draft)),
            gm_l: self.gm_l.unwrap_or_else(|| prism_gm_l(self.length, self.draft)),
            current: self.current.unwrap_or([0.0; 6]),
        };
        p.damping = self.damping.unwrap_or_else(|| default_damping(&p));
        p
    }

    pub fn layout(&self) -> ThrusterLayout {
        self.thrusters
            .clone()
            .map(|thrusters| ThrusterLayout { thrusters })
            .unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("vessel_file", format!("{}: {e}", path.display())))?;
        parse_toml(&text).map_err(|e| match e {
            HarnessError::Config { path, message } => config_error(format!("vessel.{path}"), message),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub filter_omega: [f64; 3],
    pub filter_delta: [f64; 3],
    pub pose_kp: [f64; 3],
    pub pose_kd: [f64; 3],
    pub velocity_kp: [f64; 3],
    pub velocity_ki: [f64; 3],
    pub velocity_xi_max: Option<[f64; 3]>,
    pub model_scale: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            filter_omega: [0.6, 0.6, 0.9],
            filter_delta: [1.0, 1.0, 1.0],
            pose_kp: [40.0, 40.0, 15.0],
            pose_kd: [60.0, 60.0, 20.0],
            velocity_kp: [1.5, 1.5, 1.5],
            velocity_ki: [0.3, 0.3, 0.3],
            velocity_xi_max: None,
            model_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSwitch {
    pub t: f64,
    pub mode: ControlMode,
    #[serde(default)]
    pub velocity: Option<[f64; 3]>,
    #[serde(default)]
    pub tau: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissionKind {
    FourCorner,
    Setpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub kind: MissionKind,
    #[serde(default = "default_box", rename = "box")]
    pub box_size: f64,
    #[serde(default = "default_yaw_deg")]
    pub yaw_deg: f64,
    /// `[x, y, psi_deg]` list for `kind = "setpoints"`.
    #[serde(default)]
    pub setpoints: Vec<[f64; 3]>,
    #[serde(default = "default_position_tolerance")]
    pub position_tolerance: f64,
    #[serde(default = "default_heading_tolerance_deg")]
    pub heading_tolerance_deg: f64,
    #[serde(default = "default_speed_tolerance")]
    pub speed_tolerance: f64,
    #[serde(default = "default_hold_time")]
    pub hold_time: f64,
}

fn default_box() -> f64 {
    1.0
}
fn default_yaw_deg() -> f64 {
    45.0
}
fn default_position_tolerance() -> f64 {
    0.02
}
fn default_heading_tolerance_deg() -> f64 {
    1.0
}
fn default_speed_tolerance() -> f64 {
    0.01
}
fn default_hold_time() -> f64 {
    2.0
}

impl MissionConfig {
    pub fn four_corner(box_size: f64, yaw_deg: f64) -> Self {
        Self {
            kind: MissionKind::FourCorner,
            box_size,
            yaw_deg,
            setpoints: Vec::new(),
            position_tolerance: default_position_tolerance(),
            heading_tolerance_deg: default_heading_tolerance_deg(),
            speed_tolerance: default_speed_tolerance(),
            hold_time: default_hold_time(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaStateConfig {
    pub hs: f64,
    pub tp: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub omega_min: Option<f64>,
    #[serde(default)]
    pub omega_max: Option<f64>,
    #[serde(default = "default_components")]
    pub components: usize,
    /// Surge, sway, yaw gains on the surface-slope proxy.
    #[serde(default)]
    pub load_gain: [f64; 3],
}

fn default_gamma() -> f64 {
    3.3
}

fn default_components() -> usize {
    200
}

impl SeaStateConfig {
    pub fn spectrum(&self) -> SpectrumParams {
        SpectrumParams {
            hs: self.hs,
            tp: self.tp,
            gamma: self.gamma,
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            components: self.components,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingConfig {
    pub sigma_position: f64,
    /// Heading noise standard deviation (rad).
    pub sigma_heading: f64,
    pub rate_hz: f64,
    pub dropout: f64,
    /// Defaults to the scenario seed.
    pub seed: Option<u64>,
    pub velocity_time_constant: f64,
    /// Measurement log to replay instead of simulating the tracker.
    pub replay: Option<PathBuf>,
}

impl Default for SensingConfig {
    fn default() -> Self {
        let m = MoCapModel::default();
        Self {
            sigma_position: m.sigma_position,
            sigma_heading: m.sigma_heading,
            rate_hz: m.rate_hz,
            dropout: m.dropout,
            seed: None,
            velocity_time_constant: DEFAULT_VELOCITY_TIME_CONSTANT,
            replay: None,
        }
    }
}

impl SensingConfig {
    pub fn model(&self, scenario_seed: u64) -> MoCapModel {
        MoCapModel {
            sigma_position: self.sigma_position,
            sigma_heading: self.sigma_heading,
            rate_hz: self.rate_hz,
            dropout: self.dropout,
            seed: self.seed.unwrap_or(scenario_seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricsReference {
    /// Reference-filter output `eta_d(t)`.
    #[default]
    Filter,
    /// Raw setpoint `eta_r(t)` with zero velocity.
    Setpoint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub reference: MetricsReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trajectory: PathBuf,
    pub metrics: PathBuf,
    pub elevation: Option<PathBuf>,
    pub measurements: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            metrics: "metrics.json".into(),
            elevation: None,
            measurements: None,
        }
    }
}

impl OutputConfig {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            trajectory: dir.join("trajectory.csv"),
            metrics: dir.join("metrics.json"),
            elevation: None,
            measurements: None,
        }
    }
}

fn default_dt() -> f64 {
    crate::integrator::DEFAULT_DT
}
fn default_duration() -> f64 {
    300.0
}
fn default_control_every() -> usize {
    1
}
fn default_modes() -> Vec<ModeSwitch> {
    vec![ModeSwitch {
        t: 0.0,
        mode: ControlMode::Pose,
        velocity: None,
        tau: None,
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_control_every")]
    pub control_every: usize,
    /// `[x, y, psi_deg]`
    #[serde(default)]
    pub initial: [f64; 3],
    #[serde(default)]
    pub vessel_file: Option<PathBuf>,
    #[serde(default)]
    pub vessel: Option<VesselConfig>,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeSwitch>,
    #[serde(default)]
    pub mission: Option<MissionConfig>,
    #[serde(default)]
    pub sea_state: Option<SeaStateConfig>,
    #[serde(default)]
    pub sensing: Option<SensingConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    /// Default 4-corner benchmark: calm water, ground-truth feedback.
    pub fn four_corner(box_size: f64, yaw_deg: f64) -> Self {
        Self {
            seed: 0,
            dt: default_dt(),
            duration: default_duration(),
            control_every: 1,
            initial: [0.0; 3],
            vessel_file: None,
            vessel: Some(VesselConfig::default()),
            gains: GainsConfig::default(),
            modes: default_modes(),
            mission: Some(MissionConfig::four_corner(box_size, yaw_deg)),
            sea_state: None,
            sensing: None,
            metrics: MetricsConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let scenario: Self = parse_toml(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Load and validate; `vessel_file` and relative `replay` paths are
    /// resolved against the scenario's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("", format!("{}: {e}", path.display())))?;
        let mut scenario: Self = parse_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(file) = scenario.vessel_file.take() {
            if scenario.vessel.is_some() {
                return Err(config_error("vessel_file", "give either `vessel_file` or `[vessel]`, not both"));
            }
            let resolved = base.join(file);
            scenario.vessel = Some(VesselConfig::load(&resolved)?);
        }
        if let Some(replay) = scenario.sensing.as_mut().and_then(|s| s.replay.as_mut()) {
            if replay.is_relative() {
                *replay = base.join(&*replay);
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn vessel(&self) -> VesselConfig {
        self.vessel.clone().unwrap_or_default()
    }

    pub fn has_pose_mode(&self) -> bool {
        self.modes.iter().any(|m| m.mode == ControlMode::Pose)
    }

    /// Semantic checks beyond the schema; errors carry the field path.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(config_error("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(config_error("duration", format!("must be >= 0, got {}", self.duration)));
        }
        if self.duration / self.dt > u32::MAX as f64 {
            return Err(config_error("duration", "duration / dt exceeds the step counter"));
        }
        if self.control_every == 0 {
            return Err(config_error("control_every", "must be >= 1"));
        }
        check_finite("initial", &self.initial)?;
        if self.vessel_file.is_some() {
            return Err(config_error("vessel_file", "must be resolved through Scenario::load"));
        }
        let vessel = self.vessel();
        vessel
            .params()
            .validate()
            .map_err(|e| config_error(format!("vessel.{}", field_of(&e)), e.to_string()))?;
        let layout = vessel.layout();
        layout
            .capacity()
            .map_err(|e| config_error("vessel.thrusters", e.to_string()))?;

        let g = &self.gains;
        for (name, v) in [
            ("filter_omega", &g.filter_omega),
            ("filter_delta", &g.filter_delta),
            ("pose_kp", &g.pose_kp),
            ("pose_kd", &g.pose_kd),
            ("velocity_kp", &g.velocity_kp),
            ("velocity_ki", &g.velocity_ki),
        ] {
            check_positive(&format!("gains.{name}"), v)?;
        }
        if let Some(xi) = &g.velocity_xi_max {
            check_positive("gains.velocity_xi_max", xi)?;
        }
        if !(g.model_scale.is_finite() && g.model_scale > 0.0) {
            return Err(config_error("gains.model_scale", "must be > 0"));
        }
        let dt_control = self.dt * self.control_every as f64;
        let omega_max = g.filter_omega.iter().cloned().fold(0.0, f64::max);
        if dt_control * omega_max >= 0.1 {
            return Err(config_error(
                "gains.filter_omega",
                format!("control period {dt_control} s too long for bandwidth {omega_max} rad/s"),
            ));
        }

        if self.modes.is_empty() {
            return Err(config_error("modes", "at least one mode entry is required"));
        }
        if self.modes[0].t > 0.0 {
            return Err(config_error("modes[0].t", "first mode must start at t = 0"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if i > 0 && !(m.t > self.modes[i - 1].t) {
                return Err(config_error(format!("modes[{i}].t"), "switch times must increase"));
            }
            if m.mode == ControlMode::External && m.tau.is_none() {
                return Err(config_error(format!("modes[{i}].tau"), "external mode needs a load"));
            }
            if let Some(v) = &m.velocity {
                check_finite(&format!("modes[{i}].velocity"), v)?;
            }
            if let Some(v) = &m.tau {
                check_finite(&format!("modes[{i}].tau"), v)?;
            }
        }

        match &self.mission {
            Some(mission) => {
                if !(mission.box_size.is_finite() && mission.box_size >= 0.0) {
                    return Err(config_error("mission.box", "must be >= 0"));
                }
                if mission.kind == MissionKind::Setpoints && mission.setpoints.is_empty() {
                    return Err(config_error("mission.setpoints", "setpoint sequence must be non-empty"));
                }
                for (i, sp) in mission.setpoints.iter().enumerate() {
                    check_finite(&format!("mission.setpoints[{i}]"), sp)?;
                }
                for (name, v) in [
                    ("position_tolerance", mission.position_tolerance),
                    ("heading_tolerance_deg", mission.heading_tolerance_deg),
                    ("speed_tolerance", mission.speed_tolerance),
                ] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(config_error(format!("mission.{name}"), "must be > 0"));
                    }
                }
                if !(mission.hold_time.is_finite() && mission.hold_time >= 0.0) {
                    return Err(config_error("mission.hold_time", "must be >= 0"));
                }
            }
            None if self.has_pose_mode() => {
                return Err(config_error("mission", "pose missions need a setpoint sequence"));
            }
            None => {}
        }

        if let Some(sea) = &self.sea_state {
            sea.spectrum().validate().map_err(|e| match &e {
                crate::seastate::SeaStateError::InvalidParameter { field, .. } => {
                    config_error(format!("sea_state.{field}"), e.to_string())
                }
                _ => config_error("sea_state", e.to_string()),
            })?;
            check_finite("sea_state.load_gain", &sea.load_gain)?;
        }
        if let Some(s) = &self.sensing {
            s.model(self.seed).validate().map_err(|e| match &e {
                crate::sensing::SensingError::InvalidParameter { field, .. } => {
                    config_error(format!("sensing.{field}"), e.to_string())
                }
                _ => config_error("sensing", e.to_string()),
            })?;
            if !(s.velocity_time_constant.is_finite() && s.velocity_time_constant > 0.0) {
                return Err(config_error("sensing.velocity_time_constant", "must be > 0"));
            }
        }
        Ok(())
    }
}

fn field_of(e: &crate::dynamics::DynamicsError) -> &'static str {
    match e {
        crate::dynamics::DynamicsError::InvalidParameter { field, .. } => field,
        _ => "",
    }
}

fn check_finite(path: &str, v: &[f64]) -> Result<(), HarnessError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(config_error(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_positive(path: &str, v: &[f64]) -> Result<(), HarnessError> {
    match v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        Some(i) => Err(config_error(format!("{path}[{i}]"), format!("must be > 0, got {}", v[i]))),
        None => Ok(()),
    }
}
