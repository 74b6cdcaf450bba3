use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::actuation::{ActuatorLimits, LayoutParams};
use crate::control::{ControlWeights, JumpParams, LowLevelGains, MpcSettings, PlanSettings, PlantParams, StateWeights};
use crate::robot::RobotParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TailDisplacement,
    EeHold,
    JumpFly,
    HoverRegulation,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::TailDisplacement, ScenarioKind::EeHold, ScenarioKind::JumpFly, ScenarioKind::HoverRegulation];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TailDisplacement => "tail_displacement",
            ScenarioKind::EeHold => "ee_hold",
            ScenarioKind::JumpFly => "jump_fly",
            ScenarioKind::HoverRegulation => "hover_regulation",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailDisplacement {
    pub axis: Axis,
    /// Waypoint distance along `axis` [m].
    pub distance: f64,
    /// Point mass at the arm tip [kg]; replaces `robot.tip_mass`.
    pub tail_mass: f64,
    /// Weld the arm at its hanging posture.
    pub tail_locked: bool,
    pub altitude: f64,
    /// Duration of each leg of the round trip [s].
    pub travel_time: f64,
    /// Hold at each end [s].
    pub hold_time: f64,
}

impl Default for TailDisplacement {
    fn default() -> Self {
        Self {
            axis: Axis::X,
            distance: 5.0,
            tail_mass: 0.1,
            tail_locked: false,
            altitude: 1.0,
            travel_time: 2.0,
            hold_time: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EeHold {
    /// Base pitch while the hand is held [deg].
    pub tilt: f64,
    /// Hand hold duration [s].
    pub hold: f64,
    pub approach_time: f64,
    pub recover_time: f64,
    pub altitude: f64,
}

impl Default for EeHold {
    fn default() -> Self {
        Self { tilt: 60.0, hold: 0.6, approach_time: 1.0, recover_time: 1.5, altitude: 1.5 }
    }
}

/// Jump on the vertical guide; see [`JumpParams`] for the controller fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JumpFly {
    pub thrust_fraction: f64,
    pub leg_torque: f64,
    pub torque_duration: f64,
    pub settle_time: f64,
    pub crouch: f64,
    pub kp: f64,
    pub kd: f64,
    pub landing_thrust_fraction: f64,
    /// Simulated time [s].
    pub duration: f64,
}

impl Default for JumpFly {
    fn default() -> Self {
        let p = JumpParams::default();
        Self {
            thrust_fraction: p.thrust_fraction,
            leg_torque: p.leg_torque,
            torque_duration: p.torque_duration,
            settle_time: p.settle_time,
            crouch: p.crouch,
            kp: p.kp,
            kd: p.kd,
            landing_thrust_fraction: p.landing_thrust_fraction,
            duration: 4.0,
        }
    }
}

impl JumpFly {
    pub fn params(&self) -> JumpParams {
        JumpParams {
            thrust_fraction: self.thrust_fraction,
            leg_torque: self.leg_torque,
            torque_duration: self.torque_duration,
            settle_time: self.settle_time,
            crouch: self.crouch,
            kp: self.kp,
            kd: self.kd,
            landing_thrust_fraction: self.landing_thrust_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoverRegulation {
    /// Initial distance below the hover point [m].
    pub offset: f64,
    pub altitude: f64,
    pub duration: f64,
}

impl Default for HoverRegulation {
    fn default() -> Self {
        Self { offset: 0.5, altitude: 1.0, duration: 4.0 }
    }
}

/// MPC tracking weights; the terminal node uses the state weights times `terminal_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tracking {
    pub state: StateWeights,
    pub control: ControlWeights,
    pub terminal_scale: f64,
    /// Weight on the reference end-effector position; 0 disables the term.
    pub end_effector: f64,
}

impl Default for Tracking {
    fn default() -> Self {
        Self {
            state: StateWeights {
                position: 100.0,
                orientation: 10.0,
                joint: 1.0,
                linear_velocity: 1.0,
                angular_velocity: 1.0,
                joint_velocity: 0.1,
            },
            control: ControlWeights { thrust: 0.01, torque: 0.1 },
            terminal_scale: 10.0,
            end_effector: 0.0,
        }
    }
}

/// Pass/fail limits applied to the extracted metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Hover position error that counts as settled [m].
    pub settle_error: f64,
    /// Latest acceptable settling time [s].
    pub settle_time: f64,
    /// Largest RMS end-effector speed over RMS base speed in the hold window.
    pub stall_ratio: f64,
    /// Largest hand excursion in the hold window [m].
    pub ee_drift: f64,
    /// Smallest base tilt in the hold window [deg].
    pub min_tilt: f64,
    /// Relative tolerance on the ballistic acceleration.
    pub accel_tolerance: f64,
    pub flight_time_min: f64,
    pub flight_time_max: f64,
    /// Relative tolerance between apex height and the ballistic prediction.
    pub apex_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            settle_error: 0.02,
            settle_time: 2.0,
            stall_ratio: 0.25,
            ee_drift: 0.05,
            min_tilt: 55.0,
            accel_tolerance: 0.02,
            flight_time_min: 1.3,
            flight_time_max: 3.0,
            apex_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    /// Directory for the artifacts; `BORINOT_OUT_DIR` and `--out` take precedence.
    pub dir: PathBuf,
    pub csv: String,
    pub summary: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), csv: "run.csv".into(), summary: "summary".into() }
    }
}

/// A complete, validated scenario description.
///
/// Only the section matching `scenario` may be present. Sections left out of a
/// file take the scenario's defaults, so a file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// Reserved; every run is deterministic.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_displacement: Option<TailDisplacement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ee_hold: Option<EeHold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_fly: Option<JumpFly>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hover_regulation: Option<HoverRegulation>,
    pub robot: RobotParams,
    pub layout: LayoutParams,
    pub limits: ActuatorLimits,
    pub plant: PlantParams,
    pub planner: PlanSettings,
    pub mpc: MpcSettings,
    pub tracking: Tracking,
    pub gains: LowLevelGains,
    pub thresholds: Thresholds,
    pub output: OutputPaths,
}

impl ScenarioConfig {
    /// Defaults for `kind`, including its tuned controller settings.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let mut c = Self {
            scenario: kind,
            seed: 0,
            tail_displacement: None,
            ee_hold: None,
            jump_fly: None,
            hover_regulation: None,
            robot: RobotParams::default(),
            layout: LayoutParams::default(),
            limits: ActuatorLimits::default(),
            plant: PlantParams::default(),
            planner: PlanSettings::default(),
            mpc: MpcSettings::default(),
            tracking: Tracking::default(),
            gains: LowLevelGains::default(),
            thresholds: Thresholds::default(),
            output: OutputPaths::default(),
        };
        match kind {
            ScenarioKind::TailDisplacement => c.tail_displacement = Some(TailDisplacement::default()),
            ScenarioKind::EeHold => {
                c.ee_hold = Some(EeHold::default());
                c.planner.dt = 0.01;
                c.tracking.state.orientation = 100.0;
                c.tracking.state.angular_velocity = 3.0;
                c.tracking.end_effector = 1e3;
                c.gains.state_feedback = true;
            }
            ScenarioKind::JumpFly => c.jump_fly = Some(JumpFly::default()),
            ScenarioKind::HoverRegulation => c.hover_regulation = Some(HoverRegulation::default()),
        }
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses and validates TOML text. An empty document is the default
    /// hover regulation scenario.
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        let kind = match user.get("scenario") {
            None => ScenarioKind::HoverRegulation,
            Some(toml::Value::String(s)) => ScenarioKind::parse(s).ok_or_else(|| HarnessError::Config {
                path: "scenario".into(),
                message: format!("unknown scenario `{s}`"),
            })?,
            Some(_) => {
                return Err(HarnessError::Config { path: "scenario".into(), message: "expected a string".into() })
            }
        };
        for other in ScenarioKind::ALL.into_iter().filter(|k| *k != kind) {
            if user.contains_key(other.name()) {
                return Err(HarnessError::Config {
                    path: other.name().into(),
                    message: format!("section does not apply to scenario `{kind}`"),
                });
            }
        }
        let mut merged = toml::Value::try_from(Self::default_for(kind)).expect("defaults serialize");
        merge(&mut merged, toml::Value::Table(user));
        let config: Self = serde_path_to_error::deserialize(merged)
            .map_err(|e| HarnessError::Config { path: e.path().to_string(), message: e.inner().to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let err = |path: &str, message: &str| Err(HarnessError::Config { path: path.into(), message: message.into() });
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match self.scenario {
            ScenarioKind::TailDisplacement => {
                let s = self.tail_displacement.as_ref().expect("section present");
                for (key, v) in [("distance", s.distance), ("travel_time", s.travel_time), ("hold_time", s.hold_time)] {
                    if !positive(v) {
                        return err(&format!("tail_displacement.{key}"), "must be > 0");
                    }
                }
                if !(s.tail_mass >= 0.0 && s.tail_mass.is_finite()) {
                    return err("tail_displacement.tail_mass", "must be >= 0");
                }
                if !s.altitude.is_finite() {
                    return err("tail_displacement.altitude", "must be finite");
                }
            }
            ScenarioKind::EeHold => {
                let s = self.ee_hold.as_ref().expect("section present");
                if !(s.tilt > 0.0 && s.tilt < 90.0) {
                    return err("ee_hold.tilt", "must be in (0, 90) degrees");
                }
                for (key, v) in [("hold", s.hold), ("approach_time", s.approach_time), ("recover_time", s.recover_time)]
                {
                    if !positive(v) {
                        return err(&format!("ee_hold.{key}"), "must be > 0");
                    }
                }
                if !s.altitude.is_finite() {
                    return err("ee_hold.altitude", "must be finite");
                }
            }
            ScenarioKind::JumpFly => {
                let s = self.jump_fly.as_ref().expect("section present");
                if !(0.0..=1.0).contains(&s.thrust_fraction) {
                    return err("jump_fly.thrust_fraction", "must be in [0, 1]");
                }
                if !positive(s.torque_duration) {
                    return err("jump_fly.torque_duration", "must be > 0");
                }
                if !positive(s.duration) {
                    return err("jump_fly.duration", "must be > 0");
                }
                s.params().validate().or_else(|m| err("jump_fly", &m))?;
            }
            ScenarioKind::HoverRegulation => {
                let s = self.hover_regulation.as_ref().expect("section present");
                if !(s.offset >= 0.0 && s.offset.is_finite()) {
                    return err("hover_regulation.offset", "must be >= 0");
                }
                if !positive(s.duration) {
                    return err("hover_regulation.duration", "must be > 0");
                }
                if !s.altitude.is_finite() {
                    return err("hover_regulation.altitude", "must be finite");
                }
            }
        }
        let r = &self.robot;
        let masses = [r.base_mass, r.link_masses[0], r.link_masses[1]];
        if masses.iter().any(|m| !positive(*m)) || !(r.tip_mass >= 0.0) || !positive(r.gravity) {
            return err("robot", "masses and gravity must be > 0");
        }
        if !(positive(self.layout.radius) && self.layout.torque_ratio.is_finite()) {
            return err("layout", "radius must be > 0");
        }
        self.limits.validate().or_else(|m| err("limits", &m))?;
        self.plant.validate().or_else(|m| err("plant", &m))?;
        self.planner.validate().or_else(|m| err("planner", &m))?;
        self.mpc.validate().or_else(|m| err("mpc", &m))?;
        self.tracking.state.validate().or_else(|m| err("tracking.state", &m))?;
        self.tracking.control.validate().or_else(|m| err("tracking.control", &m))?;
        if !(self.tracking.terminal_scale >= 0.0 && self.tracking.end_effector >= 0.0) {
            return err("tracking", "terminal_scale and end_effector must be >= 0");
        }
        self.gains.validate().or_else(|m| err("gains", &m))?;
        let t = &self.thresholds;
        let all = [t.settle_error, t.settle_time, t.stall_ratio, t.ee_drift, t.accel_tolerance, t.apex_tolerance];
        if all.iter().any(|v| !(*v >= 0.0)) || !(t.flight_time_min <= t.flight_time_max) || !t.min_tilt.is_finite() {
            return err("thresholds", "limits must be >= 0 and flight_time_min <= flight_time_max");
        }
        if self.output.csv.is_empty() || self.output.summary.is_empty() {
            return err("output", "file names must not be empty");
        }
        Ok(())
    }

    /// Simulated duration of the closed-loop run [s].
    pub fn duration(&self) -> f64 {
        match self.scenario {
            ScenarioKind::TailDisplacement => {
                let s = self.tail_displacement.as_ref().expect("section present");
                2.0 * (s.travel_time + s.hold_time) + 1.0
            }
            ScenarioKind::EeHold => {
                let s = self.ee_hold.as_ref().expect("section present");
                s.approach_time + s.hold + s.recover_time + 1.0
            }
            ScenarioKind::JumpFly => self.jump_fly.as_ref().expect("section present").duration,
            ScenarioKind::HoverRegulation => self.hover_regulation.as_ref().expect("section present").duration,
        }
    }
}

/// Overlays `user` on `base`; tables merge key by key, anything else replaces.
fn merge(base: &mut toml::Value, user: toml::Value) {
    match (base, user) {
        (toml::Value::Table(b), toml::Value::Table(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    ScenarioConfig::from_toml(&text)
}

/// Configurations shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 6] = [
    ("hover", include_str!("../../configs/hover.toml")),
    ("tail_x", include_str!("../../configs/tail_x.toml")),
    ("tail_x_locked", include_str!("../../configs/tail_x_locked.toml")),
    ("tail_y", include_str!("../../configs/tail_y.toml")),
    ("ee_hold", include_str!("../../configs/ee_hold.toml")),
    ("jump_fly", include_str!("../../configs/jump_fly.toml")),
];

pub fn bundled(name: &str) -> Option<ScenarioConfig> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ScenarioConfig::from_toml(text).expect("bundled configs are valid"))
}
