use nalgebra::{Matrix3, Vector3};

use super::config::{Axis, ScenarioConfig, ScenarioKind};
use crate::control::LogRow;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Named scalars extracted from a log plus the threshold checks. A metric
/// whose window was not found, or that came out non-finite, is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scenario: ScenarioKind,
    pub metrics: Vec<(String, Option<f64>)>,
    pub checks: Vec<Check>,
}

impl MetricsReport {
    fn new(scenario: ScenarioKind) -> Self {
        Self { scenario, metrics: Vec::new(), checks: Vec::new() }
    }

    fn put(&mut self, name: &str, value: Option<f64>) {
        self.metrics.push((name.to_string(), value.filter(|v| v.is_finite())));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    /// `value` must be present and satisfy `ok`.
    fn require(&mut self, name: &str, metric: &str, ok: impl Fn(f64) -> bool, limit: &str) {
        let value = self.get(metric);
        let passed = value.is_some_and(ok);
        let detail = match value {
            Some(v) => format!("{metric} = {v:.6} (limit {limit})"),
            None => format!("{metric} absent"),
        };
        self.check(name, passed, detail);
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// Key-value text: metrics, then checks, then the overall verdict.
    pub fn summary(&self) -> String {
        let mut out = format!("scenario = {}\n", self.scenario);
        for (name, value) in &self.metrics {
            match value {
                Some(v) => out.push_str(&format!("{name} = {v:?}\n")),
                None => out.push_str(&format!("{name} = absent\n")),
            }
        }
        for c in &self.checks {
            out.push_str(&format!("check.{} = {}\n", c.name, if c.passed { "pass" } else { "fail" }));
        }
        out.push_str(&format!("passed = {}\n", self.passed()));
        out
    }
}

/// Angle between the body z axis and world z [rad].
fn tilt(r: &LogRow) -> f64 {
    let c = 1.0 - 2.0 * (r.q[3] * r.q[3] + r.q[4] * r.q[4]);
    c.clamp(-1.0, 1.0).acos()
}

fn max_abs(rows: &[LogRow], f: impl Fn(&LogRow) -> f64) -> Option<f64> {
    rows.iter().map(|r| f(r).abs()).reduce(f64::max)
}

fn rms(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Second derivative of the least-squares parabola through `(t, z)`.
pub(crate) fn fitted_acceleration(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 3 {
        return None;
    }
    let mid = 0.5 * (samples[0].0 + samples[samples.len() - 1].0);
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for &(t, z) in samples {
        let s = t - mid;
        let phi = Vector3::new(1.0, s, s * s);
        a += phi * phi.transpose();
        b += phi * z;
    }
    a.cholesky().map(|c| 2.0 * c.solve(&b)[2])
}

/// Maximal runs of rows with zero contact force, as `[first, end)` row indices.
pub(crate) fn flight_windows(rows: &[LogRow]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, r) in rows.iter().enumerate() {
        match (r.contact_force == 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, rows.len()));
    }
    out
}

/// Metrics and checks for `config.scenario`. Pure in the log rows, so a saved
/// CSV reproduces the report of the run that wrote it.
pub fn extract_metrics(rows: &[LogRow], config: &ScenarioConfig) -> MetricsReport {
    let mut report = MetricsReport::new(config.scenario);
    let duration = config.duration();
    let dt = config.plant.dt;
    let end = rows.last().map_or(f64::NAN, |r| r.t);
    let finite = rows.iter().all(|r| r.values().iter().all(|v| v.is_finite()));
    report.put("duration", Some(end));
    report.check(
        "completed",
        finite && end >= duration - 0.5 * dt,
        format!("log ends at {end:.4} s of {duration:.4} s"),
    );
    match config.scenario {
        ScenarioKind::HoverRegulation => hover(rows, config, &mut report),
        ScenarioKind::TailDisplacement => tail(rows, config, &mut report),
        ScenarioKind::EeHold => ee_hold(rows, config, &mut report),
        ScenarioKind::JumpFly => jump(rows, config, &mut report),
    }
    report
}

fn hover(rows: &[LogRow], config: &ScenarioConfig, report: &mut MetricsReport) {
    let s = config.hover_regulation.as_ref().expect("section present");
    let th = &config.thresholds;
    let target = Vector3::new(0.0, 0.0, s.altitude);
    let errors: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.t, (Vector3::from(r.base_position()) - target).norm())).collect();
    // first time after which the error stays within the band
    let settle = match errors.iter().rposition(|&(_, e)| !(e <= th.settle_error)) {
        None => errors.first().map(|&(t, _)| t),
        Some(i) => errors.get(i + 1).map(|&(t, _)| t),
    };
    report.put("settle_time", settle);
    report.put("final_error", errors.last().map(|&(_, e)| e));
    report.put("max_error", errors.iter().map(|&(_, e)| e).reduce(f64::max));
    report.put("peak_pitch_rate", max_abs(rows, |r| r.v[4]));
    report.put("peak_roll_rate", max_abs(rows, |r| r.v[3]));
    let limit = th.settle_time;
    report.require("settle_time", "settle_time", |v| v <= limit, &format!("<= {limit}"));
}

fn tail(rows: &[LogRow], config: &ScenarioConfig, report: &mut MetricsReport) {
    let s = config.tail_displacement.as_ref().expect("section present");
    let direction = match s.axis {
        Axis::X => Vector3::x(),
        Axis::Y => Vector3::y(),
    };
    let goal = Vector3::new(0.0, 0.0, s.altitude) + direction * s.distance;
    let reach = 0.05 * s.distance;
    let traversal = rows.iter().find(|r| (Vector3::from(r.base_position()) - goal).norm() <= reach).map(|r| r.t);
    report.put("peak_pitch_rate", max_abs(rows, |r| r.v[4]));
    report.put("peak_roll_rate", max_abs(rows, |r| r.v[3]));
    report.put("peak_joint1_torque", max_abs(rows, |r| r.torques[0]));
    report.put("traversal_time", traversal);
    report.require("waypoint_reached", "traversal_time", |_| true, &format!("within {reach} m"));
}

fn ee_hold(rows: &[LogRow], config: &ScenarioConfig, report: &mut MetricsReport) {
    let s = config.ee_hold.as_ref().expect("section present");
    let th = &config.thresholds;
    let eps = 1e-9;
    let window: Vec<&LogRow> =
        rows.iter().filter(|r| r.t >= s.approach_time - eps && r.t <= s.approach_time + s.hold + eps).collect();
    // body-frame velocity has the world-frame norm
    let base_speed = |r: &LogRow| Vector3::new(r.v[0], r.v[1], r.v[2]).norm();
    let ee_rms = rms(window.iter().map(|r| Vector3::from(r.ee_velocity).norm()));
    let base_rms = rms(window.iter().map(|r| base_speed(r)));
    let drift = window.first().and_then(|first| {
        let p0 = Vector3::from(first.ee_position);
        window.iter().map(|r| (Vector3::from(r.ee_position) - p0).norm()).reduce(f64::max)
    });
    let min_tilt = window.iter().map(|r| tilt(r).to_degrees()).reduce(f64::min);
    report.put("rms_ee_speed", ee_rms);
    report.put("rms_base_speed", base_rms);
    report.put("speed_ratio", ee_rms.zip(base_rms).map(|(e, b)| e / b));
    report.put("max_ee_drift", drift);
    report.put("min_tilt", min_tilt);
    report.put("peak_pitch_rate", max_abs(rows, |r| r.v[4]));
    let (ratio, d, t) = (th.stall_ratio, th.ee_drift, th.min_tilt);
    report.require("stall_ratio", "speed_ratio", |v| v <= ratio, &format!("<= {ratio}"));
    report.require("ee_drift", "max_ee_drift", |v| v <= d, &format!("<= {d}"));
    report.require("min_tilt", "min_tilt", |v| v >= t, &format!(">= {t}"));
}

fn jump(rows: &[LogRow], config: &ScenarioConfig, report: &mut MetricsReport) {
    let s = config.jump_fly.as_ref().expect("section present");
    let th = &config.thresholds;
    let g_eff = (1.0 - s.thrust_fraction) * config.robot.gravity;
    let windows = flight_windows(rows);
    report.put("flight_windows", Some(windows.len() as f64));
    let flight = windows.iter().copied().max_by_key(|&(a, b)| b - a);
    let landed = flight.filter(|&(_, b)| b < rows.len());
    let (mut accel, mut time, mut apex, mut landing) = (None, None, None, None);
    if let Some((a, b)) = flight {
        let samples: Vec<(f64, f64)> = rows[a..b].iter().map(|r| (r.t, r.com_z)).collect();
        accel = fitted_acceleration(&samples);
        let z0 = rows[a].com_z;
        apex = rows[a..b].iter().map(|r| r.com_z - z0).reduce(f64::max);
    }
    if let Some((a, b)) = landed {
        time = Some(rows[b].t - rows[a].t);
        landing = rows[b..].iter().map(|r| r.contact_force).reduce(f64::max);
    }
    let expected_apex = time.map(|t| g_eff * (0.5 * t).powi(2) / 2.0);
    report.put("ballistic_accel", accel);
    report.put("expected_accel", Some(-g_eff));
    report.put("flight_time", time);
    report.put("apex_height", apex);
    report.put("expected_apex", expected_apex);
    report.put("peak_landing_force", landing);
    let n = windows.len();
    report.check("single_flight", n == 1 && landed.is_some(), format!("{n} zero-contact windows"));
    let tol = th.accel_tolerance;
    report.require(
        "ballistic_accel",
        "ballistic_accel",
        |v| (v + g_eff).abs() <= tol * g_eff,
        &format!("-{g_eff:.4} ± {tol}"),
    );
    let (lo, hi) = (th.flight_time_min, th.flight_time_max);
    report.require("flight_time", "flight_time", |v| (lo..=hi).contains(&v), &format!("[{lo}, {hi}]"));
    let apex_tol = th.apex_tolerance;
    let consistent = apex.zip(expected_apex).is_some_and(|(a, e)| (a - e).abs() <= apex_tol * e);
    let detail = format!("apex {apex:?} vs ballistic {expected_apex:?} (± {apex_tol})");
    report.check("apex_consistency", consistent, detail);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{CANONICAL_NQ, CANONICAL_NV};
    use proptest::prelude::*;

    fn row(t: f64) -> LogRow {
        let mut q = [0.0; CANONICAL_NQ];
        q[6] = 1.0;
        LogRow {
            t,
            q,
            v: [0.0; CANONICAL_NV],
            thrusts: [3.846; 6],
            torques: [0.0; 2],
            ee_position: [0.0; 3],
            ee_velocity: [0.0; 3],
            euler: [0.0; 3],
            com_z: 0.0,
            contact_force: 0.0,
            thrust_saturated: false,
            torque_saturated: false,
            mpc_cost: 0.0,
            mpc_iterations: 0,
            mpc_converged: true,
        }
    }

    fn hover_log(config: &ScenarioConfig, z: f64) -> Vec<LogRow> {
        let n = (config.duration() / config.plant.dt).round() as usize;
        (0..=n)
            .map(|k| {
                let mut r = row(k as f64 * config.plant.dt);
                r.q[2] = z;
                r.ee_position = [0.0, 0.0, z - 0.36];
                r
            })
            .collect()
    }

    #[test]
    fn pure_hover_has_no_rates_and_no_drift() {
        let mut c = ScenarioConfig::default_for(ScenarioKind::EeHold);
        c.thresholds.min_tilt = 0.0;
        let rows = hover_log(&c, 1.5);
        let r = extract_metrics(&rows, &c);
        assert_eq!(r.get("peak_pitch_rate"), Some(0.0));
        assert_eq!(r.get("max_ee_drift"), Some(0.0));
        // zero base speed leaves the ratio undefined
        assert_eq!(r.get("speed_ratio"), None);
        assert!(!r.passed());
        let c = ScenarioConfig::default_for(ScenarioKind::TailDisplacement);
        let r = extract_metrics(&hover_log(&c, 1.0), &c);
        assert_eq!(r.get("peak_pitch_rate"), Some(0.0));
        assert_eq!(r.get("traversal_time"), None);
        assert!(!r.passed());
    }

    #[test]
    fn hover_at_target_settles_immediately() {
        let c = ScenarioConfig::default_for(ScenarioKind::HoverRegulation);
        let r = extract_metrics(&hover_log(&c, 1.0), &c);
        assert_eq!(r.get("settle_time"), Some(0.0));
        assert_eq!(r.get("final_error"), Some(0.0));
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn truncated_log_fails_completion() {
        let c = ScenarioConfig::default_for(ScenarioKind::HoverRegulation);
        let mut rows = hover_log(&c, 1.0);
        rows.truncate(rows.len() / 2);
        let r = extract_metrics(&rows, &c);
        assert!(!r.checks.iter().find(|c| c.name == "completed").unwrap().passed);
        assert!(!r.passed());
    }

    /// Crouched stance, then a parabola under `accel`, then stance again.
    fn jump_log(c: &ScenarioConfig, liftoff: f64, flight: f64, accel: f64) -> Vec<LogRow> {
        let dt = c.plant.dt;
        let n = (c.duration() / dt).round() as usize;
        let v0 = -accel * flight / 2.0;
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let mut r = row(t);
                let s = t - liftoff;
                if s >= 0.0 && s < flight - 1e-9 {
                    r.com_z = 0.2 + v0 * s + 0.5 * accel * s * s;
                } else {
                    r.com_z = 0.2;
                    r.contact_force = if s < 0.0 { 2.3 } else { 20.0 };
                }
                r
            })
            .collect()
    }

    #[test]
    fn ideal_ballistic_log_passes() {
        let c = ScenarioConfig::default_for(ScenarioKind::JumpFly);
        let g = c.robot.gravity * 0.1;
        let rows = jump_log(&c, 0.5, 2.2, -g);
        let r = extract_metrics(&rows, &c);
        assert!((r.get("ballistic_accel").unwrap() + g).abs() < 1e-9);
        assert!((r.get("flight_time").unwrap() - 2.2).abs() < 1e-9);
        // apex of the sampled parabola: g (T/2)^2 / 2
        let expected = g * 1.1f64.powi(2) / 2.0;
        assert!((r.get("apex_height").unwrap() - expected).abs() < 1e-6);
        assert_eq!(r.get("peak_landing_force"), Some(20.0));
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn rebound_fails_single_flight() {
        let c = ScenarioConfig::default_for(ScenarioKind::JumpFly);
        let mut rows = jump_log(&c, 0.5, 2.2, -0.981);
        for r in rows.iter_mut().filter(|r| r.t > 3.0 && r.t < 3.1) {
            r.contact_force = 0.0;
        }
        let r = extract_metrics(&rows, &c);
        assert_eq!(r.get("flight_windows"), Some(2.0));
        assert!(!r.passed());
    }

    #[test]
    fn full_gravity_fall_fails_acceleration() {
        let c = ScenarioConfig::default_for(ScenarioKind::JumpFly);
        let r = extract_metrics(&jump_log(&c, 0.5, 1.5, -9.81), &c);
        assert!(!r.checks.iter().find(|c| c.name == "ballistic_accel").unwrap().passed);
    }

    #[test]
    fn no_liftoff_marks_metrics_absent() {
        let c = ScenarioConfig::default_for(ScenarioKind::JumpFly);
        let rows: Vec<LogRow> = jump_log(&c, 10.0, 1.0, -1.0);
        let r = extract_metrics(&rows, &c);
        assert_eq!(r.get("flight_time"), None);
        assert_eq!(r.get("ballistic_accel"), None);
        assert!(!r.passed());
        assert!(r.summary().contains("flight_time = absent"));
    }

    #[test]
    fn summary_lists_metrics_and_verdict() {
        let c = ScenarioConfig::default_for(ScenarioKind::HoverRegulation);
        let s = extract_metrics(&hover_log(&c, 1.0), &c).summary();
        assert!(s.starts_with("scenario = hover_regulation\n"));
        assert!(s.contains("settle_time = 0.0\n"));
        assert!(s.contains("check.completed = pass\n"));
        assert!(s.ends_with("passed = true\n"));
    }

    proptest! {
        #[test]
        fn parabola_fit_is_exact(a in -20.0f64..20.0, b in -5.0f64..5.0, c in -5.0f64..5.0, t0 in 0.0f64..3.0) {
            let samples: Vec<(f64, f64)> = (0..200).map(|k| {
                let t = t0 + k as f64 * 1e-3;
                (t, c + b * t + 0.5 * a * t * t)
            }).collect();
            let fit = fitted_acceleration(&samples).unwrap();
            prop_assert!((fit - a).abs() < 1e-6 * (1.0 + a.abs()));
        }

        #[test]
        fn windows_partition_zero_contact_rows(mask in proptest::collection::vec(any::<bool>(), 0..60)) {
            let rows: Vec<LogRow> = mask.iter().enumerate().map(|(i, &air)| {
                let mut r = row(i as f64);
                r.contact_force = if air { 0.0 } else { 1.0 };
                r
            }).collect();
            let w = flight_windows(&rows);
            let covered: usize = w.iter().map(|(a, b)| b - a).sum();
            prop_assert_eq!(covered, mask.iter().filter(|&&m| m).count());
            for pair in w.windows(2) {
                prop_assert!(pair[0].1 < pair[1].0);
            }
        }
    }
}
