use super::{PlanError, PlannerLimits, Trajectory6DoF, TrajectorySample, WaypointPath};
use crate::geometry::{wrap_angle, Vec3};

/// Rest-to-rest trapezoidal (or triangular) speed profile over a distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidProfile {
    pub length: f64,
    pub accel: f64,
    /// Peak speed, `min(v_max, √(a·L))`.
    pub v_peak: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
}

impl TrapezoidProfile {
    pub fn new(length: f64, v_max: f64, a_max: f64) -> Self {
        let v_peak = v_max.min((a_max * length).sqrt());
        let t_accel = v_peak / a_max;
        let d_accel = 0.5 * v_peak * t_accel;
        let t_cruise = if v_peak > 0.0 { ((length - 2.0 * d_accel) / v_peak).max(0.0) } else { 0.0 };
        Self { length, accel: a_max, v_peak, t_accel, t_cruise }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_accel + self.t_cruise
    }

    /// Arc length and speed at time `t` (clamped to the profile).
    pub fn at(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, self.duration());
        let d_accel = 0.5 * self.v_peak * self.t_accel;
        if t < self.t_accel {
            (0.5 * self.accel * t * t, self.accel * t)
        } else if t < self.t_accel + self.t_cruise {
            (d_accel + self.v_peak * (t - self.t_accel), self.v_peak)
        } else {
            let r = (self.duration() - t).max(0.0);
            ((self.length - 0.5 * self.accel * r * r).min(self.length), self.accel * r)
        }
    }
}

/// Samples a rest-to-rest trapezoidal profile along the polyline at the
/// configured rate (plus a final sample at the end time). Yaw is
/// interpolated along the shortest arc between waypoint headings; pitch is 0.
pub fn time_parameterize(
    path: &WaypointPath,
    limits: &PlannerLimits,
    headings: &[f64],
) -> Result<Trajectory6DoF, PlanError> {
    limits.validate()?;
    let q = path.waypoints();
    if headings.len() != q.len() {
        return Err(PlanError::Invalid(format!("{} headings for {} waypoints", headings.len(), q.len())));
    }
    let mut cumulative = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in q.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }
    let length = acc;
    if q.len() == 1 || length == 0.0 {
        return Ok(Trajectory6DoF {
            samples: vec![TrajectorySample {
                t: 0.0,
                position: q[0],
                velocity: Vec3::zeros(),
                yaw: wrap_angle(headings[0]),
                pitch: 0.0,
            }],
        });
    }

    let profile = TrapezoidProfile::new(length, limits.v_max, limits.a_max);
    let total = profile.duration();
    let dt = 1.0 / limits.sample_rate;
    let n = (total * limits.sample_rate + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    match times.last_mut() {
        Some(last) if total - *last <= 1e-9 => *last = total,
        _ => times.push(total),
    }

    let samples = times
        .into_iter()
        .map(|t| {
            let (s, speed) = profile.at(t);
            let j = match cumulative.partition_point(|c| *c <= s) {
                0 => 0,
                p => (p - 1).min(q.len() - 2),
            };
            let seg = q[j + 1] - q[j];
            let seg_len = cumulative[j + 1] - cumulative[j];
            let frac = ((s - cumulative[j]) / seg_len).clamp(0.0, 1.0);
            let dir = seg / seg_len;
            TrajectorySample {
                t,
                position: q[j] + seg * frac,
                velocity: dir * speed,
                yaw: wrap_angle(headings[j] + frac * wrap_angle(headings[j + 1] - headings[j])),
                pitch: 0.0,
            }
        })
        .collect();
    Ok(Trajectory6DoF { samples })
}
