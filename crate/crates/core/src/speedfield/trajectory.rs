use super::SpeedField;
use crate::error::{Error, Result};
use crate::ingestion::kmh_to_ms;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOptions {
    /// Fixed Euler step; `None` uses `min(30 s, tau / 4)`.
    pub step_s: Option<f64>,
    pub stall_speed_kmh: f64,
    pub stall_timeout_s: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            step_s: None,
            stall_speed_kmh: 1.0,
            stall_timeout_s: 7200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub departure_time_s: f64,
    pub arrival_time_s: f64,
    /// `(x_m, t_s)` after every step, starting at the origin.
    pub path: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn travel_time_s(&self) -> f64 {
        self.arrival_time_s - self.departure_time_s
    }
}

/// Drives a virtual vehicle through the field at the local speed.
pub fn virtual_trajectory(
    field: &SpeedField,
    departure_time_s: f64,
    origin_m: f64,
    destination_m: f64,
) -> Result<Trajectory> {
    virtual_trajectory_with(
        field,
        departure_time_s,
        origin_m,
        destination_m,
        &TrajectoryOptions::default(),
    )
}

/// Forward-Euler integration of `dx/dt = V(x, t)`. The last step is
/// shortened so the vehicle lands exactly on the destination.
pub fn virtual_trajectory_with(
    field: &SpeedField,
    departure_time_s: f64,
    origin_m: f64,
    destination_m: f64,
    options: &TrajectoryOptions,
) -> Result<Trajectory> {
    if origin_m.partial_cmp(&destination_m) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidParameter(format!(
            "origin {origin_m} m must lie before destination {destination_m} m"
        )));
    }
    let step = options.step_s.unwrap_or_else(|| (field.min_tau_s() / 4.0).min(30.0));
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidParameter(format!("integration step {step} s")));
    }

    let (mut x, mut t) = (origin_m, departure_time_s);
    let mut path = vec![(x, t)];
    let mut slow_for = 0.0;
    loop {
        let v_kmh = field.evaluate(x, t);
        if v_kmh <= options.stall_speed_kmh {
            slow_for += step;
            if slow_for > options.stall_timeout_s {
                return Err(Error::Stalled {
                    position_m: x,
                    time_s: t,
                });
            }
        } else {
            slow_for = 0.0;
        }
        let v = kmh_to_ms(v_kmh);
        let remaining = destination_m - x;
        if v * step >= remaining {
            t += remaining / v;
            path.push((destination_m, t));
            return Ok(Trajectory {
                departure_time_s,
                arrival_time_s: t,
                path,
            });
        }
        x += v * step;
        t += step;
        path.push((x, t));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::speedfield::{AsmParams, Measurement};

    fn constant(v: f64) -> SpeedField {
        let ms = (0..30)
            .map(|i| Measurement::new(500.0 + 1000.0 * i as f64, 3600.0, v, 500.0, 150.0).unwrap())
            .collect();
        SpeedField::new(ms, AsmParams::default()).unwrap()
    }

    #[test]
    fn constant_field_distance_over_speed() {
        let tr = virtual_trajectory(&constant(90.0), 3000.0, 0.0, 30_000.0).unwrap();
        assert!((tr.travel_time_s() - 1200.0).abs() <= 30.0);
        assert!(tr.path.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        assert_eq!(tr.path.last().unwrap().0, 30_000.0);
    }

    #[test]
    fn stalls_are_reported() {
        let opts = TrajectoryOptions {
            stall_timeout_s: 600.0,
            ..TrajectoryOptions::default()
        };
        match virtual_trajectory_with(&constant(0.5), 0.0, 0.0, 30_000.0, &opts) {
            Err(Error::Stalled { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(virtual_trajectory(&constant(50.0), 0.0, 10.0, 5.0).is_err());
    }
}
