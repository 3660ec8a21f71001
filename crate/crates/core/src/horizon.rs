use serde::{Deserialize, Serialize};

use crate::error::{Result, VppError};

/// Time axis of the scheduling day.
///
/// Steps have a fixed length in hours. Reserve capacity is booked per window
/// of `rcm_window_hours`, which must hold a whole number of steps; a trailing
/// partial window is allowed when the horizon does not divide evenly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub steps: usize,
    pub step_hours: f64,
    pub rcm_window_hours: f64,
    /// Clock hour at the start of step 0, used to map hourly tariffs.
    #[serde(default)]
    pub start_hour: f64,
}

impl Horizon {
    pub fn new(
        steps: usize,
        step_hours: f64,
        rcm_window_hours: f64,
        start_hour: f64,
    ) -> Result<Self> {
        let h = Horizon {
            steps,
            step_hours,
            rcm_window_hours,
            start_hour,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(VppError::Horizon("at least one step is required".into()));
        }
        if !(self.step_hours > 0.0 && self.step_hours.is_finite()) {
            return Err(VppError::Horizon(format!(
                "step length {} h must be positive",
                self.step_hours
            )));
        }
        let ratio = self.rcm_window_hours / self.step_hours;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(VppError::Horizon(format!(
                "reserve window {} h is not a whole multiple of the {} h step",
                self.rcm_window_hours, self.step_hours
            )));
        }
        if !self.start_hour.is_finite() {
            return Err(VppError::Horizon("start hour must be finite".into()));
        }
        Ok(())
    }

    pub fn steps_per_window(&self) -> usize {
        (self.rcm_window_hours / self.step_hours).round() as usize
    }

    pub fn num_windows(&self) -> usize {
        self.steps.div_ceil(self.steps_per_window())
    }

    pub fn window_of(&self, t: usize) -> usize {
        t / self.steps_per_window()
    }

    pub fn window_steps(&self, w: usize) -> std::ops::Range<usize> {
        let spw = self.steps_per_window();
        (w * spw)..((w + 1) * spw).min(self.steps)
    }

    /// Clock hour (0..24) at the start of step `t`.
    pub fn clock_hour(&self, t: usize) -> f64 {
        (self.start_hour + t as f64 * self.step_hours).rem_euclid(24.0)
    }

    pub fn in_clock_window(&self, t: usize, from_hour: f64, to_hour: f64) -> bool {
        let h = self.clock_hour(t);
        h >= from_hour - 1e-9 && h < to_hour - 1e-9
    }

    /// Expands 24 hourly values onto the step grid.
    pub fn expand_hourly(&self, hourly: &[f64]) -> Result<Vec<f64>> {
        if hourly.len() != 24 {
            return Err(VppError::Length {
                what: "hourly schedule",
                expected: 24,
                got: hourly.len(),
            });
        }
        Ok((0..self.steps)
            .map(|t| hourly[(self.clock_hour(t).floor() as usize).min(23)])
            .collect())
    }

    pub fn total_hours(&self) -> f64 {
        self.steps as f64 * self.step_hours
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_hours_map_to_four_hour_windows() {
        let h = Horizon::new(96, 0.25, 4.0, 0.0).unwrap();
        assert_eq!(h.steps_per_window(), 16);
        assert_eq!(h.num_windows(), 6);
        assert_eq!(h.window_of(15), 0);
        assert_eq!(h.window_of(16), 1);
        assert_eq!(h.window_steps(5), 80..96);
        assert!(h.in_clock_window(40, 10.0, 14.0));
        assert!(h.in_clock_window(55, 10.0, 14.0));
        assert!(!h.in_clock_window(56, 10.0, 14.0));
        assert!(h.in_clock_window(68, 17.0, 21.0) && h.in_clock_window(83, 17.0, 21.0));
    }

    #[test]
    fn rejects_fractional_windows() {
        assert!(Horizon::new(8, 3.0, 4.0, 0.0).is_err());
        assert!(Horizon::new(0, 1.0, 4.0, 0.0).is_err());
        assert!(Horizon::new(8, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn partial_last_window() {
        let h = Horizon::new(10, 1.0, 4.0, 10.0).unwrap();
        assert_eq!(h.num_windows(), 3);
        assert_eq!(h.window_steps(2), 8..10);
        assert_eq!(h.clock_hour(9), 19.0);
    }

    #[test]
    fn hourly_expansion_wraps_midnight() {
        let h = Horizon::new(4, 1.0, 4.0, 22.0).unwrap();
        let hourly: Vec<f64> = (0..24).map(|v| v as f64).collect();
        assert_eq!(
            h.expand_hourly(&hourly).unwrap(),
            vec![22.0, 23.0, 0.0, 1.0]
        );
    }
}
