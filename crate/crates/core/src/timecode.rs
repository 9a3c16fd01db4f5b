//! Absolute-time context for the dynamics model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERIODS_MINUTES: [f64; 7] = [1440.0, 720.0, 360.0, 180.0, 60.0, 30.0, 10.0];

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    #[default]
    Sinusoidal,
    /// Raw minutes as a single feature; ablation only.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEncodingConfig {
    #[serde(rename = "time_periods_minutes")]
    pub periods: Vec<f64>,
    pub mode: TimeMode,
}

impl Default for TimeEncodingConfig {
    fn default() -> Self {
        TimeEncodingConfig {
            periods: DEFAULT_PERIODS_MINUTES.to_vec(),
            mode: TimeMode::Sinusoidal,
        }
    }
}

impl TimeEncodingConfig {
    pub fn new(periods: Vec<f64>, mode: TimeMode) -> Result<Self> {
        let cfg = TimeEncodingConfig { periods, mode };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn linear() -> Self {
        TimeEncodingConfig {
            mode: TimeMode::Linear,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Config("time encoding needs at least one period".into()));
        }
        if self.periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Config("time periods must be positive".into()));
        }
        if self.periods.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("time periods must be strictly decreasing".into()));
        }
        Ok(())
    }

    /// Length of the vector produced by [`encode`].
    pub fn width(&self) -> usize {
        match self.mode {
            TimeMode::Sinusoidal => 2 * self.periods.len(),
            TimeMode::Linear => 1,
        }
    }
}

/// `[sin(2πt/τ₁), cos(2πt/τ₁), …]`, or `[t]` in linear mode.
pub fn encode(minutes: f64, cfg: &TimeEncodingConfig) -> Result<Vec<f64>> {
    if minutes < 0.0 || minutes.is_nan() {
        return Err(Error::NegativeTime(minutes));
    }
    Ok(match cfg.mode {
        TimeMode::Linear => vec![minutes],
        TimeMode::Sinusoidal => cfg
            .periods
            .iter()
            .flat_map(|&tau| {
                let phase = 2.0 * PI * minutes / tau;
                [phase.sin(), phase.cos()]
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midnight_is_all_zero_sines() {
        let v = encode(0.0, &TimeEncodingConfig::default()).unwrap();
        assert_eq!(v.len(), 14);
        for pair in v.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
    }

    #[test]
    fn noon_on_daily_period() {
        let v = encode(720.0, &TimeEncodingConfig::default()).unwrap();
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_default_period_divides_a_day() {
        for tau in DEFAULT_PERIODS_MINUTES {
            assert_eq!(1440.0 % tau, 0.0, "{tau}");
        }
        let cfg = TimeEncodingConfig::default();
        for t in [0.0, 7.0, 425.0, 1000.0] {
            let a = encode(t, &cfg).unwrap();
            let b = encode(t + 1440.0, &cfg).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_mode_passes_raw_minutes() {
        assert_eq!(encode(430.0, &TimeEncodingConfig::linear()).unwrap(), vec![430.0]);
        assert_eq!(TimeEncodingConfig::linear().width(), 1);
    }

    #[test]
    fn rejects_negative_time_and_bad_periods() {
        assert!(matches!(
            encode(-1.0, &TimeEncodingConfig::default()),
            Err(Error::NegativeTime(_))
        ));
        assert!(TimeEncodingConfig::new(vec![60.0, 60.0], TimeMode::Sinusoidal).is_err());
        assert!(TimeEncodingConfig::new(vec![60.0, -1.0], TimeMode::Sinusoidal).is_err());
        assert!(TimeEncodingConfig::new(vec![], TimeMode::Sinusoidal).is_err());
    }

    #[test]
    fn config_field_name() {
        let json = serde_json::to_string(&TimeEncodingConfig::default()).unwrap();
        assert!(json.contains(r#""time_periods_minutes":[1440.0,720.0,360.0,180.0,60.0,30.0,10.0]"#));
    }
}
