//! Fixed concentration thresholds used as a baseline alarm rule.

use serde::{Deserialize, Serialize};

use super::ingest::{DailyProfileRecord, Pollutant, HOURS};

const WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    HourlyMax,
    /// Largest mean over 8 consecutive hours of the same day.
    Rolling8hMeanMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub pollutant: Pollutant,
    pub statistic: Statistic,
    /// mg/m^3; exceeded when the statistic is strictly above it.
    pub limit: f64,
}

impl std::fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.pollutant, self.limit)
    }
}

/// Threshold for a pollutant; NO has none.
pub fn rule_for(p: Pollutant) -> Option<ThresholdRule> {
    let (statistic, limit) = match p {
        Pollutant::CO => (Statistic::Rolling8hMeanMax, 10.0),
        Pollutant::NO2 => (Statistic::HourlyMax, 400.0),
        Pollutant::O3 => (Statistic::HourlyMax, 240.0),
        Pollutant::SO2 => (Statistic::HourlyMax, 500.0),
        Pollutant::NO => return None,
    };
    Some(ThresholdRule {
        pollutant: p,
        statistic,
        limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhoVerdict {
    pub flagged: bool,
    pub violated: Vec<ThresholdRule>,
    /// Value of the rule's statistic, when the pollutant has a rule.
    pub statistic: Option<f64>,
}

fn statistic(values: &[f64; HOURS], s: Statistic) -> f64 {
    match s {
        Statistic::HourlyMax => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Statistic::Rolling8hMeanMax => values
            .windows(WINDOW)
            .map(|w| w.iter().sum::<f64>() / WINDOW as f64)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

pub fn who_flag(record: &DailyProfileRecord) -> WhoVerdict {
    let Some(rule) = rule_for(record.pollutant) else {
        return WhoVerdict {
            flagged: false,
            violated: Vec::new(),
            statistic: None,
        };
    };
    let value = statistic(&record.values, rule.statistic);
    let flagged = value > rule.limit;
    WhoVerdict {
        flagged,
        violated: if flagged { vec![rule] } else { Vec::new() },
        statistic: Some(value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day(p: Pollutant, values: [f64; HOURS]) -> DailyProfileRecord {
        DailyProfileRecord {
            date: NaiveDate::from_ymd_opt(2021, 6, 1).unwrap(),
            pollutant: p,
            values,
            filled: Vec::new(),
        }
    }

    #[test]
    fn carbon_monoxide_eight_hour_mean() {
        assert!(!who_flag(&day(Pollutant::CO, [9.9; HOURS])).flagged);
        let v = who_flag(&day(Pollutant::CO, [10.1; HOURS]));
        assert!(v.flagged);
        assert_eq!(v.violated[0].statistic, Statistic::Rolling8hMeanMax);
        // a single hourly spike above 10 is diluted by its window
        let mut spike = [5.0; HOURS];
        spike[12] = 30.0;
        assert!(!who_flag(&day(Pollutant::CO, spike)).flagged);
    }

    #[test]
    fn ozone_hourly() {
        let mut v = [100.0; HOURS];
        v[13] = 240.0;
        assert!(!who_flag(&day(Pollutant::O3, v)).flagged);
        v[13] = 241.0;
        let verdict = who_flag(&day(Pollutant::O3, v));
        assert!(verdict.flagged);
        assert_eq!(verdict.violated[0].to_string(), "O3/240");
    }

    #[test]
    fn other_limits() {
        assert!(who_flag(&day(Pollutant::NO2, [400.5; HOURS])).flagged);
        assert!(!who_flag(&day(Pollutant::NO2, [400.0; HOURS])).flagged);
        assert!(who_flag(&day(Pollutant::SO2, [500.5; HOURS])).flagged);
        assert!(!who_flag(&day(Pollutant::SO2, [499.0; HOURS])).flagged);
    }

    #[test]
    fn nitric_oxide_never_flagged() {
        for level in [0.0, 10.0, 1e3, 1e9] {
            let v = who_flag(&day(Pollutant::NO, [level; HOURS]));
            assert!(!v.flagged && v.violated.is_empty() && v.statistic.is_none());
        }
    }

    proptest! {
        #[test]
        fn rolling_rule_matches_exhaustive_windows(values in prop::array::uniform24(0.0f64..20.0)) {
            let v = who_flag(&day(Pollutant::CO, values));
            let mut best = f64::NEG_INFINITY;
            for start in 0..=HOURS - WINDOW {
                let s: f64 = values[start..start + WINDOW].iter().sum();
                best = best.max(s / WINDOW as f64);
            }
            prop_assert!((v.statistic.unwrap() - best).abs() < 1e-12);
            prop_assert_eq!(v.flagged, best > 10.0);
        }
    }
}
