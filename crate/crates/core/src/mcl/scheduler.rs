//! Multi-rate phase scheduling on a (log or wall) clock.

use super::MclConfig;

/// Slack for timestamps that land a rounding error short of a period.
const CLOCK_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DuePhases {
    pub predict: bool,
    pub correct: bool,
    pub reseed: bool,
}

impl DuePhases {
    pub fn is_empty(&self) -> bool {
        !(self.predict || self.correct || self.reseed)
    }
}

/// Decides which filter phases run at each clock tick.
///
/// Each phase fires on the first tick at or after its next due time, then
/// its due time advances by whole periods, so a 10 ms log tick with rates
/// 100/10/0.3 Hz runs prediction every tick, correction every 10th tick and
/// reseed roughly every 333rd.
#[derive(Debug, Clone)]
pub struct StepScheduler {
    periods: [f64; 3],
    next_due: Option<[f64; 3]>,
    last_clock: Option<f64>,
}

impl StepScheduler {
    pub fn new(config: &MclConfig) -> Self {
        Self {
            periods: [
                1.0 / config.prediction_rate,
                1.0 / config.correction_rate,
                1.0 / config.reseed_rate,
            ],
            next_due: None,
            last_clock: None,
        }
    }

    pub fn due(&mut self, clock: f64) -> DuePhases {
        if let Some(last) = self.last_clock {
            if !(clock > last) {
                return DuePhases::default();
            }
        }
        self.last_clock = Some(clock);
        let next = self.next_due.get_or_insert([clock; 3]);
        let mut fired = [false; 3];
        for (i, f) in fired.iter_mut().enumerate() {
            if clock + CLOCK_EPS >= next[i] {
                *f = true;
                while next[i] <= clock + CLOCK_EPS {
                    next[i] += self.periods[i];
                }
            }
        }
        DuePhases {
            predict: fired[0],
            correct: fired[1],
            reseed: fired[2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_tick_runs_everything() {
        let mut s = StepScheduler::new(&MclConfig::default());
        assert_eq!(
            s.due(0.0),
            DuePhases {
                predict: true,
                correct: true,
                reseed: true
            }
        );
    }

    #[test]
    fn repeated_timestamp_runs_nothing() {
        let mut s = StepScheduler::new(&MclConfig::default());
        s.due(1.0);
        assert!(s.due(1.0).is_empty());
        assert!(s.due(0.5).is_empty());
    }

    #[test]
    fn default_rates_on_ten_ms_ticks() {
        let mut s = StepScheduler::new(&MclConfig::default());
        let mut predicts = Vec::new();
        let mut corrects = Vec::new();
        let mut reseeds = Vec::new();
        for tick in 0..1001 {
            let due = s.due(tick as f64 * 0.01);
            if due.predict {
                predicts.push(tick);
            }
            if due.correct {
                corrects.push(tick);
            }
            if due.reseed {
                reseeds.push(tick);
            }
        }
        assert_eq!(predicts.len(), 1001);
        assert_eq!(corrects, (0..=1000).step_by(10).collect::<Vec<_>>());
        assert_eq!(reseeds, vec![0, 334, 667, 1000]);
    }
}
