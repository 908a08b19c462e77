//! Timestamped run perturbations: demand scaling, driver breaks, and
//! congestion switching.

use thiserror::Error;

use crate::Secs;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    MalformedScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioEvent {
    /// Requests are thinned or duplicated to hit this rate multiplier.
    DemandMultiplier(f64),
    /// Every 30 simulated minutes, this fraction of the idle vehicles takes
    /// a 30-minute break.
    BreakFraction(f64),
    /// Switches the oracle's congestion profile on or off.
    Congestion(bool),
}

#[derive(Debug, Clone, Default)]
pub struct Scenario {
    /// (time, event), sorted by time.
    pub events: Vec<(Secs, ScenarioEvent)>,
}

impl Scenario {
    pub fn empty() -> Scenario {
        Scenario::default()
    }

    pub fn new(mut events: Vec<(Secs, ScenarioEvent)>) -> Scenario {
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        Scenario { events }
    }

    /// Parses `time_s,event,value` lines. Events: `demand_multiplier` and
    /// `break_fraction` take a number, `congestion` takes `on` or `off`.
    pub fn parse_csv(text: &str) -> Result<Scenario, ScenarioError> {
        let mut events = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("time") {
                continue;
            }
            let bad = |msg: &str| {
                ScenarioError::MalformedScenario(format!("line {}: {msg}", idx + 1))
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad("expected time_s,event,value"));
            }
            let time: Secs = fields[0].parse().map_err(|_| bad("bad time"))?;
            let event = match fields[1] {
                "demand_multiplier" => {
                    let m: f64 = fields[2].parse().map_err(|_| bad("bad multiplier"))?;
                    if !(m >= 0.0) || !m.is_finite() {
                        return Err(bad("multiplier must be finite and nonnegative"));
                    }
                    ScenarioEvent::DemandMultiplier(m)
                }
                "break_fraction" => {
                    let f: f64 = fields[2].parse().map_err(|_| bad("bad fraction"))?;
                    if !(0.0..=1.0).contains(&f) {
                        return Err(bad("fraction must be in [0, 1]"));
                    }
                    ScenarioEvent::BreakFraction(f)
                }
                "congestion" => match fields[2] {
                    "on" => ScenarioEvent::Congestion(true),
                    "off" => ScenarioEvent::Congestion(false),
                    _ => return Err(bad("congestion value must be on or off")),
                },
                other => return Err(bad(&format!("unknown event '{other}'"))),
            };
            events.push((time, event));
        }
        Ok(Scenario::new(events))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_sorts_events() {
        let s = Scenario::parse_csv(
            "time_s,event,value\n7200,congestion,on\n0,demand_multiplier,1.4\n1800,break_fraction,0.2\n",
        )
        .unwrap();
        assert_eq!(s.events.len(), 3);
        assert_eq!(s.events[0], (0.0, ScenarioEvent::DemandMultiplier(1.4)));
        assert_eq!(s.events[1], (1800.0, ScenarioEvent::BreakFraction(0.2)));
        assert_eq!(s.events[2], (7200.0, ScenarioEvent::Congestion(true)));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Scenario::parse_csv("0,demand_multiplier").is_err());
        assert!(Scenario::parse_csv("0,demand_multiplier,-1").is_err());
        assert!(Scenario::parse_csv("0,break_fraction,1.5").is_err());
        assert!(Scenario::parse_csv("0,congestion,maybe").is_err());
        assert!(Scenario::parse_csv("x,congestion,on").is_err());
        assert!(Scenario::parse_csv("0,rainfall,3").is_err());
    }
}
