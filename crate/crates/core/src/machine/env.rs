use std::collections::BTreeMap;

use super::config::SignalSpec;
use crate::rng::{SimRng, ENVIRONMENT_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorEntry {
    pub tick: u64,
    pub actuator: String,
    pub command: f64,
}

/// Named real-valued signals plus the log of actuator commands. A signal's
/// value at tick t depends only on its value at t - 1, commands logged
/// before t and the environment's own random stream.
#[derive(Debug, Clone)]
pub struct Environment {
    specs: Vec<SignalSpec>,
    values: Vec<f64>,
    log: Vec<ActuatorEntry>,
    latest: BTreeMap<String, f64>,
    rng: SimRng,
    started: bool,
}

impl Environment {
    pub fn new(specs: Vec<SignalSpec>, seed: u64) -> Self {
        let values = specs.iter().map(initial_value).collect();
        Self {
            specs,
            values,
            log: Vec::new(),
            latest: BTreeMap::new(),
            rng: SimRng::with_stream(seed, ENVIRONMENT_STREAM),
            started: false,
        }
    }

    /// Moves the state to `tick`. Random signals draw in declaration order.
    pub fn advance(&mut self, tick: u64) {
        let first = !self.started;
        self.started = true;
        for (spec, value) in self.specs.iter().zip(self.values.iter_mut()) {
            *value = match spec {
                SignalSpec::Constant { value, .. } => *value,
                SignalSpec::Schedule { initial, changes, .. } => changes
                    .iter()
                    .filter(|c| c.tick <= tick)
                    .max_by_key(|c| c.tick)
                    .map_or(*initial, |c| c.value),
                SignalSpec::Periodic { values, period, .. } => values[((tick / period) % values.len() as u64) as usize],
                SignalSpec::RandomJump { choices, p, .. } => {
                    if !first && self.rng.chance(*p) {
                        choices[self.rng.below(choices.len())]
                    } else {
                        *value
                    }
                }
                SignalSpec::Pulse { at, value, base, .. } => {
                    if at.contains(&tick) {
                        *value
                    } else {
                        *base
                    }
                }
                SignalSpec::Actuated { actuator, .. } => self.latest.get(actuator).copied().unwrap_or(*value),
            };
        }
    }

    pub fn command(&mut self, tick: u64, actuator: &str, command: f64) {
        self.latest.insert(actuator.to_owned(), command);
        self.log.push(ActuatorEntry { tick, actuator: actuator.to_owned(), command });
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.specs.iter().position(|s| s.name() == name).map(|i| self.values[i])
    }

    pub fn signals(&self) -> impl Iterator<Item = (&str, f64)> {
        self.specs.iter().map(|s| s.name()).zip(self.values.iter().copied())
    }

    pub fn actuator_log(&self) -> &[ActuatorEntry] {
        &self.log
    }
}

fn initial_value(spec: &SignalSpec) -> f64 {
    match spec {
        SignalSpec::Constant { value, .. } => *value,
        SignalSpec::Schedule { initial, .. } | SignalSpec::RandomJump { initial, .. } => *initial,
        SignalSpec::Periodic { values, .. } => values[0],
        SignalSpec::Pulse { base, .. } => *base,
        SignalSpec::Actuated { initial, .. } => *initial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::config::ScheduledValue;

    #[test]
    fn schedule_and_pulse() {
        let mut env = Environment::new(
            vec![
                SignalSpec::Schedule {
                    name: "s".into(),
                    initial: 1.0,
                    changes: vec![ScheduledValue { tick: 3, value: 2.0 }],
                },
                SignalSpec::Pulse { name: "p".into(), at: vec![2], value: 9.0, base: 0.0 },
            ],
            0,
        );
        let mut seen = Vec::new();
        for t in 0..5 {
            env.advance(t);
            seen.push((env.value("s").unwrap(), env.value("p").unwrap()));
        }
        assert_eq!(seen, [(1.0, 0.0), (1.0, 0.0), (1.0, 9.0), (2.0, 0.0), (2.0, 0.0)]);
    }

    #[test]
    fn actuated_follows_commands_one_tick_later() {
        let mut env = Environment::new(
            vec![SignalSpec::Actuated { name: "arm".into(), actuator: "arm".into(), initial: 0.0 }],
            0,
        );
        env.advance(0);
        env.command(0, "arm", 5.0);
        assert_eq!(env.value("arm"), Some(0.0));
        env.advance(1);
        assert_eq!(env.value("arm"), Some(5.0));
        assert_eq!(env.actuator_log().len(), 1);
    }

    #[test]
    fn random_jump_is_seeded() {
        let spec = SignalSpec::RandomJump { name: "b".into(), initial: 0.0, choices: vec![0.0, 1.0, 2.0], p: 0.5 };
        let run = |seed| {
            let mut env = Environment::new(vec![spec.clone()], seed);
            (0..50)
                .map(|t| {
                    env.advance(t);
                    env.value("b").unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
        assert_eq!(run(1)[0], 0.0);
    }
}
