//! Three-valued verdicts with witnesses and a short trace.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Holds,
    Fails,
    Undetermined,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Holds => "Holds",
            Outcome::Fails => "Fails",
            Outcome::Undetermined => "Undetermined",
        })
    }
}

/// Named numeric evidence, e.g. the `(μ, C)` found for one probe `m`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub values: BTreeMap<String, f64>,
}

impl Witness {
    pub fn new(label: impl Into<String>) -> Self {
        Witness {
            label: label.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Requested horizon.
    pub horizon: usize,
    /// Horizon actually inspected after overflow truncation.
    pub effective_horizon: usize,
    pub witnesses: Vec<Witness>,
    pub trace: Vec<String>,
}

impl Verdict {
    pub fn new(outcome: Outcome, horizon: usize) -> Self {
        Verdict {
            outcome,
            horizon,
            effective_horizon: horizon,
            witnesses: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn fails(&self) -> bool {
        self.outcome == Outcome::Fails
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.trace.push(line.into());
    }

    pub fn witness(&self, label: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.label == label)
    }

    pub fn truncate_to(&mut self, inspected: usize) {
        if inspected < self.effective_horizon {
            self.effective_horizon = inspected;
        }
    }
}

/// Combines per-probe outcomes: any `Fails` wins, then any `Undetermined`.
pub fn all_of<I: IntoIterator<Item = Outcome>>(outcomes: I) -> Outcome {
    let mut acc = Outcome::Holds;
    for o in outcomes {
        match o {
            Outcome::Fails => return Outcome::Fails,
            Outcome::Undetermined => acc = Outcome::Undetermined,
            Outcome::Holds => {}
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_of_prefers_failure() {
        use Outcome::*;
        assert_eq!(all_of([Holds, Holds]), Holds);
        assert_eq!(all_of([Holds, Undetermined]), Undetermined);
        assert_eq!(all_of([Undetermined, Fails]), Fails);
        assert_eq!(all_of(std::iter::empty()), Holds);
    }

    #[test]
    fn verdict_round_trips_through_json() {
        let mut v = Verdict::new(Outcome::Holds, 100);
        v.witnesses.push(Witness::new("m=1").with("mu", 4.0));
        v.note("ok");
        let back: Verdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.witness("m=1").unwrap().get("mu"), Some(4.0));
    }
}
