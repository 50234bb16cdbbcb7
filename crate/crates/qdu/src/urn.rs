//! Ellsberg/Machina-style urn experiments: colors, count constraints,
//! acts as payoff rows, utility functions and classical expected utility.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UrnError {
    #[error("invalid urn: {0}")]
    InvalidUrn(String),
    #[error("act '{act}' colors do not match: {detail}")]
    ColorMismatch { act: String, detail: String },
    #[error("payoff {0} is negative")]
    NegativePayoff(f64),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid utility parameters: {0}")]
    InvalidUtility(String),
    #[error("unknown act '{0}'")]
    UnknownAct(String),
}

pub type Result<T> = std::result::Result<T, UrnError>;

/// A subset of colors whose joint ball count is known while the split is not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownGroup {
    pub colors: Vec<String>,
    pub total: u32,
}

/// Urn composition: which counts are known exactly and which only in groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnSpec {
    pub colors: Vec<String>,
    pub total: u32,
    #[serde(default)]
    pub known_counts: BTreeMap<String, u32>,
    #[serde(default)]
    pub unknown_groups: Vec<UnknownGroup>,
}

impl UrnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(UrnError::InvalidUrn("total must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for c in self.known_counts.keys() {
            if !seen.insert(c.clone()) {
                return Err(UrnError::InvalidUrn(format!("color '{c}' repeated")));
            }
        }
        for g in &self.unknown_groups {
            for c in &g.colors {
                if !seen.insert(c.clone()) {
                    return Err(UrnError::InvalidUrn(format!(
                        "color '{c}' appears in more than one constraint"
                    )));
                }
            }
        }
        let declared: BTreeSet<_> = self.colors.iter().cloned().collect();
        if declared.len() != self.colors.len() {
            return Err(UrnError::InvalidUrn("duplicate color label".into()));
        }
        if seen != declared {
            return Err(UrnError::InvalidUrn(
                "every color must appear in exactly one of known_counts or an unknown group"
                    .into(),
            ));
        }
        let sum: u32 = self.known_counts.values().sum::<u32>()
            + self.unknown_groups.iter().map(|g| g.total).sum::<u32>();
        if sum != self.total {
            return Err(UrnError::InvalidUrn(format!(
                "known counts plus group totals ({sum}) differ from total ({})",
                self.total
            )));
        }
        Ok(())
    }

    /// Checks a probability vector against the urn's known-count constraints.
    pub fn check_probability(&self, p: &ProbabilityVector) -> Result<()> {
        p.validate()?;
        let declared: BTreeSet<_> = self.colors.iter().cloned().collect();
        let given: BTreeSet<_> = p.entries.keys().cloned().collect();
        if declared != given {
            return Err(UrnError::InvalidProbability(
                "probability colors differ from urn colors".into(),
            ));
        }
        for (c, &n) in &self.known_counts {
            let expected = n as f64 / self.total as f64;
            if (p.entries[c] - expected).abs() > 1e-9 {
                return Err(UrnError::InvalidProbability(format!(
                    "p({c}) = {} but the urn fixes it at {expected}",
                    p.entries[c]
                )));
            }
        }
        for g in &self.unknown_groups {
            let mass: f64 = g.colors.iter().map(|c| p.entries[c]).sum();
            let expected = g.total as f64 / self.total as f64;
            if (mass - expected).abs() > 1e-9 {
                return Err(UrnError::InvalidProbability(format!(
                    "group {:?} mass {mass} differs from {expected}",
                    g.colors
                )));
            }
        }
        Ok(())
    }
}

/// An act: a payoff for every color in the urn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Act {
    pub name: String,
    pub payoffs: BTreeMap<String, f64>,
}

impl Act {
    pub fn new(name: &str, payoffs: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            payoffs: payoffs
                .iter()
                .map(|(c, x)| (c.to_string(), *x))
                .collect(),
        }
    }

    pub fn payoff(&self, color: &str) -> Option<f64> {
        self.payoffs.get(color).copied()
    }
}

/// Bernoulli utility over money, normalized so u(0) = 0 and u strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum UtilityFunction {
    Linear,
    Power { alpha: f64 },
    Exponential { lambda: f64 },
}

impl UtilityFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilityFunction::Linear => Ok(()),
            UtilityFunction::Power { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(UrnError::InvalidUtility(format!(
                        "power exponent {alpha} outside (0, 1]"
                    )))
                }
            }
            UtilityFunction::Exponential { lambda } => {
                if lambda > 0.0 {
                    Ok(())
                } else {
                    Err(UrnError::InvalidUtility(format!(
                        "exponential rate {lambda} must be positive"
                    )))
                }
            }
        }
    }
}

/// u(x) for non-negative money x.
pub fn utility_eval(u: &UtilityFunction, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(UrnError::NegativePayoff(x));
    }
    u.validate()?;
    Ok(match *u {
        UtilityFunction::Linear => x,
        UtilityFunction::Power { alpha } => x.powf(alpha),
        UtilityFunction::Exponential { lambda } => 1.0 - (-lambda * x).exp(),
    })
}

/// Probability assignment over the urn colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub entries: BTreeMap<String, f64>,
}

impl ProbabilityVector {
    pub fn new(entries: &[(&str, f64)]) -> Result<Self> {
        let p = Self {
            entries: entries
                .iter()
                .map(|(c, x)| (c.to_string(), *x))
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sum = 0.0;
        for (c, &x) in &self.entries {
            if x.is_nan() || x < 0.0 {
                return Err(UrnError::InvalidProbability(format!("p({c}) = {x}")));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(UrnError::InvalidProbability(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn get(&self, color: &str) -> Option<f64> {
        self.entries.get(color).copied()
    }
}

/// Observed joint choice counts over the two Ellsberg bets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedCounts {
    pub f1f3: u32,
    pub f1f4: u32,
    pub f2f3: u32,
    pub f2f4: u32,
}

impl ObservedCounts {
    pub fn total(&self) -> u32 {
        self.f1f3 + self.f1f4 + self.f2f3 + self.f2f4
    }
}

/// A complete urn experiment: urn, acts, utility and optional observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnExperiment {
    pub urn: UrnSpec,
    pub acts: Vec<Act>,
    pub utility: UtilityFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<ObservedCounts>,
}

impl UrnExperiment {
    pub fn validate(&self) -> Result<()> {
        self.urn.validate()?;
        self.utility.validate()?;
        let colors: BTreeSet<_> = self.urn.colors.iter().cloned().collect();
        for act in &self.acts {
            let act_colors: BTreeSet<_> = act.payoffs.keys().cloned().collect();
            if act_colors != colors {
                return Err(UrnError::ColorMismatch {
                    act: act.name.clone(),
                    detail: "payoff row must cover exactly the urn colors".into(),
                });
            }
            for &x in act.payoffs.values() {
                if x < 0.0 {
                    return Err(UrnError::NegativePayoff(x));
                }
            }
        }
        Ok(())
    }

    pub fn act(&self, name: &str) -> Result<&Act> {
        self.acts
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| UrnError::UnknownAct(name.to_string()))
    }
}

/// E_p u(f) = Σ_c p_c·u(payoff_c).
pub fn classical_expected_utility(
    act: &Act,
    p: &ProbabilityVector,
    u: &UtilityFunction,
) -> Result<f64> {
    let act_colors: BTreeSet<_> = act.payoffs.keys().collect();
    let p_colors: BTreeSet<_> = p.entries.keys().collect();
    if act_colors != p_colors {
        return Err(UrnError::ColorMismatch {
            act: act.name.clone(),
            detail: "probability vector colors differ from act colors".into(),
        });
    }
    let mut total = 0.0;
    for (c, &x) in &act.payoffs {
        total += p.entries[c] * utility_eval(u, x)?;
    }
    Ok(total)
}

/// The canonical three-color Ellsberg urn: 30 red balls known, 60 balls
/// split between yellow and black in unknown proportion, $12 bets, and the
/// observed 59-participant joint choice counts.
pub fn ellsberg_urn() -> UrnExperiment {
    let exp = UrnExperiment {
        urn: UrnSpec {
            colors: vec!["red".into(), "yellow".into(), "black".into()],
            total: 90,
            known_counts: [("red".to_string(), 30)].into_iter().collect(),
            unknown_groups: vec![UnknownGroup {
                colors: vec!["yellow".into(), "black".into()],
                total: 60,
            }],
        },
        acts: vec![
            Act::new("f1", &[("red", 12.0), ("yellow", 0.0), ("black", 0.0)]),
            Act::new("f2", &[("red", 0.0), ("yellow", 0.0), ("black", 12.0)]),
            Act::new("f3", &[("red", 12.0), ("yellow", 12.0), ("black", 0.0)]),
            Act::new("f4", &[("red", 0.0), ("yellow", 12.0), ("black", 12.0)]),
        ],
        utility: UtilityFunction::Linear,
        observed: Some(ObservedCounts {
            f1f3: 6,
            f1f4: 34,
            f2f3: 12,
            f2f4: 7,
        }),
    };
    debug_assert!(exp.validate().is_ok());
    exp
}

/// The four-color Machina reflection urn: 20 balls, 10 red-or-yellow and
/// 10 black-or-green, with the lower-tail-shift payoff rows.
pub fn machina_urn() -> UrnExperiment {
    let exp = UrnExperiment {
        urn: UrnSpec {
            colors: vec![
                "red".into(),
                "yellow".into(),
                "black".into(),
                "green".into(),
            ],
            total: 20,
            known_counts: BTreeMap::new(),
            unknown_groups: vec![
                UnknownGroup {
                    colors: vec!["red".into(), "yellow".into()],
                    total: 10,
                },
                UnknownGroup {
                    colors: vec!["black".into(), "green".into()],
                    total: 10,
                },
            ],
        },
        acts: vec![
            Act::new(
                "f1",
                &[
                    ("red", 0.0),
                    ("yellow", 50.0),
                    ("black", 25.0),
                    ("green", 25.0),
                ],
            ),
            Act::new(
                "f2",
                &[
                    ("red", 0.0),
                    ("yellow", 25.0),
                    ("black", 50.0),
                    ("green", 25.0),
                ],
            ),
            Act::new(
                "f3",
                &[
                    ("red", 25.0),
                    ("yellow", 50.0),
                    ("black", 25.0),
                    ("green", 0.0),
                ],
            ),
            Act::new(
                "f4",
                &[
                    ("red", 25.0),
                    ("yellow", 25.0),
                    ("black", 50.0),
                    ("green", 0.0),
                ],
            ),
        ],
        utility: UtilityFunction::Linear,
        observed: None,
    };
    debug_assert!(exp.validate().is_ok());
    exp
}
