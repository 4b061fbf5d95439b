//! Recursive goal inference from observed patient steps.
//!
//! Each observation multiplies the belief, tempered by `1 - forgetting`, with
//! the one-step predictive density of the observed move under every goal's
//! motion model. Everything is computed in log-space and renormalized after
//! every update.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::predict::GpMixture;
use crate::room::Point2;

/// Normalized probabilities over goal ids.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentBelief {
    probs: BTreeMap<String, f64>,
}

impl IntentBelief {
    /// Validates and renormalizes the given probabilities.
    pub fn new<S: Into<String>>(probs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let probs: BTreeMap<String, f64> = probs.into_iter().map(|(k, v)| (k.into(), v)).collect();
        if probs.is_empty() {
            return Err(Error::Config("belief needs at least one goal".into()));
        }
        if probs.values().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::Config("belief probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.values().sum();
        if !(total > 0.0) {
            return Err(Error::Config("belief has no positive mass".into()));
        }
        Ok(Self {
            probs: probs.into_iter().map(|(k, v)| (k, v / total)).collect(),
        })
    }

    pub fn uniform<'a>(goals: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        Self::new(goals.into_iter().map(|g| (g, 1.0)))
    }

    pub fn get(&self, goal: &str) -> f64 {
        self.probs.get(goal).copied().unwrap_or(0.0)
    }

    /// Goals in ascending id order with their probabilities.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn goals(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most probable goal; exact ties go to the smallest id.
    pub fn map_goal(&self) -> &str {
        let mut best: Option<(&str, f64)> = None;
        for (g, p) in self.iter() {
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((g, p));
            }
        }
        best.expect("belief is never empty").0
    }
}

/// Update settings.
#[derive(Debug, Clone)]
pub struct IntentConfig {
    /// Exponent discount on the previous belief, in [0, 1).
    pub forgetting: f64,
    /// Returned when an update degenerates.
    pub prior: IntentBelief,
    /// Relative floor on unnormalized scores, in (0, 1e-3].
    pub prob_floor: f64,
}

impl IntentConfig {
    pub fn new(forgetting: f64, prior: IntentBelief, prob_floor: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&forgetting) {
            return Err(Error::Config(format!("intent.forgetting must be in [0, 1), got {forgetting}")));
        }
        if !(prob_floor > 0.0 && prob_floor <= 1e-3) {
            return Err(Error::Config(format!("intent.prob_floor must be in (0, 1e-3], got {prob_floor}")));
        }
        Ok(Self { forgetting, prior, prob_floor })
    }

    pub fn with_prior(prior: IntentBelief) -> Self {
        Self {
            forgetting: 0.1,
            prior,
            prob_floor: 1e-6,
        }
    }
}

/// Result of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentUpdate {
    pub belief: IntentBelief,
    /// Set when every score was non-finite and the prior was returned.
    pub degenerate: bool,
}

/// Bayes update from per-goal log likelihoods of the latest observation.
pub fn update_with_log_likelihoods(
    belief: &IntentBelief,
    log_likelihoods: &BTreeMap<String, f64>,
    cfg: &IntentConfig,
) -> IntentUpdate {
    let tempered = 1.0 - cfg.forgetting;
    let scores: Vec<(&str, f64)> = belief
        .iter()
        .map(|(g, p)| {
            let ll = log_likelihoods.get(g).copied().unwrap_or(f64::NEG_INFINITY);
            let prior_term = if p > 0.0 { tempered * p.ln() } else { f64::NEG_INFINITY };
            let s = ll + prior_term;
            (g, if s.is_nan() { f64::NEG_INFINITY } else { s })
        })
        .collect();
    let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return IntentUpdate {
            belief: cfg.prior.clone(),
            degenerate: true,
        };
    }
    let floor = cfg.prob_floor.ln();
    let unnorm: Vec<(&str, f64)> = scores
        .iter()
        .map(|(g, s)| (*g, ((s - max).max(floor)).exp()))
        .collect();
    let total: f64 = unnorm.iter().map(|(_, v)| v).sum();
    IntentUpdate {
        belief: IntentBelief {
            probs: unnorm.into_iter().map(|(g, v)| (g.to_string(), v / total)).collect(),
        },
        degenerate: false,
    }
}

/// Observes the move `prev -> curr` and updates the goal belief.
pub fn update(
    belief: &IntentBelief,
    prev: &Point2,
    curr: &Point2,
    mixture: &GpMixture,
    cfg: &IntentConfig,
) -> Result<IntentUpdate> {
    let mut lls = BTreeMap::new();
    for g in belief.goals() {
        lls.insert(g.to_string(), mixture.models(g)?.log_likelihood(prev, curr));
    }
    Ok(update_with_log_likelihoods(belief, &lls, cfg))
}
