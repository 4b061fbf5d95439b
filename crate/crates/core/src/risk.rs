//! Risk measures on weighted empirical cost distributions.
//!
//! Tail levels are expressed as `q`, the probability mass of the worst
//! (highest-cost) outcomes: `cvar(q)` averages the worst `q` of the mass and
//! `var(q)` is the smallest cost exceeded with probability at most `q`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight-sum slack used by the threshold comparisons in [`EmpiricalDist::var`].
pub const WEIGHT_TOL: f64 = 1e-12;

/// Finite costs with nonnegative weights that sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Config(format!(
                "distribution needs matching nonempty values/weights, got {}/{}",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("distribution values must be finite".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("distribution weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { values, weights })
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("distribution has no positive weight".into()));
        }
        Self::new(values, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        let n = values.len();
        Self::new(values, vec![w; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds `c` to every value.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Multiplies every value by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn expected(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Largest value carrying positive weight.
    pub fn worst_case(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn sorted_desc(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }

    /// Smallest attained value `z` with `P[Z > z] <= q`.
    pub fn var(&self, q: f64) -> f64 {
        assert!(q > 0.0 && q <= 1.0, "tail level must lie in (0, 1], got {q}");
        let pairs = self.sorted_desc();
        // Walk down from the top; `above` is the mass strictly greater than the
        // current group of equal values.
        let mut above = 0.0;
        let mut answer = pairs[0].0;
        let mut i = 0;
        while i < pairs.len() {
            let z = pairs[i].0;
            if above > q + WEIGHT_TOL {
                break;
            }
            answer = z;
            while i < pairs.len() && pairs[i].0 == z {
                above += pairs[i].1;
                i += 1;
            }
        }
        answer
    }

    /// Mean of the worst `q` probability mass, splitting the boundary atom.
    pub fn cvar(&self, q: f64) -> f64 {
        assert!(q > 0.0 && q <= 1.0, "tail level must lie in (0, 1], got {q}");
        let mut remaining = q;
        let mut acc = 0.0;
        for (z, w) in self.sorted_desc() {
            let take = w.min(remaining);
            acc += take * z;
            remaining -= take;
            if remaining <= 0.0 {
                break;
            }
        }
        acc / (q - remaining)
    }

    /// `expected + beta * cvar(tail)`.
    pub fn combined(&self, cfg: &RiskConfig) -> f64 {
        self.expected() + cfg.beta * self.cvar(cfg.tail)
    }
}

/// CVaR tail level and its weight in the combined metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    /// Fraction of worst outcomes averaged by CVaR, in (0, 1].
    pub tail: f64,
    /// Weight of the CVaR term, >= 0.
    pub beta: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self { tail: 0.1, beta: 1.0 }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail > 0.0 && self.tail <= 1.0) {
            return Err(Error::Config(format!("risk.tail must be in (0, 1], got {}", self.tail)));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("risk.beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Mean and CVaR of equally weighted samples without building an
/// [`EmpiricalDist`]. Reorders `values`.
pub fn uniform_mean_cvar(values: &mut [f64], q: f64) -> (f64, f64) {
    let n = values.len();
    debug_assert!(n > 0);
    let mean = values.iter().sum::<f64>() / n as f64;
    let mass = q * n as f64;
    // Number of atoms touched by the tail; the last one may be partial.
    let m = ((mass - 1e-9).ceil() as usize).clamp(1, n);
    if m < n {
        values.select_nth_unstable_by(m - 1, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    }
    let top = &mut values[..m];
    top.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let full: f64 = top[..m - 1].iter().sum();
    let frac = (mass - (m - 1) as f64).min(1.0);
    let cvar = (full + frac * top[m - 1]) / ((m - 1) as f64 + frac);
    (mean, cvar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_to_ten() -> EmpiricalDist {
        EmpiricalDist::uniform((1..=10).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn expected_values() {
        assert!((EmpiricalDist::uniform(vec![3.0; 7]).unwrap().expected() - 3.0).abs() < 1e-15);
        let d = EmpiricalDist::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.expected(), 0.5);
    }

    #[test]
    fn worst_case_ignores_zero_weight() {
        assert_eq!(EmpiricalDist::uniform(vec![2.0; 3]).unwrap().worst_case(), 2.0);
        assert_eq!(EmpiricalDist::uniform(vec![1.0, 5.0, 3.0]).unwrap().worst_case(), 5.0);
        let d = EmpiricalDist::new(vec![1.0, 99.0, 2.0], vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(d.worst_case(), 2.0);
    }

    #[test]
    fn var_examples() {
        // P[Z > 8] = 0.2 while P[Z > 7] = 0.3.
        assert_eq!(one_to_ten().var(0.2), 8.0);
        assert_eq!(one_to_ten().var(1.0), 1.0);
        assert_eq!(EmpiricalDist::uniform(vec![4.0; 5]).unwrap().var(0.3), 4.0);
    }

    #[test]
    fn cvar_examples() {
        assert!((one_to_ten().cvar(0.2) - 9.5).abs() < 1e-12);
        assert_eq!(EmpiricalDist::uniform(vec![4.0; 5]).unwrap().cvar(0.05), 4.0);
        let d = one_to_ten();
        assert!((d.cvar(1.0) - d.expected()).abs() < 1e-12);
        // Half of the top atom plus nothing else.
        assert!((d.cvar(0.05) - 10.0).abs() < 1e-12);
        // 0.1 of 10, 0.05 of 9.
        assert!((d.cvar(0.15) - (10.0 * 0.1 + 9.0 * 0.05) / 0.15).abs() < 1e-12);
    }

    #[test]
    fn combined_examples() {
        let d = one_to_ten();
        assert_eq!(d.combined(&RiskConfig { tail: 0.2, beta: 0.0 }), d.expected());
        assert!((d.combined(&RiskConfig { tail: 0.2, beta: 1.0 }) - 15.0).abs() < 1e-12);
        let c = EmpiricalDist::uniform(vec![0.4; 6]).unwrap();
        assert!((c.combined(&RiskConfig { tail: 0.1, beta: 2.5 }) - 3.5 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(EmpiricalDist::new(vec![], vec![]).is_err());
        assert!(EmpiricalDist::new(vec![1.0], vec![0.5]).is_err());
        assert!(EmpiricalDist::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(EmpiricalDist::new(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(RiskConfig { tail: 0.0, beta: 1.0 }.validate().is_err());
        assert!(RiskConfig { tail: 0.5, beta: -1.0 }.validate().is_err());
    }

    fn dist() -> impl Strategy<Value = EmpiricalDist> {
        proptest::collection::vec((-50.0f64..50.0, 0.0f64..1.0), 1..40).prop_filter_map(
            "positive mass",
            |pairs| {
                let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                EmpiricalDist::normalized(v, w).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn ordering_chain(d in dist(), q in 0.01f64..=1.0) {
            let c = d.cvar(q);
            prop_assert!(d.expected() <= c + 1e-9);
            prop_assert!(c <= d.worst_case() + 1e-9);
            prop_assert!(d.var(q) <= d.worst_case());
        }

        #[test]
        fn cvar_nonincreasing_in_tail(d in dist(), a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(d.cvar(lo) >= d.cvar(hi) - 1e-9);
        }

        #[test]
        fn cvar_coherence(d in dist(), q in 0.01f64..=1.0, c in -10.0f64..10.0, s in 0.1f64..10.0) {
            let base = d.cvar(q);
            prop_assert!((d.shifted(c).cvar(q) - (base + c)).abs() < 1e-9);
            prop_assert!((d.scaled(s).cvar(q) - s * base).abs() < 1e-9 * (1.0 + base.abs() * s));
        }

        #[test]
        fn duplicated_samples_change_nothing(d in dist(), q in 0.01f64..=1.0) {
            let values: Vec<f64> = d.values().iter().chain(d.values()).copied().collect();
            let weights: Vec<f64> = d.weights().iter().chain(d.weights()).map(|w| w / 2.0).collect();
            let dup = EmpiricalDist::new(values, weights).unwrap();
            prop_assert!((dup.cvar(q) - d.cvar(q)).abs() < 1e-12 * (1.0 + d.cvar(q).abs()));
            prop_assert_eq!(dup.var(q), d.var(q));
        }

        #[test]
        fn uniform_fast_path_matches(values in proptest::collection::vec(0.0f64..1.0, 1..80), q in 0.01f64..=1.0) {
            let d = EmpiricalDist::uniform(values.clone()).unwrap();
            let mut scratch = values;
            let (mean, cvar) = uniform_mean_cvar(&mut scratch, q);
            prop_assert!((mean - d.expected()).abs() < 1e-12);
            prop_assert!((cvar - d.cvar(q)).abs() < 1e-12);
        }
    }
}
