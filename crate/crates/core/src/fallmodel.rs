//! Fall-score surrogate.
//!
//! The unaided score is a rescaled logistic of the distance to the nearest
//! external support: zero at a support, one at or beyond `d_max`. Holding the
//! walker scales the score by `aided_scale`, but never below `aided_floor`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::{Point2, RoomLayout, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FallParams {
    /// Support distance (m) at which the unaided score saturates at 1.
    pub d_max: f64,
    /// Logistic slope over the normalized distance `d / d_max`.
    pub steepness: f64,
    /// Multiplier applied while the patient holds the walker.
    pub aided_scale: f64,
    /// Lowest score reachable with the walker.
    pub aided_floor: f64,
}

impl Default for FallParams {
    fn default() -> Self {
        Self {
            d_max: 2.0,
            steepness: 6.0,
            aided_scale: 0.3,
            aided_floor: 0.05,
        }
    }
}

impl FallParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0) || !self.d_max.is_finite() {
            return Err(Error::Config(format!("fall.d_max must be positive, got {}", self.d_max)));
        }
        if !(self.steepness > 0.0) || !self.steepness.is_finite() {
            return Err(Error::Config(format!("fall.steepness must be positive, got {}", self.steepness)));
        }
        if !(0.0 <= self.aided_floor && self.aided_floor <= self.aided_scale && self.aided_scale <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= fall.aided_floor ({}) <= fall.aided_scale ({}) <= 1",
                self.aided_floor, self.aided_scale
            )));
        }
        Ok(())
    }

    /// Unaided score as a function of support distance.
    pub fn score_at_distance(&self, d: f64) -> f64 {
        let u = (d / self.d_max).clamp(0.0, 1.0);
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let lo = sigmoid(-0.5 * self.steepness);
        let hi = sigmoid(0.5 * self.steepness);
        ((sigmoid(self.steepness * (u - 0.5)) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Aided score given the unaided one.
    pub fn aid(&self, unaided: f64) -> f64 {
        self.aided_floor.max(self.aided_scale * unaided)
    }
}

pub fn score_unaided(p: &Point2, layout: &RoomLayout, params: &FallParams) -> f64 {
    params.score_at_distance(layout.distance_to_nearest_support(p, params.d_max))
}

pub fn score_aided(p: &Point2, layout: &RoomLayout, params: &FallParams) -> f64 {
    params.aid(score_unaided(p, layout, params))
}

/// Per-step scores with the walker taken at step `intervention`: steps before
/// it are unaided, the rest aided. `intervention == traj.len()` means never.
pub fn trajectory_scores(
    traj: &Trajectory,
    intervention: usize,
    layout: &RoomLayout,
    params: &FallParams,
) -> Vec<f64> {
    assert!(intervention <= traj.len(), "intervention index past the trajectory end");
    traj.states
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let s = score_unaided(p, layout, params);
            if t < intervention {
                s
            } else {
                params.aid(s)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::{Goal, Rect};
    use proptest::prelude::*;

    fn layout() -> RoomLayout {
        RoomLayout::new(
            Rect::new(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)),
            vec![],
            vec![Point2::new(1.0, 1.0)],
            vec![Goal { id: "g".into(), at: Point2::new(5.0, 5.0) }],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn unaided_endpoints_and_midpoint() {
        let p = FallParams::default();
        let l = layout();
        assert_eq!(score_unaided(&Point2::new(1.0, 1.0), &l, &p), 0.0);
        assert_eq!(score_unaided(&Point2::new(1.0, 3.0), &l, &p), 1.0);
        assert_eq!(score_unaided(&Point2::new(9.0, 9.0), &l, &p), 1.0);
        let mid = score_unaided(&Point2::new(2.0, 1.0), &l, &p);
        assert!((mid - 0.5).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn aided_cases() {
        let p = FallParams { aided_scale: 0.3, aided_floor: 0.05, ..FallParams::default() };
        assert!((p.aid(1.0) - 0.3).abs() < 1e-15);
        assert_eq!(p.aid(0.0), 0.05);
        let identity = FallParams { aided_scale: 1.0, aided_floor: 0.0, ..p };
        let l = layout();
        let q = Point2::new(2.3, 1.7);
        assert_eq!(score_aided(&q, &l, &identity), score_unaided(&q, &l, &identity));
    }

    #[test]
    fn intervention_index_switches_scoring() {
        let l = layout();
        let p = FallParams::default();
        let traj = Trajectory::new((0..6).map(|i| Point2::new(1.0 + i as f64 * 0.5, 1.0)).collect(), 0.4).unwrap();
        let unaided: Vec<f64> = traj.states.iter().map(|s| score_unaided(s, &l, &p)).collect();
        let all_aided = trajectory_scores(&traj, 0, &l, &p);
        let none = trajectory_scores(&traj, traj.len(), &l, &p);
        assert_eq!(none, unaided);
        assert!(all_aided.iter().zip(&unaided).all(|(a, u)| *a == p.aid(*u)));
        let mixed = trajectory_scores(&traj, 3, &l, &p);
        assert_eq!(&mixed[..3], &unaided[..3]);
        assert_eq!(&mixed[3..], &all_aided[3..]);

        let identity = FallParams { aided_scale: 1.0, aided_floor: 0.0, ..p };
        let base = trajectory_scores(&traj, 0, &l, &identity);
        for i in 0..=traj.len() {
            assert_eq!(trajectory_scores(&traj, i, &l, &identity), base);
        }
    }

    #[test]
    fn validation() {
        assert!(FallParams::default().validate().is_ok());
        assert!(FallParams { d_max: 0.0, ..FallParams::default() }.validate().is_err());
        assert!(FallParams { aided_floor: 0.5, aided_scale: 0.3, ..FallParams::default() }.validate().is_err());
        assert!(FallParams { aided_scale: 1.5, ..FallParams::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn scores_bounded_and_monotone(a in 0.0f64..5.0, b in 0.0f64..5.0, k in 0.5f64..20.0) {
            let p = FallParams { steepness: k, ..FallParams::default() };
            let (sa, sb) = (p.score_at_distance(a), p.score_at_distance(b));
            prop_assert!((0.0..=1.0).contains(&sa));
            if a <= b {
                prop_assert!(sa <= sb);
            }
            let aided = p.aid(sa);
            prop_assert!((0.0..=1.0).contains(&aided));
            if p.aided_floor <= p.aided_scale * sa {
                prop_assert!(aided <= sa);
            }
        }

        #[test]
        fn earlier_intervention_never_hurts(xs in proptest::collection::vec(1.7f64..9.0, 1..20), i in 0usize..20, j in 0usize..20) {
            // Points at least 0.7 m from the support keep aided <= unaided.
            let l = layout();
            let p = FallParams::default();
            let traj = Trajectory::new(xs.iter().map(|x| Point2::new(*x, 1.0)).collect(), 0.4).unwrap();
            let (i, j) = (i.min(traj.len()), j.min(traj.len()));
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let early = trajectory_scores(&traj, lo, &l, &p);
            let late = trajectory_scores(&traj, hi, &l, &p);
            prop_assert!(early.iter().zip(&late).all(|(e, l)| e <= l));
        }
    }
}
