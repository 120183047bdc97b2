//! Interception prediction from the filtered shuttle state.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_unchecked, ShuttleParams, ShuttleState, Trajectory, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::estimation::EkfState;
use crate::Vec3;

/// Default swing height above the robot base, m.
pub const DEFAULT_SWING_HEIGHT: f64 = 1.25;

/// How long the last target is held without a fresh prediction, s.
pub const TARGET_HOLD: f64 = 2.0;

/// Axis-aligned rectangle in the court plane, closed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[1] && y >= self.y[0] && y <= self.y[1]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x[0] < self.x[1] && self.y[0] < self.y[1]) {
            return Err(Error::domain("rectangle must have lo < hi on both axes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CourtGeometry {
    pub service_area: Rect,
    pub net_height: f64,
    /// Height of the upper qualification rectangle.
    pub qualification_height: f64,
    pub ground_height: f64,
}

impl Default for CourtGeometry {
    fn default() -> Self {
        Self {
            service_area: Rect {
                x: [-6.7, -2.0],
                y: [-2.6, 2.6],
            },
            net_height: 1.55,
            qualification_height: 1.55,
            ground_height: 0.0,
        }
    }
}

impl CourtGeometry {
    pub fn validate(&self) -> Result<()> {
        self.service_area.validate()?;
        if !(self.net_height > 0.0 && self.qualification_height > 0.0) {
            return Err(Error::domain("court heights must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    FullRollout,
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterceptionTarget {
    #[serde(rename = "t_created")]
    pub created_at: f64,
    pub t_swing: f64,
    pub p: Vec3,
    pub source: TargetSource,
}

/// Integration settings for crossing searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub dt: f64,
    /// Longest flight considered, s.
    pub horizon: f64,
    pub ground_height: f64,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: 3.0,
            ground_height: 0.0,
        }
    }
}

pub fn find_height_crossing(
    start: &ShuttleState,
    params: &ShuttleParams,
    height: f64,
) -> Result<ShuttleState> {
    find_height_crossing_with(start, params, height, &RolloutOptions::default())
}

/// First descending crossing of `height` after `start.t`, refined by bisection on the
/// sub-step length until `|z - height| < 1e-9`.
pub fn find_height_crossing_with(
    start: &ShuttleState,
    params: &ShuttleParams,
    height: f64,
    opts: &RolloutOptions,
) -> Result<ShuttleState> {
    if !height.is_finite() {
        return Err(Error::domain("crossing height must be finite"));
    }
    let floor = opts.ground_height.min(height);
    let max_steps = (opts.horizon / opts.dt).ceil() as usize;
    let mut prev = *start;
    for _ in 0..max_steps {
        let next = rk4_unchecked(&prev, params, opts.dt);
        if prev.p.z > height && next.p.z <= height {
            let hit = bisect_crossing(&prev, params, height, opts.dt);
            if hit.v.z < 0.0 {
                return Ok(hit);
            }
        }
        if next.p.z < floor && next.v.z < 0.0 {
            break;
        }
        prev = next;
    }
    Err(Error::NotInterceptable(format!(
        "no descending crossing of {height} m within {} s",
        opts.horizon
    )))
}

fn bisect_crossing(from: &ShuttleState, params: &ShuttleParams, height: f64, dt: f64) -> ShuttleState {
    let (mut lo, mut hi) = (0.0, dt);
    let mut best = rk4_unchecked(from, params, dt);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = rk4_unchecked(from, params, mid);
        best = s;
        if (s.p.z - height).abs() < 1e-9 {
            break;
        }
        if s.p.z > height {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Roll the filter mean forward to the descending crossing of `base_height + swing_height`.
pub fn predict_interception(
    ekf: &EkfState,
    params: &ShuttleParams,
    swing_height: f64,
    base_height: f64,
    now: f64,
) -> Result<InterceptionTarget> {
    predict_interception_with(ekf, params, swing_height, base_height, now, &RolloutOptions::default())
}

pub fn predict_interception_with(
    ekf: &EkfState,
    params: &ShuttleParams,
    swing_height: f64,
    base_height: f64,
    now: f64,
    opts: &RolloutOptions,
) -> Result<InterceptionTarget> {
    if !ekf.initialized {
        return Err(Error::domain("filter is not initialised"));
    }
    let crossing =
        find_height_crossing_with(&ekf.as_shuttle_state(), params, base_height + swing_height, opts)?;
    if crossing.t <= now {
        return Err(Error::NotInterceptable(format!(
            "predicted crossing at {} s is not after {now} s",
            crossing.t
        )));
    }
    Ok(InterceptionTarget {
        created_at: now,
        t_swing: crossing.t,
        p: crossing.p,
        source: TargetSource::FullRollout,
    })
}

/// Two-rectangle qualification: the path must descend through the service area at
/// `qualification_height` and reach the ground inside it.
pub fn qualify_trajectory(traj: &Trajectory, court: &CourtGeometry) -> bool {
    let area = &court.service_area;
    let upper = traj.descending_crossing(court.qualification_height);
    let ground = traj.descending_crossing(court.ground_height);
    match (upper, ground) {
        (Some(u), Some(g)) => area.contains(u.p.x, u.p.y) && area.contains(g.p.x, g.p.y),
        _ => false,
    }
}

/// First-order interception estimate from state-estimation errors at `t_k`:
/// `p_T + dp + (1 - 2 dt / L) dv (T - t_k)` with `dt = T - t_k`.
#[allow(clippy::too_many_arguments)]
pub fn linearized_interception(
    est_p: &Vec3,
    est_v: &Vec3,
    true_p: &Vec3,
    true_v: &Vec3,
    true_crossing: &Vec3,
    t_swing: f64,
    t_k: f64,
    params: &ShuttleParams,
) -> Result<Vec3> {
    if !(t_swing >= t_k) {
        return Err(Error::domain(format!("swing time {t_swing} precedes t_k {t_k}")));
    }
    let dt = t_swing - t_k;
    let gain = 1.0 - 2.0 * dt / params.aero_length;
    Ok(true_crossing + (est_p - true_p) + (est_v - true_v) * (gain * dt))
}

/// Fresh targets replace the held one; a held target expires `hold` seconds after creation.
pub fn target_persistence(
    last: Option<InterceptionTarget>,
    now: f64,
    fresh: Option<InterceptionTarget>,
) -> Option<InterceptionTarget> {
    target_persistence_with(last, now, fresh, TARGET_HOLD)
}

pub fn target_persistence_with(
    last: Option<InterceptionTarget>,
    now: f64,
    fresh: Option<InterceptionTarget>,
    hold: f64,
) -> Option<InterceptionTarget> {
    fresh.or_else(|| last.filter(|t| now - t.created_at <= hold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, LaunchDistribution, StopCondition};
    use crate::estimation::{Matrix6, Vector6};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn nominal() -> ShuttleState {
        LaunchDistribution::default().mean()
    }

    fn ekf_at(s: &ShuttleState) -> EkfState {
        EkfState::from_prior(
            s.t,
            Vector6::new(s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z),
            Matrix6::identity() * 1e-4,
        )
    }

    #[test]
    fn drag_free_drop_crossing_time() {
        let params = ShuttleParams::new(0.005, f64::INFINITY).unwrap();
        let h = 3.0;
        let start = ShuttleState::new(0.0, Vec3::new(0.0, 0.0, h), Vec3::zeros());
        let hit = find_height_crossing(&start, &params, h / 2.0).unwrap();
        assert_abs_diff_eq!(hit.t, (h / 9.81f64).sqrt(), epsilon = 1e-9);
        assert!((hit.p.z - h / 2.0).abs() < 1e-6);
    }

    #[test]
    fn crossing_matches_dense_rollout_oracle() {
        let params = ShuttleParams::default();
        let start = nominal();
        let hit = find_height_crossing(&start, &params, 1.8).unwrap();
        // brute force: fine fixed-step rollout, sample with |z - h| minimal on the descent
        let dense = simulate(&start, &params, 1e-5, StopCondition::BelowHeight { z: 1.0, max_t: 5.0 }).unwrap();
        let best = dense
            .states()
            .iter()
            .filter(|s| s.v.z < 0.0)
            .min_by(|a, b| (a.p.z - 1.8).abs().total_cmp(&(b.p.z - 1.8).abs()))
            .unwrap();
        assert!((hit.t - best.t).abs() < 1e-4, "{} vs {}", hit.t, best.t);
        assert!(hit.t > start.t);
        assert!((hit.p.z - 1.8).abs() < 1e-6);
        assert!(hit.v.z < 0.0);
    }

    #[test]
    fn ascending_only_segment_not_interceptable() {
        let params = ShuttleParams::default();
        // climbs toward 4 m and falls back without ever being above 5 m
        let start = ShuttleState::new(0.0, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 6.0));
        assert!(matches!(
            find_height_crossing(&start, &params, 5.0),
            Err(Error::NotInterceptable(_))
        ));
    }

    #[test]
    fn launch_below_ground_still_finds_the_crossing() {
        let params = ShuttleParams::default();
        let start = ShuttleState::new(0.0, Vec3::new(6.5, 0.0, -0.4), Vec3::new(-16.0, 0.0, 12.0));
        let hit = find_height_crossing(&start, &params, 1.8).unwrap();
        assert!(hit.v.z < 0.0);
        assert!((hit.p.z - 1.8).abs() < 1e-6);
    }

    #[test]
    fn crossing_taken_on_the_way_down() {
        let params = ShuttleParams::default();
        let start = nominal();
        let hit = find_height_crossing(&start, &params, 1.5).unwrap();
        // the launch passes 1.5 m on the way up first
        let up = simulate(&start, &params, DEFAULT_DT, StopCondition::MaxTime(0.05)).unwrap();
        assert!(up.last().p.z > 1.5);
        assert!(hit.v.z < 0.0);
    }

    #[test]
    fn ground_truth_mean_gives_ground_truth_target() {
        let params = ShuttleParams::default();
        let start = nominal();
        let target = predict_interception(&ekf_at(&start), &params, DEFAULT_SWING_HEIGHT, 0.55, 0.0).unwrap();
        let truth = find_height_crossing(&start, &params, 1.8).unwrap();
        assert_eq!(target.p, truth.p);
        assert_eq!(target.t_swing, truth.t);
        assert_eq!(target.source, TargetSource::FullRollout);
        assert!(target.t_swing > target.created_at);
    }

    #[test]
    fn past_crossing_is_rejected() {
        let params = ShuttleParams::default();
        let start = nominal();
        assert!(predict_interception(&ekf_at(&start), &params, 1.25, 0.55, 10.0).is_err());
    }

    #[test]
    fn velocity_perturbation_tracks_linearisation() {
        let params = ShuttleParams::default();
        let launch = nominal();
        let truth_cross = find_height_crossing(&launch, &params, 1.8).unwrap();
        // estimate 0.3 s before the swing
        let t_k = ((truth_cross.t - 0.3) / DEFAULT_DT).round() * DEFAULT_DT;
        let truth_k = simulate(&launch, &params, DEFAULT_DT, StopCondition::MaxTime(t_k)).unwrap();
        let s = *truth_k.last();
        let mut est = s;
        est.v.x += 0.1;
        let full = predict_interception(&ekf_at(&est), &params, 1.8, 0.0, t_k).unwrap();
        let lin = linearized_interception(&est.p, &est.v, &s.p, &s.v, &truth_cross.p, truth_cross.t, t_k, &params).unwrap();
        let dt = truth_cross.t - t_k;
        assert_abs_diff_eq!(lin.x - truth_cross.p.x, 0.1 * dt * (1.0 - 2.0 * dt / 4.1), epsilon = 1e-12);
        // same direction and within a few millimetres
        assert!((full.p.x - truth_cross.p.x) > 0.0);
        assert!((full.p - lin).norm() < 5e-3, "{}", (full.p - lin).norm());
    }

    #[test]
    fn linearisation_trivial_cases() {
        let params = ShuttleParams::default();
        let p = Vec3::new(1.0, 2.0, 3.0);
        let v = Vec3::new(-4.0, 0.0, 2.0);
        let pt = Vec3::new(0.0, 0.1, 1.8);
        assert_eq!(linearized_interception(&p, &v, &p, &v, &pt, 1.0, 0.2, &params).unwrap(), pt);
        let dp = Vec3::new(0.01, -0.02, 0.0);
        let out = linearized_interception(&(p + dp), &(v + Vec3::x()), &p, &v, &pt, 0.5, 0.5, &params).unwrap();
        assert!((out - (pt + dp)).norm() < 1e-15);
        assert!(linearized_interception(&p, &v, &p, &v, &pt, 0.1, 0.2, &params).is_err());
    }

    fn target(created_at: f64) -> InterceptionTarget {
        InterceptionTarget {
            created_at,
            t_swing: created_at + 0.5,
            p: Vec3::new(-1.0, 0.0, 1.8),
            source: TargetSource::FullRollout,
        }
    }

    #[test]
    fn persistence_rules() {
        let fresh = target(5.0);
        assert_eq!(target_persistence(Some(target(0.0)), 5.0, Some(fresh)), Some(fresh));
        assert_eq!(target_persistence(Some(target(0.0)), 1.9, None), Some(target(0.0)));
        assert_eq!(target_persistence(Some(target(0.0)), 2.1, None), None);
        assert_eq!(target_persistence(None, 2.1, None), None);
    }

    proptest! {
        #[test]
        fn persistence_never_returns_stale(created in 0.0f64..10.0, now in 0.0f64..20.0) {
            if let Some(t) = target_persistence(Some(target(created)), now, None) {
                prop_assert!(now - t.created_at <= TARGET_HOLD + 1.0 / 60.0);
            }
        }
    }

    fn fixture(dx: f64) -> Trajectory {
        let launch = nominal().translated(Vec3::new(dx, 0.0, 0.0));
        simulate(&launch, &ShuttleParams::default(), DEFAULT_DT, StopCondition::ground()).unwrap()
    }

    #[test]
    fn qualification_two_rectangles() {
        let court = CourtGeometry::default();
        // crosses both rectangles
        assert!(qualify_trajectory(&fixture(-3.5), &court));
        // lands inside but passes 1.55 m before the short service line
        let early = fixture(-1.75);
        assert!(court.service_area.contains(early.descending_crossing(0.0).unwrap().p.x, 0.0));
        assert!(!qualify_trajectory(&early, &court));
        // crosses 1.55 m inside but lands past the back line
        let long = fixture(-6.3);
        assert!(court.service_area.contains(long.descending_crossing(1.55).unwrap().p.x, 0.0));
        assert!(!qualify_trajectory(&long, &court));
    }

    #[test]
    fn qualification_needs_a_descent_through_the_upper_rectangle() {
        let court = CourtGeometry::default();
        let flat = ShuttleState::new(0.0, Vec3::new(-3.0, 0.0, 1.0), Vec3::new(-1.0, 0.0, 0.0));
        let traj = simulate(&flat, &ShuttleParams::default(), DEFAULT_DT, StopCondition::ground()).unwrap();
        assert!(!qualify_trajectory(&traj, &court));
    }

    #[test]
    fn qualification_is_time_shift_invariant() {
        let court = CourtGeometry::default();
        for dx in [-3.5, -1.75, -6.3] {
            let traj = fixture(dx);
            assert_eq!(qualify_trajectory(&traj, &court), qualify_trajectory(&traj.time_shifted(12.5), &court));
        }
    }
}
