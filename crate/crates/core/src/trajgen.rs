//! Relative docking trajectories `T_bt(τ)` sampled at a fixed rate.
//!
//! The target frame `F_t` has its origin on the berthing plane with `+z` along
//! the docking axis pointing away from the approaching servicer; the camera
//! (coincident with the service body frame) looks down `+z` when aligned.
//! Three phases are generated:
//!
//! 1. acquisition: cross-track motion through two random waypoints and back
//!    to the axis, range held, attitude aligned;
//! 2. forced translation along the axis with PI-tracked random perturbations
//!    (or one static misalignment);
//! 3. alignment of the residual error, then closure to the docking range.

use std::ops::Range;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{Pose, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid trajectory config: {0}")]
    ConfigInvalid(String),
    #[error("phases are not non-decreasing at sample {0}")]
    NonMonotonicPhases(usize),
    #[error("empty sample list")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryMode {
    #[default]
    Nominal,
    StaticMisalignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for PiGains {
    fn default() -> Self {
        Self { kp: 0.8, ki: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub seed: u64,
    /// Hz
    pub rate: f64,
    /// m
    pub start_range: f64,
    pub handover_range: f64,
    pub dock_range: f64,
    /// Radial distance of the acquisition waypoints from the axis, m.
    pub waypoint_radius: [f64; 2],
    /// m/s
    pub acq_speed: [f64; 2],
    pub forced_speed: f64,
    pub perturb_prob: f64,
    /// Along-track speed perturbation bound, m/s.
    pub perturb_vel: f64,
    /// Cross-track position perturbation bound, m.
    pub perturb_pos: f64,
    /// Per-axis attitude perturbation bound, degrees.
    pub perturb_att: f64,
    /// Phase-3 residual alignment time, s.
    pub alignment_time: f64,
    pub pi_gains: PiGains,
    pub mode: TrajectoryMode,
    /// Static-misalignment bounds (cross-track m, per-axis degrees).
    pub misalign_pos: f64,
    pub misalign_att: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rate: 10.0,
            start_range: 10.0,
            handover_range: 3.0,
            dock_range: 0.05,
            waypoint_radius: [1.0, 2.0],
            acq_speed: [0.09, 0.12],
            forced_speed: 0.03,
            perturb_prob: 0.10,
            perturb_vel: 0.002,
            perturb_pos: 0.01,
            perturb_att: 0.1,
            alignment_time: 10.0,
            pi_gains: PiGains::default(),
            mode: TrajectoryMode::Nominal,
            misalign_pos: 0.05,
            misalign_att: 2.0,
        }
    }
}

/// Worst-case amplitude of a PI-tracked channel relative to its setpoint
/// bound.
pub const PI_OVERSHOOT_LIMIT: f64 = 1.5;

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let bad = |m: &str| Err(TrajectoryError::ConfigInvalid(m.to_string()));
        let finite = [
            self.rate,
            self.start_range,
            self.handover_range,
            self.dock_range,
            self.forced_speed,
            self.perturb_prob,
            self.perturb_vel,
            self.perturb_pos,
            self.perturb_att,
            self.alignment_time,
            self.misalign_pos,
            self.misalign_att,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if !(self.rate > 0.0) {
            return bad("rate must be positive");
        }
        if !(0.0 < self.dock_range && self.dock_range < self.handover_range && self.handover_range < self.start_range) {
            return bad("require 0 < dock_range < handover_range < start_range");
        }
        let [rmin, rmax] = self.waypoint_radius;
        if !(0.0 <= rmin && rmin <= rmax) {
            return bad("waypoint_radius must satisfy 0 <= min <= max");
        }
        let [smin, smax] = self.acq_speed;
        if !(0.0 < smin && smin <= smax) || !(self.forced_speed > 0.0) {
            return bad("speeds must be positive");
        }
        if !(0.0..=1.0).contains(&self.perturb_prob) {
            return bad("perturb_prob must lie in [0, 1]");
        }
        if self.perturb_vel < 0.0 || self.perturb_pos < 0.0 || self.perturb_att < 0.0 || self.misalign_pos < 0.0 || self.misalign_att < 0.0 {
            return bad("perturbation bounds must be non-negative");
        }
        if !(self.forced_speed > PI_OVERSHOOT_LIMIT * self.perturb_vel) {
            return bad("forced_speed must dominate the speed perturbation");
        }
        if self.alignment_time < 0.0 {
            return bad("alignment_time must be non-negative");
        }
        let g = self.pi_gains;
        if !(g.kp > 0.0 && g.ki >= 0.0 && g.kp + g.ki < 2.0) {
            return bad("PI gains must satisfy kp > 0, ki >= 0, kp + ki < 2");
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / self.rate
    }

    /// Phase-2 duration without perturbations.
    pub fn nominal_phase2_duration(&self) -> f64 {
        (self.start_range - self.handover_range) / self.forced_speed
    }
}

/// One trajectory sample. `pose` is `T_bt`: target coordinates into the
/// service body (camera) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeSample {
    pub t: f64,
    pub phase: u8,
    pub pose: Pose,
}

/// Six PI-tracked channels: along-track speed offset, cross-track x/y,
/// attitude about x/y/z (radians).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerturbationState {
    pub speed: f64,
    pub cross: [f64; 2],
    pub attitude: [f64; 3],
}

impl PerturbationState {
    fn to_array(self) -> [f64; 6] {
        [self.speed, self.cross[0], self.cross[1], self.attitude[0], self.attitude[1], self.attitude[2]]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self { speed: a[0], cross: [a[1], a[2]], attitude: [a[3], a[4], a[5]] }
    }
}

/// Discrete per-axis PI tracker: the plant integrates the control, so the
/// tracked value follows a step setpoint with a bounded overshoot.
#[derive(Debug, Clone)]
pub struct PerturbationTracker {
    gains: PiGains,
    bounds: [f64; 6],
    prob: f64,
    setpoint: [f64; 6],
    integral: [f64; 6],
    value: [f64; 6],
    events: u64,
}

impl PerturbationTracker {
    pub fn new(config: &TrajectoryConfig) -> Self {
        let att = config.perturb_att.to_radians();
        Self {
            gains: config.pi_gains,
            bounds: [config.perturb_vel, config.perturb_pos, config.perturb_pos, att, att, att],
            prob: config.perturb_prob,
            setpoint: [0.0; 6],
            integral: [0.0; 6],
            value: [0.0; 6],
            events: 0,
        }
    }

    /// Replaces the setpoints outright (static misalignment).
    pub fn set_setpoint(&mut self, s: PerturbationState) {
        self.setpoint = s.to_array();
    }

    /// Advances one sample. Returns whether a new perturbation was drawn.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> bool {
        let fire = self.prob > 0.0 && rng.random::<f64>() < self.prob;
        if fire {
            for (s, b) in self.setpoint.iter_mut().zip(self.bounds) {
                *s = symmetric(rng, b);
            }
            self.events += 1;
        }
        self.track();
        fire
    }

    /// Tracking update without drawing.
    pub fn track(&mut self) {
        for i in 0..6 {
            let e = self.setpoint[i] - self.value[i];
            self.integral[i] += e;
            self.value[i] += self.gains.kp * e + self.gains.ki * self.integral[i];
        }
    }

    pub fn state(&self) -> PerturbationState {
        PerturbationState::from_array(self.value)
    }

    pub fn setpoint(&self) -> PerturbationState {
        PerturbationState::from_array(self.setpoint)
    }

    pub fn events(&self) -> u64 {
        self.events
    }
}

fn symmetric<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Counters collected while generating, for verification.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationStats {
    pub phase2_steps: u64,
    pub perturbation_events: u64,
    /// Largest tracked magnitude per channel during phase 2 (speed m/s,
    /// cross-track m, attitude degrees).
    pub max_speed_offset: f64,
    pub max_cross_track: f64,
    pub max_attitude_deg: f64,
}

/// Attitude of the camera relative to the target, composed about x, y, z.
fn attitude_quat(angles: [f64; 3]) -> UnitQuaternion {
    let qx = UnitQuaternion::from_axis_angle(&Vec3::x(), angles[0]);
    let qy = UnitQuaternion::from_axis_angle(&Vec3::y(), angles[1]);
    let qz = UnitQuaternion::from_axis_angle(&Vec3::z(), angles[2]);
    qx.mul(&qy).mul(&qz)
}

/// Builds `T_bt` from the camera position in the target frame and the
/// camera attitude angles.
fn relative_pose(cross: [f64; 2], range: f64, angles: [f64; 3]) -> Pose {
    let q_tb = attitude_quat(angles);
    let q_bt = q_tb.inverse();
    let cam_in_target = Vector3::new(cross[0], cross[1], -range);
    Pose::new(q_bt, -q_bt.rotate(&cam_in_target))
}

fn phase_rng(seed: u64, phase: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase);
    rng
}

pub fn generate(config: &TrajectoryConfig) -> Result<Vec<RelativeSample>, TrajectoryError> {
    generate_with_stats(config).map(|(s, _)| s)
}

/// Phase step budget: generous multiple of the nominal duration.
fn step_budget(distance: f64, speed: f64, rate: f64) -> u64 {
    ((distance / speed * rate) * 4.0).ceil() as u64 + 16
}

pub fn generate_with_stats(config: &TrajectoryConfig) -> Result<(Vec<RelativeSample>, GenerationStats), TrajectoryError> {
    config.validate()?;
    let dt = config.step();
    let mut samples = Vec::new();
    let mut stats = GenerationStats::default();
    let push = |samples: &mut Vec<RelativeSample>, phase: u8, pose: Pose| {
        let k = samples.len();
        samples.push(RelativeSample { t: k as f64 * dt, phase, pose });
    };

    // Phase 1: polyline wp1 → wp2 → axis at constant per-segment speed.
    let mut rng1 = phase_rng(config.seed, 1);
    let waypoint = |rng: &mut ChaCha8Rng| {
        let [lo, hi] = config.waypoint_radius;
        let r = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        [r * az.cos(), r * az.sin()]
    };
    let wp1 = waypoint(&mut rng1);
    let wp2 = waypoint(&mut rng1);
    let [smin, smax] = config.acq_speed;
    let speed = |rng: &mut ChaCha8Rng| if smax > smin { rng.random_range(smin..=smax) } else { smin };
    let s1 = speed(&mut rng1);
    let s2 = speed(&mut rng1);
    let legs = [(wp1, wp2, s1), (wp2, [0.0, 0.0], s2)];
    let leg_times: Vec<f64> = legs.iter().map(|(a, b, s)| ((b[0] - a[0]).hypot(b[1] - a[1])) / s).collect();
    let total = leg_times.iter().sum::<f64>();
    let phase1_steps = (total * config.rate - 1e-9).ceil().max(0.0) as usize;
    for k in 0..=phase1_steps {
        let t = (k as f64 * dt).min(total);
        let (leg, local) = if t <= leg_times[0] { (0, t) } else { (1, t - leg_times[0]) };
        let (a, b, _) = legs[leg];
        let frac = if leg_times[leg] > 0.0 { (local / leg_times[leg]).min(1.0) } else { 1.0 };
        let pos = if k == phase1_steps { [0.0, 0.0] } else { [a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac] };
        push(&mut samples, 1, relative_pose(pos, config.start_range, [0.0; 3]));
    }

    // Phase 2: forced translation with tracked perturbations.
    let mut rng2 = phase_rng(config.seed, 2);
    let mut tracker = PerturbationTracker::new(config);
    let static_mode = config.mode == TrajectoryMode::StaticMisalignment;
    if static_mode {
        let a = config.misalign_att.to_radians();
        tracker.set_setpoint(PerturbationState {
            speed: 0.0,
            cross: [symmetric(&mut rng2, config.misalign_pos), symmetric(&mut rng2, config.misalign_pos)],
            attitude: [symmetric(&mut rng2, a), symmetric(&mut rng2, a), symmetric(&mut rng2, a)],
        });
    }
    let mut range = config.start_range;
    let budget = step_budget(config.start_range - config.handover_range, config.forced_speed, config.rate);
    let mut state;
    loop {
        if static_mode {
            tracker.track();
        } else {
            tracker.step(&mut rng2);
        }
        state = tracker.state();
        stats.phase2_steps += 1;
        stats.max_speed_offset = stats.max_speed_offset.max(state.speed.abs());
        stats.max_cross_track = stats.max_cross_track.max(state.cross[0].abs()).max(state.cross[1].abs());
        for a in state.attitude {
            stats.max_attitude_deg = stats.max_attitude_deg.max(a.abs().to_degrees());
        }
        range -= (config.forced_speed + state.speed) * dt;
        let done = range <= config.handover_range;
        if done {
            range = config.handover_range;
        }
        push(&mut samples, 2, relative_pose(state.cross, range, state.attitude));
        if done {
            break;
        }
        if stats.phase2_steps > budget {
            return Err(TrajectoryError::ConfigInvalid("phase 2 does not reach the handover range".into()));
        }
    }
    stats.perturbation_events = tracker.events();

    // Phase 3: remove the residual linearly, then close at the forced speed.
    let align_steps = (config.alignment_time * config.rate).round() as usize;
    for j in 1..=align_steps {
        let f = 1.0 - j as f64 / align_steps as f64;
        let cross = [state.cross[0] * f, state.cross[1] * f];
        let att = [state.attitude[0] * f, state.attitude[1] * f, state.attitude[2] * f];
        push(&mut samples, 3, relative_pose(cross, range, att));
    }
    let budget = step_budget(config.handover_range - config.dock_range, config.forced_speed, config.rate);
    for _ in 0..budget {
        range -= config.forced_speed * dt;
        let done = range <= config.dock_range;
        if done {
            range = config.dock_range;
        }
        push(&mut samples, 3, relative_pose([0.0, 0.0], range, [0.0; 3]));
        if done {
            break;
        }
    }
    Ok((samples, stats))
}

/// Contiguous index ranges of phases 1, 2 and 3.
pub fn phase_boundaries(samples: &[RelativeSample]) -> Result<[Range<usize>; 3], TrajectoryError> {
    if samples.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let mut prev = 1u8;
    for (i, s) in samples.iter().enumerate() {
        if !(1..=3).contains(&s.phase) || s.phase < prev {
            return Err(TrajectoryError::NonMonotonicPhases(i));
        }
        prev = s.phase;
    }
    let mut out = [0..0, 0..0, 0..0];
    let mut start = 0;
    for (p, r) in out.iter_mut().enumerate() {
        let end = start + samples[start..].iter().take_while(|s| s.phase as usize == p + 1).count();
        *r = start..end;
        start = end;
    }
    Ok(out)
}

/// Writes one JSON object per line: `{"t":..,"phase":..,"pose":[7]}`.
pub fn write_jsonl<W: std::io::Write>(mut w: W, samples: &[RelativeSample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<RelativeSample>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::attitude_error;

    #[test]
    fn defaults_match_reference_scenario() {
        let c = TrajectoryConfig::default();
        assert_eq!(c.rate, 10.0);
        assert_eq!(c.start_range, 10.0);
        assert_eq!(c.handover_range, 3.0);
        assert_eq!(c.waypoint_radius, [1.0, 2.0]);
        assert_eq!(c.acq_speed, [0.09, 0.12]);
        assert_eq!(c.forced_speed, 0.03);
        assert_eq!(c.perturb_prob, 0.10);
        assert!((c.nominal_phase2_duration() - 233.333).abs() < 1e-3);
    }

    #[test]
    fn unperturbed_phase2_stays_on_axis() {
        let c = TrajectoryConfig { perturb_prob: 0.0, seed: 5, ..Default::default() };
        let s = generate(&c).unwrap();
        let [_, p2, _] = phase_boundaries(&s).unwrap();
        for x in &s[p2] {
            assert_eq!(x.pose.translation.x, 0.0);
            assert_eq!(x.pose.translation.y, 0.0);
            assert_eq!(x.pose.rotation, UnitQuaternion::IDENTITY);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let c = TrajectoryConfig { seed: 99, ..Default::default() };
        let a = generate(&c).unwrap();
        let b = generate(&c).unwrap();
        assert_eq!(a, b);
        let other = generate(&TrajectoryConfig { seed: 100, ..Default::default() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn samples_are_uniformly_spaced_and_end_at_dock() {
        let c = TrajectoryConfig { seed: 3, ..Default::default() };
        let s = generate(&c).unwrap();
        for w in s.windows(2) {
            assert!((w[1].t - w[0].t - 0.1).abs() < 1e-9);
        }
        let last = s.last().unwrap();
        assert!((last.pose.translation.z - c.dock_range).abs() < c.forced_speed / c.rate + 1e-12);
        assert_eq!(last.phase, 3);
    }

    #[test]
    fn phase_one_starts_on_a_waypoint_and_ends_on_axis() {
        let c = TrajectoryConfig { seed: 8, ..Default::default() };
        let s = generate(&c).unwrap();
        let [p1, _, _] = phase_boundaries(&s).unwrap();
        let first = s[p1.start].pose.translation;
        let r = first.x.hypot(first.y);
        assert!((1.0..=2.0).contains(&r));
        assert_eq!(first.z, 10.0);
        let end = s[p1.end - 1].pose.translation;
        assert_eq!((end.x, end.y), (0.0, 0.0));
        for x in &s[p1] {
            assert_eq!(x.pose.rotation, UnitQuaternion::IDENTITY);
        }
    }

    #[test]
    fn phase_two_range_is_non_increasing() {
        let c = TrajectoryConfig { seed: 21, ..Default::default() };
        let s = generate(&c).unwrap();
        let [_, p2, _] = phase_boundaries(&s).unwrap();
        let cam_range = |p: &Pose| -p.inverse().translation.z;
        for w in s[p2].windows(2) {
            assert!(cam_range(&w[1].pose) <= cam_range(&w[0].pose) + c.perturb_vel / c.rate);
        }
    }

    #[test]
    fn attitude_stays_within_accumulated_bound() {
        for seed in 0..5 {
            let c = TrajectoryConfig { seed, ..Default::default() };
            let s = generate(&c).unwrap();
            let bound = 3.0 * c.perturb_att * PI_OVERSHOOT_LIMIT;
            for x in &s {
                assert!(attitude_error(&x.pose.rotation, &UnitQuaternion::IDENTITY) <= bound);
            }
        }
    }

    #[test]
    fn static_misalignment_is_corrected_in_phase_three() {
        let c = TrajectoryConfig { seed: 4, mode: TrajectoryMode::StaticMisalignment, ..Default::default() };
        let (s, stats) = generate_with_stats(&c).unwrap();
        assert_eq!(stats.perturbation_events, 0);
        let [_, p2, p3] = phase_boundaries(&s).unwrap();
        let last2 = s[p2.end - 1].pose;
        assert!(attitude_error(&last2.rotation, &UnitQuaternion::IDENTITY) > 0.0);
        let align_end = p3.start + (c.alignment_time * c.rate) as usize - 1;
        assert_eq!(s[align_end].pose.rotation, UnitQuaternion::IDENTITY);
        assert!(s[p3].iter().skip((c.alignment_time * c.rate) as usize).all(|x| x.pose.translation.x == 0.0));
    }

    #[test]
    fn per_step_service_motion_is_bounded() {
        let c = TrajectoryConfig { seed: 12, ..Default::default() };
        let s = generate(&c).unwrap();
        let max_speed = c.acq_speed[1].max(c.forced_speed) + c.perturb_vel * PI_OVERSHOOT_LIMIT;
        let bound = max_speed / c.rate + 2.0 * c.perturb_pos * PI_OVERSHOOT_LIMIT;
        for w in s.windows(2) {
            let a = w[0].pose.inverse().translation;
            let b = w[1].pose.inverse().translation;
            assert!((b - a).norm() <= bound + 1e-12, "{} > {bound}", (b - a).norm());
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            TrajectoryConfig { dock_range: 4.0, ..Default::default() },
            TrajectoryConfig { perturb_prob: 1.5, ..Default::default() },
            TrajectoryConfig { forced_speed: 0.0, ..Default::default() },
            TrajectoryConfig { rate: 0.0, ..Default::default() },
            TrajectoryConfig { acq_speed: [0.2, 0.1], ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(generate(&c), Err(TrajectoryError::ConfigInvalid(_))));
        }
    }

    #[test]
    fn boundaries_examples() {
        let mk = |phases: &[u8]| phases.iter().map(|&p| RelativeSample { t: 0.0, phase: p, pose: Pose::identity() }).collect::<Vec<_>>();
        assert_eq!(phase_boundaries(&mk(&[1, 1, 1])).unwrap(), [0..3, 3..3, 3..3]);
        assert_eq!(phase_boundaries(&mk(&[1, 2, 2, 3])).unwrap(), [0..1, 1..3, 3..4]);
        assert_eq!(phase_boundaries(&mk(&[1, 3, 2])).unwrap_err(), TrajectoryError::NonMonotonicPhases(2));
        assert_eq!(phase_boundaries(&[]).unwrap_err(), TrajectoryError::Empty);
        let s = generate(&TrajectoryConfig::default()).unwrap();
        let b = phase_boundaries(&s).unwrap();
        assert!(b.iter().all(|r| !r.is_empty()));
        assert_eq!(b[2].end, s.len());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = TrajectoryConfig { seed: 1, ..Default::default() };
        let s = generate(&c).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &s[..20]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("{\"t\":0.0,\"phase\":1,\"pose\":["));
        assert_eq!(read_jsonl(&text).unwrap(), s[..20].to_vec());
    }

    #[test]
    fn tracker_settles_with_bounded_overshoot() {
        let c = TrajectoryConfig::default();
        let mut t = PerturbationTracker::new(&c);
        t.set_setpoint(PerturbationState { speed: 1.0, cross: [1.0, 1.0], attitude: [1.0; 3] });
        let mut peak = 0.0f64;
        for _ in 0..10 {
            t.track();
            peak = peak.max(t.state().speed);
        }
        assert!(peak < 1.2, "overshoot {peak}");
        assert!((t.state().speed - 1.0).abs() < 0.06);
    }
}
