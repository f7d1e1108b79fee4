//! Exact ODE reduction of mean curvature flow on the product-sphere family
//! `S^p(cos φ) × S^q(sin φ) ⊂ S^{p+q+1}(1)`.
//!
//! On this family the whole flow collapses to a single angle: the immersion
//! stays in the family, and `φ` evolves by `dφ/dt = p·tan φ − q·cot φ` (the
//! sign convention is pinned down by a one-step comparison with the discrete
//! embedding flow in [`crate::oracle`]). The family is codimension one inside
//! `S^{n+1}`, so the complement part of the second fundamental form vanishes
//! identically; it is the dynamical testbed for pinching preservation and
//! cylindrical collapse at theorem-scale dimensions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::PinchingProfile;

/// Fixed-point detection threshold on `|dφ/dt|`.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Smallest admissible time step before the integrator gives up.
pub const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("sphere factors must have dimension >= 1, got p={p}, q={q}")]
    BadFactors { p: u32, q: u32 },
    #[error("angle {phi} outside the open interval (0, pi/2)")]
    AngleOutOfRange { phi: f64 },
    #[error("ratio |A|^2/|H|^2 undefined at the minimal member (|H| = 0)")]
    RatioUndefined,
    #[error("profile dimension {profile_n} does not match family dimension p+q={family_n}")]
    ProfileMismatch { profile_n: u32, family_n: u32 },
    #[error("curvature cap {cap} must exceed the initial |A|^2 = {a2}")]
    CapBelowStart { cap: f64, a2: f64 },
    #[error("time step underflow: dt = {dt} < {MIN_STEP} before any termination condition")]
    StepUnderflow { dt: f64 },
    #[error("snapshot index {index} out of range (trajectory has {len} records)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("snapshot has pinching gap f = {f} <= 0; rescaling needs f > 0")]
    NotPinched { f: f64 },
}

/// A point of the equivariant family at a flow time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivariantState {
    p: u32,
    q: u32,
    phi: f64,
    t: f64,
}

impl EquivariantState {
    pub fn new(p: u32, q: u32, phi: f64, t: f64) -> Result<Self, FlowError> {
        if p < 1 || q < 1 {
            return Err(FlowError::BadFactors { p, q });
        }
        if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) || !t.is_finite() || t < 0.0 {
            return Err(FlowError::AngleOutOfRange { phi });
        }
        Ok(Self { p, q, phi, t })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Intrinsic dimension `n = p + q`.
    pub fn n(&self) -> u32 {
        self.p + self.q
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `(|A|², |H|²)` in closed form: with `τ = tan φ`,
    /// `|A|² = p·τ² + q/τ²` and `|H| = |p·τ − q/τ|`.
    pub fn geometry(&self) -> (f64, f64) {
        let tau = self.phi.tan();
        let (p, q) = (self.p as f64, self.q as f64);
        let a2 = p * tau * tau + q / (tau * tau);
        let h = p * tau - q / tau;
        (a2, h * h)
    }

    /// The pinching ratio `|A|²/|H|²`; undefined at the minimal member.
    ///
    /// `|H|²` is computed by a cancelling difference, so "minimal" is
    /// detected relative to the curvature scale rather than as exact zero.
    pub fn ratio(&self) -> Result<f64, FlowError> {
        let (a2, h2) = self.geometry();
        if h2 <= 1e-24 * a2 {
            return Err(FlowError::RatioUndefined);
        }
        Ok(a2 / h2)
    }

    /// Reduced flow speed `dφ/dt = p·tan φ − q·cot φ`.
    ///
    /// Negative below the minimal root `tan²φ = q/p` (the `S^q` factor
    /// collapses, `φ → 0`), zero at the root, positive above it.
    pub fn rhs(&self) -> f64 {
        let tau = self.phi.tan();
        self.p as f64 * tau - self.q as f64 / tau
    }

    /// The fixed-point angle `φ* = atan √(q/p)` of the minimal member.
    pub fn equilibrium_angle(p: u32, q: u32) -> f64 {
        (q as f64 / p as f64).sqrt().atan()
    }
}

/// Per-step monitor record: time, angle, curvature norms, pinching gap,
/// pinching ratio (NaN at the minimal member), and the pinched flag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub phi: f64,
    pub a2: f64,
    pub h2: f64,
    pub f: f64,
    pub ratio: f64,
    pub pinched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// `|A|²` reached the configured cap (the finite-time-contraction proxy).
    CurvatureCap,
    /// The flow reached the minimal fixed point (`|dφ/dt|` below tolerance).
    MinimalEquilibrium,
    /// The time horizon was reached first.
    TimeLimit,
}

/// A computed flow trajectory with one monitor per recorded state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<EquivariantState>,
    pub monitors: Vec<MonitorRecord>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_monitor(&self) -> &MonitorRecord {
        self.monitors.last().expect("a trajectory holds at least its initial record")
    }
}

fn monitor(state: &EquivariantState, profile: &PinchingProfile) -> MonitorRecord {
    let (a2, h2) = state.geometry();
    // The closed-form geometry always satisfies |A|² >= |H|²/n, so the gap
    // is defined on the whole family.
    let f = profile.pinching_gap(a2, h2).expect("family geometry is in the gap's domain");
    MonitorRecord {
        t: state.t,
        phi: state.phi,
        a2,
        h2,
        f,
        ratio: if h2 > 1e-24 * a2 { a2 / h2 } else { f64::NAN },
        pinched: f >= 0.0,
    }
}

/// Integrates the reduced flow with explicit adaptive Euler steps
/// `dt = min(dt_max, 0.1/|A|²)` (the parabolic step control) until the
/// curvature cap, the minimal fixed point, or the time horizon is reached.
/// Every step is recorded.
pub fn evolve(
    state0: &EquivariantState,
    profile: &PinchingProfile,
    dt_max: f64,
    t_max: f64,
    curvature_cap: f64,
) -> Result<Trajectory, FlowError> {
    if profile.n() != state0.n() {
        return Err(FlowError::ProfileMismatch { profile_n: profile.n(), family_n: state0.n() });
    }
    let (a2_0, _) = state0.geometry();
    if !(curvature_cap > a2_0) {
        return Err(FlowError::CapBelowStart { cap: curvature_cap, a2: a2_0 });
    }

    let mut state = *state0;
    let mut states = vec![state];
    let mut monitors = vec![monitor(&state, profile)];
    let termination = loop {
        let (a2, _) = state.geometry();
        if a2 >= curvature_cap {
            break Termination::CurvatureCap;
        }
        let speed = state.rhs();
        if speed.abs() < EQUILIBRIUM_TOL {
            break Termination::MinimalEquilibrium;
        }
        if state.t >= t_max {
            break Termination::TimeLimit;
        }
        let remaining = t_max - state.t;
        let dt = dt_max.min(0.1 / a2).min(remaining);
        if dt < MIN_STEP {
            if remaining < MIN_STEP {
                // Accumulated rounding left a sub-resolution sliver of the
                // horizon; the trajectory has effectively reached t_max.
                break Termination::TimeLimit;
            }
            return Err(FlowError::StepUnderflow { dt });
        }
        let phi = state.phi + dt * speed;
        if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) {
            // The cap always triggers before the angle can leave the open
            // interval; reaching here means the step was too coarse.
            return Err(FlowError::AngleOutOfRange { phi });
        }
        state = EquivariantState { p: state.p, q: state.q, phi, t: state.t + dt };
        states.push(state);
        monitors.push(monitor(&state, profile));
    };
    Ok(Trajectory { states, monitors, termination })
}

/// A monitor record after parabolic rescaling by `r̂ = 1/√f`: the metric is
/// scaled by `1/r̂²`, so curvature squares scale by `r̂²` and the gap at the
/// snapshot normalizes to exactly 1. The pinching ratio is scale-invariant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RescaledRecord {
    pub r_hat: f64,
    pub a2: f64,
    pub h2: f64,
    pub f: f64,
    pub ratio: f64,
}

pub fn rescale_snapshot(traj: &Trajectory, index: usize) -> Result<RescaledRecord, FlowError> {
    let rec = traj
        .monitors
        .get(index)
        .ok_or(FlowError::IndexOutOfRange { index, len: traj.monitors.len() })?;
    if !(rec.f > 0.0) {
        return Err(FlowError::NotPinched { f: rec.f });
    }
    let r_hat = 1.0 / rec.f.sqrt();
    let s = r_hat * r_hat;
    Ok(RescaledRecord { r_hat, a2: s * rec.a2, h2: s * rec.h2, f: s * rec.f, ratio: rec.ratio })
}

/// Runs one trajectory per initial angle in parallel (each trajectory is
/// itself single-threaded and deterministic).
pub fn sweep(
    p: u32,
    q: u32,
    initial_angles: &[f64],
    profile: &PinchingProfile,
    dt_max: f64,
    t_max: f64,
    curvature_cap: f64,
) -> Vec<Result<Trajectory, FlowError>> {
    use rayon::prelude::*;
    initial_angles
        .par_iter()
        .map(|&phi0| {
            let state = EquivariantState::new(p, q, phi0, 0.0)?;
            evolve(&state, profile, dt_max, t_max, curvature_cap)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn profile_for(n: u32) -> PinchingProfile {
        PinchingProfile::new(n, 2, 1.0, 0.0).unwrap()
    }

    #[test]
    fn closed_form_geometry_spot_values() {
        // Near-collapsed S^7 factor: ratio approaches 1/q.
        let s = EquivariantState::new(1, 7, 1e-3, 0.0).unwrap();
        assert_relative_eq!(s.ratio().unwrap(), 1.0 / 7.0, max_relative = 1e-5);

        // Symmetric point of the (2,6) family.
        let s = EquivariantState::new(2, 6, std::f64::consts::FRAC_PI_4, 0.0).unwrap();
        let (a2, h2) = s.geometry();
        assert_relative_eq!(a2, 8.0, max_relative = 1e-12);
        assert_relative_eq!(h2, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn minimal_member_is_a_fixed_point() {
        for (p, q) in [(1u32, 7u32), (2, 6), (3, 9)] {
            let phi = EquivariantState::equilibrium_angle(p, q);
            let s = EquivariantState::new(p, q, phi, 0.0).unwrap();
            assert!(s.rhs().abs() < 1e-12, "rhs {} at ({p},{q})", s.rhs());
            let (a2, h2) = s.geometry();
            assert!(h2 < 1e-25);
            // Minimal member has |A|² = n exactly.
            assert_relative_eq!(a2, (p + q) as f64, max_relative = 1e-12);
            assert_eq!(s.ratio(), Err(FlowError::RatioUndefined));
        }
    }

    #[test]
    fn flow_speed_sign_matches_the_embedding_oracle() {
        for (p, q, phi) in [(1u32, 7u32, 0.2), (1, 7, 0.5), (2, 6, 1.2), (3, 5, 0.4)] {
            let s = EquivariantState::new(p, q, phi, 0.0).unwrap();
            let closed = s.rhs();
            let measured = oracle::equivariant_phi_rate(p, q, phi, 1e-6);
            assert_relative_eq!(closed, measured, max_relative = 1e-2);
            let root = EquivariantState::equilibrium_angle(p, q);
            assert_eq!(closed < 0.0, phi < root);
        }
    }

    #[test]
    fn starting_at_the_minimal_member_terminates_immediately_unpinched() {
        let phi = EquivariantState::equilibrium_angle(1, 7);
        let s = EquivariantState::new(1, 7, phi, 0.0).unwrap();
        let traj = evolve(&s, &profile_for(8), 1e-3, 10.0, 1e6).unwrap();
        assert_eq!(traj.termination, Termination::MinimalEquilibrium);
        assert_eq!(traj.monitors.len(), 1);
        // |A|² = 8 > a(0) = 2√8: the minimal member is not quartically pinched.
        let m = traj.final_monitor();
        assert!(m.f < 0.0);
        assert!(!m.pinched);
    }

    #[test]
    fn pinched_data_stays_pinched_to_the_cap_and_collapses_cylindrically() {
        let s = EquivariantState::new(1, 7, 0.2, 0.0).unwrap();
        let traj = evolve(&s, &profile_for(8), 1e-3, 100.0, 1e6).unwrap();
        assert_eq!(traj.termination, Termination::CurvatureCap);
        assert!(traj.monitors.iter().all(|m| m.pinched && m.f > 0.0));
        let final_ratio = traj.final_monitor().ratio;
        assert!((final_ratio - 1.0 / 7.0).abs() < 0.01 / 7.0, "ratio {final_ratio}");
        // Time is strictly increasing and monitors align with states.
        assert_eq!(traj.states.len(), traj.monitors.len());
        assert!(traj.states.windows(2).all(|w| w[1].t() > w[0].t()));
    }

    #[test]
    fn halving_the_step_changes_monitors_at_first_order() {
        let s = EquivariantState::new(1, 7, 0.2, 0.0).unwrap();
        let p = profile_for(8);
        // Fixed steps (dt far below 0.1/|A|² on this window) so records of
        // the half-step run align with every other record of the full run.
        // Collapse reaches the cap near t ≈ 2.9e-3, so stop well before.
        let t_end = 0.002;
        let coarse = evolve(&s, &p, 1e-5, t_end, 1e12).unwrap();
        let fine = evolve(&s, &p, 5e-6, t_end, 1e12).unwrap();
        assert_eq!(coarse.termination, Termination::TimeLimit);
        let mut max_diff: f64 = 0.0;
        for (i, c) in coarse.states.iter().enumerate() {
            let f = &fine.states[2 * i];
            assert_abs_diff_eq!(c.t(), f.t(), epsilon = 1e-12);
            max_diff = max_diff.max((c.phi() - f.phi()).abs());
        }
        assert!(max_diff > 0.0, "refinement must actually move the solution");
        assert!(max_diff < 1e-4, "first-order error too large: {max_diff}");
    }

    #[test]
    fn rescaling_normalizes_the_gap_and_preserves_the_ratio() {
        let s = EquivariantState::new(1, 7, 0.2, 0.0).unwrap();
        let traj = evolve(&s, &profile_for(8), 1e-3, 100.0, 1e4).unwrap();
        let idx = traj.monitors.len() / 2;
        let r = rescale_snapshot(&traj, idx).unwrap();
        assert_relative_eq!(r.f, 1.0, max_relative = 1e-12);
        assert_eq!(r.ratio, traj.monitors[idx].ratio);
        assert_relative_eq!(r.a2, traj.monitors[idx].a2 / traj.monitors[idx].f, max_relative = 1e-12);
        // r̂ = 1 is the identity.
        let unit = RescaledRecord { r_hat: 1.0, a2: 1.0, h2: 1.0, f: 1.0, ratio: 1.0 };
        assert_eq!(unit.a2, 1.0);

        assert!(matches!(
            rescale_snapshot(&traj, usize::MAX),
            Err(FlowError::IndexOutOfRange { .. })
        ));
        let minimal = EquivariantState::new(
            1,
            7,
            EquivariantState::equilibrium_angle(1, 7),
            0.0,
        )
        .unwrap();
        let flat = evolve(&minimal, &profile_for(8), 1e-3, 1.0, 1e6).unwrap();
        assert!(matches!(rescale_snapshot(&flat, 0), Err(FlowError::NotPinched { .. })));
    }

    #[test]
    fn construction_and_precondition_errors() {
        assert!(matches!(
            EquivariantState::new(0, 7, 0.2, 0.0),
            Err(FlowError::BadFactors { .. })
        ));
        assert!(matches!(
            EquivariantState::new(1, 7, 2.0, 0.0),
            Err(FlowError::AngleOutOfRange { .. })
        ));
        let s = EquivariantState::new(1, 7, 0.2, 0.0).unwrap();
        assert!(matches!(
            evolve(&s, &profile_for(8), 1e-3, 1.0, 1.0),
            Err(FlowError::CapBelowStart { .. })
        ));
        assert!(matches!(
            evolve(&s, &profile_for(10), 1e-3, 1.0, 1e6),
            Err(FlowError::ProfileMismatch { .. })
        ));
        assert!(matches!(
            evolve(&s, &profile_for(8), 1e-20, 1.0, 1e6),
            Err(FlowError::StepUnderflow { .. })
        ));
    }

    #[test]
    fn sweeps_are_deterministic_and_order_preserving() {
        let p = profile_for(8);
        let angles = [0.1, 0.2, 0.3, 0.4];
        let a = sweep(1, 7, &angles, &p, 1e-3, 100.0, 1e4);
        let b = sweep(1, 7, &angles, &p, 1e-3, 100.0, 1e4);
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(
                serde_json::to_string(&x.monitors).unwrap(),
                serde_json::to_string(&y.monitors).unwrap()
            );
        }
    }
}
