//! Unicycle robot state, controls, forward-Euler integration and timed plans.

use crate::geom::{wrap_angle, Vec2};
use crate::world::GoalDisk;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Heading, kept in `[-pi, pi)`.
    pub theta: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotControl {
    pub v: f64,
    pub omega: f64,
}

impl RobotControl {
    pub const ZERO: RobotControl = RobotControl { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Symmetric box bounds on the unicycle inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub v_max: f64,
    pub omega_max: f64,
}

impl ControlBounds {
    pub fn new(v_max: f64, omega_max: f64) -> Self {
        Self { v_max, omega_max }
    }

    pub fn contains(&self, a: RobotControl) -> bool {
        const TOL: f64 = 1e-9;
        a.v.abs() <= self.v_max + TOL && a.omega.abs() <= self.omega_max + TOL
    }

    pub fn clamp(&self, a: RobotControl) -> RobotControl {
        RobotControl::new(
            a.v.clamp(-self.v_max, self.v_max),
            a.omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self::new(1.0, 1.5)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("control (v={v}, omega={omega}) outside bounds (v_max={v_max}, omega_max={omega_max})")]
    ControlOutOfBounds {
        v: f64,
        omega: f64,
        v_max: f64,
        omega_max: f64,
    },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("plan has no states")]
    EmptyPlan,
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("plan inconsistent at transition {index}: {reason}")]
    InconsistentPlan { index: usize, reason: String },
}

/// Integrate without bound checks.
pub fn integrate(s: RobotState, a: RobotControl, dt: f64) -> RobotState {
    RobotState {
        x: s.x + a.v * s.theta.cos() * dt,
        y: s.y + a.v * s.theta.sin() * dt,
        theta: wrap_angle(s.theta + a.omega * dt),
    }
}

pub fn step_dynamics(
    s: RobotState,
    a: RobotControl,
    dt: f64,
    bounds: &ControlBounds,
) -> Result<RobotState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::NonPositiveDt(dt));
    }
    if !bounds.contains(a) {
        return Err(DynamicsError::ControlOutOfBounds {
            v: a.v,
            omega: a.omega,
            v_max: bounds.v_max,
            omega_max: bounds.omega_max,
        });
    }
    Ok(integrate(s, a, dt))
}

pub fn in_goal(s: &RobotState, g: &GoalDisk) -> bool {
    g.contains(s.position())
}

/// States at uniform spacing `dt`, with the control applied on each transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPlan {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<RobotState>,
    pub controls: Vec<RobotControl>,
}

impl TimedPlan {
    pub fn new(t0: f64, dt: f64, start: RobotState) -> Self {
        Self {
            t0,
            dt,
            states: vec![start],
            controls: Vec::new(),
        }
    }

    pub fn push(&mut self, a: RobotControl) {
        let last = *self.states.last().expect("plan always has a start state");
        self.states.push(integrate(last, a, self.dt));
        self.controls.push(a);
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> Option<&RobotState> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&RobotState> {
        self.states.last()
    }

    /// Re-integrate the recorded controls and compare against the stored states.
    pub fn check_replay(&self, bounds: &ControlBounds) -> Result<(), DynamicsError> {
        if self.states.is_empty() {
            return Err(DynamicsError::EmptyPlan);
        }
        if self.controls.len() + 1 != self.states.len() {
            return Err(DynamicsError::InconsistentPlan {
                index: self.controls.len(),
                reason: format!("{} controls for {} states", self.controls.len(), self.states.len()),
            });
        }
        for (i, a) in self.controls.iter().enumerate() {
            let next = step_dynamics(self.states[i], *a, self.dt, bounds)?;
            let err = next.position().dist(self.states[i + 1].position());
            if err > 1e-9 {
                return Err(DynamicsError::InconsistentPlan {
                    index: i,
                    reason: format!("replay error {err:e} m"),
                });
            }
        }
        Ok(())
    }
}

/// Every `stride`-th position of the plan, always keeping both endpoints.
pub fn discretize_plan(plan: &TimedPlan, stride: usize) -> Result<Vec<Vec2>, DynamicsError> {
    if plan.states.is_empty() {
        return Err(DynamicsError::EmptyPlan);
    }
    if stride == 0 {
        return Err(DynamicsError::ZeroStride);
    }
    let last = plan.states.len() - 1;
    let mut out: Vec<Vec2> = (0..=last).step_by(stride).map(|i| plan.states[i].position()).collect();
    if !last.is_multiple_of(stride) {
        out.push(plan.states[last].position());
    }
    Ok(out)
}
