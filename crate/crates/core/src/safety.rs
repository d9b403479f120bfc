//! Barrier function on robot-human distance and the safe-control QP.
//!
//! The barrier `B = |p - h|^2 - R^2` with `R = eps + r_h + r_r` has no
//! dependence on the turn rate. The filter therefore works on a point `l`
//! meters ahead of the wheel axle, with the radius grown by `l`, which keeps
//! the axle itself outside `R` whenever the lookahead point is outside `R + l`.

use crate::dynamics::{ControlBounds, RobotControl, RobotState, TimedPlan};
use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    pub epsilon_tube: f64,
    pub r_h: f64,
    pub r_r: f64,
    pub alpha_gain: f64,
    pub lookahead: f64,
}

impl SafetyParams {
    pub fn new(epsilon_tube: f64, r_h: f64, r_r: f64) -> Self {
        Self {
            epsilon_tube,
            r_h,
            r_r,
            alpha_gain: 1.0,
            lookahead: 0.1,
        }
    }

    pub fn radius(&self) -> f64 {
        self.epsilon_tube + self.r_h + self.r_r
    }

    pub fn validate(&self) -> Result<(), SafetyError> {
        for (name, v) in [
            ("epsilon_tube", self.epsilon_tube),
            ("r_h", self.r_h),
            ("r_r", self.r_r),
            ("alpha_gain", self.alpha_gain),
            ("lookahead", self.lookahead),
        ] {
            if !(v > 0.0) {
                return Err(SafetyError::BadParameter(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SafetyError {
    #[error("safety parameter `{0}` must be positive")]
    BadParameter(&'static str),
    #[error("barrier constraint is incompatible with the control bounds")]
    Infeasible,
    #[error("plan and tube time grids are misaligned: {0}")]
    Misaligned(String),
}

/// Predicted human centers on the planner's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedHumanTube {
    pub t0: f64,
    pub dt: f64,
    pub centers: Vec<Vec2>,
    pub radius: f64,
}

impl PredictedHumanTube {
    pub fn new(t0: f64, dt: f64, centers: Vec<Vec2>, radius: f64) -> Self {
        Self {
            t0,
            dt,
            centers,
            radius,
        }
    }

    /// Center at step `k` after `t0`; the human holds its last predicted position.
    pub fn center(&self, k: usize) -> Vec2 {
        match self.centers.get(k) {
            Some(c) => *c,
            None => *self.centers.last().expect("tube has at least one center"),
        }
    }

    pub fn contains(&self, k: usize, p: Vec2) -> bool {
        p.dist(self.center(k)) < self.radius
    }
}

pub fn safety_value(s: &RobotState, h: Vec2, params: &SafetyParams) -> f64 {
    let r = params.radius();
    (s.position() - h).norm_sq() - r * r
}

/// Gradient of [`safety_value`] with respect to the robot position.
pub fn safety_gradient(s: &RobotState, h: Vec2) -> Vec2 {
    (s.position() - h) * 2.0
}

pub fn lookahead_point(s: &RobotState, l: f64) -> Vec2 {
    s.position() + s.heading() * l
}

/// Barrier evaluated at the lookahead point against the grown radius.
pub fn lookahead_value(s: &RobotState, h: Vec2, params: &SafetyParams) -> f64 {
    let r = params.radius() + params.lookahead;
    (lookahead_point(s, params.lookahead) - h).norm_sq() - r * r
}

/// Linear constraint `g . (v, omega) >= c` enforced by [`safe_control`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfConstraint {
    pub g_v: f64,
    pub g_omega: f64,
    pub c: f64,
}

impl CbfConstraint {
    pub fn residual(&self, a: RobotControl) -> f64 {
        self.g_v * a.v + self.g_omega * a.omega - self.c
    }
}

pub fn cbf_constraint(s: &RobotState, h: Vec2, params: &SafetyParams) -> CbfConstraint {
    let l = params.lookahead;
    let d = lookahead_point(s, l) - h;
    let (sin, cos) = s.theta.sin_cos();
    CbfConstraint {
        g_v: 2.0 * d.dot(Vec2::new(cos, sin)),
        g_omega: 2.0 * l * d.dot(Vec2::new(-sin, cos)),
        c: -params.alpha_gain * lookahead_value(s, h, params),
    }
}

/// Closest control to `nominal` inside the box that satisfies the barrier constraint.
pub fn safe_control(
    s: &RobotState,
    nominal: RobotControl,
    tube_point: Vec2,
    params: &SafetyParams,
    bounds: &ControlBounds,
) -> Result<RobotControl, SafetyError> {
    let k = cbf_constraint(s, tube_point, params);
    solve_box_halfplane(nominal, &k, bounds)
}

/// Minimize `|a - nominal|^2` over the box intersected with `g . a >= c`.
pub fn solve_box_halfplane(
    nominal: RobotControl,
    k: &CbfConstraint,
    bounds: &ControlBounds,
) -> Result<RobotControl, SafetyError> {
    let boxed = bounds.clamp(nominal);
    let g = Vec2::new(k.g_v, k.g_omega);
    let gn = g.norm_sq();
    if gn < 1e-18 {
        return if k.c <= 0.0 {
            Ok(boxed)
        } else {
            Err(SafetyError::Infeasible)
        };
    }
    let best_in_box = k.g_v.abs() * bounds.v_max + k.g_omega.abs() * bounds.omega_max;
    if best_in_box < k.c {
        return Err(SafetyError::Infeasible);
    }
    if k.residual(boxed) >= 0.0 {
        return Ok(boxed);
    }
    // Optimum lies on the line g . a = c, restricted to the box.
    let a0 = g * (k.c / gn);
    let dir = Vec2::new(-g.y, g.x) / gn.sqrt();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, d, m) in [(a0.x, dir.x, bounds.v_max), (a0.y, dir.y, bounds.omega_max)] {
        if d.abs() < 1e-15 {
            if p.abs() > m + 1e-12 {
                return Err(SafetyError::Infeasible);
            }
            continue;
        }
        let t1 = (-m - p) / d;
        let t2 = (m - p) / d;
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    if lo > hi + 1e-12 {
        return Err(SafetyError::Infeasible);
    }
    let n = Vec2::new(nominal.v, nominal.omega);
    let t = (n - a0).dot(dir).clamp(lo, hi.max(lo));
    let a = a0 + dir * t;
    let mut out = bounds.clamp(RobotControl::new(a.x, a.y));
    // Absorb rounding so the returned control never undershoots the constraint.
    let r = k.residual(out);
    if r < 0.0 {
        let push = g * (-r / gn);
        out = bounds.clamp(RobotControl::new(out.v + push.x, out.omega + push.y));
    }
    Ok(out)
}

fn step_offset(plan_t0: f64, tube: &PredictedHumanTube, dt: f64) -> Result<usize, SafetyError> {
    if (dt - tube.dt).abs() > 1e-12 {
        return Err(SafetyError::Misaligned(format!("plan dt {dt} vs tube dt {}", tube.dt)));
    }
    let k = (plan_t0 - tube.t0) / tube.dt;
    let kr = k.round();
    if (k - kr).abs() > 1e-6 || kr < 0.0 {
        return Err(SafetyError::Misaligned(format!(
            "plan starts at {plan_t0}, tube at {}",
            tube.t0
        )));
    }
    Ok(kr as usize)
}

pub fn plan_in_safe_set(plan: &TimedPlan, tube: &PredictedHumanTube) -> Result<bool, SafetyError> {
    let off = step_offset(plan.t0, tube, plan.dt)?;
    let r2 = tube.radius * tube.radius;
    Ok(plan
        .states
        .iter()
        .enumerate()
        .all(|(i, s)| (s.position() - tube.center(off + i)).norm_sq() - r2 >= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SafetyParams {
        SafetyParams::new(0.1, 0.3, 0.3)
    }

    #[test]
    fn value_examples() {
        let p = params();
        let h = Vec2::ZERO;
        assert!((safety_value(&RobotState::new(1.0, 0.0, 0.0), h, &p) - 0.51).abs() < 1e-12);
        assert!(safety_value(&RobotState::new(0.7, 0.0, 0.0), h, &p).abs() < 1e-12);
        assert!((safety_value(&RobotState::new(0.5, 0.0, 0.0), h, &p) + 0.24).abs() < 1e-12);
    }

    #[test]
    fn inactive_constraint_returns_nominal() {
        let p = params();
        let b = ControlBounds::default();
        let s = RobotState::new(0.0, 0.0, 0.0);
        let nom = RobotControl::new(0.8, 0.2);
        assert_eq!(safe_control(&s, nom, Vec2::new(10.0, 0.0), &p, &b).unwrap(), nom);
        // human behind: forward motion increases the barrier
        let behind = Vec2::new(-1.5, 0.0);
        let k = cbf_constraint(&s, behind, &p);
        assert!(k.g_v > 0.0);
        assert_eq!(safe_control(&s, nom, behind, &p, &b).unwrap(), nom);
    }

    #[test]
    fn head_on_at_boundary_is_limited() {
        let p = params();
        let b = ControlBounds::default();
        let r = p.radius() + p.lookahead;
        // lookahead point exactly on the grown circle, heading at the human
        let s = RobotState::new(-(r + p.lookahead), 0.0, 0.0);
        assert!(lookahead_value(&s, Vec2::ZERO, &p).abs() < 1e-12);
        let a = safe_control(&s, RobotControl::new(1.0, 0.0), Vec2::ZERO, &p, &b).unwrap();
        let k = cbf_constraint(&s, Vec2::ZERO, &p);
        assert!(a.v < 1.0);
        assert!(k.residual(a).abs() < 1e-9);
    }

    #[test]
    fn infeasible_when_deep_inside() {
        let p = params();
        let b = ControlBounds::new(0.1, 0.1);
        let s = RobotState::new(0.05, 0.0, 0.0);
        let r = safe_control(&s, RobotControl::ZERO, Vec2::ZERO, &p, &b);
        assert_eq!(r, Err(SafetyError::Infeasible));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = RobotState::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0);
            let h = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let g = safety_gradient(&s, h);
            let e = 1e-5;
            let fd = |dx: f64, dy: f64| {
                (safety_value(&RobotState::new(s.x + dx, s.y + dy, 0.0), h, &p)
                    - safety_value(&RobotState::new(s.x - dx, s.y - dy, 0.0), h, &p))
                    / (2.0 * e)
            };
            let (gx, gy) = (fd(e, 0.0), fd(0.0, e));
            assert!((gx - g.x).abs() <= 1e-6 * g.x.abs().max(1.0));
            assert!((gy - g.y).abs() <= 1e-6 * g.y.abs().max(1.0));
        }
    }

    #[test]
    fn forward_invariance_against_static_human() {
        let p = params();
        let b = ControlBounds::default();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut s = loop {
                let s = RobotState::new(
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-3.0..3.0),
                );
                if lookahead_value(&s, h, &p) >= 0.0 {
                    break s;
                }
            };
            let goal = h * 2.0 - s.position();
            for _ in 0..1000 {
                let e = crate::geom::wrap_angle((goal - s.position()).angle() - s.theta);
                let nom = b.clamp(RobotControl::new(e.cos(), 2.0 * e));
                let a = safe_control(&s, nom, h, &p, &b).unwrap();
                s = integrate(s, a, 0.1);
                assert!(safety_value(&s, h, &p) >= 0.0, "seed {seed}");
            }
        }
    }

    #[test]
    fn idempotent_on_safe_nominal() {
        let p = params();
        let b = ControlBounds::default();
        let s = RobotState::new(-1.0, 0.3, 0.2);
        let nom = RobotControl::new(0.9, -0.4);
        let a = safe_control(&s, nom, Vec2::ZERO, &p, &b).unwrap();
        let a2 = safe_control(&s, a, Vec2::ZERO, &p, &b).unwrap();
        assert_eq!(a, a2);
    }

    fn line_plan(y: f64) -> TimedPlan {
        let mut plan = TimedPlan::new(0.0, 0.1, RobotState::new(0.0, y, 0.0));
        for _ in 0..10 {
            plan.push(RobotControl::new(1.0, 0.0));
        }
        plan
    }

    #[test]
    fn plan_tube_membership() {
        let centers: Vec<Vec2> = (0..=10).map(|i| Vec2::new(i as f64 * 0.1, 0.0)).collect();
        let tube = PredictedHumanTube::new(0.0, 0.1, centers, 0.7);
        assert!(plan_in_safe_set(&line_plan(2.0), &tube).unwrap());
        assert!(!plan_in_safe_set(&line_plan(0.5), &tube).unwrap());
        assert!(plan_in_safe_set(&line_plan(0.7), &tube).unwrap());
        let shifted = PredictedHumanTube::new(0.05, 0.1, vec![Vec2::ZERO], 0.7);
        assert!(plan_in_safe_set(&line_plan(2.0), &shifted).is_err());
    }
}
