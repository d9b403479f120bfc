//! Human models: the DWA and grid A* predictors used by the planners, and the
//! social-forces model that moves the simulated human.

use crate::belief::{Belief, ZoneLayout};
use crate::dynamics::RobotState;
use crate::geom::{wrap_angle, Vec2};
use crate::search::{astar, distance_field, earliest_arrival, Passable};
use crate::world::{build_grid, Cell, GoalDisk, GridAbstraction, Scenario};

pub const DEFAULT_CELL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HumanState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl HumanState {
    pub fn new(position: Vec2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Vec2) -> Self {
        Self::new(position, Vec2::ZERO)
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionSource {
    Dwa,
    Astar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanPrediction {
    pub waypoints: Vec<Vec2>,
    pub source: PredictionSource,
    /// Time between waypoints, when the prediction is timed.
    pub period: Option<f64>,
}

impl HumanPrediction {
    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

/// Geodesic cost-to-go toward a goal over the human-inflated grid.
#[derive(Debug, Clone)]
pub struct Navigator {
    pub grid: GridAbstraction,
    pub goal: GoalDisk,
    pub goal_cell: Option<Cell>,
    field: Vec<f64>,
}

impl Navigator {
    pub fn new(scenario: &Scenario, goal: GoalDisk) -> Self {
        let grid = build_grid(scenario, DEFAULT_CELL).expect("default cell fits every shipped map");
        Self::with_grid(grid, goal)
    }

    pub fn with_grid(grid: GridAbstraction, goal: GoalDisk) -> Self {
        let pass = Passable::new(&grid);
        let goal_cell = grid.nearest_free_cell(goal.center);
        let mut field = match goal_cell {
            Some(c) => distance_field(&pass, c),
            None => vec![f64::INFINITY; grid.len()],
        };
        for v in &mut field {
            *v *= grid.cell_size;
        }
        Self {
            grid,
            goal,
            goal_cell,
            field,
        }
    }

    pub fn cell_cost(&self, c: Cell) -> f64 {
        self.field[self.grid.index(c)]
    }

    /// Remaining geodesic distance from `p`, through the best nearby free cell.
    pub fn cost_to_go(&self, p: Vec2) -> f64 {
        if self.goal.contains(p) {
            return 0.0;
        }
        let cs = self.grid.cell_size;
        self.grid
            .cells_in_square(p, 1.5 * cs)
            .into_iter()
            .filter(|c| !self.grid.is_occupied(*c))
            .map(|c| self.cell_cost(c) + p.dist(self.grid.center(c)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Unit direction toward the farthest-progress cell visible from `p`.
    pub fn desired_direction(&self, p: Vec2, scenario: &Scenario, reach: f64) -> Option<Vec2> {
        if self.goal.contains(p) {
            return None;
        }
        if scenario.segment_in_freespace(p, self.goal.center, scenario.r_h * 0.9) && p.dist(self.goal.center) <= reach {
            return (self.goal.center - p).normalized();
        }
        let mut best: Option<(f64, Vec2)> = None;
        for c in self.grid.cells_in_square(p, reach) {
            if self.grid.is_occupied(c) {
                continue;
            }
            let f = self.cell_cost(c);
            if !f.is_finite() {
                continue;
            }
            let q = self.grid.center(c);
            let d = p.dist(q);
            if d > reach || d < 1e-9 {
                continue;
            }
            let score = f + d;
            if best.is_none_or(|(b, _)| score < b - 1e-12) && scenario.segment_in_freespace(p, q, scenario.r_h * 0.9) {
                best = Some((score, q));
            }
        }
        best.and_then(|(_, q)| (q - p).normalized())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaParams {
    pub speed_samples: usize,
    pub rate_samples: usize,
    pub max_speed: f64,
    pub relaxation_time: f64,
    pub max_turn_rate: f64,
    pub sim_time: f64,
    pub wall_margin: f64,
    pub wall_weight: f64,
}

impl Default for DwaParams {
    fn default() -> Self {
        Self {
            speed_samples: 5,
            rate_samples: 11,
            max_speed: 1.3,
            relaxation_time: 0.5,
            max_turn_rate: 3.0,
            sim_time: 1.0,
            wall_margin: 0.2,
            wall_weight: 2.0,
        }
    }
}

/// Rolls the human forward with a dynamic-window search over speed and turn rate.
#[derive(Debug, Clone)]
pub struct DwaPredictor {
    pub nav: Navigator,
    pub params: DwaParams,
}

impl DwaPredictor {
    pub fn new(scenario: &Scenario, goal: GoalDisk) -> Self {
        let params = DwaParams {
            max_speed: scenario.human_v_max,
            ..DwaParams::default()
        };
        Self {
            nav: Navigator::new(scenario, goal),
            params,
        }
    }

    fn heading(&self, h: &HumanState, scenario: &Scenario) -> f64 {
        if h.speed() > 0.05 {
            return h.velocity.angle();
        }
        self.nav
            .desired_direction(h.position, scenario, 1.5)
            .map_or(0.0, |d| d.angle())
    }

    /// Best next state, or `None` when every command collides.
    fn step(&self, h: &HumanState, scenario: &Scenario, dt: f64) -> Option<HumanState> {
        let p = &self.params;
        let v = h.speed();
        let v_hi = (v + (p.max_speed - v) * (dt / p.relaxation_time).min(1.0)).min(p.max_speed);
        let v_lo = (v - v * (dt / p.relaxation_time).min(1.0)).max(0.0);
        let theta = self.heading(h, scenario);
        let n_sim = (p.sim_time / dt).round().max(1.0) as usize;
        let mut best: Option<(f64, HumanState)> = None;
        for si in 0..p.speed_samples {
            let s = if p.speed_samples == 1 {
                v_hi
            } else {
                v_lo + (v_hi - v_lo) * si as f64 / (p.speed_samples - 1) as f64
            };
            for ri in 0..p.rate_samples {
                let w = if p.rate_samples == 1 {
                    0.0
                } else {
                    -p.max_turn_rate + 2.0 * p.max_turn_rate * ri as f64 / (p.rate_samples - 1) as f64
                };
                let mut pos = h.position;
                let mut th = theta;
                let mut min_clear = f64::INFINITY;
                let mut first = None;
                let mut ok = true;
                for k in 0..n_sim {
                    th = wrap_angle(th + w * dt);
                    pos += Vec2::from_angle(th) * (s * dt);
                    let clear = scenario.clearance(pos) - scenario.r_h;
                    if clear <= 0.0 {
                        ok = false;
                        break;
                    }
                    min_clear = min_clear.min(clear);
                    if k == 0 {
                        first = Some((pos, Vec2::from_angle(th) * s));
                    }
                    if self.nav.goal.contains(pos) {
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let ctg = self.nav.cost_to_go(pos);
                if !ctg.is_finite() {
                    continue;
                }
                let score = ctg + p.wall_weight * (p.wall_margin - min_clear).max(0.0);
                let (fp, fv) = first.expect("at least one simulated step");
                if best.is_none_or(|(b, _)| score < b - 1e-12) {
                    best = Some((score, HumanState::new(fp, fv)));
                }
            }
        }
        best.map(|(_, s)| s)
    }

    /// `steps + 1` positions starting at the current one.
    pub fn predict(&self, h: &HumanState, scenario: &Scenario, steps: usize, dt: f64) -> HumanPrediction {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(h.position);
        let mut cur = *h;
        for _ in 0..steps {
            if self.nav.goal.contains(cur.position) {
                cur = HumanState::at_rest(cur.position);
            } else {
                cur = self
                    .step(&cur, scenario, dt)
                    .unwrap_or_else(|| HumanState::at_rest(cur.position));
            }
            out.push(cur.position);
        }
        HumanPrediction {
            waypoints: out,
            source: PredictionSource::Dwa,
            period: Some(dt),
        }
    }
}

pub fn predict_dwa(h: &HumanState, goal: &GoalDisk, scenario: &Scenario, horizon_steps: usize) -> HumanPrediction {
    DwaPredictor::new(scenario, *goal).predict(h, scenario, horizon_steps, scenario.dt)
}

/// Cells to treat as blocked for each believed robot zone.
pub fn belief_cells(grid: &GridAbstraction, centers: &[Vec2], half: f64) -> Vec<Cell> {
    let mut cells: Vec<Cell> = centers.iter().flat_map(|c| grid.cells_in_square(*c, half)).collect();
    cells.sort_unstable_by_key(|c| (c.1, c.0));
    cells.dedup();
    cells
}

/// Static shortest path to the goal with believed zones as obstacles.
pub fn predict_astar(
    h: &HumanState,
    goal: &GoalDisk,
    grid: &GridAbstraction,
    belief_obstacles: &[Vec2],
) -> HumanPrediction {
    let empty = HumanPrediction {
        waypoints: Vec::new(),
        source: PredictionSource::Astar,
        period: None,
    };
    let (Some(start), Some(target)) = (grid.nearest_free_cell(h.position), grid.nearest_free_cell(goal.center)) else {
        return empty;
    };
    let mut pass = Passable::new(grid);
    for p in belief_obstacles {
        if let Some(c) = grid.cell_of(*p) {
            pass.block(c);
        }
    }
    pass.unblock(start);
    match astar(&pass, start, target) {
        Some(path) => {
            let mut waypoints = vec![h.position];
            waypoints.extend(path.iter().skip(1).map(|c| grid.center(*c)));
            HumanPrediction {
                waypoints,
                source: PredictionSource::Astar,
                period: None,
            }
        }
        None => empty,
    }
}

/// Timed A* prediction where believed zones block the human until `release`
/// seconds have passed. Waypoints are sampled every `period` seconds.
#[allow(clippy::too_many_arguments)]
pub fn predict_astar_timed(
    h: &HumanState,
    goal: &GoalDisk,
    grid: &GridAbstraction,
    blocked: &[Cell],
    release: f64,
    speed: f64,
    period: f64,
) -> HumanPrediction {
    let empty = HumanPrediction {
        waypoints: Vec::new(),
        source: PredictionSource::Astar,
        period: Some(period),
    };
    let (Some(start), Some(target)) = (grid.nearest_free_cell(h.position), grid.nearest_free_cell(goal.center)) else {
        return empty;
    };
    if goal.contains(h.position) {
        return HumanPrediction {
            waypoints: vec![h.position],
            ..empty
        };
    }
    let pass = Passable::new(grid);
    let mut rel = vec![0.0; grid.len()];
    for c in blocked {
        if *c != start {
            rel[grid.index(*c)] = release;
        }
    }
    let Some(tp) = earliest_arrival(&pass, &rel, start, target, grid.cell_size / speed) else {
        return empty;
    };
    // knots of a piecewise-linear motion, waiting before each delayed cell
    let mut knots: Vec<(f64, Vec2)> = vec![(0.0, h.position)];
    for k in 1..tp.cells.len() {
        let prev = knots.last().expect("non-empty").1;
        let next = grid.center(tp.cells[k]);
        let travel = prev.dist(next) / speed;
        let depart = (tp.arrival[k] - travel).max(knots.last().expect("non-empty").0);
        if depart > knots.last().expect("non-empty").0 + 1e-12 {
            knots.push((depart, prev));
        }
        knots.push((depart + travel, next));
    }
    let end = knots.last().expect("non-empty").0;
    let mut waypoints = Vec::new();
    let mut t = 0.0;
    let mut seg = 0;
    loop {
        while seg + 1 < knots.len() && knots[seg + 1].0 < t {
            seg += 1;
        }
        let p = if seg + 1 >= knots.len() {
            knots[seg].1
        } else {
            let (t0, p0) = knots[seg];
            let (t1, p1) = knots[seg + 1];
            if t1 - t0 < 1e-12 {
                p1
            } else {
                p0.lerp(p1, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0))
            }
        };
        waypoints.push(p);
        if t >= end {
            break;
        }
        t = (t + period).min(end);
    }
    HumanPrediction {
        waypoints,
        source: PredictionSource::Astar,
        period: Some(period),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialForceParams {
    pub relaxation_time: f64,
    pub interaction_strength: f64,
    pub interaction_range: f64,
    pub wall_strength: f64,
    pub wall_range: f64,
    pub desired_speed: f64,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        Self {
            relaxation_time: 0.5,
            interaction_strength: 4.0,
            interaction_range: 0.3,
            wall_strength: 5.0,
            wall_range: 0.1,
            desired_speed: 1.3,
        }
    }
}

impl SocialForceParams {
    pub fn validate(&self) -> bool {
        [
            self.relaxation_time,
            self.interaction_strength,
            self.interaction_range,
            self.wall_strength,
            self.wall_range,
            self.desired_speed,
        ]
        .iter()
        .all(|v| *v > 0.0)
    }
}

/// A repulsive agent moving in a straight line toward its goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualAgent {
    pub position: Vec2,
    pub goal: Vec2,
    pub speed: f64,
    pub radius: f64,
}

impl VirtualAgent {
    pub fn advance(&mut self, dt: f64) {
        let d = self.goal - self.position;
        let step = self.speed * dt;
        if d.norm() <= step {
            self.position = self.goal;
        } else {
            self.position += d / d.norm() * step;
        }
    }
}

/// Agents for the current belief: one per believed zone, spawned at the robot
/// and heading to the zone center around `human_anchor`. Empty and full beliefs
/// say nothing about the robot and yield no agents.
pub fn virtual_agents(
    belief: &Belief,
    layout: &ZoneLayout,
    robot: Vec2,
    human_anchor: Vec2,
    speed: f64,
    radius: f64,
) -> Vec<VirtualAgent> {
    if !belief.is_informative() {
        return Vec::new();
    }
    belief
        .ones()
        .map(|i| VirtualAgent {
            position: robot,
            goal: layout.center(i, human_anchor),
            speed,
            radius,
        })
        .collect()
}

/// The robot itself as seen by the human: at its position, projected along its velocity.
pub fn robot_agent(robot: &RobotState, v: f64, horizon: f64, radius: f64) -> VirtualAgent {
    VirtualAgent {
        position: robot.position(),
        goal: robot.position() + robot.heading() * (v * horizon),
        speed: v.abs(),
        radius,
    }
}

/// Force on the human at rest from the goal term alone, and the full social force.
pub fn social_force(
    h: &HumanState,
    desired: Option<Vec2>,
    agents: &[VirtualAgent],
    scenario: &Scenario,
    params: &SocialForceParams,
) -> Vec2 {
    let target_v = desired.map_or(Vec2::ZERO, |d| d * params.desired_speed);
    let mut f = (target_v - h.velocity) / params.relaxation_time;
    let cap = 10.0 * params.interaction_strength;
    for a in agents {
        let d = h.position - a.position;
        let dist = d.norm();
        let n = d
            .normalized()
            .unwrap_or_else(|| desired.map_or(Vec2::new(1.0, 0.0), |v| -v));
        let mag = params.interaction_strength * ((scenario.r_h + a.radius - dist) / params.interaction_range).exp();
        f += n * mag.min(cap);
    }
    let mut walls: Vec<Vec2> = scenario.obstacles.iter().map(|o| o.closest_point(h.position)).collect();
    walls.push(scenario.bounds.closest_boundary_point(h.position));
    for w in walls {
        let d = h.position - w;
        let dist = d.norm();
        if let Some(n) = d.normalized() {
            let mag = params.wall_strength * ((scenario.r_h - dist) / params.wall_range).exp();
            f += n * mag.min(cap);
        }
    }
    f
}

/// One social-forces step for the executed human. Moves that would overlap a
/// wall or the robot are refused and the human stops.
#[allow(clippy::too_many_arguments)]
pub fn step_social_forces(
    h: &HumanState,
    nav: &Navigator,
    agents: &[VirtualAgent],
    robot: Option<Vec2>,
    scenario: &Scenario,
    params: &SocialForceParams,
    v_max: f64,
    dt: f64,
) -> HumanState {
    if nav.goal.contains(h.position) {
        return HumanState::at_rest(h.position);
    }
    let desired = nav.desired_direction(h.position, scenario, 1.5);
    let f = social_force(h, desired, agents, scenario, params);
    let v = (h.velocity + f * dt).clamp_norm(v_max);
    let ok = |p: Vec2| {
        scenario.point_in_freespace(p, scenario.r_h) && robot.is_none_or(|r| p.dist(r) > scenario.r_h + scenario.r_r)
    };
    for frac in [1.0, 0.5] {
        let p = h.position + v * (dt * frac);
        if ok(p) {
            return HumanState::new(p, v * frac);
        }
    }
    HumanState::at_rest(h.position)
}
