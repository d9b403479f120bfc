//! Time-based RRT with barrier-filtered edges and diverse plan selection.

use std::fmt::Write as _;

use rand::Rng;

use crate::dynamics::{integrate, ControlBounds, RobotControl, RobotState, TimedPlan};
use crate::geom::{wrap_angle, Vec2};
use crate::safety::{safe_control, safety_value, PredictedHumanTube, SafetyParams};
use crate::world::{GoalDisk, GridAbstraction, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexCostWeights {
    pub w_dg: f64,
    pub w_dh: f64,
    pub w_g: f64,
    pub w_t: f64,
}

impl Default for VertexCostWeights {
    fn default() -> Self {
        Self {
            w_dg: 1.0,
            w_dh: 0.5,
            w_g: 0.3,
            w_t: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiverseCostWeights {
    pub w_c: f64,
    pub w_d: f64,
}

impl Default for DiverseCostWeights {
    fn default() -> Self {
        Self { w_c: 1.0, w_d: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtVertex {
    pub state: RobotState,
    pub time: f64,
    pub depth: usize,
    pub parent: Option<usize>,
    pub edge_control: RobotControl,
    pub cost: f64,
}

/// Number of grid-spaced points on the segment `p -> goal` that land in occupied cells.
pub fn trap_count(p: Vec2, goal: Vec2, grid: &GridAbstraction) -> usize {
    let len = p.dist(goal);
    let n = (len / grid.cell_size).floor() as usize;
    (1..=n)
        .map(|k| p.lerp(goal, k as f64 * grid.cell_size / len))
        .filter(|q| grid.is_blocked_at(*q))
        .count()
}

pub fn vertex_cost(
    state: &RobotState,
    goal: &GoalDisk,
    human: Vec2,
    weights: &VertexCostWeights,
    grid: &GridAbstraction,
) -> f64 {
    let p = state.position();
    let to_goal = goal.center - p;
    let heading_err = if to_goal.norm() < 1e-12 {
        0.0
    } else {
        wrap_angle(to_goal.angle() - state.theta).abs()
    };
    weights.w_dg * to_goal.norm()
        + weights.w_dh * p.dist(human)
        + weights.w_g * heading_err
        + weights.w_t * trap_count(p, goal.center, grid) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    pub budget: usize,
    pub horizon_steps: usize,
    pub goal_bias: f64,
    pub heading_gain: f64,
    pub max_attempts: usize,
}

impl RrtParams {
    pub fn for_scenario(s: &Scenario) -> Self {
        Self {
            budget: 300,
            horizon_steps: s.horizon_steps(),
            goal_bias: 0.1,
            heading_gain: 2.0,
            max_attempts: 6000,
        }
    }
}

/// Everything the tree needs besides the tube.
pub struct ExpandContext<'a> {
    pub scenario: &'a Scenario,
    pub grid: &'a GridAbstraction,
    pub safety: SafetyParams,
    pub bounds: ControlBounds,
    pub weights: VertexCostWeights,
    pub params: RrtParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub vertices: Vec<RrtVertex>,
    pub dt: f64,
}

impl Tree {
    pub fn root(&self) -> &RrtVertex {
        &self.vertices[0]
    }

    pub fn is_root_only(&self) -> bool {
        self.vertices.len() == 1
    }

    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut ids = vec![id];
        let mut cur = id;
        while let Some(p) = self.vertices[cur].parent {
            ids.push(p);
            cur = p;
        }
        ids.reverse();
        ids
    }

    pub fn plan_to(&self, id: usize) -> TimedPlan {
        let ids = self.path_to(id);
        let root = &self.vertices[ids[0]];
        let mut plan = TimedPlan::new(root.time, self.dt, root.state);
        for &i in &ids[1..] {
            plan.states.push(self.vertices[i].state);
            plan.controls.push(self.vertices[i].edge_control);
        }
        plan
    }

    /// Vertex list as `id parent depth t x y theta v omega cost`, one per line.
    pub fn dump(&self) -> String {
        let mut out = String::from("# id parent depth t x y theta v omega cost\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let parent = v.parent.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "{i} {parent} {} {} {} {} {} {} {} {}",
                v.depth, v.time, v.state.x, v.state.y, v.state.theta, v.edge_control.v, v.edge_control.omega, v.cost
            );
        }
        out
    }
}

fn nominal_control(from: &RobotState, target: Vec2, bounds: &ControlBounds, gain: f64) -> RobotControl {
    let e = wrap_angle((target - from.position()).angle() - from.theta);
    let dist = from.position().dist(target);
    let v = bounds.v_max.min(dist / 0.1) * e.cos();
    let omega = if e.cos() >= 0.0 {
        gain * e
    } else {
        gain * wrap_angle(e - std::f64::consts::PI)
    };
    bounds.clamp(RobotControl::new(v, omega))
}

/// Uniform free position within `reach` of `center`, clipped to the map.
fn sample_free(rng: &mut impl Rng, s: &Scenario, center: Vec2, reach: f64) -> Vec2 {
    let b = &s.bounds;
    let lo = Vec2::new((center.x - reach).max(b.min.x), (center.y - reach).max(b.min.y));
    let hi = Vec2::new((center.x + reach).min(b.max.x), (center.y + reach).min(b.max.y));
    for _ in 0..1000 {
        let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if p.dist(center) <= reach && s.point_in_freespace(p, s.r_r) {
            return p;
        }
    }
    s.robot_goal.center
}

/// Grow a tree from `root` whose edges keep the robot outside the tube and in free space.
pub fn expand_tree(root: RrtVertex, tube: &PredictedHumanTube, ctx: &ExpandContext, rng: &mut impl Rng) -> Tree {
    let s = ctx.scenario;
    let dt = s.dt;
    let h = ctx.params.horizon_steps;
    let mut root = root;
    root.depth = 0;
    root.parent = None;
    root.cost = vertex_cost(&root.state, &s.robot_goal, tube.center(0), &ctx.weights, ctx.grid);
    let mut tree = Tree {
        vertices: vec![root],
        dt,
    };
    if safety_value(&tree.vertices[0].state, tube.center(0), &ctx.safety) < 0.0 {
        return tree;
    }
    let t0 = tree.vertices[0].time;
    let v_max = ctx.bounds.v_max;
    let origin = tree.vertices[0].state.position();
    let reach = v_max * h as f64 * dt;
    for _ in 0..ctx.params.max_attempts {
        if tree.vertices.len() >= ctx.params.budget {
            break;
        }
        let target = if rng.gen::<f64>() < ctx.params.goal_bias {
            s.robot_goal.center
        } else {
            sample_free(rng, s, origin, reach)
        };
        let t_target = rng.gen_range(0.0..=(h as f64 * dt));
        let mut best: Option<(f64, usize)> = None;
        for (i, v) in tree.vertices.iter().enumerate() {
            if v.depth >= h {
                continue;
            }
            let d = v.state.position().dist(target) + v_max * (v.time - t0 - t_target).abs();
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, i));
            }
        }
        let Some((_, pi)) = best else { break };
        let parent = &tree.vertices[pi];
        let depth = parent.depth + 1;
        let center = tube.center(depth);
        let nominal = nominal_control(&parent.state, target, &ctx.bounds, ctx.params.heading_gain);
        let Ok(a) = safe_control(&parent.state, nominal, center, &ctx.safety, &ctx.bounds) else {
            continue;
        };
        let child = integrate(parent.state, a, dt);
        if !s.segment_in_freespace(parent.state.position(), child.position(), s.r_r) {
            continue;
        }
        if safety_value(&child, center, &ctx.safety) < 0.0 {
            continue;
        }
        let cost = vertex_cost(&child, &s.robot_goal, center, &ctx.weights, ctx.grid);
        let time = parent.time + dt;
        tree.vertices.push(RrtVertex {
            state: child,
            time,
            depth,
            parent: Some(pi),
            edge_control: a,
            cost,
        });
    }
    tree
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("insufficient vertices: need {need}, have {have}")]
    InsufficientVertices { need: usize, have: usize },
    #[error("p must be at least 1")]
    ZeroP,
}

/// Diversity-weighted cost of a subset given costs and positions.
pub fn diverse_cost(subset: &[usize], costs: &[f64], points: &[Vec2], w: &DiverseCostWeights) -> f64 {
    let mut total = 0.0;
    for &i in subset {
        let denom: f64 = subset
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| points[i].dist(points[j]))
            .sum::<f64>()
            * w.w_d;
        if denom <= 0.0 {
            return f64::INFINITY;
        }
        total += w.w_c * costs[i] / denom;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen item indices, sorted ascending.
    pub chosen: Vec<usize>,
    pub initial_cost: f64,
    pub cost: f64,
    pub passes: usize,
    pub accepted_swaps: usize,
}

const MAX_PASSES: usize = 50;

fn lex_less(a: &[usize], b: &[usize]) -> bool {
    a < b
}

/// Local search over `p`-subsets: starting from a random subset, each outside item
/// is tried in place of every member and the best strict improvement is kept.
pub fn select_diverse(
    costs: &[f64],
    points: &[Vec2],
    p: usize,
    w: &DiverseCostWeights,
    rng: &mut impl Rng,
) -> Result<Selection, SelectError> {
    let n = costs.len();
    if p == 0 {
        return Err(SelectError::ZeroP);
    }
    if n < p {
        return Err(SelectError::InsufficientVertices { need: p, have: n });
    }
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, n, p).into_vec();
    chosen.sort_unstable();
    let initial_cost = diverse_cost(&chosen, costs, points, w);
    let mut cost = initial_cost;
    let mut passes = 0;
    let mut accepted_swaps = 0;
    while passes < MAX_PASSES {
        passes += 1;
        let mut improved = false;
        for nu in 0..n {
            if chosen.contains(&nu) {
                continue;
            }
            // the p + 1 combinations of chosen ∪ {nu} that drop one element
            let mut pool = chosen.clone();
            pool.push(nu);
            pool.sort_unstable();
            let mut best: Option<(f64, Vec<usize>)> = None;
            for drop in 0..pool.len() {
                let cand: Vec<usize> = pool
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != drop)
                    .map(|(_, v)| *v)
                    .collect();
                let c = diverse_cost(&cand, costs, points, w);
                let better = match &best {
                    None => true,
                    Some((bc, bv)) => c < *bc || (c == *bc && lex_less(&cand, bv)),
                };
                if better {
                    best = Some((c, cand));
                }
            }
            let (bc, bv) = best.expect("pool is non-empty");
            if bc < cost {
                cost = bc;
                chosen = bv;
                improved = true;
                accepted_swaps += 1;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Selection {
        chosen,
        initial_cost,
        cost,
        passes,
        accepted_swaps,
    })
}

/// Vertex ids eligible as plan endpoints: full-horizon vertices when there are at
/// least `p` of them, otherwise every non-root vertex.
pub fn plan_candidates(tree: &Tree, p: usize, horizon_steps: usize) -> Vec<usize> {
    let deep: Vec<usize> = (1..tree.vertices.len())
        .filter(|&i| tree.vertices[i].depth >= horizon_steps)
        .collect();
    if deep.len() >= p {
        deep
    } else {
        (1..tree.vertices.len()).collect()
    }
}

/// Pick `p` diverse plans from the tree, returned best vertex cost first.
pub fn select_diverse_plans(
    tree: &Tree,
    candidates: &[usize],
    p: usize,
    w: &DiverseCostWeights,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, TimedPlan)>, SelectError> {
    let costs: Vec<f64> = candidates.iter().map(|&i| tree.vertices[i].cost).collect();
    let points: Vec<Vec2> = candidates.iter().map(|&i| tree.vertices[i].state.position()).collect();
    let sel = select_diverse(&costs, &points, p, w, rng)?;
    let mut ids: Vec<usize> = sel.chosen.iter().map(|&k| candidates[k]).collect();
    ids.sort_by(|a, b| tree.vertices[*a].cost.total_cmp(&tree.vertices[*b].cost).then(a.cmp(b)));
    Ok(ids.into_iter().map(|id| (id, tree.plan_to(id))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ConvexPolygon;
    use crate::safety::plan_in_safe_set;
    use crate::world::{build_grid_inflated, maps};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn open_room() -> Scenario {
        let mut s = maps::load("basic").unwrap();
        s.obstacles.clear();
        s
    }

    fn ctx<'a>(s: &'a Scenario, grid: &'a GridAbstraction, budget: usize) -> ExpandContext<'a> {
        let mut params = RrtParams::for_scenario(s);
        params.budget = budget;
        ExpandContext {
            scenario: s,
            grid,
            safety: SafetyParams::new(s.epsilon_tube, s.r_h, s.r_r),
            bounds: s.robot_limits,
            weights: VertexCostWeights::default(),
            params,
        }
    }

    fn root_at(s: RobotState) -> RrtVertex {
        RrtVertex {
            state: s,
            time: 0.0,
            depth: 0,
            parent: None,
            edge_control: RobotControl::ZERO,
            cost: 0.0,
        }
    }

    #[test]
    fn vertex_cost_examples() {
        let s = open_room();
        let grid = build_grid_inflated(&s, 0.25, s.r_r).unwrap();
        let w = VertexCostWeights::default();
        let g = GoalDisk::new(Vec2::new(5.0, 5.0), 0.3);
        let human = Vec2::new(2.0, 1.0);
        let at_goal = RobotState::new(5.0, 5.0, 0.0);
        let c = vertex_cost(&at_goal, &g, human, &w, &grid);
        assert!((c - w.w_dh * Vec2::new(5.0, 5.0).dist(human)).abs() < 1e-12);
        let away = RobotState::new(2.0, 5.0, std::f64::consts::PI);
        let c = vertex_cost(&away, &g, Vec2::new(2.0, 5.0), &w, &grid);
        assert!((c - (3.0 + w.w_g * std::f64::consts::PI)).abs() < 1e-9);
    }

    #[test]
    fn trap_term_counts_wall_cells() {
        let mut s = open_room();
        // wall 0.5 m thick: with cell 0.25 and no inflation the segment crosses two cells
        s.obstacles = vec![ConvexPolygon::rect(Vec2::new(5.0, 2.0), Vec2::new(5.5, 8.0))];
        let grid = build_grid_inflated(&s, 0.25, 0.0).unwrap();
        let p = Vec2::new(3.1, 5.1);
        let goal = Vec2::new(7.1, 5.1);
        // oracle: walk every cell crossed by the sample points
        let mut oracle = 0;
        let len = p.dist(goal);
        let n = (len / 0.25).floor() as usize;
        for k in 1..=n {
            let q = p + (goal - p) * (k as f64 * 0.25 / len);
            let c = grid.cell_of(q).unwrap();
            if grid.is_occupied(c) {
                oracle += 1;
            }
        }
        assert_eq!(trap_count(p, goal, &grid), oracle);
        assert_eq!(oracle, 2);
        let w = VertexCostWeights::default();
        let st = RobotState::new(p.x, p.y, 0.0);
        let g = GoalDisk::new(goal, 0.3);
        let base = vertex_cost(&st, &g, p, &VertexCostWeights { w_t: 0.0, ..w }, &grid);
        assert!((vertex_cost(&st, &g, p, &w, &grid) - base - 2.0 * w.w_t).abs() < 1e-12);
    }

    #[test]
    fn empty_room_tree_grows_toward_goal() {
        let mut s = open_room();
        s.robot_start = RobotState::new(3.0, 5.0, 0.0);
        s.robot_goal = GoalDisk::new(Vec2::new(4.5, 5.0), 0.3);
        let grid = build_grid_inflated(&s, 0.25, s.r_r).unwrap();
        let c = ctx(&s, &grid, 300);
        let tube = PredictedHumanTube::new(0.0, s.dt, vec![Vec2::new(8.0, 1.0)], c.safety.radius());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = expand_tree(root_at(s.robot_start), &tube, &c, &mut rng);
        assert_eq!(tree.vertices.len(), 300);
        let closest = tree
            .vertices
            .iter()
            .map(|v| v.state.position().dist(s.robot_goal.center))
            .fold(f64::INFINITY, f64::min);
        assert!(closest < 0.5, "closest vertex {closest} m from the goal");
    }

    #[test]
    fn enclosed_robot_gets_root_only_tree() {
        let mut s = open_room();
        let c0 = s.robot_start.position();
        let r = s.r_r;
        s.obstacles = vec![
            ConvexPolygon::rect(Vec2::new(c0.x - 2.0, c0.y + r), Vec2::new(c0.x + 2.0, c0.y + 2.0)),
            ConvexPolygon::rect(Vec2::new(c0.x - 2.0, c0.y - 2.0), Vec2::new(c0.x + 2.0, c0.y - r)),
            ConvexPolygon::rect(Vec2::new(c0.x - 2.0, c0.y - r), Vec2::new(c0.x - r, c0.y + r)),
            ConvexPolygon::rect(Vec2::new(c0.x + r, c0.y - r), Vec2::new(c0.x + 2.0, c0.y + r)),
        ];
        let grid = build_grid_inflated(&s, 0.25, 0.0).unwrap();
        let c = ctx(&s, &grid, 100);
        let tube = PredictedHumanTube::new(0.0, s.dt, vec![Vec2::new(9.0, 9.0)], c.safety.radius());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(expand_tree(root_at(s.robot_start), &tube, &c, &mut rng).is_root_only());
    }

    #[test]
    fn unsafe_root_gets_root_only_tree() {
        let s = open_room();
        let grid = build_grid_inflated(&s, 0.25, s.r_r).unwrap();
        let c = ctx(&s, &grid, 100);
        let tube = PredictedHumanTube::new(0.0, s.dt, vec![s.robot_start.position()], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(expand_tree(root_at(s.robot_start), &tube, &c, &mut rng).is_root_only());
    }

    #[test]
    fn selected_plans_are_safe_and_replay() {
        let s = open_room();
        let grid = build_grid_inflated(&s, 0.25, s.r_r).unwrap();
        let c = ctx(&s, &grid, 300);
        let centers: Vec<Vec2> = (0..=20).map(|k| Vec2::new(6.0 - 0.1 * k as f64, 5.2)).collect();
        let tube = PredictedHumanTube::new(0.0, s.dt, centers, c.safety.radius());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tree = expand_tree(root_at(s.robot_start), &tube, &c, &mut rng);
        for id in 0..tree.vertices.len() {
            assert!(plan_in_safe_set(&tree.plan_to(id), &tube).unwrap());
        }
        let cands = plan_candidates(&tree, 4, c.params.horizon_steps);
        let plans = select_diverse_plans(&tree, &cands, 4, &DiverseCostWeights::default(), &mut rng).unwrap();
        assert_eq!(plans.len(), 4);
        for w in plans.windows(2) {
            assert!(tree.vertices[w[0].0].cost <= tree.vertices[w[1].0].cost);
        }
        for (_, plan) in &plans {
            assert_eq!(plan.states[0], s.robot_start);
            plan.check_replay(&s.robot_limits).unwrap();
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = open_room();
        let grid = build_grid_inflated(&s, 0.25, s.r_r).unwrap();
        let c = ctx(&s, &grid, 150);
        let tube = PredictedHumanTube::new(0.0, s.dt, vec![Vec2::new(5.0, 7.0)], c.safety.radius());
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = expand_tree(root_at(s.robot_start), &tube, &c, &mut rng);
            let cands = plan_candidates(&t, 3, c.params.horizon_steps);
            let p = select_diverse_plans(&t, &cands, 3, &DiverseCostWeights::default(), &mut rng).unwrap();
            (t, p)
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn collinear_triple_picks_endpoints() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let costs = [1.0; 3];
        let w = DiverseCostWeights::default();
        let mut best = (f64::INFINITY, vec![]);
        for a in 0..3 {
            for b in a + 1..3 {
                let c = diverse_cost(&[a, b], &costs, &pts, &w);
                if c < best.0 {
                    best = (c, vec![a, b]);
                }
            }
        }
        assert_eq!(best.1, vec![0, 2]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sel = select_diverse(&costs, &pts, 2, &w, &mut rng).unwrap();
            assert_eq!(sel.chosen, vec![0, 2]);
        }
    }

    #[test]
    fn exact_size_and_errors() {
        let pts = [Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)];
        let costs = [2.0, 1.0];
        let w = DiverseCostWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = select_diverse(&costs, &pts, 2, &w, &mut rng).unwrap();
        assert_eq!(sel.chosen, vec![0, 1]);
        assert!((sel.cost - 3.0 / 5.0).abs() < 1e-12);
        assert_eq!(
            select_diverse(&costs, &pts, 3, &w, &mut rng),
            Err(SelectError::InsufficientVertices { need: 3, have: 2 })
        );
        let dup = [Vec2::ZERO, Vec2::ZERO];
        assert!(diverse_cost(&[0, 1], &costs, &dup, &w).is_infinite());
    }
}
