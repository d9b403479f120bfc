//! Per-cycle search over (motion plan, signal) branches.

use rand::Rng;
use rayon::prelude::*;

use crate::belief::{observe, update_belief, Belief, Reach, SensorModel, Signal, ZoneLayout};
use crate::dynamics::{discretize_plan, RobotState, TimedPlan};
use crate::geom::Vec2;
use crate::human::{belief_cells, predict_astar_timed, DwaPredictor, HumanState, DEFAULT_CELL};
use crate::safety::{PredictedHumanTube, SafetyParams};
use crate::search::{astar, Passable};
use crate::tbrrt::{
    expand_tree, plan_candidates, select_diverse_plans, DiverseCostWeights, ExpandContext, RrtParams, RrtVertex, Tree,
    VertexCostWeights,
};
use crate::world::{build_grid_inflated, GridAbstraction, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub eta_r: f64,
    pub eta_h: f64,
    pub eta_p: f64,
    pub eta_c: f64,
    pub comm_costs: Vec<(Signal, f64)>,
    pub sigma_safe: f64,
}

impl CostWeights {
    pub fn comm_cost(&self, s: &Signal) -> Option<f64> {
        self.comm_costs.iter().find(|(k, _)| k == s).map(|(_, c)| *c)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("eta_R", self.eta_r),
            ("eta_H", self.eta_h),
            ("eta_P", self.eta_p),
            ("eta_C", self.eta_c),
        ] {
            if !(v >= 0.0) {
                return Err(format!("{name} ≥ 0"));
            }
        }
        for (s, c) in &self.comm_costs {
            if !(*c >= 0.0) {
                return Err(format!("communication cost of `{s}` ≥ 0"));
            }
            if s.is_null() && *c != 0.0 {
                return Err("null signal has communication cost 0".into());
            }
        }
        Ok(())
    }

    /// Robot/human weights for priority factor `f` with the given total.
    pub fn with_priority(&self, f: f64, total: f64) -> Self {
        Self {
            eta_r: f * total,
            eta_h: (1.0 - f) * total,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CommError {
    #[error("path has no waypoints")]
    EmptyPath,
}

pub fn path_cost(waypoints: &[Vec2]) -> Result<f64, CommError> {
    if waypoints.is_empty() {
        return Err(CommError::EmptyPath);
    }
    Ok(waypoints.windows(2).map(|w| w[0].dist(w[1])).sum())
}

/// Time-aligned minimum distance less `sigma_safe`, floored at zero. The shorter
/// sequence holds its final waypoint.
pub fn clearance(g1: &[Vec2], g2: &[Vec2], sigma_safe: f64) -> f64 {
    if g1.is_empty() || g2.is_empty() {
        return 0.0;
    }
    let n = g1.len().max(g2.len());
    let at = |g: &[Vec2], i: usize| g[i.min(g.len() - 1)];
    let d_min = (0..n).map(|i| at(g1, i).dist(at(g2, i))).fold(f64::INFINITY, f64::min);
    (d_min - sigma_safe).max(0.0)
}

/// Branch cost; infinite when the clearance vanishes or the human has no path.
pub fn branch_cost(c_r: f64, c_h: f64, clear: f64, human_blocked: bool, comm: f64, w: &CostWeights) -> f64 {
    if clear <= 0.0 || human_blocked {
        return f64::INFINITY;
    }
    w.eta_r * c_r + w.eta_h * c_h + w.eta_p / clear + w.eta_c * comm
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub robot: RobotState,
    pub human: HumanState,
    pub signal: Signal,
    pub plan_index: usize,
    pub plan: TimedPlan,
    pub posterior: Belief,
    pub gamma_r: Vec<Vec2>,
    pub gamma_h: Vec<Vec2>,
    pub cost: f64,
}

pub fn node_cost(n: &SearchNode, w: &CostWeights) -> f64 {
    let comm = w.comm_cost(&n.signal).unwrap_or(0.0);
    let c_r = path_cost(&n.gamma_r).unwrap_or(0.0);
    let c_h = path_cost(&n.gamma_h).unwrap_or(0.0);
    let clear = clearance(&n.gamma_r, &n.gamma_h, w.sigma_safe);
    branch_cost(c_r, c_h, clear, n.gamma_h.is_empty(), comm, w)
}

/// Resample a polyline at fixed arc-length spacing, keeping both ends.
pub fn resample(points: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let Some(&first) = points.first() else {
        return Vec::new();
    };
    let mut out = vec![first];
    let mut carry = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        if len < 1e-12 {
            continue;
        }
        let mut s = spacing - carry;
        while s <= len + 1e-12 {
            out.push(a.lerp(b, (s / len).min(1.0)));
            s += spacing;
        }
        carry = len - (s - spacing);
    }
    let last = *points.last().expect("non-empty");
    if out.last().is_none_or(|p| p.dist(last) > 1e-9) {
        out.push(last);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub plan_index: usize,
    pub signal: Signal,
    pub posterior: Belief,
    pub c_r: f64,
    pub c_h: f64,
    pub clearance: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleDecision {
    pub tree_size: usize,
    pub plans: Vec<TimedPlan>,
    pub branches: Vec<BranchRecord>,
    /// Index into `branches`, `None` when the tree produced no plan.
    pub chosen: Option<usize>,
    pub fallback: bool,
    pub tube: PredictedHumanTube,
    pub sensor_queries: usize,
}

impl CycleDecision {
    pub fn signal(&self) -> Signal {
        self.chosen
            .map_or_else(Signal::null, |i| self.branches[i].signal.clone())
    }

    pub fn plan(&self) -> Option<&TimedPlan> {
        self.chosen.map(|i| &self.plans[self.branches[i].plan_index])
    }

    pub fn posterior(&self, prior: Belief) -> Belief {
        self.chosen.map_or(prior, |i| self.branches[i].posterior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub stride: usize,
    pub rrt_budget: usize,
    pub threads: usize,
    pub diverse: DiverseCostWeights,
    pub vertex: VertexCostWeights,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            stride: 2,
            rrt_budget: 300,
            threads: 1,
            diverse: DiverseCostWeights::default(),
            vertex: VertexCostWeights::default(),
        }
    }
}

/// Long-lived planner state for one episode.
pub struct Planner {
    pub scenario: Scenario,
    pub config: PlannerConfig,
    pub layout: ZoneLayout,
    pub reach: Reach,
    /// Absent when the vocabulary holds only the null signal.
    pub sensor: Option<SensorModel>,
    pub safety: SafetyParams,
    pub robot_grid: GridAbstraction,
    pub human_grid: GridAbstraction,
    pub dwa: DwaPredictor,
    pool: Option<rayon::ThreadPool>,
}

impl Planner {
    pub fn new(scenario: &Scenario, config: PlannerConfig) -> Self {
        let layout = ZoneLayout::square(scenario.delta_neighborhood);
        let steps = scenario.horizon_steps();
        let reach = Reach::by_rollout(&layout, scenario.robot_limits.v_max, scenario.dt, steps);
        let sensor = (scenario.comm_vocab.len() > 1)
            .then(|| SensorModel::with_conflation(scenario.comm_vocab.clone(), scenario.conflation.clone()));
        let robot_grid = build_grid_inflated(scenario, DEFAULT_CELL, scenario.r_r).expect("grid fits map");
        let human_grid = build_grid_inflated(scenario, DEFAULT_CELL, scenario.r_h).expect("grid fits map");
        let dwa = DwaPredictor::new(scenario, scenario.human_goal);
        let pool = (config.threads > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .expect("thread pool")
        });
        Self {
            scenario: scenario.clone(),
            config,
            layout,
            reach,
            sensor,
            safety: SafetyParams::new(scenario.epsilon_tube, scenario.r_h, scenario.r_r),
            robot_grid,
            human_grid,
            dwa,
            pool,
        }
    }

    pub fn horizon_steps(&self) -> usize {
        self.scenario.horizon_steps()
    }

    pub fn period(&self) -> f64 {
        self.scenario.dt * self.config.stride as f64
    }

    pub fn predict_tube(&self, human: &HumanState, t0: f64) -> PredictedHumanTube {
        let s = &self.scenario;
        let pred = self.dwa.predict(human, s, self.horizon_steps(), s.dt);
        PredictedHumanTube::new(t0, s.dt, pred.waypoints, self.safety.radius())
    }

    pub fn expand(&self, robot: RobotState, t0: f64, tube: &PredictedHumanTube, rng: &mut impl Rng) -> Tree {
        let mut params = RrtParams::for_scenario(&self.scenario);
        params.budget = self.config.rrt_budget;
        let ctx = ExpandContext {
            scenario: &self.scenario,
            grid: &self.robot_grid,
            safety: self.safety,
            bounds: self.scenario.robot_limits,
            weights: self.config.vertex,
            params,
        };
        let root = RrtVertex {
            state: robot,
            time: t0,
            depth: 0,
            parent: None,
            edge_control: Default::default(),
            cost: 0.0,
        };
        expand_tree(root, tube, &ctx, rng)
    }

    /// Plan waypoints followed by a grid path to the goal, one point per period.
    pub fn robot_completion(&self, plan: &TimedPlan) -> Vec<Vec2> {
        let s = &self.scenario;
        let mut gamma = discretize_plan(plan, self.config.stride).expect("plans are non-empty");
        let end = *gamma.last().expect("non-empty");
        if s.robot_goal.contains(end) {
            return gamma;
        }
        let g = &self.robot_grid;
        let mut tail = vec![end];
        if let (Some(a), Some(b)) = (g.nearest_free_cell(end), g.nearest_free_cell(s.robot_goal.center)) {
            if let Some(cells) = astar(&Passable::new(g), a, b) {
                tail.extend(cells.iter().skip(1).map(|c| g.center(*c)));
            }
        }
        tail.push(s.robot_goal.center);
        let spacing = s.robot_limits.v_max * self.period();
        gamma.extend(resample(&tail, spacing).into_iter().skip(1));
        gamma
    }

    /// Human path-to-goal with believed robot zones held until `release`.
    pub fn human_completion(&self, human: &HumanState, posterior: &Belief, release: f64) -> Vec<Vec2> {
        let s = &self.scenario;
        let blocked = if posterior.is_informative() {
            let centers: Vec<Vec2> = posterior
                .ones()
                .map(|i| self.layout.center(i, human.position))
                .collect();
            belief_cells(&self.human_grid, &centers, self.layout.cell_extent / 2.0 + s.r_h)
        } else {
            Vec::new()
        };
        predict_astar_timed(
            human,
            &s.human_goal,
            &self.human_grid,
            &blocked,
            release,
            s.human_v_max,
            self.period(),
        )
        .waypoints
    }

    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        robot: &RobotState,
        human: &HumanState,
        prior: &Belief,
        plan_index: usize,
        plan: &TimedPlan,
        gamma_r: &[Vec2],
        signal: &Signal,
        weights: &CostWeights,
    ) -> (BranchRecord, usize) {
        let _ = robot;
        let mut queries = 0;
        let posterior = match &self.sensor {
            Some(model) => {
                let next = *plan.last().expect("non-empty plan");
                queries += 1;
                let omega = observe(human, signal, &next, model).expect("vocabulary signal");
                update_belief(prior, &omega, &self.layout, model, &self.reach)
            }
            None => *prior,
        };
        let release = ((gamma_r.len().saturating_sub(1)) as f64 * self.period()).max(plan.dt * (plan.len() - 1) as f64);
        let gamma_h = self.human_completion(human, &posterior, release);
        let c_r = path_cost(gamma_r).unwrap_or(0.0);
        let c_h = if gamma_h.is_empty() {
            0.0
        } else {
            path_cost(&gamma_h).unwrap_or(0.0)
        };
        let clear = clearance(gamma_r, &gamma_h, weights.sigma_safe);
        let comm = weights.comm_cost(signal).unwrap_or(0.0);
        let cost = branch_cost(c_r, c_h, clear, gamma_h.is_empty(), comm, weights);
        (
            BranchRecord {
                plan_index,
                signal: signal.clone(),
                posterior,
                c_r,
                c_h,
                clearance: clear,
                cost,
            },
            queries,
        )
    }

    /// One outer iteration: plans from the tree, every signal paired with every
    /// plan, and the cheapest branch (null first, then lower plan index on ties).
    pub fn plan_cycle(
        &self,
        robot: RobotState,
        human: HumanState,
        prior: Belief,
        t0: f64,
        rng: &mut impl Rng,
    ) -> CycleDecision {
        let s = &self.scenario;
        let tube = self.predict_tube(&human, t0);
        let tree = self.expand(robot, t0, &tube, rng);
        let tree_size = tree.vertices.len();
        let mut decision = CycleDecision {
            tree_size,
            plans: Vec::new(),
            branches: Vec::new(),
            chosen: None,
            fallback: false,
            tube,
            sensor_queries: 0,
        };
        if tree.is_root_only() {
            return decision;
        }
        let cands = plan_candidates(&tree, s.p_plans, self.horizon_steps());
        let p = s.p_plans.min(cands.len());
        let plans: Vec<TimedPlan> = select_diverse_plans(&tree, &cands, p, &self.config.diverse, rng)
            .expect("p never exceeds the candidate count")
            .into_iter()
            .map(|(_, plan)| plan)
            .collect();
        let mut signals: Vec<Signal> = s.comm_vocab.clone();
        signals.sort_by_key(|sig| !sig.is_null());
        let gammas: Vec<Vec<Vec2>> = plans.iter().map(|p| self.robot_completion(p)).collect();
        let jobs: Vec<(usize, Signal)> = signals
            .iter()
            .flat_map(|sig| (0..plans.len()).map(move |j| (j, sig.clone())))
            .collect();
        let weights = &s.weights;
        let eval = |(j, sig): &(usize, Signal)| {
            self.evaluate(&robot, &human, &prior, *j, &plans[*j], &gammas[*j], sig, weights)
        };
        let results: Vec<(BranchRecord, usize)> = match &self.pool {
            Some(pool) => pool.install(|| jobs.par_iter().map(eval).collect()),
            None => jobs.iter().map(eval).collect(),
        };
        decision.sensor_queries = results.iter().map(|(_, q)| q).sum();
        decision.branches = results.into_iter().map(|(b, _)| b).collect();
        // jobs are ordered null first, then by plan index, so the first minimum wins ties
        let mut best: Option<usize> = None;
        for (i, b) in decision.branches.iter().enumerate() {
            if b.cost.is_finite() && best.is_none_or(|k| b.cost < decision.branches[k].cost) {
                best = Some(i);
            }
        }
        decision.chosen = Some(match best {
            Some(i) => i,
            None => {
                decision.fallback = true;
                decision
                    .branches
                    .iter()
                    .position(|b| b.signal.is_null() && b.plan_index == 0)
                    .expect("null branch on the first plan")
            }
        });
        decision.plans = plans;
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::maps;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w() -> CostWeights {
        CostWeights {
            eta_r: 1.5,
            eta_h: 0.25,
            eta_p: 3.0,
            eta_c: 1.0,
            comm_costs: vec![(Signal::null(), 0.0), (Signal::new("east"), 1.0)],
            sigma_safe: 0.5,
        }
    }

    #[test]
    fn path_cost_examples() {
        assert_eq!(path_cost(&[Vec2::ZERO, Vec2::new(3.0, 4.0)]).unwrap(), 5.0);
        assert_eq!(path_cost(&[Vec2::new(1.0, 1.0)]).unwrap(), 0.0);
        assert_eq!(
            path_cost(&[Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)]).unwrap(),
            2.0
        );
        assert_eq!(path_cost(&[]), Err(CommError::EmptyPath));
    }

    #[test]
    fn clearance_examples() {
        let a: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let b: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 2.0)).collect();
        assert!((clearance(&a, &b, 0.5) - 1.5).abs() < 1e-12);
        // crossing at (2, 0) at different indices
        let h: Vec<Vec2> = (0..5).map(|i| Vec2::new(2.0, 2.0 - i as f64)).collect();
        let d_min = (0..5).map(|i| a[i].dist(h[i])).fold(f64::INFINITY, f64::min);
        assert!((clearance(&a, &h, 0.5) - (d_min - 0.5).max(0.0)).abs() < 1e-12);
        let c = vec![Vec2::new(0.0, 0.0)];
        assert_eq!(clearance(&a, &c, 0.5), 0.0);
        // shorter sequence holds its last point
        let short = vec![Vec2::new(10.0, 0.0)];
        assert!((clearance(&a, &short, 0.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn node_cost_examples() {
        let w = w();
        assert!((branch_cost(4.0, 6.0, 1.0, false, 1.0, &w) - 11.5).abs() < 1e-12);
        assert!(branch_cost(4.0, 6.0, 0.0, false, 1.0, &w).is_infinite());
        let w0 = CostWeights {
            eta_p: 0.0,
            ..w.clone()
        };
        assert!(branch_cost(4.0, 6.0, 0.0, false, 0.0, &w0).is_infinite());
        assert!(branch_cost(4.0, 6.0, 1.0, true, 0.0, &w).is_infinite());
    }

    #[test]
    fn resample_spacing() {
        let pts = [Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        let r = resample(&pts, 0.3);
        for w in r.windows(2).take(r.len() - 2) {
            assert!(w[0].dist(w[1]) <= 0.3 + 1e-9);
        }
        assert_eq!(*r.last().unwrap(), Vec2::new(1.0, 1.0));
        assert!((path_cost(&r).unwrap() - 2.0).abs() < 0.1);
    }

    #[test]
    fn far_human_selects_null() {
        let mut s = maps::load("basic").unwrap();
        s.human_start = HumanState::at_rest(Vec2::new(9.0, 9.0));
        s.human_goal.center = Vec2::new(9.0, 8.0);
        let planner = Planner::new(&s, PlannerConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = planner.plan_cycle(s.robot_start, s.human_start, Belief::empty(9), 0.0, &mut rng);
        assert!(!d.fallback);
        assert!(d.signal().is_null());
        assert_eq!(d.branches.len(), d.plans.len() * s.comm_vocab.len());
        let chosen = &d.branches[d.chosen.unwrap()];
        for b in &d.branches {
            if !b.signal.is_null() && b.plan_index == chosen.plan_index {
                assert!(b.cost > chosen.cost);
            }
        }
    }

    #[test]
    fn baseline_never_queries_sensor() {
        let s = maps::load("hallway").unwrap().without_communication();
        let planner = Planner::new(&s, PlannerConfig::default());
        assert!(planner.sensor.is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = planner.plan_cycle(s.robot_start, s.human_start, Belief::empty(9), 0.0, &mut rng);
        assert_eq!(d.sensor_queries, 0);
        assert!(d.signal().is_null());
    }
}
