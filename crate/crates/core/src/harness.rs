//! Episode loop, metrics, batch runner and trajectory logs.

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::belief::{observe, update_belief, Belief, Signal};
use crate::commplanner::{Planner, PlannerConfig};
use crate::dynamics::{in_goal, integrate, RobotControl, RobotState, TimedPlan};
use crate::geom::Vec2;
use crate::human::{robot_agent, step_social_forces, virtual_agents, HumanState, Navigator, SocialForceParams};
use crate::safety::{safe_control, safety_value, SafetyParams};
use crate::search::{astar, Passable};
use crate::world::{GoalDisk, GridAbstraction, Scenario};

pub const ETA_CONST: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Goal,
    Deadlock,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Goal => "GOAL",
            Outcome::Deadlock => "DEADLOCK",
            Outcome::Timeout => "TIMEOUT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Full,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Full => "full",
            Method::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub scenario: String,
    pub method: Method,
    pub seed: u64,
    pub f_priority: Option<f64>,
    pub outcome: Outcome,
    /// Distance travelled by each agent.
    pub r_cost_to_goal: f64,
    pub h_cost_to_goal: f64,
    pub rns: Option<f64>,
    pub hns: Option<f64>,
    pub pi: usize,
    pub pc: f64,
    pub steps: usize,
    pub fallback_cycles: usize,
    pub sensor_queries: usize,
    /// Executed states with B < 0 against the cycle's tube, in cycles that started
    /// safe and while the human has stayed inside the tube.
    pub safety_violations: usize,
    /// States with B < 0 after a tube breach, in a cycle that started unsafe, or in a
    /// wait cycle where no control keeps B >= 0 for the next step.
    pub breach_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityTrace {
    pub zetas: Vec<f64>,
    pub thresh: f64,
}

impl ProximityTrace {
    pub fn build(gamma_r: &[Vec2], gamma_h: &[Vec2], params: &SafetyParams, thresh: f64) -> Self {
        let n = gamma_r.len().max(gamma_h.len());
        let r2 = params.radius().powi(2);
        let mut zetas = Vec::new();
        if !gamma_r.is_empty() && !gamma_h.is_empty() {
            for i in 0..n {
                let a = gamma_r[i.min(gamma_r.len() - 1)];
                let b = gamma_h[i.min(gamma_h.len() - 1)];
                let z = (a - b).norm_sq() - r2;
                if z < thresh {
                    zetas.push(z);
                }
            }
        }
        Self { zetas, thresh }
    }

    pub fn cost(&self) -> f64 {
        if self.zetas.iter().any(|z| *z < 0.0) {
            f64::INFINITY
        } else if self.zetas.is_empty() {
            0.0
        } else {
            1.0 / self.zetas.iter().sum::<f64>()
        }
    }
}

pub fn proximity_cost(gamma_r: &[Vec2], gamma_h: &[Vec2], params: &SafetyParams, thresh: f64) -> f64 {
    ProximityTrace::build(gamma_r, gamma_h, params, thresh).cost()
}

/// Optimal-over-actual travel speed. `None` for a non-positive time.
pub fn normalized_speed(optimal_cost: f64, actual_time: f64, nominal_speed: f64) -> Option<f64> {
    (actual_time > 0.0).then(|| optimal_cost / nominal_speed / actual_time)
}

/// Shortest path length from `start` into `goal` on the agent-free grid, with
/// line-of-sight shortcuts.
pub fn optimal_cost(scenario: &Scenario, grid: &GridAbstraction, start: Vec2, goal: &GoalDisk, radius: f64) -> f64 {
    if goal.contains(start) {
        return 0.0;
    }
    let (Some(a), Some(b)) = (grid.nearest_free_cell(start), grid.nearest_free_cell(goal.center)) else {
        return f64::INFINITY;
    };
    let Some(cells) = astar(&Passable::new(grid), a, b) else {
        return f64::INFINITY;
    };
    let mut pts = vec![start];
    pts.extend(cells.iter().skip(1).map(|c| grid.center(*c)));
    pts.push(goal.center);
    let mut smooth = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !scenario.segment_in_freespace(pts[i], pts[j], radius * 0.999) {
            j -= 1;
        }
        smooth.push(pts[j]);
        i = j;
    }
    let len: f64 = smooth.windows(2).map(|w| w[0].dist(w[1])).sum();
    (len - goal.radius).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub planner: PlannerConfig,
    pub social: SocialForceParams,
    pub step_cap: usize,
    /// A capped episode is a deadlock when the robot made no progress over this many final steps.
    pub deadlock_window: usize,
    pub progress_eps: f64,
    pub virtual_speed: f64,
    pub pc_thresh: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            social: SocialForceParams::default(),
            step_cap: 2000,
            deadlock_window: 300,
            progress_eps: 0.1,
            virtual_speed: 4.0,
            pc_thresh: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub robot: RobotState,
    pub human: HumanState,
    pub belief: Belief,
    pub signal: Signal,
    /// B between the executed robot and human positions.
    pub b_value: f64,
    /// B against the cycle's predicted tube center.
    pub b_tube: f64,
    pub human_in_tube: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    pub t: f64,
    pub tree_size: usize,
    pub signal: Signal,
    pub plan: Option<usize>,
    pub fallback: bool,
    pub costs: Vec<f64>,
    /// Time-aligned clearance of the chosen branch at selection time.
    pub clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub report: TrialReport,
    pub steps: Vec<StepRecord>,
    pub cycles: Vec<CycleRecord>,
    /// The executed solution: one (signal, partial plan) per non-waiting cycle.
    pub solution: Vec<(Signal, TimedPlan)>,
    pub header: String,
}

/// Deterministic RNG seed from scenario text, trial seed and priority factor.
pub fn trial_seed(scenario: &Scenario, seed: u64, f_priority: Option<f64>) -> u64 {
    let mut h = Sha256::new();
    h.update(scenario.to_text().as_bytes());
    h.update(seed.to_le_bytes());
    h.update(f_priority.map_or(u64::MAX, f64::to_bits).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    let d = Sha256::digest(scenario.to_text().as_bytes());
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One-step control for a wait cycle. Prefers the filtered zero control, otherwise the
/// candidate that leaves the most room to `next_center`. The flag is false when no
/// candidate keeps the barrier non-negative against `next_center`.
pub fn hold_control(
    robot: &RobotState,
    next_center: Vec2,
    safety: &SafetyParams,
    s: &Scenario,
    dt: f64,
) -> (RobotControl, bool) {
    let lim = &s.robot_limits;
    let free = |a: &RobotControl| s.segment_in_freespace(robot.position(), integrate(*robot, *a, dt).position(), s.r_r);
    let margin = |a: &RobotControl| safety_value(&integrate(*robot, *a, dt), next_center, safety);
    if let Ok(a) = safe_control(robot, RobotControl::ZERO, next_center, safety, lim) {
        if free(&a) && margin(&a) >= 0.0 {
            return (a, true);
        }
    }
    let mut best = (RobotControl::ZERO, margin(&RobotControl::ZERO));
    for i in -2..=2 {
        for j in -2..=2 {
            let a = RobotControl::new(lim.v_max * i as f64 / 2.0, lim.omega_max * j as f64 / 2.0);
            let m = margin(&a);
            if free(&a) && m > best.1 {
                best = (a, m);
            }
        }
    }
    (best.0, best.1 >= 0.0)
}

/// Scenario with robot/human weights set from the priority factor.
pub fn prioritized(scenario: &Scenario, f_priority: Option<f64>) -> Scenario {
    let mut s = scenario.clone();
    if let Some(f) = f_priority {
        s.weights = s.weights.with_priority(f, ETA_CONST);
    }
    s
}

pub fn run_episode(
    scenario: &Scenario,
    method: Method,
    seed: u64,
    f_priority: Option<f64>,
    cfg: &EpisodeConfig,
) -> Episode {
    let base = prioritized(scenario, f_priority);
    let s = match method {
        Method::Full => base,
        Method::Baseline => base.without_communication(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(&s, seed, f_priority));
    let planner = Planner::new(&s, cfg.planner);
    let nav = Navigator::new(&s, s.human_goal);
    let robot_nav = Navigator::with_grid(planner.robot_grid.clone(), s.robot_goal);
    let safety = planner.safety;
    let dt = s.dt;

    let mut robot = s.robot_start;
    let mut human = s.human_start;
    let mut belief = Belief::empty(planner.layout.len());
    let mut t = 0.0;
    let mut step = 0usize;
    let mut steps = Vec::new();
    let mut cycles = Vec::new();
    let mut solution = Vec::new();
    let mut r_path = vec![robot.position()];
    let mut h_path = vec![human.position];
    let mut r_time = in_goal(&robot, &s.robot_goal).then_some(0.0);
    let mut h_time = s.human_goal.contains(human.position).then_some(0.0);
    let mut sensor_queries = 0;
    let mut fallback_cycles = 0;
    let mut safety_violations = 0;
    let mut breach_violations = 0;
    let mut best_progress = robot_nav.cost_to_go(robot.position());
    let mut last_progress_step = 0usize;

    let human_step = |robot: &RobotState, v: f64, human: &HumanState, agents: &mut Vec<crate::human::VirtualAgent>| {
        let mut all = agents.clone();
        all.push(robot_agent(robot, v, s.horizon, s.r_r));
        let next = step_social_forces(
            human,
            &nav,
            &all,
            Some(robot.position()),
            &s,
            &cfg.social,
            s.human_v_max,
            dt,
        );
        for a in agents.iter_mut() {
            a.advance(dt);
        }
        next
    };

    while r_time.is_none() && step < cfg.step_cap {
        let cycle = cycles.len();
        let decision = planner.plan_cycle(robot, human, belief, t, &mut rng);
        sensor_queries += decision.sensor_queries;
        if decision.fallback {
            fallback_cycles += 1;
        }
        let tube = decision.tube.clone();
        let mut unprotected = false;
        let (controls, signal) = match decision.plan() {
            Some(plan) => {
                belief = decision.posterior(belief);
                solution.push((decision.signal(), plan.clone()));
                (plan.controls.clone(), decision.signal())
            }
            None => {
                // waiting is silence
                if let Some(model) = &planner.sensor {
                    sensor_queries += 1;
                    let omega = observe(&human, &Signal::null(), &robot, model).expect("null is in every vocabulary");
                    belief = update_belief(&belief, &omega, &planner.layout, model, &planner.reach);
                }
                let (wait, held) = hold_control(&robot, tube.center(1), &safety, &s, dt);
                unprotected = !held;
                (vec![wait], Signal::null())
            }
        };
        let root_safe = safety_value(&robot, tube.center(0), &safety) >= 0.0;
        let mut breached = !root_safe || unprotected;
        cycles.push(CycleRecord {
            cycle,
            t,
            tree_size: decision.tree_size,
            signal: signal.clone(),
            plan: decision.chosen.map(|i| decision.branches[i].plan_index),
            fallback: decision.fallback,
            costs: decision.branches.iter().map(|b| b.cost).collect(),
            clearance: decision.chosen.map(|i| decision.branches[i].clearance),
        });
        let mut agents = virtual_agents(
            &belief,
            &planner.layout,
            robot.position(),
            human.position,
            cfg.virtual_speed,
            s.r_r,
        );
        for (k, a) in controls.iter().enumerate() {
            robot = integrate(robot, *a, dt);
            human = human_step(&robot, a.v, &human, &mut agents);
            step += 1;
            t = step as f64 * dt;
            r_path.push(robot.position());
            h_path.push(human.position);
            if h_time.is_none() && s.human_goal.contains(human.position) {
                h_time = Some(t);
            }
            let center = tube.center(k + 1);
            let b_tube = safety_value(&robot, center, &safety);
            let human_in_tube = human.position.dist(center) <= s.epsilon_tube;
            breached |= !human_in_tube;
            if b_tube < -1e-9 {
                if !breached {
                    safety_violations += 1;
                } else {
                    breach_violations += 1;
                }
            }
            steps.push(StepRecord {
                step,
                t,
                robot,
                human,
                belief,
                signal: signal.clone(),
                b_value: safety_value(&robot, human.position, &safety),
                b_tube,
                human_in_tube,
            });
            if in_goal(&robot, &s.robot_goal) {
                r_time = Some(t);
                break;
            }
            if step >= cfg.step_cap {
                break;
            }
        }
        let progress = robot_nav.cost_to_go(robot.position());
        if progress < best_progress - cfg.progress_eps {
            best_progress = progress;
            last_progress_step = step;
        }
    }
    let outcome = match r_time {
        Some(_) => Outcome::Goal,
        None if step - last_progress_step >= cfg.deadlock_window => Outcome::Deadlock,
        None => Outcome::Timeout,
    };

    // the human keeps walking once the robot is parked
    if outcome == Outcome::Goal {
        let mut none = Vec::new();
        while h_time.is_none() && step < cfg.step_cap {
            human = human_step(&robot, 0.0, &human, &mut none);
            step += 1;
            t = step as f64 * dt;
            h_path.push(human.position);
            if s.human_goal.contains(human.position) {
                h_time = Some(t);
            }
            steps.push(StepRecord {
                step,
                t,
                robot,
                human,
                belief,
                signal: Signal::null(),
                b_value: safety_value(&robot, human.position, &safety),
                b_tube: f64::INFINITY,
                human_in_tube: true,
            });
        }
    }

    let length = |p: &[Vec2]| p.windows(2).map(|w| w[0].dist(w[1])).sum::<f64>();
    let c_r = optimal_cost(&s, &planner.robot_grid, s.robot_start.position(), &s.robot_goal, s.r_r);
    let c_h = optimal_cost(&s, &planner.human_grid, s.human_start.position, &s.human_goal, s.r_h);
    let report = TrialReport {
        scenario: s.map_id.clone(),
        method,
        seed,
        f_priority,
        outcome,
        r_cost_to_goal: length(&r_path),
        h_cost_to_goal: length(&h_path),
        rns: r_time.and_then(|t| normalized_speed(c_r, t, s.robot_limits.v_max)),
        hns: h_time.and_then(|t| normalized_speed(c_h, t, s.human_v_max)),
        pi: cycles.len(),
        pc: proximity_cost(&r_path, &h_path, &safety, cfg.pc_thresh),
        steps: step,
        fallback_cycles,
        sensor_queries,
        safety_violations,
        breach_violations,
    };
    let header = format!(
        "# conav-log v1 scenario_hash={} map={} method={} seed={} f={} dt={} horizon={} p_plans={} stride={} budget={} step_cap={}",
        scenario_hash(&s),
        s.map_id,
        method,
        seed,
        f_priority.map_or("-".to_string(), |f| f.to_string()),
        s.dt,
        s.horizon,
        s.p_plans,
        cfg.planner.stride,
        cfg.planner.rrt_budget,
        cfg.step_cap,
    );
    Episode {
        report,
        steps,
        cycles,
        solution,
        header,
    }
}

fn fmt_costs(costs: &[f64]) -> String {
    if costs.is_empty() {
        return "-".into();
    }
    costs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

impl Episode {
    /// Plain-text log: the header, then one `C` line per cycle and one `S` line per step, in time order.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header);
        let _ = writeln!(out, "# C cycle t tree_size signal plan fallback clearance costs");
        let _ = writeln!(out, "# S step t rx ry rtheta hx hy hvx hvy belief signal B");
        let mut ci = 0;
        for st in &self.steps {
            while ci < self.cycles.len() && self.cycles[ci].t < st.t {
                let c = &self.cycles[ci];
                let _ = writeln!(
                    out,
                    "C {} {} {} {} {} {} {} {}",
                    c.cycle,
                    c.t,
                    c.tree_size,
                    c.signal,
                    c.plan.map_or("-".into(), |p| p.to_string()),
                    u8::from(c.fallback),
                    c.clearance.map_or("-".into(), |v| v.to_string()),
                    fmt_costs(&c.costs)
                );
                ci += 1;
            }
            let _ = writeln!(
                out,
                "S {} {} {} {} {} {} {} {} {} {:0width$b} {} {}",
                st.step,
                st.t,
                st.robot.x,
                st.robot.y,
                st.robot.theta,
                st.human.position.x,
                st.human.position.y,
                st.human.velocity.x,
                st.human.velocity.y,
                st.belief.bits,
                st.signal,
                st.b_value,
                width = st.belief.len
            );
        }
        let r = &self.report;
        let _ = writeln!(
            out,
            "# outcome={} pi={} pc={} r_cost={} h_cost={}",
            r.outcome, r.pi, r.pc, r.r_cost_to_goal, r.h_cost_to_goal
        );
        out
    }
}

/// Parse executed positions back out of a log: (robot, human) per `S` line.
pub fn parse_log_positions(text: &str) -> Vec<(Vec2, Vec2)> {
    text.lines()
        .filter(|l| l.starts_with("S "))
        .filter_map(|l| {
            let f: Vec<f64> = l
                .split_whitespace()
                .skip(3)
                .take(6)
                .map(|x| x.parse().ok())
                .collect::<Option<_>>()?;
            Some((Vec2::new(f[0], f[1]), Vec2::new(f[3], f[4])))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub scenario: Scenario,
    pub method: Method,
    pub seed: u64,
    pub f_priority: Option<f64>,
}

/// Every (scenario, method, F, seed) combination, in that nesting order.
pub fn trial_grid(scenarios: &[Scenario], methods: &[Method], seeds: &[u64], sweep: &[Option<f64>]) -> Vec<TrialSpec> {
    let mut out = Vec::new();
    for s in scenarios {
        for &m in methods {
            for &f in sweep {
                for &seed in seeds {
                    out.push(TrialSpec {
                        scenario: s.clone(),
                        method: m,
                        seed,
                        f_priority: f,
                    });
                }
            }
        }
    }
    out
}

pub fn run_batch(trials: &[TrialSpec], cfg: &EpisodeConfig) -> Vec<TrialReport> {
    trials
        .par_iter()
        .map(|t| run_episode(&t.scenario, t.method, t.seed, t.f_priority, cfg).report)
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| x.to_string())
}

pub const TABLE_HEADER: &str = "scenario\tmethod\tf\tseed\toutcome\tr_cost\th_cost\trns\thns\tpi\tpc\tsteps\tfallbacks";

/// Tab-separated per-trial table.
pub fn report_table(reports: &[TrialReport]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.scenario,
            r.method,
            opt(r.f_priority),
            r.seed,
            r.outcome,
            r.r_cost_to_goal,
            r.h_cost_to_goal,
            opt(r.rns),
            opt(r.hns),
            r.pi,
            r.pc,
            r.steps,
            r.fallback_cycles
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| {
            Some(match acc {
                None => Range { min: v, max: v },
                Some(r) => Range {
                    min: r.min.min(v),
                    max: r.max.max(v),
                },
            })
        })
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}–{}", self.min, self.max)
    }
}

/// Min–max ranges per (scenario, method, F), in first-appearance order.
pub fn summary_table(reports: &[TrialReport]) -> String {
    let mut keys: Vec<(String, Method, Option<u64>)> = Vec::new();
    for r in reports {
        let k = (r.scenario.clone(), r.method, r.f_priority.map(f64::to_bits));
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = String::from("scenario\tmethod\tf\ttrials\tgoal\tr_cost\th_cost\tpi\tpc\n");
    let show = |r: Option<Range>| r.map_or("-".to_string(), |r| r.to_string());
    for (name, m, f) in keys {
        let g: Vec<&TrialReport> = reports
            .iter()
            .filter(|r| r.scenario == name && r.method == m && r.f_priority.map(f64::to_bits) == f)
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            name,
            m,
            opt(f.map(f64::from_bits)),
            g.len(),
            g.iter().filter(|r| r.outcome == Outcome::Goal).count(),
            show(Range::of(g.iter().map(|r| r.r_cost_to_goal))),
            show(Range::of(g.iter().map(|r| r.h_cost_to_goal))),
            show(Range::of(g.iter().map(|r| r.pi as f64))),
            show(Range::of(g.iter().map(|r| r.pc)))
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::maps;

    fn params() -> SafetyParams {
        SafetyParams::new(0.15, 0.5, 0.5)
    }

    #[test]
    fn proximity_examples() {
        let p = params();
        let r = [Vec2::ZERO];
        assert!(proximity_cost(&r, &[Vec2::new(1.0, 0.0)], &p, 1.0).is_infinite());
        assert_eq!(proximity_cost(&r, &[Vec2::new(5.0, 0.0)], &p, 1.0), 0.0);
        // ζ = d² − R²: pick distances giving 0.5 and 1.5 with a threshold of 2
        let rr = p.radius().powi(2);
        let d1 = (rr + 0.5).sqrt();
        let d2 = (rr + 1.5).sqrt();
        let pc = proximity_cost(
            &[Vec2::ZERO, Vec2::ZERO],
            &[Vec2::new(d1, 0.0), Vec2::new(d2, 0.0)],
            &p,
            2.0,
        );
        assert!((pc - 0.5).abs() < 1e-9);
    }

    #[test]
    fn proximity_pads_shorter_sequence() {
        let p = params();
        let r = [Vec2::ZERO, Vec2::new(10.0, 0.0)];
        let h = [Vec2::new(5.0, 0.0)];
        assert_eq!(proximity_cost(&r, &h, &p, 1.0), 0.0);
        let h = [Vec2::new(9.5, 0.0)];
        assert!(proximity_cost(&r, &h, &p, 1.0).is_infinite());
    }

    #[test]
    fn normalized_speed_examples() {
        assert_eq!(normalized_speed(5.0, 5.0, 1.0), Some(1.0));
        assert_eq!(normalized_speed(5.0, 10.0, 1.0), Some(0.5));
        assert_eq!(normalized_speed(5.0, 4.0, 1.0), Some(1.25));
        assert_eq!(normalized_speed(5.0, 0.0, 1.0), None);
    }

    #[test]
    fn optimal_cost_straight_line() {
        let s = maps::load("basic").unwrap();
        let planner = Planner::new(&s, PlannerConfig::default());
        let c = optimal_cost(&s, &planner.robot_grid, s.robot_start.position(), &s.robot_goal, s.r_r);
        assert!((c - (8.0 - s.robot_goal.radius)).abs() < 1e-9);
    }

    #[test]
    fn robot_starting_in_goal_has_empty_solution() {
        let mut s = maps::load("basic").unwrap();
        s.robot_goal.center = s.robot_start.position();
        let e = run_episode(&s, Method::Full, 1, None, &EpisodeConfig::default());
        assert!(e.solution.is_empty());
        assert_eq!(e.report.pi, 0);
        assert_eq!(e.report.outcome, Outcome::Goal);
    }

    #[test]
    fn range_bounds_every_value() {
        let v = [3.0, -1.0, 2.5];
        let r = Range::of(v).unwrap();
        assert!(v.iter().all(|x| r.min <= *x && *x <= r.max));
        assert!(Range::of(Vec::<f64>::new()).is_none());
        assert_eq!(summary_table(&[]).lines().count(), 1);
    }

    #[test]
    fn seeds_differ_by_priority() {
        let s = maps::load("basic").unwrap();
        assert_ne!(trial_seed(&s, 1, Some(0.0)), trial_seed(&s, 1, Some(1.0)));
        assert_eq!(trial_seed(&s, 1, Some(0.5)), trial_seed(&s, 1, Some(0.5)));
    }
}
