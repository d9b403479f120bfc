//! Scenario definition, static map geometry and the occupancy grid.
//!
//! Scenarios are stored in a small line-oriented text format:
//!
//! ```text
//! conav-scn v1
//! map_id = hallway
//! bounds = 0 0 14 8
//! obstacle = 0 0 14 0 14 2 0 2
//! ...
//! ```
//!
//! Every line after the header is `key = value`. `obstacle` and `conflate`
//! may repeat; every other key appears at most once. Blank lines and lines
//! starting with `#` are ignored. [`Scenario::to_text`] writes the canonical
//! form, and a canonical file re-serializes byte-for-byte.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::belief::Signal;
use crate::commplanner::CostWeights;
use crate::dynamics::{ControlBounds, RobotState};
use crate::geom::{ConvexPolygon, Vec2};
use crate::human::HumanState;

pub const HEADER: &str = "conav-scn v1";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

/// Disk-shaped goal region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalDisk {
    pub center: Vec2,
    pub radius: f64,
}

impl GoalDisk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm_sq() - self.radius * self.radius <= 0.0
    }
}

/// Axis-aligned map extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Distance from an interior point to the nearest edge; negative outside.
    pub fn inner_clearance(&self, p: Vec2) -> f64 {
        (p.x - self.min.x)
            .min(self.max.x - p.x)
            .min(p.y - self.min.y)
            .min(self.max.y - p.y)
    }

    pub fn closest_boundary_point(&self, p: Vec2) -> Vec2 {
        let cands = [
            Vec2::new(self.min.x, p.y),
            Vec2::new(self.max.x, p.y),
            Vec2::new(p.x, self.min.y),
            Vec2::new(p.x, self.max.y),
        ];
        cands
            .into_iter()
            .min_by(|a, b| p.dist(*a).total_cmp(&p.dist(*b)))
            .unwrap_or(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub map_id: String,
    pub bounds: Bounds,
    pub obstacles: Vec<ConvexPolygon>,
    pub robot_start: RobotState,
    pub human_start: HumanState,
    pub robot_goal: GoalDisk,
    pub human_goal: GoalDisk,
    pub weights: CostWeights,
    pub comm_vocab: Vec<Signal>,
    /// Observation groups: signals listed under one name are indistinguishable to the human.
    pub conflation: Vec<(String, Vec<Signal>)>,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub p_plans: usize,
    /// Robot radius.
    pub r_r: f64,
    /// Human radius.
    pub r_h: f64,
    pub epsilon_tube: f64,
    pub sigma_safe: f64,
    pub delta_neighborhood: f64,
    pub robot_limits: ControlBounds,
    pub human_v_max: f64,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Planning horizon in whole steps.
    pub fn horizon_steps(&self) -> usize {
        ((self.horizon / self.dt) + 1e-9).floor().max(1.0) as usize
    }

    /// Same scenario without any communication vocabulary beyond the null signal.
    pub fn without_communication(&self) -> Self {
        let mut s = self.clone();
        s.comm_vocab = vec![Signal::null()];
        s.conflation.clear();
        s.weights.comm_costs.retain(|(sig, _)| sig.is_null());
        s
    }

    pub fn point_in_freespace(&self, p: Vec2, inflation: f64) -> bool {
        if self.bounds.inner_clearance(p) <= inflation {
            return false;
        }
        self.obstacles.iter().all(|o| o.distance(p) > inflation)
    }

    /// Distance to the nearest obstacle or map edge.
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.distance(p))
            .fold(self.bounds.inner_clearance(p).max(0.0), f64::min)
    }

    pub fn segment_in_freespace(&self, a: Vec2, b: Vec2, inflation: f64) -> bool {
        if !self.point_in_freespace(a, inflation) || !self.point_in_freespace(b, inflation) {
            return false;
        }
        self.obstacles.iter().all(|o| o.segment_distance(a, b) > inflation)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        match lines.next() {
            Some((_, l)) if l == HEADER => {}
            Some((n, l)) => return Err(parse_err(n, "header", format!("expected `{HEADER}`, got `{l}`"))),
            None => return Err(parse_err(0, "header", "empty scenario file")),
        }

        let mut raw = RawScenario::default();
        let mut seen = BTreeSet::new();
        for (n, line) in lines {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(n, line, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            let repeatable = matches!(key, "obstacle" | "conflate");
            if !repeatable && !seen.insert(key.to_string()) {
                return Err(parse_err(n, key, "duplicate field"));
            }
            raw.set(n, key, value)?;
        }
        let scenario = raw.finish()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.map_id.is_empty() || self.map_id.contains(char::is_whitespace) {
            return Err(invalid("map_id must be a non-empty token"));
        }
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(invalid("bounds must have positive extent"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt > 0"));
        }
        if !(self.horizon >= self.dt) {
            return Err(invalid("horizon ≥ dt"));
        }
        if self.p_plans < 2 {
            return Err(invalid("p_plans ≥ 2"));
        }
        for (name, v) in [
            ("r_r", self.r_r),
            ("r_h", self.r_h),
            ("epsilon_tube", self.epsilon_tube),
            ("delta_neighborhood", self.delta_neighborhood),
            ("robot v_max", self.robot_limits.v_max),
            ("robot omega_max", self.robot_limits.omega_max),
            ("human_v_max", self.human_v_max),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} > 0")));
            }
        }
        if !(self.sigma_safe >= 0.0) {
            return Err(invalid("sigma_safe ≥ 0"));
        }
        if self.robot_goal.radius <= 0.0 || self.human_goal.radius <= 0.0 {
            return Err(invalid("goal radius > 0"));
        }
        let nulls = self.comm_vocab.iter().filter(|s| s.is_null()).count();
        if nulls != 1 {
            return Err(invalid(format!(
                "comm_vocab contains exactly one null signal (found {nulls})"
            )));
        }
        let mut uniq = BTreeSet::new();
        for s in &self.comm_vocab {
            if !uniq.insert(s.as_str()) {
                return Err(invalid(format!("duplicate signal `{s}` in comm_vocab")));
            }
            if s.compass().is_none() && !s.is_null() {
                return Err(invalid(format!("unknown signal `{s}`")));
            }
        }
        self.weights.validate().map_err(invalid)?;
        for s in &self.comm_vocab {
            if self.weights.comm_cost(s).is_none() {
                return Err(invalid(format!("no communication cost for `{s}`")));
            }
        }
        for (obs, group) in &self.conflation {
            for s in group {
                if !self.comm_vocab.contains(s) {
                    return Err(invalid(format!(
                        "conflation group `{obs}` names `{s}` which is not in comm_vocab"
                    )));
                }
                if s.is_null() {
                    return Err(invalid("the null signal cannot be conflated"));
                }
            }
        }
        if !self.point_in_freespace(self.robot_start.position(), self.r_r) {
            return Err(invalid("robot_start lies outside all obstacles"));
        }
        if !self.point_in_freespace(self.human_start.position, self.r_h) {
            return Err(invalid("human_start lies outside all obstacles"));
        }
        for (name, g) in [("robot_goal", &self.robot_goal), ("human_goal", &self.human_goal)] {
            if !self.point_in_freespace(g.center, 0.0) {
                return Err(invalid(format!(
                    "{name} lies outside all obstacles and inside map bounds"
                )));
            }
        }
        if self.human_start.velocity.norm() > self.human_v_max + 1e-12 {
            return Err(invalid("human_start speed ≤ human_v_max"));
        }
        Ok(())
    }

    /// Canonical text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "map_id = {}", self.map_id);
        let b = &self.bounds;
        let _ = writeln!(out, "bounds = {} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y);
        let _ = writeln!(out, "dt = {}", self.dt);
        let _ = writeln!(out, "horizon = {}", self.horizon);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "p_plans = {}", self.p_plans);
        let _ = writeln!(out, "radii = {} {}", self.r_r, self.r_h);
        let _ = writeln!(out, "epsilon_tube = {}", self.epsilon_tube);
        let _ = writeln!(out, "sigma_safe = {}", self.sigma_safe);
        let _ = writeln!(out, "delta_neighborhood = {}", self.delta_neighborhood);
        let r = &self.robot_start;
        let _ = writeln!(out, "robot_start = {} {} {}", r.x, r.y, r.theta);
        let h = &self.human_start;
        let _ = writeln!(
            out,
            "human_start = {} {} {} {}",
            h.position.x, h.position.y, h.velocity.x, h.velocity.y
        );
        for (k, g) in [("robot_goal", &self.robot_goal), ("human_goal", &self.human_goal)] {
            let _ = writeln!(out, "{k} = {} {} {}", g.center.x, g.center.y, g.radius);
        }
        let _ = writeln!(
            out,
            "robot_limits = {} {}",
            self.robot_limits.v_max, self.robot_limits.omega_max
        );
        let _ = writeln!(out, "human_v_max = {}", self.human_v_max);
        let w = &self.weights;
        let _ = writeln!(out, "weights = {} {} {} {}", w.eta_r, w.eta_h, w.eta_p, w.eta_c);
        let comm: Vec<String> = self
            .comm_vocab
            .iter()
            .map(|s| format!("{}:{}", s, w.comm_cost(s).unwrap_or(0.0)))
            .collect();
        let _ = writeln!(out, "comm = {}", comm.join(" "));
        for (obs, group) in &self.conflation {
            let names: Vec<&str> = group.iter().map(Signal::as_str).collect();
            let _ = writeln!(out, "conflate = {}:{}", obs, names.join(","));
        }
        for o in &self.obstacles {
            let coords: Vec<String> = o
                .vertices()
                .iter()
                .flat_map(|v| [v.x.to_string(), v.y.to_string()])
                .collect();
            let _ = writeln!(out, "obstacle = {}", coords.join(" "));
        }
        out
    }
}

#[derive(Default)]
struct RawScenario {
    map_id: Option<String>,
    bounds: Option<Bounds>,
    dt: Option<f64>,
    horizon: Option<f64>,
    seed: Option<u64>,
    p_plans: Option<usize>,
    radii: Option<(f64, f64)>,
    epsilon_tube: Option<f64>,
    sigma_safe: Option<f64>,
    delta: Option<f64>,
    robot_start: Option<RobotState>,
    human_start: Option<HumanState>,
    robot_goal: Option<GoalDisk>,
    human_goal: Option<GoalDisk>,
    robot_limits: Option<ControlBounds>,
    human_v_max: Option<f64>,
    weights: Option<[f64; 4]>,
    comm: Option<Vec<(Signal, f64)>>,
    conflation: Vec<(String, Vec<Signal>)>,
    obstacles: Vec<ConvexPolygon>,
}

fn numbers(line: usize, key: &str, value: &str, expected: Option<usize>) -> Result<Vec<f64>, ScenarioError> {
    let nums = value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, key, format!("`{t}` is not a finite decimal number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(n) = expected {
        if nums.len() != n {
            return Err(parse_err(
                line,
                key,
                format!("expected {n} numbers, got {}", nums.len()),
            ));
        }
    }
    Ok(nums)
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ScenarioError> {
    value
        .parse::<T>()
        .map_err(|_| parse_err(line, key, format!("`{value}` is not an unsigned integer")))
}

impl RawScenario {
    fn set(&mut self, n: usize, key: &str, value: &str) -> Result<(), ScenarioError> {
        match key {
            "map_id" => self.map_id = Some(value.to_string()),
            "bounds" => {
                let v = numbers(n, key, value, Some(4))?;
                self.bounds = Some(Bounds {
                    min: Vec2::new(v[0], v[1]),
                    max: Vec2::new(v[2], v[3]),
                });
            }
            "dt" => self.dt = Some(numbers(n, key, value, Some(1))?[0]),
            "horizon" => self.horizon = Some(numbers(n, key, value, Some(1))?[0]),
            "seed" => self.seed = Some(integer(n, key, value)?),
            "p_plans" => self.p_plans = Some(integer(n, key, value)?),
            "radii" => {
                let v = numbers(n, key, value, Some(2))?;
                self.radii = Some((v[0], v[1]));
            }
            "epsilon_tube" => self.epsilon_tube = Some(numbers(n, key, value, Some(1))?[0]),
            "sigma_safe" => self.sigma_safe = Some(numbers(n, key, value, Some(1))?[0]),
            "delta_neighborhood" => self.delta = Some(numbers(n, key, value, Some(1))?[0]),
            "robot_start" => {
                let v = numbers(n, key, value, Some(3))?;
                self.robot_start = Some(RobotState::new(v[0], v[1], v[2]));
            }
            "human_start" => {
                let v = numbers(n, key, value, Some(4))?;
                self.human_start = Some(HumanState::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])));
            }
            "robot_goal" | "human_goal" => {
                let v = numbers(n, key, value, Some(3))?;
                let g = GoalDisk::new(Vec2::new(v[0], v[1]), v[2]);
                if key == "robot_goal" {
                    self.robot_goal = Some(g);
                } else {
                    self.human_goal = Some(g);
                }
            }
            "robot_limits" => {
                let v = numbers(n, key, value, Some(2))?;
                self.robot_limits = Some(ControlBounds::new(v[0], v[1]));
            }
            "human_v_max" => self.human_v_max = Some(numbers(n, key, value, Some(1))?[0]),
            "weights" => {
                let v = numbers(n, key, value, Some(4))?;
                self.weights = Some([v[0], v[1], v[2], v[3]]);
            }
            "comm" => {
                let mut entries = Vec::new();
                for tok in value.split_whitespace() {
                    let (name, cost) = tok
                        .split_once(':')
                        .ok_or_else(|| parse_err(n, key, format!("`{tok}` is not `signal:cost`")))?;
                    let cost = cost
                        .parse::<f64>()
                        .ok()
                        .filter(|c| c.is_finite())
                        .ok_or_else(|| parse_err(n, key, format!("bad cost in `{tok}`")))?;
                    entries.push((Signal::new(name), cost));
                }
                if entries.is_empty() {
                    return Err(parse_err(n, key, "empty communication vocabulary"));
                }
                self.comm = Some(entries);
            }
            "conflate" => {
                let (obs, group) = value
                    .split_once(':')
                    .ok_or_else(|| parse_err(n, key, "expected `observation:sig1,sig2`"))?;
                let group: Vec<Signal> = group
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Signal::new)
                    .collect();
                if group.len() < 2 {
                    return Err(parse_err(n, key, "a conflation group needs at least two signals"));
                }
                self.conflation.push((obs.trim().to_string(), group));
            }
            "obstacle" => {
                let v = numbers(n, key, value, None)?;
                if v.len() % 2 != 0 {
                    return Err(parse_err(n, key, "odd number of coordinates"));
                }
                let pts = v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
                let poly = ConvexPolygon::new(pts).map_err(|e| parse_err(n, key, e.to_string()))?;
                self.obstacles.push(poly);
            }
            other => return Err(parse_err(n, other, "unknown field")),
        }
        Ok(())
    }

    fn finish(self) -> Result<Scenario, ScenarioError> {
        fn req<T>(v: Option<T>, name: &str) -> Result<T, ScenarioError> {
            v.ok_or_else(|| parse_err(0, name, "missing required field"))
        }
        let comm = req(self.comm, "comm")?;
        let [eta_r, eta_h, eta_p, eta_c] = req(self.weights, "weights")?;
        let (r_r, r_h) = req(self.radii, "radii")?;
        let sigma_safe = req(self.sigma_safe, "sigma_safe")?;
        Ok(Scenario {
            map_id: req(self.map_id, "map_id")?,
            bounds: req(self.bounds, "bounds")?,
            obstacles: self.obstacles,
            robot_start: req(self.robot_start, "robot_start")?,
            human_start: req(self.human_start, "human_start")?,
            robot_goal: req(self.robot_goal, "robot_goal")?,
            human_goal: req(self.human_goal, "human_goal")?,
            weights: CostWeights {
                eta_r,
                eta_h,
                eta_p,
                eta_c,
                comm_costs: comm.to_vec(),
                sigma_safe,
            },
            comm_vocab: comm.into_iter().map(|(s, _)| s).collect(),
            conflation: self.conflation,
            seed: req(self.seed, "seed")?,
            dt: req(self.dt, "dt")?,
            horizon: req(self.horizon, "horizon")?,
            p_plans: req(self.p_plans, "p_plans")?,
            r_r,
            r_h,
            epsilon_tube: req(self.epsilon_tube, "epsilon_tube")?,
            sigma_safe,
            delta_neighborhood: req(self.delta, "delta_neighborhood")?,
            robot_limits: self.robot_limits.unwrap_or_default(),
            human_v_max: self.human_v_max.unwrap_or(1.3),
        })
    }
}

/// Built-in maps shipped with the crate.
pub mod maps {
    use super::{Scenario, ScenarioError};

    pub const BASIC: &str = include_str!("../scenarios/basic.scn");
    pub const INTERSECTION: &str = include_str!("../scenarios/intersection.scn");
    pub const HALLWAY: &str = include_str!("../scenarios/hallway.scn");

    pub const NAMES: [&str; 3] = ["basic", "intersection", "hallway"];

    pub fn text(name: &str) -> Option<&'static str> {
        match name {
            "basic" => Some(BASIC),
            "intersection" => Some(INTERSECTION),
            "hallway" => Some(HALLWAY),
            _ => None,
        }
    }

    pub fn load(name: &str) -> Result<Scenario, ScenarioError> {
        let text = text(name).ok_or_else(|| ScenarioError::Validation(format!("no built-in map `{name}`")))?;
        Scenario::parse(text)
    }
}

pub type Cell = (usize, usize);

/// Occupancy grid over the map bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAbstraction {
    pub origin: Vec2,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    occupied: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("cell size must be positive, got {0}")]
    NonPositiveCell(f64),
    #[error("cell size {cell} exceeds map extent {extent}")]
    CellTooLarge { cell: f64, extent: f64 },
}

pub fn build_grid(scenario: &Scenario, cell_size: f64) -> Result<GridAbstraction, GridError> {
    build_grid_inflated(scenario, cell_size, scenario.r_h)
}

/// Marks every cell whose square comes within `inflation` of an obstacle or the map edge.
pub fn build_grid_inflated(scenario: &Scenario, cell_size: f64, inflation: f64) -> Result<GridAbstraction, GridError> {
    if !(cell_size > 0.0) {
        return Err(GridError::NonPositiveCell(cell_size));
    }
    let extent = scenario.bounds.width().min(scenario.bounds.height());
    if cell_size > extent {
        return Err(GridError::CellTooLarge {
            cell: cell_size,
            extent,
        });
    }
    let origin = scenario.bounds.min;
    let nx = (scenario.bounds.width() / cell_size - 1e-9).ceil() as usize;
    let ny = (scenario.bounds.height() / cell_size - 1e-9).ceil() as usize;
    let mut occupied = vec![false; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            // shrunk slightly so that merely touching does not count
            let lo =
                Vec2::new(origin.x + ix as f64 * cell_size, origin.y + iy as f64 * cell_size) + Vec2::new(1e-9, 1e-9);
            let hi = lo + Vec2::new(cell_size - 2e-9, cell_size - 2e-9);
            let b = &scenario.bounds;
            let near_edge = lo.x - b.min.x <= inflation
                || b.max.x - hi.x <= inflation
                || lo.y - b.min.y <= inflation
                || b.max.y - hi.y <= inflation;
            let rect = ConvexPolygon::rect(lo, hi);
            let near_obstacle = scenario
                .obstacles
                .iter()
                .any(|o| o.distance_to_polygon(&rect) <= inflation);
            occupied[iy * nx + ix] = near_edge || near_obstacle;
        }
    }
    Ok(GridAbstraction {
        origin,
        cell_size,
        nx,
        ny,
        occupied,
    })
}

impl GridAbstraction {
    pub fn from_occupancy(origin: Vec2, cell_size: f64, nx: usize, ny: usize, occupied: Vec<bool>) -> Self {
        assert_eq!(occupied.len(), nx * ny, "occupancy length must be nx * ny");
        Self {
            origin,
            cell_size,
            nx,
            ny,
            occupied,
        }
    }

    pub fn index(&self, c: Cell) -> usize {
        c.1 * self.nx + c.0
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        (i % self.nx, i / self.nx)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let fx = ((p.x - self.origin.x) / self.cell_size).floor();
        let fy = ((p.y - self.origin.y) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn center(&self, c: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (c.0 as f64 + 0.5) * self.cell_size,
            self.origin.y + (c.1 as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.index(c)]
    }

    /// Occupied, or outside the grid.
    pub fn is_blocked_at(&self, p: Vec2) -> bool {
        self.cell_of(p).is_none_or(|c| self.is_occupied(c))
    }

    pub fn free_count(&self) -> usize {
        self.occupied.iter().filter(|o| !**o).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.ny).flat_map(move |y| (0..self.nx).map(move |x| (x, y)))
    }

    /// Closest free cell to `p` by center distance, searching outward ring by ring.
    pub fn nearest_free_cell(&self, p: Vec2) -> Option<Cell> {
        if let Some(c) = self.cell_of(p) {
            if !self.is_occupied(c) {
                return Some(c);
            }
        }
        self.cells().filter(|c| !self.is_occupied(*c)).min_by(|a, b| {
            p.dist(self.center(*a))
                .total_cmp(&p.dist(self.center(*b)))
                .then(self.index(*a).cmp(&self.index(*b)))
        })
    }

    /// Cells whose square intersects the square of half-width `half` around `center`.
    pub fn cells_in_square(&self, center: Vec2, half: f64) -> Vec<Cell> {
        let lo = center - Vec2::new(half, half);
        let hi = center + Vec2::new(half, half);
        let to_ix = |v: f64, o: f64, n: usize| -> Option<(usize, usize)> {
            let a = ((v - half * 2.0 - o) / self.cell_size).floor().max(0.0) as usize;
            let b = (((v - o) / self.cell_size).ceil().max(0.0) as usize).min(n);
            (a < b).then_some((a, b))
        };
        let (Some((x0, x1)), Some((y0, y1))) =
            (to_ix(hi.x, self.origin.x, self.nx), to_ix(hi.y, self.origin.y, self.ny))
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for iy in y0..y1 {
            for ix in x0..x1 {
                let clo = Vec2::new(
                    self.origin.x + ix as f64 * self.cell_size,
                    self.origin.y + iy as f64 * self.cell_size,
                );
                let chi = clo + Vec2::new(self.cell_size, self.cell_size);
                if clo.x < hi.x && chi.x > lo.x && clo.y < hi.y && chi.y > lo.y {
                    out.push((ix, iy));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor_scenario() -> Scenario {
        maps::load("hallway").unwrap()
    }

    #[test]
    fn shipped_maps_load_and_echo_exactly() {
        for name in maps::NAMES {
            let text = maps::text(name).unwrap();
            let s = Scenario::parse(text).unwrap();
            assert_eq!(s.map_id, name);
            assert_eq!(s.to_text(), text, "{name} does not re-serialize byte-for-byte");
            let again = Scenario::parse(&s.to_text()).unwrap();
            assert_eq!(again, s);
        }
    }

    #[test]
    fn p_plans_one_is_rejected() {
        let text = maps::HALLWAY.replace("p_plans = 4", "p_plans = 1");
        match Scenario::parse(&text) {
            Err(ScenarioError::Validation(m)) => assert!(m.contains("p_plans ≥ 2"), "{m}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn robot_start_inside_obstacle_is_rejected() {
        let s = corridor_scenario();
        let wall = &s.obstacles[0];
        let (lo, hi) = wall.bounding_box();
        let inside = (lo + hi) / 2.0;
        let line = format!("robot_start = {} {} 0", inside.x, inside.y);
        let text: String = maps::HALLWAY
            .lines()
            .map(|l| {
                if l.starts_with("robot_start") {
                    line.clone()
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        match Scenario::parse(&text) {
            Err(ScenarioError::Validation(m)) => assert!(m.contains("robot_start"), "{m}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        let text = maps::BASIC.replace("dt = 0.1", "dt = fast");
        match Scenario::parse(&text) {
            Err(ScenarioError::Parse { line, field, .. }) => {
                assert_eq!(field, "dt");
                assert_eq!(line, 4);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            Scenario::parse("conav-scn v2\n"),
            Err(ScenarioError::Parse { field, .. }) if field == "header"
        ));
        let dup = format!("{}dt = 0.2\n", maps::BASIC);
        assert!(matches!(Scenario::parse(&dup), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn two_nulls_are_rejected() {
        let text = maps::BASIC.replace("comm = null:0", "comm = null:0 null:0");
        assert!(matches!(Scenario::parse(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn freespace_examples() {
        let s = corridor_scenario();
        let open = s.robot_start.position();
        assert!(s.point_in_freespace(open, 0.3));
        let v = s.obstacles[0].vertices()[0];
        let v = if s.bounds.inner_clearance(v) > 0.0 {
            v
        } else {
            s.obstacles[0].vertices()[2]
        };
        assert!(!s.point_in_freespace(v, 0.0));
    }

    /// Independent distance oracle: densely sample the polygon boundary.
    fn sampled_distance(poly: &ConvexPolygon, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in poly.edges() {
            for k in 0..=20_000 {
                let q = a.lerp(b, k as f64 / 20_000.0);
                best = best.min(p.dist(q));
            }
        }
        best
    }

    #[test]
    fn point_just_inside_inflation_band_is_occupied() {
        let mut s = maps::load("basic").unwrap();
        let wall = ConvexPolygon::rect(Vec2::new(4.0, 2.0), Vec2::new(6.0, 3.0));
        s.obstacles = vec![wall.clone()];
        let p = Vec2::new(5.0, 3.29);
        let d = sampled_distance(&wall, p);
        assert!((d - 0.29).abs() < 1e-6);
        assert!(!s.point_in_freespace(p, 0.3));
        assert!(s.point_in_freespace(Vec2::new(5.0, 3.31), 0.3));
    }

    #[test]
    fn empty_map_grid() {
        let mut s = maps::load("basic").unwrap();
        s.obstacles.clear();
        let g = build_grid_inflated(&s, 0.5, 0.0).unwrap();
        assert_eq!((g.nx, g.ny), (20, 20));
        assert_eq!(g.free_count(), 400);
        // with the human radius the outer ring touches the edge band
        let g = build_grid(&s, 0.5).unwrap();
        assert_eq!(g.free_count(), 18 * 18);
    }

    #[test]
    fn fully_covered_map_is_all_occupied() {
        let mut s = maps::load("basic").unwrap();
        s.obstacles = vec![ConvexPolygon::rect(s.bounds.min, s.bounds.max)];
        let g = build_grid_inflated(&s, 0.5, 0.0).unwrap();
        assert_eq!(g.free_count(), 0);
    }

    #[test]
    fn oversize_cell_is_an_error() {
        let s = maps::load("basic").unwrap();
        assert!(matches!(build_grid(&s, 50.0), Err(GridError::CellTooLarge { .. })));
        assert!(matches!(build_grid(&s, 0.0), Err(GridError::NonPositiveCell(_))));
    }

    #[test]
    fn intersection_grid_is_sound_against_freespace() {
        let s = maps::load("intersection").unwrap();
        let g = build_grid(&s, 0.25).unwrap();
        let mut free = 0;
        for c in g.cells() {
            let center = g.center(c);
            let ok = s.point_in_freespace(center, s.r_h);
            if !g.is_occupied(c) {
                free += 1;
                assert!(ok, "free cell {c:?} fails freespace");
            }
            if !ok {
                assert!(g.is_occupied(c));
            }
        }
        assert!(free > 0);
        // the corridor crossing is free, the corner blocks are not
        let mid = (s.bounds.min + s.bounds.max) / 2.0;
        assert!(!g.is_blocked_at(mid));
        assert!(g.is_blocked_at(s.bounds.min + Vec2::new(1.0, 1.0)));
    }

    #[test]
    fn cell_round_trip_error_is_bounded() {
        let s = maps::load("basic").unwrap();
        let g = build_grid(&s, 0.25).unwrap();
        for k in 0..500 {
            let p = Vec2::new(0.013 + (k as f64 * 0.37) % 9.97, 0.021 + (k as f64 * 0.53) % 9.96);
            let c = g.cell_of(p).unwrap();
            let q = g.center(c);
            assert!((p.x - q.x).abs() <= 0.125 + 1e-12);
            assert!((p.y - q.y).abs() <= 0.125 + 1e-12);
        }
    }

    #[test]
    fn loading_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hallway.scn");
        std::fs::write(&path, maps::HALLWAY).unwrap();
        let a = Scenario::load(&path).unwrap();
        let b = Scenario::load(&path).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a, b);
    }
}
