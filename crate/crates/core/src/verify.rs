//! Brute-force oracles for the planner's core operations. Each suite recomputes
//! results by exhaustive enumeration and reports agreement statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{update_belief, Belief, Observation, Reach, SensorModel, Signal, ZoneLayout};
use crate::commplanner::{node_cost, CostWeights, SearchNode};
use crate::dynamics::{ControlBounds, RobotControl, RobotState, TimedPlan};
use crate::geom::Vec2;
use crate::human::HumanState;
use crate::safety::{cbf_constraint, lookahead_value, safe_control, SafetyParams};
use crate::tbrrt::{select_diverse, DiverseCostWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const COMPASS: [&str; 5] = ["null", "north", "south", "east", "west"];

fn vocab() -> Vec<Signal> {
    COMPASS.iter().map(|s| Signal::new(s)).collect()
}

/// Whether signal `a` claims zone `i` on a 3×3 row-major layout, row 0 north.
fn claims(a: &str, i: usize) -> bool {
    let (r, c) = (i / 3, i % 3);
    match a {
        "null" => true,
        "north" => r == 0,
        "south" => r == 2,
        "east" => c == 2,
        "west" => c == 0,
        _ => false,
    }
}

fn observation_of(a: &str, conflation: &[(String, Vec<Signal>)]) -> String {
    if a == "null" {
        return Observation::null().0;
    }
    conflation
        .iter()
        .find(|(_, g)| g.iter().any(|s| s.as_str() == a))
        .map_or_else(|| a.to_string(), |(name, _)| name.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefOracleStats {
    pub cases: usize,
    pub mismatches: usize,
}

/// Posterior zone `i` holds iff ∃ prior zone j, signal a: the prior admits j,
/// j reaches i, `a` is observed as `omega`, and `a` claims zone i.
pub fn belief_oracle(seed: u64, reach_samples: usize) -> BeliefOracleStats {
    let layout = ZoneLayout::square(3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lateral = vec![("lateral".to_string(), vec![Signal::new("east"), Signal::new("west")])];
    let models = [Vec::new(), lateral];
    let mut reaches = vec![Reach::complete(9), Reach::identity(9)];
    for _ in 0..reach_samples {
        reaches.push(Reach {
            rows: (0..9).map(|_| rng.gen::<u64>() & 0x1ff).collect(),
        });
    }
    let mut cases = 0;
    let mut mismatches = 0;
    for conflation in &models {
        let model = SensorModel::with_conflation(vocab(), conflation.clone());
        let mut observations: Vec<String> = COMPASS.iter().map(|a| observation_of(a, conflation)).collect();
        observations.dedup();
        observations.sort();
        observations.dedup();
        for reach in &reaches {
            for prior in 0u64..512 {
                for omega in &observations {
                    let mut expect = 0u64;
                    for i in 0..9 {
                        let hit = (0..9).any(|j| {
                            (prior == 0 || prior >> j & 1 == 1)
                                && reach.rows[j] >> i & 1 == 1
                                && COMPASS
                                    .iter()
                                    .any(|a| observation_of(a, conflation) == *omega && claims(a, i))
                        });
                        if hit {
                            expect |= 1 << i;
                        }
                    }
                    let got = update_belief(
                        &Belief::from_bits(prior, 9),
                        &Observation(omega.clone()),
                        &layout,
                        &model,
                        reach,
                    );
                    cases += 1;
                    if got.bits != expect {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    BeliefOracleStats { cases, mismatches }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiverseOracleStats {
    pub instances: usize,
    pub wrong_size: usize,
    pub worse_than_initial: usize,
    pub optimal: usize,
    pub max_passes: usize,
    /// Relative gaps (cost − optimum)/optimum of the non-optimal instances, ascending.
    pub gaps: Vec<f64>,
}

impl DiverseOracleStats {
    pub fn match_rate(&self) -> f64 {
        self.optimal as f64 / self.instances.max(1) as f64
    }

    pub fn gap_quantile(&self, q: f64) -> f64 {
        if self.gaps.is_empty() {
            return 0.0;
        }
        let k = ((self.gaps.len() - 1) as f64 * q).round() as usize;
        self.gaps[k]
    }
}

fn jd(subset: &[usize], costs: &[f64], pts: &[Vec2]) -> f64 {
    let mut total = 0.0;
    for &i in subset {
        let mut d = 0.0;
        for &j in subset {
            if j != i {
                d += ((pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2)).sqrt();
            }
        }
        if d == 0.0 {
            return f64::INFINITY;
        }
        total += costs[i] / d;
    }
    total
}

fn combinations(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, p, cur, out);
            cur.pop();
        }
    }
    rec(0, n, p, &mut cur, &mut out);
    out
}

pub fn diverse_oracle(seed: u64, instances: usize) -> DiverseOracleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DiverseCostWeights::default();
    let mut st = DiverseOracleStats {
        instances,
        wrong_size: 0,
        worse_than_initial: 0,
        optimal: 0,
        max_passes: 0,
        gaps: Vec::new(),
    };
    for _ in 0..instances {
        let p = rng.gen_range(2..=3);
        let n = rng.gen_range(p..=12);
        let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..5.0)).collect();
        let pts: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0)))
            .collect();
        let sel = select_diverse(&costs, &pts, p, &w, &mut rng).expect("n ≥ p");
        st.max_passes = st.max_passes.max(sel.passes);
        if sel.chosen.len() != p {
            st.wrong_size += 1;
        }
        let got = jd(&sel.chosen, &costs, &pts);
        if got > sel.initial_cost * (1.0 + 1e-12) {
            st.worse_than_initial += 1;
        }
        let opt = combinations(n, p)
            .iter()
            .map(|c| jd(c, &costs, &pts))
            .fold(f64::INFINITY, f64::min);
        if got <= opt * (1.0 + 1e-12) {
            st.optimal += 1;
        } else {
            st.gaps.push((got - opt) / opt);
        }
    }
    st.gaps.sort_by(f64::total_cmp);
    st
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpOracleStats {
    pub samples: usize,
    pub infeasible: usize,
    pub min_residual: f64,
    pub max_gap: f64,
}

/// Feasible control-grid minimizer of ‖a − nominal‖². Each level halves the
/// window around the incumbent, so the grid stays dense near the optimum.
fn grid_argmin(nominal: RobotControl, g: (f64, f64, f64), b: &ControlBounds) -> Option<RobotControl> {
    let (gv, gw, c) = g;
    let feasible = |v: f64, w: f64| gv * v + gw * w >= c;
    let obj = |v: f64, w: f64| (v - nominal.v).powi(2) + (w - nominal.omega).powi(2);
    let n = 200;
    let (mut cv, mut cw) = (0.0, 0.0);
    let (mut hv, mut hw) = (b.v_max, b.omega_max);
    let mut best: Option<(f64, f64, f64)> = None;
    for _ in 0..24 {
        let (v_lo, v_hi) = ((cv - hv).max(-b.v_max), (cv + hv).min(b.v_max));
        let (w_lo, w_hi) = ((cw - hw).max(-b.omega_max), (cw + hw).min(b.omega_max));
        for i in 0..=n {
            let v = v_lo + (v_hi - v_lo) * i as f64 / n as f64;
            for k in 0..=n {
                let w = w_lo + (w_hi - w_lo) * k as f64 / n as f64;
                if feasible(v, w) {
                    let o = obj(v, w);
                    if best.is_none_or(|(bo, _, _)| o < bo) {
                        best = Some((o, v, w));
                    }
                }
            }
        }
        let (_, v, w) = best?;
        (cv, cw) = (v, w);
        hv /= 2.0;
        hw /= 2.0;
    }
    best.map(|(_, v, w)| RobotControl::new(v, w))
}

pub fn qp_oracle(seed: u64, samples: usize) -> QpOracleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = SafetyParams::new(0.15, 0.5, 0.5);
    let bounds = ControlBounds::default();
    let mut st = QpOracleStats {
        samples: 0,
        infeasible: 0,
        min_residual: f64::INFINITY,
        max_gap: 0.0,
    };
    while st.samples < samples {
        let s = RobotState::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.2..3.2),
        );
        let h = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        if lookahead_value(&s, h, &params) < 0.0 {
            continue;
        }
        st.samples += 1;
        let nominal = RobotControl::new(rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0));
        let k = cbf_constraint(&s, h, &params);
        match safe_control(&s, nominal, h, &params, &bounds) {
            Ok(a) => {
                st.min_residual = st.min_residual.min(k.residual(a));
                if let Some(o) = grid_argmin(nominal, (k.g_v, k.g_omega, k.c), &bounds) {
                    let gap = ((a.v - o.v).powi(2) + (a.omega - o.omega).powi(2)).sqrt();
                    st.max_gap = st.max_gap.max(gap);
                }
            }
            Err(_) => st.infeasible += 1,
        }
    }
    st
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfinityRuleStats {
    pub fixtures: usize,
    pub infinite: usize,
    pub violations: usize,
}

/// Random branches: node_cost is infinite exactly when the time-aligned clearance
/// vanishes or the human path is empty.
pub fn infinity_rule_oracle(seed: u64, fixtures: usize) -> InfinityRuleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = InfinityRuleStats {
        fixtures,
        infinite: 0,
        violations: 0,
    };
    let walk = |rng: &mut ChaCha8Rng| {
        let mut p = Vec2::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
        let len = rng.gen_range(1..30);
        let dir = Vec2::from_angle(rng.gen_range(-3.2..3.2));
        (0..len)
            .map(|_| {
                let q = p;
                p += dir * 0.2;
                q
            })
            .collect::<Vec<_>>()
    };
    for _ in 0..fixtures {
        let sigma = rng.gen_range(0.0..1.0);
        let w = CostWeights {
            eta_r: rng.gen_range(0.0..2.0),
            eta_h: rng.gen_range(0.0..2.0),
            eta_p: if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.1..5.0)
            },
            eta_c: rng.gen_range(0.0..2.0),
            comm_costs: vec![(Signal::null(), 0.0), (Signal::new("east"), rng.gen_range(0.0..3.0))],
            sigma_safe: sigma,
        };
        let gamma_r = walk(&mut rng);
        let gamma_h = if rng.gen_bool(0.15) { Vec::new() } else { walk(&mut rng) };
        let signal = if rng.gen_bool(0.5) {
            Signal::null()
        } else {
            Signal::new("east")
        };
        let node = SearchNode {
            robot: RobotState::new(gamma_r[0].x, gamma_r[0].y, 0.0),
            human: HumanState::at_rest(gamma_h.first().copied().unwrap_or(Vec2::ZERO)),
            signal,
            plan_index: 0,
            plan: TimedPlan::new(0.0, 0.1, RobotState::new(gamma_r[0].x, gamma_r[0].y, 0.0)),
            posterior: Belief::empty(9),
            gamma_r: gamma_r.clone(),
            gamma_h: gamma_h.clone(),
            cost: 0.0,
        };
        let cost = node_cost(&node, &w);
        let mut d_min = f64::INFINITY;
        if !gamma_h.is_empty() {
            for i in 0..gamma_r.len().max(gamma_h.len()) {
                let a = gamma_r[i.min(gamma_r.len() - 1)];
                let b = gamma_h[i.min(gamma_h.len() - 1)];
                d_min = d_min.min(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt());
            }
        }
        let expect_inf = gamma_h.is_empty() || d_min - sigma <= 0.0;
        if cost.is_infinite() {
            st.infinite += 1;
        }
        if cost.is_infinite() != expect_inf || cost.is_nan() {
            st.violations += 1;
        }
    }
    st
}

pub fn run_all(seed: u64) -> Vec<OracleResult> {
    let b = belief_oracle(seed, 20);
    let d = diverse_oracle(seed, 200);
    let q = qp_oracle(seed, 1000);
    let n = infinity_rule_oracle(seed, 500);
    vec![
        OracleResult {
            name: "belief filter",
            passed: b.mismatches == 0,
            detail: format!("{} cases, {} mismatches", b.cases, b.mismatches),
        },
        OracleResult {
            name: "diverse selection",
            passed: d.wrong_size == 0 && d.worse_than_initial == 0 && d.match_rate() >= 0.7,
            detail: format!(
                "{} instances, optimal {:.1}%, max passes {}, gap median {:.4} p90 {:.4} max {:.4}",
                d.instances,
                100.0 * d.match_rate(),
                d.max_passes,
                d.gap_quantile(0.5),
                d.gap_quantile(0.9),
                d.gap_quantile(1.0)
            ),
        },
        OracleResult {
            name: "safe control",
            passed: q.infeasible == 0 && q.min_residual >= -1e-9 && q.max_gap <= 1e-3,
            detail: format!(
                "{} states, min residual {:e}, max gap to grid argmin {:e}",
                q.samples, q.min_residual, q.max_gap
            ),
        },
        OracleResult {
            name: "infinite branch cost",
            passed: n.violations == 0,
            detail: format!(
                "{} fixtures, {} infinite, {} violations",
                n.fixtures, n.infinite, n.violations
            ),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(12, 3).len(), 220);
    }

    #[test]
    fn claims_match_layout_marks() {
        let layout = ZoneLayout::square(3.0);
        for a in COMPASS {
            let m = layout.marks(&Signal::new(a)).unwrap();
            for i in 0..9 {
                assert_eq!(m >> i & 1 == 1, claims(a, i), "{a} {i}");
            }
        }
    }

    #[test]
    fn grid_argmin_unconstrained_is_nominal() {
        let b = ControlBounds::default();
        let o = grid_argmin(RobotControl::new(0.3, -0.2), (0.0, 0.0, -1.0), &b).unwrap();
        assert!((o.v - 0.3).abs() < 1e-3 && (o.omega + 0.2).abs() < 1e-3);
    }
}
