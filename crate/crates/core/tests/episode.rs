//! Episode-level properties checked through the public API.

use conav_core::harness::{parse_log_positions, proximity_cost, run_episode, EpisodeConfig, Method};
use conav_core::safety::SafetyParams;
use conav_core::world::{maps, Scenario};

#[test]
fn builtin_maps_round_trip_through_text() {
    for name in maps::NAMES {
        let text = maps::text(name).unwrap();
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.to_text(), text, "{name} file is not in canonical form");
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }
}

#[test]
fn proximity_cost_recomputes_from_log() {
    let s = maps::load("basic").unwrap();
    let e = run_episode(&s, Method::Full, 2, None, &EpisodeConfig::default());
    let log = e.log_text();
    let mut r = vec![s.robot_start.position()];
    let mut h = vec![s.human_start.position];
    for (rp, hp) in parse_log_positions(&log) {
        r.push(rp);
        h.push(hp);
    }
    assert_eq!(r.len(), e.report.steps + 1);
    let safety = SafetyParams::new(s.epsilon_tube, s.r_h, s.r_r);
    let pc = proximity_cost(&r, &h, &safety, EpisodeConfig::default().pc_thresh);
    assert!(
        (pc - e.report.pc).abs() <= 1e-9 * pc.abs().max(1.0),
        "{pc} vs {}",
        e.report.pc
    );
}

#[test]
fn baseline_stays_silent() {
    let s = maps::load("intersection").unwrap();
    let e = run_episode(&s, Method::Baseline, 1, None, &EpisodeConfig::default());
    assert_eq!(e.report.sensor_queries, 0);
    assert!(e.cycles.iter().all(|c| c.signal.is_null()));
    assert!(e.cycles.iter().all(|c| c.costs.len() <= s.p_plans));
}

#[test]
fn full_method_scores_every_branch() {
    let s = maps::load("basic").unwrap();
    let e = run_episode(&s, Method::Full, 4, None, &EpisodeConfig::default());
    let vocab = s.comm_vocab.len();
    for c in &e.cycles {
        assert_eq!(
            c.costs.len() % vocab,
            0,
            "cycle {} has {} branches",
            c.cycle,
            c.costs.len()
        );
        assert!(c.costs.len() <= s.p_plans * vocab);
    }
}

#[test]
fn executed_plans_start_at_the_logged_state() {
    let s = maps::load("hallway").unwrap();
    let e = run_episode(&s, Method::Full, 0, None, &EpisodeConfig::default());
    assert!(!e.solution.is_empty());
    for (_, plan) in &e.solution {
        let at = if plan.t0 < 1e-9 {
            s.robot_start.position()
        } else {
            let k = (plan.t0 / s.dt).round() as usize;
            e.steps[k - 1].robot.position()
        };
        assert!(
            plan.states[0].position().dist(at) < 1e-9,
            "plan at t0 {} starts off the trajectory",
            plan.t0
        );
    }
}
