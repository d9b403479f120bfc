//! Zones around the human, the sensor model and the logical-filtering belief update.
//!
//! Zones are indexed row-major with row 0 on the north side (largest y) and
//! column 0 on the west side. Compass signals mark the outer row or column on
//! their side of the human; the null signal marks every zone.

use std::fmt;

use crate::dynamics::{integrate, RobotControl, RobotState};
use crate::geom::Vec2;
use crate::human::HumanState;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signal(String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compass {
    North,
    South,
    East,
    West,
}

impl Signal {
    pub const NULL: &'static str = "null";

    pub fn new(name: &str) -> Self {
        Self(name.to_string())
    }

    pub fn null() -> Self {
        Self::new(Self::NULL)
    }

    pub fn is_null(&self) -> bool {
        self.0 == Self::NULL
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn compass(&self) -> Option<Compass> {
        match self.0.as_str() {
            "north" => Some(Compass::North),
            "south" => Some(Compass::South),
            "east" => Some(Compass::East),
            "west" => Some(Compass::West),
            _ => None,
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// What the human perceives of a signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation(pub String);

impl Observation {
    pub fn null() -> Self {
        Self(Signal::NULL.to_string())
    }

    pub fn is_null(&self) -> bool {
        self.0 == Signal::NULL
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneLayout {
    pub rows: usize,
    pub cols: usize,
    pub cell_extent: f64,
}

impl ZoneLayout {
    /// The default 3x3 tiling of a neighborhood of radius `delta`.
    pub fn square(delta: f64) -> Self {
        Self {
            rows: 3,
            cols: 3,
            cell_extent: delta / 3.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Neighborhood radius implied by the tiling.
    pub fn delta(&self) -> f64 {
        self.cell_extent * self.rows.max(self.cols) as f64
    }

    /// Zone center relative to the human.
    pub fn offset(&self, i: usize) -> Vec2 {
        let (r, c) = (i / self.cols, i % self.cols);
        Vec2::new(
            (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.cell_extent,
            ((self.rows as f64 - 1.0) / 2.0 - r as f64) * self.cell_extent,
        )
    }

    pub fn center(&self, i: usize, human: Vec2) -> Vec2 {
        human + self.offset(i)
    }

    /// Zones marked by a signal; `None` for unknown names.
    pub fn marks(&self, s: &Signal) -> Option<u64> {
        if s.is_null() {
            return Some(Belief::full(self.len()).bits);
        }
        let mut m = 0u64;
        for i in 0..self.len() {
            let (r, c) = (i / self.cols, i % self.cols);
            let on = match s.compass()? {
                Compass::North => r == 0,
                Compass::South => r + 1 == self.rows,
                Compass::East => c + 1 == self.cols,
                Compass::West => c == 0,
            };
            if on {
                m |= 1 << i;
            }
        }
        Some(m)
    }
}

/// Zone of the robot position relative to the human, if within the neighborhood.
pub fn zone_of(p: Vec2, h: &HumanState, layout: &ZoneLayout) -> Option<usize> {
    let d = p - h.position;
    if d.norm() >= layout.delta() {
        return None;
    }
    let half_w = layout.cols as f64 * layout.cell_extent / 2.0;
    let half_h = layout.rows as f64 * layout.cell_extent / 2.0;
    let cf = ((d.x + half_w) / layout.cell_extent).floor();
    let rf = ((half_h - d.y) / layout.cell_extent).floor();
    if cf < 0.0 || rf < 0.0 || cf >= layout.cols as f64 || rf >= layout.rows as f64 {
        return None;
    }
    Some(rf as usize * layout.cols + cf as usize)
}

/// Boolean possibility vector over zones; all-zero is the empty belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Belief {
    pub bits: u64,
    pub len: usize,
}

impl Belief {
    pub fn empty(len: usize) -> Self {
        assert!(len <= 64, "at most 64 zones");
        Self { bits: 0, len }
    }

    pub fn full(len: usize) -> Self {
        assert!(len <= 64, "at most 64 zones");
        let bits = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self { bits, len }
    }

    pub fn from_bits(bits: u64, len: usize) -> Self {
        Self {
            bits: bits & Self::full(len).bits,
            len,
        }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits == Self::full(self.len).bits
    }

    /// Carries information about the robot: neither empty nor everything.
    pub fn is_informative(&self) -> bool {
        !self.is_empty() && !self.is_full()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|i| self.get(*i))
    }

    pub fn subset_of(&self, o: &Belief) -> bool {
        self.bits & !o.bits == 0
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeliefError {
    #[error("signal `{0}` is not in the vocabulary")]
    UnknownSignal(String),
}

/// Deterministic map from signals to observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub vocab: Vec<Signal>,
    /// Observation groups; unlisted signals are observed as themselves.
    pub conflation: Vec<(String, Vec<Signal>)>,
}

impl SensorModel {
    pub fn perfect(vocab: Vec<Signal>) -> Self {
        Self {
            vocab,
            conflation: Vec::new(),
        }
    }

    pub fn with_conflation(vocab: Vec<Signal>, conflation: Vec<(String, Vec<Signal>)>) -> Self {
        Self { vocab, conflation }
    }

    pub fn obs(&self, a: &Signal) -> Result<Observation, BeliefError> {
        if !self.vocab.contains(a) {
            return Err(BeliefError::UnknownSignal(a.to_string()));
        }
        if a.is_null() {
            return Ok(Observation::null());
        }
        for (name, group) in &self.conflation {
            if group.contains(a) {
                return Ok(Observation(name.clone()));
            }
        }
        Ok(Observation(a.as_str().to_string()))
    }

    /// Observation emitted when the robot ends up in `zone`, if the signal is
    /// truthful there.
    pub fn emits(&self, a: &Signal, zone: usize, layout: &ZoneLayout) -> Option<Observation> {
        let marks = layout.marks(a)?;
        if marks >> zone & 1 == 1 {
            self.obs(a).ok()
        } else {
            None
        }
    }

    /// Zones in which some signal consistent with `omega` could have been sent.
    pub fn consistent_zones(&self, omega: &Observation, layout: &ZoneLayout) -> u64 {
        let mut m = 0u64;
        for a in &self.vocab {
            if self.obs(a).ok().as_ref() == Some(omega) {
                m |= layout.marks(a).unwrap_or(0);
            }
        }
        m
    }
}

pub fn observe(
    _s_h: &HumanState,
    a_c: &Signal,
    _s_r_next: &RobotState,
    model: &SensorModel,
) -> Result<Observation, BeliefError> {
    model.obs(a_c)
}

/// One-cycle zone-to-zone reachability, `rows[j]` holding the zones reachable from `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reach {
    pub rows: Vec<u64>,
}

impl Reach {
    pub fn complete(n: usize) -> Self {
        Self {
            rows: vec![Belief::full(n).bits; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn reaches(&self, j: usize, i: usize) -> bool {
        self.rows[j] >> i & 1 == 1
    }

    /// Zone `j` reaches zone `i` when a straight rollout from the center of `j`,
    /// aimed at the center of `i`, enters the tile of `i` within the horizon.
    pub fn by_rollout(layout: &ZoneLayout, v_max: f64, dt: f64, steps: usize) -> Self {
        let n = layout.len();
        let mut rows = vec![0u64; n];
        let half = layout.cell_extent / 2.0;
        for (j, row) in rows.iter_mut().enumerate() {
            let a = layout.offset(j);
            for i in 0..n {
                let b = layout.offset(i);
                let theta = if i == j { 0.0 } else { (b - a).angle() };
                let mut s = RobotState::new(a.x, a.y, theta);
                let inside = |s: &RobotState| {
                    let d = s.position() - b;
                    d.x.abs() < half && d.y.abs() < half
                };
                let mut hit = inside(&s);
                for _ in 0..steps {
                    if hit {
                        break;
                    }
                    s = integrate(s, RobotControl::new(v_max, 0.0), dt);
                    hit = inside(&s);
                }
                if hit {
                    *row |= 1 << i;
                }
            }
        }
        Self { rows }
    }
}

/// Posterior zone `i` is possible iff some admissible prior zone reaches it and
/// a signal observed as `omega` is truthful there. An empty prior admits every zone.
pub fn update_belief(
    b: &Belief,
    omega: &Observation,
    layout: &ZoneLayout,
    model: &SensorModel,
    reach: &Reach,
) -> Belief {
    let n = layout.len();
    let prior = if b.is_empty() { Belief::full(n).bits } else { b.bits };
    let mut reachable = 0u64;
    for j in 0..n {
        if prior >> j & 1 == 1 {
            reachable |= reach.rows[j];
        }
    }
    Belief::from_bits(reachable & model.consistent_zones(omega, layout), n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compass_vocab() -> Vec<Signal> {
        ["null", "north", "south", "east", "west"]
            .into_iter()
            .map(Signal::new)
            .collect()
    }

    fn human_at_origin() -> HumanState {
        HumanState::new(Vec2::ZERO, Vec2::ZERO)
    }

    #[test]
    fn zone_examples() {
        let l = ZoneLayout::square(3.0);
        let h = human_at_origin();
        assert_eq!(zone_of(Vec2::ZERO, &h, &l), Some(4));
        assert_eq!(zone_of(Vec2::new(3.5, 0.0), &h, &l), None);
        assert_eq!(zone_of(Vec2::new(0.0, 1.0), &h, &l), Some(1));
        assert_eq!(zone_of(Vec2::new(1.0, 0.0), &h, &l), Some(5));
        assert_eq!(zone_of(Vec2::new(-1.0, -1.0), &h, &l), Some(6));
    }

    #[test]
    fn observation_examples() {
        let h = human_at_origin();
        let r = RobotState::default();
        let perfect = SensorModel::perfect(compass_vocab());
        assert_eq!(
            observe(&h, &Signal::new("east"), &r, &perfect).unwrap(),
            Observation("east".into())
        );
        let conf = SensorModel::with_conflation(
            compass_vocab(),
            vec![("lateral".into(), vec![Signal::new("east"), Signal::new("west")])],
        );
        assert_eq!(
            observe(&h, &Signal::new("west"), &r, &conf).unwrap(),
            Observation("lateral".into())
        );
        for m in [&perfect, &conf] {
            assert!(observe(&h, &Signal::null(), &r, m).unwrap().is_null());
        }
        assert!(observe(&h, &Signal::new("up"), &r, &perfect).is_err());
    }

    #[test]
    fn update_examples() {
        let l = ZoneLayout::square(3.0);
        let m = SensorModel::perfect(compass_vocab());
        let full = Belief::full(9);
        let east = update_belief(&full, &Observation("east".into()), &l, &m, &Reach::complete(9));
        assert_eq!(east.ones().collect::<Vec<_>>(), vec![2, 5, 8]);
        let b = Belief::from_bits(0b000_110_001, 9);
        assert_eq!(update_belief(&b, &Observation::null(), &l, &m, &Reach::identity(9)), b);
        let single = Belief::from_bits(1 << 4, 9);
        let mut reach = Reach::identity(9);
        reach.rows[4] = 0;
        assert!(update_belief(&single, &Observation::null(), &l, &m, &reach).is_empty());
    }

    #[test]
    fn rollout_reach_excludes_far_corners() {
        let l = ZoneLayout::square(3.0);
        let r = Reach::by_rollout(&l, 1.0, 0.1, 20);
        for j in 0..9 {
            assert!(r.reaches(j, j));
        }
        assert!(r.reaches(0, 4));
        assert!(r.reaches(0, 2));
        assert!(!r.reaches(0, 8));
        assert!(!r.reaches(6, 2));
    }

    #[test]
    fn sharp_posterior_ignores_prior() {
        let l = ZoneLayout::square(3.0);
        let m = SensorModel::perfect(compass_vocab());
        let reach = Reach::complete(9);
        for s in ["north", "south", "east", "west"] {
            let omega = Observation(s.into());
            let want = update_belief(&Belief::full(9), &omega, &l, &m, &reach);
            for bits in 1..512u64 {
                assert_eq!(update_belief(&Belief::from_bits(bits, 9), &omega, &l, &m, &reach), want);
            }
        }
    }

    #[test]
    fn monotone_in_prior() {
        let l = ZoneLayout::square(3.0);
        let m = SensorModel::perfect(compass_vocab());
        let reach = Reach::by_rollout(&l, 1.0, 0.1, 10);
        let omega = Observation("west".into());
        for a in 1..512u64 {
            for b in [a | 0b1, a | 0b1_0000_0000, 511] {
                let ua = update_belief(&Belief::from_bits(a, 9), &omega, &l, &m, &reach);
                let ub = update_belief(&Belief::from_bits(b, 9), &omega, &l, &m, &reach);
                assert!(ua.subset_of(&ub));
            }
        }
    }
}
