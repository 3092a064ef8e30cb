//! Random waypoint mobility as precomputed piecewise-linear trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::NodeId;
use crate::sim::config::SimConfig;
use crate::sim::rng::{stream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, f: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * f, self.y + (other.y - self.y) * f)
    }
}

/// Straight-line movement (or a pause when `from == to`) over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub t0: f64,
    pub t1: f64,
    pub from: Point,
    pub to: Point,
}

impl Leg {
    pub fn position(&self, t: f64) -> Point {
        if self.t1 <= self.t0 {
            return self.to;
        }
        let f = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        self.from.lerp(self.to, f)
    }

    pub fn speed(&self) -> f64 {
        if self.t1 <= self.t0 {
            0.0
        } else {
            self.from.distance(self.to) / (self.t1 - self.t0)
        }
    }

    pub fn is_pause(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    legs: Vec<Leg>,
}

impl Trajectory {
    pub fn new(legs: Vec<Leg>) -> Self {
        assert!(!legs.is_empty(), "trajectory needs at least one leg");
        Trajectory { legs }
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn leg_index_at(&self, t: f64) -> usize {
        let i = self.legs.partition_point(|l| l.t1 < t);
        i.min(self.legs.len() - 1)
    }

    pub fn position(&self, t: f64) -> Point {
        self.legs[self.leg_index_at(t)].position(t)
    }
}

/// Random waypoint: pause, pick a uniform waypoint, travel there at a
/// per-leg speed drawn uniformly from the speed range, repeat. Legs cover
/// `[0, horizon]`. The node starts paused at `start`.
pub fn rwp_legs<R: Rng>(
    rng: &mut R,
    area: (f64, f64),
    speed_range: (f64, f64),
    pause_s: f64,
    horizon_s: f64,
    start: Point,
) -> Trajectory {
    let mut legs = Vec::new();
    let mut t = 0.0;
    let mut at = start;
    loop {
        if pause_s > 0.0 {
            let end = t + pause_s;
            legs.push(Leg { t0: t, t1: end, from: at, to: at });
            t = end;
            if t >= horizon_s {
                break;
            }
        }
        let to = Point::new(rng.random_range(0.0..=area.0), rng.random_range(0.0..=area.1));
        let speed = if speed_range.1 > speed_range.0 {
            rng.random_range(speed_range.0..=speed_range.1)
        } else {
            speed_range.0
        };
        let end = t + at.distance(to) / speed;
        legs.push(Leg { t0: t, t1: end, from: at, to });
        t = end;
        at = to;
        if t >= horizon_s {
            break;
        }
    }
    Trajectory::new(legs)
}

/// Trajectory of `node` under `config`, drawn from the node's own stream.
pub fn rwp_trajectory(node: NodeId, config: &SimConfig) -> Trajectory {
    let mut rng = stream(config.seed, Domain::Mobility, node.0);
    let start = match &config.initial_positions {
        Some(p) => Point::new(p[node.index()].0, p[node.index()].1),
        None => Point::new(
            rng.random_range(0.0..=config.area_m.0),
            rng.random_range(0.0..=config.area_m.1),
        ),
    };
    rwp_legs(
        &mut rng,
        config.area_m,
        config.speed_range_mps,
        config.pause_time_s,
        config.horizon_s(),
        start,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_interpolation() {
        let leg = Leg { t0: 0.0, t1: 10.0, from: Point::new(0.0, 0.0), to: Point::new(100.0, 0.0) };
        assert_eq!(leg.position(5.0), Point::new(50.0, 0.0));
        assert_eq!(leg.speed(), 10.0);
    }

    #[test]
    fn long_pause_is_static() {
        let cfg = SimConfig { pause_time_s: 600.0, ..SimConfig::default() };
        let tr = rwp_trajectory(NodeId(3), &cfg);
        let p0 = tr.position(0.0);
        assert_eq!(tr.position(300.0), p0);
        assert_eq!(tr.position(599.9), p0);
        assert!(tr.legs()[0].is_pause());
    }

    #[test]
    fn speeds_within_range() {
        let cfg = SimConfig::default();
        for n in 0..cfg.node_count {
            for leg in rwp_trajectory(NodeId(n), &cfg).legs().iter().filter(|l| !l.is_pause()) {
                let s = leg.speed();
                assert!((5.0 - 1e-9..=10.0 + 1e-9).contains(&s), "speed {s}");
            }
        }
    }

    proptest! {
        #[test]
        fn positions_stay_inside_and_continuous(seed in any::<u64>(), pause in 0.0f64..100.0, t in 0.0f64..600.0) {
            let cfg = SimConfig { seed, pause_time_s: pause, ..SimConfig::default() };
            let tr = rwp_trajectory(NodeId(0), &cfg);
            let p = tr.position(t);
            prop_assert!(p.x >= 0.0 && p.x <= 1000.0 && p.y >= 0.0 && p.y <= 1000.0);
            for w in tr.legs().windows(2) {
                prop_assert_eq!(w[0].t1, w[1].t0);
                prop_assert_eq!(w[0].to, w[1].from);
            }
            prop_assert!(tr.legs().last().unwrap().t1 >= cfg.horizon_s());
        }
    }
}
