//! Planar Dubins car shortest paths and the Dubins airplane distance
//! heuristic built on top of them.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{wrap_angle, ContinuousState};

/// Planar configuration of a Dubins car.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CarConfig {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl CarConfig {
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_angle(phi),
        }
    }
}

impl From<&ContinuousState> for CarConfig {
    fn from(s: &ContinuousState) -> Self {
        CarConfig::new(s.x, s.y, s.phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Left,
    Straight,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl DubinsWord {
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::Lsl,
        DubinsWord::Rsr,
        DubinsWord::Lsr,
        DubinsWord::Rsl,
        DubinsWord::Rlr,
        DubinsWord::Lrl,
    ];

    pub fn segments(self) -> [Segment; 3] {
        use Segment::*;
        match self {
            DubinsWord::Lsl => [Left, Straight, Left],
            DubinsWord::Rsr => [Right, Straight, Right],
            DubinsWord::Lsr => [Left, Straight, Right],
            DubinsWord::Rsl => [Right, Straight, Left],
            DubinsWord::Rlr => [Right, Left, Right],
            DubinsWord::Lrl => [Left, Right, Left],
        }
    }
}

impl fmt::Display for DubinsWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DubinsWord::Lsl => "LSL",
            DubinsWord::Rsr => "RSR",
            DubinsWord::Lsr => "LSR",
            DubinsWord::Rsl => "RSL",
            DubinsWord::Rlr => "RLR",
            DubinsWord::Lrl => "LRL",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub word: DubinsWord,
    /// Segment lengths in meters.
    pub segment_lengths: [f64; 3],
    pub total_length: f64,
}

impl DubinsPath {
    /// Integrates the path from `start` and returns the final configuration.
    pub fn endpoint(&self, start: &CarConfig, curvature: f64) -> CarConfig {
        let radius = 1.0 / curvature;
        let (mut x, mut y, mut phi) = (start.x, start.y, start.phi);
        for (seg, len) in self.word.segments().iter().zip(self.segment_lengths) {
            match seg {
                Segment::Straight => {
                    x += len * phi.cos();
                    y += len * phi.sin();
                }
                Segment::Left | Segment::Right => {
                    let sign = if *seg == Segment::Left { 1.0 } else { -1.0 };
                    let sweep = sign * len / radius;
                    let next = phi + sweep;
                    x += sign * radius * (next.sin() - phi.sin());
                    y -= sign * radius * (next.cos() - phi.cos());
                    phi = next;
                }
            }
        }
        CarConfig::new(x, y, phi)
    }
}

// Arc angles within this distance of a full turn are treated as zero.
const FULL_TURN_TOL: f64 = 1e-9;

fn mod2pi(a: f64) -> f64 {
    let m = a.rem_euclid(TAU);
    if m > TAU - FULL_TURN_TOL {
        0.0
    } else {
        m
    }
}

fn atan2_or(y: f64, x: f64, fallback: f64) -> f64 {
    if x.hypot(y) < 1e-12 {
        fallback
    } else {
        y.atan2(x)
    }
}

/// Normalized `(t, p, q)` for one word: arc angles in radians and straight
/// lengths in units of the turning radius. `None` when the word cannot
/// connect the two configurations.
fn word_params(word: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let c_ab = (alpha - beta).cos();
    match word {
        DubinsWord::Lsl => {
            let p2 = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = atan2_or(cb - ca, d + sa - sb, alpha);
            Some([mod2pi(tmp - alpha), p2.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::Rsr => {
            let p2 = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = atan2_or(ca - cb, d - sa + sb, alpha);
            Some([mod2pi(alpha - tmp), p2.sqrt(), mod2pi(tmp - beta)])
        }
        DubinsWord::Lsr => {
            let p2 = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - alpha), p, mod2pi(tmp - beta)])
        }
        DubinsWord::Rsl => {
            let p2 = d * d - 2.0 + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::Rlr => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::Lrl => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - tmp.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(beta - alpha - t + p)])
        }
    }
}

/// Path of one specific word, if it is feasible.
pub fn dubins_word_path(
    q0: &CarConfig,
    q1: &CarConfig,
    curvature: f64,
    word: DubinsWord,
) -> Option<DubinsPath> {
    let dx = q1.x - q0.x;
    let dy = q1.y - q0.y;
    let d = dx.hypot(dy) * curvature;
    let theta = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let alpha = mod2pi(q0.phi - theta);
    let beta = mod2pi(q1.phi - theta);
    let [t, p, q] = word_params(word, alpha, beta, d)?;
    let radius = 1.0 / curvature;
    let segment_lengths = [t * radius, p * radius, q * radius];
    Some(DubinsPath {
        word,
        segment_lengths,
        total_length: segment_lengths.iter().sum(),
    })
}

/// Shortest of the six candidate Dubins words from `q0` to `q1`.
pub fn dubins_car_shortest(q0: &CarConfig, q1: &CarConfig, curvature: f64) -> Result<DubinsPath> {
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::invalid(format!("curvature must be positive, got {curvature}")));
    }
    DubinsWord::ALL
        .iter()
        .filter_map(|&w| dubins_word_path(q0, q1, curvature, w))
        .min_by(|a, b| a.total_length.total_cmp(&b.total_length))
        .ok_or_else(|| Error::invalid("no Dubins word connects the configurations"))
}

/// Kinematic limits of the airplane model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirplaneLimits {
    /// Forward speed in the horizontal plane, m/s.
    pub speed: f64,
    /// Maximum climb or descent rate, m/s.
    pub climb_rate: f64,
    /// Maximum turn rate, rad/s.
    pub turn_rate: f64,
}

impl Default for AirplaneLimits {
    fn default() -> Self {
        Self {
            speed: 100.0,
            climb_rate: 6.0,
            turn_rate: 0.025,
        }
    }
}

impl AirplaneLimits {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.speed) && ok(self.climb_rate) && ok(self.turn_rate) {
            Ok(())
        } else {
            Err(Error::invalid(format!("airplane limits must be positive: {self:?}")))
        }
    }

    pub fn curvature(&self) -> f64 {
        self.turn_rate / self.speed
    }

    /// Seconds needed for one full helical turn.
    pub fn helix_period(&self) -> f64 {
        TAU / self.turn_rate
    }
}

/// Dubins airplane distance estimate, always assuming the high-altitude
/// case: the planar Dubins distance is stretched by whole helical turns
/// until the altitude change fits, then combined with the climb.
///
/// This is not a strict lower bound on the lattice cost to go.
pub fn airplane_heuristic(
    s0: &ContinuousState,
    sg: &ContinuousState,
    limits: &AirplaneLimits,
) -> f64 {
    let planar = dubins_car_shortest(&s0.into(), &sg.into(), limits.curvature())
        .map(|p| p.total_length)
        .unwrap_or_else(|_| s0.planar_distance(sg));
    let dz = sg.z - s0.z;
    let mut t_min = planar / limits.speed;
    let t_z = dz.abs() / limits.climb_rate;
    if t_z > t_min {
        let helices = ((t_z - t_min) / limits.helix_period()).ceil();
        t_min += helices * limits.helix_period();
        // Guard against the ceil landing one short through rounding.
        while t_z > t_min {
            t_min += limits.helix_period();
        }
    }
    (limits.speed * t_min).hypot(dz)
}

/// Number of helical turns the heuristic inserts for this pair.
pub fn helix_count(s0: &ContinuousState, sg: &ContinuousState, limits: &AirplaneLimits) -> u32 {
    let planar = dubins_car_shortest(&s0.into(), &sg.into(), limits.curvature())
        .map(|p| p.total_length)
        .unwrap_or(0.0);
    let mut t_min = planar / limits.speed;
    let t_z = (sg.z - s0.z).abs() / limits.climb_rate;
    let mut n = 0;
    while t_z > t_min {
        t_min += limits.helix_period();
        n += 1;
    }
    n
}
