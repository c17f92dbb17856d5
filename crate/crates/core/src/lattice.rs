//! State quantization and fixed-duration motion primitives.

use serde::{Deserialize, Serialize};

use crate::dubins::AirplaneLimits;
use crate::error::{Error, Result};
use crate::geo::{angle_diff, wrap_angle, ContinuousState};

/// Cell size of a 4D grid over `(x, y, z, phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
}

impl Resolution {
    pub const fn new(x: f64, y: f64, z: f64, phi: f64) -> Self {
        Self { x, y, z, phi }
    }

    /// Motion-primitive grid used by the planner.
    pub const FINE: Resolution = Resolution::new(125.0, 125.0, 50.0, 0.05);

    /// Grid on which routing weights are stored.
    pub const COARSE: Resolution = Resolution::new(250.0, 250.0, 125.0, 0.125);

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.x) && ok(self.y) && ok(self.z) && ok(self.phi) {
            Ok(())
        } else {
            Err(Error::invalid(format!("resolution must be positive: {self:?}")))
        }
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::FINE
    }
}

/// Floor-quantized lattice cell, optionally tagged with a time step index.
///
/// Ordering is lexicographic over `(i, j, k, l, step)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridState {
    pub i: i32,
    pub j: i32,
    pub k: i32,
    pub l: i32,
    pub step: Option<u32>,
}

impl GridState {
    pub const fn new(i: i32, j: i32, k: i32, l: i32) -> Self {
        Self {
            i,
            j,
            k,
            l,
            step: None,
        }
    }

    pub fn with_step(mut self, step: u32) -> Self {
        self.step = Some(step);
        self
    }

    pub fn spatial(&self) -> GridState {
        GridState {
            step: None,
            ..*self
        }
    }
}

fn cell(v: f64, res: f64) -> i32 {
    (v / res).floor() as i32
}

/// Componentwise `floor(s / rho)`.
pub fn discretize(s: &ContinuousState, res: &Resolution) -> GridState {
    GridState::new(
        cell(s.x, res.x),
        cell(s.y, res.y),
        cell(s.z, res.z),
        cell(s.phi, res.phi),
    )
}

/// A constant control held for `duration` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    /// Bearing rate, rad/s.
    pub turn_rate: f64,
    /// Climb rate, m/s.
    pub climb_rate: f64,
    /// Seconds.
    pub duration: f64,
}

impl Primitive {
    pub const fn new(turn_rate: f64, climb_rate: f64, duration: f64) -> Self {
        Self {
            turn_rate,
            climb_rate,
            duration,
        }
    }

    pub fn within(&self, limits: &AirplaneLimits) -> bool {
        // Tolerance admits rates computed as angle / duration.
        self.turn_rate.abs() <= limits.turn_rate * (1.0 + 1e-12)
            && self.climb_rate.abs() <= limits.climb_rate * (1.0 + 1e-12)
    }

    /// Workspace path length of the primitive at forward speed `v`.
    pub fn length(&self, v: f64) -> f64 {
        self.duration * v.hypot(self.climb_rate)
    }
}

/// Integrates the airplane dynamics in closed form over one primitive.
/// Returns the successor and the workspace length of the edge.
pub fn apply_primitive(s: &ContinuousState, p: &Primitive, v: f64) -> (ContinuousState, f64) {
    let dt = p.duration;
    let z = s.z + p.climb_rate * dt;
    let (x, y, phi_end) = if p.turn_rate == 0.0 {
        let (sin, cos) = s.phi.sin_cos();
        (s.x + v * dt * cos, s.y + v * dt * sin, s.phi)
    } else {
        let r = v / p.turn_rate;
        let end = s.phi + p.turn_rate * dt;
        (
            s.x + r * (end.sin() - s.phi.sin()),
            s.y - r * (end.cos() - s.phi.cos()),
            end,
        )
    };
    (
        ContinuousState {
            x,
            y,
            z,
            phi: wrap_angle(phi_end),
        },
        p.length(v),
    )
}

/// Allowed control values; primitives are their cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    pub turn_rates: Vec<f64>,
    pub climb_rates: Vec<f64>,
}

impl ControlSet {
    /// Three turn and three climb rates at the given limits.
    pub fn symmetric(limits: &AirplaneLimits) -> Self {
        Self {
            turn_rates: vec![-limits.turn_rate, 0.0, limits.turn_rate],
            climb_rates: vec![-limits.climb_rate, 0.0, limits.climb_rate],
        }
    }

    /// Adds an auxiliary slower turn rate `aux` (both directions).
    pub fn with_aux_turn(limits: &AirplaneLimits, aux: f64) -> Self {
        Self {
            turn_rates: vec![-limits.turn_rate, -aux, 0.0, aux, limits.turn_rate],
            climb_rates: vec![-limits.climb_rate, 0.0, limits.climb_rate],
        }
    }

    pub fn primitives(&self, duration: f64) -> Vec<Primitive> {
        let mut out = Vec::with_capacity(self.turn_rates.len() * self.climb_rates.len());
        for &w in &self.turn_rates {
            for &c in &self.climb_rates {
                out.push(Primitive::new(w, c, duration));
            }
        }
        out
    }

    pub fn validate(&self, limits: &AirplaneLimits) -> Result<()> {
        if self.turn_rates.is_empty() || self.climb_rates.is_empty() {
            return Err(Error::invalid("control sets must be non-empty"));
        }
        if self.primitives(1.0).iter().all(|p| p.within(limits)) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "control set {self:?} exceeds airplane limits {limits:?}"
            )))
        }
    }
}

impl Default for ControlSet {
    fn default() -> Self {
        ControlSet::with_aux_turn(&AirplaneLimits::default(), 0.0025)
    }
}

/// All successors of `s` under the primitives of `controls`.
pub fn successors(
    s: &ContinuousState,
    limits: &AirplaneLimits,
    controls: &ControlSet,
    duration: f64,
) -> Vec<(ContinuousState, Primitive, f64)> {
    controls
        .primitives(duration)
        .into_iter()
        .map(|p| {
            let (next, len) = apply_primitive(s, &p, limits.speed);
            (next, p, len)
        })
        .collect()
}

/// Closed box around a goal state: `|dx| <= hx`, `|dy| <= hy`, `|dz| <= hz`
/// and wrapped `|dphi| <= hphi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalHalfWidths {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phi: f64,
}

impl Default for GoalHalfWidths {
    fn default() -> Self {
        Self {
            x: 500.0,
            y: 500.0,
            z: 25.0,
            phi: 0.125,
        }
    }
}

pub fn in_goal_region(s: &ContinuousState, goal: &ContinuousState, hw: &GoalHalfWidths) -> bool {
    (s.x - goal.x).abs() <= hw.x
        && (s.y - goal.y).abs() <= hw.y
        && (s.z - goal.z).abs() <= hw.z
        && angle_diff(s.phi, goal.phi).abs() <= hw.phi
}

/// Euclidean distance from `s` to the position part of the goal box; a
/// lower bound on the remaining path length.
pub fn distance_to_goal_box(s: &ContinuousState, goal: &ContinuousState, hw: &GoalHalfWidths) -> f64 {
    let ex = ((s.x - goal.x).abs() - hw.x).max(0.0);
    let ey = ((s.y - goal.y).abs() - hw.y).max(0.0);
    let ez = ((s.z - goal.z).abs() - hw.z).max(0.0);
    (ex * ex + ey * ey + ez * ez).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn discretize_examples() {
        let r = Resolution::FINE;
        assert_eq!(
            discretize(&ContinuousState::new(300.0, -1.0, 75.0, 0.06), &r),
            GridState::new(2, -1, 1, 1)
        );
        assert_eq!(discretize(&ContinuousState::default(), &r), GridState::new(0, 0, 0, 0));
        assert_eq!(
            discretize(&ContinuousState::new(-0.001, 0.0, 0.0, -0.001), &r),
            GridState::new(-1, 0, 0, -1)
        );
    }

    #[test]
    fn straight_level_primitive() {
        let s = ContinuousState::new(0.0, 0.0, 1000.0, 0.0);
        let (n, len) = apply_primitive(&s, &Primitive::new(0.0, 0.0, 30.0), 100.0);
        assert_relative_eq!(n.x, 3000.0);
        assert_eq!((n.y, n.z, n.phi), (0.0, 1000.0, 0.0));
        assert_relative_eq!(len, 3000.0);
    }

    #[test]
    fn arc_primitive() {
        let s = ContinuousState::new(0.0, 0.0, 1000.0, 0.0);
        let (n, len) = apply_primitive(&s, &Primitive::new(0.025, 0.0, 30.0), 100.0);
        assert_relative_eq!(n.x, 4000.0 * 0.75f64.sin(), max_relative = 1e-12);
        assert_relative_eq!(n.y, 4000.0 * (1.0 - 0.75f64.cos()), max_relative = 1e-12);
        assert_relative_eq!(n.phi, 0.75, max_relative = 1e-12);
        assert_relative_eq!(len, 3000.0);
    }

    #[test]
    fn climbing_primitive_length() {
        let s = ContinuousState::new(0.0, 0.0, 1000.0, 0.0);
        let (n, len) = apply_primitive(&s, &Primitive::new(0.0, 6.0, 30.0), 100.0);
        assert_relative_eq!(n.z - s.z, 180.0, max_relative = 1e-12);
        assert_relative_eq!(len, 3_005.395_148_728_366_6, max_relative = 1e-12);
    }

    #[test]
    fn successor_counts() {
        let s = ContinuousState::new(0.0, 0.0, 1000.0, 0.0);
        let lim = AirplaneLimits::default();
        assert_eq!(successors(&s, &lim, &ControlSet::default(), 30.0).len(), 15);
        assert_eq!(successors(&s, &lim, &ControlSet::symmetric(&lim), 30.0).len(), 9);
    }

    #[test]
    fn straight_successor_moves_only_in_plane() {
        let r = Resolution::FINE;
        let s = ContinuousState::new(10.0, 20.0, 1010.0, 0.01);
        let (n, _) = apply_primitive(&s, &Primitive::new(0.0, 0.0, 30.0), 100.0);
        let (a, b) = (discretize(&s, &r), discretize(&n, &r));
        assert_eq!((a.k, a.l), (b.k, b.l));
        assert_ne!((a.i, a.j), (b.i, b.j));
    }

    #[test]
    fn goal_region_is_closed() {
        let g = ContinuousState::new(1000.0, 2000.0, 600.0, 1.0);
        let hw = GoalHalfWidths::default();
        assert!(in_goal_region(&g, &g, &hw));
        assert!(in_goal_region(&ContinuousState { x: 1500.0, ..g }, &g, &hw));
        assert!(!in_goal_region(&ContinuousState { z: 626.0, ..g }, &g, &hw));
        let g2 = ContinuousState::new(0.0, 0.0, 0.0, -PI + 0.05);
        assert!(in_goal_region(&ContinuousState::new(0.0, 0.0, 0.0, PI - 0.05), &g2, &hw));
    }

    fn euler(s: &ContinuousState, p: &Primitive, v: f64, h: f64) -> ContinuousState {
        // Midpoint rule on the heading keeps the reference accurate at h = 1e-3.
        let n = (p.duration / h).round() as usize;
        let (mut x, mut y, mut z, mut phi) = (s.x, s.y, s.z, s.phi);
        for _ in 0..n {
            let mid = phi + 0.5 * p.turn_rate * h;
            x += v * mid.cos() * h;
            y += v * mid.sin() * h;
            z += p.climb_rate * h;
            phi += p.turn_rate * h;
        }
        ContinuousState::new(x, y, z, phi)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn closed_form_matches_integration(w in -0.025f64..0.025, c in -6f64..6.0, phi in -PI..PI) {
            let s = ContinuousState::new(100.0, -50.0, 2000.0, phi);
            let p = Primitive::new(w, c, 30.0);
            let (a, _) = apply_primitive(&s, &p, 100.0);
            let b = euler(&s, &p, 100.0, 1e-3);
            let scale = 3000.0;
            prop_assert!((a.x - b.x).abs() / scale < 1e-6);
            prop_assert!((a.y - b.y).abs() / scale < 1e-6);
            prop_assert!((a.z - b.z).abs() / a.z.abs() < 1e-6);
            prop_assert!(angle_diff(a.phi, b.phi).abs() < 1e-6);
        }

        #[test]
        fn planar_displacement_bounded(w in -0.025f64..0.025, phi in -PI..PI) {
            let s = ContinuousState::new(0.0, 0.0, 0.0, phi);
            let (a, _) = apply_primitive(&s, &Primitive::new(w, 0.0, 30.0), 100.0);
            let d = a.x.hypot(a.y);
            prop_assert!(d <= 3000.0 * (1.0 + 1e-12));
            if w != 0.0 { prop_assert!(d < 3000.0); }
        }
    }
}
