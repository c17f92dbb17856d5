//! Learnable penalty terms: the sparse airport routing field, the pairwise
//! separation potential, and the motion cost that combines them with path
//! length.

mod io;

pub use io::{read_field, read_separation, write_field, write_separation};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::geo::ContinuousState;
use crate::lattice::{discretize, GridState, Resolution};

/// Anything that can price a state for the routing part of the penalty.
pub trait RoutingCost: Send + Sync {
    /// Non-negative penalty at `s`.
    fn routing_penalty(&self, s: &ContinuousState) -> f64;
}

/// Zero routing penalty: plain shortest-path planning.
#[derive(Clone, Copy, Debug, Default)]
pub struct PathLengthOnly;

impl RoutingCost for PathLengthOnly {
    fn routing_penalty(&self, _: &ContinuousState) -> f64 {
        0.0
    }
}

pub const DEFAULT_ROUTING_WEIGHT: f64 = 100.0;

/// Sparse table of routing weights on a coarse grid. Weights are stored
/// unclamped and clamped at zero on evaluation; absent cells take the
/// default weight.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingCostField {
    cells: FxHashMap<GridState, f64>,
    default_weight: f64,
    resolution: Resolution,
}

impl Default for RoutingCostField {
    fn default() -> Self {
        Self::new(Resolution::COARSE, DEFAULT_ROUTING_WEIGHT)
    }
}

impl RoutingCostField {
    pub fn new(resolution: Resolution, default_weight: f64) -> Self {
        Self {
            cells: FxHashMap::default(),
            default_weight,
            resolution,
        }
    }

    pub fn resolution(&self) -> &Resolution {
        &self.resolution
    }

    pub fn default_weight(&self) -> f64 {
        self.default_weight
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_of(&self, s: &ContinuousState) -> GridState {
        discretize(s, &self.resolution)
    }

    /// Raw stored weight, `None` if the cell was never written.
    pub fn stored(&self, cell: &GridState) -> Option<f64> {
        self.cells.get(&cell.spatial()).copied()
    }

    /// Stored weight or the default.
    pub fn weight(&self, cell: &GridState) -> f64 {
        self.stored(cell).unwrap_or(self.default_weight)
    }

    pub fn set(&mut self, cell: GridState, w: f64) {
        self.cells.insert(cell.spatial(), w);
    }

    pub fn add(&mut self, cell: GridState, delta: f64) {
        let default = self.default_weight;
        *self.cells.entry(cell.spatial()).or_insert(default) += delta;
    }

    /// Clamped lookup, `max(w, 0)`.
    pub fn eval(&self, cell: &GridState) -> f64 {
        self.weight(cell).max(0.0)
    }

    /// Cells in lexicographic order.
    pub fn sorted_cells(&self) -> Vec<(GridState, f64)> {
        let mut v: Vec<_> = self.cells.iter().map(|(c, w)| (*c, *w)).collect();
        v.sort_by_key(|e| e.0);
        v
    }

    /// Parameter count of the routing part (stored cells only).
    pub fn parameters(&self) -> Vec<f64> {
        self.sorted_cells().into_iter().map(|(_, w)| w).collect()
    }
}

impl RoutingCost for RoutingCostField {
    fn routing_penalty(&self, s: &ContinuousState) -> f64 {
        self.eval(&self.cell_of(s))
    }
}

/// Linear drop-off potential around another airplane, a cylinder of radius
/// `v_xy` and half-height `v_z`, both in fine-grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCost {
    pub u: f64,
    pub v_xy: f64,
    pub v_z: f64,
}

impl Default for SeparationCost {
    fn default() -> Self {
        Self {
            u: 1.0,
            v_xy: 60.0,
            v_z: 60.0,
        }
    }
}

impl SeparationCost {
    pub fn new(u: f64, v_xy: f64, v_z: f64) -> Self {
        Self { u, v_xy, v_z }
    }

    /// Penalty value at the largest possible overlap.
    pub fn peak(&self) -> f64 {
        self.u * self.v_xy.max(0.0) * self.v_z.max(0.0)
    }
}

fn offsets(a: &GridState, b: &GridState) -> (f64, f64) {
    let dx = f64::from(a.i - b.i);
    let dy = f64::from(a.j - b.j);
    let dz = f64::from(a.k - b.k);
    (dx.hypot(dy), dz.abs())
}

/// `u * max(v_z - |dz|, 0) * max(v_xy - r_xy, 0)` for two fine cells.
pub fn eval_separation(sep: &SeparationCost, a: &GridState, b: &GridState) -> f64 {
    let (r, dz) = offsets(a, b);
    sep.u * (sep.v_z - dz).max(0.0) * (sep.v_xy - r).max(0.0)
}

/// Gradient of the separation penalty with respect to `(v_xy, v_z)`. The
/// subgradient of the clamp at exactly zero is taken as zero.
pub fn separation_gradient(sep: &SeparationCost, a: &GridState, b: &GridState) -> [f64; 2] {
    let (r, dz) = offsets(a, b);
    let vert = sep.v_z - dz;
    let horiz = sep.v_xy - r;
    let d_xy = if horiz > 0.0 { sep.u * vert.max(0.0) } else { 0.0 };
    let d_z = if vert > 0.0 { sep.u * horiz.max(0.0) } else { 0.0 };
    [d_xy, d_z]
}

/// A previously planned airplane, sampled every `dt` seconds from `t_start`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleTrack {
    pub t_start: f64,
    pub dt: f64,
    pub cells: Vec<GridState>,
}

impl ObstacleTrack {
    pub fn new(t_start: f64, dt: f64, states: &[ContinuousState], fine: &Resolution) -> Self {
        Self {
            t_start,
            dt,
            cells: states.iter().map(|s| discretize(s, fine)).collect(),
        }
    }

    /// Cell occupied at absolute time `t`, snapped to the nearest sample.
    /// `None` before the first and after the last sample.
    pub fn cell_at(&self, t: f64) -> Option<&GridState> {
        let idx = ((t - self.t_start) / self.dt).round();
        if idx < 0.0 {
            return None;
        }
        self.cells.get(idx as usize)
    }
}

/// Fine-cell pairs between a trajectory starting at `t_start` with step
/// `dt` and an obstacle, at every trajectory time the obstacle is present.
pub fn aligned_pairs(
    t_start: f64,
    dt: f64,
    states: &[ContinuousState],
    obstacle: &ObstacleTrack,
    fine: &Resolution,
) -> Vec<(GridState, GridState)> {
    states
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let o = obstacle.cell_at(t_start + k as f64 * dt)?;
            Some((discretize(s, fine), *o))
        })
        .collect()
}

/// The full penalty seen by the planner.
#[derive(Clone, Copy)]
pub struct CostModel<'a> {
    pub routing: &'a dyn RoutingCost,
    pub separation: Option<&'a SeparationCost>,
    pub obstacles: &'a [ObstacleTrack],
    pub fine: Resolution,
}

impl<'a> CostModel<'a> {
    pub fn routing_only(routing: &'a dyn RoutingCost) -> Self {
        Self {
            routing,
            separation: None,
            obstacles: &[],
            fine: Resolution::FINE,
        }
    }

    pub fn with_separation(
        routing: &'a dyn RoutingCost,
        separation: &'a SeparationCost,
        obstacles: &'a [ObstacleTrack],
        fine: Resolution,
    ) -> Self {
        Self {
            routing,
            separation: Some(separation),
            obstacles,
            fine,
        }
    }

    /// True when the penalty depends on time, so search states need a step.
    pub fn is_time_dependent(&self) -> bool {
        self.separation.is_some() && !self.obstacles.is_empty()
    }

    /// Sum of separation penalties against every obstacle present at `t`.
    pub fn separation_penalty(&self, s: &ContinuousState, t: f64) -> f64 {
        let Some(sep) = self.separation else {
            return 0.0;
        };
        let me = discretize(s, &self.fine);
        self.obstacles
            .iter()
            .filter_map(|o| o.cell_at(t))
            .map(|o| eval_separation(sep, &me, o))
            .sum()
    }

    /// Routing plus separation penalty at state `s` and absolute time `t`.
    pub fn total_penalty(&self, s: &ContinuousState, t: f64) -> f64 {
        self.routing.routing_penalty(s) + self.separation_penalty(s, t)
    }

    /// Cost of an edge of workspace length `len` ending in `s` at time `t`.
    pub fn edge_cost(&self, s: &ContinuousState, t: f64, len: f64) -> f64 {
        (1.0 + self.total_penalty(s, t)) * len
    }
}

/// Rectangle-rule motion cost of a discrete plan: each edge is priced by
/// the penalty at its end state. `states[0]` is at `t_start`, consecutive
/// states are `dt` apart and `edge_lengths[e]` joins `states[e]` to
/// `states[e + 1]`.
pub fn trajectory_cost(
    states: &[ContinuousState],
    edge_lengths: &[f64],
    model: &CostModel<'_>,
    t_start: f64,
    dt: f64,
) -> f64 {
    debug_assert_eq!(states.len(), edge_lengths.len() + 1);
    edge_lengths
        .iter()
        .enumerate()
        .map(|(e, len)| model.edge_cost(&states[e + 1], t_start + (e + 1) as f64 * dt, *len))
        .sum()
}

/// Per-axis standard deviation (meters) of the perturbation applied to
/// states before they are counted in a routing update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateNoise {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl StateNoise {
    pub const NONE: StateNoise = StateNoise {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }
}

impl StateNoise {
    /// Standard deviations given as fractions of a grid cell.
    pub fn in_cells(fx: f64, fy: f64, fz: f64, res: &Resolution) -> Self {
        Self {
            x: fx * res.x,
            y: fy * res.y,
            z: fz * res.z,
        }
    }
}

impl Default for StateNoise {
    /// A quarter cell horizontally and an eighth vertically on the coarse grid.
    fn default() -> Self {
        Self::in_cells(0.25, 0.25, 0.125, &Resolution::COARSE)
    }
}

fn perturb<R: Rng + ?Sized>(s: &ContinuousState, noise: &StateNoise, rng: &mut R) -> ContinuousState {
    if noise.is_zero() {
        return *s;
    }
    let mut draw = |sd: f64| {
        if sd > 0.0 {
            Normal::new(0.0, sd).expect("finite std").sample(rng)
        } else {
            0.0
        }
    };
    ContinuousState {
        x: s.x + draw(noise.x),
        y: s.y + draw(noise.y),
        z: s.z + draw(noise.z),
        phi: s.phi,
    }
}

/// One stochastic ascent step on the routing weights: every (perturbed)
/// expert visit lowers its cell by `step`, every learner visit raises it.
/// Expert states are perturbed first, then learner states.
pub fn routing_gradient_step<R: Rng + ?Sized>(
    field: &mut RoutingCostField,
    learner_states: &[ContinuousState],
    expert_states: &[ContinuousState],
    step: f64,
    noise: &StateNoise,
    rng: &mut R,
) {
    let mut counts: FxHashMap<GridState, i64> = FxHashMap::default();
    for s in expert_states {
        let c = field.cell_of(&perturb(s, noise, rng));
        *counts.entry(c).or_default() -= 1;
    }
    for s in learner_states {
        let c = field.cell_of(&perturb(s, noise, rng));
        *counts.entry(c).or_default() += 1;
    }
    let mut touched: Vec<_> = counts.into_iter().filter(|(_, n)| *n != 0).collect();
    touched.sort_unstable_by_key(|(c, _)| *c);
    for (cell, n) in touched {
        field.add(cell, step * n as f64);
    }
}

/// Outcome of a separation update, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationUpdate {
    /// Learner minus expert feature sums before clipping.
    pub raw: [f64; 2],
    /// Gradient after per-component clipping.
    pub applied: [f64; 2],
}

pub fn separation_feature_sum(sep: &SeparationCost, pairs: &[(GridState, GridState)]) -> [f64; 2] {
    pairs.iter().fold([0.0; 2], |acc, (a, b)| {
        let g = separation_gradient(sep, a, b);
        [acc[0] + g[0], acc[1] + g[1]]
    })
}

/// Ascent step on `(v_xy, v_z)` from learner and expert pair features,
/// clipped per component to `[-clip, clip]` and projected onto `>= 0`.
pub fn separation_gradient_step(
    sep: &mut SeparationCost,
    learner_pairs: &[(GridState, GridState)],
    expert_pairs: &[(GridState, GridState)],
    step: f64,
    clip: f64,
) -> SeparationUpdate {
    let l = separation_feature_sum(sep, learner_pairs);
    let e = separation_feature_sum(sep, expert_pairs);
    let raw = [l[0] - e[0], l[1] - e[1]];
    let applied = raw.map(|g| g.clamp(-clip, clip));
    sep.v_xy = (sep.v_xy + step * applied[0]).max(0.0);
    sep.v_z = (sep.v_z + step * applied[1]).max(0.0);
    SeparationUpdate { raw, applied }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lattice::{apply_primitive, Primitive};

    fn g(i: i32, j: i32, k: i32) -> GridState {
        GridState::new(i, j, k, 0)
    }

    #[test]
    fn routing_lookup() {
        let mut f = RoutingCostField::default();
        assert_eq!(f.eval(&g(1, 2, 3)), 100.0);
        f.set(g(1, 2, 3), -5.0);
        assert_eq!(f.eval(&g(1, 2, 3)), 0.0);
        assert_eq!(f.stored(&g(1, 2, 3)), Some(-5.0));
        f.set(g(4, 0, 0), 42.0);
        assert_eq!(f.eval(&g(4, 0, 0)), 42.0);
        // Time steps never split routing cells.
        assert_eq!(f.eval(&g(4, 0, 0).with_step(7)), 42.0);
    }

    #[test]
    fn separation_examples() {
        let sep = SeparationCost::default();
        assert_eq!(eval_separation(&sep, &g(0, 0, 0), &g(0, 0, 0)), 3600.0);
        assert_eq!(eval_separation(&sep, &g(0, 0, 60), &g(0, 0, 0)), 0.0);
        assert_eq!(eval_separation(&sep, &g(30, 40, 10), &g(0, 0, 0)), 500.0);
    }

    #[test]
    fn total_penalty_sums_obstacles() {
        let field = RoutingCostField::default();
        let sep = SeparationCost::default();
        let s = ContinuousState::new(1000.0, 1000.0, 1000.0, 0.0);
        let far = ContinuousState::new(100_000.0, 0.0, 1000.0, 0.0);
        let fine = Resolution::FINE;

        let none = CostModel::routing_only(&field);
        assert_eq!(none.total_penalty(&s, 0.0), 100.0);

        let outside = [ObstacleTrack::new(0.0, 30.0, &[far], &fine)];
        let m = CostModel::with_separation(&field, &sep, &outside, fine);
        assert_eq!(m.total_penalty(&s, 0.0), 100.0);

        let one = [ObstacleTrack::new(0.0, 30.0, &[s], &fine)];
        let two = [one[0].clone(), one[0].clone()];
        let single = CostModel::with_separation(&field, &sep, &one, fine).total_penalty(&s, 0.0);
        let double = CostModel::with_separation(&field, &sep, &two, fine).total_penalty(&s, 0.0);
        assert_eq!(single, 100.0 + 3600.0);
        assert_eq!(double, 100.0 + 2.0 * 3600.0);

        // A landed obstacle no longer contributes.
        let landed = CostModel::with_separation(&field, &sep, &one, fine);
        assert_eq!(landed.total_penalty(&s, 60.0), 100.0);
        assert_eq!(landed.total_penalty(&s, -30.0), 100.0);
    }

    #[test]
    fn trajectory_cost_examples() {
        let mut zero = RoutingCostField::new(Resolution::COARSE, 0.0);
        zero.set(g(0, 0, 0), 0.0);
        let p = Primitive::new(0.0, 0.0, 30.0);
        let s0 = ContinuousState::new(0.0, 0.0, 1000.0, 0.0);
        let (s1, l1) = apply_primitive(&s0, &p, 100.0);
        let (s2, l2) = apply_primitive(&s1, &p, 100.0);
        let states = [s0, s1, s2];
        let m = CostModel::routing_only(&zero);
        assert_relative_eq!(trajectory_cost(&states, &[l1, l2], &m, 0.0, 30.0), 6000.0);

        let uniform = RoutingCostField::default();
        let m = CostModel::routing_only(&uniform);
        assert_relative_eq!(trajectory_cost(&states, &[l1, l2], &m, 0.0, 30.0), 101.0 * 6000.0);
    }

    #[test]
    fn trajectory_cost_mixed_cells() {
        // Recompute edge by edge against hand-set weights.
        let mut f = RoutingCostField::default();
        let s = [
            ContinuousState::new(10.0, 10.0, 10.0, 0.01),
            ContinuousState::new(260.0, 10.0, 10.0, 0.01),
            ContinuousState::new(510.0, 300.0, 200.0, 0.01),
        ];
        f.set(f.cell_of(&s[1]), 7.0);
        f.set(f.cell_of(&s[2]), -3.0);
        let m = CostModel::routing_only(&f);
        let c = trajectory_cost(&s, &[250.0, 400.0], &m, 0.0, 30.0);
        assert_relative_eq!(c, 8.0 * 250.0 + 1.0 * 400.0);
    }

    #[test]
    fn routing_step_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ContinuousState::new(10.0, 10.0, 10.0, 0.0);
        let b = ContinuousState::new(5000.0, 10.0, 10.0, 0.0);
        let mut f = RoutingCostField::default();
        routing_gradient_step(&mut f, &[a, b], &[a, b], 10.0, &StateNoise::NONE, &mut rng);
        assert!(f.is_empty());

        routing_gradient_step(&mut f, &[], &[a], 10.0, &StateNoise::NONE, &mut rng);
        assert_eq!(f.weight(&f.cell_of(&a)), 90.0);

        routing_gradient_step(&mut f, &[b, b], &[], 10.0, &StateNoise::NONE, &mut rng);
        assert_eq!(f.weight(&f.cell_of(&b)), 120.0);
    }

    #[test]
    fn separation_step_examples() {
        let mut sep = SeparationCost::default();
        let pair = (g(0, 0, 0), g(0, 0, 0));
        let up = separation_gradient_step(&mut sep, &[pair], &[pair], 0.01, 100.0);
        assert_eq!(up.applied, [0.0, 0.0]);
        assert_eq!(sep, SeparationCost::default());

        let up = separation_gradient_step(&mut sep, &[], &[pair], 0.01, 100.0);
        assert_eq!(up.raw, [-60.0, -60.0]);
        assert_relative_eq!(sep.v_xy, 59.4, max_relative = 1e-12);
        assert_relative_eq!(sep.v_z, 59.4, max_relative = 1e-12);
    }

    #[test]
    fn separation_step_clips_and_projects() {
        let mut sep = SeparationCost::new(1.0, 1.0, 1.0);
        let pairs = vec![(g(0, 0, 0), g(0, 0, 0)); 1000];
        let up = separation_gradient_step(&mut sep, &[], &pairs, 1.0, 100.0);
        assert_eq!(up.applied, [-100.0, -100.0]);
        assert_eq!((sep.v_xy, sep.v_z), (0.0, 0.0));
    }

    fn j(v_xy: f64, v_z: f64, pairs: &[(GridState, GridState)]) -> f64 {
        let sep = SeparationCost::new(1.3, v_xy, v_z);
        pairs.iter().map(|(a, b)| eval_separation(&sep, a, b)).sum()
    }

    proptest! {
        #[test]
        fn separation_symmetric_and_nonnegative(a in (-80i32..80, -80i32..80, -80i32..80), b in (-80i32..80, -80i32..80, -80i32..80),
                                                v_xy in 0f64..100.0, v_z in 0f64..100.0) {
            let sep = SeparationCost::new(1.0, v_xy, v_z);
            let (a, b) = (g(a.0, a.1, a.2), g(b.0, b.1, b.2));
            let x = eval_separation(&sep, &a, &b);
            prop_assert!(x >= 0.0);
            prop_assert_eq!(x, eval_separation(&sep, &b, &a));
            let (r, dz) = offsets(&a, &b);
            if r >= v_xy || dz >= v_z { prop_assert_eq!(x, 0.0); } else { prop_assert!(x > 0.0); }
        }

        #[test]
        fn gradient_matches_finite_differences(
            raw in proptest::collection::vec((-50i32..50, -50i32..50, -50i32..50), 1..20),
            v_xy in 5f64..70.0, v_z in 5f64..70.0,
        ) {
            let pairs: Vec<_> = raw.iter().map(|&(i, j, k)| (g(i, j, k), g(0, 0, 0))).collect();
            let h = 1e-4;
            // Stay away from the clamp kinks.
            for (a, b) in &pairs {
                let (r, dz) = offsets(a, b);
                prop_assume!((v_xy - r).abs() > 2.0 * h && (v_z - dz).abs() > 2.0 * h);
            }
            let sep = SeparationCost::new(1.3, v_xy, v_z);
            let analytic = separation_feature_sum(&sep, &pairs);
            let fd_xy = (j(v_xy + h, v_z, &pairs) - j(v_xy - h, v_z, &pairs)) / (2.0 * h);
            let fd_z = (j(v_xy, v_z + h, &pairs) - j(v_xy, v_z - h, &pairs)) / (2.0 * h);
            prop_assert!((analytic[0] - fd_xy).abs() < 1e-6, "{} vs {}", analytic[0], fd_xy);
            prop_assert!((analytic[1] - fd_z).abs() < 1e-6, "{} vs {}", analytic[1], fd_z);
        }
    }
}
