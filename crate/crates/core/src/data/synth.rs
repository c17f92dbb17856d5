//! Synthetic experts: arrivals planned under a known cost function, so that
//! learned costs can be compared with the truth.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Demonstration;
use crate::costs::{CostModel, RoutingCost, SeparationCost};
use crate::error::{Error, Result};
use crate::geo::{ContinuousState, EnuOrigin};
use crate::par::{self, Execution};
use crate::planner::{ara_star, plan_sequence, Arrival, PlanOutcome, PlannerConfig, Query};

/// Corridor-shaped routing cost: cheap within `half_width_m` of any
/// corridor polyline (and inside its altitude band, if given), expensive
/// elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorField {
    pub corridors: Vec<Corridor>,
    pub inside_cost: f64,
    pub outside_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    /// Polyline vertices `(x, y)` in meters.
    pub waypoints: Vec<[f64; 2]>,
    pub half_width_m: f64,
    /// Inclusive altitude band `(lo, hi)` in meters.
    pub z_band_m: Option<[f64; 2]>,
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

impl Corridor {
    pub fn planar_distance(&self, x: f64, y: f64) -> f64 {
        match self.waypoints.as_slice() {
            [] => f64::INFINITY,
            [only] => (x - only[0]).hypot(y - only[1]),
            pts => pts
                .windows(2)
                .map(|w| segment_distance([x, y], w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, s: &ContinuousState) -> bool {
        let in_band = self.z_band_m.is_none_or(|[lo, hi]| (lo..=hi).contains(&s.z));
        in_band && self.planar_distance(s.x, s.y) <= self.half_width_m
    }
}

impl CorridorField {
    pub fn inside(&self, s: &ContinuousState) -> bool {
        self.corridors.iter().any(|c| c.contains(s))
    }
}

impl RoutingCost for CorridorField {
    fn routing_penalty(&self, s: &ContinuousState) -> f64 {
        if self.inside(s) {
            self.inside_cost
        } else {
            self.outside_cost
        }
    }
}

/// Geometry of the synthetic airport: arrivals enter on a ring, fly a
/// dog-leg corridor to a final approach fix and land along the runway
/// heading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub origin: EnuOrigin,
    /// Runway state the arrivals aim for.
    pub goal: ContinuousState,
    pub entry_radius_m: f64,
    /// Positions of the entry fixes on the ring, radians from +x.
    pub entry_bearings_rad: Vec<f64>,
    /// The dog-leg vertex sits at this fraction of the ring radius...
    pub dogleg_radius_frac: f64,
    /// ...rotated by this angle from the entry fix, toward the runway side.
    pub dogleg_angle_rad: f64,
    /// Distance of the final approach fix before the runway, meters.
    pub final_fix_m: f64,
    /// Starts are this many full-rate descent primitives above the goal.
    pub descent_steps: u32,
    pub corridor_half_width_m: f64,
    pub inside_cost: f64,
    pub outside_cost: f64,
    pub jitter_xy_m: f64,
    pub jitter_heading_rad: f64,
    /// Planner failures are retried with a fresh start this many times.
    pub max_retries: u32,
    /// Start time spacing between consecutive routing demonstrations.
    pub spacing_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            origin: EnuOrigin::SEA,
            goal: ContinuousState::new(0.0, 0.0, 600.0, 0.0),
            entry_radius_m: 40_000.0,
            entry_bearings_rad: vec![PI / 2.0, PI, -PI / 2.0],
            dogleg_radius_frac: 0.55,
            dogleg_angle_rad: 0.6,
            final_fix_m: 12_000.0,
            descent_steps: 10,
            corridor_half_width_m: 1_500.0,
            inside_cost: 0.0,
            outside_cost: 4.0,
            jitter_xy_m: 150.0,
            jitter_heading_rad: 0.03,
            max_retries: 3,
            spacing_s: 3_600.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entry_bearings_rad.is_empty() {
            return Err(Error::invalid("at least one entry bearing is required"));
        }
        if !(self.entry_radius_m > 0.0 && self.corridor_half_width_m > 0.0) {
            return Err(Error::invalid("entry radius and corridor width must be positive"));
        }
        if !(self.inside_cost >= 0.0 && self.outside_cost >= 0.0) {
            return Err(Error::invalid("corridor costs must be non-negative"));
        }
        Ok(())
    }

    fn final_fix(&self) -> [f64; 2] {
        let (s, c) = self.goal.phi.sin_cos();
        [self.goal.x - self.final_fix_m * c, self.goal.y - self.final_fix_m * s]
    }

    fn entry(&self, bearing: f64) -> [f64; 2] {
        let (s, c) = bearing.sin_cos();
        [self.goal.x + self.entry_radius_m * c, self.goal.y + self.entry_radius_m * s]
    }

    fn dogleg(&self, bearing: f64) -> [f64; 2] {
        let side = if bearing.sin() >= 0.0 { 1.0 } else { -1.0 };
        let a = bearing + side * self.dogleg_angle_rad;
        let r = self.dogleg_radius_frac * self.entry_radius_m;
        [self.goal.x + r * a.cos(), self.goal.y + r * a.sin()]
    }

    /// Entry, dog-leg vertex, final approach fix and runway for one entry.
    pub fn route(&self, bearing: f64) -> Vec<[f64; 2]> {
        vec![
            self.entry(bearing),
            self.dogleg(bearing),
            self.final_fix(),
            [self.goal.x, self.goal.y],
        ]
    }

    /// The ground-truth routing cost.
    pub fn corridor_field(&self) -> CorridorField {
        CorridorField {
            corridors: self
                .entry_bearings_rad
                .iter()
                .map(|&b| Corridor {
                    waypoints: self.route(b),
                    half_width_m: self.corridor_half_width_m,
                    z_band_m: None,
                })
                .collect(),
            inside_cost: self.inside_cost,
            outside_cost: self.outside_cost,
        }
    }

    pub fn start_altitude(&self, planner: &PlannerConfig) -> f64 {
        self.goal.z + f64::from(self.descent_steps) * planner.limits.climb_rate * planner.dt
    }

    /// A jittered start at entry `entry`, heading for the dog-leg vertex.
    pub fn sample_start<R: Rng + ?Sized>(&self, entry: usize, planner: &PlannerConfig, rng: &mut R) -> ContinuousState {
        let b = self.entry_bearings_rad[entry % self.entry_bearings_rad.len()];
        let e = self.entry(b);
        let w = self.dogleg(b);
        let jx = rng.random_range(-1.0..=1.0) * self.jitter_xy_m;
        let jy = rng.random_range(-1.0..=1.0) * self.jitter_xy_m;
        let jh = rng.random_range(-1.0..=1.0) * self.jitter_heading_rad;
        let heading = (w[1] - e[1]).atan2(w[0] - e[0]);
        ContinuousState::new(e[0] + jx, e[1] + jy, self.start_altitude(planner), heading + jh)
    }
}

/// Known cost functions behind a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub routing: CorridorField,
    pub separation: Option<SeparationCost>,
}

/// A set of arrivals planned together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub origin: EnuOrigin,
    pub arrivals: Vec<ScenarioArrival>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioArrival {
    pub start: ContinuousState,
    pub goal: ContinuousState,
    pub t_start: f64,
}

impl From<&ScenarioArrival> for Arrival {
    fn from(a: &ScenarioArrival) -> Self {
        Arrival {
            start: a.start,
            goal: a.goal,
            t_start: a.t_start,
        }
    }
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Plans `count` independent expert arrivals under `truth`, one per scene,
/// cycling through the entry fixes. A start whose search fails is redrawn
/// up to `max_retries` times; samples that still fail are dropped with a
/// warning. Each sample draws from its own random stream, so the output
/// does not depend on the execution mode.
pub fn synth_routing(
    truth: &dyn RoutingCost,
    cfg: &SynthConfig,
    planner: &PlannerConfig,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<Scenario>, Vec<Demonstration>)> {
    cfg.validate()?;
    planner.validate()?;
    let model = CostModel::routing_only(truth);
    let ids: Vec<usize> = (0..count).collect();
    let planned = par::map(exec, &ids, |_, &i| {
        let mut rng = sample_rng(seed, i as u64);
        for attempt in 0..=cfg.max_retries {
            let start = cfg.sample_start(i, planner, &mut rng);
            let t_start = i as f64 * cfg.spacing_s;
            let q = Query::new(start, cfg.goal).at(t_start);
            match ara_star(&q, &model, planner) {
                PlanOutcome::Found(p) => return Some((q, p)),
                PlanOutcome::Timeout { expansions, .. } => {
                    log::debug!("sample {i} attempt {attempt}: no plan after {expansions} expansions")
                }
            }
        }
        log::warn!("dropping synthetic sample {i} after {} attempts", cfg.max_retries + 1);
        None
    });
    let mut scenarios = Vec::new();
    let mut demos = Vec::new();
    for (i, r) in planned.into_iter().enumerate() {
        let Some((q, plan)) = r else { continue };
        let scene = scenarios.len() as u32;
        scenarios.push(Scenario {
            origin: cfg.origin,
            arrivals: vec![ScenarioArrival {
                start: q.start,
                goal: q.goal,
                t_start: q.t_start,
            }],
        });
        demos.push(Demonstration::from_plan(format!("r{i:05}"), scene, 0, &plan));
    }
    Ok((scenarios, demos))
}

/// Arrivals of one scene before jitter: `(start, goal, t_offset_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub arrivals: Vec<ScenarioArrival>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub origin: EnuOrigin,
    /// Scenes cycle through the templates.
    pub templates: Vec<SceneTemplate>,
    /// Each later arrival's start time moves by up to this many time steps.
    pub jitter_steps: u32,
    pub jitter_xy_m: f64,
    /// Time between the first arrivals of consecutive scenes.
    pub spacing_s: f64,
}

impl SceneConfig {
    /// Converging arrivals from pairs of entry fixes, the second one a few
    /// steps behind the first.
    pub fn converging(synth: &SynthConfig, planner: &PlannerConfig) -> Self {
        let z0 = synth.start_altitude(planner);
        let n = synth.entry_bearings_rad.len();
        let mut templates = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a == b && n > 1 {
                    continue;
                }
                let mk = |k: usize, delay: f64| {
                    let bearing = synth.entry_bearings_rad[k];
                    let e = synth.entry(bearing);
                    let w = synth.dogleg(bearing);
                    ScenarioArrival {
                        start: ContinuousState::new(e[0], e[1], z0, (w[1] - e[1]).atan2(w[0] - e[0])),
                        goal: synth.goal,
                        t_start: delay,
                    }
                };
                templates.push(SceneTemplate {
                    arrivals: vec![mk(a, 0.0), mk(b, 2.0 * planner.dt)],
                });
            }
        }
        Self {
            origin: synth.origin,
            templates,
            jitter_steps: 2,
            jitter_xy_m: 500.0,
            spacing_s: 7_200.0,
        }
    }
}

/// Level transits for learning separation away from the airport. Trail
/// pairs fly the same straight lane one time step apart, inside a narrow
/// altitude band, so they must separate horizontally. Crossing pairs meet
/// at the intersection of two lanes without an altitude band and separate
/// vertically. Leaving a lane is expensive in both cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitConfig {
    pub origin: EnuOrigin,
    pub altitude_m: f64,
    pub lane_length_m: f64,
    pub half_width_m: f64,
    /// Half-height of the altitude band of trail lanes.
    pub band_half_height_m: f64,
    pub outside_cost: f64,
    /// Parallel trail lanes, `lane_spacing_m` apart along y.
    pub trail_lanes: usize,
    pub lane_spacing_m: f64,
    /// Delay of the trailing airplane, seconds.
    pub trail_delay_s: f64,
    /// The crossing lanes intersect at `(crossing_x_m, 0)`.
    pub crossing_x_m: f64,
    pub jitter_xy_m: f64,
    pub spacing_s: f64,
}

impl Default for TransitConfig {
    fn default() -> Self {
        Self {
            origin: EnuOrigin::SEA,
            altitude_m: 3_000.0,
            lane_length_m: 60_000.0,
            half_width_m: 1_000.0,
            band_half_height_m: 100.0,
            outside_cost: 100.0,
            trail_lanes: 2,
            lane_spacing_m: 20_000.0,
            trail_delay_s: 30.0,
            crossing_x_m: 100_000.0,
            jitter_xy_m: 500.0,
            spacing_s: 7_200.0,
        }
    }
}

impl TransitConfig {
    fn trail_lane(&self, n: usize) -> (ContinuousState, ContinuousState) {
        let y = n as f64 * self.lane_spacing_m;
        (
            ContinuousState::new(0.0, y, self.altitude_m, 0.0),
            ContinuousState::new(self.lane_length_m, y, self.altitude_m, 0.0),
        )
    }

    fn crossing_lanes(&self) -> [(ContinuousState, ContinuousState); 2] {
        let (h, x, z) = (self.lane_length_m / 2.0, self.crossing_x_m, self.altitude_m);
        [
            (ContinuousState::new(x, -h, z, PI / 2.0), ContinuousState::new(x, h, z, PI / 2.0)),
            (ContinuousState::new(x - h, 0.0, z, 0.0), ContinuousState::new(x + h, 0.0, z, 0.0)),
        ]
    }

    /// The ground-truth routing cost of the transit lanes.
    pub fn routing(&self) -> CorridorField {
        let lane = |a: &ContinuousState, b: &ContinuousState, band: Option<[f64; 2]>| Corridor {
            waypoints: vec![[a.x, a.y], [b.x, b.y]],
            half_width_m: self.half_width_m,
            z_band_m: band,
        };
        let band = [self.altitude_m - self.band_half_height_m, self.altitude_m + self.band_half_height_m];
        let mut corridors: Vec<Corridor> = (0..self.trail_lanes)
            .map(|n| {
                let (a, b) = self.trail_lane(n);
                lane(&a, &b, Some(band))
            })
            .collect();
        corridors.extend(self.crossing_lanes().iter().map(|(a, b)| lane(a, b, None)));
        CorridorField {
            corridors,
            inside_cost: 0.0,
            outside_cost: self.outside_cost,
        }
    }

    pub fn scenes(&self) -> SceneConfig {
        let arrival = |(start, goal): (ContinuousState, ContinuousState), t_start| ScenarioArrival { start, goal, t_start };
        let mut templates: Vec<SceneTemplate> = (0..self.trail_lanes)
            .map(|n| SceneTemplate {
                arrivals: vec![
                    arrival(self.trail_lane(n), 0.0),
                    arrival(self.trail_lane(n), self.trail_delay_s),
                ],
            })
            .collect();
        let [a, b] = self.crossing_lanes();
        // The second airplane is planned against the first.
        templates.push(SceneTemplate {
            arrivals: vec![arrival(a, 0.0), arrival(b, 1.0)],
        });
        SceneConfig {
            origin: self.origin,
            templates,
            jitter_steps: 0,
            jitter_xy_m: self.jitter_xy_m,
            spacing_s: self.spacing_s,
        }
    }
}

/// Plans `count` multi-arrival scenes under the ground-truth routing and
/// separation costs. Arrivals are planned in order with the earlier expert
/// plans as moving obstacles. Scenes in which any arrival fails are redrawn
/// up to `retries` times, then dropped.
#[allow(clippy::too_many_arguments)]
pub fn synth_scenes(
    routing: &dyn RoutingCost,
    separation: &SeparationCost,
    cfg: &SceneConfig,
    planner: &PlannerConfig,
    count: usize,
    retries: u32,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<Scenario>, Vec<Demonstration>)> {
    planner.validate()?;
    if cfg.templates.is_empty() || cfg.templates.iter().any(|t| t.arrivals.is_empty()) {
        return Err(Error::invalid("scene templates must be non-empty"));
    }
    let ids: Vec<usize> = (0..count).collect();
    let planned = par::map(exec, &ids, |_, &i| {
        let mut rng = sample_rng(seed, (1 << 32) + i as u64);
        let template = &cfg.templates[i % cfg.templates.len()];
        let base = i as f64 * cfg.spacing_s;
        for _ in 0..=retries {
            let mut arrivals: Vec<ScenarioArrival> = template
                .arrivals
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let shift = if k == 0 || cfg.jitter_steps == 0 {
                        0.0
                    } else {
                        f64::from(rng.random_range(0..=2 * cfg.jitter_steps)) - f64::from(cfg.jitter_steps)
                    };
                    let jx = rng.random_range(-1.0..=1.0) * cfg.jitter_xy_m;
                    let jy = rng.random_range(-1.0..=1.0) * cfg.jitter_xy_m;
                    ScenarioArrival {
                        start: ContinuousState::new(a.start.x + jx, a.start.y + jy, a.start.z, a.start.phi),
                        goal: a.goal,
                        t_start: base + a.t_start + shift * planner.dt,
                    }
                })
                .collect();
            arrivals.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
            let seq: Vec<Arrival> = arrivals.iter().map(Arrival::from).collect();
            let outcomes = plan_sequence(&seq, routing, separation, planner);
            if outcomes.iter().all(|o| !o.is_timeout()) {
                let plans: Vec<_> = outcomes.into_iter().filter_map(PlanOutcome::into_plan).collect();
                return Some((arrivals, plans));
            }
        }
        log::warn!("dropping synthetic scene {i} after {} attempts", retries + 1);
        None
    });
    let mut scenarios = Vec::new();
    let mut demos = Vec::new();
    for (i, r) in planned.into_iter().enumerate() {
        let Some((arrivals, plans)) = r else { continue };
        let scene = scenarios.len() as u32;
        for (k, p) in plans.iter().enumerate() {
            demos.push(Demonstration::from_plan(format!("s{i:05}_{k}"), scene, k as u32, p));
        }
        scenarios.push(Scenario {
            origin: cfg.origin,
            arrivals,
        });
    }
    Ok((scenarios, demos))
}

pub fn write_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(truth)?;
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_membership() {
        let c = Corridor {
            waypoints: vec![[0.0, 0.0], [10_000.0, 0.0], [10_000.0, 10_000.0]],
            half_width_m: 1_000.0,
            z_band_m: Some([0.0, 2_000.0]),
        };
        let s = |x, y, z| ContinuousState::new(x, y, z, 0.0);
        assert!(c.contains(&s(5_000.0, 999.0, 100.0)));
        assert!(!c.contains(&s(5_000.0, 1_001.0, 100.0)));
        assert!(c.contains(&s(10_900.0, 5_000.0, 2_000.0)));
        assert!(!c.contains(&s(10_900.0, 5_000.0, 2_001.0)));
        assert!(!c.contains(&s(-1_500.0, 0.0, 100.0)));
    }

    #[test]
    fn routes_end_at_goal() {
        let cfg = SynthConfig::default();
        for &b in &cfg.entry_bearings_rad {
            let r = cfg.route(b);
            assert_eq!(*r.last().unwrap(), [0.0, 0.0]);
            assert!(((r[0][0]).hypot(r[0][1]) - 40_000.0).abs() < 1e-6);
        }
    }
}
