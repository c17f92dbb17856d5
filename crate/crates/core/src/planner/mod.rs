//! Anytime repairing A* over the motion-primitive lattice, sequential
//! multi-arrival planning and spline refinement of plans.

mod ara;
mod export;
mod refine;
mod sequence;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use ara::{ara_star, Query};
pub use export::{read_plan_summary, read_plans, write_plans, PlanRecord, PlanSummary, Track};
pub use refine::refine;
pub use sequence::{plan_batch, plan_sequence, Arrival};

use crate::dubins::AirplaneLimits;
use crate::error::{Error, Result};
use crate::geo::ContinuousState;
use crate::lattice::{ControlSet, GoalHalfWidths, Primitive, Resolution};

/// Search effort limit for one query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    /// Node expansions; deterministic.
    Expansions(u64),
    /// Wall-clock time.
    WallClock(Duration),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub eps_start: f64,
    pub eps_step: f64,
    pub eps_final: f64,
    pub budget: Budget,
    /// Primitive duration, seconds.
    pub dt: f64,
    pub goal: GoalHalfWidths,
    pub limits: AirplaneLimits,
    pub controls: ControlSet,
    /// Grid used for duplicate detection and separation offsets.
    pub fine: Resolution,
    /// Horizontal inflation of the start/goal bounding box, meters.
    pub bbox_margin_xy: f64,
    /// Vertical inflation of the start/goal bounding box, meters.
    pub bbox_margin_z: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            eps_start: 3.0,
            eps_step: 0.5,
            eps_final: 1.0,
            budget: Budget::WallClock(Duration::from_secs(30)),
            dt: 30.0,
            goal: GoalHalfWidths::default(),
            limits: AirplaneLimits::default(),
            controls: ControlSet::default(),
            fine: Resolution::FINE,
            bbox_margin_xy: 50_000.0,
            bbox_margin_z: 3_000.0,
        }
    }
}

impl PlannerConfig {
    pub fn with_expansions(mut self, n: u64) -> Self {
        self.budget = Budget::Expansions(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_final >= 1.0 && self.eps_start >= self.eps_final) {
            return Err(Error::invalid(format!(
                "need eps_start >= eps_final >= 1, got {} and {}",
                self.eps_start, self.eps_final
            )));
        }
        if self.eps_step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("eps_step must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt must be positive"));
        }
        match self.budget {
            Budget::Expansions(0) => return Err(Error::invalid("expansion budget must be positive")),
            Budget::WallClock(d) if d.is_zero() => {
                return Err(Error::invalid("time budget must be positive"))
            }
            _ => {}
        }
        if !(self.bbox_margin_xy >= 0.0 && self.bbox_margin_z >= 0.0) {
            return Err(Error::invalid("bounding box margins must be non-negative"));
        }
        self.limits.validate()?;
        self.controls.validate(&self.limits)?;
        self.fine.validate()
    }
}

/// A dynamically feasible discrete trajectory ending in the goal region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// States at `t_start + k * dt`.
    pub states: Vec<ContinuousState>,
    /// `primitives[k]` takes `states[k]` to `states[k + 1]`.
    pub primitives: Vec<Primitive>,
    pub edge_lengths: Vec<f64>,
    pub cost: f64,
    /// Certified bound: `cost <= eps_achieved * optimum` on the searched graph.
    pub eps_achieved: f64,
    pub expansions: u64,
    /// `(eps, cost)` at the end of each completed search iteration.
    pub iterations: Vec<(f64, f64)>,
    pub t_start: f64,
    pub dt: f64,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn path_length(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.states.len().saturating_sub(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PlanOutcome {
    Found(Plan),
    /// No goal state was reached. `exhausted` is set when the truncated
    /// graph was fully searched rather than the budget running out.
    Timeout { expansions: u64, exhausted: bool },
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Timeout { .. } => None,
        }
    }

    pub fn into_plan(self) -> Option<Plan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            PlanOutcome::Timeout { .. } => None,
        }
    }

    pub fn is_timeout(&self) -> bool {
        matches!(self, PlanOutcome::Timeout { .. })
    }

    pub fn expansions(&self) -> u64 {
        match self {
            PlanOutcome::Found(p) => p.expansions,
            PlanOutcome::Timeout { expansions, .. } => *expansions,
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::costs::{trajectory_cost, CostModel, PathLengthOnly, RoutingCostField, SeparationCost};
    use crate::lattice::{apply_primitive, in_goal_region};

    fn cfg() -> PlannerConfig {
        PlannerConfig::default().with_expansions(20_000)
    }

    fn check_feasible(plan: &Plan, q: &Query, c: &PlannerConfig, model: &CostModel<'_>) {
        for (k, p) in plan.primitives.iter().enumerate() {
            let (next, len) = apply_primitive(&plan.states[k], p, c.limits.speed);
            assert!(next.distance(&plan.states[k + 1]) < 1e-9);
            assert_eq!(len, plan.edge_lengths[k]);
        }
        assert!(in_goal_region(plan.states.last().unwrap(), &q.goal, &c.goal));
        let recomputed = trajectory_cost(&plan.states, &plan.edge_lengths, model, plan.t_start, plan.dt);
        assert_relative_eq!(recomputed, plan.cost, max_relative = 1e-12);
        assert!(plan.cost >= plan.path_length() - 1e-9);
        for w in plan.iterations.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn straight_two_primitives() {
        let q = Query::new(
            ContinuousState::new(0.0, 0.0, 1000.0, 0.0),
            ContinuousState::new(6000.0, 0.0, 1000.0, 0.0),
        );
        let model = CostModel::routing_only(&PathLengthOnly);
        let plan = ara_star(&q, &model, &cfg()).into_plan().unwrap();
        assert_eq!(plan.states.len(), 3);
        assert_relative_eq!(plan.cost, 6000.0, max_relative = 1e-12);
        assert_eq!(plan.eps_achieved, 1.0);
        check_feasible(&plan, &q, &cfg(), &model);
    }

    #[test]
    fn start_in_goal_region() {
        let s = ContinuousState::new(10.0, -20.0, 500.0, 0.1);
        let q = Query::new(s, ContinuousState::new(0.0, 0.0, 510.0, 0.0));
        let model = CostModel::routing_only(&PathLengthOnly);
        let plan = ara_star(&q, &model, &cfg()).into_plan().unwrap();
        assert_eq!(plan.states, vec![s]);
        assert_eq!(plan.cost, 0.0);
        assert!(plan.primitives.is_empty());
    }

    #[test]
    fn turning_plans_are_feasible() {
        let field = RoutingCostField::new(crate::lattice::Resolution::COARSE, 0.5);
        let model = CostModel::routing_only(&field);
        let c = cfg();
        let goal = ContinuousState::new(0.0, 0.0, 600.0, 0.0);
        for (x, y, phi) in [(-15_000.0, 4000.0, 0.3), (-9000.0, -9000.0, 1.0), (8000.0, 3000.0, 2.5)] {
            let q = Query::new(ContinuousState::new(x, y, 600.0, phi), goal);
            match ara_star(&q, &model, &c) {
                PlanOutcome::Found(plan) => {
                    check_feasible(&plan, &q, &c, &model);
                    assert!(plan.eps_achieved >= 1.0);
                }
                PlanOutcome::Timeout { .. } => panic!("no plan from ({x}, {y})"),
            }
        }
    }

    #[test]
    fn tiny_budget_times_out() {
        let q = Query::new(
            ContinuousState::new(-30_000.0, 0.0, 1000.0, 3.0),
            ContinuousState::new(0.0, 0.0, 1000.0, 0.0),
        );
        let model = CostModel::routing_only(&PathLengthOnly);
        let out = ara_star(&q, &model, &cfg().with_expansions(5));
        assert_eq!(out, PlanOutcome::Timeout { expansions: 5, exhausted: false });
    }

    #[test]
    fn single_arrival_sequence_matches_direct_search() {
        let field = RoutingCostField::new(crate::lattice::Resolution::COARSE, 1.0);
        let arrival = Arrival {
            start: ContinuousState::new(-12_000.0, 3000.0, 600.0, 0.0),
            goal: ContinuousState::new(0.0, 0.0, 600.0, 0.0),
            t_start: 120.0,
        };
        let c = cfg();
        let seq = plan_sequence(&[arrival], &field, &SeparationCost::default(), &c);
        let direct = ara_star(&(&arrival).into(), &CostModel::routing_only(&field), &c);
        assert_eq!(seq, vec![direct]);
    }

    #[test]
    fn refine_interpolates_waypoints() {
        let q = Query::new(
            ContinuousState::new(-9000.0, 3000.0, 600.0, -0.5),
            ContinuousState::new(0.0, 0.0, 600.0, 0.0),
        );
        let model = CostModel::routing_only(&PathLengthOnly);
        let plan = ara_star(&q, &model, &cfg()).into_plan().unwrap();
        let dense = refine(&plan);
        assert_eq!(dense.len(), (plan.end_time() - plan.t_start) as usize + 1);
        for (k, s) in plan.states.iter().enumerate() {
            let r = &dense[k * plan.dt as usize];
            assert!((r.x - s.x).abs() < 1e-6 && (r.y - s.y).abs() < 1e-6 && (r.z - s.z).abs() < 1e-6);
        }
    }
}
