use super::{ara_star, PlanOutcome, PlannerConfig, Query};
use crate::costs::{CostModel, ObstacleTrack, RoutingCost, SeparationCost};
use crate::geo::ContinuousState;
use crate::par::{self, Execution};

/// One airplane to be planned, in arrival order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub start: ContinuousState,
    pub goal: ContinuousState,
    pub t_start: f64,
}

impl From<&Arrival> for Query {
    fn from(a: &Arrival) -> Self {
        Query::new(a.start, a.goal).at(a.t_start)
    }
}

/// Plans arrivals one after another. Every successful plan becomes a moving
/// obstacle, priced by `separation`, for all later arrivals.
pub fn plan_sequence(
    arrivals: &[Arrival],
    routing: &dyn RoutingCost,
    separation: &SeparationCost,
    cfg: &PlannerConfig,
) -> Vec<PlanOutcome> {
    debug_assert!(arrivals.windows(2).all(|w| w[0].t_start <= w[1].t_start));
    let mut obstacles: Vec<ObstacleTrack> = Vec::new();
    let mut out = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        let model = CostModel::with_separation(routing, separation, &obstacles, cfg.fine);
        let outcome = ara_star(&a.into(), &model, cfg);
        if let Some(plan) = outcome.plan() {
            obstacles.push(ObstacleTrack::new(plan.t_start, plan.dt, &plan.states, &cfg.fine));
        }
        out.push(outcome);
    }
    out
}

/// Plans independent queries against one shared cost model.
pub fn plan_batch(
    queries: &[Query],
    model: &CostModel<'_>,
    cfg: &PlannerConfig,
    exec: Execution,
) -> Vec<PlanOutcome> {
    par::map(exec, queries, |_, q| ara_star(q, model, cfg))
}
