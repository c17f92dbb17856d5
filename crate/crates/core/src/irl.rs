//! Maximum-entropy inverse optimal control of the planner's penalties.
//!
//! Each step plans from a demonstration's endpoints with the current cost
//! and moves the parameters along the difference between learner and
//! expert feature counts. Routing weights are learned first, with
//! separation switched off; the separation thresholds are learned after,
//! with the routing cost held fixed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{
    aligned_pairs, routing_gradient_step, separation_feature_sum, separation_gradient_step, CostModel,
    ObstacleTrack, RoutingCost, RoutingCostField, SeparationCost, StateNoise,
};
use crate::data::Demonstration;
use crate::error::{Error, Result};
use crate::geo::ContinuousState;
use crate::planner::{ara_star, PlanOutcome, PlannerConfig, Query};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Passes over the demonstrations (routing) or scenes (separation).
    pub epochs: usize,
    /// Optional cap on the total number of steps.
    pub max_steps: Option<usize>,
    pub alpha_routing: f64,
    pub alpha_separation: f64,
    /// Per-component bound on the applied separation gradient.
    pub clip: f64,
    /// Routing steps that use the expert term only.
    pub warmup_steps: usize,
    pub noise: StateNoise,
    pub checkpoint_every: usize,
    /// Visit demonstrations in a fresh random order every epoch.
    pub shuffle: bool,
    pub seed: u64,
    pub planner: PlannerConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            max_steps: None,
            alpha_routing: 10.0,
            alpha_separation: 0.01,
            clip: 100.0,
            warmup_steps: 1000,
            noise: StateNoise::default(),
            checkpoint_every: 50,
            shuffle: true,
            seed: 0,
            planner: PlannerConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_routing > 0.0 && self.alpha_separation > 0.0 && self.clip > 0.0) {
            return Err(Error::invalid("step sizes and clip must be positive"));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::invalid("checkpoint interval must be positive"));
        }
        let noise = [self.noise.x, self.noise.y, self.noise.z];
        if noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise standard deviations must be non-negative"));
        }
        self.planner.validate()
    }
}

/// One routing update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingStep {
    pub step: usize,
    pub margin: f64,
    pub timeout: bool,
    pub expansions: u64,
    pub warmup: bool,
    pub demo: String,
}

/// One separation update, made for each arrival that has predecessors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationStep {
    pub step: usize,
    pub scene: u32,
    pub demo: String,
    pub timeout: bool,
    pub expansions: u64,
    pub learner_features: [f64; 2],
    pub expert_features: [f64; 2],
    pub applied: [f64; 2],
    pub v_xy: f64,
    pub v_z: f64,
}

/// Append-only training log with periodic parameter snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingTrace<S, P> {
    pub steps: Vec<S>,
    /// `(steps completed, parameters)`.
    pub checkpoints: Vec<(usize, P)>,
}

impl<S, P> Default for TrainingTrace<S, P> {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            checkpoints: Vec::new(),
        }
    }
}

impl<P> TrainingTrace<RoutingStep, P> {
    pub fn margins(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.margin).collect()
    }

    pub fn timeouts(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.timeout).collect()
    }
}

fn routing_sum(field: &RoutingCostField, states: &[ContinuousState]) -> f64 {
    states.iter().map(|s| field.routing_penalty(s)).sum()
}

/// Routing cost of the learner's states minus that of the expert's. A
/// learner without a plan counts as zero cost with no states.
pub fn margin(field: &RoutingCostField, expert: &[ContinuousState], learner: Option<&[ContinuousState]>) -> f64 {
    learner.map_or(0.0, |l| routing_sum(field, l)) - routing_sum(field, expert)
}

fn check_dt(demos: &[Demonstration], planner: &PlannerConfig) -> Result<()> {
    match demos.iter().find(|d| d.dt != planner.dt || d.states.len() < 2) {
        Some(d) => Err(Error::invalid(format!(
            "demonstration {} must have at least two states at the planner step {} s (has {} at {} s)",
            d.id,
            planner.dt,
            d.states.len(),
            d.dt
        ))),
        None => Ok(()),
    }
}

fn epoch_orders(n: usize, cfg: &TrainingConfig) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            order
        })
        .collect()
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Learns routing weights from demonstrations. Each step plans from one
/// demonstration's first state to its last with the current weights,
/// records the margin, and then lowers the weights the expert visits and
/// raises those the learner visits. During warmup, and whenever the search
/// fails, only the expert term is applied.
pub fn train_routing(
    demos: &[Demonstration],
    mut field: RoutingCostField,
    cfg: &TrainingConfig,
) -> Result<(RoutingCostField, TrainingTrace<RoutingStep, RoutingCostField>)> {
    if demos.is_empty() {
        return Err(Error::invalid("no demonstrations to train on"));
    }
    cfg.validate()?;
    check_dt(demos, &cfg.planner)?;
    let mut noise_rng = noise_rng(cfg.seed);
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let mut trace = TrainingTrace::default();
    let orders = epoch_orders(demos.len(), cfg);
    'outer: for order in orders {
        for idx in order {
            let step = trace.steps.len();
            if step >= limit {
                break 'outer;
            }
            let demo = &demos[idx];
            let query = Query::new(demo.start(), demo.goal()).at(demo.t_start);
            let outcome = ara_star(&query, &CostModel::routing_only(&field), &cfg.planner);
            let learner = outcome.plan().map(|p| p.states.as_slice());
            let m = margin(&field, &demo.states, learner);
            let warmup = step < cfg.warmup_steps;
            let learner_term = if warmup { None } else { learner };
            routing_gradient_step(
                &mut field,
                learner_term.unwrap_or(&[]),
                &demo.states,
                cfg.alpha_routing,
                &cfg.noise,
                &mut noise_rng,
            );
            trace.steps.push(RoutingStep {
                step,
                demo: demo.id.clone(),
                margin: m,
                timeout: outcome.is_timeout(),
                expansions: outcome.expansions(),
                warmup,
            });
            if (step + 1) % cfg.checkpoint_every == 0 {
                trace.checkpoints.push((step + 1, field.clone()));
            }
            log::debug!("routing step {step}: margin {m:.1}, timeout {}", outcome.is_timeout());
        }
    }
    Ok((field, trace))
}

/// Learns the separation thresholds from scenes of overlapping arrivals,
/// with the routing cost fixed. Every arrival after the first is planned
/// against the expert trajectories of the arrivals before it; the update
/// follows the difference between the learner's and the expert's pairwise
/// separation features. `scenes` holds indices into `demos` in arrival
/// order; scenes with a single arrival are skipped.
pub fn train_separation(
    demos: &[Demonstration],
    scenes: &[Vec<usize>],
    routing: &dyn RoutingCost,
    mut sep: SeparationCost,
    cfg: &TrainingConfig,
) -> Result<(SeparationCost, TrainingTrace<SeparationStep, SeparationCost>)> {
    cfg.validate()?;
    check_dt(demos, &cfg.planner)?;
    let usable: Vec<&Vec<usize>> = scenes
        .iter()
        .filter(|s| {
            if s.len() < 2 {
                log::info!("skipping scene without overlapping arrivals");
            }
            s.len() >= 2
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::invalid("no scene has two or more arrivals"));
    }
    let fine = cfg.planner.fine;
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let mut trace = TrainingTrace::default();
    let orders = epoch_orders(usable.len(), cfg);
    'outer: for order in orders {
        for si in order {
            let members = usable[si];
            let mut obstacles: Vec<ObstacleTrack> = Vec::new();
            for &di in members.iter() {
                let expert = &demos[di];
                if !obstacles.is_empty() {
                    let step = trace.steps.len();
                    if step >= limit {
                        break 'outer;
                    }
                    let model = CostModel::with_separation(routing, &sep, &obstacles, fine);
                    let query = Query::new(expert.start(), expert.goal()).at(expert.t_start);
                    let outcome = ara_star(&query, &model, &cfg.planner);
                    let pairs_of = |t0: f64, states: &[ContinuousState]| -> Vec<_> {
                        obstacles
                            .iter()
                            .flat_map(|o| aligned_pairs(t0, expert.dt, states, o, &fine))
                            .collect()
                    };
                    let learner_pairs = match &outcome {
                        PlanOutcome::Found(p) => pairs_of(p.t_start, &p.states),
                        PlanOutcome::Timeout { .. } => Vec::new(),
                    };
                    let expert_pairs = pairs_of(expert.t_start, &expert.states);
                    let lf = separation_feature_sum(&sep, &learner_pairs);
                    let ef = separation_feature_sum(&sep, &expert_pairs);
                    let update = separation_gradient_step(
                        &mut sep,
                        &learner_pairs,
                        &expert_pairs,
                        cfg.alpha_separation,
                        cfg.clip,
                    );
                    trace.steps.push(SeparationStep {
                        step,
                        scene: expert.scene,
                        demo: expert.id.clone(),
                        timeout: outcome.is_timeout(),
                        expansions: outcome.expansions(),
                        learner_features: lf,
                        expert_features: ef,
                        applied: update.applied,
                        v_xy: sep.v_xy,
                        v_z: sep.v_z,
                    });
                    if (step + 1) % cfg.checkpoint_every == 0 {
                        trace.checkpoints.push((step + 1, sep));
                    }
                }
                obstacles.push(expert.as_obstacle(&fine));
            }
        }
    }
    Ok((sep, trace))
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one `step,margin,timeout,expansions,warmup,demo` row per step.
pub fn write_routing_trace(steps: &[RoutingStep], path: &Path) -> Result<()> {
    write_rows(steps, path)
}

pub fn read_routing_trace(path: &Path) -> Result<Vec<RoutingStep>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct SeparationRow<'a> {
    step: usize,
    scene: u32,
    demo: &'a str,
    timeout: bool,
    expansions: u64,
    learner_f_xy: f64,
    learner_f_z: f64,
    expert_f_xy: f64,
    expert_f_z: f64,
    applied_xy: f64,
    applied_z: f64,
    v_xy: f64,
    v_z: f64,
}

pub fn write_separation_trace(steps: &[SeparationStep], path: &Path) -> Result<()> {
    let rows: Vec<SeparationRow<'_>> = steps
        .iter()
        .map(|s| SeparationRow {
            step: s.step,
            scene: s.scene,
            demo: &s.demo,
            timeout: s.timeout,
            expansions: s.expansions,
            learner_f_xy: s.learner_features[0],
            learner_f_z: s.learner_features[1],
            expert_f_xy: s.expert_features[0],
            expert_f_z: s.expert_features[1],
            applied_xy: s.applied[0],
            applied_z: s.applied[1],
            v_xy: s.v_xy,
            v_z: s.v_z,
        })
        .collect();
    write_rows(&rows, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Resolution;

    fn demo(id: &str, states: Vec<ContinuousState>) -> Demonstration {
        Demonstration {
            id: id.into(),
            scene: 0,
            arrival_order: 0,
            t_start: 0.0,
            dt: 30.0,
            states,
        }
    }

    #[test]
    fn warmup_pass_over_one_cell() {
        // Five states inside one coarse cell; start and goal coincide, so
        // the learner plan is trivial and ignored during warmup anyway.
        let states: Vec<_> = (0..5)
            .map(|k| ContinuousState::new(10.0 + k as f64, 20.0, 30.0, 0.01))
            .collect();
        let demos: Vec<_> = (0..3).map(|i| demo(&format!("d{i}"), states.clone())).collect();
        let cfg = TrainingConfig {
            epochs: 1,
            noise: StateNoise::NONE,
            planner: PlannerConfig::default().with_expansions(100),
            ..TrainingConfig::default()
        };
        let (field, trace) = train_routing(&demos, RoutingCostField::default(), &cfg).unwrap();
        let cell = field.cell_of(&states[0]);
        assert_eq!(field.stored(&cell), Some(-50.0));
        assert_eq!(field.eval(&cell), 0.0);
        assert_eq!(trace.steps.len(), 3);
        assert!(trace.steps.iter().all(|s| s.warmup));
    }

    #[test]
    fn margin_examples() {
        let mut f = RoutingCostField::new(Resolution::COARSE, 0.0);
        let a = ContinuousState::new(10.0, 10.0, 10.0, 0.0);
        let b = ContinuousState::new(600.0, 10.0, 10.0, 0.0);
        let c = ContinuousState::new(600.0, 600.0, 10.0, 0.0);
        f.set(f.cell_of(&a), 100.0);
        f.set(f.cell_of(&b), 200.0);
        f.set(f.cell_of(&c), 200.0);
        let expert = [a, b, a];
        assert_eq!(margin(&f, &expert, Some(&expert)), 0.0);
        assert_eq!(margin(&f, &expert, None), -400.0);
        assert_eq!(margin(&f, &expert, Some(&[a, c, c])), 500.0 - 400.0);
    }

    #[test]
    fn exact_imitation_is_a_fixed_point() {
        // The expert is the planner's own output under the current field.
        let field = RoutingCostField::new(Resolution::COARSE, 1.0);
        let planner = PlannerConfig::default().with_expansions(5_000);
        let q = Query::new(
            ContinuousState::new(-9000.0, 0.0, 600.0, 0.0),
            ContinuousState::new(0.0, 0.0, 600.0, 0.0),
        );
        let plan = ara_star(&q, &CostModel::routing_only(&field), &planner).into_plan().unwrap();
        let d = Demonstration::from_plan("e", 0, 0, &plan);
        let cfg = TrainingConfig {
            epochs: 1,
            warmup_steps: 0,
            noise: StateNoise::NONE,
            planner,
            ..TrainingConfig::default()
        };
        let (after, trace) = train_routing(&[d], field.clone(), &cfg).unwrap();
        assert_eq!(after, field);
        assert_eq!(trace.steps[0].margin, 0.0);
    }

    #[test]
    fn separation_fixed_point_and_projection() {
        let field = RoutingCostField::new(Resolution::COARSE, 1.0);
        let planner = PlannerConfig::default().with_expansions(5_000);
        let sep = SeparationCost::default();
        let arrivals = [
            crate::planner::Arrival {
                start: ContinuousState::new(-9000.0, 0.0, 600.0, 0.0),
                goal: ContinuousState::new(0.0, 0.0, 600.0, 0.0),
                t_start: 0.0,
            },
            crate::planner::Arrival {
                start: ContinuousState::new(-9000.0, 1000.0, 600.0, 0.0),
                goal: ContinuousState::new(0.0, 0.0, 600.0, 0.0),
                t_start: 30.0,
            },
        ];
        let outcomes = crate::planner::plan_sequence(&arrivals, &field, &sep, &planner);
        let demos: Vec<_> = outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| Demonstration::from_plan(format!("a{k}"), 0, k as u32, o.plan().unwrap()))
            .collect();
        let cfg = TrainingConfig {
            epochs: 2,
            planner,
            ..TrainingConfig::default()
        };
        let (learned, trace) = train_separation(&demos, &[vec![0, 1]], &field, sep, &cfg).unwrap();
        assert_eq!(learned, sep);
        assert_eq!(trace.steps.len(), 2);
        assert!(trace.steps.iter().all(|s| s.applied == [0.0, 0.0]));
        assert!(train_separation(&demos, &[vec![0]], &field, sep, &cfg).is_err());
    }
}
