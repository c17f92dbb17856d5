//! Flat experiment configuration.
//!
//! Files are `key = value` lines with unit-suffixed keys. Every key is
//! optional and unknown keys are rejected.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::costs::{RoutingCostField, SeparationCost, StateNoise};
use crate::data::{SynthConfig, TransitConfig};
use crate::dubins::AirplaneLimits;
use crate::error::{Error, Result};
use crate::geo::{ContinuousState, EnuOrigin};
use crate::irl::TrainingConfig;
use crate::lattice::{ControlSet, GoalHalfWidths, Resolution};
use crate::par::Execution;
use crate::planner::{Budget, PlannerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub parallel: bool,

    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub origin_alt_m: f64,

    pub resolution_x_m: f64,
    pub resolution_y_m: f64,
    pub resolution_z_m: f64,
    pub resolution_phi_rad: f64,
    pub cost_resolution_x_m: f64,
    pub cost_resolution_y_m: f64,
    pub cost_resolution_z_m: f64,
    pub cost_resolution_phi_rad: f64,
    pub default_routing_weight: f64,

    pub speed_m_s: f64,
    pub climb_rate_m_s: f64,
    pub turn_rate_rad_s: f64,
    /// Extra turn rate in both directions; 0 disables it.
    pub aux_turn_rate_rad_s: f64,
    pub dt_s: f64,

    pub goal_half_x_m: f64,
    pub goal_half_y_m: f64,
    pub goal_half_z_m: f64,
    pub goal_half_phi_rad: f64,

    pub eps_start: f64,
    pub eps_step: f64,
    pub eps_final: f64,
    /// Expansion budget per search. When zero, the wall-clock budget applies.
    pub budget_expansions: u64,
    pub budget_wall_clock_s: f64,
    pub bbox_margin_xy_m: f64,
    pub bbox_margin_z_m: f64,

    pub separation_u: f64,
    pub separation_v_xy_cells: f64,
    pub separation_v_z_cells: f64,

    pub epochs: usize,
    /// Zero means unlimited.
    pub max_steps: usize,
    pub alpha_routing: f64,
    pub alpha_separation: f64,
    pub clip: f64,
    pub warmup_steps: usize,
    pub noise_x_m: f64,
    pub noise_y_m: f64,
    pub noise_z_m: f64,
    pub checkpoint_every: usize,
    pub shuffle: bool,

    pub synth_demos: usize,
    pub synth_scenes: usize,
    pub goal_x_m: f64,
    pub goal_y_m: f64,
    pub goal_z_m: f64,
    pub goal_phi_rad: f64,
    pub entry_radius_m: f64,
    pub entry_bearings_rad: Vec<f64>,
    pub final_fix_m: f64,
    pub descent_steps: u32,
    pub corridor_half_width_m: f64,
    pub corridor_inside_cost: f64,
    pub corridor_outside_cost: f64,
    pub jitter_xy_m: f64,
    pub jitter_heading_rad: f64,
    pub synth_retries: u32,
    pub spacing_s: f64,
    pub truth_separation_u: f64,
    pub truth_separation_v_xy_cells: f64,
    pub truth_separation_v_z_cells: f64,

    pub transit_altitude_m: f64,
    pub transit_lane_length_m: f64,
    pub transit_half_width_m: f64,
    pub transit_band_half_height_m: f64,
    pub transit_outside_cost: f64,
    pub transit_trail_delay_s: f64,
    pub transit_jitter_xy_m: f64,

    /// Window of the smoothed training series.
    pub metrics_window: usize,
}

impl Default for Config {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        let training = TrainingConfig::default();
        let synth = SynthConfig::default();
        let sep = SeparationCost::default();
        let cost = RoutingCostField::default();
        let res = cost.resolution();
        let transit = TransitConfig::default();
        Self {
            seed: 0,
            parallel: true,
            origin_lat_deg: synth.origin.lat_deg,
            origin_lon_deg: synth.origin.lon_deg,
            origin_alt_m: synth.origin.alt_m,
            resolution_x_m: planner.fine.x,
            resolution_y_m: planner.fine.y,
            resolution_z_m: planner.fine.z,
            resolution_phi_rad: planner.fine.phi,
            cost_resolution_x_m: res.x,
            cost_resolution_y_m: res.y,
            cost_resolution_z_m: res.z,
            cost_resolution_phi_rad: res.phi,
            default_routing_weight: cost.default_weight(),
            speed_m_s: planner.limits.speed,
            climb_rate_m_s: planner.limits.climb_rate,
            turn_rate_rad_s: planner.limits.turn_rate,
            aux_turn_rate_rad_s: 0.0025,
            dt_s: planner.dt,
            goal_half_x_m: planner.goal.x,
            goal_half_y_m: planner.goal.y,
            goal_half_z_m: planner.goal.z,
            goal_half_phi_rad: planner.goal.phi,
            eps_start: planner.eps_start,
            eps_step: planner.eps_step,
            eps_final: planner.eps_final,
            budget_expansions: 0,
            budget_wall_clock_s: 30.0,
            bbox_margin_xy_m: planner.bbox_margin_xy,
            bbox_margin_z_m: planner.bbox_margin_z,
            separation_u: sep.u,
            separation_v_xy_cells: sep.v_xy,
            separation_v_z_cells: sep.v_z,
            epochs: training.epochs,
            max_steps: 0,
            alpha_routing: training.alpha_routing,
            alpha_separation: training.alpha_separation,
            clip: training.clip,
            warmup_steps: training.warmup_steps,
            noise_x_m: training.noise.x,
            noise_y_m: training.noise.y,
            noise_z_m: training.noise.z,
            checkpoint_every: training.checkpoint_every,
            shuffle: training.shuffle,
            synth_demos: 200,
            synth_scenes: 100,
            goal_x_m: synth.goal.x,
            goal_y_m: synth.goal.y,
            goal_z_m: synth.goal.z,
            goal_phi_rad: synth.goal.phi,
            entry_radius_m: synth.entry_radius_m,
            entry_bearings_rad: synth.entry_bearings_rad,
            final_fix_m: synth.final_fix_m,
            descent_steps: synth.descent_steps,
            corridor_half_width_m: synth.corridor_half_width_m,
            corridor_inside_cost: synth.inside_cost,
            corridor_outside_cost: synth.outside_cost,
            jitter_xy_m: synth.jitter_xy_m,
            jitter_heading_rad: synth.jitter_heading_rad,
            synth_retries: synth.max_retries,
            spacing_s: synth.spacing_s,
            truth_separation_u: 1.0,
            truth_separation_v_xy_cells: 40.0,
            truth_separation_v_z_cells: 20.0,
            transit_altitude_m: transit.altitude_m,
            transit_lane_length_m: transit.lane_length_m,
            transit_half_width_m: transit.half_width_m,
            transit_band_half_height_m: transit.band_half_height_m,
            transit_outside_cost: transit.outside_cost,
            transit_trail_delay_s: transit.trail_delay_s,
            transit_jitter_xy_m: transit.jitter_xy_m,
            metrics_window: 50,
        }
    }
}

/// Parses a single override value as a TOML value, falling back to a bare
/// string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

impl Config {
    /// Parses configuration text, then applies `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {}", e.message())))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override `{o}` is not key=value")))?;
            table.insert(k.trim().to_owned(), parse_value(v.trim()));
        }
        let cfg: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration file; `None` uses the defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.planner().validate()?;
        self.training().validate()?;
        self.synth().validate()?;
        self.cost_resolution().validate()?;
        if self.metrics_window == 0 {
            return Err(Error::invalid("metrics_window must be at least 1"));
        }
        if !(self.budget_expansions > 0 || self.budget_wall_clock_s > 0.0) {
            return Err(Error::invalid("a planner budget is required"));
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn origin(&self) -> EnuOrigin {
        EnuOrigin {
            lat_deg: self.origin_lat_deg,
            lon_deg: self.origin_lon_deg,
            alt_m: self.origin_alt_m,
        }
    }

    pub fn fine(&self) -> Resolution {
        Resolution::new(self.resolution_x_m, self.resolution_y_m, self.resolution_z_m, self.resolution_phi_rad)
    }

    pub fn cost_resolution(&self) -> Resolution {
        Resolution::new(
            self.cost_resolution_x_m,
            self.cost_resolution_y_m,
            self.cost_resolution_z_m,
            self.cost_resolution_phi_rad,
        )
    }

    pub fn goal(&self) -> ContinuousState {
        ContinuousState::new(self.goal_x_m, self.goal_y_m, self.goal_z_m, self.goal_phi_rad)
    }

    pub fn initial_field(&self) -> RoutingCostField {
        RoutingCostField::new(self.cost_resolution(), self.default_routing_weight)
    }

    pub fn separation(&self) -> SeparationCost {
        SeparationCost::new(self.separation_u, self.separation_v_xy_cells, self.separation_v_z_cells)
    }

    pub fn truth_separation(&self) -> SeparationCost {
        SeparationCost::new(
            self.truth_separation_u,
            self.truth_separation_v_xy_cells,
            self.truth_separation_v_z_cells,
        )
    }

    pub fn planner(&self) -> PlannerConfig {
        let limits = AirplaneLimits {
            speed: self.speed_m_s,
            climb_rate: self.climb_rate_m_s,
            turn_rate: self.turn_rate_rad_s,
        };
        let controls = if self.aux_turn_rate_rad_s > 0.0 {
            ControlSet::with_aux_turn(&limits, self.aux_turn_rate_rad_s)
        } else {
            ControlSet::symmetric(&limits)
        };
        let budget = if self.budget_expansions > 0 {
            Budget::Expansions(self.budget_expansions)
        } else {
            Budget::WallClock(Duration::from_secs_f64(self.budget_wall_clock_s.max(0.0)))
        };
        PlannerConfig {
            eps_start: self.eps_start,
            eps_step: self.eps_step,
            eps_final: self.eps_final,
            budget,
            dt: self.dt_s,
            goal: GoalHalfWidths {
                x: self.goal_half_x_m,
                y: self.goal_half_y_m,
                z: self.goal_half_z_m,
                phi: self.goal_half_phi_rad,
            },
            limits,
            controls,
            fine: self.fine(),
            bbox_margin_xy: self.bbox_margin_xy_m,
            bbox_margin_z: self.bbox_margin_z_m,
        }
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            max_steps: (self.max_steps > 0).then_some(self.max_steps),
            alpha_routing: self.alpha_routing,
            alpha_separation: self.alpha_separation,
            clip: self.clip,
            warmup_steps: self.warmup_steps,
            noise: StateNoise {
                x: self.noise_x_m,
                y: self.noise_y_m,
                z: self.noise_z_m,
            },
            checkpoint_every: self.checkpoint_every,
            shuffle: self.shuffle,
            seed: self.seed,
            planner: self.planner(),
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            origin: self.origin(),
            goal: self.goal(),
            entry_radius_m: self.entry_radius_m,
            entry_bearings_rad: self.entry_bearings_rad.clone(),
            final_fix_m: self.final_fix_m,
            descent_steps: self.descent_steps,
            corridor_half_width_m: self.corridor_half_width_m,
            inside_cost: self.corridor_inside_cost,
            outside_cost: self.corridor_outside_cost,
            jitter_xy_m: self.jitter_xy_m,
            jitter_heading_rad: self.jitter_heading_rad,
            max_retries: self.synth_retries,
            spacing_s: self.spacing_s,
            ..SynthConfig::default()
        }
    }

    pub fn transit(&self) -> TransitConfig {
        TransitConfig {
            origin: self.origin(),
            altitude_m: self.transit_altitude_m,
            lane_length_m: self.transit_lane_length_m,
            half_width_m: self.transit_half_width_m,
            band_half_height_m: self.transit_band_half_height_m,
            outside_cost: self.transit_outside_cost,
            trail_delay_s: self.transit_trail_delay_s,
            jitter_xy_m: self.transit_jitter_xy_m,
            ..TransitConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = Config::parse("", &[]).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.planner(), PlannerConfig::default());
        assert_eq!(c.synth(), SynthConfig::default());
        assert_eq!(c.transit(), TransitConfig::default());
        let t = c.training();
        let d = TrainingConfig::default();
        assert_eq!((t.alpha_routing, t.clip, t.warmup_steps, t.noise), (d.alpha_routing, d.clip, d.warmup_steps, d.noise));
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = Config::parse("seed = 3\nresolution_x_m = 100.0\n", &["seed=7".into(), "budget_expansions = 500".into()])
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.fine().x, 100.0);
        assert_eq!(c.planner().budget, Budget::Expansions(500));
        assert!(Config::parse("resolution_x = 1.0", &[]).is_err());
        assert!(Config::parse("", &["seed".into()]).is_err());
        assert!(Config::parse("", &["dt_s=-1".into()]).is_err());
    }

    #[test]
    fn round_trips_through_text() {
        let c = Config {
            entry_bearings_rad: vec![0.25, -1.5],
            alpha_separation: 0.003,
            ..Config::default()
        };
        assert_eq!(Config::parse(&c.to_toml(), &[]).unwrap(), c);
    }
}
