//! Plan record streams: one row per state plus a per-plan summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PlanOutcome;
use crate::error::{Error, Result};
use crate::geo::ContinuousState;

/// One plan state. The controls are those applied when leaving the state
/// and are empty on the final row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub plan_id: String,
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub phi_rad: f64,
    pub u_phi_rad_s: Option<f64>,
    pub u_z_m_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub plan_id: String,
    pub status: String,
    pub cost: Option<f64>,
    pub eps_achieved: Option<f64>,
    pub expansions: u64,
    pub t_start_s: Option<f64>,
    pub n_states: usize,
    pub path_length_m: Option<f64>,
}

/// A time-stamped state sequence read back from a plan stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: String,
    pub times: Vec<f64>,
    pub states: Vec<ContinuousState>,
}

fn summary(id: &str, outcome: &PlanOutcome) -> PlanSummary {
    match outcome {
        PlanOutcome::Found(p) => PlanSummary {
            plan_id: id.to_owned(),
            status: "found".into(),
            cost: Some(p.cost),
            eps_achieved: Some(p.eps_achieved),
            expansions: p.expansions,
            t_start_s: Some(p.t_start),
            n_states: p.states.len(),
            path_length_m: Some(p.path_length()),
        },
        PlanOutcome::Timeout { expansions, exhausted } => PlanSummary {
            plan_id: id.to_owned(),
            status: if *exhausted { "exhausted" } else { "timeout" }.into(),
            cost: None,
            eps_achieved: None,
            expansions: *expansions,
            t_start_s: None,
            n_states: 0,
            path_length_m: None,
        },
    }
}

/// Writes the state stream to `plans_path` and one summary row per outcome
/// to `summary_path`.
pub fn write_plans(plans_path: &Path, summary_path: &Path, plans: &[(String, PlanOutcome)]) -> Result<()> {
    let mut rows = csv::Writer::from_path(plans_path).map_err(|e| wrap(plans_path, e))?;
    let mut sums = csv::Writer::from_path(summary_path).map_err(|e| wrap(summary_path, e))?;
    for (id, outcome) in plans {
        sums.serialize(summary(id, outcome))?;
        let Some(p) = outcome.plan() else { continue };
        for (k, s) in p.states.iter().enumerate() {
            let u = p.primitives.get(k);
            rows.serialize(PlanRecord {
                plan_id: id.clone(),
                t_s: p.time_at(k),
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                phi_rad: s.phi,
                u_phi_rad_s: u.map(|u| u.turn_rate),
                u_z_m_s: u.map(|u| u.climb_rate),
            })?;
        }
    }
    rows.flush().map_err(|e| Error::io(plans_path, e))?;
    sums.flush().map_err(|e| Error::io(summary_path, e))
}

fn wrap(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Reads a state stream back into tracks, in order of first appearance.
pub fn read_plans(path: &Path) -> Result<Vec<Track>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| wrap(path, e))?;
    let mut out: Vec<Track> = Vec::new();
    for rec in rdr.deserialize() {
        let r: PlanRecord = rec?;
        let s = ContinuousState::new(r.x_m, r.y_m, r.z_m, r.phi_rad);
        match out.last_mut() {
            Some(t) if t.id == r.plan_id => {
                t.times.push(r.t_s);
                t.states.push(s);
            }
            _ => {
                if out.iter().any(|t| t.id == r.plan_id) {
                    return Err(Error::format(path, format!("rows of plan {} are not contiguous", r.plan_id)));
                }
                out.push(Track {
                    id: r.plan_id,
                    times: vec![r.t_s],
                    states: vec![s],
                });
            }
        }
    }
    Ok(out)
}

pub fn read_plan_summary(path: &Path) -> Result<Vec<PlanSummary>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| wrap(path, e))?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}
