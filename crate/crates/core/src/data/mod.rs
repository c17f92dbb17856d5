//! Demonstrations: ingestion of recorded traces, synthetic expert
//! generation and the on-disk record format.

mod ingest;
mod synth;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ingest::{ingest, read_traces, IngestOutput, IngestReport, RawTrace, Rejection};
pub use synth::{
    read_ground_truth, synth_routing, synth_scenes, write_ground_truth, Corridor, CorridorField,
    GroundTruth, Scenario, ScenarioArrival, SceneConfig, SceneTemplate, SynthConfig, TransitConfig,
};

use crate::costs::ObstacleTrack;
use crate::error::{Error, Result};
use crate::geo::ContinuousState;
use crate::lattice::Resolution;
use crate::planner::{Arrival, Plan};

/// A demonstrated arrival resampled on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    /// Group of time-overlapping arrivals this one belongs to.
    pub scene: u32,
    /// Position in the landing order within the scene.
    pub arrival_order: u32,
    /// Time of `states[0]`, seconds.
    pub t_start: f64,
    pub dt: f64,
    pub states: Vec<ContinuousState>,
}

impl Demonstration {
    pub fn start(&self) -> ContinuousState {
        self.states[0]
    }

    pub fn goal(&self) -> ContinuousState {
        *self.states.last().expect("demonstrations are non-empty")
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.states.len().saturating_sub(1))
    }

    pub fn arrival(&self) -> Arrival {
        Arrival {
            start: self.start(),
            goal: self.goal(),
            t_start: self.t_start,
        }
    }

    pub fn as_obstacle(&self, fine: &Resolution) -> ObstacleTrack {
        ObstacleTrack::new(self.t_start, self.dt, &self.states, fine)
    }

    pub fn from_plan(id: impl Into<String>, scene: u32, arrival_order: u32, plan: &Plan) -> Self {
        Self {
            id: id.into(),
            scene,
            arrival_order,
            t_start: plan.t_start,
            dt: plan.dt,
            states: plan.states.clone(),
        }
    }
}

/// Groups demonstrations into scenes of transitively time-overlapping
/// arrivals, each sorted by start time. Returns indices into `demos`;
/// scenes are ordered by their earliest start.
pub fn overlap_scenes(demos: &[Demonstration]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..demos.len()).collect();
    order.sort_by(|&a, &b| {
        demos[a]
            .t_start
            .total_cmp(&demos[b].t_start)
            .then_with(|| demos[a].id.cmp(&demos[b].id))
    });
    let mut scenes: Vec<Vec<usize>> = Vec::new();
    let mut horizon = f64::NEG_INFINITY;
    for i in order {
        let d = &demos[i];
        match scenes.last_mut() {
            Some(scene) if d.t_start <= horizon => scene.push(i),
            _ => scenes.push(vec![i]),
        }
        horizon = horizon.max(d.end_time());
    }
    scenes
}

/// Scenes as stored in the `scene` field, ordered by scene id, each sorted
/// by arrival order.
pub fn scenes_by_id(demos: &[Demonstration]) -> Vec<Vec<usize>> {
    let mut ids: Vec<u32> = demos.iter().map(|d| d.scene).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&s| {
            let mut members: Vec<usize> = (0..demos.len()).filter(|&i| demos[i].scene == s).collect();
            members.sort_by_key(|&i| (demos[i].arrival_order, i));
            members
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct DemoRow {
    demo_id: String,
    scene_id: u32,
    arrival_order: u32,
    t_s: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    phi_rad: f64,
}

const DEMO_MAGIC: &str = "# atc-ioc demonstrations v1";

/// Writes demonstrations as one row per state. The header records the
/// common time step.
pub fn write_demos(demos: &[Demonstration], path: &Path) -> Result<()> {
    let dt = demos.first().map_or(0.0, |d| d.dt);
    if demos.iter().any(|d| d.dt != dt) {
        return Err(Error::invalid("demonstrations in one file must share dt"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for d in demos {
        for (k, s) in d.states.iter().enumerate() {
            w.serialize(DemoRow {
                demo_id: d.id.clone(),
                scene_id: d.scene,
                arrival_order: d.arrival_order,
                t_s: d.time_at(k),
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                phi_rad: s.phi,
            })?;
        }
    }
    let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    let mut out = format!("{DEMO_MAGIC}\n# units: seconds, meters, radians\n# dt_s={dt}\n").into_bytes();
    if demos.is_empty() {
        out.extend_from_slice(b"demo_id,scene_id,arrival_order,t_s,x_m,y_m,z_m,phi_rad\n");
    }
    out.extend_from_slice(&body);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_demos(path: &Path) -> Result<Vec<Demonstration>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if !text.starts_with(DEMO_MAGIC) {
        return Err(Error::format(path, "not a demonstrations file"));
    }
    let dt: f64 = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# dt_s="))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::format(path, "missing dt_s header"))?;
    let body: String = text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut out: Vec<Demonstration> = Vec::new();
    for row in rdr.deserialize() {
        let r: DemoRow = row?;
        let s = ContinuousState::new(r.x_m, r.y_m, r.z_m, r.phi_rad);
        match out.last_mut() {
            Some(d) if d.id == r.demo_id => {
                let expect = d.time_at(d.states.len());
                if (r.t_s - expect).abs() > 1e-6 * dt.max(1.0) {
                    return Err(Error::format(
                        path,
                        format!("demo {} is not uniformly sampled at t = {}", r.demo_id, r.t_s),
                    ));
                }
                d.states.push(s);
            }
            _ => out.push(Demonstration {
                id: r.demo_id,
                scene: r.scene_id,
                arrival_order: r.arrival_order,
                t_start: r.t_s,
                dt,
                states: vec![s],
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo(id: &str, t_start: f64, n: usize) -> Demonstration {
        Demonstration {
            id: id.into(),
            scene: 0,
            arrival_order: 0,
            t_start,
            dt: 30.0,
            states: (0..n)
                .map(|k| ContinuousState::new(k as f64 * 3000.0 + 0.1, -7.25, 1000.0 / 3.0, 0.2))
                .collect(),
        }
    }

    #[test]
    fn demos_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.csv");
        let mut a = demo("a", 60.0, 4);
        a.scene = 3;
        a.arrival_order = 1;
        let ds = vec![a, demo("b", 1.5e9, 3)];
        write_demos(&ds, &path).unwrap();
        assert_eq!(read_demos(&path).unwrap(), ds);
    }

    #[test]
    fn overlapping_scenes() {
        // a overlaps b, b overlaps c, d is alone.
        let ds = vec![
            demo("c", 130.0, 3),
            demo("a", 0.0, 4),
            demo("d", 1000.0, 2),
            demo("b", 80.0, 3),
        ];
        assert_eq!(overlap_scenes(&ds), vec![vec![1, 3, 0], vec![2]]);
    }
}
