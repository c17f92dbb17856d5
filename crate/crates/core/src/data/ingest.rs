use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Demonstration;
use crate::error::{Error, Result};
use crate::geo::{wgs84_to_enu, ContinuousState, EnuOrigin, GeodeticFix};
use crate::par::{self, Execution};
use crate::spline::{headings, TrackSpline};

pub const MIN_FIXES: usize = 4;

/// Raw fixes of one flight, in recorded order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrace {
    pub id: String,
    pub fixes: Vec<GeodeticFix>,
}

impl RawTrace {
    pub fn validate(&self) -> Result<()> {
        if self.fixes.len() < MIN_FIXES {
            return Err(Error::TooFewFixes {
                id: self.id.clone(),
                count: self.fixes.len(),
                min: MIN_FIXES,
            });
        }
        if let Some(w) = self.fixes.windows(2).find(|w| w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::NonMonotonicTime {
                id: self.id.clone(),
                t: w[1].t,
            });
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct TraceRow {
    flight_id: String,
    t_unix_s: f64,
    lat_deg: f64,
    lon_deg: f64,
    alt_m: f64,
}

/// Reads `flight_id,t_unix_s,lat_deg,lon_deg,alt_m` rows. Rows of a flight
/// need not be contiguous; flights keep their order of first appearance.
pub fn read_traces(path: &Path) -> Result<Vec<RawTrace>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
    let mut traces: Vec<RawTrace> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for row in rdr.deserialize() {
        let r: TraceRow = row?;
        let fix = GeodeticFix {
            t: r.t_unix_s,
            lat_deg: r.lat_deg,
            lon_deg: r.lon_deg,
            alt_m: r.alt_m,
        };
        let slot = *index.entry(r.flight_id.clone()).or_insert_with(|| {
            traces.push(RawTrace {
                id: r.flight_id,
                fixes: Vec::new(),
            });
            traces.len() - 1
        });
        traces[slot].fixes.push(fix);
    }
    Ok(traces)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}

/// Per-demonstration diagnostics. Recorded traces do not fly at constant
/// speed, which the planner assumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub id: String,
    pub fixes: usize,
    pub samples: usize,
    pub mean_speed_m_s: f64,
    pub max_speed_m_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestOutput {
    pub demos: Vec<Demonstration>,
    pub reports: Vec<IngestReport>,
    pub rejected: Vec<Rejection>,
}

fn ingest_one(trace: &RawTrace, origin: &EnuOrigin, dt: f64) -> Result<(Demonstration, IngestReport)> {
    trace.validate()?;
    let t0 = trace.fixes[0].t;
    let t_last = trace.fixes[trace.fixes.len() - 1].t;
    let mut rel = Vec::with_capacity(trace.fixes.len());
    let mut pts = Vec::with_capacity(trace.fixes.len());
    for f in &trace.fixes {
        rel.push(f.t - t0);
        pts.push(wgs84_to_enu(f, origin)?);
    }
    let spline = TrackSpline::new(&rel, &pts)?;

    // Samples sit on the global grid of multiples of dt.
    let first = (t0 / dt).ceil();
    let last = (t_last / dt).floor();
    if last - first < 1.0 {
        return Err(Error::invalid(format!(
            "trace {} spans less than two samples at dt = {dt}",
            trace.id
        )));
    }
    let n = (last - first) as usize + 1;
    let t_start = first * dt;
    let samples: Vec<[f64; 3]> = (0..n)
        .map(|k| spline.eval(t_start + k as f64 * dt - t0))
        .collect();
    let phi = headings(&samples).map_err(|_| {
        Error::invalid(format!("trace {} never moves horizontally", trace.id))
    })?;
    let states: Vec<ContinuousState> = samples
        .iter()
        .zip(&phi)
        .map(|(p, &h)| ContinuousState::new(p[0], p[1], p[2], h))
        .collect();

    let speeds: Vec<f64> = states.windows(2).map(|w| w[0].planar_distance(&w[1]) / dt).collect();
    let report = IngestReport {
        id: trace.id.clone(),
        fixes: trace.fixes.len(),
        samples: n,
        mean_speed_m_s: speeds.iter().sum::<f64>() / speeds.len() as f64,
        max_speed_m_s: speeds.iter().copied().fold(0.0, f64::max),
    };
    let demo = Demonstration {
        id: trace.id.clone(),
        scene: 0,
        arrival_order: 0,
        t_start,
        dt,
        states,
    };
    Ok((demo, report))
}

/// Converts traces into demonstrations: ENU conversion, one interpolating
/// spline per axis, resampling on the multiples of `dt` covered by the
/// trace, and bearings from consecutive samples. Invalid traces are
/// rejected individually. Scenes and arrival orders are assigned from time
/// overlap.
pub fn ingest(traces: &[RawTrace], origin: &EnuOrigin, dt: f64, exec: Execution) -> Result<IngestOutput> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let results = par::map(exec, traces, |_, t| ingest_one(t, origin, dt));
    let mut out = IngestOutput::default();
    for (trace, r) in traces.iter().zip(results) {
        match r {
            Ok((d, rep)) => {
                out.demos.push(d);
                out.reports.push(rep);
            }
            Err(e) => {
                log::warn!("rejected trace {}: {e}", trace.id);
                out.rejected.push(Rejection {
                    id: trace.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    for (scene, members) in super::overlap_scenes(&out.demos).into_iter().enumerate() {
        for (order, i) in members.into_iter().enumerate() {
            out.demos[i].scene = scene as u32;
            out.demos[i].arrival_order = order as u32;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(id: &str, fixes: &[(f64, f64, f64, f64)]) -> RawTrace {
        RawTrace {
            id: id.into(),
            fixes: fixes
                .iter()
                .map(|&(t, lat, lon, alt)| GeodeticFix {
                    t,
                    lat_deg: lat,
                    lon_deg: lon,
                    alt_m: alt,
                })
                .collect(),
        }
    }

    #[test]
    fn rejects_short_and_unordered_traces() {
        let o = EnuOrigin::SEA;
        let short = trace("short", &[(0.0, 47.0, -122.0, 0.0); 3]);
        let unordered = trace(
            "unordered",
            &[(0.0, 47.0, -122.0, 0.0), (30.0, 47.1, -122.0, 0.0), (20.0, 47.2, -122.0, 0.0), (90.0, 47.3, -122.0, 0.0)],
        );
        let out = ingest(&[short, unordered], &o, 30.0, Execution::Sequential).unwrap();
        assert!(out.demos.is_empty());
        assert_eq!(out.rejected.len(), 2);
        assert!(out.rejected[0].reason.contains("short"));
        assert!(out.rejected[1].reason.contains("unordered"));
    }

    #[test]
    fn samples_on_global_grid() {
        let o = EnuOrigin::SEA;
        let t = trace(
            "f",
            &[
                (1_700_000_007.0, 47.40, -122.5, 3000.0),
                (1_700_000_041.0, 47.41, -122.5, 2950.0),
                (1_700_000_068.0, 47.42, -122.5, 2900.0),
                (1_700_000_099.0, 47.43, -122.5, 2850.0),
                (1_700_000_131.0, 47.44, -122.5, 2800.0),
            ],
        );
        let out = ingest(&[t], &o, 30.0, Execution::Sequential).unwrap();
        let d = &out.demos[0];
        assert_eq!(d.t_start, 1_700_000_010.0);
        assert_eq!(d.states.len(), 5);
        assert_eq!(d.end_time(), 1_700_000_130.0);
        // Heading north.
        for s in &d.states {
            assert!((s.phi - std::f64::consts::FRAC_PI_2).abs() < 0.01);
        }
        assert!(out.reports[0].mean_speed_m_s > 30.0);
    }
}
