use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use atc_ioc::config::Config;
use atc_ioc::costs::{
    read_field, read_separation, write_field, write_separation, CostModel, PathLengthOnly, RoutingCost,
    SeparationCost,
};
use atc_ioc::data::{
    ingest as ingest_traces, read_demos, read_ground_truth, read_traces, scenes_by_id, synth_routing, synth_scenes,
    write_demos, write_ground_truth, Demonstration, GroundTruth,
};
use atc_ioc::eval::{avg_min_path_diff, separation_audit, timeout_fraction, windowed_mean, MetricsReport, TimedTrack};
use atc_ioc::irl::{read_routing_trace, train_routing as train_field, write_routing_trace, write_separation_trace};
use atc_ioc::planner::{plan_batch, plan_sequence, read_plans, write_plans, PlanOutcome, Query};
use atc_ioc::Error;

use crate::Common;

pub enum Failure {
    Usage(String),
    Data(String),
    Exhausted(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Exhausted(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(m) => write!(f, "{m}"),
            Failure::Exhausted(m) => write!(f, "planner exhausted: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Loads the configuration and prepares the output directory, recording
/// the effective configuration there.
fn setup(common: &Common) -> Result<Config, Failure> {
    let cfg = Config::load(common.config.as_deref(), &common.overrides).map_err(|e| match e {
        Error::Io { .. } => Failure::Data(e.to_string()),
        other => Failure::Usage(other.to_string()),
    })?;
    fs::create_dir_all(&common.out).map_err(|e| Failure::Data(format!("{}: {e}", common.out.display())))?;
    write_text(&common.out.join("config.toml"), &cfg.to_toml())?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    write_text(path, &text)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Outcome {
    let err = |e: csv::Error| Failure::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// A cost field file, or the routing part of a ground-truth file.
fn load_routing(path: &Path) -> Result<Box<dyn RoutingCost>, Failure> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Box::new(read_ground_truth(path)?.routing))
    } else {
        Ok(Box::new(read_field(path)?))
    }
}

fn load_demos(path: &Path) -> Result<Vec<Demonstration>, Failure> {
    let demos = read_demos(path)?;
    if demos.is_empty() {
        return Err(Failure::Data(format!("{}: no demonstrations", path.display())));
    }
    Ok(demos)
}

fn query_of(d: &Demonstration) -> Query {
    Query::new(d.start(), d.goal()).at(d.t_start)
}

fn all_failed(outcomes: &[PlanOutcome]) -> bool {
    !outcomes.is_empty() && outcomes.iter().all(PlanOutcome::is_timeout)
}

pub fn ingest(common: &Common, traces: &Path) -> Outcome {
    let cfg = setup(common)?;
    let raw = read_traces(traces)?;
    let out = ingest_traces(&raw, &cfg.origin(), cfg.dt_s, cfg.execution())?;
    write_demos(&out.demos, &common.out.join("demos.csv"))?;
    write_csv(&common.out.join("ingest_report.csv"), &out.reports)?;
    write_csv(&common.out.join("rejected.csv"), &out.rejected)?;
    log::info!("{} demonstrations, {} traces rejected", out.demos.len(), out.rejected.len());
    if out.demos.is_empty() {
        return Err(Failure::Data(format!("{}: every trace was rejected", traces.display())));
    }
    Ok(())
}

pub fn synth(common: &Common) -> Outcome {
    let cfg = setup(common)?;
    let planner = cfg.planner();
    let exec = cfg.execution();
    let synth = cfg.synth();
    let truth = cfg.truth_separation();
    let routing = synth.corridor_field();
    let (scenarios, demos) = synth_routing(&routing, &synth, &planner, cfg.synth_demos, cfg.seed, exec)?;
    log::info!("{} of {} routing demonstrations planned", demos.len(), cfg.synth_demos);
    write_demos(&demos, &common.out.join("demos.csv"))?;
    write_json(&common.out.join("scenarios.json"), &scenarios)?;
    write_ground_truth(
        &GroundTruth {
            routing,
            separation: Some(truth),
        },
        &common.out.join("ground_truth.json"),
    )?;
    if cfg.synth_scenes > 0 {
        let transit = cfg.transit();
        let lanes = transit.routing();
        let (scenes, scene_demos) = synth_scenes(
            &lanes,
            &truth,
            &transit.scenes(),
            &planner,
            cfg.synth_scenes,
            cfg.synth_retries,
            cfg.seed,
            exec,
        )?;
        log::info!("{} of {} separation scenes planned", scenes.len(), cfg.synth_scenes);
        write_demos(&scene_demos, &common.out.join("scenes.csv"))?;
        write_json(&common.out.join("scene_scenarios.json"), &scenes)?;
        write_ground_truth(
            &GroundTruth {
                routing: lanes,
                separation: Some(truth),
            },
            &common.out.join("scene_ground_truth.json"),
        )?;
    }
    Ok(())
}

/// Plans every scene in arrival order against the earlier plans.
fn plan_scenes(
    demos: &[Demonstration],
    routing: &dyn RoutingCost,
    sep: &SeparationCost,
    cfg: &Config,
) -> Vec<(String, PlanOutcome)> {
    let planner = cfg.planner();
    let mut out = Vec::with_capacity(demos.len());
    for members in scenes_by_id(demos) {
        let arrivals: Vec<_> = members.iter().map(|&i| demos[i].arrival()).collect();
        let outcomes = plan_sequence(&arrivals, routing, sep, &planner);
        out.extend(members.iter().map(|&i| demos[i].id.clone()).zip(outcomes));
    }
    out
}

pub fn plan(common: &Common, demos: &Path, field: Option<&Path>, separation: Option<&Path>) -> Outcome {
    let cfg = setup(common)?;
    let demos = load_demos(demos)?;
    let routing: Box<dyn RoutingCost> = match field {
        Some(p) => load_routing(p)?,
        None => Box::new(PathLengthOnly),
    };
    let named: Vec<(String, PlanOutcome)> = match separation {
        Some(p) => plan_scenes(&demos, routing.as_ref(), &read_separation(p)?, &cfg),
        None => {
            let queries: Vec<Query> = demos.iter().map(query_of).collect();
            let outcomes = plan_batch(&queries, &CostModel::routing_only(routing.as_ref()), &cfg.planner(), cfg.execution());
            demos.iter().map(|d| d.id.clone()).zip(outcomes).collect()
        }
    };
    write_plans(&common.out.join("plans.csv"), &common.out.join("plan_summary.csv"), &named)?;
    let outcomes: Vec<PlanOutcome> = named.into_iter().map(|(_, o)| o).collect();
    if all_failed(&outcomes) {
        return Err(Failure::Exhausted(format!("all {} queries failed", outcomes.len())));
    }
    Ok(())
}

fn checkpoint_dir(common: &Common) -> Result<PathBuf, Failure> {
    let dir = common.out.join("checkpoints");
    fs::create_dir_all(&dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn train_routing(common: &Common, demos: &Path, init: Option<&Path>) -> Outcome {
    let cfg = setup(common)?;
    let demos = load_demos(demos)?;
    let field = match init {
        Some(p) => read_field(p)?,
        None => cfg.initial_field(),
    };
    let (field, trace) = train_field(&demos, field, &cfg.training())?;
    write_field(&field, &common.out.join("cost_field.csv"))?;
    write_routing_trace(&trace.steps, &common.out.join("trace.csv"))?;
    let dir = checkpoint_dir(common)?;
    for (step, f) in &trace.checkpoints {
        write_field(f, &dir.join(format!("field_{step:06}.csv")))?;
    }
    let timeouts = trace.steps.iter().filter(|s| s.timeout).count();
    log::info!("{} steps, {timeouts} timeouts, {} stored cells", trace.steps.len(), field.len());
    Ok(())
}

pub fn train_separation(common: &Common, scenes: &Path, routing: &Path, init: Option<&Path>) -> Outcome {
    let cfg = setup(common)?;
    let demos = load_demos(scenes)?;
    let routing = load_routing(routing)?;
    let sep = match init {
        Some(p) => read_separation(p)?,
        None => cfg.separation(),
    };
    let groups = scenes_by_id(&demos);
    let (sep, trace) = atc_ioc::irl::train_separation(&demos, &groups, routing.as_ref(), sep, &cfg.training())?;
    write_separation(&sep, &common.out.join("separation.csv"))?;
    write_separation_trace(&trace.steps, &common.out.join("separation_trace.csv"))?;
    let dir = checkpoint_dir(common)?;
    for (step, s) in &trace.checkpoints {
        write_separation(s, &dir.join(format!("separation_{step:06}.csv")))?;
    }
    log::info!("learned v_xy = {:.3}, v_z = {:.3}", sep.v_xy, sep.v_z);
    Ok(())
}

#[derive(Serialize)]
struct PairRow<'a> {
    demo_id: &'a str,
    status: &'a str,
    diff_cells: Option<f64>,
    diff_m: Option<f64>,
}

#[derive(Serialize)]
struct AuditRow {
    scene_id: u32,
    a: String,
    b: String,
    counted_steps: usize,
    mass: f64,
    upper_bound: f64,
    min_planar_m: f64,
    min_vertical_m: f64,
}

fn pairs_of<'a>(
    outcomes: &'a [PlanOutcome],
    demos: &'a [Demonstration],
) -> Vec<(Option<&'a [atc_ioc::ContinuousState]>, &'a [atc_ioc::ContinuousState])> {
    outcomes
        .iter()
        .zip(demos)
        .map(|(o, d)| (o.plan().map(|p| p.states.as_slice()), d.states.as_slice()))
        .collect()
}

pub fn eval(
    common: &Common,
    demos: &Path,
    field: &Path,
    trace: Option<&Path>,
    baseline: bool,
    separation: Option<&Path>,
) -> Outcome {
    let cfg = setup(common)?;
    let demos = load_demos(demos)?;
    let routing = load_routing(field)?;
    let planner = cfg.planner();
    let exec = cfg.execution();
    let fine = cfg.fine();
    let queries: Vec<Query> = demos.iter().map(query_of).collect();

    let learned = plan_batch(&queries, &CostModel::routing_only(routing.as_ref()), &planner, exec);
    let named: Vec<(String, PlanOutcome)> = demos.iter().map(|d| d.id.clone()).zip(learned.iter().cloned()).collect();
    write_plans(&common.out.join("plans.csv"), &common.out.join("plan_summary.csv"), &named)?;
    if all_failed(&learned) {
        return Err(Failure::Exhausted(format!("all {} evaluation queries failed", learned.len())));
    }
    let diff = avg_min_path_diff(&pairs_of(&learned, &demos), &fine, exec)?;

    let mut per_pair = diff.per_pair_cells.iter().zip(&diff.per_pair_m);
    let rows: Vec<PairRow<'_>> = demos
        .iter()
        .zip(&learned)
        .map(|(d, o)| match o {
            PlanOutcome::Found(_) => {
                let (c, m) = per_pair.next().expect("one value per found plan");
                PairRow {
                    demo_id: &d.id,
                    status: "found",
                    diff_cells: Some(*c),
                    diff_m: Some(*m),
                }
            }
            PlanOutcome::Timeout { .. } => PairRow {
                demo_id: &d.id,
                status: "timeout",
                diff_cells: None,
                diff_m: None,
            },
        })
        .collect();
    write_csv(&common.out.join("path_diff.csv"), &rows)?;

    let mut report = MetricsReport {
        avg_min_path_diff_cells: diff.mean_cells,
        avg_min_path_diff_m: diff.mean_m,
        path_diff_std_cells: diff.std_cells,
        pairs: diff.pairs,
        timeouts: diff.timeouts,
        timeout_fraction: diff.timeouts as f64 / demos.len() as f64,
        ..MetricsReport::default()
    };

    if baseline {
        let plain = plan_batch(&queries, &CostModel::routing_only(&PathLengthOnly), &planner, exec);
        if let Ok(b) = avg_min_path_diff(&pairs_of(&plain, &demos), &fine, exec) {
            report.baseline_avg_min_path_diff_cells = Some(b.mean_cells);
            report.baseline_avg_min_path_diff_m = Some(b.mean_m);
        }
    }

    if let Some(p) = trace {
        let steps = read_routing_trace(p)?;
        let margins: Vec<f64> = steps.iter().map(|s| s.margin).collect();
        let timeouts: Vec<bool> = steps.iter().map(|s| s.timeout).collect();
        report.margin_series = windowed_mean(&margins, cfg.metrics_window)?;
        report.timeout_series = timeout_fraction(&timeouts, cfg.metrics_window)?;
    }

    if let Some(p) = separation {
        let sep = read_separation(p)?;
        let scenes = scenes_by_id(&demos);
        let multi: Vec<Demonstration> = scenes
            .iter()
            .filter(|m| m.len() >= 2)
            .flat_map(|m| m.iter().map(|&i| demos[i].clone()))
            .collect();
        let planned = plan_scenes(&multi, routing.as_ref(), &sep, &cfg);
        let mut audit_rows = Vec::new();
        for members in scenes_by_id(&multi) {
            let plans: Vec<(&Demonstration, &atc_ioc::planner::Plan)> = members
                .iter()
                .filter_map(|&i| planned[i].1.plan().map(|p| (&multi[i], p)))
                .collect();
            if plans.len() < 2 {
                continue;
            }
            let tracks: Vec<TimedTrack<'_>> = plans
                .iter()
                .map(|(_, p)| TimedTrack {
                    t_start: p.t_start,
                    dt: p.dt,
                    states: &p.states,
                })
                .collect();
            let goal = plans[0].0.goal();
            let audit = separation_audit(&tracks, &sep, &fine, Some((&goal, &planner.goal)))?;
            report.separation_violation_mass += audit.mass;
            for pair in audit.pairs {
                report.separation_upper_bound += pair.upper_bound;
                audit_rows.push(AuditRow {
                    scene_id: plans[0].0.scene,
                    a: plans[pair.a].0.id.clone(),
                    b: plans[pair.b].0.id.clone(),
                    counted_steps: pair.counted_steps,
                    mass: pair.mass,
                    upper_bound: pair.upper_bound,
                    min_planar_m: pair.min_planar_m,
                    min_vertical_m: pair.min_vertical_m,
                });
            }
        }
        write_csv(&common.out.join("separation_audit.csv"), &audit_rows)?;
    }

    write_json(&common.out.join("metrics.json"), &report)
}

#[derive(Serialize)]
struct MarginRow {
    step: usize,
    margin: f64,
    timeout: bool,
}

#[derive(Serialize)]
struct WindowRow {
    window: usize,
    first_step: usize,
    mean_margin: f64,
    timeout_fraction: f64,
}

#[derive(Serialize)]
struct PointRow<'a> {
    source: &'a str,
    id: &'a str,
    t_s: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    phi_rad: f64,
}

#[derive(Serialize)]
struct Series<'a> {
    window: usize,
    margin: Vec<f64>,
    margin_window_mean: Vec<f64>,
    timeout_fraction: Vec<f64>,
    trajectories: Vec<TrajectorySeries<'a>>,
}

#[derive(Serialize)]
struct TrajectorySeries<'a> {
    source: &'a str,
    id: &'a str,
    t_s: Vec<f64>,
    x_m: Vec<f64>,
    y_m: Vec<f64>,
    z_m: Vec<f64>,
}

pub fn export(common: &Common, trace: Option<&Path>, plans: Option<&Path>, demos: Option<&Path>) -> Outcome {
    let cfg = setup(common)?;
    if trace.is_none() && plans.is_none() && demos.is_none() {
        return Err(Failure::Usage("nothing to export; pass --trace, --plans or --demos".into()));
    }
    let window = cfg.metrics_window;
    let mut series = Series {
        window,
        margin: Vec::new(),
        margin_window_mean: Vec::new(),
        timeout_fraction: Vec::new(),
        trajectories: Vec::new(),
    };
    if let Some(p) = trace {
        let steps = read_routing_trace(p)?;
        series.margin = steps.iter().map(|s| s.margin).collect();
        let timeouts: Vec<bool> = steps.iter().map(|s| s.timeout).collect();
        series.margin_window_mean = windowed_mean(&series.margin, window)?;
        series.timeout_fraction = timeout_fraction(&timeouts, window)?;
        let rows: Vec<MarginRow> = steps
            .iter()
            .map(|s| MarginRow {
                step: s.step,
                margin: s.margin,
                timeout: s.timeout,
            })
            .collect();
        write_csv(&common.out.join("margin.csv"), &rows)?;
        let windows: Vec<WindowRow> = series
            .margin_window_mean
            .iter()
            .zip(&series.timeout_fraction)
            .enumerate()
            .map(|(w, (m, t))| WindowRow {
                window: w,
                first_step: w * window,
                mean_margin: *m,
                timeout_fraction: *t,
            })
            .collect();
        write_csv(&common.out.join("windows.csv"), &windows)?;
    }

    let tracks = match plans {
        Some(p) => read_plans(p)?,
        None => Vec::new(),
    };
    let demos = match demos {
        Some(p) => read_demos(p)?,
        None => Vec::new(),
    };
    let mut points = Vec::new();
    for t in &tracks {
        series.trajectories.push(TrajectorySeries {
            source: "plan",
            id: &t.id,
            t_s: t.times.clone(),
            x_m: t.states.iter().map(|s| s.x).collect(),
            y_m: t.states.iter().map(|s| s.y).collect(),
            z_m: t.states.iter().map(|s| s.z).collect(),
        });
        for (time, s) in t.times.iter().zip(&t.states) {
            points.push(PointRow {
                source: "plan",
                id: &t.id,
                t_s: *time,
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                phi_rad: s.phi,
            });
        }
    }
    for d in &demos {
        series.trajectories.push(TrajectorySeries {
            source: "demo",
            id: &d.id,
            t_s: (0..d.states.len()).map(|k| d.time_at(k)).collect(),
            x_m: d.states.iter().map(|s| s.x).collect(),
            y_m: d.states.iter().map(|s| s.y).collect(),
            z_m: d.states.iter().map(|s| s.z).collect(),
        });
        for (k, s) in d.states.iter().enumerate() {
            points.push(PointRow {
                source: "demo",
                id: &d.id,
                t_s: d.time_at(k),
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                phi_rad: s.phi,
            });
        }
    }
    if !points.is_empty() {
        write_csv(&common.out.join("trajectories.csv"), &points)?;
    }
    write_json(&common.out.join("series.json"), &series)
}
