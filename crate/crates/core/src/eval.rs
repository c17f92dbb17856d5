//! Imitation and safety metrics.
//!
//! Reductions sort their per-item terms before summing, so results do not
//! depend on the order of the inputs down to the last bit.

use serde::{Deserialize, Serialize};

use crate::costs::{eval_separation, SeparationCost};
use crate::error::{Error, Result};
use crate::geo::ContinuousState;
use crate::lattice::{discretize, in_goal_region, GoalHalfWidths, Resolution};
use crate::par::{self, Execution};

fn stable_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = stable_sum(v.to_vec()) / n;
    let var = stable_sum(v.iter().map(|x| (x - mean).powi(2)).collect()) / n;
    (mean, var.sqrt())
}

/// Average minimum path difference over learner/expert pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathDiff {
    /// In fine-grid cells.
    pub mean_cells: f64,
    /// Population standard deviation of the per-pair values.
    pub std_cells: f64,
    /// The same metric with cell offsets scaled to meters.
    pub mean_m: f64,
    pub std_m: f64,
    pub per_pair_cells: Vec<f64>,
    pub per_pair_m: Vec<f64>,
    pub pairs: usize,
    /// Pairs whose learner has no plan; excluded from the averages.
    pub timeouts: usize,
}

fn pair_diff(learner: &[ContinuousState], expert: &[ContinuousState], fine: &Resolution) -> (f64, f64) {
    let cells = |s: &[ContinuousState]| -> Vec<[f64; 3]> {
        s.iter()
            .map(|s| {
                let g = discretize(s, fine);
                [f64::from(g.i), f64::from(g.j), f64::from(g.k)]
            })
            .collect()
    };
    let l = cells(learner);
    let e = cells(expert);
    let scale = [fine.x, fine.y, fine.z];
    let mut in_cells = Vec::with_capacity(l.len());
    let mut in_m = Vec::with_capacity(l.len());
    for a in &l {
        let mut best = f64::INFINITY;
        let mut best_m = f64::INFINITY;
        for b in &e {
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            best = best.min((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
            let m = [d[0] * scale[0], d[1] * scale[1], d[2] * scale[2]];
            best_m = best_m.min((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt());
        }
        in_cells.push(best);
        in_m.push(best_m);
    }
    let n = l.len() as f64;
    (stable_sum(in_cells) / n, stable_sum(in_m) / n)
}

/// For every learner state, the distance to the nearest expert state in
/// discretized position `(i, j, k)`, averaged over the learner's states and
/// then over pairs. A `None` learner marks a failed search.
pub fn avg_min_path_diff(
    pairs: &[(Option<&[ContinuousState]>, &[ContinuousState])],
    fine: &Resolution,
    exec: Execution,
) -> Result<PathDiff> {
    if pairs.is_empty() {
        return Err(Error::invalid("no learner/expert pairs to compare"));
    }
    if pairs.iter().any(|(l, e)| e.is_empty() || l.is_some_and(<[_]>::is_empty)) {
        return Err(Error::invalid("trajectories must be non-empty"));
    }
    let found: Vec<(&[ContinuousState], &[ContinuousState])> =
        pairs.iter().filter_map(|(l, e)| l.map(|l| (l, *e))).collect();
    let timeouts = pairs.len() - found.len();
    if found.is_empty() {
        return Err(Error::invalid("every learner timed out"));
    }
    let diffs = par::map(exec, &found, |_, (l, e)| pair_diff(l, e, fine));
    let per_pair_cells: Vec<f64> = diffs.iter().map(|d| d.0).collect();
    let per_pair_m: Vec<f64> = diffs.iter().map(|d| d.1).collect();
    let (mean_cells, std_cells) = mean_std(&per_pair_cells);
    let (mean_m, std_m) = mean_std(&per_pair_m);
    Ok(PathDiff {
        mean_cells,
        std_cells,
        mean_m,
        std_m,
        per_pair_cells,
        per_pair_m,
        pairs: found.len(),
        timeouts,
    })
}

/// Mean of consecutive non-overlapping windows; a shorter final window is
/// averaged over its own length.
pub fn windowed_mean(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    Ok(values
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect())
}

/// Windowed fraction of failed searches.
pub fn timeout_fraction(timeouts: &[bool], window: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = timeouts.iter().map(|&t| f64::from(u8::from(t))).collect();
    windowed_mean(&v, window)
}

/// A trajectory sampled every `dt` seconds from `t_start`.
#[derive(Clone, Copy, Debug)]
pub struct TimedTrack<'a> {
    pub t_start: f64,
    pub dt: f64,
    pub states: &'a [ContinuousState],
}

impl TimedTrack<'_> {
    fn index_at(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_start) / self.dt).round();
        (k >= 0.0 && (k as usize) < self.states.len()).then_some(k as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub a: usize,
    pub b: usize,
    /// Time steps at which both airplanes are airborne.
    pub shared_steps: usize,
    /// Shared steps outside the excluded goal region.
    pub counted_steps: usize,
    pub mass: f64,
    /// `counted_steps * u * v_xy * v_z`, the mass of two co-located tracks.
    pub upper_bound: f64,
    pub min_planar_m: f64,
    pub min_vertical_m: f64,
    pub min_planar_cells: f64,
    pub min_vertical_cells: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationAudit {
    pub mass: f64,
    pub pairs: Vec<PairAudit>,
}

impl SeparationAudit {
    /// Largest per-pair ratio of mass to its co-located upper bound.
    pub fn worst_ratio(&self) -> f64 {
        self.pairs
            .iter()
            .filter(|p| p.upper_bound > 0.0)
            .map(|p| p.mass / p.upper_bound)
            .fold(0.0, f64::max)
    }
}

/// Sums the separation penalty over all time-aligned state pairs of all
/// track pairs. With `exclude_goal`, steps where either airplane is inside
/// the goal region are left out.
pub fn separation_audit(
    tracks: &[TimedTrack<'_>],
    sep: &SeparationCost,
    fine: &Resolution,
    exclude_goal: Option<(&ContinuousState, &GoalHalfWidths)>,
) -> Result<SeparationAudit> {
    if tracks.len() < 2 {
        return Err(Error::invalid("a separation audit needs at least two tracks"));
    }
    let mut pairs = Vec::new();
    for a in 0..tracks.len() {
        for b in a + 1..tracks.len() {
            pairs.push(audit_pair(a, b, &tracks[a], &tracks[b], sep, fine, exclude_goal));
        }
    }
    let mass = stable_sum(pairs.iter().map(|p| p.mass).collect());
    Ok(SeparationAudit { mass, pairs })
}

fn audit_pair(
    a: usize,
    b: usize,
    ta: &TimedTrack<'_>,
    tb: &TimedTrack<'_>,
    sep: &SeparationCost,
    fine: &Resolution,
    exclude_goal: Option<(&ContinuousState, &GoalHalfWidths)>,
) -> PairAudit {
    let mut out = PairAudit {
        a,
        b,
        shared_steps: 0,
        counted_steps: 0,
        mass: 0.0,
        upper_bound: 0.0,
        min_planar_m: f64::INFINITY,
        min_vertical_m: f64::INFINITY,
        min_planar_cells: f64::INFINITY,
        min_vertical_cells: f64::INFINITY,
    };
    let mut terms = Vec::new();
    for (k, sa) in ta.states.iter().enumerate() {
        let Some(j) = tb.index_at(ta.t_start + k as f64 * ta.dt) else { continue };
        let sb = &tb.states[j];
        out.shared_steps += 1;
        if let Some((goal, hw)) = exclude_goal {
            if in_goal_region(sa, goal, hw) || in_goal_region(sb, goal, hw) {
                continue;
            }
        }
        out.counted_steps += 1;
        let (ga, gb) = (discretize(sa, fine), discretize(sb, fine));
        terms.push(eval_separation(sep, &ga, &gb));
        out.min_planar_m = out.min_planar_m.min(sa.planar_distance(sb));
        out.min_vertical_m = out.min_vertical_m.min((sa.z - sb.z).abs());
        let di = f64::from(ga.i - gb.i);
        let dj = f64::from(ga.j - gb.j);
        out.min_planar_cells = out.min_planar_cells.min(di.hypot(dj));
        out.min_vertical_cells = out.min_vertical_cells.min(f64::from(ga.k - gb.k).abs());
    }
    out.mass = stable_sum(terms);
    out.upper_bound = out.counted_steps as f64 * sep.peak();
    out
}

/// Summary written by the evaluation command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avg_min_path_diff_cells: f64,
    pub avg_min_path_diff_m: f64,
    pub path_diff_std_cells: f64,
    /// The same metric for the path-length-only planner, when requested.
    pub baseline_avg_min_path_diff_cells: Option<f64>,
    pub baseline_avg_min_path_diff_m: Option<f64>,
    pub pairs: usize,
    pub timeouts: usize,
    /// Fraction of evaluation searches that failed.
    pub timeout_fraction: f64,
    /// Windowed training margins and timeout fractions.
    pub margin_series: Vec<f64>,
    pub timeout_series: Vec<f64>,
    pub separation_violation_mass: f64,
    /// Sum over audited pairs of the co-located upper bound.
    pub separation_upper_bound: f64,
}
