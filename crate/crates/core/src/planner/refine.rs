use super::Plan;
use crate::geo::ContinuousState;
use crate::spline::{headings, TrackSpline};

/// Seconds between refined samples.
const REFINED_STEP: f64 = 1.0;

/// Densifies a plan with an interpolating cubic spline per axis, sampled
/// every second from the plan's first state. Bearings are recomputed from
/// consecutive refined positions.
pub fn refine(plan: &Plan) -> Vec<ContinuousState> {
    if plan.states.len() < 2 {
        return plan.states.clone();
    }
    let t: Vec<f64> = (0..plan.states.len()).map(|k| k as f64 * plan.dt).collect();
    let pts: Vec<[f64; 3]> = plan.states.iter().map(|s| [s.x, s.y, s.z]).collect();
    let spline = TrackSpline::new(&t, &pts).expect("plan times are strictly increasing");
    let total = t[t.len() - 1];
    let n = (total / REFINED_STEP + 1e-9).floor() as usize;
    let dense: Vec<[f64; 3]> = (0..=n).map(|k| spline.eval(k as f64 * REFINED_STEP)).collect();
    let phi = match headings(&dense) {
        Ok(h) => h,
        Err(_) => vec![plan.states[0].phi; dense.len()],
    };
    dense
        .iter()
        .zip(phi)
        .map(|(p, phi)| ContinuousState::new(p[0], p[1], p[2], phi))
        .collect()
}
