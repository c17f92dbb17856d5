use proptest::prelude::*;

use atc_ioc::eval::{avg_min_path_diff, separation_audit, windowed_mean, TimedTrack};
use atc_ioc::lattice::{discretize, Resolution};
use atc_ioc::par::Execution;
use atc_ioc::ContinuousState;

/// Nearest-cell distance with integer squared norms.
fn oracle(pairs: &[(Vec<ContinuousState>, Vec<ContinuousState>)], fine: &Resolution) -> f64 {
    let per_pair: Vec<f64> = pairs
        .iter()
        .map(|(l, e)| {
            let total: f64 = l
                .iter()
                .map(|a| {
                    let ga = discretize(a, fine);
                    e.iter()
                        .map(|b| {
                            let gb = discretize(b, fine);
                            let d = [ga.i - gb.i, ga.j - gb.j, ga.k - gb.k].map(i64::from);
                            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                        })
                        .min()
                        .unwrap() as f64
                })
                .map(f64::sqrt)
                .sum();
            total / l.len() as f64
        })
        .collect();
    per_pair.iter().sum::<f64>() / per_pair.len() as f64
}

fn state() -> impl Strategy<Value = ContinuousState> {
    (-2e4f64..2e4, -2e4f64..2e4, 0f64..5000.0, -3.1f64..3.1).prop_map(|(x, y, z, p)| ContinuousState::new(x, y, z, p))
}

fn track() -> impl Strategy<Value = Vec<ContinuousState>> {
    prop::collection::vec(state(), 1..25)
}

fn borrowed(pairs: &[(Vec<ContinuousState>, Vec<ContinuousState>)]) -> Vec<(Option<&[ContinuousState]>, &[ContinuousState])> {
    pairs.iter().map(|(l, e)| (Some(l.as_slice()), e.as_slice())).collect()
}

proptest! {
    #[test]
    fn path_diff_matches_brute_force(pairs in prop::collection::vec((track(), track()), 1..6)) {
        let fine = Resolution::FINE;
        let got = avg_min_path_diff(&borrowed(&pairs), &fine, Execution::Sequential).unwrap();
        let want = oracle(&pairs, &fine);
        prop_assert!((got.mean_cells - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn path_diff_ignores_expert_order_and_execution(l in track(), e in track(), rot in 0usize..25) {
        let fine = Resolution::FINE;
        let mut shuffled = e.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = avg_min_path_diff(&[(Some(&l), &e)], &fine, Execution::Sequential).unwrap();
        let b = avg_min_path_diff(&[(Some(&l), &shuffled)], &fine, Execution::Parallel).unwrap();
        prop_assert_eq!(a.mean_cells.to_bits(), b.mean_cells.to_bits());
        prop_assert_eq!(a.mean_m.to_bits(), b.mean_m.to_bits());
    }

    #[test]
    fn path_diff_of_a_subset_is_zero(e in track(), take in 1usize..25) {
        let l: Vec<_> = e.iter().copied().take(take).collect();
        let d = avg_min_path_diff(&[(Some(&l), &e)], &Resolution::FINE, Execution::Sequential).unwrap();
        prop_assert_eq!(d.mean_cells, 0.0);
    }

    #[test]
    fn windowed_mean_preserves_total(v in prop::collection::vec(-1e3f64..1e3, 1..200), w in 1usize..60) {
        let m = windowed_mean(&v, w).unwrap();
        prop_assert_eq!(m.len(), v.len().div_ceil(w));
        let total: f64 = m.iter().enumerate().map(|(i, x)| x * v[i * w..((i + 1) * w).min(v.len())].len() as f64).sum();
        prop_assert!((total - v.iter().sum::<f64>()).abs() < 1e-6);
    }
}

#[test]
fn audit_of_colocated_tracks_reaches_the_bound() {
    let fine = Resolution::FINE;
    let sep = atc_ioc::costs::SeparationCost::new(1.0, 40.0, 20.0);
    let states: Vec<ContinuousState> = (0..10).map(|k| ContinuousState::new(3000.0 * k as f64, 0.0, 3000.0, 0.0)).collect();
    let t = |t_start| TimedTrack {
        t_start,
        dt: 30.0,
        states: &states,
    };
    let same = separation_audit(&[t(0.0), t(0.0)], &sep, &fine, None).unwrap();
    assert_eq!(same.pairs[0].counted_steps, 10);
    assert_eq!(same.mass, same.pairs[0].upper_bound);
    assert_eq!(same.worst_ratio(), 1.0);
    // Ten minutes apart the tracks never share a step.
    let apart = separation_audit(&[t(0.0), t(600.0)], &sep, &fine, None).unwrap();
    assert_eq!(apart.mass, 0.0);
}
