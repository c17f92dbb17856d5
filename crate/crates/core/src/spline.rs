//! Interpolating cubic splines for trajectory resampling.

use crate::error::{Error, Result};
use crate::geo::bearing_from_positions;

/// Not-a-knot interpolating cubic spline over strictly increasing knots.
///
/// Two knots give the straight line and three knots the parabola through
/// them. Outside the knot range the end pieces are extended.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("spline knots and values differ in length"));
        }
        if x.len() < 2 {
            return Err(Error::invalid("spline needs at least two knots"));
        }
        if x.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) || x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline knots must be finite and strictly increasing"));
        }
        let m = match x.len() {
            2 => vec![0.0; 2],
            3 => {
                let h0 = x[1] - x[0];
                let h1 = x[2] - x[1];
                let c = 2.0 * ((y[2] - y[1]) / h1 - (y[1] - y[0]) / h0) / (h0 + h1);
                vec![c; 3]
            }
            _ => not_a_knot_moments(x, y),
        };
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = x1 - t;
        let b = t - x0;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (self.y[i] / h - m0 * h / 6.0) * a
            + (self.y[i + 1] / h - m1 * h / 6.0) * b
    }
}

// Interior moment equations with the end moments eliminated through the
// third-derivative continuity conditions at the second and penultimate knots.
fn not_a_knot_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    let size = n - 1;
    let mut sub = vec![0.0; size];
    let mut diag = vec![0.0; size];
    let mut sup = vec![0.0; size];
    let mut rhs = vec![0.0; size];
    for r in 0..size {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * (d[i] - d[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    diag[0] = (h0 + h1) * (h0 + 2.0 * h1) / h1;
    sup[0] = (h1 * h1 - h0 * h0) / h1;
    let (a, b) = (h[n - 2], h[n - 1]);
    let last = size - 1;
    sub[last] = (a * a - b * b) / a;
    diag[last] = (a + b) * (2.0 * a + b) / a;

    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = Vec::with_capacity(n + 1);
    m.push(((h0 + h1) * inner[0] - h0 * inner[1]) / h1);
    m.extend_from_slice(&inner);
    m.push(((a + b) * inner[last] - b * inner[last - 1]) / a);
    m
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    out
}

/// One spline per axis through timestamped 3D points.
#[derive(Clone, Debug)]
pub struct TrackSpline {
    axes: [CubicSpline; 3],
}

impl TrackSpline {
    pub fn new(t: &[f64], points: &[[f64; 3]]) -> Result<Self> {
        let axis = |a: usize| -> Result<CubicSpline> {
            let v: Vec<f64> = points.iter().map(|p| p[a]).collect();
            CubicSpline::new(t, &v)
        };
        Ok(Self {
            axes: [axis(0)?, axis(1)?, axis(2)?],
        })
    }

    pub fn eval(&self, t: f64) -> [f64; 3] {
        [self.axes[0].eval(t), self.axes[1].eval(t), self.axes[2].eval(t)]
    }
}

/// Bearing at each point from the displacement to the next one; the last
/// point repeats the previous bearing. Stationary stretches inherit the
/// nearest defined bearing.
pub fn headings(points: &[[f64; 3]]) -> Result<Vec<f64>> {
    let mut out: Vec<Option<f64>> = points
        .windows(2)
        .map(|w| bearing_from_positions((w[0][0], w[0][1]), (w[1][0], w[1][1])).ok())
        .collect();
    let Some(first) = out.iter().flatten().next().copied() else {
        let p = points.first().copied().unwrap_or_default();
        return Err(Error::CoincidentPoints { x: p[0], y: p[1] });
    };
    let mut prev = first;
    for b in out.iter_mut() {
        match b {
            Some(v) => prev = *v,
            None => *b = Some(prev),
        }
    }
    let mut out: Vec<f64> = out.into_iter().flatten().collect();
    out.push(prev);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| 0.5 * x * x * x - 2.0 * x * x + x - 3.0;
        let x = [0.0, 0.7, 1.5, 3.0, 3.2, 5.0];
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for k in 0..=100 {
            let t = -1.0 + 7.0 * k as f64 / 100.0;
            assert_abs_diff_eq!(s.eval(t), f(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn small_knot_counts() {
        let s = CubicSpline::new(&[0.0, 2.0], &[1.0, 5.0]).unwrap();
        assert_abs_diff_eq!(s.eval(1.0), 3.0, epsilon = 1e-12);
        let q = |x: f64| 3.0 * x * x - x + 2.0;
        let x = [0.0, 1.0, 4.0];
        let y = x.map(q);
        let s = CubicSpline::new(&x, &y).unwrap();
        assert_abs_diff_eq!(s.eval(2.5), q(2.5), epsilon = 1e-9);
        let x = [0.0, 1.0, 2.5, 4.0];
        let y = x.map(q);
        let s = CubicSpline::new(&x, &y).unwrap();
        assert_abs_diff_eq!(s.eval(3.3), q(3.3), epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::new(&[0.0], &[0.0]).is_err());
        assert!(CubicSpline::new(&[0.0, 0.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::new(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn headings_fill_stationary_points() {
        let p = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let h = headings(&p).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h[0], 0.0);
        assert_eq!(h[1], 0.0);
        assert_abs_diff_eq!(h[2], std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(h[3], std::f64::consts::FRAC_PI_2);
        assert!(headings(&[[1.0, 1.0, 0.0], [1.0, 1.0, 5.0]]).is_err());
    }

    proptest! {
        #[test]
        fn passes_through_knots(steps in proptest::collection::vec((1f64..60.0, -5e3f64..5e3), 1..40)) {
            let mut x = vec![0.0];
            let mut y = vec![0.0];
            for (dx, v) in &steps {
                x.push(x.last().unwrap() + dx);
                y.push(*v);
            }
            let s = CubicSpline::new(&x, &y).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!((s.eval(*xi) - yi).abs() < 1e-6);
            }
        }
    }
}
