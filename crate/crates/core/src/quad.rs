//! Composite quadrature on the nonuniform node sets produced by the adaptive
//! integrator: cumulative trapezoid for the slowly varying damping integrals,
//! and a cumulative overlapping-quadratic rule (order 4) for the crosscheck
//! that reconstructs the reduced slope from the integral form of the
//! equation.

/// Cumulative trapezoid: returns the running integral at every node,
/// starting at 0.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        out.push(acc);
    }
    out
}

/// Integral over [a, b] of the parabola through (x0,y0), (x1,y1), (x2,y2).
///
/// Works in coordinates shifted by x1 so the Newton coefficients stay at the
/// local interval scale even when the abscissae themselves are huge.
#[allow(clippy::too_many_arguments)]
fn parabola_integral(x0: f64, y0: f64, x1: f64, y1: f64, x2: f64, y2: f64, a: f64, b: f64) -> f64 {
    let t0 = x0 - x1;
    let t2 = x2 - x1;
    // Newton form on the node order (x1, x2, x0):
    //   p(t) = y1 + d12 * t + d120 * t * (t - t2)
    let d12 = (y2 - y1) / t2;
    let d20 = (y0 - y2) / (t0 - t2);
    let d120 = (d20 - d12) / t0;
    let (ta, tb) = (a - x1, b - x1);
    let p1 = tb - ta;
    let p2 = 0.5 * (tb * tb - ta * ta);
    let p3 = (tb * tb * tb - ta * ta * ta) / 3.0;
    y1 * p1 + d12 * p2 + d120 * (p3 - t2 * p2)
}

/// Cumulative integral using, on each interval, the average of the two
/// parabolas interpolating the neighbouring node triples (a single parabola
/// at the ends). Exact for quadratics; fourth-order on smooth data.
pub fn cumulative_quadratic(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(n, ys.len());
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    if n < 2 {
        return out;
    }
    if n == 2 {
        out.push(0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]));
        return out;
    }
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let left = if i > 0 {
            Some(parabola_integral(xs[i - 1], ys[i - 1], xs[i], ys[i], xs[i + 1], ys[i + 1], a, b))
        } else {
            None
        };
        let right = if i + 2 < n {
            Some(parabola_integral(xs[i], ys[i], xs[i + 1], ys[i + 1], xs[i + 2], ys[i + 2], a, b))
        } else {
            None
        };
        acc += match (left, right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!("n >= 3"),
        };
        out.push(acc);
    }
    out
}
