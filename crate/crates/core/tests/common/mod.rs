//! Shared test helpers: an independent fixed-step classic RK4 integrator of
//! the reduced-slope system, used as the oracle the adaptive solver is
//! checked against. It shares no code with the production stepper.

/// Fixed-step RK4 on `u' = w/sqrt(1 + eps w^2)`, `w' = -(N-1)w/r - |u|^(p-1)u`
/// from the quadratic series starter at `r = h`. Returns the final state and
/// the first zero of u (linearly interpolated), if one occurred.
pub fn rk4_oracle(
    n: u32,
    p: f64,
    xi: f64,
    eps: f64,
    h: f64,
    r_max: f64,
) -> ((f64, f64, f64), Option<f64>) {
    let nn = n as f64;
    let f = |u: f64| -> f64 {
        if u == 0.0 {
            0.0
        } else {
            u.abs().powf(p - 1.0) * u
        }
    };
    let deriv = |r: f64, y: [f64; 2]| -> [f64; 2] {
        let a = (1.0 + eps * y[1] * y[1]).sqrt();
        [y[1] / a, -(nn - 1.0) * y[1] / r - f(y[0])]
    };
    let fxi = f(xi);
    let mut y = [xi - fxi * h * h / (2.0 * nn), -fxi * h / nn];
    let mut zero = None;
    // counted steps of exactly h, landing on r_max without overshoot
    let steps = ((r_max - h) / h).round() as usize;
    let mut r = h;
    for i in 0..steps {
        let k1 = deriv(r, y);
        let k2 = deriv(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = deriv(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = deriv(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        let y_new = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if zero.is_none() && y[0] > 0.0 && y_new[0] <= 0.0 {
            zero = Some(r + h * y[0] / (y[0] - y_new[0]));
        }
        r = h * (i + 2) as f64;
        y = y_new;
    }
    ((r, y[0], y[1]), zero)
}

/// The closed-form critical-exponent bubble for N = 3, p = 5, unit datum.
pub fn bubble(r: f64) -> f64 {
    (1.0 + r * r / 3.0).powf(-0.5)
}
