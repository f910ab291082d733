//! Dormand–Prince 5(4) and Rosenbrock 2(3) steps for two-component systems.

pub type State = [f64; 2];

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Result of one trial step.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub y: State,
    /// Derivative at the new point (first stage of the next step).
    pub dy: State,
    /// Embedded error estimate.
    pub err: State,
}

/// One Dormand–Prince step from `(x, y)` with derivative `dy0`. Returns `None`
/// if the right-hand side is undefined at some stage.
pub fn dopri_step<F>(f: &mut F, x: f64, y: State, dy0: State, h: f64) -> Option<Step>
where
    F: FnMut(f64, State) -> Option<State>,
{
    let mut k = [[0.0; 2]; 7];
    k[0] = dy0;
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
        }
        k[s] = f(x + C[s] * h, ys)?;
    }
    // The seventh stage is evaluated at the fifth-order solution (FSAL).
    let mut ynew = y;
    for (j, kj) in k.iter().enumerate().take(6) {
        ynew[0] += h * A[6][j] * kj[0];
        ynew[1] += h * A[6][j] * kj[1];
    }
    let mut err = [0.0; 2];
    for (j, kj) in k.iter().enumerate() {
        err[0] += h * E[j] * kj[0];
        err[1] += h * E[j] * kj[1];
    }
    Some(Step { y: ynew, dy: k[6], err })
}

/// Scaled max-norm of the error against mixed tolerances.
pub fn error_norm(err: &State, y0: &State, y1: &State, rtol: f64, atol: &State) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        let sc = atol[i] + rtol * y0[i].abs().max(y1[i].abs());
        m = m.max(err[i].abs() / sc);
    }
    m
}

/// Step-size factor from an error norm, clamped to `[0.2, 5]`.
pub fn step_factor(norm: f64) -> f64 {
    step_factor_order(norm, 5.0)
}

/// As [`step_factor`] for a method whose local error scales like `h^order`.
pub fn step_factor_order(norm: f64, order: f64) -> f64 {
    if norm == 0.0 {
        5.0
    } else {
        (0.9 * libm::pow(norm, -1.0 / order)).clamp(0.2, 5.0)
    }
}

fn solve2(w: [[f64; 2]; 2], b: State) -> Option<State> {
    let det = w[0][0] * w[1][1] - w[0][1] * w[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([(b[0] * w[1][1] - w[0][1] * b[1]) / det, (w[0][0] * b[1] - w[1][0] * b[0]) / det])
}

/// One linearly implicit Rosenbrock 2(3) step (the L-stable pair of Shampine
/// and Reichelt). `jac` is `∂f/∂y` and `dfdx` is `∂f/∂x`, both at `(x, y)`.
pub fn rosenbrock_step<F>(
    f: &mut F,
    x: f64,
    y: State,
    dy0: State,
    jac: [[f64; 2]; 2],
    dfdx: State,
    h: f64,
) -> Option<Step>
where
    F: FnMut(f64, State) -> Option<State>,
{
    let d = 1.0 / (2.0 + core::f64::consts::SQRT_2);
    let e32 = 6.0 + core::f64::consts::SQRT_2;
    let hd = h * d;
    let w = [[1.0 - hd * jac[0][0], -hd * jac[0][1]], [-hd * jac[1][0], 1.0 - hd * jac[1][1]]];
    let k1 = solve2(w, [dy0[0] + hd * dfdx[0], dy0[1] + hd * dfdx[1]])?;
    let f1 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]])?;
    let r = solve2(w, [f1[0] - k1[0], f1[1] - k1[1]])?;
    let k2 = [r[0] + k1[0], r[1] + k1[1]];
    let ynew = [y[0] + h * k2[0], y[1] + h * k2[1]];
    let f2 = f(x + h, ynew)?;
    let mut b = [0.0; 2];
    for i in 0..2 {
        b[i] = f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - dy0[i]) + hd * dfdx[i];
    }
    let k3 = solve2(w, b)?;
    let err = [h / 6.0 * (k1[0] - 2.0 * k2[0] + k3[0]), h / 6.0 * (k1[1] - 2.0 * k2[1] + k3[1])];
    Some(Step { y: ynew, dy: f2, err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_to_high_accuracy() {
        let mut f = |_x: f64, y: State| Some([y[0], -2.0 * y[1]]);
        let (mut x, mut y) = (0.0, [1.0, 1.0]);
        let mut dy = f(x, y).unwrap();
        let h = 0.01;
        while x < 1.0 - 1e-12 {
            let s = dopri_step(&mut f, x, y, dy, h).unwrap();
            x += h;
            y = s.y;
            dy = s.dy;
        }
        assert!((y[0] - libm::exp(1.0)).abs() < 1e-12);
        assert!((y[1] - libm::exp(-2.0)).abs() < 1e-12);
    }

    #[test]
    fn error_estimate_is_fifth_order_small() {
        let mut f = |x: f64, _y: State| Some([x * x * x * x, 0.0]);
        let s = dopri_step(&mut f, 0.0, [0.0, 0.0], [0.0, 0.0], 0.1).unwrap();
        assert!((s.y[0] - 1e-5 / 5.0).abs() < 1e-15);
        assert!(s.err[0].abs() < 1e-7);
    }

    #[test]
    fn rosenbrock_is_stable_on_stiff_decay() {
        // y' = -1e6 (y - cos x) - sin x has the smooth solution cos x.
        let lam = -1e6;
        let mut f = |x: f64, y: State| Some([lam * (y[0] - libm::cos(x)) - libm::sin(x), 0.0]);
        let (mut x, mut y) = (0.0, [1.0, 0.0]);
        let mut dy = f(x, y).unwrap();
        let h = 0.01;
        while x < 1.0 - 1e-12 {
            let dfdx = [lam * libm::sin(x) - libm::cos(x), 0.0];
            let s = rosenbrock_step(&mut f, x, y, dy, [[lam, 0.0], [0.0, 0.0]], dfdx, h).unwrap();
            x += h;
            y = s.y;
            dy = s.dy;
        }
        assert!((y[0] - libm::cos(1.0)).abs() < 1e-5, "{}", y[0] - libm::cos(1.0));
    }

    #[test]
    fn rosenbrock_is_second_order() {
        let mut f = |_x: f64, y: State| Some([-y[0], 0.0]);
        let run = |n: usize, f: &mut dyn FnMut(f64, State) -> Option<State>| {
            let h = 1.0 / n as f64;
            let mut y = [1.0, 0.0];
            for i in 0..n {
                let dy = f(i as f64 * h, y).unwrap();
                y = rosenbrock_step(&mut |x, y| f(x, y), i as f64 * h, y, dy, [[-1.0, 0.0], [0.0, 0.0]], [0.0; 2], h).unwrap().y;
            }
            (y[0] - libm::exp(-1.0)).abs()
        };
        let ratio = run(20, &mut f) / run(40, &mut f);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn undefined_rhs_aborts() {
        let mut f = |x: f64, y: State| if x > 0.5 { None } else { Some(y) };
        assert!(dopri_step(&mut f, 0.0, [1.0, 1.0], [1.0, 1.0], 1.0).is_none());
    }
}
