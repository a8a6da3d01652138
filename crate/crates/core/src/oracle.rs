//! Independent numerical machinery used to validate the closed forms:
//! fixed-step backward RK4, adaptive Simpson quadrature and a central
//! finite-difference derivative check. None of this shares code with
//! `closed_form`; it exists so every analytic result has a second,
//! independent route.

use crate::{Error, Result};

/// A terminal-value ODE system integrated backward from `terminal_time`
/// down to `start_time`.
pub struct OdeProblem<F>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    pub rhs: F,
    pub terminal_time: f64,
    pub terminal_value: Vec<f64>,
    pub start_time: f64,
    pub steps: usize,
}

/// Solution sampled on the uniform integration grid, times ascending.
pub struct OdeSolution {
    pub times: Vec<f64>,
    /// `values[i]` is the state vector at `times[i]`.
    pub values: Vec<Vec<f64>>,
}

impl OdeSolution {
    /// Component `k` as a flat vector over the grid.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|y| y[k]).collect()
    }
}

/// Classical 4th-order Runge-Kutta from `terminal_time` down to
/// `start_time`; global error O(h^4). Reports the time of blow-up if the
/// state leaves the finite range.
pub fn rk4_backward<F>(problem: &OdeProblem<F>) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = problem.steps;
    if n < 2 {
        return Err(Error::BadGrid { expected: problem.terminal_time, got: n as f64 });
    }
    let t_end = problem.terminal_time;
    let t_start = problem.start_time;
    let h = (t_start - t_end) / n as f64; // negative: stepping backward
    let dim = problem.terminal_value.len();

    let mut times = vec![0.0; n + 1];
    let mut values = vec![vec![0.0; dim]; n + 1];
    times[n] = t_end;
    values[n] = problem.terminal_value.clone();

    let mut t = t_end;
    let mut y = problem.terminal_value.clone();
    for i in (0..n).rev() {
        let k1 = (problem.rhs)(t, &y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(yi, ki)| yi + 0.5 * h * ki).collect();
        let k2 = (problem.rhs)(t + 0.5 * h, &y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(yi, ki)| yi + 0.5 * h * ki).collect();
        let k3 = (problem.rhs)(t + 0.5 * h, &y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(yi, ki)| yi + h * ki).collect();
        let k4 = (problem.rhs)(t + h, &y4);
        for j in 0..dim {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t = t_end + h * (n - i) as f64;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t, step: n - i });
        }
        times[i] = t;
        values[i] = y.clone();
    }
    // pin the start node exactly
    times[0] = t_start;
    Ok(OdeSolution { times, values })
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)] // recursion reuses the cached endpoint samples
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureDepth { tol });
    }
    let l = adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Adaptive Simpson estimate of the integral of `f` over `[a, b]` with
/// absolute tolerance `tol`.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Outcome of a central-difference derivative check at shrinking step sizes.
#[derive(Debug, Clone)]
pub struct FdReport {
    /// Relative error per step size, same order as the input sequence.
    pub rel_errors: Vec<f64>,
    pub best_rel_error: f64,
    pub pass: bool,
}

/// Compares `analytic_grad` with central differences of `f` at `point`,
/// trying each step in `h_seq`; passes when the best relative error is
/// at most 1e-5.
pub fn finite_diff_check<F: Fn(f64) -> f64>(
    f: F,
    point: f64,
    analytic_grad: f64,
    h_seq: &[f64],
) -> FdReport {
    let scale = analytic_grad.abs().max(1.0);
    let rel_errors: Vec<f64> = h_seq
        .iter()
        .map(|&h| {
            let fd = (f(point + h) - f(point - h)) / (2.0 * h);
            (fd - analytic_grad).abs() / scale
        })
        .collect();
    let best = rel_errors.iter().cloned().fold(f64::INFINITY, f64::min);
    FdReport { rel_errors, best_rel_error: best, pass: best <= 1e-5 }
}

/// Default shrinking step sequence for [`finite_diff_check`].
pub const FD_STEPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_constant() {
        let p = OdeProblem {
            rhs: |_t, _y: &[f64]| vec![0.0],
            terminal_time: 4.0,
            terminal_value: vec![3.5],
            start_time: 0.0,
            steps: 100,
        };
        let sol = rk4_backward(&p).unwrap();
        assert!(sol.values.iter().all(|y| y[0] == 3.5));
        assert_eq!(sol.times[0], 0.0);
        assert_eq!(sol.times[100], 4.0);
    }

    #[test]
    fn rk4_exponential() {
        // y' = y, y(4) = 1  =>  y(0) = e^{-4}
        let p = OdeProblem {
            rhs: |_t, y: &[f64]| vec![y[0]],
            terminal_time: 4.0,
            terminal_value: vec![1.0],
            start_time: 0.0,
            steps: 4000,
        };
        let sol = rk4_backward(&p).unwrap();
        assert!((sol.values[0][0] - (-4.0f64).exp()).abs() <= 1e-10);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        // Riccati K-ODE, Table 1 params with alpha=-0.5, beta=0.3.
        let (alpha, beta, sb2) = (-0.5f64, 0.3f64, 0.4f64);
        let rhs = move |_t: f64, y: &[f64]| {
            vec![-(2.0 * beta * beta * y[0] * y[0] + 2.0 * alpha * y[0] - 1.0 / (2.0 * sb2))]
        };
        let solve = |steps: usize| {
            let p = OdeProblem {
                rhs,
                terminal_time: 4.0,
                terminal_value: vec![0.0],
                start_time: 0.0,
                steps,
            };
            rk4_backward(&p).unwrap().values[0][0]
        };
        let reference = solve(200_000);
        let e1 = (solve(250) - reference).abs();
        let e2 = (solve(500) - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..=20.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn rk4_reports_blowup() {
        // y' = -y^2 backward from y(1)=1 blows up at t=0.
        let p = OdeProblem {
            rhs: |_t, y: &[f64]| vec![-y[0] * y[0]],
            terminal_time: 1.0,
            terminal_value: vec![1.0],
            start_time: -1.0,
            steps: 64,
        };
        assert!(matches!(rk4_backward(&p), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn quadrature_zero() {
        assert_eq!(quadrature(|_| 0.0, 0.0, 4.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_cubic_exact() {
        // Simpson is exact for polynomials of degree <= 3.
        let v = quadrature(|t| t * t, 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 1e-12);
        let v = quadrature(|t| t * t * t - 2.0 * t, -1.0, 3.0, 1e-10).unwrap();
        assert!((v - (20.0 - 8.0)).abs() <= 1e-10);
    }

    #[test]
    fn quadrature_exponential() {
        let v = quadrature(|t| (0.2 * t).exp(), 0.0, 4.0, 1e-10).unwrap();
        assert!((v - 5.0 * (0.8f64.exp() - 1.0)).abs() <= 1e-9);
    }

    #[test]
    fn fd_check_square() {
        let r = finite_diff_check(|x| x * x, 3.0, 6.0, &FD_STEPS);
        assert!(r.pass, "best rel err {}", r.best_rel_error);
    }

    #[test]
    fn fd_check_wrong_gradient_fails() {
        let r = finite_diff_check(|x| x * x, 3.0, 5.0, &FD_STEPS);
        assert!(!r.pass);
    }
}
