//! BFGS with finite-difference gradients and backtracking Armijo line
//! search. A run starts from the identity inverse Hessian unless an
//! approximation from an earlier run is passed in.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsConfig {
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo_c: f64,
    /// Step-length multiplier applied on each backtrack.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Finite-difference step is `max(fd_min_step, fd_rel_step * |x_i|)`.
    pub fd_rel_step: f64,
    pub fd_min_step: f64,
    /// Stop when the gradient's max-norm falls below this.
    pub gradient_tol: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 20,
            fd_rel_step: 1e-6,
            fd_min_step: 1e-6,
            gradient_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    /// Accepted line-search steps.
    pub iterations: usize,
}

/// Central-difference gradient, falling back to a one-sided difference in
/// any coordinate where one of the two probes is inadmissible.
pub fn finite_difference_gradient<F, A>(
    f: &mut F,
    admissible: &A,
    x: &[f64],
    fx: f64,
    config: &BfgsConfig,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
    A: Fn(&[f64]) -> bool,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = config.fd_min_step.max(config.fd_rel_step * x[i].abs());
            probe[i] = x[i] + h;
            let up_ok = admissible(&probe);
            let up = if up_ok { f(&probe) } else { f64::NAN };
            probe[i] = x[i] - h;
            let down_ok = admissible(&probe);
            let down = if down_ok { f(&probe) } else { f64::NAN };
            probe[i] = x[i];
            match (up_ok, down_ok) {
                (true, true) => (up - down) / (2.0 * h),
                (true, false) => (up - fx) / h,
                (false, true) => (fx - down) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse-Hessian approximation carried between runs.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseHessian(Vec<Vec<f64>>);

impl InverseHessian {
    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }
}

/// Runs at most `max_iterations` BFGS iterations from `start`.
///
/// An iteration is one accepted line-search step followed by the
/// inverse-Hessian update. The returned point never has a larger objective
/// value than `start`.
pub fn minimize<F, A>(f: F, admissible: A, start: &[f64], max_iterations: usize, config: &BfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
    A: Fn(&[f64]) -> bool,
{
    minimize_from(f, admissible, start, max_iterations, config, None).map(|(m, _)| m)
}

/// [`minimize`] starting from a given inverse-Hessian approximation
/// (identity when `None` or of the wrong size). Returns the updated
/// approximation alongside the result.
pub fn minimize_from<F, A>(
    mut f: F,
    admissible: A,
    start: &[f64],
    max_iterations: usize,
    config: &BfgsConfig,
    initial: Option<&InverseHessian>,
) -> Result<(Minimum, InverseHessian)>
where
    F: FnMut(&[f64]) -> f64,
    A: Fn(&[f64]) -> bool,
{
    let n = start.len();
    let mut h_inv = match initial {
        Some(h) if h.dim() == n => h.0.clone(),
        _ => identity(n),
    };
    let mut x = start.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let start_value = fx;
    if max_iterations == 0 {
        let m = Minimum {
            x,
            value: fx,
            start_value,
            iterations: 0,
        };
        return Ok((m, InverseHessian(h_inv)));
    }
    let mut g = finite_difference_gradient(&mut f, &admissible, &x, fx, config);
    let mut iterations = 0;

    while iterations < max_iterations {
        if g.iter().all(|gi| gi.abs() <= config.gradient_tol) {
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h_inv[i], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h_inv = identity(n);
            d = g.iter().map(|gi| -gi).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let fc = f(&candidate);
            if fc.is_finite() && fc <= fx + config.armijo_c * step * slope {
                accepted = Some((candidate, fc));
                break;
            }
            step *= config.shrink;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = finite_difference_gradient(&mut f, &admissible, &x_new, f_new, config);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h_inv, &s, &y);
        x = x_new;
        fx = f_new;
        g = g_new;
        iterations += 1;
    }

    let m = Minimum {
        x,
        value: fx,
        start_value,
        iterations,
    };
    Ok((m, InverseHessian(h_inv)))
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`, skipped unless the
/// curvature condition `sᵀy > 0` holds.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    let scale = dot(s, s).sqrt() * dot(y, y).sqrt();
    if !(sy > 1e-12 * scale) {
        return;
    }
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
