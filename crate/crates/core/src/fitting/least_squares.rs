//! Damped least-squares (Levenberg–Marquardt) minimizer with a numerical
//! Jacobian.
//!
//! Small and self-contained on purpose: every model in this crate has at most
//! five parameters, initial guesses come from linear estimates, and fits must
//! run unattended inside sweeps. Degenerate data yields a non-converged
//! [`FitResult`], never a panic, and the residual norm never rises above the
//! value at the initial parameters.

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-10;
const GRADIENT_TOLERANCE: f64 = 1e-10;
const LAMBDA_INITIAL: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;

/// Outcome of a least-squares fit: named parameters plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    names: Vec<String>,
    values: Vec<f64>,
    /// Euclidean norm of the residual vector at the fitted parameters.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub(crate) fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        FitResult { names, values, residual_norm: f64::NAN, converged: false, iterations: 0 }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Look up a parameter by name.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    pub(crate) fn rename(mut self, names: &[&str]) -> Self {
        assert_eq!(names.len(), self.values.len());
        self.names = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub(crate) fn map_values(mut self, f: impl FnOnce(&mut [f64])) -> Self {
        f(&mut self.values);
        self
    }
}

/// Fit `model(x; params)` to `(xs, ys)` starting from `initial`.
pub fn least_squares<F>(model: F, xs: &[f64], ys: &[f64], initial: &[f64]) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "least_squares: {} x values vs {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if initial.is_empty() {
        return Err(Error::domain("least_squares: no parameters to fit"));
    }
    if xs.len() < initial.len() {
        return Err(Error::domain(format!(
            "least_squares: {} points cannot determine {} parameters",
            xs.len(),
            initial.len()
        )));
    }
    if initial.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("least_squares: initial parameters must be finite"));
    }

    let n_params = initial.len();
    let names = (0..n_params).map(|i| format!("p{i}")).collect();

    let residuals = |params: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(xs.iter().zip(ys).map(|(&x, &y)| model(x, params) - y));
    };
    let sse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut params = initial.to_vec();
    let mut r = Vec::with_capacity(xs.len());
    residuals(&params, &mut r);
    let mut current_sse = sse(&r);

    let mut result = FitResult::new(names, params.clone());
    if !current_sse.is_finite() {
        // Model already undefined at the starting point; report it untouched.
        result.residual_norm = current_sse.sqrt();
        return Ok(result);
    }

    let mut lambda = LAMBDA_INITIAL;
    let mut jacobian = vec![vec![0.0; n_params]; xs.len()];
    let mut scratch = Vec::with_capacity(xs.len());
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        numerical_jacobian(&model, xs, &params, &mut jacobian, &mut scratch);

        // Normal equations pieces: jtj (symmetric) and gradient jt r.
        let mut jtj = vec![vec![0.0; n_params]; n_params];
        let mut jtr = vec![0.0; n_params];
        for (row, &ri) in jacobian.iter().zip(&r) {
            for j in 0..n_params {
                jtr[j] += row[j] * ri;
                for k in j..n_params {
                    jtj[j][k] += row[j] * row[k];
                }
            }
        }
        for j in 0..n_params {
            for k in 0..j {
                jtj[j][k] = jtj[k][j];
            }
        }

        if !jtr.iter().all(|g| g.is_finite()) {
            converged = false;
            break;
        }
        let grad_norm = jtr.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= GRADIENT_TOLERANCE * (1.0 + current_sse) {
            converged = true;
            break;
        }

        // Try damped steps until one improves the residual.
        let mut stepped = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj.clone();
            for (j, row) in damped.iter_mut().enumerate() {
                let d = if jtj[j][j] > 0.0 { jtj[j][j] } else { 1.0 };
                row[j] += lambda * d;
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(step) = solve(&mut damped, rhs) else {
                lambda *= 4.0;
                continue;
            };

            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
            residuals(&trial, &mut scratch);
            let trial_sse = sse(&scratch);
            if trial_sse.is_finite() && trial_sse <= current_sse {
                let small_step = params
                    .iter()
                    .zip(&step)
                    .all(|(p, s)| s.abs() <= STEP_TOLERANCE * p.abs().max(1.0));
                params = trial;
                std::mem::swap(&mut r, &mut scratch);
                current_sse = trial_sse;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }

        if !stepped {
            // No downhill direction found even with heavy damping.
            break;
        }
        if converged {
            break;
        }
    }

    result.values.copy_from_slice(&params);
    result.residual_norm = current_sse.sqrt();
    result.converged = converged;
    result.iterations = iterations;
    Ok(result)
}

/// Central-difference Jacobian of the residual vector.
fn numerical_jacobian<F>(
    model: &F,
    xs: &[f64],
    params: &[f64],
    jacobian: &mut [Vec<f64>],
    scratch: &mut Vec<f64>,
) where
    F: Fn(f64, &[f64]) -> f64,
{
    let mut perturbed = params.to_vec();
    scratch.clear();
    scratch.resize(xs.len(), 0.0);
    for j in 0..params.len() {
        let h = 1e-7 * params[j].abs().max(1e-4);
        perturbed[j] = params[j] + h;
        for (i, &x) in xs.iter().enumerate() {
            scratch[i] = model(x, &perturbed);
        }
        perturbed[j] = params[j] - h;
        for (i, &x) in xs.iter().enumerate() {
            jacobian[i][j] = (scratch[i] - model(x, &perturbed)) / (2.0 * h);
        }
        perturbed[j] = params[j];
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(matrix: &mut [Vec<f64>], mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| matrix[a][col].abs().total_cmp(&matrix[b][col].abs()))
            .unwrap();
        if matrix[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        matrix.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = matrix[row][col] / matrix[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                matrix[row][k] -= factor * matrix[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut solution = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= matrix[row][k] * solution[k];
        }
        solution[row] = acc / matrix[row][row];
        if !solution[row].is_finite() {
            return None;
        }
    }
    Some(solution)
}
