//! Small dense optimizers: Nelder-Mead and box-constrained
//! Levenberg-Marquardt.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            f_tol: 1e-15,
            x_tol: 1e-13,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Unconstrained Nelder-Mead with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = f(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && spread <= opts.x_tol {
            break;
        }
        if spread <= opts.x_tol * 1e-3 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < worst.min(fr) {
                simplex[n] = (contracted, fc);
            } else {
                let best_x = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = vertex
                        .0
                        .iter()
                        .zip(&best_x)
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    let v = f(&x);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
    }
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    /// Converged when an accepted step lowers the cost by less than this
    /// fraction.
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            max_iterations: 500,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// `sum r_i^2` at `params`.
    pub cost: f64,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Box bounds; use infinities for free parameters.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Bounds {
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }
}

/// Forward/backward/central finite-difference Jacobian that never leaves the
/// box.
pub fn numeric_jacobian<F>(f: &F, x: &DVector<f64>, bounds: &Bounds) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let r0 = f(x);
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-3);
        let up = x[j] + h <= bounds.upper[j];
        let down = x[j] - h >= bounds.lower[j];
        let col = match (up, down) {
            (true, true) => {
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += h;
                b[j] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            }
            (true, false) => {
                let mut a = x.clone();
                a[j] += h;
                (f(&a) - &r0) / h
            }
            (false, _) => {
                let mut b = x.clone();
                b[j] -= h;
                (&r0 - f(&b)) / h
            }
        };
        jac.set_column(j, &col);
    }
    jac
}

/// Minimizes `sum r_i(x)^2` inside `bounds`.
///
/// Steps are projected onto the box; Marquardt scaling `diag(J'J)` is used
/// for the damping term.
pub fn levenberg_marquardt<F, J>(
    residuals: F,
    jacobian: J,
    x0: &DVector<f64>,
    bounds: &Bounds,
    opts: &LmOptions,
) -> LmReport
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = bounds.clamp(x0);
    let mut r = residuals(&x);
    let mut cost = r.norm_squared();
    let mut jac = jacobian(&x);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let scale = DVector::from_fn(jtj.nrows(), |i, _| jtj[(i, i)].max(1e-12));

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * scale[i];
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let candidate = bounds.clamp(&(&x + &step));
            if (&candidate - &x).norm() <= 1e-15 * (1.0 + x.norm()) {
                converged = true;
                break;
            }
            let r_new = residuals(&candidate);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                let improvement = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                x = candidate;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if improvement < opts.relative_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
            break;
        }
        jac = jacobian(&x);
    }
    let jac = jacobian(&x);
    LmReport {
        params: x,
        cost,
        jacobian: jac,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(
            f,
            &[-1.2, 1.0],
            &NelderMeadOptions {
                max_iterations: 20_000,
                ..Default::default()
            },
        );
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{m:?}"
        );
    }

    #[test]
    fn lm_fits_exponential_decay() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let data: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp() + 0.5).collect();
        let f = |p: &DVector<f64>| {
            DVector::from_iterator(
                t.len(),
                t.iter()
                    .zip(&data)
                    .map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y),
            )
        };
        let bounds = Bounds {
            lower: DVector::from_element(3, f64::NEG_INFINITY),
            upper: DVector::from_element(3, f64::INFINITY),
        };
        let report = levenberg_marquardt(
            f,
            |p| numeric_jacobian(&f, p, &bounds),
            &DVector::from_vec(vec![1.0, 0.1, 0.0]),
            &bounds,
            &LmOptions::default(),
        );
        assert!(report.converged);
        assert!((report.params[0] - 3.0).abs() < 1e-6);
        assert!((report.params[1] - 0.7).abs() < 1e-6);
        assert!((report.params[2] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn lm_respects_bounds() {
        // minimum of (x - 2)^2 constrained to x <= 1 sits on the bound
        let f = |p: &DVector<f64>| DVector::from_element(1, p[0] - 2.0);
        let bounds = Bounds {
            lower: DVector::from_element(1, 0.0),
            upper: DVector::from_element(1, 1.0),
        };
        let report = levenberg_marquardt(
            f,
            |p| numeric_jacobian(&f, p, &bounds),
            &DVector::from_element(1, 0.2),
            &bounds,
            &LmOptions::default(),
        );
        assert!((report.params[0] - 1.0).abs() < 1e-12);
    }
}
