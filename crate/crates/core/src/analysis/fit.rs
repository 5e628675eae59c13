//! Least-squares building blocks: a Nelder–Mead driver, the parabolic vertex
//! fit and the Lorentzian line fit.

use std::sync::{Arc, Mutex};

use argmin::core::observers::{Observe, ObserverMode};
use argmin::core::{CostFunction, Executor, State, TerminationReason, KV};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{invert_real, solve_real};
use crate::sweep::Series;

/// Cost assigned to candidates the objective cannot evaluate.
pub(crate) const REJECTED_COST: f64 = 1e12;

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Best cost after each iteration.
    pub history: Vec<f64>,
}

struct Objective<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let c = (self.0)(p);
        Ok(if c.is_finite() { c } else { REJECTED_COST })
    }
}

#[derive(Clone, Default)]
struct History(Arc<Mutex<Vec<f64>>>);

impl<I: State<Float = f64>> Observe<I> for History {
    fn observe_iter(&mut self, state: &I, _kv: &KV) -> std::result::Result<(), argmin::core::Error> {
        self.0.lock().expect("history lock").push(state.get_best_cost());
        Ok(())
    }
}

/// Nelder–Mead from `x0` with initial simplex offsets `steps`.
///
/// Stops when the spread of simplex costs drops below `tol`.
pub(crate) fn minimize<F>(f: F, x0: &[f64], steps: &[f64], tol: f64, max_iter: u64) -> Result<Minimum>
where
    F: Fn(&[f64]) -> f64,
{
    let mut simplex = vec![x0.to_vec()];
    for (k, &s) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[k] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(tol)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let history = History::default();
    let res = Executor::new(Objective(f), solver)
        .configure(|s| s.max_iters(max_iter))
        .add_observer(history.clone(), ObserverMode::Always)
        .timer(false)
        .run()
        .map_err(|e| Error::Fit(e.to_string()))?;
    let state = res.state();
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::Fit("simplex produced no parameters".into()))?;
    let converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));
    let history = history.0.lock().expect("history lock").clone();
    Ok(Minimum {
        x,
        cost: state.get_best_cost(),
        iterations: state.get_iter(),
        converged,
        history,
    })
}

/// Central-difference Hessian of `f` at `x` with per-coordinate steps `h`.
pub(crate) fn hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let f0 = f(x);
    let mut out = vec![vec![0.0; n]; n];
    let at = |d: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(k, s) in d {
            y[k] += s;
        }
        f(&y)
    };
    for i in 0..n {
        out[i][i] = (at(&[(i, h[i])]) - 2.0 * f0 + at(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])])
                - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Standard errors from the curvature of a residual sum of squares:
/// cov = 2 s² H⁻¹ with s² the residual variance.
pub(crate) fn curvature_errors(h: &[Vec<f64>], s2: f64) -> Vec<f64> {
    let n = h.len();
    match invert_real(h) {
        Some(inv) => (0..n)
            .map(|i| {
                let v = 2.0 * s2 * inv[i][i];
                if v >= 0.0 {
                    v.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; n],
    }
}

/// Vertex of a least-squares parabola.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

/// Fits y = a u² + b u + c (u = x − x̄) to the points and returns the vertex.
pub(crate) fn parabola_vertex(x: &[f64], y: &[f64]) -> Result<Vertex> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Fit("a parabola needs at least three points".into()));
    }
    let xm = x.iter().sum::<f64>() / n as f64;
    let mut ata = vec![vec![0.0; 3]; 3];
    let mut aty = vec![0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi - xm;
        let row = [u * u, u, 1.0];
        for r in 0..3 {
            aty[r] += row[r] * yi;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let coef = solve_real(&ata, &aty).ok_or_else(|| Error::Fit("degenerate abscissae".into()))?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if a == 0.0 {
        return Err(Error::Fit("window is linear; no vertex".into()));
    }
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let u = xi - xm;
            let r = yi - (a * u * u + b * u + c);
            r * r
        })
        .sum();
    let s2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let cov = invert_real(&ata).ok_or_else(|| Error::Fit("degenerate abscissae".into()))?;
    let grad = [b * b / (4.0 * a * a), -b / (2.0 * a), 1.0];
    let mut var = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            var += grad[r] * cov[r][c] * grad[c];
        }
    }
    Ok(Vertex {
        x: xm - b / (2.0 * a),
        y: c - b * b / (4.0 * a),
        y_err: (s2 * var).max(0.0).sqrt(),
    })
}

/// Lorentzian line parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub center_ghz: f64,
    pub fwhm_mhz: f64,
    pub fwhm_err_mhz: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub rss: f64,
    pub iterations: u64,
}

fn lorentzian(x: f64, p: &[f64]) -> f64 {
    // p = [offset, amplitude, center, ln(half width)]
    let hw = p[3].exp();
    let u = (x - p[2]) / hw;
    p[0] + p[1] / (1.0 + u * u)
}

/// Lorentzian (offset + amplitude + center + width) least-squares fit to the
/// dominant peak of `cut`, whose abscissa is in GHz.
pub fn linewidth_fit(cut: &Series) -> Result<LineFit> {
    fit_lorentzian(&cut.x, &cut.y)
}

/// [`linewidth_fit`] for a dip: the fitted amplitude comes out negative.
pub fn notch_fit(cut: &Series) -> Result<LineFit> {
    let neg: Vec<f64> = cut.y.iter().map(|v| -v).collect();
    let mut f = fit_lorentzian(&cut.x, &neg)?;
    f.amplitude = -f.amplitude;
    f.offset = -f.offset;
    Ok(f)
}

fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 5 || y.len() != n {
        return Err(Error::Fit(format!("need at least 5 points for a line fit, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("cut contains non-finite values".into()));
    }
    // Work in a unit box so one simplex scale fits all parameters.
    let (x0, x1) = (x[0].min(x[n - 1]), x[0].max(x[n - 1]));
    let xs = x1 - x0;
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ys = if ymax > ymin { ymax - ymin } else { 1.0 };
    let u: Vec<f64> = x.iter().map(|v| (v - x0) / xs).collect();
    let w: Vec<f64> = y.iter().map(|v| (v - ymin) / ys).collect();
    let imax = w
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > w[b] { i } else { b });
    let above = w.iter().filter(|&&v| v > 0.5).count().max(1);
    let hw0 = (0.5 * above as f64 / (n - 1) as f64).max(0.5 / (n - 1) as f64);

    let rss = |p: &[f64]| -> f64 {
        u.iter()
            .zip(&w)
            .map(|(&ui, &wi)| {
                let r = wi - lorentzian(ui, p);
                r * r
            })
            .sum()
    };
    let mut p = vec![0.0, 1.0, u[imax], hw0.ln()];
    let mut iterations = 0;
    let mut last = rss(&p);
    let mut converged = false;
    // Restarting from the best vertex guards against premature collapse;
    // the tolerance follows the residual down.
    for _ in 0..12 {
        let tol = (1e-10 * last).max(1e-300);
        let m = minimize(&rss, &p, &[0.05, 0.1, 0.02, 0.3], tol, 5000)?;
        iterations += m.iterations;
        p = m.x;
        let settled = (last - m.cost).abs() <= 1e-9 * last || m.cost < 1e-26;
        last = m.cost;
        if m.converged && settled {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "Lorentzian fit did not converge after {iterations} iterations (rss {:.3e})",
            rss(&p) * ys * ys
        )));
    }
    let cost = rss(&p);
    if p[1] <= 0.0 {
        return Err(Error::Fit("no peak found (non-positive amplitude)".into()));
    }
    let hw = p[3].exp();
    let h = hessian(&rss, &p, &[1e-4, 1e-4, 1e-5, 1e-4]);
    let dof = (n - 4).max(1) as f64;
    let errs = curvature_errors(&h, cost / dof);
    let fwhm_ghz = 2.0 * hw * xs;
    Ok(LineFit {
        center_ghz: x0 + p[2] * xs,
        fwhm_mhz: 1e3 * fwhm_ghz,
        fwhm_err_mhz: 1e3 * fwhm_ghz * errs[3],
        amplitude: p[1] * ys,
        offset: ymin + p[0] * ys,
        rss: cost * ys * ys,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::Axis;

    #[test]
    fn minimize_quadratic_bowl() {
        let f = |p: &[f64]| (p[0] - 1.0).powi(2) + 10.0 * (p[1] + 2.0).powi(2);
        let m = minimize(f, &[0.0, 0.0], &[0.5, 0.5], 1e-20, 2000).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] + 2.0).abs() < 1e-6);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn parabola_vertex_is_exact() {
        let x: Vec<f64> = (0..5).map(|i| 0.3 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.4 + (v - 0.47).powi(2)).collect();
        let v = parabola_vertex(&x, &y).unwrap();
        assert!((v.x - 0.47).abs() < 1e-12);
        assert!((v.y - 0.4).abs() < 1e-12);
        assert!(v.y_err < 1e-12);
    }

    #[test]
    fn lorentzian_recovers_generator() {
        let x: Vec<f64> = (0..31).map(|i| 5.99 + 0.003 * i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| 0.01 + 0.14 / (1.0 + ((v - 6.036) / 0.020).powi(2)))
            .collect();
        let f = linewidth_fit(&Series::new(Axis::Fp, x, y).unwrap()).unwrap();
        assert!((f.fwhm_mhz - 40.0).abs() < 0.1, "{f:?}");
        assert!((f.center_ghz - 6.036).abs() < 1e-6);
    }
}
