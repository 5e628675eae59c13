//! Dephasing-time estimation from P₂(t) and the matching sensitivity curve.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{curvature_errors, hessian, minimize, REJECTED_COST};
use crate::error::{Error, Result};
use crate::model::{DecoherenceParams, Lifetime};
use crate::sweep::{Series, SimContext, SCHEMA_VERSION, TOOL_VERSION};

/// Dephasing times that [`fit_dephasing`] can adjust.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingParam {
    Tphi01,
    Tphi02,
    Tphi12,
}

impl DephasingParam {
    pub fn name(self) -> &'static str {
        match self {
            DephasingParam::Tphi01 => "tphi_01_ns",
            DephasingParam::Tphi02 => "tphi_02_ns",
            DephasingParam::Tphi12 => "tphi_12_ns",
        }
    }

    fn set(self, dec: &mut DecoherenceParams<f64>, ns: f64) {
        let t = Lifetime::ns(ns);
        match self {
            DephasingParam::Tphi01 => dec.tphi_01_ns = t,
            DephasingParam::Tphi02 => dec.tphi_02_ns = t,
            DephasingParam::Tphi12 => dec.tphi_12_ns = t,
        }
    }
}

impl fmt::Display for DephasingParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DephasingParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tphi_01" | "tphi_01_ns" => Ok(DephasingParam::Tphi01),
            "tphi_02" | "tphi_02_ns" => Ok(DephasingParam::Tphi02),
            "tphi_12" | "tphi_12_ns" => Ok(DephasingParam::Tphi12),
            _ => Err(Error::invalid("free", format!("unknown dephasing parameter `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Search range of the coarse grid, ns.
    pub bounds_ns: (f64, f64),
    /// Grid points per free parameter; chosen from the dimension when unset.
    pub grid_points: Option<usize>,
    /// Lower bound on the residual standard deviation used for
    /// uncertainties, so that noise-free data still yields finite error bars.
    pub noise_floor: f64,
    pub max_iter: u64,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds_ns: (1.0, 200.0),
            grid_points: None,
            noise_floor: 0.005,
            max_iter: 300,
            tolerance: 1e-14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub uncertainty: f64,
    /// One-sigma error of ln(value).
    pub log_uncertainty: f64,
    /// The residual does not resolve a factor of two in this parameter.
    pub flat: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub params: Vec<FittedParam>,
    pub rss: f64,
    pub n_points: usize,
    pub iterations: u64,
    pub converged: bool,
    pub flat_residual: bool,
    /// Best residual after each simplex iteration.
    pub residual_history: Vec<f64>,
    pub rejected_candidates: usize,
}

impl FitReport {
    pub fn param(&self, name: &str) -> Option<&FittedParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt().ln()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Sum of squared P₂ residuals between `observed` and the simulation with
/// the `free` times set to `values_ns`.
pub fn dephasing_residual(
    observed: &Series,
    ctx: &SimContext,
    free: &[DephasingParam],
    values_ns: &[f64],
) -> Result<f64> {
    if free.len() != values_ns.len() {
        return Err(Error::invalid("values_ns", "one value per free parameter"));
    }
    residual(observed, ctx, free, values_ns)
}

fn residual(observed: &Series, ctx: &SimContext, free: &[DephasingParam], values_ns: &[f64]) -> Result<f64> {
    let mut c = ctx.clone();
    for (p, &v) in free.iter().zip(values_ns) {
        p.set(&mut c.decoherence, v);
    }
    let pops = c.populations_at(&observed.x)?;
    Ok(pops
        .iter()
        .zip(&observed.y)
        .map(|(p, &y)| (p[2] - y).powi(2))
        .sum())
}

/// Least-squares estimate of the `free` dephasing times from an observed
/// P₂(t) series; everything else comes from `ctx`.
///
/// A log-spaced grid over `opts.bounds_ns` seeds a simplex over the
/// logarithms of the free times.
pub fn fit_dephasing(
    observed: &Series,
    ctx: &SimContext,
    free: &[DephasingParam],
    opts: &FitOptions,
) -> Result<FitReport> {
    if free.is_empty() {
        return Err(Error::invalid("free", "at least one parameter must be free"));
    }
    if free.iter().enumerate().any(|(i, p)| free[..i].contains(p)) {
        return Err(Error::invalid("free", "parameters listed twice"));
    }
    if observed.len() < 10 {
        return Err(Error::invalid("observed", format!("need at least 10 time points, got {}", observed.len())));
    }
    if observed.x.windows(2).any(|w| w[1] <= w[0]) || observed.x[0] < 0.0 {
        return Err(Error::invalid("observed", "times must be nonnegative and strictly increasing"));
    }
    let (lo, hi) = opts.bounds_ns;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("bounds_ns", "need 0 < lower < upper"));
    }
    ctx.validate()?;
    let k = free.len();
    let (log_lo, log_hi) = ((0.1 * lo).ln(), (10.0 * hi).ln());

    let simulate = |theta: &[f64]| -> Result<f64> {
        let values: Vec<f64> = theta.iter().map(|v| v.exp()).collect();
        residual(observed, ctx, free, &values)
    };
    let objective = |theta: &[f64]| -> f64 {
        if theta.iter().any(|&v| !(v >= log_lo && v <= log_hi)) {
            return REJECTED_COST;
        }
        match simulate(theta) {
            Ok(r) => r,
            Err(e) => {
                log::debug!("rejected candidate {theta:?}: {e}");
                REJECTED_COST
            }
        }
    };

    let per_axis = opts.grid_points.unwrap_or(match k {
        1 => 13,
        2 => 7,
        _ => 5,
    });
    if per_axis == 0 {
        return Err(Error::invalid("grid_points", "must be positive"));
    }
    let axis = log_grid(lo, hi, per_axis);
    let n_cand = per_axis.pow(k as u32);
    let candidates: Vec<Vec<f64>> = (0..n_cand)
        .map(|mut idx| {
            (0..k)
                .map(|_| {
                    let v = axis[idx % per_axis];
                    idx /= per_axis;
                    v
                })
                .collect()
        })
        .collect();
    let scored: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|c| match simulate(c) {
            Ok(r) => Some(r),
            Err(e) => {
                log::debug!("rejected grid candidate {c:?}: {e}");
                None
            }
        })
        .collect();
    let rejected = scored.iter().filter(|s| s.is_none()).count();
    let (best, _) = scored
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::Fit("every grid candidate was rejected by the simulator".into()))?;

    let spacing = if per_axis > 1 { axis[1] - axis[0] } else { 0.5 };
    let steps = vec![0.5 * spacing; k];
    let m = minimize(objective, &candidates[best], &steps, opts.tolerance, opts.max_iter)?;
    if m.cost >= REJECTED_COST {
        return Err(Error::Fit("simplex left the region the simulator can evaluate".into()));
    }

    let n = observed.len();
    let s2 = (m.cost / (n.saturating_sub(k).max(1)) as f64).max(opts.noise_floor.powi(2));
    let h = hessian(&objective, &m.x, &vec![0.05; k]);
    let log_err = curvature_errors(&h, s2);
    let params = free
        .iter()
        .zip(&m.x)
        .zip(&log_err)
        .map(|((p, &theta), &err)| {
            let value = theta.exp();
            FittedParam {
                name: p.name().to_string(),
                value,
                unit: "ns".into(),
                uncertainty: value * err,
                log_uncertainty: err,
                flat: !(err <= std::f64::consts::LN_2),
            }
        })
        .collect::<Vec<_>>();
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        flat_residual: params.iter().any(|p| p.flat),
        params,
        rss: m.cost,
        n_points: n,
        iterations: m.iterations,
        converged: m.converged,
        residual_history: m.history,
        rejected_candidates: rejected,
    })
}

/// Default Tφ01 grid for [`sensitivity_curve`], ending at the infinite sentinel.
pub fn default_tphi01_grid() -> Vec<Lifetime<f64>> {
    [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0, 60.0, 100.0, 200.0, 500.0]
        .iter()
        .map(|&t| Lifetime::ns(t))
        .chain(std::iter::once(Lifetime::Infinite))
        .collect()
}

/// P₂ after a pulse of length `t0_ns` at the context's drive, for each Tφ01.
pub fn sensitivity_curve(ctx: &SimContext, t0_ns: f64, tphi_01: &[Lifetime<f64>]) -> Result<Vec<(Lifetime<f64>, f64)>> {
    if tphi_01.is_empty() {
        return Err(Error::invalid("tphi_01", "grid is empty"));
    }
    let mut base = ctx.clone();
    base.drive.t0_ns = t0_ns;
    base.validate()?;
    tphi_01
        .par_iter()
        .map(|&t| {
            let mut c = base.clone();
            c.decoherence = c.decoherence.with_tphi_01(t);
            c.decoherence.validate()?;
            Ok((t, c.final_populations()?[2]))
        })
        .collect()
}
