//! Suppression contrast from resonant and off-resonant cuts.

use serde::{Deserialize, Serialize};

use super::fit::{parabola_vertex, Vertex};
use crate::error::{Error, Result};
use crate::sweep::Series;

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    /// 1 − on/off.
    pub value: f64,
    pub uncertainty: f64,
    pub on: Vertex,
    pub off: Vertex,
}

/// Index of the interior local minimum with the largest prominence that has
/// higher values on both sides, if any.
pub fn bracketed_dip(y: &[f64]) -> Option<usize> {
    let n = y.len();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..n.saturating_sub(1) {
        if !(y[i] <= y[i - 1] && y[i] <= y[i + 1]) {
            continue;
        }
        let left = y[..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let right = y[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let prominence = left.min(right) - y[i];
        if prominence > 0.0 && best.map_or(true, |(_, p)| prominence > p) {
            best = Some((i, prominence));
        }
    }
    best.map(|(i, _)| i)
}

fn argmax(y: &[f64]) -> usize {
    y.iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > y[b] { i } else { b })
}

fn window_vertex(s: &Series, centre: usize, window: usize, what: &str) -> Result<Vertex> {
    let half = window / 2;
    if centre < half || centre + half >= s.len() {
        return Err(Error::Fit(format!(
            "{what} extremum at index {centre} sits on the edge of the {window}-point window"
        )));
    }
    let lo = centre - half;
    let hi = centre + half;
    let v = parabola_vertex(&s.x[lo..=hi], &s.y[lo..=hi])?;
    let (a, b) = (s.x[lo].min(s.x[hi]), s.x[lo].max(s.x[hi]));
    if !(v.x >= a && v.x <= b) {
        return Err(Error::Fit(format!(
            "{what} vertex at {} falls outside its window [{a}, {b}]; widen the window",
            v.x
        )));
    }
    Ok(v)
}

/// Contrast with the default five-point window.
pub fn parabolic_contrast(on_cut: &Series, off_cut: &Series) -> Result<Contrast> {
    parabolic_contrast_with(on_cut, off_cut, DEFAULT_WINDOW)
}

/// 1 − (on-resonance dip vertex)/(off-resonance peak vertex).
///
/// The on-resonance extremum is the most prominent local minimum flanked by
/// higher values; a cut without such a dip is evaluated at its maximum.
pub fn parabolic_contrast_with(on_cut: &Series, off_cut: &Series, window: usize) -> Result<Contrast> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid("window", "must be odd and at least 3"));
    }
    for (s, what) in [(on_cut, "resonant"), (off_cut, "off-resonant")] {
        if s.len() < window {
            return Err(Error::Fit(format!("{what} cut has fewer than {window} points")));
        }
    }
    let on_i = bracketed_dip(&on_cut.y).unwrap_or_else(|| argmax(&on_cut.y));
    let on = window_vertex(on_cut, on_i, window, "resonant")?;
    let off = window_vertex(off_cut, argmax(&off_cut.y), window, "off-resonant")?;
    if !(off.y > 0.0) {
        return Err(Error::Fit("off-resonant peak vertex is not positive".into()));
    }
    let value = 1.0 - on.y / off.y;
    let uncertainty = ((on.y_err / off.y).powi(2) + (on.y * off.y_err / (off.y * off.y)).powi(2)).sqrt();
    Ok(Contrast {
        value,
        uncertainty,
        on,
        off,
    })
}

/// 1 − 2γ02(γ02+γ01)/((γ02+γ01)² + Ωc²): the suppression an incoherent
/// Autler–Townes doublet alone would produce. All rates in the same units.
pub fn at_only_contrast(gamma_01: f64, gamma_02: f64, omega_c: f64) -> Result<f64> {
    if gamma_01 < 0.0 || gamma_02 < 0.0 || omega_c < 0.0 {
        return Err(Error::invalid("gamma", "rates must be nonnegative"));
    }
    let s = gamma_02 + gamma_01;
    let den = s * s + omega_c * omega_c;
    if den == 0.0 {
        return Err(Error::Domain("all rates are zero".into()));
    }
    Ok(1.0 - 2.0 * gamma_02 * s / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtSpread {
    /// (Tφ02 in ns, AT-only contrast).
    pub points: Vec<(f64, f64)>,
    pub min: f64,
    pub max: f64,
}

/// AT-only contrast as Tφ02 varies, other rates fixed.
pub fn at_only_spread(
    dec: &crate::model::DecoherenceParams<f64>,
    omega_c_mhz: f64,
    tphi_02_ns: &[f64],
) -> Result<AtSpread> {
    let to_mhz = |rate: f64| 1e3 * rate / std::f64::consts::TAU;
    let points = tphi_02_ns
        .iter()
        .map(|&t| {
            let mut d = *dec;
            d.tphi_02_ns = crate::model::Lifetime::ns(t);
            d.validate()?;
            Ok((t, at_only_contrast(to_mhz(d.gamma_01()), to_mhz(d.gamma_02()), omega_c_mhz)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(AtSpread { points, min, max })
}
