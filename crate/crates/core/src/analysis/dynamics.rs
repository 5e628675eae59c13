//! Time-domain quantities of a coupling-frequency × pulse-length map.

use serde::{Deserialize, Serialize};

use super::contrast::bracketed_dip;
use super::fit::notch_fit;
use crate::error::{Error, Result};
use crate::sweep::{Axis, Series, SweepResult};

/// Off-resonant values below this are treated as no signal.
const MIN_REFERENCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suppression {
    pub t0_ns: Vec<f64>,
    /// 1 − on/off per pulse length; `None` where the reference is ~0.
    pub value: Vec<Option<f64>>,
    pub max: f64,
    pub t0_at_max_ns: f64,
}

/// Relative suppression of an on-resonance time trace against an
/// off-resonance one sampled at the same pulse lengths.
pub fn suppression_vs_time(on: &Series, off: &Series) -> Result<Suppression> {
    if on.axis != Axis::T0 || off.axis != Axis::T0 {
        return Err(Error::Domain("suppression needs two t0 series".into()));
    }
    if on.x != off.x {
        return Err(Error::Domain("on and off traces are sampled at different t0".into()));
    }
    let value: Vec<Option<f64>> = on
        .y
        .iter()
        .zip(&off.y)
        .map(|(&a, &b)| (b > MIN_REFERENCE).then(|| 1.0 - a / b))
        .collect();
    let (k, max) = value
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((k, v)),
        })
        .ok_or_else(|| Error::Domain("off-resonant trace carries no signal".into()))?;
    Ok(Suppression {
        t0_ns: on.x.clone(),
        value,
        max,
        t0_at_max_ns: on.x[k],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotchWidth {
    pub t0_ns: f64,
    /// Lorentzian FWHM of the dip, `None` if no dip could be fitted.
    pub fwhm_mhz: Option<f64>,
    pub center_ghz: Option<f64>,
}

/// Fits the CPT notch in the fc cut at each pulse length in `[t_lo, t_hi]`.
///
/// The dip is searched within `half_window_ghz` of `center_ghz` and fitted
/// between its flanking maxima, which may lie outside that window.
pub fn notch_widths(
    result: &SweepResult,
    center_ghz: f64,
    half_window_ghz: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<Vec<NotchWidth>> {
    let t_axis = match (result.spec.axis1.param, result.spec.axis2.map(|a| a.param)) {
        (Axis::Fc, Some(Axis::T0)) | (Axis::T0, Some(Axis::Fc)) => {
            if result.spec.axis1.param == Axis::T0 {
                result.spec.axis1
            } else {
                result.spec.axis2.expect("checked above")
            }
        }
        _ => return Err(Error::Domain("notch widths need an fc × t0 sweep".into())),
    };
    let fc_values = if t_axis == result.spec.axis1 {
        result.axis2_values.clone().unwrap_or_default()
    } else {
        result.axis1_values.clone()
    };
    let span = fc_values.last().copied().unwrap_or(0.0) - fc_values.first().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    for t in t_axis.values().into_iter().filter(|&t| t >= t_lo - 1e-9 && t <= t_hi + 1e-9) {
        let cut = result.cut(Axis::T0, t)?;
        let idx: Vec<usize> = (0..cut.len())
            .filter(|&i| (cut.x[i] - center_ghz).abs() <= half_window_ghz)
            .collect();
        let fit = flanked_dip(&cut, &idx)
            .and_then(|s| notch_fit(&s).ok())
            .filter(|f| {
                (f.center_ghz - center_ghz).abs() <= half_window_ghz
                    && f.fwhm_mhz.is_finite()
                    && f.fwhm_mhz <= 1e3 * span
            });
        out.push(NotchWidth {
            t0_ns: t,
            fwhm_mhz: fit.map(|f| f.fwhm_mhz),
            center_ghz: fit.map(|f| f.center_ghz),
        });
    }
    Ok(out)
}

/// The most prominent dip among `idx`, extended over the whole cut from the
/// local maximum on its left to the one on its right.
fn flanked_dip(cut: &Series, idx: &[usize]) -> Option<Series> {
    let y: Vec<f64> = idx.iter().map(|&i| cut.y[i]).collect();
    let d = idx[bracketed_dip(&y)?];
    let mut lo = d;
    while lo > 0 && cut.y[lo - 1] >= cut.y[lo] {
        lo -= 1;
    }
    let mut hi = d;
    while hi + 1 < cut.len() && cut.y[hi + 1] >= cut.y[hi] {
        hi += 1;
    }
    if hi - lo + 1 < 5 {
        return None;
    }
    Series::new(Axis::Fc, cut.x[lo..=hi].to_vec(), cut.y[lo..=hi].to_vec()).ok()
}

/// True when every pulse length has a fitted notch and the widths strictly
/// decrease.
pub fn narrows_monotonically(widths: &[NotchWidth]) -> bool {
    let w: Option<Vec<f64>> = widths.iter().map(|n| n.fwhm_mhz).collect();
    match w {
        Some(w) if w.len() >= 2 => w.windows(2).all(|p| p[1] < p[0]),
        _ => false,
    }
}
