//! Position of the CPT trench in a probe × coupling frequency map.

use serde::{Deserialize, Serialize};

use super::contrast::bracketed_dip;
use crate::error::{Error, Result};
use crate::sweep::{Axis, SweepResult};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrenchColumn {
    pub fp_ghz: f64,
    /// Reference line fc(fp).
    pub line_fc_ghz: f64,
    /// Most prominent interior P₂ minimum along fc, if the column has one.
    pub dip_fc_ghz: Option<f64>,
    /// (dip − line) in units of the fc grid step.
    pub offset_steps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrenchReport {
    pub fc_step_ghz: f64,
    /// Columns whose reference line falls inside the fc range.
    pub columns: Vec<TrenchColumn>,
    pub n_within_one_step: usize,
    pub fraction_within_one_step: f64,
    /// Mean (dip − line) over columns with a dip, GHz.
    pub mean_offset_ghz: f64,
}

/// Compares each fixed-fp column's P₂ minimum with the line fc = 2fp − f01.
pub fn trench_locus(result: &SweepResult, f01_ghz: f64) -> Result<TrenchReport> {
    trench_locus_with(result, |fp| 2.0 * fp - f01_ghz)
}

/// [`trench_locus`] against an arbitrary reference line fc(fp).
pub fn trench_locus_with<F: Fn(f64) -> f64>(result: &SweepResult, line: F) -> Result<TrenchReport> {
    let (a1, a2) = match (&result.spec.axis2, &result.axis2_values) {
        (Some(a2), Some(_)) => (result.spec.axis1, *a2),
        _ => return Err(Error::Domain("trench analysis needs a 2-D fp × fc sweep".into())),
    };
    let fp_first = match (a1.param, a2.param) {
        (Axis::Fp, Axis::Fc) => true,
        (Axis::Fc, Axis::Fp) => false,
        _ => return Err(Error::Domain("trench analysis needs fp and fc axes".into())),
    };
    let (fp_axis, fc_axis) = if fp_first { (a1, a2) } else { (a2, a1) };
    let fc_values = fc_axis.values();
    let step = fc_axis.step();
    let mut columns = Vec::new();
    for (i, fp) in fp_axis.values().into_iter().enumerate() {
        let l = line(fp);
        if !(l >= fc_axis.start && l <= fc_axis.stop) {
            continue;
        }
        let col: Vec<f64> = (0..fc_values.len())
            .map(|j| if fp_first { result.p2[i][j] } else { result.p2[j][i] })
            .collect();
        let dip = bracketed_dip(&col).map(|j| fc_values[j]);
        columns.push(TrenchColumn {
            fp_ghz: fp,
            line_fc_ghz: l,
            dip_fc_ghz: dip,
            offset_steps: dip.map(|d| (d - l) / step),
        });
    }
    if columns.is_empty() {
        return Err(Error::Domain("the reference line does not cross the grid".into()));
    }
    let n_within = columns
        .iter()
        .filter(|c| c.offset_steps.map_or(false, |o| o.abs() <= 1.0 + 1e-9))
        .count();
    let offsets: Vec<f64> = columns
        .iter()
        .filter_map(|c| c.dip_fc_ghz.map(|d| d - c.line_fc_ghz))
        .collect();
    let mean_offset_ghz = if offsets.is_empty() {
        f64::NAN
    } else {
        offsets.iter().sum::<f64>() / offsets.len() as f64
    };
    Ok(TrenchReport {
        fc_step_ghz: step,
        fraction_within_one_step: n_within as f64 / columns.len() as f64,
        n_within_one_step: n_within,
        columns,
        mean_offset_ghz,
    })
}
