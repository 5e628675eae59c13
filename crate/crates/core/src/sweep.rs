//! Parameter sweeps over probe frequency, coupling frequency and pulse length.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::measurement::{apply_measurement, invert_measurement};
use crate::error::{Error, Result};
use crate::evolution::{phase_averaged_at_times, phase_averaged_with, DEFAULT_PHASES};
use crate::hamiltonian::HamiltonianConfig;
use crate::model::{DecoherenceParams, DensityMatrix4, DeviceParams, DriveParams, MeasurementModel};
use crate::IntegratorConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Version string embedded in every output.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Swept drive parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Probe frequency, GHz.
    Fp,
    /// Coupling frequency, GHz.
    Fc,
    /// Pulse duration, ns.
    T0,
}

impl Axis {
    pub fn column_name(self) -> &'static str {
        match self {
            Axis::Fp => "fp_ghz",
            Axis::Fc => "fc_ghz",
            Axis::T0 => "t0_ns",
        }
    }

    fn apply(self, drive: &mut DriveParams<f64>, value: f64) {
        match self {
            Axis::Fp => drive.fp_ghz = value,
            Axis::Fc => drive.fc_ghz = value,
            Axis::T0 => drive.t0_ns = value,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Fp => "fp",
            Axis::Fc => "fc",
            Axis::T0 => "t0",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp" | "fp_ghz" => Ok(Axis::Fp),
            "fc" | "fc_ghz" => Ok(Axis::Fc),
            "t0" | "t0_ns" => Ok(Axis::T0),
            _ => Err(Error::invalid("axis", format!("unknown axis `{s}` (expected fp, fc or t0)"))),
        }
    }
}

/// Evenly spaced grid along one axis, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: Axis,
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

impl AxisSpec {
    pub fn new(param: Axis, start: f64, stop: f64, n_points: usize) -> Result<Self> {
        let a = Self {
            param,
            start,
            stop,
            n_points,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::invalid("n_points", "an axis needs at least 2 points"));
        }
        if !(self.start < self.stop) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::invalid("start", "axis start must be below stop"));
        }
        if self.param == Axis::T0 && self.start < 0.0 {
            return Err(Error::invalid("start", "pulse durations cannot be negative"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.n_points - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            return self.stop;
        }
        self.start + (self.stop - self.start) * i as f64 / (self.n_points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.value(i)).collect()
    }

    /// Index of the grid line nearest to `x`; ties go to the lower index.
    pub fn nearest(&self, x: f64) -> Result<usize> {
        let half = 0.5 * self.step();
        if !(x >= self.start - half && x <= self.stop + half) {
            return Err(Error::Domain(format!(
                "{} = {x} lies outside the axis range [{}, {}]",
                self.param, self.start, self.stop
            )));
        }
        let pos = ((x - self.start) / self.step()).clamp(0.0, (self.n_points - 1) as f64);
        let lo = pos.floor() as usize;
        if lo + 1 < self.n_points && (self.value(lo + 1) - x).abs() < (x - self.value(lo)).abs() {
            Ok(lo + 1)
        } else {
            Ok(lo)
        }
    }
}

/// Everything a single phase-averaged simulation needs besides the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimContext {
    pub device: DeviceParams<f64>,
    pub drive: DriveParams<f64>,
    pub decoherence: DecoherenceParams<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_phases")]
    pub n_phases: usize,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig<f64>,
}

fn default_phases() -> usize {
    DEFAULT_PHASES
}

impl SimContext {
    pub fn new(
        device: DeviceParams<f64>,
        drive: DriveParams<f64>,
        decoherence: DecoherenceParams<f64>,
    ) -> Self {
        Self {
            device,
            drive,
            decoherence,
            integrator: IntegratorConfig::default(),
            n_phases: DEFAULT_PHASES,
            hamiltonian: HamiltonianConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.drive.validate()?;
        self.decoherence.validate()?;
        self.integrator.validate()?;
        if self.n_phases == 0 {
            return Err(Error::invalid("n_phases", "need at least one phase sample"));
        }
        Ok(())
    }

    /// Phase-averaged final populations at the context's own drive.
    pub fn final_populations(&self) -> Result<[f64; 4]> {
        let traj = phase_averaged_with(
            &DensityMatrix4::ground(),
            &self.device,
            &self.drive,
            &self.decoherence,
            &self.integrator,
            &self.hamiltonian,
            self.n_phases,
        )?;
        Ok(traj.final_populations())
    }

    /// Phase-averaged populations at each time in `times` (ascending).
    pub fn populations_at(&self, times: &[f64]) -> Result<Vec<[f64; 4]>> {
        let mut drive = self.drive;
        if let Some(&last) = times.last() {
            if last > 0.0 {
                drive.t0_ns = last;
            }
        }
        let states = phase_averaged_at_times(
            &DensityMatrix4::ground(),
            &self.device,
            &drive,
            &self.decoherence,
            &self.integrator,
            &self.hamiltonian,
            self.n_phases,
            times,
        )?;
        Ok(states.iter().map(|s| s.populations()).collect())
    }
}

/// A 1-D or 2-D grid of simulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    #[serde(default)]
    pub axis2: Option<AxisSpec>,
    pub context: SimContext,
    #[serde(default)]
    pub measurement: Option<MeasurementModel<f64>>,
    #[serde(default)]
    pub shot_noise: bool,
    #[serde(default)]
    pub rng_seed: u64,
    /// Also keep P₁ and P₃.
    #[serde(default)]
    pub record_all_levels: bool,
}

impl SweepSpec {
    pub fn new(axis1: AxisSpec, axis2: Option<AxisSpec>, context: SimContext) -> Self {
        Self {
            axis1,
            axis2,
            context,
            measurement: None,
            shot_noise: false,
            rng_seed: 0,
            record_all_levels: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a2) = &self.axis2 {
            a2.validate()?;
            if a2.param == self.axis1.param {
                return Err(Error::invalid("axis2", "axes must sweep different parameters"));
            }
        }
        if let Some(m) = &self.measurement {
            m.validate()?;
        }
        if self.shot_noise && self.measurement.is_none() {
            return Err(Error::invalid("shot_noise", "shot noise needs a measurement model"));
        }
        self.context.validate()
    }

    fn n2(&self) -> usize {
        self.axis2.map_or(1, |a| a.n_points)
    }

    fn t0_axis(&self) -> Option<u8> {
        if self.axis1.param == Axis::T0 {
            Some(1)
        } else if self.axis2.map_or(false, |a| a.param == Axis::T0) {
            Some(2)
        } else {
            None
        }
    }
}

/// Grid of phase-averaged populations, indexed `[axis1][axis2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema_version: u32,
    pub tool_version: String,
    pub spec: SweepSpec,
    pub axis1_values: Vec<f64>,
    pub axis2_values: Option<Vec<f64>>,
    pub p2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p3: Option<Vec<Vec<f64>>>,
    /// Not serialized, so that repeated runs give identical files.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// One-dimensional extract of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub axis: Axis,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Held parameter and its realized grid value, for cuts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<(Axis, f64)>,
}

impl Series {
    pub fn new(axis: Axis, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Format(format!(
                "series has {} abscissae but {} values",
                x.len(),
                y.len()
            )));
        }
        Ok(Self {
            axis,
            x,
            y,
            fixed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W, value_name: &str) -> Result<()> {
        let mut w = w;
        writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
        writeln!(w, "# tool={TOOL_VERSION}")?;
        if let Some((axis, v)) = self.fixed {
            writeln!(w, "# {}={v}", axis.column_name())?;
        }
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record([self.axis.column_name(), value_name])?;
        for (x, y) in self.x.iter().zip(&self.y) {
            cw.write_record([x.to_string(), y.to_string()])?;
        }
        cw.flush()?;
        Ok(())
    }
}

struct PointOut {
    p: [f64; 4],
}

fn annotate(e: Error, a1: f64, a2: Option<f64>) -> Error {
    Error::SweepPoint {
        axis1: a1,
        axis2: a2,
        source: Box::new(e),
    }
}

/// Evaluates every grid point of `spec`.
///
/// Points run in parallel; results, including shot noise (seeded per point
/// from `rng_seed` and the flat index), do not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let start = Instant::now();
    let v1 = spec.axis1.values();
    let v2 = spec.axis2.map(|a| a.values());
    let n1 = v1.len();
    let n2 = spec.n2();
    let coord = |i: usize, j: usize| (v1[i], v2.as_ref().map(|v| v[j]));

    let flat: Vec<PointOut> = match spec.t0_axis() {
        None => (0..n1 * n2)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n2, k % n2);
                let (a1, a2) = coord(i, j);
                let mut ctx = spec.context.clone();
                spec.axis1.param.apply(&mut ctx.drive, a1);
                if let (Some(ax), Some(x)) = (spec.axis2, a2) {
                    ax.param.apply(&mut ctx.drive, x);
                }
                ctx.drive.validate().map_err(|e| annotate(e, a1, a2))?;
                let p = ctx.final_populations().map_err(|e| annotate(e, a1, a2))?;
                Ok(PointOut { p })
            })
            .collect::<Result<_>>()?,
        Some(which) => {
            // One march per value of the other axis, sampled at every t0.
            let (times, others, other_axis) = if which == 1 {
                (v1.clone(), v2.clone(), spec.axis2.map(|a| a.param))
            } else {
                (v2.clone().unwrap_or_default(), Some(v1.clone()), Some(spec.axis1.param))
            };
            let lines: Vec<f64> = others.clone().unwrap_or_else(|| vec![f64::NAN]);
            let per_line: Vec<Vec<[f64; 4]>> = lines
                .par_iter()
                .map(|&x| {
                    let mut ctx = spec.context.clone();
                    if let Some(ax) = other_axis {
                        ax.apply(&mut ctx.drive, x);
                    }
                    let tag = |e: Error| {
                        if which == 1 {
                            annotate(e, times[0], others.as_ref().map(|_| x))
                        } else {
                            annotate(e, x, Some(times[0]))
                        }
                    };
                    ctx.drive.t0_ns = times[times.len() - 1];
                    ctx.drive.validate().map_err(tag)?;
                    ctx.populations_at(&times).map_err(tag)
                })
                .collect::<Result<_>>()?;
            (0..n1 * n2)
                .map(|k| {
                    let (i, j) = (k / n2, k % n2);
                    let p = if which == 1 {
                        per_line[if others.is_some() { j } else { 0 }][i]
                    } else {
                        per_line[i][j]
                    };
                    PointOut { p }
                })
                .collect()
        }
    };

    let mut p2 = vec![vec![0.0; n2]; n1];
    let mut p1 = vec![vec![0.0; n2]; n1];
    let mut p3 = vec![vec![0.0; n2]; n1];
    for (k, out) in flat.iter().enumerate() {
        let (i, j) = (k / n2, k % n2);
        p2[i][j] = out.p[2].clamp(0.0, 1.0);
        p1[i][j] = out.p[1].clamp(0.0, 1.0);
        p3[i][j] = out.p[3].clamp(0.0, 1.0);
    }
    if let (Some(m), true) = (&spec.measurement, spec.shot_noise) {
        add_shot_noise(&mut p2, m, spec.rng_seed).map_err(|(k, e)| {
            let (a1, a2) = coord(k / n2, k % n2);
            annotate(e, a1, a2)
        })?;
    }

    Ok(SweepResult {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        spec: spec.clone(),
        axis1_values: v1,
        axis2_values: v2,
        p2,
        p1: spec.record_all_levels.then_some(p1),
        p3: spec.record_all_levels.then_some(p3),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Replaces each P₂ by a simulated readout: binomial counts through `m`,
/// inverted back to a population. Point k (row-major) draws from ChaCha
/// stream k of `seed`.
fn add_shot_noise(p2: &mut [Vec<f64>], m: &MeasurementModel<f64>, seed: u64) -> std::result::Result<(), (usize, Error)> {
    let mut k = 0;
    for row in p2.iter_mut() {
        for v in row.iter_mut() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let observed = apply_measurement(*v, m, &mut rng).map_err(|e| (k, e))?;
            *v = invert_measurement(observed, m);
            k += 1;
        }
    }
    Ok(())
}

impl SweepResult {
    /// Copy with measurement noise applied to P₂, as [`run_sweep`] would
    /// produce with `measurement` set and `shot_noise` on.
    pub fn with_shot_noise(&self, m: &MeasurementModel<f64>, seed: u64) -> Result<SweepResult> {
        m.validate()?;
        let mut out = self.clone();
        add_shot_noise(&mut out.p2, m, seed).map_err(|(_, e)| e)?;
        out.spec.measurement = Some(*m);
        out.spec.shot_noise = true;
        out.spec.rng_seed = seed;
        Ok(out)
    }

    /// Largest recorded P₃, if it was recorded.
    pub fn max_p3(&self) -> Option<f64> {
        self.p3
            .as_ref()
            .map(|m| m.iter().flatten().copied().fold(0.0, f64::max))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.p2[i][j]
    }

    /// Series along the swept axis other than `axis`, at the grid line of
    /// `axis` nearest to `value`.
    pub fn cut(&self, axis: Axis, value: f64) -> Result<Series> {
        let (a2, v2) = match (&self.spec.axis2, &self.axis2_values) {
            (Some(a), Some(v)) => (a, v),
            _ => {
                if axis == self.spec.axis1.param {
                    return Err(Error::Domain("cannot cut a 1-D sweep along its only axis".into()));
                }
                return Err(Error::Domain(format!("axis {axis} is not swept")));
            }
        };
        if axis == self.spec.axis1.param {
            let i = self.spec.axis1.nearest(value)?;
            Ok(Series {
                axis: a2.param,
                x: v2.clone(),
                y: self.p2[i].clone(),
                fixed: Some((axis, self.axis1_values[i])),
            })
        } else if axis == a2.param {
            let j = a2.nearest(value)?;
            Ok(Series {
                axis: self.spec.axis1.param,
                x: self.axis1_values.clone(),
                y: self.p2.iter().map(|row| row[j]).collect(),
                fixed: Some((axis, v2[j])),
            })
        } else {
            Err(Error::Domain(format!("axis {axis} is not swept")))
        }
    }

    /// The whole P₂ grid as a series, for 1-D sweeps.
    pub fn series(&self) -> Result<Series> {
        if self.spec.axis2.is_some() {
            return Err(Error::Domain("sweep is 2-D; take a cut instead".into()));
        }
        Ok(Series {
            axis: self.spec.axis1.param,
            x: self.axis1_values.clone(),
            y: self.p2.iter().map(|r| r[0]).collect(),
            fixed: None,
        })
    }

    /// Long-format CSV: one row per grid point, `#` metadata lines first.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = w;
        writeln!(w, "# schema_version={}", self.schema_version)?;
        writeln!(w, "# tool={}", self.tool_version)?;
        writeln!(w, "# rng_seed={}", self.spec.rng_seed)?;
        writeln!(w, "# spec={}", serde_json::to_string(&self.spec)?)?;
        let mut cw = csv::Writer::from_writer(w);
        let mut header = vec![self.spec.axis1.param.column_name()];
        if let Some(a) = &self.spec.axis2 {
            header.push(a.param.column_name());
        }
        header.push("p2");
        if self.p1.is_some() {
            header.extend(["p1", "p3"]);
        }
        cw.write_record(&header)?;
        for (i, x1) in self.axis1_values.iter().enumerate() {
            for j in 0..self.p2[i].len() {
                let mut row = vec![x1.to_string()];
                if let Some(v2) = &self.axis2_values {
                    row.push(v2[j].to_string());
                }
                row.push(self.p2[i][j].to_string());
                if let (Some(p1), Some(p3)) = (&self.p1, &self.p3) {
                    row.push(p1[i][j].to_string());
                    row.push(p3[i][j].to_string());
                }
                cw.write_record(&row)?;
            }
        }
        cw.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                r.schema_version
            )));
        }
        Ok(r)
    }
}
