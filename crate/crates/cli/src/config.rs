//! TOML run configuration.
//!
//! Every key is optional; missing values come from the selected preset
//! (`preset = "fig2"` by default). Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use cpt_core::model::{rabi_from_mhz, Envelope, Lifetime};
use cpt_core::presets;
use cpt_core::{AxisSpec, MeasurementModel, SimContext, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::exit::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Fig2,
    Fig3,
}

impl Preset {
    pub fn context(self) -> SimContext {
        match self {
            Preset::Fig2 => presets::fig2_context(),
            Preset::Fig3 => presets::fig3_context(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<DecoherenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub f01_ghz: Option<f64>,
    pub f12_ghz: Option<f64>,
    /// Defaults to 2·f12 − f01.
    pub f23_ghz: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub fp_ghz: Option<f64>,
    pub fc_ghz: Option<f64>,
    /// Probe Rabi rate on 0↔1 as Ω/2π.
    pub omega_p_mhz: Option<f64>,
    /// Coupling Rabi rate on 1↔2 as Ω/2π.
    pub omega_c_mhz: Option<f64>,
    /// Same rates in rad/ns; exclusive with the MHz keys.
    pub omega_p01_rad_ns: Option<f64>,
    pub omega_c12_rad_ns: Option<f64>,
    pub rel_phase_rad: Option<f64>,
    pub t0_ns: Option<f64>,
    /// Linear rise/fall time; 0 or absent is a rectangular pulse.
    pub ramp_ns: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    pub t1_10_ns: Option<Lifetime<f64>>,
    pub t1_21_ns: Option<Lifetime<f64>>,
    pub t1_32_ns: Option<Lifetime<f64>>,
    pub tphi_01_ns: Option<Lifetime<f64>>,
    pub tphi_02_ns: Option<Lifetime<f64>>,
    pub tphi_12_ns: Option<Lifetime<f64>>,
    pub tphi_3x_ns: Option<Lifetime<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt_ns: Option<f64>,
    pub record_stride: Option<usize>,
    pub positivity_check: Option<bool>,
    pub positivity_tolerance: Option<f64>,
    pub n_phases: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis1: Option<AxisSpec>,
    pub axis2: Option<AxisSpec>,
    pub shot_noise: Option<bool>,
    pub rng_seed: Option<u64>,
    pub record_all_levels: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub fidelity: Option<f64>,
    pub background: Option<f64>,
    pub trials: Option<u64>,
}

/// A `key.path=value` override from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

impl std::str::FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("override `{s}` is not of the form key=value"))?;
        let path: Vec<String> = k.trim().split('.').map(str::to_string).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(format!("override key `{k}` has an empty component"));
        }
        Ok(Override {
            path,
            value: parse_value(v.trim()),
        })
    }
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}={}", self.path.join("."), self.value)
    }
}

/// Parses a TOML literal, falling back to a bare string.
fn parse_value(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn rate(mhz: Option<f64>, rad_ns: Option<f64>, name: &str) -> Result<Option<f64>, CliError> {
    match (mhz, rad_ns) {
        (Some(_), Some(_)) => Err(CliError::input(format!(
            "[drive] sets both {name}_mhz and its rad/ns form"
        ))),
        (Some(v), None) => Ok(Some(rabi_from_mhz(v))),
        (None, v) => Ok(v),
    }
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), String> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut t = table;
    for p in parents {
        let entry = t
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| format!("`{p}` is a value, not a section"))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read config `{}`: {e}", p.display())))?,
            None => String::new(),
        };
        let name = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
        Self::parse(&text, &name, overrides)
    }

    pub fn parse(text: &str, name: &str, overrides: &[Override]) -> Result<Self, CliError> {
        // Parse the file on its own first so diagnostics carry line numbers.
        let _: RunConfig = toml::from_str(text).map_err(|e| CliError::input(format!("{name}: {e}")))?;
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::input(format!("{name}: {e}")))?;
        for o in overrides {
            set_path(&mut table, &o.path, o.value.clone())
                .map_err(|e| CliError::input(format!("--set {o}: {e}")))?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::input(format!("--set overrides: {e}")))
    }

    pub fn preset(&self) -> Preset {
        self.preset.unwrap_or_default()
    }

    /// Full simulation context, validated.
    pub fn context(&self) -> Result<SimContext, CliError> {
        let mut c = self.preset().context();
        if let Some(d) = &self.device {
            if let Some(v) = d.f01_ghz {
                c.device.f01_ghz = v;
            }
            if let Some(v) = d.f12_ghz {
                c.device.f12_ghz = v;
            }
            if d.f23_ghz.is_some() {
                c.device.f23_ghz = d.f23_ghz;
            }
        }
        if let Some(d) = &self.drive {
            let dr = &mut c.drive;
            if let Some(v) = d.fp_ghz {
                dr.fp_ghz = v;
            }
            if let Some(v) = d.fc_ghz {
                dr.fc_ghz = v;
            }
            dr.omega_p01 = rate(d.omega_p_mhz, d.omega_p01_rad_ns, "omega_p")?.unwrap_or(dr.omega_p01);
            dr.omega_c12 = rate(d.omega_c_mhz, d.omega_c12_rad_ns, "omega_c")?.unwrap_or(dr.omega_c12);
            if let Some(v) = d.rel_phase_rad {
                dr.rel_phase = v;
            }
            if let Some(v) = d.t0_ns {
                dr.t0_ns = v;
            }
            if let Some(v) = d.ramp_ns {
                dr.envelope = if v > 0.0 {
                    Envelope::LinearRamp { ramp_ns: v }
                } else {
                    Envelope::Rectangular
                };
            }
        }
        if let Some(d) = &self.decoherence {
            let dc = &mut c.decoherence;
            let pick = |dst: &mut Lifetime<f64>, v: Option<Lifetime<f64>>| {
                if let Some(v) = v {
                    *dst = v;
                }
            };
            pick(&mut dc.t1_10_ns, d.t1_10_ns);
            pick(&mut dc.t1_21_ns, d.t1_21_ns);
            pick(&mut dc.tphi_01_ns, d.tphi_01_ns);
            pick(&mut dc.tphi_02_ns, d.tphi_02_ns);
            pick(&mut dc.tphi_12_ns, d.tphi_12_ns);
            if d.t1_32_ns.is_some() {
                dc.t1_32_ns = d.t1_32_ns;
            }
            if d.tphi_3x_ns.is_some() {
                dc.tphi_3x_ns = d.tphi_3x_ns;
            }
        }
        if let Some(i) = &self.integrator {
            let ic = &mut c.integrator;
            if let Some(v) = i.dt_ns {
                ic.dt_ns = v;
            }
            if let Some(v) = i.record_stride {
                ic.record_stride = v;
            }
            if let Some(v) = i.positivity_check {
                ic.positivity_check = v;
            }
            if let Some(v) = i.positivity_tolerance {
                ic.positivity_tolerance = v;
            }
            if let Some(v) = i.n_phases {
                c.n_phases = v;
            }
        }
        c.validate().map_err(CliError::from_core)?;
        Ok(c)
    }

    /// Measurement model if the section is present; defaults fill gaps.
    pub fn measurement(&self) -> Result<Option<MeasurementModel>, CliError> {
        let Some(m) = &self.measurement else {
            return Ok(None);
        };
        let d = MeasurementModel::default();
        let model = MeasurementModel {
            fidelity: m.fidelity.unwrap_or(d.fidelity),
            background: m.background.unwrap_or(d.background),
            trials: m.trials.unwrap_or(d.trials),
        };
        model.validate().map_err(CliError::from_core)?;
        Ok(Some(model))
    }

    /// Sweep specification; `axis1` is required.
    pub fn sweep(&self) -> Result<SweepSpec, CliError> {
        let s = self.sweep.clone().unwrap_or_default();
        let axis1 = s
            .axis1
            .ok_or_else(|| CliError::input("[sweep] needs at least `axis1`".to_string()))?;
        let mut spec = SweepSpec::new(axis1, s.axis2, self.context()?);
        spec.measurement = self.measurement()?;
        spec.shot_noise = s.shot_noise.unwrap_or(false);
        spec.rng_seed = s.rng_seed.unwrap_or(0);
        spec.record_all_levels = s.record_all_levels.unwrap_or(false);
        spec.validate().map_err(CliError::from_core)?;
        Ok(spec)
    }

    /// Config that reproduces `ctx` exactly when loaded back.
    pub fn echo(ctx: &SimContext, measurement: Option<&MeasurementModel>) -> Self {
        let d = &ctx.decoherence;
        RunConfig {
            preset: None,
            device: Some(DeviceSection {
                f01_ghz: Some(ctx.device.f01_ghz),
                f12_ghz: Some(ctx.device.f12_ghz),
                f23_ghz: ctx.device.f23_ghz,
            }),
            drive: Some(DriveSection {
                fp_ghz: Some(ctx.drive.fp_ghz),
                fc_ghz: Some(ctx.drive.fc_ghz),
                omega_p_mhz: None,
                omega_c_mhz: None,
                omega_p01_rad_ns: Some(ctx.drive.omega_p01),
                omega_c12_rad_ns: Some(ctx.drive.omega_c12),
                rel_phase_rad: Some(ctx.drive.rel_phase),
                t0_ns: Some(ctx.drive.t0_ns),
                ramp_ns: Some(match ctx.drive.envelope {
                    Envelope::Rectangular => 0.0,
                    Envelope::LinearRamp { ramp_ns } => ramp_ns,
                }),
            }),
            decoherence: Some(DecoherenceSection {
                t1_10_ns: Some(d.t1_10_ns),
                t1_21_ns: Some(d.t1_21_ns),
                t1_32_ns: d.t1_32_ns,
                tphi_01_ns: Some(d.tphi_01_ns),
                tphi_02_ns: Some(d.tphi_02_ns),
                tphi_12_ns: Some(d.tphi_12_ns),
                tphi_3x_ns: d.tphi_3x_ns,
            }),
            integrator: Some(IntegratorSection {
                dt_ns: Some(ctx.integrator.dt_ns),
                record_stride: Some(ctx.integrator.record_stride),
                positivity_check: Some(ctx.integrator.positivity_check),
                positivity_tolerance: Some(ctx.integrator.positivity_tolerance),
                n_phases: Some(ctx.n_phases),
            }),
            sweep: None,
            measurement: measurement.map(|m| MeasurementSection {
                fidelity: Some(m.fidelity),
                background: Some(m.background),
                trials: Some(m.trials),
            }),
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::input(format!("cannot serialize config: {e}")))
    }
}
