//! Built-in figure pipelines: dataset, cuts and a summary of headline scalars.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cpt_core::analysis::{
    at_only_contrast, at_only_spread, default_tphi01_grid, linewidth_fit, narrows_monotonically, notch_widths,
    parabolic_contrast, sensitivity_curve, suppression_vs_time, trench_locus, trench_locus_with, AtSpread, Contrast,
    LineFit, NotchWidth, Suppression, TrenchReport,
};
use cpt_core::hamiltonian::cpt_resonance_fc;
use cpt_core::model::{angular_to_mhz, Lifetime};
use cpt_core::presets;
use cpt_core::sweep::{SCHEMA_VERSION, TOOL_VERSION};
use cpt_core::{run_sweep, Axis, MeasurementModel, Series, SimContext, SweepResult, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::exit::CliError;
use crate::output::{csv_header, ensure_dir, write_bytes, write_json, write_with};

/// Half-width of the fc window used for notch fits, GHz.
pub const NOTCH_HALF_WINDOW: f64 = 0.06;
/// Pulse lengths over which the notch width is tracked, ns.
pub const NOTCH_T0_RANGE: (f64, f64) = (5.0, 20.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig4Inset,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig4Inset => "fig4-inset",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            "fig4-inset" | "fig4_inset" => Ok(Figure::Fig4Inset),
            _ => Err(format!("unknown figure `{s}` (expected fig2, fig3, fig4 or fig4-inset)")),
        }
    }
}

/// Knobs shared by every pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub seed: u64,
    pub dt_ns: Option<f64>,
    pub n_phases: Option<usize>,
    pub measurement: MeasurementModel,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            seed: 0,
            dt_ns: None,
            n_phases: None,
            measurement: MeasurementModel::default(),
        }
    }
}

impl Options {
    fn tune(&self, ctx: &mut SimContext) {
        if let Some(dt) = self.dt_ns {
            ctx.integrator.dt_ns = dt;
        }
        if let Some(n) = self.n_phases {
            ctx.n_phases = n;
        }
    }
}

/// Summary file layout shared by all figures.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary<T> {
    pub schema_version: u32,
    pub tool_version: String,
    pub figure: String,
    pub rng_seed: u64,
    pub options: Options,
    pub summary: T,
}

fn envelope<T>(fig: Figure, opts: &Options, summary: T) -> Summary<T> {
    Summary {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        figure: fig.name().to_string(),
        rng_seed: opts.seed,
        options: opts.clone(),
        summary,
    }
}

/// A fallible headline value: either the result or the reason it is missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Failed(String),
}

impl<T> Outcome<T> {
    fn from(r: cpt_core::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => {
                log::warn!("{e}");
                Outcome::Failed(e.to_string())
            }
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }
}

fn timed_sweep(spec: &SweepSpec, what: &str) -> Result<SweepResult, CliError> {
    let start = Instant::now();
    let r = run_sweep(spec)?;
    log::info!("{what}: {:.1} s", start.elapsed().as_secs_f64());
    Ok(r)
}

fn write_sweep(dir: &Path, stem: &str, r: &SweepResult) -> Result<(), CliError> {
    write_with(dir, &format!("{stem}.csv"), |w| r.write_csv(w))?;
    write_bytes(dir, &format!("{stem}.json"), (r.to_json()? + "\n").as_bytes())?;
    Ok(())
}

fn write_series<P: Serialize>(
    dir: &Path,
    name: &str,
    s: &Series,
    value: &str,
    seed: u64,
    params: &P,
) -> Result<(), CliError> {
    write_with(dir, name, |w| {
        csv_header(w, seed, params)?;
        if let Some((axis, v)) = s.fixed {
            writeln!(w, "# {}={v}", axis.column_name())?;
        }
        writeln!(w, "{},{value}", s.axis.column_name())?;
        for (x, y) in s.x.iter().zip(&s.y) {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    })?;
    Ok(())
}

fn mhz(rate_per_ns: f64) -> f64 {
    angular_to_mhz(rate_per_ns)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig2Summary {
    /// Coupling frequency of the light-shifted Raman resonance at the preset fp.
    pub resonance_fc_ghz: f64,
    pub on_fc_ghz: f64,
    pub off_fc_ghz: f64,
    pub contrast: Outcome<Contrast>,
    pub linewidth: Outcome<LineFit>,
    /// γ02/2π from the preset T1 and Tφ02, MHz.
    pub gamma_02_mhz: f64,
    pub gamma_01_mhz: f64,
    pub omega_c_mhz: f64,
    pub max_p3: f64,
    /// Per-column minima against 2fp − fc = f01.
    pub trench: Outcome<TrenchReport>,
    /// Per-column minima against the light-shifted resonance.
    pub trench_light_shifted: Outcome<TrenchReport>,
    pub at_only_contrast: Outcome<f64>,
    /// AT-only contrast at Tφ02 = 5, 6, 7 ns.
    pub at_only_spread: Outcome<AtSpread>,
    pub params: SweepSpec,
}

/// fp × fc map, resonant/off-resonant cuts, contrast and linewidth.
pub fn fig2(dir: &Path, opts: &Options) -> Result<Summary<Fig2Summary>, CliError> {
    ensure_dir(dir)?;
    let mut spec = presets::fig2_sweep();
    opts.tune(&mut spec.context);
    spec.rng_seed = opts.seed;
    let r = timed_sweep(&spec, "fig2 sweep")?;
    write_sweep(dir, "fig2_sweep", &r)?;
    let measured = r.with_shot_noise(&opts.measurement, opts.seed)?;
    write_sweep(dir, "fig2_measured", &measured)?;

    let ctx = &spec.context;
    let on = r.cut(Axis::Fc, ctx.device.f12_ghz)?;
    let off = r.cut(Axis::Fc, presets::FIG2_OFF_FC)?;
    write_series(dir, "fig2_cut_on.csv", &on, "p2", opts.seed, &spec)?;
    write_series(dir, "fig2_cut_off.csv", &off, "p2", opts.seed, &spec)?;

    let dec = &ctx.decoherence;
    let (g01, g02, oc) = (mhz(dec.gamma_01()), mhz(dec.gamma_02()), angular_to_mhz(ctx.drive.omega_c12));
    let device = ctx.device;
    let hcfg = ctx.hamiltonian;
    let drive = ctx.drive;
    let shifted = move |fp: f64| {
        let mut d = drive;
        d.fp_ghz = fp;
        cpt_resonance_fc(&device, &d, &hcfg)
    };
    let summary = Fig2Summary {
        resonance_fc_ghz: shifted(ctx.drive.fp_ghz),
        on_fc_ghz: on.fixed.map_or(f64::NAN, |f| f.1),
        off_fc_ghz: off.fixed.map_or(f64::NAN, |f| f.1),
        contrast: Outcome::from(parabolic_contrast(&on, &off)),
        linewidth: Outcome::from(linewidth_fit(&off)),
        gamma_02_mhz: g02,
        gamma_01_mhz: g01,
        omega_c_mhz: oc,
        max_p3: r.max_p3().unwrap_or(f64::NAN),
        trench: Outcome::from(trench_locus(&r, ctx.device.f01_ghz)),
        trench_light_shifted: Outcome::from(trench_locus_with(&r, shifted)),
        at_only_contrast: Outcome::from(at_only_contrast(g01, g02, oc)),
        at_only_spread: Outcome::from(at_only_spread(dec, oc, &[5.0, 6.0, 7.0])),
        params: spec.clone(),
    };
    let s = envelope(Figure::Fig2, opts, summary);
    write_json(dir, "fig2_summary.json", &s)?;
    Ok(s)
}

/// Suppression and notch widths measured at one choice of resonance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeDynamics {
    pub on_fc_ghz: f64,
    pub off_fc_ghz: f64,
    pub suppression: Outcome<Suppression>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig3Summary {
    pub resonance_fc_ghz: f64,
    /// On = light-shifted resonance, off = 80 MHz below it.
    pub light_shifted: TimeDynamics,
    /// On = f12, off = f12 − 80 MHz.
    pub literal_f12: TimeDynamics,
    pub notch_widths: Outcome<Vec<NotchWidth>>,
    pub notch_narrows_monotonically: bool,
    pub max_p3: f64,
    pub params: SweepSpec,
}

/// fc × t0 map and its time-domain headline numbers.
pub fn fig3(dir: &Path, opts: &Options) -> Result<Summary<Fig3Summary>, CliError> {
    ensure_dir(dir)?;
    let mut spec = presets::fig3_sweep();
    opts.tune(&mut spec.context);
    spec.rng_seed = opts.seed;
    let r = timed_sweep(&spec, "fig3 sweep")?;
    write_sweep(dir, "fig3_sweep", &r)?;
    let ctx = &spec.context;
    let res = cpt_resonance_fc(&ctx.device, &ctx.drive, &ctx.hamiltonian);

    let dynamics = |on_fc: f64, tag: &str| -> Result<TimeDynamics, CliError> {
        let on = r.cut(Axis::Fc, on_fc)?;
        let off = r.cut(Axis::Fc, on_fc - presets::FIG4_OFF_DETUNING)?;
        write_series(dir, &format!("fig3_trace_on_{tag}.csv"), &on, "p2", opts.seed, &spec)?;
        write_series(dir, &format!("fig3_trace_off_{tag}.csv"), &off, "p2", opts.seed, &spec)?;
        Ok(TimeDynamics {
            on_fc_ghz: on.fixed.map_or(f64::NAN, |f| f.1),
            off_fc_ghz: off.fixed.map_or(f64::NAN, |f| f.1),
            suppression: Outcome::from(suppression_vs_time(&on, &off)),
        })
    };
    let light_shifted = dynamics(res, "resonance")?;
    let literal_f12 = dynamics(ctx.device.f12_ghz, "f12")?;
    let widths = notch_widths(&r, res, NOTCH_HALF_WINDOW, NOTCH_T0_RANGE.0, NOTCH_T0_RANGE.1);
    let narrows = widths.as_ref().map_or(false, |w| narrows_monotonically(w));
    let summary = Fig3Summary {
        resonance_fc_ghz: res,
        light_shifted,
        literal_f12,
        notch_widths: Outcome::from(widths),
        notch_narrows_monotonically: narrows,
        max_p3: r.max_p3().unwrap_or(f64::NAN),
        params: spec.clone(),
    };
    let s = envelope(Figure::Fig3, opts, summary);
    write_json(dir, "fig3_summary.json", &s)?;
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig4Trace {
    pub tphi_01_ns: f64,
    pub suppression: Outcome<Suppression>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fig4Summary {
    pub on_fc_ghz: f64,
    pub off_fc_ghz: f64,
    pub traces: Vec<Fig4Trace>,
    pub max_p3: f64,
    pub params: SimContext,
}

/// On/off-resonance time traces for several Tφ01.
pub fn fig4(dir: &Path, opts: &Options) -> Result<Summary<Fig4Summary>, CliError> {
    ensure_dir(dir)?;
    let mut base = presets::fig3_context();
    opts.tune(&mut base);
    let on_fc = cpt_resonance_fc(&base.device, &base.drive, &base.hamiltonian);
    let off_fc = on_fc - presets::FIG4_OFF_DETUNING;
    let mut columns: Vec<(String, Series)> = Vec::new();
    let mut traces = Vec::new();
    let mut max_p3: f64 = 0.0;
    for &tphi in &presets::FIG4_TPHI01 {
        let mut pair = Vec::new();
        for (fc, tag) in [(on_fc, "on"), (off_fc, "off")] {
            let mut spec = presets::fig4_trace(fc, tphi);
            opts.tune(&mut spec.context);
            spec.rng_seed = opts.seed;
            let r = timed_sweep(&spec, &format!("fig4 {tag} trace, tphi_01 {tphi} ns"))?;
            max_p3 = max_p3.max(r.max_p3().unwrap_or(0.0));
            let s = r.series()?;
            columns.push((format!("p2_{tag}_tphi01_{tphi}ns"), s.clone()));
            pair.push(s);
        }
        traces.push(Fig4Trace {
            tphi_01_ns: tphi,
            suppression: Outcome::from(suppression_vs_time(&pair[0], &pair[1])),
        });
    }
    write_with(dir, "fig4_traces.csv", |w| {
        csv_header(w, opts.seed, &base)?;
        writeln!(w, "# on_fc_ghz={on_fc}")?;
        writeln!(w, "# off_fc_ghz={off_fc}")?;
        let names: Vec<&str> = columns.iter().map(|c| c.0.as_str()).collect();
        writeln!(w, "t0_ns,{}", names.join(","))?;
        for k in 0..columns[0].1.len() {
            let vals: Vec<String> = columns.iter().map(|c| c.1.y[k].to_string()).collect();
            writeln!(w, "{},{}", columns[0].1.x[k], vals.join(","))?;
        }
        Ok(())
    })?;
    let summary = Fig4Summary {
        on_fc_ghz: on_fc,
        off_fc_ghz: off_fc,
        traces,
        max_p3,
        params: base,
    };
    let s = envelope(Figure::Fig4, opts, summary);
    write_json(dir, "fig4_summary.json", &s)?;
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InsetSummary {
    pub t0_ns: f64,
    pub resonance_fc_ghz: f64,
    /// (Tφ01, P₂) at the light-shifted resonance.
    pub curve: Vec<(Lifetime<f64>, f64)>,
    /// Same at fc = f12.
    pub curve_f12: Vec<(Lifetime<f64>, f64)>,
    /// P₂ at the infinite-Tφ01 end of each curve.
    pub asymptote: f64,
    pub asymptote_f12: f64,
    pub monotone_nonincreasing: bool,
    pub monotone_nonincreasing_f12: bool,
    /// P₂ 80 MHz below the resonance with the preset Tφ01.
    pub off_resonant_p2: f64,
    pub params: SimContext,
}

fn nonincreasing(c: &[(Lifetime<f64>, f64)]) -> bool {
    c.windows(2).all(|w| w[1].1 <= w[0].1)
}

/// P₂ after a 40 ns pulse against Tφ01.
pub fn fig4_inset(dir: &Path, opts: &Options) -> Result<Summary<InsetSummary>, CliError> {
    ensure_dir(dir)?;
    let mut ctx = presets::fig3_context();
    opts.tune(&mut ctx);
    let t0 = presets::INSET_T0;
    let res = cpt_resonance_fc(&ctx.device, &ctx.drive, &ctx.hamiltonian);
    let grid = default_tphi01_grid();
    let at = |fc: f64| -> Result<Vec<(Lifetime<f64>, f64)>, CliError> {
        let mut c = ctx.clone();
        c.drive.fc_ghz = fc;
        Ok(sensitivity_curve(&c, t0, &grid)?)
    };
    let curve = at(res)?;
    let curve_f12 = at(ctx.device.f12_ghz)?;
    let mut off = ctx.clone();
    off.drive.fc_ghz = res - presets::FIG4_OFF_DETUNING;
    off.drive.t0_ns = t0;
    let off_resonant_p2 = off.final_populations()?[2];

    write_with(dir, "fig4_inset.csv", |w| {
        csv_header(w, opts.seed, &ctx)?;
        writeln!(w, "# t0_ns={t0}")?;
        writeln!(w, "# resonance_fc_ghz={res}")?;
        writeln!(w, "tphi01_ns,p2_resonance,p2_f12")?;
        for (a, b) in curve.iter().zip(&curve_f12) {
            let t = a.0.as_ns().map_or_else(|| "inf".to_string(), |v| v.to_string());
            writeln!(w, "{t},{},{}", a.1, b.1)?;
        }
        Ok(())
    })?;
    let summary = InsetSummary {
        t0_ns: t0,
        resonance_fc_ghz: res,
        asymptote: curve.last().map_or(f64::NAN, |p| p.1),
        asymptote_f12: curve_f12.last().map_or(f64::NAN, |p| p.1),
        monotone_nonincreasing: nonincreasing(&curve),
        monotone_nonincreasing_f12: nonincreasing(&curve_f12),
        curve,
        curve_f12,
        off_resonant_p2,
        params: ctx,
    };
    let s = envelope(Figure::Fig4Inset, opts, summary);
    write_json(dir, "fig4_inset_summary.json", &s)?;
    Ok(s)
}
