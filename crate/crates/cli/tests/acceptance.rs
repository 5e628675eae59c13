//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line.
//!
//! Figure data come from the `cptsim` binary so that the pipelines are
//! exercised end to end; fig2 is generated once and shared.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use cpt_core::analysis::{
    apply_measurement, at_only_contrast, fit_dephasing, invert_measurement, sensitivity_curve, DephasingParam,
    FitOptions,
};
use cpt_core::evolution::{propagate, propagate_with, IntegratorConfig};
use cpt_core::hamiltonian::{cpt_resonance_fc, HamiltonianConfig};
use cpt_core::model::{rabi_from_mhz, DecoherenceParams, DensityMatrix4, DeviceParams, DriveParams, Lifetime};
use cpt_core::presets::{fig2_context, fig3_context};
use cpt_core::{Axis, MeasurementModel, Series, SimContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn out_root() -> PathBuf {
    let d = std::env::temp_dir().join(format!("cptsim-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn reproduce(figure: &str, jobs: usize, tag: &str) -> PathBuf {
    let dir = out_root().join(format!("{figure}-{tag}"));
    let status = Command::new(env!("CARGO_BIN_EXE_cptsim"))
        .args(["reproduce", figure, "--seed", "7", "--jobs", &jobs.to_string(), "--out"])
        .arg(&dir)
        .env("RUST_LOG", "info")
        .status()
        .expect("run cptsim");
    assert!(status.success(), "cptsim reproduce {figure} failed");
    dir
}

fn summary(dir: &Path, file: &str) -> Value {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join(file)).unwrap()).unwrap();
    v["summary"].clone()
}

static FIG2: OnceLock<(PathBuf, f64)> = OnceLock::new();
static FIG3: OnceLock<PathBuf> = OnceLock::new();
static FIG4: OnceLock<PathBuf> = OnceLock::new();
static INSET: OnceLock<PathBuf> = OnceLock::new();

fn fig2() -> &'static (PathBuf, f64) {
    FIG2.get_or_init(|| {
        let start = std::time::Instant::now();
        let d = reproduce("fig2", 1, "jobs1");
        (d, start.elapsed().as_secs_f64())
    })
}

fn fig2_summary() -> Value {
    summary(&fig2().0, "fig2_summary.json")
}

fn fig3() -> &'static PathBuf {
    FIG3.get_or_init(|| reproduce("fig3", 1, "a"))
}

fn fig4() -> &'static PathBuf {
    FIG4.get_or_init(|| reproduce("fig4", 1, "a"))
}

fn inset() -> &'static PathBuf {
    INSET.get_or_init(|| reproduce("fig4-inset", 1, "a"))
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

#[test]
fn c01_cpt_contrast() {
    let s = fig2_summary();
    let c = s["contrast"]["ok"]["value"].as_f64().unwrap_or(f64::NAN);
    let u = s["contrast"]["ok"]["uncertainty"].as_f64().unwrap_or(f64::NAN);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    report(
        1,
        "CPT contrast",
        within(c, 0.52, 0.05),
        format!(
            "contrast {c:.4} ± {u:.4} between fc = {:.4} and {:.4} GHz (target 0.52 ± 0.05); 61×61 grid took {:.0} s on 1 worker ({cores} core(s) available)",
            s["on_fc_ghz"].as_f64().unwrap(),
            s["off_fc_ghz"].as_f64().unwrap(),
            fig2().1
        ),
    );
}

#[test]
fn c02_probe_linewidth() {
    let s = fig2_summary();
    let fwhm = s["linewidth"]["ok"]["fwhm_mhz"].as_f64().unwrap_or(f64::NAN);
    let g02 = s["gamma_02_mhz"].as_f64().unwrap();
    let analytic = (1.0 / (2.0 * 77.0) + 1.0 / 6.0) / std::f64::consts::TAU * 1e3;
    report(
        2,
        "probe linewidth",
        within(fwhm, 40.0, 6.0) && within(g02, 27.5, 0.3) && within(analytic, 27.5, 0.3),
        format!("off-resonant FWHM {fwhm:.2} MHz (40 ± 6); γ02/2π {g02:.3} MHz, closed form {analytic:.3} MHz (27.5 ± 0.3)"),
    );
}

#[test]
fn c03_trench_geometry() {
    let s = fig2_summary();
    let t = &s["trench"]["ok"];
    let f = t["fraction_within_one_step"].as_f64().unwrap_or(0.0);
    let ls = &s["trench_light_shifted"]["ok"];
    report(
        3,
        "trench geometry",
        f >= 0.9,
        format!(
            "{}/{} columns within one fc step of 2fp − fc = f01 ({:.1}%, need ≥ 90%); mean offset {:.1} MHz; against the light-shifted line {:.1}%",
            t["n_within_one_step"],
            t["columns"].as_array().map_or(0, |c| c.len()),
            100.0 * f,
            1e3 * t["mean_offset_ghz"].as_f64().unwrap_or(f64::NAN),
            100.0 * ls["fraction_within_one_step"].as_f64().unwrap_or(f64::NAN),
        ),
    );
}

#[test]
fn c04_time_dynamics() {
    let s = summary(fig3(), "fig3_summary.json");
    let sup = &s["light_shifted"]["suppression"]["ok"];
    let (m, t) = (sup["max"].as_f64().unwrap_or(f64::NAN), sup["t0_at_max_ns"].as_f64().unwrap_or(f64::NAN));
    let lit = &s["literal_f12"]["suppression"]["ok"];
    let narrows = s["notch_narrows_monotonically"].as_bool().unwrap_or(false);
    let widths: Vec<String> = s["notch_widths"]["ok"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|w| match w["fwhm_mhz"].as_f64() {
                    Some(v) => format!("{}:{v:.0}", w["t0_ns"]),
                    None => format!("{}:-", w["t0_ns"]),
                })
                .collect()
        })
        .unwrap_or_default();
    report(
        4,
        "time dynamics",
        within(m, 0.55, 0.06) && within(t, 20.0, 5.0) && narrows,
        format!(
            "max suppression {m:.3} at t0 = {t} ns at fc = {:.4} GHz (target 0.55 ± 0.06 at 20 ± 5 ns); at fc = f12: {:.3} at {} ns; notch FWHM by t0 [ns:MHz] {}; narrows monotonically: {narrows}",
            s["light_shifted"]["on_fc_ghz"].as_f64().unwrap(),
            lit["max"].as_f64().unwrap_or(f64::NAN),
            lit["t0_at_max_ns"],
            widths.join(" ")
        ),
    );
}

#[test]
fn c05_level3_ceiling() {
    let p2 = fig2_summary()["max_p3"].as_f64().unwrap();
    let p3 = summary(fig3(), "fig3_summary.json")["max_p3"].as_f64().unwrap();
    let p4 = summary(fig4(), "fig4_summary.json")["max_p3"].as_f64().unwrap();
    let worst = p2.max(p3).max(p4);
    report(
        5,
        "level-3 ceiling",
        worst < 0.005,
        format!("max P3: fig2 {:.3}%, fig3 {:.3}%, fig4 {:.3}% (need < 0.5%)", 100.0 * p2, 100.0 * p3, 100.0 * p4),
    );
}

#[test]
fn c06_sensitivity_asymptote() {
    let s = summary(inset(), "fig4_inset_summary.json");
    let a = s["asymptote"].as_f64().unwrap();
    let mono = s["monotone_nonincreasing"].as_bool().unwrap();
    let curve: Vec<String> = s["curve"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| format!("{}:{:.3}", p[0], p[1].as_f64().unwrap()))
        .collect();
    report(
        6,
        "sensitivity asymptote",
        within(a, 0.05, 0.015) && mono,
        format!(
            "P2(40 ns, Tφ01 → ∞) = {a:.4} (0.05 ± 0.015); monotone nonincreasing: {mono}; curve [Tφ01:P2] {}; at fc = f12 the asymptote is {:.4}",
            curve.join(" "),
            s["asymptote_f12"].as_f64().unwrap()
        ),
    );
}

#[test]
fn c07_at_vs_cpt() {
    let at = at_only_contrast(6.0, 27.5, 32.0).unwrap();
    let full = fig2_summary()["contrast"]["ok"]["value"].as_f64().unwrap_or(f64::NAN);
    report(
        7,
        "AT vs CPT discrimination",
        (0.04..=0.30).contains(&at) && at < full,
        format!("AT-only {at:.4} in [0.04, 0.30], full simulation {full:.4}"),
    );
}

#[test]
fn c08_oracle_equivalence() {
    let dev = DeviceParams::new(6.205, 5.865).unwrap();
    let cfg = IntegratorConfig::default();
    let closed = DecoherenceParams::closed_system();

    // Rabi on the reduced two-level configuration.
    let omega = rabi_from_mhz(48.0);
    let mut rabi_err: f64 = 0.0;
    for t0 in [2.5f64, 5.0, 10.4, 17.0] {
        let d = DriveParams::new(dev.f01_ghz, 5.865, omega, 0.0, t0).unwrap();
        let p = propagate_with(&DensityMatrix4::ground(), &dev, &d, &closed, &cfg, &HamiltonianConfig::two_level())
            .unwrap()
            .final_populations();
        rabi_err = rabi_err.max((p[1] - (omega * t0 / 2.0).sin().powi(2)).abs());
    }

    // T1 decay from |1⟩.
    let dec = DecoherenceParams::new(108.0, 77.0, 30.0, 6.0, 30.0).unwrap();
    let mut t1_err: f64 = 0.0;
    for t0 in [10.0f64, 40.0] {
        let d = DriveParams::new(6.035, 5.865, 0.0, 0.0, t0).unwrap();
        let p = propagate(&DensityMatrix4::basis(1), &dev, &d, &dec, &cfg).unwrap().final_populations();
        t1_err = t1_err.max((p[1] - (-t0 / 108.0).exp()).abs());
    }

    // Trace and Hermiticity over random draws.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let loose = IntegratorConfig {
        positivity_check: false,
        ..IntegratorConfig::default()
    };
    let (mut tr_max, mut herm_max): (f64, f64) = (0.0, 0.0);
    let life = |r: &mut ChaCha8Rng| 10f64.powf(r.gen_range(0.5..4.0));
    for _ in 0..1000 {
        let f01 = rng.gen_range(5.8..6.6);
        let dv = DeviceParams::new(f01, f01 - 2.0 * rng.gen_range(0.05..0.4)).unwrap();
        let d = DriveParams::new(
            dv.f02() / 2.0 + rng.gen_range(-0.15..0.15),
            dv.f12_ghz + rng.gen_range(-0.2..0.2),
            rabi_from_mhz(rng.gen_range(0.0..120.0)),
            rabi_from_mhz(rng.gen_range(0.0..120.0)),
            2.0,
        )
        .unwrap()
        .with_phase(rng.gen_range(0.0..6.28));
        let dc = DecoherenceParams::new(life(&mut rng), life(&mut rng), life(&mut rng), life(&mut rng), life(&mut rng))
            .unwrap();
        let t = propagate(&DensityMatrix4::ground(), &dv, &d, &dc, &loose).unwrap();
        for s in t.states.iter().chain(std::iter::once(&t.final_state)) {
            tr_max = tr_max.max(s.trace_defect());
            herm_max = herm_max.max(s.hermiticity_defect());
        }
    }

    // RK4 step halving.
    let ctx = fig2_context();
    let mut d = ctx.drive;
    d.t0_ns = 10.0;
    let run = |dt: f64| {
        propagate(&DensityMatrix4::ground(), &ctx.device, &d, &ctx.decoherence, &IntegratorConfig::default().with_dt(dt))
            .unwrap()
            .final_state
    };
    let reference = run(0.0025);
    let e1 = run(0.08).matrix().max_abs_diff(reference.matrix());
    let e2 = run(0.04).matrix().max_abs_diff(reference.matrix());
    let ratio = e1 / e2;

    report(
        8,
        "oracle equivalence",
        rabi_err < 1e-6 && t1_err < 1e-6 && tr_max < 1e-10 && herm_max < 1e-12 && within(ratio, 16.0, 4.8),
        format!(
            "Rabi error {rabi_err:.1e}; T1 error {t1_err:.1e}; 1000 draws: max trace defect {tr_max:.1e}, max Hermiticity defect {herm_max:.1e}; RK4 halving ratio {ratio:.2}"
        ),
    );
}

/// Time-domain context at the light-shifted resonance.
fn resonant_fig3() -> SimContext {
    let mut c = fig3_context();
    c.drive.fc_ghz = cpt_resonance_fc(&c.device, &c.drive, &c.hamiltonian);
    c
}

fn trace(ctx: &SimContext, tphi01: f64) -> Series {
    let times: Vec<f64> = (0..=40).map(|i| 2.0 * i as f64).collect();
    let mut c = ctx.clone();
    c.decoherence.tphi_01_ns = Lifetime::ns(tphi01);
    let p = c.populations_at(&times).unwrap();
    Series::new(Axis::T0, times, p.iter().map(|v| v[2]).collect()).unwrap()
}

/// Tφ01 values whose 40 ns inset P₂ lies within one binomial standard
/// deviation (5000 trials, mapped back through the readout) of the truth.
fn inset_band(ctx: &SimContext, truth: f64, m: &MeasurementModel) -> (f64, f64) {
    let grid: Vec<Lifetime<f64>> = (0..=80).map(|i| Lifetime::ns((200f64.ln() * i as f64 / 80.0).exp())).collect();
    let curve = sensitivity_curve(ctx, 40.0, &grid).unwrap();
    let s_true = sensitivity_curve(ctx, 40.0, &[Lifetime::ns(truth)]).unwrap()[0].1;
    let pc = m.click_probability(s_true);
    let sigma = (pc * (1.0 - pc) / m.trials as f64).sqrt() / m.fidelity;
    let inside: Vec<f64> = curve
        .iter()
        .filter(|(_, p)| (p - s_true).abs() <= sigma)
        .filter_map(|(t, _)| t.as_ns())
        .collect();
    let lo = inside.iter().copied().fold(truth, f64::min);
    let hi = inside.iter().copied().fold(truth, f64::max);
    (lo, hi)
}

#[test]
fn c09_fit_round_trip() {
    let ctx = resonant_fig3();
    let free = [DephasingParam::Tphi01];
    let opts = FitOptions::default();
    let m = MeasurementModel::new(0.80, 0.03, 5000).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for (k, truth) in [6.0, 12.0, 25.0].into_iter().enumerate() {
        let clean = trace(&ctx, truth);
        let v = fit_dephasing(&clean, &ctx, &free, &opts).unwrap().params[0].value;
        let clean_ok = (v - truth).abs() <= 0.02 * truth;

        let mut rng = ChaCha8Rng::seed_from_u64(7 + k as u64);
        let noisy_y = clean
            .y
            .iter()
            .map(|&p| invert_measurement(apply_measurement(p, &m, &mut rng).unwrap(), &m))
            .collect();
        let noisy = Series::new(Axis::T0, clean.x.clone(), noisy_y).unwrap();
        let vn = fit_dephasing(&noisy, &ctx, &free, &opts).unwrap().params[0].value;
        let (lo, hi) = inset_band(&ctx, truth, &m);
        let noisy_ok = vn >= lo && vn <= hi;
        ok &= clean_ok && noisy_ok;
        lines.push(format!(
            "Tφ01 {truth}: noise-free {v:.3} ({}), noisy {vn:.2} in band [{lo:.1}, {hi:.1}] ({})",
            if clean_ok { "ok" } else { "off" },
            if noisy_ok { "ok" } else { "off" }
        ));
    }
    let rep = fit_dephasing(&trace(&ctx, 100.0), &ctx, &free, &opts).unwrap();
    let p = &rep.params[0];
    ok &= rep.flat_residual;
    lines.push(format!(
        "Tφ01 100: fitted {:.1} ns, log-uncertainty {:.3}, flat flag {}",
        p.value, p.log_uncertainty, rep.flat_residual
    ));
    report(9, "fit round trip", ok, lines.join("; "));
}

#[test]
fn c10_determinism() {
    let a = &fig2().0;
    let b = reproduce("fig2", 8, "jobs8");
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        if std::fs::read(a.join(n)).unwrap() != std::fs::read(b.join(n)).unwrap_or_default() {
            differing.push(n.to_string_lossy().into_owned());
        }
    }
    report(
        10,
        "determinism",
        differing.is_empty() && !names.is_empty(),
        format!(
            "{} files from `reproduce fig2 --seed 7` with --jobs 1 and --jobs 8; differing: {:?}",
            names.len(),
            differing
        ),
    );
}
