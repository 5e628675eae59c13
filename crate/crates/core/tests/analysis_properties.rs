use cpt_core::analysis::{
    at_only_contrast, dephasing_residual, expected_observation, fit_dephasing, invert_measurement, linewidth_fit,
    parabolic_contrast, sensitivity_curve, DephasingParam, FitOptions,
};
use cpt_core::model::{Lifetime, MeasurementModel};
use cpt_core::presets::{fig2_context, fig3_context};
use cpt_core::{run_sweep, Axis, AxisSpec, Series, SimContext, SweepSpec};
use proptest::prelude::*;

fn lorentz_cut(center: f64, width: f64, depth: f64, scale: f64) -> Series {
    let x: Vec<f64> = (0..31).map(|i| 5.99 + 0.003 * i as f64).collect();
    let y = x
        .iter()
        .map(|&v| scale * (0.2 - depth / (1.0 + ((v - center) / width).powi(2))))
        .collect();
    Series::new(Axis::Fp, x, y).unwrap()
}

proptest! {
    #[test]
    fn inverse_measurement_undoes_forward_mean(p in 0.0f64..=1.0, f in 0.5f64..0.9, b in 0.0f64..0.1) {
        let m = MeasurementModel::new(f, b, 1000).unwrap();
        let back = invert_measurement(expected_observation(p, &m).unwrap(), &m);
        prop_assert!((back - p).abs() < 1e-12);
    }

    #[test]
    fn contrast_invariant_under_common_scaling(s in 0.01f64..100.0, c in 6.02f64..6.05, d in 0.05f64..0.15) {
        let on = lorentz_cut(c, 0.01, d, 1.0);
        let off = lorentz_cut(c, 0.02, -0.1, 1.0);
        let base = parabolic_contrast(&on, &off).unwrap().value;
        let scaled = parabolic_contrast(&lorentz_cut(c, 0.01, d, s), &lorentz_cut(c, 0.02, -0.1, s)).unwrap().value;
        prop_assert!((base - scaled).abs() < 1e-9, "{base} vs {scaled}");
    }

    #[test]
    fn at_only_increasing_in_coupling(g01 in 0.1f64..50.0, g02 in 0.1f64..50.0, oc in 0.0f64..100.0, d in 0.01f64..10.0) {
        prop_assert!(at_only_contrast(g01, g02, oc + d).unwrap() > at_only_contrast(g01, g02, oc).unwrap());
    }
}

/// Cheaper time-domain context for the fit tests.
fn quick_fig3() -> SimContext {
    let mut c = fig3_context();
    c.n_phases = 8;
    c.integrator.dt_ns = 0.02;
    c
}

fn trace(ctx: &SimContext, tphi01: f64) -> Series {
    let times: Vec<f64> = (0..=20).map(|i| 2.0 * i as f64).collect();
    let mut c = ctx.clone();
    c.decoherence.tphi_01_ns = Lifetime::ns(tphi01);
    let p = c.populations_at(&times).unwrap();
    Series::new(Axis::T0, times, p.iter().map(|v| v[2]).collect()).unwrap()
}

#[test]
fn true_parameter_beats_every_grid_candidate() {
    let ctx = quick_fig3();
    let obs = trace(&ctx, 12.0);
    let free = [DephasingParam::Tphi01];
    let at_truth = dephasing_residual(&obs, &ctx, &free, &[12.0]).unwrap();
    for i in 0..13 {
        let cand = (200f64.ln() * i as f64 / 12.0).exp();
        let r = dephasing_residual(&obs, &ctx, &free, &[cand]).unwrap();
        assert!(at_truth <= r, "candidate {cand}: {r} < {at_truth}");
    }
}

#[test]
fn noise_free_fit_recovers_generator() {
    let ctx = quick_fig3();
    let obs = trace(&ctx, 12.0);
    let rep = fit_dephasing(&obs, &ctx, &[DephasingParam::Tphi01], &FitOptions::default()).unwrap();
    let v = rep.param("tphi_01_ns").unwrap().value;
    assert!(rep.converged);
    assert!((v - 12.0).abs() < 0.24, "{v}");
    assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.params.iter().all(|p| p.uncertainty >= 0.0));
}

#[test]
fn fit_preconditions() {
    let ctx = quick_fig3();
    let obs = trace(&ctx, 12.0);
    assert!(fit_dephasing(&obs, &ctx, &[], &FitOptions::default()).is_err());
    let short = Series::new(Axis::T0, obs.x[..5].to_vec(), obs.y[..5].to_vec()).unwrap();
    assert!(fit_dephasing(&short, &ctx, &[DephasingParam::Tphi01], &FitOptions::default()).is_err());
}

#[test]
fn sensitivity_curve_is_pure() {
    let ctx = quick_fig3();
    let g = [Lifetime::ns(10.0), Lifetime::ns(10.0), Lifetime::Infinite, Lifetime::Infinite];
    let c = sensitivity_curve(&ctx, 20.0, &g).unwrap();
    assert_eq!(c[0].1, c[1].1);
    assert_eq!(c[2].1, c[3].1);
    assert!(sensitivity_curve(&ctx, 20.0, &[]).is_err());
}

#[test]
fn linewidth_narrows_with_longer_tphi02() {
    let fwhm = |tphi02: f64| {
        let mut ctx = fig2_context();
        ctx.n_phases = 8;
        ctx.drive.fc_ghz = 5.73;
        ctx.decoherence.tphi_02_ns = Lifetime::ns(tphi02);
        let r = run_sweep(&SweepSpec::new(AxisSpec::new(Axis::Fp, 5.99, 6.08, 31).unwrap(), None, ctx)).unwrap();
        linewidth_fit(&r.series().unwrap()).unwrap().fwhm_mhz
    };
    let (a, b) = (fwhm(6.0), fwhm(12.0));
    assert!(b < a, "{b} !< {a}");
}
