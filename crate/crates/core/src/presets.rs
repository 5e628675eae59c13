//! Named parameter sets and sweep grids used by `reproduce`.
//!
//! Axis ranges are ordinary defaults; callers may
//! change any of them.

use crate::model::{rabi_from_mhz, DecoherenceParams, DeviceParams, DriveParams};
use crate::sweep::{Axis, AxisSpec, SimContext, SweepSpec};

/// Off-resonant coupling frequency of the fig2 off-resonant cut, GHz.
pub const FIG2_OFF_FC: f64 = 5.73;
/// Pulse length used for the fig4 inset, ns.
pub const INSET_T0: f64 = 40.0;
/// Detuning of the off-resonant time trace below f12, GHz.
pub const FIG4_OFF_DETUNING: f64 = 0.080;
/// Tφ01 values of the fig4 traces, ns.
pub const FIG4_TPHI01: [f64; 3] = [6.0, 12.0, 30.0];

fn axis(param: Axis, start: f64, stop: f64, n: usize) -> AxisSpec {
    AxisSpec::new(param, start, stop, n).expect("preset axis")
}

/// Frequency–frequency scan: f01 = 6.205, f12 = 5.865 GHz, Ωp = 2π·48 MHz,
/// Ωc = 2π·32 MHz, Tφ = 30/6/30 ns, 30 ns pulses.
pub fn fig2_context() -> SimContext {
    let device = DeviceParams::new(6.205, 5.865).expect("preset device");
    let drive = DriveParams::new(6.035, 5.865, rabi_from_mhz(48.0), rabi_from_mhz(32.0), 30.0).expect("preset drive");
    let dec = DecoherenceParams::new(108.0, 77.0, 30.0, 6.0, 30.0).expect("preset decoherence");
    SimContext::new(device, drive, dec)
}

/// 61 × 61 grid, fp ∈ [5.99, 6.08] GHz by fc ∈ [5.72, 6.00] GHz.
pub fn fig2_sweep() -> SweepSpec {
    let mut s = SweepSpec::new(
        axis(Axis::Fp, 5.99, 6.08, 61),
        Some(axis(Axis::Fc, 5.72, 6.00, 61)),
        fig2_context(),
    );
    s.record_all_levels = true;
    s
}

/// Time-domain set: f01 = 6.19, f12 = 5.85 GHz, fp = 6.0158 GHz,
/// Ωp = 2π·48 MHz, Ωc = 2π·35 MHz, Tφ = 12/20/20 ns.
pub fn fig3_context() -> SimContext {
    let device = DeviceParams::new(6.19, 5.85).expect("preset device");
    let drive = DriveParams::new(6.0158, 5.85, rabi_from_mhz(48.0), rabi_from_mhz(35.0), 80.0).expect("preset drive");
    let dec = DecoherenceParams::new(108.0, 77.0, 12.0, 20.0, 20.0).expect("preset decoherence");
    SimContext::new(device, drive, dec)
}

/// 61 (fc ∈ [5.73, 5.97] GHz) × 81 (t0 ∈ [0, 80] ns) grid.
pub fn fig3_sweep() -> SweepSpec {
    let mut s = SweepSpec::new(
        axis(Axis::Fc, 5.73, 5.97, 61),
        Some(axis(Axis::T0, 0.0, 80.0, 81)),
        fig3_context(),
    );
    s.record_all_levels = true;
    s
}

/// Single time trace of the time-domain set at coupling frequency `fc`.
pub fn fig4_trace(fc_ghz: f64, tphi_01_ns: f64) -> SweepSpec {
    let mut ctx = fig3_context();
    ctx.drive.fc_ghz = fc_ghz;
    ctx.decoherence.tphi_01_ns = crate::model::Lifetime::ns(tphi_01_ns);
    let mut s = SweepSpec::new(axis(Axis::T0, 0.0, 80.0, 81), None, ctx);
    s.record_all_levels = true;
    s
}
