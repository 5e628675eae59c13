//! Rotating-frame Hamiltonian of the two-tone-driven four-level well.
//!
//! Level n is viewed in a frame rotating at (0, ω_p, ω_p+ω_c, 2ω_p+ω_c), so
//! the probe on |0⟩↔|1⟩ and the coupling tone on |1⟩↔|2⟩ are static. Every
//! other near-resonant drive term oscillates at ±(ω_p − ω_c) and is kept
//! explicitly; terms faster than the RWA cutoff are dropped.
//!
//! Sign convention: the diagonal holds frame-minus-level detunings and the
//! upper-triangle element of a term is `a·e^{i(βt + s·φ)}`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::linalg::{Mat4, DIM};
use crate::model::{angular, DeviceParams, DriveParams, Envelope};
use crate::scalar::Real;

/// Which tone a coupling term originates from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Probe,
    Coupling,
}

/// One drive contribution to the element (level, level+1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTerm<T> {
    /// Lower level of the transition; the term sits at (level, level+1).
    pub level: usize,
    pub field: Field,
    /// Real half-Rabi amplitude, rad/ns.
    pub amplitude: T,
    /// Oscillation frequency β in the rotating frame, rad/ns.
    pub beat: T,
    /// Fixed phase offset φ₀, radians.
    pub phase_offset: T,
    /// Multiplier of the relative phase: +1, −1, or 0 for the probe.
    pub phase_sign: T,
}

impl<T: Real> CouplingTerm<T> {
    #[inline]
    fn value(&self, t: T, rel_phase: T) -> Complex<T> {
        let arg = self.beat * t + self.phase_offset + self.phase_sign * rel_phase;
        Complex::from_polar(self.amplitude, arg)
    }

    pub fn is_static(&self) -> bool {
        self.beat == T::zero()
    }
}

/// Knobs of the Hamiltonian construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig<T> {
    /// Relative dipole moments of 0↔1, 1↔2, 2↔3.
    pub dipole_ratios: [T; 3],
    /// Terms oscillating faster than this (GHz) are dropped.
    pub rwa_cutoff_ghz: T,
}

impl<T: Real> Default for HamiltonianConfig<T> {
    fn default() -> Self {
        Self {
            dipole_ratios: [T::one(), T::SQRT_2(), T::lit(3.0).sqrt()],
            rwa_cutoff_ghz: T::lit(2.0),
        }
    }
}

impl<T: Real> HamiltonianConfig<T> {
    /// Only the |0⟩↔|1⟩ transition is dipole-allowed.
    pub fn two_level() -> Self {
        Self {
            dipole_ratios: [T::one(), T::zero(), T::zero()],
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatingFrameHamiltonian<T> {
    /// Detunings plus static couplings at the drive's phase, rad/ns.
    pub static_part: Mat4<T>,
    /// Time-dependent couplings.
    pub beat_terms: Vec<CouplingTerm<T>>,
    static_terms: Vec<CouplingTerm<T>>,
    detunings: [T; DIM],
    envelope: Envelope<T>,
    t0: T,
}

/// Builds the rotating-frame Hamiltonian with default dipole ratios and cutoff.
pub fn build_hamiltonian<T: Real>(
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
) -> RotatingFrameHamiltonian<T> {
    RotatingFrameHamiltonian::new(device, drive, &HamiltonianConfig::default())
}

impl<T: Real> RotatingFrameHamiltonian<T> {
    pub fn new(
        device: &DeviceParams<T>,
        drive: &DriveParams<T>,
        cfg: &HamiltonianConfig<T>,
    ) -> Self {
        let wp = angular(drive.fp_ghz);
        let wc = angular(drive.fc_ghz);
        let e = device.level_energies();
        let frame = [T::zero(), wp, wp + wc, wp + wp + wc];
        let detunings = [
            T::zero(),
            frame[1] - e[1],
            frame[2] - e[2],
            frame[3] - e[3],
        ];
        // Frame spacing across each transition, written out so that the
        // intended static terms come out with β exactly zero.
        let spacing = [wp, wc, wp];
        let half = T::lit(0.5);
        let fields = [
            (Field::Probe, wp, drive.omega_p01, T::zero()),
            (Field::Coupling, wc, drive.omega_c12 / T::SQRT_2(), T::one()),
        ];
        let cutoff = angular(cfg.rwa_cutoff_ghz);

        let mut static_terms = Vec::new();
        let mut beat_terms = Vec::new();
        for level in 0..DIM - 1 {
            let g = cfg.dipole_ratios[level];
            for &(field, w, d, sign) in &fields {
                let amplitude = g * d * half;
                if amplitude == T::zero() {
                    continue;
                }
                let candidates = [(spacing[level] - w, sign), (spacing[level] + w, -sign)];
                for (beat, phase_sign) in candidates {
                    if beat.abs() > cutoff {
                        continue;
                    }
                    let term = CouplingTerm {
                        level,
                        field,
                        amplitude,
                        beat,
                        phase_offset: T::zero(),
                        phase_sign,
                    };
                    if term.is_static() {
                        static_terms.push(term);
                    } else {
                        beat_terms.push(term);
                    }
                }
            }
        }

        let mut h = Self {
            static_part: Mat4::zeros(),
            beat_terms,
            static_terms,
            detunings,
            envelope: drive.envelope,
            t0: drive.t0_ns,
        };
        h.static_part = h.assemble(&h.static_terms, T::zero(), drive.rel_phase, T::one(), true);
        h
    }

    /// Frame detunings (diagonal), rad/ns.
    pub fn detunings(&self) -> [T; DIM] {
        self.detunings
    }

    pub fn envelope(&self) -> Envelope<T> {
        self.envelope
    }

    pub fn static_terms(&self) -> &[CouplingTerm<T>] {
        &self.static_terms
    }

    fn assemble(
        &self,
        terms: &[CouplingTerm<T>],
        t: T,
        rel_phase: T,
        scale: T,
        with_diagonal: bool,
    ) -> Mat4<T> {
        let mut h = if with_diagonal {
            Mat4::from_real_diagonal(self.detunings)
        } else {
            Mat4::zeros()
        };
        for term in terms {
            let v = term.value(t, rel_phase) * scale;
            let (i, j) = (term.level, term.level + 1);
            h.m[i][j] = h.m[i][j] + v;
            h.m[j][i] = h.m[j][i] + v.conj();
        }
        h
    }

    /// H(t) for a given relative phase of the coupling tone.
    pub fn evaluate_at(&self, t: T, rel_phase: T) -> Mat4<T> {
        let env = self.envelope.value(t, self.t0);
        let mut h = self.assemble(&self.static_terms, t, rel_phase, env, true);
        h += self.assemble(&self.beat_terms, t, rel_phase, env, false);
        h
    }

    /// Beat angular frequency |ω_p − ω_c| of the retained time dependence,
    /// or `None` when nothing oscillates.
    pub fn beat_frequency(&self) -> Option<T> {
        self.beat_terms
            .iter()
            .map(|b| b.beat.abs())
            .fold(None, |acc: Option<T>, b| Some(acc.map_or(b, |a| a.min(b))))
    }
}

/// Free-function form of [`RotatingFrameHamiltonian::evaluate_at`].
pub fn evaluate_at<T: Real>(h: &RotatingFrameHamiltonian<T>, t: T, rel_phase: T) -> Mat4<T> {
    h.evaluate_at(t, rel_phase)
}

/// Second-order light shifts of |0⟩ and |1⟩, GHz, from every drive term
/// except the coupling tone on |1⟩↔|2⟩, counter-rotating parts included.
pub fn ground_light_shifts<T: Real>(
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    cfg: &HamiltonianConfig<T>,
) -> [T; 2] {
    let two_pi = T::two_pi();
    let r = cfg.dipole_ratios;
    let probe01 = drive.omega_p01 / two_pi;
    let coupling01 = if r[1] == T::zero() {
        T::zero()
    } else {
        drive.omega_c12 / two_pi * r[0] / r[1]
    };
    let spacing = [device.f01_ghz, device.f12_ghz];
    // Shift of the lower level of a transition; the upper level gets minus it.
    let lower = |rabi: T, f: T, f0: T| {
        let q = rabi * rabi / T::lit(4.0);
        q / (f - f0) - q / (f + f0)
    };
    let mut shift = [T::zero(); 2];
    for (field, f, on_12) in [(probe01, drive.fp_ghz, true), (coupling01, drive.fc_ghz, false)] {
        let s01 = lower(field * r[0], f, spacing[0]);
        shift[0] += s01;
        shift[1] -= s01;
        if on_12 {
            shift[1] += lower(field * r[1], f, spacing[1]);
        }
    }
    shift
}

/// Coupling frequency (GHz) of the light-shifted two-photon resonance
/// 2fp − fc = f01 + δ1 − δ0 at the drive's probe frequency and amplitudes.
pub fn cpt_resonance_fc<T: Real>(device: &DeviceParams<T>, drive: &DriveParams<T>, cfg: &HamiltonianConfig<T>) -> T {
    let bare = drive.fp_ghz + drive.fp_ghz - device.f01_ghz;
    let mut d = *drive;
    d.fc_ghz = bare;
    for _ in 0..8 {
        let [s0, s1] = ground_light_shifts(device, &d, cfg);
        d.fc_ghz = bare - (s1 - s0);
    }
    d.fc_ghz
}
