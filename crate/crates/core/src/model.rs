//! Physical parameters, unit conventions and the state type of the simulated
//! four-level artificial atom.
//!
//! Frequencies cross the public boundary in GHz (transition frequencies) and
//! are converted once into angular units (rad/ns) for the dynamics. Rabi
//! rates are stored directly in rad/ns; [`rabi_from_mhz`] converts the usual
//! "(2π)·48 MHz" notation.

use std::fmt;

use num_complex::Complex;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Mat4, DIM};
use crate::scalar::Real;

/// Number of potential-well levels kept in the model.
pub const N_LEVELS: usize = DIM;

/// GHz → rad/ns.
pub fn angular<T: Real>(f_ghz: T) -> T {
    T::two_pi() * f_ghz
}

/// Rabi rate written as (2π)·x MHz → rad/ns.
pub fn rabi_from_mhz<T: Real>(mhz: T) -> T {
    T::two_pi() * mhz / T::lit(1e3)
}

/// rad/ns → MHz in the (2π)-stripped convention.
pub fn angular_to_mhz<T: Real>(w: T) -> T {
    w / T::two_pi() * T::lit(1e3)
}

/// Transition frequencies of the lowest levels of the anharmonic well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams<T> {
    /// |0⟩↔|1⟩ transition frequency, GHz.
    pub f01_ghz: T,
    /// |1⟩↔|2⟩ transition frequency, GHz.
    pub f12_ghz: T,
    /// |2⟩↔|3⟩ transition frequency, GHz. `None` extrapolates the spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f23_ghz: Option<T>,
}

impl<T: Real> DeviceParams<T> {
    pub fn new(f01_ghz: T, f12_ghz: T) -> Result<Self> {
        let d = Self {
            f01_ghz,
            f12_ghz,
            f23_ghz: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_f23(mut self, f23_ghz: T) -> Result<Self> {
        self.f23_ghz = Some(f23_ghz);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f12_ghz > T::zero()) || !self.f12_ghz.is_finite() {
            return Err(Error::invalid("f12_ghz", "must be positive and finite"));
        }
        if !(self.f01_ghz > self.f12_ghz) || !self.f01_ghz.is_finite() {
            return Err(Error::invalid(
                "f01_ghz",
                format!(
                    "must exceed f12 ({} GHz) for an anharmonic well, got {}",
                    self.f12_ghz, self.f01_ghz
                ),
            ));
        }
        if let Some(f23) = self.f23_ghz {
            if !(f23 > T::zero()) || !f23.is_finite() {
                return Err(Error::invalid("f23_ghz", "must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Anharmonicity Δ = (f01 − f12)/2, GHz.
    pub fn delta(&self) -> T {
        (self.f01_ghz - self.f12_ghz) / T::lit(2.0)
    }

    /// Two-photon transition frequency f02 = f01 + f12, GHz.
    pub fn f02(&self) -> T {
        self.f01_ghz + self.f12_ghz
    }

    /// |2⟩↔|3⟩ frequency; defaults to 2·f12 − f01.
    pub fn f23(&self) -> T {
        self.f23_ghz
            .unwrap_or(T::lit(2.0) * self.f12_ghz - self.f01_ghz)
    }

    /// Level energies in rad/ns, ground state at zero.
    pub fn level_energies(&self) -> [T; N_LEVELS] {
        let e1 = angular(self.f01_ghz);
        let e2 = e1 + angular(self.f12_ghz);
        let e3 = e2 + angular(self.f23());
        [T::zero(), e1, e2, e3]
    }
}

/// Free-function form of [`DeviceParams::delta`].
pub fn delta<T: Real>(device: &DeviceParams<T>) -> T {
    device.delta()
}

/// Time-dependent amplitude envelope applied to both tones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope<T> {
    #[default]
    Rectangular,
    /// Trapezoid with linear rise and fall of `ramp_ns` each.
    LinearRamp { ramp_ns: T },
}

impl<T: Real> Envelope<T> {
    /// Relative amplitude in [0, 1] at time `t` of a pulse lasting `t0`.
    pub fn value(&self, t: T, t0: T) -> T {
        match *self {
            Envelope::Rectangular => T::one(),
            Envelope::LinearRamp { ramp_ns } => {
                if ramp_ns <= T::zero() {
                    return T::one();
                }
                let rise = t / ramp_ns;
                let fall = (t0 - t) / ramp_ns;
                rise.min(fall).min(T::one()).max(T::zero())
            }
        }
    }

    pub fn is_rectangular(&self) -> bool {
        match *self {
            Envelope::Rectangular => true,
            Envelope::LinearRamp { ramp_ns } => ramp_ns <= T::zero(),
        }
    }
}

/// Two-tone microwave drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams<T> {
    /// Probe tone frequency, GHz (near f02/2).
    pub fp_ghz: T,
    /// Coupling tone frequency, GHz (near f12).
    pub fc_ghz: T,
    /// Resonant Rabi rate of the probe on |0⟩↔|1⟩, rad/ns.
    pub omega_p01: T,
    /// Resonant Rabi rate of the coupling tone on |1⟩↔|2⟩, rad/ns.
    pub omega_c12: T,
    /// Coupling-tone phase relative to the probe, radians in [0, 2π).
    #[serde(default)]
    pub rel_phase: T,
    /// Pulse duration, ns.
    pub t0_ns: T,
    #[serde(default)]
    pub envelope: Envelope<T>,
}

impl<T: Real> DriveParams<T> {
    pub fn new(fp_ghz: T, fc_ghz: T, omega_p01: T, omega_c12: T, t0_ns: T) -> Result<Self> {
        let d = Self {
            fp_ghz,
            fc_ghz,
            omega_p01,
            omega_c12,
            rel_phase: T::zero(),
            t0_ns,
            envelope: Envelope::Rectangular,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite and nonnegative"))
            }
        };
        check("fp_ghz", self.fp_ghz)?;
        check("fc_ghz", self.fc_ghz)?;
        check("omega_p01", self.omega_p01)?;
        check("omega_c12", self.omega_c12)?;
        check("t0_ns", self.t0_ns)?;
        if !self.rel_phase.is_finite() {
            return Err(Error::invalid("rel_phase", "must be finite"));
        }
        if let Envelope::LinearRamp { ramp_ns } = self.envelope {
            check("envelope.ramp_ns", ramp_ns)?;
        }
        Ok(())
    }

    /// Returns a copy with the coupling-tone phase set and wrapped into [0, 2π).
    pub fn with_phase(mut self, phase: T) -> Self {
        self.rel_phase = normalize_phase(phase);
        self
    }

    /// Resonant Rabi rate of the probe on |1⟩↔|2⟩ (dipole ratio √2).
    pub fn omega_p12(&self) -> T {
        T::SQRT_2() * self.omega_p01
    }

    /// Switches both tones off.
    pub fn without_fields(mut self) -> Self {
        self.omega_p01 = T::zero();
        self.omega_c12 = T::zero();
        self
    }
}

/// Wraps an angle into [0, 2π).
pub fn normalize_phase<T: Real>(phase: T) -> T {
    let tau = T::two_pi();
    let mut p = phase % tau;
    if p < T::zero() {
        p += tau;
    }
    if p >= tau {
        p = T::zero();
    }
    p
}

/// A relaxation or dephasing time that may be infinite.
///
/// Serialized as a plain number of nanoseconds, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lifetime<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Lifetime<T> {
    pub fn ns(t: T) -> Self {
        Lifetime::Finite(t)
    }

    /// Decay rate in ns⁻¹; zero for an infinite lifetime.
    pub fn rate(&self) -> T {
        match *self {
            Lifetime::Finite(t) => T::one() / t,
            Lifetime::Infinite => T::zero(),
        }
    }

    pub fn as_ns(&self) -> Option<T> {
        match *self {
            Lifetime::Finite(t) => Some(t),
            Lifetime::Infinite => None,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        match *self {
            Lifetime::Finite(t) if !(t > T::zero()) || !t.is_finite() => Err(Error::invalid(
                name,
                "must be strictly positive (use \"inf\" for no decay)",
            )),
            _ => Ok(()),
        }
    }
}

impl<T: Real> From<T> for Lifetime<T> {
    fn from(t: T) -> Self {
        if t.is_infinite() {
            Lifetime::Infinite
        } else {
            Lifetime::Finite(t)
        }
    }
}

impl<T: Real + Serialize> Serialize for Lifetime<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Lifetime::Finite(t) => t.serialize(s),
            Lifetime::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real> Deserialize<'de> for Lifetime<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);
        impl<'de, T: Real> Visitor<'de> for V<T> {
            type Value = Lifetime<T>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number of nanoseconds or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Lifetime::from(T::lit(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v {
                    "inf" | "infinite" | "infinity" => Ok(Lifetime::Infinite),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V(std::marker::PhantomData))
    }
}

/// Energy-relaxation and pairwise pure-dephasing times, all in ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real"))]
pub struct DecoherenceParams<T> {
    pub t1_10_ns: Lifetime<T>,
    pub t1_21_ns: Lifetime<T>,
    /// Defaults to (2/3)·t1_21 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_32_ns: Option<Lifetime<T>>,
    pub tphi_01_ns: Lifetime<T>,
    pub tphi_02_ns: Lifetime<T>,
    pub tphi_12_ns: Lifetime<T>,
    /// Dephasing of every coherence involving |3⟩; defaults to tphi_12.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tphi_3x_ns: Option<Lifetime<T>>,
}

impl<T: Real> DecoherenceParams<T> {
    /// Builds from finite times; level-3 entries take their defaults.
    pub fn new(t1_10: T, t1_21: T, tphi_01: T, tphi_02: T, tphi_12: T) -> Result<Self> {
        let d = Self {
            t1_10_ns: t1_10.into(),
            t1_21_ns: t1_21.into(),
            t1_32_ns: None,
            tphi_01_ns: tphi_01.into(),
            tphi_02_ns: tphi_02.into(),
            tphi_12_ns: tphi_12.into(),
            tphi_3x_ns: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// No relaxation and no dephasing at all.
    pub fn closed_system() -> Self {
        Self {
            t1_10_ns: Lifetime::Infinite,
            t1_21_ns: Lifetime::Infinite,
            t1_32_ns: Some(Lifetime::Infinite),
            tphi_01_ns: Lifetime::Infinite,
            tphi_02_ns: Lifetime::Infinite,
            tphi_12_ns: Lifetime::Infinite,
            tphi_3x_ns: Some(Lifetime::Infinite),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.t1_10_ns.validate("t1_10_ns")?;
        self.t1_21_ns.validate("t1_21_ns")?;
        if let Some(t) = &self.t1_32_ns {
            t.validate("t1_32_ns")?;
        }
        self.tphi_01_ns.validate("tphi_01_ns")?;
        self.tphi_02_ns.validate("tphi_02_ns")?;
        self.tphi_12_ns.validate("tphi_12_ns")?;
        if let Some(t) = &self.tphi_3x_ns {
            t.validate("tphi_3x_ns")?;
        }
        Ok(())
    }

    pub fn t1_32(&self) -> Lifetime<T> {
        self.t1_32_ns.unwrap_or(match self.t1_21_ns {
            Lifetime::Finite(t) => Lifetime::Finite(t * T::lit(2.0) / T::lit(3.0)),
            Lifetime::Infinite => Lifetime::Infinite,
        })
    }

    /// Level-3 coherences are dominated by ρ₂₃, a single-photon coherence
    /// like ρ₁₂, so they inherit the 1↔2 dephasing time.
    pub fn tphi_3x(&self) -> Lifetime<T> {
        self.tphi_3x_ns.unwrap_or(self.tphi_12_ns)
    }

    /// Total population decay rate out of each level, ns⁻¹.
    pub fn level_decay_rates(&self) -> [T; N_LEVELS] {
        [
            T::zero(),
            self.t1_10_ns.rate(),
            self.t1_21_ns.rate(),
            self.t1_32().rate(),
        ]
    }

    /// Pure-dephasing rate of the coherence ρ_ij, ns⁻¹.
    pub fn dephasing_rate(&self, i: usize, j: usize) -> T {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        match (a, b) {
            (x, y) if x == y => T::zero(),
            (0, 1) => self.tphi_01_ns.rate(),
            (0, 2) => self.tphi_02_ns.rate(),
            (1, 2) => self.tphi_12_ns.rate(),
            _ => self.tphi_3x().rate(),
        }
    }

    /// Total decay rate of ρ_ij: (Γ_i + Γ_j)/2 + 1/T_φ(ij).
    pub fn coherence_decay_rate(&self, i: usize, j: usize) -> T {
        let g = self.level_decay_rates();
        (g[i] + g[j]) / T::lit(2.0) + self.dephasing_rate(i, j)
    }

    /// γ01 = 1/(2·T1(1→0)) + 1/Tφ(01), ns⁻¹.
    pub fn gamma_01(&self) -> T {
        self.coherence_decay_rate(0, 1)
    }

    /// γ02 = 1/(2·T1(2→1)) + 1/Tφ(02), ns⁻¹.
    pub fn gamma_02(&self) -> T {
        self.coherence_decay_rate(0, 2)
    }

    pub fn with_tphi_01(mut self, t: Lifetime<T>) -> Self {
        self.tphi_01_ns = t;
        self
    }
}

/// Linear readout model of the destructive |2⟩ measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel<T> {
    pub fidelity: T,
    pub background: T,
    pub trials: u64,
}

impl<T: Real> Default for MeasurementModel<T> {
    fn default() -> Self {
        Self {
            fidelity: T::lit(0.80),
            background: T::lit(0.03),
            trials: 4000,
        }
    }
}

impl<T: Real> MeasurementModel<T> {
    pub fn new(fidelity: T, background: T, trials: u64) -> Result<Self> {
        let m = Self {
            fidelity,
            background,
            trials,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background >= T::zero()) {
            return Err(Error::invalid("background", "must be nonnegative"));
        }
        if !(self.fidelity >= self.background) {
            return Err(Error::invalid("fidelity", "must be at least the background"));
        }
        if !(self.fidelity + self.background <= T::one()) {
            return Err(Error::invalid(
                "fidelity",
                "fidelity + background must not exceed 1",
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        Ok(())
    }

    /// Expected switching probability for a true |2⟩ population.
    pub fn click_probability(&self, p2: T) -> T {
        self.fidelity * p2 + self.background
    }

    /// Maps an observed switching fraction back to a population in [0, 1].
    pub fn invert(&self, observed: T) -> T {
        ((observed - self.background) / self.fidelity)
            .max(T::zero())
            .min(T::one())
    }
}

/// Hermitian, unit-trace, positive 4×4 density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
#[serde(transparent)]
pub struct DensityMatrix4<T>(Mat4<T>);

impl<T: Real> DensityMatrix4<T> {
    /// |n⟩⟨n|.
    pub fn basis(n: usize) -> Self {
        Self(Mat4::projector(n))
    }

    /// The relaxed initial state |0⟩⟨0|.
    pub fn ground() -> Self {
        Self::basis(0)
    }

    /// Pure state from an amplitude vector, normalized on the way in.
    pub fn pure(psi: [Complex<T>; N_LEVELS]) -> Result<Self> {
        let norm2: T = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > T::zero()) {
            return Err(Error::Domain("zero state vector".into()));
        }
        let s = T::one() / norm2.sqrt();
        let v = psi.map(|z| z * s);
        Ok(Self(Mat4::outer(&v)))
    }

    /// Validates Hermiticity, trace and positivity before wrapping.
    pub fn from_matrix(m: Mat4<T>) -> Result<Self> {
        let rho = Self(m);
        rho.check()?;
        Ok(rho)
    }

    /// Wraps without checks; used inside the integrator.
    pub(crate) fn from_matrix_unchecked(m: Mat4<T>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat4<T> {
        &self.0
    }

    pub fn populations(&self) -> [T; N_LEVELS] {
        self.0.diagonal_re()
    }

    pub fn population(&self, n: usize) -> T {
        self.0.m[n][n].re
    }

    pub fn trace_defect(&self) -> T {
        let tr = self.0.trace();
        ((tr.re - T::one()).powi(2) + tr.im.powi(2)).sqrt()
    }

    pub fn hermiticity_defect(&self) -> T {
        self.0.hermiticity_defect()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.0.hermitian_eigenvalues()[0]
    }

    pub fn check(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > T::lit(T::HERMITIAN_TOL) {
            return Err(Error::Domain(format!("density matrix not Hermitian (defect {h:e})")));
        }
        let tr = self.trace_defect();
        if tr > T::lit(T::TRACE_TOL) {
            return Err(Error::Domain(format!("density matrix trace off by {tr:e}")));
        }
        let ev = self.min_eigenvalue();
        if ev < T::lit(T::POSITIVITY_WARN) {
            return Err(Error::Domain(format!(
                "density matrix has negative eigenvalue {ev:e}"
            )));
        }
        Ok(())
    }
}

/// Effective two-photon |0⟩↔|2⟩ amplitude A_p = Ω²/(2·2πΔ), rad/ns.
///
/// `delta_ghz` is the anharmonicity in GHz. The |Ω|²/2Δ form is used, i.e.
/// the √2 from the |1⟩↔|2⟩ dipole ratio is not included.
pub fn two_photon_amplitude<T: Real>(omega_p01: T, delta_ghz: T) -> Result<T> {
    if !(delta_ghz > T::zero()) {
        return Err(Error::Domain(format!(
            "anharmonicity must be positive, got {delta_ghz} GHz"
        )));
    }
    let delta_w = angular(delta_ghz);
    if omega_p01 / delta_w >= T::lit(0.5) {
        log::warn!(
            "probe Rabi rate {} rad/ns is not small against the anharmonicity {} rad/ns; \
             the two-photon amplitude is only approximate",
            omega_p01,
            delta_w
        );
    }
    Ok(omega_p01 * omega_p01 / (T::lit(2.0) * delta_w))
}

/// Population parked in |1⟩ by the off-resonant probe, Ω²/(2·(2πΔ)²).
pub fn intermediate_leakage<T: Real>(omega_p01: T, delta_ghz: T) -> Result<T> {
    if !(delta_ghz > T::zero()) {
        return Err(Error::Domain(format!(
            "anharmonicity must be positive, got {delta_ghz} GHz"
        )));
    }
    let delta_w = angular(delta_ghz);
    Ok(omega_p01 * omega_p01 / (T::lit(2.0) * delta_w * delta_w))
}

/// Dark superposition (A_c|0⟩ − A_p|1⟩)/A of the two long-lived levels.
///
/// Returns the amplitudes of |0⟩ and |1⟩.
pub fn dark_state<T: Real>(a_p: T, a_c: T) -> Result<[Complex<T>; 2]> {
    let norm = a_p.hypot(a_c);
    if !(norm > T::zero()) {
        return Err(Error::Domain(
            "dark state undefined when both amplitudes vanish".into(),
        ));
    }
    Ok([
        Complex::new(a_c / norm, T::zero()),
        Complex::new(-a_p / norm, T::zero()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn anharmonicity_of_both_bias_points() {
        let fig2 = DeviceParams::new(6.205, 5.865).unwrap();
        assert!(close(fig2.delta(), 0.170, 1e-12));
        let fig3 = DeviceParams::new(6.19, 5.85).unwrap();
        assert!(close(delta(&fig3), 0.170, 1e-12));
        assert!(close(fig2.f02() / 2.0, 6.035, 1e-12));
    }

    #[test]
    fn harmonic_well_is_rejected() {
        assert!(DeviceParams::new(5.0, 5.0).is_err());
        assert!(DeviceParams::new(5.0, 5.5).is_err());
        assert!(DeviceParams::new(5.0, 0.0).is_err());
    }

    #[test]
    fn delta_is_shift_invariant() {
        for x in [-1.0, 0.0, 0.25, 3.0] {
            let a = DeviceParams::new(6.25 + x, 5.75 + x).unwrap();
            assert_eq!(a.delta(), 0.25);
        }
    }

    #[test]
    fn default_third_level() {
        let d = DeviceParams::new(6.205, 5.865).unwrap();
        assert!(close(d.f23(), 5.525, 1e-12));
        let e = d.level_energies();
        assert!(close(e[3] - e[2], angular(5.525), 1e-12));
        assert_eq!(d.with_f23(5.4).unwrap().f23(), 5.4);
    }

    #[test]
    fn two_photon_amplitude_values() {
        let omega = rabi_from_mhz(48.0);
        let ap = two_photon_amplitude(omega, 0.170).unwrap();
        // 48²/340 = 6.776 MHz, quoted as 6.8 MHz.
        assert!(close(angular_to_mhz(ap), 6.8, 0.05));
        assert!(close(angular_to_mhz(ap), 48.0 * 48.0 / 340.0, 1e-9));
        let halved = two_photon_amplitude(omega, 0.340).unwrap();
        assert!(close(angular_to_mhz(halved), 3.4, 0.03));
        assert!(close(halved, ap / 2.0, 1e-15));
        assert_eq!(two_photon_amplitude(0.0, 0.17).unwrap(), 0.0);
        assert!(two_photon_amplitude(omega, 0.0).is_err());
        assert!(two_photon_amplitude(omega, -0.1).is_err());
    }

    #[test]
    fn leakage_values() {
        let omega = rabi_from_mhz(48.0);
        let l = intermediate_leakage(omega, 0.170).unwrap();
        assert!(close(l, 0.0399, 5e-5));
        let q = intermediate_leakage(omega, 0.340).unwrap();
        assert!(close(q, 0.00997, 5e-6));
        assert!(close(q, l / 4.0, 1e-15));
        assert_eq!(intermediate_leakage(0.0, 0.3).unwrap(), 0.0);
        assert!(intermediate_leakage(omega, 0.0).is_err());
    }

    #[test]
    fn dark_state_examples() {
        let [c0, c1] = dark_state(0.0, 1.0).unwrap();
        assert_eq!((c0.re, c1.re), (1.0, 0.0));
        let [c0, c1] = dark_state(2.5, 2.5).unwrap();
        let s = 0.5_f64.sqrt();
        assert!(close(c0.re, s, 1e-15) && close(c1.re, -s, 1e-15));
        let [c0, c1] = dark_state(rabi_from_mhz(6.8), rabi_from_mhz(32.0)).unwrap();
        assert!(close(c0.re, 0.978, 5e-4));
        assert!(close(c1.re, -0.208, 5e-4));
        assert!(dark_state(0.0_f64, 0.0).is_err());
    }

    #[test]
    fn gamma_02_in_mhz() {
        let dec = DecoherenceParams::new(108.0, 77.0, 30.0, 6.0, 30.0).unwrap();
        let g = angular_to_mhz(dec.gamma_02());
        assert!(close(g, 27.5, 0.5), "{g}");
        assert!(close(dec.gamma_02(), 1.0 / 154.0 + 1.0 / 6.0, 1e-15));
        assert!(close(dec.gamma_01(), 1.0 / 216.0 + 1.0 / 30.0, 1e-15));
    }

    #[test]
    fn decoherence_defaults_and_sentinel() {
        let dec = DecoherenceParams::new(108.0, 77.0, 30.0, 6.0, 30.0).unwrap();
        assert!(close(dec.t1_32().as_ns().unwrap(), 77.0 * 2.0 / 3.0, 1e-12));
        assert_eq!(dec.dephasing_rate(3, 1), 1.0 / 30.0);
        let inf = dec.with_tphi_01(Lifetime::Infinite);
        assert_eq!(inf.dephasing_rate(0, 1), 0.0);
        assert!(DecoherenceParams::new(0.0, 77.0, 30.0, 6.0, 30.0).is_err());
        let closed = DecoherenceParams::<f64>::closed_system();
        assert_eq!(closed.level_decay_rates(), [0.0; 4]);
    }

    #[test]
    fn lifetime_serde_accepts_inf() {
        let l: Lifetime<f64> = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(l, Lifetime::Infinite);
        let l: Lifetime<f64> = serde_json::from_str("12").unwrap();
        assert_eq!(l, Lifetime::Finite(12.0));
        assert_eq!(serde_json::to_string(&Lifetime::<f64>::Infinite).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Lifetime<f64>>("\"soon\"").is_err());
    }

    #[test]
    fn phase_wraps() {
        assert!(close(normalize_phase(-std::f64::consts::FRAC_PI_2), 1.5 * std::f64::consts::PI, 1e-12));
        assert!(close(normalize_phase(7.0 * std::f64::consts::PI), std::f64::consts::PI, 1e-12));
        let d = DriveParams::new(6.0, 5.8, 0.1, 0.1, 30.0).unwrap().with_phase(-1.0);
        assert!(d.rel_phase >= 0.0 && d.rel_phase < std::f64::consts::TAU);
    }

    #[test]
    fn envelope_shapes() {
        let r = Envelope::<f64>::Rectangular;
        assert_eq!(r.value(3.0, 10.0), 1.0);
        let ramp = Envelope::LinearRamp { ramp_ns: 2.0 };
        assert_eq!(ramp.value(0.0, 10.0), 0.0);
        assert_eq!(ramp.value(1.0, 10.0), 0.5);
        assert_eq!(ramp.value(5.0, 10.0), 1.0);
        assert_eq!(ramp.value(9.5, 10.0), 0.25);
    }

    #[test]
    fn measurement_model_bounds() {
        let m = MeasurementModel::<f64>::default();
        assert!(m.validate().is_ok());
        assert!(close(m.click_probability(1.0), 0.83, 1e-15));
        assert_eq!(m.invert(0.03), 0.0);
        assert!(MeasurementModel::new(0.9, 0.2, 10).is_err());
        assert!(MeasurementModel::new(0.8, 0.03, 0).is_err());
    }

    #[test]
    fn density_matrix_checks() {
        let g = DensityMatrix4::<f64>::ground();
        assert!(g.check().is_ok());
        assert_eq!(g.populations(), [1.0, 0.0, 0.0, 0.0]);
        let mut bad = *g.matrix();
        bad[(0, 1)] = Complex::new(0.1, 0.0);
        assert!(DensityMatrix4::from_matrix(bad).is_err());
        let neg = Mat4::from_real_diagonal([1.2, -0.2, 0.0, 0.0]);
        assert!(DensityMatrix4::from_matrix(neg).is_err());
        let dark = dark_state(1.0, 2.0).unwrap();
        let psi = [dark[0], dark[1], Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)];
        assert!(DensityMatrix4::pure(psi).unwrap().check().is_ok());
    }
}
