//! Fixed-step RK4 propagation of the density matrix under the rotating-frame
//! Hamiltonian, cascaded energy relaxation and pairwise pure dephasing.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianConfig, RotatingFrameHamiltonian};
use crate::linalg::{Mat4, DIM};
use crate::model::{DecoherenceParams, DensityMatrix4, DeviceParams, DriveParams, Envelope, N_LEVELS};
use crate::scalar::Real;

/// Step size, sampling and monitoring of the integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct IntegratorConfig<T> {
    pub dt_ns: T,
    pub record_stride: usize,
    pub positivity_check: bool,
    /// Propagation aborts when an eigenvalue drops below −tolerance.
    ///
    /// Pairwise dephasing times need not form a completely positive map; the
    /// fig2 preset (Tφ02 = 6 ns against Tφ01 = Tφ12 = 30 ns) transiently
    /// reaches about −1e−4, so the default sits above that.
    #[serde(default = "default_positivity_tolerance")]
    pub positivity_tolerance: T,
}

fn default_positivity_tolerance<T: Real>() -> T {
    T::lit(1e-3)
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            dt_ns: T::lit(0.01),
            record_stride: 10,
            positivity_check: true,
            positivity_tolerance: default_positivity_tolerance(),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ns > T::zero()) || !self.dt_ns.is_finite() {
            return Err(Error::invalid("dt_ns", "must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be at least 1"));
        }
        if !(self.positivity_tolerance >= T::zero()) {
            return Err(Error::invalid("positivity_tolerance", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_dt(mut self, dt_ns: T) -> Self {
        self.dt_ns = dt_ns;
        self
    }
}

/// Default number of relative-phase samples in [`phase_averaged_populations`].
pub const DEFAULT_PHASES: usize = 16;

/// Recorded evolution of one (or a phase-averaged family of) run(s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Trajectory<T> {
    /// Sample times k·stride·dt, ns.
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix4<T>>,
    /// End of the pulse, ns; may fall between recorded samples.
    pub final_time: T,
    pub final_state: DensityMatrix4<T>,
    /// Number of trace renormalizations that were needed.
    pub renormalizations: usize,
    /// Number of recorded states with a slightly negative eigenvalue.
    pub positivity_warnings: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn populations(&self) -> Vec<[T; N_LEVELS]> {
        self.states.iter().map(|s| s.populations()).collect()
    }

    pub fn final_populations(&self) -> [T; N_LEVELS] {
        self.final_state.populations()
    }

    /// Recorded samples followed by the final state when it is not already
    /// the last sample.
    pub fn samples_with_final(&self) -> Vec<(T, [T; N_LEVELS])> {
        let mut out: Vec<_> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, s.populations()))
            .collect();
        if self.times.last().map_or(true, |&t| t < self.final_time) {
            out.push((self.final_time, self.final_populations()));
        }
        out
    }

    pub fn max_population(&self, level: usize) -> T {
        self.states
            .iter()
            .chain(std::iter::once(&self.final_state))
            .map(|s| s.population(level))
            .fold(T::zero(), T::max)
    }
}

/// −i[H, ρ] + relaxation + dephasing, for a general Hermitian `h`.
pub fn master_equation_rhs<T: Real>(
    rho: &DensityMatrix4<T>,
    h: &Mat4<T>,
    dec: &DecoherenceParams<T>,
) -> Mat4<T> {
    let minus_i = Complex::new(T::zero(), -T::one());
    let comm = h.commutator(rho.matrix());
    let mut out = Mat4::zeros();
    for i in 0..DIM {
        for j in 0..DIM {
            out.m[i][j] = minus_i * comm.m[i][j];
        }
    }
    out += Dissipator::new(dec).apply_full(rho.matrix());
    out
}

/// Precomputed relaxation and dephasing rates.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Dissipator<T> {
    level: [T; DIM],
    coherence: [[T; DIM]; DIM],
}

impl<T: Real> Dissipator<T> {
    pub(crate) fn new(dec: &DecoherenceParams<T>) -> Self {
        let level = dec.level_decay_rates();
        let mut coherence = [[T::zero(); DIM]; DIM];
        for (i, row) in coherence.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                if i != j {
                    *c = dec.coherence_decay_rate(i, j);
                }
            }
        }
        Self { level, coherence }
    }

    fn apply_full(&self, rho: &Mat4<T>) -> Mat4<T> {
        let mut out = Mat4::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                if i != j {
                    out.m[i][j] = rho.m[i][j] * (-self.coherence[i][j]);
                }
            }
        }
        for n in 0..DIM {
            let mut d = -self.level[n] * rho.m[n][n].re;
            if n + 1 < DIM {
                d += self.level[n + 1] * rho.m[n + 1][n + 1].re;
            }
            out.m[n][n] = Complex::new(d, T::zero());
        }
        out
    }
}

/// Hamiltonian restricted to nearest-neighbour couplings, which is all the
/// rotating-frame model ever produces.
#[derive(Clone, Copy, Debug)]
struct Tridiagonal<T> {
    diag: [T; DIM],
    upper: [Complex<T>; DIM - 1],
}

/// Most distinct beat frequencies a Hamiltonian can carry: two fields on
/// three transitions, co- and counter-rotating.
const MAX_BEATS: usize = 12;

/// [`RotatingFrameHamiltonian`] with the relative phase folded into each
/// coefficient and beat phasors shared between terms of equal |β|.
#[derive(Clone, Debug)]
struct CompiledHamiltonian<T> {
    diag: [T; DIM],
    static_upper: [Complex<T>; DIM - 1],
    beats: Vec<T>,
    // (transition, index into `beats`, coefficient, β < 0)
    terms: Vec<(usize, usize, Complex<T>, bool)>,
    envelope: Envelope<T>,
    t0: T,
}

impl<T: Real> CompiledHamiltonian<T> {
    fn new(h: &RotatingFrameHamiltonian<T>, rel_phase: T, t0: T) -> Self {
        let mut static_upper = [Complex::new(T::zero(), T::zero()); DIM - 1];
        for term in h.static_terms() {
            let arg = term.phase_offset + term.phase_sign * rel_phase;
            static_upper[term.level] = static_upper[term.level] + Complex::from_polar(term.amplitude, arg);
        }
        let mut beats: Vec<T> = Vec::new();
        let mut terms = Vec::new();
        for term in &h.beat_terms {
            let arg = term.phase_offset + term.phase_sign * rel_phase;
            let coef = Complex::from_polar(term.amplitude, arg);
            let key = term.beat.abs();
            let idx = match beats.iter().position(|&b| b == key) {
                Some(i) => i,
                None => {
                    beats.push(key);
                    beats.len() - 1
                }
            };
            terms.push((term.level, idx, coef, term.beat < T::zero()));
        }
        assert!(beats.len() <= MAX_BEATS, "too many distinct beat frequencies");
        Self {
            diag: h.detunings(),
            static_upper,
            beats,
            terms,
            envelope: h.envelope(),
            t0,
        }
    }

    #[inline]
    fn at(&self, t: T) -> Tridiagonal<T> {
        let env = self.envelope.value(t, self.t0);
        let mut upper = self.static_upper;
        if !self.terms.is_empty() {
            let mut ph = [Complex::new(T::zero(), T::zero()); MAX_BEATS];
            for (p, &b) in ph.iter_mut().zip(&self.beats) {
                let (s, c) = (b * t).sin_cos();
                *p = Complex::new(c, s);
            }
            for &(level, idx, coef, negative) in &self.terms {
                let p = if negative { ph[idx].conj() } else { ph[idx] };
                upper[level] = upper[level] + coef * p;
            }
        }
        if env != T::one() {
            for u in upper.iter_mut() {
                *u = *u * env;
            }
        }
        Tridiagonal {
            diag: self.diag,
            upper,
        }
    }
}

/// Upper triangle of −i[H, ρ] + D(ρ), mirrored so the result is exactly
/// Hermitian.
#[inline]
fn fast_rhs<T: Real>(rho: &Mat4<T>, h: &Tridiagonal<T>, diss: &Dissipator<T>) -> Mat4<T> {
    // H elements: H[i][i+1] = upper[i], H[i+1][i] = conj(upper[i]).
    let hu = h.upper;
    let hl = [hu[0].conj(), hu[1].conj(), hu[2].conj()];
    let mut out = Mat4::zeros();
    for i in 0..DIM {
        for j in i..DIM {
            // (Hρ)_ij − (ρH)_ij
            let mut c = rho.m[i][j] * (h.diag[i] - h.diag[j]);
            if i > 0 {
                c = c + hl[i - 1] * rho.m[i - 1][j];
            }
            if i + 1 < DIM {
                c = c + hu[i] * rho.m[i + 1][j];
            }
            if j > 0 {
                c = c - rho.m[i][j - 1] * hu[j - 1];
            }
            if j + 1 < DIM {
                c = c - rho.m[i][j + 1] * hl[j];
            }
            // −i·c
            let mut v = Complex::new(c.im, -c.re);
            if i == j {
                let mut d = -diss.level[i] * rho.m[i][i].re;
                if i + 1 < DIM {
                    d += diss.level[i + 1] * rho.m[i + 1][i + 1].re;
                }
                v = Complex::new(v.re + d, T::zero());
                out.m[i][i] = v;
            } else {
                v = v - rho.m[i][j] * diss.coherence[i][j];
                out.m[i][j] = v;
                out.m[j][i] = v.conj();
            }
        }
    }
    out
}

#[inline]
fn axpy<T: Real>(base: &Mat4<T>, a: T, x: &Mat4<T>) -> Mat4<T> {
    let mut out = *base;
    for i in 0..DIM {
        for j in 0..DIM {
            out.m[i][j] = out.m[i][j] + x.m[i][j] * a;
        }
    }
    out
}

fn rk4_step<T: Real>(
    rho: &Mat4<T>,
    h0: &Tridiagonal<T>,
    hm: &Tridiagonal<T>,
    h1: &Tridiagonal<T>,
    diss: &Dissipator<T>,
    dt: T,
) -> Mat4<T> {
    let half = dt * T::lit(0.5);
    let k1 = fast_rhs(rho, h0, diss);
    let k2 = fast_rhs(&axpy(rho, half, &k1), hm, diss);
    let k3 = fast_rhs(&axpy(rho, half, &k2), hm, diss);
    let k4 = fast_rhs(&axpy(rho, dt, &k3), h1, diss);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *rho;
    for i in 0..DIM {
        for j in 0..DIM {
            let inc = k1.m[i][j] + (k2.m[i][j] + k3.m[i][j]) * two + k4.m[i][j];
            out.m[i][j] = out.m[i][j] + inc * sixth;
        }
    }
    out
}

/// Number of full steps of size `dt` that fit in `t`, with a relative
/// tolerance so that 30 / 0.01 counts as 3000.
pub(crate) fn full_steps<T: Real>(t: T, dt: T) -> usize {
    let ratio = t / dt;
    let r = ratio.round();
    let n = if (ratio - r).abs() <= T::lit(1e-9) * r.max(T::one()) {
        r
    } else {
        ratio.floor()
    };
    n.to_usize().unwrap_or(0)
}

/// Drives one run on the global step grid and hands out states at requested
/// times without perturbing the march.
struct Stepper<'a, T> {
    compiled: CompiledHamiltonian<T>,
    diss: Dissipator<T>,
    cfg: &'a IntegratorConfig<T>,
    rho: Mat4<T>,
    step: usize,
    h_now: Tridiagonal<T>,
    renormalizations: usize,
    positivity_warnings: usize,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(
        h: &RotatingFrameHamiltonian<T>,
        rel_phase: T,
        t0: T,
        dec: &DecoherenceParams<T>,
        rho0: &DensityMatrix4<T>,
        cfg: &'a IntegratorConfig<T>,
    ) -> Self {
        let compiled = CompiledHamiltonian::new(h, rel_phase, t0);
        let h_now = compiled.at(T::zero());
        Self {
            compiled,
            diss: Dissipator::new(dec),
            cfg,
            rho: *rho0.matrix(),
            step: 0,
            h_now,
            renormalizations: 0,
            positivity_warnings: 0,
        }
    }

    fn time_of(&self, step: usize) -> T {
        self.cfg.dt_ns * T::from_usize(step).unwrap_or_else(T::zero)
    }

    fn advance(&mut self) {
        let dt = self.cfg.dt_ns;
        let t = self.time_of(self.step);
        let hm = self.compiled.at(t + dt * T::lit(0.5));
        let h1 = self.compiled.at(self.time_of(self.step + 1));
        self.rho = rk4_step(&self.rho, &self.h_now, &hm, &h1, &self.diss, dt);
        self.h_now = h1;
        self.step += 1;
        if self.step % self.cfg.record_stride == 0 {
            self.rho = self.condition(self.rho);
        }
    }

    /// Re-Hermitizes and renormalizes only when drift is visible.
    fn condition(&mut self, m: Mat4<T>) -> Mat4<T> {
        let mut m = m;
        if m.hermiticity_defect() > T::lit(T::HERMITIAN_TOL) {
            m = m.hermitian_part();
        }
        let tr = m.trace().re;
        if (tr - T::one()).abs() > T::lit(T::TRACE_TOL) {
            self.renormalizations += 1;
            log::debug!("trace drifted to {tr}; renormalizing");
            m = m.scale(T::one() / tr);
        }
        m
    }

    /// State at `t`, reached by a shortened step from the last grid point.
    fn state_at(&mut self, t: T) -> Mat4<T> {
        let n = full_steps(t, self.cfg.dt_ns);
        while self.step < n {
            self.advance();
        }
        let rem = t - self.time_of(n);
        if rem > self.cfg.dt_ns * T::lit(1e-9) {
            let t_n = self.time_of(n);
            let hm = self.compiled.at(t_n + rem * T::lit(0.5));
            let h1 = self.compiled.at(t);
            let out = rk4_step(&self.rho, &self.h_now, &hm, &h1, &self.diss, rem);
            self.condition(out)
        } else {
            self.rho
        }
    }

    fn checked(&mut self, m: Mat4<T>, t: T) -> Result<DensityMatrix4<T>> {
        let rho = DensityMatrix4::from_matrix_unchecked(m);
        if self.cfg.positivity_check && !positive_within(&m, T::lit(-T::POSITIVITY_WARN)) {
            let ev = rho.min_eigenvalue();
            if ev < -self.cfg.positivity_tolerance {
                return Err(Error::Positivity {
                    time_ns: t.to_f64_lossy(),
                    min_eigenvalue: ev.to_f64_lossy(),
                });
            }
            if ev < T::lit(T::POSITIVITY_WARN) {
                self.positivity_warnings += 1;
            }
        }
        Ok(rho)
    }
}

/// Cholesky test of ρ + shift·I; success proves λ_min > −shift.
fn positive_within<T: Real>(m: &Mat4<T>, shift: T) -> bool {
    let mut l = [[Complex::new(T::zero(), T::zero()); DIM]; DIM];
    for j in 0..DIM {
        let mut d = m.m[j][j].re + shift;
        for k in 0..j {
            d -= l[j][k].norm_sqr();
        }
        if !(d > T::zero()) {
            return false;
        }
        let djj = d.sqrt();
        l[j][j] = Complex::new(djj, T::zero());
        for i in (j + 1)..DIM {
            let mut s = m.m[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k].conj();
            }
            l[i][j] = s / djj;
        }
    }
    true
}

fn run_single<T: Real>(
    h: &RotatingFrameHamiltonian<T>,
    rel_phase: T,
    rho0: &DensityMatrix4<T>,
    t0: T,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let mut stepper = Stepper::new(h, rel_phase, t0, dec, rho0, cfg);
    let n = full_steps(t0, cfg.dt_ns);
    let mut times = Vec::with_capacity(n / cfg.record_stride + 1);
    let mut states = Vec::with_capacity(n / cfg.record_stride + 1);
    let first = stepper.checked(stepper.rho, T::zero())?;
    times.push(T::zero());
    states.push(first);
    while stepper.step < n {
        stepper.advance();
        if stepper.step % cfg.record_stride == 0 {
            let t = stepper.time_of(stepper.step);
            let s = stepper.checked(stepper.rho, t)?;
            times.push(t);
            states.push(s);
        }
    }
    let last = stepper.state_at(t0);
    let final_state = stepper.checked(last, t0)?;
    Ok(Trajectory {
        times,
        states,
        final_time: t0,
        final_state,
        renormalizations: stepper.renormalizations,
        positivity_warnings: stepper.positivity_warnings,
    })
}

fn validate_inputs<T: Real>(
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<()> {
    device.validate()?;
    drive.validate()?;
    dec.validate()?;
    cfg.validate()
}

/// Propagates `rho0` for the pulse duration `drive.t0_ns`.
pub fn propagate<T: Real>(
    rho0: &DensityMatrix4<T>,
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    propagate_with(rho0, device, drive, dec, cfg, &HamiltonianConfig::default())
}

/// [`propagate`] with explicit dipole ratios and RWA cutoff.
pub fn propagate_with<T: Real>(
    rho0: &DensityMatrix4<T>,
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
    hcfg: &HamiltonianConfig<T>,
) -> Result<Trajectory<T>> {
    validate_inputs(device, drive, dec, cfg)?;
    let h = RotatingFrameHamiltonian::new(device, drive, hcfg);
    run_single(&h, drive.rel_phase, rho0, drive.t0_ns, dec, cfg)
}

fn phase_of<T: Real>(k: usize, n: usize) -> T {
    T::two_pi() * T::from_usize(k).unwrap_or_else(T::zero) / T::from_usize(n).unwrap_or_else(T::one)
}

fn average_states<T: Real>(members: &[Vec<DensityMatrix4<T>>]) -> Vec<DensityMatrix4<T>> {
    let n = T::from_usize(members.len()).unwrap_or_else(T::one);
    let len = members[0].len();
    (0..len)
        .map(|i| {
            let mut acc = Mat4::zeros();
            for m in members {
                acc += *m[i].matrix();
            }
            DensityMatrix4::from_matrix_unchecked(acc.scale(T::one() / n))
        })
        .collect()
}

/// Averages runs over `n_phases` equally spaced relative phases 2πk/n.
///
/// The drive's own `rel_phase` is ignored. Members run in parallel and are
/// summed in index order, so the result does not depend on scheduling.
pub fn phase_averaged_populations<T: Real>(
    rho0: &DensityMatrix4<T>,
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
    n_phases: usize,
) -> Result<Trajectory<T>> {
    phase_averaged_with(rho0, device, drive, dec, cfg, &HamiltonianConfig::default(), n_phases)
}

pub fn phase_averaged_with<T: Real>(
    rho0: &DensityMatrix4<T>,
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
    hcfg: &HamiltonianConfig<T>,
    n_phases: usize,
) -> Result<Trajectory<T>> {
    if n_phases == 0 {
        return Err(Error::invalid("n_phases", "need at least one phase sample"));
    }
    validate_inputs(device, drive, dec, cfg)?;
    let h = RotatingFrameHamiltonian::new(device, drive, hcfg);
    let runs: Vec<Trajectory<T>> = (0..n_phases)
        .into_par_iter()
        .map(|k| run_single(&h, phase_of(k, n_phases), rho0, drive.t0_ns, dec, cfg))
        .collect::<Result<_>>()?;
    let states: Vec<Vec<_>> = runs.iter().map(|r| r.states.clone()).collect();
    let finals: Vec<Vec<_>> = runs.iter().map(|r| vec![r.final_state]).collect();
    Ok(Trajectory {
        times: runs[0].times.clone(),
        states: average_states(&states),
        final_time: drive.t0_ns,
        final_state: average_states(&finals)[0],
        renormalizations: runs.iter().map(|r| r.renormalizations).sum(),
        positivity_warnings: runs.iter().map(|r| r.positivity_warnings).sum(),
    })
}

/// States at each of `times` (ascending) for a rectangular pulse, obtained from
/// one march per phase. Each value is bit-identical to a separate
/// [`phase_averaged_populations`] run with `t0` set to that time.
pub fn phase_averaged_at_times<T: Real>(
    rho0: &DensityMatrix4<T>,
    device: &DeviceParams<T>,
    drive: &DriveParams<T>,
    dec: &DecoherenceParams<T>,
    cfg: &IntegratorConfig<T>,
    hcfg: &HamiltonianConfig<T>,
    n_phases: usize,
    times: &[T],
) -> Result<Vec<DensityMatrix4<T>>> {
    if n_phases == 0 {
        return Err(Error::invalid("n_phases", "need at least one phase sample"));
    }
    if !drive.envelope.is_rectangular() {
        return Err(Error::Domain(
            "time sampling from a single run needs a rectangular envelope".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < T::zero()) {
        return Err(Error::Domain("sample times must be nonnegative and ascending".into()));
    }
    validate_inputs(device, drive, dec, cfg)?;
    let h = RotatingFrameHamiltonian::new(device, drive, hcfg);
    // The rectangular envelope never reads t0, so one Hamiltonian serves all.
    let members: Vec<Vec<DensityMatrix4<T>>> = (0..n_phases)
        .into_par_iter()
        .map(|k| {
            let t_end = times.last().copied().unwrap_or_else(T::zero);
            let mut stepper = Stepper::new(&h, phase_of(k, n_phases), t_end, dec, rho0, cfg);
            times
                .iter()
                .map(|&t| {
                    let m = stepper.state_at(t);
                    stepper.checked(m, t)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(average_states(&members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rabi_from_mhz;

    fn dev() -> DeviceParams<f64> {
        DeviceParams::new(6.205, 5.865).unwrap()
    }

    fn fig2_dec() -> DecoherenceParams<f64> {
        DecoherenceParams::new(108.0, 77.0, 30.0, 6.0, 30.0).unwrap()
    }

    #[test]
    fn ground_state_is_stationary_without_drive() {
        let rho = DensityMatrix4::ground();
        let out = master_equation_rhs(&rho, &Mat4::zeros(), &fig2_dec());
        assert_eq!(out.max_abs_diff(&Mat4::zeros()), 0.0);
    }

    #[test]
    fn excited_state_decays_at_t1() {
        let rho = DensityMatrix4::basis(1);
        let out = master_equation_rhs(&rho, &Mat4::zeros(), &fig2_dec());
        assert!((out[(1, 1)].re + 1.0 / 108.0).abs() < 1e-15);
        assert!((out[(0, 0)].re - 1.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn zero_two_coherence_decays_at_gamma_02() {
        let mut m = Mat4::zeros();
        m[(0, 0)] = Complex::new(0.5, 0.0);
        m[(2, 2)] = Complex::new(0.5, 0.0);
        m[(0, 2)] = Complex::new(0.5, 0.0);
        m[(2, 0)] = Complex::new(0.5, 0.0);
        let rho = DensityMatrix4::from_matrix(m).unwrap();
        let out = master_equation_rhs(&rho, &Mat4::zeros(), &fig2_dec());
        let rate = 1.0 / (2.0 * 77.0) + 1.0 / 6.0;
        assert!((out[(0, 2)].re + rate * 0.5).abs() < 1e-15);
        let mhz = rate / (2.0 * std::f64::consts::PI) * 1e3;
        assert!((mhz - 27.5).abs() < 0.3);
    }

    #[test]
    fn fast_rhs_agrees_with_general_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let drive = DriveParams::new(6.03, 5.8, rabi_from_mhz(48.0), rabi_from_mhz(32.0), 30.0).unwrap();
        let h = RotatingFrameHamiltonian::new(&dev(), &drive, &HamiltonianConfig::default());
        let dec = fig2_dec();
        let diss = Dissipator::new(&dec);
        for _ in 0..50 {
            let phi: f64 = rng.gen_range(0.0..6.28);
            let t: f64 = rng.gen_range(0.0..50.0);
            let compiled = CompiledHamiltonian::new(&h, phi, 30.0);
            let tri = compiled.at(t);
            let full = h.evaluate_at(t, phi);
            for i in 0..4 {
                assert!((full[(i, i)].re - tri.diag[i]).abs() < 1e-12);
            }
            for i in 0..3 {
                assert!((full[(i, i + 1)] - tri.upper[i]).norm() < 1e-12);
            }
            let psi: [Complex<f64>; 4] =
                std::array::from_fn(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let rho = DensityMatrix4::pure(psi).unwrap();
            let a = master_equation_rhs(&rho, &full, &dec);
            let b = fast_rhs(rho.matrix(), &tri, &diss);
            assert!(a.max_abs_diff(&b) < 1e-12);
            assert_eq!(b.hermiticity_defect(), 0.0);
        }
    }

    #[test]
    fn step_count_tolerates_rounding() {
        assert_eq!(full_steps(30.0, 0.01), 3000);
        assert_eq!(full_steps(0.3, 0.1), 3);
        assert_eq!(full_steps(0.35, 0.1), 3);
        assert_eq!(full_steps(0.0, 0.1), 0);
    }

    #[test]
    fn shortened_last_step_reaches_t0() {
        let drive = DriveParams::new(6.035, 5.865, rabi_from_mhz(48.0), 0.0, 1.005).unwrap();
        let cfg = IntegratorConfig::default();
        let tr = propagate(&DensityMatrix4::ground(), &dev(), &drive, &fig2_dec(), &cfg).unwrap();
        assert_eq!(tr.final_time, 1.005);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert_eq!(tr.samples_with_final().len(), tr.times.len() + 1);
    }

    #[test]
    fn cholesky_screen() {
        assert!(positive_within(&Mat4::<f64>::projector(0), 1e-9));
        let neg = Mat4::from_real_diagonal([1.0, -1e-3, 0.0, 0.0]);
        assert!(!positive_within(&neg, 1e-9));
    }

    #[test]
    fn zero_phases_rejected() {
        let drive = DriveParams::new(6.035, 5.865, 0.1, 0.1, 1.0).unwrap();
        let r = phase_averaged_populations(
            &DensityMatrix4::ground(),
            &dev(),
            &drive,
            &fig2_dec(),
            &IntegratorConfig::default(),
            0,
        );
        assert!(r.is_err());
    }
}
