//! Forward and inverse readout model with binomial counting noise.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::MeasurementModel;

/// Noise-free switching fraction expected for a true population `p2_true`.
pub fn expected_observation(p2_true: f64, m: &MeasurementModel<f64>) -> Result<f64> {
    if !(0.0..=1.0).contains(&p2_true) {
        return Err(Error::invalid("p2_true", format!("{p2_true} is not a probability")));
    }
    let p = m.click_probability(p2_true);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("fidelity", format!("switching probability {p} outside [0, 1]")));
    }
    Ok(p)
}

/// Draws the observed switching fraction over `m.trials` shots.
pub fn apply_measurement<R: Rng + ?Sized>(p2_true: f64, m: &MeasurementModel<f64>, rng: &mut R) -> Result<f64> {
    let p = expected_observation(p2_true, m)?;
    let dist = Binomial::new(m.trials, p).map_err(|e| Error::invalid("trials", e.to_string()))?;
    Ok(dist.sample(rng) as f64 / m.trials as f64)
}

/// Population estimate from an observed fraction, clamped to [0, 1].
pub fn invert_measurement(observed: f64, m: &MeasurementModel<f64>) -> f64 {
    m.invert(observed)
}
