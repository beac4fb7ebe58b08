//! Per-atom error metrics, reported in meV/atom.

use crate::data::Samples;
use crate::error::{Error, Result};

/// eV → meV.
pub const MEV_PER_EV: f64 = 1000.0;

/// `(pred_t − E_t) / n_t` in meV/atom for every configuration.
pub fn per_atom_residuals(predictions: &[f64], energies: &[f64], atom_counts: &[usize]) -> Result<Vec<f64>> {
    if predictions.len() != energies.len() || energies.len() != atom_counts.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: energies.len().min(atom_counts.len()),
        });
    }
    Ok(predictions
        .iter()
        .zip(energies)
        .zip(atom_counts)
        .map(|((p, e), &n)| MEV_PER_EV * (p - e) / n as f64)
        .collect())
}

pub fn rmse(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub fn mae(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    residuals.iter().map(|r| r.abs()).sum::<f64>() / residuals.len() as f64
}

fn counts(samples: &Samples) -> Vec<usize> {
    samples.sets.iter().map(|s| s.n_atoms()).collect()
}

/// RMSE of per-atom residuals, meV/atom.
pub fn rmse_per_atom(predictions: &[f64], samples: &Samples) -> Result<f64> {
    Ok(rmse(&per_atom_residuals(
        predictions,
        &samples.energies,
        &counts(samples),
    )?))
}

/// MAE of per-atom residuals, meV/atom.
pub fn mae_per_atom(predictions: &[f64], samples: &Samples) -> Result<f64> {
    Ok(mae(&per_atom_residuals(
        predictions,
        &samples.energies,
        &counts(samples),
    )?))
}
