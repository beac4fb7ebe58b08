//! Label transforms applied before regression and undone after prediction.
//!
//! Two protocols are supported besides the identity: standardization of
//! the energies, and removal of a per-species baseline
//! `E ↦ E − Σ_i ε̄_{z_i}`, whose inverse re-adds the baseline of the
//! query's own composition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{composition, FeatureSet, Samples, SpeciesId};
use crate::error::{Error, Result};

/// Per-species baseline energies ε̄ (eV), indexed by zero-based species slot.
/// `None` marks a species that was absent when the table was fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesEnergyTable {
    pub energies: Vec<Option<f64>>,
}

impl SpeciesEnergyTable {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("species energies must be finite".into()));
        }
        Ok(SpeciesEnergyTable {
            energies: energies.into_iter().map(Some).collect(),
        })
    }

    pub fn get(&self, s: SpeciesId) -> Option<f64> {
        self.energies.get(s.index()).copied().flatten()
    }

    /// `Σ_s count_s · ε̄_s` for the given atom species.
    pub fn baseline(&self, species: &[SpeciesId]) -> Result<f64> {
        let counts = composition(species, self.energies.len());
        if let Some(bad) = species.iter().find(|s| s.index() >= self.energies.len()) {
            return Err(Error::MissingSpeciesBaseline(bad.0));
        }
        let mut total = 0.0;
        for (slot, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let e = self.energies[slot].ok_or(Error::MissingSpeciesBaseline(slot as u32 + 1))?;
            total += c as f64 * e;
        }
        Ok(total)
    }
}

/// Least-squares fit of `E_t ≈ Σ_s count_{t,s} · ε̄_s` over the training set.
///
/// Only species that occur somewhere in `train` receive an entry.
pub fn fit_species_energy_table(train: &Samples) -> Result<SpeciesEnergyTable> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let s_count = train.species.len();
    let counts: Vec<Vec<usize>> = train.sets.iter().map(|s| composition(s.species(), s_count)).collect();
    let present: Vec<usize> = (0..s_count).filter(|&k| counts.iter().any(|c| c[k] > 0)).collect();
    let (t, p) = (counts.len(), present.len());
    let a = DMatrix::from_fn(t, p, |i, j| counts[i][present[j]] as f64);
    let b = DVector::from_column_slice(&train.energies);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * (t.max(p) as f64) * f64::EPSILON * 16.0;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < p {
        return Err(Error::RankDeficientComposition { rank, species: p });
    }
    let x = svd
        .solve(&b, tol)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    let mut energies = vec![None; s_count];
    for (j, &k) in present.iter().enumerate() {
        energies[k] = Some(x[j]);
    }
    Ok(SpeciesEnergyTable { energies })
}

/// Composition-only energy predictions: `Σ_s count_s · ε̄_s` per configuration.
pub fn baseline_predictions(table: &SpeciesEnergyTable, sets: &[FeatureSet]) -> Result<Vec<f64>> {
    sets.iter().map(|s| table.baseline(s.species())).collect()
}

/// Which transform to fit on a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Standardize,
    SpeciesBaseline,
}

/// A fitted label transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelTransform {
    Identity,
    Standardize { mean: f64, std: f64 },
    SpeciesBaseline { table: SpeciesEnergyTable },
}

impl LabelTransform {
    pub fn fit(kind: TransformKind, train: &Samples) -> Result<Self> {
        match kind {
            TransformKind::Identity => Ok(LabelTransform::Identity),
            TransformKind::Standardize => {
                let e = &train.energies;
                if e.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                let n = e.len() as f64;
                let mean = e.iter().sum::<f64>() / n;
                let var = e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                if !(std > 0.0) || !std.is_finite() {
                    return Err(Error::DegenerateLabels);
                }
                Ok(LabelTransform::Standardize { mean, std })
            }
            TransformKind::SpeciesBaseline => Ok(LabelTransform::SpeciesBaseline {
                table: fit_species_energy_table(train)?,
            }),
        }
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            LabelTransform::Identity => TransformKind::Identity,
            LabelTransform::Standardize { .. } => TransformKind::Standardize,
            LabelTransform::SpeciesBaseline { .. } => TransformKind::SpeciesBaseline,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LabelTransform::Identity => "identity",
            LabelTransform::Standardize { .. } => "standardize",
            LabelTransform::SpeciesBaseline { .. } => "species_baseline",
        }
    }

    pub fn forward(&self, energy: f64, species: &[SpeciesId]) -> Result<f64> {
        Ok(match self {
            LabelTransform::Identity => energy,
            LabelTransform::Standardize { mean, std } => (energy - mean) / std,
            LabelTransform::SpeciesBaseline { table } => energy - table.baseline(species)?,
        })
    }

    pub fn inverse(&self, value: f64, species: &[SpeciesId]) -> Result<f64> {
        Ok(match self {
            LabelTransform::Identity => value,
            LabelTransform::Standardize { mean, std } => value * std + mean,
            LabelTransform::SpeciesBaseline { table } => value + table.baseline(species)?,
        })
    }
}

/// Transformed training labels.
pub fn transform_labels(t: &LabelTransform, samples: &Samples) -> Result<Vec<f64>> {
    samples
        .sets
        .iter()
        .zip(&samples.energies)
        .map(|(s, &e)| t.forward(e, s.species()))
        .collect()
}

/// Map model outputs back to energies using each query's composition.
pub fn invert_labels(t: &LabelTransform, predictions: &[f64], sets: &[FeatureSet]) -> Result<Vec<f64>> {
    if predictions.len() != sets.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: sets.len(),
        });
    }
    predictions
        .iter()
        .zip(sets)
        .map(|(&p, s)| t.inverse(p, s.species()))
        .collect()
}
