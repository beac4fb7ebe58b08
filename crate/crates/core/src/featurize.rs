//! Built-in per-atom descriptor: species-resolved radial symmetry functions.
//!
//! Row `i` of the output holds, for every species `s` and radial center
//! `μ_k`, the cutoff-weighted Gaussian density of species-`s` neighbours of
//! atom `i` around distance `μ_k`. Distances use the minimum-image
//! convention on periodic axes, so rows are invariant under rigid motions
//! and permute with the atoms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_configuration, Cell, Configuration, FeatureSet, LabeledDataset, SpeciesTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorParams {
    pub cutoff: f64,
    pub centers: Vec<f64>,
    pub width: f64,
}

impl Default for DescriptorParams {
    /// 6 Å cutoff, 16 centers evenly spaced from 0.5 Å (step 5.5/16 Å), 0.35 Å width.
    fn default() -> Self {
        DescriptorParams::uniform(6.0, 0.5, 16, 0.35)
    }
}

impl DescriptorParams {
    /// `count` centers starting at `first`, evenly spaced over `[first, cutoff)`.
    pub fn uniform(cutoff: f64, first: f64, count: usize, width: f64) -> Self {
        let step = (cutoff - first) / count as f64;
        DescriptorParams {
            cutoff,
            centers: (0..count).map(|k| first + step * k as f64).collect(),
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "width must be positive, got {}",
                self.width
            )));
        }
        if self.centers.is_empty() {
            return Err(Error::InvalidParameter("at least one radial center is required".into()));
        }
        if self.centers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("centers must be strictly increasing".into()));
        }
        if self.centers.iter().any(|&m| !(m < self.cutoff)) {
            return Err(Error::InvalidParameter("centers must lie below the cutoff".into()));
        }
        Ok(())
    }

    /// Output width for a table of `species_count` species.
    pub fn feature_dim(&self, species_count: usize) -> usize {
        species_count * self.centers.len()
    }
}

/// Cosine cutoff ½(cos(πr/r_c) + 1) for r < r_c, else 0.
pub fn cosine_cutoff(r: f64, cutoff: f64) -> f64 {
    if r < cutoff {
        0.5 * ((std::f64::consts::PI * r / cutoff).cos() + 1.0)
    } else {
        0.0
    }
}

/// Minimum-image displacement helper for one cell.
pub(crate) struct Images {
    cell: Cell,
    inverse: Option<[[f64; 3]; 3]>,
}

impl Images {
    pub(crate) fn new(cell: &Cell, cutoff: f64) -> Result<Self> {
        if !cell.is_periodic() {
            return Ok(Images {
                cell: *cell,
                inverse: None,
            });
        }
        let inverse = cell.inverse().ok_or(Error::SingularCell)?;
        let widths = cell.perpendicular_widths();
        for axis in 0..3 {
            if cell.pbc[axis] && widths[axis] < 2.0 * cutoff {
                return Err(Error::CellTooSmall {
                    width: widths[axis],
                    required: 2.0 * cutoff,
                });
            }
        }
        Ok(Images {
            cell: *cell,
            inverse: Some(inverse),
        })
    }

    pub(crate) fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let Some(inv) = self.inverse else {
            return (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        };
        let mut frac = [0.0; 3];
        for k in 0..3 {
            frac[k] = d[0] * inv[0][k] + d[1] * inv[1][k] + d[2] * inv[2][k];
            if self.cell.pbc[k] {
                frac[k] -= frac[k].round();
            }
        }
        let range = |k: usize| if self.cell.pbc[k] { -1i32..=1 } else { 0..=0 };
        let m = self.cell.vectors;
        let mut best = f64::INFINITY;
        // the rounded image is not always nearest in skewed cells; scan neighbours
        for i in range(0) {
            for j in range(1) {
                for k in range(2) {
                    let f = [frac[0] + i as f64, frac[1] + j as f64, frac[2] + k as f64];
                    let mut r2 = 0.0;
                    for c in 0..3 {
                        let x = f[0] * m[0][c] + f[1] * m[1][c] + f[2] * m[2][c];
                        r2 += x * x;
                    }
                    best = best.min(r2);
                }
            }
        }
        best.sqrt()
    }
}

/// Per-atom descriptor matrix of shape `n × (S·K)`; column `(s−1)·K + k`.
pub fn compute_descriptor(c: &Configuration, table: &SpeciesTable, p: &DescriptorParams) -> Result<FeatureSet> {
    p.validate()?;
    validate_configuration(c, table)?;
    let images = Images::new(&c.cell, p.cutoff)?;
    let n = c.n_atoms();
    let k_count = p.centers.len();
    let dim = p.feature_dim(table.len());
    let inv_two_width2 = 1.0 / (2.0 * p.width * p.width);
    let mut data = vec![0.0; n * dim];
    let mut neighbours: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        neighbours.clear();
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = images.distance(c.positions[i], c.positions[j]);
            if r < p.cutoff {
                neighbours.push((r, c.species[j].index()));
            }
        }
        // accumulate in a canonical order so rows do not depend on atom indexing
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(r, slot) in &neighbours {
            let fc = cosine_cutoff(r, p.cutoff);
            let base = i * dim + slot * k_count;
            for (k, &mu) in p.centers.iter().enumerate() {
                let x = r - mu;
                data[base + k] += (-x * x * inv_two_width2).exp() * fc;
            }
        }
    }
    FeatureSet::new(data, dim, c.species.clone())
}

/// Attach descriptor features to every configuration, preserving order.
pub fn featurize_dataset(ds: &LabeledDataset, p: &DescriptorParams) -> Result<LabeledDataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let table = ds.species();
    let features = ds
        .entries()
        .par_iter()
        .map(|e| compute_descriptor(&e.config, table, p))
        .collect::<Result<Vec<_>>>()?;
    ds.with_features(features)
}
