//! Explicit-feature form of the composite kernel for a linear base kernel.
//!
//! With `k(x, y) = ⟨x, y⟩` the composite kernel is the inner product of
//! `Ψ(H) = (√(1−α) φ(H), √α φ(H_1), …, √α φ(H_S))` where `φ(A) = C_A Σ_{a∈A} a`.
//! Ridge regression in `Ψ`-space recovers one shared weight `w_0` and one
//! weight `w_s` per species, and predicts
//! `⟨w_0, φ(H)⟩ + Σ_s ⟨w_s, φ(H_s)⟩`. A block whose scale vanishes
//! (α = 0 or α = 1) is dropped and its weight reported as zero.

use nalgebra::{DMatrix, DVector};

use crate::data::{FeatureSet, Samples};
use crate::error::{Error, Result};
use crate::kernels::{BaseKernel, KernelSpec, SpeciesNorm};
use crate::transform::{invert_labels, transform_labels, LabelTransform, TransformKind};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiWeightModel {
    pub spec: KernelSpec,
    /// Shared weight `w_0`, length `d`.
    pub shared: Vec<f64>,
    /// Per-species weights `w_s`, one row of length `d` per species slot.
    pub per_species: Vec<Vec<f64>>,
    pub lambda: f64,
    pub label_transform: LabelTransform,
}

/// `(φ(H), [φ(H_s)])` for one configuration.
pub fn embeddings(spec: &KernelSpec, set: &FeatureSet) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = set.dim();
    let n = set.n_atoms();
    let mut whole = vec![0.0; d];
    let mut species = vec![vec![0.0; d]; spec.species_count];
    let mut counts = vec![0usize; spec.species_count];
    for (row, s) in set.rows().zip(set.species()) {
        if s.0 == 0 || s.index() >= spec.species_count {
            return Err(Error::UnknownSpecies {
                id: s.0,
                count: spec.species_count,
            });
        }
        counts[s.index()] += 1;
        for (j, x) in row.iter().enumerate() {
            whole[j] += x;
            species[s.index()][j] += x;
        }
    }
    let c = spec.mode.constant(n);
    whole.iter_mut().for_each(|x| *x *= c);
    for (v, &m) in species.iter_mut().zip(&counts) {
        let cs = match spec.species_norm {
            SpeciesNorm::Subset => spec.mode.constant(m),
            SpeciesNorm::Global => c,
        };
        v.iter_mut().for_each(|x| *x *= cs);
    }
    Ok((whole, species))
}

struct Layout {
    d: usize,
    s: usize,
    whole: bool,
    species: bool,
}

impl Layout {
    fn new(spec: &KernelSpec, d: usize) -> Self {
        Layout {
            d,
            s: spec.species_count,
            whole: spec.alpha < 1.0,
            species: spec.alpha > 0.0,
        }
    }

    fn width(&self) -> usize {
        self.d * (usize::from(self.whole) + if self.species { self.s } else { 0 })
    }

    fn psi(&self, spec: &KernelSpec, set: &FeatureSet) -> Result<Vec<f64>> {
        let (whole, species) = embeddings(spec, set)?;
        let mut out = Vec::with_capacity(self.width());
        if self.whole {
            let a = (1.0 - spec.alpha).sqrt();
            out.extend(whole.iter().map(|x| a * x));
        }
        if self.species {
            let b = spec.alpha.sqrt();
            for v in &species {
                out.extend(v.iter().map(|x| b * x));
            }
        }
        Ok(out)
    }
}

/// Primal ridge regression on `Ψ`. Requires a linear base kernel.
pub fn fit_multiweight_explicit(
    train: &Samples,
    spec: &KernelSpec,
    lambda: f64,
    transform: TransformKind,
) -> Result<MultiWeightModel> {
    spec.validate()?;
    if spec.base != BaseKernel::Linear {
        return Err(Error::InvalidParameter(
            "explicit multi-weight fitting needs a linear base kernel".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let d = train.sets[0].dim();
    if let Some(bad) = train.sets.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        });
    }
    let t_kind = LabelTransform::fit(transform, train)?;
    let y = DVector::from_vec(transform_labels(&t_kind, train)?);
    let layout = Layout::new(spec, d);
    let p = layout.width();
    let rows = train
        .sets
        .iter()
        .map(|s| layout.psi(spec, s))
        .collect::<Result<Vec<_>>>()?;
    let psi = DMatrix::from_fn(train.len(), p, |i, j| rows[i][j]);
    let a = psi.transpose() * &psi + DMatrix::identity(p, p) * lambda;
    let w = a
        .cholesky()
        .ok_or(Error::SingularGram { lambda })?
        .solve(&(psi.transpose() * y));

    let mut shared = vec![0.0; d];
    let mut per_species = vec![vec![0.0; d]; layout.s];
    let mut off = 0;
    if layout.whole {
        let a = (1.0 - spec.alpha).sqrt();
        for j in 0..d {
            shared[j] = a * w[j];
        }
        off = d;
    }
    if layout.species {
        let b = spec.alpha.sqrt();
        for (k, ws) in per_species.iter_mut().enumerate() {
            for j in 0..d {
                ws[j] = b * w[off + k * d + j];
            }
        }
    }
    Ok(MultiWeightModel {
        spec: *spec,
        shared,
        per_species,
        lambda,
        label_transform: t_kind,
    })
}

pub fn predict_multiweight(model: &MultiWeightModel, queries: &[FeatureSet]) -> Result<Vec<f64>> {
    let d = model.shared.len();
    let raw = queries
        .iter()
        .map(|q| {
            if q.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: q.dim(),
                });
            }
            let (whole, species) = embeddings(&model.spec, q)?;
            let mut v = dot(&model.shared, &whole);
            for (w, e) in model.per_species.iter().zip(&species) {
                v += dot(w, e);
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    invert_labels(&model.label_transform, &raw, queries)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
