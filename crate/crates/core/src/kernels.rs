//! Set kernels over per-atom feature rows.
//!
//! The mean-embedding kernel between two sets is
//! `K(H, H') = C_H · C_H' · Σ_ij k(h_i, h'_j)` with `C = 1` (extensive) or
//! `C = 1/|H|` (intensive). The composite kernel blends it with per-species
//! terms: `K_α = (1 − α)·K(H, H') + α·Σ_s K(H_s, H'_s)`.
//!
//! Every kernel value in the crate, single pair or matrix entry, goes
//! through [`pair_parts`], so Gram entries, cross-matrix entries and
//! [`composite_kernel`] agree to the bit. Double sums are evaluated in a
//! canonical argument order, which makes them exactly symmetric.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};

/// Point kernel on feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKernel {
    /// `exp(−‖h − h'‖² / (2σ²))`
    Gaussian { sigma: f64 },
    /// `⟨h, h'⟩`
    Linear,
}

impl BaseKernel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(BaseKernel::Gaussian { sigma })
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            BaseKernel::Gaussian { sigma } => Some(*sigma),
            BaseKernel::Linear => None,
        }
    }

    /// Evaluate without a dimension check; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            BaseKernel::Gaussian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            BaseKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// `k(h, h')` with a dimension check.
pub fn base_kernel_eval(k: &BaseKernel, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(k.eval_unchecked(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `C = 1`; predictions scale with system size.
    Extensive,
    /// `C = 1/|set|`.
    Intensive,
}

impl NormalizationMode {
    pub fn constant(self, size: usize) -> f64 {
        match self {
            NormalizationMode::Extensive => 1.0,
            NormalizationMode::Intensive => {
                if size == 0 {
                    0.0
                } else {
                    1.0 / size as f64
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormalizationMode::Extensive => "extensive",
            NormalizationMode::Intensive => "intensive",
        }
    }
}

/// Which set size normalizes the per-species terms of the composite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesNorm {
    /// Each species subset is normalized by its own size.
    #[default]
    Subset,
    /// Species subsets reuse the constant of the whole configuration.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub mode: NormalizationMode,
    pub alpha: f64,
    pub species_count: usize,
    #[serde(default)]
    pub species_norm: SpeciesNorm,
}

impl KernelSpec {
    pub fn new(base: BaseKernel, mode: NormalizationMode, alpha: f64, species_count: usize) -> Result<Self> {
        let spec = KernelSpec {
            base,
            mode,
            alpha,
            species_count,
            species_norm: SpeciesNorm::Subset,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        if let BaseKernel::Gaussian { sigma } = self.base {
            BaseKernel::gaussian(sigma)?;
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_base(mut self, base: BaseKernel) -> Self {
        self.base = base;
        self
    }

    pub fn with_species_norm(mut self, norm: SpeciesNorm) -> Self {
        self.species_norm = norm;
        self
    }
}

fn rows_cmp(a: &[&[f64]], b: &[&[f64]]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb.iter()) {
                match x.total_cmp(y) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
        }
        Ordering::Equal
    })
}

/// `Σ_ij k(a_i, b_j)`, summed in an order that depends only on the unordered pair.
fn raw_double_sum(k: &BaseKernel, a: &[&[f64]], b: &[&[f64]]) -> f64 {
    let (outer, inner) = if rows_cmp(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let mut acc = 0.0;
    for x in outer {
        for y in inner {
            acc += k.eval_unchecked(x, y);
        }
    }
    acc
}

fn check_dims(a: &[&[f64]], b: &[&[f64]]) -> Result<()> {
    let mut it = a.iter().chain(b.iter());
    if let Some(first) = it.next() {
        for r in it {
            if r.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: r.len(),
                });
            }
        }
    }
    Ok(())
}

/// Mean-embedding kernel between two row sets. Either set may be empty (value 0).
pub fn mean_embedding_kernel(k: &BaseKernel, a: &[&[f64]], b: &[&[f64]], mode: NormalizationMode) -> Result<f64> {
    check_dims(a, b)?;
    Ok(set_kernel(k, a, b, mode.constant(a.len()), mode.constant(b.len())))
}

fn set_kernel(k: &BaseKernel, a: &[&[f64]], b: &[&[f64]], ca: f64, cb: f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    ca * cb * raw_double_sum(k, a, b)
}

/// Borrowed rows of a feature set, pre-partitioned by species.
pub struct SetView<'a> {
    all: Vec<&'a [f64]>,
    by_species: Vec<Vec<&'a [f64]>>,
    dim: usize,
}

impl<'a> SetView<'a> {
    pub fn new(set: &'a FeatureSet, species_count: usize) -> Result<Self> {
        let mut by_species = vec![Vec::new(); species_count];
        for (row, s) in set.rows().zip(set.species()) {
            if s.0 == 0 || s.index() >= species_count {
                return Err(Error::UnknownSpecies {
                    id: s.0,
                    count: species_count,
                });
            }
            by_species[s.index()].push(row);
        }
        Ok(SetView {
            all: set.rows().collect(),
            by_species,
            dim: set.dim(),
        })
    }

    pub fn rows(&self) -> &[&'a [f64]] {
        &self.all
    }

    pub fn species_rows(&self, slot: usize) -> &[&'a [f64]] {
        &self.by_species[slot]
    }
}

/// The two ingredients of the composite kernel for one pair of sets:
/// `(K(H, H'), Σ_s K(H_s, H'_s))`. A part that `alpha` gives zero weight is
/// not evaluated and reported as 0.
pub fn pair_parts(spec: &KernelSpec, a: &SetView, b: &SetView) -> (f64, f64) {
    pair_parts_with(spec, a, b, Parts::for_alpha(spec.alpha))
}

/// Which composite-kernel ingredients to evaluate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Parts {
    whole: bool,
    species: bool,
}

impl Parts {
    pub(crate) const BOTH: Parts = Parts {
        whole: true,
        species: true,
    };

    pub(crate) fn for_alpha(alpha: f64) -> Parts {
        Parts {
            whole: alpha < 1.0,
            species: alpha > 0.0,
        }
    }
}

fn pair_parts_with(spec: &KernelSpec, a: &SetView, b: &SetView, parts: Parts) -> (f64, f64) {
    let want_whole = parts.whole;
    let want_species = parts.species;
    let whole = if want_whole {
        set_kernel(
            &spec.base,
            &a.all,
            &b.all,
            spec.mode.constant(a.all.len()),
            spec.mode.constant(b.all.len()),
        )
    } else {
        0.0
    };
    let mut species = 0.0;
    if want_species {
        for (ra, rb) in a.by_species.iter().zip(&b.by_species) {
            let (ca, cb) = match spec.species_norm {
                SpeciesNorm::Subset => (spec.mode.constant(ra.len()), spec.mode.constant(rb.len())),
                SpeciesNorm::Global => (spec.mode.constant(a.all.len()), spec.mode.constant(b.all.len())),
            };
            species += set_kernel(&spec.base, ra, rb, ca, cb);
        }
    }
    (whole, species)
}

#[inline]
fn blend(alpha: f64, whole: f64, species: f64) -> f64 {
    (1.0 - alpha) * whole + alpha * species
}

fn views<'a>(spec: &KernelSpec, sets: &'a [FeatureSet]) -> Result<Vec<SetView<'a>>> {
    let dim = sets.first().map_or(0, FeatureSet::dim);
    sets.iter()
        .map(|s| {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            SetView::new(s, spec.species_count)
        })
        .collect()
}

/// Composite kernel `K_α(H, H')`.
pub fn composite_kernel(spec: &KernelSpec, a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    spec.validate()?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let va = SetView::new(a, spec.species_count)?;
    let vb = SetView::new(b, spec.species_count)?;
    let (w, s) = pair_parts(spec, &va, &vb);
    Ok(blend(spec.alpha, w, s))
}

/// Whole-set and per-species kernel matrices, blended on demand for any α.
///
/// Parts that the kernel's α gives zero weight are left at zero; model
/// selection evaluates both once and reuses them across an α sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParts {
    pub whole: DMatrix<f64>,
    pub species: DMatrix<f64>,
}

impl KernelParts {
    pub fn combine(&self, alpha: f64) -> DMatrix<f64> {
        self.whole.zip_map(&self.species, |w, s| blend(alpha, w, s))
    }
}

/// Symmetric `T × T` parts; the upper triangle is computed and mirrored.
pub fn gram_parts(spec: &KernelSpec, sets: &[FeatureSet]) -> Result<KernelParts> {
    gram_parts_with(spec, sets, Parts::for_alpha(spec.alpha))
}

pub(crate) fn gram_parts_with(spec: &KernelSpec, sets: &[FeatureSet], parts: Parts) -> Result<KernelParts> {
    spec.validate()?;
    let v = views(spec, sets)?;
    let t = v.len();
    let pairs: Vec<(usize, usize)> = (0..t).flat_map(|i| (i..t).map(move |j| (i, j))).collect();
    let values: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| pair_parts_with(spec, &v[i], &v[j], parts))
        .collect();
    let mut whole = DMatrix::zeros(t, t);
    let mut species = DMatrix::zeros(t, t);
    for (&(i, j), &(w, s)) in pairs.iter().zip(&values) {
        whole[(i, j)] = w;
        whole[(j, i)] = w;
        species[(i, j)] = s;
        species[(j, i)] = s;
    }
    Ok(KernelParts { whole, species })
}

/// `Q × T` parts: row `q`, column `t` pairs `query[q]` with `train[t]`.
pub fn cross_parts(spec: &KernelSpec, train: &[FeatureSet], query: &[FeatureSet]) -> Result<KernelParts> {
    cross_parts_with(spec, train, query, Parts::for_alpha(spec.alpha))
}

pub(crate) fn cross_parts_with(
    spec: &KernelSpec,
    train: &[FeatureSet],
    query: &[FeatureSet],
    parts: Parts,
) -> Result<KernelParts> {
    spec.validate()?;
    let vt = views(spec, train)?;
    let vq = views(spec, query)?;
    if let (Some(a), Some(b)) = (vt.first(), vq.first()) {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch {
                expected: a.dim,
                found: b.dim,
            });
        }
    }
    let (nq, nt) = (vq.len(), vt.len());
    let rows: Vec<Vec<(f64, f64)>> = vq
        .par_iter()
        .map(|q| vt.iter().map(|t| pair_parts_with(spec, q, t, parts)).collect())
        .collect();
    let mut whole = DMatrix::zeros(nq, nt);
    let mut species = DMatrix::zeros(nq, nt);
    for (i, row) in rows.iter().enumerate() {
        for (j, &(w, s)) in row.iter().enumerate() {
            whole[(i, j)] = w;
            species[(i, j)] = s;
        }
    }
    Ok(KernelParts { whole, species })
}

/// `G_tl = K_α(H(x_t), H(x_l))`, exactly symmetric.
pub fn gram_matrix(spec: &KernelSpec, sets: &[FeatureSet]) -> Result<DMatrix<f64>> {
    if sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(gram_parts(spec, sets)?.combine(spec.alpha))
}

/// `V_qt = K_α(H(query_q), H(x_t))`.
pub fn cross_kernel_matrix(spec: &KernelSpec, train: &[FeatureSet], query: &[FeatureSet]) -> Result<DMatrix<f64>> {
    Ok(cross_parts(spec, train, query)?.combine(spec.alpha))
}

/// Median pairwise Euclidean distance among at most `max_samples` atom rows
/// pooled across `sets` and drawn uniformly with the given seed.
pub fn median_heuristic(sets: &[FeatureSet], max_samples: usize, seed: u64) -> Result<f64> {
    let pool: Vec<&[f64]> = sets.iter().flat_map(|s| s.rows()).collect();
    if let Some(first) = pool.first() {
        if let Some(bad) = pool.iter().find(|r| r.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: bad.len(),
            });
        }
    }
    let rows: Vec<&[f64]> = if pool.len() > max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, pool.len(), max_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i]).collect()
    } else {
        pool
    };
    if rows.len() < 2 {
        return Err(Error::DegenerateDistances);
    }
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let s: f64 = rows[i].iter().zip(rows[j]).map(|(x, y)| (x - y) * (x - y)).sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if !(median > 0.0) {
        return Err(Error::DegenerateDistances);
    }
    Ok(median)
}

/// Default pool size for [`median_heuristic`].
pub const DEFAULT_MEDIAN_SAMPLES: usize = 1000;
