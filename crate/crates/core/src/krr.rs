//! Kernel ridge regression on composite mean-embedding Gram matrices.
//!
//! Training solves `(G + λI) c = y` with a Cholesky factorization, where
//! `y` are the transformed labels. Prediction evaluates
//! `ŷ(x) = Σ_t c_t K_α(H(x), H(x_t))` and undoes the label transform.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::{FeatureSet, Samples, SpeciesTable};
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel_matrix, gram_matrix, KernelSpec};
use crate::transform::{invert_labels, transform_labels, LabelTransform, TransformKind};

/// Number of ×10 regularization escalations attempted when `G + λI` is not
/// numerically positive definite.
pub const JITTER_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Permit `λ = 0`; the Gram matrix must then factor as is.
    pub allow_unregularized: bool,
    pub jitter_steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            allow_unregularized: false,
            jitter_steps: JITTER_STEPS,
        }
    }
}

/// A trained regressor. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub coefficients: Vec<f64>,
    pub train_sets: Vec<FeatureSet>,
    pub spec: KernelSpec,
    pub species: SpeciesTable,
    /// Requested regularization.
    pub lambda: f64,
    /// Regularization that was actually used after any jitter escalation.
    pub effective_lambda: f64,
    pub label_transform: LabelTransform,
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub fn sigma(&self) -> Option<f64> {
        self.spec.base.sigma()
    }

    pub fn n_train(&self) -> usize {
        self.coefficients.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.train_sets.first().map_or(0, FeatureSet::dim)
    }

    /// Raw model outputs before the inverse label transform.
    pub fn decision_values(&self, queries: &[FeatureSet]) -> Result<Vec<f64>> {
        check_query_dims(self.feature_dim(), queries)?;
        if queries.is_empty() {
            return Ok(vec![]);
        }
        let v = cross_kernel_matrix(&self.spec, &self.train_sets, queries)?;
        Ok(apply_coefficients(&v, &self.coefficients))
    }
}

fn check_query_dims(dim: usize, queries: &[FeatureSet]) -> Result<()> {
    match queries.iter().find(|q| q.dim() != dim) {
        Some(q) => Err(Error::DimensionMismatch {
            expected: dim,
            found: q.dim(),
        }),
        None => Ok(()),
    }
}

/// Coefficients of `(G + λI) c = y`, escalating `λ` by ×10 on failure.
///
/// Returns the coefficients, the regularization used and any warnings.
pub(crate) fn solve_coefficients(
    gram: &DMatrix<f64>,
    lambda: f64,
    labels: &[f64],
    options: &FitOptions,
) -> Result<(Vec<f64>, f64, Vec<String>)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if lambda == 0.0 && !options.allow_unregularized {
        return Err(Error::InvalidParameter(
            "lambda = 0 requires explicitly allowing an unregularized fit".into(),
        ));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter("transformed labels must be finite".into()));
    }
    let t = gram.nrows();
    let rhs = DVector::from_column_slice(labels);
    let mut warnings = Vec::new();
    let mut lam = lambda;
    let attempts = if lambda == 0.0 { 0 } else { options.jitter_steps };
    for attempt in 0..=attempts {
        let mut a = gram.clone();
        for i in 0..t {
            a[(i, i)] += lam;
        }
        if let Some(chol) = Cholesky::new(a) {
            let c = chol.solve(&rhs);
            if c.iter().all(|x| x.is_finite()) {
                return Ok((c.as_slice().to_vec(), lam, warnings));
            }
        }
        if attempt < attempts {
            let msg = format!(
                "G + λI not positive definite at λ = {lam:e}; retrying with λ = {:e}",
                lam * 10.0
            );
            log::warn!("{msg}");
            warnings.push(msg);
            lam *= 10.0;
        }
    }
    Err(Error::SingularGram { lambda: lam })
}

/// `ŷ_q = Σ_t V_qt c_t`, summed in column order.
pub(crate) fn apply_coefficients(cross: &DMatrix<f64>, c: &[f64]) -> Vec<f64> {
    (0..cross.nrows())
        .map(|q| {
            let mut acc = 0.0;
            for (t, ct) in c.iter().enumerate() {
                acc += cross[(q, t)] * ct;
            }
            acc
        })
        .collect()
}

/// Fit with a label transform of the given kind, estimated on `train`.
pub fn fit(train: &Samples, spec: &KernelSpec, lambda: f64, transform: TransformKind) -> Result<FittedModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t = LabelTransform::fit(transform, train)?;
    fit_with(train, spec, lambda, t, &FitOptions::default())
}

/// Fit with an already-estimated label transform.
pub fn fit_with(
    train: &Samples,
    spec: &KernelSpec,
    lambda: f64,
    transform: LabelTransform,
    options: &FitOptions,
) -> Result<FittedModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    spec.validate()?;
    let labels = transform_labels(&transform, train)?;
    let gram = gram_matrix(spec, &train.sets)?;
    let (coefficients, effective_lambda, warnings) = solve_coefficients(&gram, lambda, &labels, options)?;
    Ok(FittedModel {
        coefficients,
        train_sets: train.sets.clone(),
        spec: *spec,
        species: train.species.clone(),
        lambda,
        effective_lambda,
        label_transform: transform,
        warnings,
    })
}

/// Energies for `queries`: kernel expansion followed by the inverse transform.
pub fn predict(model: &FittedModel, queries: &[FeatureSet]) -> Result<Vec<f64>> {
    let raw = model.decision_values(queries)?;
    invert_labels(&model.label_transform, &raw, queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SpeciesId;
    use crate::kernels::{BaseKernel, NormalizationMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_row(row: &[f64]) -> FeatureSet {
        FeatureSet::new(row.to_vec(), row.len(), vec![SpeciesId(1)]).unwrap()
    }

    fn linear_spec(s: usize) -> KernelSpec {
        KernelSpec::new(BaseKernel::Linear, NormalizationMode::Extensive, 0.0, s).unwrap()
    }

    fn table(s: usize) -> SpeciesTable {
        SpeciesTable::new((0..s).map(|k| format!("X{k}")).collect()).unwrap()
    }

    fn random_samples(rng: &mut ChaCha8Rng, t: usize, n: usize, d: usize, s: u32) -> Samples {
        let sets: Vec<FeatureSet> = (0..t)
            .map(|_| {
                let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let sp = (0..n).map(|_| SpeciesId(rng.random_range(1..=s))).collect();
                FeatureSet::new(data, d, sp).unwrap()
            })
            .collect();
        let energies = (0..t).map(|_| rng.random_range(-3.0..3.0)).collect();
        Samples::new(table(s as usize), sets, energies).unwrap()
    }

    #[test]
    fn scalar_unregularized_solve() {
        // K = ⟨(1,1),(1,1)⟩ = 2
        let train = Samples::new(table(1), vec![one_row(&[1.0, 1.0])], vec![4.0]).unwrap();
        let opts = FitOptions {
            allow_unregularized: true,
            ..FitOptions::default()
        };
        let m = fit_with(&train, &linear_spec(1), 0.0, LabelTransform::Identity, &opts).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-14);
        assert!((predict(&m, &train.sets).unwrap()[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn unregularized_needs_opt_in() {
        let train = Samples::new(table(1), vec![one_row(&[1.0])], vec![4.0]).unwrap();
        assert!(matches!(
            fit(&train, &linear_spec(1), 0.0, TransformKind::Identity),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn identity_gram_example() {
        let train = Samples::new(
            table(1),
            vec![one_row(&[1.0, 0.0]), one_row(&[0.0, 1.0])],
            vec![2.0, 4.0],
        )
        .unwrap();
        let m = fit(&train, &linear_spec(1), 1.0, TransformKind::Identity).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interpolates_with_tiny_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = random_samples(&mut rng, 10, 4, 3, 2);
        let spec = KernelSpec::new(BaseKernel::gaussian(0.5).unwrap(), NormalizationMode::Extensive, 0.5, 2).unwrap();
        let m = fit(&train, &spec, 1e-12, TransformKind::Identity).unwrap();
        let p = predict(&m, &train.sets).unwrap();
        for (a, b) in p.iter().zip(&train.energies) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn single_training_point_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let train = random_samples(&mut rng, 1, 3, 2, 1);
        let spec = KernelSpec::new(BaseKernel::gaussian(1.0).unwrap(), NormalizationMode::Intensive, 0.0, 1).unwrap();
        let m = fit(&train, &spec, 1e-3, TransformKind::Identity).unwrap();
        let k = crate::kernels::composite_kernel(&spec, &train.sets[0], &train.sets[0]).unwrap();
        assert_eq!(predict(&m, &train.sets).unwrap(), vec![m.coefficients[0] * k]);
    }

    #[test]
    fn duplicated_query_doubles_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train = random_samples(&mut rng, 6, 3, 2, 2);
        let spec = KernelSpec::new(BaseKernel::gaussian(0.8).unwrap(), NormalizationMode::Extensive, 0.3, 2).unwrap();
        let m = fit(&train, &spec, 1e-4, TransformKind::Identity).unwrap();
        let q = &train.sets[2];
        let single = predict(&m, std::slice::from_ref(q)).unwrap()[0];
        let double = predict(&m, &[q.repeated(2)]).unwrap()[0];
        assert!((double - 2.0 * single).abs() <= 1e-12 * single.abs().max(1.0));
    }

    #[test]
    fn within_species_permutation_leaves_prediction_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let train = random_samples(&mut rng, 6, 5, 2, 2);
        let spec = KernelSpec::new(BaseKernel::gaussian(0.8).unwrap(), NormalizationMode::Intensive, 0.6, 2).unwrap();
        let m = fit(&train, &spec, 1e-4, TransformKind::Standardize).unwrap();
        let q = &train.sets[1];
        let perm = [4, 2, 0, 3, 1];
        let a = predict(&m, std::slice::from_ref(q)).unwrap()[0];
        let b = predict(&m, &[q.permuted(&perm)]).unwrap()[0];
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn training_error_grows_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let train = random_samples(&mut rng, 15, 3, 2, 2);
        let spec = KernelSpec::new(BaseKernel::gaussian(0.7).unwrap(), NormalizationMode::Extensive, 0.5, 2).unwrap();
        let mut last = 0.0;
        for lam in [1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0] {
            let m = fit(&train, &spec, lam, TransformKind::Identity).unwrap();
            let p = predict(&m, &train.sets).unwrap();
            let mse = p.iter().zip(&train.energies).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 15.0;
            assert!(mse >= last - 1e-12, "mse {mse} dropped below {last} at λ={lam}");
            last = mse;
        }
    }

    #[test]
    fn representer_matches_primal_ridge() {
        // linear, α=0, extensive: f(x) = ⟨ŵ, Σ_i h_i⟩ with ŵ = (ΦᵀΦ + λI)⁻¹ Φᵀ y
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let train = random_samples(&mut rng, 9, 4, 3, 2);
        let lam = 0.05;
        let m = fit(&train, &linear_spec(2), lam, TransformKind::Identity).unwrap();
        let pooled = |s: &FeatureSet| {
            let mut v = vec![0.0; 3];
            for r in s.rows() {
                for (a, b) in v.iter_mut().zip(r) {
                    *a += b;
                }
            }
            v
        };
        let phi = DMatrix::from_fn(9, 3, |i, j| pooled(&train.sets[i])[j]);
        let a = phi.transpose() * &phi + DMatrix::identity(3, 3) * lam;
        let w = a
            .cholesky()
            .unwrap()
            .solve(&(phi.transpose() * DVector::from_column_slice(&train.energies)));
        let queries = random_samples(&mut rng, 4, 3, 3, 2).sets;
        let p = predict(&m, &queries).unwrap();
        for (q, pq) in queries.iter().zip(p) {
            let direct: f64 = pooled(q).iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            assert!((direct - pq).abs() < 1e-10);
        }
    }

    #[test]
    fn jitter_escalates_then_gives_up() {
        // rank-one Gram with a negative direction cannot be rescued by tiny λ
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (_, _, _) = solve_coefficients(&g, 10.0, &[1.0, 1.0], &FitOptions::default()).unwrap();
        let err = solve_coefficients(&g, 1e-6, &[1.0, 1.0], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularGram { lambda } if (lambda - 1e-3).abs() < 1e-15));
        let (_, lam, warnings) = solve_coefficients(&g, 0.5, &[1.0, 1.0], &FitOptions::default()).unwrap();
        assert_eq!(lam, 5.0);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn query_dimension_is_checked() {
        let train = Samples::new(table(1), vec![one_row(&[1.0, 0.0])], vec![1.0]).unwrap();
        let m = fit(&train, &linear_spec(1), 1.0, TransformKind::Identity).unwrap();
        assert!(matches!(
            predict(&m, &[one_row(&[1.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_training_set() {
        let train = Samples::new(table(1), vec![], vec![]).unwrap();
        assert!(matches!(
            fit(&train, &linear_spec(1), 1.0, TransformKind::Identity),
            Err(Error::EmptyDataset)
        ));
    }
}
