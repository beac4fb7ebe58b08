//! Hyperparameter selection on a single validation split and the two
//! evaluation protocols.
//!
//! λ is selected first with α = 0, then α at the selected λ. Each grid
//! point is scored by validation RMSE/atom; ties go to the larger value.
//! The Gram and cross matrices are assembled once per sweep and every score
//! is computed with the same arithmetic as [`krr::fit`] followed by
//! [`krr::predict`], so refitting at the selected point reproduces it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::kernels::{cross_parts_with, gram_parts_with, KernelSpec, NormalizationMode, Parts};
use crate::krr::{self, apply_coefficients, solve_coefficients, FitOptions, FittedModel};
use crate::metrics::{mae_per_atom, rmse_per_atom};
use crate::transform::{invert_labels, transform_labels, LabelTransform, TransformKind};

pub const DEFAULT_LAMBDA_GRID: [f64; 7] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Relative score difference below which two grid points tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub value: f64,
    pub rmse_mev_per_atom: f64,
    pub mae_mev_per_atom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: f64,
    pub best_rmse: f64,
    pub curve: Vec<CvPoint>,
}

fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} grid has non-finite values")));
    }
    Ok(())
}

/// Lowest RMSE; among ties the larger grid value.
fn pick(curve: &[CvPoint]) -> CvResult {
    let mut best = curve[0];
    for p in &curve[1..] {
        let scale = p.rmse_mev_per_atom.abs().max(best.rmse_mev_per_atom.abs());
        let tie = (p.rmse_mev_per_atom - best.rmse_mev_per_atom).abs() <= TIE_TOLERANCE * scale;
        if (tie && p.value > best.value) || (!tie && p.rmse_mev_per_atom < best.rmse_mev_per_atom) {
            best = *p;
        }
    }
    CvResult {
        best: best.value,
        best_rmse: best.rmse_mev_per_atom,
        curve: curve.to_vec(),
    }
}

struct Split<'a> {
    train: &'a Samples,
    val: &'a Samples,
    labels: Vec<f64>,
    transform: LabelTransform,
}

impl<'a> Split<'a> {
    fn new(train: &'a Samples, val: &'a Samples, transform: TransformKind) -> Result<Self> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let transform = LabelTransform::fit(transform, train)?;
        let labels = transform_labels(&transform, train)?;
        Ok(Split {
            train,
            val,
            labels,
            transform,
        })
    }

    fn score(
        &self,
        gram: &nalgebra::DMatrix<f64>,
        cross: &nalgebra::DMatrix<f64>,
        lambda: f64,
        value: f64,
        options: &FitOptions,
    ) -> Result<CvPoint> {
        let (c, _, _) = solve_coefficients(gram, lambda, &self.labels, options)?;
        let raw = apply_coefficients(cross, &c);
        let pred = invert_labels(&self.transform, &raw, &self.val.sets)?;
        Ok(CvPoint {
            value,
            rmse_mev_per_atom: rmse_per_atom(&pred, self.val)?,
            mae_mev_per_atom: mae_per_atom(&pred, self.val)?,
        })
    }
}

/// Select λ with α forced to 0.
pub fn cross_validate_lambda(
    train: &Samples,
    val: &Samples,
    spec: &KernelSpec,
    transform: TransformKind,
    grid: &[f64],
    options: &FitOptions,
) -> Result<CvResult> {
    check_grid(grid, "lambda")?;
    let spec = spec.with_alpha(0.0);
    let split = Split::new(train, val, transform)?;
    let parts = Parts::for_alpha(0.0);
    let gram = gram_parts_with(&spec, &split.train.sets, parts)?.combine(0.0);
    let cross = cross_parts_with(&spec, &split.train.sets, &split.val.sets, parts)?.combine(0.0);
    let curve = grid
        .par_iter()
        .map(|&lam| split.score(&gram, &cross, lam, lam, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(&curve))
}

/// Select α at a fixed λ.
pub fn cross_validate_alpha(
    train: &Samples,
    val: &Samples,
    spec: &KernelSpec,
    lambda: f64,
    transform: TransformKind,
    grid: &[f64],
    options: &FitOptions,
) -> Result<CvResult> {
    check_grid(grid, "alpha")?;
    for &a in grid {
        spec.with_alpha(a).validate()?;
    }
    let split = Split::new(train, val, transform)?;
    let gram = gram_parts_with(spec, &split.train.sets, Parts::BOTH)?;
    let cross = cross_parts_with(spec, &split.train.sets, &split.val.sets, Parts::BOTH)?;
    let curve = grid
        .par_iter()
        .map(|&a| split.score(&gram.combine(a), &cross.combine(a), lambda, a, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(&curve))
}

/// Outcome of running the λ then α schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub lambda: f64,
    pub alpha: f64,
    pub lambda_curve: CvResult,
    pub alpha_curve: CvResult,
}

/// λ at α = 0 over `lambda_grid`, then α over `alpha_grid` at that λ.
pub fn select_hyperparameters(
    train: &Samples,
    val: &Samples,
    spec: &KernelSpec,
    transform: TransformKind,
    lambda_grid: &[f64],
    alpha_grid: &[f64],
    options: &FitOptions,
) -> Result<Selection> {
    let lambda_curve = cross_validate_lambda(train, val, spec, transform, lambda_grid, options)?;
    let alpha_curve = cross_validate_alpha(train, val, spec, lambda_curve.best, transform, alpha_grid, options)?;
    Ok(Selection {
        lambda: lambda_curve.best,
        alpha: alpha_curve.best,
        lambda_curve,
        alpha_curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_mev_per_atom: f64,
    pub mae_mev_per_atom: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub sigma: Option<f64>,
    pub normalization: String,
    pub transform: String,
}

/// Score a fitted model on labeled samples.
pub fn evaluate(model: &FittedModel, samples: &Samples) -> Result<EvalReport> {
    let pred = krr::predict(model, &samples.sets)?;
    Ok(EvalReport {
        rmse_mev_per_atom: rmse_per_atom(&pred, samples)?,
        mae_mev_per_atom: mae_per_atom(&pred, samples)?,
        n_train: model.n_train(),
        n_eval: samples.len(),
        lambda: model.lambda,
        alpha: model.spec.alpha,
        sigma: model.sigma(),
        normalization: model.spec.mode.name().to_string(),
        transform: model.label_transform.name().to_string(),
    })
}

/// Fit on `train` with standardized labels and score on `test`.
pub fn same_dataset_evaluate(
    train: &Samples,
    test: &Samples,
    spec: &KernelSpec,
    lambda: f64,
) -> Result<(FittedModel, EvalReport)> {
    let model = krr::fit(train, spec, lambda, TransformKind::Standardize)?;
    let report = evaluate(&model, test)?;
    Ok((model, report))
}

/// Fit on `source` with species baselines removed and score zero-shot on
/// `target`. Needs extensive normalization and a shared species table.
pub fn transfer_evaluate(
    source: &Samples,
    target: &Samples,
    spec: &KernelSpec,
    lambda: f64,
) -> Result<(FittedModel, EvalReport)> {
    check_transfer_spec(spec)?;
    let model = krr::fit(source, spec, lambda, TransformKind::SpeciesBaseline)?;
    let report = evaluate_transfer(&model, target)?;
    Ok((model, report))
}

/// Score a model trained under the transfer protocol on a target dataset.
pub fn evaluate_transfer(model: &FittedModel, target: &Samples) -> Result<EvalReport> {
    check_transfer_spec(&model.spec)?;
    if model.label_transform.kind() != TransformKind::SpeciesBaseline {
        return Err(Error::InvalidParameter(
            "transfer evaluation requires a species-baseline label transform".into(),
        ));
    }
    if model.species != target.species {
        return Err(Error::InvalidParameter(
            "source and target must share one species table".into(),
        ));
    }
    evaluate(model, target)
}

fn check_transfer_spec(spec: &KernelSpec) -> Result<()> {
    if spec.mode != NormalizationMode::Extensive {
        return Err(Error::InvalidParameter(
            "transfer evaluation requires extensive normalization".into(),
        ));
    }
    Ok(())
}
