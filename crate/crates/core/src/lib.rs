//! Kernel ridge regression over kernel mean embeddings of per-atom features.
//!
//! A configuration is represented by the set `H` of its per-atom feature
//! vectors. Sets are compared with the mean-embedding kernel
//! `K(H, H') = C_H C_H' Σ_ij k(h_i, h'_j)` or its species-partitioned blend
//! `K_α`, and energies are regressed with ordinary kernel ridge regression.
//!
//! ```
//! use mekrr_core::{fit, predict, BaseKernel, FeatureSet, KernelSpec, NormalizationMode, Samples, SpeciesId,
//!     SpeciesTable, TransformKind};
//!
//! let species = SpeciesTable::from_symbols(["H"]);
//! let set = |x: f64| FeatureSet::new(vec![x, 1.0], 1, vec![SpeciesId(1); 2]).unwrap();
//! let train = Samples::new(species, vec![set(0.0), set(0.5), set(2.0)], vec![1.0, 1.5, 3.0]).unwrap();
//! let spec = KernelSpec::new(BaseKernel::gaussian(1.0).unwrap(), NormalizationMode::Extensive, 0.0, 1).unwrap();
//! let model = fit(&train, &spec, 1e-8, TransformKind::Identity).unwrap();
//! let e = predict(&model, &[set(0.5)]).unwrap();
//! assert!((e[0] - 1.5).abs() < 1e-5);
//! ```

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bundle;
pub mod cluster;
pub mod data;
pub mod error;
pub mod extxyz;
pub mod feat1;
pub mod featurize;
pub mod kernels;
pub mod krr;
pub mod metrics;
pub mod multiweight;
pub mod select;
pub mod synthetic;
pub mod transform;

pub use bundle::{load_model, read_meta, save_model, ModelBundle, ModelMeta};
pub use cluster::{kernel_heatmap_normalize, spectral_bipartition};
pub use data::{
    split_dataset, split_indices, Cell, Configuration, Entry, FeatureSet, LabeledDataset, Samples, SpeciesId,
    SpeciesTable, DEFAULT_SPLIT,
};
pub use error::{Error, ErrorKind, Result};
pub use extxyz::{read_extxyz, write_extxyz};
pub use feat1::{load_features, write_features, FeatureBundle};
pub use featurize::{compute_descriptor, featurize_dataset, DescriptorParams};
pub use kernels::{
    composite_kernel, cross_kernel_matrix, gram_matrix, median_heuristic, BaseKernel, KernelSpec, NormalizationMode,
    SpeciesNorm, DEFAULT_MEDIAN_SAMPLES,
};
pub use krr::{fit, fit_with, predict, FitOptions, FittedModel};
pub use metrics::{mae_per_atom, rmse_per_atom};
pub use multiweight::{fit_multiweight_explicit, predict_multiweight, MultiWeightModel};
pub use select::{
    cross_validate_alpha, cross_validate_lambda, evaluate, evaluate_transfer, same_dataset_evaluate,
    select_hyperparameters, transfer_evaluate, CvPoint, CvResult, EvalReport, Selection, DEFAULT_ALPHA_GRID,
    DEFAULT_LAMBDA_GRID,
};
pub use transform::{fit_species_energy_table, LabelTransform, SpeciesEnergyTable, TransformKind};

/// Dense matrix type used for Gram and cross-kernel matrices.
pub use nalgebra::DMatrix;
