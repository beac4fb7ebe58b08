//! Shared fixtures for the benchmarks in `benches/`.

use mekrr_core::synthetic::{generate_family, CellFamily, ToyPotential};
use mekrr_core::{
    featurize_dataset, median_heuristic, BaseKernel, DescriptorParams, KernelSpec, NormalizationMode, Samples,
};

/// Featurized toy-potential frames in the small periodic cell.
pub fn toy_samples(frames: usize, seed: u64) -> Samples {
    let ds = generate_family(&ToyPotential::default(), &CellFamily::small(), frames, seed).expect("generate");
    let params = DescriptorParams::uniform(4.0, 0.5, 12, 0.35);
    featurize_dataset(&ds, &params)
        .expect("featurize")
        .samples()
        .expect("samples")
}

/// Gaussian spec with the median-heuristic length scale of `samples`.
pub fn gaussian_spec(samples: &Samples, mode: NormalizationMode, alpha: f64) -> KernelSpec {
    let sigma = median_heuristic(&samples.sets, mekrr_core::DEFAULT_MEDIAN_SAMPLES, 0).expect("median");
    KernelSpec::new(
        BaseKernel::gaussian(sigma).expect("sigma"),
        mode,
        alpha,
        samples.species.len(),
    )
    .expect("spec")
}
