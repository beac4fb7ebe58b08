//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mekrr_core::data::split_dataset;
use mekrr_core::feat1::{BLOB_FILE, INDEX_FILE};
use mekrr_core::kernels::mean_embedding_kernel;
use mekrr_core::synthetic::{generate_family, reactive_trajectory, CellFamily, ToyPotential};
use mekrr_core::transform::{invert_labels, transform_labels};
use mekrr_core::*;

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize, s: u32) -> FeatureSet {
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let species = (0..n).map(|_| SpeciesId(rng.random_range(1..=s))).collect();
    FeatureSet::new(data, d, species).unwrap()
}

fn table(s: usize) -> SpeciesTable {
    SpeciesTable::new((0..s).map(|k| format!("X{k}")).collect()).unwrap()
}

fn random_samples(rng: &mut ChaCha8Rng, t: usize, n: usize, d: usize, s: u32) -> Samples {
    let sets = (0..t).map(|_| random_set(rng, n, d, s)).collect();
    let energies = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
    Samples::new(table(s as usize), sets, energies).unwrap()
}

/// Permutation of atom indices that only swaps atoms of equal species.
fn within_species_permutation(rng: &mut ChaCha8Rng, set: &FeatureSet) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..set.n_atoms()).collect();
    let mut slots: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, s) in set.species().iter().enumerate() {
        slots.entry(s.0).or_default().push(i);
    }
    for idx in slots.values() {
        let mut shuffled = idx.clone();
        shuffled.shuffle(rng);
        for (&dst, &src) in idx.iter().zip(&shuffled) {
            perm[dst] = src;
        }
    }
    perm
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let train = random_samples(&mut rng, 8, 5, 4, 2);
        let queries: Vec<FeatureSet> = (0..6).map(|_| random_set(&mut rng, 5, 4, 2)).collect();
        for alpha in [0.25, 0.5, 0.75] {
            let spec = KernelSpec::new(BaseKernel::Linear, NormalizationMode::Extensive, alpha, 2).unwrap();
            let k = fit(&train, &spec, 1e-3, TransformKind::Identity).map_err(|e| e.to_string())?;
            let m =
                fit_multiweight_explicit(&train, &spec, 1e-3, TransformKind::Identity).map_err(|e| e.to_string())?;
            let a = predict(&k, &queries).map_err(|e| e.to_string())?;
            let b = predict_multiweight(&m, &queries).map_err(|e| e.to_string())?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max(rel(*x, *y));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!(
            "60 fits, max relative difference {worst:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Rows of `s`, optionally restricted to one species.
fn rows_of(s: &FeatureSet, species: Option<u32>) -> Vec<&[f64]> {
    s.rows()
        .zip(s.species())
        .filter(|(_, z)| species.is_none_or(|sp| z.0 == sp))
        .map(|(r, _)| r)
        .collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for &t in &[2usize, 17, 50] {
        let sets: Vec<FeatureSet> = (0..t)
            .map(|_| {
                let n = rng.random_range(1..7);
                random_set(&mut rng, n, 3, 3)
            })
            .collect();
        for mode in [NormalizationMode::Extensive, NormalizationMode::Intensive] {
            let base = BaseKernel::gaussian(0.8).unwrap();
            let spec = KernelSpec::new(base, mode, 0.0, 3).unwrap();
            let g0 = gram_matrix(&spec, &sets).unwrap();
            let g1 = gram_matrix(&spec.with_alpha(1.0), &sets).unwrap();
            for i in 0..t {
                for j in 0..t {
                    let whole =
                        mean_embedding_kernel(&base, &rows_of(&sets[i], None), &rows_of(&sets[j], None), mode).unwrap();
                    let mut per = 0.0;
                    for sp in 1..=3u32 {
                        let (a, b) = (rows_of(&sets[i], Some(sp)), rows_of(&sets[j], Some(sp)));
                        per += mean_embedding_kernel(&base, &a, &b, mode).unwrap();
                    }
                    worst = worst.max((g0[(i, j)] - whole).abs()).max((g1[(i, j)] - per).abs());
                }
            }
        }
    }
    check(worst <= 1e-15, format!("T up to 50, max entry difference {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let train = random_samples(&mut rng, 12, 6, 3, 2);
    let spec = KernelSpec::new(BaseKernel::gaussian(0.9).unwrap(), NormalizationMode::Intensive, 0.4, 2).unwrap();
    let model = fit(&train, &spec, 1e-4, TransformKind::Standardize).unwrap();
    let reference: Vec<FeatureSet> = (0..4).map(|_| random_set(&mut rng, 6, 3, 2)).collect();
    let base_pred = predict(&model, &reference).unwrap();
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let q = trial % reference.len();
        let perm = within_species_permutation(&mut rng, &reference[q]);
        let moved = reference[q].permuted(&perm);
        let other = &train.sets[trial % train.len()];
        let k0 = composite_kernel(&spec, &reference[q], other).unwrap();
        let k1 = composite_kernel(&spec, &moved, other).unwrap();
        let p = predict(&model, std::slice::from_ref(&moved)).unwrap()[0];
        worst = worst.max(rel(k0, k1)).max(rel(p, base_pred[q]));
    }
    check(
        worst <= 1e-12,
        format!("1000 permutations, max relative drift {worst:.2e}"),
    )
}

fn naive_gaussian(a: &FeatureSet, b: &FeatureSet, sigma: f64) -> f64 {
    let mut acc = 0.0;
    for x in a.rows() {
        for y in b.rows() {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            acc += (-d2 / (2.0 * sigma * sigma)).exp();
        }
    }
    acc
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let t = 30;
    let sets: Vec<FeatureSet> = (0..t)
        .map(|_| {
            let n = rng.random_range(1..8);
            random_set(&mut rng, n, 4, 2)
        })
        .collect();
    let lin = KernelSpec::new(BaseKernel::Linear, NormalizationMode::Extensive, 0.0, 2).unwrap();
    let g = gram_matrix(&lin, &sets).unwrap();
    let pooled: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| (0..4).map(|j| s.rows().map(|r| r[j]).sum()).collect())
        .collect();
    let mut worst_lin = 0.0f64;
    let mut worst_rbf = 0.0f64;
    let sigma = 0.7;
    let rbf = KernelSpec::new(
        BaseKernel::gaussian(sigma).unwrap(),
        NormalizationMode::Extensive,
        0.0,
        2,
    )
    .unwrap();
    let gr = gram_matrix(&rbf, &sets).unwrap();
    for i in 0..t {
        for j in 0..t {
            let dot: f64 = pooled[i].iter().zip(&pooled[j]).map(|(a, b)| a * b).sum();
            worst_lin = worst_lin.max((g[(i, j)] - dot).abs() / dot.abs().max(1.0));
            let naive = naive_gaussian(&sets[i], &sets[j], sigma);
            worst_rbf = worst_rbf.max(rel(gr[(i, j)], naive));
        }
    }
    check(
        worst_lin <= 1e-12 && worst_rbf <= 1e-12,
        format!("T = 30, linear vs pooled {worst_lin:.2e}, gaussian vs naive {worst_rbf:.2e}"),
    )
}

fn toy_params() -> DescriptorParams {
    DescriptorParams::uniform(4.0, 0.5, 12, 0.35)
}

fn featurized(ds: &LabeledDataset) -> Samples {
    featurize_dataset(ds, &toy_params()).unwrap().samples().unwrap()
}

fn criterion_5() -> Outcome {
    let ds = generate_family(&ToyPotential::default(), &CellFamily::small(), 10, 505).unwrap();
    let train = featurized(&ds);
    let sigma = median_heuristic(&train.sets, DEFAULT_MEDIAN_SAMPLES, 0).unwrap();
    let spec = KernelSpec::new(
        BaseKernel::gaussian(sigma).unwrap(),
        NormalizationMode::Extensive,
        0.0,
        2,
    )
    .unwrap();
    let model = fit(&train, &spec, 1e-12, TransformKind::Identity).unwrap();
    let p = predict(&model, &train.sets).unwrap();
    let worst = p
        .iter()
        .zip(&train.energies)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    check(
        worst <= 1e-6,
        format!("10 configurations, max relative error {worst:.2e}"),
    )
}

/// `k` translated copies of a vacuum cluster, far beyond the cutoff.
fn copies(c: &Configuration, k: usize) -> Configuration {
    let mut positions = Vec::new();
    let mut species = Vec::new();
    for m in 0..k {
        positions.extend(c.positions.iter().map(|p| [p[0] + 64.0 * m as f64, p[1], p[2]]));
        species.extend(c.species.iter().copied());
    }
    Configuration::new(positions, species, Cell::vacuum(), None)
}

fn cluster_dataset(rng: &mut ChaCha8Rng, count: usize) -> LabeledDataset {
    let pot = ToyPotential::default();
    let configs = (0..count)
        .map(|_| {
            let n = rng.random_range(3..7);
            let mut c = Configuration::new(
                (0..n)
                    .map(|i| {
                        [
                            2.2 * i as f64 + rng.random_range(-0.3..0.3),
                            rng.random_range(-1.0..1.0),
                            0.0,
                        ]
                    })
                    .collect(),
                (0..n).map(|_| SpeciesId(rng.random_range(1..=2))).collect(),
                Cell::vacuum(),
                None,
            );
            c.energy = Some(pot.energy(&c).unwrap());
            c
        })
        .collect();
    LabeledDataset::from_configurations(configs, ToyPotential::species_table(), "clusters").unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let train = featurized(&cluster_dataset(&mut rng, 25));
    let spec = KernelSpec::new(BaseKernel::gaussian(0.6).unwrap(), NormalizationMode::Extensive, 0.5, 2).unwrap();
    let model = fit(&train, &spec, 1e-6, TransformKind::Identity).unwrap();
    let probes = cluster_dataset(&mut rng, 6);
    let mut worst = 0.0f64;
    for c in probes.configurations() {
        let one = compute_descriptor(c, probes.species(), &toy_params()).unwrap();
        let single = predict(&model, std::slice::from_ref(&one)).unwrap()[0];
        for k in [2usize, 3] {
            let multi = compute_descriptor(&copies(c, k), probes.species(), &toy_params()).unwrap();
            let p = predict(&model, &[multi]).unwrap()[0];
            worst = worst.max(rel(p, k as f64 * single));
        }
    }
    check(
        worst <= 1e-12,
        format!("k in {{2, 3}}, max relative deviation {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let eps = [-2.75, 0.625, -9.5];
    let mut sets = Vec::new();
    let mut additive = Vec::new();
    let mut noisy = Vec::new();
    for _ in 0..40 {
        let n = rng.random_range(1..15);
        let s = random_set(&mut rng, n, 2, 3);
        let e: f64 = s.species().iter().map(|z| eps[z.index()]).sum();
        additive.push(e);
        noisy.push(e + rng.random_range(-50.0..50.0));
        sets.push(s);
    }
    let exact = Samples::new(table(3), sets.clone(), additive).unwrap();
    let fitted = fit_species_energy_table(&exact).unwrap();
    let recovery = (0..3)
        .map(|k| (fitted.energies[k].unwrap() - eps[k]).abs())
        .fold(0.0, f64::max);
    let rough = Samples::new(table(3), sets, noisy).unwrap();
    let mut round_trip = 0.0f64;
    for kind in [
        TransformKind::Identity,
        TransformKind::Standardize,
        TransformKind::SpeciesBaseline,
    ] {
        let t = LabelTransform::fit(kind, &rough).unwrap();
        let back = invert_labels(&t, &transform_labels(&t, &rough).unwrap(), &rough.sets).unwrap();
        for (a, b) in back.iter().zip(&rough.energies) {
            round_trip = round_trip.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    check(
        round_trip <= 1e-12 && recovery <= 1e-10,
        format!("round trip {round_trip:.2e}, baseline recovery {recovery:.2e}"),
    )
}

struct ToySplit {
    train: Samples,
    val: Samples,
    test: Samples,
}

fn toy_split(seed: u64) -> ToySplit {
    let ds = generate_family(&ToyPotential::default(), &CellFamily::small(), 300, seed).unwrap();
    let ds = featurize_dataset(&ds, &toy_params()).unwrap();
    let (a, b, c) = split_dataset(&ds, DEFAULT_SPLIT, seed).unwrap();
    ToySplit {
        train: a.samples().unwrap(),
        val: b.samples().unwrap(),
        test: c.samples().unwrap(),
    }
}

fn tuned_spec(split: &ToySplit, transform: TransformKind) -> (KernelSpec, f64, Selection) {
    let sigma = median_heuristic(&split.train.sets, DEFAULT_MEDIAN_SAMPLES, 0).unwrap();
    let spec = KernelSpec::new(
        BaseKernel::gaussian(sigma).unwrap(),
        NormalizationMode::Extensive,
        0.0,
        2,
    )
    .unwrap();
    let sel = select_hyperparameters(
        &split.train,
        &split.val,
        &spec,
        transform,
        &DEFAULT_LAMBDA_GRID,
        &DEFAULT_ALPHA_GRID,
        &FitOptions::default(),
    )
    .unwrap();
    (spec.with_alpha(sel.alpha), sel.lambda, sel)
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let split = toy_split(808);
    let (spec, lambda, _) = tuned_spec(&split, TransformKind::Standardize);
    let (_, report) = same_dataset_evaluate(&split.train, &split.test, &spec, lambda).unwrap();
    let table = fit_species_energy_table(&split.train).unwrap();
    let baseline = transform::baseline_predictions(&table, &split.test.sets).unwrap();
    let baseline_rmse = rmse_per_atom(&baseline, &split.test).unwrap();
    let ratio = report.rmse_mev_per_atom / baseline_rmse;
    let elapsed = start.elapsed();
    check(
        ratio <= 0.2 && elapsed < Duration::from_secs(60),
        format!(
            "test {:.2} vs baseline {:.2} meV/atom (ratio {ratio:.3}, λ={:e}, α={}), {:.1} s",
            report.rmse_mev_per_atom,
            baseline_rmse,
            lambda,
            spec.alpha,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let split = toy_split(909);
    let (spec, lambda, _) = tuned_spec(&split, TransformKind::SpeciesBaseline);
    let (_, same) = transfer_evaluate(&split.train, &split.test, &spec, lambda).unwrap();
    let large = generate_family(&ToyPotential::default(), &CellFamily::small().doubled(), 60, 910).unwrap();
    let large = featurized(&large);
    let (_, cross) = transfer_evaluate(&split.train, &large, &spec, lambda).unwrap();
    let ratio = cross.rmse_mev_per_atom / same.rmse_mev_per_atom;
    check(
        ratio <= 1.5,
        format!(
            "2x cell {:.2} vs same size {:.2} meV/atom (ratio {ratio:.3})",
            cross.rmse_mev_per_atom, same.rmse_mev_per_atom
        ),
    )
}

/// Step position that best explains the labels; frame 0 always has label 0.
fn best_step(labels: &[u8]) -> usize {
    let t = labels.len();
    (1..t)
        .min_by_key(|&b| (0..t).filter(|&i| labels[i] != u8::from(i >= b)).count())
        .unwrap()
}

fn criterion_10() -> Outcome {
    let traj = reactive_trajectory(120, 60, 0.08, 1010).unwrap();
    let sets = featurize_dataset(&traj, &DescriptorParams::default())
        .unwrap()
        .feature_sets()
        .unwrap();
    let sigma = median_heuristic(&sets, DEFAULT_MEDIAN_SAMPLES, 0).unwrap();
    let spec = KernelSpec::new(
        BaseKernel::gaussian(sigma).unwrap(),
        NormalizationMode::Intensive,
        0.0,
        2,
    )
    .unwrap();
    let g = gram_matrix(&spec, &sets).unwrap();
    let labels = spectral_bipartition(&g).unwrap();
    let boundary = best_step(&labels);

    let block = DMatrix::from_fn(30, 30, |i, j| if (i < 11) == (j < 11) { 1.0 } else { 0.0 });
    let blocks_ok = spectral_bipartition(&block).unwrap() == (0..30).map(|i| u8::from(i >= 11)).collect::<Vec<_>>();

    let mut affine_ok = true;
    for (a, b) in [(2.5, -1.0), (0.01, 3.0), (1e3, 1e3)] {
        affine_ok &= spectral_bipartition(&g.map(|x| a * x + b)).unwrap() == labels;
    }
    check(
        boundary.abs_diff(60) <= 2 && blocks_ok && affine_ok,
        format!("boundary at frame {boundary} (planted 60), block recovery {blocks_ok}, affine invariance {affine_ok}"),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let split = toy_split(1111);
    let noisy = |s: &Samples, rng: &mut ChaCha8Rng| {
        let e = s
            .energies
            .iter()
            .zip(&s.sets)
            .map(|(e, f)| e + 0.02 * f.n_atoms() as f64 * rng.random_range(-1.0..1.0))
            .collect();
        Samples::new(s.species.clone(), s.sets.clone(), e).unwrap()
    };
    let train = noisy(&split.train, &mut rng);
    let val = noisy(&split.val, &mut rng);
    let sigma = median_heuristic(&train.sets, DEFAULT_MEDIAN_SAMPLES, 0).unwrap();
    let spec = KernelSpec::new(
        BaseKernel::gaussian(sigma).unwrap(),
        NormalizationMode::Extensive,
        0.0,
        2,
    )
    .unwrap();
    let cv = cross_validate_lambda(
        &train,
        &val,
        &spec,
        TransformKind::Standardize,
        &DEFAULT_LAMBDA_GRID,
        &FitOptions::default(),
    )
    .unwrap();
    let argmin = cv
        .curve
        .iter()
        .fold(None::<CvPoint>, |best, p| match best {
            Some(b) if b.rmse_mev_per_atom <= p.rmse_mev_per_atom => Some(b),
            _ => Some(*p),
        })
        .unwrap();
    let model = fit(&train, &spec, cv.best, TransformKind::Standardize).unwrap();
    let refit = rmse_per_atom(&predict(&model, &val.sets).unwrap(), &val).unwrap();
    let drift = rel(refit, cv.best_rmse);
    check(
        cv.best_rmse == argmin.rmse_mev_per_atom && drift <= 1e-12,
        format!(
            "selected λ={:e} (curve argmin λ={:e}), refit drift {drift:.2e}",
            cv.best, argmin.value
        ),
    )
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let ds = featurize_dataset(&cluster_dataset(&mut rng, 15), &toy_params()).unwrap();
    let feats = dir.path().join("feats");
    write_features(&ds, &feats).unwrap();
    let reloaded = load_features(&feats, &ds).unwrap();
    let feats2 = dir.path().join("feats2");
    write_features(&reloaded, &feats2).unwrap();
    let same_file = |a: &std::path::Path, b: &std::path::Path, f: &str| {
        std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap()
    };
    let feat_ok = reloaded == ds && same_file(&feats, &feats2, BLOB_FILE) && same_file(&feats, &feats2, INDEX_FILE);

    let samples = ds.samples().unwrap();
    let spec = KernelSpec::new(BaseKernel::gaussian(0.7).unwrap(), NormalizationMode::Extensive, 0.2, 2).unwrap();
    let model = fit(&samples, &spec, 1e-6, TransformKind::SpeciesBaseline).unwrap();
    let bundle = ModelBundle::new(model, Some(toy_params()), "acceptance");
    let m1 = dir.path().join("m1");
    save_model(&bundle, &m1).unwrap();
    let loaded = load_model(&m1).unwrap();
    let m2 = dir.path().join("m2");
    save_model(&loaded, &m2).unwrap();
    let bits =
        |m: &FittedModel| -> Vec<u64> { predict(m, &samples.sets).unwrap().iter().map(|x| x.to_bits()).collect() };
    let model_ok = loaded == bundle
        && bits(&loaded.model) == bits(&bundle.model)
        && same_file(&m1, &m2, bundle::MODEL_BIN)
        && same_file(&m1, &m2, bundle::MODEL_JSON);

    let bin = m2.join(bundle::MODEL_BIN);
    let mut bytes = std::fs::read(&bin).unwrap();
    let at = bytes.len() / 2;
    bytes[at] ^= 0x10;
    std::fs::write(&bin, bytes).unwrap();
    let model_corrupt = matches!(load_model(&m2), Err(Error::Checksum { .. }));
    let blob = feats2.join(BLOB_FILE);
    let mut bytes = std::fs::read(&blob).unwrap();
    let at = bytes.len() - 1;
    bytes[at] ^= 0x01;
    std::fs::write(&blob, bytes).unwrap();
    let feat_corrupt = matches!(load_features(&feats2, &ds), Err(Error::Checksum { .. }));
    check(
        feat_ok && model_ok && model_corrupt && feat_corrupt,
        format!(
            "FEAT1 round trip {feat_ok}, model round trip {model_ok}, corrupted model {model_corrupt}, corrupted features {feat_corrupt}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("multi-weight equivalence", criterion_1),
        ("alpha endpoint identities", criterion_2),
        ("permutation invariance", criterion_3),
        ("gram oracle", criterion_4),
        ("krr interpolation", criterion_5),
        ("extensivity", criterion_6),
        ("label transform round trips", criterion_7),
        ("synthetic end to end", criterion_8),
        ("transfer across cell sizes", criterion_9),
        ("spectral clustering", criterion_10),
        ("cv schedule", criterion_11),
        ("persistence", criterion_12),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS [{id:2}] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{id:2}] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
