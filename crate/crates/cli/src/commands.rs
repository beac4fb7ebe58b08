use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mekrr_core::data::split_indices;
use mekrr_core::*;

use crate::args::*;
use crate::UsageError;

/// Everything a command needs from its inputs.
struct Loaded {
    species: SpeciesTable,
    sets: Vec<FeatureSet>,
    energies: Option<Vec<f64>>,
    /// Descriptor used when features were computed here.
    descriptor: Option<DescriptorParams>,
    provenance: String,
}

impl Loaded {
    fn samples(&self) -> Result<Samples> {
        let energies = self
            .energies
            .clone()
            .ok_or(Error::Format("input carries no energies".into()))?;
        Ok(Samples::new(self.species.clone(), self.sets.clone(), energies)?)
    }
}

fn energies_of(ds: &LabeledDataset) -> Option<Vec<f64>> {
    ds.configurations().map(|c| c.energy).collect()
}

/// Read inputs. `table` pins the species order; `descriptor` is used when
/// only configurations are given.
fn load(input: &DataArgs, table: Option<&SpeciesTable>, descriptor: Option<&DescriptorParams>) -> Result<Loaded> {
    match (&input.data, &input.features) {
        (None, None) => Err(UsageError("one of --data or --features is required".into()).into()),
        (Some(data), None) => {
            let params = descriptor.ok_or_else(|| UsageError("this input needs --features or a descriptor".into()))?;
            let ds = read_extxyz(data, table)?;
            let ds = featurize_dataset(&ds, params)?;
            Ok(Loaded {
                species: ds.species().clone(),
                sets: ds.feature_sets()?,
                energies: energies_of(&ds),
                descriptor: Some(params.clone()),
                provenance: ds.provenance.clone(),
            })
        }
        (Some(data), Some(features)) => {
            let ds = read_extxyz(data, table)?;
            let ds = load_features(features, &ds)?;
            Ok(Loaded {
                species: ds.species().clone(),
                sets: ds.feature_sets()?,
                energies: energies_of(&ds),
                descriptor: None,
                provenance: features.display().to_string(),
            })
        }
        (None, Some(features)) => {
            let b = FeatureBundle::read(features)?;
            if let Some(t) = table {
                if *t != b.species {
                    return Err(Error::InvalidParameter(format!(
                        "species table of {} differs from the model's",
                        features.display()
                    ))
                    .into());
                }
            }
            let energies = b.energies.as_ref().and_then(|e| e.iter().copied().collect());
            Ok(Loaded {
                species: b.species.clone(),
                sets: b.feature_sets()?,
                energies,
                descriptor: None,
                provenance: if b.provenance.is_empty() {
                    features.display().to_string()
                } else {
                    b.provenance.clone()
                },
            })
        }
    }
}

fn pinned_table(d: &DescriptorArgs) -> Result<Option<SpeciesTable>> {
    Ok(match &d.species {
        Some(s) => Some(SpeciesTable::new(s.clone())?),
        None => None,
    })
}

fn kernel_spec(k: &KernelArgs, alpha: f64, sets: &[FeatureSet], species: usize, seed: u64) -> Result<KernelSpec> {
    let base = match k.kernel {
        KernelChoice::Linear => BaseKernel::Linear,
        KernelChoice::Gaussian => {
            let sigma = match k.sigma {
                Some(s) => s,
                None => {
                    let s = median_heuristic(sets, k.median_samples, seed)?;
                    log::info!("median heuristic σ = {s}");
                    s
                }
            };
            BaseKernel::gaussian(sigma)?
        }
    };
    Ok(KernelSpec::new(base, k.normalization.into(), alpha, species)?.with_species_norm(k.species_norm.into()))
}

/// Write to a file, or stdout when `path` is `None`.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn featurize(a: &FeaturizeArgs) -> Result<()> {
    let table = pinned_table(&a.descriptor)?;
    let ds = read_extxyz(&a.data, table.as_ref())?;
    let ds = featurize_dataset(&ds, &a.descriptor.params())?;
    write_features(&ds, &a.out)?;
    log::info!("wrote {} frames to {}", ds.len(), a.out.display());
    Ok(())
}

fn fit_provenance(source: &str, seed: u64) -> String {
    format!("fit on {source}; seed {seed}")
}

pub fn fit_cmd(a: &FitArgs, seed: u64) -> Result<()> {
    let table = pinned_table(&a.descriptor)?;
    let params = a.descriptor.params();
    let loaded = load(&a.input, table.as_ref(), Some(&params))?;
    let train = loaded.samples()?;
    let spec = kernel_spec(&a.kernel, a.alpha, &train.sets, train.species.len(), seed)?;
    let transform = LabelTransform::fit(a.transform.into(), &train)?;
    let options = FitOptions {
        allow_unregularized: a.allow_unregularized,
        ..FitOptions::default()
    };
    let model = fit_with(&train, &spec, a.lambda, transform, &options)?;
    for w in &model.warnings {
        log::warn!("{w}");
    }
    let bundle = ModelBundle::new(model, loaded.descriptor, fit_provenance(&loaded.provenance, seed));
    save_model(&bundle, &a.out)?;
    log::info!(
        "saved model with {} training frames to {}",
        train.len(),
        a.out.display()
    );
    Ok(())
}

fn load_for_model(bundle: &ModelBundle, input: &DataArgs) -> Result<Loaded> {
    let loaded = load(input, Some(&bundle.model.species), bundle.descriptor.as_ref())?;
    if loaded.species != bundle.model.species {
        return Err(Error::InvalidParameter("input species table differs from the model's".into()).into());
    }
    Ok(loaded)
}

pub fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let bundle = load_model(&a.model)?;
    let loaded = load_for_model(&bundle, &a.input)?;
    let energies = predict(&bundle.model, &loaded.sets)?;
    let mut csv = String::from("frame,energy\n");
    for (t, e) in energies.iter().enumerate() {
        csv.push_str(&format!("{t},{e}\n"));
    }
    emit(a.out.as_deref(), &csv)
}

fn split_ratios(v: &[f64]) -> Result<[f64; 3]> {
    <[f64; 3]>::try_from(v).map_err(|_| UsageError("--split needs three fractions".into()).into())
}

pub fn cv_cmd(a: &CvArgs, seed: u64) -> Result<()> {
    let table = pinned_table(&a.descriptor)?;
    let params = a.descriptor.params();
    let loaded = load(&a.input, table.as_ref(), Some(&params))?;
    let all = loaded.samples()?;
    let [tr, va, te] = split_indices(all.len(), split_ratios(&a.split)?, seed)?;
    let (train, val, test) = (all.select(&tr), all.select(&va), all.select(&te));
    let spec = kernel_spec(&a.kernel, 0.0, &train.sets, train.species.len(), seed)?;
    let options = FitOptions {
        allow_unregularized: a.allow_unregularized,
        ..FitOptions::default()
    };
    let transform: TransformKind = a.transform.into();
    let sel = select_hyperparameters(&train, &val, &spec, transform, &a.lambda_grid, &a.alpha_grid, &options)?;
    log::info!("selected λ = {:e}, α = {}", sel.lambda, sel.alpha);

    let mut csv = String::from("stage,value,rmse_mev_per_atom,mae_mev_per_atom\n");
    for (stage, curve) in [("lambda", &sel.lambda_curve), ("alpha", &sel.alpha_curve)] {
        for p in &curve.curve {
            csv.push_str(&format!(
                "{stage},{},{},{}\n",
                p.value, p.rmse_mev_per_atom, p.mae_mev_per_atom
            ));
        }
    }
    emit(a.out.as_deref(), &csv)?;

    if a.summary.is_some() || a.model_out.is_some() {
        let tuned = spec.with_alpha(sel.alpha);
        let model = fit_with(
            &train,
            &tuned,
            sel.lambda,
            LabelTransform::fit(transform, &train)?,
            &options,
        )?;
        if let Some(path) = &a.summary {
            let test_report = if test.is_empty() {
                None
            } else {
                Some(evaluate(&model, &test)?)
            };
            let summary = serde_json::json!({
                "seed": seed,
                "sigma": tuned.base.sigma(),
                "lambda": sel.lambda,
                "alpha": sel.alpha,
                "n_train": train.len(),
                "n_val": val.len(),
                "n_test": test.len(),
                "selection": sel,
                "test": test_report,
            });
            emit(Some(path), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
        }
        if let Some(path) = &a.model_out {
            let bundle = ModelBundle::new(model, loaded.descriptor, fit_provenance(&loaded.provenance, seed));
            save_model(&bundle, path)?;
        }
    }
    Ok(())
}

pub fn transfer_cmd(a: &TransferArgs) -> Result<()> {
    let bundle = load_model(&a.model)?;
    let loaded = load_for_model(&bundle, &a.input)?;
    let report = evaluate_transfer(&bundle.model, &loaded.samples()?)?;
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

pub fn cluster_cmd(a: &ClusterArgs, seed: u64) -> Result<()> {
    let (loaded, spec) = match &a.model {
        Some(path) => {
            let bundle = load_model(path)?;
            let loaded = load_for_model(&bundle, &a.input)?;
            (loaded, bundle.model.spec)
        }
        None => {
            let table = pinned_table(&a.descriptor)?;
            let params = a.descriptor.params();
            let loaded = load(&a.input, table.as_ref(), Some(&params))?;
            let spec = kernel_spec(&a.kernel, a.alpha, &loaded.sets, loaded.species.len(), seed)?;
            (loaded, spec)
        }
    };
    let g = gram_matrix(&spec, &loaded.sets)?;
    let labels = spectral_bipartition(&g)?;
    let mut csv = String::from("frame,label\n");
    for (t, l) in labels.iter().enumerate() {
        csv.push_str(&format!("{t},{l}\n"));
    }
    emit(a.out.as_deref(), &csv)?;
    if let Some(path) = &a.heatmap {
        let h = kernel_heatmap_normalize(&g);
        if a.plot {
            write_png(&h, path)?;
        } else {
            emit(Some(path), &heatmap_csv(&h))?;
        }
    }
    Ok(())
}

pub fn heatmap_csv(h: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..h.nrows() {
        let row: Vec<String> = (0..h.ncols()).map(|j| h[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn write_png(h: &DMatrix<f64>, path: &PathBuf) -> Result<()> {
    let img = image::GrayImage::from_fn(h.ncols() as u32, h.nrows() as u32, |x, y| {
        image::Luma([(h[(y as usize, x as usize)] * 255.0).round() as u8])
    });
    img.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn inspect_cmd(a: &InspectArgs) -> Result<()> {
    // full load verifies magic and checksum before anything is reported
    let bundle = load_model(&a.model)?;
    let meta = read_meta(&a.model)?;
    let m = &bundle.model;
    let info = serde_json::json!({
        "format": meta.format,
        "version": meta.version,
        "n_train": m.n_train(),
        "feature_dim": m.feature_dim(),
        "species": m.species,
        "kernel": m.spec,
        "lambda": m.lambda,
        "effective_lambda": m.effective_lambda,
        "sigma": m.sigma(),
        "transform": m.label_transform,
        "descriptor": bundle.descriptor,
        "warnings": m.warnings,
        "provenance": bundle.provenance,
        "sha256": meta.sha256,
    });
    emit(None, &(serde_json::to_string_pretty(&info)? + "\n"))
}
