//! One function per subcommand. Each writes its results and the resolved
//! configuration into the output directory; nothing time-dependent is
//! written, so reruns with the same configuration give identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use shgcint_core::acquisition::{linspace, simulate_experiment, AngleDiagnostics, ArrayData};
use shgcint_core::gomodel::{theory_predict, EffectiveScales, TheoryPrediction};
use shgcint_core::imaging::{
    form_image, fwhm_sinc_amplitude, fwhm_sinc_squared, psf_curves, Method, PsfSample,
};
use shgcint_core::io::{read_array_data, write_array_data, write_grid_raw, write_image, write_json, write_pgm};
use shgcint_core::medium::gen_random_medium;
use shgcint_core::stats::{generate_data, run_ensemble, DataSource};
use shgcint_core::waves::Harmonic;

use crate::config::ExperimentConfig;
use crate::error::CliError;

fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.output.join(name)
}

fn write_resolved_config(config: &ExperimentConfig) -> Result<(), CliError> {
    Ok(write_json(&out_path(config, "config.json"), config)?)
}

/// Sample the random medium on the finite-difference grid.
pub fn gen_medium(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let grid = config.domain()?.grid()?;
    let medium = gen_random_medium(&grid, &config.medium)?;
    let stem = out_path(config, "medium");
    write_grid_raw(&stem, &grid, &medium.eta, serde_json::to_value(config.medium).map_err(io_err)?)?;
    write_pgm(&stem.with_extension("pgm"), &medium.eta)?;
    write_resolved_config(config)?;
    Ok(vec![stem.with_extension("bin"), stem.with_extension("json"), stem.with_extension("pgm")])
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Array data and, for wave-equation data, per-angle solver diagnostics.
pub fn acquire(config: &ExperimentConfig, source: DataSource) -> Result<(ArrayData, Vec<AngleDiagnostics>), CliError> {
    let scene = config.scene()?;
    match source {
        DataSource::Pde => {
            let medium = gen_random_medium(&scene.domain.grid()?, &scene.medium)?;
            let exp = simulate_experiment(&medium, &scene.scatterers, &scene.geometry, &scene.solver)?;
            Ok((exp.data, exp.diagnostics))
        }
        DataSource::Go => Ok((generate_data(&scene, DataSource::Go, scene.medium.seed)?, Vec::new())),
    }
}

pub fn forward(config: &ExperimentConfig, source: DataSource) -> Result<Vec<PathBuf>, CliError> {
    let (data, diagnostics) = acquire(config, source)?;
    let stem = out_path(config, "data");
    write_array_data(&stem, &data)?;
    let diag = out_path(config, "diagnostics.json");
    write_json(&diag, &diagnostics)?;
    write_resolved_config(config)?;
    Ok(vec![stem.with_extension("json"), diag])
}

/// Image previously written data, or data acquired on the fly when `data`
/// is `None`.
pub fn image(
    config: &ExperimentConfig,
    data: Option<&Path>,
    source: DataSource,
    harmonics: &[Harmonic],
) -> Result<Vec<PathBuf>, CliError> {
    let data = match data {
        Some(path) => read_array_data(path)?,
        None => acquire(config, source)?.0,
    };
    let method = config.imaging.method;
    let mut written = Vec::new();
    for &j in harmonics {
        let search = config.imaging.search.grid(j)?;
        let mut img = form_image(&data, &search, method, &config.imaging.cint_params(j))?;
        img.provenance.seed = data.seed;
        let stem = out_path(config, &format!("image_{method}_j{j}"));
        write_image(&stem, &img)?;
        written.push(stem.with_extension("pgm"));
    }
    write_resolved_config(config)?;
    Ok(written)
}

pub fn ensemble(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = config.ensemble_spec()?;
    let j = config.ensemble.harmonic;
    let search = config.ensemble.search.grid(j)?;
    let methods = [Method::Migration, Method::Cint];
    let report = run_ensemble(&spec, &methods, &config.imaging.cint_params(j), &search)?;
    let path = out_path(config, "ensemble.json");
    write_json(&path, &report)?;
    let mut written = vec![path];
    for m in methods {
        for (kind, img) in [("mean", report.mean_image(m)), ("std", report.std_image(m))] {
            if let Some(img) = img {
                let stem = out_path(config, &format!("ensemble_{m}_{kind}"));
                write_image(&stem, &img)?;
                written.push(stem.with_extension("pgm"));
            }
        }
    }
    write_resolved_config(config)?;
    Ok(written)
}

#[derive(Serialize)]
struct TheoryOutput {
    prediction: TheoryPrediction,
    /// `ℓ²ₛ/ℓ¹ₛ`, which the theory forces to 1/4.
    scattering_length_ratio: f64,
    /// `X_d,2/X_d,1`, which the theory forces to 1/2.
    decoherence_length_ratio: f64,
    /// Effective CINT scales for the configured thresholds, `[j = 1, j = 2]`.
    effective_scales: Vec<EffectiveScales>,
    flagged: Vec<String>,
}

pub fn theory(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let prediction = theory_predict(&config.regime()?)?;
    let effective_scales = Harmonic::BOTH
        .iter()
        .map(|&j| {
            let p = config.imaging.cint_params(j);
            prediction.effective_scales(p.x, p.theta, usize::from(j.order()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let out = TheoryOutput {
        scattering_length_ratio: prediction.scattering_lengths[1] / prediction.scattering_lengths[0],
        decoherence_length_ratio: prediction.decoherence_lengths[1] / prediction.decoherence_lengths[0],
        effective_scales,
        flagged: prediction.flagged().map(|c| c.relation.clone()).collect(),
        prediction,
    };
    let path = out_path(config, "theory.json");
    write_json(&path, &out)?;
    write_resolved_config(config)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct PsfOutput {
    harmonic: Harmonic,
    aperture: f64,
    range: f64,
    cone_half_angle: f64,
    /// FWHM of the aperture factor and of its square.
    fwhm_amplitude: f64,
    fwhm_intensity: f64,
    samples: Vec<PsfSample>,
}

/// Homogeneous-medium point spread functions at the mean scatterer range.
pub fn psf(config: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let regime = config.regime()?;
    let offsets = linspace(-config.psf.max_offset, config.psf.max_offset, config.psf.samples);
    let (a, l, alpha) = (regime.aperture, regime.range, regime.cone_half_angle);
    let out: Vec<PsfOutput> = Harmonic::BOTH
        .iter()
        .map(|&j| PsfOutput {
            harmonic: j,
            aperture: a,
            range: l,
            cone_half_angle: alpha,
            fwhm_amplitude: fwhm_sinc_amplitude(1.0, l, j.factor(), a),
            fwhm_intensity: fwhm_sinc_squared(1.0, l, j.factor(), a),
            samples: psf_curves(&offsets, j.factor() * regime.k(), a, l, alpha),
        })
        .collect();
    let path = out_path(config, "psf.json");
    write_json(&path, &out)?;
    write_resolved_config(config)?;
    Ok(vec![path])
}
