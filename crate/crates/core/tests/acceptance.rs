//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! with the measured quantities before asserting.

mod common;

use std::f64::consts::PI;

use common::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use shgcint_core::acquisition::{simulate_experiment, AcquisitionGeometry, ArrayData, SolverConfig};
use shgcint_core::gomodel::{moment_check, synth_data_go, GoOptions, GoRegimeParams, MomentSetup};
use shgcint_core::imaging::{
    cint, cint_field, migrate, migrate_field, peak_metrics, CintParams, Method, SearchGrid, Window,
};
use shgcint_core::medium::{gen_random_medium, MediumRealization, RandomFourierField, ScattererSet};
use shgcint_core::solver::{assemble, factorize, pml_quality, PmlParams};
use shgcint_core::stats::{artifact_scan, generate_data, run_ensemble, DataSource, Domain, EnsembleSpec, Scene};
use shgcint_core::waves::{Harmonic, Wavenumber};
use shgcint_core::{Grid2, Point2, C64};

fn report(n: u32, name: &str, pass: bool, details: &str) {
    println!("ACCEPTANCE {n} [{name}]: {} | {details}", if pass { "PASS" } else { "FAIL" });
}

fn random_c64(rng: &mut ChaCha20Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

#[test]
fn acceptance_1_solver_correctness() {
    // 20×20 padded grid: 10×10 interior plus a 5-node layer.
    let interior = Grid2::new(Point2::ORIGIN, 0.05, 10, 10).unwrap();
    let pml = PmlParams { width: 0.25, strength: 1.79 };
    let op = assemble(
        &MediumRealization::homogeneous(interior),
        &Array2::zeros((10, 10)),
        Wavenumber::new(2.0 * PI, Harmonic::Fundamental).unwrap(),
        &pml,
    )
    .unwrap();
    assert_eq!(op.len(), 400);
    let dense = to_dense(&op.matrix);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let b: Vec<C64> = (0..400).map(|_| random_c64(&mut rng)).collect();
    let x_dense = dense_solve(dense, b.clone());
    let x_sparse = factorize(op).unwrap().solve(&b).unwrap();
    let dense_err = rel_err(&x_sparse, &x_dense);

    // Absorbing layer at the default settings on a 10λ interior.
    let grid = Grid2::covering(Point2::new(-5.0, -5.0), 10.0, 10.0, 0.05).unwrap();
    let op = assemble(
        &MediumRealization::homogeneous(grid),
        &Array2::zeros(grid.shape()),
        Wavenumber::new(2.0 * PI, Harmonic::Fundamental).unwrap(),
        &PmlParams::default(),
    )
    .unwrap();
    let quality = pml_quality(&op).unwrap();

    let pass = dense_err <= 1e-10 && quality <= 0.05;
    report(1, "solver correctness", pass, &format!("sparse vs dense rel err {dense_err:.2e} (≤ 1e-10), PML deviation {:.2}% (≤ 5%)", 100.0 * quality));
    assert!(pass);
}

#[test]
fn acceptance_2_second_harmonic_scales_quadratically() {
    let scene = square_scene(10.0, vec![disk(0.0, 5.0)], 20);
    let medium = MediumRealization::homogeneous(scene.domain.grid().unwrap());
    let run = |amp: f64| {
        let cfg = SolverConfig { incident_amplitude: amp, ..SolverConfig::default() };
        let d = simulate_experiment(&medium, &scene.scatterers, &scene.geometry, &cfg).unwrap().data;
        d.d2.iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    let ratio = run(2.0) / run(1.0);
    let pass = (ratio / 4.0 - 1.0).abs() <= 0.02;
    report(2, "quadratic second harmonic", pass, &format!("max|u2| ratio for amplitude 1 -> 2: {ratio:.4} (4.0 ± 2%)"));
    assert!(pass);
}

#[test]
fn acceptance_3_homogeneous_migration_resolution() {
    let y = Point2::new(0.0, 5.0);
    let scene = square_scene(10.0, vec![disk(y.x, y.y)], 20);
    let medium = MediumRealization::homogeneous(scene.domain.grid().unwrap());
    let data = simulate_experiment(&medium, &scene.scatterers, &scene.geometry, &SolverConfig::default())
        .unwrap()
        .data;
    let mut lines = Vec::new();
    let mut pass = true;
    let mut fwhm = [0.0; 2];
    for (i, j) in Harmonic::BOTH.into_iter().enumerate() {
        let s = SearchGrid::square(y, 4.0, 0.025, j).unwrap();
        let m = &peak_metrics(&migrate(&data, &s).unwrap(), &scene.scatterers)[0];
        fwhm[i] = m.fwhm_x.unwrap_or(f64::NAN);
        pass &= m.localization_error <= 0.5;
        lines.push(format!("j={j}: peak error {:.3}λ, FWHM {:.3}λ", m.localization_error, fwhm[i]));
    }
    let ratio = fwhm[1] / fwhm[0];
    pass &= (0.4..=0.8).contains(&ratio);
    report(3, "homogeneous migration", pass, &format!("{}; FWHM ratio j2/j1 {ratio:.3} (in [0.4, 0.8])", lines.join("; ")));
    assert!(pass);
}

fn toy_data(seed: u64) -> ArrayData {
    let g = AcquisitionGeometry::bottom_array(4.0, 5, 3).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d1 = Array2::from_shape_fn((5, 3), |_| random_c64(&mut rng));
    let d2 = Array2::from_shape_fn((5, 3), |_| random_c64(&mut rng));
    ArrayData::new(d1, d2, g, None).unwrap()
}

#[test]
fn acceptance_4_cint_without_windows_is_squared_migration() {
    let data = toy_data(4);
    let params = CintParams { x: 1e6, theta: 1e6, window: Window::Hard, cutoff: 1.0 };
    let mut worst: f64 = 0.0;
    for j in Harmonic::BOTH {
        let s = SearchGrid::square(Point2::new(0.3, 3.0), 2.0, 0.1, j).unwrap();
        let c = cint(&data, &s, &params).unwrap();
        let m = migrate(&data, &s).unwrap();
        for (a, b) in c.values.iter().zip(m.values.iter()) {
            worst = worst.max((a - b * b).abs() / (b * b));
        }
    }
    let pass = worst <= 1e-10;
    report(4, "CINT / migration identity", pass, &format!("max relative |CINT − |migration|²| = {worst:.2e} (≤ 1e-10)"));
    assert!(pass);
}

#[test]
fn acceptance_5_cint_matches_all_pairs_reference() {
    let data = toy_data(5);
    let g = &data.geometry;
    let params = CintParams { x: 0.6, theta: 0.5, window: Window::Gaussian, cutoff: 2.0 };
    let coords = g.sensor_coordinates();
    let k = g.k();
    let mut worst: f64 = 0.0;
    let mut pruned = 0;
    for j in Harmonic::BOTH {
        let s = SearchGrid::square(Point2::new(-0.4, 2.5), 1.0, 0.25, j).unwrap();
        let fast = cint_field(&data, &s, &params).unwrap();
        let d = data.harmonic(j);
        let jk = j.factor() * k;
        for (ix, iy, y) in s.grid.nodes() {
            let b = |sx: usize, q: usize| {
                let r = g.sensors[sx].distance(y);
                d[[sx, q]]
                    * shgcint_core::waves::g0_2d_radial(r, jk).conj()
                    * C64::from_polar(1.0, -jk * g.direction(q).dot(y))
            };
            let mut total = C64::new(0.0, 0.0);
            for s1 in 0..5 {
                for s2 in 0..5 {
                    for q1 in 0..3 {
                        for q2 in 0..3 {
                            let zx = (coords[s1] - coords[s2]) / params.x;
                            let zt = (g.angles[q1] - g.angles[q2]) / params.theta;
                            if zx.abs() > params.cutoff || zt.abs() > params.cutoff {
                                pruned += 1;
                                continue;
                            }
                            let w = (-0.5 * zx * zx).exp() * (-0.5 * zt * zt).exp();
                            total += b(s1, q1) * b(s2, q2).conj() * w;
                        }
                    }
                }
            }
            let got = fast[[iy, ix]];
            worst = worst.max((got - total).norm() / total.norm());
        }
    }
    assert!(pruned > 0, "thresholds should prune some pairs");
    // Only the summation order differs; agreement is to rounding.
    let pass = worst <= 1e-12;
    report(5, "CINT all-pairs oracle", pass, &format!("max relative difference {worst:.2e} (rounding level, ≤ 1e-12)"));
    assert!(pass);
}

/// `ℓ = 20λ`, `L = 2000λ` and `σ` chosen so that `ℓ¹ₛ = 100λ`.
fn go_moment_regime() -> GoRegimeParams {
    let (l, ls1) = (20.0, 100.0);
    let sigma = (8.0 / ((2.0 * PI).sqrt() * (2.0 * PI).powi(2) * l * ls1)).sqrt();
    GoRegimeParams {
        wavelength: 1.0,
        correlation_length: l,
        amplitude: sigma,
        range: 2000.0,
        aperture: 400.0,
        cone_half_angle: 0.1,
        entry_distance: None,
    }
}

#[test]
fn acceptance_6_go_statistics_match_theory() {
    let setup = MomentSetup::scaled(go_moment_regime(), 500, 6_000).unwrap();
    let r = moment_check(&setup).unwrap();
    let p = &r.prediction;
    let var_err = r.phase_variance / r.predicted_phase_variance - 1.0;
    let ls_err = r.fitted_scattering_length.unwrap_or(f64::NAN) / p.scattering_lengths[0] - 1.0;
    let xd = r.fitted_decoherence_lengths.map(|x| x.unwrap_or(f64::NAN));
    let xd_err = [xd[0] / p.decoherence_lengths[0] - 1.0, xd[1] / p.decoherence_lengths[1] - 1.0];
    let ratio = xd[1] / xd[0];
    let pass = var_err.abs() <= 0.10
        && ls_err.abs() <= 0.20
        && xd_err.iter().all(|e| e.abs() <= 0.20)
        && (ratio / 0.5 - 1.0).abs() <= 0.10;
    report(
        6,
        "GO statistics",
        pass,
        &format!(
            "{} samples; Var ν {:.4} vs {:.4} ({:+.1}%); ℓs1 {:.1} vs {:.1} ({:+.1}%); X_d1 {:.3} vs {:.3} ({:+.1}%); X_d2 {:.3} vs {:.3} ({:+.1}%); X_d2/X_d1 {ratio:.3}",
            r.samples,
            r.phase_variance,
            r.predicted_phase_variance,
            100.0 * var_err,
            r.fitted_scattering_length.unwrap_or(f64::NAN),
            p.scattering_lengths[0],
            100.0 * ls_err,
            xd[0],
            p.decoherence_lengths[0],
            100.0 * xd_err[0],
            xd[1],
            p.decoherence_lengths[1],
            100.0 * xd_err[1],
        ),
    );
    assert!(pass);
}

/// Phase-screen scene: `ℓ = 10λ`, scatterer `L = 1000λ` above the centre
/// of an array of aperture `a` with sensors `λ/2` apart, illumination cone
/// of half-angle `a/(2L)` along `x̂` sampled at `Θ_d/4`, and `σ` chosen so
/// that `ℓ¹ₛ = 50λ`.
fn go_stability_scene(aperture: f64) -> (Scene, CintParams, SearchGrid) {
    let (l, big_l, ls1) = (10.0, 1000.0, 50.0);
    let sigma = (8.0 / ((2.0 * PI).sqrt() * (2.0 * PI).powi(2) * l * ls1)).sqrt();
    let regime = GoRegimeParams {
        wavelength: 1.0,
        correlation_length: l,
        amplitude: sigma,
        range: big_l,
        aperture,
        cone_half_angle: aperture / (2.0 * big_l),
        entry_distance: None,
    };
    let p = shgcint_core::gomodel::theory_predict(&regime).unwrap();
    let alpha = regime.cone_half_angle;
    let n_angles = (2.0 * alpha / (p.decoherence_angle / 4.0)).round() as usize + 1;
    let n_sensors = (aperture / 0.5).round() as usize + 1;
    let geometry = AcquisitionGeometry::linear(
        1.0,
        (-aperture / 2.0, aperture / 2.0, 0.0),
        n_sensors,
        Point2::new(1.0, 0.0),
        alpha,
        n_angles,
    )
    .unwrap();
    let scene = Scene {
        medium: shgcint_core::medium::MediumParams {
            correlation_length: l,
            amplitude: sigma,
            mode_count: shgcint_core::medium::DEFAULT_MODE_COUNT,
            seed: 0,
        },
        domain: Domain { lo: Point2::new(-big_l, -1.0), hi: Point2::new(big_l, big_l + 10.0), spacing: 1.0 },
        scatterers: ScattererSet::new(vec![disk(0.0, big_l)]).unwrap(),
        geometry,
        solver: SolverConfig::default(),
        go: GoOptions { direct_wave: false },
    };
    let cint = CintParams::gaussian(p.decoherence_lengths[1], p.decoherence_angle / 2.0);
    let search = SearchGrid::square(Point2::new(0.0, big_l), 80.0, 20.0, Harmonic::Second).unwrap();
    (scene, cint, search)
}

#[test]
fn acceptance_7_cint_is_statistically_stable() {
    let mut pass = true;
    let mut details = Vec::new();

    // Wave-equation ensemble at reduced scale.
    let scene = square_scene(10.0, vec![disk(0.0, 5.0)], 20);
    let spec = EnsembleSpec::new(scene, (1..=8).collect(), DataSource::Pde);
    let search = SearchGrid::square(Point2::new(0.0, 5.0), 4.0, 0.1, Harmonic::Second).unwrap();
    let rep = run_ensemble(&spec, &[Method::Migration, Method::Cint], &CintParams::gaussian(1.75, PI / 5.0), &search).unwrap();
    let (m, c) = (rep.method(Method::Migration).unwrap(), rep.method(Method::Cint).unwrap());
    let ok = c.mean_correlation > m.mean_correlation && c.snr_at_truth[0] > m.snr_at_truth[0];
    pass &= ok;
    details.push(format!(
        "PDE (8 seeds): corr CINT {:.3} vs migration {:.3}, SNR CINT {:.2}±{:.2} vs migration {:.2}±{:.2}",
        c.mean_correlation, m.mean_correlation, c.snr_at_truth[0], c.snr_std_error[0], m.snr_at_truth[0], m.snr_std_error[0]
    ));

    // Phase-screen ensembles at two apertures.
    let mut cint_snr = Vec::new();
    for a in [100.0, 200.0] {
        let (scene, params, search) = go_stability_scene(a);
        let mut spec = EnsembleSpec::new(scene, (1000..1100).collect(), DataSource::Go);
        spec.correlation_window = 100.0;
        let rep = run_ensemble(&spec, &[Method::Migration, Method::Cint], &params, &search).unwrap();
        let (m, c) = (rep.method(Method::Migration).unwrap(), rep.method(Method::Cint).unwrap());
        let complex = m.complex_snr_at_truth.as_ref().unwrap()[0];
        let ok = c.mean_correlation > m.mean_correlation && c.snr_at_truth[0] > m.snr_at_truth[0] && complex < 1.0;
        pass &= ok;
        cint_snr.push(c.snr_at_truth[0]);
        details.push(format!(
            "GO a={a} (100 seeds): corr CINT {:.3} vs migration {:.3}, SNR CINT {:.2}±{:.2} vs migration {:.2}, complex migration SNR {complex:.3}",
            c.mean_correlation, m.mean_correlation, c.snr_at_truth[0], c.snr_std_error[0], m.snr_at_truth[0]
        ));
    }
    let growth = cint_snr[1] / cint_snr[0];
    let predicted = 4.0;
    let ok = growth >= predicted / 2.0 && growth <= predicted * 2.0;
    pass &= ok;
    details.push(format!("CINT SNR growth for a -> 2a: {growth:.2} (predicted {predicted} within a factor 2)"));
    report(7, "statistical stability", pass, &details.join("; "));
    assert!(pass);
}

#[test]
fn acceptance_8_direct_wave_artifact() {
    let scene = square_scene(10.0, vec![disk(-1.0, 5.0), disk(1.5, 6.5)], 41);
    let data = generate_data(&scene, DataSource::Pde, 8).unwrap();
    let grid = Grid2::covering(Point2::new(-5.0, 0.25), 10.0, 9.75, 0.125).unwrap();
    let mut ratios = [0.0; 2];
    let mut peak_err = f64::NAN;
    for (i, (j, x)) in [(Harmonic::Fundamental, 3.5), (Harmonic::Second, 1.75)].into_iter().enumerate() {
        let img = cint(&data, &SearchGrid::new(grid, j), &CintParams::gaussian(x, PI / 5.0)).unwrap();
        ratios[i] = artifact_scan(&img, &scene.geometry, &scene.scatterers).unwrap().ratio().unwrap_or(f64::NAN);
        if j == Harmonic::Second {
            let (p, _) = img.argmax();
            peak_err = scene.scatterers.positions().iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min);
        }
    }
    let pass = ratios[0] > ratios[1] && peak_err <= 1.0;
    report(
        8,
        "direct-wave artifact",
        pass,
        &format!("near-array ratio η1 {:.3} vs η2 {:.3}; η2 global peak {:.3}λ from a scatterer (≤ 1λ)", ratios[0], ratios[1], peak_err),
    );
    assert!(pass);
}

/// Hashes of every stage of a small pipeline run.
fn pipeline_hashes() -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let scene = square_scene(4.0, vec![disk(0.5, 2.0)], 4);
    let grid = scene.domain.grid().unwrap();
    let medium = gen_random_medium(&grid, &scene.medium.with_seed(77)).unwrap();
    out.push(("medium", sha256_hex(&f64_bytes(medium.eta.iter()))));
    let data = simulate_experiment(&medium, &scene.scatterers, &scene.geometry, &SolverConfig::default())
        .unwrap()
        .data;
    out.push(("forward", sha256_hex(&[c64_bytes(data.d1.iter()), c64_bytes(data.d2.iter())].concat())));
    let search = SearchGrid::square(Point2::new(0.5, 2.0), 1.0, 0.1, Harmonic::Second).unwrap();
    out.push(("migration", sha256_hex(&c64_bytes(migrate_field(&data, &search).unwrap().iter()))));
    let params = CintParams::gaussian(1.0, PI / 5.0);
    out.push(("cint", sha256_hex(&f64_bytes(cint(&data, &search, &params).unwrap().values.iter()))));
    let field = RandomFourierField::new(scene.medium.with_seed(78))
        .unwrap()
        .with_support(scene.domain.lo, scene.domain.hi);
    let go = synth_data_go(&field, &scene.scatterers, &scene.geometry, GoOptions::default()).unwrap();
    out.push(("go data", sha256_hex(&[c64_bytes(go.d1.iter()), c64_bytes(go.d2.iter())].concat())));
    let spec = EnsembleSpec::new(scene, vec![3, 4, 5], DataSource::Go);
    let rep = run_ensemble(&spec, &[Method::Migration, Method::Cint], &params, &search).unwrap();
    out.push(("ensemble", sha256_hex(serde_json::to_string(&rep).unwrap().as_bytes())));
    let mut setup = MomentSetup::scaled(go_moment_regime(), 4, 9).unwrap();
    setup.copies = 2;
    out.push(("moments", sha256_hex(serde_json::to_string(&moment_check(&setup).unwrap()).unwrap().as_bytes())));
    out
}

#[test]
fn acceptance_9_pipeline_is_deterministic() {
    let a = pipeline_hashes();
    let b = pipeline_hashes();
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0).collect();
    let pass = differing.is_empty();
    report(
        9,
        "determinism",
        pass,
        &format!("{} stages hashed twice; differing: {:?}", a.len(), differing),
    );
    assert!(pass);
}
