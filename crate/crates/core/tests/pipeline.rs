use vline_core::harmonics::synthesize;
use vline_core::*;

/// Centroid of the pixels above half the maximum.
fn centroid(img: &CartesianImage) -> [f64; 2] {
    let side = img.side();
    let cut = 0.5 * img.values().iter().cloned().fold(0.0, f64::max);
    let (mut mass, mut x, mut y) = (0.0, 0.0, 0.0);
    for a in 0..side {
        for b in 0..side {
            let v = img.values()[[a, b]];
            if v < cut {
                continue;
            }
            let p = img.position(a, b);
            mass += v;
            x += v * p[0];
            y += v * p[1];
        }
    }
    [x / mass, y / mass]
}

#[test]
fn centered_disc_reconstructs_within_ceiling() {
    let cfg = ScanConfig::reference();
    let truth = EllipsePhantom::centered_disc(2.0, 1.0).rasterize(100, 8.0).unwrap();
    let data = forward_vline(&truth, &cfg).unwrap();
    let err = relative_l2_error(&reconstruct(&data, &cfg).unwrap(), &truth).unwrap();
    assert!(err <= 0.25, "{err}");
}

#[test]
fn radially_symmetric_input_gives_radially_symmetric_output() {
    // closed-form data of a centered disc carry only the n = 0 harmonic
    let cfg = ScanConfig::reference();
    let column: Vec<f64> = (0..=cfg.num_radii)
        .map(|q| {
            let psi = cfg.opening_angle(q);
            if q == cfg.num_radii {
                0.0
            } else {
                analytic_vline_centered_disc(2.0, 1.0, &cfg, 0.0, psi).unwrap()
            }
        })
        .collect();
    let values = ndarray::Array2::from_shape_fn((cfg.num_angles, cfg.num_radii + 1), |(_, q)| column[q]);
    let data = VSinogram::new(cfg.radius, cfg.mu, values).unwrap();
    let plan = ReconstructionPlan::new(&cfg).unwrap();
    let harmonics = plan.solve_harmonics(&plan.abel_rhs(&data).unwrap()).unwrap();
    let polar = synthesize(&harmonics, cfg.radius, DftBackend::Fft).unwrap();
    let top = polar.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..cfg.num_radii {
        let column = polar.values().column(j);
        let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= 0.01 * top, "r_{j}: spread {}", hi - lo);
    }
    let truth = EllipsePhantom::centered_disc(2.0, 1.0).rasterize(100, 8.0).unwrap();
    let img = plan.reconstruct(&data).unwrap();
    assert!(relative_l2_error(&img, &truth).unwrap() <= 0.25);
}

#[test]
fn off_center_disc_is_reconstructed_in_place() {
    // guards against mirrored or rotated harmonics
    for center in [[3.0, 1.0], [-1.5, 4.0], [0.5, -3.5]] {
        let cfg = ScanConfig::new(8.0, 0.15, 64, 64, 64, 8e-4, 0.0);
        let truth = EllipsePhantom::new(vec![Ellipse::disc(center, 1.5, 1.0)]).rasterize(64, 8.0).unwrap();
        let recon = reconstruct(&forward_vline(&truth, &cfg).unwrap(), &cfg).unwrap();
        let c = centroid(&recon);
        let d = (c[0] - center[0]).hypot(c[1] - center[1]);
        assert!(d < 0.3, "center {center:?} reconstructed at {c:?}");
        let err = relative_l2_error(&recon, &truth).unwrap();
        assert!(err < 0.5, "{err}");
        let mirrored = EllipsePhantom::new(vec![Ellipse::disc([center[0], -center[1]], 1.5, 1.0)])
            .rasterize(64, 8.0)
            .unwrap();
        assert!(relative_l2_error(&recon, &mirrored).unwrap() > 1.0);
    }
}

#[test]
fn three_disc_fixture_beats_zero_baseline() {
    let cfg = ScanConfig::reference().with_lambda(8e-3, 0.0);
    let truth = EllipsePhantom::three_discs().rasterize(100, 8.0).unwrap();
    let recon = reconstruct(&forward_vline(&truth, &cfg).unwrap(), &cfg).unwrap();
    assert!(relative_l2_error(&recon, &truth).unwrap() <= 0.5);
}

#[test]
fn direct_and_tiny_regularization_agree_for_mean_harmonic() {
    let cfg = ScanConfig::new(8.0, 0.15, 32, 40, 40, 1e-3, 0.0);
    let truth = EllipsePhantom::three_discs().rasterize(40, 8.0).unwrap();
    let data = forward_vline(&truth, &cfg).unwrap();
    let direct = reconstruct(&data, &cfg).unwrap();
    let regularized = reconstruct(&data, &cfg.with_lambda(1e-3, 1e-12)).unwrap();
    let diff = relative_l2_error(&regularized, &direct).unwrap();
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn photon_counts_match_requested_total() {
    let cfg = ScanConfig::reference();
    let truth = EllipsePhantom::centered_disc(2.0, 1.0).rasterize(100, 8.0).unwrap();
    let clean = forward_vline(&truth, &cfg).unwrap();
    let total = 1_894_918u64;
    let noisy = poisson_noise(&clean, total, 7).unwrap();
    let gap = (noisy.total_counts as f64 - total as f64).abs();
    assert!(gap <= 3.0 * (total as f64).sqrt(), "{}", noisy.total_counts);
    // same regime as a few hundred counts on the brightest V-line
    assert!((100..=2000).contains(&noisy.max_bin_count), "{}", noisy.max_bin_count);
}

#[test]
fn degenerate_experiment_lists() {
    let cfg = ScanConfig::new(8.0, 0.15, 16, 16, 16, 1e-3, 0.0);
    let truth = EllipsePhantom::centered_disc(2.0, 1.0).rasterize(16, 8.0).unwrap();
    let data = forward_vline(&truth, &cfg).unwrap();
    let one = lambda_sweep(&data, &cfg, &[1e-3], &truth).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].0, 1e-3);
    assert!(mismatch_experiment(&data, &cfg, &[], &truth).unwrap().is_empty());
    let best = mismatch_experiment(&data, &cfg.with_lambda(1e-3, 0.0), &[0.15], &truth).unwrap();
    assert_eq!(best[0].1, relative_l2_error(&reconstruct(&data, &cfg).unwrap(), &truth).unwrap());
}

#[test]
fn timed_plan_matches_one_shot() {
    let cfg = ScanConfig::new(8.0, 0.15, 20, 20, 20, 1e-3, 0.0);
    let truth = EllipsePhantom::three_discs().rasterize(20, 8.0).unwrap();
    let data = forward_vline(&truth, &cfg).unwrap();
    let (img, timings) = ReconstructionPlan::new(&cfg).unwrap().reconstruct_timed(&data).unwrap();
    assert_eq!(img, reconstruct(&data, &cfg).unwrap());
    assert_eq!(
        timings.total(),
        timings.analyze + timings.solve + timings.synthesize + timings.resample
    );
    let direct = ReconstructionPlan::new(&cfg).unwrap().with_backend(DftBackend::Direct).reconstruct(&data).unwrap();
    assert!(relative_l2_error(&direct, &img).unwrap() < 1e-12);
}
