//! Long-run integration checks for the warped-product flows: conservation
//! laws over a thousand steps, mode rates on a perturbed sphere, and the
//! monotone weighted functional. The rate windows are frozen from runs of
//! this suite; each one states the measured value it was pinned to.

use specflow_core::surface_flow::{
    closed_surface_entropy, entropy_flow_velocity, perelman_f, perelman_flow_step,
    perelman_stable_step, perturbation_decay, run_entropy_flow, stable_step, trace_integral,
    DecayEstimate, FlowVariant, LogDensity, PerelmanVariant, WarpedMetric2D,
};

/// A thousand normalized-flow steps on a warped torus: volume and the
/// integrated trace stay pinned, the Gibbs entropy rises monotonically, and
/// the curvature-fluctuation channel underpredicts the observed rate by a
/// stable factor (the pointwise rate model drops the Laplacian of the
/// conformal pressure, which feeds the same mode).
#[test]
fn normalized_torus_run_is_conservative_and_monotone() {
    let m0 = WarpedMetric2D::perturbed_torus(64, 0.05);
    let dt = stable_step(&m0).unwrap();
    let run = run_entropy_flow(&m0, FlowVariant::Normalized, dt, 1000, 10, 1.0).unwrap();
    assert_eq!(run.samples.len(), 101);

    let v0 = run.samples[0].vol;
    for s in &run.samples {
        assert!(
            (s.vol - v0).abs() <= 1e-9 * v0,
            "volume drift {:e} at step {}",
            (s.vol - v0) / v0,
            s.step
        );
    }

    // Entropy of the closed-surface expansion is nondecreasing sample to
    // sample; the per-sample increment (~1e-11) sits four decades above
    // the ulp of S ~ 2.1, so a tiny slack suffices.
    for w in run.samples.windows(2) {
        assert!(
            w[1].entropy >= w[0].entropy - 1e-14,
            "entropy fell between steps {} and {}",
            w[0].step,
            w[1].step
        );
    }

    // The integrated trace of the normalized velocity vanishes by
    // construction (mean subtraction plus exact flux telescoping).
    let v = entropy_flow_velocity(&run.final_metric, FlowVariant::Normalized).unwrap();
    assert!(trace_integral(&run.final_metric, &v).abs() <= 1e-12);

    // Interior samples carry centered finite-difference rates; compare the
    // run's mean observed dS/dt against the fluctuation-channel prediction.
    let interior = &run.samples[1..run.samples.len() - 1];
    let fd: f64 = interior.iter().map(|s| s.dsdt_fd).sum::<f64>() / interior.len() as f64;
    let var: f64 = interior.iter().map(|s| s.dsdt_variance).sum::<f64>() / interior.len() as f64;
    assert!(var > 0.0);
    let ratio = fd / var;
    println!("torus run: mean dS/dt fd {fd:.6e}, variance channel {var:.6e}, ratio {ratio:.4}");
    // Measured 8.73 on this configuration; the window is a regression pin,
    // not a claim that the channels should agree.
    assert!(
        (7.0..=11.0).contains(&ratio),
        "fd/variance ratio {ratio} left its frozen window"
    );

    // The final entropy agrees with a fresh evaluation on the final metric.
    let s_end = closed_surface_entropy(&run.final_metric, 1.0).unwrap();
    assert!((s_end - run.samples.last().unwrap().entropy).abs() <= 1e-13);
}

/// Mode rates on a slightly squashed sphere. Under the normalized flow the
/// quadrupole grows (the curvature-squared drive outruns the dropped
/// dissipative term); the volume-projected variant keeps the Laplacian term
/// and damps it hard. Windows frozen from this suite's own runs: +3.63 and
/// -19.73 at amplitude 0.0075 on 32 nodes.
#[test]
fn sphere_mode_rates_under_the_two_conservative_flows() {
    let m0 = WarpedMetric2D::perturbed_sphere(32, 1.0, 0.0075);

    // The growing mode stays linear until about t = 0.11, where a
    // pole-concentrated excursion takes over; fit strictly inside that.
    let grow = match perturbation_decay(&m0, FlowVariant::Normalized, 0.1).unwrap() {
        DecayEstimate::Slope { slope, samples } => {
            assert_eq!(samples, 49);
            slope
        }
        DecayEstimate::NoPerturbation => panic!("constructor produced a round sphere"),
    };
    println!("normalized mode rate {grow:.4}");
    assert!(
        (3.2..=4.2).contains(&grow),
        "normalized rate {grow} left its frozen window"
    );

    let damp = match perturbation_decay(&m0, FlowVariant::VolumeProjected, 0.2).unwrap() {
        DecayEstimate::Slope { slope, samples } => {
            assert_eq!(samples, 49);
            slope
        }
        DecayEstimate::NoPerturbation => panic!("constructor produced a round sphere"),
    };
    println!("volume-projected mode rate {damp:.4}");
    assert!(
        (-22.0..=-17.5).contains(&damp),
        "volume-projected rate {damp} left its frozen window"
    );

    // Halving the amplitude leaves the fitted rate nearly unchanged (2.3%
    // measured): the rate is a property of the linearized mode, not of the
    // amplitude.
    let half = WarpedMetric2D::perturbed_sphere(32, 1.0, 0.00375);
    let grow_half = match perturbation_decay(&half, FlowVariant::Normalized, 0.1).unwrap() {
        DecayEstimate::Slope { slope, .. } => slope,
        DecayEstimate::NoPerturbation => panic!("constructor produced a round sphere"),
    };
    println!("normalized mode rate at half amplitude {grow_half:.4}");
    assert!(
        (grow_half - grow).abs() <= 0.05 * grow.abs(),
        "rate moved from {grow} to {grow_half} when the amplitude halved"
    );
}

/// Asking for a window that extends past the pole-regularity exit returns a
/// fit over the regular segment instead of an error, with fewer samples.
#[test]
fn pole_exit_of_a_growing_mode_truncates_the_fit() {
    let m0 = WarpedMetric2D::perturbed_sphere(32, 1.0, 0.0075);
    match perturbation_decay(&m0, FlowVariant::Normalized, 0.2).unwrap() {
        DecayEstimate::Slope { slope, samples } => {
            println!("truncated fit: slope={slope:.4} samples={samples}");
            assert!(
                (20..49).contains(&samples),
                "expected an early stop near t = 0.11, got {samples} samples"
            );
            // The tail samples sit in the nonlinear excursion, so the fit
            // lands above the linear rate but stays the same sign and size.
            assert!((3.2..=7.0).contains(&slope));
        }
        DecayEstimate::NoPerturbation => panic!("constructor produced a round sphere"),
    }
}

/// A hundred weighted Ricci-type steps on a warped torus with a nontrivial
/// log-density: the functional never decreases and the weighted volume
/// element is transported exactly, for both velocity weightings.
#[test]
fn perelman_run_is_monotone_and_measure_preserving() {
    for variant in [PerelmanVariant::Weighted, PerelmanVariant::Standard] {
        let mut m = WarpedMetric2D::perturbed_torus(48, 0.1);
        let mut f = LogDensity {
            values: m.nodes().into_iter().map(|x| 0.3 * x.cos()).collect(),
        };
        let measure0: Vec<f64> = (0..m.len())
            .map(|j| (-f.values[j]).exp() * (m.a()[j] * m.b()[j]).sqrt())
            .collect();
        let mut prev = perelman_f(&m, &f).unwrap();
        for step in 0..100 {
            let dt = 0.9 * perelman_stable_step(&m, &f, variant).unwrap();
            let (mn, fn_) = perelman_flow_step(&m, &f, dt, variant).unwrap();
            m = mn;
            f = fn_;
            let cur = perelman_f(&m, &f).unwrap();
            assert!(
                cur >= prev - 1e-12 * prev.abs().max(1.0),
                "functional fell at step {step}: {prev} -> {cur} ({variant:?})"
            );
            prev = cur;
        }
        for j in 0..m.len() {
            let measure = (-f.values[j]).exp() * (m.a()[j] * m.b()[j]).sqrt();
            assert!(
                (measure - measure0[j]).abs() <= 1e-9 * measure0[j],
                "weighted measure drifted at node {j} ({variant:?})"
            );
        }
    }
}
