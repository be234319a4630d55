use knnbandit::concentration::{
    supermartingale_check, tail_bound, verify_bound, AdaptedExperiment, HarnessOptions, MgfBound,
    Scheme, ZDistribution,
};

#[test]
fn bernoulli_supermartingale_is_strict_below_the_envelope() {
    // Z ~ Bernoulli(0.3) under the ξ_max = 0.5 envelope: each step multiplies
    // E[W] by (0.7 + 0.3 e^ρ) / (1 + 0.5 (e^ρ - 1)) < 1.
    let bound = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
    let exp = AdaptedExperiment {
        n: 10,
        z: ZDistribution::Bernoulli(0.3),
        scheme: Scheme::AlwaysOn,
    };
    let reports = supermartingale_check(&bound, &exp, &[0.0, 1.0], 100_000, 11).unwrap();
    assert_eq!(reports[0].mean, 1.0);
    let e = std::f64::consts::E;
    let step = (0.7 + 0.3 * e) / (1.0 + 0.5 * (e - 1.0));
    let exact = step.powi(10);
    let r = &reports[1];
    assert!(r.pass);
    assert!(
        (r.mean - exact).abs() < 4.0 * r.stderr,
        "{} vs {exact}",
        r.mean
    );
}

#[test]
fn gaussian_supermartingale_is_a_martingale_when_always_on() {
    let exp = AdaptedExperiment {
        n: 20,
        z: ZDistribution::StandardNormal,
        scheme: Scheme::AlwaysOn,
    };
    let reports = supermartingale_check(
        &MgfBound::GaussianHalfSquare,
        &exp,
        &[0.25, 0.5],
        100_000,
        5,
    )
    .unwrap();
    for r in reports {
        assert!((r.mean - 1.0).abs() < 4.0 * r.stderr, "{r:?}");
    }
}

#[test]
fn bound_holds_on_a_small_grid() {
    let opts = HarnessOptions {
        replications: 20_000,
        seed: 1,
        enforce_pairing: true,
    };
    let reports = verify_bound(
        200,
        ZDistribution::StandardNormal,
        &Scheme::all(),
        &MgfBound::GaussianHalfSquare,
        &[3.0, 6.0],
        opts,
    )
    .unwrap();
    assert_eq!(reports.len(), 8);
    for r in &reports {
        assert!(r.pass, "{r:?}");
        assert_eq!(r.event_mismatches, Some(0));
        assert_eq!(r.bound, tail_bound(r.delta, 200).unwrap());
    }
}

#[test]
fn harness_refuses_unsound_pairings_unless_told_otherwise() {
    let broken = MgfBound::Quadratic { variance: 0.5 };
    let mut opts = HarnessOptions {
        replications: 10,
        seed: 0,
        enforce_pairing: true,
    };
    let run = |opts| {
        verify_bound(
            50,
            ZDistribution::StandardNormal,
            &[Scheme::AlwaysOn],
            &broken,
            &[3.0],
            opts,
        )
    };
    assert!(run(opts).is_err());
    opts.enforce_pairing = false;
    assert_eq!(run(opts).unwrap()[0].event_mismatches, None);
}

#[test]
fn same_seed_same_reports() {
    let opts = HarnessOptions {
        replications: 2000,
        seed: 99,
        enforce_pairing: true,
    };
    let bound = MgfBound::BernoulliEnvelope { xi_max: 0.5 };
    let z = ZDistribution::Bernoulli(0.5);
    let a = verify_bound(100, z, &Scheme::all(), &bound, &[2.0, 4.0], opts).unwrap();
    let b = verify_bound(100, z, &Scheme::all(), &bound, &[2.0, 4.0], opts).unwrap();
    assert_eq!(a, b);
}
