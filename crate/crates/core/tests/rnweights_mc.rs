use std::f64::consts::PI;

use lerwlab::experiments::{quarter_disk_spec, setup, straight_path};
use lerwlab::lattice::DomainSpec;
use lerwlab::loewner::SleOptions;
use lerwlab::rnweights::{
    direct_radial_lerw, direct_radial_sle, h_ratio_check, kl_constant, m_lerw_sine_form, reweight_lerw, reweight_sle,
    DiskTarget, HRatioOptions, LerwWeights, StopReason, StopRule, WeightedEnsemble,
};
use lerwlab::stats::{chi_square_two_sample, ks_weighted};
use lerwlab::Error;
use num_complex::Complex64;

fn check_bookkeeping(e: &WeightedEnsemble) {
    assert!(e.samples.iter().all(|s| s.weight >= 0.0 && s.weight.is_finite()));
    let retained: f64 = e.retained().map(|s| s.weight).sum();
    assert!((retained + e.excluded_weight() - e.total_weight()).abs() <= 1e-9 * e.total_weight());
    assert!(e.ess() <= e.retained().count() as f64 + 1e-9);
    for s in &e.samples {
        if !s.excluded {
            assert_eq!(s.reason, StopReason::Radius);
        }
    }
}

#[test]
fn weighted_chordal_lerw_matches_radial_angles() {
    let n = 100;
    let (d, a, b) = setup(&quarter_disk_spec(), n).unwrap();
    let stop = StopRule::radius(0.3);
    let w = reweight_lerw(&d, a, b, &stop, n as f64, 10_000, 21).unwrap();
    let r = direct_radial_lerw(&d, a, b, &stop, n as f64, 10_000, 22).unwrap();
    check_bookkeeping(&w);
    check_bookkeeping(&r);
    let chi = chi_square_two_sample(&w.angle_histogram(16), &r.angle_histogram(16), 20.0);
    assert!(chi.dof >= 8);
    assert!(chi.p_value > 1e-3, "{chi:?}");
    for s in w.retained() {
        assert!(s.position.norm() <= 0.3 + 1e-12);
    }
}

#[test]
fn weighted_chordal_sle_matches_radial_angles() {
    let opts = SleOptions::adaptive(1e-3, 0.02);
    let stop = StopRule::radius(0.5).with_sine_floor(0.1);
    let target = DiskTarget::new(PI).unwrap();
    let w = reweight_sle(20.0, &stop, 10_000, 31, &target, opts).unwrap();
    let r = direct_radial_sle(20.0, &stop, 10_000, 32, PI, opts).unwrap();
    check_bookkeeping(&w);
    check_bookkeeping(&r);
    let ks = ks_weighted(&w.angles(), &r.angles());
    assert!(ks < 0.05, "{ks}");
    // the guard removes little mass
    assert!(w.excluded_weight() < 0.1 * w.total_weight());
}

#[test]
fn sine_guard_exclusions_are_nested() {
    let opts = SleOptions::adaptive(1e-3, 0.02);
    let target = DiskTarget::new(2.0).unwrap();
    let run = |delta: f64| reweight_sle(20.0, &StopRule::radius(0.5).with_sine_floor(delta), 400, 41, &target, opts).unwrap();
    let floors = [0.05, 0.1, 0.2];
    let runs: Vec<WeightedEnsemble> = floors.iter().map(|d| run(*d)).collect();
    for pair in runs.windows(2) {
        for (lo, hi) in pair[0].samples.iter().zip(&pair[1].samples) {
            if lo.reason == StopReason::Sine {
                assert_eq!(hi.reason, StopReason::Sine);
            }
        }
        let count = |e: &WeightedEnsemble| e.samples.iter().filter(|s| s.reason == StopReason::Sine).count();
        assert!(count(&pair[0]) <= count(&pair[1]));
    }
    assert!(runs[2].samples.iter().any(|s| s.reason == StopReason::Sine));
}

#[test]
fn kl_constant_is_symmetric_in_the_marked_points() {
    let spec = quarter_disk_spec();
    let swapped = DomainSpec { a: spec.b, b: spec.a, ..spec.clone() };
    let one = kl_constant(&spec, &[40, 60]).unwrap();
    let two = kl_constant(&swapped, &[40, 60]).unwrap();
    for (x, y) in one.rows.iter().zip(&two.rows) {
        assert!((x.c_hat - y.c_hat).abs() < 1e-10 * x.c_hat, "{} {}", x.c_hat, y.c_hat);
    }
}

#[test]
fn h_ratio_rejects_paths_below_the_sine_floor() {
    let (d, a, b) = setup(&quarter_disk_spec(), 32).unwrap();
    let eta = straight_path(&d, a, 16.0).unwrap();
    let opts = |delta| HRatioOptions { s: 16.0, delta, refinement: 2, budget: 1_000_000 };
    assert!(h_ratio_check(&d, &eta, b, &opts(0.1)).is_ok());
    assert!(matches!(h_ratio_check(&d, &eta, b, &opts(0.99)), Err(Error::SineFloor { .. })));
}

#[test]
fn sine_form_approximates_the_weight() {
    let spec = DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, 0.0, 2.0);
    let mut errors = Vec::new();
    for n in [20, 40, 80] {
        let (d, a, b) = setup(&spec, n).unwrap();
        let ctx = LerwWeights::new(&d, a, b).unwrap();
        let eta = straight_path(&d, a, 0.5 * n as f64).unwrap();
        let k = eta.len() - 1;
        let m = ctx.weight(&eta[..k], eta[k]).unwrap();
        let approx = m_lerw_sine_form(&ctx, &eta[..k], eta[k]).unwrap();
        errors.push((m - approx).abs() / m);
    }
    assert!(errors[2] < 0.1, "{errors:?}");
    assert!(errors[2] < errors[0], "{errors:?}");
}
