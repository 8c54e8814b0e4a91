use std::f64::consts::PI;

use lerwlab::content::{annulus_content, content_parametrize, content_profile, default_radii, shell_profiles, ContentStatus, DIMENSION};
use lerwlab::loewner::{radial_sle2_adaptive, SleOptions};
use lerwlab::{rng, ParamCurve};
use num_complex::Complex64;
use proptest::prelude::*;

fn circle(radius: f64, turns: f64, k: usize) -> ParamCurve {
    let pts = (0..=k).map(|j| Complex64::from_polar(radius, 2.0 * PI * turns * j as f64 / k as f64)).collect();
    ParamCurve::uniform(pts, 1.0).unwrap()
}

fn sle(seed: u64) -> ParamCurve {
    let opts = SleOptions { dt: 2e-3, max_jump: Some(0.01), focus: None, max_halvings: 12 };
    radial_sle2_adaptive(1.0, opts, rng::seeded(seed)).unwrap().trace().unwrap()
}

#[test]
fn circle_tube_areas() {
    // the r-neighbourhood of a circle of radius R is an annulus of area 4 pi R r
    let c = circle(0.8, 1.0, 2000);
    let radii = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let p = content_profile(&c, 1.0, &radii).unwrap();
    for row in &p.rows {
        let exact = 4.0 * PI * 0.8 * row.r;
        assert!((row.area / exact - 1.0).abs() < 0.03, "{} {}", row.area, exact);
    }
    assert_eq!(p.status, ContentStatus::Finite);
    assert!((p.content / (4.0 * PI * 0.8) - 1.0).abs() < 0.03, "{}", p.content);
}

#[test]
fn smooth_curves_have_vanishing_content() {
    let c = circle(0.5, 0.75, 600);
    let p = content_profile(&c, DIMENSION, &default_radii(&c)).unwrap();
    assert_eq!(p.status, ContentStatus::Vanishing);
    assert_eq!(p.content, 0.0);
    assert!(content_parametrize(&c, DIMENSION).is_err());
    let point = ParamCurve::constant(Complex64::new(0.1, 0.0), 2.0);
    assert_eq!(content_profile(&point, DIMENSION, &[0.1, 0.05, 0.02, 0.01]).unwrap().content, 0.0);
}

#[test]
fn length_parametrization_of_an_arc() {
    let c = circle(1.0, 0.5, 1000);
    let p = content_parametrize(&c, 1.0).unwrap();
    let total = p.duration();
    assert!((total / (2.0 * PI) - 1.0).abs() < 0.05, "{total}");
    for (t, z) in p.times().iter().zip(p.points()) {
        let arc = z.arg().rem_euclid(2.0 * PI);
        assert!((t / total - arc / PI).abs() < 0.03, "{t} {arc}");
    }
}

#[test]
fn annuli_missing_the_curve_carry_nothing() {
    let c = sle(17);
    let reach = c.points().iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert_eq!(annulus_content(&c, reach + 0.5, reach + 1.0, DIMENSION).unwrap(), 0.0);
    let closest = c.points().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if closest > 0.05 {
        assert_eq!(annulus_content(&c, 0.0, 0.01, DIMENSION).unwrap(), 0.0);
    }
}

#[test]
fn parametrized_duration_is_the_content() {
    for seed in [2, 5] {
        let c = sle(seed);
        let whole = content_profile(&c, DIMENSION, &default_radii(&c)).unwrap();
        assert_eq!(whole.status, ContentStatus::Finite);
        let p = content_parametrize(&c, DIMENSION).unwrap();
        assert!((p.duration() / whole.content - 1.0).abs() < 0.02, "{} {}", p.duration(), whole.content);
        assert_eq!(p.start(), c.start());
        // every kept point is a point of the original curve
        assert!(p.points().iter().all(|z| c.points().contains(z)));
    }
}

fn walk() -> impl Strategy<Value = ParamCurve> {
    prop::collection::vec(0.0f64..2.0 * PI, 20..200).prop_map(|dirs| {
        let mut z = Complex64::new(0.0, 0.0);
        let mut pts = vec![z];
        for a in dirs {
            z += Complex64::from_polar(0.05, a);
            pts.push(z);
        }
        ParamCurve::uniform(pts, 1.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shells_partition_the_neighbourhood(c in walk(), cut in 0.05f64..0.5) {
        let radii = default_radii(&c);
        let ps = shell_profiles(&c, 1.0, &radii, &[(0.0, cut), (cut, f64::INFINITY), (0.0, f64::INFINITY)]).unwrap();
        for k in 0..radii.len() {
            let sum = ps[0].rows[k].area + ps[1].rows[k].area;
            prop_assert!((sum - ps[2].rows[k].area).abs() <= 1e-12 * sum.max(1e-300));
        }
    }

    #[test]
    fn profiles_are_translation_invariant(c in walk(), dx in -3.0f64..3.0, dy in -3.0f64..3.0) {
        let moved = c.map_points(|z| z + Complex64::new(dx, dy));
        let radii = default_radii(&c);
        let p = content_profile(&c, DIMENSION, &radii).unwrap();
        let q = content_profile(&moved, DIMENSION, &radii).unwrap();
        for (x, y) in p.rows.iter().zip(&q.rows) {
            prop_assert!((x.area - y.area).abs() <= 1e-9 * x.area);
        }
    }

    #[test]
    fn content_scales_with_the_dimension(c in walk(), lambda in 0.2f64..5.0, d in 1.0f64..1.5) {
        let big = c.map_points(|z| z * lambda);
        let p = content_profile(&c, d, &default_radii(&c)).unwrap();
        let q = content_profile(&big, d, &default_radii(&big)).unwrap();
        prop_assert_eq!(p.status, q.status);
        if p.content > 0.0 {
            prop_assert!((q.content / (lambda.powf(d) * p.content) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn areas_decrease_with_radius(c in walk()) {
        let p = content_profile(&c, 1.0, &default_radii(&c)).unwrap();
        prop_assert!(p.rows.windows(2).all(|w| w[0].area >= w[1].area));
    }
}
