mod common;

use common::*;
use mdc_core::imaging::upsample2x;
use mdc_core::losses::*;
use mdc_core::{Plane, SsimConfig};
use proptest::prelude::*;

const STEP: f64 = 1e-4;
const TOLERANCE: f64 = 1e-3;

/// Worst relative error over pixels of `p`, skipping those `skip` marks.
fn worst_error(p: &Plane, analytic: &Plane, f: impl Fn(&Plane) -> f64, skip: impl Fn(usize) -> bool) -> f64 {
    (0..p.len())
        .filter(|&k| !skip(k))
        .map(|k| relative_error(analytic.data()[k], central_difference(p, k, STEP, &f)))
        .fold(0.0, f64::max)
}

/// Pixels whose L1 residual sits close enough to zero that the finite
/// difference straddles the kink.
fn near_content_kink<'a>(x: &'a Plane, y: &'a Plane) -> impl Fn(usize) -> bool + 'a {
    move |k| (x.data()[k] - y.data()[k]).abs() < 2.0 * STEP
}

/// Same for the neighbour differences of the gradient-difference loss.
fn near_gradient_kink<'a>(x: &'a Plane, y: &'a Plane) -> impl Fn(usize) -> bool + 'a {
    let w = x.width() as isize;
    let h = x.height() as isize;
    move |k| {
        let (i, j) = (k as isize / w, k as isize % w);
        let r = |i: isize, j: isize| x.get(i as usize, j as usize) - y.get(i as usize, j as usize);
        (-1..=1).any(|di| {
            (-1..=1).any(|dj| {
                let (ni, nj) = (i + di, j + dj);
                (di, dj) != (0, 0)
                    && (0..h).contains(&ni)
                    && (0..w).contains(&nj)
                    && (r(i, j) - r(ni, nj)).abs() < 2.0 * STEP
            })
        })
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = rng(41);
    for instance in 0..20 {
        let x = random_plane(&mut rng, 8, 8);
        let y = random_plane(&mut rng, 8, 8);

        for window in [8, 4, 3] {
            let cfg = SsimConfig {
                window,
                ..Default::default()
            };
            let (_, g) = ssim_loss_grad(&x, &y, &cfg).unwrap();
            let e = worst_error(&x, &g, |p| ssim_loss(p, &y, &cfg).unwrap(), |_| false);
            assert!(e <= TOLERANCE, "ssim window {window}, instance {instance}: {e}");
        }

        let (_, ga, gb) = distance_loss_grad(&x, &y).unwrap();
        let e = worst_error(&x, &ga, |p| distance_loss(p, &y).unwrap(), near_content_kink(&x, &y));
        assert!(e <= TOLERANCE, "distance wrt a, instance {instance}: {e}");
        let e = worst_error(&y, &gb, |p| distance_loss(&x, p).unwrap(), near_content_kink(&x, &y));
        assert!(e <= TOLERANCE, "distance wrt b, instance {instance}: {e}");

        let (_, gx, gy) = content_loss_grad(&x, &y).unwrap();
        let e = worst_error(&x, &gx, |p| content_loss(p, &y).unwrap(), near_content_kink(&x, &y));
        assert!(e <= TOLERANCE, "content wrt x, instance {instance}: {e}");
        let e = worst_error(&y, &gy, |p| content_loss(&x, p).unwrap(), near_content_kink(&x, &y));
        assert!(e <= TOLERANCE, "content wrt y, instance {instance}: {e}");

        let (_, gx, gy) = gradient_difference_loss_grad(&x, &y).unwrap();
        let e = worst_error(
            &x,
            &gx,
            |p| gradient_difference_loss(p, &y).unwrap(),
            near_gradient_kink(&x, &y),
        );
        assert!(e <= TOLERANCE, "gradient difference wrt x, instance {instance}: {e}");
        let e = worst_error(
            &y,
            &gy,
            |p| gradient_difference_loss(&x, p).unwrap(),
            near_gradient_kink(&x, &y),
        );
        assert!(e <= TOLERANCE, "gradient difference wrt y, instance {instance}: {e}");
    }
}

#[test]
fn description_objective_gradient_matches_finite_differences() {
    let mut rng = rng(43);
    let cfg = LossConfig {
        ssim: SsimConfig {
            window: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    for _ in 0..5 {
        let a = random_plane(&mut rng, 6, 6);
        let b = random_plane(&mut rng, 6, 6);
        let target = random_plane(&mut rng, 12, 12);
        let (_, ga, gb) = mdgn_loss_grad(&a, &b, &target, 10, &cfg).unwrap();
        let total = |a: &Plane, b: &Plane| mdgn_loss(a, b, &target, 10, &cfg).unwrap().total();
        let e = worst_error(&a, &ga, |p| total(p, &b), near_content_kink(&a, &b));
        assert!(e <= TOLERANCE, "wrt a: {e}");
        let e = worst_error(&b, &gb, |p| total(&a, p), near_content_kink(&a, &b));
        assert!(e <= TOLERANCE, "wrt b: {e}");
    }
}

#[test]
fn gradient_difference_matches_neighbour_enumeration() {
    let x = Plane::new(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
    let y = Plane::zeros(2, 2);
    assert_eq!(brute_force_gradient_difference(&x, &y), 1.5);
    assert!((gradient_difference_loss(&x, &y).unwrap() - 1.5).abs() < 1e-15);

    let mut rng = rng(44);
    for (h, w) in [(8, 8), (5, 7), (1, 6)] {
        let x = random_plane(&mut rng, h, w);
        let y = random_plane(&mut rng, h, w);
        let module = gradient_difference_loss(&x, &y).unwrap();
        let oracle = brute_force_gradient_difference(&x, &y);
        assert!(
            (module - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
            "{h}x{w}: {module} vs {oracle}"
        );
    }
}

#[test]
fn reconstruction_objectives_are_sums_of_their_parts() {
    let mut rng = rng(45);
    let part = |t: &Plane, o: &Plane| [content_loss(t, o).unwrap(), gradient_difference_loss(t, o).unwrap()];
    for _ in 0..5 {
        let target = random_plane(&mut rng, 8, 8);
        let outs: Vec<Plane> = (0..3).map(|_| random_plane(&mut rng, 8, 8)).collect();
        let value = mdrn_loss(&target, &outs[0], &outs[1], &outs[2]).unwrap();
        let oracle: Vec<f64> = outs.iter().flat_map(|o| part(&target, o)).collect();
        let values: Vec<f64> = value.terms().iter().map(|(_, v)| *v).collect();
        assert_eq!(values, oracle);
        assert_eq!(value.total(), oracle.iter().sum::<f64>());

        let refs: Vec<Plane> = (0..3).map(|_| random_plane(&mut rng, 8, 8)).collect();
        let value = mdvcn_loss([&refs[0], &refs[1], &refs[2]], [&outs[0], &outs[1], &outs[2]]).unwrap();
        let oracle: Vec<f64> = refs.iter().zip(&outs).flat_map(|(r, o)| part(r, o)).collect();
        let values: Vec<f64> = value.terms().iter().map(|(_, v)| *v).collect();
        assert_eq!(values, oracle);
    }
}

#[test]
fn description_objective_is_a_sum_of_its_parts() {
    let mut rng = rng(46);
    let cfg = LossConfig::default();
    for qf in [2, 10, 100] {
        let a = random_plane(&mut rng, 8, 8);
        let b = random_plane(&mut rng, 8, 8);
        let target = random_plane(&mut rng, 16, 16);
        let value = mdgn_loss(&a, &b, &target, qf, &cfg).unwrap();
        let beta = (0.2 / qf as f64).clamp(5e-3, 5e-2);
        let oracle = [
            ssim_loss(&upsample2x(&a), &target, &cfg.ssim).unwrap(),
            ssim_loss(&upsample2x(&b), &target, &cfg.ssim).unwrap(),
            beta * distance_loss(&a, &b).unwrap(),
        ];
        let values: Vec<f64> = value.terms().iter().map(|(_, v)| *v).collect();
        assert_eq!(values, oracle);
        let sum: f64 = oracle.iter().sum();
        assert!((value.total() - sum).abs() <= 1e-9 * sum.abs());
    }
}

#[test]
fn beta_follows_the_clipped_quality_rule() {
    let cfg = LossConfig::default();
    let expected = [
        (2, 0.05),
        (6, 0.2 / 6.0),
        (10, 0.02),
        (20, 0.01),
        (40, 0.005),
        (100, 0.005),
    ];
    for (qf, beta) in expected {
        assert!((beta_for_qf(qf, &cfg).unwrap() - beta).abs() <= 1e-12, "qf {qf}");
    }
    assert!(beta_for_qf(0, &cfg).is_err());
}

fn unit_plane(h: usize, w: usize) -> impl Strategy<Value = Plane> {
    prop::collection::vec(0.0..=1.0f64, h * w).prop_map(move |v| Plane::new(h, w, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_is_non_increasing_and_banded(q in 1u32..200) {
        let cfg = LossConfig::default();
        let (b0, b1) = (beta_for_qf(q, &cfg).unwrap(), beta_for_qf(q + 1, &cfg).unwrap());
        prop_assert!(b1 <= b0);
        prop_assert!((cfg.kappa1..=cfg.kappa2).contains(&b0));
    }

    #[test]
    fn losses_stay_in_their_ranges(x in unit_plane(8, 8), y in unit_plane(8, 8)) {
        let s = ssim_loss(&x, &y, &SsimConfig::default()).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        let d = distance_loss(&x, &y).unwrap();
        prop_assert!((-1.0..=0.0).contains(&d));
        let c = content_loss(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(gradient_difference_loss(&x, &y).unwrap() >= 0.0);
    }

    #[test]
    fn gradient_difference_ignores_constant_shifts(x in unit_plane(6, 6), c in -1.0..1.0f64) {
        let shifted = x.map(|v| v + c);
        prop_assert!(gradient_difference_loss(&x, &shifted).unwrap() < 1e-12);
    }

    #[test]
    fn description_objective_decreases_with_beta(
        a in unit_plane(4, 4),
        b in unit_plane(4, 4),
        t in unit_plane(8, 8),
        beta in 0.0..0.1f64,
        extra in 1e-3..0.1f64,
    ) {
        prop_assume!(a != b);
        let cfg = LossConfig { ssim: SsimConfig { window: 4, ..Default::default() }, ..Default::default() };
        let lo = mdgn_loss_grad_with_beta(&a, &b, &t, beta, &cfg).unwrap().0;
        let hi = mdgn_loss_grad_with_beta(&a, &b, &t, beta + extra, &cfg).unwrap().0;
        prop_assert!(hi.total() < lo.total());
        let sum: f64 = hi.terms().iter().map(|(_, v)| v).sum();
        prop_assert!((hi.total() - sum).abs() <= 1e-9 * sum.abs().max(1e-12));
    }
}
