//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (written straight to stdout so it shows up without `--nocapture`).

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use mdc_core::evaluation::*;
use mdc_core::imaging::*;
use mdc_core::losses::*;
use mdc_core::networks::*;
use mdc_core::synth::{synthetic_corpus, synthetic_scene};
use mdc_core::training::*;
use mdc_core::{bits_per_pixel, encode, CodecConfig, ImageTensor, LossConfig, Plane, SsimConfig};
use rand::Rng;

/// Criteria that do not hold at desk scale; they still print FAIL.
const KNOWN_GAPS: &[&str] = &[];

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<Outcome>, name: &'static str, passed: bool, detail: String) {
    let line = format!("acceptance {} {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    results.push(Outcome { name, passed, detail });
}

fn loss_gradients() -> (bool, String) {
    let t = Instant::now();
    let h = 1e-4;
    let mut rng = rng(1001);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..20 {
        let x = random_plane(&mut rng, 8, 8);
        let y = random_plane(&mut rng, 8, 8);
        let kink = |k: usize| (x.data()[k] - y.data()[k]).abs() < 2.0 * h;
        let mut check = |analytic: &Plane, f: &dyn Fn(&Plane) -> f64, skip: &dyn Fn(usize) -> bool| {
            for k in 0..x.len() {
                if skip(k) {
                    skipped += 1;
                    continue;
                }
                worst = worst.max(relative_error(analytic.data()[k], central_difference(&x, k, h, f)));
            }
        };
        for window in [8, 4] {
            let cfg = SsimConfig {
                window,
                ..Default::default()
            };
            check(
                &ssim_loss_grad(&x, &y, &cfg).unwrap().1,
                &|p| ssim_loss(p, &y, &cfg).unwrap(),
                &|_| false,
            );
        }
        check(
            &distance_loss_grad(&x, &y).unwrap().1,
            &|p| distance_loss(p, &y).unwrap(),
            &kink,
        );
        check(
            &content_loss_grad(&x, &y).unwrap().1,
            &|p| content_loss(p, &y).unwrap(),
            &kink,
        );
        // a pixel sits on a kink when any neighbour difference of the residual is ~0
        let r: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| a - b).collect();
        let gd_kink = |k: usize| {
            let (i, j) = ((k / 8) as isize, (k % 8) as isize);
            (-1..=1).any(|di| {
                (-1..=1).any(|dj| {
                    let (ni, nj) = (i + di, j + dj);
                    (di, dj) != (0, 0)
                        && (0..8).contains(&ni)
                        && (0..8).contains(&nj)
                        && (r[k] - r[(ni * 8 + nj) as usize]).abs() < 2.0 * h
                })
            })
        };
        check(
            &gradient_difference_loss_grad(&x, &y).unwrap().1,
            &|p| gradient_difference_loss(p, &y).unwrap(),
            &gd_kink,
        );
    }
    let secs = t.elapsed().as_secs_f64();
    (
        worst <= 1e-3 && secs < 60.0,
        format!("worst relative error {worst:.2e} (limit 1e-3), {skipped} kink pixels skipped, {secs:.2}s"),
    )
}

fn ssim_oracle() -> (bool, String) {
    let mut rng = rng(1002);
    let cfg = SsimConfig::default();
    let mut worst: f64 = 0.0;
    let mut identity = true;
    for _ in 0..10 {
        let x = random_plane(&mut rng, 16, 16);
        let y = random_plane(&mut rng, 16, 16);
        let d = ssim(&x, &y, &cfg).unwrap() - brute_force_ssim(&x, &y, cfg.window, cfg.c1, cfg.c2);
        worst = worst.max(d.abs());
        identity &= ssim(&x, &x, &cfg).unwrap() == 1.0;
    }
    (
        worst <= 1e-6 && identity,
        format!("max |module - brute force| {worst:.2e} (limit 1e-6), ssim(X,X)==1: {identity}"),
    )
}

fn shapes_and_sharing() -> (bool, String) {
    let mut rng = rng(1003);
    let bundle = init_params_with_width(7, 4);
    let mut ok = true;
    for m in [16, 32, 160] {
        for n in [16, 32, 160] {
            let image = random_image(&mut rng, m, n);
            let pair = mdgn_forward(&image, &bundle.omega).unwrap();
            ok &= pair.dims() == (m / 2, n / 2);
            ok &= srn_forward(&pair.a, &bundle.alpha[0]).unwrap().dims() == (m, n);
            ok &= srn_forward(&pair.b, &bundle.alpha[1]).unwrap().dims() == (m, n);
            ok &= crn_forward(&pair.a, &pair.b, &bundle.alpha[2]).unwrap().dims() == (m, n);
            ok &= mdvcn_forward_side(&pair.a, &bundle.theta[0]).unwrap().dims() == (m, n);
            ok &= mdvcn_forward_side(&pair.b, &bundle.theta[1]).unwrap().dims() == (m, n);
            ok &= mdvcn_forward_central(&pair.a, &pair.b, &bundle.theta[2])
                .unwrap()
                .dims()
                == (m, n);
        }
    }
    let image = random_plane(&mut rng, 32, 32);
    let (a0, b0) = generator_infer(&bundle.omega, &image).unwrap();
    let perturb = |layer: usize| {
        let mut omega = bundle.omega.clone();
        omega.layers[layer].weight[0] += 0.5;
        omega.layers[layer].bias[0] += 0.5;
        generator_infer(&omega, &image).unwrap()
    };
    let (a, b) = perturb(0);
    let shared = a != a0 && b != b0;
    let (a, b) = perturb(5);
    let branch = a != a0 && b == b0;
    (
        ok && shared && branch,
        format!("shapes for M,N in {{16,32,160}}: {ok}; extractor changes both: {shared}; branch A changes only A: {branch}"),
    )
}

fn polyphase_suite() -> (bool, String) {
    let mut rng = rng(1004);
    let mut exact = true;
    for _ in 0..50 {
        let (h, w) = (2 * rng.random_range(1..20), 2 * rng.random_range(1..20));
        let image = random_image(&mut rng, h, w);
        let (embedded, mask) = polyphase_embed(&polyphase_split(&image).unwrap()).unwrap();
        for i in 0..h {
            for j in 0..w {
                if mask.is_filled(i, j) {
                    exact &= embedded.get(i, j) == image.get(i, j);
                }
            }
        }
    }
    let mut additive = true;
    for qf in [2, 6, 10, 20, 40] {
        let codec = CodecConfig::new(qf).unwrap();
        let a = encode(&random_image(&mut rng, 16, 16), &codec).unwrap();
        let b = encode(&random_image(&mut rng, 16, 16), &codec).unwrap();
        let (sa, sb) = (
            bits_per_pixel(&[&a], 32, 32).unwrap(),
            bits_per_pixel(&[&b], 32, 32).unwrap(),
        );
        additive &= bits_per_pixel(&[&a, &b], 32, 32).unwrap() == sa + sb;
        additive &= sa == a.bits() as f64 / 1024.0;
    }
    (
        exact && additive,
        format!("embed(split) exact on 50 images: {exact}; bpp additive: {additive}"),
    )
}

fn beta_schedule() -> (bool, String) {
    let cfg = LossConfig::default();
    let expected = [
        (2, 0.05),
        (6, 0.2 / 6.0),
        (10, 0.02),
        (20, 0.01),
        (40, 0.005),
        (100, 0.005),
    ];
    let worst = expected
        .iter()
        .map(|&(q, b)| (beta_for_qf(q, &cfg).unwrap() - b).abs())
        .fold(0.0, f64::max);
    (
        worst <= 1e-12,
        format!("max deviation {worst:.1e} over QF 2,6,10,20,40,100"),
    )
}

fn lr_schedule() -> (bool, String) {
    let got = [0, 59, 60, 79, 80, 99].map(|s| lr_at_step(s, 100, 1e-4));
    let ok = got == [1e-4, 1e-4, 5e-5, 5e-5, 2.5e-5, 2.5e-5];
    (ok, format!("steps 0/59/60/79/80/99 of 100 -> {got:?}"))
}

struct ToyRun {
    a: (bool, String),
    b: (bool, String),
    c: (bool, String),
    d: (bool, String),
}

fn toy_alternating() -> ToyRun {
    let t = Instant::now();
    let sources = synthetic_corpus(10, 96, 96, 500);
    let patches = prepare_patches(
        &sources,
        &PatchConfig {
            patch_size: 64,
            total: 50,
            augmentations: Augmentations::ALL,
            seed: 5,
        },
    )
    .unwrap()
    .images();
    let held_out = synthetic_scene(64, 64, 999);
    let cfg = TrainingConfig {
        iterations: 2,
        epochs_p: 2,
        epochs_q: 2,
        batch: 1,
        lr0: 1e-3,
        qf: 10,
        seed: 1,
        width: 16,
        ..Default::default()
    };
    let trained = train_algorithm1(&patches, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let log = &trained.log;

    let first = log.phases_named("mdrn").next().unwrap();
    let last = log.phases_named("mdrn_final").next().unwrap();
    let a = (
        last.end_loss < 0.7 * first.start_loss && secs < 900.0,
        format!(
            "reconstruction loss {:.4} -> {:.4} (ratio {:.3}, limit 0.7), {} steps in {secs:.0}s",
            first.start_loss,
            last.end_loss,
            last.end_loss / first.start_loss,
            log.records.len()
        ),
    );

    let mimicry = log.phases_named("mdvcn").next().unwrap();
    let b = (
        mimicry.end_loss <= 0.5 * mimicry.start_loss,
        format!(
            "mimicry loss {:.4} -> {:.4} in its first phase (ratio {:.3}, limit 0.5)",
            mimicry.start_loss,
            mimicry.end_loss,
            mimicry.end_loss / mimicry.start_loss
        ),
    );

    let codec = CodecConfig::new(cfg.qf).unwrap();
    let describer = LearnedDescriptions(&trained.bundle.omega);
    let (_, [sa, sb, central]) = reconstruct_all_views(
        &describer,
        &LearnedReconstruction(&trained.bundle.alpha),
        &held_out,
        &codec,
    )
    .unwrap();
    let (_, [ba, bb, _]) = reconstruct_all_views(&describer, &Bilinear, &held_out, &codec).unwrap();
    let q = |r: &ImageTensor| psnr(&held_out, r).unwrap();
    let side = (q(&sa) + q(&sb)) / 2.0;
    let bilinear = (q(&ba) + q(&bb)) / 2.0;
    let c = (
        side >= bilinear + 0.3,
        format!(
            "held-out side PSNR {side:.2} dB (A {:.2}, B {:.2}) vs bilinear {bilinear:.2} dB (A {:.2}, B {:.2}); needs +0.3 dB",
            q(&sa),
            q(&sb),
            q(&ba),
            q(&bb)
        ),
    );
    let d = (
        q(&central) >= side,
        format!("held-out central PSNR {:.2} dB vs mean side {side:.2} dB", q(&central)),
    );
    ToyRun { a, b, c, d }
}

fn distance_effect() -> (bool, String) {
    let sources = synthetic_corpus(8, 48, 48, 31);
    let patches = prepare_patches(
        &sources,
        &PatchConfig {
            patch_size: 32,
            total: 16,
            augmentations: Augmentations::ALL,
            seed: 2,
        },
    )
    .unwrap()
    .images();
    let spread = |weight: f64| {
        let cfg = TrainingConfig {
            iterations: 1,
            epochs_q: 100,
            batch: 1,
            lr0: 1e-3,
            width: 8,
            seed: 3,
            distance_weight: Some(weight),
            ..Default::default()
        };
        let omega = train_descriptions(&patches, &cfg).unwrap().bundle.omega;
        patches
            .iter()
            .map(|p| mdgn_forward(p, &omega).unwrap().mean_abs_difference())
            .sum::<f64>()
            / patches.len() as f64
    };
    let (without, with) = (spread(0.0), spread(0.05));
    (
        with > without,
        format!("mean |A-B| {without:.5} with weight 0, {with:.5} with weight 0.05"),
    )
}

fn gradient_substitution() -> (bool, String) {
    let mut bundle = init_params_with_width(5, 16);
    let image = synthetic_scene(16, 16, 3).plane().clone();
    let cfg = LossConfig::default();
    let beta = 0.02;
    let lossless = generator_infer(&bundle.omega, &image).unwrap();

    // Mimicry data: the lossless descriptions and small perturbations of
    // them, with the frozen reconstruction networks' outputs as targets.
    let mut rng = rng(9);
    let mut inputs = vec![lossless.clone()];
    for _ in 0..16 {
        let mut p = lossless.clone();
        for v in p.0.data_mut().iter_mut().chain(p.1.data_mut().iter_mut()) {
            *v += 0.05 * (rng.random::<f64>() - 0.5);
        }
        inputs.push(p);
    }
    let targets: Vec<[Plane; 3]> = inputs.iter().map(|p| reconstruct(&bundle.alpha, p).unwrap()).collect();

    let reference = flatten(
        &generator_gradient(&bundle, &image, beta, &cfg, ReconstructionPath::Lossless)
            .unwrap()
            .1,
    );
    let relative = |b: &ModelBundle| {
        let g = flatten(
            &generator_gradient(b, &image, beta, &cfg, ReconstructionPath::Virtual)
                .unwrap()
                .1,
        );
        l2_diff(&g, &reference) / l2(&reference)
    };

    // start from the reconstruction weights with 5% multiplicative noise
    for k in 0..3 {
        bundle.theta[k].layers = bundle.alpha[k].layers.clone();
        for layer in bundle.theta[k].layers.iter_mut() {
            for w in layer.weight.iter_mut() {
                *w *= 1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
    let initial = relative(&bundle);
    let steps = 400;
    let mut opts: Vec<Optimizer> = (0..3)
        .map(|k| Optimizer::new(&bundle.theta[k], AdamConfig::default(), 1e-4, steps))
        .collect();
    for _ in 0..steps {
        let mut total: Option<[Grads; 3]> = None;
        for (input, target) in inputs.iter().zip(&targets) {
            let (_, g) = mdvcn_gradient(&bundle.theta, input, target).unwrap();
            match total.as_mut() {
                None => total = Some(g),
                Some(acc) => {
                    for k in 0..3 {
                        acc[k].iter_mut().zip(&g[k]).for_each(|(a, b)| a.add_assign(b));
                    }
                }
            }
        }
        let total = total.unwrap();
        for k in 0..3 {
            opts[k].apply(&mut bundle.theta[k], &total[k]);
        }
    }
    let mimicry = eval_mdvcn(&bundle.theta, std::slice::from_ref(&lossless), &targets[..1]).unwrap();
    let fin = relative(&bundle);
    (
        fin <= 0.05,
        format!("relative gradient error {initial:.4} -> {fin:.4} after {steps} mimicry steps (mimicry loss {mimicry:.2e}, limit 0.05)"),
    )
}

fn channels() -> (bool, String) {
    let quality = DecoderQuality {
        side_a: (27.3, 0.80),
        side_b: (26.1, 0.78),
        central: (31.4, 0.84),
    };
    let mut worst: f64 = 0.0;
    for (pa, pb) in [(0.1, 0.1), (0.5, 0.5), (0.3, 0.7), (0.05, 0.9)] {
        let mc = monte_carlo(
            &quality,
            &ChannelScenario {
                p_loss_a: pa,
                p_loss_b: pb,
                trials: 100_000,
                seed: 11,
            },
        )
        .unwrap();
        let exact = enumerate_outcomes(&quality, pa, pb).unwrap();
        worst = worst.max((mc.expected_psnr.unwrap() - exact.expected_psnr.unwrap()).abs());
    }
    let run = |pa, pb| {
        monte_carlo(
            &quality,
            &ChannelScenario {
                p_loss_a: pa,
                p_loss_b: pb,
                trials: 1000,
                seed: 2,
            },
        )
        .unwrap()
    };
    let degenerate = run(0.0, 0.0).expected_psnr == Some(31.4)
        && run(1.0, 0.0).expected_psnr == Some(26.1)
        && run(0.0, 1.0).expected_psnr == Some(27.3)
        && run(1.0, 1.0).expected_psnr.is_none()
        && run(1.0, 1.0).outage == 1.0;
    (
        worst <= 0.05 && degenerate,
        format!("max |Monte-Carlo - enumeration| {worst:.4} dB at 1e5 trials (limit 0.05); p in {{0,1}} exact: {degenerate}"),
    )
}

fn toy_pipeline_csv() -> String {
    let sources = synthetic_corpus(4, 48, 48, 70);
    let patches = prepare_patches(
        &sources,
        &PatchConfig {
            patch_size: 32,
            total: 8,
            augmentations: Augmentations::ALL,
            seed: 1,
        },
    )
    .unwrap()
    .images();
    let cfg = TrainingConfig {
        iterations: 1,
        epochs_p: 1,
        epochs_q: 1,
        batch: 2,
        width: 8,
        seed: 4,
        ..Default::default()
    };
    let bundle = train_algorithm1(&patches, &cfg).unwrap().bundle;
    let test = synthetic_corpus(2, 32, 32, 80);
    let mut rows = evaluate_model(&bundle, &test, &PROPOSED_QFS).unwrap().rows();
    rows.extend(evaluate_ours_base(&bundle, &test, &PROPOSED_QFS).unwrap().rows());
    rows.extend(
        evaluate_pipeline(
            "bilinear",
            &Polyphase,
            &Bilinear,
            &test,
            &BASELINE_QFS,
            &SsimConfig::default(),
        )
        .unwrap()
        .rows(),
    );
    rd_csv(&rows).unwrap()
}

fn determinism() -> (bool, String) {
    let (first, second) = (toy_pipeline_csv(), toy_pipeline_csv());
    (
        first == second,
        format!(
            "two seeded train+evaluate runs: {} bytes, identical: {}",
            first.len(),
            first == second
        ),
    )
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let (p, d) = loss_gradients();
    report(&mut results, "loss-gradient suite", p, d);
    let (p, d) = ssim_oracle();
    report(&mut results, "ssim oracle", p, d);
    let (p, d) = shapes_and_sharing();
    report(&mut results, "shape/architecture suite", p, d);
    let (p, d) = polyphase_suite();
    report(&mut results, "poly-phase suite", p, d);
    let (p, d) = beta_schedule();
    report(&mut results, "beta schedule", p, d);
    let (p, d) = lr_schedule();
    report(&mut results, "lr schedule", p, d);
    let toy = toy_alternating();
    report(&mut results, "toy-alg1 (a)", toy.a.0, toy.a.1);
    report(&mut results, "toy-alg1 (b)", toy.b.0, toy.b.1);
    report(&mut results, "toy-alg1 (c)", toy.c.0, toy.c.1);
    report(&mut results, "toy-alg1 (d)", toy.d.0, toy.d.1);
    let (p, d) = distance_effect();
    report(&mut results, "distance-loss effect", p, d);
    let (p, d) = gradient_substitution();
    report(&mut results, "gradient substitution", p, d);
    let (p, d) = channels();
    report(&mut results, "channel simulator", p, d);
    let (p, d) = determinism();
    report(&mut results, "end-to-end determinism", p, d);

    let unexpected: Vec<String> = results
        .iter()
        .filter(|r| !r.passed && !KNOWN_GAPS.contains(&r.name))
        .map(|r| format!("{}: {}", r.name, r.detail))
        .collect();
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:#?}");
}
