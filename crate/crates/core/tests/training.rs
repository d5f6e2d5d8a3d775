mod common;

use common::*;
use mdc_core::networks::{init_params_with_width, load_checkpoint, save_checkpoint, ModelBundle};
use mdc_core::synth::synthetic_scene;
use mdc_core::training::*;
use mdc_core::{Error, ImageTensor, LossConfig};
use proptest::prelude::*;

fn patches(n: usize, size: usize) -> Vec<ImageTensor> {
    (0..n as u64).map(|k| synthetic_scene(size, size, 100 + k)).collect()
}

fn tiny() -> TrainingConfig {
    TrainingConfig {
        iterations: 1,
        epochs_p: 1,
        epochs_q: 1,
        joint_iterations: 1,
        epochs_l: 1,
        pretrain_epochs: 1,
        batch: 1,
        width: 4,
        lr0: 1e-3,
        ..Default::default()
    }
}

#[test]
fn learning_rate_boundaries() {
    let expected = [
        (0, 1e-4),
        (59, 1e-4),
        (60, 5e-5),
        (79, 5e-5),
        (80, 2.5e-5),
        (99, 2.5e-5),
    ];
    for (step, lr) in expected {
        assert_eq!(lr_at_step(step, 100, 1e-4), lr, "step {step}");
    }
    // 3/5 and 4/5 of 10 steps
    let rates: Vec<f64> = (0..10).map(|s| lr_at_step(s, 10, 1e-4)).collect();
    assert_eq!(rates, [1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 5e-5, 5e-5, 2.5e-5, 2.5e-5]);
}

proptest! {
    #[test]
    fn learning_rate_never_increases(total in 1usize..500, lr0 in 1e-6..1.0f64) {
        let mut last = f64::INFINITY;
        for step in 0..total {
            let lr = lr_at_step(step, total, lr0);
            prop_assert!(lr <= last);
            prop_assert!(lr == lr0 || lr == lr0 / 2.0 || lr == lr0 / 4.0);
            last = lr;
        }
    }
}

#[test]
fn minimal_alternating_run() {
    let trained = train_algorithm1(&patches(1, 16), &tiny()).unwrap();
    let phases: Vec<&str> = trained.log.phases.iter().map(|p| p.phase.as_str()).collect();
    assert_eq!(phases, ["mdrn", "mdvcn", "mdgn", "mdrn_final"]);
    trained.bundle.validate().unwrap();
    assert_eq!(trained.bundle.meta.qf, Some(10));
    assert_eq!(trained.bundle.meta.algorithm, Some(1));
    let steps: Vec<usize> = trained.log.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, (0..steps.len()).collect::<Vec<_>>());
}

#[test]
fn remainder_batches_are_dropped() {
    let cfg = TrainingConfig { batch: 2, ..tiny() };
    let trained = train_algorithm1(&patches(5, 16), &cfg).unwrap();
    // two batches per epoch in each of the four phases
    assert_eq!(trained.log.records.len(), 8);
    assert!(trained.log.phases.iter().all(|p| p.steps == 2));
}

#[test]
fn training_is_reproducible() {
    let data = patches(3, 16);
    let cfg = TrainingConfig { seed: 4, ..tiny() };
    let first = train_algorithm1(&data, &cfg).unwrap();
    let second = train_algorithm1(&data, &cfg).unwrap();
    assert_eq!(first.bundle, second.bundle);
    assert_eq!(first.log.to_jsonl(), second.log.to_jsonl());

    let first = train_algorithm2(&data, &cfg).unwrap();
    let second = train_algorithm2(&data, &cfg).unwrap();
    assert_eq!(first.bundle, second.bundle);
    assert_eq!(first.log.to_jsonl(), second.log.to_jsonl());
}

#[test]
fn minimal_joint_run() {
    let trained = train_algorithm2(&patches(2, 16), &tiny()).unwrap();
    let phases: Vec<&str> = trained.log.phases.iter().map(|p| p.phase.as_str()).collect();
    assert_eq!(phases, ["mdrn_warmup", "mdvcn_pretrain", "joint"]);
    let joint: Vec<&str> = trained
        .log
        .records
        .iter()
        .filter(|r| r.phase.starts_with("joint"))
        .map(|r| r.phase.as_str())
        .collect();
    assert_eq!(
        joint,
        [
            "joint_mdgn",
            "joint_mdrn",
            "joint_mdvcn",
            "joint_mdgn",
            "joint_mdrn",
            "joint_mdvcn"
        ]
    );
    trained.bundle.validate().unwrap();
    assert_eq!(trained.bundle.meta.algorithm, Some(2));
}

#[test]
fn poor_mimicry_is_reported() {
    let cfg = TrainingConfig {
        mimicry_warning: 0.0,
        ..tiny()
    };
    let trained = train_algorithm2(&patches(2, 16), &cfg).unwrap();
    assert!(!trained.log.warnings.is_empty());
    let quiet = train_algorithm2(
        &patches(2, 16),
        &TrainingConfig {
            mimicry_warning: 1e9,
            ..tiny()
        },
    )
    .unwrap();
    assert!(quiet.log.warnings.is_empty());
}

fn expect_divergence(result: mdc_core::Result<Trained>) -> (usize, Option<std::path::PathBuf>) {
    match result {
        Err(Error::Diverged { step, checkpoint, .. }) => (step, checkpoint),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("training did not diverge"),
    }
}

#[test]
fn huge_learning_rate_trips_the_guard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainingConfig {
        lr0: 10.0,
        batch: 2,
        epochs_p: 25,
        epochs_q: 25,
        epochs_l: 25,
        pretrain_epochs: 25,
        diagnostic_dir: Some(dir.path().to_path_buf()),
        ..tiny()
    };
    let data = patches(4, 16);
    for (name, result) in [
        ("alternating", train_algorithm1(&data, &cfg)),
        ("joint", train_algorithm2(&data, &cfg)),
    ] {
        let (step, checkpoint) = expect_divergence(result);
        assert!(step < 50, "{name}: diverged only at step {step}");
        let checkpoint = checkpoint.expect("diagnostic checkpoint written");
        load_checkpoint(&checkpoint).unwrap();
    }
}

#[test]
fn generator_gradient_ignores_the_codec_output() {
    let mut rng = rng(81);
    let cfg = LossConfig::default();
    let bundle = init_params_with_width(5, 4);
    let target = random_plane(&mut rng, 16, 16);
    let decoded = (random_plane(&mut rng, 8, 8), random_plane(&mut rng, 8, 8));
    let mut nudged = decoded.clone();
    nudged.0.data_mut()[3] += 0.1;
    nudged.1.data_mut()[7] -= 0.1;
    let g1 = joint_gradients(&bundle, &target, &decoded, 0.02, &cfg).unwrap();
    let g2 = joint_gradients(&bundle, &target, &nudged, 0.02, &cfg).unwrap();
    assert_eq!(g1.omega, g2.omega);
    assert_ne!(g1.alpha, g2.alpha);
}

#[test]
fn virtual_path_does_not_read_the_real_reconstruction() {
    let mut rng = rng(82);
    let cfg = LossConfig::default();
    let bundle = init_params_with_width(6, 4);
    let mut other = bundle.clone();
    other.alpha = init_params_with_width(60, 4).alpha;
    let target = random_plane(&mut rng, 16, 16);
    let virtual_grads =
        |b: &ModelBundle| generator_gradient(b, &target, 0.02, &cfg, ReconstructionPath::Virtual).unwrap();
    assert_eq!(virtual_grads(&bundle).1, virtual_grads(&other).1);
}

#[test]
fn identical_virtual_networks_reproduce_the_true_gradient() {
    let mut rng = rng(83);
    let cfg = LossConfig::default();
    let mut bundle = init_params_with_width(7, 4);
    for k in 0..3 {
        bundle.theta[k].layers = bundle.alpha[k].layers.clone();
    }
    let target = random_plane(&mut rng, 16, 16);
    let (lv, gv) = generator_gradient(&bundle, &target, 0.02, &cfg, ReconstructionPath::Virtual).unwrap();
    let (lt, gt) = generator_gradient(&bundle, &target, 0.02, &cfg, ReconstructionPath::Lossless).unwrap();
    assert_eq!(lv.total(), lt.total());
    assert_eq!(gv, gt);
}

#[test]
fn resuming_from_a_saved_bundle_matches_resuming_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let data = patches(2, 16);
    let cfg = tiny();
    let first = train_algorithm1(&data, &cfg).unwrap().bundle;
    let path = dir.path().join("first.ckpt");
    save_checkpoint(&first, &path).unwrap();
    let from_disk = train_algorithm1_from(load_checkpoint(&path).unwrap(), &data, &cfg).unwrap();
    let from_memory = train_algorithm1_from(first, &data, &cfg).unwrap();
    assert_eq!(from_disk.bundle, from_memory.bundle);
}

#[test]
fn configuration_is_validated() {
    let data = patches(2, 16);
    let too_big = TrainingConfig { batch: 3, ..tiny() };
    assert!(train_algorithm1(&data, &too_big).is_err());
    let no_epochs = TrainingConfig { epochs_p: 0, ..tiny() };
    assert!(train_algorithm1(&data, &no_epochs).is_err());
    let bad_rate = TrainingConfig { lr0: 0.0, ..tiny() };
    assert!(train_algorithm2(&data, &bad_rate).is_err());
    assert!(train_algorithm1(&[], &tiny()).is_err());
    let odd = vec![synthetic_scene(15, 16, 1)];
    assert!(train_algorithm1(&odd, &tiny()).is_err());
}
