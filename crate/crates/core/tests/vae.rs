mod common;

use std::ops::ControlFlow;

use motionkit::io::{generate_synthetic, SyntheticKind, SyntheticParams};
use motionkit::motion_vae::{reconstruct_sequence, train_with_progress, VaeConfig, VaeModel};
use motionkit::rotations::sixd_decode;
use motionkit::skeleton::default_skeleton;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn desk(window: usize) -> VaeConfig {
    VaeConfig {
        window,
        input_dim: 144,
        latent_dim: 32,
        encoder_hidden: 64,
        decoder_hidden: 64,
        mlp_hidden: [64, 64],
        kl_weight: 0.0,
        learning_rate: 2e-3,
        epochs: 2000,
        batch_size: 1,
        rng_seed: 5,
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Overfits one constant-pose window, then checks decoded rows are valid
/// rotations and logs an empirical Lipschitz estimate of `decode` in `z`.
#[test]
fn constant_pose_overfit_and_trained_decoder_sweeps() {
    let params = SyntheticParams { frames: 30, ..Default::default() };
    let seq = generate_synthetic(SyntheticKind::Constant, &params, 3).unwrap();
    let data = vec![seq.sixd_rows().unwrap()];
    let mut model = VaeModel::<f64>::new(desk(30)).unwrap();
    let mut reached = None;
    train_with_progress(&mut model, &data, |e, _| {
        if e.recon < 1e-4 {
            reached = Some(e.step);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .unwrap();
    let steps = reached.expect("reconstruction MSE below 1e-4 within 2000 steps");
    assert!(steps <= 2000);

    let skel = default_skeleton::<f64>();
    let rec = reconstruct_sequence(&model, &seq).unwrap();
    rec.validate().unwrap();
    assert!(common::fk_mpjpe(&skel, &rec, &seq) < 20.0);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lipschitz: f64 = 0.0;
    for _ in 0..20 {
        let z = normal_vec(&mut rng, 32);
        let out = model.decode(&z, 30).unwrap();
        for row in out.chunks(6) {
            let m = sixd_decode(&<[f64; 6]>::try_from(row).unwrap()).unwrap();
            let mut mtm_err: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| m.0[k][i] * m.0[k][j]).sum();
                    mtm_err = mtm_err.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            assert!(mtm_err < 1e-12 && (m.det() - 1.0).abs() < 1e-12);
        }
        for delta in [1e-3, 1e-1] {
            let dir = normal_vec(&mut rng, 32);
            let scale = delta / norm(&dir);
            let z2: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + d * scale).collect();
            let out2 = model.decode(&z2, 30).unwrap();
            let diff: Vec<f64> = out.iter().zip(&out2).map(|(a, b)| a - b).collect();
            lipschitz = lipschitz.max(norm(&diff) / delta);
        }
    }
    assert!(lipschitz.is_finite());
    eprintln!("constant pose reached MSE < 1e-4 after {steps} steps; decode Lipschitz estimate {lipschitz:.3}");
}

#[test]
fn model_file_round_trip_preserves_reconstruction() {
    let mut cfg = desk(10);
    cfg.input_dim = 24 * 6;
    let model = VaeModel::<f64>::new(cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mvk");
    model.save(&path).unwrap();
    let back = VaeModel::<f64>::load(&path).unwrap();
    assert!(model.params.iter().zip(&back.params).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(model.config, back.config);
    let seq = generate_synthetic(SyntheticKind::MultiJointSine, &SyntheticParams { frames: 25, ..Default::default() }, 0).unwrap();
    assert_eq!(reconstruct_sequence(&model, &seq).unwrap(), reconstruct_sequence(&back, &seq).unwrap());
}
