use mvga_core::data::ClassWeights;
use mvga_core::model::{
    attention_pool, encoder_forward, forward_batch, head_forward, init_params, loss, predict,
    AttentionPool, EncoderConfig, JointHead, LossConfig, Mode, ModelConfig, ParameterStore, Phase,
    Sample, HEAD_BIAS, HEAD_WEIGHT,
};
use mvga_core::ViewStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            in_channels: 2,
            stage_channels: vec![3, 4],
            internal_dropout_p: 0.0,
        },
        class_count: 5,
    }
}

fn random_stack(rng: &mut ChaCha8Rng, views: usize, channels: usize, size: usize) -> ViewStack {
    let data = (0..views * channels * size * size)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    ViewStack::new(views, channels, size, data).unwrap()
}

fn batch_loss(
    store: &ParameterStore,
    cfg: &ModelConfig,
    batch: &[Sample],
    loss_cfg: &LossConfig,
) -> f64 {
    forward_batch(store, cfg, batch, Phase::Eval)
        .unwrap()
        .loss(loss_cfg)
}

/// Every parameter drawn from U(−0.5, 0.5) so that views produce distinct
/// features and attention scores carry usable gradient signal.
fn well_conditioned_params(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ParameterStore {
    let mut store = init_params(cfg, 0).unwrap();
    for p in store.params_mut() {
        p.value
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    store
}

#[test]
fn finite_difference_gradient_check() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut store = well_conditioned_params(&cfg, &mut rng);
    assert!(store.num_scalars() <= 2000);

    let stacks: Vec<ViewStack> = (0..3).map(|_| random_stack(&mut rng, 3, 2, 16)).collect();
    // labels one noise draw away from the current outputs keep the loss
    // O(1), so the central difference is not swamped by cancellation
    let labels: Vec<f64> = stacks
        .iter()
        .map(|s| predict(&store, &cfg, s).unwrap().ga_pred + rng.gen_range(-1.0..1.0))
        .collect();
    let batch: Vec<Sample> = stacks
        .iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (s, &ga))| Sample {
            stack: s,
            ga_weeks: ga,
            class: i,
            index: i as u64,
        })
        .collect();
    let loss_cfg = LossConfig::new(
        0.7,
        ClassWeights::from_weights(vec![1.2, 0.8, 1.5, 0.5, 1.0]).unwrap(),
    )
    .unwrap();

    let fwd = forward_batch(&store, &cfg, &batch, Phase::Eval).unwrap();
    let grads = fwd.backward(&store, &cfg, &loss_cfg).unwrap();

    let h = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let pi = rng.gen_range(0..store.len());
        let k = rng.gen_range(0..store.params()[pi].len());
        let orig = store.params()[pi].value[k];
        store.params_mut()[pi].value[k] = orig + h;
        let up = batch_loss(&store, &cfg, &batch, &loss_cfg);
        store.params_mut()[pi].value[k] = orig - h;
        let down = batch_loss(&store, &cfg, &batch, &loss_cfg);
        store.params_mut()[pi].value[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.buffers[pi][k];
        let scale = numeric.abs().max(analytic.abs());
        // both at noise level: a structurally zero gradient (the score bias
        // cancels in the softmax)
        let rel = if scale < 1e-10 {
            0.0
        } else {
            (numeric - analytic).abs() / scale
        };
        worst = worst.max(rel);
        assert!(
            rel < 1e-5,
            "{}[{k}]: analytic {analytic} numeric {numeric} rel {rel}",
            store.params()[pi].name
        );
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn zero_lambda_disconnects_logit_rows() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let store = init_params(&cfg, 1).unwrap();
    let stack = random_stack(&mut rng, 2, 2, 16);
    let batch = [Sample {
        stack: &stack,
        ga_weeks: 30.0,
        class: 2,
        index: 0,
    }];
    let loss_cfg = LossConfig::new(0.0, ClassWeights::uniform(5)).unwrap();
    let g = forward_batch(&store, &cfg, &batch, Phase::Eval)
        .unwrap()
        .backward(&store, &cfg, &loss_cfg)
        .unwrap();
    let f = cfg.encoder.feature_dim();
    let hw = store.index_of(HEAD_WEIGHT).unwrap();
    let hb = store.index_of(HEAD_BIAS).unwrap();
    assert!(g.buffers[hw][f..].iter().all(|&v| v == 0.0));
    assert!(g.buffers[hb][1..].iter().all(|&v| v == 0.0));
    assert!(g.buffers[hb][0] != 0.0);
}

#[test]
fn duplicated_sample_doubles_its_contribution() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let store = init_params(&cfg, 2).unwrap();
    let a = random_stack(&mut rng, 2, 2, 16);
    let b = random_stack(&mut rng, 2, 2, 16);
    let sa = Sample {
        stack: &a,
        ga_weeks: 28.0,
        class: 1,
        index: 0,
    };
    let sb = Sample {
        stack: &b,
        ga_weeks: 41.0,
        class: 4,
        index: 1,
    };
    let loss_cfg = LossConfig::new(1.0, ClassWeights::uniform(5)).unwrap();
    let grad = |batch: &[Sample]| {
        forward_batch(&store, &cfg, batch, Phase::Eval)
            .unwrap()
            .backward(&store, &cfg, &loss_cfg)
            .unwrap()
    };
    let ga = grad(&[sa]);
    let gb = grad(&[sb]);
    let gaab = grad(&[sa, sa, sb]);
    for ((x, y), z) in gaab
        .buffers
        .iter()
        .flatten()
        .zip(ga.buffers.iter().flatten())
        .zip(gb.buffers.iter().flatten())
    {
        let expected = (2.0 * y + z) / 3.0;
        assert!(
            (x - expected).abs() <= 1e-12 * (1.0 + expected.abs()),
            "{x} vs {expected}"
        );
    }
}

#[test]
fn backward_rejects_changed_parameters() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = init_params(&cfg, 2).unwrap();
    let a = random_stack(&mut rng, 2, 2, 16);
    let batch = [Sample {
        stack: &a,
        ga_weeks: 30.0,
        class: 1,
        index: 0,
    }];
    let fwd = forward_batch(&store, &cfg, &batch, Phase::Eval).unwrap();
    store.params_mut()[0].value[0] += 1.0;
    let loss_cfg = LossConfig::new(1.0, ClassWeights::uniform(5)).unwrap();
    assert!(fwd.backward(&store, &cfg, &loss_cfg).is_err());
}

#[test]
fn encoder_default_shape() {
    let cfg = EncoderConfig::default();
    let mcfg = ModelConfig::default();
    let store = init_params(&mcfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stack = random_stack(&mut rng, 12, 4, 224);
    let f = encoder_forward(&stack, &cfg, &store, Mode::Eval).unwrap();
    assert_eq!(f.len(), 12 * 128);
}

#[test]
fn zero_network_gives_zero_features() {
    let cfg = tiny_config();
    let store = mvga_core::model::empty_params(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stack = random_stack(&mut rng, 3, 2, 16);
    let f = encoder_forward(&stack, &cfg.encoder, &store, Mode::Eval).unwrap();
    assert!(f.iter().all(|&v| v == 0.0));
}

#[test]
fn shared_weights_and_view_independence() {
    let cfg = tiny_config();
    let store = init_params(&cfg, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stack = random_stack(&mut rng, 3, 2, 16);
    let n = stack.view_len();
    let first = stack.view(0).to_vec();
    stack.view_mut(2).copy_from_slice(&first);
    let f = encoder_forward(&stack, &cfg.encoder, &store, Mode::Eval).unwrap();
    let dim = cfg.encoder.feature_dim();
    for j in 0..dim {
        assert!((f[j] - f[2 * dim + j]).abs() < 1e-6);
    }
    // zeroing view 1 leaves rows 0 and 2 untouched
    stack.view_mut(1).copy_from_slice(&vec![0.0; n]);
    let g = encoder_forward(&stack, &cfg.encoder, &store, Mode::Eval).unwrap();
    assert_eq!(&f[..dim], &g[..dim]);
    assert_eq!(&f[2 * dim..], &g[2 * dim..]);
}

#[test]
fn encoder_rejects_wrong_channels() {
    let cfg = tiny_config();
    let store = init_params(&cfg, 4).unwrap();
    let stack = ViewStack::zeros(2, 3, 16);
    assert!(encoder_forward(&stack, &cfg.encoder, &store, Mode::Eval).is_err());
    let small = ViewStack::zeros(2, 2, 8);
    assert!(encoder_forward(&small, &cfg.encoder, &store, Mode::Eval).is_err());
}

#[test]
fn eval_is_deterministic_and_pure() {
    let cfg = tiny_config();
    let store = init_params(&cfg, 4).unwrap();
    let before = store.fingerprint();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stack = random_stack(&mut rng, 3, 2, 16);
    let a = predict(&store, &cfg, &stack).unwrap();
    let b = predict(&store, &cfg, &stack).unwrap();
    assert_eq!(a, b);
    assert_eq!(store.fingerprint(), before);
}

#[test]
fn internal_dropout_only_in_train_mode() {
    let mut cfg = tiny_config();
    cfg.encoder.internal_dropout_p = 0.5;
    let store = init_params(&cfg, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stack = random_stack(&mut rng, 4, 2, 16);
    let eval = encoder_forward(&stack, &cfg.encoder, &store, Mode::Eval).unwrap();
    let train_mode = Mode::Train {
        seed: 1,
        sample_index: 0,
        epoch: 0,
    };
    let train = encoder_forward(&stack, &cfg.encoder, &store, train_mode).unwrap();
    assert_eq!(
        train,
        encoder_forward(&stack, &cfg.encoder, &store, train_mode).unwrap()
    );
    for (e, t) in eval.iter().zip(&train) {
        assert!(*t == 0.0 || (t - 2.0 * e).abs() < 1e-12);
    }
}

#[test]
fn dropout_gradient_check() {
    let mut cfg = tiny_config();
    cfg.encoder.internal_dropout_p = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut store = well_conditioned_params(&cfg, &mut rng);
    let stack = random_stack(&mut rng, 3, 2, 16);
    let batch = [Sample {
        stack: &stack,
        ga_weeks: 0.5,
        class: 2,
        index: 4,
    }];
    let phase = Phase::Train { seed: 3, epoch: 1 };
    let loss_cfg = LossConfig::new(1.0, ClassWeights::uniform(5)).unwrap();
    let grads = forward_batch(&store, &cfg, &batch, phase)
        .unwrap()
        .backward(&store, &cfg, &loss_cfg)
        .unwrap();
    let h = 1e-4;
    for _ in 0..15 {
        let pi = rng.gen_range(0..store.len());
        let k = rng.gen_range(0..store.params()[pi].len());
        let orig = store.params()[pi].value[k];
        let mut eval_at = |v: f64| {
            store.params_mut()[pi].value[k] = v;
            forward_batch(&store, &cfg, &batch, phase)
                .unwrap()
                .loss(&loss_cfg)
        };
        let numeric = (eval_at(orig + h) - eval_at(orig - h)) / (2.0 * h);
        store.params_mut()[pi].value[k] = orig;
        let analytic = grads.buffers[pi][k];
        let scale = numeric.abs().max(analytic.abs());
        if scale > 1e-10 {
            assert!(
                (numeric - analytic).abs() / scale < 1e-5,
                "{analytic} vs {numeric}"
            );
        }
    }
}

#[test]
fn head_matches_matrix_vector_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = 7;
    let w: Vec<f64> = (0..6 * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..f).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let out = head_forward(
        &x,
        &JointHead {
            weight: &w,
            bias: &b,
        },
    )
    .unwrap();
    let mut oracle = b.clone();
    for r in 0..6 {
        for j in 0..f {
            oracle[r] += w[r * f + j] * x[j];
        }
    }
    assert!((out.ga_pred - oracle[0]).abs() < 1e-10);
    for k in 0..5 {
        assert!((out.logits[k] - oracle[k + 1]).abs() < 1e-10);
    }
}

#[test]
fn loss_is_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = LossConfig::new(1.0, ClassWeights::uniform(5)).unwrap();
    for _ in 0..1000 {
        let logits: Vec<f64> = (0..5).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let l = loss(
            rng.gen_range(20.0..45.0),
            &logits,
            rng.gen_range(20.0..45.0),
            rng.gen_range(0..5),
            &cfg,
        );
        assert!(l >= 0.0);
    }
}

#[test]
fn attention_weights_are_a_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let feats: Vec<f64> = (0..12 * 8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let out = attention_pool(
            &feats,
            8,
            &AttentionPool {
                score_weights: &w,
                score_bias: 0.3,
            },
        );
        assert!(out.weights.iter().all(|&x| x >= 0.0));
        assert!((out.weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
