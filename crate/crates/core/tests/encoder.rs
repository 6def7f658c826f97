use wavefm::encoder::*;
use wavefm::model::{encode_batch, Bound, ModelConfig, ParamStore};
use wavefm::numerics::rng::stream;
use wavefm::numerics::{grad_check, Tape, Tensor};

fn tiny() -> ModelConfig {
    ModelConfig {
        length: 16,
        patch_len: 4,
        stride: 4,
        d_model: 8,
        heads: 2,
        layers: 1,
        ff_dim: 16,
        dropout: 0.1,
        attn_dropout: 0.1,
        residual_dropout: 0.1,
        head_hidden: 5,
        finetune_head_hidden: 3,
    }
}

fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape, 1.0, &mut stream(seed, &[]))
}

fn scalar_attention(
    z: &Tensor<f64>,
    wq: &Tensor<f64>,
    wk: &Tensor<f64>,
    wv: &Tensor<f64>,
) -> Vec<Vec<f64>> {
    let n = z.rows();
    let dk = wq.cols();
    let proj = |w: &Tensor<f64>, i: usize, c: usize| {
        (0..z.cols()).map(|d| z.at(i, d) * w.at(d, c)).sum::<f64>()
    };
    let mut out = vec![vec![0.0; dk]; n];
    for i in 0..n {
        let scores: Vec<f64> = (0..n)
            .map(|j| {
                (0..dk)
                    .map(|c| proj(wq, i, c) * proj(wk, j, c))
                    .sum::<f64>()
                    / (dk as f64).sqrt()
            })
            .collect();
        let total: f64 = scores.iter().map(|s| s.exp()).sum();
        for j in 0..n {
            for c in 0..dk {
                out[i][c] += scores[j].exp() / total * proj(wv, j, c);
            }
        }
    }
    out
}

#[test]
fn single_token_attends_to_itself() {
    let z = randn(&[1, 4], 1);
    let (wq, wk, wv) = (randn(&[4, 2], 2), randn(&[4, 2], 3), randn(&[4, 2], 4));
    let (out, probs) = attention_head(&z, &wq, &wk, &wv).unwrap();
    assert_eq!(probs.data(), &[1.0]);
    let v = wavefm::numerics::ops::matmul(&z, &wv).unwrap();
    assert!(out.max_abs_diff(&v) < 1e-15);
}

#[test]
fn zero_queries_average_values() {
    let z = randn(&[5, 4], 1);
    let wv = randn(&[4, 3], 2);
    let (out, _) = attention_head(&z, &Tensor::zeros(&[4, 3]), &randn(&[4, 3], 3), &wv).unwrap();
    let v = wavefm::numerics::ops::matmul(&z, &wv).unwrap();
    for c in 0..3 {
        let mean = (0..5).map(|r| v.at(r, c)).sum::<f64>() / 5.0;
        for r in 0..5 {
            assert!((out.at(r, c) - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn hand_set_head_matches_scalar_oracle() {
    let z = Tensor::from_rows(&[&[1.0, 0.5], &[-0.5, 2.0]]).unwrap();
    let wq = Tensor::from_rows(&[&[1.0, 0.0], &[0.5, 1.0]]).unwrap();
    let wk = Tensor::from_rows(&[&[0.0, 1.0], &[1.0, -1.0]]).unwrap();
    let wv = Tensor::from_rows(&[&[2.0, 1.0], &[0.0, 3.0]]).unwrap();
    let (out, probs) = attention_head(&z, &wq, &wk, &wv).unwrap();
    let oracle = scalar_attention(&z, &wq, &wk, &wv);
    for i in 0..2 {
        assert!((probs.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..2 {
            assert!((out.at(i, c) - oracle[i][c]).abs() < 1e-6);
        }
    }
}

#[test]
fn attention_rows_sum_to_one() {
    for seed in 0..20 {
        let z = randn(&[7, 6], seed);
        let (_, probs) = attention_head(
            &z,
            &randn(&[6, 3], seed + 100),
            &randn(&[6, 3], seed + 200),
            &randn(&[6, 3], 1),
        )
        .unwrap();
        for r in 0..7 {
            assert!((probs.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(probs.row(r).iter().all(|&p| p >= 0.0));
        }
    }
}

fn eye(d: usize) -> Tensor<f64> {
    Tensor::new(
        &[d, d],
        (0..d * d)
            .map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 })
            .collect(),
    )
    .unwrap()
}

#[test]
fn one_head_with_identity_output_is_the_head() {
    let z = randn(&[4, 3], 1);
    let (wq, wk, wv) = (randn(&[3, 3], 2), randn(&[3, 3], 3), randn(&[3, 3], 4));
    let (head, _) = attention_head(&z, &wq, &wk, &wv).unwrap();
    assert!(
        multi_head(&z, &wq, &wk, &wv, &eye(3), 1)
            .unwrap()
            .max_abs_diff(&head)
            < 1e-15
    );
}

#[test]
fn zero_values_give_zero_output() {
    let z = randn(&[4, 4], 1);
    let out = multi_head(
        &z,
        &randn(&[4, 4], 2),
        &randn(&[4, 4], 3),
        &Tensor::zeros(&[4, 4]),
        &randn(&[4, 4], 4),
        2,
    )
    .unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn fused_tape_attention_matches_head_composition() {
    let (n, d, h) = (5, 8, 4);
    let z = randn(&[2 * n, d], 7);
    let (wq, wk, wv, wo) = (
        randn(&[d, d], 1),
        randn(&[d, d], 2),
        randn(&[d, d], 3),
        randn(&[d, d], 4),
    );
    let mut tape = Tape::new();
    let zv = tape.constant(&z);
    let w = [&wq, &wk, &wv].map(|t| tape.constant(t));
    let wqkv = tape.concat_cols(&w).unwrap();
    let qkv = tape.matmul(zv, wqkv).unwrap();
    let heads = tape.attention(qkv, h, n).unwrap();
    let wov = tape.constant(&wo);
    let out = tape.matmul(heads, wov).unwrap();
    let fused = tape.value(out);
    for g in 0..2 {
        let block = Tensor::new(&[n, d], z.data()[g * n * d..(g + 1) * n * d].to_vec()).unwrap();
        let oracle = multi_head(&block, &wq, &wk, &wv, &wo, h).unwrap();
        for i in 0..n {
            for c in 0..d {
                assert!((fused.at(g * n + i, c) - oracle.at(i, c)).abs() < 1e-6);
            }
        }
    }
}

fn layer_store(cfg: &ModelConfig, seed: u64) -> ParamStore<f64> {
    ParamStore::<f32>::init_backbone(cfg, seed).unwrap().cast()
}

/// Runs `encode_batch` in eval mode on `patches` (`groups·N × P`).
fn run(cfg: &ModelConfig, store: &ParamStore<f64>, patches: &Tensor<f64>) -> Tensor<f64> {
    let mut tape = Tape::new();
    let bound = Bound::new(&mut tape, store, |_| false);
    let out = encode_batch(&mut tape, &bound, cfg, patches.clone(), None, &mut None).unwrap();
    tape.value(out).clone()
}

#[test]
fn zero_weights_make_layers_the_identity() {
    let cfg = tiny();
    let mut store = layer_store(&cfg, 1);
    for (name, t) in store.iter_mut() {
        if name.starts_with("encoder.") {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let x = randn(&[8, 4], 3);
    let out = run(&cfg, &store, &x);
    let mut zero_layers = cfg;
    zero_layers.layers = 0;
    assert_eq!(out, run(&zero_layers, &store, &x));
}

#[test]
fn zero_layer_stack_is_the_identity() {
    let cfg = EncoderConfig {
        d_model: 4,
        heads: 2,
        layers: 0,
        ff_dim: 8,
        attn_dropout: 0.1,
        residual_dropout: 0.1,
    };
    let z = randn(&[6, 4], 1);
    let mut tape = Tape::new();
    let zv = tape.constant(&z);
    let out = encode(&mut tape, zv, &[], &cfg, 3, &mut None).unwrap();
    assert_eq!(tape.value(out), &z);
}

#[test]
fn eval_mode_is_deterministic() {
    let cfg = tiny();
    let store = layer_store(&cfg, 2);
    let x = randn(&[8, 4], 5);
    assert_eq!(run(&cfg, &store, &x), run(&cfg, &store, &x));
}

#[test]
fn channel_groups_never_interact() {
    let mut cfg = tiny();
    cfg.layers = 3;
    let store: ParamStore<f32> = ParamStore::init_backbone(&cfg, 3).unwrap();
    let x: Tensor<f32> = Tensor::randn(&[8, 4], 1.0, &mut stream(9, &[]));
    let mut y = x.clone();
    for v in &mut y.data_mut()[16..] {
        *v *= -3.0;
    }
    let encode32 = |p: &Tensor<f32>| {
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &store, |_| false);
        let out = encode_batch(&mut tape, &bound, &cfg, p.clone(), None, &mut None).unwrap();
        tape.value(out).clone()
    };
    let (a, b) = (encode32(&x), encode32(&y));
    assert_eq!(&a.data()[..32], &b.data()[..32]);
    assert_ne!(&a.data()[32..], &b.data()[32..]);
}

#[test]
fn default_config_output_shape() {
    let cfg = ModelConfig::default();
    let store: ParamStore<f32> = ParamStore::init_backbone(&cfg, 0).unwrap();
    let x: Tensor<f32> = Tensor::zeros(&[2 * 32, 128]);
    let mut tape = Tape::new();
    let bound = Bound::new(&mut tape, &store, |_| false);
    let out = encode_batch(&mut tape, &bound, &cfg, x, None, &mut None).unwrap();
    assert_eq!(tape.value(out).shape(), &[2 * 32, 128]);
}

#[test]
fn permuting_tokens_permutes_outputs() {
    let cfg = tiny();
    let mut store = layer_store(&cfg, 4);
    store
        .get_mut("embed.pos")
        .unwrap()
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = 0.0);
    let x = randn(&[4, 4], 6);
    let perm = [2, 0, 3, 1];
    let px = Tensor::new(
        &[4, 4],
        perm.iter().flat_map(|&r| x.row(r).to_vec()).collect(),
    )
    .unwrap();
    let (a, b) = (run(&cfg, &store, &x), run(&cfg, &store, &px));
    for (i, &r) in perm.iter().enumerate() {
        for c in 0..8 {
            assert!((b.at(i, c) - a.at(r, c)).abs() < 1e-12);
        }
    }
}

#[test]
fn layer_gradients_pass_grad_check() {
    let cfg = tiny();
    let mut store = layer_store(&cfg, 5);
    // Larger weights than the init so every path carries signal.
    for (_, t) in store.iter_mut() {
        if t.shape().len() == 2 {
            t.data_mut().iter_mut().for_each(|v| *v *= 20.0);
        }
    }
    let x = randn(&[4, 4], 8);
    let target = randn(&[4, 8], 9);
    let names: Vec<String> = store
        .names()
        .filter(|n| n.starts_with("encoder."))
        .map(String::from)
        .collect();
    let mut worst: f64 = 0.0;
    for name in names {
        let err = grad_check(
            |tape, v| {
                let mut bound = Bound::new(tape, &store, |_| false);
                bound.set(&name, v);
                let out = encode_batch(tape, &bound, &cfg, x.clone(), None, &mut None)?;
                tape.mse(out, &target)
            },
            store.get(&name).unwrap(),
            1e-5,
        )
        .unwrap();
        worst = worst.max(err);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn attention_macs_scale_with_token_count_squared() {
    let macs = |stride: usize| {
        let cfg = ModelConfig {
            length: 64,
            patch_len: stride,
            stride,
            ..tiny()
        };
        let store: ParamStore<f32> = ParamStore::init_backbone(&cfg, 0).unwrap();
        let n = cfg.n_patches();
        let mut tape = Tape::new();
        let bound = Bound::new(&mut tape, &store, |_| false);
        encode_batch(
            &mut tape,
            &bound,
            &cfg,
            Tensor::zeros(&[2 * n, stride]),
            None,
            &mut None,
        )
        .unwrap();
        tape.attention_score_macs()
    };
    let (a, b) = (macs(4), macs(8));
    assert!(a as f64 >= 3.5 * b as f64, "{a} vs {b}");
}
