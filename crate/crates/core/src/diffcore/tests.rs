use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{self, Record};
use super::gradcheck::{check_gradients, GradCheckConfig};
use super::ops;
use super::{backward, AdamWParams, ParamStore, Tape, Tensor};

fn t64(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape.to_vec(), data.to_vec()).unwrap()
}

fn random_t64(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::randn(shape.to_vec(), rng)
}

/// FD-check one op: loss = sum(op(inputs) * fixed_random_weights).
/// The weighting makes index-shuffling bugs visible; a plain sum would
/// hide any transpose/permute/concat backward mistake.
fn fd_check<F>(names: &[(&str, Tensor<f64>)], op: F, tol: f64, seed: u64)
where
    F: Fn(&super::BoundParams<f64>) -> super::Result<Tensor<f64>>,
{
    let mut store = ParamStore::<f64>::new();
    for (name, value) in names {
        store.register(name, value.clone()).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDEAD);
    let probe = {
        let out = op(&store.bind_untracked()).unwrap();
        Tensor::randn(out.shape().to_vec(), &mut rng)
    };
    let forward = move |bound: &super::BoundParams<f64>| {
        let out = op(bound)?;
        ops::sum_all(&ops::mul(&out, &probe)?)
    };
    let report = check_gradients(&mut store, forward, &GradCheckConfig { seed, ..Default::default() }).unwrap();
    assert!(
        report.passes(tol),
        "fd_check failed: max_rel_err={} worst={:?}",
        report.max_rel_err,
        report.worst
    );
}

// ── matmul ──────────────────────────────────────────────────────────

#[test]
fn matmul_identity_passthrough() {
    let eye = t64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
    let x = t64(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let y = ops::matmul(&eye, &x).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn matmul_shape_mismatch_errors() {
    let a = Tensor::<f64>::zeros(vec![2, 3]);
    let b = Tensor::<f64>::zeros(vec![4, 5]);
    assert!(ops::matmul(&a, &b).is_err());
}

#[test]
fn matmul_backward_is_ones_times_b_transpose() {
    // loss = sum(A.B)  =>  dA = ones . B^T
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_t64(&[3, 4], &mut rng);
    let b = random_t64(&[4, 5], &mut rng);
    let tape = Tape::new();
    let at = a.tracked(&tape);
    let loss = ops::sum_all(&ops::matmul(&at, &b).unwrap()).unwrap();
    let grads = backward(&loss).unwrap();
    let da = grads.grad(&at).unwrap();
    for i in 0..3 {
        for j in 0..4 {
            let expect: f64 = (0..5).map(|n| b.data()[j * 5 + n]).sum();
            assert!((da[i * 4 + j] - expect).abs() < 1e-12);
        }
    }
    // and against finite differences
    let b2 = b.clone();
    fd_check(
        &[("a", a)],
        move |p| ops::matmul(p.get("a")?, &b2),
        1e-6,
        7,
    );
}

#[test]
fn matmul_batched_and_broadcast() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_t64(&[2, 3, 4], &mut rng);
    let b = random_t64(&[2, 4, 5], &mut rng);
    let c = ops::matmul(&a, &b).unwrap();
    assert_eq!(c.shape(), &[2, 3, 5]);
    // each batch equals its own 2D product
    for bi in 0..2 {
        let a2 = t64(&[3, 4], &a.data()[bi * 12..(bi + 1) * 12]);
        let b2 = t64(&[4, 5], &b.data()[bi * 20..(bi + 1) * 20]);
        let c2 = ops::matmul(&a2, &b2).unwrap();
        assert_eq!(&c.data()[bi * 15..(bi + 1) * 15], c2.data());
    }
    // broadcast: a [3,4] against b [2,4,5]
    let a2 = t64(&[3, 4], &a.data()[..12]);
    let cb = ops::matmul(&a2, &b).unwrap();
    assert_eq!(cb.shape(), &[2, 3, 5]);
    assert_eq!(&cb.data()[..15], &c.data()[..15]);
}

// ── softmax ─────────────────────────────────────────────────────────

#[test]
fn softmax_uniform_on_zero_logits() {
    let z = Tensor::<f64>::zeros(vec![4]);
    let p = ops::softmax_rows(&z, None).unwrap();
    for v in p.data() {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

#[test]
fn softmax_large_negative_bias_masks_column() {
    let logits = Tensor::<f64>::zeros(vec![3, 4]);
    let bias = t64(&[4], &[0.0, -1e9, 0.0, 0.0]);
    let p = ops::softmax_rows(&logits, Some(&bias)).unwrap();
    for r in 0..3 {
        assert!(p.data()[r * 4 + 1] < 1e-30, "masked prob {}", p.data()[r * 4 + 1]);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z = Tensor::<f64>::randn(vec![16, 16], &mut rng);
    let p = ops::softmax_rows(&z, None).unwrap();
    for r in 0..16 {
        let s: f64 = p.data()[r * 16..(r + 1) * 16].iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn softmax_bias_broadcasts_over_leading_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let z = Tensor::<f64>::randn(vec![2, 3, 3], &mut rng);
    let bias = Tensor::<f64>::randn(vec![3, 3], &mut rng);
    let p = ops::softmax_rows(&z, Some(&bias)).unwrap();
    // head 0 and head 1 see the same bias
    let z0 = t64(&[3, 3], &z.data()[..9]);
    let p0 = ops::softmax_rows(&z0, Some(&bias)).unwrap();
    assert_eq!(&p.data()[..9], p0.data());
}

// ── layer norm ──────────────────────────────────────────────────────

#[test]
fn layer_norm_constant_row_is_offset() {
    let x = Tensor::<f64>::full(vec![2, 8], 3.5).unwrap();
    let gain = Tensor::<f64>::full(vec![8], 1.0).unwrap();
    let offset = Tensor::<f64>::zeros(vec![8]);
    let y = ops::layer_norm(&x, &gain, &offset, 1e-5).unwrap();
    for v in y.data() {
        assert!(v.abs() < 1e-9, "expected zeros, got {}", v);
    }
}

#[test]
fn layer_norm_row_mean_equals_offset_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::<f64>::randn(vec![4, 16], &mut rng);
    let gain = Tensor::<f64>::full(vec![16], 1.0).unwrap();
    let offset = Tensor::<f64>::randn(vec![16], &mut rng);
    let y = ops::layer_norm(&x, &gain, &offset, 1e-5).unwrap();
    let offset_mean: f64 = offset.data().iter().sum::<f64>() / 16.0;
    for r in 0..4 {
        let row_mean: f64 = y.data()[r * 16..(r + 1) * 16].iter().sum::<f64>() / 16.0;
        assert!((row_mean - offset_mean).abs() < 1e-5);
    }
}

// ── conv2d ──────────────────────────────────────────────────────────

#[test]
fn conv2d_identity_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::<f64>::randn(vec![1, 4, 4], &mut rng);
    let k = t64(&[1, 1, 1, 1], &[1.0]);
    let y = ops::conv2d(&x, &k, 1, 0).unwrap();
    assert_eq!(y.shape(), x.shape());
    assert_eq!(y.data(), x.data());
}

#[test]
fn conv2d_ones_kernel_sums_window() {
    let x = Tensor::<f64>::full(vec![1, 5, 5], 1.0).unwrap();
    let k = Tensor::<f64>::full(vec![1, 1, 3, 3], 1.0).unwrap();
    let y = ops::conv2d(&x, &k, 1, 0).unwrap();
    assert_eq!(y.shape(), &[1, 3, 3]);
    for v in y.data() {
        assert!((v - 9.0).abs() < 1e-12);
    }
}

#[test]
fn conv2d_kernel_larger_than_padded_input_errors() {
    let x = Tensor::<f64>::zeros(vec![1, 4, 4]);
    let k = Tensor::<f64>::zeros(vec![1, 1, 7, 7]);
    assert!(ops::conv2d(&x, &k, 1, 1).is_err());
}

#[test]
fn conv2d_output_size_formula() {
    let x = Tensor::<f64>::zeros(vec![2, 9, 7]);
    let k = Tensor::<f64>::zeros(vec![3, 2, 3, 3]);
    let y = ops::conv2d(&x, &k, 2, 1).unwrap();
    // floor((9+2-3)/2)+1 = 5, floor((7+2-3)/2)+1 = 4
    assert_eq!(y.shape(), &[3, 5, 4]);
}

// ── backward basics ─────────────────────────────────────────────────

#[test]
fn backward_of_sum_is_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::<f64>::randn(vec![3, 3], &mut rng);
    let tape = Tape::new();
    let xt = x.tracked(&tape);
    let loss = ops::sum_all(&xt).unwrap();
    let grads = backward(&loss).unwrap();
    assert!(grads.grad(&xt).unwrap().iter().all(|g| (*g - 1.0).abs() < 1e-15));
}

#[test]
fn backward_fanout_accumulates() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::<f64>::randn(vec![4], &mut rng);
    let tape = Tape::new();
    let xt = x.tracked(&tape);
    let y = ops::add(&xt, &xt).unwrap();
    let loss = ops::sum_all(&y).unwrap();
    let grads = backward(&loss).unwrap();
    assert!(grads.grad(&xt).unwrap().iter().all(|g| (*g - 2.0).abs() < 1e-15));
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let x = Tensor::<f64>::zeros(vec![3]);
    let tape = Tape::new();
    let xt = x.tracked(&tape);
    assert!(backward(&xt).is_err());
}

#[test]
fn unreachable_parameter_gets_zero_gradient() {
    let mut store = ParamStore::<f64>::new();
    store.register("used", Tensor::full(vec![2], 1.0).unwrap()).unwrap();
    store.register("unused", Tensor::full(vec![2], 1.0).unwrap()).unwrap();
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let loss = ops::sum_all(bound.get("used").unwrap()).unwrap();
    let grads = backward(&loss).unwrap();
    store.accumulate_gradients(&bound, &grads);
    // adamw must succeed: the unused parameter has an explicit zero grad
    store
        .adamw_step(&AdamWParams { weight_decay: 0.0, ..Default::default() })
        .unwrap();
    assert_eq!(store.get("unused").unwrap().data(), &[1.0, 1.0]);
}

#[test]
fn dag_shared_subexpression_matches_expanded_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Tensor::<f64>::randn(vec![6], &mut rng);

    // shared: s = silu(x); loss = sum(s * s)
    let tape = Tape::new();
    let xt = x.tracked(&tape);
    let s = ops::silu(&xt).unwrap();
    let loss = ops::sum_all(&ops::mul(&s, &s).unwrap()).unwrap();
    let g_shared = backward(&loss).unwrap().grad_or_zeros(&xt);

    // expanded: two independent silu computations from the same leaf
    let tape2 = Tape::new();
    let xt2 = x.tracked(&tape2);
    let s1 = ops::silu(&xt2).unwrap();
    let s2 = ops::silu(&xt2).unwrap();
    let loss2 = ops::sum_all(&ops::mul(&s1, &s2).unwrap()).unwrap();
    let g_tree = backward(&loss2).unwrap().grad_or_zeros(&xt2);

    for (a, b) in g_shared.iter().zip(&g_tree) {
        assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }
}

#[test]
fn ops_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = Tensor::<f32>::randn(vec![16, 16], &mut rng);
    let b = Tensor::<f32>::randn(vec![16, 16], &mut rng);
    let c1 = ops::matmul(&a, &b).unwrap();
    let c2 = ops::matmul(&a, &b).unwrap();
    assert!(c1.data().iter().zip(c2.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn non_finite_result_is_an_error() {
    let x = Tensor::<f64>::full(vec![2], 1e308).unwrap();
    assert!(ops::add(&x, &x).is_err());
    let y = Tensor::<f64>::full(vec![2], 710.0).unwrap(); // exp overflows
    let tape = Tape::new();
    let yt = y.tracked(&tape);
    assert!(ops::silu(&yt).is_ok()); // silu saturates, stays finite
    assert!(Tensor::<f64>::from_vec(vec![1], vec![f64::NAN]).is_err());
}

// ── adamw ───────────────────────────────────────────────────────────

#[test]
fn adamw_first_step_hand_computed() {
    // theta=1, g=1, lr=0.1, betas=(0.9, 0.999), wd=0:
    // m_hat = v_hat = 1  =>  theta' = 1 - 0.1/(1 + eps) ~ 0.9
    let mut store = ParamStore::<f64>::new();
    store.register("theta", Tensor::full(vec![1], 1.0).unwrap()).unwrap();
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let loss = ops::sum_all(bound.get("theta").unwrap()).unwrap(); // grad = 1
    let grads = backward(&loss).unwrap();
    store.accumulate_gradients(&bound, &grads);
    store
        .adamw_step(&AdamWParams { lr: 0.1, beta1: 0.9, beta2: 0.999, weight_decay: 0.0, eps: 1e-8 })
        .unwrap();
    let theta = store.get("theta").unwrap().item();
    assert!((theta - 0.9).abs() < 1e-6, "theta = {}", theta);
}

#[test]
fn adamw_zero_grad_zero_decay_is_fixed_point() {
    let mut store = ParamStore::<f64>::new();
    store.register("theta", Tensor::full(vec![3], 2.0).unwrap()).unwrap();
    let tape = Tape::new();
    let bound = store.bind(&tape);
    // loss independent of theta => zero grad
    let other = Tensor::<f64>::full(vec![1], 5.0).unwrap().tracked(&tape);
    let loss = ops::sum_all(&other).unwrap();
    let grads = backward(&loss).unwrap();
    store.accumulate_gradients(&bound, &grads);
    store
        .adamw_step(&AdamWParams { weight_decay: 0.0, ..Default::default() })
        .unwrap();
    assert_eq!(store.get("theta").unwrap().data(), &[2.0, 2.0, 2.0]);
}

#[test]
fn adamw_decay_only_path() {
    let mut store = ParamStore::<f64>::new();
    store.register("theta", Tensor::full(vec![1], 1.0).unwrap()).unwrap();
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let other = Tensor::<f64>::full(vec![1], 5.0).unwrap().tracked(&tape);
    let loss = ops::sum_all(&other).unwrap();
    let grads = backward(&loss).unwrap();
    store.accumulate_gradients(&bound, &grads);
    store
        .adamw_step(&AdamWParams { lr: 1e-4, weight_decay: 0.01, ..Default::default() })
        .unwrap();
    let theta = store.get("theta").unwrap().item();
    assert!((theta - (1.0 - 1e-6)).abs() < 1e-15, "theta = {}", theta);
}

#[test]
fn adamw_missing_gradient_errors() {
    let mut store = ParamStore::<f64>::new();
    store.register("theta", Tensor::full(vec![1], 1.0).unwrap()).unwrap();
    assert!(store.adamw_step(&AdamWParams::default()).is_err());
}

// ── finite-difference sweep over every differentiable op ───────────

#[test]
fn fd_sweep_all_ops() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x44 = random_t64(&[4, 4], &mut rng);
        let y44 = random_t64(&[4, 4], &mut rng);
        let x8 = random_t64(&[8], &mut rng);
        let b4 = random_t64(&[4], &mut rng);

        fd_check(&[("a", x44.clone()), ("b", y44.clone())], |p| ops::add(p.get("a")?, p.get("b")?), 1e-5, seed);
        fd_check(&[("a", x44.clone()), ("b", y44.clone())], |p| ops::sub(p.get("a")?, p.get("b")?), 1e-5, seed);
        fd_check(&[("a", x44.clone()), ("b", y44.clone())], |p| ops::mul(p.get("a")?, p.get("b")?), 1e-5, seed);
        fd_check(&[("a", x44.clone())], |p| ops::neg(p.get("a")?), 1e-5, seed);
        fd_check(&[("a", x44.clone())], |p| ops::scale(p.get("a")?, 2.5), 1e-5, seed);
        fd_check(&[("a", x44.clone())], |p| ops::add_scalar(p.get("a")?, -1.25), 1e-5, seed);
        fd_check(&[("a", x8.clone())], |p| ops::silu(p.get("a")?), 1e-5, seed);

        // keep relu inputs away from the kink
        let shifted: Vec<f64> = x8.data().iter().map(|v| v + 0.2 * v.signum()).collect();
        fd_check(&[("a", t64(&[8], &shifted))], |p| ops::relu(p.get("a")?), 1e-5, seed);

        fd_check(&[("x", x44.clone()), ("b", b4.clone())], |p| ops::add_bias(p.get("x")?, p.get("b")?), 1e-5, seed);

        let fmap = random_t64(&[3, 4, 4], &mut rng);
        let cbias = random_t64(&[3], &mut rng);
        fd_check(
            &[("x", fmap.clone()), ("b", cbias.clone())],
            |p| ops::add_channel_bias(p.get("x")?, p.get("b")?),
            1e-5,
            seed,
        );

        let a34 = random_t64(&[3, 4], &mut rng);
        let b45 = random_t64(&[4, 5], &mut rng);
        fd_check(&[("a", a34.clone()), ("b", b45.clone())], |p| ops::matmul(p.get("a")?, p.get("b")?), 1e-5, seed);

        let a_b = random_t64(&[2, 3, 4], &mut rng);
        let b_b = random_t64(&[2, 4, 5], &mut rng);
        fd_check(&[("a", a_b), ("b", b_b)], |p| ops::matmul(p.get("a")?, p.get("b")?), 1e-5, seed);

        let b54 = random_t64(&[5, 4], &mut rng);
        fd_check(&[("a", a34.clone()), ("b", b54)], |p| ops::matmul_nt(p.get("a")?, p.get("b")?), 1e-5, seed);

        let a43 = random_t64(&[4, 3], &mut rng);
        fd_check(&[("a", a43), ("b", b45)], |p| ops::matmul_tn(p.get("a")?, p.get("b")?), 1e-5, seed);

        fd_check(&[("a", x44.clone())], |p| ops::transpose2d(p.get("a")?), 1e-5, seed);

        let p3 = random_t64(&[2, 3, 4], &mut rng);
        fd_check(&[("a", p3)], |p| ops::permute(p.get("a")?, &[1, 0, 2]), 1e-5, seed);

        fd_check(&[("a", x44.clone())], |p| ops::reshape(p.get("a")?, vec![2, 8]), 1e-5, seed);

        let c1 = random_t64(&[2, 3], &mut rng);
        let c2 = random_t64(&[2, 2], &mut rng);
        fd_check(
            &[("a", c1), ("b", c2)],
            |p| ops::concat(&[p.get("a")?, p.get("b")?], 1),
            1e-5,
            seed,
        );

        fd_check(&[("a", x44.clone())], |p| ops::slice_axis(p.get("a")?, 1, 1, 2), 1e-5, seed);

        fd_check(&[("z", x44.clone())], |p| ops::softmax_rows(p.get("z")?, None), 1e-5, seed);
        fd_check(
            &[("z", x44.clone()), ("w", y44.clone())],
            |p| ops::softmax_rows(p.get("z")?, Some(p.get("w")?)),
            1e-5,
            seed,
        );
        let z3 = random_t64(&[2, 4, 4], &mut rng);
        let w2 = random_t64(&[4, 4], &mut rng);
        fd_check(
            &[("z", z3), ("w", w2)],
            |p| ops::softmax_rows(p.get("z")?, Some(p.get("w")?)),
            1e-5,
            seed,
        );

        let gain = random_t64(&[4], &mut rng);
        let offset = random_t64(&[4], &mut rng);
        fd_check(
            &[("x", x44.clone()), ("g", gain.clone()), ("o", offset.clone())],
            |p| ops::layer_norm(p.get("x")?, p.get("g")?, p.get("o")?, 1e-5),
            1e-5,
            seed,
        );

        let gmap = random_t64(&[4, 3, 3], &mut rng);
        let ggain = random_t64(&[4], &mut rng);
        let goffset = random_t64(&[4], &mut rng);
        fd_check(
            &[("x", gmap), ("g", ggain), ("o", goffset)],
            |p| ops::group_norm(p.get("x")?, 2, p.get("g")?, p.get("o")?, 1e-5),
            1e-5,
            seed,
        );

        let img = random_t64(&[2, 5, 5], &mut rng);
        let ker = random_t64(&[3, 2, 3, 3], &mut rng);
        fd_check(
            &[("x", img.clone()), ("k", ker.clone())],
            |p| ops::conv2d(p.get("x")?, p.get("k")?, 1, 1),
            1e-5,
            seed,
        );
        fd_check(
            &[("x", img.clone()), ("k", ker.clone())],
            |p| ops::conv2d(p.get("x")?, p.get("k")?, 2, 0),
            1e-5,
            seed,
        );

        let up = random_t64(&[2, 3, 3], &mut rng);
        fd_check(&[("x", up)], |p| ops::upsample_nearest2x(p.get("x")?), 1e-5, seed);

        fd_check(&[("a", x44.clone())], |p| ops::sum_all(p.get("a")?), 1e-5, seed);
        fd_check(&[("a", x44.clone())], |p| ops::mean_all(p.get("a")?), 1e-5, seed);
    }
}

// ── checkpoint ──────────────────────────────────────────────────────

#[test]
fn checkpoint_roundtrip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.ckpt");
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let records = vec![
        Record::from_tensor("srt/w", &Tensor::<f32>::randn(vec![4, 7], &mut rng)),
        Record::from_tensor("srt/b", &Tensor::<f64>::randn(vec![3], &mut rng)),
        Record::from_u64("#step", 12345),
    ];
    checkpoint::write_records(&path, &records).unwrap();
    let back = checkpoint::read_records(&path).unwrap();
    assert_eq!(records, back);

    // byte-level: rewriting what we read reproduces the same file
    let path2 = dir.path().join("test2.ckpt");
    checkpoint::write_records(&path2, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn checkpoint_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
    assert!(checkpoint::read_records(&path).is_err());
}

#[test]
fn param_store_roundtrip_preserves_training_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.ckpt");
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut store = ParamStore::<f32>::new();
    store.register("srt/enc/w", Tensor::randn(vec![3, 5], &mut rng)).unwrap();
    store.register("srt/enc/b", Tensor::randn(vec![5], &mut rng)).unwrap();

    // take one optimizer step so moments and step count are nonzero
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let loss = ops::sum_all(&ops::mul(bound.get("srt/enc/w").unwrap(), bound.get("srt/enc/w").unwrap()).unwrap()).unwrap();
    let grads = backward(&loss).unwrap();
    store.accumulate_gradients(&bound, &grads);
    store.adamw_step(&AdamWParams::default()).unwrap();

    checkpoint::save_store(&path, &store).unwrap();
    let loaded = checkpoint::load_store::<f32>(&path).unwrap();
    assert_eq!(loaded.step_count(), 1);
    assert_eq!(loaded.get("srt/enc/w").unwrap().data(), store.get("srt/enc/w").unwrap().data());

    // saving the loaded store reproduces the file bit-for-bit
    let path2 = dir.path().join("store2.ckpt");
    checkpoint::save_store(&path2, &loaded).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

// ── proptest invariants ─────────────────────────────────────────────

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_rows_always_normalized(
            rows in 1usize..6,
            cols in 1usize..10,
            seed in 0u64..1000,
            with_bias in proptest::bool::ANY,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Tensor::<f32>::rand_uniform(vec![rows, cols], -30.0, 30.0, &mut rng);
            let bias = Tensor::<f32>::rand_uniform(vec![cols], -20.0, 20.0, &mut rng);
            let p = ops::softmax_rows(&z, with_bias.then_some(&bias)).unwrap();
            for r in 0..rows {
                let s: f32 = p.data()[r*cols..(r+1)*cols].iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn reshape_concat_slice_preserve_values(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::<f32>::randn(vec![3, 4], &mut rng);
            let r = ops::reshape(&x, vec![2, 6]).unwrap();
            prop_assert_eq!(r.data(), x.data());
            let c = ops::concat(&[&x, &x], 0).unwrap();
            let s = ops::slice_axis(&c, 0, 3, 3).unwrap();
            prop_assert_eq!(s.data(), x.data());
        }
    }
}
