use ggd::data::{
    colorize, long_tail_counts, make_long_tailed, synthetic_spurious, LabeledBatch, LongTailSpec, Palette, RawDataset,
    FOREGROUND_THRESHOLD,
};
use ggd::diff::{apply_layer, cross_entropy_soft, softmax, Layer, Tape, Tensor};
use ggd::engine::{
    clip_pseudo, cr_batch_step, gs_batch_step, lambda_value, negative_gradient, reference_prediction, EnsembleState,
    Granularity, LambdaSchedule, Member, Optimizer, OptimizerConfig,
};
use ggd::eval::{confusion, grad_cosine, hard_ratio, pseudo_label_drift, ConfusionAxis};
use ggd::models::{
    build_conv_classifier, build_explicit_columns, build_mlp, build_simplenet, build_static_distribution, GroupSource,
    Model, SimpleNetSpec,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn onehot(labels: &[usize], c: usize) -> Tensor {
    ggd::data::one_hot(labels, c).unwrap()
}

fn labels_strategy(c: usize, n: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..c, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 1..6)
    ) {
        let s = softmax(&Tensor::from_rows(&rows).unwrap()).unwrap();
        for i in 0..s.rows() {
            let total: f64 = s.row(i).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "row {i} sums to {total}");
        }
    }

    #[test]
    fn cross_entropy_is_linear_in_target_scale(
        seed in any::<u64>(),
        a in 0.0f64..=1.0,
        batch in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_tensor(&mut rng, vec![batch, 4], 5.0);
        let w = random_tensor(&mut rng, vec![batch, 4], 1.0).map(f64::abs);
        let scaled = w.map(|v| a * v);
        let lhs = cross_entropy_soft(&z, &scaled).unwrap();
        let rhs = a * cross_entropy_soft(&z, &w).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn apply_layer_is_deterministic(seed in any::<u64>(), kernel in prop::sample::select(vec![1usize, 3])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = Layer::conv2d(2, 3, kernel, 1, &mut rng).unwrap();
        let x = random_tensor(&mut rng, vec![2, 2, 4, 5], 1.0);
        let a = apply_layer(&layer, &x, &mut Tape::new()).unwrap();
        let b = apply_layer(&layer, &x, &mut Tape::new()).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn colorize_is_pure_and_keeps_foreground(seed in any::<u64>(), rho in 0.0f64..=1.0) {
        let raw = tiny_digits(40, seed);
        let a = colorize(&raw, rho, &Palette::reference(), seed).unwrap();
        let b = colorize(&raw, rho, &Palette::reference(), seed).unwrap();
        prop_assert_eq!(&a, &b);
        let area = raw.height() * raw.width();
        for i in 0..raw.len() {
            let src = raw.images.row(i);
            let out = a.images.row(i);
            for ch in 0..3 {
                for (p, &v) in src.iter().enumerate() {
                    if v >= FOREGROUND_THRESHOLD {
                        prop_assert_eq!(out[ch * area + p], v);
                    }
                }
            }
        }
    }

    #[test]
    fn synthetic_generator_is_pure(seed in any::<u64>(), rho in 0.0f64..=1.0) {
        let a = synthetic_spurious(50, 3, 4, rho, 5, seed).unwrap();
        let b = synthetic_spurious(50, 3, 4, rho, 5, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn long_tail_profile_is_monotone(mu in 0.001f64..=1.0, head in 10usize..5000) {
        let spec = LongTailSpec { mu, head_count: head };
        let counts = long_tail_counts(&spec, 10);
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        prop_assert_eq!(counts[0], head);
        let expected = mu * head as f64;
        prop_assert!((counts[9] as f64 - expected).abs() <= 1.0, "{} vs {expected}", counts[9]);
    }

    #[test]
    fn decomposition_identity(seed in any::<u64>(), batch in 1usize..6, c in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_tensor(&mut rng, vec![batch, c], 8.0);
        let f = random_tensor(&mut rng, vec![batch, c], 8.0);
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..c)).collect();
        let y = onehot(&labels, c);
        let pseudo = clip_pseudo(&negative_gradient(&h, &y).unwrap(), &y).unwrap();
        let lhs = cross_entropy_soft(&f, &pseudo).unwrap();
        let rhs = cross_entropy_soft(&f, &y).unwrap()
            - cross_entropy_soft(&f, &reference_prediction(&h, &y).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn clipped_pseudo_labels_stay_on_the_label(seed in any::<u64>(), labels in labels_strategy(6, 5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = onehot(&labels, 6);
        let raw = random_tensor(&mut rng, vec![5, 6], 3.0);
        let p = clip_pseudo(&raw, &y).unwrap();
        for (v, yj) in p.data().iter().zip(y.data()) {
            prop_assert!(*v >= 0.0);
            if *yj == 0.0 {
                prop_assert_eq!(*v, 0.0);
            }
        }
        let h = random_tensor(&mut rng, vec![5, 6], 10.0);
        let g = clip_pseudo(&negative_gradient(&h, &y).unwrap(), &y).unwrap();
        prop_assert!(g.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sin_anneal_is_monotone_with_exact_ends(horizon in 1usize..400) {
        let s = LambdaSchedule::sin_anneal(Granularity::Batch);
        let values: Vec<f64> = (0..=horizon).map(|t| lambda_value(&s, t, horizon).unwrap()).collect();
        prop_assert_eq!(values[0], 0.0);
        prop_assert_eq!(values[horizon], 1.0);
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn confusion_rows_count_references(pred in labels_strategy(4, 30), refs in labels_strategy(4, 30)) {
        let m = confusion(&pred, &refs, 4, ConfusionAxis::VsLabel).unwrap();
        for c in 0..4 {
            prop_assert_eq!(m.row_sums()[c], refs.iter().filter(|&&r| r == c).count() as u64);
        }
        prop_assert_eq!(m.total(), 30);
        let acc = ggd::eval::accuracy(&pred, &refs).unwrap();
        prop_assert!((acc - m.trace() as f64 / m.total() as f64).abs() < 1e-15);
    }

    #[test]
    fn hard_ratio_ignores_loss_scale(
        losses in prop::collection::vec(0.0f64..10.0, 1..40),
        scale in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask: Vec<bool> = losses.iter().map(|_| rng.random()).collect();
        let scaled: Vec<f64> = losses.iter().map(|l| l * scale).collect();
        let a = hard_ratio(&losses, &mask).unwrap();
        let b = hard_ratio(&scaled, &mask).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn grad_cosine_is_scale_free_and_symmetric(
        g in prop::collection::vec(-5.0f64..5.0, 2..20),
        a in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        prop_assume!(g.iter().any(|v| v.abs() > 1e-6));
        let scaled: Vec<f64> = g.iter().map(|v| a * v).collect();
        prop_assert!((grad_cosine(&g, &scaled).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let other: Vec<f64> = g.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert_eq!(grad_cosine(&g, &other).unwrap(), grad_cosine(&other, &g).unwrap());
    }

    #[test]
    fn drift_at_zero_logits_is_scaled_prior(labels in labels_strategy(5, 1..60)) {
        let n = labels.len();
        let y = onehot(&labels, 5);
        let prior: Vec<f64> = (0..5).map(|c| labels.iter().filter(|&&l| l == c).count() as f64 / n as f64).collect();
        let d = pseudo_label_drift(&Tensor::zeros(vec![n, 5]), &y, &prior).unwrap();
        for (m, p) in d.mean_mass.iter().zip(&prior) {
            prop_assert!((m - 0.8 * p).abs() < 1e-15, "{m} vs {}", 0.8 * p);
        }
    }

    #[test]
    fn init_is_seed_deterministic(seed in any::<u64>()) {
        let spec = SimpleNetSpec::new(3, vec![4, 6]);
        prop_assert_eq!(build_simplenet(&spec, 10, seed).unwrap(), build_simplenet(&spec, 10, seed).unwrap());
        prop_assert_eq!(build_mlp(&[7], &[5], 3, seed).unwrap(), build_mlp(&[7], &[5], 3, seed).unwrap());
    }

    #[test]
    fn simplenet_k1_ignores_transpose_of_constant_maps(
        seed in any::<u64>(),
        colors in prop::collection::vec(0.0f64..1.0, 3),
        h in 1usize..6,
        w in 1usize..6,
    ) {
        let model = build_simplenet(&SimpleNetSpec::new(1, vec![4, 5]), 10, seed).unwrap();
        let image = |rows: usize, cols: usize| {
            let data: Vec<f64> = colors.iter().flat_map(|&c| std::iter::repeat_n(c, rows * cols)).collect();
            Tensor::new(vec![1, 3, rows, cols], data).unwrap()
        };
        let a = model.logits(&LabeledBatch::new(image(h, w), vec![0], vec![0], 10).unwrap()).unwrap();
        let b = model.logits(&LabeledBatch::new(image(w, h), vec![0], vec![0], 10).unwrap()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

fn tiny_digits(n: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * 4).map(|_| rng.random_range(0.0..=1.0)).collect();
    RawDataset::new(
        Tensor::new(vec![n, 1, 2, 2], data).unwrap(),
        (0..n).map(|i| i % 10).collect(),
        10,
    )
    .unwrap()
}

#[test]
fn colorize_alignment_frequency_matches_rho() {
    let n = 100_000;
    let raw = RawDataset::new(
        Tensor::zeros(vec![n, 1, 1, 1]),
        (0..n).map(|i| (i * 7) % 10).collect(),
        10,
    )
    .unwrap();
    for (rho, seed) in [(0.1, 1), (0.5, 2), (0.99, 3), (0.999, 4)] {
        let d = colorize(&raw, rho, &Palette::reference(), seed).unwrap();
        let aligned = d.labels.iter().zip(&d.bias_attr).filter(|(l, b)| l == b).count() as f64;
        let mean = n as f64 * rho;
        let sd = (n as f64 * rho * (1.0 - rho)).sqrt();
        assert!((aligned - mean).abs() <= 4.0 * sd, "rho {rho}: {aligned} vs {mean}");
    }
}

#[test]
fn long_tail_subsampling_is_pure() {
    let raw = tiny_digits(400, 9);
    let spec = LongTailSpec {
        mu: 0.1,
        head_count: 40,
    };
    let a = make_long_tailed(&raw, &spec, 5).unwrap();
    assert_eq!(a, make_long_tailed(&raw, &spec, 5).unwrap());
    assert_ne!(a.images, make_long_tailed(&raw, &spec, 6).unwrap().images);
}

/// Loss `sum((layer(x) - target)^2)`-style on the tape, differentiated with
/// respect to the input and every parameter.
fn layer_gradcheck(layer: &Layer, x: &Tensor, rng: &mut ChaCha8Rng) -> f64 {
    let loss_of = |layer: &Layer, x: &Tensor, target: &Tensor| {
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let (y, _) = layer.apply(&mut tape, xv).unwrap();
        let l = tape.squared_error(y, target).unwrap();
        tape.value(l).data()[0]
    };
    let out_shape = apply_layer(layer, x, &mut Tape::new()).unwrap().shape().to_vec();
    let target = random_tensor(rng, out_shape, 1.0);

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let (y, params) = layer.apply(&mut tape, xv).unwrap();
    let l = tape.squared_error(y, &target).unwrap();
    let grads = tape.backward(l).unwrap();

    let step = 1e-6;
    let mut worst = 0.0f64;
    let mut record = |a: f64, n: f64| worst = worst.max((a - n).abs() / 1f64.max(a.abs()).max(n.abs()));
    let gx = grads.wrt(xv);
    for (i, &g) in gx.iter().enumerate() {
        let (mut up, mut down) = (x.clone(), x.clone());
        up.data_mut()[i] += step;
        down.data_mut()[i] -= step;
        record(
            g,
            (loss_of(layer, &up, &target) - loss_of(layer, &down, &target)) / (2.0 * step),
        );
    }
    for (k, p) in params.iter().enumerate() {
        let gp = grads.wrt(*p);
        for (i, &g) in gp.iter().enumerate() {
            let mut up = layer.clone();
            up.params_mut()[k].data_mut()[i] += step;
            let mut down = layer.clone();
            down.params_mut()[k].data_mut()[i] -= step;
            record(
                g,
                (loss_of(&up, x, &target) - loss_of(&down, x, &target)) / (2.0 * step),
            );
        }
    }
    worst
}

#[test]
fn every_layer_kind_matches_finite_differences() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = rng.random_range(1..4);
        let (c, h, w) = (rng.random_range(1..4), rng.random_range(2..6), rng.random_range(2..6));
        let image = random_tensor(&mut rng, vec![batch, c, h, w], 1.0);

        let inputs = rng.random_range(1..6);
        let linear = Layer::linear(inputs, rng.random_range(1..5), &mut rng).unwrap();
        let flat = random_tensor(&mut rng, vec![batch, inputs], 1.0);

        // Keep ReLU inputs clear of the kink so central differences are exact.
        let relu_in = random_tensor(&mut rng, vec![batch, 7], 1.0).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });

        let mut affine = Layer::channel_affine(c);
        for p in affine.params_mut() {
            for v in p.data_mut() {
                *v = rng.random_range(-2.0..2.0);
            }
        }
        let out_ch = rng.random_range(1..4);
        let stride = rng.random_range(1..3);
        let conv1 = Layer::conv2d(c, out_ch, 1, stride, &mut rng).unwrap();
        let conv3 = Layer::conv2d(c, out_ch, 3, stride, &mut rng).unwrap();

        let cases: [(&str, &Layer, &Tensor); 6] = [
            ("linear", &linear, &flat),
            ("relu", &Layer::Relu, &relu_in),
            ("conv1", &conv1, &image),
            ("conv3", &conv3, &image),
            ("affine", &affine, &image),
            ("gap", &Layer::GlobalAvgPool, &image),
        ];
        for (name, layer, x) in cases {
            let err = layer_gradcheck(layer, x, &mut rng);
            assert!(err < 1e-5, "{name} seed {seed}: {err}");
        }
    }
}

fn conforming_batch(shape: &[usize], c: usize, n: usize, seed: u64) -> LabeledBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = vec![n];
    full.extend_from_slice(shape);
    let x = random_tensor(&mut rng, full, 1.0).map(f64::abs);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let bias: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    LabeledBatch::new(x, labels, bias, c).unwrap()
}

#[test]
fn built_models_emit_finite_logits() {
    let image = [3, 8, 8];
    let b = conforming_batch(&image, 10, 4, 1);
    let models: Vec<(&str, Model)> = vec![
        (
            "simplenet1",
            build_simplenet(&SimpleNetSpec::new(1, vec![4, 4]), 10, 1).unwrap(),
        ),
        (
            "simplenet3",
            build_simplenet(&SimpleNetSpec::new(3, vec![4, 4]).with_strides(vec![2, 1]), 10, 1).unwrap(),
        ),
        ("conv", build_conv_classifier(&image, &[4, 6], &[2, 2], 10, 1).unwrap()),
        ("mlp", build_mlp(&image, &[8], 10, 1).unwrap()),
        ("background", ggd::models::build_background_model(10, 8, 1).unwrap()),
        (
            "static",
            build_static_distribution(&b.labels, &b.bias_attr, GroupSource::BiasAttr, 10, 1.0).unwrap(),
        ),
    ];
    for (name, m) in models {
        let z = m.logits(&b).unwrap();
        assert_eq!(z.shape(), &[4, 10], "{name}");
        assert!(z.is_finite(), "{name}");
    }
    let flat = conforming_batch(&[1, 1, 12], 3, 5, 2);
    let cols = build_explicit_columns(4, 12, &[6], 3, 1).unwrap();
    let z = cols.logits(&flat).unwrap();
    assert_eq!(z.shape(), &[5, 3]);
    assert!(z.is_finite());
}

fn synthetic_batch(seed: u64) -> LabeledBatch {
    let d = synthetic_spurious(24, 4, 6, 0.9, 3, seed).unwrap();
    d.batch(&(0..24).collect::<Vec<_>>()).unwrap()
}

#[test]
fn static_distribution_survives_steps_unchanged() {
    let batch = synthetic_batch(3);
    let table = build_static_distribution(&batch.labels, &batch.bias_attr, GroupSource::BiasAttr, 3, 1.0).unwrap();
    let mut state = EnsembleState::new(vec![Member {
        model: table.clone(),
        optimizer: Optimizer::new(OptimizerConfig::adam(0.1)),
    }]);
    let mut base = build_mlp(&[1, 1, 10], &[5], 3, 4).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::sgd(0.5));
    for _ in 0..5 {
        gs_batch_step(&mut state, &mut base, &batch, &mut opt).unwrap();
        cr_batch_step(&mut state, &mut base, &batch, 0.5, &mut opt).unwrap();
    }
    assert_eq!(state.members()[0].model, table);
}

#[test]
fn cr_at_full_lambda_updates_like_gs() {
    for seed in 0..5 {
        let batch = synthetic_batch(seed);
        let biased = || {
            EnsembleState::new(vec![Member {
                model: build_explicit_columns(4, 10, &[4], 3, seed + 10).unwrap(),
                optimizer: Optimizer::new(OptimizerConfig::sgd(0.3)),
            }])
        };
        let start = build_mlp(&[1, 1, 10], &[6], 3, seed).unwrap();
        let (mut gs_base, mut cr_base) = (start.clone(), start);
        let (mut gs_state, mut cr_state) = (biased(), biased());
        let mut gs_opt = Optimizer::new(OptimizerConfig::sgd(0.3));
        let mut cr_opt = Optimizer::new(OptimizerConfig::sgd(0.3));
        for _ in 0..2 {
            gs_batch_step(&mut gs_state, &mut gs_base, &batch, &mut gs_opt).unwrap();
            cr_batch_step(&mut cr_state, &mut cr_base, &batch, 1.0, &mut cr_opt).unwrap();
        }
        for (a, b) in gs_base.params().iter().zip(cr_base.params()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-9, "seed {seed}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn biased_model_order_changes_first_accumulation() {
    let batch = synthetic_batch(8);
    let a = build_explicit_columns(4, 10, &[4], 3, 1).unwrap();
    let b = build_explicit_columns(0, 4, &[4], 3, 2).unwrap();
    let run = |first: &Model, second: &Model| {
        let mut state = EnsembleState::new(
            [first, second]
                .into_iter()
                .map(|m| Member {
                    model: m.clone(),
                    optimizer: Optimizer::new(OptimizerConfig::sgd(0.1)),
                })
                .collect(),
        );
        let mut base = build_mlp(&[1, 1, 10], &[], 3, 3).unwrap();
        gs_batch_step(
            &mut state,
            &mut base,
            &batch,
            &mut Optimizer::new(OptimizerConfig::sgd(0.1)),
        )
        .unwrap();
        state.accumulated(1).unwrap().clone()
    };
    assert_ne!(run(&a, &b).data(), run(&b, &a).data());
}
