//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines are never captured. Set
//! `ACCEPTANCE_ONLY=4,5` to run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use flate2::read::GzDecoder;
use ggd::data::{
    colorize, dataset_from_bytes, dataset_to_bytes, encode_idx_images, encode_idx_labels, load_raw_dataset,
    make_long_tailed, read_idx, synthetic_spurious, BiasedDataset, IdxData, LabeledBatch, LongTailSpec, Palette,
    RawDataset,
};
use ggd::diff::{cross_entropy_soft, finite_diff_check, LossSpec, Tensor};
use ggd::engine::{
    cr_batch_step, gs_batch_step, pseudo_label, reference_prediction, train, EnsembleState, Granularity,
    LambdaSchedule, Member, ModelSpec, Optimizer, OptimizerConfig, RunConfig, Scheme,
};
use ggd::eval::pseudo_label_drift;
use ggd::models::{
    build_conv_classifier, build_explicit_columns, build_mlp, build_simplenet, build_static_distribution, GroupSource,
    Model, SimpleNetSpec,
};
use ggd::seed::{mix, SubSeeds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// See the note in the CLI binary: glibc malloc churns pages on large buffers.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

const SEEDS: [u64; 3] = [0, 1, 2];
const TRAIN_IMAGES: usize = 10_000;
/// The whole MNIST training set. At rho 0.999 a 10k prefix keeps only about
/// ten bias-conflicting images.
const FULL_TRAIN_IMAGES: usize = 60_000;
const TEST_IMAGES: usize = 2_000;
const RUN_LIMIT_SECS: f64 = 600.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- desk runs

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Method {
    Baseline,
    Gs,
    CrAnneal,
    CrLambdaOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Rho {
    P99,
    P995,
    P999,
}

impl Rho {
    fn value(self) -> f64 {
        match self {
            Rho::P99 => 0.99,
            Rho::P995 => 0.995,
            Rho::P999 => 0.999,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct RunResult {
    /// Accuracy at rho_test = 0 (every background contradicts the label).
    unbiased: f64,
    /// Accuracy at rho_test = rho_train.
    in_dist: f64,
    /// Share of predictions naming the background colour at rho_test = 0.1.
    bias_pred: f64,
    hard_ratio: f64,
    secs: f64,
}

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn load_split(images: &str, labels: &str, limit: usize) -> RawDataset {
    let dir = mnist_dir();
    load_raw_dataset(&dir.join(images), &dir.join(labels), Some(limit)).expect("MNIST files under data/mnist")
}

struct Desk {
    train: RawDataset,
    full_train: Option<RawDataset>,
    test: RawDataset,
    palette: Palette,
    runs: BTreeMap<(Method, Rho, u64), RunResult>,
}

impl Desk {
    fn load() -> Self {
        Desk {
            train: load_split("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz", TRAIN_IMAGES),
            full_train: None,
            test: load_split("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz", TEST_IMAGES),
            palette: Palette::reference(),
            runs: BTreeMap::new(),
        }
    }

    fn run(&mut self, method: Method, rho: Rho, seed: u64) -> RunResult {
        if let Some(r) = self.runs.get(&(method, rho, seed)) {
            return *r;
        }
        let config = desk_config(method, seed);
        let data = SubSeeds::from_root(seed).data;
        let r = rho.value();
        let raw = if rho == Rho::P999 {
            self.full_train.get_or_insert_with(|| {
                load_split(
                    "train-images-idx3-ubyte.gz",
                    "train-labels-idx1-ubyte.gz",
                    FULL_TRAIN_IMAGES,
                )
            })
        } else {
            &self.train
        };
        let train_set = colorize(raw, r, &self.palette, data).unwrap();
        let mut evals = BTreeMap::new();
        for (i, (name, test_rho)) in [("0", 0.0), ("0.1", 0.1), ("id", r)].into_iter().enumerate() {
            let set = colorize(&self.test, test_rho, &self.palette, mix(data, i as u64 + 1)).unwrap();
            evals.insert(name.to_string(), set);
        }
        let start = Instant::now();
        let out = train(&config, &train_set, &evals).unwrap();
        let result = RunResult {
            unbiased: out.log.last_scalar("0", "accuracy").unwrap(),
            in_dist: out.log.last_scalar("id", "accuracy").unwrap(),
            bias_pred: out.log.last_scalar("0.1", "bias_aligned_prediction").unwrap(),
            hard_ratio: out.log.last_scalar("train", "hard_ratio").unwrap(),
            secs: start.elapsed().as_secs_f64(),
        };
        println!(
            "    [{method:?} rho={r} n={} seed={seed}] unbiased {:.4}  id {:.4}  bias-pred {:.4}  R_h {:.4}  {:.0}s",
            train_set.len(),
            result.unbiased,
            result.in_dist,
            result.bias_pred,
            result.hard_ratio,
            result.secs
        );
        self.runs.insert((method, rho, seed), result);
        result
    }

    fn mean(&mut self, method: Method, rho: Rho, field: fn(&RunResult) -> f64) -> f64 {
        SEEDS.iter().map(|&s| field(&self.run(method, rho, s))).sum::<f64>() / SEEDS.len() as f64
    }

    fn slowest(&self) -> f64 {
        self.runs.values().map(|r| r.secs).fold(0.0, f64::max)
    }
}

fn desk_config(method: Method, seed: u64) -> RunConfig {
    let base = ModelSpec::Cnn {
        channels: vec![16, 32],
        strides: vec![2, 2],
    };
    let biased = ModelSpec::Simplenet {
        kernel: 1,
        channels: vec![8, 16],
        strides: vec![],
    };
    let (biased, scheme, lambda) = match method {
        Method::Baseline => (vec![], Scheme::Cr, LambdaSchedule::constant(0.0)),
        Method::Gs => (vec![biased], Scheme::Gs, LambdaSchedule::constant(1.0)),
        Method::CrAnneal => (vec![biased], Scheme::Cr, LambdaSchedule::sin_anneal(Granularity::Epoch)),
        Method::CrLambdaOne => (vec![biased], Scheme::Cr, LambdaSchedule::constant(1.0)),
    };
    let mut c = RunConfig::new(&format!("{method:?}"), base, biased, scheme, 10, seed);
    c.lambda = lambda;
    c.optimizer = OptimizerConfig::adam(1e-3);
    c.batch_size = 64;
    c.eval_every = c.epochs;
    c
}

// ---------------------------------------------------------------- criteria

fn random_logits(rng: &mut ChaCha8Rng, rows: usize, c: usize, scale: f64) -> Tensor {
    Tensor::new(
        vec![rows, c],
        (0..rows * c)
            .map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0))
            .collect(),
    )
    .unwrap()
}

fn c1_decomposition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = rng.random_range(2..12);
        let rows = rng.random_range(1..6);
        let h = random_logits(&mut rng, rows, c, 6.0);
        let f = random_logits(&mut rng, rows, c, 6.0);
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..c)).collect();
        let y = ggd::data::one_hot(&labels, c).unwrap();
        let lhs = cross_entropy_soft(&f, &pseudo_label(&h, &y).unwrap()).unwrap();
        let rhs = cross_entropy_soft(&f, &y).unwrap()
            - cross_entropy_soft(&f, &reference_prediction(&h, &y).unwrap()).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    verdict(worst < 1e-9, format!("max |difference| over 1000 draws = {worst:.3e}"))
}

fn image_batch(n: usize, ch: usize, side: usize, classes: usize, seed: u64) -> LabeledBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::new(
        vec![n, ch, side, side],
        (0..n * ch * side * side).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap();
    let labels = (0..n).map(|i| i % classes).collect();
    LabeledBatch::new(x, labels, vec![0; n], classes).unwrap()
}

fn c2_gradients() -> Verdict {
    let batch = image_batch(4, 3, 6, 10, 5);
    let flat = LabeledBatch::new(
        Tensor::new(
            vec![4, 12],
            (0..48).map(|i| ((i * 37) % 23) as f64 / 23.0 - 0.5).collect(),
        )
        .unwrap(),
        vec![0, 1, 2, 3],
        vec![0; 4],
        10,
    )
    .unwrap();
    let ce = LossSpec::SoftCrossEntropy(batch.onehot.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma_hat = {
        let h = random_logits(&mut rng, 4, 10, 3.0);
        reference_prediction(&h, &batch.onehot).unwrap()
    };
    let regularized = LossSpec::Regularized { sigma_hat, lambda: 0.7 };
    let cases: Vec<(&str, Model, &LabeledBatch, &LossSpec)> = vec![
        ("linear+relu mlp", build_mlp(&[12], &[8], 10, 1).unwrap(), &flat, &ce),
        (
            "SimpleNet-1k (conv 1x1, affine, relu, pool, linear)",
            build_simplenet(&SimpleNetSpec::new(1, vec![16, 32, 64, 128]), 10, 2).unwrap(),
            &batch,
            &ce,
        ),
        (
            "SimpleNet-3 strided",
            build_simplenet(&SimpleNetSpec::new(3, vec![4, 6]).with_strides(vec![2, 1]), 10, 3).unwrap(),
            &batch,
            &ce,
        ),
        (
            "conv classifier",
            build_conv_classifier(&[3, 6, 6], &[4, 5], &[2, 1], 10, 4).unwrap(),
            &batch,
            &ce,
        ),
        (
            "regularized base loss end-to-end",
            build_conv_classifier(&[3, 6, 6], &[4], &[2], 10, 6).unwrap(),
            &batch,
            &regularized,
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, model, b, loss) in cases {
        let err = finite_diff_check(&model, b, 1e-6, loss, 600).unwrap();
        worst = worst.max(err);
        parts.push(format!("{name}: {err:.1e}"));
    }
    verdict(worst < 1e-5, parts.join("; "))
}

fn c3_gs_cr_equivalence() -> Verdict {
    let data = synthetic_spurious(48, 6, 10, 0.9, 10, 21).unwrap();
    let shape = data.sample_shape().to_vec();
    let flat = shape.iter().product::<usize>();
    let base = build_mlp(&shape, &[12], 10, 1).unwrap();
    let biased = build_explicit_columns(6, flat, &[], 10, 2).unwrap();
    let fresh_state = || {
        EnsembleState::new(vec![Member {
            model: biased.clone(),
            optimizer: Optimizer::new(OptimizerConfig::sgd(0.2)),
        }])
    };
    let (mut gs_state, mut cr_state) = (fresh_state(), fresh_state());
    let (mut gs_base, mut cr_base) = (base.clone(), base.clone());
    let mut gs_opt = Optimizer::new(OptimizerConfig::sgd(0.2));
    let mut cr_opt = Optimizer::new(OptimizerConfig::sgd(0.2));
    let mut worst: f64 = 0.0;
    for chunk in (0..48).collect::<Vec<_>>().chunks(16) {
        let batch = data.batch(chunk).unwrap();
        let before: Vec<f64> = gs_base.params().iter().flat_map(|p| p.data().to_vec()).collect();
        gs_batch_step(&mut gs_state, &mut gs_base, &batch, &mut gs_opt).unwrap();
        cr_batch_step(&mut cr_state, &mut cr_base, &batch, 1.0, &mut cr_opt).unwrap();
        let gs_after: Vec<f64> = gs_base.params().iter().flat_map(|p| p.data().to_vec()).collect();
        let cr_after: Vec<f64> = cr_base.params().iter().flat_map(|p| p.data().to_vec()).collect();
        for ((b, g), c) in before.iter().zip(&gs_after).zip(&cr_after) {
            worst = worst.max(((g - b) - (c - b)).abs());
        }
    }
    verdict(
        worst < 1e-9,
        format!("max elementwise update difference over 3 steps = {worst:.3e}"),
    )
}

fn c4_debias_trend(desk: &mut Desk) -> Verdict {
    let base = desk.mean(Method::Baseline, Rho::P99, |r| r.unbiased);
    let gs = desk.mean(Method::Gs, Rho::P99, |r| r.unbiased);
    let cr = desk.mean(Method::CrAnneal, Rho::P99, |r| r.unbiased);
    let (gain_gs, gain_cr) = (100.0 * (gs - base), 100.0 * (cr - base));
    let slowest = desk.slowest();
    verdict(
        gain_cr >= 8.0 && gain_gs >= 10.0 && slowest < RUN_LIMIT_SECS,
        format!(
            "rho_test=0 mean accuracy: baseline {:.2}, GS {:.2} ({gain_gs:+.2}), CR {:.2} ({gain_cr:+.2}); slowest run {slowest:.0}s",
            100.0 * base,
            100.0 * gs,
            100.0 * cr
        ),
    )
}

fn c5_id_stability(desk: &mut Desk) -> Verdict {
    let base = desk.mean(Method::Baseline, Rho::P99, |r| r.in_dist);
    let cr = desk.mean(Method::CrAnneal, Rho::P99, |r| r.in_dist);
    let gap = 100.0 * (cr - base);
    verdict(
        gap.abs() <= 3.0,
        format!(
            "rho_test=0.99 mean accuracy: baseline {:.2}, CR {:.2} ({gap:+.2})",
            100.0 * base,
            100.0 * cr
        ),
    )
}

fn c6_lambda_ablation(desk: &mut Desk) -> Verdict {
    let zero = desk.mean(Method::Baseline, Rho::P995, |r| r.unbiased);
    let anneal = desk.mean(Method::CrAnneal, Rho::P995, |r| r.unbiased);
    let anneal_id = desk.mean(Method::CrAnneal, Rho::P995, |r| r.in_dist);
    let one_id = desk.mean(Method::CrLambdaOne, Rho::P995, |r| r.in_dist);
    verdict(
        zero < anneal && anneal_id > one_id,
        format!(
            "unbiased: lambda=0 {:.2} vs anneal {:.2}; in-distribution: anneal {:.2} vs lambda=1 {:.2}",
            100.0 * zero,
            100.0 * anneal,
            100.0 * anneal_id,
            100.0 * one_id
        ),
    )
}

fn c7_hard_ratio(desk: &mut Desk) -> Verdict {
    let mut lower = 0;
    let mut parts = Vec::new();
    for &s in &SEEDS {
        let base = desk.run(Method::Baseline, Rho::P99, s).hard_ratio;
        let gs = desk.run(Method::Gs, Rho::P99, s).hard_ratio;
        lower += usize::from(gs < base);
        parts.push(format!("seed {s}: GS {gs:.4} vs baseline {base:.4}"));
    }
    verdict(
        lower == SEEDS.len(),
        format!("{lower}/{} seeds lower; {}", SEEDS.len(), parts.join(", ")),
    )
}

fn c8_bias_confusion(desk: &mut Desk) -> Verdict {
    let base = desk.mean(Method::Baseline, Rho::P999, |r| r.bias_pred);
    let cr = desk.mean(Method::CrAnneal, Rho::P999, |r| r.bias_pred);
    let drop = 100.0 * (base - cr);
    verdict(
        drop >= 20.0,
        format!(
            "background-colour predictions at rho_test=0.1: baseline {:.2}%, CR {:.2}% ({drop:.2} points lower)",
            100.0 * base,
            100.0 * cr
        ),
    )
}

fn c9_pseudo_inversion() -> Verdict {
    let labels: Vec<usize> = (0..1000).map(|i| usize::from(i >= 900)).collect();
    let groups = vec![0; labels.len()];
    let model = build_static_distribution(&labels, &groups, GroupSource::Global, 2, 1.0).unwrap();
    let x = Tensor::zeros(vec![labels.len(), 1]);
    let batch = LabeledBatch::new(x, labels.clone(), groups, 2).unwrap();
    let h = model.logits(&batch).unwrap();
    let prior = [0.9, 0.1];
    let drift = pseudo_label_drift(&h, &batch.onehot, &prior).unwrap();
    verdict(
        drift.rank_correlation < 0.0,
        format!(
            "mean pseudo-mass (head, tail) = ({:.6}, {:.6}), rank correlation {:+.1}",
            drift.mean_mass[0], drift.mean_mass[1], drift.rank_correlation
        ),
    )
}

fn long_tail_config(gdd: bool, seed: u64) -> RunConfig {
    let base = ModelSpec::Cnn {
        channels: vec![16, 32],
        strides: vec![2, 2],
    };
    let (biased, lambda) = if gdd {
        let prior = ModelSpec::StaticDistribution {
            source: GroupSource::Global,
            epsilon: 1.0,
        };
        (vec![prior], LambdaSchedule::sin_anneal(Granularity::Epoch))
    } else {
        (vec![], LambdaSchedule::constant(0.0))
    };
    let mut c = RunConfig::new(
        if gdd { "ggd_cr_d" } else { "baseline" },
        base,
        biased,
        Scheme::Cr,
        10,
        seed,
    );
    c.lambda = lambda;
    c.optimizer = OptimizerConfig::adam(1e-3);
    c.batch_size = 64;
    c.eval_every = c.epochs;
    c
}

fn c10_long_tail(desk: &Desk) -> Verdict {
    let spec = LongTailSpec {
        mu: 0.01,
        head_count: 800,
    };
    let balanced = LongTailSpec {
        mu: 1.0,
        head_count: 150,
    };
    let test = make_long_tailed(&desk.test, &balanced, 77).unwrap();
    let evals = BTreeMap::from([("balanced".to_string(), test)]);
    let mut means = [0.0; 2];
    for &seed in &SEEDS {
        let train_set = make_long_tailed(&desk.train, &spec, SubSeeds::from_root(seed).data).unwrap();
        for (k, gdd) in [false, true].into_iter().enumerate() {
            let out = train(&long_tail_config(gdd, seed), &train_set, &evals).unwrap();
            let acc = out.log.last_scalar("balanced", "mean_class_accuracy").unwrap();
            println!(
                "    [long-tail {} seed={seed}] mean class accuracy {acc:.4}",
                if gdd { "GGD_cr^d" } else { "baseline" }
            );
            means[k] += acc / SEEDS.len() as f64;
        }
    }
    verdict(
        means[1] >= means[0],
        format!(
            "mean per-class accuracy: baseline {:.2}, GGD_cr^d {:.2}",
            100.0 * means[0],
            100.0 * means[1]
        ),
    )
}

fn gunzip(path: &Path) -> Vec<u8> {
    let mut out = Vec::new();
    GzDecoder::new(std::fs::File::open(path).unwrap())
        .read_to_end(&mut out)
        .unwrap();
    out
}

fn c11_determinism_and_formats(desk: &Desk) -> Verdict {
    let mut problems = Vec::new();

    // Two runs of the same config and seed.
    let small = colorize(
        &desk.train.subset(&(0..1500).collect::<Vec<_>>()).unwrap(),
        0.99,
        &desk.palette,
        3,
    )
    .unwrap();
    let mut config = desk_config(Method::CrAnneal, 5);
    config.epochs = 2;
    config.eval_every = 1;
    let evals = BTreeMap::from([("train".to_string(), small.clone())]);
    let first = train(&config, &small, &evals).unwrap().log.to_jsonl();
    let second = train(&config, &small, &evals).unwrap().log.to_jsonl();
    if first != second {
        problems.push("metric logs differ between identical runs".to_string());
    }

    // IDX: re-encoding the decoded test files reproduces them byte for byte.
    let dir = mnist_dir();
    let raw_images = gunzip(&dir.join("t10k-images-idx3-ubyte.gz"));
    let raw_labels = gunzip(&dir.join("t10k-labels-idx1-ubyte.gz"));
    match (read_idx(&raw_images).unwrap(), read_idx(&raw_labels).unwrap()) {
        (IdxData::Images(images), IdxData::Labels(labels)) => {
            let (n, h, w) = (images.shape()[0], images.shape()[2], images.shape()[3]);
            let pixels: Vec<u8> = images.data().iter().map(|v| (v * 255.0).round() as u8).collect();
            if encode_idx_images(n, h, w, &pixels) != raw_images {
                problems.push("IDX images do not round-trip".into());
            }
            let bytes: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
            if encode_idx_labels(&bytes) != raw_labels {
                problems.push("IDX labels do not round-trip".into());
            }
        }
        _ => problems.push("IDX files decoded to the wrong kinds".into()),
    }

    // Dataset container: decode(encode(d)) == d and re-encoding is stable.
    let sets: Vec<BiasedDataset> = vec![small, synthetic_spurious(200, 5, 10, 0.7, 10, 8).unwrap()];
    for d in &sets {
        let bytes = dataset_to_bytes(d);
        let back = dataset_from_bytes(&bytes).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if back != *d || bits(&back.images) != bits(&d.images) || dataset_to_bytes(&back) != bytes {
            problems.push("dataset container does not round-trip".into());
        }
    }
    let ok = problems.is_empty();
    let detail = if ok {
        "identical MetricLogs on rerun; IDX and container round-trips exact".to_string()
    } else {
        problems.join("; ")
    };
    verdict(ok, detail)
}

fn main() -> ExitCode {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |id: usize| only.as_ref().is_none_or(|set| set.contains(&id));
    let names = [
        "loss decomposition identity",
        "gradient correctness",
        "GS/CR equivalence at lambda=1",
        "Biased-MNIST de-bias trend",
        "in-distribution stability of CR",
        "lambda ablation ordering",
        "hard-ratio property",
        "bias-confusion property",
        "pseudo-label inversion",
        "long-tailed direction",
        "determinism and formats",
    ];
    let needs_desk = [4, 5, 6, 7, 8, 10, 11].iter().any(|&id| wanted(id));
    let mut desk = needs_desk.then(Desk::load);
    let mut failed = 0;
    let mut lines = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        if !wanted(id) {
            continue;
        }
        println!("criterion {id}: {name} ...");
        let start = Instant::now();
        let v = match id {
            1 => c1_decomposition(),
            2 => c2_gradients(),
            3 => c3_gs_cr_equivalence(),
            4 => c4_debias_trend(desk.as_mut().unwrap()),
            5 => c5_id_stability(desk.as_mut().unwrap()),
            6 => c6_lambda_ablation(desk.as_mut().unwrap()),
            7 => c7_hard_ratio(desk.as_mut().unwrap()),
            8 => c8_bias_confusion(desk.as_mut().unwrap()),
            9 => c9_pseudo_inversion(),
            10 => c10_long_tail(desk.as_ref().unwrap()),
            _ => c11_determinism_and_formats(desk.as_ref().unwrap()),
        };
        let line = format!(
            "{} criterion {id:>2} {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        failed += usize::from(!v.pass);
        lines.push(line);
    }
    println!("\nacceptance summary:");
    for line in &lines {
        println!("{line}");
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
