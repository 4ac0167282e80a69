//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! then asserts, so `cargo test -- --nocapture` shows the full scorecard.

use nafssr::data::{synth_stereo, AugmentationConfig, Manifest, StereoSample, SynthConfig};
use nafssr::eval::{evaluate, EvalOptions, MetricReport, Mode};
use nafssr::gradsuite::{run_suite, Precision};
use nafssr::metrics::{psnr, ssim};
use nafssr::nafblock::{DropDecision, NafBlockParams};
use nafssr::nn::{bilinear_upsample, ConvParams, LAYERNORM_EPS};
use nafssr::params::ParamStore;
use nafssr::rng::stream;
use nafssr::scam::ScamParams;
use nafssr::tensor::{Array4, Shape, Tape, Tensor4};
use nafssr::tlsc::{local_avg_pool, tlsc_window_from_patch};
use nafssr::train::cosine_lr;
use nafssr::{build_model, count_params, infer, Checkpoint, ModelConfig, PoolingPolicy, TrainConfig, Trainer, Variant};
use rand::Rng;

fn verdict(name: &str, pass: bool, detail: impl AsRef<str>) {
    println!("{} {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
}

fn random_f64(shape: Shape, rng: &mut impl Rng, lo: f64, hi: f64) -> Array4<f64> {
    Array4::from_fn(shape, |_, _, _, _| rng.gen_range(lo..hi))
}

fn random_f32(shape: Shape, seed: u64) -> Array4<f32> {
    let mut rng = stream(seed, "acceptance", 0);
    Array4::from_fn(shape, |_, _, _, _| rng.gen_range(0.0..1.0))
}

#[test]
fn parameter_counts_match_published_sizes() {
    let published = [
        (Variant::T, 4, 0.46),
        (Variant::S, 4, 1.56),
        (Variant::B, 4, 6.80),
        (Variant::L, 4, 23.83),
        (Variant::T, 2, 0.45),
        (Variant::S, 2, 1.54),
        (Variant::B, 2, 6.77),
        (Variant::L, 2, 23.79),
    ];
    let mut all = true;
    let mut detail = Vec::new();
    for (v, s, millions) in published {
        let store = build_model::<f32>(&ModelConfig::variant(v, s), 0).unwrap();
        let got = count_params(&store) as f64 / 1e6;
        let rel = (got - millions).abs() / millions;
        all &= rel <= 0.03;
        detail.push(format!("{v:?}x{s} {got:.3}M vs {millions}M ({:+.2}%)", 100.0 * (got - millions) / millions));
    }
    verdict("parameter counts within 3%", all, detail.join(", "));
    assert!(all);
}

#[test]
fn gradient_suite_passes_at_both_precisions() {
    let mut all = true;
    let mut detail = Vec::new();
    for precision in [Precision::F32, Precision::F64] {
        let outcomes = run_suite(precision, None, 0).unwrap();
        for o in &outcomes {
            println!("  {precision}-bit {o}");
        }
        let worst = outcomes.iter().map(|o| o.max_rel_err).fold(0.0, f64::max);
        let ok = outcomes.iter().all(|o| o.passed()) && worst < precision.tolerance();
        all &= ok;
        detail.push(format!("{precision}-bit worst {worst:.2e} < {:.0e}", precision.tolerance()));
    }
    verdict("gradient suite", all, detail.join(", "));
    assert!(all);
}

#[test]
fn fresh_model_is_identity_then_bilinear() {
    let cfg = ModelConfig::new(16, 4, 2);
    let mut store = build_model::<f32>(&cfg, 11).unwrap();
    let lr_l = random_f32(Shape::new(1, 3, 6, 10), 1);
    let lr_r = random_f32(Shape::new(1, 3, 6, 10), 2);

    // Walk the trunk unit by unit and demand exact pass-through.
    let tape = Tape::new();
    let bound = store.bind(&tape, false);
    let intro = ConvParams {
        weight: bound.get("intro.weight").unwrap().clone(),
        bias: bound.get("intro.bias").unwrap().clone(),
        groups: 1,
    };
    let x = tape
        .conv2d(&Tensor4::constant(Array4::concat_batch(&[&lr_l, &lr_r]).unwrap()), &intro)
        .unwrap();
    let mut identities = 0;
    let mut exact = true;
    let mut feat = x;
    for i in 0..cfg.n_blocks {
        let block = NafBlockParams::bind(&bound, &format!("blocks.{i}")).unwrap();
        let y = tape
            .nafblock_forward(&feat, &block, DropDecision::Inference, &PoolingPolicy::Global)
            .unwrap();
        exact &= y.value() == feat.value();
        identities += 1;
        if cfg.scam_positions().contains(&i) {
            let scam = ScamParams::bind(&bound, &format!("scams.{i}")).unwrap();
            let l = tape.slice_batch(&y, 0, 1).unwrap();
            let r = tape.slice_batch(&y, 1, 1).unwrap();
            let (fl, fr) = tape.scam_forward(&l, &r, &scam, 1.0).unwrap();
            exact &= fl.value() == l.value() && fr.value() == r.value();
            identities += 1;
        }
        feat = y;
    }

    for name in ["head.weight", "head.bias"] {
        let w = store.get_mut(name).unwrap();
        *w = Array4::zeros(w.shape());
    }
    let (sl, sr) = infer(&cfg, &store, &lr_l, &lr_r, &PoolingPolicy::Global).unwrap();
    let bilinear = sl == bilinear_upsample(&lr_l, 2).unwrap() && sr == bilinear_upsample(&lr_r, 2).unwrap();
    let pass = exact && bilinear && identities == cfg.n_blocks + cfg.scam_count;
    verdict(
        "identity at init",
        pass,
        format!("{identities} units exact pass-through: {exact}; zero head equals bilinear bitwise: {bilinear}"),
    );
    assert!(pass);
}

/// Independent reference: each direction computes its own correlation and
/// softmax with plain loops, no shared matrix.
fn scam_oracle(store: &ParamStore<f64>, x_l: &Array4<f64>, x_r: &Array4<f64>) -> (Array4<f64>, Array4<f64>) {
    let s = x_l.shape();
    let c = s.c;
    let get = |n: &str| store.get(&format!("s.{n}")).unwrap();
    let layernorm = |x: &Array4<f64>, side: &str| {
        let (w, b) = (get(&format!("ln_{side}.weight")), get(&format!("ln_{side}.bias")));
        Array4::from_fn(s, |n, ch, y, xx| {
            let vals: Vec<f64> = (0..c).map(|k| x.get(n, k, y, xx)).collect();
            let mean = vals.iter().sum::<f64>() / c as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            (x.get(n, ch, y, xx) - mean) / (var + LAYERNORM_EPS).sqrt() * w.data()[ch] + b.data()[ch]
        })
    };
    let project = |x: &Array4<f64>, name: &str| {
        let (w, b) = (get(&format!("{name}.weight")), get(&format!("{name}.bias")));
        Array4::from_fn(s, |n, co, y, xx| {
            b.data()[co] + (0..c).map(|ci| w.get(co, ci, 0, 0) * x.get(n, ci, y, xx)).sum::<f64>()
        })
    };
    let q = project(&layernorm(x_l, "l"), "w1_l");
    let k = project(&layernorm(x_r, "r"), "w1_r");
    let v_l = project(x_l, "w2_l");
    let v_r = project(x_r, "w2_r");
    let attend = |query: &Array4<f64>, key: &Array4<f64>, value: &Array4<f64>| {
        Array4::from_fn(s, |n, ch, y, i| {
            let logits: Vec<f64> = (0..s.w)
                .map(|j| (0..c).map(|d| query.get(n, d, y, i) * key.get(n, d, y, j)).sum::<f64>() / (c as f64).sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            (0..s.w).map(|j| e[j] / z * value.get(n, ch, y, j)).sum()
        })
    };
    let r2l = attend(&q, &k, &v_r);
    let l2r = attend(&k, &q, &v_l);
    let fuse = |x: &Array4<f64>, f: &Array4<f64>, g: &Array4<f64>| {
        Array4::from_fn(s, |n, ch, y, xx| x.get(n, ch, y, xx) + g.data()[ch] * f.get(n, ch, y, xx))
    };
    (fuse(x_l, &r2l, get("gamma_l")), fuse(x_r, &l2r, get("gamma_r")))
}

fn scam_run(store: &ParamStore<f64>, x_l: &Array4<f64>, x_r: &Array4<f64>) -> (Array4<f64>, Array4<f64>) {
    let tape = Tape::new();
    let p = ScamParams::bind(&store.bind(&tape, false), "s").unwrap();
    let (l, r) = tape
        .scam_forward(&Tensor4::constant(x_l.clone()), &Tensor4::constant(x_r.clone()), &p, 1.0)
        .unwrap();
    (l.into_array(), r.into_array())
}

#[test]
fn stereo_attention_matches_oracle() {
    const INSTANCES: u64 = 60;
    let (mut worst_oracle, mut worst_rowsum) = (0.0f64, 0.0f64);
    let mut local = true;
    for i in 0..INSTANCES {
        let mut rng = stream(100, "scam-instance", i);
        let shape = Shape::new(rng.gen_range(1..3), rng.gen_range(1..7), rng.gen_range(1..5), rng.gen_range(1..10));
        let mut store = ParamStore::new();
        ScamParams::<f64>::init(&mut store, "s", shape.c, &mut rng).unwrap();
        for (_, e) in store.iter_mut() {
            e.value = e.value.map(|v| v + rng.gen_range(-0.8..0.8));
        }
        let x_l = random_f64(shape, &mut rng, -1.5, 1.5);
        let x_r = random_f64(shape, &mut rng, -1.5, 1.5);

        let (l, r) = scam_run(&store, &x_l, &x_r);
        let (ol, or) = scam_oracle(&store, &x_l, &x_r);
        worst_oracle = worst_oracle.max(l.max_abs_diff(&ol)).max(r.max_abs_diff(&or));

        // Row locality: disturbing one row of either view leaves every other
        // output row bit-for-bit unchanged.
        let row = rng.gen_range(0..shape.h);
        let bump = |x: &Array4<f64>| {
            let mut x = x.clone();
            for n in 0..shape.n {
                for ch in 0..shape.c {
                    for xx in 0..shape.w {
                        x.set(n, ch, row, xx, x.get(n, ch, row, xx) + 0.9);
                    }
                }
            }
            x
        };
        for (bl, br) in [(bump(&x_l), x_r.clone()), (x_l.clone(), bump(&x_r))] {
            let (l2, r2) = scam_run(&store, &bl, &br);
            for n in 0..shape.n {
                for ch in 0..shape.c {
                    for y in (0..shape.h).filter(|&y| y != row) {
                        for xx in 0..shape.w {
                            local &= l2.get(n, ch, y, xx) == l.get(n, ch, y, xx);
                            local &= r2.get(n, ch, y, xx) == r.get(n, ch, y, xx);
                        }
                    }
                }
            }
        }

        // Softmax rows: with a constant unit value path and unit gamma, each
        // fused output is x plus the row sum of the attention weights.
        let mut ones = store.clone();
        for side in ["l", "r"] {
            let c = shape.c;
            *ones.get_mut(&format!("s.w2_{side}.weight")).unwrap() = Array4::zeros(Shape::new(c, c, 1, 1));
            *ones.get_mut(&format!("s.w2_{side}.bias")).unwrap() = Array4::full(Shape::new(1, c, 1, 1), 1.0);
            *ones.get_mut(&format!("s.gamma_{side}")).unwrap() = Array4::full(Shape::new(1, c, 1, 1), 1.0);
        }
        let (sl, sr) = scam_run(&ones, &x_l, &x_r);
        let row_sum_err = |out: &Array4<f64>, x: &Array4<f64>| {
            out.data()
                .iter()
                .zip(x.data())
                .map(|(o, v)| ((o - v) - 1.0).abs())
                .fold(0.0, f64::max)
        };
        worst_rowsum = worst_rowsum.max(row_sum_err(&sl, &x_l)).max(row_sum_err(&sr, &x_r));
    }
    let pass = worst_oracle < 1e-5 && worst_rowsum < 1e-5 && local;
    verdict(
        "stereo cross-attention semantics",
        pass,
        format!(
            "{INSTANCES} instances; oracle max diff {worst_oracle:.2e} < 1e-5; softmax row-sum err {worst_rowsum:.2e} < 1e-5; row locality exact: {local}"
        ),
    );
    assert!(pass);
}

#[test]
fn local_pooling_covering_the_map_equals_global() {
    let mut worst = 0.0f64;
    // Raw pooling: a window at least the feature extent yields the global mean.
    for (i, shape) in [Shape::new(2, 4, 5, 7), Shape::new(1, 3, 1, 9), Shape::new(1, 2, 6, 1)].into_iter().enumerate() {
        let x = random_f32(shape, 20 + i as u64).cast::<f64>();
        for window in [(shape.h, shape.w), (shape.h + 3, shape.w + 8)] {
            let pooled = local_avg_pool(&x, window).unwrap();
            let mean = Array4::from_fn(Shape::new(shape.n, shape.c, 1, 1), |n, c, _, _| {
                let mut s = 0.0;
                for y in 0..shape.h {
                    for xx in 0..shape.w {
                        s += x.get(n, c, y, xx);
                    }
                }
                s / (shape.h * shape.w) as f64
            });
            let broadcast = Array4::from_fn(shape, |n, c, _, _| mean.get(n, c, 0, 0));
            worst = worst.max(pooled.max_abs_diff(&broadcast));
        }
    }
    // Whole model: a covering window reproduces global pooling outputs.
    let cfg = ModelConfig::new(8, 2, 2);
    let mut store = build_model::<f32>(&cfg, 3).unwrap();
    let mut rng = stream(3, "wake", 0);
    for (_, e) in store.iter_mut() {
        e.value = e.value.map(|v| v + rng.gen_range(-0.2..0.2));
    }
    let l = random_f32(Shape::new(1, 3, 8, 12), 4);
    let r = random_f32(Shape::new(1, 3, 8, 12), 5);
    let global = infer(&cfg, &store, &l, &r, &PoolingPolicy::Global).unwrap();
    for window in [(8, 12), (45, 135)] {
        let local = infer(&cfg, &store, &l, &r, &PoolingPolicy::local(window.0, window.1).unwrap()).unwrap();
        worst = worst.max(local.0.max_abs_diff(&global.0)).max(local.1.max_abs_diff(&global.1));
    }
    let narrow = infer(&cfg, &store, &l, &r, &PoolingPolicy::local(3, 5).unwrap()).unwrap();
    let differs = narrow.0.max_abs_diff(&global.0) > 0.0;

    let w1 = tlsc_window_from_patch((30, 90));
    let w2 = tlsc_window_from_patch((40, 100));
    let pass = worst < 1e-6 && w1 == (45, 135) && w2 == (60, 150) && differs;
    verdict(
        "local statistics equivalence",
        pass,
        format!("covering-window max diff {worst:.2e} < 1e-6; windows {w1:?} and {w2:?}; narrow window changes output: {differs}"),
    );
    assert!(pass);
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn load(manifest: &Manifest) -> Vec<StereoSample> {
    manifest.load_all().unwrap()
}

#[test]
fn micro_model_overfits_one_pair() {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthConfig {
        seed: 6,
        count: 1,
        size: (60, 180),
        scale: 2,
        ..SynthConfig::default()
    };
    let manifest = synth_stereo(&synth, dir.path()).unwrap();
    let samples = load(&manifest);
    assert_eq!(samples[0].lr_l.shape(), Shape::new(1, 3, 30, 90));

    let model = ModelConfig {
        scam_count: 2,
        ..ModelConfig::new(16, 2, 2)
    };
    let cfg = TrainConfig {
        iters: 2000,
        batch: 1,
        patch: None,
        augment: AugmentationConfig::NONE,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(cfg, model.clone(), &samples).unwrap();
    let mut losses = Vec::with_capacity(2000);
    while !trainer.is_done() {
        losses.push(trainer.step().unwrap().loss);
    }
    let s = &samples[0];
    let (sl, sr) = infer(&model, trainer.params(), &s.lr_l, &s.lr_r, &PoolingPolicy::Global).unwrap();
    let clamp = |a: &Array4<f32>| a.map(|v| v.clamp(0.0, 1.0));
    let train_psnr = (psnr(&clamp(&sl), &s.hr_l).unwrap() + psnr(&clamp(&sr), &s.hr_r).unwrap()) / 2.0;
    let (head, tail) = (median(&losses[..100]), median(&losses[losses.len() - 100..]));
    let pass = train_psnr > 40.0 && head > tail;
    verdict(
        "overfit smoke",
        pass,
        format!("train PSNR {train_psnr:.2} dB > 40; median loss first 100 {head:.4e} > last 100 {tail:.4e}"),
    );
    assert!(pass);
}

fn val_psnr(ck: &Checkpoint<f32>, manifest: &Manifest, opts: &EvalOptions) -> f64 {
    evaluate(ck, manifest, "val", opts).unwrap().mean(Mode::PairAverage).unwrap().0
}

#[test]
fn cross_view_attention_helps_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let data = |name: &str, seed: u64, count: usize| {
        let cfg = SynthConfig {
            seed,
            count,
            size: (48, 192),
            scale: 2,
            max_disparity: 20,
            ..SynthConfig::default()
        };
        synth_stereo(&cfg, &dir.path().join(name)).unwrap()
    };
    let train = load(&data("train", 70, 32));
    let val = data("val", 71, 8);
    let opts = EvalOptions {
        modes: vec![Mode::PairAverage],
        ..EvalOptions::default()
    };

    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let mut scores = [0.0; 2];
        for (slot, scams) in [8, 0].into_iter().enumerate() {
            let model = ModelConfig {
                scam_count: scams,
                ..ModelConfig::new(32, 8, 2)
            };
            let cfg = TrainConfig {
                iters: 5000,
                batch: 1,
                seed,
                patch: Some((24, 48)),
                ..TrainConfig::default()
            };
            let mut trainer = Trainer::new(cfg, model, &train).unwrap();
            while !trainer.is_done() {
                trainer.step().unwrap();
            }
            scores[slot] = val_psnr(&trainer.checkpoint(), &val, &opts);
        }
        if scores[0] > scores[1] {
            wins += 1;
        }
        detail.push(format!("seed {seed}: 8 SCAMs {:.3} dB vs 0 SCAMs {:.3} dB", scores[0], scores[1]));
    }
    let pass = wins >= 2;
    verdict("cross-view benefit", pass, format!("{wins}/3 seeds favour attention; {}", detail.join("; ")));
    assert!(pass);
}

#[test]
fn ablation_switches_produce_labeled_report_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let data = |name: &str, seed: u64, count: usize| {
        let cfg = SynthConfig {
            seed,
            count,
            size: (48, 144),
            scale: 2,
            max_disparity: 12,
            ..SynthConfig::default()
        };
        synth_stereo(&cfg, &dir.path().join(name)).unwrap()
    };
    let train = load(&data("train", 80, 8));
    let val = data("val", 81, 4);
    let model = ModelConfig {
        scam_count: 2,
        ..ModelConfig::new(16, 2, 2)
    };
    let patch = (12, 24);
    let run = |augment| {
        let cfg = TrainConfig {
            iters: 300,
            batch: 2,
            patch: Some(patch),
            stride: 8,
            augment,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(cfg, model.clone(), &train).unwrap();
        while !trainer.is_done() {
            trainer.step().unwrap();
        }
        trainer.checkpoint()
    };
    let with_aug = run(AugmentationConfig::ALL);
    let without_aug = run(AugmentationConfig::NONE);

    let reports_dir = dir.path().join("reports");
    let window = tlsc_window_from_patch(patch);
    let eval = |ck: &Checkpoint<f32>, label: &str, policy: PoolingPolicy| {
        let opts = EvalOptions {
            policy,
            ..EvalOptions::default()
        };
        let report = evaluate(ck, &val, label, &opts).unwrap();
        let stem = format!("{}_{}", label, policy.label().replace(' ', "_"));
        report.save(&reports_dir, &stem).unwrap();
        report
    };
    let local = PoolingPolicy::local(window.0, window.1).unwrap();
    let pairs: [(&str, MetricReport, MetricReport); 2] = [
        (
            "augmentation on/off",
            eval(&with_aug, "augment_on", PoolingPolicy::Global),
            eval(&without_aug, "augment_off", PoolingPolicy::Global),
        ),
        (
            "local statistics on/off",
            eval(&with_aug, "augment_on", local),
            eval(&with_aug, "augment_on", PoolingPolicy::Global),
        ),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (what, a, b) in &pairs {
        let (pa, pb) = (a.mean(Mode::PairAverage).unwrap().0, b.mean(Mode::PairAverage).unwrap().0);
        let labeled = (a.dataset.as_str(), a.policy.as_str()) != (b.dataset.as_str(), b.policy.as_str());
        let altered = a.records != b.records;
        pass &= labeled && altered;
        println!("  {what}:\n{}{}", a.to_table(), b.to_table());
        detail.push(format!(
            "{what}: [{} {}] {pa:.3} dB vs [{} {}] {pb:.3} dB",
            a.dataset, a.policy, b.dataset, b.policy
        ));
    }
    let files = std::fs::read_dir(&reports_dir).unwrap().count();
    pass &= files == 6;
    verdict("ablation switches", pass, format!("{}; {files} report files", detail.join("; ")));
    assert!(pass);
}

#[test]
fn protocol_checks() {
    let a = random_f32(Shape::new(1, 3, 16, 24), 30).cast::<f64>().map(|v| v * 0.8);
    let shifted = a.map(|v| v + 0.1);
    let p = psnr(&a, &shifted).unwrap();
    let s = ssim(&a, &a).unwrap();
    let cfg = TrainConfig {
        iters: 1000,
        ..TrainConfig::default()
    };
    let (lr0, lr_end) = (cosine_lr(0, &cfg), cosine_lr(cfg.iters, &cfg));

    // Checkpoint round trip and resume.
    let synth = SynthConfig {
        seed: 9,
        count: 2,
        size: (24, 72),
        scale: 2,
        max_disparity: 6,
        ..SynthConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let samples = load(&synth_stereo(&synth, dir.path()).unwrap());
    let model = ModelConfig {
        drop_prob: 0.1,
        ..ModelConfig::new(8, 2, 2)
    };
    let tcfg = TrainConfig {
        iters: 8,
        batch: 2,
        patch: Some((8, 16)),
        stride: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let mut straight = Trainer::new(tcfg.clone(), model.clone(), &samples).unwrap();
    for _ in 0..3 {
        straight.step().unwrap();
    }
    let bytes = straight.checkpoint().to_bytes();
    let restored = Checkpoint::<f32>::from_bytes(&bytes, dir.path()).unwrap();
    let stable = restored.to_bytes() == bytes;
    let probe = &samples[0];
    let forward_equal = infer(&model, &restored.params, &probe.lr_l, &probe.lr_r, &PoolingPolicy::Global).unwrap()
        == infer(&model, straight.params(), &probe.lr_l, &probe.lr_r, &PoolingPolicy::Global).unwrap();
    let mut resumed = Trainer::resume(tcfg, restored, &samples).unwrap();
    let mut identical = true;
    for _ in 0..5 {
        let (x, y) = (straight.step().unwrap(), resumed.step().unwrap());
        identical &= x == y;
    }
    identical &= straight.params() == resumed.params();

    let pass = (p - 20.0).abs() < 1e-9 && s == 1.0 && lr0 == 3e-3 && lr_end == 1e-7 && stable && forward_equal && identical;
    verdict(
        "protocol checks",
        pass,
        format!(
            "PSNR {p:.9} dB; SSIM(a,a) {s}; lr endpoints {lr0:e}, {lr_end:e}; checkpoint bytes stable: {stable}; \
             forward bitwise: {forward_equal}; 5 resumed steps identical: {identical}"
        ),
    );
    assert!(pass);
}
