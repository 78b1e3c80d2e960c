//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use storyprior::codec::{dequantize, parse, quantize, serialize, synopsis_prefix_len};
use storyprior::eval::{decoding_success_rate, fid, lcs_len, perplexity, rouge_l, success_over_texts};
use storyprior::ingest::{generate_synthetic, SyntheticConfig};
use storyprior::lm::{greedy, train, Model, ModelConfig, PAD_ID};
use storyprior::{
    build_vocabulary, validate, PromptSequence, QuantizerConfig, SamplerConfig, SerializerConfig, TrainConfig,
    Vocabulary,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Small boards: one or two shots, at most two characters.
fn compact(seed: u64, count: usize) -> SyntheticConfig {
    SyntheticConfig {
        seed,
        count,
        keypoint_rate: 0.5,
        keypoint_shot_weights: vec![1.0, 1.0],
        box_only_shot_weights: vec![1.0, 1.0],
        max_cast: 2,
        max_characters_per_shot: 2,
        max_film_sets_per_shot: 1,
        tier_weights: [0.5, 0.35, 0.15],
        ..Default::default()
    }
}

struct Corpus {
    texts: Vec<PromptSequence>,
    ids: Vec<Vec<u32>>,
    vocab: Vocabulary,
}

fn corpus(cfg: &SyntheticConfig) -> Corpus {
    let q = QuantizerConfig::default();
    let s = SerializerConfig::default();
    let boards = generate_synthetic(cfg).unwrap();
    let texts: Vec<PromptSequence> = boards.iter().map(|b| serialize(b, &q, &s).unwrap()).collect();
    let vocab = build_vocabulary(&texts, 1, q.bins).unwrap();
    let ids = texts.iter().map(|t| vocab.tokenize(t).ids).collect();
    Corpus { texts, ids, vocab }
}

fn codec_round_trip() -> Outcome {
    let t = Instant::now();
    let q = QuantizerConfig::default();
    let s = SerializerConfig::default();
    let boards = generate_synthetic(&SyntheticConfig {
        seed: 0,
        count: 200,
        ..Default::default()
    })
    .unwrap();
    let mut failures = 0;
    for sb in &boards {
        let text = serialize(sb, &q, &s).unwrap();
        let same = match parse(&text.text, &q) {
            Ok(p) => {
                validate(&p).is_valid()
                    && serialize(&p, &q, &s).is_ok_and(|again| again.lexemes() == text.lexemes())
            }
            Err(_) => false,
        };
        if !same {
            failures += 1;
        }
    }
    let elapsed = t.elapsed();
    check(
        failures == 0 && elapsed < Duration::from_secs(30),
        format!("{} storyboards, {failures} failures, {:.2}s", boards.len(), elapsed.as_secs_f64()),
    )
}

fn quantization() -> Outcome {
    let q = QuantizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut worst = 0.0f64;
    let extent = q.canvas;
    let mut values: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.0..=extent)).collect();
    values.sort_by(f64::total_cmp);
    let mut prev = 0;
    for &v in &values {
        let bin = quantize(v, extent, &q).unwrap();
        if bin < prev {
            violations += 1;
        }
        prev = bin;
        let err = (dequantize::<f64>(bin, extent, &q).unwrap() - v).abs();
        worst = worst.max(err);
        if err > extent / q.bins as f64 {
            violations += 1;
        }
    }
    check(
        violations == 0,
        format!("10000 coordinates, {violations} violations, max error {worst:.4}"),
    )
}

fn budgets() -> Outcome {
    let q = QuantizerConfig::default();
    let s = SerializerConfig::default();
    let boards = generate_synthetic(&SyntheticConfig {
        seed: 1,
        count: 500,
        ..Default::default()
    })
    .unwrap();
    let mut violations = 0;
    let mut capped = 0;
    let mut longest = 0;
    for sb in &boards {
        let text = serialize(sb, &q, &s).unwrap();
        let parsed = parse(&text.text, &q).unwrap();
        let keypoints = parsed.shots.iter().flat_map(|s| &s.characters).any(|c| c.keypoints.is_some());
        let cap = if keypoints { 4 } else { 10 };
        if parsed.shots.len() > cap {
            violations += 1;
        }
        if parsed.shots.len() < sb.shots.len() {
            capped += 1;
        }
        longest = longest.max(text.token_count());
        if text.token_count() > 2560 {
            violations += 1;
        }
    }
    check(
        violations == 0 && capped > 0,
        format!(
            "{} storyboards, {capped} truncated by the shot cap, longest {longest} tokens, {violations} violations",
            boards.len()
        ),
    )
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let cfg = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_ff: 32,
        context: 24,
        vocab_size: 23,
        dropout: 0.0,
    };
    let mut m: Model<f64> = Model::with_init_std(cfg, 0.3, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a: Vec<u32> = (0..20).map(|_| rng.gen_range(1..23)).collect();
    let mut b: Vec<u32> = (0..12).map(|_| rng.gen_range(1..23)).collect();
    b.extend([PAD_ID, PAD_ID]);
    let batch: [&[u32]; 2] = [&a, &b];
    let (_, g) = m.loss_and_grad(&batch, None).unwrap();
    let loss = |m: &Model<f64>| {
        let (s0, c0) = m.nll_sum(&a).unwrap();
        let (s1, c1) = m.nll_sum(&b).unwrap();
        (s0 + s1) / (c0 + c1) as f64
    };
    let total = m.params.scalar_count();
    let eps = 1e-5;
    let n = 64;
    let mut worst = 0.0f64;
    let mut bad = 0;
    for _ in 0..n {
        let idx = rng.gen_range(0..total);
        let orig = m.params.get_flat(idx);
        m.params.set_flat(idx, orig + eps);
        let up = loss(&m);
        m.params.set_flat(idx, orig - eps);
        let down = loss(&m);
        m.params.set_flat(idx, orig);
        let fd = (up - down) / (2.0 * eps);
        let an = g.get_flat(idx);
        let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-8);
        worst = worst.max(rel);
        if rel >= 1e-4 {
            bad += 1;
        }
    }
    let elapsed = t.elapsed();
    check(
        bad == 0 && elapsed < Duration::from_secs(120),
        format!(
            "{n} of {total} parameters, max relative error {worst:.2e}, {bad} above 1e-4, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn causality() -> Outcome {
    let cfg = ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 32,
        d_ff: 64,
        context: 64,
        vocab_size: 50,
        dropout: 0.0,
    };
    let m: Model<f32> = Model::new(cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..100 {
        let len_a = rng.gen_range(2..=64);
        let i = rng.gen_range(0..len_a - 1);
        let a: Vec<u32> = (0..len_a).map(|_| rng.gen_range(1..50)).collect();
        let len_b = rng.gen_range(i + 2..=64);
        let mut b = a[..=i].to_vec();
        while b.len() < len_b {
            let mut t = rng.gen_range(1..50);
            if b.len() == i + 1 && a.get(i + 1) == Some(&t) {
                t = t % 49 + 1;
            }
            b.push(t);
        }
        let la = m.forward(&a).unwrap();
        let lb = m.forward(&b).unwrap();
        for p in 0..=i {
            let same = la.row(p).iter().zip(lb.row(p)).all(|(x, y)| x.to_bits() == y.to_bits());
            if !same {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("100 prefix pairs, {mismatches} mismatching positions"))
}

fn overfit(shared: &mut Option<(Model<f32>, Corpus)>) -> Outcome {
    let t = Instant::now();
    let c = corpus(&compact(6, 32));
    let mut m: Model<f32> = Model::new(ModelConfig::tiny(c.vocab.len()), 6).unwrap();
    let tc = TrainConfig {
        lr_max: 3e-3,
        lr_min: 3e-4,
        total_iterations: 600,
        batch_size: 8,
        seed: 6,
        ..Default::default()
    };
    train(&mut m, &c.ids, &tc, |_, _| {}).map_err(|e| e.to_string())?;
    let ppl = perplexity(&m, &c.ids).map_err(|e| e.to_string())?;
    let mut reproduced = 0;
    for (text, ids) in c.texts.iter().zip(&c.ids) {
        let n = synopsis_prefix_len(&text.text).ok_or("no synopsis prefix")?;
        let g = greedy(&m, &ids[..n], m.config.context - n, c.vocab.end_id()).map_err(|e| e.to_string())?;
        if g.tokens == *ids {
            reproduced += 1;
        }
    }
    let elapsed = t.elapsed();
    let detail = format!(
        "training perplexity {ppl:.4}, greedy reproduces {reproduced}/32, {:.0}s",
        elapsed.as_secs_f64()
    );
    *shared = Some((m, c));
    check(ppl < 1.1 && reproduced >= 30 && elapsed < Duration::from_secs(900), detail)
}

fn decoding_success(shared: &Option<(Model<f32>, Corpus)>) -> Outcome {
    let (m, c) = shared.as_ref().ok_or("overfit model unavailable")?;
    let q = QuantizerConfig::default();
    let cfg = SamplerConfig {
        temperature: 0.8,
        seed: 7,
        ..Default::default()
    };
    let (report, _) = decoding_success_rate(m, &c.vocab, &[c.vocab.start_id()], 200, &cfg, &q)
        .map_err(|e| e.to_string())?;
    let replay_texts: Vec<String> = c.ids.iter().map(|ids| c.vocab.detokenize(ids)).collect();
    let replay = success_over_texts(replay_texts.iter().map(String::as_str), &q).map_err(|e| e.to_string())?;
    let big = corpus(&SyntheticConfig {
        seed: 7,
        count: 200,
        ..Default::default()
    });
    let big_replay = success_over_texts(big.texts.iter().map(|t| t.text.as_str()), &q).map_err(|e| e.to_string())?;
    check(
        report.rate >= 0.9 && replay.rate == 1.0 && big_replay.rate == 1.0,
        format!(
            "sampled rate {:.3} over {} samples, ground-truth replay {:.1} ({} + {} sequences)",
            report.rate, report.n, replay.rate, replay.n, big_replay.n
        ),
    )
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], std: &[f64]) -> Vec<Vec<f64>> {
    let dists: Vec<Normal<f64>> = mean.iter().zip(std).map(|(&m, &s)| Normal::new(m, s).unwrap()).collect();
    (0..n).map(|_| dists.iter().map(|d| d.sample(rng)).collect()).collect()
}

fn fid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 10_000;
    let a = gaussian(&mut rng, n, &[0.0], &[1.0]);
    let mut notes = Vec::new();
    let mut ok = true;
    for (mean, std) in [(3.0, 1.0), (0.0, 2.0), (-1.5, 0.5)] {
        let b = gaussian(&mut rng, n, &[mean], &[std]);
        let expected = mean * mean + (1.0f64 - std).powi(2);
        let got = fid(&a, &b).map_err(|e| e.to_string())?;
        let back = fid(&b, &a).map_err(|e| e.to_string())?;
        ok &= (got - expected).abs() <= 0.5 && (got - back).abs() < 1e-9 * got.max(1.0);
        notes.push(format!("N({mean},{}) {got:.3} vs {expected:.3}", std * std));
    }
    let ma = [0.5, -1.0, 2.0];
    let sa = [1.0, 0.5, 2.0];
    let mb = [0.0, 1.0, 2.5];
    let sb = [1.5, 0.5, 1.0];
    let x = gaussian(&mut rng, n, &ma, &sa);
    let y = gaussian(&mut rng, n, &mb, &sb);
    let expected: f64 = (0..3).map(|k| (ma[k] - mb[k]).powi(2) + (sa[k] - sb[k]).powi(2)).sum();
    let got = fid(&x, &y).map_err(|e| e.to_string())?;
    ok &= (got - expected).abs() <= 0.5;
    notes.push(format!("3-D diagonal {got:.3} vs {expected:.3}"));
    let self_fid = fid(&a, &a).map_err(|e| e.to_string())?;
    ok &= self_fid.abs() < 1e-6;
    notes.push(format!("fid(A,A) {self_fid:.1e}"));
    let mut prev = self_fid;
    let mut shifts = Vec::new();
    for d in [0.5, 1.0, 2.0] {
        let shifted: Vec<Vec<f64>> = a.iter().map(|v| vec![v[0] + d]).collect();
        let f = fid(&a, &shifted).map_err(|e| e.to_string())?;
        ok &= f > prev;
        prev = f;
        shifts.push(format!("{f:.3}"));
    }
    notes.push(format!("shifts 0.5/1/2 give {}", shifts.join(" < ")));
    check(ok, notes.join(", "))
}

/// Full-table LCS.
fn lcs_table(a: &[&str], b: &[&str]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn log_softmax_at(row: &[f64], k: usize) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|x| (x - max).exp()).sum::<f64>().ln() + max;
    row[k] - lse
}

fn text_and_perplexity_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let words = ["the", "man", "opens", "a", "door", "she", "runs", "to", "car", "."];
    let mut mismatches = 0;
    for _ in 0..100 {
        let sentence = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            let n = rng.gen_range(0..25);
            (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect()
        };
        let c = sentence(&mut rng);
        let r = sentence(&mut rng);
        let l = lcs_table(&c, &r);
        let prf = rouge_l(&c.join(" "), &r.join(" "));
        let (p, rc) = if l == 0 {
            (0.0, 0.0)
        } else {
            (l as f64 / c.len() as f64, l as f64 / r.len() as f64)
        };
        let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
        let agree = lcs_len(&c, &r) == l
            && (prf.precision - p).abs() < 1e-12
            && (prf.recall - rc).abs() < 1e-12
            && (prf.f1 - f).abs() < 1e-12;
        if !agree {
            mismatches += 1;
        }
    }

    let cfg = ModelConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 16,
        d_ff: 32,
        context: 40,
        vocab_size: 30,
        dropout: 0.0,
    };
    let m: Model<f64> = Model::with_init_std(cfg, 0.5, 9).unwrap();
    let seqs: Vec<Vec<u32>> = (0..6)
        .map(|k| {
            let mut s: Vec<u32> = (0..rng.gen_range(3..30)).map(|_| rng.gen_range(1..30)).collect();
            if k % 2 == 0 {
                s.extend([PAD_ID, PAD_ID]);
            }
            s
        })
        .collect();
    let mut nll = 0.0;
    let mut count = 0usize;
    for s in &seqs {
        let logits = m.forward(s).unwrap();
        for t in 0..s.len() - 1 {
            if s[t + 1] == PAD_ID {
                continue;
            }
            nll -= log_softmax_at(logits.row(t), s[t + 1] as usize);
            count += 1;
        }
    }
    let expected = (nll / count as f64).exp();
    let got = perplexity(&m, &seqs).map_err(|e| e.to_string())?;
    let rel = (got - expected).abs() / expected;
    check(
        mismatches == 0 && rel < 1e-9,
        format!("100 Rouge-L pairs, {mismatches} disagreements; perplexity relative error {rel:.1e}"),
    )
}

fn scaling() -> Outcome {
    let t = Instant::now();
    let c = corpus(&compact(3, 1024 + 64));
    let (train_ids, val_ids) = c.ids.split_at(1024);
    let mut ppls = Vec::new();
    for (n_layers, d_model) in [(1, 32), (2, 64), (2, 128)] {
        let cfg = ModelConfig {
            n_layers,
            n_heads: 4,
            d_model,
            d_ff: 4 * d_model,
            context: 2560,
            vocab_size: c.vocab.len(),
            dropout: 0.0,
        };
        let mut m: Model<f32> = Model::new(cfg, 1).unwrap();
        let tc = TrainConfig {
            lr_max: 1e-3,
            lr_min: 1e-4,
            total_iterations: 300,
            batch_size: 8,
            seed: 1,
            ..Default::default()
        };
        train(&mut m, train_ids, &tc, |_, _| {}).map_err(|e| e.to_string())?;
        ppls.push(perplexity(&m, val_ids).map_err(|e| e.to_string())?);
    }
    let elapsed = t.elapsed();
    check(
        ppls.windows(2).all(|w| w[1] <= w[0]) && elapsed < Duration::from_secs(1800),
        format!(
            "validation perplexity {} for d_model 32/64/128, {:.0}s",
            ppls.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(" / "),
            elapsed.as_secs_f64()
        ),
    )
}

const PIPELINE: &str = r#"
seed = 21

[corpus]
instruction_weight = 0.25

[model]
n_layers = 1
n_heads = 2
d_model = 32
d_ff = 64
context = 2560

[train]
lr_max = 3e-3
lr_min = 3e-4
total_iterations = 20
batch_size = 4

[sampler]
temperature = 0.9
max_new_tokens = 200

[eval]
n_samples = 6
rouge_samples = 3

[synthetic]
count = 24
"#;

fn pipeline(dir: &Path) -> Result<Vec<(String, String)>, String> {
    std::fs::write(dir.join("run.toml"), PIPELINE).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 6] = [
        &["gen-synthetic", "--out", "boards.jsonl"],
        &["encode", "--input", "boards.jsonl", "--out", "corpus.txt", "--vocab-out", "vocab.json"],
        &["train", "--corpus", "corpus.txt", "--vocab", "vocab.json", "--out-dir", "run"],
        &[
            "sample", "--checkpoint", "run/model.ckpt", "--vocab", "vocab.json", "--mode", "instruction", "--from",
            "boards.jsonl", "--n", "4", "--out", "samples.txt",
        ],
        &[
            "eval", "--checkpoint", "run/model.ckpt", "--vocab", "vocab.json", "--corpus", "corpus.txt",
            "--references", "boards.jsonl", "--out", "report.json",
        ],
        &["render", "--input", "boards.jsonl", "--out-dir", "svg"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_storyprior"))
            .current_dir(dir)
            .env("RUST_LOG", "warn")
            .args(["--config", "run.toml"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest: String = Sha256::digest(std::fs::read(&p).map_err(|e| e.to_string())?)
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect();
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((name, digest));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let required = ["boards.jsonl", "corpus.txt", "vocab.json", "run/model.ckpt", "samples.txt", "report.json"];
    let present = required.iter().all(|r| fa.iter().any(|(n, _)| n == r));
    check(
        fa.len() == fb.len() && differing.is_empty() && present,
        format!(
            "{} artifacts compared across two runs, {} differ{}",
            fa.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let shared = std::cell::RefCell::new(None);
    type Criterion<'a> = (&'a str, Box<dyn FnMut() -> Outcome + 'a>);
    let mut criteria: Vec<Criterion> = vec![
        ("codec round-trip", Box::new(codec_round_trip)),
        ("quantization", Box::new(quantization)),
        ("budget enforcement", Box::new(budgets)),
        ("gradient check", Box::new(gradient_check)),
        ("causality", Box::new(causality)),
        ("overfit", Box::new(|| overfit(&mut shared.borrow_mut()))),
        ("decoding success rate", Box::new(|| decoding_success(&shared.borrow()))),
        ("FID oracle", Box::new(fid_oracle)),
        ("Rouge-L and perplexity oracles", Box::new(text_and_perplexity_oracles)),
        ("model scaling", Box::new(scaling)),
        ("CLI determinism", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (i, (name, run)) in criteria.iter_mut().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
