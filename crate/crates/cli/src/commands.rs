use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use storyprior::codec::{parse, shot_cap, synopsis_prefix};
use storyprior::eval::{
    decoding_success_rate, fid, layout_encoding, perplexity, rouge_l_mean, success_over_texts, EvalReport,
    LayoutFeatureExtractor, SuccessReport,
};
use storyprior::ingest::{generate_synthetic, load_file, load_manifest, save, Dataset};
use storyprior::io::write_atomic;
use storyprior::lm::{
    encode_corpus, instruction_prefix, instruction_text, sample as lm_sample, train as lm_train, Checkpoint, Model,
};
use storyprior::render::{render_shot, RenderStyle};
use storyprior::{build_vocabulary, validate as validate_board, KeypointScheme, Storyboard, Synopsis, Vocabulary};

use crate::config::RunConfig;
use crate::SampleMode;

fn hex_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s.as_bytes())
}

fn sidecar(out: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".errors.json");
        out.with_file_name(name)
    })
}

/// Records from a manifest (`.txt`) or a record file.
fn load_boards(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "txt") {
        return Ok(load_manifest(path)?);
    }
    let mut ds = Dataset::default();
    for (sb, origin) in load_file(path)? {
        ds.storyboards.push(sb);
        ds.origins.push(origin);
        ds.tags.push(None);
    }
    Ok(ds)
}

fn lines(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

fn join_lines<S: AsRef<str>>(items: &[S]) -> String {
    let mut out = String::new();
    for l in items {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    out
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::from_json(&read(path)?).with_context(|| format!("parsing vocabulary {}", path.display()))
}

fn load_model(checkpoint: &Path, vocab: &Vocabulary) -> Result<Model<f32>> {
    let ck = Checkpoint::<f32>::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    ck.check_vocab(&vocab.digest())?;
    if ck.model.config.vocab_size != vocab.len() {
        bail!(
            "checkpoint vocabulary size {} differs from vocabulary {}",
            ck.model.config.vocab_size,
            vocab.len()
        );
    }
    Ok(ck.model)
}

pub fn gen_synthetic(cfg: &RunConfig, out: &Path, count: Option<usize>, seed: Option<u64>) -> Result<u8> {
    let mut s = cfg.synthetic_config();
    if let Some(c) = count {
        s.count = c;
    }
    if let Some(v) = seed {
        s.seed = v;
    }
    let boards = generate_synthetic(&s).map_err(|e| anyhow::anyhow!("synthetic config: {e}"))?;
    save(out, &boards)?;
    info!("wrote {} storyboards to {}", boards.len(), out.display());
    Ok(0)
}

pub fn validate(input: &Path) -> Result<u8> {
    let ds = load_boards(input)?;
    let bad = ds.violations();
    for (i, report) in &bad {
        for v in &report.violations {
            println!("{} ({}): {:?} at {}: {}", ds.storyboards[*i].id, ds.origins[*i], v.kind, v.path, v.message);
        }
    }
    println!("{} storyboards, {} invalid", ds.storyboards.len(), bad.len());
    Ok(if bad.is_empty() { 0 } else { 1 })
}

#[derive(Serialize)]
struct RecordError {
    index: usize,
    id: String,
    origin: String,
    message: String,
}

pub fn encode(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    vocab_out: Option<&Path>,
    errors: Option<&Path>,
) -> Result<u8> {
    let ds = load_boards(input)?;
    let scfg = cfg.serializer_config();
    let corpus = encode_corpus(
        &ds.storyboards,
        &cfg.quantizer,
        &scfg,
        cfg.corpus.instruction_weight,
        cfg.corpus.instruction_slot,
        cfg.seed,
    );
    let texts: Vec<&str> = corpus.sequences.iter().map(|s| s.text.as_str()).collect();
    write(out, join_lines(&texts).as_bytes())?;
    let errs: Vec<RecordError> = corpus
        .errors
        .iter()
        .map(|(i, m)| RecordError {
            index: *i,
            id: ds.storyboards[*i].id.clone(),
            origin: ds.origins[*i].to_string(),
            message: m.clone(),
        })
        .collect();
    write_json(&sidecar(out, errors), &errs)?;
    if let Some(v) = vocab_out {
        let vocab = build_vocabulary(&corpus.sequences, cfg.corpus.min_count, cfg.quantizer.bins)?;
        write(v, vocab.to_json().as_bytes())?;
        info!("vocabulary of {} words, digest {}", vocab.len(), vocab.digest());
    }
    info!("encoded {} sequences, {} failures", corpus.sequences.len(), errs.len());
    for e in &errs {
        warn!("{} ({}): {}", e.id, e.origin, e.message);
    }
    Ok(if errs.is_empty() { 0 } else { 1 })
}

#[derive(Serialize)]
struct DecodeError {
    line: usize,
    kind: String,
    position: usize,
    offset: usize,
    message: String,
}

pub fn decode(cfg: &RunConfig, input: &Path, out: &Path, errors: Option<&Path>) -> Result<u8> {
    let text = read(input)?;
    let mut boards = Vec::new();
    let mut errs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse(line, &cfg.quantizer) {
            Ok(mut sb) => {
                sb.id = format!("decoded-{}", i + 1);
                boards.push(sb);
            }
            Err(e) => errs.push(DecodeError {
                line: i + 1,
                kind: e.kind.as_str().to_string(),
                position: e.position,
                offset: e.offset,
                message: e.message,
            }),
        }
    }
    save(out, &boards)?;
    write_json(&sidecar(out, errors), &errs)?;
    for e in &errs {
        warn!("line {}: {} at token {}: {}", e.line, e.kind, e.position, e.message);
    }
    info!("decoded {} storyboards, {} failures", boards.len(), errs.len());
    Ok(if errs.is_empty() { 0 } else { 1 })
}

fn encode_lines(vocab: &Vocabulary, texts: &[String], context: usize) -> Result<Vec<Vec<u32>>> {
    let mut unknown = 0;
    let mut out = Vec::with_capacity(texts.len());
    for (i, t) in texts.iter().enumerate() {
        let ids = vocab.encode(t).ids;
        if ids.len() > context {
            bail!("sequence {} has {} tokens, context window is {}", i + 1, ids.len(), context);
        }
        unknown += ids.iter().filter(|&&x| x == vocab.unk_id()).count();
        out.push(ids);
    }
    if unknown > 0 {
        warn!("{unknown} out-of-vocabulary words mapped to <unk>");
    }
    Ok(out)
}

pub fn train(cfg: &RunConfig, corpus: &Path, vocab_path: &Path, out_dir: &Path) -> Result<u8> {
    let vocab = load_vocab(vocab_path)?;
    let mcfg = cfg.model.with_vocab(vocab.len());
    let texts = lines(corpus)?;
    let data = encode_lines(&vocab, &texts, mcfg.context)?;
    let tcfg = cfg.train_config();
    let mut model: Model<f32> = Model::with_init_std(mcfg, cfg.model.init_std, tcfg.seed)?;
    info!(
        "training {} parameters on {} sequences for {} iterations",
        model.params.scalar_count(),
        data.len(),
        tcfg.total_iterations
    );
    let every = cfg.train.checkpoint_every;
    let digest = vocab.digest();
    let mut periodic_err = None;
    let curve = lm_train(&mut model, &data, &tcfg, |rec, m| {
        if rec.iteration % 100 == 0 {
            info!("iteration {} loss {:.5} lr {:.3e}", rec.iteration, rec.loss, rec.lr);
        }
        if every > 0 && (rec.iteration + 1) % every == 0 && periodic_err.is_none() {
            let ck = Checkpoint {
                model: m.clone(),
                vocab_digest: digest.clone(),
            };
            if let Err(e) = ck.save(&out_dir.join(format!("model-{}.ckpt", rec.iteration + 1))) {
                periodic_err = Some(e);
            }
        }
    })?;
    if let Some(e) = periodic_err {
        return Err(e.into());
    }
    let mut csv = String::from("iteration,loss,lr\n");
    for r in &curve {
        writeln!(csv, "{},{},{}", r.iteration, r.loss, r.lr).unwrap();
    }
    write(&out_dir.join("loss.csv"), csv.as_bytes())?;
    let ck = Checkpoint {
        model,
        vocab_digest: digest,
    };
    let path = out_dir.join("model.ckpt");
    ck.save(&path)?;
    let bytes = std::fs::read(&path)?;
    println!("{}  {}", hex_digest(&bytes), path.display());
    Ok(0)
}

pub struct SampleArgs<'a> {
    pub checkpoint: &'a Path,
    pub vocab: &'a Path,
    pub mode: SampleMode,
    pub n: usize,
    pub out: &'a Path,
    pub synopses: &'a [String],
    pub instructions: &'a [String],
    pub from: Option<&'a Path>,
}

fn prefixes(cfg: &RunConfig, a: &SampleArgs) -> Result<Vec<String>> {
    let start = "<start>".to_string();
    let boards = match a.from {
        Some(p) => load_boards(p)?.storyboards,
        None => Vec::new(),
    };
    let scfg = cfg.serializer_config();
    let out = match a.mode {
        SampleMode::Unconditional => vec![start],
        SampleMode::Synopsis if !a.synopses.is_empty() => a
            .synopses
            .iter()
            .map(|t| synopsis_prefix(&Synopsis::condensed(t.as_str()), 1))
            .collect(),
        SampleMode::Synopsis => boards
            .iter()
            .map(|sb| synopsis_prefix(&sb.synopsis, shot_cap(sb, &scfg)))
            .collect(),
        SampleMode::Instruction if !a.instructions.is_empty() => {
            a.instructions.iter().map(|t| instruction_prefix(t)).collect()
        }
        SampleMode::Instruction => boards
            .iter()
            .filter_map(|sb| sb.summative.as_ref())
            .filter_map(|s| instruction_text(s, cfg.corpus.instruction_slot).ok())
            .map(|t| instruction_prefix(&t))
            .collect(),
    };
    if out.is_empty() {
        bail!("mode {:?} needs --synopsis/--instruction or --from records", a.mode);
    }
    Ok(out)
}

pub fn sample(cfg: &RunConfig, a: SampleArgs) -> Result<u8> {
    let vocab = load_vocab(a.vocab)?;
    let model = load_model(a.checkpoint, &vocab)?;
    let pre = prefixes(cfg, &a)?;
    let base = cfg.sampler_config();
    let mut texts = Vec::with_capacity(a.n);
    for i in 0..a.n {
        let scfg = storyprior::SamplerConfig {
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let prefix = vocab.encode(&pre[i % pre.len()]).ids;
        let g = lm_sample(&model, &prefix, &scfg, vocab.end_id())?;
        texts.push(vocab.detokenize(&g.tokens));
    }
    write(a.out, join_lines(&texts).as_bytes())?;
    info!("wrote {} samples (sampler {})", texts.len(), base.digest());
    Ok(0)
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub vocab: &'a Path,
    pub corpus: Option<&'a Path>,
    pub references: Option<&'a Path>,
    pub sequences: Option<&'a Path>,
    pub extractor: Option<&'a Path>,
    pub out: &'a Path,
}

fn scene_label(sb: &Storyboard) -> String {
    sb.summative
        .as_ref()
        .map(|s| s.scene.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn eval(cfg: &RunConfig, a: EvalArgs) -> Result<u8> {
    let vocab = load_vocab(a.vocab)?;
    let model = load_model(a.checkpoint, &vocab)?;
    let scfg = cfg.sampler_config();

    let ppl = match a.corpus {
        Some(p) => {
            let data = encode_lines(&vocab, &lines(p)?, model.config.context)?;
            Some(perplexity(&model, &data)?)
        }
        None => None,
    };

    let (success, texts): (SuccessReport, Vec<String>) = match a.sequences {
        Some(p) => {
            let t = lines(p)?;
            (success_over_texts(t.iter().map(String::as_str), &cfg.quantizer)?, t)
        }
        None => decoding_success_rate(
            &model,
            &vocab,
            &[vocab.start_id()],
            cfg.eval.n_samples,
            &scfg,
            &cfg.quantizer,
        )?,
    };
    let decoded: Vec<Storyboard> = texts
        .iter()
        .filter_map(|t| parse(t, &cfg.quantizer).ok())
        .collect();

    let references = match a.references {
        Some(p) => load_boards(p)?.storyboards,
        None => Vec::new(),
    };

    let mut fid_value = None;
    if !references.is_empty() && decoded.len() >= 2 && references.len() >= 2 {
        let extractor: LayoutFeatureExtractor<f32> = match a.extractor {
            Some(p) => LayoutFeatureExtractor::from_json(&read(p)?)?,
            None => {
                let data: Vec<(Vec<f64>, String)> = references
                    .iter()
                    .map(|sb| (layout_encoding(sb), scene_label(sb)))
                    .collect();
                LayoutFeatureExtractor::fit(&data, &cfg.eval.extractor)?
            }
        };
        let fa: Vec<Vec<f64>> = references.iter().map(|sb| extractor.features(&layout_encoding(sb))).collect();
        let fb: Vec<Vec<f64>> = decoded.iter().map(|sb| extractor.features(&layout_encoding(sb))).collect();
        fid_value = Some(fid(&fa, &fb)?);
    } else if a.references.is_some() {
        warn!("FID skipped: needs at least two references and two decodable samples");
    }

    let mut rouge = None;
    if cfg.eval.rouge_samples > 0 {
        let mut pairs = Vec::new();
        for (i, sb) in references
            .iter()
            .filter(|sb| {
                sb.summative
                    .as_ref()
                    .is_some_and(|s| instruction_text(s, cfg.corpus.instruction_slot).is_ok())
            })
            .take(cfg.eval.rouge_samples)
            .enumerate()
        {
            let instr = instruction_text(sb.summative.as_ref().unwrap(), cfg.corpus.instruction_slot)?;
            let prefix = vocab.encode(&instruction_prefix(&instr)).ids;
            let s = storyprior::SamplerConfig {
                seed: scfg.seed.wrapping_add(i as u64),
                ..scfg.clone()
            };
            let g = lm_sample(&model, &prefix, &s, vocab.end_id())?;
            let candidate = parse(&vocab.detokenize(&g.tokens), &cfg.quantizer)
                .map(|b| b.synopsis.texts.join(" "))
                .unwrap_or_default();
            pairs.push((candidate, sb.synopsis.texts.join(" ")));
        }
        rouge = rouge_l_mean(pairs.iter().map(|(c, r)| (c.as_str(), r.as_str())));
    }

    let report = EvalReport {
        perplexity: ppl,
        rouge_l: rouge,
        fid: fid_value,
        decoding_success_rate: Some(success.rate),
        n_samples: success.n,
        sampler_config_digest: scfg.digest(),
    };
    if !report.is_consistent() {
        bail!("inconsistent report: {report:?}");
    }
    write(a.out, report.to_json().as_bytes())?;
    let mut name = a.out.file_name().unwrap_or_default().to_os_string();
    name.push(".decoding.json");
    write_json(&a.out.with_file_name(name), &success)?;
    print!("{}", report.to_json());
    Ok(0)
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn render(input: &Path, out_dir: &Path) -> Result<u8> {
    let ds = load_boards(input)?;
    let scheme = KeypointScheme::default();
    let style = RenderStyle::default();
    let mut n = 0;
    for (bi, sb) in ds.storyboards.iter().enumerate() {
        if !validate_board(sb).is_valid() {
            warn!("{} fails validation; rendering anyway", sb.id);
        }
        for (si, shot) in sb.shots.iter().enumerate() {
            let svg = render_shot(shot, &scheme, &style);
            let path = out_dir.join(format!("{:04}-{}-shot{}.svg", bi, file_stem(&sb.id), si + 1));
            write(&path, svg.as_bytes())?;
            n += 1;
        }
    }
    info!("wrote {n} SVG files to {}", out_dir.display());
    Ok(0)
}
