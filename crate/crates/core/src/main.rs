use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use avsr::audio::{read_wav, FramingMode, Waveform, SAMPLE_RATE};
use avsr::corrupt::{babble, mix_at_snr, splice_overlap, OverlapPosition, OverlapSpec, BABBLE_MIN_TALKERS};
use avsr::data::{Featurizer, Framing, Utterance};
use avsr::io::{
    load_checkpoint, prepared_to_container, read_manifest, read_nbest, save_checkpoint, video_to_container, write_atomic,
    write_manifest, write_nbest, write_wav_atomic, Checkpoint, CorruptionRecord, ManifestEntry, NbestLine, ScoreGrid, Split,
};
use avsr::model::{compare_with_reference, count_parameters, GraphemeInventory, ModalitySwitch, ModelConfig, TransducerModel};
use avsr::score::{corpus_wer, tokenize, word_error_rate, CiMethod};
use avsr::train::{
    decode_prepared, generate_toy_corpus, prepare_examples, train, write_metrics_csv, ToyTaskSpec, TrainConfig,
};
use avsr::transducer::BeamConfig;
use avsr::{Error, Result};

#[derive(Parser)]
#[command(name = "avsr", version, about = "Audio-visual RNN transducer speech recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute audio features for every utterance in a manifest.
    Featurize(FeaturizeArgs),
    /// Write a seeded synthetic audio-visual corpus with a manifest.
    MakeToy(MakeToyArgs),
    /// Train a model on the train split, selecting on the held-out split.
    Train(TrainArgs),
    /// Beam-search decode a manifest split to an n-best file.
    Decode(DecodeArgs),
    /// Score n-best files into a condition x mode WER grid.
    Score(ScoreArgs),
    /// Add babble noise or overlapping speech to a manifest's audio.
    Corrupt(CorruptArgs),
    /// Print the per-layer parameter table.
    CountParams(CountParamsArgs),
}

#[derive(Args)]
struct FeatureFlags {
    /// Audio framing: variable (locked to the video frame rate) or fixed (10 ms).
    #[arg(long, default_value = "variable")]
    framing: Framing,
    /// Mel filters per analysis frame.
    #[arg(long, default_value_t = 80)]
    num_filters: usize,
}

impl FeatureFlags {
    fn featurizer(&self) -> Featurizer {
        let mut f = Featurizer {
            framing: self.framing,
            ..Default::default()
        };
        f.audio.num_filters = self.num_filters;
        f
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    features: FeatureFlags,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct MakeToyArgs {
    #[arg(long)]
    out: PathBuf,
    /// Task description (TOML); defaults to the built-in five-symbol task.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 50)]
    heldout: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model configuration (TOML); defaults to the small toy-scale model.
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Output graphemes besides space; defaults to the full inventory.
    #[arg(long)]
    inventory: Option<String>,
    #[command(flatten)]
    features: FeatureFlags,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Output n-best file (utt_id, rank, score, text; tab-separated).
    #[arg(long)]
    out: PathBuf,
    /// train, heldout, test or all.
    #[arg(long, default_value = "test")]
    split: String,
    /// Streams to use: a, v or av.
    #[arg(long, default_value = "av")]
    modality: ModalitySwitch,
    #[arg(long, default_value_t = 4)]
    beam: usize,
    #[arg(long, default_value_t = 10)]
    max_symbols_per_frame: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ScoreArgs {
    /// Manifest holding the reference transcripts.
    #[arg(long)]
    manifest: PathBuf,
    /// Hypotheses as CONDITION:MODE=PATH, repeatable.
    #[arg(long = "hyp", required = true)]
    hyps: Vec<String>,
    /// CSV output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// bootstrap or normal.
    #[arg(long, default_value = "bootstrap")]
    ci: String,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// babble or overlap.
    #[arg(long)]
    kind: String,
    /// Target SNR for babble.
    #[arg(long, default_value_t = 0.0)]
    snr: f64,
    /// Noise recording for babble; synthetic babble when omitted.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = BABBLE_MIN_TALKERS)]
    talkers: usize,
    /// begin or end, for overlap.
    #[arg(long, default_value = "begin")]
    position: String,
    /// Overlap length in seconds.
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    /// train, heldout, test or all.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CountParamsArgs {
    /// Model configuration (TOML); defaults to the full-scale model.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Featurize(a) => featurize(a),
        Command::MakeToy(a) => make_toy(a),
        Command::Train(a) => train_cmd(a),
        Command::Decode(a) => decode(a),
        Command::Score(a) => score(a),
        Command::Corrupt(a) => corrupt(a),
        Command::CountParams(a) => count_params(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn select_split(entries: Vec<ManifestEntry>, split: &str) -> Result<Vec<ManifestEntry>> {
    if split == "all" {
        return Ok(entries);
    }
    let s: Split = split.parse()?;
    Ok(entries.into_iter().filter(|e| e.split == s).collect())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ConfigError(format!("thread pool: {e}")))
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    let (entries, root) = read_manifest(&a.manifest)?;
    if entries.is_empty() {
        eprintln!("warning: manifest {} has no utterances", a.manifest.display());
        return Ok(());
    }
    create_dir(&a.out)?;
    let feat = a.features.featurizer();
    feat.audio.filterbank()?;
    let results: Vec<Result<String>> = pool(a.jobs)?.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let utt = e.load(&root)?;
                let p = feat.prepare_utterance(&utt)?;
                let mode = feat.mode_for(utt.video.as_ref());
                prepared_to_container(&e.utt_id, &p)?.write(&a.out.join(format!("{}.avt", e.utt_id)))?;
                let n = p.timestamps.len();
                let (video, gap, drift) = match &utt.video {
                    Some(v) => {
                        let period = 1.0 / v.fps.as_f64();
                        let t0 = p.timestamps.first().copied().unwrap_or(0.0);
                        let drift = p.timestamps[..n.min(v.num_frames)]
                            .iter()
                            .enumerate()
                            .map(|(k, t)| (t - t0 - k as f64 * period).abs())
                            .fold(0.0, f64::max);
                        (v.num_frames.to_string(), (n as i64 - v.num_frames as i64).to_string(), format!("{:.3}", 1e3 * drift))
                    }
                    None => Default::default(),
                };
                Ok(format!("{},{},{:.4},{n},{video},{gap},{drift}", e.utt_id, mode_name(&mode), mode.output_rate()))
            })
            .collect()
    });
    let mut report = String::from("utt_id,mode,feature_rate_hz,feature_frames,video_frames,frame_gap,max_drift_ms\n");
    let mut failures = 0;
    for (e, r) in entries.iter().zip(&results) {
        match r {
            Ok(line) => {
                report.push_str(line);
                report.push('\n');
            }
            Err(err) => {
                failures += 1;
                eprintln!("{}: {err}", e.utt_id);
            }
        }
    }
    write_atomic(&a.out.join("report.csv"), report.as_bytes())?;
    println!("featurized {} of {} utterances into {}", entries.len() - failures, entries.len(), a.out.display());
    if failures == entries.len() {
        return Err(Error::EmptyInput("every utterance failed to featurize".into()));
    }
    Ok(())
}

fn mode_name(m: &FramingMode) -> String {
    match m {
        FramingMode::Fixed10msDecimate3 => "fixed".into(),
        FramingMode::VariableThirdOfVideoFrame(fps) => format!("variable@{fps}"),
    }
}

fn make_toy(a: MakeToyArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::ConfigError(format!("{}: {e}", p.display())))?,
        None => ToyTaskSpec::default(),
    };
    spec.validate()?;
    for sub in ["audio", "video"] {
        create_dir(&a.out.join(sub))?;
    }
    let mut entries = Vec::new();
    let splits = [(Split::Train, a.train), (Split::Heldout, a.heldout), (Split::Test, a.test)];
    for (k, (split, n)) in splits.into_iter().enumerate() {
        if n == 0 {
            continue;
        }
        let part = spec.split(a.seed.wrapping_mul(3).wrapping_add(k as u64), n);
        for utt in generate_toy_corpus(&part)? {
            let id = format!("{}-{}", split_name(split), utt.id);
            let audio_path = PathBuf::from("audio").join(format!("{id}.wav"));
            let video_path = PathBuf::from("video").join(format!("{id}.avt"));
            write_wav_atomic(&a.out.join(&audio_path), &utt.audio)?;
            let clip = utt.video.as_ref().expect("toy utterances have video");
            video_to_container(clip)?.write(&a.out.join(&video_path))?;
            entries.push(ManifestEntry {
                utt_id: id,
                audio_path,
                video_path: Some(video_path),
                transcript: utt.transcript.clone(),
                video_fps: Some(clip.fps),
                face_meta: None,
                split,
            });
        }
    }
    write_manifest(&a.out.join("manifest.jsonl"), &entries)?;
    let spec_text = toml::to_string(&spec).map_err(|e| Error::ConfigError(e.to_string()))?;
    write_atomic(&a.out.join("toy_spec.toml"), spec_text.as_bytes())?;
    let symbols: String = spec.symbols.iter().map(|s| s.grapheme).collect();
    println!("wrote {} utterances to {} (inventory: {symbols})", entries.len(), a.out.display());
    Ok(())
}

fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Heldout => "heldout",
        Split::Test => "test",
    }
}

fn load_utterances(entries: &[ManifestEntry], root: &Path) -> Result<Vec<Utterance>> {
    entries.iter().map(|e| e.load(root)).collect()
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => TrainConfig::from_toml(&read_text(p)?)?,
        None => TrainConfig::default(),
    };
    let inventory = match &a.inventory {
        Some(s) => GraphemeInventory::from_symbols(s.chars().filter(|c| *c != ' '))?,
        None => GraphemeInventory::default(),
    };
    let featurizer = a.features.featurizer();
    let model_cfg = match &a.model_config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::ConfigError(format!("{}: {e}", p.display())))?,
        None => ModelConfig::toy(featurizer.audio.feature_dim(), inventory.size()),
    };
    let model_cfg: ModelConfig = model_cfg;
    if model_cfg.audio_dim != featurizer.audio.feature_dim() || model_cfg.vocab_size != inventory.size() {
        return Err(Error::ConfigError(format!(
            "model expects {} audio features and {} labels; featurizer gives {}, inventory has {}",
            model_cfg.audio_dim,
            model_cfg.vocab_size,
            featurizer.audio.feature_dim(),
            inventory.size()
        )));
    }
    let (entries, root) = read_manifest(&a.manifest)?;
    let part = |s: Split| entries.iter().filter(|e| e.split == s).cloned().collect::<Vec<_>>();
    let train_set = prepare_examples(&load_utterances(&part(Split::Train), &root)?, &featurizer, &inventory)?;
    let heldout = prepare_examples(&load_utterances(&part(Split::Heldout), &root)?, &featurizer, &inventory)?;
    create_dir(&a.out)?;
    write_atomic(&a.out.join("train_config.toml"), cfg.to_toml().as_bytes())?;

    let mut model = TransducerModel::new(model_cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let outcome = train(&mut model, &train_set, &heldout, &featurizer, &inventory, &cfg, |row| {
        if let Some(w) = row.heldout_wer {
            println!("step {:>6}  loss {:8.4}  lr {:.2e}  held-out WER {w:6.2}%", row.step, row.loss, row.lr);
        }
    })?;
    let mut csv = Vec::new();
    write_metrics_csv(&outcome.history, &mut csv).map_err(|e| Error::io(&a.out, e))?;
    write_atomic(&a.out.join("metrics.csv"), &csv)?;
    let info: BTreeMap<String, String> = [
        ("step".to_string(), outcome.best_step.to_string()),
        ("heldout_wer".to_string(), format!("{:.4}", outcome.best_wer)),
        ("seed".to_string(), cfg.seed.to_string()),
    ]
    .into();
    let ck = Checkpoint {
        model: outcome.best,
        inventory,
        featurizer,
        info,
    };
    save_checkpoint(&a.out.join("best.ckpt"), &ck)?;
    println!("best held-out WER {:.2}% at step {}", outcome.best_wer, outcome.best_step);
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    a.modality.validate()?;
    let ck = load_checkpoint(&a.checkpoint, None)?;
    let (entries, root) = read_manifest(&a.manifest)?;
    let entries = select_split(entries, &a.split)?;
    let beam = BeamConfig {
        beam_width: a.beam,
        max_symbols_per_frame: a.max_symbols_per_frame,
    };
    let results: Vec<Result<(Vec<NbestLine>, Option<avsr::score::WerReport>)>> = pool(a.jobs)?.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let utt = e.load(&root)?;
                let p = ck.featurizer.prepare_utterance(&utt)?;
                let d = decode_prepared(&ck.model, &utt.id, &utt.transcript, &p, a.modality, beam, &ck.inventory)?;
                let lines = d
                    .nbest
                    .iter()
                    .enumerate()
                    .map(|(i, (text, score))| NbestLine {
                        utt_id: utt.id.clone(),
                        rank: i + 1,
                        score: *score,
                        text: text.clone(),
                    })
                    .collect();
                Ok((lines, (!utt.transcript.trim().is_empty()).then_some(d.report)))
            })
            .collect()
    });
    let mut lines = Vec::new();
    let mut reports = Vec::new();
    for r in results {
        let (l, rep) = r?;
        lines.extend(l);
        reports.extend(rep);
    }
    write_nbest(&a.out, &lines)?;
    if let Ok(w) = corpus_wer(&reports, CiMethod::Normal) {
        println!("{} utterances, WER {:.2}% ({} words)", entries.len(), w.wer, w.ref_words);
    } else {
        println!("{} utterances decoded", entries.len());
    }
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let (entries, _) = read_manifest(&a.manifest)?;
    let refs: HashMap<&str, &str> = entries.iter().map(|e| (e.utt_id.as_str(), e.transcript.as_str())).collect();
    let ci = match a.ci.as_str() {
        "bootstrap" => CiMethod::Bootstrap {
            resamples: a.resamples,
            seed: a.seed,
        },
        "normal" => CiMethod::Normal,
        other => return Err(Error::ConfigError(format!("unknown CI method `{other}`"))),
    };
    let mut grid = ScoreGrid::default();
    for spec in &a.hyps {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::ConfigError(format!("--hyp `{spec}` is not CONDITION:MODE=PATH")))?;
        let (condition, mode) = label
            .split_once(':')
            .ok_or_else(|| Error::ConfigError(format!("--hyp `{spec}` is not CONDITION:MODE=PATH")))?;
        let mut best: BTreeMap<String, String> = BTreeMap::new();
        for l in read_nbest(Path::new(path))? {
            if !refs.contains_key(l.utt_id.as_str()) {
                return Err(Error::Manifest(format!("{path}: utterance {} is not in the manifest", l.utt_id)));
            }
            if l.rank == 1 {
                best.insert(l.utt_id, l.text);
            }
        }
        // utterances without a hypothesis count as empty output
        let ids: Vec<&str> = entries
            .iter()
            .filter(|e| best.contains_key(&e.utt_id) || e.split == Split::Test)
            .map(|e| e.utt_id.as_str())
            .collect();
        let reports: Vec<_> = ids
            .iter()
            .map(|id| {
                let hyp = best.get(*id).map_or("", String::as_str);
                word_error_rate(&tokenize(refs[id], true), &tokenize(hyp, true))
            })
            .collect();
        let w = corpus_wer(&reports, ci)?;
        grid.set(condition, mode, w.wer, w.ci_halfwidth_95);
    }
    let csv = grid.to_csv();
    match &a.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn corrupt(a: CorruptArgs) -> Result<()> {
    let (entries, root) = read_manifest(&a.manifest)?;
    let entries = select_split(entries, &a.split)?;
    create_dir(&a.out)?;
    let position = match a.position.as_str() {
        "begin" => OverlapPosition::Begin,
        "end" => OverlapPosition::End,
        other => return Err(Error::ConfigError(format!("unknown overlap position `{other}`"))),
    };
    let noise = a.noise.as_deref().map(read_wav).transpose()?;
    if a.kind != "babble" && a.kind != "overlap" {
        return Err(Error::ConfigError(format!("unknown corruption `{}` (babble or overlap)", a.kind)));
    }
    let out_dir = std::path::absolute(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut records = String::new();
    let mut new_entries = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let speech = read_wav(&e.resolve(&root, &e.audio_path))?;
        let seed = a.seed.wrapping_add(i as u64);
        let mut rec = CorruptionRecord {
            utt_id: e.utt_id.clone(),
            kind: a.kind.clone(),
            snr_db: None,
            source: None,
            position: None,
            duration_s: None,
            gain: 0.0,
            clip_scale: 1.0,
            seed,
        };
        let mixed = if a.kind == "babble" {
            let n: Waveform = match &noise {
                Some(n) => n.clone(),
                None => babble(speech.len().max(1), SAMPLE_RATE, a.talkers, &mut ChaCha8Rng::seed_from_u64(seed))?,
            };
            let m = mix_at_snr(&speech, &n, a.snr)?;
            rec.snr_db = Some(a.snr);
            rec.source = Some(a.noise.as_ref().map_or("synthetic babble".into(), |p| p.display().to_string()));
            (rec.gain, rec.clip_scale) = (m.gain, m.clip_scale);
            m.wave
        } else {
            if entries.len() < 2 {
                return Err(Error::EmptyInput("overlap needs at least two utterances".into()));
            }
            let j = (i + 1 + (seed as usize % (entries.len() - 1))) % entries.len();
            let j = if j == i { (i + 1) % entries.len() } else { j };
            let other = read_wav(&entries[j].resolve(&root, &entries[j].audio_path))?;
            let m = splice_overlap(&speech, &other, OverlapSpec { position, duration: a.duration })?;
            rec.source = Some(entries[j].utt_id.clone());
            rec.position = Some(a.position.clone());
            rec.duration_s = Some(a.duration);
            (rec.gain, rec.clip_scale) = (m.gain, m.clip_scale);
            m.wave
        };
        let audio_path = PathBuf::from(format!("{}.wav", e.utt_id));
        write_wav_atomic(&out_dir.join(&audio_path), &mixed)?;
        let mut ne = e.clone();
        ne.audio_path = audio_path;
        ne.video_path = e.video_path.as_ref().map(|p| {
            let full = e.resolve(&root, p);
            std::path::absolute(&full).unwrap_or(full)
        });
        new_entries.push(ne);
        writeln!(records, "{}", serde_json::to_string(&rec).expect("record serializes")).expect("string write");
    }
    write_manifest(&out_dir.join("manifest.jsonl"), &new_entries)?;
    write_atomic(&out_dir.join("corruption.jsonl"), records.as_bytes())?;
    println!("corrupted {} utterances into {}", new_entries.len(), out_dir.display());
    Ok(())
}

fn count_params(a: CountParamsArgs) -> Result<()> {
    let cfg: ModelConfig = match &a.model_config {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Error::ConfigError(format!("{}: {e}", p.display())))?,
        None => ModelConfig::full_scale(),
    };
    cfg.validate()?;
    let rows = count_parameters(&cfg);
    let cmp = compare_with_reference(&rows);
    println!("{:<14} {:<22} {:>12} {:>8} {:>9} {:>8}", "layer", "shape", "count", "shown", "reference", "diff");
    for c in &cmp {
        let shape = rows.iter().find(|r| r.name == c.name).map_or("", |r| r.shape.as_str());
        if c.name == "Total" {
            continue;
        }
        println!(
            "{:<14} {:<22} {:>12} {:>8} {:>9} {:>8}",
            c.name,
            shape,
            c.count,
            c.formatted,
            c.reference.unwrap_or("-"),
            c.delta.map_or("-".into(), |d| format!("{:.3}%", 100.0 * d))
        );
    }
    let total = cmp.iter().find(|c| c.name == "Total").expect("total row");
    println!(
        "Total {} ({} parameters; reference {}, diff {})",
        total.formatted,
        total.count,
        total.reference.unwrap_or("-"),
        total.delta.map_or("-".into(), |d| format!("{:.3}%", 100.0 * d))
    );
    Ok(())
}
