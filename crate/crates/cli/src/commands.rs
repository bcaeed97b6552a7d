use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use adams::corpus::{load_dictionary, load_targets, synthesize_corpus, AttackedSet, Dictionary, LoadStats, SynthSpec};
use adams::engine::{run_attack, AttackConfig, AttackReport};
use adams::eval::{bench, beta_success_rate, compare_runs, fmt_float, rule_hit_histogram, rule_selection_frequency};
use adams::labels::{generate_labels, TrainingSet};
use adams::model::{train, AlphaMode, CompatScorer, ModelConfig, TrainConfig};
use adams::rules::{parse_ruleset, RuleSet};
use adams::CompatModelF32;
use anyhow::{Context, Result};

use crate::args::{AttackArgs, BenchArgs, EvalArgs, ExportArgs, LabelArgs, SynthArgs, TrainArgs};
use crate::manifest::{now, RunManifest};

/// A semantically invalid flag combination; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn note_drops(path: &Path, stats: &LoadStats) {
    if stats.dropped() > 0 || stats.duplicates > 0 {
        eprintln!(
            "{}: kept {}, dropped {} non-ASCII and {} overlong lines, {} duplicates",
            path.display(),
            stats.accepted,
            stats.dropped_non_ascii,
            stats.dropped_length,
            stats.duplicates
        );
    }
}

fn read_dict(path: &Path) -> Result<Dictionary> {
    let (d, stats) = load_dictionary(path).with_context(|| format!("loading dictionary {}", path.display()))?;
    note_drops(path, &stats);
    Ok(d)
}

fn read_targets(path: &Path) -> Result<AttackedSet> {
    let (t, stats) = load_targets(path).with_context(|| format!("loading targets {}", path.display()))?;
    note_drops(path, &stats);
    Ok(t)
}

fn read_rules(path: &Path) -> Result<RuleSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading rules {}", path.display()))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let parsed = parse_ruleset(&text, &name, true).with_context(|| format!("parsing rules {}", path.display()))?;
    for s in &parsed.skipped {
        eprintln!("{}:{}: skipped {:?}: {}", path.display(), s.line_number, s.text, s.error);
    }
    Ok(parsed.ruleset)
}

fn read_model(path: &Path) -> Result<CompatModelF32> {
    CompatModelF32::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let started = now();
    let mut spec = SynthSpec::new(args.seed, args.words, args.targets);
    if let Some(w) = &args.weights {
        spec.template_weights.copy_from_slice(w);
    }
    if let Some(c) = args.chain_fraction {
        spec.chain_fraction = c;
    }
    if let Some(c) = args.cross_fraction {
        spec.cross_fraction = c;
    }
    let corpus = synthesize_corpus(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("dictionary.txt"), corpus.dictionary.to_text())?;
    fs::write(args.out.join("targets.txt"), corpus.targets.to_text())?;
    fs::write(args.out.join("rules.txt"), corpus.rules.to_text())?;
    fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&corpus.manifest)? + "\n")?;
    RunManifest::new("synth", Some(args.seed), args, started).write(&args.out.join("run_manifest.json"))?;
    println!(
        "wrote {} words, {} targets, {} rules to {}",
        corpus.dictionary.len(),
        corpus.targets.original_size(),
        corpus.rules.len(),
        args.out.display()
    );
    Ok(())
}

pub fn label(args: &LabelArgs) -> Result<()> {
    let started = now();
    let dict = read_dict(&args.dict)?;
    let rules = read_rules(&args.rules)?;
    let targets = read_targets(&args.targets)?;
    let ts = generate_labels(&dict, &rules, &targets);
    ts.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(csv) = &args.csv {
        let mut buf = Vec::new();
        ts.write_sparse_csv(&mut buf)?;
        fs::write(csv, buf)?;
    }
    let mut m = RunManifest::new("label", None, args, started);
    for p in [&args.dict, &args.rules, &args.targets] {
        m.input(p)?;
    }
    m.write(&sidecar(&args.out, ".manifest.json"))?;
    println!("words={} rules={} positives={} p_bar={}", ts.len(), ts.n_rules(), ts.labels().count_ones(), fmt_float(ts.p_bar()));
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let started = now();
    let ts = TrainingSet::load(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    let (train_set, val_set) = ts.split(args.val_fraction, args.seed)?;
    let config = ModelConfig {
        depth: args.depth,
        filters: args.filters,
        kernel: args.kernel,
        bottleneck: args.bottleneck,
        embed_dim: args.embed_dim,
        ..ModelConfig::new(ts.n_rules())
    };
    let tc = TrainConfig {
        learning_rate: args.lr,
        gamma: args.gamma,
        alpha: args.alpha.map_or(AlphaMode::Auto, AlphaMode::Fixed),
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let (model, log) = train::<f32>(&config, &train_set, &val_set, &tc)?;
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let log_path = args.log.clone().unwrap_or_else(|| sidecar(&args.out, ".log.jsonl"));
    fs::write(&log_path, log.to_json_lines())?;
    let mut m = RunManifest::new("train", Some(args.seed), args, started);
    m.input(&args.data)?;
    m.write(&sidecar(&args.out, ".manifest.json"))?;
    println!(
        "epochs={} best_epoch={} best_val_auc={} alpha={}",
        log.epochs.len(),
        log.best_epoch,
        fmt_float(log.best_auc),
        fmt_float(log.alpha)
    );
    Ok(())
}

pub fn attack(args: &AttackArgs) -> Result<()> {
    let started = now();
    if args.mode.uses_model() && args.model.is_none() {
        return Err(UsageError(format!("--mode {} requires --model", args.mode)).into());
    }
    let dict = read_dict(&args.dict)?;
    let rules = read_rules(&args.rules)?;
    let targets = read_targets(&args.targets)?;
    let model = match (&args.model, args.mode.uses_model()) {
        (Some(p), true) => Some(read_model(p)?),
        _ => None,
    };
    let config = AttackConfig {
        mode: args.mode,
        beta: args.beta,
        delta_scale: args.delta_scale,
        budget_clamp: (args.clamp_min, args.clamp_max),
        batch_size: args.batch_size,
        max_guesses: args.max_guesses,
        remove_on_hit: !args.keep_targets,
        seed: args.seed,
    };
    let scorer = model.as_ref().map(|m| m as &dyn CompatScorer);
    let report = run_attack(&dict, &rules, &targets, scorer, &config, &mut |_| {})?;
    report.write_dir(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let mut m = RunManifest::new("attack", Some(args.seed), args, started);
    for p in [&args.dict, &args.rules, &args.targets] {
        m.input(p)?;
    }
    if let Some(p) = model.as_ref().and(args.model.as_ref()) {
        m.input(p)?;
    }
    m.write(&args.out.join("run_manifest.json"))?;
    println!(
        "mode={} guesses={} hits={} success_rate={}",
        args.mode,
        report.total_guesses,
        report.total_hits,
        fmt_float(beta_success_rate(&report.curve, report.original_size, report.total_guesses))
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let started = now();
    let reports = args
        .reports
        .iter()
        .map(|p| AttackReport::read(p).with_context(|| format!("reading report {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = args.reports.iter().map(|p| p.display().to_string()).collect();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "report,mode,guesses,hits,beta_g,success_rate")?;
    for (name, r) in names.iter().zip(&reports) {
        let budget = args.beta_g.unwrap_or(r.total_guesses);
        let rate = beta_success_rate(&r.curve, r.original_size, budget);
        writeln!(out, "{name},{},{},{},{budget},{}", r.config.mode, r.total_guesses, r.total_hits, fmt_float(rate))?;
    }
    let writes = args.compare.is_some() || args.histograms.is_some();
    if let Some(path) = &args.compare {
        if reports.len() < 2 {
            return Err(UsageError("--compare needs at least two reports".into()).into());
        }
        let runs: Vec<(String, &AttackReport)> = names.iter().cloned().zip(&reports).collect();
        let mut buf = Vec::new();
        compare_runs(&runs)?.write_csv(&mut buf)?;
        fs::write(path, buf)?;
    }
    if let Some(dir) = &args.histograms {
        fs::create_dir_all(dir)?;
        for (i, r) in reports.iter().enumerate() {
            let mut buf = Vec::new();
            rule_hit_histogram(r).write_csv(&mut buf)?;
            fs::write(dir.join(format!("hits_{i}.csv")), &buf)?;
            buf.clear();
            rule_selection_frequency(r).write_csv(&mut buf)?;
            fs::write(dir.join(format!("selections_{i}.csv")), &buf)?;
        }
    }
    if writes {
        let mut m = RunManifest::new("eval", None, args, started);
        for p in &args.reports {
            m.input(&if p.is_dir() { p.join("report.json") } else { p.clone() })?;
        }
        let path = match (&args.histograms, &args.compare) {
            (Some(dir), _) => dir.join("run_manifest.json"),
            (None, Some(csv)) => sidecar(csv, ".manifest.json"),
            (None, None) => unreachable!(),
        };
        m.write(&path)?;
    }
    Ok(())
}

pub fn bench_cmd(args: &BenchArgs) -> Result<()> {
    let started = now();
    let needs_model = args.modes.iter().any(|m| m.uses_model());
    if needs_model && args.model.is_none() {
        return Err(UsageError("benchmarking a model-based mode requires --model".into()).into());
    }
    if !(args.seconds > 0.0) {
        return Err(UsageError("--seconds must be positive".into()).into());
    }
    let dict = read_dict(&args.dict)?;
    let rules = read_rules(&args.rules)?;
    let targets = read_targets(&args.targets)?;
    let model = match (&args.model, needs_model) {
        (Some(p), true) => Some(read_model(p)?),
        _ => None,
    };
    let base = AttackConfig { beta: args.beta, batch_size: args.batch_size, ..AttackConfig::default() };
    let scorer = model.as_ref().map(|m| m as &dyn CompatScorer);
    let report = bench(&dict, &rules, &targets, scorer, &args.modes, Duration::from_secs_f64(args.seconds), &base)?;
    report.write_table(io::stdout().lock())?;
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
        let mut m = RunManifest::new("bench", None, args, started);
        for p in [&args.dict, &args.rules, &args.targets] {
            m.input(p)?;
        }
        m.write(&sidecar(path, ".manifest.json"))?;
    }
    Ok(())
}

pub fn export_embeddings(args: &ExportArgs) -> Result<()> {
    let started = now();
    let model = read_model(&args.model)?;
    if let Some(r) = &args.rules {
        model.check_ruleset(&read_rules(r)?)?;
    }
    let dict = read_dict(&args.dict)?;
    let words: Vec<&str> = dict.words().iter().map(String::as_str).collect();
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            model.export_embeddings(&words, &mut buf)?;
            fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
            let mut m = RunManifest::new("export-embeddings", None, args, started);
            m.input(&args.model)?;
            m.input(&args.dict)?;
            m.write(&sidecar(path, ".manifest.json"))?;
        }
        None => model.export_embeddings(&words, io::BufWriter::new(io::stdout().lock()))?,
    }
    Ok(())
}
