//! Command-line surface: `train`, `eval`, `predict`, `analyze`,
//! `filter-candidates` and `selftest`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use nestag_core::corpus::{Corpus, Sentence, Split};
use nestag_core::evaluation::evaluate;
use nestag_core::model::{EmbeddingInit, PartlyLayeredNet};
use nestag_core::numerics::{check_gradient, GradientTape, ParamStore, Tensor};
use nestag_core::rng::Rng;
use nestag_core::spancodec::{
    assign_nested_levels, decode_spans, encode_bo, filter_concept_candidates, FilterDecision,
    Pos, Span,
};
use nestag_core::training::{
    adamw_step, gold_spans, predict_spans, AdamWConfig, AdamWState, Trainer,
};

use crate::config::RunConfig;
use crate::error::AppError;
use crate::formats::{
    attach_context, load_checkpoint, load_context_vectors, load_embeddings, read_corpus,
    save_checkpoint, write_standoff, CorpusFormat, LabelMap,
};
use crate::io::write_atomic;
use crate::reports;

#[derive(Parser)]
#[command(
    name = "nestag",
    version,
    about = "Nested entity tagger: one shared sequence encoder, one begin/other tagging head per span length"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and keep the best validation checkpoint
    Train(TrainArgs),
    /// Score a checkpoint against an annotated corpus and write reports
    Eval(EvalArgs),
    /// Tag raw sentences (one per line) and print standoff spans
    Predict(PredictArgs),
    /// Print gold span statistics per word-length and nested level
    Analyze(AnalyzeArgs),
    /// Apply the concept-candidate heuristics to POS-tagged candidates
    FilterCandidates(FilterArgs),
    /// Run internal gradient and codec checks
    Selftest,
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration (key=value lines)
    #[arg(long)]
    config: PathBuf,
    /// Training corpus
    #[arg(long)]
    train: PathBuf,
    /// Validation corpus for checkpoint selection
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, default_value = "standoff")]
    format: String,
    /// Label grouping map applied while reading
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Annotated test corpus
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "standoff")]
    format: String,
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Context-vector file (required by context-using models)
    #[arg(long)]
    context: Option<PathBuf>,
    /// Output directory for the report files
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Raw sentences, one per line, whitespace-tokenized
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    context: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "standoff")]
    format: String,
    #[arg(long)]
    label_map: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Candidates, one per line, tokens as word/POS
    #[arg(long)]
    input: PathBuf,
}

pub fn run() -> Result<(), AppError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(AppError::Usage(e.to_string())),
    };
    match cli.command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Predict(args) => predict(args),
        Command::Analyze(args) => analyze(args),
        Command::FilterCandidates(args) => filter_candidates(args),
        Command::Selftest => selftest(),
    }
}

fn parse_format(s: &str) -> Result<CorpusFormat, AppError> {
    CorpusFormat::parse(s).ok_or_else(|| {
        AppError::Usage(format!(
            "unknown corpus format {s:?}; expected `standoff` or `iob-nested`"
        ))
    })
}

fn load_label_map(path: &Option<PathBuf>) -> Result<Option<LabelMap>, AppError> {
    Ok(match path {
        Some(p) => Some(LabelMap::load(p)?),
        None => None,
    })
}

fn train(args: TrainArgs) -> Result<(), AppError> {
    let config = RunConfig::load(&args.config)?;
    let format = parse_format(&args.format)?;
    let label_map = load_label_map(&args.label_map)?;

    let mut corpus = read_corpus(&args.train, format, label_map.as_ref(), Split::Train)?;
    if let Some(dev) = &args.dev {
        let dev_corpus = read_corpus(dev, format, label_map.as_ref(), Split::Dev)?;
        corpus.sentences.extend(dev_corpus.sentences);
    }
    if let Some(context_path) = &config.context_file {
        let (context, warnings) = load_context_vectors(context_path)?;
        for w in &warnings {
            eprintln!("warning: {}: {w}", context_path.display());
        }
        attach_context(&mut corpus, &context)?;
    }

    let mut spec = config.spec.clone();
    let (embedding_init, default_trainable) = match &config.embedding_file {
        Some(path) => {
            let (loaded, warnings) = load_embeddings(path)?;
            for w in &warnings {
                eprintln!("warning: {}: {w}", path.display());
            }
            if loaded.dim != spec.embed_dim {
                eprintln!(
                    "note: embedding file is {}-dimensional, overriding embed_dim={}",
                    loaded.dim, spec.embed_dim
                );
                spec.embed_dim = loaded.dim;
            }
            (
                EmbeddingInit::Pretrained {
                    entries: loaded.entries,
                    trainable: false,
                },
                false,
            )
        }
        None => {
            let vocab: Vec<String> = Corpus {
                sentences: corpus.split(Split::Train).cloned().collect(),
            }
            .vocabulary();
            (EmbeddingInit::Random { tokens: vocab }, true)
        }
    };

    let mut rng = Rng::new(config.train.seed);
    let mut net = PartlyLayeredNet::new(spec, embedding_init, &mut rng)?;
    net.set_embedding_trainable(config.embedding_trainable.unwrap_or(default_trainable));

    let mut trainer = Trainer::new(&net, config.train.clone())?;
    let checkpoint_path = config.checkpoint_path.clone();
    let mut save_error: Option<AppError> = None;
    let outcome = trainer.train(&mut net, &corpus, |net, epoch, f1| {
        eprintln!("epoch {epoch}: validation macro-F1 {f1:.4}, checkpoint updated");
        if save_error.is_none() {
            if let Err(e) = save_checkpoint(net, &checkpoint_path) {
                save_error = Some(e.into());
            }
        }
    })?;
    if let Some(e) = save_error {
        return Err(e);
    }

    for (sentence, span) in &outcome.dropped_spans {
        eprintln!(
            "warning: sentence {sentence}: span ({},{}) is longer than max_len={}, dropped from training targets",
            span.start, span.len, net.spec().max_len
        );
    }
    write_atomic(&config.log_path, reports::epoch_log_csv(&outcome.log).as_bytes())?;
    println!("log: {}", config.log_path.display());
    match outcome.best {
        Some((epoch, f1)) => {
            println!("best checkpoint: epoch {epoch}, validation macro-F1 {f1:.4}");
            println!("checkpoint: {}", config.checkpoint_path.display());
        }
        None => {
            // no validation split: persist the final weights instead
            if !outcome.log.is_empty() {
                save_checkpoint(&net, &config.checkpoint_path)?;
                println!(
                    "no validation split; final weights written to {}",
                    config.checkpoint_path.display()
                );
            } else {
                println!("0 epochs requested; no checkpoint written");
            }
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), AppError> {
    let net = load_checkpoint(&args.checkpoint)?;
    let format = parse_format(&args.format)?;
    let label_map = load_label_map(&args.label_map)?;
    let mut corpus = read_corpus(&args.test, format, label_map.as_ref(), Split::Test)?;
    if let Some(context_path) = &args.context {
        let (context, warnings) = load_context_vectors(context_path)?;
        for w in &warnings {
            eprintln!("warning: {}: {w}", context_path.display());
        }
        attach_context(&mut corpus, &context)?;
    }
    let sentences: Vec<&Sentence> = corpus.split(Split::Test).collect();
    if sentences.is_empty() {
        return Err(AppError::Data("test corpus has no sentences".into()));
    }
    let predicted = predict_spans(&net, &sentences)?;
    let gold = gold_spans(&sentences);
    let report = evaluate(&gold, &predicted, &net.spec().labels);

    std::fs::create_dir_all(&args.out)?;
    let write = |name: &str, content: String| -> Result<(), AppError> {
        write_atomic(&args.out.join(name), content.as_bytes())?;
        Ok(())
    };
    write("overall.csv", reports::overall_csv(&report))?;
    write("per_length.csv", reports::per_length_csv(&report))?;
    write("per_class.csv", reports::per_class_csv(&report))?;
    write("per_level.csv", reports::per_level_csv(&report))?;
    write("confusion.csv", reports::confusion_csv(&report))?;
    write("report.json", reports::report_json(&report))?;

    println!(
        "micro: P {:.4} R {:.4} F1 {:.4}",
        report.micro.precision(),
        report.micro.recall(),
        report.micro.f1()
    );
    println!(
        "macro: P {:.4} R {:.4} F1 {:.4}",
        report.macro_scores.precision, report.macro_scores.recall, report.macro_scores.f1
    );
    println!("reports: {}", args.out.display());
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), AppError> {
    let net = load_checkpoint(&args.checkpoint)?;
    let text = std::fs::read_to_string(&args.input)?;
    let mut sentences = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            continue;
        }
        sentences.push(Sentence {
            id: format!("s{}", i + 1),
            tokens,
            pos: None,
            context: None,
            spans: Vec::new(),
            split: Split::Test,
        });
    }
    if sentences.is_empty() {
        return Err(AppError::Data("no sentences in input".into()));
    }
    let mut corpus = Corpus { sentences };
    if let Some(context_path) = &args.context {
        let (context, warnings) = load_context_vectors(context_path)?;
        for w in &warnings {
            eprintln!("warning: {}: {w}", context_path.display());
        }
        attach_context(&mut corpus, &context)?;
    }
    for sentence in &mut corpus.sentences {
        let logits = net.infer(&sentence.tokens, sentence.context.as_ref())?;
        let tags = net.predict_tags(&logits);
        sentence.spans = decode_spans(&tags);
    }
    let refs: Vec<&Sentence> = corpus.sentences.iter().collect();
    let output = write_standoff(&refs);
    match &args.out {
        Some(path) => {
            write_atomic(path, output.as_bytes())?;
            eprintln!("predictions: {}", path.display());
        }
        None => print!("{output}"),
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<(), AppError> {
    let format = parse_format(&args.format)?;
    let label_map = load_label_map(&args.label_map)?;
    let corpus = read_corpus(&args.corpus, format, label_map.as_ref(), Split::Train)?;

    let mut by_length: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_length_level: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut max_level = 0;
    let mut total_tokens = 0;
    for sentence in &corpus.sentences {
        total_tokens += sentence.len();
        for nested in assign_nested_levels(&sentence.spans) {
            *by_length.entry(nested.span.len).or_default() += 1;
            *by_length_level
                .entry((nested.span.len, nested.level))
                .or_default() += 1;
            max_level = max_level.max(nested.level);
        }
    }
    let total_spans: usize = by_length.values().sum();

    println!("sentences: {}", corpus.sentences.len());
    println!("tokens: {total_tokens}");
    println!("spans: {total_spans}");
    if total_spans == 0 {
        return Ok(());
    }
    let mut header = String::from("length\ttotal");
    for level in 1..=max_level {
        header.push_str(&format!("\tl{level}"));
    }
    println!("{header}");
    for (&length, &count) in &by_length {
        let mut row = format!("{length}\t{count}");
        for level in 1..=max_level {
            match by_length_level.get(&(length, level)) {
                Some(c) => row.push_str(&format!("\t{c}")),
                None => row.push_str("\t-"),
            }
        }
        println!("{row}");
    }
    let mut totals = format!("total\t{total_spans}");
    for level in 1..=max_level {
        let level_total: usize = by_length_level
            .iter()
            .filter(|((_, l), _)| *l == level)
            .map(|(_, c)| c)
            .sum();
        totals.push_str(&format!("\t{level_total}"));
    }
    println!("{totals}");
    Ok(())
}

fn filter_candidates(args: FilterArgs) -> Result<(), AppError> {
    let text = std::fs::read_to_string(&args.input)?;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut tagged: Vec<(String, Pos)> = Vec::new();
        for token in line.split_whitespace() {
            let (word, pos) = token.rsplit_once('/').ok_or_else(|| {
                AppError::Data(format!(
                    "line {}: token {token:?} is not word/POS",
                    idx + 1
                ))
            })?;
            let pos = Pos::parse(pos).ok_or_else(|| {
                AppError::Data(format!("line {}: unknown POS tag {pos:?}", idx + 1))
            })?;
            tagged.push((word.to_string(), pos));
        }
        let words: Vec<&str> = tagged.iter().map(|(w, _)| w.as_str()).collect();
        match filter_concept_candidates(&tagged).map_err(AppError::data)? {
            FilterDecision::Accept => println!("accept\t{}", words.join(" ")),
            FilterDecision::Reject(reason) => {
                println!("reject: {reason}\t{}", words.join(" "))
            }
        }
    }
    Ok(())
}

fn selftest() -> Result<(), AppError> {
    let fail = |what: &str, detail: String| -> AppError {
        AppError::Internal(format!("selftest failed: {what}: {detail}"))
    };

    // codec roundtrip on random nested/overlapping span sets
    let mut rng = Rng::new(20_240_501);
    let labels = ["Concept", "Protein", "DNA"];
    for case in 0..1000 {
        let n = 1 + rng.below(30);
        let max_len = 1 + rng.below(7);
        let mut spans = Vec::new();
        let mut used = std::collections::BTreeSet::new();
        for _ in 0..rng.below(12) {
            let start = rng.below(n);
            let longest = max_len.min(n - start);
            let len = 1 + rng.below(longest);
            if used.insert((start, len)) {
                spans.push(Span::new(start, len, labels[rng.below(labels.len())]));
            }
        }
        let rows = encode_bo(&spans, n, max_len).map_err(|e| fail("encode", e.to_string()))?;
        let mut expected: Vec<Span> = spans
            .iter()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        expected.sort();
        let decoded = decode_spans(&rows);
        if decoded != expected {
            return Err(fail("codec roundtrip", format!("case {case} diverged")));
        }
    }
    println!("ok codec-roundtrip (1000 random sentences)");

    // gradient checks on the primitive ops
    let mut gen = Rng::new(7);
    let x = Tensor::from_rows(&[
        (0..4).map(|_| gen.uniform(-1.0, 1.0)).collect(),
        (0..4).map(|_| gen.uniform(-1.0, 1.0)).collect(),
    ])
    .map_err(AppError::data)?;
    type CheckFn =
        Box<dyn Fn(&mut GradientTape, nestag_core::Value) -> Result<nestag_core::Value, nestag_core::numerics::NumericsError>>;
    let checks: Vec<(&str, CheckFn)> = vec![
        ("tanh", Box::new(|t, v| { let y = t.tanh(v)?; t.sum(y) })),
        ("sigmoid", Box::new(|t, v| { let y = t.sigmoid(v)?; t.sum(y) })),
        (
            "softmax",
            Box::new(|t, v| {
                let y = t.softmax_rows(v)?;
                let sq = t.mul(y, y)?;
                t.sum(sq)
            }),
        ),
        (
            "log-softmax",
            Box::new(|t, v| {
                let y = t.log_softmax_rows(v)?;
                let p = t.pick(y, &[(0, 1), (1, 2)])?;
                t.sum(p)
            }),
        ),
        (
            "layer-norm",
            Box::new(|t, v| {
                let y = t.layer_norm_rows(v, 1e-5)?;
                let p = t.pick(y, &[(0, 0), (1, 3)])?;
                t.sum(p)
            }),
        ),
    ];
    for (name, f) in checks {
        let err = check_gradient(f.as_ref(), &x, 1e-5).map_err(|e| fail(name, e.to_string()))?;
        if err > 1e-6 {
            return Err(fail(name, format!("relative error {err}")));
        }
    }
    println!("ok gradient-checks (primitive ops <= 1e-6)");

    // decoupled decay signature: zero gradient shrinks parameters exactly
    let mut store = ParamStore::new();
    let pid = store.add("theta", Tensor::scalar(0.875));
    let cfg = AdamWConfig {
        weight_decay: 0.01,
        ..AdamWConfig::default()
    };
    let mut state = AdamWState::new(cfg);
    adamw_step(&mut store, &[(pid, Tensor::scalar(0.0))], &mut state)
        .map_err(|e| fail("adamw", e.to_string()))?;
    let expected = 0.875 * (1.0 - cfg.learning_rate * cfg.weight_decay);
    if store.get(pid).data()[0].to_bits() != expected.to_bits() {
        return Err(fail("adamw", "decoupled decay is not bitwise".into()));
    }
    println!("ok adamw-decoupled-decay (bitwise)");

    println!("selftest: all checks passed");
    Ok(())
}
