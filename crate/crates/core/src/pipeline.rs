//! The full workflow on top of the modules: analysis, dataset building,
//! template generation, training, disambiguation and evaluation.
//!
//! Every stage is a pure function of its configuration and seed; outputs
//! carry no timestamps or absolute paths so reruns are byte-identical.
//!
//! Layout of the output directory:
//!
//! ```text
//! analysis/target.cohorts        analyzed evaluation text
//! dataset/treebank.{src,tgt}     source-language pairs
//! templates/templates.{src,tgt}  expanded template pairs
//! templates/manifest.txt
//! <model>/model.ckpt             one directory per trained model
//! <model>/loss.csv
//! <model>/manifest.txt
//! <model>/disambiguated.{cohorts,pred,conllu}
//! <model>/report.txt
//! ambiguity.txt
//! comparison.txt
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use crate::config::{ConfigError, Input, PipelineConfig};
use crate::corpusio::{
    self, build_dataset, read_conllu, read_text, render_cohorts, write_conllu, write_pairs,
    write_text, ConlluToken, CorpusError,
};
use crate::lexmorph::{load_analyzer, load_lexicon, Analyzer, LexError};
use crate::metrics::{average_ambiguity, evaluate, ErrorBucket, EvalReport, MetricsError};
use crate::seq2seq::{
    checkpoint, encode_pairs, loss_csv, token_accuracy, train, CheckpointError, Model, ModelError,
    TrainError,
};
use crate::seqcodec::{
    decode_target, encode_source_with, select_reading, CodecError, Cohort, Sentence, TokenSequence,
};
use crate::tagmap::{load_mapping, MappingTable, TagMapError, UdAnnotation};
use crate::tplgen::{count_duplicates, expand_all, load_templates, TemplateError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lexicon(#[from] LexError),
    #[error(transparent)]
    Mapping(#[from] TagMapError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Data(String),
    #[error("checkpoint {path} does not match the [model] config: {detail}")]
    ConfigMismatch { path: String, detail: String },
}

impl PipelineError {
    /// Training diverged, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, PipelineError::Train(TrainError::NonFiniteLoss { .. }))
    }
}

pub type Pairs = Vec<(TokenSequence, TokenSequence)>;

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(|source| {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    Ok(write_text(path, text)?)
}

/// Appends `ext` to the file name of `prefix`.
pub fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    s.into()
}

/// Which configured language a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    Source,
    Target,
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source" => Ok(Language::Source),
            "target" => Ok(Language::Target),
            other => Err(format!("unknown language {other:?} (source or target)")),
        }
    }
}

pub fn load_language(cfg: &PipelineConfig, lang: Language) -> Result<Analyzer, PipelineError> {
    let (lex, par) = match lang {
        Language::Source => (Input::SourceLexicon, Input::SourceParadigms),
        Language::Target => (Input::TargetLexicon, Input::TargetParadigms),
    };
    Ok(load_analyzer(cfg.input(lex)?, cfg.input(par)?)?)
}

pub fn load_table(cfg: &PipelineConfig) -> Result<MappingTable, PipelineError> {
    Ok(load_mapping(cfg.input(Input::Mapping)?)?)
}

/// Splits on whitespace, then peels punctuation off both ends of each chunk.
pub fn tokenize(line: &str, analyzer: &Analyzer) -> Vec<String> {
    let mut punct: Vec<&str> = analyzer.punctuation().collect();
    punct.sort_by_key(|p| std::cmp::Reverse(p.len()));
    let mut tokens = Vec::new();
    for chunk in line.split_whitespace() {
        let mut rest = chunk;
        let mut leading = Vec::new();
        while let Some(p) = punct
            .iter()
            .find(|p| rest.len() > p.len() && rest.starts_with(**p))
        {
            leading.push(p.to_string());
            rest = &rest[p.len()..];
        }
        let mut trailing = Vec::new();
        while let Some(p) = punct
            .iter()
            .find(|p| rest.len() > p.len() && rest.ends_with(**p))
        {
            trailing.push(p.to_string());
            rest = &rest[..rest.len() - p.len()];
        }
        tokens.extend(leading);
        tokens.push(rest.to_owned());
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

/// Readings of one token; unknown tokens retry in lower case.
pub fn analyze_token(token: &str, analyzer: &Analyzer) -> Cohort {
    let mut readings = analyzer.analyze(token);
    if readings.is_empty() {
        let lower = token.to_lowercase();
        if lower != token {
            readings = analyzer.analyze(&lower);
        }
    }
    Cohort::new(token, readings)
}

/// One sentence per non-blank line.
pub fn analyze_text(text: &str, analyzer: &Analyzer) -> Vec<Sentence> {
    text.lines()
        .map(|line| tokenize(line, analyzer))
        .filter(|tokens| !tokens.is_empty())
        .map(|tokens| Sentence::new(tokens.iter().map(|t| analyze_token(t, analyzer)).collect()))
        .collect()
}

/// Source-language treebank turned into training pairs.
pub fn treebank_pairs(cfg: &PipelineConfig, table: &MappingTable) -> Result<Pairs, PipelineError> {
    let analyzer = load_language(cfg, Language::Source)?;
    let treebank = read_conllu(cfg.input(Input::Treebank)?)?;
    if treebank.skipped > 0 {
        info!(
            "treebank: skipped {} multiword or empty-node lines",
            treebank.skipped
        );
    }
    Ok(build_dataset(&treebank, &analyzer, table))
}

pub fn build_dataset_stage(cfg: &PipelineConfig) -> Result<(PathBuf, usize), PipelineError> {
    cfg.require(&[
        Input::SourceLexicon,
        Input::SourceParadigms,
        Input::Treebank,
        Input::Mapping,
    ])?;
    let table = load_table(cfg)?;
    let pairs = treebank_pairs(cfg, &table)?;
    let prefix = cfg.out_dir().join("dataset").join("treebank");
    create_dir(prefix.parent().expect("has parent"))?;
    write_pairs(&prefix, &pairs)?;
    Ok((prefix, pairs.len()))
}

#[derive(Debug, Clone)]
pub struct TemplateData {
    pub pairs: Pairs,
    pub templates: usize,
    pub duplicates: usize,
}

pub fn template_pairs(
    cfg: &PipelineConfig,
    table: &MappingTable,
) -> Result<TemplateData, PipelineError> {
    let templates = load_templates(cfg.input(Input::Templates)?)?;
    let lexicon = load_lexicon(cfg.input(Input::TargetLexicon)?)?;
    let analyzer = load_language(cfg, Language::Target)?;
    let expansions = expand_all(
        &templates,
        &lexicon,
        &analyzer,
        &cfg.expand,
        table.aliases(),
    )?;
    Ok(TemplateData {
        duplicates: count_duplicates(&expansions),
        templates: templates.len(),
        pairs: expansions
            .into_iter()
            .map(|e| (e.source, e.target))
            .collect(),
    })
}

pub fn gen_templates_stage(cfg: &PipelineConfig) -> Result<(PathBuf, TemplateData), PipelineError> {
    cfg.require(&[
        Input::Templates,
        Input::TargetLexicon,
        Input::TargetParadigms,
        Input::Mapping,
    ])?;
    let table = load_table(cfg)?;
    let data = template_pairs(cfg, &table)?;
    let dir = cfg.out_dir().join("templates");
    create_dir(&dir)?;
    let prefix = dir.join("templates");
    write_pairs(&prefix, &data.pairs)?;
    let manifest = format!(
        "templates={}\nper_template={}\nseed={}\npairs={}\nduplicates={}\n",
        data.templates,
        cfg.expand.per_template,
        cfg.expand.seed,
        data.pairs.len(),
        data.duplicates
    );
    write_file(&dir.join("manifest.txt"), &manifest)?;
    Ok((prefix, data))
}

/// The two models being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Source-language treebank only.
    Baseline,
    /// Treebank plus target-language template pairs.
    Augmented,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Augmented => "augmented",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Preset::Baseline),
            "augmented" => Ok(Preset::Augmented),
            other => Err(format!("unknown preset {other:?} (baseline or augmented)")),
        }
    }
}

/// Named training datasets.
pub type Datasets = Vec<(String, Pairs)>;

pub fn preset_datasets(cfg: &PipelineConfig, preset: Preset) -> Result<Datasets, PipelineError> {
    let mut inputs = vec![
        Input::SourceLexicon,
        Input::SourceParadigms,
        Input::Treebank,
        Input::Mapping,
    ];
    if preset == Preset::Augmented {
        inputs.extend([
            Input::Templates,
            Input::TargetLexicon,
            Input::TargetParadigms,
        ]);
    }
    cfg.require(&inputs)?;
    let table = load_table(cfg)?;
    let mut sets = vec![("treebank".to_owned(), treebank_pairs(cfg, &table)?)];
    if preset == Preset::Augmented {
        sets.push(("templates".to_owned(), template_pairs(cfg, &table)?.pairs));
    }
    Ok(sets)
}

/// Datasets from `.src`/`.tgt` prefixes, named by file name.
pub fn file_datasets(prefixes: &[PathBuf]) -> Result<Datasets, PipelineError> {
    prefixes
        .iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            Ok((name, corpusio::read_pairs(p)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub dir: PathBuf,
    pub model: Model<f64>,
    pub pairs: usize,
    pub final_loss: Option<f64>,
    pub train_accuracy: f64,
}

/// Trains on the concatenation of `datasets` and writes the model directory.
pub fn train_stage(
    cfg: &PipelineConfig,
    name: &str,
    datasets: &Datasets,
) -> Result<TrainSummary, PipelineError> {
    let pairs: Pairs = datasets
        .iter()
        .flat_map(|(_, p)| p.iter().cloned())
        .collect();
    if pairs.is_empty() {
        return Err(TrainError::EmptyData.into());
    }
    info!(
        "training {name} on {} pairs for {} steps",
        pairs.len(),
        cfg.train.steps
    );
    let outcome = train::<f64>(&pairs, &cfg.model, &cfg.train)?;
    let model = outcome.model;
    let data = encode_pairs(&pairs, &model.src_vocab, &model.tgt_vocab);
    let train_accuracy = token_accuracy(&model, &data)?;

    let dir = cfg.out_dir().join(name);
    create_dir(&dir)?;
    checkpoint::save(&model, &dir.join("model.ckpt"))?;
    write_file(&dir.join("loss.csv"), &loss_csv(&outcome.losses))?;
    let mut manifest = String::new();
    for (source, p) in datasets {
        let _ = writeln!(manifest, "dataset={source} pairs={}", p.len());
    }
    let _ = writeln!(manifest, "steps={}", cfg.train.steps);
    let _ = writeln!(manifest, "seed={}", cfg.model.seed);
    let _ = writeln!(manifest, "src_vocab={}", model.src_vocab.len());
    let _ = writeln!(manifest, "tgt_vocab={}", model.tgt_vocab.len());
    let _ = writeln!(manifest, "parameters={}", model.params.num_parameters());
    let _ = writeln!(manifest, "train_token_accuracy={train_accuracy}");
    write_file(&dir.join("manifest.txt"), &manifest)?;
    Ok(TrainSummary {
        dir,
        model,
        pairs: pairs.len(),
        final_loss: outcome.losses.last().copied(),
        train_accuracy,
    })
}

/// Loads a checkpoint and checks its architecture against `[model]`.
pub fn load_model(cfg: &PipelineConfig, path: &Path) -> Result<Model<f64>, PipelineError> {
    let model = checkpoint::load::<f64>(path)?;
    let (want, got) = (&cfg.model, &model.config);
    let fields = [
        ("emb_dim", want.emb_dim, got.emb_dim),
        ("hidden_dim", want.hidden_dim, got.hidden_dim),
        ("enc_layers", want.enc_layers, got.enc_layers),
        ("dec_layers", want.dec_layers, got.dec_layers),
    ];
    let mut diffs: Vec<String> = fields
        .iter()
        .filter(|(_, w, g)| w != g)
        .map(|(name, w, g)| format!("{name} {g} != {w}"))
        .collect();
    if want.cell != got.cell {
        diffs.push(format!("cell {:?} != {:?}", got.cell, want.cell));
    }
    if !diffs.is_empty() {
        return Err(PipelineError::ConfigMismatch {
            path: path.display().to_string(),
            detail: diffs.join(", "),
        });
    }
    Ok(model)
}

/// Model output matched back onto the input cohorts.
#[derive(Debug, Clone, PartialEq)]
pub struct Disambiguation {
    /// One reading per cohort; unknown words keep none.
    pub sentences: Vec<Sentence>,
    /// Raw target tokens per sentence.
    pub predictions: Vec<Vec<String>>,
    /// Predicted annotation per token.
    pub conllu: Vec<Vec<ConlluToken>>,
    /// Sentence index and `produced - expected` word groups.
    pub mismatches: Vec<(usize, i64)>,
}

pub fn disambiguate(
    model: &Model<f64>,
    sentences: &[Sentence],
    table: &MappingTable,
) -> Result<Disambiguation, PipelineError> {
    let mut out = Disambiguation {
        sentences: Vec::with_capacity(sentences.len()),
        predictions: Vec::with_capacity(sentences.len()),
        conllu: Vec::with_capacity(sentences.len()),
        mismatches: Vec::new(),
    };
    for (idx, sentence) in sentences.iter().enumerate() {
        let source = encode_source_with(sentence, table.aliases());
        let tokens = model.predict(&source)?;
        let (words, mismatch) = decode_target(&tokens, sentence.len());
        if mismatch != 0 {
            info!(
                "sentence {}: model produced {mismatch:+} word groups",
                idx + 1
            );
            out.mismatches.push((idx, mismatch));
        }
        let mut cohorts = Vec::with_capacity(sentence.len());
        let mut rows = Vec::with_capacity(sentence.len());
        for (i, (cohort, word)) in sentence.cohorts.iter().zip(&words).enumerate() {
            let chosen = if cohort.readings.is_empty() {
                None
            } else {
                Some(select_reading(cohort, word, table)?)
            };
            rows.push(ConlluToken {
                id: i + 1,
                form: cohort.surface.clone(),
                lemma: chosen
                    .as_ref()
                    .map_or_else(|| "_".to_owned(), |r| r.lemma.clone()),
                upos: word.upos.clone().unwrap_or_else(|| "_".to_owned()),
                feats: word.feats.clone(),
            });
            cohorts.push(Cohort::new(cohort.surface.clone(), chosen));
        }
        out.sentences.push(Sentence::new(cohorts));
        out.conllu.push(rows);
        out.predictions.push(tokens);
    }
    Ok(out)
}

pub fn render_predictions(predictions: &[Vec<String>]) -> String {
    predictions.iter().map(|p| p.join(" ") + "\n").collect()
}

/// One raw token line per sentence; blank lines are empty predictions.
pub fn parse_predictions(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
        .collect()
}

/// Writes `<prefix>.cohorts`, `<prefix>.pred` and `<prefix>.conllu`.
pub fn write_disambiguation(d: &Disambiguation, prefix: &Path) -> Result<(), PipelineError> {
    write_file(
        &with_suffix(prefix, ".cohorts"),
        &render_cohorts(&d.sentences),
    )?;
    write_file(
        &with_suffix(prefix, ".pred"),
        &render_predictions(&d.predictions),
    )?;
    write_file(&with_suffix(prefix, ".conllu"), &write_conllu(&d.conllu))
}

/// Gold UD annotations from disambiguated cohorts.
pub fn gold_annotations(
    gold: &[Sentence],
    table: &MappingTable,
) -> Result<Vec<Vec<UdAnnotation>>, PipelineError> {
    gold.iter()
        .enumerate()
        .map(|(s, sentence)| {
            sentence
                .cohorts
                .iter()
                .map(|c| {
                    let mut readings = c.readings.iter();
                    match (readings.next(), readings.next()) {
                        (Some(r), None) => Ok(table.convert(r)?),
                        _ => Err(PipelineError::Data(format!(
                            "gold sentence {}: cohort {:?} has {} readings, expected 1",
                            s + 1,
                            c.surface,
                            c.readings.len()
                        ))),
                    }
                })
                .collect()
        })
        .collect()
}

/// Scores a prediction file against the configured gold cohorts. The
/// ambiguity of the gold surfaces is filled in when the target analyzer
/// is configured.
pub fn evaluate_stage(
    cfg: &PipelineConfig,
    gold_path: &Path,
    predictions: &Path,
) -> Result<EvalReport, PipelineError> {
    let table = load_table(cfg)?;
    let gold = corpusio::read_cohorts(gold_path)?;
    let annotations = gold_annotations(&gold, &table)?;
    let pred = parse_predictions(&read_text(predictions)?);
    let mut report = evaluate(&annotations, &pred)?;
    if cfg.input(Input::TargetLexicon).is_ok() && cfg.input(Input::TargetParadigms).is_ok() {
        let analyzer = load_language(cfg, Language::Target)?;
        let reanalyzed = reanalyze(&gold, &analyzer);
        report = report.with_ambiguity(average_ambiguity(&reanalyzed)?);
    }
    Ok(report)
}

fn reanalyze(sentences: &[Sentence], analyzer: &Analyzer) -> Vec<Sentence> {
    sentences
        .iter()
        .map(|s| {
            Sentence::new(
                s.cohorts
                    .iter()
                    .map(|c| analyze_token(&c.surface, analyzer))
                    .collect(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityStats {
    pub source: Option<f64>,
    pub target: Option<f64>,
}

impl AmbiguityStats {
    pub fn render(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |a| format!("{a:.2}"));
        let mut out = String::new();
        let _ = writeln!(out, "| {:<10} | {:>8} | {:>8} |", "", "source", "target");
        let _ = writeln!(
            out,
            "| {:<10} | {:>8} | {:>8} |",
            "average",
            cell(self.source),
            cell(self.target)
        );
        out.push('\n');
        let raw = |v: Option<f64>| v.map_or_else(String::new, |a| a.to_string());
        let _ = writeln!(out, "source_avg_ambiguity={}", raw(self.source));
        let _ = writeln!(out, "target_avg_ambiguity={}", raw(self.target));
        out
    }
}

/// Mean readings per token: the source treebank under the source analyzer
/// and the target gold surfaces under the target analyzer.
pub fn ambiguity_stats(cfg: &PipelineConfig) -> Result<AmbiguityStats, PipelineError> {
    let mut stats = AmbiguityStats {
        source: None,
        target: None,
    };
    if cfg.source_language.treebank.is_some() {
        let analyzer = load_language(cfg, Language::Source)?;
        let treebank = read_conllu(cfg.input(Input::Treebank)?)?;
        stats.source = Some(average_ambiguity(&corpusio::analyze_treebank(
            &treebank, &analyzer,
        ))?);
    }
    if cfg.target_language.gold.is_some() {
        let analyzer = load_language(cfg, Language::Target)?;
        let gold = corpusio::read_cohorts(cfg.input(Input::Gold)?)?;
        stats.target = Some(average_ambiguity(&reanalyze(&gold, &analyzer))?);
    }
    if stats.source.is_none() && stats.target.is_none() {
        return Err(ConfigError::MissingKey("source_language.treebank").into());
    }
    Ok(stats)
}

/// Table-style comparison of several evaluated models.
pub fn render_comparison(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| {:<10} | {:>9} | {:>9} | {:>9} | {:>10} |",
        "model", "sentences", "words", "POS", "mismatched"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "| {:<10} | {:>8.1}% | {:>8.1}% | {:>8.1}% | {:>10} |",
            name,
            r.fully_correct_sentences_pct,
            r.fully_correct_words_pct,
            r.pos_correct_pct,
            r.n_mismatched_sentences
        );
    }
    out.push('\n');
    let _ = write!(out, "| {:<10} |", "model");
    for b in ErrorBucket::ALL {
        let _ = write!(out, " {:>11} |", b.label());
    }
    out.push('\n');
    for (name, r) in rows {
        let _ = write!(out, "| {:<10} |", name);
        for b in ErrorBucket::ALL {
            match r.error_histogram.get(&b) {
                Some(p) => {
                    let _ = write!(out, " {:>10.1}% |", p);
                }
                None => {
                    let _ = write!(out, " {:>11} |", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct EndToEnd {
    pub reports: BTreeMap<&'static str, EvalReport>,
    pub ambiguity: AmbiguityStats,
    pub template_duplicates: usize,
}

/// Analyzes the target text and checks it lines up with the gold cohorts.
pub fn analyze_target_text(
    cfg: &PipelineConfig,
    gold: &[Sentence],
) -> Result<Vec<Sentence>, PipelineError> {
    let analyzer = load_language(cfg, Language::Target)?;
    let analyzed = analyze_text(&read_text(cfg.input(Input::TargetText)?)?, &analyzer);
    if analyzed.len() != gold.len() {
        return Err(PipelineError::Data(format!(
            "target text has {} sentences but the gold file has {}",
            analyzed.len(),
            gold.len()
        )));
    }
    for (i, (a, g)) in analyzed.iter().zip(gold).enumerate() {
        let left: Vec<&str> = a.cohorts.iter().map(|c| c.surface.as_str()).collect();
        let right: Vec<&str> = g.cohorts.iter().map(|c| c.surface.as_str()).collect();
        if left != right {
            return Err(PipelineError::Data(format!(
                "sentence {}: text tokens {left:?} differ from gold {right:?}",
                i + 1
            )));
        }
    }
    Ok(analyzed)
}

/// analyze → build-dataset → gen-templates → train both presets →
/// disambiguate → evaluate, writing every artifact under the output dir.
pub fn end_to_end(cfg: &PipelineConfig) -> Result<EndToEnd, PipelineError> {
    cfg.require(&[
        Input::SourceLexicon,
        Input::SourceParadigms,
        Input::Treebank,
        Input::TargetLexicon,
        Input::TargetParadigms,
        Input::Templates,
        Input::TargetText,
        Input::Gold,
        Input::Mapping,
    ])?;
    let out = cfg.out_dir();
    create_dir(out)?;
    let table = load_table(cfg)?;

    let gold_path = cfg.input(Input::Gold)?;
    let gold = corpusio::read_cohorts(gold_path)?;
    let annotations = gold_annotations(&gold, &table)?;
    let input = analyze_target_text(cfg, &gold)?;
    write_file(
        &out.join("analysis").join("target.cohorts"),
        &render_cohorts(&input),
    )?;
    let target_ambiguity = average_ambiguity(&input)?;

    let (_, n) = build_dataset_stage(cfg)?;
    info!("dataset: {n} treebank pairs");
    let (_, templates) = gen_templates_stage(cfg)?;
    info!(
        "templates: {} pairs, {} duplicates",
        templates.pairs.len(),
        templates.duplicates
    );
    let ambiguity = ambiguity_stats(cfg)?;
    write_file(&out.join("ambiguity.txt"), &ambiguity.render())?;

    let mut reports = BTreeMap::new();
    for preset in [Preset::Baseline, Preset::Augmented] {
        let datasets = preset_datasets(cfg, preset)?;
        let summary = train_stage(cfg, preset.name(), &datasets)?;
        info!(
            "{}: final loss {:?}, training token accuracy {:.4}",
            preset.name(),
            summary.final_loss,
            summary.train_accuracy
        );
        let d = disambiguate(&summary.model, &input, &table)?;
        write_disambiguation(&d, &summary.dir.join("disambiguated"))?;
        let report = evaluate(&annotations, &d.predictions)?.with_ambiguity(target_ambiguity);
        write_file(
            &summary.dir.join("report.txt"),
            &report.render(preset.name()),
        )?;
        reports.insert(preset.name(), report);
    }
    let rows: Vec<(&str, &EvalReport)> = [Preset::Baseline, Preset::Augmented]
        .iter()
        .map(|p| (p.name(), &reports[p.name()]))
        .collect();
    write_file(&out.join("comparison.txt"), &render_comparison(&rows))?;
    Ok(EndToEnd {
        reports,
        ambiguity,
        template_duplicates: templates.duplicates,
    })
}
