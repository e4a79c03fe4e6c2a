use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morphdis::config::{Input, PipelineConfig};
use morphdis::corpusio;
use morphdis::pipeline::{self, Language, PipelineError, Preset};

#[derive(Parser)]
#[command(
    name = "morphdis",
    version,
    about = "Cross-lingual morphological disambiguation on tag sequences"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short, global = true, default_value = "morphdis.toml")]
    config: PathBuf,
    /// Overrides both the model and the template seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the number of training steps.
    #[arg(long, global = true)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize raw text and write every reading per token.
    Analyze {
        /// Text file, one sentence per line (default: target_language.text).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "target")]
        language: Language,
        /// Default: <out>/analysis/<input stem>.cohorts
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Turn the source treebank into .src/.tgt training pairs.
    BuildDataset,
    /// Expand the target-language templates into training pairs.
    GenTemplates,
    /// Train a model and write its checkpoint and loss curve.
    Train {
        #[arg(long, conflicts_with = "data")]
        preset: Option<Preset>,
        /// Dataset prefix with .src/.tgt files; repeatable.
        #[arg(long)]
        data: Vec<PathBuf>,
        /// Output subdirectory (default: the preset name, or "custom").
        #[arg(long)]
        name: Option<String>,
    },
    /// Pick one reading per cohort with a trained model.
    Disambiguate {
        #[arg(long)]
        model: PathBuf,
        /// Cohort file (default: analyze target_language.text).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Writes <prefix>.cohorts, .pred and .conllu (default: next to the model).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score raw predictions against gold cohorts.
    Evaluate {
        /// One line of target tokens per sentence.
        #[arg(long)]
        predictions: PathBuf,
        /// Default: target_language.gold
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Average readings per token for both languages.
    AmbiguityStats,
    /// Run the whole experiment: both models, evaluated on the target gold.
    EndToEnd,
}

fn load_config(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.paths.out = out.clone();
    }
    if let Some(steps) = common.steps {
        cfg.train.steps = steps;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| corpusio::CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| {
        corpusio::CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| {
        corpusio::CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Analyze {
            input,
            language,
            output,
        } => {
            let analyzer = pipeline::load_language(&cfg, language)?;
            let input = match input {
                Some(p) => p,
                None => cfg.input(Input::TargetText)?.to_path_buf(),
            };
            let sentences = pipeline::analyze_text(&read(&input)?, &analyzer);
            let output = output.unwrap_or_else(|| {
                let stem = input
                    .file_stem()
                    .map_or("input".into(), |s| s.to_string_lossy());
                cfg.out_dir()
                    .join("analysis")
                    .join(format!("{stem}.cohorts"))
            });
            write(&output, &corpusio::render_cohorts(&sentences))?;
            println!(
                "analyzed {} sentences into {}",
                sentences.len(),
                output.display()
            );
        }
        Command::BuildDataset => {
            let (prefix, n) = pipeline::build_dataset_stage(&cfg)?;
            println!("wrote {n} pairs to {}.{{src,tgt}}", prefix.display());
        }
        Command::GenTemplates => {
            let (prefix, data) = pipeline::gen_templates_stage(&cfg)?;
            println!(
                "wrote {} pairs from {} templates ({} duplicates) to {}.{{src,tgt}}",
                data.pairs.len(),
                data.templates,
                data.duplicates,
                prefix.display()
            );
        }
        Command::Train { preset, data, name } => {
            let (datasets, default_name) = match preset {
                Some(p) => (pipeline::preset_datasets(&cfg, p)?, p.name()),
                None if !data.is_empty() => (pipeline::file_datasets(&data)?, "custom"),
                None => (
                    pipeline::preset_datasets(&cfg, Preset::Baseline)?,
                    "baseline",
                ),
            };
            let name = name.unwrap_or_else(|| default_name.to_owned());
            let summary = pipeline::train_stage(&cfg, &name, &datasets)?;
            println!(
                "trained on {} pairs; checkpoint {}",
                summary.pairs,
                summary.dir.join("model.ckpt").display()
            );
            if let Some(loss) = summary.final_loss {
                println!("final loss {loss:.6}");
            }
            println!(
                "training token accuracy {:.2}%",
                100.0 * summary.train_accuracy
            );
        }
        Command::Disambiguate {
            model,
            input,
            output,
        } => {
            let table = pipeline::load_table(&cfg)?;
            let m = pipeline::load_model(&cfg, &model)?;
            let sentences = match input {
                Some(p) => corpusio::read_cohorts(&p)?,
                None => {
                    let analyzer = pipeline::load_language(&cfg, Language::Target)?;
                    pipeline::analyze_text(&read(cfg.input(Input::TargetText)?)?, &analyzer)
                }
            };
            let d = pipeline::disambiguate(&m, &sentences, &table)?;
            let prefix = output.unwrap_or_else(|| {
                model
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join("disambiguated")
            });
            pipeline::write_disambiguation(&d, &prefix)?;
            println!(
                "disambiguated {} sentences into {}.{{cohorts,pred,conllu}}; {} with mismatched word groups",
                sentences.len(),
                prefix.display(),
                d.mismatches.len()
            );
        }
        Command::Evaluate {
            predictions,
            gold,
            output,
            name,
        } => {
            let gold = match gold {
                Some(g) => g,
                None => cfg.input(Input::Gold)?.to_path_buf(),
            };
            let report = pipeline::evaluate_stage(&cfg, &gold, &predictions)?;
            let text = report.render(&name);
            if let Some(out) = output {
                write(&out, &text)?;
            }
            print!("{text}");
        }
        Command::AmbiguityStats => {
            let text = pipeline::ambiguity_stats(&cfg)?.render();
            write(&cfg.out_dir().join("ambiguity.txt"), &text)?;
            print!("{text}");
        }
        Command::EndToEnd => {
            pipeline::end_to_end(&cfg)?;
            print!("{}", read(&cfg.out_dir().join("comparison.txt"))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !msg.contains(&text) {
                    msg.push_str(&format!(": {text}"));
                }
                source = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
