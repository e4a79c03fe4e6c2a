use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
        .canonicalize()
        .unwrap()
}

fn toml_path(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

/// A config over the table1 fixture with a tiny model.
fn table1_config(dir: &Path, extra: &str) -> PathBuf {
    let d = |r: &str| toml_path(&data(r));
    let text = format!(
        "[source_language]\nlexicon = {lex}\nparadigms = {par}\ntreebank = {tb}\n\n\
         [target_language]\nlexicon = {lex}\nparadigms = {par}\ntext = {text}\n\n\
         [paths]\nmapping = {map}\nout = \"out\"\n\n\
         [model]\nemb_dim = 16\nhidden_dim = 32\ninit_range = 0.3\n\n\
         [train]\nsteps = 200\nbatch_size = 1\n\n{extra}",
        lex = d("table1/lexicon.tsv"),
        par = d("table1/paradigms.txt"),
        tb = d("table1/gold.conllu"),
        text = d("table1/text.txt"),
        map = d("mapping.txt"),
    );
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn morphdis(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphdis"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn analyze_reproduces_the_fixture_cohorts() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let out = morphdis(&cfg, &["analyze"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        read(&dir.path().join("out/analysis/text.cohorts")),
        read(&data("table1/analysis.cohorts"))
    );
}

#[test]
fn empty_input_gives_an_empty_cohort_file() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let target = dir.path().join("empty.cohorts");
    let out = morphdis(
        &cfg,
        &[
            "analyze",
            "--input",
            empty.to_str().unwrap(),
            "--output",
            target.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(read(&target), "");
}

#[test]
fn missing_lexicon_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let text = read(&cfg).replacen(
        &toml_path(&data("table1/lexicon.tsv")),
        "\"gone/lexicon.tsv\"",
        2,
    );
    std::fs::write(&cfg, text).unwrap();
    let out = morphdis(&cfg, &["analyze"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("gone/lexicon.tsv"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn malformed_inputs_exit_2_without_panicking() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model\nhidden_dim = ").unwrap();
    let out = morphdis(&bad, &["analyze"]);
    assert_eq!(code(&out), 2);
    assert!(!stderr(&out).contains("panicked"));

    let out = morphdis(&dir.path().join("absent.toml"), &["analyze"]);
    assert_eq!(code(&out), 2);

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"MDSEQ2SQ\x01\x00").unwrap();
    let out = morphdis(&cfg, &["disambiguate", "--model", junk.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!stderr(&out).contains("panicked"));

    let cohorts = dir.path().join("bad.cohorts");
    std::fs::write(&cohorts, "\tlemma+N\n").unwrap();
    let out = morphdis(
        &cfg,
        &[
            "evaluate",
            "--gold",
            cohorts.to_str().unwrap(),
            "--predictions",
            cohorts.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));

    let tb = dir.path().join("bad.conllu");
    std::fs::write(&tb, "1\tonly three\tcolumns\n").unwrap();
    let text = read(&cfg).replace(&toml_path(&data("table1/gold.conllu")), &toml_path(&tb));
    std::fs::write(&cfg, text).unwrap();
    let out = morphdis(&cfg, &["build-dataset"]);
    assert_eq!(code(&out), 2);
    assert!(!stderr(&out).contains("panicked"));
}

#[test]
fn build_dataset_writes_the_table1_row() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let out = morphdis(&cfg, &["build-dataset"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("1 pairs"));
    let prefix = dir.path().join("out/dataset/treebank");
    assert_eq!(
        read(&prefix.with_extension("src")),
        read(&data("table1/table1.src"))
    );
    assert_eq!(
        read(&prefix.with_extension("tgt")),
        read(&data("table1/table1.tgt"))
    );
}

fn template_config(dir: &Path, templates: &Path) -> PathBuf {
    let cfg = table1_config(dir, "");
    let text = read(&cfg).replace(
        "[target_language]\n",
        &format!("[target_language]\ntemplates = {}\n", toml_path(templates)),
    );
    let text = text
        .replace(
            &toml_path(&data("table1/lexicon.tsv")),
            &toml_path(&data("lang_b/lexicon.tsv")),
        )
        .replace(
            &toml_path(&data("table1/paradigms.txt")),
            &toml_path(&data("lang_b/paradigms.txt")),
        );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn templates_are_seeded_and_counted() {
    let dir = TempDir::new().unwrap();
    let cfg = template_config(dir.path(), &data("lang_b/templates.txt"));
    let run = |seed: &str, out: &str| {
        let o = morphdis(&cfg, &["--seed", seed, "--out", out, "gen-templates"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let p = Path::new(out).join("templates");
        (
            read(&p.join("templates.src")),
            read(&p.join("templates.tgt")),
            read(&p.join("manifest.txt")),
        )
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let first = run("9", a.to_str().unwrap());
    assert_eq!(first, run("9", b.to_str().unwrap()));
    assert_ne!(first.0, run("10", c.to_str().unwrap()).0);
    assert_eq!(first.0.lines().count(), 120);
    assert!(first.2.contains("seed=9\n"));
    assert!(first.2.contains("duplicates="));
}

#[test]
fn zero_templates_zero_pairs() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("none.txt");
    std::fs::write(&empty, "# no templates\n").unwrap();
    let cfg = template_config(dir.path(), &empty);
    let o = morphdis(&cfg, &["gen-templates"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&dir.path().join("out/templates/templates.src")), "");
    assert!(stdout(&o).contains("wrote 0 pairs"));
}

#[test]
fn unfillable_template_names_the_template() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.txt");
    std::fs::write(
        &t,
        "name: needs-pron\nsrc: (Pron Sg Nom)\ntgt: (Pron Case=Nom)\n",
    )
    .unwrap();
    let cfg = template_config(dir.path(), &t);
    let o = morphdis(&cfg, &["gen-templates"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("needs-pron"), "{}", stderr(&o));
}

#[test]
fn zero_steps_writes_the_initial_model() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let o = morphdis(&cfg, &["--steps", "0", "train", "--preset", "baseline"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = dir.path().join("out/baseline");
    assert!(run.join("model.ckpt").exists());
    assert_eq!(read(&run.join("loss.csv")), "step,loss\n");
}

#[test]
fn augmented_manifest_lists_both_sources() {
    let dir = TempDir::new().unwrap();
    let cfg = template_config(dir.path(), &data("lang_b/templates.txt"));
    let o = morphdis(&cfg, &["--steps", "2", "train", "--preset", "augmented"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = read(&dir.path().join("out/augmented/manifest.txt"));
    assert!(
        manifest.contains("dataset=treebank pairs=1\n"),
        "{manifest}"
    );
    assert!(
        manifest.contains("dataset=templates pairs=120\n"),
        "{manifest}"
    );
}

#[test]
fn divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let text = read(&cfg).replace(
        "batch_size = 1\n",
        "batch_size = 1\nlearning_rate = 1e300\ngrad_clip = 1e300\n",
    );
    std::fs::write(&cfg, text).unwrap();
    let o = morphdis(&cfg, &["--steps", "50", "train"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn memorized_sentence_gets_its_gold_readings() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let o = morphdis(&cfg, &["train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("training token accuracy 100.00%"),
        "{}",
        stdout(&o)
    );

    let model = dir.path().join("out/baseline/model.ckpt");
    let o = morphdis(&cfg, &["disambiguate", "--model", model.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("0 with mismatched"), "{}", stdout(&o));
    let cohorts = read(&dir.path().join("out/baseline/disambiguated.cohorts"));
    assert_eq!(
        cohorts,
        "\"<gos>\"\n\tgos+Adv\n\"<dáppe>\"\n\tdáppe+Adv\n\"<lea>\"\n\tleat+V+IV+Ind+Prs+Sg3\n\
         \"<máddi>\"\n\tmáddi+N+Sg+Nom\n\"<?>\"\n\t?+CLB\n\n"
    );
    let pred = read(&dir.path().join("out/baseline/disambiguated.pred"));
    assert_eq!(pred, read(&data("table1/table1.tgt")));
    let conllu = read(&dir.path().join("out/baseline/disambiguated.conllu"));
    assert!(
        conllu.contains("4\tmáddi\tmáddi\tN\t_\tCase=Nom|Number=Sing\t"),
        "{conllu}"
    );

    // the same model under a different architecture config is refused
    let other = read(&cfg).replace("hidden_dim = 32", "hidden_dim = 8");
    std::fs::write(&cfg, other).unwrap();
    let o = morphdis(&cfg, &["disambiguate", "--model", model.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hidden_dim"), "{}", stderr(&o));
}

#[test]
fn unambiguous_cohorts_pass_through_any_model() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let o = morphdis(&cfg, &["--steps", "0", "train"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let input = dir.path().join("in.cohorts");
    let text = "\"<dáppe>\"\n\tdáppe+Adv\n\"<lea>\"\n\tleat+V+IV+Ind+Prs+Sg3\n\"<?>\"\n\t?+CLB\n\n\
                \"<zzz>\"\n\"<dáppe>\"\n\tdáppe+Adv\n\n";
    std::fs::write(&input, text).unwrap();
    let prefix = dir.path().join("res");
    let model = dir.path().join("out/baseline/model.ckpt");
    let o = morphdis(
        &cfg,
        &[
            "disambiguate",
            "--model",
            model.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
            "--output",
            prefix.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(&prefix.with_extension("cohorts")), text);
    let conllu = read(&prefix.with_extension("conllu"));
    assert_eq!(
        conllu
            .lines()
            .filter(|l| l.starts_with(char::is_numeric))
            .count(),
        5
    );
}

#[test]
fn evaluate_scores_a_prediction_file() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let gold = dir.path().join("gold.cohorts");
    std::fs::write(
        &gold,
        "\"<gos>\"\n\tgos+Adv\n\"<dáppe>\"\n\tdáppe+Adv\n\"<lea>\"\n\tleat+V+IV+Ind+Prs+Sg3\n\
         \"<máddi>\"\n\tmáddi+N+Sg+Nom\n\"<?>\"\n\t?+CLB\n\n",
    )
    .unwrap();
    let pred = data("table1/table1.tgt");
    let report = dir.path().join("report.txt");
    let o = morphdis(
        &cfg,
        &[
            "evaluate",
            "--gold",
            gold.to_str().unwrap(),
            "--predictions",
            pred.to_str().unwrap(),
            "--output",
            report.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = read(&report);
    assert!(text.contains("fully_correct_words_pct=100"), "{text}");
    assert!(text.contains("avg_ambiguity=1.6"), "{text}");

    let wrong = dir.path().join("wrong.pred");
    std::fs::write(
        &wrong,
        "Adv _ Adv _ V _ Case=Gen Number=Sing N _ CLB _ CLB\n",
    )
    .unwrap();
    let o = morphdis(
        &cfg,
        &[
            "evaluate",
            "--gold",
            gold.to_str().unwrap(),
            "--predictions",
            wrong.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("n_mismatched_sentences=1"),
        "{}",
        stdout(&o)
    );
    assert!(
        stdout(&o).contains("fully_correct_sentences_pct=0\n"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn ambiguity_stats_for_the_fixture() {
    let dir = TempDir::new().unwrap();
    let cfg = table1_config(dir.path(), "");
    let o = morphdis(&cfg, &["ambiguity-stats"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("source_avg_ambiguity=1.6\n"),
        "{}",
        stdout(&o)
    );
}
