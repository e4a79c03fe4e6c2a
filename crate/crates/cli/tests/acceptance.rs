//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use morphdis::corpusio::{build_dataset, read_cohorts, read_conllu};
use morphdis::lexmorph::load_analyzer;
use morphdis::metrics::{average_ambiguity, evaluate, ErrorBucket};
use morphdis::pipeline::analyze_text;
use morphdis::seq2seq::{
    encode_pairs, gradient_check, token_accuracy, train, CellKind, ModelConfig, OptimizerKind,
    TrainConfig,
};
use morphdis::seqcodec::{encode_source_with, encode_target};
use morphdis::tagmap::load_mapping;
use morphdis::{Analyzer, Cohort, Reading, Sentence, TokenSequence, UdAnnotation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE1_SOURCE: &str =
    "Adv Subqst _ Adv _ IV Ind Prs Sg3 V _ Du2 Imprt N Nom PrsPc Sg TV V _ CLB";
const TABLE1_TARGET: &str =
    "Adv _ Adv _ Mood=Ind Number=Sing Person=3 Tense=Pres VerbForm=Fin V _ Case=Nom Number=Sing N _ CLB";

type Outcome = Result<String, String>;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
        .canonicalize()
        .unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn analyzer(dir: &str) -> Result<Analyzer, String> {
    load_analyzer(
        &data(&format!("{dir}/lexicon.tsv")),
        &data(&format!("{dir}/paradigms.txt")),
    )
    .map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(
        elapsed <= budget,
        format!("took {elapsed:.1?}, budget {budget:?}"),
    )
}

fn table1_bit_exact() -> Outcome {
    let start = Instant::now();
    let table = load_mapping(&data("mapping.txt")).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(data("table1/text.txt")).map_err(|e| e.to_string())?;
    let sentences = analyze_text(&text, &analyzer("table1")?);
    ensure(sentences.len() == 1, "expected one sentence")?;
    let src = encode_source_with(&sentences[0], table.aliases()).to_string();
    ensure(src == TABLE1_SOURCE, format!("source row differs: {src}"))?;

    let gold = read_conllu(&data("table1/gold.conllu")).map_err(|e| e.to_string())?;
    let ann: Vec<UdAnnotation> = gold.sentences[0].iter().map(|t| t.annotation()).collect();
    let tgt = encode_target(&ann).to_string();
    ensure(tgt == TABLE1_TARGET, format!("target row differs: {tgt}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "both rows byte-identical in {:.1?}",
        start.elapsed()
    ))
}

fn analyzer_round_trip() -> Outcome {
    let start = Instant::now();
    let mut forms = 0;
    for dir in ["table1", "lang_a", "lang_b"] {
        let a = analyzer(dir)?;
        for (lemma, tags, _) in a.forms() {
            let tags: Vec<&str> = tags.split('+').collect();
            let surface = a
                .generate(lemma, &tags)
                .ok_or_else(|| format!("{dir}: {lemma}+{} does not generate", tags.join("+")))?;
            let reading = Reading::new(lemma, tags.iter().copied());
            ensure(
                a.analyze(&surface).contains(&reading),
                format!("{dir}: {surface} lacks {reading}"),
            )?;
            forms += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{forms}/{forms} forms in {:.1?}", start.elapsed()))
}

fn random_sentences(rng: &mut ChaCha8Rng) -> Vec<Sentence> {
    let tags = ["N", "V", "Sg", "Pl", "Nom", "Acc", "Ind", "Prs"];
    (0..rng.random_range(1..5))
        .map(|_| {
            Sentence::new(
                (0..rng.random_range(1..8))
                    .map(|w| {
                        let readings: Vec<Reading> = (0..rng.random_range(0..5))
                            .map(|_| {
                                let n = rng.random_range(1..4);
                                Reading::new(
                                    format!("l{}", rng.random_range(0..3)),
                                    (0..n).map(|_| tags[rng.random_range(0..tags.len())]),
                                )
                            })
                            .collect();
                        Cohort::new(format!("w{w}"), readings)
                    })
                    .collect(),
            )
        })
        .collect()
}

fn ambiguity_statistic() -> Outcome {
    let cohorts = read_cohorts(&data("table1/analysis.cohorts")).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = cohorts[0]
        .cohorts
        .iter()
        .map(|c| c.readings.len())
        .collect();
    ensure(
        counts == [2, 1, 1, 3, 1],
        format!("reading counts {counts:?}"),
    )?;
    let avg = average_ambiguity(&cohorts).map_err(|e| e.to_string())?;
    ensure(avg == 1.6, format!("table1 ambiguity {avg}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let s = random_sentences(&mut rng);
        let mut readings = 0usize;
        let mut words = 0usize;
        for sentence in &s {
            for c in &sentence.cohorts {
                let distinct: BTreeSet<String> = c.readings.iter().map(|r| r.to_string()).collect();
                readings += distinct.len().max(1);
                words += 1;
            }
        }
        let got = average_ambiguity(&s).map_err(|e| e.to_string())?;
        worst = worst.max((got - readings as f64 / words as f64).abs());
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!(
        "table1 = {avg}; 200 random fixtures within {worst:e}"
    ))
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let src: TokenSequence = "Adv Subqst _ Adv _ IV Ind Prs Sg3 V".parse().unwrap();
    let tgt: TokenSequence = "Adv _ Adv _ Mood=Ind Number=Sing V".parse().unwrap();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for cell in [CellKind::Lstm, CellKind::Gru] {
        for seed in 0..5 {
            let mc = ModelConfig {
                emb_dim: 4,
                hidden_dim: 5,
                cell,
                seed,
                init_range: 0.5,
                ..ModelConfig::default()
            };
            let r = gradient_check(&mc, (&src, &tgt)).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
            runs += 1;
        }
    }
    ensure(worst < 1e-3, format!("max relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "max relative error {worst:.2e} over {runs} seeded models in {:.1?}",
        start.elapsed()
    ))
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let mc = ModelConfig {
        emb_dim: 16,
        hidden_dim: 32,
        seed: 11,
        init_range: 0.3,
        ..ModelConfig::default()
    };
    let pair = (
        TABLE1_SOURCE.parse::<TokenSequence>().unwrap(),
        TABLE1_TARGET.parse::<TokenSequence>().unwrap(),
    );
    let one = std::slice::from_ref(&pair);
    let tc = TrainConfig {
        steps: 200,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let out = train::<f64>(one, &mc, &tc).map_err(|e| e.to_string())?;
    let acc1 = token_accuracy(
        &out.model,
        &encode_pairs(one, &out.model.src_vocab, &out.model.tgt_vocab),
    )
    .map_err(|e| e.to_string())?;
    ensure(acc1 == 1.0, format!("1 pair: {acc1}"))?;

    let table = load_mapping(&data("mapping.txt")).map_err(|e| e.to_string())?;
    let treebank = read_conllu(&data("lang_a/treebank.conllu")).map_err(|e| e.to_string())?;
    let pairs = build_dataset(&treebank, &analyzer("lang_a")?, &table);
    let fifty = &pairs[..50];
    let tc = TrainConfig {
        steps: 2000,
        batch_size: 16,
        optimizer: OptimizerKind::Adam,
        learning_rate: Some(0.003),
        ..TrainConfig::default()
    };
    let out = train::<f64>(fifty, &mc, &tc).map_err(|e| e.to_string())?;
    let acc50 = token_accuracy(
        &out.model,
        &encode_pairs(fifty, &out.model.src_vocab, &out.model.tgt_vocab),
    )
    .map_err(|e| e.to_string())?;
    ensure(acc50 >= 0.99, format!("50 treebank pairs: {acc50}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "1 pair {:.1}% after 200 steps, 50 treebank pairs {:.2}% after 2000 steps, {:.1?}",
        100.0 * acc1,
        100.0 * acc50,
        start.elapsed()
    ))
}

/// Runs `end-to-end` on the shipped experiment with output in `out`.
fn end_to_end(out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_morphdis"))
        .arg("--config")
        .arg(data("experiment.toml"))
        .arg("--out")
        .arg(out)
        .arg("end-to-end")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        o.status.success(),
        format!(
            "end-to-end exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ),
    )?;
    Ok(start.elapsed())
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    end_to_end(second)?;
    let a = files(first);
    let b = files(second);
    let names: Vec<_> = a.keys().collect();
    ensure(names == b.keys().collect::<Vec<_>>(), "different file sets")?;
    for required in [
        "baseline/model.ckpt",
        "augmented/model.ckpt",
        "baseline/disambiguated.pred",
        "augmented/disambiguated.pred",
        "baseline/report.txt",
        "augmented/report.txt",
        "comparison.txt",
    ] {
        ensure(
            a.contains_key(Path::new(required)),
            format!("{required} missing"),
        )?;
    }
    let differing: Vec<_> = a
        .iter()
        .filter(|(k, v)| b[*k] != **v)
        .map(|(k, _)| k.display().to_string())
        .collect();
    ensure(differing.is_empty(), format!("differs: {differing:?}"))?;
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn report_value(path: &Path, key: &str) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("{}: no {key}", path.display()))
}

/// Share of sentences whose last word before the final punctuation is a verb.
fn verb_final_rate(sentences: &[Vec<String>]) -> f64 {
    let hits = sentences
        .iter()
        .filter(|s| {
            s.iter()
                .rev()
                .find(|p| p.as_str() != "CLB")
                .map(String::as_str)
                == Some("V")
        })
        .count();
    hits as f64 / sentences.len() as f64
}

fn transfer_direction(out: &Path, elapsed: Duration) -> Outcome {
    let table = load_mapping(&data("mapping.txt")).map_err(|e| e.to_string())?;
    let a = read_conllu(&data("lang_a/treebank.conllu")).map_err(|e| e.to_string())?;
    let b = read_cohorts(&data("lang_b/gold.cohorts")).map_err(|e| e.to_string())?;
    ensure(
        a.sentences.len() >= 300,
        format!("A has {} sentences", a.sentences.len()),
    )?;
    ensure(b.len() >= 100, format!("B has {} sentences", b.len()))?;

    let a_ann: Vec<Vec<UdAnnotation>> = a
        .sentences
        .iter()
        .map(|s| s.iter().map(|t| t.annotation()).collect())
        .collect();
    let mut b_ann = Vec::new();
    for s in &b {
        let mut row = Vec::new();
        for c in &s.cohorts {
            let r = c
                .readings
                .iter()
                .next()
                .ok_or("B gold cohort without a reading")?;
            row.push(table.convert(r).map_err(|e| e.to_string())?);
        }
        b_ann.push(row);
    }
    let cases = |ann: &[Vec<UdAnnotation>]| -> BTreeSet<String> {
        ann.iter()
            .flatten()
            .flat_map(|a| a.feats.iter().filter(|f| f.starts_with("Case=")).cloned())
            .collect()
    };
    let (ca, cb) = (cases(&a_ann), cases(&b_ann));
    ensure(
        ca.contains("Case=Loc") && !ca.contains("Case=Ine") && !ca.contains("Case=Ela"),
        format!("A cases {ca:?}"),
    )?;
    ensure(
        cb.contains("Case=Ine") && cb.contains("Case=Ela"),
        format!("B cases {cb:?}"),
    )?;
    let upos = |ann: &[Vec<UdAnnotation>]| -> Vec<Vec<String>> {
        ann.iter()
            .map(|s| s.iter().map(|a| a.upos.clone()).collect())
            .collect()
    };
    let (va, vb) = (
        verb_final_rate(&upos(&a_ann)),
        verb_final_rate(&upos(&b_ann)),
    );
    ensure(
        vb > 0.5 && va < 0.5,
        format!("verb-final A {va:.2} B {vb:.2}"),
    )?;

    let metric = |model: &str, key: &str| report_value(&out.join(model).join("report.txt"), key);
    let (bw, bp) = (
        metric("baseline", "fully_correct_words_pct")?,
        metric("baseline", "pos_correct_pct")?,
    );
    let (aw, ap) = (
        metric("augmented", "fully_correct_words_pct")?,
        metric("augmented", "pos_correct_pct")?,
    );
    let summary =
        format!("words {bw:.1}% -> {aw:.1}%, POS {bp:.1}% -> {ap:.1}%, end-to-end {elapsed:.1?}");
    ensure(
        aw >= bw && ap >= bp && (aw > bw || ap > bp),
        summary.clone(),
    )?;
    within(elapsed, Duration::from_secs(600))?;
    Ok(summary)
}

fn feature_map(feats: &BTreeSet<String>) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut m: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in feats {
        let (k, v) = f.split_once('=').unwrap();
        m.entry(k).or_default().insert(v);
    }
    m
}

/// (words, correct, pos, sentences ok, mismatched, buckets)
fn recount(
    gold: &[Vec<UdAnnotation>],
    pred: &[Vec<String>],
) -> (usize, usize, usize, usize, usize, [usize; 4]) {
    let mut c = (0, 0, 0, 0, 0, [0usize; 4]);
    for (g, p) in gold.iter().zip(pred) {
        let groups: Vec<Vec<String>> = if p.is_empty() {
            vec![]
        } else {
            p.join(" ")
                .split(" _ ")
                .map(|w| {
                    w.split(' ')
                        .map(str::to_owned)
                        .filter(|t| t != "_")
                        .collect()
                })
                .collect()
        };
        let mut ok = groups.len() == g.len();
        if !ok {
            c.4 += 1;
        }
        for (i, ga) in g.iter().enumerate() {
            let group = groups.get(i).cloned().unwrap_or_default();
            let names: Vec<&String> = group.iter().filter(|t| !t.contains('=')).collect();
            let upos = if names.len() == 1 {
                Some(names[0])
            } else {
                None
            };
            let feats: BTreeSet<String> =
                group.iter().filter(|t| t.contains('=')).cloned().collect();
            let (gm, pm) = (feature_map(&ga.feats), feature_map(&feats));
            let keys: BTreeSet<&&str> = gm.keys().chain(pm.keys()).collect();
            let d = usize::from(upos != Some(&ga.upos))
                + keys.iter().filter(|k| gm.get(**k) != pm.get(**k)).count();
            c.0 += 1;
            c.2 += usize::from(upos == Some(&ga.upos));
            if d == 0 {
                c.1 += 1;
            } else {
                ok = false;
                c.5[d.min(4) - 1] += 1;
            }
        }
        c.3 += usize::from(ok);
    }
    c
}

fn metrics_oracle() -> Outcome {
    let pos = ["N", "V", "Adv", "CLB"];
    let feats = [
        "Case=Nom",
        "Case=Ine",
        "Case=Ela",
        "Number=Sing",
        "Number=Plur",
        "Person=1",
        "Mood=Ind",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut words = 0;
    let random_ann = |rng: &mut ChaCha8Rng| {
        let f: Vec<&str> = feats
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.35))
            .collect();
        UdAnnotation::new(pos[rng.random_range(0..pos.len())], f)
    };
    for fixture in 0..100 {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..rng.random_range(1..10) {
            let g: Vec<UdAnnotation> = (0..rng.random_range(1..7))
                .map(|_| random_ann(&mut rng))
                .collect();
            let mut p: Vec<UdAnnotation> = g
                .iter()
                .map(|a| {
                    if rng.random_bool(0.6) {
                        a.clone()
                    } else {
                        random_ann(&mut rng)
                    }
                })
                .collect();
            match rng.random_range(0..5) {
                0 => {
                    p.truncate(rng.random_range(0..p.len()));
                }
                1 => p.push(random_ann(&mut rng)),
                _ => {}
            }
            gold.push(g);
            pred.push(if p.is_empty() {
                vec![]
            } else {
                encode_target(&p).into_tokens()
            });
        }
        let r = evaluate(&gold, &pred).map_err(|e| e.to_string())?;
        let (w, correct, pos_ok, sent_ok, mism, buckets) = recount(&gold, &pred);
        let counts = (
            r.n_words,
            r.fully_correct_words,
            r.pos_correct,
            r.fully_correct_sentences,
            r.n_mismatched_sentences,
            r.error_counts,
        );
        ensure(
            counts == (w, correct, pos_ok, sent_ok, mism, buckets),
            format!("fixture {fixture}: {counts:?}"),
        )?;
        let pct = |a: usize, b: usize| 100.0 * a as f64 / b as f64;
        for (got, want) in [
            (r.fully_correct_words_pct, pct(correct, w)),
            (r.pos_correct_pct, pct(pos_ok, w)),
            (r.fully_correct_sentences_pct, pct(sent_ok, gold.len())),
        ] {
            ensure(
                (got - want).abs() <= 1e-9,
                format!("fixture {fixture}: {got} vs {want}"),
            )?;
        }
        let wrong: usize = buckets.iter().sum();
        ensure(wrong == w - correct, "buckets do not partition wrong words")?;
        if wrong > 0 {
            let total: f64 = r.error_histogram.values().sum();
            ensure(
                (total - 100.0).abs() <= 0.1,
                format!("histogram sums to {total}"),
            )?;
            for b in ErrorBucket::ALL {
                ensure(
                    (r.error_histogram[&b] - pct(buckets[b.index()], wrong)).abs() <= 1e-9,
                    "bucket share",
                )?;
            }
        }
        words += w;
    }
    Ok(format!("100 fixtures, {words} words, all counts equal"))
}

fn mismatch_containment(out: &Path) -> Outcome {
    let ann = |upos: &str, f: &[&str]| UdAnnotation::new(upos, f.iter().copied());
    // a one-word imperative where the model adds a second verb group
    let gold = vec![
        vec![
            ann("CLB", &[]),
            ann("V", &["Mood=Imp", "Number=Sing", "Person=2"]),
            ann("CLB", &[]),
        ],
        vec![
            ann("N", &["Case=Nom"]),
            ann("V", &["Mood=Ind"]),
            ann("CLB", &[]),
        ],
        vec![ann("Adv", &[])],
    ];
    let toks = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    let pred = vec![
        toks("CLB _ Mood=Imp Number=Sing Person=2 V _ VerbForm=Conneg V _ CLB"),
        toks("Case=Nom N"),
        toks("Adv"),
    ];
    let r = evaluate(&gold, &pred).map_err(|e| e.to_string())?;
    ensure(
        r.n_mismatched_sentences == 2,
        format!("mismatched {}", r.n_mismatched_sentences),
    )?;
    ensure(
        r.fully_correct_sentences == 1,
        format!("fully correct {}", r.fully_correct_sentences),
    )?;
    ensure(r.n_words == 7, format!("words {}", r.n_words))?;

    // the real run: every cohort keeps exactly one reading whatever the model emitted
    let mut mismatched = 0.0;
    for model in ["baseline", "augmented"] {
        let cohorts = read_cohorts(&out.join(model).join("disambiguated.cohorts"))
            .map_err(|e| e.to_string())?;
        let gold = read_cohorts(&data("lang_b/gold.cohorts")).map_err(|e| e.to_string())?;
        ensure(cohorts.len() == gold.len(), "sentence count changed")?;
        for (s, g) in cohorts.iter().zip(&gold) {
            ensure(s.len() == g.len(), "cohort count changed")?;
            ensure(
                s.cohorts.iter().all(|c| c.readings.len() == 1),
                "cohort without exactly one reading",
            )?;
        }
        let report = out.join(model).join("report.txt");
        let n = report_value(&report, "n_mismatched_sentences")?;
        let fully = report_value(&report, "fully_correct_sentences_pct")?;
        let total = report_value(&report, "n_sentences")?;
        ensure(
            fully <= 100.0 * (total - n) / total + 1e-9,
            "mismatched sentence counted as correct",
        )?;
        mismatched += n;
    }
    Ok(format!(
        "over-generation fixture contained; {mismatched} mismatched sentences in the real run all keep one reading per cohort"
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let first = dir.path().join("run1");
    let second = dir.path().join("run2");
    let e2e = end_to_end(&first);

    let mut results: Vec<(&str, Outcome)> = vec![
        ("table1 bit-exactness", table1_bit_exact()),
        ("Analyzer round trip", analyzer_round_trip()),
        ("Ambiguity statistic", ambiguity_statistic()),
        ("Gradient fidelity", gradient_fidelity()),
        ("Memorization", memorization()),
    ];
    match e2e {
        Ok(elapsed) => {
            results.push(("Determinism", determinism(&first, &second)));
            results.push(("Transfer direction", transfer_direction(&first, elapsed)));
            results.push(("Metrics oracle", metrics_oracle()));
            results.push(("Mismatch containment", mismatch_containment(&first)));
        }
        Err(e) => {
            for name in ["Determinism", "Transfer direction", "Mismatch containment"] {
                results.push((name, Err(format!("end-to-end failed: {e}"))));
            }
            results.push(("Metrics oracle", metrics_oracle()));
        }
    }
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
