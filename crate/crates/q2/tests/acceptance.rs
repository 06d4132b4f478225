//! Acceptance suite. Each test checks one release criterion at its stated
//! tolerance and prints a single PASS/FAIL line.

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use q2::backends::mock::{MockAnnotator, RuleNli, SubstringQa, TemplateQg};
use q2::backends::{Backends, NliClassifier, NliLabel, NliVerdict};
use q2::metaeval::{
    bootstrap_system_eval, classify_at_threshold, pearson, pr_curve, random_knowledge_probe,
    spearman, BootstrapConfig, BootstrapMetric, ProbeMode,
};
use q2::pipeline::{
    candidates_for_span, extract_candidates, filter_personal, validate_roundtrip, EvalConfig,
    QuestionStatus,
};
use q2::scoring::{compare_answers, score_response, token_f1, VerdictPath};
use q2::types::{Dataset, DialogueExample, SourceFormat};

fn criterion(name: &str, check: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(check) {
        Ok(()) => println!("acceptance: {name}: PASS"),
        Err(cause) => {
            println!("acceptance: {name}: FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

fn example(id: &str, knowledge: &str, response: &str) -> DialogueExample {
    DialogueExample {
        id: id.into(),
        history: vec![],
        knowledge: knowledge.into(),
        response: response.into(),
        system_id: "mock".into(),
        gold_label: None,
        human_score: None,
        dialogue_id: None,
    }
}

// ---------------------------------------------------------------- criterion 1

fn q2_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_q2"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// 200 examples cycling over faithful, hallucinated, contradicted, and
/// span-free responses against the mock lexicon.
fn write_mock_fixture(path: &Path, n: usize) {
    let mut lines = Vec::new();
    for i in 0..n {
        let (knowledge, response, gold) = match i % 4 {
            0 => (
                "coffee is very acidic.",
                "coffee is very acidic.",
                "consistent",
            ),
            1 => (
                "Coffee is slightly acidic and has a stimulating effect on humans.",
                "coffee is very acidic.",
                "inconsistent",
            ),
            2 => (
                "The giant panda is a conservation reliant vulnerable species.",
                "they are reliant on vulnerable species!",
                "inconsistent",
            ),
            _ => ("some knowledge text.", "a plain reply.", "inconsistent"),
        };
        lines.push(format!(
            "{{\"id\":\"ex-{i}\",\"knowledge\":\"{knowledge}\",\"response\":\"{response}\",\"gold_label\":\"{gold}\",\"human_score\":{}}}",
            if gold == "consistent" { "1.0" } else { "0.0" },
        ));
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn run_score_replay(dataset: &Path, transcript: &Path, out: &Path, seed: &str) -> Vec<u8> {
    let run = q2_bin(&[
        "score",
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--transcript",
        transcript.to_str().unwrap(),
        "--transcript-mode",
        "replay",
        "--seed",
        seed,
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let mut bytes = std::fs::read(out).unwrap();
    bytes.extend_from_slice(&run.stdout);
    bytes
}

fn run_metaeval(scores: &Path, dataset: &Path, pr_out: &Path) -> Vec<u8> {
    let run = q2_bin(&[
        "metaeval",
        "--scores",
        scores.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--pr-out",
        pr_out.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let mut bytes = std::fs::read(pr_out).unwrap();
    bytes.extend_from_slice(&run.stdout);
    bytes
}

#[test]
fn determinism_suite() {
    criterion(
        "determinism: 3 identical score + metaeval runs on 200 examples in < 1 min",
        || {
            let started = Instant::now();
            let dir = tempfile::tempdir().unwrap();
            let dataset = dir.path().join("fixture.jsonl");
            write_mock_fixture(&dataset, 200);

            // one recording pass, then fixed-seed replay runs
            let transcript = dir.path().join("transcript.jsonl");
            let recorded = dir.path().join("recorded.jsonl");
            let run = q2_bin(&[
                "score",
                "--dataset",
                dataset.to_str().unwrap(),
                "--out",
                recorded.to_str().unwrap(),
                "--mocks",
                "--transcript",
                transcript.to_str().unwrap(),
                "--transcript-mode",
                "record",
                "--seed",
                "17",
            ]);
            assert!(
                run.status.success(),
                "{}",
                String::from_utf8_lossy(&run.stderr)
            );

            let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..3)
                .map(|i| {
                    let report = dir.path().join(format!("report-{i}.jsonl"));
                    let score_bytes = run_score_replay(&dataset, &transcript, &report, "17");
                    let pr = dir.path().join(format!("pr-{i}.csv"));
                    let meta_bytes = run_metaeval(&report, &dataset, &pr);
                    (score_bytes, meta_bytes)
                })
                .collect();
            assert_eq!(outputs[0], outputs[1]);
            assert_eq!(outputs[1], outputs[2]);
            assert!(
                started.elapsed().as_secs() < 60,
                "took {:?}",
                started.elapsed()
            );
        },
    );
}

// ---------------------------------------------------------------- criterion 2

/// Proves a code path never consults NLI.
struct PanickingNli;

impl NliClassifier for PanickingNli {
    fn classify(&self, _: &str, _: &str) -> q2::Result<NliVerdict> {
        panic!("NLI must not be called on this path");
    }
}

#[test]
fn score_mapping_suite() {
    criterion(
        "score mapping: >= 50 verdict cases, zero deviations",
        || {
            let mut cases = 0usize;

            // normalized exact matches score 1 without touching NLI
            let exact: [(&str, &str); 14] = [
                ("coffee", "coffee"),
                ("Coffee", "coffee!"),
                ("the coffee", "coffee"),
                ("A cat", "cat"),
                ("An apple", "apple."),
                ("U.S.", "us"),
                ("New York City", "new york city"),
                ("vulnerable species", "Vulnerable Species"),
                ("1968", "1968"),
                ("Los  Angeles", "los angeles"),
                ("it's", "its"),
                ("two words", "two   words"),
                ("The Giant Panda", "giant panda"),
                ("cats!", "CATS"),
            ];
            for (r, k) in exact {
                let q = compare_answers("Q?", r, Some(k), &PanickingNli).unwrap();
                assert_eq!((q.verdict, q.score), (VerdictPath::ExactMatch, 1.0), "{r} / {k}");
                cases += 1;
            }

            // no knowledge answer scores 0 without touching NLI
            for r in ["coffee", "cats", "a span", "1968", "vulnerable species", "x"] {
                let q = compare_answers("Q?", r, None, &PanickingNli).unwrap();
                assert_eq!((q.verdict, q.score), (VerdictPath::NoAnswer, 0.0), "{r}");
                cases += 1;
            }

            let differing: [(&str, &str); 12] = [
                ("coffee", "tea"),
                ("Los Angeles", "New York City"),
                ("conservation", "vulnerable species"),
                ("one two three", "three four"),
                ("red", "blue"),
                ("panda bear", "panda cub"),
                ("cats", "dogs"),
                ("1968", "1854"),
                ("slightly acidic", "very acidic"),
                ("a word", "another word"),
                ("left", "right"),
                ("alpha beta", "beta gamma"),
            ];

            // entailment scores 1, contradiction 0, regardless of overlap
            for (r, k) in differing {
                let q = compare_answers("Q?", r, Some(k), &RuleNli::new(NliLabel::Entailment))
                    .unwrap();
                assert_eq!((q.verdict, q.score), (VerdictPath::NliEntailment, 1.0), "{r} / {k}");
                cases += 1;
                let q = compare_answers("Q?", r, Some(k), &RuleNli::new(NliLabel::Contradiction))
                    .unwrap();
                assert_eq!(
                    (q.verdict, q.score),
                    (VerdictPath::NliContradiction, 0.0),
                    "{r} / {k}"
                );
                cases += 1;
            }

            // neutral falls through to token F1
            for (r, k) in differing {
                let q =
                    compare_answers("Q?", r, Some(k), &RuleNli::new(NliLabel::Neutral)).unwrap();
                assert_eq!(q.verdict, VerdictPath::NliNeutralF1, "{r} / {k}");
                assert_eq!(q.score, token_f1(r, k), "{r} / {k}");
                cases += 1;
            }

            assert!(cases >= 50, "only {cases} cases");
        },
    );
}

// ---------------------------------------------------------------- criterion 3

/// Independent brute-force unigram F1 over raw token lists.
fn oracle_f1(a: &[&str], b: &[&str]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut remaining: Vec<&str> = b.to_vec();
    let mut common = 0usize;
    for tok in a {
        if let Some(pos) = remaining.iter().position(|t| t == tok) {
            remaining.remove(pos);
            common += 1;
        }
    }
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / a.len() as f64;
    let r = common as f64 / b.len() as f64;
    2.0 * p * r / (p + r)
}

#[test]
fn token_f1_oracle_equivalence() {
    criterion(
        "token_f1 equals brute-force oracle on 1000 random pairs to 1e-12",
        || {
            // eight tokens that survive normalization unchanged
            const ALPHABET: [&str; 8] = ["b", "c", "d", "e", "f", "g", "h", "i"];
            let mut rng = StdRng::seed_from_u64(42);
            let draw = |rng: &mut StdRng| -> Vec<&str> {
                let len = rng.gen_range(0..=6);
                (0..len).map(|_| ALPHABET[rng.gen_range(0..8)]).collect()
            };
            for _ in 0..1000 {
                let a = draw(&mut rng);
                let b = draw(&mut rng);
                let got = token_f1(&a.join(" "), &b.join(" "));
                let want = oracle_f1(&a, &b);
                assert!((got - want).abs() <= 1e-12, "{a:?} vs {b:?}: {got} != {want}");
            }
        },
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn filtering_suite() {
    criterion(
        "filtering: round-trip discards exactly mismatches; personal filter inert in dnli mode",
        || {
            // round-trip keeps a question iff the QA answer on the response
            // normalizes to the span
            let answers = ["coffee", "the coffee", "Coffee!", "tea", "acidic", "coffee cup"];
            for answer in answers {
                let mut qa = SubstringQa::new();
                qa.add_rule("Q?", &[answer]);
                let response = format!("well {answer} and more text");
                let kept = validate_roundtrip("Q?", "coffee", &response, &qa, false).unwrap();
                let expected = q2::scoring::normalize_answer(answer)
                    == q2::scoring::normalize_answer("coffee");
                assert_eq!(kept, expected, "{answer}");
            }
            // no answer on the response always discards
            let qa = SubstringQa::new();
            assert!(!validate_roundtrip("Q?", "coffee", "no match here", &qa, false).unwrap());

            // the personal filter catches subject pronouns and possessives
            assert!(filter_personal("What do I love?", None));
            assert!(filter_personal("What is your favorite color?", None));
            assert!(filter_personal("Where is my book?", None));
            assert!(!filter_personal("What is very acidic?", None));
            // substrings of personal tokens do not count
            assert!(!filter_personal("What do the yours-truly fans say?", None));

            // inert in dnli mode: 500 generated personal questions all keep
            // Valid status there, while wow mode filters every one of them
            let response = "I love cats";
            let wow = EvalConfig::default();
            let dnli = EvalConfig::new_dnli();
            let annotator = MockAnnotator::with_default_lexicon();
            let spans = extract_candidates(response, &annotator).unwrap();
            let span = spans.iter().find(|s| s.text == "cats").unwrap();
            for i in 0..500 {
                let question = match i % 4 {
                    0 => format!("What do I love about {i}?"),
                    1 => format!("What is your number {i} pick?"),
                    2 => format!("Do you like item {i}?"),
                    _ => format!("Where did my friend {i} go?"),
                };
                let mut qg = TemplateQg::new();
                qg.add_rule("cats", &question);
                let mut qa = SubstringQa::new();
                qa.add_rule(&question, &["cats"]);
                let backends = Backends {
                    annotator: Arc::new(MockAnnotator::with_default_lexicon()),
                    qg: Arc::new(qg),
                    qa: Arc::new(qa),
                    nli: Arc::new(RuleNli::with_default_rules()),
                    bertscore: None,
                };
                assert!(filter_personal(&question, None), "{question}");
                let in_wow = candidates_for_span(span, response, &wow, &backends).unwrap();
                assert_eq!(in_wow[0].status, QuestionStatus::FilteredPersonal, "{question}");
                let in_dnli = candidates_for_span(span, response, &dnli, &backends).unwrap();
                assert_eq!(in_dnli[0].status, QuestionStatus::Valid, "{question}");
            }
        },
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn fallback_law() {
    criterion(
        "fallback: used_fallback iff zero valid questions, then value in {0, 0.5, 1}",
        || {
            let mut rng = StdRng::seed_from_u64(7);
            for case in 0..300 {
                let has_span = rng.gen_bool(0.5);
                let has_question = rng.gen_bool(0.5);
                let roundtrip_ok = rng.gen_bool(0.5);
                let nli_default = match rng.gen_range(0..3) {
                    0 => NliLabel::Entailment,
                    1 => NliLabel::Neutral,
                    _ => NliLabel::Contradiction,
                };

                // copula-free sentences so only the explicit rule generates
                let mut annotator = MockAnnotator::new();
                if has_span {
                    annotator.add_noun_phrase("gadget");
                }
                let mut qg = TemplateQg::new();
                if has_question {
                    qg.add_rule("gadget", "Which thing hums?");
                }
                let mut qa = SubstringQa::new();
                qa.add_rule(
                    "Which thing hums?",
                    &[if roundtrip_ok { "gadget" } else { "shiny" }],
                );
                let backends = Backends {
                    annotator: Arc::new(annotator),
                    qg: Arc::new(qg),
                    qa: Arc::new(qa),
                    nli: Arc::new(RuleNli::new(nli_default)),
                    bertscore: None,
                };
                let ex = example(
                    &format!("case-{case}"),
                    "some grounding gadget text without the span word order",
                    "one shiny gadget hums along.",
                );
                let score = score_response(&ex, &EvalConfig::default(), &backends).unwrap();
                assert_eq!(
                    score.used_fallback,
                    score.valid_question_count == 0,
                    "case {case}"
                );
                let expected_valid = has_span && has_question && roundtrip_ok;
                assert_eq!(score.valid_question_count > 0, expected_valid, "case {case}");
                if score.used_fallback {
                    assert!(score.question_scores.is_empty(), "case {case}");
                    let expected = match nli_default {
                        NliLabel::Entailment => 1.0,
                        NliLabel::Neutral => 0.5,
                        NliLabel::Contradiction => 0.0,
                    };
                    assert_eq!(score.value, expected, "case {case}");
                }
            }
        },
    );
}

// ---------------------------------------------------------------- criterion 6

fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Direct sum-formula Pearson, structured differently from the library.
fn oracle_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x <= 0.0 || var_y <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (var_x * var_y).sqrt())
}

fn oracle_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    oracle_pearson(&oracle_ranks(xs), &oracle_ranks(ys))
}

#[test]
fn correlation_oracles() {
    criterion(
        "spearman/pearson match direct formulas to 1e-10 on 500 vectors, ties included",
        || {
            let mut rng = StdRng::seed_from_u64(11);
            let close = |a: Option<f64>, b: Option<f64>, what: &str| match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() <= 1e-10, "{what}: {a} != {b}")
                }
                other => panic!("{what}: definedness mismatch {other:?}"),
            };
            for _ in 0..500 {
                let n = rng.gen_range(2..=12);
                // a small value range forces frequent ties
                let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
                let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
                close(pearson(&xs, &ys).unwrap(), oracle_pearson(&xs, &ys), "pearson");
                close(spearman(&xs, &ys).unwrap(), oracle_spearman(&xs, &ys), "spearman");
            }
            // spearman is invariant under strictly monotone transforms
            for _ in 0..100 {
                let n = rng.gen_range(2..=12);
                let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..6) as f64).collect();
                let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..6) as f64).collect();
                let tx: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
                let ty: Vec<f64> = ys.iter().map(|y| 2.0 * y + 1.0).collect();
                match (spearman(&xs, &ys).unwrap(), spearman(&tx, &ty).unwrap()) {
                    (None, None) => {}
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-10, "{a} != {b}"),
                    other => panic!("definedness mismatch {other:?}"),
                }
            }
        },
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn bootstrap_machinery() {
    criterion(
        "bootstrap: indicator metric gives avg 1.0 with CI [1,1]; anti-correlated <= -0.9",
        || {
            let started = Instant::now();
            let config = BootstrapConfig {
                c_values: vec![0.05, 0.1, 0.15, 0.2, 0.25],
                sample_size: 350,
                repeats: 100,
                seed: 3,
            };

            // the gold-label indicator: 1 on consistent, 0 on inconsistent
            let indicator = BootstrapMetric {
                name: "indicator".into(),
                pairs: vec![(1.0, 0.0); 60],
            };
            let result = bootstrap_system_eval(&[indicator], &config).unwrap();
            let m = &result.per_metric[0];
            assert_eq!(m.avg_correlation, Some(1.0));
            assert_eq!(m.ci_lower, Some(1.0));
            assert_eq!(m.ci_upper, Some(1.0));
            assert_eq!(m.undefined_repeats, 0);

            // inverted indicator with seeded jitter so scores are not constant
            let mut rng = StdRng::seed_from_u64(5);
            let inverted = BootstrapMetric {
                name: "inverted".into(),
                pairs: (0..60)
                    .map(|_| (rng.gen_range(0.0..0.05), rng.gen_range(0.95..1.0)))
                    .collect(),
            };
            let result = bootstrap_system_eval(&[inverted], &config).unwrap();
            let avg = result.per_metric[0].avg_correlation.unwrap();
            assert!(avg <= -0.9, "avg {avg}");

            assert!(
                started.elapsed().as_secs() < 120,
                "took {:?}",
                started.elapsed()
            );
        },
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn classifier_metric_oracle() {
    criterion(
        "classify_at_threshold and pr_curve match brute-force enumeration on 200 fixtures",
        || {
            use q2::types::GoldLabel;
            let mut rng = StdRng::seed_from_u64(23);
            let ratio = |num: usize, den: usize| -> Option<f64> {
                (den > 0).then(|| num as f64 / den as f64)
            };
            for fixture in 0..200 {
                let n = rng.gen_range(1..=30);
                // quantized scores so thresholds land on exact boundaries too
                let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=8) as f64 / 8.0).collect();
                let labels: Vec<GoldLabel> = (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            GoldLabel::Consistent
                        } else {
                            GoldLabel::Inconsistent
                        }
                    })
                    .collect();
                let thresholds: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
                let curve = pr_curve(&scores, &labels, &thresholds).unwrap();
                for (t, point) in thresholds.iter().zip(&curve) {
                    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
                    for (s, l) in scores.iter().zip(&labels) {
                        match (s > t, l) {
                            (true, GoldLabel::Consistent) => tp += 1,
                            (true, GoldLabel::Inconsistent) => fp += 1,
                            (false, GoldLabel::Consistent) => fn_ += 1,
                            (false, GoldLabel::Inconsistent) => tn += 1,
                        }
                    }
                    let report = classify_at_threshold(&scores, &labels, *t).unwrap();
                    let ctx = format!("fixture {fixture}, threshold {t}");
                    assert_eq!(report.accuracy, (tp + tn) as f64 / n as f64, "{ctx}");
                    assert_eq!(report.consistent.precision, ratio(tp, tp + fp), "{ctx}");
                    assert_eq!(report.consistent.recall, ratio(tp, tp + fn_), "{ctx}");
                    assert_eq!(report.inconsistent.precision, ratio(tn, tn + fn_), "{ctx}");
                    assert_eq!(report.inconsistent.recall, ratio(tn, tn + fp), "{ctx}");
                    assert_eq!(point.consistent, report.consistent, "{ctx}");
                    assert_eq!(point.inconsistent, report.inconsistent, "{ctx}");
                }
            }
        },
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn random_knowledge_probe_detects_mismatch() {
    criterion(
        "random-knowledge probe: no_answer_rate 1.0, system score equals fallback value exactly",
        || {
            // each response yields one valid question whose answer pattern
            // appears in no knowledge text, so every knowledge lookup is a
            // no-answer no matter how the probe permutes
            let mut annotator = MockAnnotator::new();
            let mut examples = Vec::new();
            for i in 0..8 {
                annotator.add_noun_phrase(&format!("item{i}"));
                examples.push(example(
                    &format!("probe-{i}"),
                    &format!("the item{i} was considered quite special{i} back then."),
                    &format!("item{i} is very special{i}."),
                ));
            }
            let backends = Backends {
                annotator: Arc::new(annotator),
                qg: Arc::new(TemplateQg::new()),
                qa: Arc::new(SubstringQa::new()),
                nli: Arc::new(RuleNli::new(NliLabel::Contradiction)),
                bertscore: None,
            };
            let config = EvalConfig::default();

            // sanity: the questions survive round-trip validation
            for ex in &examples {
                let score = score_response(ex, &config, &backends).unwrap();
                assert_eq!(score.valid_question_count, 1, "{}", ex.id);
            }

            let dataset = Dataset::new(examples.clone(), SourceFormat::GenericJsonl).unwrap();
            let result =
                random_knowledge_probe(&dataset, ProbeMode::CrossDialogue, 2, &config, &backends)
                    .unwrap();
            assert_eq!(result.no_answer_rate, 1.0);

            // fallback-only reference: e2e NLI of every response against any
            // knowledge is 0 under the contradiction-default mock, so the
            // fallback-only system value is exactly 0 for every permutation
            for ex in &examples {
                for other in &examples {
                    let fallback = q2::scoring::e2e_nli_score(
                        &other.knowledge,
                        &ex.response,
                        backends.nli.as_ref(),
                        config.fallback_orientation,
                    )
                    .unwrap();
                    assert_eq!(fallback, 0.0);
                }
            }
            assert_eq!(result.q2, 0.0);
        },
    );
}

// ------------------------------------------------- optional extended checks

// Reproducing published full-scale results needs GPU-hosted QG/QA/NLI models
// and the annotated benchmark datasets. With an HTTP backend bundle and the
// real data this suite would be re-run via `--backends` instead of `--mocks`;
// it is out of scope for the hermetic test environment.
#[test]
#[ignore = "requires real model backends and released datasets"]
fn full_scale_reproduction() {}
