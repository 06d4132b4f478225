//! End-to-end scoring over the mock backends, including the worked
//! examples the mocks are tabled for.

use std::sync::Arc;

use q2::backends::mock::{MockAnnotator, RuleNli, SubstringQa, TemplateQg};
use q2::backends::transcript::{Transcript, TranscriptMode};
use q2::backends::{Backends, NliLabel};
use q2::pipeline::{EvalConfig, Variant};
use q2::scoring::{score_response, score_system, VerdictPath};
use q2::types::DialogueExample;

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

#[test]
fn hallucinated_detail_scores_zero() {
    // "very acidic" is not supported by the knowledge: the generated
    // question has no answer there, so the question scores 0.
    let ex = example(
        "coffee",
        "Coffee is slightly acidic and has a stimulating effect on humans because of its caffeine content.",
        "coffee is very acidic. it has stimulating effects on humans.",
    );
    let score = score_response(&ex, &EvalConfig::default(), &Backends::mocks()).unwrap();
    assert!(!score.used_fallback);
    assert_eq!(score.value, 0.0);
    let q = score
        .question_scores
        .iter()
        .find(|q| q.question == "What is very acidic?")
        .expect("coffee question asked");
    assert_eq!(q.verdict, VerdictPath::NoAnswer);
    assert_eq!(q.response_answer, "coffee");
}

#[test]
fn contradicted_span_scores_zero_via_neutral_f1() {
    let ex = example(
        "panda",
        "The giant panda is a conservation reliant vulnerable species.",
        "i'm not sure about that but i do know that they are reliant on vulnerable species!",
    );
    let score = score_response(&ex, &EvalConfig::default(), &Backends::mocks()).unwrap();
    assert!(!score.used_fallback);
    let q = score
        .question_scores
        .iter()
        .find(|q| q.question == "What are they reliant on?")
        .expect("panda question asked");
    assert_eq!(q.knowledge_answer.as_deref(), Some("conservation"));
    assert_eq!(q.score, 0.0);
}

#[test]
fn faithful_response_scores_one() {
    let ex = example(
        "faithful",
        "coffee is very acidic.",
        "coffee is very acidic.",
    );
    let score = score_response(&ex, &EvalConfig::default(), &Backends::mocks()).unwrap();
    assert!(!score.used_fallback);
    assert_eq!(score.value, 1.0);
    assert_eq!(score.question_scores[0].verdict, VerdictPath::ExactMatch);
}

#[test]
fn no_valid_questions_falls_back_to_e2e_nli() {
    // nothing in the lexicon matches, so no spans and no questions
    let ex = example("fallback", "some knowledge text", "a plain reply with nothing notable");
    let score = score_response(&ex, &EvalConfig::default(), &Backends::mocks()).unwrap();
    assert!(score.used_fallback);
    assert_eq!(score.valid_question_count, 0);
    assert_eq!(score.value, 0.5); // mock NLI defaults to neutral
}

#[test]
fn personal_questions_push_to_fallback_in_wow_mode() {
    // "I love cats" generates "What do I love?", which the personal filter
    // discards; with no other questions the response falls back.
    let ex = example("cats", "i love cats very much", "I love cats");
    let backends = Backends::mocks();
    let score = score_response(&ex, &EvalConfig::default(), &backends).unwrap();
    assert!(score.used_fallback);

    // dnli mode keeps the question
    let dnli = score_response(&ex, &EvalConfig::new_dnli(), &backends).unwrap();
    assert!(!dnli.used_fallback);
    assert_eq!(dnli.question_scores[0].question, "What do I love?");
    // answered as "cats" from the knowledge: exact match
    assert_eq!(dnli.value, 1.0);
}

#[test]
fn all_n_variant_keeps_every_valid_question() {
    let mut qg = TemplateQg::new();
    qg.add_rule("coffee", "What beverage is very acidic?");
    let mut qa = SubstringQa::new();
    qa.add_rule("What is very acidic?", &["coffee"]);
    qa.add_rule("What beverage is very acidic?", &["coffee"]);
    let backends = Backends {
        annotator: Arc::new(MockAnnotator::with_default_lexicon()),
        qg: Arc::new(qg),
        qa: Arc::new(qa),
        nli: Arc::new(RuleNli::with_default_rules()),
        bertscore: None,
    };
    let ex = example("coffee", "coffee is very acidic.", "coffee is very acidic.");

    let top1 = score_response(&ex, &EvalConfig::default(), &backends).unwrap();
    assert_eq!(top1.valid_question_count, 1);

    let all_n = EvalConfig {
        variant: Variant::AllN,
        ..Default::default()
    };
    let all = score_response(&ex, &all_n, &backends).unwrap();
    assert_eq!(all.valid_question_count, 2);
}

#[test]
fn replay_run_is_a_pure_function_of_the_transcript() {
    let examples = vec![
        example("a", "coffee is very acidic.", "coffee is very acidic."),
        example(
            "b",
            "The giant panda is a conservation reliant vulnerable species.",
            "they are reliant on vulnerable species!",
        ),
        example("c", "some knowledge", "nothing notable"),
    ];
    let config = EvalConfig::default();

    let transcript = Arc::new(Transcript::new(TranscriptMode::Record));
    let recorded = Backends::mocks().with_transcript(Arc::clone(&transcript));
    let first: Vec<_> = examples
        .iter()
        .map(|ex| score_response(ex, &config, &recorded).unwrap())
        .collect();

    let file = tempfile::NamedTempFile::new().unwrap();
    transcript.save(file.path()).unwrap();
    let replay = Arc::new(Transcript::load(file.path(), TranscriptMode::Replay).unwrap());
    let replayed_backends = Backends::replay_only(replay);
    let second: Vec<_> = examples
        .iter()
        .map(|ex| score_response(ex, &config, &replayed_backends).unwrap())
        .collect();

    assert_eq!(first, second);
    let sys1 = score_system(&first).unwrap();
    let sys2 = score_system(&second).unwrap();
    assert_eq!(sys1, sys2);
}

#[test]
fn replay_miss_names_capability() {
    let transcript = Arc::new(Transcript::new(TranscriptMode::Replay));
    let backends = Backends::replay_only(transcript);
    let ex = example("x", "k text", "coffee is very acidic.");
    let err = score_response(&ex, &EvalConfig::default(), &backends).unwrap_err();
    assert!(err.to_string().contains("x"), "{err}");
    assert!(format!("{err:?}").contains("CacheMiss"), "{err:?}");
}

#[test]
fn knowledge_side_contradiction_scores_zero() {
    let mut qa = SubstringQa::new();
    qa.add_rule("What is very acidic?", &["coffee", "tea"]);
    let mut nli = RuleNli::new(NliLabel::Neutral);
    nli.add_rule(
        "What is very acidic? tea",
        "What is very acidic? coffee",
        NliLabel::Contradiction,
    );
    let backends = Backends {
        annotator: Arc::new(MockAnnotator::with_default_lexicon()),
        qg: Arc::new(TemplateQg::new()),
        qa: Arc::new(qa),
        nli: Arc::new(nli),
        bertscore: None,
    };
    let ex = example(
        "contra",
        "tea and nothing else",
        "coffee is very acidic.",
    );
    let score = score_response(&ex, &EvalConfig::default(), &backends).unwrap();
    assert_eq!(score.value, 0.0);
    assert_eq!(
        score.question_scores[0].verdict,
        VerdictPath::NliContradiction
    );
}

#[test]
fn parallel_scoring_matches_serial() {
    let examples: Vec<_> = (0..20)
        .map(|i| {
            example(
                &format!("e{i}"),
                "coffee is very acidic.",
                "coffee is very acidic. it has stimulating effects on humans.",
            )
        })
        .collect();
    let config = EvalConfig::default();
    let backends = Backends::mocks();
    let serial = q2::scoring::score_dataset(&examples, &config, &backends, 1).unwrap();
    let parallel = q2::scoring::score_dataset(&examples, &config, &backends, 4).unwrap();
    assert_eq!(serial, parallel);
}
