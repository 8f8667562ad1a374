//! Property suites for the invariants of each module.

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;
use proptest::sample::subsequence;

use kgrag::evaluation::{evaluate, EvalItem, Matcher, RunProvenance};
use kgrag::generation::{dedup_topn, generate, Candidate, GenerationError, GenerationRequest, Generator};
use kgrag::ingestion::{coverage_stats, extract_kg, split_dataset, TripleDumpRecord};
use kgrag::model::{EntityId, Gender, IdScheme, KnowledgeGraph, LanguageCode, MultilingualLexicon, RelationId, Triple};
use kgrag::reformulation::{
    build_mix, parse_prompt, serialize_prompt, MixTag, PromptSequence, QAInstance, RelationTemplate, TemplateSet,
};
use kgrag::retrieval::{
    bm25_retrieve, build_index, segment_sentences, Bm25Params, Passage, RetrievedContext, RetrieverKind,
};
use kgrag::generation::CandidateList;

const LANGS: [&str; 4] = ["tir", "amh", "eng", "ara"];

fn lang(code: &str) -> LanguageCode {
    LanguageCode::new(code).unwrap()
}
fn q(n: u32) -> EntityId {
    EntityId::new(&format!("Q{n}")).unwrap()
}
fn p(n: u32) -> RelationId {
    RelationId::new(&format!("P{n}")).unwrap()
}

fn triple_strategy() -> impl Strategy<Value = Triple> {
    (1..30u32, 1..4u32, 1..30u32).prop_map(|(h, r, t)| Triple::new(q(h), p(r), q(t)))
}

// ---------------------------------------------------------------- ingestion

proptest! {
    #[test]
    fn splits_partition_the_input(triples in proptest::collection::vec(triple_strategy(), 0..120), seed in any::<u64>()) {
        let split = split_dataset(&triples, seed);
        let distinct: BTreeSet<&Triple> = triples.iter().collect();
        let n = distinct.len();
        let (a, b, c) = split.sizes();
        prop_assert_eq!(a + b + c, n);
        for (got, share) in [(a, 0.8), (b, 0.1), (c, 0.1)] {
            prop_assert!((got as f64 - share * n as f64).abs() <= 1.0);
        }
        let all: Vec<&Triple> = split.train.iter().chain(&split.eval).chain(&split.test).collect();
        let union: BTreeSet<&Triple> = all.iter().copied().collect();
        prop_assert_eq!(all.len(), union.len(), "buckets overlap");
        prop_assert_eq!(union, distinct);
        let again = split_dataset(&triples, seed);
        prop_assert_eq!(serde_json::to_string(&split).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn split_ignores_input_order(triples in proptest::collection::vec(triple_strategy(), 0..60), seed in any::<u64>()) {
        let mut reversed = triples.clone();
        reversed.reverse();
        prop_assert_eq!(split_dataset(&triples, seed), split_dataset(&reversed, seed));
    }

    #[test]
    fn extraction_is_idempotent(
        triples in proptest::collection::vec(triple_strategy(), 0..80),
        anchored in proptest::collection::hash_set(1..30u32, 0..15),
        relations in proptest::collection::hash_set(1..4u32, 0..3),
    ) {
        let records = |ts: &[Triple]| -> Vec<TripleDumpRecord> {
            ts.iter().enumerate().map(|(i, t)| TripleDumpRecord {
                head_id: t.head.to_string(),
                relation_id: t.relation.to_string(),
                tail_id: t.tail.to_string(),
                source_line: i + 1,
            }).collect()
        };
        let anchored: HashSet<EntityId> = anchored.into_iter().map(q).collect();
        let relations: HashSet<RelationId> = relations.into_iter().map(p).collect();
        let once = extract_kg(&records(&triples), &anchored, &relations, lang("tir"), IdScheme::Wikidata);
        let twice = extract_kg(&records(&once.to_vec()), &anchored, &relations, lang("tir"), IdScheme::Wikidata);
        prop_assert_eq!(once.triples().collect::<BTreeSet<_>>(), twice.triples().collect::<BTreeSet<_>>());
        for t in once.triples() {
            prop_assert!(relations.contains(&t.relation));
            prop_assert!(anchored.contains(&t.head) || anchored.contains(&t.tail));
        }
    }

    #[test]
    fn coverage_ignores_triple_order(
        triples in proptest::collection::vec(triple_strategy(), 1..60),
        labelled in proptest::collection::hash_set(1..30u32, 0..30),
    ) {
        let mut lex = MultilingualLexicon::new();
        for e in labelled {
            lex.insert_entity(q(e), lang("amh"), format!("e{e}"));
        }
        let mut reversed = triples.clone();
        reversed.reverse();
        let a = coverage_stats(&KnowledgeGraph::from_triples(lang("tir"), triples), &lex, &[lang("amh")]);
        let b = coverage_stats(&KnowledgeGraph::from_triples(lang("tir"), reversed), &lex, &[lang("amh")]);
        prop_assert_eq!(&a, &b);
        let e = &a.entries[0];
        prop_assert!(e.heads_covered <= e.heads_total && e.tails_covered <= e.tails_total);
        prop_assert!((0.0..=100.0).contains(&e.head_coverage_pct));
    }
}

// ------------------------------------------------------------ reformulation

fn text_strategy(max: usize) -> impl Strategy<Value = String> {
    proptest::string::string_regex(&format!("[a-zሰላምمرحبا 0-9]{{1,{max}}}")).unwrap()
}

proptest! {
    #[test]
    fn prompts_round_trip(
        ql in 0..4usize,
        al in 0..4usize,
        cl in 0..4usize,
        question in text_strategy(20),
        context in proptest::option::of(proptest::collection::vec("[a-z|\\[\\]QA\\- ?؟።.]{1,20}", 1..3)),
    ) {
        let question = question.trim().to_owned();
        prop_assume!(!question.is_empty());
        let inst = QAInstance {
            triple: Triple::new(q(1), p(1), q(2)),
            question_language: lang(LANGS[ql]),
            answer_language: lang(LANGS[al]),
            question_text: question.clone(),
            gold_answer: "x".into(),
            context: context.map(|sentences| RetrievedContext {
                sentences,
                source_doc: "d".into(),
                retriever: RetrieverKind::Bm25,
                score: 1.0,
                language: lang(LANGS[cl]),
            }),
            mix_tag: MixTag::CrossLingual,
        };
        let prompt = serialize_prompt(&inst);
        let parsed = parse_prompt(&prompt.text).unwrap();
        prop_assert_eq!(parsed.question, question);
        prop_assert_eq!(&parsed.question_language, &inst.question_language);
        prop_assert_eq!(&parsed.answer_language, &inst.answer_language);
        prop_assert_eq!(parsed.context, inst.context.as_ref().map(|c| (c.language.clone(), c.text())));
        let mark = if LANGS[ql] == "ara" { '؟' } else { '?' };
        let ending = format!("{mark} [A-{}]", LANGS[al]);
        prop_assert!(prompt.text.ends_with(&ending));
    }
}

/// Random lexicon and template coverage over 5 heads, 5 tails and 2
/// relations.
fn reformulation_world() -> impl Strategy<Value = (Vec<Triple>, MultilingualLexicon, TemplateSet)> {
    (
        proptest::collection::vec((1..6u32, 1..3u32, 10..15u32), 1..20),
        subsequence((0..40).collect::<Vec<usize>>(), 0..=40),
        subsequence((0..8).collect::<Vec<usize>>(), 0..=8),
    )
        .prop_map(|(raw, labels, templates)| {
            let triples: Vec<Triple> = raw.into_iter().map(|(h, r, t)| Triple::new(q(h), p(r), q(t))).collect();
            let mut lex = MultilingualLexicon::new();
            for i in labels {
                let (e, l) = (i / 4, LANGS[i % 4]);
                let id = if e < 5 { e as u32 + 1 } else { e as u32 + 5 };
                lex.insert_entity(q(id), lang(l), format!("{l}-{id}"));
            }
            let mut set = TemplateSet::new();
            for i in templates {
                let (r, l) = (i / 4 + 1, LANGS[i % 4]);
                set.insert(RelationTemplate::new(p(r as u32), lang(l), Gender::Neutral, "about {head}").unwrap()).unwrap();
            }
            (triples, lex, set)
        })
}

proptest! {
    #[test]
    fn mixes_are_consistent((triples, lex, templates) in reformulation_world()) {
        let langs: Vec<LanguageCode> = LANGS.iter().map(|l| lang(l)).collect();
        let target = lang("tir");
        let mut per_language = 0;
        for l in &langs {
            per_language += build_mix(&triples, MixTag::MonoSelf, l, &langs, &lex, &templates).instances.len();
        }
        let multi = build_mix(&triples, MixTag::MultiSelf, &target, &langs, &lex, &templates);
        let cross = build_mix(&triples, MixTag::CrossLingual, &target, &langs, &lex, &templates);
        prop_assert_eq!(multi.instances.len(), per_language);
        prop_assert!(cross.instances.len() >= multi.instances.len());
        for (mix, pairs) in [(&multi, 4), (&cross, 16)] {
            prop_assert_eq!(mix.instances.len() + mix.exclusions.len(), triples.len() * pairs);
            for inst in &mix.instances {
                prop_assert_eq!(Some(inst.gold_answer.as_str()), lex.entity(&inst.triple.tail, &inst.answer_language));
                let head = lex.entity(&inst.triple.head, &inst.question_language).unwrap();
                prop_assert!(inst.question_text.contains(head));
            }
        }
        for inst in &multi.instances {
            prop_assert_eq!(&inst.question_language, &inst.answer_language);
        }
    }
}

// ----------------------------------------------------------------- retrieval

const VOCAB: [&str; 8] = ["axum", "ሰላም", "مرحبا", "river", "king", "ከተማ", "road", "hill"];

fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<usize>>> {
    proptest::collection::vec(proptest::collection::vec(0..VOCAB.len(), 1..25), 1..20)
}

fn passages(docs: &[Vec<usize>]) -> Vec<Passage> {
    docs.iter()
        .enumerate()
        .map(|(i, words)| {
            let text: Vec<&str> = words.iter().map(|&w| VOCAB[w]).collect();
            Passage::new(format!("d{i:02}"), q(i as u32 + 1), lang("amh"), "", &text.join(" "))
        })
        .collect()
}

proptest! {
    #[test]
    fn index_statistics_are_consistent(docs in corpus_strategy()) {
        let ps = passages(&docs);
        let refs: Vec<&Passage> = ps.iter().collect();
        let index = build_index(&refs, &lang("amh"), Bm25Params::default()).unwrap();
        prop_assert_eq!(index.doc_count, docs.len());
        prop_assert_eq!(index.doc_lengths.len(), docs.len());
        for (d, len) in index.doc_lengths.iter().enumerate() {
            let tf_sum: u32 = index.postings.values().flatten().filter(|p| p.doc as usize == d).map(|p| p.tf).sum();
            prop_assert_eq!(tf_sum, *len);
            prop_assert_eq!(*len as usize, docs[d].len());
        }
        let mean = docs.iter().map(|d| d.len() as f64).sum::<f64>() / docs.len() as f64;
        prop_assert!((index.avg_doc_length - mean).abs() < 1e-12);
        let again = build_index(&refs, &lang("amh"), Bm25Params::default()).unwrap();
        prop_assert_eq!(serde_json::to_string(&index).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn bm25_matches_the_formula(docs in corpus_strategy(), query in proptest::collection::vec(0..VOCAB.len() + 1, 1..5)) {
        let ps = passages(&docs);
        let refs: Vec<&Passage> = ps.iter().collect();
        let index = build_index(&refs, &lang("amh"), Bm25Params::default()).unwrap();
        let terms: Vec<&str> = query.iter().map(|&w| VOCAB.get(w).copied().unwrap_or("absent")).collect();
        let got = bm25_retrieve(&index, &terms.join(" "), docs.len());

        let unique: BTreeSet<usize> = query.iter().copied().filter(|&w| w < VOCAB.len()).collect();
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
        let mut want: Vec<(String, f64)> = docs.iter().enumerate().map(|(i, d)| {
            let score: f64 = unique.iter().map(|w| {
                let df = docs.iter().filter(|d| d.contains(w)).count() as f64;
                let tf = d.iter().filter(|x| *x == w).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                idf * tf * 2.5 / (tf + 1.5 * (0.25 + 0.75 * d.len() as f64 / avgdl))
            }).sum();
            (format!("d{i:02}"), score)
        }).filter(|(_, s)| *s > 0.0).collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        prop_assert_eq!(got.len(), want.len());
        for ((gd, gs), (wd, ws)) in got.iter().zip(&want) {
            prop_assert!(*gs >= 0.0);
            prop_assert!((gs - ws).abs() <= 1e-9, "{} {} vs {} {}", gd, gs, wd, ws);
        }
        // Ids agree wherever scores are not tied within rounding.
        let got_ids: Vec<&String> = got.iter().map(|(d, _)| d).collect();
        let want_ids: Vec<&String> = want.iter().map(|(d, _)| d).collect();
        if want.windows(2).all(|w| (w[0].1 - w[1].1).abs() > 1e-9 || w[0].1 == w[1].1) {
            prop_assert_eq!(got_ids, want_ids);
        }
    }

    #[test]
    fn passages_partition_into_sentences(
        first in proptest::collection::vec("[a-zሰላም ]{1,12}[.።؟!?]", 1..5),
        body in proptest::collection::vec("[a-zሰላም ]{1,12}[.።؟!?]", 0..5),
    ) {
        let text = format!("{}\n\n{}", first.join(" "), body.join(" "));
        let passage = Passage::new("d", q(1), lang("tir"), "", &text);
        prop_assert!(passage.text.starts_with(&passage.first_paragraph));
        let expected_first = segment_sentences(&first.join(" "), &lang("tir"));
        prop_assert_eq!(passage.first_paragraph_sentences(), &expected_first[..]);
        let joined: String = passage.sentences.concat().chars().filter(|c| !c.is_whitespace()).collect();
        let original: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, original);
    }
}

// ---------------------------------------------------------------- generation

struct Fixed(Vec<Candidate>);

impl Generator for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }
    fn generate(&self, _: &GenerationRequest) -> Result<Vec<Candidate>, GenerationError> {
        Ok(self.0.clone())
    }
}

fn candidates_strategy() -> impl Strategy<Value = Vec<Candidate>> {
    proptest::collection::vec(("[ab]{1,2}|Cafe\u{301}|Caf\u{e9}", -5.0..5.0f64), 1..15)
        .prop_map(|v| v.into_iter().map(|(t, s)| Candidate::new(t, s)).collect())
}

proptest! {
    #[test]
    fn dedup_is_idempotent_and_order_preserving(cands in candidates_strategy(), n in 1..12usize) {
        let once = dedup_topn(&cands, n);
        prop_assert!(once.len() <= n);
        prop_assert_eq!(&dedup_topn(&once, n), &once);
        // A subsequence of the input.
        let mut rest = cands.iter();
        for c in &once {
            prop_assert!(rest.any(|x| x == c));
        }
    }

    #[test]
    fn candidate_lists_meet_their_contract(cands in candidates_strategy(), beam in 1..12usize, n in 1..12usize) {
        prop_assume!(n <= beam);
        let prompt = PromptSequence { text: "[Q-eng]x? [A-eng]".into(), has_context: false };
        let request = GenerationRequest::new(prompt, beam, n).unwrap();
        let list = generate(&Fixed(cands), &request).unwrap();
        prop_assert!(!list.candidates.is_empty() && list.candidates.len() <= n);
        prop_assert!(list.candidates.windows(2).all(|w| w[0].score >= w[1].score));
        let texts: HashSet<String> = list.candidates.iter().map(|c| kgrag::model::nfc(&c.text)).collect();
        prop_assert_eq!(texts.len(), list.candidates.len());
    }
}

// ---------------------------------------------------------------- evaluation

fn eval_items() -> impl Strategy<Value = Vec<EvalItem>> {
    proptest::collection::vec((0..4u32, proptest::collection::vec(0..5u32, 0..10), 0..5usize, 1..4u32), 0..40).prop_map(
        |rows| {
            rows.into_iter()
                .map(|(gold, cands, ctx, rel)| {
                    let inst = QAInstance {
                        triple: Triple::new(q(1), p(rel), q(2)),
                        question_language: lang("tir"),
                        answer_language: lang("tir"),
                        question_text: "q".into(),
                        gold_answer: format!("g{gold}"),
                        context: None,
                        mix_tag: MixTag::MonoSelf,
                    };
                    let mut seen = HashSet::new();
                    let candidates = cands
                        .into_iter()
                        .filter(|c| seen.insert(*c))
                        .enumerate()
                        .map(|(i, c)| Candidate::new(format!("g{c}"), -(i as f64)))
                        .collect();
                    EvalItem {
                        instance: inst,
                        candidates: CandidateList { candidates, beam_size: 10, num_candidates: 10, warnings: vec![] },
                        context_language: [None, Some("tir"), Some("amh"), Some("eng"), Some("ara")][ctx].map(lang),
                    }
                })
                .collect()
        },
    )
}

fn provenance() -> RunProvenance {
    RunProvenance {
        retriever: "none".into(),
        mix_tag: "mono_self".into(),
        prompt_format: "tagged".into(),
        generator: "test".into(),
        beam_size: 10,
        seed: 1,
        matcher: "exact".into(),
        config_hash: String::new(),
    }
}

proptest! {
    #[test]
    fn reports_hold_their_invariants(items in eval_items(), seed in any::<u64>()) {
        let report = evaluate(&items, &[1, 3, 10], Matcher::Exact, 5, provenance());
        prop_assert!(report.violations().is_empty());
        let h = &report.hits;
        prop_assert!(h[&1] <= h[&3] && h[&3] <= h[&10]);
        for k in [1, 3, 10] {
            let recombined: f64 = report.by_context_language.values().map(|g| g.share_of_test_pct / 100.0 * g.hits[&k]).sum();
            prop_assert!((recombined - h[&k]).abs() <= 1e-9);
        }

        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = items.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let again = evaluate(&shuffled, &[1, 3, 10], Matcher::Exact, 5, provenance());
        prop_assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn rank_is_the_first_match(items in eval_items()) {
        let by_hand: HashMap<usize, Option<usize>> = items.iter().enumerate().map(|(i, item)| {
            (i, item.candidates.candidates.iter().position(|c| c.text == item.instance.gold_answer).map(|r| r + 1))
        }).collect();
        for (i, item) in items.iter().enumerate() {
            prop_assert_eq!(item.first_hit(Matcher::Exact), by_hand[&i]);
        }
    }
}
