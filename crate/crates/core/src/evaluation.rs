//! Scoring and analysis reports.
//!
//! All percentages are kept unrounded until [`EvalReport::rounded`], so the
//! partition identity over context languages holds to floating-point
//! precision.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::generation::CandidateList;
use crate::ingestion::{percentage, round2};
use crate::model::{nfc, EntityId, KnowledgeGraph, LanguageCode, MultilingualLexicon, RelationId};
use crate::reformulation::QAInstance;

pub const DEFAULT_KS: [usize; 3] = [1, 3, 10];
/// Group key for items scored without context.
pub const NO_CONTEXT: &str = "none";

/// NFC-normalized, outer-whitespace-trimmed equality. No case folding.
pub fn exact_match(prediction: &str, gold: &str) -> bool {
    nfc(prediction.trim()) == nfc(gold.trim())
}

/// True iff the NFC gold, outer whitespace trimmed, is a substring of the
/// NFC prediction. Trimming the gold keeps every exact match a containment
/// match.
pub fn containment_match(prediction: &str, gold: &str) -> bool {
    nfc(prediction).contains(&nfc(gold.trim()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    Exact,
    Containment,
}

impl Matcher {
    pub fn matches(self, prediction: &str, gold: &str) -> bool {
        match self {
            Self::Exact => exact_match(prediction, gold),
            Self::Containment => containment_match(prediction, gold),
        }
    }
}

impl FromStr for Matcher {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Self::Exact),
            "containment" => Ok(Self::Containment),
            other => Err(format!("unknown matcher {other:?} (expected exact or containment)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub instance: QAInstance,
    pub candidates: CandidateList,
    pub context_language: Option<LanguageCode>,
}

impl EvalItem {
    /// 1-based rank of the first matching candidate.
    pub fn first_hit(&self, matcher: Matcher) -> Option<usize> {
        self.candidates
            .candidates
            .iter()
            .position(|c| matcher.matches(&c.text, &self.instance.gold_answer))
            .map(|i| i + 1)
    }

    fn group_key(&self) -> String {
        self.context_language.as_ref().map_or(NO_CONTEXT.to_owned(), |l| l.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hits {
    pub n_items: usize,
    /// k → percentage of items hit within the top k.
    pub hits: BTreeMap<usize, f64>,
    /// Set when there were no items; every percentage is then 0.
    pub empty: bool,
}

fn hits_from_ranks(ranks: &[Option<usize>], ks: &[usize]) -> Hits {
    let hits = ks
        .iter()
        .map(|&k| (k, percentage(ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count(), ranks.len())))
        .collect();
    Hits { n_items: ranks.len(), hits, empty: ranks.is_empty() }
}

pub fn hits_at_k(items: &[EvalItem], ks: &[usize], matcher: Matcher) -> Hits {
    let ranks: Vec<_> = items.iter().map(|i| i.first_hit(matcher)).collect();
    hits_from_ranks(&ranks, ks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextGroup {
    pub share_of_test_pct: f64,
    pub n_items: usize,
    pub hits: BTreeMap<usize, f64>,
}

/// Items grouped by the language of their context (`none` when absent).
pub fn breakdown_by_context_language(
    items: &[EvalItem],
    ks: &[usize],
    matcher: Matcher,
) -> BTreeMap<String, ContextGroup> {
    let mut groups: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
    for item in items {
        groups.entry(item.group_key()).or_default().push(item.first_hit(matcher));
    }
    groups
        .into_iter()
        .map(|(key, ranks)| {
            let h = hits_from_ranks(&ranks, ks);
            let group = ContextGroup {
                share_of_test_pct: percentage(ranks.len(), items.len()),
                n_items: ranks.len(),
                hits: h.hits,
            };
            (key, group)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationStat {
    pub relation: RelationId,
    pub count: usize,
    pub share_of_test_pct: f64,
    /// Share of this relation's items answered correctly at rank 1.
    pub h1_pct: f64,
}

/// The `top_m` most frequent relations of the test set, most frequent
/// first, ties by relation id.
pub fn relation_analysis(items: &[EvalItem], top_m: usize, matcher: Matcher) -> Vec<RelationStat> {
    let mut counts: BTreeMap<&RelationId, (usize, usize)> = BTreeMap::new();
    for item in items {
        let e = counts.entry(&item.instance.triple.relation).or_default();
        e.0 += 1;
        if item.first_hit(matcher) == Some(1) {
            e.1 += 1;
        }
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(top_m)
        .map(|(rel, (count, correct))| RelationStat {
            relation: rel.clone(),
            count,
            share_of_test_pct: percentage(count, items.len()),
            h1_pct: percentage(correct, count),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityRole {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpellingOverlap {
    pub language_a: LanguageCode,
    pub language_b: LanguageCode,
    pub role: EntityRole,
    /// Entities in the role labeled in both languages.
    pub compared: usize,
    pub identical: usize,
    pub percentage: f64,
    pub overlapping: Vec<(EntityId, String)>,
}

/// Among entities in `role` labeled in both languages, the share whose NFC
/// labels are identical.
pub fn spelling_overlap(
    lexicon: &MultilingualLexicon,
    kg: &KnowledgeGraph,
    lang_a: &LanguageCode,
    lang_b: &LanguageCode,
    role: EntityRole,
) -> SpellingOverlap {
    let entities = match role {
        EntityRole::Head => kg.heads(),
        EntityRole::Tail => kg.tails(),
    };
    let mut compared = 0;
    let mut overlapping = Vec::new();
    for e in entities {
        if let (Some(a), Some(b)) = (lexicon.entity(e, lang_a), lexicon.entity(e, lang_b)) {
            compared += 1;
            if nfc(a) == nfc(b) {
                overlapping.push((e.clone(), nfc(a)));
            }
        }
    }
    SpellingOverlap {
        language_a: lang_a.clone(),
        language_b: lang_b.clone(),
        role,
        compared,
        identical: overlapping.len(),
        percentage: percentage(overlapping.len(), compared),
        overlapping,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapGroup {
    /// Label (in `kg_a`'s language) or id of the class; `unclassified` when
    /// the entity has no edge of the class relation.
    pub class: String,
    pub entities: Vec<EntityId>,
}

/// Head entities of `kg_a` with no label in `kg_b`'s language, grouped by
/// their most common tail over `class_relation` edges (ties by entity id).
/// Largest groups first.
pub fn kg_gap_report(
    kg_a: &KnowledgeGraph,
    kg_b: &KnowledgeGraph,
    lexicon: &MultilingualLexicon,
    class_relation: &RelationId,
) -> Vec<GapGroup> {
    let mut classes: HashMap<&EntityId, BTreeMap<&EntityId, usize>> = HashMap::new();
    for t in kg_a.triples().filter(|t| &t.relation == class_relation) {
        *classes.entry(&t.head).or_default().entry(&t.tail).or_default() += 1;
    }
    let mut groups: BTreeMap<String, BTreeSet<EntityId>> = BTreeMap::new();
    for head in kg_a.heads() {
        if lexicon.entity(head, &kg_b.language).is_some() {
            continue;
        }
        let class = classes
            .get(head)
            .and_then(|tails| tails.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))))
            .map(|(tail, _)| lexicon.entity(tail, &kg_a.language).map_or_else(|| tail.to_string(), str::to_owned))
            .unwrap_or_else(|| "unclassified".to_owned());
        groups.entry(class).or_default().insert(head.clone());
    }
    let mut out: Vec<GapGroup> = groups
        .into_iter()
        .map(|(class, entities)| GapGroup { class, entities: entities.into_iter().collect() })
        .collect();
    out.sort_by(|a, b| b.entities.len().cmp(&a.entities.len()).then_with(|| a.class.cmp(&b.class)));
    out
}

/// What produced the predictions, carried into every report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub retriever: String,
    pub mix_tag: String,
    pub prompt_format: String,
    pub generator: String,
    pub beam_size: usize,
    pub seed: u64,
    pub matcher: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: RunProvenance,
    pub n_items: usize,
    pub empty: bool,
    pub hits: BTreeMap<usize, f64>,
    pub by_context_language: BTreeMap<String, ContextGroup>,
    pub by_relation: Vec<RelationStat>,
}

/// Builds the full report. Panics if monotonicity over `ks` fails, which
/// would indicate a scoring bug rather than bad input.
pub fn evaluate(
    items: &[EvalItem],
    ks: &[usize],
    matcher: Matcher,
    top_m: usize,
    provenance: RunProvenance,
) -> EvalReport {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let overall = hits_at_k(items, &ks, matcher);
    let report = EvalReport {
        provenance,
        n_items: overall.n_items,
        empty: overall.empty,
        hits: overall.hits,
        by_context_language: breakdown_by_context_language(items, &ks, matcher),
        by_relation: relation_analysis(items, top_m, matcher),
    };
    let violations = report.violations();
    assert!(violations.is_empty(), "report invariants violated: {violations:?}");
    report
}

impl EvalReport {
    /// Monotone hits, percentages in range, shares summing to 100.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let in_range = |v: f64| (0.0..=100.0).contains(&v);
        let mut check_hits = |label: &str, hits: &BTreeMap<usize, f64>| {
            let values: Vec<f64> = hits.values().copied().collect();
            if values.windows(2).any(|w| w[0] > w[1]) {
                out.push(format!("{label}: hits not monotone in k: {hits:?}"));
            }
            if !values.iter().copied().all(in_range) {
                out.push(format!("{label}: percentage out of range"));
            }
        };
        check_hits("overall", &self.hits);
        for (k, g) in &self.by_context_language {
            check_hits(k, &g.hits);
        }
        if !self.by_context_language.is_empty() {
            let total: f64 = self.by_context_language.values().map(|g| g.share_of_test_pct).sum();
            if (total - 100.0).abs() > 0.01 {
                out.push(format!("context shares sum to {total}"));
            }
        }
        out
    }

    /// Copy with every percentage rounded to two decimals.
    pub fn rounded(&self) -> Self {
        let r = |m: &BTreeMap<usize, f64>| m.iter().map(|(k, v)| (*k, round2(*v))).collect();
        Self {
            provenance: self.provenance.clone(),
            n_items: self.n_items,
            empty: self.empty,
            hits: r(&self.hits),
            by_context_language: self
                .by_context_language
                .iter()
                .map(|(k, g)| {
                    let g = ContextGroup {
                        share_of_test_pct: round2(g.share_of_test_pct),
                        n_items: g.n_items,
                        hits: r(&g.hits),
                    };
                    (k.clone(), g)
                })
                .collect(),
            by_relation: self
                .by_relation
                .iter()
                .map(|s| RelationStat {
                    share_of_test_pct: round2(s.share_of_test_pct),
                    h1_pct: round2(s.h1_pct),
                    ..s.clone()
                })
                .collect(),
        }
    }
}

fn hits_header(ks: &[usize]) -> String {
    ks.iter().map(|k| format!("{:>9}", format!("H@{k}"))).collect()
}

fn hits_cells(hits: &BTreeMap<usize, f64>, ks: &[usize]) -> String {
    ks.iter()
        .map(|k| hits.get(k).map_or(format!("{:>9}", "-"), |v| format!("{:>9.2}", round2(*v))))
        .collect()
}

/// One row per labeled report: the layout used for zero-shot vs finetuned
/// and method-comparison tables.
pub fn hits_table(title: &str, rows: &[(String, &EvalReport)]) -> String {
    let ks: Vec<usize> = rows
        .iter()
        .flat_map(|(_, r)| r.hits.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(6) + 2;
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "{:<width$}{:>7}{}", "Method", "n", hits_header(&ks));
    for (label, report) in rows {
        let _ = writeln!(s, "{label:<width$}{:>7}{}", report.n_items, hits_cells(&report.hits, &ks));
    }
    s
}

/// Per-context-language grid: share of the test set and hits per group.
pub fn context_language_table(report: &EvalReport) -> String {
    let ks: Vec<usize> = report.hits.keys().copied().collect();
    let mut s = String::new();
    let _ = writeln!(s, "{:<10}{:>9}{:>7}{}", "Context", "Share", "n", hits_header(&ks));
    for (lang, g) in &report.by_context_language {
        let _ = writeln!(
            s,
            "{lang:<10}{:>9.2}{:>7}{}",
            round2(g.share_of_test_pct),
            g.n_items,
            hits_cells(&g.hits, &ks)
        );
    }
    let _ = writeln!(s, "{:<10}{:>9.2}{:>7}{}", "all", 100.0, report.n_items, hits_cells(&report.hits, &ks));
    s
}

pub fn relation_table(report: &EvalReport, lexicon: &MultilingualLexicon, lang: &LanguageCode) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10}{:<28}{:>7}{:>9}{:>9}", "Relation", "Label", "n", "Share", "H@1");
    for r in &report.by_relation {
        let label = lexicon.relation(&r.relation, lang).unwrap_or("");
        let _ = writeln!(
            s,
            "{:<10}{:<28}{:>7}{:>9.2}{:>9.2}",
            r.relation.as_str(),
            label,
            r.count,
            round2(r.share_of_test_pct),
            round2(r.h1_pct)
        );
    }
    s
}

/// Plot data: context language, share, hits per k.
pub fn context_language_csv(report: &EvalReport) -> String {
    let ks: Vec<usize> = report.hits.keys().copied().collect();
    let mut s = String::from("context_language,share_pct,n");
    for k in &ks {
        let _ = write!(s, ",h{k}");
    }
    s.push('\n');
    for (lang, g) in &report.by_context_language {
        let _ = write!(s, "{lang},{:.2},{}", round2(g.share_of_test_pct), g.n_items);
        for k in &ks {
            let _ = write!(s, ",{:.2}", round2(g.hits.get(k).copied().unwrap_or(0.0)));
        }
        s.push('\n');
    }
    s
}

pub fn relation_csv(report: &EvalReport) -> String {
    let mut s = String::from("relation,count,share_pct,h1_pct\n");
    for r in &report.by_relation {
        let _ = writeln!(s, "{},{},{:.2},{:.2}", r.relation, r.count, round2(r.share_of_test_pct), round2(r.h1_pct));
    }
    s
}

pub fn spelling_overlap_csv(rows: &[SpellingOverlap]) -> String {
    let mut s = String::from("language_a,language_b,role,compared,identical,pct\n");
    for r in rows {
        let role = match r.role {
            EntityRole::Head => "head",
            EntityRole::Tail => "tail",
        };
        let _ = writeln!(
            s,
            "{},{},{role},{},{},{:.2}",
            r.language_a,
            r.language_b,
            r.compared,
            r.identical,
            round2(r.percentage)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::Candidate;
    use crate::model::Triple;
    use crate::reformulation::MixTag;

    fn lang(c: &str) -> LanguageCode {
        LanguageCode::new(c).unwrap()
    }

    fn item(rel: &str, gold: &str, cands: &[&str], ctx: Option<&str>) -> EvalItem {
        EvalItem {
            instance: QAInstance {
                triple: Triple::new(
                    EntityId::new("Q1").unwrap(),
                    RelationId::new(rel).unwrap(),
                    EntityId::new("Q2").unwrap(),
                ),
                question_language: lang("eng"),
                answer_language: lang("eng"),
                question_text: "q".into(),
                gold_answer: gold.into(),
                context: None,
                mix_tag: MixTag::MonoSelf,
            },
            candidates: CandidateList {
                candidates: cands.iter().map(|c| Candidate::new(*c, 0.0)).collect(),
                beam_size: 10,
                num_candidates: 10,
                warnings: vec![],
            },
            context_language: ctx.map(lang),
        }
    }

    #[test]
    fn matcher_examples() {
        assert!(exact_match("Ethiopia", "Ethiopia"));
        assert!(exact_match(" Ethiopia ", "Ethiopia"));
        assert!(!exact_match("It is Addis Ababa", "Addis Ababa"));
        assert!(!exact_match("ethiopia", "Ethiopia"));
        assert!(containment_match("It is Addis Ababa", "Addis Ababa"));
        assert!(!containment_match("Addis", "Addis Ababa"));
        assert!(!containment_match("", "X"));
        assert!(containment_match("Addis Ababa", " Addis Ababa "));
        assert!(exact_match("Caf\u{e9}", "Cafe\u{301}"));
    }

    #[test]
    fn rank_two_of_three() {
        let items = [item("P19", "b", &["a", "b", "c"], None)];
        let h = hits_at_k(&items, &[1, 3], Matcher::Exact);
        assert_eq!(h.hits[&1], 0.0);
        assert_eq!(h.hits[&3], 100.0);
    }

    #[test]
    fn no_candidates_and_no_items() {
        let h = hits_at_k(&[item("P19", "b", &[], None)], &DEFAULT_KS, Matcher::Exact);
        assert!(h.hits.values().all(|&v| v == 0.0));
        let h = hits_at_k(&[], &DEFAULT_KS, Matcher::Exact);
        assert!(h.empty);
        assert_eq!(h.n_items, 0);
        assert!(h.hits.values().all(|&v| v == 0.0));
    }

    #[test]
    fn context_free_is_single_group() {
        let items = [item("P19", "a", &["a"], None), item("P19", "a", &["b"], None)];
        let g = breakdown_by_context_language(&items, &[1], Matcher::Exact);
        assert_eq!(g.len(), 1);
        assert_eq!(g[NO_CONTEXT].share_of_test_pct, 100.0);
        assert_eq!(g[NO_CONTEXT].hits[&1], 50.0);
    }

    #[test]
    fn relations_ranked_by_frequency_then_id() {
        let items = [
            item("P27", "a", &["a"], None),
            item("P19", "a", &["x"], None),
            item("P19", "a", &["a"], None),
            item("P20", "a", &["a"], None),
        ];
        let r = relation_analysis(&items, 2, Matcher::Exact);
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].relation.as_str(), r[0].count, r[0].h1_pct), ("P19", 2, 50.0));
        assert_eq!(r[1].relation.as_str(), "P20");
    }

    #[test]
    fn report_tables_render() {
        let items = [item("P19", "a", &["a"], Some("amh")), item("P19", "a", &["b", "a"], None)];
        let report = evaluate(&items, &[3, 1], Matcher::Exact, 5, RunProvenance::default());
        assert_eq!(report.hits.keys().copied().collect::<Vec<_>>(), [1, 3]);
        let t = context_language_table(&report);
        assert!(t.contains("amh"));
        assert!(t.contains("none"));
        let t = hits_table("Methods", &[("heuristic".into(), &report)]);
        assert!(t.lines().nth(2).unwrap().contains("50.00"));
        assert!(context_language_csv(&report).starts_with("context_language,share_pct,n,h1,h3\n"));
    }

    #[test]
    fn spelling_and_gaps() {
        let (tir, amh) = (lang("tir"), lang("amh"));
        let e = |s: &str| EntityId::new(s).unwrap();
        let p31 = RelationId::new("P31").unwrap();
        let mut lex = MultilingualLexicon::new();
        lex.insert_entity(e("Q5"), tir.clone(), "ሰብ");
        for (id, t, a) in [("Q1", "ሀ", Some("ሀ")), ("Q2", "ለ", Some("ሎ")), ("Q3", "ሐ", None), ("Q4", "መ", None)] {
            lex.insert_entity(e(id), tir.clone(), t);
            if let Some(a) = a {
                lex.insert_entity(e(id), amh.clone(), a);
            }
        }
        let kg = KnowledgeGraph::from_triples(
            tir.clone(),
            ["Q1", "Q2", "Q3"].iter().map(|h| Triple::new(e(h), p31.clone(), e("Q5"))).chain([Triple::new(
                e("Q4"),
                RelationId::new("P19").unwrap(),
                e("Q1"),
            )]),
        );
        let s = spelling_overlap(&lex, &kg, &tir, &amh, EntityRole::Head);
        assert_eq!((s.compared, s.identical, s.percentage), (2, 1, 50.0));
        let gaps = kg_gap_report(&kg, &KnowledgeGraph::new(amh.clone()), &lex, &p31);
        let classes: Vec<_> = gaps.iter().map(|g| (g.class.as_str(), g.entities.clone())).collect();
        assert_eq!(classes, [("unclassified", vec![e("Q4")]), ("ሰብ", vec![e("Q3")])]);
        assert!(kg_gap_report(&kg, &kg, &lex, &p31).is_empty());
    }
}
