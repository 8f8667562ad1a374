//! Synthetic 4-language fixture: 100 people, 200 triples over three
//! relations, labels, question templates and a small wiki.
//!
//! Facts are moved out of the first paragraph (or articles dropped) on a
//! fixed pattern so that heuristic context is available for some test items
//! and not others. Every fact sentence names exactly one tail, so extracting
//! labels from a context sentence can only ever find the right one.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const LANGS: [&str; 4] = ["tir", "amh", "eng", "ara"];
pub const N_HEADS: usize = 100;
pub const RELATIONS: [&str; 3] = ["P19", "P27", "P106"];

pub struct Lang {
    pub code: &'static str,
    /// Label prefixes for people, towns, countries and jobs.
    pub prefixes: [&'static str; 4],
    /// Relation labels, in [`RELATIONS`] order.
    pub relations: [&'static str; 3],
    /// `(relation, gender, pattern)`.
    pub templates: &'static [(&'static str, &'static str, &'static str)],
    /// Intro, birth, citizenship and job sentences; `{h}` head, `{t}` tail.
    pub sentences: [&'static str; 4],
    pub hard: &'static str,
    /// Mentions a relation label `{r}` and nothing else.
    pub relation_only: &'static str,
}

pub const TABLE: [Lang; 4] = [
    Lang {
        code: "tir",
        prefixes: ["ሰብ", "ከተማ", "ሃገር", "ስራሕ"],
        relations: ["ቦታ ልደት", "ዜግነት", "ሞያ"],
        templates: &[
            ("P19", "neutral", "{head} ኣበይ ተወሊዱ"),
            ("P19", "female", "{head} ኣበይ ተወሊዳ"),
            ("P27", "neutral", "{head} ዜግነቱ እንታይ እዩ"),
            ("P106", "neutral", "{head} ሞያኡ እንታይ እዩ"),
        ],
        sentences: ["{h} ሰብ እዩ።", "{h} ኣብ {t} ተወሊዱ።", "{h} ዜጋ {t} እዩ።", "{h} ብስራሕ {t} እዩ።"],
        hard: "ካልእ ዝፍለጥ የለን።",
        relation_only: "{r} ኣይተፈልጠን።",
    },
    Lang {
        code: "amh",
        prefixes: ["ሰው", "ከተማ", "ሀገር", "ስራ"],
        relations: ["የትውልድ ቦታ", "ዜግነት", "ሙያ"],
        templates: &[
            ("P19", "neutral", "{head} የት ተወለደ"),
            ("P27", "neutral", "{head} ዜግነቱ ምንድን ነው"),
            ("P106", "neutral", "{head} ሙያው ምንድን ነው"),
        ],
        sentences: ["{h} ሰው ነው።", "{h} በ{t} ተወለደ።", "{h} የ{t} ዜጋ ነው።", "{h} በሙያው {t} ነው።"],
        hard: "ሌላ የሚታወቅ ነገር የለም።",
        relation_only: "{r} አይታወቅም።",
    },
    Lang {
        code: "eng",
        prefixes: ["Person", "Town", "Country", "Job"],
        relations: ["place of birth", "country of citizenship", "occupation"],
        templates: &[
            ("P19", "neutral", "Where was {head} born"),
            ("P27", "neutral", "Which country is {head} a citizen of"),
            ("P106", "neutral", "What is the occupation of {head}"),
        ],
        sentences: [
            "{h} is a person from the fixture wiki.",
            "{h} was born in {t}.",
            "{h} is a citizen of {t}.",
            "{h} works as a {t}.",
        ],
        hard: "Nothing else is known.",
        relation_only: "The {r} is not recorded.",
    },
    Lang {
        code: "ara",
        prefixes: ["شخص", "مدينة", "دولة", "وظيفة"],
        relations: ["مكان الولادة", "الجنسية", "المهنة"],
        templates: &[
            ("P19", "neutral", "أين ولد {head}"),
            ("P27", "neutral", "ما هي جنسية {head}"),
            ("P106", "neutral", "ما هي مهنة {head}"),
        ],
        sentences: ["{h} شخص من موسوعة الاختبار.", "ولد {h} في {t}.", "{h} مواطن من {t}.", "يعمل {h} في {t}."],
        hard: "لا يعرف شيء آخر.",
        relation_only: "{r} غير معروف.",
    },
];

pub fn lang(code: &str) -> &'static Lang {
    TABLE.iter().find(|l| l.code == code).expect("fixture language")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Person = 0,
    Town = 1,
    Country = 2,
    Job = 3,
}

pub fn entity_id(kind: Kind, i: usize) -> String {
    let base = [100, 1000, 2000, 3000][kind as usize];
    format!("Q{}", base + i)
}

pub fn label(code: &str, kind: Kind, i: usize) -> String {
    format!("{}{i:03}", lang(code).prefixes[kind as usize])
}

/// The two facts of person `n`: `(relation index, tail kind, tail index)`.
pub fn facts(n: usize) -> [(usize, Kind, usize); 2] {
    let second = if n % 2 == 0 { (1, Kind::Country, (n / 2) % 10) } else { (2, Kind::Job, (n / 2) % 20) };
    [(0, Kind::Town, n % 40), second]
}

/// Whether person `n` has an article in `code`.
pub fn has_article(code: &str, n: usize) -> bool {
    !(code == "tir" && n % 7 == 6)
}

/// Whether fact `f` (0 or 1) of person `n` is stated in the first paragraph.
pub fn in_first_paragraph(n: usize, f: usize) -> bool {
    match f {
        0 => n % 5 != 0,
        _ => n % 4 != 3,
    }
}

pub fn triples_tsv() -> String {
    let mut s = String::new();
    for n in 0..N_HEADS {
        for (r, kind, i) in facts(n) {
            let _ = writeln!(s, "{}\t{}\t{}", entity_id(Kind::Person, n), RELATIONS[r], entity_id(kind, i));
        }
    }
    // Off-list relation and one broken line, both dropped on ingestion.
    s.push_str("Q100\tP999\tQ1000\nnot a triple\n");
    s
}

pub fn labels_tsv() -> String {
    let mut s = String::new();
    for l in &TABLE {
        for n in 0..N_HEADS {
            if l.code == "amh" && n % 10 == 9 {
                continue;
            }
            let _ = writeln!(s, "{}\t{}\t{}", entity_id(Kind::Person, n), l.code, label(l.code, Kind::Person, n));
        }
        for (kind, count) in [(Kind::Town, 40), (Kind::Country, 10), (Kind::Job, 20)] {
            for i in 0..count {
                let _ = writeln!(s, "{}\t{}\t{}", entity_id(kind, i), l.code, label(l.code, kind, i));
            }
        }
        for (r, rel) in RELATIONS.iter().enumerate() {
            let _ = writeln!(s, "{rel}\t{}\t{}", l.code, l.relations[r]);
        }
    }
    s
}

pub fn templates_tsv() -> String {
    let mut s = String::new();
    for l in &TABLE {
        for (rel, gender, pattern) in l.templates {
            let _ = writeln!(s, "{rel}\t{}\t{gender}\t{pattern}", l.code);
        }
    }
    s
}

pub fn article(code: &str, n: usize) -> String {
    let l = lang(code);
    let head = label(code, Kind::Person, n);
    let fill = |t: &str, tail: &str| t.replace("{h}", &head).replace("{t}", tail);
    let mut first = vec![fill(l.sentences[0], "")];
    let mut body = vec![l.hard.to_owned()];
    for (f, (r, kind, i)) in facts(n).into_iter().enumerate() {
        let sentence = fill(l.sentences[1 + r], &label(code, kind, i));
        if in_first_paragraph(n, f) {
            first.push(sentence);
        } else {
            body.push(sentence);
        }
    }
    for rel in l.relations {
        body.push(l.relation_only.replace("{r}", rel));
    }
    format!("{}\n\n{}", first.join(" "), body.join(" "))
}

pub fn passages_jsonl() -> String {
    let mut s = String::new();
    for l in &TABLE {
        for n in (0..N_HEADS).filter(|&n| has_article(l.code, n)) {
            let record = serde_json::json!({
                "doc_id": format!("{}-{n:03}", l.code),
                "head_entity": entity_id(Kind::Person, n),
                "lang": l.code,
                "title": label(l.code, Kind::Person, n),
                "text": article(l.code, n),
            });
            let _ = writeln!(s, "{record}");
        }
    }
    s
}

pub fn genders_tsv() -> String {
    (0..N_HEADS)
        .map(|n| format!("{}\t{}\n", entity_id(Kind::Person, n), if n % 3 == 0 { "female" } else { "male" }))
        .collect()
}

pub fn descriptions_tsv() -> String {
    let mut s = String::new();
    for n in (0..N_HEADS).filter(|n| n % 2 == 0) {
        let _ = writeln!(s, "{}\teng\tperson in the fixture wiki", entity_id(Kind::Person, n));
        let _ = writeln!(s, "{}\ttir\tሰብ ኣብ ፈተነ", entity_id(Kind::Person, n));
    }
    s
}

/// Input files written to a temporary directory.
pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
}

pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path().to_owned();
    let anchored: String = (0..N_HEADS).map(|n| entity_id(Kind::Person, n) + "\n").collect();
    let files = [
        ("triples.tsv", triples_tsv()),
        ("labels.tsv", labels_tsv()),
        ("anchored.txt", anchored),
        ("relations.txt", RELATIONS.join("\n") + "\n"),
        ("templates.tsv", templates_tsv()),
        ("passages.jsonl", passages_jsonl()),
        ("genders.tsv", genders_tsv()),
        ("descriptions.tsv", descriptions_tsv()),
    ];
    for (name, content) in files {
        fs::write(root.join(name), content).expect("write fixture file");
    }
    Fixture { _dir: dir, root }
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Config values for a Tigrinya run writing to `out_dir`.
    pub fn settings(&self, out_dir: &Path) -> Vec<(String, String)> {
        let p = |name: &str| self.path(name).display().to_string();
        [
            ("target_language", "tir".to_owned()),
            ("triples", p("triples.tsv")),
            ("labels", p("labels.tsv")),
            ("anchored_entities", p("anchored.txt")),
            ("relations", p("relations.txt")),
            ("templates", p("templates.tsv")),
            ("passages", p("passages.jsonl")),
            ("genders", p("genders.tsv")),
            ("descriptions", p("descriptions.tsv")),
            ("log_level", "warn".to_owned()),
            ("out_dir", out_dir.display().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }

    /// [`Fixture::settings`] with `extra` applied on top.
    pub fn settings_with(&self, out_dir: &Path, extra: &[(&str, &str)]) -> Vec<(String, String)> {
        let mut s = self.settings(out_dir);
        s.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        s
    }

    /// Writes the settings as a config file next to the inputs.
    pub fn config_file(&self, name: &str, out_dir: &Path, extra: &[(&str, &str)]) -> PathBuf {
        let text: String = self.settings_with(out_dir, extra).iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let path = self.path(name);
        fs::write(&path, text).expect("write config");
        path
    }
}

/// Every file under `dir`, relative path → bytes, in sorted order.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut std::collections::BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("read dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                out.insert(path.strip_prefix(base).unwrap().to_owned(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
