//! Seeded synthetic corpora: CVE-style vulnerability descriptions, a
//! word-determined pattern language and a two-class co-occurrence corpus.
//!
//! Every entity type in the CVE generator draws 60% of its mentions from a
//! fixed head list and 40% from a compositional generator, so types differ
//! in how often they occur and not in how hard a single mention is.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{extract_spans, Sentence, Token};
use crate::numerics::{seeded_rng, SeededRng};

pub const CVE_TYPES: [&str; 7] = ["vendor", "application", "version", "os", "file", "hardware", "edition"];

#[derive(Debug, Clone, PartialEq)]
pub struct CveConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Per-slot probability of lexical noise in the outside-entity text.
    pub noise: f64,
    pub p_vendor: f64,
    pub p_version: f64,
    pub p_os: f64,
    pub p_file: f64,
    pub p_hardware: f64,
    pub p_edition: f64,
}

impl Default for CveConfig {
    fn default() -> Self {
        Self {
            sentences: 2000,
            seed: 42,
            noise: 0.1,
            p_vendor: 0.9,
            p_version: 0.85,
            p_os: 0.4,
            p_file: 0.3,
            p_hardware: 0.1,
            p_edition: 0.1,
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "ten", "vor", "zi", "qua", "nex", "ul", "tri", "sol", "bar", "den", "fi", "gra", "po", "sen",
    "tal", "mu", "rix", "ven", "do", "cor",
];

const VENDORS: &[&str] = &[
    "Apple", "Microsoft", "Adobe", "Oracle", "Cisco", "IBM", "Google", "Mozilla", "Novell", "SAP", "HP", "Juniper",
    "Symantec", "McAfee", "RealNetworks", "Apache", "Joomla", "WordPress", "VMware", "Citrix", "Siemens", "Linksys",
    "Netgear", "Sun", "Autodesk", "Trend Micro", "Red Hat", "Samsung",
];
const VENDOR_SUFFIXES: &[&str] = &["Systems", "Software", "Networks", "Labs", "Technologies"];

const APPLICATIONS: &[&str] = &[
    "QuickTime", "Internet Explorer", "Acrobat Reader", "Flash Player", "Firefox", "Safari", "Office", "Word", "Excel",
    "WebLogic Server", "Tomcat", "Java Runtime Environment", "Thunderbird", "Outlook", "PowerPoint", "iTunes",
    "RealPlayer", "Lotus Notes", "WebSphere Application Server", "Shockwave Player", "SeaMonkey", "Chrome",
    "Exchange Server", "SharePoint Server", "Windows Media Player", "Content Manager",
];
const APPLICATION_SUFFIXES: &[&str] = &["Server", "Manager", "Studio", "Player", "Suite", "Viewer", "Portal"];

const OSES: &[&str] = &[
    "Windows XP", "Windows Vista", "Windows 7", "Windows Server 2003", "Windows Server 2008", "Mac OS X", "Linux",
    "Solaris", "FreeBSD", "AIX", "HP-UX", "Android", "iOS", "OpenBSD", "NetBSD", "Linux kernel",
];
const OS_SUFFIXES: &[&str] = &["OS", "Linux", "BSD"];

const FILE_STEMS: &[&str] = &[
    "index", "admin", "login", "mshtml", "kernel32", "upload", "config", "search", "view", "shell32", "profile",
    "register", "download", "gallery", "forum", "ntdll",
];
const FILE_EXTS: &[&str] = &["php", "dll", "cgi", "asp", "js", "sys", "exe", "c", "jsp", "pl"];

const HARDWARE: &[&str] = &[
    "ASA 5500", "Catalyst 6500", "WRT54GL", "DIR-615", "LaserJet 4250", "ProCurve 2610", "SRX 3400", "RV320",
    "Aironet 1200", "Galaxy S4", "iPhone 4", "BIG-IP", "TL-WR740N", "SCALANCE X200",
];

const EDITIONS: &[&str] = &[
    "Enterprise Edition", "Professional", "Home Premium", "Standard Edition", "Ultimate", "Starter", "Express",
    "Community Edition", "Datacenter", "Business", "SP2", "SP1", "Service Pack 3", "x64",
];

const VULNS: &[&[&str]] = &[
    &["Buffer", "overflow"],
    &["Heap-based", "buffer", "overflow"],
    &["Stack-based", "buffer", "overflow"],
    &["Integer", "overflow"],
    &["Cross-site", "scripting", "(", "XSS", ")", "vulnerability"],
    &["SQL", "injection", "vulnerability"],
    &["Use-after-free", "vulnerability"],
    &["Directory", "traversal", "vulnerability"],
    &["Multiple", "unspecified", "vulnerabilities"],
    &["Memory", "corruption", "vulnerability"],
    &["Format", "string", "vulnerability"],
];
const COMPONENTS: &[&str] = &["web", "interface", "parser", "driver", "module", "daemon", "service", "plugin"];
const ATTACKERS: &[&[&str]] = &[
    &["remote", "attackers"],
    &["local", "users"],
    &["remote", "authenticated", "users"],
    &["context-dependent", "attackers"],
    &["attackers"],
];
const IMPACTS: &[&[&str]] = &[
    &["execute", "arbitrary", "code"],
    &["cause", "a", "denial", "of", "service", "(", "crash", ")"],
    &["inject", "arbitrary", "web", "script", "or", "HTML"],
    &["execute", "arbitrary", "SQL", "commands"],
    &["read", "arbitrary", "files"],
    &["gain", "privileges"],
    &["obtain", "sensitive", "information"],
    &["bypass", "authentication"],
];
const VECTORS: &[&[&str]] = &[
    &["a", "crafted", "file"],
    &["a", "long", "string"],
    &["the", "id", "parameter"],
    &["a", "malformed", "packet"],
    &["a", "crafted", "web", "site"],
    &["unknown", "vectors"],
    &["a", "crafted", "document"],
    &["a", ".", ".", "in", "the", "path"],
];
const PREDICATE_VERBS: &[&str] = &["allows", "permits", "lets", "might", "allow"];
const FILLERS: &[&str] = &[
    "possibly", "remotely", "potentially", "reportedly", "also", "certain", "specially", "unspecified", "affected",
];

struct Builder<'r> {
    rng: &'r mut SeededRng,
    noise: f64,
    tokens: Vec<(String, String)>,
}

impl Builder<'_> {
    fn outside(&mut self, words: &[&str]) {
        for w in words {
            if self.rng.random_bool(self.noise / 2.0) {
                let filler = FILLERS.choose(self.rng).expect("non-empty");
                self.tokens.push((filler.to_string(), "O".into()));
            }
            self.tokens.push((w.to_string(), "O".into()));
        }
        if self.rng.random_bool(self.noise / 2.0) {
            let junk = pseudo_word(self.rng);
            self.tokens.push((junk, "O".into()));
        }
    }

    fn entity(&mut self, entity_type: &str, phrase: &str) {
        for (k, w) in phrase.split_whitespace().enumerate() {
            let prefix = if k == 0 { "B" } else { "I" };
            self.tokens.push((w.to_string(), format!("{prefix}-{entity_type}")));
        }
    }

    fn finish(self) -> Sentence {
        let tokens = self
            .tokens
            .into_iter()
            .map(|(w, t)| Token::new(w, t).expect("generated tokens are valid"))
            .collect();
        Sentence::new(tokens).expect("generated sentences are non-empty")
    }
}

fn pick<'a>(rng: &mut SeededRng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty pool")
}

fn pseudo_word(rng: &mut SeededRng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| pick(rng, SYLLABLES)).collect()
}

fn capitalized(rng: &mut SeededRng) -> String {
    let w = pseudo_word(rng);
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn from_head_or_novel(rng: &mut SeededRng, head: &[&str], novel: impl FnOnce(&mut SeededRng) -> String) -> String {
    if rng.random_bool(0.6) {
        pick(rng, head).to_string()
    } else {
        novel(rng)
    }
}

fn number(rng: &mut SeededRng) -> String {
    let parts = rng.random_range(1..=3);
    let mut s = rng.random_range(1..=12).to_string();
    for _ in 1..parts {
        s.push_str(&format!(".{}", rng.random_range(0..=20)));
    }
    s
}

fn vendor(rng: &mut SeededRng) -> String {
    from_head_or_novel(rng, VENDORS, |r| {
        let base = capitalized(r);
        if r.random_bool(0.5) {
            format!("{base} {}", pick(r, VENDOR_SUFFIXES))
        } else {
            base
        }
    })
}

fn application(rng: &mut SeededRng) -> String {
    from_head_or_novel(rng, APPLICATIONS, |r| {
        let base = capitalized(r);
        if r.random_bool(0.5) {
            format!("{base} {}", pick(r, APPLICATION_SUFFIXES))
        } else {
            base
        }
    })
}

fn version(rng: &mut SeededRng) -> String {
    let n = number(rng);
    match rng.random_range(0..5) {
        0 => n,
        1 => format!("before {n}"),
        2 => format!("{n} and earlier"),
        3 => format!("{n} through {}", number(rng)),
        _ => format!("prior to {n}"),
    }
}

fn os(rng: &mut SeededRng) -> String {
    from_head_or_novel(rng, OSES, |r| format!("{} {}", capitalized(r), pick(r, OS_SUFFIXES)))
}

fn file(rng: &mut SeededRng) -> String {
    let stem = if rng.random_bool(0.6) {
        pick(rng, FILE_STEMS).to_string()
    } else {
        pseudo_word(rng)
    };
    let name = format!("{stem}.{}", pick(rng, FILE_EXTS));
    if rng.random_bool(0.3) {
        format!("{}/{name}", pseudo_word(rng))
    } else {
        name
    }
}

fn hardware(rng: &mut SeededRng) -> String {
    from_head_or_novel(rng, HARDWARE, |r| {
        let base = capitalized(r);
        let num = r.random_range(100..10000);
        if r.random_bool(0.5) {
            format!("{base} {num}")
        } else {
            format!("{}-{num}", base.to_uppercase())
        }
    })
}

fn edition(rng: &mut SeededRng) -> String {
    from_head_or_novel(rng, EDITIONS, |r| format!("{} Edition", capitalized(r)))
}

fn cve_sentence(rng: &mut SeededRng, cfg: &CveConfig) -> Sentence {
    let has_hw = rng.random_bool(cfg.p_hardware);
    let has_vendor = rng.random_bool(cfg.p_vendor);
    let has_version = rng.random_bool(cfg.p_version);
    let has_os = rng.random_bool(cfg.p_os);
    let has_file = rng.random_bool(cfg.p_file);
    let has_edition = rng.random_bool(cfg.p_edition);
    let names = (
        vendor(rng),
        application(rng),
        version(rng),
        os(rng),
        file(rng),
        hardware(rng),
        edition(rng),
    );
    let vuln = *VULNS.choose(rng).expect("non-empty");
    let component = pick(rng, COMPONENTS);
    let attackers = *ATTACKERS.choose(rng).expect("non-empty");
    let impact = *IMPACTS.choose(rng).expect("non-empty");
    let vector = *VECTORS.choose(rng).expect("non-empty");
    let verb = pick(rng, PREDICATE_VERBS);
    let edition_after_os = has_os && rng.random_bool(0.5);
    let hw_in_device_clause = rng.random_bool(0.5);
    let os_lead: &[&str] = match rng.random_range(0..3) {
        0 => &["on"],
        1 => &["when", "running", "on"],
        _ => &["for"],
    };

    let mut b = Builder {
        rng,
        noise: cfg.noise,
        tokens: Vec::new(),
    };
    b.outside(vuln);
    if has_hw && hw_in_device_clause {
        b.outside(&["in", "the", component, "on"]);
        if has_vendor {
            b.entity("vendor", &names.0);
        }
        b.entity("hardware", &names.5);
        b.outside(&["devices"]);
        if has_version {
            b.outside(&["with", "firmware"]);
            b.entity("version", &names.2);
        }
    } else {
        if has_file {
            b.outside(&["in"]);
            b.entity("file", &names.4);
        }
        b.outside(&["in"]);
        if has_vendor {
            b.entity("vendor", &names.0);
        }
        if has_hw {
            b.entity("hardware", &names.5);
        } else {
            b.entity("application", &names.1);
        }
        if has_version {
            b.entity("version", &names.2);
        }
        if has_edition && !edition_after_os {
            b.entity("edition", &names.6);
        }
    }
    if has_os {
        b.outside(os_lead);
        b.entity("os", &names.3);
        if has_edition && edition_after_os {
            b.entity("edition", &names.6);
        }
    }
    if verb == "might" {
        b.outside(&["might", "allow"]);
    } else if verb == "allow" {
        b.outside(&["could", "allow"]);
    } else {
        b.outside(&[verb]);
    }
    b.outside(attackers);
    b.outside(&["to"]);
    b.outside(impact);
    b.outside(&["via"]);
    b.outside(vector);
    b.outside(&["."]);
    b.finish()
}

/// CVE-style sentences tagged with the seven `CVE_TYPES`.
pub fn generate_cve_corpus(cfg: &CveConfig) -> Vec<Sentence> {
    let mut rng = seeded_rng(cfg.seed);
    (0..cfg.sentences).map(|_| cve_sentence(&mut rng, cfg)).collect()
}

/// Number of gold spans per entity type.
pub fn span_counts(corpus: &[Sentence]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in corpus {
        for span in extract_spans(&s.tags()) {
            *counts.entry(span.entity_type).or_default() += 1;
        }
    }
    counts
}

/// Drops, in order, every sentence that would push one of `types` past
/// `cap` spans.
pub fn cap_type_spans(corpus: &[Sentence], types: &[&str], cap: usize) -> Vec<Sentence> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for s in corpus {
        let mut local: BTreeMap<String, usize> = BTreeMap::new();
        for span in extract_spans(&s.tags()) {
            if types.contains(&span.entity_type.as_str()) {
                *local.entry(span.entity_type).or_default() += 1;
            }
        }
        let fits = local.iter().all(|(t, &n)| seen.get(t).copied().unwrap_or(0) + n <= cap);
        if fits {
            for (t, n) in local {
                *seen.entry(t).or_default() += n;
            }
            out.push(s.clone());
        }
    }
    out
}

/// Lexicon of the pattern language: each word carries one fixed tag.
pub fn pattern_lexicon() -> Vec<(String, String)> {
    let mut lex = Vec::new();
    for k in 0..30 {
        lex.push((format!("w{k}"), "O".to_string()));
    }
    for ty in ["alpha", "beta", "gamma"] {
        for k in 0..8 {
            lex.push((format!("{ty}{k}"), format!("B-{ty}")));
            lex.push((format!("{ty}{k}x"), format!("I-{ty}")));
        }
    }
    lex
}

/// Sentences over [`pattern_lexicon`]; a tag is a function of its word.
pub fn pattern_language(sentences: usize, seed: u64) -> Vec<Sentence> {
    let lex = pattern_lexicon();
    let outside: Vec<&str> = lex.iter().filter(|(_, t)| t == "O").map(|(w, _)| w.as_str()).collect();
    let begins: Vec<&(String, String)> = lex.iter().filter(|(_, t)| t.starts_with("B-")).collect();
    let insides: Vec<&(String, String)> = lex.iter().filter(|(_, t)| t.starts_with("I-")).collect();
    let mut rng = seeded_rng(seed);
    (0..sentences)
        .map(|_| {
            let mut pairs: Vec<(String, String)> = Vec::new();
            let chunks = rng.random_range(3..=8);
            for _ in 0..chunks {
                if rng.random_bool(0.6) {
                    pairs.push((pick(&mut rng, &outside).to_string(), "O".into()));
                } else {
                    let (w, t) = *begins.choose(&mut rng).expect("non-empty");
                    pairs.push((w.clone(), t.clone()));
                    let ty = &t[2..];
                    let same: Vec<&&(String, String)> = insides.iter().filter(|(_, it)| &it[2..] == ty).collect();
                    for _ in 0..rng.random_range(0..=2) {
                        let (iw, it) = **same.choose(&mut rng).expect("non-empty");
                        pairs.push((iw.clone(), it.clone()));
                    }
                }
            }
            Sentence::from_pairs(&pairs).expect("valid pattern sentence")
        })
        .collect()
}

/// Corpus whose `class_a` words share one context distribution and
/// `class_b` words another. Returns `(corpus, class_a, class_b)`.
pub fn two_class_corpus(sentences: usize, seed: u64) -> (Vec<Sentence>, Vec<String>, Vec<String>) {
    let class_a: Vec<String> = (0..8).map(|k| format!("apple{k}")).collect();
    let class_b: Vec<String> = (0..8).map(|k| format!("stone{k}")).collect();
    let ctx_a: Vec<String> = (0..6).map(|k| format!("eat{k}")).collect();
    let ctx_b: Vec<String> = (0..6).map(|k| format!("throw{k}")).collect();
    let mut rng = seeded_rng(seed);
    let corpus = (0..sentences)
        .map(|_| {
            let (words, ctx) = if rng.random_bool(0.5) {
                (&class_a, &ctx_a)
            } else {
                (&class_b, &ctx_b)
            };
            let mut pairs: Vec<(String, &str)> = Vec::new();
            for _ in 0..2 {
                pairs.push((ctx.choose(&mut rng).expect("non-empty").clone(), "O"));
            }
            pairs.push((words.choose(&mut rng).expect("non-empty").clone(), "O"));
            for _ in 0..2 {
                pairs.push((ctx.choose(&mut rng).expect("non-empty").clone(), "O"));
            }
            Sentence::from_pairs(&pairs).expect("valid sentence")
        })
        .collect();
    (corpus, class_a, class_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TagSet;

    #[test]
    fn cve_corpus_is_deterministic_and_typed() {
        let cfg = CveConfig { sentences: 200, ..Default::default() };
        let a = generate_cve_corpus(&cfg);
        assert_eq!(a, generate_cve_corpus(&cfg));
        let counts = span_counts(&a);
        for ty in CVE_TYPES {
            assert!(counts.get(ty).copied().unwrap_or(0) > 0, "no {ty} spans");
        }
        assert!(counts["application"] > counts["hardware"]);
        TagSet::from_corpus(&a).unwrap();
    }

    #[test]
    fn cap_limits_spans() {
        let cfg = CveConfig { sentences: 600, ..Default::default() };
        let c = generate_cve_corpus(&cfg);
        let capped = cap_type_spans(&c, &["hardware", "edition"], 10);
        let counts = span_counts(&capped);
        assert!(counts["hardware"] <= 10 && counts["edition"] <= 10);
        assert!(counts["application"] > 100);
    }

    #[test]
    fn pattern_tags_follow_words() {
        let lex: BTreeMap<String, String> = pattern_lexicon().into_iter().collect();
        for s in pattern_language(50, 1) {
            for t in s.tokens() {
                assert_eq!(lex[&t.word], t.tag);
            }
        }
    }
}
