//! Placeholder templates, the demographic keyword lexicon, and deterministic
//! prompt-suite enumeration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::digest_fields;

pub const SLOT: &str = "XYZ";
pub const ARTICLE_SLOT: &str = "(a)";
pub const AGREEMENT_SLOT: &str = "do/does";

pub const SHIPPED_LEXICON: &str = include_str!("../data/prompts/lexicon.tsv");
pub const SHIPPED_TEMPLATES: &str = include_str!("../data/prompts/templates.toml");

/// Dimensions and their demographics, in report order.
pub const TAXONOMY: [(&str, &[&str]); 5] = [
    ("gender", &["woman", "man", "transgender"]),
    ("race", &["asian", "black", "white"]),
    ("sexual_orientation", &["asexual", "bisexual", "heterosexual", "homosexual"]),
    ("religion", &["christian", "jewish", "muslim"]),
    ("socioeconomic_class", &["poor", "rich"]),
];

/// `(dimension index, demographic index)` in [`TAXONOMY`].
pub fn taxonomy_position(demographic: &str) -> Option<(usize, usize)> {
    TAXONOMY
        .iter()
        .enumerate()
        .find_map(|(di, (_, demos))| demos.iter().position(|d| *d == demographic).map(|i| (di, i)))
}

pub fn dimension_of(demographic: &str) -> Option<&'static str> {
    taxonomy_position(demographic).map(|(di, _)| TAXONOMY[di].0)
}

/// Every demographic in taxonomy order.
pub fn demographics() -> impl Iterator<Item = (&'static str, &'static str)> {
    TAXONOMY.iter().flat_map(|(dim, demos)| demos.iter().map(move |d| (*dim, *d)))
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($name).to_lowercase())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $text),+ })
            }
        }
    };
}

keyword_enum!(Number { Singular => "singular", Plural => "plural", Mass => "mass" });
keyword_enum!(PartOfSpeech { Noun => "noun", Adjective => "adjective", Pronoun => "pronoun" });
keyword_enum!(Case { Subject => "subject", Object => "object", Any => "any" });
keyword_enum!(Article { A => "a", An => "an", None => "none" });
keyword_enum!(SlotPosition { Subject => "subject", Object => "object", Predicate => "predicate" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub surface: String,
    pub demographic_id: String,
    pub dimension_id: String,
    pub number: Option<Number>,
    pub pos: PartOfSpeech,
    pub case: Option<Case>,
    pub article_override: Option<Article>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub pattern: String,
    pub slot_position: SlotPosition,
}

impl Template {
    pub fn new(id: &str, pattern: &str, slot_position: SlotPosition) -> Result<Self> {
        let t = Self { id: id.into(), pattern: pattern.into(), slot_position };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.pattern.matches(SLOT).count() != 1 {
            return Err(Error::Config(format!("template {}: pattern must contain exactly one {SLOT}", self.id)));
        }
        if self.pattern.matches(ARTICLE_SLOT).count() > 1 || self.pattern.matches(AGREEMENT_SLOT).count() > 1 {
            return Err(Error::Config(format!("template {}: repeated slot", self.id)));
        }
        Ok(())
    }
}

/// One keyword class a template accepts, written `pos` or `pos/detail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    Noun(Number),
    Adjective,
    Pronoun(Case),
}

impl Selector {
    pub fn matches(&self, kw: &Keyword) -> bool {
        match (self, kw.pos) {
            (Selector::Noun(n), PartOfSpeech::Noun) => kw.number == Some(*n),
            (Selector::Adjective, PartOfSpeech::Adjective) => true,
            (Selector::Pronoun(c), PartOfSpeech::Pronoun) => {
                matches!(kw.case, Some(k) if k == *c || k == Case::Any)
            }
            _ => false,
        }
    }
}

impl FromStr for Selector {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once('/') {
            Some(("noun", n)) => Ok(Selector::Noun(n.parse()?)),
            Some(("pronoun", c)) => Ok(Selector::Pronoun(c.parse()?)),
            None if s == "adjective" => Ok(Selector::Adjective),
            _ => Err(format!("unknown selector {s:?}")),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Noun(n) => write!(f, "noun/{n}"),
            Selector::Adjective => f.write_str("adjective"),
            Selector::Pronoun(c) => write!(f, "pronoun/{c}"),
        }
    }
}

/// Which keyword classes each template accepts, plus explicit pair exclusions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompatibilityMatrix {
    pub accepts: BTreeMap<String, Vec<Selector>>,
    /// `(template id, surface)` pairs rejected regardless of class.
    pub exclude: BTreeSet<(String, String)>,
}

impl CompatibilityMatrix {
    pub fn allows(&self, template: &Template, kw: &Keyword) -> bool {
        if self.exclude.contains(&(template.id.clone(), kw.surface.clone())) {
            return false;
        }
        self.accepts.get(&template.id).is_some_and(|sels| sels.iter().any(|s| s.matches(kw)))
    }

    /// Accept every class everywhere; `render` still rejects pairs it cannot
    /// realize grammatically.
    pub fn permissive(templates: &[Template]) -> Self {
        let all = vec![
            Selector::Noun(Number::Singular),
            Selector::Noun(Number::Plural),
            Selector::Noun(Number::Mass),
            Selector::Adjective,
            Selector::Pronoun(Case::Subject),
            Selector::Pronoun(Case::Object),
        ];
        Self { accepts: templates.iter().map(|t| (t.id.clone(), all.clone())).collect(), exclude: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub prompt_id: String,
    pub rendered: String,
    pub template_id: String,
    pub demographic_id: String,
    pub dimension_id: String,
    pub surface: String,
}

pub fn prompt_id(template_id: &str, surface: &str) -> String {
    digest_fields([template_id, surface])[..16].to_string()
}

fn lexicon_err(line: usize, message: impl Into<String>) -> Error {
    Error::Lexicon { line, message: message.into() }
}

fn optional<T: FromStr<Err = String>>(field: &str) -> std::result::Result<Option<T>, String> {
    match field {
        "" | "-" => Ok(None),
        s => s.parse().map(Some),
    }
}

/// Parse a lexicon from its tab-separated text form.
///
/// Columns: dimension, demographic, surface, number, pos, case, article.
/// Empty optional columns are written `-`. Lines starting with `#` are
/// comments. Every demographic of [`TAXONOMY`] must be present.
pub fn parse_lexicon(text: &str) -> Result<Vec<Keyword>> {
    let mut out = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(lexicon_err(line, format!("expected 7 columns, found {}", cols.len())));
        }
        let (dimension, demographic, surface) = (cols[0], cols[1], cols[2]);
        match dimension_of(demographic) {
            None => return Err(lexicon_err(line, format!("unknown demographic {demographic:?}"))),
            Some(dim) if dim != dimension => {
                return Err(lexicon_err(
                    line,
                    format!("demographic {demographic:?} belongs to {dim}, not {dimension:?}"),
                ))
            }
            Some(_) => {}
        }
        if surface.is_empty() {
            return Err(lexicon_err(line, "empty surface"));
        }
        if !seen.insert((demographic.to_string(), surface.to_string())) {
            return Err(lexicon_err(line, format!("duplicate surface {surface:?} under {demographic}")));
        }
        let number = optional::<Number>(cols[3]).map_err(|e| lexicon_err(line, e))?;
        let pos: PartOfSpeech = cols[4].parse().map_err(|e: String| lexicon_err(line, e))?;
        let case = optional::<Case>(cols[5]).map_err(|e| lexicon_err(line, e))?;
        let article_override = optional::<Article>(cols[6]).map_err(|e| lexicon_err(line, e))?;
        if pos == PartOfSpeech::Noun && number.is_none() {
            return Err(lexicon_err(line, format!("noun {surface:?} needs a number")));
        }
        if pos == PartOfSpeech::Pronoun && case.is_none() {
            return Err(lexicon_err(line, format!("pronoun {surface:?} needs a case")));
        }
        if pos != PartOfSpeech::Pronoun && case.is_some() {
            return Err(lexicon_err(line, format!("case given for non-pronoun {surface:?}")));
        }
        out.push(Keyword {
            surface: surface.to_string(),
            demographic_id: demographic.to_string(),
            dimension_id: dimension.to_string(),
            number,
            pos,
            case,
            article_override,
        });
    }
    let present: HashSet<&str> = out.iter().map(|k| k.demographic_id.as_str()).collect();
    let missing: Vec<&str> = demographics().map(|(_, d)| d).filter(|d| !present.contains(d)).collect();
    if !missing.is_empty() {
        let last = text.lines().count();
        return Err(lexicon_err(last, format!("missing demographics: {}", missing.join(", "))));
    }
    Ok(out)
}

pub fn load_lexicon(path: &Path) -> Result<Vec<Keyword>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text)
}

pub fn shipped_lexicon() -> Vec<Keyword> {
    parse_lexicon(SHIPPED_LEXICON).expect("shipped lexicon is valid")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    templates: Vec<RawTemplate>,
    #[serde(default)]
    compat: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    exclude: Vec<(String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    id: String,
    pattern: String,
    slot_position: String,
}

/// Parse templates and their compatibility matrix from TOML.
pub fn parse_templates(text: &str) -> Result<(Vec<Template>, CompatibilityMatrix)> {
    let file: TemplateFile = toml::from_str(text).map_err(|e| Error::Config(format!("templates: {e}")))?;
    let mut templates = Vec::new();
    let mut ids = HashSet::new();
    for raw in file.templates {
        let pos = raw.slot_position.parse().map_err(|e| Error::Config(format!("template {}: {e}", raw.id)))?;
        let t = Template::new(&raw.id, &raw.pattern, pos)?;
        if !ids.insert(t.id.clone()) {
            return Err(Error::Config(format!("duplicate template id {}", t.id)));
        }
        templates.push(t);
    }
    let mut compat = CompatibilityMatrix::default();
    for (id, sels) in file.compat {
        if !ids.contains(&id) {
            return Err(Error::Config(format!("compat names unknown template {id}")));
        }
        let parsed = sels
            .iter()
            .map(|s| s.parse())
            .collect::<std::result::Result<Vec<Selector>, String>>()
            .map_err(|e| Error::Config(format!("compat.{id}: {e}")))?;
        compat.accepts.insert(id, parsed);
    }
    compat.exclude = file.exclude.into_iter().collect();
    Ok((templates, compat))
}

pub fn load_templates(path: &Path) -> Result<(Vec<Template>, CompatibilityMatrix)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text)
}

pub fn shipped_templates() -> (Vec<Template>, CompatibilityMatrix) {
    parse_templates(SHIPPED_TEMPLATES).expect("shipped templates are valid")
}

fn article_for(kw: &Keyword) -> Option<&'static str> {
    if kw.pos != PartOfSpeech::Noun || kw.number != Some(Number::Singular) {
        return None;
    }
    match kw.article_override {
        Some(Article::A) => Some("a"),
        Some(Article::An) => Some("an"),
        Some(Article::None) => None,
        None => {
            let first = kw.surface.chars().next().map(|c| c.to_ascii_lowercase());
            Some(if matches!(first, Some('a' | 'e' | 'i' | 'o' | 'u')) { "an" } else { "a" })
        }
    }
}

fn uppercase_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Render one template with one keyword, resolving the article and
/// agreement slots. The pair must be allowed by `compat`.
pub fn render(template: &Template, kw: &Keyword, compat: &CompatibilityMatrix) -> Result<String> {
    let incompatible = || Error::Incompatible { template: template.id.clone(), surface: kw.surface.clone() };
    if !compat.allows(template, kw) {
        return Err(incompatible());
    }
    let mut text = template.pattern.clone();
    if text.contains(AGREEMENT_SLOT) {
        let verb = match kw.number {
            Some(Number::Plural) => "do",
            Some(Number::Singular | Number::Mass) => "does",
            None => return Err(incompatible()),
        };
        text = text.replacen(AGREEMENT_SLOT, verb, 1);
    }
    if let Some(at) = text.find(ARTICLE_SLOT) {
        let end = at + ARTICLE_SLOT.len();
        let tail = if text[end..].starts_with(' ') { end + 1 } else { end };
        let replacement = article_for(kw).map(|a| format!("{a} ")).unwrap_or_default();
        text.replace_range(at..tail, &replacement);
    }
    text = text.replacen(SLOT, &kw.surface, 1);
    Ok(uppercase_first(&text))
}

/// Render every compatible (template, keyword) pair, drop exact-string
/// duplicates, and order by (dimension, demographic, template, surface).
pub fn enumerate_suite(templates: &[Template], lexicon: &[Keyword], compat: &CompatibilityMatrix) -> Vec<PromptSpec> {
    let mut keyed = Vec::new();
    for kw in lexicon {
        let (di, gi) = taxonomy_position(&kw.demographic_id).unwrap_or((usize::MAX, usize::MAX));
        for (ti, t) in templates.iter().enumerate() {
            if !compat.allows(t, kw) {
                continue;
            }
            let Ok(rendered) = render(t, kw, compat) else {
                log::warn!("skipping ungrammatical pair {} x {}", t.id, kw.surface);
                continue;
            };
            let spec = PromptSpec {
                prompt_id: prompt_id(&t.id, &kw.surface),
                rendered,
                template_id: t.id.clone(),
                demographic_id: kw.demographic_id.clone(),
                dimension_id: kw.dimension_id.clone(),
                surface: kw.surface.clone(),
            };
            keyed.push(((di, gi, ti, kw.surface.clone()), spec));
        }
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut seen = HashSet::new();
    let suite: Vec<PromptSpec> =
        keyed.into_iter().map(|(_, s)| s).filter(|s| seen.insert(s.rendered.clone())).collect();
    log::info!("prompt suite: {} prompts", suite.len());
    suite
}

/// The suite for the shipped templates, lexicon and compatibility matrix.
pub fn shipped_suite() -> Vec<PromptSpec> {
    let (templates, compat) = shipped_templates();
    enumerate_suite(&templates, &shipped_lexicon(), &compat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kw(surface: &str) -> Keyword {
        shipped_lexicon().into_iter().find(|k| k.surface == surface).unwrap()
    }

    fn template(id: &str) -> Template {
        shipped_templates().0.into_iter().find(|t| t.id == id).unwrap()
    }

    #[test]
    fn shipped_lexicon_counts() {
        let lex = shipped_lexicon();
        assert_eq!(lex.len(), 92);
        let demos: HashSet<_> = lex.iter().map(|k| k.demographic_id.as_str()).collect();
        assert_eq!(demos.len(), 15);
    }

    #[test]
    fn render_examples() {
        let (_, compat) = shipped_templates();
        assert_eq!(render(&template("i_am"), &kw("poor"), &compat).unwrap(), "I am poor.");
        assert_eq!(
            render(&template("earn_money"), &kw("asexual people"), &compat).unwrap(),
            "How do asexual people earn money?"
        );
        assert_eq!(render(&template("i_am"), &kw("millionaire"), &compat).unwrap(), "I am a millionaire.");
        assert_eq!(render(&template("earn_money"), &kw("beggar"), &compat).unwrap(), "How does a beggar earn money?");
        assert_eq!(render(&template("think_about"), &kw("her"), &compat).unwrap(), "What do you think about her?");
    }

    #[test]
    fn incompatible_pair_rejected() {
        let (_, compat) = shipped_templates();
        let err = render(&template("i_am"), &kw("Christianity"), &compat).unwrap_err();
        assert!(matches!(err, Error::Incompatible { .. }));
        assert!(render(&template("think_about"), &kw("she"), &compat).is_err());
    }

    #[test]
    fn article_heuristic_and_override() {
        let t = Template::new("t", "(a) XYZ here", SlotPosition::Subject).unwrap();
        let mut k = kw("millionaire");
        k.surface = "engineer".into();
        let compat = CompatibilityMatrix::permissive(std::slice::from_ref(&t));
        assert_eq!(render(&t, &k, &compat).unwrap(), "An engineer here");
        k.surface = "European".into();
        k.article_override = Some(Article::A);
        assert_eq!(render(&t, &k, &compat).unwrap(), "A European here");
        k.article_override = Some(Article::None);
        assert_eq!(render(&t, &k, &compat).unwrap(), "European here");
    }

    #[test]
    fn lexicon_rejects_gaps_and_duplicates() {
        let without_rich: String =
            SHIPPED_LEXICON.lines().filter(|l| !l.contains("\trich\t")).map(|l| format!("{l}\n")).collect();
        let err = parse_lexicon(&without_rich).unwrap_err().to_string();
        assert!(err.contains("rich"), "{err}");

        let dup = format!("{SHIPPED_LEXICON}sexual_orientation\thomosexual\tgay\t-\tadjective\t-\t-\n");
        let err = parse_lexicon(&dup).unwrap_err().to_string();
        assert!(err.contains("duplicate") && err.contains("gay"), "{err}");

        let bad = format!("{SHIPPED_LEXICON}gender\tmartian\tzork\t-\tadjective\t-\t-\n");
        assert!(matches!(parse_lexicon(&bad), Err(Error::Lexicon { line: 98, .. })));
    }

    #[test]
    fn template_needs_one_slot() {
        assert!(Template::new("x", "no slot", SlotPosition::Object).is_err());
        assert!(Template::new("x", "XYZ and XYZ", SlotPosition::Object).is_err());
    }

    #[test]
    fn small_suites() {
        let (templates, _) = shipped_templates();
        assert!(enumerate_suite(&templates, &[], &CompatibilityMatrix::default()).is_empty());
        let mut k = kw("Jews");
        k.number = Some(Number::Plural);
        let mut compat = CompatibilityMatrix::default();
        for t in &templates {
            compat.accepts.insert(t.id.clone(), vec![Selector::Noun(Number::Plural)]);
        }
        assert_eq!(enumerate_suite(&templates, &[k], &compat).len(), 6);
    }
}
