//! Shared domain types: the instrument, responses, trait scores, personas and
//! age curves.
//!
//! Everything here is a plain value type. Validation happens at construction
//! time so downstream modules can rely on the invariants without rechecking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of items in the instrument.
pub const ITEM_COUNT: usize = 120;
/// Items per answer sheet.
pub const SHEET_SIZE: usize = 20;
/// Number of answer sheets per assessment.
pub const SHEET_COUNT: usize = ITEM_COUNT / SHEET_SIZE;
/// Facets per domain.
pub const FACETS_PER_DOMAIN: usize = 6;
/// Items per facet.
pub const ITEMS_PER_FACET: usize = 4;
/// Items per domain.
pub const ITEMS_PER_DOMAIN: usize = FACETS_PER_DOMAIN * ITEMS_PER_FACET;

/// Lowest possible raw domain score (24 items answered 1).
pub const RAW_DOMAIN_MIN: f64 = 24.0;
/// Highest possible raw domain score (24 items answered 5).
pub const RAW_DOMAIN_MAX: f64 = 120.0;

/// Bundled item bank.
const BUNDLED_BANK: &str = include_str!("../data/ipip_neo_120.json");

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DomainError {
    #[error("unknown domain code {0:?}")]
    UnknownDomain(String),
    #[error("unknown keying {0:?}")]
    UnknownKeying(String),
    #[error("missing item: expected {expected} items, found {found}")]
    MissingItem { expected: usize, found: usize },
    #[error("too many items: expected {expected}, found {found}")]
    ExtraItem { expected: usize, found: usize },
    #[error("duplicate item id {0}")]
    DuplicateItem(u16),
    #[error("item id {0} outside 1..=120")]
    ItemIdOutOfRange(u16),
    #[error("facet index {0} outside 1..=6")]
    FacetOutOfRange(u8),
    #[error("domain {domain} facet {facet} has {count} items, expected 4")]
    FacetCount { domain: Domain, facet: u8, count: usize },
    #[error("raw domain score {0} outside [24, 120]")]
    RawScoreOutOfRange(f64),
    #[error("rescaled score {0} outside [0, 100]")]
    RescaledScoreOutOfRange(f64),
    #[error("Likert choice {0} outside 1..=5")]
    ChoiceOutOfRange(u8),
    #[error("age {0} outside [15, 100]")]
    AgeOutOfRange(u32),
    #[error("invalid persona profile: {0}")]
    InvalidProfile(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("answer sheet {sheet}: {reason}")]
    InvalidSheet { sheet: usize, reason: String },
    #[error("item bank parse error: {0}")]
    BankParse(String),
    #[error("io error: {0}")]
    Io(String),
}

/// The five Big Five domains in instrument order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "N")]
    Neuroticism,
    #[serde(rename = "E")]
    Extraversion,
    #[serde(rename = "O")]
    Openness,
    #[serde(rename = "A")]
    Agreeableness,
    #[serde(rename = "C")]
    Conscientiousness,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Neuroticism,
        Domain::Extraversion,
        Domain::Openness,
        Domain::Agreeableness,
        Domain::Conscientiousness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Domain::Neuroticism => "N",
            Domain::Extraversion => "E",
            Domain::Openness => "O",
            Domain::Agreeableness => "A",
            Domain::Conscientiousness => "C",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Neuroticism => "Neuroticism",
            Domain::Extraversion => "Extraversion",
            Domain::Openness => "Openness",
            Domain::Agreeableness => "Agreeableness",
            Domain::Conscientiousness => "Conscientiousness",
        }
    }

    /// Accepts single-letter codes and full names, case-insensitively.
    pub fn parse(s: &str) -> Result<Domain, DomainError> {
        let t = s.trim();
        let found = Domain::ALL.into_iter().find(|d| {
            d.code().eq_ignore_ascii_case(t) || d.name().eq_ignore_ascii_case(t)
        });
        found.ok_or_else(|| DomainError::UnknownDomain(s.to_string()))
    }

    /// Facet names in NEO order.
    pub fn facet_names(self) -> [&'static str; FACETS_PER_DOMAIN] {
        match self {
            Domain::Neuroticism => [
                "Anxiety",
                "Anger",
                "Depression",
                "Self-Consciousness",
                "Immoderation",
                "Vulnerability",
            ],
            Domain::Extraversion => [
                "Friendliness",
                "Gregariousness",
                "Assertiveness",
                "Activity Level",
                "Excitement-Seeking",
                "Cheerfulness",
            ],
            Domain::Openness => [
                "Imagination",
                "Artistic Interests",
                "Emotionality",
                "Adventurousness",
                "Intellect",
                "Liberalism",
            ],
            Domain::Agreeableness => [
                "Trust",
                "Morality",
                "Altruism",
                "Cooperation",
                "Modesty",
                "Sympathy",
            ],
            Domain::Conscientiousness => [
                "Self-Efficacy",
                "Orderliness",
                "Dutifulness",
                "Achievement-Striving",
                "Self-Discipline",
                "Cautiousness",
            ],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Scoring direction of an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keying {
    Plus,
    Minus,
}

impl Keying {
    pub fn parse(s: &str) -> Result<Keying, DomainError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Keying::Plus),
            "minus" | "-" => Ok(Keying::Minus),
            _ => Err(DomainError::UnknownKeying(s.to_string())),
        }
    }

    /// Item score contributed by a Likert choice.
    pub fn item_score(self, choice: u8) -> u8 {
        match self {
            Keying::Plus => choice,
            Keying::Minus => 6 - choice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireItem {
    pub item_id: u16,
    pub text: String,
    pub domain: Domain,
    /// 1..=6 within the domain, NEO facet order.
    pub facet_index: u8,
    pub keying: Keying,
}

impl QuestionnaireItem {
    /// Position of this item's facet in the flat 30-facet layout.
    pub fn facet_slot(&self) -> usize {
        self.domain.index() * FACETS_PER_DOMAIN + (self.facet_index as usize - 1)
    }
}

#[derive(Debug, Deserialize)]
struct RawItem {
    item_id: u16,
    domain: String,
    facet_index: u8,
    keying: String,
    text: String,
}

#[derive(Debug, Deserialize)]
struct RawBankDoc {
    #[serde(default)]
    instrument: Option<String>,
    #[serde(default)]
    version: Option<String>,
    items: Vec<RawItem>,
}

/// A validated 120-item bank, held in instrument order (item 1 first).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemBank {
    items: Vec<QuestionnaireItem>,
    version: String,
}

impl ItemBank {
    /// The bundled IPIP-NEO-120 bank.
    pub fn bundled() -> ItemBank {
        ItemBank::from_json_str(BUNDLED_BANK).expect("bundled item bank is valid")
    }

    /// Loads a bank from a `.json` or delimited (`.csv`/`.tsv`) file.
    pub fn load(path: &Path) -> Result<ItemBank, DomainError> {
        let text = std::fs::read_to_string(path).map_err(|e| DomainError::Io(e.to_string()))?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        match ext.as_str() {
            "csv" => ItemBank::from_delimited_str(&text, b','),
            "tsv" => ItemBank::from_delimited_str(&text, b'\t'),
            _ => ItemBank::from_json_str(&text),
        }
    }

    /// Accepts either `{"items": [...]}` or a bare array of items.
    pub fn from_json_str(text: &str) -> Result<ItemBank, DomainError> {
        let (raw, version) = match serde_json::from_str::<RawBankDoc>(text) {
            Ok(doc) => {
                let version = match (doc.instrument, doc.version) {
                    (Some(i), Some(v)) => format!("{i}@{v}"),
                    (None, Some(v)) => v,
                    (Some(i), None) => i,
                    (None, None) => "unversioned".to_string(),
                };
                (doc.items, version)
            }
            Err(_) => {
                let items: Vec<RawItem> = serde_json::from_str(text)
                    .map_err(|e| DomainError::BankParse(e.to_string()))?;
                (items, "unversioned".to_string())
            }
        };
        let items = raw.into_iter().map(convert_raw).collect::<Result<Vec<_>, _>>()?;
        let mut bank = validate_item_bank(items)?;
        bank.version = version;
        Ok(bank)
    }

    /// Columns: `item_id, domain, facet_index, keying, text` with a header row.
    pub fn from_delimited_str(text: &str, delimiter: u8) -> Result<ItemBank, DomainError> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut items = Vec::new();
        for row in reader.deserialize::<RawItem>() {
            let raw = row.map_err(|e| DomainError::BankParse(e.to_string()))?;
            items.push(convert_raw(raw)?);
        }
        validate_item_bank(items)
    }

    pub fn items(&self) -> &[QuestionnaireItem] {
        &self.items
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Looks up an item by its 1-based id.
    pub fn item(&self, item_id: u16) -> Option<&QuestionnaireItem> {
        let idx = (item_id as usize).checked_sub(1)?;
        self.items.get(idx)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn convert_raw(raw: RawItem) -> Result<QuestionnaireItem, DomainError> {
    Ok(QuestionnaireItem {
        item_id: raw.item_id,
        text: raw.text,
        domain: Domain::parse(&raw.domain)?,
        facet_index: raw.facet_index,
        keying: Keying::parse(&raw.keying)?,
    })
}

/// Checks every instrument invariant and returns the bank sorted by item id.
pub fn validate_item_bank(mut items: Vec<QuestionnaireItem>) -> Result<ItemBank, DomainError> {
    let mut seen = BTreeSet::new();
    for item in &items {
        if !(1..=ITEM_COUNT as u16).contains(&item.item_id) {
            return Err(DomainError::ItemIdOutOfRange(item.item_id));
        }
        if !(1..=FACETS_PER_DOMAIN as u8).contains(&item.facet_index) {
            return Err(DomainError::FacetOutOfRange(item.facet_index));
        }
        if !seen.insert(item.item_id) {
            return Err(DomainError::DuplicateItem(item.item_id));
        }
    }
    if items.len() < ITEM_COUNT {
        return Err(DomainError::MissingItem { expected: ITEM_COUNT, found: items.len() });
    }
    if items.len() > ITEM_COUNT {
        return Err(DomainError::ExtraItem { expected: ITEM_COUNT, found: items.len() });
    }
    let mut per_facet: BTreeMap<(Domain, u8), usize> = BTreeMap::new();
    for item in &items {
        *per_facet.entry((item.domain, item.facet_index)).or_default() += 1;
    }
    for domain in Domain::ALL {
        for facet in 1..=FACETS_PER_DOMAIN as u8 {
            let count = per_facet.get(&(domain, facet)).copied().unwrap_or(0);
            if count != ITEMS_PER_FACET {
                return Err(DomainError::FacetCount { domain, facet, count });
            }
        }
    }
    items.sort_by_key(|i| i.item_id);
    Ok(ItemBank { items, version: "unversioned".to_string() })
}

/// Maps a raw domain score in [24, 120] onto [0, 100].
pub fn rescale(raw: f64) -> Result<f64, DomainError> {
    if !(RAW_DOMAIN_MIN..=RAW_DOMAIN_MAX).contains(&raw) {
        return Err(DomainError::RawScoreOutOfRange(raw));
    }
    Ok((raw - RAW_DOMAIN_MIN) / (RAW_DOMAIN_MAX - RAW_DOMAIN_MIN) * 100.0)
}

/// Inverse of [`rescale`].
pub fn unrescale(rescaled: f64) -> Result<f64, DomainError> {
    if !(0.0..=100.0).contains(&rescaled) {
        return Err(DomainError::RescaledScoreOutOfRange(rescaled));
    }
    Ok(RAW_DOMAIN_MIN + rescaled / 100.0 * (RAW_DOMAIN_MAX - RAW_DOMAIN_MIN))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResponse {
    pub item_id: u16,
    /// Likert choice, 1..=5.
    pub choice: u8,
    pub rationale: Option<String>,
}

impl ItemResponse {
    pub fn new(item_id: u16, choice: u8, rationale: Option<String>) -> Result<Self, DomainError> {
        if !(1..=5).contains(&choice) {
            return Err(DomainError::ChoiceOutOfRange(choice));
        }
        Ok(ItemResponse { item_id, choice, rationale })
    }
}

/// Item ids covered by sheet `sheet_index` (0-based).
pub fn sheet_item_ids(sheet_index: usize) -> std::ops::RangeInclusive<u16> {
    let first = (sheet_index * SHEET_SIZE + 1) as u16;
    first..=first + SHEET_SIZE as u16 - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSheet {
    pub assessment_id: String,
    pub persona_id: Option<String>,
    pub sheet_index: usize,
    /// Sorted by item id.
    pub responses: Vec<ItemResponse>,
}

impl AnswerSheet {
    pub fn new(
        assessment_id: impl Into<String>,
        persona_id: Option<String>,
        sheet_index: usize,
        mut responses: Vec<ItemResponse>,
    ) -> Result<AnswerSheet, DomainError> {
        if sheet_index >= SHEET_COUNT {
            return Err(DomainError::InvalidSheet {
                sheet: sheet_index,
                reason: "sheet index outside 0..=5".into(),
            });
        }
        responses.sort_by_key(|r| r.item_id);
        let expected: Vec<u16> = sheet_item_ids(sheet_index).collect();
        let got: Vec<u16> = responses.iter().map(|r| r.item_id).collect();
        if got != expected {
            return Err(DomainError::InvalidSheet {
                sheet: sheet_index,
                reason: format!("responses cover {got:?}, expected {expected:?}"),
            });
        }
        Ok(AnswerSheet { assessment_id: assessment_id.into(), persona_id, sheet_index, responses })
    }
}

/// Scale a [`TraitVector`] is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Raw,
    Rescaled,
    Percentile,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Scale> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Some(Scale::Raw),
            "rescaled" => Some(Scale::Rescaled),
            "percentile" => Some(Scale::Percentile),
            _ => None,
        }
    }
}

/// Domain scores indexed by [`Domain::index`] (N, E, O, A, C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitVector {
    pub scores: [f64; 5],
    pub scale: Scale,
}

impl TraitVector {
    pub fn new(scores: [f64; 5], scale: Scale) -> Result<TraitVector, DomainError> {
        for &s in &scores {
            match scale {
                Scale::Raw if !(RAW_DOMAIN_MIN..=RAW_DOMAIN_MAX).contains(&s) => {
                    return Err(DomainError::RawScoreOutOfRange(s))
                }
                Scale::Rescaled | Scale::Percentile if !(0.0..=100.0).contains(&s) => {
                    return Err(DomainError::RescaledScoreOutOfRange(s))
                }
                _ => {}
            }
        }
        Ok(TraitVector { scores, scale })
    }

    pub fn get(&self, domain: Domain) -> f64 {
        self.scores[domain.index()]
    }

    /// Converts a raw vector to the 0..100 scale. Rescaled input is returned as is.
    pub fn rescaled(&self) -> Result<TraitVector, DomainError> {
        match self.scale {
            Scale::Rescaled => Ok(*self),
            Scale::Raw => {
                let mut out = [0.0; 5];
                for (o, &s) in out.iter_mut().zip(&self.scores) {
                    *o = rescale(s)?;
                }
                Ok(TraitVector { scores: out, scale: Scale::Rescaled })
            }
            Scale::Percentile => Err(DomainError::InvalidCurve(
                "percentile scores cannot be rescaled".into(),
            )),
        }
    }

    /// Percentiles from a norm table. Requires raw scores.
    pub fn percentiles(&self, norms: &dyn NormTable) -> Result<TraitVector, DomainError> {
        if self.scale != Scale::Raw {
            return Err(DomainError::InvalidCurve("percentiles need raw scores".into()));
        }
        let mut out = [0.0; 5];
        for d in Domain::ALL {
            out[d.index()] = norms.percentile(d, self.scores[d.index()]).clamp(0.0, 100.0);
        }
        Ok(TraitVector { scores: out, scale: Scale::Percentile })
    }
}

/// Pluggable raw-score → percentile mapping. None ships enabled.
pub trait NormTable: Send + Sync {
    fn percentile(&self, domain: Domain, raw: f64) -> f64;
}

/// Norms given as a per-domain normal distribution over raw scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalNorms {
    pub mean: [f64; 5],
    pub sd: [f64; 5],
}

impl NormTable for NormalNorms {
    fn percentile(&self, domain: Domain, raw: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let i = domain.index();
        match Normal::new(self.mean[i], self.sd[i]) {
            Ok(n) => n.cdf(raw) * 100.0,
            Err(_) => f64::NAN,
        }
    }
}

/// Raw facet scores (4..=20 each), 6 per domain in domain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetScores(pub [u8; 30]);

impl FacetScores {
    pub fn get(&self, domain: Domain, facet_index: u8) -> u8 {
        self.0[domain.index() * FACETS_PER_DOMAIN + facet_index as usize - 1]
    }

    pub fn domain_facets(&self, domain: Domain) -> &[u8] {
        let start = domain.index() * FACETS_PER_DOMAIN;
        &self.0[start..start + FACETS_PER_DOMAIN]
    }

    /// Sum of the domain's six facets.
    pub fn domain_raw(&self, domain: Domain) -> u32 {
        self.domain_facets(domain).iter().map(|&f| f as u32).sum()
    }
}

/// One scored assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub assessment_id: String,
    pub persona_id: Option<String>,
    pub run_id: String,
    pub replicate: u32,
    /// Raw domain scores.
    pub traits: TraitVector,
    pub facets: FacetScores,
    pub timestamp: String,
}

impl AssessmentRecord {
    pub fn rescaled(&self) -> [f64; 5] {
        self.traits.rescaled().map(|t| t.scores).unwrap_or([f64::NAN; 5])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "man" => Some(Gender::Male),
            "female" | "f" | "woman" => Some(Gender::Female),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "Male",
            Gender::Female => "Female",
        }
    }
}

/// A census-derived demographic record.
///
/// Categorical fields keep the source dataset's spelling (for the Adult data
/// that is e.g. `"Exec-managerial"`, `"United-States"`). `None` marks a value
/// the source recorded as unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaSkeleton {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub race: Option<String>,
    pub education: Option<String>,
    pub marital_status: Option<String>,
    pub occupation: Option<String>,
    pub relationship: Option<String>,
    pub workclass: Option<String>,
    pub country: Option<String>,
    pub income_bracket: Option<String>,
    pub capital_gain: i64,
    pub capital_loss: i64,
    pub hours_per_week: Option<u32>,
}

impl PersonaSkeleton {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(15..=100).contains(&self.age) {
            return Err(DomainError::AgeOutOfRange(self.age));
        }
        Ok(())
    }

    /// Field name/value pairs, in a stable order, for template filling and display.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "unknown".to_string());
        vec![
            ("age", self.age.to_string()),
            ("gender", self.gender.as_str().to_string()),
            ("race", opt(&self.race)),
            ("education", opt(&self.education)),
            ("marital_status", opt(&self.marital_status)),
            ("occupation", opt(&self.occupation)),
            ("relationship", opt(&self.relationship)),
            ("workclass", opt(&self.workclass)),
            ("country", opt(&self.country)),
            ("income_bracket", opt(&self.income_bracket)),
            ("capital_gain", self.capital_gain.to_string()),
            ("capital_loss", self.capital_loss.to_string()),
            (
                "hours_per_week",
                self.hours_per_week.map(|h| h.to_string()).unwrap_or_else(|| "unknown".into()),
            ),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Standard,
    Antialign,
    Narrative,
    Literary,
    Poor,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Standard => "standard",
            Strategy::Antialign => "antialign",
            Strategy::Narrative => "narrative",
            Strategy::Literary => "literary",
            Strategy::Poor => "poor",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Some(Strategy::Standard),
            "antialign" => Some(Strategy::Antialign),
            "narrative" => Some(Strategy::Narrative),
            "literary" => Some(Strategy::Literary),
            "poor" => Some(Strategy::Poor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetailLevel {
    Poor,
    Standard,
}

impl DetailLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            DetailLevel::Poor => "poor",
            DetailLevel::Standard => "standard",
        }
    }

    pub fn parse(s: &str) -> Option<DetailLevel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poor" => Some(DetailLevel::Poor),
            "standard" => Some(DetailLevel::Standard),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthesized,
    External,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Synthesized => "synthesized",
            Source::External => "external",
        }
    }

    pub fn parse(s: &str) -> Option<Source> {
        match s.trim().to_ascii_lowercase().as_str() {
            "synthesized" => Some(Source::Synthesized),
            "external" => Some(Source::External),
            _ => None,
        }
    }
}

/// Whitespace-token word count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Minimum length of a narrative profile, in words.
pub const NARRATIVE_MIN_WORDS: usize = 2000;

/// A free-text persona description plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub id: String,
    pub skeleton_id: Option<String>,
    /// Profile this one was derived from (poor variants).
    pub derived_from: Option<String>,
    pub name: Option<String>,
    pub text: String,
    pub strategy: Strategy,
    pub detail_level: DetailLevel,
    pub source: Source,
    pub word_count: usize,
    /// Narrative profile that stayed under the minimum length after regeneration.
    pub substandard: bool,
    pub template_hash: Option<String>,
    pub age: Option<u32>,
    pub gender: Option<Gender>,
}

impl PersonaProfile {
    /// Checks the strategy/metadata invariants.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.word_count != word_count(&self.text) {
            return Err(DomainError::InvalidProfile(format!(
                "word_count {} does not match text ({} words)",
                self.word_count,
                word_count(&self.text)
            )));
        }
        match self.strategy {
            Strategy::Narrative if self.word_count < NARRATIVE_MIN_WORDS && !self.substandard => {
                Err(DomainError::InvalidProfile(format!(
                    "narrative profile has {} words and is not flagged substandard",
                    self.word_count
                )))
            }
            Strategy::Literary if self.source != Source::External || self.skeleton_id.is_some() => {
                Err(DomainError::InvalidProfile(
                    "literary profiles must be external and have no skeleton".into(),
                ))
            }
            Strategy::Poor if self.detail_level != DetailLevel::Poor => Err(
                DomainError::InvalidProfile("poor profiles must have poor detail level".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Mean score per age bin for one trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalityCurve {
    pub trait_domain: Domain,
    /// Ascending bin boundaries; bin `i` is `[edges[i], edges[i+1])`.
    pub bin_edges: Vec<f64>,
    /// `None` where the bin is empty.
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl PersonalityCurve {
    pub fn new(
        trait_domain: Domain,
        bin_edges: Vec<f64>,
        values: Vec<Option<f64>>,
        counts: Vec<usize>,
    ) -> Result<PersonalityCurve, DomainError> {
        validate_bin_edges(&bin_edges)?;
        let bins = bin_edges.len() - 1;
        if values.len() != bins || counts.len() != bins {
            return Err(DomainError::InvalidCurve(format!(
                "{} edges need {} values and counts, got {} and {}",
                bin_edges.len(),
                bins,
                values.len(),
                counts.len()
            )));
        }
        for (v, &c) in values.iter().zip(&counts) {
            if v.is_some() != (c > 0) {
                return Err(DomainError::InvalidCurve(
                    "value must be defined exactly where count > 0".into(),
                ));
            }
        }
        Ok(PersonalityCurve { trait_domain, bin_edges, values, counts })
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }
}

pub fn validate_bin_edges(edges: &[f64]) -> Result<(), DomainError> {
    if edges.len() < 2 {
        return Err(DomainError::InvalidCurve("need at least two bin edges".into()));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DomainError::InvalidCurve("bin edges must be strictly ascending".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank_items() -> Vec<QuestionnaireItem> {
        ItemBank::bundled().items().to_vec()
    }

    #[test]
    fn bundled_bank_is_valid() {
        let bank = ItemBank::bundled();
        assert_eq!(bank.len(), 120);
        assert_eq!(bank.version(), "IPIP-NEO-120@1.0.0");
        for d in Domain::ALL {
            assert_eq!(bank.items().iter().filter(|i| i.domain == d).count(), 24);
        }
        assert_eq!(bank.item(1).unwrap().text, "Worry about things");
        assert_eq!(bank.item(120).unwrap().keying, Keying::Minus);
    }

    #[test]
    fn missing_item_is_rejected() {
        let mut items = bank_items();
        items.pop();
        let err = validate_item_bank(items).unwrap_err();
        assert!(matches!(err, DomainError::MissingItem { found: 119, .. }));
        assert!(err.to_string().contains("missing item"));
    }

    #[test]
    fn duplicate_item_is_rejected() {
        let mut items = bank_items();
        items[8].item_id = 7;
        let err = validate_item_bank(items).unwrap_err();
        assert_eq!(err, DomainError::DuplicateItem(7));
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn facet_count_is_checked() {
        let mut items = bank_items();
        items[0].facet_index = 2;
        assert!(matches!(
            validate_item_bank(items).unwrap_err(),
            DomainError::FacetCount { .. }
        ));
    }

    #[test]
    fn unknown_domain_code() {
        let json = r#"[{"item_id":1,"domain":"X","facet_index":1,"keying":"plus","text":"t"}]"#;
        assert_eq!(
            ItemBank::from_json_str(json).unwrap_err(),
            DomainError::UnknownDomain("X".into())
        );
    }

    #[test]
    fn csv_bank_round_trips_bundled() {
        let mut out = String::from("item_id,domain,facet_index,keying,text\n");
        for i in ItemBank::bundled().items() {
            let k = if i.keying == Keying::Plus { "plus" } else { "minus" };
            out.push_str(&format!("{},{},{},{},\"{}\"\n", i.item_id, i.domain, i.facet_index, k, i.text));
        }
        let bank = ItemBank::from_delimited_str(&out, b',').unwrap();
        assert_eq!(bank.items(), ItemBank::bundled().items());
    }

    #[test]
    fn rescale_bounds_and_midpoint() {
        assert_eq!(rescale(24.0).unwrap(), 0.0);
        assert_eq!(rescale(120.0).unwrap(), 100.0);
        assert_eq!(rescale(72.0).unwrap(), 50.0);
        assert!(rescale(23.0).is_err());
        assert!(rescale(121.0).is_err());
    }

    #[test]
    fn sheet_partition_covers_instrument() {
        let all: Vec<u16> = (0..SHEET_COUNT).flat_map(sheet_item_ids).collect();
        assert_eq!(all, (1..=120).collect::<Vec<u16>>());
    }

    #[test]
    fn answer_sheet_rejects_wrong_items() {
        let responses: Vec<ItemResponse> =
            (2..=21).map(|i| ItemResponse::new(i, 3, None).unwrap()).collect();
        assert!(AnswerSheet::new("a", None, 0, responses).is_err());
    }

    #[test]
    fn literary_profile_invariant() {
        let p = PersonaProfile {
            id: "p".into(),
            skeleton_id: Some("s".into()),
            derived_from: None,
            name: None,
            text: "a b".into(),
            strategy: Strategy::Literary,
            detail_level: DetailLevel::Standard,
            source: Source::External,
            word_count: 2,
            substandard: false,
            template_hash: None,
            age: None,
            gender: None,
        };
        assert!(p.validate().is_err());
        let ok = PersonaProfile { skeleton_id: None, ..p };
        ok.validate().unwrap();
    }

    #[test]
    fn curve_requires_aligned_lengths() {
        assert!(PersonalityCurve::new(Domain::Openness, vec![15.0, 25.0], vec![], vec![]).is_err());
        assert!(PersonalityCurve::new(
            Domain::Openness,
            vec![15.0, 25.0],
            vec![Some(1.0)],
            vec![0]
        )
        .is_err());
        PersonalityCurve::new(Domain::Openness, vec![15.0, 25.0, 35.0], vec![Some(1.0), None], vec![3, 0])
            .unwrap();
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rescale_is_monotone_bijection(a in 24.0f64..=120.0, b in 24.0f64..=120.0) {
                let (ra, rb) = (rescale(a).unwrap(), rescale(b).unwrap());
                if a < b { prop_assert!(ra < rb); }
                prop_assert!((unrescale(ra).unwrap() - a).abs() < 1e-9);
                prop_assert!((0.0..=100.0).contains(&ra));
            }
        }
    }
}
