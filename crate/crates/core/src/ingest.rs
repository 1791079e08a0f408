//! Census microdata, sampling, external personas, and human baseline curves.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_bin_edges, word_count, DetailLevel, Domain, DomainError, Gender, PersonaProfile,
    PersonaSkeleton, PersonalityCurve, Source, Strategy,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("no usable rows in census file ({dropped} dropped)")]
    NoUsableRows { dropped: usize },
    #[error("filter matches no rows")]
    EmptyFilteredSet,
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("bad filter expression {0:?}")]
    BadFilter(String),
    #[error("baseline is missing trait {0}")]
    MissingTrait(Domain),
    #[error("baseline bins misaligned: {0}")]
    MisalignedBins(String),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn unreadable(path: &Path, e: impl std::fmt::Display) -> IngestError {
    IngestError::Unreadable { path: path.display().to_string(), reason: e.to_string() }
}

/// Census columns exposed to filters.
pub const CATEGORICAL_COLUMNS: [&str; 9] = [
    "gender",
    "race",
    "education",
    "marital_status",
    "occupation",
    "relationship",
    "workclass",
    "country",
    "income_bracket",
];
pub const NUMERIC_COLUMNS: [&str; 4] = ["age", "capital_gain", "capital_loss", "hours_per_week"];

/// Parsed census microdata.
#[derive(Debug, Clone)]
pub struct CensusTable {
    pub rows: Vec<PersonaSkeleton>,
    /// Observed category values per categorical column.
    pub vocabularies: BTreeMap<String, BTreeSet<String>>,
    pub dropped_count: usize,
}

impl CensusTable {
    pub fn from_rows(rows: Vec<PersonaSkeleton>, dropped_count: usize) -> CensusTable {
        let mut vocabularies: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for col in CATEGORICAL_COLUMNS {
            vocabularies.insert(col.to_string(), BTreeSet::new());
        }
        for row in &rows {
            for col in CATEGORICAL_COLUMNS {
                if let Some(v) = categorical_value(row, col) {
                    vocabularies.get_mut(col).expect("column registered").insert(v);
                }
            }
        }
        CensusTable { rows, vocabularies, dropped_count }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Value of a categorical column, `None` when unknown.
pub fn categorical_value(row: &PersonaSkeleton, column: &str) -> Option<String> {
    match column {
        "gender" => Some(row.gender.as_str().to_string()),
        "race" => row.race.clone(),
        "education" => row.education.clone(),
        "marital_status" => row.marital_status.clone(),
        "occupation" => row.occupation.clone(),
        "relationship" => row.relationship.clone(),
        "workclass" => row.workclass.clone(),
        "country" => row.country.clone(),
        "income_bracket" => row.income_bracket.clone(),
        _ => None,
    }
}

fn numeric_value(row: &PersonaSkeleton, column: &str) -> Option<f64> {
    match column {
        "age" => Some(row.age as f64),
        "capital_gain" => Some(row.capital_gain as f64),
        "capital_loss" => Some(row.capital_loss as f64),
        "hours_per_week" => row.hours_per_week.map(|h| h as f64),
        _ => None,
    }
}

fn clean_category(raw: &str) -> Option<String> {
    let v = raw.trim().trim_end_matches('.');
    if v.is_empty() || v == "?" {
        None
    } else {
        Some(v.to_string())
    }
}

/// Parses one row of the Adult layout:
/// `age, workclass, fnlwgt, education, education-num, marital-status,
/// occupation, relationship, race, sex, capital-gain, capital-loss,
/// hours-per-week, native-country, income`.
fn parse_adult_row(record: &csv::StringRecord, line: usize) -> Option<PersonaSkeleton> {
    if record.len() < 15 {
        return None;
    }
    let f = |i: usize| record.get(i).unwrap_or("").trim();
    let age: u32 = f(0).parse().ok()?;
    let gender = Gender::parse(f(9))?;
    let capital_gain: i64 = f(10).parse().ok()?;
    let capital_loss: i64 = f(11).parse().ok()?;
    let hours_per_week = f(12).parse().ok();
    let skeleton = PersonaSkeleton {
        id: format!("row{line}"),
        age,
        gender,
        race: clean_category(f(8)),
        education: clean_category(f(3)),
        marital_status: clean_category(f(5)),
        occupation: clean_category(f(6)),
        relationship: clean_category(f(7)),
        workclass: clean_category(f(1)),
        country: clean_category(f(13)),
        income_bracket: clean_category(f(14)),
        capital_gain,
        capital_loss,
        hours_per_week,
    };
    skeleton.validate().ok()?;
    Some(skeleton)
}

/// Loads comma-delimited Adult census microdata. A header row starting with
/// `age` is skipped; rows whose mandatory fields do not parse are dropped and
/// counted.
pub fn load_census(path: &Path) -> Result<CensusTable, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| unreadable(path, e))?;
    parse_census_str(&text)
}

pub fn parse_census_str(text: &str) -> Result<CensusTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (line, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if line == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("age")) {
            continue;
        }
        match parse_adult_row(&record, line + 1) {
            Some(row) => rows.push(row),
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(IngestError::NoUsableRows { dropped });
    }
    Ok(CensusTable::from_rows(rows, dropped))
}

/// One column predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    Equals { column: String, value: String },
    /// Inclusive numeric range.
    Range { column: String, lo: f64, hi: f64 },
}

/// Conjunction of column predicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingFilter {
    pub predicates: Vec<Predicate>,
}

impl SamplingFilter {
    pub fn new(predicates: Vec<Predicate>) -> Result<SamplingFilter, IngestError> {
        for p in &predicates {
            match p {
                Predicate::Equals { column, .. } => {
                    if !CATEGORICAL_COLUMNS.contains(&column.as_str())
                        && !NUMERIC_COLUMNS.contains(&column.as_str())
                    {
                        return Err(IngestError::UnknownColumn(column.clone()));
                    }
                }
                Predicate::Range { column, .. } => {
                    if !NUMERIC_COLUMNS.contains(&column.as_str()) {
                        return Err(IngestError::UnknownColumn(column.clone()));
                    }
                }
            }
        }
        Ok(SamplingFilter { predicates })
    }

    /// Parses `col=value` and `col=lo..hi` terms separated by commas, e.g.
    /// `gender=Female,age=20..40`.
    pub fn parse(expr: &str) -> Result<SamplingFilter, IngestError> {
        let mut predicates = Vec::new();
        for term in expr.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (column, value) =
                term.split_once('=').ok_or_else(|| IngestError::BadFilter(term.to_string()))?;
            let column = column.trim().to_string();
            let value = value.trim();
            if let Some((lo, hi)) = value.split_once("..") {
                let lo = lo.trim().parse().map_err(|_| IngestError::BadFilter(term.to_string()))?;
                let hi = hi.trim().parse().map_err(|_| IngestError::BadFilter(term.to_string()))?;
                predicates.push(Predicate::Range { column, lo, hi });
            } else {
                predicates.push(Predicate::Equals { column, value: value.to_string() });
            }
        }
        SamplingFilter::new(predicates)
    }

    pub fn matches(&self, row: &PersonaSkeleton) -> bool {
        self.predicates.iter().all(|p| match p {
            Predicate::Equals { column, value } => {
                if let Some(v) = categorical_value(row, column) {
                    if column == "gender" {
                        Gender::parse(value).map(|g| g == row.gender).unwrap_or(false)
                    } else {
                        v.eq_ignore_ascii_case(value)
                    }
                } else if let Some(n) = numeric_value(row, column) {
                    value.parse::<f64>().map(|x| x == n).unwrap_or(false)
                } else {
                    false
                }
            }
            Predicate::Range { column, lo, hi } => {
                numeric_value(row, column).is_some_and(|n| n >= *lo && n <= *hi)
            }
        })
    }

    /// Inclusive age bounds implied by the filter.
    fn age_bounds(&self) -> (u32, u32) {
        let mut lo = 15u32;
        let mut hi = 100u32;
        for p in &self.predicates {
            match p {
                Predicate::Range { column, lo: l, hi: h } if column == "age" => {
                    lo = lo.max(l.ceil().max(0.0) as u32);
                    hi = hi.min(h.floor().max(0.0) as u32);
                }
                Predicate::Equals { column, value } if column == "age" => {
                    if let Ok(a) = value.parse::<u32>() {
                        lo = lo.max(a);
                        hi = hi.min(a);
                    }
                }
                _ => {}
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOptions {
    pub n: usize,
    pub filter: Option<SamplingFilter>,
    pub seed: u64,
    /// Uniform integer age jitter of ±`age_jitter` years, clipped to [15, 100]
    /// and to any age range in the filter. Zero disables it.
    pub age_jitter: u32,
    /// Prefix for generated skeleton ids.
    pub id_prefix: String,
}

impl SampleOptions {
    pub fn new(n: usize, seed: u64) -> SampleOptions {
        SampleOptions { n, filter: None, seed, age_jitter: 2, id_prefix: "sk".to_string() }
    }
}

/// Draws whole rows uniformly with replacement from the (filtered) table.
pub fn sample_skeletons(
    table: &CensusTable,
    opts: &SampleOptions,
) -> Result<Vec<PersonaSkeleton>, IngestError> {
    if opts.n == 0 {
        return Err(IngestError::EmptySample);
    }
    let pool: Vec<&PersonaSkeleton> = match &opts.filter {
        Some(f) => table.rows.iter().filter(|r| f.matches(r)).collect(),
        None => table.rows.iter().collect(),
    };
    if pool.is_empty() {
        return Err(IngestError::EmptyFilteredSet);
    }
    let (age_lo, age_hi) = opts.filter.as_ref().map(|f| f.age_bounds()).unwrap_or((15, 100));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(opts.n);
    for i in 0..opts.n {
        let row = pool[rng.random_range(0..pool.len())];
        let mut sk = row.clone();
        sk.id = format!("{}{:05}", opts.id_prefix, i + 1);
        if opts.age_jitter > 0 {
            let j = opts.age_jitter as i64;
            let delta = rng.random_range(-j..=j);
            let jittered = (row.age as i64 + delta).clamp(age_lo as i64, age_hi as i64);
            sk.age = jittered as u32;
        }
        out.push(sk);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct LiteraryRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    age: Option<u32>,
    #[serde(default)]
    gender: Option<String>,
}

/// Loads externally authored personas from a JSON array, JSON-lines file, or
/// CSV with columns `name, description, age, gender` (`id` optional).
/// Records without a description are dropped.
pub fn load_literary_personas(path: &Path) -> Result<Vec<PersonaProfile>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| unreadable(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let records: Vec<LiteraryRecord> = match ext.as_str() {
        "csv" => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            rdr.deserialize()
                .collect::<Result<_, _>>()
                .map_err(|e| IngestError::Malformed(e.to_string()))?
        }
        "jsonl" | "ndjson" => text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| IngestError::Malformed(e.to_string())))
            .collect::<Result<_, _>>()?,
        _ => serde_json::from_str(&text).map_err(|e| IngestError::Malformed(e.to_string()))?,
    };
    Ok(literary_profiles(records))
}

fn literary_profiles(records: Vec<LiteraryRecord>) -> Vec<PersonaProfile> {
    records
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let text = r.description?.trim().to_string();
            if text.is_empty() {
                return None;
            }
            Some(PersonaProfile {
                id: r.id.unwrap_or_else(|| format!("lit{:05}", i + 1)),
                skeleton_id: None,
                derived_from: None,
                name: r.name,
                word_count: word_count(&text),
                text,
                strategy: Strategy::Literary,
                detail_level: DetailLevel::Standard,
                source: Source::External,
                substandard: false,
                template_hash: None,
                age: r.age,
                gender: r.gender.as_deref().and_then(Gender::parse),
            })
        })
        .collect()
}

/// Human reference curves, one per trait on shared bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanBaseline {
    pub curves: BTreeMap<Domain, PersonalityCurve>,
}

impl HumanBaseline {
    pub fn curve(&self, domain: Domain) -> &PersonalityCurve {
        &self.curves[&domain]
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.curve(Domain::Neuroticism).bin_edges
    }
}

#[derive(Debug, Deserialize)]
struct BaselineRow {
    #[serde(rename = "trait")]
    trait_code: String,
    bin_lo: f64,
    bin_hi: f64,
    mean_value: f64,
}

/// Loads baseline curves from CSV rows `trait,bin_lo,bin_hi,mean_value`.
pub fn load_baseline(path: &Path) -> Result<HumanBaseline, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| unreadable(path, e))?;
    parse_baseline_str(&text)
}

pub fn parse_baseline_str(text: &str) -> Result<HumanBaseline, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut by_trait: BTreeMap<Domain, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in rdr.deserialize::<BaselineRow>() {
        let row = row.map_err(|e| IngestError::Malformed(e.to_string()))?;
        let domain = Domain::parse(&row.trait_code)?;
        by_trait.entry(domain).or_default().push((row.bin_lo, row.bin_hi, row.mean_value));
    }
    let mut curves = BTreeMap::new();
    let mut reference: Option<Vec<f64>> = None;
    for domain in Domain::ALL {
        let mut bins = by_trait.remove(&domain).ok_or(IngestError::MissingTrait(domain))?;
        bins.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut edges = vec![bins[0].0];
        for w in bins.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(IngestError::MisalignedBins(format!(
                    "trait {domain}: bin ending at {} followed by bin starting at {}",
                    w[0].1, w[1].0
                )));
            }
        }
        edges.extend(bins.iter().map(|b| b.1));
        validate_bin_edges(&edges).map_err(|e| IngestError::MisalignedBins(e.to_string()))?;
        match &reference {
            None => reference = Some(edges.clone()),
            Some(r) if r != &edges => {
                return Err(IngestError::MisalignedBins(format!(
                    "trait {domain} bins {edges:?} differ from {r:?}"
                )))
            }
            _ => {}
        }
        let values = bins.iter().map(|b| Some(b.2)).collect();
        let counts = vec![1; bins.len()];
        curves.insert(domain, PersonalityCurve::new(domain, edges, values, counts)?);
    }
    Ok(HumanBaseline { curves })
}
