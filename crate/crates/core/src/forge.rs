//! Persona profile generation from skeletons, and poor-detail simplification.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    word_count, DetailLevel, DomainError, Gender, PersonaProfile, PersonaSkeleton, Source,
    Strategy, NARRATIVE_MIN_WORDS,
};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::seeds::{derive_seed, text_seed};
use crate::templates::{PromptTemplate, TemplateError, TemplateSet};

const ANTIALIGN: &str = "Do not attempt to appear perfect, overly positive, or idealized. Simply select the option that truly reflects your response, even if it is neutral or negative.";

/// Instruction appended to assessment system prompts in anti-alignment runs.
pub fn antialign_instruction() -> &'static str {
    ANTIALIGN
}

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("skeleton {skeleton_id}: {source}")]
    Gateway { skeleton_id: String, source: GatewayError },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// `Label: value` lines covering every skeleton field. Profiles start with
/// this block so the generated text always carries the full record.
pub fn demographic_record(s: &PersonaSkeleton) -> String {
    let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "unknown".into());
    let lines = [
        ("Age", s.age.to_string()),
        ("Gender", s.gender.as_str().to_string()),
        ("Race", opt(&s.race)),
        ("Education", opt(&s.education)),
        ("Marital status", opt(&s.marital_status)),
        ("Occupation", opt(&s.occupation)),
        ("Relationship", opt(&s.relationship)),
        ("Work class", opt(&s.workclass)),
        ("Native country", opt(&s.country)),
        ("Annual income", opt(&s.income_bracket)),
        ("Capital gain", s.capital_gain.to_string()),
        ("Capital loss", s.capital_loss.to_string()),
        (
            "Hours per week",
            s.hours_per_week.map(|h| h.to_string()).unwrap_or_else(|| "unknown".into()),
        ),
    ];
    lines.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}

/// Generates profiles through a gateway.
pub struct Forge<'a> {
    gateway: &'a Gateway,
    templates: &'a TemplateSet,
    seed: u64,
    pub min_narrative_words: usize,
}

impl<'a> Forge<'a> {
    pub fn new(gateway: &'a Gateway, templates: &'a TemplateSet, seed: u64) -> Forge<'a> {
        Forge { gateway, templates, seed, min_narrative_words: NARRATIVE_MIN_WORDS }
    }

    fn ask(
        &self,
        template: &PromptTemplate,
        skel: &PersonaSkeleton,
        strategy: Strategy,
        attempt: u64,
        vars: &[(&str, &str)],
    ) -> Result<String, ForgeError> {
        let (system, user) = template.render(vars)?;
        let seed = derive_seed(&[self.seed, text_seed(&skel.id), text_seed(strategy.as_str()), attempt]);
        let req = ChatRequest::new(system, user)
            .with_tag(format!("forge:{}:{}", strategy.as_str(), skel.id))
            .with_seed(seed);
        self.gateway
            .complete(&req)
            .map(|r| r.text)
            .map_err(|source| ForgeError::Gateway { skeleton_id: skel.id.clone(), source })
    }

    fn profile(
        &self,
        id: &str,
        skel: &PersonaSkeleton,
        strategy: Strategy,
        expansion: &str,
        template: &PromptTemplate,
    ) -> PersonaProfile {
        let text = format!("{}\n\n{}", demographic_record(skel), expansion.trim());
        PersonaProfile {
            id: id.to_string(),
            skeleton_id: Some(skel.id.clone()),
            derived_from: None,
            name: None,
            word_count: word_count(&text),
            text,
            strategy,
            detail_level: DetailLevel::Standard,
            source: Source::Synthesized,
            substandard: false,
            template_hash: Some(template.hash.clone()),
            age: Some(skel.age),
            gender: Some(skel.gender),
        }
    }

    pub fn enrich_standard(&self, id: &str, skel: &PersonaSkeleton) -> Result<PersonaProfile, ForgeError> {
        skel.validate()?;
        let record = demographic_record(skel);
        let t = &self.templates.standard;
        let text = self.ask(t, skel, Strategy::Standard, 0, &[("demographics", &record)])?;
        Ok(self.profile(id, skel, Strategy::Standard, &text, t))
    }

    /// Narrative profile. A profile under the minimum length is regenerated
    /// once, then kept and flagged substandard.
    pub fn enrich_narrative(&self, id: &str, skel: &PersonaSkeleton) -> Result<PersonaProfile, ForgeError> {
        skel.validate()?;
        let record = demographic_record(skel);
        let min = self.min_narrative_words.to_string();
        let t = &self.templates.narrative;
        let vars = [("demographics", record.as_str()), ("min_words", min.as_str())];
        let mut profile = None;
        for attempt in 0..2 {
            let text = self.ask(t, skel, Strategy::Narrative, attempt, &vars)?;
            let p = self.profile(id, skel, Strategy::Narrative, &text, t);
            if p.word_count >= self.min_narrative_words {
                return Ok(p);
            }
            log::warn!("narrative profile {id} has {} words (attempt {})", p.word_count, attempt + 1);
            profile = Some(p);
        }
        let mut p = profile.expect("two attempts made");
        p.substandard = true;
        Ok(p)
    }
}

/// Attributes kept by [`simplify_to_poor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoorFields {
    pub age: bool,
    pub gender: bool,
    pub race: bool,
    pub country: bool,
    pub occupation: bool,
    /// Employment sector, rendered inside the occupation clause.
    pub workclass: bool,
}

impl Default for PoorFields {
    fn default() -> Self {
        PoorFields { age: true, gender: true, race: true, country: true, occupation: true, workclass: false }
    }
}

impl PoorFields {
    pub fn none() -> PoorFields {
        PoorFields { age: false, gender: false, race: false, country: false, occupation: false, workclass: false }
    }

    /// Parses a comma-separated field list such as `age,gender,race`.
    pub fn parse(list: &str) -> Option<PoorFields> {
        let mut f = PoorFields::none();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "age" => f.age = true,
                "gender" => f.gender = true,
                "race" => f.race = true,
                "country" => f.country = true,
                "occupation" => f.occupation = true,
                "workclass" => f.workclass = true,
                _ => return None,
            }
        }
        Some(f)
    }
}

/// Demographics recovered for simplification.
#[derive(Debug, Clone, Default, PartialEq)]
struct Demographics {
    age: Option<u32>,
    gender: Option<Gender>,
    race: Option<String>,
    country: Option<String>,
    occupation: Option<String>,
    workclass: Option<String>,
}

impl Demographics {
    fn from_skeleton(s: &PersonaSkeleton) -> Demographics {
        Demographics {
            age: Some(s.age),
            gender: Some(s.gender),
            race: s.race.clone(),
            country: s.country.clone(),
            occupation: s.occupation.clone(),
            workclass: s.workclass.clone(),
        }
    }

    fn from_text(p: &PersonaProfile) -> Demographics {
        static LINE: OnceLock<Regex> = OnceLock::new();
        static AGE: OnceLock<Regex> = OnceLock::new();
        static GENDER: OnceLock<Regex> = OnceLock::new();
        let line = LINE.get_or_init(|| Regex::new(r"(?m)^([A-Za-z ]+):[ \t]*(.+?)\s*$").expect("valid regex"));
        let mut d = Demographics { age: p.age, gender: p.gender, ..Default::default() };
        for c in line.captures_iter(&p.text) {
            let v = c[2].trim();
            let known = if v.eq_ignore_ascii_case("unknown") { None } else { Some(v.to_string()) };
            match c[1].trim() {
                "Age" => d.age = d.age.or_else(|| v.parse().ok()),
                "Gender" => d.gender = d.gender.or_else(|| Gender::parse(v)),
                "Race" => d.race = known,
                "Native country" => d.country = known,
                "Occupation" => d.occupation = known,
                "Work class" => d.workclass = known,
                _ => {}
            }
        }
        if d.age.is_none() {
            let re = AGE.get_or_init(|| Regex::new(r"\b(\d{1,3})-year-old\b").expect("valid regex"));
            d.age = re.captures(&p.text).and_then(|c| c[1].parse().ok());
        }
        if d.gender.is_none() {
            let re = GENDER.get_or_init(|| Regex::new(r"(?i)\b(man|woman|male|female)\b").expect("valid regex"));
            d.gender = re.captures(&p.text).and_then(|c| match c[1].to_ascii_lowercase().as_str() {
                "woman" | "female" => Some(Gender::Female),
                _ => Some(Gender::Male),
            });
        }
        d
    }
}

fn race_phrase(race: &str) -> (Option<String>, Option<String>) {
    match race {
        "White" | "Black" => (Some(race.to_string()), None),
        "Asian-Pac-Islander" => (None, Some("Asian-Pacific Islander".into())),
        "Amer-Indian-Eskimo" => (None, Some("American Indian or Eskimo".into())),
        "Other" => (None, None),
        other => (None, Some(other.replace('-', " "))),
    }
}

fn country_phrase(country: &str) -> String {
    match country {
        "United-States" => "the United States".into(),
        "Outlying-US(Guam-USVI-etc)" => "an outlying US territory".into(),
        other => other.replace('-', " "),
    }
}

fn sector_phrase(workclass: &str) -> Option<&'static str> {
    Some(match workclass {
        "Private" => "the private sector",
        "Self-emp-not-inc" | "Self-emp-inc" => "self-employment",
        "Federal-gov" => "the federal government",
        "State-gov" => "state government",
        "Local-gov" => "local government",
        _ => return None,
    })
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// One-sentence description such as
/// `You are a 24-year-old Black man living in the United States.`
fn poor_sentence(d: &Demographics, f: &PoorFields) -> String {
    let age = d.age.filter(|_| f.age);
    let gender = d.gender.filter(|_| f.gender);
    let (race_adj, descent) = match d.race.as_deref().filter(|_| f.race) {
        Some(r) => race_phrase(r),
        None => (None, None),
    };
    let noun = match gender {
        Some(Gender::Male) => "man",
        Some(Gender::Female) => "woman",
        None => "person",
    };
    let mut head = String::new();
    if let Some(r) = &race_adj {
        head.push_str(r);
        head.push(' ');
    }
    head.push_str(noun);
    let mut s = match age {
        Some(a) => format!("You are a {a}-year-old {head}"),
        None => format!("You are {} {head}", article(&head)),
    };
    if let Some(x) = &descent {
        s.push_str(&format!(" of {x} descent"));
    }
    if let Some(c) = d.country.as_deref().filter(|_| f.country) {
        if descent.is_some() {
            s.push(',');
        }
        s.push_str(&format!(" living in {}", country_phrase(c)));
    }
    if let Some(o) = d.occupation.as_deref().filter(|_| f.occupation) {
        let o = o.to_ascii_lowercase();
        s.push_str(", working");
        if let Some(sector) = d.workclass.as_deref().filter(|_| f.workclass).and_then(sector_phrase) {
            s.push_str(&format!(" in {sector}"));
        }
        s.push_str(&format!(" in {} \"{o}\" occupation", article(&o)));
    }
    s.push('.');
    s
}

/// Poor-detail variant of `profile` keeping only the selected demographics.
/// Uses `skeleton` when given, otherwise demographics parsed from the text.
/// Already-poor profiles are returned unchanged.
pub fn simplify_to_poor(
    profile: &PersonaProfile,
    skeleton: Option<&PersonaSkeleton>,
    fields: &PoorFields,
) -> PersonaProfile {
    if profile.strategy == Strategy::Poor {
        return profile.clone();
    }
    let demo = match skeleton {
        Some(s) => Demographics::from_skeleton(s),
        None => Demographics::from_text(profile),
    };
    let text = poor_sentence(&demo, fields);
    PersonaProfile {
        id: format!("{}-poor", profile.id),
        skeleton_id: profile.skeleton_id.clone(),
        derived_from: Some(profile.id.clone()),
        name: profile.name.clone(),
        word_count: word_count(&text),
        text,
        strategy: Strategy::Poor,
        detail_level: DetailLevel::Poor,
        source: profile.source,
        substandard: false,
        template_hash: None,
        age: demo.age,
        gender: demo.gender,
    }
}
