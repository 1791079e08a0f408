//! Questionnaire administration: sheet prompts, response parsing and scoring.
//!
//! Answer grammar, one answer per line:
//!
//! ```text
//! Q?<id>[.:)] (answer|choice)? [:-]? <1-5|A-E> <rationale>
//! ```
//!
//! Whitespace is allowed between tokens, `answer`/`choice` is matched
//! case-insensitively, markdown emphasis (`*`, `_`) around the id or choice is
//! ignored, and letters A..E map to 1..5. Anything after the choice, minus
//! leading separators, is the rationale. Lines that do not match, and ids
//! outside the sheet, are ignored.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AnswerSheet, AssessmentRecord, DomainError, FacetScores, ItemBank, ItemResponse,
    PersonaProfile, QuestionnaireItem, Scale, TraitVector, ITEM_COUNT, SHEET_COUNT, SHEET_SIZE,
};
use crate::forge::antialign_instruction;
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::templates::{TemplateError, TemplateSet};

/// Twenty consecutive items administered in one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sheet {
    pub index: usize,
    pub items: Vec<QuestionnaireItem>,
}

impl Sheet {
    pub fn item_ids(&self) -> Vec<u16> {
        self.items.iter().map(|i| i.item_id).collect()
    }
}

/// Sheet `i` holds items `20i+1 ..= 20i+20` in instrument order.
pub fn partition_sheets(bank: &ItemBank) -> Vec<Sheet> {
    bank.items()
        .chunks(SHEET_SIZE)
        .enumerate()
        .map(|(index, items)| Sheet { index, items: items.to_vec() })
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("empty persona")]
    EmptyPersona,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

fn item_lines(sheet: &Sheet) -> String {
    sheet.items.iter().map(|i| format!("Q{}. {}", i.item_id, i.text)).collect::<Vec<_>>().join("\n")
}

/// Prompt for one sheet, role-playing `persona_text`. The anti-alignment
/// instruction, when set, follows the persona in the system text.
pub fn build_sheet_prompt(
    templates: &TemplateSet,
    persona_text: &str,
    sheet: &Sheet,
    antialign: bool,
) -> Result<ChatRequest, PromptError> {
    if persona_text.trim().is_empty() {
        return Err(PromptError::EmptyPersona);
    }
    let items = item_lines(sheet);
    let count = sheet.items.len().to_string();
    let fragment = if antialign { antialign_instruction() } else { "" };
    let (system, user) = templates.assessment.render(&[
        ("persona", persona_text),
        ("antialign", fragment),
        ("items", &items),
        ("count", &count),
    ])?;
    Ok(ChatRequest::new(system, user))
}

/// Prompt for one sheet with no persona.
pub fn build_baseline_prompt(
    templates: &TemplateSet,
    sheet: &Sheet,
    antialign: bool,
) -> Result<ChatRequest, PromptError> {
    let items = item_lines(sheet);
    let count = sheet.items.len().to_string();
    let fragment = if antialign { antialign_instruction() } else { "" };
    let (system, user) = templates.assessment_baseline.render(&[
        ("antialign", fragment),
        ("items", &items),
        ("count", &count),
    ])?;
    Ok(ChatRequest::new(system, user))
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
pub enum ParseError {
    #[error("missing items {0:?}")]
    MissingItems(Vec<u16>),
    #[error("item {0} answered more than once")]
    DuplicateItem(u16),
    #[error("item {item}: choice {value:?} outside 1..5")]
    ChoiceOutOfRange { item: u16, value: String },
}

fn answer_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*[*_]*\s*[Qq]?(\d{1,3})[*_]*\s*[.:)][*_]*\s*(?i:(?:answer|choice)\s*)?[:\-]?\s*[*_]*(\d+|[A-E])(?:\b|$)(.*)$",
        )
        .expect("valid regex")
    })
}

/// Parses one provider reply into a sheet of exactly the sheet's items.
pub fn parse_sheet_response(text: &str, sheet: &Sheet) -> Result<Vec<ItemResponse>, ParseError> {
    let wanted = sheet.item_ids();
    let mut found: BTreeMap<u16, ItemResponse> = BTreeMap::new();
    for line in text.lines() {
        let Some(c) = answer_line().captures(line) else { continue };
        let Ok(id) = c[1].parse::<u16>() else { continue };
        if !wanted.contains(&id) {
            continue;
        }
        let raw = &c[2];
        let choice = match raw {
            "A" => 1,
            "B" => 2,
            "C" => 3,
            "D" => 4,
            "E" => 5,
            digits => match digits.parse::<u8>() {
                Ok(v @ 1..=5) => v,
                _ => return Err(ParseError::ChoiceOutOfRange { item: id, value: raw.to_string() }),
            },
        };
        let rationale = c[3]
            .trim_start_matches(|ch: char| ch.is_whitespace() || "-–—:.,;)*_".contains(ch))
            .trim();
        if found.contains_key(&id) {
            return Err(ParseError::DuplicateItem(id));
        }
        let rationale = (!rationale.is_empty()).then(|| rationale.to_string());
        found.insert(id, ItemResponse { item_id: id, choice, rationale });
    }
    let missing: Vec<u16> = wanted.iter().copied().filter(|id| !found.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(ParseError::MissingItems(missing));
    }
    Ok(found.into_values().collect())
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScoreError {
    #[error("expected {expected} responses, got {got}")]
    Incomplete { expected: usize, got: usize },
    #[error("item {0} has no response")]
    MissingItem(u16),
    #[error("item {0} answered more than once")]
    DuplicateItem(u16),
    #[error("response to unknown item {0}")]
    UnknownItem(u16),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    /// Raw domain scores, 24..=120.
    pub traits: TraitVector,
    pub facets: FacetScores,
}

/// Scores a complete set of responses. Item score is the choice for
/// plus-keyed items and `6 - choice` for minus-keyed items; facets sum their
/// four items and domains sum their six facets.
pub fn score(responses: &[ItemResponse], bank: &ItemBank) -> Result<Scores, ScoreError> {
    if responses.len() != bank.len() {
        return Err(ScoreError::Incomplete { expected: bank.len(), got: responses.len() });
    }
    let mut seen = vec![false; ITEM_COUNT + 1];
    let mut facets = [0u8; 30];
    for r in responses {
        ItemResponse::new(r.item_id, r.choice, None)?;
        let item = bank.item(r.item_id).ok_or(ScoreError::UnknownItem(r.item_id))?;
        let slot = &mut seen[r.item_id as usize];
        if *slot {
            return Err(ScoreError::DuplicateItem(r.item_id));
        }
        *slot = true;
        facets[item.facet_slot()] += item.keying.item_score(r.choice);
    }
    if let Some(id) = (1..=ITEM_COUNT as u16).find(|&id| !seen[id as usize]) {
        return Err(ScoreError::MissingItem(id));
    }
    let facets = FacetScores(facets);
    let mut raw = [0.0; 5];
    for d in crate::domain::Domain::ALL {
        raw[d.index()] = facets.domain_raw(d) as f64;
    }
    Ok(Scores { traits: TraitVector::new(raw, Scale::Raw)?, facets })
}

/// One sheet exchange as it will be stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetExchange {
    pub sheet: AnswerSheet,
    /// Reply text that parsed.
    pub raw_text: String,
    /// Prompts sent for this sheet (1, or 2 after a re-ask).
    pub attempts: u32,
    pub provider: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentOutcome {
    pub record: AssessmentRecord,
    pub sheets: Vec<SheetExchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentFailure {
    pub assessment_id: String,
    pub sheet_index: Option<usize>,
    pub reason: String,
    pub attempts: u32,
}

/// Who is being assessed.
#[derive(Debug, Clone, Copy)]
pub enum Respondent<'a> {
    Persona(&'a PersonaProfile),
    /// No persona: the model's own baseline.
    Unconditioned,
}

/// Identity and seed of one assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSpec {
    pub assessment_id: String,
    pub run_id: String,
    pub replicate: u32,
    pub antialign: bool,
    /// Sent with every request of the assessment.
    pub seed: u64,
    pub timestamp: String,
}

pub struct Assessor<'a> {
    pub gateway: &'a Gateway,
    pub bank: &'a ItemBank,
    pub templates: &'a TemplateSet,
    sheets: Vec<Sheet>,
}

impl<'a> Assessor<'a> {
    pub fn new(gateway: &'a Gateway, bank: &'a ItemBank, templates: &'a TemplateSet) -> Assessor<'a> {
        Assessor { gateway, bank, templates, sheets: partition_sheets(bank) }
    }

    /// Administers all six sheets in order. A sheet whose reply does not
    /// parse is asked once more with a stricter format reminder; if that also
    /// fails, or the gateway gives up, the assessment fails.
    pub fn run(
        &self,
        respondent: Respondent<'_>,
        spec: &AssessmentSpec,
    ) -> Result<AssessmentOutcome, AssessmentFailure> {
        let fail = |sheet_index: Option<usize>, reason: String, attempts: u32| AssessmentFailure {
            assessment_id: spec.assessment_id.clone(),
            sheet_index,
            reason,
            attempts,
        };
        let persona_id = match respondent {
            Respondent::Persona(p) => Some(p.id.clone()),
            Respondent::Unconditioned => None,
        };
        let mut exchanges = Vec::with_capacity(SHEET_COUNT);
        let mut responses = Vec::with_capacity(ITEM_COUNT);
        for sheet in &self.sheets {
            let prompt = match respondent {
                Respondent::Persona(p) => build_sheet_prompt(self.templates, &p.text, sheet, spec.antialign),
                Respondent::Unconditioned => build_baseline_prompt(self.templates, sheet, spec.antialign),
            }
            .map_err(|e| fail(Some(sheet.index), e.to_string(), 0))?;
            let prompt = prompt
                .with_seed(spec.seed)
                .with_tag(format!("{}#{}", spec.assessment_id, sheet.index));
            let mut request = prompt.clone();
            let mut attempts = 0;
            let mut latency = 0;
            let parsed = loop {
                attempts += 1;
                let reply = self
                    .gateway
                    .complete(&request)
                    .map_err(|e: GatewayError| fail(Some(sheet.index), e.to_string(), attempts))?;
                latency += reply.latency_ms;
                match parse_sheet_response(&reply.text, sheet) {
                    Ok(r) => break (r, reply),
                    Err(e) if attempts < 2 => {
                        log::warn!("{}: sheet {} unparsable ({e}), re-asking", spec.assessment_id, sheet.index);
                        let ids = sheet.item_ids().iter().map(u16::to_string).collect::<Vec<_>>().join(", ");
                        let count = sheet.items.len().to_string();
                        let (_, reminder) = self
                            .templates
                            .strict_reminder
                            .render(&[("count", &count), ("ids", &ids)])
                            .map_err(|e| fail(Some(sheet.index), e.to_string(), attempts))?;
                        request = prompt.clone();
                        request.user_text = format!("{}\n\n{}", prompt.user_text, reminder);
                    }
                    Err(e) => return Err(fail(Some(sheet.index), e.to_string(), attempts)),
                }
            };
            let (sheet_responses, reply) = parsed;
            responses.extend(sheet_responses.iter().cloned());
            let answer_sheet =
                AnswerSheet::new(spec.assessment_id.clone(), persona_id.clone(), sheet.index, sheet_responses)
                    .map_err(|e| fail(Some(sheet.index), e.to_string(), attempts))?;
            exchanges.push(SheetExchange {
                sheet: answer_sheet,
                raw_text: reply.text,
                attempts,
                provider: reply.provider,
                latency_ms: latency,
            });
        }
        let scores = score(&responses, self.bank).map_err(|e| fail(None, e.to_string(), 0))?;
        Ok(AssessmentOutcome {
            record: AssessmentRecord {
                assessment_id: spec.assessment_id.clone(),
                persona_id,
                run_id: spec.run_id.clone(),
                replicate: spec.replicate,
                traits: scores.traits,
                facets: scores.facets,
                timestamp: spec.timestamp.clone(),
            },
            sheets: exchanges,
        })
    }
}

/// Re-scores stored sheets; used to check a record against its answers.
pub fn rescore_sheets(sheets: &[AnswerSheet], bank: &ItemBank) -> Result<Scores, ScoreError> {
    let responses: Vec<ItemResponse> = sheets.iter().flat_map(|s| s.responses.iter().cloned()).collect();
    score(&responses, bank)
}
