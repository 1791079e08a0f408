//! Deterministic offline respondent.
//!
//! Each persona text maps to a latent trait vector. Per assessment a latent
//! draw θ' = mean + noise is taken on the 1..5 item scale, and each item is
//! answered with `clamp(round(θ'[domain] + u), 1, 5)`, `u ~ U(-0.5, 0.5)`,
//! reversed for minus-keyed items. Noise SDs are in item points (one item
//! point is 25 rescaled points). Poor-detail personas draw multivariate
//! Student-t noise rescaled to the configured SD, standard-detail personas
//! draw Gaussian noise.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ProviderError, PERSONA_BEGIN, PERSONA_END};
use crate::domain::{word_count, DetailLevel, ItemBank, QuestionnaireItem, Scale, TraitVector};
use crate::seeds::{derive_seed, text_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Tail {
    Gaussian,
    /// Shared chi-square mixing across the five domains, `nu > 2`.
    StudentT { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockNoise {
    /// Per-domain SD of θ' in item points.
    pub sd: f64,
    pub tail: Tail,
}

impl MockNoise {
    pub fn gaussian(sd: f64) -> MockNoise {
        MockNoise { sd, tail: Tail::Gaussian }
    }

    pub fn student_t(sd: f64, nu: f64) -> MockNoise {
        assert!(nu > 2.0, "Student-t needs nu > 2 for a finite variance");
        MockNoise { sd, tail: Tail::StudentT { nu } }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> [f64; 5] {
        let mut z = [0.0; 5];
        for v in &mut z {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        let scale = match self.tail {
            Tail::Gaussian => 1.0,
            Tail::StudentT { nu } => {
                let w: f64 = ChiSquared::new(nu).expect("nu > 0").sample(rng);
                ((nu - 2.0) / w).sqrt()
            }
        };
        z.map(|v| v * scale * self.sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailNoise {
    pub poor: MockNoise,
    pub standard: MockNoise,
}

impl DetailNoise {
    pub fn get(&self, detail: DetailLevel) -> MockNoise {
        match detail {
            DetailLevel::Poor => self.poor,
            DetailLevel::Standard => self.standard,
        }
    }
}

impl Default for DetailNoise {
    fn default() -> Self {
        DetailNoise { poor: MockNoise::student_t(0.8, 8.0), standard: MockNoise::gaussian(0.4) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub seed: u64,
    pub noise: DetailNoise,
    /// Personas with fewer words are treated as poor detail.
    pub poor_word_threshold: usize,
    /// Rescaled latent used when the persona text is empty.
    pub baseline: [f64; 5],
    /// Offset added to hash-derived latents (rescaled points), halved when the
    /// anti-alignment instruction is present.
    pub alignment_bias: [f64; 5],
    /// Rescaled points per year of age away from 45, applied when the text
    /// states an age.
    pub age_slope: [f64; 5],
    /// Length of generated profiles when the prompt states no minimum.
    pub profile_words: usize,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            seed: 0,
            noise: DetailNoise::default(),
            poor_word_threshold: 40,
            baseline: [30.0, 60.0, 65.0, 72.0, 70.0],
            alignment_bias: [-10.0, 6.0, 8.0, 12.0, 10.0],
            age_slope: [-0.3, -0.1, -0.1, 0.2, 0.25],
            profile_words: 220,
        }
    }
}

/// Latent description of one simulated respondent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockPersonaModel {
    /// Rescaled (0..100) latent mean.
    pub latent_mean: TraitVector,
    pub detail: DetailLevel,
    pub noise_sd_by_detail: DetailNoise,
    pub seed: u64,
}

impl MockPersonaModel {
    pub fn new(latent_rescaled: [f64; 5], detail: DetailLevel, noise: DetailNoise, seed: u64) -> Self {
        let clamped = latent_rescaled.map(|v| v.clamp(0.0, 100.0));
        MockPersonaModel {
            latent_mean: TraitVector { scores: clamped, scale: Scale::Rescaled },
            detail,
            noise_sd_by_detail: noise,
            seed,
        }
    }

    pub fn noise(&self) -> MockNoise {
        self.noise_sd_by_detail.get(self.detail)
    }

    /// Latent mean on the 1..5 item scale.
    pub fn item_scale_mean(&self) -> [f64; 5] {
        self.latent_mean.scores.map(|r| 1.0 + 4.0 * r / 100.0)
    }

    /// θ' for one assessment, on the item scale.
    pub fn draw_theta(&self, assessment_seed: u64) -> [f64; 5] {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[self.seed, assessment_seed]));
        let noise = self.noise().draw(&mut rng);
        let m = self.item_scale_mean();
        std::array::from_fn(|i| m[i] + noise[i])
    }

    /// Likert choice for one item given θ'.
    pub fn answer_item(&self, item: &QuestionnaireItem, theta: &[f64; 5], assessment_seed: u64) -> u8 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            self.seed,
            assessment_seed,
            item.item_id as u64,
        ]));
        let u: f64 = rng.random_range(-0.5..0.5);
        let t = (theta[item.domain.index()] + u + 0.5).floor().clamp(1.0, 5.0) as u8;
        item.keying.item_score(t)
    }
}

const RATIONALES: [&str; 5] = [
    "This is not like me at all.",
    "This is mostly not how I am.",
    "I am somewhere in between on this.",
    "This is fairly typical of me.",
    "This describes me well.",
];

/// Answer block for `sheet_items`, one `Q<id>: <choice> - <rationale>` line per item.
pub fn mock_answer_sheet(
    model: &MockPersonaModel,
    sheet_items: &[QuestionnaireItem],
    assessment_seed: u64,
) -> String {
    let theta = model.draw_theta(assessment_seed);
    let mut out = String::new();
    for item in sheet_items {
        let c = model.answer_item(item, &theta, assessment_seed);
        out.push_str(&format!("Q{}: {} - {}\n", item.item_id, c, RATIONALES[c as usize - 1]));
    }
    out
}

#[derive(Debug, Clone)]
struct Entry {
    latent: [f64; 5],
    detail: Option<DetailLevel>,
}

/// Offline [`ChatProvider`]. Answers questionnaire prompts through
/// [`mock_answer_sheet`] and profile-writing prompts with filler prose.
pub struct MockProvider {
    config: MockConfig,
    bank: ItemBank,
    registry: RwLock<HashMap<u64, Entry>>,
    item_line: Regex,
    min_words: Regex,
    age: Regex,
}

impl MockProvider {
    pub fn new(config: MockConfig, bank: ItemBank) -> MockProvider {
        MockProvider {
            config,
            bank,
            registry: RwLock::new(HashMap::new()),
            item_line: Regex::new(r"(?m)^\s*Q(\d{1,3})[.:)]").expect("valid regex"),
            min_words: Regex::new(r"(?i)at least ([\d,]+) words").expect("valid regex"),
            age: Regex::new(r"(\d{1,3})-year-old").expect("valid regex"),
        }
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// Fixes the rescaled latent mean (and optionally the detail level) used for
    /// persona `text`.
    pub fn register(&self, text: &str, latent_rescaled: [f64; 5], detail: Option<DetailLevel>) {
        self.registry
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(text_seed(text), Entry { latent: latent_rescaled, detail });
    }

    /// Makes `text` share the latent mean of `source_text`. Detail level is
    /// still inferred from `text`.
    pub fn alias(&self, text: &str, source_text: &str) {
        let latent = self.latent_for(source_text, false);
        self.register(text, latent, None);
    }

    fn hashed_latent(&self, text: &str) -> [f64; 5] {
        let h = derive_seed(&[self.config.seed, text_seed(text)]);
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let mut v: [f64; 5] = std::array::from_fn(|_| rng.random_range(25.0..75.0));
        if let Some(age) = self.age.captures(text).and_then(|c| c[1].parse::<f64>().ok()) {
            for (x, s) in v.iter_mut().zip(self.config.age_slope) {
                *x += s * (age - 45.0);
            }
        }
        v
    }

    fn latent_for(&self, text: &str, antialign: bool) -> [f64; 5] {
        if text.trim().is_empty() {
            return self.config.baseline;
        }
        if let Some(e) = self.registry.read().unwrap_or_else(|e| e.into_inner()).get(&text_seed(text)) {
            return e.latent;
        }
        let factor = if antialign { 0.5 } else { 1.0 };
        let base = self.hashed_latent(text);
        std::array::from_fn(|i| base[i] + factor * self.config.alignment_bias[i])
    }

    /// The respondent model used for persona `text`.
    pub fn model_for(&self, text: &str, antialign: bool) -> MockPersonaModel {
        let registered = self
            .registry
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&text_seed(text))
            .and_then(|e| e.detail);
        let detail = registered.unwrap_or(if text.trim().is_empty() {
            DetailLevel::Standard
        } else if word_count(text) < self.config.poor_word_threshold {
            DetailLevel::Poor
        } else {
            DetailLevel::Standard
        });
        MockPersonaModel::new(
            self.latent_for(text, antialign),
            detail,
            self.config.noise,
            derive_seed(&[self.config.seed, text_seed(text)]),
        )
    }

    fn profile_text(&self, request: &ChatRequest) -> String {
        let n = self
            .min_words
            .captures(&request.user_text)
            .or_else(|| self.min_words.captures(&request.system_text))
            .and_then(|c| c[1].replace(',', "").parse::<usize>().ok())
            .map(|n| n + n / 10)
            .unwrap_or(self.config.profile_words);
        let seed = request.seed.unwrap_or_else(|| {
            derive_seed(&[text_seed(&request.system_text), text_seed(&request.user_text)])
        });
        filler_prose(n, derive_seed(&[self.config.seed, seed]))
    }
}

/// Extracts persona text between [`PERSONA_BEGIN`] and [`PERSONA_END`].
pub fn persona_from_system(system_text: &str) -> Option<&str> {
    let start = system_text.find(PERSONA_BEGIN)? + PERSONA_BEGIN.len();
    let end = system_text[start..].find(PERSONA_END)? + start;
    Some(system_text[start..end].trim())
}

const FILLER: [&str; 48] = [
    "morning", "coffee", "neighbours", "work", "garden", "weekend", "family", "quiet", "friends",
    "plans", "kitchen", "walks", "books", "music", "careful", "patient", "restless", "curious",
    "brother", "sister", "mother", "father", "city", "town", "evening", "habits", "savings",
    "church", "market", "shift", "colleagues", "jacket", "hair", "grey", "laughs", "worries",
    "hopes", "memories", "letters", "car", "radio", "dog", "river", "winter", "summer", "long",
    "small", "honest",
];

fn filler_prose(words: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(if i % 60 == 0 { '\n' } else { ' ' });
        }
        let w = FILLER[rng.random_range(0..FILLER.len())];
        if i % 12 == 0 {
            let mut c = w.chars();
            let first = c.next().expect("non-empty word").to_ascii_uppercase();
            out.push(first);
            out.push_str(c.as_str());
        } else {
            out.push_str(w);
        }
        if i % 12 == 11 || i + 1 == words {
            out.push('.');
        }
    }
    out
}

impl ChatProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn reports_latency(&self) -> bool {
        false
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let ids: Vec<u16> = self
            .item_line
            .captures_iter(&request.user_text)
            .filter_map(|c| c[1].parse().ok())
            .collect();
        if ids.is_empty() {
            return Ok(self.profile_text(request));
        }
        let mut items = Vec::with_capacity(ids.len());
        for id in ids {
            let item = self
                .bank
                .item(id)
                .ok_or_else(|| ProviderError::Fatal(format!("mock bank has no item {id}")))?;
            items.push(item.clone());
        }
        let persona = persona_from_system(&request.system_text).unwrap_or("");
        let antialign = request.system_text.contains("neutral or negative");
        let model = self.model_for(persona, antialign);
        let seed = request.seed.unwrap_or_else(|| text_seed(&request.user_text));
        Ok(mock_answer_sheet(&model, &items, seed))
    }
}
