use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use personasim::analytics::stats::sample_sd;
use personasim::analytics::{llm_baseline_run, stability_report, CvBasis};
use personasim::assessment::{AssessmentSpec, Assessor, Respondent};
use personasim::domain::{word_count, DetailLevel, ItemBank, PersonaProfile, Source, Strategy};
use personasim::gateway::{Gateway, GatewayConfig, MockConfig, MockProvider};
use personasim::pipeline::FROZEN_TIMESTAMP;
use personasim::seeds::derive_seed;
use personasim::templates::TemplateSet;

fn persona(text: &str) -> PersonaProfile {
    PersonaProfile {
        id: "p".into(),
        skeleton_id: None,
        derived_from: None,
        name: None,
        text: text.into(),
        strategy: Strategy::Literary,
        detail_level: DetailLevel::Standard,
        source: Source::External,
        word_count: word_count(text),
        substandard: false,
        template_hash: None,
        age: None,
        gender: None,
    }
}

fn assess(mock: Arc<MockProvider>, text: &str, n: u32) -> Vec<[f64; 5]> {
    let bank = ItemBank::bundled();
    let templates = TemplateSet::bundled();
    let gw = Gateway::new(mock, GatewayConfig::default());
    let assessor = Assessor::new(&gw, &bank, &templates);
    let p = persona(text);
    (0..n)
        .map(|r| {
            let spec = AssessmentSpec {
                assessment_id: format!("t:{r}"),
                run_id: "t".into(),
                replicate: r,
                antialign: false,
                seed: derive_seed(&[77, r as u64]),
                timestamp: FROZEN_TIMESTAMP.into(),
            };
            assessor.run(Respondent::Persona(&p), &spec).unwrap().record.rescaled()
        })
        .collect()
}

fn column(xs: &[[f64; 5]], d: usize) -> Vec<f64> {
    xs.iter().map(|x| x[d]).collect()
}

#[test]
fn latent_mean_is_recovered() {
    let mock = Arc::new(MockProvider::new(MockConfig::default(), ItemBank::bundled()));
    let latent = [40.0, 55.0, 62.5, 47.0, 58.0];
    let text = "A registered respondent used to check that the mock recovers its latent mean.";
    mock.register(text, latent, Some(DetailLevel::Standard));
    let scores = assess(mock, text, 400);
    for d in 0..5 {
        let col = column(&scores, d);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let se = sample_sd(&col) / (col.len() as f64).sqrt();
        assert!((mean - latent[d]).abs() < 4.0 * se + 0.5, "domain {d}: mean {mean} vs {} (se {se})", latent[d]);
    }
}

#[test]
fn poor_detail_spreads_wider() {
    let mock = Arc::new(MockProvider::new(MockConfig::default(), ItemBank::bundled()));
    let latent = [50.0; 5];
    let (poor, standard) = ("Poor variant text.", "Standard variant text.");
    mock.register(poor, latent, Some(DetailLevel::Poor));
    mock.register(standard, latent, Some(DetailLevel::Standard));
    let (p, s) = (assess(mock.clone(), poor, 300), assess(mock, standard, 300));
    for d in 0..5 {
        let (sp, ss) = (sample_sd(&column(&p, d)), sample_sd(&column(&s, d)));
        assert!(sp > 1.5 * ss, "domain {d}: sd poor {sp} vs standard {ss}");
    }
}

#[test]
fn detail_level_follows_word_count() {
    let mock = MockProvider::new(MockConfig::default(), ItemBank::bundled());
    assert_eq!(mock.model_for("A 40-year-old male nurse.", false).detail, DetailLevel::Poor);
    let long = "word ".repeat(200);
    assert_eq!(mock.model_for(&long, false).detail, DetailLevel::Standard);
    assert_eq!(mock.model_for("", false).latent_mean.scores, MockConfig::default().baseline);
}

#[test]
fn unconditioned_runs_sit_at_the_configured_baseline() {
    let bank = ItemBank::bundled();
    let templates = TemplateSet::bundled();
    let config = MockConfig::default();
    let gw = Gateway::new(Arc::new(MockProvider::new(config.clone(), bank.clone())), GatewayConfig::default());
    let assessor = Assessor::new(&gw, &bank, &templates);
    let run = llm_baseline_run(&assessor, 200, "b", 3, FROZEN_TIMESTAMP).unwrap();
    assert_eq!(run.successes(), 200);
    assert!(run.failures.is_empty());
    let all: Vec<[f64; 5]> = run.records().iter().map(|r| r.rescaled()).collect();
    for d in 0..5 {
        let col = column(&all, d);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let se = sample_sd(&col) / (col.len() as f64).sqrt();
        assert!((mean - config.baseline[d]).abs() < 4.0 * se + 0.5, "domain {d}: {mean} vs {}", config.baseline[d]);
    }
    assert!(run.report.is_some());
    assert!(run.records().iter().all(|r| r.persona_id.is_none()));
}

fn gaussian_cloud(n: usize, seed: u64) -> Vec<[f64; 5]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng))).collect()
}

/// Self-whitened Mahalanobis distances do not depend on the noise scale, so
/// Gaussian noise alone cannot separate the CVs of two detail levels.
#[test]
fn gaussian_cv_is_scale_free() {
    let z = gaussian_cloud(300, 5);
    let at = |sd: f64| {
        let xs: Vec<[f64; 5]> = z.iter().map(|r| r.map(|v| 50.0 + sd * v)).collect();
        stability_report("g", &xs, CvBasis::Distances).unwrap().cv
    };
    let (a, b) = (at(0.4 * 25.0), at(0.8 * 25.0));
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distance_cv_is_affine_invariant(seed in any::<u64>(), scale in 0.5f64..40.0, shift in 20f64..80.0) {
        let z = gaussian_cloud(120, seed);
        let base = stability_report("z", &z.iter().map(|r| r.map(|v| 50.0 + v)).collect::<Vec<_>>(), CvBasis::Distances).unwrap();
        let moved: Vec<[f64; 5]> = z.iter().map(|r| r.map(|v| shift + scale * v)).collect();
        let r = stability_report("z", &moved, CvBasis::Distances).unwrap();
        prop_assert_eq!(r.n_kept, base.n_kept);
        prop_assert!((r.cv - base.cv).abs() < 1e-6);
    }
}

