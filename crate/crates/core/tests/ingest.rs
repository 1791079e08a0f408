use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use personasim::domain::{Source, Strategy};
use personasim::ingest::{self, categorical_value, CensusTable, SampleOptions, SamplingFilter};

fn census() -> CensusTable {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult_sample.data");
    ingest::load_census(&path).unwrap()
}

fn counts(values: impl Iterator<Item = String>) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for v in values {
        *m.entry(v).or_insert(0.0) += 1.0;
    }
    m
}

/// Pearson goodness-of-fit p-value of `observed` against the category shares
/// of `reference`.
fn gof_p(observed: &BTreeMap<String, f64>, reference: &BTreeMap<String, f64>) -> f64 {
    let n: f64 = observed.values().sum();
    let total: f64 = reference.values().sum();
    let stat: f64 = reference
        .iter()
        .map(|(k, r)| {
            let e = n * r / total;
            let o = observed.get(k).copied().unwrap_or(0.0);
            (o - e).powi(2) / e
        })
        .sum();
    let df = (reference.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn sampled_marginals_match_the_census() {
    let table = census();
    assert_eq!(table.len(), 1000);
    let sample = ingest::sample_skeletons(&table, &SampleOptions::new(10_000, 11)).unwrap();
    for col in ["gender", "race", "marital_status"] {
        let reference = counts(table.rows.iter().filter_map(|r| categorical_value(r, col)));
        let observed = counts(sample.iter().filter_map(|r| categorical_value(r, col)));
        let p = gof_p(&observed, &reference);
        assert!(p > 0.01, "{col}: p = {p}");
    }
}

#[test]
fn sampling_is_seeded() {
    let table = census();
    let a = ingest::sample_skeletons(&table, &SampleOptions::new(50, 4)).unwrap();
    let b = ingest::sample_skeletons(&table, &SampleOptions::new(50, 4)).unwrap();
    let c = ingest::sample_skeletons(&table, &SampleOptions::new(50, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filtered_samples_stay_inside_the_filter(lo in 17u32..60, width in 5u32..30, seed in any::<u64>(), female in any::<bool>()) {
        let table = census();
        let gender = if female { "Female" } else { "Male" };
        let filter = SamplingFilter::parse(&format!("gender={gender},age={lo}..{}", lo + width)).unwrap();
        let mut opts = SampleOptions::new(40, seed);
        opts.filter = Some(filter.clone());
        match ingest::sample_skeletons(&table, &opts) {
            Ok(rows) => {
                prop_assert_eq!(rows.len(), 40);
                for r in &rows {
                    let g = categorical_value(r, "gender");
                    prop_assert_eq!(g.as_deref(), Some(gender));
                    prop_assert!(r.age >= lo && r.age <= lo + width, "age {} outside {}..{}", r.age, lo, lo + width);
                }
            }
            Err(e) => prop_assert!(!table.rows.iter().any(|r| filter.matches(r)), "{}", e),
        }
    }
}

#[test]
fn six_hundred_literary_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("characters.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    let mut expected = Vec::new();
    for i in 0..600 {
        if i % 50 == 7 {
            writeln!(f, "{}", serde_json::json!({"name": format!("Nobody {i}")})).unwrap();
            continue;
        }
        let description = format!(
            "Character {i} \u{2014} keeps bees, argues about \"weather\", and writes letters\nto a sister in Łódź."
        );
        writeln!(
            f,
            "{}",
            serde_json::json!({"name": format!("Person {i}"), "description": description, "age": 20 + i % 60, "gender": "female"})
        )
        .unwrap();
        expected.push(description);
    }
    drop(f);
    let personas = ingest::load_literary_personas(&path).unwrap();
    assert_eq!(personas.len(), 588);
    let texts: Vec<&str> = personas.iter().map(|p| p.text.as_str()).collect();
    assert_eq!(texts, expected.iter().map(String::as_str).collect::<Vec<_>>());
    let mut ids: Vec<&str> = personas.iter().map(|p| p.id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 588);
    for p in &personas {
        assert_eq!(p.strategy, Strategy::Literary);
        assert_eq!(p.source, Source::External);
        assert!(p.skeleton_id.is_none());
        p.validate().unwrap();
    }
}
