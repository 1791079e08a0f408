//! Reports computed from stored runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::cluster::KMeansOptions;
use crate::analytics::{
    build_curves, compare_to_baseline, euclidean_density_per_trait, identifiability_report, ring_pairs,
    stability_report, AnalyticsError, ClusterSpace, CurveComparison, CvBasis, IdentifiabilityReport,
    StabilityReport, TraitDensityPair,
};
use crate::domain::{Domain, PersonalityCurve};
use crate::ingest::HumanBaseline;
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no data for run {0}")]
    NoData(String),
    #[error("persona {0}: {1}")]
    Analytics(String, AnalyticsError),
    #[error("persona {0} has no age")]
    MissingAge(String),
    #[error("need at least 2 personas, run has {0}")]
    TooFewPersonas(usize),
}

fn scores_by_persona(store: &Store, run_id: &str) -> Result<BTreeMap<String, Vec<[f64; 5]>>, EvalError> {
    store.require_run(run_id)?;
    let grouped = store.personality_by_persona(run_id)?;
    if grouped.is_empty() {
        return Err(EvalError::NoData(run_id.to_string()));
    }
    Ok(grouped.into_iter().map(|(k, v)| (k, v.iter().map(|r| r.rescaled()).collect())).collect())
}

/// One stability report per persona of an assessment run.
pub fn stability_for_run(store: &Store, run_id: &str, basis: CvBasis) -> Result<Vec<StabilityReport>, EvalError> {
    scores_by_persona(store, run_id)?
        .into_iter()
        .map(|(id, s)| stability_report(&id, &s, basis).map_err(|e| EvalError::Analytics(id, e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyOutput {
    pub pairwise: Vec<IdentifiabilityReport>,
    pub grouped: IdentifiabilityReport,
    /// Per-domain densities for each pairwise report, same order.
    pub densities: Vec<Vec<TraitDensityPair>>,
}

/// Ring of adjacent pairs plus one grouped report over all personas, in
/// persona-id order unless `order` is given.
pub fn identify_for_run(
    store: &Store,
    run_id: &str,
    order: Option<&[String]>,
    space: ClusterSpace,
    seed: u64,
) -> Result<IdentifyOutput, EvalError> {
    let mut by = scores_by_persona(store, run_id)?;
    let groups: Vec<(String, Vec<[f64; 5]>)> = match order {
        Some(ids) => ids
            .iter()
            .map(|id| by.remove(id).map(|s| (id.clone(), s)).ok_or_else(|| EvalError::NoData(format!("{run_id}/{id}"))))
            .collect::<Result<_, _>>()?,
        None => by.into_iter().collect(),
    };
    identify_groups(&groups, space, seed)
}

pub fn identify_groups(
    groups: &[(String, Vec<[f64; 5]>)],
    space: ClusterSpace,
    seed: u64,
) -> Result<IdentifyOutput, EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::TooFewPersonas(groups.len()));
    }
    let opts = KMeansOptions::default();
    let label = |i: usize, j: usize| format!("{}|{}", groups[i].0, groups[j].0);
    let mut pairwise = Vec::new();
    let mut densities = Vec::new();
    for (i, j) in ring_pairs(groups.len()) {
        let pair = [groups[i].clone(), groups[j].clone()];
        let r = identifiability_report(&pair, space, seed, &opts).map_err(|e| EvalError::Analytics(label(i, j), e))?;
        densities.push(euclidean_density_per_trait(&groups[i].1, &groups[j].1));
        pairwise.push(r);
    }
    let grouped =
        identifiability_report(groups, space, seed, &opts).map_err(|e| EvalError::Analytics("grouped".into(), e))?;
    Ok(IdentifyOutput { pairwise, grouped, densities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationOutput {
    pub label: String,
    pub run_id: String,
    pub curves: BTreeMap<Domain, PersonalityCurve>,
    pub comparison: CurveComparison,
}

/// Age curves of an assessment run against the human baseline's bins.
pub fn population_for_run(
    store: &Store,
    run_id: &str,
    label: &str,
    baseline: &HumanBaseline,
) -> Result<PopulationOutput, EvalError> {
    store.require_run(run_id)?;
    let records = store.personality(run_id)?;
    if records.is_empty() {
        return Err(EvalError::NoData(run_id.to_string()));
    }
    let mut ages: BTreeMap<String, f64> = BTreeMap::new();
    let mut points = Vec::with_capacity(records.len());
    for r in &records {
        let pid = r.persona_id.clone().ok_or_else(|| EvalError::MissingAge("baseline".into()))?;
        let age = match ages.get(&pid) {
            Some(a) => *a,
            None => {
                let a = store
                    .persona(&pid)?
                    .and_then(|p| p.age)
                    .ok_or_else(|| EvalError::MissingAge(pid.clone()))? as f64;
                ages.insert(pid.clone(), a);
                a
            }
        };
        points.push((age, r.rescaled()));
    }
    let curves = build_curves(&points, baseline.bin_edges()).map_err(|e| EvalError::Analytics(run_id.into(), e))?;
    let comparison =
        compare_to_baseline(label, &curves, baseline).map_err(|e| EvalError::Analytics(run_id.into(), e))?;
    Ok(PopulationOutput { label: label.to_string(), run_id: run_id.to_string(), curves, comparison })
}
