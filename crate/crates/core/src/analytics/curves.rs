//! Age-binned personality curves and their distance to a reference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::domain::{validate_bin_edges, Domain, PersonalityCurve};
use crate::ingest::HumanBaseline;

/// Default age bins: [15,25), [25,35), ... [65,75).
pub const DEFAULT_AGE_BINS: [f64; 7] = [15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0];

/// Index of the left-closed, right-open bin containing `x`.
pub fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    if x < edges[0] || x >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// One curve per domain from `(age, rescaled scores)` pairs: per-bin
/// arithmetic mean, undefined where a bin is empty. Records outside every bin
/// are ignored.
pub fn build_curves(
    records: &[(f64, [f64; 5])],
    bin_edges: &[f64],
) -> Result<BTreeMap<Domain, PersonalityCurve>, AnalyticsError> {
    validate_bin_edges(bin_edges).map_err(|e| AnalyticsError::InvalidBins(e.to_string()))?;
    let bins = bin_edges.len() - 1;
    // Running means, exact when every record in a bin has the same value.
    let mut means = vec![[0.0; 5]; bins];
    let mut counts = vec![0usize; bins];
    for (age, scores) in records {
        if let Some(b) = bin_index(bin_edges, *age) {
            counts[b] += 1;
            let k = counts[b] as f64;
            for (m, v) in means[b].iter_mut().zip(scores) {
                *m += (v - *m) / k;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(AnalyticsError::NoRecordsInBins);
    }
    let mut out = BTreeMap::new();
    for d in Domain::ALL {
        let values = (0..bins)
            .map(|b| (counts[b] > 0).then(|| means[b][d.index()]))
            .collect();
        let curve = PersonalityCurve::new(d, bin_edges.to_vec(), values, counts.clone())
            .map_err(|e| AnalyticsError::InvalidBins(e.to_string()))?;
        out.insert(d, curve);
    }
    Ok(out)
}

/// `sqrt(Σ (llm - human)²)` over bins defined in both curves.
pub fn curve_distance(llm: &PersonalityCurve, human: &PersonalityCurve) -> Result<f64, AnalyticsError> {
    if llm.bin_edges != human.bin_edges {
        return Err(AnalyticsError::MisalignedCurves);
    }
    let mut common = 0;
    let mut ss = 0.0;
    for (a, b) in llm.values.iter().zip(&human.values) {
        if let (Some(a), Some(b)) = (a, b) {
            common += 1;
            ss += (a - b).powi(2);
        }
    }
    if common == 0 {
        return Err(AnalyticsError::NoCommonBins);
    }
    Ok(ss.sqrt())
}

/// `sqrt(Σ d²)` over the five per-trait distances.
pub fn total_curve_distance(per_trait: &[f64; 5]) -> Result<f64, AnalyticsError> {
    if let Some(&d) = per_trait.iter().find(|d| !(**d >= 0.0)) {
        return Err(AnalyticsError::NegativeDistance(d));
    }
    Ok(per_trait.iter().map(|d| d * d).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveComparison {
    pub label: String,
    pub per_trait_distance: BTreeMap<Domain, f64>,
    pub total_distance: f64,
}

pub fn compare_to_baseline(
    label: &str,
    curves: &BTreeMap<Domain, PersonalityCurve>,
    baseline: &HumanBaseline,
) -> Result<CurveComparison, AnalyticsError> {
    let mut per = [0.0; 5];
    let mut map = BTreeMap::new();
    for d in Domain::ALL {
        let c = curves.get(&d).ok_or(AnalyticsError::MisalignedCurves)?;
        per[d.index()] = curve_distance(c, baseline.curve(d))?;
        map.insert(d, per[d.index()]);
    }
    Ok(CurveComparison { label: label.to_string(), per_trait_distance: map, total_distance: total_curve_distance(&per)? })
}
