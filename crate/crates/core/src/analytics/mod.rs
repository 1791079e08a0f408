//! Individual- and population-level evaluation.

pub mod cluster;
pub mod curves;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{AssessmentFailure, AssessmentOutcome, AssessmentSpec, Assessor, Respondent};
use crate::domain::{AssessmentRecord, Domain};
use crate::seeds::derive_seed;
use cluster::{adjusted_rand_index, centroid_distance, kmeans, standardize, KMeansOptions};
use stats::{Kde, KDE_GRID_POINTS};

pub use curves::{
    build_curves, compare_to_baseline, curve_distance, total_curve_distance, CurveComparison,
    DEFAULT_AGE_BINS,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("mean is zero")]
    ZeroMean,
    #[error("zero variance")]
    ZeroVariance,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("centroid distance needs exactly 2 centroids, got {0}")]
    WrongCentroidCount(usize),
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("curves have different bins")]
    MisalignedCurves,
    #[error("curves share no defined bin")]
    NoCommonBins,
    #[error("no record falls in any bin")]
    NoRecordsInBins,
    #[error("invalid bins: {0}")]
    InvalidBins(String),
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("repeat count must be at least 1")]
    ZeroRepeats,
}

/// What the coefficient of variation is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvBasis {
    /// Mahalanobis distances of the kept assessments.
    #[default]
    Distances,
    /// Mean of the five per-domain CVs of the kept trait scores.
    TraitScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub persona_id: String,
    pub n_raw: usize,
    pub n_kept: usize,
    /// Distance of every assessment from the sample center, in input order.
    pub mahalanobis_distances: Vec<f64>,
    /// Indices into `mahalanobis_distances` that passed the outlier filter.
    pub kept: Vec<usize>,
    pub cv: f64,
    pub cv_basis: CvBasis,
    /// Of the kept distances.
    pub excess_kurtosis: f64,
    /// Of the kept distances.
    pub kde_curve: Kde,
    /// Mean rescaled score per domain over kept assessments.
    pub mean_scores: [f64; 5],
}

/// Stability and convergence of repeated assessments of one persona.
/// Distances are taken from the sample's own mean under its regularized
/// covariance; the chi-square filter is applied once.
pub fn stability_report(
    persona_id: &str,
    scores: &[[f64; 5]],
    basis: CvBasis,
) -> Result<StabilityReport, AnalyticsError> {
    let rows: Vec<Vec<f64>> = scores.iter().map(|s| s.to_vec()).collect();
    let x = stats::to_matrix(&rows)?;
    let distances = stats::self_distances(&x)?;
    let kept = stats::filter_outliers(&distances, 5)?;
    let kept_d: Vec<f64> = kept.iter().map(|&i| distances[i]).collect();
    let cv = match basis {
        CvBasis::Distances => stats::coefficient_of_variation(&kept_d)?,
        CvBasis::TraitScores => {
            let mut total = 0.0;
            for d in 0..5 {
                let col: Vec<f64> = kept.iter().map(|&i| scores[i][d]).collect();
                total += stats::coefficient_of_variation(&col)?;
            }
            total / 5.0
        }
    };
    let mut mean_scores = [0.0; 5];
    for (d, m) in mean_scores.iter_mut().enumerate() {
        *m = kept.iter().map(|&i| scores[i][d]).sum::<f64>() / kept.len() as f64;
    }
    Ok(StabilityReport {
        persona_id: persona_id.to_string(),
        n_raw: scores.len(),
        n_kept: kept.len(),
        excess_kurtosis: stats::excess_kurtosis(&kept_d)?,
        kde_curve: stats::kde(&kept_d)?,
        mahalanobis_distances: distances,
        kept,
        cv,
        cv_basis: basis,
        mean_scores,
    })
}

/// Feature space used for clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSpace {
    /// Rescaled trait scores as they are.
    Raw,
    /// Per-dimension z-scores over the combined sample.
    #[default]
    Standardized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub persona_ids: Vec<String>,
    pub space: ClusterSpace,
    pub ari: f64,
    /// Present for pairwise (k = 2) reports.
    pub centroid_distance: Option<f64>,
    pub pca_explained: Vec<f64>,
    pub true_labels: Vec<usize>,
    pub cluster_assignments: Vec<usize>,
    pub degenerate: bool,
}

/// Clusters the pooled assessments of several personas with k equal to the
/// number of personas and compares clusters to persona labels.
pub fn identifiability_report(
    groups: &[(String, Vec<[f64; 5]>)],
    space: ClusterSpace,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<IdentifiabilityReport, AnalyticsError> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (g, (_, rows)) in groups.iter().enumerate() {
        for r in rows {
            points.push(r.to_vec());
            labels.push(g);
        }
    }
    let points = match space {
        ClusterSpace::Raw => points,
        ClusterSpace::Standardized => standardize(&points)?.points,
    };
    let k = groups.len();
    let km = kmeans(&points, k, seed, opts)?;
    let ari = adjusted_rand_index(&labels, &km.assignments)?;
    let acd = if k == 2 { Some(centroid_distance(&km.centroids)?) } else { None };
    let pca = stats::pca_explained(&stats::to_matrix(&points)?)?;
    Ok(IdentifiabilityReport {
        persona_ids: groups.iter().map(|(id, _)| id.clone()).collect(),
        space,
        ari,
        centroid_distance: acd,
        pca_explained: pca,
        true_labels: labels,
        cluster_assignments: km.assignments,
        degenerate: km.degenerate,
    })
}

/// Ring of adjacent pairs `(0,1), (1,2), ..., (n-1,0)`.
pub fn ring_pairs(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitDensityPair {
    pub domain: Domain,
    pub grid: Vec<f64>,
    pub density_a: Vec<f64>,
    pub density_b: Vec<f64>,
    /// A group had zero variance in this domain; densities are empty.
    pub degenerate: bool,
}

/// Per-domain score densities of two groups on a shared grid.
pub fn euclidean_density_per_trait(
    group_a: &[[f64; 5]],
    group_b: &[[f64; 5]],
) -> Vec<TraitDensityPair> {
    Domain::ALL
        .iter()
        .map(|&d| {
            let a: Vec<f64> = group_a.iter().map(|s| s[d.index()]).collect();
            let b: Vec<f64> = group_b.iter().map(|s| s[d.index()]).collect();
            match (stats::silverman_bandwidth(&a), stats::silverman_bandwidth(&b)) {
                (Ok(ha), Ok(hb)) => {
                    let h = ha.max(hb);
                    let all = a.iter().chain(&b);
                    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
                    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
                    let grid = stats::linspace(lo, hi, KDE_GRID_POINTS);
                    TraitDensityPair {
                        domain: d,
                        density_a: stats::kde_on_grid(&a, ha, &grid),
                        density_b: stats::kde_on_grid(&b, hb, &grid),
                        grid,
                        degenerate: false,
                    }
                }
                _ => TraitDensityPair {
                    domain: d,
                    grid: Vec::new(),
                    density_a: Vec::new(),
                    density_b: Vec::new(),
                    degenerate: true,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub outcomes: Vec<AssessmentOutcome>,
    pub failures: Vec<AssessmentFailure>,
    /// `None` when too few assessments succeeded to compute it.
    pub report: Option<StabilityReport>,
}

impl BaselineRun {
    pub fn successes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn records(&self) -> Vec<&AssessmentRecord> {
        self.outcomes.iter().map(|o| &o.record).collect()
    }
}

/// `n` assessments with no persona, giving the model's own trait
/// distribution.
pub fn llm_baseline_run(
    assessor: &Assessor<'_>,
    n: usize,
    run_id: &str,
    seed: u64,
    timestamp: &str,
) -> Result<BaselineRun, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::ZeroRepeats);
    }
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..n {
        let spec = AssessmentSpec {
            assessment_id: format!("{run_id}:baseline:{rep}"),
            run_id: run_id.to_string(),
            replicate: rep as u32,
            antialign: false,
            seed: derive_seed(&[seed, rep as u64]),
            timestamp: timestamp.to_string(),
        };
        match assessor.run(Respondent::Unconditioned, &spec) {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    let scores: Vec<[f64; 5]> = outcomes.iter().map(|o| o.record.rescaled()).collect();
    let report = stability_report("baseline", &scores, CvBasis::Distances).ok();
    Ok(BaselineRun { outcomes, failures, report })
}
