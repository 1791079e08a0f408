//! Run orchestration: worker threads do provider work, the calling thread is
//! the only store writer.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{AssessmentSpec, Assessor, Respondent};
use crate::domain::{PersonaProfile, PersonaSkeleton, Strategy};
use crate::forge::{simplify_to_poor, Forge, ForgeError, PoorFields};
use crate::seeds::{derive_seed, text_seed};
use crate::store::{PendingAssessment, PlannedAssessment, RunStatus, Store, StoreError};

/// Timestamp used for every record when running against the mock provider.
pub const FROZEN_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clock {
    Frozen(String),
    System,
}

impl Clock {
    pub fn frozen() -> Clock {
        Clock::Frozen(FROZEN_TIMESTAMP.to_string())
    }

    pub fn now(&self) -> String {
        match self {
            Clock::Frozen(t) => t.clone(),
            Clock::System => humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no data for run {0}")]
    NoData(String),
    #[error("run {run} is a {found} run, expected {expected}")]
    WrongKind { run: String, found: String, expected: String },
    #[error("persona {0} referenced by the plan is missing")]
    MissingPersona(String),
    #[error("{failed} of {total} items failed; first: {first}")]
    Provider { failed: usize, total: usize, first: String },
}

/// Counts from one execution pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub attempted: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Work left undone because of an interrupt.
    pub skipped: usize,
    pub interrupted: bool,
}

/// Maps `work` over `items` on `workers` threads and hands each result to
/// `sink` on the calling thread, in completion order. Once `stop` is set no
/// new item is started; results already in flight are still delivered.
pub fn run_parallel<T, R, E>(
    items: &[T],
    workers: usize,
    stop: &AtomicBool,
    work: impl Fn(&T) -> R + Sync,
    mut sink: impl FnMut(R) -> Result<(), E>,
) -> Result<usize, E>
where
    T: Sync,
    R: Send,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<R>();
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(items.len().max(1)) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                if tx.send(work(item)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut delivered = 0;
        let mut first_err = None;
        for r in rx {
            if first_err.is_some() {
                continue;
            }
            match sink(r) {
                Ok(()) => delivered += 1,
                Err(e) => {
                    stop.store(true, Ordering::SeqCst);
                    first_err = Some(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(delivered),
        }
    })
}

/// Deterministic assessment id.
pub fn assessment_id(run_id: &str, persona_id: Option<&str>, replicate: u32) -> String {
    format!("{run_id}:{}:{replicate:04}", persona_id.unwrap_or("baseline"))
}

/// Deterministic assessment seed; independent of scheduling order.
pub fn assessment_seed(run_seed: u64, persona_id: Option<&str>, replicate: u32) -> u64 {
    derive_seed(&[run_seed, text_seed(persona_id.unwrap_or("")), replicate as u64])
}

/// `repeat` assessments per persona, or `repeat` unconditioned assessments
/// when `personas` is `None`.
pub fn plan(
    run_id: &str,
    run_seed: u64,
    personas: Option<&[PersonaProfile]>,
    repeat: u32,
    antialign: bool,
) -> Vec<PlannedAssessment> {
    let ids: Vec<Option<&str>> = match personas {
        Some(ps) => ps.iter().map(|p| Some(p.id.as_str())).collect(),
        None => vec![None],
    };
    ids.into_iter()
        .flat_map(|pid| {
            (0..repeat).map(move |rep| PlannedAssessment {
                assessment_id: assessment_id(run_id, pid, rep),
                persona_id: pid.map(str::to_string),
                replicate: rep,
                seed: assessment_seed(run_seed, pid, rep),
                antialign,
            })
        })
        .collect()
}

/// Runs every pending assessment of `run_id` and stores the results. Work
/// already scored is never repeated.
pub fn execute_assessments(
    store: &mut Store,
    run_id: &str,
    assessor: &Assessor<'_>,
    workers: usize,
    clock: &Clock,
    stop: &AtomicBool,
) -> Result<RunSummary, PipelineError> {
    let pending: Vec<PendingAssessment> = store.resume(run_id)?;
    let mut personas: BTreeMap<String, PersonaProfile> = BTreeMap::new();
    for p in &pending {
        if let Some(id) = &p.plan.persona_id {
            if !personas.contains_key(id) {
                let profile = store.persona(id)?.ok_or_else(|| PipelineError::MissingPersona(id.clone()))?;
                personas.insert(id.clone(), profile);
            }
        }
    }
    let mut summary = RunSummary { attempted: 0, ..Default::default() };
    let total = pending.len();
    run_parallel(
        &pending,
        workers,
        stop,
        |p| {
            let spec = AssessmentSpec {
                assessment_id: p.plan.assessment_id.clone(),
                run_id: run_id.to_string(),
                replicate: p.plan.replicate,
                antialign: p.plan.antialign,
                seed: p.plan.seed,
                timestamp: clock.now(),
            };
            let respondent = match &p.plan.persona_id {
                Some(id) => Respondent::Persona(&personas[id]),
                None => Respondent::Unconditioned,
            };
            assessor.run(respondent, &spec)
        },
        |result| {
            summary.attempted += 1;
            match result {
                Ok(outcome) => {
                    store.put_assessment(&outcome)?;
                    summary.succeeded += 1;
                }
                Err(failure) => {
                    log::warn!("{}: {}", failure.assessment_id, failure.reason);
                    store.put_failure(&failure)?;
                    summary.failed += 1;
                }
            }
            Ok::<(), StoreError>(())
        },
    )?;
    summary.skipped = total - summary.attempted;
    summary.interrupted = summary.skipped > 0;
    let status = if summary.interrupted || summary.failed > 0 {
        RunStatus::InProgress
    } else {
        RunStatus::Complete
    };
    store.set_run_status(run_id, status)?;
    Ok(summary)
}

/// Persona id for a profile produced in `run_id` from `origin`.
pub fn persona_id(run_id: &str, origin: &str) -> String {
    format!("{run_id}.{origin}")
}

/// Enriches every skeleton of `skeleton_run` into `run_id`, skipping
/// skeletons already forged in that run.
#[allow(clippy::too_many_arguments)]
pub fn forge_personas(
    store: &mut Store,
    run_id: &str,
    skeleton_run: &str,
    forge: &Forge<'_>,
    strategy: Strategy,
    workers: usize,
    stop: &AtomicBool,
) -> Result<RunSummary, PipelineError> {
    let skeletons = store.skeletons(skeleton_run)?;
    if skeletons.is_empty() {
        return Err(PipelineError::NoData(skeleton_run.to_string()));
    }
    let done: BTreeSet<String> = store.personas(run_id)?.into_iter().filter_map(|p| p.skeleton_id).collect();
    let todo: Vec<PersonaSkeleton> = skeletons.into_iter().filter(|s| !done.contains(&s.id)).collect();
    let mut summary = RunSummary::default();
    let mut first_error = None;
    run_parallel(
        &todo,
        workers,
        stop,
        |skel| {
            let id = persona_id(run_id, &skel.id);
            match strategy {
                Strategy::Narrative => forge.enrich_narrative(&id, skel),
                _ => forge.enrich_standard(&id, skel).map(|mut p| {
                    p.strategy = strategy;
                    p
                }),
            }
        },
        |result: Result<PersonaProfile, ForgeError>| {
            summary.attempted += 1;
            match result {
                Ok(p) => {
                    store.put_personas(run_id, std::slice::from_ref(&p))?;
                    summary.succeeded += 1;
                }
                Err(e) => {
                    log::warn!("{e}");
                    first_error.get_or_insert_with(|| e.to_string());
                    summary.failed += 1;
                }
            }
            Ok::<(), StoreError>(())
        },
    )?;
    summary.skipped = todo.len() - summary.attempted;
    summary.interrupted = summary.skipped > 0;
    finish(store, run_id, summary, first_error)
}

/// Poor-detail variants of every persona in `source_run`.
pub fn derive_poor(
    store: &mut Store,
    run_id: &str,
    source_run: &str,
    fields: PoorFields,
) -> Result<RunSummary, PipelineError> {
    let sources = store.personas(source_run)?;
    if sources.is_empty() {
        return Err(PipelineError::NoData(source_run.to_string()));
    }
    let done: BTreeSet<String> = store.personas(run_id)?.into_iter().filter_map(|p| p.derived_from).collect();
    let mut out = Vec::new();
    for src in sources.iter().filter(|s| !done.contains(&s.id)) {
        let skel = match &src.skeleton_id {
            Some(id) => store.skeleton(id)?,
            None => None,
        };
        let mut p = simplify_to_poor(src, skel.as_ref(), &fields);
        p.id = persona_id(run_id, &src.id);
        p.derived_from = Some(src.id.clone());
        out.push(p);
    }
    let n = out.len();
    store.put_personas(run_id, &out)?;
    store.set_run_status(run_id, RunStatus::Complete)?;
    Ok(RunSummary { attempted: n, succeeded: n, ..Default::default() })
}

fn finish(
    store: &Store,
    run_id: &str,
    summary: RunSummary,
    first_error: Option<String>,
) -> Result<RunSummary, PipelineError> {
    let status = if summary.interrupted || summary.failed > 0 { RunStatus::InProgress } else { RunStatus::Complete };
    store.set_run_status(run_id, status)?;
    match first_error {
        Some(first) => Err(PipelineError::Provider { failed: summary.failed, total: summary.attempted, first }),
        None => Ok(summary),
    }
}
