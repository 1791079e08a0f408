//! Single-file SQLite persistence for skeletons, personas, answers and scores.
//!
//! One [`Store`] handle writes; any number of other handles on the same file
//! may read. The logical schema lives in `data/schema.sql`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{ffi, params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::{AssessmentFailure, AssessmentOutcome};
use crate::domain::{
    AnswerSheet, AssessmentRecord, DetailLevel, FacetScores, Gender, ItemResponse, PersonaProfile,
    PersonaSkeleton, Scale, Source, Strategy, TraitVector, SHEET_COUNT,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_SQL: &str = include_str!("../data/schema.sql");

/// Tables in dependency order with their primary-key columns.
pub const TABLES: [(&str, &str); 9] = [
    ("meta", "key"),
    ("runs", "run_id"),
    ("skeleton", "id"),
    ("persona", "id"),
    ("assessment_plan", "assessment_id"),
    ("sheet_answer", "assessment_id, sheet_index"),
    ("question_answer", "assessment_id, item_id"),
    ("personality", "assessment_id"),
    ("assessment_failure", "failure_id"),
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open store at {path}: {reason}")]
    Unwritable { path: String, reason: String },
    #[error("store has schema version {found}, this build needs {expected}; migrate the file first")]
    MigrationRequired { found: String, expected: u32 },
    #[error("duplicate key: {0}")]
    Duplicate(String),
    #[error("foreign key violation: {0}")]
    ForeignKey(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("corrupt row: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Sqlite(rusqlite::Error),
    #[error("export failed: {0}")]
    Export(String),
}

impl From<rusqlite::Error> for StoreError {
    fn from(e: rusqlite::Error) -> Self {
        if let rusqlite::Error::SqliteFailure(f, msg) = &e {
            let msg = msg.clone().unwrap_or_default();
            match f.extended_code {
                ffi::SQLITE_CONSTRAINT_PRIMARYKEY | ffi::SQLITE_CONSTRAINT_UNIQUE => {
                    return StoreError::Duplicate(msg)
                }
                ffi::SQLITE_CONSTRAINT_FOREIGNKEY => return StoreError::ForeignKey(msg),
                _ if f.code == ffi::ErrorCode::ConstraintViolation => return StoreError::Constraint(msg),
                _ => {}
            }
        }
        StoreError::Sqlite(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    InProgress,
    Complete,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::InProgress => "in_progress",
            RunStatus::Complete => "complete",
            RunStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<RunStatus> {
        match s {
            "in_progress" => Some(RunStatus::InProgress),
            "complete" => Some(RunStatus::Complete),
            "failed" => Some(RunStatus::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    /// Pipeline stage that produced the run: sample, forge, ingest, assess, baseline.
    pub kind: String,
    pub strategy: Option<Strategy>,
    pub seed: u64,
    /// Parameters the run was started with; fixed once written.
    pub config: serde_json::Value,
    pub created_at: String,
    pub status: RunStatus,
}

/// One unit of assessment work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedAssessment {
    pub assessment_id: String,
    pub persona_id: Option<String>,
    pub replicate: u32,
    pub seed: u64,
    pub antialign: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingAssessment {
    pub plan: PlannedAssessment,
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSheet {
    pub sheet: AnswerSheet,
    pub raw_text: String,
    pub attempts: u32,
    pub provider: String,
    pub latency_ms: u64,
}

pub struct Store {
    conn: Connection,
}

fn opt_str(v: &Option<String>) -> Option<&str> {
    v.as_deref()
}

fn corrupt(what: &str, value: &str) -> StoreError {
    StoreError::Corrupt(format!("{what} = {value:?}"))
}

impl Store {
    /// Opens or creates the store at `path`.
    pub fn open(path: &Path) -> Result<Store, StoreError> {
        let conn = Connection::open(path).map_err(|e| StoreError::Unwritable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::init(conn, &path.display().to_string())
    }

    pub fn open_in_memory() -> Result<Store, StoreError> {
        Self::init(Connection::open_in_memory()?, ":memory:")
    }

    fn init(conn: Connection, path: &str) -> Result<Store, StoreError> {
        let unwritable = |e: rusqlite::Error| StoreError::Unwritable { path: path.to_string(), reason: e.to_string() };
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.busy_timeout(std::time::Duration::from_secs(10))?;
        let has_meta: bool = conn
            .query_row("SELECT COUNT(*) FROM sqlite_master WHERE type = 'table' AND name = 'meta'", [], |r| {
                r.get::<_, i64>(0)
            })
            .map_err(unwritable)?
            > 0;
        if has_meta {
            let found: Option<String> = conn
                .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
                .optional()?;
            match found {
                Some(v) if v == SCHEMA_VERSION.to_string() => {}
                other => {
                    return Err(StoreError::MigrationRequired {
                        found: other.unwrap_or_else(|| "none".into()),
                        expected: SCHEMA_VERSION,
                    })
                }
            }
        } else {
            let tables: i64 =
                conn.query_row("SELECT COUNT(*) FROM sqlite_master WHERE type = 'table'", [], |r| r.get(0))?;
            if tables > 0 {
                return Err(StoreError::MigrationRequired { found: "none".into(), expected: SCHEMA_VERSION });
            }
            let _ = conn.query_row("PRAGMA journal_mode = WAL", [], |_| Ok(()));
            conn.execute_batch(&format!(
                "BEGIN;\n{SCHEMA_SQL}\nINSERT INTO meta(key, value) VALUES ('schema_version', '{SCHEMA_VERSION}');\nCOMMIT;"
            ))
            .map_err(unwritable)?;
        }
        Ok(Store { conn })
    }

    pub fn schema_version(&self) -> Result<String, StoreError> {
        Ok(self.conn.query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))?)
    }

    // runs

    pub fn create_run(&self, m: &RunManifest) -> Result<(), StoreError> {
        self.conn.execute(
            "INSERT INTO runs(run_id, kind, strategy, seed, config, created_at, status) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            params![
                m.run_id,
                m.kind,
                m.strategy.map(Strategy::as_str),
                m.seed as i64,
                m.config.to_string(),
                m.created_at,
                m.status.as_str()
            ],
        )?;
        Ok(())
    }

    pub fn set_run_status(&self, run_id: &str, status: RunStatus) -> Result<(), StoreError> {
        let n = self.conn.execute("UPDATE runs SET status = ?2 WHERE run_id = ?1", params![run_id, status.as_str()])?;
        if n == 0 {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        Ok(())
    }

    /// Hides a run from listings. Rows stay in place.
    pub fn soft_delete_run(&self, run_id: &str) -> Result<(), StoreError> {
        let n = self.conn.execute("UPDATE runs SET deleted = 1 WHERE run_id = ?1", params![run_id])?;
        if n == 0 {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        Ok(())
    }

    pub fn run(&self, run_id: &str) -> Result<Option<RunManifest>, StoreError> {
        self.conn
            .query_row(
                "SELECT run_id, kind, strategy, seed, config, created_at, status FROM runs WHERE run_id = ?1 AND deleted = 0",
                params![run_id],
                |r| Ok(run_from_row(r)),
            )
            .optional()?
            .transpose()
    }

    pub fn require_run(&self, run_id: &str) -> Result<RunManifest, StoreError> {
        self.run(run_id)?.ok_or_else(|| StoreError::UnknownRun(run_id.to_string()))
    }

    pub fn runs(&self) -> Result<Vec<RunManifest>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT run_id, kind, strategy, seed, config, created_at, status FROM runs WHERE deleted = 0 ORDER BY run_id",
        )?;
        let rows = stmt.query_map([], |r| Ok(run_from_row(r)))?;
        rows.map(|r| r.map_err(StoreError::from).and_then(|x| x)).collect()
    }

    // skeletons

    pub fn put_skeletons(&mut self, run_id: &str, skeletons: &[PersonaSkeleton]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO skeleton(id, run_id, age, gender, race, education, marital_status, occupation,
                 relationship, workclass, country, income_bracket, capital_gain, capital_loss, hours_per_week)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14, ?15)",
            )?;
            for s in skeletons {
                stmt.execute(params![
                    s.id,
                    run_id,
                    s.age,
                    s.gender.as_str(),
                    opt_str(&s.race),
                    opt_str(&s.education),
                    opt_str(&s.marital_status),
                    opt_str(&s.occupation),
                    opt_str(&s.relationship),
                    opt_str(&s.workclass),
                    opt_str(&s.country),
                    opt_str(&s.income_bracket),
                    s.capital_gain,
                    s.capital_loss,
                    s.hours_per_week
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn skeleton(&self, id: &str) -> Result<Option<PersonaSkeleton>, StoreError> {
        self.conn
            .query_row(&format!("{SKELETON_SELECT} WHERE id = ?1 AND deleted = 0"), params![id], |r| {
                Ok(skeleton_from_row(r))
            })
            .optional()?
            .transpose()
    }

    pub fn skeletons(&self, run_id: &str) -> Result<Vec<PersonaSkeleton>, StoreError> {
        let mut stmt = self.conn.prepare(&format!("{SKELETON_SELECT} WHERE run_id = ?1 AND deleted = 0 ORDER BY id"))?;
        let rows = stmt.query_map(params![run_id], |r| Ok(skeleton_from_row(r)))?;
        rows.map(|r| r.map_err(StoreError::from).and_then(|x| x)).collect()
    }

    // personas

    pub fn put_personas(&mut self, run_id: &str, personas: &[PersonaProfile]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO persona(id, run_id, skeleton_id, derived_from, name, text, strategy, detail_level,
                 source, word_count, substandard, template_hash, age, gender)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14)",
            )?;
            for p in personas {
                stmt.execute(params![
                    p.id,
                    run_id,
                    opt_str(&p.skeleton_id),
                    opt_str(&p.derived_from),
                    opt_str(&p.name),
                    p.text,
                    p.strategy.as_str(),
                    p.detail_level.as_str(),
                    p.source.as_str(),
                    p.word_count as i64,
                    p.substandard,
                    opt_str(&p.template_hash),
                    p.age,
                    p.gender.map(Gender::as_str)
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    pub fn persona(&self, id: &str) -> Result<Option<PersonaProfile>, StoreError> {
        self.conn
            .query_row(&format!("{PERSONA_SELECT} WHERE id = ?1 AND deleted = 0"), params![id], |r| {
                Ok(persona_from_row(r))
            })
            .optional()?
            .transpose()
    }

    pub fn personas(&self, run_id: &str) -> Result<Vec<PersonaProfile>, StoreError> {
        let mut stmt = self.conn.prepare(&format!("{PERSONA_SELECT} WHERE run_id = ?1 AND deleted = 0 ORDER BY id"))?;
        let rows = stmt.query_map(params![run_id], |r| Ok(persona_from_row(r)))?;
        rows.map(|r| r.map_err(StoreError::from).and_then(|x| x)).collect()
    }

    // assessments

    /// Records the work list of an assessment run. Entries already present
    /// are left untouched, so planning is idempotent.
    pub fn plan_assessments(&mut self, run_id: &str, plan: &[PlannedAssessment]) -> Result<(), StoreError> {
        let tx = self.conn.transaction()?;
        {
            let mut stmt = tx.prepare(
                "INSERT INTO assessment_plan(assessment_id, run_id, persona_id, replicate, seed, antialign)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6) ON CONFLICT(assessment_id) DO NOTHING",
            )?;
            for p in plan {
                stmt.execute(params![
                    p.assessment_id,
                    run_id,
                    opt_str(&p.persona_id),
                    p.replicate,
                    p.seed as i64,
                    p.antialign
                ])?;
            }
        }
        tx.commit()?;
        Ok(())
    }

    /// Writes all six sheets, their items and the personality row in one
    /// transaction.
    pub fn put_assessment(&mut self, outcome: &AssessmentOutcome) -> Result<(), StoreError> {
        if outcome.sheets.len() != SHEET_COUNT {
            return Err(StoreError::Constraint(format!(
                "{}: {} sheets, expected {SHEET_COUNT}",
                outcome.record.assessment_id,
                outcome.sheets.len()
            )));
        }
        let tx = self.conn.transaction()?;
        {
            let mut sheet_stmt = tx.prepare(
                "INSERT INTO sheet_answer(assessment_id, sheet_index, persona_id, raw_text, attempts, provider, latency_ms)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
            )?;
            let mut item_stmt = tx.prepare(
                "INSERT INTO question_answer(assessment_id, item_id, sheet_index, choice, rationale)
                 VALUES (?1, ?2, ?3, ?4, ?5)",
            )?;
            for ex in &outcome.sheets {
                let s = &ex.sheet;
                sheet_stmt.execute(params![
                    s.assessment_id,
                    s.sheet_index as i64,
                    opt_str(&s.persona_id),
                    ex.raw_text,
                    ex.attempts,
                    ex.provider,
                    ex.latency_ms as i64
                ])?;
                for r in &s.responses {
                    item_stmt.execute(params![
                        s.assessment_id,
                        r.item_id,
                        s.sheet_index as i64,
                        r.choice,
                        opt_str(&r.rationale)
                    ])?;
                }
            }
            let rec = &outcome.record;
            let t = rec.traits.scores;
            tx.execute(
                "INSERT INTO personality(assessment_id, run_id, persona_id, replicate, neuroticism, extraversion,
                 openness, agreeableness, conscientiousness, facets, timestamp)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
                params![
                    rec.assessment_id,
                    rec.run_id,
                    opt_str(&rec.persona_id),
                    rec.replicate,
                    t[0],
                    t[1],
                    t[2],
                    t[3],
                    t[4],
                    facets_to_text(&rec.facets),
                    rec.timestamp
                ],
            )?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn put_failure(&self, f: &AssessmentFailure) -> Result<(), StoreError> {
        self.conn.execute(
            "INSERT INTO assessment_failure(assessment_id, sheet_index, reason, attempts) VALUES (?1, ?2, ?3, ?4)",
            params![f.assessment_id, f.sheet_index.map(|i| i as i64), f.reason, f.attempts],
        )?;
        Ok(())
    }

    pub fn failures(&self, run_id: &str) -> Result<Vec<AssessmentFailure>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT f.assessment_id, f.sheet_index, f.reason, f.attempts FROM assessment_failure f
             JOIN assessment_plan p ON p.assessment_id = f.assessment_id WHERE p.run_id = ?1 ORDER BY f.failure_id",
        )?;
        let rows = stmt.query_map(params![run_id], |r| {
            Ok(AssessmentFailure {
                assessment_id: r.get(0)?,
                sheet_index: r.get::<_, Option<i64>>(1)?.map(|i| i as usize),
                reason: r.get(2)?,
                attempts: r.get(3)?,
            })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn plan(&self, run_id: &str) -> Result<Vec<PlannedAssessment>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT assessment_id, persona_id, replicate, seed, antialign FROM assessment_plan
             WHERE run_id = ?1 ORDER BY assessment_id",
        )?;
        let rows = stmt.query_map(params![run_id], plan_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    /// Planned assessments of `run_id` without a personality row, with the
    /// number of recorded failures for each.
    pub fn resume(&self, run_id: &str) -> Result<Vec<PendingAssessment>, StoreError> {
        self.require_run(run_id)?;
        let mut stmt = self.conn.prepare(
            "SELECT p.assessment_id, p.persona_id, p.replicate, p.seed, p.antialign,
                    (SELECT COUNT(*) FROM assessment_failure f WHERE f.assessment_id = p.assessment_id)
             FROM assessment_plan p
             WHERE p.run_id = ?1
               AND NOT EXISTS (SELECT 1 FROM personality s WHERE s.assessment_id = p.assessment_id)
             ORDER BY p.assessment_id",
        )?;
        let rows = stmt.query_map(params![run_id], |r| {
            Ok(PendingAssessment { plan: plan_from_row(r)?, failures: r.get(5)? })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn personality(&self, run_id: &str) -> Result<Vec<AssessmentRecord>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT assessment_id, persona_id, run_id, replicate, neuroticism, extraversion, openness,
                    agreeableness, conscientiousness, facets, timestamp
             FROM personality WHERE run_id = ?1 ORDER BY assessment_id",
        )?;
        let rows = stmt.query_map(params![run_id], |r| {
            let facets: String = r.get(9)?;
            let scores = [r.get(4)?, r.get(5)?, r.get(6)?, r.get(7)?, r.get(8)?];
            Ok((
                AssessmentRecord {
                    assessment_id: r.get(0)?,
                    persona_id: r.get(1)?,
                    run_id: r.get(2)?,
                    replicate: r.get(3)?,
                    traits: TraitVector { scores, scale: Scale::Raw },
                    facets: FacetScores([0; 30]),
                    timestamp: r.get(10)?,
                },
                facets,
            ))
        })?;
        rows.map(|row| {
            let (mut rec, facets) = row?;
            rec.facets = facets_from_text(&facets)?;
            Ok(rec)
        })
        .collect()
    }

    /// Scored records of a run grouped by persona, replicate order.
    pub fn personality_by_persona(&self, run_id: &str) -> Result<BTreeMap<String, Vec<AssessmentRecord>>, StoreError> {
        let mut out: BTreeMap<String, Vec<AssessmentRecord>> = BTreeMap::new();
        for rec in self.personality(run_id)? {
            let key = rec.persona_id.clone().unwrap_or_else(|| "baseline".into());
            out.entry(key).or_default().push(rec);
        }
        for v in out.values_mut() {
            v.sort_by_key(|r| r.replicate);
        }
        Ok(out)
    }

    pub fn sheets(&self, assessment_id: &str) -> Result<Vec<StoredSheet>, StoreError> {
        let mut stmt = self.conn.prepare(
            "SELECT sheet_index, persona_id, raw_text, attempts, provider, latency_ms FROM sheet_answer
             WHERE assessment_id = ?1 ORDER BY sheet_index",
        )?;
        let heads = stmt
            .query_map(params![assessment_id], |r| {
                Ok((
                    r.get::<_, i64>(0)? as usize,
                    r.get::<_, Option<String>>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, u32>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, i64>(5)? as u64,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        let mut items = self.conn.prepare(
            "SELECT item_id, choice, rationale FROM question_answer
             WHERE assessment_id = ?1 AND sheet_index = ?2 ORDER BY item_id",
        )?;
        let mut out = Vec::new();
        for (index, persona_id, raw_text, attempts, provider, latency_ms) in heads {
            let responses = items
                .query_map(params![assessment_id, index as i64], |r| {
                    Ok(ItemResponse { item_id: r.get(0)?, choice: r.get(1)?, rationale: r.get(2)? })
                })?
                .collect::<Result<Vec<_>, _>>()?;
            let sheet = AnswerSheet::new(assessment_id.to_string(), persona_id, index, responses)
                .map_err(|e| StoreError::Corrupt(format!("{assessment_id} sheet {index}: {e}")))?;
            out.push(StoredSheet { sheet, raw_text, attempts, provider, latency_ms });
        }
        Ok(out)
    }

    // export

    /// Rows of a table as JSON objects, ordered by primary key.
    pub fn export_json(&self, table: &str) -> Result<Vec<serde_json::Map<String, serde_json::Value>>, StoreError> {
        let pk = primary_key(table)?;
        let mut stmt = self.conn.prepare(&format!("SELECT * FROM {table} ORDER BY {pk}"))?;
        let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let mut rows = stmt.query([])?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            let mut obj = serde_json::Map::new();
            for (i, name) in names.iter().enumerate() {
                let v = match row.get_ref(i)? {
                    ValueRef::Null => serde_json::Value::Null,
                    ValueRef::Integer(v) => v.into(),
                    ValueRef::Real(v) => v.into(),
                    ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned().into(),
                    ValueRef::Blob(b) => hex::encode(b).into(),
                };
                obj.insert(name.clone(), v);
            }
            out.push(obj);
        }
        Ok(out)
    }

    /// Writes a table as CSV with a header row, ordered by primary key.
    pub fn export_csv(&self, table: &str, out: &mut dyn Write) -> Result<usize, StoreError> {
        let pk = primary_key(table)?;
        let mut stmt = self.conn.prepare(&format!("SELECT * FROM {table} ORDER BY {pk}"))?;
        let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let mut w = csv::Writer::from_writer(out);
        let export = |e: csv::Error| StoreError::Export(e.to_string());
        w.write_record(&names).map_err(export)?;
        let mut rows = stmt.query([])?;
        let mut n = 0;
        while let Some(row) = rows.next()? {
            let mut rec = Vec::with_capacity(names.len());
            for i in 0..names.len() {
                rec.push(match row.get_ref(i)? {
                    ValueRef::Null => String::new(),
                    ValueRef::Integer(v) => v.to_string(),
                    ValueRef::Real(v) => v.to_string(),
                    ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned(),
                    ValueRef::Blob(b) => hex::encode(b),
                });
            }
            w.write_record(&rec).map_err(export)?;
            n += 1;
        }
        w.flush().map_err(|e| StoreError::Export(e.to_string()))?;
        Ok(n)
    }
}

fn primary_key(table: &str) -> Result<&'static str, StoreError> {
    TABLES
        .iter()
        .find(|(t, _)| *t == table)
        .map(|(_, pk)| *pk)
        .ok_or_else(|| StoreError::UnknownTable(table.to_string()))
}

const SKELETON_SELECT: &str = "SELECT id, age, gender, race, education, marital_status, occupation, relationship,
    workclass, country, income_bracket, capital_gain, capital_loss, hours_per_week FROM skeleton";

const PERSONA_SELECT: &str = "SELECT id, skeleton_id, derived_from, name, text, strategy, detail_level, source,
    word_count, substandard, template_hash, age, gender FROM persona";

fn run_from_row(r: &Row<'_>) -> Result<RunManifest, StoreError> {
    let strategy: Option<String> = r.get(2)?;
    let config: String = r.get(4)?;
    let status: String = r.get(6)?;
    Ok(RunManifest {
        run_id: r.get(0)?,
        kind: r.get(1)?,
        strategy: match strategy {
            Some(s) => Some(Strategy::parse(&s).ok_or_else(|| corrupt("strategy", &s))?),
            None => None,
        },
        seed: r.get::<_, i64>(3)? as u64,
        config: serde_json::from_str(&config).map_err(|_| corrupt("config", &config))?,
        created_at: r.get(5)?,
        status: RunStatus::parse(&status).ok_or_else(|| corrupt("status", &status))?,
    })
}

fn skeleton_from_row(r: &Row<'_>) -> Result<PersonaSkeleton, StoreError> {
    let gender: String = r.get(2)?;
    Ok(PersonaSkeleton {
        id: r.get(0)?,
        age: r.get(1)?,
        gender: Gender::parse(&gender).ok_or_else(|| corrupt("gender", &gender))?,
        race: r.get(3)?,
        education: r.get(4)?,
        marital_status: r.get(5)?,
        occupation: r.get(6)?,
        relationship: r.get(7)?,
        workclass: r.get(8)?,
        country: r.get(9)?,
        income_bracket: r.get(10)?,
        capital_gain: r.get(11)?,
        capital_loss: r.get(12)?,
        hours_per_week: r.get(13)?,
    })
}

fn persona_from_row(r: &Row<'_>) -> Result<PersonaProfile, StoreError> {
    let strategy: String = r.get(5)?;
    let detail: String = r.get(6)?;
    let source: String = r.get(7)?;
    let gender: Option<String> = r.get(12)?;
    Ok(PersonaProfile {
        id: r.get(0)?,
        skeleton_id: r.get(1)?,
        derived_from: r.get(2)?,
        name: r.get(3)?,
        text: r.get(4)?,
        strategy: Strategy::parse(&strategy).ok_or_else(|| corrupt("strategy", &strategy))?,
        detail_level: DetailLevel::parse(&detail).ok_or_else(|| corrupt("detail_level", &detail))?,
        source: Source::parse(&source).ok_or_else(|| corrupt("source", &source))?,
        word_count: r.get::<_, i64>(8)? as usize,
        substandard: r.get(9)?,
        template_hash: r.get(10)?,
        age: r.get(11)?,
        gender: match gender {
            Some(g) => Some(Gender::parse(&g).ok_or_else(|| corrupt("gender", &g))?),
            None => None,
        },
    })
}

fn plan_from_row(r: &Row<'_>) -> rusqlite::Result<PlannedAssessment> {
    Ok(PlannedAssessment {
        assessment_id: r.get(0)?,
        persona_id: r.get(1)?,
        replicate: r.get(2)?,
        seed: r.get::<_, i64>(3)? as u64,
        antialign: r.get(4)?,
    })
}

fn facets_to_text(f: &FacetScores) -> String {
    f.0.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
}

fn facets_from_text(s: &str) -> Result<FacetScores, StoreError> {
    let v: Vec<u8> = s.split(',').map(|x| x.parse().map_err(|_| corrupt("facets", s))).collect::<Result<_, _>>()?;
    let arr: [u8; 30] = v.try_into().map_err(|_| corrupt("facets", s))?;
    Ok(FacetScores(arr))
}
