use std::sync::Arc;

use personasim::assessment::{AssessmentFailure, AssessmentOutcome, AssessmentSpec, Assessor, Respondent};
use personasim::domain::{word_count, DetailLevel, Gender, ItemBank, PersonaProfile, PersonaSkeleton, Source, Strategy};
use personasim::gateway::{Gateway, GatewayConfig, MockConfig, MockProvider};
use personasim::pipeline;
use personasim::store::{PlannedAssessment, RunManifest, RunStatus, Store, StoreError};
use personasim::templates::TemplateSet;

fn manifest(id: &str, kind: &str) -> RunManifest {
    RunManifest {
        run_id: id.into(),
        kind: kind.into(),
        strategy: Some(Strategy::Standard),
        seed: u64::MAX - 3,
        config: serde_json::json!({"n": 3, "note": "x"}),
        created_at: "1970-01-01T00:00:00Z".into(),
        status: RunStatus::InProgress,
    }
}

fn skeleton(id: &str) -> PersonaSkeleton {
    PersonaSkeleton {
        id: id.into(),
        age: 39,
        gender: Gender::Male,
        race: Some("White".into()),
        education: Some("Bachelors".into()),
        marital_status: Some("Never-married".into()),
        occupation: Some("Adm-clerical".into()),
        relationship: Some("Not-in-family".into()),
        workclass: Some("State-gov".into()),
        country: Some("United-States".into()),
        income_bracket: Some("<=50K".into()),
        capital_gain: 2174,
        capital_loss: 0,
        hours_per_week: Some(40),
    }
}

fn persona(id: &str, skeleton_id: Option<&str>, text: &str) -> PersonaProfile {
    PersonaProfile {
        id: id.into(),
        skeleton_id: skeleton_id.map(str::to_string),
        derived_from: None,
        name: None,
        text: text.into(),
        strategy: if skeleton_id.is_some() { Strategy::Standard } else { Strategy::Literary },
        detail_level: DetailLevel::Standard,
        source: if skeleton_id.is_some() { Source::Synthesized } else { Source::External },
        word_count: word_count(text),
        substandard: false,
        template_hash: None,
        age: Some(39),
        gender: Some(Gender::Male),
    }
}

fn one_outcome(p: &PersonaProfile) -> AssessmentOutcome {
    let bank = ItemBank::bundled();
    let templates = TemplateSet::bundled();
    let gw = Gateway::new(Arc::new(MockProvider::new(MockConfig::default(), bank.clone())), GatewayConfig::default());
    let assessor = Assessor::new(&gw, &bank, &templates);
    let spec = AssessmentSpec {
        assessment_id: "template".into(),
        run_id: "assess".into(),
        replicate: 0,
        antialign: false,
        seed: 5,
        timestamp: "1970-01-01T00:00:00Z".into(),
    };
    assessor.run(Respondent::Persona(p), &spec).unwrap()
}

fn retarget(o: &AssessmentOutcome, plan: &PlannedAssessment) -> AssessmentOutcome {
    let mut o = o.clone();
    o.record.assessment_id = plan.assessment_id.clone();
    o.record.persona_id = plan.persona_id.clone();
    o.record.replicate = plan.replicate;
    for s in &mut o.sheets {
        s.sheet.assessment_id = plan.assessment_id.clone();
        s.sheet.persona_id = plan.persona_id.clone();
    }
    o
}

fn seeded_store() -> (Store, PersonaProfile) {
    let mut st = Store::open_in_memory().unwrap();
    st.create_run(&manifest("sample", "sample")).unwrap();
    st.create_run(&manifest("forge", "forge")).unwrap();
    st.create_run(&manifest("assess", "assess")).unwrap();
    st.put_skeletons("sample", &[skeleton("sk00001")]).unwrap();
    let p = persona("forge.sk00001", Some("sk00001"), "Age: 39\nGender: Male\n\nA clerk.");
    st.put_personas("forge", std::slice::from_ref(&p)).unwrap();
    (st, p)
}

#[test]
fn fresh_and_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.db");
    {
        let mut st = Store::open(&path).unwrap();
        assert_eq!(st.schema_version().unwrap(), "1");
        st.create_run(&manifest("r1", "sample")).unwrap();
        st.put_skeletons("r1", &[skeleton("sk00001"), skeleton("sk00002")]).unwrap();
    }
    let st = Store::open(&path).unwrap();
    assert_eq!(st.require_run("r1").unwrap(), manifest("r1", "sample"));
    assert_eq!(st.skeletons("r1").unwrap(), vec![skeleton("sk00001"), skeleton("sk00002")]);
    assert_eq!(st.skeleton("sk00002").unwrap(), Some(skeleton("sk00002")));
}

#[test]
fn newer_schema_needs_migration() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.db");
    drop(Store::open(&path).unwrap());
    let c = rusqlite::Connection::open(&path).unwrap();
    c.execute("UPDATE meta SET value = '2' WHERE key = 'schema_version'", []).unwrap();
    drop(c);
    match Store::open(&path) {
        Err(StoreError::MigrationRequired { found, expected }) => assert_eq!((found.as_str(), expected), ("2", 1)),
        other => panic!("{:?}", other.err()),
    }

    let foreign = dir.path().join("other.db");
    let c = rusqlite::Connection::open(&foreign).unwrap();
    c.execute("CREATE TABLE t(x)", []).unwrap();
    drop(c);
    assert!(matches!(Store::open(&foreign), Err(StoreError::MigrationRequired { .. })));
}

#[test]
fn unwritable_path() {
    let r = Store::open(std::path::Path::new("/nonexistent-dir/sub/s.db"));
    assert!(matches!(r, Err(StoreError::Unwritable { .. })));
}

#[test]
fn foreign_keys_and_duplicates() {
    let (mut st, _) = seeded_store();
    let orphan = persona("forge.x", Some("sk99999"), "text");
    assert!(matches!(st.put_personas("forge", &[orphan]), Err(StoreError::ForeignKey(_))));
    let literary = persona("lit.lit00001", None, "A sailor of the northern seas.");
    st.put_personas("forge", &[literary.clone()]).unwrap();
    assert_eq!(st.persona("lit.lit00001").unwrap(), Some(literary));
    assert!(matches!(st.put_skeletons("sample", &[skeleton("sk00001")]), Err(StoreError::Duplicate(_))));
    assert!(matches!(st.create_run(&manifest("sample", "sample")), Err(StoreError::Duplicate(_))));
    assert!(matches!(st.put_skeletons("nope", &[skeleton("sk7")]), Err(StoreError::ForeignKey(_))));
}

#[test]
fn persona_text_round_trips() {
    let (mut st, _) = seeded_store();
    let text = "Line one\r\n\tindented — ünïcode “quotes”\n\n  trailing  \u{0}nul";
    let p = persona("forge.rt", Some("sk00001"), text);
    st.put_personas("forge", std::slice::from_ref(&p)).unwrap();
    let back = st.persona("forge.rt").unwrap().unwrap();
    assert_eq!(back.text.as_bytes(), text.as_bytes());
    assert_eq!(back, p);
}

#[test]
fn manifest_is_immutable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.db");
    let st = Store::open(&path).unwrap();
    st.create_run(&manifest("r", "sample")).unwrap();
    st.set_run_status("r", RunStatus::Complete).unwrap();
    let c = rusqlite::Connection::open(&path).unwrap();
    assert!(c.execute("UPDATE runs SET config = '{}' WHERE run_id = 'r'", []).is_err());
    assert_eq!(st.require_run("r").unwrap().status, RunStatus::Complete);
    assert!(matches!(st.set_run_status("zz", RunStatus::Failed), Err(StoreError::UnknownRun(_))));
    st.soft_delete_run("r").unwrap();
    assert!(st.run("r").unwrap().is_none());
}

#[test]
fn assessment_round_trip_and_atomicity() {
    let (mut st, p) = seeded_store();
    let plan = pipeline::plan("assess", 1, Some(std::slice::from_ref(&p)), 2, false);
    st.plan_assessments("assess", &plan).unwrap();
    let base = one_outcome(&p);
    let good = retarget(&base, &plan[0]);
    st.put_assessment(&good).unwrap();
    let recs = st.personality("assess").unwrap();
    assert_eq!(recs, vec![good.record.clone()]);
    let sheets = st.sheets(&plan[0].assessment_id).unwrap();
    assert_eq!(sheets.len(), 6);
    for (s, ex) in sheets.iter().zip(&good.sheets) {
        assert_eq!(s.sheet, ex.sheet);
        assert_eq!(s.raw_text, ex.raw_text);
    }

    // a failure in the last sheet leaves no trace of the assessment
    let mut bad = retarget(&base, &plan[1]);
    bad.sheets[5].sheet.responses[3].item_id = 1;
    assert!(st.put_assessment(&bad).is_err());
    assert!(st.sheets(&plan[1].assessment_id).unwrap().is_empty());
    assert_eq!(st.personality("assess").unwrap().len(), 1);

    let mut short = retarget(&base, &plan[1]);
    short.sheets.pop();
    assert!(matches!(st.put_assessment(&short), Err(StoreError::Constraint(_))));
}

#[test]
fn personality_requires_all_sheets() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.db");
    let (p, plan) = {
        let mut st = Store::open(&path).unwrap();
        st.create_run(&manifest("sample", "sample")).unwrap();
        st.create_run(&manifest("forge", "forge")).unwrap();
        st.create_run(&manifest("assess", "assess")).unwrap();
        st.put_skeletons("sample", &[skeleton("sk00001")]).unwrap();
        let p = persona("forge.sk00001", Some("sk00001"), "x y z");
        st.put_personas("forge", std::slice::from_ref(&p)).unwrap();
        let plan = pipeline::plan("assess", 1, Some(std::slice::from_ref(&p)), 1, false);
        st.plan_assessments("assess", &plan).unwrap();
        (p, plan)
    };
    let c = rusqlite::Connection::open(&path).unwrap();
    let r = c.execute(
        "INSERT INTO personality VALUES (?1, 'assess', ?2, 0, 72, 72, 72, 72, 72, '', '')",
        rusqlite::params![plan[0].assessment_id, p.id],
    );
    assert!(r.is_err());
}

#[test]
fn resume_lists_unscored_work() {
    let (mut st, _) = seeded_store();
    let personas: Vec<PersonaProfile> =
        (0..600).map(|i| persona(&format!("forge.p{i:03}"), Some("sk00001"), "A clerk.")).collect();
    st.put_personas("forge", &personas).unwrap();
    let plan = pipeline::plan("assess", 9, Some(&personas), 1, false);
    st.plan_assessments("assess", &plan).unwrap();
    st.plan_assessments("assess", &plan).unwrap();
    assert_eq!(st.plan("assess").unwrap().len(), 600);

    let base = one_outcome(&personas[0]);
    for entry in &plan[..400] {
        st.put_assessment(&retarget(&base, entry)).unwrap();
    }
    for _ in 0..2 {
        st.put_failure(&AssessmentFailure {
            assessment_id: plan[450].assessment_id.clone(),
            sheet_index: Some(2),
            reason: "unparsable".into(),
            attempts: 2,
        })
        .unwrap();
    }
    let pending = st.resume("assess").unwrap();
    assert_eq!(pending.len(), 200);
    let p450 = pending.iter().find(|p| p.plan == plan[450]).unwrap();
    assert_eq!(p450.failures, 2);
    assert_eq!(pending.iter().filter(|p| p.failures == 0).count(), 199);
    assert_eq!(st.failures("assess").unwrap().len(), 2);

    for entry in &plan[400..] {
        st.put_assessment(&retarget(&base, entry)).unwrap();
    }
    assert!(st.resume("assess").unwrap().is_empty());
    assert!(matches!(st.resume("missing"), Err(StoreError::UnknownRun(_))));
}

#[test]
fn csv_export_is_ordered_by_key() {
    let (mut st, _) = seeded_store();
    st.put_skeletons("sample", &[skeleton("sk00003"), skeleton("sk00002")]).unwrap();
    let mut buf = Vec::new();
    let n = st.export_csv("skeleton", &mut buf).unwrap();
    assert_eq!(n, 3);
    let text = String::from_utf8(buf).unwrap();
    let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids, ["sk00001", "sk00002", "sk00003"]);
    assert!(text.starts_with("id,run_id,age,gender,"));
    assert!(matches!(st.export_csv("sqlite_master", &mut Vec::new()), Err(StoreError::UnknownTable(_))));
}
