use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Once};

use serde_json::json;

use personasim::analytics::{CurveComparison, StabilityReport};
use personasim::assessment::Assessor;
use personasim::domain::{DomainError, ItemBank, Strategy};
use personasim::evaluate::{self, EvalError, IdentifyOutput, PopulationOutput};
use personasim::export::{self, ExportError};
use personasim::forge::{Forge, PoorFields};
use personasim::gateway::{Gateway, HttpProvider, HttpProviderConfig, MockProvider};
use personasim::ingest::{self, HumanBaseline, IngestError, SampleOptions, SamplingFilter};
use personasim::pipeline::{self, Clock, PipelineError, RunSummary};
use personasim::store::{RunManifest, RunStatus, Store, StoreError, TABLES};
use personasim::templates::{TemplateError, TemplateSet};

use crate::config::{Config, ProviderKind};
use crate::{
    AssessArgs, BaselineArgs, Cli, Command, EvalIdentifyArgs, EvalPopulationArgs, EvalStabilityArgs, ExportArgs,
    ExportFormat, ForgeArgs, ForgeStrategy, IngestArgs, SampleArgs,
};

static STOP: AtomicBool = AtomicBool::new(false);
static HANDLER: Once = Once::new();

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Provider(String),
    Validation(String),
    Interrupted(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Data(_) => 4,
            CliError::Provider(_) => 5,
            CliError::Validation(_) => 6,
            CliError::Interrupted(_) => 130,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Provider(m) => write!(f, "provider: {m}"),
            CliError::Validation(m) => write!(f, "validation: {m}"),
            CliError::Interrupted(m) => write!(f, "interrupted: {m}"),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Unwritable { .. } => CliError::Config(e.to_string()),
            StoreError::UnknownRun(id) => CliError::Data(format!("no data for run {id}: run does not exist")),
            StoreError::Duplicate(_)
            | StoreError::ForeignKey(_)
            | StoreError::Constraint(_)
            | StoreError::UnknownTable(_) => CliError::Validation(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Store(s) => s.into(),
            PipelineError::WrongKind { .. } => CliError::Validation(e.to_string()),
            PipelineError::Provider { .. } => CliError::Provider(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Store(s) => s.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::BadFilter(_) | IngestError::UnknownColumn(_) | IngestError::EmptySample => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TemplateError> for CliError {
    fn from(e: TemplateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        CliError::Config(e.to_string())
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

struct Ctx {
    cfg: Config,
    store: Store,
}

fn clock(kind: ProviderKind) -> Clock {
    match kind {
        ProviderKind::Mock => Clock::frozen(),
        ProviderKind::Live => Clock::System,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(CliError::Config)?;
    if let Some(s) = cli.store {
        cfg.paths.store = s;
    }
    HANDLER.call_once(|| {
        let installed = ctrlc::set_handler(|| {
            eprintln!("stopping after in-flight work");
            STOP.store(true, std::sync::atomic::Ordering::SeqCst);
        });
        if let Err(e) = installed {
            log::warn!("cannot install interrupt handler: {e}");
        }
    });
    let store = Store::open(&cfg.paths.store)?;
    let mut ctx = Ctx { cfg, store };
    match cli.command {
        Command::Sample(a) => sample(&mut ctx, a),
        Command::Forge(a) => forge(&mut ctx, a),
        Command::IngestLiterary(a) => ingest_literary(&mut ctx, a),
        Command::Assess(a) => assess(&mut ctx, a),
        Command::BaselineLlm(a) => baseline_llm(&mut ctx, a),
        Command::EvalStability(a) => eval_stability(&ctx, a),
        Command::EvalIdentify(a) => eval_identify(&ctx, a),
        Command::EvalPopulation(a) => eval_population(&ctx, a),
        Command::Export(a) => export_tables(&ctx, a),
        Command::Runs => list_runs(&ctx),
    }
}

/// Creates the run, or returns it when it already exists with the same
/// parameters.
fn ensure_run(
    ctx: &Ctx,
    run_id: &str,
    kind: &str,
    strategy: Option<Strategy>,
    seed: u64,
    config: serde_json::Value,
    clock: &Clock,
) -> Result<RunManifest> {
    if let Some(m) = ctx.store.run(run_id)? {
        if m.kind != kind || m.config != config || m.seed != seed {
            return Err(CliError::Validation(format!(
                "run {run_id} already exists with different parameters ({})",
                m.config
            )));
        }
        return Ok(m);
    }
    let m = RunManifest {
        run_id: run_id.to_string(),
        kind: kind.to_string(),
        strategy,
        seed,
        config,
        created_at: clock.now(),
        status: RunStatus::InProgress,
    };
    ctx.store.create_run(&m)?;
    Ok(m)
}

fn require_kind(ctx: &Ctx, run_id: &str, kinds: &[&str]) -> Result<RunManifest> {
    let m = ctx.store.require_run(run_id)?;
    if !kinds.contains(&m.kind.as_str()) {
        return Err(PipelineError::WrongKind { run: run_id.into(), found: m.kind, expected: kinds.join(" or ") }.into());
    }
    Ok(m)
}

fn bank(cfg: &Config) -> Result<ItemBank> {
    Ok(match &cfg.paths.item_bank {
        Some(p) => ItemBank::load(p)?,
        None => ItemBank::bundled(),
    })
}

fn templates(cfg: &Config) -> Result<TemplateSet> {
    Ok(match &cfg.paths.templates {
        Some(d) => TemplateSet::with_overrides(d)?,
        None => TemplateSet::bundled(),
    })
}

struct Provider {
    gateway: Gateway,
    mock: Option<Arc<MockProvider>>,
}

fn provider(cfg: &Config, kind: ProviderKind, bank: &ItemBank) -> Result<Provider> {
    match kind {
        ProviderKind::Mock => {
            let mock = Arc::new(MockProvider::new(cfg.mock.clone(), bank.clone()));
            Ok(Provider { gateway: Gateway::new(mock.clone(), cfg.gateway()), mock: Some(mock) })
        }
        ProviderKind::Live => {
            let key = std::env::var(&cfg.api_key_env)
                .map_err(|_| CliError::Config(format!("set {} to use the live provider", cfg.api_key_env)))?;
            let http = HttpProvider::new(HttpProviderConfig {
                endpoint: cfg.endpoint.clone(),
                model: cfg.model.clone(),
                api_key: Some(key),
                timeout_secs: cfg.timeout_secs,
            });
            Ok(Provider { gateway: Gateway::new(Arc::new(http), cfg.gateway()), mock: None })
        }
    }
}

fn provider_snapshot(cfg: &Config, kind: ProviderKind) -> serde_json::Value {
    match kind {
        ProviderKind::Mock => json!({"kind": "mock", "mock": cfg.mock}),
        ProviderKind::Live => json!({"kind": "live", "model": cfg.model, "endpoint": cfg.endpoint, "temperature": cfg.temperature}),
    }
}

fn finish_summary(run_id: &str, what: &str, s: &RunSummary) -> Result<()> {
    println!("{run_id}: {} {what} stored, {} failed, {} not started", s.succeeded, s.failed, s.skipped);
    if s.interrupted {
        return Err(CliError::Interrupted(format!("{run_id}: rerun the same command to resume")));
    }
    if s.failed > 0 {
        return Err(CliError::Provider(format!("{run_id}: {} {what} failed; rerun to retry them", s.failed)));
    }
    Ok(())
}

fn sample(ctx: &mut Ctx, a: SampleArgs) -> Result<()> {
    let census = a
        .census
        .or_else(|| ctx.cfg.paths.census.clone())
        .ok_or_else(|| CliError::Config("no census file; pass --census or set paths.census".into()))?;
    let run_id = a.run.unwrap_or_else(|| format!("sample-{}-{}", a.seed, a.n));
    let filter = a.filter.as_deref().map(SamplingFilter::parse).transpose()?;
    let conf = json!({"n": a.n, "filter": a.filter, "census": census.display().to_string(), "age_jitter": a.age_jitter});
    let m = ensure_run(ctx, &run_id, "sample", None, a.seed, conf, &clock(ctx.cfg.provider))?;
    if m.status == RunStatus::Complete {
        println!("{run_id}: already complete");
        return Ok(());
    }
    let table = ingest::load_census(&census)?;
    let mut opts = SampleOptions::new(a.n, a.seed);
    opts.filter = filter;
    opts.age_jitter = a.age_jitter;
    let skeletons = ingest::sample_skeletons(&table, &opts)?;
    ctx.store.put_skeletons(&run_id, &skeletons)?;
    ctx.store.set_run_status(&run_id, RunStatus::Complete)?;
    println!(
        "{run_id}: {} skeletons from {} census rows ({} rows dropped)",
        skeletons.len(),
        table.len(),
        table.dropped_count
    );
    Ok(())
}

fn forge(ctx: &mut Ctx, a: ForgeArgs) -> Result<()> {
    if let Some(src) = &a.poor_from {
        let fields = PoorFields::parse(&a.poor_fields)
            .ok_or_else(|| CliError::Validation(format!("unknown field in {:?}", a.poor_fields)))?;
        require_kind(ctx, src, &["forge", "ingest"])?;
        let run_id = a.run.unwrap_or_else(|| format!("poor-{src}"));
        let conf = json!({"poor_from": src, "fields": fields});
        let m = ensure_run(ctx, &run_id, "forge", Some(Strategy::Poor), 0, conf, &clock(ctx.cfg.provider))?;
        if m.status == RunStatus::Complete {
            println!("{run_id}: already complete");
            return Ok(());
        }
        let s = pipeline::derive_poor(&mut ctx.store, &run_id, src, fields)?;
        return finish_summary(&run_id, "personas", &s);
    }
    let from = a.from.expect("clap requires --from or --poor-from");
    require_kind(ctx, &from, &["sample"])?;
    let kind = a.provider.provider.unwrap_or(ctx.cfg.provider);
    let strategy = match a.strategy {
        ForgeStrategy::Standard => Strategy::Standard,
        ForgeStrategy::Narrative => Strategy::Narrative,
    };
    let run_id = a.run.unwrap_or_else(|| format!("forge-{}-{from}", strategy.as_str()));
    let conf = json!({"from": from, "min_words": a.min_words, "provider": provider_snapshot(&ctx.cfg, kind)});
    let m = ensure_run(ctx, &run_id, "forge", Some(strategy), a.seed, conf, &clock(kind))?;
    if m.status == RunStatus::Complete {
        println!("{run_id}: already complete");
        return Ok(());
    }
    let bank = bank(&ctx.cfg)?;
    let templates = templates(&ctx.cfg)?;
    let p = provider(&ctx.cfg, kind, &bank)?;
    let mut forge = Forge::new(&p.gateway, &templates, a.seed);
    forge.min_narrative_words = a.min_words;
    let s = match pipeline::forge_personas(&mut ctx.store, &run_id, &from, &forge, strategy, ctx.cfg.concurrency, &STOP) {
        Err(PipelineError::Provider { failed, total, first }) => {
            return Err(CliError::Provider(format!("{run_id}: {failed} of {total} profiles failed ({first}); rerun to retry")))
        }
        other => other?,
    };
    let substandard = ctx.store.personas(&run_id)?.iter().filter(|p| p.substandard).count();
    if substandard > 0 {
        println!("{run_id}: {substandard} profiles below {} words flagged substandard", a.min_words);
    }
    finish_summary(&run_id, "personas", &s)
}

fn ingest_literary(ctx: &mut Ctx, a: IngestArgs) -> Result<()> {
    let run_id = a.run.unwrap_or_else(|| "literary".into());
    let conf = json!({"file": a.file.display().to_string()});
    let m = ensure_run(ctx, &run_id, "ingest", Some(Strategy::Literary), 0, conf, &clock(ctx.cfg.provider))?;
    if m.status == RunStatus::Complete {
        println!("{run_id}: already complete");
        return Ok(());
    }
    let mut personas = ingest::load_literary_personas(&a.file)?;
    if personas.is_empty() {
        return Err(CliError::Data(format!("{}: no record has a description", a.file.display())));
    }
    for p in &mut personas {
        p.id = pipeline::persona_id(&run_id, &p.id);
    }
    ctx.store.put_personas(&run_id, &personas)?;
    ctx.store.set_run_status(&run_id, RunStatus::Complete)?;
    println!("{run_id}: {} personas", personas.len());
    Ok(())
}

fn assess(ctx: &mut Ctx, a: AssessArgs) -> Result<()> {
    let src = require_kind(ctx, &a.personas, &["forge", "ingest"])?;
    let mut personas = ctx.store.personas(&a.personas)?;
    if personas.is_empty() {
        return Err(CliError::Data(format!("no data for run {}: it has no personas", a.personas)));
    }
    if !a.persona_ids.is_empty() {
        for id in &a.persona_ids {
            if !personas.iter().any(|p| &p.id == id) {
                return Err(CliError::Data(format!("persona {id} is not in run {}", a.personas)));
            }
        }
        personas.retain(|p| a.persona_ids.contains(&p.id));
    }
    if a.repeat == 0 {
        return Err(CliError::Validation("--repeat must be at least 1".into()));
    }
    let kind = a.provider.provider.unwrap_or(ctx.cfg.provider);
    let run_id = a.run.unwrap_or_else(|| {
        format!("assess-{}-r{}-s{}{}", a.personas, a.repeat, a.seed, if a.antialign { "-aa" } else { "" })
    });
    let strategy = if a.antialign { Some(Strategy::Antialign) } else { src.strategy };
    let conf = json!({
        "personas": a.personas,
        "persona_ids": a.persona_ids,
        "repeat": a.repeat,
        "antialign": a.antialign,
        "provider": provider_snapshot(&ctx.cfg, kind),
    });
    ensure_run(ctx, &run_id, "assess", strategy, a.seed, conf, &clock(kind))?;
    let plan = pipeline::plan(&run_id, a.seed, Some(&personas), a.repeat, a.antialign);
    ctx.store.plan_assessments(&run_id, &plan)?;

    let bank = bank(&ctx.cfg)?;
    let templates = templates(&ctx.cfg)?;
    let p = provider(&ctx.cfg, kind, &bank)?;
    if let Some(mock) = &p.mock {
        for persona in personas.iter().filter(|p| p.derived_from.is_some()) {
            let origin = persona.derived_from.as_deref().expect("filtered");
            if let Some(source) = ctx.store.persona(origin)? {
                mock.alias(&persona.text, &source.text);
            }
        }
    }
    let assessor = Assessor::new(&p.gateway, &bank, &templates);
    let s =
        pipeline::execute_assessments(&mut ctx.store, &run_id, &assessor, ctx.cfg.concurrency, &clock(kind), &STOP)?;
    finish_summary(&run_id, "assessments", &s)
}

fn baseline_llm(ctx: &mut Ctx, a: BaselineArgs) -> Result<()> {
    if a.repeat == 0 {
        return Err(CliError::Validation("--repeat must be at least 1".into()));
    }
    let kind = a.provider.provider.unwrap_or(ctx.cfg.provider);
    let run_id = a.run.unwrap_or_else(|| format!("baseline-r{}-s{}", a.repeat, a.seed));
    let conf = json!({"repeat": a.repeat, "antialign": a.antialign, "provider": provider_snapshot(&ctx.cfg, kind)});
    ensure_run(ctx, &run_id, "baseline", None, a.seed, conf, &clock(kind))?;
    let plan = pipeline::plan(&run_id, a.seed, None, a.repeat, a.antialign);
    ctx.store.plan_assessments(&run_id, &plan)?;
    let bank = bank(&ctx.cfg)?;
    let templates = templates(&ctx.cfg)?;
    let p = provider(&ctx.cfg, kind, &bank)?;
    let assessor = Assessor::new(&p.gateway, &bank, &templates);
    let s =
        pipeline::execute_assessments(&mut ctx.store, &run_id, &assessor, ctx.cfg.concurrency, &clock(kind), &STOP)?;
    let outcome = finish_summary(&run_id, "assessments", &s);
    match evaluate::stability_for_run(&ctx.store, &run_id, Default::default()) {
        Ok(reports) => {
            let dir = out_dir(&ctx.cfg, &None, &run_id)?;
            export::write_json(&dir.join("baseline.json"), &reports)?;
            export::stability_csv(&dir.join("baseline.csv"), &reports)?;
            for r in &reports {
                println!("{run_id}: baseline mean (N E O A C) = {}", fmt_scores(&r.mean_scores));
            }
        }
        Err(e) => log::warn!("{run_id}: no baseline report: {e}"),
    }
    outcome
}

fn fmt_scores(s: &[f64; 5]) -> String {
    s.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")
}

fn out_dir(cfg: &Config, out: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| cfg.paths.out.join(name.replace(['/', ':'], "_")));
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn eval_stability(ctx: &Ctx, a: EvalStabilityArgs) -> Result<()> {
    require_kind(ctx, &a.run, &["assess", "baseline"])?;
    let reports: Vec<StabilityReport> = evaluate::stability_for_run(&ctx.store, &a.run, a.cv_basis.into())?;
    let dir = out_dir(&ctx.cfg, &a.out.out, &a.run)?;
    export::write_json(&dir.join("stability.json"), &reports)?;
    export::stability_csv(&dir.join("stability.csv"), &reports)?;
    export::kde_csv(&dir.join("kde.csv"), &reports)?;
    if a.out.svg {
        export::write_svg(&dir.join("kde.svg"), &export::kde_chart(&reports))?;
    }
    println!("{:<32} {:>6} {:>6} {:>8} {:>9}", "persona", "n_raw", "n_kept", "cv", "kurtosis");
    for r in &reports {
        println!("{:<32} {:>6} {:>6} {:>8.4} {:>9.4}", r.persona_id, r.n_raw, r.n_kept, r.cv, r.excess_kurtosis);
    }
    println!("reports in {}", dir.display());
    Ok(())
}

fn eval_identify(ctx: &Ctx, a: EvalIdentifyArgs) -> Result<()> {
    require_kind(ctx, &a.run, &["assess"])?;
    let order = (!a.personas.is_empty()).then_some(a.personas.as_slice());
    let out: IdentifyOutput = evaluate::identify_for_run(&ctx.store, &a.run, order, a.space.into(), a.seed)?;
    let dir = out_dir(&ctx.cfg, &a.out.out, &a.run)?;
    export::write_json(&dir.join("identify.json"), &out)?;
    export::identify_csv(&dir.join("identify.csv"), &out)?;
    export::density_csv(&dir.join("density.csv"), &out)?;
    if a.out.svg {
        for (k, (r, pairs)) in out.pairwise.iter().zip(&out.densities).enumerate() {
            let label = r.persona_ids.join("|");
            for p in pairs.iter().filter(|p| !p.degenerate) {
                let name = format!("density_{}_{}.svg", k + 1, p.domain.code());
                export::write_svg(&dir.join(name), &export::density_chart(&label, p))?;
            }
        }
    }
    println!("{:<10} {:<48} {:>8} {:>8} {:>8}", "kind", "personas", "ari", "acd", "pc1");
    let pc1 = |r: &personasim::analytics::IdentifiabilityReport| fmt_opt(r.pca_explained.first().copied());
    for r in &out.pairwise {
        println!("{:<10} {:<48} {:>8.4} {:>8} {:>8}", "pairwise", r.persona_ids.join("|"), r.ari, fmt_opt(r.centroid_distance), pc1(r));
    }
    let g = &out.grouped;
    println!("{:<10} {:<48} {:>8.4} {:>8} {:>8}", "grouped", format!("k={}", g.persona_ids.len()), g.ari, "-", pc1(g));
    println!("reports in {}", dir.display());
    Ok(())
}

fn load_baseline(ctx: &Ctx, path: &Option<PathBuf>) -> Result<HumanBaseline> {
    let path = path
        .clone()
        .or_else(|| ctx.cfg.paths.baseline.clone())
        .ok_or_else(|| CliError::Config("no baseline file; pass --baseline or set paths.baseline".into()))?;
    let baseline = ingest::load_baseline(&path)?;
    if baseline.bin_edges() != ctx.cfg.bins.as_slice() {
        return Err(CliError::Config(format!(
            "configured bins {:?} differ from the baseline's {:?}",
            ctx.cfg.bins,
            baseline.bin_edges()
        )));
    }
    Ok(baseline)
}

fn eval_population(ctx: &Ctx, a: EvalPopulationArgs) -> Result<()> {
    let baseline = load_baseline(ctx, &a.baseline)?;
    let entries: Vec<(String, String)> = match &a.run {
        Some(run) => vec![(a.label.clone().unwrap_or_else(|| run.clone()), run.clone())],
        None => a
            .compare
            .iter()
            .map(|e| {
                e.split_once('=')
                    .map(|(l, r)| (l.trim().to_string(), r.trim().to_string()))
                    .ok_or_else(|| CliError::Validation(format!("expected label=run, got {e:?}")))
            })
            .collect::<Result<_>>()?,
    };
    let mut pops: Vec<PopulationOutput> = Vec::new();
    for (label, run) in &entries {
        require_kind(ctx, run, &["assess"])?;
        pops.push(evaluate::population_for_run(&ctx.store, run, label, &baseline)?);
    }
    let name = a.run.clone().unwrap_or_else(|| "compare".into());
    let dir = out_dir(&ctx.cfg, &a.out.out, &name)?;
    let comparisons: Vec<CurveComparison> = pops.iter().map(|p| p.comparison.clone()).collect();
    export::write_json(&dir.join("population.json"), &pops)?;
    export::curves_csv(&dir.join("curves.csv"), &pops, &baseline)?;
    export::comparison_csv(&dir.join("comparison.csv"), &comparisons)?;
    if a.out.svg {
        for (d, svg) in export::curve_charts(&pops, &baseline) {
            export::write_svg(&dir.join(format!("curve_{}.svg", d.code())), &svg)?;
        }
    }
    println!("{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}", "label", "N", "E", "O", "A", "C", "total");
    for c in &comparisons {
        let per: Vec<String> = personasim::domain::Domain::ALL
            .iter()
            .map(|d| format!("{:>8.2}", c.per_trait_distance[d]))
            .collect();
        println!("{:<24} {} {:>9.2}", c.label, per.join(" "), c.total_distance);
    }
    println!("reports in {}", dir.display());
    Ok(())
}

fn export_tables(ctx: &Ctx, a: ExportArgs) -> Result<()> {
    let tables: Vec<String> = if a.tables.is_empty() {
        TABLES.iter().map(|(t, _)| t.to_string()).collect()
    } else {
        a.tables.clone()
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::Config(format!("{}: {e}", a.out.display())))?;
    for t in &tables {
        let (path, n) = match a.format {
            ExportFormat::Csv => {
                let path = a.out.join(format!("{t}.csv"));
                let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
                let n = ctx.store.export_csv(t, &mut f)?;
                (path, n)
            }
            ExportFormat::Json => {
                let path = a.out.join(format!("{t}.json"));
                let rows = ctx.store.export_json(t)?;
                export::write_json(&path, &rows)?;
                (path, rows.len())
            }
        };
        println!("{t}: {n} rows -> {}", path.display());
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn list_runs(ctx: &Ctx) -> Result<()> {
    for m in ctx.store.runs()? {
        println!(
            "{:<40} {:<9} {:<10} {:<11} {}",
            m.run_id,
            m.kind,
            m.strategy.map(Strategy::as_str).unwrap_or("-"),
            m.status.as_str(),
            m.created_at
        );
    }
    Ok(())
}
