//! The `cbsp` subcommands. Each returns the files it wrote; the binary only
//! parses arguments and maps errors to exit codes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use cbsp_core::controllability::MetricKind;
use cbsp_core::hydraulics::{load_profile, validate_mass_balance, HydraulicProfile, ScenarioSet};
use cbsp_core::network::{Topology, TopologySummary};
use cbsp_core::placement::{
    backup_replacement, compare_strategies, partition_solve, resolve_pool, solve_step_scoped, weigh_sets,
    weigh_sets_by_dimsrs, BackupReport, CriticalSteps, PlacementConfig, PlacementError, PlacementTimeline,
    WeightPreset, WeightReport,
};
use cbsp_core::wq::{build_state_space, Scope, WqError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_partition, ConfigError, LoadedConfig};
use crate::inp::parse_inp;
use crate::records::read_path;
use crate::report::{
    timeline_epsilons, write_backup_csv, write_comparison_csv, write_json, write_timeline_csv, Header,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad inputs: exit status 1.
    Validation(String),
    /// Numerical or IO failure: exit status 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PlacementError> for CliError {
    fn from(e: PlacementError) -> Self {
        match e {
            PlacementError::Controllability(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Command-line values that replace fields of the loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub stations: Option<usize>,
    pub metrics: Option<Vec<MetricKind>>,
    pub wq_step: Option<f64>,
    pub mu: Option<[f64; 4]>,
    pub seeds: Option<Vec<u64>>,
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
}

/// Parsed network and hydraulics of one run.
pub struct Bundle {
    pub config: LoadedConfig,
    pub topology: Topology,
    pub warnings: Vec<String>,
    pub profiles: Vec<HydraulicProfile>,
    jobs: Option<usize>,
}

impl Bundle {
    pub fn load(config_path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = LoadedConfig::load(config_path)?;
        let c = &mut config.config;
        if let Some(o) = &overrides.output {
            // Relative to the working directory, unlike paths in the file.
            c.output = Some(std::path::absolute(o)?);
        }
        if let Some(s) = overrides.stations {
            c.stations = s;
        }
        if let Some(m) = &overrides.metrics {
            c.metrics = m.clone();
        }
        if let Some(w) = overrides.wq_step {
            c.wq_step = w;
        }
        if let Some(mu) = overrides.mu {
            c.mu = Some(mu);
        }
        if let Some(s) = &overrides.seeds {
            c.seeds = s.clone();
        }
        config.check()?;

        let inp_path = config.resolve(&config.config.topology);
        let text = std::fs::read_to_string(&inp_path)?;
        let parsed = parse_inp(&text).map_err(|e| CliError::Validation(format!("{}: {e}", inp_path.display())))?;
        let topology = parsed.topology;
        let mut profiles = Vec::new();
        for s in &config.config.scenarios {
            let path = config.resolve(&s.hydraulics);
            let records =
                read_path(&path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let profile = load_profile(&topology, s.id.clone(), &records, config.config.hydraulic_step)
                .map_err(|e| CliError::Validation(format!("scenario `{}`: {e}", s.id)))?;
            profiles.push(profile);
        }
        ScenarioSet::new(&topology, profiles.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Self { config, topology, warnings: parsed.warnings, profiles, jobs: overrides.jobs })
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j.max(1));
        }
        b.build().map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn output_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.config.output_dir();
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn placement(&self, metric: MetricKind) -> Result<PlacementConfig, CliError> {
        Ok(self.config.placement(&self.topology, metric)?)
    }

    fn critical(&self) -> CriticalSteps {
        self.config.critical_steps(&self.profiles)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn json_bytes<T: Serialize>(hash: &str, body: T) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_json(&mut out, hash, body)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceIssue {
    pub step: usize,
    pub time: f64,
    pub junction: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourantIssue {
    pub step: usize,
    pub time: f64,
    pub pipe: String,
    /// v·Δt_WQ, m
    pub travel: f64,
    /// m
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValidation {
    pub scenario: String,
    pub steps: usize,
    pub mass_balance: Vec<BalanceIssue>,
    pub courant: Vec<CourantIssue>,
    /// Other per-step model errors.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub network: TopologySummary,
    pub warnings: Vec<String>,
    pub scenarios: Vec<ScenarioValidation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.mass_balance.is_empty() && s.courant.is_empty() && s.errors.is_empty())
    }
}

/// Mass balance and segmentation feasibility of every scenario and step.
pub fn validate_bundle(bundle: &Bundle) -> Result<ValidationReport, CliError> {
    let params = bundle.config.wq_params();
    let mut scenarios = Vec::new();
    for profile in &bundle.profiles {
        let balance = validate_mass_balance(&bundle.topology, profile, bundle.config.config.balance_tolerance);
        let mass_balance = balance
            .violations
            .into_iter()
            .map(|v| BalanceIssue {
                step: profile.step_at(v.time).unwrap_or(0),
                time: v.time,
                junction: v.junction.to_string(),
                residual: v.residual,
            })
            .collect();
        let mut courant = Vec::new();
        let mut errors = Vec::new();
        if let Err(e) = params.horizon(profile.step()) {
            errors.push(e.to_string());
        } else {
            for k in 0..profile.step_count() {
                match build_state_space(&bundle.topology, profile, k, &params) {
                    Ok(_) => {}
                    Err(WqError::Courant { pipe, travel, length }) => courant.push(CourantIssue {
                        step: k,
                        time: profile.snapshot(k).time(),
                        pipe: pipe.to_string(),
                        travel,
                        length,
                    }),
                    Err(e) => errors.push(format!("step {k}: {e}")),
                }
            }
        }
        scenarios.push(ScenarioValidation {
            scenario: profile.scenario_id().into(),
            steps: profile.step_count(),
            mass_balance,
            courant,
            errors,
        });
    }
    Ok(ValidationReport { network: bundle.topology.summary(), warnings: bundle.warnings.clone(), scenarios })
}

/// Outcome of a command: files written and lines meant for standard output.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    /// Set when the command ran but found invalid inputs.
    pub failed: bool,
}

pub fn cmd_validate(bundle: &Bundle) -> Result<Outcome, CliError> {
    let report = validate_bundle(bundle)?;
    let dir = bundle.output_dir()?;
    let hash = bundle.config.hash();
    let mut out = Outcome { failed: !report.passed(), ..Outcome::default() };
    out.files.push(write_file(&dir.join("validation.json"), &json_bytes(&hash, &report)?)?);
    for s in &report.scenarios {
        for v in &s.mass_balance {
            out.messages.push(format!(
                "{}: junction {} unbalanced at step {} (relative residual {:e})",
                s.scenario, v.junction, v.step, v.residual
            ));
        }
        for c in &s.courant {
            out.messages.push(format!(
                "{}: pipe {} at step {}: v·Δt = {} m exceeds length {} m",
                s.scenario, c.pipe, c.step, c.travel, c.length
            ));
        }
        for e in &s.errors {
            out.messages.push(format!("{}: {e}", s.scenario));
        }
    }
    if !out.failed {
        out.messages.push(format!("{} scenario(s) valid", report.scenarios.len()));
    }
    Ok(out)
}

/// Timelines for every scenario, solved over a pool of (scenario, step) jobs.
pub fn solve_timelines(bundle: &Bundle, config: &PlacementConfig) -> Result<Vec<PlacementTimeline>, CliError> {
    let pool = resolve_pool(&bundle.topology, config.pool.as_deref())?;
    let jobs: Vec<(usize, usize)> = bundle
        .profiles
        .iter()
        .enumerate()
        .flat_map(|(s, p)| (0..p.step_count()).map(move |k| (s, k)))
        .collect();
    let threads = bundle.thread_pool()?;
    let steps: Vec<_> = threads.install(|| {
        jobs.par_iter()
            .map(|&(s, k)| solve_step_scoped(&bundle.topology, &bundle.profiles[s], k, config, &Scope::whole(), &pool))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut steps = steps.into_iter();
    Ok(bundle
        .profiles
        .iter()
        .map(|p| PlacementTimeline {
            scenario: p.scenario_id().into(),
            metric: config.metric,
            stations: config.stations,
            hydraulic_step: p.step(),
            steps: steps.by_ref().take(p.step_count()).collect(),
        })
        .collect())
}

#[derive(Serialize)]
struct TimelinesBody<'a> {
    timelines: &'a [PlacementTimeline],
}

#[derive(Deserialize)]
struct StoredTimelines {
    timelines: Vec<PlacementTimeline>,
}

#[derive(Serialize)]
struct BackupBody {
    /// Keyed by scenario id.
    reports: BTreeMap<String, BackupReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedReport {
    pub name: String,
    /// `sc` for the binary flag, `dimsrs` for the reachable-dimension share.
    pub structural_term: String,
    pub report: WeightReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsDocument {
    pub metric: MetricKind,
    pub critical: CriticalSteps,
    pub reports: Vec<NamedReport>,
}

/// The three presets, the configured μ when present, and their dimsrs
/// variants when requested.
pub fn weigh_all(
    timelines: &[PlacementTimeline],
    metric: MetricKind,
    mu: Option<[f64; 4]>,
    critical: &CriticalSteps,
    dimsrs: bool,
) -> Result<WeightsDocument, CliError> {
    let mut named: Vec<(String, [f64; 4])> = WeightPreset::ALL.iter().map(|p| (p.name().to_string(), p.mu())).collect();
    if let Some(mu) = mu {
        named.push(("custom".into(), mu));
    }
    let mut reports = Vec::new();
    for (name, mu) in &named {
        reports.push(NamedReport {
            name: name.clone(),
            structural_term: "sc".into(),
            report: weigh_sets(timelines, *mu, critical)?,
        });
    }
    if dimsrs {
        for (name, mu) in &named {
            reports.push(NamedReport {
                name: name.clone(),
                structural_term: "dimsrs".into(),
                report: weigh_sets_by_dimsrs(timelines, *mu, critical)?,
            });
        }
    }
    Ok(WeightsDocument { metric, critical: critical.clone(), reports })
}

fn announce(doc: &WeightsDocument, messages: &mut Vec<String>) {
    for r in &doc.reports {
        let set: Vec<&str> = r.report.winner.iter().map(|n| n.as_str()).collect();
        messages.push(format!(
            "{} {} ({}): {} weight {}",
            doc.metric,
            r.name,
            r.structural_term,
            set.join(" "),
            crate::report::fmt_float(r.report.winner_weight().weight)
        ));
    }
}

fn write_weights(bundle: &Bundle, dir: &Path, doc: &WeightsDocument, out: &mut Outcome) -> Result<(), CliError> {
    let path = dir.join(format!("weights_{}.json", doc.metric));
    out.files.push(write_file(&path, &json_bytes(&bundle.config.hash(), doc)?)?);
    announce(doc, &mut out.messages);
    Ok(())
}

pub fn cmd_place(bundle: &Bundle) -> Result<Outcome, CliError> {
    let dir = bundle.output_dir()?;
    let mut out = Outcome::default();
    let critical = bundle.critical();
    let c = &bundle.config.config;
    for &metric in &c.metrics {
        let config = bundle.placement(metric)?;
        let timelines = solve_timelines(bundle, &config)?;
        let refs: Vec<&PlacementTimeline> = timelines.iter().collect();
        let hash = bundle.config.hash();
        let header = Header { config_hash: &hash, epsilon: timeline_epsilons(&refs) };
        let mut csv = Vec::new();
        write_timeline_csv(&mut csv, &header, &refs)?;
        out.files.push(write_file(&dir.join(format!("timeline_{metric}.csv")), &csv)?);
        out.files.push(write_file(&dir.join(format!("timeline_{metric}.json")), &json_bytes(&hash, TimelinesBody { timelines: &timelines })?)?);

        let doc = weigh_all(&timelines, metric, c.mu, &critical, c.dimsrs_weighting)?;
        write_weights(bundle, &dir, &doc, &mut out)?;

        if let Some(p) = &c.partition {
            let partition = read_partition(&bundle.config.resolve(p))?;
            let mut labelled = Vec::new();
            for profile in &bundle.profiles {
                for (district, mut t) in partition_solve(&bundle.topology, profile, &partition, &config)? {
                    t.scenario = format!("{}:{district}", t.scenario);
                    labelled.push(t);
                }
            }
            let refs: Vec<&PlacementTimeline> = labelled.iter().collect();
            let header = Header { config_hash: &hash, epsilon: timeline_epsilons(&refs) };
            let mut csv = Vec::new();
            write_timeline_csv(&mut csv, &header, &refs)?;
            out.files.push(write_file(&dir.join(format!("partition_{metric}.csv")), &csv)?);
        }
    }
    Ok(out)
}

/// Re-weighs the timelines a previous `place` run left in the output
/// directory.
pub fn cmd_weigh(bundle: &Bundle) -> Result<Outcome, CliError> {
    let dir = bundle.output_dir()?;
    let mut out = Outcome::default();
    let c = &bundle.config.config;
    for &metric in &c.metrics {
        let path = dir.join(format!("timeline_{metric}.json"));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("{}: {e} (run `place` first)", path.display())))?;
        let stored: StoredTimelines =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let timelines = stored.timelines;
        let doc = weigh_all(&timelines, metric, c.mu, &bundle.critical(), c.dimsrs_weighting)?;
        write_weights(bundle, &dir, &doc, &mut out)?;
    }
    Ok(out)
}

pub fn cmd_compare(bundle: &Bundle) -> Result<Outcome, CliError> {
    let dir = bundle.output_dir()?;
    let mut out = Outcome::default();
    let seeds = &bundle.config.config.seeds;
    let threads = bundle.thread_pool()?;
    for &metric in &bundle.config.config.metrics {
        let config = bundle.placement(metric)?;
        let rows: Vec<(String, Vec<_>)> = threads.install(|| {
            bundle
                .profiles
                .par_iter()
                .map(|p| Ok((p.scenario_id().to_string(), compare_strategies(&bundle.topology, p, &config, seeds)?)))
                .collect::<Result<Vec<_>, PlacementError>>()
        })?;
        let hash = bundle.config.hash();
        let header = Header { config_hash: &hash, epsilon: Vec::new() };
        let mut csv = Vec::new();
        write_comparison_csv(&mut csv, &header, &rows)?;
        out.files.push(write_file(&dir.join(format!("compare_{metric}.csv")), &csv)?);
    }
    Ok(out)
}

pub fn cmd_backup(bundle: &Bundle) -> Result<Outcome, CliError> {
    let spec = bundle
        .config
        .config
        .backup
        .clone()
        .ok_or_else(|| CliError::Validation("config has no `backup` section".into()))?;
    let dir = bundle.output_dir()?;
    let mut out = Outcome::default();
    for &metric in &bundle.config.config.metrics {
        let config = bundle.placement(metric)?;
        let mut reports: BTreeMap<String, BackupReport> = BTreeMap::new();
        for p in &bundle.profiles {
            let r = backup_replacement(&bundle.topology, p, &config, &spec.fixed, &spec.failed, spec.t_fail, spec.horizon)?;
            let hash = bundle.config.hash();
            let header = Header { config_hash: &hash, epsilon: Vec::new() };
            let mut csv = Vec::new();
            write_backup_csv(&mut csv, &header, &r)?;
            let name = if bundle.profiles.len() == 1 {
                format!("backup_{metric}.csv")
            } else {
                format!("backup_{metric}_{}.csv", p.scenario_id())
            };
            out.files.push(write_file(&dir.join(name), &csv)?);
            out.messages.push(format!(
                "{metric} {}: replacement for {} is {}",
                p.scenario_id(),
                r.failed,
                r.replacement.as_ref().map_or("none", |n| n.as_str())
            ));
            reports.insert(p.scenario_id().into(), r);
        }
        let path = dir.join(format!("backup_{metric}.json"));
        out.files.push(write_file(&path, &json_bytes(&bundle.config.hash(), BackupBody { reports })?)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct StateDump<'a> {
    scenario: &'a str,
    step: usize,
    n_states: usize,
    labels: &'a [String],
    kinds: &'a [cbsp_core::wq::StateKind],
}

/// Network counts and per-step state dimensions. With `dump` = (scenario,
/// step) it also writes A as `row,col,value` triplets and the state labels.
pub fn cmd_summary(bundle: &Bundle, dump: Option<(Option<String>, usize)>) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let s = bundle.topology.summary();
    out.messages.push(format!(
        "nodes {} (junctions {}, reservoirs {}, tanks {}), links {} (pipes {}, pumps {}, valves {})",
        s.nodes(),
        s.junctions,
        s.reservoirs,
        s.tanks,
        s.links(),
        s.pipes,
        s.pumps,
        s.valves
    ));
    let params = bundle.config.wq_params();
    for p in &bundle.profiles {
        let n_p = params.horizon(p.step()).map_err(|e| CliError::Validation(e.to_string()))?;
        let mut dims = Vec::new();
        for k in 0..p.step_count() {
            let space = build_state_space(&bundle.topology, p, k, &params).map_err(PlacementError::from)?;
            dims.push(space.n_states().to_string());
        }
        out.messages.push(format!(
            "scenario {}: {} steps of {} s, N_p {}, states per step {}",
            p.scenario_id(),
            p.step_count(),
            p.step(),
            n_p,
            dims.join(" ")
        ));
    }
    if let Some((scenario, step)) = dump {
        let profile = match &scenario {
            Some(id) => bundle
                .profiles
                .iter()
                .find(|p| p.scenario_id() == id)
                .ok_or_else(|| CliError::Validation(format!("unknown scenario `{id}`")))?,
            None => &bundle.profiles[0],
        };
        let space = build_state_space(&bundle.topology, profile, step, &params).map_err(PlacementError::from)?;
        let dir = bundle.output_dir()?;
        let stem = format!("{}_step{step}", profile.scenario_id());
        let mut coo = format!("# cbsp {}\nrow,col,value\n", crate::report::VERSION);
        for (r, c, v) in space.a().iter() {
            coo.push_str(&format!("{r},{c},{v:?}\n"));
        }
        out.files.push(write_file(&dir.join(format!("a_{stem}.csv")), coo.as_bytes())?);
        let dump = StateDump {
            scenario: profile.scenario_id(),
            step,
            n_states: space.n_states(),
            labels: space.index().labels(),
            kinds: space.index().kinds(),
        };
        let json = serde_json::to_vec_pretty(&dump).map_err(|e| CliError::Runtime(e.to_string()))?;
        out.files.push(write_file(&dir.join(format!("states_{stem}.json")), &json)?);
    }
    Ok(out)
}
