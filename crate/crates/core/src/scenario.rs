//! Scenario files and the batch runner behind the `direct-action` binary.
//!
//! A scenario is a JSON object with a `command` field (`identities`,
//! `kernel`, `emission` or `transact`), an optional `output` path and the
//! command's payload. Everything is parsed and validated before any
//! computation starts; reports are written once, at the end, as canonical
//! JSON.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::algebra::{canonical, verify_identity_suite, KernelName};
use crate::currents::{Current, CurrentDef};
use crate::error::Error;
use crate::grid::{GridSpec, SpacetimeGrid};
use crate::interaction::{mean_photon_number_spectral, truncation_for_tail, EmissionStats, Interaction};
use crate::numeric::{eval_feynman_momentum, eval_kernel, residual, KernelField};
use crate::report::{to_canonical_json, write_canonical_json};
use crate::transaction::{run_trials, TransactionScenario};

pub const TOOL: &str = "direct-action";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Probability mass left beyond the reported pmf when `max_count` is not
/// given.
const DEFAULT_PMF_TAIL: f64 = 1e-15;

/// Failure classes, each with a fixed process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// Scenario could not be read, parsed or validated.
    Validation,
    /// A computed quantity broke an invariant.
    Numerical,
    /// The report could not be written.
    Output,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Validation => 2,
            FailureKind::Numerical => 3,
            FailureKind::Output => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunError {
    pub kind: FailureKind,
    pub exit_code: i32,
    /// Where in the scenario the problem sits: a field path, or `line:column`
    /// for syntax errors. Absent for errors with no position.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub message: String,
}

impl RunError {
    fn new(kind: FailureKind, location: Option<String>, message: impl Into<String>) -> Self {
        Self {
            kind,
            exit_code: kind.exit_code(),
            location,
            message: message.into(),
        }
    }

    fn validation(location: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::new(FailureKind::Validation, Some(location.into()), message.to_string())
    }

    fn from_library(location: &str, err: Error) -> Self {
        match err {
            Error::Invariant(msg) => Self::new(FailureKind::Numerical, Some(location.into()), msg),
            Error::Io(e) => Self::new(FailureKind::Output, None, e.to_string()),
            other => Self::validation(location, other),
        }
    }

    /// Single-line JSON object, as printed on stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{}: {}", loc, self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesScenario {
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelScenario {
    #[serde(default)]
    pub grid: GridSpec,
    /// Kernel names, e.g. `feynman`, `delta_plus`.
    pub kernels: Vec<String>,
    /// Also evaluate the Feynman kernel by the frequency route at this `ε`
    /// and report its residual against the step-function form.
    #[serde(default)]
    pub momentum_epsilon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionScenario {
    #[serde(default)]
    pub grid: GridSpec,
    /// Currents whose sum radiates. Exclusive with `mean_photons`.
    #[serde(default)]
    pub sources: Vec<CurrentDef>,
    /// Mean photon number given directly.
    #[serde(default)]
    pub mean_photons: Option<f64>,
    /// Largest photon count in the reported pmf.
    #[serde(default)]
    pub max_count: Option<u64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Identities(IdentitiesScenario),
    Kernel(KernelScenario),
    Emission(EmissionScenario),
    Transact(TransactionScenario),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Identities(_) => "identities",
            Command::Kernel(_) => "kernel",
            Command::Emission(_) => "emission",
            Command::Transact(_) => "transact",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Command::Identities(s) => s.seed,
            Command::Kernel(s) => s.seed,
            Command::Emission(s) => s.seed,
            Command::Transact(s) => s.seed,
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            Command::Identities(s) => s.seed = seed,
            Command::Kernel(s) => s.seed = seed,
            Command::Emission(s) => s.seed = seed,
            Command::Transact(s) => s.seed = seed,
        }
    }

    pub fn grid(&self) -> Option<GridSpec> {
        match self {
            Command::Identities(_) => None,
            Command::Kernel(s) => Some(s.grid),
            Command::Emission(s) => Some(s.grid),
            Command::Transact(s) => Some(s.grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub command: Command,
    pub output: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

fn payload<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, RunError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        RunError::validation(if path == "." { "scenario".to_string() } else { path }, e.into_inner())
    })
}

impl Scenario {
    /// Parses scenario text. Syntax errors carry `line:column`, schema errors
    /// the offending field path.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| RunError::validation(format!("{}:{}", e.line(), e.column()), e))?;
        let Value::Object(mut map) = value else {
            return Err(RunError::validation("scenario", "scenario must be a JSON object"));
        };
        let command = match map.remove("command") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(RunError::validation("command", "must be a string")),
            None => return Err(RunError::validation("command", "missing field")),
        };
        let output = match map.remove("output") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(RunError::validation("output", "must be a string")),
        };
        let rest = Value::Object(map);
        let command = match command.as_str() {
            "identities" => Command::Identities(payload(rest)?),
            "kernel" => Command::Kernel(payload(rest)?),
            "emission" => Command::Emission(payload(rest)?),
            "transact" => Command::Transact(payload(rest)?),
            other => {
                return Err(RunError::validation(
                    "command",
                    format!("unknown command `{other}`; expected identities, kernel, emission or transact"),
                ))
            }
        };
        Ok(Self { command, output })
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::validation(path.display().to_string(), format!("cannot read scenario: {e}")))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.command.set_seed(seed);
        }
        if let Some(out) = &overrides.output {
            self.output = Some(out.clone());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl Metadata {
    pub fn for_command(command: &Command) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.name().into(),
            seed: command.seed(),
            grid: command.grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub metadata: Metadata,
    pub results: Value,
}

impl Report {
    pub fn empty(metadata: Metadata) -> Self {
        Self {
            metadata,
            results: Value::Object(Map::new()),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        to_canonical_json(self).expect("reports are plain JSON values")
    }

    /// Reads a report back and checks its metadata block.
    pub fn read(path: &Path) -> crate::error::Result<Self> {
        let report: Report = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if report.metadata.tool != TOOL {
            return Err(Error::invalid(format!("not a {TOOL} report")));
        }
        Ok(report)
    }
}

/// Side files written next to the report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sidecars {
    pub files: Vec<(String, String)>,
}

pub struct Outcome {
    pub report: Report,
    pub sidecars: Sidecars,
    /// Set when the run completed but a checked identity failed.
    pub failure: Option<RunError>,
}

enum Prepared {
    Identities,
    Kernel {
        grid: SpacetimeGrid,
        kernels: Vec<KernelName>,
        epsilon: Option<f64>,
    },
    Emission {
        grid: SpacetimeGrid,
        sources: Vec<Current>,
        mean: Option<f64>,
        max_count: Option<u64>,
        trials: u64,
        seed: u64,
    },
    Transact(TransactionScenario),
}

fn build_grid(spec: &GridSpec) -> Result<SpacetimeGrid, RunError> {
    spec.build().map_err(|e| RunError::from_library("grid", e))
}

fn prepare(command: &Command) -> Result<Prepared, RunError> {
    match command {
        Command::Identities(_) => Ok(Prepared::Identities),
        Command::Kernel(s) => {
            let grid = build_grid(&s.grid)?;
            if s.kernels.is_empty() && s.momentum_epsilon.is_none() {
                return Err(RunError::validation("kernels", "nothing to evaluate"));
            }
            let kernels = s
                .kernels
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    name.parse::<KernelName>()
                        .map_err(|e| RunError::from_library(&format!("kernels[{k}]"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(eps) = s.momentum_epsilon {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(RunError::validation("momentum_epsilon", "must be positive"));
                }
            }
            Ok(Prepared::Kernel {
                grid,
                kernels,
                epsilon: s.momentum_epsilon,
            })
        }
        Command::Emission(s) => {
            let grid = build_grid(&s.grid)?;
            match (s.sources.is_empty(), s.mean_photons) {
                (true, None) => {
                    return Err(RunError::validation("sources", "give either sources or mean_photons"))
                }
                (false, Some(_)) => {
                    return Err(RunError::validation("mean_photons", "cannot be combined with sources"))
                }
                _ => {}
            }
            if let Some(mean) = s.mean_photons {
                if !(mean >= 0.0 && mean.is_finite()) {
                    return Err(RunError::validation("mean_photons", "must be a finite value >= 0"));
                }
            }
            if s.trials == 0 {
                return Err(RunError::validation("trials", "must be at least 1"));
            }
            let sources = s
                .sources
                .iter()
                .enumerate()
                .map(|(k, def)| def.build(&grid).map_err(|e| RunError::from_library(&format!("sources[{k}]"), e)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Prepared::Emission {
                grid,
                sources,
                mean: s.mean_photons,
                max_count: s.max_count,
                trials: s.trials,
                seed: s.seed,
            })
        }
        Command::Transact(s) => {
            validate_transaction(s)?;
            Ok(Prepared::Transact(s.clone()))
        }
    }
}

fn validate_transaction(s: &TransactionScenario) -> Result<(), RunError> {
    use crate::transaction::{completeness_check, AbsorberSet, NuGate};
    let grid = build_grid(&s.grid)?;
    let set = AbsorberSet::new(s.absorbers.clone()).map_err(|e| RunError::from_library("absorbers", e))?;
    let completeness = completeness_check(&set, &grid);
    if !completeness.is_complete() {
        return Err(RunError::validation("absorbers", Error::IncompleteAbsorbers(completeness.to_string())));
    }
    NuGate::new(s.coupling, s.weight).map_err(|e| RunError::from_library("coupling", e))?;
    let offer = s.offer.build(&grid, &set).map_err(|e| RunError::from_library("offer", e))?;
    if !offer.is_normalized() {
        return Err(RunError::validation("offer", Error::Unnormalized(offer.norm_sqr())));
    }
    if s.trials == 0 {
        return Err(RunError::validation("trials", "must be at least 1"));
    }
    if s.factorization_points == 0 {
        return Err(RunError::validation("factorization_points", "must be at least 1"));
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

fn complex_value(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn sidecar_name(output: Option<&Path>, suffix: &str) -> String {
    let stem = output
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "kernel".into());
    format!("{stem}.{suffix}.csv")
}

fn kernel_entry(name: &str, field: &KernelField, csv: &str) -> Value {
    json!({
        "name": name,
        "max_abs": field.max_abs(),
        "finite": field.is_finite(),
        "csv": csv,
    })
}

fn execute(prepared: Prepared, output: Option<&Path>) -> Result<(Value, Sidecars, Option<RunError>), RunError> {
    let mut sidecars = Sidecars::default();
    match prepared {
        Prepared::Identities => {
            let suite = verify_identity_suite();
            let failure = (!suite.all_hold()).then(|| {
                let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.holds).map(|c| c.name).collect();
                RunError::new(FailureKind::Numerical, None, format!("identities failed: {}", failed.join(", ")))
            });
            let checks: Vec<Value> = suite
                .checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "relation": c.relation,
                        "status": if c.holds { "pass" } else { "fail" },
                        "difference": c.difference,
                    })
                })
                .collect();
            Ok((json!({ "all_hold": suite.all_hold(), "checks": checks }), sidecars, failure))
        }
        Prepared::Kernel { grid, kernels, epsilon } => {
            let mut entries = Vec::new();
            for name in &kernels {
                let field = eval_kernel(&canonical(*name), &grid);
                let csv = sidecar_name(output, name.as_str());
                entries.push({
                    let mut e = kernel_entry(name.as_str(), &field, &csv);
                    e["expression"] = Value::String(canonical(*name).to_string());
                    e
                });
                sidecars.files.push((csv, field.to_csv()));
            }
            let mut results = json!({ "kernels": entries });
            if let Some(eps) = epsilon {
                let step = eval_kernel(&canonical(KernelName::Feynman), &grid);
                let momentum = eval_feynman_momentum(&grid, eps).map_err(|e| RunError::from_library("momentum_epsilon", e))?;
                let r = residual(&step, &momentum).map_err(|e| RunError::from_library("momentum_epsilon", e))?;
                let csv = sidecar_name(output, "feynman_momentum");
                let mut entry = kernel_entry("feynman_momentum", &momentum, &csv);
                entry["epsilon"] = json!(eps);
                entry["residual_vs_feynman"] = json!(r);
                sidecars.files.push((csv, momentum.to_csv()));
                results["feynman_momentum"] = entry;
            }
            Ok((results, sidecars, None))
        }
        Prepared::Emission {
            grid,
            sources,
            mean,
            max_count,
            trials,
            seed,
        } => {
            let mut results = Map::new();
            let mean = match mean {
                Some(m) => m,
                None => {
                    let mut density = vec![0.0; grid.len()];
                    for s in &sources {
                        for (d, v) in density.iter_mut().zip(s.density()) {
                            *d += v;
                        }
                    }
                    let total = Current::from_density(&grid, density, "total")
                        .map_err(|e| RunError::from_library("sources", e))?;
                    let interaction = Interaction::new(&grid);
                    let n = interaction
                        .mean_photon_number(&total)
                        .map_err(|e| RunError::from_library("sources", e))?;
                    let split = interaction
                        .action_split(&total, &total)
                        .map_err(|e| RunError::from_library("sources", e))?;
                    results.insert("coulomb_part".into(), json!(split.coulomb_part));
                    results.insert("radiative_part".into(), json!(split.radiative_part));
                    results.insert("self_action".into(), complex_value(split.total));
                    results.insert("mean_photons_spectral".into(), json!(mean_photon_number_spectral(&total)));
                    n
                }
            };
            let max_count = match max_count {
                Some(m) => m,
                None => truncation_for_tail(mean, DEFAULT_PMF_TAIL).map_err(|e| RunError::from_library("mean_photons", e))?,
            };
            let stats = EmissionStats::compute(mean, max_count, trials, seed)
                .map_err(|e| RunError::from_library("mean_photons", e))?
                .with_grid(grid.spec());
            let Value::Object(stats) = to_value(&stats) else {
                unreachable!("stats serialize to an object")
            };
            results.extend(stats);
            Ok((Value::Object(results), sidecars, None))
        }
        Prepared::Transact(s) => {
            let report = run_trials(&s).map_err(|e| RunError::from_library("scenario", e))?;
            let mut v = to_value(&report);
            v["completeness"] = json!("complete");
            Ok((v, sidecars, None))
        }
    }
}

/// Validates, then computes. Nothing is written.
pub fn evaluate(scenario: &Scenario) -> Result<Outcome, RunError> {
    let prepared = prepare(&scenario.command)?;
    let (results, sidecars, failure) = execute(prepared, scenario.output.as_deref())?;
    Ok(Outcome {
        report: Report {
            metadata: Metadata::for_command(&scenario.command),
            results,
        },
        sidecars,
        failure,
    })
}

/// Writes `report` as canonical JSON.
pub fn emit_report(report: &Report, path: &Path) -> Result<(), RunError> {
    write_canonical_json(report, path)
        .map_err(|e| RunError::new(FailureKind::Output, Some(path.display().to_string()), e.to_string()))
}

fn write_sidecars(sidecars: &Sidecars, report_path: &Path) -> Result<(), RunError> {
    let dir = report_path.parent().unwrap_or(Path::new(""));
    for (name, text) in &sidecars.files {
        let path = dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| RunError::new(FailureKind::Output, Some(path.display().to_string()), e.to_string()))?;
    }
    Ok(())
}

/// Loads, validates and runs a scenario file, writing the report (and any
/// CSV sidecars) to the output path. Without an output path the report text
/// is returned only.
pub fn run(path: &Path, overrides: &Overrides) -> Result<String, RunError> {
    let mut scenario = Scenario::load(path)?;
    scenario.apply(overrides);
    let outcome = evaluate(&scenario)?;
    let text = outcome.report.to_canonical_json();
    if let Some(out) = &scenario.output {
        emit_report(&outcome.report, out)?;
        write_sidecars(&outcome.sidecars, out)?;
    }
    match outcome.failure {
        Some(err) => Err(err),
        None => Ok(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = Scenario::parse("{\n  \"command\": \"identities\",,\n}").unwrap_err();
        assert_eq!(err.exit_code, 2);
        assert_eq!(err.location.as_deref(), Some("2:27"));
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let err = Scenario::parse(r#"{"command": "transact", "absorbers": [{"id": "a", "modes": [1]}], "offer": "uniform", "coupling": 0.1, "trials": 1}"#)
            .unwrap_err();
        assert_eq!(err.kind, FailureKind::Validation);
        assert!(err.location.as_deref().unwrap().starts_with("absorbers[0].modes"), "{err:?}");
    }

    #[test]
    fn unknown_fields_and_commands_are_rejected() {
        assert!(Scenario::parse(r#"{"command": "identities", "extra": 1}"#).is_err());
        assert!(Scenario::parse(r#"{"command": "plot"}"#).is_err());
        assert!(Scenario::parse(r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn unknown_kernel_is_a_validation_error() {
        let s = Scenario::parse(r#"{"command": "kernel", "kernels": ["feynman", "nope"]}"#).unwrap();
        let err = evaluate(&s).err().unwrap();
        assert_eq!(err.exit_code, 2);
        assert_eq!(err.location.as_deref(), Some("kernels[1]"));
    }

    #[test]
    fn overrides_replace_seed_and_output() {
        let mut s = Scenario::parse(r#"{"command": "identities", "seed": 4, "output": "a.json"}"#).unwrap();
        s.apply(&Overrides { seed: Some(9), output: Some("b.json".into()) });
        assert_eq!(s.command.seed(), 9);
        assert_eq!(s.output, Some(PathBuf::from("b.json")));
    }

    #[test]
    fn empty_report_has_metadata() {
        let s = Scenario::parse(r#"{"command": "identities"}"#).unwrap();
        let report = Report::empty(Metadata::for_command(&s.command));
        let text = report.to_canonical_json();
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert!(text.contains("\"tool\": \"direct-action\""));
    }

    #[test]
    fn error_object_is_single_line_json() {
        let err = RunError::validation("offer", "bad");
        let v: Value = serde_json::from_str(&err.to_json()).unwrap();
        assert_eq!(v["error"]["exit_code"], 2);
        assert_eq!(v["error"]["location"], "offer");
        assert!(!err.to_json().contains('\n'));
    }
}
