//! Experiment configuration: a single JSON document, validated and resolved into an
//! [`ExperimentPlan`] before anything is computed.

use std::path::{Path, PathBuf};

use conecoord_core::instances::{preset, EnsvmInstance};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    Ensvm,
    Synthetic,
    Soc,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    #[serde(default)]
    pub kind: Option<InstanceKind>,
    pub preset: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub s: Option<usize>,
    pub lambda: Option<f64>,
    pub dim: Option<usize>,
    pub path: Option<PathBuf>,
    /// Fixed instance seed. Without it every run seed also seeds its instance.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Spdc,
    Appal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MuSetting {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKindName {
    PowerLaw,
    Constant,
    Explicit,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: Option<ScheduleKindName>,
    pub alpha: Option<f64>,
    pub offset: Option<f64>,
    /// Absolute numerator (power law) or step (constant).
    pub scale: Option<f64>,
    /// First step as a fraction of the step bound.
    pub fraction: Option<f64>,
    pub steps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageFrom {
    Initial,
    FirstIterate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceOf {
    Average,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    pub feasibility: f64,
    pub stationarity: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_patience() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub algorithm: Algorithm,
    pub blocks: Option<OneOrMany>,
    pub gamma: Option<f64>,
    pub mu: Option<MuSetting>,
    pub schedule: Option<ScheduleSection>,
    pub iterations: u64,
    pub thinning: Option<u64>,
    pub seeds: Vec<u64>,
    pub average_from: Option<AverageFrom>,
    pub trace: Option<TraceOf>,
    pub stop: Option<StopSection>,
    #[serde(default)]
    pub allow_unsafe_step: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Option<Vec<Format>>,
}

// ---- resolved plan ----

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    Ensvm {
        #[serde(skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        m: usize,
        n: usize,
        s: usize,
        lambda: f64,
        seed: Option<u64>,
    },
    Synthetic {
        dim: usize,
        seed: Option<u64>,
    },
    Soc {
        dim: usize,
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMode {
    AutoOrthant,
    AutoSoc,
    Explicit(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    Scale(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleSpec {
    PowerLaw {
        alpha: f64,
        offset: f64,
        size: StepSize,
    },
    Constant {
        size: StepSize,
    },
    Explicit {
        steps: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub instance: InstanceSpec,
    pub algorithm: Algorithm,
    pub blocks: Vec<usize>,
    pub gamma: f64,
    pub mu: MuMode,
    pub schedule: ScheduleSpec,
    pub iterations: u64,
    pub thinning: u64,
    pub seeds: Vec<u64>,
    pub average_from: AverageFrom,
    pub trace: TraceOf,
    pub stop: Option<StopSection>,
    pub allow_unsafe_step: bool,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl ExperimentPlan {
    pub fn writes(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Number of independent solver runs.
    pub fn jobs(&self) -> usize {
        self.blocks.len() * self.seeds.len()
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

/// Reads and resolves a config file. Relative instance paths are taken relative to
/// the config file's directory.
pub fn load(path: &Path) -> CliResult<ExperimentPlan> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    resolve(config, base)
}

/// Parses the JSON text. Syntax errors and unknown keys report line and column.
pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn resolve(config: ExperimentConfig, base: &Path) -> CliResult<ExperimentPlan> {
    let ExperimentConfig {
        instance,
        solver,
        output,
    } = config;
    let (instance, default_blocks, n_vars) = resolve_instance(instance, base)?;

    let blocks = match solver.blocks {
        Some(OneOrMany::One(b)) => vec![b],
        Some(OneOrMany::Many(v)) => v,
        None => {
            default_blocks.ok_or_else(|| bad("solver.blocks", "required for this instance kind"))?
        }
    };
    if blocks.is_empty() {
        return Err(bad("solver.blocks", "must not be empty"));
    }
    for &b in &blocks {
        if b == 0 || b > n_vars {
            return Err(bad(
                "solver.blocks",
                format!("{b} blocks for {n_vars} variables"),
            ));
        }
    }
    let mut seen = blocks.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != blocks.len() {
        return Err(bad("solver.blocks", "duplicate entries"));
    }

    let gamma = solver.gamma.unwrap_or(1.0);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(bad(
            "solver.gamma",
            format!("must be a positive number, got {gamma}"),
        ));
    }

    let orthant = !matches!(instance, InstanceSpec::Soc { .. });
    let mu = match solver.mu {
        None => {
            if orthant {
                MuMode::AutoOrthant
            } else {
                MuMode::AutoSoc
            }
        }
        Some(MuSetting::Value(v)) => {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad("solver.mu", format!("must be >= 0, got {v}")));
            }
            MuMode::Explicit(v)
        }
        Some(MuSetting::Named(name)) => match name.as_str() {
            "auto-orthant" if orthant => MuMode::AutoOrthant,
            "auto-soc" if !orthant => MuMode::AutoSoc,
            "auto-orthant" | "auto-soc" => {
                return Err(bad(
                    "solver.mu",
                    format!("{name} does not match the instance cone"),
                ))
            }
            "infinite" => MuMode::Infinite,
            _ => {
                return Err(bad(
                    "solver.mu",
                    format!("expected a number, auto-orthant, auto-soc or infinite, got {name:?}"),
                ))
            }
        },
    };

    let schedule = resolve_schedule(solver.schedule.unwrap_or_default(), solver.algorithm)?;
    if let ScheduleSpec::Explicit { steps } = &schedule {
        if (steps.len() as u64) < solver.iterations {
            return Err(bad(
                "solver.schedule.steps",
                format!("{} steps for {} iterations", steps.len(), solver.iterations),
            ));
        }
    }

    let thinning = solver.thinning.unwrap_or(1);
    if thinning == 0 {
        return Err(bad("solver.thinning", "must be >= 1"));
    }
    if solver.seeds.is_empty() {
        return Err(bad("solver.seeds", "must not be empty"));
    }
    let mut seeds = solver.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.len() != solver.seeds.len() {
        return Err(bad("solver.seeds", "duplicate entries"));
    }
    if let Some(stop) = &solver.stop {
        if !(stop.feasibility > 0.0) || !(stop.stationarity > 0.0) || stop.patience == 0 {
            return Err(bad(
                "solver.stop",
                "tolerances must be > 0 and patience >= 1",
            ));
        }
    }

    let formats = output
        .formats
        .unwrap_or_else(|| vec![Format::Csv, Format::Json]);
    if formats.is_empty() {
        return Err(bad("output.formats", "must not be empty"));
    }

    Ok(ExperimentPlan {
        instance,
        algorithm: solver.algorithm,
        blocks,
        gamma,
        mu,
        schedule,
        iterations: solver.iterations,
        thinning,
        seeds: solver.seeds,
        average_from: solver.average_from.unwrap_or(AverageFrom::Initial),
        trace: solver.trace.unwrap_or(TraceOf::Average),
        stop: solver.stop,
        allow_unsafe_step: solver.allow_unsafe_step,
        output_dir: output.directory,
        formats,
    })
}

/// Returns the instance, its default block counts and its number of variables.
fn resolve_instance(
    sec: InstanceSection,
    base: &Path,
) -> CliResult<(InstanceSpec, Option<Vec<usize>>, usize)> {
    let kind = sec.kind.unwrap_or(if sec.path.is_some() {
        InstanceKind::File
    } else {
        InstanceKind::Ensvm
    });
    let reject = |present: bool, field: &str| -> CliResult<()> {
        if present {
            Err(bad(
                &format!("instance.{field}"),
                format!("not used by {kind:?} instances"),
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        InstanceKind::Ensvm => {
            reject(sec.dim.is_some(), "dim")?;
            reject(sec.path.is_some(), "path")?;
            let (m, n, s, lambda, blocks) = if let Some(name) = &sec.preset {
                let p = preset(name)
                    .ok_or_else(|| bad("instance.preset", format!("unknown preset {name:?}")))?;
                (
                    sec.m.unwrap_or(p.m),
                    sec.n.unwrap_or(p.n),
                    sec.s.unwrap_or(p.s),
                    sec.lambda.unwrap_or(p.lambda),
                    Some(p.blocks.to_vec()),
                )
            } else {
                let need = |v: Option<usize>, f: &str| {
                    v.ok_or_else(|| bad(&format!("instance.{f}"), "required without a preset"))
                };
                (
                    need(sec.m, "m")?,
                    need(sec.n, "n")?,
                    need(sec.s, "s")?,
                    sec.lambda
                        .ok_or_else(|| bad("instance.lambda", "required without a preset"))?,
                    None,
                )
            };
            if m == 0 || n == 0 {
                return Err(bad("instance", "m and n must be >= 1"));
            }
            if s == 0 || s > n {
                return Err(bad("instance.s", format!("must lie in 1..={n}, got {s}")));
            }
            if !(0.0..=1.0).contains(&lambda) {
                return Err(bad(
                    "instance.lambda",
                    format!("must lie in [0, 1], got {lambda}"),
                ));
            }
            Ok((
                InstanceSpec::Ensvm {
                    preset: sec.preset,
                    m,
                    n,
                    s,
                    lambda,
                    seed: sec.seed,
                },
                blocks,
                n,
            ))
        }
        InstanceKind::Synthetic | InstanceKind::Soc => {
            for (present, f) in [
                (sec.preset.is_some(), "preset"),
                (sec.m.is_some(), "m"),
                (sec.n.is_some(), "n"),
                (sec.s.is_some(), "s"),
                (sec.lambda.is_some(), "lambda"),
                (sec.path.is_some(), "path"),
            ] {
                reject(present, f)?;
            }
            let dim = sec.dim.ok_or_else(|| bad("instance.dim", "required"))?;
            let min = if kind == InstanceKind::Soc { 2 } else { 1 };
            if dim < min {
                return Err(bad("instance.dim", format!("must be >= {min}, got {dim}")));
            }
            let spec = if kind == InstanceKind::Soc {
                InstanceSpec::Soc {
                    dim,
                    seed: sec.seed,
                }
            } else {
                InstanceSpec::Synthetic {
                    dim,
                    seed: sec.seed,
                }
            };
            Ok((spec, None, dim))
        }
        InstanceKind::File => {
            for (present, f) in [
                (sec.preset.is_some(), "preset"),
                (sec.m.is_some(), "m"),
                (sec.n.is_some(), "n"),
                (sec.s.is_some(), "s"),
                (sec.lambda.is_some(), "lambda"),
                (sec.dim.is_some(), "dim"),
                (sec.seed.is_some(), "seed"),
            ] {
                reject(present, f)?;
            }
            let rel = sec.path.ok_or_else(|| bad("instance.path", "required"))?;
            let path = if rel.is_absolute() {
                rel
            } else {
                base.join(rel)
            };
            let inst = read_instance(&path)?;
            Ok((
                InstanceSpec::File { path },
                Some(vec![inst.n_blocks()]),
                inst.n,
            ))
        }
    }
}

pub fn read_instance(path: &Path) -> CliResult<EnsvmInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    EnsvmInstance::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolve_schedule(sec: ScheduleSection, algorithm: Algorithm) -> CliResult<ScheduleSpec> {
    let kind = sec.kind.unwrap_or(match algorithm {
        Algorithm::Spdc => ScheduleKindName::PowerLaw,
        Algorithm::Appal => ScheduleKindName::Constant,
    });
    let size = || -> CliResult<StepSize> {
        match (sec.scale, sec.fraction) {
            (Some(_), Some(_)) => Err(bad("solver.schedule", "give scale or fraction, not both")),
            (Some(s), None) => Ok(StepSize::Scale(s)),
            (None, Some(f)) => Ok(StepSize::Fraction(f)),
            (None, None) => Ok(StepSize::Fraction(0.5)),
        }
    };
    match kind {
        ScheduleKindName::PowerLaw => {
            if sec.steps.is_some() {
                return Err(bad(
                    "solver.schedule.steps",
                    "only used by explicit schedules",
                ));
            }
            let alpha = sec.alpha.unwrap_or(0.6);
            if !(alpha > 0.5 && alpha < 1.0) {
                return Err(bad(
                    "solver.schedule.alpha",
                    format!("must lie in (0.5, 1), got {alpha}"),
                ));
            }
            let offset = sec.offset.unwrap_or(1.0);
            if !(offset >= 1.0) || !offset.is_finite() {
                return Err(bad(
                    "solver.schedule.offset",
                    format!("must be >= 1, got {offset}"),
                ));
            }
            Ok(ScheduleSpec::PowerLaw {
                alpha,
                offset,
                size: check_size(size()?)?,
            })
        }
        ScheduleKindName::Constant => {
            if sec.alpha.is_some() || sec.offset.is_some() || sec.steps.is_some() {
                return Err(bad(
                    "solver.schedule",
                    "constant schedules take only scale or fraction",
                ));
            }
            Ok(ScheduleSpec::Constant {
                size: check_size(size()?)?,
            })
        }
        ScheduleKindName::Explicit => {
            if sec.alpha.is_some()
                || sec.offset.is_some()
                || sec.scale.is_some()
                || sec.fraction.is_some()
            {
                return Err(bad("solver.schedule", "explicit schedules take only steps"));
            }
            let steps = sec
                .steps
                .ok_or_else(|| bad("solver.schedule.steps", "required"))?;
            if steps.is_empty() || steps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                return Err(bad(
                    "solver.schedule.steps",
                    "must be a nonempty list of positive numbers",
                ));
            }
            if steps.windows(2).any(|w| w[1] > w[0]) {
                return Err(bad("solver.schedule.steps", "must be nonincreasing"));
            }
            Ok(ScheduleSpec::Explicit { steps })
        }
    }
}

fn check_size(size: StepSize) -> CliResult<StepSize> {
    match size {
        StepSize::Fraction(f) if !(f > 0.0 && f < 1.0) => Err(bad(
            "solver.schedule.fraction",
            format!("must lie in (0, 1), got {f}"),
        )),
        StepSize::Scale(s) if !(s > 0.0) || !s.is_finite() => Err(bad(
            "solver.schedule.scale",
            format!("must be > 0, got {s}"),
        )),
        ok => Ok(ok),
    }
}
