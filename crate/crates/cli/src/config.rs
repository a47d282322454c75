//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use drmic_core::ambiguity::{load_samples, EventWiseSet, MixedMomentSet, Scenario, WassersteinSet};
use drmic_core::inventory_bench::{self, InventorySpec};
use drmic_core::lifting::{DisturbanceSpace, Lifting};
use drmic_core::reformulation::{build_event_wise, build_mixed_moment, build_wasserstein, Instance, ReformOptions, Reformulation};
use drmic_core::system_model::{ChannelInfo, CompileOptions, CostPiece, Matrix, SystemModel, Term};
use drmic_milp::MilpOptions;
use serde::Deserialize;

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "DRMIC_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] drmic_core::Error),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub lifting: Option<LiftingBlock>,
    #[serde(default)]
    pub ambiguity: Option<AmbiguityBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub preset: Option<String>,
    pub inventory: Option<InventoryBlock>,
    pub system: Option<SystemBlock>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryBlock {
    pub horizon: Option<usize>,
    pub holding_cost: Option<f64>,
    pub booking_cost: Option<f64>,
    pub lot_prices: Option<Vec<f64>>,
    pub lot_sizes: Option<Vec<f64>>,
    pub x0: Option<f64>,
    pub support: Option<[f64; 2]>,
    pub means: Option<Vec<f64>>,
    pub std_dev: Option<f64>,
    pub samples: Option<usize>,
    pub reference_samples: Option<usize>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    #[serde(default)]
    pub ng: usize,
    pub nxi: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// One entry per stage, or a single entry used for every stage.
    pub stages: Vec<StageBlock>,
    #[serde(default)]
    pub constraints: Vec<ConstraintBlock>,
    #[serde(default)]
    pub u_info: Option<Vec<ChannelBlock>>,
    #[serde(default)]
    pub g_info: Option<Vec<ChannelBlock>>,
    pub support_lower: Vec<f64>,
    pub support_upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageBlock {
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub discount: f64,
    #[serde(default)]
    pub cost: Vec<CostBlock>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintBlock {
    pub name: String,
    pub terms: Vec<TermBlock>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    State,
    Control,
    Integer,
    Disturbance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermBlock {
    pub kind: TermKind,
    pub stage: usize,
    pub index: usize,
    pub coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBlock {
    #[serde(default)]
    pub delay: usize,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftingBlock {
    /// Equal division into this many segments per dimension.
    pub segments: Option<usize>,
    /// Full breakpoint lists, one per flat dimension (stage-major).
    pub breakpoints: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityKind {
    Wasserstein,
    MixedMoment,
    EventWise,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbiguityBlock {
    pub kind: AmbiguityKind,
    pub theta: Option<f64>,
    /// CSV file, relative to the config file.
    pub samples_file: Option<PathBuf>,
    pub samples: Option<Vec<Vec<f64>>>,
    pub moment_lower: Option<Vec<f64>>,
    pub moment_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub probability: f64,
    pub theta: f64,
    pub support_lower: Vec<f64>,
    pub support_upper: Vec<f64>,
    pub segments: Option<usize>,
    pub breakpoints: Option<Vec<Vec<f64>>>,
    pub samples_file: Option<PathBuf>,
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_gap")]
    pub gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit_s: Option<f64>,
    #[serde(default = "default_bound")]
    pub integer_bound: f64,
    /// Shell command with `{model}` and `{solution}` placeholders.
    pub external: Option<String>,
}

fn default_gap() -> f64 {
    1e-3
}

fn default_bound() -> f64 {
    10.0
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            gap: default_gap(),
            node_limit: None,
            time_limit_s: None,
            integer_bound: default_bound(),
            external: None,
        }
    }
}

impl SolverBlock {
    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap: self.gap,
            node_limit: self.node_limit,
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            ..MilpOptions::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    /// Relative to the directory of the config file.
    pub dir: PathBuf,
    #[serde(default = "default_policy")]
    pub policy: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_policy() -> String {
    "policy.txt".into()
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            policy: default_policy(),
        }
    }
}

impl OutputBlock {
    /// `DRMIC_OUT_DIR` if set, else `dir` relative to the config file.
    pub fn resolved_dir(&self, base: &Path) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV).map_or_else(|| base.join(&self.dir), PathBuf::from)
    }
}

/// Config with the directory it was read from, for relative paths.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse(&text).map_err(|message| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    })?;
    Ok(LoadedConfig {
        config,
        base: path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    })
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    let m = &config.model;
    match (&m.preset, &m.system) {
        (Some(_), Some(_)) => return Err("model: give either `preset` or `system`, not both".into()),
        (None, None) => return Err("model: one of `preset` or `system` is required".into()),
        (Some(p), None) if p != "inventory" => return Err(format!("model.preset: unknown preset `{p}`")),
        (None, Some(_)) if m.inventory.is_some() => return Err("model.inventory: only valid with preset = \"inventory\"".into()),
        _ => {}
    }
    Ok(config)
}

/// A configured problem ready to be reformulated.
#[derive(Debug, Clone)]
pub enum Problem {
    Wasserstein(Instance, WassersteinSet),
    MixedMoment(Instance, MixedMomentSet),
    EventWise(Vec<Instance>, EventWiseSet),
}

impl Problem {
    pub fn reformulate(&self, options: &ReformOptions) -> drmic_core::Result<Reformulation> {
        match self {
            Problem::Wasserstein(i, s) => build_wasserstein(i, s, options),
            Problem::MixedMoment(i, s) => build_mixed_moment(i, s, options),
            Problem::EventWise(is, s) => build_event_wise(is, s, options),
        }
    }

    pub fn instances(&self) -> Vec<&Instance> {
        match self {
            Problem::Wasserstein(i, _) | Problem::MixedMoment(i, _) => vec![i],
            Problem::EventWise(is, _) => is.iter().collect(),
        }
    }
}

fn invalid(m: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(m.into())
}

fn matrix(field: &str, rows: usize, cols: usize, data: &Option<Vec<Vec<f64>>>) -> Result<Matrix, ConfigError> {
    match data {
        None => Ok(Matrix::zeros(rows, cols)),
        Some(d) => Matrix::from_rows(rows, cols, d).map_err(|e| invalid(format!("{field}: {e}"))),
    }
}

fn vector(field: &str, n: usize, data: &Option<Vec<f64>>) -> Result<Vec<f64>, ConfigError> {
    match data {
        None => Ok(vec![0.0; n]),
        Some(v) if v.len() == n => Ok(v.clone()),
        Some(v) => Err(invalid(format!("{field}: expected {n} entries, found {}", v.len()))),
    }
}

fn system(b: &SystemBlock) -> Result<SystemModel, ConfigError> {
    let mut sys = SystemModel::new(b.horizon, b.nx, b.nu, b.ng, b.nxi);
    if let Some(x0) = &b.x0 {
        sys.x0 = vector("model.system.x0", b.nx, &Some(x0.clone()))?;
    }
    if b.stages.len() != b.horizon && b.stages.len() != 1 {
        return Err(invalid(format!(
            "model.system.stages: expected 1 or {} entries, found {}",
            b.horizon,
            b.stages.len()
        )));
    }
    for t in 0..b.horizon {
        let sb = &b.stages[if b.stages.len() == 1 { 0 } else { t }];
        let f = |name: &str| format!("model.system.stages[{t}].{name}");
        let st = &mut sys.stages[t];
        st.a = matrix(&f("a"), b.nx, b.nx, &sb.a)?;
        st.b = matrix(&f("b"), b.nx, b.nu, &sb.b)?;
        st.c = matrix(&f("c"), b.nx, b.ng, &sb.c)?;
        st.d = matrix(&f("d"), b.nx, b.nxi, &sb.d)?;
        st.discount = sb.discount;
        if !sb.cost.is_empty() {
            st.cost = sb
                .cost
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    Ok(CostPiece {
                        x: vector(&f(&format!("cost[{k}].x")), b.nx, &c.x)?,
                        u: vector(&f(&format!("cost[{k}].u")), b.nu, &c.u)?,
                        g: vector(&f(&format!("cost[{k}].g")), b.ng, &c.g)?,
                        constant: c.constant,
                    })
                })
                .collect::<Result<_, ConfigError>>()?;
        }
    }
    for c in &b.constraints {
        let terms = c
            .terms
            .iter()
            .map(|t| {
                let term = match t.kind {
                    TermKind::State => Term::State { stage: t.stage, index: t.index },
                    TermKind::Control => Term::Control { stage: t.stage, index: t.index },
                    TermKind::Integer => Term::Integer { stage: t.stage, index: t.index },
                    TermKind::Disturbance => Term::Disturbance { stage: t.stage, index: t.index },
                };
                (term, t.coeff)
            })
            .collect();
        sys.add_constraint(c.name.clone(), terms, c.rhs);
    }
    let channels = |field: &str, n: usize, info: &Option<Vec<ChannelBlock>>| -> Result<Vec<ChannelInfo>, ConfigError> {
        match info {
            None => Ok(vec![ChannelInfo::default(); n]),
            Some(v) if v.len() == n => Ok(v
                .iter()
                .map(|c| ChannelInfo {
                    delay: c.delay,
                    dims: c.dims.clone(),
                })
                .collect()),
            Some(v) => Err(invalid(format!("{field}: expected {n} entries, found {}", v.len()))),
        }
    };
    sys.u_info = channels("model.system.u_info", b.nu, &b.u_info)?;
    sys.g_info = channels("model.system.g_info", b.ng, &b.g_info)?;
    sys.validate().map_err(|e| invalid(format!("model.system: {e}")))?;
    Ok(sys)
}

fn lifting(space: DisturbanceSpace, segments: Option<usize>, breakpoints: &Option<Vec<Vec<f64>>>, field: &str) -> Result<Lifting, ConfigError> {
    let l = match (segments, breakpoints) {
        (Some(p), None) => Lifting::equal_division(space, p),
        (None, Some(w)) => Lifting::new(space, w.clone()),
        (None, None) => Lifting::equal_division(space, 1),
        (Some(_), Some(_)) => return Err(invalid(format!("{field}: give either `segments` or `breakpoints`"))),
    };
    l.map_err(|e| invalid(format!("{field}: {e}")))
}

fn samples(base: &Path, file: &Option<PathBuf>, inline: &Option<Vec<Vec<f64>>>, space: &DisturbanceSpace, field: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    match (file, inline) {
        (Some(f), None) => load_samples(base.join(f), space).map_err(|e| invalid(format!("{field}.samples_file: {e}"))),
        (None, Some(s)) => Ok(s.clone()),
        _ => Err(invalid(format!("{field}: exactly one of `samples_file` or `samples` is required"))),
    }
}

impl LoadedConfig {
    /// Inventory parameters with the config overrides applied.
    pub fn inventory_spec(&self, seed: Option<u64>) -> Result<InventorySpec, ConfigError> {
        let mut s = InventorySpec::default();
        let b = self.config.model.inventory.clone().unwrap_or_default();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = b.$f.clone() { s.$f = v; } )* };
        }
        set!(horizon, holding_cost, booking_cost, lot_prices, lot_sizes, x0, means, std_dev, samples, reference_samples, seed);
        if let Some([l, v]) = b.support {
            s.support = (l, v);
        }
        s.theta = b.theta;
        if let Some(seed) = seed {
            s.seed = seed;
        }
        if let Some(l) = &self.config.lifting {
            if l.breakpoints.is_some() {
                return Err(invalid("lifting.breakpoints: the inventory preset uses equal division; give `segments`"));
            }
            s.segments = l.segments.unwrap_or(1);
        }
        s.integer_bound = self.config.solver.integer_bound;
        s.validate().map_err(|e| invalid(format!("model.inventory: {e}")))?;
        Ok(s)
    }

    pub fn problem(&self, seed: Option<u64>) -> Result<Problem, ConfigError> {
        let c = &self.config;
        let compile = CompileOptions::default();
        if c.model.preset.is_some() {
            if c.ambiguity.is_some() {
                return Err(invalid("ambiguity: the inventory preset draws its own samples; remove this block"));
            }
            let spec = self.inventory_spec(seed)?;
            let p = inventory_bench::build(&spec)?;
            return Ok(Problem::Wasserstein(Instance::new(p.system, p.lifting, &compile)?, p.set));
        }
        let sb = c.model.system.as_ref().expect("checked at parse time");
        let sys = system(sb)?;
        let amb = c.ambiguity.as_ref().ok_or_else(|| invalid("ambiguity: block is required for an explicit model"))?;
        if amb.kind == AmbiguityKind::EventWise {
            if amb.scenarios.is_empty() {
                return Err(invalid("ambiguity.scenarios: at least one scenario is required"));
            }
            let mut instances = Vec::new();
            let mut scenarios = Vec::new();
            for (l, sc) in amb.scenarios.iter().enumerate() {
                let field = format!("ambiguity.scenarios[{l}]");
                let space = DisturbanceSpace::new(sb.horizon, sb.nxi, sc.support_lower.clone(), sc.support_upper.clone())
                    .map_err(|e| invalid(format!("{field}: {e}")))?;
                let lift = lifting(space.clone(), sc.segments, &sc.breakpoints, &field)?;
                let smp = samples(&self.base, &sc.samples_file, &sc.samples, &space, &field)?;
                let ball = WassersteinSet::new(sc.theta, smp, &space).map_err(|e| invalid(format!("{field}: {e}")))?;
                instances.push(Instance::new(sys.clone(), lift.clone(), &compile)?);
                scenarios.push(Scenario {
                    probability: sc.probability,
                    lifting: lift,
                    ball,
                });
            }
            let set = EventWiseSet::new(scenarios).map_err(|e| invalid(format!("ambiguity: {e}")))?;
            return Ok(Problem::EventWise(instances, set));
        }
        let space = DisturbanceSpace::new(sb.horizon, sb.nxi, sb.support_lower.clone(), sb.support_upper.clone())
            .map_err(|e| invalid(format!("model.system.support: {e}")))?;
        let lb = c.lifting.clone().unwrap_or(LiftingBlock {
            segments: None,
            breakpoints: None,
        });
        let lift = lifting(space.clone(), lb.segments, &lb.breakpoints, "lifting")?;
        let smp = samples(&self.base, &amb.samples_file, &amb.samples, &space, "ambiguity")?;
        let theta = amb.theta.ok_or_else(|| invalid("ambiguity.theta: required"))?;
        let ball = WassersteinSet::new(theta, smp, &space).map_err(|e| invalid(format!("ambiguity: {e}")))?;
        let inst = Instance::new(sys, lift, &compile)?;
        match amb.kind {
            AmbiguityKind::Wasserstein => Ok(Problem::Wasserstein(inst, ball)),
            AmbiguityKind::MixedMoment => {
                let (Some(lo), Some(hi)) = (&amb.moment_lower, &amb.moment_upper) else {
                    return Err(invalid("ambiguity: `moment_lower` and `moment_upper` are required for mixed_moment"));
                };
                let set = MixedMomentSet::new(ball, lo.clone(), hi.clone(), &space).map_err(|e| invalid(format!("ambiguity: {e}")))?;
                Ok(Problem::MixedMoment(inst, set))
            }
            AmbiguityKind::EventWise => unreachable!(),
        }
    }

    pub fn reform_options(&self) -> ReformOptions {
        ReformOptions {
            integer_bound: self.config.solver.integer_bound,
            ..ReformOptions::default()
        }
    }
}
