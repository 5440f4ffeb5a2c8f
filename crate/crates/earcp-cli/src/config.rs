//! Experiment configuration: one TOML document describing the stream, the
//! aggregators to race over it, the seeds, and an optional ablation grid.
//!
//! Parsing is strict: unknown keys fail with the TOML location, and all
//! range violations are collected into one list of human-readable errors,
//! each naming the offending field and its constraint.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use earcp::simulator::{AggregatorSpec, ExpertBehavior, ScenarioSpec};
use earcp::{EarcpConfig, Error, HedgeSchedule, LossKind, TaskMode};

/// The EarcpConfig fields an ablation grid may sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridParam {
    Beta,
    AlphaP,
    AlphaC,
    WMin,
    EtaS,
}

impl GridParam {
    /// Canonical axis order; grids always expand in this order.
    pub const ALL: [GridParam; 5] = [
        GridParam::Beta,
        GridParam::AlphaP,
        GridParam::AlphaC,
        GridParam::WMin,
        GridParam::EtaS,
    ];

    pub fn key(self) -> &'static str {
        match self {
            GridParam::Beta => "beta",
            GridParam::AlphaP => "alpha_p",
            GridParam::AlphaC => "alpha_c",
            GridParam::WMin => "w_min",
            GridParam::EtaS => "eta_s",
        }
    }

    pub fn apply(self, config: &mut EarcpConfig, value: f64) {
        match self {
            GridParam::Beta => config.beta = value,
            GridParam::AlphaP => config.alpha_p = value,
            GridParam::AlphaC => config.alpha_c = value,
            GridParam::WMin => config.w_min = value,
            GridParam::EtaS => config.eta_s = value,
        }
    }
}

/// Where the expert stream comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    /// Synthetic stream; the spec's seed is a placeholder replaced by each
    /// run's seed.
    Synthetic(ScenarioSpec),
    /// Externally produced stream in the long CSV layout.
    Csv {
        path: PathBuf,
        mode: TaskMode,
        expert_count: usize,
        dimension: usize,
    },
}

impl ScenarioSource {
    pub fn mode(&self) -> TaskMode {
        match self {
            ScenarioSource::Synthetic(spec) => spec.mode,
            ScenarioSource::Csv { mode, .. } => *mode,
        }
    }

    pub fn expert_count(&self) -> usize {
        match self {
            ScenarioSource::Synthetic(spec) => spec.expert_count,
            ScenarioSource::Csv { expert_count, .. } => *expert_count,
        }
    }

    pub fn change_points(&self) -> &[u64] {
        match self {
            ScenarioSource::Synthetic(spec) => &spec.change_points,
            ScenarioSource::Csv { .. } => &[],
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub loss: LossKind,
    pub output_dir: PathBuf,
    pub scenario: ScenarioSource,
    /// Aggregators in name order.
    pub aggregators: Vec<(String, AggregatorSpec)>,
    /// Grid axes in canonical parameter order; empty when no grid is given.
    pub grid: Vec<(GridParam, Vec<f64>)>,
}

/// One point of the expanded ablation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    /// `"default"` for the empty grid, otherwise `param=value` pairs joined
    /// with `;`, usable directly in file names and comma-separated summaries.
    pub label: String,
    pub overrides: Vec<(GridParam, f64)>,
}

impl GridCell {
    pub fn apply(&self, base: &EarcpConfig) -> EarcpConfig {
        let mut config = base.clone();
        for &(param, value) in &self.overrides {
            param.apply(&mut config, value);
        }
        config
    }
}

/// Expands grid axes into their cartesian product, first axis outermost.
/// An empty grid yields the single cell `"default"`.
pub fn grid_cells(grid: &[(GridParam, Vec<f64>)]) -> Vec<GridCell> {
    let mut cells = vec![GridCell {
        label: "default".to_string(),
        overrides: Vec::new(),
    }];
    for (param, values) in grid {
        let mut expanded = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for &value in values {
                let mut overrides = cell.overrides.clone();
                overrides.push((*param, value));
                expanded.push(GridCell {
                    label: String::new(),
                    overrides,
                });
            }
        }
        cells = expanded;
    }
    for cell in &mut cells {
        if !cell.overrides.is_empty() {
            cell.label = cell
                .overrides
                .iter()
                .map(|(p, v)| format!("{}={v:?}", p.key()))
                .collect::<Vec<_>>()
                .join(";");
        }
    }
    cells
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seeds: Vec<u64>,
    loss: String,
    loss_bound: Option<f64>,
    loss_clip: Option<f64>,
    output_dir: String,
    scenario: RawScenario,
    #[serde(default)]
    aggregator: BTreeMap<String, RawAggregator>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    csv_input: Option<String>,
    mode: Option<TaskMode>,
    expert_count: Option<usize>,
    dimension: Option<usize>,
    horizon: Option<u64>,
    change_points: Option<Vec<u64>>,
    delay: Option<u64>,
    #[serde(default)]
    experts: Vec<RawExpert>,
}

#[derive(Debug, Deserialize)]
struct RawExpert {
    /// How many identical experts this entry stands for (default 1).
    count: Option<usize>,
    #[serde(flatten)]
    behavior: ExpertBehavior,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAggregator {
    kind: String,
    // earcp knobs
    alpha_p: Option<f64>,
    alpha_c: Option<f64>,
    beta: Option<f64>,
    eta_s: Option<f64>,
    w_min: Option<f64>,
    s_max: Option<f64>,
    gamma: Option<f64>,
    epsilon: Option<f64>,
    norm_window: Option<usize>,
    coherence_sample_k: Option<usize>,
    hedge_compat: Option<bool>,
    hedge_eta: Option<f64>,
    // hedge knobs
    eta: Option<f64>,
    schedule: Option<String>,
    horizon: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    beta: Option<Vec<f64>>,
    alpha_p: Option<Vec<f64>>,
    alpha_c: Option<Vec<f64>>,
    w_min: Option<Vec<f64>>,
    eta_s: Option<Vec<f64>>,
}

impl RawGrid {
    fn axis(&self, param: GridParam) -> &Option<Vec<f64>> {
        match param {
            GridParam::Beta => &self.beta,
            GridParam::AlphaP => &self.alpha_p,
            GridParam::AlphaC => &self.alpha_c,
            GridParam::WMin => &self.w_min,
            GridParam::EtaS => &self.eta_s,
        }
    }
}

fn push_config_error(errors: &mut Vec<String>, context: &str, err: &Error) {
    match err {
        Error::Config { field, message } => errors.push(format!("{context}.{field}: {message}")),
        other => errors.push(format!("{context}: {other}")),
    }
}

fn parse_loss(raw: &RawConfig, errors: &mut Vec<String>) -> LossKind {
    let kind = match raw.loss.as_str() {
        "sq" => LossKind::ScaledSquaredError {
            bound: raw.loss_bound.unwrap_or(1.0),
        },
        "zero_one" => LossKind::ZeroOneArgmax,
        "xent" => LossKind::ClippedCrossEntropy {
            clip: raw.loss_clip.unwrap_or(0.01),
        },
        other => {
            errors.push(format!(
                "loss: unknown kind \"{other}\", expected \"sq\", \"zero_one\" or \"xent\""
            ));
            LossKind::ZeroOneArgmax
        }
    };
    if raw.loss_bound.is_some() && raw.loss != "sq" {
        errors.push("loss_bound: only meaningful for loss = \"sq\"".to_string());
    }
    if raw.loss_clip.is_some() && raw.loss != "xent" {
        errors.push("loss_clip: only meaningful for loss = \"xent\"".to_string());
    }
    if let Err(e) = kind.validate() {
        push_config_error(errors, "loss", &e);
    }
    kind
}

fn parse_scenario(raw: RawScenario, errors: &mut Vec<String>) -> Option<ScenarioSource> {
    let require = |errors: &mut Vec<String>, field: &str, missing: bool| {
        if missing {
            errors.push(format!("scenario.{field}: required"));
        }
    };
    if let Some(path) = &raw.csv_input {
        require(errors, "mode", raw.mode.is_none());
        require(errors, "expert_count", raw.expert_count.is_none());
        require(errors, "dimension", raw.dimension.is_none());
        for (field, set) in [
            ("horizon", raw.horizon.is_some()),
            ("change_points", raw.change_points.is_some()),
            ("delay", raw.delay.is_some()),
            ("experts", !raw.experts.is_empty()),
        ] {
            if set {
                errors.push(format!(
                    "scenario.{field}: not applicable with csv_input"
                ));
            }
        }
        if path.is_empty() {
            errors.push("scenario.csv_input: must not be empty".to_string());
        }
        let (mode, expert_count, dimension) = (raw.mode?, raw.expert_count?, raw.dimension?);
        if expert_count < 2 {
            errors.push(format!(
                "scenario.expert_count: need at least 2 experts, got {expert_count}"
            ));
        }
        let min_dimension = match mode {
            TaskMode::Classification => 2,
            TaskMode::Regression => 1,
        };
        if dimension < min_dimension {
            errors.push(format!(
                "scenario.dimension: must be >= {min_dimension} in this mode, got {dimension}"
            ));
        }
        return Some(ScenarioSource::Csv {
            path: PathBuf::from(path),
            mode,
            expert_count,
            dimension,
        });
    }

    require(errors, "mode", raw.mode.is_none());
    require(errors, "expert_count", raw.expert_count.is_none());
    require(errors, "dimension", raw.dimension.is_none());
    require(errors, "horizon", raw.horizon.is_none());
    require(errors, "experts", raw.experts.is_empty());
    let mut experts = Vec::new();
    for (i, entry) in raw.experts.into_iter().enumerate() {
        let count = entry.count.unwrap_or(1);
        if count == 0 {
            errors.push(format!("scenario.experts[{i}].count: must be >= 1"));
        }
        experts.extend(std::iter::repeat(entry.behavior).take(count));
    }
    let spec = ScenarioSpec {
        mode: raw.mode?,
        expert_count: raw.expert_count?,
        dimension: raw.dimension?,
        horizon: raw.horizon?,
        experts,
        change_points: raw.change_points.unwrap_or_default(),
        delay: raw.delay.unwrap_or(0),
        seed: 0,
    };
    if let Err(e) = spec.validate() {
        push_config_error(errors, "scenario", &e);
    }
    Some(ScenarioSource::Synthetic(spec))
}

fn earcp_fields_set(raw: &RawAggregator) -> Vec<&'static str> {
    let mut set = Vec::new();
    let checks: [(&'static str, bool); 12] = [
        ("alpha_p", raw.alpha_p.is_some()),
        ("alpha_c", raw.alpha_c.is_some()),
        ("beta", raw.beta.is_some()),
        ("eta_s", raw.eta_s.is_some()),
        ("w_min", raw.w_min.is_some()),
        ("s_max", raw.s_max.is_some()),
        ("gamma", raw.gamma.is_some()),
        ("epsilon", raw.epsilon.is_some()),
        ("norm_window", raw.norm_window.is_some()),
        ("coherence_sample_k", raw.coherence_sample_k.is_some()),
        ("hedge_compat", raw.hedge_compat.is_some()),
        ("hedge_eta", raw.hedge_eta.is_some()),
    ];
    for (name, is_set) in checks {
        if is_set {
            set.push(name);
        }
    }
    set
}

fn hedge_fields_set(raw: &RawAggregator) -> Vec<&'static str> {
    let mut set = Vec::new();
    for (name, is_set) in [
        ("eta", raw.eta.is_some()),
        ("schedule", raw.schedule.is_some()),
        ("horizon", raw.horizon.is_some()),
    ] {
        if is_set {
            set.push(name);
        }
    }
    set
}

fn parse_aggregator(
    name: &str,
    raw: &RawAggregator,
    errors: &mut Vec<String>,
) -> Option<AggregatorSpec> {
    let context = format!("aggregator.{name}");
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        errors.push(format!(
            "{context}: name must be non-empty and use only letters, digits, '_' or '-'"
        ));
    }
    match raw.kind.as_str() {
        "earcp" => {
            for field in hedge_fields_set(raw) {
                errors.push(format!(
                    "{context}.{field}: not applicable for kind \"earcp\""
                ));
            }
            let mut config = EarcpConfig::default();
            if let Some(v) = raw.alpha_p {
                config.alpha_p = v;
            }
            if let Some(v) = raw.alpha_c {
                config.alpha_c = v;
            }
            if let Some(v) = raw.beta {
                config.beta = v;
            }
            if let Some(v) = raw.eta_s {
                config.eta_s = v;
            }
            if let Some(v) = raw.w_min {
                config.w_min = v;
            }
            if let Some(v) = raw.s_max {
                config.s_max = v;
            }
            if let Some(v) = raw.gamma {
                config.gamma = v;
            }
            if let Some(v) = raw.epsilon {
                config.epsilon = v;
            }
            if let Some(v) = raw.norm_window {
                config.norm_window = v;
            }
            if raw.coherence_sample_k.is_some() {
                config.coherence_sample_k = raw.coherence_sample_k;
            }
            if let Some(v) = raw.hedge_compat {
                config.hedge_compat = v;
            }
            if let Some(v) = raw.hedge_eta {
                config.hedge_eta = v;
            }
            for (field, message) in config.validation_errors() {
                errors.push(format!("{context}.{field}: {message}"));
            }
            Some(AggregatorSpec::Earcp(config))
        }
        "hedge" => {
            for field in earcp_fields_set(raw) {
                errors.push(format!(
                    "{context}.{field}: not applicable for kind \"hedge\""
                ));
            }
            let set = hedge_fields_set(raw);
            if set.len() > 1 {
                errors.push(format!(
                    "{context}: give at most one of eta, schedule, horizon (got {})",
                    set.join(", ")
                ));
            }
            let schedule = if let Some(eta) = raw.eta {
                HedgeSchedule::Fixed(eta)
            } else if let Some(horizon) = raw.horizon {
                HedgeSchedule::Horizon(horizon)
            } else if let Some(schedule) = &raw.schedule {
                if schedule != "anytime" {
                    errors.push(format!(
                        "{context}.schedule: unknown value \"{schedule}\", expected \"anytime\" \
                         (use eta = ... or horizon = ... for the other schedules)"
                    ));
                }
                HedgeSchedule::Anytime
            } else {
                HedgeSchedule::Fixed(1.0)
            };
            if let Err(e) = schedule.validate() {
                push_config_error(errors, &context, &e);
            }
            Some(AggregatorSpec::Hedge(schedule))
        }
        "uniform" | "ftl" => {
            for field in earcp_fields_set(raw)
                .into_iter()
                .chain(hedge_fields_set(raw))
            {
                errors.push(format!(
                    "{context}.{field}: not applicable for kind \"{}\"",
                    raw.kind
                ));
            }
            Some(if raw.kind == "uniform" {
                AggregatorSpec::Uniform
            } else {
                AggregatorSpec::FollowTheLeader
            })
        }
        other => {
            errors.push(format!(
                "{context}.kind: unknown kind \"{other}\", expected \"earcp\", \"hedge\", \
                 \"uniform\" or \"ftl\""
            ));
            None
        }
    }
}

fn parse_grid(
    raw: &RawGrid,
    has_earcp: bool,
    errors: &mut Vec<String>,
) -> Vec<(GridParam, Vec<f64>)> {
    let mut grid = Vec::new();
    for param in GridParam::ALL {
        let Some(values) = raw.axis(param) else {
            continue;
        };
        let key = param.key();
        if values.is_empty() {
            errors.push(format!("grid.{key}: value list must not be empty"));
            continue;
        }
        for (i, &value) in values.iter().enumerate() {
            let mut probe = EarcpConfig::default();
            param.apply(&mut probe, value);
            for (field, message) in probe.validation_errors() {
                if field == key {
                    errors.push(format!("grid.{key}[{i}]: {message}"));
                }
            }
            if values[..i].contains(&value) {
                errors.push(format!("grid.{key}[{i}]: duplicate value {value}"));
            }
        }
        grid.push((param, values.clone()));
    }
    if !grid.is_empty() && !has_earcp {
        errors.push("grid: requires at least one aggregator of kind \"earcp\"".to_string());
    }
    grid
}

/// Parses and validates a config document. On failure returns every problem
/// found, each naming the field and the violated constraint; TOML syntax and
/// unknown-key errors carry their line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
    let mut errors = Vec::new();

    if raw.seeds.is_empty() {
        errors.push("seeds: need at least one seed".to_string());
    }
    for (i, seed) in raw.seeds.iter().enumerate() {
        if raw.seeds[..i].contains(seed) {
            errors.push(format!("seeds[{i}]: duplicate seed {seed}"));
        }
    }
    let loss = parse_loss(&raw, &mut errors);
    if raw.output_dir.is_empty() {
        errors.push("output_dir: must not be empty".to_string());
    }
    let scenario = parse_scenario(raw.scenario, &mut errors);

    if raw.aggregator.is_empty() {
        errors.push("aggregator: need at least one [aggregator.NAME] table".to_string());
    }
    let mut aggregators = Vec::with_capacity(raw.aggregator.len());
    for (name, raw_agg) in &raw.aggregator {
        if let Some(spec) = parse_aggregator(name, raw_agg, &mut errors) {
            aggregators.push((name.clone(), spec));
        }
    }
    let has_earcp = aggregators
        .iter()
        .any(|(_, spec)| matches!(spec, AggregatorSpec::Earcp(_)));
    let grid = match &raw.grid {
        Some(raw_grid) => parse_grid(raw_grid, has_earcp, &mut errors),
        None => Vec::new(),
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ExperimentConfig {
        seeds: raw.seeds,
        loss,
        output_dir: PathBuf::from(raw.output_dir),
        scenario: scenario.expect("scenario parsed when no errors were recorded"),
        aggregators,
        grid,
    })
}

fn render_behavior(behavior: &ExpertBehavior, out: &mut String) {
    out.push_str("[[scenario.experts]]\n");
    match behavior {
        ExpertBehavior::Accurate { noise } => {
            out.push_str("behavior = \"accurate\"\n");
            out.push_str(&format!("noise = {noise:?}\n"));
        }
        ExpertBehavior::Biased { offset } => {
            out.push_str("behavior = \"biased\"\n");
            out.push_str(&format!("offset = {offset:?}\n"));
        }
        ExpertBehavior::RandomGuess => {
            out.push_str("behavior = \"random_guess\"\n");
        }
        ExpertBehavior::CollusiveWrong { group, agree_prob } => {
            out.push_str("behavior = \"collusive_wrong\"\n");
            out.push_str(&format!("group = {group}\n"));
            out.push_str(&format!("agree_prob = {agree_prob:?}\n"));
        }
    }
}

fn render_mode(mode: TaskMode) -> &'static str {
    match mode {
        TaskMode::Classification => "classification",
        TaskMode::Regression => "regression",
    }
}

/// Renders a config back to TOML such that `parse_config(render_config(c))`
/// returns `c` exactly.
pub fn render_config(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("seeds = {:?}\n", config.seeds));
    match &config.loss {
        LossKind::ScaledSquaredError { bound } => {
            out.push_str("loss = \"sq\"\n");
            out.push_str(&format!("loss_bound = {bound:?}\n"));
        }
        LossKind::ZeroOneArgmax => out.push_str("loss = \"zero_one\"\n"),
        LossKind::ClippedCrossEntropy { clip } => {
            out.push_str("loss = \"xent\"\n");
            out.push_str(&format!("loss_clip = {clip:?}\n"));
        }
    }
    out.push_str(&format!(
        "output_dir = {:?}\n\n",
        config.output_dir.display().to_string()
    ));

    out.push_str("[scenario]\n");
    match &config.scenario {
        ScenarioSource::Synthetic(spec) => {
            out.push_str(&format!("mode = \"{}\"\n", render_mode(spec.mode)));
            out.push_str(&format!("expert_count = {}\n", spec.expert_count));
            out.push_str(&format!("dimension = {}\n", spec.dimension));
            out.push_str(&format!("horizon = {}\n", spec.horizon));
            out.push_str(&format!("change_points = {:?}\n", spec.change_points));
            out.push_str(&format!("delay = {}\n", spec.delay));
            out.push('\n');
            for behavior in &spec.experts {
                render_behavior(behavior, &mut out);
                out.push('\n');
            }
        }
        ScenarioSource::Csv {
            path,
            mode,
            expert_count,
            dimension,
        } => {
            out.push_str(&format!(
                "csv_input = {:?}\n",
                path.display().to_string()
            ));
            out.push_str(&format!("mode = \"{}\"\n", render_mode(*mode)));
            out.push_str(&format!("expert_count = {expert_count}\n"));
            out.push_str(&format!("dimension = {dimension}\n"));
            out.push('\n');
        }
    }

    for (name, spec) in &config.aggregators {
        out.push_str(&format!("[aggregator.{name}]\n"));
        match spec {
            AggregatorSpec::Earcp(c) => {
                out.push_str("kind = \"earcp\"\n");
                out.push_str(&format!("alpha_p = {:?}\n", c.alpha_p));
                out.push_str(&format!("alpha_c = {:?}\n", c.alpha_c));
                out.push_str(&format!("beta = {:?}\n", c.beta));
                out.push_str(&format!("eta_s = {:?}\n", c.eta_s));
                out.push_str(&format!("w_min = {:?}\n", c.w_min));
                out.push_str(&format!("s_max = {:?}\n", c.s_max));
                out.push_str(&format!("gamma = {:?}\n", c.gamma));
                out.push_str(&format!("epsilon = {:?}\n", c.epsilon));
                out.push_str(&format!("norm_window = {}\n", c.norm_window));
                if let Some(k) = c.coherence_sample_k {
                    out.push_str(&format!("coherence_sample_k = {k}\n"));
                }
                out.push_str(&format!("hedge_compat = {}\n", c.hedge_compat));
                out.push_str(&format!("hedge_eta = {:?}\n", c.hedge_eta));
            }
            AggregatorSpec::Hedge(schedule) => {
                out.push_str("kind = \"hedge\"\n");
                match schedule {
                    HedgeSchedule::Fixed(eta) => out.push_str(&format!("eta = {eta:?}\n")),
                    HedgeSchedule::Horizon(t) => out.push_str(&format!("horizon = {t}\n")),
                    HedgeSchedule::Anytime => out.push_str("schedule = \"anytime\"\n"),
                }
            }
            AggregatorSpec::Uniform => out.push_str("kind = \"uniform\"\n"),
            AggregatorSpec::FollowTheLeader => out.push_str("kind = \"ftl\"\n"),
        }
        out.push('\n');
    }

    if !config.grid.is_empty() {
        out.push_str("[grid]\n");
        for (param, values) in &config.grid {
            out.push_str(&format!("{} = {values:?}\n", param.key()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [1]
loss = "zero_one"
output_dir = "out"

[scenario]
mode = "classification"
expert_count = 2
dimension = 3
horizon = 10

[[scenario.experts]]
behavior = "accurate"
noise = 0.0

[[scenario.experts]]
behavior = "random_guess"

[aggregator.base]
kind = "uniform"
"#;

    #[test]
    fn minimal_config_parses() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.seeds, vec![1]);
        assert_eq!(config.loss, LossKind::ZeroOneArgmax);
        assert_eq!(config.aggregators.len(), 1);
        assert!(matches!(config.aggregators[0].1, AggregatorSpec::Uniform));
        match &config.scenario {
            ScenarioSource::Synthetic(spec) => {
                assert_eq!(spec.expert_count, 2);
                assert_eq!(spec.seed, 0);
            }
            other => panic!("expected synthetic scenario, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_beta_is_named_with_its_range() {
        let text = MINIMAL.replace(
            "kind = \"uniform\"",
            "kind = \"earcp\"\nbeta = 1.5",
        );
        let errors = parse_config(&text).unwrap_err();
        let joined = errors.join("\n");
        assert!(joined.contains("beta"), "{joined}");
        assert!(joined.contains("[0, 1]"), "{joined}");
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = r#"
seeds = []
loss = "huber"
output_dir = ""

[scenario]
mode = "classification"
expert_count = 2
dimension = 3
horizon = 10

[[scenario.experts]]
behavior = "random_guess"
count = 2

[aggregator.a]
kind = "earcp"
beta = -0.25
eta_s = 0.0
"#;
        let errors = parse_config(text).unwrap_err();
        let joined = errors.join("\n");
        for needle in ["seeds", "loss", "output_dir", "beta", "eta_s"] {
            assert!(joined.contains(needle), "missing {needle} in:\n{joined}");
        }
        assert!(errors.len() >= 5);
    }

    #[test]
    fn unknown_keys_fail_with_location() {
        let text = MINIMAL.replace("loss = \"zero_one\"", "loss = \"zero_one\"\nlosss = 3");
        let errors = parse_config(&text).unwrap_err();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].contains("losss"), "{}", errors[0]);
        assert!(errors[0].contains("line"), "{}", errors[0]);
    }

    #[test]
    fn expert_count_sugar_expands() {
        let text = MINIMAL
            .replace("expert_count = 2", "expert_count = 7")
            .replace(
                "behavior = \"random_guess\"",
                "behavior = \"random_guess\"\ncount = 6",
            );
        let config = parse_config(&text).unwrap();
        match &config.scenario {
            ScenarioSource::Synthetic(spec) => {
                assert_eq!(spec.experts.len(), 7);
                assert_eq!(spec.experts[0], ExpertBehavior::Accurate { noise: 0.0 });
                assert_eq!(spec.experts[6], ExpertBehavior::RandomGuess);
            }
            other => panic!("expected synthetic scenario, got {other:?}"),
        }
    }

    #[test]
    fn six_beta_values_expand_to_six_cells() {
        let text = format!(
            "{}\n[grid]\nbeta = [0.0, 0.3, 0.5, 0.7, 0.9, 1.0]\n",
            MINIMAL.replace("kind = \"uniform\"", "kind = \"earcp\"")
        );
        let config = parse_config(&text).unwrap();
        let cells = grid_cells(&config.grid);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].label, "beta=0.0");
        assert_eq!(cells[5].label, "beta=1.0");
        let applied = cells[1].apply(&EarcpConfig::default());
        assert_eq!(applied.beta, 0.3);
    }

    #[test]
    fn full_ablation_grid_expands_to_384_cells() {
        let text = format!(
            "{}\n[grid]\nbeta = [0.0, 0.3, 0.5, 0.7, 0.9, 1.0]\nalpha_p = [0.7, 0.8, 0.9, 0.95]\nalpha_c = [0.7, 0.8, 0.9, 0.95]\nw_min = [0.0, 0.01, 0.05, 0.1]\n",
            MINIMAL.replace("kind = \"uniform\"", "kind = \"earcp\"")
        );
        let config = parse_config(&text).unwrap();
        assert_eq!(grid_cells(&config.grid).len(), 384);
    }

    #[test]
    fn grid_without_an_earcp_aggregator_is_rejected() {
        let text = format!("{}\n[grid]\nbeta = [0.5]\n", MINIMAL);
        let errors = parse_config(&text).unwrap_err();
        assert!(errors.iter().any(|e| e.starts_with("grid:")), "{errors:?}");
    }

    #[test]
    fn grid_rejects_out_of_range_and_duplicate_values() {
        let text = format!(
            "{}\n[grid]\nbeta = [0.5, 1.5, 0.5]\n",
            MINIMAL.replace("kind = \"uniform\"", "kind = \"earcp\"")
        );
        let errors = parse_config(&text).unwrap_err();
        let joined = errors.join("\n");
        assert!(joined.contains("grid.beta[1]"), "{joined}");
        assert!(joined.contains("duplicate"), "{joined}");
    }

    #[test]
    fn hedge_options_are_mutually_exclusive() {
        let text = MINIMAL.replace(
            "kind = \"uniform\"",
            "kind = \"hedge\"\neta = 0.5\nhorizon = 100",
        );
        let errors = parse_config(&text).unwrap_err();
        assert!(errors[0].contains("at most one"), "{errors:?}");
    }

    #[test]
    fn baseline_aggregators_reject_earcp_knobs() {
        let text = MINIMAL.replace("kind = \"uniform\"", "kind = \"uniform\"\nbeta = 0.5");
        let errors = parse_config(&text).unwrap_err();
        assert!(errors[0].contains("not applicable"), "{errors:?}");
    }

    #[test]
    fn csv_scenarios_need_their_shape_declared() {
        let text = r#"
seeds = [1]
loss = "zero_one"
output_dir = "out"

[scenario]
csv_input = "stream.csv"

[aggregator.base]
kind = "uniform"
"#;
        let errors = parse_config(text).unwrap_err();
        let joined = errors.join("\n");
        for needle in ["scenario.mode", "scenario.expert_count", "scenario.dimension"] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
    }

    #[test]
    fn rendered_configs_parse_back_to_themselves() {
        let text = format!(
            "{}\n[aggregator.main]\nkind = \"earcp\"\nbeta = 0.5\ncoherence_sample_k = 1\n\n[aggregator.h]\nkind = \"hedge\"\nhorizon = 500\n\n[aggregator.anytime]\nkind = \"hedge\"\nschedule = \"anytime\"\n\n[aggregator.f]\nkind = \"ftl\"\n\n[grid]\nbeta = [0.0, 0.5, 1.0]\nw_min = [0.0, 0.05]\n",
            MINIMAL
        );
        let config = parse_config(&text).unwrap();
        let rendered = render_config(&config);
        let reparsed = parse_config(&rendered).unwrap_or_else(|e| {
            panic!("rendered config failed to parse: {e:?}\n{rendered}")
        });
        assert_eq!(reparsed, config);

        let csv_text = r#"
seeds = [3, 9]
loss = "sq"
loss_bound = 2.0
output_dir = "out"

[scenario]
csv_input = "stream.csv"
mode = "regression"
expert_count = 4
dimension = 2

[aggregator.base]
kind = "uniform"
"#;
        let config = parse_config(csv_text).unwrap();
        let reparsed = parse_config(&render_config(&config)).unwrap();
        assert_eq!(reparsed, config);
    }
}
