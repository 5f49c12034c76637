//! Run configuration: defaults, config-file keys, flag overrides, and the
//! manifest that records what a run actually used.
//!
//! Precedence is defaults < config file < command-line flags. The config
//! file is flat `key = value` text; keys use the flag names with
//! underscores. Unknown keys are errors so typos cannot silently fall back
//! to defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use concord_core::hypothesis::{AggregatorKind, Hypothesis, PairOrientation, Variant};
use concord_core::similarity::Metric;
use concord_core::EvalUnit;
use serde_json::{json, Value};

/// How correctness labels are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Labeler {
    /// Labels must already be present on every generation.
    External,
    /// Label each generation by its best reference Rouge-L F1 against the
    /// given threshold.
    RougeL(f64),
}

impl fmt::Display for Labeler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Labeler::External => f.write_str("external"),
            Labeler::RougeL(t) => write!(f, "rougel:{t}"),
        }
    }
}

impl FromStr for Labeler {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "external" {
            return Ok(Labeler::External);
        }
        if let Some(raw) = s.strip_prefix("rougel:") {
            let threshold: f64 = raw
                .parse()
                .with_context(|| format!("bad rouge-l threshold {raw:?}"))?;
            if !(0.0..=1.0).contains(&threshold) {
                bail!("rouge-l threshold {threshold} is outside [0, 1]");
            }
            return Ok(Labeler::RougeL(threshold));
        }
        bail!("unknown labeler {s:?}, expected external or rougel:<threshold>");
    }
}

/// Group-count grid selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupSpec {
    /// 1 plus 20 log-spaced counts up to the instance count.
    Auto,
    Explicit(Vec<usize>),
}

impl GroupSpec {
    pub fn resolve(&self, n_instances: usize) -> Result<Vec<usize>> {
        match self {
            GroupSpec::Auto => Ok(concord_core::default_grid(n_instances)),
            GroupSpec::Explicit(values) => {
                let mut grid = values.clone();
                grid.sort_unstable();
                grid.dedup();
                if grid.first() == Some(&0) || grid.last().is_some_and(|&g| g > n_instances) {
                    bail!(
                        "group counts must lie in [1, {n_instances}], got {:?}",
                        values
                    );
                }
                Ok(grid)
            }
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Auto => f.write_str("auto"),
            GroupSpec::Explicit(v) => {
                let parts: Vec<String> = v.iter().map(|g| g.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for GroupSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(GroupSpec::Auto);
        }
        let values = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad group count {part:?}"))
            })
            .collect::<Result<Vec<usize>>>()?;
        if values.is_empty() {
            bail!("group list is empty");
        }
        Ok(GroupSpec::Explicit(values))
    }
}

/// Flags shared by the pipeline subcommands. Every option defaults through
/// [`RunConfig`]; a flag given here beats the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Corpus JSONL path
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Flat key=value config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Similarity metric: jaccard, rouge1, rougel, or cosine
    #[arg(long)]
    pub similarity: Option<String>,
    /// Aggregation function: arith, geom, or harm
    #[arg(long)]
    pub aggregator: Option<String>,
    /// Positive-value floor for geometric/harmonic aggregation
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Hypothesis selector: 1, 2, 3, or all
    #[arg(long)]
    pub hypothesis: Option<String>,
    /// Set construction: pairwise, aggregated, or both
    #[arg(long)]
    pub variant: Option<String>,
    /// Label source: external or rougel:<threshold>
    #[arg(long)]
    pub labeler: Option<String>,
    /// Significance level for the one-sided tests
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Random splits per group count
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Group-count grid: comma list or auto
    #[arg(long)]
    pub groups: Option<String>,
    /// Verification-rate threshold defining theta-star
    #[arg(long)]
    pub rho_threshold: Option<f64>,
    /// Fraction of units drawn per evaluation subset
    #[arg(long)]
    pub subset_fraction: Option<f64>,
    /// Number of evaluation subsets
    #[arg(long)]
    pub eval_runs: Option<usize>,
    /// Root seed; all randomness derives from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Pairwise set orientation: ordered or unordered
    #[arg(long)]
    pub pair_orientation: Option<String>,
    /// Include self-similarity in aggregation pools
    #[arg(long)]
    pub include_self: Option<bool>,
    /// Subset sampling unit: generation or instance
    #[arg(long)]
    pub eval_unit: Option<String>,
    /// Directory for per-instance similarity matrix CSVs
    #[arg(long)]
    pub matrix_cache: Option<PathBuf>,
    /// Free-form tag recorded in the manifest
    #[arg(long)]
    pub task_tag: Option<String>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub task_tag: String,
    pub similarity: Metric,
    pub aggregator: AggregatorKind,
    pub epsilon: f64,
    pub hypotheses: Vec<Hypothesis>,
    pub variants: Vec<Variant>,
    pub labeler: Labeler,
    pub alpha: f64,
    pub repetitions: usize,
    pub groups: GroupSpec,
    pub rho_threshold: f64,
    pub subset_fraction: f64,
    pub eval_runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub pair_orientation: PairOrientation,
    pub include_self: bool,
    pub eval_unit: EvalUnit,
    pub matrix_cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("corpus.jsonl"),
            task_tag: "default".to_string(),
            similarity: Metric::Jaccard,
            aggregator: AggregatorKind::Arithmetic,
            epsilon: 1e-12,
            hypotheses: Hypothesis::ALL.to_vec(),
            variants: vec![Variant::Pairwise],
            labeler: Labeler::External,
            alpha: 0.05,
            repetitions: 10,
            groups: GroupSpec::Auto,
            rho_threshold: 0.8,
            subset_fraction: 0.5,
            eval_runs: 5,
            seed: 0,
            out: PathBuf::from("out"),
            threads: 0,
            pair_orientation: PairOrientation::Ordered,
            include_self: false,
            eval_unit: EvalUnit::Generation,
            matrix_cache: None,
        }
    }
}

fn parse_hypotheses(s: &str) -> Result<Vec<Hypothesis>> {
    if s == "all" {
        return Ok(Hypothesis::ALL.to_vec());
    }
    Ok(vec![s.parse::<Hypothesis>()?])
}

fn parse_variants(s: &str) -> Result<Vec<Variant>> {
    match s {
        "both" => Ok(vec![Variant::Pairwise, Variant::Aggregated]),
        other => Ok(vec![other.parse::<Variant>()?]),
    }
}

/// Parses a flat `key = value` file. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected key = value, got {raw:?}",
                path.display(),
                number + 1
            );
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: [&str; 21] = [
    "input",
    "task_tag",
    "similarity",
    "aggregator",
    "epsilon",
    "hypothesis",
    "variant",
    "labeler",
    "alpha",
    "repetitions",
    "groups",
    "rho_threshold",
    "subset_fraction",
    "eval_runs",
    "seed",
    "out",
    "threads",
    "pair_orientation",
    "include_self",
    "eval_unit",
    "matrix_cache",
];

impl RunConfig {
    /// Applies defaults, then the config file, then flags, and validates
    /// the numeric ranges that every subcommand relies on.
    pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
        let mut config = RunConfig::default();

        if let Some(path) = &args.config {
            let file = parse_config_file(path)?;
            for key in file.keys() {
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    bail!("unknown config key {key:?} in {}", path.display());
                }
            }
            let get = |key: &str| file.get(key).map(String::as_str);
            if let Some(v) = get("input") {
                config.input = PathBuf::from(v);
            }
            if let Some(v) = get("task_tag") {
                config.task_tag = v.to_string();
            }
            if let Some(v) = get("similarity") {
                config.similarity = v.parse()?;
            }
            if let Some(v) = get("aggregator") {
                config.aggregator = v.parse()?;
            }
            if let Some(v) = get("epsilon") {
                config.epsilon = v.parse().context("bad epsilon in config file")?;
            }
            if let Some(v) = get("hypothesis") {
                config.hypotheses = parse_hypotheses(v)?;
            }
            if let Some(v) = get("variant") {
                config.variants = parse_variants(v)?;
            }
            if let Some(v) = get("labeler") {
                config.labeler = v.parse()?;
            }
            if let Some(v) = get("alpha") {
                config.alpha = v.parse().context("bad alpha in config file")?;
            }
            if let Some(v) = get("repetitions") {
                config.repetitions = v.parse().context("bad repetitions in config file")?;
            }
            if let Some(v) = get("groups") {
                config.groups = v.parse()?;
            }
            if let Some(v) = get("rho_threshold") {
                config.rho_threshold = v.parse().context("bad rho_threshold in config file")?;
            }
            if let Some(v) = get("subset_fraction") {
                config.subset_fraction = v.parse().context("bad subset_fraction in config file")?;
            }
            if let Some(v) = get("eval_runs") {
                config.eval_runs = v.parse().context("bad eval_runs in config file")?;
            }
            if let Some(v) = get("seed") {
                config.seed = v.parse().context("bad seed in config file")?;
            }
            if let Some(v) = get("out") {
                config.out = PathBuf::from(v);
            }
            if let Some(v) = get("threads") {
                config.threads = v.parse().context("bad threads in config file")?;
            }
            if let Some(v) = get("pair_orientation") {
                config.pair_orientation = v.parse()?;
            }
            if let Some(v) = get("include_self") {
                config.include_self = v.parse().context("bad include_self in config file")?;
            }
            if let Some(v) = get("eval_unit") {
                config.eval_unit = v.parse()?;
            }
            if let Some(v) = get("matrix_cache") {
                config.matrix_cache = Some(PathBuf::from(v));
            }
        }

        if let Some(v) = &args.input {
            config.input = v.clone();
        }
        if let Some(v) = &args.task_tag {
            config.task_tag = v.clone();
        }
        if let Some(v) = &args.similarity {
            config.similarity = v.parse()?;
        }
        if let Some(v) = &args.aggregator {
            config.aggregator = v.parse()?;
        }
        if let Some(v) = args.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = &args.hypothesis {
            config.hypotheses = parse_hypotheses(v)?;
        }
        if let Some(v) = &args.variant {
            config.variants = parse_variants(v)?;
        }
        if let Some(v) = &args.labeler {
            config.labeler = v.parse()?;
        }
        if let Some(v) = args.alpha {
            config.alpha = v;
        }
        if let Some(v) = args.repetitions {
            config.repetitions = v;
        }
        if let Some(v) = &args.groups {
            config.groups = v.parse()?;
        }
        if let Some(v) = args.rho_threshold {
            config.rho_threshold = v;
        }
        if let Some(v) = args.subset_fraction {
            config.subset_fraction = v;
        }
        if let Some(v) = args.eval_runs {
            config.eval_runs = v;
        }
        if let Some(v) = args.seed {
            config.seed = v;
        }
        if let Some(v) = &args.out {
            config.out = v.clone();
        }
        if let Some(v) = args.threads {
            config.threads = v;
        }
        if let Some(v) = &args.pair_orientation {
            config.pair_orientation = v.parse()?;
        }
        if let Some(v) = args.include_self {
            config.include_self = v;
        }
        if let Some(v) = &args.eval_unit {
            config.eval_unit = v.parse()?;
        }
        if let Some(v) = &args.matrix_cache {
            config.matrix_cache = Some(v.clone());
        }

        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha {} is outside (0, 1)", self.alpha);
        }
        if self.repetitions < 1 {
            bail!("repetitions must be at least 1");
        }
        if !(self.rho_threshold > 0.0 && self.rho_threshold <= 1.0) {
            bail!("rho_threshold {} is outside (0, 1]", self.rho_threshold);
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            bail!("subset_fraction {} is outside (0, 1]", self.subset_fraction);
        }
        if self.eval_runs < 1 {
            bail!("eval_runs must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            bail!("epsilon {} is outside (0, 1e-6]", self.epsilon);
        }
        Ok(())
    }

    /// JSON manifest of the resolved configuration; `extra` appends
    /// command-specific facts such as the resolved group grid. Keys are
    /// emitted in sorted order so equal configs give identical bytes.
    pub fn manifest(&self, command: &str, extra: &[(&str, Value)]) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("command".into(), json!(command));
        map.insert("input".into(), json!(self.input.display().to_string()));
        map.insert("task_tag".into(), json!(self.task_tag));
        map.insert("similarity".into(), json!(self.similarity.name()));
        map.insert("aggregator".into(), json!(self.aggregator.name()));
        map.insert("epsilon".into(), json!(self.epsilon));
        map.insert(
            "hypotheses".into(),
            json!(self.hypotheses.iter().map(|h| h.name()).collect::<Vec<_>>()),
        );
        map.insert(
            "variants".into(),
            json!(self.variants.iter().map(|v| v.name()).collect::<Vec<_>>()),
        );
        map.insert("labeler".into(), json!(self.labeler.to_string()));
        map.insert("alpha".into(), json!(self.alpha));
        map.insert("repetitions".into(), json!(self.repetitions));
        map.insert("groups".into(), json!(self.groups.to_string()));
        map.insert("rho_threshold".into(), json!(self.rho_threshold));
        map.insert("subset_fraction".into(), json!(self.subset_fraction));
        map.insert("eval_runs".into(), json!(self.eval_runs));
        map.insert("seed".into(), json!(self.seed));
        map.insert("out".into(), json!(self.out.display().to_string()));
        map.insert("threads".into(), json!(self.threads));
        map.insert(
            "pair_orientation".into(),
            json!(self.pair_orientation.name()),
        );
        map.insert("include_self".into(), json!(self.include_self));
        map.insert("eval_unit".into(), json!(self.eval_unit.name()));
        map.insert(
            "matrix_cache".into(),
            match &self.matrix_cache {
                Some(p) => json!(p.display().to_string()),
                None => Value::Null,
            },
        );
        for (key, value) in extra {
            map.insert((*key).to_string(), value.clone());
        }
        let sorted: std::collections::BTreeMap<String, Value> = map.into_iter().collect();
        json!(sorted)
    }
}
