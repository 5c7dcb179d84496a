//! The TOML run configuration shared by every subcommand.
//!
//! Every key is optional. A config starts from a preset (`scenario`,
//! default `"4.3"`) and each section that is present replaces the matching
//! part of the preset:
//!
//! ```toml
//! scenario = "4.3"            # preset to start from
//! name = "my-run"             # default: the scenario name, else "custom"
//! seed = 7                    # default 1
//! trials = 100                # default: preset value
//! iterations = 2000           # default: preset value
//! divergence_threshold = 1e6  # MSD above which a trial counts as divergent
//!
//! [output]
//! dir = "results"             # default: $DLZA_OUT_DIR, else "."
//! file = "run.csv"            # default: "<name>_msd.csv" (or "_theory")
//! timestamp = true            # write a generated_at comment line
//! theory_overlay = false      # add theory_<label> columns to simulate
//! weight_history = false      # dump trial 0 weights per variant
//!
//! [analysis]
//! fourth_moment = "auto"      # analytic | sampled | auto (sampled if colored)
//! samples = 200000            # windows for the sampled fourth moment
//! record_means = false        # mean-error columns in theory CSVs
//! empirical = false           # stability: also bisect the step size
//! bracket = [0.01, 1.0]       # default: [combined / 4, 8 * combined]
//! bisection_steps = 6
//! empirical_trials = 20
//! empirical_iterations = 3000 # default: the run's iterations
//!
//! [topology]
//! kind = "edges"              # edges | ring | full | geometric | file
//! nodes = 5
//! edges = [[1, 2], [2, 3]]    # 1-based, undirected
//! radius = 0.3                # geometric only, drawn from `seed`
//! path = "net.txt"            # file only, edge-list format
//! combiner = "uniform"        # uniform | metropolis
//!
//! [signals]                   # one of variances / range per side
//! input_variances = [1.0, 1.1]
//! noise_range = [0.005, 0.02] # defaults: [0.8, 1.2] and [0.005, 0.02]
//! ar1_pole = 0.7              # omit for white inputs
//!
//! [system]                    # exactly one of the three forms
//! true_vector = [0.0, 1.0]
//! # stages = [{ start = 0, weights = [...] }, ...]
//! # sparse = { taps = 64, stages = [[0, 1], [3000, 16]], nested = true }
//!
//! [[variants]]
//! label = "LZA"               # default: algorithm name
//! strategy = "atc"            # atc | cta
//! attractor = "za"            # none | za | rza
//! mu = 0.03                   # default 0.01
//! gamma = 0.001               # default 0
//! rho = 0.001                 # default 0
//! eps = 1.0                   # default 1
//! ```
//!
//! Unknown keys are rejected. [`RunConfig::resolve`] also produces a fully
//! explicit config, which is echoed into CSV metadata and parses back to
//! the same experiment.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use dlza::algorithms::{AlgorithmVariant, Attractor, HyperParams, Strategy};
use dlza::experiments::{preset, ExperimentSpec, LabeledVariant, SparsityScenario, INPUT_RANGE_5, NOISE_RANGE_5};
use dlza::network::{
    build_metropolis_combiner, build_uniform_combiner, random_geometric_topology, CombinationMatrix, Topology,
};
use dlza::signal::{sample_profile, Coloring, SignalProfile};
use dlza::system::{Stage, SystemSchedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_SCENARIO: &str = "4.3";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MU: f64 = 0.01;

/// Marker lines around the config echoed into CSV metadata.
pub const CONFIG_BEGIN: &str = "--- resolved config ---";
pub const CONFIG_END: &str = "--- end config ---";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_threshold: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signals: Option<SignalsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    pub timestamp: bool,
    pub theory_overlay: bool,
    pub weight_history: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            file: None,
            timestamp: true,
            theory_overlay: false,
            weight_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FourthMoment {
    #[default]
    Auto,
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub fourth_moment: FourthMoment,
    pub samples: usize,
    pub record_means: bool,
    pub empirical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    pub bisection_steps: usize,
    pub empirical_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_iterations: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fourth_moment: FourthMoment::Auto,
            samples: 200_000,
            record_means: false,
            empirical: false,
            bracket: None,
            bisection_steps: 6,
            empirical_trials: 20,
            empirical_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Edges,
    Ring,
    Full,
    Geometric,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerRule {
    #[default]
    Uniform,
    Metropolis,
}

impl CombinerRule {
    pub fn build(self, topology: &Topology) -> CombinationMatrix {
        match self {
            CombinerRule::Uniform => build_uniform_combiner(topology),
            CombinerRule::Metropolis => build_metropolis_combiner(topology),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<TopologyKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub combiner: CombinerRule,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_variances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_variances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar1_pole: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub start: usize,
    pub weights: Vec<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConfig {
    pub taps: usize,
    /// `[start_iteration, active_taps]` per stage.
    pub stages: Vec<[usize; 2]>,
    #[serde(default = "yes")]
    pub nested: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_vector: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageConfig>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparse: Option<SparseConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub strategy: Strategy,
    pub attractor: Attractor,
    pub mu: f64,
    pub gamma: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            label: None,
            strategy: Strategy::Atc,
            attractor: Attractor::None,
            mu: DEFAULT_MU,
            gamma: 0.0,
            rho: 0.0,
            eps: 1.0,
        }
    }
}

impl VariantConfig {
    fn from_labeled(lv: &LabeledVariant) -> Self {
        let p = lv.variant.params;
        VariantConfig {
            label: Some(lv.label.clone()),
            strategy: lv.variant.strategy,
            attractor: lv.variant.attractor,
            mu: p.step_size,
            gamma: p.leak,
            rho: p.attractor_strength,
            eps: p.reweight_scale,
        }
    }

    fn build(&self) -> Result<LabeledVariant, CliError> {
        let params = HyperParams::new(self.mu, self.gamma, self.rho, self.eps)?;
        let variant = AlgorithmVariant::new(self.strategy, self.attractor, params);
        Ok(LabeledVariant {
            label: self.label.clone().unwrap_or_else(|| variant.to_string()),
            variant,
        })
    }
}

/// A config turned into a runnable experiment.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Fully explicit form of the input config.
    pub config: RunConfig,
    pub spec: ExperimentSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    /// Reads a TOML file, or the config echoed in a CSV written by this tool
    /// when the file starts with `#`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if text.starts_with('#') {
            RunConfig::from_csv_metadata(&text)
        } else {
            RunConfig::parse(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// Recovers the config from the `#` metadata of a CSV.
    pub fn from_csv_metadata(text: &str) -> Result<Self, CliError> {
        let mut inside = false;
        let mut body = String::new();
        for line in text.lines() {
            let Some(comment) = line.strip_prefix('#') else { break };
            let comment = comment.strip_prefix(' ').unwrap_or(comment);
            if comment == CONFIG_BEGIN {
                inside = true;
            } else if comment == CONFIG_END {
                return RunConfig::parse(&body);
            } else if inside {
                body.push_str(comment);
                body.push('\n');
            }
        }
        Err(CliError::usage("no resolved config found in CSV metadata"))
    }

    /// Metadata lines carrying the config between the two markers.
    pub fn metadata_lines(&self) -> Vec<String> {
        let mut lines = vec![CONFIG_BEGIN.to_string()];
        lines.extend(self.to_toml().lines().map(str::to_string));
        lines.push(CONFIG_END.to_string());
        lines
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let scenario = self.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO);
        let base = preset(scenario, seed)?;

        let (topology, rule) = match &self.topology {
            Some(t) => (build_topology(t, seed)?, t.combiner),
            None => (base.topology.clone(), CombinerRule::Uniform),
        };
        let n = topology.node_count();
        let profile = match &self.signals {
            Some(s) => build_signals(s, n, seed)?,
            None if base.profile.node_count() == n => base.profile.clone(),
            None => build_signals(&SignalsConfig::default(), n, seed)?,
        };
        let system = match &self.system {
            Some(s) => build_system(s, seed)?,
            None => base.system.clone(),
        };
        let variants = if self.variants.is_empty() {
            base.variants.clone()
        } else {
            self.variants.iter().map(VariantConfig::build).collect::<Result<Vec<_>, _>>()?
        };
        let mut seen = HashSet::new();
        for v in &variants {
            if !seen.insert(v.label.as_str()) {
                return Err(CliError::usage(format!("duplicate variant label '{}'", v.label)));
            }
        }
        let name = match (&self.name, &self.scenario) {
            (Some(n), _) => n.clone(),
            (None, Some(s)) => s.clone(),
            (None, None) => "custom".to_string(),
        };
        let spec = ExperimentSpec {
            name,
            combiner: rule.build(&topology),
            topology,
            profile,
            taps: system.taps(),
            system,
            variants,
            iterations: self.iterations.unwrap_or(base.iterations),
            trials: self.trials.unwrap_or(base.trials),
            master_seed: seed,
            divergence_threshold: self.divergence_threshold.unwrap_or(base.divergence_threshold),
        };
        spec.validate()?;
        let config = explicit(self, &spec, rule);
        Ok(Resolved { config, spec })
    }
}

fn explicit(input: &RunConfig, spec: &ExperimentSpec, rule: CombinerRule) -> RunConfig {
    let pole = match spec.profile.coloring() {
        Coloring::White => None,
        Coloring::Ar1 { pole } => Some(pole),
    };
    RunConfig {
        scenario: None,
        name: Some(spec.name.clone()),
        seed: Some(spec.master_seed),
        trials: Some(spec.trials),
        iterations: Some(spec.iterations),
        divergence_threshold: Some(spec.divergence_threshold),
        output: input.output.clone(),
        analysis: input.analysis.clone(),
        topology: Some(TopologyConfig {
            kind: Some(TopologyKind::Edges),
            nodes: Some(spec.topology.node_count()),
            edges: Some(spec.topology.edges().into_iter().map(|(l, k)| [l + 1, k + 1]).collect()),
            radius: None,
            path: None,
            combiner: rule,
        }),
        signals: Some(SignalsConfig {
            input_variances: Some(spec.profile.input_variances().to_vec()),
            noise_variances: Some(spec.profile.noise_variances().to_vec()),
            input_range: None,
            noise_range: None,
            ar1_pole: pole,
        }),
        system: Some(SystemConfig {
            true_vector: None,
            stages: Some(
                spec.system
                    .stages()
                    .iter()
                    .map(|s| StageConfig {
                        start: s.start,
                        weights: s.weights.clone(),
                    })
                    .collect(),
            ),
            sparse: None,
        }),
        variants: spec.variants.iter().map(VariantConfig::from_labeled).collect(),
    }
}

fn build_topology(t: &TopologyConfig, seed: u64) -> Result<Topology, CliError> {
    let kind = match t.kind {
        Some(k) => k,
        None if t.edges.is_some() => TopologyKind::Edges,
        None if t.path.is_some() => TopologyKind::File,
        None if t.radius.is_some() => TopologyKind::Geometric,
        None => return Err(CliError::usage("topology: set `kind` (edges, ring, full, geometric or file)")),
    };
    let nodes = || t.nodes.ok_or_else(|| CliError::usage("topology: `nodes` is required for this kind"));
    let topology = match kind {
        TopologyKind::Edges => {
            let edges = t.edges.as_deref().unwrap_or_default();
            let n = nodes()?;
            let mut zero_based = Vec::with_capacity(edges.len());
            for &[l, k] in edges {
                if l == 0 || k == 0 || l > n || k > n {
                    return Err(CliError::usage(format!("topology: edge [{l}, {k}] outside nodes 1..={n}")));
                }
                zero_based.push((l - 1, k - 1));
            }
            Topology::from_edges(n, &zero_based)?
        }
        TopologyKind::Ring => Topology::ring(nodes()?)?,
        TopologyKind::Full => Topology::fully_connected(nodes()?)?,
        TopologyKind::Geometric => {
            let radius = t.radius.ok_or_else(|| CliError::usage("topology: `radius` is required"))?;
            if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
                return Err(CliError::usage(format!("topology: radius {radius} outside (0, sqrt 2]")));
            }
            random_geometric_topology(nodes()?, radius, seed)?
        }
        TopologyKind::File => {
            let path = t.path.as_ref().ok_or_else(|| CliError::usage("topology: `path` is required"))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Topology::parse_edge_list(&text)?
        }
    };
    if let Some(n) = t.nodes {
        if n != topology.node_count() {
            return Err(CliError::usage(format!(
                "topology: `nodes` = {n} but the graph has {} nodes",
                topology.node_count()
            )));
        }
    }
    Ok(topology)
}

fn build_signals(s: &SignalsConfig, n: usize, seed: u64) -> Result<SignalProfile, CliError> {
    let pair = |r: Option<[f64; 2]>, default: (f64, f64)| r.map(|[a, b]| (a, b)).unwrap_or(default);
    let sampled = sample_profile(
        n,
        pair(s.input_range, INPUT_RANGE_5),
        pair(s.noise_range, NOISE_RANGE_5),
        seed,
    )?;
    let pick = |explicit: &Option<Vec<f64>>, range: &Option<[f64; 2]>, drawn: &[f64], what: &str| {
        match (explicit, range) {
            (Some(_), Some(_)) => Err(CliError::usage(format!("signals: give either {what}_variances or {what}_range"))),
            (Some(v), None) if v.len() != n => Err(CliError::usage(format!(
                "signals: {what}_variances has {} entries for {n} nodes",
                v.len()
            ))),
            (Some(v), None) => Ok(v.clone()),
            (None, _) => Ok(drawn.to_vec()),
        }
    };
    let inputs = pick(&s.input_variances, &s.input_range, sampled.input_variances(), "input")?;
    let noises = pick(&s.noise_variances, &s.noise_range, sampled.noise_variances(), "noise")?;
    let coloring = match s.ar1_pole {
        None => Coloring::White,
        Some(pole) => Coloring::Ar1 { pole },
    };
    Ok(SignalProfile::new(inputs, noises, coloring)?)
}

fn build_system(s: &SystemConfig, seed: u64) -> Result<SystemSchedule, CliError> {
    match (&s.true_vector, &s.stages, &s.sparse) {
        (Some(w), None, None) => Ok(SystemSchedule::fixed(w.clone())?),
        (None, Some(stages), None) => Ok(SystemSchedule::new(
            stages
                .iter()
                .map(|s| Stage {
                    start: s.start,
                    weights: s.weights.clone(),
                })
                .collect(),
        )?),
        (None, None, Some(sp)) => {
            let counts: Vec<(usize, usize)> = sp.stages.iter().map(|&[s, c]| (s, c)).collect();
            Ok(SparsityScenario::random(sp.taps, &counts, sp.nested, seed)?.to_schedule()?)
        }
        _ => Err(CliError::usage("system: give exactly one of true_vector, stages or sparse")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_preset() {
        let r = RunConfig::parse("").unwrap().resolve().unwrap();
        assert_eq!(r.spec.taps, 5);
        assert_eq!(r.spec.topology.node_count(), 5);
        assert_eq!(r.spec.name, "custom");
        assert_eq!(r.spec.master_seed, DEFAULT_SEED);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = RunConfig::parse("trails = 3").unwrap_err();
        assert!(e.message.contains("trails"), "{}", e.message);
        let e = RunConfig::parse("[[variants]]\nmu = 0.1\nlambda = 2").unwrap_err();
        assert!(e.message.contains("lambda"), "{}", e.message);
    }

    #[test]
    fn resolved_config_round_trips() {
        for name in ["4.3-lza-mu", "4.1-colored", "4.2"] {
            let cfg = RunConfig {
                scenario: Some(name.into()),
                seed: Some(3),
                ..Default::default()
            };
            let first = cfg.resolve().unwrap();
            let text = first.config.to_toml();
            let second = RunConfig::parse(&text).unwrap().resolve().unwrap();
            assert_eq!(first.config, second.config, "{name}");
            assert_eq!(format!("{:?}", first.spec), format!("{:?}", second.spec), "{name}");
        }
    }

    #[test]
    fn metadata_round_trip() {
        let r = RunConfig::parse("scenario = \"4.3\"\ntrials = 4").unwrap().resolve().unwrap();
        let mut csv = String::new();
        for line in r.config.metadata_lines() {
            csv.push_str(&format!("# {line}\n"));
        }
        csv.push_str("iteration,x\n0,1\n");
        assert_eq!(RunConfig::from_csv_metadata(&csv).unwrap(), r.config);
    }

    #[test]
    fn sections_override_the_preset() {
        let text = r#"
            scenario = "4.3"
            [topology]
            kind = "ring"
            nodes = 4
            combiner = "metropolis"
            [system]
            true_vector = [0.5, -0.5]
            [[variants]]
            attractor = "rza"
            mu = 0.02
        "#;
        let r = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.spec.topology.node_count(), 4);
        assert_eq!(r.spec.profile.node_count(), 4);
        assert_eq!(r.spec.taps, 2);
        assert_eq!(r.spec.variants.len(), 1);
        let c = &r.spec.combiner;
        for l in 0..4 {
            for k in 0..4 {
                assert_eq!(c.weight(l, k), c.weight(k, l));
            }
        }
    }

    #[test]
    fn conflicting_forms_are_rejected() {
        let both = "[system]\ntrue_vector = [1.0]\nsparse = { taps = 4, stages = [[0, 1]] }";
        assert!(RunConfig::parse(both).unwrap().resolve().is_err());
        let both = "[signals]\ninput_variances = [1.0]\ninput_range = [1.0, 2.0]\n[topology]\nkind = \"full\"\nnodes = 1";
        assert!(RunConfig::parse(both).unwrap().resolve().is_err());
        let zero = "[topology]\nkind = \"full\"\nnodes = 1\n[signals]\ninput_variances = [0.0]";
        assert!(RunConfig::parse(zero).unwrap().resolve().is_err());
    }
}
