//! True-vector scenarios and the preset experiment definitions.

use rand::seq::SliceRandom;

use super::{ExperimentSpec, LabeledVariant};
use crate::algorithms::{AlgorithmVariant, Attractor, HyperParams, Strategy};
use crate::error::{Error, Result};
use crate::network::{build_uniform_combiner, random_geometric_topology, Topology};
use crate::rng::{seeded, splitmix64, StreamRole};
use crate::signal::{sample_profile, Coloring};
use crate::system::{Stage, SystemSchedule};

/// One stage of a sparsity schedule; `active` holds 1-based tap positions
/// whose coefficient is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityStage {
    pub start: usize,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityScenario {
    taps: usize,
    stages: Vec<SparsityStage>,
}

impl SparsityScenario {
    pub fn new(taps: usize, stages: Vec<SparsityStage>) -> Result<Self> {
        for s in &stages {
            if let Some(p) = s.active.iter().find(|&&p| p == 0 || p > taps) {
                return Err(Error::invalid("active", format!("position {p} outside [1, {taps}]")));
            }
        }
        let scenario = SparsityScenario { taps, stages };
        // start ordering is checked by the schedule
        scenario.to_schedule()?;
        Ok(scenario)
    }

    /// Draws `count` random positions per stage. When `nested`, every stage
    /// keeps the previous stage's positions and adds new ones.
    pub fn random(taps: usize, counts: &[(usize, usize)], nested: bool, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed, StreamRole::Scenario);
        let mut order: Vec<usize> = (1..=taps).collect();
        order.shuffle(&mut rng);
        let mut stages = Vec::with_capacity(counts.len());
        for &(start, count) in counts {
            if count > taps {
                return Err(Error::invalid("count", format!("{count} active positions exceed {taps} taps")));
            }
            if !nested {
                order.shuffle(&mut rng);
            }
            let mut active = order[..count].to_vec();
            active.sort_unstable();
            stages.push(SparsityStage { start, active });
        }
        SparsityScenario::new(taps, stages)
    }

    pub fn stages(&self) -> &[SparsityStage] {
        &self.stages
    }

    pub fn to_schedule(&self) -> Result<SystemSchedule> {
        let stages = self
            .stages
            .iter()
            .map(|s| {
                let mut weights = vec![0.0; self.taps];
                for &p in &s.active {
                    weights[p - 1] = 1.0;
                }
                Stage { start: s.start, weights }
            })
            .collect();
        SystemSchedule::new(stages)
    }
}

fn variant(strategy: Strategy, attractor: Attractor, mu: f64, gamma: f64, rho: f64, eps: f64) -> Result<AlgorithmVariant> {
    Ok(AlgorithmVariant::new(strategy, attractor, HyperParams::new(mu, gamma, rho, eps)?))
}

fn labeled(v: AlgorithmVariant) -> LabeledVariant {
    LabeledVariant {
        label: v.to_string(),
        variant: v,
    }
}

/// Random geometric graph that is retried with derived seeds until
/// connected.
pub fn connected_geometric_topology(nodes: usize, radius: f64, seed: u64) -> Result<Topology> {
    let mut s = seed;
    for _ in 0..1000 {
        let t = random_geometric_topology(nodes, radius, s)?;
        if t.is_connected() {
            return Ok(t);
        }
        s = splitmix64(s);
    }
    Err(Error::InvalidTopology(format!(
        "no connected {nodes}-node geometric graph with radius {radius} after 1000 draws"
    )))
}

pub const NETWORK_20_RADIUS: f64 = 0.3;
pub const INPUT_RANGE_20: (f64, f64) = (0.5, 1.5);
pub const NOISE_RANGE_20: (f64, f64) = (0.1, 0.4);

/// 20-node sparsity-tracking experiment with stages of 1, 16 and 32 active
/// taps out of 64.
pub fn scenario_41(seed: u64, coloring: Coloring) -> Result<ExperimentSpec> {
    let topology = connected_geometric_topology(20, NETWORK_20_RADIUS, seed)?;
    let combiner = build_uniform_combiner(&topology);
    let profile = sample_profile(20, INPUT_RANGE_20, NOISE_RANGE_20, seed)?.with_coloring(coloring)?;
    let scenario = SparsityScenario::random(64, &[(0, 1), (3000, 16), (6000, 32)], true, seed)?;
    let (mu, gamma, rho, eps) = (0.01, 0.002, 0.0005, 1.0);
    let mut variants = Vec::new();
    for strategy in [Strategy::Atc, Strategy::Cta] {
        for attractor in [Attractor::None, Attractor::Za, Attractor::Rza] {
            variants.push(labeled(variant(strategy, attractor, mu, gamma, rho, eps)?));
        }
    }
    let spec = ExperimentSpec {
        name: "4.1".into(),
        topology,
        combiner,
        profile,
        taps: 64,
        system: scenario.to_schedule()?,
        variants,
        iterations: 9000,
        trials: 100,
        master_seed: seed,
        divergence_threshold: super::DEFAULT_DIVERGENCE_THRESHOLD,
    };
    spec.validate()?;
    Ok(spec)
}

/// The frozen synthetic 128-tap path used after the switch in
/// [`scenario_42`].
pub fn synthetic_fir_path() -> Vec<f64> {
    include_str!("../../fixtures/fir128.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().parse().expect("fixture holds one float per line"))
        .collect()
}

/// 20-node tracking experiment with colored inputs: a single-spike system
/// that switches to the synthetic FIR path halfway through.
pub fn scenario_42(seed: u64) -> Result<ExperimentSpec> {
    let taps = 128;
    let topology = connected_geometric_topology(20, NETWORK_20_RADIUS, seed)?;
    let combiner = build_uniform_combiner(&topology);
    let profile = sample_profile(20, INPUT_RANGE_20, NOISE_RANGE_20, seed)?.with_coloring(Coloring::Ar1 { pole: 0.7 })?;
    let mut spike = vec![0.0; taps];
    spike[0] = 1.0;
    let system = SystemSchedule::new(vec![
        Stage { start: 0, weights: spike },
        Stage {
            start: 5000,
            weights: synthetic_fir_path(),
        },
    ])?;
    // M = 128 with colored inputs needs a smaller step than 4.1.
    let (mu, gamma, rho, eps) = (0.003, 0.002, 0.0001, 1.0);
    let mut variants = Vec::new();
    for strategy in [Strategy::Cta, Strategy::Atc] {
        for (g, attractor) in [
            (0.0, Attractor::None),
            (gamma, Attractor::None),
            (0.0, Attractor::Za),
            (0.0, Attractor::Rza),
            (gamma, Attractor::Za),
            (gamma, Attractor::Rza),
        ] {
            variants.push(labeled(variant(strategy, attractor, mu, g, rho, eps)?));
        }
    }
    let spec = ExperimentSpec {
        name: "4.2".into(),
        topology,
        combiner,
        profile,
        taps,
        system,
        variants,
        iterations: 10000,
        trials: 20,
        master_seed: seed,
        divergence_threshold: super::DEFAULT_DIVERGENCE_THRESHOLD,
    };
    spec.validate()?;
    Ok(spec)
}

/// Edges of the 5-node network of the theory validation experiments.
pub const NETWORK_5_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)];
pub const INPUT_RANGE_5: (f64, f64) = (0.8, 1.2);
pub const NOISE_RANGE_5: (f64, f64) = (0.005, 0.02);
pub const TRUE_VECTOR_5: [f64; 5] = [0.0, 0.0, 1.0, 0.0, 0.0];

/// Which hyperparameter a theory-validation preset sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    StepSize,
    Leak,
    Strength,
}

/// Five-node, five-tap setup with `w_o = e_3`, running the given variants.
pub fn scenario_43_with(seed: u64, variants: Vec<AlgorithmVariant>) -> Result<ExperimentSpec> {
    let topology = Topology::from_edges(5, &NETWORK_5_EDGES)?;
    let combiner = build_uniform_combiner(&topology);
    let profile = sample_profile(5, INPUT_RANGE_5, NOISE_RANGE_5, seed)?;
    let spec = ExperimentSpec {
        name: "4.3".into(),
        topology,
        combiner,
        profile,
        taps: 5,
        system: SystemSchedule::fixed(TRUE_VECTOR_5.to_vec())?,
        variants: variants.into_iter().map(labeled).collect(),
        iterations: 3000,
        trials: 500,
        master_seed: seed,
        divergence_threshold: super::DEFAULT_DIVERGENCE_THRESHOLD,
    };
    spec.validate()?;
    Ok(spec)
}

/// Default ATC-LZA point: `mu = 0.03, gamma = 0.001, rho = 0.001`.
pub fn scenario_43(seed: u64) -> Result<ExperimentSpec> {
    scenario_43_with(seed, vec![lza_anchor()?])
}

pub fn lza_anchor() -> Result<AlgorithmVariant> {
    variant(Strategy::Atc, Attractor::Za, 0.03, 0.001, 0.001, 1.0)
}

pub fn lrza_anchor() -> Result<AlgorithmVariant> {
    variant(Strategy::Atc, Attractor::Rza, 0.008, 0.001, 0.001, 1.0)
}

/// Parameter sweep on the five-node setup. Each curve differs from the
/// anchor in the swept parameter only.
pub fn scenario_43_sweep(seed: u64, attractor: Attractor, sweep: Sweep) -> Result<ExperimentSpec> {
    let lza = attractor == Attractor::Za;
    let (values, base): (&[f64], (f64, f64, f64)) = match (lza, sweep) {
        (true, Sweep::StepSize) => (&[0.01, 0.03, 0.05], (0.0, 0.001, 0.005)),
        (true, Sweep::Leak) => (&[0.001, 0.01, 0.1], (0.03, 0.0, 0.001)),
        (true, Sweep::Strength) => (&[0.0005, 0.001, 0.005], (0.03, 0.001, 0.0)),
        (false, Sweep::StepSize) => (&[0.004, 0.008, 0.016], (0.0, 0.001, 0.005)),
        (false, Sweep::Leak) => (&[0.001, 0.01, 0.1], (0.008, 0.0, 0.001)),
        (false, Sweep::Strength) => (&[0.0005, 0.001, 0.005], (0.008, 0.001, 0.0)),
    };
    let variants = values
        .iter()
        .map(|&x| {
            let (mut mu, mut gamma, mut rho) = base;
            match sweep {
                Sweep::StepSize => mu = x,
                Sweep::Leak => gamma = x,
                Sweep::Strength => rho = x,
            }
            variant(Strategy::Atc, attractor, mu, gamma, rho, 1.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spec = scenario_43_with(seed, variants)?;
    let tag = match sweep {
        Sweep::StepSize => "mu",
        Sweep::Leak => "gamma",
        Sweep::Strength => "rho",
    };
    for lv in spec.variants.iter_mut() {
        let p = lv.variant.params;
        let value = match sweep {
            Sweep::StepSize => p.step_size,
            Sweep::Leak => p.leak,
            Sweep::Strength => p.attractor_strength,
        };
        lv.label = format!("{} {tag}={value}", lv.variant);
    }
    Ok(spec)
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: &[&str] = &[
    "4.1",
    "4.1-colored",
    "4.2",
    "4.3",
    "4.3-lza-mu",
    "4.3-lza-gamma",
    "4.3-lza-rho",
    "4.3-lrza-mu",
    "4.3-lrza-gamma",
    "4.3-lrza-rho",
    "4.4-lza",
    "4.4-lrza",
];

/// Builds a named preset.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentSpec> {
    let sweep = |a, s| scenario_43_sweep(seed, a, s);
    match name {
        "4.1" => scenario_41(seed, Coloring::White),
        "4.1-colored" => scenario_41(seed, Coloring::Ar1 { pole: 0.7 }),
        "4.2" => scenario_42(seed),
        "4.3" => scenario_43(seed),
        "4.3-lza-mu" => sweep(Attractor::Za, Sweep::StepSize),
        "4.3-lza-gamma" => sweep(Attractor::Za, Sweep::Leak),
        "4.3-lza-rho" => sweep(Attractor::Za, Sweep::Strength),
        "4.3-lrza-mu" => sweep(Attractor::Rza, Sweep::StepSize),
        "4.3-lrza-gamma" => sweep(Attractor::Rza, Sweep::Leak),
        "4.3-lrza-rho" => sweep(Attractor::Rza, Sweep::Strength),
        "4.4-lza" => {
            let mut s = scenario_43(seed)?;
            s.iterations = 20000;
            s.name = name.into();
            Ok(s)
        }
        "4.4-lrza" => {
            let mut s = scenario_43_with(seed, vec![lrza_anchor()?])?;
            s.iterations = 20000;
            s.name = name.into();
            Ok(s)
        }
        other => Err(Error::invalid(
            "scenario",
            format!("unknown preset '{other}'; expected one of {}", PRESET_NAMES.join(", ")),
        )),
    }
}
