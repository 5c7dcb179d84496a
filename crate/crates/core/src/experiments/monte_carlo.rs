use std::io::{self, Write};
use std::ops::Range;

use rayon::prelude::*;

use super::{to_db, ExperimentSpec};
use crate::algorithms::{NetworkState, StepData, TrialSource};
use crate::error::{Error, Result};

/// Trials are reduced in fixed-size batches so memory stays bounded while
/// the summation order never depends on scheduling.
const BATCH: usize = 64;

/// Averaged learning curve of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantTrace {
    pub label: String,
    /// Linear network MSD averaged over the trials that did not diverge.
    /// All NaN when every trial diverged.
    pub msd: Vec<f64>,
    pub diverged_trials: usize,
}

/// A predicted curve stored next to the simulated ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryColumn {
    pub label: String,
    pub msd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdReport {
    pub iterations: usize,
    pub trials: usize,
    pub variants: Vec<VariantTrace>,
    pub theory: Vec<TheoryColumn>,
    /// Written as `#`-prefixed lines ahead of the CSV header.
    pub metadata: Vec<String>,
}

/// Last `fraction` of `range`, at least one iteration long.
pub fn tail_window(range: Range<usize>, fraction: f64) -> Range<usize> {
    let len = range.end.saturating_sub(range.start);
    let tail = ((len as f64 * fraction).ceil() as usize).clamp(1.min(len), len);
    range.end - tail..range.end
}

impl MsdReport {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.variants.iter().position(|v| v.label == label)
    }

    pub fn db(&self, variant: usize) -> Vec<f64> {
        self.variants[variant].msd.iter().map(|&x| to_db(x)).collect()
    }

    pub fn all_diverged(&self, variant: usize) -> bool {
        self.variants[variant].diverged_trials == self.trials
    }

    /// `10 log10` of the mean linear MSD over `window`.
    pub fn steady_state_db(&self, variant: usize, window: Range<usize>) -> f64 {
        let slice = &self.variants[variant].msd[window];
        to_db(slice.iter().sum::<f64>() / slice.len() as f64)
    }

    /// CSV body and header without metadata lines.
    pub fn write_csv_body<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["iteration".to_string()];
        header.extend(self.variants.iter().map(|v| csv_field(&v.label)));
        header.extend(self.theory.iter().map(|t| csv_field(&format!("theory_{}", t.label))));
        writeln!(out, "{}", header.join(","))?;
        let db: Vec<Vec<f64>> = (0..self.variants.len()).map(|v| self.db(v)).collect();
        let theory: Vec<Vec<f64>> = self.theory.iter().map(|t| t.msd.iter().map(|&x| to_db(x)).collect()).collect();
        for i in 0..self.iterations {
            write!(out, "{i}")?;
            for col in db.iter().chain(&theory) {
                match col.get(i) {
                    Some(x) => write!(out, ",{x}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in &self.metadata {
            writeln!(out, "# {line}")?;
        }
        self.write_csv_body(out)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-variant traces of one trial; `None` marks divergence.
fn run_paired_trial(spec: &ExperimentSpec, trial: usize) -> Result<Vec<Option<Vec<f64>>>> {
    let n = spec.topology.node_count();
    let m = spec.taps;
    let mut source = TrialSource::new(&spec.profile, m, spec.master_seed, trial as u64);
    let mut states: Vec<Option<NetworkState>> = spec.variants.iter().map(|_| Some(NetworkState::zeros(n, m))).collect();
    let mut traces: Vec<Vec<f64>> = spec.variants.iter().map(|_| Vec::with_capacity(spec.iterations)).collect();
    let mut regressors = vec![0.0; n * m];
    let mut desired = vec![0.0; n];
    for i in 0..spec.iterations {
        let w_o = spec.system.at(i);
        source.fill(w_o, &mut regressors, &mut desired)?;
        for ((slot, trace), lv) in states.iter_mut().zip(traces.iter_mut()).zip(&spec.variants) {
            let Some(state) = slot.as_mut() else { continue };
            let data = StepData {
                regressors: &regressors,
                desired: &desired,
            };
            match state.step(&spec.combiner, &lv.variant, data) {
                Ok(()) => {}
                Err(Error::Diverged { .. }) => {
                    *slot = None;
                    continue;
                }
                Err(e) => return Err(e),
            }
            let msd = state.msd(w_o);
            if !msd.is_finite() || msd > spec.divergence_threshold {
                *slot = None;
                continue;
            }
            trace.push(msd);
        }
    }
    Ok(states
        .into_iter()
        .zip(traces)
        .map(|(s, t)| s.map(|_| t))
        .collect())
}

/// Runs every trial of `spec` on the current rayon pool and averages the
/// traces. The result does not depend on the number of worker threads.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<MsdReport> {
    spec.validate()?;
    let v = spec.variants.len();
    let mut sums = vec![vec![0.0; spec.iterations]; v];
    let mut survivors = vec![0usize; v];
    let mut start = 0;
    while start < spec.trials {
        let end = (start + BATCH).min(spec.trials);
        let batch: Vec<_> = (start..end)
            .into_par_iter()
            .map(|t| run_paired_trial(spec, t))
            .collect::<Result<_>>()?;
        for per_variant in batch {
            for (k, trace) in per_variant.into_iter().enumerate() {
                if let Some(trace) = trace {
                    survivors[k] += 1;
                    for (acc, x) in sums[k].iter_mut().zip(trace) {
                        *acc += x;
                    }
                }
            }
        }
        start = end;
    }
    let variants = spec
        .variants
        .iter()
        .zip(sums)
        .zip(&survivors)
        .map(|((lv, sum), &alive)| VariantTrace {
            label: lv.label.clone(),
            msd: sum.into_iter().map(|s| if alive == 0 { f64::NAN } else { s / alive as f64 }).collect(),
            diverged_trials: spec.trials - alive,
        })
        .collect::<Vec<_>>();
    let mut metadata = vec![
        format!("experiment = {}", spec.name),
        format!("trials = {}", spec.trials),
        format!("iterations = {}", spec.iterations),
        format!("master_seed = {}", spec.master_seed),
    ];
    for v in &variants {
        metadata.push(format!("diverged[{}] = {}", v.label, v.diverged_trials));
    }
    Ok(MsdReport {
        iterations: spec.iterations,
        trials: spec.trials,
        variants,
        theory: Vec::new(),
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmVariant, Attractor, HyperParams, Strategy};
    use crate::experiments::{scenario_43_with, LabeledVariant};
    use crate::signal::SignalProfile;
    use crate::system::SystemSchedule;

    fn small(trials: usize) -> ExperimentSpec {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::Za, HyperParams::new(0.03, 0.001, 0.001, 1.0).unwrap());
        let mut s = scenario_43_with(9, vec![v]).unwrap();
        s.trials = trials;
        s.iterations = 200;
        s
    }

    #[test]
    fn deterministic() {
        let a = run_monte_carlo(&small(3)).unwrap();
        let b = run_monte_carlo(&small(3)).unwrap();
        assert_eq!(a, b);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv_body(&mut x).unwrap();
        b.write_csv_body(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn noiseless_zero_target_hits_floor() {
        let mut s = small(2);
        s.profile = SignalProfile::uniform(5, 1.0, 1e-300).unwrap();
        s.system = SystemSchedule::fixed(vec![0.0; 5]).unwrap();
        s.variants[0].variant.params.attractor_strength = 0.0;
        let r = run_monte_carlo(&s).unwrap();
        assert!(r.db(0).iter().all(|&x| x == crate::experiments::DB_FLOOR));
    }

    #[test]
    fn divergent_variant_flagged_others_kept() {
        let mut s = small(2);
        let mut bad = s.variants[0].clone();
        bad.variant.params.step_size = 5.0;
        bad.label = "too large".into();
        s.variants.push(bad);
        let r = run_monte_carlo(&s).unwrap();
        assert!(r.all_diverged(1));
        assert!(r.variants[1].msd.iter().all(|x| x.is_nan()));
        assert_eq!(r.variants[0].diverged_trials, 0);
        assert!(r.db(0).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn paired_variants_match_solo_runs() {
        let mut s = small(2);
        let extra = AlgorithmVariant::new(Strategy::Cta, Attractor::Rza, HyperParams::new(0.02, 0.0, 0.002, 5.0).unwrap());
        s.variants.push(LabeledVariant {
            label: extra.to_string(),
            variant: extra,
        });
        let both = run_monte_carlo(&s).unwrap();
        for k in 0..2 {
            let solo = run_monte_carlo(&s.single(k).unwrap()).unwrap();
            assert_eq!(solo.variants[0].msd, both.variants[k].msd);
        }
    }

    #[test]
    fn tail_windows() {
        assert_eq!(tail_window(0..3000, 0.1), 2700..3000);
        assert_eq!(tail_window(2500..3000, 1.0), 2500..3000);
        assert_eq!(tail_window(0..5, 0.01), 4..5);
    }

    #[test]
    fn csv_layout() {
        let mut r = run_monte_carlo(&small(1)).unwrap();
        r.theory.push(TheoryColumn {
            label: "x".into(),
            msd: vec![1.0; 200],
        });
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body[0], "iteration,ATC-LZA-DLMS,theory_x");
        assert_eq!(body.len(), 201);
        assert!(body[1].starts_with("0,") && body[1].ends_with(",0"));
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
