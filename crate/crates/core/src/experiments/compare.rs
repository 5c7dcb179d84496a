use serde::Serialize;

use super::{run_monte_carlo, tail_window, to_db, ExperimentSpec, TheoryColumn};
use crate::algorithms::Strategy;
use crate::error::{Error, Result};
use crate::theory::{steady_state_msd, transient, StackedOperators};

/// Paired simulated and predicted curves for one ATC variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryComparison {
    pub label: String,
    pub simulated_db: Vec<f64>,
    pub theory_db: Vec<f64>,
    /// `theory - simulated` per iteration.
    pub gap_db: Vec<f64>,
    /// Largest `|gap|` from `burn_in` on.
    pub max_gap_after_burn_in: f64,
    /// Mean `|gap|` over the final `tail` iterations.
    pub tail_mean_gap: f64,
    /// Closed-form steady state.
    pub steady_state_theory_db: f64,
    /// Mean linear MSD over the final `tail` iterations, in dB.
    pub steady_state_simulated_db: f64,
    pub steady_state_gap: f64,
}

/// Runs the simulation and the moment recursion for variant `index` of a
/// fixed-system experiment.
pub fn compare_theory_simulation(spec: &ExperimentSpec, index: usize, burn_in: usize, tail: usize) -> Result<TheoryComparison> {
    let single = spec.single(index)?;
    let lv = &single.variants[0];
    if lv.variant.strategy != Strategy::Atc {
        return Err(Error::UnsupportedTheory);
    }
    if !spec.system.is_fixed() {
        return Err(Error::invalid("system", "theory requires a fixed true vector"));
    }
    if burn_in >= spec.iterations || tail == 0 || tail > spec.iterations {
        return Err(Error::invalid("window", "burn-in and tail must fit inside the run"));
    }
    let w_o = spec.system.at(0);
    let ops = StackedOperators::new(&spec.combiner, &spec.profile, spec.taps, &lv.variant)?;
    let predicted = transient(&ops, w_o, spec.iterations, false)?;
    let steady = steady_state_msd(&ops, w_o)?;
    let mut report = run_monte_carlo(&single)?;
    if report.all_diverged(0) {
        return Err(Error::Diverged { iteration: 0 });
    }
    report.theory.push(TheoryColumn {
        label: lv.label.clone(),
        msd: predicted.msd.clone(),
    });
    let simulated_db = report.db(0);
    let theory_db: Vec<f64> = predicted.msd.iter().map(|&x| to_db(x)).collect();
    let gap_db: Vec<f64> = theory_db.iter().zip(&simulated_db).map(|(t, s)| t - s).collect();
    let max_gap_after_burn_in = gap_db[burn_in..].iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let window = tail_window(0..spec.iterations, tail as f64 / spec.iterations as f64);
    let tail_mean_gap = gap_db[window.clone()].iter().map(|g| g.abs()).sum::<f64>() / window.len() as f64;
    let steady_state_simulated_db = report.steady_state_db(0, window);
    let steady_state_theory_db = to_db(steady);
    Ok(TheoryComparison {
        label: lv.label.clone(),
        simulated_db,
        theory_db,
        gap_db,
        max_gap_after_burn_in,
        tail_mean_gap,
        steady_state_theory_db,
        steady_state_simulated_db,
        steady_state_gap: (steady_state_theory_db - steady_state_simulated_db).abs(),
    })
}

/// Outcome of the empirical step-size bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSearch {
    /// Largest step size seen to converge in every trial.
    pub stable: f64,
    /// Smallest step size seen to diverge in some trial.
    pub unstable: f64,
}

/// Bisects the step size of variant `index` between `lo` and `hi`. A step
/// size counts as unstable when any trial diverges within the experiment's
/// iterations. Fails if `lo` already diverges or `hi` converges.
pub fn empirical_step_threshold(spec: &ExperimentSpec, index: usize, lo: f64, hi: f64, steps: usize) -> Result<ThresholdSearch> {
    let base = spec.single(index)?;
    let diverges = |mu: f64| -> Result<bool> {
        let mut s = base.clone();
        s.variants[0].variant.params.step_size = mu;
        let r = run_monte_carlo(&s)?;
        Ok(r.variants[0].diverged_trials > 0)
    };
    if !(0.0 < lo && lo < hi) {
        return Err(Error::invalid("bracket", "need 0 < lo < hi"));
    }
    if diverges(lo)? {
        return Err(Error::invalid("bracket", format!("step size {lo} already diverges")));
    }
    if !diverges(hi)? {
        return Err(Error::invalid("bracket", format!("step size {hi} still converges")));
    }
    let (mut stable, mut unstable) = (lo, hi);
    for _ in 0..steps {
        // geometric midpoint: brackets often span decades
        let mid = (stable * unstable).sqrt();
        if diverges(mid)? {
            unstable = mid;
        } else {
            stable = mid;
        }
    }
    Ok(ThresholdSearch { stable, unstable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmVariant, Attractor, HyperParams};
    use crate::experiments::scenario_43_with;

    #[test]
    fn cta_is_rejected() {
        let v = AlgorithmVariant::new(Strategy::Cta, Attractor::Za, HyperParams::new(0.03, 0.001, 0.001, 1.0).unwrap());
        let s = scenario_43_with(1, vec![v]).unwrap();
        assert_eq!(compare_theory_simulation(&s, 0, 10, 10).unwrap_err(), Error::UnsupportedTheory);
    }

    #[test]
    fn plain_dlms_agrees_in_steady_state() {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::None, HyperParams::new(0.05, 0.0, 0.0, 1.0).unwrap());
        let mut s = scenario_43_with(4, vec![v]).unwrap();
        s.trials = 100;
        s.iterations = 800;
        let c = compare_theory_simulation(&s, 0, 100, 300).unwrap();
        assert!(c.steady_state_gap < 0.5, "{c:?}");
        assert!(c.tail_mean_gap < 0.5);
    }

    #[test]
    fn bisection_brackets_threshold() {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::None, HyperParams::new(0.05, 0.0, 0.0, 1.0).unwrap());
        let mut s = scenario_43_with(4, vec![v]).unwrap();
        s.trials = 4;
        s.iterations = 400;
        let t = empirical_step_threshold(&s, 0, 0.01, 2.0, 6).unwrap();
        assert!(t.stable < t.unstable);
        assert!(t.stable > 0.05 && t.unstable < 1.0, "{t:?}");
        assert!(empirical_step_threshold(&s, 0, 1.5, 2.0, 2).is_err());
    }
}
