//! Subcommand bodies. Each returns the text it would print on success.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dlza::algorithms::{run_trial, Strategy, TrialSpec};
use dlza::experiments::{
    empirical_step_threshold, run_monte_carlo, tail_window, to_db, ExperimentSpec, LabeledVariant, MsdReport,
    TheoryColumn,
};
use dlza::network::{validate_combiner, CombinationMatrix, Topology};
use dlza::signal::Coloring;
use dlza::theory::{
    error_spectral_radius, stability_bounds, steady_state_msd, transient, FourthMomentSource, StackedOperators,
    TheoryTrace,
};
use dlza::Error;
use nalgebra::DMatrix;

use crate::config::{FourthMoment, Resolved, RunConfig};
use crate::error::CliError;
use crate::plot::{read_curves, render_script};

/// Env var naming the default output directory.
pub const OUT_DIR_ENV: &str = "DLZA_OUT_DIR";

fn out_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(d) = &cfg.output.dir {
        return d.clone();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from("."),
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// `output.file` (relative to the output dir) or `<dir>/<name><suffix>`.
fn output_path(cfg: &RunConfig, name: &str, suffix: &str) -> PathBuf {
    let dir = out_dir(cfg);
    match &cfg.output.file {
        Some(f) => dir.join(f),
        None => dir.join(format!("{}{suffix}", file_stem(name))),
    }
}

/// `base` with `_<tag>` inserted before the extension.
fn sibling(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    base.with_file_name(format!("{stem}_{tag}{ext}"))
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::io(path, e))?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

fn header_lines(resolved: &Resolved, command: &str) -> Vec<String> {
    let mut lines = vec![format!("dlza {} {command}", env!("CARGO_PKG_VERSION"))];
    if resolved.config.output.timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        lines.push(format!("generated_at = {secs}"));
    }
    lines.extend(resolved.config.metadata_lines());
    lines
}

fn require_atc(lv: &LabeledVariant) -> Result<(), CliError> {
    match lv.variant.strategy {
        Strategy::Atc => Ok(()),
        Strategy::Cta => Err(CliError::usage(format!(
            "variant '{}': theory is only available for ATC variants",
            lv.label
        ))),
    }
}

fn require_fixed(spec: &ExperimentSpec) -> Result<(), CliError> {
    if spec.system.is_fixed() {
        Ok(())
    } else {
        Err(CliError::usage("theory needs a fixed true vector (a single system stage)"))
    }
}

/// Operators for an ATC variant, rejecting unstable mean-square recursions.
fn stable_operators(spec: &ExperimentSpec, lv: &LabeledVariant) -> Result<StackedOperators, CliError> {
    require_atc(lv)?;
    let ops = StackedOperators::new(&spec.combiner, &spec.profile, spec.taps, &lv.variant)?;
    let radius = error_spectral_radius(&ops)?;
    let ms_radius = radius * radius;
    if !(ms_radius < 1.0) {
        return Err(CliError::numerical(format!(
            "variant '{}': mean-square recursion is unstable, spectral radius {ms_radius:.6} ≥ 1",
            lv.label
        )));
    }
    Ok(ops)
}

fn theory_trace(spec: &ExperimentSpec, lv: &LabeledVariant, record_means: bool) -> Result<TheoryTrace, CliError> {
    let ops = stable_operators(spec, lv)?;
    let trace = transient(&ops, spec.system.at(0), spec.iterations, record_means)?;
    if trace.msd.iter().any(|x| !x.is_finite()) {
        return Err(CliError::numerical(format!("variant '{}': theory MSD is not finite", lv.label)));
    }
    Ok(trace)
}

pub struct SimulateOptions {
    pub strict: bool,
}

pub fn simulate(resolved: &Resolved, opts: &SimulateOptions) -> Result<String, CliError> {
    let spec = &resolved.spec;
    let cfg = &resolved.config;
    let mut report: MsdReport = run_monte_carlo(spec)?;
    let mut out = String::new();
    if cfg.output.theory_overlay {
        for lv in &spec.variants {
            let trace = require_fixed(spec).and_then(|_| theory_trace(spec, lv, false));
            match trace {
                Ok(t) => report.theory.push(TheoryColumn {
                    label: lv.label.clone(),
                    msd: t.msd,
                }),
                Err(e) => eprintln!("note: no theory column for '{}': {e}", lv.label),
            }
        }
    }
    let mut metadata = header_lines(resolved, "simulate");
    metadata.append(&mut report.metadata);
    report.metadata = metadata;
    let path = output_path(cfg, &spec.name, "_msd.csv");
    write_file(&path, |buf| report.write_csv(buf))?;
    out.push_str(&format!("wrote {}\n", path.display()));

    if cfg.output.weight_history {
        for (k, lv) in spec.variants.iter().enumerate() {
            let trace = run_trial(&TrialSpec {
                combiner: &spec.combiner,
                profile: &spec.profile,
                system: &spec.system,
                variant: &lv.variant,
                iterations: spec.iterations,
                master_seed: spec.master_seed,
                trial: 0,
                record_history: true,
                divergence_threshold: Some(spec.divergence_threshold),
            })?;
            if let Some(history) = trace.history {
                let p = sibling(&path, &format!("weights_{}", k + 1));
                write_file(&p, |buf| history.write_csv(buf))?;
                out.push_str(&format!("wrote {}\n", p.display()));
            }
        }
    }

    let window = tail_window(0..spec.iterations, 0.1);
    let mut diverged = Vec::new();
    for (v, trace) in report.variants.iter().enumerate() {
        out.push_str(&format!(
            "{}: steady-state {:.3} dB over iterations {}..{}, diverged {}/{}\n",
            trace.label,
            report.steady_state_db(v, window.clone()),
            window.start,
            window.end,
            trace.diverged_trials,
            report.trials
        ));
        if trace.diverged_trials > 0 {
            diverged.push(format!("'{}' ({}/{})", trace.label, trace.diverged_trials, report.trials));
        }
    }
    if opts.strict && !diverged.is_empty() {
        print!("{out}");
        return Err(CliError::numerical(format!(
            "divergent trials in {}",
            diverged.join(", ")
        )));
    }
    Ok(out)
}

pub fn theory(resolved: &Resolved) -> Result<String, CliError> {
    let spec = &resolved.spec;
    let cfg = &resolved.config;
    require_fixed(spec)?;
    for lv in &spec.variants {
        require_atc(lv)?;
    }
    let base = output_path(cfg, &spec.name, "_theory.csv");
    let mut out = String::new();
    for (k, lv) in spec.variants.iter().enumerate() {
        let trace = theory_trace(spec, lv, cfg.analysis.record_means)?;
        let ops = StackedOperators::new(&spec.combiner, &spec.profile, spec.taps, &lv.variant)?;
        let steady = match steady_state_msd(&ops, spec.system.at(0)) {
            Ok(x) => format!("{}", to_db(x)),
            Err(e @ Error::TooLarge { .. }) => format!("nan ({e})"),
            Err(e) => return Err(e.into()),
        };
        let path = if spec.variants.len() == 1 {
            base.clone()
        } else {
            sibling(&base, &(k + 1).to_string())
        };
        let mut meta = header_lines(resolved, "theory");
        meta.push(format!("variant = {}", lv.label));
        meta.push(format!("steady_state_msd_db = {steady}"));
        write_file(&path, |buf| {
            for line in &meta {
                writeln!(buf, "# {line}")?;
            }
            trace.write_csv(&mut *buf)
        })?;
        out.push_str(&format!(
            "{}: final {:.3} dB, steady-state {steady} dB\nwrote {}\n",
            lv.label,
            to_db(*trace.msd.last().unwrap_or(&f64::NAN)),
            path.display()
        ));
    }
    Ok(out)
}

pub fn stability(resolved: &Resolved) -> Result<String, CliError> {
    let spec = &resolved.spec;
    let analysis = &resolved.config.analysis;
    let colored = spec.profile.coloring() != Coloring::White;
    let source = match (analysis.fourth_moment, colored) {
        (FourthMoment::Analytic, _) | (FourthMoment::Auto, false) => FourthMomentSource::Analytic,
        _ => FourthMomentSource::Sampled {
            samples: analysis.samples,
            seed: spec.master_seed,
        },
    };
    let mut out = String::new();
    for (k, lv) in spec.variants.iter().enumerate() {
        require_atc(lv)?;
        let ops = StackedOperators::new(&spec.combiner, &spec.profile, spec.taps, &lv.variant)?;
        let b = stability_bounds(&ops, &spec.profile, source)?;
        out.push_str(&format!("[{}]\n", lv.label));
        out.push_str(&format!("mean_bound = {}\n", b.mean_bound));
        out.push_str(&format!("mean_square_bound = {}\n", b.ms_bound));
        out.push_str(&format!("combined_bound = {}\n", b.combined));
        out.push_str(&format!("step_size = {}\n", lv.variant.params.step_size));
        if analysis.empirical {
            let [lo, hi] = analysis.bracket.unwrap_or([b.combined / 4.0, 8.0 * b.combined]);
            let mut probe = spec.single(k)?;
            probe.trials = analysis.empirical_trials;
            probe.iterations = analysis.empirical_iterations.unwrap_or(spec.iterations);
            let t = empirical_step_threshold(&probe, 0, lo, hi, analysis.bisection_steps)?;
            out.push_str(&format!("empirical_stable = {}\n", t.stable));
            out.push_str(&format!("empirical_unstable = {}\n", t.unstable));
            out.push_str(&format!("empirical_over_combined = {}\n", t.stable / b.combined));
        }
    }
    Ok(out)
}

pub fn plot(csv: &Path, output: Option<&Path>) -> Result<String, CliError> {
    let text = fs::read_to_string(csv).map_err(|e| CliError::io(csv, e))?;
    let curves = read_curves(&text)?;
    let script = output.map(Path::to_path_buf).unwrap_or_else(|| csv.with_extension("py"));
    let image = script
        .with_extension("png")
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot.png".into());
    let title = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let body = render_script(&curves, &title, &image);
    write_file(&script, |buf| buf.write_all(body.as_bytes()))?;
    Ok(format!("wrote {} ({} series)\n", script.display(), curves.series.len()))
}

/// Reads a square matrix, one row per line, entries separated by commas or
/// whitespace.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::usage(format!("matrix line {}: {e}", i + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::usage("matrix must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub struct ValidateOptions<'a> {
    pub topology: Option<&'a Path>,
    pub matrix: Option<&'a Path>,
    pub export_topology: Option<&'a Path>,
    pub print_config: bool,
}

pub fn validate(resolved: Option<&Resolved>, opts: &ValidateOptions<'_>) -> Result<String, CliError> {
    let mut out = String::new();
    let topology = match (opts.topology, resolved) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Topology::parse_edge_list(&text)?
        }
        (None, Some(r)) => r.spec.topology.clone(),
        (None, None) => return Err(CliError::usage("nothing to validate")),
    };
    let combiner = match (opts.matrix, resolved) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            CombinationMatrix::from_raw(parse_matrix(&text)?)
        }
        (None, Some(r)) if opts.topology.is_none() => r.spec.combiner.clone(),
        (None, r) => {
            let rule = r
                .and_then(|r| r.config.topology.as_ref())
                .map(|t| t.combiner)
                .unwrap_or_default();
            rule.build(&topology)
        }
    };
    let report = validate_combiner(&combiner, &topology)?;
    out.push_str(&format!("nodes = {}\n", topology.node_count()));
    out.push_str(&format!("edges = {}\n", topology.edges().len()));
    out.push_str(&format!("components = {}\n", topology.component_count()));
    out.push_str(&format!("max_column_sum_error = {:e}\n", combiner.max_column_sum_error()));
    if let Some(p) = opts.export_topology {
        write_file(p, |buf| buf.write_all(topology.to_edge_list().as_bytes()))?;
        out.push_str(&format!("wrote {}\n", p.display()));
    }
    if opts.print_config {
        if let Some(r) = resolved {
            out.push_str(&r.config.to_toml());
        }
    }
    if !report.is_valid() {
        print!("{out}");
        return Err(CliError::usage(format!("invalid combination matrix: {report}")));
    }
    out.push_str(&format!("combiner: {report}\n"));
    Ok(out)
}
