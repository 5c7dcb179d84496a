//! Turns a CSV written by `simulate` or `theory` into a matplotlib script.
//!
//! The data are embedded in the script, so it runs without the CSV. Columns
//! named `theory_*` are drawn dashed; `mean_err_*` columns are skipped since
//! they are not in dB.

use std::fmt::Write as _;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub dashed: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub iterations: Vec<f64>,
    pub series: Vec<Series>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::usage(format!("unrecognized CSV schema: {}", msg.into()))
}

fn cell(raw: &str) -> Option<f64> {
    match raw.trim() {
        "" => Some(f64::NAN),
        s => s.parse().ok(),
    }
}

/// Parses the MSD or theory CSV layout, ignoring `#` lines.
pub fn read_curves(text: &str) -> Result<Curves, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(CliError::usage("empty CSV: no header or data")),
        Some(r) => r.map_err(|e| schema(e.to_string()))?,
    };
    if header.get(0) != Some("iteration") || header.len() < 2 {
        return Err(schema("expected a header `iteration,<column>,...`"));
    }
    let keep: Vec<usize> = (1..header.len()).filter(|&c| !header[c].starts_with("mean_err_")).collect();
    if keep.is_empty() {
        return Err(schema("no MSD columns"));
    }
    let mut curves = Curves {
        iterations: Vec::new(),
        series: keep
            .iter()
            .map(|&c| Series {
                label: header[c].to_string(),
                dashed: header[c].starts_with("theory_"),
                values: Vec::new(),
            })
            .collect(),
    };
    for (row, record) in records.enumerate() {
        let record = record.map_err(|e| schema(e.to_string()))?;
        let bad = |col: &str| schema(format!("non-numeric {col} in data row {}", row + 1));
        let it = record.get(0).and_then(cell).ok_or_else(|| bad("iteration"))?;
        curves.iterations.push(it);
        for (s, &c) in curves.series.iter_mut().zip(&keep) {
            let x = record.get(c).and_then(cell).ok_or_else(|| bad(&s.label))?;
            s.values.push(x);
        }
    }
    if curves.iterations.is_empty() {
        return Err(CliError::usage("empty CSV: header without data rows"));
    }
    Ok(curves)
}

fn py_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn py_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| py_float(x)).collect();
    format!("[{}]", items.join(", "))
}

fn py_str(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A standalone script drawing every series against the iteration index and
/// saving `<image>` next to itself.
pub fn render_script(curves: &Curves, title: &str, image: &str) -> String {
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("# Generated by dlza plot.\n");
    s.push_str("import os\n\nimport matplotlib\n\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("nan = float(\"nan\")\ninf = float(\"inf\")\n\n");
    let _ = writeln!(s, "ITERATION = {}", py_list(&curves.iterations));
    s.push_str("SERIES = [\n");
    for series in &curves.series {
        let style = if series.dashed { "--" } else { "-" };
        let _ = writeln!(s, "    ({}, {}, {}),", py_str(&series.label), py_str(style), py_list(&series.values));
    }
    s.push_str("]\n\n");
    s.push_str("fig, ax = plt.subplots(figsize=(8, 5))\n");
    // a theory curve takes the color of the simulated curve it predicts
    s.push_str("colors = {}\n");
    s.push_str("for label, style, values in SERIES:\n");
    s.push_str("    key = label[len(\"theory_\"):] if label.startswith(\"theory_\") else label\n");
    s.push_str("    color = colors.setdefault(key, \"C%d\" % (len(colors) % 10))\n");
    s.push_str("    ax.plot(ITERATION, values, style, color=color, label=label, linewidth=1.2)\n");
    s.push_str("ax.set_xlabel(\"iteration\")\n");
    s.push_str("ax.set_ylabel(\"network MSD (dB)\")\n");
    let _ = writeln!(s, "ax.set_title({})", py_str(title));
    s.push_str("ax.grid(True, alpha=0.3)\nax.legend()\nfig.tight_layout()\n");
    let _ = writeln!(
        s,
        "fig.savefig(os.path.join(os.path.dirname(os.path.abspath(__file__)), {}), dpi=150)",
        py_str(image)
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_report_layout() {
        let text = "# experiment = x\niteration,a,\"b,c\",theory_a\n0,-1.5,-2,nan\n1,-3,,-3.5\n";
        let c = read_curves(text).unwrap();
        assert_eq!(c.iterations, vec![0.0, 1.0]);
        let labels: Vec<&str> = c.series.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["a", "b,c", "theory_a"]);
        assert_eq!(c.series.iter().map(|s| s.dashed).collect::<Vec<_>>(), [false, false, true]);
        assert!(c.series[1].values[1].is_nan());
    }

    #[test]
    fn theory_layout_skips_mean_columns() {
        let c = read_curves("iteration,msd_db,mean_err_1_1\n0,-10,0.5\n").unwrap();
        assert_eq!(c.series.len(), 1);
        assert_eq!(c.series[0].label, "msd_db");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_curves("").is_err());
        assert!(read_curves("# only comments\n").is_err());
        assert!(read_curves("iteration,a\n").unwrap_err().message.contains("empty"));
        assert!(read_curves("time,a\n0,1\n").unwrap_err().message.contains("schema"));
        assert!(read_curves("iteration,a\n0,abc\n").is_err());
        assert!(read_curves("iteration,mean_err_1_1\n0,1\n").is_err());
    }

    #[test]
    fn script_marks_theory_dashed() {
        let c = read_curves("iteration,a,theory_a\n0,-1,-1.1\n1,-2,-2.1\n").unwrap();
        let script = render_script(&c, "t \"q\"", "out.png");
        assert!(script.contains("(\"a\", \"-\", [-1.0, -2.0])"));
        assert!(script.contains("(\"theory_a\", \"--\", [-1.1, -2.1])"));
        assert!(script.contains("\"t \\\"q\\\"\""));
        assert_eq!(script.matches("\n    (").count(), 2);
    }
}
