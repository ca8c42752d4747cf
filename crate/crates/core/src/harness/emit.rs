use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::runner::{RunGroup, RunMetrics, StepRecord};
use super::stats::{confidence_interval, rolling_mean_sparse};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = [
    "step",
    "delta_e_mean",
    "delta_i_mean",
    "abs_gap",
    "r_bar",
    "episode_return",
    "seed",
];

/// 17 significant digits, enough to round-trip any finite `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Writes all seeds' records under the fixed header, LF line endings.
pub fn write_csv<W: Write>(out: W, runs: &[RunMetrics]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for run in runs {
        for r in &run.records {
            w.write_record([
                r.step.to_string(),
                opt(r.delta_e_mean),
                opt(r.delta_i_mean),
                opt(r.abs_gap),
                opt(r.r_bar),
                opt(r.episode_return),
                r.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::config(format!("line {line}: bad number {field:?}")))
}

/// Parses a metrics CSV written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<StepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::config(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::config(format!("line {line}: bad integer {s:?}")))
        };
        out.push(StepRecord {
            step: int(&rec[0])?,
            delta_e_mean: parse_opt(&rec[1], line)?,
            delta_i_mean: parse_opt(&rec[2], line)?,
            abs_gap: parse_opt(&rec[3], line)?,
            r_bar: parse_opt(&rec[4], line)?,
            episode_return: parse_opt(&rec[5], line)?,
            seed: int(&rec[6])?,
        });
    }
    Ok(out)
}

/// A line chart of one column: seed mean with a confidence band.
pub fn render_svg(title: &str, steps: &[u64], mean: &[f64], half_width: &[f64]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if steps.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    // thin to at most ~1000 points
    let stride = steps.len().div_ceil(1000).max(1);
    let idx: Vec<usize> = (0..steps.len()).step_by(stride).collect();
    let lo = idx.iter().map(|&i| mean[i] - half_width[i]).fold(f64::INFINITY, f64::min);
    let hi = idx.iter().map(|&i| mean[i] + half_width[i]).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let (x0, x1) = (steps[0] as f64, *steps.last().unwrap() as f64);
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |s: u64| PAD + (s as f64 - x0) / span * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut band = String::new();
    for &i in &idx {
        let _ = write!(band, "{:.2},{:.2} ", px(steps[i]), py(mean[i] + half_width[i]));
    }
    for &i in idx.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", px(steps[i]), py(mean[i] - half_width[i]));
    }
    let _ = writeln!(svg, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##, band.trim_end());
    let line: Vec<String> = idx
        .iter()
        .map(|&i| format!("{:.2},{:.2}", px(steps[i]), py(mean[i])))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        line.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(svg, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!(r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#)
    };
    let _ = writeln!(svg, "{}", label(PAD - 4.0, PAD + 4.0, "end", format!("{hi:.3e}")));
    let _ = writeln!(svg, "{}", label(PAD - 4.0, H - PAD, "end", format!("{lo:.3e}")));
    let _ = writeln!(svg, "{}", label(PAD, H - PAD + 16.0, "start", steps[0].to_string()));
    let _ = writeln!(svg, "{}", label(W - PAD, H - PAD + 16.0, "end", format!("step {}", x1)));
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rolling seed-mean band of one column, restricted to steps where every
/// seed has a value.
pub fn column_band(
    runs: &[RunMetrics],
    column: fn(&StepRecord) -> Option<f64>,
    window: usize,
    level: f64,
) -> Result<(Vec<u64>, Vec<f64>, Vec<f64>, bool)> {
    if runs.is_empty() {
        return Err(Error::config("no runs to aggregate"));
    }
    let rolled = runs
        .iter()
        .map(|r| rolling_mean_sparse(&r.records.iter().map(column).collect::<Vec<_>>(), window))
        .collect::<Result<Vec<_>>>()?;
    let len = rolled.iter().map(Vec::len).min().unwrap_or(0);
    let mut steps = Vec::new();
    let mut per_seed: Vec<Vec<f64>> = vec![Vec::new(); runs.len()];
    for t in 0..len {
        if rolled.iter().all(|r| r[t].is_some()) {
            steps.push(runs[0].records[t].step);
            for (s, r) in per_seed.iter_mut().zip(&rolled) {
                s.push(r[t].unwrap());
            }
        }
    }
    let band = confidence_interval(&per_seed, level)?;
    Ok((steps, band.mean, band.half_width, band.single_seed))
}

/// Writes `<label>.csv` plus an SVG per populated column; returns the paths.
pub fn emit_group(dir: &Path, group: &RunGroup, window: usize) -> Result<Vec<PathBuf>> {
    if group.runs.iter().all(|r| r.records.is_empty()) {
        return Err(Error::config("nothing to emit"));
    }
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let csv_path = dir.join(format!("{}.csv", group.label));
    let file = fs::File::create(&csv_path)?;
    write_csv(std::io::BufWriter::new(file), &group.runs)?;
    paths.push(csv_path);

    let columns: [(&str, fn(&StepRecord) -> Option<f64>); 2] = [("abs_gap", |r| r.abs_gap), ("r_bar", |r| r.r_bar)];
    for (name, col) in columns {
        let (steps, mean, hw, _) = column_band(&group.runs, col, window, 0.95)?;
        if steps.is_empty() {
            continue;
        }
        let title = format!("{}: rolling {name} (window {window}), 95% CI over {} seeds", group.label, group.runs.len());
        let path = dir.join(format!("{}_{name}.svg", group.label));
        fs::write(&path, render_svg(&title, &steps, &mean, &hw))?;
        paths.push(path);
    }
    Ok(paths)
}
