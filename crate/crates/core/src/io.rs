//! Text file formats.
//!
//! Score CSV:
//! ```text
//! # window_length_s=1,n_states=2
//! 0.0123,-0.0456
//! ...
//! ```
//! With `kind=log_emission` in the header the rows hold `ln b_j(t)` instead
//! of raw correlations.
//!
//! Truth CSV: `window_index,true_state`. Posterior CSV:
//! `window_index,p_0,...,p_{N-1},argmax`. Viterbi CSV: `window_index,state`.
//! Truth, posterior and Viterbi files carry a leading `# key=value,...`
//! metadata line (window length, decoder) that readers use when present.
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::emission::{LogEmissionSeries, ScoreSeries};
use crate::error::{Error, Result};
use crate::inference::{Decoder, PosteriorSeries, ViterbiPath};
use crate::synthesis::AttentionTrajectory;

/// Contents of a score CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreFile {
    Correlations(ScoreSeries),
    LogEmissions {
        log_b: LogEmissionSeries,
        window_length: f64,
    },
}

impl ScoreFile {
    pub fn window_length(&self) -> f64 {
        match self {
            ScoreFile::Correlations(s) => s.window_length(),
            ScoreFile::LogEmissions { window_length, .. } => *window_length,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            ScoreFile::Correlations(s) => s.n_states(),
            ScoreFile::LogEmissions { log_b, .. } => log_b.n_states(),
        }
    }
}

struct Lines<'a> {
    origin: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(origin: &'a str, text: &'a str) -> Self {
        Self {
            origin,
            inner: text.lines().enumerate(),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            line,
            message: message.into(),
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    /// (1-based line number, trimmed content); blank lines are skipped.
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }
}

fn parse_metadata(line: &str) -> Option<BTreeMap<String, String>> {
    let body = line.strip_prefix('#')?;
    Some(
        body.split(',')
            .filter_map(|kv| {
                let (k, v) = kv.split_once('=')?;
                Some((k.trim().to_string(), v.trim().to_string()))
            })
            .collect(),
    )
}

fn parse_f64(lines: &Lines<'_>, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| lines.err(line, format!("not a number: {field:?}")))
}

fn parse_usize(lines: &Lines<'_>, line: usize, field: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| lines.err(line, format!("not a non-negative integer: {field:?}")))
}

/// Parses a score CSV. `origin` labels diagnostics (usually the file path).
pub fn parse_scores(origin: &str, text: &str, force_log_emission: bool) -> Result<ScoreFile> {
    let mut lines = Lines::new(origin, text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| lines.err(1, "empty file, expected a '# window_length_s=...' header"))?;
    let meta = parse_metadata(header)
        .ok_or_else(|| lines.err(hline, "expected a '# window_length_s=...,n_states=...' header"))?;
    let window_length = meta
        .get("window_length_s")
        .ok_or_else(|| lines.err(hline, "header lacks window_length_s"))
        .and_then(|v| parse_f64(&lines, hline, v))?;
    let declared_states = meta
        .get("n_states")
        .map(|v| parse_usize(&lines, hline, v))
        .transpose()?;
    let log_kind = match meta.get("kind").map(String::as_str) {
        None | Some("correlation") => force_log_emission,
        Some("log_emission") => true,
        Some(other) => return Err(lines.err(hline, format!("unknown kind {other:?}"))),
    };

    let mut values = Vec::new();
    let mut width = declared_states;
    let mut n_rows = 0usize;
    while let Some((line, content)) = lines.next() {
        if content.starts_with('#') {
            continue;
        }
        let before = values.len();
        for field in content.split(',') {
            let v = parse_f64(&lines, line, field)?;
            if log_kind {
                if !v.is_finite() {
                    return Err(lines.err(line, format!("non-finite log-emission {field:?}")));
                }
            } else if !v.is_finite() || v.abs() > 1.0 {
                return Err(lines.err(line, format!("correlation {field:?} outside [-1, 1]")));
            }
            values.push(v);
        }
        let got = values.len() - before;
        match width {
            Some(w) if w != got => {
                return Err(lines.err(line, format!("expected {w} columns, found {got}")))
            }
            Some(_) => {}
            None => width = Some(got),
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(lines.err(hline, "no score rows"));
    }
    let n_states = width.unwrap_or(0);
    if log_kind {
        if !(window_length > 0.0 && window_length.is_finite()) {
            return Err(lines.err(hline, "window_length_s must be positive"));
        }
        Ok(ScoreFile::LogEmissions {
            log_b: LogEmissionSeries::from_flat(values, n_states)?,
            window_length,
        })
    } else {
        ScoreSeries::from_flat(values, n_states, window_length)
            .map(ScoreFile::Correlations)
            .map_err(|e| lines.err(hline, e.to_string()))
    }
}

pub fn read_scores(path: &Path, force_log_emission: bool) -> Result<ScoreFile> {
    let text = fs::read_to_string(path)?;
    parse_scores(&path.display().to_string(), &text, force_log_emission)
}

pub fn format_scores(series: &ScoreSeries) -> String {
    let mut out = format!(
        "# window_length_s={},n_states={}\n",
        series.window_length(),
        series.n_states()
    );
    write_rows(&mut out, series.rows());
    out
}

pub fn format_log_emissions(log_b: &LogEmissionSeries, window_length: f64) -> String {
    let mut out = format!(
        "# window_length_s={window_length},n_states={},kind=log_emission\n",
        log_b.n_states()
    );
    write_rows(&mut out, log_b.rows());
    out
}

fn write_rows<'a>(out: &mut String, rows: impl Iterator<Item = &'a [f64]>) {
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

pub fn format_truth(truth: &AttentionTrajectory) -> String {
    let mut out = format!(
        "# window_length_s={}\nwindow_index,true_state\n",
        truth.window_length
    );
    for (t, s) in truth.states.iter().enumerate() {
        let _ = writeln!(out, "{t},{s}");
    }
    out
}

/// Parses a truth CSV. `window_length` is used when the file has no metadata line.
pub fn parse_truth(origin: &str, text: &str, window_length: Option<f64>) -> Result<AttentionTrajectory> {
    let table = parse_table(origin, text)?;
    let lines = Lines::new(origin, text);
    if table.header != ["window_index", "true_state"] {
        return Err(lines.err(
            table.header_line,
            format!("expected header window_index,true_state, found {}", table.header.join(",")),
        ));
    }
    let wl = match table.meta.get("window_length_s") {
        Some(v) => parse_f64(&lines, 1, v)?,
        None => window_length.unwrap_or(1.0),
    };
    let states = table.column_indices(&lines, 1)?;
    AttentionTrajectory::new(states, wl)
}

pub fn read_truth(path: &Path, window_length: Option<f64>) -> Result<AttentionTrajectory> {
    let text = fs::read_to_string(path)?;
    parse_truth(&path.display().to_string(), &text, window_length)
}

pub fn format_posterior(posterior: &PosteriorSeries, window_length: f64) -> String {
    let n = posterior.n_states();
    let mut out = format!(
        "# mode={},window_length_s={window_length}\nwindow_index",
        posterior.mode()
    );
    for j in 0..n {
        let _ = write!(out, ",p_{j}");
    }
    out.push_str(",argmax\n");
    for (t, (row, d)) in posterior.rows().zip(posterior.decisions()).enumerate() {
        let _ = write!(out, "{t}");
        for p in row {
            let _ = write!(out, ",{p}");
        }
        let _ = writeln!(out, ",{d}");
    }
    out
}

pub fn format_viterbi(path: &ViterbiPath, window_length: f64) -> String {
    let mut out = format!(
        "# mode=viterbi,window_length_s={window_length},log_joint={}\nwindow_index,state\n",
        path.log_joint
    );
    for (t, s) in path.states.iter().enumerate() {
        let _ = writeln!(out, "{t},{s}");
    }
    out
}

/// Decision sequence read back from a posterior or Viterbi CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFile {
    pub decisions: Vec<usize>,
    /// Decoder named in the metadata line, if any.
    pub mode: Option<Decoder>,
    pub window_length: Option<f64>,
}

pub fn parse_decisions(origin: &str, text: &str) -> Result<DecisionFile> {
    let table = parse_table(origin, text)?;
    let lines = Lines::new(origin, text);
    let mode = table
        .meta
        .get("mode")
        .map(|m| m.parse::<Decoder>())
        .transpose()
        .map_err(|e| lines.err(1, e.to_string()))?;
    let window_length = table
        .meta
        .get("window_length_s")
        .map(|v| parse_f64(&lines, 1, v))
        .transpose()?;
    let h = &table.header;
    let column = if h == &["window_index", "state"] {
        1
    } else if h.len() >= 4
        && h[0] == "window_index"
        && h.last().map(String::as_str) == Some("argmax")
        && h[1..h.len() - 1]
            .iter()
            .enumerate()
            .all(|(j, name)| *name == format!("p_{j}"))
    {
        h.len() - 1
    } else {
        return Err(lines.err(
            table.header_line,
            format!(
                "expected a posterior (window_index,p_0..,argmax) or Viterbi (window_index,state) header, found {}",
                h.join(",")
            ),
        ));
    };
    let decisions = table.column_indices(&lines, column)?;
    Ok(DecisionFile {
        decisions,
        mode,
        window_length,
    })
}

pub fn read_decisions(path: &Path) -> Result<DecisionFile> {
    let text = fs::read_to_string(path)?;
    parse_decisions(&path.display().to_string(), &text)
}

struct Table {
    meta: BTreeMap<String, String>,
    header: Vec<String>,
    header_line: usize,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    /// Validates the window_index column and returns column `col` as indices.
    fn column_indices(&self, lines: &Lines<'_>, col: usize) -> Result<Vec<usize>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(expected, (line, fields))| {
                let idx = parse_usize(lines, *line, &fields[0])?;
                if idx != expected {
                    return Err(lines.err(
                        *line,
                        format!("window_index {idx} out of order, expected {expected}"),
                    ));
                }
                parse_usize(lines, *line, &fields[col])
            })
            .collect()
    }
}

fn parse_table(origin: &str, text: &str) -> Result<Table> {
    let mut lines = Lines::new(origin, text);
    let mut meta = BTreeMap::new();
    let mut header = None;
    let mut rows = Vec::new();
    while let Some((line, content)) = lines.next() {
        if content.starts_with('#') {
            if header.is_none() {
                meta.extend(parse_metadata(content).unwrap_or_default());
            }
            continue;
        }
        let fields: Vec<String> = content.split(',').map(|f| f.trim().to_string()).collect();
        match &header {
            None => header = Some((line, fields)),
            Some((_, h)) => {
                if fields.len() != h.len() {
                    return Err(lines.err(
                        line,
                        format!("expected {} columns, found {}", h.len(), fields.len()),
                    ));
                }
                rows.push((line, fields));
            }
        }
    }
    let (header_line, header) = header.ok_or_else(|| lines.err(1, "missing header row"))?;
    if rows.is_empty() {
        return Err(lines.err(header_line, "no data rows"));
    }
    Ok(Table {
        meta,
        header,
        header_line,
        rows,
    })
}
