//! Numeric formatting and labelled-entity CSV helpers shared by exporters.

use std::collections::BTreeMap;
use std::io::Read;

/// Formats `x` with 12 significant digits, trimming trailing zeros.
///
/// Magnitudes outside `[1e-6, 1e15)` fall back to scientific notation.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    sig12(x).parse().unwrap_or(x)
}

#[derive(Debug, thiserror::Error)]
pub enum LabelFileError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate entity `{id}`")]
    Duplicate { line: u64, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a two-column `entity,label` CSV with a header row.
///
/// Used for both predicted cuts (`entity_id,cluster_label`) and ground truth
/// (`trajectory_id,group_label`). Labels are kept as strings.
pub fn read_labels<R: Read>(source: R) -> Result<BTreeMap<String, String>, LabelFileError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            LabelFileError::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(LabelFileError::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let id = record[0].to_owned();
        if out.insert(id.clone(), record[1].to_owned()).is_some() {
            return Err(LabelFileError::Duplicate { line, id });
        }
    }
    Ok(out)
}

/// Writes `header` followed by one `entity,label` row per pair.
pub fn write_labels<'a, I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = (&'a str, String)>,
{
    let mut out = String::from(header);
    out.push('\n');
    for (id, label) in rows {
        out.push_str(id);
        out.push(',');
        out.push_str(&label);
        out.push('\n');
    }
    out
}
