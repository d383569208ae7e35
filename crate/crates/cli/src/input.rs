//! CSV ingestion and export.
//!
//! Input: comma-separated UTF-8, one amount per row in the first numeric
//! column; a header row is auto-detected. Output: 17 significant digits, so
//! every f64 round-trips exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};

/// Marker for problems with an *input* file (unreadable, unparseable, no
/// numeric column). The process exits with code 2 when one is in the chain.
#[derive(Debug)]
pub struct BadInput(pub anyhow::Error);

impl fmt::Display for BadInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for BadInput {}

fn bad(err: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(BadInput(err))
}

fn numeric_columns(record: &csv::StringRecord) -> Vec<usize> {
    record
        .iter()
        .enumerate()
        .filter(|(_, field)| !field.is_empty() && field.parse::<f64>().is_ok())
        .map(|(i, _)| i)
        .collect()
}

/// Reads the first numeric column of `path`, auto-detecting a header row and
/// warning when several columns look numeric.
pub fn read_amounts(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| {
            bad(anyhow::Error::new(e).context(format!("cannot open {}", path.display())))
        })?;
    let mut records = reader.records();

    let first = match records.next() {
        None => return Err(bad(anyhow!("{} contains no rows", path.display()))),
        Some(r) => r.map_err(|e| bad(e.into()))?,
    };

    let mut amounts = Vec::new();
    let columns = numeric_columns(&first);
    let column = if columns.is_empty() {
        // header row: locate the column from the first data row
        let second = match records.next() {
            None => {
                return Err(bad(anyhow!(
                    "{} has a header but no data rows",
                    path.display()
                )))
            }
            Some(r) => r.map_err(|e| bad(e.into()))?,
        };
        let columns = numeric_columns(&second);
        let column = *columns
            .first()
            .ok_or_else(|| bad(anyhow!("{} has no numeric column", path.display())))?;
        if columns.len() > 1 {
            eprintln!(
                "warning: {} numeric columns in {}; using '{}'",
                columns.len(),
                path.display(),
                first.get(column).unwrap_or("?")
            );
        }
        amounts.push(second[column].parse::<f64>().expect("probed as numeric"));
        column
    } else {
        if columns.len() > 1 {
            eprintln!(
                "warning: {} numeric columns in {}; using column {}",
                columns.len(),
                path.display(),
                columns[0] + 1
            );
        }
        let column = columns[0];
        amounts.push(first[column].parse::<f64>().expect("probed as numeric"));
        column
    };

    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| bad(e.into()))?;
        let field = record.get(column).ok_or_else(|| {
            bad(anyhow!(
                "{} row {}: missing column {}",
                path.display(),
                i + 2,
                column + 1
            ))
        })?;
        let value = field.parse::<f64>().map_err(|_| {
            bad(anyhow!(
                "{} row {}: '{}' is not a number",
                path.display(),
                i + 2,
                field
            ))
        })?;
        amounts.push(value);
    }
    Ok(amounts)
}

/// Writes one `amount` column with 17 significant digits.
pub fn write_amounts(path: &Path, amounts: &[f64]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "amount")?;
    for a in amounts {
        writeln!(out, "{a:.16e}")?;
    }
    out.flush()?;
    Ok(())
}
