//! Study-level CSV input.
//!
//! Accepted layouts (header row required, column order free):
//! `id,estimate,se` or `id,e_t,n_t,e_c,n_c`. The `id` column is optional.

use std::io::Read;

use confcurve::{Counts, Study, Table2x2};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct CountRow {
    pub id: String,
    pub line: u64,
    pub counts: Counts,
}

#[derive(Debug, Clone)]
pub enum Dataset {
    Effects(Vec<Study>),
    Counts(Vec<CountRow>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Effects(s) => s.len(),
            Dataset::Counts(c) => c.len(),
        }
    }

    /// Log odds ratios and SEs; zero cells are an input error.
    pub fn studies(&self) -> Result<Vec<Study>, CliError> {
        match self {
            Dataset::Effects(s) => Ok(s.clone()),
            Dataset::Counts(rows) => rows
                .iter()
                .map(|r| {
                    Study::from_counts(r.id.clone(), r.counts)
                        .map_err(|e| CliError::Input(format!("line {}: {e}", r.line)))
                })
                .collect(),
        }
    }

    pub fn tables(&self) -> Result<Vec<Table2x2>, CliError> {
        match self {
            Dataset::Effects(_) => Err(CliError::Input(
                "--exact needs count columns e_t,n_t,e_c,n_c".into(),
            )),
            Dataset::Counts(rows) => rows
                .iter()
                .map(|r| {
                    Table2x2::try_from(r.counts)
                        .map_err(|e| CliError::Input(format!("line {}: {e}", r.line)))
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        match self {
            Dataset::Effects(s) => s.iter().map(|x| x.id.clone()).collect(),
            Dataset::Counts(c) => c.iter().map(|x| x.id.clone()).collect(),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn field<'a>(
    record: &'a csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<&'a str, CliError> {
    match record.get(idx).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Input(format!(
            "line {line}: column `{name}` is empty"
        ))),
    }
}

fn real(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, CliError> {
    let raw = field(record, idx, name, line)?;
    raw.parse::<f64>().map_err(|_| {
        CliError::Input(format!(
            "line {line}: column `{name}`: `{raw}` is not a number"
        ))
    })
}

fn count(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<u64, CliError> {
    let raw = field(record, idx, name, line)?;
    raw.parse::<u64>().map_err(|_| {
        CliError::Input(format!(
            "line {line}: column `{name}`: `{raw}` is not a non-negative integer"
        ))
    })
}

pub fn read_dataset<R: Read>(source: R) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("line 1: cannot read header: {e}")))?
        .clone();
    let id_col = column(&headers, "id");
    let effect_cols = (column(&headers, "estimate"), column(&headers, "se"));
    let count_names = ["e_t", "n_t", "e_c", "n_c"];
    let count_cols: Vec<Option<usize>> = count_names.iter().map(|n| column(&headers, n)).collect();

    enum Layout {
        Effects(usize, usize),
        Counts([usize; 4]),
    }
    let layout = if let (Some(e), Some(s)) = effect_cols {
        Layout::Effects(e, s)
    } else if count_cols.iter().all(Option::is_some) {
        let c: Vec<usize> = count_cols.iter().flatten().copied().collect();
        Layout::Counts([c[0], c[1], c[2], c[3]])
    } else {
        return Err(CliError::Input(
            "line 1: header must contain `estimate,se` or `e_t,n_t,e_c,n_c`".into(),
        ));
    };

    let mut effects = Vec::new();
    let mut counts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let fallback_line = i as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(fallback_line, |p| p.line());
            CliError::Input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(fallback_line, |p| p.line());
        let id = match id_col.and_then(|c| record.get(c)).map(str::trim) {
            Some(v) if !v.is_empty() => v.to_string(),
            _ => format!("study{}", i + 1),
        };
        match layout {
            Layout::Effects(e, s) => {
                let estimate = real(&record, e, "estimate", line)?;
                let se = real(&record, s, "se", line)?;
                let study = Study::new(id, estimate, se)
                    .map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
                effects.push(study);
            }
            Layout::Counts(c) => {
                let mut v = [0u64; 4];
                for (j, name) in count_names.iter().enumerate() {
                    v[j] = count(&record, c[j], name, line)?;
                }
                let counts_row = Counts::new(v[0], v[1], v[2], v[3])
                    .map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
                counts.push(CountRow {
                    id,
                    line,
                    counts: counts_row,
                });
            }
        }
    }
    let data = match layout {
        Layout::Effects(..) => Dataset::Effects(effects),
        Layout::Counts(_) => Dataset::Counts(counts),
    };
    if data.len() == 0 {
        return Err(CliError::Input("input contains no studies".into()));
    }
    Ok(data)
}
