//! CSV ingestion and emission.
//!
//! Response files have a header row of item identifiers after one leading
//! person-identifier column; cells are `0`, `1`, `NA` (any case) or empty.
//! Parameter files carry a header and an identifier column too, so they can
//! be read back or handed to plotting scripts unchanged. Numbers are written
//! in the shortest form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use cjmle::{ParameterSet, ResponseData};
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A response file as read from disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub person_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub data: ResponseData,
}

/// A numeric table: row identifiers, column names and values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<f64>,
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| CliError::io(path, e))?;
    Ok(buf)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes)
}

fn parse_header(record: Option<Result<csv::StringRecord, csv::Error>>, source: &str) -> CliResult<Vec<String>> {
    let header = match record {
        Some(r) => r.map_err(|e| CliError::input(format!("{source}: line 1: {e}")))?,
        None => return Err(CliError::input(format!("{source}: file is empty"))),
    };
    if header.len() < 2 {
        return Err(CliError::input(format!(
            "{source}: line 1: header needs an identifier column and at least one data column"
        )));
    }
    Ok(header.iter().skip(1).map(str::to_owned).collect())
}

/// Parses a response matrix. Errors name the line, the column and the item.
pub fn parse_responses(bytes: &[u8], source: &str) -> CliResult<Dataset> {
    let mut rdr = reader(bytes);
    let mut records = rdr.records();
    let item_ids = parse_header(records.next(), source)?;
    let j = item_ids.len();

    let mut person_ids = Vec::new();
    let mut cells = Vec::new();
    for (idx, record) in records.enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| CliError::input(format!("{source}: line {line}: {e}")))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != j + 1 {
            return Err(CliError::input(format!(
                "{source}: line {line}: expected {} fields (id + {j} items), found {}",
                j + 1,
                record.len()
            )));
        }
        person_ids.push(record[0].to_owned());
        for (col, field) in record.iter().skip(1).enumerate() {
            let cell = match field {
                "0" => Some(0u8),
                "1" => Some(1u8),
                "" => None,
                f if f.eq_ignore_ascii_case("na") => None,
                other => {
                    return Err(CliError::input(format!(
                        "{source}: line {line}, column {} (item `{}`): invalid response `{other}`, expected 0, 1, NA or empty",
                        col + 2,
                        item_ids[col]
                    )))
                }
            };
            cells.push(cell);
        }
    }
    if person_ids.is_empty() {
        return Err(CliError::input(format!("{source}: no data rows")));
    }
    let n = person_ids.len();
    let grid = Array2::from_shape_vec((n, j), cells).expect("n·j cells");
    let data = ResponseData::from_options(&grid).map_err(|e| CliError::input(format!("{source}: {e}")))?;
    Ok(Dataset { person_ids, item_ids, data })
}

/// Parses a numeric table with a header row and an identifier column.
pub fn parse_table(bytes: &[u8], source: &str) -> CliResult<Table> {
    let mut rdr = reader(bytes);
    let mut records = rdr.records();
    let columns = parse_header(records.next(), source)?;
    let width = columns.len();
    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for (idx, record) in records.enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| CliError::input(format!("{source}: line {line}: {e}")))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width + 1 {
            return Err(CliError::input(format!(
                "{source}: line {line}: expected {} fields, found {}",
                width + 1,
                record.len()
            )));
        }
        row_ids.push(record[0].to_owned());
        for (col, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::input(format!("{source}: line {line}, column {}: `{field}` is not a number", col + 2))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!("{source}: line {line}, column {}: non-finite value", col + 2)));
            }
            values.push(v);
        }
    }
    if row_ids.is_empty() {
        return Err(CliError::input(format!("{source}: no data rows")));
    }
    let values = Array2::from_shape_vec((row_ids.len(), width), values).expect("rows·width values");
    Ok(Table { row_ids, columns, values })
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    parse_table(&read_bytes(path)?, &path.display().to_string())
}

/// Shortest decimal that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_cli = |e: csv::Error| CliError::Other(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(to_cli)?;
    for row in rows {
        w.write_record(&row).map_err(to_cli)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_table(path: &Path, id_header: &str, table: &Table) -> CliResult<()> {
    let header: Vec<String> = std::iter::once(id_header.to_owned()).chain(table.columns.iter().cloned()).collect();
    let rows = table.values.rows().into_iter().zip(&table.row_ids).map(|(row, id)| {
        std::iter::once(id.clone()).chain(row.iter().map(|&v| fmt_f64(v))).collect()
    });
    write_csv(path, &header, rows)
}

pub fn write_responses(path: &Path, dataset: &Dataset) -> CliResult<()> {
    let header: Vec<String> = std::iter::once("person".to_owned()).chain(dataset.item_ids.iter().cloned()).collect();
    let data = &dataset.data;
    let rows = (0..data.n_persons()).map(|i| {
        std::iter::once(dataset.person_ids[i].clone())
            .chain((0..data.n_items()).map(|j| {
                if data.is_observed(i, j) {
                    data.response(i, j).to_string()
                } else {
                    "NA".to_owned()
                }
            }))
            .collect()
    });
    write_csv(path, &header, rows)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(|e| CliError::io(path, e))
}

pub fn factor_columns(k: usize) -> Vec<String> {
    (1..=k).map(|f| format!("factor_{f}")).collect()
}

pub fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Writes `theta.csv`, `loadings.csv` and `intercepts.csv` (each name with
/// `prefix` prepended).
pub fn write_params(
    dir: &Path,
    prefix: &str,
    params: &ParameterSet,
    person_ids: &[String],
    item_ids: &[String],
) -> CliResult<Vec<String>> {
    let k = params.n_factors();
    let theta = Table { row_ids: person_ids.to_vec(), columns: factor_columns(k), values: params.theta.clone() };
    let loadings = Table { row_ids: item_ids.to_vec(), columns: factor_columns(k), values: params.loadings.clone() };
    let intercepts = Table {
        row_ids: item_ids.to_vec(),
        columns: vec!["intercept".into()],
        values: params.intercepts.view().insert_axis(ndarray::Axis(1)).to_owned(),
    };
    let names = [format!("{prefix}theta.csv"), format!("{prefix}loadings.csv"), format!("{prefix}intercepts.csv")];
    write_table(&dir.join(&names[0]), "person", &theta)?;
    write_table(&dir.join(&names[1]), "item", &loadings)?;
    write_table(&dir.join(&names[2]), "item", &intercepts)?;
    Ok(names.to_vec())
}

/// Reads the three parameter files back into a [`ParameterSet`].
pub fn read_params(theta: &Path, loadings: &Path, intercepts: &Path) -> CliResult<ParameterSet> {
    let t = read_table(theta)?;
    let a = read_table(loadings)?;
    let d = read_table(intercepts)?;
    if d.values.ncols() != 1 {
        return Err(CliError::input(format!(
            "{}: expected one intercept column, found {}",
            intercepts.display(),
            d.values.ncols()
        )));
    }
    if t.values.ncols() != a.values.ncols() {
        return Err(CliError::input(format!(
            "{} has {} factor columns but {} has {}",
            theta.display(),
            t.values.ncols(),
            loadings.display(),
            a.values.ncols()
        )));
    }
    if a.values.nrows() != d.values.nrows() {
        return Err(CliError::input(format!(
            "{} has {} items but {} has {}",
            loadings.display(),
            a.values.nrows(),
            intercepts.display(),
            d.values.nrows()
        )));
    }
    let d: Array1<f64> = d.values.column(0).to_owned();
    Ok(ParameterSet::new(t.values, a.values, d)?)
}
