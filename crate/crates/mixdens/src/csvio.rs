//! CSV input and output. Files are RFC 4180 with a required header row and
//! '.' as the decimal separator; numbers are written in the shortest form
//! that parses back to the same `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use mixdens_core::DataMatrix;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}, column '{column}': cannot parse '{value}' as a number")]
    NotANumber {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column '{column}': value is not finite")]
    NotFinite { line: u64, column: String },
    #[error("the file has no header row")]
    MissingHeader,
    #[error("the file has no data rows")]
    Empty,
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("no column named '{name}'; available: {available}")]
    MissingColumn { name: String, available: String },
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub data: DataMatrix,
}

impl Table {
    pub fn new(names: Vec<String>, data: DataMatrix) -> Self {
        assert_eq!(names.len(), data.ncols(), "one name per column");
        Self { names, data }
    }

    /// Default names `prefix1, prefix2, ...`.
    pub fn numbered(prefix: &str, data: DataMatrix) -> Self {
        let names = (1..=data.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self { names, data }
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CsvError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CsvError::MissingColumn {
                name: name.to_string(),
                available: self.names.join(", "),
            })
    }

    /// Splits into the remaining columns and the named regressor columns.
    pub fn split_regressors(
        &self,
        regressors: &[String],
    ) -> Result<(Table, Option<Table>), CsvError> {
        if regressors.is_empty() {
            return Ok((self.clone(), None));
        }
        let z_idx = regressors
            .iter()
            .map(|r| self.column_index(r))
            .collect::<Result<Vec<_>, _>>()?;
        let y_idx: Vec<usize> = (0..self.names.len())
            .filter(|j| !z_idx.contains(j))
            .collect();
        Ok((self.select(&y_idx), Some(self.select(&z_idx))))
    }

    fn select(&self, columns: &[usize]) -> Table {
        let n = self.data.nrows();
        let mut values = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            let row = self.data.row(i);
            values.extend(columns.iter().map(|&j| row[j]));
        }
        Table {
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
            data: DataMatrix::new(n, columns.len(), values).expect("consistent shape"),
        }
    }

    /// Appends the columns of `other`, which must have as many rows.
    pub fn hstack(&self, other: &Table) -> Table {
        let n = self.data.nrows();
        assert_eq!(n, other.data.nrows(), "row counts differ");
        let cols = self.names.len() + other.names.len();
        let mut values = Vec::with_capacity(n * cols);
        for i in 0..n {
            values.extend_from_slice(self.data.row(i));
            values.extend_from_slice(other.data.row(i));
        }
        Table {
            names: self.names.iter().chain(&other.names).cloned().collect(),
            data: DataMatrix::new(n, cols, values).expect("consistent shape"),
        }
    }
}

pub fn read_table(path: &Path) -> Result<Table, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table_from(file)
}

pub fn read_table_from<R: Read>(reader: R) -> Result<Table, CsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(malformed)?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(CsvError::MissingHeader);
    }
    for (j, name) in names.iter().enumerate() {
        if names[..j].contains(name) {
            return Err(CsvError::DuplicateColumn(name.clone()));
        }
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(malformed)?;
        let line = record.position().map_or(0, |p| p.line());
        for (field, column) in record.iter().zip(&names) {
            let v: f64 = field.parse().map_err(|_| CsvError::NotANumber {
                line,
                column: column.clone(),
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CsvError::NotFinite {
                    line,
                    column: column.clone(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CsvError::Empty);
    }
    let data = DataMatrix::new(rows, names.len(), values).expect("rows have equal length");
    Ok(Table { names, data })
}

fn malformed(e: csv::Error) -> CsvError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    CsvError::Malformed { line, message }
}

/// Shortest representation that round-trips through `str::parse::<f64>`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_table(path: &Path, table: &Table) -> Result<(), CsvError> {
    let io = |source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::create(path).map_err(io)?;
    write_table_to(&mut file, table).map_err(io)?;
    file.flush().map_err(io)
}

pub fn write_table_to<W: Write>(writer: W, table: &Table) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&table.names)?;
    for row in table.data.rows() {
        wtr.write_record(row.iter().map(|v| format_number(*v)))?;
    }
    wtr.flush()
}

/// Writes string records with a header row.
pub fn write_records<W: Write>(
    writer: W,
    header: &[&str],
    records: &[Vec<String>],
) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(header)?;
    for r in records {
        wtr.write_record(r)?;
    }
    wtr.flush()
}
