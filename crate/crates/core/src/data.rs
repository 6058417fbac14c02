//! Observation matrices and their file formats.
//!
//! Rows are channels (`p`), columns are samples (`n`). Two formats are
//! supported: CSV with an optional header row of column labels, and a raw
//! little-endian binary layout of an 8-byte magic, `u32 p`, `u32 n` and
//! `p * n` row-major `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"ADISMAT1";

#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (p, n) = values.shape();
        if p < 2 {
            return Err(CoreError::InvalidData(format!(
                "need at least 2 channels, got {p}"
            )));
        }
        if n < 2 {
            return Err(CoreError::InvalidData(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos % p,
                pos / p
            )));
        }
        if n < p {
            log::warn!(
                "fewer samples ({n}) than channels ({p}); covariance will be rank deficient"
            );
        }
        Ok(Self {
            values,
            row_labels: None,
            col_labels: None,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn samples(&self) -> usize {
        self.values.ncols()
    }

    /// Reads CSV or binary, chosen by the leading magic bytes.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut head = [0u8; 8];
        let mut file = File::open(path).map_err(|e| io_err(path, e))?;
        let got = file.read(&mut head).map_err(|e| io_err(path, e))?;
        if got == 8 && &head == BINARY_MAGIC {
            Self::read_binary(path)
        } else {
            Self::read_csv(path)
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let (values, header) =
            parse_csv(BufReader::new(file)).map_err(|message| CoreError::Format {
                path: path.display().to_string(),
                message,
            })?;
        let mut data = Self::new(values)?;
        data.col_labels = header;
        Ok(data)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, &self.values, self.col_labels.as_deref())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let values =
            read_binary_matrix(BufReader::new(file)).map_err(|message| CoreError::Format {
                path: path.display().to_string(),
                message,
            })?;
        Self::new(values)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_binary(path, &self.values)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_csv<R: Read>(
    input: R,
) -> std::result::Result<(DMatrix<f64>, Option<Vec<String>>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(format!(
                            "line {}: expected {} fields, found {}",
                            line + 1,
                            first.len(),
                            row.len()
                        ));
                    }
                }
                rows.push(row);
            }
            Err(_) if line == 0 => {
                header = Some(record.iter().map(str::to_string).collect());
            }
            Err(e) => return Err(format!("line {}: {e}", line + 1)),
        }
    }
    if rows.is_empty() {
        return Err("no numeric rows".into());
    }
    if let Some(h) = &header {
        if h.len() != rows[0].len() {
            return Err(format!(
                "header has {} fields, rows have {}",
                h.len(),
                rows[0].len()
            ));
        }
    }
    let (p, n) = (rows.len(), rows[0].len());
    Ok((DMatrix::from_fn(p, n, |i, j| rows[i][j]), header))
}

/// Writes a matrix as CSV, one row per line, with an optional header.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    m: &DMatrix<f64>,
    header: Option<&[String]>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| CoreError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(h) = header {
        writer.write_record(h).map_err(fail)?;
    }
    let mut buf = vec![String::new(); m.ncols()];
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf[j] = format!("{:?}", m[(i, j)]);
        }
        writer.write_record(&buf).map_err(fail)?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Reads a plain numeric CSV matrix (optional header ignored).
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_csv(BufReader::new(file))
        .map(|(m, _)| m)
        .map_err(|message| CoreError::Format {
            path: path.display().to_string(),
            message,
        })
}

pub fn write_matrix_binary(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let (p, n) = m.shape();
    let too_big = |d: usize| {
        u32::try_from(d)
            .map_err(|_| CoreError::InvalidArgument(format!("dimension {d} exceeds u32")))
    };
    let (p32, n32) = (too_big(p)?, too_big(n)?);
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |bytes: &[u8]| out.write_all(bytes).map_err(|e| io_err(path, e));
    write(BINARY_MAGIC)?;
    write(&p32.to_le_bytes())?;
    write(&n32.to_le_bytes())?;
    for i in 0..p {
        for j in 0..n {
            write(&m[(i, j)].to_le_bytes())?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn read_binary_matrix<R: Read>(mut input: R) -> std::result::Result<DMatrix<f64>, String> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| format!("header: {e}"))?;
    if &magic != BINARY_MAGIC {
        return Err("bad magic bytes".into());
    }
    let mut word = [0u8; 4];
    input
        .read_exact(&mut word)
        .map_err(|e| format!("header: {e}"))?;
    let p = u32::from_le_bytes(word) as usize;
    input
        .read_exact(&mut word)
        .map_err(|e| format!("header: {e}"))?;
    let n = u32::from_le_bytes(word) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| e.to_string())?;
    if bytes.len() != p * n * 8 {
        return Err(format!(
            "expected {} bytes of values for {p}x{n}, found {}",
            p * n * 8,
            bytes.len()
        ));
    }
    let mut m = DMatrix::zeros(p, n);
    for (k, chunk) in bytes.chunks_exact(8).enumerate() {
        m[(k / n, k % n)] = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
    }
    Ok(m)
}

pub fn read_matrix_binary(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_binary_matrix(BufReader::new(file)).map_err(|message| CoreError::Format {
        path: path.display().to_string(),
        message,
    })
}
