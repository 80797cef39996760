//! On-disk formats: CSV tables with a provenance header, matrices, model
//! headers and ground-truth sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::MeasurementModel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Written as `#` comment lines above every CSV table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub schema: &'static str,
    pub config_hash: String,
    /// `None` for production releases.
    pub seed: Option<u64>,
}

impl Provenance {
    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# dp-residual {VERSION} schema={}/1", self.schema)?;
        writeln!(w, "# config_sha256={}", self.config_hash)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed={s}"),
            None => writeln!(w, "# seed=unrecorded"),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

/// Serializes `rows` with a header row taken from the struct fields.
pub fn write_table<T: Serialize>(path: &Path, prov: &Provenance, rows: &[T]) -> Result<(), CliError> {
    let mut file = create(path)?;
    prov.write_to(&mut file).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A two-column `quantity,value` table.
pub fn write_summary(path: &Path, prov: &Provenance, rows: &[(&str, String)]) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Row<'a> {
        quantity: &'a str,
        value: &'a str,
    }
    let rows: Vec<Row> = rows
        .iter()
        .map(|(q, v)| Row {
            quantity: q,
            value: v,
        })
        .collect();
    write_table(path, prov, &rows)
}

pub fn read_table<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

pub fn read_summary(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    #[derive(Deserialize)]
    struct Row {
        quantity: String,
        value: String,
    }
    Ok(read_table::<Row>(path)?
        .into_iter()
        .map(|r| (r.quantity, r.value))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub index: usize,
    pub z: f64,
}

pub fn read_measurements(path: &Path, m: usize) -> Result<Vec<f64>, CliError> {
    let rows: Vec<Measurement> = read_table(path)?;
    if rows.len() != m || rows.iter().enumerate().any(|(i, r)| r.index != i) {
        return Err(CliError::Schema(format!(
            "{}: expected rows 0..{m} in order",
            path.display()
        )));
    }
    Ok(rows.into_iter().map(|r| r.z).collect())
}

/// Plain CSV, one matrix row per line, no header.
pub fn write_matrix(path: &Path, h: &DMatrix<f64>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    for row in h.row_iter() {
        let rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Schema(format!("{}: ragged or empty matrix", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// TOML header stored next to a model's matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format: String,
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub lambda: f64,
    /// Relative to the header file.
    pub matrix: PathBuf,
}

pub const MODEL_FORMAT: &str = "dp-residual-model/1";

pub fn write_model(header_path: &Path, model: &MeasurementModel) -> Result<(), CliError> {
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model");
    let matrix = PathBuf::from(format!("{stem}.csv"));
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        m: model.m(),
        n: model.n(),
        sigma: model.sigma(),
        lambda: model.lambda(),
        matrix: matrix.clone(),
    };
    let dir = header_path.parent().unwrap_or(Path::new("."));
    write_matrix(&dir.join(matrix), model.h())?;
    let text = toml::to_string(&header).expect("header serializes");
    std::fs::write(header_path, text).map_err(|e| CliError::io(header_path, e))
}

pub fn read_model(header_path: &Path) -> Result<MeasurementModel, CliError> {
    let text = std::fs::read_to_string(header_path).map_err(|e| CliError::io(header_path, e))?;
    let header: ModelHeader = toml::from_str(&text)
        .map_err(|e| CliError::Schema(format!("{}: {e}", header_path.display())))?;
    if header.format != MODEL_FORMAT {
        return Err(CliError::Schema(format!("unsupported model format `{}`", header.format)));
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let h = read_matrix(&dir.join(&header.matrix))?;
    if h.shape() != (header.m, header.n) {
        return Err(CliError::Schema(format!(
            "matrix is {}x{}, header says {}x{}",
            h.nrows(),
            h.ncols(),
            header.m,
            header.n
        )));
    }
    Ok(MeasurementModel::new(h, header.sigma, header.lambda)?)
}

/// Ground truth behind a simulated measurement file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub seed: u64,
    pub config_sha256: String,
    pub x_true: Vec<f64>,
    pub attack_indices: Vec<usize>,
    pub attack_values: Vec<f64>,
}

pub fn write_truth(path: &Path, truth: &Truth) -> Result<(), CliError> {
    let text = toml::to_string(truth).expect("truth serializes");
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_truth(path: &Path) -> Result<Truth, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}
