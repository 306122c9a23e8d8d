//! Files written by the commands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nestfus::analysis::OnAxisProfile;
use nestfus::cascade::{SolveReport, StageTimings};
use nestfus::HarmonicField;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The computation is deterministic; recorded so replays can check.
    pub threads: usize,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub solves: Vec<SolveRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRecord {
    pub harmonic: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl From<&SolveReport> for SolveRecord {
    fn from(s: &SolveReport) -> Self {
        Self { harmonic: s.harmonic, iterations: s.iterations, residual: s.residual }
    }
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> CliResult<PathBuf> {
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_text(&path, &text)?;
    Ok(path)
}

pub fn axis_csv_name(harmonic: usize) -> String {
    format!("p{harmonic}_axis.csv")
}

pub fn write_axis_csv(path: &Path, profile: &OnAxisProfile<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(nestfus::Error::from)?;
    w.write_record(["x_m", "re_Pa", "im_Pa", "abs_Pa"]).map_err(nestfus::Error::from)?;
    for (x, v) in profile.x.iter().zip(&profile.values) {
        let row = [*x, v.re, v.im, v.norm()].map(|f| f.to_string());
        w.write_record(&row).map_err(nestfus::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Sidecar header of a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub harmonic: usize,
    pub dims: [usize; 3],
    pub delta_x: f64,
    /// Centre of voxel `(0, 0, 0)`, m.
    pub origin: [f64; 3],
    pub wavenumber_re: f64,
    pub wavenumber_im: f64,
    /// Little-endian `(re, im)` f64 pairs, x varying fastest.
    pub data: String,
}

pub fn dump_field(dir: &Path, field: &HarmonicField<f64>) -> CliResult<Vec<String>> {
    let n = field.harmonic();
    let data = format!("p{n}.bin");
    let hdr = format!("p{n}.hdr.toml");
    let path = dir.join(&data);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for z in &field.values {
        w.write_all(&z.re.to_le_bytes()).map_err(|e| CliError::io(&path, e))?;
        w.write_all(&z.im.to_le_bytes()).map_err(|e| CliError::io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let header = FieldHeader {
        harmonic: n,
        dims: field.grid.dims,
        delta_x: field.grid.delta_x,
        origin: field.grid.origin,
        wavenumber_re: field.wavenumber.k.re,
        wavenumber_im: field.wavenumber.k.im,
        data: data.clone(),
    };
    write_text(&dir.join(&hdr), &toml::to_string(&header).expect("header serializes"))?;
    Ok(vec![data, hdr])
}

pub fn timing_rows(rows: &[StageTimings]) -> String {
    nestfus::cascade::timing_table(rows)
}
