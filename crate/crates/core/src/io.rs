//! File formats: LDCX binary matrices, instance directories and `key=value`
//! configuration text.
//!
//! An LDCX file is the magic `LDCX`, a little-endian `u32` version, `u64`
//! rows and `u64` cols, then `rows * cols` pairs of little-endian `f64`
//! `(re, im)` in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::lifting::{gen_subspaces, CMatrix, GroundTruth, MeasurementSet, SubspaceEnsemble};
use crate::{Error, Result, C64};

pub const MAGIC: &[u8; 4] = b"LDCX";
pub const VERSION: u32 = 1;

/// Format a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

const MAX_ENTRIES: u64 = 1 << 32;

pub fn read_matrix<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing LDCX magic".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported LDCX version {version}")));
    }
    let rows = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Format("row count overflows".into()))?;
    let cols = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Format("column count overflows".into()))?;
    let count = rows
        .checked_mul(cols)
        .filter(|c| *c as u64 <= MAX_ENTRIES)
        .ok_or_else(|| Error::Format(format!("implausible LDCX shape {rows} x {cols}")))?;
    // a truncated file fails on read, so do not trust the header for the allocation
    let mut data = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(C64::new(re, im));
    }
    Ok(CMatrix::from_row_slice(rows, cols, &data))
}

pub fn save_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<CMatrix> {
    read_matrix(std::io::BufReader::new(fs::File::open(path)?))
}

/// Parse `key=value` lines. Blank lines and `#` comments are skipped;
/// later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Format(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn format_key_values(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

/// Sensing-matrix variance convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VarianceMode {
    /// Entries of `C_n` have variance `1/L`.
    #[default]
    InvLen,
    /// Unit-variance entries.
    Unit,
}

impl VarianceMode {
    pub fn variance(self, len: usize) -> f64 {
        match self {
            VarianceMode::InvLen => 1.0 / len as f64,
            VarianceMode::Unit => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VarianceMode::InvLen => "1/L",
            VarianceMode::Unit => "1",
        }
    }
}

impl std::str::FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/L" | "1/l" | "inv-len" => Ok(VarianceMode::InvLen),
            "1" | "unit" => Ok(VarianceMode::Unit),
            other => Err(Error::InvalidParameter(format!("variance must be 1/L or 1, got '{other}'"))),
        }
    }
}

/// A Gaussian instance as stored on disk: `instance.txt` holds the
/// ensemble parameters, `measurements.ldcx` the `L x N` data and the
/// optional `truth_h.ldcx` (`L x 1`) and `truth_m.ldcx` (`KN x 1`, real).
#[derive(Clone, Debug)]
pub struct Instance {
    pub len: usize,
    pub dim: usize,
    pub channels: usize,
    pub seed: u64,
    pub variance: VarianceMode,
    pub measurements: MeasurementSet,
    pub truth: Option<GroundTruth>,
}

impl Instance {
    pub fn ensemble(&self) -> Result<SubspaceEnsemble> {
        gen_subspaces(self.len, self.dim, self.channels, self.seed, self.variance.variance(self.len))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut meta = BTreeMap::new();
        meta.insert("format".to_string(), "liftdeconv-instance".to_string());
        meta.insert("L".to_string(), self.len.to_string());
        meta.insert("K".to_string(), self.dim.to_string());
        meta.insert("N".to_string(), self.channels.to_string());
        meta.insert("seed".to_string(), self.seed.to_string());
        meta.insert("variance".to_string(), self.variance.as_str().to_string());
        fs::write(dir.join("instance.txt"), format_key_values(&meta))?;
        save_matrix(&dir.join("measurements.ldcx"), &self.measurements.0)?;
        if let Some(gt) = &self.truth {
            save_matrix(&dir.join("truth_h.ldcx"), &CMatrix::from_column_slice(gt.len(), 1, &gt.h))?;
            save_matrix(
                &dir.join("truth_m.ldcx"),
                &CMatrix::from_column_slice(gt.m.len(), 1, &gt.m_complex()),
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = parse_key_values(&fs::read_to_string(dir.join("instance.txt"))?)?;
        let get = |key: &str| -> Result<&String> {
            meta.get(key)
                .ok_or_else(|| Error::Format(format!("instance.txt is missing '{key}'")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("'{key}' is not an integer")))
        };
        let len = parse_usize("L")?;
        let dim = parse_usize("K")?;
        let channels = parse_usize("N")?;
        let seed = get("seed")?
            .parse()
            .map_err(|_| Error::Format("'seed' is not an integer".into()))?;
        let variance = get("variance")?.parse()?;
        let measurements = MeasurementSet(load_matrix(&dir.join("measurements.ldcx"))?);
        if measurements.0.shape() != (len, channels) {
            return Err(Error::ShapeMismatch {
                expected_rows: len,
                expected_cols: channels,
                rows: measurements.0.nrows(),
                cols: measurements.0.ncols(),
            });
        }
        let h_path = dir.join("truth_h.ldcx");
        let truth = if h_path.exists() {
            let h = load_matrix(&h_path)?;
            let m = load_matrix(&dir.join("truth_m.ldcx"))?;
            if m.iter().any(|z| z.im != 0.0) {
                return Err(Error::Format("truth_m must be real".into()));
            }
            Some(GroundTruth::new(
                h.iter().copied().collect(),
                m.iter().map(|z| z.re).collect(),
                dim,
            )?)
        } else {
            None
        };
        Ok(Self {
            len,
            dim,
            channels,
            seed,
            variance,
            measurements,
            truth,
        })
    }
}
