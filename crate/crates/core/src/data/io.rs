//! File formats.
//!
//! Binary dataset: `SMMDATA1`, then `n, p, q` as little-endian `u64`, then
//! per sample the label followed by its `p·q` entries in row-major order,
//! all little-endian `f64`.
//!
//! CSV dataset: a header line `# smm n=<n> p=<p> q=<q>` and one line per
//! sample, label first, entries row-major.
//!
//! Binary model: `SMMMODL1`, `p, q` as `u64`, then `b` and `W` row-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Result, SmmError};
use crate::model::Dataset;
use crate::Matrix;

const DATA_MAGIC: &[u8; 8] = b"SMMDATA1";
const MODEL_MAGIC: &[u8; 8] = b"SMMMODL1";
const CSV_PREFIX: &str = "# smm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Binary,
    Csv,
}

impl DatasetFormat {
    /// Guesses from the extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Binary,
        }
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path, format: DatasetFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        DatasetFormat::Binary => write_binary(ds, &mut out)?,
        DatasetFormat::Csv => write_csv(ds, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn row_major(ds: &Dataset, i: usize) -> impl Iterator<Item = f64> + '_ {
    let (p, q) = ds.shape();
    let x = ds.sample_slice(i);
    (0..p).flat_map(move |k| (0..q).map(move |l| x[l * p + k]))
}

fn write_binary(ds: &Dataset, out: &mut impl Write) -> Result<()> {
    out.write_all(DATA_MAGIC)?;
    for d in [ds.n_samples(), ds.rows(), ds.cols()] {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for i in 0..ds.n_samples() {
        out.write_all(&ds.labels()[i].to_le_bytes())?;
        for v in row_major(ds, i) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_csv(ds: &Dataset, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "{CSV_PREFIX} n={} p={} q={}",
        ds.n_samples(),
        ds.rows(),
        ds.cols()
    )?;
    for i in 0..ds.n_samples() {
        write!(out, "{}", ds.labels()[i])?;
        for v in row_major(ds, i) {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Loads a dataset, detecting the format from the first bytes.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = BufReader::new(File::open(path)?);
    let head = reader.fill_buf()?;
    if head.starts_with(DATA_MAGIC) {
        read_binary(&mut reader)
    } else if head.starts_with(CSV_PREFIX.as_bytes()) {
        read_csv(reader)
    } else {
        Err(SmmError::Parse {
            offset: 0,
            message: "unrecognized dataset header".into(),
        })
    }
}

/// Little-endian reader that tracks its byte offset.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(SmmError::Parse {
                        offset: self.offset + filled as u64,
                        message: format!("unexpected end of file while reading {what}"),
                    })
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(SmmError::Parse {
                offset: self.offset,
                message: "trailing bytes after payload".into(),
            }),
        }
    }
}

fn check_dims(n: u64, p: u64, q: u64, offset: u64) -> Result<(usize, usize, usize)> {
    let bad = |m: &str| SmmError::Parse {
        offset,
        message: m.to_string(),
    };
    if n == 0 || p == 0 || q == 0 {
        return Err(bad("dimensions must be positive"));
    }
    let total = n
        .checked_mul(p)
        .and_then(|x| x.checked_mul(q))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if total > (1u64 << 40) {
        return Err(bad("dimensions implausibly large"));
    }
    Ok((n as usize, p as usize, q as usize))
}

fn parse_label(y: f64, offset: u64) -> Result<f64> {
    if y == 1.0 || y == -1.0 {
        Ok(y)
    } else {
        Err(SmmError::Parse {
            offset,
            message: format!("label must be ±1, got {y}"),
        })
    }
}

fn read_binary(reader: impl Read) -> Result<Dataset> {
    let mut cur = Cursor {
        inner: reader,
        offset: 0,
    };
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic, "magic")?;
    let dims_at = cur.offset;
    let (n, p, q) = check_dims(
        cur.u64("n")?,
        cur.u64("p")?,
        cur.u64("q")?,
        dims_at,
    )?;
    let pq = p * q;
    let mut features = vec![0.0; n * pq];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let at = cur.offset;
        labels.push(parse_label(cur.f64("label")?, at)?);
        for k in 0..p {
            for l in 0..q {
                let at = cur.offset;
                let v = cur.f64("feature")?;
                if !v.is_finite() {
                    return Err(SmmError::Parse {
                        offset: at,
                        message: format!("non-finite feature in sample {i}"),
                    });
                }
                features[i * pq + l * p + k] = v;
            }
        }
    }
    cur.expect_eof()?;
    Dataset::new(p, q, features, labels)
}

fn read_csv(mut reader: impl BufRead) -> Result<Dataset> {
    let mut line = String::new();
    let mut offset = 0u64;
    reader.read_line(&mut line)?;
    let header = line.trim_end();
    let mut dims = [None; 3];
    for tok in header[CSV_PREFIX.len()..].split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| SmmError::Parse {
            offset,
            message: format!("malformed header token {tok:?}"),
        })?;
        let slot = match key {
            "n" => 0,
            "p" => 1,
            "q" => 2,
            _ => continue,
        };
        dims[slot] = Some(val.parse::<u64>().map_err(|_| SmmError::Parse {
            offset,
            message: format!("bad header value {tok:?}"),
        })?);
    }
    let [Some(n), Some(p), Some(q)] = dims else {
        return Err(SmmError::Parse {
            offset,
            message: "header must define n, p and q".into(),
        });
    };
    let (n, p, q) = check_dims(n, p, q, offset)?;
    offset += line.len() as u64;

    let pq = p * q;
    let mut features = vec![0.0; n * pq];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            return Err(SmmError::Parse {
                offset,
                message: format!("expected {n} samples, found {i}"),
            });
        }
        let mut fields = line.trim_end().split(',');
        let mut next = |what: &str| -> Result<f64> {
            let tok = fields.next().ok_or_else(|| SmmError::Parse {
                offset,
                message: format!("sample {i}: missing {what}"),
            })?;
            tok.trim().parse::<f64>().map_err(|_| SmmError::Parse {
                offset,
                message: format!("sample {i}: cannot parse {tok:?}"),
            })
        };
        labels.push(parse_label(next("label")?, offset)?);
        for k in 0..p {
            for l in 0..q {
                let v = next("feature")?;
                if !v.is_finite() {
                    return Err(SmmError::Parse {
                        offset,
                        message: format!("sample {i}: non-finite feature"),
                    });
                }
                features[i * pq + l * p + k] = v;
            }
        }
        if fields.next().is_some() {
            return Err(SmmError::Parse {
                offset,
                message: format!("sample {i}: more than {} values", pq + 1),
            });
        }
        offset += read as u64;
    }
    Dataset::new(p, q, features, labels)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    let (p, q) = model.w.shape();
    out.write_all(&(p as u64).to_le_bytes())?;
    out.write_all(&(q as u64).to_le_bytes())?;
    out.write_all(&model.b.to_le_bytes())?;
    for k in 0..p {
        for l in 0..q {
            out.write_all(&model.w[(k, l)].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut cur = Cursor {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
    };
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic, "magic")?;
    if &magic != MODEL_MAGIC {
        return Err(SmmError::Parse {
            offset: 0,
            message: "not a model file".into(),
        });
    }
    let at = cur.offset;
    let (_, p, q) = check_dims(1, cur.u64("p")?, cur.u64("q")?, at)?;
    let b = cur.f64("b")?;
    let mut w = Matrix::zeros(p, q);
    for k in 0..p {
        for l in 0..q {
            w[(k, l)] = cur.f64("W")?;
        }
    }
    cur.expect_eof()?;
    Model::new(w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SynthSpec};

    fn sample_ds() -> Dataset {
        gen_synthetic(&SynthSpec {
            n: 30,
            p: 3,
            q: 4,
            r: 2,
            seed: 9,
            ..SynthSpec::default()
        })
        .unwrap()
        .train
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = sample_ds();
        save_dataset(&ds, &path, DatasetFormat::Binary).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = sample_ds();
        save_dataset(&ds, &path, DatasetFormat::Csv).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn binary_layout_is_row_major() {
        let x = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let ds = Dataset::from_samples(&[x.clone(), -x], &[1.0, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_binary(&ds, &mut buf).unwrap();
        assert_eq!(&buf[..8], DATA_MAGIC);
        let first: Vec<f64> = buf[32..72]
            .chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(first, vec![1.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = sample_ds();
        save_dataset(&ds, &path, DatasetFormat::Binary).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..100]).unwrap();
        match load_dataset(&path) {
            Err(SmmError::Parse { offset, message }) => {
                assert_eq!(offset, 100);
                assert!(message.contains("end of file"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "# smm n=2 p=1 q=1\n1,0.5\n0,0.25\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("label must be ±1"), "{err}");
        match err {
            SmmError::Parse { offset, .. } => assert_eq!(offset, 24),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = Model::new(Matrix::from_fn(3, 5, |i, j| i as f64 - 0.3 * j as f64), -0.7).unwrap();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn unknown_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, "hello").unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(SmmError::Parse { offset: 0, .. })
        ));
    }
}
