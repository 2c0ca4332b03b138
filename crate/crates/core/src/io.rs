//! File formats: histogram datasets, dense detector matrices, number
//! distributions, JSON reports and run manifests.
//!
//! Reals are written with 12 significant digits, except dataset times, which
//! use the shortest representation that parses back to the same `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::HistogramDataset;
use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::state::DiagonalState;

pub const DATASET_HEADER: [&str; 3] = ["time_us", "n", "count"];
pub const MANIFEST_FILE: &str = "manifest.json";

/// `x` with 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Json,
}

impl DatasetFormat {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    times_us: Vec<f64>,
    counts: Vec<Vec<u64>>,
}

/// One row per `(time, n)` for `n` in `0 ..= n_max`, zeros included.
pub fn write_dataset_csv<W: Write>(data: &HistogramDataset<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    let width = data.n_max() + 1;
    for (t, counts) in data.times_us().iter().zip(data.counts()) {
        for n in 0..width {
            let c = counts.get(n).copied().unwrap_or(0);
            w.write_record([t.to_string(), n.to_string(), c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses the CSV format. Rows may come in any order; rows repeating a
/// `(time, n)` pair or a time add their counts.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<HistogramDataset<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != DATASET_HEADER {
        return Err(Error::Parse {
            line: 1,
            reason: format!(
                "expected header {}, got {}",
                DATASET_HEADER.join(","),
                header.join(",")
            ),
        });
    }
    let mut rows: Vec<(f64, Vec<u64>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fail = |reason: String| Error::Parse { line, reason };
        if record.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", record.len())));
        }
        let t: f64 = record[0]
            .parse()
            .map_err(|_| fail(format!("time {:?} is not a number", &record[0])))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(fail(format!("time {t} must be finite and >= 0")));
        }
        let n: usize = record[1].parse().map_err(|_| {
            fail(format!(
                "count index {:?} is not a non-negative integer",
                &record[1]
            ))
        })?;
        let c: u64 = record[2].parse().map_err(|_| {
            if record[2].starts_with('-') {
                fail(format!("negative count {}", &record[2]))
            } else {
                fail(format!(
                    "count {:?} is not a non-negative integer",
                    &record[2]
                ))
            }
        })?;
        let mut histogram = vec![0; n + 1];
        histogram[n] = c;
        rows.push((t, histogram));
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("file has no data rows".into()));
    }
    HistogramDataset::from_rows(rows)
}

pub fn write_dataset_json<W: Write>(data: &HistogramDataset<f64>, out: W) -> Result<()> {
    let width = data.n_max() + 1;
    let doc = DatasetJson {
        times_us: data.times_us().to_vec(),
        counts: data
            .counts()
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.resize(width, 0);
                c
            })
            .collect(),
    };
    serde_json::to_writer(out, &doc)?;
    Ok(())
}

pub fn read_dataset_json<R: Read>(input: R) -> Result<HistogramDataset<f64>> {
    let doc: DatasetJson = serde_json::from_reader(input)?;
    if doc.times_us.len() != doc.counts.len() {
        return Err(Error::InvalidDataset(format!(
            "{} times but {} count rows",
            doc.times_us.len(),
            doc.counts.len()
        )));
    }
    HistogramDataset::from_rows(doc.times_us.into_iter().zip(doc.counts).collect())
}

/// Reads a dataset, choosing the format from the extension.
pub fn ingest(path: &Path) -> Result<HistogramDataset<f64>> {
    let file = fs::File::open(path)?;
    match DatasetFormat::from_path(path) {
        DatasetFormat::Csv => read_dataset_csv(file),
        DatasetFormat::Json => read_dataset_json(file),
    }
}

pub fn save_dataset(data: &HistogramDataset<f64>, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    match DatasetFormat::from_path(path) {
        DatasetFormat::Csv => write_dataset_csv(data, file),
        DatasetFormat::Json => write_dataset_json(data, file),
    }
}

/// Dense matrix, one line per detected count `n`, no header.
pub fn write_detector_csv<W: Write>(v: &DetectorMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for n in 0..v.dim() {
        w.write_record(v.row(n).iter().map(|&x| fmt_real(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_detector_csv<R: Read>(input: R) -> Result<DetectorMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for field in record.iter() {
            data.push(field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("{field:?} is not a number"),
            })?);
        }
        rows += 1;
    }
    if rows == 0 || data.len() != rows * rows {
        return Err(Error::InvalidDetector(format!(
            "expected a square matrix, got {rows} rows and {} entries",
            data.len()
        )));
    }
    DetectorMatrix::new(rows - 1, data)
}

pub fn write_rho_csv<W: Write>(rho: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "rho"])?;
    for (n, &x) in rho.iter().enumerate() {
        w.write_record([n.to_string(), fmt_real(x)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `N,rho` rows; missing `N` are zero.
pub fn read_rho_csv<R: Read>(input: R) -> Result<DiagonalState<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut weights: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fail = |reason: String| Error::Parse { line, reason };
        if record.len() != 2 {
            return Err(fail(format!("expected 2 fields, got {}", record.len())));
        }
        let n: usize = record[0]
            .parse()
            .map_err(|_| fail(format!("bad atom number {:?}", &record[0])))?;
        let w: f64 = record[1]
            .parse()
            .map_err(|_| fail(format!("bad weight {:?}", &record[1])))?;
        if weights.len() <= n {
            weights.resize(n + 1, 0.0);
        }
        weights[n] += w;
    }
    DiagonalState::new(weights)
}

/// Generic numeric table with a header row.
/// Integral cells such as indices and counts are written without an exponent.
pub fn write_table<W: Write>(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
    out: W,
) -> Result<()> {
    let cell = |x: f64| {
        if x.fract() == 0.0 && x.abs() < 1e15 {
            format!("{}", x as i64)
        } else {
            fmt_real(x)
        }
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(cell))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(value: &S, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(fs::File::open(path)?)?)
}

/// One invocation recorded in an output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
    pub duration_s: f64,
    /// Seconds since the Unix epoch when the record was written.
    pub finished_at: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            duration_s: 0.0,
            finished_at: 0,
        }
    }

    /// Appends this record to `dir/manifest.json`, keeping earlier records.
    pub fn append_to(mut self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut records: Vec<RunManifest> = if path.exists() {
            read_json(&path)?
        } else {
            Vec::new()
        };
        self.finished_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        records.push(self);
        write_json(&records, &path)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Vec<RunManifest>> {
    read_json(&dir.join(MANIFEST_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> HistogramDataset<f64> {
        HistogramDataset::from_counts(
            vec![0.1 + 0.2, 2.52, 18.48],
            vec![vec![5, 1], vec![0, 3, 2], vec![4]],
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let data = sample();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back.times_us(), data.times_us());
        assert_eq!(back.counts()[1], data.counts()[1]);
        assert_eq!(back.counts()[2], vec![4, 0, 0]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_dataset_json(&sample(), &mut buf).unwrap();
        let back = read_dataset_json(buf.as_slice()).unwrap();
        assert_eq!(back.times_us(), sample().times_us());
    }

    #[test]
    fn negative_count_names_the_line() {
        let text = "time_us,n,count\n0,0,4\n0,1,-2\n";
        match read_dataset_csv(text.as_bytes()) {
            Err(Error::Parse { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("negative"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_times_are_merged() {
        let text = "time_us,n,count\n1.5,0,4\n1.5,1,2\n0,0,3\n1.5,1,5\n";
        let data = read_dataset_csv(text.as_bytes()).unwrap();
        assert_eq!(data.times_us(), &[0.0, 1.5]);
        assert_eq!(data.counts()[1], vec![4, 7]);
    }

    #[test]
    fn detector_round_trip_to_twelve_digits() {
        let v =
            DetectorMatrix::from_columns(&[vec![0.9, 0.1], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_detector_csv(&v, &mut buf).unwrap();
        let back = read_detector_csv(buf.as_slice()).unwrap();
        for (a, b) in v.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
