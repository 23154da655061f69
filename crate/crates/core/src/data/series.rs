//! Raw multivariate series: CSV ingestion and a synthetic generator for
//! hermetic tests.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// A T x m block of observations, one row per time step.
#[derive(Clone, Debug)]
pub struct RawSeries {
    pub name: String,
    /// Raw date strings when the file had a date column; unused by models.
    pub timestamps: Option<Vec<String>>,
    pub values: Matrix,
    pub columns: Vec<String>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn vars(&self) -> usize {
        self.values.cols()
    }

    /// Keep only the last variable (the convention for univariate runs).
    pub fn last_variable(&self) -> RawSeries {
        let m = self.vars();
        assert!(m >= 1);
        let values = Matrix::from_fn(self.len(), 1, |r, _| self.values.at(r, m - 1));
        RawSeries {
            name: self.name.clone(),
            timestamps: self.timestamps.clone(),
            values,
            columns: vec![self.columns[m - 1].clone()],
        }
    }
}

/// Load a comma-separated UTF-8 file: first row is the header, an optional
/// date column (named `date` unless overridden) is parsed and discarded, and
/// every remaining cell must be a decimal float.
pub fn load_csv(path: &Path, date_column: Option<&str>) -> Result<RawSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.is_empty() {
        return Err(Error::Data(format!("{}: empty header", path.display())));
    }

    let date_idx = match date_column {
        Some(name) => fields.iter().position(|f| f.eq_ignore_ascii_case(name)),
        None => {
            if fields[0].eq_ignore_ascii_case("date") {
                Some(0)
            } else {
                None
            }
        }
    };
    let columns: Vec<String> = fields
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != date_idx)
        .map(|(_, f)| f.to_string())
        .collect();
    if columns.is_empty() {
        return Err(Error::Data(format!(
            "{}: no numeric columns after removing the date column",
            path.display()
        )));
    }

    let mut data: Vec<f64> = Vec::new();
    let mut timestamps: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != fields.len() {
            return Err(Error::Data(format!(
                "{}: row {} has {} cells, expected {}",
                path.display(),
                line_no + 2,
                cells.len(),
                fields.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            if Some(col) == date_idx {
                timestamps.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: non-numeric cell {:?} at row {}, column {} ({})",
                    path.display(),
                    cell,
                    line_no + 2,
                    col + 1,
                    fields[col]
                ))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data(format!("{}: empty series", path.display())));
    }

    let values = Matrix::from_vec(rows, columns.len(), data)?;
    Ok(RawSeries {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "series".to_string()),
        timestamps: if date_idx.is_some() { Some(timestamps) } else { None },
        values,
        columns,
    })
}

/// Deterministic sine + trend + gaussian-noise series. Variable `j` is
/// `sin(2 pi t / period + phase_j) + trend_slope * t + noise`, with the phase
/// spread evenly across variables.
pub fn synth_series(
    seed: u64,
    t_len: usize,
    vars: usize,
    period: f64,
    trend_slope: f64,
    noise_std: f64,
) -> RawSeries {
    assert!(t_len >= 1 && vars >= 1 && period > 0.0);
    let mut rng = RngStream::new(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut values = Matrix::from_fn(t_len, vars, |t, j| {
        let phase = two_pi * j as f64 / vars as f64;
        (two_pi * t as f64 / period + phase).sin() + trend_slope * t as f64
    });
    if noise_std > 0.0 {
        for v in values.data_mut() {
            *v += rng.normal(0.0, noise_std);
        }
    }
    RawSeries {
        name: format!("synth-{seed}"),
        timestamps: None,
        values,
        columns: (0..vars).map(|j| format!("v{j}")).collect(),
    }
}

/// Write a series back out in the CSV layout `load_csv` reads.
pub fn write_csv(series: &RawSeries, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(&series.columns.join(","));
    out.push('\n');
    for r in 0..series.len() {
        let row = series.values.row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_csv(contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "sparsecast-test-{}-{}.csv",
            std::process::id(),
            contents.len()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_small_file() {
        let path = temp_csv("date,a,b\n2020-01-01,1.0,2.0\n2020-01-02,3.0,4.0\n2020-01-03,5.0,6.0\n");
        let s = load_csv(&path, None).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.vars(), 2);
        assert_eq!(s.values.at(2, 1), 6.0);
        assert_eq!(s.columns, vec!["a", "b"]);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn header_only_is_empty_series() {
        let path = temp_csv("date,a,b\n");
        let err = load_csv(&path, None).unwrap_err();
        assert!(err.to_string().contains("empty series"));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        let path = temp_csv("a,b\n1.0,2.0\n3.0,oops\n");
        let err = load_csv(&path, None).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        assert!(err.contains("column 2"), "{err}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn ragged_row_is_an_error() {
        let path = temp_csv("a,b\n1.0,2.0\n3.0\n");
        assert!(load_csv(&path, None).is_err());
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_file_is_an_error() {
        let err = load_csv(Path::new("/definitely/not/here.csv"), None).unwrap_err();
        assert!(err.to_string().contains("not/here.csv"));
    }

    #[test]
    fn synth_is_periodic_without_noise() {
        let s = synth_series(1, 200, 2, 25.0, 0.0, 0.0);
        for t in 0..175 {
            for j in 0..2 {
                assert!((s.values.at(t, j) - s.values.at(t + 25, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let a = synth_series(7, 500, 3, 24.0, 0.01, 0.2);
        let b = synth_series(7, 500, 3, 24.0, 0.01, 0.2);
        for (x, y) in a.values.data().iter().zip(b.values.data().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn synth_noise_std_matches_request() {
        let noiseless = synth_series(3, 10_000, 1, 50.0, 0.001, 0.0);
        let noisy = synth_series(3, 10_000, 1, 50.0, 0.001, 0.1);
        let resid: Vec<f64> = (0..10_000)
            .map(|t| noisy.values.at(t, 0) - noiseless.values.at(t, 0))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / resid.len() as f64;
        let std = var.sqrt();
        assert!((std - 0.1).abs() < 0.01, "residual std {std}");
    }

    #[test]
    fn csv_round_trip() {
        let s = synth_series(5, 50, 3, 12.0, 0.0, 0.3);
        let path = temp_csv("");
        write_csv(&s, &path).unwrap();
        let back = load_csv(&path, None).unwrap();
        assert_eq!(back.len(), 50);
        assert_eq!(back.vars(), 3);
        for (x, y) in s.values.data().iter().zip(back.values.data().iter()) {
            assert_eq!(x.to_bits(), y.to_bits(), "csv floats must round-trip");
        }
        std::fs::remove_file(path).ok();
    }
}
