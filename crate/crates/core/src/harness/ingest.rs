use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::GroupedSample;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Skip one header line in every data file.
    pub skip_header: bool,
}

fn ingest_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Numeric CSV, one row per line; ragged rows and non-numeric cells are errors.
pub fn read_matrix_csv(path: &Path, skip_header: bool) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest_error(path, 0, e.to_string()))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            ingest_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(ingest_error(
                    path,
                    line,
                    format!("row has {} fields, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest_error(path, line, format!("column {}: '{cell}' is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(ingest_error(path, line, format!("column {}: value is not finite", c + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.ok_or_else(|| ingest_error(path, 0, "no data rows"))?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

/// Group files listed one per line; blank lines and `#` comments are ignored,
/// relative paths are resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| ingest_error(path, 0, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let files: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        })
        .collect();
    if files.is_empty() {
        return Err(ingest_error(path, 0, "manifest lists no group files"));
    }
    Ok(files)
}

pub fn ingest_groups(paths: &[PathBuf], options: IngestOptions) -> Result<GroupedSample> {
    let mut groups = Vec::with_capacity(paths.len());
    for path in paths {
        let m = read_matrix_csv(path, options.skip_header)?;
        if m.nrows() < 2 {
            return Err(ingest_error(path, m.nrows(), "a group needs at least 2 subjects"));
        }
        groups.push(m);
    }
    GroupedSample::from_groups(groups)
}

pub fn ingest_data(manifest: &Path, options: IngestOptions) -> Result<GroupedSample> {
    ingest_groups(&read_manifest(manifest)?, options)
}

/// Shortest round-trip formatting, so reading back is bit-exact.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:?}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes `group_<i>.csv` files and a manifest into `dir`; returns the manifest path.
pub fn write_sample(dir: &Path, sample: &GroupedSample) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, g) in sample.groups().iter().enumerate() {
        let name = format!("group_{}.csv", i + 1);
        write_matrix_csv(&dir.join(&name), g)?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StudyDesign;

    #[test]
    fn reads_two_groups() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "1,2\n3,4\n5,6\n7,8\n").unwrap();
        std::fs::write(dir.path().join("b.csv"), "x,y,z\n1,2,3\n4,5,6\n7,8,9\n1,1,1\n2,2,2\n3,3,3\n").unwrap();
        std::fs::write(dir.path().join("m.txt"), "# groups\na.csv\n\nb.csv\n").unwrap();
        let err = ingest_data(&dir.path().join("m.txt"), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }), "{err}");
        let paths = vec![dir.path().join("a.csv")];
        assert_eq!(ingest_groups(&paths, IngestOptions::default()).unwrap().design().sizes(), &[4]);
        std::fs::write(dir.path().join("a.csv"), "h1,h2\n1,2\n3,4\n5,6\n7,8\n").unwrap();
        let s = ingest_data(&dir.path().join("m.txt"), IngestOptions { skip_header: true }).unwrap();
        assert_eq!(s.design(), &StudyDesign::new(vec![2, 3], vec![4, 6]).unwrap());
    }

    #[test]
    fn ragged_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        std::fs::write(&p, "1,2\n3,4\n5\n").unwrap();
        match read_matrix_csv(&p, false) {
            Err(Error::Ingest { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("1 fields"));
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "1,2\n3,abc\n").unwrap();
        assert!(matches!(read_matrix_csv(&p, false), Err(Error::Ingest { line: 2, .. })));
        std::fs::write(&p, "1,2\n").unwrap();
        assert!(ingest_groups(&[p], IngestOptions::default()).is_err());
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g1 = Matrix::from_fn(5, 2, |r, c| (r as f64 + 0.1) / (c as f64 + 3.0) * std::f64::consts::PI);
        let g2 = Matrix::from_fn(4, 3, |r, c| 1e-300 * (r * c) as f64 - 1.0 / 3.0);
        let sample = GroupedSample::from_groups(vec![g1, g2]).unwrap();
        let manifest = write_sample(dir.path(), &sample).unwrap();
        let back = ingest_data(&manifest, IngestOptions::default()).unwrap();
        assert_eq!(back, sample);
    }
}
