//! Readers and writers for the on-disk formats.
//!
//! * vector data: comma-separated rows, optional header line;
//! * labels: one `1` or `2` per line, in data row order;
//! * distance matrix: square comma-separated table, optional header line;
//! * networks: a directory of `s x s` 0/1 CSV files ordered by file name, or
//!   a JSON array of matrices;
//! * edge list: one `i j` pair per line (0-based), `#` starts a comment;
//! * test results: JSON.
//!
//! A header line is recognised by a first line that does not parse as numbers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::builders::DistanceMatrix;
use crate::distances::{NetworkDataset, VectorDataset};
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::inference::TestResult;
use crate::stats::TwoSampleLayout;

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, column, message: message.into() }
}

/// Numeric rows of a CSV file with their 1-based line numbers.
fn read_table<T: std::str::FromStr>(path: &Path) -> Result<Vec<(usize, Vec<T>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<T>, usize> =
            record.iter().enumerate().map(|(c, f)| f.parse::<T>().map_err(|_| c)).collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(_) if first => {}
            Err(c) => {
                return Err(parse_error(path, line, c + 1, format!("cannot parse {:?}", &record[c])));
            }
        }
        first = false;
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_error(path, line, 0, format!("{other:?}")),
    }
}

pub fn read_vectors(path: &Path) -> Result<VectorDataset> {
    let rows = read_table::<f64>(path)?;
    let dim = rows.first().map_or(0, |(_, r)| r.len());
    for (line, row) in &rows {
        if row.len() != dim {
            return Err(parse_error(path, *line, row.len().min(dim) + 1, format!("expected {dim} columns, found {}", row.len())));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(parse_error(path, *line, c + 1, "non-finite value"));
        }
    }
    VectorDataset::from_rows(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_vectors(path: &Path, data: &VectorDataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..data.rows() {
        write_row(&mut out, data.row(i))?;
    }
    out.flush()?;
    Ok(())
}

fn write_row<W: Write, T: std::fmt::Display>(out: &mut W, row: &[T]) -> Result<()> {
    let mut sep = "";
    for v in row {
        write!(out, "{sep}{v}")?;
        sep = ",";
    }
    writeln!(out)?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<TwoSampleLayout> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match text {
            "1" => labels.push(1),
            "2" => labels.push(2),
            _ if first && text.parse::<f64>().is_err() => {}
            _ => return Err(parse_error(path, idx + 1, 1, format!("label must be 1 or 2, found {text:?}"))),
        }
        first = false;
    }
    TwoSampleLayout::from_labels(labels)
}

pub fn write_labels(path: &Path, layout: &TwoSampleLayout) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for l in layout.labels() {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    let rows = read_table::<f64>(path)?;
    let size = rows.len();
    let mut values = Vec::with_capacity(size * size);
    for (line, row) in rows {
        if row.len() != size {
            return Err(Error::DimensionMismatch(format!(
                "{}: line {line} has {} columns in a matrix with {size} rows",
                path.display(),
                row.len()
            )));
        }
        values.extend(row);
    }
    DistanceMatrix::new(size, values)
}

pub fn write_distance_matrix(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for i in 0..d.size() {
        write_row(&mut out, d.row(i))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a network bundle: a directory of CSV files or a JSON file.
pub fn read_networks(path: &Path) -> Result<NetworkDataset> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
        files.sort();
        let mut subjects = None;
        let mut matrices = Vec::with_capacity(files.len());
        for file in &files {
            let rows = read_table::<u8>(file)?;
            let s = rows.len();
            if *subjects.get_or_insert(s) != s {
                return Err(Error::ShapeMismatch(format!("{} has {s} rows, expected {}", file.display(), subjects.unwrap())));
            }
            let mut flat = Vec::with_capacity(s * s);
            for (line, row) in rows {
                if row.len() != s {
                    return Err(parse_error(file, line, row.len().min(s) + 1, format!("expected {s} columns")));
                }
                flat.extend(row);
            }
            matrices.push(flat);
        }
        NetworkDataset::new(subjects.unwrap_or(0), matrices)
    } else {
        let nested: Vec<Vec<Vec<u8>>> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let s = nested.first().map_or(0, Vec::len);
        let mut matrices = Vec::with_capacity(nested.len());
        for (k, m) in nested.into_iter().enumerate() {
            if m.len() != s || m.iter().any(|r| r.len() != s) {
                return Err(Error::ShapeMismatch(format!("observation {k} is not {s} x {s}")));
            }
            matrices.push(m.into_iter().flatten().collect());
        }
        NetworkDataset::new(s, matrices)
    }
}

/// Writes a JSON bundle.
pub fn write_networks_json(path: &Path, nets: &NetworkDataset) -> Result<()> {
    let s = nets.subjects();
    let nested: Vec<Vec<&[u8]>> = nets.matrices().iter().map(|m| m.chunks(s.max(1)).collect()).collect();
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &nested)?;
    out.flush()?;
    Ok(())
}

/// Writes a directory bundle, one zero-padded CSV per observation.
pub fn write_networks_dir(dir: &Path, nets: &NetworkDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let width = nets.len().to_string().len();
    let s = nets.subjects();
    for (k, m) in nets.matrices().iter().enumerate() {
        let mut out = BufWriter::new(File::create(dir.join(format!("{k:0width$}.csv")))?);
        for row in m.chunks(s.max(1)) {
            write_row(&mut out, row)?;
        }
        out.flush()?;
    }
    Ok(())
}

pub fn read_edge_list(path: &Path, node_count: usize) -> Result<SimilarityGraph> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(parse_error(path, idx + 1, 1, format!("expected two node indices, found {}", fields.len())));
        }
        let mut ends = [0usize; 2];
        for (c, f) in fields.iter().enumerate() {
            ends[c] = f.parse().map_err(|_| parse_error(path, idx + 1, c + 1, format!("invalid node index {f:?}")))?;
            if ends[c] >= node_count {
                return Err(parse_error(
                    path,
                    idx + 1,
                    c + 1,
                    format!("node {} out of range for {node_count} nodes", ends[c]),
                ));
            }
        }
        edges.push((ends[0], ends[1]));
    }
    SimilarityGraph::new(node_count, edges)
}

pub fn write_edge_list<W: Write>(out: &mut W, graph: &SimilarityGraph) -> Result<()> {
    for (i, j) in graph.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}

pub fn write_edge_list_file(path: &Path, graph: &SimilarityGraph) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_edge_list(&mut out, graph)?;
    out.flush()?;
    Ok(())
}

/// One result is written as an object, several as an array.
pub fn write_test_results<W: Write>(out: &mut W, results: &[TestResult]) -> Result<()> {
    match results {
        [single] => serde_json::to_writer_pretty(&mut *out, single)?,
        many => serde_json::to_writer_pretty(&mut *out, many)?,
    }
    writeln!(out)?;
    Ok(())
}

pub fn read_test_results(path: &Path) -> Result<Vec<TestResult>> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Ok(match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        other => vec![serde_json::from_value(other)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn distance_csv_examples() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "0,1\n1,0\n").unwrap();
        let d = read_distance_matrix(&p).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        fs::write(&p, "a,b\n0,1\n1,0\n").unwrap();
        assert_eq!(read_distance_matrix(&p).unwrap(), d);
        fs::write(&p, "0,1\n2,0\n").unwrap();
        assert!(matches!(read_distance_matrix(&p), Err(Error::Asymmetric(0, 1))));
        fs::write(&p, "0,1,2\n1,0,3\n").unwrap();
        assert!(matches!(read_distance_matrix(&p), Err(Error::DimensionMismatch(_))));
        fs::write(&p, "0,1\n1,zero\n").unwrap();
        assert!(matches!(read_distance_matrix(&p), Err(Error::Parse { line: 2, column: 2, .. })));
    }

    #[test]
    fn labels_example() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("l.txt");
        fs::write(&p, "1\n1\n2\n2\n").unwrap();
        let layout = read_labels(&p).unwrap();
        assert_eq!((layout.m(), layout.n()), (2, 2));
        fs::write(&p, "1\n3\n2\n2\n").unwrap();
        assert!(matches!(read_labels(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn round_trips() {
        let dir = tempdir().unwrap();
        let data = VectorDataset::from_rows(vec![vec![0.1, -2.5e-7], vec![3.0, 1.0 / 3.0], vec![1e100, 0.0]]).unwrap();
        let p = dir.path().join("x.csv");
        write_vectors(&p, &data).unwrap();
        assert_eq!(read_vectors(&p).unwrap(), data);

        let d = crate::distances::euclidean_distances(&data).unwrap();
        let p = dir.path().join("d.csv");
        write_distance_matrix(&p, &d).unwrap();
        assert_eq!(read_distance_matrix(&p).unwrap(), d);

        let layout = TwoSampleLayout::from_labels(vec![2, 1, 1, 2, 2]).unwrap();
        let p = dir.path().join("l.txt");
        write_labels(&p, &layout).unwrap();
        assert_eq!(read_labels(&p).unwrap(), layout);

        let g = SimilarityGraph::new(5, vec![(0, 4), (1, 2), (2, 3)]).unwrap();
        let p = dir.path().join("g.txt");
        write_edge_list_file(&p, &g).unwrap();
        assert_eq!(read_edge_list(&p, 5).unwrap(), g);

        let nets = NetworkDataset::new(3, vec![vec![0, 1, 0, 0, 0, 1, 1, 0, 0], vec![0, 0, 1, 1, 0, 0, 0, 1, 0]]).unwrap();
        let p = dir.path().join("nets.json");
        write_networks_json(&p, &nets).unwrap();
        assert_eq!(read_networks(&p).unwrap(), nets);
        let p = dir.path().join("nets");
        write_networks_dir(&p, &nets).unwrap();
        assert_eq!(read_networks(&p).unwrap(), nets);

        let results = crate::inference::run_tests(
            &g,
            &TwoSampleLayout::from_labels(vec![1, 1, 2, 2, 2]).unwrap(),
            &[crate::inference::StatisticKind::Weighted],
            crate::inference::PValueMode::Asym,
            &Default::default(),
        )
        .unwrap();
        let p = dir.path().join("r.json");
        let mut f = File::create(&p).unwrap();
        write_test_results(&mut f, &results).unwrap();
        drop(f);
        assert_eq!(read_test_results(&p).unwrap(), results);
    }

    #[test]
    fn edge_list_comments_and_errors() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("g.txt");
        fs::write(&p, "# header\n0 1 # first\n\n1,2\n").unwrap();
        assert_eq!(read_edge_list(&p, 3).unwrap().edges(), &[(0, 1), (1, 2)]);
        fs::write(&p, "0 1\n1 9\n").unwrap();
        assert!(matches!(read_edge_list(&p, 3), Err(Error::Parse { line: 2, column: 2, .. })));
        fs::write(&p, "0 1 2\n").unwrap();
        assert!(matches!(read_edge_list(&p, 3), Err(Error::Parse { line: 1, .. })));
    }
}
