//! CSV files: `#` comment lines, then a header row, then records.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io_at(dir, e))?;
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io_at(path, e))
}

pub fn write_csv<I>(path: &Path, comments: &[String], header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut buf = Vec::new();
    for c in comments {
        buf.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| CliError::io_at(path, e))?;
    }
    write_bytes(path, &buf)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// An empty file reads as a table with no columns and no rows.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io_at(path, e))?;
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let headers = r
            .headers()
            .map_err(|e| CliError::from(e).context(path.display()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::from(e).context(path.display()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Index of a column the caller cannot do without; missing is a config error.
    pub fn require(&self, name: &str, source: &Path) -> Result<usize> {
        self.column(name).ok_or_else(|| {
            CliError::config(format!("{} has no '{name}' column", source.display()))
        })
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        let cell = &self.rows[row][col];
        cell.parse::<f64>().map_err(|_| {
            CliError::input(format!(
                "row {} column '{}': '{cell}' is not a number",
                row + 1,
                self.headers[col]
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep/nested/t.csv");
        write_csv(
            &p,
            &["kind = imba".into()],
            &["a", "b"],
            vec![vec!["1".into(), "x,y".into()], vec!["2.5".into(), "".into()]],
        )
        .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# kind = imba\na,b\n1,\"x,y\"\n2.5,\n");
        let t = Table::read(&p).unwrap();
        assert_eq!(t.headers, vec!["a", "b"]);
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.f64_at(1, 0).unwrap(), 2.5);
        assert!(matches!(t.f64_at(0, 1), Err(CliError::Input(_))));
        assert!(matches!(t.require("c", &p), Err(CliError::Config(_))));
    }

    #[test]
    fn empty_file_is_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        fs::write(&p, "").unwrap();
        assert_eq!(Table::read(&p).unwrap(), Table::default());
    }
}
