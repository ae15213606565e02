//! CSV persistence.
//!
//! Matrices are written as a `# rows=<rows> cols=<cols>` header followed by one
//! comma-separated line per matrix row, each value with 17 significant digits
//! so that reading back reproduces the same bits. Index lists (supports) are
//! written one list per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Formats a value so that parsing it back yields the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = create(path)?;
    let mut body = String::with_capacity(m.nrows() * m.ncols() * 24 + 32);
    body.push_str(&format!("# rows={} cols={}\n", m.nrows(), m.ncols()));
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                body.push(',');
            }
            body.push_str(&fmt_f64(m[(i, j)]));
        }
        body.push('\n');
    }
    out.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let reader = open(path)?;
    let mut lines = reader.lines().enumerate();
    let (rows, cols) = match lines.next() {
        Some((_, Ok(header))) => {
            parse_matrix_header(&header).ok_or_else(|| parse_err(path, 1, format!("bad header `{header}`")))?
        }
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad number `{field}`")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(path, idx + 1, format!("expected {cols} fields")));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(path, seen + 1, format!("expected {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn parse_matrix_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.strip_prefix('#')?.trim();
    let mut rows = None;
    let mut cols = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=')? {
            ("rows", v) => rows = v.parse().ok(),
            ("cols", v) => cols = v.parse().ok(),
            _ => return None,
        }
    }
    Some((rows?, cols?))
}

pub fn write_index_lists(path: &Path, lists: &[Vec<usize>]) -> Result<()> {
    let mut out = create(path)?;
    for list in lists {
        let line = list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_index_lists(path: &Path) -> Result<Vec<Vec<usize>>> {
    let reader = open(path)?;
    let mut lists = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            lists.push(Vec::new());
            continue;
        }
        let list = line
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, idx + 1, e.to_string()))?;
        lists.push(list);
    }
    Ok(lists)
}

/// Writes a header line and pre-formatted rows.
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(out, "{row}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}
