use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Writes a CSV file with a single header row. Numbers use `Display`, which
/// prints the shortest string that round-trips.
pub fn write_csv<I, R>(dir: &Path, name: &str, header: &str, rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[Cell]>,
{
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        for (i, cell) in row.as_ref().iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            match cell {
                Cell::Num(v) => write!(text, "{v}").expect("string write"),
                Cell::Int(v) => write!(text, "{v}").expect("string write"),
                Cell::Text(s) => text.push_str(s),
            }
        }
        text.push('\n');
    }
    write_file(dir, name, &text)
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
