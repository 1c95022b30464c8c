use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::Format;

fn is_stdio(path: &Option<PathBuf>) -> bool {
    path.as_deref().is_none_or(|p| p == Path::new("-"))
}

pub fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn BufRead>, CliError> {
    if is_stdio(path) {
        return Ok(Box::new(BufReader::new(io::stdin().lock())));
    }
    let p = path.as_deref().expect("checked above");
    let file = File::open(p).map_err(|e| CliError::io(Some(p), "cannot open", e))?;
    Ok(Box::new(BufReader::new(file)))
}

pub fn read_all(path: &Option<PathBuf>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    open_input(path)?.read_to_end(&mut buf).map_err(|e| {
        CliError::io(
            path.as_deref().filter(|_| !is_stdio(path)),
            "cannot read",
            e,
        )
    })?;
    Ok(buf)
}

pub fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    if is_stdio(path) {
        return Ok(Box::new(BufWriter::new(io::stdout().lock())));
    }
    let p = path.as_deref().expect("checked above");
    let file = File::create(p).map_err(|e| CliError::io(Some(p), "cannot create", e))?;
    Ok(Box::new(BufWriter::new(file)))
}

pub fn write_bytes(path: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    let target = path.as_deref().filter(|_| !is_stdio(path));
    let mut out = open_output(path)?;
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(target, "writing", e))
}

/// Calls `f` with each line of `input`, the trailing `\n` removed. Returns
/// the number of lines.
pub fn for_each_line(
    input: &mut dyn BufRead,
    path: &Option<PathBuf>,
    mut f: impl FnMut(&[u8]),
) -> Result<u64, CliError> {
    let mut line = Vec::new();
    let mut count = 0u64;
    loop {
        line.clear();
        let read = input
            .read_until(b'\n', &mut line)
            .map_err(|e| CliError::io(path.as_deref().filter(|_| !is_stdio(path)), "reading", e))?;
        if read == 0 {
            return Ok(count);
        }
        if line.last() == Some(&b'\n') {
            line.pop();
        }
        f(&line);
        count += 1;
    }
}

/// Writes `rows` as CSV with a header, a JSON array (or a single object
/// when there is one row and `single` is set), or aligned `key: value` text.
pub fn write_records<T: Serialize>(
    path: &Option<PathBuf>,
    format: Format,
    rows: &[T],
    single: bool,
) -> Result<(), CliError> {
    let target = path.as_deref().filter(|_| !is_stdio(path));
    let werr = |e: io::Error| CliError::io(target, "writing", e);
    let mut out = open_output(path)?;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row)
                    .map_err(|e| CliError::Format(format!("csv output: {e}")))?;
            }
            w.flush().map_err(werr)?;
        }
        Format::Json => {
            let result = if single && rows.len() == 1 {
                serde_json::to_writer_pretty(&mut out, &rows[0])
            } else {
                serde_json::to_writer_pretty(&mut out, rows)
            };
            result.map_err(|e| CliError::Format(format!("json output: {e}")))?;
            writeln!(out).map_err(werr)?;
        }
        Format::Text => {
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    writeln!(out).map_err(werr)?;
                }
                let value =
                    serde_json::to_value(row).map_err(|e| CliError::Format(e.to_string()))?;
                if let serde_json::Value::Object(map) = value {
                    let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
                    for (k, v) in map {
                        let v = match v {
                            serde_json::Value::Null => continue,
                            serde_json::Value::String(s) => s,
                            other => other.to_string(),
                        };
                        writeln!(out, "{k:width$}  {v}").map_err(werr)?;
                    }
                }
            }
        }
    }
    out.flush().map_err(werr)
}
