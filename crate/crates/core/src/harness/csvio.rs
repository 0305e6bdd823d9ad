//! RFC-4180 CSV emission with deterministic byte output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::HarnessError;

pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, HarnessError> {
        let mut out = BufWriter::new(File::create(path)?);
        let line: Vec<String> = header.iter().map(|h| quote(h)).collect();
        out.write_all(line.join(",").as_bytes())?;
        out.write_all(b"\r\n")?;
        Ok(Self { out, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), HarnessError> {
        assert_eq!(fields.len(), self.columns, "column count mismatch");
        let line: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        self.out.write_all(line.join(",").as_bytes())?;
        self.out.write_all(b"\r\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Parse a CSV produced by [`CsvWriter`] (quoted-field aware).
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let mut rows = Vec::new();
    for line in text.split("\r\n").filter(|l| !l.is_empty()) {
        rows.push(split_line(line)?);
    }
    if rows.is_empty() {
        return Err(HarnessError::Schema("empty CSV".into()));
    }
    let header = rows.remove(0);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != header.len() {
            return Err(HarnessError::Schema(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                r.len(),
                header.len()
            )));
        }
    }
    Ok((header, rows))
}

fn split_line(line: &str) -> Result<Vec<String>, HarnessError> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(c);
            }
        } else {
            match c {
                '"' => in_quotes = true,
                ',' => {
                    fields.push(std::mem::take(&mut cur));
                }
                _ => cur.push(c),
            }
        }
    }
    if in_quotes {
        return Err(HarnessError::Schema("unterminated quoted field".into()));
    }
    fields.push(cur);
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = CsvWriter::create(&path, &["a", "b,with comma", "c"]).unwrap();
        w.row(&["1".into(), "say \"hi\"".into(), "line\nbreak".into()]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let (header, rows) = parse_csv(&text).unwrap();
        assert_eq!(header[1], "b,with comma");
        assert_eq!(rows[0][1], "say \"hi\"");
        assert_eq!(rows[0][2], "line\nbreak");
    }
}
