use std::path::Path;

use crate::error::{Error, Result};

/// `n` observations of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || !values.len().is_multiple_of(d) {
            return Err(Error::Parse(format!(
                "{} values do not form rows of width {d}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("dataset contains non-finite values".into()));
        }
        Ok(Self {
            n: values.len() / d,
            values,
            d,
        })
    }

    pub fn empty(d: usize) -> Self {
        Self {
            values: Vec::new(),
            n: 0,
            d,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    /// All values, row-major. For `d = 1` this is the observation list.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reads CSV with one observation per row. A header line is detected
    /// (and skipped) when its first field is not a number.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        let mut width = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
            };
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse(format!(
                        "row {} has {} fields, expected {w}",
                        line + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            values.extend(row);
        }
        match width {
            Some(d) => Self::new(values, d),
            None => Err(Error::Parse("dataset has no observations".into())),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// CSV without header, shortest round-trip decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = Dataset::from_csv_reader("x,y\n1.5,2\n-3,4e-2\n".as_bytes()).unwrap();
        let b = Dataset::from_csv_reader("1.5,2\n-3,0.04\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.d()), (2, 2));
        assert_eq!(a.row(1), &[-3.0, 0.04]);
    }

    #[test]
    fn ragged_and_empty_inputs_fail() {
        assert!(Dataset::from_csv_reader("1,2\n3\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("1\nabc\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let d = Dataset::new(vec![0.1, -2.5, 1e-30, 7.0], 2).unwrap();
        assert_eq!(Dataset::from_csv_reader(d.to_csv().as_bytes()).unwrap(), d);
    }
}
