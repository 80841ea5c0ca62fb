use std::io::Write;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
    /// Written as an empty cell, never as zero.
    Missing,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Self::Missing, Self::Num)
    }
}

/// Rounds to 12 significant digits and prints the shortest plain decimal
/// that reads back as the rounded value.
pub fn format_number(x: f64) -> Result<String, CliError> {
    if !x.is_finite() {
        return Err(CliError::NonFinite(x));
    }
    if x == 0.0 {
        return Ok("0".into());
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific notation parses");
    Ok(format!("{rounded}"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header)?;
        for row in &self.rows {
            let cells = row
                .iter()
                .map(|c| {
                    Ok(match c {
                        Cell::Num(x) => format_number(*x)?,
                        Cell::Int(k) => k.to_string(),
                        Cell::Text(s) => s.clone(),
                        Cell::Flag(b) => b.to_string(),
                        Cell::Missing => String::new(),
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }
}
