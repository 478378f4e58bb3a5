use super::mixture::{MixtureCurve, Trend};
use crate::error::{Error, Result};

/// One curve placed in the grid, e.g. row = model, column = attack.
#[derive(Debug, Clone)]
pub struct TableEntry {
    pub row: String,
    pub column: String,
    pub curve: MixtureCurve,
}

/// Grid of trend classifications. Rows and columns keep first-seen order;
/// missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<Trend>>>,
}

pub fn monotonicity_table(entries: &[TableEntry]) -> MonotonicityTable {
    let mut rows: Vec<String> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    for e in entries {
        if !rows.contains(&e.row) {
            rows.push(e.row.clone());
        }
        if !columns.contains(&e.column) {
            columns.push(e.column.clone());
        }
    }
    let mut cells = vec![vec![None; columns.len()]; rows.len()];
    for e in entries {
        let r = rows.iter().position(|x| x == &e.row).unwrap();
        let c = columns.iter().position(|x| x == &e.column).unwrap();
        cells[r][c] = Some(e.curve.trend);
    }
    MonotonicityTable {
        rows,
        columns,
        cells,
    }
}

impl MonotonicityTable {
    fn symbol(cell: Option<Trend>) -> &'static str {
        cell.map_or("", Trend::symbol)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![""];
        header.extend(self.columns.iter().map(String::as_str));
        w.write_record(&header)?;
        for (name, row) in self.rows.iter().zip(&self.cells) {
            let mut rec = vec![name.as_str()];
            rec.extend(row.iter().map(|&c| Self::symbol(c)));
            w.write_record(&rec)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| |");
        for c in &self.columns {
            s.push_str(&format!(" {c} |"));
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(self.columns.len()));
        s.push('\n');
        for (name, row) in self.rows.iter().zip(&self.cells) {
            s.push_str(&format!("| {name} |"));
            for &c in row {
                s.push_str(&format!(" {} |", Self::symbol(c)));
            }
            s.push('\n');
        }
        s
    }
}
