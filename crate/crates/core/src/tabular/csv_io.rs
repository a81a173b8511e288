use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Column, ColumnData, Table, TableError};

/// Cell tokens read as missing.
const MISSING_TOKENS: [&str; 2] = ["", "NA"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated file. A column whose observed cells all parse as
/// finite numbers becomes numeric; anything else is categorical.
pub fn load_csv(path: impl AsRef<Path>, header: bool) -> Result<Table, TableError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TableError::FileNotFound {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, header)
}

pub fn read_csv<R: Read>(mut reader: R, header: bool) -> Result<Table, TableError> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| TableError::Csv(csv::Error::from(e)))?;
    let text = mark_blank_lines(&text);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = rdr.records();
    let mut names: Option<Vec<String>> = None;
    if header {
        match records.next() {
            Some(rec) => names = Some(rec?.iter().map(str::to_string).collect()),
            None => return Table::new(Vec::new(), Vec::new()),
        }
    }

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut width = names.as_ref().map(Vec::len);
    for (row, rec) in records.enumerate() {
        let fields: Vec<String> = rec?.iter().map(str::to_string).collect();
        match width {
            Some(w) if w != fields.len() => {
                return Err(TableError::RaggedRow {
                    row,
                    found: fields.len(),
                    expected: w,
                })
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        cells.push(fields);
    }

    let width = width.unwrap_or(0);
    let names = names.unwrap_or_else(|| (1..=width).map(|j| format!("col{j}")).collect());

    let columns = (0..width)
        .map(|j| {
            let raw: Vec<&str> = cells.iter().map(|r| r[j].as_str()).collect();
            build_column(&raw)
        })
        .collect();
    Table::new(names, columns)
}

/// The csv reader drops blank lines, but an interior blank line is a record
/// with one empty field. Rewrite such lines (outside quoted fields) as `""`;
/// blank lines trailing the last record are dropped.
fn mark_blank_lines(text: &str) -> String {
    let body = text.trim_end_matches(['\n', '\r']);
    let mut out = String::with_capacity(body.len() + 16);
    let mut in_quotes = false;
    let mut at_line_start = true;
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if at_line_start && !in_quotes && (c == '\n' || (c == '\r' && chars.peek() == Some(&'\n'))) {
            out.push_str("\"\"");
        }
        at_line_start = false;
        match c {
            '"' => in_quotes = !in_quotes,
            '\n' if !in_quotes => at_line_start = true,
            _ => {}
        }
        out.push(c);
    }
    out.push('\n');
    out
}

fn build_column(raw: &[&str]) -> Column {
    let missing: Vec<bool> = raw.iter().map(|c| is_missing(c)).collect();
    let numeric: Option<Vec<f64>> = raw
        .iter()
        .zip(&missing)
        .map(|(c, &m)| if m { Some(f64::NAN) } else { parse_number(c) })
        .collect();
    let data = match numeric {
        Some(values) => ColumnData::Numeric(values),
        None => ColumnData::Categorical(
            raw.iter()
                .zip(&missing)
                .map(|(c, &m)| if m { String::new() } else { (*c).to_string() })
                .collect(),
        ),
    };
    Column { data, missing }
}

/// Writes the table with a header row; missing cells are written as `NA`.
pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<(), TableError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(table.column_names())?;
    for i in 0..table.n_rows() {
        let row: Vec<String> = table
            .columns()
            .iter()
            .map(|c| {
                if c.missing[i] {
                    return "NA".to_string();
                }
                match &c.data {
                    ColumnData::Numeric(v) => format!("{}", v[i]),
                    ColumnData::Categorical(v) => v[i].clone(),
                }
            })
            .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Table, TableError> {
        read_csv(text.as_bytes(), true)
    }

    #[test]
    fn numeric_and_categorical_columns() {
        let t = parse("a,b\n1,x\n2,y\n3,z").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.column("a").unwrap().as_numeric().unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(t.column("b").unwrap().as_categorical().unwrap(), &["x", "y", "z"]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let t = parse("a\n1\n\n3").unwrap();
        let a = t.column("a").unwrap();
        assert!(a.is_numeric());
        assert_eq!(a.missing, vec![false, true, false]);
    }

    #[test]
    fn na_token_is_missing() {
        let t = parse("a,b\nNA,x\n2,NA").unwrap();
        assert_eq!(t.column("a").unwrap().missing, vec![true, false]);
        assert_eq!(t.column("b").unwrap().missing, vec![false, true]);
        assert!(t.column("b").unwrap().as_categorical().is_some());
    }

    #[test]
    fn ragged_row_names_offending_row() {
        let err = parse("a,b\n1,2\n1,2,3").unwrap_err();
        assert!(matches!(
            err,
            TableError::RaggedRow {
                row: 1,
                found: 3,
                expected: 2
            }
        ));
    }

    #[test]
    fn duplicate_header() {
        assert!(matches!(parse("a,a\n1,2"), Err(TableError::DuplicateHeader(_))));
    }

    #[test]
    fn missing_file() {
        let err = load_csv("/definitely/not/here.csv", true).unwrap_err();
        assert!(matches!(err, TableError::FileNotFound { .. }));
    }

    #[test]
    fn non_finite_tokens_are_categorical() {
        let t = parse("a\ninf\n1").unwrap();
        assert!(!t.column("a").unwrap().is_numeric());
    }

    #[test]
    fn headerless_names() {
        let t = read_csv("1,2\n3,4".as_bytes(), false).unwrap();
        assert_eq!(t.column_names(), &["col1", "col2"]);
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn write_then_read() {
        let t = parse("a,b\n1.5,x\nNA,y").unwrap();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), true).unwrap();
        assert_eq!(back.column("a").unwrap().missing, vec![false, true]);
        assert_eq!(back.column("b").unwrap().as_categorical().unwrap(), &["x", "y"]);
    }
}
