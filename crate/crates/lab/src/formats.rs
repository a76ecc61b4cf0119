//! Output tables, tree and path dumps.
//!
//! Numbers are written with Rust's shortest round-trip representation, so a
//! dumped value parses back to the same `f64`. Non-finite values appear as
//! `inf`, `-inf` or `NaN` in CSV and as strings in JSON.

use std::path::Path;
use std::str::FromStr;

use ist_core::contour::{ContourPath, Jump};
use ist_core::tree::{ChronoTree, Label};
use serde_json::{Map, Value};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// `{:?}` keeps a trailing `.0` on integral values and round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x)
                .map_or_else(|| Value::String(fmt_f64(*x)), Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

/// A rectangular table with fixed headers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // Writing to a Vec cannot fail.
        w.write_record(&self.headers).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_field))
                .expect("in-memory csv");
        }
        w.into_inner().expect("in-memory csv")
    }

    /// An array of objects keyed by header.
    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (h, c) in self.headers.iter().zip(row) {
                    obj.insert((*h).to_string(), c.json());
                }
                Value::Object(obj)
            })
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&Value::Array(rows)).expect("json value");
        bytes.push(b'\n');
        bytes
    }
}

/// Reads a CSV file, checking the header line.
pub fn read_csv(path: &Path, headers: &[&str]) -> LabResult<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| LabError::format(path, e))?;
    let found = r.headers().map_err(|e| LabError::format(path, e))?.clone();
    if found.iter().ne(headers.iter().copied()) {
        return Err(LabError::format(
            path,
            format!(
                "expected columns {headers:?}, found {:?}",
                found.iter().collect::<Vec<_>>()
            ),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| LabError::format(path, e)))
        .collect()
}

fn parse_field<T: FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
    what: &str,
) -> LabResult<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| LabError::format(path, format!("line {line}: bad {what} `{raw}`")))
}

pub const TREE_HEADERS: [&str; 4] = ["label", "parent", "birth", "death"];

/// Tree dump in canonical (depth-first) order.
pub fn tree_table(tree: &ChronoTree) -> Table {
    let mut t = Table::new(&TREE_HEADERS);
    for (label, parent, birth, death) in tree.records() {
        t.push(vec![
            label.to_string().into(),
            parent.map_or(Cell::Empty, |p| p.to_string().into()),
            birth.into(),
            death.into(),
        ]);
    }
    t
}

/// Loads a tree dump. The truncation level is not part of the dump.
pub fn load_tree(path: &Path, truncation: f64) -> LabResult<ChronoTree> {
    let records = read_csv(path, &TREE_HEADERS)?;
    let mut out = Vec::with_capacity(records.len());
    for rec in &records {
        let label: Label = parse_field(path, rec, 0, "label")?;
        let parent = rec.get(1).unwrap_or("");
        let expected = label.parent().map(|p| p.to_string()).unwrap_or_default();
        if parent != expected {
            return Err(LabError::format(
                path,
                format!("parent of {label} is `{expected}`, file says `{parent}`"),
            ));
        }
        let birth: f64 = parse_field(path, rec, 2, "birth")?;
        let death: f64 = parse_field(path, rec, 3, "death")?;
        out.push((label, birth, death));
    }
    Ok(ChronoTree::from_records(&out, truncation)?)
}

pub const PATH_HEADERS: [&str; 3] = ["s", "value", "event"];

/// Path dump.
///
/// One `start` row, two `jump` rows per jump (the left limit, then the
/// landing level), an `absorb` row if the path reaches 0, and a final
/// `horizon` row holding the end of the observation window.
pub fn path_table(path: &ContourPath) -> Table {
    let mut t = Table::new(&PATH_HEADERS);
    t.push(vec![0.0.into(), path.start.into(), "start".into()]);
    for j in &path.jumps {
        t.push(vec![j.time.into(), j.from.into(), "jump".into()]);
        t.push(vec![j.time.into(), j.to.into(), "jump".into()]);
    }
    if let Some(a) = path.absorption {
        t.push(vec![a.into(), 0.0.into(), "absorb".into()]);
        t.push(vec![path.horizon.into(), 0.0.into(), "horizon".into()]);
    } else {
        let end = if path.horizon.is_finite() {
            path.value_at(path.horizon)
        } else {
            f64::NAN
        };
        t.push(vec![path.horizon.into(), end.into(), "horizon".into()]);
    }
    t
}

/// Loads a path dump written by [`path_table`] for a path of the given slope.
pub fn load_path(path: &Path, slope: f64) -> LabResult<ContourPath> {
    let records = read_csv(path, &PATH_HEADERS)?;
    let bad = |msg: &str| LabError::format(path, msg);
    let mut rows = Vec::with_capacity(records.len());
    for rec in &records {
        let s: f64 = parse_field(path, rec, 0, "s")?;
        let v: f64 = parse_field(path, rec, 1, "value")?;
        rows.push((s, v, rec.get(2).unwrap_or("").to_string()));
    }
    let mut it = rows.into_iter().peekable();
    let start = match it.next() {
        Some((_, v, e)) if e == "start" => v,
        _ => return Err(bad("first row must be the start row")),
    };
    let mut jumps = Vec::new();
    while it.peek().is_some_and(|r| r.2 == "jump") {
        let (time, from, _) = it.next().expect("peeked");
        match it.next() {
            Some((t2, to, e)) if e == "jump" && t2 == time => jumps.push(Jump { time, from, to }),
            _ => return Err(bad("jump rows must come in pairs at the same time")),
        }
    }
    let mut absorption = None;
    if it.peek().is_some_and(|r| r.2 == "absorb") {
        absorption = it.next().map(|r| r.0);
    }
    let horizon = match it.next() {
        Some((s, _, e)) if e == "horizon" => s,
        _ => return Err(bad("missing horizon row")),
    };
    if it.next().is_some() {
        return Err(bad("rows after the horizon row"));
    }
    Ok(ContourPath {
        start,
        jumps,
        absorption,
        horizon,
        slope,
    })
}
