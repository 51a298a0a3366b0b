//! Bag CSV format.
//!
//! ```text
//! task_id[,row][,y],f1,f2,...,fd
//! ```
//!
//! One line per point; the optional `row` column is an integer index that
//! must be unique within a task, and the optional `y` column holds labels.
//! Points of a task keep their file order. Floats are written in the
//! shortest form that parses back to the same value.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::bag::Bag;
use crate::data::{BagCollection, Provenance};
use crate::error::{Error, ParseError, Result};

struct Header {
    has_row: bool,
    has_y: bool,
    dim: usize,
}

impl Header {
    fn width(&self) -> usize {
        1 + usize::from(self.has_row) + usize::from(self.has_y) + self.dim
    }
}

fn parse_header(rec: &csv::StringRecord, line: u64) -> std::result::Result<Header, ParseError> {
    let fields: Vec<&str> = rec.iter().map(str::trim).collect();
    if fields.first() != Some(&"task_id") {
        return Err(ParseError::MissingHeader { line });
    }
    let mut k = 1;
    let has_row = fields.get(k) == Some(&"row");
    k += usize::from(has_row);
    let has_y = fields.get(k) == Some(&"y");
    k += usize::from(has_y);
    let features = &fields[k..];
    if features.is_empty() {
        return Err(ParseError::BadHeader {
            line,
            reason: "no feature columns".into(),
        });
    }
    for (j, name) in features.iter().enumerate() {
        let want = format!("f{}", j + 1);
        if *name != want {
            return Err(ParseError::BadHeader {
                line,
                reason: format!("expected column `{want}`, found `{name}`"),
            });
        }
    }
    Ok(Header {
        has_row,
        has_y,
        dim: features.len(),
    })
}

fn parse_float(field: &str, column: &str, line: u64) -> std::result::Result<f64, ParseError> {
    let v: f64 = field.trim().parse().map_err(|_| ParseError::NonNumeric {
        line,
        column: column.to_owned(),
        value: field.to_owned(),
    })?;
    if !v.is_finite() {
        return Err(ParseError::NonFinite {
            line,
            column: column.to_owned(),
        });
    }
    Ok(v)
}

struct Pending {
    task_id: String,
    points: Vec<f64>,
    labels: Vec<f64>,
}

/// Parse a bag collection from any reader.
pub fn read_bags_from<R: Read>(reader: R, source: &str) -> Result<BagCollection> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(ParseError::MissingHeader { line: 1 }.into()),
        Some(rec) => {
            let rec = rec.map_err(|e| malformed(&e))?;
            let line = rec.position().map_or(1, csv::Position::line);
            parse_header(&rec, line)?
        }
    };
    let width = header.width();
    let first_feature = width - header.dim;

    let mut order: Vec<Pending> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_rows: HashSet<(usize, u64)> = HashSet::new();
    for rec in records {
        let rec = rec.map_err(|e| malformed(&e))?;
        let line = rec.position().map_or(0, csv::Position::line);
        if rec.len() != width {
            return Err(ParseError::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            }
            .into());
        }
        let task_id = rec[0].trim();
        if task_id.is_empty() {
            return Err(ParseError::Malformed {
                line,
                reason: "empty task_id".into(),
            }
            .into());
        }
        let slot = *index.entry(task_id.to_owned()).or_insert_with(|| {
            order.push(Pending {
                task_id: task_id.to_owned(),
                points: Vec::new(),
                labels: Vec::new(),
            });
            order.len() - 1
        });
        if header.has_row {
            let row: u64 = rec[1].trim().parse().map_err(|_| ParseError::NonNumeric {
                line,
                column: "row".into(),
                value: rec[1].to_owned(),
            })?;
            if !seen_rows.insert((slot, row)) {
                return Err(ParseError::DuplicateRow {
                    line,
                    task_id: task_id.to_owned(),
                    row,
                }
                .into());
            }
        }
        let bag = &mut order[slot];
        if header.has_y {
            bag.labels.push(parse_float(&rec[first_feature - 1], "y", line)?);
        }
        for j in 0..header.dim {
            let column = format!("f{}", j + 1);
            bag.points.push(parse_float(&rec[first_feature + j], &column, line)?);
        }
    }

    let bags = order
        .into_iter()
        .map(|p| {
            let n = p.points.len() / header.dim;
            let points = Array2::from_shape_vec((n, header.dim), p.points).expect("whole rows");
            Bag::new(p.task_id, points, header.has_y.then_some(p.labels))
        })
        .collect::<Result<Vec<_>>>()?;
    BagCollection::with_dim(
        bags,
        header.dim,
        Provenance {
            source: source.to_owned(),
            seed: None,
        },
    )
}

fn malformed(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, csv::Position::line);
    ParseError::Malformed {
        line,
        reason: e.to_string(),
    }
    .into()
}

pub fn read_bags(path: impl AsRef<Path>) -> Result<BagCollection> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_bags_from(file, &path.display().to_string())
}

/// Write a collection; labels are written when every bag has them.
pub fn write_bags_to<W: Write>(collection: &BagCollection, writer: W) -> Result<()> {
    let labeled = collection.bags().iter().filter(|b| b.is_labeled()).count();
    if labeled != 0 && labeled != collection.len() {
        return Err(Error::invalid("cannot write a mix of labelled and unlabelled bags"));
    }
    let has_y = labeled > 0;
    let d = collection.dim();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["task_id".to_owned()];
    if has_y {
        header.push("y".into());
    }
    header.extend((1..=d).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_io)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for bag in collection.bags() {
        for (i, x) in bag.rows().enumerate() {
            record.clear();
            record.push(bag.task_id().to_owned());
            if let Some(labels) = bag.labels() {
                record.push(format!("{:?}", labels[i]));
            }
            record.extend(x.iter().map(|v| format!("{v:?}")));
            w.write_record(&record).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_bags(collection: &BagCollection, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_bags_to(collection, std::io::BufWriter::new(file))
}
