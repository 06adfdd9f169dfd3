use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use super::{AnnotationMatrix, DatasetBundle, Instance, Label, Source, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "jsonl" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

/// Load and validate a human-provenance dataset file.
pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), format)
}

pub fn read_dataset<R: Read>(reader: R, format: Format) -> Result<DatasetBundle> {
    let (declared, rows) = match format {
        Format::Jsonl => (None, read_jsonl(BufReader::new(reader))?),
        Format::Csv => {
            let (annotators, rows) = read_csv(reader)?;
            (Some(annotators), rows)
        }
    };
    let bundle = assemble(declared, rows)?;
    bundle.check_annotator_coverage()?;
    Ok(bundle)
}

struct Row {
    line: usize,
    instance: Instance,
    labels: Vec<(String, Label)>,
    split: Option<Split>,
}

fn parse_label(value: &Value, annotator: &str, line: usize) -> Result<Label> {
    let label = match value {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse::<u64>().ok(),
        _ => None,
    };
    match label {
        Some(l @ (0 | 1)) => Ok(l as Label),
        _ => Err(Error::Parse {
            line,
            message: format!("label {value} for annotator {annotator} is not 0 or 1"),
        }),
    }
}

fn string_field(obj: &Map<String, Value>, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(Error::Parse { line, message: format!("`{key}` must be a string, got {other}") }),
        None => Err(Error::Schema(format!("line {line}: missing field `{key}`"))),
    }
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let Value::Object(obj) = value else {
            return Err(Error::Parse { line: line_no, message: "expected a JSON object".into() });
        };
        let instance_id = string_field(&obj, "instance_id", line_no)?;
        let text = string_field(&obj, "text", line_no)?;
        let annotations = match obj.get("annotations") {
            Some(Value::Object(a)) => a,
            Some(_) => {
                return Err(Error::Parse { line: line_no, message: "`annotations` must be an object".into() })
            }
            None => return Err(Error::Schema(format!("line {line_no}: missing field `annotations`"))),
        };
        let labels = annotations
            .iter()
            .map(|(k, v)| parse_label(v, k, line_no).map(|l| (k.clone(), l)))
            .collect::<Result<Vec<_>>>()?;
        let split = match obj.get("split") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(Split::parse(s).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("unknown split {s:?}"),
            })?),
            Some(other) => {
                return Err(Error::Parse { line: line_no, message: format!("bad split {other}") })
            }
        };
        let source = match obj.get("source") {
            None | Some(Value::Null) => Source::Custom,
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Error::Parse { line: line_no, message: format!("bad source: {e}") })?,
        };
        rows.push(Row { line: line_no, instance: Instance { instance_id, text, source }, labels, split });
    }
    Ok(rows)
}

fn read_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Row>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "instance_id" || &headers[1] != "text" {
        return Err(Error::Schema("CSV header must start with instance_id,text".into()));
    }
    let annotators: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut labels = Vec::new();
        for (annotator, cell) in annotators.iter().zip(record.iter().skip(2)) {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let label = match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("label {other:?} for annotator {annotator} is not 0 or 1"),
                    })
                }
            };
            labels.push((annotator.clone(), label));
        }
        rows.push(Row {
            line,
            instance: Instance::new(&record[0], &record[1]),
            labels,
            split: None,
        });
    }
    Ok((annotators, rows))
}

/// `declared` fixes the annotator order (CSV columns); otherwise annotators
/// are ordered by first appearance.
fn assemble(declared: Option<Vec<String>>, rows: Vec<Row>) -> Result<DatasetBundle> {
    if rows.is_empty() {
        return Err(Error::Schema("dataset has no instances".into()));
    }
    let mut annotators: Vec<String> = declared.unwrap_or_default();
    let mut seen: std::collections::HashSet<String> = annotators.iter().cloned().collect();
    let mut instance_seen = std::collections::HashSet::new();
    for row in &rows {
        if row.instance.instance_id.is_empty() {
            return Err(Error::Schema(format!("line {}: empty instance_id", row.line)));
        }
        if row.instance.text.is_empty() {
            return Err(Error::Schema(format!("line {}: empty text", row.line)));
        }
        if !instance_seen.insert(row.instance.instance_id.clone()) {
            return Err(Error::DuplicateId(format!(
                "instance {} (line {})",
                row.instance.instance_id, row.line
            )));
        }
        for (a, _) in &row.labels {
            if seen.insert(a.clone()) {
                annotators.push(a.clone());
            }
        }
    }
    let instance_ids: Vec<String> = rows.iter().map(|r| r.instance.instance_id.clone()).collect();
    let mut matrix = AnnotationMatrix::new(annotators, instance_ids)?;
    let tagged = rows.iter().filter(|r| r.split.is_some()).count();
    if tagged != 0 && tagged != rows.len() {
        return Err(Error::Schema("split must be given for every instance or for none".into()));
    }
    let mut splits = BTreeMap::new();
    let mut instances = Vec::with_capacity(rows.len());
    for row in rows {
        for (a, label) in &row.labels {
            matrix.set(a, &row.instance.instance_id, *label)?;
        }
        if let Some(s) = row.split {
            splits.insert(row.instance.instance_id.clone(), s);
        }
        instances.push(row.instance);
    }
    DatasetBundle::new(instances, matrix, super::Provenance::Human, None, splits)
}

/// Write a bundle in the dataset file format. Annotators without entries
/// cannot be represented and are dropped.
pub fn save_dataset(bundle: &DatasetBundle, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(bundle, &mut w, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset<W: Write>(bundle: &DatasetBundle, writer: W, format: Format) -> Result<()> {
    match format {
        Format::Jsonl => write_jsonl(bundle, writer),
        Format::Csv => write_csv(bundle, writer),
    }
}

fn write_jsonl<W: Write>(bundle: &DatasetBundle, mut w: W) -> Result<()> {
    let m = bundle.matrix();
    for (i, inst) in bundle.instances().iter().enumerate() {
        let mut annotations = Map::new();
        for (a, aid) in m.annotator_ids().iter().enumerate() {
            if let Some(l) = m.at(a, i) {
                annotations.insert(aid.clone(), Value::from(l));
            }
        }
        let mut obj = Map::new();
        obj.insert("instance_id".into(), Value::from(inst.instance_id.as_str()));
        obj.insert("text".into(), Value::from(inst.text.as_str()));
        obj.insert("annotations".into(), Value::Object(annotations));
        if bundle.has_splits() {
            obj.insert("split".into(), Value::from(bundle.split_of(&inst.instance_id).as_str()));
        }
        if inst.source != Source::Custom {
            obj.insert("source".into(), serde_json::to_value(inst.source)?);
        }
        serde_json::to_writer(&mut w, &Value::Object(obj))?;
        w.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
    }
    Ok(())
}

fn write_csv<W: Write>(bundle: &DatasetBundle, w: W) -> Result<()> {
    let m = bundle.matrix();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["instance_id".to_string(), "text".to_string()];
    header.extend(m.annotator_ids().iter().cloned());
    wtr.write_record(&header)?;
    for (i, inst) in bundle.instances().iter().enumerate() {
        let mut rec = vec![inst.instance_id.clone(), inst.text.clone()];
        rec.extend((0..m.num_annotators()).map(|a| m.at(a, i).map(|l| l.to_string()).unwrap_or_default()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<dataset>", e))
}
