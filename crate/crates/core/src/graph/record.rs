//! Line-delimited instance records.
//!
//! One JSON object per line with fields in the fixed order
//! `n, edges, inputs, marks, labels, task`. Reals are written with 17
//! significant digits so a write/read cycle reproduces every bit.

use super::{Graph, Labels, TaskInstance, TaskKind};
use crate::error::{Error, Result};
use serde_json::Value;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

/// Formats a real with 17 significant digits as a JSON number.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign of negative zero out of the record
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

pub fn to_record(inst: &TaskInstance) -> String {
    let mut s = String::with_capacity(64 + inst.graph.m() * 12);
    write!(s, "{{\"n\":{},\"edges\":[", inst.graph.n()).unwrap();
    for (i, (u, v)) in inst.graph.edges().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "[{u},{v}]").unwrap();
    }
    s.push_str("],\"inputs\":[");
    for (i, row) in inst.inputs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&fmt_real(*x));
        }
        s.push(']');
    }
    s.push_str("],\"marks\":[");
    s.push_str(&join(&inst.marks));
    s.push_str("],\"labels\":");
    match &inst.labels {
        Labels::Node(l) => write!(s, "[{}]", join(l)).unwrap(),
        Labels::Graph(c) => write!(s, "{c}").unwrap(),
    }
    write!(s, ",\"task\":\"{}\"}}", inst.task).unwrap();
    s
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing field `{name}`"),
    })
}

fn as_index(v: &Value, line: usize, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse {
        line,
        msg: format!("{what}: expected non-negative integer, got {v}"),
    })
}

fn as_array<'a>(v: &'a Value, line: usize, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::Parse {
        line,
        msg: format!("{what}: expected array"),
    })
}

/// Parses one record; `line` is only used for diagnostics.
pub fn from_record(text: &str, line: usize) -> Result<TaskInstance> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        line,
        msg: "record is not an object".into(),
    })?;
    for key in obj.keys() {
        if !["n", "edges", "inputs", "marks", "labels", "task"].contains(&key.as_str()) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown field `{key}`"),
            });
        }
    }
    let n = as_index(field(obj, "n", line)?, line, "n")?;
    let mut edges = Vec::new();
    for (i, e) in as_array(field(obj, "edges", line)?, line, "edges")?
        .iter()
        .enumerate()
    {
        let pair = as_array(e, line, "edges")?;
        if pair.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("edges[{i}]: expected a pair"),
            });
        }
        let u = as_index(&pair[0], line, "edges")?;
        let v = as_index(&pair[1], line, "edges")?;
        if u >= n || v >= n {
            return Err(Error::Parse {
                line,
                msg: format!("edges[{i}]: endpoint {} >= n = {n}", u.max(v)),
            });
        }
        edges.push((u, v));
    }
    let graph = Graph::new(n, &edges).map_err(|e| Error::Parse {
        line,
        msg: format!("edges: {e}"),
    })?;
    let mut inputs = Vec::new();
    for row in as_array(field(obj, "inputs", line)?, line, "inputs")? {
        let row = as_array(row, line, "inputs")?
            .iter()
            .map(|x| {
                x.as_f64().ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("inputs: expected real, got {x}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        inputs.push(row);
    }
    let marks = as_array(field(obj, "marks", line)?, line, "marks")?
        .iter()
        .map(|m| as_index(m, line, "marks"))
        .collect::<Result<Vec<_>>>()?;
    let labels = match field(obj, "labels", line)? {
        Value::Array(a) => Labels::Node(
            a.iter()
                .map(|x| as_index(x, line, "labels"))
                .collect::<Result<Vec<_>>>()?,
        ),
        other => Labels::Graph(as_index(other, line, "labels")?),
    };
    let task: TaskKind = field(obj, "task", line)?
        .as_str()
        .ok_or_else(|| Error::Parse {
            line,
            msg: "task: expected string".into(),
        })?
        .parse()
        .map_err(|e: Error| Error::Parse {
            line,
            msg: format!("task: {e}"),
        })?;
    TaskInstance::new(graph, inputs, marks, labels, task).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

pub fn write_records<W: Write>(mut w: W, instances: &[TaskInstance]) -> Result<()> {
    for inst in instances {
        writeln!(w, "{}", to_record(inst))?;
    }
    Ok(())
}

/// Reads all records; blank lines are skipped, line numbers are 1-based.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<TaskInstance>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(from_record(&line, i + 1)?);
    }
    Ok(out)
}
