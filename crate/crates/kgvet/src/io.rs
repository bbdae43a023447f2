//! File formats: embedding tables, candidate pools, diagnosis cases, and
//! JSONL writers. Text formats are line-based and tab-separated so entity
//! names may contain spaces; floats print in shortest round-trip form, so
//! save/load is lossless and reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use kgvet_core::medddx::DdxCase;
use kgvet_core::transe::EmbeddingTable;
use serde::Deserialize;

const TABLE_MAGIC: &str = "kgvet-embeddings v1";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error("{path} line {line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
}

fn format_error(path: &Path, line: usize, reason: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Render an embedding table as text: a magic line, the dimension, then one
/// `E`/`R` row per entity/relation with a comma-separated vector.
pub fn render_table(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TABLE_MAGIC}");
    let _ = writeln!(out, "dim {}", table.dim());
    for (id, vector) in table.entity_entries() {
        let _ = writeln!(out, "E\t{id}\t{}", join_floats(vector));
    }
    for (name, vector) in table.relation_entries() {
        let _ = writeln!(out, "R\t{name}\t{}", join_floats(vector));
    }
    out
}

fn join_floats(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:e}");
    }
    out
}

pub fn save_table(path: &Path, table: &EmbeddingTable) -> Result<(), IoError> {
    std::fs::write(path, render_table(table))?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<EmbeddingTable, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text, path)
}

fn parse_table(text: &str, path: &Path) -> Result<EmbeddingTable, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines
        .next()
        .ok_or_else(|| format_error(path, 1, "empty file"))?;
    if magic.trim() != TABLE_MAGIC {
        return Err(format_error(
            path,
            1,
            format!("unrecognized header '{magic}'"),
        ));
    }
    let (_, dim_line) = lines
        .next()
        .ok_or_else(|| format_error(path, 2, "missing dim line"))?;
    let dim: usize = dim_line
        .strip_prefix("dim ")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| format_error(path, 2, format!("bad dim line '{dim_line}'")))?;

    let mut entities = BTreeMap::new();
    let mut relations = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.splitn(3, '\t');
        let tag = fields.next().unwrap_or("");
        let name = fields.next().unwrap_or("");
        let vector_text = fields.next().unwrap_or("");
        if name.is_empty() || vector_text.is_empty() {
            return Err(format_error(
                path,
                line,
                "expected `tag<TAB>name<TAB>vector`",
            ));
        }
        let vector =
            parse_floats(vector_text).map_err(|reason| format_error(path, line, reason))?;
        if vector.len() != dim {
            return Err(format_error(
                path,
                line,
                format!("vector has {} components, expected {dim}", vector.len()),
            ));
        }
        let slot = match tag {
            "E" => entities.insert(name.to_string(), vector),
            "R" => relations.insert(name.to_string(), vector),
            other => {
                return Err(format_error(
                    path,
                    line,
                    format!("unknown row tag '{other}'"),
                ))
            }
        };
        if slot.is_some() {
            return Err(format_error(
                path,
                line,
                format!("duplicate row for '{name}'"),
            ));
        }
    }
    EmbeddingTable::new(dim, entities, relations).map_err(|e| format_error(path, 0, e.to_string()))
}

fn parse_floats(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| format!("unparseable float '{f}'"))
        })
        .collect()
}

/// Load a candidate pool: `name<TAB>v1,v2,…` per line, uniform dimension.
pub fn load_pool(path: &Path) -> Result<BTreeMap<String, Vec<f64>>, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut pool = BTreeMap::new();
    let mut dim = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, vector_text) = trimmed
            .split_once('\t')
            .ok_or_else(|| format_error(path, line, "expected `name<TAB>vector`"))?;
        let vector =
            parse_floats(vector_text).map_err(|reason| format_error(path, line, reason))?;
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(format_error(
                    path,
                    line,
                    format!("vector has {} components, expected {d}", vector.len()),
                ));
            }
            Some(_) => {}
        }
        if pool.insert(name.trim().to_string(), vector).is_some() {
            return Err(format_error(path, line, format!("duplicate name '{name}'")));
        }
    }
    Ok(pool)
}

/// Load diagnosis cases: JSONL `{"id", "question", "correct"}` per line.
pub fn load_cases(path: &Path) -> Result<Vec<DdxCase>, IoError> {
    #[derive(Deserialize)]
    struct RawCase {
        id: String,
        question: String,
        correct: String,
    }
    let text = std::fs::read_to_string(path)?;
    let mut cases = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let raw: RawCase =
            serde_json::from_str(raw).map_err(|e| format_error(path, line, e.to_string()))?;
        cases.push(DdxCase {
            id: raw.id,
            stem: raw.question,
            correct: raw.correct,
        });
    }
    Ok(cases)
}

/// Write any serializable items one JSON document per line.
pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
