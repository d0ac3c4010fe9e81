//! Triple readers and writers.
//!
//! TSV layout is `subject \t property \t object \t kind [\t label]`, UTF-8,
//! with `\t`, `\n`, `\r` and `\\` escaped inside fields. JSON lines carry the
//! same fields as an object per line.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Fact, KnowledgeBase, Value, ValueKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KbFormat {
    TsvTriples,
    JsonLines,
}

impl KbFormat {
    /// Guesses the format from a file extension (`.jsonl`/`.json` → JSON lines).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => KbFormat::JsonLines,
            _ => KbFormat::TsvTriples,
        }
    }
}

impl FromStr for KbFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" | "tsv-triples" => Ok(KbFormat::TsvTriples),
            "jsonl" | "json-lines" => Ok(KbFormat::JsonLines),
            other => Err(Error::Config(format!("unknown KB format `{other}`"))),
        }
    }
}

pub fn load_kb(path: impl AsRef<Path>, format: KbFormat) -> Result<KnowledgeBase> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        KbFormat::TsvTriples => read_tsv(reader),
        KbFormat::JsonLines => read_jsonl(reader),
    }
}

pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape_field(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid escape `\\{other}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line,
                    message: "dangling backslash".into(),
                })
            }
        }
    }
    Ok(out)
}

fn parse_label(s: &str, line: usize) -> Result<Option<bool>> {
    match s {
        "" => Ok(None),
        "true" | "True" => Ok(Some(true)),
        "false" | "False" => Ok(Some(false)),
        other => Err(Error::Parse {
            line,
            message: format!("invalid label `{other}`"),
        }),
    }
}

pub fn read_tsv<R: Read>(reader: R) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 && cols.len() != 5 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 or 5 tab-separated fields, found {}", cols.len()),
            });
        }
        let kind: ValueKind = cols[3].parse()?;
        let subject = unescape_field(cols[0], lineno)?;
        let property = unescape_field(cols[1], lineno)?;
        if subject.is_empty() || property.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                message: "empty subject or property".into(),
            });
        }
        let object = Value::new(kind, unescape_field(cols[2], lineno)?);
        let mut fact = Fact::new(subject, property, object);
        if cols.len() == 5 {
            fact.label = parse_label(cols[4], lineno)?;
        }
        kb.insert(fact);
    }
    Ok(kb)
}

pub fn write_tsv<W: Write>(kb: &KnowledgeBase, mut w: W) -> std::io::Result<()> {
    for f in kb.facts() {
        write!(
            w,
            "{}\t{}\t{}\t{}",
            escape_field(&f.subject),
            escape_field(&f.property),
            escape_field(&f.object.text),
            f.object.kind
        )?;
        if let Some(l) = f.label {
            write!(w, "\t{l}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonTriple {
    subject: String,
    property: String,
    object: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<bool>,
}

pub fn read_jsonl<R: Read>(reader: R) -> Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonTriple = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let kind: ValueKind = rec.kind.parse()?;
        let mut fact = Fact::new(rec.subject, rec.property, Value::new(kind, rec.object));
        fact.label = rec.label;
        kb.insert(fact);
    }
    Ok(kb)
}

pub fn write_jsonl<W: Write>(kb: &KnowledgeBase, mut w: W) -> std::io::Result<()> {
    for f in kb.facts() {
        let rec = JsonTriple {
            subject: f.subject.clone(),
            property: f.property.clone(),
            object: f.object.text.clone(),
            kind: f.object.kind.to_string(),
            label: f.label,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}
