//! Question/SQL corpora.
//!
//! Three layouts are read:
//!
//! * `jsonl`: one question per line,
//!   `{"interaction_id": .., "db_id": .., "question": .., "query": ..}`;
//!   consecutive lines with the same interaction id are the turns of one
//!   dialogue.
//! * `spider`: a JSON array of `{"db_id", "question", "query", ...}`.
//! * `sparc`: a JSON array of `{"database_id", "interaction": [{"utterance",
//!   "query"}, ...], ...}` (SParC and CoSQL).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// `.jsonl` files are `jsonl`; JSON arrays are `sparc` when their first
    /// entry has an `interaction` list and `spider` otherwise.
    #[default]
    Auto,
    Jsonl,
    Spider,
    Sparc,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub question: String,
    pub query: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub id: String,
    pub db_id: String,
    pub turns: Vec<Turn>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub interaction_id: String,
    pub db_id: String,
    pub question: String,
    pub query: String,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(format!("{}: {msg}", path.display()))
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Vec<Interaction>, PipelineError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| bad(path, e))?;
    let format = match format {
        DatasetFormat::Auto if path.extension().is_some_and(|e| e == "jsonl") => DatasetFormat::Jsonl,
        DatasetFormat::Auto => {
            let v: Value = serde_json::from_str(&text).map_err(|e| bad(path, e))?;
            match v.as_array().and_then(|a| a.first()) {
                Some(first) if first.get("interaction").is_some() => DatasetFormat::Sparc,
                _ => DatasetFormat::Spider,
            }
        }
        f => f,
    };
    match format {
        DatasetFormat::Jsonl => parse_jsonl(&text).map_err(|e| bad(path, e)),
        DatasetFormat::Spider => parse_spider(&text).map_err(|e| bad(path, e)),
        DatasetFormat::Sparc => parse_sparc(&text).map_err(|e| bad(path, e)),
        DatasetFormat::Auto => unreachable!(),
    }
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Interaction>, String> {
    let mut out: Vec<Interaction> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: QuestionRecord = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        let turn = Turn { question: r.question, query: r.query };
        match out.last_mut() {
            Some(last) if last.id == r.interaction_id => {
                if last.db_id != r.db_id {
                    return Err(format!("line {}: interaction `{}` switches database", i + 1, r.interaction_id));
                }
                last.turns.push(turn);
            }
            _ => out.push(Interaction { id: r.interaction_id, db_id: r.db_id, turns: vec![turn] }),
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SpiderEntry {
    db_id: String,
    question: String,
    query: String,
}

pub fn parse_spider(text: &str) -> Result<Vec<Interaction>, String> {
    let entries: Vec<SpiderEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| Interaction {
            id: i.to_string(),
            db_id: e.db_id,
            turns: vec![Turn { question: e.question, query: e.query }],
        })
        .collect())
}

#[derive(Deserialize)]
struct SparcUtterance {
    utterance: String,
    query: String,
}

#[derive(Deserialize)]
struct SparcEntry {
    database_id: String,
    interaction: Vec<SparcUtterance>,
    #[serde(default)]
    interaction_id: Option<Value>,
}

pub fn parse_sparc(text: &str) -> Result<Vec<Interaction>, String> {
    let entries: Vec<SparcEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| Interaction {
            id: match e.interaction_id {
                Some(Value::String(s)) => s,
                Some(v) => v.to_string(),
                None => i.to_string(),
            },
            db_id: e.database_id,
            turns: e.interaction.into_iter().map(|u| Turn { question: u.utterance, query: u.query }).collect(),
        })
        .collect())
}

pub fn write_jsonl(path: impl AsRef<Path>, interactions: &[Interaction]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for it in interactions {
        for t in &it.turns {
            let r = QuestionRecord {
                interaction_id: it.id.clone(),
                db_id: it.db_id.clone(),
                question: t.question.clone(),
                query: t.query.clone(),
            };
            writeln!(f, "{}", serde_json::to_string(&r).expect("record serializes"))?;
        }
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_groups_consecutive_turns() {
        let text = r#"{"interaction_id":"a","db_id":"d","question":"q1","query":"SELECT * FROM T"}
{"interaction_id":"a","db_id":"d","question":"q2","query":"SELECT * FROM T"}
{"interaction_id":"b","db_id":"d","question":"q3","query":"SELECT * FROM T"}
"#;
        let its = parse_jsonl(text).unwrap();
        assert_eq!(its.len(), 2);
        assert_eq!(its[0].turns.len(), 2);
    }

    #[test]
    fn spider_and_sparc_layouts() {
        let spider = r#"[{"db_id":"d","question":"How many?","query":"SELECT count(*) FROM t","query_toks":[]}]"#;
        assert_eq!(parse_spider(spider).unwrap()[0].turns[0].question, "How many?");
        let sparc = r#"[{"database_id":"d","interaction":[{"utterance":"a","query":"x"},{"utterance":"b","query":"y"}],"final":{}}]"#;
        let its = parse_sparc(sparc).unwrap();
        assert_eq!((its[0].id.as_str(), its[0].turns.len()), ("0", 2));
    }

    #[test]
    fn auto_detection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dev.json");
        fs::write(&p, r#"[{"database_id":"d","interaction":[{"utterance":"a","query":"x"}]}]"#).unwrap();
        assert_eq!(load_dataset(&p, DatasetFormat::Auto).unwrap()[0].db_id, "d");
        let q = dir.path().join("x.jsonl");
        let its = vec![Interaction { id: "1".into(), db_id: "d".into(), turns: vec![Turn { question: "a".into(), query: "b".into() }] }];
        write_jsonl(&q, &its).unwrap();
        assert_eq!(load_dataset(&q, DatasetFormat::Auto).unwrap(), its);
    }
}
