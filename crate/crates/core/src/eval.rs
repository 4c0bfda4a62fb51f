//! Exact-set match (EM), logical form (LX), question match (QM) and
//! interaction match (IM).
//!
//! EM compares [`ComponentSet`](crate::sql::ComponentSet)s with every
//! literal replaced by a placeholder; LX compares them with normalized
//! literals. This is the crate's own component definition, not a port of
//! the official Spider script: nested queries are compared as whole
//! component sets at any depth, JOIN conditions are ignored (only the table
//! set counts), and `LIMIT` values are always compared.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::schema::DatabaseSchema;
use crate::sql::{component_set, parse_sql, SqlError, SqlQuery, ValueMode};

pub fn exact_set_match(pred: &SqlQuery, gold: &SqlQuery) -> bool {
    component_set(pred, ValueMode::Insensitive) == component_set(gold, ValueMode::Insensitive)
}

pub fn logical_form_match(pred: &SqlQuery, gold: &SqlQuery) -> bool {
    component_set(pred, ValueMode::Sensitive) == component_set(gold, ValueMode::Sensitive)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Match,
    /// Parses and resolves, but EM fails.
    Mismatch,
    /// Refers to a table or column the schema does not have.
    SchemaViolation,
    ParseFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExampleVerdict {
    pub interaction_id: String,
    pub verdict: Verdict,
    /// LX on top of EM.
    pub lx: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub parse_failure: usize,
    pub schema_violation: usize,
    pub mismatch: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub examples: usize,
    pub interactions: usize,
    pub lx: f64,
    pub em: f64,
    /// Per-question EM rate; the same number as `em`, reported under its
    /// multi-turn name.
    pub qm: f64,
    /// `None` when no interaction has more than one question.
    pub im: Option<f64>,
    pub errors: ErrorCounts,
    pub verdicts: Vec<ExampleVerdict>,
}

impl EvaluationReport {
    pub fn summary(&self) -> String {
        let im = self.im.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        format!(
            "examples      {}\ninteractions  {}\nLX            {:.4}\nEM            {:.4}\nQM            {:.4}\nIM            {}\nparse-failure    {}\nschema-violation {}\nmismatch         {}\n",
            self.examples,
            self.interactions,
            self.lx,
            self.em,
            self.qm,
            im,
            self.errors.parse_failure,
            self.errors.schema_violation,
            self.errors.mismatch
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub prediction: String,
    pub gold: String,
    pub db_id: String,
    pub interaction_id: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyCorpus,
    #[error("{predictions} predictions for {golds} gold queries")]
    MismatchedLengths { predictions: usize, golds: usize },
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
    #[error("gold query {index} does not parse: {source}")]
    BadGold { index: usize, source: SqlError },
}

/// Pairs predictions with gold examples line by line.
pub fn pair_up(predictions: &[String], golds: &[(String, String, String)]) -> Result<Vec<EvalExample>, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::MismatchedLengths { predictions: predictions.len(), golds: golds.len() });
    }
    Ok(predictions
        .iter()
        .zip(golds)
        .map(|(p, (g, db, iid))| EvalExample {
            prediction: p.clone(),
            gold: g.clone(),
            db_id: db.clone(),
            interaction_id: iid.clone(),
        })
        .collect())
}

fn judge(ex: &EvalExample, index: usize, schema: &DatabaseSchema) -> Result<ExampleVerdict, EvalError> {
    let gold = parse_sql(&ex.gold, Some(schema)).map_err(|source| EvalError::BadGold { index, source })?;
    let (verdict, lx, error) = match parse_sql(&ex.prediction, Some(schema)) {
        Ok(pred) if exact_set_match(&pred, &gold) => (Verdict::Match, logical_form_match(&pred, &gold), None),
        Ok(_) => (Verdict::Mismatch, false, None),
        Err(e) if e.is_schema_violation() => (Verdict::SchemaViolation, false, Some(e.to_string())),
        Err(e) => (Verdict::ParseFailure, false, Some(e.to_string())),
    };
    Ok(ExampleVerdict { interaction_id: ex.interaction_id.clone(), verdict, lx, error })
}

/// Scores a corpus. `schemas` maps a database id to its schema.
pub fn score_corpus<'s>(
    examples: &[EvalExample],
    schemas: impl Fn(&str) -> Option<&'s DatabaseSchema> + Sync,
) -> Result<EvaluationReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let verdicts: Vec<ExampleVerdict> = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let schema = schemas(&ex.db_id).ok_or_else(|| EvalError::UnknownDatabase(ex.db_id.clone()))?;
            judge(ex, i, schema)
        })
        .collect::<Result<_, _>>()?;

    let n = verdicts.len();
    let matched = verdicts.iter().filter(|v| v.verdict == Verdict::Match).count();
    let lx = verdicts.iter().filter(|v| v.lx).count();
    let mut errors = ErrorCounts::default();
    let mut groups: BTreeMap<&str, (usize, bool)> = BTreeMap::new();
    for v in &verdicts {
        match v.verdict {
            Verdict::Match => {}
            Verdict::Mismatch => errors.mismatch += 1,
            Verdict::SchemaViolation => errors.schema_violation += 1,
            Verdict::ParseFailure => errors.parse_failure += 1,
        }
        let g = groups.entry(&v.interaction_id).or_insert((0, true));
        g.0 += 1;
        g.1 &= v.verdict == Verdict::Match;
    }
    let interactions = groups.len();
    let im = groups
        .values()
        .any(|(size, _)| *size > 1)
        .then(|| groups.values().filter(|(_, all)| *all).count() as f64 / interactions as f64);
    let em = matched as f64 / n as f64;
    Ok(EvaluationReport {
        examples: n,
        interactions,
        lx: lx as f64 / n as f64,
        em,
        qm: em,
        im,
        errors,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::wta;

    fn ex(pred: &str, gold: &str, iid: &str) -> EvalExample {
        EvalExample { prediction: pred.into(), gold: gold.into(), db_id: "wta".into(), interaction_id: iid.into() }
    }

    #[test]
    fn verdict_classes_and_rates() {
        let s = wta();
        let lookup = |_: &str| Some(&s);
        let g1 = "SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points > 5";
        let g2 = "SELECT COUNT(*) FROM Players";
        let corpus = vec![
            ex(g1, g1, "a"),
            ex("SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points > 6", g1, "a"),
            ex("SELECT AVG(Players.Player_id) FROM Players", "SELECT SUM(Players.Player_id) FROM Players", "b"),
            ex("SELECT Players.Nation FROM Players", g2, "b"),
            ex("SELECT FROM", g2, "c"),
        ];
        let r = score_corpus(&corpus, lookup).unwrap();
        assert_eq!(r.examples, 5);
        assert_eq!(r.em, 2.0 / 5.0);
        assert_eq!(r.lx, 1.0 / 5.0);
        assert_eq!(r.im, Some(1.0 / 3.0));
        assert_eq!(r.errors, ErrorCounts { parse_failure: 1, schema_violation: 1, mismatch: 1 });
    }

    #[test]
    fn two_turn_interaction() {
        let s = wta();
        let g = "SELECT Ranking.Year FROM Ranking";
        let r = score_corpus(&[ex(g, g, "i"), ex("SELECT Ranking.Player_id FROM Ranking", g, "i")], |_| Some(&s))
            .unwrap();
        assert_eq!(r.qm, 0.5);
        assert_eq!(r.im, Some(0.0));
    }

    #[test]
    fn single_turn_has_no_im() {
        let s = wta();
        let g = "SELECT Ranking.Year FROM Ranking";
        let r = score_corpus(&[ex(g, g, "1"), ex(g, g, "2")], |_| Some(&s)).unwrap();
        assert_eq!((r.qm, r.im), (1.0, None));
    }

    #[test]
    fn errors() {
        let s = wta();
        assert!(matches!(score_corpus(&[], |_| Some(&s)), Err(EvalError::EmptyCorpus)));
        assert!(matches!(
            pair_up(&["x".into()], &[]),
            Err(EvalError::MismatchedLengths { predictions: 1, golds: 0 })
        ));
    }

    #[test]
    fn grouped_numbers_are_the_same_value() {
        let s = wta();
        let p = |t: &str| parse_sql(t, Some(&s)).unwrap();
        let a = p("SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points = '1,200'");
        let b = p("SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points = 1200");
        assert!(logical_form_match(&a, &b));
        let c = p("SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points = 5");
        let d = p("SELECT Ranking.Year FROM Ranking WHERE Ranking.Ranking_points = 6");
        assert!(exact_set_match(&c, &d));
        assert!(!logical_form_match(&c, &d));
    }
}
