use serde::Serialize;

use super::ast::*;
use crate::linking::{infer_hint, normalize_value};

/// How literal values take part in comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValueMode {
    /// Every literal becomes the same placeholder (exact set match).
    #[default]
    Insensitive,
    /// Literals are compared after normalization (logical form match).
    Sensitive,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct UnitKey {
    pub agg: Aggregate,
    pub distinct: bool,
    pub column: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OperandKey {
    /// `None` is the value placeholder.
    Value(Option<String>),
    Column(String),
    Subquery(Box<ComponentSet>),
    Range(Option<String>, Option<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConditionKey {
    And(Vec<ConditionKey>),
    Or(Vec<ConditionKey>),
    Predicate { left: UnitKey, op: CmpOp, right: OperandKey },
}

/// Order-insensitive decomposition of a query by clause. Select items and
/// conjuncts/disjuncts are sorted, the FROM clause is reduced to its table
/// set, and ORDER BY keeps its order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ComponentSet {
    pub distinct: bool,
    pub select: Vec<UnitKey>,
    pub tables: Vec<String>,
    pub where_clause: Option<ConditionKey>,
    pub group_by: Vec<String>,
    pub having: Option<ConditionKey>,
    pub order_by: Vec<(UnitKey, Direction)>,
    pub limit: Option<u64>,
    pub set_op: Option<(SetOp, Box<ComponentSet>)>,
}

pub fn component_set(q: &SqlQuery, mode: ValueMode) -> ComponentSet {
    let mut select: Vec<UnitKey> = q.select.items.iter().map(unit_key).collect();
    select.sort();
    let mut tables: Vec<String> = q.from.tables.iter().map(|t| t.name.to_lowercase()).collect();
    tables.sort();
    tables.dedup();
    let mut group_by: Vec<String> = q.group_by.iter().map(column_key).collect();
    group_by.sort();
    group_by.dedup();
    ComponentSet {
        distinct: q.select.distinct,
        select,
        tables,
        where_clause: q.where_clause.as_ref().map(|c| condition_key(c, mode)),
        group_by,
        having: q.having.as_ref().map(|c| condition_key(c, mode)),
        order_by: q.order_by.iter().map(|o| (unit_key(&o.unit), o.direction)).collect(),
        limit: q.limit,
        set_op: q.set_op.as_ref().map(|(op, rhs)| (*op, Box::new(component_set(rhs, mode)))),
    }
}

fn column_key(c: &ColumnRef) -> String {
    match &c.table {
        Some(t) => format!("{}.{}", t.to_lowercase(), c.column.to_lowercase()),
        None => c.column.to_lowercase(),
    }
}

fn unit_key(u: &ValueUnit) -> UnitKey {
    UnitKey { agg: u.agg, distinct: u.distinct, column: column_key(&u.column) }
}

fn value_key(l: &Literal, mode: ValueMode) -> Option<String> {
    match mode {
        ValueMode::Insensitive => None,
        ValueMode::Sensitive => {
            let raw = l.text();
            let hint = infer_hint(raw);
            Some(normalize_value(raw, hint).unwrap_or_else(|e| e.fallback().to_string()))
        }
    }
}

fn condition_key(c: &Condition, mode: ValueMode) -> ConditionKey {
    match c {
        Condition::And(v) => {
            let mut keys: Vec<_> = v.iter().map(|x| condition_key(x, mode)).collect();
            keys.sort();
            ConditionKey::And(keys)
        }
        Condition::Or(v) => {
            let mut keys: Vec<_> = v.iter().map(|x| condition_key(x, mode)).collect();
            keys.sort();
            ConditionKey::Or(keys)
        }
        Condition::Predicate(p) => ConditionKey::Predicate {
            left: unit_key(&p.left),
            op: p.op,
            right: match &p.right {
                Operand::Literal(l) => OperandKey::Value(value_key(l, mode)),
                Operand::Column(col) => OperandKey::Column(column_key(col)),
                Operand::Subquery(q) => OperandKey::Subquery(Box::new(component_set(q, mode))),
                Operand::Range(lo, hi) => OperandKey::Range(value_key(lo, mode), value_key(hi, mode)),
            },
        },
    }
}
