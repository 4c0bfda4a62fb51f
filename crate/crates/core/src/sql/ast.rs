use serde::{Deserialize, Serialize};

/// A `SELECT` query, optionally chained to another by a set operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SqlQuery {
    pub select: Select,
    pub from: FromClause,
    pub where_clause: Option<Condition>,
    pub group_by: Vec<ColumnRef>,
    pub having: Option<Condition>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub set_op: Option<(SetOp, Box<SqlQuery>)>,
}

impl SqlQuery {
    /// `SELECT * FROM <table>`.
    pub fn select_all(table: &str) -> Self {
        Self {
            select: Select { distinct: false, items: vec![ValueUnit::column(ColumnRef::star())] },
            from: FromClause { tables: vec![TableRef::named(table)] },
            where_clause: None,
            group_by: Vec::new(),
            having: None,
            order_by: Vec::new(),
            limit: None,
            set_op: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<ValueUnit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Aggregate {
    None,
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Self::None => None,
            Self::Count => Some("COUNT"),
            Self::Sum => Some("SUM"),
            Self::Avg => Some("AVG"),
            Self::Min => Some("MIN"),
            Self::Max => Some("MAX"),
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word.to_ascii_uppercase().as_str() {
            "COUNT" => Self::Count,
            "SUM" => Self::Sum,
            "AVG" => Self::Avg,
            "MIN" => Self::Min,
            "MAX" => Self::Max,
            _ => return None,
        })
    }
}

/// A column, optionally wrapped in an aggregate: `T.c`, `COUNT(DISTINCT T.c)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueUnit {
    pub agg: Aggregate,
    pub distinct: bool,
    pub column: ColumnRef,
}

impl ValueUnit {
    pub fn column(column: ColumnRef) -> Self {
        Self { agg: Aggregate::None, distinct: false, column }
    }
}

/// `table.column`, bare `column`, or the `*` pseudo-column.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: &str, column: &str) -> Self {
        Self { table: Some(table.to_string()), column: column.to_string() }
    }

    pub fn bare(column: &str) -> Self {
        Self { table: None, column: column.to_string() }
    }

    pub fn star() -> Self {
        Self::bare("*")
    }

    pub fn is_star(&self) -> bool {
        self.column == "*"
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FromClause {
    /// First entry is the base table; later entries are joined, each with
    /// the `ON` conditions written after it.
    pub tables: Vec<TableRef>,
}

impl FromClause {
    pub fn conditions(&self) -> impl Iterator<Item = &JoinCondition> {
        self.tables.iter().flat_map(|t| t.on.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
    pub on: Vec<JoinCondition>,
}

impl TableRef {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), alias: None, on: Vec::new() }
    }
}

/// Equality between two columns in a join's `ON` list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinCondition {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// Boolean tree. `And`/`Or` always hold at least two children and never a
/// direct child of the same kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    And(Vec<Condition>),
    Or(Vec<Condition>),
    Predicate(Predicate),
}

impl Condition {
    /// Joins conditions with AND, flattening nested conjunctions.
    pub fn and(parts: Vec<Condition>) -> Option<Condition> {
        Self::combine(parts, true)
    }

    pub fn or(parts: Vec<Condition>) -> Option<Condition> {
        Self::combine(parts, false)
    }

    fn combine(parts: Vec<Condition>, conj: bool) -> Option<Condition> {
        let mut flat = Vec::new();
        for p in parts {
            match (p, conj) {
                (Condition::And(inner), true) | (Condition::Or(inner), false) => flat.extend(inner),
                (other, _) => flat.push(other),
            }
        }
        match flat.len() {
            0 => None,
            1 => flat.pop(),
            _ if conj => Some(Condition::And(flat)),
            _ => Some(Condition::Or(flat)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub left: ValueUnit,
    pub op: CmpOp,
    pub right: Operand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Like,
    NotLike,
    In,
    NotIn,
    Between,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Eq => "=",
            Self::Ne => "!=",
            Self::Lt => "<",
            Self::Gt => ">",
            Self::Le => "<=",
            Self::Ge => ">=",
            Self::Like => "LIKE",
            Self::NotLike => "NOT LIKE",
            Self::In => "IN",
            Self::NotIn => "NOT IN",
            Self::Between => "BETWEEN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Literal(Literal),
    Column(ColumnRef),
    Subquery(Box<SqlQuery>),
    /// Bounds of `BETWEEN lo AND hi`.
    Range(Literal, Literal),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Literal {
    /// Numeric literal as written.
    Number(String),
    /// Quoted string contents, unescaped.
    Str(String),
}

impl Literal {
    pub fn text(&self) -> &str {
        match self {
            Self::Number(s) | Self::Str(s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderItem {
    pub unit: ValueUnit,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

impl SetOp {
    pub fn keyword(self) -> &'static str {
        match self {
            Self::Union => "UNION",
            Self::Intersect => "INTERSECT",
            Self::Except => "EXCEPT",
        }
    }
}

/// Visits every query level: `q`, nested subqueries, then set-op operands.
pub fn for_each_query<'a>(q: &'a SqlQuery, f: &mut dyn FnMut(&'a SqlQuery)) {
    f(q);
    for cond in [&q.where_clause, &q.having].into_iter().flatten() {
        for_each_subquery(cond, f);
    }
    if let Some((_, rhs)) = &q.set_op {
        for_each_query(rhs, f);
    }
}

fn for_each_subquery<'a>(c: &'a Condition, f: &mut dyn FnMut(&'a SqlQuery)) {
    match c {
        Condition::And(v) | Condition::Or(v) => v.iter().for_each(|x| for_each_subquery(x, f)),
        Condition::Predicate(p) => {
            if let Operand::Subquery(q) = &p.right {
                for_each_query(q, f);
            }
        }
    }
}

/// Column references that belong to this query level (not to nested ones).
pub fn level_columns(q: &SqlQuery) -> Vec<&ColumnRef> {
    let mut out: Vec<&ColumnRef> = q.select.items.iter().map(|u| &u.column).collect();
    for cond in [&q.where_clause, &q.having].into_iter().flatten() {
        condition_columns(cond, &mut out);
    }
    out.extend(q.group_by.iter());
    out.extend(q.order_by.iter().map(|o| &o.unit.column));
    for c in q.from.conditions() {
        out.push(&c.left);
        out.push(&c.right);
    }
    out
}

fn condition_columns<'a>(c: &'a Condition, out: &mut Vec<&'a ColumnRef>) {
    match c {
        Condition::And(v) | Condition::Or(v) => v.iter().for_each(|x| condition_columns(x, out)),
        Condition::Predicate(p) => {
            out.push(&p.left.column);
            if let Operand::Column(col) = &p.right {
                out.push(col);
            }
        }
    }
}
