//! Seeded synthetic schemas and queries.
//!
//! Schemas have 2 to 8 tables whose foreign keys form a chain, a star or a
//! random tree, sometimes with one extra edge. Queries join a connected set
//! of tables with explicit `ON` conditions and draw from the full clause
//! list: aggregates, DISTINCT, AND/OR conditions, BETWEEN, LIKE, IN
//! subqueries, GROUP BY/HAVING, ORDER BY, LIMIT and set operations.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{write_jsonl, Interaction, Turn};
use crate::schema::{write_tables_file, ColumnId, ColumnType, DatabaseSchema, SchemaBuilder, SchemaGraph};
use crate::sql::*;

const TABLE_WORDS: &[&str] = &[
    "Singer", "Concert", "Stadium", "Album", "Track", "Artist", "Student", "Course", "Teacher",
    "Department", "Employee", "Company", "Product", "Customer", "Airport", "Flight", "Airline",
    "Hospital", "Doctor", "Patient", "Book", "Author", "Library", "Movie", "Director", "Team",
    "Player", "City", "Museum", "Festival",
];

const ATTRIBUTES: &[(&str, ColumnType)] = &[
    ("name", ColumnType::Text),
    ("age", ColumnType::Integer),
    ("country", ColumnType::Text),
    ("year", ColumnType::Integer),
    ("price", ColumnType::Real),
    ("rating", ColumnType::Real),
    ("title", ColumnType::Text),
    ("city", ColumnType::Text),
    ("capacity", ColumnType::Integer),
    ("founded", ColumnType::Date),
    ("score", ColumnType::Integer),
    ("genre", ColumnType::Text),
    ("budget", ColumnType::Real),
    ("active", ColumnType::Boolean),
];

const TEXT_VALUES: &[&str] = &[
    "Paris", "London", "rock", "jazz", "New York", "Alice", "Bob", "gold", "silver", "North",
    "O'Brien", "Rio de Janeiro",
];

const DATES: &[&str] = &["1999-12-31", "2001-02-03", "2016-07-10", "2020-01-01"];

#[derive(Clone, Copy, Debug)]
pub struct SynthOptions {
    pub seed: u64,
    pub n_schemas: usize,
    pub n_queries: usize,
    /// Interactions get between 1 and this many turns.
    pub max_turns: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub schemas: Vec<DatabaseSchema>,
    pub interactions: Vec<Interaction>,
}

impl SyntheticCorpus {
    pub fn queries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.interactions.iter().flat_map(|i| i.turns.iter().map(move |t| (i.db_id.as_str(), t.query.as_str())))
    }

    /// Writes `tables.json` and `examples.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_tables_file(dir.join("tables.json"), &self.schemas).map_err(std::io::Error::other)?;
        write_jsonl(dir.join("examples.jsonl"), &self.interactions)
    }
}

/// `n_queries` single-turn questions spread round-robin over `n_schemas`
/// schemas.
pub fn generate_synthetic_corpus(seed: u64, n_schemas: usize, n_queries: usize) -> SyntheticCorpus {
    generate(&SynthOptions { seed, n_schemas, n_queries, max_turns: 1 })
}

pub fn generate(opts: &SynthOptions) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_schemas = opts.n_schemas.max(1);
    let schemas: Vec<DatabaseSchema> =
        (0..n_schemas).map(|i| random_schema(&mut rng, &format!("synth_{i:03}"))).collect();
    let graphs: Vec<SchemaGraph> = schemas.iter().map(SchemaGraph::build).collect();
    let mut interactions = Vec::new();
    let mut made = 0;
    let mut k = 0;
    while made < opts.n_queries {
        let si = k % n_schemas;
        let turns = rng.gen_range(1..=opts.max_turns.max(1)).min(opts.n_queries - made);
        let turns = (0..turns)
            .map(|_| {
                let q = random_query(&mut rng, &schemas[si], &graphs[si]);
                Turn { question: question_for(&q), query: render_sql(&q) }
            })
            .collect::<Vec<_>>();
        made += turns.len();
        interactions.push(Interaction { id: format!("i{k:05}"), db_id: schemas[si].db_id.clone(), turns });
        k += 1;
    }
    SyntheticCorpus { schemas, interactions }
}

pub fn random_schema(rng: &mut impl Rng, db_id: &str) -> DatabaseSchema {
    let n = rng.gen_range(2..=8);
    let names: Vec<&str> = TABLE_WORDS.choose_multiple(rng, n).copied().collect();
    let style = rng.gen_range(0..3);
    let parents: Vec<Option<usize>> = (0..n)
        .map(|i| match (i, style) {
            (0, _) => None,
            (_, 0) => Some(i - 1),
            (_, 1) => Some(0),
            _ => Some(rng.gen_range(0..i)),
        })
        .collect();
    let extra = (n >= 3 && rng.gen_bool(0.2)).then(|| {
        let child = rng.gen_range(2..n);
        let target = (0..child).filter(|&t| Some(t) != parents[child]).collect::<Vec<_>>();
        (child, *target.choose(rng).unwrap())
    });

    let mut b = SchemaBuilder::new(db_id);
    for (i, name) in names.iter().enumerate() {
        let mut cols: Vec<(String, ColumnType)> = vec![("id".to_string(), ColumnType::Integer)];
        if let Some(p) = parents[i] {
            cols.push((format!("{}_id", names[p].to_lowercase()), ColumnType::Integer));
        }
        if let Some((c, t)) = extra {
            if c == i {
                cols.push((format!("{}_ref", names[t].to_lowercase()), ColumnType::Integer));
            }
        }
        let k = rng.gen_range(1..=4);
        for (a, ty) in ATTRIBUTES.choose_multiple(rng, k) {
            cols.push((a.to_string(), *ty));
        }
        let cols: Vec<(&str, ColumnType)> = cols.iter().map(|(c, t)| (c.as_str(), *t)).collect();
        b = b.table(name, &cols).primary_key("id");
    }
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            b = b.foreign_key(
                &format!("{}.{}_id", names[i], names[*p].to_lowercase()),
                &format!("{}.id", names[*p]),
            );
        }
    }
    if let Some((c, t)) = extra {
        b = b.foreign_key(&format!("{}.{}_ref", names[c], names[t].to_lowercase()), &format!("{}.id", names[t]));
    }
    b.build().expect("generated schema is valid")
}

fn col(schema: &DatabaseSchema, id: ColumnId) -> ColumnRef {
    ColumnRef::new(&schema.table(id.table).name, &schema.column(id).name)
}

fn literal_for(rng: &mut impl Rng, ty: ColumnType) -> Literal {
    match ty {
        ColumnType::Integer | ColumnType::Boolean => Literal::Number(rng.gen_range(-5..2000).to_string()),
        ColumnType::Real => Literal::Number(format!("{}.{}", rng.gen_range(0..500), rng.gen_range(1..10))),
        ColumnType::Date => Literal::Str(DATES.choose(rng).unwrap().to_string()),
        _ => Literal::Str(TEXT_VALUES.choose(rng).unwrap().to_string()),
    }
}

/// A connected table set grown from a random start, in join order, with
/// the (earlier table, later table) pairs that join them.
fn pick_tables(rng: &mut impl Rng, graph: &SchemaGraph, max: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut tables = vec![rng.gen_range(0..graph.table_count())];
    let mut edges = Vec::new();
    let want = rng.gen_range(1..=max.min(graph.table_count()));
    while tables.len() < want {
        let frontier: Vec<(usize, usize)> = tables
            .iter()
            .flat_map(|&t| graph.table_neighbors(t).iter().map(move |&n| (t, n)))
            .filter(|(_, n)| !tables.contains(n))
            .collect();
        let Some(&(from, to)) = frontier.choose(rng) else { break };
        tables.push(to);
        edges.push((from, to));
    }
    (tables, edges)
}

fn build_from(schema: &DatabaseSchema, graph: &SchemaGraph, tables: &[usize], edges: &[(usize, usize)]) -> FromClause {
    let mut refs: Vec<TableRef> = tables.iter().map(|&t| TableRef::named(&schema.table(t).name)).collect();
    for &(a, b) in edges {
        let fk = &schema.foreign_keys()[graph.link_foreign_keys(a, b)[0]];
        let pos = tables.iter().position(|&t| t == b).unwrap();
        refs[pos].on.push(JoinCondition { left: col(schema, fk.from), right: col(schema, fk.to) });
    }
    FromClause { tables: refs }
}

fn predicate(rng: &mut impl Rng, schema: &DatabaseSchema, c: ColumnId) -> Condition {
    let ty = schema.column(c).col_type;
    let left = ValueUnit::column(col(schema, c));
    let (op, right) = if ty.is_numeric() || ty == ColumnType::Boolean {
        let op = *[CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge, CmpOp::Between]
            .choose(rng)
            .unwrap();
        if op == CmpOp::Between {
            (op, Operand::Range(literal_for(rng, ty), literal_for(rng, ty)))
        } else {
            (op, Operand::Literal(literal_for(rng, ty)))
        }
    } else {
        match rng.gen_range(0..4) {
            0 => (CmpOp::Like, Operand::Literal(Literal::Str(format!("%{}%", TEXT_VALUES.choose(rng).unwrap())))),
            1 => (CmpOp::NotLike, Operand::Literal(Literal::Str(format!("{}%", TEXT_VALUES.choose(rng).unwrap())))),
            2 => (CmpOp::Ne, Operand::Literal(literal_for(rng, ty))),
            _ => (CmpOp::Eq, Operand::Literal(literal_for(rng, ty))),
        }
    };
    Condition::Predicate(Predicate { left, op, right })
}

pub fn random_query(rng: &mut impl Rng, schema: &DatabaseSchema, graph: &SchemaGraph) -> SqlQuery {
    let mut q = query_level(rng, schema, graph, true);
    if rng.gen_bool(0.08) {
        let op = *[SetOp::Union, SetOp::Intersect, SetOp::Except].choose(rng).unwrap();
        q.set_op = Some((op, Box::new(query_level(rng, schema, graph, false))));
    }
    q
}

fn query_level(rng: &mut impl Rng, schema: &DatabaseSchema, graph: &SchemaGraph, top: bool) -> SqlQuery {
    let (tables, edges) = pick_tables(rng, graph, if top { 3 } else { 2 });
    let columns: Vec<ColumnId> = schema.columns().map(|(id, _)| id).filter(|id| tables.contains(&id.table)).collect();
    let mut q = SqlQuery::select_all(&schema.table(tables[0]).name);
    q.from = build_from(schema, graph, &tables, &edges);

    let n_items = rng.gen_range(1..=3);
    let mut items = Vec::new();
    for _ in 0..n_items {
        let c = *columns.choose(rng).unwrap();
        let ty = schema.column(c).col_type;
        let agg = match rng.gen_range(0..10) {
            0..=5 => Aggregate::None,
            6 => Aggregate::Count,
            7 if ty.is_numeric() => Aggregate::Sum,
            8 if ty.is_numeric() => Aggregate::Avg,
            7 => Aggregate::Max,
            _ => Aggregate::Min,
        };
        let distinct = agg == Aggregate::Count && rng.gen_bool(0.3);
        let unit = if agg == Aggregate::Count && !distinct && rng.gen_bool(0.5) {
            ValueUnit { agg, distinct: false, column: ColumnRef::star() }
        } else {
            ValueUnit { agg, distinct, column: col(schema, c) }
        };
        if !items.contains(&unit) {
            items.push(unit);
        }
    }
    q.select = Select { distinct: rng.gen_bool(0.1), items };

    let mut preds = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let c = *columns.choose(rng).unwrap();
        preds.push(predicate(rng, schema, c));
    }
    if top && rng.gen_bool(0.12) {
        let outer = *columns.choose(rng).unwrap();
        let mut inner = query_level(rng, schema, graph, false);
        let inner_cols: Vec<ColumnId> = schema
            .columns()
            .map(|(id, _)| id)
            .filter(|id| inner.from.tables.iter().any(|t| t.name == schema.table(id.table).name))
            .collect();
        inner.select = Select { distinct: false, items: vec![ValueUnit::column(col(schema, *inner_cols.choose(rng).unwrap()))] };
        inner.group_by.clear();
        inner.having = None;
        inner.order_by.clear();
        inner.limit = None;
        let op = if rng.gen_bool(0.5) { CmpOp::In } else { CmpOp::NotIn };
        preds.push(Condition::Predicate(Predicate {
            left: ValueUnit::column(col(schema, outer)),
            op,
            right: Operand::Subquery(Box::new(inner)),
        }));
    }
    q.where_clause = match preds.len() {
        0 => None,
        1 => preds.pop(),
        _ if rng.gen_bool(0.7) => Condition::and(preds),
        _ => Condition::or(preds),
    };

    let plain: Vec<ColumnRef> = q
        .select
        .items
        .iter()
        .filter(|u| u.agg == Aggregate::None)
        .map(|u| u.column.clone())
        .collect();
    let has_agg = q.select.items.iter().any(|u| u.agg != Aggregate::None);
    if has_agg && !plain.is_empty() {
        q.group_by = plain.clone();
        if rng.gen_bool(0.25) {
            q.having = Some(Condition::Predicate(Predicate {
                left: ValueUnit { agg: Aggregate::Count, distinct: false, column: ColumnRef::star() },
                op: *[CmpOp::Gt, CmpOp::Ge, CmpOp::Eq].choose(rng).unwrap(),
                right: Operand::Literal(Literal::Number(rng.gen_range(1..5).to_string())),
            }));
        }
    }
    if top && rng.gen_bool(0.3) {
        let unit = q.select.items.choose(rng).unwrap().clone();
        let direction = if rng.gen_bool(0.5) { Direction::Asc } else { Direction::Desc };
        q.order_by = vec![OrderItem { unit, direction }];
        if rng.gen_bool(0.5) {
            q.limit = Some(rng.gen_range(1..20));
        }
    }
    q
}

fn words(name: &str) -> String {
    name.replace('_', " ").to_lowercase()
}

/// A rough English paraphrase; good enough to exercise linking.
pub fn question_for(q: &SqlQuery) -> String {
    let items: Vec<String> = q
        .select
        .items
        .iter()
        .map(|u| {
            let c = if u.column.is_star() { "records".to_string() } else { words(&u.column.column) };
            match u.agg {
                Aggregate::None => c,
                Aggregate::Count => format!("number of {c}"),
                Aggregate::Sum => format!("total {c}"),
                Aggregate::Avg => format!("average {c}"),
                Aggregate::Min => format!("minimum {c}"),
                Aggregate::Max => format!("maximum {c}"),
            }
        })
        .collect();
    let tables: Vec<String> = q.from.tables.iter().map(|t| words(&t.name)).collect();
    let mut s = format!("What is the {} of each {}", items.join(" and "), tables.join(" and "));
    if let Some(Condition::Predicate(p)) = &q.where_clause {
        if let Operand::Literal(l) = &p.right {
            s.push_str(&format!(" whose {} is {}", words(&p.left.column.column), l.text()));
        }
    }
    s.push('?');
    s
}
