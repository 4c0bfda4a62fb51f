//! JOIN completion: add the tables and join keys that connect every table a
//! query mentions.
//!
//! The connector is a minimum set of tables that contains every mentioned
//! table and induces a connected subgraph of the table-link graph. Schemas
//! with at most [`EXACT_LIMIT`] tables are searched exhaustively; larger ones
//! use a greedy merge of components along shortest paths.

use std::collections::{BTreeSet, VecDeque};

use log::info;
use serde::Serialize;

use crate::schema::{DatabaseSchema, SchemaGraph};
use crate::sql::{level_mentions, ColumnRef, Condition, JoinCondition, Operand, SqlQuery, TableRef};

pub const EXACT_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompleteError {
    #[error("no join path between `{0}` and `{1}`")]
    Disconnected(String, String),
    #[error("tables `{0}` and `{1}` are linked but share no foreign key")]
    MissingJoinKey(String, String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("no terminal tables")]
    NoTerminals,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConnectorMode {
    /// Exact for small schemas, greedy otherwise.
    #[default]
    Auto,
    Exact,
    Greedy,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompletionPlan {
    pub added_tables: Vec<String>,
    pub join_conditions: Vec<JoinCondition>,
    /// One note per added table.
    pub rationale: Vec<String>,
    /// Join-key columns of the added tables, `Table.Column`.
    pub linking_columns: Vec<String>,
}

impl CompletionPlan {
    pub fn is_empty(&self) -> bool {
        self.added_tables.is_empty() && self.join_conditions.is_empty()
    }
}

/// Minimal connected superset of `terminals`, ascending.
pub fn connect_terminals(graph: &SchemaGraph, terminals: &[usize]) -> Result<Vec<usize>, (usize, usize)> {
    connect_terminals_with(graph, terminals, ConnectorMode::Auto)
}

/// Like [`connect_terminals`]; the error names a terminal pair with no
/// path between them.
pub fn connect_terminals_with(
    graph: &SchemaGraph,
    terminals: &[usize],
    mode: ConnectorMode,
) -> Result<Vec<usize>, (usize, usize)> {
    let terms: BTreeSet<usize> = terminals.iter().copied().collect();
    let Some(&first) = terms.iter().next() else {
        return Ok(Vec::new());
    };
    let dist = graph.table_distances(first);
    if let Some(&t) = terms.iter().find(|&&t| dist[t].is_none()) {
        return Err((first, t));
    }
    let exact = match mode {
        ConnectorMode::Auto => graph.table_count() <= EXACT_LIMIT,
        ConnectorMode::Exact => true,
        ConnectorMode::Greedy => false,
    };
    Ok(if exact { exact_connector(graph, &terms) } else { greedy_connector(graph, &terms) })
}

/// Tries extra-table sets by increasing size, each size in lexicographic
/// order, and returns the first that connects the terminals.
fn exact_connector(graph: &SchemaGraph, terms: &BTreeSet<usize>) -> Vec<usize> {
    let others: Vec<usize> = (0..graph.table_count()).filter(|t| !terms.contains(t)).collect();
    for k in 0..=others.len() {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut set: Vec<usize> = terms.iter().copied().chain(idx.iter().map(|&i| others[i])).collect();
            set.sort_unstable();
            if graph.induces_connected(&set) {
                return set;
            }
            // next k-combination of 0..others.len()
            let n = others.len();
            let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    unreachable!("terminals were checked to be connected")
}

/// Shortest path from any table in `from` to any table in `to`, as the
/// tables strictly between them. Sources and neighbours are expanded in
/// ascending order.
fn shortest_bridge(graph: &SchemaGraph, from: &BTreeSet<usize>, to: &BTreeSet<usize>) -> Option<Vec<usize>> {
    let n = graph.table_count();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &s in from {
        seen[s] = true;
        queue.push_back(s);
    }
    while let Some(t) = queue.pop_front() {
        if to.contains(&t) {
            let mut path = Vec::new();
            let mut cur = parent[t];
            while let Some(p) = cur {
                if from.contains(&p) {
                    break;
                }
                path.push(p);
                cur = parent[p];
            }
            path.reverse();
            return Some(path);
        }
        for &nb in graph.table_neighbors(t) {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = Some(t);
                queue.push_back(nb);
            }
        }
    }
    None
}

fn greedy_connector(graph: &SchemaGraph, terms: &BTreeSet<usize>) -> Vec<usize> {
    let mut components: Vec<BTreeSet<usize>> = terms.iter().map(|&t| BTreeSet::from([t])).collect();
    while components.len() > 1 {
        let mut best: Option<(usize, Vec<usize>, usize, usize)> = None;
        for i in 0..components.len() {
            for j in i + 1..components.len() {
                let bridge = shortest_bridge(graph, &components[i], &components[j]).expect("connected");
                let better = match &best {
                    None => true,
                    Some((len, b, _, _)) => bridge.len() < *len || (bridge.len() == *len && {
                        let mut x = bridge.clone();
                        let mut y = b.clone();
                        x.sort_unstable();
                        y.sort_unstable();
                        x < y
                    }),
                };
                if better {
                    best = Some((bridge.len(), bridge, i, j));
                }
            }
        }
        let (_, bridge, i, j) = best.unwrap();
        let merged: BTreeSet<usize> =
            components[i].iter().chain(&components[j]).chain(&bridge).copied().collect();
        components.remove(j);
        components.remove(i);
        // the bridge may run through other components
        let (touching, rest): (Vec<_>, Vec<_>) =
            components.into_iter().partition(|c| c.iter().any(|t| merged.contains(t)));
        let mut merged = merged;
        for c in touching {
            merged.extend(c);
        }
        components = rest;
        components.push(merged);
        components.sort();
    }
    components.pop().unwrap().into_iter().collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Rewrites the FROM clause of every query level so it covers the tables
/// the level mentions, joined by explicit foreign-key conditions. Other
/// clauses are left alone. Levels whose FROM already covers and connects
/// everything are returned unchanged.
pub fn complete_sql(
    q: &SqlQuery,
    schema: &DatabaseSchema,
    graph: &SchemaGraph,
) -> Result<(SqlQuery, CompletionPlan), CompleteError> {
    let mut plan = CompletionPlan::default();
    let out = complete_level(q, schema, graph, &BTreeSet::new(), &mut plan)?;
    Ok((out, plan))
}

fn complete_level(
    q: &SqlQuery,
    schema: &DatabaseSchema,
    graph: &SchemaGraph,
    outer: &BTreeSet<usize>,
    plan: &mut CompletionPlan,
) -> Result<SqlQuery, CompleteError> {
    let index = |name: &str| schema.table_index(name).ok_or_else(|| CompleteError::UnknownTable(name.to_string()));
    let from: Vec<usize> = q.from.tables.iter().map(|t| index(&t.name)).collect::<Result<_, _>>()?;
    let mut out = q.clone();

    let from_set: BTreeSet<usize> = from.iter().copied().collect();
    let self_join = from_set.len() != from.len();
    let (mentioned, _) = level_mentions(q);
    let mut terminals = from_set.clone();
    for name in &mentioned {
        let t = index(name)?;
        // correlated references to an enclosing query stay there
        if !outer.contains(&t) || from_set.contains(&t) {
            terminals.insert(t);
        }
    }
    if terminals.is_empty() {
        return Err(CompleteError::NoTerminals);
    }

    if !self_join && !level_is_complete(q, schema, &from, &terminals) {
        out.from.tables = rebuild_from(q, schema, graph, &from, &terminals, plan)?;
    }

    let scope: BTreeSet<usize> = outer.iter().chain(&terminals).copied().collect();
    if let Some(c) = &q.where_clause {
        out.where_clause = Some(complete_condition(c, schema, graph, &scope, plan)?);
    }
    if let Some(c) = &q.having {
        out.having = Some(complete_condition(c, schema, graph, &scope, plan)?);
    }
    if let Some((op, rhs)) = &q.set_op {
        out.set_op = Some((*op, Box::new(complete_level(rhs, schema, graph, outer, plan)?)));
    }
    Ok(out)
}

fn complete_condition(
    c: &Condition,
    schema: &DatabaseSchema,
    graph: &SchemaGraph,
    outer: &BTreeSet<usize>,
    plan: &mut CompletionPlan,
) -> Result<Condition, CompleteError> {
    Ok(match c {
        Condition::And(v) => Condition::And(
            v.iter().map(|x| complete_condition(x, schema, graph, outer, plan)).collect::<Result<_, _>>()?,
        ),
        Condition::Or(v) => Condition::Or(
            v.iter().map(|x| complete_condition(x, schema, graph, outer, plan)).collect::<Result<_, _>>()?,
        ),
        Condition::Predicate(p) => {
            let mut p = p.clone();
            if let Operand::Subquery(inner) = &p.right {
                p.right = Operand::Subquery(Box::new(complete_level(inner, schema, graph, outer, plan)?));
            }
            Condition::Predicate(p)
        }
    })
}

fn condition_tables(schema: &DatabaseSchema, c: &JoinCondition) -> Option<(usize, usize)> {
    let t = |r: &ColumnRef| r.table.as_deref().and_then(|n| schema.table_index(n));
    Some((t(&c.left)?, t(&c.right)?))
}

fn level_is_complete(q: &SqlQuery, schema: &DatabaseSchema, from: &[usize], terminals: &BTreeSet<usize>) -> bool {
    if terminals.iter().any(|t| !from.contains(t)) {
        return false;
    }
    let mut uf = UnionFind::new(schema.tables().len());
    for c in q.from.conditions() {
        if let Some((a, b)) = condition_tables(schema, c) {
            uf.union(a, b);
        }
    }
    let root = uf.find(from[0]);
    from.iter().all(|&t| uf.find(t) == root)
}

fn rebuild_from(
    q: &SqlQuery,
    schema: &DatabaseSchema,
    graph: &SchemaGraph,
    from: &[usize],
    terminals: &BTreeSet<usize>,
    plan: &mut CompletionPlan,
) -> Result<Vec<TableRef>, CompleteError> {
    let name = |t: usize| schema.table(t).name.clone();
    let terms: Vec<usize> = terminals.iter().copied().collect();
    let connector = connect_terminals(graph, &terms)
        .map_err(|(a, b)| CompleteError::Disconnected(name(a), name(b)))?;
    let inside: BTreeSet<usize> = connector.iter().copied().collect();

    // BFS over the connector from the original base table
    let start = from.first().copied().unwrap_or(connector[0]);
    let mut order = vec![start];
    let mut parent = vec![None; schema.tables().len()];
    let mut seen = BTreeSet::from([start]);
    let mut i = 0;
    while i < order.len() {
        let t = order[i];
        for &n in graph.table_neighbors(t) {
            if inside.contains(&n) && seen.insert(n) {
                parent[n] = Some(t);
                order.push(n);
            }
        }
        i += 1;
    }
    let position = |t: usize| order.iter().position(|&x| x == t);

    let mut tables: Vec<TableRef> = order.iter().map(|&t| TableRef::named(&name(t))).collect();
    let mut uf = UnionFind::new(schema.tables().len());
    for c in q.from.conditions() {
        match condition_tables(schema, c) {
            Some((a, b)) if position(a).is_some() && position(b).is_some() => {
                uf.union(a, b);
                let later = position(a).max(position(b)).unwrap();
                tables[later].on.push(c.clone());
            }
            // a condition on something outside the connector stays with the base
            _ => tables[0].on.push(c.clone()),
        }
    }
    if !tables[0].on.is_empty() && tables.len() > 1 {
        // the base table cannot carry ON; move its conditions to the next entry
        let moved = std::mem::take(&mut tables[0].on);
        tables[1].on.splice(0..0, moved);
    }

    for &t in &order[1..] {
        let p = parent[t].expect("bfs tree");
        if !uf.union(p, t) {
            continue;
        }
        let fks = graph.link_foreign_keys(p, t);
        let Some(&fk_index) = fks.first() else {
            return Err(CompleteError::MissingJoinKey(name(p), name(t)));
        };
        if fks.len() > 1 {
            info!(
                "{} foreign keys link {} and {}; using the first declared",
                fks.len(),
                name(p),
                name(t)
            );
        }
        let fk = &schema.foreign_keys()[fk_index];
        let cond = JoinCondition {
            left: ColumnRef::new(&name(fk.from.table), &schema.column(fk.from).name),
            right: ColumnRef::new(&name(fk.to.table), &schema.column(fk.to).name),
        };
        tables[position(t).unwrap()].on.push(cond.clone());
        plan.join_conditions.push(cond);
        for end in [fk.from, fk.to] {
            if !terminals.contains(&end.table) {
                let q = schema.qualified_name(end);
                if !plan.linking_columns.contains(&q) {
                    plan.linking_columns.push(q);
                }
            }
        }
    }

    for &t in &order {
        if from.contains(&t) {
            continue;
        }
        plan.added_tables.push(name(t));
        plan.rationale.push(rationale(graph, schema, t, &terms, &inside));
    }
    Ok(tables)
}

fn rationale(
    graph: &SchemaGraph,
    schema: &DatabaseSchema,
    added: usize,
    terminals: &[usize],
    inside: &BTreeSet<usize>,
) -> String {
    let within = |src: usize| -> Vec<Option<usize>> {
        let mut dist = vec![None; graph.table_count()];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(t) = queue.pop_front() {
            for &n in graph.table_neighbors(t) {
                if inside.contains(&n) && dist[n].is_none() {
                    dist[n] = Some(dist[t].unwrap() + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    };
    let from_added = within(added);
    for (i, &a) in terminals.iter().enumerate() {
        let da = within(a);
        for &b in &terminals[i + 1..] {
            if let (Some(ab), Some(at), Some(tb)) = (da[b], da[added], from_added[b]) {
                if at + tb == ab {
                    return format!(
                        "{} lies on the join path between {} and {}",
                        schema.table(added).name,
                        schema.table(a).name,
                        schema.table(b).name
                    );
                }
            }
        }
    }
    format!("{} connects the mentioned tables", schema.table(added).name)
}
