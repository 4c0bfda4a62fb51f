//! Helpers shared by the integration tests. Everything that computes an
//! expected value here does so without calling the code under test.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use sqlmark::decode::{Cursor, DecodeState, Lexicon, TokenId};
use sqlmark::schema::{ColumnType, DatabaseSchema, SchemaBuilder};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_schemas() -> Vec<DatabaseSchema> {
    sqlmark::pipeline::load_schemas(&fixtures().join("tables.json"), Some(&fixtures().join("content.json"))).unwrap()
}

pub fn fixture(db_id: &str) -> DatabaseSchema {
    fixture_schemas().into_iter().find(|s| s.db_id == db_id).unwrap()
}

/// A schema with `n` tables `T0..` and one foreign key per edge `(a, b)`,
/// written as a column `r<k>` of `Ta` referencing `Tb.id`.
pub fn graph_schema(n: usize, edges: &[(usize, usize)]) -> DatabaseSchema {
    let mut cols: Vec<Vec<String>> = (0..n).map(|_| vec!["id".to_string(), "name".to_string()]).collect();
    let mut fks = Vec::new();
    for (k, &(a, b)) in edges.iter().enumerate() {
        let c = format!("r{k}");
        cols[a].push(c.clone());
        fks.push((format!("T{a}.{c}"), format!("T{b}.id")));
    }
    let mut b = SchemaBuilder::new("g");
    for (t, cs) in cols.iter().enumerate() {
        let typed: Vec<(&str, ColumnType)> =
            cs.iter().map(|c| (c.as_str(), if c == "name" { ColumnType::Text } else { ColumnType::Integer })).collect();
        b = b.table(&format!("T{t}"), &typed).primary_key("id");
    }
    for (from, to) in &fks {
        b = b.foreign_key(from, to);
    }
    b.build().unwrap()
}

/// Random graph over at most `max_n` tables: a random forest (so some
/// graphs are disconnected) plus a few extra edges, self-loops excluded.
pub fn random_graph(rng: &mut impl Rng, max_n: usize) -> (usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(2..=max_n);
    let mut edges = Vec::new();
    for t in 1..n {
        if rng.gen_bool(0.85) {
            edges.push((t, rng.gen_range(0..t)));
        }
    }
    for _ in 0..rng.gen_range(0..=n / 2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    (n, edges)
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn mask_connected(adj: &[Vec<usize>], mask: u32) -> bool {
    let Some(start) = (0..adj.len()).find(|&t| mask >> t & 1 == 1) else {
        return true;
    };
    let mut seen = 1u32 << start;
    let mut queue = VecDeque::from([start]);
    while let Some(t) = queue.pop_front() {
        for &u in &adj[t] {
            if mask >> u & 1 == 1 && seen >> u & 1 == 0 {
                seen |= 1 << u;
                queue.push_back(u);
            }
        }
    }
    seen == mask
}

/// Exhaustive minimal connector: of all table subsets that contain the
/// terminals and induce a connected subgraph, the smallest, ties going to
/// the lexicographically smallest list of extra tables. `None` when no
/// subset connects them.
pub fn brute_force_connector(n: usize, edges: &[(usize, usize)], terminals: &[usize]) -> Option<Vec<usize>> {
    let adj = adjacency(n, edges);
    let term_mask: u32 = terminals.iter().map(|&t| 1u32 << t).sum();
    let mut best: Option<(u32, Vec<usize>)> = None;
    for mask in 0u32..(1 << n) {
        if mask & term_mask != term_mask || !mask_connected(&adj, mask) {
            continue;
        }
        let extras: Vec<usize> = (0..n).filter(|&t| mask >> t & 1 == 1 && term_mask >> t & 1 == 0).collect();
        let better = match &best {
            None => true,
            Some((m, e)) => mask.count_ones() < m.count_ones() || (mask.count_ones() == m.count_ones() && extras < *e),
        };
        if better {
            best = Some((mask, extras));
        }
    }
    best.map(|(mask, _)| (0..n).filter(|&t| mask >> t & 1 == 1).collect())
}

/// Reachability by repeated relaxation over the raw edge list.
pub fn closure_connected(n: usize, edges: &[(usize, usize)], a: usize, b: usize) -> bool {
    let mut reach = vec![false; n];
    reach[a] = true;
    loop {
        let mut changed = false;
        for &(x, y) in edges {
            if reach[x] != reach[y] {
                reach[x] = true;
                reach[y] = true;
                changed = true;
            }
        }
        if !changed {
            return reach[b];
        }
    }
}

/// Every subset of `0..n` with between 1 and `k` elements.
pub fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|&t| m >> t & 1 == 1).collect())
        .collect()
}

/// Samples one sequence by picking uniformly among the allowed tokens at
/// each step. After `soft_len` steps it steers towards a finish: closing
/// literals, completing names and taking EOS as soon as it is allowed.
/// Returns the tokens (without EOS) and the number of steps taken.
pub fn random_walk(rng: &mut impl Rng, lexicon: &Lexicon<'_>, soft_len: usize) -> (Vec<TokenId>, usize) {
    let eos = lexicon.vocab.eos();
    let quote = lexicon.vocab.quote();
    let mut state = DecodeState::new();
    let mut steps = 0;
    loop {
        let allowed = lexicon.allowed_tokens(&state).to_vec();
        assert!(!allowed.is_empty(), "dead end after {:?}", state.tokens);
        let pick = if steps < soft_len {
            *allowed.choose(rng).unwrap()
        } else if allowed.contains(&eos) {
            eos
        } else if state.in_literal {
            quote
        } else {
            *allowed.choose(rng).unwrap()
        };
        steps += 1;
        if pick == eos {
            return (state.tokens, steps);
        }
        let succ = lexicon.successors(&state, pick);
        assert!(!succ.is_empty(), "allowed token {pick} has no successor");
        let (cursor, in_literal) = *succ.choose(rng).unwrap();
        state.tokens.push(pick);
        state.cursor = cursor;
        state.in_literal = in_literal;
        assert!(steps < soft_len + 10_000, "walk does not terminate");
    }
}

pub fn is_at_node(c: Cursor) -> bool {
    matches!(c, Cursor::AtNode(_))
}

/// `SELECT <col> FROM <table> WHERE c1 AND c2 ...` in the given conjunct
/// order.
pub fn conjunctive_query(table: &str, select: &str, conjuncts: &[String]) -> String {
    format!("SELECT {table}.{select} FROM {table} WHERE {}", conjuncts.join(" AND "))
}

/// A handful of comparison predicates over distinct columns of one table.
pub fn random_conjuncts(rng: &mut impl Rng, schema: &DatabaseSchema, table: usize) -> Vec<String> {
    let t = schema.table(table);
    let mut cols: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
    cols.shuffle(rng);
    let k = rng.gen_range(2..=cols.len().min(4));
    let ops = ["=", "!=", "<", ">", "<=", ">="];
    cols[..k]
        .iter()
        .map(|c| {
            let lit = if rng.gen_bool(0.5) { rng.gen_range(0..1000).to_string() } else { format!("'v{}'", rng.gen_range(0..50)) };
            format!("{}.{c} {} {lit}", t.name, ops.choose(rng).unwrap())
        })
        .collect()
}

pub fn distinct<T: Ord + Clone>(xs: &[T]) -> BTreeSet<T> {
    xs.iter().cloned().collect()
}
