use std::collections::{BTreeMap, VecDeque};

use super::{ColumnId, DatabaseSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Table(usize),
    Column(ColumnId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Column to the table that owns it.
    Affiliation,
    /// Referencing column to referenced column.
    ForeignKey,
    /// Table to table, present when any foreign key joins their columns.
    TableLink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphEdge {
    pub kind: EdgeKind,
    pub a: NodeId,
    pub b: NodeId,
}

/// Undirected graph over tables and columns. The `*` pseudo-column is not a
/// node. Self-referencing foreign keys add a column edge but no table loop.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemaGraph {
    table_count: usize,
    nodes: Vec<NodeId>,
    edges: Vec<GraphEdge>,
    /// Sorted neighbour lists over the table-link relation.
    table_adj: Vec<Vec<usize>>,
    /// Foreign key indices per unordered table pair `(lo, hi)`, in declaration order.
    links: BTreeMap<(usize, usize), Vec<usize>>,
}

impl SchemaGraph {
    pub fn build(schema: &DatabaseSchema) -> Self {
        let table_count = schema.tables().len();
        let mut nodes: Vec<NodeId> = (0..table_count).map(NodeId::Table).collect();
        let mut edges = Vec::new();
        for (id, _) in schema.columns() {
            nodes.push(NodeId::Column(id));
            edges.push(GraphEdge {
                kind: EdgeKind::Affiliation,
                a: NodeId::Column(id),
                b: NodeId::Table(id.table),
            });
        }
        let mut links: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, fk) in schema.foreign_keys().iter().enumerate() {
            edges.push(GraphEdge {
                kind: EdgeKind::ForeignKey,
                a: NodeId::Column(fk.from),
                b: NodeId::Column(fk.to),
            });
            let (x, y) = (fk.from.table, fk.to.table);
            if x != y {
                links.entry((x.min(y), x.max(y))).or_default().push(i);
            }
        }
        let mut table_adj = vec![Vec::new(); table_count];
        for &(lo, hi) in links.keys() {
            edges.push(GraphEdge { kind: EdgeKind::TableLink, a: NodeId::Table(lo), b: NodeId::Table(hi) });
            table_adj[lo].push(hi);
            table_adj[hi].push(lo);
        }
        for adj in &mut table_adj {
            adj.sort_unstable();
        }
        Self { table_count, nodes, edges, table_adj, links }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn table_count(&self) -> usize {
        self.table_count
    }

    pub fn table_neighbors(&self, table: usize) -> &[usize] {
        &self.table_adj[table]
    }

    /// Unordered table pairs joined by at least one foreign key, ascending.
    pub fn table_links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.keys().copied()
    }

    /// Indices into `schema.foreign_keys()` that link `a` and `b`.
    pub fn link_foreign_keys(&self, a: usize, b: usize) -> &[usize] {
        self.links.get(&(a.min(b), a.max(b))).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tables_connected(&self, a: usize, b: usize) -> bool {
        self.table_distances(a)[b].is_some()
    }

    /// BFS hop counts from `source` over table links.
    pub fn table_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.table_count];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(t) = queue.pop_front() {
            let d = dist[t].unwrap();
            for &n in &self.table_adj[t] {
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// True when `tables` induce a connected subgraph of the table-link graph.
    pub fn induces_connected(&self, tables: &[usize]) -> bool {
        let Some(&start) = tables.first() else {
            return true;
        };
        let mut inside = vec![false; self.table_count];
        for &t in tables {
            inside[t] = true;
        }
        let mut seen = vec![false; self.table_count];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(t) = stack.pop() {
            for &n in &self.table_adj[t] {
                if inside[n] && !seen[n] {
                    seen[n] = true;
                    count += 1;
                    stack.push(n);
                }
            }
        }
        let distinct = inside.iter().filter(|&&x| x).count();
        count == distinct
    }
}
