use std::collections::HashMap;

use serde::Serialize;

use super::vocab::{sql_surface_tokens, TokenId, Vocabulary, QUOTE};
use super::DecodeError;
use crate::schema::{ColumnId, DatabaseSchema};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum SchemaItem {
    Table(usize),
    Column(ColumnId),
    Star,
    Value { column: ColumnId, value: String },
}

#[derive(Clone, Debug, Default)]
struct Node {
    children: HashMap<TokenId, u32>,
    item: Option<SchemaItem>,
}

/// Trie over schema surface forms keyed by vocabulary ids.
///
/// Immutable after construction; share it between decoding sessions by
/// reference.
#[derive(Clone, Debug)]
pub struct PrefixTrie {
    nodes: Vec<Node>,
    terminals: usize,
}

pub const ROOT: u32 = 0;

impl PrefixTrie {
    /// Tables, `Table.Column` and `*`; in value mode also every attached
    /// value as a quoted literal.
    pub fn build(schema: &DatabaseSchema, vocab: &Vocabulary, value_mode: bool) -> Result<Self, DecodeError> {
        let mut entries: Vec<(String, SchemaItem)> = Vec::new();
        for (i, t) in schema.tables().iter().enumerate() {
            entries.push((t.name.clone(), SchemaItem::Table(i)));
        }
        for (id, col) in schema.columns() {
            entries.push((schema.qualified_name(id), SchemaItem::Column(id)));
            if value_mode {
                for v in col.sample_values.iter().flatten() {
                    let words: Vec<&str> = v.split_whitespace().collect();
                    let surface = format!("{QUOTE}{}{QUOTE}", words.join(" ").replace('\'', "''"));
                    entries.push((surface, SchemaItem::Value { column: id, value: v.clone() }));
                }
            }
        }
        entries.push(("*".to_string(), SchemaItem::Star));
        Self::from_entries(entries, vocab)
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, SchemaItem)>,
        vocab: &Vocabulary,
    ) -> Result<Self, DecodeError> {
        let mut trie = PrefixTrie { nodes: vec![Node::default()], terminals: 0 };
        for (surface, item) in entries {
            let pieces = sql_surface_tokens(&surface);
            if pieces.is_empty() {
                return Err(DecodeError::Untokenizable(surface));
            }
            let ids = vocab
                .encode_tokens(&pieces)
                .map_err(|_| DecodeError::Untokenizable(surface.clone()))?;
            trie.insert(&ids, item);
        }
        Ok(trie)
    }

    fn insert(&mut self, ids: &[TokenId], item: SchemaItem) {
        let mut node = ROOT;
        for &id in ids {
            node = match self.nodes[node as usize].children.get(&id) {
                Some(&n) => n,
                None => {
                    let n = self.nodes.len() as u32;
                    self.nodes.push(Node::default());
                    self.nodes[node as usize].children.insert(id, n);
                    n
                }
            };
        }
        let slot = &mut self.nodes[node as usize].item;
        if slot.is_none() {
            *slot = Some(item);
            self.terminals += 1;
        }
    }

    pub fn root(&self) -> u32 {
        ROOT
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals
    }

    pub fn child(&self, node: u32, id: TokenId) -> Option<u32> {
        self.nodes[node as usize].children.get(&id).copied()
    }

    pub fn children(&self, node: u32) -> &HashMap<TokenId, u32> {
        &self.nodes[node as usize].children
    }

    pub fn is_terminal(&self, node: u32) -> bool {
        self.nodes[node as usize].item.is_some()
    }

    pub fn item(&self, node: u32) -> Option<&SchemaItem> {
        self.nodes[node as usize].item.as_ref()
    }

    /// Follows `ids` from the root.
    pub fn walk(&self, ids: &[TokenId]) -> Option<u32> {
        ids.iter().try_fold(ROOT, |n, &id| self.child(n, id))
    }

    /// Every root-to-terminal path with its payload, in depth-first order
    /// with children visited by ascending id.
    pub fn terminal_paths(&self) -> Vec<(Vec<TokenId>, &SchemaItem)> {
        let mut out = Vec::new();
        let mut stack = vec![(ROOT, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if let Some(item) = self.item(node) {
                out.push((path.clone(), item));
            }
            let mut kids: Vec<_> = self.children(node).iter().collect();
            kids.sort_unstable_by(|a, b| b.0.cmp(a.0));
            for (&id, &child) in kids {
                let mut p = path.clone();
                p.push(id);
                stack.push((child, p));
            }
        }
        out
    }
}
