use std::collections::{HashMap, HashSet};

use super::trie::PrefixTrie;
use super::vocab::{TokenId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cursor {
    Inactive,
    AtNode(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    pub tokens: Vec<TokenId>,
    pub cursor: Cursor,
    /// Inside a quoted literal whose words are not constrained.
    pub in_literal: bool,
    pub score: f64,
}

impl Default for DecodeState {
    fn default() -> Self {
        Self::new()
    }
}

impl DecodeState {
    pub fn new() -> Self {
        Self { tokens: Vec::new(), cursor: Cursor::Inactive, in_literal: false, score: 0.0 }
    }
}

/// The trie plus the token classes that may appear between identifier runs.
#[derive(Clone, Copy)]
pub struct Lexicon<'a> {
    pub trie: &'a PrefixTrie,
    pub vocab: &'a Vocabulary,
    /// Quoted literals must follow the trie (they are values stored in it)
    /// instead of being decoded freely.
    pub value_mode: bool,
}

/// A lazily evaluated allowed-token set. Membership is a constant number of
/// hash probes regardless of schema size.
#[derive(Clone, Copy)]
pub enum AllowedTokens<'a> {
    All { vocab_size: usize },
    AllExcept { vocab_size: usize, excluded: TokenId },
    Children(&'a HashMap<TokenId, u32>),
    Open {
        children: &'a HashMap<TokenId, u32>,
        keywords: &'a HashSet<TokenId>,
        numbers: &'a HashSet<TokenId>,
        eos: TokenId,
        quote: Option<TokenId>,
    },
}

impl AllowedTokens<'_> {
    pub fn contains(&self, id: TokenId) -> bool {
        match *self {
            AllowedTokens::All { vocab_size } => (id as usize) < vocab_size,
            AllowedTokens::AllExcept { vocab_size, excluded } => (id as usize) < vocab_size && id != excluded,
            AllowedTokens::Children(c) => c.contains_key(&id),
            AllowedTokens::Open { children, keywords, numbers, eos, quote } => {
                id == eos
                    || quote == Some(id)
                    || keywords.contains(&id)
                    || numbers.contains(&id)
                    || children.contains_key(&id)
            }
        }
    }

    /// Materialized, ascending.
    pub fn to_vec(&self) -> Vec<TokenId> {
        let mut v: Vec<TokenId> = match *self {
            AllowedTokens::All { vocab_size } => return (0..vocab_size as TokenId).collect(),
            AllowedTokens::AllExcept { vocab_size, excluded } => {
                return (0..vocab_size as TokenId).filter(|&i| i != excluded).collect()
            }
            AllowedTokens::Children(c) => c.keys().copied().collect(),
            AllowedTokens::Open { children, keywords, numbers, eos, quote } => {
                let mut v: Vec<TokenId> = children.keys().chain(keywords).chain(numbers).copied().collect();
                v.push(eos);
                v.extend(quote);
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl<'a> Lexicon<'a> {
    pub fn new(trie: &'a PrefixTrie, vocab: &'a Vocabulary, value_mode: bool) -> Self {
        Self { trie, vocab, value_mode }
    }

    fn open(&self, children: &'a HashMap<TokenId, u32>) -> AllowedTokens<'a> {
        AllowedTokens::Open {
            children,
            keywords: self.vocab.keywords(),
            numbers: self.vocab.numbers(),
            eos: self.vocab.eos(),
            quote: (!self.value_mode).then_some(self.vocab.quote()),
        }
    }

    pub fn allowed_tokens(&self, state: &DecodeState) -> AllowedTokens<'a> {
        if state.in_literal {
            return AllowedTokens::AllExcept { vocab_size: self.vocab.len(), excluded: self.vocab.eos() };
        }
        match state.cursor {
            Cursor::Inactive => self.open(self.trie.children(self.trie.root())),
            Cursor::AtNode(n) if self.trie.is_terminal(n) => self.open(self.trie.children(n)),
            Cursor::AtNode(n) => AllowedTokens::Children(self.trie.children(n)),
        }
    }

    fn is_free(&self, id: TokenId) -> bool {
        self.vocab.is_keyword(id) || self.vocab.is_number(id)
    }

    /// Cursor/literal states reachable by appending `id`. Two successors
    /// when `id` both continues a name and starts something new.
    pub fn successors(&self, state: &DecodeState, id: TokenId) -> Vec<(Cursor, bool)> {
        if state.in_literal {
            return vec![(Cursor::Inactive, id != self.vocab.quote())];
        }
        let mut out = Vec::with_capacity(2);
        let from_inactive = |out: &mut Vec<(Cursor, bool)>| {
            if let Some(n) = self.trie.child(self.trie.root(), id) {
                out.push((Cursor::AtNode(n), false));
            }
            if self.is_free(id) || id == self.vocab.eos() {
                out.push((Cursor::Inactive, false));
            } else if id == self.vocab.quote() && !self.value_mode {
                out.push((Cursor::Inactive, true));
            }
        };
        match state.cursor {
            Cursor::Inactive => from_inactive(&mut out),
            Cursor::AtNode(n) => {
                if let Some(c) = self.trie.child(n, id) {
                    out.push((Cursor::AtNode(c), false));
                }
                if self.trie.is_terminal(n) {
                    if self.is_free(id) || id == self.vocab.eos() {
                        out.push((Cursor::Inactive, false));
                    } else if id == self.vocab.quote() && !self.value_mode {
                        out.push((Cursor::Inactive, true));
                    }
                }
            }
        }
        out
    }
}
