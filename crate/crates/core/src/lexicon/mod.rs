//! ESG taxonomy, keyword lexicon and message classification.
//!
//! A lexicon file has a `term,node` header; `node` names one of the ten
//! subcategories (table label or identifier, case-insensitive). Terms are
//! tokenized with [`tokenize`] on load, so `"Oil Spill"` and `"oil-spill"`
//! are the same two-token term.

mod taxonomy;
mod tokenize;
mod trie;

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

pub use taxonomy::{expand_to_ancestors, Level, NodeSet, TaxonomyNode, UnknownNode};
pub use tokenize::tokenize;
pub use trie::{PhraseTrie, MAX_PHRASE_TOKENS};

use crate::error::{Error, Result};
use crate::ingest::{Message, Table};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LexiconEntry {
    pub term: Vec<String>,
    pub node: TaxonomyNode,
}

impl LexiconEntry {
    /// Tokenizes `term` and checks it against the entry invariants.
    pub fn new(term: &str, node: TaxonomyNode) -> std::result::Result<Self, String> {
        let tokens = tokenize(term);
        if tokens.is_empty() {
            return Err(format!("term {term:?} has no tokens"));
        }
        if tokens.len() > MAX_PHRASE_TOKENS {
            return Err(format!(
                "term {term:?} has {} tokens (max {MAX_PHRASE_TOKENS})",
                tokens.len()
            ));
        }
        if !node.is_subcategory() {
            return Err(format!("term {term:?} maps to {node}, which is not a subcategory"));
        }
        Ok(LexiconEntry { term: tokens, node })
    }
}

/// One lexicon hit inside a message.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermMatch {
    /// Token offset of the first matched token.
    pub position: usize,
    pub term: Vec<String>,
    pub node: TaxonomyNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedMessage {
    pub id: String,
    /// Matched subcategories only; see [`NodeSet::with_ancestors`].
    pub nodes: NodeSet,
    pub matched_terms: Vec<TermMatch>,
}

/// A validated, immutable ESG keyword lexicon.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    trie: PhraseTrie<usize>,
}

impl Lexicon {
    /// Build from entries. Duplicate `(term, node)` pairs collapse to one.
    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Result<Self> {
        let unique: BTreeSet<LexiconEntry> = entries.into_iter().collect();
        let entries: Vec<LexiconEntry> = unique.into_iter().collect();
        for e in &entries {
            if e.term.is_empty() || e.term.len() > MAX_PHRASE_TOKENS || !e.node.is_subcategory() {
                return Err(Error::Data(format!("invalid lexicon entry {e:?}")));
            }
        }
        let mut trie = PhraseTrie::new();
        for (i, e) in entries.iter().enumerate() {
            trie.insert(&e.term, i);
        }
        Ok(Lexicon { entries, trie })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(Table::open_with(path, true)?)
    }

    pub fn load_from<R: Read>(reader: R, source: &str) -> Result<Self> {
        Self::parse(Table::from_reader_with(reader, source, true)?)
    }

    fn parse<R: Read>(mut table: Table<R>) -> Result<Self> {
        if table.is_empty_file() {
            return Self::from_entries([]);
        }
        let c_term = table.column("term")?;
        let c_node = table.column("node")?;
        let source = table.source().to_string();
        let mut entries = Vec::new();
        for item in table.records() {
            let (line, rec) = item?;
            let bad = |msg: String| Error::Data(format!("{source}:{line}: {msg}"));
            let term = rec.get(c_term).unwrap_or("");
            let node: TaxonomyNode = rec
                .get(c_node)
                .unwrap_or("")
                .parse()
                .map_err(|e: UnknownNode| bad(e.to_string()))?;
            entries.push(LexiconEntry::new(term, node).map_err(bad)?);
        }
        let n = entries.len();
        let lex = Self::from_entries(entries)?;
        if lex.len() < n {
            log::warn!("{source}: {} duplicate lexicon rows ignored", n - lex.len());
        }
        Ok(lex)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Match an already tokenized text. Term matches come back sorted by
    /// position, then term, then node.
    pub fn classify_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> (NodeSet, Vec<TermMatch>) {
        let mut nodes = NodeSet::EMPTY;
        let mut matches = Vec::new();
        self.trie.for_each_match(tokens, |start, _len, &i| {
            let e = &self.entries[i];
            nodes.insert(e.node);
            matches.push(TermMatch {
                position: start,
                term: e.term.clone(),
                node: e.node,
            });
        });
        matches.sort();
        (nodes, matches)
    }

    pub fn classify(&self, message: &Message) -> ClassifiedMessage {
        let tokens = tokenize(&message.text);
        let (nodes, matched_terms) = self.classify_tokens(&tokens);
        ClassifiedMessage {
            id: message.id.clone(),
            nodes,
            matched_terms,
        }
    }
}

/// Free-function form of [`Lexicon::classify`].
pub fn classify(message: &Message, lexicon: &Lexicon) -> ClassifiedMessage {
    lexicon.classify(message)
}
