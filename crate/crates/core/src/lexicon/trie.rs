use std::collections::HashMap;

/// Longest phrase length, in tokens, accepted by the lexicons.
pub const MAX_PHRASE_TOKENS: usize = 5;

/// A trie keyed by whole tokens, used to find every lexicon phrase occurring
/// as a contiguous run of tokens. Matching costs at most
/// `MAX_PHRASE_TOKENS` lookups per input token.
#[derive(Debug, Clone)]
pub struct PhraseTrie<V> {
    nodes: Vec<TrieNode<V>>,
}

#[derive(Debug, Clone)]
struct TrieNode<V> {
    children: HashMap<String, usize>,
    values: Vec<V>,
}

impl<V> TrieNode<V> {
    fn new() -> Self {
        TrieNode {
            children: HashMap::new(),
            values: Vec::new(),
        }
    }
}

impl<V> Default for PhraseTrie<V> {
    fn default() -> Self {
        PhraseTrie {
            nodes: vec![TrieNode::new()],
        }
    }
}

impl<V> PhraseTrie<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phrase: &[String], value: V) {
        let mut at = 0;
        for tok in phrase {
            at = match self.nodes[at].children.get(tok.as_str()) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(TrieNode::new());
                    self.nodes[at].children.insert(tok.clone(), next);
                    next
                }
            };
        }
        self.nodes[at].values.push(value);
    }

    /// Calls `f(start, len, value)` for every phrase occurrence, in order of
    /// start position then phrase length.
    pub fn for_each_match<S, F>(&self, tokens: &[S], mut f: F)
    where
        S: AsRef<str>,
        F: FnMut(usize, usize, &V),
    {
        for start in 0..tokens.len() {
            let mut at = 0;
            for (offset, tok) in tokens[start..].iter().take(MAX_PHRASE_TOKENS).enumerate() {
                match self.nodes[at].children.get(tok.as_ref()) {
                    Some(&next) => at = next,
                    None => break,
                }
                for v in &self.nodes[at].values {
                    f(start, offset + 1, v);
                }
            }
        }
    }
}
