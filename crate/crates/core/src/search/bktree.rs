use serde::{Deserialize, Serialize};

use super::levenshtein::levenshtein;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Node {
    item: u32,
    /// (distance to this node's item, child node index), sorted by distance.
    children: Vec<(u32, u32)>,
}

/// Burkhard–Keller tree over Levenshtein distance. Items are indices into
/// a key table owned by the caller, which must pass the same table to every
/// call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BkTree {
    nodes: Vec<Node>,
}

impl BkTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn insert(&mut self, item: u32, keys: &[Vec<char>]) {
        let new = self.nodes.len() as u32;
        if self.nodes.is_empty() {
            self.nodes.push(Node { item, children: Vec::new() });
            return;
        }
        let key = &keys[item as usize];
        let mut at = 0usize;
        loop {
            let distance = levenshtein(key, &keys[self.nodes[at].item as usize]) as u32;
            let node = &mut self.nodes[at];
            match node.children.binary_search_by_key(&distance, |&(d, _)| d) {
                Ok(pos) => at = node.children[pos].1 as usize,
                Err(pos) => {
                    node.children.insert(pos, (distance, new));
                    self.nodes.push(Node { item, children: Vec::new() });
                    return;
                }
            }
        }
    }

    /// Every item within `max_distance` of `query`, with its distance, in
    /// no particular order.
    pub fn find(
        &self,
        query: &[char],
        max_distance: usize,
        keys: &[Vec<char>],
    ) -> Vec<(u32, usize)> {
        let mut found = Vec::new();
        if self.nodes.is_empty() {
            return found;
        }
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            let node = &self.nodes[at];
            let distance = levenshtein(query, &keys[node.item as usize]);
            if distance <= max_distance {
                found.push((node.item, distance));
            }
            let low = distance.saturating_sub(max_distance) as u32;
            let high = (distance + max_distance) as u32;
            for &(d, child) in &node.children {
                if d > high {
                    break;
                }
                if d >= low {
                    stack.push(child as usize);
                }
            }
        }
        found
    }
}
