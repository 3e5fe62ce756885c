//! Block storage with ancestry queries and pending-parent tracking.

use std::collections::{BTreeSet, HashMap};

use crate::types::{Block, Digest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inserted {
    /// The block and any pending descendants it unblocked, in insertion order.
    Stored(Vec<Digest>),
    /// The parent is unknown; the block waits for it.
    Pending { missing: Digest },
    AlreadyKnown,
}

#[derive(Debug, Clone)]
pub struct ChainStore {
    blocks: HashMap<Digest, Block>,
    children: HashMap<Digest, Vec<Digest>>,
    pending: HashMap<Digest, Vec<Block>>,
    tips: BTreeSet<Digest>,
    genesis: Digest,
}

impl Default for ChainStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ChainStore {
    pub fn new() -> ChainStore {
        let g = Block::genesis();
        let gd = g.digest();
        let mut blocks = HashMap::new();
        blocks.insert(gd, g);
        ChainStore {
            blocks,
            children: HashMap::new(),
            pending: HashMap::new(),
            tips: BTreeSet::from([gd]),
            genesis: gd,
        }
    }

    pub fn genesis(&self) -> &Block {
        &self.blocks[&self.genesis]
    }

    pub fn get(&self, d: &Digest) -> Option<&Block> {
        self.blocks.get(d)
    }

    pub fn contains(&self, d: &Digest) -> bool {
        self.blocks.contains_key(d)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tips(&self) -> impl Iterator<Item = &Digest> {
        self.tips.iter()
    }

    pub fn children(&self, d: &Digest) -> &[Digest] {
        self.children.get(d).map_or(&[], |v| v.as_slice())
    }

    pub fn is_pending(&self, d: &Digest) -> bool {
        self.pending.values().flatten().any(|b| b.digest() == *d)
    }

    /// Parents that some pending block is waiting for.
    pub fn missing_parents(&self) -> impl Iterator<Item = &Digest> {
        self.pending.keys()
    }

    pub fn insert(&mut self, block: Block) -> Inserted {
        let d = block.digest();
        if self.blocks.contains_key(&d) {
            return Inserted::AlreadyKnown;
        }
        if block.is_genesis() {
            // A foreign height-0 block can never be linked.
            return Inserted::Pending {
                missing: block.parent(),
            };
        }
        match self.blocks.get(&block.parent()) {
            None => {
                let missing = block.parent();
                let list = self.pending.entry(missing).or_default();
                if !list.iter().any(|b| b.digest() == d) {
                    list.push(block);
                }
                Inserted::Pending { missing }
            }
            Some(p) if p.height() + 1 != block.height() => Inserted::Pending {
                missing: block.parent(),
            },
            Some(_) => {
                let mut stored = Vec::new();
                let mut work = vec![block];
                while let Some(b) = work.pop() {
                    let bd = b.digest();
                    if self.blocks.contains_key(&bd) {
                        continue;
                    }
                    let parent = b.parent();
                    if self.blocks[&parent].height() + 1 != b.height() {
                        continue;
                    }
                    self.tips.remove(&parent);
                    self.tips.insert(bd);
                    self.children.entry(parent).or_default().push(bd);
                    self.blocks.insert(bd, b);
                    stored.push(bd);
                    if let Some(waiting) = self.pending.remove(&bd) {
                        work.extend(waiting);
                    }
                }
                Inserted::Stored(stored)
            }
        }
    }

    /// True iff `b` is `a` or an ancestor of `a`. Unknown blocks extend nothing.
    pub fn extends(&self, a: &Digest, b: &Digest) -> bool {
        let Some(target) = self.blocks.get(b) else {
            return false;
        };
        let mut cur = match self.blocks.get(a) {
            Some(x) => x,
            None => return false,
        };
        while cur.height() > target.height() {
            cur = match self.blocks.get(&cur.parent()) {
                Some(p) => p,
                None => return false,
            };
        }
        cur.digest() == *b
    }

    pub fn conflicts(&self, a: &Digest, b: &Digest) -> bool {
        !self.extends(a, b) && !self.extends(b, a)
    }

    /// Ancestor of `d` at `height`, if `d` is known and tall enough.
    pub fn ancestor_at(&self, d: &Digest, height: u64) -> Option<&Block> {
        let mut cur = self.blocks.get(d)?;
        if cur.height() < height {
            return None;
        }
        while cur.height() > height {
            cur = self.blocks.get(&cur.parent())?;
        }
        Some(cur)
    }

    /// Blocks on the chain ending at `tip` with height greater than
    /// `above`, in ascending height order.
    pub fn ancestors_after(&self, tip: &Digest, above: u64) -> Vec<Block> {
        let mut out = Vec::new();
        let mut cur = self.blocks.get(tip);
        while let Some(b) = cur {
            if b.height() <= above {
                break;
            }
            out.push(b.clone());
            cur = self.blocks.get(&b.parent());
        }
        out.reverse();
        out
    }

    /// Chain from `want` back to (excluding) the first block that is
    /// `frontier` or genesis, ascending. Empty if `want` is unknown.
    pub fn chain_for_sync(&self, want: &Digest, frontier: &Digest) -> Vec<Block> {
        let mut out = Vec::new();
        let mut cur = self.blocks.get(want);
        while let Some(b) = cur {
            if b.digest() == *frontier || b.is_genesis() {
                break;
            }
            out.push(b.clone());
            cur = self.blocks.get(&b.parent());
        }
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NodeId;

    fn child(p: &Block, tag: u8) -> Block {
        Block::new(
            p.height() + 1,
            p.digest(),
            vec![vec![tag]],
            NodeId(0),
            1,
            3 + p.height(),
            None,
        )
    }

    #[test]
    fn pending_blocks_attach_when_parent_arrives() {
        let mut s = ChainStore::new();
        let g = Block::genesis();
        let a = child(&g, 1);
        let b = child(&a, 2);
        assert_eq!(
            s.insert(b.clone()),
            Inserted::Pending {
                missing: a.digest()
            }
        );
        assert!(s.is_pending(&b.digest()));
        assert_eq!(
            s.insert(a.clone()),
            Inserted::Stored(vec![a.digest(), b.digest()])
        );
        assert!(s.extends(&b.digest(), &g.digest()));
        assert_eq!(s.tips().copied().collect::<Vec<_>>(), vec![b.digest()]);
    }

    #[test]
    fn forks_conflict() {
        let mut s = ChainStore::new();
        let g = Block::genesis();
        let a = child(&g, 1);
        let b = child(&g, 2);
        s.insert(a.clone());
        s.insert(b.clone());
        assert!(s.conflicts(&a.digest(), &b.digest()));
        assert!(!s.conflicts(&a.digest(), &g.digest()));
        assert_eq!(s.tips().count(), 2);
    }

    #[test]
    fn sync_chain_stops_at_frontier() {
        let mut s = ChainStore::new();
        let g = Block::genesis();
        let a = child(&g, 1);
        let b = child(&a, 2);
        let c = child(&b, 3);
        for x in [&a, &b, &c] {
            s.insert(x.clone());
        }
        let got: Vec<_> = s
            .chain_for_sync(&c.digest(), &a.digest())
            .iter()
            .map(|x| x.height())
            .collect();
        assert_eq!(got, vec![2, 3]);
        assert_eq!(s.ancestors_after(&c.digest(), 1).len(), 2);
    }
}
