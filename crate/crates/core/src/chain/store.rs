use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Balances, Block, BlockRef, Branch, ChainId, Digest, Entry, TxnId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("chain {chain}: replica count must be at least 1")]
    ZeroReplicas { chain: ChainId },
    #[error("chain {chain}: unknown branch {}", branch.0)]
    UnknownBranch { chain: ChainId, branch: Branch },
    #[error("chain {chain}: branch {} is dead", branch.0)]
    DeadBranch { chain: ChainId, branch: Branch },
    #[error("chain {chain}: no parent block at height {height} on branch {}", branch.0)]
    MissingParent { chain: ChainId, branch: Branch, height: u32 },
    #[error("chain {chain}: cannot fork at height {height}, canonical tip is at {tip}")]
    ForkBeyondTip { chain: ChainId, height: u32, tip: u32 },
    #[error("chain {chain}: cannot fork at the genesis block")]
    ForkAtGenesis { chain: ChainId },
    #[error("unknown block {0}")]
    UnknownBlock(BlockRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperKind {
    /// Stored hash differs from the recomputed one.
    Hash,
    /// `parent_hash` differs from the parent's stored hash.
    ParentLink,
}

/// First integrity violation found by [`Chain::verify_hash_chain`].
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("block {at}: {kind:?} mismatch")]
pub struct TamperEvidence {
    pub at: BlockRef,
    pub kind: TamperKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchState {
    /// Parent of the branch's first block; `None` for the main branch.
    pub base: Option<BlockRef>,
    /// Last block appended on this branch, if any.
    pub tip: Option<BlockRef>,
    pub live: bool,
}

impl BranchState {
    /// Block the next append links to.
    fn head(&self) -> BlockRef {
        self.tip.or(self.base).expect("main branch always has a tip")
    }

    /// Chain length along this branch, counted as the head height.
    pub fn length(&self) -> u32 {
        self.head().height
    }
}

/// One blockchain: an append-only block store plus branch bookkeeping.
///
/// Replicas are a count only; every replica holds the same logical blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    id: ChainId,
    replicas: u32,
    blocks: BTreeMap<BlockRef, Block>,
    branches: BTreeMap<Branch, BranchState>,
    canonical: Branch,
}

impl Chain {
    /// A chain holding only its genesis block, whose payload carries the
    /// initial data (usually mint transfers).
    pub fn new(id: ChainId, replicas: u32, genesis_payload: Vec<Entry>) -> Result<Self, ChainError> {
        if replicas == 0 {
            return Err(ChainError::ZeroReplicas { chain: id });
        }
        let genesis_ref = BlockRef { chain: id, height: 0, branch: Branch::MAIN };
        let genesis = Block::seal(genesis_ref, None, Digest::ZERO, genesis_payload);
        let mut blocks = BTreeMap::new();
        blocks.insert(genesis_ref, genesis);
        let mut branches = BTreeMap::new();
        branches.insert(Branch::MAIN, BranchState { base: None, tip: Some(genesis_ref), live: true });
        Ok(Self { id, replicas, blocks, branches, canonical: Branch::MAIN })
    }

    pub fn id(&self) -> ChainId {
        self.id
    }

    pub fn replicas(&self) -> u32 {
        self.replicas
    }

    pub fn canonical_branch(&self) -> Branch {
        self.canonical
    }

    pub fn block(&self, r: &BlockRef) -> Option<&Block> {
        self.blocks.get(r)
    }

    pub(crate) fn block_mut(&mut self, r: &BlockRef) -> Option<&mut Block> {
        self.blocks.get_mut(r)
    }

    /// All stored blocks in canonical order, dead ones included.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub(crate) fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Block> {
        self.blocks.values_mut()
    }

    pub fn branch(&self, b: Branch) -> Option<&BranchState> {
        self.branches.get(&b)
    }

    pub fn branches(&self) -> impl Iterator<Item = (Branch, &BranchState)> {
        self.branches.iter().map(|(b, s)| (*b, s))
    }

    pub fn live_branches(&self) -> Vec<Branch> {
        self.branches.iter().filter(|(_, s)| s.live).map(|(b, _)| *b).collect()
    }

    /// Appends at the head of `branch`.
    pub fn append_block(&mut self, branch: Branch, payload: Vec<Entry>) -> Result<BlockRef, ChainError> {
        let head = self.live_branch(branch)?.head();
        self.append_at(branch, head.height + 1, payload)
    }

    /// Appends at an explicit height, which must be one above the branch head.
    pub fn append_at(&mut self, branch: Branch, height: u32, payload: Vec<Entry>) -> Result<BlockRef, ChainError> {
        let head = self.live_branch(branch)?.head();
        if height == 0 || head.height != height - 1 {
            return Err(ChainError::MissingParent { chain: self.id, branch, height: height.saturating_sub(1) });
        }
        let parent_hash = self.blocks[&head].hash;
        let r = BlockRef { chain: self.id, height, branch };
        debug_assert!(!self.blocks.contains_key(&r));
        self.blocks.insert(r, Block::seal(r, Some(head), parent_hash, payload));
        self.branches.get_mut(&branch).expect("checked above").tip = Some(r);
        Ok(r)
    }

    pub fn append_to_canonical(&mut self, payload: Vec<Entry>) -> Result<BlockRef, ChainError> {
        self.append_block(self.canonical, payload)
    }

    fn live_branch(&self, branch: Branch) -> Result<&BranchState, ChainError> {
        let state = self
            .branches
            .get(&branch)
            .ok_or(ChainError::UnknownBranch { chain: self.id, branch })?;
        if !state.live {
            return Err(ChainError::DeadBranch { chain: self.id, branch });
        }
        Ok(state)
    }

    /// Opens a new branch whose first block will sit at `at_height`, forking
    /// off the canonical branch's block at `at_height - 1`.
    pub fn spawn_fork(&mut self, at_height: u32) -> Result<Branch, ChainError> {
        if at_height == 0 {
            return Err(ChainError::ForkAtGenesis { chain: self.id });
        }
        let path = self.canonical_path();
        let tip = path.last().expect("path contains genesis").height;
        let base = *path
            .get(at_height as usize - 1)
            .ok_or(ChainError::ForkBeyondTip { chain: self.id, height: at_height, tip })?;
        let label = Branch(self.branches.keys().next_back().map_or(0, |b| b.0) + 1);
        self.branches.insert(label, BranchState { base: Some(base), tip: None, live: true });
        Ok(label)
    }

    /// Longest-branch rule: the live branch with the highest head survives,
    /// ties going to the lowest label. Losers are marked dead but kept.
    pub fn resolve_forks(&mut self) -> Branch {
        let winner = self
            .branches
            .iter()
            .filter(|(_, s)| s.live)
            .max_by(|(a, sa), (b, sb)| sa.length().cmp(&sb.length()).then(b.cmp(a)))
            .map(|(b, _)| *b)
            .expect("at least one branch is live");
        for (b, s) in self.branches.iter_mut() {
            s.live = *b == winner;
        }
        self.canonical = winner;
        winner
    }

    /// Blocks from genesis up to and including `to`.
    pub fn path_to(&self, to: BlockRef) -> Vec<BlockRef> {
        let mut out = Vec::new();
        let mut cur = Some(to);
        while let Some(r) = cur {
            out.push(r);
            cur = self.blocks[&r].parent;
        }
        out.reverse();
        out
    }

    pub fn canonical_path(&self) -> Vec<BlockRef> {
        self.path_to(self.branches[&self.canonical].head())
    }

    pub fn canonical_tip(&self) -> BlockRef {
        self.branches[&self.canonical].head()
    }

    /// Blocks on the path of some live branch.
    pub fn live_blocks(&self) -> BTreeSet<BlockRef> {
        let mut out = BTreeSet::new();
        for s in self.branches.values().filter(|s| s.live) {
            out.extend(self.path_to(s.head()));
        }
        out
    }

    pub fn is_live(&self, r: &BlockRef) -> bool {
        self.blocks.contains_key(r) && self.live_blocks().contains(r)
    }

    /// Live blocks at `height`, lowest branch first.
    pub fn live_blocks_at(&self, height: u32) -> Vec<BlockRef> {
        self.live_blocks().into_iter().filter(|r| r.height == height).collect()
    }

    /// Extra live branches at `height` beyond the first.
    pub fn fork_count_at(&self, height: u32) -> usize {
        self.live_blocks_at(height).len().saturating_sub(1)
    }

    /// Holdings along the canonical path.
    pub fn balances(&self) -> Balances {
        let mut out = Balances::new();
        for r in self.canonical_path() {
            for u in self.blocks[&r].transfers() {
                if let Err(e) = out.apply(u) {
                    log::error!("chain {}: invalid transfer in block {r}: {e}", self.id);
                }
            }
        }
        out
    }

    /// Whether a compensation block for the given UNDO record exists on the
    /// canonical path.
    pub fn has_compensation(&self, txn: TxnId, undo_seq: u64) -> bool {
        self.canonical_path().iter().any(|r| {
            self.blocks[r]
                .payload
                .iter()
                .any(|e| matches!(e, Entry::Compensation { txn: t, undo_seq: s } if *t == txn && *s == undo_seq))
        })
    }

    /// Checks every stored hash and parent link, in canonical order.
    pub fn verify_hash_chain(&self) -> Result<(), TamperEvidence> {
        for b in self.blocks.values() {
            if b.recomputed_hash() != b.hash {
                return Err(TamperEvidence { at: b.reference, kind: TamperKind::Hash });
            }
            let expected_parent = match b.parent {
                None => Digest::ZERO,
                Some(p) => match self.blocks.get(&p) {
                    Some(pb) => pb.hash,
                    None => return Err(TamperEvidence { at: b.reference, kind: TamperKind::ParentLink }),
                },
            };
            if b.parent_hash != expected_parent {
                return Err(TamperEvidence { at: b.reference, kind: TamperKind::ParentLink });
            }
        }
        Ok(())
    }

    pub fn is_intact(&self) -> bool {
        self.verify_hash_chain().is_ok()
    }
}
