use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{AssetId, AssetUpdate, Balances, BalanceError, BlockRef, Chain, ChainError, ChainId, Digest, Entry, TxnId};
use crate::codec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("block {block} is locked by transaction {holder}")]
    Conflict { block: BlockRef, holder: TxnId },
    #[error("unknown block {0}")]
    UnknownBlock(BlockRef),
    #[error("block {block} is not locked by the releasing transaction (holder: {holder:?})")]
    NotHolder { block: BlockRef, holder: Option<TxnId> },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FederationError {
    #[error("duplicate chain id {0}")]
    DuplicateChain(ChainId),
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("chain {chain}: {source}")]
    Balance {
        chain: ChainId,
        #[source]
        source: BalanceError,
    },
}

/// Locks granted to one transaction, in acquisition order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockGrant {
    pub txn: TxnId,
    pub blocks: Vec<BlockRef>,
}

/// A set of chains, iterated in id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Federation {
    chains: BTreeMap<ChainId, Chain>,
    epoch: u64,
}

impl Federation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_chain(&mut self, chain: Chain) -> Result<(), FederationError> {
        if self.chains.contains_key(&chain.id()) {
            return Err(FederationError::DuplicateChain(chain.id()));
        }
        self.chains.insert(chain.id(), chain);
        Ok(())
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn chains(&self) -> impl Iterator<Item = &Chain> {
        self.chains.values()
    }

    pub fn chain(&self, id: ChainId) -> Result<&Chain, FederationError> {
        self.chains.get(&id).ok_or(FederationError::UnknownChain(id))
    }

    pub fn chain_mut(&mut self, id: ChainId) -> Result<&mut Chain, FederationError> {
        self.chains.get_mut(&id).ok_or(FederationError::UnknownChain(id))
    }

    pub fn block(&self, r: &BlockRef) -> Option<&super::Block> {
        self.chains.get(&r.chain)?.block(r)
    }

    pub fn is_live(&self, r: &BlockRef) -> bool {
        self.chains.get(&r.chain).is_some_and(|c| c.is_live(r))
    }

    /// Runs the longest-branch rule on every chain and advances the epoch.
    pub fn resolve_all_forks(&mut self) {
        for c in self.chains.values_mut() {
            c.resolve_forks();
        }
        self.epoch += 1;
    }

    /// All-or-nothing lock acquisition in canonical (chain, height, branch)
    /// order. Blocks already held by `txn` count as granted.
    pub fn lock_blocks(&mut self, refs: &[BlockRef], txn: TxnId) -> Result<LockGrant, LockError> {
        let order: BTreeSet<BlockRef> = refs.iter().copied().collect();
        for r in &order {
            let b = self.block(r).ok_or(LockError::UnknownBlock(*r))?;
            if let Some(holder) = b.locked_by {
                if holder != txn {
                    return Err(LockError::Conflict { block: *r, holder });
                }
            }
        }
        for r in &order {
            self.block_mut(r).expect("checked").locked_by = Some(txn);
        }
        Ok(LockGrant { txn, blocks: order.into_iter().collect() })
    }

    pub fn release_blocks(&mut self, refs: &[BlockRef], txn: TxnId) -> Result<(), LockError> {
        for r in refs {
            let b = self.block(r).ok_or(LockError::UnknownBlock(*r))?;
            if b.locked_by != Some(txn) {
                return Err(LockError::NotHolder { block: *r, holder: b.locked_by });
            }
        }
        for r in refs {
            self.block_mut(r).expect("checked").locked_by = None;
        }
        Ok(())
    }

    pub fn lock_holder(&self, r: &BlockRef) -> Option<TxnId> {
        self.block(r).and_then(|b| b.locked_by)
    }

    pub fn held_locks(&self) -> Vec<(BlockRef, TxnId)> {
        self.chains
            .values()
            .flat_map(|c| c.blocks())
            .filter_map(|b| b.locked_by.map(|t| (b.reference, t)))
            .collect()
    }

    /// Drops every lock; returns how many were held.
    pub fn clear_locks(&mut self) -> usize {
        let mut n = 0;
        for c in self.chains.values_mut() {
            for b in c.blocks_mut() {
                if b.locked_by.take().is_some() {
                    n += 1;
                }
            }
        }
        n
    }

    fn block_mut(&mut self, r: &BlockRef) -> Option<&mut super::Block> {
        self.chains.get_mut(&r.chain)?.block_mut(r)
    }

    pub fn balances(&self, chain: ChainId) -> Result<Balances, FederationError> {
        Ok(self.chain(chain)?.balances())
    }

    /// Appends one block carrying `updates` to the canonical branch of
    /// `chain`, after checking the chain can fund all of them.
    pub fn apply_transfers(&mut self, chain: ChainId, updates: &[AssetUpdate]) -> Result<BlockRef, FederationError> {
        let mut bal = self.balances(chain)?;
        bal.apply_all(updates).map_err(|source| FederationError::Balance { chain, source })?;
        let payload = updates.iter().cloned().map(Entry::Transfer).collect();
        Ok(self.chain_mut(chain)?.append_to_canonical(payload)?)
    }

    /// Appends a raw payload to the canonical branch of `chain`.
    pub fn append_entries(&mut self, chain: ChainId, payload: Vec<Entry>) -> Result<BlockRef, FederationError> {
        Ok(self.chain_mut(chain)?.append_to_canonical(payload)?)
    }

    /// Digest of all effective balances, chain by chain.
    pub fn state_digest(&self) -> Digest {
        let mut buf = Vec::new();
        for (id, c) in &self.chains {
            codec::put_u32(&mut buf, id.0);
            codec::put_bytes(&mut buf, &c.balances().encode());
        }
        Digest::of(&buf)
    }

    /// Per-chain, per-asset totals.
    pub fn asset_totals(&self) -> BTreeMap<(ChainId, AssetId), u128> {
        let mut out = BTreeMap::new();
        for (id, c) in &self.chains {
            for (a, t) in c.balances().totals() {
                out.insert((*id, a), t);
            }
        }
        out
    }

    pub fn verify_all(&self) -> Result<(), super::TamperEvidence> {
        self.chains.values().try_for_each(|c| c.verify_hash_chain())
    }
}

/// Incremental lock acquisition: one block per [`step`](LockRequest::step),
/// always in canonical order. Used to model interleaved requesters.
#[derive(Debug, Clone)]
pub struct LockRequest {
    txn: TxnId,
    order: Vec<BlockRef>,
    next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockStep {
    Acquired(BlockRef),
    Waiting { block: BlockRef, holder: TxnId },
    Complete,
}

impl LockRequest {
    pub fn new(txn: TxnId, refs: &[BlockRef]) -> Self {
        let order: BTreeSet<BlockRef> = refs.iter().copied().collect();
        Self { txn, order: order.into_iter().collect(), next: 0 }
    }

    pub fn txn(&self) -> TxnId {
        self.txn
    }

    pub fn held(&self) -> &[BlockRef] {
        &self.order[..self.next]
    }

    pub fn is_complete(&self) -> bool {
        self.next == self.order.len()
    }

    pub fn step(&mut self, fed: &mut Federation) -> Result<LockStep, LockError> {
        let Some(r) = self.order.get(self.next).copied() else {
            return Ok(LockStep::Complete);
        };
        match fed.lock_holder(&r) {
            Some(holder) if holder != self.txn => Ok(LockStep::Waiting { block: r, holder }),
            _ => {
                fed.lock_blocks(&[r], self.txn)?;
                self.next += 1;
                Ok(LockStep::Acquired(r))
            }
        }
    }

    /// Releases everything acquired so far.
    pub fn release(&mut self, fed: &mut Federation) -> Result<(), LockError> {
        fed.release_blocks(self.held(), self.txn)?;
        self.next = 0;
        Ok(())
    }
}
