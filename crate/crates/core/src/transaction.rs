//! Cross-chain transactions: participating blocks plus ordered
//! sub-transaction faces, each carrying the transfers it applies.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::chain::{AssetUpdate, BlockRef, ChainId, PartyId, TxnId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TxnError {
    #[error("transaction {txn}: needs at least 2 parties, got {count}")]
    TooFewParties { txn: TxnId, count: usize },
    #[error("transaction {txn}: party {party} listed twice")]
    DuplicateParty { txn: TxnId, party: PartyId },
    #[error("transaction {txn}: reserved party name {party}")]
    ReservedParty { txn: TxnId, party: PartyId },
    #[error("transaction {txn}: no participating blocks")]
    NoBlocks { txn: TxnId },
    #[error("transaction {txn}: chain {chain} referenced at more than one height")]
    MixedHeights { txn: TxnId, chain: ChainId },
    #[error("transaction {txn}: sub-transaction {sub} is empty")]
    EmptyFace { txn: TxnId, sub: usize },
    #[error("transaction {txn}: sub-transaction {sub} uses block {block} outside the transaction")]
    FaceOutsideBlocks { txn: TxnId, sub: usize, block: BlockRef },
    #[error("transaction {txn}: sub-transaction {sub} updates block {block} outside its face")]
    UpdateOutsideFace { txn: TxnId, sub: usize, block: BlockRef },
    #[error("transaction {txn}: sub-transaction {sub} names non-participant {party}")]
    UnknownParty { txn: TxnId, sub: usize, party: PartyId },
}

/// One face of the transaction simplex and the transfers it applies.
/// Each update is tagged with a block of the face; it lands on that block's
/// chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTransaction {
    pub face: BTreeSet<BlockRef>,
    pub updates: Vec<(BlockRef, AssetUpdate)>,
}

impl SubTransaction {
    /// Updates grouped per chain, chains in id order, declared order within.
    pub fn updates_by_chain(&self) -> BTreeMap<ChainId, Vec<AssetUpdate>> {
        let mut out: BTreeMap<ChainId, Vec<AssetUpdate>> = BTreeMap::new();
        for (b, u) in &self.updates {
            out.entry(b.chain).or_default().push(u.clone());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossChainTransaction {
    pub id: TxnId,
    pub parties: Vec<PartyId>,
    pub blocks: BTreeSet<BlockRef>,
    pub sub_transactions: Vec<SubTransaction>,
}

impl CrossChainTransaction {
    pub fn validate(&self) -> Result<(), TxnError> {
        let txn = self.id;
        if self.parties.len() < 2 {
            return Err(TxnError::TooFewParties { txn, count: self.parties.len() });
        }
        let mut seen = BTreeSet::new();
        for p in &self.parties {
            if p.is_genesis() {
                return Err(TxnError::ReservedParty { txn, party: p.clone() });
            }
            if !seen.insert(p) {
                return Err(TxnError::DuplicateParty { txn, party: p.clone() });
            }
        }
        if self.blocks.is_empty() {
            return Err(TxnError::NoBlocks { txn });
        }
        let mut heights: BTreeMap<ChainId, u32> = BTreeMap::new();
        for b in &self.blocks {
            if *heights.entry(b.chain).or_insert(b.height) != b.height {
                return Err(TxnError::MixedHeights { txn, chain: b.chain });
            }
        }
        for (sub, s) in self.sub_transactions.iter().enumerate() {
            if s.face.is_empty() {
                return Err(TxnError::EmptyFace { txn, sub });
            }
            if let Some(block) = s.face.iter().find(|b| !self.blocks.contains(b)) {
                return Err(TxnError::FaceOutsideBlocks { txn, sub, block: *block });
            }
            for (block, u) in &s.updates {
                if !s.face.contains(block) {
                    return Err(TxnError::UpdateOutsideFace { txn, sub, block: *block });
                }
                for party in [&u.owner_from, &u.owner_to] {
                    if !seen.contains(party) {
                        return Err(TxnError::UnknownParty { txn, sub, party: party.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Referenced height per chain.
    pub fn heights(&self) -> BTreeMap<ChainId, u32> {
        self.blocks.iter().map(|b| (b.chain, b.height)).collect()
    }

    pub fn chains(&self) -> BTreeSet<ChainId> {
        self.blocks.iter().map(|b| b.chain).collect()
    }

    pub fn total_updates(&self) -> usize {
        self.sub_transactions.iter().map(|s| s.updates.len()).sum()
    }

    pub fn all_updates(&self) -> impl Iterator<Item = &(BlockRef, AssetUpdate)> {
        self.sub_transactions.iter().flat_map(|s| s.updates.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn txn() -> CrossChainTransaction {
        let a = BlockRef::new(1, 2, 0);
        let b = BlockRef::new(2, 2, 0);
        CrossChainTransaction {
            id: TxnId(1),
            parties: vec![PartyId::new("Alice"), PartyId::new("Bob")],
            blocks: [a, b].into(),
            sub_transactions: vec![SubTransaction {
                face: [a, b].into(),
                updates: vec![(a, AssetUpdate::new("Alice", "Bob", "ETH", 1))],
            }],
        }
    }

    #[test]
    fn well_formed_passes() {
        txn().validate().unwrap();
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut t = txn();
        t.parties.pop();
        assert!(matches!(t.validate(), Err(TxnError::TooFewParties { count: 1, .. })));

        let mut t = txn();
        t.blocks.insert(BlockRef::new(1, 3, 0));
        assert!(matches!(t.validate(), Err(TxnError::MixedHeights { .. })));

        let mut t = txn();
        t.sub_transactions[0].face.insert(BlockRef::new(3, 2, 0));
        assert!(matches!(t.validate(), Err(TxnError::FaceOutsideBlocks { .. })));

        let mut t = txn();
        t.sub_transactions[0].updates[0].1.owner_to = PartyId::new("Mallory");
        assert!(matches!(t.validate(), Err(TxnError::UnknownParty { .. })));

        let mut t = txn();
        t.sub_transactions[0].face.remove(&BlockRef::new(1, 2, 0));
        assert!(matches!(t.validate(), Err(TxnError::UpdateOutsideFace { .. })));
    }

    #[test]
    fn fork_siblings_at_one_height_are_allowed() {
        let mut t = txn();
        t.blocks.insert(BlockRef::new(1, 2, 1));
        t.validate().unwrap();
    }
}
