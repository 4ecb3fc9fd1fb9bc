use super::{AssetUpdate, BlockRef, Digest, TxnId};
use crate::codec;

/// Two-phase-commit decision records kept on a witness chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessRecord {
    Prepared { txn: TxnId, sub: u32 },
    GlobalCommit(TxnId),
    GlobalAbort(TxnId),
}

impl WitnessRecord {
    pub fn txn(&self) -> TxnId {
        match self {
            WitnessRecord::Prepared { txn, .. } | WitnessRecord::GlobalCommit(txn) | WitnessRecord::GlobalAbort(txn) => {
                *txn
            }
        }
    }

    pub fn is_decision(&self) -> bool {
        !matches!(self, WitnessRecord::Prepared { .. })
    }
}

/// One record in a block payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entry {
    Transfer(AssetUpdate),
    /// Marks a block that compensates the UNDO record `undo_seq` of `txn`.
    Compensation { txn: TxnId, undo_seq: u64 },
    Witness(WitnessRecord),
}

impl Entry {
    pub fn as_transfer(&self) -> Option<&AssetUpdate> {
        match self {
            Entry::Transfer(u) => Some(u),
            _ => None,
        }
    }

    pub(crate) fn encode(&self, buf: &mut Vec<u8>) {
        match self {
            Entry::Transfer(u) => {
                codec::put_u8(buf, 0);
                codec::put_str(buf, &u.owner_from.0);
                codec::put_str(buf, &u.owner_to.0);
                codec::put_str(buf, &u.asset.0);
                codec::put_u64(buf, u.amount);
            }
            Entry::Compensation { txn, undo_seq } => {
                codec::put_u8(buf, 1);
                codec::put_u64(buf, txn.0);
                codec::put_u64(buf, *undo_seq);
            }
            Entry::Witness(w) => {
                codec::put_u8(buf, 2);
                match w {
                    WitnessRecord::Prepared { txn, sub } => {
                        codec::put_u8(buf, 0);
                        codec::put_u64(buf, txn.0);
                        codec::put_u32(buf, *sub);
                    }
                    WitnessRecord::GlobalCommit(txn) => {
                        codec::put_u8(buf, 1);
                        codec::put_u64(buf, txn.0);
                    }
                    WitnessRecord::GlobalAbort(txn) => {
                        codec::put_u8(buf, 2);
                        codec::put_u64(buf, txn.0);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub reference: BlockRef,
    /// Store index of the parent; `None` only for genesis.
    pub parent: Option<BlockRef>,
    pub parent_hash: Digest,
    pub payload: Vec<Entry>,
    pub hash: Digest,
    pub locked_by: Option<TxnId>,
}

impl Block {
    pub(crate) fn seal(reference: BlockRef, parent: Option<BlockRef>, parent_hash: Digest, payload: Vec<Entry>) -> Self {
        let hash = Self::compute_hash(&reference, &parent_hash, &payload);
        Self { reference, parent, parent_hash, payload, hash, locked_by: None }
    }

    /// Digest over the canonical encoding of (ref, parent hash, payload).
    pub fn compute_hash(reference: &BlockRef, parent_hash: &Digest, payload: &[Entry]) -> Digest {
        let mut buf = Vec::new();
        reference.encode(&mut buf);
        buf.extend_from_slice(&parent_hash.0);
        codec::put_u32(&mut buf, payload.len() as u32);
        for e in payload {
            e.encode(&mut buf);
        }
        Digest::of(&buf)
    }

    pub fn recomputed_hash(&self) -> Digest {
        Self::compute_hash(&self.reference, &self.parent_hash, &self.payload)
    }

    /// Canonical bytes of everything except the lock flag.
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.reference.encode(&mut buf);
        buf.extend_from_slice(&self.parent_hash.0);
        codec::put_u32(&mut buf, self.payload.len() as u32);
        for e in &self.payload {
            e.encode(&mut buf);
        }
        buf.extend_from_slice(&self.hash.0);
        buf
    }

    pub fn transfers(&self) -> impl Iterator<Item = &AssetUpdate> {
        self.payload.iter().filter_map(Entry::as_transfer)
    }
}
