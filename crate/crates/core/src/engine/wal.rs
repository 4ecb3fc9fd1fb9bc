//! UNDO write-ahead log.
//!
//! File layout, per record: `u32` byte length of the body, then the body:
//! sequence `u64`, txn id `u64`, kind tag `u8` (0 Undo, 1 Abort, 2 Commit);
//! Undo bodies continue with the block ref (chain, height, branch as three
//! `u32`) and a `u32`-length-prefixed balance snapshot. All integers are
//! big-endian.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chain::{BlockRef, TxnId};
use crate::codec::{self, DecodeError, Reader};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalKind {
    /// Balances of `block`'s chain before the face touching it ran.
    Undo { block: BlockRef, snapshot: Vec<u8> },
    Abort,
    Commit,
}

impl WalKind {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, WalKind::Undo { .. })
    }

    fn tag(&self) -> u8 {
        match self {
            WalKind::Undo { .. } => 0,
            WalKind::Abort => 1,
            WalKind::Commit => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalRecord {
    pub seq: u64,
    pub txn: TxnId,
    pub kind: WalKind,
}

impl WalRecord {
    /// Framed bytes, length prefix included.
    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        codec::put_u64(&mut body, self.seq);
        codec::put_u64(&mut body, self.txn.0);
        codec::put_u8(&mut body, self.kind.tag());
        if let WalKind::Undo { block, snapshot } = &self.kind {
            block.encode(&mut body);
            codec::put_bytes(&mut body, snapshot);
        }
        let mut out = Vec::with_capacity(body.len() + 4);
        codec::put_bytes(&mut out, &body);
        out
    }

    fn decode_body(body: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(body);
        let seq = r.u64()?;
        let txn = TxnId(r.u64()?);
        let offset = r.offset();
        let kind = match r.u8()? {
            0 => {
                let block = BlockRef::new(r.u32()?, r.u32()?, r.u32()?);
                WalKind::Undo { block, snapshot: r.bytes()?.to_vec() }
            }
            1 => WalKind::Abort,
            2 => WalKind::Commit,
            tag => return Err(DecodeError::Tag { tag, offset }),
        };
        r.finish()?;
        Ok(Self { seq, txn, kind })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalError {
    #[error("record {index}: {source}")]
    Decode {
        index: usize,
        #[source]
        source: DecodeError,
    },
    #[error("record {index}: sequence {seq} does not follow {prev}")]
    OutOfOrder { index: usize, seq: u64, prev: u64 },
    #[error("record {index} (seq {seq}): UNDO for transaction {txn} after its terminal record")]
    UndoAfterTerminal { index: usize, seq: u64, txn: TxnId },
    #[error("record {index} (seq {seq}): second terminal record for transaction {txn}")]
    DuplicateTerminal { index: usize, seq: u64, txn: TxnId },
}

impl WalError {
    /// Position of the first offending record.
    pub fn index(&self) -> usize {
        match self {
            WalError::Decode { index, .. }
            | WalError::OutOfOrder { index, .. }
            | WalError::UndoAfterTerminal { index, .. }
            | WalError::DuplicateTerminal { index, .. } => *index,
        }
    }
}

/// In-memory log; every appended record counts as durable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Wal {
    records: Vec<WalRecord>,
}

impl Wal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, txn: TxnId, kind: WalKind) -> &WalRecord {
        let seq = self.records.last().map_or(1, |r| r.seq + 1);
        self.records.push(WalRecord { seq, txn, kind });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[WalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn for_txn(&self, txn: TxnId) -> impl Iterator<Item = &WalRecord> {
        self.records.iter().filter(move |r| r.txn == txn)
    }

    pub fn terminal(&self, txn: TxnId) -> Option<&WalKind> {
        self.for_txn(txn).map(|r| &r.kind).find(|k| k.is_terminal())
    }

    /// Transactions in order of first appearance.
    pub fn transactions(&self) -> Vec<TxnId> {
        let mut out: Vec<TxnId> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.txn) {
                out.push(r.txn);
            }
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        self.records.iter().flat_map(WalRecord::encode).collect()
    }

    /// Parses and validates a log file.
    pub fn decode(bytes: &[u8]) -> Result<Self, WalError> {
        let mut r = Reader::new(bytes);
        let mut records = Vec::new();
        while !r.is_empty() {
            let index = records.len();
            let body = r.bytes().map_err(|source| WalError::Decode { index, source })?;
            records.push(WalRecord::decode_body(body).map_err(|source| WalError::Decode { index, source })?);
        }
        let wal = Self { records };
        wal.validate()?;
        Ok(wal)
    }

    /// Checks sequence order and per-transaction record structure.
    pub fn validate(&self) -> Result<(), WalError> {
        let mut prev: Option<u64> = None;
        let mut terminated = BTreeSet::new();
        for (index, rec) in self.records.iter().enumerate() {
            if let Some(p) = prev {
                if rec.seq <= p {
                    return Err(WalError::OutOfOrder { index, seq: rec.seq, prev: p });
                }
            }
            prev = Some(rec.seq);
            let done = terminated.contains(&rec.txn);
            match (&rec.kind, done) {
                (WalKind::Undo { .. }, true) => {
                    return Err(WalError::UndoAfterTerminal { index, seq: rec.seq, txn: rec.txn })
                }
                (k, true) if k.is_terminal() => {
                    return Err(WalError::DuplicateTerminal { index, seq: rec.seq, txn: rec.txn })
                }
                (k, false) if k.is_terminal() => {
                    terminated.insert(rec.txn);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Wal {
        let mut w = Wal::new();
        w.append(TxnId(1), WalKind::Undo { block: BlockRef::new(1, 3, 0), snapshot: vec![1, 2, 3] });
        w.append(TxnId(1), WalKind::Undo { block: BlockRef::new(2, 3, 1), snapshot: vec![] });
        w.append(TxnId(1), WalKind::Commit);
        w.append(TxnId(2), WalKind::Abort);
        w
    }

    #[test]
    fn layout_is_length_prefixed_big_endian() {
        let mut w = Wal::new();
        w.append(TxnId(7), WalKind::Commit);
        assert_eq!(
            w.encode(),
            vec![0, 0, 0, 17, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 7, 2]
        );
    }

    #[test]
    fn round_trip() {
        let w = sample();
        assert_eq!(Wal::decode(&w.encode()).unwrap(), w);
        assert_eq!(Wal::decode(&[]).unwrap(), Wal::new());
    }

    #[test]
    fn rejects_out_of_order_sequence() {
        let mut w = sample();
        w.records[2].seq = 2;
        assert_eq!(
            Wal::decode(&w.encode()),
            Err(WalError::OutOfOrder { index: 2, seq: 2, prev: 2 })
        );
    }

    #[test]
    fn rejects_structural_violations() {
        let mut w = sample();
        w.append(TxnId(1), WalKind::Undo { block: BlockRef::new(1, 3, 0), snapshot: vec![] });
        assert_eq!(w.validate(), Err(WalError::UndoAfterTerminal { index: 4, seq: 5, txn: TxnId(1) }));

        let mut w = sample();
        w.append(TxnId(2), WalKind::Commit);
        assert_eq!(w.validate(), Err(WalError::DuplicateTerminal { index: 4, seq: 5, txn: TxnId(2) }));
    }

    #[test]
    fn truncated_file_names_record() {
        let bytes = sample().encode();
        let err = Wal::decode(&bytes[..bytes.len() - 3]).unwrap_err();
        assert_eq!(err.index(), 3);
        let mut bad = sample().encode();
        bad[4 + 16] = 9;
        assert!(matches!(Wal::decode(&bad), Err(WalError::Decode { index: 0, source: DecodeError::Tag { tag: 9, .. } })));
    }

    proptest! {
        #[test]
        fn any_prefix_of_records_round_trips(cut in 0usize..=4) {
            let mut w = sample();
            w.records.truncate(cut);
            prop_assert_eq!(Wal::decode(&w.encode()).unwrap(), w);
        }
    }
}
