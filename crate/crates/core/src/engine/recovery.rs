use thiserror::Error;

use super::wal::{Wal, WalError, WalKind};
use crate::chain::{BalanceError, Balances, Entry, Federation, FederationError, TxnId};
use crate::codec::DecodeError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    #[error(transparent)]
    Wal(#[from] WalError),
    #[error("UNDO record {seq}: unreadable snapshot: {source}")]
    Snapshot {
        seq: u64,
        #[source]
        source: DecodeError,
    },
    #[error("UNDO record {seq}: cannot restore snapshot: {source}")]
    Restore {
        seq: u64,
        #[source]
        source: BalanceError,
    },
    #[error(transparent)]
    Federation(#[from] FederationError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub rolled_back: Vec<TxnId>,
    pub committed: Vec<TxnId>,
    /// Compensation blocks appended.
    pub compensations: usize,
    pub aborts_written: usize,
    pub locks_cleared: usize,
}

impl RecoveryReport {
    /// True when recovery changed nothing.
    pub fn is_noop(&self) -> bool {
        self.compensations == 0 && self.aborts_written == 0 && self.locks_cleared == 0
    }
}

/// Restores every chain `txn` touched, walking its UNDO records newest
/// first. Each restoration is one block carrying a compensation marker and
/// the transfers back to the snapshot; records whose marker is already on
/// chain are skipped, which makes repeated rollbacks harmless. `step` runs
/// before each append so callers can inject crashes.
pub(crate) fn rollback_txn<E: From<RecoveryError>>(
    fed: &mut Federation,
    wal: &Wal,
    txn: TxnId,
    step: &mut impl FnMut() -> Result<(), E>,
) -> Result<usize, E> {
    let undos: Vec<_> = wal
        .for_txn(txn)
        .filter_map(|r| match &r.kind {
            WalKind::Undo { block, snapshot } => Some((r.seq, *block, snapshot)),
            _ => None,
        })
        .collect();
    let mut appended = 0;
    for (seq, block, snapshot) in undos.into_iter().rev() {
        let chain = fed.chain(block.chain).map_err(RecoveryError::from)?;
        if chain.has_compensation(txn, seq) {
            continue;
        }
        let target = Balances::decode(snapshot).map_err(|source| RecoveryError::Snapshot { seq, source })?;
        let transfers = chain
            .balances()
            .transfers_to(&target)
            .map_err(|source| RecoveryError::Restore { seq, source })?;
        step()?;
        let mut payload = vec![Entry::Compensation { txn, undo_seq: seq }];
        payload.extend(transfers.into_iter().map(Entry::Transfer));
        fed.append_entries(block.chain, payload).map_err(RecoveryError::from)?;
        appended += 1;
    }
    Ok(appended)
}

/// Rolls back every logged transaction without a Commit record, writes the
/// missing Abort records and clears all locks. Running it twice changes
/// nothing the second time.
pub fn recover(fed: &mut Federation, wal: &mut Wal) -> Result<RecoveryReport, RecoveryError> {
    wal.validate()?;
    let mut report = RecoveryReport::default();
    for txn in wal.transactions() {
        match wal.terminal(txn) {
            Some(WalKind::Commit) => {
                report.committed.push(txn);
                continue;
            }
            Some(_) => {}
            None => {
                wal.append(txn, WalKind::Abort);
                report.aborts_written += 1;
            }
        }
        let n = rollback_txn(fed, wal, txn, &mut || Ok::<(), RecoveryError>(()))?;
        if n > 0 {
            report.rolled_back.push(txn);
            report.compensations += n;
        }
    }
    report.locks_cleared = fed.clear_locks();
    if !report.is_noop() {
        log::info!(
            "recovery: {} transaction(s) rolled back, {} compensation block(s), {} lock(s) cleared",
            report.rolled_back.len(),
            report.compensations,
            report.locks_cleared
        );
    }
    Ok(report)
}
