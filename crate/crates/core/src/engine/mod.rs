//! TopoCBT: lock the participating blocks, build the transaction simplex,
//! log UNDO records and apply each sub-transaction face in order, then
//! commit, or roll back on the first failure. Crash recovery replays the
//! UNDO log.

mod failure;
mod metrics;
mod recovery;
pub mod wal;

use std::fmt;

use thiserror::Error;

pub use failure::{FaceFailure, FailurePlan};
pub use metrics::{calibrate, count_complexity, ComplexityCheck};
pub use recovery::{recover, RecoveryError, RecoveryReport};
pub use wal::{Wal, WalError, WalKind, WalRecord};

use crate::chain::{BlockRef, ChainId, Federation, FederationError, LockError, TxnId};
use crate::topology::{self, TopologyError, TopologyMode};
use crate::transaction::{CrossChainTransaction, TxnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnStatus {
    Committed,
    Aborted,
    /// Part of the outcome vocabulary; TopoCBT never returns it.
    Pending,
}

impl fmt::Display for TxnStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxnStatus::Committed => "committed",
            TxnStatus::Aborted => "aborted",
            TxnStatus::Pending => "pending",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbortReason {
    LockConflict { block: BlockRef, holder: TxnId },
    UpdateFailure { sub: usize, chain: ChainId },
    InsufficientFunds { sub: usize, chain: ChainId },
    /// Process stopped after `step` durable steps; recovery finished the job.
    Crash { step: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnOutcome {
    pub txn: TxnId,
    pub status: TxnStatus,
    pub applied_updates: usize,
    pub messages: u64,
    pub primitive_ops: u64,
    /// Dimension of the transaction simplex, once built.
    pub sigma_dimension: Option<usize>,
    pub reason: Option<AbortReason>,
    /// Bytes appended to the WAL by this run.
    pub wal_bytes: usize,
    /// WAL bytes that must outlive the transaction: its terminal record.
    pub residual_wal_bytes: usize,
    pub recovered: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error(transparent)]
    Malformed(#[from] TxnError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

/// Result of a run that may stop at an injected crash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Execution {
    Finished(TxnOutcome),
    /// Stopped after `step` durable steps; locks and partial updates remain.
    Crashed { step: u32, partial: TxnOutcome },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Engine {
    pub mode: TopologyMode,
}

/// [`Engine::execute`] with abstract topology.
pub fn topocbt_execute(
    fed: &mut Federation,
    wal: &mut Wal,
    txn: &CrossChainTransaction,
    plan: &FailurePlan,
) -> Result<TxnOutcome, EngineError> {
    Engine::default().execute(fed, wal, txn, plan)
}

impl Engine {
    pub fn new(mode: TopologyMode) -> Self {
        Self { mode }
    }

    /// Runs the protocol; an injected crash is followed by [`recover`], so
    /// the result is always Committed or Aborted.
    pub fn execute(
        &self,
        fed: &mut Federation,
        wal: &mut Wal,
        txn: &CrossChainTransaction,
        plan: &FailurePlan,
    ) -> Result<TxnOutcome, EngineError> {
        match self.execute_until_crash(fed, wal, txn, plan)? {
            Execution::Finished(out) => Ok(out),
            Execution::Crashed { step, mut partial } => {
                let wal_start = wal.encode().len() - partial.wal_bytes;
                recover(fed, wal)?;
                let committed = matches!(wal.terminal(txn.id), Some(WalKind::Commit));
                partial.status = if committed { TxnStatus::Committed } else { TxnStatus::Aborted };
                partial.applied_updates = if committed { txn.total_updates() } else { 0 };
                partial.reason = if committed { None } else { Some(AbortReason::Crash { step }) };
                partial.wal_bytes = wal.encode().len() - wal_start;
                partial.residual_wal_bytes = terminal_bytes(wal, txn.id);
                partial.recovered = true;
                Ok(partial)
            }
        }
    }

    /// Runs the protocol but stops dead at an injected crash, leaving the
    /// federation and WAL as a crashed process would.
    pub fn execute_until_crash(
        &self,
        fed: &mut Federation,
        wal: &mut Wal,
        txn: &CrossChainTransaction,
        plan: &FailurePlan,
    ) -> Result<Execution, EngineError> {
        txn.validate()?;
        let wal_start = wal.encode().len();
        let mut run = Run {
            fed,
            wal,
            txn,
            mode: self.mode,
            clock: Clock { done: 0, crash_at: plan.crash_step },
            ops: 0,
            messages: 0,
            sigma_dimension: None,
        };
        let result = run.protocol(plan);
        let outcome = |run: &Run, status, reason| TxnOutcome {
            txn: txn.id,
            status,
            applied_updates: if status == TxnStatus::Committed { txn.total_updates() } else { 0 },
            messages: run.messages,
            primitive_ops: run.ops,
            sigma_dimension: run.sigma_dimension,
            reason,
            wal_bytes: run.wal.encode().len() - wal_start,
            residual_wal_bytes: terminal_bytes(run.wal, txn.id),
            recovered: false,
        };
        match result {
            Ok((status, reason)) => {
                log::debug!("txn {}: {status}", txn.id);
                Ok(Execution::Finished(outcome(&run, status, reason)))
            }
            Err(Halt::Crash) => {
                let step = run.clock.done;
                log::debug!("txn {}: crashed after {step} steps", txn.id);
                Ok(Execution::Crashed { step, partial: outcome(&run, TxnStatus::Pending, None) })
            }
            Err(Halt::Error(e)) => Err(e),
        }
    }
}

fn terminal_bytes(wal: &Wal, txn: TxnId) -> usize {
    wal.for_txn(txn).filter(|r| r.kind.is_terminal()).map(|r| r.encode().len()).sum()
}

enum Halt {
    Crash,
    Error(EngineError),
}

macro_rules! halt_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Halt {
            fn from(e: $t) -> Self {
                Halt::Error(e.into())
            }
        }
    )*};
}

halt_from!(EngineError, TopologyError, LockError, FederationError, RecoveryError);

struct Clock {
    done: u32,
    crash_at: Option<u32>,
}

impl Clock {
    /// Called before every durable step.
    fn step(&mut self) -> Result<(), Halt> {
        if self.crash_at == Some(self.done) {
            return Err(Halt::Crash);
        }
        self.done += 1;
        Ok(())
    }
}

struct Run<'a> {
    fed: &'a mut Federation,
    wal: &'a mut Wal,
    txn: &'a CrossChainTransaction,
    mode: TopologyMode,
    clock: Clock,
    ops: u64,
    messages: u64,
    sigma_dimension: Option<usize>,
}

impl Run<'_> {
    fn protocol(&mut self, plan: &FailurePlan) -> Result<(TxnStatus, Option<AbortReason>), Halt> {
        let txn = self.txn;
        let blocks: Vec<BlockRef> = topology::expand_blocks(self.fed, txn)?.into_iter().collect();
        let n = blocks.len() as u64;

        // Lock B_T: one request per block.
        self.ops += n;
        self.messages += n;
        match self.fed.lock_blocks(&blocks, txn.id) {
            Ok(_) => {}
            Err(LockError::Conflict { block, holder }) => {
                log::info!("txn {}: lock conflict on {block} held by {holder}", txn.id);
                return Ok((TxnStatus::Aborted, Some(AbortReason::LockConflict { block, holder })));
            }
            Err(e) => return Err(e.into()),
        }

        // Build sigma: every pair of participating blocks is linked.
        let sigma = topology::transaction_simplex(self.fed, txn, self.mode)?;
        self.sigma_dimension = Some(sigma.dimension());
        self.ops += n * (n - 1) / 2;

        let faults = plan.topocbt_faces(txn);
        for (i, sub) in txn.sub_transactions.iter().enumerate() {
            let fault = faults.get(&i).copied();
            self.messages += sub.face.len() as u64;
            for b in &sub.face {
                let snapshot = self.fed.balances(b.chain)?.encode();
                self.clock.step()?;
                self.wal.append(txn.id, WalKind::Undo { block: *b, snapshot });
                self.ops += 1;
            }
            if fault == Some(FaceFailure::CrashAfterUndo) {
                return Err(Halt::Crash);
            }
            let by_chain = sub.updates_by_chain();
            let failing = match fault {
                Some(FaceFailure::UpdateFailure) => {
                    Some(by_chain.keys().next_back().copied().unwrap_or_else(|| sub.face.first().expect("non-empty").chain))
                }
                _ => None,
            };
            for (chain, updates) in &by_chain {
                if failing == Some(*chain) {
                    break;
                }
                self.clock.step()?;
                match self.fed.apply_transfers(*chain, updates) {
                    Ok(_) => self.ops += updates.len() as u64,
                    Err(FederationError::Balance { .. }) => {
                        return self.abort(&blocks, AbortReason::InsufficientFunds { sub: i, chain: *chain });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if let Some(chain) = failing {
                return self.abort(&blocks, AbortReason::UpdateFailure { sub: i, chain });
            }
            if fault == Some(FaceFailure::CrashBeforeCommit) {
                return Err(Halt::Crash);
            }
        }

        self.clock.step()?;
        self.wal.append(txn.id, WalKind::Commit);
        self.ops += 1;
        self.finish(&blocks)?;
        Ok((TxnStatus::Committed, None))
    }

    fn abort(&mut self, blocks: &[BlockRef], reason: AbortReason) -> Result<(TxnStatus, Option<AbortReason>), Halt> {
        log::info!("txn {}: aborting ({reason:?})", self.txn.id);
        self.clock.step()?;
        self.wal.append(self.txn.id, WalKind::Abort);
        self.ops += 1;
        let clock = &mut self.clock;
        rollback(self.fed, self.wal, self.txn.id, clock)?;
        self.ops += self.wal.for_txn(self.txn.id).filter(|r| !r.kind.is_terminal()).count() as u64;
        self.finish(blocks)?;
        Ok((TxnStatus::Aborted, Some(reason)))
    }

    /// Tear down sigma and release B_T.
    fn finish(&mut self, blocks: &[BlockRef]) -> Result<(), Halt> {
        let n = blocks.len() as u64;
        self.ops += n * (n - 1) / 2;
        self.fed.release_blocks(blocks, self.txn.id)?;
        self.ops += n;
        self.messages += n;
        Ok(())
    }
}

fn rollback(fed: &mut Federation, wal: &Wal, txn: TxnId, clock: &mut Clock) -> Result<usize, Halt> {
    recovery::rollback_txn(fed, wal, txn, &mut || clock.step())
}
