use std::collections::{BTreeMap, BTreeSet};

use crate::chain::{ChainId, PartyId};
use crate::transaction::CrossChainTransaction;

/// Failure injected at one sub-transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaceFailure {
    /// The face's last update-bearing chain rejects its updates; earlier
    /// chains of the face have already applied theirs.
    UpdateFailure,
    /// The process stops after the face's updates are applied.
    CrashBeforeCommit,
    /// The process stops after the face's UNDO records are written.
    CrashAfterUndo,
}

/// Deterministic failure injection for one transaction. The engine reads
/// `faces` and `crash_step`; the party and witness fields drive the
/// baselines and are mapped onto faces for TopoCBT by
/// [`topocbt_faces`](FailurePlan::topocbt_faces).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailurePlan {
    /// Keyed by sub-transaction index.
    pub faces: BTreeMap<usize, FaceFailure>,
    /// Stop after this many durable steps (WAL appends and block appends).
    pub crash_step: Option<u32>,
    /// Party that never sends its asset.
    pub walk_away: Option<PartyId>,
    /// Party delay in ticks.
    pub late: BTreeMap<PartyId, u64>,
    /// The coordinator (AC3WN witness) stops after the prepare phase.
    pub witness_crash: bool,
    /// Chains whose participants vote abort.
    pub vote_abort: BTreeSet<ChainId>,
}

impl FailurePlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Face failures as TopoCBT sees them. A walk-away party or an abort
    /// vote makes the first face that needs that party or chain fail its
    /// update; a coordinator crash stops the process before commit. Late
    /// parties only delay TopoCBT, which has no deadlines.
    pub fn topocbt_faces(&self, txn: &CrossChainTransaction) -> BTreeMap<usize, FaceFailure> {
        let mut out = self.faces.clone();
        let first = |pred: &dyn Fn(usize) -> bool| (0..txn.sub_transactions.len()).find(|i| pred(*i));
        if let Some(p) = &self.walk_away {
            let hit = first(&|i| txn.sub_transactions[i].updates.iter().any(|(_, u)| &u.owner_from == p));
            if let Some(i) = hit {
                out.entry(i).or_insert(FaceFailure::UpdateFailure);
            }
        }
        if !self.vote_abort.is_empty() {
            let hit = first(&|i| txn.sub_transactions[i].updates.iter().any(|(b, _)| self.vote_abort.contains(&b.chain)));
            if let Some(i) = hit {
                out.entry(i).or_insert(FaceFailure::UpdateFailure);
            }
        }
        if self.witness_crash {
            if let Some(last) = txn.sub_transactions.len().checked_sub(1) {
                out.entry(last).or_insert(FaceFailure::CrashBeforeCommit);
            }
        }
        out
    }
}
