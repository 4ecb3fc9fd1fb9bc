//! Reference protocols TopoCBT is compared against: AC2S (pairwise
//! timelocked swaps) and AC3WN (two-phase commit coordinated through a
//! witness chain).

mod ac2s;
mod ac3wn;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use ac2s::{ac2s_execute, decompose, Swap, SwapState, SwapStep};
pub use ac3wn::{ac3wn_execute, WitnessChain};

use crate::chain::{AssetId, ChainId, Federation, FederationError, LockError, PartyId, TxnId};
use crate::topology::TopologyError;
use crate::transaction::{CrossChainTransaction, TxnError};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineStatus {
    Committed,
    Aborted,
    /// Some swaps completed, later ones did not (AC2S only).
    PartialCommit,
    /// Participants still hold locks at the blocking horizon (AC3WN only).
    Blocked,
}

impl fmt::Display for BaselineStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineStatus::Committed => "committed",
            BaselineStatus::Aborted => "aborted",
            BaselineStatus::PartialCommit => "partial_commit",
            BaselineStatus::Blocked => "blocked",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineOutcome {
    pub txn: TxnId,
    pub status: BaselineStatus,
    /// Parties whose final holdings match neither their starting nor their
    /// intended holdings.
    pub worse_off: BTreeSet<PartyId>,
    pub applied_updates: usize,
    pub messages: u64,
    pub primitive_ops: u64,
    pub space_bytes: usize,
    /// Simulation time when the run ended.
    pub finished_at: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error(transparent)]
    Malformed(#[from] TxnError),
    #[error("transaction {txn}: cannot be split into pairwise swaps: {reason}")]
    NotDecomposable { txn: TxnId, reason: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Federation(#[from] FederationError),
}

/// Shared simulation clock for the baselines. Each party action takes a
/// random delay in `0..=jitter` ticks, drawn from a ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct SimClock {
    pub now: u64,
    /// Deadline length of one swap step.
    pub timelock: u64,
    /// Locks still held this long after start count as blocked.
    pub horizon: u64,
    pub jitter: u64,
    rng: ChaCha8Rng,
}

impl SimClock {
    pub const DEFAULT_TIMELOCK: u64 = 10;
    pub const DEFAULT_JITTER: u64 = 2;

    pub fn new(seed: u64) -> Self {
        Self::with_params(seed, Self::DEFAULT_TIMELOCK, 10 * Self::DEFAULT_TIMELOCK, Self::DEFAULT_JITTER)
    }

    pub fn with_params(seed: u64, timelock: u64, horizon: u64, jitter: u64) -> Self {
        Self { now: 0, timelock, horizon, jitter, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Next delay: raw 64-bit output reduced modulo `jitter + 1`.
    pub fn jitter_delay(&mut self) -> u64 {
        let raw = self.rng.next_u64();
        if self.jitter == 0 {
            0
        } else {
            raw % (self.jitter + 1)
        }
    }
}

/// Holdings of each party across every chain.
pub type Holdings = BTreeMap<PartyId, BTreeMap<(ChainId, AssetId), u64>>;

pub fn holdings(fed: &Federation, parties: &[PartyId]) -> Holdings {
    let mut out: Holdings = parties.iter().map(|p| (p.clone(), BTreeMap::new())).collect();
    for chain in fed.chains() {
        for (asset, party, v) in chain.balances().iter() {
            if let Some(h) = out.get_mut(party) {
                h.insert((chain.id(), asset.clone()), v);
            }
        }
    }
    out
}

/// Holdings after applying every update of `txn` to `start`, or `None` if
/// some update is unfunded.
pub fn intended_holdings(fed: &Federation, txn: &CrossChainTransaction) -> Option<Holdings> {
    let mut fed = fed.clone();
    for (block, u) in txn.all_updates() {
        fed.apply_transfers(block.chain, std::slice::from_ref(u)).ok()?;
    }
    Some(holdings(&fed, &txn.parties))
}

pub fn worse_off(before: &Holdings, intended: Option<&Holdings>, after: &Holdings) -> BTreeSet<PartyId> {
    after
        .iter()
        .filter(|(p, h)| before.get(*p) != Some(h) && intended.and_then(|i| i.get(*p)) != Some(h))
        .map(|(p, _)| p.clone())
        .collect()
}
