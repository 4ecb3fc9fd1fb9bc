use super::{BaselineError, BaselineOutcome, BaselineStatus, SimClock};
use crate::chain::{Block, BlockRef, Chain, ChainId, Entry, Federation, LockError, TxnId, WitnessRecord};
use crate::engine::{FaceFailure, FailurePlan};
use crate::topology;
use crate::transaction::CrossChainTransaction;

/// Chain whose blocks carry two-phase-commit records, one per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessChain {
    chain: Chain,
}

impl Default for WitnessChain {
    fn default() -> Self {
        Self::new()
    }
}

impl WitnessChain {
    pub const CHAIN_ID: ChainId = ChainId(0);

    pub fn new() -> Self {
        Self { chain: Chain::new(Self::CHAIN_ID, 1, vec![]).expect("one replica") }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Appends `record`; returns the new block's encoded size.
    pub fn append(&mut self, record: WitnessRecord) -> usize {
        let r = self.chain.append_to_canonical(vec![Entry::Witness(record)]).expect("witness chain has no forks");
        self.chain.block(&r).expect("just appended").encode().len()
    }

    pub fn records(&self) -> impl Iterator<Item = &WitnessRecord> {
        self.chain.blocks().flat_map(|b: &Block| &b.payload).filter_map(|e| match e {
            Entry::Witness(w) => Some(w),
            _ => None,
        })
    }

    /// The global decision recorded for `txn`, if any.
    pub fn decision(&self, txn: TxnId) -> Option<&WitnessRecord> {
        self.records().find(|w| w.is_decision() && w.txn() == txn)
    }
}

/// Two-phase commit with the witness chain as coordinator log. Every
/// sub-transaction votes in the prepare phase; a yes vote is recorded on the
/// witness chain. Participants apply updates only after reading a global
/// commit from the witness chain. A coordinator crash after prepare leaves
/// every participant holding its locks.
pub fn ac3wn_execute(
    fed: &mut Federation,
    witness: &mut WitnessChain,
    txn: &CrossChainTransaction,
    plan: &FailurePlan,
    clock: &mut SimClock,
) -> Result<BaselineOutcome, BaselineError> {
    txn.validate()?;
    let blocks: Vec<BlockRef> = topology::expand_blocks(fed, txn)?.into_iter().collect();
    let n = blocks.len() as u64;
    let mut ops = n;
    let mut messages = n;
    let mut space = 0usize;
    let outcome = |status, applied_updates, messages, ops, space, now| BaselineOutcome {
        txn: txn.id,
        status,
        worse_off: Default::default(),
        applied_updates,
        messages,
        primitive_ops: ops,
        space_bytes: space,
        finished_at: now,
    };
    match fed.lock_blocks(&blocks, txn.id) {
        Ok(_) => {}
        Err(LockError::Conflict { block, holder }) => {
            log::info!("txn {}: lock conflict on {block} held by {holder}", txn.id);
            return Ok(outcome(BaselineStatus::Aborted, 0, messages, ops, space, clock.now));
        }
        Err(e) => return Err(e.into()),
    }

    // Prepare: each sub-transaction's participants vote.
    let mut scratch = fed.clone();
    let mut all_yes = true;
    for (i, sub) in txn.sub_transactions.iter().enumerate() {
        messages += 2 * sub.face.len() as u64;
        ops += sub.face.len() as u64;
        clock.now += clock.jitter_delay();
        let refuses = sub.updates.iter().any(|(b, u)| {
            plan.vote_abort.contains(&b.chain)
                || plan.walk_away.as_ref() == Some(&u.owner_from)
                || plan.late.get(&u.owner_from).is_some_and(|d| *d > clock.timelock)
        });
        let funded = sub
            .updates_by_chain()
            .iter()
            .all(|(chain, ups)| scratch.apply_transfers(*chain, ups).is_ok());
        let yes = !refuses && funded && plan.faces.get(&i) != Some(&FaceFailure::UpdateFailure);
        if !yes {
            log::info!("txn {}: sub-transaction {i} votes abort", txn.id);
            all_yes = false;
            break;
        }
        space += witness.append(WitnessRecord::Prepared { txn: txn.id, sub: i as u32 });
        ops += 1;
    }

    if plan.witness_crash {
        clock.now += clock.horizon;
        log::info!("txn {}: witness down after prepare; {} lock(s) held at tick {}", txn.id, n, clock.now);
        return Ok(outcome(BaselineStatus::Blocked, 0, messages, ops, space, clock.now));
    }

    // Decide: the coordinator checks every vote against the witness log.
    let m = txn.sub_transactions.len() as u64;
    let prepared = witness
        .records()
        .filter(|w| matches!(w, WitnessRecord::Prepared { txn: t, .. } if *t == txn.id))
        .count() as u64;
    ops += m * prepared.max(1);
    let commit = all_yes;
    let decision = if commit { WitnessRecord::GlobalCommit(txn.id) } else { WitnessRecord::GlobalAbort(txn.id) };
    space += witness.append(decision);
    ops += 1;
    messages += n;

    let mut applied = 0;
    for sub in &txn.sub_transactions {
        for (chain, ups) in sub.updates_by_chain() {
            // Each participant reads the decision off the witness chain.
            ops += 1;
            if matches!(witness.decision(txn.id), Some(WitnessRecord::GlobalCommit(_))) {
                fed.apply_transfers(chain, &ups)?;
                ops += ups.len() as u64;
                applied += ups.len();
            }
        }
    }
    fed.release_blocks(&blocks, txn.id)?;
    ops += n;
    messages += n;
    let status = if commit { BaselineStatus::Committed } else { BaselineStatus::Aborted };
    Ok(outcome(status, applied, messages, ops, space, clock.now))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests::car_trading;

    #[test]
    fn no_failures_commits_with_a_recorded_decision() {
        let (mut fed, txn) = car_trading();
        let mut w = WitnessChain::new();
        let out = ac3wn_execute(&mut fed, &mut w, &txn, &FailurePlan::none(), &mut SimClock::new(1)).unwrap();
        assert_eq!(out.status, BaselineStatus::Committed);
        assert_eq!(out.applied_updates, 3);
        assert_eq!(w.decision(txn.id), Some(&WitnessRecord::GlobalCommit(txn.id)));
        assert_eq!(w.records().count(), 4);
        assert!(fed.held_locks().is_empty());
        assert!(w.chain().is_intact());
    }

    #[test]
    fn witness_crash_blocks_with_locks_held() {
        let (mut fed, txn) = car_trading();
        let before = fed.state_digest();
        let mut w = WitnessChain::new();
        let plan = FailurePlan { witness_crash: true, ..FailurePlan::none() };
        let mut clock = SimClock::new(1);
        let out = ac3wn_execute(&mut fed, &mut w, &txn, &plan, &mut clock).unwrap();
        assert_eq!(out.status, BaselineStatus::Blocked);
        assert!(out.finished_at >= clock.horizon);
        assert_eq!(fed.held_locks().len(), 3);
        assert_eq!(w.decision(txn.id), None);
        assert_eq!(fed.state_digest(), before);
    }

    #[test]
    fn abort_vote_records_global_abort() {
        let (mut fed, txn) = car_trading();
        let before = fed.state_digest();
        let mut w = WitnessChain::new();
        let plan = FailurePlan { vote_abort: [ChainId(3)].into(), ..FailurePlan::none() };
        let out = ac3wn_execute(&mut fed, &mut w, &txn, &plan, &mut SimClock::new(1)).unwrap();
        assert_eq!(out.status, BaselineStatus::Aborted);
        assert_eq!(w.decision(txn.id), Some(&WitnessRecord::GlobalAbort(txn.id)));
        assert_eq!(fed.state_digest(), before);
        assert!(fed.held_locks().is_empty());
    }

    #[test]
    fn witness_space_grows_with_faces() {
        let (fed, txn) = car_trading();
        let space = |faces: usize| {
            let mut t = txn.clone();
            t.sub_transactions = (0..faces).map(|i| txn.sub_transactions[i % 3].clone()).collect();
            // Keep every face funded: only the first pass moves assets.
            for s in t.sub_transactions.iter_mut().skip(3) {
                s.updates.clear();
            }
            let mut w = WitnessChain::new();
            ac3wn_execute(&mut fed.clone(), &mut w, &t, &FailurePlan::none(), &mut SimClock::new(1)).unwrap().space_bytes
        };
        let (s3, s6, s9) = (space(3), space(6), space(9));
        assert!(s3 < s6 && s6 < s9);
        assert_eq!(s9 - s6, s6 - s3);
    }
}
