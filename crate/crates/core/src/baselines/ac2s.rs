use std::collections::BTreeSet;

use super::{holdings, intended_holdings, worse_off, BaselineError, BaselineOutcome, BaselineStatus, SimClock};
use crate::chain::{AssetUpdate, ChainId, Federation, PartyId};
use crate::engine::{FaceFailure, FailurePlan};
use crate::transaction::CrossChainTransaction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapState {
    Offered,
    Claimed,
    Expired,
}

/// One leg of a two-party swap: `update` moves on `chain` once claimed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapStep {
    pub chain: ChainId,
    pub update: AssetUpdate,
    pub deadline: u64,
    pub state: SwapState,
    /// Index of the transaction update this leg helps carry out.
    source: usize,
}

/// Two-party swap between the hub and one counterparty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Swap {
    pub hub: PartyId,
    pub counterparty: PartyId,
    pub legs: Vec<SwapStep>,
    /// Sub-transactions whose last leg sits in this swap.
    closes_faces: BTreeSet<usize>,
}

/// Splits the transaction into pairwise swaps through a hub, its first
/// declared party. The hub gives each counterparty what it is owed and
/// receives what the counterparty sends, so a transfer between two non-hub
/// parties passes through the hub. Swaps run in declared party order.
pub fn decompose(fed: &Federation, txn: &CrossChainTransaction) -> Result<Vec<Swap>, BaselineError> {
    let not_decomposable = |reason: String| BaselineError::NotDecomposable { txn: txn.id, reason };
    let hub = &txn.parties[0];
    let mut swaps: Vec<Swap> = txn.parties[1..]
        .iter()
        .map(|p| Swap { hub: hub.clone(), counterparty: p.clone(), legs: Vec::new(), closes_faces: BTreeSet::new() })
        .collect();
    let slot = |p: &PartyId| txn.parties[1..].iter().position(|q| q == p).expect("validated party");
    let mut source = 0;
    for (face, sub) in txn.sub_transactions.iter().enumerate() {
        let mut last_slot = None;
        for (block, u) in &sub.updates {
            if u.owner_from == u.owner_to {
                return Err(not_decomposable(format!("sub-transaction {face} moves {} to itself", u.owner_from)));
            }
            let leg = |from: &PartyId, to: &PartyId| SwapStep {
                chain: block.chain,
                update: AssetUpdate {
                    owner_from: from.clone(),
                    owner_to: to.clone(),
                    asset: u.asset.clone(),
                    amount: u.amount,
                },
                deadline: 0,
                state: SwapState::Offered,
                source,
            };
            let mut place = |p: &PartyId, l: SwapStep| {
                let i = slot(p);
                swaps[i].legs.push(l);
                last_slot = last_slot.max(Some(i));
            };
            if &u.owner_from == hub {
                place(&u.owner_to, leg(hub, &u.owner_to));
            } else if &u.owner_to == hub {
                place(&u.owner_from, leg(&u.owner_from, hub));
            } else {
                place(&u.owner_from, leg(&u.owner_from, hub));
                place(&u.owner_to, leg(hub, &u.owner_to));
            }
            source += 1;
        }
        if let Some(i) = last_slot {
            swaps[i].closes_faces.insert(face);
        }
    }
    swaps.retain(|s| !s.legs.is_empty());
    let mut scratch = fed.clone();
    for s in &swaps {
        for l in &s.legs {
            scratch
                .apply_transfers(l.chain, std::slice::from_ref(&l.update))
                .map_err(|e| not_decomposable(format!("swap {}<->{}: {e}", s.hub, s.counterparty)))?;
        }
    }
    Ok(swaps)
}

/// Runs the swaps one after another. A swap completes only if both parties
/// act before its deadline; otherwise its escrowed legs are refunded and
/// the run stops, leaving earlier swaps in place.
pub fn ac2s_execute(
    fed: &mut Federation,
    txn: &CrossChainTransaction,
    plan: &FailurePlan,
    clock: &mut SimClock,
) -> Result<BaselineOutcome, BaselineError> {
    txn.validate()?;
    let mut swaps = decompose(fed, txn)?;
    let before = holdings(fed, &txn.parties);
    let intended = intended_holdings(fed, txn);
    let mut ops = 0u64;
    let mut messages = 0u64;
    let mut completed = 0usize;
    let mut failed = false;

    let faces = txn.sub_transactions.len() as u64;
    let cycle = swaps.len() as u64 + 1;
    for swap in swaps.iter_mut() {
        // Deadline: every sub-transaction's path around the party cycle
        // bounds how long this swap may stay open.
        ops += faces * cycle;
        let start = clock.now;
        let deadline = start + clock.timelock;
        messages += 4;
        let mut finish = start;
        let mut in_time = true;
        for party in [&swap.hub, &swap.counterparty] {
            let jitter = clock.jitter_delay();
            if plan.walk_away.as_ref() == Some(party) {
                in_time = false;
                continue;
            }
            let acted = start + plan.late.get(party).copied().unwrap_or(0) + jitter;
            if acted > deadline {
                in_time = false;
            }
            finish = finish.max(acted);
        }
        if swap.closes_faces.iter().any(|f| plan.faces.get(f) == Some(&FaceFailure::UpdateFailure)) {
            in_time = false;
        }
        if in_time {
            let mut scratch = fed.clone();
            for leg in &swap.legs {
                ops += 1;
                if scratch.apply_transfers(leg.chain, std::slice::from_ref(&leg.update)).is_err() {
                    in_time = false;
                    break;
                }
            }
            if in_time {
                *fed = scratch;
            }
        }
        for leg in &mut swap.legs {
            leg.deadline = deadline;
            leg.state = if in_time { SwapState::Claimed } else { SwapState::Expired };
        }
        if !in_time {
            log::info!("txn {}: swap {}<->{} expired at tick {deadline}", txn.id, swap.hub, swap.counterparty);
            clock.now = deadline + 1;
            failed = true;
            break;
        }
        clock.now = finish;
        completed += 1;
    }

    let status = match (failed, completed) {
        (false, _) => BaselineStatus::Committed,
        (true, 0) => BaselineStatus::Aborted,
        (true, _) => BaselineStatus::PartialCommit,
    };
    let after = holdings(fed, &txn.parties);
    let mut done_sources: BTreeSet<usize> = BTreeSet::new();
    let mut open_sources: BTreeSet<usize> = BTreeSet::new();
    for leg in swaps.iter().flat_map(|s| &s.legs) {
        if leg.state == SwapState::Claimed {
            done_sources.insert(leg.source);
        } else {
            open_sources.insert(leg.source);
        }
    }
    Ok(BaselineOutcome {
        txn: txn.id,
        status,
        worse_off: worse_off(&before, intended.as_ref(), &after),
        applied_updates: done_sources.difference(&open_sources).count(),
        messages,
        primitive_ops: ops,
        space_bytes: 0,
        finished_at: clock.now,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests::car_trading;

    fn held(fed: &Federation, chain: u32, party: &str, asset: &str) -> u64 {
        fed.chain(ChainId(chain)).unwrap().balances().get(&PartyId::new(party), &crate::chain::AssetId::new(asset))
    }

    #[test]
    fn car_trading_splits_through_alice() {
        let (fed, txn) = car_trading();
        let swaps = decompose(&fed, &txn).unwrap();
        let pairs: Vec<_> = swaps.iter().map(|s| (s.hub.0.as_str(), s.counterparty.0.as_str())).collect();
        assert_eq!(pairs, vec![("Alice", "Bob"), ("Alice", "Cindy")]);
        // Bob's BTC reaches Cindy by way of Alice.
        let legs: Vec<String> = swaps[0].legs.iter().map(|l| l.update.to_string()).collect();
        assert_eq!(legs, vec!["Alice>Bob:ETH:10", "Bob>Alice:BTC:1"]);
    }

    #[test]
    fn no_failures_commits() {
        let (mut fed, txn) = car_trading();
        let out = ac2s_execute(&mut fed, &txn, &FailurePlan::none(), &mut SimClock::new(1)).unwrap();
        assert_eq!(out.status, BaselineStatus::Committed);
        assert!(out.worse_off.is_empty());
        assert_eq!(held(&fed, 3, "Alice", "TITLE"), 1);
        assert_eq!(held(&fed, 2, "Cindy", "BTC"), 1);
    }

    #[test]
    fn cindy_walking_away_leaves_alice_with_btc() {
        let (mut fed, txn) = car_trading();
        let plan = FailurePlan { walk_away: Some(PartyId::new("Cindy")), ..FailurePlan::none() };
        let out = ac2s_execute(&mut fed, &txn, &plan, &mut SimClock::new(1)).unwrap();
        assert_eq!(out.status, BaselineStatus::PartialCommit);
        assert_eq!(out.worse_off, [PartyId::new("Alice")].into());
        assert_eq!(out.applied_updates, 1);
        assert_eq!(held(&fed, 2, "Alice", "BTC"), 1);
        assert_eq!(held(&fed, 1, "Bob", "ETH"), 10);
        assert_eq!(held(&fed, 3, "Cindy", "TITLE"), 1);
    }

    #[test]
    fn late_party_expires_its_swap_only() {
        let (mut fed, txn) = car_trading();
        let plan = FailurePlan { late: [(PartyId::new("Cindy"), 50)].into(), ..FailurePlan::none() };
        let mut clock = SimClock::new(7);
        let out = ac2s_execute(&mut fed, &txn, &plan, &mut clock).unwrap();
        assert_eq!(out.status, BaselineStatus::PartialCommit);
        assert!(out.finished_at <= 2 * (clock.timelock + 1));
    }

    #[test]
    fn first_swap_failing_aborts_cleanly() {
        let (mut fed, txn) = car_trading();
        let before = fed.state_digest();
        let plan = FailurePlan { walk_away: Some(PartyId::new("Bob")), ..FailurePlan::none() };
        let out = ac2s_execute(&mut fed, &txn, &plan, &mut SimClock::new(1)).unwrap();
        assert_eq!(out.status, BaselineStatus::Aborted);
        assert_eq!(fed.state_digest(), before);
    }

    #[test]
    fn self_transfer_is_not_decomposable() {
        let (fed, mut txn) = car_trading();
        txn.sub_transactions[0].updates[0].1.owner_to = PartyId::new("Alice");
        assert!(matches!(decompose(&fed, &txn), Err(BaselineError::NotDecomposable { .. })));
    }
}
