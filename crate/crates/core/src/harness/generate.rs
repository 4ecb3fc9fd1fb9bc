//! Random scenarios and complexes for property suites. Every draw comes
//! from [`SimRng`], so a seed names one instance exactly.

use std::collections::BTreeSet;

use super::rng::SimRng;
use super::scenario::{ChainSpec, FailureSpec, ForkSpec, Protocol, Scenario, TxnSpec};
use crate::chain::{AssetId, AssetUpdate, BlockRef, ChainId, PartyId, TxnId};
use crate::engine::{FaceFailure, FailurePlan};
use crate::simplicial::{Simplex, SimplicialComplex};
use crate::topology::TopologyMode;
use crate::transaction::{CrossChainTransaction, SubTransaction};

const PARTIES: [&str; 4] = ["p0", "p1", "p2", "p3"];

/// Between `lo` and `hi` distinct indices below `len`, ascending.
fn pick(rng: &mut SimRng, len: usize, lo: u64, hi: u64) -> Vec<usize> {
    let k = rng.range(lo, hi) as usize;
    let mut pool: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(len) {
        out.push(pool.swap_remove(rng.index(pool.len())));
    }
    out.sort_unstable();
    out
}

/// A random federation: 2 to 4 chains, optional forks and replicas,
/// balances for up to four parties, and up to three TopoCBT transactions,
/// most of them carrying a failure plan.
pub fn random_scenario(rng: &mut SimRng) -> Scenario {
    let mode = if rng.chance(0.5) { TopologyMode::Abstract } else { TopologyMode::Replicated };
    let chains: Vec<ChainSpec> = (1..=rng.range(2, 4) as u32)
        .map(|id| {
            let length = rng.range(2, 5) as u32;
            let mut forks = vec![];
            if rng.chance(0.3) {
                forks.push(ForkSpec { height: rng.range(1, length as u64) as u32, count: 1, blocks: rng.range(1, 2) as u32 });
            }
            let balances = pick(rng, PARTIES.len(), 1, 3)
                .into_iter()
                .map(|p| (PartyId::new(PARTIES[p]), AssetId::new(format!("x{id}")), rng.range(0, 20)))
                .collect();
            ChainSpec { id, replicas: rng.range(1, 2) as u32, length, forks, balances }
        })
        .collect();

    let mut txns = vec![];
    let mut failures = vec![];
    for id in 1..=rng.range(1, 3) {
        let parties: Vec<PartyId> =
            pick(rng, PARTIES.len(), 2, 4).into_iter().map(|p| PartyId::new(PARTIES[p])).collect();
        let blocks: BTreeSet<BlockRef> = pick(rng, chains.len(), 1, chains.len() as u64)
            .into_iter()
            .map(|c| {
                let spec = &chains[c];
                BlockRef::new(spec.id, rng.range(0, spec.length as u64) as u32, 0)
            })
            .collect();
        let block_list: Vec<BlockRef> = blocks.iter().copied().collect();
        let subs: Vec<SubTransaction> = (0..rng.range(1, 3))
            .map(|_| {
                let face: BTreeSet<BlockRef> = pick(rng, block_list.len(), 1, block_list.len() as u64)
                    .into_iter()
                    .map(|i| block_list[i])
                    .collect();
                let face_list: Vec<BlockRef> = face.iter().copied().collect();
                let updates = (0..rng.range(0, 3))
                    .map(|_| {
                        let at = face_list[rng.index(face_list.len())];
                        let ends = pick(rng, parties.len(), 2, 2);
                        let (from, to) = if rng.chance(0.5) { (ends[0], ends[1]) } else { (ends[1], ends[0]) };
                        let u = AssetUpdate {
                            owner_from: parties[from].clone(),
                            owner_to: parties[to].clone(),
                            asset: AssetId::new(format!("x{}", at.chain.0)),
                            amount: rng.range(1, 15),
                        };
                        (at, u)
                    })
                    .collect();
                SubTransaction { face, updates }
            })
            .collect();
        let faces = subs.len() as u64;
        let txn = CrossChainTransaction { id: TxnId(id), parties, blocks, sub_transactions: subs };
        if rng.chance(0.7) {
            failures.push(random_failure(rng, &txn, faces));
        }
        txns.push(TxnSpec { txn, protocol: None });
    }

    Scenario {
        name: "generated".into(),
        mode,
        protocol: Protocol::TopoCbt,
        chains,
        txns,
        failures,
        ..Scenario::default()
    }
}

fn random_failure(rng: &mut SimRng, txn: &CrossChainTransaction, faces: u64) -> FailureSpec {
    let mut spec = FailureSpec { txn: txn.id.0, ..FailureSpec::default() };
    let plan: &mut FailurePlan = &mut spec.plan;
    let face = rng.range(0, faces - 1) as usize;
    match rng.range(0, 6) {
        0 => {
            plan.faces.insert(face, FaceFailure::UpdateFailure);
        }
        1 => {
            plan.faces.insert(face, FaceFailure::CrashBeforeCommit);
        }
        2 => {
            plan.faces.insert(face, FaceFailure::CrashAfterUndo);
        }
        3 => plan.crash_step = Some(rng.range(0, 12) as u32),
        4 => plan.walk_away = Some(txn.parties[rng.index(txn.parties.len())].clone()),
        5 => {
            let chains: Vec<ChainId> = txn.chains().into_iter().collect();
            plan.vote_abort.insert(chains[rng.index(chains.len())]);
        }
        _ => spec.random_update_failure = Some(0.3),
    }
    spec
}

/// Closure of up to eight random simplices on at most `max_vertices`
/// vertices, none above `max_dim`.
pub fn random_complex(rng: &mut SimRng, max_vertices: u32, max_dim: usize) -> SimplicialComplex {
    let nv = rng.range(1, max_vertices as u64) as usize;
    let generators: Vec<Simplex> = (0..rng.range(1, 8))
        .map(|_| {
            let ids: Vec<u32> = pick(rng, nv, 1, (max_dim as u64 + 1).min(nv as u64)).into_iter().map(|v| v as u32).collect();
            Simplex::from_ids(&ids).expect("distinct sorted ids")
        })
        .collect();
    SimplicialComplex::from_generators(&generators).expect("generators are small")
}
