//! Simplicial complexes built from a federation and its in-flight
//! transactions.
//!
//! Every block becomes one vertex (or one simplex over its replicas in
//! [`TopologyMode::Replicated`]). Chain adjacency and fork stitching give
//! structural edges; each transaction contributes one simplex spanning all
//! live blocks at the heights it references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::chain::{BlockRef, ChainId, Federation, TxnId};
use crate::simplicial::{BettiVector, Simplex, SimplexError, SimplicialComplex, VertexId};
use crate::transaction::CrossChainTransaction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopologyMode {
    /// Each chain is a path of single vertices.
    #[default]
    Abstract,
    /// Each block is a simplex over its chain's replicas.
    Replicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildOptions {
    pub mode: TopologyMode,
    /// Keep only blocks within this many heights of a referenced height.
    /// Chains no transaction references are dropped. `None` keeps every
    /// live block.
    pub window: Option<u32>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown chain {0}")]
    UnknownChain(ChainId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockRef),
    #[error("block {0} is on a dead branch")]
    DeadBlock(BlockRef),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Block-to-vertex numbering for one build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VertexMap {
    by_block: BTreeMap<BlockRef, Vec<VertexId>>,
    by_vertex: Vec<(BlockRef, u32)>,
}

impl VertexMap {
    /// Numbers `blocks` in canonical (chain, height, branch, replica) order.
    /// In replicated mode the lowest live branch at each height carries the
    /// replica copies; fork siblings get one vertex each.
    fn new(fed: &Federation, blocks: &BTreeSet<BlockRef>, mode: TopologyMode) -> Self {
        let mut map = VertexMap::default();
        let mut last_slot: Option<(ChainId, u32)> = None;
        for b in blocks {
            let first_at_height = last_slot != Some((b.chain, b.height));
            last_slot = Some((b.chain, b.height));
            let copies = match mode {
                TopologyMode::Replicated if first_at_height => {
                    fed.chain(b.chain).map(|c| c.replicas()).unwrap_or(1)
                }
                _ => 1,
            };
            let ids = (0..copies)
                .map(|r| {
                    map.by_vertex.push((*b, r));
                    VertexId(map.by_vertex.len() as u32 - 1)
                })
                .collect();
            map.by_block.insert(*b, ids);
        }
        map
    }

    pub fn vertices_of(&self, b: &BlockRef) -> Option<&[VertexId]> {
        self.by_block.get(b).map(Vec::as_slice)
    }

    /// Block and replica index behind a vertex.
    pub fn block_of(&self, v: VertexId) -> Option<(BlockRef, u32)> {
        self.by_vertex.get(v.0 as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.by_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_vertex.is_empty()
    }

    fn primary(&self, b: &BlockRef) -> Option<VertexId> {
        self.by_block.get(b).map(|v| v[0])
    }
}

/// Outcome of [`TaggedComplex::teardown`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Teardown {
    Removed(usize),
    UnknownTxn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedComplex {
    pub complex: SimplicialComplex,
    /// Closure of the chain-structural generators.
    pub structural: BTreeSet<Simplex>,
    pub transactional: BTreeMap<TxnId, Simplex>,
    pub vertices: VertexMap,
}

impl TaggedComplex {
    pub fn betti_numbers(&self) -> BettiVector {
        self.complex.betti_numbers()
    }

    /// Removes the transaction simplex and every face of it that is neither
    /// structural nor shared with another transaction's simplex.
    pub fn teardown(&mut self, txn: TxnId) -> Teardown {
        let Some(sigma) = self.transactional.remove(&txn) else {
            log::info!("teardown: transaction {txn} has no simplex in this complex; nothing removed");
            return Teardown::UnknownTxn;
        };
        let before = self.complex.len();
        let structural = &self.structural;
        let others: Vec<&Simplex> = self.transactional.values().collect();
        self.complex.retain(|s| {
            !s.is_face_of(&sigma) || structural.contains(s) || others.iter().any(|o| s.is_face_of(o))
        });
        debug_assert!(self.complex.is_valid());
        Teardown::Removed(before - self.complex.len())
    }

    /// One tag per member, in the order [`write_complex`](crate::simplicial::text::write_complex)
    /// emits them: `structural` or `txn:<id>` (lowest id owning the simplex).
    pub fn tag_lines(&self) -> String {
        let mut out = String::new();
        for s in self.complex.iter() {
            if self.structural.contains(s) {
                out.push_str("structural\n");
                continue;
            }
            match self.transactional.iter().find(|(_, t)| s.is_face_of(t)) {
                Some((id, _)) => writeln!(out, "txn:{id}").expect("write to String"),
                None => out.push_str("untagged\n"),
            }
        }
        out
    }
}

/// All live blocks at the heights `txn` references: the blocks themselves
/// plus every live fork sibling.
pub fn expand_blocks(fed: &Federation, txn: &CrossChainTransaction) -> Result<BTreeSet<BlockRef>, TopologyError> {
    let mut out = BTreeSet::new();
    for b in &txn.blocks {
        let chain = fed.chain(b.chain).map_err(|_| TopologyError::UnknownChain(b.chain))?;
        if chain.block(b).is_none() {
            return Err(TopologyError::UnknownBlock(*b));
        }
        let live = chain.live_blocks_at(b.height);
        if !live.contains(b) {
            return Err(TopologyError::DeadBlock(*b));
        }
        out.extend(live);
    }
    Ok(out)
}

/// Blocks entering a build, by the window rule of [`BuildOptions`].
fn included_blocks(
    fed: &Federation,
    txns: &[&CrossChainTransaction],
    window: Option<u32>,
) -> Result<BTreeSet<BlockRef>, TopologyError> {
    let mut referenced: BTreeMap<ChainId, BTreeSet<u32>> = BTreeMap::new();
    for t in txns {
        for b in expand_blocks(fed, t)? {
            referenced.entry(b.chain).or_default().insert(b.height);
        }
    }
    let mut out = BTreeSet::new();
    for chain in fed.chains() {
        let live = chain.live_blocks();
        match window {
            None => out.extend(live),
            Some(r) => {
                let Some(heights) = referenced.get(&chain.id()) else { continue };
                out.extend(live.into_iter().filter(|b| heights.iter().any(|h| b.height.abs_diff(*h) <= r)));
            }
        }
    }
    Ok(out)
}

/// Structural generators: one simplex per block over its vertices, one edge
/// per parent link, and one edge from each live fork tip to the canonical
/// successor of its fork base.
fn structural_generators(fed: &Federation, blocks: &BTreeSet<BlockRef>, map: &VertexMap) -> Vec<Simplex> {
    let mut out = Vec::new();
    let edge = |a: &BlockRef, b: &BlockRef| -> Option<Simplex> {
        let (u, v) = (map.primary(a)?, map.primary(b)?);
        Simplex::from_unsorted([u, v]).ok()
    };
    for b in blocks {
        out.push(Simplex::from_unsorted(map.by_block[b].iter().copied()).expect("distinct ids"));
        if let Some(parent) = fed.block(b).and_then(|blk| blk.parent) {
            out.extend(edge(&parent, b));
        }
    }
    for chain in fed.chains() {
        let canonical = chain.canonical_path();
        for (label, state) in chain.branches() {
            if !state.live || label == chain.canonical_branch() {
                continue;
            }
            let (Some(base), Some(tip)) = (state.base, state.tip) else { continue };
            if canonical.get(base.height as usize) != Some(&base) {
                continue;
            }
            if let Some(succ) = canonical.get(tip.height as usize + 1) {
                out.extend(edge(&tip, succ));
            }
        }
    }
    out
}

/// Builds the complex of `fed` with the given transactions in flight.
pub fn build_federation_complex(
    fed: &Federation,
    txns: &[&CrossChainTransaction],
    opts: BuildOptions,
) -> Result<TaggedComplex, TopologyError> {
    let blocks = included_blocks(fed, txns, opts.window)?;
    let vertices = VertexMap::new(fed, &blocks, opts.mode);
    let generators = structural_generators(fed, &blocks, &vertices);
    let mut complex = SimplicialComplex::from_generators(&generators)?;
    let structural: BTreeSet<Simplex> = complex.iter().cloned().collect();
    let mut transactional = BTreeMap::new();
    for t in txns {
        let sigma = simplex_over(&vertices, &expand_blocks(fed, t)?)?;
        complex.insert(&sigma)?;
        transactional.insert(t.id, sigma);
    }
    Ok(TaggedComplex { complex, structural, transactional, vertices })
}

fn simplex_over(map: &VertexMap, blocks: &BTreeSet<BlockRef>) -> Result<Simplex, TopologyError> {
    let mut ids = Vec::new();
    for b in blocks {
        ids.extend_from_slice(map.vertices_of(b).ok_or(TopologyError::UnknownBlock(*b))?);
    }
    Ok(Simplex::from_unsorted(ids)?)
}

/// The simplex over all of `txn`'s (expanded) blocks, numbered as in a full
/// build of `fed`.
pub fn transaction_simplex(
    fed: &Federation,
    txn: &CrossChainTransaction,
    mode: TopologyMode,
) -> Result<Simplex, TopologyError> {
    let expanded = expand_blocks(fed, txn)?;
    let all = included_blocks(fed, &[], None)?;
    let map = VertexMap::new(fed, &all, mode);
    simplex_over(&map, &expanded)
}

/// Dimension predicted from replica and fork counts: the sum over
/// referenced chains of (replicas contributing vertices + extra live
/// branches at the referenced height), minus one.
pub fn expected_transaction_dimension(
    fed: &Federation,
    txn: &CrossChainTransaction,
    mode: TopologyMode,
) -> Result<isize, TopologyError> {
    let mut total = 0isize;
    for (chain_id, height) in txn.heights() {
        let chain = fed.chain(chain_id).map_err(|_| TopologyError::UnknownChain(chain_id))?;
        let m = match mode {
            TopologyMode::Abstract => 1,
            TopologyMode::Replicated => chain.replicas() as isize,
        };
        total += m + chain.fork_count_at(height) as isize;
    }
    Ok(total - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{AssetUpdate, Branch, Chain, PartyId};
    use crate::transaction::SubTransaction;

    fn path_chain(id: u32, len: u32, replicas: u32) -> Chain {
        let mut c = Chain::new(ChainId(id), replicas, vec![]).unwrap();
        for _ in 0..len {
            c.append_block(Branch::MAIN, vec![]).unwrap();
        }
        c
    }

    fn txn(id: u64, blocks: &[BlockRef]) -> CrossChainTransaction {
        CrossChainTransaction {
            id: TxnId(id),
            parties: vec![PartyId::new("a"), PartyId::new("b")],
            blocks: blocks.iter().copied().collect(),
            sub_transactions: vec![],
        }
    }

    /// Two chains forked at height 5, each fork one block long and followed
    /// on main by a block at height 6.
    fn two_forks() -> Federation {
        let mut fed = Federation::new();
        for id in 1..=2 {
            let mut c = path_chain(id, 4, 1);
            let fork = c.spawn_fork(5).unwrap();
            c.append_block(Branch::MAIN, vec![]).unwrap();
            c.append_block(fork, vec![]).unwrap();
            c.append_block(Branch::MAIN, vec![]).unwrap();
            c.append_block(Branch::MAIN, vec![]).unwrap();
            fed.add_chain(c).unwrap();
        }
        fed
    }

    #[test]
    fn disjoint_paths_count_components() {
        let mut fed = Federation::new();
        for id in 1..=3 {
            fed.add_chain(path_chain(id, 4, 1)).unwrap();
        }
        let t = build_federation_complex(&fed, &[], BuildOptions::default()).unwrap();
        assert_eq!(t.betti_numbers().0, vec![3, 0]);
        assert!(t.complex.is_valid());
    }

    #[test]
    fn two_party_fork_transaction_is_a_tetrahedron() {
        let fed = two_forks();
        let t = txn(1, &[BlockRef::new(1, 5, 0), BlockRef::new(2, 5, 0)]);
        let sigma = transaction_simplex(&fed, &t, TopologyMode::Abstract).unwrap();
        assert_eq!(sigma.dimension(), 3);
        assert_eq!(expected_transaction_dimension(&fed, &t, TopologyMode::Abstract).unwrap(), 3);

        let opts = BuildOptions { mode: TopologyMode::Abstract, window: Some(1) };
        let tagged = build_federation_complex(&fed, &[&t], opts).unwrap();
        let c = &tagged.complex;
        assert_eq!((c.count_of_dim(0), c.count_of_dim(1), c.count_of_dim(2), c.count_of_dim(3)), (8, 14, 4, 1));
        assert_eq!(c.euler_characteristic(), -3);
        assert_eq!(tagged.betti_numbers().0, vec![1, 4, 0, 0]);

        let full = build_federation_complex(&fed, &[&t], BuildOptions::default()).unwrap();
        assert_eq!(full.betti_numbers().0, vec![1, 4, 0, 0]);
    }

    #[test]
    fn teardown_restores_transaction_free_build() {
        let fed = two_forks();
        let t1 = txn(1, &[BlockRef::new(1, 5, 0), BlockRef::new(2, 5, 0)]);
        let t2 = txn(2, &[BlockRef::new(1, 2, 0), BlockRef::new(2, 6, 0)]);
        let mut tagged = build_federation_complex(&fed, &[&t1, &t2], BuildOptions::default()).unwrap();
        let bare = build_federation_complex(&fed, &[], BuildOptions::default()).unwrap();
        assert!(matches!(tagged.teardown(TxnId(1)), Teardown::Removed(n) if n > 0));
        assert!(tagged.complex.is_valid());
        assert_eq!(tagged.teardown(TxnId(1)), Teardown::UnknownTxn);
        assert!(matches!(tagged.teardown(TxnId(2)), Teardown::Removed(1)));
        assert_eq!(tagged.complex, bare.complex);
        assert!(bare.structural.iter().all(|s| tagged.complex.contains(s)));
    }

    #[test]
    fn replicated_mode_adds_replica_vertices() {
        let mut fed = Federation::new();
        fed.add_chain(path_chain(1, 3, 2)).unwrap();
        fed.add_chain(path_chain(2, 3, 1)).unwrap();
        fed.add_chain(path_chain(3, 3, 1)).unwrap();
        let t = txn(1, &[BlockRef::new(1, 2, 0), BlockRef::new(2, 2, 0), BlockRef::new(3, 2, 0)]);
        let sigma = transaction_simplex(&fed, &t, TopologyMode::Replicated).unwrap();
        assert_eq!(sigma.len(), 4);
        assert_eq!(expected_transaction_dimension(&fed, &t, TopologyMode::Replicated).unwrap(), 3);
        let tagged = build_federation_complex(&fed, &[], BuildOptions { mode: TopologyMode::Replicated, window: None })
            .unwrap();
        assert_eq!(tagged.betti_numbers().get(0), 3);
        assert_eq!(tagged.betti_numbers().get(1), 0);
    }

    #[test]
    fn dead_and_unknown_blocks_are_rejected() {
        let mut fed = two_forks();
        let t = txn(1, &[BlockRef::new(1, 5, 1), BlockRef::new(2, 5, 0)]);
        fed.resolve_all_forks();
        assert_eq!(
            build_federation_complex(&fed, &[&t], BuildOptions::default()),
            Err(TopologyError::DeadBlock(BlockRef::new(1, 5, 1)))
        );
        let t = txn(2, &[BlockRef::new(1, 50, 0), BlockRef::new(2, 5, 0)]);
        assert_eq!(transaction_simplex(&fed, &t, TopologyMode::Abstract), Err(TopologyError::UnknownBlock(BlockRef::new(1, 50, 0))));
    }

    #[test]
    fn tags_follow_write_order() {
        let fed = two_forks();
        let mut t = txn(4, &[BlockRef::new(1, 5, 0), BlockRef::new(2, 5, 0)]);
        t.sub_transactions.push(SubTransaction {
            face: t.blocks.clone(),
            updates: vec![(BlockRef::new(1, 5, 0), AssetUpdate::new("a", "b", "X", 1))],
        });
        let tagged = build_federation_complex(&fed, &[&t], BuildOptions { mode: TopologyMode::Abstract, window: Some(0) })
            .unwrap();
        let tags = tagged.tag_lines();
        assert_eq!(tags.lines().count(), tagged.complex.len());
        assert!(tags.lines().all(|l| l == "structural" || l == "txn:4"));
        assert!(tags.lines().any(|l| l == "txn:4"));
    }
}
