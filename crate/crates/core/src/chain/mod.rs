//! Hash-linked blockchains with fork branches, and the federation of chains
//! that cross-chain transactions run over.

mod balances;
mod block;
mod federation;
mod store;

use std::fmt;

pub use balances::{BalanceError, Balances};
pub use block::{Block, Entry, WitnessRecord};
pub use federation::{Federation, FederationError, LockError, LockGrant, LockRequest, LockStep};
pub use store::{BranchState, Chain, ChainError, TamperEvidence, TamperKind};

use sha2::{Digest as _, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChainId(pub u32);

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Branch label within one chain. `0` is the main branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Branch(pub u32);

impl Branch {
    pub const MAIN: Branch = Branch(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TxnId(pub u64);

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of a block: chain, height (0 is genesis) and branch.
///
/// The derived ordering is the global canonical order used for lock
/// acquisition and vertex numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockRef {
    pub chain: ChainId,
    pub height: u32,
    pub branch: Branch,
}

impl BlockRef {
    pub fn new(chain: u32, height: u32, branch: u32) -> Self {
        Self { chain: ChainId(chain), height, branch: Branch(branch) }
    }

    pub(crate) fn encode(&self, buf: &mut Vec<u8>) {
        crate::codec::put_u32(buf, self.chain.0);
        crate::codec::put_u32(buf, self.height);
        crate::codec::put_u32(buf, self.branch.0);
    }
}

impl fmt::Display for BlockRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.branch == Branch::MAIN {
            write!(f, "{}:{}", self.chain, self.height)
        } else {
            write!(f, "{}:{}:{}", self.chain, self.height, self.branch.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartyId(pub String);

impl PartyId {
    /// Source of the initial balances minted in genesis blocks.
    pub const GENESIS: &'static str = "@genesis";

    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn genesis() -> Self {
        Self(Self::GENESIS.to_string())
    }

    pub fn is_genesis(&self) -> bool {
        self.0 == Self::GENESIS
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssetId(pub String);

impl AssetId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A transfer of `amount` units of `asset` between two parties on one chain.
/// An amount of zero is a no-op.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssetUpdate {
    pub owner_from: PartyId,
    pub owner_to: PartyId,
    pub asset: AssetId,
    pub amount: u64,
}

impl AssetUpdate {
    pub fn new(from: &str, to: &str, asset: &str, amount: u64) -> Self {
        Self {
            owner_from: PartyId::new(from),
            owner_to: PartyId::new(to),
            asset: AssetId::new(asset),
            amount,
        }
    }

    pub fn mint(to: &str, asset: &str, amount: u64) -> Self {
        Self::new(PartyId::GENESIS, to, asset, amount)
    }
}

impl fmt::Display for AssetUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}:{}:{}", self.owner_from, self.owner_to, self.asset, self.amount)
    }
}

/// 256-bit SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}
