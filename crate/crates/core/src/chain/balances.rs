use std::collections::BTreeMap;

use thiserror::Error;

use super::{AssetId, AssetUpdate, PartyId};
use crate::codec::{self, DecodeError, Reader};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BalanceError {
    #[error("{party} holds {held} {asset}, cannot transfer {wanted}")]
    Insufficient { party: PartyId, asset: AssetId, held: u64, wanted: u64 },
    #[error("asset {asset} totals differ between states ({left} vs {right})")]
    TotalsDiffer { asset: AssetId, left: u128, right: u128 },
}

/// Holdings keyed by (asset, party). Zero balances are never stored, so two
/// equal states always encode to the same bytes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Balances {
    held: BTreeMap<(AssetId, PartyId), u64>,
}

impl Balances {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, party: &PartyId, asset: &AssetId) -> u64 {
        self.held.get(&(asset.clone(), party.clone())).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AssetId, &PartyId, u64)> {
        self.held.iter().map(|((a, p), v)| (a, p, *v))
    }

    /// Applies a transfer. Transfers out of the genesis party mint.
    pub fn apply(&mut self, u: &AssetUpdate) -> Result<(), BalanceError> {
        if u.amount == 0 {
            return Ok(());
        }
        if !u.owner_from.is_genesis() {
            let held = self.get(&u.owner_from, &u.asset);
            if held < u.amount {
                return Err(BalanceError::Insufficient {
                    party: u.owner_from.clone(),
                    asset: u.asset.clone(),
                    held,
                    wanted: u.amount,
                });
            }
            self.set(u.owner_from.clone(), u.asset.clone(), held - u.amount);
        }
        let to = self.get(&u.owner_to, &u.asset);
        self.set(u.owner_to.clone(), u.asset.clone(), to + u.amount);
        Ok(())
    }

    /// Applies all transfers or none.
    pub fn apply_all<'a, I>(&mut self, updates: I) -> Result<(), BalanceError>
    where
        I: IntoIterator<Item = &'a AssetUpdate>,
    {
        let mut next = self.clone();
        for u in updates {
            next.apply(u)?;
        }
        *self = next;
        Ok(())
    }

    fn set(&mut self, party: PartyId, asset: AssetId, amount: u64) {
        if amount == 0 {
            self.held.remove(&(asset, party));
        } else {
            self.held.insert((asset, party), amount);
        }
    }

    pub fn totals(&self) -> BTreeMap<AssetId, u128> {
        let mut out = BTreeMap::new();
        for ((a, _), v) in &self.held {
            *out.entry(a.clone()).or_insert(0u128) += *v as u128;
        }
        out
    }

    /// Transfers that turn `self` into `target`, assuming per-asset totals
    /// agree. Surpluses are matched against deficits in (party) order.
    pub fn transfers_to(&self, target: &Balances) -> Result<Vec<AssetUpdate>, BalanceError> {
        let mut assets: Vec<&AssetId> = self.held.keys().chain(target.held.keys()).map(|(a, _)| a).collect();
        assets.sort();
        assets.dedup();
        let mut out = Vec::new();
        for asset in assets {
            let (left, right) = (self.total_of(asset), target.total_of(asset));
            if left != right {
                return Err(BalanceError::TotalsDiffer { asset: asset.clone(), left, right });
            }
            let mut parties: Vec<&PartyId> = self
                .held
                .keys()
                .chain(target.held.keys())
                .filter(|(a, _)| a == asset)
                .map(|(_, p)| p)
                .collect();
            parties.sort();
            parties.dedup();
            let mut surplus = Vec::new();
            let mut deficit = Vec::new();
            for p in parties {
                let (now, want) = (self.get(p, asset), target.get(p, asset));
                if now > want {
                    surplus.push((p.clone(), now - want));
                } else if want > now {
                    deficit.push((p.clone(), want - now));
                }
            }
            let (mut i, mut j) = (0, 0);
            while i < surplus.len() && j < deficit.len() {
                let amount = surplus[i].1.min(deficit[j].1);
                out.push(AssetUpdate {
                    owner_from: surplus[i].0.clone(),
                    owner_to: deficit[j].0.clone(),
                    asset: asset.clone(),
                    amount,
                });
                surplus[i].1 -= amount;
                deficit[j].1 -= amount;
                if surplus[i].1 == 0 {
                    i += 1;
                }
                if deficit[j].1 == 0 {
                    j += 1;
                }
            }
        }
        Ok(out)
    }

    fn total_of(&self, asset: &AssetId) -> u128 {
        self.held.iter().filter(|((a, _), _)| a == asset).map(|(_, v)| *v as u128).sum()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        codec::put_u32(&mut buf, self.held.len() as u32);
        for ((a, p), v) in &self.held {
            codec::put_str(&mut buf, &a.0);
            codec::put_str(&mut buf, &p.0);
            codec::put_u64(&mut buf, *v);
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let n = r.u32()?;
        let mut out = Balances::new();
        for _ in 0..n {
            let asset = AssetId(r.string()?);
            let party = PartyId(r.string()?);
            let v = r.u64()?;
            out.set(party, asset, v);
        }
        r.finish()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(entries: &[(&str, &str, u64)]) -> Balances {
        let mut out = Balances::new();
        for (p, a, v) in entries {
            out.apply(&AssetUpdate::mint(p, a, *v)).unwrap();
        }
        out
    }

    #[test]
    fn transfer_and_overdraft() {
        let mut bal = b(&[("Alice", "ETH", 10)]);
        bal.apply(&AssetUpdate::new("Alice", "Bob", "ETH", 4)).unwrap();
        assert_eq!(bal.get(&PartyId::new("Alice"), &AssetId::new("ETH")), 6);
        assert_eq!(bal.get(&PartyId::new("Bob"), &AssetId::new("ETH")), 4);
        let err = bal.apply(&AssetUpdate::new("Bob", "Alice", "ETH", 5)).unwrap_err();
        assert!(matches!(err, BalanceError::Insufficient { held: 4, wanted: 5, .. }));
    }

    #[test]
    fn apply_all_is_all_or_nothing() {
        let mut bal = b(&[("Alice", "ETH", 10)]);
        let before = bal.clone();
        let ups = [AssetUpdate::new("Alice", "Bob", "ETH", 4), AssetUpdate::new("Bob", "Cindy", "ETH", 5)];
        assert!(bal.apply_all(&ups).is_err());
        assert_eq!(bal, before);
    }

    #[test]
    fn zero_balances_are_dropped() {
        let mut bal = b(&[("Alice", "ETH", 3)]);
        bal.apply(&AssetUpdate::new("Alice", "Bob", "ETH", 3)).unwrap();
        assert_eq!(bal, b(&[("Bob", "ETH", 3)]));
    }

    proptest! {
        #[test]
        fn transfers_to_reaches_target(
            moves in prop::collection::vec((0usize..4, 0usize..4, 0u64..6), 0..12)
        ) {
            let parties = ["a", "b", "c", "d"];
            let start = b(&[("a", "X", 10), ("b", "X", 5), ("c", "Y", 7)]);
            let mut end = start.clone();
            for (f, t, amt) in moves {
                for asset in ["X", "Y"] {
                    let _ = end.apply(&AssetUpdate::new(parties[f], parties[t], asset, amt));
                }
            }
            let mut fixed = end.clone();
            for u in end.transfers_to(&start).unwrap() {
                fixed.apply(&u).unwrap();
            }
            prop_assert_eq!(&fixed, &start);
            prop_assert_eq!(Balances::decode(&end.encode()).unwrap(), end);
        }
    }
}
