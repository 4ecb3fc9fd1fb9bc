use super::TxnOutcome;

/// Operation count of one run against the bound `c·(n² + n·m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityCheck {
    pub n: u64,
    pub m: u64,
    pub primitive_ops: u64,
    pub bound: f64,
    pub within: bool,
}

/// Constant `c` that makes the bound tight at n = 2, m = 1.
pub fn calibrate(ops_at_n2_m1: u64) -> f64 {
    ops_at_n2_m1 as f64 / 6.0
}

pub fn count_complexity(outcome: &TxnOutcome, n: u64, m: u64, c: f64) -> ComplexityCheck {
    let bound = c * (n * n + n * m) as f64;
    ComplexityCheck { n, m, primitive_ops: outcome.primitive_ops, bound, within: outcome.primitive_ops as f64 <= bound }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{AssetId, AssetUpdate, BlockRef, Chain, ChainId, Entry, Federation, PartyId, TxnId};
    use crate::engine::{topocbt_execute, FailurePlan, Wal};
    use crate::transaction::{CrossChainTransaction, SubTransaction};

    /// `n` chains, `m` faces over all of them, one transfer per chain per face.
    fn run(n: u32, m: usize) -> TxnOutcome {
        let mut fed = Federation::new();
        for id in 1..=n {
            let mint = AssetUpdate::mint(&format!("p{id}"), "X", 100);
            let mut c = Chain::new(ChainId(id), 1, vec![Entry::Transfer(mint)]).unwrap();
            c.append_to_canonical(vec![]).unwrap();
            fed.add_chain(c).unwrap();
        }
        let blocks: std::collections::BTreeSet<_> = (1..=n).map(|c| BlockRef::new(c, 1, 0)).collect();
        let updates = (1..=n)
            .map(|c| {
                let u = AssetUpdate {
                    owner_from: PartyId::new(format!("p{c}")),
                    owner_to: PartyId::new(format!("p{}", c % n + 1)),
                    asset: AssetId::new("X"),
                    amount: 1,
                };
                (BlockRef::new(c, 1, 0), u)
            })
            .collect();
        let txn = CrossChainTransaction {
            id: TxnId(1),
            parties: (1..=n).map(|c| PartyId::new(format!("p{c}"))).collect(),
            blocks: blocks.clone(),
            sub_transactions: vec![SubTransaction { face: blocks, updates }; m],
        };
        topocbt_execute(&mut fed, &mut Wal::new(), &txn, &FailurePlan::none()).unwrap()
    }

    #[test]
    fn calibrated_bound_holds_at_three_chains() {
        let c = calibrate(run(2, 1).primitive_ops);
        let check = count_complexity(&run(3, 1), 3, 1, c);
        assert!(check.within, "{check:?}");
        assert_eq!(check.bound, c * 12.0);
    }

    #[test]
    fn no_faces_stays_under_the_quadratic_term() {
        let c = calibrate(run(2, 1).primitive_ops);
        for n in 2..=6 {
            let out = run(n, 0);
            assert!(out.primitive_ops as f64 <= c * (n * n) as f64);
            assert!(count_complexity(&out, n as u64, 0, c).within);
        }
    }

    #[test]
    fn calibration_point_is_tight() {
        let ops = run(2, 1).primitive_ops;
        let check = count_complexity(&run(2, 1), 2, 1, calibrate(ops));
        assert_eq!(check.bound, ops as f64);
        assert!(check.within);
    }
}
