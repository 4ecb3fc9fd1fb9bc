//! Least-squares checks of primitive-operation counts against their
//! claimed growth.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::runner::{run_scenario, RunError, RunOptions};
use super::scenario::{ChainSpec, Protocol, Scenario, TxnSpec};
use crate::chain::{AssetId, AssetUpdate, BlockRef, PartyId, TxnId};
use crate::transaction::{CrossChainTransaction, SubTransaction};

/// Residual ratio below which a fit passes.
pub const FIT_TOLERANCE: f64 = 0.15;
pub const MIN_POINTS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FitError {
    #[error("grid has {points} points, need at least {MIN_POINTS}")]
    InsufficientGrid { points: usize },
    #[error("grid point n={n} m={m}: {source}")]
    Run {
        n: usize,
        m: usize,
        #[source]
        source: Box<RunError>,
    },
    #[error("grid point n={n} m={m}: transaction did not commit")]
    NotCommitted { n: usize, m: usize },
}

/// One failure-free transaction over `n` single-replica chains with `m`
/// sub-transactions, each spanning all `n` blocks and moving one unit
/// around the party cycle on every chain.
pub fn grid_scenario(n: usize, m: usize) -> Scenario {
    let party = |i: usize| PartyId::new(format!("p{i}"));
    let asset = |i: usize| AssetId::new(format!("a{i}"));
    let chains: Vec<ChainSpec> = (0..n)
        .map(|i| ChainSpec {
            id: i as u32 + 1,
            replicas: 1,
            length: 1,
            forks: vec![],
            balances: vec![(party(i), asset(i), 100)],
        })
        .collect();
    let blocks: BTreeSet<BlockRef> = (0..n).map(|i| BlockRef::new(i as u32 + 1, 1, 0)).collect();
    let sub = SubTransaction {
        face: blocks.clone(),
        updates: (0..n)
            .map(|i| {
                let u = AssetUpdate { owner_from: party(i), owner_to: party((i + 1) % n), asset: asset(i), amount: 1 };
                (BlockRef::new(i as u32 + 1, 1, 0), u)
            })
            .collect(),
    };
    let txn = CrossChainTransaction {
        id: TxnId(1),
        parties: (0..n).map(party).collect(),
        blocks,
        sub_transactions: vec![sub; m],
    };
    Scenario {
        name: format!("grid-n{n}-m{m}"),
        chains,
        txns: vec![TxnSpec { txn, protocol: None }],
        ..Scenario::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    pub ops: u64,
}

/// Primitive-op counts of `protocol` over `n in 2..=nmax`, `m in ms`.
pub fn measure(protocol: Protocol, nmax: usize, ms: impl Iterator<Item = usize> + Clone) -> Result<Vec<GridPoint>, FitError> {
    let mut out = Vec::new();
    for n in 2..=nmax {
        for m in ms.clone() {
            let report = run_scenario(&grid_scenario(n, m), 1, RunOptions { protocol: Some(protocol) })
                .map_err(|e| FitError::Run { n, m, source: Box::new(e) })?;
            let row = &report.rows[0];
            if row.status != "committed" {
                return Err(FitError::NotCommitted { n, m });
            }
            out.push(GridPoint { n, m, ops: row.primitive_ops });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// ‖Xβ − y‖ / ‖y‖.
    pub residual_ratio: f64,
}

/// Solves `min ‖Xβ − y‖` by SVD. Each row of `features` is one observation.
pub fn least_squares(features: &[Vec<f64>], y: &[f64]) -> LeastSquares {
    let cols = features.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(features.len(), cols, |r, c| features[r][c]);
    let y = DVector::from_column_slice(y);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).expect("U and V were computed");
    let residual = &x * &beta - &y;
    let norm = y.norm();
    LeastSquares {
        coefficients: beta.iter().copied().collect(),
        residual_ratio: if norm == 0.0 { 0.0 } else { residual.norm() / norm },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitVerdict {
    pub points: Vec<GridPoint>,
    /// Coefficients of n², n·m and 1.
    pub fit: LeastSquares,
    pub non_negative: bool,
    /// At the largest n with m = 1, the n² term outweighs the n·m term.
    pub quadratic_dominates: bool,
    pub pass: bool,
}

/// Fits TopoCBT counts to `a·n² + b·n·m + c`.
pub fn complexity_fit(nmax: usize, mmax: usize) -> Result<FitVerdict, FitError> {
    let points = nmax.saturating_sub(1) * mmax;
    if points < MIN_POINTS {
        return Err(FitError::InsufficientGrid { points });
    }
    let pts = measure(Protocol::TopoCbt, nmax, 1..=mmax)?;
    let features: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            let (n, m) = (p.n as f64, p.m as f64);
            vec![n * n, n * m, 1.0]
        })
        .collect();
    let y: Vec<f64> = pts.iter().map(|p| p.ops as f64).collect();
    let fit = least_squares(&features, &y);
    // Tiny negative values are SVD round-off.
    let non_negative = fit.coefficients.iter().all(|c| *c >= -1e-9);
    let n = nmax as f64;
    let quadratic_dominates = fit.coefficients[0] * n * n > fit.coefficients[1] * n;
    let pass = fit.residual_ratio < FIT_TOLERANCE && non_negative && quadratic_dominates;
    Ok(FitVerdict { points: pts, fit, non_negative, quadratic_dominates, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeComparison {
    pub points: Vec<GridPoint>,
    /// Residual ratio of the single-coefficient fit `c·m·n²`.
    pub cubic: f64,
    /// Residual ratio of the single-coefficient fit `c·(n² + n·m)`.
    pub quadratic: f64,
}

impl ShapeComparison {
    pub fn prefers_cubic(&self) -> bool {
        self.cubic < self.quadratic
    }
}

/// Which of `m·n²` and `n² + n·m` better explains a protocol's counts.
pub fn compare_shapes(protocol: Protocol, nmax: usize, mmax: usize) -> Result<ShapeComparison, FitError> {
    let points = nmax.saturating_sub(1) * mmax;
    if points < MIN_POINTS {
        return Err(FitError::InsufficientGrid { points });
    }
    let pts = measure(protocol, nmax, 1..=mmax)?;
    let y: Vec<f64> = pts.iter().map(|p| p.ops as f64).collect();
    let single = |f: &dyn Fn(f64, f64) -> f64| {
        let features: Vec<Vec<f64>> = pts.iter().map(|p| vec![f(p.n as f64, p.m as f64)]).collect();
        least_squares(&features, &y).residual_ratio
    };
    Ok(ShapeComparison {
        cubic: single(&|n, m| m * n * n),
        quadratic: single(&|n, m| n * n + n * m),
        points: pts,
    })
}
