//! Simplicial-complex model of blockchain federations, the TopoCBT atomic
//! cross-chain commit protocol, and the AC2S / AC3WN baselines it is
//! measured against.

pub mod baselines;
pub mod chain;
pub mod codec;
pub mod engine;
pub mod harness;
pub mod simplicial;
pub mod topology;
pub mod transaction;
