use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::rng::{SimRng, FAILURE_STREAM};
use super::scenario::{BuildError, Protocol, Scenario};
use crate::baselines::{
    ac2s_execute, ac3wn_execute, holdings, worse_off, BaselineError, BaselineStatus, SimClock, WitnessChain,
};
use crate::chain::{Balances, ChainId, Digest, Federation, PartyId, TxnId, WitnessRecord};
use crate::codec;
use crate::engine::{Engine, EngineError, Execution, TxnStatus, Wal};
use crate::simplicial::BettiVector;
use crate::topology::{build_federation_complex, TaggedComplex, TopologyError};
use crate::transaction::CrossChainTransaction;

pub const CSV_HEADER: &str =
    "txn,protocol,status,applied_updates,messages,primitive_ops,space_bytes,worse_off,betti_pre,betti_post,audit";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RunError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("txn {txn}: {source}")]
    Topology {
        txn: TxnId,
        #[source]
        source: TopologyError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("event index {at} out of range (scenario has {events} transactions)")]
    EventOutOfRange { at: usize, events: usize },
}

/// What the auditor saw after a transaction, from state digests alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Audit {
    /// State matches the transaction fully applied.
    All,
    /// State matches the state before the transaction.
    None,
    Violation,
}

impl fmt::Display for Audit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Audit::All => "all",
            Audit::None => "none",
            Audit::Violation => "VIOLATION",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnRow {
    pub txn: TxnId,
    pub protocol: Protocol,
    /// `committed`, `aborted`, `partial_commit` or `blocked`.
    pub status: String,
    pub applied_updates: usize,
    pub messages: u64,
    pub primitive_ops: u64,
    pub space_bytes: usize,
    pub worse_off: BTreeSet<PartyId>,
    pub betti_pre: BettiVector,
    pub betti_post: BettiVector,
    pub audit: Audit,
}

impl TxnRow {
    fn csv(&self) -> String {
        let worse: Vec<&str> = self.worse_off.iter().map(|p| p.0.as_str()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.txn,
            self.protocol,
            self.status,
            self.applied_updates,
            self.messages,
            self.primitive_ops,
            self.space_bytes,
            worse.join(";"),
            self.betti_pre.to_field(),
            self.betti_post.to_field(),
            self.audit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub rows: Vec<TxnRow>,
    /// Final federation state digest.
    pub digest: Digest,
    /// Final encoded WAL.
    pub wal: Vec<u8>,
    /// Failed invariant checks, one line each.
    pub violations: Vec<String>,
    pub federation: Federation,
}

impl RunReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        writeln!(out, "digest,{}", self.digest.to_hex()).expect("write to String");
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Overrides every transaction's protocol.
    pub protocol: Option<Protocol>,
}

/// Digest of every chain's effective balances; the auditor compares these
/// and nothing else.
fn balance_digest(balances: &BTreeMap<ChainId, Balances>) -> Digest {
    let mut buf = Vec::new();
    for (id, b) in balances {
        codec::put_u32(&mut buf, id.0);
        codec::put_bytes(&mut buf, &b.encode());
    }
    Digest::of(&buf)
}

fn all_balances(fed: &Federation) -> BTreeMap<ChainId, Balances> {
    fed.chains().map(|c| (c.id(), c.balances())).collect()
}

/// Balances with every update of `txn` applied in order, or `None` if one
/// of them is unfunded.
fn intended_balances(
    mut balances: BTreeMap<ChainId, Balances>,
    txn: &CrossChainTransaction,
) -> Option<BTreeMap<ChainId, Balances>> {
    for (block, u) in txn.all_updates() {
        balances.get_mut(&block.chain)?.apply(u).ok()?;
    }
    Some(balances)
}

fn audit(before: &Digest, intended: Option<&Digest>, after: &Digest) -> Audit {
    // A transaction with no net effect counts as applied.
    if intended == Some(after) {
        Audit::All
    } else if before == after {
        Audit::None
    } else {
        Audit::Violation
    }
}

/// Executes every transaction of `scenario` in declaration order.
pub fn run_scenario(scenario: &Scenario, seed: u64, opts: RunOptions) -> Result<RunReport, RunError> {
    let mut fed = scenario.build_federation()?;
    let mut wal = Wal::new();
    let mut witness = WitnessChain::new();
    let mut clock = SimClock::with_params(seed, scenario.timelock, scenario.horizon, scenario.jitter);
    let mut failures = SimRng::new(seed, FAILURE_STREAM);
    let build = scenario.build_options();
    let mut rows = Vec::new();
    let mut violations = Vec::new();

    for (index, spec) in scenario.txns.iter().enumerate() {
        let txn = &spec.txn;
        let protocol = opts.protocol.or(spec.protocol).unwrap_or(scenario.protocol);
        let plan = scenario
            .failure_for(txn.id)
            .map(|f| f.resolve(txn.sub_transactions.len(), &mut failures))
            .unwrap_or_default();
        let topo = |source| RunError::Topology { txn: txn.id, source };
        let betti_pre = build_federation_complex(&fed, &[txn], build).map_err(topo)?.betti_numbers();

        let before = all_balances(&fed);
        let before_digest = balance_digest(&before);
        let intended_digest = intended_balances(before.clone(), txn).map(|b| balance_digest(&b));
        let before_holdings = holdings(&fed, &txn.parties);
        let intended_holdings = crate::baselines::intended_holdings(&fed, txn);
        let totals = fed.asset_totals();

        let mut row = TxnRow {
            txn: txn.id,
            protocol,
            status: String::new(),
            applied_updates: 0,
            messages: 0,
            primitive_ops: 0,
            space_bytes: 0,
            worse_off: BTreeSet::new(),
            betti_pre,
            betti_post: BettiVector(vec![]),
            audit: Audit::None,
        };
        let mut blocked = false;
        let mut topocbt_status = None;
        let mut baseline_status = None;
        match protocol {
            Protocol::TopoCbt => {
                let out = Engine::new(scenario.mode).execute(&mut fed, &mut wal, txn, &plan)?;
                row.status = out.status.to_string();
                row.applied_updates = out.applied_updates;
                row.messages = out.messages;
                row.primitive_ops = out.primitive_ops;
                row.space_bytes = out.residual_wal_bytes;
                topocbt_status = Some(out.status);
            }
            Protocol::Ac2s | Protocol::Ac3wn => {
                let out = if protocol == Protocol::Ac2s {
                    ac2s_execute(&mut fed, txn, &plan, &mut clock)?
                } else {
                    ac3wn_execute(&mut fed, &mut witness, txn, &plan, &mut clock)?
                };
                row.status = out.status.to_string();
                row.applied_updates = out.applied_updates;
                row.messages = out.messages;
                row.primitive_ops = out.primitive_ops;
                row.space_bytes = out.space_bytes;
                blocked = out.status == BaselineStatus::Blocked;
                baseline_status = Some(out.status);
            }
        }
        row.worse_off = worse_off(&before_holdings, intended_holdings.as_ref(), &holdings(&fed, &txn.parties));
        let after_digest = balance_digest(&all_balances(&fed));
        row.audit = audit(&before_digest, intended_digest.as_ref(), &after_digest);
        row.betti_post = build_federation_complex(&fed, &[], build).map_err(topo)?.betti_numbers();

        let mut fail = |what: String| violations.push(format!("txn {}: {what}", txn.id));
        if fed.asset_totals() != totals {
            fail("asset totals changed".into());
        }
        if let Err(e) = fed.verify_all() {
            fail(format!("hash chain broken: {e}"));
        }
        let held: Vec<_> = fed.held_locks().into_iter().filter(|(_, t)| *t == txn.id).collect();
        if !held.is_empty() && !blocked {
            fail(format!("{} lock(s) still held", held.len()));
        }
        match (topocbt_status, baseline_status) {
            (Some(status), _) => {
                // Compare digests rather than the audit label: a transaction
                // with no net effect looks both fully applied and untouched.
                let expected = match status {
                    TxnStatus::Committed => intended_digest,
                    _ => Some(before_digest),
                };
                if expected != Some(after_digest) {
                    fail(format!("engine reported {status} but the auditor saw {}", row.audit));
                }
            }
            (None, Some(status)) if protocol == Protocol::Ac3wn => {
                if status == BaselineStatus::PartialCommit || row.audit == Audit::Violation {
                    fail("AC3WN left a partial outcome".into());
                }
                let decided = matches!(witness.decision(txn.id), Some(WitnessRecord::GlobalCommit(_)));
                if status == BaselineStatus::Committed && !decided {
                    fail("AC3WN committed without a global commit on the witness chain".into());
                }
            }
            // AC2S may be non-atomic; the audit column records it.
            _ => {}
        }

        log::info!("txn {} ({protocol}): {} audit={}", txn.id, row.status, row.audit);
        rows.push(row);
        if scenario.resolve_every > 0 && (index as u32 + 1).is_multiple_of(scenario.resolve_every) {
            fed.resolve_all_forks();
        }
    }

    Ok(RunReport {
        scenario: scenario.name.clone(),
        seed,
        rows,
        digest: fed.state_digest(),
        wal: wal.encode(),
        violations,
        federation: fed,
    })
}

/// Complex of the scenario's initial federation with the first `at`
/// transactions in flight (none of them torn down yet).
pub fn betti_report(scenario: &Scenario, at: usize) -> Result<TaggedComplex, RunError> {
    if at > scenario.txns.len() {
        return Err(RunError::EventOutOfRange { at, events: scenario.txns.len() });
    }
    let fed = scenario.build_federation()?;
    let txns: Vec<&CrossChainTransaction> = scenario.txns[..at].iter().map(|t| &t.txn).collect();
    build_federation_complex(&fed, &txns, scenario.build_options()).map_err(|source| RunError::Topology {
        txn: txns.last().map_or(TxnId(0), |t| t.id),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareRow {
    pub protocol: Protocol,
    pub scenario: String,
    pub seed: u64,
    pub row: TxnRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProtocolTally {
    pub runs: usize,
    pub committed: usize,
    pub aborted: usize,
    pub partial_commits: usize,
    pub blocked: usize,
    pub audit_violations: usize,
}

impl ProtocolTally {
    /// No run left a partial state.
    pub fn atomic(&self) -> bool {
        self.partial_commits == 0 && self.audit_violations == 0
    }

    pub fn nonblocking(&self) -> bool {
        self.blocked == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub tally: BTreeMap<Protocol, ProtocolTally>,
    pub violations: Vec<String>,
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("protocol,scenario,seed,status,messages,primitive_ops,space_bytes,worse_off\n");
        for r in &self.rows {
            let worse: Vec<&str> = r.row.worse_off.iter().map(|p| p.0.as_str()).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.protocol,
                r.scenario,
                r.seed,
                r.row.status,
                r.row.messages,
                r.row.primitive_ops,
                r.row.space_bytes,
                worse.join(";")
            )
            .expect("write to String");
        }
        out
    }

    /// One line per protocol with atomicity and nonblocking marks.
    pub fn summary(&self) -> String {
        let mark = |ok: bool| if ok { "✓" } else { "✗" };
        let mut out = String::from("protocol,runs,committed,aborted,partial_commit,blocked,atomicity,nonblocking\n");
        for p in Protocol::ALL {
            let t = self.tally.get(&p).cloned().unwrap_or_default();
            writeln!(
                out,
                "{p},{},{},{},{},{},{},{}",
                t.runs,
                t.committed,
                t.aborted,
                t.partial_commits,
                t.blocked,
                mark(t.atomic()),
                mark(t.nonblocking())
            )
            .expect("write to String");
        }
        out
    }
}

/// Runs every scenario under every protocol and seed.
pub fn compare(scenarios: &[Scenario], seeds: &[u64]) -> Result<CompareReport, RunError> {
    let mut report = CompareReport::default();
    for p in Protocol::ALL {
        report.tally.insert(p, ProtocolTally::default());
    }
    for scenario in scenarios {
        for &seed in seeds {
            for protocol in Protocol::ALL {
                let run = run_scenario(scenario, seed, RunOptions { protocol: Some(protocol) })?;
                report
                    .violations
                    .extend(run.violations.iter().map(|v| format!("{} seed {seed} {protocol}: {v}", scenario.name)));
                let tally = report.tally.get_mut(&protocol).expect("seeded above");
                for row in run.rows {
                    tally.runs += 1;
                    match row.status.as_str() {
                        "committed" => tally.committed += 1,
                        "aborted" => tally.aborted += 1,
                        "partial_commit" => tally.partial_commits += 1,
                        "blocked" => tally.blocked += 1,
                        _ => {}
                    }
                    if row.audit == Audit::Violation {
                        tally.audit_violations += 1;
                    }
                    report.rows.push(CompareRow { protocol, scenario: scenario.name.clone(), seed, row });
                }
            }
        }
    }
    Ok(report)
}

/// Federation and WAL as left by the first TopoCBT crash in a scenario.
#[derive(Debug, Clone)]
pub struct CrashState {
    pub federation: Federation,
    pub wal: Wal,
    pub txn: TxnId,
    pub step: u32,
    /// State digest just before the crashed transaction started.
    pub digest_before: Digest,
}

/// Runs the scenario's transactions under TopoCBT until one crashes, and
/// stops there without recovering. `None` if nothing crashes.
pub fn run_until_crash(scenario: &Scenario, seed: u64) -> Result<Option<CrashState>, RunError> {
    let mut fed = scenario.build_federation()?;
    let mut wal = Wal::new();
    let mut failures = SimRng::new(seed, FAILURE_STREAM);
    let engine = Engine::new(scenario.mode);
    for spec in &scenario.txns {
        let txn = &spec.txn;
        let plan = scenario
            .failure_for(txn.id)
            .map(|f| f.resolve(txn.sub_transactions.len(), &mut failures))
            .unwrap_or_default();
        let digest_before = fed.state_digest();
        if let Execution::Crashed { step, .. } = engine.execute_until_crash(&mut fed, &mut wal, txn, &plan)? {
            return Ok(Some(CrashState { federation: fed, wal, txn: txn.id, step, digest_before }));
        }
    }
    Ok(None)
}
