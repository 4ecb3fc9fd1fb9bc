//! Scenario files.
//!
//! Line-oriented sections of `key = value` pairs; `#` starts a comment line.
//!
//! ```text
//! [federation]
//! name = car-trading
//! mode = abstract            # abstract | replicated
//! window = full              # full | <radius>
//! protocol = topocbt         # default for every txn
//! timelock = 10
//! horizon = 100
//! jitter = 2
//! resolve_every = 0          # resolve forks after every k txns; 0 = never
//!
//! [chain]
//! id = 1
//! replicas = 1
//! length = 3                 # main-branch tip height
//! fork = 2:1:1               # height:count[:blocks], repeatable
//! balance = Alice:ETH:10     # party:asset:amount, repeatable
//!
//! [txn]
//! id = 1
//! parties = Alice, Bob, Cindy
//! blocks = 1:3, 2:3, 3:3     # chain:height[:branch]
//! sub = 1:3 2:3 | Alice>Bob:ETH:5@1:3; Bob>Cindy:BTC:1@2:3
//! protocol = ac2s            # optional override
//!
//! [failure]
//! txn = 1
//! update_failure = 2         # sub-transaction index (0-based), repeatable
//! crash_before_commit = 0
//! crash_after_undo = 1
//! crash_step = 4
//! walk_away = Cindy
//! late = Cindy:50
//! witness_crash = true
//! vote_abort = 2             # chain id, repeatable
//! random_update_failure = 0.25
//! ```

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::chain::{AssetId, AssetUpdate, BlockRef, Branch, Chain, ChainError, ChainId, Entry, Federation, PartyId, TxnId};
use crate::engine::{FaceFailure, FailurePlan};
use crate::topology::{BuildOptions, TopologyMode};
use crate::transaction::{CrossChainTransaction, SubTransaction};

use super::rng::SimRng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, field `{field}`: {message}")]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, field: &str, message: impl Into<String>) -> Self {
        Self { line, field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("chain {chain}: {source}")]
    Chain {
        chain: u32,
        #[source]
        source: ChainError,
    },
    #[error("duplicate chain id {0}")]
    DuplicateChain(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Protocol {
    #[default]
    TopoCbt,
    Ac2s,
    Ac3wn,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::TopoCbt, Protocol::Ac2s, Protocol::Ac3wn];
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::TopoCbt => "topocbt",
            Protocol::Ac2s => "ac2s",
            Protocol::Ac3wn => "ac3wn",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "topocbt" => Ok(Protocol::TopoCbt),
            "ac2s" => Ok(Protocol::Ac2s),
            "ac3wn" => Ok(Protocol::Ac3wn),
            other => Err(format!("unknown protocol `{other}` (expected topocbt, ac2s or ac3wn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForkSpec {
    pub height: u32,
    pub count: u32,
    pub blocks: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpec {
    pub id: u32,
    pub replicas: u32,
    pub length: u32,
    pub forks: Vec<ForkSpec>,
    pub balances: Vec<(PartyId, AssetId, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxnSpec {
    pub txn: CrossChainTransaction,
    pub protocol: Option<Protocol>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FailureSpec {
    pub txn: u64,
    pub plan: FailurePlan,
    /// Per-face probability of an injected update failure, drawn per seed.
    pub random_update_failure: Option<f64>,
}

impl FailureSpec {
    /// Concrete plan for a transaction with `faces` sub-transactions.
    pub fn resolve(&self, faces: usize, rng: &mut SimRng) -> FailurePlan {
        let mut plan = self.plan.clone();
        if let Some(p) = self.random_update_failure {
            for i in 0..faces {
                if rng.chance(p) {
                    plan.faces.entry(i).or_insert(FaceFailure::UpdateFailure);
                }
            }
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: TopologyMode,
    pub window: Option<u32>,
    pub protocol: Protocol,
    pub timelock: u64,
    pub horizon: u64,
    pub jitter: u64,
    pub resolve_every: u32,
    pub chains: Vec<ChainSpec>,
    pub txns: Vec<TxnSpec>,
    pub failures: Vec<FailureSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            mode: TopologyMode::Abstract,
            window: None,
            protocol: Protocol::TopoCbt,
            timelock: 10,
            horizon: 100,
            jitter: 2,
            resolve_every: 0,
            chains: vec![],
            txns: vec![],
            failures: vec![],
        }
    }
}

impl Scenario {
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions { mode: self.mode, window: self.window }
    }

    pub fn failure_for(&self, txn: TxnId) -> Option<&FailureSpec> {
        self.failures.iter().find(|f| f.txn == txn.0)
    }

    /// The initial federation: genesis blocks minting the balances, the main
    /// branch grown to `length`, then the declared forks.
    pub fn build_federation(&self) -> Result<Federation, BuildError> {
        let mut fed = Federation::new();
        for spec in &self.chains {
            let err = |source| BuildError::Chain { chain: spec.id, source };
            let genesis = spec
                .balances
                .iter()
                .map(|(p, a, v)| Entry::Transfer(AssetUpdate::mint(&p.0, &a.0, *v)))
                .collect();
            let mut chain = Chain::new(ChainId(spec.id), spec.replicas, genesis).map_err(err)?;
            for _ in 0..spec.length {
                chain.append_block(Branch::MAIN, vec![]).map_err(err)?;
            }
            for f in &spec.forks {
                for _ in 0..f.count {
                    let b = chain.spawn_fork(f.height).map_err(err)?;
                    for _ in 0..f.blocks {
                        chain.append_block(b, vec![]).map_err(err)?;
                    }
                }
            }
            fed.add_chain(chain).map_err(|_| BuildError::DuplicateChain(spec.id))?;
        }
        Ok(fed)
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Parser::default().parse(text)
    }

    /// Canonical text form; [`parse`](Self::parse) reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let w = &mut o;
        writeln!(w, "[federation]").unwrap();
        writeln!(w, "name = {}", self.name).unwrap();
        writeln!(w, "mode = {}", if self.mode == TopologyMode::Replicated { "replicated" } else { "abstract" }).unwrap();
        match self.window {
            None => writeln!(w, "window = full").unwrap(),
            Some(r) => writeln!(w, "window = {r}").unwrap(),
        }
        writeln!(w, "protocol = {}", self.protocol).unwrap();
        writeln!(w, "timelock = {}", self.timelock).unwrap();
        writeln!(w, "horizon = {}", self.horizon).unwrap();
        writeln!(w, "jitter = {}", self.jitter).unwrap();
        writeln!(w, "resolve_every = {}", self.resolve_every).unwrap();
        for c in &self.chains {
            writeln!(w, "\n[chain]\nid = {}\nreplicas = {}\nlength = {}", c.id, c.replicas, c.length).unwrap();
            for f in &c.forks {
                writeln!(w, "fork = {}:{}:{}", f.height, f.count, f.blocks).unwrap();
            }
            for (p, a, v) in &c.balances {
                writeln!(w, "balance = {p}:{a}:{v}").unwrap();
            }
        }
        for t in &self.txns {
            let txn = &t.txn;
            writeln!(w, "\n[txn]\nid = {}", txn.id).unwrap();
            let parties: Vec<&str> = txn.parties.iter().map(|p| p.0.as_str()).collect();
            writeln!(w, "parties = {}", parties.join(", ")).unwrap();
            let blocks: Vec<String> = txn.blocks.iter().map(ref_text).collect();
            writeln!(w, "blocks = {}", blocks.join(", ")).unwrap();
            for s in &txn.sub_transactions {
                let face: Vec<String> = s.face.iter().map(ref_text).collect();
                let ups: Vec<String> = s.updates.iter().map(|(b, u)| format!("{u}@{}", ref_text(b))).collect();
                if ups.is_empty() {
                    writeln!(w, "sub = {}", face.join(" ")).unwrap();
                } else {
                    writeln!(w, "sub = {} | {}", face.join(" "), ups.join("; ")).unwrap();
                }
            }
            if let Some(p) = t.protocol {
                writeln!(w, "protocol = {p}").unwrap();
            }
        }
        for f in &self.failures {
            writeln!(w, "\n[failure]\ntxn = {}", f.txn).unwrap();
            for (i, kind) in &f.plan.faces {
                let key = match kind {
                    FaceFailure::UpdateFailure => "update_failure",
                    FaceFailure::CrashBeforeCommit => "crash_before_commit",
                    FaceFailure::CrashAfterUndo => "crash_after_undo",
                };
                writeln!(w, "{key} = {i}").unwrap();
            }
            if let Some(k) = f.plan.crash_step {
                writeln!(w, "crash_step = {k}").unwrap();
            }
            if let Some(p) = &f.plan.walk_away {
                writeln!(w, "walk_away = {p}").unwrap();
            }
            for (p, d) in &f.plan.late {
                writeln!(w, "late = {p}:{d}").unwrap();
            }
            if f.plan.witness_crash {
                writeln!(w, "witness_crash = true").unwrap();
            }
            for c in &f.plan.vote_abort {
                writeln!(w, "vote_abort = {c}").unwrap();
            }
            if let Some(p) = f.random_update_failure {
                writeln!(w, "random_update_failure = {p}").unwrap();
            }
        }
        o
    }
}

/// Always prints the branch, so `1:3:0` is main.
fn ref_text(b: &BlockRef) -> String {
    format!("{}:{}:{}", b.chain.0, b.height, b.branch.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Federation,
    Chain,
    Txn,
    Failure,
}

#[derive(Default)]
struct Parser {
    scenario: Scenario,
    seen_federation: bool,
    failure_lines: Vec<usize>,
}

struct Pending {
    section: Section,
    line: usize,
    fields: Vec<(usize, String, String)>,
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<Scenario, ParseError> {
        let mut current: Option<Pending> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                if let Some(p) = current.take() {
                    self.finish(p)?;
                }
                let section = match name.trim() {
                    "federation" => Section::Federation,
                    "chain" => Section::Chain,
                    "txn" => Section::Txn,
                    "failure" => Section::Failure,
                    other => return Err(ParseError::new(line, "section", format!("unknown section `[{other}]`"))),
                };
                current = Some(Pending { section, line, fields: vec![] });
                continue;
            }
            let Some((k, v)) = t.split_once('=') else {
                return Err(ParseError::new(line, "syntax", "expected `key = value` or a `[section]` header"));
            };
            let Some(p) = current.as_mut() else {
                return Err(ParseError::new(line, k.trim(), "field outside any section"));
            };
            p.fields.push((line, k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(p) = current.take() {
            self.finish(p)?;
        }
        self.check()?;
        Ok(self.scenario)
    }

    fn finish(&mut self, p: Pending) -> Result<(), ParseError> {
        match p.section {
            Section::Federation => self.federation(p),
            Section::Chain => self.chain(p),
            Section::Txn => self.txn(p),
            Section::Failure => self.failure(p),
        }
    }

    fn federation(&mut self, p: Pending) -> Result<(), ParseError> {
        if self.seen_federation {
            return Err(ParseError::new(p.line, "section", "`[federation]` given twice"));
        }
        self.seen_federation = true;
        let s = &mut self.scenario;
        for (line, k, v) in p.fields {
            match k.as_str() {
                "name" => s.name = v,
                "mode" => {
                    s.mode = match v.as_str() {
                        "abstract" => TopologyMode::Abstract,
                        "replicated" => TopologyMode::Replicated,
                        _ => return Err(ParseError::new(line, &k, "expected `abstract` or `replicated`")),
                    }
                }
                "window" => s.window = if v == "full" { None } else { Some(num(line, &k, &v)?) },
                "protocol" => s.protocol = v.parse().map_err(|e: String| ParseError::new(line, &k, e))?,
                "timelock" => s.timelock = num(line, &k, &v)?,
                "horizon" => s.horizon = num(line, &k, &v)?,
                "jitter" => s.jitter = num(line, &k, &v)?,
                "resolve_every" => s.resolve_every = num(line, &k, &v)?,
                _ => return Err(unknown(line, &k, "federation")),
            }
        }
        Ok(())
    }

    fn chain(&mut self, p: Pending) -> Result<(), ParseError> {
        let (mut id, mut replicas, mut length) = (None, 1u32, 0u32);
        let mut forks = vec![];
        let mut balances = vec![];
        for (line, k, v) in p.fields {
            match k.as_str() {
                "id" => id = Some(num::<u32>(line, &k, &v)?),
                "replicas" => replicas = num(line, &k, &v)?,
                "length" => length = num(line, &k, &v)?,
                "fork" => {
                    let parts: Vec<&str> = v.split(':').collect();
                    if !(2..=3).contains(&parts.len()) {
                        return Err(ParseError::new(line, &k, "expected height:count[:blocks]"));
                    }
                    forks.push(ForkSpec {
                        height: num(line, &k, parts[0])?,
                        count: num(line, &k, parts[1])?,
                        blocks: parts.get(2).map(|b| num(line, &k, b)).transpose()?.unwrap_or(1),
                    });
                }
                "balance" => {
                    let parts: Vec<&str> = v.split(':').collect();
                    if parts.len() != 3 {
                        return Err(ParseError::new(line, &k, "expected party:asset:amount"));
                    }
                    balances.push((party(line, &k, parts[0])?, AssetId::new(name(line, &k, parts[1])?), num(line, &k, parts[2])?));
                }
                _ => return Err(unknown(line, &k, "chain")),
            }
        }
        let id = id.ok_or_else(|| ParseError::new(p.line, "id", "missing chain id"))?;
        if id == 0 {
            return Err(ParseError::new(p.line, "id", "chain ids start at 1"));
        }
        if replicas == 0 {
            return Err(ParseError::new(p.line, "replicas", "must be at least 1"));
        }
        if self.scenario.chains.iter().any(|c| c.id == id) {
            return Err(ParseError::new(p.line, "id", format!("duplicate chain id {id}")));
        }
        self.scenario.chains.push(ChainSpec { id, replicas, length, forks, balances });
        Ok(())
    }

    fn txn(&mut self, p: Pending) -> Result<(), ParseError> {
        let mut id = None;
        let mut parties = vec![];
        let mut blocks = BTreeSet::new();
        let mut subs = vec![];
        let mut protocol = None;
        for (line, k, v) in p.fields {
            match k.as_str() {
                "id" => id = Some(num::<u64>(line, &k, &v)?),
                "parties" => {
                    parties = v.split(',').map(|s| party(line, &k, s.trim())).collect::<Result<_, _>>()?;
                }
                "blocks" => {
                    for b in v.split(',') {
                        blocks.insert(block_ref(line, &k, b.trim())?);
                    }
                }
                "sub" => subs.push(sub(line, &k, &v)?),
                "protocol" => protocol = Some(v.parse().map_err(|e: String| ParseError::new(line, &k, e))?),
                _ => return Err(unknown(line, &k, "txn")),
            }
        }
        let id = TxnId(id.ok_or_else(|| ParseError::new(p.line, "id", "missing transaction id"))?);
        if self.scenario.txns.iter().any(|t| t.txn.id == id) {
            return Err(ParseError::new(p.line, "id", format!("duplicate transaction id {id}")));
        }
        let txn = CrossChainTransaction { id, parties, blocks, sub_transactions: subs };
        txn.validate().map_err(|e| ParseError::new(p.line, "txn", e.to_string()))?;
        self.scenario.txns.push(TxnSpec { txn, protocol });
        Ok(())
    }

    fn failure(&mut self, p: Pending) -> Result<(), ParseError> {
        let mut spec = FailureSpec::default();
        let mut txn = None;
        for (line, k, v) in p.fields {
            let face = |kind| -> Result<(usize, FaceFailure), ParseError> { Ok((num(line, &k, &v)?, kind)) };
            match k.as_str() {
                "txn" => txn = Some(num::<u64>(line, &k, &v)?),
                "update_failure" | "crash_before_commit" | "crash_after_undo" => {
                    let kind = match k.as_str() {
                        "update_failure" => FaceFailure::UpdateFailure,
                        "crash_before_commit" => FaceFailure::CrashBeforeCommit,
                        _ => FaceFailure::CrashAfterUndo,
                    };
                    let (i, kind) = face(kind)?;
                    if spec.plan.faces.insert(i, kind).is_some() {
                        return Err(ParseError::new(line, &k, format!("sub-transaction {i} already has a failure")));
                    }
                }
                "crash_step" => spec.plan.crash_step = Some(num(line, &k, &v)?),
                "walk_away" => spec.plan.walk_away = Some(party(line, &k, &v)?),
                "late" => {
                    let (who, delay) =
                        v.split_once(':').ok_or_else(|| ParseError::new(line, &k, "expected party:ticks"))?;
                    spec.plan.late.insert(party(line, &k, who)?, num(line, &k, delay)?);
                }
                "witness_crash" => {
                    spec.plan.witness_crash = match v.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return Err(ParseError::new(line, &k, "expected true or false")),
                    }
                }
                "vote_abort" => {
                    spec.plan.vote_abort.insert(ChainId(num(line, &k, &v)?));
                }
                "random_update_failure" => {
                    let p: f64 = v.parse().map_err(|_| ParseError::new(line, &k, format!("`{v}` is not a number")))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(ParseError::new(line, &k, "probability must lie in [0, 1]"));
                    }
                    spec.random_update_failure = Some(p);
                }
                _ => return Err(unknown(line, &k, "failure")),
            }
        }
        spec.txn = txn.ok_or_else(|| ParseError::new(p.line, "txn", "missing transaction id"))?;
        if self.scenario.failures.iter().any(|f| f.txn == spec.txn) {
            return Err(ParseError::new(p.line, "txn", format!("second failure plan for transaction {}", spec.txn)));
        }
        self.scenario.failures.push(spec);
        self.failure_lines.push(p.line);
        Ok(())
    }

    fn check(&self) -> Result<(), ParseError> {
        for (f, line) in self.scenario.failures.iter().zip(&self.failure_lines) {
            if !self.scenario.txns.iter().any(|t| t.txn.id.0 == f.txn) {
                return Err(ParseError::new(*line, "txn", format!("no transaction with id {}", f.txn)));
            }
        }
        Ok(())
    }
}

fn unknown(line: usize, key: &str, section: &str) -> ParseError {
    ParseError::new(line, key, format!("unknown field in [{section}]"))
}

fn num<T: FromStr>(line: usize, field: &str, v: &str) -> Result<T, ParseError> {
    v.trim()
        .parse()
        .map_err(|_| ParseError::new(line, field, format!("`{v}` is not a valid non-negative integer")))
}

fn name<'a>(line: usize, field: &str, v: &'a str) -> Result<&'a str, ParseError> {
    let ok = !v.is_empty() && v.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(v)
    } else {
        Err(ParseError::new(line, field, format!("`{v}` is not a valid name (letters, digits, `_`, `-`, `.`)")))
    }
}

fn party(line: usize, field: &str, v: &str) -> Result<PartyId, ParseError> {
    Ok(PartyId::new(name(line, field, v)?))
}

fn block_ref(line: usize, field: &str, v: &str) -> Result<BlockRef, ParseError> {
    let parts: Vec<&str> = v.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(ParseError::new(line, field, format!("`{v}` is not a block (chain:height[:branch])")));
    }
    let branch = parts.get(2).map(|b| num(line, field, b)).transpose()?.unwrap_or(0);
    Ok(BlockRef::new(num(line, field, parts[0])?, num(line, field, parts[1])?, branch))
}

fn sub(line: usize, field: &str, v: &str) -> Result<SubTransaction, ParseError> {
    let (face_text, ups_text) = match v.split_once('|') {
        Some((f, u)) => (f, Some(u)),
        None => (v, None),
    };
    let face = face_text
        .split_whitespace()
        .map(|b| block_ref(line, field, b))
        .collect::<Result<BTreeSet<_>, _>>()?;
    let mut updates = vec![];
    for u in ups_text.into_iter().flat_map(|t| t.split(';')).map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || ParseError::new(line, field, format!("`{u}` is not an update (from>to:asset:amount@chain:height)"));
        let (body, at) = u.split_once('@').ok_or_else(bad)?;
        let (from, rest) = body.split_once('>').ok_or_else(bad)?;
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let update = AssetUpdate {
            owner_from: party(line, field, from.trim())?,
            owner_to: party(line, field, parts[0])?,
            asset: AssetId::new(name(line, field, parts[1])?),
            amount: num(line, field, parts[2])?,
        };
        updates.push((block_ref(line, field, at.trim())?, update));
    }
    Ok(SubTransaction { face, updates })
}
