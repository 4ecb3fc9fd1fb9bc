//! Acceptance checks: one PASS/FAIL line per criterion. Exits nonzero if
//! any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use topocbt_core::chain::{AssetId, ChainId, Federation, PartyId};
use topocbt_core::engine::{recover, Engine, Execution, FaceFailure, FailurePlan, Wal, WalKind};
use topocbt_core::harness::fit::{compare_shapes, complexity_fit};
use topocbt_core::harness::generate::{random_complex, random_scenario};
use topocbt_core::harness::rng::{SimRng, GENERATOR_STREAM};
use topocbt_core::harness::{betti_report, builtin, compare, run_scenario, Audit, Protocol, RunOptions};
use topocbt_core::simplicial::text::read_complex;
use topocbt_core::simplicial::SimplicialComplex;
use topocbt_core::topology::{expected_transaction_dimension, transaction_simplex, TopologyMode};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);
type BettiCase = (&'static str, Box<dyn Fn() -> Result<Vec<usize>, String>>, Vec<usize>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, what: &str, f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let detail = f()?;
    let took = t.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))?;
    Ok(detail)
}

fn betti_reproduction() -> Check {
    let cases: [BettiCase; 3] = [
        (
            "tetra-join",
            Box::new(|| Ok(read_complex(builtin::TETRA_JOIN).map_err(|e| e.to_string())?.betti_numbers().0)),
            vec![1, 0, 0, 0],
        ),
        (
            "chain-hole",
            Box::new(|| {
                let s = builtin::scenario("chain-hole").unwrap();
                Ok(betti_report(&s, 2).map_err(|e| e.to_string())?.betti_numbers().0)
            }),
            vec![1, 1, 0],
        ),
        (
            "forked-pair",
            Box::new(|| {
                let s = builtin::scenario("forked-pair").unwrap();
                Ok(betti_report(&s, 1).map_err(|e| e.to_string())?.betti_numbers().0)
            }),
            vec![1, 4, 0, 0],
        ),
    ];
    let mut out = vec![];
    for (name, f, want) in cases {
        let got = timed(Duration::from_secs(1), name, || f().map(|b| format!("{b:?}")))?;
        ensure(got == format!("{want:?}"), || format!("{name}: got {got}, want {want:?}"))?;
        out.push(format!("{name}={got}"));
    }
    Ok(out.join(" "))
}

fn union_find_components(c: &SimplicialComplex) -> usize {
    let vertices: Vec<u32> = c.vertices().map(|v| v.0).collect();
    let mut parent: Vec<usize> = (0..=vertices.iter().copied().max().unwrap_or(0) as usize).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for e in c.simplices_of_dim(1) {
        let (a, b) = (find(&mut parent, e.vertices()[0].0 as usize), find(&mut parent, e.vertices()[1].0 as usize));
        parent[a] = b;
    }
    vertices.iter().map(|v| find(&mut parent, *v as usize)).collect::<BTreeSet<_>>().len()
}

fn euler_betti_oracle() -> Check {
    timed(Duration::from_secs(30), "500 complexes", || {
        let mut rng = SimRng::new(2024, GENERATOR_STREAM);
        for i in 0..500 {
            let c = random_complex(&mut rng, 12, 4);
            let euler: i64 = c.iter().map(|s| if s.dimension() % 2 == 0 { 1 } else { -1 }).sum();
            let b = c.betti_numbers();
            ensure(b.alternating_sum() == euler, || format!("complex {i}: betti {b} vs euler {euler}"))?;
            let comps = union_find_components(&c);
            ensure(b.get(0) == comps, || format!("complex {i}: beta0 {} vs {comps} components", b.get(0)))?;
        }
        Ok("500 complexes, 0 mismatches".into())
    })
}

fn atomicity_suite() -> Check {
    timed(Duration::from_secs(60), "1000 runs", || {
        let (mut txns, mut planned, mut all, mut none) = (0, 0, 0, 0);
        for seed in 0..1000u64 {
            let s = random_scenario(&mut SimRng::new(seed, GENERATOR_STREAM));
            planned += s.failures.len();
            let r = run_scenario(&s, seed, RunOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(r.is_ok(), || format!("seed {seed}: {:?}", r.violations))?;
            for row in &r.rows {
                txns += 1;
                match row.audit {
                    Audit::All => all += 1,
                    Audit::None => none += 1,
                    Audit::Violation => return Err(format!("seed {seed} txn {}: partial state", row.txn)),
                }
            }
        }
        Ok(format!("1000 runs, {txns} txns ({all} all, {none} none), {planned} failure plans, 0 violations"))
    })
}

fn comparison_pattern() -> Check {
    let report = compare(&builtin::suite(), &[1, 2, 3]).map_err(|e| e.to_string())?;
    ensure(report.violations.is_empty(), || format!("{:?}", report.violations))?;
    let t = &report.tally;
    let (a2, a3, tc) = (&t[&Protocol::Ac2s], &t[&Protocol::Ac3wn], &t[&Protocol::TopoCbt]);
    ensure(a2.partial_commits >= 1 && a2.blocked == 0, || format!("ac2s {a2:?}"))?;
    ensure(a3.partial_commits == 0 && a3.blocked >= 1, || format!("ac3wn {a3:?}"))?;
    ensure(tc.partial_commits == 0 && tc.blocked == 0, || format!("topocbt {tc:?}"))?;
    Ok(format!(
        "ac2s partial={} blocked={}; ac3wn partial={} blocked={}; topocbt partial={} blocked={}",
        a2.partial_commits, a2.blocked, a3.partial_commits, a3.blocked, tc.partial_commits, tc.blocked
    ))
}

fn held(fed: &Federation, chain: u32, party: &str, asset: &str) -> u64 {
    fed.chain(ChainId(chain)).unwrap().balances().get(&PartyId::new(party), &AssetId::new(asset))
}

fn car_trading() -> Check {
    let s = builtin::scenario("car-trading").unwrap();
    let initial = s.build_federation().unwrap().asset_totals();
    let r = run_scenario(&s, 1, RunOptions { protocol: Some(Protocol::TopoCbt) }).map_err(|e| e.to_string())?;
    let f = &r.federation;
    ensure(r.rows[0].status == "committed", || format!("status {}", r.rows[0].status))?;
    ensure(held(f, 3, "Alice", "TITLE") == 1, || "title did not reach Alice".into())?;
    ensure(held(f, 1, "Bob", "ETH") == 10, || "ETH did not reach Bob".into())?;
    ensure(held(f, 2, "Cindy", "BTC") == 1, || "BTC did not reach Cindy".into())?;
    ensure(f.asset_totals() == initial, || "assets not conserved".into())?;
    ensure(r.to_csv() == include_str!("golden/car-trading-topocbt-seed1.csv"), || "topocbt golden mismatch".into())?;

    let w = builtin::scenario("walk-away").unwrap();
    let r = run_scenario(&w, 1, RunOptions { protocol: Some(Protocol::Ac2s) }).map_err(|e| e.to_string())?;
    ensure(r.rows[0].status == "partial_commit", || format!("ac2s status {}", r.rows[0].status))?;
    ensure(held(&r.federation, 2, "Alice", "BTC") == 1, || "Alice does not hold BTC".into())?;
    ensure(r.rows[0].worse_off.contains(&PartyId::new("Alice")), || "Alice not flagged worse off".into())?;
    ensure(r.to_csv() == include_str!("golden/walk-away-ac2s-seed1.csv"), || "ac2s golden mismatch".into())?;
    Ok("topocbt committed and conserved; ac2s walk-away leaves Alice with BTC; goldens match".into())
}

fn complexity() -> Check {
    let fit = complexity_fit(6, 4).map_err(|e| e.to_string())?;
    let c = &fit.fit.coefficients;
    ensure(fit.fit.residual_ratio < 0.15, || format!("residual ratio {}", fit.fit.residual_ratio))?;
    ensure(fit.non_negative, || format!("negative coefficient in {c:?}"))?;
    let shapes = compare_shapes(Protocol::Ac2s, 6, 4).map_err(|e| e.to_string())?;
    ensure(shapes.prefers_cubic(), || format!("ac2s m*n^2 {} vs n^2+nm {}", shapes.cubic, shapes.quadratic))?;
    Ok(format!(
        "topocbt {:.3}n^2 + {:.3}nm + {:.3}, residual {:.4}; ac2s residual m*n^2 {:.4} < n^2+nm {:.4}",
        c[0], c[1], c[2], fit.fit.residual_ratio, shapes.cubic, shapes.quadratic
    ))
}

fn wal_recovery() -> Check {
    timed(Duration::from_secs(10), "crash enumeration", || {
        let s = builtin::scenario("car-trading").unwrap();
        let txn = &s.txns[0].txn;
        let plans = [
            FailurePlan::none(),
            FailurePlan { faces: [(2, FaceFailure::UpdateFailure)].into(), ..FailurePlan::none() },
        ];
        let mut points = 0;
        for base in plans {
            for step in 0.. {
                let mut fed = s.build_federation().unwrap();
                let before = fed.state_digest();
                let mut wal = Wal::new();
                let plan = FailurePlan { crash_step: Some(step), ..base.clone() };
                let ex = Engine::default().execute_until_crash(&mut fed, &mut wal, txn, &plan).map_err(|e| e.to_string())?;
                if matches!(ex, Execution::Finished(_)) || wal.terminal(txn.id) == Some(&WalKind::Commit) {
                    break;
                }
                points += 1;
                recover(&mut fed, &mut wal).map_err(|e| e.to_string())?;
                ensure(fed.state_digest() == before, || format!("crash after step {step}: state differs"))?;
                let once = fed.state_digest();
                let again = recover(&mut fed, &mut wal).map_err(|e| e.to_string())?;
                ensure(again.is_noop() && fed.state_digest() == once, || format!("step {step}: second recover acted"))?;
            }
        }
        Ok(format!("{points} crash points restored, second recovery a no-op each time"))
    })
}

fn dimension_consistency() -> Check {
    let mut checked = 0;
    for seed in 0..200u64 {
        let s = random_scenario(&mut SimRng::new(10_000 + seed, GENERATOR_STREAM));
        let fed = s.build_federation().unwrap();
        for t in &s.txns {
            let sigma = transaction_simplex(&fed, &t.txn, s.mode).map_err(|e| e.to_string())?;
            // Oracle: replicas (or one vertex) plus one per extra live block at each referenced height.
            let mut expected = -1isize;
            for (chain, height) in t.txn.heights() {
                let c = fed.chain(chain).unwrap();
                let live = c.live_blocks().iter().filter(|b| b.height == height).count() as isize;
                let m = if s.mode == TopologyMode::Replicated { c.replicas() as isize } else { 1 };
                expected += m + live - 1;
            }
            let formula = expected_transaction_dimension(&fed, &t.txn, s.mode).map_err(|e| e.to_string())?;
            ensure(sigma.dimension() as isize == expected && formula == expected, || {
                format!("seed {seed} txn {}: simplex {} formula {formula} oracle {expected}", t.txn.id, sigma.dimension())
            })?;
            checked += 1;
        }
    }
    let s = builtin::scenario("forked-pair").unwrap();
    let fed = s.build_federation().unwrap();
    let d = transaction_simplex(&fed, &s.txns[0].txn, s.mode).map_err(|e| e.to_string())?.dimension();
    ensure(d == 3, || format!("forked-pair simplex has dimension {d}"))?;
    Ok(format!("{checked} transactions over 200 federations; forked-pair dimension 3"))
}

fn determinism() -> Check {
    let mut runs = 0;
    let mut scenarios: Vec<_> = ["car-trading", "chain-hole", "forked-pair"].iter().map(|n| builtin::scenario(n).unwrap()).collect();
    scenarios.extend(builtin::suite());
    scenarios.extend((0..20).map(|i| random_scenario(&mut SimRng::new(500 + i, GENERATOR_STREAM))));
    for s in &scenarios {
        for p in Protocol::ALL {
            // Generated scenarios may not split into pairwise swaps; those are skipped for AC2S.
            for seed in [1, 99] {
                let opts = RunOptions { protocol: Some(p) };
                let (a, b) = match (run_scenario(s, seed, opts), run_scenario(s, seed, opts)) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(a), Err(b)) if a == b => continue,
                    (a, b) => return Err(format!("{} {p}: runs disagree on success: {a:?} / {b:?}", s.name)),
                };
                ensure(a.to_csv() == b.to_csv() && a.wal == b.wal, || format!("{} {p} seed {seed}: reports differ", s.name))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} replayed runs byte-identical (report and WAL)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("betti reproduction", betti_reproduction),
        ("euler-betti oracle", euler_betti_oracle),
        ("atomicity property suite", atomicity_suite),
        ("protocol comparison pattern", comparison_pattern),
        ("car-trading scenario", car_trading),
        ("complexity fit", complexity),
        ("wal recovery", wal_recovery),
        ("dimension consistency", dimension_consistency),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {}. {name}: {detail} [{took:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why} [{took:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
