//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the terminal; exits non-zero on any FAIL.

mod common;
#[path = "oracles/registry.rs"]
mod registry;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use graphvx::codegen::{emit_stream_plan, StreamOptions};
use graphvx::exec::{outputs_close, random_inputs, run_naive, run_plan};
use graphvx::optimize::{alive_vertices, eliminate_dead_nodes, optimize, FuseOptions, PassOptions};
use rayon::prelude::*;

const F32_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn edge_graph() -> Outcome {
    let t0 = Instant::now();
    let c = load("edge_fig1", None);
    ensure(c.expanded.node_count() == 6, format!("expanded to {} nodes", c.expanded.node_count()))?;
    let f = eliminate_dead_nodes(&c.expanded).map_err(|e| e.to_string())?;
    let dead: Vec<String> = f.dead_nodes().iter().map(|n| c.expanded.graph().nodes[n].op.name()).collect();
    ensure(dead == ["SobelX"], format!("dead nodes {dead:?}"))?;
    ensure(f.dead_data() == vec![c.loaded.id("virt2").unwrap()], "dead data is not exactly virt2")?;
    // Filtered (DCE only) against the unfiltered graph.
    let dce_only = PassOptions { dce: true, fuse: FuseOptions::none() };
    let plan = optimize(&c.expanded, dce_only).map_err(|e| e.to_string())?;
    let bad: Vec<u64> = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let inputs = random_inputs(&c.expanded, seed);
            let naive = run_naive(&c.expanded, &inputs).unwrap();
            !run_plan(&plan, &inputs).unwrap().outputs_bit_eq(&naive)
        })
        .collect();
    ensure(bad.is_empty(), format!("outputs differ for seeds {bad:?}"))?;
    let t = t0.elapsed();
    ensure(t < Duration::from_secs(10), format!("took {t:.2?}"))?;
    Ok(format!("6 nodes, SobelX+virt2 dead, filtered == unfiltered on 100 256x256 UYVY inputs, {t:.2?}"))
}

fn time_alive(n: usize) -> Duration {
    let d = dag::layered(n, 3);
    let mut best = Duration::MAX;
    for _ in 0..5 {
        let t0 = Instant::now();
        std::hint::black_box(alive_vertices(&d));
        best = best.min(t0.elapsed());
    }
    best
}

fn liveness() -> Outcome {
    for seed in 0..500 {
        let d = dag::random(seed, 60, 2.5);
        ensure(alive_vertices(&d) == dag::brute_force_alive(&d), format!("seed {seed} differs from reachability"))?;
    }
    let small = time_alive(20_000);
    let large = time_alive(200_000);
    let ratio = large.as_secs_f64() / small.as_secs_f64().max(1e-9);
    // Quadratic growth would be 100x for a 10x larger graph.
    ensure(ratio < 50.0, format!("10x size took {ratio:.1}x longer"))?;
    Ok(format!("500 random DAGs match; 10x size sweep ratio {ratio:.1}x"))
}

/// Non-virtual objects read by some node (images, matrices, scalars alike) plus
/// non-virtual objects written by some node.
fn boundary_objects(vg: &graphvx::verify::VerifiedGraph) -> usize {
    let non_virtual = |d: &graphvx::graph::ObjectId| !vg.data()[d].is_virtual;
    let nodes = vg.graph().nodes.values();
    let read: std::collections::BTreeSet<_> = nodes.clone().flat_map(|n| n.inputs()).filter(non_virtual).collect();
    let written: std::collections::BTreeSet<_> = nodes.flat_map(|n| n.outputs()).filter(non_virtual).collect();
    read.len() + written.len()
}

fn transfers() -> Outcome {
    let mut notes = Vec::new();
    for name in ["fchain", "harris"] {
        let c = load(name, Some((64, 64)));
        let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| e.to_string())?;
        let s = &plan.stats;
        let io = boundary_objects(&c.expanded);
        ensure(s.transfers_optimized == io, format!("{name}: {} optimized transfers, {io} boundary objects", s.transfers_optimized))?;
        ensure(
            s.transfers_naive == 2 * s.launches_before,
            format!("{name}: {} naive transfers for {} launches", s.transfers_naive, s.launches_before),
        )?;
        let r = run_plan(&plan, &random_inputs(&c.expanded, 0)).map_err(|e| e.to_string())?;
        ensure(r.counters.transfers_executed as usize == io, format!("{name}: executed {}", r.counters.transfers_executed))?;
        let gain = s.transfers_naive as f64 / s.transfers_optimized as f64;
        if name == "harris" {
            ensure(gain >= 10.0, format!("harris reduction only {gain:.1}x"))?;
        }
        notes.push(format!("{name} {}->{}", s.transfers_naive, s.transfers_optimized));
    }
    Ok(notes.join(", "))
}

fn equivalence() -> Outcome {
    let mut notes = Vec::new();
    for name in CORPUS {
        let c = load(name, Some((64, 64)));
        let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| e.to_string())?;
        let launches: Vec<(u64, u64)> = (0..100u64)
            .into_par_iter()
            .map(|seed| {
                let inputs = random_inputs(&c.expanded, seed);
                let naive = run_naive(&c.expanded, &inputs).map_err(|e| format!("{name}: {e}"))?;
                let r = run_plan(&plan, &inputs).map_err(|e| format!("{name}: {e}"))?;
                ensure(outputs_close(&naive, &r, F32_TOL), format!("{name} seed {seed}: outputs differ"))?;
                Ok((naive.counters.kernel_launches, r.counters.kernel_launches))
            })
            .collect::<Result<_, String>>()?;
        let (before, after) = launches[0];
        if ["unsharp", "harris", "tomasi"].contains(&name) {
            ensure(after < before, format!("{name}: launches {before} -> {after}"))?;
            notes.push(format!("{name} {before}->{after}"));
        }
    }
    Ok(format!("9 graphs x 100 seeds equal; launches {}", notes.join(", ")))
}

fn memory_traffic() -> Outcome {
    let c = load("sobelx", Some((64, 64)));
    let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| e.to_string())?;
    let inputs = random_inputs(&c.expanded, 0);
    let naive = run_naive(&c.expanded, &inputs).map_err(|e| e.to_string())?;
    let r = run_plan(&plan, &inputs).map_err(|e| e.to_string())?;
    let (a, b) = (naive.counters.pixels_read, r.counters.pixels_read);
    ensure(2 * b == a, format!("pixels_read {a} -> {b}"))?;
    Ok(format!("pixels_read {a} -> {b}"))
}

fn faults() -> Outcome {
    for (name, build, code) in faults::CASES {
        let got = build();
        ensure(got == vec![*code], format!("{name}: got {got:?}"))?;
    }
    let out = Command::new(env!("CARGO_BIN_EXE_graphvx"))
        .args(["verify", &corpus_path("bad_cycle").to_string_lossy()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(1), "bad_cycle did not exit 1")?;
    for name in CORPUS {
        let out = Command::new(env!("CARGO_BIN_EXE_graphvx"))
            .args(["verify", &corpus_path(name).to_string_lossy()])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), format!("{name} did not verify"))?;
    }
    Ok(format!("{} injected faults exact, clean corpus exits 0", faults::CASES.len()))
}

fn registry_oracles() -> Outcome {
    let failed: Vec<&str> =
        registry::CASES.iter().filter(|(_, f)| catch_unwind(AssertUnwindSafe(f)).is_err()).map(|(n, _)| *n).collect();
    ensure(failed.is_empty(), format!("failed: {failed:?}"))?;
    Ok(format!("{} oracle groups x {} seeds", registry::CASES.len(), registry::SEEDS))
}

fn codegen() -> Outcome {
    let mut checked = 0;
    for name in CORPUS {
        let c = load(name, Some((32, 24)));
        let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let exe = cc::build(&plan.graph, dir.path()).map_err(|e| format!("{name}: {e}"))?;
        for seed in 0..3 {
            let inputs = random_inputs(&plan.graph, seed);
            let want = run_plan(&plan, &inputs).map_err(|e| e.to_string())?;
            let got = cc::run(&exe, &plan.graph, &inputs, dir.path()).map_err(|e| format!("{name}: {e}"))?;
            ensure(got.len() == want.outputs.len(), format!("{name}: output count"))?;
            for (id, b) in &got {
                ensure(b.bit_eq(&want.outputs[id]), format!("{name} seed {seed}: C output {id} differs"))?;
            }
        }
        for v in [1, 2, 4] {
            let sp = emit_stream_plan(&plan.graph, StreamOptions { v, ..Default::default() }).map_err(|e| e.to_string())?;
            sp.validate(&plan.graph).map_err(|e| format!("{name} v={v}: {e}"))?;
            for l in &sp.line_buffers {
                let wh = sp.stages[l.stage].window.map_or(0, |w| w[1]);
                ensure(l.rows == wh - 1, format!("{name}: line buffer of {} rows for window height {wh}", l.rows))?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} graphs: cc output equals interpreter; stream plans valid for v=1,2,4"))
}

fn main() {
    let t0 = Instant::now();
    // Panics inside criteria are reported as FAIL lines, not as backtraces.
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 edge_fig1", edge_graph),
        ("2 liveness", liveness),
        ("3 transfers", transfers),
        ("4 equivalence", equivalence),
        ("5 traffic", memory_traffic),
        ("6 faults", faults),
        ("7 registry", registry_oracles),
        ("8 codegen", codegen),
    ];
    let mut failures = 0;
    for (label, f) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(msg) => println!("PASS  {label:<14} {msg} [{:.2?}]", t.elapsed()),
            Err(msg) => {
                failures += 1;
                println!("FAIL  {label:<14} {msg} [{:.2?}]", t.elapsed());
            }
        }
    }
    let total = t0.elapsed();
    if total < Duration::from_secs(120) {
        println!("PASS  {:<14} acceptance target finished in {total:.2?}", "9 runtime");
    } else {
        failures += 1;
        println!("FAIL  {:<14} acceptance target took {total:.2?}", "9 runtime");
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
