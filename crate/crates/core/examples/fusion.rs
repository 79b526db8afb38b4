//! Kernel fusion: launches and memory traffic before and after, per rule set.

use std::path::Path;

use graphvx::exec::{random_inputs, run_naive, run_plan};
use graphvx::optimize::{optimize, FuseOptions, PassOptions};
use graphvx::pipeline::compile_path;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "unsharp".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("examples/{name}.json"));
    let c = compile_path(&path, Some((128, 128))).unwrap();
    let inputs = random_inputs(&c.expanded, 0);
    let naive = run_naive(&c.expanded, &inputs).unwrap();
    println!("{name}: naive {:?}", naive.counters);
    let rules = [
        ("none", FuseOptions::none()),
        ("point-point", FuseOptions { point_point: true, ..FuseOptions::none() }),
        ("all", FuseOptions::default()),
    ];
    for (label, fuse) in rules {
        let plan = optimize(&c.expanded, PassOptions { dce: true, fuse }).unwrap();
        let r = run_plan(&plan, &inputs).unwrap();
        println!(
            "  {label:<12} groups {:>2}  launches {:>2}  read {:>7}  written {:>7}  equal {}",
            plan.stats.fused_groups,
            r.counters.kernel_launches,
            r.counters.pixels_read,
            r.counters.pixels_written,
            r.outputs_bit_eq(&naive)
        );
    }
}
