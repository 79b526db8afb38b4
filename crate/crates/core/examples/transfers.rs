//! Host/device transfer planning: naive per-launch copies against the plan.

use std::path::Path;

use graphvx::optimize::{optimize, PassOptions};
use graphvx::pipeline::compile_path;

fn main() {
    for name in ["fchain", "sobel", "harris", "tomasi"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("examples/{name}.json"));
        let c = compile_path(&path, None).unwrap();
        let plan = optimize(&c.expanded, PassOptions::default()).unwrap();
        println!(
            "{name:<8} naive {:>3}  planned {:>2}  segments {}",
            plan.stats.transfers_naive,
            plan.stats.transfers_optimized,
            plan.transfers.segments.len()
        );
        for t in &plan.transfers.transfers {
            println!("    {:?} {}", t.direction, c.loaded.name_of(t.data).unwrap_or("?"));
        }
    }
}
