//! Dead computation elimination on the shipped edge graph.

use std::path::Path;

use graphvx::codegen::emit_dot_filtered;
use graphvx::optimize::{alive_vertices, eliminate_dead_nodes, Dag, Vertex};
use graphvx::pipeline::compile_path;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/edge_fig1.json");
    let c = compile_path(&path, None).unwrap();
    let f = eliminate_dead_nodes(&c.expanded).unwrap();
    for n in f.dead_nodes() {
        println!("dead node {n}: {}", c.expanded.graph().nodes[&n].op.name());
    }
    for d in f.dead_data() {
        println!("dead data {d}: {}", c.loaded.name_of(d).unwrap_or("?"));
    }
    println!("{}", emit_dot_filtered(&f, "filtered"));

    // The same analysis on a bare bipartite DAG: in -> op -> v -> op -> v (unused).
    let dag = Dag {
        vertices: vec![
            Vertex::Data { is_virtual: false },
            Vertex::Operator,
            Vertex::Data { is_virtual: false },
            Vertex::Operator,
            Vertex::Data { is_virtual: true },
        ],
        edges: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
    };
    println!("alive: {:?}", alive_vertices(&dag));
}
