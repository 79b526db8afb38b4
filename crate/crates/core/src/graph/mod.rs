//! Object model: the context owns graphs and data objects; graphs own their nodes
//! and virtual data. Edges are never stored — they are derived from node bindings.

pub mod format;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{ElementKind, ImageFormat, PixelType};

use crate::exec::Buffer;
use crate::ir::kernel::{AbstractionKernel, DataKindTag, Direction};
use crate::ir::types::InputType;
use crate::ir::value::Value;
use crate::library::CvKernel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataKind {
    Image {
        width: u32,
        height: u32,
        format: ImageFormat,
    },
    Scalar {
        format: PixelType,
        /// Constant scalars carry their value; produced scalars start empty.
        value: Option<Value>,
    },
    Array {
        capacity: usize,
        element: ElementKind,
    },
    Matrix {
        rows: usize,
        cols: usize,
        format: PixelType,
        data: Vec<f64>,
    },
    Distribution {
        bins: usize,
        offset: i64,
        range: u64,
    },
}

impl DataKind {
    pub fn image(width: u32, height: u32, format: ImageFormat) -> Self {
        DataKind::Image { width, height, format }
    }

    pub fn tag(&self) -> DataKindTag {
        match self {
            DataKind::Image { .. } => DataKindTag::Image,
            DataKind::Scalar { .. } => DataKindTag::Scalar,
            DataKind::Array { .. } => DataKindTag::Array,
            DataKind::Matrix { .. } => DataKindTag::Matrix,
            DataKind::Distribution { .. } => DataKindTag::Distribution,
        }
    }

    pub fn image_format(&self) -> Option<ImageFormat> {
        match self {
            DataKind::Image { format, .. } => Some(*format),
            _ => None,
        }
    }

    pub fn dims(&self) -> Option<(u32, u32)> {
        match self {
            DataKind::Image { width, height, .. } => Some((*width, *height)),
            _ => None,
        }
    }

    /// Images need positive dimensions and a concrete format; other kinds are always resolved.
    pub fn is_resolved(&self) -> bool {
        match self {
            DataKind::Image { width, height, format } => *width > 0 && *height > 0 && format.is_resolved(),
            _ => true,
        }
    }

    /// Typing view of the object, or `None` while an image is unresolved.
    pub fn input_type(&self) -> Option<InputType> {
        if !self.is_resolved() {
            return None;
        }
        Some(match self {
            DataKind::Image { format, .. } => InputType::Image(*format),
            DataKind::Scalar { format, .. } => InputType::Scalar(*format),
            DataKind::Array { element, .. } => InputType::Array(*element),
            DataKind::Matrix { rows, cols, format, .. } => InputType::Matrix { format: *format, rows: *rows, cols: *cols },
            DataKind::Distribution { .. } => InputType::Distribution,
        })
    }

    pub fn describe(&self) -> String {
        match self {
            DataKind::Image { width, height, format } => format!("image {width}x{height} {format}"),
            DataKind::Scalar { format, .. } => format!("scalar {format}"),
            DataKind::Array { capacity, element } => format!("array {element}[{capacity}]"),
            DataKind::Matrix { rows, cols, format, .. } => format!("matrix {format} {cols}x{rows}"),
            DataKind::Distribution { bins, offset, range } => format!("distribution {bins} bins [{offset}, +{range})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataObject {
    pub id: ObjectId,
    pub kind: DataKind,
    pub is_virtual: bool,
    /// Owning graph of a virtual object; `None` for context-scoped objects.
    pub owner: Option<ObjectId>,
    pub name: Option<String>,
}

impl DataObject {
    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("#{}", self.id),
        }
    }
}

pub type DataTable = BTreeMap<ObjectId, DataObject>;

/// Node-level constants such as `scale`, `policy` or `channel`.
pub type Attrs = BTreeMap<String, serde_json::Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding {
    pub param: usize,
    pub data: ObjectId,
}

/// Positional bindings: parameter `i` bound to `ids[i]`.
pub fn bind(ids: &[ObjectId]) -> Vec<Binding> {
    ids.iter().enumerate().map(|(param, &data)| Binding { param, data }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvNode {
    pub kernel: CvKernel,
    pub attrs: Attrs,
}

impl CvNode {
    pub fn new(kernel: CvKernel) -> Self {
        CvNode { kernel, attrs: Attrs::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.attrs.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeOp {
    /// A registry function, lowered to abstraction kernels by expansion.
    Cv(CvNode),
    /// An abstraction kernel: an expanded, fused, or user-defined node.
    Kernel(Arc<AbstractionKernel>),
    /// A kernel name the registry does not know; only reachable through file loading.
    Unknown(String),
}

impl NodeOp {
    pub fn cv(kernel: CvKernel) -> Self {
        NodeOp::Cv(CvNode::new(kernel))
    }

    pub fn kernel(k: AbstractionKernel) -> Self {
        NodeOp::Kernel(Arc::new(k))
    }

    pub fn name(&self) -> String {
        match self {
            NodeOp::Cv(c) => c.kernel.name().to_string(),
            NodeOp::Kernel(k) => k.name.clone(),
            NodeOp::Unknown(n) => n.clone(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            NodeOp::Cv(c) => c.kernel.params().len(),
            NodeOp::Kernel(k) => k.inputs.len() + k.output_params().len(),
            NodeOp::Unknown(_) => 0,
        }
    }

    pub fn direction(&self, param: usize) -> Option<Direction> {
        match self {
            NodeOp::Cv(c) => c.kernel.params().get(param).map(|p| p.direction),
            NodeOp::Kernel(k) => {
                if param < k.inputs.len() {
                    Some(Direction::Input)
                } else if param < self.param_count() {
                    Some(Direction::Output)
                } else {
                    None
                }
            }
            NodeOp::Unknown(_) => None,
        }
    }

    pub fn as_kernel(&self) -> Option<&Arc<AbstractionKernel>> {
        match self {
            NodeOp::Kernel(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: ObjectId,
    pub op: NodeOp,
    pub bindings: Vec<Binding>,
    /// Registry node this one was expanded from.
    pub origin: Option<ObjectId>,
    pub name: Option<String>,
}

impl Node {
    pub fn binding(&self, param: usize) -> Option<ObjectId> {
        self.bindings.iter().find(|b| b.param == param).map(|b| b.data)
    }

    fn bound(&self, dir: Direction) -> Vec<ObjectId> {
        let mut bs: Vec<&Binding> = self.bindings.iter().filter(|b| self.op.direction(b.param) == Some(dir)).collect();
        bs.sort_by_key(|b| b.param);
        bs.into_iter().map(|b| b.data).collect()
    }

    /// Data read by this node, in parameter order (repeats kept).
    pub fn inputs(&self) -> Vec<ObjectId> {
        self.bound(Direction::Input)
    }

    /// Data written by this node, in parameter order.
    pub fn outputs(&self) -> Vec<ObjectId> {
        self.bound(Direction::Output)
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => self.op.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GraphError {
    #[error("image dimensions must be at least 1x1, got {0}x{1}")]
    ZeroDimension(u32, u32),
    #[error("bad format: {0}")]
    BadFormat(String),
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("virtual object {data} belongs to graph {owner}, not graph {graph}")]
    CrossGraphVirtual { data: ObjectId, owner: ObjectId, graph: ObjectId },
    #[error("object {data} is already produced by node {producer}")]
    MultipleWriters { data: ObjectId, producer: ObjectId },
    #[error("no data object {0}")]
    UnknownObject(ObjectId),
    #[error("no graph {0}")]
    UnknownGraph(ObjectId),
    #[error("bad parameter binding: {0}")]
    BadParam(String),
    #[error("object {0} is virtual and cannot be accessed from the host")]
    AccessDenied(ObjectId),
    #[error("buffer does not match object {0}")]
    ShapeMismatch(ObjectId),
    #[error("cycle through nodes {0:?}")]
    CycleDetected(Vec<ObjectId>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub id: ObjectId,
    pub nodes: BTreeMap<ObjectId, Node>,
    pub virtuals: BTreeSet<ObjectId>,
    /// Bumped on every mutation made through the context.
    pub generation: u64,
}

impl Graph {
    pub fn new(id: ObjectId) -> Self {
        Graph { id, ..Default::default() }
    }

    /// Every data vertex: bound objects plus owned virtuals.
    pub fn data_ids(&self) -> BTreeSet<ObjectId> {
        let mut ids = self.virtuals.clone();
        for n in self.nodes.values() {
            ids.extend(n.bindings.iter().map(|b| b.data));
        }
        ids
    }

    /// Derived edge set: `data -> node` for inputs, `node -> data` for outputs, sorted and deduplicated.
    pub fn edges(&self) -> Vec<(ObjectId, ObjectId)> {
        let mut e = BTreeSet::new();
        for n in self.nodes.values() {
            for d in n.inputs() {
                e.insert((d, n.id));
            }
            for d in n.outputs() {
                e.insert((n.id, d));
            }
        }
        e.into_iter().collect()
    }

    /// Producer nodes per data object.
    pub fn producers(&self) -> BTreeMap<ObjectId, Vec<ObjectId>> {
        let mut m: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
        for n in self.nodes.values() {
            for d in n.outputs() {
                m.entry(d).or_default().push(n.id);
            }
        }
        m
    }

    /// Consumer bindings per data object; a node reading the same object twice appears twice.
    pub fn consumers(&self) -> BTreeMap<ObjectId, Vec<ObjectId>> {
        let mut m: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
        for n in self.nodes.values() {
            for d in n.inputs() {
                m.entry(d).or_default().push(n.id);
            }
        }
        m
    }

    /// Node ids in dependency order, ties broken by ascending id.
    pub fn topo_sort(&self) -> Result<Vec<ObjectId>, GraphError> {
        let producers = self.producers();
        let mut indeg: BTreeMap<ObjectId, usize> = self.nodes.keys().map(|&k| (k, 0)).collect();
        let mut succ: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
        for n in self.nodes.values() {
            let preds: BTreeSet<ObjectId> =
                n.inputs().iter().filter_map(|d| producers.get(d)).flatten().copied().collect();
            for p in preds {
                if succ.entry(p).or_default().insert(n.id) {
                    *indeg.get_mut(&n.id).unwrap() += 1;
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<ObjectId>> =
            indeg.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| Reverse(k)).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(n)) = ready.pop() {
            order.push(n);
            for s in succ.get(&n).into_iter().flatten() {
                let d = indeg.get_mut(s).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(*s));
                }
            }
        }
        if order.len() < self.nodes.len() {
            let stuck = indeg.into_iter().filter(|(_, d)| *d > 0).map(|(k, _)| k).collect();
            return Err(GraphError::CycleDetected(stuck));
        }
        Ok(order)
    }
}

/// Registry of every graph and data object, plus host-side buffers for non-virtual data.
#[derive(Debug, Default)]
pub struct Context {
    next_id: u32,
    data: DataTable,
    graphs: BTreeMap<ObjectId, Graph>,
    host: BTreeMap<ObjectId, Buffer>,
}

impl Context {
    pub fn new() -> Self {
        Context { next_id: 1, ..Default::default() }
    }

    fn fresh(&mut self) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        id
    }

    fn insert_data(&mut self, kind: DataKind, owner: Option<ObjectId>) -> ObjectId {
        let id = self.fresh();
        self.data.insert(id, DataObject { id, kind, is_virtual: owner.is_some(), owner, name: None });
        if let Some(g) = owner {
            self.graphs.get_mut(&g).expect("owner checked").virtuals.insert(id);
        }
        id
    }

    pub fn create_graph(&mut self) -> ObjectId {
        let id = self.fresh();
        self.graphs.insert(id, Graph::new(id));
        id
    }

    pub fn create_image(&mut self, width: u32, height: u32, format: ImageFormat) -> Result<ObjectId, GraphError> {
        if width == 0 || height == 0 {
            return Err(GraphError::ZeroDimension(width, height));
        }
        if !format.is_resolved() {
            return Err(GraphError::BadFormat("non-virtual images need a concrete format".into()));
        }
        if format == ImageFormat::Uyvy && width % 2 != 0 {
            return Err(GraphError::BadFormat("UYVY images need an even width".into()));
        }
        Ok(self.insert_data(DataKind::image(width, height, format), None))
    }

    /// Virtual image whose size and format are resolved at verification.
    pub fn create_virtual_image(&mut self, graph: ObjectId) -> Result<ObjectId, GraphError> {
        self.create_virtual_image_with(graph, 0, 0, ImageFormat::Unresolved)
    }

    /// Virtual image with (possibly partial) user-specified size or format; zero means unspecified.
    pub fn create_virtual_image_with(
        &mut self,
        graph: ObjectId,
        width: u32,
        height: u32,
        format: ImageFormat,
    ) -> Result<ObjectId, GraphError> {
        self.create_virtual(graph, DataKind::image(width, height, format))
    }

    /// Virtual object of any kind. Users create only images; expansion also creates
    /// internal scalars, arrays and distributions.
    pub fn create_virtual(&mut self, graph: ObjectId, kind: DataKind) -> Result<ObjectId, GraphError> {
        if !self.graphs.contains_key(&graph) {
            return Err(GraphError::UnknownGraph(graph));
        }
        Ok(self.insert_data(kind, Some(graph)))
    }

    pub fn create_scalar(&mut self, format: PixelType, value: Option<Value>) -> ObjectId {
        self.insert_data(DataKind::Scalar { format, value }, None)
    }

    pub fn create_array(&mut self, capacity: usize, element: ElementKind) -> ObjectId {
        self.insert_data(DataKind::Array { capacity, element }, None)
    }

    pub fn create_matrix(
        &mut self,
        rows: usize,
        cols: usize,
        format: PixelType,
        data: Vec<f64>,
    ) -> Result<ObjectId, GraphError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(GraphError::BadFormat(format!("{} coefficients for a {cols}x{rows} matrix", data.len())));
        }
        Ok(self.insert_data(DataKind::Matrix { rows, cols, format, data }, None))
    }

    pub fn create_distribution(&mut self, bins: usize, offset: i64, range: u64) -> Result<ObjectId, GraphError> {
        if bins == 0 || range < bins as u64 {
            return Err(GraphError::BadFormat(format!("{bins} bins over range {range}")));
        }
        Ok(self.insert_data(DataKind::Distribution { bins, offset, range }, None))
    }

    pub fn set_name(&mut self, id: ObjectId, name: &str) {
        if let Some(d) = self.data.get_mut(&id) {
            d.name = Some(name.to_string());
        } else {
            for g in self.graphs.values_mut() {
                if let Some(n) = g.nodes.get_mut(&id) {
                    n.name = Some(name.to_string());
                }
            }
        }
    }

    pub fn data(&self, id: ObjectId) -> Option<&DataObject> {
        self.data.get(&id)
    }

    pub fn data_mut(&mut self, id: ObjectId) -> Option<&mut DataObject> {
        self.data.get_mut(&id)
    }

    pub fn graph(&self, id: ObjectId) -> Option<&Graph> {
        self.graphs.get(&id)
    }

    /// Mutable access; counts as a mutation.
    pub fn graph_mut(&mut self, id: ObjectId) -> Option<&mut Graph> {
        let g = self.graphs.get_mut(&id)?;
        g.generation += 1;
        Some(g)
    }

    /// Data objects reachable from `graph`.
    pub fn data_table(&self, graph: ObjectId) -> Result<DataTable, GraphError> {
        let g = self.graphs.get(&graph).ok_or(GraphError::UnknownGraph(graph))?;
        Ok(g.data_ids().into_iter().filter_map(|id| self.data.get(&id).map(|d| (id, d.clone()))).collect())
    }

    pub fn add_node(&mut self, graph: ObjectId, op: NodeOp, bindings: &[Binding]) -> Result<ObjectId, GraphError> {
        let g = self.graphs.get(&graph).ok_or(GraphError::UnknownGraph(graph))?;
        if let NodeOp::Unknown(name) = &op {
            return Err(GraphError::UnknownKernel(name.clone()));
        }
        let mut seen = BTreeSet::new();
        for b in bindings {
            if b.param >= op.param_count() {
                return Err(GraphError::BadParam(format!("`{}` has no parameter {}", op.name(), b.param)));
            }
            if !seen.insert(b.param) {
                return Err(GraphError::BadParam(format!("parameter {} bound twice", b.param)));
            }
            let d = self.data.get(&b.data).ok_or(GraphError::UnknownObject(b.data))?;
            if let Some(owner) = d.owner {
                if owner != graph {
                    return Err(GraphError::CrossGraphVirtual { data: b.data, owner, graph });
                }
            }
            if op.direction(b.param) == Some(Direction::Output) {
                if let Some(p) = g.nodes.values().find(|n| n.outputs().contains(&b.data)) {
                    return Err(GraphError::MultipleWriters { data: b.data, producer: p.id });
                }
            }
        }
        self.add_node_unchecked(graph, op, bindings)
    }

    /// Adds a node without binding checks. Used by file loading, which defers all
    /// checking to the verifier, and by fault-injection tests.
    pub fn add_node_unchecked(
        &mut self,
        graph: ObjectId,
        op: NodeOp,
        bindings: &[Binding],
    ) -> Result<ObjectId, GraphError> {
        if !self.graphs.contains_key(&graph) {
            return Err(GraphError::UnknownGraph(graph));
        }
        let id = self.fresh();
        let g = self.graph_mut(graph).expect("checked");
        g.nodes.insert(id, Node { id, op, bindings: bindings.to_vec(), origin: None, name: None });
        Ok(id)
    }

    /// Allocates an id for a node inserted directly into a graph by a pass.
    pub fn fresh_node_id(&mut self) -> ObjectId {
        self.fresh()
    }

    /// Graphs plus data objects currently registered.
    pub fn object_count(&self) -> usize {
        self.graphs.len() + self.data.len()
    }

    pub fn graph_ids(&self) -> Vec<ObjectId> {
        self.graphs.keys().copied().collect()
    }

    /// Releases a graph together with the virtual objects it owns.
    pub fn release_graph(&mut self, graph: ObjectId) {
        if let Some(g) = self.graphs.remove(&graph) {
            for v in g.virtuals {
                self.data.remove(&v);
                self.host.remove(&v);
            }
        }
    }

    /// Releases every graph and object.
    pub fn release(&mut self) {
        self.graphs.clear();
        self.data.clear();
        self.host.clear();
    }

    /// Host write of a non-virtual object.
    pub fn write(&mut self, id: ObjectId, buf: Buffer) -> Result<(), GraphError> {
        let d = self.data.get(&id).ok_or(GraphError::UnknownObject(id))?;
        if d.is_virtual {
            return Err(GraphError::AccessDenied(id));
        }
        if !buf.matches(&d.kind) {
            return Err(GraphError::ShapeMismatch(id));
        }
        self.host.insert(id, buf);
        Ok(())
    }

    /// Host read of a non-virtual object.
    pub fn read(&self, id: ObjectId) -> Result<Option<&Buffer>, GraphError> {
        let d = self.data.get(&id).ok_or(GraphError::UnknownObject(id))?;
        if d.is_virtual {
            return Err(GraphError::AccessDenied(id));
        }
        Ok(self.host.get(&id))
    }

    /// Host buffers of every non-virtual object written so far.
    pub fn host_buffers(&self) -> &BTreeMap<ObjectId, Buffer> {
        &self.host
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_image_checks_dimensions_and_format() {
        let mut ctx = Context::new();
        let a = ctx.create_image(1024, 1024, ImageFormat::U8).unwrap();
        let d = ctx.data(a).unwrap();
        assert!(!d.is_virtual);
        assert_eq!(d.kind, DataKind::image(1024, 1024, ImageFormat::U8));
        assert!(ctx.create_image(1, 1, ImageFormat::F32).is_ok());
        assert_eq!(ctx.create_image(0, 5, ImageFormat::U8), Err(GraphError::ZeroDimension(0, 5)));
        assert!(matches!(ctx.create_image(4, 4, ImageFormat::Unresolved), Err(GraphError::BadFormat(_))));
    }

    #[test]
    fn virtual_images_are_fresh_unresolved_and_private() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let a = ctx.create_virtual_image(g).unwrap();
        let b = ctx.create_virtual_image(g).unwrap();
        assert_ne!(a, b);
        let d = ctx.data(a).unwrap();
        assert_eq!(d.kind, DataKind::image(0, 0, ImageFormat::Unresolved));
        assert!(d.is_virtual);
        assert_eq!(d.owner, Some(g));
        assert_eq!(ctx.read(a), Err(GraphError::AccessDenied(a)));
    }

    #[test]
    fn release_empties_the_registry() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        ctx.create_virtual_image(g).unwrap();
        ctx.create_image(2, 2, ImageFormat::U8).unwrap();
        assert_eq!(ctx.object_count(), 3);
        ctx.release_graph(g);
        assert_eq!(ctx.object_count(), 1);
        ctx.release();
        assert_eq!(ctx.object_count(), 0);
    }

    #[test]
    fn add_node_enforces_single_writer_and_graph_scope() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let h = ctx.create_graph();
        let input = ctx.create_image(8, 8, ImageFormat::U8).unwrap();
        let v = ctx.create_virtual_image(g).unwrap();
        let foreign = ctx.create_virtual_image(h).unwrap();
        let n = ctx.add_node(g, NodeOp::cv(CvKernel::Gaussian3x3), &bind(&[input, v])).unwrap();
        let node = &ctx.graph(g).unwrap().nodes[&n];
        assert_eq!(node.inputs(), vec![input]);
        assert_eq!(node.outputs(), vec![v]);
        assert_eq!(
            ctx.add_node(g, NodeOp::cv(CvKernel::Box3x3), &bind(&[input, v])),
            Err(GraphError::MultipleWriters { data: v, producer: n })
        );
        assert!(matches!(
            ctx.add_node(g, NodeOp::cv(CvKernel::Box3x3), &bind(&[foreign, input])),
            Err(GraphError::CrossGraphVirtual { .. })
        ));
    }

    #[test]
    fn topo_sort_breaks_ties_by_id_and_detects_cycles() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        assert_eq!(ctx.graph(g).unwrap().topo_sort(), Ok(vec![]));
        let a = ctx.create_image(4, 4, ImageFormat::U8).unwrap();
        let b = ctx.create_virtual_image(g).unwrap();
        let c = ctx.create_virtual_image(g).unwrap();
        // Inserted consumer-first: order must follow data, not insertion.
        let n2 = ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[b, c])).unwrap();
        let n1 = ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[a, b])).unwrap();
        assert_eq!(ctx.graph(g).unwrap().topo_sort(), Ok(vec![n1, n2]));
        let n3 = ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[c, b])).unwrap();
        match ctx.graph(g).unwrap().topo_sort() {
            Err(GraphError::CycleDetected(ns)) => assert_eq!(ns, vec![n2, n3]),
            other => panic!("expected a cycle, got {other:?}"),
        }
    }
}
