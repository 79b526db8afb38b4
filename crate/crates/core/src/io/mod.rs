//! Graph description files and image files.

mod image;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::graph::{
    Attrs, Binding, Context, CvNode, DataKind, ElementKind, GraphError, ImageFormat, NodeOp, ObjectId, PixelType,
};
use crate::ir::kernel::{
    AbstractionKernel, Boundary, Combine, DataKindTag, KernelBody, LocalBody, Mask, MaskSource, PointBody,
};
use crate::ir::sexpr;
use crate::ir::value::Value;
use crate::library::CvKernel;

pub use image::{decode_image, encode_image, extension, read_image, write_image, RAW_MAGIC};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("bad image file: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn unresolved() -> ImageFormat {
    ImageFormat::Unresolved
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDecl {
    pub name: String,
    #[serde(default)]
    pub width: u32,
    #[serde(default)]
    pub height: u32,
    #[serde(default = "unresolved")]
    pub format: ImageFormat,
    #[serde(default, rename = "virtual")]
    pub is_virtual: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarDecl {
    pub name: String,
    pub format: PixelType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDecl {
    pub name: String,
    pub capacity: usize,
    pub element: ElementKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDecl {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub format: PixelType,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDecl {
    pub name: String,
    pub bins: usize,
    pub offset: i64,
    pub range: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomKind {
    Point,
    Local,
}

/// A user-defined point or local kernel; bodies are s-expressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDecl {
    pub name: String,
    pub kind: CustomKind,
    pub inputs: Vec<DataKindTag>,
    /// Point: one expression per output channel. Local: the tap expression.
    pub body: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combine: Option<Combine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    /// Input index of a matrix supplying the mask at run time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_input: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kernel: String,
    /// Object names by parameter position; `null` leaves an optional parameter unbound.
    pub params: Vec<Option<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    #[serde(default)]
    pub images: Vec<ImageDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scalars: Vec<ScalarDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrays: Vec<ArrayDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrices: Vec<MatrixDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distributions: Vec<DistributionDecl>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub custom_kernels: Vec<KernelDecl>,
    pub nodes: Vec<NodeDecl>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl KernelDecl {
    pub fn to_kernel(&self) -> Result<AbstractionKernel, IoError> {
        let parse = |s: &str| {
            sexpr::parse(s).map_err(|e| IoError::Schema(format!("kernel `{}`: {e}", self.name)))
        };
        let body = match self.kind {
            CustomKind::Point => {
                if self.body.is_empty() {
                    return Err(IoError::Schema(format!("point kernel `{}` has no body", self.name)));
                }
                KernelBody::Point(PointBody { channels: self.body.iter().map(|s| parse(s)).collect::<Result<_, _>>()? })
            }
            CustomKind::Local => {
                let [tap] = self.body.as_slice() else {
                    return Err(IoError::Schema(format!("local kernel `{}` needs exactly one tap body", self.name)));
                };
                let [w, h] = self.window.unwrap_or([3, 3]);
                let mask = match (&self.mask, self.mask_input) {
                    (Some(_), Some(_)) => {
                        return Err(IoError::Schema(format!("kernel `{}` has both mask and mask_input", self.name)))
                    }
                    (Some(m), None) => {
                        if m.coefs.len() != (m.width * m.height) as usize {
                            return Err(IoError::Schema(format!("kernel `{}`: mask size mismatch", self.name)));
                        }
                        Some(MaskSource::Const(m.clone()))
                    }
                    (None, Some(k)) => Some(MaskSource::Param(k)),
                    (None, None) => None,
                };
                KernelBody::Local(LocalBody {
                    window_w: w,
                    window_h: h,
                    boundary: self.boundary.unwrap_or(Boundary::Clamp),
                    combine: self.combine.unwrap_or(Combine::Sum),
                    mask,
                    tap: parse(tap)?,
                    post: self.post.as_deref().map(parse).transpose()?,
                })
            }
        };
        Ok(AbstractionKernel::new(self.name.clone(), self.inputs.clone(), body))
    }

    /// Declaration of a point or local kernel; `None` for the global kinds.
    pub fn from_kernel(k: &AbstractionKernel) -> Option<KernelDecl> {
        let base = KernelDecl {
            name: k.name.clone(),
            kind: CustomKind::Point,
            inputs: k.inputs.clone(),
            body: vec![],
            window: None,
            boundary: None,
            combine: None,
            mask: None,
            mask_input: None,
            post: None,
        };
        match &k.body {
            KernelBody::Point(p) => Some(KernelDecl { body: p.channels.iter().map(sexpr::print).collect(), ..base }),
            KernelBody::Local(l) => Some(KernelDecl {
                kind: CustomKind::Local,
                body: vec![sexpr::print(&l.tap)],
                window: Some([l.window_w, l.window_h]),
                boundary: Some(l.boundary),
                combine: Some(l.combine),
                mask: match &l.mask {
                    Some(MaskSource::Const(m)) => Some(m.clone()),
                    _ => None,
                },
                mask_input: match &l.mask {
                    Some(MaskSource::Param(k)) => Some(*k),
                    _ => None,
                },
                post: l.post.as_ref().map(sexpr::print),
                ..base
            }),
            _ => None,
        }
    }
}

/// Descriptive JSON of any abstraction kernel.
pub fn kernel_to_json(k: &AbstractionKernel) -> serde_json::Value {
    if let Some(d) = KernelDecl::from_kernel(k) {
        return serde_json::to_value(d).expect("serializable");
    }
    let extra = match &k.body {
        KernelBody::Reduce(r) => json!({
            "init": r.init,
            "combine": sexpr::print(&r.combine),
            "finalize": r.finalize.as_ref().map(sexpr::print),
            "track_locations": r.track_locations,
        }),
        KernelBody::Histogram(h) => json!({
            "bins": h.bins, "offset": h.offset, "range": h.range, "bin_of": sexpr::print(&h.bin_of),
        }),
        KernelBody::Scale { interp } => json!({ "interp": interp }),
        KernelBody::Scan => json!({}),
        KernelBody::Host(op) => json!({ "op": format!("{op:?}") }),
        KernelBody::Point(_) | KernelBody::Local(_) => unreachable!(),
    };
    let mut v = json!({ "name": k.name, "kind": k.kind().name(), "inputs": k.inputs });
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v
}

/// A graph file instantiated in a fresh context.
#[derive(Debug)]
pub struct LoadedGraph {
    pub ctx: Context,
    pub graph: ObjectId,
    /// Object and node names.
    pub names: BTreeMap<String, ObjectId>,
    pub outputs: Vec<ObjectId>,
}

impl LoadedGraph {
    pub fn id(&self, name: &str) -> Option<ObjectId> {
        self.names.get(name).copied()
    }

    pub fn name_of(&self, id: ObjectId) -> Option<&str> {
        self.names.iter().find(|(_, v)| **v == id).map(|(k, _)| k.as_str())
    }
}

impl GraphFile {
    pub fn parse(src: &str) -> Result<GraphFile, IoError> {
        Ok(serde_json::from_str(src)?)
    }

    /// Canonical text: sorted keys, two-space indentation, trailing newline.
    pub fn to_canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable");
        let mut s = serde_json::to_string_pretty(&v).expect("serializable");
        s.push('\n');
        s
    }

    /// Sets the size of every non-virtual image that has the size of the first one.
    pub fn resize(&mut self, width: u32, height: u32) {
        let Some(first) = self.images.iter().find(|i| !i.is_virtual).map(|i| (i.width, i.height)) else { return };
        for img in self.images.iter_mut().filter(|i| !i.is_virtual && (i.width, i.height) == first) {
            img.width = width;
            img.height = height;
        }
    }

    pub fn instantiate(&self) -> Result<LoadedGraph, IoError> {
        let mut ctx = Context::new();
        let graph = ctx.create_graph();
        let mut names: BTreeMap<String, ObjectId> = BTreeMap::new();
        let declare = |names: &mut BTreeMap<String, ObjectId>, ctx: &mut Context, name: &str, id: ObjectId| {
            if names.insert(name.to_string(), id).is_some() {
                return Err(IoError::Schema(format!("duplicate name `{name}`")));
            }
            ctx.set_name(id, name);
            Ok(())
        };
        for i in &self.images {
            let id = if i.is_virtual {
                ctx.create_virtual_image_with(graph, i.width, i.height, i.format)?
            } else {
                ctx.create_image(i.width, i.height, i.format)?
            };
            declare(&mut names, &mut ctx, &i.name, id)?;
        }
        for s in &self.scalars {
            if let Some(v) = s.value {
                if v.is_real() != s.format.is_float() {
                    return Err(IoError::Schema(format!("scalar `{}` value does not match {}", s.name, s.format)));
                }
            }
            let id = ctx.create_scalar(s.format, s.value);
            declare(&mut names, &mut ctx, &s.name, id)?;
        }
        for a in &self.arrays {
            let id = ctx.create_array(a.capacity, a.element);
            declare(&mut names, &mut ctx, &a.name, id)?;
        }
        for m in &self.matrices {
            let id = ctx.create_matrix(m.rows, m.cols, m.format, m.data.clone())?;
            declare(&mut names, &mut ctx, &m.name, id)?;
        }
        for d in &self.distributions {
            let id = ctx.create_distribution(d.bins, d.offset, d.range)?;
            declare(&mut names, &mut ctx, &d.name, id)?;
        }
        let mut custom: BTreeMap<&str, std::sync::Arc<AbstractionKernel>> = BTreeMap::new();
        for k in &self.custom_kernels {
            if CvKernel::from_name(&k.name).is_some() || custom.contains_key(k.name.as_str()) {
                return Err(IoError::Schema(format!("kernel name `{}` is already taken", k.name)));
            }
            custom.insert(&k.name, std::sync::Arc::new(k.to_kernel()?));
        }
        // Node names are assigned up front so parameters may (wrongly) refer to them.
        let mut node_ids = Vec::new();
        for n in &self.nodes {
            let id = ctx.fresh_node_id();
            if let Some(name) = &n.name {
                if names.insert(name.clone(), id).is_some() {
                    return Err(IoError::Schema(format!("duplicate name `{name}`")));
                }
            }
            node_ids.push(id);
        }
        for (n, id) in self.nodes.iter().zip(node_ids) {
            let op = if let Some(k) = CvKernel::from_name(&n.kernel) {
                NodeOp::Cv(CvNode { kernel: k, attrs: n.attrs.clone() })
            } else if let Some(k) = custom.get(n.kernel.as_str()) {
                if !n.attrs.is_empty() {
                    return Err(IoError::Schema(format!("custom kernel `{}` takes no attrs", n.kernel)));
                }
                NodeOp::Kernel(k.clone())
            } else {
                NodeOp::Unknown(n.kernel.clone())
            };
            let mut bindings = Vec::new();
            for (param, p) in n.params.iter().enumerate() {
                let Some(p) = p else { continue };
                let data = names.get(p).copied().ok_or_else(|| IoError::Schema(format!("unknown object `{p}`")))?;
                bindings.push(Binding { param, data });
            }
            let g = ctx.graph_mut(graph).expect("created above");
            g.nodes.insert(id, crate::graph::Node { id, op, bindings, origin: None, name: n.name.clone() });
        }
        let outputs = self
            .outputs
            .iter()
            .map(|o| {
                let id = names.get(o).copied().ok_or_else(|| IoError::Schema(format!("unknown output `{o}`")))?;
                match ctx.data(id) {
                    Some(d) if !d.is_virtual => Ok(id),
                    _ => Err(IoError::Schema(format!("output `{o}` must be a non-virtual data object"))),
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(LoadedGraph { ctx, graph, names, outputs })
    }

    /// File description of graph `graph` of `ctx`.
    pub fn from_context(ctx: &Context, graph: ObjectId) -> Result<GraphFile, IoError> {
        let g = ctx.graph(graph).ok_or(GraphError::UnknownGraph(graph))?;
        let table = ctx.data_table(graph)?;
        let mut used: BTreeMap<String, ObjectId> = BTreeMap::new();
        let mut names: BTreeMap<ObjectId, String> = BTreeMap::new();
        let mut name_for = |id: ObjectId, preferred: Option<&str>| {
            let mut name = preferred.map(str::to_string).unwrap_or_else(|| format!("d{id}"));
            while used.get(&name).is_some_and(|o| *o != id) {
                name.push('_');
            }
            used.insert(name.clone(), id);
            names.insert(id, name.clone());
            name
        };
        let mut file = GraphFile {
            images: vec![],
            scalars: vec![],
            arrays: vec![],
            matrices: vec![],
            distributions: vec![],
            custom_kernels: vec![],
            nodes: vec![],
            outputs: vec![],
        };
        for d in table.values() {
            let name = name_for(d.id, d.name.as_deref());
            match &d.kind {
                DataKind::Image { width, height, format } => file.images.push(ImageDecl {
                    name,
                    width: *width,
                    height: *height,
                    format: *format,
                    is_virtual: d.is_virtual,
                }),
                DataKind::Scalar { format, value } => {
                    file.scalars.push(ScalarDecl { name, format: *format, value: *value })
                }
                DataKind::Array { capacity, element } => {
                    file.arrays.push(ArrayDecl { name, capacity: *capacity, element: *element })
                }
                DataKind::Matrix { rows, cols, format, data } => file.matrices.push(MatrixDecl {
                    name,
                    rows: *rows,
                    cols: *cols,
                    format: *format,
                    data: data.clone(),
                }),
                DataKind::Distribution { bins, offset, range } => {
                    file.distributions.push(DistributionDecl { name, bins: *bins, offset: *offset, range: *range })
                }
            }
            if d.is_virtual && !matches!(d.kind, DataKind::Image { .. }) {
                return Err(IoError::Schema(format!("virtual {} objects cannot be written to a file", d.kind.tag())));
            }
        }
        let producers = g.producers();
        file.outputs = table
            .values()
            .filter(|d| !d.is_virtual && producers.contains_key(&d.id))
            .map(|d| names[&d.id].clone())
            .collect();
        for n in g.nodes.values() {
            let kernel = match &n.op {
                NodeOp::Cv(cv) => cv.kernel.name().to_string(),
                NodeOp::Unknown(name) => name.clone(),
                NodeOp::Kernel(k) => {
                    let decl = KernelDecl::from_kernel(k)
                        .ok_or_else(|| IoError::Schema(format!("{} kernels cannot be written to a file", k.kind())))?;
                    let mut decl = decl;
                    let mut suffix = 1;
                    let base = decl.name.clone();
                    loop {
                        match file.custom_kernels.iter().find(|c| c.name == decl.name) {
                            Some(existing) if *existing == decl => break,
                            Some(_) => {
                                suffix += 1;
                                decl.name = format!("{base}#{suffix}");
                            }
                            None => {
                                file.custom_kernels.push(decl.clone());
                                break;
                            }
                        }
                    }
                    decl.name
                }
            };
            let count = n.bindings.iter().map(|b| b.param + 1).max().unwrap_or(0);
            let params = (0..count)
                .map(|p| n.binding(p).map(|d| names.get(&d).cloned().unwrap_or_else(|| format!("d{d}"))))
                .collect();
            let attrs = match &n.op {
                NodeOp::Cv(cv) => cv.attrs.clone(),
                _ => Attrs::new(),
            };
            file.nodes.push(NodeDecl { name: n.name.clone(), kernel, params, attrs });
        }
        Ok(file)
    }
}

pub fn load_graph(path: &Path) -> Result<LoadedGraph, IoError> {
    GraphFile::parse(&std::fs::read_to_string(path)?)?.instantiate()
}
