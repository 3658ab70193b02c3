//! Tracing sessions: the reconstruction being built, its edit log, and the
//! snap / preview / accept loop that drives it.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::geom::{dist, mul, Vec3};
use crate::morse::MscGraph;
use crate::pathing::{shortest_path, PathError, PathResult, WeightedGraph};
use crate::spatial::{Fragment, GraphLocation, KdIndex, Nearest, SpatialError};

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TraceKind {
    Guided,
    Manual,
    Joined,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceNode {
    pub id: NodeId,
    /// Physical coordinates.
    pub position: Vec3,
    pub parent: Option<NodeId>,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EditError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("nothing to add")]
    Empty,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("node {0} already has a parent")]
    NotARoot(NodeId),
    #[error("joining {child} under {parent} would create a cycle")]
    Cycle { child: NodeId, parent: NodeId },
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("nothing to undo")]
    EmptyLog,
}

/// One reversible change to a reconstruction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "edit", rename_all = "lowercase"))]
pub enum Edit {
    Append { nodes: Vec<TraceNode>, next_id_before: NodeId },
    /// `reparented` holds `(child, former parent)` for children that became roots.
    Delete { removed: Vec<TraceNode>, reparented: Vec<(NodeId, NodeId)> },
    Join { child: NodeId, parent: NodeId, kind_before: TraceKind },
}

/// A forest of traced nodes plus the log of edits that built it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reconstruction {
    nodes: BTreeMap<NodeId, TraceNode>,
    next_id: NodeId,
    log: Vec<Edit>,
}

impl Reconstruction {
    pub fn new() -> Self {
        Self { nodes: BTreeMap::new(), next_id: 1, log: Vec::new() }
    }

    /// Builds a reconstruction from existing nodes (parents must exist and
    /// form a forest). The edit log starts empty.
    pub fn from_nodes(nodes: Vec<TraceNode>) -> Result<Self, EditError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if n.position.iter().any(|c| !c.is_finite()) {
                return Err(EditError::NonFinite);
            }
            let id = n.id;
            if map.insert(id, n).is_some() {
                return Err(EditError::DuplicateId(id));
            }
        }
        for n in map.values() {
            if let Some(p) = n.parent {
                if !map.contains_key(&p) {
                    return Err(EditError::UnknownNode(p));
                }
            }
        }
        let next_id = map.keys().next_back().map_or(1, |&k| k + 1);
        let rec = Self { nodes: map, next_id, log: Vec::new() };
        if let Some(id) = rec.find_cycle() {
            return Err(EditError::Cycle { child: id, parent: rec.nodes[&id].parent.unwrap_or(id) });
        }
        Ok(rec)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&TraceNode> {
        self.nodes.get(&id)
    }

    /// Nodes in increasing id order.
    pub fn nodes(&self) -> impl Iterator<Item = &TraceNode> {
        self.nodes.values()
    }

    pub fn log(&self) -> &[Edit] {
        &self.log
    }

    pub fn roots(&self) -> Vec<NodeId> {
        self.nodes.values().filter(|n| n.parent.is_none()).map(|n| n.id).collect()
    }

    /// Child lists for every node, children in increasing id order.
    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = self.nodes.keys().map(|&k| (k, Vec::new())).collect();
        for n in self.nodes.values() {
            if let Some(p) = n.parent {
                out.get_mut(&p).expect("parents exist").push(n.id);
            }
        }
        out
    }

    pub fn root_of(&self, mut id: NodeId) -> Option<NodeId> {
        let mut steps = 0;
        loop {
            let n = self.nodes.get(&id)?;
            match n.parent {
                Some(p) => id = p,
                None => return Some(id),
            }
            steps += 1;
            if steps > self.nodes.len() {
                return None;
            }
        }
    }

    fn find_cycle(&self) -> Option<NodeId> {
        self.nodes.keys().copied().find(|&id| self.root_of(id).is_none())
    }

    /// True when parents exist and there are no cycles.
    pub fn is_forest(&self) -> bool {
        self.nodes.values().all(|n| n.parent.map_or(true, |p| self.nodes.contains_key(&p)))
            && self.find_cycle().is_none()
    }

    /// Node ids in depth-first order: roots by id, children by id.
    pub fn dfs_order(&self) -> Vec<NodeId> {
        let children = self.children();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<NodeId> = self.roots().into_iter().rev().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(children[&id].iter().rev());
        }
        out
    }

    /// Appends `points` as a chain hanging off `parent` (or as a new tree).
    pub fn append_chain(
        &mut self,
        parent: Option<NodeId>,
        points: &[Vec3],
        kind: TraceKind,
    ) -> Result<Vec<NodeId>, EditError> {
        if points.is_empty() {
            return Err(EditError::Empty);
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(EditError::NonFinite);
        }
        if let Some(p) = parent {
            if !self.nodes.contains_key(&p) {
                return Err(EditError::UnknownNode(p));
            }
        }
        let mut prev = parent;
        let mut nodes = Vec::with_capacity(points.len());
        for (i, &p) in points.iter().enumerate() {
            let id = self.next_id + i as NodeId;
            nodes.push(TraceNode { id, position: p, parent: prev, kind });
            prev = Some(id);
        }
        let ids = nodes.iter().map(|n| n.id).collect();
        self.commit(Edit::Append { nodes, next_id_before: self.next_id });
        Ok(ids)
    }

    /// Removes nodes; their surviving children become roots.
    pub fn delete(&mut self, ids: &[NodeId]) -> Result<(), EditError> {
        if ids.is_empty() {
            return Err(EditError::Empty);
        }
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        if let Some(&bad) = ids.iter().find(|id| !self.nodes.contains_key(id)) {
            return Err(EditError::UnknownNode(bad));
        }
        let removed: Vec<TraceNode> = ids.iter().map(|id| self.nodes[id].clone()).collect();
        let reparented = self
            .nodes
            .values()
            .filter(|n| n.parent.is_some_and(|p| ids.binary_search(&p).is_ok()) && ids.binary_search(&n.id).is_err())
            .map(|n| (n.id, n.parent.expect("filtered on parent")))
            .collect();
        self.commit(Edit::Delete { removed, reparented });
        Ok(())
    }

    /// Hangs root `child` under `parent`, which must be in another tree.
    pub fn join(&mut self, child: NodeId, parent: NodeId) -> Result<(), EditError> {
        let c = self.nodes.get(&child).ok_or(EditError::UnknownNode(child))?;
        if !self.nodes.contains_key(&parent) {
            return Err(EditError::UnknownNode(parent));
        }
        if c.parent.is_some() {
            return Err(EditError::NotARoot(child));
        }
        if self.root_of(parent) == Some(child) {
            return Err(EditError::Cycle { child, parent });
        }
        let kind_before = c.kind;
        self.commit(Edit::Join { child, parent, kind_before });
        Ok(())
    }

    /// Reverts the most recent edit and returns it.
    pub fn undo(&mut self) -> Result<Edit, EditError> {
        let e = self.log.pop().ok_or(EditError::EmptyLog)?;
        self.revert(&e);
        Ok(e)
    }

    /// Rebuilds a reconstruction by applying `log` to an empty one.
    pub fn replay(log: &[Edit]) -> Self {
        let mut r = Self::new();
        for e in log {
            r.commit(e.clone());
        }
        r
    }

    fn commit(&mut self, e: Edit) {
        self.apply(&e);
        self.log.push(e);
    }

    fn apply(&mut self, e: &Edit) {
        match e {
            Edit::Append { nodes, .. } => {
                for n in nodes {
                    self.nodes.insert(n.id, n.clone());
                }
                if let Some(last) = nodes.last() {
                    self.next_id = self.next_id.max(last.id + 1);
                }
            }
            Edit::Delete { removed, reparented } => {
                for n in removed {
                    self.nodes.remove(&n.id);
                }
                for (id, _) in reparented {
                    if let Some(n) = self.nodes.get_mut(id) {
                        n.parent = None;
                    }
                }
            }
            Edit::Join { child, parent, .. } => {
                let n = self.nodes.get_mut(child).expect("join target exists");
                n.parent = Some(*parent);
                n.kind = TraceKind::Joined;
            }
        }
    }

    fn revert(&mut self, e: &Edit) {
        match e {
            Edit::Append { nodes, next_id_before } => {
                for n in nodes {
                    self.nodes.remove(&n.id);
                }
                self.next_id = *next_id_before;
            }
            Edit::Delete { removed, reparented } => {
                for n in removed {
                    self.nodes.insert(n.id, n.clone());
                }
                for (id, old) in reparented {
                    if let Some(n) = self.nodes.get_mut(id) {
                        n.parent = Some(*old);
                    }
                }
            }
            Edit::Join { child, kind_before, .. } => {
                let n = self.nodes.get_mut(child).expect("join target exists");
                n.parent = None;
                n.kind = *kind_before;
            }
        }
    }
}

/// Read-only data shared by every session on one graph.
#[derive(Debug)]
pub struct TracingContext {
    graph: WeightedGraph,
    index: KdIndex,
}

impl TracingContext {
    pub fn new(graph: WeightedGraph) -> Result<Self, SpatialError> {
        let index = KdIndex::build(graph.graph())?;
        Ok(Self { graph, index })
    }

    pub fn weighted(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn graph(&self) -> &MscGraph {
        self.graph.graph()
    }

    pub fn index(&self) -> &KdIndex {
        &self.index
    }

    /// Nearest graph point to a physical position.
    pub fn snap(&self, cursor: Vec3) -> Nearest {
        self.index.nearest(cursor)
    }

    /// Physical coordinates of a voxel-space point.
    pub fn to_physical(&self, p: Vec3) -> Vec3 {
        mul(p, self.graph().spacing())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SessionConfig {
    /// Physical radius of flashlight queries.
    pub flashlight_radius: f64,
    /// Largest joinable gap, in voxels along the coarsest axis.
    pub join_threshold_voxels: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { flashlight_radius: 10.0, join_threshold_voxels: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("no trace has been started")]
    NotStarted,
    #[error("there is no preview to accept")]
    NoPreview,
    #[error("the preview adds no new points")]
    NothingToAccept,
    #[error("no path connects the start to the cursor")]
    NoPath,
    #[error("gap of {gap} exceeds the join limit of {limit}")]
    GapTooLarge { gap: f64, limit: f64 },
    #[error("no other tree to join")]
    NothingToJoin,
    #[error(transparent)]
    Path(PathError),
    #[error(transparent)]
    Edit(#[from] EditError),
}

impl From<PathError> for SessionError {
    fn from(e: PathError) -> Self {
        match e {
            PathError::NoPath => SessionError::NoPath,
            e => SessionError::Path(e),
        }
    }
}

/// Where the next guided segment starts: a graph location, and the trace
/// node it continues from, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Anchor {
    pub location: GraphLocation,
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snap {
    pub location: GraphLocation,
    pub distance: f64,
    /// Whole arc under the cursor, for highlighting.
    pub arc_points: Vec<Vec3>,
}

/// One user's tracing state over a shared context.
#[derive(Debug, Clone)]
pub struct Session {
    ctx: Arc<TracingContext>,
    config: SessionConfig,
    rec: Reconstruction,
    anchor: Option<Anchor>,
    preview: Option<PathResult>,
    /// Anchor before each logged edit, for undo.
    anchors: Vec<Option<Anchor>>,
}

impl Session {
    pub fn new(ctx: Arc<TracingContext>, config: SessionConfig) -> Self {
        Self { ctx, config, rec: Reconstruction::new(), anchor: None, preview: None, anchors: Vec::new() }
    }

    /// Session continuing an existing reconstruction (its log is not undoable).
    pub fn with_reconstruction(ctx: Arc<TracingContext>, config: SessionConfig, rec: Reconstruction) -> Self {
        let anchors = vec![None; rec.log().len()];
        Self { ctx, config, rec, anchor: None, preview: None, anchors }
    }

    pub fn context(&self) -> &Arc<TracingContext> {
        &self.ctx
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn set_flashlight_radius(&mut self, r: f64) {
        self.config.flashlight_radius = r;
    }

    pub fn reconstruction(&self) -> &Reconstruction {
        &self.rec
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    pub fn preview(&self) -> Option<&PathResult> {
        self.preview.as_ref()
    }

    pub fn snap(&self, cursor: Vec3) -> Snap {
        let n = self.ctx.snap(cursor);
        Snap {
            location: n.location,
            distance: n.distance,
            arc_points: self.ctx.graph().arc(n.location.arc).points.clone(),
        }
    }

    /// Arc fragments near the cursor; `radius` overrides the configured one.
    pub fn flashlight(&self, cursor: Vec3, radius: Option<f64>) -> Vec<Fragment> {
        let r = radius.unwrap_or(self.config.flashlight_radius);
        self.ctx.index().radius_query(self.ctx.graph(), cursor, r)
    }

    /// Sets the start of a guided segment at the graph point nearest the
    /// cursor, optionally continuing from an existing trace node.
    pub fn start_trace(&mut self, cursor: Vec3, from: Option<NodeId>) -> Result<GraphLocation, SessionError> {
        if let Some(id) = from {
            if self.rec.node(id).is_none() {
                return Err(EditError::UnknownNode(id).into());
            }
        }
        let location = self.ctx.snap(cursor).location;
        self.anchor = Some(Anchor { location, node: from });
        self.preview = None;
        Ok(location)
    }

    /// Recomputes the preview from the start to the point under the cursor.
    /// When no path exists the preview is cleared and the start kept.
    pub fn update_preview(&mut self, cursor: Vec3) -> Result<&PathResult, SessionError> {
        let anchor = self.anchor.ok_or(SessionError::NotStarted)?;
        let end = self.ctx.snap(cursor).location;
        match shortest_path(self.ctx.weighted(), &anchor.location, &end) {
            Ok(p) => Ok(self.preview.insert(p)),
            Err(e) => {
                self.preview = None;
                Err(e.into())
            }
        }
    }

    /// Adds the preview to the reconstruction as guided nodes and moves the
    /// start to its end.
    pub fn accept(&mut self) -> Result<Vec<NodeId>, SessionError> {
        let anchor = self.anchor.ok_or(SessionError::NotStarted)?;
        let preview = self.preview.as_ref().ok_or(SessionError::NoPreview)?;
        let mut points: Vec<Vec3> = preview.points.iter().map(|&p| self.ctx.to_physical(p)).collect();
        if let Some(id) = anchor.node {
            if self.rec.node(id).is_some_and(|n| n.position == points[0]) {
                points.remove(0);
            }
        }
        if points.is_empty() {
            return Err(SessionError::NothingToAccept);
        }
        let end = *preview.points.last().expect("paths have points");
        let end_loc = self.location_at_path_end(preview, end);
        let before = self.anchor;
        let ids = self.rec.append_chain(anchor.node, &points, TraceKind::Guided)?;
        self.anchors.push(before);
        self.anchor = Some(Anchor { location: end_loc, node: ids.last().copied() });
        self.preview = None;
        Ok(ids)
    }

    fn location_at_path_end(&self, p: &PathResult, end: Vec3) -> GraphLocation {
        if let Some(t) = p.traversals.last() {
            return GraphLocation { arc: t.arc, index: t.to, position: end };
        }
        self.anchor.expect("accept requires a start").location
    }

    /// Appends raw physical points, continuing from the current tip if there
    /// is one.
    pub fn manual_append(&mut self, points: &[Vec3]) -> Result<Vec<NodeId>, SessionError> {
        let parent = self.anchor.and_then(|a| a.node);
        let before = self.anchor;
        let ids = self.rec.append_chain(parent, points, TraceKind::Manual)?;
        self.anchors.push(before);
        let tip = *points.last().expect("append_chain rejects empty input");
        self.anchor = Some(Anchor { location: self.ctx.snap(tip).location, node: ids.last().copied() });
        self.preview = None;
        Ok(ids)
    }

    /// Joins the tree rooted at `root` to the nearest node of any other tree
    /// when the gap is small enough. Returns the new parent.
    pub fn join_branch(&mut self, root: NodeId) -> Result<NodeId, SessionError> {
        let r = self.rec.node(root).ok_or(EditError::UnknownNode(root))?;
        if r.parent.is_some() {
            return Err(EditError::NotARoot(root).into());
        }
        let p = r.position;
        let mut best: Option<(f64, NodeId)> = None;
        for n in self.rec.nodes() {
            if self.rec.root_of(n.id) == Some(root) {
                continue;
            }
            let d = dist(n.position, p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        let (gap, parent) = best.ok_or(SessionError::NothingToJoin)?;
        let s = self.ctx.graph().spacing();
        let limit = self.config.join_threshold_voxels * s[0].max(s[1]).max(s[2]);
        if gap > limit {
            return Err(SessionError::GapTooLarge { gap, limit });
        }
        let before = self.anchor;
        self.rec.join(root, parent)?;
        self.anchors.push(before);
        Ok(parent)
    }

    pub fn delete(&mut self, ids: &[NodeId]) -> Result<(), SessionError> {
        let before = self.anchor;
        self.rec.delete(ids)?;
        self.anchors.push(before);
        if let Some(a) = &mut self.anchor {
            if a.node.is_some_and(|n| ids.contains(&n)) {
                a.node = None;
            }
        }
        self.preview = None;
        Ok(())
    }

    /// Reverts the last edit, restoring the start as it was before it.
    pub fn undo(&mut self) -> Result<Edit, SessionError> {
        let e = self.rec.undo()?;
        self.anchor = self.anchors.pop().flatten();
        self.preview = None;
        Ok(e)
    }
}
