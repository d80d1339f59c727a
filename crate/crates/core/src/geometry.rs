//! Vertex/edge positions, the position algebra of terms, geometric clusters
//! as edge-closed sets of internal positions, their connected components
//! (patterns), and the subset lattice.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::terms::{format_path, parse_path, Path, Term, TermError};

/// Whether a position names a node or the edge into it.
///
/// `Edge` sorts before `Vertex` so that canonical order walks each edge
/// immediately before the node it leads to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PositionKind {
    Edge,
    Vertex,
}

/// A tree address tagged as vertex or edge. The edge with path `p·i` runs
/// from the node at `p` to its i-th child; the root edge has the empty path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub path: Path,
    pub kind: PositionKind,
}

impl Position {
    pub fn vertex(path: impl Into<Path>) -> Position {
        Position {
            path: path.into(),
            kind: PositionKind::Vertex,
        }
    }

    pub fn edge(path: impl Into<Path>) -> Position {
        Position {
            path: path.into(),
            kind: PositionKind::Edge,
        }
    }

    pub fn root_vertex() -> Position {
        Position::vertex(Vec::new())
    }

    /// The root edge `eps:e`; representable but never a member of a cluster.
    pub fn root_edge() -> Position {
        Position::edge(Vec::new())
    }

    pub fn is_edge(&self) -> bool {
        self.kind == PositionKind::Edge
    }

    pub fn is_vertex(&self) -> bool {
        self.kind == PositionKind::Vertex
    }

    /// Prefixes the path with child index `i`.
    pub fn shifted(&self, i: usize) -> Position {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.push(i);
        path.extend_from_slice(&self.path);
        Position {
            path,
            kind: self.kind,
        }
    }

    /// Prefixes the path with `prefix`.
    pub fn shifted_by(&self, prefix: &[usize]) -> Position {
        let mut path = Vec::with_capacity(prefix.len() + self.path.len());
        path.extend_from_slice(prefix);
        path.extend_from_slice(&self.path);
        Position {
            path,
            kind: self.kind,
        }
    }

    /// Removes a leading `prefix` from the path, if present.
    pub fn strip_prefix(&self, prefix: &[usize]) -> Option<Position> {
        self.path.strip_prefix(prefix).map(|rest| Position {
            path: rest.to_vec(),
            kind: self.kind,
        })
    }

    /// Parses `1.2:e`, `eps:v` and the like.
    pub fn parse(text: &str) -> Result<Position, TermError> {
        let (path_part, kind_part) = text.rsplit_once(':').ok_or_else(|| TermError::BadPath {
            text: text.to_string(),
        })?;
        let kind = match kind_part.trim() {
            "v" => PositionKind::Vertex,
            "e" => PositionKind::Edge,
            _ => {
                return Err(TermError::BadPath {
                    text: text.to_string(),
                })
            }
        };
        Ok(Position {
            path: parse_path(path_part)?,
            kind,
        })
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PositionKind::Vertex => "v",
            PositionKind::Edge => "e",
        };
        write!(f, "{}:{}", format_path(&self.path), kind)
    }
}

impl Serialize for Position {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A finite set of positions in canonical order: paths compared
/// lexicographically (prefixes first), edges before the vertex they lead to.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct PositionSet(BTreeSet<Position>);

impl PositionSet {
    pub fn new() -> PositionSet {
        PositionSet(BTreeSet::new())
    }

    pub fn contains(&self, p: &Position) -> bool {
        self.0.contains(p)
    }

    pub fn insert(&mut self, p: Position) -> bool {
        self.0.insert(p)
    }

    pub fn remove(&mut self, p: &Position) -> bool {
        self.0.remove(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Position> + '_ {
        self.0.iter()
    }

    pub fn union(&self, other: &PositionSet) -> PositionSet {
        PositionSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &PositionSet) -> PositionSet {
        PositionSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &PositionSet) -> PositionSet {
        PositionSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &PositionSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &PositionSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn shifted(&self, i: usize) -> PositionSet {
        self.0.iter().map(|p| p.shifted(i)).collect()
    }

    pub fn shifted_by(&self, prefix: &[usize]) -> PositionSet {
        self.0.iter().map(|p| p.shifted_by(prefix)).collect()
    }

    /// The subset of positions whose path extends `prefix`, re-rooted there.
    pub fn restricted_to(&self, prefix: &[usize]) -> PositionSet {
        self.0
            .iter()
            .filter_map(|p| p.strip_prefix(prefix))
            .collect()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Position> + '_ {
        self.0.iter().filter(|p| p.is_vertex())
    }

    pub fn edges(&self) -> impl Iterator<Item = &Position> + '_ {
        self.0.iter().filter(|p| p.is_edge())
    }
}

impl FromIterator<Position> for PositionSet {
    fn from_iter<I: IntoIterator<Item = Position>>(iter: I) -> PositionSet {
        PositionSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PositionSet {
    type Item = &'a Position;
    type IntoIter = std::collections::btree_set::Iter<'a, Position>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for PositionSet {
    type Item = Position;
    type IntoIter = std::collections::btree_set::IntoIter<Position>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl fmt::Display for PositionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for PositionSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

/// All positions of a term: fold with
/// `f(P1,…,Pn) = {eps:e, eps:v} ∪ ⋃ i·Pi`, variables contributing
/// `{eps:e, eps:v}`.
pub fn tree_positions(t: &Term) -> PositionSet {
    let mut out = PositionSet::new();
    out.insert(Position::root_edge());
    out.insert(Position::root_vertex());
    if let Term::App(_, args) = t {
        for (i, arg) in args.iter().enumerate() {
            for p in tree_positions(arg) {
                out.insert(p.shifted(i + 1));
            }
        }
    }
    out
}

/// Internal positions: the same fold with variables contributing the empty
/// set, and the root edge removed.
pub fn internal_positions(t: &Term) -> PositionSet {
    fn fold(t: &Term) -> PositionSet {
        match t {
            Term::Var(_) => PositionSet::new(),
            Term::App(_, args) => {
                let mut out = PositionSet::new();
                out.insert(Position::root_edge());
                out.insert(Position::root_vertex());
                for (i, arg) in args.iter().enumerate() {
                    for p in fold(arg) {
                        out.insert(p.shifted(i + 1));
                    }
                }
                out
            }
        }
    }
    let mut out = fold(t);
    out.remove(&Position::root_edge());
    out
}

/// Why a position set fails to be a cluster for a term.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterViolation {
    #[error("position {position} is not an internal position of the subject")]
    NotInternal { position: Position },
    #[error("edge {edge} lacks its endpoint {endpoint}")]
    MissingEndpoint { edge: Position, endpoint: Position },
}

/// Errors for cluster construction and lattice operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("invalid cluster: {0}")]
    Invalid(#[from] ClusterViolation),
    #[error("clusters have different subject terms")]
    SubjectMismatch,
    #[error("term has {size} internal positions, exceeding the cap of {cap}")]
    CapExceeded { size: usize, cap: usize },
}

/// Checks `positions ⊆ internal_positions(t)` and edge-closure, reporting
/// the first violation in canonical order.
pub fn check_cluster(t: &Term, positions: &PositionSet) -> Result<(), ClusterViolation> {
    let internal = internal_positions(t);
    for p in positions {
        if !internal.contains(p) {
            return Err(ClusterViolation::NotInternal {
                position: p.clone(),
            });
        }
        if p.is_edge() {
            let (parent, child) = edge_endpoints(p);
            for endpoint in [parent, child] {
                if !positions.contains(&endpoint) {
                    return Err(ClusterViolation::MissingEndpoint {
                        edge: p.clone(),
                        endpoint,
                    });
                }
            }
        }
    }
    Ok(())
}

/// True iff `positions` is a cluster for `t`.
pub fn is_cluster(t: &Term, positions: &PositionSet) -> bool {
    check_cluster(t, positions).is_ok()
}

/// Endpoints of an edge position `p·i:e`: the vertices at `p` and `p·i`.
fn edge_endpoints(edge: &Position) -> (Position, Position) {
    debug_assert!(edge.is_edge() && !edge.path.is_empty());
    let mut parent = edge.path.clone();
    parent.pop();
    (
        Position::vertex(parent),
        Position::vertex(edge.path.clone()),
    )
}

/// An edge-closed set of internal positions of a subject term. Connected
/// components of a cluster are called patterns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GeometricCluster {
    subject: Term,
    positions: PositionSet,
}

impl GeometricCluster {
    pub fn new(subject: Term, positions: PositionSet) -> Result<GeometricCluster, ClusterError> {
        check_cluster(&subject, &positions)?;
        Ok(GeometricCluster { subject, positions })
    }

    /// The bottom cluster (empty position set).
    pub fn bottom(subject: Term) -> GeometricCluster {
        GeometricCluster {
            subject,
            positions: PositionSet::new(),
        }
    }

    /// The top cluster: all internal positions of the subject.
    pub fn top(subject: Term) -> GeometricCluster {
        let positions = internal_positions(&subject);
        GeometricCluster { subject, positions }
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn positions(&self) -> &PositionSet {
        &self.positions
    }

    /// Join: set union. Edge-closure is preserved by union.
    pub fn join(&self, other: &GeometricCluster) -> Result<GeometricCluster, ClusterError> {
        if self.subject != other.subject {
            return Err(ClusterError::SubjectMismatch);
        }
        Ok(GeometricCluster {
            subject: self.subject.clone(),
            positions: self.positions.union(&other.positions),
        })
    }

    /// Meet: set intersection. Edge-closure is preserved by intersection.
    pub fn meet(&self, other: &GeometricCluster) -> Result<GeometricCluster, ClusterError> {
        if self.subject != other.subject {
            return Err(ClusterError::SubjectMismatch);
        }
        Ok(GeometricCluster {
            subject: self.subject.clone(),
            positions: self.positions.intersection(&other.positions),
        })
    }

    pub fn le(&self, other: &GeometricCluster) -> bool {
        self.subject == other.subject && self.positions.is_subset(&other.positions)
    }

    /// Connected components (patterns), outermost-leftmost first. Two
    /// vertices are connected exactly when the edge between them is in the
    /// cluster; each component carries its vertices and edges.
    pub fn components(&self) -> Vec<PositionSet> {
        let vertices: Vec<&Position> = self.positions.vertices().collect();
        let index: BTreeMap<&Path, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, p)| (&p.path, i))
            .collect();
        let mut repr: Vec<usize> = (0..vertices.len()).collect();
        fn find(repr: &mut Vec<usize>, i: usize) -> usize {
            if repr[i] != i {
                let root = find(repr, repr[i]);
                repr[i] = root;
            }
            repr[i]
        }
        for edge in self.positions.edges() {
            let (parent, child) = edge_endpoints(edge);
            let (a, b) = (index[&parent.path], index[&child.path]);
            let (ra, rb) = (find(&mut repr, a), find(&mut repr, b));
            if ra != rb {
                repr[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, PositionSet> = BTreeMap::new();
        for (i, v) in vertices.iter().enumerate() {
            let root = find(&mut repr, i);
            groups.entry(root).or_default().insert((*v).clone());
        }
        for edge in self.positions.edges() {
            let (parent, _) = edge_endpoints(edge);
            let root = find(&mut repr, index[&parent.path]);
            groups
                .get_mut(&root)
                .expect("endpoint present")
                .insert(edge.clone());
        }
        // BTreeMap keys are the minimal vertex indices, and vertices were
        // collected in canonical order, so groups come out outermost-leftmost.
        groups.into_values().collect()
    }
}

/// Default cap on internal positions for exhaustive cluster enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 14;

/// All clusters of `t` by brute-force filtering of subsets of the internal
/// positions. Ordered by cardinality, then canonically. Errors when the
/// number of internal positions exceeds `cap`.
pub fn enumerate_clusters(t: &Term, cap: usize) -> Result<Vec<GeometricCluster>, ClusterError> {
    let internal: Vec<Position> = internal_positions(t).into_iter().collect();
    // Enumeration walks 2^n subsets; beyond ~30 positions it is hopeless
    // regardless of the configured cap.
    let cap = cap.min(30);
    if internal.len() > cap {
        return Err(ClusterError::CapExceeded {
            size: internal.len(),
            cap,
        });
    }
    let index: BTreeMap<&Position, usize> =
        internal.iter().enumerate().map(|(i, p)| (p, i)).collect();
    // For each edge, the bit mask of its endpoints.
    let edge_bits: Vec<(usize, u64)> = internal
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_edge())
        .map(|(i, p)| {
            let (parent, child) = edge_endpoints(p);
            (i, (1u64 << index[&parent]) | (1u64 << index[&child]))
        })
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << internal.len()) {
        let closed = edge_bits
            .iter()
            .all(|&(i, ends)| mask & (1 << i) == 0 || mask & ends == ends);
        if closed {
            let positions: PositionSet = internal
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| p.clone())
                .collect();
            out.push(GeometricCluster {
                subject: t.clone(),
                positions,
            });
        }
    }
    out.sort_by(|a, b| (a.positions.len(), &a.positions).cmp(&(b.positions.len(), &b.positions)));
    Ok(out)
}
