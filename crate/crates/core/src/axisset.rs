//! Axis sets and the projection / extrusion operators over labeled sets.
//!
//! A [`LabeledSet`] is a set of vectors whose coordinates are named by an
//! [`AxisSet`]. Two backends are supported: an exact finite point table and
//! an H-polytope. Extrusion of a finite table is an infinite cylinder, so
//! it only ever happens implicitly inside [`join_extrusions`], where the
//! intersection of cylinders is evaluated as a relational natural join.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{cluster_points, lex_cmp, HPolytope, PolytopeError, DEFAULT_ELIMINATION_CAP};

/// Tolerance for point identity and membership in finite tables.
pub const POINT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AxisError {
    #[error("axis indices must be strictly increasing, got {0:?}")]
    NotIncreasing(Vec<usize>),
    #[error("axis indices start at 1")]
    ZeroIndex,
    #[error("vector has {found} entries but the axis set has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{sub} is not a subset of {sup}")]
    NotSubset { sub: AxisSet, sup: AxisSet },
    #[error("axes {0} are covered by no finite table in the join")]
    UncoveredAxes(AxisSet),
    #[error("cannot mix finite tables and polytopes")]
    BackendMismatch,
    #[error("extruding a finite table to new axes yields an infinite set")]
    UnsupportedMaterialization,
    #[error("non-finite coordinate in point table")]
    NonFinite,
    #[error("join needs at least one set")]
    EmptyJoin,
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Strictly increasing list of positive coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct AxisSet(Vec<usize>);

impl AxisSet {
    pub fn new(indices: Vec<usize>) -> Result<Self, AxisError> {
        if indices.contains(&0) {
            return Err(AxisError::ZeroIndex);
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AxisError::NotIncreasing(indices));
        }
        Ok(AxisSet(indices))
    }

    /// Sorts and deduplicates arbitrary positive indices.
    pub fn from_unsorted<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self, AxisError> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        AxisSet::new(set.into_iter().collect())
    }

    /// `{start, start+1, ..., start+len-1}`.
    pub fn range(start: usize, len: usize) -> Self {
        assert!(start >= 1 || len == 0, "axis indices start at 1");
        AxisSet((start..start + len).collect())
    }

    pub fn empty() -> Self {
        AxisSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0.binary_search(&axis).is_ok()
    }

    /// Zero-based position of `axis` within the set.
    pub fn position(&self, axis: usize) -> Option<usize> {
        self.0.binary_search(&axis).ok()
    }

    pub fn is_subset(&self, other: &AxisSet) -> bool {
        self.0.iter().all(|a| other.contains(*a))
    }

    pub fn is_disjoint(&self, other: &AxisSet) -> bool {
        self.0.iter().all(|a| !other.contains(*a))
    }

    pub fn union(&self, other: &AxisSet) -> AxisSet {
        let set: BTreeSet<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        AxisSet(set.into_iter().collect())
    }

    pub fn intersection(&self, other: &AxisSet) -> AxisSet {
        AxisSet(self.0.iter().copied().filter(|a| other.contains(*a)).collect())
    }

    pub fn difference(&self, other: &AxisSet) -> AxisSet {
        AxisSet(self.0.iter().copied().filter(|a| !other.contains(*a)).collect())
    }

    pub fn union_all<'a, I: IntoIterator<Item = &'a AxisSet>>(sets: I) -> AxisSet {
        let set: BTreeSet<usize> = sets.into_iter().flat_map(|s| s.0.iter().copied()).collect();
        AxisSet(set.into_iter().collect())
    }

    /// Positions of the axes of `self` inside `sup`.
    pub fn positions_in(&self, sup: &AxisSet) -> Result<Vec<usize>, AxisError> {
        self.0
            .iter()
            .map(|&a| sup.position(a))
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| AxisError::NotSubset {
                sub: self.clone(),
                sup: sup.clone(),
            })
    }
}

impl TryFrom<Vec<usize>> for AxisSet {
    type Error = AxisError;
    fn try_from(v: Vec<usize>) -> Result<Self, AxisError> {
        AxisSet::new(v)
    }
}

impl From<AxisSet> for Vec<usize> {
    fn from(a: AxisSet) -> Vec<usize> {
        a.0
    }
}

impl fmt::Display for AxisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

/// Projection of a single vector: keeps the entries whose axis is in `to`.
pub fn project(v: &[f64], from: &AxisSet, to: &AxisSet) -> Result<Vec<f64>, AxisError> {
    if v.len() != from.len() {
        return Err(AxisError::DimensionMismatch {
            expected: from.len(),
            found: v.len(),
        });
    }
    let pos = to.positions_in(from)?;
    Ok(pos.into_iter().map(|p| v[p]).collect())
}

/// Finite set of points of common width, deduplicated and sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable {
    width: usize,
    points: Vec<Vec<f64>>,
}

impl PointTable {
    pub fn new(width: usize, points: Vec<Vec<f64>>) -> Result<Self, AxisError> {
        for p in &points {
            if p.len() != width {
                return Err(AxisError::DimensionMismatch {
                    expected: width,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(AxisError::NonFinite);
            }
        }
        Ok(PointTable {
            width,
            points: cluster_points(points, POINT_EPS),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.points.iter().any(|q| same_point(q, p))
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= POINT_EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetBackend {
    Points(PointTable),
    Polytope(HPolytope),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Points,
    Polytope,
}

/// A set of vectors tagged with the axis set naming its coordinates.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    axes: AxisSet,
    backend: SetBackend,
    empty: OnceLock<bool>,
}

impl LabeledSet {
    pub fn points(axes: AxisSet, points: Vec<Vec<f64>>) -> Result<Self, AxisError> {
        let table = PointTable::new(axes.len(), points)?;
        Ok(LabeledSet::from_parts(axes, SetBackend::Points(table)))
    }

    pub fn polytope(axes: AxisSet, poly: HPolytope) -> Result<Self, AxisError> {
        if poly.dim() != axes.len() {
            return Err(AxisError::DimensionMismatch {
                expected: axes.len(),
                found: poly.dim(),
            });
        }
        Ok(LabeledSet::from_parts(axes, SetBackend::Polytope(poly)))
    }

    pub fn empty_like(axes: AxisSet, kind: BackendKind) -> Self {
        let backend = match kind {
            BackendKind::Points => SetBackend::Points(PointTable {
                width: axes.len(),
                points: Vec::new(),
            }),
            BackendKind::Polytope => SetBackend::Polytope(HPolytope::empty(axes.len())),
        };
        let s = LabeledSet::from_parts(axes, backend);
        let _ = s.empty.set(true);
        s
    }

    fn from_parts(axes: AxisSet, backend: SetBackend) -> Self {
        LabeledSet {
            axes,
            backend,
            empty: OnceLock::new(),
        }
    }

    pub fn axes(&self) -> &AxisSet {
        &self.axes
    }

    pub fn backend(&self) -> &SetBackend {
        &self.backend
    }

    pub fn kind(&self) -> BackendKind {
        match self.backend {
            SetBackend::Points(_) => BackendKind::Points,
            SetBackend::Polytope(_) => BackendKind::Polytope,
        }
    }

    pub fn as_points(&self) -> Option<&PointTable> {
        match &self.backend {
            SetBackend::Points(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_polytope(&self) -> Option<&HPolytope> {
        match &self.backend {
            SetBackend::Polytope(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> Result<bool, AxisError> {
        if let Some(&e) = self.empty.get() {
            return Ok(e);
        }
        let e = match &self.backend {
            SetBackend::Points(t) => t.is_empty(),
            SetBackend::Polytope(p) => p.is_empty()?,
        };
        let _ = self.empty.set(e);
        Ok(e)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        match &self.backend {
            SetBackend::Points(t) => t.contains(point),
            SetBackend::Polytope(p) => p.contains(point, POINT_EPS),
        }
    }

    /// `self ⊆ other` (same axes required). Polytopes are compared through
    /// support functions with tolerance `tol`.
    pub fn is_subset_of(&self, other: &LabeledSet, tol: f64) -> Result<bool, AxisError> {
        self.same_axes(other)?;
        match (&self.backend, &other.backend) {
            (SetBackend::Points(a), SetBackend::Points(b)) => {
                Ok(a.points.iter().all(|p| b.contains(p)))
            }
            (SetBackend::Polytope(a), SetBackend::Polytope(b)) => Ok(b.includes(a, tol)?),
            _ => Err(AxisError::BackendMismatch),
        }
    }

    /// Exact equality for finite tables (up to [`POINT_EPS`]), two-sided
    /// inclusion within `tol` for polytopes.
    pub fn set_eq(&self, other: &LabeledSet, tol: f64) -> Result<bool, AxisError> {
        self.same_axes(other)?;
        match (&self.backend, &other.backend) {
            (SetBackend::Points(a), SetBackend::Points(b)) => Ok(a.len() == b.len()
                && a.points.iter().all(|p| b.contains(p))
                && b.points.iter().all(|p| a.contains(p))),
            (SetBackend::Polytope(a), SetBackend::Polytope(b)) => Ok(a.set_eq(b, tol)?),
            _ => Err(AxisError::BackendMismatch),
        }
    }

    fn same_axes(&self, other: &LabeledSet) -> Result<(), AxisError> {
        if self.axes != other.axes {
            return Err(AxisError::NotSubset {
                sub: self.axes.clone(),
                sup: other.axes.clone(),
            });
        }
        Ok(())
    }
}

/// Projection of a labeled set onto `to ⊆ S.axes`.
pub fn project_set(s: &LabeledSet, to: &AxisSet) -> Result<LabeledSet, AxisError> {
    project_set_with_cap(s, to, DEFAULT_ELIMINATION_CAP)
}

pub fn project_set_with_cap(s: &LabeledSet, to: &AxisSet, cap: usize) -> Result<LabeledSet, AxisError> {
    let keep = to.positions_in(&s.axes)?;
    if to.is_empty() || s.is_empty()? {
        return Ok(LabeledSet::empty_like(to.clone(), s.kind()));
    }
    match &s.backend {
        SetBackend::Points(t) => {
            let pts = t
                .points
                .iter()
                .map(|p| keep.iter().map(|&k| p[k]).collect())
                .collect();
            LabeledSet::points(to.clone(), pts)
        }
        SetBackend::Polytope(p) => {
            if keep.len() == s.axes.len() {
                return Ok(s.clone());
            }
            let out = p.project_onto(&keep, cap)?;
            LabeledSet::polytope(to.clone(), out)
        }
    }
}

/// Cylinder extension of `S` to `into ⊇ S.axes`. Finite tables can only be
/// "extruded" onto their own axes or when empty.
pub fn extrude(s: &LabeledSet, into: &AxisSet) -> Result<LabeledSet, AxisError> {
    let pos = s.axes.positions_in(into)?;
    if s.is_empty()? {
        return Ok(LabeledSet::empty_like(into.clone(), s.kind()));
    }
    if &s.axes == into {
        return Ok(s.clone());
    }
    match &s.backend {
        SetBackend::Points(_) => Err(AxisError::UnsupportedMaterialization),
        SetBackend::Polytope(p) => LabeledSet::polytope(into.clone(), p.embed(into.len(), &pos)?),
    }
}

/// Intersection of the extrusions of every set into `target`.
pub fn join_extrusions(sets: &[&LabeledSet], target: &AxisSet) -> Result<LabeledSet, AxisError> {
    let first = sets.first().ok_or(AxisError::EmptyJoin)?;
    let kind = first.kind();
    if sets.iter().any(|s| s.kind() != kind) {
        return Err(AxisError::BackendMismatch);
    }
    for s in sets {
        s.axes.positions_in(target)?;
    }
    match kind {
        BackendKind::Points => {
            let covered = AxisSet::union_all(sets.iter().map(|s| &s.axes));
            let missing = target.difference(&covered);
            if !missing.is_empty() {
                return Err(AxisError::UncoveredAxes(missing));
            }
            let tables: Vec<(&AxisSet, &PointTable)> = sets
                .iter()
                .map(|s| (&s.axes, s.as_points().unwrap()))
                .collect();
            LabeledSet::points(target.clone(), natural_join(&tables, target))
        }
        BackendKind::Polytope => {
            let mut acc = HPolytope::universe(target.len());
            for s in sets {
                let pos = s.axes.positions_in(target)?;
                acc = acc.stack(&s.as_polytope().unwrap().embed(target.len(), &pos)?)?;
            }
            LabeledSet::polytope(target.clone(), acc.remove_redundancy()?)
        }
    }
}

/// Relational natural join of point tables on their shared axes. The
/// result is laid out over `target`, which must equal the union of axes.
fn natural_join(tables: &[(&AxisSet, &PointTable)], target: &AxisSet) -> Vec<Vec<f64>> {
    let mut remaining: Vec<usize> = (0..tables.len()).collect();
    // partial rows over `target` with NaN marking unbound coordinates
    let mut bound = AxisSet::empty();
    let mut rows: Vec<Vec<f64>> = vec![vec![f64::NAN; target.len()]];
    while !remaining.is_empty() {
        // most overlap with what is already bound, ties to the smaller table
        let (slot, &next) = remaining
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                let oa = tables[a].0.intersection(&bound).len();
                let ob = tables[b].0.intersection(&bound).len();
                oa.cmp(&ob)
                    .then(tables[b].1.len().cmp(&tables[a].1.len()))
                    .then(b.cmp(&a))
            })
            .unwrap();
        remaining.remove(slot);
        let (axes, table) = tables[next];
        let pos: Vec<usize> = axes.iter().map(|a| target.position(a).unwrap()).collect();
        let shared: Vec<(usize, usize)> = pos
            .iter()
            .enumerate()
            .filter(|(_, &p)| bound.contains(target.indices()[p]))
            .map(|(k, &p)| (k, p))
            .collect();
        let mut joined = Vec::new();
        for row in &rows {
            for pt in table.points() {
                if shared.iter().all(|&(k, p)| (row[p] - pt[k]).abs() <= POINT_EPS) {
                    let mut r = row.clone();
                    for (k, &p) in pos.iter().enumerate() {
                        r[p] = pt[k];
                    }
                    joined.push(r);
                }
            }
        }
        rows = joined;
        bound = bound.union(axes);
        if rows.is_empty() {
            break;
        }
    }
    rows.sort_by(|a, b| lex_cmp(a, b));
    rows
}
