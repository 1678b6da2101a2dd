//! Box domains, their partition into subboxes, and field-node sets.
//!
//! The partition-of-unity functions `J_j` are the indicators of the subboxes.
//! A point on a face shared by several subboxes belongs to the one with the
//! lowest index, so exactly one indicator is 1 at every point of the domain.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sobol::params::JoeKuoD6;
use sobol::Sobol;

use crate::error::{Error, Result};

/// Highest dimension the Sobol direction numbers cover.
pub const MAX_SOBOL_DIM: usize = 21_201;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid(format!("axis {j}: need lower < upper, got [{a}, {b}]")));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// `[a, b]ⁿ`.
    pub fn cube(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; dim], vec![b; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Faces the point lies on (empty for interior points).
    pub fn faces_of(&self, x: &[f64]) -> Vec<Face> {
        let mut faces = Vec::new();
        for (axis, v) in x.iter().enumerate() {
            if *v == self.lower[axis] {
                faces.push(Face::new(axis, Side::Lower));
            }
            if *v == self.upper[axis] {
                faces.push(Face::new(axis, Side::Upper));
            }
        }
        faces
    }

    pub fn faces(&self) -> impl Iterator<Item = Face> {
        (0..self.dim()).flat_map(|axis| [Face::new(axis, Side::Lower), Face::new(axis, Side::Upper)])
    }

    /// `(n-1)`-dimensional measure of a face.
    pub fn face_measure(&self, face: Face) -> f64 {
        (0..self.dim())
            .filter(|&j| j != face.axis)
            .map(|j| self.width(j))
            .product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Face { axis, side }
    }

    /// Sign of the outward normal component along `axis`.
    pub fn outward_sign(&self) -> f64 {
        match self.side {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.side {
            Side::Lower => '-',
            Side::Upper => '+',
        };
        write!(f, "{s}x{}", self.axis + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub bounds: BoxDomain,
    pub center: Vec<f64>,
    /// Per-axis cell coordinates.
    pub cell: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Partition {
    domain: BoxDomain,
    splits: Vec<usize>,
    edges: Vec<Vec<f64>>,
    subdomains: Vec<Subdomain>,
}

/// Equal-width subboxes, numbered row-major with the last axis fastest.
pub fn partition_box(domain: &BoxDomain, splits: &[usize]) -> Result<Partition> {
    if splits.len() != domain.dim() {
        return Err(Error::invalid(format!(
            "{} split counts for a {}-dimensional box",
            splits.len(),
            domain.dim()
        )));
    }
    if let Some(j) = splits.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("split count for axis {j} must be at least 1")));
    }
    let edges: Vec<Vec<f64>> = splits
        .iter()
        .enumerate()
        .map(|(axis, &d)| {
            let (a, b) = (domain.lower[axis], domain.upper[axis]);
            (0..=d)
                .map(|c| {
                    if c == d {
                        b
                    } else {
                        a + (b - a) * (c as f64) / (d as f64)
                    }
                })
                .collect()
        })
        .collect();
    let total: usize = splits.iter().product();
    let mut subdomains = Vec::with_capacity(total);
    let mut cell = vec![0usize; splits.len()];
    for _ in 0..total {
        let lower: Vec<f64> = cell.iter().enumerate().map(|(ax, &c)| edges[ax][c]).collect();
        let upper: Vec<f64> = cell.iter().enumerate().map(|(ax, &c)| edges[ax][c + 1]).collect();
        let bounds = BoxDomain::new(lower, upper)?;
        subdomains.push(Subdomain {
            center: bounds.center(),
            bounds,
            cell: cell.clone(),
        });
        for ax in (0..cell.len()).rev() {
            cell[ax] += 1;
            if cell[ax] < splits[ax] {
                break;
            }
            cell[ax] = 0;
        }
    }
    Ok(Partition {
        domain: domain.clone(),
        splits: splits.to_vec(),
        edges,
        subdomains,
    })
}

impl Partition {
    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn splits(&self) -> &[usize] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn subdomain(&self, j: usize) -> &Subdomain {
        &self.subdomains[j]
    }

    /// Longest subbox edge.
    pub fn max_edge(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|e| e.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    fn flat_index(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.splits).fold(0, |acc, (c, d)| acc * d + c)
    }

    /// Index of the subdomain whose indicator is 1 at `x`.
    pub fn characteristic(&self, x: &[f64]) -> Result<usize> {
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let cell: Vec<usize> = x
            .iter()
            .zip(&self.edges)
            .map(|(v, e)| {
                // first cell c with v <= upper edge, so shared faces go low
                let c = e[1..].partition_point(|up| up < v);
                c.min(e.len() - 2)
            })
            .collect();
        Ok(self.flat_index(&cell))
    }

    /// Faces of the global box that subdomain `j` touches.
    pub fn boundary_faces_of(&self, j: usize) -> Vec<Face> {
        let cell = &self.subdomains[j].cell;
        let mut faces = Vec::new();
        for (axis, (&c, &d)) in cell.iter().zip(&self.splits).enumerate() {
            if c == 0 {
                faces.push(Face::new(axis, Side::Lower));
            }
            if c + 1 == d {
                faces.push(Face::new(axis, Side::Upper));
            }
        }
        faces
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Interior,
    Boundary,
    Fictitious,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Boundary => "boundary",
            NodeKind::Fictitious => "fictitious",
        }
    }

    /// Interior and boundary nodes sample the field; fictitious ones do not.
    pub fn is_field(&self) -> bool {
        !matches!(self, NodeKind::Fictitious)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStrategy {
    Sobol,
    Grid,
}

#[derive(Clone, Debug)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    kinds: Vec<NodeKind>,
    faces: Vec<Vec<Face>>,
    paired: Vec<Option<usize>>,
    owners: Option<Vec<usize>>,
}

impl NodeSet {
    fn empty(dim: usize) -> Self {
        NodeSet {
            dim,
            coords: Vec::new(),
            kinds: Vec::new(),
            faces: Vec::new(),
            paired: Vec::new(),
            owners: None,
        }
    }

    fn push(&mut self, x: &[f64], kind: NodeKind, faces: Vec<Face>, paired: Option<usize>) {
        debug_assert_eq!(x.len(), self.dim);
        self.coords.extend_from_slice(x);
        self.kinds.push(kind);
        self.faces.push(faces);
        self.paired.push(paired);
    }

    /// Builds a set from explicit points classified against `domain`.
    pub fn from_points(domain: &BoxDomain, points: &[Vec<f64>]) -> Result<Self> {
        let mut set = NodeSet::empty(domain.dim());
        for p in points {
            if !domain.contains(p) {
                return Err(Error::OutOfDomain { point: p.clone() });
            }
            let faces = domain.faces_of(p);
            let kind = if faces.is_empty() {
                NodeKind::Interior
            } else {
                NodeKind::Boundary
            };
            set.push(p, kind, faces, None);
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    /// Faces a boundary node lies on, or the single face a fictitious node
    /// was pushed out through.
    pub fn faces(&self, i: usize) -> &[Face] {
        &self.faces[i]
    }

    /// For a fictitious node, the boundary node it was generated from.
    pub fn paired(&self, i: usize) -> Option<usize> {
        self.paired[i]
    }

    pub fn owner(&self, i: usize) -> Option<usize> {
        self.owners.as_ref().map(|o| o[i])
    }

    pub fn owners(&self) -> Option<&[usize]> {
        self.owners.as_deref()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }

    /// Interior plus boundary nodes.
    pub fn field_count(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_field()).count()
    }

    /// Assigns every interior/boundary node to the subdomain selected by the
    /// characteristic map; fictitious nodes follow their paired node.
    pub fn assign_owners(&mut self, partition: &Partition) -> Result<()> {
        let mut owners = vec![0usize; self.len()];
        for (i, o) in owners.iter_mut().enumerate() {
            if self.kinds[i].is_field() {
                *o = partition.characteristic(self.point(i))?;
            }
        }
        for i in 0..self.len() {
            if self.kinds[i] == NodeKind::Fictitious {
                let p = self.paired[i]
                    .ok_or_else(|| Error::Internal(format!("fictitious node {i} has no paired boundary node")))?;
                owners[i] = owners[p];
            }
        }
        self.owners = Some(owners);
        Ok(())
    }

    /// Node ids owned by each subdomain, in increasing id order.
    pub fn nodes_by_owner(&self, subdomains: usize) -> Result<Vec<Vec<usize>>> {
        let owners = self
            .owners
            .as_ref()
            .ok_or_else(|| Error::Internal("node owners have not been assigned".into()))?;
        let mut lists = vec![Vec::new(); subdomains];
        for (i, &o) in owners.iter().enumerate() {
            lists
                .get_mut(o)
                .ok_or_else(|| Error::Internal(format!("node {i} owned by unknown subdomain {o}")))?
                .push(i);
        }
        Ok(lists)
    }

    /// Mean nearest-neighbour distance between the boundary nodes on `face`,
    /// or `None` when fewer than two lie on it.
    pub fn mean_face_spacing(&self, face: Face) -> Option<f64> {
        let on_face: Vec<usize> = (0..self.len())
            .filter(|&i| self.kinds[i] == NodeKind::Boundary && self.faces[i].contains(&face))
            .collect();
        if on_face.len() < 2 {
            return None;
        }
        let total: f64 = on_face
            .iter()
            .map(|&i| {
                on_face
                    .iter()
                    .filter(|&&k| k != i)
                    .map(|&k| dist_sq(self.point(i), self.point(k)))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .sum();
        Some(total / on_face.len() as f64)
    }

    /// CSV with columns `id,kind,owner,x1..xn`; owner is empty when unassigned.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "id,kind,owner")?;
        for j in 1..=self.dim {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{i},{},", self.kinds[i].as_str())?;
            if let Some(o) = self.owner(i) {
                write!(w, "{o}")?;
            }
            for v in self.point(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Unit-cube Sobol points, skipping the all-zero first point plus `skip` more.
fn sobol_points(dims: usize, count: usize, skip: u64) -> Result<Vec<Vec<f64>>> {
    if dims == 0 || dims > MAX_SOBOL_DIM {
        return Err(Error::invalid(format!(
            "Sobol generator supports 1..={MAX_SOBOL_DIM} dimensions, got {dims}"
        )));
    }
    let params = if dims <= 1000 {
        JoeKuoD6::standard()
    } else {
        JoeKuoD6::extended()
    };
    let skip = usize::try_from(skip).map_err(|_| Error::invalid("seed too large"))?;
    Ok(Sobol::<f64>::new(dims, &params).skip(1 + skip).take(count).collect())
}

/// Default number of boundary nodes for the Sobol strategy: the share of the
/// volume lying within one mean spacing of the boundary, capped at half.
pub fn default_boundary_count(domain: &BoxDomain, count: usize) -> usize {
    let n = domain.dim();
    if count < 2 {
        return 0;
    }
    let h = (domain.volume() / count as f64).powf(1.0 / n as f64);
    let inner: f64 = (0..n).map(|j| (1.0 - 2.0 * h / domain.width(j)).max(0.0)).product();
    let share = (1.0 - inner).clamp(0.0, 0.5);
    let nb = (count as f64 * share).round() as usize;
    let nb = nb.min(count - 1);
    if n == 1 {
        nb.min(2)
    } else {
        nb
    }
}

pub fn generate_nodes(domain: &BoxDomain, count: usize, strategy: NodeStrategy, seed: u64) -> Result<NodeSet> {
    generate_nodes_with(domain, count, strategy, seed, None)
}

/// Like [`generate_nodes`], with an explicit number of boundary nodes for the
/// Sobol strategy.
pub fn generate_nodes_with(
    domain: &BoxDomain,
    count: usize,
    strategy: NodeStrategy,
    seed: u64,
    boundary_count: Option<usize>,
) -> Result<NodeSet> {
    if count == 0 {
        return Err(Error::invalid("node count must be at least 1"));
    }
    match strategy {
        NodeStrategy::Grid => grid_nodes(domain, count),
        NodeStrategy::Sobol => {
            let nb = boundary_count.unwrap_or_else(|| default_boundary_count(domain, count));
            if nb >= count && count > 1 {
                return Err(Error::invalid(format!(
                    "{nb} boundary nodes leave no interior nodes out of {count}"
                )));
            }
            sobol_nodes(domain, count, nb, seed)
        }
    }
}

fn grid_nodes(domain: &BoxDomain, count: usize) -> Result<NodeSet> {
    let n = domain.dim();
    let per_axis = (count as f64).powf(1.0 / n as f64).round() as usize;
    if per_axis.checked_pow(n as u32) != Some(count) {
        return Err(Error::invalid(format!(
            "grid strategy needs a perfect {n}-th power node count, got {count}"
        )));
    }
    let coord = |axis: usize, i: usize| -> f64 {
        let (a, b) = (domain.lower[axis], domain.upper[axis]);
        match (per_axis, i) {
            (1, _) => 0.5 * (a + b),
            (p, i) if i + 1 == p => b,
            (p, i) => a + (b - a) * (i as f64) / ((p - 1) as f64),
        }
    };
    let mut points = Vec::with_capacity(count);
    let mut idx = vec![0usize; n];
    for _ in 0..count {
        points.push((0..n).map(|ax| coord(ax, idx[ax])).collect::<Vec<f64>>());
        for ax in (0..n).rev() {
            idx[ax] += 1;
            if idx[ax] < per_axis {
                break;
            }
            idx[ax] = 0;
        }
    }
    NodeSet::from_points(domain, &points)
}

fn sobol_nodes(domain: &BoxDomain, count: usize, boundary: usize, seed: u64) -> Result<NodeSet> {
    let n = domain.dim();
    let interior = count - boundary;
    let mut set = NodeSet::empty(n);

    let map = |u: &[f64], axes: &mut dyn Iterator<Item = usize>| -> Vec<(usize, f64)> {
        u.iter()
            .zip(axes)
            .map(|(s, ax)| (ax, domain.lower[ax] + domain.width(ax) * s))
            .collect()
    };

    // Interior: the sequence never returns a coordinate of exactly 0 after
    // its first point, and never 1, so every mapped point is strictly inside.
    let mut produced = 0;
    let mut skip = seed;
    while produced < interior {
        for u in sobol_points(n, interior - produced, skip)? {
            skip += 1;
            let x: Vec<f64> = map(&u, &mut (0..n)).into_iter().map(|(_, v)| v).collect();
            if domain.faces_of(&x).is_empty() {
                set.push(&x, NodeKind::Interior, Vec::new(), None);
                produced += 1;
            }
        }
    }

    if boundary == 0 {
        return Ok(set);
    }
    let faces: Vec<Face> = domain.faces().collect();
    let per_face = apportion(
        boundary,
        &faces.iter().map(|f| domain.face_measure(*f)).collect::<Vec<_>>(),
    );
    for (face, k) in faces.into_iter().zip(per_face) {
        if k == 0 {
            continue;
        }
        let on_face = |tangent: &[f64]| -> Vec<f64> {
            let mut x = vec![0.0; n];
            x[face.axis] = match face.side {
                Side::Lower => domain.lower[face.axis],
                Side::Upper => domain.upper[face.axis],
            };
            let others = (0..n).filter(|&j| j != face.axis);
            for (ax, v) in map(tangent, &mut others.into_iter()) {
                x[ax] = v;
            }
            x
        };
        if n == 1 {
            set.push(&on_face(&[]), NodeKind::Boundary, vec![face], None);
            continue;
        }
        for u in sobol_points(n - 1, k, seed)? {
            let x = on_face(&u);
            let faces = domain.faces_of(&x);
            set.push(&x, NodeKind::Boundary, faces, None);
        }
    }
    Ok(set)
}

/// Splits `total` proportionally to `weights` by largest remainders; ties go
/// to the earlier entry.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Appends one fictitious node per (boundary node, touched face) at
/// `offset` along the outward normal.
pub fn add_fictitious(nodes: &NodeSet, partition: &Partition, offset: f64) -> Result<NodeSet> {
    add_fictitious_with(nodes, partition, |_| offset)
}

/// Like [`add_fictitious`] with a per-face offset.
pub fn add_fictitious_with(nodes: &NodeSet, partition: &Partition, offset: impl Fn(Face) -> f64) -> Result<NodeSet> {
    if nodes.count(NodeKind::Boundary) == 0 {
        return Err(Error::invalid("node set has no boundary nodes"));
    }
    if nodes.count(NodeKind::Fictitious) > 0 {
        return Err(Error::invalid("node set already has fictitious nodes"));
    }
    let mut out = nodes.clone();
    out.assign_owners(partition)?;
    let mut owners = out.owners.take().expect("owners just assigned");
    for i in 0..nodes.len() {
        if nodes.kind(i) != NodeKind::Boundary {
            continue;
        }
        for &face in nodes.faces(i) {
            let h = offset(face);
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid(format!(
                    "fictitious offset must be positive, got {h} on face {face}"
                )));
            }
            let mut x = nodes.point(i).to_vec();
            x[face.axis] += face.outward_sign() * h;
            out.push(&x, NodeKind::Fictitious, vec![face], Some(i));
            owners.push(owners[i]);
        }
    }
    out.owners = Some(owners);
    Ok(out)
}

/// Per-face default offsets: the mean nearest-neighbour spacing of the
/// boundary nodes on that face, or the mean node spacing of the whole set
/// when a face has fewer than two nodes.
pub fn default_face_offsets(nodes: &NodeSet, domain: &BoxDomain) -> Vec<(Face, f64)> {
    let n = domain.dim();
    let fallback = (domain.volume() / nodes.field_count().max(1) as f64).powf(1.0 / n as f64);
    domain
        .faces()
        .map(|f| (f, nodes.mean_face_spacing(f).unwrap_or(fallback)))
        .collect()
}

/// Volume-equivalent spacing `(|Ω| / N)^{1/n}`.
pub fn mean_spacing(domain: &BoxDomain, count: usize) -> f64 {
    (domain.volume() / count.max(1) as f64).powf(1.0 / domain.dim() as f64)
}
