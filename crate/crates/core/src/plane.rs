//! Finite projective planes: construction of PG(2,q), ingestion, validation, zero-graphs.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gf::{Elem, Field};

pub use crate::residue::canonical_residue_model;

/// Packed bit matrix with fixed row stride.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize) -> BitMatrix {
        let words = cols.div_ceil(64).max(1);
        BitMatrix { rows, cols, words, data: vec![0; rows * words] }
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }
    pub fn set(&mut self, r: usize, c: usize, on: bool) {
        let w = &mut self.data[r * self.words + c / 64];
        if on {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }
    pub fn flip(&mut self, r: usize, c: usize) {
        self.data[r * self.words + c / 64] ^= 1 << (c % 64);
    }
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }
    pub fn row_count(&self, r: usize) -> u32 {
        self.row(r).iter().map(|w| w.count_ones()).sum()
    }
    pub fn row_ones(&self, r: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(r, c)).collect()
    }
    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::new(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }
    /// Popcount of the AND of two rows.
    pub fn common(&self, a: usize, b: usize) -> u32 {
        self.row(a).iter().zip(self.row(b)).map(|(x, y)| (x & y).count_ones()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Constructed { q: usize },
    Ingested { source: String },
}

/// Homogeneous coordinates of a constructed plane.
#[derive(Debug, Clone)]
pub struct Coordinates {
    pub field: Field,
    pub points: Vec<[Elem; 3]>,
    pub lines: Vec<[Elem; 3]>,
}

const NONE16: u16 = u16::MAX;

/// A validated projective plane of order q with v = q^2+q+1 points and lines.
#[derive(Debug, Clone)]
pub struct ProjectivePlane {
    q: usize,
    v: usize,
    lines: Vec<Vec<usize>>,
    point_lines: Vec<Vec<usize>>,
    /// Rows are points, columns are lines.
    incidence: BitMatrix,
    join: Vec<u16>,
    meet: Vec<u16>,
    coords: Option<Coordinates>,
    provenance: Provenance,
}

/// Checks the projective-plane axioms on a point-by-line incidence matrix.
pub fn validate_incidence(q: usize, inc: &BitMatrix) -> Result<()> {
    let v = q * q + q + 1;
    let violation = |axiom: &'static str, witness: String| Err(Error::AxiomViolation { axiom, witness });
    if q < 2 {
        return violation("order at least 2", format!("q={q}"));
    }
    if inc.rows() != v || inc.cols() != v {
        return violation("point and line counts equal q^2+q+1", format!("{}x{}", inc.rows(), inc.cols()));
    }
    let by_line = inc.transpose();
    for l in 0..v {
        let n = by_line.row_count(l) as usize;
        if n != q + 1 {
            return violation("every line has q+1 points", format!("line {l} has {n}"));
        }
    }
    for a in 0..v {
        for b in a + 1..v {
            let n = by_line.common(a, b);
            if n != 1 {
                return violation("two lines meet in exactly one point", format!("lines {a},{b} share {n}"));
            }
        }
    }
    for a in 0..v {
        for b in a + 1..v {
            let n = inc.common(a, b);
            if n != 1 {
                return violation("two points lie on exactly one line", format!("points {a},{b} share {n}"));
            }
        }
    }
    for p in 0..v {
        let n = inc.row_count(p) as usize;
        if n != q + 1 {
            return violation("every point is on q+1 lines", format!("point {p} is on {n}"));
        }
    }
    if find_quadrangle(inc).is_none() {
        return violation("four points no three collinear", "none found".into());
    }
    Ok(())
}

fn find_quadrangle(inc: &BitMatrix) -> Option<[usize; 4]> {
    let v = inc.rows();
    let collinear = |a: usize, b: usize, c: usize| {
        inc.row(a).iter().zip(inc.row(b)).zip(inc.row(c)).any(|((x, y), z)| x & y & z != 0)
    };
    for a in 0..v {
        for b in a + 1..v {
            for c in b + 1..v {
                if collinear(a, b, c) {
                    continue;
                }
                for d in c + 1..v {
                    if !collinear(a, b, d) && !collinear(a, c, d) && !collinear(b, c, d) {
                        return Some([a, b, c, d]);
                    }
                }
            }
        }
    }
    None
}

impl ProjectivePlane {
    fn from_lines(q: usize, lines: Vec<Vec<usize>>, coords: Option<Coordinates>, provenance: Provenance) -> Result<Self> {
        let v = q * q + q + 1;
        let mut inc = BitMatrix::new(v, v);
        for (l, pts) in lines.iter().enumerate() {
            for &p in pts {
                inc.set(p, l, true);
            }
        }
        validate_incidence(q, &inc)?;
        let point_lines: Vec<Vec<usize>> = (0..v).map(|p| inc.row_ones(p)).collect();
        let mut join = vec![NONE16; v * v];
        for (l, pts) in lines.iter().enumerate() {
            for &a in pts {
                for &b in pts {
                    if a != b {
                        join[a * v + b] = l as u16;
                    }
                }
            }
        }
        let mut meet = vec![NONE16; v * v];
        for (p, ls) in point_lines.iter().enumerate() {
            for &a in ls {
                for &b in ls {
                    if a != b {
                        meet[a * v + b] = p as u16;
                    }
                }
            }
        }
        Ok(ProjectivePlane { q, v, lines, point_lines, incidence: inc, join, meet, coords, provenance })
    }

    pub fn order(&self) -> usize {
        self.q
    }
    pub fn size(&self) -> usize {
        self.v
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
    pub fn coordinates(&self) -> Option<&Coordinates> {
        self.coords.as_ref()
    }
    pub fn incidence(&self) -> &BitMatrix {
        &self.incidence
    }
    /// Points on a line, increasing.
    pub fn line_points(&self, l: usize) -> &[usize] {
        &self.lines[l]
    }
    /// Lines through a point, increasing.
    pub fn pencil(&self, p: usize) -> &[usize] {
        &self.point_lines[p]
    }
    pub fn incident(&self, p: usize, l: usize) -> bool {
        self.incidence.get(p, l)
    }
    /// The line through two distinct points.
    pub fn join(&self, a: usize, b: usize) -> Option<usize> {
        let l = self.join[a * self.v + b];
        (l != NONE16).then_some(l as usize)
    }
    /// The intersection point of two distinct lines.
    pub fn meet(&self, a: usize, b: usize) -> Option<usize> {
        let p = self.meet[a * self.v + b];
        (p != NONE16).then_some(p as usize)
    }

    /// Plane text format: header then one record per line.
    pub fn dump(&self) -> String {
        let mut s = format!("plane q={} v={}\n", self.q, self.v);
        for (i, pts) in self.lines.iter().enumerate() {
            let _ = write!(s, "line {i}:");
            for p in pts {
                let _ = write!(s, " {p}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, source: &str) -> Result<ProjectivePlane> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut it = text.lines().enumerate();
        let (_, header) = it.next().ok_or_else(|| perr(1, "empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (q, v) = match fields.as_slice() {
            ["plane", qs, vs] => {
                let q = qs.strip_prefix("q=").and_then(|x| x.parse::<usize>().ok());
                let v = vs.strip_prefix("v=").and_then(|x| x.parse::<usize>().ok());
                match (q, v) {
                    (Some(q), Some(v)) => (q, v),
                    _ => return Err(perr(1, format!("bad header {header:?}"))),
                }
            }
            _ => return Err(perr(1, format!("bad header {header:?}"))),
        };
        if !(2..=27).contains(&q) {
            return Err(perr(1, format!("order {q} out of range")));
        }
        if v != q * q + q + 1 {
            return Err(perr(1, format!("v={v} but q^2+q+1={}", q * q + q + 1)));
        }
        let mut lines = Vec::with_capacity(v);
        for (ln, raw) in it {
            let ln = ln + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let (head, rest) = raw.split_once(':').ok_or_else(|| perr(ln, "missing ':'".into()))?;
            let idx = head
                .strip_prefix("line ")
                .and_then(|x| x.trim().parse::<usize>().ok())
                .ok_or_else(|| perr(ln, format!("bad record head {head:?}")))?;
            if idx != lines.len() {
                return Err(perr(ln, format!("expected line {}, found {idx}", lines.len())));
            }
            let mut pts = Vec::with_capacity(q + 1);
            for tok in rest.split_whitespace() {
                let p: usize = tok.parse().map_err(|_| perr(ln, format!("bad point index {tok:?}")))?;
                if p >= v {
                    return Err(perr(ln, format!("point index {p} out of range")));
                }
                if pts.last().is_some_and(|&last| last >= p) {
                    return Err(perr(ln, "point indices must be strictly increasing".into()));
                }
                pts.push(p);
            }
            lines.push(pts);
        }
        if lines.len() != v {
            return Err(perr(v + 1, format!("expected {v} lines, found {}", lines.len())));
        }
        ProjectivePlane::from_lines(q, lines, None, Provenance::Ingested { source: source.to_string() })
    }
}

/// Normalized homogeneous triples (first nonzero coordinate 1), lexicographic.
fn normalized_triples(f: &Field) -> Vec<[Elem; 3]> {
    let q = f.order();
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                let t = [Elem(a), Elem(b), Elem(c)];
                if t.iter().find(|x| !x.is_zero()) == Some(&Elem::ONE) {
                    out.push(t);
                }
            }
        }
    }
    out
}

pub fn dot(f: &Field, a: &[Elem; 3], b: &[Elem; 3]) -> Elem {
    f.sum((0..3).map(|i| f.mul(a[i], b[i])))
}

/// Desarguesian plane PG(2,q) for prime powers q up to 27.
pub fn build_pg2(q: usize) -> Result<Arc<ProjectivePlane>> {
    if q > 27 {
        return Err(Error::UnsupportedOrder(q as u64));
    }
    let field = Field::with_order(q as u64).map_err(|_| Error::UnsupportedOrder(q as u64))?;
    let triples = normalized_triples(&field);
    let lines: Vec<Vec<usize>> = triples
        .iter()
        .map(|l| (0..triples.len()).filter(|&p| dot(&field, &triples[p], l).is_zero()).collect())
        .collect();
    let coords = Coordinates { field, points: triples.clone(), lines: triples };
    ProjectivePlane::from_lines(q, lines, Some(coords), Provenance::Constructed { q }).map(Arc::new)
}

pub fn ingest_plane(path: &Path) -> Result<Arc<ProjectivePlane>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ProjectivePlane::parse(&text, &path.display().to_string()).map(Arc::new)
}

/// Bipartite graph with left vertices 0..n_left and right vertices 0..n_right.
///
/// Edges are kept sorted lexicographically by (left, right); that order is the global edge order.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    n_left: usize,
    n_right: usize,
    edges: Vec<(u32, u32)>,
    left_adj: Vec<Vec<u32>>,
    right_adj: Vec<Vec<u32>>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize, mut edges: Vec<(u32, u32)>) -> BipartiteGraph {
        edges.sort_unstable();
        edges.dedup();
        let mut left_adj = vec![Vec::new(); n_left];
        let mut right_adj = vec![Vec::new(); n_right];
        for &(a, b) in &edges {
            left_adj[a as usize].push(b);
            right_adj[b as usize].push(a);
        }
        BipartiteGraph { n_left, n_right, edges, left_adj, right_adj }
    }
    pub fn n_left(&self) -> usize {
        self.n_left
    }
    pub fn n_right(&self) -> usize {
        self.n_right
    }
    pub fn vertex_count(&self) -> usize {
        self.n_left + self.n_right
    }
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a as u32, b as u32)).ok()
    }
    pub fn left_neighbors(&self, a: usize) -> &[u32] {
        &self.left_adj[a]
    }
    pub fn right_neighbors(&self, b: usize) -> &[u32] {
        &self.right_adj[b]
    }

    /// Vertices touched by at least one edge, as (left, right) flags.
    fn active(&self) -> (Vec<bool>, Vec<bool>) {
        let l = self.left_adj.iter().map(|x| !x.is_empty()).collect();
        let r = self.right_adj.iter().map(|x| !x.is_empty()).collect();
        (l, r)
    }

    /// BFS distances from a vertex; left vertices are 0..n_left, right ones follow.
    pub fn bfs(&self, start: usize) -> Vec<Option<u32>> {
        let n = self.vertex_count();
        let mut dist = vec![None; n];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap();
            let nbrs: Box<dyn Iterator<Item = usize>> = if x < self.n_left {
                Box::new(self.left_adj[x].iter().map(|&b| self.n_left + b as usize))
            } else {
                Box::new(self.right_adj[x - self.n_left].iter().map(|&a| a as usize))
            };
            for y in nbrs {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Whether the vertices carrying edges form one component (isolated vertices ignored).
    pub fn is_connected(&self) -> bool {
        let (l, r) = self.active();
        let Some(start) = l.iter().position(|&x| x) else {
            return true;
        };
        let dist = self.bfs(start);
        l.iter().enumerate().all(|(i, &on)| !on || dist[i].is_some())
            && r.iter().enumerate().all(|(j, &on)| !on || dist[self.n_left + j].is_some())
    }

    /// Number of vertices that carry at least one edge.
    pub fn active_vertex_count(&self) -> usize {
        let (l, r) = self.active();
        l.iter().chain(r.iter()).filter(|&&x| x).count()
    }

    pub fn diameter(&self) -> Result<u32> {
        let mut best = 0;
        for s in 0..self.vertex_count() {
            for d in self.bfs(s) {
                best = best.max(d.ok_or(Error::Disconnected)?);
            }
        }
        Ok(best)
    }
}

/// The nonincidence graph of a plane: points on the left, lines on the right.
#[derive(Debug, Clone)]
pub struct ZeroGraph {
    pub plane: Arc<ProjectivePlane>,
    pub graph: BipartiteGraph,
    /// edge index for (p, l), or u32::MAX at incidences
    dense_ids: Vec<u32>,
}

impl ZeroGraph {
    pub fn edge_id(&self, p: usize, l: usize) -> Option<usize> {
        let id = self.dense_ids[p * self.plane.size() + l];
        (id != u32::MAX).then_some(id as usize)
    }
    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }
}

pub fn nonincidence_graph(plane: &Arc<ProjectivePlane>) -> ZeroGraph {
    let v = plane.size();
    let mut edges = Vec::with_capacity(v * plane.order() * plane.order());
    let mut dense_ids = vec![u32::MAX; v * v];
    for p in 0..v {
        for l in 0..v {
            if !plane.incident(p, l) {
                dense_ids[p * v + l] = edges.len() as u32;
                edges.push((p as u32, l as u32));
            }
        }
    }
    ZeroGraph { plane: plane.clone(), graph: BipartiteGraph::new(v, v, edges), dense_ids }
}

pub fn graph_diameter(zg: &ZeroGraph) -> Result<u32> {
    zg.graph.diameter()
}
