//! Edge-labeled zero-graphs: alternating holonomy, spanning-tree factorization,
//! GF(2) cycle spaces, trimmed degenerate charts and their transition scalars.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::census::WitnessRecord;
use crate::error::{Error, Result};
use crate::gf::{Elem, Field};
use crate::plane::{BipartiteGraph, ProjectivePlane};
use crate::residue::{cross_ratio, ResidueModel};

/// A bipartite graph (points left, lines right) with a nonzero label per edge.
#[derive(Debug, Clone)]
pub struct LabeledZeroGraph {
    pub field: Field,
    pub graph: BipartiteGraph,
    /// indexed by edge id
    pub labels: Vec<Elem>,
}

impl LabeledZeroGraph {
    pub fn new(field: Field, graph: BipartiteGraph, labels: Vec<Elem>) -> Result<Self> {
        if labels.len() != graph.edge_count() {
            return Err(Error::ShapeMismatch(format!("{} labels for {} edges", labels.len(), graph.edge_count())));
        }
        if labels.iter().any(|x| x.is_zero()) {
            return Err(Error::ZeroEntry);
        }
        Ok(LabeledZeroGraph { field, graph, labels })
    }

    /// The full nonincidence graph labeled by model residues.
    pub fn from_model(model: &ResidueModel) -> Self {
        let zg = crate::plane::nonincidence_graph(model.plane());
        let labels = zg.graph.edges().iter().map(|&(p, l)| model.get(p as usize, l as usize)).collect();
        LabeledZeroGraph { field: model.field().clone(), graph: zg.graph, labels }
    }

    /// Labels alpha_p * beta_l on the given graph.
    pub fn from_potentials(field: Field, graph: BipartiteGraph, alpha: &[Elem], beta: &[Elem]) -> Result<Self> {
        let labels = graph.edges().iter().map(|&(p, l)| field.mul(alpha[p as usize], beta[l as usize])).collect();
        LabeledZeroGraph::new(field, graph, labels)
    }

    pub fn label(&self, p: usize, l: usize) -> Option<Elem> {
        self.graph.edge_id(p, l).map(|e| self.labels[e])
    }

    /// Keeps the edges accepted by `keep`, with their labels.
    pub fn subgraph(&self, keep: impl Fn(usize, usize) -> bool) -> LabeledZeroGraph {
        let (edges, labels): (Vec<_>, Vec<_>) = self
            .graph
            .edges()
            .iter()
            .zip(&self.labels)
            .filter(|(&(p, l), _)| keep(p as usize, l as usize))
            .map(|(&e, &x)| (e, x))
            .unzip();
        let graph = BipartiteGraph::new(self.graph.n_left(), self.graph.n_right(), edges);
        LabeledZeroGraph { field: self.field.clone(), graph, labels }
    }
}

/// Closed walk p0 - l0 - p1 - l1 - ... - p_{k-1} - l_{k-1} - p0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvenCycle {
    pub points: Vec<usize>,
    pub lines: Vec<usize>,
}

impl EvenCycle {
    pub fn half_length(&self) -> usize {
        self.points.len()
    }

    /// Edges in walk order: (p_i, l_i) then (p_{i+1}, l_i).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let k = self.points.len();
        (0..k).flat_map(|i| [(self.points[i], self.lines[i]), (self.points[(i + 1) % k], self.lines[i])]).collect()
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.points.len();
        if k < 2 || self.lines.len() != k {
            return Err(Error::NotACycle(format!("{} points and {} lines", k, self.lines.len())));
        }
        let distinct = |xs: &[usize]| {
            let mut s = xs.to_vec();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        };
        if !distinct(&self.points) || !distinct(&self.lines) {
            return Err(Error::NotACycle("repeated vertex".into()));
        }
        Ok(())
    }
}

/// prod_i label(p_i, l_i) / label(p_{i+1}, l_i); `None` from `label` means a missing edge.
pub fn alternating_product(f: &Field, c: &EvenCycle, label: impl Fn(usize, usize) -> Option<Elem>) -> Result<Elem> {
    c.check_shape()?;
    let k = c.points.len();
    let (mut num, mut den) = (Elem::ONE, Elem::ONE);
    for i in 0..k {
        let missing = |p: usize, l: usize| Error::NotACycle(format!("no edge ({p},{l})"));
        let a = label(c.points[i], c.lines[i]).ok_or_else(|| missing(c.points[i], c.lines[i]))?;
        let b = label(c.points[(i + 1) % k], c.lines[i]).ok_or_else(|| missing(c.points[(i + 1) % k], c.lines[i]))?;
        num = f.mul(num, a);
        den = f.mul(den, b);
    }
    f.div(num, den)
}

pub fn cycle_holonomy(g: &LabeledZeroGraph, c: &EvenCycle) -> Result<Elem> {
    alternating_product(&g.field, c, |p, l| g.label(p, l))
}

/// (-1)^k Hol for a cycle through k points.
pub fn signed_cycle_holonomy(g: &LabeledZeroGraph, c: &EvenCycle) -> Result<Elem> {
    let h = cycle_holonomy(g, c)?;
    Ok(if c.half_length() % 2 == 1 { g.field.neg(h) } else { h })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Factorization {
    /// u = alpha_p beta_l on every edge; `None` on vertices without edges
    Potentials { alpha: Vec<Option<Elem>>, beta: Vec<Option<Elem>> },
    /// first fundamental cycle (edges in lex order) with holonomy != 1
    Failing(EvenCycle),
}

/// Spanning-tree potentials, or the first fundamental cycle with nontrivial holonomy.
pub fn factorize_labels(g: &LabeledZeroGraph) -> Result<Factorization> {
    let f = &g.field;
    let gr = &g.graph;
    if !gr.is_connected() {
        return Err(Error::Disconnected);
    }
    let nl = gr.n_left();
    let mut alpha = vec![None; nl];
    let mut beta = vec![None; gr.n_right()];
    let Some(&(root, _)) = gr.edges().first() else {
        return Ok(Factorization::Potentials { alpha, beta });
    };
    // parent[x]: BFS tree parent in the combined vertex numbering
    let mut parent = vec![usize::MAX; gr.vertex_count()];
    let mut depth = vec![0usize; gr.vertex_count()];
    let root = root as usize;
    alpha[root] = Some(Elem::ONE);
    parent[root] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        if x < nl {
            let a = alpha[x].unwrap();
            for &l in gr.left_neighbors(x) {
                let y = nl + l as usize;
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    depth[y] = depth[x] + 1;
                    beta[l as usize] = Some(f.div(g.label(x, l as usize).unwrap(), a)?);
                    queue.push_back(y);
                }
            }
        } else {
            let l = x - nl;
            let b = beta[l].unwrap();
            for &p in gr.right_neighbors(l) {
                let y = p as usize;
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    depth[y] = depth[x] + 1;
                    alpha[y] = Some(f.div(g.label(y, l).unwrap(), b)?);
                    queue.push_back(y);
                }
            }
        }
    }
    for (&(p, l), &u) in gr.edges().iter().zip(&g.labels) {
        let (p, l) = (p as usize, l as usize);
        if f.mul(alpha[p].unwrap(), beta[l].unwrap()) == u {
            continue;
        }
        // Tree path p .. lca .. l, closed by the edge (l, p).
        let (mut x, mut y) = (p, nl + l);
        let (mut left, mut right) = (vec![x], vec![y]);
        while x != y {
            if depth[x] >= depth[y] {
                x = parent[x];
                left.push(x);
            } else {
                y = parent[y];
                right.push(y);
            }
        }
        right.pop();
        left.extend(right.into_iter().rev());
        // left runs p ... l alternating point/line; the closing edge returns to p.
        let points = left.iter().step_by(2).copied().collect();
        let lines = left.iter().skip(1).step_by(2).map(|&z| z - nl).collect();
        return Ok(Factorization::Failing(EvenCycle { points, lines }));
    }
    Ok(Factorization::Potentials { alpha, beta })
}

/// Bit vector over a fixed edge ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CycleVector {
    bits: Vec<u64>,
    len: usize,
}

impl CycleVector {
    pub fn zero(len: usize) -> Self {
        CycleVector { bits: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_edges(len: usize, edges: impl IntoIterator<Item = usize>) -> Self {
        let mut v = CycleVector::zero(len);
        for e in edges {
            v.toggle(e);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn toggle(&mut self, i: usize) {
        self.bits[i / 64] ^= 1 << (i % 64);
    }
    pub fn get(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }
    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }
    pub fn xor_assign(&mut self, other: &CycleVector) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
    }
    pub fn ones(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }
    fn top(&self) -> Option<usize> {
        self.bits.iter().enumerate().rev().find(|(_, &w)| w != 0).map(|(i, w)| 64 * i + 63 - w.leading_zeros() as usize)
    }

    /// Even degree at every vertex of `g`.
    pub fn is_cycle(&self, g: &BipartiteGraph) -> bool {
        let mut deg = vec![0u8; g.vertex_count()];
        for e in self.ones() {
            let (p, l) = g.edges()[e];
            deg[p as usize] ^= 1;
            deg[g.n_left() + l as usize] ^= 1;
        }
        deg.iter().all(|&d| d == 0)
    }

    /// Hex digits, four edges per digit; the lowest edge is the low bit of the first digit.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len.div_ceil(4));
        for d in 0..self.len.div_ceil(4) {
            let nib = (0..4).filter(|&b| 4 * d + b < self.len && self.get(4 * d + b)).fold(0u32, |acc, b| acc | 1 << b);
            write!(s, "{nib:x}").unwrap();
        }
        s
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        if hex.len() != len.div_ceil(4) {
            return Err(Error::ShapeMismatch(format!("{} hex digits for {} edges", hex.len(), len)));
        }
        let mut v = CycleVector::zero(len);
        for (d, ch) in hex.chars().enumerate() {
            let nib = ch.to_digit(16).ok_or_else(|| Error::ShapeMismatch(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                if nib >> b & 1 == 1 {
                    if 4 * d + b >= len {
                        return Err(Error::ShapeMismatch("bit beyond edge count".into()));
                    }
                    v.toggle(4 * d + b);
                }
            }
        }
        Ok(v)
    }
}

/// Incremental GF(2) row echelon basis keyed by leading bit.
#[derive(Debug, Clone)]
pub struct F2Basis {
    len: usize,
    slots: Vec<Option<CycleVector>>,
    rank: usize,
}

impl F2Basis {
    pub fn new(len: usize) -> Self {
        F2Basis { len, slots: vec![None; len], rank: 0 }
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    /// Returns true when `v` was independent of the current span.
    pub fn insert(&mut self, mut v: CycleVector) -> bool {
        debug_assert_eq!(v.len, self.len);
        while let Some(t) = v.top() {
            match &self.slots[t] {
                Some(b) => v.xor_assign(b),
                None => {
                    self.slots[t] = Some(v);
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }
    pub fn into_vectors(self) -> impl Iterator<Item = CycleVector> {
        self.slots.into_iter().flatten()
    }
}

fn component_count(g: &BipartiteGraph) -> usize {
    let nl = g.n_left();
    let mut seen = vec![false; g.vertex_count()];
    let mut comps = 0;
    for &(p, _) in g.edges() {
        let p = p as usize;
        if seen[p] {
            continue;
        }
        comps += 1;
        for (x, d) in g.bfs(p).into_iter().enumerate() {
            if d.is_some() {
                seen[x] = true;
            }
        }
    }
    let _ = nl;
    comps
}

/// |E| - |V| + components, counting only vertices that carry edges.
pub fn cycle_space_dim(g: &BipartiteGraph) -> usize {
    g.edge_count() + component_count(g) - g.active_vertex_count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CycleSpaceReport {
    pub ambient_dim: usize,
    pub span_dim: usize,
}

pub fn f2_cycle_space(g: &BipartiteGraph, vectors: &[CycleVector]) -> CycleSpaceReport {
    let mut basis = F2Basis::new(g.edge_count());
    for v in vectors {
        basis.insert(v.clone());
    }
    CycleSpaceReport { ambient_dim: cycle_space_dim(g), span_dim: basis.rank() }
}

/// All 4-cycles (p < p', l < l') of a bipartite graph.
pub fn four_cycles(g: &BipartiteGraph) -> Vec<EvenCycle> {
    let mut out = Vec::new();
    for a in 0..g.n_left() {
        for b in a + 1..g.n_left() {
            let common: Vec<usize> = g
                .left_neighbors(a)
                .iter()
                .filter(|l| g.right_neighbors(**l as usize).binary_search(&(b as u32)).is_ok())
                .map(|&l| l as usize)
                .collect();
            for i in 0..common.len() {
                for j in i + 1..common.len() {
                    out.push(EvenCycle { points: vec![a, b], lines: vec![common[i], common[j]] });
                }
            }
        }
    }
    out
}

pub fn cycle_vector(g: &BipartiteGraph, c: &EvenCycle) -> Result<CycleVector> {
    let mut v = CycleVector::zero(g.edge_count());
    for (p, l) in c.edges() {
        v.toggle(g.edge_id(p, l).ok_or_else(|| Error::NotACycle(format!("no edge ({p},{l})")))?);
    }
    Ok(v)
}

/// Whether the 4-cycles span the whole cycle space.
pub fn square_connected(g: &BipartiteGraph) -> Result<bool> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let ambient = cycle_space_dim(g);
    let mut basis = F2Basis::new(g.edge_count());
    for c in four_cycles(g) {
        if basis.rank() == ambient {
            break;
        }
        basis.insert(cycle_vector(g, &c)?);
    }
    Ok(basis.rank() == ambient)
}

/// R(n,W;l) = (n \ {W}) x (pencil(W) \ {n, l}) with a base column m.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrimmedChart {
    pub n: usize,
    pub w: usize,
    pub ell: usize,
    pub m: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl TrimmedChart {
    pub fn contains(&self, p: usize, l: usize) -> bool {
        self.rows.contains(&p) && self.cols.contains(&l)
    }
}

pub fn build_trimmed_chart(plane: &ProjectivePlane, n: usize, w: usize, ell: usize, m: usize) -> Result<TrimmedChart> {
    let bad = |why: &str| Err(Error::InvalidChartData(why.to_string()));
    if !plane.incident(w, n) {
        return bad("W is not on n");
    }
    if ell == n || !plane.incident(w, ell) {
        return bad("excluded line must pass through W and differ from n");
    }
    if m == n || m == ell || !plane.incident(w, m) {
        return bad("base column must pass through W and avoid n and the excluded line");
    }
    let rows = plane.line_points(n).iter().copied().filter(|&z| z != w).collect();
    let cols = plane.pencil(w).iter().copied().filter(|&r| r != n && r != ell).collect();
    Ok(TrimmedChart { n, w, ell, m, rows, cols })
}

/// A Lambda-inactive chart in canonical gauge: u[Z][r] = u[Z][m] * beta_r, beta_m = 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GaugedChart {
    pub chart: TrimmedChart,
    /// aligned with `chart.cols`
    pub beta: Vec<Elem>,
}

impl GaugedChart {
    pub fn beta_of(&self, r: usize) -> Option<Elem> {
        self.chart.cols.iter().position(|&c| c == r).map(|i| self.beta[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ChartStatus {
    Inactive(GaugedChart),
    /// first nonvanishing 2x2 determinant in scan order
    Active { rows: (usize, usize), cols: (usize, usize) },
}

/// Exhaustive 2x2 determinant scan over the chart grid.
pub fn lam_inactive_test(model: &ResidueModel, chart: &TrimmedChart) -> Result<ChartStatus> {
    let f = model.field();
    let (rows, cols) = (&chart.rows, &chart.cols);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            for a in 0..cols.len() {
                for b in a + 1..cols.len() {
                    let (z1, z2, r1, r2) = (rows[i], rows[j], cols[a], cols[b]);
                    let d = f.sub(f.mul(model.get(z1, r1), model.get(z2, r2)), f.mul(model.get(z1, r2), model.get(z2, r1)));
                    if !d.is_zero() {
                        return Ok(ChartStatus::Active { rows: (z1, z2), cols: (r1, r2) });
                    }
                }
            }
        }
    }
    let z = rows[0];
    let um = model.get(z, chart.m);
    let beta = cols.iter().map(|&r| f.div(model.get(z, r), um)).collect::<Result<Vec<_>>>()?;
    Ok(ChartStatus::Inactive(GaugedChart { chart: chart.clone(), beta }))
}

pub fn gauge_chart(model: &ResidueModel, chart: &TrimmedChart) -> Result<GaugedChart> {
    match lam_inactive_test(model, chart)? {
        ChartStatus::Inactive(g) => Ok(g),
        ChartStatus::Active { rows, cols } => {
            Err(Error::ChartActive(format!("rows {rows:?}, columns {cols:?} on chart (n={}, W={})", chart.n, chart.w)))
        }
    }
}

/// The overlap row point used for a transition: n_i meet n_j.
pub fn transition_point(plane: &ProjectivePlane, ci: &TrimmedChart, cj: &TrimmedChart) -> Result<usize> {
    let p = if ci.n == cj.n {
        *ci.rows.iter().find(|&&z| z != cj.w && !plane.incident(z, ci.m) && !plane.incident(z, cj.m)).ok_or(Error::NoOverlap)?
    } else {
        plane.meet(ci.n, cj.n).unwrap()
    };
    if p == ci.w || p == cj.w {
        return Err(Error::NoOverlap);
    }
    if plane.incident(p, ci.m) || plane.incident(p, cj.m) {
        return Err(Error::OverlapOnBaseColumn);
    }
    Ok(p)
}

/// c_ij = u[p][m_j] / u[p][m_i] with p = n_i meet n_j.
pub fn transition_scalar(ci: &GaugedChart, cj: &GaugedChart, model: &ResidueModel) -> Result<Elem> {
    if ci.chart == cj.chart {
        return Ok(Elem::ONE);
    }
    let p = transition_point(model.plane(), &ci.chart, &cj.chart)?;
    model.field().div(model.get(p, cj.chart.m), model.get(p, ci.chart.m))
}

/// The same scalar read from column factors on a shared overlap column: beta_i(l) / beta_j(l).
pub fn transition_scalar_via_columns(ci: &GaugedChart, cj: &GaugedChart, model: &ResidueModel) -> Result<Elem> {
    let shared = ci.chart.cols.iter().copied().find(|&l| cj.chart.cols.contains(&l)).ok_or(Error::NoOverlap)?;
    let has_row = ci.chart.rows.iter().any(|z| cj.chart.rows.contains(z));
    if !has_row {
        return Err(Error::NoOverlap);
    }
    model.field().div(ci.beta_of(shared).unwrap(), cj.beta_of(shared).unwrap())
}

/// Product of consecutive transition scalars around a chart cycle.
pub fn chart_cycle_holonomy(charts: &[GaugedChart], model: &ResidueModel) -> Result<Elem> {
    let f = model.field();
    let t = charts.len();
    let mut h = Elem::ONE;
    for i in 0..t {
        h = f.mul(h, transition_scalar(&charts[i], &charts[(i + 1) % t], model)?);
    }
    Ok(h)
}

/// prod u[p_i][m_{i+1}] / u[p_i][m_i], evaluated straight from residues.
pub fn observable_chart_holonomy(charts: &[TrimmedChart], model: &ResidueModel) -> Result<Elem> {
    let f = model.field();
    let t = charts.len();
    let (mut num, mut den) = (Elem::ONE, Elem::ONE);
    for i in 0..t {
        let (a, b) = (&charts[i], &charts[(i + 1) % t]);
        let p = transition_point(model.plane(), a, b)?;
        num = f.mul(num, model.get(p, b.m));
        den = f.mul(den, model.get(p, a.m));
    }
    f.div(num, den)
}

/// The unique c with alpha' = c alpha, beta' = beta / c on a connected edge set, if it exists.
pub fn transition_between_factorizations(
    f: &Field,
    edges: &[(usize, usize)],
    first: (&[Elem], &[Elem]),
    second: (&[Elem], &[Elem]),
) -> Result<Option<Elem>> {
    let Some(&(p0, _)) = edges.first() else {
        return Err(Error::NoOverlap);
    };
    let c = f.div(second.0[p0], first.0[p0])?;
    for &(p, l) in edges {
        if second.0[p] != f.mul(c, first.0[p]) || f.mul(second.1[l], c) != first.1[l] {
            return Ok(None);
        }
    }
    Ok(Some(c))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GluedAtlas {
    /// global factors on the vertices covered by the charts
    pub alpha: Vec<Option<Elem>>,
    pub beta: Vec<Option<Elem>>,
    /// rescaled chart factors agree on every shared vertex and reproduce u on every chart edge
    pub consistent: bool,
}

/// Rescales each chart's canonical gauge by the path product of transition scalars from chart 0.
pub fn glue_atlas(charts: &[GaugedChart], model: &ResidueModel) -> Result<GluedAtlas> {
    let f = model.field();
    let n = charts.len();
    let v = model.plane().size();
    let overlaps = |i: usize, j: usize| {
        let a = &charts[i].chart;
        let b = &charts[j].chart;
        a.rows.iter().any(|z| b.rows.contains(z)) && a.cols.iter().any(|r| b.cols.contains(r))
    };
    let mut lambda: Vec<Option<Elem>> = vec![None; n];
    if n == 0 {
        return Ok(GluedAtlas { alpha: vec![None; v], beta: vec![None; v], consistent: true });
    }
    lambda[0] = Some(Elem::ONE);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if lambda[j].is_none() && overlaps(i, j) {
                let c = transition_scalar_via_columns(&charts[i], &charts[j], model)?;
                lambda[j] = Some(f.mul(lambda[i].unwrap(), c));
                queue.push_back(j);
            }
        }
    }
    if lambda.iter().any(|x| x.is_none()) {
        return Err(Error::Disconnected);
    }
    let mut alpha: Vec<Option<Elem>> = vec![None; v];
    let mut beta: Vec<Option<Elem>> = vec![None; v];
    let mut consistent = true;
    for (g, lam) in charts.iter().zip(&lambda) {
        let lam = lam.unwrap();
        for &z in &g.chart.rows {
            let a = f.div(model.get(z, g.chart.m), lam)?;
            consistent &= *alpha[z].get_or_insert(a) == a;
        }
        for (&r, &b) in g.chart.cols.iter().zip(&g.beta) {
            let b = f.mul(b, lam);
            consistent &= *beta[r].get_or_insert(b) == b;
        }
    }
    for g in charts {
        for &z in &g.chart.rows {
            for &r in &g.chart.cols {
                consistent &= f.mul(alpha[z].unwrap(), beta[r].unwrap()) == model.get(z, r);
            }
        }
    }
    Ok(GluedAtlas { alpha, beta, consistent })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BridgeReport {
    pub t: usize,
    pub s: usize,
    pub charts: Vec<TrimmedChart>,
    pub holonomy: Elem,
    pub rho: Elem,
    pub holonomy_equals_rho: bool,
    /// Delta = u[A][L0] u[B][L1] (1 - Hol)
    pub identity23_4: bool,
    /// the witness equation holds in this model
    pub witness_equation: bool,
    /// Hol = 1 - (u[C][L0]/u[C][L2]) (u[A][L2]/u[A][L0]); only meaningful with the witness equation
    pub identity23_7: bool,
}

impl BridgeReport {
    pub fn all_ok(&self) -> bool {
        self.holonomy_equals_rho && self.identity23_4 && (!self.witness_equation || self.identity23_7)
    }
}

/// The four bridge charts for (t, s), or `None` when the geometry does not fit.
fn bridge_charts(plane: &ProjectivePlane, w: &WitnessRecord, t: usize, s: usize) -> Option<Vec<TrimmedChart>> {
    let [a, b, _, d] = w.points;
    let [l0, l1, _, _] = w.lines;
    if [l0, l1].contains(&t) || [l0, l1].contains(&s) || plane.incident(a, t) || plane.incident(b, s) {
        return None;
    }
    let (w0, w1) = (plane.meet(t, l0)?, plane.meet(t, l1)?);
    let (v1, v0) = (plane.meet(s, l1)?, plane.meet(s, l0)?);
    if [w0, w1, v1, v0].contains(&d) {
        return None;
    }
    let spec = [
        (plane.join(a, w0)?, w0, l0, t),
        (plane.join(a, w1)?, w1, t, l1),
        (plane.join(b, v1)?, v1, l1, s),
        (plane.join(b, v0)?, v0, s, l0),
    ];
    let mut charts = Vec::with_capacity(4);
    for &(n, wp, m, next) in &spec {
        let ell = *plane.pencil(wp).iter().find(|&&x| x != n && x != m && x != next)?;
        charts.push(build_trimmed_chart(plane, n, wp, ell, m).ok()?);
    }
    for i in 0..4 {
        transition_point(plane, &charts[i], &charts[(i + 1) % 4]).ok()?;
    }
    Some(charts)
}

/// First (t, s) in index order satisfying the bridge conditions.
pub fn find_bridge_lines(plane: &ProjectivePlane, w: &WitnessRecord) -> Result<(usize, usize)> {
    let v = plane.size();
    for t in 0..v {
        for s in 0..v {
            if bridge_charts(plane, w, t, s).is_some() {
                return Ok((t, s));
            }
        }
    }
    Err(Error::NoValidBridge)
}

pub fn bridge_cycle(model: &ResidueModel, w: &WitnessRecord, t: usize, s: usize) -> Result<BridgeReport> {
    let plane = model.plane();
    let f = model.field();
    if !w.is_valid(plane) {
        return Err(Error::PreconditionViolated("not a strict B* witness".into()));
    }
    let charts = bridge_charts(plane, w, t, s).ok_or(Error::NoValidBridge)?;
    let gauged = charts.iter().map(|c| gauge_chart(model, c)).collect::<Result<Vec<_>>>()?;
    let holonomy = chart_cycle_holonomy(&gauged, model)?;
    let [a, b, c, _] = w.points;
    let [l0, l1, l2, _] = w.lines;
    let rho = cross_ratio(model, a, b, l0, l1)?;
    let u = |p, l| model.get(p, l);
    let delta = f.sub(f.mul(u(a, l0), u(b, l1)), f.mul(u(a, l1), u(b, l0)));
    let identity23_4 = delta == f.mul(f.mul(u(a, l0), u(b, l1)), f.sub(Elem::ONE, holonomy));
    let witness_equation = f.mul(u(c, l2), delta) == f.product([u(a, l2), u(b, l1), u(c, l0)]);
    let affine = f.sub(Elem::ONE, f.mul(f.div(u(c, l0), u(c, l2))?, f.div(u(a, l2), u(a, l0))?));
    Ok(BridgeReport {
        t,
        s,
        charts,
        holonomy,
        rho,
        holonomy_equals_rho: holonomy == rho,
        identity23_4,
        witness_equation,
        identity23_7: holonomy == affine,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThreeChartCycle {
    pub charts: [TrimmedChart; 3],
    /// one edge in each of R0∩R1, R1∩R2, R2∩R0
    pub overlaps: [(usize, usize); 3],
}

impl ThreeChartCycle {
    /// Re-checks witness membership and the three overlap edges.
    pub fn certify(&self, w: &WitnessRecord) -> bool {
        let c = &self.charts;
        (0..3).all(|i| c[i].contains(w.points[i], w.lines[i]))
            && (0..3).all(|i| {
                let (p, l) = self.overlaps[i];
                c[i].contains(p, l) && c[(i + 1) % 3].contains(p, l)
            })
    }
}

/// The unique candidate overlap edge of R(n_i,W_i;*) and R(n_j,W_j;*) before trimming.
fn overlap_candidate(plane: &ProjectivePlane, ni: usize, wi: usize, nj: usize, wj: usize) -> Option<(usize, usize)> {
    if ni == nj || wi == wj {
        return None;
    }
    let p = plane.meet(ni, nj)?;
    let l = plane.join(wi, wj)?;
    if p == wi || p == wj || l == ni || l == nj {
        return None;
    }
    Some((p, l))
}

/// Finite-exclusion search in index order for three pairwise-overlapping charts around a witness.
pub fn three_chart_cycle(plane: &ProjectivePlane, w: &WitnessRecord) -> Result<ThreeChartCycle> {
    if !w.is_valid(plane) {
        return Err(Error::PreconditionViolated("not a strict B* witness".into()));
    }
    let [a, b, c, d] = w.points;
    let lines = w.lines;
    let anchors = [a, b, c];
    let avoid = [vec![d], vec![d, c], vec![d, b]];
    let cands: Vec<Vec<usize>> =
        (0..3).map(|i| plane.line_points(lines[i]).iter().copied().filter(|x| !avoid[i].contains(x)).collect()).collect();
    for &w0 in &cands[0] {
        let n0 = plane.join(anchors[0], w0).unwrap();
        for &w1 in &cands[1] {
            let n1 = plane.join(anchors[1], w1).unwrap();
            let Some(o01) = overlap_candidate(plane, n0, w0, n1, w1) else { continue };
            for &w2 in &cands[2] {
                let n2 = plane.join(anchors[2], w2).unwrap();
                let Some(o12) = overlap_candidate(plane, n1, w1, n2, w2) else { continue };
                let Some(o20) = overlap_candidate(plane, n2, w2, n0, w0) else { continue };
                let ws = [w0, w1, w2];
                let ns = [n0, n1, n2];
                let touching = [[o01.1, o20.1], [o01.1, o12.1], [o12.1, o20.1]];
                let mut charts = Vec::with_capacity(3);
                for i in 0..3 {
                    let ell = plane
                        .pencil(ws[i])
                        .iter()
                        .copied()
                        .find(|&x| x != ns[i] && x != lines[i] && !touching[i].contains(&x));
                    match ell.and_then(|ell| build_trimmed_chart(plane, ns[i], ws[i], ell, lines[i]).ok()) {
                        Some(ch) => charts.push(ch),
                        None => break,
                    }
                }
                if charts.len() < 3 {
                    continue;
                }
                let out = ThreeChartCycle {
                    charts: [charts[0].clone(), charts[1].clone(), charts[2].clone()],
                    overlaps: [o01, o12, o20],
                };
                if out.certify(w) {
                    return Ok(out);
                }
            }
        }
    }
    Err(Error::SearchExhausted)
}

/// Number of (skew rectangle, degenerate rectangle R(n,W)) pairs with all four edges inside R(n,W).
pub fn skew_cycles_in_degenerate_rectangles(plane: &ProjectivePlane) -> u64 {
    let v = plane.size();
    let mut hits = 0;
    let mut skew = Vec::new();
    for a in 0..v {
        for b in a + 1..v {
            let ab = plane.join(a, b).unwrap();
            for l0 in 0..v {
                for l1 in l0 + 1..v {
                    let zero = [(a, l0), (a, l1), (b, l0), (b, l1)].iter().all(|&(p, l)| !plane.incident(p, l));
                    if zero && !plane.incident(plane.meet(l0, l1).unwrap(), ab) {
                        skew.push((a, b, l0, l1));
                    }
                }
            }
        }
    }
    for n in 0..v {
        for &wp in plane.line_points(n) {
            let in_rect = |p: usize, l: usize| p != wp && plane.incident(p, n) && l != n && plane.incident(wp, l);
            for &(a, b, l0, l1) in &skew {
                if in_rect(a, l0) && in_rect(a, l1) && in_rect(b, l0) && in_rect(b, l1) {
                    hits += 1;
                }
            }
        }
    }
    hits
}
