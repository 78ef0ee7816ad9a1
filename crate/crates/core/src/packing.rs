//! Metric-graph geometry on meshes: shortest-path distances for the
//! symmetrized edge lengths, complete r-packages with their Dirichlet
//! regions, packing and covering witnesses, and discrete Cheeger constants.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::cheeger_lower_expression;
use crate::eigen::linear::{lowest_eigenpairs, LinearOptions};
use crate::eigen::report::fmt_real;
use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::mesh::Mesh;
use crate::metric::{MetricSpec, PointNorm};
use crate::sparse::TripletBuilder;

/// Vertex graph weighted by `½(F(v) + F(−v))` of each edge vector at its midpoint.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    adjacency: Vec<Vec<(usize, f64)>>,
    pub max_edge: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Queued(f64, usize);

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn symmetric_length(norm: &PointNorm, v: &DVector<f64>) -> f64 {
    0.5 * (norm.eval(v) + norm.eval(&-v))
}

impl DistanceOracle {
    pub fn new(mesh: &Mesh, spec: &MetricSpec) -> Result<Self> {
        if !mesh.is_connected() {
            return Err(Error::invalid("mesh is disconnected"));
        }
        let n = mesh.vertex_count();
        let k = mesh.coordinate_count();
        let mut adjacency = vec![Vec::new(); n];
        let mut max_edge: f64 = 0.0;
        for (p, q) in mesh.edges() {
            let delta: Vec<f64> = (0..k)
                .map(|c| mesh.unwrap_delta(c, mesh.vertices[q][c] - mesh.vertices[p][c]))
                .collect();
            let mid: Vec<f64> = (0..k).map(|c| mesh.vertices[p][c] + 0.5 * delta[c]).collect();
            let v = if mesh.is_embedded() {
                // element frames are orthonormal, so the chord is measured along one axis
                let mut e = DVector::zeros(mesh.dimension);
                e[0] = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                e
            } else {
                DVector::from_vec(delta)
            };
            let len = symmetric_length(&spec.at(&mid), &v);
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::numeric(format!("edge ({p}, {q}) has no positive length"), len));
            }
            max_edge = max_edge.max(len);
            adjacency[p].push((q, len));
            adjacency[q].push((p, len));
        }
        for &(a, b) in &mesh.identifications {
            adjacency[a].push((b, 0.0));
            adjacency[b].push((a, 0.0));
        }
        Ok(Self { adjacency, max_edge })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Single-source shortest-path distances.
    pub fn from_source(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adjacency.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Queued(0.0, source));
        while let Some(Queued(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adjacency[v] {
                let nd = d + len;
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Queued(nd, w));
                }
            }
        }
        dist
    }

    /// Distances along paths that stay inside `allowed`.
    pub fn from_source_within(&self, source: usize, allowed: &[bool]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.adjacency.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Queued(0.0, source));
        while let Some(Queued(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &self.adjacency[v] {
                let nd = d + len;
                if allowed[w] && nd < dist[w] {
                    dist[w] = nd;
                    heap.push(Queued(nd, w));
                }
            }
        }
        dist
    }

    pub fn all_pairs(&self) -> Vec<Vec<f64>> {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|s| self.from_source(s))
            .collect()
    }

    /// Largest distance over all sources.
    pub fn diameter(&self) -> f64 {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|s| self.from_source(s).into_iter().fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    fn tolerance(&self) -> f64 {
        1e-9 * self.max_edge
    }
}

pub fn distances(mesh: &Mesh, spec: &MetricSpec, source: usize) -> Result<Vec<f64>> {
    if source >= mesh.vertex_count() {
        return Err(Error::invalid("source vertex out of range"));
    }
    Ok(DistanceOracle::new(mesh, spec)?.from_source(source))
}

pub fn diameter(mesh: &Mesh, spec: &MetricSpec) -> Result<f64> {
    Ok(DistanceOracle::new(mesh, spec)?.diameter())
}

/// A maximal family of disjoint open r-balls with its Dirichlet regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub radius: f64,
    pub centers: Vec<usize>,
    /// Index into `centers` of the nearest center, ties to the lowest index.
    pub assignment: Vec<usize>,
    /// Distance to the assigned center.
    pub distance: Vec<f64>,
    #[serde(skip)]
    center_distances: Vec<Vec<f64>>,
}

impl Packing {
    pub fn distances_from_center(&self, i: usize) -> &[f64] {
        &self.center_distances[i]
    }

    pub fn region(&self, i: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&v| self.assignment[v] == i)
            .collect()
    }

    /// Columns `vertex,center_index,distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,center_index,distance\n");
        for (v, (c, d)) in self.assignment.iter().zip(&self.distance).enumerate() {
            let _ = writeln!(out, "{v},{c},{}", fmt_real(*d));
        }
        out
    }
}

/// Greedy complete r-package: vertices are scanned in index order and
/// accepted when their distance to every accepted center is at least `2r`.
pub fn complete_r_package(oracle: &DistanceOracle, r: f64) -> Result<Packing> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("radius must be positive"));
    }
    let n = oracle.vertex_count();
    let eps = oracle.tolerance();
    let mut nearest = vec![f64::INFINITY; n];
    let mut centers = Vec::new();
    let mut center_distances: Vec<Vec<f64>> = Vec::new();
    for v in 0..n {
        if nearest[v] >= 2.0 * r - eps {
            let d = oracle.from_source(v);
            nearest.iter_mut().zip(&d).for_each(|(a, b)| *a = a.min(*b));
            centers.push(v);
            center_distances.push(d);
        }
    }
    let mut assignment = vec![0; n];
    let mut distance = vec![f64::INFINITY; n];
    for (i, d) in center_distances.iter().enumerate() {
        for v in 0..n {
            if d[v] < distance[v] - eps {
                distance[v] = d[v];
                assignment[v] = i;
            }
        }
    }
    Ok(Packing {
        radius: r,
        centers,
        assignment,
        distance,
        center_distances,
    })
}

/// Discrete form of `B(p_i, r) ⊂ D_i ⊂ B(p_i, 2r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    /// Largest `r − d(v, p_i)` over vertices inside `B(p_i, r)` assigned elsewhere.
    pub inner_violation: f64,
    /// Largest `d(v, p_i) − 2r` over vertices of `D_i`.
    pub outer_excess: f64,
    /// Smallest `2r − d(v, p_i)` over vertices of `D_i`.
    pub outer_slack: f64,
}

impl SandwichCheck {
    pub fn worst(&self) -> f64 {
        self.inner_violation.max(self.outer_excess)
    }

    pub fn holds_within(&self, tolerance: f64) -> bool {
        self.worst() <= tolerance
    }
}

pub fn verify_region_sandwich(packing: &Packing) -> SandwichCheck {
    let r = packing.radius;
    let mut check = SandwichCheck {
        inner_violation: 0.0,
        outer_excess: 0.0,
        outer_slack: f64::INFINITY,
    };
    for (i, d) in packing.center_distances.iter().enumerate() {
        for (v, &dv) in d.iter().enumerate() {
            if dv < r && packing.assignment[v] != i {
                check.inner_violation = check.inner_violation.max(r - dv);
            }
            if packing.assignment[v] == i {
                check.outer_excess = check.outer_excess.max(dv - 2.0 * r);
                check.outer_slack = check.outer_slack.min(2.0 * r - dv);
            }
        }
    }
    check
}

/// Size of the greedy complete r-package, a lower witness for `Ca(r)`.
pub fn packing_number(oracle: &DistanceOracle, r: f64) -> Result<usize> {
    Ok(complete_r_package(oracle, r)?.centers.len())
}

/// Greedy set cover by closed r-balls centered at vertices.
pub fn greedy_cover(oracle: &DistanceOracle, r: f64) -> Result<Vec<usize>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("radius must be positive"));
    }
    let eps = oracle.tolerance();
    let balls: Vec<Vec<usize>> = oracle
        .all_pairs()
        .into_iter()
        .map(|d| (0..d.len()).filter(|&v| d[v] <= r + eps).collect())
        .collect();
    let n = oracle.vertex_count();
    let mut covered = vec![false; n];
    let mut left = n;
    let mut chosen = Vec::new();
    while left > 0 {
        let (best, gain) = balls
            .iter()
            .enumerate()
            .map(|(c, b)| (c, b.iter().filter(|&&v| !covered[v]).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if gain == 0 {
            return Err(Error::numeric("cover made no progress", left as f64));
        }
        for &v in &balls[best] {
            if !covered[v] {
                covered[v] = true;
                left -= 1;
            }
        }
        chosen.push(best);
    }
    Ok(chosen)
}

/// Upper witness for `Co(r)`: the smaller of the greedy cover and the
/// centers of a complete r/2-package, which cover by maximality.
pub fn covering_number(oracle: &DistanceOracle, r: f64) -> Result<usize> {
    let greedy = greedy_cover(oracle, r)?.len();
    Ok(greedy.min(packing_number(oracle, r / 2.0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingChain {
    pub radius: f64,
    pub packing: usize,
    pub covering: usize,
    pub packing_half: usize,
}

impl PackingChain {
    pub fn holds(&self) -> bool {
        self.packing <= self.covering && self.covering <= self.packing_half
    }
}

/// Witnesses for `Ca(r) ≤ Co(r) ≤ Ca(r/2)`.
pub fn packing_chain(oracle: &DistanceOracle, r: f64) -> Result<PackingChain> {
    Ok(PackingChain {
        radius: r,
        packing: packing_number(oracle, r)?,
        covering: covering_number(oracle, r)?,
        packing_half: packing_number(oracle, r / 2.0)?,
    })
}

/// Weighted graph of a vertex domain: lumped masses and interface weights
/// between the dual cells of neighbouring vertices.
#[derive(Debug, Clone)]
pub struct CutGraph {
    pub vertices: Vec<usize>,
    pub masses: Vec<f64>,
    pub neighbours: Vec<Vec<(usize, f64)>>,
}

impl CutGraph {
    /// Interface weights are `σ F*(ν) ℓ` for each dual segment, with `ν` its
    /// Euclidean unit conormal and `ℓ` its length (a point of weight `σ F*(dx)` in 1D).
    pub fn new(mesh: &Mesh, disc: &Discretization, domain: &[usize]) -> Result<Self> {
        let n = mesh.vertex_count();
        // identified vertices share one graph node, keyed by the lower index
        let mut canon: Vec<usize> = (0..n).collect();
        for &(a, b) in &mesh.identifications {
            canon[a.max(b)] = a.min(b);
        }
        let mut local = vec![usize::MAX; n];
        let mut vertices = Vec::with_capacity(domain.len());
        for &v in domain {
            if v >= n {
                return Err(Error::invalid("domain vertex out of range"));
            }
            let v = canon[v];
            if local[v] == usize::MAX {
                local[v] = vertices.len();
                vertices.push(v);
            }
        }
        if vertices.len() < 2 {
            return Err(Error::invalid("domain needs at least two vertices"));
        }
        let m = vertices.len();
        let mut weights: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut add = |a: usize, b: usize, w: f64| {
            let (la, lb) = (local[canon[a]], local[canon[b]]);
            if la == usize::MAX || lb == usize::MAX || la == lb {
                return;
            }
            for (x, y) in [(la, lb), (lb, la)] {
                match weights[x].iter_mut().find(|(t, _)| *t == y) {
                    Some(slot) => slot.1 += w,
                    None => weights[x].push((y, w)),
                }
            }
        };
        for (e, el) in disc.elements.iter().enumerate() {
            let nodes = &el.nodes;
            let co = |v: &DVector<f64>| -> Result<f64> { Ok(0.5 * (el.norm.dual(v)? + el.norm.dual(&-v)?)) };
            if nodes.len() == 2 {
                let w = el.sigma * co(&DVector::from_element(1, 1.0))?;
                add(nodes[0], nodes[1], w);
                continue;
            }
            let x = mesh.element_geometry(e).local;
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                // segment from the midpoint of edge (i, j) to the centroid
                let s: Vec<f64> = (0..2).map(|c| (2.0 * x[k][c] - x[i][c] - x[j][c]) / 6.0).collect();
                let conormal = DVector::from_vec(vec![-s[1], s[0]]);
                add(nodes[i], nodes[j], el.sigma * co(&conormal)?);
            }
        }
        let mut masses = vec![0.0; m];
        for (v, mv) in disc.vertex_masses().into_iter().enumerate() {
            if local[canon[v]] != usize::MAX {
                masses[local[canon[v]]] += mv;
            }
        }

        // connectivity of the induced subgraph
        let mut seen = vec![false; m];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        let mut graph = vec![Vec::new(); m];
        for (a, b) in mesh.edges() {
            let (la, lb) = (local[canon[a]], local[canon[b]]);
            if la != usize::MAX && lb != usize::MAX {
                graph[la].push(lb);
                graph[lb].push(la);
            }
        }
        while let Some(v) = stack.pop() {
            for &w in &graph[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        if count != m {
            return Err(Error::invalid("domain does not induce a connected subgraph"));
        }
        Ok(Self {
            vertices,
            masses,
            neighbours: weights,
        })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `A(S) / min(m(S), m(D∖S))` for a membership mask.
    pub fn ratio(&self, in_s: &[bool]) -> f64 {
        let mut cut = 0.0;
        let mut ms = 0.0;
        for v in 0..self.len() {
            if in_s[v] {
                ms += self.masses[v];
                for &(w, wt) in &self.neighbours[v] {
                    if !in_s[w] {
                        cut += wt;
                    }
                }
            }
        }
        let side = ms.min(self.total() - ms);
        if side <= 0.0 {
            f64::INFINITY
        } else {
            cut / side
        }
    }

    /// Best prefix cut along `order`.
    fn sweep(&self, order: &[usize]) -> (f64, Vec<bool>) {
        let total = self.total();
        let mut in_s = vec![false; self.len()];
        let (mut cut, mut ms) = (0.0, 0.0);
        let (mut best, mut best_t) = (f64::INFINITY, 0);
        for (t, &v) in order.iter().enumerate().take(self.len() - 1) {
            for &(w, wt) in &self.neighbours[v] {
                cut += if in_s[w] { -wt } else { wt };
            }
            in_s[v] = true;
            ms += self.masses[v];
            let ratio = cut / ms.min(total - ms);
            if ratio < best {
                best = ratio;
                best_t = t;
            }
        }
        let mut mask = vec![false; self.len()];
        for &v in &order[..=best_t] {
            mask[v] = true;
        }
        (self.ratio(&mask), mask)
    }

    /// Single-vertex and adjacent-pair moves while they lower the ratio.
    fn improve(&self, mut mask: Vec<bool>, mut value: f64) -> (f64, Vec<bool>) {
        let pairs: Vec<(usize, usize)> = (0..self.len())
            .flat_map(|v| {
                self.neighbours[v]
                    .iter()
                    .filter(move |&&(w, _)| w > v)
                    .map(move |&(w, _)| (v, w))
            })
            .collect();
        let flip = |mask: &mut Vec<bool>, v: usize, w: Option<usize>| {
            mask[v] = !mask[v];
            if let Some(w) = w {
                mask[w] = !mask[w];
            }
        };
        for _ in 0..10 * self.len() {
            let mut best: Option<(usize, Option<usize>, f64)> = None;
            let singles = (0..self.len()).map(|v| (v, None));
            let doubles = pairs.iter().map(|&(v, w)| (v, Some(w)));
            for (phase, moves) in [singles.collect::<Vec<_>>(), doubles.collect()].into_iter().enumerate() {
                if phase == 1 && best.is_some() {
                    break;
                }
                for (v, w) in moves {
                    flip(&mut mask, v, w);
                    let r = self.ratio(&mask);
                    flip(&mut mask, v, w);
                    if r < value * (1.0 - 1e-14) && best.is_none_or(|(_, _, b)| r < b) {
                        best = Some((v, w, r));
                    }
                }
            }
            match best {
                Some((v, w, r)) => {
                    flip(&mut mask, v, w);
                    value = r;
                }
                None => break,
            }
        }
        (value, mask)
    }

    /// Orderings by the low eigenvectors of the weighted graph Laplacian
    /// against the masses, starting with the Fiedler vector.
    fn spectral_orders(&self) -> Result<Vec<Vec<usize>>> {
        let m = self.len();
        let mut lap = TripletBuilder::new(m);
        let mut mass = TripletBuilder::new(m);
        for v in 0..m {
            mass.add(v, v, self.masses[v]);
            for &(w, wt) in &self.neighbours[v] {
                lap.add(v, w, -wt);
                lap.add(v, v, wt);
            }
        }
        let count = m.min(4);
        let pairs = lowest_eigenpairs(
            &lap.build(),
            &mass.build(),
            count,
            &[vec![1.0; m]],
            &LinearOptions::default(),
        )?;
        Ok(pairs.vectors[1..].iter().map(|v| order_by(v)).collect())
    }
}

fn order_by(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Cheeger value with a minimizing side (mesh vertex indices).
#[derive(Debug, Clone, PartialEq)]
pub struct CheegerCut {
    pub value: f64,
    pub side: Vec<usize>,
}

fn cut_from(graph: &CutGraph, value: f64, mask: &[bool]) -> CheegerCut {
    CheegerCut {
        value,
        side: graph
            .vertices
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect(),
    }
}

/// Minimum over every 2-partition of the domain (at most 24 vertices).
pub fn cheeger_exhaustive(graph: &CutGraph) -> Result<CheegerCut> {
    let m = graph.len();
    if m > 24 {
        return Err(Error::invalid("exhaustive Cheeger search is limited to 24 vertices"));
    }
    let total = graph.total();
    let mut in_s = vec![false; m];
    let (mut cut, mut ms) = (0.0, 0.0);
    let mut best = (f64::INFINITY, 0u64);
    // Gray code over subsets of vertices 1..m; vertex 0 stays outside
    let mut code = 0u64;
    for step in 1u64..(1u64 << (m - 1)) {
        let bit = step.trailing_zeros() as usize;
        code ^= 1 << bit;
        let v = bit + 1;
        let entering = !in_s[v];
        for &(w, wt) in &graph.neighbours[v] {
            let same = in_s[w];
            cut += if entering == same { -wt } else { wt };
        }
        in_s[v] = entering;
        ms += if entering { graph.masses[v] } else { -graph.masses[v] };
        let ratio = cut / ms.min(total - ms);
        if ratio < best.0 {
            best = (ratio, code);
        }
    }
    let mask: Vec<bool> = (0..m).map(|v| v > 0 && best.1 >> (v - 1) & 1 == 1).collect();
    Ok(cut_from(graph, graph.ratio(&mask), &mask))
}

/// Best sweep cut over spectral orderings and distance orderings (inside the
/// domain and in the whole mesh), each refined by local moves.
pub fn cheeger_sweep(graph: &CutGraph, oracle: &DistanceOracle, sources: &[usize]) -> Result<CheegerCut> {
    let m = graph.len();
    let mut orders = graph.spectral_orders()?;
    let mut local_sources: Vec<usize> = if m <= 64 {
        (0..m).collect()
    } else {
        let mut s = vec![0];
        let d0: Vec<f64> = oracle.from_source(graph.vertices[0]);
        let far = order_by(&graph.vertices.iter().map(|&v| -d0[v]).collect::<Vec<_>>())[0];
        s.push(far);
        let d1 = oracle.from_source(graph.vertices[far]);
        s.push(order_by(&graph.vertices.iter().map(|&v| -d1[v]).collect::<Vec<_>>())[0]);
        s
    };
    local_sources.extend(
        sources
            .iter()
            .filter_map(|s| graph.vertices.iter().position(|v| v == s)),
    );
    local_sources.sort_unstable();
    local_sources.dedup();
    let mut allowed = vec![false; oracle.vertex_count()];
    for &v in &graph.vertices {
        allowed[v] = true;
    }
    let dist: Vec<Vec<Vec<f64>>> = local_sources
        .par_iter()
        .map(|&s| {
            let global = oracle.from_source(graph.vertices[s]);
            let inside = oracle.from_source_within(graph.vertices[s], &allowed);
            [global, inside]
                .iter()
                .map(|d| graph.vertices.iter().map(|&v| d[v]).collect())
                .collect()
        })
        .collect();
    orders.extend(dist.iter().flatten().map(|d| order_by(d)));

    let refined: Vec<(f64, Vec<bool>)> = orders
        .par_iter()
        .map(|order| {
            let (value, mask) = graph.sweep(order);
            graph.improve(mask, value)
        })
        .collect();
    let (value, mask) = refined
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one ordering");
    Ok(cut_from(graph, value, &mask))
}

/// Discrete Cheeger constant of a vertex domain: exhaustive for at most 18
/// vertices, sweep cuts otherwise.
pub fn cheeger_constant(mesh: &Mesh, disc: &Discretization, oracle: &DistanceOracle, domain: &[usize]) -> Result<f64> {
    let graph = CutGraph::new(mesh, disc, domain)?;
    if graph.len() <= 18 {
        Ok(cheeger_exhaustive(&graph)?.value)
    } else {
        Ok(cheeger_sweep(&graph, oracle, &[])?.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub center: usize,
    pub vertices: usize,
    pub measure: f64,
    pub cheeger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLower {
    /// `min_i h²(D_i) / (4 (Λ^{1+n} Θ²)²)`.
    pub value: f64,
    pub h_min: f64,
    /// Number of regions `m`; the value indicates a lower bound for `λ̄_m`.
    pub regions: Vec<RegionDiagnostics>,
}

impl RegionLower {
    pub fn m(&self) -> usize {
        self.regions.len()
    }
}

/// Per-region Cheeger constants of the Dirichlet regions of a complete
/// r-package, combined into the lower expression.
pub fn dirichlet_region_lower_pipeline(
    mesh: &Mesh,
    disc: &Discretization,
    oracle: &DistanceOracle,
    r: f64,
    uniformity: f64,
    theta: f64,
) -> Result<RegionLower> {
    let packing = complete_r_package(oracle, r)?;
    let mut regions = Vec::with_capacity(packing.centers.len());
    for (i, &c) in packing.centers.iter().enumerate() {
        let domain = packing.region(i);
        let graph = CutGraph::new(mesh, disc, &domain)?;
        let h = if graph.len() <= 18 {
            cheeger_exhaustive(&graph)?.value
        } else {
            cheeger_sweep(&graph, oracle, &[c])?.value
        };
        regions.push(RegionDiagnostics {
            center: c,
            vertices: graph.len(),
            measure: graph.total(),
            cheeger: h,
        });
    }
    let h_min = regions.iter().map(|r| r.cheeger).fold(f64::INFINITY, f64::min);
    let single = cheeger_lower_expression(h_min, uniformity, theta, mesh.dimension)?;
    // the region chain squares the Λ^{1+n}Θ² factor once more
    let value = single / (uniformity.powi(1 + mesh.dimension as i32) * theta * theta);
    Ok(RegionLower { value, h_min, regions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureDensity;
    use nalgebra::dmatrix;
    use std::f64::consts::PI;

    fn circle(n: usize) -> (Mesh, MetricSpec, DistanceOracle) {
        let mesh = Mesh::circle(n).unwrap();
        let spec = MetricSpec::euclidean(1);
        let oracle = DistanceOracle::new(&mesh, &spec).unwrap();
        (mesh, spec, oracle)
    }

    #[test]
    fn circle_distances_and_diameter() {
        let (_, _, oracle) = circle(64);
        let d = oracle.from_source(0);
        assert!((d[32] - PI).abs() < 1e-12);
        assert!((oracle.diameter() - PI).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_torus_distance() {
        let mesh = Mesh::torus(16, 16).unwrap();
        let spec = MetricSpec::constant(
            crate::metric::MinkowskiNorm::riemannian(dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap(),
            crate::metric::Symmetrization::None,
        )
        .unwrap();
        let d = distances(&mesh, &spec, 0).unwrap();
        assert!((d[8] - 1.0).abs() < 1e-12);
        assert!((d[8 * 16] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn circle_packages() {
        let (_, _, oracle) = circle(64);
        assert_eq!(packing_number(&oracle, PI / 2.0).unwrap(), 2);
        assert_eq!(packing_number(&oracle, PI / 4.0).unwrap(), 4);
        assert_eq!(covering_number(&oracle, PI / 2.0).unwrap(), 2);
        assert_eq!(packing_number(&oracle, 4.0).unwrap(), 1);
        assert_eq!(covering_number(&oracle, 4.0).unwrap(), 1);
        let p = complete_r_package(&oracle, PI / 2.0).unwrap();
        let check = verify_region_sandwich(&p);
        assert_eq!(check.worst(), 0.0);
        assert!(p.to_csv().starts_with("vertex,center_index,distance\n0,0,"));
    }

    #[test]
    fn circle_cheeger_is_two_over_pi() {
        let (mesh, spec, oracle) = circle(16);
        let disc = Discretization::new(&mesh, &spec, &MeasureDensity::BusemannHausdorff).unwrap();
        let all: Vec<usize> = (0..16).collect();
        let graph = CutGraph::new(&mesh, &disc, &all).unwrap();
        let exact = cheeger_exhaustive(&graph).unwrap();
        assert!((exact.value - 2.0 / PI).abs() < 1e-12);
        let sweep = cheeger_sweep(&graph, &oracle, &[]).unwrap();
        assert!((sweep.value - exact.value).abs() < 1e-12);
    }

    #[test]
    fn interval_cheeger_approaches_two() {
        let mesh = Mesh::interval(16).unwrap();
        let spec = MetricSpec::euclidean(1);
        let disc = Discretization::new(&mesh, &spec, &MeasureDensity::BusemannHausdorff).unwrap();
        let oracle = DistanceOracle::new(&mesh, &spec).unwrap();
        let all: Vec<usize> = (0..=16).collect();
        let h = cheeger_constant(&mesh, &disc, &oracle, &all).unwrap();
        // lumped masses put 15/32 on the smaller side of the best cut
        assert!((h - 32.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_domain_rejected() {
        let (mesh, spec, _) = circle(16);
        let disc = Discretization::new(&mesh, &spec, &MeasureDensity::BusemannHausdorff).unwrap();
        assert!(CutGraph::new(&mesh, &disc, &[0, 1, 5, 6]).is_err());
    }
}
