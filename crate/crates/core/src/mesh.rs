//! Simplicial meshes of the model manifolds and their plain-text format.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in model manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MeshModel {
    /// Circle of circumference 2π, chart coordinate θ.
    Circle { n: usize },
    /// The unit interval with both endpoints on the boundary.
    Interval { n: usize },
    /// The unit-square flat torus.
    Torus { nx: usize, ny: usize },
    /// The unit disk built from `rings` concentric rings.
    Disk { rings: usize },
    /// Subdivided icosahedron projected to the unit sphere.
    Icosphere { level: usize },
}

impl MeshModel {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshModel::Circle { n } => Mesh::circle(n),
            MeshModel::Interval { n } => Mesh::interval(n),
            MeshModel::Torus { nx, ny } => Mesh::torus(nx, ny),
            MeshModel::Disk { rings } => Mesh::disk(rings),
            MeshModel::Icosphere { level } => Mesh::icosphere(level),
        }
    }

    /// The same model with resolution multiplied by `2^steps`.
    pub fn refined(&self, steps: u32) -> MeshModel {
        let f = 1usize << steps;
        match *self {
            MeshModel::Circle { n } => MeshModel::Circle { n: n * f },
            MeshModel::Interval { n } => MeshModel::Interval { n: n * f },
            MeshModel::Torus { nx, ny } => MeshModel::Torus { nx: nx * f, ny: ny * f },
            MeshModel::Disk { rings } => MeshModel::Disk { rings: rings * f },
            MeshModel::Icosphere { level } => MeshModel::Icosphere {
                level: level + steps as usize,
            },
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(
            self,
            MeshModel::Circle { .. } | MeshModel::Torus { .. } | MeshModel::Icosphere { .. }
        )
    }
}

/// Geometry of one element in local coordinates.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Local coordinates of the element nodes, `dimension` entries each.
    pub local: Vec<Vec<f64>>,
    /// Point at which metric and density are evaluated.
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub id: String,
    pub dimension: usize,
    /// Chart coordinates, or embedding coordinates when there are more
    /// coordinates than the dimension.
    pub vertices: Vec<Vec<f64>>,
    pub elements: Vec<Vec<usize>>,
    pub boundary_vertices: Vec<usize>,
    pub identifications: Vec<(usize, usize)>,
    /// Per-coordinate period; element geometry is unwrapped by minimum image.
    pub periods: Vec<Option<f64>>,
}

impl Mesh {
    pub fn circle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("circle needs at least 3 vertices"));
        }
        let h = 2.0 * PI / n as f64;
        Ok(Mesh {
            id: format!("circle({n})"),
            dimension: 1,
            vertices: (0..n).map(|i| vec![i as f64 * h]).collect(),
            elements: (0..n).map(|i| vec![i, (i + 1) % n]).collect(),
            boundary_vertices: vec![],
            identifications: vec![],
            periods: vec![Some(2.0 * PI)],
        })
    }

    pub fn interval(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("interval needs at least 3 segments"));
        }
        Ok(Mesh {
            id: format!("interval({n})"),
            dimension: 1,
            vertices: (0..=n).map(|i| vec![i as f64 / n as f64]).collect(),
            elements: (0..n).map(|i| vec![i, i + 1]).collect(),
            boundary_vertices: vec![0, n],
            identifications: vec![],
            periods: vec![None],
        })
    }

    pub fn torus(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::invalid("torus needs at least 3 cells per direction"));
        }
        let idx = |i: usize, j: usize| (j % ny) * nx + (i % nx);
        let mut vertices = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                vertices.push(vec![i as f64 / nx as f64, j as f64 / ny as f64]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                elements.push(vec![a, b, c]);
                elements.push(vec![a, c, d]);
            }
        }
        Ok(Mesh {
            id: format!("torus({nx}x{ny})"),
            dimension: 2,
            vertices,
            elements,
            boundary_vertices: vec![],
            identifications: vec![],
            periods: vec![Some(1.0), Some(1.0)],
        })
    }

    pub fn disk(rings: usize) -> Result<Self> {
        if rings < 3 {
            return Err(Error::invalid("disk needs at least 3 rings"));
        }
        let mut vertices = vec![vec![0.0, 0.0]];
        let mut ring_start = vec![0usize];
        let mut ring_len = vec![1usize];
        for r in 1..=rings {
            ring_start.push(vertices.len());
            let count = 6 * r;
            ring_len.push(count);
            let radius = r as f64 / rings as f64;
            for j in 0..count {
                let t = 2.0 * PI * j as f64 / count as f64;
                vertices.push(vec![radius * t.cos(), radius * t.sin()]);
            }
        }
        let mut elements = Vec::new();
        for r in 1..=rings {
            let (si, mi) = (ring_start[r - 1], ring_len[r - 1]);
            let (so, mo) = (ring_start[r], ring_len[r]);
            let (mut i, mut j) = (0usize, 0usize);
            // the centre (a one-vertex ring) only fans
            while j < mo || (mi > 1 && i < mi) {
                let next_inner = (i + 1) as f64 / mi as f64;
                let next_outer = (j + 1) as f64 / mo as f64;
                let advance_outer = j < mo && (i >= mi || next_outer <= next_inner);
                let tri = if advance_outer {
                    let t = vec![si + i % mi, so + j % mo, so + (j + 1) % mo];
                    j += 1;
                    t
                } else {
                    let t = vec![si + i % mi, so + j % mo, si + (i + 1) % mi];
                    i += 1;
                    t
                };
                elements.push(tri);
            }
        }
        let boundary_vertices = (ring_start[rings]..vertices.len()).collect();
        let mut mesh = Mesh {
            id: format!("disk({rings})"),
            dimension: 2,
            vertices,
            elements,
            boundary_vertices,
            identifications: vec![],
            periods: vec![None, None],
        };
        mesh.orient_counterclockwise();
        Ok(mesh)
    }

    pub fn icosphere(level: usize) -> Result<Self> {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|p| normalize3(p.to_vec()))
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec<f64>>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let m = (0..3).map(|k| 0.5 * (vertices[a][k] + vertices[b][k])).collect();
                    vertices.push(normalize3(m));
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Ok(Mesh {
            id: format!("icosphere({level})"),
            dimension: 2,
            vertices,
            elements: faces.iter().map(|f| f.to_vec()).collect(),
            boundary_vertices: vec![],
            identifications: vec![],
            periods: vec![None, None, None],
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn coordinate_count(&self) -> usize {
        self.vertices.first().map_or(self.dimension, Vec::len)
    }

    pub fn is_embedded(&self) -> bool {
        self.coordinate_count() > self.dimension
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_vertices.is_empty()
    }

    pub(crate) fn unwrap_delta(&self, coord: usize, delta: f64) -> f64 {
        match self.periods.get(coord).copied().flatten() {
            Some(p) => delta - p * (delta / p).round(),
            None => delta,
        }
    }

    /// Local node coordinates and evaluation point of element `e`.
    pub fn element_geometry(&self, e: usize) -> ElementGeometry {
        let nodes = &self.elements[e];
        let k = self.coordinate_count();
        let base = &self.vertices[nodes[0]];
        let unwrapped: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&v| {
                (0..k)
                    .map(|c| base[c] + self.unwrap_delta(c, self.vertices[v][c] - base[c]))
                    .collect()
            })
            .collect();
        let mut center: Vec<f64> = (0..k)
            .map(|c| unwrapped.iter().map(|p| p[c]).sum::<f64>() / nodes.len() as f64)
            .collect();
        for (c, x) in center.iter_mut().enumerate() {
            if let Some(p) = self.periods.get(c).copied().flatten() {
                *x = x.rem_euclid(p);
            }
        }
        if !self.is_embedded() {
            return ElementGeometry {
                local: unwrapped,
                center,
            };
        }
        // orthonormal frame of the flat simplex in the embedding
        let origin = &unwrapped[0];
        let diff = |p: &Vec<f64>| -> Vec<f64> { p.iter().zip(origin).map(|(a, b)| a - b).collect() };
        let mut frame: Vec<Vec<f64>> = Vec::new();
        for p in unwrapped.iter().skip(1) {
            let mut v = diff(p);
            for f in &frame {
                let d: f64 = v.iter().zip(f).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(f).for_each(|(a, b)| *a -= d * b);
            }
            let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            frame.push(v.into_iter().map(|a| a / len).collect());
        }
        let local = unwrapped
            .iter()
            .map(|p| {
                let d = diff(p);
                frame
                    .iter()
                    .map(|f| f.iter().zip(&d).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        ElementGeometry { local, center }
    }

    /// Signed chart volume of an element in its local coordinates.
    pub fn element_volume(&self, e: usize) -> f64 {
        signed_volume(&self.element_geometry(e).local)
    }

    fn orient_counterclockwise(&mut self) {
        if self.dimension != 2 || self.is_embedded() {
            return;
        }
        for e in 0..self.elements.len() {
            if self.element_volume(e) < 0.0 {
                self.elements[e].swap(1, 2);
            }
        }
    }

    /// Degree-of-freedom numbering: boundary vertices are fixed (None),
    /// identified vertices share one entry.
    pub fn dof_map(&self) -> (Vec<Option<usize>>, usize) {
        let n = self.vertex_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.identifications {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut fixed = vec![false; n];
        for &b in &self.boundary_vertices {
            fixed[b] = true;
        }
        let mut root_dof: HashMap<usize, usize> = HashMap::new();
        let mut map = vec![None; n];
        let mut count = 0;
        for v in 0..n {
            if fixed[v] {
                continue;
            }
            let r = find(&mut parent, v);
            let dof = *root_dof.entry(r).or_insert_with(|| {
                count += 1;
                count - 1
            });
            map[v] = Some(dof);
        }
        (map, count)
    }

    /// Unique undirected vertex edges of the triangulation.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for el in &self.elements {
            for i in 0..el.len() {
                for j in i + 1..el.len() {
                    let (a, b) = (el[i].min(el[j]), el[i].max(el[j]));
                    edges.push((a, b));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::invalid("mesh dimension must be 1 or 2"));
        }
        let n = self.vertex_count();
        let k = self.coordinate_count();
        if k < self.dimension || self.vertices.iter().any(|v| v.len() != k) {
            return Err(Error::invalid("inconsistent vertex coordinates"));
        }
        if self.periods.len() != k {
            return Err(Error::invalid("one period entry per coordinate is required"));
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el.len() != self.dimension + 1 || el.iter().any(|&v| v >= n) {
                return Err(Error::invalid(format!("element {e} is malformed")));
            }
            if !(self.element_volume(e).abs() > 0.0) {
                return Err(Error::invalid(format!("element {e} has zero volume")));
            }
        }
        if self.boundary_vertices.iter().any(|&b| b >= n) {
            return Err(Error::invalid("boundary vertex out of range"));
        }
        let mut seen = vec![false; n];
        for &(a, b) in &self.identifications {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid("identification pair out of range"));
            }
            if seen[a] || seen[b] {
                return Err(Error::invalid("identifications must pair each vertex at most once"));
            }
            seen[a] = true;
            seen[b] = true;
        }
        if self.boundary_vertices.iter().any(|&b| seen[b]) {
            return Err(Error::invalid("boundary and identified vertices must be disjoint"));
        }
        if !self.is_connected() {
            return Err(Error::invalid("mesh is not connected"));
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return false;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for &(a, b) in &self.identifications {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "spectra-mesh 1");
        let _ = writeln!(s, "id {}", self.id);
        let _ = writeln!(s, "dimension {}", self.dimension);
        let _ = writeln!(s, "coordinates {}", self.coordinate_count());
        let periods: Vec<String> = self
            .periods
            .iter()
            .map(|p| p.map_or("-".to_string(), |v| format!("{v:.17e}")))
            .collect();
        let _ = writeln!(s, "periods {}", periods.join(" "));
        let _ = writeln!(s, "vertices {}", self.vertex_count());
        for v in &self.vertices {
            let row: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "elements {}", self.elements.len());
        for el in &self.elements {
            let row: Vec<String> = el.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "boundary {}", self.boundary_vertices.len());
        for b in &self.boundary_vertices {
            let _ = writeln!(s, "{b}");
        }
        let _ = writeln!(s, "identifications {}", self.identifications.len());
        for (a, b) in &self.identifications {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: &str| Error::MeshFormat {
            line,
            message: message.to_string(),
        };
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            lines
                .next()
                .map(|(i, l)| (i, l.split_whitespace().collect()))
                .ok_or_else(|| err(0, &format!("unexpected end of input, expected {what}")))
        };
        let header = |(line, toks): (usize, Vec<&str>), key: &str| -> Result<Vec<String>> {
            if toks.first() != Some(&key) {
                return Err(err(line, &format!("expected `{key}`")));
            }
            Ok(toks[1..].iter().map(|t| t.to_string()).collect())
        };
        let count = |line: usize, toks: &[String]| -> Result<usize> {
            toks.first()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(line, "expected a count"))
        };

        let (l, t) = next("header")?;
        if t != ["spectra-mesh", "1"] {
            return Err(err(l, "expected `spectra-mesh 1`"));
        }
        let id = header(next("id")?, "id")?.join(" ");
        let (l, t) = next("dimension")?;
        let dimension = count(l, &header((l, t), "dimension")?)?;
        let (l, t) = next("coordinates")?;
        let coords = count(l, &header((l, t), "coordinates")?)?;
        let (l, t) = next("periods")?;
        let periods = header((l, t), "periods")?
            .iter()
            .map(|p| {
                if p == "-" {
                    Ok(None)
                } else {
                    p.parse::<f64>().map(Some).map_err(|_| err(l, "bad period"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (l, t) = next("vertices")?;
        let nv = count(l, &header((l, t), "vertices")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, t) = next("vertex coordinates")?;
            if t.len() != coords {
                return Err(err(l, "wrong number of coordinates"));
            }
            vertices.push(
                t.iter()
                    .map(|x| x.parse::<f64>().map_err(|_| err(l, "bad coordinate")))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let mut read_indices = |key: &str, width: usize| -> Result<Vec<Vec<usize>>> {
            let (l, t) = next(key)?;
            let n = count(l, &header((l, t), key)?)?;
            (0..n)
                .map(|_| {
                    let (l, t) = next(key)?;
                    if t.len() != width {
                        return Err(err(l, &format!("expected {width} indices")));
                    }
                    t.iter()
                        .map(|x| x.parse::<usize>().map_err(|_| err(l, "bad index")))
                        .collect()
                })
                .collect()
        };
        let elements = read_indices("elements", dimension + 1)?;
        let boundary_vertices = read_indices("boundary", 1)?.into_iter().map(|v| v[0]).collect();
        let identifications = read_indices("identifications", 2)?
            .into_iter()
            .map(|v| (v[0], v[1]))
            .collect();
        let mesh = Mesh {
            id,
            dimension,
            vertices,
            elements,
            boundary_vertices,
            identifications,
            periods,
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

fn normalize3(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

pub(crate) fn signed_volume(local: &[Vec<f64>]) -> f64 {
    match local.len() {
        2 => local[1][0] - local[0][0],
        3 => {
            let (a, b, c) = (&local[0], &local[1], &local[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        }
        _ => unreachable!("simplices of dimension 1 or 2"),
    }
}
