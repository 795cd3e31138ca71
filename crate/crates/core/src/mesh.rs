//! Structured triangulations of axis-aligned rectangles and the 1D trace
//! partition they induce on the interface.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Absolute coordinate tolerance for on-line classification.
pub const COORD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Interface,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "DIRICHLET",
            BoundaryTag::Neumann => "NEUMANN",
            BoundaryTag::Interface => "INTERFACE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "DIRICHLET" => Some(BoundaryTag::Dirichlet),
            "NEUMANN" => Some(BoundaryTag::Neumann),
            "INTERFACE" => Some(BoundaryTag::Interface),
            _ => None,
        }
    }
}

/// Tag assignment for the four sides of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    pub fn all(tag: BoundaryTag) -> Self {
        SideTags {
            bottom: tag,
            right: tag,
            top: tag,
            left: tag,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    /// Endpoints in the counter-clockwise orientation of the owning triangle.
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh2D {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

/// Builds a structured mesh of the rectangle `[lower_left, upper_right]` with
/// `nx * ny` cells, each split along its lower-left to upper-right diagonal.
pub fn build_rect_mesh(
    lower_left: Point,
    upper_right: Point,
    nx: usize,
    ny: usize,
    tags: SideTags,
) -> Result<Mesh2D> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidGeometry(format!(
            "cell counts must be positive, got nx = {nx}, ny = {ny}"
        )));
    }
    let (wx, wy) = (upper_right[0] - lower_left[0], upper_right[1] - lower_left[1]);
    if !(wx > 0.0 && wy > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "non-positive extent {wx} x {wy}"
        )));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Hit the far side exactly instead of accumulating round-off.
        let y = if j == ny {
            upper_right[1]
        } else {
            lower_left[1] + wy * j as f64 / ny as f64
        };
        for i in 0..=nx {
            let x = if i == nx {
                upper_right[0]
            } else {
                lower_left[0] + wx * i as f64 / nx as f64
            };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (ll, lr, ur, ul) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(BoundaryEdge {
            vertices: [idx(i, 0), idx(i + 1, 0)],
            tag: tags.bottom,
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge {
            vertices: [idx(nx, j), idx(nx, j + 1)],
            tag: tags.right,
        });
    }
    for i in (0..nx).rev() {
        boundary.push(BoundaryEdge {
            vertices: [idx(i + 1, ny), idx(i, ny)],
            tag: tags.top,
        });
    }
    for j in (0..ny).rev() {
        boundary.push(BoundaryEdge {
            vertices: [idx(0, j + 1), idx(0, j)],
            tag: tags.left,
        });
    }
    Ok(Mesh2D {
        vertices,
        triangles,
        boundary,
    })
}

/// Splits every triangle into four through its edge midpoints.
pub fn refine_uniform(mesh: &Mesh2D) -> Mesh2D {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary.len());
    for e in &mesh.boundary {
        let [a, b] = e.vertices;
        let m = midpoint(a, b, &mut vertices);
        boundary.push(BoundaryEdge {
            vertices: [a, m],
            tag: e.tag,
        });
        boundary.push(BoundaryEdge {
            vertices: [m, b],
            tag: e.tag,
        });
    }
    Mesh2D {
        vertices,
        triangles,
        boundary,
    }
}

impl Mesh2D {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Maps each undirected edge to the triangles containing it.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                map.entry(edge_key(p, q)).or_default().push(t);
            }
        }
        map
    }

    pub fn boundary_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn find_vertex(&self, p: Point, tol: f64) -> Option<usize> {
        self.vertices
            .iter()
            .position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol)
    }

    pub fn translated(&self, offset: Point) -> Mesh2D {
        let mut m = self.clone();
        for v in &mut m.vertices {
            v[0] += offset[0];
            v[1] += offset[1];
        }
        m
    }

    /// Checks orientation, boundary ownership and tagging.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(Error::InvalidGeometry(format!(
                    "triangle {t} has non-positive signed area"
                )));
            }
        }
        let owners = self.edge_triangles();
        let mut seen = HashMap::new();
        for (i, e) in self.boundary.iter().enumerate() {
            let key = edge_key(e.vertices[0], e.vertices[1]);
            match owners.get(&key) {
                Some(ts) if ts.len() == 1 => {}
                _ => {
                    return Err(Error::InvalidGeometry(format!(
                        "boundary edge {i} does not belong to exactly one triangle"
                    )))
                }
            }
            if seen.insert(key, i).is_some() {
                return Err(Error::InvalidGeometry(format!(
                    "boundary edge {i} is tagged more than once"
                )));
            }
        }
        let n_boundary = owners.values().filter(|ts| ts.len() == 1).count();
        if n_boundary != self.boundary.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} boundary edges but {} tagged",
                n_boundary,
                self.boundary.len()
            )));
        }
        Ok(())
    }

    /// Serializes to the `mesh2d v1` text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("mesh2d v1\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.as_str());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh2D> {
        let mut r = LineReader {
            lines: text.lines().enumerate(),
        };
        let (l, header) = r.next("header")?;
        if header != "mesh2d v1" {
            return Err(parse_err(l, "expected header `mesh2d v1`"));
        }
        let nv = r.count("vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, line) = r.next("vertex")?;
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(l, "bad vertex coordinate"))?;
            if xy.len() != 2 {
                return Err(parse_err(l, "vertex needs two coordinates"));
            }
            vertices.push([xy[0], xy[1]]);
        }
        let nt = r.count("triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, line) = r.next("triangle")?;
            let ijk: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(l, "bad triangle index"))?;
            if ijk.len() != 3 || ijk.iter().any(|&i| i >= nv) {
                return Err(parse_err(l, "triangle needs three valid vertex indices"));
            }
            triangles.push([ijk[0], ijk[1], ijk[2]]);
        }
        let nb = r.count("boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let (l, line) = r.next("boundary edge")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(l, "boundary edge needs `i j TAG`"));
            }
            let i = parts[0].parse::<usize>().map_err(|_| parse_err(l, "bad index"))?;
            let j = parts[1].parse::<usize>().map_err(|_| parse_err(l, "bad index"))?;
            let tag = BoundaryTag::parse(parts[2]).ok_or_else(|| parse_err(l, "unknown tag"))?;
            if i >= nv || j >= nv {
                return Err(parse_err(l, "boundary vertex out of range"));
            }
            boundary.push(BoundaryEdge {
                vertices: [i, j],
                tag,
            });
        }
        Ok(Mesh2D {
            vertices,
            triangles,
            boundary,
        })
    }
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| parse_err(0, &format!("unexpected end of input, expected {what}")))
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (l, line) = self.next(key)?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(parse_err(l, &format!("expected `{key} <count>`")));
        }
        it.next()
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| parse_err(l, &format!("bad {key} count")))
    }
}

/// Straight line carrying the interface, with an arc-length frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    /// Point at arc length zero.
    pub origin: Point,
    /// Unit tangent in the direction of increasing arc length.
    pub tangent: Point,
    /// Unit normal, outward from the mesh the trace was extracted from.
    pub normal: Point,
}

impl Line {
    pub fn point(&self, s: f64) -> Point {
        [
            self.origin[0] + s * self.tangent[0],
            self.origin[1] + s * self.tangent[1],
        ]
    }

    pub fn arc_length(&self, p: Point) -> f64 {
        (p[0] - self.origin[0]) * self.tangent[0] + (p[1] - self.origin[1]) * self.tangent[1]
    }

    fn offset(&self, p: Point) -> f64 {
        (p[0] - self.origin[0]) * self.tangent[1] - (p[1] - self.origin[1]) * self.tangent[0]
    }
}

/// Ordered 1D partition of the interface.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceMesh {
    /// Strictly increasing, first = 0, last = |Γ|.
    pub breakpoints: Vec<f64>,
    pub line: Line,
    /// Mesh vertex at each breakpoint; empty for a standalone partition.
    pub vertices: Vec<usize>,
    /// Triangle owning each edge; empty for a standalone partition.
    pub cells: Vec<usize>,
}

impl TraceMesh {
    /// Standalone partition on the unit-speed line through the origin along +y.
    pub fn from_breakpoints(breakpoints: Vec<f64>) -> Result<TraceMesh> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidGeometry("need at least two breakpoints".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidGeometry("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGeometry("breakpoints must strictly increase".into()));
        }
        Ok(TraceMesh {
            breakpoints,
            line: Line {
                origin: [0.0, 0.0],
                tangent: [0.0, 1.0],
                normal: [1.0, 0.0],
            },
            vertices: Vec::new(),
            cells: Vec::new(),
        })
    }

    pub fn uniform(n: usize, length: f64) -> Result<TraceMesh> {
        let mut bp: Vec<f64> = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        if let Some(last) = bp.last_mut() {
            *last = length;
        }
        TraceMesh::from_breakpoints(bp)
    }

    pub fn n_edges(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn edge(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    pub fn h(&self, e: usize) -> f64 {
        self.breakpoints[e + 1] - self.breakpoints[e]
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.n_edges()).map(|e| self.h(e)).collect()
    }

    pub fn h_max(&self) -> f64 {
        self.edge_lengths().into_iter().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.edge_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Index of the edge containing `s`; interior breakpoints go right.
    pub fn locate(&self, s: f64) -> usize {
        let n = self.n_edges();
        let k = self.breakpoints.partition_point(|&b| b <= s);
        k.saturating_sub(1).min(n - 1)
    }

    /// Midpoint bisection of every edge, as a standalone partition.
    pub fn refined(&self) -> TraceMesh {
        let mut bp = Vec::with_capacity(2 * self.breakpoints.len() - 1);
        for w in self.breakpoints.windows(2) {
            bp.push(w[0]);
            bp.push(0.5 * (w[0] + w[1]));
        }
        bp.push(self.length());
        TraceMesh {
            breakpoints: bp,
            line: self.line,
            vertices: Vec::new(),
            cells: Vec::new(),
        }
    }
}

/// Extracts the ordered interface partition from the INTERFACE-tagged edges.
///
/// The arc length increases with y on a vertical interface and with x
/// otherwise, so both sides of a coupled pair share the same frame.
pub fn extract_trace_mesh(mesh: &Mesh2D) -> Result<TraceMesh> {
    let edges: Vec<[usize; 2]> = mesh
        .boundary
        .iter()
        .filter(|e| e.tag == BoundaryTag::Interface)
        .map(|e| e.vertices)
        .collect();
    if edges.is_empty() {
        return Err(Error::EmptyInterface);
    }
    let (p, q) = (mesh.vertices[edges[0][0]], mesh.vertices[edges[0][1]]);
    let len = dist(p, q);
    let mut tangent = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
    if (tangent[1].abs() > tangent[0].abs() && tangent[1] < 0.0)
        || (tangent[1].abs() <= tangent[0].abs() && tangent[0] < 0.0)
    {
        tangent = [-tangent[0], -tangent[1]];
    }
    let probe = Line {
        origin: p,
        tangent,
        normal: [tangent[1], -tangent[0]],
    };
    for e in &edges {
        for &v in e {
            if probe.offset(mesh.vertices[v]).abs() > COORD_TOL {
                return Err(Error::UnsupportedGeometry(
                    "interface edges are not collinear".into(),
                ));
            }
        }
    }
    // (start s, end s, start vertex, end vertex)
    let mut segs: Vec<(f64, f64, usize, usize, usize)> = edges
        .iter()
        .enumerate()
        .map(|(i, &[a, b])| {
            let (sa, sb) = (probe.arc_length(mesh.vertices[a]), probe.arc_length(mesh.vertices[b]));
            if sa < sb {
                (sa, sb, a, b, i)
            } else {
                (sb, sa, b, a, i)
            }
        })
        .collect();
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in segs.windows(2) {
        if w[0].3 != w[1].2 {
            return Err(Error::UnsupportedGeometry(
                "interface edges do not form a single connected chain".into(),
            ));
        }
    }
    let origin = mesh.vertices[segs[0].2];
    let mut line = Line {
        origin,
        tangent,
        normal: probe.normal,
    };
    let owners = mesh.edge_triangles();
    let mut cells = Vec::with_capacity(segs.len());
    let mut vertices = vec![segs[0].2];
    let mut breakpoints = vec![0.0];
    for (k, seg) in segs.iter().enumerate() {
        let [a, b] = edges[seg.4];
        let t = owners
            .get(&edge_key(a, b))
            .and_then(|ts| ts.first().copied())
            .ok_or_else(|| Error::InvalidGeometry("interface edge without triangle".into()))?;
        // Outward normal: away from the vertex opposite the edge.
        let opp = mesh.triangles[t]
            .iter()
            .copied()
            .find(|&v| v != a && v != b)
            .unwrap();
        let po = mesh.vertices[opp];
        let mut n_dot = (po[0] - origin[0]) * line.normal[0] + (po[1] - origin[1]) * line.normal[1];
        if k == 0 && n_dot > 0.0 {
            line.normal = [-line.normal[0], -line.normal[1]];
            n_dot = -n_dot;
        }
        if n_dot >= 0.0 {
            return Err(Error::InvalidGeometry(
                "interface lies on both sides of its elements".into(),
            ));
        }
        cells.push(t);
        vertices.push(seg.3);
        breakpoints.push(line.arc_length(mesh.vertices[seg.3]));
    }
    Ok(TraceMesh {
        breakpoints,
        line,
        vertices,
        cells,
    })
}

/// Ratio of the smallest to the largest trace edge.
pub fn mesh_uniformity_ratio(trace: &TraceMesh) -> f64 {
    trace.h_min() / trace.h_max()
}

/// Bucket grid over triangle bounding boxes for point location.
pub struct PointLocator<'a> {
    mesh: &'a Mesh2D,
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh2D) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &mesh.vertices {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        let n = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).max(1);
        let dims = [n, n];
        let cell = [
            ((hi[0] - lo[0]) / n as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / n as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = PointLocator {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); n * n],
        };
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for q in p {
                for c in 0..2 {
                    a[c] = a[c].min(q[c]);
                    b[c] = b[c].max(q[c]);
                }
            }
            let (i0, j0) = loc.bucket(a);
            let (i1, j1) = loc.bucket(b);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * n + i].push(t);
                }
            }
        }
        loc
    }

    fn bucket(&self, p: Point) -> (usize, usize) {
        let idx = |c: usize| {
            let k = ((p[c] - self.origin[c]) / self.cell[c]).floor();
            (k.max(0.0) as usize).min(self.dims[c] - 1)
        };
        (idx(0), idx(1))
    }

    /// Triangle containing `p` (within `tol` in barycentric coordinates)
    /// and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Point, tol: f64) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.bucket(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let b = crate::fem::barycentric(self.mesh.triangle_points(t), p);
            let m = b[0].min(b[1]).min(b[2]);
            if m >= -tol && best.is_none_or(|(_, _, bm)| m > bm) {
                best = Some((t, b, m));
            }
        }
        best.map(|(t, b, _)| (t, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryTag::*;

    fn unit(nx: usize, ny: usize, tags: SideTags) -> Mesh2D {
        build_rect_mesh([0.0, 0.0], [1.0, 1.0], nx, ny, tags).unwrap()
    }

    fn right_interface() -> SideTags {
        SideTags {
            bottom: Neumann,
            right: Interface,
            top: Neumann,
            left: Dirichlet,
        }
    }

    #[test]
    fn smallest_mesh() {
        let m = unit(1, 1, SideTags::all(Neumann));
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.boundary.len(), 4);
        m.validate().unwrap();
    }

    #[test]
    fn counts() {
        let m = unit(2, 2, SideTags::all(Neumann));
        assert_eq!((m.n_vertices(), m.n_triangles()), (9, 8));
        let tags = SideTags {
            bottom: Neumann,
            right: Dirichlet,
            top: Neumann,
            left: Interface,
        };
        let m = build_rect_mesh([1.0, 0.0], [1.5, 1.0], 2, 4, tags).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (15, 16));
        let left: Vec<_> = m.boundary.iter().filter(|e| e.tag == Interface).collect();
        assert_eq!(left.len(), 4);
        assert!(left
            .iter()
            .all(|e| e.vertices.iter().all(|&v| m.vertices[v][0] == 1.0)));
        m.validate().unwrap();
    }

    #[test]
    fn bad_extent() {
        let r = build_rect_mesh([0.0, 0.0], [0.0, 1.0], 1, 1, SideTags::all(Neumann));
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
        let r = build_rect_mesh([0.0, 0.0], [1.0, 1.0], 0, 1, SideTags::all(Neumann));
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn refinement_counts_and_size() {
        let m = unit(1, 1, SideTags::all(Neumann));
        let r = refine_uniform(&m);
        assert_eq!((r.n_vertices(), r.n_triangles()), (9, 8));
        let rr = refine_uniform(&r);
        assert_eq!(rr.n_triangles(), 16 * m.n_triangles());
        assert!((r.max_edge_length() - 0.5 * m.max_edge_length()).abs() < 1e-15);
        r.validate().unwrap();
        rr.validate().unwrap();
        assert!((rr.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_uniform() {
        let m = unit(4, 4, right_interface());
        let t = extract_trace_mesh(&m).unwrap();
        assert_eq!(t.n_edges(), 4);
        assert!(t.edge_lengths().iter().all(|&h| (h - 0.25).abs() < 1e-15));
        assert_eq!(t.line.normal, [1.0, 0.0]);
        assert_eq!(t.line.tangent, [0.0, 1.0]);
        assert_eq!(t.line.origin, [1.0, 0.0]);

        let t = extract_trace_mesh(&unit(3, 1, right_interface())).unwrap();
        assert_eq!(t.n_edges(), 1);
        assert_eq!(t.h(0), 1.0);
    }

    #[test]
    fn trace_normal_points_outward_on_left() {
        let tags = SideTags {
            bottom: Neumann,
            right: Dirichlet,
            top: Neumann,
            left: Interface,
        };
        let m = build_rect_mesh([1.0, 0.0], [1.5, 1.0], 2, 5, tags).unwrap();
        let t = extract_trace_mesh(&m).unwrap();
        assert_eq!(t.line.normal, [-1.0, 0.0]);
        assert_eq!(t.n_edges(), 5);
        assert_eq!(t.line.origin, [1.0, 0.0]);
    }

    #[test]
    fn graded_partition() {
        let t = TraceMesh::from_breakpoints(vec![0.0, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(t.edge_lengths(), vec![0.5, 0.25, 0.25]);
        assert_eq!(mesh_uniformity_ratio(&t), 0.5);
        assert_eq!(t.locate(0.5), 1);
        assert_eq!(t.locate(1.0), 2);
        assert_eq!(t.locate(0.0), 0);
    }

    #[test]
    fn empty_and_noncollinear_interfaces() {
        let m = unit(2, 2, SideTags::all(Neumann));
        assert!(matches!(extract_trace_mesh(&m), Err(Error::EmptyInterface)));
        let tags = SideTags {
            bottom: Interface,
            right: Interface,
            top: Neumann,
            left: Neumann,
        };
        let m = unit(2, 2, tags);
        assert!(matches!(
            extract_trace_mesh(&m),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn uniformity_preserved_by_refinement() {
        let t = TraceMesh::uniform(5, 1.0).unwrap();
        assert!((mesh_uniformity_ratio(&t) - 1.0).abs() < 1e-12);
        assert!((mesh_uniformity_ratio(&t.refined()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_format_layout() {
        let m = unit(1, 1, right_interface());
        let text = m.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "mesh2d v1");
        assert_eq!(lines[1], "vertices 4");
        assert_eq!(lines[2], "0.0 0.0");
        assert_eq!(lines[6], "triangles 2");
        assert_eq!(lines[7], "0 1 3");
        assert_eq!(lines[9], "boundary 4");
        assert_eq!(lines[11], "1 3 INTERFACE");
        assert_eq!(Mesh2D::from_text(&text).unwrap(), m);
    }

    #[test]
    fn text_format_errors_carry_line() {
        let bad = "mesh2d v1\nvertices 1\n0.0 zz\n";
        match Mesh2D::from_text(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn point_location() {
        let m = unit(3, 2, SideTags::all(Neumann));
        let loc = PointLocator::new(&m);
        for p in [[0.1, 0.1], [0.99, 0.51], [0.5, 0.5], [1.0, 1.0], [0.0, 0.0]] {
            let (t, b) = loc.locate(p, 1e-12).unwrap();
            assert!(b.iter().all(|&x| x >= -1e-12));
            let q = m.triangle_points(t);
            let back = [
                b[0] * q[0][0] + b[1] * q[1][0] + b[2] * q[2][0],
                b[0] * q[0][1] + b[1] * q[1][1] + b[2] * q[2][1],
            ];
            assert!((back[0] - p[0]).abs() < 1e-14 && (back[1] - p[1]).abs() < 1e-14);
        }
        assert!(loc.locate([1.5, 0.5], 1e-12).is_none());
    }
}
