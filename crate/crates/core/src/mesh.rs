//! Conforming triangular meshes of polygonal 2D domains.
//!
//! A [`Mesh`] is immutable once built. Faces are derived from element
//! connectivity: each face keeps its two end vertices in the orientation seen
//! from its first adjacent element, so the stored normal is outward for that
//! element and inward for the second one.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("element {element} references vertex {vertex}, but only {count} vertices exist")]
    VertexOutOfRange { element: usize, vertex: usize, count: usize },
    #[error("element {element} duplicates element {first}")]
    DuplicateElement { element: usize, first: usize },
    #[error("element {element} is inverted or degenerate (signed area {area:e})")]
    InvertedElement { element: usize, area: f64 },
    #[error("edge ({a}, {b}) is shared by more than two elements")]
    NonManifoldFace { a: usize, b: usize },
    #[error("structured mesh needs at least one cell per side")]
    EmptyGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// End points, counterclockwise with respect to `elements[0]`.
    pub vertices: [usize; 2],
    pub elements: [usize; 2],
    /// Local edge index of this face inside each adjacent element.
    pub local: [usize; 2],
    pub boundary: bool,
}

impl Face {
    /// The second adjacent element and the face's local index inside it.
    pub fn neighbor(&self) -> Option<(usize, usize)> {
        (!self.boundary).then_some((self.elements[1], self.local[1]))
    }
}

/// Local edge `l` of a triangle is the edge opposite its vertex `l`,
/// traversed counterclockwise.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    faces: Vec<Face>,
    element_faces: Vec<[usize; 3]>,
    diameters: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetrics {
    pub h_max: f64,
    pub h_min: f64,
    /// Largest diameter-to-inradius ratio over all elements.
    pub shape_regularity: f64,
}

/// Affine map from the reference triangle `{x, y >= 0, x + y <= 1}` onto one
/// physical element.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    inverse: [[f64; 2]; 2],
}

impl ElementGeometry {
    pub fn new(v: [Point; 3]) -> Self {
        let jacobian = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        let inverse = [
            [jacobian[1][1] / det, -jacobian[0][1] / det],
            [-jacobian[1][0] / det, jacobian[0][0] / det],
        ];
        Self { origin: v[0], jacobian, det, inverse }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let g = &self.inverse;
        [g[0][0] * d[0] + g[0][1] * d[1], g[1][0] * d[0] + g[1][1] * d[1]]
    }

    /// Maps a reference gradient to a physical one (`J^{-T} g`).
    pub fn physical_gradient(&self, g: Point) -> Point {
        let inv = &self.inverse;
        [inv[0][0] * g[0] + inv[1][0] * g[1], inv[0][1] * g[0] + inv[1][1] * g[1]]
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh from vertices and counterclockwise vertex triples,
    /// deriving faces and adjacency.
    pub fn new(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut seen: HashMap<[usize; 3], usize> = HashMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { element: e, vertex: v, count: nv });
                }
            }
            let mut key = *tri;
            key.sort_unstable();
            if let Some(&first) = seen.get(&key) {
                return Err(MeshError::DuplicateElement { element: e, first });
            }
            seen.insert(key, e);
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(MeshError::InvertedElement { element: e, area });
            }
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_faces = vec![[0usize; 3]; elements.len()];
        for (e, tri) in elements.iter().enumerate() {
            for (l, edge) in LOCAL_EDGES.iter().enumerate() {
                let (a, b) = (tri[edge[0]], tri[edge[1]]);
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        lookup.insert(key, faces.len());
                        element_faces[e][l] = faces.len();
                        faces.push(Face { vertices: [a, b], elements: [e, e], local: [l, l], boundary: true });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if !face.boundary {
                            return Err(MeshError::NonManifoldFace { a: key.0, b: key.1 });
                        }
                        face.elements[1] = e;
                        face.local[1] = l;
                        face.boundary = false;
                        element_faces[e][l] = f;
                    }
                }
            }
        }

        let diameters = elements
            .iter()
            .map(|t| {
                let p = t.map(|v| vertices[v]);
                distance(p[0], p[1]).max(distance(p[1], p[2])).max(distance(p[2], p[0]))
            })
            .collect();

        Ok(Self { vertices, elements, faces, element_faces, diameters })
    }

    /// Unit square split into `n x n` cells, each cut along its
    /// bottom-left to top-right diagonal.
    pub fn structured_square(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::EmptyGrid);
        }
        let side = n + 1;
        let vertices = (0..side)
            .flat_map(|j| (0..side).map(move |i| [i as f64 / n as f64, j as f64 / n as f64]))
            .collect();
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        Self::new(vertices, elements)
    }

    /// Parses the plain-text node/element format (see [`Mesh::to_text`]).
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        fn fields<T: std::str::FromStr>(line: usize, s: &str, count: usize) -> Result<Vec<T>, MeshError> {
            let parts: Vec<&str> = s.split_whitespace().collect();
            if parts.len() != count {
                return Err(MeshError::Malformed {
                    line,
                    message: format!("expected {count} fields, found {}", parts.len()),
                });
            }
            parts
                .iter()
                .map(|p| {
                    p.parse::<T>().map_err(|_| MeshError::Malformed { line, message: format!("cannot parse `{p}`") })
                })
                .collect()
        }

        let (line, header) = lines.next().ok_or(MeshError::Malformed { line: 1, message: "empty mesh file".into() })?;
        let counts: Vec<usize> = fields(line, header, 2)?;
        let (nv, ne) = (counts[0], counts[1]);

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines.next().ok_or(MeshError::Malformed { line: 0, message: "missing vertex lines".into() })?;
            let xy: Vec<f64> = fields(line, l, 2)?;
            if !xy.iter().all(|v| v.is_finite()) {
                return Err(MeshError::Malformed { line, message: "non-finite coordinate".into() });
            }
            vertices.push([xy[0], xy[1]]);
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (line, l) = lines.next().ok_or(MeshError::Malformed { line: 0, message: "missing element lines".into() })?;
            let ijk: Vec<usize> = fields(line, l, 3)?;
            elements.push([ijk[0], ijk[1], ijk[2]]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(MeshError::Malformed { line, message: "trailing content after element list".into() });
        }
        Self::new(vertices, elements)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vertices.len(), self.elements.len());
        for v in &self.vertices {
            // `{:?}` on f64 is the shortest round-tripping representation.
            let _ = writeln!(out, "{:?} {:?}", v[0], v[1]);
        }
        for t in &self.elements {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.boundary).count()
    }

    /// Global face index of each local edge of element `e`.
    pub fn element_faces(&self, e: usize) -> [usize; 3] {
        self.element_faces[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 3] {
        self.elements[e].map(|v| self.vertices[v])
    }

    pub fn geometry(&self, e: usize) -> ElementGeometry {
        ElementGeometry::new(self.element_vertices(e))
    }

    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    /// Global mesh size `h = max_K h_K`.
    pub fn h(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.geometry(e).area()).sum()
    }

    pub fn face_points(&self, f: usize) -> [Point; 2] {
        self.faces[f].vertices.map(|v| self.vertices[v])
    }

    pub fn face_length(&self, f: usize) -> f64 {
        let [a, b] = self.face_points(f);
        distance(a, b)
    }

    /// Unit normal of face `f`, outward with respect to its first element.
    pub fn face_normal(&self, f: usize) -> Point {
        let [a, b] = self.face_points(f);
        let len = distance(a, b);
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// Unit normal of face `f` pointing out of element `e`.
    pub fn outward_normal(&self, f: usize, e: usize) -> Point {
        let n = self.face_normal(f);
        if self.faces[f].elements[0] == e {
            n
        } else {
            [-n[0], -n[1]]
        }
    }

    /// `#vertices - #faces + #elements`; equals 1 for a simply connected domain.
    pub fn euler_characteristic(&self) -> isize {
        self.vertices.len() as isize - self.faces.len() as isize + self.elements.len() as isize
    }

    pub fn metrics(&self) -> MeshMetrics {
        let mut h_max = 0.0f64;
        let mut h_min = f64::INFINITY;
        let mut shape = 0.0f64;
        for e in 0..self.num_elements() {
            let [a, b, c] = self.element_vertices(e);
            let perimeter = distance(a, b) + distance(b, c) + distance(c, a);
            let inradius = 2.0 * signed_area(a, b, c) / perimeter;
            let d = self.diameters[e];
            h_max = h_max.max(d);
            h_min = h_min.min(d);
            shape = shape.max(d / inradius);
        }
        MeshMetrics { h_max, h_min, shape_regularity: shape }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_square() {
        let m = Mesh::structured_square(1).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.num_faces(), 5);
        assert_eq!(m.num_interior_faces(), 1);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn rejects_empty_grid() {
        assert_eq!(Mesh::structured_square(0).unwrap_err(), MeshError::EmptyGrid);
    }

    #[test]
    fn counts_by_enumeration() {
        // Count vertices and faces of the n x n grid directly:
        // (n+1)^2 vertices, n(n+1) horizontal + n(n+1) vertical + n^2 diagonal edges.
        for n in 1..=12 {
            let m = Mesh::structured_square(n).unwrap();
            assert_eq!(m.vertices().len(), (n + 1) * (n + 1));
            assert_eq!(m.num_elements(), 2 * n * n);
            assert_eq!(m.num_faces(), 2 * n * (n + 1) + n * n);
            assert_eq!(m.faces().iter().filter(|f| f.boundary).count(), 4 * n);
        }
        let m = Mesh::structured_square(2).unwrap();
        assert!((m.h() / 2f64.sqrt() - 0.5).abs() < 1e-15);
        assert_eq!(Mesh::structured_square(32).unwrap().num_elements(), 2048);
    }

    #[test]
    fn structured_invariants() {
        for n in 1..=64 {
            let m = Mesh::structured_square(n).unwrap();
            assert_eq!(m.euler_characteristic(), 1);
            assert!((m.area() - 1.0).abs() < 1e-12);
            for f in m.faces() {
                if f.boundary {
                    assert_eq!(f.elements[0], f.elements[1]);
                } else {
                    assert_ne!(f.elements[0], f.elements[1]);
                }
            }
            for e in 0..m.num_elements() {
                assert!(m.geometry(e).det > 0.0);
                assert!((m.diameter(e) - 2f64.sqrt() / n as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn normals_are_outward() {
        let m = Mesh::structured_square(3).unwrap();
        for e in 0..m.num_elements() {
            let v = m.element_vertices(e);
            let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
            for f in m.element_faces(e) {
                let [a, b] = m.face_points(f);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let n = m.outward_normal(f, e);
                assert!(n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) > 0.0);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::structured_square(1).unwrap();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.elements(), m.elements());
        assert_eq!(back.faces(), m.faces());
    }

    #[test]
    fn parse_comments_and_errors() {
        let text = "# unit triangle\n3 1\n0 0\n1 0 # right corner\n0 1\n0 1 2\n";
        let m = Mesh::parse(text).unwrap();
        assert_eq!(m.num_faces(), 3);

        let clockwise = "3 1\n0 0\n1 0\n0 1\n0 2 1\n";
        assert!(matches!(Mesh::parse(clockwise), Err(MeshError::InvertedElement { element: 0, .. })));

        let dup = "3 2\n0 0\n1 0\n0 1\n0 1 2\n1 2 0\n";
        assert!(matches!(Mesh::parse(dup), Err(MeshError::DuplicateElement { element: 1, first: 0 })));

        let nonmanifold = "5 3\n0 0\n1 0\n0 1\n0 -1\n0.5 0.5\n0 1 2\n1 0 3\n0 1 4\n";
        assert!(matches!(Mesh::parse(nonmanifold), Err(MeshError::NonManifoldFace { a: 0, b: 1 })));

        assert!(matches!(Mesh::parse("3 1\n0 0\n1 x\n0 1\n0 1 2\n"), Err(MeshError::Malformed { line: 3, .. })));
        assert!(matches!(Mesh::parse("3 1\n0 0\n1 0\n0 1\n0 1 7\n"), Err(MeshError::VertexOutOfRange { .. })));
        assert!(matches!(Mesh::parse(""), Err(MeshError::Malformed { .. })));
    }

    #[test]
    fn vertex_sharing_triangles_have_no_interior_faces() {
        let text = "5 2\n0 0\n1 0\n0 1\n-1 0\n0 -1\n0 1 2\n0 3 4\n";
        let m = Mesh::parse(text).unwrap();
        assert_eq!(m.num_interior_faces(), 0);
        assert_eq!(m.num_faces(), 6);
    }

    #[test]
    fn metrics() {
        let m = Mesh::structured_square(2).unwrap();
        let met = m.metrics();
        assert!((met.h_max - 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((met.h_min - met.h_max).abs() < 1e-15);

        let tri = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let met = tri.metrics();
        let inradius = (2.0 - 2f64.sqrt()) / 2.0;
        assert!((met.h_max - 2f64.sqrt()).abs() < 1e-15);
        assert!((met.shape_regularity - 2f64.sqrt() / inradius).abs() < 1e-12);

        let r1 = Mesh::structured_square(3).unwrap().metrics().shape_regularity;
        let r2 = Mesh::structured_square(17).unwrap().metrics().shape_regularity;
        assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn geometry_maps_are_inverse() {
        let g = ElementGeometry::new([[0.2, 0.1], [1.3, 0.4], [0.5, 1.7]]);
        let x = g.to_physical([0.3, 0.25]);
        let xi = g.to_reference(x);
        assert!((xi[0] - 0.3).abs() < 1e-14 && (xi[1] - 0.25).abs() < 1e-14);
    }
}
