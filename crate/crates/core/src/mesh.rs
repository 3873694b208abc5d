//! Structured tetrahedral meshes of an axis-aligned cavity with an embedded
//! ferromagnet submesh.
//!
//! Boxes are split into `n³` cells and every cell into the six Kuhn
//! tetrahedra sharing the cell's main diagonal. Kuhn tetrahedra are
//! orthoschemes, so every dihedral angle is at most π/2 and the scalar P1
//! stiffness matrix has no positive off-diagonal entry.

use std::collections::HashMap;

use crate::assembly::assemble_p1_stiffness;
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Local vertex pairs of the six tetrahedron edges.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Off-diagonal stiffness entries above this count as obtuse.
pub const WEAK_ACUTENESS_TOL: f64 = 1e-14;

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn unit() -> Self {
        Aabb::new([0.0; 3], [1.0; 3])
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.max[i] > self.min[i])
    }

    pub fn extent(&self) -> Vec3 {
        vec3::sub(self.max, self.min)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0] * e[1] * e[2]
    }

    /// Closed containment with a small relative slack.
    pub fn contains(&self, x: Vec3) -> bool {
        let e = self.extent();
        (0..3).all(|i| {
            let tol = 1e-12 * e[i].abs().max(1.0);
            x[i] >= self.min[i] - tol && x[i] <= self.max[i] + tol
        })
    }
}

/// A globally oriented edge `a -> b` with `a < b`.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub tangent: Vec3,
    pub length: f64,
}

/// Reference from a tetrahedron to one of its edges. `sign` is `+1` when the
/// local order of [`LOCAL_EDGES`] agrees with the global orientation.
#[derive(Debug, Clone, Copy)]
pub struct TetEdge {
    pub edge: usize,
    pub sign: f64,
}

/// Volume and barycentric-coordinate gradients of one tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [Vec3; 4],
}

impl TetGeometry {
    fn new(x: [Vec3; 4]) -> Self {
        let e1 = vec3::sub(x[1], x[0]);
        let e2 = vec3::sub(x[2], x[0]);
        let e3 = vec3::sub(x[3], x[0]);
        let det = vec3::det3(e1, e2, e3);
        // rows of the inverse Jacobian
        let g1 = vec3::scale(1.0 / det, vec3::cross(e2, e3));
        let g2 = vec3::scale(1.0 / det, vec3::cross(e3, e1));
        let g3 = vec3::scale(1.0 / det, vec3::cross(e1, e2));
        let g0 = vec3::scale(-1.0, vec3::add(vec3::add(g1, g2), g3));
        TetGeometry {
            volume: det / 6.0,
            grads: [g0, g1, g2, g3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    n: usize,
    bounds: Aabb,
}

/// Tetrahedral mesh of the cavity with the ferromagnet marked per element.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    tets: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    tet_edges: Vec<[TetEdge; 6]>,
    geometry: Vec<TetGeometry>,
    ferro_mask: Vec<bool>,
    ferro_vertices: Vec<usize>,
    ferro_index: Vec<Option<usize>>,
    ferro_edges: Vec<usize>,
    ferro_box: Aabb,
    h: f64,
    spacing: f64,
    grid: Option<Grid>,
}

/// Outcome of [`check_weak_acuteness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakAcuteness {
    pub ok: bool,
    pub worst_offdiag: f64,
}

impl Mesh {
    /// Builds a mesh from raw vertices and tetrahedra. Negatively oriented
    /// tetrahedra are flipped; degenerate ones are rejected. All elements are
    /// marked ferromagnetic.
    pub fn from_parts(vertices: Vec<Vec3>, tets: Vec<[usize; 4]>, spacing: f64) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::InvalidMesh("no tetrahedra".into()));
        }
        let mut tets = tets;
        let mut geometry = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter_mut().enumerate() {
            if tet.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("tet {t} references a missing vertex")));
            }
            let mut g = TetGeometry::new(tet.map(|v| vertices[v]));
            if g.volume < 0.0 {
                tet.swap(2, 3);
                g = TetGeometry::new(tet.map(|v| vertices[v]));
            }
            if !(g.volume > 0.0) || !g.volume.is_finite() {
                return Err(Error::InvalidMesh(format!("tet {t} is degenerate")));
            }
            geometry.push(g);
        }

        let mut pairs: Vec<(usize, usize)> = tets
            .iter()
            .flat_map(|tet| {
                LOCAL_EDGES
                    .iter()
                    .map(move |&(i, j)| (tet[i].min(tet[j]), tet[i].max(tet[j])))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let lookup: HashMap<(usize, usize), usize> =
            pairs.iter().enumerate().map(|(e, &p)| (p, e)).collect();
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(a, b)| {
                let d = vec3::sub(vertices[b], vertices[a]);
                let length = vec3::norm(d);
                Edge {
                    a,
                    b,
                    tangent: vec3::scale(1.0 / length, d),
                    length,
                }
            })
            .collect();
        let tet_edges = tets
            .iter()
            .map(|tet| {
                LOCAL_EDGES.map(|(i, j)| {
                    let (p, q) = (tet[i], tet[j]);
                    TetEdge {
                        edge: lookup[&(p.min(q), p.max(q))],
                        sign: if p < q { 1.0 } else { -1.0 },
                    }
                })
            })
            .collect();
        let verts = &vertices;
        let h = tets
            .iter()
            .flat_map(|tet| {
                LOCAL_EDGES
                    .iter()
                    .map(move |&(i, j)| vec3::norm(vec3::sub(verts[tet[i]], verts[tet[j]])))
            })
            .fold(0.0, f64::max);

        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }

        let n_tets = tets.len();
        let mut mesh = Mesh {
            vertices,
            tets,
            edges,
            tet_edges,
            geometry,
            ferro_mask: Vec::new(),
            ferro_vertices: Vec::new(),
            ferro_index: Vec::new(),
            ferro_edges: Vec::new(),
            ferro_box: Aabb::new(lo, hi),
            h,
            spacing,
            grid: None,
        };
        mesh.set_ferro_mask(vec![true; n_tets])?;
        Ok(mesh)
    }

    /// Replaces the ferromagnet marking and rebuilds the submesh index maps.
    pub fn with_ferro_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.set_ferro_mask(mask)?;
        Ok(self)
    }

    fn set_ferro_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.tets.len() {
            return Err(Error::InvalidMesh("ferromagnet mask length mismatch".into()));
        }
        if !mask.iter().any(|&f| f) {
            return Err(Error::InvalidMesh("ferromagnet contains no tetrahedra".into()));
        }
        let mut in_d = vec![false; self.vertices.len()];
        let mut edge_in_d = vec![false; self.edges.len()];
        for (t, _) in mask.iter().enumerate().filter(|(_, &f)| f) {
            for &v in &self.tets[t] {
                in_d[v] = true;
            }
            for te in &self.tet_edges[t] {
                edge_in_d[te.edge] = true;
            }
        }
        self.ferro_vertices = (0..self.vertices.len()).filter(|&v| in_d[v]).collect();
        self.ferro_index = vec![None; self.vertices.len()];
        for (local, &global) in self.ferro_vertices.iter().enumerate() {
            self.ferro_index[global] = Some(local);
        }
        self.ferro_edges = (0..self.edges.len()).filter(|&e| edge_in_d[e]).collect();
        self.ferro_mask = mask;
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn tet_edges(&self, tet: usize) -> &[TetEdge; 6] {
        &self.tet_edges[tet]
    }

    pub fn geometry(&self, tet: usize) -> &TetGeometry {
        &self.geometry[tet]
    }

    pub fn tet_points(&self, tet: usize) -> [Vec3; 4] {
        self.tets[tet].map(|v| self.vertices[v])
    }

    pub fn ferro_mask(&self) -> &[bool] {
        &self.ferro_mask
    }

    pub fn is_ferro(&self, tet: usize) -> bool {
        self.ferro_mask[tet]
    }

    /// Indices of the ferromagnet tetrahedra.
    pub fn ferro_tets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tets.len()).filter(move |&t| self.ferro_mask[t])
    }

    /// Global indices of the ferromagnet vertices, in submesh order.
    pub fn ferro_vertices(&self) -> &[usize] {
        &self.ferro_vertices
    }

    /// Submesh index of a global vertex, if it belongs to the ferromagnet.
    pub fn ferro_index(&self, global: usize) -> Option<usize> {
        self.ferro_index[global]
    }

    /// Submesh indices of a ferromagnet tetrahedron's vertices.
    pub fn ferro_tet(&self, tet: usize) -> [usize; 4] {
        self.tets[tet].map(|v| self.ferro_index[v].expect("tet not in ferromagnet"))
    }

    /// Global indices of edges touched by ferromagnet tetrahedra.
    pub fn ferro_edges(&self) -> &[usize] {
        &self.ferro_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    /// Number of ferromagnet vertices (`N`).
    pub fn n_nodes(&self) -> usize {
        self.ferro_vertices.len()
    }

    /// Number of cavity edges (`M`).
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Maximal tetrahedron diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid cell edge length (largest over the three axes).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn ferro_volume(&self) -> f64 {
        self.ferro_tets().map(|t| self.geometry[t].volume).sum()
    }

    /// Box enclosing the ferromagnet (the whole mesh unless restricted).
    pub fn ferro_box(&self) -> Aabb {
        self.ferro_box
    }

    pub fn grid_cells(&self) -> Option<usize> {
        self.grid.map(|g| g.n)
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.grid.map(|g| g.bounds)
    }

    pub fn centroid(&self, tet: usize) -> Vec3 {
        let p = self.tet_points(tet);
        vec3::scale(0.25, vec3::add(vec3::add(p[0], p[1]), vec3::add(p[2], p[3])))
    }

    /// Tetrahedra incident to each edge.
    pub fn edge_to_tets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.edges.len()];
        for (t, refs) in self.tet_edges.iter().enumerate() {
            for r in refs {
                out[r.edge].push(t);
            }
        }
        out
    }

    /// Restricts the ferromagnet to the tetrahedra inside `d_box`, whose faces
    /// must lie on grid planes of a structured mesh.
    pub fn restrict_to_ferromagnet(&self, d_box: Aabb) -> Result<Mesh> {
        let grid = self
            .grid
            .ok_or_else(|| Error::InvalidMesh("restriction needs a structured grid mesh".into()))?;
        if !d_box.is_valid() {
            return Err(Error::InvalidArgument("ferromagnet box is degenerate".into()));
        }
        let ext = grid.bounds.extent();
        for axis in 0..3 {
            let h = ext[axis] / grid.n as f64;
            for x in [d_box.min[axis], d_box.max[axis]] {
                let cells = (x - grid.bounds.min[axis]) / h;
                let snapped = cells.round();
                if (cells - snapped).abs() > 1e-9 || snapped < 0.0 || snapped > grid.n as f64 {
                    return Err(Error::InvalidArgument(format!(
                        "ferromagnet face {x} on axis {axis} is not a grid plane"
                    )));
                }
            }
        }
        let mask = (0..self.tets.len())
            .map(|t| d_box.contains(self.centroid(t)))
            .collect();
        let mut out = self.clone();
        out.set_ferro_mask(mask)?;
        out.ferro_box = d_box;
        Ok(out)
    }

    /// Checks the structural invariants: positive volumes, consistent edge
    /// orientation and conforming interior faces.
    pub fn validate(&self) -> Result<()> {
        for (t, g) in self.geometry.iter().enumerate() {
            if !(g.volume > 0.0) {
                return Err(Error::InvalidMesh(format!("tet {t} has non-positive volume")));
            }
        }
        for (t, refs) in self.tet_edges.iter().enumerate() {
            for (&(i, j), r) in LOCAL_EDGES.iter().zip(refs) {
                let e = &self.edges[r.edge];
                let (p, q) = (self.tets[t][i], self.tets[t][j]);
                let ok = if r.sign > 0.0 {
                    (e.a, e.b) == (p, q)
                } else {
                    (e.a, e.b) == (q, p)
                };
                if !ok || e.a >= e.b {
                    return Err(Error::InvalidMesh(format!("tet {t} edge orientation mismatch")));
                }
            }
        }
        for (face, owners) in self.face_owners() {
            if owners.len() > 2 {
                return Err(Error::InvalidMesh(format!("face {face:?} shared by more than two tets")));
            }
            if owners.len() == 2 && owners[0].1 == owners[1].1 {
                return Err(Error::InvalidMesh(format!(
                    "face {face:?} induces equal orientations in both tets"
                )));
            }
        }
        Ok(())
    }

    /// Each face, keyed by sorted vertex triple, with its owning tets and the
    /// parity of the induced orientation.
    pub(crate) fn face_owners(&self) -> HashMap<[usize; 3], Vec<(usize, bool)>> {
        // faces opposite each local vertex, listed with outward orientation
        const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];
        let mut owners: HashMap<[usize; 3], Vec<(usize, bool)>> = HashMap::new();
        for (t, tet) in self.tets.iter().enumerate() {
            for f in FACES {
                let verts = f.map(|i| tet[i]);
                let mut sorted = verts;
                sorted.sort_unstable();
                // parity of the permutation taking `verts` to `sorted`
                let mut v = verts;
                let mut parity = false;
                for i in 0..3 {
                    for j in 0..2 - i {
                        if v[j] > v[j + 1] {
                            v.swap(j, j + 1);
                            parity = !parity;
                        }
                    }
                }
                owners.entry(sorted).or_default().push((t, parity));
            }
        }
        owners
    }
}

/// Kuhn subdivision of an `n³` grid of `box_` into `6 n³` tetrahedra.
pub fn build_uniform_cube_mesh(n_per_axis: usize, box_: Aabb) -> Result<Mesh> {
    if n_per_axis == 0 {
        return Err(Error::InvalidArgument("n_per_axis must be at least 1".into()));
    }
    if !box_.is_valid() {
        return Err(Error::InvalidArgument("box is degenerate or inverted".into()));
    }
    let n = n_per_axis;
    let np = n + 1;
    let ext = box_.extent();
    let step = ext.map(|e| e / n as f64);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                // endpoints land exactly on the box faces
                let coord = |idx: usize, axis: usize| {
                    if idx == n {
                        box_.max[axis]
                    } else {
                        box_.min[axis] + idx as f64 * step[axis]
                    }
                };
                vertices.push([coord(i, 0), coord(j, 1), coord(k, 2)]);
            }
        }
    }
    let index = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    const AXIS_ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut c = [i, j, k];
                    let mut tet = [index(c[0], c[1], c[2]); 4];
                    for (slot, axis) in order.iter().enumerate() {
                        c[*axis] += 1;
                        tet[slot + 1] = index(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    let spacing = step.iter().copied().fold(0.0, f64::max);
    let mut mesh = Mesh::from_parts(vertices, tets, spacing)?;
    mesh.grid = Some(Grid { n, bounds: box_ });
    Ok(mesh)
}

/// Cavity mesh with the ferromagnet restricted to `d_box`.
pub fn restrict_to_ferromagnet(mesh: &Mesh, d_box: Aabb) -> Result<Mesh> {
    mesh.restrict_to_ferromagnet(d_box)
}

/// Largest off-diagonal entry of the scalar P1 stiffness matrix on the
/// ferromagnet submesh; the mesh is weakly acute when it is not positive.
pub fn check_weak_acuteness(mesh: &Mesh) -> WeakAcuteness {
    let k = assemble_p1_stiffness(mesh);
    let mut worst = f64::NEG_INFINITY;
    for (row, col, value) in k.iter() {
        if row != col {
            worst = worst.max(value);
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    WeakAcuteness {
        ok: worst <= WEAK_ACUTENESS_TOL,
        worst_offdiag: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kuhn_edge_count(n: usize) -> usize {
        3 * n * (n + 1) * (n + 1) + 3 * n * n * (n + 1) + n * n * n
    }

    #[test]
    fn single_cube_counts() {
        let mesh = build_uniform_cube_mesh(1, Aabb::unit()).unwrap();
        assert_eq!(mesh.n_tets(), 6);
        assert_eq!(mesh.n_vertices(), 8);
        assert_eq!(mesh.n_edges(), 19);
        assert_eq!(mesh.n_nodes(), 8);
        assert!((mesh.total_volume() - 1.0).abs() < 1e-15);
        assert!((mesh.h() - 3.0_f64.sqrt()).abs() < 1e-15);
        mesh.validate().unwrap();
    }

    #[test]
    fn single_cube_edges_by_kind() {
        let mesh = build_uniform_cube_mesh(1, Aabb::unit()).unwrap();
        let mut by_len = [0usize; 3];
        for e in mesh.edges() {
            let l2 = (e.length * e.length).round() as usize;
            by_len[l2 - 1] += 1;
        }
        // axis edges, face diagonals, body diagonal
        assert_eq!(by_len, [12, 6, 1]);
    }

    #[test]
    fn closed_form_counts() {
        for n in 1..=5 {
            let mesh = build_uniform_cube_mesh(n, Aabb::unit()).unwrap();
            assert_eq!(mesh.n_vertices(), (n + 1).pow(3));
            assert_eq!(mesh.n_tets(), 6 * n.pow(3));
            assert_eq!(mesh.n_edges(), kuhn_edge_count(n));
        }
        let mesh = build_uniform_cube_mesh(8, Aabb::unit()).unwrap();
        assert_eq!(mesh.n_vertices(), 729);
        assert_eq!(mesh.n_tets(), 3072);
    }

    #[test]
    fn tiles_the_box() {
        let b = Aabb::new([-1.0, 0.5, 2.0], [2.0, 1.0, 2.7]);
        let mesh = build_uniform_cube_mesh(3, b).unwrap();
        assert!((mesh.total_volume() - b.volume()).abs() <= 1e-12 * b.volume());
        mesh.validate().unwrap();
    }

    #[test]
    fn interior_faces_shared_twice_with_opposite_orientation() {
        let mesh = build_uniform_cube_mesh(3, Aabb::unit()).unwrap();
        let owners = mesh.face_owners();
        let mut interior = 0;
        for (face, o) in &owners {
            let on_boundary = (0..3).any(|axis| {
                let c: Vec<f64> = face.iter().map(|&v| mesh.vertices()[v][axis]).collect();
                c.iter().all(|&x| x == 0.0) || c.iter().all(|&x| x == 1.0)
            });
            if on_boundary {
                assert_eq!(o.len(), 1);
            } else {
                assert_eq!(o.len(), 2);
                assert_ne!(o[0].1, o[1].1);
                interior += 1;
            }
        }
        // 4 faces per tet, boundary faces: 6 sides * n^2 squares * 2 triangles
        assert_eq!(2 * interior + 6 * 9 * 2, 4 * mesh.n_tets());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_uniform_cube_mesh(0, Aabb::unit()).is_err());
        assert!(build_uniform_cube_mesh(2, Aabb::new([1.0; 3], [0.0; 3])).is_err());
        assert!(build_uniform_cube_mesh(2, Aabb::new([0.0; 3], [1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn restriction_full_box() {
        let mesh = build_uniform_cube_mesh(8, Aabb::unit()).unwrap();
        let d = mesh.restrict_to_ferromagnet(Aabb::unit()).unwrap();
        assert_eq!(d.ferro_tets().count(), 3072);
        assert_eq!(d.n_nodes(), 729);
        let one = build_uniform_cube_mesh(1, Aabb::unit())
            .unwrap()
            .restrict_to_ferromagnet(Aabb::unit())
            .unwrap();
        assert_eq!((one.n_nodes(), one.n_edges()), (8, 19));
    }

    #[test]
    fn restriction_lower_half() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        let d = mesh
            .restrict_to_ferromagnet(Aabb::new([0.0; 3], [1.0, 1.0, 0.5]))
            .unwrap();
        assert_eq!(d.ferro_tets().count(), 24);
        assert_eq!(d.n_nodes(), 18);
        assert_eq!(d.n_edges(), mesh.n_edges());
        assert!((d.ferro_volume() - 0.5).abs() < 1e-15);
        for t in d.ferro_tets() {
            for v in d.tet_points(t) {
                assert!(v[2] <= 0.5);
            }
        }
    }

    #[test]
    fn restriction_rejects_misaligned_box() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        assert!(mesh
            .restrict_to_ferromagnet(Aabb::new([0.0; 3], [1.0, 1.0, 0.4]))
            .is_err());
        assert!(mesh
            .restrict_to_ferromagnet(Aabb::new([0.0; 3], [1.0, 1.0, 1.5]))
            .is_err());
    }

    #[test]
    fn kuhn_meshes_are_weakly_acute() {
        for n in [1, 2, 4] {
            let mesh = build_uniform_cube_mesh(n, Aabb::unit()).unwrap();
            let report = check_weak_acuteness(&mesh);
            assert!(report.ok, "n = {n}: {report:?}");
        }
        let stretched = build_uniform_cube_mesh(2, Aabb::new([0.0; 3], [3.0, 1.0, 0.2])).unwrap();
        assert!(check_weak_acuteness(&stretched).ok);
    }

    #[test]
    fn regular_tetrahedron_is_weakly_acute() {
        let s = 1.0 / 2.0_f64.sqrt();
        let vertices = vec![[1.0, 0.0, -s], [-1.0, 0.0, -s], [0.0, 1.0, s], [0.0, -1.0, s]];
        let mesh = Mesh::from_parts(vertices, vec![[0, 1, 2, 3]], 2.0).unwrap();
        let report = check_weak_acuteness(&mesh);
        assert!(report.ok);
        assert!(report.worst_offdiag < 0.0);
    }

    #[test]
    fn obtuse_tetrahedron_is_flagged() {
        // flat "sliver" with a dihedral angle well above pi/2
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.5, 0.4, 0.05]];
        let mesh = Mesh::from_parts(vertices, vec![[0, 1, 2, 3]], 1.0).unwrap();
        assert!(!check_weak_acuteness(&mesh).ok);
    }

    #[test]
    fn negative_orientation_is_repaired() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mesh = Mesh::from_parts(vertices, vec![[0, 2, 1, 3]], 1.0).unwrap();
        assert!(mesh.geometry(0).volume > 0.0);
        mesh.validate().unwrap();
    }
}
