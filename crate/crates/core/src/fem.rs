//! Discrete fields: P1 nodal vectors on the ferromagnet and lowest-order
//! Nédélec (Whitney) edge fields on the cavity.

use std::ops::Index;

use crate::mesh::{Mesh, LOCAL_EDGES};
use crate::quadrature::GAUSS2_UNIT;
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Nodal norms outside `1 ± NODAL_NORM_TOL` are rejected by [`tangent_frame`].
pub const NODAL_NORM_TOL: f64 = 1e-6;

/// A normalization denominator below this means `v` was not tangent to `m`.
pub const MIN_DENOMINATOR: f64 = 0.5;

/// Barycentric points outside the element by more than this are rejected.
const INSIDE_TOL: f64 = 1e-10;

/// Continuous piecewise-linear vector field on the ferromagnet, one value
/// per submesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<Vec3>,
}

impl NodalField {
    pub fn new(values: Vec<Vec3>) -> Self {
        NodalField { values }
    }

    pub fn zeros(n: usize) -> Self {
        NodalField::new(vec![[0.0; 3]; n])
    }

    pub fn constant(n: usize, value: Vec3) -> Self {
        NodalField::new(vec![value; n])
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `||u(x_n)| - 1|` over the nodes.
    pub fn max_unit_deviation(&self) -> f64 {
        self.values
            .iter()
            .map(|&u| (vec3::norm(u) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Value at barycentric coordinates inside submesh element `nodes`.
    pub fn eval(&self, nodes: [usize; 4], bary: [f64; 4]) -> Vec3 {
        (0..4).fold([0.0; 3], |acc, i| vec3::axpy(acc, bary[i], self.values[nodes[i]]))
    }

    pub fn check_len(&self, mesh: &Mesh) -> Result<()> {
        if self.len() != mesh.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "nodal field has {} values, mesh has {} ferromagnet vertices",
                self.len(),
                mesh.n_nodes()
            )));
        }
        Ok(())
    }
}

impl Index<usize> for NodalField {
    type Output = Vec3;

    fn index(&self, n: usize) -> &Vec3 {
        &self.values[n]
    }
}

/// Lowest-order Nédélec field; one circulation per oriented cavity edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    coeffs: Vec<f64>,
}

impl EdgeField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        EdgeField { coeffs }
    }

    pub fn zeros(m: usize) -> Self {
        EdgeField::new(vec![0.0; m])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn check_len(&self, mesh: &Mesh) -> Result<()> {
        if self.len() != mesh.n_edges() {
            return Err(Error::InvalidArgument(format!(
                "edge field has {} coefficients, mesh has {} edges",
                self.len(),
                mesh.n_edges()
            )));
        }
        Ok(())
    }
}

/// Per-node orthonormal basis of the plane orthogonal to a magnetization.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub t1: Vec<Vec3>,
    pub t2: Vec<Vec3>,
}

impl TangentFrame {
    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.is_empty()
    }

    /// Frame vector `i ∈ {0, 1}` at node `n`.
    #[inline]
    pub fn vector(&self, n: usize, i: usize) -> Vec3 {
        if i == 0 {
            self.t1[n]
        } else {
            self.t2[n]
        }
    }

    /// Nodal field `Σ α[2n+i] t_i(x_n)`.
    pub fn expand(&self, alpha: &[f64]) -> NodalField {
        assert_eq!(alpha.len(), 2 * self.len());
        NodalField::new(
            (0..self.len())
                .map(|n| vec3::add(vec3::scale(alpha[2 * n], self.t1[n]), vec3::scale(alpha[2 * n + 1], self.t2[n])))
                .collect(),
        )
    }
}

/// Nodal interpolant: the field's values at the ferromagnet vertices.
pub fn interpolate_nodal(f: impl Fn(Vec3) -> Vec3, mesh: &Mesh) -> NodalField {
    NodalField::new(mesh.ferro_vertices().iter().map(|&v| f(mesh.vertices()[v])).collect())
}

/// Edge interpolant: the circulation `∫_e f·τ ds` of each cavity edge,
/// with two-point Gauss quadrature.
pub fn interpolate_edge(f: impl Fn(Vec3) -> Vec3, mesh: &Mesh) -> EdgeField {
    EdgeField::new(
        mesh.edges()
            .iter()
            .map(|e| {
                let xa = mesh.vertices()[e.a];
                let xb = mesh.vertices()[e.b];
                let d = vec3::sub(xb, xa);
                GAUSS2_UNIT
                    .iter()
                    .map(|&(s, w)| w * vec3::dot(f(vec3::axpy(xa, s, d)), d))
                    .sum()
            })
            .collect(),
    )
}

/// Whitney function of local edge `le` of a tetrahedron, oriented by
/// `sign`, at barycentric point `bary`: `λa∇λb − λb∇λa`.
#[inline]
pub fn whitney(grads: &[Vec3; 4], bary: [f64; 4], le: usize, sign: f64) -> Vec3 {
    let (a, b) = LOCAL_EDGES[le];
    vec3::scale(
        sign,
        vec3::sub(vec3::scale(bary[a], grads[b]), vec3::scale(bary[b], grads[a])),
    )
}

/// Curl of the Whitney function of local edge `le`: `2 ∇λa × ∇λb`.
#[inline]
pub fn whitney_curl(grads: &[Vec3; 4], le: usize, sign: f64) -> Vec3 {
    let (a, b) = LOCAL_EDGES[le];
    vec3::scale(2.0 * sign, vec3::cross(grads[a], grads[b]))
}

/// Barycentric coordinates of `x` with respect to tetrahedron `tet`.
pub fn barycentric(mesh: &Mesh, tet: usize, x: Vec3) -> [f64; 4] {
    let g = mesh.geometry(tet);
    let x0 = mesh.vertices()[mesh.tets()[tet][0]];
    let d = vec3::sub(x, x0);
    let l1 = vec3::dot(g.grads[1], d);
    let l2 = vec3::dot(g.grads[2], d);
    let l3 = vec3::dot(g.grads[3], d);
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

/// Reconstruction of `u` inside `tet` at barycentric point `bary`.
pub fn edge_field_at(u: &EdgeField, mesh: &Mesh, tet: usize, bary: [f64; 4]) -> Vec3 {
    let grads = &mesh.geometry(tet).grads;
    mesh.tet_edges(tet)
        .iter()
        .enumerate()
        .fold([0.0; 3], |acc, (le, r)| {
            vec3::axpy(acc, u.coeffs[r.edge], whitney(grads, bary, le, r.sign))
        })
}

/// Curl of `u` restricted to `tet` (constant per element).
pub fn edge_field_curl(u: &EdgeField, mesh: &Mesh, tet: usize) -> Vec3 {
    let grads = &mesh.geometry(tet).grads;
    mesh.tet_edges(tet)
        .iter()
        .enumerate()
        .fold([0.0; 3], |acc, (le, r)| {
            vec3::axpy(acc, u.coeffs[r.edge], whitney_curl(grads, le, r.sign))
        })
}

/// Evaluates the edge field at a point of the given tetrahedron.
pub fn evaluate_edge_field(u: &EdgeField, point: Vec3, tet: usize, mesh: &Mesh) -> Result<Vec3> {
    if tet >= mesh.n_tets() {
        return Err(Error::InvalidArgument(format!("tet {tet} out of range")));
    }
    let bary = barycentric(mesh, tet, point);
    if bary.iter().any(|&l| l < -INSIDE_TOL) {
        return Err(Error::InvalidArgument(format!("point {point:?} lies outside tet {tet}")));
    }
    Ok(edge_field_at(u, mesh, tet, bary))
}

/// Edge circulations of the piecewise reconstruction of `u`, integrated
/// inside the first tetrahedron containing each edge.
pub fn reintegrate_edge_field(u: &EdgeField, mesh: &Mesh) -> EdgeField {
    let mut out = vec![f64::NAN; mesh.n_edges()];
    for tet in 0..mesh.n_tets() {
        for (le, r) in mesh.tet_edges(tet).iter().enumerate() {
            if out[r.edge].is_nan() {
                out[r.edge] = circulation_in_tet(u, mesh, tet, le);
            }
        }
    }
    EdgeField::new(out)
}

/// Circulation of the reconstruction of `u` within `tet` along its local
/// edge `le`, in the global orientation of that edge.
pub fn circulation_in_tet(u: &EdgeField, mesh: &Mesh, tet: usize, le: usize) -> f64 {
    let r = mesh.tet_edges(tet)[le];
    let e = mesh.edges()[r.edge];
    let d = vec3::sub(mesh.vertices()[e.b], mesh.vertices()[e.a]);
    let (la, lb) = LOCAL_EDGES[le];
    // global orientation a -> b corresponds to local (la -> lb) when sign > 0
    let (start, end) = if r.sign > 0.0 { (la, lb) } else { (lb, la) };
    GAUSS2_UNIT
        .iter()
        .map(|&(s, w)| {
            let mut bary = [0.0; 4];
            bary[start] = 1.0 - s;
            bary[end] = s;
            w * vec3::dot(edge_field_at(u, mesh, tet, bary), d)
        })
        .sum()
}

/// Deterministic tangent frame: `t1` is the projection of the coordinate
/// axis along the smallest `|m|` component (lowest index on ties), `t2 = m × t1`.
pub fn tangent_frame(m: &NodalField) -> Result<TangentFrame> {
    let mut t1 = Vec::with_capacity(m.len());
    let mut t2 = Vec::with_capacity(m.len());
    for (n, &mn) in m.values().iter().enumerate() {
        let len = vec3::norm(mn);
        if !((len - 1.0).abs() <= NODAL_NORM_TOL) {
            return Err(Error::InvalidArgument(format!(
                "tangent frame needs unit magnetization, |m(x_{n})| = {len}"
            )));
        }
        let mut axis = 0;
        for i in 1..3 {
            if mn[i].abs() < mn[axis].abs() {
                axis = i;
            }
        }
        let mut a = [0.0; 3];
        a[axis] = 1.0;
        let p = vec3::axpy(a, -vec3::dot(a, mn), mn);
        let u = vec3::scale(1.0 / vec3::norm(p), p);
        let w = vec3::cross(mn, u);
        // m may carry roundoff in its length; renormalize the second vector
        t1.push(u);
        t2.push(vec3::scale(1.0 / vec3::norm(w), w));
    }
    Ok(TangentFrame { t1, t2 })
}

/// Denominators `|m(x_n) + k v(x_n)|` of the nodal normalization.
pub fn normalization_denominators(m: &NodalField, v: &NodalField, k: f64) -> Vec<f64> {
    m.values()
        .iter()
        .zip(v.values())
        .map(|(&mn, &vn)| vec3::norm(vec3::axpy(mn, k, vn)))
        .collect()
}

/// Nodal normalization `(m + k v) / |m + k v|` at every vertex.
pub fn project_normalize(m: &NodalField, v: &NodalField, k: f64) -> Result<NodalField> {
    if m.len() != v.len() {
        return Err(Error::InvalidArgument("m and v differ in length".into()));
    }
    let mut out = Vec::with_capacity(m.len());
    for (n, (&mn, &vn)) in m.values().iter().zip(v.values()).enumerate() {
        let w = vec3::axpy(mn, k, vn);
        let den = vec3::norm(w);
        if !(den >= MIN_DENOMINATOR) {
            return Err(Error::InvalidArgument(format!(
                "normalization denominator {den} at node {n}: velocity not tangent to magnetization"
            )));
        }
        out.push(vec3::scale(1.0 / den, w));
    }
    Ok(NodalField::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_cube_mesh, Aabb};
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() <= tol)
    }

    #[test]
    fn nodal_interpolation_of_constant() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        let f = interpolate_nodal(|_| [0.0, 0.0, 1.0], &mesh);
        assert_eq!(f.len(), 27);
        assert!(f.values().iter().all(|&v| v == [0.0, 0.0, 1.0]));
    }

    #[test]
    fn edge_interpolation_of_constant_on_axis_edges() {
        let mesh = build_uniform_cube_mesh(4, Aabb::unit()).unwrap();
        let u = interpolate_edge(|_| [0.0, 0.0, 1.0], &mesh);
        for (e, &c) in mesh.edges().iter().zip(u.coeffs()) {
            let t = e.tangent;
            if t == [0.0, 0.0, 1.0] {
                assert!((c - 0.25).abs() < 1e-15);
            }
            if t == [1.0, 0.0, 0.0] {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn edge_interpolation_of_rotation_on_body_diagonal() {
        let mesh = build_uniform_cube_mesh(1, Aabb::unit()).unwrap();
        let u = interpolate_edge(|x| [-x[1] / 2.0, x[0] / 2.0, 0.0], &mesh);
        let diag = mesh
            .edges()
            .iter()
            .position(|e| (e.length - 3.0_f64.sqrt()).abs() < 1e-14)
            .unwrap();
        assert!(u.coeffs()[diag].abs() < 1e-16);
    }

    #[test]
    fn whitney_basis_is_dual_to_edges() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        for q in [0, 7, mesh.n_edges() - 1] {
            let mut coeffs = vec![0.0; mesh.n_edges()];
            coeffs[q] = 1.0;
            let back = reintegrate_edge_field(&EdgeField::new(coeffs.clone()), &mesh);
            for (a, b) in back.coeffs().iter().zip(&coeffs) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn edge_field_reproduces_constants() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        let c = [0.3, -1.2, 2.5];
        let u = interpolate_edge(|_| c, &mesh);
        for tet in 0..mesh.n_tets() {
            let x = mesh.centroid(tet);
            let val = evaluate_edge_field(&u, x, tet, &mesh).unwrap();
            assert!(close(val, c, 1e-13), "{val:?}");
            assert!(vec3::norm(edge_field_curl(&u, &mesh, tet)) < 1e-12);
        }
        let zero = EdgeField::zeros(mesh.n_edges());
        assert_eq!(evaluate_edge_field(&zero, mesh.centroid(3), 3, &mesh).unwrap(), [0.0; 3]);
    }

    #[test]
    fn linear_field_matches_circulations_not_values() {
        let mesh = build_uniform_cube_mesh(2, Aabb::unit()).unwrap();
        let f = |x: Vec3| [x[1], 0.0, 0.0];
        let u = interpolate_edge(f, &mesh);
        // oracle: closed-form circulation of (y, 0, 0) along a straight edge
        for (e, &c) in mesh.edges().iter().zip(u.coeffs()) {
            let xa = mesh.vertices()[e.a];
            let xb = mesh.vertices()[e.b];
            let exact = 0.5 * (xa[1] + xb[1]) * (xb[0] - xa[0]);
            assert!((c - exact).abs() < 1e-15);
        }
        let back = reintegrate_edge_field(&u, &mesh);
        for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        // (y,0,0) has curl (0,0,-1), which the lowest-order space cannot match
        // pointwise everywhere
        let worst = (0..mesh.n_tets())
            .map(|t| {
                let x = mesh.centroid(t);
                vec3::norm(vec3::sub(evaluate_edge_field(&u, x, t, &mesh).unwrap(), f(x)))
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn evaluation_outside_tet_is_rejected() {
        let mesh = build_uniform_cube_mesh(1, Aabb::unit()).unwrap();
        let u = EdgeField::zeros(mesh.n_edges());
        assert!(evaluate_edge_field(&u, [2.0, 2.0, 2.0], 0, &mesh).is_err());
        assert!(evaluate_edge_field(&u, [0.5; 3], 99, &mesh).is_err());
    }

    #[test]
    fn frame_axis_cases() {
        let f = tangent_frame(&NodalField::new(vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])).unwrap();
        assert_eq!(f.t1[0], [1.0, 0.0, 0.0]);
        assert_eq!(f.t2[0], [0.0, 1.0, 0.0]);
        assert_eq!(f.t1[1], [0.0, 1.0, 0.0]);
        assert_eq!(f.t2[1], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn frame_rejects_non_unit() {
        assert!(tangent_frame(&NodalField::new(vec![[0.0, 0.0, 1.1]])).is_err());
        assert!(tangent_frame(&NodalField::new(vec![[0.0; 3]])).is_err());
    }

    #[test]
    fn normalization_examples() {
        let m = NodalField::new(vec![[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        let v = NodalField::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        let ks = [7.0, 1.0, 0.5];
        let s = 0.5_f64.sqrt();
        let expected = [[0.0, 0.0, 1.0], [s, 0.0, s], [s, s, 0.0]];
        for i in 0..3 {
            let out = project_normalize(
                &NodalField::new(vec![m[i]]),
                &NodalField::new(vec![v[i]]),
                ks[i],
            )
            .unwrap();
            assert!(close(out[0], expected[i], 1e-15), "{:?}", out[0]);
        }
    }

    #[test]
    fn normalization_rejects_collapsed_denominator() {
        let m = NodalField::new(vec![[0.0, 0.0, 1.0]]);
        let v = NodalField::new(vec![[0.0, 0.0, -1.0]]);
        assert!(project_normalize(&m, &v, 0.9).is_err());
    }

    fn unit(v: Vec3) -> Vec3 {
        vec3::scale(1.0 / vec3::norm(v), v)
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-1.0f64..1.0)
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_and_tangent(raw in arb_vec()) {
            prop_assume!(vec3::norm(raw) > 1e-3);
            let m = unit(raw);
            let f = tangent_frame(&NodalField::new(vec![m])).unwrap();
            let (t1, t2) = (f.t1[0], f.t2[0]);
            prop_assert!((vec3::norm(t1) - 1.0).abs() < 1e-12);
            prop_assert!((vec3::norm(t2) - 1.0).abs() < 1e-12);
            prop_assert!(vec3::dot(t1, t2).abs() < 1e-12);
            prop_assert!(vec3::dot(t1, m).abs() < 1e-12);
            prop_assert!(vec3::dot(t2, m).abs() < 1e-12);
        }

        #[test]
        fn normalization_rate_bound(raw in arb_vec(), a in -50.0f64..50.0, b in -50.0f64..50.0, k in 1e-4f64..1.0) {
            prop_assume!(vec3::norm(raw) > 1e-3);
            let m = NodalField::new(vec![unit(raw)]);
            let frame = tangent_frame(&m).unwrap();
            let v = frame.expand(&[a, b]);
            let den = normalization_denominators(&m, &v, k)[0];
            prop_assert!(den >= 1.0 - 1e-12);
            let out = project_normalize(&m, &v, k).unwrap();
            prop_assert!((vec3::norm(out[0]) - 1.0).abs() < 1e-14);
            let rate = vec3::norm(vec3::sub(out[0], m[0])) / k;
            prop_assert!(rate <= vec3::norm(v[0]) + 1e-12);
        }

        #[test]
        fn edge_round_trip(coeffs in prop::collection::vec(-10.0f64..10.0, 19)) {
            let mesh = build_uniform_cube_mesh(1, Aabb::unit()).unwrap();
            let u = EdgeField::new(coeffs);
            let back = reintegrate_edge_field(&u, &mesh);
            for (a, b) in back.coeffs().iter().zip(u.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
