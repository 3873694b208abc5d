//! Global matrices of the coupled step and the per-step linear system.
//!
//! Unknowns are ordered `[α | η]`: two tangent coordinates per ferromagnet
//! vertex (`α[2n+i]` multiplies `t_i(x_n) φ_n`), then one circulation per
//! cavity edge. The step matrix has the block form
//!
//! ```text
//! | λ₂ Mt + kθμ Kt − λ₁ C(m)    −(μ/2) B              |
//! | μ₀ Bᵀ                      (μ₀/k) Me + (σ/2) Kcc |
//! ```

use std::sync::Arc;

use crate::fem::{whitney, whitney_curl, EdgeField, NodalField, TangentFrame};
use crate::mesh::{Mesh, TetGeometry};
use crate::quadrature::TetRule;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::timestepper::SchemeParams;
use crate::vec3::{self, Vec3};
use crate::Result;

/// Element matrices on a single tetrahedron.
pub mod element {
    use super::*;

    /// Consistent P1 mass: `V/10` on the diagonal, `V/20` off it.
    pub fn p1_mass(g: &TetGeometry) -> [[f64; 4]; 4] {
        let mut out = [[g.volume / 20.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            row[i] = g.volume / 10.0;
        }
        out
    }

    pub fn p1_stiffness(g: &TetGeometry) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = g.volume * vec3::dot(g.grads[i], g.grads[j]);
            }
        }
        out
    }

    /// `∫ λa λb (m × t_{b,j})·t_{a,i}` with `m = Σ λc m_c`; rows and columns
    /// indexed `2a+i`, `2b+j`.
    pub fn cross_term(g: &TetGeometry, m: &[Vec3; 4], t: &[[Vec3; 2]; 4], rule: &TetRule) -> [[f64; 8]; 8] {
        let mut out = [[0.0; 8]; 8];
        for qp in &rule.points {
            let l = qp.bary;
            let mq = (0..4).fold([0.0; 3], |acc, c| vec3::axpy(acc, l[c], m[c]));
            let w = qp.weight * g.volume;
            for b in 0..4 {
                for j in 0..2 {
                    let mt = vec3::cross(mq, t[b][j]);
                    for a in 0..4 {
                        let s = w * l[a] * l[b];
                        for i in 0..2 {
                            out[2 * a + i][2 * b + j] += s * vec3::dot(mt, t[a][i]);
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫ ψ_e · t_{a,i} λa`; rows `2a+i`, columns local edges.
    pub fn coupling(g: &TetGeometry, signs: &[f64; 6], t: &[[Vec3; 2]; 4], rule: &TetRule) -> [[f64; 6]; 8] {
        let mut out = [[0.0; 6]; 8];
        for qp in &rule.points {
            let w = qp.weight * g.volume;
            let psi: [Vec3; 6] = std::array::from_fn(|e| whitney(&g.grads, qp.bary, e, signs[e]));
            for a in 0..4 {
                for i in 0..2 {
                    for e in 0..6 {
                        out[2 * a + i][e] += w * qp.bary[a] * vec3::dot(psi[e], t[a][i]);
                    }
                }
            }
        }
        out
    }

    pub fn edge_mass(g: &TetGeometry, signs: &[f64; 6], rule: &TetRule) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for qp in &rule.points {
            let w = qp.weight * g.volume;
            let psi: [Vec3; 6] = std::array::from_fn(|e| whitney(&g.grads, qp.bary, e, signs[e]));
            for e in 0..6 {
                for f in 0..6 {
                    out[e][f] += w * vec3::dot(psi[e], psi[f]);
                }
            }
        }
        out
    }

    pub fn curlcurl(g: &TetGeometry, signs: &[f64; 6]) -> [[f64; 6]; 6] {
        let curls: [Vec3; 6] = std::array::from_fn(|e| whitney_curl(&g.grads, e, signs[e]));
        let mut out = [[0.0; 6]; 6];
        for e in 0..6 {
            for f in 0..6 {
                out[e][f] = g.volume * vec3::dot(curls[e], curls[f]);
            }
        }
        out
    }
}

fn signs_of(mesh: &Mesh, tet: usize) -> [f64; 6] {
    mesh.tet_edges(tet).map(|r| r.sign)
}

fn edges_of(mesh: &Mesh, tet: usize) -> [usize; 6] {
    mesh.tet_edges(tet).map(|r| r.edge)
}

fn local_frame(frame: &TangentFrame, nodes: &[usize; 4]) -> [[Vec3; 2]; 4] {
    nodes.map(|n| [frame.t1[n], frame.t2[n]])
}

fn assemble_scalar(mesh: &Mesh, local: impl Fn(&TetGeometry) -> [[f64; 4]; 4]) -> CsrMatrix {
    let n = mesh.n_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 16 * mesh.n_tets());
    for t in mesh.ferro_tets() {
        let nodes = mesh.ferro_tet(t);
        let k = local(mesh.geometry(t));
        for i in 0..4 {
            for j in 0..4 {
                b.push(nodes[i], nodes[j], k[i][j]);
            }
        }
    }
    b.build()
}

/// Scalar P1 mass matrix on the ferromagnet (`N × N`).
pub fn assemble_p1_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_scalar(mesh, element::p1_mass)
}

/// Scalar P1 stiffness matrix on the ferromagnet (`N × N`).
pub fn assemble_p1_stiffness(mesh: &Mesh) -> CsrMatrix {
    assemble_scalar(mesh, element::p1_stiffness)
}

/// Cross-term matrix `C(m)` in tangent coordinates (`2N × 2N`), skew-symmetric.
pub fn assemble_cross_term(mesh: &Mesh, m: &NodalField, frame: &TangentFrame) -> CsrMatrix {
    assemble_cross_term_with(mesh, m, frame, &TetRule::degree3())
}

pub fn assemble_cross_term_with(mesh: &Mesh, m: &NodalField, frame: &TangentFrame, rule: &TetRule) -> CsrMatrix {
    let n = 2 * mesh.n_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, 64 * mesh.n_tets());
    for t in mesh.ferro_tets() {
        let nodes = mesh.ferro_tet(t);
        let local = element::cross_term(
            mesh.geometry(t),
            &nodes.map(|v| m[v]),
            &local_frame(frame, &nodes),
            rule,
        );
        for a in 0..4 {
            for i in 0..2 {
                for c in 0..4 {
                    for j in 0..2 {
                        b.push(2 * nodes[a] + i, 2 * nodes[c] + j, local[2 * a + i][2 * c + j]);
                    }
                }
            }
        }
    }
    b.build()
}

/// Nédélec mass matrix on the cavity (`M × M`).
pub fn assemble_edge_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_edge_mass_with(mesh, &TetRule::degree2())
}

pub fn assemble_edge_mass_with(mesh: &Mesh, rule: &TetRule) -> CsrMatrix {
    assemble_edge_matrix(mesh, |t| element::edge_mass(mesh.geometry(t), &signs_of(mesh, t), rule))
}

/// Nédélec curl-curl matrix on the cavity (`M × M`).
pub fn assemble_curlcurl(mesh: &Mesh) -> CsrMatrix {
    assemble_edge_matrix(mesh, |t| element::curlcurl(mesh.geometry(t), &signs_of(mesh, t)))
}

fn assemble_edge_matrix(mesh: &Mesh, local: impl Fn(usize) -> [[f64; 6]; 6]) -> CsrMatrix {
    let m = mesh.n_edges();
    let mut b = TripletBuilder::with_capacity(m, m, 36 * mesh.n_tets());
    for t in 0..mesh.n_tets() {
        let edges = edges_of(mesh, t);
        let k = local(t);
        for e in 0..6 {
            for f in 0..6 {
                b.push(edges[e], edges[f], k[e][f]);
            }
        }
    }
    b.build()
}

/// Coupling `B[(n,i), q] = ∫_D ψ_q · t_{n,i} φ_n` (`2N × M`).
pub fn assemble_coupling(mesh: &Mesh, frame: &TangentFrame) -> CsrMatrix {
    assemble_coupling_with(mesh, frame, &TetRule::degree2())
}

pub fn assemble_coupling_with(mesh: &Mesh, frame: &TangentFrame, rule: &TetRule) -> CsrMatrix {
    let mut b = TripletBuilder::with_capacity(2 * mesh.n_nodes(), mesh.n_edges(), 48 * mesh.n_tets());
    for t in mesh.ferro_tets() {
        let nodes = mesh.ferro_tet(t);
        let edges = edges_of(mesh, t);
        let local = element::coupling(mesh.geometry(t), &signs_of(mesh, t), &local_frame(frame, &nodes), rule);
        for a in 0..4 {
            for i in 0..2 {
                for e in 0..6 {
                    b.push(2 * nodes[a] + i, edges[e], local[2 * a + i][e]);
                }
            }
        }
    }
    b.build()
}

/// Lifts a scalar nodal matrix `S` to tangent coordinates:
/// `S_t[(n,i),(p,j)] = S[n,p] t_{n,i}·t_{p,j}`.
pub fn tangent_block(scalar: &CsrMatrix, frame: &TangentFrame) -> CsrMatrix {
    let n = scalar.nrows();
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 4 * scalar.nnz());
    for (r, c, v) in scalar.iter() {
        for i in 0..2 {
            for j in 0..2 {
                b.push(2 * r + i, 2 * c + j, v * vec3::dot(frame.vector(r, i), frame.vector(c, j)));
            }
        }
    }
    b.build()
}

/// `⟨∇m, ∇(t_{n,i} φ_n)⟩_D` for every test function.
pub fn gradient_load(stiffness: &CsrMatrix, m: &NodalField, frame: &TangentFrame) -> Vec<f64> {
    let mut out = vec![0.0; 2 * m.len()];
    for r in 0..stiffness.nrows() {
        let (cols, vals) = stiffness.row(r);
        let km = cols
            .iter()
            .zip(vals)
            .fold([0.0; 3], |acc, (&c, &v)| vec3::axpy(acc, v, m[c]));
        out[2 * r] = vec3::dot(km, frame.t1[r]);
        out[2 * r + 1] = vec3::dot(km, frame.t2[r]);
    }
    out
}

/// Step-independent matrices of a mesh together with the sparsity pattern
/// of the coupled step matrix.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<Mesh>,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub edge_mass: CsrMatrix,
    pub curlcurl: CsrMatrix,
    pattern: CsrMatrix,
    rule2: TetRule,
    rule3: TetRule,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let mass = assemble_p1_mass(&mesh);
        let stiffness = assemble_p1_stiffness(&mesh);
        let edge_mass = assemble_edge_mass(&mesh);
        let curlcurl = assemble_curlcurl(&mesh);
        let pattern = system_pattern(&mesh, &mass, &edge_mass);
        Discretization {
            mesh,
            mass,
            stiffness,
            edge_mass,
            curlcurl,
            pattern,
            rule2: TetRule::degree2(),
            rule3: TetRule::degree3(),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Size `2N + M` of the step system.
    pub fn system_dim(&self) -> usize {
        2 * self.mesh.n_nodes() + self.mesh.n_edges()
    }
}

fn system_pattern(mesh: &Mesh, mass: &CsrMatrix, edge_mass: &CsrMatrix) -> CsrMatrix {
    let off = 2 * mesh.n_nodes();
    let dim = off + mesh.n_edges();
    let mut b = TripletBuilder::with_capacity(dim, dim, 4 * mass.nnz() + edge_mass.nnz() + 96 * mesh.n_tets());
    for (r, c, _) in mass.iter() {
        for i in 0..2 {
            for j in 0..2 {
                b.push(2 * r + i, 2 * c + j, 0.0);
            }
        }
    }
    for (r, c, _) in edge_mass.iter() {
        b.push(off + r, off + c, 0.0);
    }
    for t in mesh.ferro_tets() {
        let nodes = mesh.ferro_tet(t);
        for e in edges_of(mesh, t) {
            for n in nodes {
                for i in 0..2 {
                    b.push(2 * n + i, off + e, 0.0);
                    b.push(off + e, 2 * n + i, 0.0);
                }
            }
        }
    }
    b.build()
}

/// Matrix and right-hand side of one coupled step.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub n_nodes: usize,
    pub n_edges: usize,
}

impl StepSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Splits a solution vector into tangent coordinates and edge circulations.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(2 * self.n_nodes)
    }
}

/// Assembles the coupled system for `(α, η⁽ʲ⁺¹⁾)` given the current
/// magnetization, previous edge field and tangent frame.
pub fn build_step_system(
    disc: &Discretization,
    m: &NodalField,
    eta_prev: &EdgeField,
    frame: &TangentFrame,
    params: &SchemeParams,
) -> Result<StepSystem> {
    params.validate()?;
    let mesh = disc.mesh();
    m.check_len(mesh)?;
    eta_prev.check_len(mesh)?;
    let n_nodes = mesh.n_nodes();
    let off = 2 * n_nodes;
    let mu = params.mu();
    let k = params.k;

    let mut a = disc.pattern.clone();
    let mut rhs = vec![0.0; disc.system_dim()];

    // λ₂ Mt + kθμ Kt
    let c_mass = params.lambda2;
    let c_stiff = k * params.theta * mu;
    for (scalar, coef) in [(&disc.mass, c_mass), (&disc.stiffness, c_stiff)] {
        if coef == 0.0 {
            continue;
        }
        for (r, c, v) in scalar.iter() {
            for i in 0..2 {
                for j in 0..2 {
                    let tt = vec3::dot(frame.vector(r, i), frame.vector(c, j));
                    a.add_to(2 * r + i, 2 * c + j, coef * v * tt);
                }
            }
        }
    }

    // −λ₁ C(m), −(μ/2) B, μ₀ Bᵀ and the (μ/2) B η⁽ʲ⁾ load
    let eta = eta_prev.coeffs();
    for t in mesh.ferro_tets() {
        let nodes = mesh.ferro_tet(t);
        let edges = edges_of(mesh, t);
        let g = mesh.geometry(t);
        let tl = local_frame(frame, &nodes);
        if params.lambda1 != 0.0 {
            let cross = element::cross_term(g, &nodes.map(|v| m[v]), &tl, &disc.rule3);
            for p in 0..8 {
                for q in 0..8 {
                    a.add_to(2 * nodes[p / 2] + p % 2, 2 * nodes[q / 2] + q % 2, -params.lambda1 * cross[p][q]);
                }
            }
        }
        let bl = element::coupling(g, &signs_of(mesh, t), &tl, &disc.rule2);
        for p in 0..8 {
            let row = 2 * nodes[p / 2] + p % 2;
            for e in 0..6 {
                a.add_to(row, off + edges[e], -0.5 * mu * bl[p][e]);
                a.add_to(off + edges[e], row, params.mu0 * bl[p][e]);
                rhs[row] += 0.5 * mu * bl[p][e] * eta[edges[e]];
            }
        }
    }

    // (μ₀/k) Me + (σ/2) Kcc
    for (r, c, v) in disc.edge_mass.iter() {
        a.add_to(off + r, off + c, params.mu0 / k * v);
    }
    if params.sigma != 0.0 {
        for (r, c, v) in disc.curlcurl.iter() {
            a.add_to(off + r, off + c, 0.5 * params.sigma * v);
        }
    }

    let load = gradient_load(&disc.stiffness, m, frame);
    for (r, l) in rhs[..off].iter_mut().zip(&load) {
        *r -= mu * l;
    }
    let me_eta = disc.edge_mass.mul_vec(eta);
    let kcc_eta = disc.curlcurl.mul_vec(eta);
    for q in 0..mesh.n_edges() {
        rhs[off + q] = params.mu0 / k * me_eta[q] - 0.5 * params.sigma * kcc_eta[q];
    }

    Ok(StepSystem {
        matrix: a,
        rhs,
        n_nodes,
        n_edges: mesh.n_edges(),
    })
}
