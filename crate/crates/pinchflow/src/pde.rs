//! Desk-scale parametric mean curvature flow on periodic structured meshes
//! immersed in a unit sphere `S^{N-1} ⊂ R^N`, used to validate the evolution
//! identities of the curvature norms by finite differences and to run the
//! pinching monitors on genuinely higher-codimension data.
//!
//! Intrinsic dimension is capped at 2 on purpose: a full theorem-range
//! (`n ≥ 8`) PDE is not desk-scale, the discrete identity checks are
//! dimension-agnostic, and high-dimensional dynamics are exercised by the
//! exact ODE reduction in [`crate::equivariant`]. Ambient curvature is fixed
//! at `K̄ = 1` (the unit sphere).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::PinchingProfile;

/// Allowed deviation of node positions from the unit sphere.
pub const SPHERE_TOL: f64 = 1e-12;
/// Metric degeneracy threshold on `det g`.
pub const MIN_METRIC_DET: f64 = 1e-14;
/// Default CFL number for explicit stepping.
pub const CFL: f64 = 0.1;
/// `|H|²` threshold below which ratio monitors are undefined.
pub const RATIO_H2_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum PdeError {
    #[error("bad mesh: {0}")]
    BadMesh(String),
    #[error("metric degenerate at node {node}: det g = {det}")]
    DegenerateMetric { node: usize, det: f64 },
    #[error("CFL violation: dt = {dt} exceeds bound {bound}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("need at least {need} meshes, got {got}")]
    SequenceTooShort { need: usize, got: usize },
    #[error("node {node} out of range ({count} nodes)")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("could not build a full normal frame at node {node}")]
    FrameIncomplete { node: usize },
}

/// A closed immersed submanifold sampled on a periodic structured grid.
/// Positions are unit vectors in `R^{ambient_dim}` stored row-major,
/// node-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshImmersion {
    intrinsic_dim: usize,
    ambient_dim: usize,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    positions: Vec<f64>,
}

impl MeshImmersion {
    pub fn new(
        shape: Vec<usize>,
        spacing: Vec<f64>,
        ambient_dim: usize,
        positions: Vec<f64>,
    ) -> Result<Self, PdeError> {
        let dim = shape.len();
        if dim < 1 || dim > 2 {
            return Err(PdeError::BadMesh(format!("intrinsic dimension must be 1 or 2, got {dim}")));
        }
        if spacing.len() != dim || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(PdeError::BadMesh("spacing must be positive, one per axis".into()));
        }
        if shape.iter().any(|&s| s < 4) {
            return Err(PdeError::BadMesh("each periodic axis needs at least 4 nodes".into()));
        }
        if ambient_dim < dim + 2 {
            return Err(PdeError::BadMesh(
                "ambient dimension must exceed intrinsic dimension by at least 2".into(),
            ));
        }
        let count: usize = shape.iter().product();
        if positions.len() != count * ambient_dim {
            return Err(PdeError::BadMesh(format!(
                "expected {} position components, got {}",
                count * ambient_dim,
                positions.len()
            )));
        }
        let mesh = Self { intrinsic_dim: dim, ambient_dim, shape, spacing, positions };
        for node in 0..count {
            let norm = mesh.position(node).iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > SPHERE_TOL {
                return Err(PdeError::BadMesh(format!(
                    "node {node} off the unit sphere: |F| = {norm}"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn position(&self, node: usize) -> &[f64] {
        &self.positions[node * self.ambient_dim..(node + 1) * self.ambient_dim]
    }

    /// Maximum deviation of any node from the unit sphere.
    pub fn sphere_deviation(&self) -> f64 {
        (0..self.node_count())
            .map(|i| {
                let n = self.position(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                (n - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Linear index of the node shifted by `delta` grid cells along `axis`,
    /// with periodic wrap-around.
    fn shift(&self, node: usize, axis: usize, delta: i64) -> usize {
        match self.intrinsic_dim {
            1 => {
                let n = self.shape[0] as i64;
                (((node as i64 + delta) % n + n) % n) as usize
            }
            _ => {
                let (n0, n1) = (self.shape[0] as i64, self.shape[1] as i64);
                let (i, j) = ((node / self.shape[1]) as i64, (node % self.shape[1]) as i64);
                let (i, j) = if axis == 0 {
                    (((i + delta) % n0 + n0) % n0, j)
                } else {
                    (i, ((j + delta) % n1 + n1) % n1)
                };
                (i * n1 + j) as usize
            }
        }
    }

    fn pos_vec(&self, node: usize) -> DVector<f64> {
        DVector::from_column_slice(self.position(node))
    }

    /// Central first derivative `∂F/∂u_axis` at a node.
    fn first_derivative(&self, node: usize, axis: usize) -> DVector<f64> {
        let plus = self.pos_vec(self.shift(node, axis, 1));
        let minus = self.pos_vec(self.shift(node, axis, -1));
        (plus - minus) / (2.0 * self.spacing[axis])
    }

    /// Central second derivative `∂²F/∂u_a∂u_b` at a node.
    fn second_derivative(&self, node: usize, a: usize, b: usize) -> DVector<f64> {
        if a == b {
            let plus = self.pos_vec(self.shift(node, a, 1));
            let minus = self.pos_vec(self.shift(node, a, -1));
            let mid = self.pos_vec(node);
            (plus + minus - 2.0 * mid) / (self.spacing[a] * self.spacing[a])
        } else {
            let pp = self.pos_vec(self.shift(self.shift(node, a, 1), b, 1));
            let pm = self.pos_vec(self.shift(self.shift(node, a, 1), b, -1));
            let mp = self.pos_vec(self.shift(self.shift(node, a, -1), b, 1));
            let mm = self.pos_vec(self.shift(self.shift(node, a, -1), b, -1));
            (pp - pm - mp + mm) / (4.0 * self.spacing[a] * self.spacing[b])
        }
    }
}

/// Discrete geometry at one node: metric, orthonormal normal frame
/// (excluding the radial direction), second-fundamental-form blocks per
/// normal, and the curvature norms.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub sqrt_det: f64,
    pub normals: Vec<DVector<f64>>,
    pub a_blocks: Vec<DMatrix<f64>>,
    pub h_components: Vec<f64>,
    pub h_vec: DVector<f64>,
    pub a2: f64,
    pub h2: f64,
}

impl NodeGeometry {
    /// Norm² of the part of `A` orthogonal to the principal normal
    /// `H/|H|`; `None` where `|H|²` is below the ratio threshold.
    pub fn a_minus2(&self) -> Option<f64> {
        if self.h2 <= RATIO_H2_TOL {
            return None;
        }
        let d = self.g.nrows();
        let mut principal = DMatrix::zeros(d, d);
        let hnorm = self.h2.sqrt();
        for (block, &hc) in self.a_blocks.iter().zip(&self.h_components) {
            principal += block * (hc / hnorm);
        }
        let raised = &self.ginv * &principal * &self.ginv;
        let principal_norm2 = raised.dot(&principal);
        Some((self.a2 - principal_norm2).max(0.0))
    }
}

/// Discrete geometry of a whole mesh.
#[derive(Debug, Clone)]
pub struct GeometryField {
    pub nodes: Vec<NodeGeometry>,
}

impl GeometryField {
    pub fn max_a2(&self) -> f64 {
        self.nodes.iter().map(|n| n.a2).fold(0.0, f64::max)
    }

    pub fn max_h2(&self) -> f64 {
        self.nodes.iter().map(|n| n.h2).fold(0.0, f64::max)
    }
}

/// Modified Gram–Schmidt projection of `v` against an orthonormal list.
fn project_out(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for b in basis {
        let c = v.dot(b);
        *v -= b * c;
    }
}

fn node_geometry(mesh: &MeshImmersion, node: usize) -> Result<NodeGeometry, PdeError> {
    let d = mesh.intrinsic_dim;
    let tangents: Vec<DVector<f64>> = (0..d).map(|a| mesh.first_derivative(node, a)).collect();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = tangents[i].dot(&tangents[j]);
        }
    }
    let det = g.determinant();
    if det < MIN_METRIC_DET {
        return Err(PdeError::DegenerateMetric { node, det });
    }
    let ginv = g.clone().try_inverse().ok_or(PdeError::DegenerateMetric { node, det })?;

    // Orthonormal basis of tangent ⊕ radial, then a normal frame seeded
    // deterministically from the ambient coordinate axes.
    let mut span: Vec<DVector<f64>> = vec![mesh.pos_vec(node)];
    for t in &tangents {
        let mut v = t.clone();
        project_out(&mut v, &span);
        let n = v.norm();
        if n < 1e-10 {
            return Err(PdeError::DegenerateMetric { node, det });
        }
        span.push(v / n);
    }
    let want = mesh.ambient_dim - d - 1;
    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(want);
    for axis in 0..mesh.ambient_dim {
        if normals.len() == want {
            break;
        }
        let mut v = DVector::zeros(mesh.ambient_dim);
        v[axis] = 1.0;
        project_out(&mut v, &span);
        project_out(&mut v, &normals);
        let n = v.norm();
        if n > 0.3 {
            // Re-orthogonalize once for numerical cleanliness.
            let mut v = v / n;
            project_out(&mut v, &span);
            project_out(&mut v, &normals);
            normals.push(v.normalize());
        }
    }
    if normals.len() != want {
        return Err(PdeError::FrameIncomplete { node });
    }

    let seconds: Vec<Vec<DVector<f64>>> = (0..d)
        .map(|a| (0..d).map(|b| mesh.second_derivative(node, a, b)).collect())
        .collect();
    let a_blocks: Vec<DMatrix<f64>> = normals
        .iter()
        .map(|nu| DMatrix::from_fn(d, d, |i, j| nu.dot(&seconds[i][j])))
        .collect();

    let h_components: Vec<f64> = a_blocks
        .iter()
        .map(|block| {
            let mut h = 0.0;
            for i in 0..d {
                for j in 0..d {
                    h += ginv[(i, j)] * block[(i, j)];
                }
            }
            h
        })
        .collect();
    let mut h_vec = DVector::zeros(mesh.ambient_dim);
    for (nu, &hc) in normals.iter().zip(&h_components) {
        h_vec += nu * hc;
    }
    let a2 = a_blocks
        .iter()
        .map(|block| {
            let raised = &ginv * block * &ginv;
            raised.dot(block)
        })
        .sum();
    let h2 = h_components.iter().map(|h| h * h).sum();

    Ok(NodeGeometry {
        sqrt_det: det.sqrt(),
        g,
        ginv,
        normals,
        a_blocks,
        h_components,
        h_vec,
        a2,
        h2,
    })
}

/// Computes the full discrete geometry: metric from central first
/// differences, second fundamental form as the normal projection of central
/// second differences, `H = g^{ij}A_ij`.
pub fn compute_geometry(mesh: &MeshImmersion) -> Result<GeometryField, PdeError> {
    let nodes: Result<Vec<NodeGeometry>, PdeError> =
        (0..mesh.node_count()).into_par_iter().map(|i| node_geometry(mesh, i)).collect();
    Ok(GeometryField { nodes: nodes? })
}

/// One explicit step of the flow: `F ← (F + dt·H)/|F + dt·H|`. The
/// renormalization keeps the flow exactly on the unit sphere (the mean
/// curvature vector of a sphere submanifold is tangent to the sphere, so the
/// correction is O(dt²)). `dt = 0` is exactly the identity.
pub fn step(mesh: &MeshImmersion, dt: f64) -> Result<MeshImmersion, PdeError> {
    if dt == 0.0 {
        return Ok(mesh.clone());
    }
    let field = compute_geometry(mesh)?;
    let bound = CFL / field.max_a2().max(f64::MIN_POSITIVE);
    if dt > bound {
        return Err(PdeError::CflViolation { dt, bound });
    }
    let mut out = mesh.clone();
    for node in 0..mesh.node_count() {
        let h = &field.nodes[node].h_vec;
        let base = mesh.position(node);
        let moved: Vec<f64> = base.iter().zip(h.iter()).map(|(x, v)| x + dt * v).collect();
        let norm = moved.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dst = node * mesh.ambient_dim;
        for (k, x) in moved.iter().enumerate() {
            out.positions[dst + k] = x / norm;
        }
    }
    Ok(out)
}

/// Evolves a mesh for `steps` steps at fixed `dt`, returning the whole
/// sequence (length `steps + 1`).
pub fn flow_sequence(
    mesh: &MeshImmersion,
    dt: f64,
    steps: usize,
) -> Result<Vec<MeshImmersion>, PdeError> {
    let mut seq = Vec::with_capacity(steps + 1);
    seq.push(mesh.clone());
    for _ in 0..steps {
        let next = step(seq.last().unwrap(), dt)?;
        seq.push(next);
    }
    Ok(seq)
}

/// Discrete Laplace–Beltrami of a scalar node field, in divergence form
/// `Δu = (1/√g) ∂_i(√g g^{ij} ∂_j u)` with half-point averaged coefficients
/// on the diagonal and centered differences on the cross terms.
fn laplace_beltrami(mesh: &MeshImmersion, field: &GeometryField, u: &[f64], node: usize) -> f64 {
    let d = mesh.intrinsic_dim;
    let coeff = |n: usize, i: usize, j: usize| field.nodes[n].sqrt_det * field.nodes[n].ginv[(i, j)];
    let mut div = 0.0;
    for i in 0..d {
        let h = mesh.spacing[i];
        let plus = mesh.shift(node, i, 1);
        let minus = mesh.shift(node, i, -1);
        // Diagonal flux with half-point coefficients.
        let c_plus = 0.5 * (coeff(node, i, i) + coeff(plus, i, i));
        let c_minus = 0.5 * (coeff(node, i, i) + coeff(minus, i, i));
        div += (c_plus * (u[plus] - u[node]) - c_minus * (u[node] - u[minus])) / (h * h);
        // Cross terms (2-D meshes only).
        for j in 0..d {
            if j == i {
                continue;
            }
            let central_j = |n: usize| {
                (u[mesh.shift(n, j, 1)] - u[mesh.shift(n, j, -1)]) / (2.0 * mesh.spacing[j])
            };
            div += (coeff(plus, i, j) * central_j(plus) - coeff(minus, i, j) * central_j(minus))
                / (2.0 * h);
        }
    }
    div / field.nodes[node].sqrt_det
}

/// Covariant gradient norms `(|∇A|², |∇H|²)` at a node: component
/// derivatives by central differences, corrected by Christoffel symbols of
/// the discrete metric and by the normal connection coefficients
/// `⟨∂_k ν_β, ν_α⟩` of the stored frame.
fn gradient_norms(mesh: &MeshImmersion, field: &GeometryField, node: usize) -> (f64, f64) {
    let d = mesh.intrinsic_dim;
    let nn = field.nodes[node].normals.len();
    let geo = &field.nodes[node];

    // Christoffel symbols from central differences of the metric.
    let dg = |k: usize, i: usize, j: usize| {
        (field.nodes[mesh.shift(node, k, 1)].g[(i, j)]
            - field.nodes[mesh.shift(node, k, -1)].g[(i, j)])
            / (2.0 * mesh.spacing[k])
    };
    let mut gamma = vec![0.0; d * d * d]; // [k][i][j] -> Γ^k_ij
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += geo.ginv[(k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
                }
                gamma[(k * d + i) * d + j] = 0.5 * s;
            }
        }
    }

    // Normal connection coefficients ω[k][β][α] = ⟨∂_k ν_β, ν_α⟩.
    let mut omega = vec![0.0; d * nn * nn];
    for k in 0..d {
        for beta in 0..nn {
            let dnu = (&field.nodes[mesh.shift(node, k, 1)].normals[beta]
                - &field.nodes[mesh.shift(node, k, -1)].normals[beta])
                / (2.0 * mesh.spacing[k]);
            for alpha in 0..nn {
                omega[(k * nn + beta) * nn + alpha] = dnu.dot(&geo.normals[alpha]);
            }
        }
    }

    // ∇_k A^α_ij.
    let da = |k: usize, alpha: usize, i: usize, j: usize| {
        (field.nodes[mesh.shift(node, k, 1)].a_blocks[alpha][(i, j)]
            - field.nodes[mesh.shift(node, k, -1)].a_blocks[alpha][(i, j)])
            / (2.0 * mesh.spacing[k])
    };
    let mut nabla_a = vec![0.0; d * nn * d * d];
    for k in 0..d {
        for alpha in 0..nn {
            for i in 0..d {
                for j in 0..d {
                    let mut v = da(k, alpha, i, j);
                    for l in 0..d {
                        v -= gamma[(l * d + k) * d + i] * geo.a_blocks[alpha][(l, j)];
                        v -= gamma[(l * d + k) * d + j] * geo.a_blocks[alpha][(i, l)];
                    }
                    for beta in 0..nn {
                        v += omega[(k * nn + beta) * nn + alpha] * geo.a_blocks[beta][(i, j)];
                    }
                    nabla_a[((k * nn + alpha) * d + i) * d + j] = v;
                }
            }
        }
    }
    let mut grad_a2 = 0.0;
    for alpha in 0..nn {
        for k in 0..d {
            for p in 0..d {
                for i in 0..d {
                    for q in 0..d {
                        for j in 0..d {
                            for r in 0..d {
                                grad_a2 += geo.ginv[(k, p)]
                                    * geo.ginv[(i, q)]
                                    * geo.ginv[(j, r)]
                                    * nabla_a[((k * nn + alpha) * d + i) * d + j]
                                    * nabla_a[((p * nn + alpha) * d + q) * d + r];
                            }
                        }
                    }
                }
            }
        }
    }

    // ∇_k H^α.
    let dh = |k: usize, alpha: usize| {
        (field.nodes[mesh.shift(node, k, 1)].h_components[alpha]
            - field.nodes[mesh.shift(node, k, -1)].h_components[alpha])
            / (2.0 * mesh.spacing[k])
    };
    let mut grad_h2 = 0.0;
    for k in 0..d {
        for p in 0..d {
            for alpha in 0..nn {
                let mut vk = dh(k, alpha);
                let mut vp = dh(p, alpha);
                for beta in 0..nn {
                    vk += omega[(k * nn + beta) * nn + alpha] * geo.h_components[beta];
                    vp += omega[(p * nn + beta) * nn + alpha] * geo.h_components[beta];
                }
                grad_h2 += geo.ginv[(k, p)] * vk * vp;
            }
        }
    }
    (grad_a2, grad_h2)
}

/// Reaction terms at a node: `(|⟨A,A⟩|², |R⊥|², |⟨A,H⟩|²)` with all indices
/// raised by the discrete metric.
fn reaction_terms(geo: &NodeGeometry) -> (f64, f64, f64) {
    let d = geo.g.nrows();
    let raised: Vec<DMatrix<f64>> = geo.a_blocks.iter().map(|b| &geo.ginv * b).collect();
    let mut saa = 0.0;
    let mut rperp = 0.0;
    for a in &raised {
        for b in &raised {
            let s = (a * b).trace();
            saa += s * s;
            let c = a * b - b * a;
            rperp += (&c * c.transpose()).trace();
        }
    }
    let mut bh = DMatrix::zeros(d, d);
    for (block, &hc) in geo.a_blocks.iter().zip(&geo.h_components) {
        bh += block * hc;
    }
    let raised_bh = &geo.ginv * &bh * &geo.ginv;
    let sah = raised_bh.dot(&bh);
    (saa, rperp, sah)
}

/// Residuals of the discrete evolution identities for `|A|²` and `|H|²` at
/// one node, from three consecutive meshes at fixed step `dt` (central time
/// differences), with `K̄ = 1` and `n` the intrinsic dimension:
///
/// `∂_t|A|² = Δ|A|² − 2|∇A|² + 2|⟨A,A⟩|² + 2|R⊥|² + 4|H|² − 2n|A|²`
/// `∂_t|H|² = Δ|H|² − 2|∇H|² + 2|⟨A,H⟩|² + 2n|H|²`
pub fn evolution_identity_residual(
    sequence: &[MeshImmersion],
    dt: f64,
    node: usize,
) -> Result<(f64, f64), PdeError> {
    if sequence.len() < 3 {
        return Err(PdeError::SequenceTooShort { need: 3, got: sequence.len() });
    }
    let (prev, mid, next) = (&sequence[0], &sequence[1], &sequence[2]);
    if node >= mid.node_count() {
        return Err(PdeError::NodeOutOfRange { node, count: mid.node_count() });
    }
    let f_prev = compute_geometry(prev)?;
    let f_mid = compute_geometry(mid)?;
    let f_next = compute_geometry(next)?;

    let nf = mid.intrinsic_dim as f64;
    let a2: Vec<f64> = f_mid.nodes.iter().map(|g| g.a2).collect();
    let h2: Vec<f64> = f_mid.nodes.iter().map(|g| g.h2).collect();

    let dt_a2 = (f_next.nodes[node].a2 - f_prev.nodes[node].a2) / (2.0 * dt);
    let dt_h2 = (f_next.nodes[node].h2 - f_prev.nodes[node].h2) / (2.0 * dt);
    let lap_a2 = laplace_beltrami(mid, &f_mid, &a2, node);
    let lap_h2 = laplace_beltrami(mid, &f_mid, &h2, node);
    let (grad_a2, grad_h2) = gradient_norms(mid, &f_mid, node);
    let (saa, rperp, sah) = reaction_terms(&f_mid.nodes[node]);

    let geo = &f_mid.nodes[node];
    let res_a2 = (dt_a2
        - (lap_a2 - 2.0 * grad_a2 + 2.0 * saa + 2.0 * rperp + 4.0 * geo.h2 - 2.0 * nf * geo.a2))
        .abs();
    let res_h2 = (dt_h2 - (lap_h2 - 2.0 * grad_h2 + 2.0 * sah + 2.0 * nf * geo.h2)).abs();
    Ok((res_a2, res_h2))
}

/// One row of the monitor table; ratios are NaN where their denominator is
/// below threshold at every node.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PdeMonitorRow {
    pub step: usize,
    pub t: f64,
    pub max_a2: f64,
    pub max_h2: f64,
    /// max over nodes of `|∇A|²/gap²` where the pinching gap is positive.
    pub grad_ratio: f64,
    /// max over nodes of `|A⁻|²/gap` where the gap is positive.
    pub codim_ratio: f64,
    /// max over nodes of `|A|²/|H|²` where `|H|²` is above threshold.
    pub cyl_ratio: f64,
}

/// Runs the pinching monitors over a mesh sequence. These are diagnostics
/// (the mesh dimensions sit below the regime where the estimates are
/// theorems); nothing is asserted here. Maxima are taken in fixed node
/// order for determinism.
pub fn run_monitors(
    sequence: &[MeshImmersion],
    dt: f64,
    profile: &PinchingProfile,
) -> Result<Vec<PdeMonitorRow>, PdeError> {
    if sequence.is_empty() {
        return Err(PdeError::SequenceTooShort { need: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(sequence.len());
    for (k, mesh) in sequence.iter().enumerate() {
        let field = compute_geometry(mesh)?;
        let mut grad_ratio = f64::NAN;
        let mut codim_ratio = f64::NAN;
        let mut cyl_ratio = f64::NAN;
        for node in 0..mesh.node_count() {
            let geo = &field.nodes[node];
            // Pinching gap evaluated directly (the data may be unpinched).
            let gap = profile.a_of(geo.h2).unwrap()
                - geo.a2
                - profile.eps() * profile.omega_of(geo.h2).unwrap();
            if gap > 0.0 {
                let (grad_a2, _) = gradient_norms(mesh, &field, node);
                let g = grad_a2 / (gap * gap);
                if !(g <= grad_ratio) {
                    grad_ratio = if grad_ratio.is_nan() { g } else { grad_ratio.max(g) };
                }
                if let Some(v) = geo.a_minus2() {
                    let c = v / gap;
                    codim_ratio = if codim_ratio.is_nan() { c } else { codim_ratio.max(c) };
                }
            }
            if geo.h2 > RATIO_H2_TOL {
                let r = geo.a2 / geo.h2;
                cyl_ratio = if cyl_ratio.is_nan() { r } else { cyl_ratio.max(r) };
            }
        }
        rows.push(PdeMonitorRow {
            step: k,
            t: k as f64 * dt,
            max_a2: field.max_a2(),
            max_h2: field.max_h2(),
            grad_ratio,
            codim_ratio,
            cyl_ratio,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

fn normalize_positions(mut positions: Vec<f64>, ambient: usize) -> Vec<f64> {
    for chunk in positions.chunks_mut(ambient) {
        let norm = chunk.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in chunk {
            *x /= norm;
        }
    }
    positions
}

/// A great circle (totally geodesic `S¹`) in the equator of `S^{ambient−1}`.
pub fn great_circle(ambient_dim: usize, points: usize) -> MeshImmersion {
    let h = std::f64::consts::TAU / points as f64;
    let mut positions = Vec::with_capacity(points * ambient_dim);
    for i in 0..points {
        let u = i as f64 * h;
        let mut p = vec![0.0; ambient_dim];
        p[0] = u.cos();
        p[1] = u.sin();
        positions.extend(p);
    }
    MeshImmersion::new(vec![points], vec![h], ambient_dim, positions).unwrap()
}

/// A small circle `S¹(ρ)` at height `√(1−ρ²)` inside `S² ⊂ S^{ambient−1}`.
/// Its mean curvature in the sphere is `√(1−ρ²)/ρ`, and under the flow the
/// radius obeys `ρ' = −(1−ρ²)/ρ`.
pub fn small_circle(rho: f64, ambient_dim: usize, points: usize) -> MeshImmersion {
    let h = std::f64::consts::TAU / points as f64;
    let z = (1.0 - rho * rho).sqrt();
    let mut positions = Vec::with_capacity(points * ambient_dim);
    for i in 0..points {
        let u = i as f64 * h;
        let mut p = vec![0.0; ambient_dim];
        p[0] = rho * u.cos();
        p[1] = rho * u.sin();
        p[2] = z;
        positions.extend(p);
    }
    MeshImmersion::new(vec![points], vec![h], ambient_dim, normalize_positions(positions, ambient_dim))
        .unwrap()
}

/// A totally geodesic great `S² ⊂ S⁴` realized as a doubly periodic double
/// cover `F(u,v) = (sin v cos u, sin v sin u, cos v, 0, 0)` with the v-grid
/// offset by half a cell so no node sits at a pole. (No immersion of the
/// torus onto `S²` exists; this cover is smooth and periodic on the grid,
/// and its finite differences lie in tangent ⊕ radial span, so `A ≈ 0`.)
pub fn great_two_sphere_cover(points_u: usize, points_v: usize) -> MeshImmersion {
    let hu = std::f64::consts::TAU / points_u as f64;
    let hv = std::f64::consts::TAU / points_v as f64;
    let ambient = 5;
    let mut positions = Vec::with_capacity(points_u * points_v * ambient);
    for i in 0..points_u {
        let u = i as f64 * hu;
        for j in 0..points_v {
            let v = (j as f64 + 0.5) * hv;
            positions.extend([v.sin() * u.cos(), v.sin() * u.sin(), v.cos(), 0.0, 0.0]);
        }
    }
    MeshImmersion::new(vec![points_u, points_v], vec![hu, hv], ambient, positions).unwrap()
}

/// The product torus `S¹(cos φ) × S¹(sin φ) ⊂ S³`, embedded in
/// `R^{ambient_dim}` with trivial extra coordinates (codimension-one data
/// inside `S³`, so `A⁻ = 0` there).
pub fn clifford_torus(phi: f64, ambient_dim: usize, points: usize) -> MeshImmersion {
    let h = std::f64::consts::TAU / points as f64;
    let (c, s) = (phi.cos(), phi.sin());
    let mut positions = Vec::with_capacity(points * points * ambient_dim);
    for i in 0..points {
        let u = i as f64 * h;
        for j in 0..points {
            let v = j as f64 * h;
            let mut p = vec![0.0; ambient_dim];
            p[0] = c * u.cos();
            p[1] = c * u.sin();
            p[2] = s * v.cos();
            p[3] = s * v.sin();
            positions.extend(p);
        }
    }
    MeshImmersion::new(
        vec![points, points],
        vec![h, h],
        ambient_dim,
        normalize_positions(positions, ambient_dim),
    )
    .unwrap()
}

/// A Clifford-type torus in `S⁴ ⊂ R⁵` perturbed by `δ·sin u·sin v` in the
/// fifth coordinate: genuinely higher-codimension data whose `|A⁻|²` scales
/// like `δ²`.
pub fn perturbed_clifford_torus(phi: f64, delta: f64, points: usize) -> MeshImmersion {
    let h = std::f64::consts::TAU / points as f64;
    let (c, s) = (phi.cos(), phi.sin());
    let mut positions = Vec::with_capacity(points * points * 5);
    for i in 0..points {
        let u = i as f64 * h;
        for j in 0..points {
            let v = j as f64 * h;
            positions.extend([
                c * u.cos(),
                c * u.sin(),
                s * v.cos(),
                s * v.sin(),
                delta * u.sin() * v.sin(),
            ]);
        }
    }
    MeshImmersion::new(vec![points, points], vec![h, h], 5, normalize_positions(positions, 5))
        .unwrap()
}
