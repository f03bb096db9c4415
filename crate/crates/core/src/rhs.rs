//! Semi-discrete right-hand side on a curvilinear mesh: flux-differencing
//! volume terms, LDG viscous terms and all face penalties.
//!
//! For node `i` of an element,
//!
//! ```text
//! J dq/dt = -Σ_l 2 Σ_k D_ik f*(q_i, q_k, ½(Ja^l_i + Ja^l_k))
//!           + Σ_l D_l (Σ_m Ja^l_m F^V_m) + P⁻¹ (face penalties) + J s
//! ```
//!
//! where the face penalties come from the wall and interface modules scaled by
//! the local face area element, and `s` is an optional body force.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Result, SolverError};
use crate::gas::{
    cons_to_prim, dot3, dot5, ec_flux_point, entropy_vars, es_flux_point, inviscid_flux_point,
    potential_flux, Entropy, GasParameters, InviscidMode, PointState, Primitive,
};
use crate::interface::interface_penalty;
use crate::mesh::{FaceLink, Mesh};
use crate::viscous::{face_area_normal, ldg_gradients, viscous_fluxes, GradientPenalty, NodeGradient};
use crate::wall::{check_wall_velocity, wall_gradient_jump, wall_penalty, WallSpec};

/// Strength of an interior-penalty term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Penalty {
    Off,
    /// `β = 1 / (element height normal to the face)`.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// The `beta` field of the spec is replaced by the resolved `penalty`.
    Wall { spec: WallSpec, penalty: Penalty },
    /// Entropy-stable flux against a frozen exterior state.
    FarField { state: Primitive },
}

#[derive(Debug, Clone)]
enum ResolvedBc {
    Wall {
        spec: WallSpec,
        /// Wall velocity per face node, in the face's node order.
        velocity: Vec<[f64; 3]>,
    },
    FarField {
        point: PointState,
        w: Entropy,
    },
}

/// Area element and unit normal per face node, in the face's node order.
#[derive(Debug, Clone)]
struct FaceGeometry {
    area: Vec<f64>,
    normal: Vec<[f64; 3]>,
}

fn face_geometry(mesh: &Mesh, element: usize, face: usize) -> FaceGeometry {
    let el = &mesh.elements[element];
    let nodes = mesh.layout.face_nodes(face);
    let mut area = Vec::with_capacity(nodes.len());
    let mut normal = Vec::with_capacity(nodes.len());
    for &q in nodes {
        let big = face_area_normal(&el.ja[q], face);
        let a = dot3(&big, &big).sqrt();
        area.push(a);
        normal.push(big.map(|x| x / a));
    }
    FaceGeometry { area, normal }
}

/// Per-evaluation integrals used by the entropy balance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RhsDiagnostics {
    /// `Σ P J Σ_mj Θ_mᵀ C_mj Θ_j`.
    pub viscous_dissipation: f64,
    /// Face quadrature of the prescribed heat-entropy flow.
    pub heat: f64,
    /// Entropy removed by stable fluxes and interior penalties (≤ 0).
    pub penalty_dissipation: f64,
    /// Full entropy contribution of far-field faces.
    pub far_field: f64,
}

impl RhsDiagnostics {
    fn add(&mut self, o: &RhsDiagnostics) {
        self.viscous_dissipation += o.viscous_dissipation;
        self.heat += o.heat;
        self.penalty_dissipation += o.penalty_dissipation;
        self.far_field += o.far_field;
    }
}

/// One entry of the entropy time series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EntropyBalanceRecord {
    pub t: f64,
    pub dsdt: f64,
    pub dt: f64,
    pub xi: f64,
    /// `dS/dt + DT - Ξ`.
    pub residual: f64,
    /// `Σ |P J w_k dq_k/dt|`, the size of the terms summed into `dS/dt`.
    pub magnitude: f64,
}

/// Global solution vector with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub q: Vec<[f64; 5]>,
    pub t: f64,
}

/// Mesh, gas and boundary data bound together for repeated RHS evaluation.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub gas: GasParameters,
    /// Inviscid flux used on interior faces.
    pub mode: InviscidMode,
    /// Body force per unit volume; its work `s·U` enters the energy equation.
    pub body_force: [f64; 3],
    boundary: Vec<ResolvedBc>,
    boundary_geom: Vec<FaceGeometry>,
    interface_geom: Vec<FaceGeometry>,
    interface_beta: Vec<f64>,
    /// `P_i J_i` for every global node.
    mass: Vec<f64>,
}

/// What one element contributes, gathered per element so that sums are
/// independent of thread scheduling.
struct ElementWork {
    prim: Vec<Primitive>,
    point: Vec<PointState>,
    w: Vec<Entropy>,
}

impl Discretization {
    /// Binds boundary conditions by tag. Every tag present in the mesh must
    /// have a condition.
    pub fn new(
        mesh: Mesh,
        gas: GasParameters,
        mode: InviscidMode,
        conditions: &HashMap<String, BoundaryCondition>,
        interface_penalty: Penalty,
    ) -> Result<Self> {
        let mut boundary = Vec::with_capacity(mesh.boundaries.len());
        let mut boundary_geom = Vec::with_capacity(mesh.boundaries.len());
        for b in &mesh.boundaries {
            let cond = conditions.get(&b.tag).ok_or_else(|| {
                SolverError::Config(format!("no boundary condition for mesh tag '{}'", b.tag))
            })?;
            let geom = face_geometry(&mesh, b.element, b.face);
            let resolved = match cond {
                BoundaryCondition::Wall { spec, penalty } => {
                    let el = &mesh.elements[b.element];
                    let mut velocity = Vec::new();
                    for (a, &q) in mesh.layout.face_nodes(b.face).iter().enumerate() {
                        let u = spec.motion.velocity_at(&el.coords[q]);
                        check_wall_velocity(&u, &geom.normal[a])?;
                        velocity.push(u);
                    }
                    let beta = match *penalty {
                        Penalty::Off => 0.0,
                        Penalty::Auto => 1.0 / mesh.normal_height(b.element, b.face),
                        Penalty::Fixed(v) => v,
                    };
                    ResolvedBc::Wall {
                        spec: WallSpec { beta, ..*spec },
                        velocity,
                    }
                }
                BoundaryCondition::FarField { state } => {
                    if !(state[0] > 0.0 && state[4] > 0.0) {
                        return Err(SolverError::Config(format!(
                            "far-field state for tag '{}' is not admissible",
                            b.tag
                        )));
                    }
                    ResolvedBc::FarField {
                        point: PointState::from_prim(state, &gas),
                        w: entropy_vars(state, &gas),
                    }
                }
            };
            boundary.push(resolved);
            boundary_geom.push(geom);
        }
        let mut interface_geom = Vec::with_capacity(mesh.interfaces.len());
        let mut interface_beta = Vec::with_capacity(mesh.interfaces.len());
        for p in &mesh.interfaces {
            interface_geom.push(face_geometry(&mesh, p.left, p.left_face));
            interface_beta.push(match interface_penalty {
                Penalty::Off => 0.0,
                Penalty::Auto => {
                    let h = mesh
                        .normal_height(p.left, p.left_face)
                        .min(mesh.normal_height(p.right, p.right_face));
                    1.0 / h
                }
                Penalty::Fixed(v) => v,
            });
        }
        let nn = mesh.nodes_per_element();
        let mass = (0..mesh.elements.len())
            .flat_map(|e| (0..nn).map(move |q| (e, q)))
            .map(|(e, q)| mesh.mass(e, q))
            .collect();
        Ok(Discretization {
            mesh,
            gas,
            mode,
            body_force: [0.0; 3],
            boundary,
            boundary_geom,
            interface_geom,
            interface_beta,
            mass,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.mass.len()
    }

    /// `P_i J_i` per global node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn viscous(&self) -> bool {
        self.gas.mu > 0.0 || self.gas.kappa > 0.0
    }

    /// Evaluates `dq/dt` into `out`.
    pub fn compute_rhs(&self, q: &[[f64; 5]], t: f64, out: &mut [[f64; 5]]) -> Result<()> {
        self.evaluate(q, t, out).map(|_| ())
    }

    /// Evaluates `dq/dt` and the integrals needed for the entropy balance.
    pub fn compute_rhs_with_diagnostics(
        &self,
        q: &[[f64; 5]],
        t: f64,
        out: &mut [[f64; 5]],
    ) -> Result<RhsDiagnostics> {
        self.evaluate(q, t, out)
    }

    /// Entropy-variable gradients of every node (zero for inviscid gases).
    pub fn gradients(&self, q: &[[f64; 5]]) -> Result<Vec<NodeGradient>> {
        let work = self.prepare(q)?;
        let nn = self.mesh.nodes_per_element();
        let mut all = Vec::with_capacity(q.len());
        for e in 0..self.mesh.elements.len() {
            all.extend(self.element_gradients(e, &work)?);
        }
        debug_assert_eq!(all.len(), nn * self.mesh.elements.len());
        Ok(all)
    }

    /// Contracts `dq/dt` with the entropy variables and closes the balance.
    pub fn entropy_rhs_contraction(
        &self,
        q: &[[f64; 5]],
        dqdt: &[[f64; 5]],
        diag: &RhsDiagnostics,
        t: f64,
    ) -> Result<EntropyBalanceRecord> {
        let mut dsdt = 0.0;
        let mut magnitude = 0.0;
        for (g, (qi, di)) in q.iter().zip(dqdt).enumerate() {
            let w = entropy_vars(&cons_to_prim(qi, &self.gas)?, &self.gas);
            let m = self.mass[g];
            for k in 0..5 {
                let term = m * w[k] * di[k];
                dsdt += term;
                magnitude += term.abs();
            }
        }
        let dt = diag.viscous_dissipation;
        let xi = diag.heat + diag.penalty_dissipation + diag.far_field;
        Ok(EntropyBalanceRecord {
            t,
            dsdt,
            dt,
            xi,
            residual: dsdt + dt - xi,
            magnitude,
        })
    }

    /// Total entropy `Σ P J S`.
    pub fn total_entropy(&self, q: &[[f64; 5]]) -> Result<f64> {
        let mut total = 0.0;
        for (g, qi) in q.iter().enumerate() {
            total += self.mass[g] * crate::gas::entropy_function(qi, &self.gas)?;
        }
        Ok(total)
    }

    /// `Σ P J q` per component.
    pub fn totals(&self, q: &[[f64; 5]]) -> [f64; 5] {
        let mut s = [0.0; 5];
        for (g, qi) in q.iter().enumerate() {
            for k in 0..5 {
                s[k] += self.mass[g] * qi[k];
            }
        }
        s
    }

    fn prepare(&self, q: &[[f64; 5]]) -> Result<Vec<ElementWork>> {
        let nn = self.mesh.nodes_per_element();
        let ne = self.mesh.elements.len();
        if q.len() != nn * ne {
            return Err(SolverError::SizeMismatch {
                expected: nn * ne,
                got: q.len(),
            });
        }
        q.par_chunks(nn)
            .enumerate()
            .map(|(e, qe)| {
                let mut prim = Vec::with_capacity(nn);
                for (node, qi) in qe.iter().enumerate() {
                    let v = cons_to_prim(qi, &self.gas).map_err(|err| SolverError::Inadmissible {
                        element: e,
                        node,
                        source: Box::new(err),
                    })?;
                    prim.push(v);
                }
                let point = prim.iter().map(|v| PointState::from_prim(v, &self.gas)).collect();
                let w = prim.iter().map(|v| entropy_vars(v, &self.gas)).collect();
                Ok(ElementWork { prim, point, w })
            })
            .collect()
    }

    /// Nodes of the other side of interface `index`, position `a` of the
    /// left face list.
    fn interface_nodes(&self, index: usize, a: usize) -> (usize, usize) {
        let p = &self.mesh.interfaces[index];
        let lf = self.mesh.layout.face_nodes(p.left_face);
        let rf = self.mesh.layout.face_nodes(p.right_face);
        (lf[a], rf[p.node_map[a]])
    }

    fn element_gradients(&self, e: usize, work: &[ElementWork]) -> Result<Vec<NodeGradient>> {
        let nn = self.mesh.nodes_per_element();
        if !self.viscous() {
            return Ok(vec![[[0.0; 5]; 3]; nn]);
        }
        let el = &self.mesh.elements[e];
        let mine = &work[e];
        let mut pens = Vec::new();
        for face in 0..6 {
            match self.mesh.links[e][face] {
                FaceLink::Interface { index, left } => {
                    let p = &self.mesh.interfaces[index];
                    let geom = &self.interface_geom[index];
                    let other = if left { p.right } else { p.left };
                    for a in 0..geom.area.len() {
                        let (ln, rn) = self.interface_nodes(index, a);
                        let (own, nb) = if left { (ln, rn) } else { (rn, ln) };
                        let sign = if left { 1.0 } else { -1.0 };
                        let wn = &work[other].w[nb];
                        let wo = &mine.w[own];
                        pens.push(GradientPenalty {
                            node: own,
                            face,
                            normal: geom.normal[a].map(|x| sign * x * geom.area[a]),
                            half_jump: std::array::from_fn(|k| 0.5 * (wn[k] - wo[k])),
                        });
                    }
                }
                FaceLink::Boundary(b) => {
                    let geom = &self.boundary_geom[b];
                    let nodes = self.mesh.layout.face_nodes(face);
                    for (a, &node) in nodes.iter().enumerate() {
                        let half_jump = match &self.boundary[b] {
                            ResolvedBc::Wall { velocity, .. } => {
                                wall_gradient_jump(&mine.prim[node], &velocity[a], &self.gas)?
                            }
                            ResolvedBc::FarField { w, .. } => {
                                std::array::from_fn(|k| 0.5 * (w[k] - mine.w[node][k]))
                            }
                        };
                        pens.push(GradientPenalty {
                            node,
                            face,
                            normal: geom.normal[a].map(|x| x * geom.area[a]),
                            half_jump,
                        });
                    }
                }
            }
        }
        ldg_gradients(&self.mesh.op, &self.mesh.layout, &el.jac, &el.ja, &mine.w, &pens)
    }

    fn evaluate(&self, q: &[[f64; 5]], t: f64, out: &mut [[f64; 5]]) -> Result<RhsDiagnostics> {
        let nn = self.mesh.nodes_per_element();
        if out.len() != q.len() {
            return Err(SolverError::SizeMismatch {
                expected: q.len(),
                got: out.len(),
            });
        }
        let work = self.prepare(q)?;
        let theta: Vec<Vec<NodeGradient>> = (0..self.mesh.elements.len())
            .into_par_iter()
            .map(|e| self.element_gradients(e, &work))
            .collect::<Result<_>>()?;

        let diags: Vec<RhsDiagnostics> = out
            .par_chunks_mut(nn)
            .enumerate()
            .map(|(e, dq)| self.element_rhs(e, t, &work, &theta, dq))
            .collect::<Result<_>>()?;
        let mut total = RhsDiagnostics::default();
        for d in &diags {
            total.add(d);
        }
        Ok(total)
    }

    fn element_rhs(
        &self,
        e: usize,
        t: f64,
        work: &[ElementWork],
        theta: &[Vec<NodeGradient>],
        dq: &mut [[f64; 5]],
    ) -> Result<RhsDiagnostics> {
        let mesh = &self.mesh;
        let gas = &self.gas;
        let layout = &mesh.layout;
        let op = &mesh.op;
        let n = layout.n;
        let el = &mesh.elements[e];
        let mine = &work[e];
        let th = &theta[e];
        let viscous = self.viscous();
        let mut diag = RhsDiagnostics::default();

        for x in dq.iter_mut() {
            *x = [0.0; 5];
        }

        // inviscid volume terms in flux-differencing form
        for l in 0..3 {
            let stride = layout.stride(l);
            for &start in layout.face_nodes(2 * l) {
                for a in 0..n {
                    let ia = start + a * stride;
                    let ja_a = &el.ja[ia][l];
                    let daa = op.d[(a, a)];
                    if daa != 0.0 {
                        let f = inviscid_flux_point(&mine.point[ia], ja_a, gas);
                        for k in 0..5 {
                            dq[ia][k] -= 2.0 * daa * f[k];
                        }
                    }
                    for b in (a + 1)..n {
                        let ib = start + b * stride;
                        let ja_b = &el.ja[ib][l];
                        let avg = [
                            0.5 * (ja_a[0] + ja_b[0]),
                            0.5 * (ja_a[1] + ja_b[1]),
                            0.5 * (ja_a[2] + ja_b[2]),
                        ];
                        let f = ec_flux_point(&mine.point[ia], &mine.point[ib], &avg, gas);
                        let dab = 2.0 * op.d[(a, b)];
                        let dba = 2.0 * op.d[(b, a)];
                        for k in 0..5 {
                            dq[ia][k] -= dab * f[k];
                            dq[ib][k] -= dba * f[k];
                        }
                    }
                }
            }
        }

        // viscous volume terms: Σ_l D_l (Σ_m Ja^l_m F^V_m)
        let mut fv: Vec<[[f64; 5]; 3]> = Vec::new();
        if viscous {
            fv = (0..mine.prim.len())
                .map(|i| viscous_fluxes(&mine.prim[i], &th[i], gas))
                .collect();
            for l in 0..3 {
                let stride = layout.stride(l);
                for &start in layout.face_nodes(2 * l) {
                    let mut g = vec![[0.0; 5]; n];
                    for (b, gb) in g.iter_mut().enumerate() {
                        let i = start + b * stride;
                        let a = &el.ja[i][l];
                        for k in 0..5 {
                            gb[k] = a[0] * fv[i][0][k] + a[1] * fv[i][1][k] + a[2] * fv[i][2][k];
                        }
                    }
                    for a in 0..n {
                        let ia = start + a * stride;
                        for (b, gb) in g.iter().enumerate() {
                            let d = op.d[(a, b)];
                            for k in 0..5 {
                                dq[ia][k] += d * gb[k];
                            }
                        }
                    }
                }
            }
            for (i, thi) in th.iter().enumerate() {
                let s: f64 = (0..3).map(|m| dot5(&thi[m], &fv[i][m])).sum();
                diag.viscous_dissipation += mesh.mass(e, i) * s;
            }
        }

        // face penalties
        let inv_end = 1.0 / op.end_weight();
        for face in 0..6 {
            match mesh.links[e][face] {
                FaceLink::Interface { index, left } => {
                    let p = &mesh.interfaces[index];
                    let geom = &self.interface_geom[index];
                    let beta = self.interface_beta[index];
                    for a in 0..geom.area.len() {
                        let (ln, rn) = self.interface_nodes(index, a);
                        let pen = interface_penalty(
                            &work[p.left].prim[ln],
                            &work[p.right].prim[rn],
                            &theta[p.left][ln],
                            &theta[p.right][rn],
                            &geom.normal[a],
                            self.mode,
                            beta,
                            gas,
                        )?;
                        let (node, g) = if left { (ln, pen.g_q_left) } else { (rn, pen.g_q_right) };
                        let s = inv_end * geom.area[a];
                        for k in 0..5 {
                            dq[node][k] += s * g[k];
                        }
                        if left {
                            diag.penalty_dissipation +=
                                mesh.face_weight(face, node) * geom.area[a] * pen.dissipation;
                        }
                    }
                }
                FaceLink::Boundary(b) => {
                    let geom = &self.boundary_geom[b];
                    let nodes = layout.face_nodes(face);
                    for (a, &node) in nodes.iter().enumerate() {
                        let nrm = &geom.normal[a];
                        let area = geom.area[a];
                        let weight = mesh.face_weight(face, node) * area;
                        let v = &mine.prim[node];
                        let g = match &self.boundary[b] {
                            ResolvedBc::Wall { spec, velocity } => {
                                let pen = wall_penalty(v, &th[node], spec, &velocity[a], nrm, t, gas)
                                    .map_err(|err| SolverError::Inadmissible {
                                        element: e,
                                        node,
                                        source: Box::new(err),
                                    })?;
                                diag.heat += weight * pen.heat;
                                diag.penalty_dissipation += weight * pen.dissipation;
                                pen.g_q
                            }
                            ResolvedBc::FarField { point, w } => {
                                let s = &mine.point[node];
                                let wi = &mine.w[node];
                                let f = inviscid_flux_point(s, nrm, gas);
                                let fs = es_flux_point(s, point, wi, w, nrm, gas);
                                let g: [f64; 5] = std::array::from_fn(|k| f[k] - fs[k]);
                                // full entropy contribution of this node
                                let mut c = potential_flux(v, nrm, gas) - dot5(wi, &fs);
                                if viscous {
                                    let fvn: [f64; 5] = std::array::from_fn(|k| {
                                        nrm[0] * fv[node][0][k] + nrm[1] * fv[node][1][k] + nrm[2] * fv[node][2][k]
                                    });
                                    c += dot5(wi, &fvn);
                                    c += (0..5).map(|k| fvn[k] * 0.5 * (w[k] - wi[k])).sum::<f64>();
                                }
                                diag.far_field += weight * c;
                                g
                            }
                        };
                        let s = inv_end * area;
                        for k in 0..5 {
                            dq[node][k] += s * g[k];
                        }
                    }
                }
            }
        }

        let force = self.body_force;
        let forced = force != [0.0; 3];
        for (i, d) in dq.iter_mut().enumerate() {
            let inv_j = 1.0 / el.jac[i];
            for x in d.iter_mut() {
                *x *= inv_j;
            }
            if forced {
                let v = &mine.prim[i];
                d[1] += force[0];
                d[2] += force[1];
                d[3] += force[2];
                d[4] += force[0] * v[1] + force[1] * v[2] + force[2] * v[3];
            }
        }
        Ok(diag)
    }

    /// Pressure plus viscous force exerted by the fluid on the faces carrying
    /// each tag: `Σ (p n - F^V_n)` over the face quadrature.
    pub fn wall_forces(&self, q: &[[f64; 5]], tags: &[String]) -> Result<Vec<[f64; 3]>> {
        let work = self.prepare(q)?;
        let mut forces = vec![[0.0; 3]; tags.len()];
        let mut theta_cache: HashMap<usize, Vec<NodeGradient>> = HashMap::new();
        for (b, bf) in self.mesh.boundaries.iter().enumerate() {
            let Some(slot) = tags.iter().position(|t| *t == bf.tag) else {
                continue;
            };
            if !theta_cache.contains_key(&bf.element) {
                theta_cache.insert(bf.element, self.element_gradients(bf.element, &work)?);
            }
            let theta = &theta_cache[&bf.element];
            let geom = &self.boundary_geom[b];
            for (a, &node) in self.mesh.layout.face_nodes(bf.face).iter().enumerate() {
                let v = &work[bf.element].prim[node];
                let s = &work[bf.element].point[node];
                let n = &geom.normal[a];
                let weight = self.mesh.face_weight(bf.face, node) * geom.area[a];
                let fv = viscous_fluxes(v, &theta[node], &self.gas);
                for c in 0..3 {
                    let fvn = n[0] * fv[0][c + 1] + n[1] * fv[1][c + 1] + n[2] * fv[2][c + 1];
                    forces[slot][c] += weight * (s.p * n[c] - fvn);
                }
            }
        }
        Ok(forces)
    }
}
