//! Shared helpers for the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix5, Vector5};

use esbp::gas::{
    cons_to_prim, ec_flux, entropy_vars, es_flux, inviscid_flux, prim_to_cons, GasParameters, InviscidMode, Primitive,
};
use esbp::mesh::build_box_mesh;
use esbp::rhs::{BoundaryCondition, Discretization, Penalty};
use esbp::sbp::build_sbp_1d;
use esbp::viscous::{assemble_c_matrices, viscous_fluxes};
use esbp::wall::{manufacture_wall_gradient, wall_viscous_state, HeatFlow, WallMotion, WallSpec};

/// Two affine elements along x1 with walls at both x1 ends and self-periodic
/// faces in x2 and x3.
pub struct TwoElementCase {
    pub p: usize,
    pub lengths: [f64; 3],
    pub gas: GasParameters,
    pub mode: InviscidMode,
    pub wall_min: WallSpec,
    pub wall_max: WallSpec,
    pub interface_beta: f64,
}

impl TwoElementCase {
    pub fn new(mode: InviscidMode) -> Self {
        let stable = mode == InviscidMode::Stable;
        TwoElementCase {
            p: 2,
            lengths: [1.0, 0.7, 0.45],
            gas: GasParameters::with_reference(1.4, 1.0, 0.03, 0.72, 1.1, 0.9).unwrap(),
            mode,
            wall_min: WallSpec {
                motion: WallMotion::Fixed,
                heat: HeatFlow::Constant { value: 0.02 },
                beta: if stable { 3.0 } else { 0.0 },
                mode,
            },
            wall_max: WallSpec {
                motion: WallMotion::Translating { velocity: [0.0, 0.3, -0.1] },
                heat: HeatFlow::Adiabatic,
                beta: if stable { 2.0 } else { 0.0 },
                mode,
            },
            interface_beta: if stable { 1.5 } else { 0.0 },
        }
    }

    pub fn discretization(&self) -> Discretization {
        let mesh = build_box_mesh([2, 1, 1], self.lengths, self.p, [false, true, true]).unwrap();
        let fixed = |b: f64| if b > 0.0 { Penalty::Fixed(b) } else { Penalty::Off };
        let mut bcs = HashMap::new();
        bcs.insert("xmin".to_string(), BoundaryCondition::Wall { spec: self.wall_min, penalty: fixed(self.wall_min.beta) });
        bcs.insert("xmax".to_string(), BoundaryCondition::Wall { spec: self.wall_max, penalty: fixed(self.wall_max.beta) });
        Discretization::new(mesh, self.gas, self.mode, &bcs, fixed(self.interface_beta)).unwrap()
    }

    /// Smooth, non-polynomial state with distinct values on either side of
    /// every face.
    pub fn state(&self, disc: &Discretization, seed: f64) -> Vec<[f64; 5]> {
        disc.mesh
            .elements
            .iter()
            .enumerate()
            .flat_map(|(e, el)| {
                el.coords.iter().map(move |x| {
                    let s = seed + e as f64 * 0.37;
                    let v: Primitive = [
                        1.0 + 0.2 * (3.0 * x[0] + s).sin() * (2.0 * x[1]).cos(),
                        0.3 * (2.0 * x[2] + s).cos(),
                        -0.2 * (x[0] * x[1] + s).sin(),
                        0.15 * (4.0 * x[0] - x[2]).cos(),
                        1.2 + 0.1 * (x[0] + 2.0 * x[1] + 3.0 * x[2] + s).sin(),
                    ];
                    v
                })
            })
            .map(|v| prim_to_cons(&v, &self.gas).unwrap())
            .collect()
    }

    /// Right-hand side assembled from dense Kronecker-product operators, each
    /// element seeing only its own outward normals.
    pub fn dense_rhs(&self, q: &[[f64; 5]], t: f64) -> Vec<[f64; 5]> {
        let op = build_sbp_1d(self.p).unwrap();
        let n = op.n();
        let nn = n * n * n;
        let h = [self.lengths[0] / 2.0, self.lengths[1], self.lengths[2]];
        let id = DMatrix::<f64>::identity(n, n);
        let d1: DMatrix<f64> = DMatrix::from_fn(n, n, |i, j| op.d[(i, j)]);
        let dirs: [DMatrix<f64>; 3] = [
            d1.kronecker(&id).kronecker(&id) * (2.0 / h[0]),
            id.kronecker(&d1).kronecker(&id) * (2.0 / h[1]),
            id.kronecker(&id).kronecker(&d1) * (2.0 / h[2]),
        ];

        // face node lists and the matching node across each face
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut faces: Vec<(usize, [f64; 3], Vec<(usize, usize)>)> = Vec::new();
        for d in 0..3 {
            for side in 0..2 {
                let mut pairs = Vec::new();
                for a in 0..n {
                    for b in 0..n {
                        let at = |c: usize| match d {
                            0 => idx(c, a, b),
                            1 => idx(a, c, b),
                            _ => idx(a, b, c),
                        };
                        let own = at(if side == 0 { 0 } else { n - 1 });
                        let other = at(if side == 0 { n - 1 } else { 0 });
                        pairs.push((own, other));
                    }
                }
                let mut nrm = [0.0; 3];
                nrm[d] = if side == 0 { -1.0 } else { 1.0 };
                faces.push((2 * d + side, nrm, pairs));
            }
        }
        // face quadrature weight divided by volume weight: 1 / (w_end h_d / 2)
        let lift = |d: usize| 1.0 / (op.weights[0] * h[d] / 2.0);

        let gas = &self.gas;
        let prim: Vec<Primitive> = q.iter().map(|s| cons_to_prim(s, gas).unwrap()).collect();
        let w: Vec<[f64; 5]> = prim.iter().map(|v| entropy_vars(v, gas)).collect();
        let wall_of = |e: usize, face: usize| -> Option<&WallSpec> {
            match (e, face) {
                (0, 0) => Some(&self.wall_min),
                (1, 1) => Some(&self.wall_max),
                _ => None,
            }
        };
        // neighbour across a face: x faces couple the two elements, y and z
        // faces wrap onto the same element
        let neighbour = |e: usize, face: usize| if face < 2 { 1 - e } else { e };
        let wall_velocity = |spec: &WallSpec| spec.motion.velocity_at(&[0.0; 3]);

        // gradients
        let mut theta = vec![[[0.0; 5]; 3]; 2 * nn];
        for e in 0..2 {
            for k in 0..5 {
                let col = DVector::from_iterator(nn, (0..nn).map(|i| w[e * nn + i][k]));
                for m in 0..3 {
                    let d = &dirs[m] * &col;
                    for i in 0..nn {
                        theta[e * nn + i][m][k] = d[i];
                    }
                }
            }
            for (face, nrm, pairs) in &faces {
                let dir = face / 2;
                for &(own, other) in pairs {
                    let g = e * nn + own;
                    let ext: [f64; 5] = match wall_of(e, *face) {
                        Some(spec) => entropy_vars(&wall_viscous_state(&prim[g], &wall_velocity(spec)).unwrap(), gas),
                        None => w[neighbour(e, *face) * nn + other],
                    };
                    for m in 0..3 {
                        for k in 0..5 {
                            theta[g][m][k] += lift(dir) * nrm[m] * 0.5 * (ext[k] - w[g][k]);
                        }
                    }
                }
            }
        }
        let fv: Vec<[[f64; 5]; 3]> = (0..2 * nn).map(|g| viscous_fluxes(&prim[g], &theta[g], gas)).collect();

        let mut out = vec![[0.0; 5]; 2 * nn];
        for e in 0..2 {
            // volume: -Σ_l 2 (D_l ∘ F_l) 1 + Σ_l D_l F^V_l
            for l in 0..3 {
                let mut unit = [0.0; 3];
                unit[l] = 1.0;
                for i in 0..nn {
                    for kk in 0..nn {
                        let dik = dirs[l][(i, kk)];
                        if dik == 0.0 {
                            continue;
                        }
                        let f = ec_flux(&q[e * nn + i], &q[e * nn + kk], &unit, gas).unwrap();
                        for c in 0..5 {
                            out[e * nn + i][c] += -2.0 * dik * f[c] + dik * fv[e * nn + kk][l][c];
                        }
                    }
                }
            }
            // surfaces
            for (face, nrm, pairs) in &faces {
                let dir = face / 2;
                for &(own, other) in pairs {
                    let g = e * nn + own;
                    let v = &prim[g];
                    let f = inviscid_flux(&q[g], nrm, gas).unwrap();
                    let fv_n: [f64; 5] = std::array::from_fn(|c| (0..3).map(|m| nrm[m] * fv[g][m][c]).sum());
                    let mut pen = [0.0; 5];
                    if let Some(spec) = wall_of(e, *face) {
                        let un = v[1] * nrm[0] + v[2] * nrm[1] + v[3] * nrm[2];
                        let mirror: Primitive =
                            [v[0], v[1] - 2.0 * un * nrm[0], v[2] - 2.0 * un * nrm[1], v[3] - 2.0 * un * nrm[2], v[4]];
                        let qm = prim_to_cons(&mirror, gas).unwrap();
                        let fs = match self.mode {
                            InviscidMode::Conservative => ec_flux(&q[g], &qm, nrm, gas).unwrap(),
                            InviscidMode::Stable => es_flux(&q[g], &qm, nrm, gas).unwrap(),
                        };
                        let v_bv = wall_viscous_state(v, &wall_velocity(spec)).unwrap();
                        let th_bv = manufacture_wall_gradient(&theta[g], v, &v_bv, gas).unwrap();
                        let fb = viscous_fluxes(&v_bv, &th_bv, gas);
                        let w_bv = entropy_vars(&v_bv, gas);
                        let ip = ip_term(v, &v_bv, &w[g], &w_bv, spec.beta, nrm, gas);
                        for c in 0..5 {
                            let fb_n: f64 = (0..3).map(|m| nrm[m] * fb[m][c]).sum();
                            pen[c] = f[c] - fs[c] + 0.5 * (fb_n - fv_n[c]) + ip[c];
                        }
                        pen[4] -= v[4] * spec.heat.eval(t);
                    } else {
                        let ge = neighbour(e, *face) * nn + other;
                        let fs = match self.mode {
                            InviscidMode::Conservative => ec_flux(&q[g], &q[ge], nrm, gas).unwrap(),
                            InviscidMode::Stable => es_flux(&q[g], &q[ge], nrm, gas).unwrap(),
                        };
                        let beta = if self.mode == InviscidMode::Stable { self.interface_beta } else { 0.0 };
                        let ip = ip_term(v, &prim[ge], &w[g], &w[ge], beta, nrm, gas);
                        for c in 0..5 {
                            let fe_n: f64 = (0..3).map(|m| nrm[m] * fv[ge][m][c]).sum();
                            pen[c] = f[c] - fs[c] + 0.5 * (fe_n - fv_n[c]) + ip[c];
                        }
                    }
                    for c in 0..5 {
                        out[g][c] += lift(dir) * pen[c];
                    }
                }
            }
        }
        out
    }
}

/// `-β/2 (C_nn(v) + C_nn(v_ext)) (w - w_ext)`.
fn ip_term(
    v: &Primitive,
    v_ext: &Primitive,
    w: &[f64; 5],
    w_ext: &[f64; 5],
    beta: f64,
    n: &[f64; 3],
    gas: &GasParameters,
) -> [f64; 5] {
    if beta == 0.0 {
        return [0.0; 5];
    }
    let cnn = |v: &Primitive| -> Matrix5<f64> { assemble_c_matrices(v, gas).normal(n) };
    let l = (cnn(v) + cnn(v_ext)) * (-0.5 * beta);
    let jump = Vector5::from(std::array::from_fn::<f64, 5, _>(|k| w[k] - w_ext[k]));
    let r = l * jump;
    [r[0], r[1], r[2], r[3], r[4]]
}

pub fn max_abs(a: &[[f64; 5]]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn max_diff(a: &[[f64; 5]], b: &[[f64; 5]]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
