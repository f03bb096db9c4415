//! Viscous coefficient matrices in entropy variables, viscous fluxes and the
//! LDG gradient equation.

use nalgebra::Matrix5;

use crate::error::Result;
use crate::gas::{dot3, GasParameters, Primitive};
use crate::sbp::{face_direction, face_sign, tensor_apply, Operator1D, TensorLayout};

/// Entropy-variable gradient at one node, `theta[m]` is `∂W/∂x_m`.
pub type NodeGradient = [[f64; 5]; 3];

/// The 3x3 block array `C_mj` with `F^V_m = Σ_j C_mj ∂W/∂x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrices {
    pub blocks: [[Matrix5<f64>; 3]; 3],
}

impl CMatrices {
    pub fn block(&self, m: usize, j: usize) -> &Matrix5<f64> {
        &self.blocks[m][j]
    }

    /// `C_nn = Σ_mj n_m n_j C_mj`.
    pub fn normal(&self, n: &[f64; 3]) -> Matrix5<f64> {
        let mut out = Matrix5::zeros();
        for m in 0..3 {
            for j in 0..3 {
                out += self.blocks[m][j] * (n[m] * n[j]);
            }
        }
        out
    }

    /// `Σ_j C_mj Θ_j`.
    pub fn flux(&self, theta: &NodeGradient, m: usize) -> [f64; 5] {
        let mut out = [0.0; 5];
        for j in 0..3 {
            let b = &self.blocks[m][j];
            for r in 0..5 {
                for c in 0..5 {
                    out[r] += b[(r, c)] * theta[j][c];
                }
            }
        }
        out
    }

    /// `Σ_mj Θ_mᵀ C_mj Θ_j`.
    pub fn quadratic(&self, theta: &NodeGradient) -> f64 {
        (0..3)
            .map(|m| {
                let f = self.flux(theta, m);
                (0..5).map(|k| theta[m][k] * f[k]).sum::<f64>()
            })
            .sum()
    }

    /// The assembled 15x15 block matrix.
    pub fn assembled(&self) -> nalgebra::DMatrix<f64> {
        let mut big = nalgebra::DMatrix::zeros(15, 15);
        for m in 0..3 {
            for j in 0..3 {
                big.view_mut((5 * m, 5 * j), (5, 5))
                    .copy_from(&self.blocks[m][j]);
            }
        }
        big
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Closed-form `C_mj` at a primitive state. Velocity rows use `μT`, the
/// energy-energy entry adds `κT²` on the diagonal blocks.
pub fn assemble_c_matrices(v: &Primitive, gas: &GasParameters) -> CMatrices {
    let t = v[4];
    let u = [v[1], v[2], v[3]];
    let u2 = dot3(&u, &u);
    let mt = gas.mu * t;
    let kt2 = gas.kappa * t * t;
    let blocks = std::array::from_fn(|m| {
        std::array::from_fn(|j| {
            let mut c = Matrix5::zeros();
            for i in 0..3 {
                for k in 0..3 {
                    c[(i + 1, k + 1)] = mt
                        * (delta(j, m) * delta(i, k) + delta(j, i) * delta(k, m)
                            - 2.0 / 3.0 * delta(i, m) * delta(j, k));
                }
                c[(i + 1, 4)] =
                    mt * (delta(j, m) * u[i] + delta(j, i) * u[m] - 2.0 / 3.0 * delta(i, m) * u[j]);
                c[(4, i + 1)] =
                    mt * (delta(j, m) * u[i] + u[j] * delta(i, m) - 2.0 / 3.0 * u[m] * delta(j, i));
            }
            c[(4, 4)] = mt * (delta(j, m) * u2 + u[m] * u[j] / 3.0) + kt2 * delta(j, m);
            c
        })
    });
    CMatrices { blocks }
}

/// `F^V_m = Σ_j C_mj Θ_j` for one direction `m`.
pub fn viscous_flux(v: &Primitive, theta: &NodeGradient, m: usize, gas: &GasParameters) -> [f64; 5] {
    assemble_c_matrices(v, gas).flux(theta, m)
}

/// All three viscous fluxes evaluated through primitive gradients; equal to
/// `C·Θ` but without forming the matrices.
pub fn viscous_fluxes(v: &Primitive, theta: &NodeGradient, gas: &GasParameters) -> [[f64; 5]; 3] {
    let t = v[4];
    let u = [v[1], v[2], v[3]];
    // ∂U_k/∂x_j = T(Θ_j,k+1 + U_k Θ_j,5), ∂T/∂x_j = T² Θ_j,5
    let mut grad_u = [[0.0; 3]; 3];
    let mut grad_t = [0.0; 3];
    for j in 0..3 {
        for k in 0..3 {
            grad_u[k][j] = t * (theta[j][k + 1] + u[k] * theta[j][4]);
        }
        grad_t[j] = t * t * theta[j][4];
    }
    primitive_viscous_fluxes(&u, &grad_u, &grad_t, gas)
}

/// Classical viscous fluxes from velocity gradients `grad_u[i][j] = ∂U_i/∂x_j`
/// and the temperature gradient.
pub fn primitive_viscous_fluxes(
    u: &[f64; 3],
    grad_u: &[[f64; 3]; 3],
    grad_t: &[f64; 3],
    gas: &GasParameters,
) -> [[f64; 5]; 3] {
    let div = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
    let mut tau = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            tau[i][j] = gas.mu * (grad_u[i][j] + grad_u[j][i] - 2.0 / 3.0 * delta(i, j) * div);
        }
    }
    std::array::from_fn(|m| {
        [
            0.0,
            tau[0][m],
            tau[1][m],
            tau[2][m],
            u[0] * tau[0][m] + u[1] * tau[1][m] + u[2] * tau[2][m] + gas.kappa * grad_t[m],
        ]
    })
}

/// A face contribution to the gradient equation at one node: the outward
/// area-scaled normal `N` and the jump `½(w_ext - w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPenalty {
    pub node: usize,
    pub face: usize,
    pub normal: [f64; 3],
    pub half_jump: [f64; 5],
}

/// Solves `Θ_m = (1/J)[Σ_l Ja^l_m D_l w + P⁻¹ N_m ½(w_ext - w)]` on one element.
///
/// `ja[node][l]` is the contravariant vector `J a^l`; penalties carry their own
/// area-scaled outward normal.
pub fn ldg_gradients(
    op: &Operator1D,
    layout: &TensorLayout,
    jac: &[f64],
    ja: &[[[f64; 3]; 3]],
    w: &[[f64; 5]],
    penalties: &[GradientPenalty],
) -> Result<Vec<NodeGradient>> {
    let mut theta = vec![[[0.0; 5]; 3]; layout.num_nodes()];
    for l in 0..3 {
        let dw = tensor_apply(&op.d, l, w, layout)?;
        for (node, th) in theta.iter_mut().enumerate() {
            let a = &ja[node][l];
            for m in 0..3 {
                for k in 0..5 {
                    th[m][k] += a[m] * dw[node][k];
                }
            }
        }
    }
    let inv_end = 1.0 / op.end_weight();
    for pen in penalties {
        let th = &mut theta[pen.node];
        for m in 0..3 {
            for k in 0..5 {
                th[m][k] += inv_end * pen.normal[m] * pen.half_jump[k];
            }
        }
    }
    for (node, th) in theta.iter_mut().enumerate() {
        let inv_j = 1.0 / jac[node];
        for row in th.iter_mut() {
            for x in row.iter_mut() {
                *x *= inv_j;
            }
        }
    }
    Ok(theta)
}

/// Outward area-scaled normal of `face` at `node`: `±Ja^dir`.
pub fn face_area_normal(ja: &[[f64; 3]; 3], face: usize) -> [f64; 3] {
    let s = face_sign(face);
    ja[face_direction(face)].map(|x| s * x)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gas::testing::{gas, random_prim};
    use crate::gas::{dw_dv, entropy_vars};
    use crate::sbp::build_sbp_1d;

    fn random_gradients(rng: &mut ChaCha8Rng) -> ([[f64; 3]; 3], [f64; 3], [f64; 3]) {
        let gu = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let gt = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let grho = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        (gu, gt, grho)
    }

    /// Θ_j from primitive gradients via ∂W/∂V.
    fn theta_from_primitive(
        v: &Primitive,
        gu: &[[f64; 3]; 3],
        gt: &[f64; 3],
        grho: &[f64; 3],
        g: &GasParameters,
    ) -> NodeGradient {
        let j = dw_dv(v, g);
        std::array::from_fn(|m| {
            let dv = nalgebra::Vector5::new(grho[m], gu[0][m], gu[1][m], gu[2][m], gt[m]);
            let th = j * dv;
            [th[0], th[1], th[2], th[3], th[4]]
        })
    }

    #[test]
    fn inviscid_gas_gives_zero_blocks() {
        let g = gas().inviscid();
        let c = assemble_c_matrices(&[1.0, 0.3, 0.2, 0.1, 2.0], &g);
        for m in 0..3 {
            for j in 0..3 {
                assert_eq!(c.blocks[m][j], Matrix5::zeros());
            }
        }
    }

    #[test]
    fn block_symmetry_and_semidefiniteness() {
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let c = assemble_c_matrices(&random_prim(&mut rng), &g);
            for m in 0..3 {
                for j in 0..3 {
                    let diff = c.blocks[m][j] - c.blocks[j][m].transpose();
                    assert!(diff.amax() <= 1e-13);
                    for k in 0..5 {
                        assert_eq!(c.blocks[m][j][(0, k)], 0.0);
                        assert_eq!(c.blocks[m][j][(k, 0)], 0.0);
                    }
                }
            }
            let big = c.assembled();
            let eig = big.clone().symmetric_eigen();
            assert!(eig.eigenvalues.min() >= -1e-12 * big.amax());
        }
    }

    #[test]
    fn entropy_form_matches_primitive_form() {
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..500 {
            let v = random_prim(&mut rng);
            let (gu, gt, grho) = random_gradients(&mut rng);
            let theta = theta_from_primitive(&v, &gu, &gt, &grho, &g);
            let oracle = primitive_viscous_fluxes(&[v[1], v[2], v[3]], &gu, &gt, &g);
            let fast = viscous_fluxes(&v, &theta, &g);
            let c = assemble_c_matrices(&v, &g);
            for m in 0..3 {
                let slow = c.flux(&theta, m);
                for k in 0..5 {
                    let scale = 1.0 + oracle[m][k].abs();
                    assert!((slow[k] - oracle[m][k]).abs() <= 1e-10 * scale);
                    assert!((fast[m][k] - oracle[m][k]).abs() <= 1e-10 * scale);
                }
                assert_eq!(slow[0], 0.0);
            }
            assert!(c.quadratic(&theta) >= -1e-12);
        }
    }

    #[test]
    fn pure_temperature_gradient_heat_flux() {
        let g = gas();
        let v = [1.2, 0.0, 0.0, 0.0, 1.7];
        let gt = [0.3, -0.5, 0.9];
        let theta = theta_from_primitive(&v, &[[0.0; 3]; 3], &gt, &[0.0; 3], &g);
        for m in 0..3 {
            let f = viscous_flux(&v, &theta, m, &g);
            assert!((f[4] - g.kappa * gt[m]).abs() < 1e-13);
            assert_eq!(&f[..4], &[0.0; 4]);
        }
        assert_eq!(viscous_flux(&v, &[[0.0; 5]; 3], 0, &g), [0.0; 5]);
    }

    fn cartesian_element(n: usize, h: f64) -> (Vec<f64>, Vec<[[f64; 3]; 3]>) {
        // [-1,1]^3 scaled by h/2: x = h/2 ξ, J = (h/2)^3, Ja^l = (h/2)^2 e_l
        let s = 0.5 * h;
        let jac = vec![s * s * s; n * n * n];
        let ja = vec![[[s * s, 0.0, 0.0], [0.0, s * s, 0.0], [0.0, 0.0, s * s]]; n * n * n];
        (jac, ja)
    }

    #[test]
    fn gradients_exact_for_linear_fields() {
        let op = build_sbp_1d(3).unwrap();
        let layout = TensorLayout::new(4);
        let h = 0.7;
        let (jac, ja) = cartesian_element(4, h);
        let slope = [[0.1, -0.2, 0.3], [1.0, 0.0, 0.5], [0.0, 0.0, 0.0], [-0.4, 0.2, 0.1], [0.05, 0.06, -0.07]];
        let w: Vec<[f64; 5]> = (0..64)
            .map(|node| {
                let [i, j, k] = layout.ijk(node);
                let x = [i, j, k].map(|a| 0.5 * h * op.nodes[a]);
                std::array::from_fn(|c| dot3(&slope[c], &x) + c as f64)
            })
            .collect();
        let theta = ldg_gradients(&op, &layout, &jac, &ja, &w, &[]).unwrap();
        for th in &theta {
            for m in 0..3 {
                for c in 0..5 {
                    assert!((th[m][c] - slope[c][m]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn face_penalty_is_local_to_its_node() {
        let op = build_sbp_1d(2).unwrap();
        let layout = TensorLayout::new(3);
        let (jac, ja) = cartesian_element(3, 2.0);
        let w = vec![[0.0; 5]; 27];
        let node = layout.face_nodes(1)[4];
        let pen = GradientPenalty {
            node,
            face: 1,
            normal: face_area_normal(&ja[node], 1),
            half_jump: [0.0, 0.0, 0.0, 0.0, 2.0],
        };
        let theta = ldg_gradients(&op, &layout, &jac, &ja, &w, &[pen]).unwrap();
        for (k, th) in theta.iter().enumerate() {
            if k == node {
                assert!((th[0][4] - 2.0 / op.end_weight()).abs() < 1e-14);
                assert_eq!(th[1][4], 0.0);
            } else {
                assert_eq!(*th, [[0.0; 5]; 3]);
            }
        }
    }

    #[test]
    fn no_penalty_cartesian_reduces_to_derivative() {
        let op = build_sbp_1d(4).unwrap();
        let layout = TensorLayout::new(5);
        let (jac, ja) = cartesian_element(5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let g = gas();
        let w: Vec<[f64; 5]> = (0..125).map(|_| entropy_vars(&random_prim(&mut rng), &g)).collect();
        let theta = ldg_gradients(&op, &layout, &jac, &ja, &w, &[]).unwrap();
        for l in 0..3 {
            let dw = tensor_apply(&op.d, l, &w, &layout).unwrap();
            for node in 0..125 {
                for c in 0..5 {
                    assert!((theta[node][l][c] - dw[node][c]).abs() < 1e-12);
                }
            }
        }
    }
}
