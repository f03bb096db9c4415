//! Element-coupling penalties on conforming interior faces. The structure is
//! the wall treatment with the neighbour state in place of the ghost states.

use crate::error::{Result, SolverError};
use crate::gas::{
    dot5, ec_flux_point, entropy_vars, es_dissipation, inviscid_flux_point, GasParameters,
    InviscidMode, PointState, Primitive,
};
use crate::viscous::{assemble_c_matrices, viscous_fluxes, NodeGradient};

/// Two element faces glued together. `node_map[a]` is the position in the
/// right face's node list matching position `a` of the left face's list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacePairing {
    pub left: usize,
    pub left_face: usize,
    pub right: usize,
    pub right_face: usize,
    pub node_map: Vec<usize>,
}

impl FacePairing {
    /// Checks that the map is a bijection onto `0..n`.
    pub fn validate(&self, nodes_per_face: usize) -> Result<()> {
        if self.node_map.len() != nodes_per_face {
            return Err(SolverError::MismatchedFaces(format!(
                "face pairing {}:{} <-> {}:{} maps {} of {} nodes",
                self.left,
                self.left_face,
                self.right,
                self.right_face,
                self.node_map.len(),
                nodes_per_face
            )));
        }
        let mut seen = vec![false; nodes_per_face];
        for &b in &self.node_map {
            if b >= nodes_per_face || seen[b] {
                return Err(SolverError::MismatchedFaces(format!(
                    "face pairing {}:{} <-> {}:{} is not a bijection",
                    self.left, self.left_face, self.right, self.right_face
                )));
            }
            seen[b] = true;
        }
        Ok(())
    }
}

/// Penalties at one matched node pair, per unit area, with `n` the unit
/// normal pointing out of the left element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePenalty {
    pub g_q_left: [f64; 5],
    /// `½(w_R - w_L)`; the left gradient of direction `m` receives `n_m g_Θ`.
    pub g_theta_left: [f64; 5],
    pub g_q_right: [f64; 5],
    /// `½(w_L - w_R)`, paired with the right element's normal `-n`.
    pub g_theta_right: [f64; 5],
    /// Entropy removed at this node pair (≤ 0, zero in conservative mode).
    pub dissipation: f64,
}

/// Gradient-equation jumps `(½(w_R - w_L), ½(w_L - w_R))`.
pub fn interface_gradient_jumps(w_left: &[f64; 5], w_right: &[f64; 5]) -> ([f64; 5], [f64; 5]) {
    let a = std::array::from_fn(|k| 0.5 * (w_right[k] - w_left[k]));
    let b = std::array::from_fn(|k| 0.5 * (w_left[k] - w_right[k]));
    (a, b)
}

/// Full interface penalty. `beta` is the interior-penalty coefficient used in
/// stable mode. Gradients must include their face penalties.
#[allow(clippy::too_many_arguments)]
pub fn interface_penalty(
    v_left: &Primitive,
    v_right: &Primitive,
    theta_left: &NodeGradient,
    theta_right: &NodeGradient,
    n: &[f64; 3],
    mode: InviscidMode,
    beta: f64,
    gas: &GasParameters,
) -> Result<InterfacePenalty> {
    for v in [v_left, v_right] {
        if !(v[0] > 0.0) {
            return Err(SolverError::NonPositiveDensity { rho: v[0] });
        }
        if !(v[4] > 0.0) {
            return Err(SolverError::NonPositiveTemperature { temperature: v[4] });
        }
    }
    let sl = PointState::from_prim(v_left, gas);
    let sr = PointState::from_prim(v_right, gas);
    let wl = entropy_vars(v_left, gas);
    let wr = entropy_vars(v_right, gas);

    let mut f_star = ec_flux_point(&sl, &sr, n, gas);
    let mut dissipation = 0.0;
    if mode == InviscidMode::Stable {
        let d = es_dissipation(&sl, &sr, &wl, &wr, n, gas);
        for k in 0..5 {
            f_star[k] -= 0.5 * d[k];
        }
        let dw: [f64; 5] = std::array::from_fn(|k| wr[k] - wl[k]);
        dissipation -= 0.5 * dot5(&dw, &d);
    }
    let fl = inviscid_flux_point(&sl, n, gas);
    let fr = inviscid_flux_point(&sr, n, gas);
    let mut g_left: [f64; 5] = std::array::from_fn(|k| fl[k] - f_star[k]);
    let mut g_right: [f64; 5] = std::array::from_fn(|k| f_star[k] - fr[k]);

    if gas.mu > 0.0 || gas.kappa > 0.0 {
        let a = viscous_fluxes(v_left, theta_left, gas);
        let b = viscous_fluxes(v_right, theta_right, gas);
        for k in 0..5 {
            let fl_n = n[0] * a[0][k] + n[1] * a[1][k] + n[2] * a[2][k];
            let fr_n = n[0] * b[0][k] + n[1] * b[1][k] + n[2] * b[2][k];
            let half = 0.5 * (fr_n - fl_n);
            g_left[k] += half;
            g_right[k] += half;
        }
        if mode == InviscidMode::Stable && beta > 0.0 {
            let l = (assemble_c_matrices(v_left, gas).normal(n)
                + assemble_c_matrices(v_right, gas).normal(n))
                * (-0.5 * beta);
            let jump = nalgebra::Vector5::from(std::array::from_fn::<f64, 5, _>(|k| wl[k] - wr[k]));
            let m = l * jump;
            for k in 0..5 {
                g_left[k] += m[k];
                g_right[k] -= m[k];
            }
            dissipation += jump.dot(&m);
        }
    }
    let (gt_l, gt_r) = interface_gradient_jumps(&wl, &wr);
    Ok(InterfacePenalty {
        g_q_left: g_left,
        g_theta_left: gt_l,
        g_q_right: g_right,
        g_theta_right: gt_r,
        dissipation,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gas::testing::{gas, random_prim, random_unit};
    use crate::gas::{dot3, potential_flux};

    fn random_theta(rng: &mut ChaCha8Rng) -> NodeGradient {
        std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    fn with_jump(theta: &NodeGradient, jump: &[f64; 5], n: &[f64; 3]) -> NodeGradient {
        std::array::from_fn(|m| std::array::from_fn(|k| theta[m][k] + n[m] * jump[k]))
    }

    /// Entropy contribution of both sides at one node pair, including the
    /// volume boundary terms of each element.
    fn pair_entropy(
        vl: &Primitive,
        vr: &Primitive,
        tl: &NodeGradient,
        tr: &NodeGradient,
        n: &[f64; 3],
        mode: InviscidMode,
        beta: f64,
        g: &GasParameters,
    ) -> (f64, f64) {
        let wl = entropy_vars(vl, g);
        let wr = entropy_vars(vr, g);
        let (jl, jr) = interface_gradient_jumps(&wl, &wr);
        let m = n.map(|x| -x);
        let tl = with_jump(tl, &jl, n);
        let tr = with_jump(tr, &jr, &m);
        let p = interface_penalty(vl, vr, &tl, &tr, n, mode, beta, g).unwrap();
        let side = |v: &Primitive, w: &[f64; 5], th: &NodeGradient, nn: &[f64; 3], gq: &[f64; 5], gt: &[f64; 5]| {
            let s = PointState::from_prim(v, g);
            let f = inviscid_flux_point(&s, nn, g);
            let fv = viscous_fluxes(v, th, g);
            let fv_n: [f64; 5] = std::array::from_fn(|k| nn[0] * fv[0][k] + nn[1] * fv[1][k] + nn[2] * fv[2][k]);
            -(dot5(w, &f) - potential_flux(v, nn, g)) + dot5(w, &fv_n) + dot5(w, gq) + dot5(&fv_n, gt)
        };
        let total = side(vl, &wl, &tl, n, &p.g_q_left, &p.g_theta_left)
            + side(vr, &wr, &tr, &m, &p.g_q_right, &p.g_theta_right);
        (total, p.dissipation)
    }

    #[test]
    fn continuous_data_gives_zero_penalties() {
        let g = gas();
        let v = [1.2, 0.3, -0.1, 0.4, 1.1];
        let th = [[0.1, 0.2, 0.3, 0.4, 0.5]; 3];
        for mode in [InviscidMode::Conservative, InviscidMode::Stable] {
            let p = interface_penalty(&v, &v, &th, &th, &[0.0, 0.6, 0.8], mode, 2.0, &g).unwrap();
            for k in 0..5 {
                assert!(p.g_q_left[k].abs() < 1e-14 && p.g_q_right[k].abs() < 1e-14);
            }
            assert_eq!(p.g_theta_left, [0.0; 5]);
            assert_eq!(p.g_theta_right, [0.0; 5]);
        }
    }

    #[test]
    fn penalties_conserve() {
        // left and right volume boundary fluxes f_n(q_L) and -f_n(q_R) cancel
        // against the penalties, leaving f* - f* = 0
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..500 {
            let vl = random_prim(&mut rng);
            let vr = random_prim(&mut rng);
            let n = random_unit(&mut rng);
            let tl = random_theta(&mut rng);
            let tr = random_theta(&mut rng);
            for mode in [InviscidMode::Conservative, InviscidMode::Stable] {
                let p = interface_penalty(&vl, &vr, &tl, &tr, &n, mode, 1.5, &g).unwrap();
                let sl = PointState::from_prim(&vl, &g);
                let sr = PointState::from_prim(&vr, &g);
                let fl = inviscid_flux_point(&sl, &n, &g);
                let fr = inviscid_flux_point(&sr, &n, &g);
                let a = viscous_fluxes(&vl, &tl, &g);
                let b = viscous_fluxes(&vr, &tr, &g);
                for k in 0..5 {
                    let fvl = dot3(&n, &[a[0][k], a[1][k], a[2][k]]);
                    let fvr = dot3(&n, &[b[0][k], b[1][k], b[2][k]]);
                    // net: (-f_L + F_L) + (f_R - F_R) + penalties
                    let net = -fl[k] + fvl + fr[k] - fvr + p.g_q_left[k] + p.g_q_right[k];
                    assert!(net.abs() < 1e-12 * (1.0 + fl[k].abs() + fr[k].abs()), "{net}");
                }
            }
        }
    }

    #[test]
    fn entropy_neutral_or_dissipative() {
        let g = gas();
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..1000 {
            let vl = random_prim(&mut rng);
            let vr = random_prim(&mut rng);
            let n = random_unit(&mut rng);
            let tl = random_theta(&mut rng);
            let tr = random_theta(&mut rng);
            let (e, d) = pair_entropy(&vl, &vr, &tl, &tr, &n, InviscidMode::Conservative, 0.0, &g);
            assert!(e.abs() < 1e-11, "{e}");
            assert_eq!(d, 0.0);
            let (e, d) = pair_entropy(&vl, &vr, &tl, &tr, &n, InviscidMode::Stable, 2.0, &g);
            assert!(d <= 1e-14);
            assert!((e - d).abs() < 1e-11 * (1.0 + d.abs()), "{e} {d}");
        }
    }

    #[test]
    fn pairing_validation() {
        let ok = FacePairing { left: 0, left_face: 1, right: 1, right_face: 0, node_map: vec![1, 0, 3, 2] };
        assert!(ok.validate(4).is_ok());
        let bad = FacePairing { node_map: vec![0, 0, 1, 2], ..ok.clone() };
        assert!(matches!(bad.validate(4), Err(SolverError::MismatchedFaces(_))));
        assert!(ok.validate(9).is_err());
    }
}
