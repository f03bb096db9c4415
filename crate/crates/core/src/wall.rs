//! Entropy-consistent no-slip wall treatment: ghost states, the manufactured
//! boundary gradient and the wall penalty terms for arbitrary wall normals.
//!
//! All pointwise routines take the unit outward normal `n` of the wall. The
//! penalties returned are per unit face area; the caller scales them by the
//! face area element and the inverse boundary quadrature weight.

use nalgebra::Matrix5;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::gas::{
    dot3, dot5, dv_dw, dw_dv, ec_flux_point, entropy_vars, es_dissipation, inviscid_flux_point,
    potential_flux, Entropy, GasParameters, InviscidMode, PointState, Primitive,
};
use crate::viscous::{assemble_c_matrices, viscous_fluxes, NodeGradient};

/// Heat-entropy-flow `g(t) = κ (∂T/∂n) / T` prescribed on a wall.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeatFlow {
    #[default]
    Adiabatic,
    Constant { value: f64 },
    /// `amplitude · sin(2π frequency t)`.
    Sinusoid { amplitude: f64, frequency: f64 },
}

impl HeatFlow {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            HeatFlow::Adiabatic => 0.0,
            HeatFlow::Constant { value } => value,
            HeatFlow::Sinusoid {
                amplitude,
                frequency,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
        }
    }
}

/// Wall velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WallMotion {
    #[default]
    Fixed,
    Translating { velocity: [f64; 3] },
    /// Rigid rotation `ω a × (x - c)` about the axis `a` through `center`.
    Rotating {
        omega: f64,
        axis: [f64; 3],
        center: [f64; 3],
    },
}

impl WallMotion {
    pub fn velocity_at(&self, x: &[f64; 3]) -> [f64; 3] {
        match *self {
            WallMotion::Fixed => [0.0; 3],
            WallMotion::Translating { velocity } => velocity,
            WallMotion::Rotating {
                omega,
                axis,
                center,
            } => {
                let r = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                [
                    omega * (axis[1] * r[2] - axis[2] * r[1]),
                    omega * (axis[2] * r[0] - axis[0] * r[2]),
                    omega * (axis[0] * r[1] - axis[1] * r[0]),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSpec {
    pub motion: WallMotion,
    pub heat: HeatFlow,
    /// Interior-penalty coefficient (1/length), zero disables it.
    pub beta: f64,
    pub mode: InviscidMode,
}

impl WallSpec {
    pub fn adiabatic(mode: InviscidMode) -> Self {
        WallSpec {
            motion: WallMotion::Fixed,
            heat: HeatFlow::Adiabatic,
            beta: 0.0,
            mode,
        }
    }
}

/// Rejects wall velocities with a normal component.
pub fn check_wall_velocity(u_wall: &[f64; 3], n: &[f64; 3]) -> Result<()> {
    let un = dot3(u_wall, n);
    let mag = dot3(u_wall, u_wall).sqrt();
    if un.abs() > 1e-12 * mag.max(f64::MIN_POSITIVE) && un != 0.0 {
        return Err(SolverError::WallVelocityNotTangent {
            normal_component: un.abs(),
        });
    }
    Ok(())
}

fn check(v: &Primitive) -> Result<()> {
    if !(v[0] > 0.0) {
        return Err(SolverError::NonPositiveDensity { rho: v[0] });
    }
    if !(v[4] > 0.0) {
        return Err(SolverError::NonPositiveTemperature { temperature: v[4] });
    }
    Ok(())
}

/// Inviscid ghost state: velocity reflected through the tangent plane.
pub fn inviscid_mirror_state(v: &Primitive, n: &[f64; 3]) -> Result<Primitive> {
    check(v)?;
    let un = v[1] * n[0] + v[2] * n[1] + v[3] * n[2];
    Ok([
        v[0],
        v[1] - 2.0 * un * n[0],
        v[2] - 2.0 * un * n[1],
        v[3] - 2.0 * un * n[2],
        v[4],
    ])
}

/// Viscous ghost state `U^BV = -U + 2 U^wall`, density and temperature kept.
pub fn wall_viscous_state(v: &Primitive, u_wall: &[f64; 3]) -> Result<Primitive> {
    check(v)?;
    Ok([
        v[0],
        -v[1] + 2.0 * u_wall[0],
        -v[2] + 2.0 * u_wall[1],
        -v[3] + 2.0 * u_wall[2],
        v[4],
    ])
}

/// Boundary gradient: map Θ to primitive gradients, flip the density and
/// temperature gradients, map back with the ghost-state Jacobian.
pub fn manufacture_wall_gradient(
    theta: &NodeGradient,
    v: &Primitive,
    v_bv: &Primitive,
    gas: &GasParameters,
) -> Result<NodeGradient> {
    check(v)?;
    check(v_bv)?;
    let to_prim = dv_dw(v, gas);
    let to_entropy = dw_dv(v_bv, gas);
    let mut flip = Matrix5::identity();
    flip[(0, 0)] = -1.0;
    flip[(4, 4)] = -1.0;
    let map = to_entropy * flip * to_prim;
    Ok(std::array::from_fn(|j| {
        let th = map * nalgebra::Vector5::from(theta[j]);
        [th[0], th[1], th[2], th[3], th[4]]
    }))
}

/// `L = -β (C_nn(v) + C_nn(v_BV)) / 2`.
pub fn ip_dissipation_matrix(
    v: &Primitive,
    v_bv: &Primitive,
    beta: f64,
    n: &[f64; 3],
    gas: &GasParameters,
) -> Matrix5<f64> {
    if beta == 0.0 {
        return Matrix5::zeros();
    }
    let a = assemble_c_matrices(v, gas).normal(n);
    let b = assemble_c_matrices(v_bv, gas).normal(n);
    (a + b) * (-0.5 * beta)
}

/// Penalties at one wall node, per unit area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallPenalty {
    /// Added to the conserved-variable equation.
    pub g_q: [f64; 5],
    /// `½(w^BV - w)`; the gradient of direction `m` receives `n_m g_Θ`.
    pub g_theta: [f64; 5],
    /// `g(t)` at this node.
    pub heat: f64,
    /// Entropy removed by the stable flux and the interior penalty (≤ 0).
    pub dissipation: f64,
}

/// `½(w^BV - w)` for the gradient equation.
pub fn wall_gradient_jump(
    v: &Primitive,
    u_wall: &[f64; 3],
    gas: &GasParameters,
) -> Result<[f64; 5]> {
    let v_bv = wall_viscous_state(v, u_wall)?;
    let w = entropy_vars(v, gas);
    let w_bv = entropy_vars(&v_bv, gas);
    Ok(std::array::from_fn(|k| 0.5 * (w_bv[k] - w[k])))
}

/// Full wall penalty. `theta` is the node gradient including its own face
/// penalty; `t` is the current time for `g(t)`.
pub fn wall_penalty(
    v: &Primitive,
    theta: &NodeGradient,
    spec: &WallSpec,
    u_wall: &[f64; 3],
    n: &[f64; 3],
    t: f64,
    gas: &GasParameters,
) -> Result<WallPenalty> {
    let v_bi = inviscid_mirror_state(v, n)?;
    let v_bv = wall_viscous_state(v, u_wall)?;
    let w = entropy_vars(v, gas);
    let w_bv = entropy_vars(&v_bv, gas);
    let s = PointState::from_prim(v, gas);
    let s_bi = PointState::from_prim(&v_bi, gas);

    // inviscid: f_n(q) - f*(q, q^BI)
    let f = inviscid_flux_point(&s, n, gas);
    let mut f_star = ec_flux_point(&s, &s_bi, n, gas);
    let mut dissipation = 0.0;
    if spec.mode == InviscidMode::Stable {
        let w_bi = entropy_vars(&v_bi, gas);
        let d = es_dissipation(&s, &s_bi, &w, &w_bi, n, gas);
        for k in 0..5 {
            f_star[k] -= 0.5 * d[k];
        }
        dissipation += 0.5 * dot5(&w, &d);
    }
    let mut g_q: [f64; 5] = std::array::from_fn(|k| f[k] - f_star[k]);

    // viscous: ½(F^BV_n - F_n)
    if gas.mu > 0.0 || gas.kappa > 0.0 {
        let theta_bv = manufacture_wall_gradient(theta, v, &v_bv, gas)?;
        let fv = viscous_fluxes(v, theta, gas);
        let fv_bv = viscous_fluxes(&v_bv, &theta_bv, gas);
        for k in 0..5 {
            let own = n[0] * fv[0][k] + n[1] * fv[1][k] + n[2] * fv[2][k];
            let ghost = n[0] * fv_bv[0][k] + n[1] * fv_bv[1][k] + n[2] * fv_bv[2][k];
            g_q[k] += 0.5 * (ghost - own);
        }
        if spec.beta > 0.0 {
            let l = ip_dissipation_matrix(v, &v_bv, spec.beta, n, gas);
            let jump = nalgebra::Vector5::from(std::array::from_fn::<f64, 5, _>(|k| w[k] - w_bv[k]));
            let m = l * jump;
            for k in 0..5 {
                g_q[k] += m[k];
            }
            dissipation += dot5(&w, &[m[0], m[1], m[2], m[3], m[4]]);
        }
    }

    // heat-entropy flow source: -(0,0,0,0,1) T g(t)
    let heat = spec.heat.eval(t);
    g_q[4] -= v[4] * heat;

    Ok(WallPenalty {
        g_q,
        g_theta: std::array::from_fn(|k| 0.5 * (w_bv[k] - w[k])),
        heat,
        dissipation,
    })
}

/// Pointwise entropy contribution of a wall node, with the volume boundary
/// terms included: `n·ψ - wᵀf* + ½wᵀF^BV_n + ½(w^BV)ᵀF_n + wᵀM + g`.
///
/// Used to check the wall estimates; `theta` must already include the wall
/// gradient penalty.
pub fn wall_entropy_contribution(
    v: &Primitive,
    theta: &NodeGradient,
    spec: &WallSpec,
    u_wall: &[f64; 3],
    n: &[f64; 3],
    t: f64,
    gas: &GasParameters,
) -> Result<f64> {
    let pen = wall_penalty(v, theta, spec, u_wall, n, t, gas)?;
    let w: Entropy = entropy_vars(v, gas);
    let s = PointState::from_prim(v, gas);
    let f = inviscid_flux_point(&s, n, gas);
    let fv = viscous_fluxes(v, theta, gas);
    let fv_n: [f64; 5] = std::array::from_fn(|k| n[0] * fv[0][k] + n[1] * fv[1][k] + n[2] * fv[2][k]);
    // volume boundary terms: -F_n (inviscid) and wᵀF^V_n (viscous), then the
    // gradient penalty contracted with the viscous flux
    let entropy_flux = dot5(&w, &f) - potential_flux(v, n, gas);
    let grad_term: f64 = (0..5).map(|k| fv_n[k] * pen.g_theta[k]).sum();
    Ok(-entropy_flux + dot5(&w, &fv_n) + dot5(&w, &pen.g_q) + grad_term)
}
