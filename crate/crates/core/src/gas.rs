//! Ideal-gas thermodynamics, entropy variables, inviscid fluxes and the
//! entropy-conservative / entropy-stable two-point fluxes.
//!
//! Conventions: the mathematical entropy is `S = -ρ s` with
//! `s = c_v ln(T/T∞) - R ln(ρ/ρ∞)`. The entropy variables are
//! `W = (c_P - s - |U|²/(2T), U/T, -1/T)`, the potential is `Φ = ρR`, the
//! potential fluxes are `Ψ_m = ρ R U_m` and the entropy fluxes are
//! `F_m = -ρ s U_m`.
//!
//! Flux routines take a direction vector `n` and are linear in it, so they
//! accept both unit normals and area-scaled metric vectors.

use nalgebra::Matrix5;

use crate::error::{Result, SolverError};

pub type Conserved = [f64; 5];
/// `(ρ, U1, U2, U3, T)`.
pub type Primitive = [f64; 5];
pub type Entropy = [f64; 5];

#[inline]
pub fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn dot5(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasParameters {
    pub gamma: f64,
    pub r: f64,
    pub cp: f64,
    pub cv: f64,
    pub t_inf: f64,
    pub rho_inf: f64,
    pub mu: f64,
    pub prandtl: f64,
    pub kappa: f64,
}

impl GasParameters {
    pub fn new(gamma: f64, r: f64, mu: f64, prandtl: f64) -> Result<Self> {
        Self::with_reference(gamma, r, mu, prandtl, 1.0, 1.0)
    }

    pub fn with_reference(
        gamma: f64,
        r: f64,
        mu: f64,
        prandtl: f64,
        t_inf: f64,
        rho_inf: f64,
    ) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(SolverError::InvalidGas(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(SolverError::InvalidGas(format!("R must be positive, got {r}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(SolverError::InvalidGas(format!("mu must be non-negative, got {mu}")));
        }
        if !(prandtl > 0.0 && prandtl.is_finite()) {
            return Err(SolverError::InvalidGas(format!(
                "Prandtl number must be positive, got {prandtl}"
            )));
        }
        if !(t_inf > 0.0 && rho_inf > 0.0) {
            return Err(SolverError::InvalidGas(
                "reference temperature and density must be positive".into(),
            ));
        }
        let cv = r / (gamma - 1.0);
        let cp = cv + r;
        Ok(GasParameters {
            gamma,
            r,
            cp,
            cv,
            t_inf,
            rho_inf,
            mu,
            prandtl,
            kappa: cp * mu / prandtl,
        })
    }

    /// Same thermodynamics with the transport coefficients switched off.
    pub fn inviscid(&self) -> Self {
        GasParameters {
            mu: 0.0,
            kappa: 0.0,
            ..*self
        }
    }

    pub fn sound_speed(&self, t: f64) -> f64 {
        (self.gamma * self.r * t).sqrt()
    }
}

impl Default for GasParameters {
    fn default() -> Self {
        GasParameters::new(1.4, 1.0, 0.0, 0.72).expect("default gas is valid")
    }
}

fn check_admissible(rho: f64, t: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(SolverError::NonPositiveDensity { rho });
    }
    if !(t > 0.0) {
        return Err(SolverError::NonPositiveTemperature { temperature: t });
    }
    Ok(())
}

pub fn prim_to_cons(v: &Primitive, gas: &GasParameters) -> Result<Conserved> {
    check_admissible(v[0], v[4])?;
    let rho = v[0];
    let ke = 0.5 * (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
    Ok([
        rho,
        rho * v[1],
        rho * v[2],
        rho * v[3],
        rho * (gas.cv * v[4] + ke),
    ])
}

pub fn cons_to_prim(q: &Conserved, gas: &GasParameters) -> Result<Primitive> {
    let rho = q[0];
    if !(rho > 0.0) {
        return Err(SolverError::NonPositiveDensity { rho });
    }
    let u = [q[1] / rho, q[2] / rho, q[3] / rho];
    let t = (q[4] / rho - 0.5 * dot3(&u, &u)) / gas.cv;
    if !(t > 0.0) {
        return Err(SolverError::NonPositiveTemperature { temperature: t });
    }
    Ok([rho, u[0], u[1], u[2], t])
}

/// Thermodynamic entropy `s`.
pub fn specific_entropy(v: &Primitive, gas: &GasParameters) -> f64 {
    gas.cv * (v[4] / gas.t_inf).ln() - gas.r * (v[0] / gas.rho_inf).ln()
}

/// Mathematical entropy `S = -ρ s` of a conserved state.
pub fn entropy_function(q: &Conserved, gas: &GasParameters) -> Result<f64> {
    let v = cons_to_prim(q, gas)?;
    Ok(-v[0] * specific_entropy(&v, gas))
}

/// Entropy variables from an admissible primitive state (not re-checked).
pub fn entropy_vars(v: &Primitive, gas: &GasParameters) -> Entropy {
    let t = v[4];
    let u2 = v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
    let s = specific_entropy(v, gas);
    [
        gas.cp - s - 0.5 * u2 / t,
        v[1] / t,
        v[2] / t,
        v[3] / t,
        -1.0 / t,
    ]
}

/// Inverse of [`entropy_vars`].
pub fn entropy_to_prim(w: &Entropy, gas: &GasParameters) -> Result<Primitive> {
    if !(w[4] < 0.0) {
        return Err(SolverError::NonPositiveTemperature {
            temperature: -1.0 / w[4],
        });
    }
    let t = -1.0 / w[4];
    let u = [w[1] * t, w[2] * t, w[3] * t];
    let u2 = dot3(&u, &u);
    let s = gas.cp - w[0] - 0.5 * u2 / t;
    // s = c_v ln(T/T∞) - R ln(ρ/ρ∞)
    let rho = gas.rho_inf * ((gas.cv * (t / gas.t_inf).ln() - s) / gas.r).exp();
    check_admissible(rho, t)?;
    Ok([rho, u[0], u[1], u[2], t])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialPack {
    /// `S = -ρ s`.
    pub entropy: f64,
    pub s: f64,
    pub phi: f64,
    pub psi: [f64; 3],
    pub flux: [f64; 3],
}

pub fn entropy_pack(q: &Conserved, gas: &GasParameters) -> Result<(Entropy, PotentialPack)> {
    let v = cons_to_prim(q, gas)?;
    let w = entropy_vars(&v, gas);
    let s = specific_entropy(&v, gas);
    let rho = v[0];
    let pack = PotentialPack {
        entropy: -rho * s,
        s,
        phi: rho * gas.r,
        psi: [rho * gas.r * v[1], rho * gas.r * v[2], rho * gas.r * v[3]],
        flux: [-rho * s * v[1], -rho * s * v[2], -rho * s * v[3]],
    };
    Ok((w, pack))
}

/// Potential flux `ψ_n = ρ R (U·n)`.
#[inline]
pub fn potential_flux(v: &Primitive, n: &[f64; 3], gas: &GasParameters) -> f64 {
    v[0] * gas.r * (v[1] * n[0] + v[2] * n[1] + v[3] * n[2])
}

/// Entropy flux `F_n = -ρ s (U·n)`.
pub fn entropy_flux(v: &Primitive, n: &[f64; 3], gas: &GasParameters) -> f64 {
    -v[0] * specific_entropy(v, gas) * (v[1] * n[0] + v[2] * n[1] + v[3] * n[2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobians {
    pub dw_dv: Matrix5<f64>,
    pub dv_dw: Matrix5<f64>,
    pub dq_dw: Matrix5<f64>,
}

pub fn dw_dv(v: &Primitive, gas: &GasParameters) -> Matrix5<f64> {
    let (rho, t) = (v[0], v[4]);
    let u = [v[1], v[2], v[3]];
    let u2 = dot3(&u, &u);
    let mut m = Matrix5::zeros();
    m[(0, 0)] = gas.r / rho;
    for k in 0..3 {
        m[(0, k + 1)] = -u[k] / t;
        m[(k + 1, k + 1)] = 1.0 / t;
        m[(k + 1, 4)] = -u[k] / (t * t);
    }
    m[(0, 4)] = -gas.cv / t + 0.5 * u2 / (t * t);
    m[(4, 4)] = 1.0 / (t * t);
    m
}

pub fn dv_dw(v: &Primitive, gas: &GasParameters) -> Matrix5<f64> {
    let (rho, t) = (v[0], v[4]);
    let u = [v[1], v[2], v[3]];
    let u2 = dot3(&u, &u);
    let mut m = Matrix5::zeros();
    let a = rho / gas.r;
    m[(0, 0)] = a;
    for k in 0..3 {
        m[(0, k + 1)] = a * u[k];
        m[(k + 1, k + 1)] = t;
        m[(k + 1, 4)] = t * u[k];
    }
    m[(0, 4)] = a * (gas.cv * t + 0.5 * u2);
    m[(4, 4)] = t * t;
    m
}

pub fn dq_dv(v: &Primitive, gas: &GasParameters) -> Matrix5<f64> {
    let rho = v[0];
    let u = [v[1], v[2], v[3]];
    let e = gas.cv * v[4] + 0.5 * dot3(&u, &u);
    let mut m = Matrix5::zeros();
    m[(0, 0)] = 1.0;
    for k in 0..3 {
        m[(k + 1, 0)] = u[k];
        m[(k + 1, k + 1)] = rho;
        m[(4, k + 1)] = rho * u[k];
    }
    m[(4, 0)] = e;
    m[(4, 4)] = rho * gas.cv;
    m
}

pub fn jacobians(v: &Primitive, gas: &GasParameters) -> Result<Jacobians> {
    check_admissible(v[0], v[4])?;
    let dwdv = dw_dv(v, gas);
    let dvdw = dv_dw(v, gas);
    Ok(Jacobians {
        dw_dv: dwdv,
        dv_dw: dvdw,
        dq_dw: dq_dv(v, gas) * dvdw,
    })
}

/// Per-node quantities reused by every two-point flux evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub rho: f64,
    pub u: [f64; 3],
    pub t: f64,
    pub p: f64,
    /// `1/T`.
    pub beta: f64,
    pub u2: f64,
}

impl PointState {
    pub fn from_prim(v: &Primitive, gas: &GasParameters) -> Self {
        let u = [v[1], v[2], v[3]];
        PointState {
            rho: v[0],
            u,
            t: v[4],
            p: v[0] * gas.r * v[4],
            beta: 1.0 / v[4],
            u2: dot3(&u, &u),
        }
    }

    pub fn from_cons(q: &Conserved, gas: &GasParameters) -> Result<Self> {
        Ok(Self::from_prim(&cons_to_prim(q, gas)?, gas))
    }

    pub fn prim(&self) -> Primitive {
        [self.rho, self.u[0], self.u[1], self.u[2], self.t]
    }
}

/// Logarithmic mean `(a - b) / (ln a - ln b)` for positive `a`, `b`.
#[inline]
pub fn log_mean(a: f64, b: f64) -> f64 {
    // ordered so that the result is bitwise symmetric in its arguments
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let f = (a - b) / (a + b);
    let f2 = f * f;
    let mean = 0.5 * (a + b);
    if f.abs() < 1e-4 {
        mean / (1.0 + f2 * (1.0 / 3.0 + f2 * (1.0 / 5.0 + f2 / 7.0)))
    } else {
        mean * f / f.atanh()
    }
}

#[inline]
pub fn inviscid_flux_point(s: &PointState, n: &[f64; 3], gas: &GasParameters) -> [f64; 5] {
    let un = dot3(&s.u, n);
    let mflux = s.rho * un;
    let h = gas.cp * s.t + 0.5 * s.u2;
    [
        mflux,
        mflux * s.u[0] + s.p * n[0],
        mflux * s.u[1] + s.p * n[1],
        mflux * s.u[2] + s.p * n[2],
        mflux * h,
    ]
}

/// `Σ_m n_m F^I_m(q)`.
pub fn inviscid_flux(q: &Conserved, n: &[f64; 3], gas: &GasParameters) -> Result<[f64; 5]> {
    let s = PointState::from_cons(q, gas)?;
    Ok(inviscid_flux_point(&s, n, gas))
}

/// Entropy-conservative two-point flux built from logarithmic means of `ρ`
/// and `1/T`.
#[inline]
pub fn ec_flux_point(a: &PointState, b: &PointState, n: &[f64; 3], gas: &GasParameters) -> [f64; 5] {
    let rho_ln = log_mean(a.rho, b.rho);
    let beta_ln = log_mean(a.beta, b.beta);
    let rho_avg = 0.5 * (a.rho + b.rho);
    let beta_avg = 0.5 * (a.beta + b.beta);
    let u = [
        0.5 * (a.u[0] + b.u[0]),
        0.5 * (a.u[1] + b.u[1]),
        0.5 * (a.u[2] + b.u[2]),
    ];
    let u2_avg = 0.5 * (a.u2 + b.u2);
    let p_tilde = gas.r * rho_avg / beta_avg;
    let f_rho = rho_ln * dot3(&u, n);
    let f_m = [
        f_rho * u[0] + p_tilde * n[0],
        f_rho * u[1] + p_tilde * n[1],
        f_rho * u[2] + p_tilde * n[2],
    ];
    let f_e = f_rho * (gas.cv / beta_ln - 0.5 * u2_avg) + dot3(&u, &f_m);
    [f_rho, f_m[0], f_m[1], f_m[2], f_e]
}

pub fn ec_flux(
    ql: &Conserved,
    qr: &Conserved,
    n: &[f64; 3],
    gas: &GasParameters,
) -> Result<[f64; 5]> {
    let a = PointState::from_cons(ql, gas)?;
    let b = PointState::from_cons(qr, gas)?;
    Ok(ec_flux_point(&a, &b, n, gas))
}

/// Entropy-stable flux `f^sc - ½ R|Λ|T Rᵀ (W_R - W_L)` with the eigensystem of
/// the normal flux Jacobian at the arithmetic-average state, scaled so that
/// `R T Rᵀ = ∂Q/∂W`.
pub fn es_flux_point(
    a: &PointState,
    b: &PointState,
    wa: &Entropy,
    wb: &Entropy,
    n: &[f64; 3],
    gas: &GasParameters,
) -> [f64; 5] {
    let mut f = ec_flux_point(a, b, n, gas);
    let d = es_dissipation(a, b, wa, wb, n, gas);
    for k in 0..5 {
        f[k] -= 0.5 * d[k];
    }
    f
}

/// `R|Λ|T Rᵀ (W_R - W_L)`, positive semidefinite in the jump.
pub fn es_dissipation(
    a: &PointState,
    b: &PointState,
    wa: &Entropy,
    wb: &Entropy,
    n: &[f64; 3],
    gas: &GasParameters,
) -> [f64; 5] {
    let area = dot3(n, n).sqrt();
    if area == 0.0 {
        return [0.0; 5];
    }
    let nh = [n[0] / area, n[1] / area, n[2] / area];
    let rho = 0.5 * (a.rho + b.rho);
    let u = [
        0.5 * (a.u[0] + b.u[0]),
        0.5 * (a.u[1] + b.u[1]),
        0.5 * (a.u[2] + b.u[2]),
    ];
    let p = 0.5 * (a.p + b.p);
    let u2 = dot3(&u, &u);
    let c = (gas.gamma * p / rho).sqrt();
    let h = c * c / (gas.gamma - 1.0) + 0.5 * u2;
    let un = dot3(&u, &nh);
    let dw: [f64; 5] = std::array::from_fn(|k| wb[k] - wa[k]);

    let acoustic = |sign: f64| -> [f64; 5] {
        let r = [
            1.0,
            u[0] + sign * c * nh[0],
            u[1] + sign * c * nh[1],
            u[2] + sign * c * nh[2],
            h + sign * c * un,
        ];
        let lam = (un + sign * c).abs();
        let coef = lam * rho / (2.0 * gas.gamma * gas.r) * dot5(&r, &dw);
        r.map(|x| coef * x)
    };
    let minus = acoustic(-1.0);
    let plus = acoustic(1.0);

    let lam_u = un.abs();
    let r2 = [1.0, u[0], u[1], u[2], 0.5 * u2];
    let coef2 = lam_u * (gas.gamma - 1.0) * rho / (gas.gamma * gas.r) * dot5(&r2, &dw);

    // shear pair: p/R · [0, P_t, P_t u; 0, uᵀP_t, uᵀP_t u] applied to ΔW
    let g = [dw[1] + u[0] * dw[4], dw[2] + u[1] * dw[4], dw[3] + u[2] * dw[4]];
    let gn = dot3(&g, &nh);
    let gt = [g[0] - gn * nh[0], g[1] - gn * nh[1], g[2] - gn * nh[2]];
    let coef_t = lam_u * p / gas.r;

    let mut d = [0.0; 5];
    for k in 0..5 {
        d[k] = (minus[k] + plus[k]) + coef2 * r2[k];
    }
    for k in 0..3 {
        d[k + 1] += coef_t * gt[k];
    }
    d[4] += coef_t * dot3(&u, &gt);
    d.map(|x| x * area)
}

pub fn es_flux(
    ql: &Conserved,
    qr: &Conserved,
    n: &[f64; 3],
    gas: &GasParameters,
) -> Result<[f64; 5]> {
    let vl = cons_to_prim(ql, gas)?;
    let vr = cons_to_prim(qr, gas)?;
    let a = PointState::from_prim(&vl, gas);
    let b = PointState::from_prim(&vr, gas);
    Ok(es_flux_point(
        &a,
        &b,
        &entropy_vars(&vl, gas),
        &entropy_vars(&vr, gas),
        n,
        gas,
    ))
}

/// Inviscid two-point flux variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InviscidMode {
    #[default]
    Conservative,
    Stable,
}

#[cfg(test)]
pub(crate) mod testing {
    use rand::Rng;

    use super::*;

    pub fn random_prim<R: Rng>(rng: &mut R) -> Primitive {
        [
            rng.gen_range(0.2..3.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.3..4.0),
        ]
    }

    pub fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
        loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let len = dot3(&v, &v).sqrt();
            if len > 0.1 && len <= 1.0 {
                return v.map(|x| x / len);
            }
        }
    }

    pub fn gas() -> GasParameters {
        GasParameters::with_reference(1.4, 0.7, 0.05, 0.72, 1.3, 0.9).unwrap()
    }
}
