//! Diagonal-norm summation-by-parts operators on Legendre-Gauss-Lobatto nodes.
//!
//! The one-dimensional quintuple `(P, Q, D, B, Δ)` is built once per order and
//! applied in tensor-product form on hexahedral elements. Nodes of an element
//! are stored with the `x1` index slowest, so that the three-dimensional
//! operators are `A ⊗ I ⊗ I`, `I ⊗ A ⊗ I` and `I ⊗ I ⊗ A` (times `I5` for the
//! component axis, which is stored fastest).

use nalgebra::DMatrix;

use crate::error::{Result, SolverError};

/// Highest polynomial order with a supported operator.
pub const MAX_ORDER: usize = 8;

/// Legendre polynomials `P_0..=P_n` evaluated at `x`.
fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
    }
    for k in 2..=n {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    p
}

/// LGL nodes (ascending) and weights for polynomial order `p`.
///
/// Nodes are the roots of `(1 - x^2) P'_p(x)`, found by Newton iteration from
/// Chebyshev-Gauss-Lobatto initial guesses.
///
/// # Panics
///
/// Panics if `p == 0` or the Newton iteration fails to converge, which would
/// indicate an internal defect rather than a user error.
pub fn lgl_rule(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1, "LGL rule needs p >= 1");
    let n = p + 1;
    let mut x: Vec<f64> = (0..n)
        .map(|i| -(std::f64::consts::PI * i as f64 / p as f64).cos())
        .collect();
    for xi in x.iter_mut() {
        let mut converged = false;
        for _ in 0..100 {
            let leg = legendre_all(p, *xi);
            let step = (*xi * leg[p] - leg[p - 1]) / ((p + 1) as f64 * leg[p]);
            *xi -= step;
            if step.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        assert!(converged, "LGL Newton iteration did not converge for p = {p}");
    }
    x[0] = -1.0;
    x[p] = 1.0;
    // symmetrize to remove last-bit asymmetry
    for i in 0..n / 2 {
        let a = 0.5 * (x[p - i] - x[i]);
        x[i] = -a;
        x[p - i] = a;
    }
    if n % 2 == 1 {
        x[p / 2] = 0.0;
    }
    let scale = 2.0 / (p * (p + 1)) as f64;
    let w = x
        .iter()
        .map(|&xi| {
            let lp = legendre_all(p, xi)[p];
            scale / (lp * lp)
        })
        .collect();
    (x, w)
}

/// The one-dimensional SBP operator of order `p` on `N = p + 1` LGL nodes.
#[derive(Debug, Clone)]
pub struct Operator1D {
    pub order: usize,
    pub nodes: Vec<f64>,
    /// Diagonal of the norm matrix `P`.
    pub weights: Vec<f64>,
    pub q: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Diagonal of `B = diag(-1, 0, ..., 0, 1)`.
    pub b: Vec<f64>,
    /// Telescoping difference operator, `N x (N + 1)`.
    pub delta: DMatrix<f64>,
}

impl Operator1D {
    pub fn n(&self) -> usize {
        self.order + 1
    }

    pub fn b_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.b.clone()))
    }

    pub fn p_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.weights.clone()))
    }

    /// Weight of the boundary nodes, `P[0] = P[N-1]`.
    pub fn end_weight(&self) -> f64 {
        self.weights[0]
    }
}

/// Builds the diagonal-norm SBP operator of order `p` (1..=8).
pub fn build_sbp_1d(p: usize) -> Result<Operator1D> {
    if p == 0 || p > MAX_ORDER {
        return Err(SolverError::Config(format!(
            "polynomial order {p} not supported (1..={MAX_ORDER})"
        )));
    }
    let n = p + 1;
    let (x, w) = lgl_rule(p);

    // barycentric weights
    let lambda: Vec<f64> = (0..n)
        .map(|j| {
            let prod: f64 = (0..n).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / prod
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (lambda[j] / lambda[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    let q = DMatrix::from_fn(n, n, |i, j| w[i] * d[(i, j)]);
    let mut b = vec![0.0; n];
    b[0] = -1.0;
    b[n - 1] = 1.0;
    let delta = DMatrix::from_fn(n, n + 1, |i, j| {
        if j == i {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    Ok(Operator1D {
        order: p,
        nodes: x,
        weights: w,
        q,
        d,
        b,
        delta,
    })
}

/// Face identifiers: `2 * direction + side`, side 0 at `ξ = -1`, 1 at `ξ = +1`.
pub const FACES: [usize; 6] = [0, 1, 2, 3, 4, 5];

pub fn face_direction(face: usize) -> usize {
    face / 2
}

/// `-1` on the `ξ = -1` face (`B⁻`), `+1` on the `ξ = +1` face (`B⁺`).
pub fn face_sign(face: usize) -> f64 {
    if face % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Index bookkeeping for an `N x N x N` tensor-product element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorLayout {
    pub n: usize,
    faces: [Vec<usize>; 6],
}

impl TensorLayout {
    pub fn new(n: usize) -> Self {
        let mut faces: [Vec<usize>; 6] = Default::default();
        for (f, list) in faces.iter_mut().enumerate() {
            let dir = f / 2;
            let fixed = if f % 2 == 0 { 0 } else { n - 1 };
            for a in 0..n {
                for b in 0..n {
                    let ijk = match dir {
                        0 => [fixed, a, b],
                        1 => [a, fixed, b],
                        _ => [a, b, fixed],
                    };
                    list.push((ijk[0] * n + ijk[1]) * n + ijk[2]);
                }
            }
        }
        TensorLayout { n, faces }
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn ijk(&self, node: usize) -> [usize; 3] {
        let k = node % self.n;
        let j = (node / self.n) % self.n;
        let i = node / (self.n * self.n);
        [i, j, k]
    }

    /// Stride between consecutive nodes along `dir`.
    #[inline]
    pub fn stride(&self, dir: usize) -> usize {
        match dir {
            0 => self.n * self.n,
            1 => self.n,
            _ => 1,
        }
    }

    /// Nodes on `face`, ordered lexicographically in the two tangential indices.
    pub fn face_nodes(&self, face: usize) -> &[usize] {
        &self.faces[face]
    }

    /// First node of every line along `dir` (the `N²` lines of the element).
    pub fn line_starts(&self, dir: usize) -> Vec<usize> {
        self.faces[2 * dir].clone()
    }
}

/// Applies a 1D operator along `dir` to a per-node field of width 5, i.e. the
/// Kronecker product operator, without materializing it.
pub fn tensor_apply(
    op: &DMatrix<f64>,
    dir: usize,
    field: &[[f64; 5]],
    layout: &TensorLayout,
) -> Result<Vec<[f64; 5]>> {
    if dir > 2 {
        return Err(SolverError::Direction(dir));
    }
    let n = layout.n;
    if op.nrows() != n || op.ncols() != n {
        return Err(SolverError::SizeMismatch {
            expected: n,
            got: op.nrows(),
        });
    }
    if field.len() != layout.num_nodes() {
        return Err(SolverError::SizeMismatch {
            expected: layout.num_nodes(),
            got: field.len(),
        });
    }
    let stride = layout.stride(dir);
    let mut out = vec![[0.0; 5]; field.len()];
    for &start in layout.face_nodes(2 * dir) {
        for a in 0..n {
            let mut acc = [0.0; 5];
            for b in 0..n {
                let c = op[(a, b)];
                let src = &field[start + b * stride];
                for v in 0..5 {
                    acc[v] += c * src[v];
                }
            }
            out[start + a * stride] = acc;
        }
    }
    Ok(out)
}
