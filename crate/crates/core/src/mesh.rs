//! Analytic structured hexahedral meshes and curvilinear metric terms.
//!
//! Metric terms use the curl form evaluated with the element's own
//! differentiation matrix, so the discrete metric identities hold to roundoff.

use std::fmt;

use crate::error::{Result, SolverError};
use crate::interface::FacePairing;
use crate::sbp::{build_sbp_1d, face_direction, Operator1D, TensorLayout};

/// Geometry of one element, stored per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub coords: Vec<[f64; 3]>,
    pub jac: Vec<f64>,
    /// `ja[node][l]` is the contravariant vector `J a^l` (components in x, y, z).
    pub ja: Vec<[[f64; 3]; 3]>,
}

/// A face on the domain boundary carrying a named tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryFace {
    pub element: usize,
    pub face: usize,
    pub tag: String,
}

/// How an element face is connected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceLink {
    /// Index into `Mesh::interfaces`; `left` tells which side this face is.
    Interface { index: usize, left: bool },
    /// Index into `Mesh::boundaries`.
    Boundary(usize),
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub op: Operator1D,
    pub layout: TensorLayout,
    pub elements: Vec<Element>,
    pub interfaces: Vec<FacePairing>,
    pub boundaries: Vec<BoundaryFace>,
    pub links: Vec<[FaceLink; 6]>,
}

/// Scalar field derivative along `dir`.
fn diff_scalar(d: &nalgebra::DMatrix<f64>, dir: usize, f: &[f64], layout: &TensorLayout) -> Vec<f64> {
    let n = layout.n;
    let stride = layout.stride(dir);
    let mut out = vec![0.0; f.len()];
    for &start in layout.face_nodes(2 * dir) {
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                acc += d[(a, b)] * f[start + b * stride];
            }
            out[start + a * stride] = acc;
        }
    }
    out
}

/// Jacobian and contravariant metric vectors at every node of an element
/// whose nodal physical coordinates are `coords`.
pub fn compute_metrics(
    coords: &[[f64; 3]],
    op: &Operator1D,
    layout: &TensorLayout,
) -> Result<(Vec<f64>, Vec<[[f64; 3]; 3]>)> {
    let nn = layout.num_nodes();
    if coords.len() != nn {
        return Err(SolverError::SizeMismatch {
            expected: nn,
            got: coords.len(),
        });
    }
    let x: [Vec<f64>; 3] = std::array::from_fn(|c| coords.iter().map(|p| p[c]).collect());
    // dx[c][dir] = ∂x_c/∂ξ_dir
    let dx: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|c| std::array::from_fn(|dir| diff_scalar(&op.d, dir, &x[c], layout)));

    let mut ja = vec![[[0.0; 3]; 3]; nn];
    for comp in 0..3 {
        let m = (comp + 1) % 3;
        let l = (comp + 2) % 3;
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            let a: Vec<f64> = (0..nn).map(|q| x[l][q] * dx[m][j][q]).collect();
            let b: Vec<f64> = (0..nn).map(|q| x[l][q] * dx[m][k][q]).collect();
            let da = diff_scalar(&op.d, k, &a, layout);
            let db = diff_scalar(&op.d, j, &b, layout);
            for q in 0..nn {
                ja[q][i][comp] = da[q] - db[q];
            }
        }
    }
    let mut jac = vec![0.0; nn];
    for q in 0..nn {
        let a = [dx[0][0][q], dx[1][0][q], dx[2][0][q]];
        let b = [dx[0][1][q], dx[1][1][q], dx[2][1][q]];
        let c = [dx[0][2][q], dx[1][2][q], dx[2][2][q]];
        let cross = [
            b[1] * c[2] - b[2] * c[1],
            b[2] * c[0] - b[0] * c[2],
            b[0] * c[1] - b[1] * c[0],
        ];
        let j = a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2];
        if !(j > 0.0) {
            return Err(SolverError::InvalidMesh(format!(
                "non-positive Jacobian {j:e} at node {q}"
            )));
        }
        jac[q] = j;
    }
    Ok((jac, ja))
}

/// `max |Σ_l D_l (J a^l)|` over nodes and components.
pub fn gcl_residual(ja: &[[[f64; 3]; 3]], op: &Operator1D, layout: &TensorLayout) -> f64 {
    let nn = layout.num_nodes();
    let mut worst: f64 = 0.0;
    for comp in 0..3 {
        let mut sum = vec![0.0; nn];
        for l in 0..3 {
            let f: Vec<f64> = ja.iter().map(|a| a[l][comp]).collect();
            for (s, v) in sum.iter_mut().zip(diff_scalar(&op.d, l, &f, layout)) {
                *s += v;
            }
        }
        worst = sum.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    worst
}

/// Key numbers describing a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSummary {
    pub elements: usize,
    pub order: usize,
    pub nodes: usize,
    pub interfaces: usize,
    pub boundary_faces: usize,
    pub gcl_residual: f64,
    pub min_jacobian: f64,
    pub volume: f64,
}

impl fmt::Display for MeshSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "elements = {}", self.elements)?;
        writeln!(f, "order = {}", self.order)?;
        writeln!(f, "nodes = {}", self.nodes)?;
        writeln!(f, "interfaces = {}", self.interfaces)?;
        writeln!(f, "boundary_faces = {}", self.boundary_faces)?;
        writeln!(f, "gcl_residual = {:.17e}", self.gcl_residual)?;
        writeln!(f, "min_jacobian = {:.17e}", self.min_jacobian)?;
        writeln!(f, "volume = {:.17e}", self.volume)
    }
}

impl Mesh {
    pub fn order(&self) -> usize {
        self.op.order
    }

    pub fn nodes_per_element(&self) -> usize {
        self.layout.num_nodes()
    }

    /// Quadrature weight `P_i J_i` of a node.
    pub fn mass(&self, element: usize, node: usize) -> f64 {
        let [i, j, k] = self.layout.ijk(node);
        let w = &self.op.weights;
        w[i] * w[j] * w[k] * self.elements[element].jac[node]
    }

    /// Tangential quadrature weight of a face node (product of the two 1D
    /// weights not normal to the face).
    pub fn face_weight(&self, face: usize, node: usize) -> f64 {
        let ijk = self.layout.ijk(node);
        let dir = face_direction(face);
        let w = &self.op.weights;
        (0..3).filter(|&d| d != dir).map(|d| w[ijk[d]]).product()
    }

    pub fn volume(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| (0..self.nodes_per_element()).map(|q| self.mass(e, q)).sum::<f64>())
            .sum()
    }

    /// Physical area of an element face.
    pub fn face_area(&self, element: usize, face: usize) -> f64 {
        let dir = face_direction(face);
        self.layout
            .face_nodes(face)
            .iter()
            .map(|&q| {
                let a = self.elements[element].ja[q][dir];
                self.face_weight(face, q) * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
            })
            .sum()
    }

    /// Element volume divided by the face area: the element height normal to
    /// the face.
    pub fn normal_height(&self, element: usize, face: usize) -> f64 {
        let vol: f64 = (0..self.nodes_per_element()).map(|q| self.mass(element, q)).sum();
        vol / self.face_area(element, face)
    }

    pub fn tags(&self) -> Vec<String> {
        let mut tags: Vec<String> = self.boundaries.iter().map(|b| b.tag.clone()).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn summary(&self) -> MeshSummary {
        let gcl = self
            .elements
            .iter()
            .map(|e| gcl_residual(&e.ja, &self.op, &self.layout))
            .fold(0.0, f64::max);
        let min_j = self
            .elements
            .iter()
            .flat_map(|e| e.jac.iter().copied())
            .fold(f64::INFINITY, f64::min);
        MeshSummary {
            elements: self.elements.len(),
            order: self.order(),
            nodes: self.elements.len() * self.nodes_per_element(),
            interfaces: self.interfaces.len(),
            boundary_faces: self.boundaries.len(),
            gcl_residual: gcl,
            min_jacobian: min_j,
            volume: self.volume(),
        }
    }

    /// Assembles a mesh from per-element coordinates and its connectivity,
    /// checking that paired faces coincide (after removing `shift` for
    /// periodic pairs).
    fn assemble(
        op: Operator1D,
        coords: Vec<Vec<[f64; 3]>>,
        pairs: Vec<(FacePairing, [f64; 3])>,
        boundaries: Vec<BoundaryFace>,
    ) -> Result<Mesh> {
        let layout = TensorLayout::new(op.n());
        let mut elements = Vec::with_capacity(coords.len());
        for (e, c) in coords.into_iter().enumerate() {
            let (jac, ja) = compute_metrics(&c, &op, &layout).map_err(|err| match err {
                SolverError::InvalidMesh(msg) => SolverError::InvalidMesh(format!("element {e}: {msg}")),
                other => other,
            })?;
            elements.push(Element { coords: c, jac, ja });
        }
        let nf = op.n() * op.n();
        let mut links = vec![[None; 6]; elements.len()];
        let mut interfaces = Vec::with_capacity(pairs.len());
        for (idx, (p, shift)) in pairs.into_iter().enumerate() {
            p.validate(nf)?;
            let lf = layout.face_nodes(p.left_face);
            let rf = layout.face_nodes(p.right_face);
            let scale = elements[p.left].coords.iter().fold(1.0f64, |s, x| {
                s.max(x[0].abs()).max(x[1].abs()).max(x[2].abs())
            });
            for (a, &b) in p.node_map.iter().enumerate() {
                let xl = elements[p.left].coords[lf[a]];
                let xr = elements[p.right].coords[rf[b]];
                let gap = (0..3).map(|c| (xr[c] - xl[c] - shift[c]).abs()).fold(0.0, f64::max);
                if gap > 1e-12 * scale {
                    return Err(SolverError::MismatchedFaces(format!(
                        "element {} face {} and element {} face {}: nodes differ by {gap:e}",
                        p.left, p.left_face, p.right, p.right_face
                    )));
                }
            }
            for (el, face, left) in [(p.left, p.left_face, true), (p.right, p.right_face, false)] {
                if links[el][face].is_some() {
                    return Err(SolverError::InvalidMesh(format!(
                        "element {el} face {face} connected twice"
                    )));
                }
                links[el][face] = Some(FaceLink::Interface { index: idx, left });
            }
            interfaces.push(p);
        }
        for (idx, b) in boundaries.iter().enumerate() {
            if links[b.element][b.face].is_some() {
                return Err(SolverError::InvalidMesh(format!(
                    "element {} face {} connected twice",
                    b.element, b.face
                )));
            }
            links[b.element][b.face] = Some(FaceLink::Boundary(idx));
        }
        let links = links
            .into_iter()
            .enumerate()
            .map(|(e, l)| {
                let mut out = [FaceLink::Boundary(0); 6];
                for f in 0..6 {
                    out[f] = l[f].ok_or_else(|| {
                        SolverError::InvalidMesh(format!("element {e} face {f} is not connected"))
                    })?;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mesh {
            op,
            layout,
            elements,
            interfaces,
            boundaries,
            links,
        })
    }
}

const BOX_TAGS: [&str; 6] = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"];

/// Structured `nx × ny × nz` block of elements over the logical box
/// `[0, L1] × [0, L2] × [0, L3]`, mapped to physical space by `map`.
///
/// Boundary faces are tagged `xmin`, `xmax`, `ymin`, ... unless the direction
/// is periodic, in which case the opposite faces are paired with shift
/// `period[d]`.
pub fn build_mapped_box<F>(
    counts: [usize; 3],
    lengths: [f64; 3],
    p: usize,
    periodic: [bool; 3],
    period: [[f64; 3]; 3],
    map: F,
) -> Result<Mesh>
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    if counts.iter().any(|&c| c == 0) {
        return Err(SolverError::InvalidMesh(format!("element counts must be positive, got {counts:?}")));
    }
    if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(SolverError::InvalidMesh(format!("box lengths must be positive, got {lengths:?}")));
    }
    let op = build_sbp_1d(p)?;
    let layout = TensorLayout::new(op.n());
    let [nx, ny, nz] = counts;
    let eid = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    let mut coords = Vec::with_capacity(nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let cell = [i, j, k];
                let c: Vec<[f64; 3]> = (0..layout.num_nodes())
                    .map(|q| {
                        let ijk = layout.ijk(q);
                        let logical = std::array::from_fn(|d| {
                            let h = lengths[d] / counts[d] as f64;
                            h * (cell[d] as f64 + 0.5 * (op.nodes[ijk[d]] + 1.0))
                        });
                        map(logical)
                    })
                    .collect();
                coords.push(c);
            }
        }
    }
    let identity: Vec<usize> = (0..op.n() * op.n()).collect();
    let mut pairs = Vec::new();
    let mut boundaries = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let cell = [i, j, k];
                for d in 0..3 {
                    if !periodic[d] {
                        if cell[d] == 0 {
                            boundaries.push(BoundaryFace {
                                element: eid(i, j, k),
                                face: 2 * d,
                                tag: BOX_TAGS[2 * d].to_string(),
                            });
                        }
                        if cell[d] + 1 == counts[d] {
                            boundaries.push(BoundaryFace {
                                element: eid(i, j, k),
                                face: 2 * d + 1,
                                tag: BOX_TAGS[2 * d + 1].to_string(),
                            });
                            continue;
                        }
                    }
                    let mut next = cell;
                    let mut shift = [0.0; 3];
                    next[d] += 1;
                    if next[d] == counts[d] {
                        next[d] = 0;
                        shift = period[d].map(|x| -x);
                    }
                    pairs.push((
                        FacePairing {
                            left: eid(i, j, k),
                            left_face: 2 * d + 1,
                            right: eid(next[0], next[1], next[2]),
                            right_face: 2 * d,
                            node_map: identity.clone(),
                        },
                        shift,
                    ));
                }
            }
        }
    }
    Mesh::assemble(op, coords, pairs, boundaries)
}

/// Axis-aligned box `[0, L1] × [0, L2] × [0, L3]` with affine elements.
pub fn build_box_mesh(counts: [usize; 3], lengths: [f64; 3], p: usize, periodic: [bool; 3]) -> Result<Mesh> {
    let period = [
        [lengths[0], 0.0, 0.0],
        [0.0, lengths[1], 0.0],
        [0.0, 0.0, lengths[2]],
    ];
    build_mapped_box(counts, lengths, p, periodic, period, |x| x)
}

/// Fully periodic box with every coordinate displaced by
/// `a · sin(2πx/L1) sin(2πy/L2) sin(2πz/L3)`.
pub fn build_perturbed_box(counts: [usize; 3], lengths: [f64; 3], p: usize, amplitude: f64) -> Result<Mesh> {
    let period = [
        [lengths[0], 0.0, 0.0],
        [0.0, lengths[1], 0.0],
        [0.0, 0.0, lengths[2]],
    ];
    let tau = 2.0 * std::f64::consts::PI;
    build_mapped_box(counts, lengths, p, [true; 3], period, move |x| {
        let bump = amplitude
            * (tau * x[0] / lengths[0]).sin()
            * (tau * x[1] / lengths[1]).sin()
            * (tau * x[2] / lengths[2]).sin();
        [x[0] + bump, x[1] + bump, x[2] + bump]
    })
}

/// Annular pipe section `R_i ≤ r ≤ R_o` around the z axis, periodic in θ and
/// in z over `length`. The radial direction is `ξ1`, so face 0 of the
/// innermost elements lies on `r = R_i` (tag `inner`) and face 1 of the
/// outermost on `r = R_o` (tag `outer`).
pub fn build_annulus_mesh(
    r_inner: f64,
    r_outer: f64,
    nr: usize,
    ntheta: usize,
    nz: usize,
    length: f64,
    p: usize,
) -> Result<Mesh> {
    if !(r_inner > 0.0 && r_outer > r_inner) {
        return Err(SolverError::InvalidMesh(format!(
            "annulus radii must satisfy 0 < R_i < R_o, got {r_inner}, {r_outer}"
        )));
    }
    if !(length > 0.0) {
        return Err(SolverError::InvalidMesh(format!("annulus length must be positive, got {length}")));
    }
    if ntheta < 1 || nr < 1 || nz < 1 {
        return Err(SolverError::InvalidMesh("annulus element counts must be positive".into()));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut mesh = build_mapped_box(
        [nr, ntheta, nz],
        [r_outer - r_inner, tau, length],
        p,
        [false, true, true],
        [[0.0; 3], [0.0; 3], [0.0, 0.0, length]],
        |x| {
            let r = r_inner + x[0];
            [r * x[1].cos(), r * x[1].sin(), x[2]]
        },
    )?;
    for b in &mut mesh.boundaries {
        b.tag = if b.face == 0 { "inner" } else { "outer" }.to_string();
    }
    Ok(mesh)
}
