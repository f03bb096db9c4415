//! TOML case configuration.
//!
//! ```toml
//! name = "cavity"
//!
//! [gas]            # gamma = 1.4, r = 1, mu = 0, prandtl = 0.72
//! mu = 0.01
//!
//! [mesh]
//! kind = "box"     # box | perturbed_box | annulus
//! order = 3
//! elements = [4, 4, 4]
//!
//! [flow]
//! mode = "conservative"        # or "stable"
//! interface_penalty = "auto"   # "auto" | "off" | number
//!
//! [initial]
//! kind = "uniform"
//! density = 1.0
//! velocity = [0.0, 0.0, 0.0]
//! temperature = 285.7
//!
//! [walls.zmax]
//! motion = { kind = "rotating", omega = 1.0, axis = [0, 0, 1], center = [0.5, 0.5, 1] }
//! heat = { kind = "sinusoid", amplitude = 1e-4, frequency = 2.0 }
//! beta = "auto"
//!
//! [integrator]     # atol, rtol, safety, k_p, k_i, h_initial, h_min, h_max, max_steps
//! [run]            # t_end, max_accepted
//! [output]         # dir, timeseries, forces, fields
//! [study]          # orders, refinements, output
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, SolverError};
use crate::gas::{GasParameters, InviscidMode};
use crate::mesh::{build_annulus_mesh, build_box_mesh, build_perturbed_box, Mesh};
use crate::rhs::{BoundaryCondition, Penalty};
use crate::time::IntegratorConfig;
use crate::wall::{HeatFlow, WallMotion, WallSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub gas: GasConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub walls: BTreeMap<String, WallConfig>,
    #[serde(default)]
    pub far_field: BTreeMap<String, FarFieldConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub study: Option<StudyConfig>,
}

fn default_name() -> String {
    "case".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasConfig {
    pub gamma: f64,
    pub r: f64,
    pub mu: f64,
    pub prandtl: f64,
    /// Reference state of the entropy `s = c_v ln(T/T_ref) - R ln(ρ/ρ_ref)`.
    pub t_ref: f64,
    pub rho_ref: f64,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig {
            gamma: 1.4,
            r: 1.0,
            mu: 0.0,
            prandtl: 0.72,
            t_ref: 1.0,
            rho_ref: 1.0,
        }
    }
}

impl GasConfig {
    pub fn build(&self) -> Result<GasParameters> {
        GasParameters::with_reference(self.gamma, self.r, self.mu, self.prandtl, self.t_ref, self.rho_ref)
    }
}

fn unit3() -> [f64; 3] {
    [1.0; 3]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    /// Boundary tags `xmin`, `xmax`, `ymin`, `ymax`, `zmin`, `zmax` on
    /// non-periodic directions.
    Box {
        order: usize,
        elements: [usize; 3],
        #[serde(default = "unit3")]
        lengths: [f64; 3],
        #[serde(default)]
        periodic: [bool; 3],
    },
    /// Fully periodic box with every node displaced by
    /// `amplitude·sin·sin·sin`.
    PerturbedBox {
        order: usize,
        elements: [usize; 3],
        #[serde(default = "unit3")]
        lengths: [f64; 3],
        amplitude: f64,
    },
    /// Tags `inner` and `outer`; periodic around and along the axis (z).
    Annulus {
        order: usize,
        inner_radius: f64,
        outer_radius: f64,
        radial: usize,
        azimuthal: usize,
        #[serde(default = "one")]
        axial: usize,
        length: f64,
    },
}

impl MeshConfig {
    pub fn order(&self) -> usize {
        match *self {
            MeshConfig::Box { order, .. } | MeshConfig::PerturbedBox { order, .. } | MeshConfig::Annulus { order, .. } => order,
        }
    }

    /// Same mesh with order `p` and `n` elements in each refined direction
    /// (all three for boxes, the section directions for the annulus).
    pub fn refined(&self, p: usize, n: usize) -> MeshConfig {
        let mut m = self.clone();
        match &mut m {
            MeshConfig::Box { order, elements, .. } | MeshConfig::PerturbedBox { order, elements, .. } => {
                *order = p;
                *elements = [n; 3];
            }
            MeshConfig::Annulus { order, radial, azimuthal, .. } => {
                *order = p;
                *radial = n;
                *azimuthal = n;
            }
        }
        m
    }

    pub fn build(&self) -> Result<Mesh> {
        match *self {
            MeshConfig::Box { order, elements, lengths, periodic } => build_box_mesh(elements, lengths, order, periodic),
            MeshConfig::PerturbedBox { order, elements, lengths, amplitude } => {
                build_perturbed_box(elements, lengths, order, amplitude)
            }
            MeshConfig::Annulus { order, inner_radius, outer_radius, radial, azimuthal, axial, length } => {
                build_annulus_mesh(inner_radius, outer_radius, radial, azimuthal, axial, length, order)
            }
        }
    }
}

/// `"auto"`, `"off"` or a number.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PenaltyValue {
    Number(f64),
    Word(String),
}

impl Default for PenaltyValue {
    fn default() -> Self {
        PenaltyValue::Word("auto".into())
    }
}

impl PenaltyValue {
    pub fn resolve(&self) -> Result<Penalty> {
        match self {
            PenaltyValue::Number(v) if *v >= 0.0 => Ok(Penalty::Fixed(*v)),
            PenaltyValue::Number(v) => Err(SolverError::Config(format!("penalty must be non-negative, got {v}"))),
            PenaltyValue::Word(w) if w == "auto" => Ok(Penalty::Auto),
            PenaltyValue::Word(w) if w == "off" => Ok(Penalty::Off),
            PenaltyValue::Word(w) => Err(SolverError::Config(format!("penalty must be \"auto\", \"off\" or a number, got \"{w}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub mode: InviscidMode,
    pub interface_penalty: PenaltyValue,
    /// Force per unit volume.
    pub body_force: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Uniform {
        density: f64,
        #[serde(default)]
        velocity: [f64; 3],
        temperature: f64,
    },
    /// Fully developed axial flow in the annulus driven by the axial body
    /// force; the temperature follows from the Mach number of the peak
    /// velocity.
    AnnulusProfile {
        #[serde(default = "unit_f64")]
        density: f64,
        mach: f64,
    },
    /// `ρ = 1 + a sin(2π Σ x_i / L_i)` advected by a uniform velocity at
    /// uniform pressure; exact for inviscid flow on a periodic box.
    DensityWave {
        #[serde(default = "default_wave_amplitude")]
        amplitude: f64,
        velocity: [f64; 3],
        #[serde(default = "unit_f64")]
        pressure: f64,
    },
}

fn unit_f64() -> f64 {
    1.0
}

fn default_wave_amplitude() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallConfig {
    pub motion: WallMotion,
    pub heat: HeatFlow,
    pub beta: PenaltyValue,
    /// Defaults to the flow mode.
    pub mode: Option<InviscidMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarFieldConfig {
    pub density: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub t_end: f64,
    /// Stop after this many accepted steps.
    pub max_accepted: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { t_end: 1.0, max_accepted: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub timeseries: Option<String>,
    pub forces: Option<String>,
    pub fields: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "output".into(),
            timeseries: Some("timeseries.csv".into()),
            forces: Some("forces.csv".into()),
            fields: Some("fields.bin".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub orders: Vec<usize>,
    pub refinements: Vec<usize>,
    #[serde(default = "default_study_output")]
    pub output: String,
}

fn default_study_output() -> String {
    "study.csv".into()
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: CaseConfig = toml::from_str(text).map_err(|e| SolverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SolverError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            SolverError::Config(m) => SolverError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks everything that can be checked without building the mesh.
    pub fn validate(&self) -> Result<()> {
        self.gas.build()?;
        self.integrator.validate()?;
        self.flow.interface_penalty.resolve()?;
        for w in self.walls.values() {
            w.beta.resolve()?;
        }
        if !(self.run.t_end >= 0.0) {
            return Err(SolverError::Config("run.t_end must be non-negative".into()));
        }
        let p = self.mesh.order();
        if p == 0 || p > crate::sbp::MAX_ORDER {
            return Err(SolverError::Config(format!("mesh.order must be in 1..={}", crate::sbp::MAX_ORDER)));
        }
        for tag in self.walls.keys() {
            if self.far_field.contains_key(tag) {
                return Err(SolverError::Config(format!("tag '{tag}' has both a wall and a far-field condition")));
            }
        }
        match self.initial {
            InitialConfig::AnnulusProfile { .. } => {
                if !matches!(self.mesh, MeshConfig::Annulus { .. }) {
                    return Err(SolverError::Config("annulus_profile needs an annulus mesh".into()));
                }
                if self.gas.mu <= 0.0 {
                    return Err(SolverError::Config("annulus_profile needs a viscous gas".into()));
                }
            }
            InitialConfig::DensityWave { .. } => {
                let periodic = match self.mesh {
                    MeshConfig::Box { periodic, .. } => periodic == [true; 3],
                    MeshConfig::PerturbedBox { .. } => true,
                    MeshConfig::Annulus { .. } => false,
                };
                if !periodic {
                    return Err(SolverError::Config("density_wave needs a fully periodic box".into()));
                }
            }
            InitialConfig::Uniform { .. } => {}
        }
        if let Some(s) = &self.study {
            if s.orders.is_empty() || s.refinements.is_empty() {
                return Err(SolverError::Config("study needs orders and refinements".into()));
            }
        }
        Ok(())
    }

    /// Boundary conditions by tag; every referenced tag must exist in the mesh.
    pub fn boundary_conditions(&self, mesh: &Mesh) -> Result<HashMap<String, BoundaryCondition>> {
        let tags = mesh.tags();
        let mut out = HashMap::new();
        for (tag, w) in &self.walls {
            if !tags.contains(tag) {
                return Err(SolverError::Config(format!(
                    "wall tag '{tag}' does not exist in the mesh (tags: {})",
                    tags.join(", ")
                )));
            }
            let mode = w.mode.unwrap_or(self.flow.mode);
            out.insert(
                tag.clone(),
                BoundaryCondition::Wall {
                    spec: WallSpec { motion: w.motion, heat: w.heat, beta: 0.0, mode },
                    penalty: w.beta.resolve()?,
                },
            );
        }
        for (tag, f) in &self.far_field {
            if !tags.contains(tag) {
                return Err(SolverError::Config(format!("far-field tag '{tag}' does not exist in the mesh")));
            }
            out.insert(
                tag.clone(),
                BoundaryCondition::FarField {
                    state: [f.density, f.velocity[0], f.velocity[1], f.velocity[2], f.temperature],
                },
            );
        }
        Ok(out)
    }
}
