//! Case setup from a configuration, time integration with entropy-balance
//! logging, and convergence studies.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::config::{CaseConfig, InitialConfig, MeshConfig};
use crate::diagnostics::{
    error_norms, run_convergence_study, study_csv, write_fields, FieldFile, ForceWriter, Norms, StudyRow,
    TimeSeriesWriter,
};
use crate::error::{Result, SolverError};
use crate::gas::{prim_to_cons, GasParameters, Primitive};
use crate::mesh::Mesh;
use crate::rhs::{Discretization, EntropyBalanceRecord, RhsDiagnostics};
use crate::time::{integrate, IntegrationOutcome};

/// Axial velocity of fully developed flow in an annulus driven by the
/// pressure-gradient forcing `g`.
pub fn annulus_axial_velocity(r: f64, ri: f64, ro: f64, g: f64, mu: f64) -> f64 {
    g / (4.0 * mu) * ((ri * ri - r * r) + (ro * ro - ri * ri) * (r / ri).ln() / (ro / ri).ln())
}

/// Peak of [`annulus_axial_velocity`].
pub fn annulus_peak_velocity(ri: f64, ro: f64, g: f64, mu: f64) -> f64 {
    let r = ((ro * ro - ri * ri) / (2.0 * (ro / ri).ln())).sqrt();
    annulus_axial_velocity(r, ri, ro, g, mu)
}

/// Bound discretization with its initial state.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub disc: Discretization,
    pub q0: Vec<[f64; 5]>,
}

fn initial_prim(cfg: &CaseConfig, gas: &GasParameters, x: &[f64; 3]) -> Primitive {
    match cfg.initial {
        InitialConfig::Uniform { density, velocity, temperature } => {
            [density, velocity[0], velocity[1], velocity[2], temperature]
        }
        InitialConfig::AnnulusProfile { density, mach } => {
            let (ri, ro) = match cfg.mesh {
                MeshConfig::Annulus { inner_radius, outer_radius, .. } => (inner_radius, outer_radius),
                _ => unreachable!("validated"),
            };
            let g = cfg.flow.body_force[2];
            let peak = annulus_peak_velocity(ri, ro, g, gas.mu);
            let c = peak / mach;
            let temperature = c * c / (gas.gamma * gas.r);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            [density, 0.0, 0.0, annulus_axial_velocity(r, ri, ro, g, gas.mu), temperature]
        }
        InitialConfig::DensityWave { .. } => density_wave(cfg, gas, x, 0.0),
    }
}

fn box_lengths(cfg: &CaseConfig) -> [f64; 3] {
    match cfg.mesh {
        MeshConfig::Box { lengths, .. } | MeshConfig::PerturbedBox { lengths, .. } => lengths,
        MeshConfig::Annulus { .. } => [1.0; 3],
    }
}

fn density_wave(cfg: &CaseConfig, gas: &GasParameters, x: &[f64; 3], t: f64) -> Primitive {
    let InitialConfig::DensityWave { amplitude, velocity, pressure } = cfg.initial else {
        unreachable!("density wave only")
    };
    let l = box_lengths(cfg);
    let phase: f64 = (0..3).map(|i| (x[i] - velocity[i] * t) / l[i]).sum();
    let rho = 1.0 + amplitude * (2.0 * std::f64::consts::PI * phase).sin();
    [rho, velocity[0], velocity[1], velocity[2], pressure / (rho * gas.r)]
}

/// Quantity compared against an exact solution in convergence studies.
pub fn study_error(cfg: &CaseConfig, mesh: &Mesh, q: &[[f64; 5]], t: f64) -> Result<Norms> {
    let gas = cfg.gas.build()?;
    match cfg.initial {
        InitialConfig::AnnulusProfile { .. } => {
            let (ri, ro) = match cfg.mesh {
                MeshConfig::Annulus { inner_radius, outer_radius, .. } => (inner_radius, outer_radius),
                _ => unreachable!("validated"),
            };
            let g = cfg.flow.body_force[2];
            let field: Vec<f64> = q.iter().map(|s| s[3] / s[0]).collect();
            error_norms(mesh, &field, |x| {
                annulus_axial_velocity((x[0] * x[0] + x[1] * x[1]).sqrt(), ri, ro, g, gas.mu)
            })
        }
        InitialConfig::DensityWave { .. } => {
            let field: Vec<f64> = q.iter().map(|s| s[0]).collect();
            error_norms(mesh, &field, |x| density_wave(cfg, &gas, x, t)[0])
        }
        InitialConfig::Uniform { .. } => Err(SolverError::Config(
            "convergence studies need an initial condition with an exact solution".into(),
        )),
    }
}

pub fn setup(cfg: &CaseConfig) -> Result<CaseSetup> {
    cfg.validate()?;
    let gas = cfg.gas.build()?;
    let mesh = cfg.mesh.build()?;
    let bcs = cfg.boundary_conditions(&mesh)?;
    let mut q0 = Vec::with_capacity(mesh.elements.len() * mesh.nodes_per_element());
    for el in &mesh.elements {
        for x in &el.coords {
            q0.push(prim_to_cons(&initial_prim(cfg, &gas, x), &gas).map_err(|e| {
                SolverError::Config(format!("initial state is not admissible: {e}"))
            })?);
        }
    }
    let mut disc = Discretization::new(mesh, gas, cfg.flow.mode, &bcs, cfg.flow.interface_penalty.resolve()?)?;
    disc.body_force = cfg.flow.body_force;
    Ok(CaseSetup { disc, q0 })
}

/// Result of a run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcome: IntegrationOutcome,
    /// Entropy balance at the initial state and after every accepted step.
    pub records: Vec<EntropyBalanceRecord>,
    pub q: Vec<[f64; 5]>,
}

impl RunSummary {
    /// Largest `|residual| / max(|DT|, Σ|P J w dq/dt|)` over the records.
    pub fn worst_relative_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.residual.abs() / r.dt.abs().max(r.magnitude).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn as_nodes(y: &[f64]) -> &[[f64; 5]] {
    let (nodes, rest) = y.as_chunks::<5>();
    debug_assert!(rest.is_empty());
    nodes
}

fn as_nodes_mut(y: &mut [f64]) -> &mut [[f64; 5]] {
    let (nodes, rest) = y.as_chunks_mut::<5>();
    debug_assert!(rest.is_empty());
    nodes
}

/// Files written by a run; `None` disables an output.
#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub timeseries: Option<PathBuf>,
    pub forces: Option<PathBuf>,
    pub fields: Option<PathBuf>,
}

impl OutputPaths {
    pub fn from_config(cfg: &CaseConfig, dir_override: Option<&Path>) -> Self {
        let dir = dir_override.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        let join = |f: &Option<String>| f.as_ref().map(|f| dir.join(f));
        OutputPaths {
            timeseries: join(&cfg.output.timeseries),
            forces: join(&cfg.output.forces),
            fields: join(&cfg.output.fields),
        }
    }
}

/// Integrates a case to `run.t_end`, recording the entropy balance after
/// every accepted step.
pub fn run_case(cfg: &CaseConfig, case: &CaseSetup, outputs: &OutputPaths) -> Result<RunSummary> {
    let disc = &case.disc;
    let wall_tags: Vec<String> = cfg
        .walls
        .keys()
        .filter(|t| disc.mesh.tags().contains(t))
        .cloned()
        .collect();
    let mut series = outputs.timeseries.as_ref().map(TimeSeriesWriter::create).transpose()?;
    let mut forces = match (&outputs.forces, wall_tags.is_empty()) {
        (Some(p), false) => Some(ForceWriter::create(p, &wall_tags)?),
        _ => None,
    };

    // the last RHS evaluation of an accepted step is at the new state, so its
    // diagnostics belong to that state
    let last: Mutex<Option<(f64, RhsDiagnostics)>> = Mutex::new(None);
    let rhs = |t: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
        let diag = disc.compute_rhs_with_diagnostics(as_nodes(y), t, as_nodes_mut(d))?;
        *last.lock().expect("diagnostics lock") = Some((t, diag));
        Ok(())
    };

    let mut records = Vec::new();
    let mut record = |t: f64, y: &[f64], dydt: &[f64], diag: &RhsDiagnostics| -> Result<()> {
        let rec = disc.entropy_rhs_contraction(as_nodes(y), as_nodes(dydt), diag, t)?;
        if let Some(w) = series.as_mut() {
            w.push(&rec)?;
        }
        if let Some(w) = forces.as_mut() {
            w.push(t, &disc.wall_forces(as_nodes(y), &wall_tags)?)?;
        }
        records.push(rec);
        Ok(())
    };

    let y0: Vec<f64> = case.q0.as_flattened().to_vec();
    {
        let mut d0 = vec![0.0; y0.len()];
        let diag = disc.compute_rhs_with_diagnostics(&case.q0, 0.0, as_nodes_mut(&mut d0))?;
        record(0.0, &y0, &d0, &diag)?;
    }
    let max_accepted = cfg.run.max_accepted;
    let outcome = integrate(y0, 0.0, cfg.run.t_end, &cfg.integrator, rhs, |step| {
        let (t, diag) = last.lock().expect("diagnostics lock").expect("rhs evaluated");
        debug_assert_eq!(t, step.t);
        record(step.t, step.y, step.dydt, &diag)?;
        Ok(match max_accepted {
            Some(m) if step.step >= m => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        })
    })?;
    drop(record);
    if let Some(w) = series {
        w.finish()?;
    }
    if let Some(w) = forces {
        w.finish()?;
    }
    let q = as_nodes(&outcome.y).to_vec();
    if let Some(p) = &outputs.fields {
        write_fields(p, &FieldFile::from_mesh(&disc.mesh, &q)?)?;
    }
    Ok(RunSummary { outcome, records, q })
}

/// Runs the configured case on every `(order, refinement)` pair and measures
/// the error against the exact solution at `run.t_end`.
pub fn run_study(cfg: &CaseConfig) -> Result<Vec<StudyRow>> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| SolverError::Config("the configuration has no [study] section".into()))?;
    run_convergence_study(&study.orders, &study.refinements, |p, n| {
        let mut c = cfg.clone();
        c.mesh = cfg.mesh.refined(p, n);
        let case = setup(&c)?;
        let out = run_case(&c, &case, &OutputPaths::default())?;
        study_error(&c, &case.disc.mesh, &out.q, out.outcome.t)
    })
}

pub fn write_study(path: impl AsRef<Path>, rows: &[StudyRow]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SolverError::io(dir, e))?;
    }
    std::fs::write(path, study_csv(rows)).map_err(|e| SolverError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_profile_satisfies_the_ode_and_walls() {
        let (ri, ro, g, mu) = (0.125, 0.5, 1.0, 1.0);
        assert!(annulus_axial_velocity(ri, ri, ro, g, mu).abs() < 1e-16);
        assert!(annulus_axial_velocity(ro, ri, ro, g, mu).abs() < 1e-15);
        // μ (U'' + U'/r) = -g, checked by central differences
        for r in [0.2, 0.3, 0.45] {
            let h = 1e-4;
            let u = |r| annulus_axial_velocity(r, ri, ro, g, mu);
            let d2 = (u(r + h) - 2.0 * u(r) + u(r - h)) / (h * h);
            let d1 = (u(r + h) - u(r - h)) / (2.0 * h);
            assert!((mu * (d2 + d1 / r) + g).abs() < 1e-6);
        }
        let peak = annulus_peak_velocity(ri, ro, g, mu);
        assert!((peak - 0.018_45).abs() < 1e-5, "{peak}");
        for i in 0..100 {
            let r = ri + (ro - ri) * i as f64 / 99.0;
            assert!(annulus_axial_velocity(r, ri, ro, g, mu) <= peak + 1e-16);
        }
    }

    #[test]
    fn density_wave_run_converges_to_exact_solution() {
        let text = r#"
[mesh]
kind = "box"
order = 3
elements = [2, 2, 2]
periodic = [true, true, true]
[initial]
kind = "density_wave"
velocity = [0.5, 0.2, -0.3]
[integrator]
rtol = 1e-9
atol = 1e-9
[run]
t_end = 0.1
[study]
orders = [3]
refinements = [2, 4]
"#;
        let cfg = CaseConfig::from_toml(text).unwrap();
        let case = setup(&cfg).unwrap();
        let out = run_case(&cfg, &case, &OutputPaths::default()).unwrap();
        assert!((out.outcome.t - 0.1).abs() < 1e-15);
        assert_eq!(out.records.len(), out.outcome.accepted + 1);
        assert!(out.worst_relative_residual() < 1e-12);

        let rows = run_study(&cfg).unwrap();
        let rate = rows[1].rates.unwrap()[1];
        assert!(rate > 2.5, "{rows:?}");
    }
}
