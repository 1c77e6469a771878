//! Benchmark problems: domains, initial data, run defaults and references.

use std::f64::consts::PI;

use crate::diagnostics::{eoc, l2_error, restrict, EocTable, NormWeight};
use crate::error::{Error, Result};
use crate::fluxes::SchemeKind;
use crate::grid::{BoundaryKind, Field, Grid};
use crate::integrator::{run, EndTimePolicy, LambdaPolicy, StepConfig};
use crate::kinetic::DEFAULT_LAMBDA_SAFETY;
use crate::linalg::{Point, State};
use crate::models::{advection_exact, burgers_exact, Model, SwState};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    Advection,
    Rotation,
    Burgers,
    SwExpansion,
    SwDambreak,
    SwPeriodic,
    SwVortex,
    SwCylDambreak,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::Advection,
        CaseId::Rotation,
        CaseId::Burgers,
        CaseId::SwExpansion,
        CaseId::SwDambreak,
        CaseId::SwPeriodic,
        CaseId::SwVortex,
        CaseId::SwCylDambreak,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::Advection => "advection",
            CaseId::Rotation => "rotation",
            CaseId::Burgers => "burgers",
            CaseId::SwExpansion => "sw-expansion",
            CaseId::SwDambreak => "sw-dambreak",
            CaseId::SwPeriodic => "sw-periodic",
            CaseId::SwVortex => "sw-vortex",
            CaseId::SwCylDambreak => "sw-cyl-dambreak",
        }
    }
}

/// What a convergence study measures errors against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form solution sampled at cell centres.
    Exact,
    /// Numerical solution on a finer grid, restricted by block averaging.
    SelfConvergence {
        cells: usize,
    },
    None,
}

/// A scheme the case is run with and its end time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseRun {
    pub scheme: SchemeKind,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub id: CaseId,
    pub model: Model,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub cells: [usize; 2],
    pub boundary: BoundaryKind,
    /// The first entry is the default.
    pub runs: Vec<CaseRun>,
    pub cfl: f64,
    pub eoc_grids: Vec<usize>,
    pub reference: ReferenceKind,
}

pub fn build_case(name: &str) -> Result<CaseConfig> {
    let id = CaseId::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| Error::UnknownCase(name.to_string()))?;
    Ok(case(id))
}

fn run_of(scheme: SchemeKind, t_end: f64) -> CaseRun {
    CaseRun { scheme, t_end }
}

pub fn case(id: CaseId) -> CaseConfig {
    let sw1 = Model::ShallowWater { dim: 1 };
    let sw2 = Model::ShallowWater { dim: 2 };
    let base = |model, lo, hi, cells, boundary, runs, cfl| CaseConfig {
        id,
        model,
        lo,
        hi,
        cells,
        boundary,
        runs,
        cfl,
        eoc_grids: Vec::new(),
        reference: ReferenceKind::None,
    };
    match id {
        CaseId::Advection => CaseConfig {
            eoc_grids: vec![32, 64, 128, 256],
            reference: ReferenceKind::Exact,
            ..base(
                Model::Advection,
                [0.0, 0.0],
                [2.0 * PI, 0.0],
                [256, 1],
                BoundaryKind::Periodic,
                vec![run_of(SchemeKind::EC, 2.0 * PI)],
                0.1,
            )
        },
        CaseId::Rotation => base(
            Model::Rotation,
            [-1.0, -0.5],
            [1.0, 1.5],
            [256, 256],
            BoundaryKind::FixedFromInitial,
            vec![run_of(SchemeKind::EC, 0.5)],
            0.9,
        ),
        CaseId::Burgers => CaseConfig {
            eoc_grids: vec![64, 128, 256],
            reference: ReferenceKind::Exact,
            ..base(
                Model::Burgers,
                [0.0, 0.0],
                [1.0, 0.0],
                [256, 1],
                BoundaryKind::Periodic,
                vec![run_of(SchemeKind::EC, 0.1 / (2.0 * PI)), run_of(SchemeKind::ES2, 0.25)],
                0.1,
            )
        },
        CaseId::SwExpansion => base(
            sw1,
            [-1.0, 0.0],
            [1.0, 0.0],
            [128, 1],
            BoundaryKind::FixedFromInitial,
            vec![run_of(SchemeKind::ES1, 0.1)],
            0.1,
        ),
        CaseId::SwDambreak => base(
            sw1,
            [-1.0, 0.0],
            [1.0, 0.0],
            [128, 1],
            BoundaryKind::FixedFromInitial,
            vec![run_of(SchemeKind::ES1, 0.15), run_of(SchemeKind::ES2Limited, 0.15)],
            0.4,
        ),
        CaseId::SwPeriodic => CaseConfig {
            eoc_grids: vec![32, 64, 128, 256],
            reference: ReferenceKind::SelfConvergence { cells: 512 },
            ..base(
                sw2,
                [0.0, 0.0],
                [1.0, 1.0],
                [256, 256],
                BoundaryKind::Periodic,
                vec![run_of(SchemeKind::EC, 0.1)],
                0.5,
            )
        },
        CaseId::SwVortex => CaseConfig {
            eoc_grids: vec![32, 64, 128],
            reference: ReferenceKind::Exact,
            ..base(
                sw2,
                [0.0, 0.0],
                [1.0, 1.0],
                [256, 256],
                BoundaryKind::Periodic,
                vec![run_of(SchemeKind::EC, 0.1)],
                0.5,
            )
        },
        CaseId::SwCylDambreak => base(
            sw2,
            [-1.0, -1.0],
            [1.0, 1.0],
            [100, 100],
            BoundaryKind::Periodic,
            vec![run_of(SchemeKind::ES1, 0.2), run_of(SchemeKind::ES2Limited, 0.2)],
            0.4,
        ),
    }
}

/// Background velocity of the vortex along the first axis.
const VORTEX_DRIFT: f64 = 0.6;

/// `k(q)` of the vortex depth profile.
fn vortex_k(q: f64) -> f64 {
    2.0 * q.cos() + 2.0 * q * q.sin() + (2.0 * q).cos() / 8.0 + 0.25 * q * (2.0 * q).sin() + 0.75 * q * q
}

fn sw_state<T: Real>(rho: f64, u1: f64, u2: f64, dim: usize) -> State<T> {
    SwState {
        rho: T::lit(rho),
        vel: [T::lit(u1), T::lit(u2)],
        dim,
    }
    .to_conserved()
}

impl CaseConfig {
    pub fn name(&self) -> &'static str {
        self.id.name()
    }

    pub fn scheme(&self) -> SchemeKind {
        self.runs[0].scheme
    }

    pub fn t_end(&self) -> f64 {
        self.runs[0].t_end
    }

    /// End time paired with `scheme`, falling back to the default run's.
    pub fn t_end_for(&self, scheme: SchemeKind) -> f64 {
        self.runs
            .iter()
            .find(|r| r.scheme == scheme)
            .map_or(self.t_end(), |r| r.t_end)
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Grid with `n` cells in every active direction.
    pub fn grid<T: Real>(&self, n: [usize; 2]) -> Result<Grid<T>> {
        let d = self.dim();
        let lo: Vec<T> = self.lo[..d].iter().map(|&v| T::lit(v)).collect();
        let hi: Vec<T> = self.hi[..d].iter().map(|&v| T::lit(v)).collect();
        Grid::new(&n[..d], &lo, &hi)
    }

    pub fn default_grid<T: Real>(&self) -> Result<Grid<T>> {
        self.grid(self.cells)
    }

    /// Square (or 1D) grid of `n` cells per direction.
    pub fn uniform_grid<T: Real>(&self, n: usize) -> Result<Grid<T>> {
        self.grid([n, n])
    }

    /// Initial state at position `x`.
    pub fn initial<T: Real>(&self, x: Point<T>) -> State<T> {
        let (x1, x2) = (x[0].as_f64(), x[1].as_f64());
        let scalar = |v: f64| [T::lit(v), T::zero(), T::zero()];
        match self.id {
            CaseId::Advection => scalar(x1.sin().powi(4)),
            CaseId::Rotation => {
                let r = ((x1 - 0.0).powi(2) + (x2 - 0.5).powi(2)).sqrt();
                scalar(if r < 0.25 {
                    0.5 * (1.0 + (PI * r / 0.25).cos())
                } else {
                    0.0
                })
            }
            CaseId::Burgers => scalar((2.0 * PI * x1).sin()),
            CaseId::SwExpansion => sw_state(1.0, if x1 < 0.0 { -4.0 } else { 4.0 }, 0.0, 1),
            CaseId::SwDambreak => sw_state(if x1 < 0.0 { 15.0 } else { 1.0 }, 0.0, 0.0, 1),
            CaseId::SwPeriodic => {
                let s = (2.0 * PI * (x1 + x2)).sin();
                let u = (2.0 * PI * (x1 - x2)).sin();
                sw_state(1.0 + s * s, u, u, 2)
            }
            CaseId::SwVortex => {
                let (dx, dy) = (x1 - 0.5, x2 - 0.5);
                let rc = 4.0 * PI * (dx * dx + dy * dy).sqrt();
                let inside = if rc < PI { 1.0 } else { 0.0 };
                let rho = 110.0 + 0.64 * (1.5 / (4.0 * PI)).powi(2) * inside * (vortex_k(rc) - vortex_k(PI));
                let swirl = 1.5 * (1.0 + rc.cos()) * inside;
                sw_state(rho, VORTEX_DRIFT + swirl * (0.5 - x2), swirl * (x1 - 0.5), 2)
            }
            CaseId::SwCylDambreak => {
                let r = (x1 * x1 + x2 * x2).sqrt();
                sw_state(if r < 0.5 { 2.0 } else { 1.0 }, 0.0, 0.0, 2)
            }
        }
    }

    /// Initial condition sampled at every cell centre, ghosts included.
    pub fn initial_field<T: Real>(&self, grid: &Grid<T>) -> Field<T> {
        Field::from_fn(grid, self.model.vars(), |x| self.initial(x))
    }

    /// Closed-form reference, for cases that have one. For the vortex this is
    /// the initial vortex carried by the background flow, which the depth
    /// profile only approximately balances.
    pub fn exact<T: Real>(&self, x: Point<T>, t: T) -> Option<Result<State<T>>> {
        match self.id {
            CaseId::SwVortex => {
                let shifted = (x[0].as_f64() - VORTEX_DRIFT * t.as_f64()).rem_euclid(1.0);
                Some(Ok(self.initial([T::lit(shifted), x[1]])))
            }
            CaseId::Advection => Some(Ok([advection_exact(x[0], t), T::zero(), T::zero()])),
            CaseId::Burgers => {
                Some(burgers_exact(x[0], t, T::lit(1e-15).max(T::epsilon())).map(|u| [u, T::zero(), T::zero()]))
            }
            _ => None,
        }
    }

    pub fn has_exact(&self) -> bool {
        matches!(self.id, CaseId::Advection | CaseId::Burgers | CaseId::SwVortex)
    }

    pub fn exact_field<T: Real>(&self, grid: &Grid<T>, t: T) -> Option<Result<Field<T>>> {
        if !self.has_exact() {
            return None;
        }
        let mut out = Field::zeros(grid, self.model.vars());
        for (i, j) in grid.interior_cells() {
            match self.exact(grid.center(i, j), t)? {
                Ok(s) => out.set(grid.index(i, j), &s),
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(out))
    }

    pub fn step_config<T: Real>(&self, scheme: SchemeKind, t_end: f64) -> StepConfig<T> {
        StepConfig {
            cfl: T::lit(self.cfl),
            scheme,
            lambda_policy: LambdaPolicy::PerStep,
            lambda_safety: T::lit(DEFAULT_LAMBDA_SAFETY),
            t_end: T::lit(t_end),
            end_time: EndTimePolicy::Exact,
            boundary: self.boundary,
        }
    }
}

/// Runs `case` on each grid in `grids` (coarse to fine) and tabulates the L2
/// errors against the case's reference.
pub fn convergence_study<T: Real>(
    case: &CaseConfig,
    grids: &[usize],
    config: &StepConfig<T>,
    weight: NormWeight,
) -> Result<EocTable<T>> {
    if grids.len() < 2 {
        return Err(Error::EocUndefined(grids.len()));
    }
    let solve = |n: usize| -> Result<Field<T>> {
        let grid = case.uniform_grid::<T>(n)?;
        let init = case.initial_field(&grid);
        run(&case.model, &init, config).map(|o| o.state.u).map_err(|f| f.error)
    };
    let fine = match case.reference {
        ReferenceKind::SelfConvergence { cells } => {
            if let Some(&bad) = grids.iter().find(|&&n| n == 0 || cells % n != 0 || n >= cells) {
                return Err(Error::Domain(format!(
                    "grid {bad} does not evenly coarsen the {cells}-cell reference"
                )));
            }
            Some(solve(cells)?)
        }
        ReferenceKind::Exact => None,
        ReferenceKind::None => return Err(Error::Domain(format!("case {} has no reference solution", case.name()))),
    };
    let mut rows = Vec::with_capacity(grids.len());
    for &n in grids {
        let u = solve(n)?;
        let grid = u.grid().clone();
        let reference = match &fine {
            Some(f) => restrict(f, &grid)?,
            None => case.exact_field(&grid, config.t_end).expect("exact reference")?,
        };
        let errs = l2_error(&u, &reference, weight)?;
        rows.push((n, grid.dx(0), errs));
    }
    eoc(&rows)
}
