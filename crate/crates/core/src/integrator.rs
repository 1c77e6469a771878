//! Semi-discrete operator and SSPRK(3,3) time stepping.
//!
//! The prognostic variables are the velocity components `F_m`. After every
//! Runge–Kutta stage the moment `U = Σ_m F_m` is rebuilt, its ghost cells are
//! refreshed from the boundary condition, and the ghost `F_m` are set to the
//! Maxwellian of the ghost `U`. Interface fluxes depend on `F_m` only through
//! `U`.

use rayon::prelude::*;

use crate::diagnostics::{EntropyRecorder, EntropyReport};
use crate::error::{Error, Result};
use crate::fluxes::{interface_fluxes, summed_flux, FluxRequest, SchemeKind};
use crate::grid::{apply_bc, BoundaryKind, Field, Grid};
use crate::kinetic::{build_velocity_set, lambda_bound, maxwellian, KineticField, VelocitySet, MAX_VELOCITIES};
use crate::linalg::{sub, zero, State};
use crate::models::Model;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaPolicy {
    /// Recompute `λ` before every step and re-project `F_m` when it changes.
    PerStep,
    /// Compute `λ` once from the initial state.
    Frozen,
}

impl std::str::FromStr for LambdaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-step" => Ok(LambdaPolicy::PerStep),
            "frozen" => Ok(LambdaPolicy::Frozen),
            other => Err(Error::Domain(format!("unknown lambda policy `{other}`"))),
        }
    }
}

/// How the last step meets the end time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndTimePolicy {
    /// Shorten the last step so the run stops exactly at `t_end`.
    Exact,
    /// Keep every step at the CFL size and stop at the first time `>= t_end`.
    FirstReach,
}

impl std::str::FromStr for EndTimePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EndTimePolicy::Exact),
            "first-reach" => Ok(EndTimePolicy::FirstReach),
            other => Err(Error::Domain(format!("unknown end-time policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig<T> {
    pub cfl: T,
    pub scheme: SchemeKind,
    pub lambda_policy: LambdaPolicy,
    pub lambda_safety: T,
    pub t_end: T,
    pub end_time: EndTimePolicy,
    pub boundary: BoundaryKind,
}

impl<T: Real> StepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero()) || self.cfl > T::one() {
            return Err(Error::Domain(format!(
                "CFL number must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return Err(Error::Domain(format!(
                "end time must be finite and non-negative, got {}",
                self.t_end
            )));
        }
        if !(self.lambda_safety > T::one()) {
            return Err(Error::Domain(format!(
                "lambda safety factor must exceed 1, got {}",
                self.lambda_safety
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunState<T> {
    pub time: T,
    pub u: Field<T>,
    pub f: KineticField<T>,
    pub vset: VelocitySet<T>,
    pub step: usize,
}

/// Flux kernel evaluated at each face, writing `width` blocks of `p` values.
trait FaceKernel<T>: Sync {
    fn width(&self) -> usize;
    fn eval(&self, req: &FluxRequest<T>) -> Result<[State<T>; MAX_VELOCITIES]>;
}

struct KineticKernel<'a, T> {
    scheme: SchemeKind,
    model: &'a Model,
    vset: &'a VelocitySet<T>,
}

impl<T: Real> FaceKernel<T> for KineticKernel<'_, T> {
    fn width(&self) -> usize {
        self.vset.len()
    }

    fn eval(&self, req: &FluxRequest<T>) -> Result<[State<T>; MAX_VELOCITIES]> {
        interface_fluxes(self.scheme, self.model, self.vset, req)
    }
}

struct SummedKernel<'a, T> {
    scheme: SchemeKind,
    model: &'a Model,
    vset: &'a VelocitySet<T>,
}

impl<T: Real> FaceKernel<T> for SummedKernel<'_, T> {
    fn width(&self) -> usize {
        1
    }

    fn eval(&self, req: &FluxRequest<T>) -> Result<[State<T>; MAX_VELOCITIES]> {
        let mut out = [zero(); MAX_VELOCITIES];
        out[0] = summed_flux(self.scheme, self.model, self.vset, req)?;
        Ok(out)
    }
}

/// Flux differences `−(flux_{i+½} − flux_{i−½})/Δx_d` for the interior cells
/// of one line, laid out cell by cell with `width · p` values each.
fn line_update<T: Real, K: FaceKernel<T>>(
    model: &Model,
    kernel: &K,
    u: &Field<T>,
    d: usize,
    line: usize,
) -> Result<Vec<T>> {
    let grid = u.grid();
    let p = u.components();
    let w = kernel.width();
    let offs = grid.line(d, line);
    let len = offs.len();
    let states: Vec<State<T>> = offs.iter().map(|&o| u.state(o)).collect();
    let vars: Vec<State<T>> = states.iter().map(|s| model.entropy_variable(s)).collect();
    let jumps: Vec<State<T>> = (0..len - 1).map(|c| sub(&vars[c + 1], &vars[c])).collect();
    // faces between local cells c and c + 1 for c = 1..=n + 1
    let mut faces = Vec::with_capacity(len - 3);
    for c in 1..len - 2 {
        let req = FluxRequest {
            d,
            ul: states[c],
            ur: states[c + 1],
            vl: vars[c],
            vr: vars[c + 1],
            jump_prev: jumps[c - 1],
            jump_next: jumps[c + 1],
            x: grid.face_point(d, line, c),
        };
        faces.push(kernel.eval(&req)?);
    }
    let inv_dx = T::one() / grid.dx(d);
    let n = grid.cells(d);
    let mut out = vec![T::zero(); n * w * p];
    for (i, chunk) in out.chunks_exact_mut(w * p).enumerate() {
        let (left, right) = (&faces[i], &faces[i + 1]);
        for m in 0..w {
            for k in 0..p {
                chunk[m * p + k] = -(right[m][k] - left[m][k]) * inv_dx;
            }
        }
    }
    Ok(out)
}

fn assemble<T: Real, K: FaceKernel<T>>(model: &Model, kernel: &K, u: &Field<T>, out: &mut [T]) -> Result<()> {
    let grid = u.grid();
    let block = kernel.width() * u.components();
    if out.len() != grid.storage_len() * block {
        return Err(Error::LengthMismatch {
            left: out.len(),
            right: grid.storage_len() * block,
        });
    }
    out.iter_mut().for_each(|v| *v = T::zero());
    for d in 0..grid.dim() {
        let lines: Vec<Vec<T>> = (0..grid.line_count(d))
            .into_par_iter()
            .map(|line| line_update(model, kernel, u, d, line))
            .collect::<Result<_>>()?;
        for (line, upd) in lines.iter().enumerate() {
            let offs = grid.line(d, line);
            for (i, chunk) in upd.chunks_exact(block).enumerate() {
                let base = offs[i + crate::grid::GHOST] * block;
                for (o, v) in out[base..base + block].iter_mut().zip(chunk) {
                    *o = *o + *v;
                }
            }
        }
    }
    Ok(())
}

/// Kinetic right-hand side from a moment field whose ghosts are filled,
/// written into `out` (layout of [`KineticField::values`]; ghosts zero).
pub fn rhs_from_moments<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    scheme: SchemeKind,
    u: &Field<T>,
    out: &mut [T],
) -> Result<()> {
    assemble(model, &KineticKernel { scheme, model, vset }, u, out)
}

/// `dF_m/dt` of the three-point conservative scheme.
pub fn semi_discrete_rhs<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    kfield: &KineticField<T>,
    scheme: SchemeKind,
    boundary: BoundaryKind,
    frozen: Option<&Field<T>>,
) -> Result<KineticField<T>> {
    let mut u = kfield.moments();
    apply_bc(&mut u, boundary, frozen)?;
    let mut out = KineticField::zeros(kfield.grid(), kfield.components(), kfield.velocities());
    rhs_from_moments(model, vset, scheme, &u, out.values_mut())?;
    Ok(out)
}

/// `dU/dt` evolved directly with the velocity-summed fluxes. `u` must have its
/// ghosts filled.
pub fn macroscopic_rhs<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    scheme: SchemeKind,
    u: &Field<T>,
) -> Result<Field<T>> {
    let mut out = Field::zeros(u.grid(), u.components());
    assemble(model, &SummedKernel { scheme, model, vset }, u, out.values_mut())?;
    Ok(out)
}

/// `min(C · min_d Δx_d / λ, T − t)`, without the second bound under
/// [`EndTimePolicy::FirstReach`].
pub fn compute_dt<T: Real>(config: &StepConfig<T>, grid: &Grid<T>, lambda: T, time: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::Domain(format!("velocity scale must be positive, got {lambda}")));
    }
    let dt = config.cfl * grid.min_dx() / lambda;
    Ok(match config.end_time {
        EndTimePolicy::Exact => dt.min(config.t_end - time),
        EndTimePolicy::FirstReach => dt,
    })
}

/// A system advanced by [`ssprk3`].
pub trait StageSystem<T> {
    /// `out = L(y)`
    fn rhs(&mut self, y: &[T], out: &mut [T]) -> Result<()>;

    /// Called after each stage (1, 2, 3) on the freshly combined values.
    fn after_stage(&mut self, _stage: usize, _y: &mut [T]) -> Result<()> {
        Ok(())
    }
}

/// One SSPRK(3,3) step in Shu–Osher form, in place.
pub fn ssprk3<T: Real, S: StageSystem<T>>(sys: &mut S, y: &mut [T], dt: T) -> Result<()> {
    let n = y.len();
    let y0 = y.to_vec();
    let mut l = vec![T::zero(); n];
    let (three_q, q, third, two_third) = (T::lit(0.75), T::lit(0.25), T::lit(1.0 / 3.0), T::lit(2.0 / 3.0));

    sys.rhs(y, &mut l)?;
    for (yi, li) in y.iter_mut().zip(&l) {
        *yi = *yi + dt * *li;
    }
    sys.after_stage(1, y)?;

    sys.rhs(y, &mut l)?;
    for ((yi, li), y0i) in y.iter_mut().zip(&l).zip(&y0) {
        *yi = three_q * *y0i + q * (*yi + dt * *li);
    }
    sys.after_stage(2, y)?;

    sys.rhs(y, &mut l)?;
    for ((yi, li), y0i) in y.iter_mut().zip(&l).zip(&y0) {
        *yi = third * *y0i + two_third * (*yi + dt * *li);
    }
    sys.after_stage(3, y)?;
    Ok(())
}

/// Stage system for the kinetic variables. Holds the moment field of the
/// current stage with its ghosts filled.
struct KineticSystem<'a, T> {
    model: &'a Model,
    vset: VelocitySet<T>,
    scheme: SchemeKind,
    boundary: BoundaryKind,
    frozen: Option<&'a Field<T>>,
    u: Field<T>,
    velocities: usize,
    step: usize,
    time: T,
}

impl<T: Real> KineticSystem<'_, T> {
    fn blow_up(&self, stage: usize, detail: String) -> Error {
        Error::BlowUp {
            step: self.step,
            time: self.time.as_f64(),
            stage,
            detail,
        }
    }
}

impl<T: Real> StageSystem<T> for KineticSystem<'_, T> {
    fn rhs(&mut self, _y: &[T], out: &mut [T]) -> Result<()> {
        rhs_from_moments(self.model, &self.vset, self.scheme, &self.u, out)
    }

    fn after_stage(&mut self, stage: usize, y: &mut [T]) -> Result<()> {
        let grid = self.u.grid().clone();
        let p = self.u.components();
        let mm = self.velocities;
        for off in grid.interior_offsets() {
            let cell = &y[off * p * mm..(off + 1) * p * mm];
            let target = self.u.cell_mut(off);
            for k in 0..p {
                let mut s = cell[k];
                for m in 1..mm {
                    s = s + cell[m * p + k];
                }
                target[k] = s;
            }
            let finite = target.iter().all(|v| v.is_finite());
            let depth = target[0];
            if !finite {
                return Err(self.blow_up(stage, format!("non-finite state in cell {off}")));
            }
            if !self.model.is_scalar() && !(depth > T::zero()) {
                return Err(self.blow_up(stage, format!("depth {depth} in cell {off}")));
            }
        }
        apply_bc(&mut self.u, self.boundary, self.frozen)?;
        refresh_ghost_components(self.model, &self.vset, &self.u, y);
        Ok(())
    }
}

/// Sets the ghost `F_m` to the Maxwellian of the ghost moments.
fn refresh_ghost_components<T: Real>(model: &Model, vset: &VelocitySet<T>, u: &Field<T>, f: &mut [T]) {
    let grid = u.grid();
    let (p, mm) = (u.components(), vset.len());
    let (n0, n1) = (grid.cells(0) as isize, grid.cells(1) as isize);
    for (i, j) in grid.all_cells() {
        let interior = (0..n0).contains(&i) && (grid.dim() == 1 || (0..n1).contains(&j));
        if interior {
            continue;
        }
        let off = grid.index(i, j);
        let fm = maxwellian(model, vset, &u.state(off), &grid.center(i, j));
        let cell = &mut f[off * p * mm..(off + 1) * p * mm];
        for m in 0..mm {
            cell[m * p..(m + 1) * p].copy_from_slice(&fm[m][..p]);
        }
    }
}

/// Advances `state` by one SSPRK(3,3) step of size `dt` with its current
/// velocity set. `state.u` must have its ghosts filled.
pub fn ssprk3_step<T: Real>(
    model: &Model,
    state: &mut RunState<T>,
    dt: T,
    config: &StepConfig<T>,
    frozen: Option<&Field<T>>,
) -> Result<()> {
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let mut sys = KineticSystem {
        model,
        vset: state.vset,
        scheme: config.scheme,
        boundary: config.boundary,
        frozen,
        u: state.u.clone(),
        velocities: state.vset.len(),
        step: state.step + 1,
        time: state.time,
    };
    ssprk3(&mut sys, state.f.values_mut(), dt)?;
    state.u = sys.u;
    state.time = state.time + dt;
    state.step += 1;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub state: RunState<T>,
    pub report: EntropyReport<T>,
}

/// A run aborted mid-way, with everything accumulated before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure<T> {
    pub error: Error,
    pub state: RunState<T>,
    pub report: EntropyReport<T>,
}

impl<T> std::fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

/// Builds the initial state from `initial` (sampled at every cell including
/// ghosts): fills ghosts, fixes `λ` and projects onto the Maxwellian.
pub fn initial_state<T: Real>(model: &Model, initial: &Field<T>, config: &StepConfig<T>) -> Result<RunState<T>> {
    let mut u = initial.clone();
    let frozen = (config.boundary == BoundaryKind::FixedFromInitial).then_some(initial);
    apply_bc(&mut u, config.boundary, frozen)?;
    for off in u.grid().interior_offsets() {
        model.check_state(&u.state(off))?;
    }
    let lambda = lambda_bound(model, &u, config.lambda_safety)?;
    let vset = build_velocity_set(model.dim(), lambda)?;
    let f = KineticField::from_field(model, &vset, &u);
    Ok(RunState {
        time: T::zero(),
        u,
        f,
        vset,
        step: 0,
    })
}

/// Integrates from `t = 0` to `config.t_end` (or just past it under
/// [`EndTimePolicy::FirstReach`]), recording entropy diagnostics after every
/// accepted step.
pub fn run<T: Real>(
    model: &Model,
    initial: &Field<T>,
    config: &StepConfig<T>,
) -> std::result::Result<RunOutcome<T>, Box<RunFailure<T>>> {
    let fail_early = |error: Error| {
        let grid = initial.grid();
        let vset = build_velocity_set(model.dim(), T::one()).expect("unit velocity set");
        Box::new(RunFailure {
            error,
            state: RunState {
                time: T::zero(),
                u: initial.clone(),
                f: KineticField::zeros(grid, initial.components(), vset.len()),
                vset,
                step: 0,
            },
            report: EntropyReport::default(),
        })
    };
    if let Err(e) = config.validate() {
        return Err(fail_early(e));
    }
    if initial.components() != model.vars() || initial.grid().dim() != model.dim() {
        return Err(fail_early(Error::Shape(format!(
            "{} needs {} components in {}D",
            model.name(),
            model.vars(),
            model.dim()
        ))));
    }
    let mut state = match initial_state(model, initial, config) {
        Ok(s) => s,
        Err(e) => return Err(fail_early(e)),
    };
    let frozen = (config.boundary == BoundaryKind::FixedFromInitial).then_some(initial);
    let mut recorder = EntropyRecorder::new(*model, &state.vset, &state.u, state.time);

    let result = (|| -> Result<()> {
        while state.time < config.t_end {
            if config.lambda_policy == LambdaPolicy::PerStep {
                let lambda = lambda_bound(model, &state.u, config.lambda_safety)?;
                if lambda != state.vset.lambda() {
                    state.vset = build_velocity_set(model.dim(), lambda)?;
                    state.f.project(model, &state.vset, &state.u);
                }
            }
            let dt = compute_dt(config, state.u.grid(), state.vset.lambda(), state.time)?;
            if !(dt > T::zero()) {
                break;
            }
            let t_next = state.time + dt;
            ssprk3_step(model, &mut state, dt, config, frozen)?;
            let slack = (T::epsilon() * config.t_end.abs()).max(T::lit(1e-9) * dt);
            if config.t_end - t_next <= slack && t_next <= config.t_end {
                state.time = config.t_end;
            }
            recorder.record(&state.vset, &state.u, state.time)?;
        }
        Ok(())
    })();

    match result {
        Ok(()) => Ok(RunOutcome {
            state,
            report: recorder.into_report(),
        }),
        Err(error) => Err(Box::new(RunFailure {
            error,
            state,
            report: recorder.into_report(),
        })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::chi_potential;
    use crate::linalg::dot;
    use crate::models::SwState;
    use std::f64::consts::PI;

    struct Decay;

    impl StageSystem<f64> for Decay {
        fn rhs(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
            for (o, v) in out.iter_mut().zip(y) {
                *o = -v;
            }
            Ok(())
        }
    }

    struct Zero;

    impl StageSystem<f64> for Zero {
        fn rhs(&mut self, _: &[f64], out: &mut [f64]) -> Result<()> {
            out.iter_mut().for_each(|o| *o = 0.0);
            Ok(())
        }
    }

    #[test]
    fn decay_multiplier() {
        let mut y = [1.0];
        ssprk3(&mut Decay, &mut y, 0.1).unwrap();
        let z: f64 = 0.1;
        assert!((y[0] - (1.0 - z + z * z / 2.0 - z * z * z / 6.0)).abs() <= 1e-15);
        assert!((y[0] - 0.9048333333333334).abs() <= 1e-15);
        let mut y = [0.3, -2.0];
        ssprk3(&mut Zero, &mut y, 0.7).unwrap();
        assert_eq!(y, [0.3, -2.0]);
    }

    #[test]
    fn dt_examples() {
        let grid = Grid::<f64>::new_1d(100, 0.0, 1.0).unwrap();
        let mut cfg = StepConfig {
            cfl: 0.5,
            scheme: SchemeKind::EC,
            lambda_policy: LambdaPolicy::PerStep,
            lambda_safety: 1.1,
            t_end: 1.0,
            end_time: EndTimePolicy::Exact,
            boundary: BoundaryKind::Periodic,
        };
        assert!((compute_dt(&cfg, &grid, 4.0, 0.0).unwrap() - 0.00125).abs() < 1e-18);
        cfg.t_end = 0.0005;
        assert_eq!(compute_dt(&cfg, &grid, 4.0, 0.0).unwrap(), 0.0005);
        cfg.end_time = EndTimePolicy::FirstReach;
        assert!((compute_dt(&cfg, &grid, 4.0, 0.0).unwrap() - 0.00125).abs() < 1e-18);
        cfg.end_time = EndTimePolicy::Exact;
        let g2 = Grid::<f64>::new_2d([10, 20], [0.0, 0.0], [1.0, 1.0]).unwrap();
        cfg.t_end = 1.0;
        assert!((compute_dt(&cfg, &g2, 1.0, 0.0).unwrap() - 0.025).abs() < 1e-17);
        assert!(compute_dt(&cfg, &grid, 0.0, 0.0).is_err());
    }

    fn sw_periodic_field(n: usize) -> (Model, Field<f64>) {
        let model = Model::ShallowWater { dim: 2 };
        let grid = Grid::<f64>::new_2d([n, n], [0.0, 0.0], [1.0, 1.0]).unwrap();
        let u = Field::from_fn(&grid, 3, |x| {
            let s = (2.0 * PI * (x[0] + x[1])).sin();
            let v = (2.0 * PI * (x[0] - x[1])).sin();
            SwState {
                rho: 1.0 + s * s,
                vel: [v, 0.5 * v],
                dim: 2,
            }
            .to_conserved()
        });
        (model, u)
    }

    fn config(scheme: SchemeKind, t_end: f64) -> StepConfig<f64> {
        StepConfig {
            cfl: 0.5,
            scheme,
            lambda_policy: LambdaPolicy::PerStep,
            lambda_safety: 1.1,
            t_end,
            end_time: EndTimePolicy::Exact,
            boundary: BoundaryKind::Periodic,
        }
    }

    #[test]
    fn constant_state_has_zero_rhs() {
        let model = Model::ShallowWater { dim: 2 };
        let grid = Grid::<f64>::new_2d([6, 5], [0.0, 0.0], [1.0, 1.0]).unwrap();
        let u = Field::from_fn(&grid, 3, |_| [1.3, 0.2, -0.4]);
        let v = build_velocity_set(2, 5.0).unwrap();
        let k = KineticField::from_field(&model, &v, &u);
        for scheme in [SchemeKind::EC, SchemeKind::ES1, SchemeKind::ES2, SchemeKind::ES2Limited] {
            let r = semi_discrete_rhs(&model, &v, &k, scheme, BoundaryKind::Periodic, None).unwrap();
            assert!(r.values().iter().all(|&x| x.abs() <= 1e-13));
        }
    }

    #[test]
    fn periodic_rhs_sums_to_zero() {
        let (model, u) = sw_periodic_field(16);
        let v = build_velocity_set(2, 8.0).unwrap();
        let k = KineticField::from_field(&model, &v, &u);
        for scheme in [SchemeKind::EC, SchemeKind::ES1, SchemeKind::ES2Limited] {
            let r = semi_discrete_rhs(&model, &v, &k, scheme, BoundaryKind::Periodic, None).unwrap();
            let grid = r.grid().clone();
            for m in 0..4 {
                for c in 0..3 {
                    let s: f64 = grid.interior_offsets().map(|o| r.get(o, m)[c]).sum();
                    assert!(s.abs() <= 1e-11, "{scheme:?} m={m} c={c}: {s}");
                }
            }
        }
    }

    #[test]
    fn advection_rhs_is_second_order() {
        // Σ_m rhs ≈ −∂_x U for U = sin x; error should drop by ~4 per refinement
        let err = |n: usize| {
            let grid = Grid::<f64>::new_1d(n, 0.0, 2.0 * PI).unwrap();
            let mut u = Field::from_fn(&grid, 1, |x| [x[0].sin(), 0.0, 0.0]);
            apply_bc(&mut u, BoundaryKind::Periodic, None).unwrap();
            let v = build_velocity_set(1, 1.1).unwrap();
            let k = KineticField::from_field(&Model::Advection, &v, &u);
            let r = semi_discrete_rhs(&Model::Advection, &v, &k, SchemeKind::EC, BoundaryKind::Periodic, None).unwrap();
            grid.interior_cells()
                .map(|(i, j)| {
                    let o = grid.index(i, j);
                    let s = r.get(o, 0)[0] + r.get(o, 1)[0];
                    (s + grid.center(i, j)[0].cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn kinetic_and_macroscopic_steps_agree() {
        let (model, u0) = sw_periodic_field(24);
        for scheme in [SchemeKind::EC, SchemeKind::ES1, SchemeKind::ES2, SchemeKind::ES2Limited] {
            let cfg = config(scheme, 1.0);
            let mut state = initial_state(&model, &u0, &cfg).unwrap();
            let dt = compute_dt(&cfg, state.u.grid(), state.vset.lambda(), 0.0).unwrap();
            let vset = state.vset;
            ssprk3_step(&model, &mut state, dt, &cfg, None).unwrap();

            struct Macro<'a> {
                model: &'a Model,
                vset: VelocitySet<f64>,
                scheme: SchemeKind,
                u: Field<f64>,
            }
            impl StageSystem<f64> for Macro<'_> {
                fn rhs(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
                    self.u.values_mut().copy_from_slice(y);
                    apply_bc(&mut self.u, BoundaryKind::Periodic, None)?;
                    let r = macroscopic_rhs(self.model, &self.vset, self.scheme, &self.u)?;
                    out.copy_from_slice(r.values());
                    Ok(())
                }
            }
            let mut mac = Macro {
                model: &model,
                vset,
                scheme,
                u: u0.clone(),
            };
            let mut y = u0.values().to_vec();
            ssprk3(&mut mac, &mut y, dt).unwrap();
            let mut um = u0.clone();
            um.values_mut().copy_from_slice(&y);
            for o in um.grid().interior_offsets() {
                let (a, b) = (state.u.cell(o), um.cell(o));
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() <= 1e-13, "{scheme:?}: {} vs {}", a[k], b[k]);
                }
            }
        }
    }

    #[test]
    fn semi_discrete_entropy_equality() {
        // V_i · dF_m/dt = −(q_{i+½} − q_{i−½}) / Δx with q = V̄·flux − χ̄
        let model = Model::ShallowWater { dim: 1 };
        let grid = Grid::<f64>::new_1d(20, 0.0, 1.0).unwrap();
        let mut u = Field::from_fn(&grid, 2, |x| {
            let t = 2.0 * PI * x[0];
            SwState {
                rho: 2.0 + t.sin(),
                vel: [0.5 * t.cos(), 0.0],
                dim: 1,
            }
            .to_conserved()
        });
        apply_bc(&mut u, BoundaryKind::Periodic, None).unwrap();
        let v = build_velocity_set(1, 6.0).unwrap();
        let k = KineticField::from_field(&model, &v, &u);
        let r = semi_discrete_rhs(&model, &v, &k, SchemeKind::EC, BoundaryKind::Periodic, None).unwrap();
        let n = grid.cells(0) as isize;
        let entropy_flux = |i: isize, m: usize| {
            let (ul, ur) = (u.at(i, 0), u.at(i + 1, 0));
            let x = [grid.lo(0) + (i + 1) as f64 * grid.dx(0), 0.0];
            let req = FluxRequest::from_states(&model, 0, ul, ur, x);
            let f = interface_fluxes(SchemeKind::EC, &model, &v, &req).unwrap();
            let vbar: State<f64> = [0.5 * (req.vl[0] + req.vr[0]), 0.5 * (req.vl[1] + req.vr[1]), 0.0];
            let chi = 0.5 * (chi_potential(&model, &v, &ul, &x)[m][0] + chi_potential(&model, &v, &ur, &x)[m][0]);
            dot(&vbar, &f[m]) - chi
        };
        for i in 0..n {
            let vi = model.entropy_variable(&u.at(i, 0));
            for m in 0..2 {
                let rm = r.get(grid.index(i, 0), m);
                let dh = vi[0] * rm[0] + vi[1] * rm[1];
                let q = -(entropy_flux(i, m) - entropy_flux(i - 1, m)) / grid.dx(0);
                assert!((dh - q).abs() <= 1e-11 * (1.0 + q.abs()), "cell {i} m {m}: {dh} vs {q}");
            }
        }
    }

    #[test]
    fn run_conserves_and_hits_end_time() {
        let (model, u0) = sw_periodic_field(16);
        let cfg = config(SchemeKind::ES1, 0.05);
        let out = run(&model, &u0, &cfg).unwrap();
        assert_eq!(out.state.time, 0.05);
        assert_eq!(out.report.rows.len(), out.state.step + 1);
        let mut start = u0.clone();
        apply_bc(&mut start, BoundaryKind::Periodic, None).unwrap();
        for c in 0..3 {
            let (a, b) = (start.interior_sum(c), out.state.u.interior_sum(c));
            let scale: f64 = start.grid().interior_offsets().map(|o| start.cell(o)[c].abs()).sum();
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        let recombined = out.state.f.moments();
        for o in u0.grid().interior_offsets() {
            for c in 0..3 {
                assert_eq!(recombined.cell(o)[c], out.state.u.cell(o)[c]);
            }
        }
        assert!(out.report.max_signed_eta() <= 1e-13);
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let (model, u0) = sw_periodic_field(8);
        let out = run(&model, &u0, &config(SchemeKind::EC, 0.0)).unwrap();
        assert_eq!(out.state.step, 0);
        assert_eq!(out.report.rows.len(), 1);
        for o in u0.grid().interior_offsets() {
            assert_eq!(out.state.u.cell(o), u0.cell(o));
        }
    }

    #[test]
    fn run_reports_blow_up() {
        let model = Model::ShallowWater { dim: 1 };
        let grid = Grid::<f64>::new_1d(8, 0.0, 1.0).unwrap();
        let u0 = Field::from_fn(
            &grid,
            2,
            |x| if x[0] < 0.5 { [1.0, 0.0, 0.0] } else { [-1.0, 0.0, 0.0] },
        );
        let err = run(&model, &u0, &config(SchemeKind::EC, 0.1)).unwrap_err();
        assert!(matches!(err.error, Error::Positivity { .. }));

        let mut cfg = config(SchemeKind::EC, 0.1);
        cfg.cfl = 0.0;
        assert!(matches!(run(&model, &u0, &cfg).unwrap_err().error, Error::Domain(_)));
    }

    #[test]
    fn frozen_policy_keeps_velocity_set() {
        let (model, u0) = sw_periodic_field(8);
        let mut cfg = config(SchemeKind::EC, 0.02);
        cfg.lambda_policy = LambdaPolicy::Frozen;
        let init = initial_state(&model, &u0, &cfg).unwrap();
        let out = run(&model, &u0, &cfg).unwrap();
        assert_eq!(out.state.vset, init.vset);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn periodic_runs_conserve_every_component(
                depth in proptest::collection::vec(0.5f64..2.0, 12),
                vel in proptest::collection::vec(-0.5f64..0.5, 12),
                pick in 0usize..4,
            ) {
                let scheme = [SchemeKind::EC, SchemeKind::ES1, SchemeKind::ES2, SchemeKind::ES2Limited][pick];
                let model = Model::ShallowWater { dim: 1 };
                let grid = Grid::<f64>::new_1d(12, 0.0, 1.0).unwrap();
                let mut u0 = Field::zeros(&grid, 2);
                for (n, o) in grid.interior_offsets().enumerate() {
                    u0.cell_mut(o).copy_from_slice(&[depth[n], depth[n] * vel[n]]);
                }
                let out = run(&model, &u0, &config(scheme, 0.02)).unwrap();
                for c in 0..2 {
                    let scale: f64 = grid.interior_offsets().map(|o| u0.cell(o)[c].abs()).sum();
                    let drift = (u0.interior_sum(c) - out.state.u.interior_sum(c)).abs();
                    prop_assert!(drift <= 1e-11 * scale.max(1.0), "{:?} c={}: {}", scheme, c, drift);
                }
            }
        }
    }
}
