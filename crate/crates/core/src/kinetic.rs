//! Discrete-velocity (vector-kinetic) representation of a macroscopic model.
//!
//! A state `U` is split into `M` vector components
//! `F_m = a_m U + Σ_d b_m^(d) G^(d)(U)` travelling with constant velocities
//! `v_m`, so that `Σ_m F_m = U` and `Σ_m v_m^(d) F_m = G^(d)`.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{axpy, dot, scale, zero, Point, State};
use crate::models::Model;
use crate::scalar::Real;

/// Largest number of discrete velocities (the 2D set).
pub const MAX_VELOCITIES: usize = 4;

/// Default multiplier applied to the positivity bound on `λ`.
pub const DEFAULT_LAMBDA_SAFETY: f64 = 1.1;

/// Lower floor on `λ` for fields whose wave speeds all vanish.
pub const LAMBDA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySet<T> {
    dim: usize,
    count: usize,
    lambda: T,
    velocity: [[T; 2]; MAX_VELOCITIES],
    a: [T; MAX_VELOCITIES],
    b: [[T; 2]; MAX_VELOCITIES],
}

impl<T: Real> VelocitySet<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of velocities `M`.
    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `v_m^(d)`
    #[inline]
    pub fn velocity(&self, m: usize, d: usize) -> T {
        self.velocity[m][d]
    }

    /// `a_m`
    #[inline]
    pub fn a(&self, m: usize) -> T {
        self.a[m]
    }

    /// `b_m^(d)`
    #[inline]
    pub fn b(&self, m: usize, d: usize) -> T {
        self.b[m][d]
    }
}

/// Two velocities `±λ` in 1D, four axis-aligned velocities of magnitude `λ` in 2D.
pub fn build_velocity_set<T: Real>(dim: usize, lambda: T) -> Result<VelocitySet<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::Domain(format!("velocity scale must be positive, got {lambda}")));
    }
    let z = T::zero();
    let hb = T::one() / (T::two() * lambda);
    match dim {
        1 => {
            let a = T::half();
            Ok(VelocitySet {
                dim,
                count: 2,
                lambda,
                velocity: [[lambda, z], [-lambda, z], [z; 2], [z; 2]],
                a: [a, a, z, z],
                b: [[hb, z], [-hb, z], [z; 2], [z; 2]],
            })
        }
        2 => {
            let a = T::lit(0.25);
            Ok(VelocitySet {
                dim,
                count: 4,
                lambda,
                velocity: [[lambda, z], [z, lambda], [-lambda, z], [z, -lambda]],
                a: [a; 4],
                b: [[hb, z], [z, hb], [-hb, z], [z, -hb]],
            })
        }
        _ => Err(Error::Domain(format!(
            "velocity sets exist for 1 or 2 dimensions, got {dim}"
        ))),
    }
}

/// Smallest admissible velocity scale for `field`: `safety · (1 or 2) · sup`
/// of the model's wave speed over interior cells, floored at [`LAMBDA_FLOOR`].
pub fn lambda_bound<T: Real>(model: &Model, field: &Field<T>, safety: T) -> Result<T> {
    if !(safety > T::one()) || !safety.is_finite() {
        return Err(Error::Domain(format!(
            "lambda safety factor must exceed 1, got {safety}"
        )));
    }
    let grid = field.grid();
    let mut sup = T::zero();
    for (i, j) in grid.interior_cells() {
        let u = field.at(i, j);
        let s = model.max_wave_speed(&u, &grid.center(i, j));
        if !s.is_finite() || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite wave speed in cell ({i}, {j})")));
        }
        sup = sup.max(s);
    }
    let factor = if model.dim() == 1 { T::one() } else { T::two() };
    Ok((safety * factor * sup).max(T::lit(LAMBDA_FLOOR)))
}

/// `F_m(U) = a_m U + Σ_d b_m^(d) G^(d)(U)`; entries past `M` are zero.
#[inline]
pub fn maxwellian<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    u: &State<T>,
    x: &Point<T>,
) -> [State<T>; MAX_VELOCITIES] {
    let mut out = [zero(); MAX_VELOCITIES];
    let g0 = model.flux(u, x, 0);
    let g1 = if vset.dim == 2 { model.flux(u, x, 1) } else { zero() };
    for (m, f) in out.iter_mut().enumerate().take(vset.count) {
        let mut s = scale(vset.a[m], u);
        s = axpy(&s, vset.b[m][0], &g0);
        if vset.dim == 2 {
            s = axpy(&s, vset.b[m][1], &g1);
        }
        *f = s;
    }
    out
}

/// `H_m(U) = a_m η(U) + Σ_d b_m^(d) ω^(d)(U)`.
#[inline]
pub fn kinetic_entropy<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    u: &State<T>,
    x: &Point<T>,
) -> [T; MAX_VELOCITIES] {
    let eta = model.entropy(u, x);
    let omega = [
        model.entropy_flux(u, x, 0),
        if vset.dim == 2 {
            model.entropy_flux(u, x, 1)
        } else {
            T::zero()
        },
    ];
    let mut out = [T::zero(); MAX_VELOCITIES];
    for (m, h) in out.iter_mut().enumerate().take(vset.count) {
        let mut s = vset.a[m] * eta;
        for d in 0..vset.dim {
            s = s + vset.b[m][d] * omega[d];
        }
        *h = s;
    }
    out
}

/// `χ_m^(d)(U) = v_m^(d) (V·F_m − H_m)`, indexed `[m][d]`.
#[inline]
pub fn chi_potential<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    u: &State<T>,
    x: &Point<T>,
) -> [[T; 2]; MAX_VELOCITIES] {
    let v = model.entropy_variable(u);
    let f = maxwellian(model, vset, u, x);
    let h = kinetic_entropy(model, vset, u, x);
    let mut out = [[T::zero(); 2]; MAX_VELOCITIES];
    for m in 0..vset.count {
        let g = dot(&v, &f[m]) - h[m];
        for d in 0..vset.dim {
            out[m][d] = vset.velocity[m][d] * g;
        }
    }
    out
}

/// Per-velocity fields `F_m`, stored cell-major with `M · p` values per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField<T> {
    grid: Grid<T>,
    p: usize,
    velocities: usize,
    values: Vec<T>,
}

impl<T: Real> KineticField<T> {
    pub fn zeros(grid: &Grid<T>, p: usize, velocities: usize) -> Self {
        KineticField {
            grid: grid.clone(),
            p,
            velocities,
            values: vec![T::zero(); grid.storage_len() * p * velocities],
        }
    }

    /// Maxwellian projection of `field` in every cell, ghosts included.
    pub fn from_field(model: &Model, vset: &VelocitySet<T>, field: &Field<T>) -> Self {
        let mut k = Self::zeros(field.grid(), field.components(), vset.len());
        k.project(model, vset, field);
        k
    }

    /// Overwrites every cell with the Maxwellian of `field`.
    pub fn project(&mut self, model: &Model, vset: &VelocitySet<T>, field: &Field<T>) {
        let (p, mm) = (self.p, self.velocities);
        let grid = field.grid().clone();
        for (i, j) in grid.all_cells() {
            let off = grid.index(i, j);
            let f = maxwellian(model, vset, &field.state(off), &grid.center(i, j));
            let cell = &mut self.values[off * p * mm..(off + 1) * p * mm];
            for m in 0..mm {
                cell[m * p..(m + 1) * p].copy_from_slice(&f[m][..p]);
            }
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn velocities(&self) -> usize {
        self.velocities
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// `F_m` in the cell at storage offset `offset`.
    #[inline]
    pub fn get(&self, offset: usize, m: usize) -> &[T] {
        let base = (offset * self.velocities + m) * self.p;
        &self.values[base..base + self.p]
    }

    /// Copy of the `m`-th component as an ordinary field.
    pub fn component(&self, m: usize) -> Field<T> {
        let mut out = Field::zeros(&self.grid, self.p);
        for off in 0..self.grid.storage_len() {
            out.cell_mut(off).copy_from_slice(self.get(off, m));
        }
        out
    }

    /// `U = Σ_m F_m` in every cell.
    pub fn moments(&self) -> Field<T> {
        let mut out = Field::zeros(&self.grid, self.p);
        self.moments_into(&mut out)
            .expect("moment field constructed with matching shape");
        out
    }

    /// `U = Σ_m F_m` written into an existing field.
    pub fn moments_into(&self, out: &mut Field<T>) -> Result<()> {
        if out.components() != self.p || out.grid() != &self.grid {
            return Err(Error::Shape(format!(
                "moment target has {} components on a different or equal grid; expected {}",
                out.components(),
                self.p
            )));
        }
        let (p, mm) = (self.p, self.velocities);
        for (off, chunk) in self.values.chunks_exact(p * mm).enumerate() {
            let cell = out.cell_mut(off);
            for k in 0..p {
                let mut s = chunk[k];
                for m in 1..mm {
                    s = s + chunk[m * p + k];
                }
                cell[k] = s;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
