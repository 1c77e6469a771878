//! Macroscopic conservation laws `∂_t U + ∂_{x_d} G^(d)(U) = 0` together with
//! their convex entropy pairs.
//!
//! Each model provides the flux `G^(d)`, the entropy `η`, the entropy flux
//! `ω^(d)`, the entropy variable `V = ∂η/∂U` and the entropy flux potential
//! `ψ^(d) = V·G^(d) − ω^(d)`. Positions are passed to every evaluation because
//! the rotation model has a position-dependent flux.
//!
//! Evaluations are infallible; shallow water states with non-positive depth
//! are screened with [`Model::check_state`] before they reach the hot loops.

use crate::error::{Error, Result};
use crate::linalg::{zero, zero_mat, Mat, Point, State};
use crate::scalar::Real;

/// Pressure coefficient in `p = κρ²` (gravity `g = 2κ = 1`).
pub const KAPPA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    /// `G = U`, `η = U²/2`.
    Advection1d,
    /// Solid-body rotation about `(1/2, 1/2)`, `η = U²`.
    Rotation2d,
    /// `G = U²/2`, `η = U²`.
    Burgers1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Advection,
    Rotation,
    Burgers,
    ShallowWater { dim: usize },
}

impl Model {
    pub fn scalar(kind: ScalarKind) -> Self {
        match kind {
            ScalarKind::Advection1d => Model::Advection,
            ScalarKind::Rotation2d => Model::Rotation,
            ScalarKind::Burgers1d => Model::Burgers,
        }
    }

    pub fn shallow_water(dim: usize) -> Result<Self> {
        match dim {
            1 | 2 => Ok(Model::ShallowWater { dim }),
            _ => Err(Error::Domain(format!(
                "shallow water supports 1 or 2 dimensions, got {dim}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Advection => "advection1d",
            Model::Rotation => "rotation2d",
            Model::Burgers => "burgers1d",
            Model::ShallowWater { dim: 1 } => "shallow-water-1d",
            Model::ShallowWater { .. } => "shallow-water-2d",
        }
    }

    /// Number of conserved components `p`.
    #[inline]
    pub fn vars(&self) -> usize {
        match self {
            Model::ShallowWater { dim } => 1 + dim,
            _ => 1,
        }
    }

    /// Space dimension `D`.
    #[inline]
    pub fn dim(&self) -> usize {
        match self {
            Model::Rotation => 2,
            Model::ShallowWater { dim } => *dim,
            _ => 1,
        }
    }

    #[inline]
    pub fn is_scalar(&self) -> bool {
        !matches!(self, Model::ShallowWater { .. })
    }

    /// Rejects states outside the model's admissible set.
    pub fn check_state<T: Real>(&self, u: &State<T>) -> Result<()> {
        let p = self.vars();
        if u[..p].iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state {:?}", &u[..p])));
        }
        if let Model::ShallowWater { .. } = self {
            if !(u[0] > T::zero()) {
                return Err(Error::Positivity { depth: u[0].as_f64() });
            }
        }
        Ok(())
    }

    /// Advecting coefficient of the rotation model in direction `d`.
    #[inline]
    fn rotation_coefficient<T: Real>(x: &Point<T>, d: usize) -> T {
        if d == 0 {
            -(x[1] - T::half())
        } else {
            x[0] - T::half()
        }
    }

    #[inline]
    pub fn flux<T: Real>(&self, u: &State<T>, x: &Point<T>, d: usize) -> State<T> {
        match self {
            Model::Advection => [u[0], T::zero(), T::zero()],
            Model::Rotation => [Self::rotation_coefficient(x, d) * u[0], T::zero(), T::zero()],
            Model::Burgers => [T::half() * u[0] * u[0], T::zero(), T::zero()],
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                let kappa = T::lit(KAPPA);
                let mut g = zero();
                g[0] = u[0] * sw.vel[d];
                for j in 0..*dim {
                    g[1 + j] = u[1 + j] * sw.vel[d];
                }
                g[1 + d] = g[1 + d] + kappa * sw.rho * sw.rho;
                g
            }
        }
    }

    #[inline]
    pub fn entropy<T: Real>(&self, u: &State<T>, _x: &Point<T>) -> T {
        match self {
            Model::Advection => T::half() * u[0] * u[0],
            Model::Rotation | Model::Burgers => u[0] * u[0],
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                T::half() * sw.rho * sw.speed_sq() + T::lit(KAPPA) * sw.rho * sw.rho
            }
        }
    }

    #[inline]
    pub fn entropy_flux<T: Real>(&self, u: &State<T>, x: &Point<T>, d: usize) -> T {
        match self {
            Model::Advection => T::half() * u[0] * u[0],
            Model::Rotation => Self::rotation_coefficient(x, d) * u[0] * u[0],
            Model::Burgers => T::lit(2.0 / 3.0) * u[0] * u[0] * u[0],
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                sw.vel[d] * (T::half() * sw.rho * sw.speed_sq() + T::two() * T::lit(KAPPA) * sw.rho * sw.rho)
            }
        }
    }

    /// `V = ∂η/∂U`.
    #[inline]
    pub fn entropy_variable<T: Real>(&self, u: &State<T>) -> State<T> {
        match self {
            Model::Advection => [u[0], T::zero(), T::zero()],
            Model::Rotation | Model::Burgers => [T::two() * u[0], T::zero(), T::zero()],
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                let mut v = zero();
                v[0] = T::two() * T::lit(KAPPA) * sw.rho - T::half() * sw.speed_sq();
                v[1..1 + dim].copy_from_slice(&sw.vel[..*dim]);
                v
            }
        }
    }

    /// `ψ^(d) = V·G^(d) − ω^(d)`, in closed form.
    #[inline]
    pub fn entropy_potential<T: Real>(&self, u: &State<T>, x: &Point<T>, d: usize) -> T {
        match self {
            Model::Advection => T::half() * u[0] * u[0],
            Model::Rotation => Self::rotation_coefficient(x, d) * u[0] * u[0],
            Model::Burgers => u[0] * u[0] * u[0] / T::lit(3.0),
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                T::lit(KAPPA) * sw.rho * sw.rho * sw.vel[d]
            }
        }
    }

    /// Signed characteristic speed `dG^(d)/dU` of a scalar model.
    #[inline]
    pub fn scalar_speed<T: Real>(&self, u: &State<T>, x: &Point<T>, d: usize) -> T {
        match self {
            Model::Advection => T::one(),
            Model::Rotation => Self::rotation_coefficient(x, d),
            Model::Burgers => u[0],
            Model::ShallowWater { .. } => T::nan(),
        }
    }

    /// Largest `|eigenvalue of ∂_U G^(d)|` over the active directions.
    pub fn max_wave_speed<T: Real>(&self, u: &State<T>, x: &Point<T>) -> T {
        match self {
            Model::ShallowWater { dim } => {
                let sw = SwState::from_conserved(u, *dim);
                let c = sw.celerity();
                (0..*dim).fold(T::zero(), |m, d| m.max(sw.vel[d].abs() + c))
            }
            _ => (0..self.dim()).fold(T::zero(), |m, d| m.max(self.scalar_speed(u, x, d).abs())),
        }
    }

    /// Eigen-scaled basis `R` and `|Λ|` used by the entropy-stable dissipation
    /// `R |Λ| Rᵀ`, evaluated at the arithmetic average of `ul` and `ur`.
    /// Scalar models use `R = 1`.
    pub fn dissipation_basis<T: Real>(
        &self,
        ul: &State<T>,
        ur: &State<T>,
        x: &Point<T>,
        d: usize,
    ) -> Result<(Mat<T>, State<T>)> {
        match self {
            Model::ShallowWater { dim } => {
                let l = SwState::from_conserved(ul, *dim);
                let r = SwState::from_conserved(ur, *dim);
                let avg = SwState {
                    rho: T::half() * (l.rho + r.rho),
                    vel: [T::half() * (l.vel[0] + r.vel[0]), T::half() * (l.vel[1] + r.vel[1])],
                    dim: *dim,
                };
                sw_eigen_basis(&avg, d)
            }
            _ => {
                let ubar = [T::half() * (ul[0] + ur[0]), T::zero(), T::zero()];
                let mut basis = zero_mat();
                basis[0][0] = T::one();
                let mut lam = zero();
                lam[0] = self.scalar_speed(&ubar, x, d).abs();
                Ok((basis, lam))
            }
        }
    }
}

/// Primitive shallow water state: depth `ρ` and velocity `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwState<T> {
    pub rho: T,
    pub vel: [T; 2],
    pub dim: usize,
}

impl<T: Real> SwState<T> {
    #[inline]
    pub fn from_conserved(u: &State<T>, dim: usize) -> Self {
        let inv = T::one() / u[0];
        SwState {
            rho: u[0],
            vel: [u[1] * inv, if dim == 2 { u[2] * inv } else { T::zero() }],
            dim,
        }
    }

    pub fn to_conserved(&self) -> State<T> {
        let mut u = zero();
        u[0] = self.rho;
        for j in 0..self.dim {
            u[1 + j] = self.rho * self.vel[j];
        }
        u
    }

    #[inline]
    pub fn speed_sq(&self) -> T {
        self.vel[0] * self.vel[0] + self.vel[1] * self.vel[1]
    }

    /// `p = κρ²`.
    #[inline]
    pub fn pressure(&self) -> T {
        T::lit(KAPPA) * self.rho * self.rho
    }

    /// Gravity wave speed `c = √(2κρ)`.
    #[inline]
    pub fn celerity(&self) -> T {
        (T::two() * T::lit(KAPPA) * self.rho).sqrt()
    }
}

/// Eigenvectors of `∂_U G^(d)` at `ubar`, scaled so that `R Rᵀ = ∂U/∂V`,
/// and the absolute eigenvalues ordered as `(u_d − c, [u_d,] u_d + c)`.
pub fn sw_eigen_basis<T: Real>(ubar: &SwState<T>, d: usize) -> Result<(Mat<T>, State<T>)> {
    if !(ubar.rho > T::zero()) {
        return Err(Error::Positivity {
            depth: ubar.rho.as_f64(),
        });
    }
    let g = T::two() * T::lit(KAPPA);
    let c = ubar.celerity();
    let s = T::one() / (T::two() * g).sqrt();
    let un = ubar.vel[d];
    let mut r = zero_mat();
    let mut lam = zero();
    match ubar.dim {
        1 => {
            r[0] = [s, s, T::zero()];
            r[1] = [s * (un - c), s * (un + c), T::zero()];
            lam[0] = (un - c).abs();
            lam[1] = (un + c).abs();
        }
        _ => {
            // columns: slow acoustic, shear, fast acoustic
            let shear = c / g.sqrt();
            let t = 1 - d;
            r[0] = [s, T::zero(), s];
            r[1 + d] = [s * (un - c), T::zero(), s * (un + c)];
            r[1 + t] = [s * ubar.vel[t], shear, s * ubar.vel[t]];
            lam[0] = (un - c).abs();
            lam[1] = un.abs();
            lam[2] = (un + c).abs();
        }
    }
    Ok((r, lam))
}

/// Exact solution `sin⁴(x − t)` of linear advection on the `2π`-periodic line.
pub fn advection_exact<T: Real>(x: T, t: T) -> T {
    let s = (x - t).sin();
    let s2 = s * s;
    s2 * s2
}

/// Pre-shock solution of Burgers' equation with `U₀ = sin(2πx)`: solves
/// `U = sin(2π(x − U t))` by Newton iteration from `U₀(x)`, switching to
/// bisection on `[−1, 1]` if an iterate leaves that bracket.
pub fn burgers_exact<T: Real>(x: T, t: T, tol: T) -> Result<T> {
    const MAX_ITER: usize = 100;
    let two_pi = T::two() * T::PI();
    let residual = |u: T| u - (two_pi * (x - u * t)).sin();
    let slack = T::lit(1e-8);
    let mut u = (two_pi * x).sin();
    for _ in 0..MAX_ITER {
        let r = residual(u);
        if r.abs() <= tol {
            return Ok(u);
        }
        let dr = T::one() + two_pi * t * (two_pi * (x - u * t)).cos();
        let next = u - r / dr;
        if !next.is_finite() || next.abs() > T::one() + slack {
            return burgers_bisect(residual, tol, MAX_ITER).ok_or(Error::Convergence {
                x: x.as_f64(),
                t: t.as_f64(),
                iterations: MAX_ITER,
            });
        }
        if next == u {
            // floating point fixed point: residual is at round-off level
            return Ok(u);
        }
        u = next;
    }
    Err(Error::Convergence {
        x: x.as_f64(),
        t: t.as_f64(),
        iterations: MAX_ITER,
    })
}

fn burgers_bisect<T: Real>(f: impl Fn(T) -> T, tol: T, max_iter: usize) -> Option<T> {
    let (mut a, mut b) = (-T::one(), T::one());
    let mut fa = f(a);
    if fa * f(b) > T::zero() {
        return None;
    }
    for _ in 0..max_iter {
        let m = T::half() * (a + b);
        let fm = f(m);
        if fm.abs() <= tol || (b - a) <= T::epsilon() {
            return Some(m);
        }
        if (fa < T::zero()) == (fm < T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    None
}
