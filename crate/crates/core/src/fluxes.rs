//! Interface fluxes for the discrete-velocity components.
//!
//! Every kernel returns the numerical flux of `v_m^(d) F_m` across one
//! interface. The entropy conserving part differs per velocity; the entropy
//! stable dissipation `(1/2M) R Λ W` is shared by all velocities, so summing
//! over `m` yields the macroscopic flux minus `½ R Λ W`.

use crate::error::{Error, Result};
use crate::kinetic::{chi_potential, maxwellian, VelocitySet, MAX_VELOCITIES};
use crate::linalg::{mat_t_vec, mat_vec, sub, zero, Mat, Point, State, MAX_VARS};
use crate::models::{Model, KAPPA};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Entropy conserving.
    EC,
    /// Entropy stable, first-order dissipation.
    ES1,
    /// Entropy stable with minmod-reconstructed characteristic jumps.
    ES2,
    /// [`SchemeKind::ES2`] reverting to first-order dissipation per
    /// characteristic field wherever the local jumps are not monotone.
    ES2Limited,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::EC => "ec",
            SchemeKind::ES1 => "es1",
            SchemeKind::ES2 => "es2",
            SchemeKind::ES2Limited => "es2-limited",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ec" => Ok(SchemeKind::EC),
            "es1" => Ok(SchemeKind::ES1),
            "es2" => Ok(SchemeKind::ES2),
            "es2-limited" | "es2limited" => Ok(SchemeKind::ES2Limited),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Data needed to evaluate the flux across the interface between a left cell
/// `i` and a right cell `i + 1` in direction `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxRequest<T> {
    pub d: usize,
    pub ul: State<T>,
    pub ur: State<T>,
    pub vl: State<T>,
    pub vr: State<T>,
    /// Entropy-variable jump across the upwind neighbouring interface `i − ½`.
    pub jump_prev: State<T>,
    /// Entropy-variable jump across the downwind neighbouring interface `i + 3/2`.
    pub jump_next: State<T>,
    /// Interface position.
    pub x: Point<T>,
}

impl<T: Real> FluxRequest<T> {
    /// Request with the neighbouring jumps set equal to the local jump, which
    /// makes the reconstructed dissipation vanish.
    pub fn from_states(model: &Model, d: usize, ul: State<T>, ur: State<T>, x: Point<T>) -> Self {
        let vl = model.entropy_variable(&ul);
        let vr = model.entropy_variable(&ur);
        let j = sub(&vr, &vl);
        FluxRequest {
            d,
            ul,
            ur,
            vl,
            vr,
            jump_prev: j,
            jump_next: j,
            x,
        }
    }

    #[inline]
    pub fn jump(&self) -> State<T> {
        sub(&self.vr, &self.vl)
    }
}

/// Denominator threshold below which the scalar entropy conserving flux
/// switches to the central average.
#[inline]
pub fn tie_tolerance<T: Real>(vl: T, vr: T) -> T {
    T::lit(1e-12) * (T::one() + vl.abs() + vr.abs())
}

/// Entropy conserving flux of velocity `m` for a scalar model:
/// `[[χ_m]] / [[V]]`, or the central average of `v_m F_m` at a tie.
pub fn ec_flux_scalar<T: Real>(model: &Model, vset: &VelocitySet<T>, req: &FluxRequest<T>, m: usize) -> T {
    let chi_l = chi_potential(model, vset, &req.ul, &req.x);
    let chi_r = chi_potential(model, vset, &req.ur, &req.x);
    scalar_ec_from_chi(model, vset, req, m, chi_l[m][req.d], chi_r[m][req.d])
}

#[inline]
fn scalar_ec_from_chi<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
    m: usize,
    chi_l: T,
    chi_r: T,
) -> T {
    let v = vset.velocity(m, req.d);
    if v == T::zero() {
        return T::zero();
    }
    let dv = req.vr[0] - req.vl[0];
    if dv.abs() > tie_tolerance(req.vl[0], req.vr[0]) {
        (chi_r - chi_l) / dv
    } else {
        let fl = maxwellian(model, vset, &req.ul, &req.x)[m][0];
        let fr = maxwellian(model, vset, &req.ur, &req.x)[m][0];
        T::half() * v * (fl + fr)
    }
}

/// Entropy conserving flux of velocity `m` for shallow water, built from
/// arithmetic averages of depth, velocity and squared depth.
pub fn ec_flux_sw<T: Real>(vset: &VelocitySet<T>, req: &FluxRequest<T>, m: usize) -> Result<State<T>> {
    let d = req.d;
    let v = vset.velocity(m, d);
    let (rl, rr) = (req.ul[0], req.ur[0]);
    if !(rl > T::zero()) {
        return Err(Error::Positivity { depth: rl.as_f64() });
    }
    if !(rr > T::zero()) {
        return Err(Error::Positivity { depth: rr.as_f64() });
    }
    let mut out = zero();
    if v == T::zero() {
        return Ok(out);
    }
    let dim = vset.dim();
    let rho = T::half() * (rl + rr);
    let rho_sq = T::half() * (rl * rl + rr * rr);
    let mut vel = [T::zero(); 2];
    for (k, u) in vel.iter_mut().enumerate().take(dim) {
        *u = T::half() * (req.ul[1 + k] / rl + req.ur[1 + k] / rr);
    }
    let mut weight = vset.a(m);
    for (k, u) in vel.iter().enumerate().take(dim) {
        weight = weight + vset.b(m, k) * *u;
    }
    out[0] = v * rho * weight;
    let kappa = T::lit(KAPPA);
    for j in 0..dim {
        out[1 + j] = v * (rho * vel[j] * weight + kappa * vset.b(m, j) * rho_sq);
    }
    Ok(out)
}

/// `minmod(a, b)`: the smaller magnitude when both share a strict sign, else 0.
#[inline]
pub fn minmod<T: Real>(a: T, b: T) -> T {
    if a > T::zero() && b > T::zero() {
        a.min(b)
    } else if a < T::zero() && b < T::zero() {
        a.max(b)
    } else {
        T::zero()
    }
}

/// Characteristic jump at `i + ½` after minmod reconstruction, with all three
/// entropy-variable jumps projected through the interface basis `r`.
pub fn reconstruct_scaled_jump<T: Real>(
    r: &Mat<T>,
    jump_prev: &State<T>,
    jump: &State<T>,
    jump_next: &State<T>,
) -> State<T> {
    let wp = mat_t_vec(r, jump_prev);
    let w = mat_t_vec(r, jump);
    let wn = mat_t_vec(r, jump_next);
    let mut out = zero();
    for k in 0..MAX_VARS {
        out[k] = reconstruct_component(wp[k], w[k], wn[k]);
    }
    out
}

#[inline]
fn reconstruct_component<T: Real>(wp: T, w: T, wn: T) -> T {
    w - T::half() * (minmod(w, wn) + minmod(wp, w))
}

/// As [`reconstruct_scaled_jump`], but components whose neighbouring jumps are
/// not both monotone keep the unreconstructed jump.
pub fn limited_scaled_jump<T: Real>(
    r: &Mat<T>,
    jump_prev: &State<T>,
    jump: &State<T>,
    jump_next: &State<T>,
) -> State<T> {
    let wp = mat_t_vec(r, jump_prev);
    let w = mat_t_vec(r, jump);
    let wn = mat_t_vec(r, jump_next);
    let mut out = zero();
    for k in 0..MAX_VARS {
        let smooth = minmod(wp[k], w[k]) * minmod(w[k], wn[k]) != T::zero();
        out[k] = if smooth {
            reconstruct_component(wp[k], w[k], wn[k])
        } else {
            w[k]
        };
    }
    out
}

/// First-order entropy stable dissipation `(1/2M) R Λ Rᵀ [[V]]`, identical
/// for every velocity.
pub fn es_dissipation_first<T: Real>(model: &Model, vset: &VelocitySet<T>, req: &FluxRequest<T>) -> Result<State<T>> {
    dissipation(SchemeKind::ES1, model, vset, req)
}

/// Dissipation vector subtracted from every velocity's flux under `scheme`.
pub fn dissipation<T: Real>(
    scheme: SchemeKind,
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
) -> Result<State<T>> {
    if scheme == SchemeKind::EC {
        return Ok(zero());
    }
    let (r, lam) = model.dissipation_basis(&req.ul, &req.ur, &req.x, req.d)?;
    let jump = req.jump();
    let w = match scheme {
        SchemeKind::ES1 => mat_t_vec(&r, &jump),
        SchemeKind::ES2 => reconstruct_scaled_jump(&r, &req.jump_prev, &jump, &req.jump_next),
        SchemeKind::ES2Limited => limited_scaled_jump(&r, &req.jump_prev, &jump, &req.jump_next),
        SchemeKind::EC => unreachable!(),
    };
    let coef = T::one() / (T::two() * T::from_usize_lossy(vset.len()));
    let scaled = [coef * lam[0] * w[0], coef * lam[1] * w[1], coef * lam[2] * w[2]];
    Ok(mat_vec(&r, &scaled))
}

/// Entropy conserving fluxes of all velocities across one interface.
pub fn ec_fluxes<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
) -> Result<[State<T>; MAX_VELOCITIES]> {
    let mut out = [zero(); MAX_VELOCITIES];
    if model.is_scalar() {
        let chi_l = chi_potential(model, vset, &req.ul, &req.x);
        let chi_r = chi_potential(model, vset, &req.ur, &req.x);
        for (m, f) in out.iter_mut().enumerate().take(vset.len()) {
            f[0] = scalar_ec_from_chi(model, vset, req, m, chi_l[m][req.d], chi_r[m][req.d]);
        }
    } else {
        for (m, f) in out.iter_mut().enumerate().take(vset.len()) {
            *f = ec_flux_sw(vset, req, m)?;
        }
    }
    Ok(out)
}

/// Fluxes of all velocities across one interface under `scheme`.
pub fn interface_fluxes<T: Real>(
    scheme: SchemeKind,
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
) -> Result<[State<T>; MAX_VELOCITIES]> {
    let mut out = ec_fluxes(model, vset, req)?;
    if scheme != SchemeKind::EC {
        let diss = dissipation(scheme, model, vset, req)?;
        for f in out.iter_mut().take(vset.len()) {
            *f = sub(f, &diss);
        }
    }
    Ok(out)
}

/// Flux of velocity `m` across one interface under `scheme`.
pub fn interface_flux<T: Real>(
    scheme: SchemeKind,
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
    m: usize,
) -> Result<State<T>> {
    Ok(interface_fluxes(scheme, model, vset, req)?[m])
}

/// `Σ_m` of the velocity fluxes: the induced macroscopic interface flux.
pub fn summed_flux<T: Real>(
    scheme: SchemeKind,
    model: &Model,
    vset: &VelocitySet<T>,
    req: &FluxRequest<T>,
) -> Result<State<T>> {
    let f = interface_fluxes(scheme, model, vset, req)?;
    let mut s = zero();
    for fm in f.iter().take(vset.len()) {
        s = crate::linalg::add(&s, fm);
    }
    Ok(s)
}
