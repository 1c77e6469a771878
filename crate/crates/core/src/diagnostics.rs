//! Entropy bookkeeping, error norms, convergence orders and flux audits.

use crate::error::{Error, Result};
use crate::fluxes::{interface_fluxes, FluxRequest, SchemeKind};
use crate::grid::{Field, Grid};
use crate::kinetic::{chi_potential, kinetic_entropy, VelocitySet, MAX_VELOCITIES};
use crate::linalg::{dot, sub, Point, State};
use crate::models::Model;
use crate::scalar::Real;

/// Interior means of the macroscopic entropy and of each kinetic entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySample<T> {
    pub eta_mean: T,
    pub h_mean: [T; MAX_VELOCITIES],
    pub velocities: usize,
}

/// Per-cell `η(U_i)` and `H_m(U_i)` over the interior, row-major.
fn cell_entropies<T: Real>(
    model: &Model,
    vset: &VelocitySet<T>,
    states: &[State<T>],
    centres: &[Point<T>],
) -> (Vec<T>, Vec<Vec<T>>) {
    let mm = vset.len();
    let mut eta = Vec::with_capacity(states.len());
    let mut h = vec![Vec::with_capacity(states.len()); mm];
    for (u, x) in states.iter().zip(centres) {
        eta.push(model.entropy(u, x));
        let hm = kinetic_entropy(model, vset, u, x);
        for (col, v) in h.iter_mut().zip(hm.iter()) {
            col.push(*v);
        }
    }
    (eta, h)
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |s, &v| s + v) / T::from_usize_lossy(values.len())
}

fn interior_centres<T: Real>(grid: &Grid<T>) -> Vec<Point<T>> {
    grid.interior_cells().map(|(i, j)| grid.center(i, j)).collect()
}

pub fn entropy_sample<T: Real>(model: &Model, vset: &VelocitySet<T>, u: &Field<T>) -> EntropySample<T> {
    let states = u.interior_states();
    let centres = interior_centres(u.grid());
    let (eta, h) = cell_entropies(model, vset, &states, &centres);
    let mut h_mean = [T::zero(); MAX_VELOCITIES];
    for (m, col) in h.iter().enumerate() {
        h_mean[m] = mean(col);
    }
    EntropySample {
        eta_mean: mean(&eta),
        h_mean,
        velocities: vset.len(),
    }
}

/// `Σ (curr − prev) / N`
pub fn signed_error<T: Real>(curr: &[T], prev: &[T]) -> Result<T> {
    if curr.len() != prev.len() {
        return Err(Error::LengthMismatch {
            left: curr.len(),
            right: prev.len(),
        });
    }
    let s = curr.iter().zip(prev).fold(T::zero(), |s, (&c, &p)| s + (c - p));
    Ok(s / T::from_usize_lossy(curr.len()))
}

/// `Σ |curr − prev| / N`
pub fn absolute_error<T: Real>(curr: &[T], prev: &[T]) -> Result<T> {
    if curr.len() != prev.len() {
        return Err(Error::LengthMismatch {
            left: curr.len(),
            right: prev.len(),
        });
    }
    let s = curr.iter().zip(prev).fold(T::zero(), |s, (&c, &p)| s + (c - p).abs());
    Ok(s / T::from_usize_lossy(curr.len()))
}

/// One row of the entropy time series. Errors compare against the previous
/// row and are zero for the initial sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow<T> {
    pub time: T,
    pub eta_mean: T,
    pub h_mean: Vec<T>,
    pub signed_eta: T,
    pub abs_eta: T,
    pub signed_h: Vec<T>,
    pub abs_h: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntropyReport<T> {
    pub velocities: usize,
    pub rows: Vec<EntropyRow<T>>,
}

impl<T: Real> EntropyReport<T> {
    /// Rows that carry a step difference (all but the initial sample).
    pub fn steps(&self) -> &[EntropyRow<T>] {
        if self.rows.is_empty() {
            &[]
        } else {
            &self.rows[1..]
        }
    }

    pub fn max_signed_eta(&self) -> T {
        self.steps().iter().fold(T::neg_infinity(), |m, r| m.max(r.signed_eta))
    }

    pub fn max_abs_signed_eta(&self) -> T {
        self.steps().iter().fold(T::zero(), |m, r| m.max(r.signed_eta.abs()))
    }

    pub fn max_signed_h(&self, m: usize) -> T {
        self.steps().iter().fold(T::neg_infinity(), |a, r| a.max(r.signed_h[m]))
    }

    pub fn max_abs_h(&self, m: usize) -> T {
        self.steps().iter().fold(T::zero(), |a, r| a.max(r.abs_h[m]))
    }
}

/// Accumulates an [`EntropyReport`] from successive accepted states.
#[derive(Debug, Clone)]
pub struct EntropyRecorder<T> {
    model: Model,
    centres: Vec<Point<T>>,
    prev: Vec<State<T>>,
    report: EntropyReport<T>,
}

impl<T: Real> EntropyRecorder<T> {
    pub fn new(model: Model, vset: &VelocitySet<T>, u: &Field<T>, time: T) -> Self {
        let sample = entropy_sample(&model, vset, u);
        let mm = vset.len();
        let row = EntropyRow {
            time,
            eta_mean: sample.eta_mean,
            h_mean: sample.h_mean[..mm].to_vec(),
            signed_eta: T::zero(),
            abs_eta: T::zero(),
            signed_h: vec![T::zero(); mm],
            abs_h: vec![T::zero(); mm],
        };
        EntropyRecorder {
            model,
            centres: interior_centres(u.grid()),
            prev: u.interior_states(),
            report: EntropyReport {
                velocities: mm,
                rows: vec![row],
            },
        }
    }

    /// Records the state after a step taken with `vset`; both time levels are
    /// evaluated with that velocity set.
    pub fn record(&mut self, vset: &VelocitySet<T>, u: &Field<T>, time: T) -> Result<()> {
        let curr = u.interior_states();
        let (eta0, h0) = cell_entropies(&self.model, vset, &self.prev, &self.centres);
        let (eta1, h1) = cell_entropies(&self.model, vset, &curr, &self.centres);
        let mm = vset.len();
        let mut row = EntropyRow {
            time,
            eta_mean: mean(&eta1),
            h_mean: h1.iter().map(|c| mean(c)).collect(),
            signed_eta: signed_error(&eta1, &eta0)?,
            abs_eta: absolute_error(&eta1, &eta0)?,
            signed_h: Vec::with_capacity(mm),
            abs_h: Vec::with_capacity(mm),
        };
        for m in 0..mm {
            row.signed_h.push(signed_error(&h1[m], &h0[m])?);
            row.abs_h.push(absolute_error(&h1[m], &h0[m])?);
        }
        self.report.rows.push(row);
        self.prev = curr;
        Ok(())
    }

    pub fn report(&self) -> &EntropyReport<T> {
        &self.report
    }

    pub fn into_report(self) -> EntropyReport<T> {
        self.report
    }
}

/// Weighting of the discrete L2 norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormWeight {
    /// `sqrt(Σ e² · Π_d Δx_d)`
    Volume,
    /// `sqrt(Σ e²) / N` with `N` the number of interior cells.
    CountScaled,
}

/// L2 difference per component over interior cells.
pub fn l2_error<T: Real>(field: &Field<T>, reference: &Field<T>, weight: NormWeight) -> Result<Vec<T>> {
    if !field.same_shape(reference) {
        return Err(Error::Shape("L2 error needs fields on the same grid".into()));
    }
    let p = field.components();
    let mut sums = vec![T::zero(); p];
    for off in field.grid().interior_offsets() {
        let (a, b) = (field.cell(off), reference.cell(off));
        for k in 0..p {
            let e = a[k] - b[k];
            sums[k] = sums[k] + e * e;
        }
    }
    let grid = field.grid();
    Ok(sums
        .into_iter()
        .map(|s| match weight {
            NormWeight::Volume => (s * grid.cell_volume()).sqrt(),
            NormWeight::CountScaled => s.sqrt() / T::from_usize_lossy(grid.interior_len()),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocRow<T> {
    pub n: usize,
    pub dx: T,
    pub l2: Vec<T>,
    /// Empty for the coarsest row.
    pub order: Vec<Option<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocTable<T> {
    pub rows: Vec<EocRow<T>>,
}

impl<T: Real> EocTable<T> {
    /// Orders of component `k`, one per refinement.
    pub fn orders(&self, k: usize) -> Vec<T> {
        self.rows.iter().filter_map(|r| r.order[k]).collect()
    }
}

/// Experimental orders `log(e_{k−1}/e_k) / log(Δx_{k−1}/Δx_k)` from rows of
/// `(cells, Δx, errors per component)` ordered coarse to fine.
pub fn eoc<T: Real>(rows: &[(usize, T, Vec<T>)]) -> Result<EocTable<T>> {
    if rows.len() < 2 {
        return Err(Error::EocUndefined(rows.len()));
    }
    let p = rows[0].2.len();
    let mut out = Vec::with_capacity(rows.len());
    for (idx, (n, dx, l2)) in rows.iter().enumerate() {
        if l2.len() != p {
            return Err(Error::LengthMismatch {
                left: l2.len(),
                right: p,
            });
        }
        let order = if idx == 0 {
            vec![None; p]
        } else {
            let (_, dx0, e0) = &rows[idx - 1];
            if !(*dx < *dx0) {
                return Err(Error::Domain("grid spacing must decrease down the table".into()));
            }
            (0..p).map(|k| Some((e0[k] / l2[k]).ln() / (*dx0 / *dx).ln())).collect()
        };
        out.push(EocRow {
            n: *n,
            dx: *dx,
            l2: l2.clone(),
            order,
        });
    }
    Ok(EocTable { rows: out })
}

/// Conservative restriction of a fine solution onto `coarse` by averaging the
/// fine cells that tile each coarse cell.
pub fn restrict<T: Real>(fine: &Field<T>, coarse: &Grid<T>) -> Result<Field<T>> {
    let fg = fine.grid();
    if fg.dim() != coarse.dim() {
        return Err(Error::Shape("restriction between grids of different dimension".into()));
    }
    let mut ratio = [1usize; 2];
    for d in 0..fg.dim() {
        let (nf, nc) = (fg.cells(d), coarse.cells(d));
        if nc == 0 || nf % nc != 0 || fg.lo(d) != coarse.lo(d) || fg.hi(d) != coarse.hi(d) {
            return Err(Error::Shape(format!(
                "cannot restrict {nf} cells onto {nc} in direction {d}"
            )));
        }
        ratio[d] = nf / nc;
    }
    let p = fine.components();
    let weight = T::one() / T::from_usize_lossy(ratio[0] * ratio[1]);
    let mut out = Field::zeros(coarse, p);
    for (i, j) in coarse.interior_cells() {
        let mut acc = [T::zero(); 3];
        for b in 0..ratio[1] as isize {
            for a in 0..ratio[0] as isize {
                let fi = i * ratio[0] as isize + a;
                let fj = if fg.dim() == 2 { j * ratio[1] as isize + b } else { 0 };
                let s = fine.at(fi, fj);
                for k in 0..p {
                    acc[k] = acc[k] + s[k];
                }
            }
        }
        let off = coarse.index(i, j);
        for k in 0..p {
            out.cell_mut(off)[k] = acc[k] * weight;
        }
    }
    Ok(out)
}

/// `[[χ_m]] − ⟨[[V]], flux_m⟩` at every interior-bounding face along `d`
/// and every velocity. Zero for entropy conserving fluxes; the entropy
/// dissipated by the face otherwise. `u` must have its ghosts filled.
pub fn flux_residuals<T: Real>(
    scheme: SchemeKind,
    model: &Model,
    vset: &VelocitySet<T>,
    u: &Field<T>,
    d: usize,
) -> Result<Vec<T>> {
    let grid = u.grid();
    let mut out = Vec::new();
    for line in 0..grid.line_count(d) {
        let offs = grid.line(d, line);
        let states: Vec<State<T>> = offs.iter().map(|&o| u.state(o)).collect();
        let vars: Vec<State<T>> = states.iter().map(|s| model.entropy_variable(s)).collect();
        for c in 1..offs.len() - 2 {
            let x = grid.face_point(d, line, c);
            let req = FluxRequest {
                d,
                ul: states[c],
                ur: states[c + 1],
                vl: vars[c],
                vr: vars[c + 1],
                jump_prev: sub(&vars[c], &vars[c - 1]),
                jump_next: sub(&vars[c + 2], &vars[c + 1]),
                x,
            };
            let f = interface_fluxes(scheme, model, vset, &req)?;
            let chi_l = chi_potential(model, vset, &req.ul, &x);
            let chi_r = chi_potential(model, vset, &req.ur, &x);
            let jump = req.jump();
            for m in 0..vset.len() {
                out.push((chi_r[m][d] - chi_l[m][d]) - dot(&jump, &f[m]));
            }
        }
    }
    Ok(out)
}

/// Largest `|⟨[[V]], flux⟩ − [[χ_m]]|` of the entropy conserving fluxes along `d`.
pub fn ec_residual_audit<T: Real>(model: &Model, vset: &VelocitySet<T>, u: &Field<T>, d: usize) -> Result<T> {
    Ok(flux_residuals(SchemeKind::EC, model, vset, u, d)?
        .into_iter()
        .fold(T::zero(), |m, r| m.max(r.abs())))
}
