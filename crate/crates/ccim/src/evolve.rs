//! Interface evolution under the normal speed v_n = [grad u . n].
//!
//! Each time step solves the elliptic problem on the current implicit
//! surface, samples the gradient jump at every grid-line crossing, extends
//! that speed to the whole grid, and advects the nodal level set with a
//! Godunov Hamiltonian and forward Euler in time.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::levelset::Surface;
use crate::mesh::Grid;
use crate::postproc::{collect_gradients, gradient_jump_normal};
use crate::problems::preset;
use crate::system::solve_problem;
use crate::vec3::{norm, M3, V3};
use crate::{Error, Result};

/// Nodal level-set snapshot at one time.
#[derive(Debug, Clone)]
pub struct LevelSetState {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub t: f64,
}

impl LevelSetState {
    /// Signed distance to the sphere |x| = r0.
    pub fn sphere(grid: Grid, r0: f64) -> LevelSetState {
        let phi = (0..grid.num_points())
            .map(|lin| norm(grid.coord(grid.multi(lin))) - r0)
            .collect();
        LevelSetState { grid, phi, t: 0.0 }
    }

    pub fn has_interface(&self) -> bool {
        self.phi.iter().any(|&v| v < 0.0) && self.phi.iter().any(|&v| v >= 0.0)
    }
}

/// Evolved nodal values wrapped as a `Surface`.
///
/// The field is the trilinear interpolant of nodal phi; the gradient and
/// Hessian interpolate centered-difference nodal derivatives. Along a grid
/// segment the interpolant is linear, so the crossings the solver finds agree
/// with the linear sub-cell model used for radius measurement.
pub struct DiscreteSurface {
    grid: Grid,
    phi: Vec<f64>,
    grad: Vec<V3>,
    // xx, yy, zz, xy, xz, yz
    hess: Vec<[f64; 6]>,
}

impl DiscreteSurface {
    pub fn new(grid: Grid, phi: Vec<f64>) -> DiscreteSurface {
        let np = grid.num_points();
        assert_eq!(phi.len(), np, "nodal field does not match the grid");
        let h = grid.h;
        let val = |m: [usize; 3]| phi[grid.index(m)];
        let mut grad = vec![[0.0; 3]; np];
        let mut hess = vec![[0.0; 6]; np];
        for lin in 0..np {
            let m = grid.multi(lin);
            for k in 0..3 {
                let dn = grid.neighbor(m, k, -1);
                let up = grid.neighbor(m, k, 1);
                grad[lin][k] = match (dn, up) {
                    (Some(a), Some(b)) => (val(b) - val(a)) / (2.0 * h),
                    (None, Some(b)) => (val(b) - val(m)) / h,
                    (Some(a), None) => (val(m) - val(a)) / h,
                    (None, None) => 0.0,
                };
                if let (Some(a), Some(b)) = (dn, up) {
                    hess[lin][k] = (val(b) - 2.0 * val(m) + val(a)) / (h * h);
                }
            }
            for (slot, (k, l)) in [(0usize, 1usize), (0, 2), (1, 2)].into_iter().enumerate() {
                let corner = |dk: i32, dl: i32| {
                    let mut d = [0i32; 3];
                    d[k] = dk;
                    d[l] = dl;
                    grid.offset(m, d).map(val)
                };
                if let (Some(pp), Some(pm), Some(mp), Some(mm)) =
                    (corner(1, 1), corner(1, -1), corner(-1, 1), corner(-1, -1))
                {
                    hess[lin][3 + slot] = (pp - pm - mp + mm) / (4.0 * h * h);
                }
            }
        }
        DiscreteSurface {
            grid,
            phi,
            grad,
            hess,
        }
    }

    fn cell(&self, x: V3) -> ([usize; 3], [f64; 3]) {
        let p = self.grid.points_per_axis();
        let mut c = [0usize; 3];
        let mut w = [0.0f64; 3];
        for k in 0..3 {
            let s = (x[k] + 1.0) / self.grid.h;
            let i = (s.floor() as i64).clamp(0, p as i64 - 2) as usize;
            c[k] = i;
            w[k] = (s - i as f64).clamp(0.0, 1.0);
        }
        (c, w)
    }

    fn interp(&self, x: V3, f: impl Fn(usize) -> f64) -> f64 {
        let (c, w) = self.cell(x);
        let mut acc = 0.0;
        for dz in 0..2usize {
            for dy in 0..2usize {
                for dx in 0..2usize {
                    let weight = (if dx == 1 { w[0] } else { 1.0 - w[0] })
                        * (if dy == 1 { w[1] } else { 1.0 - w[1] })
                        * (if dz == 1 { w[2] } else { 1.0 - w[2] });
                    acc += weight * f(self.grid.index([c[0] + dx, c[1] + dy, c[2] + dz]));
                }
            }
        }
        acc
    }
}

impl Surface for DiscreteSurface {
    fn phi(&self, x: V3) -> f64 {
        self.interp(x, |i| self.phi[i])
    }

    fn grad(&self, x: V3) -> V3 {
        [0, 1, 2].map(|k| self.interp(x, |i| self.grad[i][k]))
    }

    fn hess(&self, x: V3) -> M3 {
        let c: [f64; 6] = [0, 1, 2, 3, 4, 5].map(|s| self.interp(x, |i| self.hess[i][s]));
        [
            [c[0], c[3], c[4]],
            [c[3], c[1], c[5]],
            [c[4], c[2], c[5]],
        ]
    }
}

/// One grid-line sign change of the nodal field, located by linear
/// interpolation inside the segment.
#[derive(Debug, Clone)]
pub struct NodalCrossing {
    pub lower: [usize; 3],
    pub axis: usize,
    /// Fraction from `lower` toward +axis.
    pub alpha: f64,
    pub point: V3,
}

pub fn nodal_crossings(state: &LevelSetState) -> Vec<NodalCrossing> {
    let grid = &state.grid;
    let mut out = Vec::new();
    for lin in 0..grid.num_points() {
        let m = grid.multi(lin);
        let a = state.phi[lin];
        for axis in 0..3 {
            let Some(nb) = grid.neighbor(m, axis, 1) else {
                continue;
            };
            let b = state.phi[grid.index(nb)];
            if (a < 0.0) == (b < 0.0) {
                continue;
            }
            let alpha = a / (a - b);
            let mut point = grid.coord(m);
            point[axis] += alpha * grid.h;
            out.push(NodalCrossing {
                lower: m,
                axis,
                alpha,
                point,
            });
        }
    }
    out
}

/// Interface radii at every grid-line crossing of the nodal field.
pub fn measure_radii(state: &LevelSetState) -> Vec<f64> {
    nodal_crossings(state)
        .iter()
        .map(|c| norm(c.point))
        .collect()
}

/// Normal speed sampled at one grid-segment crossing.
#[derive(Debug, Clone)]
pub struct CrossingSpeed {
    pub lower: [usize; 3],
    pub axis: usize,
    /// Fraction from `lower` toward +axis.
    pub alpha: f64,
    pub speed: f64,
}

/// Nodal normal speed extended off the interface.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub v: Vec<f64>,
}

/// Extends crossing speeds to every node.
///
/// Endpoints of crossed segments are seeded by inverse-distance weighting of
/// their incident crossing speeds. The remaining nodes are visited in
/// ascending |phi| and take the upwind-weighted average of already-visited
/// neighbors, which discretizes grad v . grad phi = 0 away from the
/// interface. The ordering field is fixed, so one sort yields the same visit
/// order a marching heap would.
pub fn extend_velocity(state: &LevelSetState, speeds: &[CrossingSpeed]) -> Result<VelocityField> {
    if speeds.is_empty() {
        return Err(Error::Config(
            "velocity extension needs at least one interface crossing".into(),
        ));
    }
    let grid = &state.grid;
    let np = grid.num_points();
    let h = grid.h;

    let mut wsum = vec![0.0f64; np];
    let mut vsum = vec![0.0f64; np];
    for s in speeds {
        let upper = grid
            .neighbor(s.lower, s.axis, 1)
            .ok_or_else(|| Error::Config("crossing segment leaves the grid".into()))?;
        let d_lo = (s.alpha * h).max(1e-12 * h);
        let d_hi = ((1.0 - s.alpha) * h).max(1e-12 * h);
        let li = grid.index(s.lower);
        let ui = grid.index(upper);
        wsum[li] += 1.0 / d_lo;
        vsum[li] += s.speed / d_lo;
        wsum[ui] += 1.0 / d_hi;
        vsum[ui] += s.speed / d_hi;
    }

    let mut v = vec![0.0f64; np];
    let mut done = vec![false; np];
    for i in 0..np {
        if wsum[i] > 0.0 {
            v[i] = vsum[i] / wsum[i];
            done[i] = true;
        }
    }

    let mut order: Vec<usize> = (0..np).filter(|&i| !done[i]).collect();
    order.sort_by(|&a, &b| {
        state.phi[a]
            .abs()
            .partial_cmp(&state.phi[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    for &i in &order {
        let m = grid.multi(i);
        let pi = state.phi[i].abs();
        let mut wsum_up = 0.0;
        let mut vsum_up = 0.0;
        let mut nb_count = 0.0;
        let mut nb_sum = 0.0;
        for axis in 0..3 {
            for dir in [1i8, -1] {
                let Some(nb) = grid.neighbor(m, axis, dir) else {
                    continue;
                };
                let j = grid.index(nb);
                if !done[j] {
                    continue;
                }
                nb_count += 1.0;
                nb_sum += v[j];
                // Upwind weight ~ |directional derivative of phi| toward the
                // interface, using only neighbors strictly closer to it.
                let drop = pi - state.phi[j].abs();
                if drop > 0.0 {
                    wsum_up += drop;
                    vsum_up += drop * v[j];
                }
            }
        }
        v[i] = if wsum_up > 0.0 {
            vsum_up / wsum_up
        } else if nb_count > 0.0 {
            nb_sum / nb_count
        } else {
            0.0
        };
        done[i] = true;
    }
    Ok(VelocityField { v })
}

fn minmod(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        a.min(b)
    } else if a < 0.0 && b < 0.0 {
        a.max(b)
    } else {
        0.0
    }
}

/// Second-order one-sided difference pair along `axis` at interior node `m`,
/// limited with minmod; falls back to first order where the five-point
/// stencil leaves the grid.
fn one_sided_pair(grid: &Grid, phi: &[f64], m: [usize; 3], axis: usize) -> (f64, f64) {
    let h = grid.h;
    let at = |d: i32| -> Option<f64> {
        let mut off = [0i32; 3];
        off[axis] = d;
        grid.offset(m, off).map(|mm| phi[grid.index(mm)])
    };
    let c = phi[grid.index(m)];
    let pm = at(-1).expect("interior node");
    let pp = at(1).expect("interior node");
    let d2c = pp - 2.0 * c + pm;
    let minus = {
        let base = (c - pm) / h;
        match at(-2) {
            Some(pmm) => base + minmod(pmm - 2.0 * pm + c, d2c) / (2.0 * h),
            None => base,
        }
    };
    let plus = {
        let base = (pp - c) / h;
        match at(2) {
            Some(ppp) => base - minmod(d2c, c - 2.0 * pp + ppp) / (2.0 * h),
            None => base,
        }
    };
    (minus, plus)
}

fn godunov_gradient_sq(grid: &Grid, phi: &[f64], m: [usize; 3], v: f64) -> f64 {
    let mut g2 = 0.0;
    for axis in 0..3 {
        let (dm, dp) = one_sided_pair(grid, phi, m, axis);
        let (a, b) = if v > 0.0 {
            (dm.max(0.0), dp.min(0.0))
        } else {
            (dm.min(0.0), dp.max(0.0))
        };
        g2 += (a * a).max(b * b);
    }
    g2
}

/// One forward-Euler advection step phi -> phi - dt v |grad phi| with the
/// Godunov upwind gradient. Boundary nodes are held fixed; the interface is
/// assumed to stay away from the box walls.
pub fn godunov_step(state: &LevelSetState, vel: &VelocityField, dt: f64) -> Result<LevelSetState> {
    let grid = state.grid;
    if vel.v.len() != state.phi.len() {
        return Err(Error::Config("velocity field does not match the grid".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let vmax = vel.v.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if vmax > 0.0 {
        let bound = 0.5 * grid.h / vmax;
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "time step {dt:.6e} violates the CFL bound {bound:.6e}"
            )));
        }
    }
    let phi = &state.phi;
    let out: Vec<f64> = (0..phi.len())
        .into_par_iter()
        .map(|i| {
            let m = grid.multi(i);
            if grid.is_boundary(m) {
                return phi[i];
            }
            let v = vel.v[i];
            if v == 0.0 {
                return phi[i];
            }
            phi[i] - dt * v * godunov_gradient_sq(&grid, phi, m, v).sqrt()
        })
        .collect();
    Ok(LevelSetState {
        grid,
        phi: out,
        t: state.t + dt,
    })
}

/// Relaxation sweeps of phi_t + S(phi0)(|grad phi| - 1) = 0 with a smoothed
/// sign; restores |grad phi| ~ 1 near the interface while approximately
/// preserving the zero set. Optional in the evolution loop, off by default.
pub fn reinitialize(state: &LevelSetState, sweeps: usize) -> LevelSetState {
    let grid = state.grid;
    let h = grid.h;
    let dtau = 0.5 * h;
    let phi0 = state.phi.clone();
    let mut phi = state.phi.clone();
    for _ in 0..sweeps {
        let cur = phi;
        phi = (0..cur.len())
            .into_par_iter()
            .map(|i| {
                let m = grid.multi(i);
                if grid.is_boundary(m) {
                    return cur[i];
                }
                let s = phi0[i] / (phi0[i] * phi0[i] + h * h).sqrt();
                if s == 0.0 {
                    return cur[i];
                }
                let g = godunov_gradient_sq(&grid, &cur, m, s).sqrt();
                cur[i] - dtau * s * (g - 1.0)
            })
            .collect();
    }
    LevelSetState {
        grid,
        phi,
        t: state.t,
    }
}

/// Interface speed of the expanding-sphere problem at radius r, the gradient
/// jump of the radial solution pair +-1/(1+r^2).
pub fn sphere_speed(r: f64) -> f64 {
    let q = 1.0 + r * r;
    4.0 * r / (q * q)
}

fn rk4(rhs: impl Fn(f64) -> f64, r0: f64, t_final: f64, dt: f64) -> f64 {
    if t_final <= 0.0 {
        return r0;
    }
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = rhs(r);
        let k2 = rhs(r + 0.5 * dt * k1);
        let k3 = rhs(r + 0.5 * dt * k2);
        let k4 = rhs(r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

/// Radius of the exactly spherical front at time `t_final`: classical
/// fourth-order integration of dr/dt = 4r/(1+r^2)^2 with step 1e-6.
pub fn reference_radius(r0: f64, t_final: f64) -> f64 {
    rk4(sphere_speed, r0, t_final, 1e-6)
}

/// Knobs for the evolution loop.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// Fraction of the stability bound h/max|v| used for dt; at most 0.5.
    pub cfl: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Reinitialize every this many steps; 0 disables.
    pub reinit_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            cfl: 0.5,
            tol: 1e-9,
            max_iter: 10_000,
            reinit_every: 0,
        }
    }
}

/// Radius statistics after one step.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub min_radius: f64,
    pub mean_radius: f64,
    pub max_radius: f64,
}

/// Final summary of an expanding-sphere run.
#[derive(Debug, Clone)]
pub struct EvolveReport {
    pub n: usize,
    pub t_final: f64,
    /// Reference radius from the front ODE.
    pub reference: f64,
    /// Radii at every grid-line crossing at the final time.
    pub radii: Vec<f64>,
    pub rmse: f64,
    pub max_err: f64,
    pub min_radius: f64,
    pub mean_radius: f64,
    pub max_radius: f64,
    pub steps: Vec<StepRow>,
}

fn radius_stats(radii: &[f64]) -> Option<(f64, f64, f64)> {
    if radii.is_empty() {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &r in radii {
        lo = lo.min(r);
        hi = hi.max(r);
        sum += r;
    }
    Some((lo, sum / radii.len() as f64, hi))
}

/// One elliptic solve on the current level set, reduced to an extended nodal
/// speed field.
fn step_velocity(state: &LevelSetState, opts: &EvolveOptions) -> Result<VelocityField> {
    let surface: Arc<dyn Surface> = Arc::new(DiscreteSurface::new(state.grid, state.phi.clone()));
    let problem = preset("example4", surface)?;
    let sol = solve_problem(&problem, state.grid.n, opts.tol, opts.max_iter)?;
    let records = collect_gradients(&sol.assembly, &problem.data, &sol.u);
    let speeds: Vec<CrossingSpeed> = records
        .iter()
        .map(|r| CrossingSpeed {
            lower: r.lower,
            axis: r.axis,
            alpha: r.alpha,
            speed: gradient_jump_normal(r),
        })
        .collect();
    extend_velocity(state, &speeds)
}

/// Evolves the sphere of radius 0.5 to `t_final`, one full elliptic solve per
/// step, and compares the measured radii against the front ODE.
pub fn run_expanding_sphere(n: usize, t_final: f64, opts: &EvolveOptions) -> Result<EvolveReport> {
    if n < 20 {
        return Err(Error::Config(format!(
            "expanding-sphere run needs N >= 20, got {n}"
        )));
    }
    if !(t_final >= 0.0) {
        return Err(Error::Config(format!(
            "final time must be nonnegative, got {t_final}"
        )));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 0.5) {
        return Err(Error::Config(format!(
            "CFL number must lie in (0, 0.5], got {}",
            opts.cfl
        )));
    }
    let grid = Grid::new(n)?;
    let mut state = LevelSetState::sphere(grid, 0.5);
    let mut steps = Vec::new();
    let mut step = 0usize;
    while state.t < t_final - 1e-12 {
        let t = state.t;
        let stamp = |e: Error| Error::Solver(format!("at t = {t:.6}: {e}"));
        let vel = step_velocity(&state, opts).map_err(stamp)?;
        let vmax = vel.v.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if !(vmax > 0.0) {
            return Err(Error::Solver(format!(
                "at t = {t:.6}: extended speed field vanished"
            )));
        }
        let dt = (opts.cfl * grid.h / vmax).min(t_final - t);
        state = godunov_step(&state, &vel, dt)?;
        step += 1;
        if opts.reinit_every > 0 && step % opts.reinit_every == 0 {
            state = reinitialize(&state, 5);
        }
        let radii = measure_radii(&state);
        let (min_radius, mean_radius, max_radius) = radius_stats(&radii)
            .ok_or_else(|| Error::Solver(format!("at t = {:.6}: interface left the grid", state.t)))?;
        steps.push(StepRow {
            step,
            t: state.t,
            dt,
            min_radius,
            mean_radius,
            max_radius,
        });
    }
    let radii = measure_radii(&state);
    let (min_radius, mean_radius, max_radius) = radius_stats(&radii)
        .ok_or_else(|| Error::Solver("no interface at the final time".into()))?;
    let reference = reference_radius(0.5, t_final);
    let mut sq = 0.0;
    let mut max_err = 0.0f64;
    for &r in &radii {
        let e = r - reference;
        sq += e * e;
        max_err = max_err.max(e.abs());
    }
    Ok(EvolveReport {
        n,
        t_final,
        reference,
        rmse: (sq / radii.len() as f64).sqrt(),
        max_err,
        min_radius,
        mean_radius,
        max_radius,
        radii,
        steps,
    })
}

/// Time-series CSV: one row per step.
pub fn write_series_csv(out: &mut dyn Write, rows: &[StepRow]) -> Result<()> {
    writeln!(out, "step,t,dt,min_radius,mean_radius,max_radius")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.step, r.t, r.dt, r.min_radius, r.mean_radius, r.max_radius
        )?;
    }
    Ok(())
}

/// Final radii CSV, one crossing per row.
pub fn write_radii_csv(out: &mut dyn Write, radii: &[f64]) -> Result<()> {
    writeln!(out, "radius")?;
    for r in radii {
        writeln!(out, "{r:.12e}")?;
    }
    Ok(())
}
