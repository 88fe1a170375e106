//! Error norms, one-sided interface gradient recovery, convergence-slope
//! fitting, and CSV reporting.

use std::collections::BTreeMap;
use std::io::Write;

use crate::affine::{Form, Sym};
use crate::coupling::{PointDiscretization, SegmentInfo};
use crate::jumps::{pair_index, InterfaceData};
use crate::mesh::Grid;
use crate::problems::Problem;
use crate::system::{Assembly, Solution};
use crate::vec3::{add, dot, scale, sub, V3};
use crate::{Error, Result, Side};

/// Recovered one-sided gradients at one interface crossing.
#[derive(Debug, Clone)]
pub struct GradientRecord {
    /// Grid point whose expansions produced the recovery.
    pub base: [usize; 3],
    /// Lower endpoint of the crossed segment along `axis`.
    pub lower: [usize; 3],
    pub axis: usize,
    /// Fraction from `lower` toward +axis where the crossing sits.
    pub alpha: f64,
    /// Crossing location on the interface.
    pub point: V3,
    pub normal: V3,
    pub grad_minus: V3,
    pub grad_plus: V3,
}

/// Sup-norm errors plus the per-crossing gradient records behind them.
pub struct ErrorReport {
    pub err_u_inf: f64,
    pub err_grad_inf: f64,
    pub records: Vec<GradientRecord>,
}

fn eval_on_grid(grid: &Grid, base: [usize; 3], u: &[f64], f: &Form) -> f64 {
    f.evaluate(&|s| match s {
        Sym::Grid(a, b, c) => {
            let m = grid
                .offset(base, [a as i32, b as i32, c as i32])
                .expect("stencil stays inside the grid");
            u[grid.index(m)]
        }
        other => panic!("non-grid symbol {other:?} in finalized form"),
    })
}

/// One-sided gradients at a crossing. The grid-side gradient comes from the
/// base point's expansions carried to the crossing along the segment axis;
/// the far side adds the gradient jump reconstructed from the interface data.
pub fn interface_gradient(
    grid: &Grid,
    data: &InterfaceData,
    disc: &PointDiscretization,
    seg: &SegmentInfo,
    u: &[f64],
) -> (V3, V3) {
    let cut = &seg.cut;
    let k = cut.axis;
    let sah = cut.dir as f64 * cut.alpha * grid.h;
    let mut g = [0.0; 3];
    for (j, gj) in g.iter_mut().enumerate() {
        let second = if j == k {
            eval_on_grid(grid, disc.base, u, &disc.forms.d2[k])
        } else {
            eval_on_grid(grid, disc.base, u, &seg.mixed[pair_index(j, k)])
        };
        *gj = eval_on_grid(grid, disc.base, u, &disc.forms.d1[j]) + sah * second;
    }
    let jd = data.eval_at(cut.point, &cut.geom);
    let njump = (jd.sigma - jd.jump_eps() * dot(g, cut.geom.normal)) / jd.eps(seg.side.other());
    let mut dg = scale(cut.geom.normal, njump);
    for t in &cut.geom.tangents {
        dg = add(dg, scale(*t, dot(jd.grad_tau, *t)));
    }
    match seg.side {
        Side::Minus => (g, add(g, dg)),
        Side::Plus => (sub(g, dg), g),
    }
}

/// Normal component of the gradient jump at a crossing.
pub fn gradient_jump_normal(rec: &GradientRecord) -> f64 {
    dot(sub(rec.grad_plus, rec.grad_minus), rec.normal)
}

/// Gradient records for every distinct crossing. Each physical crossing is
/// seen from up to two endpoints; the minus-side endpoint's expansions are
/// preferred, except when the crossing sits hard against the plus-side
/// endpoint: there the minus expansion would span nearly the whole segment
/// while the plus endpoint needs almost no extension, so the plus record
/// wins. This keeps reconstruction through the flux jump (which amplifies
/// error by the coefficient ratio) confined to crossings where the owning
/// expansion is near-exact.
pub fn collect_gradients(
    assembly: &Assembly,
    data: &InterfaceData,
    u: &[f64],
) -> Vec<GradientRecord> {
    let grid = &assembly.grid;
    // plus expansions take over only within this fraction of the segment
    const HANDOFF: f64 = 0.1;
    // crossing identity: (lower endpoint along the axis, axis)
    let mut chosen: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (di, disc) in assembly.interface.iter().enumerate() {
        for (si, seg) in disc.segments.iter().enumerate() {
            let cut = &seg.cut;
            let lower = if cut.dir == 1 {
                cut.base
            } else {
                grid.neighbor(cut.base, cut.axis, -1)
                    .expect("crossing neighbor in grid")
            };
            let key = (grid.index(lower), cut.axis);
            match chosen.get(&key) {
                Some(&(prev_di, prev_si)) => {
                    let prev = &assembly.interface[prev_di];
                    let prev_alpha = prev.segments[prev_si].cut.alpha;
                    let wins = match (prev.side, disc.side) {
                        (Side::Plus, Side::Minus) => !(prev_alpha < HANDOFF && cut.alpha > 1.0 - HANDOFF),
                        (Side::Minus, Side::Plus) => cut.alpha < HANDOFF && prev_alpha > 1.0 - HANDOFF,
                        _ => false,
                    };
                    if wins {
                        chosen.insert(key, (di, si));
                    }
                }
                None => {
                    chosen.insert(key, (di, si));
                }
            }
        }
    }
    chosen
        .values()
        .map(|&(di, si)| {
            let disc = &assembly.interface[di];
            let seg = &disc.segments[si];
            let cut = &seg.cut;
            let (lower, alpha) = if cut.dir == 1 {
                (cut.base, cut.alpha)
            } else {
                let lower = grid
                    .neighbor(cut.base, cut.axis, -1)
                    .expect("crossing neighbor in grid");
                (lower, cut.beta)
            };
            let (grad_minus, grad_plus) = interface_gradient(grid, data, disc, seg, u);
            GradientRecord {
                base: disc.base,
                lower,
                axis: cut.axis,
                alpha,
                point: cut.point,
                normal: cut.geom.normal,
                grad_minus,
                grad_plus,
            }
        })
        .collect()
}

/// Sup-norm solution error over all grid points and sup-norm gradient error
/// over all crossings (both sides), against the problem's exact solution.
pub fn error_report(problem: &Problem, sol: &Solution) -> ErrorReport {
    let exact = problem
        .exact
        .as_ref()
        .expect("error report needs an exact solution");
    let grid = &sol.assembly.grid;
    let mut err_u = 0.0f64;
    for lin in 0..grid.num_points() {
        let m = grid.multi(lin);
        let side = Side::from_sign(sol.assembly.signs.sign_at(grid, m));
        let want = (exact.u)(grid.coord(m), side);
        err_u = err_u.max((sol.u[lin] - want).abs());
    }
    let records = collect_gradients(&sol.assembly, &problem.data, &sol.u);
    let mut err_g = 0.0f64;
    for rec in &records {
        let gm = (exact.grad)(rec.point, Side::Minus);
        let gp = (exact.grad)(rec.point, Side::Plus);
        for j in 0..3 {
            err_g = err_g.max((rec.grad_minus[j] - gm[j]).abs());
            err_g = err_g.max((rec.grad_plus[j] - gp[j]).abs());
        }
    }
    ErrorReport {
        err_u_inf: err_u,
        err_grad_inf: err_g,
        records,
    }
}

/// Least-squares slope of log(error) against log(N).
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Config("slope fit needs at least two points".into()));
    }
    for &(n, e) in points {
        if n <= 0.0 || e <= 0.0 {
            return Err(Error::Config(format!(
                "slope fit needs positive values, got ({n}, {e})"
            )));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    Ok(num / den)
}

/// One line of the convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub err_u_inf: f64,
    pub err_grad_inf: f64,
    pub iterations: usize,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

pub fn write_csv<W: Write>(rows: &[ConvergenceRow], w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "N,h,err_u_inf,err_grad_inf,iterations,assemble_seconds,solve_seconds"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{},{:.3},{:.3}",
            r.n, r.h, r.err_u_inf, r.err_grad_inf, r.iterations, r.assemble_seconds, r.solve_seconds
        )?;
    }
    Ok(())
}
