//! The local coupling step. At each grid point flagged by `classify` as
//! adjacent to the interface, the six one-step Taylor expansions (one per axis
//! neighbor, jump-corrected where the segment crosses the interface) are
//! solved as a 6x6 system for the first and pure second derivatives at the
//! point. The result is a set of grid-only linear forms that the global matrix
//! row consumes directly.

use std::collections::BTreeMap;

use crate::affine::{solve_linear_forms, Form, LocalSolveError, Sym, COND_LIMIT};
use crate::dense;
use crate::jumps::{
    assemble_g, assemble_jump_rhs, first_derivative_jump, InterfaceData, JumpData, JumpSolution,
    SegmentContext,
};
use crate::levelset::{Surface, SurfaceGeometry};
use crate::mesh::{find_intersection, Grid, Intersection, SignField};
use crate::mixed::{select, Choice, Kind, PointEnv, Scheme};
use crate::vec3::V3;
use crate::{Error, Result, Side};

/// The raw 6x6 coupling system, kept for inspection and diagnostics.
/// Row order: axis 0 step +1, axis 0 step -1, axis 1 step +1, and so on.
/// Column order: du/dx_0..2 then d2u/dx_0^2..dx_2^2.
#[derive(Debug, Clone)]
pub struct CouplingSystem {
    pub matrix: [[f64; 6]; 6],
    pub rhs: [Form; 6],
    /// Exact 1-norm condition number of `matrix`.
    pub cond: f64,
}

/// Grid-only expansions of the derivatives at one interface point. `mixed`
/// holds the cross derivatives in pair order (0,1), (0,2), (1,2), taken from
/// the first crossing in row order.
#[derive(Debug, Clone)]
pub struct DerivativeForms {
    pub d1: [Form; 3],
    pub d2: [Form; 3],
    pub mixed: [Form; 3],
}

/// One interface crossing adjacent to the point, with the cross-derivative
/// expansions resolved against that crossing's jump system.
#[derive(Debug, Clone)]
pub struct SegmentInfo {
    pub cut: Intersection,
    pub side: Side,
    pub mixed: [Form; 3],
}

/// Everything the global assembly and postprocessing need at one interface
/// point.
#[derive(Debug, Clone)]
pub struct PointDiscretization {
    pub base: [usize; 3],
    pub side: Side,
    pub forms: DerivativeForms,
    pub segments: Vec<SegmentInfo>,
    pub system: CouplingSystem,
    /// Chosen cross-derivative scheme per axis pair.
    pub schemes: [Kind; 3],
}

/// Exact 1-norm condition number of the local matrix.
pub fn estimate_condition(m: &[[f64; 6]; 6]) -> f64 {
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    dense::cond1(&flat, 6)
}

fn slot_axis_dir(slot: usize) -> (usize, i8) {
    (slot / 2, if slot % 2 == 0 { 1 } else { -1 })
}

fn singular(point: [usize; 3], what: &'static str, err: LocalSolveError) -> Error {
    let cond = match err {
        LocalSolveError::IllConditioned(c) => c,
        LocalSolveError::Singular => f64::INFINITY,
        LocalSolveError::ResidualTooLarge(r) => r,
    };
    Error::SingularLocal { point, what, cond }
}

/// Row for a same-side neighbor: u_nb - u_i = s h u_k + h^2/2 u_kk.
fn taylor_row(axis: usize, dir: i8, h: f64) -> ([f64; 6], Form) {
    let mut row = [0.0; 6];
    row[axis] = dir as f64 * h;
    row[3 + axis] = 0.5 * h * h;
    let mut off = [0i32; 3];
    off[axis] = dir as i32;
    let mut rhs = Form::sym(Sym::grid(off));
    rhs.add_term(Sym::grid([0, 0, 0]), -1.0);
    (row, rhs)
}

/// Row for a neighbor across the interface. Expanding both one-sided Taylor
/// series at the crossing and eliminating the far side with the jumps gives
///
///   u_nb - u_i = z tau + z s b h [u_k] + z (b h)^2/2 [u_kk]
///                + s h u_k + h^2/2 u_kk
///
/// with z = +1 when the base point is on the minus side, b the fraction of
/// the step beyond the crossing. The bracketed jumps are grid/derivative
/// forms from the crossing's jump system; their derivative coefficients move
/// into the matrix row and the rest stays on the right-hand side.
fn interface_row(
    ctx: &SegmentContext,
    geom: &SurfaceGeometry,
    jd: &JumpData,
    sol: &JumpSolution,
    raw_mixed: &[Form; 3],
) -> ([f64; 6], Form) {
    let k = ctx.axis;
    let s = ctx.dir as f64;
    let h = ctx.h;
    let beta = 1.0 - ctx.alpha;
    let zeta = -ctx.side.signum();
    let fdj = sol.resolve_mixed(&first_derivative_jump(ctx, geom, jd, raw_mixed));
    let d2j = &sol.forms[k];

    let mut off = [0i32; 3];
    off[k] = ctx.dir as i32;
    let mut rhs = Form::sym(Sym::grid(off));
    rhs.add_term(Sym::grid([0, 0, 0]), -1.0);
    rhs.add_const(-zeta * jd.tau);
    rhs.add_scaled(&fdj, -zeta * s * beta * h);
    rhs.add_scaled(d2j, -zeta * 0.5 * beta * beta * h * h);

    let mut row = [0.0; 6];
    row[k] = s * h;
    row[3 + k] = 0.5 * h * h;
    let zero = Form::zero();
    for j in 0..3 {
        row[j] -= rhs.coeff(Sym::D1(j as u8));
        row[3 + j] -= rhs.coeff(Sym::D2(j as u8));
        rhs.substitute(Sym::D1(j as u8), &zero);
        rhs.substitute(Sym::D2(j as u8), &zero);
    }
    (row, rhs)
}

/// Scheme-independent data for one crossing: its location, frame, jump data,
/// and the surface-relation matrix there.
struct SegmentPrep {
    slot: usize,
    ctx: SegmentContext,
    cut: Intersection,
    jd: JumpData,
    g: [[f64; 6]; 6],
}

struct PointSetup<'a> {
    env: PointEnv<'a>,
    side: Side,
    choices: [Choice; 3],
    preps: Vec<SegmentPrep>,
}

fn prepare<'a>(
    grid: &'a Grid,
    signs: &'a SignField,
    surface: &dyn Surface,
    data: &InterfaceData,
    base: [usize; 3],
) -> Result<PointSetup<'a>> {
    let env = PointEnv::new(grid, signs, base);
    let side = Side::from_sign(env.base_sign);
    let h = grid.h;
    let choices = [
        select(&env, 0, 1, h)?,
        select(&env, 0, 2, h)?,
        select(&env, 1, 2, h)?,
    ];
    let mut preps = Vec::new();
    for slot in 0..6 {
        let (axis, dir) = slot_axis_dir(slot);
        if let Some(cut) = find_intersection(grid, signs, surface, base, axis, dir)? {
            let jd = data.eval_at(cut.point, &cut.geom);
            let g = assemble_g(&cut.geom);
            let ctx = SegmentContext {
                axis,
                dir,
                alpha: cut.alpha,
                h,
                side,
            };
            preps.push(SegmentPrep {
                slot,
                ctx,
                cut,
                jd,
                g,
            });
        }
    }
    Ok(PointSetup {
        env,
        side,
        choices,
        preps,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum TiePick {
    Corner,
    Fda,
}

fn pick_schemes(choices: &[Choice; 3], pick: TiePick) -> [&Scheme; 3] {
    fn one(c: &Choice, pick: TiePick) -> &Scheme {
        match c {
            Choice::Single(s) => s,
            Choice::CornerOrFda { corner, fda } => match pick {
                TiePick::Corner => corner,
                TiePick::Fda => fda,
            },
        }
    }
    [
        one(&choices[0], pick),
        one(&choices[1], pick),
        one(&choices[2], pick),
    ]
}

fn build_candidate(
    setup: &PointSetup,
    schemes: [&Scheme; 3],
) -> Result<PointDiscretization> {
    let h = setup.env.grid.h;
    let base = setup.env.base;
    let raw: [Form; 3] = [
        schemes[0].form.clone(),
        schemes[1].form.clone(),
        schemes[2].form.clone(),
    ];
    let mut matrix = [[0.0; 6]; 6];
    let mut rhs: Vec<Form> = Vec::with_capacity(6);
    for slot in 0..6 {
        let (axis, dir) = slot_axis_dir(slot);
        let (row, r) = taylor_row(axis, dir, h);
        matrix[slot] = row;
        rhs.push(r);
    }
    let mut sols: Vec<JumpSolution> = Vec::with_capacity(setup.preps.len());
    for prep in &setup.preps {
        let g_rhs = assemble_jump_rhs(&prep.ctx, &prep.cut.geom, &prep.jd, &raw);
        let sol =
            solve_jumps_checked(&prep.g, &g_rhs).map_err(|e| singular(base, "jump system", e))?;
        let (row, r) = interface_row(&prep.ctx, &prep.cut.geom, &prep.jd, &sol, &raw);
        matrix[prep.slot] = row;
        rhs[prep.slot] = r;
        sols.push(sol);
    }
    let cond = estimate_condition(&matrix);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::SingularLocal {
            point: base,
            what: "coupling matrix",
            cond,
        });
    }
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let solved =
        solve_linear_forms(&flat, &rhs).map_err(|e| singular(base, "coupling matrix", e))?;
    let d1: [Form; 3] = [solved[0].clone(), solved[1].clone(), solved[2].clone()];
    let d2: [Form; 3] = [solved[3].clone(), solved[4].clone(), solved[5].clone()];

    let mut segments = Vec::with_capacity(setup.preps.len());
    for (prep, sol) in setup.preps.iter().zip(&sols) {
        let mut fin = [Form::zero(), Form::zero(), Form::zero()];
        for (p, slot) in fin.iter_mut().enumerate() {
            let mut f = sol.resolve_mixed(&raw[p]);
            for j in 0..3 {
                f.substitute(Sym::D1(j as u8), &d1[j]);
                f.substitute(Sym::D2(j as u8), &d2[j]);
            }
            *slot = f;
        }
        segments.push(SegmentInfo {
            cut: prep.cut.clone(),
            side: setup.side,
            mixed: fin,
        });
    }
    let mixed = segments
        .first()
        .expect("interface point has at least one crossing")
        .mixed
        .clone();
    let rhs: [Form; 6] = rhs.try_into().expect("six rows");
    Ok(PointDiscretization {
        base,
        side: setup.side,
        forms: DerivativeForms { d1, d2, mixed },
        segments,
        system: CouplingSystem { matrix, rhs, cond },
        schemes: [schemes[0].kind, schemes[1].kind, schemes[2].kind],
    })
}

fn solve_jumps_checked(
    g: &[[f64; 6]; 6],
    rhs: &[Form; 6],
) -> std::result::Result<JumpSolution, LocalSolveError> {
    crate::jumps::solve_jumps(g, rhs)
}

/// Builds the derivative expansions at one interface point. When cross-
/// derivative selection ends in the corner/derivative-assisted tie, both
/// variants are assembled and the one with the smaller local condition number
/// wins; if one variant fails to assemble the other is used.
pub fn discretize_point(
    grid: &Grid,
    signs: &SignField,
    surface: &dyn Surface,
    data: &InterfaceData,
    base: [usize; 3],
) -> Result<PointDiscretization> {
    let setup = prepare(grid, signs, surface, data, base)?;
    let tie = setup
        .choices
        .iter()
        .any(|c| matches!(c, Choice::CornerOrFda { .. }));
    if !tie {
        return build_candidate(&setup, pick_schemes(&setup.choices, TiePick::Corner));
    }
    let corner = build_candidate(&setup, pick_schemes(&setup.choices, TiePick::Corner));
    let fda = build_candidate(&setup, pick_schemes(&setup.choices, TiePick::Fda));
    match (corner, fda) {
        (Ok(c), Ok(f)) => Ok(if f.system.cond < c.system.cond { f } else { c }),
        (Ok(c), Err(_)) => Ok(c),
        (Err(_), Ok(f)) => Ok(f),
        (Err(e), Err(_)) => Err(e),
    }
}

fn add_form(acc: &mut BTreeMap<[i32; 3], f64>, rhs: &mut f64, form: &Form, w: f64) {
    for &(s, c) in form.terms() {
        match s {
            Sym::Grid(a, b, g) => {
                *acc.entry([a as i32, b as i32, g as i32]).or_insert(0.0) += w * c
            }
            _ => unreachable!("finalized forms reference grid values only"),
        }
    }
    *rhs -= w * form.constant;
}

/// One row of the global linear system, as sorted (column, value) pairs plus
/// the right-hand side. Boundary points carry the Dirichlet value through an
/// identity row; interior points reduce to the standard 7-point stencil;
/// interface points consume the coupled derivative expansions.
pub fn assemble_pde_row(
    grid: &Grid,
    signs: &SignField,
    data: &InterfaceData,
    boundary: &dyn Fn(V3) -> f64,
    point: [usize; 3],
    disc: Option<&PointDiscretization>,
) -> (Vec<(usize, f64)>, f64) {
    let x = grid.coord(point);
    if grid.is_boundary(point) {
        return (vec![(grid.index(point), 1.0)], boundary(x));
    }
    let side = Side::from_sign(signs.sign_at(grid, point));
    let eps = (data.eps)(x, side);
    let ge = (data.grad_eps)(x, side);
    let a = (data.a)(x, side);
    let h = grid.h;
    let mut rhs = (data.f)(x, side);
    let mut acc: BTreeMap<[i32; 3], f64> = BTreeMap::new();
    match disc {
        None => {
            // -eps lap u - grad eps . grad u + a u
            for axis in 0..3 {
                let mut off = [0i32; 3];
                off[axis] = 1;
                *acc.entry(off).or_insert(0.0) += -eps / (h * h) - ge[axis] / (2.0 * h);
                off[axis] = -1;
                *acc.entry(off).or_insert(0.0) += -eps / (h * h) + ge[axis] / (2.0 * h);
                *acc.entry([0, 0, 0]).or_insert(0.0) += 2.0 * eps / (h * h);
            }
            *acc.entry([0, 0, 0]).or_insert(0.0) += a;
        }
        Some(d) => {
            for axis in 0..3 {
                add_form(&mut acc, &mut rhs, &d.forms.d1[axis], -ge[axis]);
                add_form(&mut acc, &mut rhs, &d.forms.d2[axis], -eps);
            }
            *acc.entry([0, 0, 0]).or_insert(0.0) += a;
        }
    }
    let mut cols: Vec<(usize, f64)> = acc
        .into_iter()
        .filter(|&(_, v)| v != 0.0)
        .map(|(off, v)| {
            let m = grid.offset(point, off).expect("stencil stays inside the grid");
            (grid.index(m), v)
        })
        .collect();
    cols.sort_unstable_by_key(|e| e.0);
    (cols, rhs)
}
