//! Jump relations at an interface crossing.
//!
//! The interface conditions [u] = tau and [eps grad u . n] = sigma, together
//! with the PDE itself, are differentiated along the surface at a crossing
//! point. This yields a small linear system whose unknowns are the jumps of
//! all second derivatives. Grid-side quantities are expanded as affine forms
//! over nodal values and the base point's derivatives, so the solved jumps are
//! forms too, ready for substitution into the coupling rows.

use crate::affine::{solve_linear_forms, Form, LocalSolveError, Sym};
use crate::levelset::SurfaceGeometry;
use crate::vec3::{dot, matvec, quad_form, M3, V3};
use crate::Side;

type PointFn<T> = Box<dyn Fn(V3) -> T + Send + Sync>;
type GeomFn<T> = Box<dyn Fn(V3, &SurfaceGeometry) -> T + Send + Sync>;
type SideFn<T> = Box<dyn Fn(V3, Side) -> T + Send + Sync>;

/// Analytic problem data on and around the interface. The tangential
/// derivatives of tau and sigma are supplied as ambient gradients of any
/// smooth extension; only their components along the surface frame are used.
pub struct InterfaceData {
    pub tau: PointFn<f64>,
    pub grad_tau: PointFn<V3>,
    pub hess_tau: PointFn<M3>,
    pub sigma: GeomFn<f64>,
    pub grad_sigma: GeomFn<V3>,
    pub eps: SideFn<f64>,
    pub grad_eps: SideFn<V3>,
    pub a: SideFn<f64>,
    pub f: SideFn<f64>,
}

/// All interface data evaluated at one crossing point.
#[derive(Debug, Clone)]
pub struct JumpData {
    pub tau: f64,
    pub grad_tau: V3,
    pub hess_tau: M3,
    pub sigma: f64,
    pub grad_sigma: V3,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub grad_eps_minus: V3,
    pub grad_eps_plus: V3,
    pub a_minus: f64,
    pub a_plus: f64,
    pub f_minus: f64,
    pub f_plus: f64,
}

impl InterfaceData {
    pub fn eval_at(&self, x: V3, geom: &SurfaceGeometry) -> JumpData {
        let jd = JumpData {
            tau: (self.tau)(x),
            grad_tau: (self.grad_tau)(x),
            hess_tau: (self.hess_tau)(x),
            sigma: (self.sigma)(x, geom),
            grad_sigma: (self.grad_sigma)(x, geom),
            eps_minus: (self.eps)(x, Side::Minus),
            eps_plus: (self.eps)(x, Side::Plus),
            grad_eps_minus: (self.grad_eps)(x, Side::Minus),
            grad_eps_plus: (self.grad_eps)(x, Side::Plus),
            a_minus: (self.a)(x, Side::Minus),
            a_plus: (self.a)(x, Side::Plus),
            f_minus: (self.f)(x, Side::Minus),
            f_plus: (self.f)(x, Side::Plus),
        };
        debug_assert!(jd.eps_minus > 0.0 && jd.eps_plus > 0.0);
        jd
    }
}

impl JumpData {
    pub fn eps(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.eps_minus,
            Side::Plus => self.eps_plus,
        }
    }

    pub fn grad_eps(&self, side: Side) -> V3 {
        match side {
            Side::Minus => self.grad_eps_minus,
            Side::Plus => self.grad_eps_plus,
        }
    }

    pub fn a(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.a_minus,
            Side::Plus => self.a_plus,
        }
    }

    pub fn f(&self, side: Side) -> f64 {
        match side {
            Side::Minus => self.f_minus,
            Side::Plus => self.f_plus,
        }
    }

    /// eps_plus - eps_minus; jumps are always plus minus minus.
    pub fn jump_eps(&self) -> f64 {
        self.eps_plus - self.eps_minus
    }
}

/// The unordered axis pairs in storage order.
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Index of the unordered axis pair {k, l}: (0,1) -> 0, (0,2) -> 1, (1,2) -> 2.
pub fn pair_index(k: usize, l: usize) -> usize {
    debug_assert!(k != l && k < 3 && l < 3);
    k.min(l) + k.max(l) - 1
}

/// Position of [d2u/dx_k dx_l] among the unknowns of the local system: pure
/// second derivatives first, then the mixed pairs in `PAIRS` order.
pub fn jump_index(k: usize, l: usize) -> usize {
    if k == l {
        k
    } else {
        3 + pair_index(k, l)
    }
}

// Coefficients of va^T [Hess u] vb over the jump unknowns, written for a
// general dimension d: diagonal entries first, then pairs (i, j), i < j, in
// lexicographic order. The 3D public interface fixes d = 3.
fn quad_coeffs_d(d: usize, va: &[f64], vb: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; d * (d + 1) / 2];
    for i in 0..d {
        c[i] = va[i] * vb[i];
    }
    let mut idx = d;
    for i in 0..d {
        for j in i + 1..d {
            c[idx] = va[i] * vb[j] + va[j] * vb[i];
            idx += 1;
        }
    }
    c
}

fn assemble_g_d(d: usize, normal: &[f64], tangents: &[&[f64]]) -> Vec<Vec<f64>> {
    debug_assert_eq!(tangents.len(), d - 1);
    let mut g = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d - 1 {
        for b in a..d - 1 {
            g.push(quad_coeffs_d(d, tangents[a], tangents[b]));
        }
    }
    for m in 0..d - 1 {
        g.push(quad_coeffs_d(d, tangents[m], normal));
    }
    let mut lap = vec![0.0; d * (d + 1) / 2];
    lap[..d].fill(1.0);
    g.push(lap);
    g
}

/// Matrix of the local system for second-derivative jumps.
///
/// Rows: tangential-tangential pairs (0,0), (0,1), (1,1), then the two flux
/// rows (tangent against normal), then the Laplacian jump row. Columns follow
/// `jump_index`. For any orthonormal frame |det| = 1.
pub fn assemble_g(geom: &SurfaceGeometry) -> [[f64; 6]; 6] {
    let t = &geom.tangents;
    let rows = assemble_g_d(3, &geom.normal, &[&t[0], &t[1]]);
    let mut g = [[0.0; 6]; 6];
    for (r, row) in rows.iter().enumerate() {
        g[r].copy_from_slice(row);
    }
    g
}

/// One crossing viewed from its base grid point: crossing axis, step
/// direction, fraction alpha of the step, spacing, and the side the base point
/// lies on. Carries the Taylor expansions from the base point to the crossing.
#[derive(Debug, Clone, Copy)]
pub struct SegmentContext {
    pub axis: usize,
    pub dir: i8,
    pub alpha: f64,
    pub h: f64,
    pub side: Side,
}

impl SegmentContext {
    /// u on the grid side at the crossing:
    /// u_i + s a h du/dx_k + (a h)^2/2 d2u/dx_k^2 along the crossing axis k.
    pub fn u_form(&self) -> Form {
        let ah = self.alpha * self.h;
        let mut f = Form::sym(Sym::grid([0, 0, 0]));
        f.add_term(Sym::D1(self.axis as u8), self.dir as f64 * ah);
        f.add_term(Sym::D2(self.axis as u8), 0.5 * ah * ah);
        f
    }

    /// Component j of grad u on the grid side at the crossing. The per-pair
    /// `mixed` forms supply the off-axis second derivative.
    pub fn grad_form(&self, j: usize, mixed: &[Form; 3]) -> Form {
        let sah = self.dir as f64 * self.alpha * self.h;
        let mut f = Form::sym(Sym::D1(j as u8));
        if j == self.axis {
            f.add_term(Sym::D2(j as u8), sah);
        } else {
            f.add_scaled(&mixed[pair_index(j, self.axis)], sah);
        }
        f
    }

    /// Entry (j, l) of the Hessian of u on the grid side at the crossing, to
    /// leading order the base point's value.
    pub fn hess_form(&self, j: usize, l: usize, mixed: &[Form; 3]) -> Form {
        if j == l {
            Form::sym(Sym::D2(j as u8))
        } else {
            mixed[pair_index(j, l)].clone()
        }
    }

    /// grad u . n on the grid side at the crossing.
    pub fn grad_dot_normal(&self, normal: V3, mixed: &[Form; 3]) -> Form {
        let mut f = Form::zero();
        for j in 0..3 {
            f.add_scaled(&self.grad_form(j, mixed), normal[j]);
        }
        f
    }

    /// Jump of the normal derivative,
    /// [grad u . n] = (sigma - [eps] grad u . n |_grid) / eps_far.
    pub fn normal_jump_form(
        &self,
        geom: &SurfaceGeometry,
        jd: &JumpData,
        mixed: &[Form; 3],
    ) -> Form {
        let e_far = jd.eps(self.side.other());
        let mut f = self.grad_dot_normal(geom.normal, mixed);
        f.scale(-jd.jump_eps() / e_far);
        f.add_const(jd.sigma / e_far);
        f
    }
}

/// Jump of du/dx_k for the crossing axis k: the normal component scaled by
/// n_k plus the tangential derivatives of tau.
pub fn first_derivative_jump(
    ctx: &SegmentContext,
    geom: &SurfaceGeometry,
    jd: &JumpData,
    mixed: &[Form; 3],
) -> Form {
    let k = ctx.axis;
    let mut f = ctx.normal_jump_form(geom, jd, mixed);
    f.scale(geom.normal[k]);
    for t in &geom.tangents {
        f.add_const(dot(jd.grad_tau, *t) * t[k]);
    }
    f
}

/// Right-hand sides of the local jump system, in the row order of
/// `assemble_g`.
///
/// The tangential rows differentiate [u] = tau twice along the surface, the
/// flux rows differentiate [eps grad u . n] = sigma once, and the last row
/// subtracts the PDE across the interface. Rows may carry MixedJump symbols
/// when a cross-interface mixed scheme is in `mixed`; `solve_jumps` moves
/// those back into the matrix.
pub fn assemble_jump_rhs(
    ctx: &SegmentContext,
    geom: &SurfaceGeometry,
    jd: &JumpData,
    mixed: &[Form; 3],
) -> [Form; 6] {
    let far = ctx.side.other();
    let e_far = jd.eps(far);
    let de = jd.jump_eps();
    let n = geom.normal;
    let t = &geom.tangents;
    let p = &geom.jac;

    let normal_jump = ctx.normal_jump_form(geom, jd, mixed);
    let grad_dot_n = ctx.grad_dot_normal(n, mixed);
    let grad_tau_n = dot(jd.grad_tau, n);

    let mut rows: Vec<Form> = Vec::with_capacity(6);

    // Second tangential derivatives of tau. The frame's variation enters only
    // through its normal component, s_a^T P s_b.
    for a in 0..2 {
        for b in a..2 {
            let curv = quad_form(t[a], p, t[b]);
            let mut f = normal_jump.clone();
            f.scale(curv);
            f.add_const(quad_form(t[b], &jd.hess_tau, t[a]) - grad_tau_n * curv);
            rows.push(f);
        }
    }

    // Tangential derivatives of sigma.
    for m in 0..2 {
        let pm = matvec(p, t[m]);
        let mut f = Form::constant(dot(jd.grad_sigma, t[m]) / e_far);
        for j in 0..3 {
            for l in 0..3 {
                let w = t[m][j] * n[l];
                if w != 0.0 {
                    f.add_scaled(&ctx.hess_form(j, l, mixed), -de / e_far * w);
                }
            }
        }
        for j in 0..3 {
            f.add_scaled(&ctx.grad_form(j, mixed), -de / e_far * pm[j]);
        }
        for tt in t {
            f.add_const(-dot(jd.grad_tau, *tt) * quad_form(*tt, p, t[m]));
        }
        f.add_scaled(&normal_jump, -dot(jd.grad_eps(far), t[m]) / e_far);
        let dge = [
            jd.grad_eps_plus[0] - jd.grad_eps_minus[0],
            jd.grad_eps_plus[1] - jd.grad_eps_minus[1],
            jd.grad_eps_plus[2] - jd.grad_eps_minus[2],
        ];
        f.add_scaled(&grad_dot_n, -dot(dge, t[m]) / e_far);
        rows.push(f);
    }

    // PDE subtracted across the interface, solved for [Laplacian u].
    {
        let jump_f_over_eps = jd.f_plus / jd.eps_plus - jd.f_minus / jd.eps_minus;
        let jump_a_over_eps = jd.a_plus / jd.eps_plus - jd.a_minus / jd.eps_minus;
        let ge_far = jd.grad_eps(far);
        let mut f = ctx.u_form();
        f.scale(jump_a_over_eps);
        f.add_const(-jump_f_over_eps + jd.a(far) / e_far * jd.tau);
        for tt in t {
            f.add_const(-dot(jd.grad_tau, *tt) * dot(ge_far, *tt) / e_far);
        }
        for j in 0..3 {
            let c = jd.grad_eps_plus[j] / jd.eps_plus - jd.grad_eps_minus[j] / jd.eps_minus;
            if c != 0.0 {
                f.add_scaled(&ctx.grad_form(j, mixed), -c);
            }
        }
        rows.push(f);
    }

    rows.try_into().expect("six rows")
}

/// Forms for all six second-derivative jumps, indexed by `jump_index`. Free
/// of MixedJump symbols.
#[derive(Debug, Clone)]
pub struct JumpSolution {
    pub forms: [Form; 6],
}

impl JumpSolution {
    /// Replace any MixedJump symbols in `f` by the solved jump forms.
    pub fn resolve_mixed(&self, f: &Form) -> Form {
        let mut out = f.clone();
        for &(k, l) in PAIRS.iter() {
            let s = Sym::MixedJump(k as u8, l as u8);
            if out.coeff(s) != 0.0 {
                out.substitute(s, &self.forms[jump_index(k, l)]);
            }
        }
        out
    }
}

/// Solves the local jump system. MixedJump symbols on the right-hand side are
/// the very unknowns being solved for, so their coefficients are first moved
/// into the matrix; a modified matrix that fails the conditioning or residual
/// checks is reported to the caller, which must retry with another scheme.
pub fn solve_jumps(g: &[[f64; 6]; 6], rhs: &[Form; 6]) -> Result<JumpSolution, LocalSolveError> {
    let mut m = *g;
    let mut rows: Vec<Form> = Vec::with_capacity(6);
    for (r, row) in rhs.iter().enumerate() {
        let mut f = row.clone();
        for &(k, l) in PAIRS.iter() {
            let s = Sym::MixedJump(k as u8, l as u8);
            let c = f.coeff(s);
            if c != 0.0 {
                m[r][jump_index(k, l)] -= c;
                f.substitute(s, &Form::zero());
            }
        }
        rows.push(f);
    }
    let flat: Vec<f64> = m.iter().flat_map(|r| r.iter().copied()).collect();
    let forms = solve_linear_forms(&flat, &rows)?;
    Ok(JumpSolution {
        forms: forms.try_into().expect("six unknowns"),
    })
}
