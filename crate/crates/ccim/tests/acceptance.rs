//! End-to-end acceptance checks for the solver, the local discretizations,
//! and the evolution driver. Each numbered check prints one PASS/FAIL line
//! (run with `--nocapture` to see them as they complete); the test fails if
//! any check fails.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ccim::affine::{Form, Sym};
use ccim::dense::Lu;
use ccim::evolve::{run_expanding_sphere, EvolveOptions};
use ccim::jumps::assemble_g;
use ccim::levelset::catalog::by_name;
use ccim::levelset::pqr::parse_pqr;
use ccim::levelset::{Surface, SurfaceGeometry};
use ccim::mixed::{
    biased_form, central_form, corner_form, first_deriv_assisted_form, second_deriv_assisted_form,
};
use ccim::postproc::{error_report, fit_slope};
use ccim::problems::{manufactured, molecule_problem, preset, Coefficients, ExactSolution, Problem};
use ccim::system::{assemble, solve_problem};
use ccim::vec3::{cross, norm, scale, sub, V3};
use ccim::Side;

const TOL: f64 = 1e-9;
const MAX_ITER: usize = 10_000;

type Check = (usize, &'static str, fn() -> Result<String, String>);

#[test]
fn acceptance() {
    let checks: [Check; 10] = [
        (1, "second-order convergence on smooth surfaces", smooth_surface_convergence),
        (2, "error ratio on eight-ball and banana surfaces", hard_surface_error_ratio),
        (3, "second-order convergence with a reaction term", reaction_term_convergence),
        (4, "piecewise-quadratic solutions are reproduced", quadratic_exactness),
        (5, "second-derivative jump system has unit determinant", jump_system_determinant),
        (6, "no interface reduces to the 7-point stencil", interior_reduction),
        (7, "expanding-sphere radii converge to the front ODE", expanding_sphere_convergence),
        (8, "solver iterations grow mildly with resolution", solver_iteration_scaling),
        (9, "molecular surface run completes cleanly", molecular_smoke_test),
        (10, "cross-derivative schemes match their stated orders", scheme_order_battery),
    ];
    let mut failures = Vec::new();
    for (idx, name, f) in checks {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {idx} ({name}): PASS [{detail}]"),
            Ok(Err(detail)) => {
                println!("criterion {idx} ({name}): FAIL [{detail}]");
                failures.push(idx);
            }
            Err(_) => {
                println!("criterion {idx} ({name}): FAIL [panicked]");
                failures.push(idx);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

fn catalog_problem(surface: &str, preset_name: &str) -> Problem {
    let s: Arc<dyn Surface> = Arc::from(by_name(surface, 0.5).unwrap());
    preset(preset_name, s).unwrap()
}

/// Solves one case and returns (solution sup error, interface gradient sup error, iterations).
fn solve_errors(problem: &Problem, n: usize) -> Result<(f64, f64, usize), String> {
    let sol = solve_problem(problem, n, TOL, MAX_ITER)
        .map_err(|e| format!("N = {n}: {e}"))?;
    if !sol.report.converged || !(sol.report.residual <= TOL) {
        return Err(format!(
            "N = {n}: solver residual {:.3e} above {TOL:.0e}",
            sol.report.residual
        ));
    }
    let rep = error_report(problem, &sol);
    Ok((rep.err_u_inf, rep.err_grad_inf, sol.report.iterations))
}

fn sweep_slopes(
    surface: &str,
    preset_name: &str,
    ns: &[usize],
) -> Result<(f64, f64), String> {
    let problem = catalog_problem(surface, preset_name);
    let mut u_pts = Vec::new();
    let mut g_pts = Vec::new();
    for &n in ns {
        let (eu, eg, _) = solve_errors(&problem, n)?;
        u_pts.push((n as f64, eu));
        g_pts.push((n as f64, eg));
    }
    let su = fit_slope(&u_pts).map_err(|e| e.to_string())?;
    let sg = fit_slope(&g_pts).map_err(|e| e.to_string())?;
    Ok((su, sg))
}

fn smooth_surface_convergence() -> Result<String, String> {
    let ns = [20, 30, 40, 60, 80];
    let mut detail = String::new();
    for surface in ["ellipsoid", "donut", "peanut"] {
        let (su, sg) = sweep_slopes(surface, "example1", &ns)?;
        if !(su <= -1.8) {
            return Err(format!("{surface}: solution slope {su:.2} above -1.8"));
        }
        if !(sg <= -1.6) {
            return Err(format!("{surface}: gradient slope {sg:.2} above -1.6"));
        }
        detail.push_str(&format!("{surface} u:{su:.2} grad:{sg:.2} "));
    }
    Ok(detail.trim_end().to_string())
}

fn hard_surface_error_ratio() -> Result<String, String> {
    let mut detail = String::new();
    for surface in ["eight_balls", "banana"] {
        let problem = catalog_problem(surface, "example1");
        let (e40, _, _) = solve_errors(&problem, 40)?;
        let (e80, _, _) = solve_errors(&problem, 80)?;
        let ratio = e40 / e80;
        if !(ratio >= 3.2) {
            return Err(format!("{surface}: err(40)/err(80) = {ratio:.2} below 3.2"));
        }
        detail.push_str(&format!("{surface} ratio:{ratio:.2} "));
    }
    Ok(detail.trim_end().to_string())
}

fn reaction_term_convergence() -> Result<String, String> {
    let (su, sg) = sweep_slopes("ellipsoid", "example3", &[20, 30, 40, 60, 80])?;
    if !(su <= -1.8) {
        return Err(format!("solution slope {su:.2} above -1.8"));
    }
    if !(sg <= -1.6) {
        return Err(format!("gradient slope {sg:.2} above -1.6"));
    }
    Ok(format!("u:{su:.2} grad:{sg:.2}"))
}

fn quadratic_exactness() -> Result<String, String> {
    let problem = catalog_problem("sphere", "quadratic_oracle");
    let (eu, eg, _) = solve_errors(&problem, 20)?;
    if !(eu <= 1e-7) {
        return Err(format!("solution error {eu:.3e} above 1e-7"));
    }
    if !(eg <= 1e-6) {
        return Err(format!("gradient error {eg:.3e} above 1e-6"));
    }
    Ok(format!("err_u:{eu:.1e} err_grad:{eg:.1e}"))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> V3 {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let m = norm(v);
        if m > 1e-2 && m <= 1.0 {
            return scale(v, 1.0 / m);
        }
    }
}

fn jump_system_determinant() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = unit_vector(&mut rng);
        let t1 = loop {
            let w = unit_vector(&mut rng);
            let dot = w[0] * n[0] + w[1] * n[1] + w[2] * n[2];
            let t = sub(w, scale(n, dot));
            let m = norm(t);
            if m > 1e-3 {
                break scale(t, 1.0 / m);
            }
        };
        let mut t2 = cross(n, t1);
        if rng.gen_bool(0.5) {
            t2 = scale(t2, -1.0);
        }
        let geom = SurfaceGeometry {
            normal: n,
            tangents: [t1, t2],
            jac: [[0.0; 3]; 3],
        };
        let g = assemble_g(&geom);
        let flat: Vec<f64> = g.iter().flatten().copied().collect();
        let det = Lu::factor(&flat, 6)
            .ok_or_else(|| format!("singular jump system for normal {n:?}"))?
            .det();
        worst = worst.max((det.abs() - 1.0).abs());
    }
    if !(worst <= 1e-10) {
        return Err(format!("max |det - 1| = {worst:.3e} above 1e-10"));
    }
    Ok(format!("max |det - 1| = {worst:.1e} over 1000 frames"))
}

fn smooth_poisson_problem() -> Problem {
    // A surface whose zero set lies far outside the box: no interface.
    let surface: Arc<dyn Surface> = Arc::from(by_name("sphere", 5.0).unwrap());
    let exact = ExactSolution {
        u: Arc::new(|x: V3, _: Side| (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()),
        grad: Arc::new(|x: V3, _: Side| {
            let (sx, cx) = (PI * x[0]).sin_cos();
            let (sy, cy) = (PI * x[1]).sin_cos();
            let (sz, cz) = (PI * x[2]).sin_cos();
            [PI * cx * sy * sz, PI * sx * cy * sz, PI * sx * sy * cz]
        }),
        hess: Arc::new(|x: V3, _: Side| {
            let (sx, cx) = (PI * x[0]).sin_cos();
            let (sy, cy) = (PI * x[1]).sin_cos();
            let (sz, cz) = (PI * x[2]).sin_cos();
            let p2 = PI * PI;
            [
                [-p2 * sx * sy * sz, p2 * cx * cy * sz, p2 * cx * sy * cz],
                [p2 * cx * cy * sz, -p2 * sx * sy * sz, p2 * sx * cy * cz],
                [p2 * cx * sy * cz, p2 * sx * cy * cz, -p2 * sx * sy * sz],
            ]
        }),
    };
    manufactured(
        surface,
        exact,
        Coefficients::piecewise_constant(1.0, 1.0),
        "poisson",
    )
}

fn interior_reduction() -> Result<String, String> {
    // Part 1: with no interface, unit diffusion, and no reaction, every
    // assembled row must equal the standard 7-point stencil bitwise.
    let problem = smooth_poisson_problem();
    let n = 8;
    let asm = assemble(&problem, n).map_err(|e| e.to_string())?;
    if !asm.interface.is_empty() {
        return Err(format!("{} unexpected interface points", asm.interface.len()));
    }
    let grid = asm.grid;
    let h = grid.h;
    let eps = 1.0;
    let ge = 0.0;
    let a = 0.0;
    // Same arithmetic as the assembler: center accumulated per axis, then +a.
    let off_plus = -eps / (h * h) - ge / (2.0 * h);
    let off_minus = -eps / (h * h) + ge / (2.0 * h);
    let mut center = 0.0;
    for _ in 0..3 {
        center += 2.0 * eps / (h * h);
    }
    center += a;
    for lin in 0..grid.num_points() {
        let m = grid.multi(lin);
        let (cols, vals) = asm.matrix.row(lin);
        if grid.is_boundary(m) {
            if cols.len() != 1 || cols[0] != lin || vals[0].to_bits() != 1.0f64.to_bits() {
                return Err(format!("boundary row {m:?} is not an identity row"));
            }
            continue;
        }
        let expected = [
            (grid.index([m[0], m[1], m[2] - 1]), off_minus),
            (grid.index([m[0], m[1] - 1, m[2]]), off_minus),
            (grid.index([m[0] - 1, m[1], m[2]]), off_minus),
            (lin, center),
            (grid.index([m[0] + 1, m[1], m[2]]), off_plus),
            (grid.index([m[0], m[1] + 1, m[2]]), off_plus),
            (grid.index([m[0], m[1], m[2] + 1]), off_plus),
        ];
        if cols.len() != 7 {
            return Err(format!("row {m:?} has {} entries, want 7", cols.len()));
        }
        for (k, &(ec, ev)) in expected.iter().enumerate() {
            if cols[k] != ec || vals[k].to_bits() != ev.to_bits() {
                return Err(format!(
                    "row {m:?} entry {k}: ({}, {:.17e}) vs expected ({ec}, {ev:.17e})",
                    cols[k], vals[k]
                ));
            }
        }
    }

    // Part 2: the same setup converges at second order on a smooth solution.
    let mut pts = Vec::new();
    for n in [20, 40, 80] {
        let (eu, _, _) = solve_errors(&problem, n)?;
        pts.push((n as f64, eu));
    }
    let slope = fit_slope(&pts).map_err(|e| e.to_string())?;
    if !(slope <= -1.9) {
        return Err(format!("smooth-solve slope {slope:.2} above -1.9"));
    }
    Ok(format!("rows bitwise 7-point, smooth slope {slope:.2}"))
}

fn expanding_sphere_convergence() -> Result<String, String> {
    let mut pts = Vec::new();
    let mut detail = String::new();
    for n in [20usize, 30, 40] {
        let opts = EvolveOptions {
            // dt proportional to h^2 keeps the first-order time error below
            // the second-order spatial error across the sweep.
            cfl: 0.2 * 20.0 / n as f64,
            tol: TOL,
            max_iter: MAX_ITER,
            reinit_every: 0,
        };
        let report = run_expanding_sphere(n, 0.1, &opts).map_err(|e| e.to_string())?;
        pts.push((n as f64, report.rmse));
        detail.push_str(&format!("N{n}:{:.2e} ", report.rmse));
    }
    let slope = fit_slope(&pts).map_err(|e| e.to_string())?;
    if !(slope <= -1.7) {
        return Err(format!("radius RMSE slope {slope:.2} above -1.7"));
    }
    Ok(format!("{detail}slope {slope:.2}"))
}

fn solver_iteration_scaling() -> Result<String, String> {
    let problem = catalog_problem("ellipsoid", "example1");
    let mut pts = Vec::new();
    let mut detail = String::new();
    for n in [40usize, 60, 80, 100] {
        let (_, _, iters) = solve_errors(&problem, n)?;
        pts.push((n as f64, iters as f64));
        detail.push_str(&format!("N{n}:{iters} "));
    }
    let slope = fit_slope(&pts).map_err(|e| e.to_string())?;
    if !(0.6..=1.5).contains(&slope) {
        return Err(format!("iteration slope {slope:.2} outside [0.6, 1.5]"));
    }
    Ok(format!("{detail}slope {slope:.2}"))
}

fn molecular_smoke_test() -> Result<String, String> {
    let path = std::path::Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/globular486.pqr"
    ));
    let atoms = parse_pqr(path).map_err(|e| e.to_string())?;
    if atoms.len() != 486 {
        return Err(format!("parsed {} atoms, want 486", atoms.len()));
    }
    let problem = molecule_problem(path, 0.25, 1.0 / 40.0, 0.2).map_err(|e| e.to_string())?;
    let n = 80;
    let sol = solve_problem(&problem, n, TOL, MAX_ITER).map_err(|e| e.to_string())?;
    let scheme_total: usize = sol.assembly.scheme_counts.values().sum();
    if scheme_total != 3 * sol.assembly.interface.len() {
        return Err(format!(
            "{} scheme picks for {} interface points",
            scheme_total,
            sol.assembly.interface.len()
        ));
    }
    if !sol.report.converged {
        return Err(format!(
            "solver stopped at residual {:.3e}",
            sol.report.residual
        ));
    }
    let rep = error_report(&problem, &sol);
    if !rep.err_u_inf.is_finite() || !rep.err_grad_inf.is_finite() {
        return Err("non-finite error".into());
    }
    Ok(format!(
        "{} atoms, {} interface points, err_u {:.2e}",
        atoms.len(),
        sol.assembly.interface.len(),
        rep.err_u_inf
    ))
}

/// Evaluates a stencil form on u(x) = exp(0.5x - 0.4y + 0.3z), supplying
/// exact first and principal second derivatives for the assisted schemes.
/// `shift` moves every grid offset, emulating same-side shifted stencils.
fn eval_form(form: &Form, x0: V3, h: f64, shift: [i32; 3]) -> f64 {
    let w = [0.5, -0.4, 0.3];
    let u = |x: V3| (w[0] * x[0] + w[1] * x[1] + w[2] * x[2]).exp();
    form.evaluate(&|sym| match sym {
        Sym::Grid(a, b, c) => {
            let x = [
                x0[0] + h * (a as i32 + shift[0]) as f64,
                x0[1] + h * (b as i32 + shift[1]) as f64,
                x0[2] + h * (c as i32 + shift[2]) as f64,
            ];
            u(x)
        }
        Sym::D1(a) => w[a as usize] * u(x0),
        Sym::D2(a) => w[a as usize] * w[a as usize] * u(x0),
        other => panic!("unexpected symbol {other:?}"),
    })
}

fn scheme_order_battery() -> Result<String, String> {
    let x0: V3 = [0.037, -0.021, 0.053];
    let w: V3 = [0.5, -0.4, 0.3];
    let exact = w[0] * w[1] * (w[0] * x0[0] + w[1] * x0[1] + w[2] * x0[2]).exp();
    let hs = [0.1, 0.05, 0.025];
    type Build = Box<dyn Fn(f64) -> (Form, [i32; 3])>;
    let cases: [(&str, f64, Build); 7] = [
        ("central", 2.0, Box::new(|h| (central_form(0, 1, h), [0, 0, 0]))),
        ("biased", 1.0, Box::new(|h| (biased_form(0, 1, 1, h), [0, 0, 0]))),
        ("corner", 1.0, Box::new(|h| (corner_form(0, 1, 1, -1, h), [0, 0, 0]))),
        (
            "first-derivative assisted",
            1.0,
            Box::new(|h| (first_deriv_assisted_form(0, 1, 1, h), [0, 0, 0])),
        ),
        (
            "second-derivative assisted",
            1.0,
            Box::new(|h| (second_deriv_assisted_form(0, 1, 1, -1, h), [0, 0, 0])),
        ),
        (
            "in-plane shift",
            1.0,
            Box::new(|h| (central_form(0, 1, h), [1, 0, 0])),
        ),
        (
            "out-of-plane shift",
            1.0,
            Box::new(|h| (central_form(0, 1, h), [0, 0, 1])),
        ),
    ];
    let mut detail = String::new();
    for (name, nominal, build) in &cases {
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let (form, shift) = build(h);
                (eval_form(&form, x0, h, shift) - exact).abs()
            })
            .collect();
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            if (order - nominal).abs() > 0.2 {
                return Err(format!(
                    "{name}: observed order {order:.2} vs nominal {nominal}"
                ));
            }
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        detail.push_str(&format!("{name}:{order:.2} "));
    }
    Ok(detail.trim_end().to_string())
}
