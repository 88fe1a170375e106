//! Problem definitions: piecewise exact solutions, manufactured interface
//! data derived from them, and the named presets used by the harness.

use std::sync::Arc;

use crate::jumps::InterfaceData;
use crate::levelset::molecular::MolecularSurface;
use crate::levelset::{pqr, Surface, SurfaceGeometry};
use crate::vec3::{dot, mat_t_vec, matvec, M3, V3};
use crate::{Error, Result, Side};

type SideFn<T> = Arc<dyn Fn(V3, Side) -> T + Send + Sync>;

/// A two-branch exact solution, each branch smooth across the whole box.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: SideFn<f64>,
    pub grad: SideFn<V3>,
    pub hess: SideFn<M3>,
}

/// Region-wise PDE coefficients.
#[derive(Clone)]
pub struct Coefficients {
    pub eps: SideFn<f64>,
    pub grad_eps: SideFn<V3>,
    pub a: SideFn<f64>,
}

impl Coefficients {
    pub fn piecewise_constant(eps_minus: f64, eps_plus: f64) -> Coefficients {
        Coefficients {
            eps: Arc::new(move |_, side| match side {
                Side::Minus => eps_minus,
                Side::Plus => eps_plus,
            }),
            grad_eps: Arc::new(|_, _| [0.0; 3]),
            a: Arc::new(|_, _| 0.0),
        }
    }

    pub fn with_reaction(mut self, a: SideFn<f64>) -> Coefficients {
        self.a = a;
        self
    }
}

/// A complete problem instance: the interface, the data the discretization
/// consumes, the Dirichlet boundary values, and (when known) the exact
/// solution for error reporting.
pub struct Problem {
    pub name: String,
    pub surface: Arc<dyn Surface>,
    pub data: InterfaceData,
    pub boundary: Box<dyn Fn(V3) -> f64 + Send + Sync>,
    pub exact: Option<ExactSolution>,
}

/// Derives the full interface data from an exact piecewise solution: the
/// jumps of the solution and flux with their surface derivatives, the source
/// term from the PDE itself, and boundary values from the trace of the branch
/// the boundary point lies in.
pub fn manufactured(
    surface: Arc<dyn Surface>,
    exact: ExactSolution,
    coeffs: Coefficients,
    name: &str,
) -> Problem {
    let e = exact.clone();
    let tau = Box::new(move |x| (e.u)(x, Side::Plus) - (e.u)(x, Side::Minus));
    let e = exact.clone();
    let grad_tau = Box::new(move |x| {
        let p = (e.grad)(x, Side::Plus);
        let m = (e.grad)(x, Side::Minus);
        [p[0] - m[0], p[1] - m[1], p[2] - m[2]]
    });
    let e = exact.clone();
    let hess_tau = Box::new(move |x| {
        let p = (e.hess)(x, Side::Plus);
        let m = (e.hess)(x, Side::Minus);
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = p[i][j] - m[i][j];
            }
        }
        d
    });
    let (e, c) = (exact.clone(), coeffs.clone());
    let sigma = Box::new(move |x, geom: &SurfaceGeometry| {
        (c.eps)(x, Side::Plus) * dot((e.grad)(x, Side::Plus), geom.normal)
            - (c.eps)(x, Side::Minus) * dot((e.grad)(x, Side::Minus), geom.normal)
    });
    let (e, c) = (exact.clone(), coeffs.clone());
    let grad_sigma = Box::new(move |x, geom: &SurfaceGeometry| {
        // grad(eps grad u . n) = (grad u . n) grad eps + eps (Hess u n + P^T grad u)
        let mut out = [0.0; 3];
        for (s, side) in [(1.0, Side::Plus), (-1.0, Side::Minus)] {
            let g = (e.grad)(x, side);
            let ge = (c.grad_eps)(x, side);
            let eps = (c.eps)(x, side);
            let hn = matvec(&(e.hess)(x, side), geom.normal);
            let pg = mat_t_vec(&geom.jac, g);
            let gn = dot(g, geom.normal);
            for i in 0..3 {
                out[i] += s * (gn * ge[i] + eps * (hn[i] + pg[i]));
            }
        }
        out
    });
    let (e, c) = (exact.clone(), coeffs.clone());
    let f = Box::new(move |x, side| {
        let hess = (e.hess)(x, side);
        let lap = hess[0][0] + hess[1][1] + hess[2][2];
        -(c.eps)(x, side) * lap - dot((c.grad_eps)(x, side), (e.grad)(x, side))
            + (c.a)(x, side) * (e.u)(x, side)
    });
    let (e, s) = (exact.clone(), surface.clone());
    let boundary = Box::new(move |x| {
        let side = if s.phi(x) < 0.0 { Side::Minus } else { Side::Plus };
        (e.u)(x, side)
    });

    let c = coeffs.clone();
    let eps = Box::new(move |x, side| (c.eps)(x, side));
    let c = coeffs.clone();
    let grad_eps = Box::new(move |x, side| (c.grad_eps)(x, side));
    let c = coeffs;
    let a = Box::new(move |x, side| (c.a)(x, side));

    Problem {
        name: name.to_string(),
        surface,
        data: InterfaceData {
            tau,
            grad_tau,
            hess_tau,
            sigma,
            grad_sigma,
            eps,
            grad_eps,
            a,
            f,
        },
        boundary,
        exact: Some(exact),
    }
}

/// Polynomial-plus-oscillation branches; the workhorse convergence test.
pub fn trig_poly_solution() -> ExactSolution {
    ExactSolution {
        u: Arc::new(|x, side| {
            let [x, y, z] = x;
            match side {
                Side::Plus => {
                    x * y + x.powi(4) + y.powi(4) + x * z * z
                        + (2.0 * x + y * y + z.powi(3)).cos()
                }
                Side::Minus => {
                    x.powi(3) + x * y * y + y.powi(3) + z.powi(4)
                        + (3.0 * (x * x + y * y)).sin()
                }
            }
        }),
        grad: Arc::new(|x, side| {
            let [x, y, z] = x;
            match side {
                Side::Plus => {
                    let sw = (2.0 * x + y * y + z.powi(3)).sin();
                    [
                        y + 4.0 * x.powi(3) + z * z - 2.0 * sw,
                        x + 4.0 * y.powi(3) - 2.0 * y * sw,
                        2.0 * x * z - 3.0 * z * z * sw,
                    ]
                }
                Side::Minus => {
                    let c = (3.0 * (x * x + y * y)).cos();
                    [
                        3.0 * x * x + y * y + 6.0 * x * c,
                        2.0 * x * y + 3.0 * y * y + 6.0 * y * c,
                        4.0 * z.powi(3),
                    ]
                }
            }
        }),
        hess: Arc::new(|x, side| {
            let [x, y, z] = x;
            match side {
                Side::Plus => {
                    let w = 2.0 * x + y * y + z.powi(3);
                    let (sw, cw) = w.sin_cos();
                    let xy = 1.0 - 4.0 * y * cw;
                    let xz = 2.0 * z - 6.0 * z * z * cw;
                    let yz = -6.0 * y * z * z * cw;
                    [
                        [12.0 * x * x - 4.0 * cw, xy, xz],
                        [xy, 12.0 * y * y - 2.0 * sw - 4.0 * y * y * cw, yz],
                        [xz, yz, 2.0 * x - 6.0 * z * sw - 9.0 * z.powi(4) * cw],
                    ]
                }
                Side::Minus => {
                    let w = 3.0 * (x * x + y * y);
                    let (sw, cw) = w.sin_cos();
                    let xy = 2.0 * y - 36.0 * x * y * sw;
                    [
                        [6.0 * x + 6.0 * cw - 36.0 * x * x * sw, xy, 0.0],
                        [xy, 2.0 * x + 6.0 * y + 6.0 * cw - 36.0 * y * y * sw, 0.0],
                        [0.0, 0.0, 12.0 * z * z],
                    ]
                }
            }
        }),
    }
}

/// Radially symmetric branches of opposite sign; drives the expanding-sphere
/// test, where the jump of the normal derivative is 4r/(1+r^2)^2.
pub fn radial_solution() -> ExactSolution {
    // q = 1/(1+r^2); u_minus = q, u_plus = -q
    let q = |x: V3| 1.0 / (1.0 + dot(x, x));
    ExactSolution {
        u: Arc::new(move |x, side| -side.signum() * q(x)),
        grad: Arc::new(move |x, side| {
            let v = q(x);
            let c = 2.0 * side.signum() * v * v;
            [c * x[0], c * x[1], c * x[2]]
        }),
        hess: Arc::new(move |x, side| {
            let v = q(x);
            let s = side.signum();
            let diag = 2.0 * s * v * v;
            let off = -8.0 * s * v * v * v;
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = off * x[i] * x[j];
                }
                m[i][i] += diag;
            }
            m
        }),
    }
}

/// Piecewise quadratic branches: every expansion in the discretization is
/// exact, so solves against this solution isolate round-off and solver error.
pub fn quadratic_solution() -> ExactSolution {
    const AM: M3 = [[1.2, 0.3, -0.2], [0.3, -0.8, 0.4], [-0.2, 0.4, 0.9]];
    const AP: M3 = [[-0.5, -0.6, 0.1], [-0.6, 1.4, -0.3], [0.1, -0.3, 2.2]];
    const BM: V3 = [0.4, -0.3, 0.7];
    const BP: V3 = [-0.2, 0.5, 0.1];
    const CM: f64 = 0.3;
    const CP: f64 = -0.6;
    let pick = |side: Side| match side {
        Side::Minus => (AM, BM, CM),
        Side::Plus => (AP, BP, CP),
    };
    ExactSolution {
        u: Arc::new(move |x, side| {
            let (a, b, c) = pick(side);
            c + dot(b, x) + 0.5 * dot(x, matvec(&a, x))
        }),
        grad: Arc::new(move |x, side| {
            let (a, b, _) = pick(side);
            let ax = matvec(&a, x);
            [b[0] + ax[0], b[1] + ax[1], b[2] + ax[2]]
        }),
        hess: Arc::new(move |_, side| pick(side).0),
    }
}

/// The reaction coefficient paired with `trig_poly_solution` in the tests
/// that exercise the a(x) term.
pub fn trig_reaction() -> SideFn<f64> {
    Arc::new(|x, side| match side {
        Side::Minus => 2.0 * x[0].sin(),
        Side::Plus => 80.0 * x[2].cos(),
    })
}

/// The reaction coefficient of the radially symmetric problem.
pub fn radial_reaction() -> SideFn<f64> {
    Arc::new(|x, side| {
        let r = dot(x, x).sqrt();
        match side {
            Side::Minus => 2.0 * r.sin(),
            Side::Plus => 80.0 * r.cos(),
        }
    })
}

/// Builds a named preset over the given interface.
///
/// * `example1`: trig-poly branches, eps 2/80, no reaction term.
/// * `example3`: example1 plus the region-wise reaction term.
/// * `example4`: radially symmetric branches with radial reaction term.
/// * `quadratic`: piecewise quadratic branches with constant reaction 0.7/1.3.
pub fn preset(name: &str, surface: Arc<dyn Surface>) -> Result<Problem> {
    match name {
        "example1" => Ok(manufactured(
            surface,
            trig_poly_solution(),
            Coefficients::piecewise_constant(2.0, 80.0),
            name,
        )),
        "example3" => Ok(manufactured(
            surface,
            trig_poly_solution(),
            Coefficients::piecewise_constant(2.0, 80.0).with_reaction(trig_reaction()),
            name,
        )),
        "example4" => Ok(manufactured(
            surface,
            radial_solution(),
            Coefficients::piecewise_constant(2.0, 80.0).with_reaction(radial_reaction()),
            name,
        )),
        "quadratic" | "quadratic_oracle" => Ok(manufactured(
            surface,
            quadratic_solution(),
            Coefficients::piecewise_constant(2.0, 80.0)
                .with_reaction(Arc::new(|_, side| match side {
                    Side::Minus => 0.7,
                    Side::Plus => 1.3,
                })),
            name,
        )),
        other => Err(Error::Config(format!(
            "unknown problem preset '{other}' (expected example1, example3, example4, quadratic)"
        ))),
    }
}

/// Loads a PQR file, scales the molecule into the box with the given margin,
/// and builds the smoothed-bump level set around it.
pub fn molecule_surface(
    path: &std::path::Path,
    c: f64,
    eta: f64,
    margin: f64,
) -> Result<MolecularSurface> {
    let atoms = pqr::parse_pqr(path)?;
    let atoms = pqr::scale_to_box(&atoms, margin);
    Ok(MolecularSurface::new(atoms, c, eta))
}

/// Manufactured problem on a molecular surface, with the same solution pair
/// and coefficients as `example1`.
pub fn molecule_problem(
    path: &std::path::Path,
    c: f64,
    eta: f64,
    margin: f64,
) -> Result<Problem> {
    let surface = molecule_surface(path, c, eta, margin)?;
    Ok(manufactured(
        Arc::new(surface),
        trig_poly_solution(),
        Coefficients::piecewise_constant(2.0, 80.0),
        "molecule",
    ))
}
