//! Implicit surfaces and their differential geometry.
//!
//! A surface is the zero level set of a scalar field `phi` defined on the
//! computational box. The solver needs first and second derivatives of `phi`
//! at interface points to build local coordinate frames and curvature terms,
//! so every surface provides an analytic (or carefully guarded) gradient and
//! Hessian alongside the field itself.

pub mod catalog;
pub mod molecular;
pub mod pqr;

use crate::vec3::{dot, norm, scale, M3, V3};
use crate::{Error, Result};

/// A scalar field whose zero level set is the interface.
///
/// Implementations must be deterministic pure functions of `x`. The gradient
/// and Hessian are required wherever `|phi|` is within a few grid cells of
/// zero; far from the interface they may take guarded fallback values.
pub trait Surface: Send + Sync {
    fn phi(&self, x: V3) -> f64;
    fn grad(&self, x: V3) -> V3;
    fn hess(&self, x: V3) -> M3;
}

/// Local geometry of the interface at a point: unit normal, an orthonormal
/// tangent pair, and the Jacobian of the unit normal field.
///
/// `jac[i][j]` holds the derivative of normal component `i` with respect to
/// coordinate `j`; its rows are orthogonal to the normal by construction.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub normal: V3,
    pub tangents: [V3; 2],
    pub jac: M3,
}

/// Computes the interface frame at `x`.
///
/// The normal points from the inside (`phi < 0`) to the outside. The two
/// tangents come from projecting the two coordinate axes least aligned with
/// the normal onto the tangent plane and orthonormalizing; this keeps the
/// frame stable under small perturbations of `x` and reduces to coordinate
/// axes whenever the normal is itself a coordinate axis.
pub fn geometry_at(surface: &dyn Surface, x: V3) -> Result<SurfaceGeometry> {
    let g = surface.grad(x);
    let mag = norm(g);
    if !(mag > 1e-8) {
        return Err(Error::DegenerateNormal(x));
    }
    let n = scale(g, 1.0 / mag);

    // Jacobian of the unit normal: project the Hessian rows off the normal
    // direction and divide by |grad phi|.
    let h = surface.hess(x);
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = h[i][j];
            for m in 0..3 {
                v -= n[i] * n[m] * h[m][j];
            }
            jac[i][j] = v / mag;
        }
    }

    // Pick the two axes with the smallest |n . e_k| (ties broken by index),
    // keep them in axis order, then project and orthonormalize.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        n[a].abs()
            .partial_cmp(&n[b].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let (a1, a2) = if order[0] < order[1] {
        (order[0], order[1])
    } else {
        (order[1], order[0])
    };

    let mut t1 = [0.0; 3];
    t1[a1] = 1.0;
    let c = dot(t1, n);
    for k in 0..3 {
        t1[k] -= c * n[k];
    }
    let m1 = norm(t1);
    if !(m1 > 1e-8) {
        return Err(Error::DegenerateNormal(x));
    }
    t1 = scale(t1, 1.0 / m1);

    let mut t2 = [0.0; 3];
    t2[a2] = 1.0;
    let cn = dot(t2, n);
    let ct = dot(t2, t1);
    for k in 0..3 {
        t2[k] -= cn * n[k] + ct * t1[k];
    }
    let m2 = norm(t2);
    if !(m2 > 1e-8) {
        return Err(Error::DegenerateNormal(x));
    }
    t2 = scale(t2, 1.0 / m2);

    Ok(SurfaceGeometry {
        normal: n,
        tangents: [t1, t2],
        jac,
    })
}

#[cfg(test)]
mod tests {
    use super::catalog::{by_name, Ellipsoid, Sphere};
    use super::*;
    use crate::vec3::{matvec, sub};

    fn fd_unit_normal(s: &dyn Surface, x: V3, k: usize, step: f64) -> V3 {
        let mut xp = x;
        xp[k] += step;
        let mut xm = x;
        xm[k] -= step;
        let np = {
            let g = s.grad(xp);
            scale(g, 1.0 / norm(g))
        };
        let nm = {
            let g = s.grad(xm);
            scale(g, 1.0 / norm(g))
        };
        scale(sub(np, nm), 0.5 / step)
    }

    #[test]
    fn sphere_geometry_matches_closed_form() {
        let s = Sphere { radius: 0.5 };
        let g = geometry_at(&s, [0.5, 0.0, 0.0]).unwrap();
        assert!((g.normal[0] - 1.0).abs() < 1e-12);
        assert!(g.normal[1].abs() < 1e-12 && g.normal[2].abs() < 1e-12);
        // Normal Jacobian of a sphere of radius r is (I - n n^T)/r.
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j && i > 0 { 2.0 } else { 0.0 };
                assert!(
                    (g.jac[i][j] - want).abs() < 1e-12,
                    "jac[{i}][{j}] = {}",
                    g.jac[i][j]
                );
            }
        }
        // Axis-aligned normal reduces tangents to coordinate axes.
        assert!((g.tangents[0][1] - 1.0).abs() < 1e-12);
        assert!((g.tangents[1][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal_on_random_points() {
        let s = Ellipsoid;
        let mut seed = 0x243f6a8885a308d3u64;
        let mut rand01 = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut checked = 0;
        while checked < 1000 {
            let x = [
                2.0 * rand01() - 1.0,
                2.0 * rand01() - 1.0,
                2.0 * rand01() - 1.0,
            ];
            let g = geometry_at(&s, x).unwrap();
            let n = g.normal;
            let [t1, t2] = g.tangents;
            assert!((norm(n) - 1.0).abs() < 1e-12);
            assert!((norm(t1) - 1.0).abs() < 1e-12);
            assert!((norm(t2) - 1.0).abs() < 1e-12);
            assert!(dot(n, t1).abs() < 1e-12);
            assert!(dot(n, t2).abs() < 1e-12);
            assert!(dot(t1, t2).abs() < 1e-12);
            // Rows of the normal Jacobian stay tangent: n^T J = 0.
            for j in 0..3 {
                let col = n[0] * g.jac[0][j] + n[1] * g.jac[1][j] + n[2] * g.jac[2][j];
                assert!(col.abs() < 1e-8, "n^T J column {j} = {col}");
            }
            checked += 1;
        }
    }

    #[test]
    fn normal_jacobian_matches_finite_differences() {
        for name in ["ellipsoid", "peanut", "donut", "banana", "popcorn"] {
            let s = by_name(name, 0.5).unwrap();
            // A point near each interface, away from guard zones.
            let x = match name {
                "ellipsoid" => [0.55, 0.35, 0.21],
                "peanut" => [0.48, 0.22, 0.13],
                "donut" => [0.52, 0.41, 0.18],
                "banana" => [-0.05, 0.12, 0.07],
                _ => [0.45, 0.3, 0.25],
            };
            let g = geometry_at(s.as_ref(), x).unwrap();
            for j in 0..3 {
                let col = fd_unit_normal(s.as_ref(), x, j, 1e-5);
                for i in 0..3 {
                    let scale_ref = 1.0 + g.jac[i][j].abs();
                    assert!(
                        (g.jac[i][j] - col[i]).abs() < 1e-4 * scale_ref,
                        "{name}: jac[{i}][{j}] = {} vs fd {}",
                        g.jac[i][j],
                        col[i]
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_gradient_is_rejected() {
        struct Flat;
        impl Surface for Flat {
            fn phi(&self, _x: V3) -> f64 {
                0.0
            }
            fn grad(&self, _x: V3) -> V3 {
                [0.0, 0.0, 0.0]
            }
            fn hess(&self, _x: V3) -> M3 {
                [[0.0; 3]; 3]
            }
        }
        assert!(matches!(
            geometry_at(&Flat, [0.0; 3]),
            Err(Error::DegenerateNormal(_))
        ));
    }

    #[test]
    fn tangent_rule_for_off_axis_normal() {
        // Plane with normal mostly along x: tangents should be built from the
        // y and z axes in that order.
        struct Plane;
        impl Surface for Plane {
            fn phi(&self, x: V3) -> f64 {
                0.9 * x[0] + 0.3 * x[1] + 0.1 * x[2]
            }
            fn grad(&self, _x: V3) -> V3 {
                [0.9, 0.3, 0.1]
            }
            fn hess(&self, _x: V3) -> M3 {
                [[0.0; 3]; 3]
            }
        }
        let g = geometry_at(&Plane, [0.0; 3]).unwrap();
        // First tangent is the projected y axis: its y component dominates.
        assert!(g.tangents[0][1] > 0.9);
        assert!(g.tangents[1][2] > 0.9);
        // Curvature of a plane vanishes.
        let j = g.jac;
        let total: f64 = j.iter().flatten().map(|v| v.abs()).sum();
        assert!(total < 1e-14);
    }

    #[test]
    fn jacobian_contracts_symmetrically_with_tangents() {
        let s = by_name("peanut", 0.5).unwrap();
        let x = [0.51, 0.24, 0.11];
        let g = geometry_at(s.as_ref(), x).unwrap();
        let [t1, t2] = g.tangents;
        let a = dot(t1, matvec(&g.jac, t2));
        let b = dot(t2, matvec(&g.jac, t1));
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}
