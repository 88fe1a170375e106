//! Uniform Cartesian grid over the box [-1,1]^3, nodal sign data, and
//! interface-segment intersections.

use crate::levelset::{geometry_at, Surface, SurfaceGeometry};
use crate::vec3::V3;
use crate::{Error, Result};

/// Relative size (in units of h) of the nodal value perturbation that keeps
/// interface crossings strictly between grid points.
pub const PERTURB_REL: f64 = 1e-10;

/// Clamp bounds for the intersection fraction alpha.
pub const ALPHA_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct Grid {
    /// Number of subintervals per axis; nodes run 0..=n.
    pub n: usize,
    /// Spacing h = 2/n.
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Grid> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        Ok(Grid {
            n,
            h: 2.0 / n as f64,
        })
    }

    pub fn points_per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn num_points(&self) -> usize {
        let p = self.points_per_axis();
        p * p * p
    }

    pub fn index(&self, m: [usize; 3]) -> usize {
        let p = self.points_per_axis();
        debug_assert!(m[0] < p && m[1] < p && m[2] < p);
        m[0] + p * (m[1] + p * m[2])
    }

    pub fn multi(&self, lin: usize) -> [usize; 3] {
        let p = self.points_per_axis();
        [lin % p, (lin / p) % p, lin / (p * p)]
    }

    /// Node coordinate; endpoints land exactly on +-1.
    pub fn coord(&self, m: [usize; 3]) -> V3 {
        [
            self.coord_1d(m[0]),
            self.coord_1d(m[1]),
            self.coord_1d(m[2]),
        ]
    }

    pub fn coord_1d(&self, i: usize) -> f64 {
        2.0 * i as f64 / self.n as f64 - 1.0
    }

    pub fn is_boundary(&self, m: [usize; 3]) -> bool {
        m.iter().any(|&c| c == 0 || c == self.n)
    }

    /// Axis neighbor index, or None when it would leave the grid.
    pub fn neighbor(&self, m: [usize; 3], axis: usize, dir: i8) -> Option<[usize; 3]> {
        let mut out = m;
        if dir > 0 {
            if m[axis] >= self.n {
                return None;
            }
            out[axis] += 1;
        } else {
            if m[axis] == 0 {
                return None;
            }
            out[axis] -= 1;
        }
        Some(out)
    }

    /// Offset by a small signed step in each axis, or None when out of range.
    pub fn offset(&self, m: [usize; 3], d: [i32; 3]) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let v = m[k] as i64 + d[k] as i64;
            if v < 0 || v > self.n as i64 {
                return None;
            }
            out[k] = v as usize;
        }
        Some(out)
    }
}

/// Nodal level-set data: a strict sign per node plus the perturbed phi value
/// it was derived from. Nodes where raw phi vanishes (to within
/// `PERTURB_REL * h`) are nudged to `+-PERTURB_REL * h`, preserving the raw
/// sign and sending exact zeros to the inside.
pub struct SignField {
    pub sign: Vec<i8>,
    pub phi: Vec<f64>,
}

impl SignField {
    pub fn build(grid: &Grid, surface: &dyn Surface) -> SignField {
        let thresh = PERTURB_REL * grid.h;
        let total = grid.num_points();
        let mut sign = vec![0i8; total];
        let mut phi = vec![0.0f64; total];
        for lin in 0..total {
            let m = grid.multi(lin);
            let mut v = surface.phi(grid.coord(m));
            if v.abs() < thresh {
                v = if v > 0.0 { thresh } else { -thresh };
            }
            phi[lin] = v;
            sign[lin] = if v < 0.0 { -1 } else { 1 };
        }
        SignField { sign, phi }
    }

    pub fn sign_at(&self, grid: &Grid, m: [usize; 3]) -> i8 {
        self.sign[grid.index(m)]
    }

    pub fn phi_at(&self, grid: &Grid, m: [usize; 3]) -> f64 {
        self.phi[grid.index(m)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// On a face of the box; carries the Dirichlet condition.
    Boundary,
    /// All six axis neighbors share the node's sign.
    Interior,
    /// At least one axis neighbor lies on the other side of the interface.
    Interface,
}

pub fn classify(grid: &Grid, signs: &SignField, m: [usize; 3]) -> PointClass {
    if grid.is_boundary(m) {
        return PointClass::Boundary;
    }
    let s = signs.sign_at(grid, m);
    for axis in 0..3 {
        for dir in [1i8, -1] {
            let nb = grid.neighbor(m, axis, dir).unwrap();
            if signs.sign_at(grid, nb) != s {
                return PointClass::Interface;
            }
        }
    }
    PointClass::Interior
}

/// Where the interface cuts the grid segment from `base` one step along
/// `dir * e_axis`: the fraction alpha of the step, its complement beta, the
/// cut location, and the surface frame there.
#[derive(Debug, Clone)]
pub struct Intersection {
    pub base: [usize; 3],
    pub axis: usize,
    pub dir: i8,
    pub alpha: f64,
    pub beta: f64,
    pub point: V3,
    pub geom: SurfaceGeometry,
}

/// Locates the interface on a grid segment by bisection.
///
/// Returns None when the segment does not straddle the interface (equal
/// perturbed signs at the endpoints, or the neighbor is outside the grid).
/// The bracket orientation comes from the perturbed nodal values, so a raw
/// zero at an endpoint still yields a crossing with alpha clamped just
/// inside (0,1).
pub fn find_intersection(
    grid: &Grid,
    signs: &SignField,
    surface: &dyn Surface,
    base: [usize; 3],
    axis: usize,
    dir: i8,
) -> Result<Option<Intersection>> {
    let nb = match grid.neighbor(base, axis, dir) {
        Some(nb) => nb,
        None => return Ok(None),
    };
    let fa = signs.phi_at(grid, base);
    let fb = signs.phi_at(grid, nb);
    if (fa < 0.0) == (fb < 0.0) {
        return Ok(None);
    }
    let x0 = grid.coord(base);
    let step = dir as f64 * grid.h;
    let eval = |alpha: f64| {
        let mut x = x0;
        x[axis] += alpha * step;
        surface.phi(x)
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let a_neg = fa < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let fm = eval(mid);
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if (fm < 0.0) == a_neg {
            a = mid;
        } else {
            b = mid;
        }
    }
    let alpha = (0.5 * (a + b)).clamp(ALPHA_MIN, 1.0 - ALPHA_MIN);
    let mut point = x0;
    point[axis] += alpha * step;
    let geom = geometry_at(surface, point)?;
    Ok(Some(Intersection {
        base,
        axis,
        dir,
        alpha,
        beta: 1.0 - alpha,
        point,
        geom,
    }))
}

/// Diagnostic for the one-crossing-per-segment assumption: counts raw sign
/// changes of phi over ten uniformly spaced samples of the segment. A healthy
/// segment reports at most one.
pub fn count_segment_sign_changes(
    grid: &Grid,
    surface: &dyn Surface,
    base: [usize; 3],
    axis: usize,
    dir: i8,
) -> usize {
    let x0 = grid.coord(base);
    let step = dir as f64 * grid.h;
    let mut changes = 0;
    let mut prev_neg = None;
    for j in 0..=9 {
        let mut x = x0;
        x[axis] += (j as f64 / 9.0) * step;
        let v = surface.phi(x);
        let neg = v < 0.0;
        if let Some(p) = prev_neg {
            if p != neg {
                changes += 1;
            }
        }
        prev_neg = Some(neg);
    }
    changes
}
