//! Built-in analytic test surfaces.
//!
//! Each surface carries hand-derived gradient and Hessian formulas. Where a
//! formula has a removable singularity (cylindrical radius on the symmetry
//! axis, distance at a ball center, min over balls at a tie) the affected
//! branch is guarded; the guards only trigger far from the zero level set,
//! where derivatives are never consumed by the solver.

use super::Surface;
use crate::vec3::{norm, sub, M3, V3};
use crate::{Error, Result};

/// Looks up a catalog surface by name. `sphere_radius` only affects `sphere`.
pub fn by_name(name: &str, sphere_radius: f64) -> Result<Box<dyn Surface>> {
    match name {
        "sphere" => Ok(Box::new(Sphere {
            radius: sphere_radius,
        })),
        "ellipsoid" => Ok(Box::new(Ellipsoid)),
        "eight_balls" => Ok(Box::new(EightBalls::new())),
        "peanut" => Ok(Box::new(Peanut)),
        "donut" => Ok(Box::new(Donut)),
        "banana" => Ok(Box::new(Banana)),
        "popcorn" => Ok(Box::new(Popcorn::new())),
        other => Err(Error::Config(format!("unknown surface `{other}`"))),
    }
}

/// phi = |x| - r
pub struct Sphere {
    pub radius: f64,
}

impl Surface for Sphere {
    fn phi(&self, x: V3) -> f64 {
        norm(x) - self.radius
    }
    fn grad(&self, x: V3) -> V3 {
        let r = norm(x);
        if r < 1e-12 {
            return [0.0; 3];
        }
        [x[0] / r, x[1] / r, x[2] / r]
    }
    fn hess(&self, x: V3) -> M3 {
        let r = norm(x);
        if r < 1e-12 {
            return [[0.0; 3]; 3];
        }
        let u = [x[0] / r, x[1] / r, x[2] / r];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = ((if i == j { 1.0 } else { 0.0 }) - u[i] * u[j]) / r;
            }
        }
        h
    }
}

/// phi = 2x^2 + 3y^2 + 6z^2 - 1.3
pub struct Ellipsoid;

impl Surface for Ellipsoid {
    fn phi(&self, x: V3) -> f64 {
        2.0 * x[0] * x[0] + 3.0 * x[1] * x[1] + 6.0 * x[2] * x[2] - 1.3
    }
    fn grad(&self, x: V3) -> V3 {
        [4.0 * x[0], 6.0 * x[1], 12.0 * x[2]]
    }
    fn hess(&self, _x: V3) -> M3 {
        [[4.0, 0.0, 0.0], [0.0, 6.0, 0.0], [0.0, 0.0, 12.0]]
    }
}

/// Union of eight spheres of radius 0.3 centered at (+-0.5, +-0.5, +-0.5):
/// phi = min_k |x - c_k| - 0.3.
pub struct EightBalls {
    centers: [V3; 8],
}

impl EightBalls {
    pub fn new() -> Self {
        let mut centers = [[0.0; 3]; 8];
        for k in 0..8 {
            centers[k] = [
                0.5 * if (k / 4) % 2 == 0 { 1.0 } else { -1.0 },
                0.5 * if (k / 2) % 2 == 0 { 1.0 } else { -1.0 },
                0.5 * if k % 2 == 0 { 1.0 } else { -1.0 },
            ];
        }
        EightBalls { centers }
    }

    /// Distances to all centers plus the index of the nearest (first wins on
    /// exact ties) and the runner-up distance.
    fn nearest(&self, x: V3) -> (usize, f64, f64) {
        let mut best = usize::MAX;
        let mut d1 = f64::INFINITY;
        let mut d2 = f64::INFINITY;
        for (k, c) in self.centers.iter().enumerate() {
            let d = norm(sub(x, *c));
            if d < d1 {
                d2 = d1;
                d1 = d;
                best = k;
            } else if d < d2 {
                d2 = d;
            }
        }
        (best, d1, d2)
    }
}

impl Default for EightBalls {
    fn default() -> Self {
        Self::new()
    }
}

impl Surface for EightBalls {
    fn phi(&self, x: V3) -> f64 {
        self.nearest(x).1 - 0.3
    }
    fn grad(&self, x: V3) -> V3 {
        let (k, d, _) = self.nearest(x);
        if d < 1e-12 {
            return [0.0; 3];
        }
        let u = sub(x, self.centers[k]);
        [u[0] / d, u[1] / d, u[2] / d]
    }
    fn hess(&self, x: V3) -> M3 {
        let (k, d, d2) = self.nearest(x);
        if d < 1e-12 {
            return [[0.0; 3]; 3];
        }
        if d2 - d > 1e-6 {
            let u = sub(x, self.centers[k]);
            let u = [u[0] / d, u[1] / d, u[2] / d];
            let mut h = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] = ((if i == j { 1.0 } else { 0.0 }) - u[i] * u[j]) / d;
                }
            }
            return h;
        }
        // Near the median plane between two balls the min switches branch;
        // fall back to centered differences of phi itself.
        fd_hess(&|y| self.phi(y), x, 1e-4)
    }
}

/// phi = |x| - 0.5 - 0.4 x y / (rho |x|) with rho = sqrt(x^2 + y^2).
///
/// In spherical coordinates (theta the azimuth, psi the polar angle from +z)
/// this is r - 0.5 - 0.2 sin(2 theta) sin(psi): a sphere pinched into two
/// lobes along the diagonals of the x-y plane.
pub struct Peanut;

impl Surface for Peanut {
    fn phi(&self, x: V3) -> f64 {
        let r = norm(x);
        let rho2 = x[0] * x[0] + x[1] * x[1];
        if rho2 < 1e-20 || r < 1e-12 {
            return r - 0.5;
        }
        r - 0.5 - 0.4 * x[0] * x[1] / (rho2.sqrt() * r)
    }
    fn grad(&self, x: V3) -> V3 {
        let r = norm(x);
        let rho2 = x[0] * x[0] + x[1] * x[1];
        if r < 1e-12 {
            return [0.0; 3];
        }
        let u = [x[0] / r, x[1] / r, x[2] / r];
        if rho2 < 1e-20 {
            return u;
        }
        let rho = rho2.sqrt();
        // f = 0.4 A B C with A = x y, B = 1/rho, C = 1/r.
        let a = x[0] * x[1];
        let b = 1.0 / rho;
        let c = 1.0 / r;
        let ga = [x[1], x[0], 0.0];
        let gb = [-x[0] / (rho2 * rho), -x[1] / (rho2 * rho), 0.0];
        let gc = [
            -x[0] / (r * r * r),
            -x[1] / (r * r * r),
            -x[2] / (r * r * r),
        ];
        let mut g = u;
        for k in 0..3 {
            g[k] -= 0.4 * (b * c * ga[k] + a * c * gb[k] + a * b * gc[k]);
        }
        g
    }
    fn hess(&self, x: V3) -> M3 {
        let r = norm(x);
        let rho2 = x[0] * x[0] + x[1] * x[1];
        if r < 1e-12 {
            return [[0.0; 3]; 3];
        }
        let u = [x[0] / r, x[1] / r, x[2] / r];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = ((if i == j { 1.0 } else { 0.0 }) - u[i] * u[j]) / r;
            }
        }
        if rho2 < 1e-20 {
            return h;
        }
        let rho = rho2.sqrt();
        let r3 = r * r * r;
        let rho3 = rho2 * rho;
        let a = x[0] * x[1];
        let b = 1.0 / rho;
        let c = 1.0 / r;
        let ga = [x[1], x[0], 0.0];
        let gb = [-x[0] / rho3, -x[1] / rho3, 0.0];
        let gc = [-x[0] / r3, -x[1] / r3, -x[2] / r3];
        let ha = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let mut hb = [[0.0; 3]; 3];
        let rho5 = rho3 * rho2;
        for i in 0..2 {
            for j in 0..2 {
                hb[i][j] = 3.0 * x[i] * x[j] / rho5 - (if i == j { 1.0 } else { 0.0 }) / rho3;
            }
        }
        let mut hc = [[0.0; 3]; 3];
        let r5 = r3 * r * r;
        for i in 0..3 {
            for j in 0..3 {
                hc[i][j] = 3.0 * x[i] * x[j] / r5 - (if i == j { 1.0 } else { 0.0 }) / r3;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let prod = c * (ga[i] * gb[j] + gb[i] * ga[j])
                    + b * (ga[i] * gc[j] + gc[i] * ga[j])
                    + a * (gb[i] * gc[j] + gc[i] * gb[j])
                    + b * c * ha[i][j]
                    + a * c * hb[i][j]
                    + a * b * hc[i][j];
                h[i][j] -= 0.4 * prod;
            }
        }
        h
    }
}

/// Torus around the z axis: phi = (rho - 0.6)^2 + z^2 - 0.16.
pub struct Donut;

impl Surface for Donut {
    fn phi(&self, x: V3) -> f64 {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let g = rho - 0.6;
        g * g + x[2] * x[2] - 0.16
    }
    fn grad(&self, x: V3) -> V3 {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if rho < 1e-12 {
            return [0.0, 0.0, 2.0 * x[2]];
        }
        let g = rho - 0.6;
        [2.0 * g * x[0] / rho, 2.0 * g * x[1] / rho, 2.0 * x[2]]
    }
    fn hess(&self, x: V3) -> M3 {
        let rho2 = x[0] * x[0] + x[1] * x[1];
        let rho = rho2.sqrt();
        if rho < 1e-12 {
            return [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]];
        }
        let g = rho - 0.6;
        let rho3 = rho2 * rho;
        let hxx = 2.0 * (x[0] * x[0] / rho2 + g * x[1] * x[1] / rho3);
        let hyy = 2.0 * (x[1] * x[1] / rho2 + g * x[0] * x[0] / rho3);
        let hxy = 2.0 * x[0] * x[1] * (1.0 / rho2 - g / rho3);
        [[hxx, hxy, 0.0], [hxy, hyy, 0.0], [0.0, 0.0, 2.0]]
    }
}

/// Curved quartic blob: with w = 7x + 6,
/// phi = w^4 + 2401 y^4 + 3601.5 z^4 + 98 w^2 (y^2 + z^2) + 4802 y^2 z^2
///       - 94 w^2 + 3822 y^2 - 4606 z^2 + 1521.
pub struct Banana;

impl Surface for Banana {
    fn phi(&self, x: V3) -> f64 {
        let w = 7.0 * x[0] + 6.0;
        let (y, z) = (x[1], x[2]);
        let (w2, y2, z2) = (w * w, y * y, z * z);
        w2 * w2 + 2401.0 * y2 * y2 + 3601.5 * z2 * z2
            + 98.0 * w2 * (y2 + z2)
            + 4802.0 * y2 * z2
            - 94.0 * w2
            + 3822.0 * y2
            - 4606.0 * z2
            + 1521.0
    }
    fn grad(&self, x: V3) -> V3 {
        let w = 7.0 * x[0] + 6.0;
        let (y, z) = (x[1], x[2]);
        let (w2, y2, z2) = (w * w, y * y, z * z);
        [
            7.0 * (4.0 * w2 * w + 196.0 * w * (y2 + z2) - 188.0 * w),
            9604.0 * y2 * y + 196.0 * w2 * y + 9604.0 * y * z2 + 7644.0 * y,
            14406.0 * z2 * z + 196.0 * w2 * z + 9604.0 * y2 * z - 9212.0 * z,
        ]
    }
    fn hess(&self, x: V3) -> M3 {
        let w = 7.0 * x[0] + 6.0;
        let (y, z) = (x[1], x[2]);
        let (w2, y2, z2) = (w * w, y * y, z * z);
        let hxx = 49.0 * (12.0 * w2 + 196.0 * (y2 + z2) - 188.0);
        let hxy = 2744.0 * w * y;
        let hxz = 2744.0 * w * z;
        let hyy = 28812.0 * y2 + 196.0 * w2 + 9604.0 * z2 + 7644.0;
        let hyz = 19208.0 * y * z;
        let hzz = 43218.0 * z2 + 196.0 * w2 + 9604.0 * y2 - 9212.0;
        [[hxx, hxy, hxz], [hxy, hyy, hyz], [hxz, hyz, hzz]]
    }
}

/// Sphere of radius `r0` decorated with twelve Gaussian bumps:
/// phi = |x| - r0 - sum_k (r0/amp_div) exp(-decay |x - c_k|^2).
///
/// Ten bump centers sit on two staggered rings at z = +-r0/sqrt(5) and two
/// cap the poles. The ring angle for bump k is 2 k pi / 5 - floor(k / 5)
/// (the offset between rings is one radian).
pub struct Popcorn {
    centers: [V3; 12],
    r0: f64,
    amp: f64,
    decay: f64,
}

impl Popcorn {
    pub fn new() -> Self {
        Self::with_params(0.6, 25.0, 45.0)
    }

    pub fn with_params(r0: f64, amp_div: f64, decay: f64) -> Self {
        let mut centers = [[0.0; 3]; 12];
        for (k, c) in centers.iter_mut().enumerate().take(10) {
            let fk = (k / 5) as f64;
            let ang = 2.0 * (k as f64) * std::f64::consts::PI / 5.0 - fk;
            let s = r0 / 5f64.sqrt();
            let zsgn = if k / 5 == 0 { 1.0 } else { -1.0 };
            *c = [s * 2.0 * ang.cos(), s * 2.0 * ang.sin(), s * zsgn];
        }
        centers[10] = [0.0, 0.0, r0];
        centers[11] = [0.0, 0.0, -r0];
        Popcorn {
            centers,
            r0,
            amp: r0 / amp_div,
            decay,
        }
    }
}

impl Default for Popcorn {
    fn default() -> Self {
        Self::new()
    }
}

impl Surface for Popcorn {
    fn phi(&self, x: V3) -> f64 {
        let mut v = norm(x) - self.r0;
        for c in &self.centers {
            let d = sub(x, *c);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            v -= self.amp * (-self.decay * d2).exp();
        }
        v
    }
    fn grad(&self, x: V3) -> V3 {
        let r = norm(x);
        let mut g = if r < 1e-12 {
            [0.0; 3]
        } else {
            [x[0] / r, x[1] / r, x[2] / r]
        };
        for c in &self.centers {
            let d = sub(x, *c);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let w = 2.0 * self.decay * self.amp * (-self.decay * d2).exp();
            for k in 0..3 {
                g[k] += w * d[k];
            }
        }
        g
    }
    fn hess(&self, x: V3) -> M3 {
        let r = norm(x);
        let mut h = [[0.0; 3]; 3];
        if r >= 1e-12 {
            let u = [x[0] / r, x[1] / r, x[2] / r];
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] = ((if i == j { 1.0 } else { 0.0 }) - u[i] * u[j]) / r;
                }
            }
        }
        for c in &self.centers {
            let d = sub(x, *c);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let w = 2.0 * self.decay * self.amp * (-self.decay * d2).exp();
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] +=
                        w * ((if i == j { 1.0 } else { 0.0 }) - 2.0 * self.decay * d[i] * d[j]);
                }
            }
        }
        h
    }
}

/// Centered second differences of an arbitrary scalar field; used where an
/// analytic Hessian branch is ambiguous.
pub fn fd_hess(phi: &dyn Fn(V3) -> f64, x: V3, step: f64) -> M3 {
    let mut h = [[0.0; 3]; 3];
    let f0 = phi(x);
    for i in 0..3 {
        let mut xp = x;
        xp[i] += step;
        let mut xm = x;
        xm[i] -= step;
        h[i][i] = (phi(xp) - 2.0 * f0 + phi(xm)) / (step * step);
        for j in (i + 1)..3 {
            let mut xpp = x;
            xpp[i] += step;
            xpp[j] += step;
            let mut xpm = x;
            xpm[i] += step;
            xpm[j] -= step;
            let mut xmp = x;
            xmp[i] -= step;
            xmp[j] += step;
            let mut xmm = x;
            xmm[i] -= step;
            xmm[j] -= step;
            let v = (phi(xpp) - phi(xpm) - phi(xmp) + phi(xmm)) / (4.0 * step * step);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// Centered first differences; companion to `fd_hess` for tests.
pub fn fd_grad(phi: &dyn Fn(V3) -> f64, x: V3, step: f64) -> V3 {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let mut xp = x;
        xp[i] += step;
        let mut xm = x;
        xm[i] -= step;
        g[i] = (phi(xp) - phi(xm)) / (2.0 * step);
    }
    g
}
