//! Smoothed molecular surfaces built from atom lists.
//!
//! Each atom contributes a mollified indicator chi((r_i - |x - p_i|)/eta)
//! with chi(t) = (1 + tanh t)/2, so the sum counts how deeply a point sits
//! inside the union of atom balls. The level set
//!     phi(x) = c - sum_i chi_eta(r_i - |x - p_i|)
//! is negative inside the molecule and positive outside; smaller eta gives a
//! sharper surface, larger c shrinks it.

use super::pqr::Atom;
use super::Surface;
use crate::vec3::{sub, M3, V3};

pub struct MolecularSurface {
    atoms: Vec<Atom>,
    c: f64,
    eta: f64,
    /// Squared skip distance per atom: beyond r_i + 25 eta the contribution
    /// and its derivatives are below 1e-21 and are dropped for speed.
    cutoff2: Vec<f64>,
}

impl MolecularSurface {
    pub fn new(atoms: Vec<Atom>, c: f64, eta: f64) -> Self {
        assert!(eta > 0.0, "eta must be positive");
        let cutoff2 = atoms
            .iter()
            .map(|a| {
                let d = a.radius + 25.0 * eta;
                d * d
            })
            .collect();
        MolecularSurface {
            atoms,
            c,
            eta,
            cutoff2,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

impl Surface for MolecularSurface {
    fn phi(&self, x: V3) -> f64 {
        let mut s = 0.0;
        for (a, &cut2) in self.atoms.iter().zip(&self.cutoff2) {
            let d = sub(x, a.pos);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if d2 > cut2 {
                continue;
            }
            let t = (a.radius - d2.sqrt()) / self.eta;
            s += 0.5 * (1.0 + t.tanh());
        }
        self.c - s
    }

    fn grad(&self, x: V3) -> V3 {
        let mut g = [0.0; 3];
        for (a, &cut2) in self.atoms.iter().zip(&self.cutoff2) {
            let d = sub(x, a.pos);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if d2 > cut2 || d2 < 1e-24 {
                continue;
            }
            let dist = d2.sqrt();
            let th = ((a.radius - dist) / self.eta).tanh();
            let chi_p = (1.0 - th * th) / (2.0 * self.eta);
            let w = chi_p / dist;
            for k in 0..3 {
                g[k] += w * d[k];
            }
        }
        g
    }

    fn hess(&self, x: V3) -> M3 {
        let mut h = [[0.0; 3]; 3];
        for (a, &cut2) in self.atoms.iter().zip(&self.cutoff2) {
            let d = sub(x, a.pos);
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if d2 > cut2 || d2 < 1e-24 {
                continue;
            }
            let dist = d2.sqrt();
            let th = ((a.radius - dist) / self.eta).tanh();
            let sech2 = 1.0 - th * th;
            let chi_p = sech2 / (2.0 * self.eta);
            let chi_pp = -th * sech2 / (self.eta * self.eta);
            let u = [d[0] / dist, d[1] / dist, d[2] / dist];
            for i in 0..3 {
                for j in 0..3 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    h[i][j] += chi_p * (id - u[i] * u[j]) / dist - chi_pp * u[i] * u[j];
                }
            }
        }
        h
    }
}
