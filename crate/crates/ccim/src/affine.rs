//! Affine forms: linear functionals over a small symbol alphabet plus a
//! constant. The local elimination steps of the method are all phrased as
//! exact arithmetic on these forms, so a derivative approximation stays a
//! first-class object until it is finally evaluated against nodal values.

use crate::dense::{cond1, Lu};

/// Symbols a form may reference. `Grid` offsets are relative to the base grid
/// point of the local system and stay within Chebyshev radius 2.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Sym {
    /// Nodal value `u` at the given index offset from the base point.
    Grid(i8, i8, i8),
    /// First derivative `du/dx_k` at the base point.
    D1(u8),
    /// Pure second derivative `d2u/dx_k^2` at the base point.
    D2(u8),
    /// Jump of the mixed derivative `[d2u/dx_k dx_l]` (k < l) at the
    /// interface crossing of the segment under consideration.
    MixedJump(u8, u8),
}

impl Sym {
    pub fn grid(off: [i32; 3]) -> Sym {
        debug_assert!(off.iter().all(|d| d.abs() <= 2));
        Sym::Grid(off[0] as i8, off[1] as i8, off[2] as i8)
    }

    pub fn grid_offset(self) -> Option<[i32; 3]> {
        match self {
            Sym::Grid(a, b, c) => Some([a as i32, b as i32, c as i32]),
            _ => None,
        }
    }
}

/// `sum_i c_i * sym_i + constant`, terms kept sorted by symbol.
#[derive(Clone, Debug, Default)]
pub struct Form {
    terms: Vec<(Sym, f64)>,
    pub constant: f64,
}

impl Form {
    pub fn zero() -> Form {
        Form::default()
    }

    pub fn constant(c: f64) -> Form {
        Form {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn sym(s: Sym) -> Form {
        Form {
            terms: vec![(s, 1.0)],
            constant: 0.0,
        }
    }

    pub fn scaled_sym(s: Sym, c: f64) -> Form {
        Form {
            terms: vec![(s, c)],
            constant: 0.0,
        }
    }

    pub fn terms(&self) -> &[(Sym, f64)] {
        &self.terms
    }

    pub fn coeff(&self, s: Sym) -> f64 {
        match self.terms.binary_search_by(|(t, _)| t.cmp(&s)) {
            Ok(i) => self.terms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn add_const(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_term(&mut self, s: Sym, c: f64) {
        match self.terms.binary_search_by(|(t, _)| t.cmp(&s)) {
            Ok(i) => self.terms[i].1 += c,
            Err(i) => {
                if c != 0.0 {
                    self.terms.insert(i, (s, c));
                }
            }
        }
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, other: &Form, c: f64) {
        if c == 0.0 {
            return;
        }
        for &(s, v) in &other.terms {
            self.add_term(s, c * v);
        }
        self.constant += c * other.constant;
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.terms {
            t.1 *= c;
        }
        self.constant *= c;
    }

    /// Replace every occurrence of `s` by the form `rep`.
    pub fn substitute(&mut self, s: Sym, rep: &Form) {
        if let Ok(i) = self.terms.binary_search_by(|(t, _)| t.cmp(&s)) {
            let c = self.terms[i].1;
            self.terms.remove(i);
            self.add_scaled(rep, c);
        }
    }

    pub fn evaluate(&self, assign: &dyn Fn(Sym) -> f64) -> f64 {
        let mut acc = self.constant;
        for &(s, c) in &self.terms {
            acc += c * assign(s);
        }
        acc
    }

    /// Drop coefficients below `rel` times the largest coefficient magnitude.
    pub fn prune(&mut self, rel: f64) {
        let max = self
            .terms
            .iter()
            .map(|&(_, c)| c.abs())
            .fold(0.0f64, f64::max);
        if max == 0.0 {
            self.terms.clear();
            return;
        }
        let cut = rel * max;
        self.terms.retain(|&(_, c)| c.abs() >= cut);
    }

    pub fn contains_kind(&self, pred: &dyn Fn(Sym) -> bool) -> bool {
        self.terms.iter().any(|&(s, _)| pred(s))
    }
}

#[derive(Debug)]
pub enum LocalSolveError {
    IllConditioned(f64),
    Singular,
    ResidualTooLarge(f64),
}

/// Tolerances of the local solves: condition limit, residual acceptance,
/// relative coefficient pruning.
pub const COND_LIMIT: f64 = 1e12;
pub const RESIDUAL_REL: f64 = 1e-10;
pub const PRUNE_REL: f64 = 1e-14;

/// Solve `A x = rhs` where the right-hand side entries are forms; the result
/// expresses each unknown as a form over the union of the rhs symbols. The
/// solve happens coefficient-wise (one dense solve per symbol and one for the
/// constants), followed by a multiply-back residual check.
pub fn solve_linear_forms(a: &[f64], rhs: &[Form]) -> Result<Vec<Form>, LocalSolveError> {
    let m = rhs.len();
    assert_eq!(a.len(), m * m);
    let cond = cond1(a, m);
    if !cond.is_finite() {
        return Err(LocalSolveError::Singular);
    }
    if cond > COND_LIMIT {
        return Err(LocalSolveError::IllConditioned(cond));
    }
    let lu = Lu::factor(a, m).ok_or(LocalSolveError::Singular)?;

    let mut symbols: Vec<Sym> = Vec::new();
    for f in rhs {
        for &(s, _) in f.terms() {
            if let Err(i) = symbols.binary_search(&s) {
                symbols.insert(i, s);
            }
        }
    }

    let mut out = vec![Form::zero(); m];
    let mut v = vec![0.0; m];
    let check = |v: &[f64], x: &[f64]| -> Result<(), LocalSolveError> {
        let scale = v.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
        let mut worst = 0.0f64;
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                s += a[i * m + j] * x[j];
            }
            worst = worst.max((s - v[i]).abs());
        }
        if worst > RESIDUAL_REL * scale.max(1e-300) && scale > 0.0 {
            return Err(LocalSolveError::ResidualTooLarge(worst / scale));
        }
        Ok(())
    };

    for &s in &symbols {
        for (i, f) in rhs.iter().enumerate() {
            v[i] = f.coeff(s);
        }
        let x = lu.solve(&v);
        check(&v, &x)?;
        for i in 0..m {
            if x[i] != 0.0 {
                out[i].add_term(s, x[i]);
            }
        }
    }
    for (i, f) in rhs.iter().enumerate() {
        v[i] = f.constant;
    }
    let x = lu.solve(&v);
    check(&v, &x)?;
    for i in 0..m {
        out[i].constant = x[i];
    }
    for f in &mut out {
        f.prune(PRUNE_REL);
    }
    Ok(out)
}
