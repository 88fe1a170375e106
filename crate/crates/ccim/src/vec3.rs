//! Tiny fixed-size vector/matrix helpers used throughout the crate.

pub type V3 = [f64; 3];
pub type M3 = [[f64; 3]; 3];

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: V3, c: f64) -> V3 {
    [a[0] * c, a[1] * c, a[2] * c]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn axpy(y: &mut V3, c: f64, x: V3) {
    for k in 0..3 {
        y[k] += c * x[k];
    }
}

/// y = M x
pub fn matvec(m: &M3, x: V3) -> V3 {
    [dot(m[0], x), dot(m[1], x), dot(m[2], x)]
}

/// y = M^T x
pub fn mat_t_vec(m: &M3, x: V3) -> V3 {
    [
        m[0][0] * x[0] + m[1][0] * x[1] + m[2][0] * x[2],
        m[0][1] * x[0] + m[1][1] * x[1] + m[2][1] * x[2],
        m[0][2] * x[0] + m[1][2] * x[1] + m[2][2] * x[2],
    ]
}

/// a^T M b
pub fn quad_form(a: V3, m: &M3, b: V3) -> f64 {
    dot(a, matvec(m, b))
}

pub fn outer(a: V3, b: V3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * b[j];
        }
    }
    m
}

pub fn mat_add_scaled(m: &mut M3, c: f64, d: &M3) {
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += c * d[i][j];
        }
    }
}
