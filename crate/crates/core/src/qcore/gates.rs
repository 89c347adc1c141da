//! Standard gate matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use super::CMatrix;
use crate::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn h() -> CMatrix {
    CMatrix::from_real(2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2])
}

pub fn x() -> CMatrix {
    CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn y() -> CMatrix {
    CMatrix::from_vec(2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn z() -> CMatrix {
    CMatrix::from_real(2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn s() -> CMatrix {
    CMatrix::from_vec(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])
}

pub fn sdg() -> CMatrix {
    s().adjoint()
}

pub fn t() -> CMatrix {
    let w = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    CMatrix::from_vec(2, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), w])
}

pub fn rx(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_vec(2, vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
}

pub fn ry(theta: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    CMatrix::from_real(2, &[co, -s, s, co])
}

pub fn rz(theta: f64) -> CMatrix {
    CMatrix::from_vec(
        2,
        vec![
            C64::from_polar(1.0, -theta / 2.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            C64::from_polar(1.0, theta / 2.0),
        ],
    )
}

/// Two-qubit swap.
pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 2)] = c(1.0, 0.0);
    m[(2, 1)] = c(1.0, 0.0);
    m[(3, 3)] = c(1.0, 0.0);
    m
}

/// `I - 2|v><v|` for a unit vector `v`.
pub fn reflection(v: &[C64]) -> CMatrix {
    CMatrix::identity(v.len()).sub(&CMatrix::outer(v, v).scale(c(2.0, 0.0)))
}

/// Looks up a named gate together with its parameter count.
pub fn by_name(name: &str, params: &[f64]) -> Option<CMatrix> {
    let m = match (name, params) {
        ("h", []) => h(),
        ("x", []) => x(),
        ("y", []) => y(),
        ("z", []) => z(),
        ("s", []) => s(),
        ("sdg", []) => sdg(),
        ("t", []) => t(),
        ("swap", []) => swap(),
        ("rx", [a]) => rx(*a),
        ("ry", [a]) => ry(*a),
        ("rz", [a]) => rz(*a),
        _ => return None,
    };
    Some(m)
}
