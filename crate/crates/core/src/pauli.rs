//! Pauli algebra, the Pauli map, the ▷ contraction and the spin connection.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::background::{eps, BgJets, Coupling, FrameConn};
use crate::error::{CqmError, Result};
use crate::jet::{Jet, NCOEFF};

pub type SpinMatrix = Matrix2<Complex64>;

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity() -> SpinMatrix {
    SpinMatrix::identity()
}

/// Pauli matrix `σ_k`, `k` in 1..=3; `σ₀ = 1`.
pub fn sigma(k: usize) -> SpinMatrix {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match k {
        0 => SpinMatrix::new(o, z, z, o),
        1 => SpinMatrix::new(z, o, o, z),
        2 => SpinMatrix::new(z, -i, i, z),
        3 => SpinMatrix::new(o, z, z, -o),
        _ => panic!("sigma index {k}"),
    }
}

/// `ξ₀ = i·1`, `ξ_k = −(i/2)σ_k`.
pub fn xi(k: usize) -> SpinMatrix {
    if k == 0 {
        identity() * c(0.0, 1.0)
    } else {
        sigma(k) * c(0.0, -0.5)
    }
}

/// The fixed Pauli-basis matrices and the ε table.
#[derive(Clone, Debug)]
pub struct PauliConstants {
    pub sigma: [SpinMatrix; 3],
    pub xi: [SpinMatrix; 4],
    pub eps: [[[f64; 3]; 3]; 3],
}

pub fn pauli_constants() -> PauliConstants {
    PauliConstants {
        sigma: [sigma(1), sigma(2), sigma(3)],
        xi: [xi(0), xi(1), xi(2), xi(3)],
        eps: std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| eps(i, j, k)))),
    }
}

pub fn commutator(a: &SpinMatrix, b: &SpinMatrix) -> SpinMatrix {
    a * b - b * a
}

/// `g̃(A, B) = −2 Tr(A∘B)`.
pub fn gtilde(a: &SpinMatrix, b: &SpinMatrix) -> Complex64 {
    (a * b).trace() * -2.0
}

pub fn is_anti_hermitian(m: &SpinMatrix) -> bool {
    (m + m.adjoint()).iter().all(|z| z.norm() <= TOL)
}

pub fn is_hermitian(m: &SpinMatrix) -> bool {
    (m - m.adjoint()).iter().all(|z| z.norm() <= TOL)
}

pub fn is_traceless(m: &SpinMatrix) -> bool {
    m.trace().norm() <= TOL
}

/// `Σ(v) = v^a ξ_a`.
pub fn pauli_map(v: [f64; 3]) -> SpinMatrix {
    xi(1) * c(v[0], 0.0) + xi(2) * c(v[1], 0.0) + xi(3) * c(v[2], 0.0)
}

/// Inverse of [`pauli_map`] on traceless anti-Hermitian matrices.
pub fn pauli_unmap(m: &SpinMatrix) -> Result<[f64; 3]> {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if (m + m.adjoint()).iter().any(|z| z.norm() > TOL * scale) || m.trace().norm() > TOL * scale {
        return Err(CqmError::NotInL0);
    }
    Ok([1, 2, 3].map(|a| gtilde(m, &xi(a)).re))
}

/// `(a×b)_k = ε_{ijk} a^i b^j`.
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `(▷A)_k = A^{ij} ε_{ijk}`.
pub fn triangle(a: &[[f64; 3]; 3]) -> Result<[f64; 3]> {
    let scale = a.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[i][j] + a[j][i]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(CqmError::NotAntisymmetric(worst));
    }
    Ok(std::array::from_fn(|k| {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i][j] * eps(i, j, k);
            }
        }
        s
    }))
}

/// Rotation generators `(T_i)^k_j = ε_{ijk}`.
pub fn so3_generator(i: usize) -> [[f64; 3]; 3] {
    std::array::from_fn(|k| std::array::from_fn(|j| eps(i, j, k)))
}

/// Coefficients `C_λ^i` (trace-free gauge, `C_λ^0 = 0`), indexed `[λ][i]`.
pub type SpinConn = [[Jet; 3]; 4];

/// Least-squares pseudo-inverse of the map `C^i ↦ C^i ε_{ijk}` (rows `3k + j`).
fn eps_pinv() -> &'static (DMatrix<f64>, DMatrix<f64>) {
    static P: OnceLock<(DMatrix<f64>, DMatrix<f64>)> = OnceLock::new();
    P.get_or_init(|| {
        let m = DMatrix::from_fn(9, 3, |r, i| eps(i, r % 3, r / 3));
        let pinv = m.clone().pseudo_inverse(1e-14).expect("svd of constant matrix");
        (m, pinv)
    })
}

/// Solves `C_λ^i ε_{ij}^k = K̃_λ^k_j` coefficient by coefficient.
pub fn solve_spin_connection(kt: &FrameConn) -> Result<SpinConn> {
    let (m, pinv) = eps_pinv();
    let order = kt[0][0][0].order();
    let mut out = [[Jet::zero(order); 3]; 4];
    let mut worst: f64 = 0.0;
    for (l, ktl) in kt.iter().enumerate() {
        let rhs = DMatrix::from_fn(9, NCOEFF, |r, s| ktl[r / 3][r % 3].coeffs()[s]);
        let sol = pinv * &rhs;
        let resid = m * &sol - &rhs;
        let scale = rhs.amax().max(1.0);
        worst = worst.max(resid.amax() / scale);
        for i in 0..3 {
            let mut cs = [0.0; NCOEFF];
            for (s, v) in cs.iter_mut().enumerate() {
                *v = sol[(i, s)];
            }
            out[l][i] = Jet::from_coeffs(cs, order)?;
        }
    }
    if worst > 1e-10 {
        return Err(CqmError::InconsistentSystem(worst));
    }
    Ok(out)
}

/// Spin connection jets built from the chosen restricted connection (one order below the fields).
pub fn spin_connection_from(b: &BgJets, which: Coupling) -> Result<SpinConn> {
    solve_spin_connection(&b.ktilde(which)?)
}

/// Induced `C̃_λ^k_j = C_λ^i ε_{ijk}`, indexed `[λ][k][j]`.
pub fn ctilde(cn: &SpinConn) -> FrameConn {
    let n = cn[0][0].order();
    std::array::from_fn(|l| {
        std::array::from_fn(|k| {
            std::array::from_fn(|j| {
                let mut s = Jet::zero(n);
                for i in 0..3 {
                    let e = eps(i, j, k);
                    if e != 0.0 {
                        s += cn[l][i].scale(e);
                    }
                }
                s
            })
        })
    })
}

/// `R_{λμ}^k = −∂_λC_μ^k + ∂_μC_λ^k + C_λ^i C_μ^j ε_{ijk}`, indexed `[λ][μ][k]`.
pub fn spin_curvature(cn: &SpinConn) -> [[[Jet; 3]; 4]; 4] {
    let n = cn[0][0].order();
    assert!(n > 0, "spin curvature needs first derivatives");
    let mut out = [[[Jet::zero(n - 1); 3]; 4]; 4];
    for l in 0..4 {
        for m in l + 1..4 {
            for k in 0..3 {
                let mut s = cn[l][k].d(m) - cn[m][k].d(l);
                for i in 0..3 {
                    for j in 0..3 {
                        let e = eps(i, j, k);
                        if e != 0.0 {
                            s += (cn[l][i] * cn[m][j]).scale(e);
                        }
                    }
                }
                out[l][m][k] = s;
                out[m][l][k] = -s;
            }
        }
    }
    out
}

/// Matrix of `C_λ^i ξ_i` at the base point.
pub fn spin_matrix(cl: &[Jet; 3]) -> SpinMatrix {
    pauli_map([cl[0].value(), cl[1].value(), cl[2].value()])
}
