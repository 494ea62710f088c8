//! Small dense complex linear algebra on the four-component coin space.
//!
//! Everything here works on fixed-size `nalgebra` matrices: the coin space of
//! the walk is four dimensional, so the matrix functions are computed from
//! exact spectral decompositions rather than truncated series.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix4 = Matrix4<Complex64>;
pub type ComplexMatrix2 = Matrix2<Complex64>;
pub type Spinor4 = Vector4<Complex64>;
pub type Spinor2 = Vector2<Complex64>;

/// Hermiticity tolerance accepted by the spectral routines.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Unitarity tolerance accepted by [`unitary_log`].
pub const UNITARY_TOL: f64 = 1e-10;
/// Distance from ±π below which an eigenphase is considered ambiguous.
pub const BRANCH_CUT_GUARD: f64 = 1e-6;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity2() -> ComplexMatrix2 {
    ComplexMatrix2::identity()
}

pub fn sigma_x() -> ComplexMatrix2 {
    Matrix2::new(cr(0.0), cr(1.0), cr(1.0), cr(0.0))
}

pub fn sigma_y() -> ComplexMatrix2 {
    Matrix2::new(cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0))
}

pub fn sigma_z() -> ComplexMatrix2 {
    Matrix2::new(cr(1.0), cr(0.0), cr(0.0), cr(-1.0))
}

/// `n·σ` for a real 3-vector `n`.
pub fn sigma_dot(n: [f64; 3]) -> ComplexMatrix2 {
    sigma_x() * cr(n[0]) + sigma_y() * cr(n[1]) + sigma_z() * cr(n[2])
}

/// Kronecker product with the first factor indexing 2×2 blocks:
/// `result[2i+k][2j+l] = a[i][j]·b[k][l]`.
pub fn kron2(a: &ComplexMatrix2, b: &ComplexMatrix2) -> ComplexMatrix4 {
    ComplexMatrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// Kronecker product of two 2-spinors, same block convention as [`kron2`].
pub fn kron_vec(a: &Spinor2, b: &Spinor2) -> Spinor4 {
    Spinor4::from_fn(|r, _| a[r / 2] * b[r % 2])
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &ComplexMatrix4) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(u: &ComplexMatrix4) -> f64 {
    max_abs(&(u.adjoint() * u - ComplexMatrix4::identity()))
}

pub fn anticommutator(a: &ComplexMatrix4, b: &ComplexMatrix4) -> ComplexMatrix4 {
    a * b + b * a
}

/// The walk's shift-difference operators and coin generator in the Weyl
/// representation.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub dpx: ComplexMatrix4,
    pub dpy: ComplexMatrix4,
    pub dpz: ComplexMatrix4,
    pub q: ComplexMatrix4,
}

impl OperatorSet {
    /// `ΔP_X, ΔP_Y, ΔP_Z` in axis order.
    pub fn shifts(&self) -> [&ComplexMatrix4; 3] {
        [&self.dpx, &self.dpy, &self.dpz]
    }

    /// All four members, shifts first.
    pub fn members(&self) -> [&ComplexMatrix4; 4] {
        [&self.dpx, &self.dpy, &self.dpz, &self.q]
    }

    /// `κ·ΔP`.
    pub fn kappa_dot(&self, kappa: [f64; 3]) -> ComplexMatrix4 {
        self.dpx * cr(kappa[0]) + self.dpy * cr(kappa[1]) + self.dpz * cr(kappa[2])
    }
}

/// `ΔP_X = −σ_Z⊗σ_X`, `ΔP_Y = −σ_Z⊗σ_Y`, `ΔP_Z = −σ_Z⊗σ_Z`, `Q = −σ_X⊗I`.
pub fn build_operator_set() -> OperatorSet {
    let sz = sigma_z();
    OperatorSet {
        dpx: -kron2(&sz, &sigma_x()),
        dpy: -kron2(&sz, &sigma_y()),
        dpz: -kron2(&sz, &sz),
        q: -kron2(&sigma_x(), &identity2()),
    }
}

/// Eigendecomposition of a Hermitian 4×4 matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: [f64; 4],
    /// `vectors[i]` belongs to `values[i]`; orthonormal, largest-modulus
    /// component real and positive.
    pub vectors: [Spinor4; 4],
}

impl HermitianEigen {
    /// `Σ λ_i v_i v_i^†`.
    pub fn reconstruct(&self) -> ComplexMatrix4 {
        self.map_spectrum(Complex64::from)
    }

    /// `Σ f(λ_i) v_i v_i^†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix4 {
        let mut out = ComplexMatrix4::zeros();
        for (lambda, v) in self.values.iter().zip(self.vectors.iter()) {
            out += v * v.adjoint() * f(*lambda);
        }
        out
    }
}

/// Rotate `v` so that its largest-modulus component is real and positive.
pub fn fix_gauge(v: &Spinor4) -> Spinor4 {
    let mut best = 0;
    for i in 1..4 {
        // Strictly larger by a relative margin, so near-ties resolve to the
        // lowest index deterministically.
        if v[i].norm() > v[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() == 0.0 {
        return *v;
    }
    v * (pivot.conj() / pivot.norm())
}

pub fn hermitian_eig(m: &ComplexMatrix4) -> Result<HermitianEigen> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { norm: defect });
    }
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (m + m.adjoint()) * cr(0.5);
    let eig = sym.symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| fix_gauge(&eig.eigenvectors.column(i).into_owned()));
    Ok(HermitianEigen { values, vectors })
}

/// `exp(−iH)` for Hermitian `H`.
pub fn unitary_exp(h: &ComplexMatrix4) -> Result<ComplexMatrix4> {
    let eig = hermitian_eig(h)?;
    Ok(eig.map_spectrum(|lambda| Complex64::from_polar(1.0, -lambda)))
}

/// Spectral decomposition `U = Σ e^{−iω_i} w_i w_i^†` of a unitary matrix,
/// with `ω_i ∈ (−π, π]` ascending.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    pub phases: [f64; 4],
    pub vectors: [Spinor4; 4],
}

pub fn unitary_spectrum(u: &ComplexMatrix4) -> Result<UnitarySpectrum> {
    let defect = unitarity_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { norm: defect });
    }
    let (q, t) = u.schur().unpack();
    let mut phases = [0.0; 4];
    for (i, phase) in phases.iter_mut().enumerate() {
        // U = e^{−iω}: ω = −arg λ, mapped into (−π, π].
        let w = -t[(i, i)].arg();
        *phase = if w <= -std::f64::consts::PI { w + 2.0 * std::f64::consts::PI } else { w };
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
    Ok(UnitarySpectrum {
        phases: order.map(|i| phases[i]),
        vectors: order.map(|i| fix_gauge(&q.column(i).into_owned())),
    })
}

/// Principal Hermitian logarithm: returns `H` with `U = exp(−iH)` and the
/// spectrum of `H` inside `(−π, π)`.
pub fn unitary_log(u: &ComplexMatrix4) -> Result<ComplexMatrix4> {
    let spec = unitary_spectrum(u)?;
    for &phase in &spec.phases {
        if std::f64::consts::PI - phase.abs() < BRANCH_CUT_GUARD {
            return Err(Error::BranchCut { phase, guard: BRANCH_CUT_GUARD });
        }
    }
    let mut h = ComplexMatrix4::zeros();
    for (w, v) in spec.phases.iter().zip(spec.vectors.iter()) {
        h += v * v.adjoint() * cr(*w);
    }
    // Remove the rounding-level anti-Hermitian part.
    Ok((h + h.adjoint()) * cr(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_hermitian(seed: &[f64; 16]) -> ComplexMatrix4 {
        let mut m = ComplexMatrix4::zeros();
        let mut k = 0;
        for i in 0..4 {
            m[(i, i)] = cr(seed[k]);
            k += 1;
            for j in (i + 1)..4 {
                let z = c(seed[k], seed[k + 1]);
                k += 2;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn kron_identity() {
        assert_eq!(kron2(&identity2(), &identity2()), ComplexMatrix4::identity());
    }

    #[test]
    fn kron_block_structure() {
        let m = kron2(&sigma_z(), &sigma_x());
        let sx = sigma_x();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], sx[(i, j)]);
                assert_eq!(m[(i + 2, j + 2)], -sx[(i, j)]);
                assert_eq!(m[(i, j + 2)], cr(0.0));
                assert_eq!(m[(i + 2, j)], cr(0.0));
            }
        }
    }

    #[test]
    fn kron_of_involutions_squares_to_identity() {
        let m = kron2(&sigma_x(), &sigma_y());
        assert!(max_abs(&(m * m - ComplexMatrix4::identity())) < 1e-15);
    }

    #[test]
    fn operator_set_entries_and_anticommutation() {
        let ops = build_operator_set();
        assert_eq!(ops.q[(0, 2)], cr(-1.0));
        let members = ops.members();
        for (i, a) in members.iter().enumerate() {
            assert!(max_abs(&(*a * *a - ComplexMatrix4::identity())) <= 1e-14);
            assert!(hermiticity_defect(a) <= 1e-14);
            assert!(unitarity_defect(a) <= 1e-14);
            assert!(a.trace().norm() <= 1e-14);
            for b in members.iter().skip(i + 1) {
                assert!(max_abs(&anticommutator(a, b)) <= 1e-14);
            }
        }
    }

    #[test]
    fn product_of_all_four_is_diagonal_phase_matrix() {
        let ops = build_operator_set();
        let p = ops.dpx * ops.dpy * ops.dpz * ops.q;
        // Off-diagonal pattern: every row has exactly one unit-modulus entry.
        for r in 0..4 {
            let mags: Vec<f64> = (0..4).map(|col| p[(r, col)].norm()).collect();
            let ones = mags.iter().filter(|m| (*m - 1.0).abs() < 1e-14).count();
            let zeros = mags.iter().filter(|m| **m < 1e-14).count();
            assert_eq!((ones, zeros), (1, 3));
        }
        // Square of a product of four anticommuting involutions is +I.
        assert!(max_abs(&(p * p - ComplexMatrix4::identity())) < 1e-14);
    }

    #[test]
    fn eig_of_diagonal() {
        let m = ComplexMatrix4::from_diagonal(&Vector4::new(cr(3.0), cr(1.0), cr(4.0), cr(2.0)));
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.values, [1.0, 2.0, 3.0, 4.0]);
        let expected_index = [1, 3, 0, 2];
        for (v, idx) in eig.vectors.iter().zip(expected_index) {
            for k in 0..4 {
                let want = if k == idx { 1.0 } else { 0.0 };
                assert!((v[k] - cr(want)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eig_of_mass_only_hamiltonian() {
        let ops = build_operator_set();
        let h = ops.q * cr(0.5);
        let eig = hermitian_eig(&h).unwrap();
        for (got, want) in eig.values.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = ComplexMatrix4::identity();
        m[(0, 1)] = cr(1.0);
        match hermitian_eig(&m) {
            Err(Error::NotHermitian { norm }) => assert!((norm - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = unitary_exp(&ComplexMatrix4::zeros()).unwrap();
        assert!(max_abs(&(u - ComplexMatrix4::identity())) < 1e-15);
    }

    #[test]
    fn exp_of_involutions() {
        let ops = build_operator_set();
        let u = unitary_exp(&(ops.q * cr(PI))).unwrap();
        assert!(max_abs(&(u + ComplexMatrix4::identity())) < 1e-12);
        let u = unitary_exp(&(ops.dpz * cr(PI / 2.0))).unwrap();
        assert!(max_abs(&(u - ops.dpz * c(0.0, -1.0))) < 1e-12);
        for theta in [0.1, 0.7, 2.3] {
            let u = unitary_exp(&(ops.q * cr(theta))).unwrap();
            let closed = ComplexMatrix4::identity() * cr(theta.cos()) - ops.q * c(0.0, theta.sin());
            assert!(max_abs(&(u - closed)) < 1e-12);
            assert!(unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        let h = unitary_log(&ComplexMatrix4::identity()).unwrap();
        assert!(max_abs(&h) < 1e-15);
    }

    #[test]
    fn log_inverts_exp_on_coin() {
        let ops = build_operator_set();
        let u = unitary_exp(&(ops.q * cr(0.3))).unwrap();
        let h = unitary_log(&u).unwrap();
        assert!(max_abs(&(h - ops.q * cr(0.3))) < 1e-12);
    }

    #[test]
    fn log_rejects_branch_cut() {
        let u = -ComplexMatrix4::identity();
        assert!(matches!(unitary_log(&u), Err(Error::BranchCut { .. })));
    }

    #[test]
    fn log_rejects_non_unitary() {
        let u = ComplexMatrix4::identity() * cr(1.1);
        assert!(matches!(unitary_log(&u), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn gauge_makes_largest_component_real_positive() {
        let v = Spinor4::new(c(0.1, 0.2), c(0.0, -0.9), c(0.3, 0.0), c(0.1, 0.1));
        let g = fix_gauge(&v);
        assert!(g[1].im.abs() < 1e-15 && g[1].re > 0.0);
        assert!((g.norm() - v.norm()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn eig_reconstructs_random_hermitian(seed in proptest::array::uniform16(-1.0f64..1.0)) {
            let m = random_hermitian(&seed);
            let eig = hermitian_eig(&m).unwrap();
            prop_assert!(max_abs(&(eig.reconstruct() - m)) <= 1e-10);
            for i in 0..4 {
                let residual = m * eig.vectors[i] - eig.vectors[i] * cr(eig.values[i]);
                prop_assert!(residual.norm() <= 1e-10);
                for j in 0..4 {
                    let overlap = eig.vectors[i].dotc(&eig.vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((overlap - cr(want)).norm() <= 1e-10);
                }
            }
            prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn log_inverts_exp(seed in proptest::array::uniform16(-0.4f64..0.4)) {
            // Row sums bounded by 0.4 + 3·0.4·√2 < π keep the spectrum off the cut.
            let m = random_hermitian(&seed);
            let u = unitary_exp(&m).unwrap();
            prop_assert!(unitarity_defect(&u) <= 1e-12);
            let back = unitary_log(&u).unwrap();
            prop_assert!(max_abs(&(back - m)) <= 1e-10);
        }
    }
}
