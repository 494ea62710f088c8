//! Effective Hamiltonian of the walk and its spin- and direction-dependent
//! energy shifts.
//!
//! Identifying `U(κ) = exp(−i(Δt/ħ)(H₀ + H₁ + …))` and matching powers of
//! `(κ, θ)` gives the Dirac Hamiltonian `H₀` at first order and the
//! correction `H₁` at second order. All Hamiltonians here are dimensionless
//! (units of ħ/Δt), functions of `κ` and `θ` only.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinor::{
    build_operator_set, c, cr, hermitian_eig, identity2, kron2, kron_vec, max_abs, sigma_dot,
    sigma_x, sigma_y, sigma_z, unitary_log, ComplexMatrix4, Spinor2, Spinor4,
};
use crate::walk::{step_unitary, WalkParameters};

/// `H₀ = −θ σ_X⊗I + σ_Z⊗(κ·σ)`; eigenvalues `±√(θ²+κ²)`, each doubly degenerate.
pub fn build_h0(params: &WalkParameters) -> ComplexMatrix4 {
    let theta = params.theta();
    kron2(&sigma_x(), &identity2()) * cr(-theta) + kron2(&sigma_z(), &sigma_dot(params.kappa()))
}

/// Second-order correction
/// `H₁ = I⊗(κ_yκ_z σ_X − κ_xκ_z σ_Y + κ_xκ_y σ_Z) − θ σ_Y⊗(κ·σ)`.
///
/// This is `−i Σ_{i<j} κ_iκ_j ΔP_iΔP_j + iθ (κ·ΔP) Q`, the quadratic term of
/// `i log U(κ)` for the product ordering used by [`step_unitary`].
pub fn build_h1(params: &WalkParameters) -> ComplexMatrix4 {
    let [kx, ky, kz] = params.kappa();
    let theta = params.theta();
    kron2(&identity2(), &sigma_dot([ky * kz, -kx * kz, kx * ky]))
        - kron2(&sigma_y(), &sigma_dot(params.kappa())) * cr(theta)
}

/// Both sides of the second-order matching identity
///
/// `½H₀² + iH₁ = ½(κ²+θ²) I + θ Q(κ·ΔP) + Σ_{i<j} κ_iκ_j ΔP_iΔP_j`,
///
/// whose right-hand side is minus the quadratic Taylor coefficient of `U(κ)`.
pub fn second_order_matching_sides(params: &WalkParameters) -> (ComplexMatrix4, ComplexMatrix4) {
    let ops = build_operator_set();
    let h0 = build_h0(params);
    let h1 = build_h1(params);
    let lhs = h0 * h0 * cr(0.5) + h1 * c(0.0, 1.0);

    let [kx, ky, kz] = params.kappa();
    let theta = params.theta();
    let k2 = kx * kx + ky * ky + kz * kz;
    let rhs = ComplexMatrix4::identity() * cr(0.5 * (k2 + theta * theta))
        + ops.q * ops.kappa_dot(params.kappa()) * cr(theta)
        + ops.dpx * ops.dpy * cr(kx * ky)
        + ops.dpx * ops.dpz * cr(kx * kz)
        + ops.dpy * ops.dpz * cr(ky * kz);
    (lhs, rhs)
}

/// `max |LHS − RHS|` of the matching identity; zero up to rounding.
pub fn verify_second_order_matching(params: &WalkParameters) -> f64 {
    let (lhs, rhs) = second_order_matching_sides(params);
    max_abs(&(lhs - rhs))
}

/// `H_eff = i log U(κ)` on the principal branch (independent of the expansion).
pub fn oracle_effective_h(params: &WalkParameters) -> Result<ComplexMatrix4> {
    unitary_log(&step_unitary(params))
}

/// `H₀` and `H₁` together with the parameters they were built from.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub h0: ComplexMatrix4,
    pub h1: ComplexMatrix4,
    pub params: WalkParameters,
}

impl EffectiveHamiltonian {
    pub fn new(params: &WalkParameters) -> Self {
        Self { h0: build_h0(params), h1: build_h1(params), params: *params }
    }

    /// `H₀ + H₁`.
    pub fn truncated(&self) -> ComplexMatrix4 {
        self.h0 + self.h1
    }

    /// `max |i log U − H₀ − H₁|`, third order in `(κ, θ)`.
    pub fn oracle_remainder(&self) -> Result<f64> {
        Ok(max_abs(&(oracle_effective_h(&self.params)? - self.truncated())))
    }
}

/// Phase convention of [`Eigensystem`].
///
/// With `κ̂ = (sin β cos γ, sin β sin γ, cos β)`:
/// `φ₊ = (cos β/2, e^{iγ} sin β/2)`, `φ₋ = (−sin β/2, e^{iγ} cos β/2)`, and
/// the `ψ` spinors are real with `⟨ψ₊₊|ψ₋₊⟩ = θ/E₀ ≥ 0`. In this gauge
/// `⟨v₁|H₁|v₂⟩ = −(θ/E₀)·(κ_⊥/κ)·(κ_xκ_y − iκκ_z)` with `κ_⊥² = κ_x²+κ_y²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Constructive,
}

impl Gauge {
    pub fn tag(&self) -> &'static str {
        match self {
            Gauge::Constructive => "constructive: phi+=(cos b/2, e^{ig} sin b/2), phi-=(-sin b/2, e^{ig} cos b/2), psi real",
        }
    }
}

/// Eigenvectors of `H₀` built from the `Φ` and `Ψ±` factorization:
/// `v₁ = ψ₊₊⊗φ₊`, `v₂ = ψ₋₊⊗φ₋` (energy `+E₀`), `v₃ = ψ₊₋⊗φ₊`,
/// `v₄ = ψ₋₋⊗φ₋` (energy `−E₀`).
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub v1: Spinor4,
    pub v2: Spinor4,
    pub v3: Spinor4,
    pub v4: Spinor4,
    pub e0: f64,
    pub phi_plus: Spinor2,
    pub phi_minus: Spinor2,
    /// `ψ₊₊, ψ₋₊, ψ₊₋, ψ₋₋`
    pub psi: [Spinor2; 4],
    pub gauge: Gauge,
}

impl Eigensystem {
    pub fn vectors(&self) -> [&Spinor4; 4] {
        [&self.v1, &self.v2, &self.v3, &self.v4]
    }

    /// Signs of the energies of `v₁…v₄`.
    pub const SIGNS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
}

pub fn build_eigensystem(params: &WalkParameters) -> Result<Eigensystem> {
    let kappa = params.kappa_norm();
    if kappa == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    let [kx, ky, kz] = params.kappa();
    let e0 = params.e0();

    let beta = (kz / kappa).clamp(-1.0, 1.0).acos();
    let gamma = ky.atan2(kx);
    let (hb_sin, hb_cos) = (beta / 2.0).sin_cos();
    let azimuth = Complex64::from_polar(1.0, gamma);
    let phi_plus = Spinor2::new(cr(hb_cos), azimuth * hb_sin);
    let phi_minus = Spinor2::new(cr(-hb_sin), azimuth * hb_cos);

    // Ψ± = −(θ/E₀)σ_X ± (κ/E₀)σ_Z have Bloch vectors (∓… ) in the x–z plane;
    // α is the polar angle of (−θ, 0, κ).
    let alpha = params.theta().atan2(kappa);
    let (ha_sin, ha_cos) = (alpha / 2.0).sin_cos();
    let psi_pp = Spinor2::new(cr(ha_cos), cr(-ha_sin));
    let psi_mp = Spinor2::new(cr(ha_sin), cr(-ha_cos));
    let psi_pm = Spinor2::new(cr(ha_sin), cr(ha_cos));
    let psi_mm = Spinor2::new(cr(ha_cos), cr(ha_sin));

    Ok(Eigensystem {
        v1: kron_vec(&psi_pp, &phi_plus),
        v2: kron_vec(&psi_mp, &phi_minus),
        v3: kron_vec(&psi_pm, &phi_plus),
        v4: kron_vec(&psi_mm, &phi_minus),
        e0,
        phi_plus,
        phi_minus,
        psi: [psi_pp, psi_mp, psi_pm, psi_mm],
        gauge: Gauge::Constructive,
    })
}

/// Matrix elements of `H₁` in the positive-energy basis `{v₁, v₂}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Elements {
    pub d11: f64,
    pub d22: f64,
    pub d12: Complex64,
}

impl H1Elements {
    /// `|a|²d₁₁ + |b|²d₂₂ + 2 Re(a* b d₁₂)`.
    pub fn expectation(&self, spin: &Spinor2) -> f64 {
        let (a, b) = (spin[0], spin[1]);
        a.norm_sqr() * self.d11 + b.norm_sqr() * self.d22 + 2.0 * (a.conj() * b * self.d12).re
    }
}

/// `⟨v_i|H₁|v_j⟩` by direct sandwiching.
pub fn h1_matrix_elements_numeric(params: &WalkParameters) -> Result<H1Elements> {
    let eig = build_eigensystem(params)?;
    let h1 = build_h1(params);
    Ok(H1Elements {
        d11: eig.v1.dotc(&(h1 * eig.v1)).re,
        d22: eig.v2.dotc(&(h1 * eig.v2)).re,
        d12: eig.v1.dotc(&(h1 * eig.v2)),
    })
}

/// `⟨v_i|H₁|v_j⟩` evaluated factor by factor on `v = ψ⊗φ`, applying
/// `(κ·σ)φ± = ±κφ±` exactly.
///
/// The `θσ_Y⊗(κ·σ)` part of `H₁` is of order `θκ` but drops out of the
/// positive-energy block. A plain sandwich leaves a residue of order `εθκ`
/// there, which dominates when `θ ≫ κ`. This form avoids that residue.
pub fn h1_matrix_elements_factorized(params: &WalkParameters) -> Result<H1Elements> {
    let eig = build_eigensystem(params)?;
    let [kx, ky, kz] = params.kappa();
    let w = sigma_dot([ky * kz, -kx * kz, kx * ky]);
    let theta_kappa = params.theta() * params.kappa_norm();
    let sy = sigma_y();
    let (psi1, psi2) = (eig.psi[0], eig.psi[1]);
    let (phi1, phi2) = (eig.phi_plus, eig.phi_minus);
    let diagonal = |psi: &Spinor2, phi: &Spinor2, sign: f64| {
        (psi.dotc(psi) * phi.dotc(&(w * phi)) - psi.dotc(&(sy * psi)) * cr(sign * theta_kappa)).re
    };
    Ok(H1Elements {
        d11: diagonal(&psi1, &phi1, 1.0),
        d22: diagonal(&psi2, &phi2, -1.0),
        d12: psi1.dotc(&psi2) * phi1.dotc(&(w * phi2)),
    })
}

/// Closed forms of the positive-energy matrix elements of `H₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormElements {
    /// `κ_xκ_yκ_z / κ`
    pub d11: f64,
    pub d22: f64,
    /// `(θ/E₀)·(κ_⊥/κ)·|κ_xκ_y − iκκ_z|`, gauge independent.
    pub d12_modulus: f64,
    /// The off-diagonal element in the [`Gauge::Constructive`] gauge.
    pub d12: Complex64,
}

pub fn h1_matrix_elements_closed_form(params: &WalkParameters) -> Result<ClosedFormElements> {
    let kappa = params.kappa_norm();
    if kappa == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    let [kx, ky, kz] = params.kappa();
    let theta = params.theta();
    let d11 = kx * ky * kz / kappa;
    let mass_factor = (theta * theta / (theta * theta + kappa * kappa)).sqrt();
    let transverse = ((kappa * kappa - kz * kz).max(0.0) / (kappa * kappa)).sqrt();
    let inner = c(kx * ky, -kappa * kz);
    Ok(ClosedFormElements {
        d11,
        d22: -d11,
        d12_modulus: mass_factor * transverse * inner.norm(),
        d12: -inner * (mass_factor * transverse),
    })
}

fn check_spin(spin: &Spinor2) -> Result<()> {
    let norm_sq = spin.norm_squared();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized { norm_sq });
    }
    Ok(())
}

/// First-order energy shift `⟨s|H₁|s⟩` of `s = a v₁ + b v₂`.
pub fn energy_shift(params: &WalkParameters, spin: &Spinor2) -> Result<f64> {
    check_spin(spin)?;
    Ok(h1_matrix_elements_factorized(params)?.expectation(spin))
}

/// Eigenvalues (ascending) of `H₁` projected onto the numerically computed
/// positive-energy eigenspace of `H₀`; independent of the `v₁, v₂` basis.
pub fn positive_subspace_corrections(params: &WalkParameters) -> Result<[f64; 2]> {
    let eig = hermitian_eig(&build_h0(params))?;
    let h1 = build_h1(params);
    let (w1, w2) = (eig.vectors[2], eig.vectors[3]);
    let a = w1.dotc(&(h1 * w1)).re;
    let d = w2.dotc(&(h1 * w2)).re;
    let b = w1.dotc(&(h1 * w2));
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    Ok([mean - radius, mean + radius])
}
