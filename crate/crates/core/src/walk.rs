//! The discrete-time walk: momentum-space step unitary, its exact
//! dispersion, and a position-space walker on a periodic cubic grid.
//!
//! Momentum states follow the shift-eigenstate convention
//! `|κ⟩ = Σ_r e^{−iκ·r} |r⟩`, on which the +1 shift acts as `e^{iκ}`. With
//! that labelling a lattice plane wave `e^{−iκ·r} χ` is mapped by one walk
//! step exactly to `e^{−iκ·r} U(κ) χ`, and a packet on dispersion branch `ω`
//! drifts with position-space velocity `−∇_κ ω`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spinor::{build_operator_set, c, cr, unitary_spectrum, ComplexMatrix4, Spinor4};

/// Physical inputs from which the dimensionless walk parameters are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalInputs {
    /// kg
    pub mass: f64,
    /// kg·m/s, lattice frame
    pub momentum: [f64; 3],
    /// m/s
    pub c: f64,
    /// J·s
    pub hbar: f64,
    /// lattice spacing, m
    pub dx: f64,
}

/// Dimensionless walk inputs: `κ = kΔx` and `θ = mcΔx/ħ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkParameters {
    kappa: [f64; 3],
    theta: f64,
    physical: Option<PhysicalInputs>,
}

impl WalkParameters {
    pub fn new(kappa: [f64; 3], theta: f64) -> Result<Self> {
        if kappa.iter().any(|k| !k.is_finite()) || !theta.is_finite() {
            return Err(Error::InvalidParameters("non-finite κ or θ".into()));
        }
        if let Some(k) = kappa.iter().find(|k| k.abs() > PI) {
            return Err(Error::InvalidParameters(format!(
                "κ component {k} lies outside the Brillouin zone [−π, π]"
            )));
        }
        if theta < 0.0 {
            return Err(Error::InvalidParameters(format!("θ = {theta} must be ≥ 0")));
        }
        Ok(Self { kappa, theta, physical: None })
    }

    /// `κ = pΔx/ħ` (componentwise) and `θ = mcΔx/ħ`.
    pub fn from_physical(inputs: PhysicalInputs) -> Result<Self> {
        let PhysicalInputs { mass, momentum, c, hbar, dx } = inputs;
        for (name, v) in [("mass", mass), ("c", c), ("hbar", hbar), ("dx", dx)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameters(format!("{name} = {v} must be positive")));
            }
        }
        let kappa = momentum.map(|p| p * dx / hbar);
        let theta = mass * c * dx / hbar;
        let mut params = Self::new(kappa, theta)?;
        params.physical = Some(inputs);
        Ok(params)
    }

    pub fn kappa(&self) -> [f64; 3] {
        self.kappa
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn physical(&self) -> Option<&PhysicalInputs> {
        self.physical.as_ref()
    }

    /// `|κ|`
    pub fn kappa_norm(&self) -> f64 {
        norm3(self.kappa)
    }

    /// `E₀ = √(θ² + κ²)` in units of ħ/Δt.
    pub fn e0(&self) -> f64 {
        self.kappa_norm().hypot(self.theta)
    }

    /// Same direction, `κ` and `θ` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.kappa.map(|k| k * s), self.theta * s)
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `exp(iα A)` for an involution `A` (`A² = I`).
fn involution_exp(a: &ComplexMatrix4, alpha: f64) -> ComplexMatrix4 {
    ComplexMatrix4::identity() * cr(alpha.cos()) + a * c(0.0, alpha.sin())
}

/// `e^{−iθQ}`.
pub fn coin_unitary(theta: f64) -> ComplexMatrix4 {
    involution_exp(&build_operator_set().q, -theta)
}

/// `U(κ) = e^{iκ_x ΔP_X} e^{iκ_y ΔP_Y} e^{iκ_z ΔP_Z} e^{−iθQ}`.
pub fn step_unitary(params: &WalkParameters) -> ComplexMatrix4 {
    let ops = build_operator_set();
    let [kx, ky, kz] = params.kappa;
    involution_exp(&ops.dpx, kx)
        * involution_exp(&ops.dpy, ky)
        * involution_exp(&ops.dpz, kz)
        * involution_exp(&ops.q, -params.theta)
}

/// Eigenphases `ω_i` of `U(κ) = Σ e^{−iω_i} |w_i⟩⟨w_i|`, ascending in (−π, π].
pub fn exact_dispersion(params: &WalkParameters) -> Result<[f64; 4]> {
    Ok(unitary_spectrum(&step_unitary(params))?.phases)
}

fn fold_into_zone(k: f64) -> f64 {
    if k > PI {
        k - 2.0 * PI
    } else if k < -PI {
        k + 2.0 * PI
    } else {
        k
    }
}

/// Central-difference gradient `∇_κ ω_branch`, branches indexed in ascending
/// order of eigenphase.
pub fn dispersion_gradient(params: &WalkParameters, branch: usize, h: f64) -> Result<[f64; 3]> {
    if branch > 3 {
        return Err(Error::InvalidArgument(format!("branch {branch} out of range 0..4")));
    }
    let mut grad = [0.0; 3];
    for (axis, g) in grad.iter_mut().enumerate() {
        let mut plus = params.kappa;
        let mut minus = params.kappa;
        // U(κ) is 2π-periodic in every component, so stencil points past
        // the zone edge are folded back.
        plus[axis] = fold_into_zone(plus[axis] + h);
        minus[axis] = fold_into_zone(minus[axis] - h);
        let wp = exact_dispersion(&WalkParameters::new(plus, params.theta)?)?[branch];
        let wm = exact_dispersion(&WalkParameters::new(minus, params.theta)?)?[branch];
        *g = (wp - wm) / (2.0 * h);
    }
    Ok(grad)
}

/// Four-component amplitudes on a periodic `N×N×N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    grid_size: usize,
    amplitudes: Vec<Spinor4>,
    step_count: u64,
}

/// Wavevector of grid mode `n` in (−π, π].
pub fn grid_kappa(grid_size: usize, mode: usize) -> f64 {
    let n = grid_size as i64;
    let m = mode as i64 % n;
    let wrapped = if 2 * m > n { m - n } else { m };
    2.0 * PI * wrapped as f64 / n as f64
}

fn check_grid_size(grid_size: usize) -> Result<()> {
    if grid_size < 2 || !grid_size.is_power_of_two() {
        return Err(Error::InvalidState(format!(
            "grid size {grid_size} must be a power of two ≥ 2"
        )));
    }
    Ok(())
}

fn check_unit_spin(spin: &Spinor4) -> Result<()> {
    let norm_sq = spin.norm_squared();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized { norm_sq });
    }
    Ok(())
}

/// Minimum-image displacement in (−N/2, N/2].
fn wrap_displacement(d: f64, n: f64) -> f64 {
    let mut w = d.rem_euclid(n);
    if w > n / 2.0 {
        w -= n;
    }
    w
}

impl LatticeState {
    pub fn from_amplitudes(grid_size: usize, amplitudes: Vec<Spinor4>) -> Result<Self> {
        check_grid_size(grid_size)?;
        if amplitudes.len() != grid_size.pow(3) {
            return Err(Error::InvalidState(format!(
                "expected {} sites, got {}",
                grid_size.pow(3),
                amplitudes.len()
            )));
        }
        let state = Self { grid_size, amplitudes, step_count: 0 };
        let norm = state.norm_squared();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("total norm {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Point source: all amplitude on one site.
    pub fn point(grid_size: usize, site: [usize; 3], spin: Spinor4) -> Result<Self> {
        check_grid_size(grid_size)?;
        check_unit_spin(&spin)?;
        let mut amplitudes = vec![Spinor4::zeros(); grid_size.pow(3)];
        let n = grid_size;
        amplitudes[Self::index_of(n, site.map(|s| s % n))] = spin;
        Ok(Self { grid_size, amplitudes, step_count: 0 })
    }

    /// Momentum eigenstate `e^{−iκ·r} χ / N^{3/2}` with `κ = 2π·mode/N`.
    pub fn plane_wave(grid_size: usize, mode: [usize; 3], spin: Spinor4) -> Result<Self> {
        check_grid_size(grid_size)?;
        check_unit_spin(&spin)?;
        let n = grid_size;
        let kappa = mode.map(|m| grid_kappa(n, m));
        let scale = 1.0 / (n.pow(3) as f64).sqrt();
        let amplitudes = (0..n.pow(3))
            .map(|idx| {
                let r = Self::coords_of(n, idx);
                let phase = -(kappa[0] * r[0] as f64 + kappa[1] * r[1] as f64 + kappa[2] * r[2] as f64);
                spin * Complex64::from_polar(scale, phase)
            })
            .collect();
        Ok(Self { grid_size, amplitudes, step_count: 0 })
    }

    #[inline]
    pub fn index_of(n: usize, r: [usize; 3]) -> usize {
        (r[0] * n + r[1]) * n + r[2]
    }

    #[inline]
    pub fn coords_of(n: usize, idx: usize) -> [usize; 3] {
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn amplitudes(&self) -> &[Spinor4] {
        &self.amplitudes
    }

    pub fn site(&self, r: [usize; 3]) -> &Spinor4 {
        &self.amplitudes[Self::index_of(self.grid_size, r)]
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|s| s.norm_squared()).sum()
    }

    /// Probability-weighted mean position, using minimum-image displacements
    /// from `origin`.
    pub fn position_expectation(&self, origin: [f64; 3]) -> [f64; 3] {
        let n = self.grid_size;
        let nf = n as f64;
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for (idx, s) in self.amplitudes.iter().enumerate() {
            let w = s.norm_squared();
            if w == 0.0 {
                continue;
            }
            let r = Self::coords_of(n, idx);
            for a in 0..3 {
                acc[a] += w * wrap_displacement(r[a] as f64 - origin[a], nf);
            }
            total += w;
        }
        [0, 1, 2].map(|a| origin[a] + acc[a] / total)
    }

    /// Circular mean position per axis, in [0, N); a wrap-safe origin for
    /// [`LatticeState::position_expectation`].
    pub fn circular_center(&self) -> [f64; 3] {
        let n = self.grid_size;
        let step = 2.0 * PI / n as f64;
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for (idx, s) in self.amplitudes.iter().enumerate() {
            let w = s.norm_squared();
            let r = Self::coords_of(n, idx);
            for a in 0..3 {
                acc[a] += Complex64::from_polar(w, step * r[a] as f64);
            }
        }
        acc.map(|z| (z.arg() / step).rem_euclid(n as f64))
    }

    /// Mean wavevector in the `e^{−iκ·r}` labelling, each component in (−π, π].
    pub fn momentum_expectation(&self) -> [f64; 3] {
        let n = self.grid_size;
        let spectrum = to_momentum_space(self);
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for (idx, phi) in spectrum.iter().enumerate() {
            let w = phi.norm_squared();
            let m = Self::coords_of(n, idx);
            for a in 0..3 {
                acc[a] += w * grid_kappa(n, m[a]);
            }
            total += w;
        }
        acc.map(|x| x / total)
    }

    /// Plain-text dump, one site per line: index then eight reals
    /// (re, im of each component). Debugging aid only.
    pub fn dump_text(&self) -> String {
        let mut out = format!("# lattice state N={} step={}\n", self.grid_size, self.step_count);
        for (idx, s) in self.amplitudes.iter().enumerate() {
            out.push_str(&idx.to_string());
            for z in s.iter() {
                out.push_str(&format!(" {:.17e} {:.17e}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}

/// Gaussian envelope `exp(−|d|²/2w²)` around `center` times the plane wave
/// `e^{−iκ₀·d}` and the spinor `spin`, normalized.
pub fn make_gaussian_packet(
    grid_size: usize,
    center: [usize; 3],
    width: f64,
    kappa0: [f64; 3],
    spin: Spinor4,
) -> Result<LatticeState> {
    check_grid_size(grid_size)?;
    check_unit_spin(&spin)?;
    if !(width >= 2.0) {
        return Err(Error::InvalidArgument(format!("packet width {width} must be ≥ 2 sites")));
    }
    if (grid_size as f64) < 8.0 * width {
        return Err(Error::Aliasing { width, grid_size });
    }
    let n = grid_size;
    let nf = n as f64;
    let mut amplitudes: Vec<Spinor4> = (0..n.pow(3))
        .into_par_iter()
        .map(|idx| {
            let r = LatticeState::coords_of(n, idx);
            let d = [0, 1, 2].map(|a| wrap_displacement(r[a] as f64 - center[a] as f64, nf));
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let phase = -(kappa0[0] * d[0] + kappa0[1] * d[1] + kappa0[2] * d[2]);
            spin * Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
        })
        .collect();
    let norm = amplitudes.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt();
    for s in amplitudes.iter_mut() {
        *s /= cr(norm);
    }
    Ok(LatticeState { grid_size, amplitudes, step_count: 0 })
}

/// One walk step: the coin `e^{−iθQ}` on every site, then the conditional
/// shifts along Z, Y and X. The `ΔP = +1` part of each spinor moves one site
/// up the axis, the `ΔP = −1` part one site down, with periodic wraparound.
pub fn lattice_step(state: &LatticeState, theta: f64) -> LatticeState {
    let n = state.grid_size;
    let coin = coin_unitary(theta);
    let mut current: Vec<Spinor4> = state.amplitudes.par_iter().map(|s| coin * s).collect();

    let ops = build_operator_set();
    let half = cr(0.5);
    for axis in [2usize, 1, 0] {
        let dp = ops.shifts()[axis];
        let plus = (ComplexMatrix4::identity() + dp) * half;
        let minus = (ComplexMatrix4::identity() - dp) * half;
        let next: Vec<Spinor4> = (0..n.pow(3))
            .into_par_iter()
            .map(|idx| {
                let r = LatticeState::coords_of(n, idx);
                let mut from_below = r;
                from_below[axis] = (r[axis] + n - 1) % n;
                let mut from_above = r;
                from_above[axis] = (r[axis] + 1) % n;
                plus * current[LatticeState::index_of(n, from_below)]
                    + minus * current[LatticeState::index_of(n, from_above)]
            })
            .collect();
        current = next;
    }
    LatticeState { grid_size: n, amplitudes: current, step_count: state.step_count + 1 }
}

impl LatticeState {
    pub fn step(&self, theta: f64) -> LatticeState {
        lattice_step(self, theta)
    }
}

struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    /// In-place 3D transform of a row-major `n³` buffer.
    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inverse } else { &self.forward };
        // z is contiguous.
        for line in data.chunks_mut(n) {
            fft.process(line);
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for x in 0..n {
            for z in 0..n {
                for y in 0..n {
                    line[y] = data[(x * n + y) * n + z];
                }
                fft.process(&mut line);
                for y in 0..n {
                    data[(x * n + y) * n + z] = line[y];
                }
            }
        }
        for y in 0..n {
            for z in 0..n {
                for x in 0..n {
                    line[x] = data[(x * n + y) * n + z];
                }
                fft.process(&mut line);
                for x in 0..n {
                    data[(x * n + y) * n + z] = line[x];
                }
            }
        }
    }
}

/// Momentum amplitudes `φ(κ)` with `ψ(r) = Σ_κ φ(κ) e^{−iκ·r}`.
fn to_momentum_space(state: &LatticeState) -> Vec<Spinor4> {
    let n = state.grid_size;
    let fft = Fft3::new(n);
    let sites = n.pow(3);
    let mut out = vec![Spinor4::zeros(); sites];
    let scale = cr(1.0 / sites as f64);
    let mut buf = vec![Complex64::new(0.0, 0.0); sites];
    for comp in 0..4 {
        for (b, s) in buf.iter_mut().zip(state.amplitudes.iter()) {
            *b = s[comp];
        }
        fft.run(&mut buf, true);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            o[comp] = b * scale;
        }
    }
    out
}

fn from_momentum_space(n: usize, spectrum: &[Spinor4]) -> Vec<Spinor4> {
    let fft = Fft3::new(n);
    let sites = n.pow(3);
    let mut out = vec![Spinor4::zeros(); sites];
    let mut buf = vec![Complex64::new(0.0, 0.0); sites];
    for comp in 0..4 {
        for (b, s) in buf.iter_mut().zip(spectrum.iter()) {
            *b = s[comp];
        }
        fft.run(&mut buf, false);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            o[comp] = *b;
        }
    }
    out
}

/// Keep only the component of every momentum mode that lies on dispersion
/// branch `branch` (ascending eigenphase order) of `U(κ)`. Returns the
/// renormalized state and the retained probability.
pub fn project_onto_branch(
    state: &LatticeState,
    theta: f64,
    branch: usize,
) -> Result<(LatticeState, f64)> {
    if branch > 3 {
        return Err(Error::InvalidArgument(format!("branch {branch} out of range 0..4")));
    }
    let n = state.grid_size;
    let spectrum = to_momentum_space(state);
    let peak = spectrum.iter().map(|s| s.norm_squared()).fold(0.0, f64::max);
    let cutoff = peak * 1e-30;
    let projected: Vec<Spinor4> = spectrum
        .par_iter()
        .enumerate()
        .map(|(idx, phi)| -> Result<Spinor4> {
            if phi.norm_squared() <= cutoff {
                return Ok(Spinor4::zeros());
            }
            let m = LatticeState::coords_of(n, idx);
            let params = WalkParameters::new(m.map(|k| grid_kappa(n, k)), theta)?;
            let w = unitary_spectrum(&step_unitary(&params))?.vectors[branch];
            Ok(w * w.dotc(phi))
        })
        .collect::<Result<_>>()?;
    let mut amplitudes = from_momentum_space(n, &projected);
    let retained: f64 = amplitudes.iter().map(|s| s.norm_squared()).sum();
    if retained <= 0.0 {
        return Err(Error::InvalidState("projection removed the whole state".into()));
    }
    let scale = cr(1.0 / retained.sqrt());
    for s in amplitudes.iter_mut() {
        *s *= scale;
    }
    Ok((LatticeState { grid_size: n, amplitudes, step_count: state.step_count }, retained))
}

/// Evolve `steps` walk steps and fit the mean position against step number
/// over the last half of the trajectory. Sites per step.
pub fn packet_group_velocity(initial: &LatticeState, theta: f64, steps: usize) -> Result<[f64; 3]> {
    if steps < 2 {
        return Err(Error::InvalidArgument("need at least 2 steps for a velocity fit".into()));
    }
    let n = initial.grid_size as f64;
    let limit = n / 4.0;
    let origin = initial.position_expectation(initial.circular_center());
    let mut state = initial.clone();
    let mut trajectory = vec![[0.0; 3]];
    for _ in 0..steps {
        state = lattice_step(&state, theta);
        let mut mean = state.position_expectation(origin);
        for a in 0..3 {
            mean[a] -= origin[a];
        }
        // The minimum-image mean cannot track a packet beyond N/4.
        if let Some(d) = mean.iter().map(|d| d.abs()).find(|d| *d >= limit) {
            return Err(Error::PacketWrapped { displacement: d, limit });
        }
        trajectory.push(mean);
    }
    let first = steps / 2;
    let points: Vec<(f64, [f64; 3])> =
        trajectory.iter().enumerate().skip(first).map(|(i, m)| (i as f64, *m)).collect();
    let count = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let mut velocity = [0.0; 3];
    for (a, v) in velocity.iter_mut().enumerate() {
        let y_mean = points.iter().map(|p| p.1[a]).sum::<f64>() / count;
        let sxy: f64 = points.iter().map(|p| (p.0 - t_mean) * (p.1[a] - y_mean)).sum();
        *v = sxy / sxx;
    }
    if let Some(d) = velocity.iter().map(|v| (v * steps as f64).abs()).find(|d| *d >= limit) {
        return Err(Error::PacketWrapped { displacement: d, limit });
    }
    Ok(velocity)
}
