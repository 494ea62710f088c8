//! Interferometer geometry: arms made of straight segments, orientations of
//! the apparatus relative to the lattice frame, and the resulting relative
//! phase between the two arms.

use nalgebra::{Matrix3, Vector3};

use crate::effective::energy_shift;
use crate::error::{Error, Result};
use crate::spinor::{cr, Spinor2};
use crate::walk::{PhysicalInputs, WalkParameters};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Neutron mass used by the default context, kg.
pub const NEUTRON_MASS: f64 = 1.675e-27;
/// Thermal-neutron momentum used by the default context, kg·m/s.
pub const NEUTRON_MOMENTUM: f64 = 3.7e-24;
/// Default arm length, m.
pub const DEFAULT_ARM_LENGTH: f64 = 0.1;

const UNIT_TOL: f64 = 1e-12;
const FRACTION_TOL: f64 = 1e-12;
const CLOSURE_TOL: f64 = 1e-9;

/// `(1, 1)/√2` in the `{v₁, v₂}` basis.
pub fn symmetric_spin() -> Spinor2 {
    Spinor2::new(cr(std::f64::consts::FRAC_1_SQRT_2), cr(std::f64::consts::FRAC_1_SQRT_2))
}

/// A straight piece of an arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    direction: [f64; 3],
    fraction: f64,
}

impl Segment {
    pub fn new(direction: [f64; 3], fraction: f64) -> Result<Self> {
        let norm = Vector3::from(direction).norm();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::InvalidLayout(format!(
                "segment direction {direction:?} has norm {norm}, expected 1"
            )));
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidLayout(format!(
                "segment length fraction {fraction} outside (0, 1]"
            )));
        }
        Ok(Self { direction, fraction })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// The segment with its direction mapped by `r`.
    pub fn rotated(&self, r: &Matrix3<f64>) -> Segment {
        let d = r * Vector3::from(self.direction);
        Segment { direction: [d.x, d.y, d.z], fraction: self.fraction }
    }
}

/// Two-arm interferometer layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    name: String,
    arm_upper: Vec<Segment>,
    arm_lower: Vec<Segment>,
}

fn displacement(arm: &[Segment]) -> Vector3<f64> {
    arm.iter().map(|s| Vector3::from(s.direction) * s.fraction).sum()
}

fn fraction_sum(arm: &[Segment]) -> f64 {
    arm.iter().map(|s| s.fraction).sum()
}

impl Layout {
    /// Checks that each arm has total length `L` and that the arms reconnect.
    pub fn new(name: impl Into<String>, arm_upper: Vec<Segment>, arm_lower: Vec<Segment>) -> Result<Self> {
        let layout = Self::new_open(name, arm_upper, arm_lower)?;
        let residual = layout.closure_residual();
        if residual > CLOSURE_TOL {
            return Err(Error::InvalidLayout(format!(
                "arms do not reconnect: closure residual {residual:.3e}"
            )));
        }
        Ok(layout)
    }

    /// Like [`Layout::new`] but without the closure check; useful for
    /// pseudo-layouts that probe the bounds of the geometric factor.
    pub fn new_open(name: impl Into<String>, arm_upper: Vec<Segment>, arm_lower: Vec<Segment>) -> Result<Self> {
        for (label, arm) in [("upper", &arm_upper), ("lower", &arm_lower)] {
            if arm.is_empty() {
                return Err(Error::InvalidLayout(format!("{label} arm has no segments")));
            }
            let sum = fraction_sum(arm);
            if (sum - 1.0).abs() > FRACTION_TOL {
                return Err(Error::InvalidLayout(format!(
                    "{label} arm length fractions sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { name: name.into(), arm_upper, arm_lower })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arm_upper(&self) -> &[Segment] {
        &self.arm_upper
    }

    pub fn arm_lower(&self) -> &[Segment] {
        &self.arm_lower
    }

    /// `|Σ_upper f·d − Σ_lower f·d|`
    pub fn closure_residual(&self) -> f64 {
        (displacement(&self.arm_upper) - displacement(&self.arm_lower)).norm()
    }

    pub fn fraction_sums(&self) -> [f64; 2] {
        [fraction_sum(&self.arm_upper), fraction_sum(&self.arm_lower)]
    }

    /// Reflection `y → −y` of every segment.
    pub fn mirrored_xz(&self) -> Layout {
        let flip = |arm: &[Segment]| {
            arm.iter()
                .map(|s| Segment { direction: [s.direction[0], -s.direction[1], s.direction[2]], ..*s })
                .collect()
        };
        Layout {
            name: format!("{}-mirrored", self.name),
            arm_upper: flip(&self.arm_upper),
            arm_lower: flip(&self.arm_lower),
        }
    }
}

/// Asymmetric Mach–Zehnder layout: each arm runs a 30° diagonal for 2/3 of its
/// length and then turns vertical, meeting the other arm at `(√3/3, 0, 0)·L`.
pub fn default_fig1_layout() -> Layout {
    let (s, c) = std::f64::consts::FRAC_PI_6.sin_cos();
    let seg = |d, f| Segment::new(d, f).expect("builtin segment");
    Layout::new(
        "fig1 (30-degree diagonals, exactly vertical closing segments)",
        vec![seg([c, s, 0.0], 2.0 / 3.0), seg([0.0, -1.0, 0.0], 1.0 / 3.0)],
        vec![seg([c, -s, 0.0], 2.0 / 3.0), seg([0.0, 1.0, 0.0], 1.0 / 3.0)],
    )
    .expect("builtin layout is closed")
}

/// Both arms use the same two segments in opposite order; the relative phase
/// vanishes for every orientation.
pub fn parallelogram_layout() -> Layout {
    let (s, c) = std::f64::consts::FRAC_PI_6.sin_cos();
    let a = Segment::new([c, s, 0.0], 0.5).expect("builtin segment");
    let b = Segment::new([c, -s, 0.0], 0.5).expect("builtin segment");
    Layout::new("parallelogram", vec![a, b], vec![b, a]).expect("builtin layout is closed")
}

/// Names accepted by [`builtin_layout`].
pub const BUILTIN_LAYOUTS: [&str; 2] = ["fig1", "parallelogram"];

pub fn builtin_layout(name: &str) -> Option<Layout> {
    match name {
        "fig1" => Some(default_fig1_layout()),
        "parallelogram" => Some(parallelogram_layout()),
        _ => None,
    }
}

/// Euler angles (radians) of the apparatus relative to the lattice frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orientation {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Orientation {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self { theta1, theta2, theta3 }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Active rotation about x by `alpha` (y toward z).
pub fn rotation_x(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Active rotation about z by `alpha` (x toward y).
pub fn rotation_z(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R = R_X(θ₁) R_Z(θ₂) R_X(θ₃)`
pub fn rotation_matrix(o: &Orientation) -> Matrix3<f64> {
    rotation_x(o.theta1) * rotation_z(o.theta2) * rotation_x(o.theta3)
}

/// `p̂_x p̂_y √(p̂_x² + p̂_y²)`, bounded by ±½.
pub fn g_direction(p_hat: [f64; 3]) -> f64 {
    let [x, y, _] = p_hat;
    x * y * x.hypot(y)
}

/// Physical inputs of a phase estimate and the derived scale
/// `χ = p·m·c·L·Δx/ħ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalContext {
    mass: f64,
    momentum: f64,
    c: f64,
    hbar: f64,
    dx: f64,
    arm_length: f64,
    chi: f64,
}

/// `p·m·c·L·Δx/ħ²`
pub fn chi(momentum: f64, mass: f64, c: f64, arm_length: f64, dx: f64, hbar: f64) -> Result<f64> {
    for (name, v) in [
        ("momentum", momentum),
        ("mass", mass),
        ("c", c),
        ("arm_length", arm_length),
        ("dx", dx),
        ("hbar", hbar),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidContext(format!("{name} = {v} must be positive and finite")));
        }
    }
    Ok(momentum * mass * c * arm_length * dx / (hbar * hbar))
}

impl PhysicalContext {
    pub fn new(mass: f64, momentum: f64, c: f64, hbar: f64, dx: f64, arm_length: f64) -> Result<Self> {
        let chi = chi(momentum, mass, c, arm_length, dx, hbar)?;
        Ok(Self { mass, momentum, c, hbar, dx, arm_length, chi })
    }

    /// Thermal neutron, 10 cm arms, CODATA `c` and `ħ`.
    pub fn neutron(dx: f64) -> Result<Self> {
        Self::new(NEUTRON_MASS, NEUTRON_MOMENTUM, SPEED_OF_LIGHT, HBAR, dx, DEFAULT_ARM_LENGTH)
    }

    pub fn with_dx(&self, dx: f64) -> Result<Self> {
        Self::new(self.mass, self.momentum, self.c, self.hbar, dx, self.arm_length)
    }

    pub fn with_arm_length(&self, arm_length: f64) -> Result<Self> {
        Self::new(self.mass, self.momentum, self.c, self.hbar, self.dx, arm_length)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn momentum(&self) -> f64 {
        self.momentum
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn arm_length(&self) -> f64 {
        self.arm_length
    }
    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Walk parameters for motion along `direction`.
    pub fn walk_parameters(&self, direction: [f64; 3]) -> Result<WalkParameters> {
        WalkParameters::from_physical(PhysicalInputs {
            mass: self.mass,
            momentum: direction.map(|d| d * self.momentum),
            c: self.c,
            hbar: self.hbar,
            dx: self.dx,
        })
    }

    /// Time to traverse `fraction·L` at group speed `pc/√(m²c²+p²)`, in s.
    pub fn traversal_time(&self, fraction: f64) -> f64 {
        let mc = self.mass * self.c;
        fraction * self.arm_length / self.c * mc.hypot(self.momentum) / self.momentum
    }
}

/// `−⟨H₁⟩ t/ħ` for a segment, with `⟨H₁⟩` taken in the segment's own
/// `{v₁, v₂}` basis with coefficients `spin`.
pub fn segment_phase(seg: &Segment, ctx: &PhysicalContext, spin: &Spinor2) -> Result<f64> {
    let params = ctx.walk_parameters(seg.direction)?;
    if params.kappa_norm() == 0.0 {
        return Err(Error::ZeroMomentum);
    }
    let shift = energy_shift(&params, spin)?;
    // H₁ is in units of ħ/Δt with Δt = Δx/c.
    let steps = ctx.traversal_time(seg.fraction) * ctx.c / ctx.dx;
    Ok(-shift * steps)
}

/// `g(d)·fraction·χ`, the symmetric-spin segment phase in closed form.
pub fn segment_phase_closed_form(seg: &Segment, ctx: &PhysicalContext) -> f64 {
    g_direction(seg.direction) * seg.fraction * ctx.chi
}

fn arm_phase(arm: &[Segment], r: &Matrix3<f64>, ctx: &PhysicalContext, spin: &Spinor2) -> Result<f64> {
    arm.iter().map(|s| segment_phase(&s.rotated(r), ctx, spin)).sum()
}

/// `φ_upper − φ_lower` for an arbitrary rotation of the apparatus.
pub fn relative_phase_rotated(layout: &Layout, r: &Matrix3<f64>, ctx: &PhysicalContext, spin: &Spinor2) -> Result<f64> {
    Ok(arm_phase(&layout.arm_upper, r, ctx, spin)? - arm_phase(&layout.arm_lower, r, ctx, spin)?)
}

pub fn relative_phase(layout: &Layout, o: &Orientation, ctx: &PhysicalContext, spin: &Spinor2) -> Result<f64> {
    relative_phase_rotated(layout, &rotation_matrix(o), ctx, spin)
}

fn arm_g(arm: &[Segment], r: &Matrix3<f64>) -> f64 {
    arm.iter().map(|s| s.fraction * g_direction(s.rotated(r).direction)).sum()
}

pub fn layout_g_factor_rotated(layout: &Layout, r: &Matrix3<f64>) -> f64 {
    arm_g(&layout.arm_upper, r) - arm_g(&layout.arm_lower, r)
}

/// `Σ_upper f·g(R d) − Σ_lower f·g(R d)`
pub fn layout_g_factor(layout: &Layout, o: &Orientation) -> f64 {
    layout_g_factor_rotated(layout, &rotation_matrix(o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::c;
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    const FIG1_G: f64 = 0.577_350_269_189_625_8;

    fn max_abs3(m: &Matrix3<f64>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    fn unit(v: [f64; 3]) -> [f64; 3] {
        let n = Vector3::from(v).norm();
        v.map(|x| x / n)
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_matrix(&Orientation::identity()), Matrix3::identity());
        let r = rotation_matrix(&Orientation::new(0.0, FRAC_PI_2, 0.0));
        let y = r * Vector3::x();
        assert!((y - Vector3::y()).norm() < 1e-15);
        let r = rotation_matrix(&Orientation::new(FRAC_PI_2, FRAC_PI_2, FRAC_PI_2));
        assert!(max_abs3(&(r.transpose() * r - Matrix3::identity())) < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        // R_X(π/2) maps y to z.
        assert!((rotation_x(FRAC_PI_2) * Vector3::y() - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn g_direction_examples() {
        assert_eq!(g_direction([1.0, 0.0, 0.0]), 0.0);
        assert!((g_direction(unit([1.0, 1.0, 0.0])) - 0.5).abs() < 1e-15);
        assert!((g_direction(unit([1.0, 1.0, 1.0])) - (2.0f64 / 3.0).sqrt() / 3.0).abs() < 1e-15);
        assert!((g_direction(unit([1.0, 1.0, 1.0])) - 0.27217).abs() < 1e-5);
    }

    #[test]
    fn g_direction_bound_by_sampling_and_refinement() {
        // Dense sampling of the sphere, then the maximum is refined by
        // shrinking a local search box around the best sample.
        let n = 400;
        let mut best = (f64::MIN, 0.0, 0.0);
        for i in 0..=n {
            let polar = PI * i as f64 / n as f64;
            for j in 0..2 * n {
                let az = PI * j as f64 / n as f64;
                let g = g_direction([polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()]).abs();
                assert!(g <= 0.5 + 1e-15);
                if g > best.0 {
                    best = (g, polar, az);
                }
            }
        }
        let (mut g, mut polar, mut az) = best;
        let mut h = PI / n as f64;
        while h > 1e-10 {
            let mut moved = false;
            for (dp, da) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                let (p2, a2) = (polar + dp, az + da);
                let g2 = g_direction([p2.sin() * a2.cos(), p2.sin() * a2.sin(), p2.cos()]).abs();
                if g2 > g {
                    (g, polar, az, moved) = (g2, p2, a2, true);
                }
            }
            if !moved {
                h /= 2.0;
            }
        }
        assert!((g - 0.5).abs() < 1e-12);
        let d = [polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()];
        assert!(d[2].abs() < 1e-5);
        assert!((d[0].abs() - d[1].abs()).abs() < 1e-5);
    }

    #[test]
    fn segments_and_layouts_validate() {
        assert!(Segment::new([1.0, 1.0, 0.0], 0.5).is_err());
        assert!(Segment::new([1.0, 0.0, 0.0], 0.0).is_err());
        assert!(Segment::new([1.0, 0.0, 0.0], 1.5).is_err());
        let x = Segment::new([1.0, 0.0, 0.0], 1.0).unwrap();
        let y = Segment::new([0.0, 1.0, 0.0], 1.0).unwrap();
        assert!(matches!(Layout::new("open", vec![x], vec![y]), Err(Error::InvalidLayout(_))));
        assert!(Layout::new_open("open", vec![x], vec![y]).is_ok());
        let half = Segment::new([1.0, 0.0, 0.0], 0.5).unwrap();
        assert!(Layout::new_open("short", vec![half], vec![x]).is_err());
    }

    #[test]
    fn fig1_layout_properties() {
        let layout = default_fig1_layout();
        assert!(layout.closure_residual() < 1e-15);
        let [a, b] = layout.fraction_sums();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let end = displacement(layout.arm_upper());
        assert!((end - Vector3::new(3f64.sqrt() / 3.0, 0.0, 0.0)).norm() < 1e-15);
        let g = layout_g_factor(&layout, &Orientation::identity());
        assert!((g - FIG1_G).abs() < 1e-12);
        assert!((g_direction(layout.arm_upper()[0].direction()) - 0.43301).abs() < 1e-5);
    }

    #[test]
    fn mirror_negates_g() {
        let layout = default_fig1_layout();
        let g = layout_g_factor(&layout, &Orientation::identity());
        let gm = layout_g_factor(&layout.mirrored_xz(), &Orientation::identity());
        assert!((g + gm).abs() < 1e-15);
    }

    #[test]
    fn planar_through_z_orientation_gives_zero() {
        // θ₁ = π/2 carries the x–y plane of the layout into the x–z plane.
        let o = Orientation::new(FRAC_PI_2, 0.0, 0.0);
        assert!(layout_g_factor(&default_fig1_layout(), &o).abs() < 1e-15);
        let o = Orientation::new(FRAC_PI_2, FRAC_PI_2, 0.0);
        // R_Z(π/2) first maps the plane to y–x, then R_X(π/2) sends y to z.
        assert!(layout_g_factor(&default_fig1_layout(), &o).abs() < 1e-15);
    }

    #[test]
    fn chi_examples() {
        let ctx = PhysicalContext::neutron(1.0).unwrap();
        let by_hand = 3.7e-24 * 1.675e-27 * 299_792_458.0 * 0.1 / (1.054_571_817e-34f64).powi(2);
        assert!((ctx.chi() - by_hand).abs() <= 1e-12 * by_hand);
        assert!((ctx.chi() / 1.67e25 - 1.0).abs() < 0.01);
        let planck = PhysicalContext::neutron(1.616e-35).unwrap().with_arm_length(10.0).unwrap();
        let phase = 0.1 * planck.chi();
        assert!(phase > 2.6e-9 && phase < 2.8e-9, "{phase}");
        assert!(matches!(PhysicalContext::neutron(0.0), Err(Error::InvalidContext(_))));
        assert!(chi(1.0, 1.0, 1.0, -1.0, 1.0, 1.0).is_err());
    }

    fn small_ctx() -> PhysicalContext {
        // Lattice spacing chosen so that θ and κ are of order 0.1.
        PhysicalContext::neutron(2.5e-17).unwrap()
    }

    #[test]
    fn segment_phase_examples() {
        let ctx = small_ctx();
        let spin = symmetric_spin();
        let axis = Segment::new([1.0, 0.0, 0.0], 0.5).unwrap();
        assert!(segment_phase(&axis, &ctx, &spin).unwrap().abs() < 1e-12 * ctx.chi());
        let diag = Segment::new(unit([1.0, 1.0, 0.0]), 1.0).unwrap();
        let phase = segment_phase(&diag, &ctx, &spin).unwrap();
        assert!((phase - 0.5 * ctx.chi()).abs() <= 1e-10 * ctx.chi());

        // Spin up: −d₁₁·steps, with d₁₁ = κ_xκ_yκ_z/κ.
        let body = Segment::new(unit([1.0, 1.0, 1.0]), 0.7).unwrap();
        let up = Spinor2::new(cr(1.0), cr(0.0));
        let numeric = segment_phase(&body, &ctx, &up).unwrap();
        let kappa = ctx.momentum() * ctx.dx() / ctx.hbar();
        let d11 = kappa * kappa / (3.0 * 3f64.sqrt());
        let steps = ctx.traversal_time(0.7) * ctx.c() / ctx.dx();
        let closed = -d11 * steps;
        assert!((numeric - closed).abs() <= 1e-10 * closed.abs());

        let bad = Spinor2::new(cr(1.0), c(0.0, 1.0));
        assert!(matches!(segment_phase(&body, &ctx, &bad), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn traversal_time_of_massless_limit() {
        let ctx = PhysicalContext::new(1e-40, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((ctx.traversal_time(0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fig1_relative_phase_at_identity() {
        let ctx = small_ctx();
        let phase = relative_phase(&default_fig1_layout(), &Orientation::identity(), &ctx, &symmetric_spin()).unwrap();
        assert!((phase / ctx.chi() - FIG1_G).abs() < 1e-10);
    }

    fn angles() -> impl Strategy<Value = Orientation> {
        proptest::array::uniform3(0.0f64..2.0 * PI).prop_map(Orientation::from_array)
    }

    proptest! {
        #[test]
        fn rotation_is_composed_product(o in angles()) {
            let direct = rotation_matrix(&o);
            let (s1, c1) = o.theta1.sin_cos();
            let (s2, c2) = o.theta2.sin_cos();
            let (s3, c3) = o.theta3.sin_cos();
            let rx1 = Matrix3::new(1.0, 0.0, 0.0, 0.0, c1, -s1, 0.0, s1, c1);
            let rz2 = Matrix3::new(c2, -s2, 0.0, s2, c2, 0.0, 0.0, 0.0, 1.0);
            let rx3 = Matrix3::new(1.0, 0.0, 0.0, 0.0, c3, -s3, 0.0, s3, c3);
            let mut product = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            acc += rx1[(i, k)] * rz2[(k, l)] * rx3[(l, j)];
                        }
                    }
                    product[(i, j)] = acc;
                }
            }
            prop_assert!(max_abs3(&(direct - product)) <= 1e-12);
            prop_assert!(max_abs3(&(direct.transpose() * direct - Matrix3::identity())) <= 1e-12);
            prop_assert!((direct.determinant() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn g_factor_times_chi_is_relative_phase(o in angles()) {
            let ctx = small_ctx();
            let layout = default_fig1_layout();
            let phase = relative_phase(&layout, &o, &ctx, &symmetric_spin()).unwrap();
            let g = layout_g_factor(&layout, &o);
            prop_assert!((phase - g * ctx.chi()).abs() <= 1e-10 * ctx.chi());
        }

        #[test]
        fn symmetric_and_parallelogram_layouts_cancel(o in angles()) {
            let fig1 = default_fig1_layout();
            let same = Layout::new("same", fig1.arm_upper().to_vec(), fig1.arm_upper().to_vec()).unwrap();
            prop_assert_eq!(layout_g_factor(&same, &o), 0.0);
            prop_assert!(layout_g_factor(&parallelogram_layout(), &o).abs() <= 1e-15);
            let ctx = small_ctx();
            let phase = relative_phase(&parallelogram_layout(), &o, &ctx, &symmetric_spin()).unwrap();
            prop_assert!(phase.abs() <= 1e-12 * ctx.chi());
        }

        #[test]
        fn segment_order_does_not_matter(o in angles(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let ctx = small_ctx();
            let spin = Spinor2::new(cr(a.cos()), Complex64::from_polar(a.sin(), 2.0 * PI * b));
            let fig1 = default_fig1_layout();
            let reversed: Vec<Segment> = fig1.arm_upper().iter().rev().copied().collect();
            let r = rotation_matrix(&o);
            let forward = arm_phase(fig1.arm_upper(), &r, &ctx, &spin).unwrap();
            let backward = arm_phase(&reversed, &r, &ctx, &spin).unwrap();
            prop_assert!((forward - backward).abs() <= 1e-12 * ctx.chi());
        }

        #[test]
        fn g_direction_is_bounded(v in proptest::array::uniform3(-1.0f64..1.0)) {
            prop_assume!(Vector3::from(v).norm() > 1e-3);
            prop_assert!(g_direction(unit(v)).abs() <= 0.5 + 1e-15);
        }
    }

}
