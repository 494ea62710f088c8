//! Experiment planning: orientation scans, local optimization of the
//! geometric factor, sidereal time series and lattice-spacing bounds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{
    layout_g_factor, relative_phase_rotated, rotation_matrix, Layout, Orientation, PhysicalContext,
};
use crate::spinor::{cr, Spinor2};

/// Sidereal day, s.
pub const SIDEREAL_DAY: f64 = 86_164.0;
/// Version tag written at the top of every exported table.
pub const SCHEMA_VERSION: u32 = 1;
/// Evaluation budget of [`optimize_orientation`].
pub const MAX_EVALUATIONS: usize = 10_000;
/// Angular size of the stationarity probe, rad.
pub const STATIONARITY_PROBE: f64 = 1e-6;

/// Steps per Euler angle; angle `k` takes the values `2π i / steps[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub steps: [usize; 3],
}

impl GridSpec {
    pub fn cubic(n: usize) -> Self {
        Self { steps: [n; 3] }
    }

    pub fn len(&self) -> usize {
        self.steps.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Orientation of row `index` (θ₃ varies fastest).
    pub fn orientation(&self, index: usize) -> Orientation {
        let [n1, n2, n3] = self.steps;
        let (i, rest) = (index / (n2 * n3), index % (n2 * n3));
        let (j, k) = (rest / n3, rest % n3);
        let angle = |m: usize, n: usize| 2.0 * PI * m as f64 / n as f64;
        Orientation::new(angle(i, n1), angle(j, n2), angle(k, n3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub orientation: Orientation,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub grid: GridSpec,
    pub rows: Vec<ScanRow>,
    pub min: f64,
    pub max: f64,
    pub argmin: Orientation,
    pub argmax: Orientation,
    pub median_abs: f64,
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidArgument("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// `layout_g_factor` on the full grid over `[0, 2π)³`, evaluated on
/// `workers` threads. Rows come back in grid order regardless of `workers`.
pub fn grid_scan(layout: &Layout, grid: GridSpec, workers: usize) -> Result<ScanResult> {
    if grid.steps.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 steps per angle, got {:?}",
            grid.steps
        )));
    }
    let rows: Vec<ScanRow> = with_workers(workers, || {
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let orientation = grid.orientation(i);
                ScanRow { orientation, g: layout_g_factor(layout, &orientation) }
            })
            .collect()
    })?;

    let mut lo = rows[0];
    let mut hi = rows[0];
    for row in &rows[1..] {
        if row.g < lo.g {
            lo = *row;
        }
        if row.g > hi.g {
            hi = *row;
        }
    }
    let mut abs: Vec<f64> = rows.iter().map(|r| r.g.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mid = abs.len() / 2;
    let median_abs = if abs.len().is_multiple_of(2) { 0.5 * (abs[mid - 1] + abs[mid]) } else { abs[mid] };

    Ok(ScanResult {
        grid,
        rows,
        min: lo.g,
        max: hi.g,
        argmin: lo.orientation,
        argmax: hi.orientation,
        median_abs,
    })
}

/// Outcome of a Nelder–Mead minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: [f64; 3],
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each iteration; non-increasing.
    pub history: Vec<f64>,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
    budget: usize,
}

impl<F: FnMut([f64; 3]) -> f64> Counted<F> {
    fn eval(&mut self, x: [f64; 3]) -> Result<f64> {
        if self.evaluations >= self.budget {
            return Err(Error::NonConvergence { evaluations: self.evaluations });
        }
        self.evaluations += 1;
        Ok((self.f)(x))
    }
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] + t * (b[i] - a[i]))
}

/// Minimizes `f` from `x0` with a Nelder–Mead simplex of initial edge `step`.
///
/// After the simplex collapses, axis moves of size `probe` are tried around
/// the best vertex; any improvement restarts the simplex there. The result is
/// therefore a point that no probe move improves. Exceeding `budget`
/// evaluations yields [`Error::NonConvergence`].
pub fn nelder_mead(
    f: impl FnMut([f64; 3]) -> f64,
    x0: [f64; 3],
    step: f64,
    probe: f64,
    budget: usize,
) -> Result<Minimum> {
    let mut counted = Counted { f, evaluations: 0, budget };
    let mut best = (x0, counted.eval(x0)?);
    let mut history = vec![best.1];
    let mut edge = step;

    loop {
        let mut simplex: Vec<([f64; 3], f64)> = vec![best];
        for axis in 0..3 {
            let mut x = best.0;
            x[axis] += edge;
            simplex.push((x, counted.eval(x)?));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[0].1 < best.1 {
                best = simplex[0];
            }
            history.push(best.1);
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| (0..3).map(|i| (x[i] - simplex[0].0[i]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size < 0.1 * probe {
                break;
            }

            let centroid = [0, 1, 2].map(|i| (simplex[0].0[i] + simplex[1].0[i] + simplex[2].0[i]) / 3.0);
            let worst = simplex[3];
            let xr = lerp(centroid, worst.0, -1.0);
            let fr = counted.eval(xr)?;
            if fr < simplex[0].1 {
                let xe = lerp(centroid, worst.0, -2.0);
                let fe = counted.eval(xe)?;
                simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[2].1 {
                simplex[3] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(centroid, xr, 0.5);
                (xc, counted.eval(xc)?)
            } else {
                let xc = lerp(centroid, worst.0, 0.5);
                (xc, counted.eval(xc)?)
            };
            if fc < worst.1.min(fr) {
                simplex[3] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0;
            for vertex in simplex.iter_mut().skip(1) {
                let x = lerp(x_best, vertex.0, 0.5);
                *vertex = (x, counted.eval(x)?);
            }
        }

        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut x = best.0;
                x[axis] += sign * probe;
                let fx = counted.eval(x)?;
                if fx < best.1 {
                    best = (x, fx);
                    improved = true;
                }
            }
        }
        history.push(best.1);
        if !improved {
            return Ok(Minimum { x: best.0, value: best.1, evaluations: counted.evaluations, history });
        }
        edge = (edge * 0.5).max(10.0 * probe);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedOrientation {
    pub orientation: Orientation,
    /// Signed geometric factor at `orientation`.
    pub g: f64,
    pub evaluations: usize,
    /// Best `|g|` after each iteration; non-decreasing.
    pub history: Vec<f64>,
}

/// Locally maximizes `|g|` starting at `start`.
pub fn optimize_orientation(layout: &Layout, start: Orientation) -> Result<OptimizedOrientation> {
    let objective = |x: [f64; 3]| -layout_g_factor(layout, &Orientation::from_array(x)).abs();
    let found = nelder_mead(objective, start.as_array(), 0.1, STATIONARITY_PROBE, MAX_EVALUATIONS)?;
    let orientation = Orientation::from_array(found.x);
    Ok(OptimizedOrientation {
        orientation,
        g: layout_g_factor(layout, &orientation),
        evaluations: found.evaluations,
        history: found.history.iter().map(|v| -v).collect(),
    })
}

/// Relative phase sampled while the apparatus turns about `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiderealSeries {
    pub times: Vec<f64>,
    pub phases: Vec<f64>,
    pub axis: [f64; 3],
    pub base: Orientation,
    pub period: f64,
    pub dt: f64,
}

/// Inputs of [`sidereal_series`] other than the layout and context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiderealSpec {
    pub base: Orientation,
    pub axis: [f64; 3],
    pub duration: f64,
    pub dt: f64,
    pub period: f64,
}

impl SiderealSeries {
    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .phases
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        hi - lo
    }

    /// Largest `|Δφ(t) − Δφ(t + T)|` over overlapping samples whose spacing is
    /// exactly one period; `None` when `T/dt` is not an integer.
    pub fn periodicity_defect(&self) -> Option<f64> {
        let shift = self.period / self.dt;
        if (shift - shift.round()).abs() > 1e-9 || shift < 1.0 {
            return None;
        }
        let shift = shift.round() as usize;
        Some(
            self.phases
                .iter()
                .zip(self.phases.iter().skip(shift))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Frequency (Hz) of the strongest nonzero bin of the discrete spectrum.
    pub fn dominant_frequency(&self) -> Option<f64> {
        let n = self.phases.len();
        if n < 4 {
            return None;
        }
        let mean = self.phases.iter().sum::<f64>() / n as f64;
        let mut buffer: Vec<_> = self.phases.iter().map(|p| cr(p - mean)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
        let (bin, power) = (1..=n / 2)
            .map(|k| (k, buffer[k].norm_sqr()))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        (power > 0.0).then(|| bin as f64 / (n as f64 * self.dt))
    }
}

/// `Δφ(t)` for `R(t) = R_axis(2πt/T) · R(base)` at `t = 0, dt, …` below
/// `duration`.
pub fn sidereal_series(
    layout: &Layout,
    spec: &SiderealSpec,
    ctx: &PhysicalContext,
    spin: &Spinor2,
) -> Result<SiderealSeries> {
    if !(spec.dt > 0.0 && spec.duration > 0.0 && spec.period > 0.0) {
        return Err(Error::InvalidArgument("dt, duration and period must be positive".into()));
    }
    let axis = Vector3::from(spec.axis);
    if !(axis.norm() > 0.0) || !axis.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("rotation axis must be a nonzero vector".into()));
    }
    let axis = Unit::new_normalize(axis);
    let base = rotation_matrix(&spec.base);
    let count = (spec.duration / spec.dt - 1e-9).ceil() as usize;
    let times: Vec<f64> = (0..count).map(|i| i as f64 * spec.dt).collect();
    let phases = times
        .par_iter()
        .map(|&t| {
            let turn: Matrix3<f64> = Rotation3::from_axis_angle(&axis, 2.0 * PI * t / spec.period).into_inner();
            relative_phase_rotated(layout, &(turn * base), ctx, spin)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SiderealSeries {
        times,
        phases,
        axis: [axis.x, axis.y, axis.z],
        base: spec.base,
        period: spec.period,
        dt: spec.dt,
    })
}

/// Smallest lattice spacing detectable with the given phase sensitivity:
/// `Δx = s·ħ²/(|g|·p·m·c·L)`.
pub fn bound_estimate(phase_sensitivity: f64, g_assumed: f64, ctx: &PhysicalContext) -> Result<f64> {
    if g_assumed == 0.0 || !g_assumed.is_finite() {
        return Err(Error::InvalidArgument(format!("assumed g = {g_assumed} must be nonzero")));
    }
    if !(phase_sensitivity > 0.0 && phase_sensitivity.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "phase sensitivity {phase_sensitivity} must be positive"
        )));
    }
    let per_dx = ctx.chi() / ctx.dx();
    Ok(phase_sensitivity / (g_assumed.abs() * per_dx))
}

fn angle(x: f64) -> String {
    format!("{x:.9}")
}

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn scan_to_csv(result: &ScanResult) -> String {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\ntheta1,theta2,theta3,g\n");
    for row in &result.rows {
        let o = row.orientation;
        let _ = writeln!(out, "{},{},{},{}", angle(o.theta1), angle(o.theta2), angle(o.theta3), sci(row.g));
    }
    out
}

pub fn sidereal_to_csv(series: &SiderealSeries) -> String {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\nt,delta_phi\n");
    for (t, p) in series.times.iter().zip(&series.phases) {
        let _ = writeln!(out, "{},{}", sci(*t), sci(*p));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_fig1_layout, symmetric_spin, Segment};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> Layout {
        default_fig1_layout()
    }

    #[test]
    fn grid_orientation_indexing() {
        let grid = GridSpec { steps: [2, 3, 4] };
        assert_eq!(grid.len(), 24);
        let o = grid.orientation(23);
        assert!((o.theta1 - PI).abs() < 1e-15);
        assert!((o.theta2 - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((o.theta3 - 1.5 * PI).abs() < 1e-15);
        assert_eq!(grid.orientation(1).theta3, 0.5 * PI);
    }

    #[test]
    fn grid_scan_rejects_small_grids_and_zero_workers() {
        assert!(grid_scan(&fig1(), GridSpec { steps: [1, 4, 4] }, 1).is_err());
        assert!(grid_scan(&fig1(), GridSpec::cubic(4), 0).is_err());
    }

    #[test]
    fn grid_scan_is_worker_invariant() {
        let a = grid_scan(&fig1(), GridSpec::cubic(12), 1).unwrap();
        let b = grid_scan(&fig1(), GridSpec::cubic(12), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(scan_to_csv(&a), scan_to_csv(&b));
    }

    #[test]
    fn grid_scan_extremes_agree_with_rows() {
        let r = grid_scan(&fig1(), GridSpec::cubic(10), 2).unwrap();
        let max = r.rows.iter().map(|x| x.g).fold(f64::MIN, f64::max);
        let min = r.rows.iter().map(|x| x.g).fold(f64::MAX, f64::min);
        assert_eq!((r.min, r.max), (min, max));
        assert_eq!(layout_g_factor(&fig1(), &r.argmax), r.max);
        assert!(r.rows.iter().all(|x| x.g.abs() <= 1.0));
        let below = r.rows.iter().filter(|x| x.g.abs() < r.median_abs).count();
        assert!(below <= r.rows.len() / 2);
    }

    #[test]
    fn identical_arms_scan_to_zero() {
        let l = fig1();
        let same = Layout::new("same", l.arm_lower().to_vec(), l.arm_lower().to_vec()).unwrap();
        let r = grid_scan(&same, GridSpec::cubic(6), 2).unwrap();
        assert!(r.rows.iter().all(|x| x.g == 0.0));
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: [f64; 3]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + 3.0 * x[2].powi(2);
        let m = nelder_mead(f, [0.0; 3], 0.3, 1e-6, 10_000).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 0.5).abs() < 1e-5 && m.x[2].abs() < 1e-5);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nelder_mead_reports_budget_exhaustion() {
        let f = |x: [f64; 3]| x[0] + x[1] + x[2];
        assert!(matches!(
            nelder_mead(f, [0.0; 3], 0.1, 1e-6, 200),
            Err(Error::NonConvergence { evaluations: 200 })
        ));
    }

    #[test]
    fn optimizer_refines_grid_argmax() {
        let scan = grid_scan(&fig1(), GridSpec::cubic(16), 2).unwrap();
        let opt = optimize_orientation(&fig1(), scan.argmax).unwrap();
        assert!((opt.g.abs() - 1.0 / 3f64.sqrt()).abs() < 1e-4, "{}", opt.g);
        assert!(opt.g.abs() >= scan.max.abs());
        assert!(opt.history.windows(2).all(|w| w[1] >= w[0]));
        // No probe move improves the result.
        let here = opt.g.abs();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut x = opt.orientation.as_array();
                x[axis] += sign * STATIONARITY_PROBE;
                assert!(layout_g_factor(&fig1(), &Orientation::from_array(x)).abs() <= here);
            }
        }
    }

    #[test]
    fn optimizer_from_zero_point_stays_below_bound() {
        let scan = grid_scan(&fig1(), GridSpec::cubic(16), 2).unwrap();
        let start = Orientation::new(0.5 * PI, 0.0, 0.0);
        assert!(layout_g_factor(&fig1(), &start).abs() < 1e-15);
        let opt = optimize_orientation(&fig1(), start).unwrap();
        assert!(opt.g.abs() <= 1.0 / 3f64.sqrt() + 1e-12);
        assert!(opt.g.abs() <= scan.max.max(-scan.min) + 1e-2);
    }

    #[test]
    fn single_segment_pseudo_layout_respects_bound() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let up = Segment::new([s, s, 0.0], 1.0).unwrap();
        let down = Segment::new([s, -s, 0.0], 1.0).unwrap();
        let pseudo = Layout::new_open("pseudo", vec![up], vec![down]).unwrap();
        let opt = optimize_orientation(&pseudo, Orientation::new(0.1, 0.2, 0.1)).unwrap();
        assert!(opt.g.abs() <= 1.0 + 1e-12);
        assert!(opt.g.abs() > 0.99, "{}", opt.g);
    }

    fn neutron() -> PhysicalContext {
        PhysicalContext::neutron(1e-30).unwrap()
    }

    #[test]
    fn flat_series_for_symmetry_axis() {
        // Identical arms give g = 0 at every orientation.
        let l = fig1();
        let same = Layout::new("same", l.arm_upper().to_vec(), l.arm_upper().to_vec()).unwrap();
        let spec = SiderealSpec {
            base: Orientation::identity(),
            axis: [0.3, 0.2, 0.9],
            duration: 2.0 * SIDEREAL_DAY,
            dt: SIDEREAL_DAY / 64.0,
            period: SIDEREAL_DAY,
        };
        let s = sidereal_series(&same, &spec, &neutron(), &symmetric_spin()).unwrap();
        assert_eq!(s.peak_to_peak(), 0.0);
        assert_eq!(s.dominant_frequency(), None);
    }

    #[test]
    fn generic_series_peaks_at_a_sidereal_harmonic() {
        let spec = SiderealSpec {
            base: Orientation::new(0.4, 1.1, -0.3),
            axis: [0.2, -0.5, 0.8],
            duration: 2.0 * SIDEREAL_DAY,
            dt: SIDEREAL_DAY / 96.0,
            period: SIDEREAL_DAY,
        };
        let s = sidereal_series(&fig1(), &spec, &neutron(), &symmetric_spin()).unwrap();
        assert_eq!(s.times.len(), 192);
        let harmonic = s.dominant_frequency().unwrap() * SIDEREAL_DAY;
        assert!((harmonic - harmonic.round()).abs() < 1e-9 && harmonic.round() >= 1.0);
        assert!(s.periodicity_defect().unwrap() <= 1e-9 * s.peak_to_peak());

        let doubled = sidereal_series(&fig1(), &spec, &neutron().with_dx(2e-30).unwrap(), &symmetric_spin()).unwrap();
        let ratio = doubled.peak_to_peak() / s.peak_to_peak();
        assert!((ratio - 2.0).abs() <= 2e-12);
    }

    #[test]
    fn series_rejects_bad_inputs() {
        let mut spec = SiderealSpec {
            base: Orientation::identity(),
            axis: [0.0, 0.0, 1.0],
            duration: 10.0,
            dt: 0.0,
            period: 5.0,
        };
        assert!(sidereal_series(&fig1(), &spec, &neutron(), &symmetric_spin()).is_err());
        spec.dt = 1.0;
        spec.axis = [0.0; 3];
        assert!(sidereal_series(&fig1(), &spec, &neutron(), &symmetric_spin()).is_err());
    }

    #[test]
    fn bound_examples() {
        let ctx = neutron();
        let b = bound_estimate(1e-2, 0.1, &ctx).unwrap();
        assert!(b > 5.9e-27 && b < 6.1e-27, "{b}");
        let b6 = bound_estimate(1e-6, 0.1, &ctx).unwrap();
        assert!(b6 > 5.9e-31 && b6 < 6.1e-31, "{b6}");
        let long = ctx.with_arm_length(0.2).unwrap();
        let half = bound_estimate(1e-2, 0.1, &long).unwrap();
        assert!((half / b - 0.5).abs() < 1e-12);
        assert!(bound_estimate(1e-2, 0.0, &ctx).is_err());
        assert!(bound_estimate(0.0, 0.1, &ctx).is_err());
    }

    #[test]
    fn csv_formats() {
        let r = grid_scan(&fig1(), GridSpec::cubic(2), 1).unwrap();
        let text = scan_to_csv(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema_version=1");
        assert_eq!(lines[1], "theta1,theta2,theta3,g");
        assert_eq!(lines.len(), 2 + 8);
        assert!(lines[2].starts_with("0.000000000,0.000000000,0.000000000,5.77350269190e-1"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(5))]

        #[test]
        fn series_are_periodic(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut dir = || {
                let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let v = v.normalize();
                [v.x, v.y, v.z]
            };
            let (a, b) = (dir(), dir());
            let upper = vec![Segment::new(a, 0.3).unwrap(), Segment::new(b, 0.7).unwrap()];
            let lower = vec![Segment::new(b, 0.7).unwrap(), Segment::new(a, 0.3).unwrap()];
            let axis = dir();
            let random = Layout::new("random", upper, lower).unwrap();
            let skew = Layout::new_open("skew", random.arm_upper().to_vec(), vec![Segment::new(dir(), 1.0).unwrap()]).unwrap();
            let period = 1000.0;
            let spec = SiderealSpec {
                base: Orientation::new(seed as f64 * 0.1, 0.3, 0.7),
                axis,
                duration: 2.0 * period,
                dt: period / 50.0,
                period,
            };
            for layout in [&random, &skew] {
                let s = sidereal_series(layout, &spec, &neutron(), &symmetric_spin()).unwrap();
                let scale = s.phases.iter().fold(0.0f64, |m, p| m.max(p.abs()));
                prop_assert!(s.periodicity_defect().unwrap() <= 1e-9 * scale.max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn bound_round_trips(s in 1e-9f64..1e-1, o in proptest::array::uniform3(0.0f64..6.2)) {
            let o = Orientation::from_array(o);
            let g = layout_g_factor(&fig1(), &o);
            prop_assume!(g.abs() > 1e-3);
            let ctx = neutron();
            let dx = bound_estimate(s, g, &ctx).unwrap();
            let at_bound = ctx.with_dx(dx).unwrap();
            prop_assert!(((g * at_bound.chi()).abs() - s).abs() <= 1e-12 * s);
            let phase = crate::geometry::relative_phase(&fig1(), &o, &at_bound, &symmetric_spin()).unwrap();
            prop_assert!((phase.abs() - s).abs() <= 1e-10 * s);
        }
    }
}
