//! Execution of a resolved [`RunConfig`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use bccwalk::effective::{
    build_h0, h1_matrix_elements_closed_form, h1_matrix_elements_numeric, verify_second_order_matching,
    EffectiveHamiltonian,
};
use bccwalk::geometry::{
    builtin_layout, default_fig1_layout, g_direction, layout_g_factor, relative_phase, rotation_matrix,
    segment_phase, segment_phase_closed_form, Layout, Orientation, PhysicalContext, Segment,
};
use bccwalk::layout_file::load_layout;
use bccwalk::scan::{
    bound_estimate, grid_scan, optimize_orientation, scan_to_csv, sidereal_series, sidereal_to_csv, GridSpec,
    SiderealSpec, SCHEMA_VERSION,
};
use bccwalk::spinor::{
    anticommutator, build_operator_set, hermitian_eig, max_abs, unitarity_defect, ComplexMatrix4, Spinor2,
};
use bccwalk::walk::{
    dispersion_gradient, exact_dispersion, make_gaussian_packet, packet_group_velocity, project_onto_branch,
    step_unitary, LatticeState, WalkParameters,
};

use crate::config::{Command, RunConfig, TableFormat};
use crate::error::CliError;

/// Everything a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub config: RunConfig,
    pub outputs: Value,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Names of failed invariant checks (only `verify` fills this).
    pub failed_checks: Vec<String>,
    pub duration_seconds: f64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.failed_checks.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Parses a spin spec: `symmetric`, `up`, `down`, `circular` or
/// `a_re,a_im,b_re,b_im`.
pub fn parse_spin(spec: &str) -> Result<Spinor2, CliError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let spin = match spec.trim() {
        "symmetric" => Spinor2::new(Complex64::new(s, 0.0), Complex64::new(s, 0.0)),
        "circular" => Spinor2::new(Complex64::new(s, 0.0), Complex64::new(0.0, s)),
        "up" => Spinor2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        "down" => Spinor2::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        other => {
            let nums: Vec<f64> = other
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("field 'spin' = '{other}': {e}")))?;
            let [ar, ai, br, bi] = nums[..] else {
                return Err(CliError::Config(format!(
                    "field 'spin' = '{other}': expected symmetric, up, down, circular or four numbers"
                )));
            };
            Spinor2::new(Complex64::new(ar, ai), Complex64::new(br, bi))
        }
    };
    let norm_sq = spin.norm_squared();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(CliError::Config(format!("field 'spin' = '{spec}': |a|²+|b|² = {norm_sq}, expected 1")));
    }
    Ok(spin)
}

fn resolve_layout(name: &str, warnings: &mut Vec<String>) -> Result<Layout, CliError> {
    if let Some(layout) = builtin_layout(name) {
        return Ok(layout);
    }
    let loaded = load_layout(Path::new(name)).map_err(|e| CliError::Config(e.to_string()))?;
    warnings.extend(loaded.warnings);
    Ok(loaded.layout)
}

fn context(config: &RunConfig) -> Result<PhysicalContext, CliError> {
    Ok(PhysicalContext::new(config.mass, config.momentum, config.c, config.hbar, config.dx, config.arm_length)?)
}

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn orientation_json(o: &Orientation) -> Value {
    json!([o.theta1, o.theta2, o.theta3])
}

struct Outputs {
    values: Value,
    tables: Vec<(String, String, Value)>,
    failed: Vec<String>,
}

impl Outputs {
    fn values(values: Value) -> Self {
        Self { values, tables: Vec::new(), failed: Vec::new() }
    }
}

/// Executes the command, writes its files and returns the report.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let started = Instant::now();
    let mut warnings = Vec::new();
    let out = match config.command {
        Command::Verify => verify()?,
        Command::Dispersion => dispersion(config)?,
        Command::WalkSim => walk_sim(config)?,
        Command::Gfactor => gfactor(config, &mut warnings)?,
        Command::Scan => scan(config, &mut warnings)?,
        Command::Optimize => optimize(config, &mut warnings)?,
        Command::Phase => phase(config, &mut warnings)?,
        Command::Sidereal => sidereal(config, &mut warnings)?,
        Command::Bound => bound(config)?,
    };

    std::fs::create_dir_all(&config.output)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.output.display())))?;
    let mut files = Vec::new();
    let mut values = out.values;
    for (name, csv, rows) in out.tables {
        match config.format {
            TableFormat::Csv => {
                let path = config.output.join(format!("{name}.csv"));
                write_file(&path, &csv)?;
                files.push(path);
            }
            TableFormat::Json => {
                values[name.as_str()] = rows;
            }
        }
    }
    let report_path = config.output.join(format!("{}_report.json", config.command.name()));
    files.push(report_path.clone());
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: "bccwalk",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        config: config.clone(),
        outputs: values,
        warnings,
        files,
        failed_checks: out.failed,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&report_path, &text)?;
    Ok(report)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Deterministic points in `[lo, hi)³` from an additive recurrence.
fn sample_points(count: usize, lo: f64, hi: f64) -> Vec<[f64; 4]> {
    const STEPS: [f64; 4] = [0.754_877_666_246_692_8, 0.569_840_290_998_053_3, 0.430_159_709_001_946_7, 0.245_122_333_753_307_2];
    (1..=count)
        .map(|i| STEPS.map(|a| lo + (hi - lo) * (0.5 + a * i as f64).fract()))
        .collect()
}

struct Check {
    name: &'static str,
    residual: f64,
    tolerance: f64,
    /// `true` when the residual must not exceed the tolerance; `false` when
    /// it must reach it (slopes).
    upper: bool,
}

impl Check {
    fn passed(&self) -> bool {
        if self.upper {
            self.residual <= self.tolerance
        } else {
            self.residual >= self.tolerance
        }
    }
}

fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn verify() -> Result<Outputs, CliError> {
    let ops = build_operator_set();
    let members = ops.members();
    let identity = ComplexMatrix4::identity();
    let mut involution = 0.0f64;
    let mut anti = 0.0f64;
    for (i, a) in members.iter().enumerate() {
        involution = involution.max(max_abs(&(*a * *a - identity)));
        for b in members.iter().skip(i + 1) {
            anti = anti.max(max_abs(&anticommutator(a, b)));
        }
    }

    let mut unitarity = 0.0f64;
    let mut matching = 0.0f64;
    let mut d_diag = 0.0f64;
    let mut d_off = 0.0f64;
    for p in sample_points(100, -0.3, 0.3) {
        let params = WalkParameters::new([p[0], p[1], p[2]], p[3].abs())?;
        unitarity = unitarity.max(unitarity_defect(&step_unitary(&params)));
        matching = matching.max(verify_second_order_matching(&params));
        let num = h1_matrix_elements_numeric(&params)?;
        let cf = h1_matrix_elements_closed_form(&params)?;
        d_diag = d_diag.max((num.d11 - cf.d11).abs()).max((num.d22 - cf.d22).abs());
        d_off = d_off.max((num.d12.norm() - cf.d12_modulus).abs());
    }
    for p in sample_points(50, -3.1, 3.1) {
        let params = WalkParameters::new([p[0], p[1], p[2]], p[3].abs())?;
        unitarity = unitarity.max(unitarity_defect(&step_unitary(&params)));
    }

    let mut slope = f64::INFINITY;
    for p in sample_points(10, -1.0, 1.0) {
        let base = WalkParameters::new([p[0], p[1], p[2]], p[3].abs())?;
        let scales: Vec<f64> = (0..8).map(|i| 0.1 * 0.5f64.powi(i)).collect();
        let remainders = scales
            .iter()
            .map(|&s| EffectiveHamiltonian::new(&base.scaled(s)?).oracle_remainder())
            .collect::<bccwalk::Result<Vec<f64>>>()?;
        slope = slope.min(log_log_slope(&scales, &remainders));
    }

    let mut h0_spectrum = 0.0f64;
    for p in sample_points(20, -0.5, 0.5) {
        let params = WalkParameters::new([p[0], p[1], p[2]], p[3].abs())?;
        let values = hermitian_eig(&build_h0(&params))?.values;
        let e0 = params.e0();
        for (v, want) in values.iter().zip([-e0, -e0, e0, e0]) {
            h0_spectrum = h0_spectrum.max((v - want).abs());
        }
    }

    let ctx = PhysicalContext::neutron(2.5e-17)?;
    let spin = bccwalk::geometry::symmetric_spin();
    let mut segment = 0.0f64;
    for p in sample_points(100, -1.0, 1.0) {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let seg = Segment::new([p[0] / n, p[1] / n, p[2] / n], 0.5 + 0.5 * p[3].abs())?;
        let full = segment_phase(&seg, &ctx, &spin)?;
        let closed = segment_phase_closed_form(&seg, &ctx);
        segment = segment.max((full - closed).abs() / ctx.chi());
    }

    let fig1 = default_fig1_layout();
    let g_identity = layout_g_factor(&fig1, &Orientation::identity());

    let checks = [
        Check { name: "operator_involutions", residual: involution, tolerance: 1e-14, upper: true },
        Check { name: "operator_anticommutators", residual: anti, tolerance: 1e-14, upper: true },
        Check { name: "step_unitarity", residual: unitarity, tolerance: 1e-12, upper: true },
        Check { name: "h0_spectrum", residual: h0_spectrum, tolerance: 1e-10, upper: true },
        Check { name: "second_order_matching", residual: matching, tolerance: 1e-12, upper: true },
        Check { name: "oracle_remainder_slope", residual: slope, tolerance: 2.9, upper: false },
        Check { name: "h1_diagonal_closed_form", residual: d_diag, tolerance: 1e-12, upper: true },
        Check { name: "h1_offdiagonal_modulus", residual: d_off, tolerance: 1e-10, upper: true },
        Check { name: "segment_phase_closed_form", residual: segment, tolerance: 1e-10, upper: true },
        Check { name: "fig1_layout_closure", residual: fig1.closure_residual(), tolerance: 1e-15, upper: true },
        Check {
            name: "fig1_g_at_identity",
            residual: (g_identity - 1.0 / 3f64.sqrt()).abs(),
            tolerance: 1e-12,
            upper: true,
        },
    ];
    let failed = checks.iter().filter(|c| !c.passed()).map(|c| c.name.to_string()).collect();
    let list: Vec<Value> = checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "value": c.residual,
                "tolerance": c.tolerance,
                "kind": if c.upper { "max" } else { "min" },
                "passed": c.passed(),
            })
        })
        .collect();
    Ok(Outputs { values: json!({ "checks": list }), tables: Vec::new(), failed })
}

fn dispersion(config: &RunConfig) -> Result<Outputs, CliError> {
    let mut csv = format!(
        "# schema_version={SCHEMA_VERSION}\ns,kappa_x,kappa_y,kappa_z,omega0,omega1,omega2,omega3,e_continuum\n"
    );
    let mut rows = Vec::new();
    let last = (config.points - 1) as f64;
    for i in 0..config.points {
        let s = -1.0 + 2.0 * i as f64 / last;
        // `+ 0.0` turns −0 into 0 in the table.
        let kappa = config.kappa.map(|k| s * k + 0.0);
        let params = WalkParameters::new(kappa, config.theta)?;
        let omega = exact_dispersion(&params)?;
        let e = params.e0();
        let _ = writeln!(
            csv,
            "{:.9},{:.9},{:.9},{:.9},{},{},{},{},{}",
            s,
            kappa[0],
            kappa[1],
            kappa[2],
            sci(omega[0]),
            sci(omega[1]),
            sci(omega[2]),
            sci(omega[3]),
            sci(e)
        );
        rows.push(json!({ "s": s, "kappa": kappa, "omega": omega, "e_continuum": e }));
    }
    let values = json!({ "theta": config.theta, "direction": config.kappa, "points": config.points });
    Ok(Outputs { values, tables: vec![("dispersion".into(), csv, Value::Array(rows))], failed: Vec::new() })
}

fn walk_sim(config: &RunConfig) -> Result<Outputs, CliError> {
    let n = config.grid_size;
    let params = WalkParameters::new(config.kappa, config.theta)?;
    let spectrum = bccwalk::spinor::unitary_spectrum(&step_unitary(&params))?;
    let spin = spectrum.vectors[config.branch];
    let centre = [n / 2; 3];
    let packet = make_gaussian_packet(n, centre, config.width, config.kappa, spin)?;
    let (packet, retained) = project_onto_branch(&packet, config.theta, config.branch)?;

    let origin = packet.position_expectation(packet.circular_center());
    let mut csv = format!("# schema_version={SCHEMA_VERSION}\nstep,x,y,z,norm\n");
    let mut rows = Vec::new();
    let mut state: LatticeState = packet.clone();
    for step in 0..=config.steps {
        if step > 0 {
            state = state.step(config.theta);
        }
        let r = state.position_expectation(origin);
        let norm = state.norm_squared();
        let _ = writeln!(csv, "{step},{},{},{},{}", sci(r[0]), sci(r[1]), sci(r[2]), sci(norm));
        rows.push(json!({ "step": step, "position": r, "norm": norm }));
    }
    let measured = packet_group_velocity(&packet, config.theta, config.steps)?;
    let predicted = dispersion_gradient(&params, config.branch, 1e-6)?.map(|g| -g);
    let values = json!({
        "grid_size": n,
        "branch": config.branch,
        "retained_probability": retained,
        "measured_velocity": measured,
        "predicted_velocity": predicted,
        "final_norm": state.norm_squared(),
    });
    Ok(Outputs { values, tables: vec![("walk_sim".into(), csv, Value::Array(rows))], failed: Vec::new() })
}

fn orientation_of(config: &RunConfig) -> Orientation {
    Orientation::from_array(config.orientation)
}

fn gfactor(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Outputs, CliError> {
    let layout = resolve_layout(&config.layout, warnings)?;
    let o = orientation_of(config);
    let r = rotation_matrix(&o);
    let arm = |segments: &[Segment]| -> Vec<Value> {
        segments
            .iter()
            .map(|s| {
                let d = s.rotated(&r).direction();
                json!({ "direction": d, "fraction": s.fraction(), "g_direction": g_direction(d) })
            })
            .collect()
    };
    Ok(Outputs::values(json!({
        "layout": layout.name(),
        "orientation": orientation_json(&o),
        "g": layout_g_factor(&layout, &o),
        "upper": arm(layout.arm_upper()),
        "lower": arm(layout.arm_lower()),
    })))
}

fn scan(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Outputs, CliError> {
    let layout = resolve_layout(&config.layout, warnings)?;
    let result = grid_scan(&layout, GridSpec { steps: config.grid }, config.workers)?;
    let rows: Vec<Value> = result
        .rows
        .iter()
        .map(|r| json!({ "orientation": orientation_json(&r.orientation), "g": r.g }))
        .collect();
    let values = json!({
        "layout": layout.name(),
        "grid": config.grid,
        "rows": result.rows.len(),
        "min": result.min,
        "max": result.max,
        "argmin": orientation_json(&result.argmin),
        "argmax": orientation_json(&result.argmax),
        "median_abs": result.median_abs,
    });
    Ok(Outputs { values, tables: vec![("scan".into(), scan_to_csv(&result), Value::Array(rows))], failed: Vec::new() })
}

fn optimize(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Outputs, CliError> {
    let layout = resolve_layout(&config.layout, warnings)?;
    let start = orientation_of(config);
    let found = optimize_orientation(&layout, start)?;
    Ok(Outputs::values(json!({
        "layout": layout.name(),
        "start": orientation_json(&start),
        "start_g": layout_g_factor(&layout, &start),
        "orientation": orientation_json(&found.orientation),
        "g": found.g,
        "evaluations": found.evaluations,
    })))
}

fn phase(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Outputs, CliError> {
    let layout = resolve_layout(&config.layout, warnings)?;
    let ctx = context(config)?;
    let spin = parse_spin(&config.spin)?;
    let o = orientation_of(config);
    let delta = relative_phase(&layout, &o, &ctx, &spin)?;
    let g = layout_g_factor(&layout, &o);
    Ok(Outputs::values(json!({
        "layout": layout.name(),
        "orientation": orientation_json(&o),
        "chi": ctx.chi(),
        "g": g,
        "delta_phi": delta,
        "delta_phi_closed_form": g * ctx.chi(),
    })))
}

fn sidereal(config: &RunConfig, warnings: &mut Vec<String>) -> Result<Outputs, CliError> {
    let layout = resolve_layout(&config.layout, warnings)?;
    let ctx = context(config)?;
    let spin = parse_spin(&config.spin)?;
    let spec = SiderealSpec {
        base: orientation_of(config),
        axis: config.axis,
        duration: config.duration,
        dt: config.dt,
        period: config.period,
    };
    let pool = rayon_pool(config.workers)?;
    let series = pool.install(|| sidereal_series(&layout, &spec, &ctx, &spin))?;
    let frequency = series.dominant_frequency();
    let rows: Vec<Value> = series
        .times
        .iter()
        .zip(&series.phases)
        .map(|(t, p)| json!({ "t": t, "delta_phi": p }))
        .collect();
    let values = json!({
        "layout": layout.name(),
        "samples": series.times.len(),
        "axis": series.axis,
        "period": series.period,
        "dominant_frequency_hz": frequency,
        "dominant_harmonic": frequency.map(|f| f * series.period),
        "peak_to_peak": series.peak_to_peak(),
        "periodicity_defect": series.periodicity_defect(),
    });
    Ok(Outputs { values, tables: vec![("sidereal".into(), sidereal_to_csv(&series), Value::Array(rows))], failed: Vec::new() })
}

fn rayon_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("field 'workers': {e}")))
}

fn bound(config: &RunConfig) -> Result<Outputs, CliError> {
    let ctx = context(config)?;
    let dx = bound_estimate(config.sensitivity, config.g, &ctx)?;
    Ok(Outputs::values(json!({
        "sensitivity": config.sensitivity,
        "g": config.g,
        "phase_per_dx": config.g * ctx.chi() / ctx.dx(),
        "dx_bound": dx,
    })))
}
