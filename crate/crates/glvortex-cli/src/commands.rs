//! Command implementations. Each writes its artifacts into the output
//! directory and returns the checks it ran.

use crate::config::{
    ChartChoice, CommandConfig, FarFieldChoice, FermiCheckArgs, FieldDumpArgs, JacobiSolveArgs, LinopSpectrumArgs, Order, ProfileArgs,
    ResidualScanArgs, RunConfig, SolveLambdaArgs, SurfaceInfoArgs, VerifyAllArgs,
};
use crate::error::{CliError, CliResult};
use glvortex::fermi::{CatenoidLogShift, FermiFrame, ShiftField, ZeroShift};
use glvortex::fields::{build_w0, build_w1, residual_scaling_study, FieldPair, SampleSet, Weight};
use glvortex::jacobi::{build_h0, solve_corrected_jacobi};
use glvortex::linop::{assemble_l, solve_lambda, LambdaTerms, PolarGrid};
use glvortex::profile::{least_squares_slope, ode_residual, solve_profile, solve_profile_with, FarField, ProfileConfig, RadialProfile};
use glvortex::surface::{catenoid_chart, cylinder_chart, end_report, plane_chart, write_mesh_csv, SurfaceChart};
use glvortex::verify::{self, Context, CriterionResult, ORACLE_CONSTANT, STUDY_XI1};
use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const OUT_ENV: &str = "GLVORTEX_OUT";

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub passed: bool,
    pub note: String,
}

/// What a command did: its checks and the files it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    /// Extra lines printed before the verdict.
    #[serde(skip)]
    pub lines: Vec<String>,
}

impl Outcome {
    fn new(command: &'static str) -> Self {
        Outcome { command, checks: Vec::new(), files: Vec::new(), lines: Vec::new() }
    }

    fn check(&mut self, passed: bool, note: String) {
        self.checks.push(Check { passed, note });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn verdict(&self) -> String {
        let notes: Vec<String> =
            self.checks.iter().map(|c| if c.passed { c.note.clone() } else { format!("{} (failed)", c.note) }).collect();
        format!("{} {}: {}", if self.passed() { "PASS" } else { "FAIL" }, self.command, notes.join("; "))
    }
}

/// Output directory: explicit flag, then the environment, then ".".
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
}

impl Output {
    pub fn resolve(flag: Option<&Path>) -> CliResult<Self> {
        let dir = match flag {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir })
    }

    fn create(&self, name: &str, o: &mut Outcome) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        o.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T, o: &mut Outcome) -> CliResult<()> {
        let mut w = self.create(name, o)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn require(ok: bool, flag: &str, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: {}", msg())))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn strictly_decreasing_positive(v: &[f64]) -> bool {
    v.iter().all(|&x| positive(x)) && v.windows(2).all(|w| w[1] < w[0])
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

/// Runs one configured command, recording the config next to its artifacts.
pub fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    let out = Output::resolve(cfg.out.as_deref())?;
    let mut o = Outcome::new(cfg.command.name());
    {
        let name = format!("{}.config.json", cfg.command.name());
        let mut w = out.create(&name, &mut o)?;
        w.write_all(cfg.to_canonical().as_bytes())?;
        w.flush()?;
    }
    match &cfg.command {
        CommandConfig::Profile(a) => cmd_profile(a, &out, &mut o)?,
        CommandConfig::ResidualScan(a) => cmd_residual_scan(a, &out, &mut o)?,
        CommandConfig::FieldDump(a) => cmd_field_dump(a, &out, &mut o)?,
        CommandConfig::LinopSpectrum(a) => cmd_linop_spectrum(a, &out, &mut o)?,
        CommandConfig::SolveLambda(a) => cmd_solve_lambda(a, &out, &mut o)?,
        CommandConfig::JacobiSolve(a) => cmd_jacobi_solve(a, &out, &mut o)?,
        CommandConfig::SurfaceInfo(a) => cmd_surface_info(a, &out, &mut o)?,
        CommandConfig::FermiCheck(a) => cmd_fermi_check(a, &out, &mut o)?,
        CommandConfig::VerifyAll(a) => cmd_verify_all(a, &out, &mut o)?,
    }
    Ok(o)
}

/// Profile shared by the tube-field commands.
fn study_profile() -> CliResult<Arc<RadialProfile>> {
    log::info!("solving profile on [0, 24]");
    Ok(Arc::new(solve_profile(24.0, 12001, 1e-9)?))
}

/// Profile long enough for a polar disc of radius `r_outer`.
fn disc_profile(r_outer: f64) -> CliResult<RadialProfile> {
    let r_max = r_outer + 12.0;
    let n = (r_max * 500.0).round() as usize + 1;
    log::info!("solving profile on [0, {r_max}] with {n} nodes");
    Ok(solve_profile(r_max, n, 1e-9)?)
}

fn study_lambda(p: &RadialProfile) -> CliResult<Arc<LambdaTerms>> {
    log::info!("solving improvement terms");
    Ok(Arc::new(solve_lambda(p, 14.0, 400, 16)?))
}

fn tube_chart(choice: ChartChoice) -> CliResult<Arc<dyn SurfaceChart<f64>>> {
    Ok(match choice {
        ChartChoice::Catenoid => Arc::new(catenoid_chart(6.0, 121, 64)?),
        ChartChoice::Cylinder => Arc::new(cylinder_chart(1.0, 6.0, 121, 64)?),
        ChartChoice::Plane => Arc::new(plane_chart(6.0, 121)?),
    })
}

fn tube_shift(chart: ChartChoice, order: Order) -> Arc<dyn ShiftField<f64>> {
    match (chart, order) {
        (ChartChoice::Catenoid, Order::W1) => Arc::new(CatenoidLogShift { scale: 1.0 }),
        _ => Arc::new(ZeroShift),
    }
}

fn cmd_profile(a: &ProfileArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(positive(a.rmax), "--rmax", || format!("must be a positive radius, got {}", a.rmax))?;
    require(a.n >= 20, "--n", || format!("needs at least 20 nodes, got {}", a.n))?;
    require(positive(a.tol), "--tol", || format!("must be positive, got {}", a.tol))?;
    let far_field = match a.far_field {
        FarFieldChoice::Dirichlet => FarField::Dirichlet,
        FarFieldChoice::Asymptotic => FarField::Asymptotic,
    };
    let p = solve_profile_with(ProfileConfig { r_max: a.rmax, n: a.n, tol: a.tol, far_field, ..Default::default() })?;
    let res = ode_residual(&p).sup();
    let (rf, ra) = p.decay_rates();
    o.check(res < 1e-6, format!("independent residual {res:.2e} < 1e-6"));
    o.check(within(rf, 1.0, 0.15) && within(ra, 1.0, 0.15), format!("decay rates {rf:.4}, {ra:.4} in 1 ± 0.15"));
    let mut w = out.create("profile.csv", o)?;
    p.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    let report = json!({
        "report": p.report(),
        "iterations": p.iterations,
        "ode_residual": res,
        "checks": o.checks,
    });
    out.write_json("profile.json", &report, o)
}

fn cmd_residual_scan(a: &ResidualScanArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(a.chart != ChartChoice::Plane, "--chart", || "the plane carries no curvature; use catenoid or cylinder".into())?;
    require(a.eps.len() >= 3 && strictly_decreasing_positive(&a.eps), "--eps", || {
        format!("needs at least 3 strictly decreasing positive values, got {:?}", a.eps)
    })?;
    require(positive(a.delta), "--delta", || format!("must be positive, got {}", a.delta))?;
    require(positive(a.t_max), "--t-max", || format!("must be positive, got {}", a.t_max))?;
    if let Some(b) = a.band {
        require(positive(b), "--band", || format!("must be positive, got {b}"))?;
    }
    let order = match (a.chart, a.order) {
        (ChartChoice::Catenoid, Order::W0) => 2.0,
        (ChartChoice::Catenoid, Order::W1) => 3.0,
        _ => 1.0,
    };
    let band = a.band.unwrap_or(if order == 3.0 { 0.40 } else { 0.25 });
    let p = study_profile()?;
    let lam = if a.order == Order::W1 { Some(study_lambda(&p)?) } else { None };
    let chart = tube_chart(a.chart)?;
    let samples = SampleSet::standard(STUDY_XI1, a.t_max);
    let rows = residual_scaling_study(&a.eps, &samples, Weight::default(), |e| {
        log::info!("residual scan at eps = {e}");
        let frame = FermiFrame::with_shift(chart.clone(), e, tube_shift(a.chart, a.order), a.delta)?;
        let field: Arc<dyn FieldPair> = match &lam {
            Some(l) => Arc::new(build_w1(p.clone(), frame.clone(), l.clone())),
            None => Arc::new(build_w0(p.clone(), frame.clone())),
        };
        Ok((field, frame))
    })?;
    let mut w = csv::Writer::from_writer(out.create("residual_scan.csv", o)?);
    w.write_record(["epsilon", "weighted_sup", "ratio", "expected_ratio", "oracle_gap", "oracle_gap_over_step2", "step", "samples"])?;
    let mut worst_gap = 0.0f64;
    for (k, r) in rows.iter().enumerate() {
        let expected = (k > 0).then(|| (rows[k - 1].epsilon / r.epsilon).powf(order));
        w.write_record([
            num(r.epsilon),
            num(r.weighted_sup),
            r.ratio.map(num).unwrap_or_default(),
            expected.map(num).unwrap_or_default(),
            num(r.oracle_gap),
            num(r.oracle_gap_over_step2),
            num(r.step),
            r.samples.to_string(),
        ])?;
        worst_gap = worst_gap.max(r.oracle_gap_over_step2);
        if let (Some(ratio), Some(expected)) = (r.ratio, expected) {
            o.check(within(ratio, expected, band), format!("ratio {ratio:.3} vs {expected:.3} ± {:.0}%", band * 100.0));
        }
    }
    w.flush()?;
    o.check(worst_gap <= ORACLE_CONSTANT, format!("route gap / step² ≤ {worst_gap:.2e}"));
    Ok(())
}

fn cmd_field_dump(a: &FieldDumpArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(positive(a.eps), "--eps", || format!("must be positive, got {}", a.eps))?;
    require(positive(a.delta), "--delta", || format!("must be positive, got {}", a.delta))?;
    require(a.xi.len() == 2 && a.xi.iter().all(|x| x.is_finite()), "--xi", || format!("needs two finite values, got {:?}", a.xi))?;
    require(positive(a.t_max), "--t-max", || format!("must be positive, got {}", a.t_max))?;
    require(a.n >= 3 && !a.n.is_multiple_of(2), "--n", || format!("must be odd and at least 3, got {}", a.n))?;
    let p = study_profile()?;
    let chart = tube_chart(a.chart)?;
    let frame = FermiFrame::with_shift(chart, a.eps, tube_shift(a.chart, a.order), a.delta)?;
    let field: Arc<dyn FieldPair> = match a.order {
        Order::W0 => Arc::new(build_w0(p.clone(), frame.clone())),
        Order::W1 => Arc::new(build_w1(p.clone(), frame.clone(), study_lambda(&p)?)),
    };
    let xi = [a.xi[0], a.xi[1]];
    let half = (a.n / 2) as f64;
    let mut w = csv::Writer::from_writer(out.create("field_dump.csv", o)?);
    w.write_record(["t1", "t2", "x0", "x1", "x2", "x3", "u_re", "u_im", "a0", "a1", "a2", "a3"])?;
    let (mut u_center, mut u_sup) = (f64::NAN, 0.0f64);
    for i in 0..a.n {
        for j in 0..a.n {
            let t = [a.t_max * (i as f64 - half) / half, a.t_max * (j as f64 - half) / half];
            let x = frame.fermi_map(xi, t).map_err(|e| match e {
                glvortex::Error::OutsideTube(m) => CliError::Usage(format!("--t-max: grid leaves the tube ({m})")),
                e => e.into(),
            })?;
            let v = field.eval(x)?;
            if i as f64 == half && j as f64 == half {
                u_center = v.u.norm();
            }
            u_sup = u_sup.max(v.u.norm());
            let rec = [t[0], t[1], x[0], x[1], x[2], x[3], v.u.re, v.u.im, v.a[0], v.a[1], v.a[2], v.a[3]];
            w.write_record(rec.iter().map(|&v| num(v)))?;
        }
    }
    w.flush()?;
    let slack = 10.0 * a.eps * a.eps;
    match a.order {
        Order::W0 => o.check(u_center < 1e-12, format!("|u| at the core {u_center:.1e} < 1e-12")),
        Order::W1 => o.check(u_center < slack, format!("|u| at the core {u_center:.1e} < 10ε²")),
    }
    o.check(u_sup <= 1.0 + slack, format!("sup |u| = {u_sup:.6} ≤ 1 + 10ε²"));
    Ok(())
}

fn cmd_linop_spectrum(a: &LinopSpectrumArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(positive(a.r_outer) && a.r_outer >= 4.0, "--R", || format!("must be at least 4, got {}", a.r_outer))?;
    require(a.n_rho >= 32, "--n-rho", || format!("needs at least 32 rings, got {}", a.n_rho))?;
    require(a.n_theta >= 8 && a.n_theta.is_multiple_of(2), "--n-theta", || format!("must be even and at least 8, got {}", a.n_theta))?;
    require(a.count >= 3, "--count", || format!("needs at least 3 eigenvalues, got {}", a.count))?;
    let p = disc_profile(a.r_outer)?;
    let sys = assemble_l(&p, a.r_outer, a.n_rho, a.n_theta)?;
    let kernel_residuals = [sys.kernel_residual(0, 1.0), sys.kernel_residual(1, 1.0)];
    let coercivity = sys.coercivity_constant()?;
    let eig: Vec<f64> = sys.low_spectrum(a.count, -0.5, false)?.iter().map(|e| e.value).collect();
    let near = eig.iter().filter(|v| v.abs() < 0.1).count();
    o.check(coercivity > 0.0, format!("coercivity constant {coercivity:.5} > 0"));
    o.check(near == 2, format!("{near} near-zero eigenvalues of {}", eig.len()));
    let report = json!({
        "R": a.r_outer,
        "n_rho": a.n_rho,
        "n_theta": a.n_theta,
        "kernel_residuals": kernel_residuals,
        "coercivity_constant": coercivity,
        "eig_low": eig,
        "symmetry_defect": sys.symmetry_defect(),
        "checks": o.checks,
    });
    out.write_json("linop_spectrum.json", &report, o)
}

fn ring_sup(grid: &PolarGrid, values: &[f64], i: usize) -> f64 {
    (0..grid.n_theta).flat_map(|j| (0..4).map(move |c| values[grid.index(i, j, c)].abs())).fold(0.0, f64::max)
}

fn cmd_solve_lambda(a: &SolveLambdaArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(positive(a.r_outer) && a.r_outer >= 8.0, "--R", || format!("must be at least 8, got {}", a.r_outer))?;
    require(a.n_rho >= 32, "--n-rho", || format!("needs at least 32 rings, got {}", a.n_rho))?;
    require(a.n_theta >= 8 && a.n_theta.is_multiple_of(2), "--n-theta", || format!("must be even and at least 8, got {}", a.n_theta))?;
    let p = disc_profile(a.r_outer)?;
    let lt = solve_lambda(&p, a.r_outer, a.n_rho, a.n_theta)?;
    let g = lt.lambda1.grid;
    let mut w = csv::Writer::from_writer(out.create("lambda.csv", o)?);
    let mut header = vec!["rho".to_string(), "theta".to_string()];
    for name in ["l1", "l11"] {
        header.extend(["phi_re", "phi_im", "omega1", "omega2"].iter().map(|c| format!("{name}_{c}")));
    }
    w.write_record(&header)?;
    for i in 0..g.n_rho {
        for j in 0..g.n_theta {
            let mut rec = vec![num(g.rho(i)), num(g.theta(j))];
            for nodal in &lt.nodal {
                rec.extend((0..4).map(|c| num(nodal[g.index(i, j, c)])));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    drop(w);
    let worst_mult = lt.multipliers.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    o.check(worst_mult < 1e-6, format!("kernel multipliers ≤ {worst_mult:.1e} < 1e-6"));
    let ring = |rho: f64| ((rho / g.h() - 0.5).round().max(0.0) as usize).min(g.n_rho - 1);
    let (ia, ib) = (ring(a.r_outer / 3.0), ring(a.r_outer - 2.0));
    let mut decay = Vec::new();
    for (name, nodal) in ["Λ₁", "Λ₁₁"].iter().zip(&lt.nodal) {
        let (va, vb) = (ring_sup(&g, nodal, ia), ring_sup(&g, nodal, ib));
        let bound = (-0.5 * (g.rho(ib) - g.rho(ia))).exp() * va;
        o.check(vb < bound, format!("{name} ring sup {vb:.1e} at ρ = {:.2} below {bound:.1e}", g.rho(ib)));
        decay.push(json!({ "field": name, "rho_inner": g.rho(ia), "sup_inner": va, "rho_outer": g.rho(ib), "sup_outer": vb }));
    }
    let report = json!({
        "R": a.r_outer,
        "n_rho": a.n_rho,
        "n_theta": a.n_theta,
        "multipliers": lt.multipliers,
        "decay": decay,
        "checks": o.checks,
    });
    out.write_json("lambda.json", &report, o)
}

#[derive(serde::Deserialize)]
struct RhsRow {
    xi1: f64,
    xi2: f64,
    f1: f64,
    f2: f64,
}

fn read_rhs(path: &Path, chart: &dyn SurfaceChart<f64>) -> CliResult<[Vec<f64>; 2]> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let g = chart.grid();
    let mut f = [Vec::with_capacity(g.len()), Vec::with_capacity(g.len())];
    for (k, row) in csv::Reader::from_reader(file).deserialize::<RhsRow>().enumerate() {
        let row = row.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        require(k < g.len(), "--rhs", || format!("more rows than the {} grid nodes", g.len()))?;
        let xi = g.node(k / g.n[1], k % g.n[1]);
        require((row.xi1 - xi[0]).abs() < 1e-9 && (row.xi2 - xi[1]).abs() < 1e-9, "--rhs", || {
            format!("row {} at ({}, {}) does not match grid node ({}, {})", k + 1, row.xi1, row.xi2, xi[0], xi[1])
        })?;
        f[0].push(row.f1);
        f[1].push(row.f2);
    }
    require(f[0].len() == g.len(), "--rhs", || format!("{} rows for {} grid nodes", f[0].len(), g.len()))?;
    Ok(f)
}

fn cmd_jacobi_solve(a: &JacobiSolveArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(a.lambda.len() == 2 && a.lambda.iter().all(|x| x.is_finite()), "--lambda", || {
        format!("needs two finite values, got {:?}", a.lambda)
    })?;
    let lambda = [a.lambda[0], a.lambda[1]];
    let scale = lambda[0].abs().max(lambda[1].abs()).max(1.0);
    require((lambda[0] + lambda[1]).abs() <= 1e-12 * scale, "--lambda", || {
        format!("entries must sum to zero, got {} + {}", lambda[0], lambda[1])
    })?;
    require(positive(a.s_max), "--s-max", || format!("must be positive, got {}", a.s_max))?;
    let chart = catenoid_chart(a.s_max, a.n_s, a.n_theta)?;
    let g = chart.grid();
    let f = match &a.rhs {
        Some(path) => read_rhs(path, &chart)?,
        None => [g.sample(|x| x[0].cosh().powi(-4)), vec![0.0; g.len()]],
    };
    let sol = solve_corrected_jacobi(&chart, &f)?;
    let h0 = if lambda != [0.0, 0.0] { Some(build_h0(&chart, lambda)?) } else { None };
    let mut w = csv::Writer::from_writer(out.create("jacobi_solution.csv", o)?);
    w.write_record(["xi1", "xi2", "f1", "f2", "h1", "h2", "h0"])?;
    for k in 0..g.len() {
        let xi = g.node(k / g.n[1], k % g.n[1]);
        let h0k = h0.as_ref().map_or(0.0, |h| h.h0[k]);
        w.write_record([xi[0], xi[1], f[0][k], f[1][k], sol.h[0][k], sol.h[1][k], h0k].iter().map(|&v| num(v)))?;
    }
    w.flush()?;
    drop(w);
    o.check(sol.defect < 1e-9, format!("corrected solve defect {:.1e} < 1e-9", sol.defect));
    if let Some(h) = &h0 {
        o.check(h.defect < 1e-9, format!("h0 defect {:.1e} < 1e-9", h.defect));
    }
    let report = json!({
        "s_max": a.s_max,
        "n_s": a.n_s,
        "n_theta": a.n_theta,
        "lambda": lambda,
        "solution": sol,
        "h0": h0,
        "checks": o.checks,
    });
    out.write_json("jacobi.json", &report, o)
}

fn cmd_surface_info(a: &SurfaceInfoArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(positive(a.s_max), "--s-max", || format!("must be positive, got {}", a.s_max))?;
    require(positive(a.radius), "--radius", || format!("must be positive, got {}", a.radius))?;
    let chart: Box<dyn SurfaceChart<f64>> = match a.chart {
        ChartChoice::Catenoid => Box::new(catenoid_chart(a.s_max, a.n_s, a.n_theta)?),
        ChartChoice::Cylinder => Box::new(cylinder_chart(a.radius, a.s_max, a.n_s, a.n_theta)?),
        ChartChoice::Plane => Box::new(plane_chart(a.s_max, a.n_s)?),
    };
    let g = chart.grid();
    let h_target = if a.chart == ChartChoice::Cylinder { 1.0 / a.radius } else { 0.0 };
    let mut h_err = 0.0f64;
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            h_err = h_err.max((chart.mean_curvature(g.node(i, j)).abs() - h_target).abs());
        }
    }
    let ends = end_report(chart.as_ref());
    let kt_target = if a.chart == ChartChoice::Catenoid { 4.0 * std::f64::consts::PI * a.s_max.tanh() } else { 0.0 };
    let kt_err = (ends.total_curvature.abs() - kt_target).abs();
    o.check(h_err < 1e-8, format!("mean curvature error {h_err:.1e} < 1e-8 against |H| = {h_target}"));
    o.check(kt_err < 1e-2, format!("|total curvature| {:.5} vs {kt_target:.5}", ends.total_curvature.abs()));
    let a_sum: f64 = ends.ends.iter().map(|e| e.a).sum();
    o.check(a_sum.abs() < 1e-12, format!("end coefficients sum to {:.1e}", a_sum.abs()));
    let mut w = out.create("mesh.csv", o)?;
    write_mesh_csv(chart.as_ref(), &mut w)?;
    w.flush()?;
    drop(w);
    let report = json!({
        "chart": a.chart,
        "ends": ends.ends,
        "total_curvature": ends.total_curvature,
        "mean_curvature_error": h_err,
        "checks": o.checks,
    });
    out.write_json("ends.json", &report, o)
}

fn cmd_fermi_check(a: &FermiCheckArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    require(a.scales.len() >= 2 && strictly_decreasing_positive(&a.scales), "--scales", || {
        format!("needs at least 2 strictly decreasing positive values, got {:?}", a.scales)
    })?;
    require(a.steps.len() >= 2 && strictly_decreasing_positive(&a.steps), "--steps", || {
        format!("needs at least 2 strictly decreasing positive values, got {:?}", a.steps)
    })?;
    let chart: Arc<dyn SurfaceChart<f64>> = Arc::new(catenoid_chart(6.0, 121, 64)?);
    let frame = FermiFrame::new(chart, 1.0)?;
    let mut samples = Vec::new();
    let mut slopes = Vec::new();
    for &xi in &[[0.3, 0.7], [-0.8, 2.0], [0.0, 0.0]] {
        for &phi in &[0.4f64, 2.5] {
            let mut pts = Vec::new();
            for &z in &a.scales {
                let s = frame.expansion_sample(xi, [z * phi.cos(), z * phi.sin()])?;
                pts.push((z.ln(), s.remainder[0].abs().ln()));
                samples.push(s);
            }
            slopes.push(least_squares_slope(&pts));
        }
    }
    let worst_slope = slopes.iter().cloned().fold(3.0, |m: f64, s| if (s - 3.0).abs() > (m - 3.0).abs() { s } else { m });
    o.check((worst_slope - 3.0).abs() <= 0.3, format!("remainder slope {worst_slope:.3} in 3 ± 0.3"));
    let mut defects = Vec::new();
    let mut worst_order = f64::INFINITY;
    for &(xi, z) in &[([0.3, 0.7], [0.2, -0.1]), ([-1.1, 4.0], [-0.15, 0.3])] {
        let e: Vec<f64> = a.steps.iter().map(|&h| verify::fermi_metric_defect(&frame, xi, z, h)).collect::<Result<_, _>>()?;
        for k in 1..e.len() {
            worst_order = worst_order.min((e[k - 1] / e[k]).ln() / (a.steps[k - 1] / a.steps[k]).ln());
        }
        defects.push(e);
    }
    o.check((1.8..=2.2).contains(&worst_order), format!("FD metric defect order {worst_order:.2} in 2 ± 0.2"));
    let report = json!({
        "scales": a.scales,
        "steps": a.steps,
        "samples": samples,
        "slopes": slopes,
        "metric_defects": defects,
        "checks": o.checks,
    });
    out.write_json("fermi_check.json", &report, o)
}

fn cmd_verify_all(a: &VerifyAllArgs, out: &Output, o: &mut Outcome) -> CliResult<()> {
    type Criterion = fn(&Context) -> CriterionResult;
    let all: [Criterion; 8] = [
        verify::criterion_1,
        verify::criterion_2,
        verify::criterion_3,
        verify::criterion_4,
        verify::criterion_5,
        verify::criterion_6,
        verify::criterion_7,
        verify::criterion_8,
    ];
    for &id in &a.only {
        require((1..=8).contains(&id), "--only", || format!("criteria are numbered 1 to 8, got {id}"))?;
    }
    let ctx = Context::new();
    let mut results = Vec::new();
    for (k, run) in all.iter().enumerate() {
        if a.only.is_empty() || a.only.contains(&(k + 1)) {
            let r = run(&ctx);
            o.lines.push(r.line());
            o.check(r.passed, format!("criterion {}", r.id));
            results.push(r);
        }
    }
    out.write_json("verify.json", &json!({ "results": results }), o)
}
