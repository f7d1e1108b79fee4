//! Command-line front door: verification scans, the equivariant flow, the
//! mesh PDE monitors, sharpness measurement, and report aggregation.
//!
//! Exit codes: 0 = all requested certifications pass, 1 = usage or
//! configuration error, 2 = at least one violation found (counterexample
//! artifacts are still written). `PINCHFLOW_THREADS` caps parallelism
//! (0 = auto). An optional `key = value` config file supplies defaults;
//! command-line flags override it.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pinchflow::equivariant::{self, EquivariantState, Termination};
use pinchflow::lab::{
    self, LabOutput, LemmaParams, RowPolicy, ScanSpec, VerificationReport,
};
use pinchflow::pde;
use pinchflow::profile::{sharpness_defect, PinchingProfile, SharpFamilyPoint};
use pinchflow::report;

#[derive(Parser)]
#[command(name = "pinchflow", version, about = "Curvature pinching verification toolkit")]
struct Cli {
    /// Optional `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run inequality certifications and write a JSON report artifact.
    Verify(VerifyArgs),
    /// Integrate the equivariant flow ODE and write a trajectory CSV.
    FlowOde(FlowOdeArgs),
    /// Evolve a mesh fixture and write the monitor CSV.
    FlowPde(FlowPdeArgs),
    /// Print the measured sharpness defect and both coefficient candidates.
    Sharpness(SharpnessArgs),
    /// Aggregate report artifacts into one summary table.
    Report(ReportArgs),
}

#[derive(Args, Default)]
struct VerifyArgs {
    /// Which family to certify: 3.1 | 3.2 | constants | 4.1 | reaction |
    /// gradient | decay | all
    #[arg(long)]
    lemma: Option<String>,
    /// Dimensions, as a comma list or inclusive range `lo..hi` (e.g. 8..16).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    m: Option<u32>,
    /// Ambient curvature values (comma list).
    #[arg(long)]
    kbar: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    /// Top of the |H|² grid, in units of kbar.
    #[arg(long)]
    x_max: Option<f64>,
    /// Number of log-spaced grid points.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    p2_max: Option<f64>,
    #[arg(long)]
    p2_points: Option<usize>,
    /// Random samples per sampled check.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ambient curvature-variation bound for the matrix/reaction checks.
    #[arg(long)]
    rbar: Option<f64>,
    /// High-curvature threshold on |H|² for the reaction/decay checks.
    #[arg(long)]
    h2_threshold: Option<f64>,
    /// Also emit the low-|H| decay diagnostic (documented expected-fail).
    #[arg(long)]
    include_low_h_diagnostic: bool,
    /// Per-sample CSV detail: none | violations | all
    #[arg(long)]
    rows: Option<String>,
    /// JSON report artifact path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV path for per-sample rows.
    #[arg(long)]
    rows_out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowOdeArgs {
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    phi0: Option<f64>,
    #[arg(long)]
    kbar: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    /// Curvature cap |A|² (the singular-time proxy).
    #[arg(long)]
    cap: Option<f64>,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON summary path.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct FlowPdeArgs {
    /// Fixture: great-circle | small-circle | great-sphere | clifford |
    /// perturbed-clifford
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Profile dimension used by the monitors.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    kbar: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Monitor CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SharpnessArgs {
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    kbar: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report artifact paths.
    paths: Vec<PathBuf>,
    /// Optional summary CSV path (otherwise printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat `key = value` config file with `#` comments.
fn load_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!(
                "config {} line {}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            ));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => raw.parse().map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
            None => Ok(default),
        }
    }

    fn get_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
            None => Ok(None),
        }
    }
}

fn parse_u32_list(spec: &str) -> Result<Vec<u32>, String> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
        let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
        if lo > hi {
            return Err(format!("empty range `{spec}`"));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad dimension `{s}`")))
        .collect()
}

fn parse_f64_list(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad number `{s}`")))
        .collect()
}

fn parse_rows(spec: &str) -> Result<RowPolicy, String> {
    match spec {
        "none" => Ok(RowPolicy::None),
        "violations" => Ok(RowPolicy::Violations),
        "all" => Ok(RowPolicy::All),
        other => Err(format!("unknown rows policy `{other}` (none|violations|all)")),
    }
}

fn init_threads() -> Result<(), String> {
    match std::env::var("PINCHFLOW_THREADS") {
        Ok(raw) => {
            let threads: usize =
                raw.parse().map_err(|_| format!("PINCHFLOW_THREADS: cannot parse `{raw}`"))?;
            if threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .map_err(|e| format!("thread pool: {e}"))?;
            }
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run_verify(args: VerifyArgs, resolver: &Resolver) -> Result<u8, String> {
    let lemma = resolver.get(args.lemma, "lemma", "all".to_string())?;
    let n_spec = resolver.get(args.n, "n", "8,10,12,16,32,64,128".to_string())?;
    let n_set = parse_u32_list(&n_spec)?;
    let m = resolver.get(args.m, "m", 3u32)?;
    let kbar_spec = resolver.get(args.kbar, "kbar", "0.25,1,4".to_string())?;
    let kbar_set = parse_f64_list(&kbar_spec)?;
    let eps = resolver.get_opt(args.eps, "eps")?;
    let x_max = resolver.get(args.x_max, "x_max", 1e6)?;
    let grid = resolver.get(args.grid, "grid", 10_000usize)?;
    let p2_max = resolver.get(args.p2_max, "p2_max", 1e3)?;
    let p2_points = resolver.get(args.p2_points, "p2_points", 1_000usize)?;
    let samples = resolver.get(args.samples, "samples", 10_000u64)?;
    let seed = resolver.get(args.seed, "seed", 0u64)?;
    let rbar = resolver.get(args.rbar, "rbar", 0.0)?;
    let h2_threshold = resolver.get_opt(args.h2_threshold, "h2_threshold")?;
    let rows_spec = resolver.get(args.rows, "rows", "violations".to_string())?;
    let rows = parse_rows(&rows_spec)?;
    let include_low_h = args.include_low_h_diagnostic
        || resolver.file.get("include_low_h_diagnostic").map(|v| v == "true").unwrap_or(false);

    let spec = ScanSpec {
        x_max,
        grid_points: grid,
        refine_near_zero: true,
        n_set: n_set.clone(),
        kbar_set: kbar_set.clone(),
    };

    let profile_for = |n: u32| -> Result<PinchingProfile, String> {
        match eps {
            Some(e) => PinchingProfile::new(n, m, kbar_set[0], e),
            None => PinchingProfile::with_default_eps(n, m, kbar_set[0]),
        }
        .map_err(|e| e.to_string())
    };
    let params_for = |profile: &PinchingProfile| -> Result<LemmaParams, String> {
        let mut params = LemmaParams::for_profile(profile);
        params.rbar = rbar;
        if let Some(th) = h2_threshold {
            params.h2_threshold = th;
        }
        params.validate(profile.n()).map_err(|e| format!("lemma params: {e}"))?;
        Ok(params)
    };

    let mut output = LabOutput { reports: Vec::new(), rows: Vec::new() };
    let want = |name: &str| lemma == "all" || lemma == name;
    if want("3.1") {
        output = output.merge(lab::check_lemma_3_1(&spec, rows));
    }
    if want("3.2") {
        output = output.merge(lab::check_lemma_3_2(&spec, p2_max, p2_points, rows));
    }
    if want("constants") || lemma == "3.2" {
        output = output.merge(lab::check_pinching_constants(10_000));
    }
    if want("4.1") {
        // Matrix checks cap the dimension (larger n adds cost, not coverage).
        let dims: Vec<(u32, u32)> = n_set
            .iter()
            .filter(|&&n| n <= 16)
            .flat_map(|&n| [(n, 2), (n, 3), (n, 5)])
            .collect();
        output = output.merge(lab::check_matrix_lemma_4_1(&dims, samples, seed, rbar, rows));
    }
    if want("reaction") {
        for &n in &n_set {
            if n < 8 {
                continue;
            }
            let profile = profile_for(n)?;
            let params = params_for(&profile)?;
            output =
                output.merge(lab::check_reaction_lemmas(&profile, &params, samples, seed, rows));
        }
    }
    if want("gradient") {
        output = output.merge(lab::check_gradient_lemmas(128));
    }
    if want("decay") {
        for &n in &n_set {
            if n < 8 {
                continue;
            }
            let profile = profile_for(n)?;
            let params = params_for(&profile)?;
            output = output.merge(lab::check_decay_chain(
                &profile,
                &params,
                samples,
                seed,
                include_low_h,
                rows,
            ));
        }
    }
    if output.reports.is_empty() {
        return Err(format!("unknown lemma selector `{lemma}`"));
    }

    let config = json!({
        "command": "verify",
        "lemma": lemma,
        "n": n_set,
        "m": m,
        "kbar": kbar_set,
        "eps": eps,
        "x_max": x_max,
        "grid": grid,
        "p2_max": p2_max,
        "p2_points": p2_points,
        "samples": samples,
        "seed": seed,
        "rbar": rbar,
        "h2_threshold": h2_threshold,
        "include_low_h_diagnostic": include_low_h,
        "rows": rows_spec,
    });
    emit_verify_artifacts(&args.out, &args.rows_out, &config, &output)?;
    summarize_reports(&output.reports);
    Ok(if output.reports.iter().all(|r| r.passed()) { 0 } else { 2 })
}

fn emit_verify_artifacts(
    out: &Option<PathBuf>,
    rows_out: &Option<PathBuf>,
    config: &Value,
    output: &LabOutput,
) -> Result<(), String> {
    if let Some(path) = out {
        report::write_report_artifact(path, config, &output.reports).map_err(|e| e.to_string())?;
    } else {
        print!("{}", report::render_report_artifact(config, &output.reports));
    }
    if let Some(path) = rows_out {
        std::fs::write(path, report::render_lemma_csv(&output.rows))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn summarize_reports(reports: &[VerificationReport]) {
    for r in reports {
        eprintln!(
            "{}: {} samples, {} violations, min_slack {:e} -> {}",
            r.lemma_id,
            r.samples,
            r.violations,
            r.min_slack,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
}

fn run_flow_ode(args: FlowOdeArgs, resolver: &Resolver) -> Result<u8, String> {
    let p = resolver.get(args.p, "p", 1u32)?;
    let q = resolver.get(args.q, "q", 7u32)?;
    let phi0 = resolver.get(args.phi0, "phi0", 0.2)?;
    let kbar = resolver.get(args.kbar, "kbar", 1.0)?;
    let eps = resolver.get(args.eps, "eps", 0.0)?;
    let dt = resolver.get(args.dt, "dt", 1e-3)?;
    let t_max = resolver.get(args.t_max, "t_max", 100.0)?;
    let cap = resolver.get(args.cap, "cap", 1e6)?;

    let profile = PinchingProfile::new(p + q, 2, kbar, eps).map_err(|e| e.to_string())?;
    let state = EquivariantState::new(p, q, phi0, 0.0).map_err(|e| e.to_string())?;
    let traj = equivariant::evolve(&state, &profile, dt, t_max, cap).map_err(|e| e.to_string())?;

    let csv = report::render_trajectory_csv(&traj);
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.summary {
        let summary = json!({
            "config": {
                "command": "flow-ode",
                "p": p, "q": q, "phi0": phi0, "kbar": kbar, "eps": eps,
                "dt": dt, "t_max": t_max, "cap": cap,
            },
            "termination": traj.termination,
            "steps": traj.monitors.len(),
            "final": traj.final_monitor(),
        });
        std::fs::write(path, serde_json::to_string_pretty(&summary).unwrap() + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    eprintln!(
        "flow-ode: {} steps, termination {:?}, final ratio {}",
        traj.monitors.len(),
        traj.termination,
        traj.final_monitor().ratio
    );

    // Pinching preservation is the certified property: initially pinched
    // data must stay pinched on every recorded step.
    let initially_pinched = traj.monitors[0].pinched;
    let violated = initially_pinched
        && traj.termination != Termination::MinimalEquilibrium
        && traj.monitors.iter().any(|m| !m.pinched);
    Ok(if violated { 2 } else { 0 })
}

fn run_flow_pde(args: FlowPdeArgs, resolver: &Resolver) -> Result<u8, String> {
    let fixture = resolver.get(args.fixture, "fixture", "small-circle".to_string())?;
    let rho = resolver.get(args.rho, "rho", 0.8)?;
    let phi = resolver.get(args.phi, "phi", 0.6)?;
    let delta = resolver.get(args.delta, "delta", 1e-3)?;
    let points = resolver.get(args.points, "points", 48usize)?;
    let dt = resolver.get(args.dt, "dt", 1e-4)?;
    let steps = resolver.get(args.steps, "steps", 10usize)?;
    let n = resolver.get(args.n, "n", 8u32)?;
    let m = resolver.get(args.m, "m", 3u32)?;
    let kbar = resolver.get(args.kbar, "kbar", 1.0)?;
    let eps = resolver.get(args.eps, "eps", 0.0)?;

    let mesh = match fixture.as_str() {
        "great-circle" => pde::great_circle(4, points),
        "small-circle" => pde::small_circle(rho, 4, points),
        "great-sphere" => pde::great_two_sphere_cover(points, points),
        "clifford" => pde::clifford_torus(phi, 5, points),
        "perturbed-clifford" => pde::perturbed_clifford_torus(phi, delta, points),
        other => return Err(format!("unknown fixture `{other}`")),
    };
    let profile = PinchingProfile::new(n, m, kbar, eps).map_err(|e| e.to_string())?;
    let seq = pde::flow_sequence(&mesh, dt, steps).map_err(|e| e.to_string())?;
    let rows = pde::run_monitors(&seq, dt, &profile).map_err(|e| e.to_string())?;
    let csv = report::render_pde_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{csv}"),
    }
    eprintln!("flow-pde: fixture {fixture}, {} monitor rows", rows.len());
    Ok(0)
}

fn run_sharpness(args: SharpnessArgs, resolver: &Resolver) -> Result<u8, String> {
    let n = resolver.get(args.n, "n", 8u32)?;
    let phi = resolver.get(args.phi, "phi", std::f64::consts::FRAC_PI_4)?;
    let kbar = resolver.get(args.kbar, "kbar", 1.0)?;
    if n < 5 {
        return Err("sharpness family needs n >= 5".to_string());
    }
    let point = SharpFamilyPoint::new(2, n - 2, phi).map_err(|e| e.to_string())?;
    let defect = sharpness_defect(&point, kbar).map_err(|e| e.to_string())?;
    println!("n = {n}, phi = {phi}, kbar = {kbar}");
    println!("measured defect           : {}", defect.measured);
    println!(
        "candidate 4((n-2)^2-1)/(n-2)^2 s^4/r^4: {} ({})",
        defect.coeff_a_value,
        if defect.coeff_a_matches { "matches" } else { "MISMATCH" }
    );
    println!(
        "candidate 4((n-2)^2-4)/(n-2)^2 s^4/r^4: {} ({})",
        defect.coeff_b_value,
        if defect.coeff_b_matches { "matches" } else { "MISMATCH" }
    );
    Ok(0)
}

fn run_report(args: ReportArgs) -> Result<u8, String> {
    let agg = report::aggregate(&args.paths).map_err(|e| e.to_string())?;
    for w in &agg.warnings {
        eprintln!("warning: {w}");
    }
    let text = report::render_summary(&agg);
    match &args.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(if agg.all_pass() { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let file = match &cli.config {
        Some(path) => match load_config_file(path) {
            Ok(map) => map,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => BTreeMap::new(),
    };
    let resolver = Resolver { file };

    let started = Instant::now();
    let result = match cli.command {
        Command::Verify(args) => run_verify(args, &resolver),
        Command::FlowOde(args) => run_flow_ode(args, &resolver),
        Command::FlowPde(args) => run_flow_pde(args, &resolver),
        Command::Sharpness(args) => run_sharpness(args, &resolver),
        Command::Report(args) => run_report(args),
    };
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
