//! `nhsense`: measurement rate per photon of driven non-Hermitian sensors.
//!
//! Every subcommand reads a system from `--config` (flat `key = value`
//! file) and/or the named model flags; flags override the file. Detunings
//! are in units of `k₁`. Exit status: 0 success, 1 bad input or failed
//! evaluation, 2 partial result (search budget exhausted).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use nhsense::bathmod::{
    min_noise_decomposition, spectral_decomposition, system_antihermitian, validate_decomposition, BathCoupling,
    NoiseBudget, DEFAULT_MIN_NOISE_TOL,
};
use nhsense::config::{format_complex, Config, ModelKind, SystemSpec};
use nhsense::explorer::{
    convergence_study, delta_grid, feasibility_search, sweep_detuning, write_convergence_csv, write_sweep_csv,
    ConvergenceConfig, FeasibilityConfig, FeasibilityResult,
};
use nhsense::metrics::{measurement_rate, MetricsReport};
use nhsense::models::ModelParams;
use nhsense::oracle::{run_oracle, OracleReport, TrajectoryConfig, Window};
use nhsense::syscore::transfer_matrix;
use nhsense::{Error, C64};

#[derive(Parser)]
#[command(name = "nhsense", version, about = "Measurement rate per photon of driven non-Hermitian sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Signal, noise, photon number and rates at one detuning.
    Rate(SystemArgs),
    /// Bath decompositions of the anti-Hermitian part and their noise.
    Bath(BathArgs),
    /// Time-domain cross-check of the analytic quantities.
    Oracle(OracleArgs),
    /// Single- and two-drive rates along a detuning grid (CSV).
    Sweep(SweepArgs),
    /// Search (eta, p, delta) for a two-drive rate above the single-drive optimum.
    Feasibility(FeasibilityArgs),
    /// Gap to the uniform bound along a ladder of couplings (CSV).
    Convergence(ConvergenceArgs),
}

#[derive(Args, Clone)]
struct SystemArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    nu2: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Machine-readable output on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Reciprocal,
    Nonreciprocal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Text,
    Csv,
}

#[derive(Args)]
struct BathArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum, default_value = "text")]
    emit: Emit,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BathChoice {
    Spectral,
    MinNoise,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_total: Option<f64>,
    #[arg(long)]
    t_burn: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record window; omit to skip the Monte Carlo noise estimate.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    window: Option<WindowArg>,
    #[arg(long, value_enum, default_value = "min-noise")]
    bath: BathChoice,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, allow_hyphen_values = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibilityArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Optimizer trace as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `println!` that exits quietly when stdout has been closed.
macro_rules! out {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

fn emit(args: std::fmt::Arguments) {
    if let Err(e) = writeln!(io::stdout().lock(), "{args}") {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::PartialResult { budget, partial }) => {
            eprintln!("error: evaluation budget of {budget} exhausted before the search grid completed");
            print_feasibility(&partial, false);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> nhsense::Result<()> {
    match command {
        Command::Rate(args) => rate(&args),
        Command::Bath(args) => bath(&args),
        Command::Oracle(args) => oracle(&args),
        Command::Sweep(args) => sweep(&args),
        Command::Feasibility(args) => feasibility(&args),
        Command::Convergence(args) => convergence(&args),
    }
}

/// The config file with command-line flags applied on top.
fn load_config(args: &SystemArgs) -> nhsense::Result<Config> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(m) = args.model {
        let name = match m {
            ModelArg::Reciprocal => "reciprocal",
            ModelArg::Nonreciprocal => "nonreciprocal",
        };
        cfg.set("model", name)?;
    }
    let numeric = [
        ("gamma1", args.gamma1),
        ("gamma2", args.gamma2),
        ("j", args.j),
        ("nu2", args.nu2),
        ("k2", args.k2),
        ("p", args.p),
        ("beta1", args.beta1),
        ("delta", args.delta),
    ];
    for (key, value) in numeric {
        if let Some(v) = value {
            cfg.set(key, v.to_string())?;
        }
    }
    if !cfg.contains("model") && !cfg.contains("h0") {
        return Err(Error::Config {
            line: 0,
            message: "no system given: pass --config or --model".into(),
        });
    }
    Ok(cfg)
}

fn set_opt<T: ToString>(cfg: &mut Config, key: &str, value: Option<T>) -> nhsense::Result<()> {
    if let Some(v) = value {
        cfg.set(key, v.to_string())?;
    }
    Ok(())
}

fn sink(out: Option<&Path>) -> nhsense::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn complex_json(z: C64) -> Value {
    Value::String(format_complex(z))
}

fn print_lines(rows: &[(&str, String)]) {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    for (k, v) in rows {
        out!("{k:<width$}  {v}");
    }
}

fn metrics_record(r: &MetricsReport) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("lambda_".into(), complex_json(r.lambda_));
    m.insert("phi".into(), json!(r.phi));
    m.insert("signal_density".into(), json!(r.signal_density));
    m.insert("noise_density_raw".into(), json!(r.noise_density_raw));
    m.insert("noise_density".into(), json!(r.noise_density));
    m.insert("noise_density_min".into(), json!(r.noise_density_min));
    m.insert("xi".into(), json!(r.xi));
    m.insert("n_tot".into(), json!(r.n_tot));
    m.insert("gamma_meas".into(), json!(r.gamma_meas));
    m.insert("gamma_opt".into(), json!(r.gamma_opt));
    m.insert("stable".into(), json!(r.stable));
    m.insert("phi_degenerate".into(), json!(r.phi_degenerate));
    m
}

fn rate(args: &SystemArgs) -> nhsense::Result<()> {
    let cfg = load_config(args)?;
    let spec = SystemSpec::from_config(&cfg)?;
    let delta = cfg.f64_or("delta", 0.0)?;
    let r = measurement_rate(&spec.system, delta, None)?;
    if args.json {
        out!("{}", Value::Object(metrics_record(&r)));
        return Ok(());
    }
    let record = metrics_record(&r);
    let rows: Vec<(&str, String)> = record
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str().map_or_else(|| v.to_string(), str::to_string)))
        .collect();
    print_lines(&rows);
    Ok(())
}

struct Candidate {
    name: &'static str,
    bath: BathCoupling,
}

fn bath(args: &BathArgs) -> nhsense::Result<()> {
    let cfg = load_config(&args.system)?;
    let spec = SystemSpec::from_config(&cfg)?;
    let sys = &spec.system;
    let delta = cfg.f64_or("delta", 0.0)?;
    let chi = transfer_matrix(sys, delta, 0.0)?;
    let m = system_antihermitian(sys);
    let mut candidates = vec![Candidate {
        name: "spectral",
        bath: spectral_decomposition(&m)?,
    }];
    match min_noise_decomposition(&m, &chi, DEFAULT_MIN_NOISE_TOL) {
        Ok(b) => candidates.push(Candidate {
            name: "min-noise",
            bath: b,
        }),
        Err(Error::ConstructionInfeasible { alpha_max }) => {
            eprintln!("warning: no minimal-noise decomposition with alpha <= {alpha_max:e}");
        }
        Err(e) => return Err(e),
    }
    let mut records = Vec::new();
    for c in &candidates {
        let budget = NoiseBudget::new(&c.bath, &chi, 1.0, sys.k2())?;
        let valid = validate_decomposition(&c.bath, &m, &chi, 1.0, sys.k2())?;
        records.push((c, budget, valid));
    }

    if matches!(args.emit, Emit::Csv) {
        let mut w = csv::Writer::from_writer(sink(args.out.as_deref())?);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record([
            "candidate",
            "n_gain",
            "n_loss",
            "xi",
            "shot",
            "excess",
            "achieved",
            "minimum",
            "difference_residual",
            "identity_residual",
            "valid",
        ])
        .map_err(err)?;
        for (c, b, v) in &records {
            w.write_record([
                c.name.to_string(),
                c.bath.n_gain().to_string(),
                c.bath.n_loss().to_string(),
                nhsense::explorer::fmt_f64(b.xi),
                nhsense::explorer::fmt_f64(b.shot),
                nhsense::explorer::fmt_f64(b.excess),
                nhsense::explorer::fmt_f64(b.achieved),
                nhsense::explorer::fmt_f64(b.minimum()),
                nhsense::explorer::fmt_f64(v.difference_residual),
                nhsense::explorer::fmt_f64(v.identity_residual),
                v.valid.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        return Ok(());
    }
    if args.system.json {
        let list: Vec<Value> = records
            .iter()
            .map(|(c, b, v)| json!({ "candidate": c.name, "n_gain": c.bath.n_gain(), "n_loss": c.bath.n_loss(), "budget": b, "validation": v }))
            .collect();
        out!("{}", json!({ "m": format!("{m}"), "candidates": list }));
        return Ok(());
    }
    out!("M =\n{m}");
    for (c, b, v) in &records {
        out!("");
        print_lines(&[
            ("candidate", c.name.to_string()),
            ("dims (N_Y, N_Z)", format!("({}, {})", c.bath.n_gain(), c.bath.n_loss())),
            ("xi", format!("{:.6e}", b.xi)),
            ("shot", format!("{:.6e}", b.shot)),
            ("excess", format!("{:.6e}", b.excess)),
            ("achieved", format!("{:.6e}", b.achieved)),
            ("minimum", format!("{:.6e}", b.minimum())),
            ("difference residual", format!("{:.3e}", v.difference_residual)),
            ("identity residual", format!("{:.3e}", v.identity_residual)),
            ("valid", v.valid.to_string()),
        ]);
    }
    Ok(())
}

fn oracle(args: &OracleArgs) -> nhsense::Result<()> {
    let mut cfg = load_config(&args.system)?;
    set_opt(&mut cfg, "dt", args.dt)?;
    set_opt(&mut cfg, "t_total", args.t_total)?;
    set_opt(&mut cfg, "t_burn", args.t_burn)?;
    set_opt(&mut cfg, "n_traj", args.trajectories)?;
    set_opt(&mut cfg, "seed", args.seed)?;
    set_opt(&mut cfg, "tau", args.tau)?;
    if let Some(w) = args.window {
        cfg.set("window", if matches!(w, WindowArg::Hann) { "hann" } else { "rectangular" })?;
    }
    let spec = SystemSpec::from_config(&cfg)?;
    let sys = &spec.system;
    let delta = cfg.f64_or("delta", 0.0)?;
    let tau = cfg.f64("tau")?;

    let mut traj = TrajectoryConfig::for_system(sys, delta, tau.unwrap_or(1.0))?;
    traj.dt = cfg.f64_or("dt", traj.dt)?;
    traj.t_burn = cfg.f64_or("t_burn", traj.t_burn)?;
    traj.t_total = cfg.f64_or("t_total", traj.t_burn + tau.unwrap_or(1.0))?;
    traj.n_traj = cfg.usize("n_traj")?.unwrap_or(traj.n_traj);
    traj.seed = cfg.u64("seed")?.unwrap_or(0);
    traj.window = match cfg.str("window") {
        None | Some("hann") => Window::Hann,
        Some("rectangular") => Window::Rectangular,
        Some(other) => {
            return Err(Error::Config {
                line: cfg.line_of("window"),
                message: format!("unknown window `{other}` (hann, rectangular)"),
            })
        }
    };

    let chi = transfer_matrix(sys, delta, 0.0)?;
    let m = system_antihermitian(sys);
    let bath = match args.bath {
        BathChoice::Spectral => spectral_decomposition(&m)?,
        BathChoice::MinNoise => min_noise_decomposition(&m, &chi, DEFAULT_MIN_NOISE_TOL)?,
    };
    let report = run_oracle(sys, delta, &bath, &traj, tau)?;
    let analytic = measurement_rate(sys, delta, Some(&bath))?;
    print_oracle(&report, &analytic, args.system.json);
    Ok(())
}

fn print_oracle(report: &OracleReport, analytic: &MetricsReport, as_json: bool) {
    let lambda_dev = (report.lambda_fd - analytic.lambda_).norm() / analytic.lambda_.norm();
    let photon_dev = (report.n_tot_td - analytic.n_tot).abs() / analytic.n_tot;
    let noise = report.noise_mc.map(|mc| {
        let expected = analytic.noise_density * mc.tau;
        (mc, expected, (mc.variance - expected) / mc.stderr)
    });
    if as_json {
        let means: Vec<Value> = report.means_ss.iter().map(|z| complex_json(*z)).collect();
        let mut out = json!({
            "means_ss": means,
            "bout_mean": complex_json(report.bout_mean),
            "lambda_fd": complex_json(report.lambda_fd),
            "lambda": complex_json(analytic.lambda_),
            "lambda_rel_dev": lambda_dev,
            "n_tot_td": report.n_tot_td,
            "n_tot": analytic.n_tot,
            "n_tot_rel_dev": photon_dev,
        });
        if let Some((mc, expected, sigmas)) = noise {
            out["noise_mc"] = json!(mc.variance);
            out["noise_mc_stderr"] = json!(mc.stderr);
            out["noise_expected"] = json!(expected);
            out["noise_dev_sigma"] = json!(sigmas);
        }
        out!("{out}");
        return;
    }
    let means: Vec<String> = report.means_ss.iter().map(|z| format_complex(*z)).collect();
    let mut rows = vec![
        ("means_ss", means.join(", ")),
        ("bout_mean", format_complex(report.bout_mean)),
        ("lambda_fd", format_complex(report.lambda_fd)),
        ("lambda", format_complex(analytic.lambda_)),
        ("lambda rel. dev.", format!("{lambda_dev:.3e}")),
        ("n_tot_td", format!("{:.10e}", report.n_tot_td)),
        ("n_tot", format!("{:.10e}", analytic.n_tot)),
        ("n_tot rel. dev.", format!("{photon_dev:.3e}")),
    ];
    if let Some((mc, expected, sigmas)) = noise {
        rows.push(("noise_mc", format!("{:.6e} ± {:.2e}", mc.variance, mc.stderr)));
        rows.push(("noise expected", format!("{expected:.6e}")));
        rows.push(("deviation", format!("{sigmas:+.2} σ")));
    }
    print_lines(&rows);
}

fn sweep(args: &SweepArgs) -> nhsense::Result<()> {
    let mut cfg = load_config(&args.system)?;
    set_opt(&mut cfg, "delta_min", args.delta_min)?;
    set_opt(&mut cfg, "delta_max", args.delta_max)?;
    set_opt(&mut cfg, "delta_step", args.delta_step)?;
    let spec = SystemSpec::from_config(&cfg)?;
    let grid = delta_grid(
        cfg.f64_or("delta_min", -0.5)?,
        cfg.f64_or("delta_max", 0.5)?,
        cfg.f64_or("delta_step", 0.005)?,
    )?;
    let eta = spec.system.k2();
    let rows = sweep_detuning(&spec.system, &grid, eta, spec.p)?;
    if args.system.json {
        out!("{}", serde_json::to_string(&rows).expect("rows serialize"));
        if let Some(p) = &args.out {
            write_sweep_csv(&rows, File::create(p)?)?;
        }
        return Ok(());
    }
    write_sweep_csv(&rows, sink(args.out.as_deref())?)
}

fn feasibility_config(cfg: &Config, args: &FeasibilityArgs) -> nhsense::Result<FeasibilityConfig> {
    let d = FeasibilityConfig::default();
    Ok(FeasibilityConfig {
        eta: (cfg.f64_or("eta_min", d.eta.0)?, cfg.f64_or("eta_max", d.eta.1)?),
        p: (cfg.f64_or("p_min", d.p.0)?, cfg.f64_or("p_max", d.p.1)?),
        delta: (
            cfg.f64_or("search_delta_min", d.delta.0)?,
            cfg.f64_or("search_delta_max", d.delta.1)?,
        ),
        grid_points: args.grid_points.or(cfg.usize("grid_points")?).unwrap_or(d.grid_points),
        budget: args.budget.or(cfg.usize("budget")?),
        tol: cfg.f64_or("feasibility_tol", d.tol)?,
        ..d
    })
}

fn print_feasibility(r: &FeasibilityResult, as_json: bool) {
    if as_json {
        out!("{}", serde_json::to_string(r).expect("result serializes"));
        return;
    }
    let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| format!("{v:.8}"));
    let arg = r.argbest.map_or_else(
        || "none".to_string(),
        |a| format!("eta {:.6e}, p {:.6e}, delta {:.6e}", a.eta, a.p, a.delta),
    );
    print_lines(&[
        ("baseline", opt(r.baseline)),
        ("baseline delta", opt(r.baseline_delta)),
        ("best found", format!("{:.8}", r.best_found)),
        ("argbest", arg),
        ("verdict", serde_json::to_value(r.verdict).expect("verdict").as_str().unwrap_or("").to_string()),
        ("evaluations", r.evaluations.to_string()),
        ("grid complete", r.grid_complete.to_string()),
    ]);
}

fn feasibility(args: &FeasibilityArgs) -> nhsense::Result<()> {
    let cfg = load_config(&args.system)?;
    let spec = SystemSpec::from_config(&cfg)?;
    let search = feasibility_config(&cfg, args)?;
    let r = feasibility_search(&spec.system, &search)?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["eta", "p", "delta", "rate"]).map_err(err)?;
        for t in &r.optimizer_trace {
            let f = nhsense::explorer::fmt_f64;
            w.write_record([f(t.point.eta), f(t.point.p), f(t.point.delta), t.rate.map(f).unwrap_or_default()])
                .map_err(err)?;
        }
        w.flush()?;
    }
    print_feasibility(&r, args.system.json);
    Ok(())
}

fn convergence(args: &ConvergenceArgs) -> nhsense::Result<()> {
    let cfg = load_config(&args.system)?;
    let kind: ModelKind = cfg
        .str("model")
        .ok_or_else(|| Error::Config {
            line: 0,
            message: "convergence needs `model`".into(),
        })?
        .parse()
        .map_err(|message| Error::Config {
            line: cfg.line_of("model"),
            message,
        })?;
    // Validates the remaining model keys the same way every other command does.
    let spec = SystemSpec::from_config(&cfg)?;
    let missing = |key: &str| Error::Config {
        line: 0,
        message: format!("convergence needs `{key}`"),
    };
    let (gamma1, gamma2, nu2) = match spec.model.expect("model given") {
        ModelParams::Reciprocal(r) => (r.gamma1, r.gamma2, 0.0),
        ModelParams::NonReciprocal(n) => (n.gamma1, n.gamma2, n.nu2),
    };
    let study = ConvergenceConfig {
        model: kind,
        gamma1,
        gamma2,
        nu2,
        eta: cfg.f64("eta")?.unwrap_or(spec.system.k2()),
        delta: cfg.f64_or("delta", 0.0)?,
        j_ladder: cfg.f64_list("j_ladder")?.ok_or_else(|| missing("j_ladder"))?,
        p_ladder: cfg.f64_list("p_ladder")?,
        rate_ladder: cfg.f64_list("rate_ladder")?,
        p_factor: 10.0,
    };
    let table = convergence_study(&study)?;
    if args.system.json {
        out!("{}", serde_json::to_string(&table).expect("table serializes"));
        if let Some(p) = &args.out {
            write_convergence_csv(&table, File::create(p)?)?;
        }
        return Ok(());
    }
    write_convergence_csv(&table, sink(args.out.as_deref())?)?;
    if args.out.is_some() {
        out!("target {}  monotone {}", table.target, table.monotone);
    }
    Ok(())
}
