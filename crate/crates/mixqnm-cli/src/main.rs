mod config;
mod emit;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixqnm::amplitude_qnm::{amplitude_spectrum, Regime};
use mixqnm::correlator_qnm::{kronecker_check, CVec16};
use mixqnm::evolution::{observables, vacuum_state, Solver, Trajectory};
use mixqnm::kernels::{boundary_kernels, fdr_residual};
use mixqnm::onepoint_qnm::onepoint_spectrum;
use mixqnm::reductions::{rwa_solve, ww_reduce};
use mixqnm::volterra_oracle::{integrate_amplitudes, integrate_correlators, CorrelatorOptions, OracleTrajectory};
use mixqnm::{CMat2, CMat4, MixError};
use num_complex::Complex64;
use serde_json::{json, Value};

use config::{ConfigError, Format, RegimeChoice, Resolved};
use emit::{jc, jnum, render_json, render_table, trajectory_table, write_out, Provenance, Table};

#[derive(Parser, Debug)]
#[command(name = "mixqnm", version, about = "Quasi-normal modes and relaxation of two mixed fields in a thermal bath")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant suite on the shipped fixtures or on a config.
    Validate(Common),
    /// Boundary values of Σ and 𝒩 on a frequency grid.
    Kernels(Common),
    /// Amplitude, one-point and correlator QNMs.
    Spectrum(Common),
    /// Closed-form trajectory.
    Evolve(Common),
    /// Final-value asymptotic state.
    Asymptote(Common),
    /// Direct time-domain integration.
    Oracle(Common),
    /// Side-by-side comparison with a reduction or the oracle.
    Compare(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    regime: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    builtin: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Ww,
    Rwa,
    Oracle,
}

/// Everything that ends a run early, with its exit status.
#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Validation(String),
    Numeric(MixError),
    Io(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<MixError> for Failure {
    fn from(e: MixError) -> Self {
        Failure::Numeric(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn report(&self) -> (u8, Value) {
        let (status, kind, code, message) = match self {
            Failure::Config(e) => (3, "config", e.code.to_string(), e.message.clone()),
            Failure::Validation(m) => (2, "validation", "suite-failed".into(), m.clone()),
            // Bad physical inputs found past parsing are still configuration problems.
            Failure::Numeric(e) if e.is_input_error() => (3, "config", e.code().to_string(), e.to_string()),
            Failure::Numeric(e) => (4, "numeric", e.code().to_string(), e.to_string()),
            Failure::Io(e) => (4, "io", "io".into(), format!("{e:#}")),
        };
        (status, json!({ "error": { "kind": kind, "code": code, "message": message } }))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = json!({ "error": { "kind": "config", "code": "usage", "message": e.to_string().trim() } });
            eprintln!("{err}");
            return ExitCode::from(3);
        }
    };
    if let Err(f) = configure_threads() {
        return fail(f);
    }
    let result = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Kernels(a) => kernels(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Evolve(a) => evolve(a),
        Command::Asymptote(a) => asymptote(a),
        Command::Oracle(a) => oracle(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    let (status, v) = f.report();
    eprintln!("{v}");
    ExitCode::from(status)
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("MIXQNM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError { code: "env-threads", message: format!("MIXQNM_THREADS must be a positive integer, got {v:?}") })?;
    // A second initialisation in the same process is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(args: &Common) -> Result<Resolved, Failure> {
    let path = args.config.as_ref().ok_or_else(|| ConfigError { code: "config-required", message: "--config PATH is required".into() })?;
    let mut cfg = config::load(path)?;
    if let Some(r) = &args.regime {
        cfg.regime = RegimeChoice::parse(r)?;
    }
    Ok(cfg)
}

fn format_of(args: &Common, cfg: Option<&Resolved>, default: Format) -> Format {
    match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.and_then(|c| c.output.format).unwrap_or(default),
    }
}

fn out_path<'a>(args: &'a Common, cfg: Option<&'a Resolved>) -> Option<&'a Path> {
    args.out.as_deref().or_else(|| cfg.and_then(|c| c.output.path.as_deref().map(Path::new)))
}

fn solver(cfg: &Resolved) -> Result<Solver, Failure> {
    let regime = cfg.regime.resolve(&cfg.model, &cfg.params)?;
    Ok(Solver::new(&cfg.model, &cfg.params, Some(regime))?)
}

fn grid(cfg: &Resolved, auto: f64) -> Vec<f64> {
    let t_max = cfg.t_max.unwrap_or(auto);
    let n = cfg.n_points;
    (0..n).map(|j| t_max * j as f64 / (n - 1) as f64).collect()
}

fn validate(args: &Common) -> Outcome {
    let (report, prov, cfg) = if args.builtin {
        (suite::builtin()?, Provenance::new("validate --builtin", "builtin"), None)
    } else {
        let cfg = load(args)?;
        let s = solver(&cfg)?;
        (suite::for_config(&cfg.model, &cfg.params, s.regime)?, Provenance::new("validate", &cfg.hash), Some(cfg))
    };
    let text = render_json(serde_json::to_value(&report).expect("serialisable"), &prov);
    write_out(out_path(args, cfg.as_ref()), &text)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}@{}", c.name, c.fixture)).collect();
        Err(Failure::Validation(format!("failed checks: {}", failed.join(", "))))
    }
}

fn mat_entries(m: &nalgebra::Matrix2<f64>) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

fn kernels(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let p = cfg.params;
    let top = 2.0 * p.omega(0).max(p.omega(1));
    let mut freqs: Vec<f64> = (1..=64).map(|j| top * j as f64 / 64.0).collect();
    freqs.extend([p.omega(0), p.omega(1), p.omega_bar()]);
    freqs.sort_by(|a, b| a.total_cmp(b));
    freqs.dedup();
    let mut columns = vec!["omega".to_string()];
    for name in ["SigmaR", "SigmaI", "NoiseR", "NoiseI"] {
        for pair in ["11", "12", "21", "22"] {
            columns.push(format!("{name}{pair}"));
        }
    }
    columns.push("quad_error".into());
    columns.push("fdr_residual".into());
    let mut rows = Vec::with_capacity(freqs.len());
    for w in freqs {
        let k = boundary_kernels(&cfg.model, &p, w, false)?;
        let mut r = vec![w];
        for m in [&k.sigma_r, &k.sigma_i, &k.noise_r, &k.noise_i] {
            r.extend(mat_entries(m));
        }
        r.push(k.quad_error);
        r.push(fdr_residual(&cfg.model, &p, w)?);
        rows.push(r);
    }
    let table = Table { columns, rows };
    let prov = Provenance::new("kernels", &cfg.hash);
    write_out(out_path(args, Some(&cfg)), &render_table(&table, &prov, format_of(args, Some(&cfg), Format::Csv)))?;
    Ok(())
}

fn jmat2(m: &CMat2) -> Value {
    json!([[jc(m[(0, 0)]), jc(m[(0, 1)])], [jc(m[(1, 0)]), jc(m[(1, 1)])]])
}

fn jmat4(m: &CMat4) -> Value {
    Value::Array((0..4).map(|i| Value::Array((0..4).map(|j| jc(m[(i, j)])).collect())).collect())
}

fn spectrum(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let s = solver(&cfg)?;
    let amp: Vec<Value> = s
        .amp
        .modes
        .iter()
        .map(|m| json!({ "label": m.label.name(), "pole": jc(m.pole), "bare": jc(m.bare), "residue": jmat2(&m.residue) }))
        .collect();
    let onept: Vec<Value> = s
        .onept
        .modes_a
        .iter()
        .chain(&s.onept.modes_adag)
        .map(|m| json!({ "label": m.label.name(), "pole": jc(m.pole), "residue": jmat2(&m.residue) }))
        .collect();
    let corr: Vec<Value> = s
        .corr
        .modes()
        .map(|m| {
            json!({
                "block": m.block.name(),
                "slot": m.slot,
                "labels": [m.labels.0.name(), m.labels.1.name()],
                "pole": jc(m.pole),
                "bare": jc(m.bare),
                "residue": jmat4(&m.residue),
            })
        })
        .collect();
    let discarded: Vec<Value> = s
        .onept
        .discarded_orders
        .iter()
        .map(|d| json!({ "label": d.label.name(), "source": d.source.name(), "norm": jnum(d.norm), "relative": jnum(d.relative) }))
        .collect();
    let k = kronecker_check(&s.corr, &s.onept);
    let data = json!({
        "regime": s.regime.name(),
        "omega": [jnum(s.amp.omega[0]), jnum(s.amp.omega[1])],
        "gamma": [jnum(s.amp.gamma[0]), jnum(s.amp.gamma[1])],
        "amplitude": amp,
        "onepoint": onept,
        "discarded_orders": discarded,
        "correlator": corr,
        "cross_block_residue": jnum(s.corr.cross_block),
        "kronecker": { "pole_deviation": jnum(k.pole_deviation), "residue_deviation": jnum(k.residue_deviation), "passed": k.passed, "informational": k.informational },
        "diagnostics": s.amp.diagnostics.iter().chain(&s.corr.diagnostics).collect::<Vec<_>>(),
        "t_max_auto": jnum(s.t_max_auto()),
    });
    let prov = Provenance::new("spectrum", &cfg.hash);
    let text = match format_of(args, Some(&cfg), Format::Json) {
        Format::Json => render_json(data, &prov),
        Format::Csv => {
            let mut rows = Vec::new();
            for (fam, list) in [("amplitude", &s.amp.modes[..]), ("onepoint", &s.onept.modes_a[..]), ("onepoint", &s.onept.modes_adag[..])] {
                for m in list {
                    rows.push(vec![fam.to_string(), m.label.name().to_string(), num(m.pole.re), num(m.pole.im), num(m.bare.re), num(m.bare.im)]);
                }
            }
            for m in s.corr.modes() {
                let label = format!("{}:{}{}", m.block.name(), m.labels.0.name(), m.labels.1.name());
                rows.push(vec!["correlator".into(), label, num(m.pole.re), num(m.pole.im), num(m.bare.re), num(m.bare.im)]);
            }
            text_csv(&["family", "label", "pole.re", "pole.im", "bare.re", "bare.im"], &rows, &prov)
        }
    };
    write_out(out_path(args, Some(&cfg)), &text)?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn text_csv(columns: &[&str], rows: &[Vec<String>], prov: &Provenance) -> String {
    let mut s = emit::render_csv(&Table::default(), prov);
    // Drop the empty header line of the blank table.
    s.truncate(s.len() - 1);
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn evolve(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let s = solver(&cfg)?;
    let tgrid = grid(&cfg, s.t_max_auto());
    let tr = s.evolve(cfg.phi0, cfg.pi0, &cfg.d0, &tgrid, cfg.keep)?;
    let obs = observables(&tr)?;
    let mut prov = Provenance::new("evolve", &cfg.hash);
    prov.notes.push(tr.provenance.clone());
    prov.notes.push(format!("order={}", tr.keep.label()));
    prov.notes.extend(tr.warnings.iter().map(|w| format!("warning: {w}")));
    let table = trajectory_table(&tr, &obs);
    write_out(out_path(args, Some(&cfg)), &render_table(&table, &prov, format_of(args, Some(&cfg), Format::Csv)))?;
    Ok(())
}

const COMPONENTS: [&str; 16] = [
    "A11", "A12", "A21", "A22", "Amk11", "Amk12", "Amk21", "Amk22", "B11", "B12", "B21", "B22", "Bstar11", "Bstar12", "Bstar21", "Bstar22",
];

fn asymptote(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let s = solver(&cfg)?;
    let fv = s.final_value()?;
    let prov = Provenance::new("asymptote", &cfg.hash);
    let text = match format_of(args, Some(&cfg), Format::Json) {
        Format::Json => {
            let d: serde_json::Map<String, Value> = COMPONENTS.iter().enumerate().map(|(i, n)| (n.to_string(), jc(fv.d_inf[i]))).collect();
            render_json(
                json!({
                    "regime": s.regime.name(),
                    "phi_inf": [jnum(fv.phi_inf[0]), jnum(fv.phi_inf[1])],
                    "pi_inf": [0.0, 0.0],
                    "d_inf": d,
                    "condition": jnum(fv.condition),
                    "t_max_auto": jnum(s.t_max_auto()),
                }),
                &prov,
            )
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = COMPONENTS.iter().enumerate().map(|(i, n)| vec![n.to_string(), num(fv.d_inf[i].re), num(fv.d_inf[i].im)]).collect();
            text_csv(&["component", "re", "im"], &rows, &prov)
        }
    };
    write_out(out_path(args, Some(&cfg)), &text)?;
    Ok(())
}

/// Oracle run dressed as a [`Trajectory`]. In the nearly-degenerate branches
/// the vacuum part is a second run from the vacuum with a zero-temperature
/// bath; otherwise it is the constant unit matrix.
fn oracle_trajectory(cfg: &Resolved, regime: Regime, t_max: f64) -> Result<(Trajectory, OracleTrajectory), Failure> {
    let opts = CorrelatorOptions::default();
    let corr = integrate_correlators(&cfg.model, &cfg.params, &cfg.d0, &cfg.oracle, t_max, cfg.n_points, opts)?;
    let amp = integrate_amplitudes(&cfg.model, &cfg.params, cfg.phi0, cfg.pi0, &cfg.oracle, t_max, cfg.n_points)?;
    let one = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let a_vac: Vec<[Complex64; 4]> = if regime == Regime::NonDegenerate {
        vec![one; corr.t.len()]
    } else {
        let cold = cfg.params.with_beta(f64::INFINITY);
        let v = integrate_correlators(&cfg.model, &cold, &vacuum_state(), &cfg.oracle, t_max, cfg.n_points, opts)?;
        (0..v.t.len()).map(|i| v.a(i)).collect()
    };
    let n = corr.t.len();
    let a: Vec<[Complex64; 4]> = (0..n).map(|i| corr.a(i)).collect();
    let tr = Trajectory {
        t: corr.t.clone(),
        amk: (0..n).map(|i| [corr.d[i][4], corr.d[i][5], corr.d[i][6], corr.d[i][7]]).collect(),
        b: (0..n).map(|i| corr.b(i)).collect(),
        a_exc: a.iter().zip(&a_vac).map(|(x, v)| [x[0] - v[0], x[1] - v[1], x[2] - v[2], x[3] - v[3]]).collect(),
        a,
        a_vac,
        phi: amp.phi.clone(),
        pi: amp.pi.clone(),
        regime,
        keep: Default::default(),
        provenance: format!("oracle regime={} dt={}", regime.name(), corr.dt),
        warnings: Vec::new(),
    };
    Ok((tr, corr))
}

fn oracle_t_max(cfg: &Resolved, s: &Solver) -> f64 {
    cfg.t_max.unwrap_or_else(|| s.t_max_auto())
}

fn oracle(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let s = solver(&cfg)?;
    let (tr, raw) = oracle_trajectory(&cfg, s.regime, oracle_t_max(&cfg, &s))?;
    let obs = observables(&tr)?;
    let mut table = trajectory_table(&tr, &obs);
    table.columns.push("rich_err".into());
    for (r, e) in table.rows.iter_mut().zip(&raw.rich_err) {
        r.push(*e);
    }
    let mut prov = Provenance::new("oracle", &cfg.hash);
    prov.notes.push(tr.provenance.clone());
    prov.notes.push(format!("memory_steps={}", raw.memory_steps));
    write_out(out_path(args, Some(&cfg)), &render_table(&table, &prov, format_of(args, Some(&cfg), Format::Csv)))?;
    Ok(())
}

fn side_by_side(t: &[f64], left: (&str, &[CVec16]), right: (&str, &[CVec16]), comps: &[usize]) -> Table {
    let mut columns = vec!["t".to_string()];
    for side in [left.0, right.0] {
        for &k in comps {
            columns.push(format!("{side}.{}.re", COMPONENTS[k]));
            columns.push(format!("{side}.{}.im", COMPONENTS[k]));
        }
    }
    let rows = (0..t.len())
        .map(|i| {
            let mut r = vec![t[i]];
            for d in [left.1, right.1] {
                for &k in comps {
                    r.push(d[i][k].re);
                    r.push(d[i][k].im);
                }
            }
            r
        })
        .collect();
    Table { columns, rows }
}

fn compare(args: &Common) -> Outcome {
    let cfg = load(args)?;
    let mode = args.mode.ok_or_else(|| ConfigError { code: "mode-required", message: "compare needs --mode ww|rwa|oracle".into() })?;
    let comps: Vec<usize> = (0..12).collect();
    let (report, table, command) = match mode {
        Mode::Ww => {
            let ww = ww_reduce(&cfg.model, &cfg.params)?;
            let amp = amplitude_spectrum(&cfg.model, &cfg.params, Regime::NearlyDegenerate)?;
            let one = onepoint_spectrum(&amp, &cfg.params);
            let gmax = amp.gamma[0].max(amp.gamma[1]);
            let tgrid = grid(&cfg, if gmax > 0.0 { 3.0 / gmax } else { 100.0 });
            let mut columns = vec!["t".to_string()];
            for side in ["ww", "qnm"] {
                for pair in ["11", "12", "21", "22"] {
                    columns.push(format!("{side}.G{pair}.re"));
                    columns.push(format!("{side}.G{pair}.im"));
                }
            }
            let mut rows = Vec::with_capacity(tgrid.len());
            let mut gap: f64 = 0.0;
            for &t in &tgrid {
                let (u, g) = (ww.propagator(t), one.greens_a(t));
                gap = (u - g).iter().map(|z| z.norm()).fold(gap, f64::max);
                let mut r = vec![t];
                for m in [&u, &g] {
                    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        r.push(m[(i, j)].re);
                        r.push(m[(i, j)].im);
                    }
                }
                rows.push(r);
            }
            let report = json!({
                "mode": "ww",
                "max_gap": jnum(gap),
                "eigvals": ww.eigvals.iter().map(|z| jc(*z)).collect::<Vec<_>>(),
                "onepoint_poles": one.modes_a.iter().map(|m| jc(m.pole)).collect::<Vec<_>>(),
            });
            (report, Table { columns, rows }, "compare --mode ww")
        }
        Mode::Rwa => {
            let s = solver(&cfg)?;
            let t_max = cfg.t_max.unwrap_or(3.0 / s.amp.gamma[0].min(s.amp.gamma[1]));
            let cmp = rwa_solve(&cfg.model, &cfg.params, &cfg.d0, &cfg.oracle, t_max, cfg.n_points)?;
            let mut report = serde_json::to_value(&cmp.report).expect("serialisable");
            report["mode"] = json!("rwa");
            let table = side_by_side(&cmp.full.t, ("full", &cmp.full.d), ("rwa", &cmp.rwa.d), &comps);
            (report, table, "compare --mode rwa")
        }
        Mode::Oracle => {
            let s = solver(&cfg)?;
            let t_max = oracle_t_max(&cfg, &s);
            let (otr, raw) = oracle_trajectory(&cfg, s.regime, t_max)?;
            let tr = s.evolve(cfg.phi0, cfg.pi0, &cfg.d0, &otr.t, cfg.keep)?;
            let closed: Vec<CVec16> = (0..tr.t.len())
                .map(|i| {
                    let mut d = CVec16::zeros();
                    for k in 0..4 {
                        d[k] = tr.a[i][k];
                        d[4 + k] = tr.amk[i][k];
                        d[8 + k] = tr.b[i][k];
                        d[12 + k] = tr.b[i][k].conj();
                    }
                    d
                })
                .collect();
            let mut per: Vec<f64> = vec![0.0; 12];
            for (x, y) in closed.iter().zip(&raw.d) {
                for k in 0..12 {
                    per[k] = per[k].max((x[k] - y[k]).norm());
                }
            }
            let max_gap = per.iter().cloned().fold(0.0, f64::max);
            let report = json!({
                "mode": "oracle",
                "regime": s.regime.name(),
                "order": tr.keep.label(),
                "max_gap": jnum(max_gap),
                "per_component": COMPONENTS[..12].iter().zip(&per).map(|(n, v)| (n.to_string(), jnum(*v))).collect::<serde_json::Map<_, _>>(),
                "g_max": jnum(cfg.model.max_coupling()),
                "rich_err_max": jnum(raw.rich_err.iter().cloned().fold(0.0, f64::max)),
            });
            let table = side_by_side(&otr.t, ("qnm", &closed), ("oracle", &raw.d), &comps);
            (report, table, "compare --mode oracle")
        }
    };
    let prov = Provenance::new(command, &cfg.hash);
    if let Some(path) = out_path(args, Some(&cfg)) {
        write_out(Some(path), &render_table(&table, &prov, format_of(args, Some(&cfg), Format::Csv)))?;
    }
    write_out(None, &render_json(report, &prov))?;
    Ok(())
}
