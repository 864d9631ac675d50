//! Command-line front end: symbol registry, verification suites, trace and
//! sharp-product evaluation, and beta-sweep tables.
//!
//! Exit codes: 0 when all checked residuals pass their bounds, 1 on residual
//! failures, 2 on accuracy/capability/usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use heisentrace_core::error::Error;
use heisentrace_core::hgroup::GroupDims;
use heisentrace_core::quad::QuadratureSpec;
use heisentrace_core::registry;
use heisentrace_core::symbols::PrincipalSymbol;
use heisentrace_core::traces::{self, SweepRow, TraceReport};
use heisentrace_core::weyl;

const THREADS_ENV: &str = "HEISENTRACE_THREADS";

#[derive(Parser)]
#[command(name = "heisentrace")]
#[command(about = "Trace identities of the Heisenberg symbol calculus, verified numerically")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Theorem,
    Proposition,
    Lemmas,
    Weyl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite over the registry symbols.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Half the horizontal dimension of H_n.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Quadrature spec overrides (JSON file).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory for per-symbol JSON reports.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print tau, tau_z for each s, and Res for a symbol.
    Trace {
        /// Built-in name or path to a symbol definition file.
        symbol: String,
        /// Central points s (repeatable).
        #[arg(long = "s", allow_hyphen_values = true)]
        s: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write CSV convergence tables into this directory.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Evaluate (sigma # sigma')(v) for two Schwartz symbols.
    Sharp {
        symbol: String,
        symbol_prime: String,
        /// Evaluation point, comma-separated coordinates.
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        v: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Emit the beta-convergence table of the evaluation trace as CSV.
    Sweep {
        symbol: String,
        #[arg(long = "s", default_value_t = 1.0, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default quadrature spec for the given dimension as JSON.
    Spec {
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(path: &Option<PathBuf>, n: usize) -> Result<QuadratureSpec, Error> {
    let spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)?
        }
        None => QuadratureSpec::default_for(n),
    };
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Verify {
            suite,
            n,
            spec,
            out,
            format,
        } => {
            let spec = load_spec(&spec, n)?;
            cmd_verify(suite, n, &spec, out.as_deref(), format)
        }
        Command::Trace {
            symbol,
            s,
            n,
            spec,
            out,
            csv,
            format,
        } => {
            let spec = load_spec(&spec, n)?;
            let s = if s.is_empty() { vec![1.0] } else { s };
            cmd_trace(&symbol, &s, n, &spec, out.as_deref(), csv.as_deref(), format)
        }
        Command::Sharp {
            symbol,
            symbol_prime,
            v,
            n,
            spec,
        } => {
            let spec = load_spec(&spec, n)?;
            cmd_sharp(&symbol, &symbol_prime, &v, n, &spec)
        }
        Command::Sweep {
            symbol,
            s,
            n,
            spec,
            out,
        } => {
            let spec = load_spec(&spec, n)?;
            cmd_sweep(&symbol, s, n, &spec, out.as_deref())
        }
        Command::Spec { n } => {
            println!(
                "{}",
                serde_json::to_string_pretty(&QuadratureSpec::default_for(n))?
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyRun {
    schema: u32,
    generated_at: String,
    suite: String,
    n: usize,
    pass: bool,
    symbols: Vec<SymbolOutcome>,
    lemmas: Vec<LemmaOutcome>,
    weyl: Vec<WeylOutcome>,
}

#[derive(Serialize)]
struct SymbolOutcome {
    symbol: String,
    pass: bool,
    theorem_residual: f64,
    theorem_bound: f64,
    proposition_worst_residual: f64,
    proposition_bound: f64,
    report: TraceReport,
}

#[derive(Serialize)]
struct LemmaOutcome {
    check: String,
    pass: bool,
    residual: f64,
    bound: f64,
}

#[derive(Serialize)]
struct WeylOutcome {
    check: String,
    pass: bool,
    residual: f64,
    bound: f64,
}

/// Residual bound for the identity checks: fixed floor by dimension, or ten
/// times the combined error estimate when the quadrature claims worse.
fn residual_bound(n: usize, error_estimate: f64) -> f64 {
    let floor: f64 = if n == 1 { 1e-6 } else { 1e-4 };
    floor.max(10.0 * error_estimate)
}

fn worker_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|v| v.get())
                .unwrap_or(1)
        })
}

fn cmd_verify(
    suite: Suite,
    n: usize,
    spec: &QuadratureSpec,
    out: Option<&Path>,
    format: Format,
) -> Result<ExitCode, Error> {
    let dims = GroupDims::new(n)?;
    let symbols = registry::builtins_for(dims)?;

    // Registry invariant: every symbol must carry a consistent tail before
    // any trace is computed.
    for sym in &symbols {
        let rep = sym.default_consistency_check()?;
        if rep.flagged {
            return Err(Error::Validation(format!(
                "registry symbol '{}' fails the tail consistency check",
                sym.name
            )));
        }
    }

    let run_symbols = matches!(suite, Suite::All | Suite::Theorem | Suite::Proposition);
    let extra_s: &[f64] = if matches!(suite, Suite::All | Suite::Proposition) {
        &[2.0, -0.5]
    } else {
        &[]
    };

    let mut outcomes: Vec<SymbolOutcome> = Vec::new();
    if run_symbols {
        outcomes = run_symbol_reports(&symbols, spec, extra_s, suite)?;
        outcomes.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    }

    let mut lemmas = Vec::new();
    if matches!(suite, Suite::All | Suite::Lemmas) {
        for l in 0..n {
            for s in [1.0, -1.0] {
                let chk = traces::check_i_l_vanishing(l, n, s, spec)?;
                lemmas.push(LemmaOutcome {
                    check: format!("vanishing l={l} s={s}"),
                    pass: chk.residual <= 1e-8,
                    residual: chk.residual,
                    bound: 1e-8,
                });
            }
        }
        for s in [1.0, -1.0, 2.0, -2.0] {
            let chk = traces::check_i_n_pv(n, s, spec)?;
            lemmas.push(LemmaOutcome {
                check: format!("pv limit s={s}"),
                pass: chk.residual <= 1e-6,
                residual: chk.residual,
                bound: 1e-6,
            });
        }
    }

    let mut weyl_outcomes = Vec::new();
    if matches!(suite, Suite::All | Suite::Weyl) {
        weyl_outcomes = run_weyl_checks(n, spec)?;
    }

    let pass = outcomes.iter().all(|o| o.pass)
        && lemmas.iter().all(|l| l.pass)
        && weyl_outcomes.iter().all(|w| w.pass);

    let run = VerifyRun {
        schema: traces::REPORT_SCHEMA,
        generated_at: chrono::Utc::now().to_rfc3339(),
        suite: format!("{suite:?}").to_lowercase(),
        n,
        pass,
        symbols: outcomes,
        lemmas,
        weyl: weyl_outcomes,
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for o in &run.symbols {
            let path = dir.join(format!("{}-n{}-{}.json", run.suite, n, o.symbol));
            std::fs::write(&path, serde_json::to_string_pretty(&o.report)?)?;
        }
        let summary = dir.join(format!("{}-n{}-summary.json", run.suite, n));
        std::fs::write(&summary, serde_json::to_string_pretty(&run)?)?;
    }

    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&run)?),
        Format::Text | Format::Csv => print_verify_table(&run),
    }

    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run_symbol_reports(
    symbols: &[PrincipalSymbol],
    spec: &QuadratureSpec,
    extra_s: &[f64],
    suite: Suite,
) -> Result<Vec<SymbolOutcome>, Error> {
    let cap = worker_cap().max(1);
    let mut results: Vec<Option<Result<SymbolOutcome, Error>>> =
        (0..symbols.len()).map(|_| None).collect();
    // Per-symbol verifications run concurrently; output assembly stays
    // ordered and single-threaded.
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (idx, sym) in symbols.iter().enumerate() {
            while handles.len() >= cap {
                let (i, h): (usize, std::thread::ScopedJoinHandle<_>) = handles.remove(0);
                results[i] = Some(h.join().expect("verification worker panicked"));
            }
            let spec = spec.clone();
            handles.push((
                idx,
                scope.spawn(move || symbol_outcome(sym, &spec, extra_s, suite)),
            ));
        }
        for (i, h) in handles {
            results[i] = Some(h.join().expect("verification worker panicked"));
        }
    });
    results.into_iter().map(|r| r.unwrap()).collect()
}

fn symbol_outcome(
    sym: &PrincipalSymbol,
    spec: &QuadratureSpec,
    extra_s: &[f64],
    suite: Suite,
) -> Result<SymbolOutcome, Error> {
    let n = sym.dims.n();
    let report = traces::build_report(sym, spec, extra_s)?;
    let theorem_bound = residual_bound(n, report.theorem_error_estimate);
    let mut prop_worst = 0.0f64;
    let mut prop_bound = 0.0f64;
    for entry in &report.proposition {
        prop_worst = prop_worst.max(entry.residual);
        prop_bound = prop_bound.max(residual_bound(n, entry.error_estimate));
    }
    let theorem_ok = report.theorem_residual <= theorem_bound;
    let prop_ok = report
        .proposition
        .iter()
        .all(|e| e.residual <= residual_bound(n, e.error_estimate));
    let pass = match suite {
        Suite::Theorem => theorem_ok,
        Suite::Proposition => prop_ok,
        _ => theorem_ok && prop_ok,
    };
    Ok(SymbolOutcome {
        symbol: sym.name.clone(),
        pass,
        theorem_residual: report.theorem_residual,
        theorem_bound,
        proposition_worst_residual: prop_worst,
        proposition_bound: prop_bound,
        report,
    })
}

fn run_weyl_checks(n: usize, spec: &QuadratureSpec) -> Result<Vec<WeylOutcome>, Error> {
    if n != 1 {
        return Err(Error::Capability(
            "the weyl suite runs at n = 1 (sharp-product acceptance dimension)".into(),
        ));
    }
    let mut out = Vec::new();

    // Unit law on a grid of v (algebraic, must be exact).
    let unit = heisentrace_core::symbols::SymbolEvaluator::unit();
    let g = weyl::GaussianSymbol::centered(Complex64::new(1.0, 0.0), 2, 1.0)?.evaluator();
    let mut worst = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            let v = [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64];
            let est = weyl::sharp(&g, &unit, &v, 1, spec)?;
            worst = worst.max((est.value - g.eval(&v)).norm());
        }
    }
    out.push(WeylOutcome {
        check: "unit law (5x5 grid)".into(),
        pass: worst <= 1e-8,
        residual: worst,
        bound: 1e-8,
    });

    // Point value of the Gaussian product.
    let est = weyl::sharp(&g, &g, &[0.0, 0.0], 1, spec)?;
    let res = (est.value - Complex64::new(0.125, 0.0)).norm();
    out.push(WeylOutcome {
        check: "gaussian # gaussian at 0 = 1/8".into(),
        pass: res <= 1e-6,
        residual: res,
        bound: 1e-6,
    });

    // Oracle agreement on a few width pairs.
    let mut worst = 0.0f64;
    for (a, ap) in [(0.5, 2.0), (0.8, 1.1), (1.7, 0.6)] {
        let ga = weyl::GaussianSymbol::centered(Complex64::new(1.0, 0.0), 2, a)?;
        let gb = weyl::GaussianSymbol::centered(Complex64::new(1.0, 0.0), 2, ap)?;
        let est = weyl::sharp(&ga.evaluator(), &gb.evaluator(), &[0.3, -0.2], 1, spec)?;
        let exact = weyl::gaussian_sharp_value(&ga, &gb, &[0.3, -0.2]);
        worst = worst.max((est.value - exact).norm());
    }
    out.push(WeylOutcome {
        check: "sharp vs gaussian oracle".into(),
        pass: worst <= 1e-6,
        residual: worst,
        bound: 1e-6,
    });

    // Trace property: commutator integrals of displaced Gaussian pairs.
    let pairs = [
        (vec![0.0, 0.0], 1.0, vec![1.0, 0.0], 1.0),
        (vec![0.3, -0.4], 0.8, vec![-0.5, 0.2], 1.4),
        (vec![0.0, 0.6], 1.2, vec![0.4, 0.0], 0.9),
    ];
    let mut worst = 0.0f64;
    for (c1, w1, c2, w2) in pairs {
        let a = weyl::GaussianSymbol::new(Complex64::new(1.0, 0.0), c1, w1)?.evaluator();
        let b = weyl::GaussianSymbol::new(Complex64::new(1.0, 0.0), c2, w2)?.evaluator();
        let est = weyl::commutator_integral(&a, &b, 1, spec)?;
        worst = worst.max(est.value.norm());
    }
    out.push(WeylOutcome {
        check: "commutator integrals (3 displaced pairs)".into(),
        pass: worst <= 1e-5,
        residual: worst,
        bound: 1e-5,
    });

    Ok(out)
}

fn print_verify_table(run: &VerifyRun) {
    println!(
        "suite {} at n = {}: {}",
        run.suite,
        run.n,
        if run.pass { "PASS" } else { "FAIL" }
    );
    if !run.symbols.is_empty() {
        println!(
            "  {:<14} {:>13} {:>13} {:>13} {:>13}  result",
            "symbol", "thm resid", "thm bound", "prop resid", "prop bound"
        );
        for o in &run.symbols {
            println!(
                "  {:<14} {:>13.3e} {:>13.3e} {:>13.3e} {:>13.3e}  {}",
                o.symbol,
                o.theorem_residual,
                o.theorem_bound,
                o.proposition_worst_residual,
                o.proposition_bound,
                if o.pass { "pass" } else { "FAIL" }
            );
        }
    }
    for l in &run.lemmas {
        println!(
            "  {:<34} {:>13.3e} (bound {:>9.1e})  {}",
            l.check,
            l.residual,
            l.bound,
            if l.pass { "pass" } else { "FAIL" }
        );
    }
    for w in &run.weyl {
        println!(
            "  {:<34} {:>13.3e} (bound {:>9.1e})  {}",
            w.check,
            w.residual,
            w.bound,
            if w.pass { "pass" } else { "FAIL" }
        );
    }
}

// ---------------------------------------------------------------------------
// trace / sweep / sharp
// ---------------------------------------------------------------------------

fn fmt_c(v: Complex64) -> String {
    if v.im >= 0.0 {
        format!("{:.10}+{:.10}i", v.re, v.im)
    } else {
        format!("{:.10}-{:.10}i", v.re, -v.im)
    }
}

fn cmd_trace(
    name: &str,
    s_list: &[f64],
    n: usize,
    spec: &QuadratureSpec,
    out: Option<&Path>,
    csv: Option<&Path>,
    format: Format,
) -> Result<ExitCode, Error> {
    let dims = GroupDims::new(n)?;
    let sym = registry::resolve(name, dims)?;
    let extra: Vec<f64> = s_list
        .iter()
        .copied()
        .filter(|s| *s != 1.0 && *s != -1.0)
        .collect();
    let report = traces::build_report(&sym, spec, &extra)?;

    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(dir) = csv {
        std::fs::create_dir_all(dir)?;
        write_csv(
            &dir.join(format!("{}-tau-plus.csv", sym.name)),
            &report.convergence.tau_plus,
        )?;
        write_csv(
            &dir.join(format!("{}-tau-minus.csv", sym.name)),
            &report.convergence.tau_minus,
        )?;
    }

    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        _ => {
            println!("symbol {} (n = {})", report.symbol, report.n);
            println!(
                "  tau    = {}  (err {:.2e})",
                fmt_c(Complex64::new(report.tau.re, report.tau.im)),
                report.tau.err
            );
            println!(
                "  tau_+  = {}  (err {:.2e})",
                fmt_c(Complex64::new(report.tau_plus.re, report.tau_plus.im)),
                report.tau_plus.err
            );
            println!(
                "  tau_-  = {}  (err {:.2e})",
                fmt_c(Complex64::new(report.tau_minus.re, report.tau_minus.im)),
                report.tau_minus.err
            );
            println!(
                "  Res    = {}  (err {:.2e})",
                fmt_c(Complex64::new(report.res.re, report.res.im)),
                report.res.err
            );
            println!(
                "  main identity residual {:.3e} (est {:.3e})",
                report.theorem_residual, report.theorem_error_estimate
            );
            for e in &report.proposition {
                println!(
                    "  central-value residual at s = {:>5}: {:.3e} (est {:.3e})",
                    e.s, e.residual, e.error_estimate
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "beta,value_re,value_im,extrapolant_re,extrapolant_im,err_est"
    )?;
    for r in rows {
        writeln!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.beta, r.value_re, r.value_im, r.extrapolant_re, r.extrapolant_im, r.err_est
        )?;
    }
    Ok(())
}

fn cmd_sweep(
    name: &str,
    s: f64,
    n: usize,
    spec: &QuadratureSpec,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let dims = GroupDims::new(n)?;
    let sym = registry::resolve(name, dims)?;
    let tz = traces::tau_z(&sym, s, spec)?;
    let rows = traces::sweep_table(&tz.table);
    match out {
        Some(path) => write_csv(path, &rows)?,
        None => {
            println!("beta,value_re,value_im,extrapolant_re,extrapolant_im,err_est");
            for r in &rows {
                println!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.beta, r.value_re, r.value_im, r.extrapolant_re, r.extrapolant_im, r.err_est
                );
            }
        }
    }
    eprintln!(
        "extrapolated tau_z({s}) = {} (err {:.3e})",
        fmt_c(tz.value),
        tz.error
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sharp(
    name_a: &str,
    name_b: &str,
    v_text: &str,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<ExitCode, Error> {
    let dims = GroupDims::new(n)?;
    let a = registry::resolve(name_a, dims)?;
    let b = registry::resolve(name_b, dims)?;
    let v: Vec<f64> = v_text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("bad coordinate '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if v.len() != dims.horizontal_dim() {
        return Err(Error::Dimension {
            expected: dims.horizontal_dim(),
            got: v.len(),
        });
    }
    let est = weyl::sharp(&a.sigma_plus, &b.sigma_plus, &v, n, spec)?;
    println!(
        "(sigma_+[{}] # sigma_+[{}])({v_text}) = {}  (err {:.3e})",
        a.name,
        b.name,
        fmt_c(est.value),
        est.error
    );
    // Both factors Gaussian: report the closed-form oracle and discrepancy.
    if a.name.starts_with("gaussian") && b.name.starts_with("gaussian") {
        let ga = weyl::GaussianSymbol::centered(Complex64::new(1.0, 0.0), 2 * n, 1.0)?;
        let oracle = weyl::gaussian_sharp_value(&ga, &ga, &v);
        println!(
            "oracle = {}  discrepancy {:.3e}",
            fmt_c(oracle),
            (est.value - oracle).norm()
        );
    }
    Ok(ExitCode::SUCCESS)
}
