//! Command-line front end: one subcommand per verification surface, plus
//! `verify` to run the full scenario registry.
//!
//! Exit codes: 0 all pass, 1 at least one failing verdict, 2 invalid
//! parameters, 3 internal range error (e.g. an epsilon constant requested
//! outside the covered twist range).

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use num_traits::{One, ToPrimitive};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use waldspurger::chars::{chars_of_level, chars_up_to, AddChar, MultChar, UnitGroup};
use waldspurger::torus::{local_integral, omega_chars, vanishing_sweep, decay_experiment};
use waldspurger::{Error as WError, ExtKind, LocalFieldParams, PsDatum, Rep, ScDatum, TestVectorSpec};
use waldspurger_cli::report::{cyc_json, rational_str, sqrtq_json, FloatVal, RunReport};
use waldspurger_cli::scenarios::Overrides;
use waldspurger_cli::{id_matches, run_all};

#[derive(Parser)]
#[command(
    name = "waldspurger",
    about = "Exact verification of p-adic Gauss sums, epsilon factors, and local torus period integrals",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Args)]
struct CommonOpts {
    /// Odd prime >= 5.
    #[arg(long, default_value_t = 5)]
    p: u64,
    /// Quadratic extension kind of the torus E.
    #[arg(long, value_parser = parse_ext, default_value = "inert")]
    ext: ExtKind,
    /// Conductor of the representation.
    #[arg(long)]
    cpi: Option<u32>,
    /// Index into the canonical enumeration of inducing characters
    /// (supercuspidal) or primitive mu (principal series).
    #[arg(long, default_value_t = 0)]
    theta_index: usize,
    /// Conductor of the twisting character eta (or of chi where a scenario
    /// uses a single character).
    #[arg(long)]
    eta_level: Option<u32>,
    /// Index of eta among characters of the given exact level.
    #[arg(long, default_value_t = 0)]
    eta_index: usize,
    /// Conductor of Omega on the torus.
    #[arg(long)]
    omega_level: Option<u32>,
    /// Index of Omega among admissible characters of conductor <= level.
    #[arg(long, default_value_t = 0)]
    omega_index: usize,
    /// Diagonal translate exponent (or shell index for `gauss`).
    #[arg(long)]
    d: Option<i64>,
    /// Unit xi with pi_{E'}^2 = xi pi for ramified inducing extensions.
    #[arg(long, default_value_t = 1)]
    xi: u64,
    /// Value backend for reports.
    #[arg(long, value_parser = ["exact", "float"], default_value = "exact")]
    backend: String,
    /// Report format written to the output directory.
    #[arg(long, value_parser = ["json", "csv"], default_value = "json")]
    out: String,
    /// Worker threads for scenario-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Enumeration/truncation depth.
    #[arg(long, default_value_t = 12)]
    precision: u32,
    /// Output directory (defaults to $WALDSPURGER_OUT_DIR, then ".").
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Record wall-clock seconds in reports (breaks byte-identical output).
    #[arg(long, default_value_t = false)]
    timings: bool,
}

fn parse_ext(s: &str) -> Result<ExtKind, String> {
    match s {
        "inert" => Ok(ExtKind::Inert),
        "ramified" => Ok(ExtKind::Ramified),
        _ => Err("expected 'inert' or 'ramified'".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Shell integral of psi against a multiplicative character.
    Gauss(CommonOpts),
    /// Epsilon factor of a supercuspidal twisted by eta.
    Epsilon(CommonOpts),
    /// Matrix-coefficient agreement (closed form vs Kirillov oracle).
    Mc(CommonOpts),
    /// One local period integral I(Phi, Omega).
    Integral {
        #[command(flatten)]
        opts: CommonOpts,
        /// Representation kind.
        #[arg(long, value_parser = ["sc", "ps"], default_value = "sc")]
        rep: String,
    },
    /// Vanishing sweep over diagonal translates d != k.
    Sweep(CommonOpts),
    /// Decay experiment for deep translates (float backend).
    Decay {
        #[command(flatten)]
        opts: CommonOpts,
        /// Largest translate depth n.
        #[arg(long, default_value_t = 6)]
        nmax: u32,
    },
    /// Run registered verification scenarios.
    Verify {
        #[command(flatten)]
        opts: CommonOpts,
        /// Scenario filter: exact id, prefix with '*', or empty for all.
        #[arg(long, default_value = "")]
        filter: String,
    },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            classify_error(&e)
        }
    });
}

fn classify_error(e: &anyhow::Error) -> i32 {
    if let Some(we) = e.downcast_ref::<WError>() {
        match we {
            WError::EpsilonOutOfRange { .. } | WError::RangeViolation(_) => 3,
            _ => 2,
        }
    } else {
        2
    }
}

fn out_dir(opts: &CommonOpts) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| std::env::var_os("WALDSPURGER_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_reports(opts: &CommonOpts, stem: &str, reports: &[RunReport]) -> anyhow::Result<PathBuf> {
    let dir = out_dir(opts);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{stem}.{}", opts.out));
    let mut f = std::fs::File::create(&path)?;
    match opts.out.as_str() {
        "json" => {
            f.write_all(waldspurger_cli::report::to_json(reports)?.as_bytes())?;
            f.write_all(b"\n")?;
        }
        _ => waldspurger_cli::report::to_csv(reports, f)?,
    }
    Ok(path)
}

fn overrides(opts: &CommonOpts) -> Overrides {
    Overrides {
        p: Some(opts.p),
        ext: Some(opts.ext),
        cpi: opts.cpi,
        theta_index: Some(opts.theta_index),
        eta_level: opts.eta_level,
        eta_index: Some(opts.eta_index),
        omega_level: opts.omega_level,
        omega_index: Some(opts.omega_index),
        d: opts.d,
        xi: Some(opts.xi),
        precision: Some(opts.precision),
        float_backend: opts.backend == "float",
        nmax: None,
        jobs: Some(opts.jobs),
    }
}

fn params_json(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn simple_report(
    scenario: &str,
    anchor: &str,
    params: BTreeMap<String, serde_json::Value>,
    value_exact: serde_json::Value,
    value_float: FloatVal,
    expected: serde_json::Value,
    pass: bool,
    float_only: bool,
) -> RunReport {
    RunReport {
        anchor: anchor.to_string(),
        expected,
        params,
        scenario: scenario.to_string(),
        seconds: 0.0,
        value_exact: if float_only { serde_json::Value::Null } else { value_exact },
        value_float,
        verdict: if pass { "pass".into() } else { "fail".into() },
    }
}

fn eta_for(group: &std::sync::Arc<UnitGroup>, level: u32, index: usize) -> anyhow::Result<MultChar> {
    if level == 0 {
        return Ok(MultChar::trivial(group.clone()));
    }
    let list = chars_of_level(group, level);
    list.get(index)
        .cloned()
        .ok_or_else(|| anyhow!("eta index {index} out of range ({} characters)", list.len()))
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Gauss(opts) => {
            let params = LocalFieldParams::new(opts.p, opts.ext, opts.precision)?;
            let level = opts.eta_level.unwrap_or(1).max(1);
            let group = UnitGroup::f_group(&params, level.max(1));
            let chi = eta_for(&group, opts.eta_level.unwrap_or(1), opts.eta_index)?;
            let j = opts.d.unwrap_or(chi.conductor() as i64);
            let psi = AddChar::new(params);
            let val = waldspurger::chars::shell_integral(&psi, &chi, j, false);
            let f = val.to_float();
            let report = simple_report(
                "gauss",
                "Lemma 2.4 (Gauss sum magnitude and vanishing)",
                params_json(&[
                    ("p", opts.p.into()),
                    ("chi_level", chi.conductor().into()),
                    ("j", j.into()),
                ]),
                cyc_json(&val),
                FloatVal { re: f.re, im: f.im },
                serde_json::Value::Null,
                true,
                opts.backend == "float",
            );
            println!("gauss: value_float = ({:.9}, {:.9})", f.re, f.im);
            let path = write_reports(&opts, "gauss-report", &[report])?;
            println!("report: {}", path.display());
            Ok(0)
        }
        Command::Epsilon(opts) => {
            let c_pi = opts.cpi.unwrap_or(4);
            let sc = ScDatum::build(opts.p, c_pi, opts.xi, opts.theta_index)?;
            let eta = eta_for(&sc.fgroup, opts.eta_level.unwrap_or(0), opts.eta_index)?;
            let val = sc.epsilon_factor(&eta)?;
            let unitary = val.norm_sq().eq_rational(&num_rational::BigRational::one());
            let f = val.to_float();
            let report = simple_report(
                "epsilon",
                "Lemma 2.11 (epsilon factor as a Gauss integral over E')",
                params_json(&[
                    ("p", opts.p.into()),
                    ("c_pi", c_pi.into()),
                    ("eta_level", eta.conductor().into()),
                    ("theta_index", opts.theta_index.into()),
                    ("xi", opts.xi.into()),
                ]),
                cyc_json(&val),
                FloatVal { re: f.re, im: f.im },
                serde_json::json!("unitary"),
                unitary,
                opts.backend == "float",
            );
            println!(
                "epsilon: value_float = ({:.9}, {:.9}), |eps| = {:.12}",
                f.re,
                f.im,
                f.abs()
            );
            let path = write_reports(&opts, "epsilon-report", &[report])?;
            println!("report: {}", path.display());
            Ok(if unitary { 0 } else { 1 })
        }
        Command::Mc(opts) => {
            let o = overrides(&opts);
            let s = waldspurger_cli::scenarios::find("prop-4.1-mc").unwrap();
            let report = waldspurger_cli::scenarios::run_one(&s, &o, opts.timings);
            let pass = report.passed();
            println!("mc agreement: {}", report.verdict);
            let path = write_reports(&opts, "mc-report", &[report])?;
            println!("report: {}", path.display());
            Ok(if pass { 0 } else { 1 })
        }
        Command::Integral { opts, rep } => {
            let torus = LocalFieldParams::new(opts.p, opts.ext, opts.precision)?;
            let c_pi = opts.cpi.unwrap_or(4);
            let rep = match rep.as_str() {
                "sc" => Rep::Sc(ScDatum::build(opts.p, c_pi, opts.xi, opts.theta_index)?),
                _ => {
                    let base = LocalFieldParams::new(opts.p, ExtKind::Inert, opts.precision)?;
                    Rep::Ps(PsDatum::build(base, opts.theta_index, c_pi)?)
                }
            };
            let omega_level = opts.omega_level.unwrap_or(0);
            let egroup = UnitGroup::e_group(&torus, omega_level.max(1));
            let omegas = omega_chars(&egroup, omega_level);
            let omega = omegas
                .get(opts.omega_index)
                .ok_or_else(|| anyhow!("omega index out of range ({} admissible)", omegas.len()))?;
            let spec = match opts.eta_level {
                None | Some(0) => TestVectorSpec::newform(opts.d.unwrap_or((c_pi / 2) as i64)),
                Some(l) => TestVectorSpec::twisted(
                    eta_for(rep.fgroup(), l, opts.eta_index)?,
                    opts.d.unwrap_or((c_pi / 2) as i64),
                ),
            };
            let r = local_integral(&rep, &spec, omega, &torus, None, true)?;
            let f = r.value_float;
            println!(
                "I(Phi, Omega) over {} cosets (depth {}): float = ({:.9}, {:.9})",
                r.coset_count, r.depth, f.re, f.im
            );
            if let Some(rr) = r.rational() {
                println!("exact rational: {}", rational_str(&rr));
            }
            let report = simple_report(
                "integral",
                "Section 2.2 (the local period integral)",
                params_json(&[
                    ("p", opts.p.into()),
                    ("ext", format!("{:?}", opts.ext).to_lowercase().into()),
                    ("c_pi", c_pi.into()),
                    ("d", spec.d.into()),
                    ("omega_level", omega.conductor().into()),
                    ("coset_count", r.coset_count.into()),
                ]),
                sqrtq_json(&r.value),
                FloatVal { re: f.re, im: f.im },
                serde_json::Value::Null,
                true,
                opts.backend == "float",
            );
            let path = write_reports(&opts, "integral-report", &[report])?;
            println!("report: {}", path.display());
            Ok(0)
        }
        Command::Sweep(opts) => {
            let torus = LocalFieldParams::new(opts.p, opts.ext, opts.precision)?;
            let c_pi = opts.cpi.unwrap_or(4);
            let sc = ScDatum::build(opts.p, c_pi, opts.xi, opts.theta_index)?;
            let k = (c_pi / 2) as i64;
            let max_omega = opts.omega_level.unwrap_or(match opts.ext {
                ExtKind::Inert => (c_pi - 1) / 2,
                ExtKind::Ramified => c_pi - 1,
            });
            let egroup = UnitGroup::e_group(&torus, max_omega.max(1));
            let omegas = omega_chars(&egroup, max_omega);
            let etas: Vec<Option<MultChar>> = std::iter::once(None)
                .chain(chars_up_to(&sc.fgroup, sc.range_max()).into_iter().map(Some))
                .collect();
            let d_range: Vec<i64> = (0..=c_pi as i64).filter(|d| *d != k).collect();
            let rows = vanishing_sweep(&sc, &torus, &omegas, d_range.into_iter(), &etas)?;
            let mut pass = true;
            let mut reports = Vec::new();
            for row in &rows {
                let zero = row.report.value.is_zero();
                pass &= zero;
                reports.push(simple_report(
                    "sweep",
                    "Proposition 3.1 (vanishing off the canonical translate)",
                    params_json(&[
                        ("p", opts.p.into()),
                        ("c_pi", c_pi.into()),
                        ("d", row.d.into()),
                        ("eta", serde_json::json!(row.eta_key)),
                        ("omega", serde_json::json!(row.omega_key)),
                    ]),
                    sqrtq_json(&row.report.value),
                    FloatVal { re: row.report.value_float.re, im: row.report.value_float.im },
                    serde_json::json!("0/1"),
                    zero,
                    opts.backend == "float",
                ));
            }
            println!("sweep: {} rows, all zero: {}", rows.len(), pass);
            let path = write_reports(&opts, "sweep-report", &reports)?;
            println!("report: {}", path.display());
            Ok(if pass { 0 } else { 1 })
        }
        Command::Decay { opts, nmax } => {
            let torus = LocalFieldParams::new(opts.p, ExtKind::Inert, opts.precision)?;
            let level = opts.omega_level.unwrap_or(1);
            let egroup = UnitGroup::e_group(&torus, level.max(1));
            let omegas = omega_chars(&egroup, level);
            let omega = omegas
                .get(opts.omega_index)
                .ok_or_else(|| anyhow!("omega index out of range"))?;
            let table = decay_experiment(&torus, omega, nmax, 1.047, 64);
            for row in &table.rows {
                println!("n = {:2}  |I| = {:.12e}", row.n, row.abs_i);
            }
            println!(
                "slope = {:.6} (target <= {:.6}), truncation drift {:.3e}, oracle drift {:.3e}",
                table.slope,
                -3.0 / 8.0 + 0.05,
                table.truncation_drift,
                table.oracle_drift
            );
            let pass = table.slope <= -3.0 / 8.0 + 0.05
                && table.truncation_drift <= 1e-9
                && table.oracle_drift <= 1e-9;
            let report = simple_report(
                "decay",
                "Proposition 3.2 (decay under deep translates)",
                params_json(&[
                    ("p", opts.p.into()),
                    ("n_max", nmax.into()),
                    ("omega_level", omega.conductor().into()),
                    ("slope", table.slope.into()),
                ]),
                serde_json::Value::Null,
                FloatVal { re: table.rows.last().map(|r| r.abs_i).unwrap_or(0.0), im: 0.0 },
                serde_json::json!("slope <= -3/8 + 0.05"),
                pass,
                true,
            );
            let path = write_reports(&opts, "decay-report", &[report])?;
            println!("report: {}", path.display());
            Ok(if pass { 0 } else { 1 })
        }
        Command::Verify { opts, filter } => {
            if !waldspurger_cli::scenarios::scenarios()
                .iter()
                .any(|s| id_matches(&filter, s.id))
            {
                return Err(anyhow!(WError::InvalidParams(format!(
                    "no scenario matches filter '{filter}'"
                ))));
            }
            let o = overrides(&opts);
            let reports = run_all(&filter, &o, opts.timings);
            let mut pass_count = 0usize;
            let mut range_error = false;
            for r in &reports {
                println!("{:<22} {}", r.scenario, r.verdict);
                if r.passed() {
                    pass_count += 1;
                } else if r.verdict.contains("range") || r.verdict.contains("epsilon data") {
                    range_error = true;
                }
            }
            println!("{}/{} scenarios passed", pass_count, reports.len());
            let path = write_reports(&opts, "verify-report", &reports)?;
            println!("report: {}", path.display());
            if pass_count == reports.len() {
                Ok(0)
            } else if range_error {
                Ok(3)
            } else {
                Ok(1)
            }
        }
    }
}
