//! Command-line front end: grid dumps, integration runs, convergence
//! studies, composition-schedule export, and the Arenstorf benchmark.
//!
//! Exit codes: 0 success, 2 usage errors (bad flags, malformed inputs,
//! unreadable files), 3 numerical failures (singularities, non-finite
//! states, indeterminate order).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use ctgrid::analysis::estimate_order;
use ctgrid::composition::schedule_from_path;
use ctgrid::grids::{discretize, fractal_grid, roots_of_unity_steps, PathSpec, TimeGrid};
use ctgrid::linalg::CVector;
use ctgrid::problems::{
    arenstorf_composed_euler, arenstorf_position_error, arenstorf_reference, arenstorf_rhs,
    arenstorf_x0, builtin_problem, problem_from_json, IVProblem, ARENSTORF_PERIOD,
};
use ctgrid::rk::{integrate, ButcherTableau, GridFunction};

#[derive(Parser)]
#[command(name = "ctgrid", version, about = "Runge-Kutta integration along complex time grids")]
struct Cli {
    /// Seed for randomized suites. All current commands are
    /// deterministic; the flag is accepted so saved invocations stay
    /// valid once randomized commands exist.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a time grid as CSV.
    Grid(GridCmd),
    /// Integrate a problem with a Runge-Kutta method along a path.
    Integrate(IntegrateCmd),
    /// Fit the convergence order of the terminal error over a list of
    /// step counts.
    OrderStudy(OrderStudyCmd),
    /// Export the composition schedule sigma_1..sigma_k for a base
    /// order p as JSON.
    Schedule(ScheduleCmd),
    /// Run the restricted three-body benchmark.
    Arenstorf(ArenstorfCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum PathKind {
    /// Straight segment from t0 to t.
    RealSegment,
    /// Superconvergent circle segment gamma^p.
    CircleSegment,
    /// Flattened iterated-composition grid with k^r steps.
    Fractal,
    /// Steps proportional to consecutive n(p+1)-th roots of unity.
    Roots,
}

#[derive(Args)]
struct PathArgs {
    /// Path kind.
    #[arg(long, value_enum, default_value = "circle-segment")]
    path: PathKind,

    /// Start point, e.g. "0", "-1.5", "1+2i".
    #[arg(long, default_value = "0", value_parser = parse_complex, allow_hyphen_values = true)]
    t0: Complex64,

    /// End point (fractal: t0 + h).
    #[arg(long, default_value = "1", value_parser = parse_complex, allow_hyphen_values = true)]
    t: Complex64,

    /// Superconvergence order p of the panel.
    #[arg(long, default_value_t = 1)]
    p: u32,

    /// Fractal: micro steps per level. Roots: phase index of the first
    /// root (the grid is the same for every choice).
    #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
    k: i64,

    /// Fractal: iteration depth (k^r steps).
    #[arg(long, default_value_t = 1)]
    r: u32,

    /// Mirror the circle segment across the chord.
    #[arg(long)]
    conjugate: bool,
}

impl PathArgs {
    fn build(&self, n: usize) -> ctgrid::Result<TimeGrid> {
        match self.path {
            PathKind::RealSegment => discretize(&PathSpec::real(self.t0, self.t), n),
            PathKind::CircleSegment => discretize(
                &PathSpec::CircleSegment {
                    t0: self.t0,
                    t: self.t,
                    p: self.p,
                    conjugated: self.conjugate,
                },
                n,
            ),
            PathKind::Fractal => {
                fractal_grid(self.p, 1, self.micro_k()?, self.r, self.t0, self.t - self.t0)
            }
            PathKind::Roots => roots_of_unity_steps(self.t0, self.t, self.p, n, self.k),
        }
    }

    fn micro_k(&self) -> ctgrid::Result<usize> {
        usize::try_from(self.k).map_err(|_| {
            ctgrid::Error::InvalidArgument(format!("fractal paths need k >= 2, got {}", self.k))
        })
    }
}

#[derive(Args)]
struct GridCmd {
    #[command(flatten)]
    path: PathArgs,

    /// Number of steps (ignored for fractal paths, which have k^r).
    #[arg(long, default_value_t = 10)]
    n: usize,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateCmd {
    /// Built-in method (euler, heun, rk4, dopri5) or a tableau JSON file.
    #[arg(long, default_value = "euler")]
    method: String,

    /// Built-in problem (exp, arenstorf) or a linear-problem JSON file.
    #[arg(long, default_value = "exp")]
    problem: String,

    #[command(flatten)]
    path: PathArgs,

    /// Number of steps.
    #[arg(long, default_value_t = 10)]
    n: usize,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrderStudyCmd {
    /// Built-in method or a tableau JSON file.
    #[arg(long, default_value = "euler")]
    method: String,

    /// Built-in problem or a linear-problem JSON file (needs an exact
    /// flow, so arenstorf is rejected).
    #[arg(long, default_value = "exp")]
    problem: String,

    #[command(flatten)]
    path: PathArgs,

    /// Comma-separated step counts, strictly increasing, at least 4.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleCmd {
    /// Base method order p.
    #[arg(long, default_value_t = 1)]
    p: u32,

    /// Number of composition terms.
    #[arg(long, default_value_t = 2)]
    k: usize,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArenstorfVariant {
    /// Plain Euler with n real steps.
    PlainEuler,
    /// Composed Euler: n macro steps of two micro steps (1 +/- i)/2 h.
    ComposedEuler,
    /// Fixed-step Dopri5 reference orbit.
    Reference,
}

#[derive(Args)]
struct ArenstorfCmd {
    #[arg(long, value_enum)]
    variant: ArenstorfVariant,

    /// Step count (macro steps for composed-euler). Defaults: 100000
    /// for plain-euler and reference, 50000 for composed-euler.
    #[arg(long)]
    n: Option<usize>,

    /// Trajectory CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    use ctgrid::Error as E;
    match err.downcast_ref::<E>().map(E::root_cause) {
        Some(
            E::NonFinite(_)
            | E::DegeneratePhase
            | E::Singularity { .. }
            | E::NoReference
            | E::IndeterminateOrder,
        ) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Grid(cmd) => cmd_grid(cmd),
        Command::Integrate(cmd) => cmd_integrate(cmd),
        Command::OrderStudy(cmd) => cmd_order_study(cmd),
        Command::Schedule(cmd) => cmd_schedule(cmd),
        Command::Arenstorf(cmd) => cmd_arenstorf(cmd),
    }
}

/// Writes atomically when a path is given, otherwise to stdout.
/// Returns true when the payload went to a file.
fn emit(out: Option<&Path>, payload: &str) -> anyhow::Result<bool> {
    match out {
        None => {
            print!("{payload}");
            std::io::stdout().flush()?;
            Ok(false)
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating temp file in {}", dir.display()))?;
            tmp.write_all(payload.as_bytes())?;
            tmp.persist(path)
                .with_context(|| format!("writing {}", path.display()))?;
            Ok(true)
        }
    }
}

/// Summary lines go to stdout unless the payload already owns it.
fn summarize(payload_on_stdout: bool, text: &str) {
    if payload_on_stdout {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
}

fn resolve_method(spec: &str) -> anyhow::Result<ButcherTableau> {
    if let Some(tab) = ButcherTableau::builtin(spec) {
        return Ok(tab);
    }
    let text = fs::read_to_string(spec)
        .with_context(|| format!("'{spec}' is not a built-in method and not a readable file"))?;
    Ok(ButcherTableau::from_json(&text)?)
}

fn resolve_problem(spec: &str) -> anyhow::Result<IVProblem> {
    if let Ok(problem) = builtin_problem(spec) {
        return Ok(problem);
    }
    let text = fs::read_to_string(spec)
        .with_context(|| format!("'{spec}' is not a built-in problem and not a readable file"))?;
    Ok(problem_from_json(&text)?)
}

fn cmd_grid(cmd: GridCmd) -> anyhow::Result<()> {
    let grid = cmd.path.build(cmd.n)?;
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    let to_file = emit(cmd.out.as_deref(), std::str::from_utf8(&buf)?)?;
    if to_file {
        summarize(
            false,
            &format!(
                "wrote {} nodes ({} steps) to {}",
                grid.nodes().len(),
                grid.n(),
                cmd.out.as_deref().unwrap().display()
            ),
        );
    }
    Ok(())
}

fn integration_csv(gf: &GridFunction) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let d = gf.dim();
    let mut header = vec!["index".to_string(), "re(t)".into(), "im(t)".into()];
    for j in 0..d {
        header.push(format!("re(x{j})"));
        header.push(format!("im(x{j})"));
    }
    w.write_record(&header)?;
    for (i, (node, value)) in gf.grid().nodes().iter().zip(gf.values()).enumerate() {
        let mut row = vec![
            i.to_string(),
            ctgrid::csv_float(node.re),
            ctgrid::csv_float(node.im),
        ];
        for z in value.iter() {
            row.push(ctgrid::csv_float(z.re));
            row.push(ctgrid::csv_float(z.im));
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_integrate(cmd: IntegrateCmd) -> anyhow::Result<()> {
    let tab = resolve_method(&cmd.method)?;
    let problem = resolve_problem(&cmd.problem)?;
    let grid = cmd.path.build(cmd.n)?;
    let gf = problem.integrate(&tab, &grid)?;

    let csv = integration_csv(&gf)?;
    let to_stdout = !emit(cmd.out.as_deref(), &csv)?;

    let terminal = gf.terminal();
    let rendered: Vec<String> = terminal
        .iter()
        .map(|z| format!("{:.12e}{:+.12e}i", z.re, z.im))
        .collect();
    let mut summary = format!(
        "terminal at t = {}: x = [{}]",
        grid.t_end(),
        rendered.join(", ")
    );
    if problem.has_exact_flow() {
        let err = ctgrid::analysis::terminal_error(&gf, &problem)?;
        write!(summary, "; terminal error {err:.6e}")?;
    }
    summarize(to_stdout, &summary);
    Ok(())
}

fn cmd_order_study(cmd: OrderStudyCmd) -> anyhow::Result<()> {
    if cmd.n_list.is_empty() {
        anyhow::bail!("--n-list must not be empty");
    }
    if matches!(cmd.path.path, PathKind::Fractal) {
        return Err(ctgrid::Error::InvalidArgument(
            "order studies vary n; fractal grids have fixed size k^r (vary r instead)".into(),
        )
        .into());
    }
    let tab = resolve_method(&cmd.method)?;
    let problem = resolve_problem(&cmd.problem)?;
    let study = estimate_order(&tab, &problem, |n| cmd.path.build(n), &cmd.n_list)?;

    let mut buf = Vec::new();
    study.write_csv(&mut buf)?;
    let mut payload = String::from_utf8(buf)?;
    write!(
        payload,
        "# fitted_slope,{}\n# fit_window,{},{}\n",
        ctgrid::csv_float(study.fitted_slope()),
        study.fit_window().0,
        study.fit_window().1
    )?;
    let to_stdout = !emit(cmd.out.as_deref(), &payload)?;
    summarize(
        to_stdout,
        &format!(
            "fitted slope {:.4} over rows [{}, {}) of {}",
            study.fitted_slope(),
            study.fit_window().0,
            study.fit_window().1,
            study.n_values().len()
        ),
    );
    Ok(())
}

fn cmd_schedule(cmd: ScheduleCmd) -> anyhow::Result<()> {
    let sched = schedule_from_path(cmd.p, cmd.k)?;
    let mut payload = sched.to_json()?;
    payload.push('\n');
    let to_stdout = !emit(cmd.out.as_deref(), &payload)?;
    let (r1, r2) = sched.residuals();
    summarize(
        to_stdout,
        &format!("schedule p={} k={}: residuals ({r1:.2e}, {r2:.2e})", cmd.p, cmd.k),
    );
    Ok(())
}

fn trajectory_csv(gf: &GridFunction) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "t", "x1", "x2", "v1", "v2", "im_norm"])?;
    for (i, (node, value)) in gf.grid().nodes().iter().zip(gf.values()).enumerate() {
        let mut row = vec![i.to_string(), ctgrid::csv_float(node.re)];
        row.extend(value.iter().map(|z| ctgrid::csv_float(z.re)));
        row.push(ctgrid::csv_float(value.im_norm()));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_arenstorf(cmd: ArenstorfCmd) -> anyhow::Result<()> {
    match cmd.variant {
        ArenstorfVariant::Reference => {
            let n = cmd.n.unwrap_or(100_000);
            let gf = arenstorf_reference(n)?;
            let closure = gf.terminal().sub(&arenstorf_x0())?.norm();
            let to_stdout = !emit(cmd.out.as_deref(), &trajectory_csv(&gf)?)?;
            summarize(
                to_stdout,
                &format!("reference orbit, {n} Dopri5 steps: closure |x(T) - x(0)| = {closure:.4e}"),
            );
        }
        ArenstorfVariant::PlainEuler => {
            let n = cmd.n.unwrap_or(100_000);
            let gf = plain_euler_orbit(n)?;
            let reference = arenstorf_reference(100_000)?;
            let err = arenstorf_position_error(gf.terminal(), reference.terminal())?;
            let to_stdout = !emit(cmd.out.as_deref(), &trajectory_csv(&gf)?)?;
            summarize(
                to_stdout,
                &format!("plain Euler, {n} steps: terminal position error {err:.6e}"),
            );
        }
        ArenstorfVariant::ComposedEuler => {
            let n_macro = cmd.n.unwrap_or(50_000);
            let run = arenstorf_composed_euler(n_macro)?;
            let reference = arenstorf_reference(100_000)?;
            let composed_err =
                arenstorf_position_error(run.trajectory.terminal(), reference.terminal())?;

            // Same micro-step budget for the plain-Euler comparison.
            let euler = plain_euler_orbit(2 * n_macro)?;
            let euler_err = arenstorf_position_error(euler.terminal(), reference.terminal())?;

            let to_stdout = !emit(cmd.out.as_deref(), &trajectory_csv(&run.trajectory)?)?;
            summarize(
                to_stdout,
                &format!(
                    "composed Euler, {n_macro} macro steps: terminal position error {:.6e}; \
                     plain Euler with {} steps: {:.6e}; ratio {:.2}; \
                     max pre-projection |Im| {:.2e}",
                    composed_err,
                    2 * n_macro,
                    euler_err,
                    euler_err / composed_err,
                    run.max_im_before_projection
                ),
            );
        }
    }
    Ok(())
}

fn plain_euler_orbit(n: usize) -> anyhow::Result<GridFunction> {
    let grid = discretize(
        &PathSpec::real(Complex64::ZERO, Complex64::new(ARENSTORF_PERIOD, 0.0)),
        n,
    )?;
    Ok(integrate(
        &ButcherTableau::euler(),
        &|_t, x: &CVector| arenstorf_rhs(x),
        &grid,
        &arenstorf_x0(),
    )?)
}

/// Parses "a", "bi", "a+bi", "a-bi" with optional scientific notation.
fn parse_complex(s: &str) -> Result<Complex64, String> {
    let s: String = s.chars().filter(|ch| !ch.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    let parse_real = |txt: &str| -> Result<f64, String> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => txt
                .parse()
                .map_err(|_| format!("invalid number '{txt}'")),
        }
    };
    if let Some(body) = s.strip_suffix(['i', 'I']) {
        // Find the sign splitting real and imaginary parts: a '+'/'-'
        // that is neither leading nor part of an exponent.
        let bytes = body.as_bytes();
        let split = (1..bytes.len()).rev().find(|&idx| {
            matches!(bytes[idx], b'+' | b'-') && !matches!(bytes[idx - 1], b'e' | b'E')
        });
        return match split {
            Some(idx) => {
                let re = parse_real(&body[..idx]).and_then(|v| match &body[..idx] {
                    "+" | "-" | "" => Err("missing real part".to_string()),
                    _ => Ok(v),
                })?;
                Ok(Complex64::new(re, parse_real(&body[idx..])?))
            }
            None => Ok(Complex64::new(0.0, parse_real(body)?)),
        };
    }
    s.parse()
        .map(|re| Complex64::new(re, 0.0))
        .map_err(|_| format!("invalid complex literal '{s}'"))
}

#[cfg(test)]
mod tests {
    use super::parse_complex;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("2").unwrap(), c(2.0, 0.0));
        assert_eq!(parse_complex("-1.5e-3").unwrap(), c(-1.5e-3, 0.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("3i").unwrap(), c(0.0, 3.0));
        assert_eq!(parse_complex("1+2i").unwrap(), c(1.0, 2.0));
        assert_eq!(parse_complex("1.5-2.5i").unwrap(), c(1.5, -2.5));
        assert_eq!(parse_complex("2-i").unwrap(), c(2.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e-4i").unwrap(), c(1e-3, 2e-4));
        assert_eq!(parse_complex(" 1 + 2i ").unwrap(), c(1.0, 2.0));
        assert!(parse_complex("").is_err());
        assert!(parse_complex("1+2j").is_err());
        assert!(parse_complex("+-i").is_err());
    }
}
