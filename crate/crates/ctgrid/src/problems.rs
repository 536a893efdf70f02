//! Initial value problems: linear systems with exact flow, the scalar
//! exponential, and the Arenstorf restricted three-body system with a
//! cached fine reference orbit.

use std::cell::Cell;
use std::env;
use std::io::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;

use crate::composition::{compose_step, schedule_from_path};
use crate::error::{Error, Result};
use crate::grids::{discretize, PathSpec, TimeGrid};
use crate::linalg::{exact_linear_flow, CMatrix, CVector};
use crate::rk::{integrate, ButcherTableau, GridFunction};

/// Mass ratio μ of the smaller body (moon).
pub const ARENSTORF_MU: f64 = 0.012277471;

/// Period of the closed orbit started at [`arenstorf_x0`].
#[allow(clippy::excessive_precision)] // keeps the published digits verbatim
pub const ARENSTORF_PERIOD: f64 = 17.065216560157960;

/// Denominators |w^{3/2}| below this abort with a singularity error. The
/// orbit never approaches either body closer than ~1e-2, so only
/// pathological inputs trip the guard.
const SINGULARITY_GUARD: f64 = 1e-9;

/// Initial state (x1, x2, ẋ1, ẋ2) of the closed Arenstorf orbit.
#[allow(clippy::excessive_precision)] // keeps the published digits verbatim
pub fn arenstorf_x0() -> CVector {
    CVector::from_real(&[0.994, 0.0, 0.0, -2.001585106379080]).expect("finite literals")
}

type RhsFn = Box<dyn Fn(Complex64, &CVector) -> Result<CVector> + Send + Sync>;

/// What structure the right-hand side carries.
pub enum ProblemKind {
    /// ẋ = A x; the exact flow e^{(t−t0)A} x0 is available.
    Linear(CMatrix),
    General,
}

/// An initial value problem ẋ = f(t, x), x(t0) = x0 over ℂ^d.
pub struct IVProblem {
    dim: usize,
    t0: Complex64,
    x0: CVector,
    rhs: RhsFn,
    kind: ProblemKind,
}

impl IVProblem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> Complex64 {
        self.t0
    }

    pub fn x0(&self) -> &CVector {
        &self.x0
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn rhs(&self, t: Complex64, x: &CVector) -> Result<CVector> {
        (self.rhs)(t, x)
    }

    pub fn has_exact_flow(&self) -> bool {
        matches!(self.kind, ProblemKind::Linear(_))
    }

    /// Exact solution value at t, when the problem carries one.
    pub fn exact_flow(&self, t: Complex64) -> Result<CVector> {
        match &self.kind {
            ProblemKind::Linear(a) => exact_linear_flow(a, self.t0, t, &self.x0),
            ProblemKind::General => Err(Error::NoReference),
        }
    }

    /// Runs a method over a grid starting from this problem's (t0, x0).
    /// The grid must start at t0.
    pub fn integrate(&self, tab: &ButcherTableau, grid: &TimeGrid) -> Result<GridFunction> {
        if (grid.t0() - self.t0).norm() > 1e-12 * (1.0 + self.t0.norm()) {
            return Err(Error::InvalidArgument(format!(
                "grid starts at {}, problem at {}",
                grid.t0(),
                self.t0
            )));
        }
        integrate(tab, &|t, x| self.rhs(t, x), grid, &self.x0)
    }
}

/// Linear problem ẋ = A x with exact flow attached.
pub fn make_linear(a: CMatrix, t0: Complex64, x0: CVector) -> Result<IVProblem> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "make_linear",
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    if a.rows() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "make_linear",
            expected: format!("{}", a.rows()),
            found: format!("{}", x0.len()),
        });
    }
    let a_rhs = a.clone();
    Ok(IVProblem {
        dim: x0.len(),
        t0,
        x0,
        rhs: Box::new(move |_t, x| a_rhs.mul_vec(x)),
        kind: ProblemKind::Linear(a),
    })
}

/// The motivating scalar problem ẋ = x, x(0) = 1 with φ(t) = e^t.
pub fn make_exp() -> IVProblem {
    make_linear(
        CMatrix::from_real(1, &[1.0]).expect("1x1 identity data"),
        Complex64::ZERO,
        CVector::from_real(&[1.0]).expect("finite literal"),
    )
    .expect("dimensions match")
}

/// The Arenstorf restricted three-body problem, started on the closed
/// orbit of period [`ARENSTORF_PERIOD`].
pub fn make_arenstorf() -> IVProblem {
    IVProblem {
        dim: 4,
        t0: Complex64::ZERO,
        x0: arenstorf_x0(),
        rhs: Box::new(|_t, x| arenstorf_rhs(x)),
        kind: ProblemKind::General,
    }
}

/// Built-in problems: "exp" and "arenstorf".
pub fn builtin_problem(name: &str) -> Result<IVProblem> {
    match name {
        "exp" => Ok(make_exp()),
        "arenstorf" => Ok(make_arenstorf()),
        other => Err(Error::InvalidArgument(format!(
            "unknown built-in problem '{other}' (available: exp, arenstorf)"
        ))),
    }
}

/// Principal branch of w^{3/2}. For w on the positive real axis this is
/// exact real arithmetic, so real states stay real bit-for-bit.
fn pow32(w: Complex64) -> Complex64 {
    if w.im == 0.0 && w.re >= 0.0 {
        return Complex64::new(w.re * w.re.sqrt(), 0.0);
    }
    w * w.sqrt()
}

/// Arenstorf right-hand side for the state (x1, x2, ẋ1, ẋ2).
///
/// Complex states use the principal branch for both w_i^{3/2}; body 1 is
/// the heavy primary at (−μ, 0), body 2 the light one at (1−μ, 0).
pub fn arenstorf_rhs(state: &CVector) -> Result<CVector> {
    if state.len() != 4 {
        return Err(Error::DimensionMismatch {
            context: "arenstorf_rhs",
            expected: "4".into(),
            found: format!("{}", state.len()),
        });
    }
    let mu = ARENSTORF_MU;
    let mu_hat = 1.0 - mu;

    if state.is_real() {
        let (x1, x2, v1, v2) = (state[0].re, state[1].re, state[2].re, state[3].re);
        let w1 = (x1 + mu) * (x1 + mu) + x2 * x2;
        let w2 = (x1 - mu_hat) * (x1 - mu_hat) + x2 * x2;
        let d1 = w1 * w1.sqrt();
        let d2 = w2 * w2.sqrt();
        if d1.abs() < SINGULARITY_GUARD {
            return Err(Error::Singularity { body: 1 });
        }
        if d2.abs() < SINGULARITY_GUARD {
            return Err(Error::Singularity { body: 2 });
        }
        let a1 = x1 + 2.0 * v2 - mu_hat * (x1 + mu) / d1 - mu * (x1 - mu_hat) / d2;
        let a2 = x2 - 2.0 * v1 - mu_hat * x2 / d1 - mu * x2 / d2;
        return CVector::from_real(&[v1, v2, a1, a2]);
    }

    let (x1, x2, v1, v2) = (state[0], state[1], state[2], state[3]);
    let w1 = (x1 + mu) * (x1 + mu) + x2 * x2;
    let w2 = (x1 - mu_hat) * (x1 - mu_hat) + x2 * x2;
    let d1 = pow32(w1);
    let d2 = pow32(w2);
    if d1.norm() < SINGULARITY_GUARD {
        return Err(Error::Singularity { body: 1 });
    }
    if d2.norm() < SINGULARITY_GUARD {
        return Err(Error::Singularity { body: 2 });
    }
    let a1 = x1 + 2.0 * v2 - (x1 + mu) * mu_hat / d1 - (x1 - mu_hat) * mu / d2;
    let a2 = x2 - 2.0 * v1 - x2 * mu_hat / d1 - x2 * mu / d2;
    CVector::new(vec![v1, v2, a1, a2])
}

/// How close the radicands come to the branch cut: max of
/// |Im w_i| / |Re w_i| over both bodies. Small values mean the principal
/// branch of w^{3/2} is far from its discontinuity on the negative real
/// axis.
pub fn arenstorf_branch_proximity(state: &CVector) -> f64 {
    if state.len() != 4 {
        return f64::INFINITY;
    }
    let mu = ARENSTORF_MU;
    let mu_hat = 1.0 - mu;
    let (x1, x2) = (state[0], state[1]);
    let w1 = (x1 + mu) * (x1 + mu) + x2 * x2;
    let w2 = (x1 - mu_hat) * (x1 - mu_hat) + x2 * x2;
    let ratio = |w: Complex64| {
        if w.re == 0.0 {
            f64::INFINITY
        } else {
            (w.im / w.re).abs()
        }
    };
    ratio(w1).max(ratio(w2))
}

/// Euclidean distance of the (x1, x2) position components.
pub fn arenstorf_position_error(a: &CVector, b: &CVector) -> Result<f64> {
    if a.len() != 4 || b.len() != 4 {
        return Err(Error::DimensionMismatch {
            context: "arenstorf_position_error",
            expected: "4".into(),
            found: format!("{} and {}", a.len(), b.len()),
        });
    }
    Ok(((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt())
}

fn cache_dir() -> PathBuf {
    env::var_os("CTGRID_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(env::temp_dir)
}

/// Fine Dormand-Prince 5 reference orbit over one period [0, T] on a
/// uniform real grid.
///
/// The trajectory is cached under `$CTGRID_CACHE_DIR` (or the system
/// temp directory) keyed by n_steps; corrupt or mismatched cache files
/// are recomputed and replaced. Caching is best effort: failures to
/// write never fail the computation.
pub fn arenstorf_reference(n_steps: usize) -> Result<GridFunction> {
    if n_steps < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "arenstorf_reference needs n_steps >= 10000 (got {n_steps})"
        )));
    }
    let path = cache_dir().join(format!("arenstorf-ref-{n_steps}.csv"));
    if let Some(gf) = load_reference_cache(&path, n_steps) {
        return Ok(gf);
    }
    let grid = discretize(
        &PathSpec::real(
            Complex64::ZERO,
            Complex64::new(ARENSTORF_PERIOD, 0.0),
        ),
        n_steps,
    )?;
    let gf = integrate(
        &ButcherTableau::dopri5(),
        &|_t, x| arenstorf_rhs(x),
        &grid,
        &arenstorf_x0(),
    )?;
    let _ = store_reference_cache(&path, &gf);
    Ok(gf)
}

/// Returns None on any inconsistency so the caller recomputes.
fn load_reference_cache(path: &std::path::Path, n_steps: usize) -> Option<GridFunction> {
    let mut reader = csv::Reader::from_path(path).ok()?;
    let mut nodes = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    for record in reader.records() {
        let record = record.ok()?;
        if record.len() != 5 {
            return None;
        }
        let mut fields = [0.0f64; 5];
        for (slot, raw) in fields.iter_mut().zip(record.iter()) {
            *slot = raw.trim().parse().ok()?;
        }
        nodes.push(Complex64::new(fields[0], 0.0));
        values.push(CVector::from_real(&fields[1..]).ok()?);
    }
    if nodes.len() != n_steps + 1
        || nodes[0] != Complex64::ZERO
        || (nodes[n_steps].re - ARENSTORF_PERIOD).abs() > 1e-9
    {
        return None;
    }
    GridFunction::new(TimeGrid::new(nodes).ok()?, values).ok()
}

fn store_reference_cache(path: &std::path::Path, gf: &GridFunction) -> Result<()> {
    let dir = path.parent().ok_or(Error::InvalidArgument(
        "cache path has no parent directory".into(),
    ))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file_mut());
        w.write_record(["t", "x1", "x2", "v1", "v2"])?;
        for (node, value) in gf.grid().nodes().iter().zip(gf.values()) {
            let mut row = vec![crate::csv_float(node.re)];
            row.extend(value.iter().map(|z| crate::csv_float(z.re)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    tmp.as_file_mut().flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Result of the composed-Euler benchmark run.
pub struct ArenstorfComposedRun {
    /// States at the real macro nodes, projected back to ℝ^4 after each
    /// macro step.
    pub trajectory: GridFunction,
    /// Largest imaginary-part norm seen before the per-step projection.
    pub max_im_before_projection: f64,
    /// Largest branch-cut proximity of the radicands over all micro
    /// evaluations (see [`arenstorf_branch_proximity`]).
    pub max_branch_proximity: f64,
}

/// Composed Euler (k = 2 micro steps (1±i)/2·h) over one period with
/// n_macro macro steps.
///
/// Micro states leave the real axis, so each macro step evaluates the
/// complex-extended right-hand side; the macro result is projected back
/// to its real part before the next step. The discarded imaginary norms
/// stay small (~1e-4 at n_macro = 50000) and are reported.
pub fn arenstorf_composed_euler(n_macro: usize) -> Result<ArenstorfComposedRun> {
    if n_macro < 1 {
        return Err(Error::InvalidArgument(
            "arenstorf_composed_euler needs n_macro >= 1".into(),
        ));
    }
    let sched = schedule_from_path(1, 2)?;
    let tab = ButcherTableau::euler();
    let grid = discretize(
        &PathSpec::real(
            Complex64::ZERO,
            Complex64::new(ARENSTORF_PERIOD, 0.0),
        ),
        n_macro,
    )?;

    let proximity = Cell::new(0.0f64);
    let f = |_t: Complex64, x: &CVector| {
        let p = arenstorf_branch_proximity(x);
        if p > proximity.get() {
            proximity.set(p);
        }
        arenstorf_rhs(x)
    };

    let mut values = Vec::with_capacity(n_macro + 1);
    let mut cur = arenstorf_x0();
    values.push(cur.clone());
    let mut max_im = 0.0f64;
    for j in 0..n_macro {
        let t = grid.nodes()[j];
        let h = grid.steps()[j];
        let stepped = compose_step(&tab, &sched, &f, t, h, &cur)
            .map_err(|e| Error::StepFailed {
                index: j,
                source: Box::new(e),
            })?;
        max_im = max_im.max(stepped.im_norm());
        cur = stepped.real_part();
        values.push(cur.clone());
    }

    Ok(ArenstorfComposedRun {
        trajectory: GridFunction::new(grid, values)?,
        max_im_before_projection: max_im,
        max_branch_proximity: proximity.get(),
    })
}

/// Serialization of linear problems: `{ A, t0, x0 }` with complex
/// scalars as `[re, im]` pairs and A as nested rows.
#[derive(serde::Serialize, serde::Deserialize)]
struct ProblemJson {
    #[serde(rename = "A")]
    a: Vec<Vec<[f64; 2]>>,
    t0: [f64; 2],
    x0: Vec<[f64; 2]>,
}

pub fn problem_to_json(problem: &IVProblem) -> Result<String> {
    let a = match &problem.kind {
        ProblemKind::Linear(a) => a,
        ProblemKind::General => {
            return Err(Error::InvalidArgument(
                "only linear problems serialize to JSON".into(),
            ))
        }
    };
    let doc = ProblemJson {
        a: (0..a.rows())
            .map(|i| (0..a.cols()).map(|j| [a.get(i, j).re, a.get(i, j).im]).collect())
            .collect(),
        t0: [problem.t0.re, problem.t0.im],
        x0: problem.x0.iter().map(|z| [z.re, z.im]).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn problem_from_json(text: &str) -> Result<IVProblem> {
    let doc: ProblemJson = serde_json::from_str(text)?;
    let rows: Vec<Vec<Complex64>> = doc
        .a
        .iter()
        .map(|row| row.iter().map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    let a = CMatrix::from_rows(&rows)?;
    if !a.is_square() {
        return Err(Error::Format {
            what: "problem json",
            detail: format!("A must be square, got {}x{}", a.rows(), a.cols()),
        });
    }
    let x0 = CVector::new(doc.x0.iter().map(|p| Complex64::new(p[0], p[1])).collect())?;
    make_linear(a, Complex64::new(doc.t0[0], doc.t0[1]), x0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exp_problem_matches_scalar_exponential() {
        let p = make_exp();
        assert_eq!(p.dim(), 1);
        let f = p.rhs(Complex64::ZERO, &CVector::from_real(&[2.0]).unwrap()).unwrap();
        assert_eq!(f[0], c(2.0, 0.0));
        let phi = p.exact_flow(Complex64::ONE).unwrap();
        assert!((phi[0].re - std::f64::consts::E).abs() < 1e-14);
        assert_eq!(phi[0].im, 0.0);
    }

    #[test]
    fn rotation_system_exact_flow() {
        let a = CMatrix::from_real(2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        let p = make_linear(a, Complex64::ZERO, CVector::from_real(&[1.0, 0.0]).unwrap()).unwrap();
        let half_pi = c(std::f64::consts::FRAC_PI_2, 0.0);
        let phi = p.exact_flow(half_pi).unwrap();
        assert!((phi[0] - c(0.0, 0.0)).norm() < 1e-14);
        assert!((phi[1] - c(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_matrix_gives_constant_flow() {
        let p = make_linear(
            CMatrix::zeros(2, 2),
            Complex64::ZERO,
            CVector::from_real(&[3.0, -4.0]).unwrap(),
        )
        .unwrap();
        let phi = p.exact_flow(c(7.0, 2.0)).unwrap();
        assert_eq!(phi, *p.x0());
    }

    #[test]
    fn make_linear_rejects_mismatched_dims() {
        assert!(make_linear(
            CMatrix::zeros(2, 3),
            Complex64::ZERO,
            CVector::zeros(2)
        )
        .is_err());
        assert!(make_linear(
            CMatrix::zeros(2, 2),
            Complex64::ZERO,
            CVector::zeros(3)
        )
        .is_err());
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn arenstorf_rhs_at_the_initial_point() {
        // Independent high-precision evaluation of the acceleration.
        let f = arenstorf_rhs(&arenstorf_x0()).unwrap();
        assert_eq!(f[0], c(0.0, 0.0));
        assert_eq!(f[1], c(-2.001585106379080, 0.0));
        assert!((f[2].re - -315.54302348888110745).abs() < 1e-9);
        assert_eq!(f[2].im, 0.0);
        assert_eq!(f[3], c(0.0, 0.0));
    }

    #[test]
    fn arenstorf_axis_states_have_zero_second_acceleration() {
        // Every ẍ2 term carries a factor x2 or ẋ1.
        for x1 in [0.3, 0.8, -0.5] {
            let f = arenstorf_rhs(&CVector::from_real(&[x1, 0.0, 0.0, 1.5]).unwrap()).unwrap();
            assert_eq!(f[3], c(0.0, 0.0));
        }
    }

    #[test]
    fn arenstorf_singularities_name_the_body() {
        let mu = ARENSTORF_MU;
        let at_earth = CVector::from_real(&[-mu, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            arenstorf_rhs(&at_earth).unwrap_err(),
            Error::Singularity { body: 1 }
        ));
        let at_moon = CVector::from_real(&[1.0 - mu, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            arenstorf_rhs(&at_moon).unwrap_err(),
            Error::Singularity { body: 2 }
        ));
    }

    #[test]
    fn arenstorf_real_states_stay_exactly_real() {
        let states = [
            [0.994, 0.0, 0.0, -2.0],
            [0.1, 0.7, -0.3, 0.2],
            [-1.2, 0.4, 1.0, 1.0],
        ];
        for s in states {
            let f = arenstorf_rhs(&CVector::from_real(&s).unwrap()).unwrap();
            assert!(f.is_real());
        }
    }

    #[test]
    fn arenstorf_complex_extension_is_continuous() {
        let base = CVector::from_real(&[0.4, 0.6, -0.2, 0.9]).unwrap();
        let f0 = arenstorf_rhs(&base).unwrap();
        let mut shifted = base.as_slice().to_vec();
        shifted[0] += c(0.0, 1e-9);
        shifted[1] += c(0.0, -1e-9);
        let f1 = arenstorf_rhs(&CVector::new(shifted).unwrap()).unwrap();
        let diff = f1.sub(&f0).unwrap().norm();
        assert!(diff < 1e-6, "diff = {diff:.3e}");
        assert!(arenstorf_branch_proximity(&base) == 0.0);
    }

    #[test]
    fn pow32_principal_branch() {
        // 4^{3/2} on the real axis, exactly.
        assert_eq!(pow32(c(4.0, 0.0)), c(8.0, 0.0));
        // i^{3/2} = e^{i 3π/4}.
        let z = pow32(c(0.0, 1.0));
        let expected = Complex64::from_polar(1.0, 3.0 * std::f64::consts::FRAC_PI_4);
        assert!((z - expected).norm() < 1e-15);
        // The branch cut sits on the negative real axis: arg jumps from
        // ≈ π above it to ≈ −π below, so w^{3/2} lands at ∓i.
        assert!((pow32(c(-1.0, 1e-12)) - c(0.0, -1.0)).norm() < 1e-9);
        assert!((pow32(c(-1.0, -1e-12)) - c(0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn reference_rejects_coarse_grids() {
        assert!(matches!(
            arenstorf_reference(9999).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn composed_run_reports_projection_sizes() {
        // The orbit passes within ~6e-3 of the moon right at the start,
        // so the smoke check uses the benchmark's own macro resolution.
        let run = arenstorf_composed_euler(50_000).unwrap();
        assert_eq!(run.trajectory.grid().n(), 50_000);
        assert_eq!(run.trajectory.dim(), 4);
        assert!(run.trajectory.terminal().is_real());
        assert!(run.trajectory.terminal().is_finite());
        assert!(run.max_im_before_projection > 0.0);
        assert!(
            run.max_im_before_projection < 0.01,
            "max_im = {:.3e}",
            run.max_im_before_projection
        );
        assert!(
            run.max_branch_proximity < 1.0,
            "proximity = {:.3e}",
            run.max_branch_proximity
        );
    }

    #[test]
    fn position_error_ignores_velocities() {
        let a = CVector::from_real(&[1.0, 2.0, 9.0, 9.0]).unwrap();
        let b = CVector::from_real(&[4.0, 6.0, -9.0, 0.0]).unwrap();
        assert!((arenstorf_position_error(&a, &b).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn builtin_problem_names() {
        assert_eq!(builtin_problem("exp").unwrap().dim(), 1);
        assert_eq!(builtin_problem("arenstorf").unwrap().dim(), 4);
        assert!(builtin_problem("lorenz").is_err());
    }

    #[test]
    fn problem_json_roundtrip() {
        let a = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.5)],
            vec![c(-1.0, 0.0), c(0.0, -2.0)],
        ])
        .unwrap();
        let p = make_linear(a, c(0.5, 0.0), CVector::from_real(&[1.0, 2.0]).unwrap()).unwrap();
        let text = problem_to_json(&p).unwrap();
        let q = problem_from_json(&text).unwrap();
        assert_eq!(q.dim(), 2);
        assert_eq!(q.t0(), c(0.5, 0.0));
        let pt = c(0.9, 0.1);
        let fp = p.exact_flow(pt).unwrap();
        let fq = q.exact_flow(pt).unwrap();
        assert!(fp.sub(&fq).unwrap().norm() < 1e-15);

        assert!(problem_to_json(&make_arenstorf()).is_err());
        assert!(problem_from_json(r#"{"A": [[[0,0],[1,0]]], "t0": [0,0], "x0": [[1,0]]}"#).is_err());
    }

    #[test]
    fn reference_cache_roundtrip() {
        // Store and reload a small trajectory through the cache codecs.
        let grid = discretize(
            &PathSpec::real(Complex64::ZERO, c(ARENSTORF_PERIOD, 0.0)),
            16,
        )
        .unwrap();
        let gf = integrate(
            &ButcherTableau::rk4(),
            &|_t, x: &CVector| arenstorf_rhs(x),
            &grid,
            &arenstorf_x0(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("arenstorf-ref-16.csv");
        store_reference_cache(&path, &gf).unwrap();
        let back = load_reference_cache(&path, 16).unwrap();
        assert_eq!(back.grid().nodes(), gf.grid().nodes());
        for (u, v) in back.values().iter().zip(gf.values()) {
            assert_eq!(u, v);
        }
        // Wrong step count is rejected.
        assert!(load_reference_cache(&path, 17).is_none());
    }
}
