//! Error measurement, convergence-order estimation, leading-error-term
//! verification for linear flows, and reality diagnostics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grids::{discretize, PathSpec, TimeGrid};
use crate::linalg::{exact_linear_flow, mat_exp, CMatrix, CVector};
use crate::problems::IVProblem;
use crate::rk::{stability_polynomial, ButcherTableau, GridFunction};

/// Errors at or below this are treated as rounding floor and excluded
/// from slope fits.
const ERROR_FLOOR: f64 = 1e-13;

/// Terminal errors over a family of step counts with a fitted
/// convergence order.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    n_values: Vec<usize>,
    deltas: Vec<f64>,
    terminal_errors: Vec<f64>,
    im_norms: Vec<f64>,
    fitted_slope: f64,
    fit_window: (usize, usize),
}

impl ConvergenceStudy {
    /// Builds a study from measured data and fits the order.
    ///
    /// The fit window is the longest strictly decreasing suffix of the
    /// errors after trimming trailing rounding-floor entries; the
    /// pre-asymptotic head is excluded. Fewer than two usable points
    /// mean no order can be claimed.
    pub fn from_errors(
        n_values: Vec<usize>,
        deltas: Vec<f64>,
        terminal_errors: Vec<f64>,
        im_norms: Vec<f64>,
    ) -> Result<Self> {
        let len = n_values.len();
        if deltas.len() != len || terminal_errors.len() != len || im_norms.len() != len {
            return Err(Error::DimensionMismatch {
                context: "ConvergenceStudy",
                expected: format!("{len}"),
                found: format!(
                    "{}/{}/{}",
                    deltas.len(),
                    terminal_errors.len(),
                    im_norms.len()
                ),
            });
        }
        if !n_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "n_values must be strictly increasing".into(),
            ));
        }
        if terminal_errors
            .iter()
            .chain(&deltas)
            .chain(&im_norms)
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::NonFinite("ConvergenceStudy data"));
        }

        let mut end = len;
        while end > 0 && terminal_errors[end - 1] <= ERROR_FLOOR {
            end -= 1;
        }
        let mut start = end.saturating_sub(1);
        while start > 0 && terminal_errors[start - 1] > terminal_errors[start] {
            start -= 1;
        }
        if end - start < 2 {
            return Err(Error::IndeterminateOrder);
        }

        let xs: Vec<f64> = n_values[start..end]
            .iter()
            .map(|n| -(*n as f64).ln())
            .collect();
        let ys: Vec<f64> = terminal_errors[start..end]
            .iter()
            .map(|e| e.ln())
            .collect();
        let fitted_slope = least_squares_slope(&xs, &ys);

        Ok(Self {
            n_values,
            deltas,
            terminal_errors,
            im_norms,
            fitted_slope,
            fit_window: (start, end),
        })
    }

    pub fn n_values(&self) -> &[usize] {
        &self.n_values
    }

    /// Largest step modulus δ_n per run.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn terminal_errors(&self) -> &[f64] {
        &self.terminal_errors
    }

    pub fn im_norms(&self) -> &[f64] {
        &self.im_norms
    }

    /// Least-squares slope of log(error) against log(1/n) over the fit
    /// window; ≈ p + 1 on superconvergent grids.
    pub fn fitted_slope(&self) -> f64 {
        self.fitted_slope
    }

    /// Half-open index range of the rows behind the fit.
    pub fn fit_window(&self) -> (usize, usize) {
        self.fit_window
    }

    /// Writes rows `n, delta_n, error, im_norm`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "delta_n", "error", "im_norm"])?;
        for i in 0..self.n_values.len() {
            w.write_record([
                self.n_values[i].to_string(),
                crate::csv_float(self.deltas[i]),
                crate::csv_float(self.terminal_errors[i]),
                crate::csv_float(self.im_norms[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// ‖Φ^{t_n,t_0} x0 − x_Δ(t_n)‖ against the problem's exact flow.
pub fn terminal_error(gf: &GridFunction, problem: &IVProblem) -> Result<f64> {
    let exact = problem.exact_flow(gf.grid().t_end())?;
    terminal_error_against(gf, &exact)
}

/// Terminal error against an externally supplied reference value.
pub fn terminal_error_against(gf: &GridFunction, reference: &CVector) -> Result<f64> {
    Ok(gf.terminal().sub(reference)?.norm())
}

/// Runs a method over grid_family(n) for each n and fits the
/// convergence order of the terminal error.
pub fn estimate_order<G>(
    tab: &ButcherTableau,
    problem: &IVProblem,
    grid_family: G,
    n_values: &[usize],
) -> Result<ConvergenceStudy>
where
    G: Fn(usize) -> Result<TimeGrid>,
{
    if n_values.len() < 4 {
        return Err(Error::InvalidArgument(
            "estimate_order needs at least 4 step counts".into(),
        ));
    }
    let mut deltas = Vec::with_capacity(n_values.len());
    let mut errors = Vec::with_capacity(n_values.len());
    let mut im_norms = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let grid = grid_family(n)?;
        let gf = problem.integrate(tab, &grid)?;
        deltas.push(grid.max_step());
        errors.push(terminal_error(&gf, problem)?);
        im_norms.push(gf.terminal().im_norm());
    }
    ConvergenceStudy::from_errors(n_values.to_vec(), deltas, errors, im_norms)
}

/// Both sides of the leading-error-term limit for ẋ = A x.
///
/// Returns (lhs, rhs) with lhs = ε_n/δ_n^p from an actual run and
///
/// ```text
/// rhs = (Σ_j τ_j^{p+1} / δ_n^p) · e^{(t−t0)A} [A^{p+1}/(p+1)! − C] x0,
/// ```
///
/// where C = p_{p+1}·A^{p+1} picks the (p+1)-st stability-polynomial
/// coefficient (zero when the method has s = p stages, so the bracket
/// reduces to the local truncation constant). On superconvergent paths
/// Σ τ^{p+1} vanishes and rhs is the zero vector; the caller compares
/// the two sides.
pub fn main_theorem_ratio(
    tab: &ButcherTableau,
    a: &CMatrix,
    x0: &CVector,
    path: &PathSpec,
    n: usize,
) -> Result<(CVector, CVector)> {
    if !a.is_square() || a.rows() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "main_theorem_ratio",
            expected: format!("square A matching x0 (dim {})", x0.len()),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let p = tab.order();
    let grid = discretize(path, n)?;
    let (t0, t_end) = (grid.t0(), grid.t_end());
    let delta = grid.max_step();
    let inv_delta_p = Complex64::new(delta.powi(-(p as i32)), 0.0);

    let gf = crate::rk::integrate(tab, &|_t, x| a.mul_vec(x), &grid, x0)?;
    let exact = exact_linear_flow(a, t0, t_end, x0)?;
    let lhs = exact.sub(gf.terminal())?.scale(inv_delta_p);

    let tau_power_sum: Complex64 = grid.steps().iter().map(|tau| tau.powu(p + 1)).sum();
    let p_next = stability_polynomial(tab)
        .get(p as usize + 1)
        .copied()
        .unwrap_or(Complex64::ZERO);
    let factor = Complex64::new(1.0 / factorial(p + 1), 0.0) - p_next;

    let mut a_pow = CMatrix::identity(a.rows());
    for _ in 0..=p {
        a_pow = a_pow.mul(a)?;
    }
    let flow = mat_exp(&a.scale(t_end - t0))?;
    let rhs = flow
        .mul_vec(&a_pow.mul_vec(x0)?)?
        .scale(factor * tau_power_sum * inv_delta_p);
    Ok((lhs, rhs))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Imaginary-part diagnostics: (terminal im norm, max im norm over all
/// grid values).
pub fn reality_report(gf: &GridFunction) -> (f64, f64) {
    let terminal = gf.terminal().im_norm();
    let max_node = gf
        .values()
        .iter()
        .map(|v| v.im_norm())
        .fold(0.0f64, f64::max);
    (terminal, max_node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_exp;
    use crate::rk::integrate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exp_terminal_error(path: &PathSpec, n: usize) -> (f64, GridFunction) {
        let problem = make_exp();
        let grid = discretize(path, n).unwrap();
        let gf = problem.integrate(&ButcherTableau::euler(), &grid).unwrap();
        (terminal_error(&gf, &problem).unwrap(), gf)
    }

    #[test]
    fn euler_errors_match_the_motivating_example() {
        // (1 + 1/10)^10 on the real segment vs the half-circle detour.
        let (real_err, _) = exp_terminal_error(&PathSpec::real(Complex64::ZERO, Complex64::ONE), 10);
        assert!((real_err - 0.124539368359045).abs() < 1e-12);
        let (circle_err, _) =
            exp_terminal_error(&PathSpec::circle(Complex64::ZERO, Complex64::ONE, 1), 10);
        assert!((circle_err - 0.007558960150318).abs() < 1e-12);
        assert!(real_err / circle_err > 16.0);
    }

    #[test]
    fn exact_trajectory_has_zero_error() {
        let problem = make_exp();
        let grid = discretize(&PathSpec::real(Complex64::ZERO, Complex64::ONE), 4).unwrap();
        let values: Vec<CVector> = grid
            .nodes()
            .iter()
            .map(|t| problem.exact_flow(*t).unwrap())
            .collect();
        let gf = GridFunction::new(grid, values).unwrap();
        assert_eq!(terminal_error(&gf, &problem).unwrap(), 0.0);
    }

    #[test]
    fn synthetic_quadratic_errors_fit_slope_two() {
        let ns = vec![10usize, 20, 40, 80];
        let errors: Vec<f64> = ns.iter().map(|n| 3.0 / (*n as f64).powi(2)).collect();
        let deltas: Vec<f64> = ns.iter().map(|n| 1.0 / *n as f64).collect();
        let study =
            ConvergenceStudy::from_errors(ns, deltas, errors, vec![0.0; 4]).unwrap();
        assert!((study.fitted_slope() - 2.0).abs() < 1e-12);
        assert_eq!(study.fit_window(), (0, 4));
    }

    #[test]
    fn fit_window_trims_floor_and_preasymptotic_head() {
        // Head rises, tail sits at rounding floor; the fit sees the
        // clean middle.
        let ns = vec![2usize, 4, 8, 16, 32, 64];
        let errors = vec![0.1, 0.3, 8e-2, 1e-2, 5e-14, 2e-14];
        let deltas: Vec<f64> = ns.iter().map(|n| 1.0 / *n as f64).collect();
        let study =
            ConvergenceStudy::from_errors(ns, deltas, errors, vec![0.0; 6]).unwrap();
        assert_eq!(study.fit_window(), (1, 4));

        let all_floor = ConvergenceStudy::from_errors(
            vec![2, 4, 8, 16],
            vec![0.5, 0.25, 0.125, 0.0625],
            vec![1e-14; 4],
            vec![0.0; 4],
        );
        assert!(matches!(all_floor.unwrap_err(), Error::IndeterminateOrder));
    }

    #[test]
    fn estimate_order_on_the_exponential() {
        let problem = make_exp();
        let ns: Vec<usize> = (0..6).map(|k| 10 << k).collect();
        let real = estimate_order(
            &ButcherTableau::euler(),
            &problem,
            |n| discretize(&PathSpec::real(Complex64::ZERO, Complex64::ONE), n),
            &ns,
        )
        .unwrap();
        assert!(
            real.fitted_slope() > 0.9 && real.fitted_slope() < 1.1,
            "slope = {}",
            real.fitted_slope()
        );

        let circle = estimate_order(
            &ButcherTableau::euler(),
            &problem,
            |n| discretize(&PathSpec::circle(Complex64::ZERO, Complex64::ONE, 1), n),
            &ns,
        )
        .unwrap();
        assert!(
            circle.fitted_slope() > 1.9 && circle.fitted_slope() < 2.1,
            "slope = {}",
            circle.fitted_slope()
        );

        assert!(matches!(
            estimate_order(
                &ButcherTableau::euler(),
                &problem,
                |n| discretize(&PathSpec::real(Complex64::ZERO, Complex64::ONE), n),
                &ns[..3],
            )
            .unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn theorem_ratio_on_the_real_segment() {
        // Euler on ẋ = x over [0,1]: all τ = 1/n, so the right side is
        // exactly e/2 for every n, and the left side approaches it.
        let a = CMatrix::from_real(1, &[1.0]).unwrap();
        let x0 = CVector::from_real(&[1.0]).unwrap();
        let path = PathSpec::real(Complex64::ZERO, Complex64::ONE);
        let (lhs, rhs) =
            main_theorem_ratio(&ButcherTableau::euler(), &a, &x0, &path, 512).unwrap();
        let half_e = std::f64::consts::E / 2.0;
        assert!((rhs[0] - c(half_e, 0.0)).norm() < 1e-12);
        let rel = (lhs[0] - rhs[0]).norm() / rhs[0].norm();
        assert!(rel < 0.01, "rel = {rel:.4}");
    }

    #[test]
    fn theorem_ratio_vanishes_on_superconvergent_paths() {
        let a = CMatrix::from_real(1, &[1.0]).unwrap();
        let x0 = CVector::from_real(&[1.0]).unwrap();
        let path = PathSpec::circle(Complex64::ZERO, Complex64::ONE, 1);
        let (lhs, rhs) =
            main_theorem_ratio(&ButcherTableau::euler(), &a, &x0, &path, 128).unwrap();
        assert!(rhs.norm() < 1e-12, "rhs = {:.3e}", rhs.norm());
        // lhs = ε/δ still decays by superconvergence; at n = 128 it is
        // already far below the generic e/2 scale.
        assert!(lhs.norm() < 0.05, "lhs = {:.3e}", lhs.norm());
    }

    #[test]
    fn theorem_ratio_uses_the_stability_coefficient() {
        // RK4 has s = p = 4: no 5th stability coefficient, C = 0, and
        // the bracket is A⁵/5!. On the unit segment Στ⁵/δ⁴ = 1.
        let a = CMatrix::from_real(1, &[1.0]).unwrap();
        let x0 = CVector::from_real(&[1.0]).unwrap();
        let path = PathSpec::real(Complex64::ZERO, Complex64::ONE);
        let (_, rhs) = main_theorem_ratio(&ButcherTableau::rk4(), &a, &x0, &path, 64).unwrap();
        let expected = std::f64::consts::E / 120.0;
        assert!((rhs[0] - c(expected, 0.0)).norm() < 1e-12);

        // Dopri5 has s = 7 > p = 5: C picks p₆ = 1/600 and the bracket
        // becomes 1/720 − 1/600 < 0.
        let (_, rhs) = main_theorem_ratio(&ButcherTableau::dopri5(), &a, &x0, &path, 64).unwrap();
        let expected = std::f64::consts::E * (1.0 / 720.0 - 1.0 / 600.0);
        assert!((rhs[0] - c(expected, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reality_report_on_the_half_circle() {
        let (_, gf) = exp_terminal_error(&PathSpec::circle(Complex64::ZERO, Complex64::ONE, 1), 10);
        let (terminal_im, max_im) = reality_report(&gf);
        assert!(terminal_im > 0.0 && terminal_im < 1e-8);
        assert!(max_im > 0.8 && max_im < 0.9, "max_im = {max_im}");

        let (_, gf) = exp_terminal_error(&PathSpec::real(Complex64::ZERO, Complex64::ONE), 10);
        assert_eq!(reality_report(&gf), (0.0, 0.0));
    }

    #[test]
    fn study_csv_shape() {
        let study = ConvergenceStudy::from_errors(
            vec![10, 20, 40, 80],
            vec![0.1, 0.05, 0.025, 0.0125],
            vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            vec![0.0; 4],
        )
        .unwrap();
        let mut buf = Vec::new();
        study.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "n,delta_n,error,im_norm");
        // 17 significant digits expose the f64 value exactly: 0.1 is
        // not representable and prints its true neighbor.
        assert_eq!(
            lines[1],
            "10,1.0000000000000001e-1,1.0000000000000000e-2,0.0000000000000000e0"
        );
    }

    #[test]
    fn terminal_error_needs_a_reference() {
        let problem = crate::problems::make_arenstorf();
        let grid = discretize(&PathSpec::real(Complex64::ZERO, Complex64::ONE), 4).unwrap();
        let gf = integrate(
            &ButcherTableau::rk4(),
            &|_t, x| crate::problems::arenstorf_rhs(x),
            &grid,
            problem.x0(),
        )
        .unwrap();
        assert!(matches!(
            terminal_error(&gf, &problem).unwrap_err(),
            Error::NoReference
        ));
    }
}
