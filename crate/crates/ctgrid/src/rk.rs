//! Explicit Runge-Kutta stepping with complex coefficients.
//!
//! A [`ButcherTableau`] holds the coefficients (𝔄, 𝔟, 𝔠) of an explicit
//! method; nothing restricts them to ℝ. One step of size τ ∈ ℂ from
//! (t, x) forms the usual stages
//!
//! ```text
//! k_i = f(t + c_i τ, x + τ Σ_{j<i} A_{ij} k_j),    x' = x + τ Σ_i b_i k_i,
//! ```
//!
//! and [`integrate`] chains steps over a [`TimeGrid`]. On a linear system
//! ẋ = Ax one step acts as the polynomial P(τA), where P is the stability
//! polynomial produced by the recursion
//!
//! ```text
//! P_1 = 1,   P_i = 1 + z Σ_{j<i} A_{ij} P_j,   P = 1 + z Σ_i b_i P_i.
//! ```
//!
//! [`stability_polynomial`] runs that recursion exactly over rationals
//! whenever every tableau entry is recognizably rational (all built-ins
//! are), so identities like p_k = 1/k! for k up to the declared order
//! hold without rounding. [`linear_step_matrix`] materializes P(τA).
//!
//! Built-ins: `euler` (p=1), `heun` (p=2), `rk4` (p=4), and a fixed-step
//! `dopri5` (p=5) used as the reference integrator for the Arenstorf
//! benchmark.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::TimeGrid;
use crate::linalg::{mat_poly_eval, CMatrix, CVector};

/// Rational reconstruction gives up beyond this denominator. Published
/// tableau fractions stay far below it, while continued-fraction
/// convergents of a typical irrational need denominators near 1e8 before
/// they round to the same f64, so the gap cleanly separates the two.
const MAX_DENOMINATOR: f64 = 1e6;

/// Coefficients of an explicit Runge-Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    s: usize,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    order: u32,
    symmetric: bool,
}

impl ButcherTableau {
    /// Validates shape (s×s strictly lower triangular A), 1 ≤ order ≤ s,
    /// and finiteness.
    pub fn new(
        a: Vec<Vec<Complex64>>,
        b: Vec<Complex64>,
        c: Vec<Complex64>,
        order: u32,
        symmetric: bool,
    ) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(Error::InvalidArgument("tableau needs at least one stage".into()));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) || c.len() != s {
            return Err(Error::DimensionMismatch {
                context: "ButcherTableau::new",
                expected: format!("A {s}x{s}, b and c of length {s}"),
                found: format!("A {}x?, c of length {}", a.len(), c.len()),
            });
        }
        for (i, row) in a.iter().enumerate() {
            for (j, &entry) in row.iter().enumerate() {
                if j >= i && entry != Complex64::ZERO {
                    return Err(Error::InvalidArgument(format!(
                        "explicit tableau requires A[{i}][{j}] = 0 on and above the diagonal"
                    )));
                }
            }
        }
        if order < 1 || order as usize > s {
            return Err(Error::InvalidArgument(format!(
                "declared order {order} must satisfy 1 <= order <= s = {s}"
            )));
        }
        let flat: Vec<Complex64> = a.concat();
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !flat.iter().all(finite) || !b.iter().all(finite) || !c.iter().all(finite) {
            return Err(Error::NonFinite("ButcherTableau entries"));
        }
        Ok(Self {
            s,
            a: flat,
            b,
            c,
            order,
            symmetric,
        })
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    pub fn a(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.s + j]
    }

    pub fn b(&self, i: usize) -> Complex64 {
        self.b[i]
    }

    pub fn c(&self, i: usize) -> Complex64 {
        self.c[i]
    }

    /// Declared convergence order p.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Whether the method is symmetric (doubles the gain of the
    /// composition iteration).
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_real(&self) -> bool {
        self.a.iter().chain(&self.b).chain(&self.c).all(|z| z.im == 0.0)
    }

    /// Explicit Euler, order 1.
    pub fn euler() -> Self {
        from_real_fractions(&[&[]], &[(1, 1)], &[(0, 1)], 1)
    }

    /// Heun's two-stage method, order 2.
    pub fn heun() -> Self {
        from_real_fractions(&[&[], &[(1, 1)]], &[(1, 2), (1, 2)], &[(0, 1), (1, 1)], 2)
    }

    /// Classical four-stage Runge-Kutta, order 4.
    pub fn rk4() -> Self {
        from_real_fractions(
            &[&[], &[(1, 2)], &[(0, 1), (1, 2)], &[(0, 1), (0, 1), (1, 1)]],
            &[(1, 6), (1, 3), (1, 3), (1, 6)],
            &[(0, 1), (1, 2), (1, 2), (1, 1)],
            4,
        )
    }

    /// Dormand-Prince 5(4) advancing on the fifth-order weights; used
    /// here as a fixed-step integrator.
    pub fn dopri5() -> Self {
        from_real_fractions(
            &[
                &[],
                &[(1, 5)],
                &[(3, 40), (9, 40)],
                &[(44, 45), (-56, 15), (32, 9)],
                &[(19372, 6561), (-25360, 2187), (64448, 6561), (-212, 729)],
                &[
                    (9017, 3168),
                    (-355, 33),
                    (46732, 5247),
                    (49, 176),
                    (-5103, 18656),
                ],
                &[
                    (35, 384),
                    (0, 1),
                    (500, 1113),
                    (125, 192),
                    (-2187, 6784),
                    (11, 84),
                ],
            ],
            &[
                (35, 384),
                (0, 1),
                (500, 1113),
                (125, 192),
                (-2187, 6784),
                (11, 84),
                (0, 1),
            ],
            &[(0, 1), (1, 5), (3, 10), (4, 5), (8, 9), (1, 1), (1, 1)],
            5,
        )
    }

    /// Built-in lookup by name: euler, heun, rk4, dopri5.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "euler" => Some(Self::euler()),
            "heun" => Some(Self::heun()),
            "rk4" => Some(Self::rk4()),
            "dopri5" => Some(Self::dopri5()),
            _ => None,
        }
    }

    /// Serializes as `{ s, A (row-major), b, c, order, symmetric }` with
    /// complex numbers as `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let doc = TableauJson {
            s: self.s,
            a: self.a.iter().map(|z| [z.re, z.im]).collect(),
            b: self.b.iter().map(|z| [z.re, z.im]).collect(),
            c: self.c.iter().map(|z| [z.re, z.im]).collect(),
            order: self.order,
            symmetric: self.symmetric,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableauJson = serde_json::from_str(text)?;
        let s = doc.s;
        if doc.a.len() != s * s {
            return Err(Error::Format {
                what: "tableau json",
                detail: format!("A has {} entries, expected s*s = {}", doc.a.len(), s * s),
            });
        }
        let pair = |p: &[f64; 2]| Complex64::new(p[0], p[1]);
        let a: Vec<Vec<Complex64>> = (0..s)
            .map(|i| doc.a[i * s..(i + 1) * s].iter().map(pair).collect())
            .collect();
        Self::new(
            a,
            doc.b.iter().map(pair).collect(),
            doc.c.iter().map(pair).collect(),
            doc.order,
            doc.symmetric,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct TableauJson {
    s: usize,
    #[serde(rename = "A")]
    a: Vec<[f64; 2]>,
    b: Vec<[f64; 2]>,
    c: Vec<[f64; 2]>,
    order: u32,
    symmetric: bool,
}

/// Tableau from integer fractions; rows list only the strictly lower
/// part of A.
fn from_real_fractions(
    a_lower: &[&[(i64, i64)]],
    b: &[(i64, i64)],
    c: &[(i64, i64)],
    order: u32,
) -> ButcherTableau {
    let s = b.len();
    let q = |(n, d): (i64, i64)| Complex64::new(n as f64 / d as f64, 0.0);
    let a: Vec<Vec<Complex64>> = (0..s)
        .map(|i| {
            let mut row = vec![Complex64::ZERO; s];
            for (j, &frac) in a_lower[i].iter().enumerate() {
                row[j] = q(frac);
            }
            row
        })
        .collect();
    ButcherTableau::new(
        a,
        b.iter().copied().map(q).collect(),
        c.iter().copied().map(q).collect(),
        order,
        false,
    )
    .expect("built-in tableau is valid")
}

/// Values of a grid function x_Δ: one state per node, x_Δ(t_0) = x0.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<CVector>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<CVector>) -> Result<Self> {
        if values.len() != grid.nodes().len() {
            return Err(Error::DimensionMismatch {
                context: "GridFunction::new",
                expected: format!("{} values", grid.nodes().len()),
                found: format!("{}", values.len()),
            });
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "GridFunction::new",
                expected: format!("uniform state dimension {dim}"),
                found: "mixed dimensions".into(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Terminal value Ψ^Δ x_0 = x_Δ(t_n).
    pub fn terminal(&self) -> &CVector {
        self.values.last().unwrap()
    }
}

/// One explicit RK step of size τ from (t, x).
pub fn rk_step<F>(
    tab: &ButcherTableau,
    f: &F,
    t: Complex64,
    tau: Complex64,
    x: &CVector,
) -> Result<CVector>
where
    F: Fn(Complex64, &CVector) -> Result<CVector>,
{
    let s = tab.stages();
    let mut stages: Vec<CVector> = Vec::with_capacity(s);
    for i in 0..s {
        let mut xi = x.clone();
        for (j, kj) in stages.iter().enumerate() {
            let aij = tab.a(i, j);
            if aij != Complex64::ZERO {
                xi = xi.axpy(tau * aij, kj)?;
            }
        }
        let ki = f(t + tab.c(i) * tau, &xi)?;
        if ki.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "rk_step stage value",
                expected: format!("{}", x.len()),
                found: format!("{}", ki.len()),
            });
        }
        stages.push(ki);
    }
    let mut out = x.clone();
    for (i, ki) in stages.iter().enumerate() {
        let bi = tab.b(i);
        if bi != Complex64::ZERO {
            out = out.axpy(tau * bi, ki)?;
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("rk_step result"));
    }
    Ok(out)
}

/// Runs the one-step recursion x_Δ(t_{j+1}) = Ψ^{t_{j+1}, t_j} x_Δ(t_j)
/// over the whole grid. Per-step failures abort with the step index.
pub fn integrate<F>(tab: &ButcherTableau, f: &F, grid: &TimeGrid, x0: &CVector) -> Result<GridFunction>
where
    F: Fn(Complex64, &CVector) -> Result<CVector>,
{
    let mut values = Vec::with_capacity(grid.nodes().len());
    values.push(x0.clone());
    for (j, tau) in grid.steps().iter().enumerate() {
        let next = rk_step(tab, f, grid.nodes()[j], *tau, values.last().unwrap()).map_err(
            |e| Error::StepFailed {
                index: j,
                source: Box::new(e),
            },
        )?;
        values.push(next);
    }
    GridFunction::new(grid.clone(), values)
}

/// Coefficients p_0..p_s of the stability polynomial, exact over
/// rationals when every tableau entry is recognizably rational, floating
/// otherwise. Degrees below s that do not occur carry a zero.
pub fn stability_polynomial(tab: &ButcherTableau) -> Vec<Complex64> {
    if let Some(exact) = stability_polynomial_exact(tab) {
        return exact
            .into_iter()
            .map(|(re, im)| {
                Complex64::new(re.to_f64().unwrap_or(f64::NAN), im.to_f64().unwrap_or(f64::NAN))
            })
            .collect();
    }
    stability_float(tab)
}

/// Exact rational coefficients (re, im), or `None` when some entry does
/// not reconstruct as a small fraction.
pub fn stability_polynomial_exact(tab: &ButcherTableau) -> Option<Vec<(BigRational, BigRational)>> {
    let s = tab.stages();
    let to_qc = |z: Complex64| -> Option<Qc> {
        Some(Qc {
            re: rational_from_f64(z.re)?,
            im: rational_from_f64(z.im)?,
        })
    };
    let mut a = Vec::with_capacity(s * s);
    for i in 0..s {
        for j in 0..s {
            a.push(to_qc(tab.a(i, j))?);
        }
    }
    let b: Option<Vec<Qc>> = (0..s).map(|i| to_qc(tab.b(i))).collect();
    let b = b?;

    // P_i as coefficient vectors in z.
    let mut polys: Vec<Vec<Qc>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut sum = vec![Qc::zero(); i.max(1)];
        for (j, pj) in polys.iter().enumerate() {
            let aij = &a[i * s + j];
            if aij.is_zero() {
                continue;
            }
            for (deg, coeff) in pj.iter().enumerate() {
                sum[deg] = sum[deg].add(&coeff.mul(aij));
            }
        }
        // P_i = 1 + z * sum
        let mut pi = Vec::with_capacity(i + 1);
        pi.push(Qc::one());
        for coeff in sum.into_iter().take(i) {
            pi.push(coeff);
        }
        polys.push(pi);
    }

    let mut total = vec![Qc::zero(); s];
    for (i, pi) in polys.iter().enumerate() {
        if b[i].is_zero() {
            continue;
        }
        for (deg, coeff) in pi.iter().enumerate() {
            total[deg] = total[deg].add(&coeff.mul(&b[i]));
        }
    }
    let mut out = Vec::with_capacity(s + 1);
    out.push(Qc::one());
    out.extend(total);
    Some(out.into_iter().map(|qc| (qc.re, qc.im)).collect())
}

fn stability_float(tab: &ButcherTableau) -> Vec<Complex64> {
    let s = tab.stages();
    let mut polys: Vec<Vec<Complex64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut sum = vec![Complex64::ZERO; i.max(1)];
        for (j, pj) in polys.iter().enumerate() {
            let aij = tab.a(i, j);
            if aij == Complex64::ZERO {
                continue;
            }
            for (deg, coeff) in pj.iter().enumerate() {
                sum[deg] += coeff * aij;
            }
        }
        let mut pi = Vec::with_capacity(i + 1);
        pi.push(Complex64::ONE);
        pi.extend(sum.into_iter().take(i));
        polys.push(pi);
    }
    let mut out = vec![Complex64::ZERO; s + 1];
    out[0] = Complex64::ONE;
    for (i, pi) in polys.iter().enumerate() {
        let bi = tab.b(i);
        if bi == Complex64::ZERO {
            continue;
        }
        for (deg, coeff) in pi.iter().enumerate() {
            out[deg + 1] += coeff * bi;
        }
    }
    out
}

/// The matrix P(τA) that advances a linear system by one step:
/// rk_step on f(t, x) = A·x equals multiplication by this matrix.
pub fn linear_step_matrix(tab: &ButcherTableau, a: &CMatrix, tau: Complex64) -> Result<CMatrix> {
    mat_poly_eval(&stability_polynomial(tab), &a.scale(tau))
}

/// Complex number with rational parts; just enough arithmetic for the
/// stability recursion.
#[derive(Clone)]
struct Qc {
    re: BigRational,
    im: BigRational,
}

impl Qc {
    fn zero() -> Self {
        Self {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    fn one() -> Self {
        Self {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add(&self, o: &Self) -> Self {
        Self {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn mul(&self, o: &Self) -> Self {
        Self {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

/// Minimal-denominator rational that rounds to exactly `v`, via
/// continued fractions; `None` when no denominator ≤ 1e13 works.
fn rational_from_f64(v: f64) -> Option<BigRational> {
    if v == 0.0 {
        return Some(BigRational::zero());
    }
    if !v.is_finite() || v.abs() >= 9e15 {
        return None;
    }
    let target = v;
    let mut x = v.abs();
    let sign = BigInt::from(if v < 0.0 { -1 } else { 1 });

    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p_cur, mut q_cur) = (BigInt::from(x.floor() as i64), BigInt::one());
    for _ in 0..64 {
        let cand = BigRational::new(&sign * &p_cur, q_cur.clone());
        if cand.to_f64() == Some(target) {
            return Some(cand);
        }
        let frac = x - x.floor();
        if frac <= 0.0 {
            return None;
        }
        x = 1.0 / frac;
        if !x.is_finite() || x >= 9e15 {
            return None;
        }
        let a = BigInt::from(x.floor() as i64);
        let p_next = &a * &p_cur + &p_prev;
        let q_next = &a * &q_cur + &q_prev;
        p_prev = p_cur;
        q_prev = q_cur;
        p_cur = p_next;
        q_cur = q_next;
        if q_cur.to_f64().unwrap_or(f64::INFINITY).abs() > MAX_DENOMINATOR {
            return None;
        }
    }
    None
}
