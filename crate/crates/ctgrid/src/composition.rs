//! Complex-coefficient composition methods.
//!
//! A macro step of size h chains k micro steps of sizes σ_1 h, …, σ_k h:
//!
//! ```text
//! Υ^h = Ψ^{σ_k h} ∘ … ∘ Ψ^{σ_1 h}.
//! ```
//!
//! If the base method Ψ has order p, the macro step gains (at least) one
//! order exactly when
//!
//! ```text
//! σ_1 + … + σ_k = 1    and    σ_1^{p+1} + … + σ_k^{p+1} = 0,
//! ```
//!
//! which no real coefficients satisfy for odd p. The steps of the
//! normalized superconvergent grid on the circle segment γ^p from 0 to 1
//! solve both conditions ([`schedule_from_path`]); for p = 1, k = 2 they
//! are the familiar pair (1+i)/2, (1−i)/2.
//!
//! Iterating the construction raises the order by a gain g per level
//! ([`iterate_method`]): level r+1 runs level r on each step of the
//! schedule for the order achieved so far. Flattening the recursion
//! turns one macro step into the fractal micro grid of
//! [`crate::grids::fractal_grid`] with k^r steps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{circle_sigma, fractal_grid, TimeGrid};
use crate::linalg::CVector;
use crate::rk::{rk_step, ButcherTableau};

/// Residuals of both order conditions must stay below this for a
/// schedule to be well formed.
const RESIDUAL_TOL: f64 = 1e-12;

/// Micro-step coefficients σ_1..σ_k with their base order p and gain g.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSchedule {
    sigma: Vec<Complex64>,
    base_order: u32,
    gain: u32,
}

impl CompositionSchedule {
    /// Validates k ≥ 2, finiteness, and the order conditions
    /// Σσ = 1, Σσ^{p+1} = 0 (residuals ≤ 1e-12).
    pub fn new(sigma: Vec<Complex64>, base_order: u32, gain: u32) -> Result<Self> {
        if sigma.len() < 2 {
            return Err(Error::InvalidArgument(
                "a composition schedule needs k >= 2 coefficients".into(),
            ));
        }
        if base_order < 1 || gain < 1 {
            return Err(Error::InvalidArgument(
                "composition schedule needs base_order >= 1 and gain >= 1".into(),
            ));
        }
        if sigma.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("CompositionSchedule coefficients"));
        }
        let (r1, r2) = order_condition_residuals(&sigma, base_order);
        if r1 > RESIDUAL_TOL || r2 > RESIDUAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "order conditions violated: |Σσ - 1| = {r1:.3e}, |Σσ^{}| = {r2:.3e}",
                base_order + 1
            )));
        }
        Ok(Self {
            sigma,
            base_order,
            gain,
        })
    }

    pub fn sigma(&self) -> &[Complex64] {
        &self.sigma
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    pub fn base_order(&self) -> u32 {
        self.base_order
    }

    /// Order gained per iteration level (1 in general, 2 for symmetric
    /// base methods).
    pub fn gain(&self) -> u32 {
        self.gain
    }

    pub fn with_gain(mut self, gain: u32) -> Result<Self> {
        if gain < 1 {
            return Err(Error::InvalidArgument("gain must be >= 1".into()));
        }
        self.gain = gain;
        Ok(self)
    }

    /// Residuals (|Σσ − 1|, |Σσ^{p+1}|) of this schedule.
    pub fn residuals(&self) -> (f64, f64) {
        order_condition_residuals(&self.sigma, self.base_order)
    }

    /// Serializes as `{ p, k, g, sigma }` with σ entries as `[re, im]`.
    pub fn to_json(&self) -> Result<String> {
        let doc = ScheduleJson {
            p: self.base_order,
            k: self.k(),
            g: self.gain,
            sigma: self.sigma.iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScheduleJson = serde_json::from_str(text)?;
        if doc.sigma.len() != doc.k {
            return Err(Error::Format {
                what: "schedule json",
                detail: format!("sigma has {} entries, expected k = {}", doc.sigma.len(), doc.k),
            });
        }
        Self::new(
            doc.sigma
                .iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
            doc.p,
            doc.g,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ScheduleJson {
    p: u32,
    k: usize,
    g: u32,
    sigma: Vec<[f64; 2]>,
}

/// Residuals (|Σσ − 1|, |Σσ^{p+1}|) of candidate coefficients.
pub fn order_condition_residuals(sigma: &[Complex64], p: u32) -> (f64, f64) {
    let sum: Complex64 = sigma.iter().sum();
    let power: Complex64 = sigma.iter().map(|z| z.powu(p + 1)).sum();
    ((sum - Complex64::ONE).norm(), power.norm())
}

/// Schedule whose coefficients are the k steps of the normalized
/// superconvergent grid Δ_k on γ^p from 0 to 1. Both order conditions
/// hold by construction: the endpoints telescope to 1 and the (p+1)-th
/// powers run over all k-th roots of unity.
pub fn schedule_from_path(p: u32, k: usize) -> Result<CompositionSchedule> {
    if k < 2 {
        return Err(Error::InvalidArgument(
            "schedule_from_path needs k >= 2".into(),
        ));
    }
    CompositionSchedule::new(circle_sigma(p, k)?, p, 1)
}

/// One macro step Υ^h from (t, x): k micro RK steps of sizes σ_l h, each
/// starting at t + h·Σ_{m<l} σ_m. Micro-step failures carry their index.
pub fn compose_step<F>(
    tab: &ButcherTableau,
    sched: &CompositionSchedule,
    f: &F,
    t: Complex64,
    h: Complex64,
    x: &CVector,
) -> Result<CVector>
where
    F: Fn(Complex64, &CVector) -> Result<CVector>,
{
    let mut cur = x.clone();
    let mut t_cur = t;
    for (l, sigma) in sched.sigma().iter().enumerate() {
        let tau = sigma * h;
        cur = rk_step(tab, f, t_cur, tau, &cur).map_err(|e| Error::MicroStepFailed {
            micro: l,
            source: Box::new(e),
        })?;
        t_cur += tau;
    }
    Ok(cur)
}

/// The order-raising iteration Υ_r for a base tableau: level 0 is the
/// plain method, level r+1 composes level r along the schedule for the
/// order achieved so far.
#[derive(Debug, Clone)]
pub struct IteratedMethod {
    base_order: u32,
    gain: u32,
    k: usize,
    r: u32,
}

impl IteratedMethod {
    /// Flattened micro grid of one macro step from t0 of size h; feeding
    /// it to [`crate::rk::integrate`] realizes Υ^h_r x0 = Ψ^Γ x0.
    pub fn grid(&self, t0: Complex64, h: Complex64) -> Result<TimeGrid> {
        fractal_grid(self.base_order, self.gain, self.k, self.r, t0, h)
    }

    /// Order achieved on linear problems: p + r·g.
    pub fn achieved_order(&self) -> u32 {
        self.base_order + self.r * self.gain
    }

    pub fn micro_steps(&self) -> usize {
        self.k.pow(self.r)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> u32 {
        self.r
    }
}

/// Iterates a base method r times with gain taken from the tableau's
/// symmetric flag (2 if symmetric, else 1).
pub fn iterate_method(tab: &ButcherTableau, k: usize, r: u32) -> Result<IteratedMethod> {
    iterate_method_with_gain(tab, k, r, if tab.symmetric() { 2 } else { 1 })
}

/// Iteration with an explicit gain override for methods whose expansion
/// is known to drop more than one error term per level.
pub fn iterate_method_with_gain(
    tab: &ButcherTableau,
    k: usize,
    r: u32,
    gain: u32,
) -> Result<IteratedMethod> {
    if k < 2 {
        return Err(Error::InvalidArgument("iterate_method needs k >= 2".into()));
    }
    if gain < 1 {
        return Err(Error::InvalidArgument("gain must be >= 1".into()));
    }
    Ok(IteratedMethod {
        base_order: tab.order(),
        gain,
        k,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::symmetric_witness;
    use crate::rk::integrate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn schedule_p1_k2_is_the_conjugate_pair() {
        let sched = schedule_from_path(1, 2).unwrap();
        assert_eq!(sched.k(), 2);
        assert!((sched.sigma()[0] - c(0.5, 0.5)).norm() < 1e-15);
        assert!((sched.sigma()[1] - c(0.5, -0.5)).norm() < 1e-15);
        let (r1, r2) = sched.residuals();
        assert!(r1 <= 1e-15);
        assert!(r2 <= 1e-15);
    }

    #[test]
    fn schedule_p2_k3_power_sum_vanishes() {
        let sched = schedule_from_path(2, 3).unwrap();
        let (_, r2) = sched.residuals();
        assert!(r2 <= 1e-14);
    }

    #[test]
    fn residuals_of_candidate_coefficients() {
        // Real halves satisfy the sum condition but not the power one:
        // r2 = |0.5^2 + 0.5^2| = 0.5.
        let (r1, r2) = order_condition_residuals(&[c(0.5, 0.0), c(0.5, 0.0)], 1);
        assert!(r1 <= 1e-16);
        assert!((r2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_schedules() {
        // k = 1.
        assert!(CompositionSchedule::new(vec![Complex64::ONE], 1, 1).is_err());
        // Violated power condition.
        assert!(CompositionSchedule::new(vec![c(0.5, 0.0), c(0.5, 0.0)], 1, 1).is_err());
        // Violated sum condition.
        assert!(CompositionSchedule::new(vec![c(0.6, 0.5), c(0.6, -0.5)], 1, 1).is_err());
    }

    #[test]
    fn compose_step_scalar_expansion() {
        // Euler micro steps multiply out to 1 + h + h²σ₁σ₂ with σ₁σ₂ = 1/2.
        let sched = schedule_from_path(1, 2).unwrap();
        let tab = ButcherTableau::euler();
        let f = |_t: Complex64, v: &CVector| Ok(v.clone());
        let x = CVector::from_real(&[1.0]).unwrap();
        let y = compose_step(&tab, &sched, &f, Complex64::ZERO, c(0.1, 0.0), &x).unwrap();
        assert!((y[0] - c(1.105, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_step_zero_h_is_identity() {
        let sched = schedule_from_path(1, 2).unwrap();
        let f = |_t: Complex64, v: &CVector| Ok(v.clone());
        let x = CVector::from_real(&[2.0, 3.0]).unwrap();
        let y = compose_step(
            &ButcherTableau::heun(),
            &sched,
            &f,
            Complex64::ZERO,
            Complex64::ZERO,
            &x,
        )
        .unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn compose_step_equals_micro_grid_integration() {
        let sched = schedule_from_path(2, 4).unwrap();
        let tab = ButcherTableau::heun();
        let f = |_t: Complex64, v: &CVector| Ok(v.scale(c(0.7, -0.3)));
        let x = CVector::from_real(&[1.0, -1.0]).unwrap();
        let t0 = c(0.3, 0.0);
        let h = c(0.25, 0.0);

        let direct = compose_step(&tab, &sched, &f, t0, h, &x).unwrap();

        let mut nodes = vec![t0];
        let mut cur = t0;
        for s in sched.sigma() {
            cur += s * h;
            nodes.push(cur);
        }
        let grid = TimeGrid::new(nodes).unwrap();
        let gf = integrate(&tab, &f, &grid, &x).unwrap();
        let diff = direct.sub(gf.terminal()).unwrap().norm();
        assert!(diff <= 1e-15 * direct.norm());
    }

    #[test]
    fn micro_step_failure_carries_index() {
        let sched = schedule_from_path(1, 2).unwrap();
        let f = |t: Complex64, v: &CVector| {
            if t.im > 0.01 {
                Err(Error::Singularity { body: 2 })
            } else {
                Ok(v.clone())
            }
        };
        let x = CVector::from_real(&[1.0]).unwrap();
        let err = compose_step(
            &ButcherTableau::euler(),
            &sched,
            &f,
            Complex64::ZERO,
            c(0.1, 0.0),
            &x,
        )
        .unwrap_err();
        match err {
            Error::MicroStepFailed { micro, source } => {
                assert_eq!(micro, 1);
                assert!(matches!(*source, Error::Singularity { body: 2 }));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn even_k_schedules_give_symmetric_micro_grids() {
        for k in [2usize, 4, 6] {
            let sched = schedule_from_path(1, k).unwrap();
            let h = c(0.5, 0.0);
            let mut nodes = vec![Complex64::ZERO];
            let mut cur = Complex64::ZERO;
            for s in sched.sigma() {
                cur += s * h;
                nodes.push(cur);
            }
            let grid = TimeGrid::new(nodes).unwrap();
            assert!(symmetric_witness(&grid, 1e-13).is_some(), "k = {k}");
        }
    }

    #[test]
    fn iterated_method_shape() {
        let it = iterate_method(&ButcherTableau::euler(), 2, 0).unwrap();
        assert_eq!(it.achieved_order(), 1);
        let g = it.grid(Complex64::ZERO, Complex64::ONE).unwrap();
        assert_eq!(g.nodes(), &[Complex64::ZERO, Complex64::ONE]);

        let it = iterate_method(&ButcherTableau::euler(), 2, 1).unwrap();
        assert_eq!(it.achieved_order(), 2);
        let g = it.grid(Complex64::ZERO, Complex64::ONE).unwrap();
        assert!((g.nodes()[1] - c(0.5, 0.5)).norm() < 1e-15);

        let it = iterate_method(&ButcherTableau::euler(), 2, 3).unwrap();
        assert_eq!(it.micro_steps(), 8);
        assert_eq!(it.grid(Complex64::ZERO, Complex64::ONE).unwrap().n(), 8);
    }

    #[test]
    fn gain_follows_symmetric_flag() {
        let symmetric_base = ButcherTableau::new(
            vec![vec![Complex64::ZERO]],
            vec![Complex64::ONE],
            vec![Complex64::ZERO],
            1,
            true,
        )
        .unwrap();
        let it = iterate_method(&symmetric_base, 2, 2).unwrap();
        assert_eq!(it.achieved_order(), 1 + 2 * 2);
        let overridden = iterate_method_with_gain(&ButcherTableau::euler(), 2, 2, 3).unwrap();
        assert_eq!(overridden.achieved_order(), 7);
    }

    #[test]
    fn schedule_json_roundtrip() {
        let sched = schedule_from_path(3, 5).unwrap().with_gain(2).unwrap();
        let text = sched.to_json().unwrap();
        let back = CompositionSchedule::from_json(&text).unwrap();
        assert_eq!(sched, back);

        // k mismatch rejected.
        let bad = r#"{"p":1,"k":3,"g":1,"sigma":[[0.5,0.5],[0.5,-0.5]]}"#;
        assert!(CompositionSchedule::from_json(bad).is_err());
    }
}
