//! Complex time grids and the paths that generate them.
//!
//! A [`TimeGrid`] is an ordered chain of complex time nodes t_0, …, t_n
//! with nonzero steps τ_j = t_{j+1} − t_j. Grids come from four sources:
//!
//! | constructor              | shape                                         |
//! |--------------------------|-----------------------------------------------|
//! | [`discretize`]           | n+1 equidistant parameters on a [`PathSpec`]  |
//! | [`roots_of_unity_steps`] | steps along consecutive n(p+1)-th roots of 1  |
//! | [`fractal_grid`]         | recursively composed micro schedules          |
//! | [`TimeGrid::new`]        | explicit node list                            |
//!
//! The circle segment γ^p between t0 and t,
//!
//! ```text
//! γ(x) = (t0 − t) / (2i·sin(π/(p+1))) · (e^{iπ(1−2x)/(p+1)} − cos(π/(p+1))) + (t0 + t)/2,
//! ```
//!
//! is the superconvergent path: its equidistant steps are consecutive
//! n(p+1)-th roots of unity up to one common factor, so Σ_j τ_j^{p+1} = 0
//! and an order-p method gains one order at the terminal node of a linear
//! problem. [`symmetric_witness`] detects grids whose step multiset is
//! closed under conjugation; on such grids real problems end real.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::csv_float;
use crate::error::{Error, Result};

/// Ordered complex time nodes with derived steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<Complex64>,
    steps: Vec<Complex64>,
}

impl TimeGrid {
    /// Validates that there are at least two finite nodes and that no
    /// step vanishes.
    pub fn new(nodes: Vec<Complex64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument(
                "a time grid needs at least two nodes".into(),
            ));
        }
        if nodes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("TimeGrid nodes"));
        }
        let steps: Vec<Complex64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if steps.iter().any(|tau| tau.norm() == 0.0) {
            return Err(Error::InvalidArgument(
                "consecutive grid nodes must be distinct".into(),
            ));
        }
        Ok(Self { nodes, steps })
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn steps(&self) -> &[Complex64] {
        &self.steps
    }

    /// Number of steps n (one less than the node count).
    pub fn n(&self) -> usize {
        self.steps.len()
    }

    pub fn t0(&self) -> Complex64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> Complex64 {
        *self.nodes.last().unwrap()
    }

    /// Maximum step size τ_Δ = max_j |τ_j|.
    pub fn max_step(&self) -> f64 {
        self.steps.iter().map(|tau| tau.norm()).fold(0.0, f64::max)
    }

    /// Elementwise conjugate grid.
    pub fn conj(&self) -> Self {
        Self {
            nodes: self.nodes.iter().map(|z| z.conj()).collect(),
            steps: self.steps.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Writes the grid as CSV with columns `index, re(t), im(t), re(tau),
    /// im(tau)`; the terminal node has no outgoing step and leaves the τ
    /// columns empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "re(t)", "im(t)", "re(tau)", "im(tau)"])?;
        for (j, node) in self.nodes.iter().enumerate() {
            let (tau_re, tau_im) = match self.steps.get(j) {
                Some(tau) => (csv_float(tau.re), csv_float(tau.im)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                j.to_string(),
                csv_float(node.re),
                csv_float(node.im),
                tau_re,
                tau_im,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A curve from t0 to t that [`discretize`] samples at equal parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    /// Straight segment t0 + x·(t − t0).
    RealSegment { t0: Complex64, t: Complex64 },
    /// Circle segment γ^p; `conjugated` mirrors the arc to the other side
    /// of the chord.
    CircleSegment {
        t0: Complex64,
        t: Complex64,
        p: u32,
        conjugated: bool,
    },
    /// Fixed node list; `discretize` only checks the step count.
    ExplicitNodes { nodes: Vec<Complex64> },
}

impl PathSpec {
    pub fn circle(t0: Complex64, t: Complex64, p: u32) -> Self {
        PathSpec::CircleSegment {
            t0,
            t,
            p,
            conjugated: false,
        }
    }

    pub fn real(t0: Complex64, t: Complex64) -> Self {
        PathSpec::RealSegment { t0, t }
    }

    /// Path endpoints (first and last node for explicit lists).
    pub fn endpoints(&self) -> Result<(Complex64, Complex64)> {
        match self {
            PathSpec::RealSegment { t0, t } | PathSpec::CircleSegment { t0, t, .. } => {
                Ok((*t0, *t))
            }
            PathSpec::ExplicitNodes { nodes } => {
                if nodes.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "explicit node list needs at least two nodes".into(),
                    ));
                }
                Ok((nodes[0], *nodes.last().unwrap()))
            }
        }
    }
}

fn check_path_args(t0: Complex64, t: Complex64, p: u32) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidArgument("circle segment needs p >= 1".into()));
    }
    if t == t0 {
        return Err(Error::DegeneratePath);
    }
    Ok(())
}

/// γ^p between t0 and t at parameter x ∈ [0, 1]; `sign` −1 gives the
/// conjugated arc (i replaced by −i, mirroring across the chord).
fn gamma_eval(t0: Complex64, t: Complex64, p: u32, x: f64, sign: f64) -> Complex64 {
    let theta = PI / (p + 1) as f64;
    let rot = Complex64::from_polar(1.0, sign * theta * (1.0 - 2.0 * x));
    let denom = Complex64::new(0.0, sign * 2.0 * theta.sin());
    (t0 - t) / denom * (rot - theta.cos()) + (t0 + t) * 0.5
}

/// Evaluates the superconvergent circle segment γ^p_{t0,t} at x ∈ [0, 1].
///
/// The arc spans an angle of 2π/(p+1) and interpolates its endpoints:
/// γ(0) = t0 and γ(1) = t up to 1e-14·|t − t0|.
pub fn gamma_segment(t0: Complex64, t: Complex64, p: u32, x: f64) -> Result<Complex64> {
    check_path_args(t0, t, p)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            range: "[0, 1]",
        });
    }
    Ok(gamma_eval(t0, t, p, x, 1.0))
}

/// Samples a path at the n+1 equidistant parameters j/n.
///
/// For circle segments all step moduli agree to 1e-12 relative: the arc
/// is traversed at constant speed, which is what aligns the steps with
/// consecutive roots of unity.
pub fn discretize(path: &PathSpec, n: usize) -> Result<TimeGrid> {
    if n < 1 {
        return Err(Error::InvalidArgument("discretize needs n >= 1".into()));
    }
    match path {
        PathSpec::RealSegment { t0, t } => {
            if t == t0 {
                return Err(Error::DegeneratePath);
            }
            let nodes = (0..=n)
                .map(|j| t0 + (j as f64 / n as f64) * (t - t0))
                .collect();
            TimeGrid::new(nodes)
        }
        PathSpec::CircleSegment {
            t0,
            t,
            p,
            conjugated,
        } => {
            check_path_args(*t0, *t, *p)?;
            let sign = if *conjugated { -1.0 } else { 1.0 };
            let nodes = (0..=n)
                .map(|j| gamma_eval(*t0, *t, *p, j as f64 / n as f64, sign))
                .collect();
            TimeGrid::new(nodes)
        }
        PathSpec::ExplicitNodes { nodes } => {
            if nodes.len() != n + 1 {
                return Err(Error::InvalidArgument(format!(
                    "explicit node list has {} nodes, expected n + 1 = {}",
                    nodes.len(),
                    n + 1
                )));
            }
            TimeGrid::new(nodes.clone())
        }
    }
}

/// Grid whose steps are n consecutive n(p+1)-th roots of unity, rescaled
/// so the steps sum to t − t0.
///
/// With m = n(p+1) and ζ_m(j) = e^{2πij/m} the steps are
/// τ_j = α·ζ_m(k + j) for j = 0, …, n−1 where α normalizes the total;
/// Σ_j τ_j^{p+1} = α^{p+1} Σ ζ_m((k+j)(p+1)) runs over all n-th roots of
/// unity and vanishes. The phase k only rotates the numerator and the
/// denominator of α together, so the resulting grid is identical for
/// every k; the parameter is kept for experimentation. For real
/// endpoints the grid equals the conjugated circle-segment
/// discretization.
pub fn roots_of_unity_steps(
    t0: Complex64,
    t: Complex64,
    p: u32,
    n: usize,
    k: i64,
) -> Result<TimeGrid> {
    check_path_args(t0, t, p)?;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "superconvergence needs n >= 2 steps".into(),
        ));
    }
    let m = n as i64 * (p as i64 + 1);
    let zeta = |j: i64| -> Complex64 {
        let jm = j.rem_euclid(m);
        Complex64::from_polar(1.0, 2.0 * PI * jm as f64 / m as f64)
    };
    let denom: Complex64 = (k..k + n as i64).map(zeta).sum();
    // n consecutive m-th roots with n < m never sum to zero; guard anyway.
    if denom.norm() < 1e-12 {
        return Err(Error::DegeneratePhase);
    }
    let alpha = (t - t0) / denom;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut cur = t0;
    nodes.push(cur);
    for j in 0..n as i64 {
        cur += alpha * zeta(k + j);
        nodes.push(cur);
    }
    TimeGrid::new(nodes)
}

/// Searches for an involution π on the step indices with
/// τ_j = conj(τ_{π(j)}) within `tol` on every step (0-based; the grid is
/// symmetric in the sense of complex-conjugate step pairing).
///
/// Returns the lexicographically first witness for n ≤ 12 via exhaustive
/// search over involutions; for larger grids only the canonical
/// candidates (identity, reversal) and a greedy first-fit pairing are
/// tried. Absence is a value, not an error.
pub fn symmetric_witness(grid: &TimeGrid, tol: f64) -> Option<Vec<usize>> {
    let steps = grid.steps();
    let n = steps.len();
    let ok = |j: usize, l: usize| (steps[j] - steps[l].conj()).norm() <= tol;

    if n <= 12 {
        let mut q = vec![usize::MAX; n];
        if search_involutions(&mut q, 0, &ok) {
            return Some(q);
        }
        return None;
    }

    if (0..n).all(|j| ok(j, j)) {
        return Some((0..n).collect());
    }
    if (0..n).all(|j| ok(j, n - 1 - j)) {
        return Some((0..n).rev().collect());
    }
    let mut q = vec![usize::MAX; n];
    for j in 0..n {
        if q[j] != usize::MAX {
            continue;
        }
        let l = (j..n).find(|&l| q[l] == usize::MAX && ok(j, l))?;
        q[j] = l;
        q[l] = j;
    }
    Some(q)
}

/// Depth-first enumeration of involutions in lexicographic order,
/// pairing the first free index with itself before any partner.
fn search_involutions(
    q: &mut Vec<usize>,
    from: usize,
    ok: &impl Fn(usize, usize) -> bool,
) -> bool {
    let n = q.len();
    let Some(j) = (from..n).find(|&j| q[j] == usize::MAX) else {
        return true;
    };
    if ok(j, j) {
        q[j] = j;
        if search_involutions(q, j + 1, ok) {
            return true;
        }
        q[j] = usize::MAX;
    }
    for l in (j + 1)..n {
        if q[l] == usize::MAX && ok(j, l) {
            q[j] = l;
            q[l] = j;
            if search_involutions(q, j + 1, ok) {
                return true;
            }
            q[j] = usize::MAX;
            q[l] = usize::MAX;
        }
    }
    false
}

/// Micro-step coefficients σ_1..σ_k of the normalized superconvergent
/// grid: the steps of the k-step discretization of γ^q between 0 and 1.
pub(crate) fn circle_sigma(q: u32, k: usize) -> Result<Vec<Complex64>> {
    let grid = discretize(
        &PathSpec::circle(Complex64::ZERO, Complex64::ONE, q),
        k,
    )?;
    Ok(grid.steps().to_vec())
}

/// Recursive micro-step grid of the order-raising composition iteration.
///
/// Level 0 is the single step [t0, t0+h]. Each further level replaces
/// every step τ of the coarser grid by the k micro steps σ_l·τ of the
/// normalized superconvergent schedule, using order p + (r−1)·g for the
/// outermost split and descending by the gain g down to p for the finest
/// one. The result has exactly k^r steps and returns to t0 + h.
pub fn fractal_grid(
    p: u32,
    g: u32,
    k: usize,
    r: u32,
    t0: Complex64,
    h: Complex64,
) -> Result<TimeGrid> {
    if p < 1 || g < 1 {
        return Err(Error::InvalidArgument(
            "fractal_grid needs p >= 1 and g >= 1".into(),
        ));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("fractal_grid needs k >= 2".into()));
    }
    if h == Complex64::ZERO {
        return Err(Error::DegeneratePath);
    }
    let mut nodes = vec![t0, t0 + h];
    for depth in 1..=r {
        let order = p + (r - depth) * g;
        let sigma = circle_sigma(order, k)?;
        let mut refined = Vec::with_capacity((nodes.len() - 1) * k + 1);
        refined.push(nodes[0]);
        for w in nodes.windows(2) {
            let tau = w[1] - w[0];
            let mut cur = w[0];
            for (l, s) in sigma.iter().enumerate() {
                // Land exactly on the coarse node to keep levels nested.
                cur = if l + 1 == k { w[1] } else { cur + s * tau };
                refined.push(cur);
            }
        }
        nodes = refined;
    }
    TimeGrid::new(nodes)
}
