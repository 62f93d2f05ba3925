//! Single-input single-output LTI models.
//!
//! Continuous models come from the two-inductor RLC circuit, get discretized
//! (bilinear by default, zero-order hold optional), and are then simulated
//! from zero initial state. The H2 and H-infinity norms work on discrete
//! models only; `model_distance` applies them to the parallel difference of
//! two models.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

/// Outputs beyond this magnitude are treated as a diverged simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Poles closer than this to the unit circle make both norms unbounded.
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_HINF_GRID: usize = 4096;

/// Sampling period used for the circuit experiments, in seconds.
///
/// The circuits resonate at roughly 0.018 and 0.009 rad/s; at 100 s both
/// resonances sit well inside (0, pi) rad/sample.
pub const DEFAULT_CIRCUIT_DT: f64 = 100.0;

fn check_dims(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, d: f64) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidModel(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.len() != n || c.len() != n {
        return Err(Error::InvalidModel(format!(
            "B has {} rows and C has {} columns, expected {n}",
            b.len(),
            c.len()
        )));
    }
    if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) || !d.is_finite() {
        return Err(Error::InvalidModel("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Evaluates `C (zI - A)^-1 B + D` at a complex point.
fn eval_transfer(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, d: f64, z: Complex64) -> Complex64 {
    let n = a.nrows();
    if n == 0 {
        return Complex64::new(d, 0.0);
    }
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(a[(i, j)], 0.0)
    });
    let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(b[i], 0.0));
    match m.lu().solve(&rhs) {
        Some(x) => {
            x.iter()
                .zip(c.iter())
                .map(|(xi, ci)| xi * ci)
                .sum::<Complex64>()
                + d
        }
        None => Complex64::new(f64::INFINITY, 0.0),
    }
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Continuous-time state-space model `x' = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStateSpace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d: f64,
}

impl ContinuousStateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        check_dims(&a, &b, &c, d)?;
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// `H(s)` at a complex frequency.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        eval_transfer(&self.a, &self.b, &self.c, self.d, s)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < 0.0)
    }
}

/// Discrete-time state-space model `x(k+1) = Ax(k) + Bu(k)`, `y(k) = Cx(k) + Du(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceJson", into = "StateSpaceJson")]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d: f64,
    sample_period: f64,
}

/// On-disk model layout: `{"A": [[..]], "B": [..], "C": [..], "D": d, "dt": dt}`.
#[derive(Serialize, Deserialize)]
struct StateSpaceJson {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "D")]
    d: f64,
    dt: f64,
}

impl TryFrom<StateSpaceJson> for StateSpace {
    type Error = Error;

    fn try_from(raw: StateSpaceJson) -> Result<Self> {
        let n = raw.a.len();
        if raw.a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel("A rows must all have length n".into()));
        }
        let a = DMatrix::from_fn(n, n, |i, j| raw.a[i][j]);
        StateSpace::new(
            a,
            DVector::from_vec(raw.b),
            DVector::from_vec(raw.c),
            raw.d,
            raw.dt,
        )
    }
}

impl From<StateSpace> for StateSpaceJson {
    fn from(ss: StateSpace) -> Self {
        let n = ss.order();
        Self {
            a: (0..n).map(|i| (0..n).map(|j| ss.a[(i, j)]).collect()).collect(),
            b: ss.b.iter().copied().collect(),
            c: ss.c.iter().copied().collect(),
            d: ss.d,
            dt: ss.sample_period,
        }
    }
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
        sample_period: f64,
    ) -> Result<Self> {
        check_dims(&a, &b, &c, d)?;
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            sample_period,
        })
    }

    /// A memoryless system `y = gain * u`.
    pub fn static_gain(gain: f64, sample_period: f64) -> Result<Self> {
        Self::new(
            DMatrix::zeros(0, 0),
            DVector::zeros(0),
            DVector::zeros(0),
            gain,
            sample_period,
        )
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// `H(z)` at a complex point.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval_transfer(&self.a, &self.b, &self.c, self.d, z)
    }

    /// Frequency response `H(e^{jw})`, `w` in rad/sample.
    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, omega))
    }

    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Applies the state transform `x = T x'`, which leaves the transfer function unchanged.
    pub fn similarity_transform(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("transform is singular".into()))?;
        let c_row = self.c.transpose() * t;
        Self::new(
            &t_inv * &self.a * t,
            &t_inv * &self.b,
            c_row.transpose(),
            self.d,
            self.sample_period,
        )
    }

    /// Impulse response samples `h(0) = D`, `h(k) = C A^(k-1) B`.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        out.push(self.d);
        let mut x = self.b.clone();
        for _ in 1..len {
            out.push(self.c.dot(&x));
            x = &self.a * x;
        }
        out
    }
}

/// Component values of the circuit: current source into the node shared by
/// `L1` and `C`, then `R` in series with `L2`; the output is the voltage over `L2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitComponents {
    pub r: f64,
    pub l1: f64,
    pub l2: f64,
    pub c: f64,
}

impl CircuitComponents {
    pub const S1: Self = Self {
        r: 100.0,
        l1: 60.0,
        l2: 20.0,
        c: 50.0,
    };

    pub const S2: Self = Self {
        r: 100.0,
        l1: 160.0,
        l2: 200.0,
        c: 75.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R", self.r), ("L1", self.l1), ("L2", self.l2), ("C", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "component {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `H(s) = s^2 L2 / (s^3 C L2 + s^2 R C + s (1 + L2/L1) + R/L1)`.
    pub fn transfer(&self, s: Complex64) -> Complex64 {
        let num = s * s * self.l2;
        let den = s * s * s * (self.c * self.l2)
            + s * s * (self.r * self.c)
            + s * (1.0 + self.l2 / self.l1)
            + self.r / self.l1;
        num / den
    }
}

/// Third-order realization with states `(i_L1, v_C, i_L2)`.
pub fn circuit_model(comp: &CircuitComponents) -> Result<ContinuousStateSpace> {
    comp.validate()?;
    let CircuitComponents { r, l1, l2, c } = *comp;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(3, 3, &[
        0.0,       1.0 / l1, 0.0,
        -1.0 / c,  0.0,      -1.0 / c,
        0.0,       1.0 / l2, -r / l2,
    ]);
    let b = DVector::from_vec(vec![0.0, 1.0 / c, 0.0]);
    // e_y = L2 di2/dt = v_C - R i2
    let cvec = DVector::from_vec(vec![0.0, 1.0, -r]);
    ContinuousStateSpace::new(a, b, cvec, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    #[default]
    Bilinear,
    ZeroOrderHold,
}

pub fn discretize(css: &ContinuousStateSpace, dt: f64) -> Result<StateSpace> {
    discretize_with(css, dt, Discretization::Bilinear)
}

pub fn discretize_with(
    css: &ContinuousStateSpace,
    dt: f64,
    method: Discretization,
) -> Result<StateSpace> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let n = css.order();
    if n == 0 {
        return StateSpace::static_gain(css.d, dt);
    }
    match method {
        Discretization::Bilinear => {
            let pole_at = 2.0 / dt;
            let tol = 1e-9 * pole_at.max(1.0);
            if css.poles().iter().any(|p| (p - pole_at).norm() <= tol) {
                return Err(Error::DiscretizationSingular(pole_at));
            }
            let alpha = dt / 2.0;
            let eye = DMatrix::<f64>::identity(n, n);
            let m = (&eye - &css.a * alpha)
                .try_inverse()
                .ok_or(Error::DiscretizationSingular(pole_at))?;
            let ad = &m * (&eye + &css.a * alpha);
            let mb = &m * &css.b;
            let cm = (css.c.transpose() * &m).transpose();
            let dd = css.d + alpha * css.c.dot(&mb);
            StateSpace::new(ad, mb, cm * dt, dd, dt)
        }
        Discretization::ZeroOrderHold => {
            let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
            aug.view_mut((0, 0), (n, n)).copy_from(&(&css.a * dt));
            aug.view_mut((0, n), (n, 1)).copy_from(&(&css.b * dt));
            let e = aug.exp();
            let ad = e.view((0, 0), (n, n)).into_owned();
            let bd = e.view((0, n), (n, 1)).column(0).into_owned();
            StateSpace::new(ad, bd, css.c.clone(), css.d, dt)
        }
    }
}

/// Runs the model from zero initial state; output length equals input length.
pub fn simulate(ss: &StateSpace, u: &TimeSeries) -> Result<TimeSeries> {
    let n = ss.order();
    let a: Vec<f64> = (0..n * n).map(|k| ss.a[(k / n, k % n)]).collect();
    let b: Vec<f64> = ss.b.iter().copied().collect();
    let c: Vec<f64> = ss.c.iter().copied().collect();
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut y = Vec::with_capacity(u.len());
    for (k, &uk) in u.values().iter().enumerate() {
        let yk = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum::<f64>() + ss.d * uk;
        if !yk.is_finite() || yk.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { index: k, value: yk });
        }
        y.push(yk);
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            next[i] = row.iter().zip(&x).map(|(aij, xj)| aij * xj).sum::<f64>() + b[i] * uk;
        }
        std::mem::swap(&mut x, &mut next);
    }
    TimeSeries::with_sample_period(y, ss.sample_period)
}

fn require_off_unit_circle(ss: &StateSpace) -> Result<()> {
    if let Some(p) = ss
        .poles()
        .into_iter()
        .find(|p| (p.norm() - 1.0).abs() <= UNIT_CIRCLE_TOLERANCE)
    {
        return Err(Error::UnboundedNorm(format!(
            "pole {p} lies on the unit circle"
        )));
    }
    Ok(())
}

/// Solves `W = A^T W A + Q` for the discrete observability Gramian.
fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    // vec(A^T W A) = (A^T kron A^T) vec(W) in column-major order
    let kron = at.kronecker(&at);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::UnboundedNorm("Lyapunov equation is singular".into()))?;
    let w = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&w + w.transpose()) * 0.5)
}

/// Root-mean-square output under unit white noise, via the observability Gramian.
pub fn h2_norm(ss: &StateSpace) -> Result<f64> {
    if ss.order() == 0 {
        return Ok(ss.d.abs());
    }
    let rho = ss.spectral_radius();
    if rho >= 1.0 - UNIT_CIRCLE_TOLERANCE {
        return Err(Error::UnboundedNorm(format!(
            "system is not stable (spectral radius {rho})"
        )));
    }
    let q = &ss.c * ss.c.transpose();
    let w = discrete_lyapunov(&ss.a, &q)?;
    let quad = ss.b.dot(&(&w * &ss.b));
    Ok((quad + ss.d * ss.d).max(0.0).sqrt())
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    while hi - lo > 1e-12 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

/// Peak gain over `[0, pi)` from a uniform grid, refined by golden-section search
/// around the grid maximum. Returns `(grid maximum, refined maximum)`.
pub fn hinf_norm_detailed(ss: &StateSpace, grid_size: usize) -> Result<(f64, f64)> {
    if grid_size == 0 {
        return Err(Error::Parameter("grid_size must be positive".into()));
    }
    require_off_unit_circle(ss)?;
    if ss.order() == 0 {
        return Ok((ss.d.abs(), ss.d.abs()));
    }
    let pi = std::f64::consts::PI;
    let step = pi / grid_size as f64;
    let gain = |w: f64| ss.frequency_response(w).norm();
    let (best_i, grid_max) = (0..grid_size)
        .map(|i| (i, gain(i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let hi = ((best_i + 1) as f64 * step).min(pi);
    let (_, refined) = golden_section_max(gain, lo, hi);
    Ok((grid_max, grid_max.max(refined)))
}

pub fn hinf_norm(ss: &StateSpace, grid_size: usize) -> Result<f64> {
    hinf_norm_detailed(ss, grid_size).map(|(_, refined)| refined)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelNorm {
    H2,
    Hinf,
}

/// The system `H1 - H2` as one state-space model.
pub fn parallel_difference(ss1: &StateSpace, ss2: &StateSpace) -> Result<StateSpace> {
    let (t1, t2) = (ss1.sample_period, ss2.sample_period);
    if (t1 - t2).abs() > 1e-12 * t1.max(t2) {
        return Err(Error::IncompatibleModel(format!(
            "sample periods differ: {t1} vs {t2}"
        )));
    }
    let (n1, n2) = (ss1.order(), ss2.order());
    let n = n1 + n2;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&ss1.a);
    a.view_mut((n1, n1), (n2, n2)).copy_from(&ss2.a);
    let mut b = DVector::zeros(n);
    b.rows_mut(0, n1).copy_from(&ss1.b);
    b.rows_mut(n1, n2).copy_from(&ss2.b);
    let mut c = DVector::zeros(n);
    c.rows_mut(0, n1).copy_from(&ss1.c);
    c.rows_mut(n1, n2).copy_from(&(-&ss2.c));
    StateSpace::new(a, b, c, ss1.d - ss2.d, t1)
}

pub fn model_distance(ss1: &StateSpace, ss2: &StateSpace, norm: ModelNorm) -> Result<f64> {
    let diff = parallel_difference(ss1, ss2)?;
    match norm {
        ModelNorm::H2 => h2_norm(&diff),
        ModelNorm::Hinf => hinf_norm(&diff, DEFAULT_HINF_GRID),
    }
}

/// The two discretized circuits used throughout the experiments.
pub fn paper_circuits(dt: f64, method: Discretization) -> Result<Vec<StateSpace>> {
    [CircuitComponents::S1, CircuitComponents::S2]
        .iter()
        .map(|comp| discretize_with(&circuit_model(comp)?, dt, method))
        .collect()
}
