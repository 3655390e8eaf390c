//! Adaptive Dormand-Prince 5(4) integration with bolus dose events and dense
//! output, generic over the scalar type so dual numbers flow through.
//!
//! Integration stops exactly at each dose time, applies the bolus and
//! restarts, which keeps full order across the discontinuity. Step-size
//! control (PI controller, Hairer's constants) reads only the primal values,
//! so the accepted mesh is identical between plain and dual solves.

use crate::autodiff::Real;
use thiserror::Error;

pub const DEFAULT_ABSTOL: f64 = 1e-8;
pub const DEFAULT_RELTOL: f64 = 1e-8;
pub const DEFAULT_MAX_STEPS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct OdeOptions {
    pub abstol: f64,
    pub reltol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            abstol: DEFAULT_ABSTOL,
            reltol: DEFAULT_RELTOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Bolus dose against a compartment index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dose {
    pub time: f64,
    pub amount: f64,
    pub compartment: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("query time {0} outside the solved interval")]
    OutOfDomain(f64),
    #[error("dose targets compartment {0} but the state has {1}")]
    UnknownCompartment(usize, usize),
}

/// Integration failure. Maps to a -inf log-density rather than a panic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DivergeReason {
    /// "Larger maxiters is needed"
    MaxStepsExceeded,
    /// "dt <= dtmin"
    StepSizeUnderflow,
    /// "Instability detected"
    NonFiniteState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diverged {
    pub reason: DivergeReason,
    pub t: f64,
}

impl std::fmt::Display for Diverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.reason {
            DivergeReason::MaxStepsExceeded => {
                write!(f, "interrupted at t={}: larger max_steps is needed", self.t)
            }
            DivergeReason::StepSizeUnderflow => {
                write!(f, "step size underflow at t={}: aborting", self.t)
            }
            DivergeReason::NonFiniteState => {
                write!(f, "instability detected at t={}: aborting", self.t)
            }
        }
    }
}

pub trait OdeRhs<T: Real>: Sync {
    fn eval(&self, t: T, y: &[T], dy: &mut [T]);
}

impl<T: Real, F: Fn(T, &[T], &mut [T]) + Sync> OdeRhs<T> for F {
    fn eval(&self, t: T, y: &[T], dy: &mut [T]) {
        self(t, y, dy)
    }
}

/// One accepted step with its 4th-order dense-output coefficients.
#[derive(Clone, Debug)]
struct DenseStep<T> {
    t: f64,
    h: f64,
    rcont: [Vec<T>; 5],
}

#[derive(Clone, Debug)]
pub struct OdeSolution<T> {
    steps: Vec<DenseStep<T>>,
    initial: Vec<T>,
    t0: f64,
    t_end: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub n_rhs_evals: usize,
}

impl<T: Real> OdeSolution<T> {
    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }

    /// Accepted mesh times (segment starts), including `t0`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.steps.iter().map(|s| s.t).collect();
        ts.push(self.t_end);
        if ts.is_empty() {
            ts.push(self.t0);
        }
        ts
    }

    /// State at `t`. At dose times this is the post-dose (right-limit) state.
    pub fn interpolate(&self, t: f64) -> Result<Vec<T>, OdeError> {
        if t < self.t0 || t > self.t_end {
            return Err(OdeError::OutOfDomain(t));
        }
        if self.steps.is_empty() {
            return Ok(self.initial.clone());
        }
        // last step whose start is <= t: a step starting exactly at a dose
        // time carries the post-dose state
        let idx = self.steps.partition_point(|s| s.t <= t).saturating_sub(1);
        let step = &self.steps[idx];
        let theta = if step.h == 0.0 { 0.0 } else { (t - step.t) / step.h };
        let th = T::from_f64(theta);
        let th1 = T::from_f64(1.0 - theta);
        let n = step.rcont[0].len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            // contd5 polynomial: exact y0 at theta=0 and y1 at theta=1
            let v = step.rcont[0][i]
                + th * (step.rcont[1][i]
                    + th1 * (step.rcont[2][i] + th * (step.rcont[3][i] + th1 * step.rcont[4][i])));
            out.push(v);
        }
        Ok(out)
    }
}

/// Add a bolus to one compartment; all other components unchanged.
pub fn apply_dose<T: Real>(state: &mut [T], dose: &Dose) -> Result<(), OdeError> {
    if dose.compartment >= state.len() {
        return Err(OdeError::UnknownCompartment(dose.compartment, state.len()));
    }
    state[dose.compartment] += T::from_f64(dose.amount);
    Ok(())
}

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN_INV: f64 = 5.0; // largest step decrease on accept
const FAC_MAX_INV: f64 = 0.1; // largest step increase (10x)

/// Integrate `rhs` from `t0` to `t_end` applying bolus `doses` at their event
/// times. Doses must lie within `[t0, t_end]`; doses exactly at `t0` are
/// applied before the first step.
pub fn solve<T: Real>(
    rhs: &dyn OdeRhs<T>,
    initial: &[T],
    t0: f64,
    t_end: f64,
    doses: &[Dose],
    options: &OdeOptions,
) -> Result<OdeSolution<T>, Diverged> {
    assert!(t_end >= t0, "integration interval reversed");
    let mut state = initial.to_vec();
    let mut events: Vec<Dose> = doses.to_vec();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut sol = OdeSolution {
        steps: Vec::new(),
        initial: initial.to_vec(),
        t0,
        t_end,
        n_accepted: 0,
        n_rejected: 0,
        n_rhs_evals: 0,
    };

    let mut ev = 0;
    // boluses scheduled at the very start
    while ev < events.len() && events[ev].time <= t0 {
        apply_dose(&mut state, &events[ev]).expect("dose compartment out of range");
        ev += 1;
    }
    sol.initial = state.clone();
    if t_end == t0 {
        return Ok(sol);
    }

    let mut seg_start = t0;
    loop {
        let seg_end = if ev < events.len() { events[ev].time.min(t_end) } else { t_end };
        if seg_end > seg_start {
            integrate_segment(rhs, &mut state, seg_start, seg_end, options, &mut sol)?;
        }
        seg_start = seg_end;
        let mut dosed = false;
        while ev < events.len() && events[ev].time <= seg_start {
            apply_dose(&mut state, &events[ev]).expect("dose compartment out of range");
            ev += 1;
            dosed = true;
        }
        // zero-length dense step carrying the post-dose state so queries at
        // the event time see the right limit even when it lands on t_end
        if dosed && !sol.steps.is_empty() {
            sol.steps.push(DenseStep {
                t: seg_start,
                h: 0.0,
                rcont: [
                    state.clone(),
                    vec![T::zero(); state.len()],
                    vec![T::zero(); state.len()],
                    vec![T::zero(); state.len()],
                    vec![T::zero(); state.len()],
                ],
            });
        }
        if seg_start >= t_end {
            break;
        }
    }
    Ok(sol)
}

fn integrate_segment<T: Real>(
    rhs: &dyn OdeRhs<T>,
    state: &mut Vec<T>,
    t_start: f64,
    t_stop: f64,
    options: &OdeOptions,
    sol: &mut OdeSolution<T>,
) -> Result<(), Diverged> {
    let n = state.len();
    let atol = options.abstol;
    let rtol = options.reltol;
    let mut t = t_start;
    let mut y = state.clone();

    let mut k1 = vec![T::zero(); n];
    rhs.eval(T::from_f64(t), &y, &mut k1);
    sol.n_rhs_evals += 1;
    if !all_finite(&k1) || !all_finite(&y) {
        return Err(Diverged { reason: DivergeReason::NonFiniteState, t });
    }

    let mut h = initial_step(rhs, &y, &k1, t, t_stop, atol, rtol, sol);
    let mut facold: f64 = 1e-4;
    let mut ytmp = vec![T::zero(); n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    );

    while t < t_stop {
        if sol.n_accepted + sol.n_rejected >= options.max_steps {
            return Err(Diverged { reason: DivergeReason::MaxStepsExceeded, t });
        }
        let hmin = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < hmin {
            return Err(Diverged { reason: DivergeReason::StepSizeUnderflow, t });
        }
        let mut last = false;
        if t + h >= t_stop {
            h = t_stop - t;
            last = true;
        }
        let hh = T::from_f64(h);

        macro_rules! stage {
            ($k:ident, $c:expr, $($coef:expr => $ki:ident),+) => {{
                for i in 0..n {
                    let mut acc = T::zero();
                    $(acc += T::from_f64($coef) * $ki[i];)+
                    ytmp[i] = y[i] + hh * acc;
                }
                rhs.eval(T::from_f64(t + $c * h), &ytmp, &mut $k);
                sol.n_rhs_evals += 1;
            }};
        }

        stage!(k2, C2, A21 => k1);
        stage!(k3, C3, A31 => k1, A32 => k2);
        stage!(k4, C4, A41 => k1, A42 => k2, A43 => k3);
        stage!(k5, C5, A51 => k1, A52 => k2, A53 => k3, A54 => k4);
        stage!(k6, 1.0, A61 => k1, A62 => k2, A63 => k3, A64 => k4, A65 => k5);

        // 5th order solution, then FSAL stage
        let mut ynew = vec![T::zero(); n];
        for i in 0..n {
            let acc = T::from_f64(A71) * k1[i]
                + T::from_f64(A73) * k3[i]
                + T::from_f64(A74) * k4[i]
                + T::from_f64(A75) * k5[i]
                + T::from_f64(A76) * k6[i];
            ynew[i] = y[i] + hh * acc;
        }
        rhs.eval(T::from_f64(t + h), &ynew, &mut k7);
        sol.n_rhs_evals += 1;

        if !all_finite(&ynew) || !all_finite(&k7) {
            return Err(Diverged { reason: DivergeReason::NonFiniteState, t });
        }

        // scaled RMS error on primal values only
        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i].value()
                    + E3 * k3[i].value()
                    + E4 * k4[i].value()
                    + E5 * k5[i].value()
                    + E6 * k6[i].value()
                    + E7 * k7[i].value());
            let sc = atol + rtol * y[i].value().abs().max(ynew[i].value().abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Diverged { reason: DivergeReason::NonFiniteState, t });
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            // accept
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FAC_MAX_INV, FAC_MIN_INV);
            facold = err.max(1e-4);
            let mut rcont = [
                y.clone(),
                vec![T::zero(); n],
                vec![T::zero(); n],
                vec![T::zero(); n],
                vec![T::zero(); n],
            ];
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hh * k1[i] - ydiff;
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - hh * k7[i] - bspl;
                rcont[4][i] = hh
                    * (T::from_f64(D1) * k1[i]
                        + T::from_f64(D3) * k3[i]
                        + T::from_f64(D4) * k4[i]
                        + T::from_f64(D5) * k5[i]
                        + T::from_f64(D6) * k6[i]
                        + T::from_f64(D7) * k7[i]);
            }
            sol.steps.push(DenseStep { t, h, rcont });
            sol.n_accepted += 1;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = if last { t_stop } else { t + h };
            h /= fac;
        } else {
            sol.n_rejected += 1;
            h /= (fac11 / SAFE).min(FAC_MIN_INV);
        }
    }
    *state = y;
    Ok(())
}

fn all_finite<T: Real>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite_value())
}

/// Hairer's starting-step heuristic, evaluated on primal values.
#[allow(clippy::too_many_arguments)]
fn initial_step<T: Real>(
    rhs: &dyn OdeRhs<T>,
    y: &[T],
    f0: &[T],
    t: f64,
    t_stop: f64,
    atol: f64,
    rtol: f64,
    sol: &mut OdeSolution<T>,
) -> f64 {
    let n = y.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let sc = atol + rtol * y[i].value().abs();
        d0 += (y[i].value() / sc).powi(2);
        d1 += (f0[i].value() / sc).powi(2);
    }
    d0 = (d0 / n as f64).sqrt();
    d1 = (d1 / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(t_stop - t);

    let yp: Vec<T> = (0..n).map(|i| y[i] + T::from_f64(h0) * f0[i]).collect();
    let mut f1 = vec![T::zero(); n];
    rhs.eval(T::from_f64(t + h0), &yp, &mut f1);
    sol.n_rhs_evals += 1;
    let mut d2 = 0.0;
    for i in 0..n {
        let sc = atol + rtol * y[i].value().abs();
        d2 += (((f1[i].value() - f0[i].value()) / sc) / h0).powi(2);
    }
    d2 = (d2 / n as f64).sqrt();

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_stop - t)
}
