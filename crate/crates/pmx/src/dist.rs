//! Probability distribution catalog: log-densities, sampling, and bijective
//! transforms to unconstrained space.
//!
//! Densities are generic over [`Real`] so dual numbers flow through both the
//! prior terms and the error models. Sampling is `f64`-only and takes a
//! caller-owned random stream.
//!
//! Conventions:
//! - `Exponential(theta)` and `Gamma(alpha, theta)` use the *scale*
//!   parameterization.
//! - The constrained value of an `LKJCholesky(d, eta)` parameter is the
//!   correlation matrix; its density is evaluated in the Cholesky
//!   parameterization (including the normalization constant).
//! - `TimeToEvent` log-density takes the event indicator as its argument:
//!   1 means an event at the observation time (`ln lambda - Lambda`),
//!   0 means right-censoring (`-Lambda`).

use crate::autodiff::{erfc, lbeta, lgamma, Real};
use crate::linalg::Mat;
use rand::Rng;
use rand_distr::Distribution as RandDist;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
    #[error("operation unsupported for this distribution: {0}")]
    Unsupported(String),
    #[error("value shape does not match the distribution support")]
    ShapeMismatch,
}

/// A value in a distribution's support (or a model variable).
#[derive(Clone, Debug, PartialEq)]
pub enum Value<T> {
    Scalar(T),
    Vector(Vec<T>),
    Matrix(Mat<T>),
}

impl<T: Real> Value<T> {
    pub fn scalar(&self) -> Result<T, DistError> {
        match self {
            Value::Scalar(v) => Ok(*v),
            _ => Err(DistError::ShapeMismatch),
        }
    }
    pub fn vector(&self) -> Result<&[T], DistError> {
        match self {
            Value::Vector(v) => Ok(v),
            _ => Err(DistError::ShapeMismatch),
        }
    }
    pub fn matrix(&self) -> Result<&Mat<T>, DistError> {
        match self {
            Value::Matrix(m) => Ok(m),
            _ => Err(DistError::ShapeMismatch),
        }
    }
    pub fn map_values(&self) -> Value<f64> {
        match self {
            Value::Scalar(v) => Value::Scalar(v.value()),
            Value::Vector(v) => Value::Vector(v.iter().map(|x| x.value()).collect()),
            Value::Matrix(m) => Value::Matrix(m.map_values()),
        }
    }
    pub fn lift(v: &Value<f64>) -> Value<T> {
        match v {
            Value::Scalar(x) => Value::Scalar(T::from_f64(*x)),
            Value::Vector(x) => Value::Vector(x.iter().map(|&y| T::from_f64(y)).collect()),
            Value::Matrix(m) => Value::Matrix(Mat {
                nrows: m.nrows,
                ncols: m.ncols,
                data: m.data.iter().map(|&y| T::from_f64(y)).collect(),
            }),
        }
    }
}

/// One-sided or vector bound for `Constrained`. Bounds are fixed constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Unbounded,
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    pub fn at(&self, i: usize, default: f64) -> f64 {
        match self {
            Bound::Unbounded => default,
            Bound::Scalar(v) => *v,
            Bound::Vector(v) => v[i],
        }
    }
    pub fn is_unbounded(&self) -> bool {
        matches!(self, Bound::Unbounded)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Correlation matrix of dimension d, transported via its Cholesky rows.
    CholCorr(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dist<T: Real> {
    Normal { mu: T, sigma: T },
    LogNormal { mu: T, sigma: T },
    Cauchy { mu: T, sigma: T },
    TDist { nu: T },
    Laplace { mu: T, sigma: T },
    Logistic { mu: T, theta: T },
    /// Scale parameterization: mean = theta.
    Exponential { theta: T },
    Gamma { alpha: T, theta: T },
    Beta { alpha: T, beta: T },
    Uniform { lower: T, upper: T },
    LogitNormal { mu: T, sigma: T },
    LocationScale { loc: T, scale: T, base: Box<Dist<T>> },
    /// Fixed constant bounds around a fixed base; univariate bases are
    /// renormalized, multivariate bases are not.
    Constrained { base: Box<Dist<T>>, lower: Bound, upper: Bound, init: Option<Vec<f64>> },
    /// Fixed constant bounds, univariate base that may depend on parameters;
    /// always renormalized by the base CDF mass in [lower, upper].
    Truncated { base: Box<Dist<T>>, lower: f64, upper: f64 },
    MvNormal { mean: Vec<T>, cov: Mat<T> },
    MvLogNormal { mean: Vec<T>, cov: Mat<T> },
    LkjCholesky { dim: usize, eta: f64 },
    TimeToEvent { hazard: T, cum_hazard: T },
}

impl<T: Real> Dist<T> {
    pub fn shape(&self) -> Shape {
        match self {
            Dist::MvNormal { mean, .. } | Dist::MvLogNormal { mean, .. } => {
                Shape::Vector(mean.len())
            }
            Dist::LkjCholesky { dim, .. } => Shape::CholCorr(*dim),
            Dist::Constrained { base, .. } => base.shape(),
            Dist::LocationScale { base, .. } | Dist::Truncated { base, .. } => base.shape(),
            _ => Shape::Scalar,
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |msg: &str| Err(DistError::InvalidParameters(msg.to_string()));
        match self {
            Dist::Normal { sigma, .. }
            | Dist::LogNormal { sigma, .. }
            | Dist::Cauchy { sigma, .. }
            | Dist::Laplace { sigma, .. }
            | Dist::LogitNormal { sigma, .. } => {
                if sigma.value() <= 0.0 {
                    return bad("scale must be positive");
                }
            }
            Dist::Logistic { theta, .. } | Dist::Exponential { theta } => {
                if theta.value() <= 0.0 {
                    return bad("scale must be positive");
                }
            }
            Dist::TDist { nu } => {
                if nu.value() <= 0.0 {
                    return bad("degrees of freedom must be positive");
                }
            }
            Dist::Gamma { alpha, theta } => {
                if alpha.value() <= 0.0 || theta.value() <= 0.0 {
                    return bad("shape and scale must be positive");
                }
            }
            Dist::Beta { alpha, beta } => {
                if alpha.value() <= 0.0 || beta.value() <= 0.0 {
                    return bad("shape parameters must be positive");
                }
            }
            Dist::Uniform { lower, upper } => {
                if upper.value() <= lower.value() {
                    return bad("upper bound must exceed lower bound");
                }
            }
            Dist::LocationScale { scale, base, .. } => {
                if scale.value() <= 0.0 {
                    return bad("scale must be positive");
                }
                base.validate()?;
            }
            Dist::Constrained { base, lower, upper, .. } => {
                base.validate()?;
                let n = match base.shape() {
                    Shape::Scalar => 1,
                    Shape::Vector(n) => n,
                    Shape::CholCorr(_) => return bad("Constrained does not support matrix bases"),
                };
                for i in 0..n {
                    if upper.at(i, f64::INFINITY) <= lower.at(i, f64::NEG_INFINITY) {
                        return bad("upper bound must exceed lower bound");
                    }
                }
            }
            Dist::Truncated { base, lower, upper } => {
                base.validate()?;
                if base.shape() != Shape::Scalar {
                    return Err(DistError::Unsupported(
                        "truncated only supports univariate base distributions".into(),
                    ));
                }
                if upper <= lower {
                    return bad("upper bound must exceed lower bound");
                }
            }
            Dist::MvNormal { mean, cov } | Dist::MvLogNormal { mean, cov } => {
                if !cov.is_square() || cov.nrows != mean.len() {
                    return bad("covariance dimension mismatch");
                }
            }
            Dist::LkjCholesky { dim, eta } => {
                if *dim < 1 || *eta <= 0.0 {
                    return bad("LKJ dimension must be >= 1 and shape positive");
                }
            }
            Dist::TimeToEvent { .. } => {}
        }
        Ok(())
    }

    /// Log-density at `x`; finite in the support, `-inf` outside.
    pub fn logpdf(&self, x: &Value<T>) -> Result<T, DistError> {
        self.validate()?;
        self.logpdf_unchecked(x)
    }

    fn logpdf_unchecked(&self, x: &Value<T>) -> Result<T, DistError> {
        let neg_inf = T::from_f64(f64::NEG_INFINITY);
        let half = T::from_f64(0.5);
        let ln_2pi = T::from_f64((2.0 * std::f64::consts::PI).ln());
        Ok(match self {
            Dist::Normal { mu, sigma } => {
                let z = (x.scalar()? - *mu) / *sigma;
                -half * (ln_2pi + z * z) - sigma.ln()
            }
            Dist::LogNormal { mu, sigma } => {
                let v = x.scalar()?;
                if v.value() <= 0.0 {
                    return Ok(neg_inf);
                }
                let z = (v.ln() - *mu) / *sigma;
                -half * (ln_2pi + z * z) - sigma.ln() - v.ln()
            }
            Dist::Cauchy { mu, sigma } => {
                let z = (x.scalar()? - *mu) / *sigma;
                -T::from_f64(std::f64::consts::PI.ln()) - sigma.ln() - (T::one() + z * z).ln()
            }
            Dist::TDist { nu } => {
                let v = x.scalar()?;
                let np1h = (*nu + T::one()) * half;
                lgamma(np1h)
                    - lgamma(*nu * half)
                    - half * (*nu * T::from_f64(std::f64::consts::PI)).ln()
                    - np1h * (v * v / *nu).ln_1p()
            }
            Dist::Laplace { mu, sigma } => {
                -(T::from_f64(2.0) * *sigma).ln() - (x.scalar()? - *mu).abs() / *sigma
            }
            Dist::Logistic { mu, theta } => {
                let s = ((x.scalar()? - *mu) / *theta).abs();
                -s - theta.ln() - T::from_f64(2.0) * (-s).exp().ln_1p()
            }
            Dist::Exponential { theta } => {
                let v = x.scalar()?;
                if v.value() < 0.0 {
                    return Ok(neg_inf);
                }
                -theta.ln() - v / *theta
            }
            Dist::Gamma { alpha, theta } => {
                let v = x.scalar()?;
                if v.value() <= 0.0 {
                    return Ok(neg_inf);
                }
                (*alpha - T::one()) * v.ln() - v / *theta - lgamma(*alpha) - *alpha * theta.ln()
            }
            Dist::Beta { alpha, beta } => {
                let v = x.scalar()?;
                if v.value() <= 0.0 || v.value() >= 1.0 {
                    return Ok(neg_inf);
                }
                (*alpha - T::one()) * v.ln() + (*beta - T::one()) * (T::one() - v).ln()
                    - lbeta(*alpha, *beta)
            }
            Dist::Uniform { lower, upper } => {
                let v = x.scalar()?;
                if v.value() < lower.value() || v.value() > upper.value() {
                    return Ok(neg_inf);
                }
                -(*upper - *lower).ln()
            }
            Dist::LogitNormal { mu, sigma } => {
                let v = x.scalar()?;
                if v.value() <= 0.0 || v.value() >= 1.0 {
                    return Ok(neg_inf);
                }
                let logit = v.ln() - (T::one() - v).ln();
                let z = (logit - *mu) / *sigma;
                -half * (ln_2pi + z * z) - sigma.ln() - v.ln() - (T::one() - v).ln()
            }
            Dist::LocationScale { loc, scale, base } => {
                let v = (x.scalar()? - *loc) / *scale;
                base.logpdf_unchecked(&Value::Scalar(v))? - scale.ln()
            }
            Dist::Constrained { base, lower, upper, .. } => {
                if !self.constrained_contains(x)? {
                    return Ok(neg_inf);
                }
                let raw = base.logpdf_unchecked(x)?;
                match base.shape() {
                    Shape::Scalar => {
                        let l = lower.at(0, f64::NEG_INFINITY);
                        let u = upper.at(0, f64::INFINITY);
                        raw - base.cdf_mass(l, u)?.ln()
                    }
                    // multivariate: unnormalized by design (MCMC-only use)
                    _ => raw,
                }
            }
            Dist::Truncated { base, lower, upper } => {
                let v = x.scalar()?;
                if v.value() < *lower || v.value() > *upper {
                    return Ok(neg_inf);
                }
                base.logpdf_unchecked(x)? - base.cdf_mass(*lower, *upper)?.ln()
            }
            Dist::MvNormal { mean, cov } => {
                let v = x.vector()?;
                if v.len() != mean.len() {
                    return Err(DistError::ShapeMismatch);
                }
                match mvnormal_logpdf(mean, cov, v) {
                    Some(lp) => lp,
                    None => neg_inf,
                }
            }
            Dist::MvLogNormal { mean, cov } => {
                let v = x.vector()?;
                if v.len() != mean.len() {
                    return Err(DistError::ShapeMismatch);
                }
                if v.iter().any(|y| y.value() <= 0.0) {
                    return Ok(neg_inf);
                }
                let logs: Vec<T> = v.iter().map(|y| y.ln()).collect();
                match mvnormal_logpdf(mean, cov, &logs) {
                    Some(lp) => {
                        let mut s = lp;
                        for l in &logs {
                            s -= *l;
                        }
                        s
                    }
                    None => neg_inf,
                }
            }
            Dist::LkjCholesky { dim, eta } => {
                let c = x.matrix()?;
                if c.nrows != *dim || c.ncols != *dim {
                    return Err(DistError::ShapeMismatch);
                }
                let l = match c.cholesky() {
                    Some(l) => l,
                    None => return Ok(neg_inf),
                };
                let mut lp = T::from_f64(-lkj_log_norm_constant(*dim, *eta));
                for k in 1..*dim {
                    let coef = (*dim - k - 1) as f64 + 2.0 * (*eta - 1.0);
                    lp += T::from_f64(coef) * l[(k, k)].ln();
                }
                lp
            }
            Dist::TimeToEvent { hazard, cum_hazard } => {
                let event = x.scalar()?.value() >= 0.5;
                if event {
                    hazard.ln() - *cum_hazard
                } else {
                    -*cum_hazard
                }
            }
        })
    }

    fn constrained_contains(&self, x: &Value<T>) -> Result<bool, DistError> {
        if let Dist::Constrained { lower, upper, base, .. } = self {
            match base.shape() {
                Shape::Scalar => {
                    let v = x.scalar()?.value();
                    Ok(v >= lower.at(0, f64::NEG_INFINITY) && v <= upper.at(0, f64::INFINITY))
                }
                Shape::Vector(_) => {
                    let v = x.vector()?;
                    Ok(v.iter().enumerate().all(|(i, y)| {
                        y.value() >= lower.at(i, f64::NEG_INFINITY)
                            && y.value() <= upper.at(i, f64::INFINITY)
                    }))
                }
                Shape::CholCorr(_) => Err(DistError::Unsupported(
                    "Constrained does not support matrix bases".into(),
                )),
            }
        } else {
            Ok(true)
        }
    }

    /// CDF mass of `[lower, upper]`. Closed forms only; other bases are
    /// rejected rather than silently quadratured.
    fn cdf_mass(&self, lower: f64, upper: f64) -> Result<T, DistError> {
        Ok(self.cdf(upper)? - self.cdf(lower)?)
    }

    fn cdf(&self, x: f64) -> Result<T, DistError> {
        let half = T::from_f64(0.5);
        if x == f64::INFINITY {
            return Ok(T::one());
        }
        if x == f64::NEG_INFINITY {
            return Ok(T::zero());
        }
        let xv = T::from_f64(x);
        Ok(match self {
            Dist::Normal { mu, sigma } => {
                let z = (xv - *mu) / *sigma;
                half * erfc(-z / T::from_f64(std::f64::consts::SQRT_2))
            }
            Dist::Cauchy { mu, sigma } => {
                let z = (xv - *mu) / *sigma;
                half + z.atan() / T::from_f64(std::f64::consts::PI)
            }
            Dist::Exponential { theta } => {
                if x <= 0.0 {
                    T::zero()
                } else {
                    -(-xv / *theta).exp_m1()
                }
            }
            Dist::Uniform { lower, upper } => {
                if x <= lower.value() {
                    T::zero()
                } else if x >= upper.value() {
                    T::one()
                } else {
                    (xv - *lower) / (*upper - *lower)
                }
            }
            Dist::Logistic { mu, theta } => {
                let z = (xv - *mu) / *theta;
                T::one() / (T::one() + (-z).exp())
            }
            _ => {
                return Err(DistError::Unsupported(
                    "no closed-form CDF for this truncation base".into(),
                ))
            }
        })
    }

    /// Mean of the distribution (the `predict` semantics).
    pub fn mean(&self) -> Result<Value<T>, DistError> {
        self.validate()?;
        let unsupported =
            |what: &str| Err(DistError::Unsupported(format!("mean undefined for {what}")));
        Ok(match self {
            Dist::Normal { mu, .. } | Dist::Laplace { mu, .. } | Dist::Logistic { mu, .. } => {
                Value::Scalar(*mu)
            }
            Dist::LogNormal { mu, sigma } => {
                Value::Scalar((*mu + *sigma * *sigma * T::from_f64(0.5)).exp())
            }
            Dist::TDist { nu } => {
                if nu.value() <= 1.0 {
                    return unsupported("TDist with nu <= 1");
                }
                Value::Scalar(T::zero())
            }
            Dist::Exponential { theta } => Value::Scalar(*theta),
            Dist::Gamma { alpha, theta } => Value::Scalar(*alpha * *theta),
            Dist::Beta { alpha, beta } => Value::Scalar(*alpha / (*alpha + *beta)),
            Dist::Uniform { lower, upper } => Value::Scalar((*lower + *upper) * T::from_f64(0.5)),
            Dist::LocationScale { loc, scale, base } => {
                Value::Scalar(*loc + *scale * base.mean()?.scalar()?)
            }
            Dist::Constrained { base, lower, upper, .. } => {
                if base.shape() != Shape::Scalar {
                    return unsupported("multivariate Constrained");
                }
                truncated_mean(base, lower.at(0, f64::NEG_INFINITY), upper.at(0, f64::INFINITY))?
            }
            Dist::Truncated { base, lower, upper } => truncated_mean(base, *lower, *upper)?,
            Dist::MvNormal { mean, .. } => Value::Vector(mean.clone()),
            Dist::MvLogNormal { mean, cov } => Value::Vector(
                mean.iter()
                    .enumerate()
                    .map(|(i, m)| (*m + cov[(i, i)] * T::from_f64(0.5)).exp())
                    .collect(),
            ),
            Dist::LkjCholesky { dim, .. } => Value::Matrix(Mat::identity(*dim)),
            Dist::Cauchy { .. } => return unsupported("Cauchy"),
            Dist::LogitNormal { .. } => return unsupported("LogitNormal"),
            Dist::TimeToEvent { .. } => return unsupported("TimeToEvent"),
        })
    }

    /// Deterministic starting value: the `Constrained` init when given,
    /// otherwise the base median (mean for Gamma, where no closed-form median
    /// exists), clamped into the support.
    pub fn default_init(&self) -> Result<Value<f64>, DistError> {
        let d = self.map_values();
        d.validate()?;
        Ok(match &d {
            Dist::Normal { mu, .. }
            | Dist::Cauchy { mu, .. }
            | Dist::Laplace { mu, .. }
            | Dist::Logistic { mu, .. } => Value::Scalar(*mu),
            Dist::LogNormal { mu, .. } => Value::Scalar(mu.exp()),
            Dist::TDist { .. } => Value::Scalar(0.0),
            Dist::Exponential { theta } => Value::Scalar(theta * std::f64::consts::LN_2),
            Dist::Gamma { alpha, theta } => Value::Scalar(alpha * theta),
            Dist::Beta { alpha, beta } => Value::Scalar(alpha / (alpha + beta)),
            Dist::Uniform { lower, upper } => Value::Scalar(0.5 * (lower + upper)),
            Dist::LogitNormal { mu, .. } => Value::Scalar(1.0 / (1.0 + (-mu).exp())),
            Dist::LocationScale { loc, scale, base } => {
                Value::Scalar(loc + scale * base.default_init()?.scalar()?)
            }
            Dist::Constrained { base, lower, upper, init } => {
                if let Some(init) = init {
                    if base.shape() == Shape::Scalar {
                        Value::Scalar(init[0])
                    } else {
                        Value::Vector(init.clone())
                    }
                } else {
                    match base.shape() {
                        Shape::Scalar => Value::Scalar(clamp_into(
                            base.default_init()?.scalar()?,
                            lower.at(0, f64::NEG_INFINITY),
                            upper.at(0, f64::INFINITY),
                        )),
                        Shape::Vector(n) => {
                            let b = base.default_init()?;
                            let b = b.vector()?;
                            Value::Vector(
                                (0..n)
                                    .map(|i| {
                                        clamp_into(
                                            b[i],
                                            lower.at(i, f64::NEG_INFINITY),
                                            upper.at(i, f64::INFINITY),
                                        )
                                    })
                                    .collect(),
                            )
                        }
                        Shape::CholCorr(_) => {
                            return Err(DistError::Unsupported(
                                "Constrained does not support matrix bases".into(),
                            ))
                        }
                    }
                }
            }
            Dist::Truncated { base, lower, upper } => {
                Value::Scalar(clamp_into(base.default_init()?.scalar()?, *lower, *upper))
            }
            Dist::MvNormal { mean, .. } => Value::Vector(mean.clone()),
            Dist::MvLogNormal { mean, .. } => Value::Vector(mean.iter().map(|m| m.exp()).collect()),
            Dist::LkjCholesky { dim, .. } => Value::Matrix(Mat::identity(*dim)),
            Dist::TimeToEvent { .. } => {
                return Err(DistError::Unsupported("TimeToEvent has no init".into()))
            }
        })
    }

    pub fn map_values(&self) -> Dist<f64> {
        match self {
            Dist::Normal { mu, sigma } => Dist::Normal { mu: mu.value(), sigma: sigma.value() },
            Dist::LogNormal { mu, sigma } => {
                Dist::LogNormal { mu: mu.value(), sigma: sigma.value() }
            }
            Dist::Cauchy { mu, sigma } => Dist::Cauchy { mu: mu.value(), sigma: sigma.value() },
            Dist::TDist { nu } => Dist::TDist { nu: nu.value() },
            Dist::Laplace { mu, sigma } => Dist::Laplace { mu: mu.value(), sigma: sigma.value() },
            Dist::Logistic { mu, theta } => Dist::Logistic { mu: mu.value(), theta: theta.value() },
            Dist::Exponential { theta } => Dist::Exponential { theta: theta.value() },
            Dist::Gamma { alpha, theta } => {
                Dist::Gamma { alpha: alpha.value(), theta: theta.value() }
            }
            Dist::Beta { alpha, beta } => Dist::Beta { alpha: alpha.value(), beta: beta.value() },
            Dist::Uniform { lower, upper } => {
                Dist::Uniform { lower: lower.value(), upper: upper.value() }
            }
            Dist::LogitNormal { mu, sigma } => {
                Dist::LogitNormal { mu: mu.value(), sigma: sigma.value() }
            }
            Dist::LocationScale { loc, scale, base } => Dist::LocationScale {
                loc: loc.value(),
                scale: scale.value(),
                base: Box::new(base.map_values()),
            },
            Dist::Constrained { base, lower, upper, init } => Dist::Constrained {
                base: Box::new(base.map_values()),
                lower: lower.clone(),
                upper: upper.clone(),
                init: init.clone(),
            },
            Dist::Truncated { base, lower, upper } => Dist::Truncated {
                base: Box::new(base.map_values()),
                lower: *lower,
                upper: *upper,
            },
            Dist::MvNormal { mean, cov } => Dist::MvNormal {
                mean: mean.iter().map(|m| m.value()).collect(),
                cov: cov.map_values(),
            },
            Dist::MvLogNormal { mean, cov } => Dist::MvLogNormal {
                mean: mean.iter().map(|m| m.value()).collect(),
                cov: cov.map_values(),
            },
            Dist::LkjCholesky { dim, eta } => Dist::LkjCholesky { dim: *dim, eta: *eta },
            Dist::TimeToEvent { hazard, cum_hazard } => Dist::TimeToEvent {
                hazard: hazard.value(),
                cum_hazard: cum_hazard.value(),
            },
        }
    }
}

fn clamp_into(x: f64, lower: f64, upper: f64) -> f64 {
    if x > lower && x < upper {
        return x;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower + 1.0,
        (false, true) => upper - 1.0,
        (false, false) => x,
    }
}

fn truncated_mean<T: Real>(base: &Dist<T>, lower: f64, upper: f64) -> Result<Value<T>, DistError> {
    match base {
        Dist::Normal { mu, sigma } => {
            // mu + sigma (phi(a) - phi(b)) / (Phi(b) - Phi(a))
            let a = (T::from_f64(lower) - *mu) / *sigma;
            let b = (T::from_f64(upper) - *mu) / *sigma;
            let phi = |z: T| {
                if !z.value().is_finite() {
                    T::zero()
                } else {
                    (-z * z * T::from_f64(0.5)).exp()
                        / T::from_f64((2.0 * std::f64::consts::PI).sqrt())
                }
            };
            let mass = base.cdf_mass(lower, upper)?;
            Ok(Value::Scalar(*mu + *sigma * (phi(a) - phi(b)) / mass))
        }
        Dist::Uniform { lower: l, upper: u } => {
            let lo = T::from_f64(lower).max_val(*l);
            let hi = T::from_f64(upper).min_val(*u);
            Ok(Value::Scalar((lo + hi) * T::from_f64(0.5)))
        }
        _ => Err(DistError::Unsupported("no closed-form truncated mean for this base".into())),
    }
}

fn mvnormal_logpdf<T: Real>(mean: &[T], cov: &Mat<T>, x: &[T]) -> Option<T> {
    let l = cov.cholesky()?;
    let diff: Vec<T> = x.iter().zip(mean.iter()).map(|(a, b)| *a - *b).collect();
    let w = l.solve_lower(&diff);
    let mut quad = T::zero();
    for wi in &w {
        quad += *wi * *wi;
    }
    let d = mean.len() as f64;
    Some(
        T::from_f64(-0.5 * d * (2.0 * std::f64::consts::PI).ln())
            - T::from_f64(0.5) * l.logdet_from_cholesky()
            - T::from_f64(0.5) * quad,
    )
}

/// Log normalization constant of the LKJ density over correlation matrices,
/// from the vine-based construction of the distribution.
pub fn lkj_log_norm_constant(dim: usize, eta: f64) -> f64 {
    let mut log_c = 0.0;
    for k in 1..dim {
        let dk = (dim - k) as f64;
        log_c += (2.0 * eta - 2.0 + dk) * dk * std::f64::consts::LN_2;
        let a = eta + (dk - 1.0) / 2.0;
        log_c += dk * (lgamma(a) * 2.0 - lgamma(2.0 * a));
    }
    log_c
}

// ---------------------------------------------------------------------------
// Sampling (f64 only)
// ---------------------------------------------------------------------------

impl Dist<f64> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Value<f64>, DistError> {
        self.validate()?;
        Ok(match self {
            Dist::Normal { mu, sigma } => {
                Value::Scalar(rand_distr::Normal::new(*mu, *sigma).unwrap().sample(rng))
            }
            Dist::LogNormal { mu, sigma } => {
                Value::Scalar(rand_distr::LogNormal::new(*mu, *sigma).unwrap().sample(rng))
            }
            Dist::Cauchy { mu, sigma } => {
                Value::Scalar(rand_distr::Cauchy::new(*mu, *sigma).unwrap().sample(rng))
            }
            Dist::TDist { nu } => Value::Scalar(rand_distr::StudentT::new(*nu).unwrap().sample(rng)),
            Dist::Laplace { mu, sigma } => {
                let u: f64 = rng.gen_range(-0.5..0.5);
                Value::Scalar(mu - sigma * u.signum() * (1.0 - 2.0 * u.abs()).ln())
            }
            Dist::Logistic { mu, theta } => {
                let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                Value::Scalar(mu + theta * (u / (1.0 - u)).ln())
            }
            Dist::Exponential { theta } => {
                Value::Scalar(rand_distr::Exp::new(1.0 / theta).unwrap().sample(rng))
            }
            Dist::Gamma { alpha, theta } => {
                Value::Scalar(rand_distr::Gamma::new(*alpha, *theta).unwrap().sample(rng))
            }
            Dist::Beta { alpha, beta } => {
                Value::Scalar(rand_distr::Beta::new(*alpha, *beta).unwrap().sample(rng))
            }
            Dist::Uniform { lower, upper } => Value::Scalar(rng.gen_range(*lower..*upper)),
            Dist::LogitNormal { mu, sigma } => {
                let z: f64 = rand_distr::Normal::new(*mu, *sigma).unwrap().sample(rng);
                Value::Scalar(1.0 / (1.0 + (-z).exp()))
            }
            Dist::LocationScale { loc, scale, base } => {
                Value::Scalar(loc + scale * base.sample(rng)?.scalar()?)
            }
            Dist::Constrained { base, .. } => {
                for _ in 0..100_000 {
                    let cand = base.sample(rng)?;
                    if self.constrained_contains(&cand)? {
                        return Ok(cand);
                    }
                }
                return Err(DistError::InvalidParameters(
                    "constrained rejection sampling failed (support mass too small)".into(),
                ));
            }
            Dist::Truncated { base, lower, upper } => {
                for _ in 0..100_000 {
                    let cand = base.sample(rng)?.scalar()?;
                    if cand >= *lower && cand <= *upper {
                        return Ok(Value::Scalar(cand));
                    }
                }
                return Err(DistError::InvalidParameters(
                    "truncated rejection sampling failed (support mass too small)".into(),
                ));
            }
            Dist::MvNormal { mean, cov } => {
                let l = cov.cholesky().ok_or_else(|| {
                    DistError::InvalidParameters("covariance not positive definite".into())
                })?;
                let z: Vec<f64> =
                    (0..mean.len()).map(|_| rand_distr::StandardNormal.sample(rng)).collect();
                let lz = l.matvec(&z);
                Value::Vector(mean.iter().zip(lz.iter()).map(|(m, v)| m + v).collect())
            }
            Dist::MvLogNormal { mean, cov } => {
                let inner = Dist::MvNormal { mean: mean.clone(), cov: cov.clone() };
                match inner.sample(rng)? {
                    Value::Vector(v) => Value::Vector(v.iter().map(|x| x.exp()).collect()),
                    _ => unreachable!(),
                }
            }
            Dist::LkjCholesky { dim, eta } => {
                // canonical partial correlations; column j gets 2 Beta(b_j, b_j) - 1
                let d = *dim;
                let mut cpcs = Vec::with_capacity(d * (d - 1) / 2);
                for i in 1..d {
                    for j in 0..i {
                        let b = eta + (d as f64 - 2.0 - j as f64) / 2.0;
                        let w: f64 = rand_distr::Beta::new(b, b).unwrap().sample(rng);
                        cpcs.push(2.0 * w - 1.0);
                    }
                }
                let l = chol_corr_from_cpcs::<f64>(&cpcs, d).0;
                Value::Matrix(l.matmul(&l.transpose()))
            }
            Dist::TimeToEvent { .. } => {
                return Err(DistError::Unsupported(
                    "TimeToEvent is not sampleable; event simulation uses hazard inversion".into(),
                ))
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Bijectors
// ---------------------------------------------------------------------------

/// Elementwise map between one constrained coordinate and one unconstrained
/// real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarMap {
    Identity,
    /// z = ln(x - lower)
    LowerBounded(f64),
    /// z = ln(upper - x)
    UpperBounded(f64),
    /// z = logit((x - lower) / (upper - lower))
    Interval(f64, f64),
}

impl ScalarMap {
    pub fn from_bounds(lower: f64, upper: f64) -> ScalarMap {
        match (lower.is_finite(), upper.is_finite()) {
            (false, false) => ScalarMap::Identity,
            (true, false) => ScalarMap::LowerBounded(lower),
            (false, true) => ScalarMap::UpperBounded(upper),
            (true, true) => ScalarMap::Interval(lower, upper),
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        match self {
            ScalarMap::Identity => x,
            ScalarMap::LowerBounded(l) => (x - l).ln(),
            ScalarMap::UpperBounded(u) => (u - x).ln(),
            ScalarMap::Interval(l, u) => {
                let p = (x - l) / (u - l);
                (p / (1.0 - p)).ln()
            }
        }
    }

    pub fn inverse<T: Real>(&self, z: T) -> T {
        match self {
            ScalarMap::Identity => z,
            ScalarMap::LowerBounded(l) => T::from_f64(*l) + z.exp(),
            ScalarMap::UpperBounded(u) => T::from_f64(*u) - z.exp(),
            ScalarMap::Interval(l, u) => {
                let s = T::one() / (T::one() + (-z).exp());
                T::from_f64(*l) + T::from_f64(u - l) * s
            }
        }
    }

    pub fn log_jac_inverse<T: Real>(&self, z: T) -> T {
        match self {
            ScalarMap::Identity => T::zero(),
            ScalarMap::LowerBounded(_) | ScalarMap::UpperBounded(_) => z,
            ScalarMap::Interval(l, u) => {
                let a = -z.abs();
                T::from_f64((u - l).ln()) + a - T::from_f64(2.0) * a.exp().ln_1p()
            }
        }
    }
}

/// Bijection between a distribution's constrained support and a flat
/// unconstrained vector, with the log-Jacobian of the inverse map.
#[derive(Clone, Debug, PartialEq)]
pub enum Bijector {
    Scalar(ScalarMap),
    Vector(Vec<ScalarMap>),
    /// Row-wise tanh stick-breaking onto unit-norm Cholesky rows of a
    /// correlation matrix; d(d-1)/2 free coordinates.
    CholCorr(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("value outside the distribution support")]
    OutOfSupport,
    #[error("dimension mismatch: expected {0}, got {1}")]
    DimensionMismatch(usize, usize),
}

impl Bijector {
    pub fn unconstrained_dim(&self) -> usize {
        match self {
            Bijector::Scalar(_) => 1,
            Bijector::Vector(maps) => maps.len(),
            Bijector::CholCorr(d) => d * (d - 1) / 2,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Bijector::Scalar(_) => Shape::Scalar,
            Bijector::Vector(maps) => Shape::Vector(maps.len()),
            Bijector::CholCorr(d) => Shape::CholCorr(*d),
        }
    }

    /// Constrained value -> unconstrained coordinates.
    pub fn forward(&self, x: &Value<f64>) -> Result<Vec<f64>, TransformError> {
        match self {
            Bijector::Scalar(map) => {
                let v = x.scalar().map_err(|_| TransformError::OutOfSupport)?;
                let z = map.forward(v);
                if z.is_nan() {
                    return Err(TransformError::OutOfSupport);
                }
                Ok(vec![z])
            }
            Bijector::Vector(maps) => {
                let v = x.vector().map_err(|_| TransformError::OutOfSupport)?;
                if v.len() != maps.len() {
                    return Err(TransformError::DimensionMismatch(maps.len(), v.len()));
                }
                let mut out = Vec::with_capacity(maps.len());
                for (map, &vi) in maps.iter().zip(v.iter()) {
                    let z = map.forward(vi);
                    if z.is_nan() {
                        return Err(TransformError::OutOfSupport);
                    }
                    out.push(z);
                }
                Ok(out)
            }
            Bijector::CholCorr(d) => {
                let c = x.matrix().map_err(|_| TransformError::OutOfSupport)?;
                if c.nrows != *d {
                    return Err(TransformError::DimensionMismatch(*d, c.nrows));
                }
                let l = c.cholesky().ok_or(TransformError::OutOfSupport)?;
                let mut z = Vec::with_capacity(d * (d - 1) / 2);
                for i in 1..*d {
                    let mut sumsq = 0.0;
                    for j in 0..i {
                        let denom = (1.0 - sumsq).sqrt();
                        let w: f64 = l[(i, j)] / denom;
                        if !(-1.0..=1.0).contains(&w) {
                            return Err(TransformError::OutOfSupport);
                        }
                        z.push(w.atanh());
                        sumsq += l[(i, j)] * l[(i, j)];
                    }
                }
                Ok(z)
            }
        }
    }

    /// Unconstrained coordinates -> constrained value.
    pub fn inverse<T: Real>(&self, z: &[T]) -> Result<Value<T>, TransformError> {
        self.check_dim(z)?;
        Ok(match self {
            Bijector::Scalar(map) => Value::Scalar(map.inverse(z[0])),
            Bijector::Vector(maps) => {
                Value::Vector(maps.iter().zip(z.iter()).map(|(m, &zi)| m.inverse(zi)).collect())
            }
            Bijector::CholCorr(d) => {
                let cpcs: Vec<T> = z.iter().map(|&zi| zi.tanh()).collect();
                let l = chol_corr_from_cpcs(&cpcs, *d).0;
                Value::Matrix(l.matmul(&l.transpose()))
            }
        })
    }

    /// log |det d(inverse)/dz| at `z`.
    pub fn log_jac_inverse<T: Real>(&self, z: &[T]) -> Result<T, TransformError> {
        self.check_dim(z)?;
        Ok(match self {
            Bijector::Scalar(map) => map.log_jac_inverse(z[0]),
            Bijector::Vector(maps) => {
                let mut s = T::zero();
                for (m, &zi) in maps.iter().zip(z.iter()) {
                    s += m.log_jac_inverse(zi);
                }
                s
            }
            Bijector::CholCorr(d) => {
                let cpcs: Vec<T> = z.iter().map(|&zi| zi.tanh()).collect();
                let mut lj = chol_corr_from_cpcs(&cpcs, *d).1;
                // d tanh(z)/dz = 1 - tanh(z)^2
                for w in &cpcs {
                    lj += (T::one() - *w * *w).ln();
                }
                lj
            }
        })
    }

    fn check_dim<T>(&self, z: &[T]) -> Result<(), TransformError> {
        let want = self.unconstrained_dim();
        if z.len() != want {
            return Err(TransformError::DimensionMismatch(want, z.len()));
        }
        Ok(())
    }
}

/// Build the lower Cholesky factor of a correlation matrix from canonical
/// partial correlations (row-major, strictly lower triangle), returning the
/// factor and the log-Jacobian of the CPC -> L map.
fn chol_corr_from_cpcs<T: Real>(cpcs: &[T], d: usize) -> (Mat<T>, T) {
    let mut l = Mat::zeros(d, d);
    if d > 0 {
        l[(0, 0)] = T::one();
    }
    let mut k = 0;
    let mut log_jac = T::zero();
    for i in 1..d {
        let mut sumsq = T::zero();
        for j in 0..i {
            let rem = (T::one() - sumsq).sqrt();
            log_jac += rem.ln();
            l[(i, j)] = cpcs[k] * rem;
            sumsq += l[(i, j)] * l[(i, j)];
            k += 1;
        }
        l[(i, i)] = (T::one() - sumsq).sqrt();
    }
    (l, log_jac)
}

impl<T: Real> Dist<T> {
    /// Bijector onto unconstrained space, per the support of the prior.
    pub fn bijector(&self) -> Result<Bijector, DistError> {
        self.validate()?;
        Ok(match self {
            Dist::Normal { .. }
            | Dist::Cauchy { .. }
            | Dist::TDist { .. }
            | Dist::Laplace { .. }
            | Dist::Logistic { .. }
            | Dist::LocationScale { .. } => Bijector::Scalar(ScalarMap::Identity),
            Dist::LogNormal { .. } | Dist::Exponential { .. } | Dist::Gamma { .. } => {
                Bijector::Scalar(ScalarMap::LowerBounded(0.0))
            }
            Dist::Beta { .. } | Dist::LogitNormal { .. } => {
                Bijector::Scalar(ScalarMap::Interval(0.0, 1.0))
            }
            Dist::Uniform { lower, upper } => {
                Bijector::Scalar(ScalarMap::Interval(lower.value(), upper.value()))
            }
            Dist::Constrained { base, lower, upper, .. } => match base.shape() {
                Shape::Scalar => Bijector::Scalar(ScalarMap::from_bounds(
                    lower.at(0, f64::NEG_INFINITY),
                    upper.at(0, f64::INFINITY),
                )),
                Shape::Vector(n) => Bijector::Vector(
                    (0..n)
                        .map(|i| {
                            ScalarMap::from_bounds(
                                lower.at(i, f64::NEG_INFINITY),
                                upper.at(i, f64::INFINITY),
                            )
                        })
                        .collect(),
                ),
                Shape::CholCorr(_) => {
                    return Err(DistError::Unsupported(
                        "Constrained does not support matrix bases".into(),
                    ))
                }
            },
            Dist::Truncated { lower, upper, .. } => {
                Bijector::Scalar(ScalarMap::from_bounds(*lower, *upper))
            }
            Dist::MvNormal { mean, .. } => Bijector::Vector(vec![ScalarMap::Identity; mean.len()]),
            Dist::MvLogNormal { mean, .. } => {
                Bijector::Vector(vec![ScalarMap::LowerBounded(0.0); mean.len()])
            }
            Dist::LkjCholesky { dim, .. } => Bijector::CholCorr(*dim),
            Dist::TimeToEvent { .. } => {
                return Err(DistError::Unsupported("TimeToEvent is not usable as a prior".into()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::Continuous;

    fn sc(v: f64) -> Value<f64> {
        Value::Scalar(v)
    }

    fn std_normal() -> Dist<f64> {
        Dist::Normal { mu: 0.0, sigma: 1.0 }
    }

    #[test]
    fn normal_logpdf_at_zero() {
        let lp = std_normal().logpdf(&sc(0.0)).unwrap();
        assert!((lp - (-0.9189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn half_normal_doubles_the_density() {
        let half = Dist::Constrained {
            base: Box::new(std_normal()),
            lower: Bound::Scalar(0.0),
            upper: Bound::Unbounded,
            init: None,
        };
        let lp = half.logpdf(&sc(1.0)).unwrap();
        let base = std_normal().logpdf(&sc(1.0)).unwrap();
        assert!((lp - (base + std::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(half.logpdf(&sc(-0.1)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn tte_event_and_censoring() {
        let d = Dist::TimeToEvent { hazard: 2.0, cum_hazard: 2.0 };
        let event = d.logpdf(&sc(1.0)).unwrap();
        assert!((event - (2.0_f64.ln() - 2.0)).abs() < 1e-12);
        assert!((event - (-1.3068528194400546)).abs() < 1e-10);
        let cens = d.logpdf(&sc(0.0)).unwrap();
        assert!((cens - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn truncated_shift_is_constant_over_support() {
        let base = Dist::Normal { mu: 0.5, sigma: 2.0 };
        let tr = Dist::Truncated { base: Box::new(base.clone()), lower: -1.0, upper: 3.0 };
        let mut shifts = Vec::new();
        for x in [-0.9, 0.0, 0.5, 1.7, 2.9] {
            shifts.push(tr.logpdf(&sc(x)).unwrap() - base.logpdf(&sc(x)).unwrap());
        }
        for w in shifts.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
        assert_eq!(tr.logpdf(&sc(3.1)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn truncated_rejects_bases_without_closed_cdf() {
        let tr = Dist::Truncated {
            base: Box::new(Dist::Gamma { alpha: 2.0, theta: 1.0 }),
            lower: 0.5,
            upper: 4.0,
        };
        assert!(matches!(tr.logpdf(&sc(1.0)), Err(DistError::Unsupported(_))));
    }

    #[test]
    fn logpdfs_match_statrs() {
        let cases: Vec<(Dist<f64>, Box<dyn Fn(f64) -> f64>, Vec<f64>)> = vec![
            (
                Dist::Normal { mu: 1.2, sigma: 0.7 },
                Box::new(|x| statrs::distribution::Normal::new(1.2, 0.7).unwrap().ln_pdf(x)),
                vec![-1.0, 0.4, 2.7],
            ),
            (
                Dist::LogNormal { mu: 0.3, sigma: 0.9 },
                Box::new(|x| statrs::distribution::LogNormal::new(0.3, 0.9).unwrap().ln_pdf(x)),
                vec![0.2, 1.0, 4.5],
            ),
            (
                Dist::Cauchy { mu: -0.5, sigma: 1.5 },
                Box::new(|x| statrs::distribution::Cauchy::new(-0.5, 1.5).unwrap().ln_pdf(x)),
                vec![-4.0, 0.0, 6.0],
            ),
            (
                Dist::Gamma { alpha: 2.5, theta: 0.8 },
                // statrs Gamma takes a rate
                Box::new(|x| statrs::distribution::Gamma::new(2.5, 1.0 / 0.8).unwrap().ln_pdf(x)),
                vec![0.3, 1.0, 5.0],
            ),
            (
                Dist::Beta { alpha: 2.0, beta: 3.5 },
                Box::new(|x| statrs::distribution::Beta::new(2.0, 3.5).unwrap().ln_pdf(x)),
                vec![0.1, 0.5, 0.9],
            ),
            (
                Dist::TDist { nu: 4.0 },
                Box::new(|x| {
                    statrs::distribution::StudentsT::new(0.0, 1.0, 4.0).unwrap().ln_pdf(x)
                }),
                vec![-2.0, 0.0, 1.3],
            ),
            (
                Dist::Laplace { mu: 0.5, sigma: 2.0 },
                Box::new(|x| statrs::distribution::Laplace::new(0.5, 2.0).unwrap().ln_pdf(x)),
                vec![-3.0, 0.5, 4.0],
            ),
            (
                Dist::Exponential { theta: 3.0 },
                Box::new(|x| statrs::distribution::Exp::new(1.0 / 3.0).unwrap().ln_pdf(x)),
                vec![0.1, 1.0, 9.0],
            ),
        ];
        for (d, reference, xs) in cases {
            for x in xs {
                let ours = d.logpdf(&sc(x)).unwrap();
                let theirs = reference(x);
                assert!(
                    (ours - theirs).abs() < 1e-9 * (1.0 + theirs.abs()),
                    "{d:?} at {x}: {ours} vs {theirs}"
                );
            }
        }
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn densities_integrate_to_one() {
        let cases: Vec<(Dist<f64>, f64, f64)> = vec![
            (Dist::Normal { mu: 0.7, sigma: 1.3 }, 0.7 - 13.0, 0.7 + 13.0),
            (Dist::LogNormal { mu: 0.0, sigma: 0.5 }, 1e-6, 200.0),
            (Dist::Exponential { theta: 2.0 }, 0.0, 80.0),
            (Dist::Uniform { lower: -1.0, upper: 3.0 }, -1.0, 3.0),
            (Dist::Logistic { mu: 0.0, theta: 1.0 }, -40.0, 40.0),
            (Dist::Laplace { mu: 0.0, sigma: 1.0 }, -40.0, 40.0),
            (Dist::Gamma { alpha: 3.0, theta: 1.5 }, 1e-9, 120.0),
            (Dist::Beta { alpha: 2.0, beta: 2.0 }, 0.0, 1.0),
            (Dist::LogitNormal { mu: 0.2, sigma: 0.8 }, 1e-9, 1.0 - 1e-9),
            (
                Dist::Truncated {
                    base: Box::new(Dist::Normal { mu: 0.25, sigma: 1.0 }),
                    lower: 0.0,
                    upper: f64::INFINITY,
                },
                0.0,
                14.0,
            ),
            (
                Dist::Constrained {
                    base: Box::new(Dist::Cauchy { mu: 0.0, sigma: 1.0 }),
                    lower: Bound::Scalar(0.0),
                    upper: Bound::Unbounded,
                    init: None,
                },
                // substitution-free wide range; half-Cauchy tail mass beyond
                // 1e4 is ~6e-5, inside the acceptance band
                0.0,
                40000.0,
            ),
        ];
        for (d, a, b) in cases {
            let mass = simpson(|x| d.logpdf(&sc(x)).unwrap().exp(), a, b, 200_000);
            assert!((0.999..=1.001).contains(&mass), "{d:?}: mass {mass}");
        }
    }

    #[test]
    fn cauchy_and_tdist_integrate_via_substitution() {
        // x = tan(u) maps the real line to (-pi/2, pi/2)
        for d in [Dist::Cauchy { mu: 0.3, sigma: 2.0 }, Dist::TDist { nu: 2.0 }] {
            let mass = simpson(
                |u: f64| {
                    let x = u.tan();
                    d.logpdf(&sc(x)).unwrap().exp() / u.cos().powi(2)
                },
                -std::f64::consts::FRAC_PI_2 + 1e-9,
                std::f64::consts::FRAC_PI_2 - 1e-9,
                100_000,
            );
            assert!((0.999..=1.001).contains(&mass), "{d:?}: mass {mass}");
        }
    }

    #[test]
    fn lkj_2d_normalization_and_mode() {
        // free coordinate of a 2x2 correlation matrix is rho
        let d = Dist::LkjCholesky { dim: 2, eta: 2.5 };
        let pdf = |rho: f64| {
            let c = Mat::from_rows(&[&[1.0, rho], &[rho, 1.0]]);
            d.logpdf(&Value::Matrix(c)).unwrap().exp()
        };
        let mass = simpson(pdf, -1.0 + 1e-10, 1.0 - 1e-10, 200_000);
        assert!((0.999..=1.001).contains(&mass), "mass {mass}");
        // for eta > 1 the density is maximized at the identity
        let at_identity = pdf(0.0);
        for rho in [-0.9, -0.4, 0.3, 0.8] {
            assert!(pdf(rho) < at_identity);
        }
    }

    #[test]
    fn lkj_5d_identity_is_mode_for_eta_above_one() {
        let d = Dist::LkjCholesky { dim: 5, eta: 2.0 };
        let id = d.logpdf(&Value::Matrix(Mat::identity(5))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = d.sample(&mut rng).unwrap();
            assert!(d.logpdf(&c).unwrap() <= id + 1e-12);
        }
    }

    #[test]
    fn mvnormal_matches_product_of_normals_for_diagonal_cov() {
        let d = Dist::MvNormal {
            mean: vec![1.0, -2.0],
            cov: Mat::from_rows(&[&[4.0, 0.0], &[0.0, 0.25]]),
        };
        let lp = d.logpdf(&Value::Vector(vec![2.0, -2.5])).unwrap();
        let n1 = Dist::Normal { mu: 1.0, sigma: 2.0 }.logpdf(&sc(2.0)).unwrap();
        let n2 = Dist::Normal { mu: -2.0, sigma: 0.5 }.logpdf(&sc(-2.5)).unwrap();
        assert!((lp - (n1 + n2)).abs() < 1e-12);
    }

    #[test]
    fn sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(20240811);
        let n = 1_000_000;

        // Uniform(0,1): mean in [0.497, 0.503]
        let u = Dist::Uniform { lower: 0.0, upper: 1.0 };
        let mean: f64 =
            (0..n).map(|_| u.sample(&mut rng).unwrap().scalar().unwrap()).sum::<f64>() / n as f64;
        assert!((0.497..=0.503).contains(&mean), "uniform mean {mean}");

        // Gamma(2, 3): mean 6, var 18
        let g = Dist::Gamma { alpha: 2.0, theta: 3.0 };
        let draws: Vec<f64> =
            (0..n).map(|_| g.sample(&mut rng).unwrap().scalar().unwrap()).collect();
        let m: f64 = draws.iter().sum::<f64>() / n as f64;
        let v: f64 = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        assert!((m - 6.0).abs() < 0.06, "gamma mean {m}");
        assert!((v - 18.0).abs() < 0.5, "gamma var {v}");

        // LocationScale(1, 2, TDist(2)): mean exists (nu > 1) and equals 1
        let ls = Dist::LocationScale {
            loc: 1.0,
            scale: 2.0,
            base: Box::new(Dist::TDist { nu: 2.0 }),
        };
        let m: f64 =
            (0..n).map(|_| ls.sample(&mut rng).unwrap().scalar().unwrap()).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.3, "location-scale t mean {m} (infinite variance)");

        // Constrained(MvNormal(0, I), lower = 0): all coordinates nonnegative
        let cmv = Dist::Constrained {
            base: Box::new(Dist::MvNormal { mean: vec![0.0; 3], cov: Mat::identity(3) }),
            lower: Bound::Scalar(0.0),
            upper: Bound::Unbounded,
            init: None,
        };
        for _ in 0..200 {
            let v = cmv.sample(&mut rng).unwrap();
            assert!(v.vector().unwrap().iter().all(|&x| x >= 0.0));
        }

        // LKJ(2, eta): var(rho) = 1/(2 eta + 1)
        let eta = 1.5;
        let lkj = Dist::LkjCholesky { dim: 2, eta };
        let m2: f64 = (0..200_000)
            .map(|_| {
                let c = lkj.sample(&mut rng).unwrap();
                let rho = c.matrix().unwrap()[(1, 0)];
                rho * rho
            })
            .sum::<f64>()
            / 200_000.0;
        let expect = 1.0 / (2.0 * eta + 1.0);
        assert!((m2 - expect).abs() < 0.01 * expect.max(0.05), "lkj var {m2} vs {expect}");
    }

    #[test]
    fn tte_is_not_sampleable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dist::TimeToEvent { hazard: 1.0, cum_hazard: 1.0 };
        assert!(matches!(d.sample(&mut rng), Err(DistError::Unsupported(_))));
        assert!(matches!(d.bijector(), Err(DistError::Unsupported(_))));
    }

    #[test]
    fn bijector_catalog_examples() {
        // Exponential(1): forward(1) = 0, log-jac of exp at 0 is 0
        let b = Dist::Exponential { theta: 1.0 }.bijector().unwrap();
        assert_eq!(b.forward(&sc(1.0)).unwrap(), vec![0.0]);
        assert_eq!(b.log_jac_inverse(&[0.0]).unwrap(), 0.0);

        // LKJCholesky(2, 1): z = [0] maps to the identity
        let b = Dist::<f64>::LkjCholesky { dim: 2, eta: 1.0 }.bijector().unwrap();
        match b.inverse(&[0.0]).unwrap() {
            Value::Matrix(c) => {
                assert!((c[(0, 0)] - 1.0).abs() < 1e-15);
                assert!((c[(1, 1)] - 1.0).abs() < 1e-15);
                assert!(c[(1, 0)].abs() < 1e-15);
            }
            _ => panic!("expected matrix"),
        }

        // Uniform(0,4): the midpoint maps to 0
        let b = Dist::Uniform { lower: 0.0, upper: 4.0 }.bijector().unwrap();
        assert_eq!(b.forward(&sc(2.0)).unwrap(), vec![0.0]);
    }

    fn det(m: &mut Vec<Vec<f64>>) -> f64 {
        let n = m.len();
        let mut d = 1.0;
        for i in 0..n {
            let mut p = i;
            for r in i + 1..n {
                if m[r][i].abs() > m[p][i].abs() {
                    p = r;
                }
            }
            if m[p][i] == 0.0 {
                return 0.0;
            }
            if p != i {
                m.swap(p, i);
                d = -d;
            }
            d *= m[i][i];
            for r in i + 1..n {
                let f = m[r][i] / m[i][i];
                for c in i..n {
                    m[r][c] -= f * m[i][c];
                }
            }
        }
        d
    }

    /// Numerical log |det J| of the inverse map at z via central differences.
    fn fd_log_jac(b: &Bijector, z: &[f64]) -> f64 {
        let n = z.len();
        let h = 1e-6;
        let flat = |z: &[f64]| -> Vec<f64> {
            match b.inverse(z).unwrap() {
                Value::Scalar(v) => vec![v],
                Value::Vector(v) => v,
                Value::Matrix(c) => {
                    // the transported object is the Cholesky factor
                    let l = c.cholesky().unwrap();
                    let mut out = Vec::new();
                    for i in 1..l.nrows {
                        for j in 0..i {
                            out.push(l[(i, j)]);
                        }
                    }
                    out
                }
            }
        };
        let mut jac = vec![vec![0.0; n]; n];
        let mut zp = z.to_vec();
        for j in 0..n {
            zp[j] = z[j] + h;
            let up = flat(&zp);
            zp[j] = z[j] - h;
            let dn = flat(&zp);
            zp[j] = z[j];
            for i in 0..n {
                jac[i][j] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        det(&mut jac).abs().ln()
    }

    #[test]
    fn bijector_roundtrip_and_jacobian_properties() {
        let dists: Vec<Dist<f64>> = vec![
            Dist::Normal { mu: 0.0, sigma: 1.0 },
            Dist::LogNormal { mu: 0.0, sigma: 1.0 },
            Dist::Exponential { theta: 2.0 },
            Dist::Gamma { alpha: 2.0, theta: 1.0 },
            Dist::Beta { alpha: 2.0, beta: 2.0 },
            Dist::Uniform { lower: -2.0, upper: 5.0 },
            Dist::LogitNormal { mu: 0.0, sigma: 1.0 },
            Dist::Truncated {
                base: Box::new(Dist::Normal { mu: 0.25, sigma: 1.0 }),
                lower: 0.0,
                upper: f64::INFINITY,
            },
            Dist::Constrained {
                base: Box::new(Dist::Normal { mu: 0.0, sigma: 1.0 }),
                lower: Bound::Scalar(-1.0),
                upper: Bound::Scalar(2.0),
                init: None,
            },
            Dist::Constrained {
                base: Box::new(Dist::MvNormal { mean: vec![0.0; 3], cov: Mat::identity(3) }),
                lower: Bound::Scalar(0.0),
                upper: Bound::Unbounded,
                init: None,
            },
            Dist::MvNormal { mean: vec![0.5, -0.5], cov: Mat::identity(2) },
            Dist::LkjCholesky { dim: 3, eta: 1.0 },
            Dist::LkjCholesky { dim: 4, eta: 2.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for d in dists {
            let b = d.bijector().unwrap();
            let n_draws = 1000 / b.unconstrained_dim().max(1);
            for _ in 0..n_draws.max(50) {
                let x = d.sample(&mut rng).unwrap();
                let z = b.forward(&x).unwrap();
                let back = b.inverse(&z).unwrap();
                // roundtrip within 1e-12 relative
                let (a, c): (Vec<f64>, Vec<f64>) = match (&x, &back) {
                    (Value::Scalar(a), Value::Scalar(c)) => (vec![*a], vec![*c]),
                    (Value::Vector(a), Value::Vector(c)) => (a.clone(), c.clone()),
                    (Value::Matrix(a), Value::Matrix(c)) => (a.data.clone(), c.data.clone()),
                    _ => panic!("shape changed in roundtrip"),
                };
                for (ai, ci) in a.iter().zip(c.iter()) {
                    assert!(
                        (ai - ci).abs() <= 1e-12 * (1.0 + ai.abs()),
                        "{d:?}: roundtrip {ai} vs {ci}"
                    );
                }
                // log-jacobian against numerical determinant
                let lj = b.log_jac_inverse(&z).unwrap();
                let fd = fd_log_jac(&b, &z);
                assert!((lj - fd).abs() < 1e-6 * (1.0 + lj.abs()), "{d:?}: jac {lj} vs {fd}");
            }
        }
    }

    #[test]
    fn means_match_closed_forms() {
        let ln2 = Dist::LogNormal { mu: 2.0_f64.ln(), sigma: 1.0 };
        let m = ln2.mean().unwrap().scalar().unwrap();
        assert!((m - 2.0 * 0.5_f64.exp()).abs() < 1e-12);

        let tn = Dist::Truncated {
            base: Box::new(Dist::Normal { mu: 0.0, sigma: 1.0 }),
            lower: 0.0,
            upper: f64::INFINITY,
        };
        // half-normal mean = sqrt(2/pi)
        let m = tn.mean().unwrap().scalar().unwrap();
        assert!((m - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);

        assert!(matches!(
            Dist::Cauchy { mu: 0.0, sigma: 1.0 }.mean(),
            Err(DistError::Unsupported(_))
        ));
    }

    #[test]
    fn default_inits() {
        let c = Dist::Constrained {
            base: Box::new(std_normal()),
            lower: Bound::Scalar(0.0),
            upper: Bound::Unbounded,
            init: Some(vec![1.0]),
        };
        assert_eq!(c.default_init().unwrap().scalar().unwrap(), 1.0);
        // no init: base median 0 is outside (0, inf), falls back to lower + 1
        let c = Dist::Constrained {
            base: Box::new(std_normal()),
            lower: Bound::Scalar(0.0),
            upper: Bound::Unbounded,
            init: None,
        };
        assert_eq!(c.default_init().unwrap().scalar().unwrap(), 1.0);
        assert_eq!(std_normal().default_init().unwrap().scalar().unwrap(), 0.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            Dist::Normal { mu: 0.0, sigma: -1.0 }.logpdf(&sc(0.0)),
            Err(DistError::InvalidParameters(_))
        ));
        assert!(matches!(
            Dist::Uniform { lower: 2.0, upper: 1.0 }.logpdf(&sc(0.0)),
            Err(DistError::InvalidParameters(_))
        ));
        assert!(matches!(
            Dist::<f64>::LkjCholesky { dim: 3, eta: 0.0 }.validate(),
            Err(DistError::InvalidParameters(_))
        ));
    }
}
