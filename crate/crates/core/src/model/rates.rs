//! Pointwise rates: mortality, gamma densities, influx and the initial cohort.

use statrs::function::gamma::ln_gamma;

use super::{InfluxParams, InitialCondition, ModelParams, MortalityParams};
use crate::error::{Error, Result};
use crate::special::{gamma_mass, regularized_gamma_pair};

fn check_age(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("age must be finite and >= 0, got {a}")));
    }
    Ok(())
}

fn check_gamma(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() || !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!(
            "gamma shape and rate must be finite and > 0, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

/// `μ0(a) = γ1 e^(-λ1 a) + γ2 + λ2 e^(λ2 (a - M))`, excluding the drug-caused excess.
pub fn baseline_mortality(a: f64, p: &MortalityParams) -> Result<f64> {
    check_age(a)?;
    Ok(baseline_unchecked(a, p))
}

#[inline]
fn baseline_unchecked(a: f64, p: &MortalityParams) -> f64 {
    p.gamma1 * (-p.lambda1 * a).exp() + p.gamma2 + p.lambda2 * (p.lambda2 * (a - p.m_shift)).exp()
}

pub fn total_mortality(a: f64, p: &MortalityParams) -> Result<f64> {
    Ok(baseline_mortality(a, p)? + p.mu_d)
}

/// Exact `∫_lo^hi μ(x) dx` including `mu_d`.
pub fn mortality_integral(lo: f64, hi: f64, p: &MortalityParams) -> Result<f64> {
    check_age(lo)?;
    check_age(hi)?;
    Ok(mortality_cumulative(hi, p) - mortality_cumulative(lo, p))
}

#[inline]
fn mortality_cumulative(x: f64, p: &MortalityParams) -> f64 {
    -p.gamma1 / p.lambda1 * (-p.lambda1 * x).exp_m1()
        + (p.gamma2 + p.mu_d) * x
        + (-p.lambda2 * p.m_shift).exp() * (p.lambda2 * x).exp_m1()
}

/// Gamma density with shape `alpha` and rate `beta`.
pub fn gamma_pdf(a: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_gamma(alpha, beta)?;
    check_age(a)?;
    Ok(GammaComponent::new(1.0, alpha, beta).pdf(a))
}

/// Age at which the gamma density peaks, `(α - 1) / β`.
pub fn gamma_mode(alpha: f64, beta: f64) -> Result<f64> {
    check_gamma(alpha, beta)?;
    if alpha <= 1.0 {
        return Err(Error::domain(format!(
            "gamma mode lies on the boundary for shape {alpha} <= 1"
        )));
    }
    Ok((alpha - 1.0) / beta)
}

pub fn influx_rate(a: f64, q: &InfluxParams) -> Result<f64> {
    check_age(a)?;
    q.validate()?;
    Ok(Kernel::influx_only(q).influx(a))
}

/// `dr/da`, using `f'(a) = f(a) ((α - 1)/a - β)`.
pub fn influx_rate_derivative(a: f64, q: &InfluxParams) -> Result<f64> {
    q.validate()?;
    if !(a > 0.0) {
        if a == 0.0 && q.alpha1 >= 2.0 && q.alpha2 >= 2.0 {
            return Ok(Kernel::influx_only(q).influx_slope(a));
        }
        return Err(Error::domain(format!("influx derivative is singular at age {a}")));
    }
    Ok(Kernel::influx_only(q).influx_slope(a))
}

/// `∫_{s_lo}^{s_hi} f(z + offset; α, β) dz = [Γ(α, (offset+s_lo)β) - Γ(α, (offset+s_hi)β)] / Γ(α)`.
pub fn influx_integral(s_lo: f64, s_hi: f64, offset: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_gamma(alpha, beta)?;
    if !(s_lo <= s_hi) || !(offset + s_lo >= 0.0) {
        return Err(Error::domain(format!(
            "invalid characteristic segment [{s_lo}, {s_hi}] with offset {offset}"
        )));
    }
    gamma_mass(alpha, beta, offset + s_lo, offset + s_hi)
}

pub fn initial_density(a: f64, ic: &InitialCondition) -> Result<f64> {
    check_age(a)?;
    ic.validate()?;
    Ok(ic.prevalence * ic.n0_total * GammaComponent::new(1.0, ic.alpha0, ic.beta0).pdf(a))
}

pub fn initial_density_derivative(a: f64, ic: &InitialCondition) -> Result<f64> {
    ic.validate()?;
    if !(a > 0.0) && !(a == 0.0 && ic.alpha0 >= 2.0) {
        return Err(Error::domain(format!("initial density derivative is singular at age {a}")));
    }
    Ok(ic.prevalence * ic.n0_total * GammaComponent::new(1.0, ic.alpha0, ic.beta0).slope(a))
}

/// Weighted gamma density `weight · f(a; shape, rate)` with a cached normalizer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GammaComponent {
    weight: f64,
    shape: f64,
    rate: f64,
    log_norm: f64,
}

impl GammaComponent {
    pub(crate) fn new(weight: f64, shape: f64, rate: f64) -> Self {
        GammaComponent {
            weight,
            shape,
            rate,
            log_norm: shape * rate.ln() - ln_gamma(shape),
        }
    }

    #[inline]
    pub(crate) fn pdf(&self, a: f64) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        if a <= 0.0 {
            return if self.shape == 1.0 {
                self.weight * self.rate
            } else if self.shape > 1.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        self.weight * (self.log_norm + (self.shape - 1.0) * a.ln() - self.rate * a).exp()
    }

    #[inline]
    pub(crate) fn slope(&self, a: f64) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        if a <= 0.0 {
            // Only reached for shape >= 2 (or shape == 1) by the public wrappers.
            return if self.shape == 2.0 {
                self.weight * self.rate * self.rate
            } else if self.shape == 1.0 {
                -self.weight * self.rate * self.rate
            } else {
                0.0
            };
        }
        self.pdf(a) * ((self.shape - 1.0) / a - self.rate)
    }

    /// Weighted probability mass on `[0, x]`.
    #[inline]
    pub(crate) fn cumulative(&self, x: f64) -> f64 {
        if self.weight == 0.0 || x <= 0.0 {
            return 0.0;
        }
        match regularized_gamma_pair(self.shape, self.rate * x) {
            Ok((p, _)) => self.weight * p,
            Err(_) => f64::NAN,
        }
    }
}

/// Rates of one parameter set, with normalizers precomputed for inner loops.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    mortality: MortalityParams,
    first: GammaComponent,
    second: GammaComponent,
}

impl Kernel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self::new_unchecked(params))
    }

    pub(crate) fn new_unchecked(params: &ModelParams) -> Self {
        let q = &params.influx;
        Kernel {
            mortality: params.mortality,
            first: GammaComponent::new(0.5 * q.r1, q.alpha1, q.beta1),
            second: GammaComponent::new(0.5 * q.r2, q.alpha2, q.beta2),
        }
    }

    fn influx_only(q: &InfluxParams) -> Self {
        Self::new_unchecked(&ModelParams {
            mortality: MortalityParams::us_males(0.0),
            influx: *q,
        })
    }

    pub fn mortality(&self, a: f64) -> f64 {
        baseline_unchecked(a, &self.mortality) + self.mortality.mu_d
    }

    pub fn influx(&self, a: f64) -> f64 {
        self.first.pdf(a) + self.second.pdf(a)
    }

    pub fn influx_slope(&self, a: f64) -> f64 {
        self.first.slope(a) + self.second.slope(a)
    }

    /// `G(x) = ∫_0^x μ + r`, so survival between ages is `exp(G(lo) - G(hi))`.
    pub fn hazard_cumulative(&self, x: f64) -> f64 {
        mortality_cumulative(x, &self.mortality) + self.first.cumulative(x) + self.second.cumulative(x)
    }

    pub fn mu_d(&self) -> f64 {
        self.mortality.mu_d
    }
}
