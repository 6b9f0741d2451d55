//! Reference computations kept independent of the library's numerical paths.
#![allow(dead_code)]

use od_assim::model::{InfluxParams, MortalityParams};
use od_assim::population::{PopSample, PopulationField};

/// Adaptive Gauss-Kronrod (7/15) quadrature to absolute-or-relative `tol`.
pub fn adaptive_quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const XK: [f64; 8] = [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ];
    const WK: [f64; 8] = [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ];
    const WG: [f64; 4] = [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ];
    fn gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WK[7] * fc;
        let mut g = WG[3] * fc;
        for i in 0..7 {
            let s = f(c - h * XK[i]) + f(c + h * XK[i]);
            k += WK[i] * s;
            if i % 2 == 1 {
                g += WG[i / 2] * s;
            }
        }
        (k * h, (k - g).abs() * h)
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, err) = gk(f, a, b);
        if err <= tol.max(1e-15 * k.abs()) || depth > 40 {
            return k;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Gamma density evaluated from scratch with a Lanczos log-gamma.
pub fn gamma_density(a: f64, alpha: f64, beta: f64) -> f64 {
    if a <= 0.0 {
        return if alpha == 1.0 { beta } else { 0.0 };
    }
    (alpha * beta.ln() - ln_gamma_lanczos(alpha) + (alpha - 1.0) * a.ln() - beta * a).exp()
}

pub fn ln_gamma_lanczos(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma_lanczos(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn mortality(a: f64, p: &MortalityParams) -> f64 {
    p.gamma1 * (-p.lambda1 * a).exp() + p.gamma2 + p.lambda2 * (p.lambda2 * (a - p.m_shift)).exp() + p.mu_d
}

pub fn influx(a: f64, q: &InfluxParams) -> f64 {
    0.5 * (q.r1 * gamma_density(a, q.alpha1, q.beta1) + q.r2 * gamma_density(a, q.alpha2, q.beta2))
}

/// Central difference.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Upwind explicit solution of `n_t + n_a = -μ n + r (N - n)` with `n(0,t) = 0`.
///
/// Returns snapshots `snap[k][j] = n(j·da, times[k])` for the requested times
/// (which must be multiples of `dt`).
pub fn upwind_solve(
    rho: &dyn Fn(f64) -> f64,
    mu: &dyn Fn(f64) -> f64,
    r: &dyn Fn(f64) -> f64,
    big_n: &dyn Fn(f64) -> f64,
    a_max: f64,
    da: f64,
    dt: f64,
    times: &[f64],
) -> Vec<Vec<f64>> {
    let na = (a_max / da).round() as usize + 1;
    let ages: Vec<f64> = (0..na).map(|j| j as f64 * da).collect();
    let mu_v: Vec<f64> = ages.iter().map(|a| mu(*a)).collect();
    let r_v: Vec<f64> = ages.iter().map(|a| r(*a)).collect();
    let n_v: Vec<f64> = ages.iter().map(|a| big_n(*a)).collect();
    let mut n: Vec<f64> = ages.iter().map(|a| rho(*a)).collect();
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut step = 0usize;
    let cfl = dt / da;
    let mut next = vec![0.0; na];
    for target in times {
        let target_steps = (target / dt).round() as usize;
        while step < target_steps {
            next[0] = 0.0;
            for j in 1..na {
                let reaction = -mu_v[j] * n[j] + r_v[j] * (n_v[j] - n[j]);
                next[j] = n[j] - cfl * (n[j] - n[j - 1]) + dt * reaction;
            }
            std::mem::swap(&mut n, &mut next);
            step += 1;
            t += dt;
        }
        let _ = t;
        out.push(n.clone());
    }
    out
}

/// Population constant in time with a smooth age profile.
pub struct AgeProfilePopulation {
    pub level: f64,
    pub wiggle: f64,
}

impl PopulationField for AgeProfilePopulation {
    fn sample(&self, a: f64, _t: f64) -> od_assim::Result<PopSample> {
        Ok(PopSample {
            value: self.level * (1.0 + self.wiggle * (a / 15.0).sin()),
            d_age: self.level * self.wiggle * (a / 15.0).cos() / 15.0,
            d_time: 0.0,
        })
    }
}

impl AgeProfilePopulation {
    pub fn value(&self, a: f64) -> f64 {
        self.level * (1.0 + self.wiggle * (a / 15.0).sin())
    }
}

/// Small deterministic generator for drawing test cases (SplitMix64).
pub struct Draws(u64);

impl Draws {
    pub fn new(seed: u64) -> Self {
        Draws(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

/// One forecast step and one update of a scalar linear-Gaussian system:
/// `x ← x + Δt·k·x + ε`, `ε ~ N(0, q)`, then `z = x + η`, `η ~ N(0, r)`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSystem {
    pub m0: f64,
    pub p0: f64,
    pub k: f64,
    pub dt: f64,
    pub q: f64,
    pub r: f64,
    pub z: f64,
}

impl ScalarSystem {
    pub fn standard() -> Self {
        ScalarSystem {
            m0: 1.0,
            p0: 2.0,
            k: -0.5,
            dt: 0.2,
            q: 0.1,
            r: 0.5,
            z: 0.3,
        }
    }

    /// Kalman filter posterior mean and variance, written out by hand.
    pub fn exact(&self) -> (f64, f64) {
        let phi = 1.0 + self.dt * self.k;
        let m = phi * self.m0;
        let p = phi * phi * self.p0 + self.q;
        let gain = p / (p + self.r);
        (m + gain * (self.z - m), (1.0 - gain) * p)
    }
}

pub struct ScalarLinear(pub f64);

impl od_assim::enkf::Dynamics for ScalarLinear {
    fn dim(&self) -> usize {
        1
    }

    fn derivative(&self, state: &[f64], _: &[f64], _: f64, _: f64, out: &mut [f64]) -> od_assim::Result<()> {
        out[0] = self.0 * state[0];
        Ok(())
    }
}

pub struct Direct(pub usize);

impl od_assim::enkf::Measurement for Direct {
    fn dim(&self) -> usize {
        self.0
    }

    fn measure(&self, state: &[f64]) -> Vec<f64> {
        state[..self.0].to_vec()
    }
}

/// Posterior ensemble mean and variance of the scalar system with `m` members.
pub fn scalar_enkf(sys: &ScalarSystem, m: usize, seed: u64) -> (f64, f64) {
    use od_assim::enkf::*;
    let streams = NoiseStreams::new(seed);
    let mut ens = init_ensemble(m, &[sys.m0], &Covariance::Diagonal(vec![sys.p0]), 0.0, &streams, |_| {}).unwrap();
    let q = Covariance::Diagonal(vec![sys.q]).sampler().unwrap();
    forecast_step(&mut ens, &ScalarLinear(sys.k), sys.dt, &q, &streams).unwrap();
    let z = ObservationVector::unmasked(vec![sys.z]);
    update_step(&mut ens, &z, &Covariance::Diagonal(vec![sys.r]), &Direct(1), &streams).unwrap();
    (ens.mean()[0], ens.variance()[0])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Root-mean-square errors of the posterior mean and variance over
/// `replicates` seeds.
pub fn scalar_enkf_rmse(sys: &ScalarSystem, m: usize, replicates: u64) -> (f64, f64) {
    let (mean, var) = sys.exact();
    let (mut se_m, mut se_v) = (0.0, 0.0);
    for seed in 0..replicates {
        let (em, ev) = scalar_enkf(sys, m, 1000 + seed);
        se_m += (em - mean).powi(2);
        se_v += (ev - var).powi(2);
    }
    ((se_m / replicates as f64).sqrt(), (se_v / replicates as f64).sqrt())
}
