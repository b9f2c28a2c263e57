//! Exact autocovariances of the underlying stationary Gaussian sequence and
//! of its Hermite subordination `H_q(Z_k)`, partial-sum variances, and the
//! asymptotic variance constants.
//!
//! For fractional Gaussian noise with Hurst parameter `H`, the lag-`k`
//! autocovariance is the second difference
//! `rho_H(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`, and the
//! subordinated sequence `H_q(Z_k)` has covariance `q! rho_H(k)^q`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Hurst parameter, constrained to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("Hurst parameter must lie in (0,1), got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Hermite rank `q >= 1` of the subordination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChaosOrder(u32);

impl ChaosOrder {
    pub fn new(q: u32) -> Result<Self> {
        if q >= 1 {
            Ok(Self(q))
        } else {
            Err(Error::Domain("chaos order q must be >= 1".into()))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

/// `q!` as a float; exact for every order this crate accepts.
pub(crate) fn factorial(q: u32) -> f64 {
    (1..=q as u64).fold(1.0, |acc, v| acc * v as f64)
}

/// Autocovariance specification of the underlying unit-variance sequence.
#[derive(Debug, Clone, Serialize)]
pub enum CovarianceModel {
    /// Increments of fractional Brownian motion with the given Hurst parameter.
    FgnIncrements(HurstParam),
    /// Independent standard Gaussians: `rho(k) = delta_{k0}`.
    WhiteNoise,
    /// Explicit lag list starting at lag 0 (which must equal 1). Lags beyond
    /// the stored range are an error unless `zero_fill` opts into `rho = 0`;
    /// `tail_exponent` optionally certifies `|rho(k)| <= |last| (k/K)^{-b}`
    /// for tail bounds of the series constant.
    Explicit {
        values: Vec<f64>,
        tail_exponent: Option<f64>,
        zero_fill: bool,
    },
}

impl CovarianceModel {
    pub fn fgn(h: f64) -> Result<Self> {
        Ok(Self::FgnIncrements(HurstParam::new(h)?))
    }

    pub fn explicit(values: Vec<f64>, tail_exponent: Option<f64>, zero_fill: bool) -> Result<Self> {
        if values.is_empty() || (values[0] - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("explicit model requires values[0] = 1".into()));
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-12) {
            return Err(Error::Domain("explicit autocovariances must satisfy |rho(k)| <= 1".into()));
        }
        Ok(Self::Explicit { values, tail_exponent, zero_fill })
    }

    /// Autocovariance at lag `|k|`.
    pub fn rho(&self, k: u64) -> Result<f64> {
        match self {
            Self::FgnIncrements(h) => Ok(fgn_autocovariance(*h, k)),
            Self::WhiteNoise => Ok(if k == 0 { 1.0 } else { 0.0 }),
            Self::Explicit { values, zero_fill, .. } => {
                if (k as usize) < values.len() {
                    Ok(values[k as usize])
                } else if *zero_fill {
                    Ok(0.0)
                } else {
                    Err(Error::LagOutOfRange { lag: k, stored: values.len() })
                }
            }
        }
    }

    /// Short identifier used in reports and path dumps.
    pub fn id(&self) -> String {
        match self {
            Self::FgnIncrements(h) => format!("fgn(H={})", h.value()),
            Self::WhiteNoise => "white".into(),
            Self::Explicit { values, .. } => format!("explicit({} lags)", values.len()),
        }
    }
}

/// `rho_H(k)` for fractional Gaussian noise, accurate to a few ulp for every
/// lag up to 2^40.
///
/// The textbook second difference loses all significance at large `k`, so for
/// `k >= 2` the value is computed as `k^{2H} * sum_{j>=1} binom(2H, 2j) k^{-2j}`.
/// All series terms share one sign (the factors `2H - i` are negative for
/// `i >= 2`), so the summation never cancels; it terminates once a term stops
/// moving the partial sum.
pub fn fgn_autocovariance(h: HurstParam, k: u64) -> f64 {
    let a = 2.0 * h.value();
    match k {
        0 => 1.0,
        // rho(1) = 2^{2H-1} - 1, exact through expm1 even for H near 1/2.
        1 => ((a - 1.0) * std::f64::consts::LN_2).exp_m1(),
        _ => {
            let kf = k as f64;
            let x2 = 1.0 / (kf * kf);
            let mut coef = a * (a - 1.0) / 2.0; // binom(a, 2)
            let mut xpow = x2;
            let mut sum = coef * xpow;
            let mut n = 2.0;
            while n < 130.0 {
                coef *= (a - n) / (n + 1.0);
                coef *= (a - n - 1.0) / (n + 2.0);
                n += 2.0;
                xpow *= x2;
                let next = sum + coef * xpow;
                if next == sum {
                    break;
                }
                sum = next;
            }
            kf.powf(a) * sum
        }
    }
}

/// Leading asymptotic of `rho_H(k)^q` in the critical regime `H = 1 - 1/(2q)`:
/// `((1 - 1/(2q)) (1 - 1/q))^q / k`, with an `O(k^{-3})` remainder.
pub fn fgn_autocovariance_asymptotic(q: ChaosOrder, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("asymptotic form requires k >= 1".into()));
    }
    let qf = f64::from(q.get());
    Ok(((1.0 - 0.5 / qf) * (1.0 - 1.0 / qf)).powi(q.get() as i32) / k as f64)
}

/// Covariance of the subordinated sequence: `Cov(H_q(Z_0), H_q(Z_k)) = q! rho(|k|)^q`.
pub fn subordinated_autocovariance(model: &CovarianceModel, q: ChaosOrder, k: i64) -> Result<f64> {
    let rho = model.rho(k.unsigned_abs())?;
    Ok(factorial(q.get()) * rho.powi(q.get() as i32))
}

/// Exact partial-sum variance `E[X_n^2] = q! sum_{|r|<n} (n-|r|) rho(r)^q`,
/// evaluated in O(n) with compensated summation.
pub fn partial_sum_variance(model: &CovarianceModel, q: ChaosOrder, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("partial-sum variance requires n >= 1".into()));
    }
    let qi = q.get() as i32;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    // ascending term magnitude: r = n-1 down to 1
    for r in (1..n).rev() {
        let term = (n - r) as f64 * model.rho(r)?.powi(qi);
        let y = 2.0 * term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(factorial(q.get()) * (n as f64 + sum))
}

/// Exact partial-sum variances for a whole grid of `n` values in one
/// streaming pass over the lags, O(max n) total.
///
/// Uses `E[X_n^2] = q! (n + 2 n S1(n-1) - 2 S2(n-1))` with the prefix sums
/// `S1(m) = sum_{r<=m} rho^q(r)` and `S2(m) = sum_{r<=m} r rho^q(r)`.
pub fn partial_sum_variance_profile(
    model: &CovarianceModel,
    q: ChaosOrder,
    ns: &[u64],
) -> Result<Vec<f64>> {
    if ns.contains(&0) {
        return Err(Error::Domain("partial-sum variance requires n >= 1".into()));
    }
    let mut sorted: Vec<(usize, u64)> = ns.iter().cloned().enumerate().collect();
    sorted.sort_by_key(|&(_, n)| n);
    let qi = q.get() as i32;
    let qfact = factorial(q.get());
    let mut out = vec![0.0; ns.len()];
    let mut s1 = 0.0f64;
    let mut c1 = 0.0f64;
    let mut s2 = 0.0f64;
    let mut c2 = 0.0f64;
    let mut r = 1u64;
    for (pos, n) in sorted {
        while r < n {
            let rho_q = model.rho(r)?.powi(qi);
            let y1 = rho_q - c1;
            let t1 = s1 + y1;
            c1 = (t1 - s1) - y1;
            s1 = t1;
            let y2 = r as f64 * rho_q - c2;
            let t2 = s2 + y2;
            c2 = (t2 - s2) - y2;
            s2 = t2;
            r += 1;
        }
        out[pos] = qfact * (n as f64 + 2.0 * (n as f64 * s1 - s2));
    }
    Ok(out)
}

/// Exact cross-covariance of two block increments,
/// `E[(X_{b1}-X_{a1})(X_{b2}-X_{a2})] = q! sum_{k in [a1,b1), l in [a2,b2)} rho(l-k)^q`.
pub fn block_cross_covariance(
    model: &CovarianceModel,
    q: ChaosOrder,
    block1: (u64, u64),
    block2: (u64, u64),
) -> Result<f64> {
    let (a1, b1) = block1;
    let (a2, b2) = block2;
    if a1 >= b1 || a2 >= b2 {
        return Err(Error::Domain("blocks must be nonempty half-open ranges".into()));
    }
    let qi = q.get() as i32;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in a1..b1 {
        for l in a2..b2 {
            let lag = l.abs_diff(k);
            let term = model.rho(lag)?.powi(qi);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
    }
    Ok(factorial(q.get()) * sum)
}

/// The Breuer--Major limit variance `sigma_q^2 = q! sum_{r in Z} rho(r)^q`,
/// computed by truncating where the integral tail bound drops below `tol`,
/// then doubling the truncation point and checking agreement.
pub fn breuer_major_sigma2(model: &CovarianceModel, q: ChaosOrder, tol: f64) -> Result<f64> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let qf = f64::from(q.get());
    match model {
        CovarianceModel::WhiteNoise => Ok(factorial(q.get())),
        CovarianceModel::FgnIncrements(h) => {
            let hv = h.value();
            if hv >= 1.0 - 0.5 / qf {
                return Err(Error::Regime(format!(
                    "sum_r rho^q diverges for H = {hv} >= 1 - 1/(2q) = {}",
                    1.0 - 0.5 / qf
                )));
            }
            // |rho(k)| ~ H|2H-1| k^{2H-2}; integral tail bound with margin 2.
            let c = hv * (2.0 * hv - 1.0).abs();
            let expo = qf * (2.0 * hv - 2.0);
            let tail = |kcut: f64| -> f64 {
                if c == 0.0 {
                    0.0
                } else {
                    2.0 * factorial(q.get()) * 2.0 * c.powf(qf) * kcut.powf(expo + 1.0)
                        / (-expo - 1.0)
                }
            };
            let mut kcut = 64u64;
            while tail(kcut as f64) > tol && kcut < (1 << 40) {
                kcut *= 2;
            }
            let v1 = truncated_sigma2(model, q, kcut)?;
            let v2 = truncated_sigma2(model, q, 2 * kcut)?;
            if (v1 - v2).abs() > tol {
                return Err(Error::Domain(format!(
                    "series truncation did not stabilize: |{v1} - {v2}| > {tol}"
                )));
            }
            Ok(v2)
        }
        CovarianceModel::Explicit { values, tail_exponent, zero_fill } => {
            let kmax = values.len() as u64 - 1;
            if let Some(b) = tail_exponent {
                // |rho(k)| <= |rho(kmax)| (k/kmax)^{-b} for k > kmax
                let e = -b * qf;
                if e >= -1.0 {
                    return Err(Error::Regime("certified tail does not give a summable series".into()));
                }
                let last = values[kmax as usize].abs();
                let tail = 2.0 * factorial(q.get()) * last.powf(qf) * (kmax as f64) / (-e - 1.0);
                if tail > tol {
                    return Err(Error::Domain(format!(
                        "certified tail bound {tail:.3e} exceeds tolerance {tol:.3e}"
                    )));
                }
                truncated_sigma2(model, q, kmax)
            } else if *zero_fill {
                truncated_sigma2(model, q, kmax)
            } else {
                Err(Error::LagOutOfRange { lag: kmax + 1, stored: values.len() })
            }
        }
    }
}

fn truncated_sigma2(model: &CovarianceModel, q: ChaosOrder, kcut: u64) -> Result<f64> {
    let qi = q.get() as i32;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for r in (1..=kcut).rev() {
        let term = model.rho(r)?.powi(qi);
        let y = 2.0 * term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(factorial(q.get()) * (1.0 + sum))
}

/// The critical-regime variance constant `c_q = 2 q! ((1-1/(2q))(1-1/q))^q`
/// governing `E[X_n^2] ~ c_q n ln n` at `H = 1 - 1/(2q)`.
pub fn critical_variance_constant(q: ChaosOrder) -> Result<f64> {
    if q.get() < 2 {
        return Err(Error::Regime(
            "q = 1 is the Gaussian case; the critical regime needs q >= 2".into(),
        ));
    }
    let qf = f64::from(q.get());
    Ok(2.0 * factorial(q.get()) * ((1.0 - 0.5 / qf) * (1.0 - 1.0 / qf)).powi(q.get() as i32))
}
